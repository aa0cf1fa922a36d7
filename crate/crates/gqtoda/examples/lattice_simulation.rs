//! RK4 integration of the lattice equation on the y-uniform grid where the
//! space stencil is exact, compared against the analytic solitons.
//!
//! Run with: `cargo run --example lattice_simulation`

use gqtoda::hirota::{Branch, SolitonMode, SolitonSpec};
use gqtoda::qshift::ShiftParams;
use gqtoda::simulator::{integrate_and_compare, IntegratorConfig, LatticeGrid};

fn main() {
    let params = ShiftParams::from_exp_epsilon(1.25).unwrap();
    let grid = LatticeGrid::new(-45.0, 200, params).unwrap();
    println!(
        "grid: 200 nodes, y in [{:.2}, {:.2}], spacing = eps = {:.6}",
        grid.y(0),
        grid.y(grid.count() - 1),
        grid.spacing()
    );
    println!();

    // The phase offset parks the crest at y = -10, far from both edges.
    let one = SolitonSpec::new(
        params,
        vec![SolitonMode::from_alpha(-5.0, Branch::Negative, -50.0, &params).unwrap()],
    )
    .unwrap();
    let cfg = IntegratorConfig::new(1e-3, 5.0);
    let report = integrate_and_compare(&one, &grid, &cfg).unwrap();
    println!("one soliton, dt = 1e-3, t in [0, 5]:");
    for s in report.series.iter().step_by(10) {
        println!("  t = {:>4.1}: max|V - V_analytic| = {:.3e}", s.t, s.max_abs);
    }
    println!("  worst error {:.3e}, momentum-sum drift {:.3e}", report.max_abs, report.rate_sum_drift);
    println!();

    let two = SolitonSpec::new(
        params,
        vec![
            SolitonMode::from_alpha(-5.0, Branch::Negative, -50.0, &params).unwrap(),
            SolitonMode::from_alpha(6.0, Branch::Negative, 72.0, &params).unwrap(),
        ],
    )
    .unwrap();
    let report2 = integrate_and_compare(&two, &grid, &cfg).unwrap();
    println!("two-soliton collision (crests start at y = -10 and y = -12):");
    println!("  worst error over the run {:.3e}", report2.max_abs);
    println!();

    println!("temporal convergence (the space stencil is exact on this grid):");
    let strong = SolitonSpec::new(
        params,
        vec![
            SolitonMode::from_alpha(-7.9141, Branch::Positive, -50.0 * 7.9141 / 5.0, &params)
                .unwrap(),
        ],
    )
    .unwrap();
    let mut previous: Option<f64> = None;
    for dt in [4e-3, 2e-3, 1e-3] {
        let cfg = IntegratorConfig::new(dt, 5.0);
        let r = integrate_and_compare(&strong, &grid, &cfg).unwrap();
        let err = r.series.last().unwrap().max_abs;
        match previous {
            None => println!("  dt = {dt:.0e}: error {err:.3e}"),
            Some(prev) => println!(
                "  dt = {dt:.0e}: error {err:.3e}   observed order {:.3}",
                (prev / err).log2()
            ),
        }
        previous = Some(err);
    }
}
