//! Measuring how exactly the soliton constructions annihilate the
//! bilinear form and the lattice equation, and how quickly the residuals
//! detect a broken dispersion relation.
//!
//! Run with: `cargo run --example residual_suite`

use gqtoda::hirota::{
    self, dispersion_beta, force_from_tau, BilinearResidual, Branch, LatticeResidual,
    SolitonMode, SolitonSpec,
};
use gqtoda::qshift::ShiftParams;
use rand::SeedableRng;

fn scan(
    bilinear: &BilinearResidual,
    lattice: &LatticeResidual,
    label: &str,
) -> (f64, f64) {
    let mut bmax = 0.0f64;
    let mut lmax = 0.0f64;
    for i in 0..50 {
        for j in 0..50 {
            let x = 0.3 + (4.0 - 0.3) * i as f64 / 49.0;
            let t = 5.0 * j as f64 / 49.0;
            bmax = bmax.max(bilinear.relative(x, t).unwrap().abs());
            lmax = lmax.max(lattice.relative(x, t).unwrap().abs());
        }
    }
    println!("  {label:<28} bilinear {bmax:.3e}   lattice {lmax:.3e}");
    (bmax, lmax)
}

fn main() {
    let params = ShiftParams::from_exp_epsilon(1.25).unwrap();
    let m1 = SolitonMode::from_alpha(-5.0, Branch::Negative, 0.0, &params).unwrap();
    let m2 = SolitonMode::from_alpha(6.0, Branch::Negative, 0.0, &params).unwrap();
    let m3 = SolitonMode::from_alpha(-7.9141, Branch::Positive, 0.0, &params).unwrap();

    println!("max relative residuals over a 50 x 50 (x, t) window:");
    for (label, modes) in [
        ("one soliton", vec![m1]),
        ("two solitons", vec![m1, m2]),
        ("three solitons", vec![m1, m2, m3]),
    ] {
        let spec = SolitonSpec::new(params, modes).unwrap();
        let tau = spec.tau();
        let force = force_from_tau(&tau);
        scan(
            &BilinearResidual::new(&tau, &params),
            &LatticeResidual::new(&force, &params),
            label,
        );
    }
    println!();

    println!("seeded random dispersion-satisfying specs:");
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    for n in [1usize, 2, 3] {
        let spec = hirota::random_spec(&mut rng, &params, n);
        let tau = spec.tau();
        let force = force_from_tau(&tau);
        scan(
            &BilinearResidual::new(&tau, &params),
            &LatticeResidual::new(&force, &params),
            &format!("random {n}-mode spec"),
        );
    }
    println!();

    println!("a dispersion violation of size d leaves a residual of the same order:");
    for d in [1e-3, 1e-6, 1e-9] {
        let beta = dispersion_beta(-5.0, &params, Branch::Negative) + d;
        let tau = hirota::tau_from_raw_modes(&params, &[(-5.0, beta, 0.0)]).unwrap();
        let res = BilinearResidual::new(&tau, &params);
        let mut worst = 0.0f64;
        for i in 0..50 {
            let x = 0.3 + (4.0 - 0.3) * i as f64 / 49.0;
            let t = -5.0 / (x * beta); // ride the crest where the defect peaks
            worst = worst.max(res.relative(x, t).unwrap().abs());
        }
        println!("  offset {d:.0e}: max relative residual {worst:.3e}");
    }
}
