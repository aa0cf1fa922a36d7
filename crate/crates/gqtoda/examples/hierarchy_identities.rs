//! The shift-operator Laurent algebra: Lax operator, flows, Hamiltonian
//! densities, and the recursion / tau-symmetry identities certifying the
//! bi-Hamiltonian structure.
//!
//! Run with: `cargo run --example hierarchy_identities`

use gqtoda::operator::{
    flow_rhs, hamiltonian_density, lax_operator, recursion_residual, tau_symmetry_residual,
    HierarchyLimits, LaxFields,
};
use gqtoda::qshift::{Domain, ShiftParams};
use rand::SeedableRng;

fn main() {
    let params = ShiftParams::from_exp_epsilon(1.25).unwrap();
    let limits = HierarchyLimits::default();
    let domain = Domain::new(0.05, 0.35, limits.max_band, params).unwrap();
    let samples = domain.sample(64);

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
    let fields = LaxFields::random_smooth(&mut rng, -18.0, -4.0);
    let lax = lax_operator(&fields, params);
    println!(
        "Lax operator L = Λ + u + e^v Λ⁻¹ over random smooth fields; band = {:?}",
        lax.band().unwrap()
    );
    println!();

    println!("Hamiltonian densities h_j = (1/j!) Res L^j at x = 0.2:");
    for j in 1..=4usize {
        let h = hamiltonian_density(&fields, j, params, &limits).unwrap();
        println!("  h_{j} = {:+.12}", h.eval(0.2, 0.0).unwrap());
    }
    println!();

    println!("the t1 flow in closed form (eps * du/dt1 = V(x/(1-eps x)) - V(x), V = e^v):");
    let rhs = flow_rhs(&fields, 1, params, &samples, &limits).unwrap();
    let force = fields.v().exp();
    let mut worst = 0.0f64;
    for &x in &samples {
        let want = (force.shift(1, &params).eval(x, 0.0).unwrap()
            - force.eval(x, 0.0).unwrap())
            / params.epsilon();
        let got = rhs.du_dt.eval(x, 0.0).unwrap();
        worst = worst.max((got - want).abs() / (1.0 + want.abs()));
    }
    println!("  max relative defect vs commutator route: {worst:.3e}");
    println!();

    println!("bi-Hamiltonian recursion residual n a_(n;1) - [L B_(n-1)]_1:");
    for n in 2..=4usize {
        let residual = recursion_residual(&fields, n, params, &limits).unwrap();
        let mut worst = 0.0f64;
        for &x in &samples {
            worst = worst.max(residual.eval(x, 0.0).unwrap().abs());
        }
        println!("  n = {n}: max |residual| = {worst:.3e}");
    }
    println!();

    println!("tau symmetry Res[(L^m)_+, L^n] = Res[(L^n)_+, L^m]:");
    for (m, n) in [(1usize, 2usize), (1, 3), (2, 3), (2, 4), (3, 4)] {
        let residual = tau_symmetry_residual(&fields, m, n, params, &limits).unwrap();
        let mut worst = 0.0f64;
        for &x in &samples {
            worst = worst.max(residual.eval(x, 0.0).unwrap().abs());
        }
        println!("  (m, n) = ({m}, {n}): max |residual| = {worst:.3e}");
    }
    println!();

    println!("band overflow is caught, not silently truncated:");
    let tight = HierarchyLimits {
        max_power: 6,
        max_band: 1,
    };
    match gqtoda::operator::flow_generator(&lax, 2, &tight) {
        Err(e) => println!("  B_2 with max_band = 1: {e}"),
        Ok(_) => println!("  unexpected success"),
    }
}
