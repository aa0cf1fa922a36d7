//! Wave functions of the shift operator: the eigenfunction χ(z) = z^{-1/(x eps)}
//! of the bare shift, amplitude-level eigen residuals, and the first-order
//! dressing system.
//!
//! Run with: `cargo run --example wave_functions`

use gqtoda::expr::Expr;
use gqtoda::operator::{
    chi, dressing_residual, lax_operator, lax_with_force, wave_eigen_residual, LaxFields,
    WaveSample,
};
use gqtoda::qshift::{mobius_shift, ShiftParams};
use rand::{Rng, SeedableRng};

fn main() {
    let params = ShiftParams::from_exp_epsilon(1.25).unwrap();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);

    println!("the bare shift acts on chi as multiplication by z:");
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let z = rng.random_range(0.2..5.0);
        let x = rng.random_range(0.05..0.35);
        let shifted = mobius_shift(x, 1, &params).unwrap();
        let lhs = chi(z, shifted, &params).unwrap();
        let rhs = z * chi(z, x, &params).unwrap();
        worst = worst.max((lhs - rhs).abs() / (1.0 + rhs.abs()));
    }
    println!("  max relative |Λχ - zχ| over 100 random (z, x): {worst:.3e}");
    println!();

    println!("free operator, unit amplitude: the eigen residual vanishes exactly:");
    let free = lax_with_force(&Expr::constant(0.0), &Expr::constant(0.0), params);
    let unit = WaveSample::new(1.7, Expr::constant(1.0)).unwrap();
    println!(
        "  residual at x = 0.2: {:.3e}",
        wave_eigen_residual(&free, &unit, 0.2).unwrap()
    );
    println!();

    println!("generic fields with an undressed amplitude leave the defect u + e^v/z:");
    let fields = LaxFields::random_smooth(&mut rng, -18.0, -4.0);
    let lax = lax_operator(&fields, params);
    let z = 2.3;
    let wave = WaveSample::new(z, Expr::constant(1.0)).unwrap();
    for x in [0.1, 0.2, 0.3] {
        let r = wave_eigen_residual(&lax, &wave, x).unwrap();
        let defect = fields.u().eval(x, 0.0).unwrap() + fields.v().exp().eval(x, 0.0).unwrap() / z;
        println!("  x = {x}: residual {r:+.12}, u + e^v/z = {defect:+.12}");
    }
    println!();

    println!("first-order dressing system on a constant background:");
    let phi = Expr::constant(0.7);
    let omega1 = Expr::t().scale(-1.0 / params.epsilon()).add(&Expr::constant(2.0));
    let (r1, r2) = dressing_residual(&phi, &omega1, 0.3, 1.2, &params).unwrap();
    println!("  (r1, r2) = ({r1:.3e}, {r2:.3e})");
    let bad_omega = Expr::constant(0.0);
    let steep = Expr::x().recip().neg().scale(0.5);
    let (_, r2_bad) = dressing_residual(&steep, &bad_omega, 0.3, 0.0, &params).unwrap();
    println!("  a non-solution is flagged: r2 = {r2_bad:.6} (non-zero)");
}
