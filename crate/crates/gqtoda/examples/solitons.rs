//! Building one-, two- and three-soliton tau functions from the
//! dispersion relation, with the interaction coefficients that position
//! colliding crests.
//!
//! Run with: `cargo run --example solitons`

use gqtoda::hirota::{
    dispersion_beta, force_from_tau, phase_coefficient, triple_coefficient_direct, Branch,
    SolitonMode, SolitonSpec,
};
use gqtoda::qshift::ShiftParams;

fn main() {
    let params = ShiftParams::from_exp_epsilon(1.25).unwrap();

    println!("dispersion relation beta^2 = e^{{alpha eps}} + e^{{-alpha eps}} - 2:");
    for (alpha, branch) in [
        (-5.0, Branch::Negative),
        (6.0, Branch::Negative),
        (-7.9141, Branch::Positive),
    ] {
        let beta = dispersion_beta(alpha, &params, branch);
        println!("  alpha = {alpha:>8}: beta = {beta:+.6}");
    }
    println!();

    let m1 = SolitonMode::from_alpha(-5.0, Branch::Negative, 0.0, &params).unwrap();
    let m2 = SolitonMode::from_alpha(6.0, Branch::Negative, 0.0, &params).unwrap();
    let m3 = SolitonMode::from_alpha(-7.9141, Branch::Positive, 0.0, &params).unwrap();

    println!("pair interaction coefficients A(i,j) = -P(p_i - p_j)/P(p_i + p_j):");
    println!("  A(1,2) = {:.9}", phase_coefficient(&m1, &m2, &params).unwrap());
    println!("  A(1,3) = {:.9}", phase_coefficient(&m1, &m3, &params).unwrap());
    println!("  A(2,3) = {:.9}", phase_coefficient(&m2, &m3, &params).unwrap());
    println!();

    let spec3 = SolitonSpec::new(params, vec![m1, m2, m3]).unwrap();
    let direct = triple_coefficient_direct(&spec3).unwrap();
    let product = spec3.triple_coefficient_product().unwrap();
    println!("three-soliton integrability signature:");
    println!("  A(1,2,3) by order-3 balance   = {direct:.12}");
    println!("  A(1,2)A(1,3)A(2,3)            = {product:.12}");
    println!(
        "  relative difference           = {:.3e}",
        (direct - product).abs() / (1.0 + direct.abs())
    );
    println!();

    println!("one-soliton crest rides theta = 0 with height beta^2/4:");
    let spec1 = SolitonSpec::new(params, vec![m1]).unwrap();
    let force = force_from_tau(&spec1.tau());
    for t in [1.0, 2.0, 4.0] {
        // theta = -alpha/x + beta t = 0 at x = alpha/(beta t).
        let x_peak = m1.alpha() / (m1.beta() * t);
        let v = force.eval(x_peak, t).unwrap();
        println!("  t = {t}: crest at x = {x_peak:.4}, V = {v:.6}");
    }
    println!("  beta^2/4 = {:.6}", m1.beta() * m1.beta() / 4.0);
    println!();

    println!("a two-soliton tau degenerates as one phase is suppressed:");
    let far = SolitonMode::from_alpha(6.0, Branch::Negative, -40.0, &params).unwrap();
    let two = SolitonSpec::new(params, vec![m1, far]).unwrap().tau();
    let one = spec1.tau();
    let (x, t) = (1.0, 2.0);
    println!(
        "  |tau_2(eta_2 = -40) - tau_1| at ({x}, {t}) = {:.3e}",
        (two.eval(x, t).unwrap() - one.eval(x, t).unwrap()).abs()
    );
}
