//! The Möbius shift group and the coordinate that rectifies it.
//!
//! Run with: `cargo run --example shift_group`

use gqtoda::expr::Expr;
use gqtoda::qshift::{central_difference, mobius_shift, x_to_y, y_to_x, Domain, ShiftParams};

fn main() {
    let params = ShiftParams::from_exp_epsilon(1.25).unwrap();
    let eps = params.epsilon();
    println!("deformation: e^eps = 1.25, eps = {eps:.12}");
    println!();

    println!("one-parameter group x -> x/(1 - k eps x):");
    let x = 0.5;
    for k in [-2i64, -1, 0, 1, 2, 3] {
        let shifted = mobius_shift(x, k, &params).unwrap();
        println!("  k = {k:>2}: x = {shifted:.12}");
    }
    let two_step = mobius_shift(mobius_shift(x, 1, &params).unwrap(), 2, &params).unwrap();
    let one_step = mobius_shift(x, 3, &params).unwrap();
    println!("  group law |(k=1 then k=2) - (k=3)| = {:.3e}", (two_step - one_step).abs());
    println!();

    println!("rectifying coordinate y = -1/x turns shifts into translations:");
    let y = x_to_y(x).unwrap();
    for k in [1i64, 5, 12] {
        let lhs = x_to_y(mobius_shift(x, k, &params).unwrap()).unwrap();
        let rhs = y + k as f64 * eps;
        println!("  k = {k:>2}: y(shifted x) = {lhs:.12}, y + k*eps = {rhs:.12}");
    }
    println!("  round trip y_to_x(x_to_y(x)) - x = {:.3e}", y_to_x(y).unwrap() - x);
    println!();

    println!("central difference eigenrelation on f = exp(-alpha/x):");
    let domain = Domain::new(0.05, 0.35, 1, params).unwrap();
    for alpha in [-5.0, 2.0, 6.0] {
        let f = Expr::x().recip().scale(-alpha).exp();
        let d = central_difference(&f, &params);
        let lambda = (alpha * eps).exp() + (-alpha * eps).exp() - 2.0;
        let mut worst = 0.0f64;
        for x in domain.sample(100) {
            let fv = f.eval(x, 0.0).unwrap();
            let dv = d.eval(x, 0.0).unwrap();
            worst = worst.max((dv - lambda * fv).abs() / (1.0 + (lambda * fv).abs()));
        }
        println!("  alpha = {alpha:>5}: eigenvalue {lambda:.9}, max relative defect {worst:.3e}");
    }
    println!();

    println!("poles guard the chart boundary:");
    let pole = 1.0 / eps;
    match mobius_shift(pole, 1, &params) {
        Err(e) => println!("  shift at x = 1/eps: {e}"),
        Ok(v) => println!("  unexpected value {v}"),
    }
    match Domain::new(1.0, 5.0, 1, params) {
        Err(e) => println!("  window [1, 5] with one shift: {e}"),
        Ok(_) => println!("  unexpected: window accepted"),
    }
}
