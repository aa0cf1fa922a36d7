//! Exact closed-form scalar fields of `(x, t)`.
//!
//! An [`Expr`] is a small expression tree built from constants, the two
//! coordinates, sums, products, reciprocals, exponentials, logarithms and
//! Möbius shifts of the space coordinate. Evaluation is pure and exact
//! (argument substitution, never interpolation), and every expression
//! carries analytic first and second t-derivative rules through [`Expr::dt`].
//!
//! Identity checks in this crate hold at the 1e-10 level and below, which is
//! why coefficient functions are kept as closed forms instead of grid
//! samples: a Möbius shift moves a point off any fixed x-grid.

use std::fmt;
use std::sync::Arc;

use crate::qshift::{self, ShiftParams};

/// Errors surfaced while evaluating an expression at a point.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    /// `x/(1 - k eps x)` left the chart of the shift flow.
    #[error("Möbius pole: 1 - k·ε·x vanishes at x = {x}, k = {k}")]
    Pole { x: f64, k: i64 },
    /// The coordinate change y = -1/x (or its inverse) at the excluded point.
    #[error("coordinate change undefined at 0")]
    OriginPole,
    #[error("division by zero at (x, t) = ({x}, {t})")]
    DivByZero { x: f64, t: f64 },
    #[error("log of non-positive value {value} at (x, t) = ({x}, {t})")]
    LogDomain { value: f64, x: f64, t: f64 },
    #[error("positivity violation: value {value} <= 0 at (x, t) = ({x}, {t})")]
    NonPositive { value: f64, x: f64, t: f64 },
    #[error("evaluation produced a non-finite value at (x, t) = ({x}, {t})")]
    NonFinite { x: f64, t: f64 },
}

#[derive(Debug)]
enum Kind {
    Const(f64),
    X,
    T,
    Add(Expr, Expr),
    Mul(Expr, Expr),
    Neg(Expr),
    Recip(Expr),
    Exp(Expr),
    Log(Expr),
    /// Identity on positive values, evaluation error otherwise.
    Positive(Expr),
    /// `f(x/(1 - k eps x), t)` — exact argument substitution.
    Shift { k: i64, epsilon: f64, inner: Expr },
}

#[derive(Debug)]
struct Node {
    kind: Kind,
    has_t: bool,
}

/// A deterministic evaluation rule `(x, t) -> f64` with analytic t-derivatives.
///
/// Values are immutable after construction; cloning is cheap (`Arc`).
#[derive(Clone, Debug)]
pub struct Expr {
    node: Arc<Node>,
}

fn wrap(kind: Kind, has_t: bool) -> Expr {
    Expr {
        node: Arc::new(Node { kind, has_t }),
    }
}

impl Expr {
    pub fn constant(c: f64) -> Expr {
        wrap(Kind::Const(c), false)
    }

    /// The space coordinate.
    pub fn x() -> Expr {
        wrap(Kind::X, false)
    }

    /// The time coordinate.
    pub fn t() -> Expr {
        wrap(Kind::T, true)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self.node.kind {
            Kind::Const(c) => Some(c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.node.kind, Kind::Const(c) if c == 0.0)
    }

    /// True when the value can depend on `t`.
    pub fn depends_on_t(&self) -> bool {
        self.node.has_t
    }

    pub fn add(&self, other: &Expr) -> Expr {
        if self.is_zero() {
            return other.clone();
        }
        if other.is_zero() {
            return self.clone();
        }
        if let (Some(a), Some(b)) = (self.as_const(), other.as_const()) {
            return Expr::constant(a + b);
        }
        // a + (-a) collapses so that trimming in the operator algebra sees
        // an actual zero coefficient.
        if let Kind::Neg(inner) = &other.node.kind {
            if inner == self {
                return Expr::constant(0.0);
            }
        }
        if let Kind::Neg(inner) = &self.node.kind {
            if inner == other {
                return Expr::constant(0.0);
            }
        }
        wrap(
            Kind::Add(self.clone(), other.clone()),
            self.node.has_t || other.node.has_t,
        )
    }

    pub fn sub(&self, other: &Expr) -> Expr {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Expr) -> Expr {
        if let (Some(a), Some(b)) = (self.as_const(), other.as_const()) {
            return Expr::constant(a * b);
        }
        for (c, e) in [(self, other), (other, self)] {
            if let Some(v) = c.as_const() {
                if v == 0.0 {
                    return Expr::constant(0.0);
                }
                if v == 1.0 {
                    return e.clone();
                }
                if v == -1.0 {
                    return e.neg();
                }
            }
        }
        wrap(
            Kind::Mul(self.clone(), other.clone()),
            self.node.has_t || other.node.has_t,
        )
    }

    pub fn scale(&self, c: f64) -> Expr {
        Expr::constant(c).mul(self)
    }

    pub fn neg(&self) -> Expr {
        if let Some(c) = self.as_const() {
            return Expr::constant(-c);
        }
        if let Kind::Neg(inner) = &self.node.kind {
            return inner.clone();
        }
        wrap(Kind::Neg(self.clone()), self.node.has_t)
    }

    pub fn recip(&self) -> Expr {
        if let Some(c) = self.as_const() {
            if c != 0.0 {
                return Expr::constant(1.0 / c);
            }
        }
        if let Kind::Recip(inner) = &self.node.kind {
            return inner.clone();
        }
        wrap(Kind::Recip(self.clone()), self.node.has_t)
    }

    pub fn div(&self, other: &Expr) -> Expr {
        self.mul(&other.recip())
    }

    pub fn exp(&self) -> Expr {
        if let Some(c) = self.as_const() {
            return Expr::constant(c.exp());
        }
        wrap(Kind::Exp(self.clone()), self.node.has_t)
    }

    pub fn log(&self) -> Expr {
        if let Some(c) = self.as_const() {
            if c > 0.0 {
                return Expr::constant(c.ln());
            }
        }
        wrap(Kind::Log(self.clone()), self.node.has_t)
    }

    /// Identity on positive values; evaluation fails on values `<= 0`.
    pub fn positive(&self) -> Expr {
        wrap(Kind::Positive(self.clone()), self.node.has_t)
    }

    /// Möbius-shifted field: `self(x/(1 - k eps x), t)`.
    pub fn shift(&self, k: i64, params: &ShiftParams) -> Expr {
        self.shift_raw(k, params.epsilon())
    }

    fn shift_raw(&self, k: i64, epsilon: f64) -> Expr {
        if k == 0 || self.as_const().is_some() {
            return self.clone();
        }
        if let Kind::Shift {
            k: k0,
            epsilon: e0,
            inner,
        } = &self.node.kind
        {
            // One-parameter group law: successive shifts add.
            if *e0 == epsilon {
                return inner.shift_raw(k0 + k, epsilon);
            }
        }
        wrap(
            Kind::Shift {
                k,
                epsilon,
                inner: self.clone(),
            },
            self.node.has_t,
        )
    }

    /// Analytic t-derivative (sum/product/chain rules, exact on the tree).
    pub fn dt(&self) -> Expr {
        if !self.node.has_t {
            return Expr::constant(0.0);
        }
        match &self.node.kind {
            Kind::T => Expr::constant(1.0),
            Kind::Add(a, b) => a.dt().add(&b.dt()),
            Kind::Mul(a, b) => a.dt().mul(b).add(&a.mul(&b.dt())),
            Kind::Neg(a) => a.dt().neg(),
            Kind::Recip(a) => a.dt().div(&a.mul(a)).neg(),
            Kind::Exp(a) => a.dt().mul(self),
            Kind::Log(a) => a.dt().div(a),
            Kind::Positive(a) => a.dt(),
            Kind::Shift { k, epsilon, inner } => inner.dt().shift_raw(*k, *epsilon),
            Kind::Const(_) | Kind::X => unreachable!("t-free nodes are caught above"),
        }
    }

    /// Analytic second t-derivative.
    pub fn dt2(&self) -> Expr {
        self.dt().dt()
    }

    /// Evaluates the expression at `(x, t)`; the result is checked finite.
    pub fn eval(&self, x: f64, t: f64) -> Result<f64, EvalError> {
        let v = self.eval_inner(x, t)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite { x, t })
        }
    }

    fn eval_inner(&self, x: f64, t: f64) -> Result<f64, EvalError> {
        match &self.node.kind {
            Kind::Const(c) => Ok(*c),
            Kind::X => Ok(x),
            Kind::T => Ok(t),
            Kind::Add(a, b) => Ok(a.eval_inner(x, t)? + b.eval_inner(x, t)?),
            Kind::Mul(a, b) => Ok(a.eval_inner(x, t)? * b.eval_inner(x, t)?),
            Kind::Neg(a) => Ok(-a.eval_inner(x, t)?),
            Kind::Recip(a) => {
                let v = a.eval_inner(x, t)?;
                if v == 0.0 {
                    return Err(EvalError::DivByZero { x, t });
                }
                Ok(1.0 / v)
            }
            Kind::Exp(a) => Ok(a.eval_inner(x, t)?.exp()),
            Kind::Log(a) => {
                let v = a.eval_inner(x, t)?;
                if v <= 0.0 {
                    return Err(EvalError::LogDomain { value: v, x, t });
                }
                Ok(v.ln())
            }
            Kind::Positive(a) => {
                let v = a.eval_inner(x, t)?;
                if v <= 0.0 {
                    return Err(EvalError::NonPositive { value: v, x, t });
                }
                Ok(v)
            }
            Kind::Shift { k, epsilon, inner } => {
                let shifted = qshift::mobius_shift_eps(x, *k, *epsilon)?;
                inner.eval_inner(shifted, t)
            }
        }
    }
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        if Arc::ptr_eq(&self.node, &other.node) {
            return true;
        }
        match (&self.node.kind, &other.node.kind) {
            (Kind::Const(a), Kind::Const(b)) => a == b,
            (Kind::X, Kind::X) | (Kind::T, Kind::T) => true,
            (Kind::Add(a1, b1), Kind::Add(a2, b2))
            | (Kind::Mul(a1, b1), Kind::Mul(a2, b2)) => a1 == a2 && b1 == b2,
            (Kind::Neg(a), Kind::Neg(b))
            | (Kind::Recip(a), Kind::Recip(b))
            | (Kind::Exp(a), Kind::Exp(b))
            | (Kind::Log(a), Kind::Log(b))
            | (Kind::Positive(a), Kind::Positive(b)) => a == b,
            (
                Kind::Shift {
                    k: k1,
                    epsilon: e1,
                    inner: i1,
                },
                Kind::Shift {
                    k: k2,
                    epsilon: e2,
                    inner: i2,
                },
            ) => k1 == k2 && e1 == e2 && i1 == i2,
            _ => false,
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.node.kind {
            Kind::Const(c) => write!(f, "{c}"),
            Kind::X => write!(f, "x"),
            Kind::T => write!(f, "t"),
            Kind::Add(a, b) => write!(f, "({a} + {b})"),
            Kind::Mul(a, b) => write!(f, "{a}*{b}"),
            Kind::Neg(a) => write!(f, "-({a})"),
            Kind::Recip(a) => write!(f, "1/({a})"),
            Kind::Exp(a) => write!(f, "exp({a})"),
            Kind::Log(a) => write!(f, "log({a})"),
            Kind::Positive(a) => write!(f, "({a})"),
            Kind::Shift { k, inner, .. } => write!(f, "sh[{k}]({inner})"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> ShiftParams {
        ShiftParams::from_exp_epsilon(1.25).unwrap()
    }

    /// Centered finite difference in t, the oracle for analytic derivatives.
    fn fd_dt(f: &Expr, x: f64, t: f64, h: f64) -> f64 {
        (f.eval(x, t + h).unwrap() - f.eval(x, t - h).unwrap()) / (2.0 * h)
    }

    fn fd_dt2(f: &Expr, x: f64, t: f64, h: f64) -> f64 {
        (f.eval(x, t + h).unwrap() - 2.0 * f.eval(x, t).unwrap() + f.eval(x, t - h).unwrap())
            / (h * h)
    }

    /// exp(-alpha/x + beta t), the building block of every tau function here.
    fn phase_exp(alpha: f64, beta: f64) -> Expr {
        Expr::x()
            .recip()
            .scale(-alpha)
            .add(&Expr::t().scale(beta))
            .exp()
    }

    #[test]
    fn analytic_dt_matches_centered_differences() {
        let p = params();
        let f = phase_exp(-5.0, -1.2)
            .add(&Expr::constant(1.0))
            .log()
            .mul(&Expr::t().mul(&Expr::t()).add(&Expr::constant(2.0)).recip())
            .add(&phase_exp(2.0, 0.7).shift(1, &p));
        let h = 1e-5;
        for &(x, t) in &[(0.7, 0.3), (1.3, -0.8), (2.1, 1.7)] {
            let exact = f.dt().eval(x, t).unwrap();
            let approx = fd_dt(&f, x, t, h);
            assert!(
                (exact - approx).abs() <= 1e-8 * (1.0 + exact.abs()),
                "dt mismatch at ({x}, {t}): {exact} vs {approx}"
            );
            let exact2 = f.dt2().eval(x, t).unwrap();
            let approx2 = fd_dt2(&f, x, t, 1e-4);
            assert!(
                (exact2 - approx2).abs() <= 1e-6 * (1.0 + exact2.abs()),
                "dt2 mismatch at ({x}, {t}): {exact2} vs {approx2}"
            );
        }
    }

    #[test]
    fn dt_of_t_free_expression_is_zero() {
        let p = params();
        let f = Expr::x().recip().exp().shift(-2, &p);
        assert!(f.dt().is_zero());
        assert!(!f.depends_on_t());
    }

    #[test]
    fn cancellation_collapses_to_zero() {
        let f = Expr::x().exp().add(&Expr::t());
        assert!(f.sub(&f).is_zero());
        assert!(f.add(&f.scale(-1.0)).is_zero());
    }

    #[test]
    fn shift_composes_by_addition_of_orders() {
        let p = params();
        let f = Expr::x().recip();
        let g = f.shift(1, &p).shift(2, &p);
        let direct = f.shift(3, &p);
        let x = 0.4;
        assert!((g.eval(x, 0.0).unwrap() - direct.eval(x, 0.0).unwrap()).abs() < 1e-14);
    }

    #[test]
    fn shift_of_constant_is_constant() {
        let p = params();
        let c = Expr::constant(3.5);
        assert_eq!(c.shift(4, &p).as_const(), Some(3.5));
    }

    #[test]
    fn positivity_guard_fires() {
        let f = Expr::x().positive();
        assert!(f.eval(2.0, 0.0).is_ok());
        assert!(matches!(
            f.eval(-2.0, 0.0),
            Err(EvalError::NonPositive { .. })
        ));
    }

    #[test]
    fn log_domain_error() {
        let f = Expr::x().log();
        assert!(matches!(
            f.eval(-1.0, 0.0),
            Err(EvalError::LogDomain { .. })
        ));
    }

    #[test]
    fn pole_error_propagates_through_shift() {
        let p = params();
        let f = Expr::x().shift(1, &p);
        let x_pole = 1.0 / p.epsilon();
        assert!(matches!(f.eval(x_pole, 0.0), Err(EvalError::Pole { .. })));
    }

    #[test]
    fn values_are_shareable_across_threads() {
        fn assert_send_sync<T: Send + Sync>() {}
        assert_send_sync::<Expr>();
        assert_send_sync::<crate::operator::DifferenceOperator>();
        assert_send_sync::<crate::hirota::SolitonSpec>();
        assert_send_sync::<crate::simulator::LatticeState>();

        // Concurrent evaluation of one shared expression.
        let p = params();
        let f = std::sync::Arc::new(
            Expr::x().recip().scale(2.0).exp().shift(1, &p).add(&Expr::t()),
        );
        let expected = f.eval(0.4, 1.0).unwrap();
        let handles: Vec<_> = (0..4)
            .map(|_| {
                let f = f.clone();
                std::thread::spawn(move || f.eval(0.4, 1.0).unwrap())
            })
            .collect();
        for h in handles {
            assert_eq!(h.join().unwrap(), expected);
        }
    }
}
