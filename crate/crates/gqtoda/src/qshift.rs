//! The Möbius shift group and the coordinate change that rectifies it.
//!
//! The forward shift sends `x` to `x/(1 - eps x)`, its k-th power to
//! `x/(1 - k eps x)`; under `y = -1/x` every shift becomes the unit
//! translation `y -> y + k eps`. The pole `x = 1/(k eps)` is the point
//! where `x` leaves the chart of the flow, and evaluation there is an
//! error rather than a NaN.

use crate::expr::{EvalError, Expr};

/// Width of the guard band around each Möbius pole, in units of
/// machine epsilon relative to the pole location.
const POLE_GUARD: f64 = 10.0 * f64::EPSILON;

/// The lattice deformation parameter `eps > 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ShiftParams {
    epsilon: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QshiftError {
    #[error("ε must be positive and finite, got {0}")]
    InvalidEpsilon(f64),
    #[error("empty or non-finite window [{x_min}, {x_max}]")]
    BadWindow { x_min: f64, x_max: f64 },
    #[error("Möbius pole x = {pole} (shift order {k}) lies inside the window")]
    PoleInWindow { pole: f64, k: i64 },
}

impl ShiftParams {
    pub fn new(epsilon: f64) -> Result<Self, QshiftError> {
        if epsilon.is_finite() && epsilon > 0.0 {
            Ok(ShiftParams { epsilon })
        } else {
            Err(QshiftError::InvalidEpsilon(epsilon))
        }
    }

    /// Builds the parameter from `e^ε` (figures quote the deformation that way).
    pub fn from_exp_epsilon(exp_epsilon: f64) -> Result<Self, QshiftError> {
        if !(exp_epsilon.is_finite() && exp_epsilon > 1.0) {
            return Err(QshiftError::InvalidEpsilon(exp_epsilon));
        }
        ShiftParams::new(exp_epsilon.ln())
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }
}

/// `x/(1 - k eps x)`, the k-th power of the forward shift applied to a point.
///
/// Satisfies the one-parameter group law
/// `mobius_shift(mobius_shift(x, a), b) = mobius_shift(x, a + b)`.
pub fn mobius_shift(x: f64, k: i64, params: &ShiftParams) -> Result<f64, EvalError> {
    mobius_shift_eps(x, k, params.epsilon)
}

pub(crate) fn mobius_shift_eps(x: f64, k: i64, epsilon: f64) -> Result<f64, EvalError> {
    if k == 0 {
        return Ok(x);
    }
    let kex = k as f64 * epsilon * x;
    let denom = 1.0 - kex;
    if denom.abs() <= POLE_GUARD * kex.abs() {
        return Err(EvalError::Pole { x, k });
    }
    Ok(x / denom)
}

/// The rectifying coordinate `y = -1/x`.
pub fn x_to_y(x: f64) -> Result<f64, EvalError> {
    if x == 0.0 {
        return Err(EvalError::OriginPole);
    }
    Ok(-1.0 / x)
}

/// Inverse of [`x_to_y`]; `x = -1/y`.
pub fn y_to_x(y: f64) -> Result<f64, EvalError> {
    if y == 0.0 {
        return Err(EvalError::OriginPole);
    }
    Ok(-1.0 / y)
}

/// Central difference `(Λ + Λ⁻¹ - 2) f` as a closed form.
pub fn central_difference(f: &Expr, params: &ShiftParams) -> Expr {
    f.shift(1, params)
        .add(&f.shift(-1, params))
        .sub(&f.scale(2.0))
}

/// A pole-free working window: every `|k| <= max_shift` keeps
/// `1 - k eps x` away from zero for all `x` in `[x_min, x_max]`.
#[derive(Clone, Debug)]
pub struct Domain {
    x_min: f64,
    x_max: f64,
    max_shift: i64,
    params: ShiftParams,
}

impl Domain {
    pub fn new(
        x_min: f64,
        x_max: f64,
        max_shift: i64,
        params: ShiftParams,
    ) -> Result<Self, QshiftError> {
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return Err(QshiftError::BadWindow { x_min, x_max });
        }
        for k in 1..=max_shift.max(0) {
            for signed in [k, -k] {
                let pole = 1.0 / (signed as f64 * params.epsilon);
                let guard = POLE_GUARD * pole.abs();
                if pole >= x_min - guard && pole <= x_max + guard {
                    return Err(QshiftError::PoleInWindow { pole, k: signed });
                }
            }
        }
        Ok(Domain {
            x_min,
            x_max,
            max_shift,
            params,
        })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn max_shift(&self) -> i64 {
        self.max_shift
    }

    pub fn params(&self) -> &ShiftParams {
        &self.params
    }

    /// `n` uniformly spaced sample points covering the window (endpoints included).
    pub fn sample(&self, n: usize) -> Vec<f64> {
        assert!(n >= 2, "need at least two sample points");
        let step = (self.x_max - self.x_min) / (n - 1) as f64;
        (0..n).map(|i| self.x_min + i as f64 * step).collect()
    }
}
