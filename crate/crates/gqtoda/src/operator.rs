//! Finite Laurent algebra in the Möbius shift with function coefficients.
//!
//! A [`DifferenceOperator`] is a band `Σ_k c_k(x) Λ^k` with closed-form
//! coefficients; composition follows the monomial rule
//! `(X Λ^i) ∘ (Y Λ^j) = X(x) · Y(x/(1 - i ε x)) · Λ^{i+j}`.
//!
//! On top of the algebra sit the Lax operator `L = Λ + u + e^v Λ⁻¹`, the
//! hierarchy flows `ε ∂_{t_j} L = [(B_j)_+, L]` with `B_j = L^j / j!`, the
//! Hamiltonian densities `h_j = Res B_j`, and the recursion / tau-symmetry
//! identities that certify the bi-Hamiltonian structure. All identities are
//! checked pointwise over sampled windows; the flows are indexed `j >= 1`.

use std::collections::BTreeMap;

use rand::Rng;

use crate::expr::{EvalError, Expr};
use crate::qshift::ShiftParams;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum OperatorError {
    #[error("band overflow: composition reaches Λ^{band}, configured maximum |k| = {max_band}")]
    BandOverflow { band: i64, max_band: i64 },
    #[error("power {j} exceeds the configured maximum {max}")]
    PowerLimit { j: usize, max: usize },
    #[error("flow order must be >= 1")]
    FlowOrder,
    #[error("recursion identity needs n >= 2, got {0}")]
    RecursionOrder(usize),
    #[error(
        "flow commutator leaks outside band [-1, 0]: |coefficient| = {magnitude:.3e} at k = {k}"
    )]
    FlowLeak { k: i64, magnitude: f64 },
    #[error("operators carry different deformation parameters")]
    ParameterMismatch,
    #[error("spectral parameter must be positive, got {0}")]
    InvalidSpectral(f64),
    #[error("coefficient fields must not depend on t")]
    TimeDependentCoefficient,
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Caps on hierarchy powers and composition bands.
#[derive(Clone, Copy, Debug)]
pub struct HierarchyLimits {
    /// Largest admissible power of the Lax operator.
    pub max_power: usize,
    /// Largest admissible |k| in any composition result.
    pub max_band: i64,
}

impl Default for HierarchyLimits {
    fn default() -> Self {
        // Powers to 6 keep L^j composition cost modest; the band cap admits
        // products of two maximal powers.
        HierarchyLimits {
            max_power: 6,
            max_band: 12,
        }
    }
}

/// A finite Laurent band `Σ_k c_k(x) Λ^k` with evaluable coefficients.
///
/// Structurally zero coefficients are trimmed at construction, so the band
/// endpoints always carry non-trivial coefficients. Operators are immutable;
/// every operation allocates a fresh result.
#[derive(Clone, Debug)]
pub struct DifferenceOperator {
    params: ShiftParams,
    coeffs: BTreeMap<i64, Expr>,
}

impl DifferenceOperator {
    pub fn zero(params: ShiftParams) -> Self {
        DifferenceOperator {
            params,
            coeffs: BTreeMap::new(),
        }
    }

    pub fn identity(params: ShiftParams) -> Self {
        Self::shift_power(0, params)
    }

    /// The bare monomial `Λ^k`.
    pub fn shift_power(k: i64, params: ShiftParams) -> Self {
        Self::from_terms(params, [(k, Expr::constant(1.0))])
    }

    pub fn from_terms(
        params: ShiftParams,
        terms: impl IntoIterator<Item = (i64, Expr)>,
    ) -> Self {
        let mut op = Self::zero(params);
        for (k, c) in terms {
            op.accumulate(k, c);
        }
        op
    }

    fn accumulate(&mut self, k: i64, c: Expr) {
        if c.is_zero() {
            return;
        }
        let combined = match self.coeffs.remove(&k) {
            Some(existing) => existing.add(&c),
            None => c,
        };
        if !combined.is_zero() {
            self.coeffs.insert(k, combined);
        }
    }

    pub fn params(&self) -> &ShiftParams {
        &self.params
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// `(k_min, k_max)` of the non-trivial band, or `None` for the zero operator.
    pub fn band(&self) -> Option<(i64, i64)> {
        let lo = self.coeffs.keys().next()?;
        let hi = self.coeffs.keys().last()?;
        Some((*lo, *hi))
    }

    /// Coefficient of `Λ^k` (the zero function when absent).
    pub fn coeff(&self, k: i64) -> Expr {
        self.coeffs
            .get(&k)
            .cloned()
            .unwrap_or_else(|| Expr::constant(0.0))
    }

    pub fn terms(&self) -> impl Iterator<Item = (i64, &Expr)> {
        self.coeffs.iter().map(|(&k, c)| (k, c))
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&k, c) in &other.coeffs {
            out.accumulate(k, c.clone());
        }
        out
    }

    pub fn scale(&self, factor: f64) -> Self {
        let mut out = Self::zero(self.params);
        for (&k, c) in &self.coeffs {
            out.accumulate(k, c.scale(factor));
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-1.0))
    }

    /// Bilinear extension of the monomial product rule; the coefficient of
    /// `Λ^m` in `A ∘ B` is `Σ_{i+j=m} a_i(x) · b_j(x/(1 - i ε x))`.
    pub fn compose(&self, other: &Self, max_band: i64) -> Result<Self, OperatorError> {
        if self.params != other.params {
            return Err(OperatorError::ParameterMismatch);
        }
        let mut out = Self::zero(self.params);
        for (&i, a) in &self.coeffs {
            for (&j, b) in &other.coeffs {
                let m = i + j;
                if m.abs() > max_band {
                    return Err(OperatorError::BandOverflow {
                        band: m,
                        max_band,
                    });
                }
                out.accumulate(m, a.mul(&b.shift(i, &self.params)));
            }
        }
        Ok(out)
    }

    pub fn commutator(&self, other: &Self, max_band: i64) -> Result<Self, OperatorError> {
        Ok(self
            .compose(other, max_band)?
            .sub(&other.compose(self, max_band)?))
    }

    /// The part supported on `k >= 0`.
    pub fn project_plus(&self) -> Self {
        DifferenceOperator {
            params: self.params,
            coeffs: self
                .coeffs
                .iter()
                .filter(|(&k, _)| k >= 0)
                .map(|(&k, c)| (k, c.clone()))
                .collect(),
        }
    }

    /// The part supported on `k < 0`.
    pub fn project_minus(&self) -> Self {
        DifferenceOperator {
            params: self.params,
            coeffs: self
                .coeffs
                .iter()
                .filter(|(&k, _)| k < 0)
                .map(|(&k, c)| (k, c.clone()))
                .collect(),
        }
    }

    /// `Res A = A_0`, the coefficient of `Λ^0`.
    pub fn residue(&self) -> Expr {
        self.coeff(0)
    }

    /// Largest |coefficient| over the sample points, restricted to orders
    /// for which `keep(k)` is false. Used for numeric band-support checks.
    pub fn max_abs_outside(
        &self,
        keep: impl Fn(i64) -> bool,
        samples: &[f64],
    ) -> Result<f64, EvalError> {
        let mut worst = 0.0f64;
        for (&k, c) in &self.coeffs {
            if keep(k) {
                continue;
            }
            for &x in samples {
                worst = worst.max(c.eval(x, 0.0)?.abs());
            }
        }
        Ok(worst)
    }

    fn max_abs_all(&self, samples: &[f64]) -> Result<f64, EvalError> {
        let mut worst = 0.0f64;
        for c in self.coeffs.values() {
            for &x in samples {
                worst = worst.max(c.eval(x, 0.0)?.abs());
            }
        }
        Ok(worst)
    }
}

/// The pair `(u, v)` of x-fields behind `L = Λ + u + e^v Λ⁻¹`.
#[derive(Clone, Debug)]
pub struct LaxFields {
    u: Expr,
    v: Expr,
}

impl LaxFields {
    pub fn new(u: Expr, v: Expr) -> Result<Self, OperatorError> {
        if u.depends_on_t() || v.depends_on_t() {
            return Err(OperatorError::TimeDependentCoefficient);
        }
        Ok(LaxFields { u, v })
    }

    pub fn u(&self) -> &Expr {
        &self.u
    }

    pub fn v(&self) -> &Expr {
        &self.v
    }

    pub fn force(&self) -> Expr {
        self.v.exp()
    }

    /// Random smooth fields: each of `u`, `v` is a sum of three Gaussians in
    /// the rectified coordinate `y = -1/x`, so shifts translate them rigidly.
    pub fn random_smooth(rng: &mut impl Rng, y_lo: f64, y_hi: f64) -> Self {
        let mut bump_sum = || {
            let mut f = Expr::constant(0.0);
            for _ in 0..3 {
                let amp_mag = rng.random_range(0.1..0.5);
                let amp = if rng.random_bool(0.5) { amp_mag } else { -amp_mag };
                let center = rng.random_range(y_lo..y_hi);
                let width = rng.random_range(1.5..4.0);
                let y = Expr::x().recip().neg();
                let d = y.sub(&Expr::constant(center));
                let g = d
                    .mul(&d)
                    .scale(-0.5 / (width * width))
                    .exp()
                    .scale(amp);
                f = f.add(&g);
            }
            f
        };
        let u = bump_sum();
        let v = bump_sum();
        LaxFields::new(u, v).expect("x-only fields")
    }
}

/// `L = Λ + u + e^v Λ⁻¹` with band exactly `[-1, 1]`.
pub fn lax_operator(fields: &LaxFields, params: ShiftParams) -> DifferenceOperator {
    lax_with_force(fields.u(), &fields.force(), params)
}

/// Lax operator directly from the force variable `V = e^v`; passing `V = 0`
/// gives the free operator `Λ`.
pub fn lax_with_force(u: &Expr, force: &Expr, params: ShiftParams) -> DifferenceOperator {
    DifferenceOperator::from_terms(
        params,
        [
            (1, Expr::constant(1.0)),
            (0, u.clone()),
            (-1, force.clone()),
        ],
    )
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

fn lax_power(
    lax: &DifferenceOperator,
    j: usize,
    limits: &HierarchyLimits,
) -> Result<DifferenceOperator, OperatorError> {
    if j == 0 {
        return Err(OperatorError::FlowOrder);
    }
    if j > limits.max_power {
        return Err(OperatorError::PowerLimit {
            j,
            max: limits.max_power,
        });
    }
    let mut power = lax.clone();
    for _ in 1..j {
        power = power.compose(lax, limits.max_band)?;
    }
    Ok(power)
}

/// `B_j = L^j / j!`, the generator of the j-th flow.
pub fn flow_generator(
    lax: &DifferenceOperator,
    j: usize,
    limits: &HierarchyLimits,
) -> Result<DifferenceOperator, OperatorError> {
    Ok(lax_power(lax, j, limits)?.scale(1.0 / factorial(j)))
}

/// Right-hand side of the j-th flow for the two fields.
#[derive(Clone, Debug)]
pub struct FlowRhs {
    pub du_dt: Expr,
    pub dv_dt: Expr,
}

/// Evaluates `ε ∂_{t_j} L = [(B_j)_+, L]` and reads off the field flows.
///
/// The commutator must be supported on band `[-1, 0]` — that is the
/// statement that the flows preserve the Lax form, and it is checked
/// numerically over `sample_xs` rather than assumed. Returns
/// `du/dt_j = C_0 / ε` and `dv/dt_j = C_{-1} e^{-v} / ε`.
pub fn flow_rhs(
    fields: &LaxFields,
    j: usize,
    params: ShiftParams,
    sample_xs: &[f64],
    limits: &HierarchyLimits,
) -> Result<FlowRhs, OperatorError> {
    let lax = lax_operator(fields, params);
    let generator = flow_generator(&lax, j, limits)?;
    let commutator = generator.project_plus().commutator(&lax, limits.max_band)?;

    let scale = 1.0 + commutator.max_abs_all(sample_xs)?;
    for (k, c) in commutator.terms() {
        if (-1..=0).contains(&k) {
            continue;
        }
        for &x in sample_xs {
            let magnitude = c.eval(x, 0.0)?.abs();
            if magnitude > 1e-10 * scale {
                return Err(OperatorError::FlowLeak { k, magnitude });
            }
        }
    }

    let inv_eps = 1.0 / params.epsilon();
    let du_dt = commutator.coeff(0).scale(inv_eps);
    // The k = -1 coefficient is d(e^v)/dt; divide by e^v to express dv/dt.
    let dv_dt = commutator
        .coeff(-1)
        .mul(&fields.v().neg().exp())
        .scale(inv_eps);
    Ok(FlowRhs { du_dt, dv_dt })
}

/// Sparse assignment of the continuous flow times `t_j`, `j >= 1`.
#[derive(Clone, Debug, Default)]
pub struct FlowTimes {
    entries: BTreeMap<usize, f64>,
}

impl FlowTimes {
    pub fn new() -> Self {
        FlowTimes::default()
    }

    pub fn with(mut self, j: usize, value: f64) -> Result<Self, OperatorError> {
        if j == 0 {
            return Err(OperatorError::FlowOrder);
        }
        if value != 0.0 {
            self.entries.insert(j, value);
        }
        Ok(self)
    }

    pub fn get(&self, j: usize) -> f64 {
        self.entries.get(&j).copied().unwrap_or(0.0)
    }

    /// The finitely many nonzero entries, in flow order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.entries.iter().map(|(&j, &v)| (j, v))
    }
}

/// First-order displacement of the fields along the configured flows:
/// `u += Σ_j t_j du/dt_j`, `v += Σ_j t_j dv/dt_j`. The time-stepping
/// oracles build centered differences from two opposite displacements.
pub fn displace_fields(
    fields: &LaxFields,
    times: &FlowTimes,
    params: ShiftParams,
    sample_xs: &[f64],
    limits: &HierarchyLimits,
) -> Result<LaxFields, OperatorError> {
    let mut u = fields.u().clone();
    let mut v = fields.v().clone();
    for (j, t_j) in times.iter() {
        let rhs = flow_rhs(fields, j, params, sample_xs, limits)?;
        u = u.add(&rhs.du_dt.scale(t_j));
        v = v.add(&rhs.dv_dt.scale(t_j));
    }
    LaxFields::new(u, v)
}

/// `h_j = Res B_j = (1/j!) Res L^j`.
pub fn hamiltonian_density(
    fields: &LaxFields,
    j: usize,
    params: ShiftParams,
    limits: &HierarchyLimits,
) -> Result<Expr, OperatorError> {
    let lax = lax_operator(fields, params);
    Ok(flow_generator(&lax, j, limits)?.residue())
}

/// Variational derivatives of `H_n`: with `B_n = Σ_k a_{n;k} Λ^k`,
/// `δH_n/δu = a_{n;0}(x)` and `δH_n/δv = a_{n;1}(x/(1+εx)) e^{v(x)}`.
pub fn variational_derivatives(
    fields: &LaxFields,
    n: usize,
    params: ShiftParams,
    limits: &HierarchyLimits,
) -> Result<(Expr, Expr), OperatorError> {
    let lax = lax_operator(fields, params);
    let generator = flow_generator(&lax, n, limits)?;
    let dh_du = generator.coeff(0);
    let dh_dv = generator.coeff(1).shift(-1, &params).mul(&fields.v().exp());
    Ok((dh_du, dh_dv))
}

/// The recursion identity residual from the bi-Hamiltonian chain:
///
/// `n a_{n;1}(x) - a_{n-1;0}(x/(1-εx)) - u(x) a_{n-1;1}(x) - e^{v(x)} a_{n-1;2}(x/(1+εx))`,
///
/// identically zero because `n B_n = L ∘ B_{n-1}`.
pub fn recursion_residual(
    fields: &LaxFields,
    n: usize,
    params: ShiftParams,
    limits: &HierarchyLimits,
) -> Result<Expr, OperatorError> {
    if n < 2 {
        return Err(OperatorError::RecursionOrder(n));
    }
    let lax = lax_operator(fields, params);
    let b_n = flow_generator(&lax, n, limits)?;
    let b_prev = flow_generator(&lax, n - 1, limits)?;
    let lhs = b_n.coeff(1).scale(n as f64);
    let rhs = b_prev
        .coeff(0)
        .shift(1, &params)
        .add(&fields.u().mul(&b_prev.coeff(1)))
        .add(&fields.v().exp().mul(&b_prev.coeff(2).shift(-1, &params)));
    Ok(lhs.sub(&rhs))
}

/// The tau-symmetry residual
/// `(1/(m! n!)) ( Res[(L^m)_+, L^n] - Res[(L^n)_+, L^m] )`,
/// identically zero; its vanishing is the cross-derivative identity
/// `∂h_m/∂t_n = ∂h_n/∂t_m` that lets all densities descend from one
/// tau function.
pub fn tau_symmetry_residual(
    fields: &LaxFields,
    m: usize,
    n: usize,
    params: ShiftParams,
    limits: &HierarchyLimits,
) -> Result<Expr, OperatorError> {
    let lax = lax_operator(fields, params);
    let lm = lax_power(&lax, m, limits)?;
    let ln = lax_power(&lax, n, limits)?;
    let first = lm.project_plus().commutator(&ln, limits.max_band)?.residue();
    let second = ln.project_plus().commutator(&lm, limits.max_band)?.residue();
    Ok(first.sub(&second).scale(1.0 / (factorial(m) * factorial(n))))
}

/// `χ(z) = z^{-1/(x ε)}`, the eigenfunction of the bare shift: `Λ χ = z χ`.
pub fn chi(z: f64, x: f64, params: &ShiftParams) -> Result<f64, OperatorError> {
    if !(z.is_finite() && z > 0.0) {
        return Err(OperatorError::InvalidSpectral(z));
    }
    if x == 0.0 {
        return Err(OperatorError::Eval(EvalError::OriginPole));
    }
    let value = z.powf(-1.0 / (x * params.epsilon()));
    if value.is_finite() {
        Ok(value)
    } else {
        Err(OperatorError::Eval(EvalError::NonFinite { x, t: 0.0 }))
    }
}

/// A wave-function sample `ψ = A(x) · χ(z)` with `z > 0`.
#[derive(Clone, Debug)]
pub struct WaveSample {
    z: f64,
    amplitude: Expr,
}

impl WaveSample {
    pub fn new(z: f64, amplitude: Expr) -> Result<Self, OperatorError> {
        if !(z.is_finite() && z > 0.0) {
            return Err(OperatorError::InvalidSpectral(z));
        }
        Ok(WaveSample { z, amplitude })
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn amplitude(&self) -> &Expr {
        &self.amplitude
    }
}

/// Amplitude-level eigen-relation residual `(op·ψ - z ψ)/χ`.
///
/// Uses the exact rule `Λ^k (A χ) = A(x/(1-kεx)) z^k χ`, so no power of χ
/// is ever formed: residual `= Σ_k c_k(x) A(Λ^k x) z^k - z A(x)`.
pub fn wave_eigen_residual(
    op: &DifferenceOperator,
    wave: &WaveSample,
    x: f64,
) -> Result<f64, OperatorError> {
    let mut applied = 0.0;
    for (k, c) in op.terms() {
        let shifted = crate::qshift::mobius_shift(x, k, op.params())?;
        applied += c.eval(x, 0.0)? * wave.amplitude.eval(shifted, 0.0)? * wave.z.powi(k as i32);
    }
    Ok(applied - wave.z * wave.amplitude.eval(x, 0.0)?)
}

/// Residuals of the first-order dressing system coupling `φ` and `ω₁`:
///
/// `r1 = ω₁(x) - ω₁(x/(1+εx)) - ε ∂_t(e^φ) e^{-φ}`
/// `r2 = ε ∂_t ω₁(x) + e^{φ(x)} e^{-φ(x/(1-εx))}`
///
/// Both vanish on solutions; cross-eliminating the two equations recovers
/// the lattice equation for `φ`.
pub fn dressing_residual(
    phi: &Expr,
    omega1: &Expr,
    x: f64,
    t: f64,
    params: &ShiftParams,
) -> Result<(f64, f64), OperatorError> {
    let eps = params.epsilon();
    let r1 = omega1.eval(x, t)? - omega1.shift(-1, params).eval(x, t)?
        - eps * phi.exp().dt().eval(x, t)? * phi.neg().exp().eval(x, t)?;
    let r2 = eps * omega1.dt().eval(x, t)?
        + phi.exp().eval(x, t)? * phi.shift(1, params).neg().exp().eval(x, t)?;
    Ok((r1, r2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qshift::Domain;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fig_params() -> ShiftParams {
        ShiftParams::from_exp_epsilon(1.25).unwrap()
    }

    fn test_domain(params: ShiftParams) -> Domain {
        Domain::new(0.05, 0.35, 12, params).unwrap()
    }

    fn seeded_fields(seed: u64) -> LaxFields {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        LaxFields::random_smooth(&mut rng, -18.0, -4.0)
    }

    /// Value-level walk oracle for `Res L^j`, independent of `compose`:
    /// sum over step sequences in {+1, 0, -1}^j that return to 0, with each
    /// factor evaluated at the cumulatively shifted point.
    fn residue_power_oracle(
        fields: &LaxFields,
        j: usize,
        params: &ShiftParams,
        x: f64,
    ) -> f64 {
        fn walk(
            fields: &LaxFields,
            params: &ShiftParams,
            remaining: usize,
            net: i64,
            x: f64,
            point: f64,
        ) -> f64 {
            if remaining == 0 {
                return if net == 0 { 1.0 } else { 0.0 };
            }
            // Prune walks that cannot return to zero.
            if net.unsigned_abs() as usize > remaining {
                return 0.0;
            }
            let mut total = 0.0;
            for (step, weight) in [
                (1i64, 1.0),
                (0, fields.u().eval(point, 0.0).unwrap()),
                (-1, fields.v().exp().eval(point, 0.0).unwrap()),
            ] {
                let next = crate::qshift::mobius_shift(x, net + step, params).unwrap();
                total += weight
                    * walk(fields, params, remaining - 1, net + step, x, next);
            }
            total
        }
        let start = x;
        walk(fields, params, j, 0, x, start)
    }

    #[test]
    fn monomial_inverse_pair_is_identity() {
        let p = fig_params();
        let up = DifferenceOperator::shift_power(1, p);
        let dn = DifferenceOperator::shift_power(-1, p);
        let id = up.compose(&dn, 12).unwrap();
        assert_eq!(id.band(), Some((0, 0)));
        assert_eq!(id.coeff(0).as_const(), Some(1.0));
    }

    #[test]
    fn compose_shifts_the_right_factor() {
        let p = fig_params();
        let v = Expr::x().recip().neg().scale(0.3); // v(x) = 0.3 y
        let up = DifferenceOperator::shift_power(1, p);
        let lower = DifferenceOperator::from_terms(p, [(-1, v.exp())]);
        let prod = up.compose(&lower, 12).unwrap();
        assert_eq!(prod.band(), Some((0, 0)));
        let x = 0.2;
        let expected = v.shift(1, &p).exp().eval(x, 0.0).unwrap();
        let got = prod.coeff(0).eval(x, 0.0).unwrap();
        assert!((got - expected).abs() <= 1e-14 * expected.abs());
    }

    #[test]
    fn addition_cancels_to_empty_band() {
        let p = fig_params();
        let fields = seeded_fields(7);
        let lax = lax_operator(&fields, p);
        let zero = lax.add(&lax.scale(-1.0));
        assert!(zero.is_zero());
        assert_eq!(zero.band(), None);
        // A + 0 = A.
        let same = lax.add(&DifferenceOperator::zero(p));
        assert_eq!(same.band(), lax.band());
    }

    #[test]
    fn compose_is_associative_at_sample_points() {
        let p = fig_params();
        let dom = test_domain(p);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut random_op = |band: std::ops::RangeInclusive<i64>| {
            let mut terms = Vec::new();
            for k in band {
                let c0 = rng.random_range(-1.0..1.0);
                let c1 = rng.random_range(-0.5..0.5);
                // c0 + c1*y keeps coefficients smooth and non-trivial.
                let coeff =
                    Expr::constant(c0).add(&Expr::x().recip().neg().scale(c1 * 0.1));
                terms.push((k, coeff));
            }
            DifferenceOperator::from_terms(p, terms)
        };
        let a = random_op(-1..=1);
        let b = random_op(0..=2);
        let c = random_op(-2..=0);
        let left = a.compose(&b, 12).unwrap().compose(&c, 12).unwrap();
        let right = a.compose(&b.compose(&c, 12).unwrap(), 12).unwrap();
        assert_eq!(left.band(), right.band());
        let (lo, hi) = left.band().unwrap();
        for k in lo..=hi {
            for &x in &dom.sample(9) {
                let lv = left.coeff(k).eval(x, 0.0).unwrap();
                let rv = right.coeff(k).eval(x, 0.0).unwrap();
                assert!(
                    (lv - rv).abs() <= 1e-12 * (1.0 + lv.abs()),
                    "associativity broken at k = {k}, x = {x}"
                );
            }
        }
        // Distributivity over addition.
        let dist_left = a.compose(&b.add(&c), 12).unwrap();
        let dist_right = a.compose(&b, 12).unwrap().add(&a.compose(&c, 12).unwrap());
        let (lo, hi) = dist_right.band().unwrap();
        for k in lo..=hi {
            for &x in &dom.sample(9) {
                let lv = dist_left.coeff(k).eval(x, 0.0).unwrap();
                let rv = dist_right.coeff(k).eval(x, 0.0).unwrap();
                assert!(
                    (lv - rv).abs() <= 1e-12 * (1.0 + lv.abs()),
                    "distributivity broken at k = {k}, x = {x}"
                );
            }
        }
    }

    #[test]
    fn flow_times_hold_sparse_entries() {
        let times = FlowTimes::new()
            .with(1, 0.5)
            .unwrap()
            .with(3, -0.25)
            .unwrap()
            .with(2, 0.0)
            .unwrap();
        assert_eq!(times.get(1), 0.5);
        assert_eq!(times.get(2), 0.0);
        assert_eq!(times.iter().count(), 2);
        assert!(FlowTimes::new().with(0, 1.0).is_err());
    }

    #[test]
    fn band_overflow_is_reported() {
        let p = fig_params();
        let fields = seeded_fields(3);
        let lax = lax_operator(&fields, p);
        assert!(matches!(
            lax.compose(&lax, 1),
            Err(OperatorError::BandOverflow { .. })
        ));
        let limits = HierarchyLimits {
            max_power: 6,
            max_band: 1,
        };
        assert!(matches!(
            flow_generator(&lax, 2, &limits),
            Err(OperatorError::BandOverflow { .. })
        ));
    }

    #[test]
    fn projections_split_exactly() {
        let p = fig_params();
        let fields = seeded_fields(5);
        let lax = lax_operator(&fields, p);
        assert_eq!(lax.band(), Some((-1, 1)));
        let plus = lax.project_plus();
        let minus = lax.project_minus();
        assert_eq!(plus.band(), Some((0, 1)));
        assert_eq!(minus.band(), Some((-1, -1)));
        let back = plus.add(&minus);
        assert_eq!(back.band(), lax.band());
        // Idempotence and purity of each part.
        assert_eq!(plus.project_plus().band(), plus.band());
        assert!(plus.project_minus().is_zero());
        let only_plus = DifferenceOperator::from_terms(
            p,
            [(0, Expr::constant(2.0)), (3, Expr::x())],
        );
        assert!(only_plus.project_minus().is_zero());
    }

    #[test]
    fn residue_reads_the_zero_coefficient() {
        let p = fig_params();
        assert!(DifferenceOperator::shift_power(2, p).residue().is_zero());
        let fields = seeded_fields(9);
        let lax = lax_operator(&fields, p);
        let x = 0.21;
        assert!(
            (lax.residue().eval(x, 0.0).unwrap() - fields.u().eval(x, 0.0).unwrap()).abs()
                < 1e-15
        );
    }

    #[test]
    fn residue_of_lax_square_closed_form() {
        let p = fig_params();
        let fields = seeded_fields(13);
        let lax = lax_operator(&fields, p);
        let square = lax.compose(&lax, 12).unwrap();
        let closed = fields
            .u()
            .mul(fields.u())
            .add(&fields.v().shift(1, &p).exp())
            .add(&fields.v().exp());
        for &x in &test_domain(p).sample(25) {
            let got = square.residue().eval(x, 0.0).unwrap();
            let want = closed.eval(x, 0.0).unwrap();
            assert!((got - want).abs() <= 1e-13 * (1.0 + want.abs()));
        }
    }

    #[test]
    fn free_lax_operator_is_bare_shift() {
        let p = fig_params();
        let free = lax_with_force(&Expr::constant(0.0), &Expr::constant(0.0), p);
        assert_eq!(free.band(), Some((1, 1)));
    }

    #[test]
    fn flow_generator_basics() {
        let p = fig_params();
        let limits = HierarchyLimits::default();
        let fields = seeded_fields(17);
        let lax = lax_operator(&fields, p);
        let b1 = flow_generator(&lax, 1, &limits).unwrap();
        assert_eq!(b1.band(), lax.band());
        let b2 = flow_generator(&lax, 2, &limits).unwrap();
        assert_eq!(b2.coeff(2).as_const(), Some(0.5));
        assert!(matches!(
            flow_generator(&lax, 7, &limits),
            Err(OperatorError::PowerLimit { .. })
        ));
        // Residue of B_2 is the second Hamiltonian density.
        let h2 = hamiltonian_density(&fields, 2, p, &limits).unwrap();
        let x = 0.15;
        assert!(
            (b2.residue().eval(x, 0.0).unwrap() - h2.eval(x, 0.0).unwrap()).abs() < 1e-15
        );
    }

    #[test]
    fn hamiltonian_densities_match_walk_oracle() {
        let p = fig_params();
        let limits = HierarchyLimits::default();
        let fields = seeded_fields(23);
        for j in [1usize, 2, 3, 4] {
            let h = hamiltonian_density(&fields, j, p, &limits).unwrap();
            for &x in &test_domain(p).sample(15) {
                let want = residue_power_oracle(&fields, j, &p, x) / factorial(j);
                let got = h.eval(x, 0.0).unwrap();
                assert!(
                    (got - want).abs() <= 1e-11 * (1.0 + want.abs()),
                    "h_{j} mismatch at x = {x}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn first_flow_reproduces_closed_forms() {
        let p = fig_params();
        let limits = HierarchyLimits::default();
        let fields = seeded_fields(29);
        let dom = test_domain(p);
        let samples = dom.sample(32);
        let rhs = flow_rhs(&fields, 1, p, &samples, &limits).unwrap();
        let eps = p.epsilon();
        let force = fields.v().exp();
        for &x in &dom.sample(100) {
            // eps * du/dt1 = V(x/(1-eps x)) - V(x)
            let du_want = (force.shift(1, &p).eval(x, 0.0).unwrap()
                - force.eval(x, 0.0).unwrap())
                / eps;
            let du_got = rhs.du_dt.eval(x, 0.0).unwrap();
            assert!((du_got - du_want).abs() <= 1e-12 * (1.0 + du_want.abs()));
            // eps * dV/dt1 = u V - V u(x/(1+eps x)) and dv = dV / V.
            let v_val = force.eval(x, 0.0).unwrap();
            let dv_want = (fields.u().eval(x, 0.0).unwrap() * v_val
                - v_val * fields.u().shift(-1, &p).eval(x, 0.0).unwrap())
                / (eps * v_val);
            let dv_got = rhs.dv_dt.eval(x, 0.0).unwrap();
            assert!((dv_got - dv_want).abs() <= 1e-12 * (1.0 + dv_want.abs()));
        }
    }

    #[test]
    fn constant_fields_are_a_fixed_point() {
        let p = fig_params();
        let limits = HierarchyLimits::default();
        let fields =
            LaxFields::new(Expr::constant(0.4), Expr::constant(-0.2)).unwrap();
        let dom = test_domain(p);
        let rhs = flow_rhs(&fields, 1, p, &dom.sample(16), &limits).unwrap();
        for &x in &dom.sample(16) {
            assert!(rhs.du_dt.eval(x, 0.0).unwrap().abs() <= 1e-15);
            assert!(rhs.dv_dt.eval(x, 0.0).unwrap().abs() <= 1e-15);
        }
    }

    #[test]
    fn flow_commutator_stays_in_lax_band() {
        let p = fig_params();
        let limits = HierarchyLimits::default();
        let fields = seeded_fields(31);
        let dom = test_domain(p);
        let samples = dom.sample(24);
        let lax = lax_operator(&fields, p);
        for j in 1..=4usize {
            let generator = flow_generator(&lax, j, &limits).unwrap();
            let commutator = generator
                .project_plus()
                .commutator(&lax, limits.max_band)
                .unwrap();
            let scale = 1.0 + commutator.max_abs_all(&samples).unwrap();
            let leak = commutator
                .max_abs_outside(|k| (-1..=0).contains(&k), &samples)
                .unwrap();
            assert!(
                leak <= 1e-10 * scale,
                "support leak {leak:.3e} at flow order {j}"
            );
            // And flow_rhs itself accepts the commutator.
            assert!(flow_rhs(&fields, j, p, &samples, &limits).is_ok());
        }
    }

    #[test]
    fn second_flow_matches_directional_derivative_of_h2() {
        // Independent route for the j = 2 flow: the cross-derivative
        // identity says du/dt_2 = dh_1/dt_2 = dh_2/dt_1, and the right side
        // only needs the j = 1 flow plus the density h_2. The directional
        // centered difference through fields ± s·F_1 has O(s²) error.
        let p = fig_params();
        let limits = HierarchyLimits::default();
        let fields = seeded_fields(37);
        let dom = test_domain(p);
        let samples = dom.sample(16);
        let f2 = flow_rhs(&fields, 2, p, &samples, &limits).unwrap();
        let s = 1e-4;
        let shifted = |sign: f64| {
            let times = FlowTimes::new().with(1, sign * s).unwrap();
            displace_fields(&fields, &times, p, &samples, &limits).unwrap()
        };
        let plus = hamiltonian_density(&shifted(1.0), 2, p, &limits).unwrap();
        let minus = hamiltonian_density(&shifted(-1.0), 2, p, &limits).unwrap();
        for &x in &dom.sample(12) {
            let fd = (plus.eval(x, 0.0).unwrap() - minus.eval(x, 0.0).unwrap()) / (2.0 * s);
            let lhs = f2.du_dt.eval(x, 0.0).unwrap();
            assert!(
                (lhs - fd).abs() <= 1e-6 * (1.0 + lhs.abs()),
                "cross-flow mismatch at x = {x}: {lhs} vs {fd}"
            );
        }
    }

    #[test]
    fn variational_derivatives_read_off_coefficients() {
        let p = fig_params();
        let limits = HierarchyLimits::default();
        let fields = seeded_fields(41);
        // n = 1: B_1 = L, so a_{1;0} = u and a_{1;1} = 1.
        let (dh_du, dh_dv) = variational_derivatives(&fields, 1, p, &limits).unwrap();
        let x = 0.2;
        assert!(
            (dh_du.eval(x, 0.0).unwrap() - fields.u().eval(x, 0.0).unwrap()).abs() < 1e-15
        );
        let ev = fields.v().exp().eval(x, 0.0).unwrap();
        assert!((dh_dv.eval(x, 0.0).unwrap() - ev).abs() <= 1e-15 * ev);
        // n = 2 against the generator's own coefficients.
        let lax = lax_operator(&fields, p);
        let b2 = flow_generator(&lax, 2, &limits).unwrap();
        let (dh2_du, dh2_dv) = variational_derivatives(&fields, 2, p, &limits).unwrap();
        for &x in &test_domain(p).sample(10) {
            let want_u = b2.coeff(0).eval(x, 0.0).unwrap();
            assert!((dh2_du.eval(x, 0.0).unwrap() - want_u).abs() <= 1e-13 * (1.0 + want_u.abs()));
            let want_v = b2.coeff(1).shift(-1, &p).eval(x, 0.0).unwrap()
                * fields.v().exp().eval(x, 0.0).unwrap();
            assert!((dh2_dv.eval(x, 0.0).unwrap() - want_v).abs() <= 1e-13 * (1.0 + want_v.abs()));
            // e^v > 0 keeps the v-derivative sign tied to a_{n;1}.
            assert!(dh2_dv.eval(x, 0.0).unwrap() * b2.coeff(1).shift(-1, &p).eval(x, 0.0).unwrap() >= 0.0);
        }
    }

    #[test]
    fn recursion_identity_vanishes() {
        let p = fig_params();
        let limits = HierarchyLimits::default();
        let fields = seeded_fields(43);
        let dom = test_domain(p);
        for n in [2usize, 3, 4] {
            let residual = recursion_residual(&fields, n, p, &limits).unwrap();
            for &x in &dom.sample(100) {
                let r = residual.eval(x, 0.0).unwrap();
                assert!(r.abs() <= 1e-11, "recursion residual {r:.3e} at n = {n}");
            }
        }
        assert!(matches!(
            recursion_residual(&fields, 1, p, &limits),
            Err(OperatorError::RecursionOrder(1))
        ));
        // Zero fields: every a_{n;k} is constant, the residual is exactly zero.
        let flat = LaxFields::new(Expr::constant(0.0), Expr::constant(0.0)).unwrap();
        let residual = recursion_residual(&flat, 2, p, &limits).unwrap();
        assert!(residual.eval(0.2, 0.0).unwrap().abs() <= 1e-15);
    }

    #[test]
    fn tau_symmetry_vanishes_and_is_antisymmetric_in_equal_orders() {
        let p = fig_params();
        let limits = HierarchyLimits::default();
        let fields = seeded_fields(47);
        let dom = test_domain(p);
        let equal = tau_symmetry_residual(&fields, 3, 3, p, &limits).unwrap();
        for &x in &dom.sample(10) {
            assert_eq!(equal.eval(x, 0.0).unwrap(), 0.0);
        }
        for (m, n) in [(1usize, 2usize), (1, 3), (2, 3), (1, 4), (2, 4), (3, 4)] {
            let residual = tau_symmetry_residual(&fields, m, n, p, &limits).unwrap();
            for &x in &dom.sample(40) {
                let r = residual.eval(x, 0.0).unwrap();
                assert!(
                    r.abs() <= 1e-11,
                    "tau-symmetry residual {r:.3e} at (m, n) = ({m}, {n})"
                );
            }
        }
    }

    #[test]
    fn tau_symmetry_matches_flow_stepping() {
        // dh_m/dt_n - dh_n/dt_m via centered directional differences along
        // the two flows must agree with zero to O(s²).
        let p = fig_params();
        let limits = HierarchyLimits::default();
        let fields = seeded_fields(53);
        let dom = test_domain(p);
        let samples = dom.sample(16);
        let (m, n) = (2usize, 3usize);
        let s = 1e-3;
        let nudge = |j: usize, sign: f64| {
            let times = FlowTimes::new().with(j, sign * s).unwrap();
            displace_fields(&fields, &times, p, &samples, &limits).unwrap()
        };
        let hm_plus = hamiltonian_density(&nudge(n, 1.0), m, p, &limits).unwrap();
        let hm_minus = hamiltonian_density(&nudge(n, -1.0), m, p, &limits).unwrap();
        let hn_plus = hamiltonian_density(&nudge(m, 1.0), n, p, &limits).unwrap();
        let hn_minus = hamiltonian_density(&nudge(m, -1.0), n, p, &limits).unwrap();
        for &x in &dom.sample(8) {
            let dhm_dtn =
                (hm_plus.eval(x, 0.0).unwrap() - hm_minus.eval(x, 0.0).unwrap()) / (2.0 * s);
            let dhn_dtm =
                (hn_plus.eval(x, 0.0).unwrap() - hn_minus.eval(x, 0.0).unwrap()) / (2.0 * s);
            assert!(
                (dhm_dtn - dhn_dtm).abs() <= 1e-5 * (1.0 + dhm_dtn.abs()),
                "flow-stepping cross-check failed at x = {x}"
            );
        }
    }

    #[test]
    fn vacuum_wave_relation_is_exact() {
        let p = fig_params();
        let free = lax_with_force(&Expr::constant(0.0), &Expr::constant(0.0), p);
        let wave = WaveSample::new(1.7, Expr::constant(1.0)).unwrap();
        for x in [0.1, -0.4, 2.0] {
            let r = wave_eigen_residual(&free, &wave, x).unwrap();
            assert!(r.abs() <= 1e-12 * wave.z(), "vacuum residual {r:.3e}");
        }
    }

    #[test]
    fn undressed_defect_for_unit_amplitude() {
        let p = fig_params();
        let fields = seeded_fields(59);
        let lax = lax_operator(&fields, p);
        let z = 2.3;
        let wave = WaveSample::new(z, Expr::constant(1.0)).unwrap();
        for &x in &test_domain(p).sample(9) {
            let r = wave_eigen_residual(&lax, &wave, x).unwrap();
            let expected = fields.u().eval(x, 0.0).unwrap()
                + fields.v().exp().eval(x, 0.0).unwrap() / z;
            assert!((r - expected).abs() <= 1e-13 * (1.0 + expected.abs()));
        }
    }

    #[test]
    fn unit_spectral_parameter_collapses_powers() {
        let p = fig_params();
        assert_eq!(chi(1.0, 0.3, &p).unwrap(), 1.0);
        let fields = seeded_fields(61);
        let lax = lax_operator(&fields, p);
        let amp = Expr::x().recip().neg().scale(0.2).exp();
        let wave = WaveSample::new(1.0, amp.clone()).unwrap();
        let x = 0.2;
        let r = wave_eigen_residual(&lax, &wave, x).unwrap();
        // With z = 1 the residual is Σ_k c_k(x) A(Λ^k x) - A(x).
        let mut expect = -amp.eval(x, 0.0).unwrap();
        for (k, c) in lax.terms() {
            let shifted = crate::qshift::mobius_shift(x, k, &p).unwrap();
            expect += c.eval(x, 0.0).unwrap() * amp.eval(shifted, 0.0).unwrap();
        }
        assert!((r - expect).abs() <= 1e-13 * (1.0 + expect.abs()));
    }

    #[test]
    fn chi_rejects_bad_inputs() {
        let p = fig_params();
        assert!(matches!(
            chi(-1.0, 0.3, &p),
            Err(OperatorError::InvalidSpectral(_))
        ));
        assert!(chi(2.0, 0.0, &p).is_err());
        assert!(WaveSample::new(0.0, Expr::constant(1.0)).is_err());
    }

    #[test]
    fn dressing_constant_background_solves_the_system() {
        let p = fig_params();
        let eps = p.epsilon();
        let phi = Expr::constant(0.7);
        // With constant φ the second equation needs ε ∂_t ω₁ = -1.
        let omega1 = Expr::t().scale(-1.0 / eps).add(&Expr::constant(2.0));
        let (r1, r2) = dressing_residual(&phi, &omega1, 0.3, 1.2, &p).unwrap();
        assert!(r1.abs() <= 1e-15);
        assert!(r2.abs() <= 1e-12);
    }

    #[test]
    fn dressing_detects_non_solutions() {
        let p = fig_params();
        let phi = Expr::x().recip().neg().scale(0.5); // non-constant in x
        let omega1 = Expr::constant(0.0);
        let (_, r2) = dressing_residual(&phi, &omega1, 0.3, 0.0, &p).unwrap();
        let expected = phi
            .exp()
            .mul(&phi.shift(1, &p).neg().exp())
            .eval(0.3, 0.0)
            .unwrap();
        assert!((r2 - expected).abs() <= 1e-14 * expected.abs());
        assert!(r2.abs() > 1e-3);
    }

    #[test]
    fn dressing_cross_elimination_identity() {
        // For arbitrary (φ, ω₁) the residual definitions satisfy
        // ε ∂_t r1 - r2 + Λ⁻¹ r2 + e^{φ-Λφ} - e^{Λ⁻¹φ-φ} + ε² ∂_t² φ = 0,
        // so on solutions the φ-equation drops out of the pair.
        let p = fig_params();
        let eps = p.epsilon();
        let phi = Expr::x()
            .recip()
            .neg()
            .scale(0.3)
            .add(&Expr::t().scale(0.4))
            .add(&Expr::t().mul(&Expr::x().recip().neg()).scale(0.05));
        let omega1 = Expr::t()
            .scale(0.7)
            .add(&Expr::x().recip().neg().scale(0.2))
            .add(&Expr::t().mul(&Expr::t()).scale(0.1));
        let r1_expr = omega1
            .sub(&omega1.shift(-1, &p))
            .sub(&phi.exp().dt().mul(&phi.neg().exp()).scale(eps));
        let r2_expr = omega1
            .dt()
            .scale(eps)
            .add(&phi.exp().mul(&phi.shift(1, &p).neg().exp()));
        let identity = r1_expr
            .dt()
            .scale(eps)
            .sub(&r2_expr)
            .add(&r2_expr.shift(-1, &p))
            .add(&phi.sub(&phi.shift(1, &p)).exp())
            .sub(&phi.shift(-1, &p).sub(&phi).exp())
            .add(&phi.dt2().scale(eps * eps));
        for &x in &test_domain(p).sample(12) {
            for t in [-0.7, 0.0, 1.3] {
                let v = identity.eval(x, t).unwrap();
                assert!(v.abs() <= 1e-12, "identity violated: {v:.3e} at ({x}, {t})");
            }
        }
        // And the pointwise residual function agrees with the expressions.
        let (r1, r2) = dressing_residual(&phi, &omega1, 0.2, 0.5, &p).unwrap();
        assert!((r1 - r1_expr.eval(0.2, 0.5).unwrap()).abs() <= 1e-13 * (1.0 + r1.abs()));
        assert!((r2 - r2_expr.eval(0.2, 0.5).unwrap()).abs() <= 1e-13 * (1.0 + r2.abs()));
    }

    #[test]
    fn rejects_time_dependent_fields() {
        assert!(matches!(
            LaxFields::new(Expr::t(), Expr::constant(0.0)),
            Err(OperatorError::TimeDependentCoefficient)
        ));
    }
}
