//! Soliton factory and residual checker.
//!
//! Builds N-soliton tau functions (N <= 3) from dispersion-satisfying modes,
//! derives the force field `V = d²/dt² log f`, and measures how well a
//! candidate annihilates the bilinear form and the lattice equation.
//!
//! A mode is the triple `(alpha, beta, eta)`; the dispersion relation
//! `beta² = e^{alpha eps} + e^{-alpha eps} - 2` ties frequency to
//! wavenumber so a single exponential solves the linearized equation.
//! Modes combine through the even polynomial
//! `P(p) = beta² - e^{alpha eps} - e^{-alpha eps} + 2` evaluated on sums
//! and differences of phase vectors; the two-mode interaction coefficient
//! is `A(i,j) = -P(p_i - p_j)/P(p_i + p_j)`.

use std::ops::{Add, Neg, Sub};

use rand::Rng;

use crate::expr::{EvalError, Expr};
use crate::qshift::ShiftParams;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum HirotaError {
    #[error("alpha must be non-zero (alpha = 0 forces beta = 0: a constant, not a soliton)")]
    ZeroAlpha,
    #[error("mode parameter {name} is not finite: {value}")]
    NonFinite { name: &'static str, value: f64 },
    #[error(
        "dispersion violated: beta² = {beta_sq}, expected {expected} (relative error {rel:.3e})"
    )]
    DispersionViolated {
        beta_sq: f64,
        expected: f64,
        rel: f64,
    },
    #[error("a soliton spec carries 1 to 3 modes, got {0}")]
    ModeCount(usize),
    #[error("resonant combination: interaction denominator P = {value:.3e} vanishes")]
    Resonance { value: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Sign branch of the dispersion relation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Branch {
    Positive,
    Negative,
}

impl Branch {
    fn factor(self) -> f64 {
        match self {
            Branch::Positive => 1.0,
            Branch::Negative => -1.0,
        }
    }
}

/// `sign · sqrt(e^{alpha eps} + e^{-alpha eps} - 2) = sign · 2|sinh(alpha eps / 2)|`.
///
/// The radicand is a perfect square, so both branches are always real.
pub fn dispersion_beta(alpha: f64, params: &ShiftParams, branch: Branch) -> f64 {
    let half = alpha * params.epsilon() / 2.0;
    branch.factor() * 2.0 * half.sinh().abs()
}

/// The exponent vector `(beta, alpha, eta)` that modes combine with; `eta` is
/// inert under the polynomial below.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PhaseVector {
    pub beta: f64,
    pub alpha: f64,
    pub eta: f64,
}

impl Add for PhaseVector {
    type Output = PhaseVector;
    fn add(self, o: PhaseVector) -> PhaseVector {
        PhaseVector {
            beta: self.beta + o.beta,
            alpha: self.alpha + o.alpha,
            eta: self.eta + o.eta,
        }
    }
}

impl Sub for PhaseVector {
    type Output = PhaseVector;
    fn sub(self, o: PhaseVector) -> PhaseVector {
        PhaseVector {
            beta: self.beta - o.beta,
            alpha: self.alpha - o.alpha,
            eta: self.eta - o.eta,
        }
    }
}

impl Neg for PhaseVector {
    type Output = PhaseVector;
    fn neg(self) -> PhaseVector {
        PhaseVector {
            beta: -self.beta,
            alpha: -self.alpha,
            eta: -self.eta,
        }
    }
}

/// `P(p) = beta² - e^{alpha eps} - e^{-alpha eps} + 2`, even in `(beta, alpha)`
/// and independent of `eta`; vanishes exactly on dispersion-satisfying modes.
pub fn hirota_polynomial(p: PhaseVector, params: &ShiftParams) -> f64 {
    // |alpha| keeps the evenness bit-exact.
    let ae = (p.alpha * params.epsilon()).abs();
    p.beta * p.beta - ae.exp() - (-ae).exp() + 2.0
}

fn hirota_polynomial_scale(p: PhaseVector, params: &ShiftParams) -> f64 {
    let ae = (p.alpha * params.epsilon()).abs();
    1.0 + p.beta * p.beta + ae.exp() + (-ae).exp()
}

/// A single dispersion-satisfying mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolitonMode {
    alpha: f64,
    beta: f64,
    eta: f64,
}

const DISPERSION_TOL: f64 = 1e-12;

impl SolitonMode {
    /// Validates the dispersion invariant to relative tolerance 1e-12.
    pub fn new(alpha: f64, beta: f64, eta: f64, params: &ShiftParams) -> Result<Self, HirotaError> {
        for (name, value) in [("alpha", alpha), ("beta", beta), ("eta", eta)] {
            if !value.is_finite() {
                return Err(HirotaError::NonFinite { name, value });
            }
        }
        if alpha == 0.0 {
            return Err(HirotaError::ZeroAlpha);
        }
        let ae = alpha * params.epsilon();
        let expected = ae.exp() + (-ae).exp() - 2.0;
        let beta_sq = beta * beta;
        let rel = (beta_sq - expected).abs() / (1.0 + beta_sq + expected);
        if rel > DISPERSION_TOL {
            return Err(HirotaError::DispersionViolated {
                beta_sq,
                expected,
                rel,
            });
        }
        Ok(SolitonMode { alpha, beta, eta })
    }

    /// Derives `beta` from the dispersion relation on the requested branch.
    pub fn from_alpha(
        alpha: f64,
        branch: Branch,
        eta: f64,
        params: &ShiftParams,
    ) -> Result<Self, HirotaError> {
        let beta = dispersion_beta(alpha, params, branch);
        SolitonMode::new(alpha, beta, eta, params)
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn phase_vector(&self) -> PhaseVector {
        PhaseVector {
            beta: self.beta,
            alpha: self.alpha,
            eta: self.eta,
        }
    }

    /// The phase `theta = -alpha/x + beta t + eta` as a closed form.
    pub fn phase(&self) -> Expr {
        Expr::x()
            .recip()
            .scale(-self.alpha)
            .add(&Expr::t().scale(self.beta))
            .add(&Expr::constant(self.eta))
    }
}

const RESONANCE_TOL: f64 = 1e-12;

/// `A(i, j) = -P(p_i - p_j)/P(p_i + p_j)`; symmetric in its arguments.
///
/// Fails with [`HirotaError::Resonance`] when the denominator vanishes
/// (degenerate pair, e.g. a mode together with its mirror image).
pub fn phase_coefficient(
    i: &SolitonMode,
    j: &SolitonMode,
    params: &ShiftParams,
) -> Result<f64, HirotaError> {
    let pi = i.phase_vector();
    let pj = j.phase_vector();
    let denom = hirota_polynomial(pi + pj, params);
    let scale = hirota_polynomial_scale(pi + pj, params);
    if denom.abs() <= RESONANCE_TOL * scale {
        return Err(HirotaError::Resonance { value: denom });
    }
    Ok(-hirota_polynomial(pi - pj, params) / denom)
}

/// Up to three dispersion-satisfying modes over one deformation parameter.
#[derive(Clone, Debug)]
pub struct SolitonSpec {
    params: ShiftParams,
    modes: Vec<SolitonMode>,
    /// Pair coefficients A(i, j) for i < j, computed once at validation time.
    pair_a: Vec<((usize, usize), f64)>,
}

impl SolitonSpec {
    pub fn new(params: ShiftParams, modes: Vec<SolitonMode>) -> Result<Self, HirotaError> {
        if modes.is_empty() || modes.len() > 3 {
            return Err(HirotaError::ModeCount(modes.len()));
        }
        for mode in &modes {
            // Revalidate against *this* spec's parameters.
            SolitonMode::new(mode.alpha, mode.beta, mode.eta, &params)?;
        }
        let mut pair_a = Vec::new();
        for i in 0..modes.len() {
            for j in (i + 1)..modes.len() {
                pair_a.push(((i, j), phase_coefficient(&modes[i], &modes[j], &params)?));
            }
        }
        Ok(SolitonSpec {
            params,
            modes,
            pair_a,
        })
    }

    pub fn params(&self) -> &ShiftParams {
        &self.params
    }

    pub fn modes(&self) -> &[SolitonMode] {
        &self.modes
    }

    pub fn pair_coefficient(&self, i: usize, j: usize) -> Option<f64> {
        let key = if i < j { (i, j) } else { (j, i) };
        self.pair_a.iter().find(|(k, _)| *k == key).map(|(_, a)| *a)
    }

    /// Product form of the triple coefficient, `A(1,2) A(1,3) A(2,3)`.
    pub fn triple_coefficient_product(&self) -> Option<f64> {
        if self.modes.len() != 3 {
            return None;
        }
        Some(self.pair_a.iter().map(|(_, a)| a).product())
    }

    /// The tau function: `1 + Σ e^{θ_i} + Σ A(i,j) e^{θ_i+θ_j} + ...`,
    /// with the pair product on the top term for N = 3.
    pub fn tau(&self) -> Expr {
        let mut f = Expr::constant(1.0);
        for mode in &self.modes {
            f = f.add(&mode.phase().exp());
        }
        for ((i, j), a) in &self.pair_a {
            let cross = self.modes[*i].phase().add(&self.modes[*j].phase());
            f = f.add(&cross.exp().scale(*a));
        }
        if let Some(top) = self.triple_coefficient_product() {
            let sum = self.modes[0]
                .phase()
                .add(&self.modes[1].phase())
                .add(&self.modes[2].phase());
            f = f.add(&sum.exp().scale(top));
        }
        f
    }
}

/// Direct evaluation of the triple coefficient from the order-3 balance:
///
/// `A(1,2,3) = -[A(1,2) P(p3-p1-p2) + A(1,3) P(p2-p1-p3) + A(2,3) P(p1-p2-p3)] / P(p1+p2+p3)`.
///
/// For dispersion-satisfying modes this equals the pair product
/// [`SolitonSpec::triple_coefficient_product`] — the three-soliton
/// integrability signature, which the tests exercise both ways.
pub fn triple_coefficient_direct(spec: &SolitonSpec) -> Result<f64, HirotaError> {
    if spec.modes.len() != 3 {
        return Err(HirotaError::ModeCount(spec.modes.len()));
    }
    let params = &spec.params;
    let [p1, p2, p3] = [
        spec.modes[0].phase_vector(),
        spec.modes[1].phase_vector(),
        spec.modes[2].phase_vector(),
    ];
    let a12 = spec.pair_coefficient(0, 1).expect("validated pair");
    let a13 = spec.pair_coefficient(0, 2).expect("validated pair");
    let a23 = spec.pair_coefficient(1, 2).expect("validated pair");
    let denom = hirota_polynomial(p1 + p2 + p3, params);
    let scale = hirota_polynomial_scale(p1 + p2 + p3, params);
    if denom.abs() <= RESONANCE_TOL * scale {
        return Err(HirotaError::Resonance { value: denom });
    }
    let numer = a12 * hirota_polynomial(p3 - p1 - p2, params)
        + a13 * hirota_polynomial(p2 - p1 - p3, params)
        + a23 * hirota_polynomial(p1 - p2 - p3, params);
    Ok(-numer / denom)
}

/// The force field `V = (f_tt f - f_t²)/f²`, i.e. `d²/dt² log f`.
///
/// Evaluation fails with a positivity error wherever `f <= 0`.
pub fn force_from_tau(f: &Expr) -> Expr {
    let fp = f.positive();
    let num = f.dt2().mul(&fp).sub(&f.dt().mul(&f.dt()));
    num.div(&fp.mul(&fp))
}

/// Builds the exponential-sum ansatz for arbitrary `(alpha, beta, eta)`
/// triples, without requiring the dispersion relation to hold.
///
/// Solutions of the bilinear equation need dispersion-satisfying modes;
/// this constructor exists so the residual suite can demonstrate that it
/// rejects near-miss candidates.
pub fn tau_from_raw_modes(
    params: &ShiftParams,
    modes: &[(f64, f64, f64)],
) -> Result<Expr, HirotaError> {
    if modes.is_empty() || modes.len() > 3 {
        return Err(HirotaError::ModeCount(modes.len()));
    }
    let phase = |&(alpha, beta, eta): &(f64, f64, f64)| {
        Expr::x()
            .recip()
            .scale(-alpha)
            .add(&Expr::t().scale(beta))
            .add(&Expr::constant(eta))
    };
    let vector = |&(alpha, beta, eta): &(f64, f64, f64)| PhaseVector { beta, alpha, eta };
    let coeff = |a: &(f64, f64, f64), b: &(f64, f64, f64)| -> Result<f64, HirotaError> {
        let denom = hirota_polynomial(vector(a) + vector(b), params);
        let scale = hirota_polynomial_scale(vector(a) + vector(b), params);
        if denom.abs() <= RESONANCE_TOL * scale {
            return Err(HirotaError::Resonance { value: denom });
        }
        Ok(-hirota_polynomial(vector(a) - vector(b), params) / denom)
    };
    let mut f = Expr::constant(1.0);
    for m in modes {
        f = f.add(&phase(m).exp());
    }
    let mut product = 1.0;
    for i in 0..modes.len() {
        for j in (i + 1)..modes.len() {
            let a = coeff(&modes[i], &modes[j])?;
            product *= a;
            f = f.add(&phase(&modes[i]).add(&phase(&modes[j])).exp().scale(a));
        }
    }
    if modes.len() == 3 {
        let sum = phase(&modes[0]).add(&phase(&modes[1])).add(&phase(&modes[2]));
        f = f.add(&sum.exp().scale(product));
    }
    Ok(f)
}

/// Precomputed evaluator for the bilinear residual
/// `R = 2(f_tt f - f_t²) - 2 f(x/(1-εx)) f(x/(1+εx)) + 2 f²`,
/// which vanishes identically on tau functions built from dispersion modes.
pub struct BilinearResidual {
    f: Expr,
    f_t: Expr,
    f_tt: Expr,
    f_up: Expr,
    f_dn: Expr,
}

impl BilinearResidual {
    pub fn new(f: &Expr, params: &ShiftParams) -> Self {
        BilinearResidual {
            f: f.clone(),
            f_t: f.dt(),
            f_tt: f.dt2(),
            f_up: f.shift(1, params),
            f_dn: f.shift(-1, params),
        }
    }

    fn terms(&self, x: f64, t: f64) -> Result<[f64; 4], EvalError> {
        let f = self.f.eval(x, t)?;
        let ft = self.f_t.eval(x, t)?;
        let ftt = self.f_tt.eval(x, t)?;
        let up = self.f_up.eval(x, t)?;
        let dn = self.f_dn.eval(x, t)?;
        Ok([2.0 * ftt * f, -2.0 * ft * ft, -2.0 * up * dn, 2.0 * f * f])
    }

    /// The raw residual value.
    pub fn raw(&self, x: f64, t: f64) -> Result<f64, EvalError> {
        Ok(self.terms(x, t)?.iter().sum())
    }

    /// Residual divided by `1 + magnitude of the largest term`, so the
    /// reported number is scale-free.
    pub fn relative(&self, x: f64, t: f64) -> Result<f64, EvalError> {
        let terms = self.terms(x, t)?;
        let scale = 1.0 + terms.iter().fold(0.0f64, |m, t| m.max(t.abs()));
        Ok(terms.iter().sum::<f64>() / scale)
    }
}

/// One-shot bilinear residual at a point (raw value).
pub fn bilinear_residual(
    f: &Expr,
    x: f64,
    t: f64,
    params: &ShiftParams,
) -> Result<f64, EvalError> {
    BilinearResidual::new(f, params).raw(x, t)
}

/// Precomputed evaluator for the lattice-equation residual
/// `d²/dt² log(1+V) - [V(x/(1-εx)) + V(x/(1+εx)) - 2V]`.
///
/// Evaluation fails with a log-domain error wherever `1 + V <= 0`.
pub struct LatticeResidual {
    /// `log(1 + V)` itself; evaluated first as the domain gate.
    log_gate: Expr,
    lhs: Expr,
    v: Expr,
    v_up: Expr,
    v_dn: Expr,
}

impl LatticeResidual {
    pub fn new(v: &Expr, params: &ShiftParams) -> Self {
        let log1v = Expr::constant(1.0).add(v).log();
        LatticeResidual {
            lhs: log1v.dt2(),
            log_gate: log1v,
            v: v.clone(),
            v_up: v.shift(1, params),
            v_dn: v.shift(-1, params),
        }
    }

    fn terms(&self, x: f64, t: f64) -> Result<[f64; 4], EvalError> {
        self.log_gate.eval(x, t)?;
        Ok([
            self.lhs.eval(x, t)?,
            -self.v_up.eval(x, t)?,
            -self.v_dn.eval(x, t)?,
            2.0 * self.v.eval(x, t)?,
        ])
    }

    pub fn raw(&self, x: f64, t: f64) -> Result<f64, EvalError> {
        Ok(self.terms(x, t)?.iter().sum())
    }

    pub fn relative(&self, x: f64, t: f64) -> Result<f64, EvalError> {
        let terms = self.terms(x, t)?;
        let scale = 1.0 + terms.iter().fold(0.0f64, |m, t| m.max(t.abs()));
        Ok(terms.iter().sum::<f64>() / scale)
    }
}

/// One-shot lattice-equation residual at a point (raw value).
pub fn lattice_residual(v: &Expr, x: f64, t: f64, params: &ShiftParams) -> Result<f64, EvalError> {
    LatticeResidual::new(v, params).raw(x, t)
}

/// Draws a dispersion-satisfying spec with `n` modes, resampling on
/// resonance. Deterministic for a given RNG state.
pub fn random_spec(rng: &mut impl Rng, params: &ShiftParams, n: usize) -> SolitonSpec {
    assert!((1..=3).contains(&n));
    loop {
        let mut modes = Vec::with_capacity(n);
        for _ in 0..n {
            let magnitude = rng.random_range(0.5..6.0);
            let alpha = if rng.random_bool(0.5) { magnitude } else { -magnitude };
            let branch = if rng.random_bool(0.5) {
                Branch::Positive
            } else {
                Branch::Negative
            };
            let eta = rng.random_range(-2.0..2.0);
            modes.push(SolitonMode::from_alpha(alpha, branch, eta, params).expect("alpha != 0"));
        }
        if let Ok(spec) = SolitonSpec::new(*params, modes) {
            // Keep the pair denominators comfortably away from resonance so
            // identity checks are well conditioned.
            let ok = spec.pair_a.iter().all(|(_, a)| a.abs() < 1e6);
            if ok {
                return spec;
            }
        }
    }
}
