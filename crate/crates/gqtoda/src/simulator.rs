//! Direct time integration of the lattice equation on a grid that makes
//! the space stencil exact.
//!
//! The grid is uniform in the rectified coordinate `y = -1/x` with spacing
//! equal to `ε`, so the Möbius shifts map node `n` to nodes `n ± 1` and the
//! only discretization error is temporal. The state variables are
//! `L_n = log(1 + V_n)` and `M_n = dL_n/dt`, which keeps `1 + V` positive by
//! construction; the equation integrated is
//!
//! `dL_n/dt = M_n`,  `dM_n/dt = V_{n+1} + V_{n-1} - 2 V_n`,  `V = e^L - 1`,
//!
//! stepped with classical fourth-order Runge–Kutta.

use crate::expr::{EvalError, Expr};
use crate::hirota::{force_from_tau, HirotaError, SolitonSpec};
use crate::qshift::{y_to_x, ShiftParams};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimulatorError {
    #[error("grid needs at least 3 nodes, got {0}")]
    GridTooSmall(usize),
    #[error("grid spans y = 0, where the x-coordinate is undefined")]
    GridContainsOrigin,
    #[error("1 + V = {value} <= 0 at node {node}")]
    LogDomain { node: usize, value: f64 },
    #[error("time step {dt} exceeds the stability bound {bound:.3e} at t = {t}")]
    Unstable { dt: f64, bound: f64, t: f64 },
    #[error("non-finite state at t = {t}")]
    BlowUp { t: f64 },
    #[error(
        "initial force reaches the boundary (|V| = {value:.3e} at node {node}); \
         zero-force boundaries assume decayed tails"
    )]
    BoundaryContact { node: usize, value: f64 },
    #[error("integrator config: {0}")]
    Config(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Hirota(#[from] HirotaError),
}

/// Uniform grid in `y = -1/x` with spacing `ε`; node coordinates
/// `y_n = y0 + n ε`, `x_n = -1/y_n`.
#[derive(Clone, Debug)]
pub struct LatticeGrid {
    y0: f64,
    params: ShiftParams,
    x_nodes: Vec<f64>,
}

impl LatticeGrid {
    pub fn new(y0: f64, count: usize, params: ShiftParams) -> Result<Self, SimulatorError> {
        if count < 3 {
            return Err(SimulatorError::GridTooSmall(count));
        }
        let eps = params.epsilon();
        let y_end = y0 + (count - 1) as f64 * eps;
        // x-values are required throughout, so y = 0 must stay outside the
        // closed span (including the ghost nodes used by clamped boundaries).
        if (y0 - eps) * (y_end + eps) <= 0.0 {
            return Err(SimulatorError::GridContainsOrigin);
        }
        let x_nodes = (0..count)
            .map(|n| y_to_x(y0 + n as f64 * eps).expect("origin excluded"))
            .collect();
        Ok(LatticeGrid {
            y0,
            params,
            x_nodes,
        })
    }

    pub fn count(&self) -> usize {
        self.x_nodes.len()
    }

    pub fn params(&self) -> &ShiftParams {
        &self.params
    }

    /// Grid spacing in y; equal to ε by construction.
    pub fn spacing(&self) -> f64 {
        self.params.epsilon()
    }

    pub fn y(&self, n: usize) -> f64 {
        self.y0 + n as f64 * self.params.epsilon()
    }

    pub fn x(&self, n: usize) -> f64 {
        self.x_nodes[n]
    }

    pub fn x_nodes(&self) -> &[f64] {
        &self.x_nodes
    }

    fn ghost_x(&self) -> Result<(f64, f64), SimulatorError> {
        let eps = self.params.epsilon();
        let left = y_to_x(self.y0 - eps)?;
        let right = y_to_x(self.y0 + self.count() as f64 * eps)?;
        Ok((left, right))
    }
}

/// Sampled state: `L_n = log(1 + V_n)` and its time derivative.
#[derive(Clone, Debug)]
pub struct LatticeState {
    pub t: f64,
    log1v: Vec<f64>,
    log1v_dot: Vec<f64>,
}

impl LatticeState {
    pub fn len(&self) -> usize {
        self.log1v.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log1v.is_empty()
    }

    /// The force value `V_n = e^{L_n} - 1` at a node.
    pub fn force(&self, n: usize) -> f64 {
        self.log1v[n].exp_m1()
    }

    pub fn force_values(&self) -> Vec<f64> {
        self.log1v.iter().map(|l| l.exp_m1()).collect()
    }

    pub fn log_values(&self) -> &[f64] {
        &self.log1v
    }

    pub fn rate_values(&self) -> &[f64] {
        &self.log1v_dot
    }

    /// Discrete momentum-like sum `Σ_n M_n`; with decayed tails and
    /// zero-force boundaries the stencil telescopes and this is conserved.
    pub fn rate_sum(&self) -> f64 {
        self.log1v_dot.iter().sum()
    }
}

/// Boundary treatment for the stencil's ghost nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Boundary {
    /// Ghost force values are zero (solitons decay).
    ZeroForce,
    /// Ghost force values come from the analytic solution.
    AnalyticClamp,
}

#[derive(Clone, Copy, Debug)]
pub struct IntegratorConfig {
    pub dt: f64,
    pub t0: f64,
    pub t_end: f64,
    pub boundary: Boundary,
    /// Cadence of recorded output rows, in time units.
    pub output_every: f64,
}

impl IntegratorConfig {
    pub fn new(dt: f64, t_end: f64) -> Self {
        IntegratorConfig {
            dt,
            t0: 0.0,
            t_end,
            boundary: Boundary::ZeroForce,
            output_every: 0.1,
        }
    }

    fn validate(&self) -> Result<(), SimulatorError> {
        if !(self.dt.is_finite() && self.dt != 0.0) {
            return Err(SimulatorError::Config(format!("bad dt: {}", self.dt)));
        }
        if (self.t_end - self.t0) * self.dt < 0.0 {
            return Err(SimulatorError::Config(
                "dt points away from t_end".to_string(),
            ));
        }
        if !(self.output_every.is_finite() && self.output_every > 0.0) {
            return Err(SimulatorError::Config(format!(
                "bad output cadence: {}",
                self.output_every
            )));
        }
        Ok(())
    }
}

/// Samples a closed-form force field and its analytic time derivative
/// onto the grid.
pub fn init_from_field(
    force: &Expr,
    grid: &LatticeGrid,
    t0: f64,
) -> Result<LatticeState, SimulatorError> {
    let force_dt = force.dt();
    let mut log1v = Vec::with_capacity(grid.count());
    let mut log1v_dot = Vec::with_capacity(grid.count());
    for (n, &x) in grid.x_nodes().iter().enumerate() {
        let v = force.eval(x, t0)?;
        let one_plus = 1.0 + v;
        if one_plus <= 0.0 {
            return Err(SimulatorError::LogDomain {
                node: n,
                value: one_plus,
            });
        }
        log1v.push(v.ln_1p());
        log1v_dot.push(force_dt.eval(x, t0)? / one_plus);
    }
    Ok(LatticeState {
        t: t0,
        log1v,
        log1v_dot,
    })
}

/// Time derivatives of `(L, M)` for given ghost force values.
pub fn rhs(state: &LatticeState, ghosts: (f64, f64)) -> (Vec<f64>, Vec<f64>) {
    let n = state.len();
    let force: Vec<f64> = state.force_values();
    let at = |i: i64| -> f64 {
        if i < 0 {
            ghosts.0
        } else if i as usize >= n {
            ghosts.1
        } else {
            force[i as usize]
        }
    };
    let dl = state.log1v_dot.clone();
    let dm = (0..n as i64)
        .map(|i| at(i + 1) + at(i - 1) - 2.0 * at(i))
        .collect();
    (dl, dm)
}

/// Stability bound `0.25 ε / sqrt(max(1 + V_n))`, a conservative CFL-style
/// cap for the linearized stencil.
pub fn stability_bound(state: &LatticeState, params: &ShiftParams) -> f64 {
    let max_gain = state
        .log1v
        .iter()
        .fold(f64::MIN, |m, &l| m.max(l))
        .exp()
        .max(1e-12);
    0.25 * params.epsilon() / max_gain.sqrt()
}

/// One classical RK4 step; the ghost callback supplies boundary force
/// values at the three stage times.
pub fn step_rk4(
    state: &LatticeState,
    dt: f64,
    ghost_at: &impl Fn(f64) -> Result<(f64, f64), SimulatorError>,
) -> Result<LatticeState, SimulatorError> {
    let n = state.len();
    let advance = |l0: &[f64], m0: &[f64], dl: &[f64], dm: &[f64], h: f64, t: f64| LatticeState {
        t,
        log1v: (0..n).map(|i| l0[i] + h * dl[i]).collect(),
        log1v_dot: (0..n).map(|i| m0[i] + h * dm[i]).collect(),
    };
    let t = state.t;
    let g0 = ghost_at(t)?;
    let gh = ghost_at(t + dt / 2.0)?;
    let g1 = ghost_at(t + dt)?;

    let (k1l, k1m) = rhs(state, g0);
    let s2 = advance(&state.log1v, &state.log1v_dot, &k1l, &k1m, dt / 2.0, t);
    let (k2l, k2m) = rhs(&s2, gh);
    let s3 = advance(&state.log1v, &state.log1v_dot, &k2l, &k2m, dt / 2.0, t);
    let (k3l, k3m) = rhs(&s3, gh);
    let s4 = advance(&state.log1v, &state.log1v_dot, &k3l, &k3m, dt, t);
    let (k4l, k4m) = rhs(&s4, g1);

    let mut log1v = Vec::with_capacity(n);
    let mut log1v_dot = Vec::with_capacity(n);
    for i in 0..n {
        let l = state.log1v[i] + dt / 6.0 * (k1l[i] + 2.0 * k2l[i] + 2.0 * k3l[i] + k4l[i]);
        let m = state.log1v_dot[i] + dt / 6.0 * (k1m[i] + 2.0 * k2m[i] + 2.0 * k3m[i] + k4m[i]);
        if !(l.is_finite() && m.is_finite()) {
            return Err(SimulatorError::BlowUp { t });
        }
        log1v.push(l);
        log1v_dot.push(m);
    }
    Ok(LatticeState {
        t: t + dt,
        log1v,
        log1v_dot,
    })
}

/// One recorded output row of the time series.
#[derive(Clone, Debug)]
pub struct OutputRow {
    pub t: f64,
    pub node: usize,
    pub y: f64,
    pub x: f64,
    pub v: f64,
    pub v_analytic: f64,
    pub abs_err: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct ErrorSample {
    pub t: f64,
    pub max_abs: f64,
    pub l2: f64,
}

/// Error history of a run against the analytic solution.
#[derive(Clone, Debug)]
pub struct ErrorReport {
    /// Worst pointwise error over all recorded times.
    pub max_abs: f64,
    /// Worst RMS error over all recorded times.
    pub l2: f64,
    pub series: Vec<ErrorSample>,
    pub rows: Vec<OutputRow>,
    /// Drift of the momentum-like sum Σ M_n over the run.
    pub rate_sum_drift: f64,
}

/// Integrates the lattice equation from the spec's analytic soliton and
/// records the deviation from the closed form at every output time.
pub fn integrate_and_compare(
    spec: &SolitonSpec,
    grid: &LatticeGrid,
    cfg: &IntegratorConfig,
) -> Result<ErrorReport, SimulatorError> {
    let force = force_from_tau(&spec.tau());
    integrate_field_and_compare(&force, grid, cfg)
}

/// Same as [`integrate_and_compare`] but from an arbitrary closed-form force.
pub fn integrate_field_and_compare(
    force: &Expr,
    grid: &LatticeGrid,
    cfg: &IntegratorConfig,
) -> Result<ErrorReport, SimulatorError> {
    cfg.validate()?;
    let mut state = init_from_field(force, grid, cfg.t0)?;

    if cfg.boundary == Boundary::ZeroForce {
        // Soliton support must stay clear of the boundary; check the
        // outermost five nodes on each side at start-up.
        let forces = state.force_values();
        let interior_max = forces.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let edge = 5.min(forces.len() / 2);
        for n in (0..edge).chain(forces.len() - edge..forces.len()) {
            if forces[n].abs() > 1e-6 * (1.0 + interior_max) {
                return Err(SimulatorError::BoundaryContact {
                    node: n,
                    value: forces[n],
                });
            }
        }
    }

    let (ghost_left_x, ghost_right_x) = grid.ghost_x()?;
    let force_for_ghosts = force.clone();
    let boundary = cfg.boundary;
    let ghost_at = move |t: f64| -> Result<(f64, f64), SimulatorError> {
        match boundary {
            Boundary::ZeroForce => Ok((0.0, 0.0)),
            Boundary::AnalyticClamp => Ok((
                force_for_ghosts.eval(ghost_left_x, t)?,
                force_for_ghosts.eval(ghost_right_x, t)?,
            )),
        }
    };

    let steps = ((cfg.t_end - cfg.t0) / cfg.dt).round() as usize;
    let stride = (cfg.output_every / cfg.dt.abs()).round().max(1.0) as usize;
    let initial_rate_sum = state.rate_sum();

    let mut report = ErrorReport {
        max_abs: 0.0,
        l2: 0.0,
        series: Vec::new(),
        rows: Vec::new(),
        rate_sum_drift: 0.0,
    };
    record(&mut report, &state, grid, force)?;

    for step in 1..=steps {
        let bound = stability_bound(&state, grid.params());
        if cfg.dt.abs() > bound {
            return Err(SimulatorError::Unstable {
                dt: cfg.dt,
                bound,
                t: state.t,
            });
        }
        state = step_rk4(&state, cfg.dt, &ghost_at)?;
        // Exact multiples of dt avoid accumulated drift in t.
        state.t = cfg.t0 + step as f64 * cfg.dt;
        if step % stride == 0 || step == steps {
            record(&mut report, &state, grid, force)?;
        }
        report.rate_sum_drift = report
            .rate_sum_drift
            .max((state.rate_sum() - initial_rate_sum).abs());
    }
    Ok(report)
}

fn record(
    report: &mut ErrorReport,
    state: &LatticeState,
    grid: &LatticeGrid,
    force: &Expr,
) -> Result<(), SimulatorError> {
    let mut max_abs = 0.0f64;
    let mut sq_sum = 0.0f64;
    for n in 0..grid.count() {
        let x = grid.x(n);
        let v = state.force(n);
        let v_analytic = force.eval(x, state.t)?;
        let abs_err = (v - v_analytic).abs();
        max_abs = max_abs.max(abs_err);
        sq_sum += abs_err * abs_err;
        report.rows.push(OutputRow {
            t: state.t,
            node: n,
            y: grid.y(n),
            x,
            v,
            v_analytic,
            abs_err,
        });
    }
    let l2 = (sq_sum / grid.count() as f64).sqrt();
    report.series.push(ErrorSample {
        t: state.t,
        max_abs,
        l2,
    });
    report.max_abs = report.max_abs.max(max_abs);
    report.l2 = report.l2.max(l2);
    Ok(())
}
