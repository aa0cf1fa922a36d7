//! The five subcommands: soliton, residual, simulate, hierarchy, figures.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::expr::Expr;
use crate::hirota::{
    self, force_from_tau, BilinearResidual, Branch, LatticeResidual, SolitonMode, SolitonSpec,
};
use crate::operator::{
    self, chi, flow_rhs, hamiltonian_density, lax_operator, lax_with_force,
    recursion_residual, tau_symmetry_residual, LaxFields, WaveSample,
};
use crate::qshift::{mobius_shift, Domain, ShiftParams};
use crate::simulator::{integrate_and_compare, IntegratorConfig, LatticeGrid};

use super::config::{linspace, OutputFormat, RunConfig, WindowConfig};
use super::report::{fmt_float, CheckLine, Metadata, Report};
use super::{report, CliError};

fn numeric(e: impl std::fmt::Display) -> CliError {
    CliError::Numeric(e.to_string())
}

fn metadata_with_config(command: &str, cfg: &RunConfig) -> Metadata {
    let mut meta = Metadata::new(command);
    for (k, v) in &cfg.resolved {
        meta.push(k, v.clone());
    }
    meta
}

/// Builds the configured spec; either explicit modes or seeded random ones.
fn build_spec(cfg: &RunConfig) -> Result<SolitonSpec, CliError> {
    let params = cfg.require_params()?;
    if let Some(n) = cfg.random_modes {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        return Ok(hirota::random_spec(&mut rng, &params, n));
    }
    if cfg.modes.is_empty() {
        return Err(CliError::Config(
            "no modes configured: give `mode.1.alpha = ...` (and optional \
             `mode.N.beta_sign`, `mode.N.eta`) or `modes.random = N`"
                .into(),
        ));
    }
    let mut modes = Vec::new();
    for m in &cfg.modes {
        if m.beta_offset != 0.0 {
            return Err(CliError::Config(
                "`beta_offset` perturbs the dispersion relation; only the \
                 `residual` command accepts it"
                    .into(),
            ));
        }
        modes.push(SolitonMode::from_alpha(m.alpha, m.branch, m.eta, &params).map_err(numeric)?);
    }
    SolitonSpec::new(params, modes).map_err(numeric)
}

fn push_spec_constants(meta: &mut Metadata, spec: &SolitonSpec) {
    let params = spec.params();
    meta.push_given("epsilon", params.epsilon());
    meta.push_derived("exp_epsilon", params.epsilon().exp(), "exp(epsilon)");
    for (i, mode) in spec.modes().iter().enumerate() {
        let n = i + 1;
        meta.push_given(&format!("alpha_{n}"), mode.alpha());
        meta.push_derived(
            &format!("beta_{n}"),
            mode.beta(),
            "dispersion relation beta^2 = e^{alpha eps} + e^{-alpha eps} - 2",
        );
        meta.push_given(&format!("eta_{n}"), mode.eta());
    }
    for i in 0..spec.modes().len() {
        for j in (i + 1)..spec.modes().len() {
            if let Some(a) = spec.pair_coefficient(i, j) {
                meta.push_derived(
                    &format!("a_{}{}", i + 1, j + 1),
                    a,
                    "-P(p_i - p_j)/P(p_i + p_j)",
                );
            }
        }
    }
    if spec.modes().len() == 3 {
        if let Ok(direct) = hirota::triple_coefficient_direct(spec) {
            meta.push_derived("a_123_direct", direct, "order-3 balance");
        }
        if let Some(product) = spec.triple_coefficient_product() {
            meta.push_derived("a_123_product", product, "a_12 * a_13 * a_23");
        }
    }
}

fn dataset_filename(stem: &str, format: OutputFormat) -> String {
    match format {
        OutputFormat::Csv => format!("{stem}.csv"),
        OutputFormat::Json => format!("{stem}.json"),
    }
}

fn write_dataset(
    cfg: &RunConfig,
    stem: &str,
    meta: &Metadata,
    header: &[&str],
    rows: &[Vec<String>],
) -> Result<(), CliError> {
    let contents = match cfg.format {
        OutputFormat::Csv => report::csv_dataset(meta, header, rows),
        OutputFormat::Json => report::json_dataset(meta, header, rows),
    };
    report::write_file(&cfg.out_dir.join(dataset_filename(stem, cfg.format)), &contents)
}

fn default_window(cfg: &RunConfig) -> WindowConfig {
    cfg.window.unwrap_or(WindowConfig {
        x_min: 0.4,
        x_max: 6.0,
        t_min: 0.0,
        t_max: 5.0,
        nx: 50,
        nt: 50,
    })
}

/// `soliton`: closed-form V(x, t) samples plus a constants file carrying
/// every derived quantity.
pub fn cmd_soliton(cfg: &RunConfig) -> Result<bool, CliError> {
    let spec = build_spec(cfg)?;
    let force = force_from_tau(&spec.tau());
    let window = default_window(cfg);

    let mut meta = metadata_with_config("soliton", cfg);
    push_spec_constants(&mut meta, &spec);

    let mut rows = Vec::new();
    for &x in &window.x_samples() {
        for &t in &window.t_samples() {
            let v = force.eval(x, t).map_err(numeric)?;
            rows.push(vec![fmt_float(x), fmt_float(t), fmt_float(v)]);
        }
    }
    write_dataset(cfg, "soliton", &meta, &["x", "t", "V"], &rows)?;

    let mut constants = Metadata::new("soliton");
    for (k, v) in &cfg.resolved {
        constants.push(k, v.clone());
    }
    push_spec_constants(&mut constants, &spec);
    let mut text = String::new();
    for (k, v) in constants.entries() {
        text.push_str(&format!("{k} = {v}\n"));
    }
    report::write_file(&cfg.out_dir.join("soliton_constants.txt"), &text)?;
    println!(
        "soliton: wrote {} samples to {}",
        rows.len(),
        cfg.out_dir.display()
    );
    Ok(true)
}

/// `residual`: bilinear and lattice-equation residual scan with pass/fail
/// verdicts against the configured tolerances.
pub fn cmd_residual(cfg: &RunConfig) -> Result<bool, CliError> {
    let params = cfg.require_params()?;
    let window = cfg.window.unwrap_or(WindowConfig {
        x_min: 0.3,
        x_max: 4.0,
        t_min: 0.0,
        t_max: 5.0,
        nx: 50,
        nt: 50,
    });
    // The scan applies one forward and one backward shift.
    Domain::new(window.x_min, window.x_max, 1, params).map_err(numeric)?;

    let perturbed = cfg.modes.iter().any(|m| m.beta_offset != 0.0);
    let (tau, label) = if cfg.random_modes.is_some() || !perturbed {
        let spec = build_spec(cfg)?;
        (spec.tau(), format!("{}-mode spec", spec.modes().len()))
    } else {
        let raw: Vec<(f64, f64, f64)> = cfg
            .modes
            .iter()
            .map(|m| {
                (
                    m.alpha,
                    hirota::dispersion_beta(m.alpha, &params, m.branch) + m.beta_offset,
                    m.eta,
                )
            })
            .collect();
        (
            hirota::tau_from_raw_modes(&params, &raw).map_err(numeric)?,
            format!("{}-mode spec with perturbed dispersion", raw.len()),
        )
    };

    let force = force_from_tau(&tau);
    let bilinear = BilinearResidual::new(&tau, &params);
    let lattice = LatticeResidual::new(&force, &params);

    let mut bilinear_max = 0.0f64;
    let mut bilinear_sum = 0.0f64;
    let mut lattice_max = 0.0f64;
    let mut lattice_sum = 0.0f64;
    let mut count = 0usize;
    for &x in &window.x_samples() {
        for &t in &window.t_samples() {
            let b = bilinear.relative(x, t).map_err(numeric)?.abs();
            let l = lattice.relative(x, t).map_err(numeric)?.abs();
            bilinear_max = bilinear_max.max(b);
            bilinear_sum += b;
            lattice_max = lattice_max.max(l);
            lattice_sum += l;
            count += 1;
        }
    }

    let bilinear_tol = cfg.tol.unwrap_or(1e-10);
    let lattice_tol = cfg.tol.unwrap_or(1e-9);
    let mut rep = Report::new(metadata_with_config("residual", cfg));
    rep.line(format!("target: {label}"));
    rep.line(format!(
        "samples: {} x {} over x in [{}, {}], t in [{}, {}]",
        window.nx, window.nt, window.x_min, window.x_max, window.t_min, window.t_max
    ));
    rep.line(format!(
        "bilinear mean relative residual = {}",
        fmt_float(bilinear_sum / count as f64)
    ));
    rep.line(format!(
        "lattice mean relative residual = {}",
        fmt_float(lattice_sum / count as f64)
    ));
    rep.check(CheckLine::against(
        "bilinear_max_relative",
        bilinear_max,
        bilinear_tol,
    ));
    rep.check(CheckLine::against(
        "lattice_max_relative",
        lattice_max,
        lattice_tol,
    ));
    let passed = rep.passed();
    report::write_file(&cfg.out_dir.join("residual_report.txt"), &rep.render())?;
    println!(
        "residual: max bilinear {} / lattice {} -> {}",
        fmt_float(bilinear_max),
        fmt_float(lattice_max),
        if passed { "PASS" } else { "FAIL" }
    );
    Ok(passed)
}

/// `simulate`: RK4 run against the analytic solution; writes the time
/// series and an error report.
pub fn cmd_simulate(cfg: &RunConfig) -> Result<bool, CliError> {
    let spec = build_spec(cfg)?;
    let params = *spec.params();
    let grid = LatticeGrid::new(cfg.grid.y0, cfg.grid.count, params).map_err(numeric)?;
    let integrator = IntegratorConfig {
        dt: cfg.integrator.dt,
        t0: cfg.integrator.t0,
        t_end: cfg.integrator.t_end,
        boundary: cfg.integrator.boundary,
        output_every: cfg.integrator.output_every,
    };
    let result = integrate_and_compare(&spec, &grid, &integrator).map_err(numeric)?;

    let mut meta = metadata_with_config("simulate", cfg);
    push_spec_constants(&mut meta, &spec);
    let header = ["t", "node", "y", "x", "V", "V_analytic", "abs_err"];
    let rows: Vec<Vec<String>> = result
        .rows
        .iter()
        .map(|r| {
            vec![
                fmt_float(r.t),
                r.node.to_string(),
                fmt_float(r.y),
                fmt_float(r.x),
                fmt_float(r.v),
                fmt_float(r.v_analytic),
                fmt_float(r.abs_err),
            ]
        })
        .collect();
    write_dataset(cfg, "simulation", &meta, &header, &rows)?;

    let tol = cfg.tol.unwrap_or(1e-5);
    let mut rep = Report::new(metadata_with_config("simulate", cfg));
    rep.line(format!(
        "steps = {}, nodes = {}, boundary ghosts as configured",
        ((integrator.t_end - integrator.t0) / integrator.dt).round() as usize,
        grid.count()
    ));
    for s in &result.series {
        rep.line(format!(
            "t = {}  max_abs = {}  l2 = {}",
            fmt_float(s.t),
            fmt_float(s.max_abs),
            fmt_float(s.l2)
        ));
    }
    rep.line(format!(
        "momentum-sum drift = {}",
        fmt_float(result.rate_sum_drift)
    ));
    rep.check(CheckLine::against("max_abs_error", result.max_abs, tol));
    let passed = rep.passed();
    report::write_file(&cfg.out_dir.join("simulation_report.txt"), &rep.render())?;
    println!(
        "simulate: max abs error {} over t in [{}, {}] -> {}",
        fmt_float(result.max_abs),
        integrator.t0,
        integrator.t_end,
        if passed { "PASS" } else { "FAIL" }
    );
    Ok(passed)
}

/// `hierarchy`: seeded random smooth fields, then every identity the
/// operator algebra guarantees, written as a deterministic pass/fail table.
pub fn cmd_hierarchy(cfg: &RunConfig) -> Result<bool, CliError> {
    let params = cfg.require_params()?;
    let limits = cfg.hierarchy.limits;
    let orders = cfg.hierarchy.flow_orders.min(limits.max_power);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let domain = Domain::new(0.05, 0.35, limits.max_band.max(1), params).map_err(numeric)?;
    let fields = LaxFields::random_smooth(&mut rng, -18.0, -4.0);
    let samples = domain.sample(cfg.hierarchy.samples.max(2));

    let mut rep = Report::new(metadata_with_config("hierarchy", cfg));
    rep.line("fields: u, v are seeded sums of three Gaussians in y = -1/x".to_string());
    rep.line("t1 flow closed form:".to_string());
    rep.line("  eps * du/dt1 = V(x/(1 - eps*x)) - V(x),   V = exp(v)".to_string());
    rep.line("  eps * dV/dt1 = u(x)*V(x) - V(x)*u(x/(1 + eps*x))".to_string());

    // j = 1 flow against the closed forms above.
    let rhs1 = flow_rhs(&fields, 1, params, &samples, &limits).map_err(numeric)?;
    let eps = params.epsilon();
    let force = fields.v().exp();
    let mut worst_t1 = 0.0f64;
    for &x in &samples {
        let du_want = (force.shift(1, &params).eval(x, 0.0).map_err(numeric)?
            - force.eval(x, 0.0).map_err(numeric)?)
            / eps;
        let du_got = rhs1.du_dt.eval(x, 0.0).map_err(numeric)?;
        worst_t1 = worst_t1.max((du_got - du_want).abs() / (1.0 + du_want.abs()));
        let v_val = force.eval(x, 0.0).map_err(numeric)?;
        let dv_want = (fields.u().eval(x, 0.0).map_err(numeric)? * v_val
            - v_val * fields.u().shift(-1, &params).eval(x, 0.0).map_err(numeric)?)
            / (eps * v_val);
        let dv_got = rhs1.dv_dt.eval(x, 0.0).map_err(numeric)?;
        worst_t1 = worst_t1.max((dv_got - dv_want).abs() / (1.0 + dv_want.abs()));
    }
    rep.check(CheckLine::against("flow_t1_closed_form", worst_t1, 1e-12));

    // Flow commutators must stay inside the Lax band for every order.
    let lax = lax_operator(&fields, params);
    let mut worst_leak = 0.0f64;
    for j in 1..=orders {
        let generator = operator::flow_generator(&lax, j, &limits).map_err(numeric)?;
        let commutator = generator
            .project_plus()
            .commutator(&lax, limits.max_band)
            .map_err(numeric)?;
        let leak = commutator
            .max_abs_outside(|k| (-1..=0).contains(&k), &samples)
            .map_err(numeric)?;
        worst_leak = worst_leak.max(leak);
    }
    rep.check(CheckLine::against(
        &format!("flow_band_support_j_le_{orders}"),
        worst_leak,
        1e-10,
    ));

    // Recursion identity for n = 2..=orders.
    let mut worst_recursion = 0.0f64;
    for n in 2..=orders.max(2) {
        let residual = recursion_residual(&fields, n, params, &limits).map_err(numeric)?;
        for &x in &samples {
            worst_recursion = worst_recursion.max(residual.eval(x, 0.0).map_err(numeric)?.abs());
        }
    }
    rep.check(CheckLine::against(
        &format!("recursion_n_le_{orders}"),
        worst_recursion,
        1e-10,
    ));

    // Tau symmetry for all pairs up to the flow order.
    let mut worst_tau = 0.0f64;
    for m in 1..=orders {
        for n in m..=orders {
            let residual =
                tau_symmetry_residual(&fields, m, n, params, &limits).map_err(numeric)?;
            for &x in &samples {
                worst_tau = worst_tau.max(residual.eval(x, 0.0).map_err(numeric)?.abs());
            }
        }
    }
    rep.check(CheckLine::against(
        &format!("tau_symmetry_mn_le_{orders}"),
        worst_tau,
        1e-11,
    ));

    // Hamiltonian densities exist up to the configured power.
    let h_max = hamiltonian_density(&fields, orders, params, &limits).map_err(numeric)?;
    let h_probe = h_max.eval(samples[0], 0.0).map_err(numeric)?;
    rep.line(format!(
        "h_{orders}({}) = {}",
        fmt_float(samples[0]),
        fmt_float(h_probe)
    ));

    // Vacuum wave relation Λ·χ = z·χ, checked through χ itself, plus the
    // amplitude-level residual of the free operator.
    let free = lax_with_force(&Expr::constant(0.0), &Expr::constant(0.0), params);
    let unit_wave = WaveSample::new(1.7, Expr::constant(1.0)).map_err(numeric)?;
    let mut worst_wave = 0.0f64;
    for _ in 0..100 {
        let z = rng.random_range(0.2..5.0);
        let x = rng.random_range(0.05..0.35);
        let shifted = mobius_shift(x, 1, &params).map_err(numeric)?;
        let lhs = chi(z, shifted, &params).map_err(numeric)?;
        let rhs = z * chi(z, x, &params).map_err(numeric)?;
        worst_wave = worst_wave.max((lhs - rhs).abs() / (1.0 + rhs.abs()));
        let amp_res = operator::wave_eigen_residual(&free, &unit_wave, x).map_err(numeric)?;
        worst_wave = worst_wave.max(amp_res.abs());
    }
    rep.check(CheckLine::against("vacuum_wave_relation", worst_wave, 1e-12));

    let passed = rep.passed();
    report::write_file(&cfg.out_dir.join("hierarchy_report.txt"), &rep.render())?;
    println!(
        "hierarchy: identities over seed {} -> {}",
        cfg.seed,
        if passed { "PASS" } else { "FAIL" }
    );
    Ok(passed)
}

struct FigureSetup {
    name: &'static str,
    modes: Vec<(f64, Branch, f64)>,
    x_range: (f64, f64),
    t_range: (f64, f64),
}

fn figure_setups() -> Vec<FigureSetup> {
    vec![
        FigureSetup {
            name: "fig1",
            modes: vec![(-5.0, Branch::Negative, 0.0)],
            x_range: (0.4, 6.0),
            t_range: (0.8, 6.0),
        },
        FigureSetup {
            name: "fig2",
            modes: vec![(-5.0, Branch::Negative, 0.0), (6.0, Branch::Negative, 0.0)],
            x_range: (0.4, 6.0),
            t_range: (-6.0, 6.0),
        },
        FigureSetup {
            name: "fig3",
            modes: vec![
                (-5.0, Branch::Negative, 0.0),
                (6.0, Branch::Negative, 0.0),
                (-7.9141, Branch::Positive, 0.0),
            ],
            x_range: (0.3, 6.0),
            t_range: (-8.0, 8.0),
        },
    ]
}

/// `figures`: gnuplot-ready surface data for the three standard parameter
/// sets (`e^eps = 1.25`, eta = 0, windows centered on the ridges) plus a
/// plot script stub.
pub fn cmd_figures(cfg: &RunConfig) -> Result<bool, CliError> {
    // The figure parameter sets are fixed; a configured epsilon is accepted
    // but the canonical value is the default.
    let params = cfg
        .params
        .unwrap_or(ShiftParams::from_exp_epsilon(1.25).map_err(numeric)?);
    let n_grid = 160usize;

    for setup in figure_setups() {
        let mut modes = Vec::new();
        for &(alpha, branch, eta) in &setup.modes {
            modes.push(SolitonMode::from_alpha(alpha, branch, eta, &params).map_err(numeric)?);
        }
        let spec = SolitonSpec::new(params, modes).map_err(numeric)?;
        let force = force_from_tau(&spec.tau());

        let mut meta = metadata_with_config("figures", cfg);
        meta.push("figure", setup.name.to_string());
        push_spec_constants(&mut meta, &spec);

        let mut data = meta.comment_block();
        data.push_str("# columns: x t V  (blank line between x-scanlines)\n");
        for &x in &linspace(setup.x_range.0, setup.x_range.1, n_grid) {
            for &t in &linspace(setup.t_range.0, setup.t_range.1, n_grid) {
                let v = force.eval(x, t).map_err(numeric)?;
                data.push_str(&format!(
                    "{} {} {}\n",
                    fmt_float(x),
                    fmt_float(t),
                    fmt_float(v)
                ));
            }
            data.push('\n');
        }
        report::write_file(&cfg.out_dir.join(format!("{}.dat", setup.name)), &data)?;
    }

    let script = "\
# Surface plots of the force field V(x, t).
set hidden3d
set xlabel 'x'
set ylabel 't'
set zlabel 'V'
splot 'fig1.dat' using 1:2:3 with lines title 'one soliton'
pause -1
splot 'fig2.dat' using 1:2:3 with lines title 'two solitons'
pause -1
splot 'fig3.dat' using 1:2:3 with lines title 'three solitons'
pause -1
";
    report::write_file(&cfg.out_dir.join("plot.gp"), script)?;
    println!("figures: wrote fig1.dat fig2.dat fig3.dat plot.gp to {}", cfg.out_dir.display());
    Ok(true)
}
