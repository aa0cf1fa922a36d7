//! Flat key-value run configuration with dotted sections.
//!
//! The on-disk format is plain text, one `key = value` pair per line,
//! full-line `#` comments, LF endings — chosen so configs diff cleanly and
//! parse without dependencies. Example:
//!
//! ```text
//! e_epsilon = 1.25
//! mode.1.alpha = -5
//! mode.1.beta_sign = -1
//! mode.1.eta = -50
//! grid.y0 = -45
//! grid.count = 200
//! integrator.dt = 1e-3
//! integrator.t_end = 5
//! output.dir = out
//! seed = 42
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use crate::hirota::Branch;
use crate::operator::HierarchyLimits;
use crate::qshift::ShiftParams;
use crate::simulator::Boundary;

use super::CliError;

fn config_err(line: Option<usize>, key: &str, message: impl AsRef<str>) -> CliError {
    let loc = match line {
        Some(n) => format!("line {n}, key `{key}`"),
        None => format!("key `{key}`"),
    };
    CliError::Config(format!("{loc}: {}", message.as_ref()))
}

/// Raw parsed file: key -> (line number, value).
#[derive(Debug, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, (usize, String)>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::Config(format!(
                    "line {line_no}: expected `key = value`, got `{line}`"
                ))
            })?;
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(CliError::Config(format!("line {line_no}: empty key")));
            }
            if entries.insert(key.clone(), (line_no, value)).is_some() {
                return Err(CliError::Config(format!(
                    "line {line_no}: duplicate key `{key}`"
                )));
            }
        }
        Ok(RawConfig { entries })
    }

    fn take(&mut self, key: &str) -> Option<(usize, String)> {
        self.entries.remove(key)
    }

    fn take_f64(&mut self, key: &str) -> Result<Option<(usize, f64)>, CliError> {
        match self.take(key) {
            None => Ok(None),
            Some((line, raw)) => {
                let v: f64 = raw
                    .parse()
                    .map_err(|_| config_err(Some(line), key, format!("not a number: `{raw}`")))?;
                Ok(Some((line, v)))
            }
        }
    }

    fn take_u64(&mut self, key: &str) -> Result<Option<u64>, CliError> {
        match self.take(key) {
            None => Ok(None),
            Some((line, raw)) => raw
                .parse()
                .map(Some)
                .map_err(|_| config_err(Some(line), key, format!("not an integer: `{raw}`"))),
        }
    }

    fn leftover_error(&self) -> Result<(), CliError> {
        if let Some((key, (line, _))) = self.entries.iter().next() {
            return Err(config_err(Some(*line), key, "unknown key"));
        }
        Ok(())
    }
}

/// One configured soliton mode: `beta` always comes from the dispersion
/// relation on the chosen branch; `beta_offset` (default 0) perturbs it to
/// let the residual suite demonstrate rejection of non-solutions.
#[derive(Clone, Copy, Debug)]
pub struct ModeConfig {
    pub alpha: f64,
    pub branch: Branch,
    pub eta: f64,
    pub beta_offset: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct GridConfig {
    pub y0: f64,
    pub count: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct IntegratorSection {
    pub dt: f64,
    pub t0: f64,
    pub t_end: f64,
    pub boundary: Boundary,
    pub output_every: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct WindowConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub nx: usize,
    pub nt: usize,
}

impl WindowConfig {
    pub fn x_samples(&self) -> Vec<f64> {
        linspace(self.x_min, self.x_max, self.nx)
    }

    pub fn t_samples(&self) -> Vec<f64> {
        linspace(self.t_min, self.t_max, self.nt)
    }
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + i as f64 * step).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug)]
pub struct HierarchySection {
    pub limits: HierarchyLimits,
    pub flow_orders: usize,
    pub samples: usize,
}

/// Fully resolved run configuration (defaults < config file < flags; the
/// `GQTODA_OUT` environment variable seeds the default output directory).
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub params: Option<ShiftParams>,
    pub modes: Vec<ModeConfig>,
    pub random_modes: Option<usize>,
    pub grid: GridConfig,
    pub integrator: IntegratorSection,
    pub window: Option<WindowConfig>,
    pub out_dir: PathBuf,
    pub format: OutputFormat,
    pub seed: u64,
    pub tol: Option<f64>,
    pub hierarchy: HierarchySection,
    /// Echo of every resolved setting for metadata headers.
    pub resolved: Vec<(String, String)>,
}

/// Command-line flag overrides.
#[derive(Clone, Debug, Default)]
pub struct Flags {
    pub config_path: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub tol: Option<f64>,
}

impl RunConfig {
    pub fn resolve(
        file_text: Option<&str>,
        flags: &Flags,
        env_out: Option<String>,
    ) -> Result<Self, CliError> {
        let mut raw = match file_text {
            Some(text) => RawConfig::parse(text)?,
            None => RawConfig::default(),
        };

        let epsilon = raw.take_f64("epsilon")?;
        let e_epsilon = raw.take_f64("e_epsilon")?;
        let params = match (epsilon, e_epsilon) {
            (None, None) => None,
            (Some((line, eps)), None) => Some(
                ShiftParams::new(eps)
                    .map_err(|e| config_err(Some(line), "epsilon", e.to_string()))?,
            ),
            (None, Some((line, q))) => Some(
                ShiftParams::from_exp_epsilon(q)
                    .map_err(|e| config_err(Some(line), "e_epsilon", e.to_string()))?,
            ),
            (Some((line, _)), Some(_)) => {
                return Err(config_err(
                    Some(line),
                    "epsilon",
                    "give exactly one of `epsilon` / `e_epsilon`",
                ));
            }
        };

        let mut modes = Vec::new();
        for i in 1..=3usize {
            let alpha_key = format!("mode.{i}.alpha");
            let Some((line, alpha)) = raw.take_f64(&alpha_key)? else {
                break;
            };
            let branch = match raw.take_f64(&format!("mode.{i}.beta_sign"))? {
                None | Some((_, 1.0)) => Branch::Positive,
                Some((_, -1.0)) => Branch::Negative,
                Some((l, other)) => {
                    return Err(config_err(
                        Some(l),
                        &format!("mode.{i}.beta_sign"),
                        format!("expected 1 or -1, got {other}"),
                    ));
                }
            };
            let eta = raw.take_f64(&format!("mode.{i}.eta"))?.map_or(0.0, |(_, v)| v);
            let beta_offset = raw
                .take_f64(&format!("mode.{i}.beta_offset"))?
                .map_or(0.0, |(_, v)| v);
            if alpha == 0.0 {
                return Err(config_err(Some(line), &alpha_key, "alpha must be non-zero"));
            }
            modes.push(ModeConfig {
                alpha,
                branch,
                eta,
                beta_offset,
            });
        }
        if modes.len() > 3 {
            return Err(CliError::Config("at most 3 modes are supported".into()));
        }
        let random_modes = match raw.take_u64("modes.random")? {
            None => None,
            Some(n) if (1..=3).contains(&n) => Some(n as usize),
            Some(n) => {
                return Err(config_err(
                    None,
                    "modes.random",
                    format!("expected 1..=3, got {n}"),
                ));
            }
        };
        if random_modes.is_some() && !modes.is_empty() {
            return Err(CliError::Config(
                "`modes.random` excludes explicit `mode.N.*` entries".into(),
            ));
        }

        let grid = GridConfig {
            y0: raw.take_f64("grid.y0")?.map_or(-45.0, |(_, v)| v),
            count: raw.take_u64("grid.count")?.map_or(200, |v| v as usize),
        };

        let boundary = match raw.take("integrator.boundary") {
            None => Boundary::ZeroForce,
            Some((_, s)) if s == "zero_force" => Boundary::ZeroForce,
            Some((_, s)) if s == "analytic_clamp" => Boundary::AnalyticClamp,
            Some((line, s)) => {
                return Err(config_err(
                    Some(line),
                    "integrator.boundary",
                    format!("expected zero_force|analytic_clamp, got `{s}`"),
                ));
            }
        };
        let integrator = IntegratorSection {
            dt: raw.take_f64("integrator.dt")?.map_or(1e-3, |(_, v)| v),
            t0: raw.take_f64("integrator.t0")?.map_or(0.0, |(_, v)| v),
            t_end: raw.take_f64("integrator.t_end")?.map_or(5.0, |(_, v)| v),
            boundary,
            output_every: raw
                .take_f64("integrator.output_every")?
                .map_or(0.1, |(_, v)| v),
        };

        let window_keys = [
            "window.x_min",
            "window.x_max",
            "window.t_min",
            "window.t_max",
        ];
        let mut window_values = Vec::new();
        for key in window_keys {
            window_values.push(raw.take_f64(key)?.map(|(_, v)| v));
        }
        let nx = raw.take_u64("window.nx")?.map(|v| v as usize);
        let nt = raw.take_u64("window.nt")?.map(|v| v as usize);
        let window = if window_values.iter().all(Option::is_none) && nx.is_none() && nt.is_none() {
            None
        } else {
            let w = WindowConfig {
                x_min: window_values[0].unwrap_or(0.4),
                x_max: window_values[1].unwrap_or(6.0),
                t_min: window_values[2].unwrap_or(0.0),
                t_max: window_values[3].unwrap_or(5.0),
                nx: nx.unwrap_or(50),
                nt: nt.unwrap_or(50),
            };
            let finite = [w.x_min, w.x_max, w.t_min, w.t_max]
                .iter()
                .all(|v| v.is_finite());
            if !finite || w.x_min >= w.x_max || w.t_min > w.t_max || w.nx < 2 || w.nt < 2 {
                return Err(CliError::Config(format!("degenerate window: {w:?}")));
            }
            Some(w)
        };

        let out_dir = flags
            .out_dir
            .clone()
            .or_else(|| raw.take("output.dir").map(|(_, v)| PathBuf::from(v)))
            .or_else(|| env_out.map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"));

        let format = match raw.take("output.format") {
            None => OutputFormat::Csv,
            Some((_, s)) if s == "csv" => OutputFormat::Csv,
            Some((_, s)) if s == "json" => OutputFormat::Json,
            Some((line, s)) => {
                return Err(config_err(
                    Some(line),
                    "output.format",
                    format!("expected csv|json, got `{s}`"),
                ));
            }
        };

        let seed = flags
            .seed
            .or(raw.take_u64("seed")?)
            .unwrap_or(42);
        let tol = flags.tol.or(raw.take_f64("tol")?.map(|(_, v)| v));

        let defaults = HierarchyLimits::default();
        let hierarchy = HierarchySection {
            limits: HierarchyLimits {
                max_power: raw
                    .take_u64("hierarchy.max_power")?
                    .map_or(defaults.max_power, |v| v as usize),
                max_band: raw
                    .take_u64("hierarchy.max_band")?
                    .map_or(defaults.max_band, |v| v as i64),
            },
            flow_orders: raw.take_u64("hierarchy.flow_orders")?.map_or(4, |v| v as usize),
            samples: raw.take_u64("hierarchy.samples")?.map_or(100, |v| v as usize),
        };

        raw.leftover_error()?;

        let mut resolved = Vec::new();
        if let Some(p) = &params {
            resolved.push(("epsilon".into(), super::report::fmt_float(p.epsilon())));
        }
        for (i, m) in modes.iter().enumerate() {
            let n = i + 1;
            resolved.push((format!("mode.{n}.alpha"), super::report::fmt_float(m.alpha)));
            resolved.push((
                format!("mode.{n}.beta_sign"),
                match m.branch {
                    Branch::Positive => "1".into(),
                    Branch::Negative => "-1".into(),
                },
            ));
            resolved.push((format!("mode.{n}.eta"), super::report::fmt_float(m.eta)));
            if m.beta_offset != 0.0 {
                resolved.push((
                    format!("mode.{n}.beta_offset"),
                    super::report::fmt_float(m.beta_offset),
                ));
            }
        }
        if let Some(n) = random_modes {
            resolved.push(("modes.random".into(), n.to_string()));
        }
        resolved.push(("grid.y0".into(), super::report::fmt_float(grid.y0)));
        resolved.push(("grid.count".into(), grid.count.to_string()));
        resolved.push(("integrator.dt".into(), super::report::fmt_float(integrator.dt)));
        resolved.push(("integrator.t0".into(), super::report::fmt_float(integrator.t0)));
        resolved.push((
            "integrator.t_end".into(),
            super::report::fmt_float(integrator.t_end),
        ));
        resolved.push((
            "integrator.boundary".into(),
            match integrator.boundary {
                Boundary::ZeroForce => "zero_force".into(),
                Boundary::AnalyticClamp => "analytic_clamp".into(),
            },
        ));
        resolved.push((
            "integrator.output_every".into(),
            super::report::fmt_float(integrator.output_every),
        ));
        if let Some(w) = &window {
            for (k, v) in [
                ("window.x_min", w.x_min),
                ("window.x_max", w.x_max),
                ("window.t_min", w.t_min),
                ("window.t_max", w.t_max),
            ] {
                resolved.push((k.into(), super::report::fmt_float(v)));
            }
            resolved.push(("window.nx".into(), w.nx.to_string()));
            resolved.push(("window.nt".into(), w.nt.to_string()));
        }
        resolved.push(("output.dir".into(), out_dir.display().to_string()));
        resolved.push((
            "output.format".into(),
            match format {
                OutputFormat::Csv => "csv".into(),
                OutputFormat::Json => "json".into(),
            },
        ));
        resolved.push(("seed".into(), seed.to_string()));
        if let Some(t) = tol {
            resolved.push(("tol".into(), super::report::fmt_float(t)));
        }
        resolved.push((
            "hierarchy.max_power".into(),
            hierarchy.limits.max_power.to_string(),
        ));
        resolved.push((
            "hierarchy.max_band".into(),
            hierarchy.limits.max_band.to_string(),
        ));
        resolved.push((
            "hierarchy.flow_orders".into(),
            hierarchy.flow_orders.to_string(),
        ));
        resolved.push(("hierarchy.samples".into(), hierarchy.samples.to_string()));

        Ok(RunConfig {
            params,
            modes,
            random_modes,
            grid,
            integrator,
            window,
            out_dir,
            format,
            seed,
            tol,
            hierarchy,
            resolved,
        })
    }

    pub fn require_params(&self) -> Result<ShiftParams, CliError> {
        self.params.ok_or_else(|| {
            CliError::Config("one of `epsilon` / `e_epsilon` is required".into())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_a_full_config() {
        let text = "\
# figure 1 setup
e_epsilon = 1.25
mode.1.alpha = -5
mode.1.beta_sign = -1
mode.1.eta = -50
grid.y0 = -45
grid.count = 200
integrator.dt = 1e-3
integrator.t_end = 5
output.dir = /tmp/gqtoda-test
seed = 7
";
        let cfg = RunConfig::resolve(Some(text), &Flags::default(), None).unwrap();
        let p = cfg.require_params().unwrap();
        assert!((p.epsilon() - 1.25f64.ln()).abs() < 1e-15);
        assert_eq!(cfg.modes.len(), 1);
        assert_eq!(cfg.modes[0].alpha, -5.0);
        assert_eq!(cfg.modes[0].branch, Branch::Negative);
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.grid.count, 200);
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        let err = RunConfig::resolve(Some("bogus.key = 1\n"), &Flags::default(), None)
            .unwrap_err();
        assert!(err.to_string().contains("unknown key"), "{err}");
        assert!(err.to_string().contains("line 1"), "{err}");
        let err =
            RawConfig::parse("seed = 1\nseed = 2\n").unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn rejects_both_epsilon_forms() {
        let err = RunConfig::resolve(
            Some("epsilon = 0.2\ne_epsilon = 1.25\n"),
            &Flags::default(),
            None,
        )
        .unwrap_err();
        assert!(err.to_string().contains("exactly one"), "{err}");
    }

    #[test]
    fn flags_override_file_and_env_feeds_default_dir() {
        let flags = Flags {
            seed: Some(99),
            out_dir: None,
            tol: Some(1e-8),
            config_path: None,
        };
        let cfg = RunConfig::resolve(
            Some("seed = 1\nepsilon = 0.3\n"),
            &flags,
            Some("/tmp/envdir".into()),
        )
        .unwrap();
        assert_eq!(cfg.seed, 99);
        assert_eq!(cfg.tol, Some(1e-8));
        assert_eq!(cfg.out_dir, PathBuf::from("/tmp/envdir"));
    }

    #[test]
    fn bad_number_reports_line_and_key() {
        let err = RunConfig::resolve(
            Some("epsilon = not-a-number\n"),
            &Flags::default(),
            None,
        )
        .unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 1") && msg.contains("epsilon"), "{msg}");
    }
}
