//! Deterministic output formatting: fixed 17-significant-digit floats,
//! LF line endings, metadata headers embedded in every dataset.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use super::CliError;

/// Floating-point values are printed with 17 significant digits so that
/// identical runs produce byte-identical files.
pub fn fmt_float(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x }; // normalize -0.0
    format!("{x:.16e}")
}

/// Ordered key/value metadata block shared by all output files.
#[derive(Clone, Debug, Default)]
pub struct Metadata {
    entries: Vec<(String, String)>,
}

impl Metadata {
    pub fn new(command: &str) -> Self {
        let mut m = Metadata::default();
        m.push("tool", format!("gqtoda {}", env!("CARGO_PKG_VERSION")));
        m.push("command", command.to_string());
        m
    }

    pub fn push(&mut self, key: &str, value: String) {
        self.entries.push((key.to_string(), value));
    }

    pub fn push_float(&mut self, key: &str, value: f64) {
        self.push(key, fmt_float(value));
    }

    /// A derived constant together with the rule that produced it.
    pub fn push_derived(&mut self, key: &str, value: f64, rule: &str) {
        self.push(key, format!("{}  (derived: {rule})", fmt_float(value)));
    }

    pub fn push_given(&mut self, key: &str, value: f64) {
        self.push(key, format!("{}  (given)", fmt_float(value)));
    }

    pub fn comment_block(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "# {k} = {v}");
        }
        s
    }

    pub fn entries(&self) -> &[(String, String)] {
        &self.entries
    }
}

pub fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::Io {
            path: parent.display().to_string(),
            message: e.to_string(),
        })?;
    }
    let mut file = fs::File::create(path).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    file.write_all(contents.as_bytes()).map_err(|e| CliError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Comma-separated dataset: metadata comment lines, a header row, then rows.
pub fn csv_dataset(meta: &Metadata, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = meta.comment_block();
    s.push_str(&header.join(","));
    s.push('\n');
    for row in rows {
        s.push_str(&row.join(","));
        s.push('\n');
    }
    s
}

fn json_escape(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len() + 2);
    for c in raw.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c if (c as u32) < 0x20 => {
                let _ = write!(out, "\\u{:04x}", c as u32);
            }
            c => out.push(c),
        }
    }
    out
}

/// JSON dataset with the same metadata, column names and rows as the CSV
/// form. Numeric cells are emitted verbatim (they are valid JSON numbers).
pub fn json_dataset(meta: &Metadata, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = String::from("{\n  \"metadata\": {\n");
    let entries = meta.entries();
    for (i, (k, v)) in entries.iter().enumerate() {
        let comma = if i + 1 == entries.len() { "" } else { "," };
        let _ = writeln!(s, "    \"{}\": \"{}\"{comma}", json_escape(k), json_escape(v));
    }
    s.push_str("  },\n  \"columns\": [");
    let cols: Vec<String> = header.iter().map(|h| format!("\"{}\"", json_escape(h))).collect();
    s.push_str(&cols.join(", "));
    s.push_str("],\n  \"rows\": [\n");
    for (i, row) in rows.iter().enumerate() {
        let comma = if i + 1 == rows.len() { "" } else { "," };
        let _ = writeln!(s, "    [{}]{comma}", row.join(", "));
    }
    s.push_str("  ]\n}\n");
    s
}

/// One line of a pass/fail table.
pub struct CheckLine {
    pub name: String,
    pub observed: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckLine {
    pub fn against(name: &str, observed: f64, tolerance: f64) -> Self {
        CheckLine {
            name: name.to_string(),
            observed,
            tolerance,
            passed: observed.abs() <= tolerance,
        }
    }

    pub fn render(&self) -> String {
        format!(
            "CHECK {:<32} observed = {:<24} tol = {:<12} {}",
            self.name,
            fmt_float(self.observed),
            fmt_float(self.tolerance),
            if self.passed { "PASS" } else { "FAIL" }
        )
    }
}

/// Assembles a text report: metadata comments, free-form lines, a check
/// table and a final RESULT line.
pub struct Report {
    meta: Metadata,
    lines: Vec<String>,
    checks: Vec<CheckLine>,
}

impl Report {
    pub fn new(meta: Metadata) -> Self {
        Report {
            meta,
            lines: Vec::new(),
            checks: Vec::new(),
        }
    }

    pub fn line(&mut self, text: impl Into<String>) {
        self.lines.push(text.into());
    }

    pub fn check(&mut self, check: CheckLine) {
        self.checks.push(check);
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn render(&self) -> String {
        let mut s = self.meta.comment_block();
        for line in &self.lines {
            s.push_str(line);
            s.push('\n');
        }
        for check in &self.checks {
            s.push_str(&check.render());
            s.push('\n');
        }
        let _ = writeln!(
            s,
            "RESULT {}",
            if self.passed() { "PASS" } else { "FAIL" }
        );
        s
    }
}
