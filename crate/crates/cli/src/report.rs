//! Run directories, check tables and the manifest.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Local};
use corrolab::analysis::InequalityReport;
use corrolab::solver::AssumptionCheck;

use crate::config::{ExperimentConfig, Mode};

/// One line of `checks.csv`; the exit status is 0 iff every row passes.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub label: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(label: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            pass,
            detail: detail.into(),
        }
    }
}

impl From<AssumptionCheck> for Check {
    fn from(c: AssumptionCheck) -> Self {
        Check::new(c.label, c.pass, c.detail)
    }
}

impl From<&InequalityReport> for Check {
    fn from(r: &InequalityReport) -> Self {
        let exponent = r
            .exponent
            .map_or(String::new(), |e| format!(", exponent {e:.4e}"));
        Check::new(
            r.check.clone(),
            r.pass,
            format!(
                "lhs {:.6e}, rhs {:.6e}, constant {:.6e}{exponent}",
                r.lhs, r.rhs, r.constant
            ),
        )
    }
}

pub const CHECKS_HEADER: &str = "label,pass,detail";

/// Quotes a free-text field for CSV.
pub fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn checks_csv(checks: &[Check]) -> String {
    let mut out = format!("{CHECKS_HEADER}\n");
    for c in checks {
        let _ = writeln!(out, "{},{},{}", c.label, c.pass, quote(&c.detail));
    }
    out
}

/// Creates `<base>/<mode>-<timestamp>`, adding a numeric suffix if a run
/// with the same timestamp exists. Never reuses a directory.
pub fn fresh_run_dir(base: &Path, mode: Mode, now: DateTime<Local>) -> io::Result<PathBuf> {
    fs::create_dir_all(base)?;
    let stem = format!("{mode}-{}", now.format("%Y%m%dT%H%M%S%.3f"));
    for k in 0u32.. {
        let dir = if k == 0 {
            base.join(&stem)
        } else {
            base.join(format!("{stem}-{k}"))
        };
        match fs::create_dir(&dir) {
            Ok(()) => return Ok(dir),
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(e),
        }
    }
    unreachable!("u32 suffixes exhausted")
}

/// Run information as comments followed by the resolved configuration, so
/// the manifest is itself a valid configuration file.
pub fn manifest(
    config: &ExperimentConfig,
    config_path: &Path,
    started: DateTime<Local>,
    seconds: f64,
    status: i32,
    files: &[String],
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# corrolab {}", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(out, "# config: {}", config_path.display());
    let _ = writeln!(out, "# started: {}", started.to_rfc3339());
    let _ = writeln!(out, "# runtime_seconds: {seconds:.3}");
    let _ = writeln!(out, "# exit_status: {status}");
    let _ = writeln!(out, "# files: {}", files.join(" "));
    let body = toml::to_string(config).unwrap_or_else(|e| format!("# unserialisable: {e}\n"));
    out.push('\n');
    out.push_str(&body);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quoting_escapes_separators() {
        assert_eq!(quote("plain"), "plain");
        assert_eq!(quote("a, b"), "\"a, b\"");
        assert_eq!(quote("say \"x\""), "\"say \"\"x\"\"\"");
    }

    #[test]
    fn run_dirs_are_never_reused() {
        let tmp = tempfile::tempdir().unwrap();
        let now = Local::now();
        let a = fresh_run_dir(tmp.path(), Mode::Validate, now).unwrap();
        let b = fresh_run_dir(tmp.path(), Mode::Validate, now).unwrap();
        assert_ne!(a, b);
        assert!(a.is_dir() && b.is_dir());
    }
}
