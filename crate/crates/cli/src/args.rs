use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use qsl_core::sweep::SweepMode;

use crate::UsageError;

#[derive(Debug, Parser)]
#[command(
    name = "qsl",
    version,
    about = "Quantum speed limits: stabilizer bound and GRAPE minimum gate time"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Maximize the speed-limit bound for one (N, M) instance.
    Bound(Flags),
    /// Estimate the minimum gate time for one (N, M) instance.
    Mintime(Flags),
    /// Sweep an (N, M) grid and write one record per point.
    Surface(Flags),
    /// Run the invariant suite; exits nonzero on any failure.
    Selftest(Flags),
}

impl Command {
    pub fn flags(&self) -> &Flags {
        match self {
            Command::Bound(f)
            | Command::Mintime(f)
            | Command::Surface(f)
            | Command::Selftest(f) => f,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Text,
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "text" => Ok(Format::Text),
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!(
                "unknown format '{other}' (expected text, csv or json)"
            )),
        }
    }
}

/// Inclusive `A:B` range; a bare `A` means `A:A`.
pub fn parse_range(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(':').unwrap_or((s, s));
    let a = a
        .trim()
        .parse()
        .map_err(|_| format!("bad range start in '{s}'"))?;
    let b = b
        .trim()
        .parse()
        .map_err(|_| format!("bad range end in '{s}'"))?;
    if a > b {
        return Err(format!("empty range '{s}'"));
    }
    Ok((a, b))
}

fn parse_mode(s: &str) -> Result<SweepMode, String> {
    s.parse().map_err(|e: qsl_core::QslError| e.to_string())
}

/// Every flag is optional here so that the config file can fill the gaps.
#[derive(Clone, Debug, Default, Args)]
pub struct Flags {
    /// Number of levels.
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of controlled levels (projectors on levels 1..M).
    #[arg(long)]
    pub m: Option<usize>,
    /// Level range A:B (surface).
    #[arg(long = "n-range", value_parser = parse_range)]
    pub n_range: Option<(usize, usize)>,
    /// Control range A:B (surface).
    #[arg(long = "m-range", value_parser = parse_range)]
    pub m_range: Option<(usize, usize)>,
    /// bound, mintime or both (surface).
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<SweepMode>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Starts of the subcommand's optimizer: bound maximization for `bound`
    /// and bound-mode surfaces, GRAPE otherwise.
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Fixed GRAPE slot count (default max(40, ceil(10 T))).
    #[arg(long)]
    pub slots: Option<usize>,
    /// Gate-error threshold of the min-time search.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Output file; surfaces go to stdout without it.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// text or json for single instances, csv or json for surfaces.
    #[arg(long)]
    pub format: Option<Format>,
    /// Worker threads (0 = one per core).
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Wall-time cap; exceeding it exits with status 3.
    #[arg(long = "budget-seconds")]
    pub budget_seconds: Option<f64>,
    /// JSON file whose keys mirror the long flag names.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Write 0 in the wall-time column so reruns are byte-identical.
    #[arg(long = "no-timing")]
    pub no_timing: bool,
    /// Test hook: shift the (1,2)/(2,1) drift entries in the self-test.
    #[arg(long = "drift-perturbation", hide = true)]
    pub drift_perturbation: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    n: Option<usize>,
    m: Option<usize>,
    #[serde(rename = "n-range", alias = "n_range")]
    n_range: Option<String>,
    #[serde(rename = "m-range", alias = "m_range")]
    m_range: Option<String>,
    mode: Option<String>,
    seed: Option<u64>,
    restarts: Option<usize>,
    slots: Option<usize>,
    threshold: Option<f64>,
    out: Option<PathBuf>,
    format: Option<String>,
    jobs: Option<usize>,
    #[serde(rename = "budget-seconds", alias = "budget_seconds")]
    budget_seconds: Option<f64>,
    #[serde(rename = "no-timing", alias = "no_timing")]
    no_timing: Option<bool>,
}

fn read_config(path: &Path) -> Result<Flags, UsageError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| UsageError(format!("cannot read config {}: {e}", path.display())))?;
    let file: FileConfig = serde_json::from_str(&text)
        .map_err(|e| UsageError(format!("bad config {}: {e}", path.display())))?;
    let bad = |key: &str, e: String| UsageError(format!("config key '{key}': {e}"));
    Ok(Flags {
        n: file.n,
        m: file.m,
        n_range: file
            .n_range
            .map(|s| parse_range(&s))
            .transpose()
            .map_err(|e| bad("n-range", e))?,
        m_range: file
            .m_range
            .map(|s| parse_range(&s))
            .transpose()
            .map_err(|e| bad("m-range", e))?,
        mode: file
            .mode
            .map(|s| parse_mode(&s))
            .transpose()
            .map_err(|e| bad("mode", e))?,
        seed: file.seed,
        restarts: file.restarts,
        slots: file.slots,
        threshold: file.threshold,
        out: file.out,
        format: file
            .format
            .map(|s| s.parse())
            .transpose()
            .map_err(|e| bad("format", e))?,
        jobs: file.jobs,
        budget_seconds: file.budget_seconds,
        config: None,
        no_timing: file.no_timing.unwrap_or(false),
        drift_perturbation: None,
    })
}

/// Flags win over the config file, which wins over built-in defaults.
#[derive(Clone, Debug)]
pub struct Settings {
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub n_range: Option<(usize, usize)>,
    pub m_range: Option<(usize, usize)>,
    pub mode: SweepMode,
    pub seed: u64,
    pub restarts: Option<usize>,
    pub slots: Option<usize>,
    pub threshold: f64,
    pub out: Option<PathBuf>,
    pub format: Option<Format>,
    pub jobs: usize,
    pub budget_seconds: Option<f64>,
    pub no_timing: bool,
    pub drift_perturbation: f64,
}

impl Settings {
    pub fn resolve(flags: &Flags) -> Result<Settings, UsageError> {
        let file = match &flags.config {
            Some(path) => read_config(path)?,
            None => Flags::default(),
        };
        let s = Settings {
            n: flags.n.or(file.n),
            m: flags.m.or(file.m),
            n_range: flags.n_range.or(file.n_range),
            m_range: flags.m_range.or(file.m_range),
            mode: flags.mode.or(file.mode).unwrap_or(SweepMode::Bound),
            seed: flags.seed.or(file.seed).unwrap_or(0),
            restarts: flags.restarts.or(file.restarts),
            slots: flags.slots.or(file.slots),
            threshold: flags.threshold.or(file.threshold).unwrap_or(1e-4),
            out: flags.out.clone().or(file.out),
            format: flags.format.or(file.format),
            jobs: flags.jobs.or(file.jobs).unwrap_or(0),
            budget_seconds: flags.budget_seconds.or(file.budget_seconds),
            no_timing: flags.no_timing || file.no_timing,
            drift_perturbation: flags.drift_perturbation.unwrap_or(0.0),
        };
        if !(s.threshold.is_finite() && s.threshold > 0.0) {
            return Err(UsageError(format!(
                "--threshold must be positive, got {}",
                s.threshold
            )));
        }
        if s.restarts == Some(0) {
            return Err(UsageError("--restarts must be at least 1".into()));
        }
        if s.slots == Some(0) {
            return Err(UsageError("--slots must be at least 1".into()));
        }
        if let Some(b) = s.budget_seconds {
            if !(b.is_finite() && b >= 0.0) {
                return Err(UsageError(format!(
                    "--budget-seconds must be nonnegative, got {b}"
                )));
            }
        }
        Ok(s)
    }

    /// `(N, M)` for single-instance commands.
    pub fn instance(&self) -> Result<(usize, usize), UsageError> {
        let n = self.n.ok_or_else(|| UsageError("--n is required".into()))?;
        let m = self.m.ok_or_else(|| UsageError("--m is required".into()))?;
        if n < 2 {
            return Err(UsageError(format!("need N >= 2, got {n}")));
        }
        if m < 1 || m > n - 1 {
            return Err(UsageError(format!(
                "need 1 <= M <= N - 1, got N = {n}, M = {m}"
            )));
        }
        Ok((n, m))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("2:15"), Ok((2, 15)));
        assert_eq!(parse_range("4"), Ok((4, 4)));
        assert!(parse_range("5:3").is_err());
        assert!(parse_range("a:3").is_err());
    }

    #[test]
    fn flags_beat_file_beat_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(
            &path,
            r#"{"seed": 7, "threshold": 0.01, "n-range": "2:4", "jobs": 2}"#,
        )
        .unwrap();
        let flags = Flags {
            seed: Some(3),
            config: Some(path),
            ..Default::default()
        };
        let s = Settings::resolve(&flags).unwrap();
        assert_eq!(s.seed, 3);
        assert_eq!(s.threshold, 0.01);
        assert_eq!(s.n_range, Some((2, 4)));
        assert_eq!(s.jobs, 2);
        assert_eq!(s.mode, SweepMode::Bound);
        assert_eq!(
            Settings::resolve(&Flags::default()).unwrap().threshold,
            1e-4
        );
    }

    #[test]
    fn unknown_config_key_is_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"sead": 7}"#).unwrap();
        let flags = Flags {
            config: Some(path),
            ..Default::default()
        };
        assert!(Settings::resolve(&flags).is_err());
    }

    #[test]
    fn instance_validation() {
        let mut s = Settings::resolve(&Flags::default()).unwrap();
        s.n = Some(2);
        s.m = Some(2);
        assert!(s.instance().is_err());
        s.m = Some(1);
        assert_eq!(s.instance().unwrap(), (2, 1));
        s.n = Some(1);
        assert!(s.instance().is_err());
    }
}
