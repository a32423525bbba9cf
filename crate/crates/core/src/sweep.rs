//! `(N, M)` grid sweeps of the bound and the minimum gate time, and their
//! CSV/JSON output.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bound::{analytic_reference, maximize_bound};
use crate::error::{QslError, Result};
use crate::mintime::{find_min_time_until, MinTimeConfig};
use crate::model::{build_swap_goal, ControlSystem};

pub const CSV_HEADER: [&str; 8] = [
    "N",
    "M",
    "bound_value",
    "analytic_anchor",
    "t_min",
    "grape_error_at_t_min",
    "seed",
    "wall_time_seconds",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SweepMode {
    Bound,
    /// The min-time search also reports the bound it starts from, so this
    /// produces the same records as [`SweepMode::Both`].
    MinTime,
    Both,
}

impl SweepMode {
    pub fn runs_min_time(self) -> bool {
        !matches!(self, SweepMode::Bound)
    }
}

impl FromStr for SweepMode {
    type Err = QslError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bound" => Ok(SweepMode::Bound),
            "mintime" => Ok(SweepMode::MinTime),
            "both" => Ok(SweepMode::Both),
            other => Err(QslError::InvalidArgument(format!(
                "unknown mode '{other}' (expected bound, mintime or both)"
            ))),
        }
    }
}

impl fmt::Display for SweepMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepMode::Bound => "bound",
            SweepMode::MinTime => "mintime",
            SweepMode::Both => "both",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub bound_value: f64,
    pub analytic_anchor: f64,
    pub t_min: Option<f64>,
    pub grape_error_at_t_min: Option<f64>,
    pub seed: u64,
    pub wall_time_seconds: f64,
}

impl SweepRecord {
    /// `bound ≥ anchor − 1e−9`, and `t_min ≥ 0.95·bound` when present.
    pub fn check(&self) -> Result<()> {
        if self.bound_value < self.analytic_anchor - 1e-9 {
            return Err(QslError::Numerical(format!(
                "N={} M={}: bound {} below anchor {}",
                self.n, self.m, self.bound_value, self.analytic_anchor
            )));
        }
        if let Some(t) = self.t_min {
            if t < self.bound_value * (1.0 - 0.05) {
                return Err(QslError::Numerical(format!(
                    "N={} M={}: t_min {} below bound {}",
                    self.n, self.m, t, self.bound_value
                )));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    /// Inclusive level range.
    pub n_range: (usize, usize),
    /// Inclusive control range, clipped to `M ≤ N − 1` per level count.
    pub m_range: (usize, usize),
    pub mode: SweepMode,
    /// Seed shared by the bound and GRAPE searches of every grid point.
    pub seed: u64,
    pub mintime: MinTimeConfig,
    /// Worker threads; 0 uses the rayon default.
    pub jobs: usize,
    pub budget: Option<Duration>,
    /// Write 0 instead of measured wall times, for byte-identical reruns.
    pub record_timing: bool,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            n_range: (2, 6),
            m_range: (1, 5),
            mode: SweepMode::Bound,
            seed: 0,
            mintime: MinTimeConfig::default(),
            jobs: 0,
            budget: None,
            record_timing: true,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepOutcome {
    /// Finished grid points sorted by `(N, M)`.
    pub records: Vec<SweepRecord>,
    /// Grid points dropped because the budget ran out.
    pub skipped: Vec<(usize, usize)>,
}

impl SweepOutcome {
    pub fn complete(&self) -> bool {
        self.skipped.is_empty()
    }
}

/// Grid points `(N, M)` with `M ≤ N − 1`, in `(N, M)` order.
pub fn grid(n_range: (usize, usize), m_range: (usize, usize)) -> Result<Vec<(usize, usize)>> {
    let (n_lo, n_hi) = n_range;
    let (m_lo, m_hi) = m_range;
    if n_lo < 2 || n_lo > n_hi {
        return Err(QslError::InvalidArgument(format!(
            "level range {n_lo}:{n_hi} must satisfy 2 <= A <= B"
        )));
    }
    if m_lo < 1 || m_lo > m_hi {
        return Err(QslError::InvalidArgument(format!(
            "control range {m_lo}:{m_hi} must satisfy 1 <= A <= B"
        )));
    }
    Ok((n_lo..=n_hi)
        .flat_map(|n| (m_lo..=m_hi.min(n - 1)).map(move |m| (n, m)))
        .collect())
}

fn run_point(
    n: usize,
    m: usize,
    config: &SweepConfig,
    deadline: Option<Instant>,
) -> Result<SweepRecord> {
    let started = Instant::now();
    let system = ControlSystem::n_level(n, m)?;
    let goal = build_swap_goal(n)?;
    let mut mt = config.mintime.clone();
    mt.bound.seed = config.seed;
    mt.grape.seed = config.seed;

    let (bound_value, t_min, err) = if config.mode.runs_min_time() {
        let r = find_min_time_until(&system, &goal, &mt, deadline)?;
        (r.bound_value, Some(r.t_min), Some(r.error_at_t_min))
    } else {
        (maximize_bound(&goal, &system, &mt.bound)?.value, None, None)
    };
    let wall = if config.record_timing {
        started.elapsed().as_secs_f64()
    } else {
        0.0
    };
    Ok(SweepRecord {
        n,
        m,
        bound_value,
        analytic_anchor: analytic_reference(n),
        t_min,
        grape_error_at_t_min: err,
        seed: config.seed,
        wall_time_seconds: wall,
    })
}

/// Runs every grid point on a pool of `jobs` workers. Points not started (or
/// interrupted) when the budget runs out are listed in `skipped`.
pub fn run_sweep(config: &SweepConfig) -> Result<SweepOutcome> {
    let points = grid(config.n_range, config.m_range)?;
    let deadline = config.budget.map(|b| Instant::now() + b);
    let pool = crate::worker_pool(config.jobs)?;

    let results: Vec<Result<Option<SweepRecord>>> = pool.install(|| {
        points
            .par_iter()
            .map(|&(n, m)| {
                if deadline.is_some_and(|d| Instant::now() >= d) {
                    return Ok(None);
                }
                match run_point(n, m, config, deadline) {
                    Ok(r) => Ok(Some(r)),
                    Err(QslError::BudgetExceeded(_)) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect()
    });

    let mut records = Vec::new();
    let mut skipped = Vec::new();
    for (&point, result) in points.iter().zip(results) {
        match result? {
            Some(r) => records.push(r),
            None => skipped.push(point),
        }
    }
    Ok(SweepOutcome { records, skipped })
}

/// `x` with 12 significant digits, shortest form (like C's `%.12g`).
pub fn format_sig(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}"))
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(format_sig).unwrap_or_default()
}

pub fn write_csv<W: Write>(records: &[SweepRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.n.to_string(),
            r.m.to_string(),
            format_sig(r.bound_value),
            format_sig(r.analytic_anchor),
            opt(r.t_min),
            opt(r.grape_error_at_t_min),
            r.seed.to_string(),
            format_sig(r.wall_time_seconds),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// JSON array of records; numbers carry the same 12 significant digits as
/// the CSV and absent fields are `null`.
pub fn write_json<W: Write>(records: &[SweepRecord], mut out: W) -> Result<()> {
    let num = |x: f64| -> Result<serde_json::Value> { Ok(serde_json::from_str(&format_sig(x))?) };
    let num_opt = |x: Option<f64>| -> Result<serde_json::Value> {
        x.map_or(Ok(serde_json::Value::Null), num)
    };
    let mut rows = Vec::with_capacity(records.len());
    for r in records {
        let mut row = serde_json::Map::new();
        row.insert("N".into(), r.n.into());
        row.insert("M".into(), r.m.into());
        row.insert("bound_value".into(), num(r.bound_value)?);
        row.insert("analytic_anchor".into(), num(r.analytic_anchor)?);
        row.insert("t_min".into(), num_opt(r.t_min)?);
        row.insert(
            "grape_error_at_t_min".into(),
            num_opt(r.grape_error_at_t_min)?,
        );
        row.insert("seed".into(), r.seed.into());
        row.insert("wall_time_seconds".into(), num(r.wall_time_seconds)?);
        rows.push(serde_json::Value::Object(row));
    }
    serde_json::to_writer_pretty(&mut out, &rows)?;
    writeln!(out)?;
    Ok(())
}

/// Reads records written by [`write_csv`].
pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<SweepRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers()?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(QslError::Serialization(format!(
            "unexpected CSV header: {header:?}"
        )));
    }
    let mut records = Vec::new();
    for row in rdr.deserialize() {
        records.push(row?);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_counts() {
        assert_eq!(grid((2, 6), (1, 5)).unwrap().len(), 15);
        assert_eq!(grid((2, 15), (1, 14)).unwrap().len(), 105);
        assert_eq!(grid((4, 4), (2, 9)).unwrap(), vec![(4, 2), (4, 3)]);
        assert!(grid((1, 3), (1, 1)).is_err());
        assert!(grid((3, 2), (1, 1)).is_err());
        assert!(grid((2, 3), (0, 1)).is_err());
    }

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(2f64.sqrt()), "1.41421356237");
        assert_eq!(format_sig(4.0), "4");
        assert_eq!(format_sig(0.0), "0");
        assert_eq!(format_sig(-0.5), "-0.5");
        assert_eq!(format_sig(123456789012.4), "123456789012");
        assert_eq!(format_sig(1234567890123.0), "1.23456789012e12");
        assert_eq!(format_sig(9.9999999999999e-5), "0.0001");
        assert_eq!(format_sig(1.5e-7), "1.5e-7");
        assert_eq!(format_sig(9.99999999999951), "10");
        assert_eq!(format_sig(0.000123), "0.000123");
    }

    #[test]
    fn mode_parsing() {
        for mode in [SweepMode::Bound, SweepMode::MinTime, SweepMode::Both] {
            assert_eq!(mode.to_string().parse::<SweepMode>().unwrap(), mode);
        }
        assert!("grape".parse::<SweepMode>().is_err());
    }

    #[test]
    fn bound_sweep_round_trips_through_csv() {
        let cfg = SweepConfig {
            n_range: (2, 4),
            m_range: (1, 3),
            record_timing: false,
            ..Default::default()
        };
        let out = run_sweep(&cfg).unwrap();
        assert!(out.complete());
        let keys: Vec<_> = out.records.iter().map(|r| (r.n, r.m)).collect();
        assert_eq!(keys, vec![(2, 1), (3, 1), (3, 2), (4, 1), (4, 2), (4, 3)]);
        for r in &out.records {
            r.check().unwrap();
            assert!(r.t_min.is_none());
        }
        let mut buf = Vec::new();
        write_csv(&out.records, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(
            "N,M,bound_value,analytic_anchor,t_min,grape_error_at_t_min,seed,wall_time_seconds\n"
        ));
        assert!(text.contains("\n2,1,1.41421356237,1.41421356237,,,0,0\n"));
        let back = read_csv(&buf[..]).unwrap();
        assert_eq!(back.len(), out.records.len());
        for (a, b) in back.iter().zip(&out.records) {
            assert!((a.bound_value - b.bound_value).abs() <= 1e-11 * b.bound_value);
        }
    }

    #[test]
    fn json_uses_null_for_absent_fields() {
        let rec = SweepRecord {
            n: 3,
            m: 1,
            bound_value: 1.0 / 3.0,
            analytic_anchor: 2.0,
            t_min: None,
            grape_error_at_t_min: Some(5e-5),
            seed: 7,
            wall_time_seconds: 0.0,
        };
        let mut buf = Vec::new();
        write_json(&[rec], &mut buf).unwrap();
        let v: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_eq!(v[0]["N"], 3);
        assert!(v[0]["t_min"].is_null());
        assert_eq!(v[0]["bound_value"].as_f64().unwrap(), 0.333333333333);
        assert_eq!(v[0]["grape_error_at_t_min"].as_f64().unwrap(), 5e-5);
    }

    #[test]
    fn zero_budget_skips_everything() {
        let cfg = SweepConfig {
            n_range: (2, 3),
            m_range: (1, 2),
            budget: Some(Duration::ZERO),
            ..Default::default()
        };
        let out = run_sweep(&cfg).unwrap();
        assert!(out.records.is_empty());
        assert_eq!(out.skipped, vec![(2, 1), (3, 1), (3, 2)]);
        assert!(!out.complete());
    }

    #[test]
    fn record_invariants() {
        let mut rec = SweepRecord {
            n: 4,
            m: 1,
            bound_value: 5.0,
            analytic_anchor: 6f64.sqrt(),
            t_min: Some(4.9),
            grape_error_at_t_min: Some(1e-5),
            seed: 0,
            wall_time_seconds: 1.0,
        };
        rec.check().unwrap();
        rec.t_min = Some(4.0);
        assert!(rec.check().is_err());
        rec.t_min = None;
        rec.bound_value = 2.0;
        assert!(rec.check().is_err());
    }
}
