use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::{Duration, Instant};

use serde_json::{json, Value};

use qsl_core::bound::previous_bound_reference;
use qsl_core::selftest::{run_selftest, SelftestConfig};
use qsl_core::sweep::{format_sig, run_sweep, write_csv, write_json, SweepConfig, SweepMode};
use qsl_core::{
    analytic_reference, build_swap_goal, find_min_time_until, maximize_bound, BoundConfig,
    ControlSystem, MinTimeConfig, QslError,
};

use crate::args::{Format, Settings};
use crate::CliError;

fn num(x: f64) -> Value {
    serde_json::from_str(&format_sig(x)).unwrap_or(Value::Null)
}

fn single_format(s: &Settings) -> Result<Format, CliError> {
    match s.format.unwrap_or(Format::Text) {
        Format::Csv => Err(CliError::Usage(
            "csv output is only available for surface".into(),
        )),
        f => Ok(f),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Usage(format!("cannot write {}: {e}", path.display())))
}

fn write_text_report(rows: &[(&str, String)]) -> io::Result<()> {
    let mut out = io::stdout().lock();
    for (k, v) in rows {
        writeln!(out, "{k:<18}{v}")?;
    }
    Ok(())
}

/// Prints the report as text or JSON and mirrors the JSON to `--out`.
fn emit(s: &Settings, rows: &[(&str, String)], report: &Value) -> Result<(), CliError> {
    let pretty = serde_json::to_string_pretty(report).map_err(QslError::from)?;
    match single_format(s)? {
        Format::Json => println!("{pretty}"),
        _ => write_text_report(rows).map_err(QslError::from)?,
    }
    if let Some(path) = &s.out {
        let mut w = create(path)?;
        writeln!(w, "{pretty}")
            .and_then(|_| w.flush())
            .map_err(QslError::from)?;
    }
    Ok(())
}

fn bound_config(s: &Settings) -> BoundConfig {
    BoundConfig {
        restarts: s.restarts.unwrap_or(BoundConfig::default().restarts),
        seed: s.seed,
        ..Default::default()
    }
}

fn mintime_config(s: &Settings, grape_restarts: bool) -> MinTimeConfig {
    let mut cfg = MinTimeConfig {
        threshold: s.threshold,
        ..Default::default()
    };
    cfg.bound.seed = s.seed;
    cfg.grape.seed = s.seed;
    cfg.grape.n_slots = s.slots;
    if let Some(r) = s.restarts {
        if grape_restarts {
            cfg.grape.restarts = r;
        } else {
            cfg.bound.restarts = r;
        }
    }
    cfg
}

fn deadline(s: &Settings) -> Option<Instant> {
    s.budget_seconds
        .map(|b| Instant::now() + Duration::from_secs_f64(b))
}

pub fn bound(s: &Settings) -> Result<(), CliError> {
    let (n, m) = s.instance()?;
    single_format(s)?;
    let system = ControlSystem::n_level(n, m)?;
    let goal = build_swap_goal(n)?;
    let r = maximize_bound(&goal, &system, &bound_config(s))?;
    let anchor = analytic_reference(n);
    let prior = previous_bound_reference();
    let rows = [
        ("N", n.to_string()),
        ("M", m.to_string()),
        ("bound_value", format_sig(r.value)),
        ("analytic_anchor", format_sig(anchor)),
        ("previous_bound", format_sig(prior)),
        ("starts_used", r.starts_used.to_string()),
        ("best_start", r.best_start.to_string()),
        ("evaluations", r.objective_evaluations.to_string()),
        ("seed", s.seed.to_string()),
    ];
    let report = json!({
        "N": n,
        "M": m,
        "bound_value": num(r.value),
        "analytic_anchor": num(anchor),
        "previous_bound": num(prior),
        "starts_used": r.starts_used,
        "best_start": r.best_start,
        "evaluations": r.objective_evaluations,
        "seed": s.seed,
        "argmax_params": {
            "phases": r.argmax_params.phases.iter().map(|&x| num(x)).collect::<Vec<_>>(),
            "generator": r.argmax_params.generator.iter().map(|&x| num(x)).collect::<Vec<_>>(),
        },
    });
    emit(s, &rows, &report)
}

pub fn mintime(s: &Settings) -> Result<(), CliError> {
    let (n, m) = s.instance()?;
    single_format(s)?;
    let system = ControlSystem::n_level(n, m)?;
    let goal = build_swap_goal(n)?;
    let r = find_min_time_until(&system, &goal, &mintime_config(s, true), deadline(s))?;
    let (lo, hi) = r.bracket;
    let rows = [
        ("N", n.to_string()),
        ("M", m.to_string()),
        ("t_min", format_sig(r.t_min)),
        (
            "bracket",
            format!("[{}, {}]", format_sig(lo), format_sig(hi)),
        ),
        ("error_at_t_min", format_sig(r.error_at_t_min)),
        ("bound_value", format_sig(r.bound_value)),
        ("analytic_anchor", format_sig(analytic_reference(n))),
        ("consistent", r.consistent.to_string()),
        ("evaluations", r.evaluations.to_string()),
        ("seed", s.seed.to_string()),
    ];
    let sched = &r.schedule;
    let report = json!({
        "N": n,
        "M": m,
        "t_min": num(r.t_min),
        "bracket": [num(lo), num(hi)],
        "error_at_t_min": num(r.error_at_t_min),
        "bound_value": num(r.bound_value),
        "analytic_anchor": num(analytic_reference(n)),
        "consistent": r.consistent,
        "evaluations": r.evaluations,
        "seed": s.seed,
        "probes": r.probes.iter().map(|p| json!({
            "T": num(p.total_time),
            "error": num(p.error),
            "converged": p.converged,
        })).collect::<Vec<_>>(),
        "schedule": {
            "T": num(sched.total_time),
            "n_slots": sched.n_slots,
            "amplitudes": sched.amplitudes.iter()
                .map(|row| row.iter().map(|&x| num(x)).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
        },
    });
    if !r.consistent {
        log::warn!("t_min {} is below the bound {}", r.t_min, r.bound_value);
    }
    emit(s, &rows, &report)
}

pub fn surface(s: &Settings) -> Result<(), CliError> {
    let format = match s.format.unwrap_or(Format::Csv) {
        Format::Text => return Err(CliError::Usage("surface writes csv or json".into())),
        f => f,
    };
    let n_range = s
        .n_range
        .or(s.n.map(|n| (n, n)))
        .ok_or_else(|| CliError::Usage("--n-range (or --n) is required".into()))?;
    let m_range = s
        .m_range
        .or(s.m.map(|m| (m, m)))
        .unwrap_or((1, n_range.1.saturating_sub(1).max(1)));
    let config = SweepConfig {
        n_range,
        m_range,
        mode: s.mode,
        seed: s.seed,
        mintime: mintime_config(s, s.mode != SweepMode::Bound),
        jobs: s.jobs,
        budget: s.budget_seconds.map(Duration::from_secs_f64),
        record_timing: !s.no_timing,
    };
    let outcome = run_sweep(&config)?;
    for r in &outcome.records {
        if let Err(e) = r.check() {
            log::warn!("{e}");
        }
    }

    let write = |w: &mut dyn Write| -> Result<(), QslError> {
        match format {
            Format::Json => write_json(&outcome.records, w),
            _ => write_csv(&outcome.records, w),
        }
    };
    match &s.out {
        Some(path) => {
            let mut w = create(path)?;
            write(&mut w)?;
            w.flush().map_err(QslError::from)?;
        }
        None => write(&mut io::stdout().lock())?,
    }

    if outcome.complete() {
        Ok(())
    } else {
        let missing: Vec<String> = outcome
            .skipped
            .iter()
            .map(|(n, m)| format!("({n},{m})"))
            .collect();
        log::warn!("budget exhausted; {} grid points missing", missing.len());
        Err(CliError::Budget(format!(
            "wrote {} of {} records; missing {}",
            outcome.records.len(),
            outcome.records.len() + outcome.skipped.len(),
            missing.join(" ")
        )))
    }
}

pub fn selftest(s: &Settings) -> Result<(), CliError> {
    let cfg = SelftestConfig {
        seed: s.seed,
        drift_perturbation: s.drift_perturbation,
        ..Default::default()
    };
    let report = run_selftest(&cfg);
    print!("{report}");
    let failed = report.checks.iter().filter(|c| !c.passed).count();
    if failed == 0 {
        println!("all {} checks passed", report.checks.len());
        Ok(())
    } else {
        Err(CliError::Failed(format!(
            "{failed} of {} checks failed",
            report.checks.len()
        )))
    }
}
