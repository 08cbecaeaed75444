//! Run one configured scenario: simulate, compare against the oracles and
//! write the series CSV, the JSON summary and the NDJSON jump log.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::time::Instant;

use serde::Serialize;

use crate::config::{OutputFormat, RunConfig};
use crate::engine::{JumpEvent, MemoryLoss, Simulation};
use crate::error::Result;
use crate::linalg::DensityMatrix;
use crate::models::ModelSpec;
use crate::oracle;
use crate::series::{compare_series, ComparisonReport, TrajectorySeries};

#[derive(Clone, Debug, Serialize)]
pub struct NamedComparison {
    pub name: String,
    /// Last time included in the comparison.
    pub compared_until: f64,
    #[serde(flatten)]
    pub report: ComparisonReport,
}

#[derive(Clone, Debug, Serialize)]
pub struct PositivitySummary {
    /// First recorded time the master-equation solution has a negative eigenvalue.
    pub oracle_loss_time: Option<f64>,
    /// Same scan on the ensemble density matrix at the statistical floor `5/√N`.
    pub ensemble_loss_time: Option<f64>,
    /// First time a negative channel found an occupied target whose source was empty.
    pub memory_loss_time: Option<f64>,
    pub memory_loss: Option<MemoryLoss>,
}

#[derive(Clone, Debug, Serialize)]
pub struct Summary {
    pub model: String,
    pub ensemble_size: u64,
    pub dt: f64,
    pub t_max: f64,
    pub seed: u64,
    pub steps: usize,
    pub final_time: f64,
    /// `[[re, im], …]` row-major.
    pub final_rho: Vec<Vec<[f64; 2]>>,
    /// `(t, N_eff)` at every recorded time.
    pub n_eff: Vec<(f64, usize)>,
    pub max_n_eff: usize,
    pub registry_entries_created: usize,
    pub jump_events: usize,
    pub saturated_steps: usize,
    pub positivity: PositivitySummary,
    pub comparisons: Vec<NamedComparison>,
    pub warnings: Vec<String>,
    pub pass: bool,
    pub runtime_seconds: f64,
}

#[derive(Clone, Debug)]
pub struct ScenarioOutcome {
    pub summary: Summary,
    pub series: TrajectorySeries,
    pub events: Vec<JumpEvent>,
    pub files: Vec<PathBuf>,
}

fn matrix_rows(rho: &DensityMatrix) -> Vec<Vec<[f64; 2]>> {
    let d = rho.dim();
    (0..d).map(|i| (0..d).map(|j| [rho.get(i, j).re, rho.get(i, j).im]).collect()).collect()
}

fn truncate(series: &TrajectorySeries, until: Option<f64>) -> TrajectorySeries {
    let Some(limit) = until else { return series.clone() };
    let keep = series.times.iter().take_while(|&&t| t < limit).count();
    TrajectorySeries {
        dim: series.dim,
        channel_labels: series.channel_labels.clone(),
        times: series.times[..keep].to_vec(),
        rho: series.rho[..keep].to_vec(),
        rates: series.rates[..keep].to_vec(),
        counts: series.counts[..keep].to_vec(),
    }
}

/// Simulate and compare without touching the file system.
pub fn execute(cfg: &RunConfig) -> Result<ScenarioOutcome> {
    cfg.validate()?;
    let started = Instant::now();
    let model: ModelSpec = cfg.model.build()?;
    let ec = &cfg.engine;
    let mut events = Vec::new();
    let (snaps, diag) = Simulation::new(&model, ec.clone())?.run(|o| events.extend(o.events.iter().cloned()))?;
    let labels: Vec<usize> = model.channels.iter().map(|c| c.label).collect();
    let series = TrajectorySeries::from_snapshots(model.dim(), labels, &snaps);
    let steps = oracle::record_steps(ec.steps(), ec.record_stride);

    let cc = &cfg.comparison;
    let mut warnings = Vec::new();
    let mut comparisons = Vec::new();
    let rk4 = oracle::integrate_master_equation(&model, ec.dt, &steps, cc.rk4_refine)?;
    let oracle_loss = oracle::positivity_scan(&rk4, cc.positivity_tol)?;
    let floor = 5.0 / (ec.ensemble_size as f64).sqrt();
    let ensemble_loss = oracle::positivity_scan(&series, floor)?;
    if let Some(t) = oracle_loss {
        warnings.push(format!(
            "master-equation solution loses positivity at t = {t}; ensemble comparisons stop there"
        ));
    }
    if let Some((t, ml)) = &diag.first_memory_loss {
        warnings.push(format!(
            "memory loss at t = {t}: channel {} is negative but the source of entry {} is empty",
            ml.channel, ml.target
        ));
    }
    if diag.saturated_steps > 0 {
        warnings.push(format!(
            "{} steps had reverse-jump probabilities summing past one (rescaled)",
            diag.saturated_steps
        ));
    }
    let stat_tol = cc.statistical_tol(ec.ensemble_size);
    let upto = |s: &TrajectorySeries| s.times.last().copied().unwrap_or(0.0);
    if cc.analytic {
        let analytic = oracle::analytic_series(&model, ec.dt, &steps)?;
        let (a, b) = (truncate(&series, oracle_loss), truncate(&analytic, oracle_loss));
        comparisons.push(NamedComparison {
            name: "ensemble_vs_analytic".into(),
            compared_until: upto(&a),
            report: compare_series(&a, &b, stat_tol)?,
        });
        comparisons.push(NamedComparison {
            name: "analytic_vs_rk4".into(),
            compared_until: upto(&analytic),
            report: compare_series(&analytic, &rk4, cc.oracle_tol)?,
        });
    }
    if cc.rk4 {
        let (a, b) = (truncate(&series, oracle_loss), truncate(&rk4, oracle_loss));
        comparisons.push(NamedComparison {
            name: "ensemble_vs_rk4".into(),
            compared_until: upto(&a),
            report: compare_series(&a, &b, stat_tol)?,
        });
    }

    let last = snaps.last().expect("at least the initial snapshot");
    let summary = Summary {
        model: model.kind.to_string(),
        ensemble_size: ec.ensemble_size,
        dt: ec.dt,
        t_max: ec.t_max,
        seed: ec.rng_seed,
        steps: ec.steps(),
        final_time: last.time,
        final_rho: matrix_rows(&last.rho),
        n_eff: snaps.iter().map(|s| (s.time, s.n_eff)).collect(),
        max_n_eff: diag.max_n_eff,
        registry_entries_created: last.counts.len(),
        jump_events: events.len(),
        saturated_steps: diag.saturated_steps,
        positivity: PositivitySummary {
            oracle_loss_time: oracle_loss,
            ensemble_loss_time: ensemble_loss,
            memory_loss_time: diag.first_memory_loss.as_ref().map(|(t, _)| *t),
            memory_loss: diag.first_memory_loss.as_ref().map(|(_, m)| m.clone()),
        },
        pass: comparisons.iter().all(|c| c.report.pass),
        comparisons,
        warnings,
        runtime_seconds: started.elapsed().as_secs_f64(),
    };
    Ok(ScenarioOutcome { summary, series, events, files: Vec::new() })
}

/// [`execute`] and write the configured artifacts.
pub fn run_scenario(cfg: &RunConfig) -> Result<ScenarioOutcome> {
    let mut outcome = execute(cfg)?;
    let out = &cfg.outputs;
    fs::create_dir_all(&out.directory)?;
    let path = |ext: &str| out.directory.join(format!("{}{ext}", out.prefix));
    if out.formats.contains(&OutputFormat::Csv) {
        let p = path(".csv");
        outcome.series.write_csv(BufWriter::new(File::create(&p)?))?;
        outcome.files.push(p);
    }
    if out.formats.contains(&OutputFormat::Json) {
        let p = path(".summary.json");
        let mut w = BufWriter::new(File::create(&p)?);
        serde_json::to_writer_pretty(&mut w, &outcome.summary).map_err(std::io::Error::from)?;
        writeln!(w)?;
        w.flush()?;
        outcome.files.push(p);

        let p = path(".events.ndjson");
        let mut w = BufWriter::new(File::create(&p)?);
        for ev in &outcome.events {
            serde_json::to_writer(&mut w, ev).map_err(std::io::Error::from)?;
            writeln!(w)?;
        }
        w.flush()?;
        outcome.files.push(p);
    }
    Ok(outcome)
}
