//! `cbo run`: one simulation from a config, written as `metrics.csv` plus
//! `summary.txt`.

use std::path::Path;

use cbo_core::engine::{simulate, CboParams};
use cbo_core::MetricsSeries;

use crate::config::{Preset, RunConfig};
use crate::output::{write_metrics_file, Summary};
use crate::{ensure_dir, presets, CliError};

/// Runs `cfg` (or its preset) and writes the outputs.
pub fn run_config(cfg: &RunConfig) -> Result<(), CliError> {
    match cfg.preset {
        None => run_simulation(cfg).map(|_| ()),
        Some(Preset::FigVariance) => {
            let opts = presets::FigVarianceOptions {
                seed: cfg.params.seed,
                ..Default::default()
            };
            presets::write_fig_variance(&cfg.outputs, &opts).map(|_| ())
        }
        Some(Preset::FigTrajectories) => {
            let opts = presets::FigTrajectoriesOptions {
                seed: cfg.params.seed,
                ..Default::default()
            };
            presets::write_fig_trajectories(&cfg.outputs, &opts).map(|_| ())
        }
        Some(Preset::MfaSweep) => presets::write_mfa_sweep(cfg).map(|_| ()),
        Some(Preset::LaplaceAudit) => presets::write_laplace_audit(cfg).map(|_| ()),
    }
}

/// Simulates `cfg` and writes `metrics.csv` and `summary.txt`. On divergence
/// the records gathered so far are still written before the error returns.
pub fn run_simulation(cfg: &RunConfig) -> Result<MetricsSeries, CliError> {
    let obj = cfg.objective_spec()?;
    let p = cfg.cbo_params();
    let plan = cfg.recording_plan();
    ensure_dir(&cfg.outputs)?;
    let metrics = cfg.outputs.join("metrics.csv");
    match simulate(&cfg.init_distribution(), &obj, &p, &plan) {
        Ok(res) => {
            write_metrics_file(&metrics, &res.series.records, &plan.ball_radii)?;
            let mut s = series_summary(&res.series, &p, obj.name());
            s.add("status", "ok");
            s.write(&cfg.outputs.join("summary.txt"))?;
            Ok(res.series)
        }
        Err(err) => {
            let err = *err;
            write_metrics_file(&metrics, &err.partial.records, &plan.ball_radii)?;
            let mut s = series_summary(&err.partial, &p, obj.name());
            s.add("status", format!("failed: {}", err.source));
            s.write(&cfg.outputs.join("summary.txt"))?;
            Err(err.source.into())
        }
    }
}

/// Key/value description of a finished (or partial) run.
pub fn series_summary(series: &MetricsSeries, p: &CboParams, objective: &str) -> Summary {
    let mut s = Summary::new();
    s.add("objective", objective)
        .add("dim", p.dim)
        .add("n_particles", p.n_particles)
        .add("steps", p.steps)
        .add("dt", p.dt)
        .add("lambda", p.lambda)
        .add("sigma", p.sigma)
        .add("alpha", p.alpha)
        .add("seed", p.seed)
        .add("config_digest", &series.config_digest)
        .add("records", series.records.len());
    if let Some(last) = series.records.last() {
        s.add("final_t", last.t)
            .add("final_v_func", last.v_func)
            .add("final_variance", last.variance);
    }
    s.add("endpoint_error", opt(series.endpoint_error));
    s.add("theoretical_rate", 2.0 * p.lambda - p.dim as f64 * p.sigma * p.sigma);
    match (series.pre_plateau_window(), series.fitted_v_decay_rate()) {
        (Some((a, b)), Ok(rate)) => {
            s.add("fit_window_start", a)
                .add("fit_window_end", b)
                .add("fitted_decay_rate", rate);
        }
        _ => {
            s.add("fitted_decay_rate", "unavailable");
        }
    }
    s
}

pub(crate) fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "unavailable".to_string(), |v| v.to_string())
}

/// Loads the config at `path` and runs it.
pub fn run_path(path: &Path) -> Result<(), CliError> {
    run_config(&RunConfig::load(path)?)
}
