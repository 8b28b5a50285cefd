//! Experiment presets: the 1-D variance study, the 2-D tracked-agent
//! trajectories, the mean-field sweep and the Laplace audit.

use std::path::Path;

use cbo_core::engine::{sample_initial, simulate, simulate_from, CboParams, HVariant, InitDistribution, RecordingPlan};
use cbo_core::mfa::{mfa_sweep, MfaSweep};
use cbo_core::objectives::rastrigin;
use cbo_core::theory::{laplace_audit, LaplaceAuditSummary};
use cbo_core::{MetricsSeries, ObjectiveSpec};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::output::{write_metrics_file, write_table, Summary};
use crate::run::{opt, series_summary};
use crate::{ensure_dir, CliError};

pub const FULL_VARIANCE_N: usize = 320_000;
pub const FIG_VARIANCE_MUS: [f64; 4] = [1.0, 2.0, 3.0, 4.0];

#[derive(Debug, Clone, PartialEq)]
pub struct FigVarianceOptions {
    /// Fraction of the full particle count.
    pub scale: f64,
    pub steps: usize,
    pub seed: u64,
    pub ball_radii: Vec<f64>,
}

impl Default for FigVarianceOptions {
    fn default() -> Self {
        Self {
            scale: 1.0 / 16.0,
            steps: 1000,
            seed: 1,
            ball_radii: vec![0.1],
        }
    }
}

/// Inputs of one `mu` run of the variance study.
pub struct Setup {
    pub dist: InitDistribution,
    pub objective: ObjectiveSpec,
    pub params: CboParams,
    pub plan: RecordingPlan,
}

pub fn fig_variance_setup(mu: f64, opts: &FigVarianceOptions) -> Result<Setup, CliError> {
    if !(opts.scale > 0.0 && opts.scale <= 1.0) {
        return Err(CliError::Config(format!(
            "scale must lie in (0, 1], got {}",
            opts.scale
        )));
    }
    let n = (FULL_VARIANCE_N as f64 * opts.scale).round().max(1.0) as usize;
    Ok(Setup {
        dist: InitDistribution::GaussianIsotropic {
            mean: vec![mu],
            variance: 0.8,
        },
        objective: rastrigin(1)?,
        params: CboParams {
            lambda: 1.0,
            sigma: 0.5,
            alpha: 1e15,
            dt: 0.01,
            steps: opts.steps,
            n_particles: n,
            dim: 1,
            h_variant: HVariant::ConstOne,
            seed: opts.seed,
        },
        plan: RecordingPlan {
            every: 1,
            ball_radii: opts.ball_radii.clone(),
        },
    })
}

#[derive(Debug, Clone)]
pub struct FigVarianceRun {
    pub mu: f64,
    pub params: CboParams,
    pub series: MetricsSeries,
    pub fitted_rate: Option<f64>,
    /// First recorded `t` in `(0, 0.5]` with variance above its initial value.
    pub variance_rise_t: Option<f64>,
}

pub fn variance_rise(series: &MetricsSeries, t_max: f64) -> Option<f64> {
    let v0 = series.records.first()?.variance;
    series
        .records
        .iter()
        .find(|r| r.t > 0.0 && r.t <= t_max && r.variance > v0)
        .map(|r| r.t)
}

pub fn fig_variance_run(mu: f64, opts: &FigVarianceOptions) -> Result<FigVarianceRun, CliError> {
    let s = fig_variance_setup(mu, opts)?;
    let res = simulate(&s.dist, &s.objective, &s.params, &s.plan).map_err(|e| CliError::from(e.source))?;
    Ok(FigVarianceRun {
        mu,
        params: s.params,
        fitted_rate: res.series.fitted_v_decay_rate().ok(),
        variance_rise_t: variance_rise(&res.series, 0.5),
        series: res.series,
    })
}

pub fn fig_variance(opts: &FigVarianceOptions) -> Result<Vec<FigVarianceRun>, CliError> {
    FIG_VARIANCE_MUS
        .par_iter()
        .map(|mu| fig_variance_run(*mu, opts))
        .collect()
}

/// Writes `mu_<k>/metrics.csv`, `mu_<k>/summary.txt` and an overall `summary.txt`.
pub fn write_fig_variance(dir: &Path, opts: &FigVarianceOptions) -> Result<Vec<FigVarianceRun>, CliError> {
    let runs = fig_variance(opts)?;
    ensure_dir(dir)?;
    let mut top = Summary::new();
    top.add("preset", "fig-variance")
        .add("scale", opts.scale)
        .add("steps", opts.steps)
        .add("seed", opts.seed)
        .add("theoretical_rate", 2.0 * 1.0 - 0.5 * 0.5);
    for r in &runs {
        let sub = dir.join(format!("mu_{}", r.mu));
        ensure_dir(&sub)?;
        write_metrics_file(&sub.join("metrics.csv"), &r.series.records, &opts.ball_radii)?;
        let mut s = series_summary(&r.series, &r.params, "rastrigin");
        s.add("mu", r.mu).add("variance_rise_t", opt(r.variance_rise_t));
        s.write(&sub.join("summary.txt"))?;
        top.add(format!("mu_{}_n_particles", r.mu), r.params.n_particles)
            .add(format!("mu_{}_fitted_decay_rate", r.mu), opt(r.fitted_rate))
            .add(format!("mu_{}_variance_rise_t", r.mu), opt(r.variance_rise_t));
    }
    top.write(&dir.join("summary.txt"))?;
    Ok(runs)
}

pub const TRACKED_AGENTS: [[f64; 2]; 3] = [[-2.0, 4.0], [-1.5, -1.5], [4.5, 1.5]];

#[derive(Debug, Clone, PartialEq)]
pub struct FigTrajectoriesOptions {
    pub runs: usize,
    /// Sampled agents per run; the tracked agents come on top.
    pub n: usize,
    pub steps: usize,
    pub seed: u64,
}

impl Default for FigTrajectoriesOptions {
    fn default() -> Self {
        Self {
            runs: 100,
            n: 4000,
            steps: 700,
            seed: 1,
        }
    }
}

impl FigTrajectoriesOptions {
    pub fn full() -> Self {
        Self {
            n: 32_000,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySet {
    pub times: Vec<f64>,
    /// `paths[run][agent][step]`.
    pub paths: Vec<Vec<Vec<[f64; 2]>>>,
}

impl TrajectorySet {
    /// `mean[agent][step]` over runs.
    pub fn mean_paths(&self) -> Vec<Vec<[f64; 2]>> {
        let runs = self.paths.len() as f64;
        (0..TRACKED_AGENTS.len())
            .map(|a| {
                (0..self.times.len())
                    .map(|k| {
                        let (x, y) = self
                            .paths
                            .iter()
                            .fold((0.0, 0.0), |(x, y), run| (x + run[a][k][0], y + run[a][k][1]));
                        [x / runs, y / runs]
                    })
                    .collect()
            })
            .collect()
    }
}

/// Largest distance of `path` from the line through `path[0]` and `target`,
/// relative to the length of that chord.
pub fn chord_deviation(path: &[[f64; 2]], target: [f64; 2]) -> f64 {
    let a = path[0];
    let (cx, cy) = (target[0] - a[0], target[1] - a[1]);
    let len = cx.hypot(cy);
    path.iter()
        .map(|p| ((p[0] - a[0]) * cy - (p[1] - a[1]) * cx).abs() / len)
        .fold(0.0, f64::max)
        / len
}

pub fn fig_trajectories(opts: &FigTrajectoriesOptions) -> Result<TrajectorySet, CliError> {
    if opts.runs < 2 {
        return Err(CliError::Config(format!(
            "fig-trajectories needs runs >= 2, got {}",
            opts.runs
        )));
    }
    let obj = rastrigin(2)?;
    let dist = InitDistribution::GaussianIsotropic {
        mean: vec![8.0, 8.0],
        variance: 20.0,
    };
    let tracked: Vec<Vec<f64>> = TRACKED_AGENTS.iter().map(|a| a.to_vec()).collect();
    let plan = RecordingPlan {
        every: opts.steps.max(1),
        ball_radii: Vec::new(),
    };
    let times: Vec<f64> = (0..=opts.steps).map(|k| k as f64 * 0.01).collect();
    let paths = (0..opts.runs)
        .into_par_iter()
        .map(|run| {
            let seed = opts.seed.wrapping_add(run as u64);
            let p = CboParams {
                lambda: 1.0,
                sigma: 0.1,
                alpha: 1e15,
                dt: 0.01,
                steps: opts.steps,
                n_particles: opts.n + tracked.len(),
                dim: 2,
                h_variant: HVariant::ConstOne,
                seed,
            };
            let mut ens = sample_initial(&dist, opts.n, 2, seed)?;
            ens.push_rows(&tracked)?;
            let mut path = vec![Vec::with_capacity(opts.steps + 1); tracked.len()];
            simulate_from(ens, &obj, &p, &plan, "fig-trajectories", |view| {
                for (a, out) in path.iter_mut().enumerate() {
                    let row = view.ensemble.row(opts.n + a);
                    out.push([row[0], row[1]]);
                }
            })
            .map_err(|e| CliError::from(e.source))?;
            Ok(path)
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(TrajectorySet { times, paths })
}

/// Writes `trajectories.csv`, `mean_trajectories.csv` and `summary.txt`.
pub fn write_fig_trajectories(dir: &Path, opts: &FigTrajectoriesOptions) -> Result<TrajectorySet, CliError> {
    let set = fig_trajectories(opts)?;
    ensure_dir(dir)?;
    let times = &set.times;
    let rows = set.paths.iter().enumerate().flat_map(|(run, agents)| {
        agents.iter().enumerate().flat_map(move |(a, path)| {
            path.iter().zip(times).map(move |(p, t)| {
                [
                    run.to_string(),
                    a.to_string(),
                    t.to_string(),
                    p[0].to_string(),
                    p[1].to_string(),
                ]
            })
        })
    });
    write_table(&dir.join("trajectories.csv"), &["run", "agent", "t", "x", "y"], rows)?;
    let mean = set.mean_paths();
    let rows = mean.iter().enumerate().flat_map(|(a, path)| {
        path.iter()
            .zip(times)
            .map(move |(p, t)| [a.to_string(), t.to_string(), p[0].to_string(), p[1].to_string()])
    });
    write_table(&dir.join("mean_trajectories.csv"), &["agent", "t", "x", "y"], rows)?;

    let mut s = Summary::new();
    s.add("preset", "fig-trajectories")
        .add("runs", opts.runs)
        .add("n", opts.n)
        .add("steps", opts.steps)
        .add("seed", opts.seed);
    for (a, path) in mean.iter().enumerate() {
        let end = path[path.len() - 1];
        s.add(format!("agent_{a}_chord_deviation"), chord_deviation(path, [0.0, 0.0]))
            .add(format!("agent_{a}_endpoint_dist"), end[0].hypot(end[1]));
    }
    s.write(&dir.join("summary.txt"))?;
    Ok(set)
}

/// Runs the sweep configured in `cfg.mfa`, writing `mfa.csv` and `summary.txt`.
pub fn write_mfa_sweep(cfg: &RunConfig) -> Result<MfaSweep, CliError> {
    let mcfg = cfg.mfa_config()?;
    let sweep = mfa_sweep(&mcfg, &cfg.objective_spec()?)?;
    ensure_dir(&cfg.outputs)?;
    let rows = sweep.runs.iter().map(|r| {
        [
            r.n.to_string(),
            r.err_sup.to_string(),
            r.err_sup_conditional.map_or_else(String::new, |e| e.to_string()),
            r.exceed_fraction.to_string(),
            r.seeds.len().to_string(),
        ]
    });
    write_table(
        &cfg.outputs.join("mfa.csv"),
        &["N", "err_sup", "err_sup_conditional", "exceed_fraction", "seeds"],
        rows,
    )?;
    let mut s = Summary::new();
    s.add("preset", "mfa-sweep")
        .add("n_ref", mcfg.n_ref)
        .add("ref_seed", mcfg.ref_seed)
        .add("m_threshold", sweep.m_threshold)
        .add("reference_sup_moment4", sweep.reference.sup_moment4)
        .add("slope", sweep.slope);
    s.write(&cfg.outputs.join("summary.txt"))?;
    Ok(sweep)
}

/// Runs the audit configured in `cfg.laplace_audit`, writing
/// `laplace_audit.csv` and `summary.txt`. Any violation is an error.
pub fn write_laplace_audit(cfg: &RunConfig) -> Result<LaplaceAuditSummary, CliError> {
    let audit = laplace_audit(&cfg.audit_config())?;
    ensure_dir(&cfg.outputs)?;
    let rows = audit.cases.iter().enumerate().map(|(i, c)| {
        [
            i.to_string(),
            c.n.to_string(),
            c.dim.to_string(),
            c.alpha.to_string(),
            c.radius.to_string(),
            c.consensus_dist.to_string(),
            c.best_bound.to_string(),
            c.violations.to_string(),
        ]
    });
    write_table(
        &cfg.outputs.join("laplace_audit.csv"),
        &[
            "measure",
            "n",
            "dim",
            "alpha",
            "radius",
            "consensus_dist",
            "best_bound",
            "violations",
        ],
        rows,
    )?;
    let mut s = Summary::new();
    s.add("preset", "laplace-audit")
        .add("measures", audit.cases.len())
        .add("checks", audit.checks)
        .add("violations", audit.violations)
        .add("tightness_min", audit.tightness.0)
        .add("tightness_median", audit.tightness.1)
        .add("tightness_max", audit.tightness.2);
    s.write(&cfg.outputs.join("summary.txt"))?;
    if audit.violations > 0 {
        return Err(CliError::Failed(format!(
            "Laplace audit found {} violations",
            audit.violations
        )));
    }
    Ok(audit)
}
