//! Mean-field approximation harness.
//!
//! The mean-field consensus `v_alpha(rho_t)` is replaced by the consensus
//! trajectory of one large reference run. For each replication seed an
//! interacting system and a surrogate system (every particle driven by the
//! frozen reference trajectory) start from the same initial ensemble and
//! consume the same Brownian increments; their particle-wise squared gap is
//! tracked over time.

use rayon::prelude::*;

use crate::engine::{
    advance, consensus_energy, consensus_from_energies, energies, sample_initial, CboParams, HVariant,
    InitDistribution, NoiseTap,
};
use crate::ensemble::{dist_sq, Ensemble};
use crate::error::{Error, Result};
use crate::metrics::{least_squares_slope, moment4_stat};
use crate::objectives::ObjectiveSpec;

/// Consensus trajectory of a large run plus its moment statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceRun {
    /// `v_alpha` at steps `0..=K`.
    pub trajectory: Vec<Vec<f64>>,
    /// `sup_t (1/N) sum_i |V^i_t|^4`.
    pub sup_moment4: f64,
}

/// Runs `p` (with `p.n_particles` the reference size) and records the
/// consensus point at every step.
pub fn reference_run(dist: &InitDistribution, obj: &ObjectiveSpec, p: &CboParams) -> Result<ReferenceRun> {
    p.validate()?;
    let mut ens = sample_initial(dist, p.n_particles, p.dim, p.seed)?;
    let mut trajectory = Vec::with_capacity(p.steps + 1);
    let mut sup_moment4: f64 = 0.0;
    for k in 0..=p.steps {
        let e = energies(&ens, obj)?;
        let c = consensus_from_energies(&ens, &e, p.alpha);
        sup_moment4 = sup_moment4.max(moment4_stat(&ens, None)?);
        if k < p.steps {
            let e_c = consensus_energy(obj, p, &c)?;
            ens = advance(&ens, Some(&e), &c, e_c, p, k, None)?;
        }
        trajectory.push(c);
    }
    Ok(ReferenceRun {
        trajectory,
        sup_moment4,
    })
}

pub fn reference_consensus_trajectory(
    dist: &InitDistribution,
    obj: &ObjectiveSpec,
    p: &CboParams,
) -> Result<Vec<Vec<f64>>> {
    reference_run(dist, obj, p).map(|r| r.trajectory)
}

/// Outcome of one replication of the coupled pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Replication {
    pub seed: u64,
    /// Per particle, `sup_t |V^i_t - Vbar^i_t|^2`.
    pub sup_sq_gap: Vec<f64>,
    /// `sup_t (1/N) sum_i max(|V^i_t|^4, |Vbar^i_t|^4)`.
    pub sup_moment4: f64,
}

/// Aggregated coupling errors at one particle count.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingRun {
    pub n: usize,
    pub n_ref: usize,
    pub seeds: Vec<u64>,
    /// `max_i` of the seed-averaged `sup_t |V^i_t - Vbar^i_t|^2`.
    pub err_sup: f64,
    /// Same, over replications whose moment statistic stays `<= m_threshold`;
    /// `None` if every replication exceeds it.
    pub err_sup_conditional: Option<f64>,
    pub m_threshold: f64,
    pub exceed_fraction: f64,
    pub replications: Vec<Replication>,
}

fn validate_traj(ref_traj: &[Vec<f64>], p: &CboParams) -> Result<()> {
    if ref_traj.len() != p.steps + 1 {
        return Err(Error::InvalidInput(format!(
            "reference trajectory has {} points, expected steps + 1 = {}",
            ref_traj.len(),
            p.steps + 1
        )));
    }
    if ref_traj.iter().any(|c| c.len() != p.dim) {
        return Err(Error::InvalidDimension(
            "reference trajectory has the wrong dimension".into(),
        ));
    }
    Ok(())
}

/// Runs one coupled pair. `tap_a`/`tap_b` observe the increments each system
/// consumes.
pub fn coupled_replication(
    dist: &InitDistribution,
    obj: &ObjectiveSpec,
    p: &CboParams,
    ref_traj: &[Vec<f64>],
    tap_a: Option<NoiseTap<'_>>,
    tap_b: Option<NoiseTap<'_>>,
) -> Result<Replication> {
    p.validate()?;
    validate_traj(ref_traj, p)?;
    let mut a = sample_initial(dist, p.n_particles, p.dim, p.seed)?;
    let mut b = a.clone();
    let mut sup_sq_gap = vec![0.0; p.n_particles];
    let mut sup_moment4: f64 = 0.0;
    let track = |a: &Ensemble, b: &Ensemble, gaps: &mut [f64]| {
        for ((g, ra), rb) in gaps.iter_mut().zip(a.rows()).zip(b.rows()) {
            *g = g.max(dist_sq(ra, rb));
        }
    };
    for (k, cb) in ref_traj.iter().enumerate() {
        track(&a, &b, &mut sup_sq_gap);
        sup_moment4 = sup_moment4.max(moment4_stat(&a, Some(&b))?);
        if k == p.steps {
            break;
        }
        let ea = energies(&a, obj)?;
        let ca = consensus_from_energies(&a, &ea, p.alpha);
        let eca = consensus_energy(obj, p, &ca)?;
        let a_next = advance(&a, Some(&ea), &ca, eca, p, k, tap_a)?;

        let ecb = consensus_energy(obj, p, cb)?;
        let eb = match p.h_variant {
            HVariant::ConstOne => None,
            _ => Some(energies(&b, obj)?),
        };
        let b_next = advance(&b, eb.as_deref(), cb, ecb, p, k, tap_b)?;
        a = a_next;
        b = b_next;
    }
    Ok(Replication {
        seed: p.seed,
        sup_sq_gap,
        sup_moment4,
    })
}

/// Aggregates replications into a [`CouplingRun`].
pub fn aggregate(n: usize, n_ref: usize, m_threshold: f64, replications: Vec<Replication>) -> Result<CouplingRun> {
    if replications.is_empty() {
        return Err(Error::InvalidInput("no replications".into()));
    }
    let max_of_means = |reps: &[&Replication]| -> Option<f64> {
        if reps.is_empty() {
            return None;
        }
        let k = reps.len() as f64;
        (0..n)
            .map(|i| reps.iter().map(|r| r.sup_sq_gap[i]).sum::<f64>() / k)
            .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.max(x))))
    };
    let all: Vec<&Replication> = replications.iter().collect();
    let kept: Vec<&Replication> = replications.iter().filter(|r| r.sup_moment4 <= m_threshold).collect();
    let err_sup = max_of_means(&all).unwrap_or(0.0);
    let err_sup_conditional = max_of_means(&kept);
    let exceed_fraction = 1.0 - kept.len() as f64 / replications.len() as f64;
    Ok(CouplingRun {
        n,
        n_ref,
        seeds: replications.iter().map(|r| r.seed).collect(),
        err_sup,
        err_sup_conditional,
        m_threshold,
        exceed_fraction,
        replications,
    })
}

/// Coupled pairs for every seed (run in parallel), aggregated.
pub fn coupled_error(
    dist: &InitDistribution,
    obj: &ObjectiveSpec,
    p: &CboParams,
    ref_traj: &[Vec<f64>],
    seeds: &[u64],
    n_ref: usize,
    m_threshold: f64,
) -> Result<CouplingRun> {
    if seeds.is_empty() {
        return Err(Error::InvalidInput("need at least one seed".into()));
    }
    validate_traj(ref_traj, p)?;
    let reps: Vec<Replication> = seeds
        .par_iter()
        .map(|&s| {
            let ps = CboParams { seed: s, ..p.clone() };
            coupled_replication(dist, obj, &ps, ref_traj, None, None)
        })
        .collect::<Result<_>>()?;
    aggregate(p.n_particles, n_ref, m_threshold, reps)
}

/// Least-squares slope of `ln err` against `ln n`.
pub fn fit_loglog_slope(ns: &[usize], errs: &[f64]) -> Result<f64> {
    if ns.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "slope fit needs >= 3 particle counts, got {}",
            ns.len()
        )));
    }
    if let Some(e) = errs.iter().find(|e| !(**e > 0.0)) {
        return Err(Error::InvalidInput(format!(
            "log-log fit needs positive errors, got {e}"
        )));
    }
    let x: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
    let y: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    least_squares_slope(&x, &y)
}

/// Settings of a sweep over particle counts.
#[derive(Debug, Clone)]
pub struct MfaConfig {
    pub dist: InitDistribution,
    /// Template parameters; `n_particles` and `seed` are overridden.
    pub params: CboParams,
    pub n_values: Vec<usize>,
    pub n_ref: usize,
    pub ref_seed: u64,
    pub seeds: Vec<u64>,
    /// `M` for the bounded-moment event; defaults to ten times the reference
    /// run's moment statistic.
    pub m_threshold: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct MfaSweep {
    pub runs: Vec<CouplingRun>,
    pub slope: f64,
    pub m_threshold: f64,
    pub reference: ReferenceRun,
}

pub fn mfa_sweep(cfg: &MfaConfig, obj: &ObjectiveSpec) -> Result<MfaSweep> {
    if cfg.n_values.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "sweep needs >= 3 particle counts, got {}",
            cfg.n_values.len()
        )));
    }
    let max_n = *cfg.n_values.iter().max().expect("non-empty");
    if cfg.n_ref < 10 * max_n {
        return Err(Error::InvalidConfig(format!(
            "n_ref = {} must be at least 10 x max N = {}",
            cfg.n_ref,
            10 * max_n
        )));
    }
    let ref_params = CboParams {
        n_particles: cfg.n_ref,
        seed: cfg.ref_seed,
        ..cfg.params.clone()
    };
    let reference = reference_run(&cfg.dist, obj, &ref_params)?;
    let m_threshold = cfg.m_threshold.unwrap_or(10.0 * reference.sup_moment4);
    let runs = cfg
        .n_values
        .iter()
        .map(|&n| {
            let p = CboParams {
                n_particles: n,
                ..cfg.params.clone()
            };
            coupled_error(
                &cfg.dist,
                obj,
                &p,
                &reference.trajectory,
                &cfg.seeds,
                cfg.n_ref,
                m_threshold,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let errs: Vec<f64> = runs.iter().map(|r| r.err_sup).collect();
    let slope = fit_loglog_slope(&cfg.n_values, &errs)?;
    Ok(MfaSweep {
        runs,
        slope,
        m_threshold,
        reference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::quadratic;
    use std::sync::Mutex;

    fn base(n: usize) -> CboParams {
        CboParams {
            lambda: 1.0,
            sigma: 0.5,
            alpha: 5.0,
            dt: 0.01,
            steps: 20,
            n_particles: n,
            dim: 1,
            h_variant: HVariant::ConstOne,
            seed: 11,
        }
    }

    fn dist() -> InitDistribution {
        InitDistribution::GaussianIsotropic {
            mean: vec![1.0],
            variance: 1.0,
        }
    }

    #[test]
    fn frozen_dynamics_give_constant_trajectory() {
        let obj = quadratic(1, &[0.0]).unwrap();
        let p = CboParams {
            lambda: 0.0,
            sigma: 0.0,
            ..base(200)
        };
        let traj = reference_consensus_trajectory(&dist(), &obj, &p).unwrap();
        assert_eq!(traj.len(), 21);
        assert!(traj.iter().all(|c| c == &traj[0]));
        let again = reference_consensus_trajectory(&dist(), &obj, &p).unwrap();
        assert_eq!(traj, again);

        let run = coupled_error(&dist(), &obj, &base(50), &traj, &[1, 2], 200, 1e9);
        assert!(run.is_ok());
        let p0 = CboParams {
            lambda: 0.0,
            sigma: 0.0,
            ..base(50)
        };
        let run = coupled_error(&dist(), &obj, &p0, &traj, &[1, 2, 3], 200, 1e9).unwrap();
        assert_eq!(run.err_sup, 0.0);
    }

    #[test]
    fn deterministic_contraction_toward_argmin() {
        let obj = quadratic(1, &[0.0]).unwrap();
        let p = CboParams {
            sigma: 0.0,
            alpha: 1e15,
            steps: 200,
            ..base(300)
        };
        let init = sample_initial(&dist(), 300, 1, p.seed).unwrap();
        let best = init
            .rows()
            .map(|r| r[0])
            .min_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap();
        let traj = reference_consensus_trajectory(&dist(), &obj, &p).unwrap();
        assert_eq!(traj[0][0], best);
        for w in traj.windows(2) {
            assert!(w[1][0].abs() <= w[0][0].abs());
        }
    }

    #[test]
    fn self_coupling_is_exact() {
        let obj = quadratic(1, &[0.0]).unwrap();
        let p = base(400);
        let traj = reference_consensus_trajectory(&dist(), &obj, &p).unwrap();
        let run = coupled_error(&dist(), &obj, &p, &traj, &[p.seed], 400, 1e9).unwrap();
        assert_eq!(run.err_sup, 0.0);
    }

    #[test]
    fn increments_are_shared_bitwise() {
        let obj = quadratic(1, &[0.0]).unwrap();
        let p = CboParams { steps: 2, ..base(30) };
        let traj = reference_consensus_trajectory(
            &dist(),
            &obj,
            &CboParams {
                n_particles: 500,
                ..p.clone()
            },
        )
        .unwrap();
        let log_a = Mutex::new(Vec::new());
        let log_b = Mutex::new(Vec::new());
        let tap_a = |k: usize, i: usize, inc: &[f64]| {
            log_a
                .lock()
                .unwrap()
                .push((k, i, inc.iter().map(|x| x.to_bits()).collect::<Vec<_>>()))
        };
        let tap_b = |k: usize, i: usize, inc: &[f64]| {
            log_b
                .lock()
                .unwrap()
                .push((k, i, inc.iter().map(|x| x.to_bits()).collect::<Vec<_>>()))
        };
        coupled_replication(&dist(), &obj, &p, &traj, Some(&tap_a), Some(&tap_b)).unwrap();
        let mut a = log_a.into_inner().unwrap();
        let mut b = log_b.into_inner().unwrap();
        a.sort();
        b.sort();
        assert_eq!(a.len(), 2 * 30);
        assert_eq!(a, b);
    }

    #[test]
    fn conditioning_counts_exceeding_replications() {
        let mk = |seed, gap: f64, m4| Replication {
            seed,
            sup_sq_gap: vec![gap, gap / 2.0],
            sup_moment4: m4,
        };
        let reps = vec![mk(1, 1.0, 5.0), mk(2, 3.0, 50.0), mk(3, 2.0, 10.0)];
        let run = aggregate(2, 100, 10.0, reps).unwrap();
        assert_eq!(run.err_sup, 2.0);
        assert_eq!(run.err_sup_conditional, Some(1.5));
        assert!((run.exceed_fraction - 1.0 / 3.0).abs() < 1e-15);
        let all_out = aggregate(2, 100, 1.0, vec![mk(1, 1.0, 5.0)]).unwrap();
        assert_eq!(all_out.err_sup_conditional, None);
        assert_eq!(all_out.exceed_fraction, 1.0);
    }

    #[test]
    fn loglog_slope_on_exact_data() {
        let ns = [50, 100, 200, 400, 800];
        let errs: Vec<f64> = ns.iter().map(|&n| 3.7 / n as f64).collect();
        assert!((fit_loglog_slope(&ns, &errs).unwrap() + 1.0).abs() < 1e-9);
        assert!(fit_loglog_slope(&ns[..1], &errs[..1]).is_err());
    }

    #[test]
    fn sweep_preconditions() {
        let obj = quadratic(1, &[0.0]).unwrap();
        let cfg = MfaConfig {
            dist: dist(),
            params: base(1),
            n_values: vec![50],
            n_ref: 10_000,
            ref_seed: 0,
            seeds: vec![1],
            m_threshold: None,
        };
        assert!(mfa_sweep(&cfg, &obj).is_err());
        let cfg = MfaConfig {
            n_values: vec![50, 100, 200],
            n_ref: 1000,
            ..cfg
        };
        assert!(mfa_sweep(&cfg, &obj).is_err());
    }

    #[test]
    fn small_sweep_reports_ranges() {
        let obj = quadratic(1, &[0.0]).unwrap();
        let cfg = MfaConfig {
            dist: dist(),
            params: base(1),
            n_values: vec![20, 40, 80],
            n_ref: 2000,
            ref_seed: 0,
            seeds: (1..=4).collect(),
            m_threshold: None,
        };
        let sweep = mfa_sweep(&cfg, &obj).unwrap();
        assert_eq!(sweep.runs.len(), 3);
        assert!(sweep.slope.is_finite());
        for r in &sweep.runs {
            assert!((0.0..=1.0).contains(&r.exceed_fraction));
            assert_eq!(r.seeds.len(), 4);
        }
    }
}
