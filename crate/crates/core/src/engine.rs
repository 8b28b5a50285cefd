//! CBO particle dynamics: parameters, initial sampling, the stabilized
//! consensus point, one explicit Euler-Maruyama step and the simulation loop.

use rand_distr::{Distribution, StandardNormal, Uniform};
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use thiserror::Error as ThisError;

use crate::ensemble::{dist_sq, Ensemble};
use crate::error::{Error, Result};
use crate::metrics::{MetricsRecord, MetricsSeries};
use crate::noise::{brownian_increment, substream, DOMAIN_INIT};
use crate::objectives::ObjectiveSpec;

/// Below this many particles the per-particle work is done on the calling
/// thread.
const PAR_THRESHOLD: usize = 2048;

/// The drift cutoff `H`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HVariant {
    ConstOne,
    /// `1` on `[0, inf)`, linear ramp `max(0, 1 + x/delta)` below.
    RampHeaviside {
        delta: f64,
    },
}

impl HVariant {
    #[inline]
    pub fn eval(self, x: f64) -> f64 {
        match self {
            HVariant::ConstOne => 1.0,
            HVariant::RampHeaviside { delta } => {
                if x >= 0.0 {
                    1.0
                } else {
                    (1.0 + x / delta).max(0.0)
                }
            }
        }
    }
}

pub fn h_eval(variant: HVariant, x: f64) -> f64 {
    variant.eval(x)
}

/// Scalars of the scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct CboParams {
    pub lambda: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub dt: f64,
    pub steps: usize,
    pub n_particles: usize,
    pub dim: usize,
    pub h_variant: HVariant,
    pub seed: u64,
}

impl CboParams {
    /// `2 lambda > d sigma^2`.
    pub fn contractive(&self) -> bool {
        2.0 * self.lambda > self.dim as f64 * self.sigma * self.sigma
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.to_string()));
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be finite and >= 0");
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad("sigma must be finite and >= 0");
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be finite and > 0");
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt must be finite and > 0");
        }
        if self.n_particles == 0 {
            return bad("n_particles must be >= 1");
        }
        if self.dim == 0 {
            return bad("dim must be >= 1");
        }
        if let HVariant::RampHeaviside { delta } = self.h_variant {
            if !(delta > 0.0 && delta.is_finite()) {
                return bad("ramp width delta must be > 0");
            }
        }
        Ok(())
    }
}

/// Initial law `rho_0`.
#[derive(Debug, Clone, PartialEq)]
pub enum InitDistribution {
    /// `N(mean, variance * I_d)`.
    GaussianIsotropic {
        mean: Vec<f64>,
        variance: f64,
    },
    UniformBox {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
}

impl InitDistribution {
    pub fn validate(&self, dim: usize) -> Result<()> {
        match self {
            InitDistribution::GaussianIsotropic { mean, variance } => {
                if mean.len() != dim {
                    return Err(Error::InvalidConfig(format!(
                        "gaussian mean has length {}, expected {dim}",
                        mean.len()
                    )));
                }
                if !(*variance > 0.0 && variance.is_finite()) {
                    return Err(Error::InvalidConfig("gaussian variance must be > 0".into()));
                }
                if mean.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidConfig("gaussian mean must be finite".into()));
                }
            }
            InitDistribution::UniformBox { lo, hi } => {
                if lo.len() != dim || hi.len() != dim {
                    return Err(Error::InvalidConfig(format!(
                        "box bounds have lengths {}/{}, expected {dim}",
                        lo.len(),
                        hi.len()
                    )));
                }
                if lo
                    .iter()
                    .zip(hi)
                    .any(|(a, b)| !(a < b) || !a.is_finite() || !b.is_finite())
                {
                    return Err(Error::InvalidConfig("box needs finite lo < hi componentwise".into()));
                }
            }
        }
        Ok(())
    }
}

/// `n` i.i.d. draws from `dist`. Particle `i` draws from its own substream,
/// so the first `m` rows of an `n`-sample equal the `m`-sample.
pub fn sample_initial(dist: &InitDistribution, n: usize, dim: usize, seed: u64) -> Result<Ensemble> {
    if n == 0 || dim == 0 {
        return Err(Error::InvalidConfig(format!(
            "need n >= 1 and dim >= 1, got {n}, {dim}"
        )));
    }
    dist.validate(dim)?;
    let mut flat = vec![0.0; n * dim];
    let fill = |(i, row): (usize, &mut [f64])| {
        let mut rng = substream(seed, DOMAIN_INIT, i as u64, 0);
        match dist {
            InitDistribution::GaussianIsotropic { mean, variance } => {
                let sd = variance.sqrt();
                for (x, m) in row.iter_mut().zip(mean) {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *x = m + sd * z;
                }
            }
            InitDistribution::UniformBox { lo, hi } => {
                for ((x, a), b) in row.iter_mut().zip(lo).zip(hi) {
                    *x = Uniform::new(*a, *b).expect("validated bounds").sample(&mut rng);
                }
            }
        }
    };
    if n >= PAR_THRESHOLD {
        flat.par_chunks_mut(dim).enumerate().for_each(fill);
    } else {
        flat.chunks_mut(dim).enumerate().for_each(fill);
    }
    Ensemble::from_flat(n, dim, flat, 0.0)
}

/// `E(V^i)` for every particle, failing on the first non-finite value.
pub fn energies(ens: &Ensemble, obj: &ObjectiveSpec) -> Result<Vec<f64>> {
    if obj.dim() != ens.dim() {
        return Err(Error::InvalidDimension(format!(
            "objective has dim {}, ensemble has dim {}",
            obj.dim(),
            ens.dim()
        )));
    }
    let e: Vec<f64> = if ens.len() >= PAR_THRESHOLD {
        ens.as_flat().par_chunks_exact(ens.dim()).map(|r| obj.eval(r)).collect()
    } else {
        ens.rows().map(|r| obj.eval(r)).collect()
    };
    if let Some((particle, &value)) = e.iter().enumerate().find(|(_, x)| !x.is_finite()) {
        return Err(Error::NumericDomain { particle, value });
    }
    Ok(e)
}

/// Consensus point from precomputed energies, with weights shifted by the
/// ensemble minimum: `w_i = exp(-alpha (E_i - min_j E_j))`.
pub fn consensus_from_energies(ens: &Ensemble, energies: &[f64], alpha: f64) -> Vec<f64> {
    debug_assert_eq!(ens.len(), energies.len());
    let e_min = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let mut num = vec![0.0; ens.dim()];
    let mut den = 0.0;
    for (row, &e) in ens.rows().zip(energies) {
        let w = (-alpha * (e - e_min)).exp();
        if w == 0.0 {
            continue;
        }
        den += w;
        for (acc, x) in num.iter_mut().zip(row) {
            *acc += w * x;
        }
    }
    // den >= 1: the minimizing particle has weight exactly 1.
    num.iter_mut().for_each(|x| *x /= den);
    num
}

/// Softmax-weighted mean `v_alpha` of the ensemble.
pub fn consensus_point(ens: &Ensemble, obj: &ObjectiveSpec, alpha: f64) -> Result<Vec<f64>> {
    let e = energies(ens, obj)?;
    Ok(consensus_from_energies(ens, &e, alpha))
}

/// Observes `(step, particle, increment)` for every Brownian draw.
pub(crate) type NoiseTap<'a> = &'a (dyn Fn(usize, usize, &[f64]) + Sync);

/// Drift and diffusion of every particle toward a frozen `consensus`.
/// `energies` is only consulted for an active cutoff.
pub(crate) fn advance(
    ens: &Ensemble,
    energies: Option<&[f64]>,
    consensus: &[f64],
    e_consensus: f64,
    p: &CboParams,
    step: usize,
    tap: Option<NoiseTap<'_>>,
) -> Result<Ensemble> {
    let dim = ens.dim();
    let mut next = ens.clone();
    let update = |buf: &mut Vec<f64>, (i, row): (usize, &mut [f64])| {
        let h = match (p.h_variant, energies) {
            (HVariant::ConstOne, _) => 1.0,
            (h, Some(e)) => h.eval(e[i] - e_consensus),
            (_, None) => unreachable!("active cutoff needs energies"),
        };
        let spread = dist_sq(row, consensus).sqrt();
        let drift = p.dt * p.lambda * h;
        let amp = p.sigma * spread;
        if amp != 0.0 || tap.is_some() {
            brownian_increment(p.seed, i, step, p.dt, buf);
            if let Some(f) = tap {
                f(step, i, buf);
            }
        } else {
            buf.iter_mut().for_each(|b| *b = 0.0);
        }
        for ((x, c), b) in row.iter_mut().zip(consensus).zip(buf.iter()) {
            *x += -drift * (*x - c) + amp * b;
        }
    };
    let flat = next.flat_mut();
    if ens.len() >= PAR_THRESHOLD {
        flat.par_chunks_mut(dim)
            .enumerate()
            .for_each_init(|| vec![0.0; dim], update);
    } else {
        let mut buf = vec![0.0; dim];
        flat.chunks_mut(dim).enumerate().for_each(|item| update(&mut buf, item));
    }
    if let Some(k) = next.as_flat().iter().position(|x| !x.is_finite()) {
        return Err(Error::Divergence {
            step,
            particle: k / dim,
        });
    }
    next.set_time(ens.time() + p.dt);
    Ok(next)
}

pub(crate) fn consensus_energy(obj: &ObjectiveSpec, p: &CboParams, consensus: &[f64]) -> Result<f64> {
    match p.h_variant {
        HVariant::ConstOne => Ok(0.0),
        HVariant::RampHeaviside { .. } => {
            let e = obj.eval(consensus);
            if e.is_finite() {
                Ok(e)
            } else {
                Err(Error::InvalidInput(format!(
                    "objective is not finite at the consensus point ({e})"
                )))
            }
        }
    }
}

fn check_dims(ens: &Ensemble, obj: &ObjectiveSpec, p: &CboParams) -> Result<()> {
    if ens.dim() != obj.dim() || p.dim != obj.dim() {
        return Err(Error::InvalidDimension(format!(
            "ensemble d = {}, objective d = {}, params d = {}",
            ens.dim(),
            obj.dim(),
            p.dim
        )));
    }
    Ok(())
}

/// One Euler-Maruyama step toward a given (frozen) consensus point.
pub fn euler_maruyama_step(
    ens: &Ensemble,
    obj: &ObjectiveSpec,
    p: &CboParams,
    consensus: &[f64],
    step: usize,
) -> Result<Ensemble> {
    check_dims(ens, obj, p)?;
    if consensus.len() != ens.dim() {
        return Err(Error::InvalidDimension("consensus point has the wrong length".into()));
    }
    let e_c = consensus_energy(obj, p, consensus)?;
    let e = match p.h_variant {
        HVariant::ConstOne => None,
        _ => Some(energies(ens, obj)?),
    };
    advance(ens, e.as_deref(), consensus, e_c, p, step, None)
}

/// One synchronous CBO step: the consensus point is computed once from the
/// input snapshot, then every particle moves independently. Brownian
/// increments are keyed by `(p.seed, particle, step)`.
pub fn cbo_step(ens: &Ensemble, obj: &ObjectiveSpec, p: &CboParams, step: usize) -> Result<Ensemble> {
    check_dims(ens, obj, p)?;
    let e = energies(ens, obj)?;
    let c = consensus_from_energies(ens, &e, p.alpha);
    let e_c = consensus_energy(obj, p, &c)?;
    advance(ens, Some(&e), &c, e_c, p, step, None)
}

/// Which steps to record and which ball radii to track.
#[derive(Debug, Clone, PartialEq)]
pub struct RecordingPlan {
    /// Record every `every`-th step, starting at step 0.
    pub every: usize,
    pub ball_radii: Vec<f64>,
}

impl Default for RecordingPlan {
    fn default() -> Self {
        Self {
            every: 1,
            ball_radii: vec![],
        }
    }
}

/// What an observer sees before each update (and once after the last).
pub struct StepView<'a> {
    pub step: usize,
    pub ensemble: &'a Ensemble,
    pub energies: &'a [f64],
    pub consensus: &'a [f64],
}

#[derive(Debug, Clone)]
pub struct SimulationResult {
    pub series: MetricsSeries,
    pub final_ensemble: Ensemble,
}

/// A failed run with everything recorded before the failure.
#[derive(Debug, Clone, ThisError)]
#[error("{source}")]
pub struct SimulationError {
    pub source: Error,
    pub partial: MetricsSeries,
}

fn config_digest(label: &str, obj: &ObjectiveSpec, p: &CboParams, plan: &RecordingPlan) -> String {
    let text = format!("{label}|{}|{}|{p:?}|{plan:?}", obj.name(), obj.dim());
    let digest = Sha256::digest(text.as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Samples `rho_0`, then runs [`simulate_from`].
pub fn simulate(
    dist: &InitDistribution,
    obj: &ObjectiveSpec,
    p: &CboParams,
    plan: &RecordingPlan,
) -> std::result::Result<SimulationResult, Box<SimulationError>> {
    let fail = |source| {
        Box::new(SimulationError {
            source,
            partial: MetricsSeries::default(),
        })
    };
    p.validate().map_err(fail)?;
    let initial = sample_initial(dist, p.n_particles, p.dim, p.seed).map_err(fail)?;
    let label = format!("{dist:?}");
    simulate_from(initial, obj, p, plan, &label, |_| {})
}

/// Runs `p.steps` CBO steps from `initial`, recording metrics per `plan` and
/// calling `observer` at every step `0..=K`.
pub fn simulate_from(
    initial: Ensemble,
    obj: &ObjectiveSpec,
    p: &CboParams,
    plan: &RecordingPlan,
    init_label: &str,
    mut observer: impl FnMut(StepView<'_>),
) -> std::result::Result<SimulationResult, Box<SimulationError>> {
    let mut series = MetricsSeries {
        config_digest: config_digest(init_label, obj, p, plan),
        ..Default::default()
    };
    macro_rules! bail {
        ($e:expr) => {
            return Err(Box::new(SimulationError {
                source: $e,
                partial: series,
            }))
        };
    }
    if let Err(e) = p.validate().and_then(|_| check_dims(&initial, obj, p)) {
        bail!(e);
    }
    if plan.every == 0 {
        bail!(Error::InvalidConfig("recording stride must be >= 1".into()));
    }
    if let Some(r) = plan.ball_radii.iter().find(|r| !(**r > 0.0)) {
        bail!(Error::InvalidConfig(format!("ball radius must be > 0, got {r}")));
    }
    let Some(vstar) = obj.minimizer().map(<[f64]>::to_vec) else {
        bail!(Error::InvalidConfig(format!(
            "objective '{}' has no known minimizer to measure against",
            obj.name()
        )));
    };

    let mut ens = initial;
    ens.set_time(0.0);
    for k in 0..=p.steps {
        let e = match energies(&ens, obj) {
            Ok(e) => e,
            Err(err) => bail!(err),
        };
        let c = consensus_from_energies(&ens, &e, p.alpha);
        observer(StepView {
            step: k,
            ensemble: &ens,
            energies: &e,
            consensus: &c,
        });
        if k % plan.every == 0 {
            series
                .records
                .push(MetricsRecord::measure(&ens, &vstar, &c, &plan.ball_radii));
        }
        if k == p.steps {
            break;
        }
        let next = consensus_energy(obj, p, &c).and_then(|e_c| advance(&ens, Some(&e), &c, e_c, p, k, None));
        match next {
            Ok(mut n) => {
                n.set_time((k + 1) as f64 * p.dt);
                ens = n;
            }
            Err(err) => bail!(err),
        }
    }
    series.endpoint_error = Some(dist_sq(&ens.mean(), &vstar));
    Ok(SimulationResult {
        series,
        final_ensemble: ens,
    })
}
