//! Closed-form quantities from the mean-field convergence analysis:
//! quantitative Laplace bound, the bump function `phi_r` and its derivatives,
//! the mass decay rate `q`, time horizon `T*`, the `alpha_0` heuristic, the
//! moment constants `b1`/`b2`, the classical well-preparedness conditions and
//! the right-hand side of the evolution inequality for `V`.

use crate::engine::CboParams;
use crate::ensemble::{dist_sq, Ensemble};
use crate::error::{Error, Result};
use crate::metrics::{ball_mass, variance};
use crate::objectives::ObjectiveSpec;

/// Smallest `c` in `(1/2, 1)` with `(2c - 1) c >= d (1 - c)^2`.
///
/// This is the root of `(2 - d) c^2 + (2d - 1) c - d`; the discriminant is
/// `4d + 1` for every `d`, and the cancellation-free form
/// `2d / (2d - 1 + sqrt(4d + 1))` also covers `d = 2`, where the quadratic
/// degenerates to a linear equation.
pub fn find_c(d: usize) -> f64 {
    assert!(d >= 1, "dimension must be >= 1");
    let d = d as f64;
    2.0 * d / (2.0 * d - 1.0 + (4.0 * d + 1.0).sqrt())
}

/// Rate `q` in the lower bound on the mass of `B_r(v*)`; `b_bound` bounds
/// the distance between the consensus point and `v*` over the horizon.
pub fn decay_rate_q(lambda: f64, sigma: f64, d: usize, c: f64, r: f64, b_bound: f64) -> Result<f64> {
    if !(c > 0.5 && c < 1.0) {
        return Err(Error::InvalidInput(format!("c must lie in (1/2, 1), got {c}")));
    }
    if !(r > 0.0) || !(b_bound >= 0.0) || lambda < 0.0 || sigma < 0.0 {
        return Err(Error::InvalidInput(format!(
            "need r > 0, B >= 0, lambda >= 0, sigma >= 0 (r = {r}, B = {b_bound})"
        )));
    }
    if sigma == 0.0 {
        return Err(Error::InfiniteRate);
    }
    let d = d as f64;
    let sc = c.sqrt();
    let one_c = 1.0 - c;
    let first = 2.0 * lambda * (sc * r + b_bound) * sc / (one_c * one_c * r)
        + 2.0 * sigma * sigma * (c * r * r + b_bound * b_bound) * (2.0 * c + d) / (one_c.powi(4) * r * r);
    let second = 4.0 * lambda * lambda / ((2.0 * c - 1.0) * sigma * sigma);
    Ok(first.max(second))
}

/// `phi_mass0 * exp(-q t)`.
pub fn mass_lower_bound(phi_mass0: f64, q: f64, t: f64) -> f64 {
    phi_mass0 * (-q * t).exp()
}

/// `exp(1 - r^2 / (r^2 - |v - v*|^2))` on the open ball, `0` elsewhere.
pub fn mollifier(v: &[f64], vstar: &[f64], r: f64) -> f64 {
    let r2 = r * r;
    let s = dist_sq(v, vstar);
    if s < r2 {
        (1.0 - r2 / (r2 - s)).exp()
    } else {
        0.0
    }
}

pub fn mollifier_grad(v: &[f64], vstar: &[f64], r: f64) -> Vec<f64> {
    let r2 = r * r;
    let s = dist_sq(v, vstar);
    if s >= r2 {
        return vec![0.0; v.len()];
    }
    let gap = r2 - s;
    let scale = -2.0 * r2 / (gap * gap) * mollifier(v, vstar, r);
    v.iter().zip(vstar).map(|(a, b)| scale * (a - b)).collect()
}

pub fn mollifier_laplacian(v: &[f64], vstar: &[f64], r: f64) -> f64 {
    let r2 = r * r;
    let s = dist_sq(v, vstar);
    if s >= r2 {
        return 0.0;
    }
    let gap = r2 - s;
    let d = v.len() as f64;
    let num = 2.0 * (2.0 * s - r2) * s - d * gap * gap;
    2.0 * r2 * num / gap.powi(4) * mollifier(v, vstar, r)
}

/// Empirical `integral phi_r d rho`.
pub fn mollified_mass(ens: &Ensemble, vstar: &[f64], r: f64) -> f64 {
    ens.rows().map(|row| mollifier(row, vstar, r)).sum::<f64>() / ens.len() as f64
}

/// Quantitative Laplace bound on `|v_alpha - v*|`:
/// `(q + E_r)^nu / eta + exp(-alpha q) / rho(B_r) * integral |v - v*| d rho`.
pub fn laplace_bound(first_moment: f64, mass_r: f64, alpha: f64, q: f64, e_r: f64, eta: f64, nu: f64) -> Result<f64> {
    if !(mass_r > 0.0) {
        return Err(Error::EmptyBall);
    }
    let tail = if first_moment == 0.0 {
        0.0
    } else {
        (-alpha * q).exp() * first_moment / mass_r
    };
    Ok((q + e_r).powf(nu) / eta + tail)
}

/// `T* = ln(V0 / eps) / ((1 - tau)(2 lambda - d sigma^2))`.
pub fn t_star(v0: f64, eps: f64, tau: f64, lambda: f64, sigma: f64, d: usize) -> Result<f64> {
    let d_sigma_sq = d as f64 * sigma * sigma;
    if !(2.0 * lambda > d_sigma_sq) {
        return Err(Error::NonContractive {
            two_lambda: 2.0 * lambda,
            d_sigma_sq,
        });
    }
    if !(eps > 0.0 && eps <= v0) {
        return Err(Error::InvalidAccuracy { eps, v0 });
    }
    if !(0.0..1.0).contains(&tau) {
        return Err(Error::InvalidInput(format!("tau must lie in [0, 1), got {tau}")));
    }
    Ok((v0 / eps).ln() / ((1.0 - tau) * (2.0 * lambda - d_sigma_sq)))
}

/// The constant `c` of the `alpha_0` heuristic:
/// `min{ tau (2l - d s^2) / (2 sqrt2 (l + d s^2)), sqrt(tau (2l - d s^2) / (d s^2)) }^2`.
pub fn alpha0_c(tau: f64, lambda: f64, sigma: f64, d: usize) -> f64 {
    let ds2 = d as f64 * sigma * sigma;
    let gap = 2.0 * lambda - ds2;
    let first = 0.5 * tau * gap / (2f64.sqrt() * (lambda + ds2));
    let second = if ds2 > 0.0 {
        (tau * gap / ds2).sqrt()
    } else {
        f64::INFINITY
    };
    first.min(second).powi(2)
}

/// Radius of the ball whose initial mass enters the `alpha_0` heuristic.
pub fn alpha0_radius(c: f64, eta: f64, eps: f64, l: f64) -> f64 {
    c * eta * eta * eps / (8.0 * l)
}

/// Heuristic lower bound for `alpha_0`, assuming the mass around `v*` is
/// smallest at `t = 0`:
/// `-8 ln( sqrt(c)/(2 sqrt2) * rho_0(B_{c eta^2 eps/(8L)}) ) / (c eta^2 eps)`.
pub fn alpha0_estimate(c: f64, eta: f64, eps: f64, l: f64, mass_fn: impl Fn(f64) -> f64) -> Result<f64> {
    let radius = alpha0_radius(c, eta, eps, l);
    let mass = mass_fn(radius);
    if !(mass > 0.0) {
        return Err(Error::UnsupportedInitialization { radius });
    }
    let arg = c.sqrt() / (2.0 * 2f64.sqrt()) * mass;
    Ok(-8.0 * arg.ln() / (c * eta * eta * eps))
}

/// Result of the classical well-preparedness conditions; margins are
/// `rhs - lhs` so a positive margin means the condition holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WellPreparedness {
    pub cond1: bool,
    pub margin1: f64,
    pub cond2: bool,
    pub margin2: f64,
    /// `Var(rho_0) <= 3/(8 alpha) (integral exp(-alpha (E - E_min)) d rho_0)^2`.
    pub concentration: bool,
    pub concentration_margin: f64,
}

/// `energies` is a sample of `E` under `rho_0`; the weight norm
/// `|omega_alpha|_{L1(rho_0)}` is its Monte-Carlo mean.
pub fn wellprep_check(
    alpha: f64,
    lambda: f64,
    sigma: f64,
    e_under: f64,
    energies: &[f64],
    var0: f64,
    d: usize,
) -> Result<WellPreparedness> {
    if energies.is_empty() {
        return Err(Error::InvalidInput("energy sample is empty".into()));
    }
    let n = energies.len() as f64;
    let s2 = sigma * sigma;
    let d = d as f64;

    let lhs1 = if e_under == 0.0 {
        2.0 * alpha * (s2 + 2.0 * lambda)
    } else {
        2.0 * alpha * (-2.0 * alpha * e_under).exp() * (s2 + 2.0 * lambda)
    };
    let margin1 = 0.75 - lhs1;

    let w_norm = energies.iter().map(|e| (-alpha * e).exp()).sum::<f64>() / n;
    let lhs2 = 2.0 * lambda * w_norm * w_norm - var0 - 2.0 * d * s2 * w_norm * (-alpha * e_under).exp();
    let shifted = energies.iter().map(|e| (-alpha * (e - e_under)).exp()).sum::<f64>() / n;
    let conc_rhs = 3.0 / (8.0 * alpha) * shifted * shifted;

    Ok(WellPreparedness {
        cond1: lhs1 < 0.75,
        margin1,
        cond2: lhs2 >= 0.0,
        margin2: lhs2,
        concentration: var0 <= conc_rhs,
        concentration_margin: conc_rhs - var0,
    })
}

/// Constants of the growth assumption that enter the cutoff term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffTerms {
    pub eta: f64,
    pub nu: f64,
    pub l_e: f64,
    pub gamma: f64,
}

/// Upper bound on `dV/dt`:
/// `-(2l - d s^2) V + sqrt2 (l + d s^2) sqrt(V) D + (d s^2 / 2) D^2`, plus
/// `(l / eta^2) (L_E (1 + D^gamma) D)^(2 nu)` when the cutoff is active.
pub fn evolution_rhs(v: f64, cons_dist: f64, lambda: f64, sigma: f64, d: usize, h_active: Option<CutoffTerms>) -> f64 {
    let ds2 = d as f64 * sigma * sigma;
    let dd = cons_dist;
    let mut rhs = -(2.0 * lambda - ds2) * v + 2f64.sqrt() * (lambda + ds2) * v.sqrt() * dd + 0.5 * ds2 * dd * dd;
    if let Some(k) = h_active {
        let growth = k.l_e * (1.0 + dd.powf(k.gamma)) * dd;
        rhs += lambda / (k.eta * k.eta) * growth.powf(2.0 * k.nu);
    }
    rhs
}

/// `(b1, b2)` bounding `|v_alpha|^2 <= b1 + b2 integral |v|^2`.
/// `bounded = Some((sup E, inf E))` selects the bounded-objective case.
pub fn b_constants(alpha: f64, c2: f64, c3: f64, c4: f64, bounded: Option<(f64, f64)>) -> (f64, f64) {
    match bounded {
        Some((e_sup, e_under)) => (0.0, (alpha * (e_sup - e_under)).exp()),
        None => {
            let b2 = 2.0 * c2 / c3 * (1.0 + 1.0 / (alpha * c3 * c4 * c4));
            (c4 * c4 + b2, b2)
        }
    }
}

/// `q` is finite only for `sigma > 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rate {
    Finite(f64),
    Infinite,
}

/// Inputs to [`TheoryReport::compute`] beyond objective and parameters.
#[derive(Debug, Clone)]
pub struct ReportInputs<'a> {
    /// A sample of `rho_0`.
    pub initial: &'a Ensemble,
    /// Target accuracy for `V`.
    pub eps: f64,
    pub tau: f64,
    /// Ball radius for the mass bound and the Laplace bound.
    pub radius: f64,
    /// Bound `B` on the consensus distance.
    pub b_bound: f64,
    /// `q` used in the Laplace bound.
    pub laplace_q: f64,
}

/// All evaluated closed-form constants for one configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct TheoryReport {
    pub dim: usize,
    pub contractive: bool,
    pub v0: f64,
    pub eps: f64,
    pub c: f64,
    pub q_rate: Rate,
    pub t_star: f64,
    pub alpha0_c: f64,
    pub alpha0_radius: f64,
    /// `None` when the sample puts no mass on the `alpha_0` ball.
    pub alpha0: Option<f64>,
    pub b1: f64,
    pub b2: f64,
    /// `None` when the sample puts no mass on `B_r(v*)`.
    pub laplace_rhs: Option<f64>,
    /// `r <= R_0` and `q + E_r <= E_inf`.
    pub laplace_feasible: bool,
    pub wellprep: WellPreparedness,
    pub advisory_constants: bool,
}

impl TheoryReport {
    pub fn compute(obj: &ObjectiveSpec, p: &CboParams, inp: &ReportInputs<'_>) -> Result<Self> {
        let vstar = obj
            .minimizer()
            .ok_or_else(|| Error::InvalidConfig(format!("objective '{}' has no known minimizer", obj.name())))?;
        let ens = inp.initial;
        if ens.dim() != obj.dim() || p.dim != obj.dim() {
            return Err(Error::InvalidDimension("report inputs disagree on dimension".into()));
        }
        let k = obj.constants();
        let d = p.dim;
        let v0 = crate::metrics::v_functional(ens, vstar);

        let c = find_c(d);
        let q_rate = match decay_rate_q(p.lambda, p.sigma, d, c, inp.radius, inp.b_bound) {
            Ok(q) => Rate::Finite(q),
            Err(Error::InfiniteRate) => Rate::Infinite,
            Err(e) => return Err(e),
        };
        let t_star = t_star(v0, inp.eps, inp.tau, p.lambda, p.sigma, d)?;

        let a_c = alpha0_c(inp.tau, p.lambda, p.sigma, d);
        let a_radius = alpha0_radius(a_c, k.eta, inp.eps, k.l_e);
        let alpha0 = match alpha0_estimate(a_c, k.eta, inp.eps, k.l_e, |r| ball_mass(ens, vstar, r)) {
            Ok(a) => Some(a),
            Err(Error::UnsupportedInitialization { .. }) => None,
            Err(e) => return Err(e),
        };

        let (b1, b2) = b_constants(p.alpha, k.c2, k.c3, k.c4, None);

        let energies: Vec<f64> = ens.rows().map(|r| obj.eval(r)).collect();
        let r2 = inp.radius * inp.radius;
        let e_r = ens
            .rows()
            .zip(&energies)
            .filter(|(row, _)| dist_sq(row, vstar) <= r2)
            .map(|(_, e)| *e - obj.e_under())
            .fold(0.0, f64::max);
        let mass_r = ball_mass(ens, vstar, inp.radius);
        let first_moment = ens.rows().map(|r| dist_sq(r, vstar).sqrt()).sum::<f64>() / ens.len() as f64;
        let laplace_rhs = laplace_bound(first_moment, mass_r, p.alpha, inp.laplace_q, e_r, k.eta, k.nu).ok();
        let laplace_feasible = inp.radius <= k.r0 && inp.laplace_q + e_r <= k.e_inf;

        let wellprep = wellprep_check(p.alpha, p.lambda, p.sigma, obj.e_under(), &energies, variance(ens), d)?;

        Ok(Self {
            dim: d,
            contractive: p.contractive(),
            v0,
            eps: inp.eps,
            c,
            q_rate,
            t_star,
            alpha0_c: a_c,
            alpha0_radius: a_radius,
            alpha0,
            b1,
            b2,
            laplace_rhs,
            laplace_feasible,
            wellprep,
            advisory_constants: obj.constants_are_advisory(),
        })
    }
}

/// Settings for [`laplace_audit`].
#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceAuditConfig {
    pub measures: usize,
    pub max_n: usize,
    pub max_dim: usize,
    /// Minimum number of sample points inside `B_r(v*)`.
    pub min_inside: usize,
    /// `q` values tried per measure, as multiples of `E_r`, plus `q = 1/alpha`.
    pub q_multipliers: Vec<f64>,
    pub seed: u64,
}

impl Default for LaplaceAuditConfig {
    fn default() -> Self {
        Self {
            measures: 1000,
            max_n: 500,
            max_dim: 3,
            min_inside: 30,
            q_multipliers: vec![0.25, 1.0, 4.0],
            seed: 0,
        }
    }
}

/// One audited empirical measure.
#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceCase {
    pub n: usize,
    pub dim: usize,
    pub alpha: f64,
    pub radius: f64,
    pub consensus_dist: f64,
    /// Smallest bound over the tried `q` values.
    pub best_bound: f64,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LaplaceAuditSummary {
    pub cases: Vec<LaplaceCase>,
    pub checks: usize,
    pub violations: usize,
    /// `consensus_dist / best_bound` quantiles: min, median, max.
    pub tightness: (f64, f64, f64),
}

/// Laplace bound terms of an empirical measure on `B_r(v*)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceTerms {
    /// Largest sampled `E - E_min` inside the closed ball.
    pub e_r: f64,
    pub mass_r: f64,
    pub first_moment: f64,
    pub inside: usize,
}

pub fn laplace_terms(ens: &Ensemble, obj: &ObjectiveSpec, vstar: &[f64], r: f64) -> LaplaceTerms {
    let r2 = r * r;
    let mut e_r: f64 = 0.0;
    let mut inside = 0;
    let mut first = 0.0;
    for row in ens.rows() {
        let s = dist_sq(row, vstar);
        first += s.sqrt();
        if s <= r2 {
            inside += 1;
            e_r = e_r.max(obj.eval(row) - obj.e_under());
        }
    }
    LaplaceTerms {
        e_r,
        mass_r: inside as f64 / ens.len() as f64,
        first_moment: first / ens.len() as f64,
        inside,
    }
}

/// Draws random empirical measures on random quadratic objectives and checks
/// `|v_alpha - v*| <= laplace_bound` for several feasible `(q, r)`.
/// Quadratics satisfy the inverse continuity bound globally with
/// `eta = 1`, `nu = 1/2`, so every `r > 0`, `q > 0` is feasible.
pub fn laplace_audit(cfg: &LaplaceAuditConfig) -> Result<LaplaceAuditSummary> {
    use crate::engine::consensus_point;
    use crate::noise::substream;
    use crate::objectives::quadratic;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    const DOMAIN_AUDIT: u64 = 0x4c41_504c;
    if cfg.max_n < cfg.min_inside || cfg.max_dim == 0 || cfg.min_inside == 0 {
        return Err(Error::InvalidConfig(format!(
            "audit needs max_n >= min_inside >= 1 and max_dim >= 1 (got {}, {}, {})",
            cfg.max_n, cfg.min_inside, cfg.max_dim
        )));
    }
    let mut cases = Vec::with_capacity(cfg.measures);
    let mut checks = 0;
    for m in 0..cfg.measures {
        let mut rng = substream(cfg.seed, DOMAIN_AUDIT, m as u64, 0);
        let dim = rng.random_range(1..=cfg.max_dim);
        let n = rng.random_range(cfg.min_inside..=cfg.max_n);
        let center: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
        let offset: Vec<f64> = (0..dim).map(|_| rng.random_range(-3.0..3.0)).collect();
        let spread: f64 = rng.random_range(0.2..2.0);
        let alpha = 10f64.powf(rng.random_range(-1.0..3.0));
        let mut flat = Vec::with_capacity(n * dim);
        for _ in 0..n {
            for k in 0..dim {
                let z: f64 = StandardNormal.sample(&mut rng);
                flat.push(center[k] + offset[k] + spread * z);
            }
        }
        let ens = Ensemble::from_flat(n, dim, flat, 0.0)?;
        let obj = quadratic(dim, &center)?;
        let k = obj.constants();

        // Smallest radius holding `min_inside` points.
        let mut d2: Vec<f64> = ens.rows().map(|r| dist_sq(r, &center)).collect();
        d2.sort_by(f64::total_cmp);
        let radius = d2[cfg.min_inside - 1].sqrt().max(f64::MIN_POSITIVE);
        let terms = laplace_terms(&ens, &obj, &center, radius);

        let cons = consensus_point(&ens, &obj, alpha)?;
        let dist = dist_sq(&cons, &center).sqrt();
        let mut qs: Vec<f64> = cfg
            .q_multipliers
            .iter()
            .map(|f| f * terms.e_r)
            .filter(|q| *q > 0.0)
            .collect();
        qs.push(1.0 / alpha);
        let mut best = f64::INFINITY;
        let mut violations = 0;
        for q in qs {
            debug_assert!(radius <= k.r0 && q + terms.e_r <= k.e_inf);
            let b = laplace_bound(terms.first_moment, terms.mass_r, alpha, q, terms.e_r, k.eta, k.nu)?;
            checks += 1;
            best = best.min(b);
            // relative slack for rounding in the consensus sum only
            if dist > b * (1.0 + 1e-12) {
                violations += 1;
            }
        }
        cases.push(LaplaceCase {
            n,
            dim,
            alpha,
            radius,
            consensus_dist: dist,
            best_bound: best,
            violations,
        });
    }
    let mut ratios: Vec<f64> = cases.iter().map(|c| c.consensus_dist / c.best_bound).collect();
    ratios.sort_by(f64::total_cmp);
    let tightness = if ratios.is_empty() {
        (0.0, 0.0, 0.0)
    } else {
        (ratios[0], ratios[ratios.len() / 2], ratios[ratios.len() - 1])
    };
    let violations = cases.iter().map(|c| c.violations).sum();
    Ok(LaplaceAuditSummary {
        cases,
        checks,
        violations,
        tightness,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn find_c_examples() {
        assert!((find_c(1) - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-12);
        assert!((find_c(4) - (7.0 - 17f64.sqrt()) / 4.0).abs() < 1e-12);
        assert!((find_c(2) - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn find_c_is_smallest_feasible() {
        for d in 1..=200 {
            let c = find_c(d);
            let f = |c: f64| (2.0 * c - 1.0) * c - d as f64 * (1.0 - c).powi(2);
            assert!(c > 0.5 && c < 1.0);
            assert!(f(c) >= -1e-12, "d = {d}");
            assert!(f(c - 1e-9) < 0.0, "d = {d}");
        }
    }

    #[test]
    fn q_examples() {
        assert_eq!(decay_rate_q(0.0, 1.0, 1, 0.75, 1.0, 0.0).unwrap(), 960.0);
        assert!(decay_rate_q(1.0, 1.0, 1, 0.75, 1e8, 0.0).unwrap() >= 8.0);
        assert_eq!(decay_rate_q(1.0, 0.0, 1, 0.75, 1.0, 0.0), Err(Error::InfiniteRate));
        assert!(decay_rate_q(1.0, 1.0, 1, 0.4, 1.0, 0.0).is_err());
        // lambda = 0 kills the second branch at any sigma
        let first = decay_rate_q(0.0, 1e-3, 1, 0.75, 1.0, 0.0).unwrap();
        assert!((first - 2e-6 * 0.75 * 2.5 / 0.25f64.powi(4)).abs() < 1e-15);
    }

    #[test]
    fn mass_bound_examples() {
        assert_eq!(mass_lower_bound(0.3, 5.0, 0.0), 0.3);
        assert!((mass_lower_bound(0.8, 1.0, 2f64.ln()) - 0.4).abs() < 1e-15);
        assert_eq!(mass_lower_bound(0.0, 1.0, 7.0), 0.0);
    }

    #[test]
    fn mollifier_examples() {
        let vs = [0.5, -1.0];
        assert_eq!(mollifier(&vs, &vs, 0.3), 1.0);
        assert_eq!(mollifier(&[0.8, -1.0], &vs, 0.3), 0.0);
        assert_eq!(mollifier(&[5.0, 5.0], &vs, 0.3), 0.0);
        let h = 0.3 / 2f64.sqrt();
        assert!((mollifier(&[0.5 + h, -1.0], &vs, 0.3) - (-1f64).exp()).abs() < 1e-12);
        assert_eq!(mollifier_grad(&vs, &vs, 0.3), vec![0.0, 0.0]);
        assert_eq!(mollifier_grad(&[2.0, 2.0], &vs, 0.3), vec![0.0, 0.0]);
        assert_eq!(mollifier_laplacian(&[2.0, 2.0], &vs, 0.3), 0.0);
        for d in 1..=5 {
            let z = vec![0.0; d];
            let r: f64 = 0.7;
            assert!((mollifier_laplacian(&z, &z, r) + 2.0 * d as f64 / (r * r)).abs() < 1e-12);
        }
    }

    #[test]
    fn laplace_examples() {
        let b = laplace_bound(1.0, 1.0, 0.0, 0.25, 0.0, 1.0, 0.5).unwrap();
        assert!((b - 1.5).abs() < 1e-15);
        let b = laplace_bound(1.0, 1.0, 100.0, 0.25, 0.0, 1.0, 0.5).unwrap();
        assert!((b - (0.5 + (-25f64).exp())).abs() < 1e-15);
        let b = laplace_bound(1.0, 0.5, 1e300, 0.25, 0.0, 1.0, 0.5).unwrap();
        assert_eq!(b, 0.5);
        assert_eq!(laplace_bound(1.0, 0.0, 1.0, 0.25, 0.0, 1.0, 0.5), Err(Error::EmptyBall));
    }

    #[test]
    fn t_star_examples() {
        assert_eq!(t_star(2.0, 2.0, 0.3, 1.0, 0.5, 1).unwrap(), 0.0);
        let t = t_star(1.0, (-1.75f64).exp(), 0.0, 1.0, 0.5, 1).unwrap();
        assert!((t - 1.0).abs() < 1e-12);
        let a = t_star(1.0, 0.01, 0.2, 1.0, 0.5, 1).unwrap();
        let b = t_star(1.0, 0.005, 0.2, 1.0, 0.5, 1).unwrap();
        assert!((b - a - 2f64.ln() / (0.8 * 1.75)).abs() < 1e-12);
        assert!(matches!(
            t_star(1.0, 0.1, 0.0, 0.1, 1.0, 1),
            Err(Error::NonContractive { .. })
        ));
        assert!(matches!(
            t_star(1.0, 2.0, 0.0, 1.0, 0.5, 1),
            Err(Error::InvalidAccuracy { .. })
        ));
    }

    #[test]
    fn alpha0_examples() {
        let a = alpha0_estimate(0.8, 1.0, 0.1, 1.0, |r| {
            assert!((r - 0.01).abs() < 1e-15);
            0.01
        })
        .unwrap();
        assert!((a - 575.646_273).abs() < 1e-3, "{a}");
        let a10 = alpha0_estimate(0.8, 1.0, 1.0, 1.0, |_| 0.01).unwrap();
        assert!((a10 - a / 10.0).abs() < 1e-9);
        assert!(alpha0_estimate(0.8, 1.0, 0.1, 1.0, |_| 1.0).unwrap() > 0.0);
        assert!(matches!(
            alpha0_estimate(0.8, 1.0, 0.1, 1.0, |_| 0.0),
            Err(Error::UnsupportedInitialization { .. })
        ));
    }

    #[test]
    fn wellprep_examples() {
        let w = wellprep_check(0.1, 1.0, 0.0, 0.0, &[0.0, 1.0], 0.1, 1).unwrap();
        assert!(w.cond1);
        assert!((w.margin1 - 0.35).abs() < 1e-15);
        let w = wellprep_check(1e6, 1.0, 0.0, 0.0, &[0.0, 1.0], 0.1, 1).unwrap();
        assert!(!w.cond1);
        // var0 = 0: condition 2 is 2 lambda |w|^2 >= 2 d sigma^2 |w| e^{-alpha E_min}
        let w = wellprep_check(1.0, 1.0, 0.5, 0.0, &[0.0, 0.0], 0.0, 1).unwrap();
        assert!(w.cond2);
        assert!((w.margin2 - (2.0 - 0.5)).abs() < 1e-15);
        let w = wellprep_check(1.0, 0.1, 1.0, 0.0, &[0.0, 0.0], 0.0, 1).unwrap();
        assert!(!w.cond2);
        assert!(wellprep_check(1.0, 1.0, 1.0, 0.0, &[], 0.0, 1).is_err());
    }

    #[test]
    fn evolution_rhs_examples() {
        assert_eq!(evolution_rhs(0.5, 0.0, 1.0, 0.5, 1, None), -0.875);
        assert!((evolution_rhs(0.5, 0.1, 1.0, 0.5, 1, None) + 0.74875).abs() < 1e-12);
        let k = CutoffTerms {
            eta: 1.0,
            nu: 0.5,
            l_e: 1.0,
            gamma: 0.0,
        };
        let lam = 1.3;
        let extra = evolution_rhs(0.5, 0.04, lam, 0.5, 1, Some(k)) - evolution_rhs(0.5, 0.04, lam, 0.5, 1, None);
        assert!((extra - 0.08 * lam).abs() < 1e-12);
    }

    #[test]
    fn b_constant_examples() {
        assert_eq!(b_constants(1.0, 1.0, 1.0, 1.0, None), (5.0, 4.0));
        assert_eq!(b_constants(3.0, 1.0, 1.0, 1.0, Some((2.0, 2.0))), (0.0, 1.0));
        let (_, b2) = b_constants(1e300, 3.0, 2.0, 1.0, None);
        assert!((b2 - 3.0).abs() < 1e-12);
    }

    #[test]
    fn small_laplace_audit_has_no_violations() {
        let cfg = LaplaceAuditConfig {
            measures: 50,
            seed: 5,
            ..Default::default()
        };
        let s = laplace_audit(&cfg).unwrap();
        assert_eq!(s.cases.len(), 50);
        assert_eq!(s.violations, 0);
        assert!(s.tightness.2 <= 1.0);
    }

    #[test]
    fn laplace_bound_nonincreasing_in_alpha() {
        let mut prev = f64::INFINITY;
        for k in 0..40 {
            let alpha = 10f64.powf(-2.0 + 0.2 * k as f64);
            let b = laplace_bound(0.7, 0.2, alpha, 0.3, 0.1, 1.0, 0.5).unwrap();
            assert!(b <= prev);
            prev = b;
        }
    }

    #[test]
    fn point_mass_at_minimizer() {
        let obj = crate::objectives::quadratic(2, &[1.0, -1.0]).unwrap();
        let ens = Ensemble::from_rows(&[vec![1.0, -1.0]]).unwrap();
        let t = laplace_terms(&ens, &obj, &[1.0, -1.0], 0.1);
        let b = laplace_bound(t.first_moment, t.mass_r, 3.0, 0.2, t.e_r, 1.0, 0.5).unwrap();
        let c = crate::engine::consensus_point(&ens, &obj, 3.0).unwrap();
        assert_eq!(dist_sq(&c, &[1.0, -1.0]), 0.0);
        assert!(b >= 0.0);
    }

    proptest! {
        #[test]
        fn contraction_term_negative(lambda in 0.01f64..10.0, frac in 0.0f64..0.99, v in 1e-6f64..100.0, d in 1usize..10) {
            // sigma chosen so that d sigma^2 = frac * 2 lambda < 2 lambda
            let sigma = (frac * 2.0 * lambda / d as f64).sqrt();
            prop_assert!(evolution_rhs(v, 0.0, lambda, sigma, d, None) < 0.0);
        }

        #[test]
        fn q_finite_for_positive_sigma(
            lambda in 0.0f64..10.0, sigma in 1e-3f64..5.0, d in 1usize..20,
            r in 1e-3f64..10.0, b in 0.0f64..10.0,
        ) {
            let q = decay_rate_q(lambda, sigma, d, find_c(d), r, b).unwrap();
            prop_assert!(q.is_finite() && q > 0.0);
        }

        #[test]
        fn mollifier_in_unit_interval(x in prop::collection::vec(-2.0f64..2.0, 1..5), r in 0.1f64..2.0) {
            let z = vec![0.0; x.len()];
            let m = mollifier(&x, &z, r);
            prop_assert!((0.0..=1.0).contains(&m));
            if dist_sq(&x, &z) >= r * r {
                prop_assert_eq!(m, 0.0);
            }
        }
    }
}
