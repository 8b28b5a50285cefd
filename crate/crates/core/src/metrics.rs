//! Empirical functionals of an ensemble and exponential-rate fitting.

use crate::ensemble::{dist_sq, norm_sq, Ensemble};
use crate::error::{Error, Result};

/// `V(rho) = 1/(2N) sum_i |V^i - v*|^2`.
pub fn v_functional(ens: &Ensemble, vstar: &[f64]) -> f64 {
    debug_assert_eq!(ens.dim(), vstar.len());
    let s: f64 = ens.rows().map(|r| dist_sq(r, vstar)).sum();
    s / (2.0 * ens.len() as f64)
}

/// `Var(rho) = 1/(2N) sum_i |V^i - mean|^2`.
pub fn variance(ens: &Ensemble) -> f64 {
    let m = ens.mean();
    let s: f64 = ens.rows().map(|r| dist_sq(r, &m)).sum();
    s / (2.0 * ens.len() as f64)
}

/// Squared 2-Wasserstein distance to the Dirac at `vstar`, i.e. `2 V`.
pub fn w2_sq_to_dirac(ens: &Ensemble, vstar: &[f64]) -> f64 {
    2.0 * v_functional(ens, vstar)
}

/// Fraction of particles in the closed ball `|v - vstar| <= r`.
pub fn ball_mass(ens: &Ensemble, vstar: &[f64], r: f64) -> f64 {
    let r2 = r * r;
    let inside = ens.rows().filter(|row| dist_sq(row, vstar) <= r2).count();
    inside as f64 / ens.len() as f64
}

/// `(1/N) sum_i max(|V^i|^4, |Vbar^i|^4)`, or `(1/N) sum_i |V^i|^4` without
/// a companion ensemble.
pub fn moment4_stat(ens: &Ensemble, ens_bar: Option<&Ensemble>) -> Result<f64> {
    let n = ens.len() as f64;
    match ens_bar {
        None => Ok(ens.rows().map(|r| norm_sq(r).powi(2)).sum::<f64>() / n),
        Some(bar) => {
            if bar.len() != ens.len() || bar.dim() != ens.dim() {
                return Err(Error::InvalidInput(format!(
                    "moment statistic needs matching shapes, got {}x{} and {}x{}",
                    ens.len(),
                    ens.dim(),
                    bar.len(),
                    bar.dim()
                )));
            }
            let s: f64 = ens
                .rows()
                .zip(bar.rows())
                .map(|(a, b)| norm_sq(a).powi(2).max(norm_sq(b).powi(2)))
                .sum();
            Ok(s / n)
        }
    }
}

/// Ordinary least-squares slope of `y` against `x`.
pub fn least_squares_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "regression needs >= 2 paired points, got {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    if sxx == 0.0 {
        return Err(Error::InvalidInput("regression abscissae are all equal".into()));
    }
    Ok(sxy / sxx)
}

/// Decay rate of `y(t)`: least-squares slope of `-ln y` against `t` over the
/// closed window `[window.0, window.1]`. Positive means decay.
pub fn fit_decay_rate(series: &[(f64, f64)], window: (f64, f64)) -> Result<f64> {
    let pts: Vec<(f64, f64)> = series
        .iter()
        .copied()
        .filter(|&(t, _)| t >= window.0 && t <= window.1)
        .collect();
    if pts.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "decay fit needs >= 3 points in [{}, {}], got {}",
            window.0,
            window.1,
            pts.len()
        )));
    }
    if let Some(&(t, y)) = pts.iter().find(|&&(_, y)| !(y > 0.0)) {
        return Err(Error::InvalidInput(format!(
            "decay fit needs positive values, got {y} at t = {t}"
        )));
    }
    let ts: Vec<f64> = pts.iter().map(|p| p.0).collect();
    let ly: Vec<f64> = pts.iter().map(|p| -p.1.ln()).collect();
    least_squares_slope(&ts, &ly)
}

/// Per-record snapshot of the ensemble functionals.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRecord {
    pub t: f64,
    pub v_func: f64,
    pub variance: f64,
    pub w2_sq: f64,
    pub consensus_dist: f64,
    /// `(radius, fraction)` pairs in the order of the recording plan.
    pub ball_mass: Vec<(f64, f64)>,
    pub moment4: f64,
}

impl MetricsRecord {
    pub fn measure(ens: &Ensemble, vstar: &[f64], consensus: &[f64], radii: &[f64]) -> Self {
        let v_func = v_functional(ens, vstar);
        Self {
            t: ens.time(),
            v_func,
            variance: variance(ens),
            w2_sq: 2.0 * v_func,
            consensus_dist: dist_sq(consensus, vstar).sqrt(),
            ball_mass: radii.iter().map(|&r| (r, ball_mass(ens, vstar, r))).collect(),
            moment4: moment4_stat(ens, None).expect("no companion ensemble"),
        }
    }
}

/// Time-ordered records of one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsSeries {
    pub records: Vec<MetricsRecord>,
    /// `|(1/N) sum_i V_K^i - v*|^2`, when the run completed.
    pub endpoint_error: Option<f64>,
    pub config_digest: String,
}

impl MetricsSeries {
    pub fn v_series(&self) -> Vec<(f64, f64)> {
        self.records.iter().map(|r| (r.t, r.v_func)).collect()
    }

    pub fn variance_series(&self) -> Vec<(f64, f64)> {
        self.records.iter().map(|r| (r.t, r.variance)).collect()
    }

    /// Window for fitting the decay of `V`: starts at the first record and
    /// ends at the last record before `V` drops below `1e-6 V(0)`, or at 90%
    /// of the recorded horizon, whichever comes first.
    pub fn pre_plateau_window(&self) -> Option<(f64, f64)> {
        let first = self.records.first()?;
        let last = self.records.last()?;
        let horizon_end = first.t + 0.9 * (last.t - first.t);
        let floor = 1e-6 * first.v_func;
        let plateau_end = self
            .records
            .iter()
            .take_while(|r| r.v_func >= floor)
            .last()
            .map_or(first.t, |r| r.t);
        Some((first.t, horizon_end.min(plateau_end)))
    }

    /// Decay rate of `V` over [`Self::pre_plateau_window`].
    pub fn fitted_v_decay_rate(&self) -> Result<f64> {
        let w = self
            .pre_plateau_window()
            .ok_or_else(|| Error::InvalidInput("empty series".into()))?;
        fit_decay_rate(&self.v_series(), w)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn ens1(v: &[f64]) -> Ensemble {
        Ensemble::from_scalars(v).unwrap()
    }

    #[test]
    fn v_functional_examples() {
        assert_eq!(v_functional(&ens1(&[1.0, -1.0]), &[0.0]), 0.5);
        assert_eq!(v_functional(&ens1(&[2.0, 2.0]), &[2.0]), 0.0);
        assert_eq!(v_functional(&ens1(&[3.0, 1.0]), &[1.0]), 1.0);
    }

    #[test]
    fn variance_examples() {
        assert_eq!(variance(&ens1(&[1.0, -1.0])), 0.5);
        assert_eq!(variance(&ens1(&[2.0, 2.0])), 0.0);
        assert!((variance(&ens1(&[0.0, 1.0, 2.0])) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn ball_mass_examples() {
        let e = ens1(&[0.0, 0.05, 2.0]);
        assert!((ball_mass(&e, &[0.0], 0.1) - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(ball_mass(&e, &[0.0], 1e300), 1.0);
        assert_eq!(ball_mass(&e, &[10.0], 1.0), 0.0);
        // closed ball
        assert_eq!(ball_mass(&ens1(&[1.0]), &[0.0], 1.0), 1.0);
    }

    #[test]
    fn moment4_examples() {
        assert_eq!(moment4_stat(&ens1(&[0.0, 0.0]), None).unwrap(), 0.0);
        assert_eq!(moment4_stat(&ens1(&[1.0, -1.0]), None).unwrap(), 1.0);
        assert_eq!(moment4_stat(&ens1(&[1.0]), Some(&ens1(&[2.0]))).unwrap(), 16.0);
        assert!(moment4_stat(&ens1(&[1.0]), Some(&ens1(&[2.0, 3.0]))).is_err());
    }

    #[test]
    fn decay_fit_examples() {
        let grid: Vec<f64> = (0..=100).map(|k| k as f64 * 0.01).collect();
        let a: Vec<(f64, f64)> = grid.iter().map(|&t| (t, (-1.75 * t).exp())).collect();
        assert!((fit_decay_rate(&a, (0.0, 1.0)).unwrap() - 1.75).abs() < 1e-9);
        let b: Vec<(f64, f64)> = grid.iter().map(|&t| (t, 3.0)).collect();
        assert!(fit_decay_rate(&b, (0.0, 1.0)).unwrap().abs() < 1e-12);
        let c: Vec<(f64, f64)> = grid.iter().map(|&t| (t, 2.0 * (-3.0 * t).exp())).collect();
        assert!((fit_decay_rate(&c, (0.0, 1.0)).unwrap() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn decay_fit_errors() {
        let pts = [(0.0, 1.0), (1.0, 0.0), (2.0, 0.5)];
        assert!(fit_decay_rate(&pts, (0.0, 2.0)).is_err());
        assert!(fit_decay_rate(&pts[..2], (0.0, 2.0)).is_err());
    }

    #[test]
    fn window_stops_at_floor_or_ninety_percent() {
        let mk = |t: f64, v: f64| MetricsRecord {
            t,
            v_func: v,
            variance: 0.0,
            w2_sq: 2.0 * v,
            consensus_dist: 0.0,
            ball_mass: vec![],
            moment4: 0.0,
        };
        let s = MetricsSeries {
            records: (0..=10).map(|k| mk(k as f64, (-(k as f64)).exp())).collect(),
            ..Default::default()
        };
        assert_eq!(s.pre_plateau_window(), Some((0.0, 9.0)));
        let s = MetricsSeries {
            records: (0..=10).map(|k| mk(k as f64, 10f64.powi(-2 * k))).collect(),
            ..Default::default()
        };
        assert_eq!(s.pre_plateau_window(), Some((0.0, 3.0)));
    }

    fn ensemble_strategy() -> impl Strategy<Value = (Ensemble, Vec<f64>)> {
        (1usize..=4, 1usize..=40).prop_flat_map(|(d, n)| {
            (
                prop::collection::vec(-50.0f64..50.0, n * d),
                prop::collection::vec(-50.0f64..50.0, d),
            )
                .prop_map(move |(flat, vs)| (Ensemble::from_flat(n, d, flat, 0.0).unwrap(), vs))
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn variance_identity((e, vs) in ensemble_strategy()) {
            let v = v_functional(&e, &vs);
            let var = variance(&e);
            let m = e.mean();
            let rhs = v - 0.5 * dist_sq(&m, &vs);
            prop_assert!(var <= v * (1.0 + 1e-12) + 1e-12);
            prop_assert!((var - rhs).abs() <= 1e-10 * v.max(1.0));
            prop_assert_eq!(w2_sq_to_dirac(&e, &vs), 2.0 * v);
        }

        #[test]
        fn ball_mass_monotone((e, vs) in ensemble_strategy(), r1 in 0.0f64..100.0, dr in 0.0f64..50.0) {
            prop_assert!(ball_mass(&e, &vs, r1) <= ball_mass(&e, &vs, r1 + dr));
        }

        #[test]
        fn v_functional_permutation_invariant((e, vs) in ensemble_strategy(), rot in 0usize..40) {
            let mut rows: Vec<Vec<f64>> = e.rows().map(<[f64]>::to_vec).collect();
            let k = rot % rows.len();
            rows.rotate_left(k);
            rows.reverse();
            let p = Ensemble::from_rows(&rows).unwrap();
            let a = v_functional(&e, &vs);
            prop_assert!((a - v_functional(&p, &vs)).abs() <= 1e-12 * a.max(1.0));
        }

        #[test]
        fn decay_fit_exact(rate in -5.0f64..5.0, amp in 0.01f64..100.0) {
            let pts: Vec<(f64, f64)> = (0..50).map(|k| {
                let t = k as f64 * 0.02;
                (t, amp * (-rate * t).exp())
            }).collect();
            let fit = fit_decay_rate(&pts, (0.0, 1.0)).unwrap();
            prop_assert!((fit - rate).abs() <= 1e-9 * rate.abs().max(1.0));
        }
    }
}
