//! `cbo theory`: closed-form quantities for a configured objective and
//! parameter set.

use cbo_core::engine::sample_initial;
use cbo_core::metrics::v_functional;
use cbo_core::theory::{Rate, ReportInputs, TheoryReport};

use crate::config::RunConfig;
use crate::output::Summary;
use crate::CliError;

/// Samples `rho_0` with the configured `n_particles` and seed and evaluates
/// the theory report.
pub fn theory_report(cfg: &RunConfig) -> Result<Summary, CliError> {
    let obj = cfg.objective_spec()?;
    let p = cfg.cbo_params();
    let t = &cfg.theory;

    let initial = sample_initial(&cfg.init_distribution(), p.n_particles, p.dim, p.seed)?;
    let vstar = obj
        .minimizer()
        .ok_or_else(|| CliError::Config(format!("objective '{}' has no known minimizer", obj.name())))?;
    let v0 = v_functional(&initial, vstar);
    let eps = t.eps.unwrap_or(t.eps_fraction * v0);
    let inputs = ReportInputs {
        initial: &initial,
        eps,
        tau: t.tau,
        radius: t.radius,
        b_bound: t.b_bound,
        laplace_q: t.laplace_q,
    };
    let r = TheoryReport::compute(&obj, &p, &inputs).map_err(|e| with_context(e.into(), "theory"))?;
    Ok(render(&r, t.radius))
}

fn with_context(e: CliError, flag: &str) -> CliError {
    match e {
        CliError::Theory(m) => CliError::Theory(format!("{flag}: {m}")),
        CliError::Config(m) => CliError::Config(format!("{flag}: {m}")),
        other => other,
    }
}

pub fn render(r: &TheoryReport, radius: f64) -> Summary {
    let mut s = Summary::new();
    s.add("dim", r.dim)
        .add("contractive", r.contractive)
        .add("v0", r.v0)
        .add("eps", r.eps)
        .add("c", r.c);
    match r.q_rate {
        Rate::Finite(q) => s.add("q", q),
        Rate::Infinite => s.add("q", "infinite (σ=0)"),
    };
    s.add("t_star", r.t_star)
        .add("alpha0_c", r.alpha0_c)
        .add("alpha0_radius", r.alpha0_radius);
    match r.alpha0 {
        Some(a) => s.add("alpha0", a),
        None => s.add(
            "alpha0",
            format!("undefined (no sampled mass within {})", r.alpha0_radius),
        ),
    };
    s.add("b1", r.b1).add("b2", r.b2);
    match r.laplace_rhs {
        Some(b) => s.add("laplace_bound", b),
        None => s.add("laplace_bound", format!("undefined (no sampled mass within {radius})")),
    };
    let w = &r.wellprep;
    s.add("laplace_feasible", r.laplace_feasible)
        .add("wellprep_cond1", w.cond1)
        .add("wellprep_margin1", w.margin1)
        .add("wellprep_cond2", w.cond2)
        .add("wellprep_margin2", w.margin2)
        .add("concentration", w.concentration)
        .add("concentration_margin", w.concentration_margin)
        .add("advisory_constants", r.advisory_constants);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(sigma: f64, extra: &str) -> RunConfig {
        RunConfig::parse(&format!(
            r#"{{
            "objective": {{"name": "rastrigin", "dim": 1}},
            "init": {{"kind": "gaussian", "mean": [1.0], "variance": 0.8}},
            "params": {{"lambda": 1, "sigma": {sigma}, "alpha": 1e15, "dt": 0.01, "steps": 5, "n_particles": 500}},
            "outputs": "unused"{extra}
        }}"#
        ))
        .unwrap()
    }

    #[test]
    fn one_dimensional_c_is_golden_ratio_conjugate() {
        let s = theory_report(&cfg(0.5, "")).unwrap();
        let c: f64 = s.get("c").unwrap().parse().unwrap();
        assert!((c - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-12);
        assert!(s.get("q").unwrap().parse::<f64>().unwrap() > 0.0);
    }

    #[test]
    fn eps_equal_to_v0_gives_zero_horizon() {
        let extra = r#", "theory": {"eps_fraction": 1.0, "tau": 0.5, "radius": 0.1, "b_bound": 1.0, "laplace_q": 0.1}"#;
        let s = theory_report(&cfg(0.5, extra)).unwrap();
        assert_eq!(s.get("t_star"), Some("0"));
    }

    #[test]
    fn zero_sigma_rate_is_infinite() {
        let s = theory_report(&cfg(0.0, "")).unwrap();
        assert_eq!(s.get("q"), Some("infinite (σ=0)"));
    }

    #[test]
    fn non_contractive_is_a_theory_failure() {
        let e = theory_report(&cfg(2.0, "")).unwrap_err();
        assert_eq!(e.exit_code(), 4);
    }
}
