//! JSON run configuration.

use std::path::{Path, PathBuf};

use cbo_core::engine::{CboParams, HVariant, InitDistribution, RecordingPlan};
use cbo_core::mfa::MfaConfig;
use cbo_core::objectives::by_name;
use cbo_core::theory::LaplaceAuditConfig;
use cbo_core::ObjectiveSpec;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub objective: ObjectiveConfig,
    pub init: InitConfig,
    pub params: ParamsConfig,
    #[serde(default)]
    pub recording: RecordingConfig,
    pub outputs: PathBuf,
    #[serde(default)]
    pub preset: Option<Preset>,
    #[serde(default)]
    pub theory: TheoryConfig,
    #[serde(default)]
    pub mfa: Option<MfaSection>,
    #[serde(default)]
    pub laplace_audit: AuditSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveConfig {
    pub name: String,
    pub dim: usize,
    /// Minimizer of the quadratic objective; origin when absent.
    #[serde(default)]
    pub center: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitConfig {
    Gaussian { mean: Vec<f64>, variance: f64 },
    Uniform { lo: Vec<f64>, hi: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsConfig {
    pub lambda: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub dt: f64,
    pub steps: usize,
    pub n_particles: usize,
    #[serde(default)]
    pub h_variant: HConfig,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum HConfig {
    #[default]
    ConstOne,
    Ramp {
        delta: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecordingConfig {
    pub every: usize,
    #[serde(default)]
    pub ball_radii: Vec<f64>,
}

impl Default for RecordingConfig {
    fn default() -> Self {
        Self {
            every: 1,
            ball_radii: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    FigVariance,
    FigTrajectories,
    MfaSweep,
    LaplaceAudit,
}

/// Inputs of `cbo theory` that the run parameters do not fix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TheoryConfig {
    /// Absolute target accuracy for `V`; overrides `eps_fraction`.
    #[serde(default)]
    pub eps: Option<f64>,
    /// Target accuracy as a fraction of the sampled `V(rho_0)`.
    pub eps_fraction: f64,
    pub tau: f64,
    pub radius: f64,
    pub b_bound: f64,
    pub laplace_q: f64,
}

impl Default for TheoryConfig {
    fn default() -> Self {
        Self {
            eps: None,
            eps_fraction: 0.01,
            tau: 0.5,
            radius: 0.1,
            b_bound: 1.0,
            laplace_q: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MfaSection {
    pub n_values: Vec<usize>,
    pub n_ref: usize,
    #[serde(default)]
    pub ref_seed: u64,
    /// Replications per `N`, seeded `0..seeds`.
    pub seeds: u64,
    #[serde(default)]
    pub m_threshold: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditSection {
    pub measures: usize,
    pub max_n: usize,
    pub max_dim: usize,
    pub min_inside: usize,
    pub q_multipliers: Vec<f64>,
    pub seed: u64,
}

impl Default for AuditSection {
    fn default() -> Self {
        let d = LaplaceAuditConfig::default();
        Self {
            measures: d.measures,
            max_n: d.max_n,
            max_dim: d.max_dim,
            min_inside: d.min_inside,
            q_multipliers: d.q_multipliers,
            seed: d.seed,
        }
    }
}

impl RunConfig {
    /// Parses a config file; syntax and schema errors carry `path:line:column`.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}:{msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("{}:{}: {e}", e.line(), e.column())))?;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.recording.every == 0 {
            return bad("recording.every must be >= 1".into());
        }
        if let Some(r) = self.recording.ball_radii.iter().find(|r| !(**r > 0.0)) {
            return bad(format!("recording.ball_radii must be > 0, got {r}"));
        }
        self.objective_spec()?;
        self.init_distribution()
            .validate(self.objective.dim)
            .map_err(config_err)?;
        self.cbo_params().validate().map_err(config_err)?;
        Ok(())
    }

    pub fn objective_spec(&self) -> Result<ObjectiveSpec, CliError> {
        if let Some(c) = &self.objective.center {
            if self.objective.name != "quadratic" {
                return Err(CliError::Config("objective.center only applies to 'quadratic'".into()));
            }
            if c.len() != self.objective.dim {
                return Err(CliError::Config(format!(
                    "objective.center has length {}, expected {}",
                    c.len(),
                    self.objective.dim
                )));
            }
        }
        by_name(
            &self.objective.name,
            self.objective.dim,
            self.objective.center.as_deref(),
        )
        .map_err(config_err)
    }

    pub fn init_distribution(&self) -> InitDistribution {
        match &self.init {
            InitConfig::Gaussian { mean, variance } => InitDistribution::GaussianIsotropic {
                mean: mean.clone(),
                variance: *variance,
            },
            InitConfig::Uniform { lo, hi } => InitDistribution::UniformBox {
                lo: lo.clone(),
                hi: hi.clone(),
            },
        }
    }

    pub fn cbo_params(&self) -> CboParams {
        let p = &self.params;
        CboParams {
            lambda: p.lambda,
            sigma: p.sigma,
            alpha: p.alpha,
            dt: p.dt,
            steps: p.steps,
            n_particles: p.n_particles,
            dim: self.objective.dim,
            h_variant: match p.h_variant {
                HConfig::ConstOne => HVariant::ConstOne,
                HConfig::Ramp { delta } => HVariant::RampHeaviside { delta },
            },
            seed: p.seed,
        }
    }

    pub fn recording_plan(&self) -> RecordingPlan {
        RecordingPlan {
            every: self.recording.every,
            ball_radii: self.recording.ball_radii.clone(),
        }
    }

    pub fn mfa_config(&self) -> Result<MfaConfig, CliError> {
        let m = self
            .mfa
            .as_ref()
            .ok_or_else(|| CliError::Config("mfa-sweep needs an 'mfa' section".into()))?;
        Ok(MfaConfig {
            dist: self.init_distribution(),
            params: self.cbo_params(),
            n_values: m.n_values.clone(),
            n_ref: m.n_ref,
            ref_seed: m.ref_seed,
            seeds: (0..m.seeds).collect(),
            m_threshold: m.m_threshold,
        })
    }

    pub fn audit_config(&self) -> LaplaceAuditConfig {
        let a = &self.laplace_audit;
        LaplaceAuditConfig {
            measures: a.measures,
            max_n: a.max_n,
            max_dim: a.max_dim,
            min_inside: a.min_inside,
            q_multipliers: a.q_multipliers.clone(),
            seed: a.seed,
        }
    }
}

fn config_err(e: cbo_core::Error) -> CliError {
    CliError::Config(e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{
        "objective": {"name": "rastrigin", "dim": 1},
        "init": {"kind": "gaussian", "mean": [1.0], "variance": 0.8},
        "params": {"lambda": 1, "sigma": 0.5, "alpha": 1e15, "dt": 0.01, "steps": 5, "n_particles": 10},
        "outputs": "out"
    }"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = RunConfig::parse(MINIMAL).unwrap();
        assert_eq!(c.recording.every, 1);
        assert_eq!(c.params.h_variant, HConfig::ConstOne);
        assert_eq!(c.cbo_params().dim, 1);
        assert_eq!(c.preset, None);
        assert_eq!(c.laplace_audit.measures, 1000);
    }

    #[test]
    fn unknown_field_is_located() {
        let text = MINIMAL.replace("\"outputs\"", "\"colour\": 1,\n        \"outputs\"");
        match RunConfig::parse(&text) {
            Err(CliError::Config(m)) => {
                assert!(m.starts_with("5:"), "{m}");
                assert!(m.contains("colour"), "{m}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_error_is_located() {
        let text = MINIMAL.replace("\"dim\": 1}", "\"dim\": 1");
        match RunConfig::parse(&text) {
            Err(CliError::Config(m)) => assert!(m.starts_with("3:"), "{m}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn semantic_errors_are_config_errors() {
        for (from, to) in [
            ("\"mean\": [1.0]", "\"mean\": [1.0, 2.0]"),
            ("\"rastrigin\"", "\"sphere\""),
            ("\"dt\": 0.01", "\"dt\": -0.01"),
            ("\"outputs\"", "\"recording\": {\"every\": 0},\n\"outputs\""),
        ] {
            let text = MINIMAL.replace(from, to);
            assert!(matches!(RunConfig::parse(&text), Err(CliError::Config(_))), "{to}");
        }
    }

    #[test]
    fn tagged_variants_parse() {
        let text = MINIMAL
            .replace(
                "{\"kind\": \"gaussian\", \"mean\": [1.0], \"variance\": 0.8}",
                "{\"kind\": \"uniform\", \"lo\": [-1.0], \"hi\": [2.0]}",
            )
            .replace(
                "\"n_particles\": 10",
                "\"n_particles\": 10, \"h_variant\": {\"kind\": \"ramp\", \"delta\": 0.5}",
            );
        let c = RunConfig::parse(&text).unwrap();
        assert_eq!(c.cbo_params().h_variant, HVariant::RampHeaviside { delta: 0.5 });
        assert!(matches!(c.init_distribution(), InitDistribution::UniformBox { .. }));
    }
}
