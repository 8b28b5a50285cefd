//! Benchmark objectives together with the structural constants the
//! convergence theory consumes (coercivity near the minimizer, local
//! Lipschitz growth, quadratic growth bounds).

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type EvalFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Structural constants of an objective.
///
/// * `eta`, `nu`, `r0`, `e_inf`: inverse continuity,
///   `|v - v*| <= (E(v) - E_min)^nu / eta` on the ball of radius `r0`, and
///   `E(v) - E_min > e_inf` outside it. `r0 = inf` means the bound is global.
/// * `l_e`, `gamma`: `E(v) - E_min <= l_e (1 + |v - v*|^gamma) |v - v*|`.
/// * `c1`..`c4`: Lipschitz-type, quadratic upper and quadratic lower growth
///   constants used for the moment bounds `b1`, `b2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionConstants {
    pub eta: f64,
    pub nu: f64,
    pub r0: f64,
    pub e_inf: f64,
    pub l_e: f64,
    pub gamma: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
}

/// An objective `E: R^d -> R` plus its metadata.
#[derive(Clone)]
pub struct ObjectiveSpec {
    name: String,
    dim: usize,
    eval: Arc<EvalFn>,
    minimizer: Option<Vec<f64>>,
    e_under: f64,
    constants: AssumptionConstants,
    /// Set when the constants are a documented choice rather than derived.
    advisory_constants: bool,
}

impl fmt::Debug for ObjectiveSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ObjectiveSpec")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("minimizer", &self.minimizer)
            .field("e_under", &self.e_under)
            .field("constants", &self.constants)
            .finish_non_exhaustive()
    }
}

impl ObjectiveSpec {
    /// Wraps an arbitrary function. The caller vouches for `minimizer`,
    /// `e_under` and `constants`.
    pub fn custom<F>(
        name: impl Into<String>,
        dim: usize,
        eval: F,
        minimizer: Option<Vec<f64>>,
        e_under: f64,
        constants: AssumptionConstants,
    ) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        if dim == 0 {
            return Err(Error::InvalidDimension("dimension must be at least 1".into()));
        }
        if let Some(m) = &minimizer {
            if m.len() != dim {
                return Err(Error::InvalidDimension(format!(
                    "minimizer has length {}, expected {dim}",
                    m.len()
                )));
            }
        }
        Ok(Self {
            name: name.into(),
            dim,
            eval: Arc::new(eval),
            minimizer,
            e_under,
            constants,
            advisory_constants: true,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn eval(&self, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), self.dim);
        (self.eval)(v)
    }

    pub fn minimizer(&self) -> Option<&[f64]> {
        self.minimizer.as_deref()
    }

    pub fn e_under(&self) -> f64 {
        self.e_under
    }

    pub fn constants(&self) -> &AssumptionConstants {
        &self.constants
    }

    pub fn constants_are_advisory(&self) -> bool {
        self.advisory_constants
    }

    /// `v -> E(v) + offset`. Minimizer and constants are unchanged, `e_under`
    /// moves with the offset.
    pub fn with_offset(&self, offset: f64) -> Self {
        let inner = Arc::clone(&self.eval);
        Self {
            name: format!("{}+{offset}", self.name),
            eval: Arc::new(move |v: &[f64]| inner(v) + offset),
            e_under: self.e_under + offset,
            ..self.clone()
        }
    }

    /// `v -> E(v - shift)`; the minimizer moves by `shift`.
    pub fn shifted(&self, shift: &[f64]) -> Result<Self> {
        if shift.len() != self.dim {
            return Err(Error::InvalidDimension(format!(
                "shift has length {}, expected {}",
                shift.len(),
                self.dim
            )));
        }
        let inner = Arc::clone(&self.eval);
        let s = shift.to_vec();
        let minimizer = self
            .minimizer
            .as_ref()
            .map(|m| m.iter().zip(shift).map(|(a, b)| a + b).collect());
        Ok(Self {
            name: format!("{}-shifted", self.name),
            eval: Arc::new(move |v: &[f64]| {
                let moved: Vec<f64> = v.iter().zip(&s).map(|(a, b)| a - b).collect();
                inner(&moved)
            }),
            minimizer,
            ..self.clone()
        })
    }
}

#[inline]
fn rastrigin_1d(x: f64) -> f64 {
    x * x + 2.5 * (1.0 - (2.0 * PI * x).cos())
}

/// Separable Rastrigin variant `sum_k v_k^2 + 2.5 (1 - cos(2 pi v_k))` with
/// global minimum 0 at the origin.
pub fn rastrigin(dim: usize) -> Result<ObjectiveSpec> {
    if dim == 0 {
        return Err(Error::InvalidDimension("rastrigin needs dim >= 1".into()));
    }
    let d = dim as f64;
    let constants = AssumptionConstants {
        // v^2 is a global minorant, hence |v| <= E(v)^(1/2).
        eta: 1.0,
        nu: 0.5,
        r0: f64::INFINITY,
        e_inf: f64::INFINITY,
        // Lipschitz bound of 2|x| + 5 pi on [-10, 10], summed over coordinates.
        l_e: d * (20.0 + 5.0 * PI),
        gamma: 0.0,
        c1: 1.0 + 5.0 * PI,
        c2: 6.0 * d,
        c3: 1.0,
        c4: 1.0,
    };
    Ok(ObjectiveSpec {
        name: "rastrigin".into(),
        dim,
        eval: Arc::new(|v: &[f64]| v.iter().map(|&x| rastrigin_1d(x)).sum()),
        minimizer: Some(vec![0.0; dim]),
        e_under: 0.0,
        constants,
        advisory_constants: true,
    })
}

/// `E(v) = |v - center|^2`.
pub fn quadratic(dim: usize, center: &[f64]) -> Result<ObjectiveSpec> {
    if dim == 0 || center.len() != dim {
        return Err(Error::InvalidDimension(format!(
            "quadratic needs a center of length dim = {dim}, got {}",
            center.len()
        )));
    }
    let c = center.to_vec();
    let center_sq: f64 = c.iter().map(|x| x * x).sum();
    let (c2, c3, c4) = if center_sq == 0.0 {
        (1.0, 1.0, 1.0)
    } else {
        // |v - c|^2 <= 2|v|^2 + 2|c|^2 and |v - c| >= |v|/2 once |v| >= 2|c|.
        (2.0 * center_sq.max(1.0), 0.25, 2.0 * center_sq.sqrt())
    };
    let constants = AssumptionConstants {
        eta: 1.0,
        nu: 0.5,
        r0: f64::INFINITY,
        e_inf: f64::INFINITY,
        l_e: 1.0,
        gamma: 1.0,
        c1: 1.0 + 2.0 * center_sq.sqrt(),
        c2,
        c3,
        c4,
    };
    let eval_center = c.clone();
    Ok(ObjectiveSpec {
        name: "quadratic".into(),
        dim,
        eval: Arc::new(move |v: &[f64]| v.iter().zip(&eval_center).map(|(a, b)| (a - b) * (a - b)).sum()),
        minimizer: Some(c),
        e_under: 0.0,
        constants,
        advisory_constants: false,
    })
}

/// Resolves an objective by its config name.
pub fn by_name(name: &str, dim: usize, center: Option<&[f64]>) -> Result<ObjectiveSpec> {
    match name {
        "rastrigin" => rastrigin(dim),
        "quadratic" => {
            let zero = vec![0.0; dim];
            quadratic(dim, center.unwrap_or(&zero))
        }
        other => Err(Error::InvalidConfig(format!("unknown objective '{other}'"))),
    }
}
