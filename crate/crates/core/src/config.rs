//! Run configuration: a strict TOML schema (unknown keys are rejected)
//! describing the manifold, the mechanical system, the candidate potential,
//! grids, and verification parameters.

use serde::{Deserialize, Serialize};

use crate::certifier::CertificateKind;
use crate::error::{Error, Result};
use crate::field::{FieldExpression, ScalarField};
use crate::geometry::{GridSpec, ManifoldModel};
use crate::mechanics::MechanicalSystem;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub manifold: ManifoldConfig,
    #[serde(default)]
    pub system: SystemConfig,
    pub field: Option<FieldConfig>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub certify: CertifyConfig,
    #[serde(default)]
    pub verification: VerificationConfig,
    pub flow: Option<FlowConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldConfig {
    /// "flat_torus", "sphere2", or "hyperbolic2"
    pub kind: String,
    /// flat_torus only
    pub periods: Option<Vec<f64>>,
    /// sphere2 only
    pub radius: Option<f64>,
    /// hyperbolic2 only (defaults to 1)
    pub scale: Option<f64>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// expression id of the potential U; defaults to "zero"
    pub potential: Option<String>,
    #[serde(default)]
    pub amplitude: f64,
    /// declared least k with Hess U ≤ kI; grid-estimated when absent
    pub hess_bound: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    pub expression: String,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub per_dim: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { per_dim: 64 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyConfig {
    /// "natural", "riemannian", "two_dim", or "general"
    pub theorem: String,
    /// required for "general"
    pub k: Option<f64>,
    /// strictness margin δ
    pub margin: f64,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        CertifyConfig {
            theorem: "natural".into(),
            k: None,
            margin: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerificationConfig {
    pub samples: usize,
    pub seed: u64,
    pub duality_tolerance: f64,
}

impl Default for VerificationConfig {
    fn default() -> Self {
        VerificationConfig {
            samples: 100,
            seed: 7,
            duality_tolerance: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub x0: Vec<f64>,
    pub p0: Vec<f64>,
    pub t_end: f64,
    pub step: f64,
}

impl RunConfig {
    /// Parses and validates a TOML document, reporting the offending line
    /// on syntax or schema errors.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| {
            let location = e
                .span()
                .map(|span| {
                    let line = text[..span.start.min(text.len())]
                        .chars()
                        .filter(|&c| c == '\n')
                        .count()
                        + 1;
                    format!(" (line {line})")
                })
                .unwrap_or_default();
            Error::Config(format!("{}{}", e.message(), location))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text)
    }

    fn validate(&self) -> Result<()> {
        self.model()?.validate()?;
        if self.grid.per_dim < 2 {
            return Err(Error::Config("grid.per_dim must be at least 2".into()));
        }
        if self.certify.margin <= 0.0 {
            return Err(Error::Config("certify.margin must be positive".into()));
        }
        if self.verification.duality_tolerance <= 0.0 {
            return Err(Error::Config("verification.duality_tolerance must be positive".into()));
        }
        self.certificate_kind()?;
        if let Some(field) = &self.field {
            FieldExpression::parse(&field.expression)?;
        }
        if let Some(potential) = &self.system.potential {
            FieldExpression::parse(potential)?;
        }
        if let Some(flow) = &self.flow {
            let dim = self.model()?.dim();
            if flow.x0.len() != dim || flow.p0.len() != dim {
                return Err(Error::Config(format!(
                    "flow.x0 and flow.p0 must have dimension {dim}"
                )));
            }
            if flow.step <= 0.0 {
                return Err(Error::Config("flow.step must be positive".into()));
            }
        }
        Ok(())
    }

    pub fn model(&self) -> Result<ManifoldModel> {
        match self.manifold.kind.as_str() {
            "flat_torus" => {
                let periods = self
                    .manifold
                    .periods
                    .clone()
                    .ok_or_else(|| Error::Config("flat_torus requires manifold.periods".into()))?;
                Ok(ManifoldModel::FlatTorus { periods })
            }
            "sphere2" => Ok(ManifoldModel::Sphere2 {
                radius: self.manifold.radius.unwrap_or(1.0),
            }),
            "hyperbolic2" => Ok(ManifoldModel::Hyperbolic2 {
                scale: self.manifold.scale.unwrap_or(1.0),
            }),
            other => Err(Error::Config(format!("unknown manifold kind `{other}`"))),
        }
    }

    pub fn system(&self) -> Result<MechanicalSystem> {
        let model = self.model()?;
        let potential = match &self.system.potential {
            None => ScalarField::zero(),
            Some(expr) => ScalarField::new(FieldExpression::parse(expr)?, self.system.amplitude),
        };
        match self.system.hess_bound {
            Some(bound) => MechanicalSystem::with_bound(model, potential, bound),
            None => MechanicalSystem::new(model, potential),
        }
    }

    pub fn field(&self) -> Result<ScalarField> {
        let f = self
            .field
            .as_ref()
            .ok_or_else(|| Error::Config("this command requires a [field] block".into()))?;
        Ok(ScalarField::new(
            FieldExpression::parse(&f.expression)?,
            f.amplitude,
        ))
    }

    pub fn grid_spec(&self) -> GridSpec {
        GridSpec::new(self.grid.per_dim)
    }

    pub fn certificate_kind(&self) -> Result<CertificateKind> {
        match self.certify.theorem.as_str() {
            "natural" => Ok(CertificateKind::Natural),
            "riemannian" => Ok(CertificateKind::Riemannian),
            "two_dim" => Ok(CertificateKind::TwoDim),
            "general" => Ok(CertificateKind::General),
            other => Err(Error::Config(format!("unknown certify.theorem `{other}`"))),
        }
    }
}
