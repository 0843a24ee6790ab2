//! Versioned JSON model descriptions and the builtin model registry.

use std::path::Path;

use anyhow::{bail, ensure, Context, Result};
use qosa_core::distributions::{GaussianLaw, ScalarLaw};
use qosa_core::models::{AdditiveTerm, ModelSpec, ScalarMap};
use serde::{Deserialize, Serialize};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

pub const BUILTIN_IDS: [&str; 4] = ["gaussian-linear-2d", "gaussian-lognormal-2d", "exp-product", "laplace"];

/// Gaussian input block. Either `sigma` (full covariance) or, in two
/// dimensions, `sd` plus `rho`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianInputs {
    #[serde(default)]
    pub beta0: f64,
    pub beta: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sd: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapDescription {
    Linear { coef: f64 },
    Exp { coef: f64 },
    Square,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LawDescription {
    Exponential { rate: f64 },
    Normal { mean: f64, sd: f64 },
    Lognormal { log_mean: f64, log_sd: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermDescription {
    pub map: MapDescription,
    pub law: LawDescription,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelDescription {
    LinearGaussian(GaussianInputs),
    LogLinearGaussian(GaussianInputs),
    ExponentialProduct { lambda: f64, delta: f64 },
    ExponentialDifference { lambda: f64, delta: f64 },
    Additive {
        #[serde(default)]
        m0: f64,
        terms: Vec<TermDescription>,
    },
}

/// On-disk form: the description plus a schema version and optional id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    #[serde(flatten)]
    pub model: ModelDescription,
}

/// A resolved model with the id used in output rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedModel {
    pub id: String,
    pub model: ModelDescription,
}

fn bivariate_inputs(beta0: f64, rho: f64) -> GaussianInputs {
    GaussianInputs {
        beta0,
        beta: vec![1.0, 1.0],
        mu: None,
        sigma: None,
        sd: Some(vec![1.0, 2.0]),
        rho: Some(rho),
    }
}

pub fn builtin(id: &str) -> Option<ModelDescription> {
    Some(match id {
        "gaussian-linear-2d" => ModelDescription::LinearGaussian(bivariate_inputs(0.0, 0.0)),
        "gaussian-lognormal-2d" => ModelDescription::LogLinearGaussian(bivariate_inputs(0.0, 0.0)),
        "exp-product" => ModelDescription::ExponentialProduct { lambda: 0.1, delta: 1.0 },
        "laplace" => ModelDescription::ExponentialDifference { lambda: 1.0, delta: 1.0 },
        _ => return None,
    })
}

/// Resolves a builtin id or reads a JSON model file.
pub fn resolve(reference: &str) -> Result<NamedModel> {
    if let Some(model) = builtin(reference) {
        return Ok(NamedModel {
            id: reference.to_string(),
            model,
        });
    }
    let path = Path::new(reference);
    if !path.exists() {
        bail!("unknown model {reference:?}: not a builtin ({}) and no such file", BUILTIN_IDS.join(", "));
    }
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let file = parse_model_file(&text).with_context(|| format!("parsing model file {}", path.display()))?;
    let id = file
        .id
        .unwrap_or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| reference.to_string()));
    Ok(NamedModel { id, model: file.model })
}

pub fn parse_model_file(text: &str) -> Result<ModelFile> {
    let file: ModelFile = serde_json::from_str(text)?;
    ensure!(
        file.schema_version == MODEL_SCHEMA_VERSION,
        "unsupported model schema_version {} (expected {MODEL_SCHEMA_VERSION})",
        file.schema_version
    );
    file.model.build()?;
    Ok(file)
}

impl GaussianInputs {
    fn mean(&self) -> Vec<f64> {
        self.mu.clone().unwrap_or_else(|| vec![0.0; self.beta.len()])
    }

    /// `(sd, rho)` of a two-input block.
    pub fn bivariate(&self) -> Option<([f64; 2], f64)> {
        if self.beta.len() != 2 {
            return None;
        }
        match (&self.sigma, &self.sd, self.rho) {
            (None, Some(sd), rho) if sd.len() == 2 => Some(([sd[0], sd[1]], rho.unwrap_or(0.0))),
            (Some(s), None, None) if s.len() == 2 && s.iter().all(|r| r.len() == 2) => {
                let sd = [s[0][0].sqrt(), s[1][1].sqrt()];
                Some((sd, s[0][1] / (sd[0] * sd[1])))
            }
            _ => None,
        }
    }

    fn law(&self) -> Result<GaussianLaw> {
        let mu = self.mean();
        match (&self.sigma, &self.sd) {
            (Some(sigma), None) => {
                ensure!(self.rho.is_none(), "`rho` only combines with `sd`, not with `sigma`");
                Ok(GaussianLaw::from_rows(mu, sigma)?)
            }
            (None, Some(sd)) => {
                ensure!(sd.len() == 2 && mu.len() == 2, "`sd` + `rho` describes two inputs only; use `sigma`");
                Ok(GaussianLaw::bivariate([mu[0], mu[1]], [sd[0], sd[1]], self.rho.unwrap_or(0.0))?)
            }
            _ => bail!("give exactly one of `sigma` or `sd`"),
        }
    }

    fn with_rho(&self, rho: f64) -> Result<Self> {
        let Some((sd, _)) = self.bivariate() else {
            bail!("a correlation override needs a two-input Gaussian model");
        };
        Ok(Self {
            sigma: None,
            sd: Some(sd.to_vec()),
            rho: Some(rho),
            ..self.clone()
        })
    }
}

impl ModelDescription {
    pub fn build(&self) -> Result<ModelSpec> {
        Ok(match self {
            Self::LinearGaussian(g) => ModelSpec::linear_gaussian(g.beta0, g.beta.clone(), g.law()?)?,
            Self::LogLinearGaussian(g) => ModelSpec::log_linear_gaussian(g.beta0, g.beta.clone(), g.law()?)?,
            Self::ExponentialProduct { lambda, delta } => ModelSpec::exponential_product(*lambda, *delta)?,
            Self::ExponentialDifference { lambda, delta } => ModelSpec::exponential_difference(*lambda, *delta)?,
            Self::Additive { m0, terms } => {
                let terms = terms.iter().map(TermDescription::build).collect::<Result<Vec<_>>>()?;
                ModelSpec::additive(*m0, terms)?
            }
        })
    }

    pub fn gaussian(&self) -> Option<&GaussianInputs> {
        match self {
            Self::LinearGaussian(g) | Self::LogLinearGaussian(g) => Some(g),
            _ => None,
        }
    }

    /// Current correlation of a two-input Gaussian model.
    pub fn rho(&self) -> Option<f64> {
        self.gaussian().and_then(|g| g.bivariate()).map(|(_, r)| r)
    }

    pub fn with_rho(&self, rho: f64) -> Result<Self> {
        Ok(match self {
            Self::LinearGaussian(g) => Self::LinearGaussian(g.with_rho(rho)?),
            Self::LogLinearGaussian(g) => Self::LogLinearGaussian(g.with_rho(rho)?),
            _ => bail!("a correlation override needs a two-input Gaussian model"),
        })
    }
}

impl TermDescription {
    fn build(&self) -> Result<AdditiveTerm> {
        let map = match self.map {
            MapDescription::Linear { coef } => ScalarMap::Linear { coef },
            MapDescription::Exp { coef } => ScalarMap::Exp { coef },
            MapDescription::Square => ScalarMap::Square,
        };
        let law = match self.law {
            LawDescription::Exponential { rate } => ScalarLaw::exponential(rate)?,
            LawDescription::Normal { mean, sd } => ScalarLaw::normal(mean, sd)?,
            LawDescription::Lognormal { log_mean, log_sd } => ScalarLaw::lognormal(log_mean, log_sd)?,
        };
        Ok(AdditiveTerm { map, law })
    }
}
