//! Models `Y = eta(X)` paired with their input laws, and their exact
//! conditional features (quantiles and means of `Y | X_J`).

// Unused whenever std is linked into the build.
#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::coalition::Coalition;
use crate::contrast::{ContrastKind, QuantileLevel};
use crate::distributions::{
    ExponentialDifferenceLaw, ExponentialProductLaw, GaussianLaw, InputLaw, SampleMatrix, ScalarLaw,
};
use crate::error::{invalid, Error, Result};
use crate::rng::RandomStream;
use crate::special::std_normal_quantile;

/// A registered one-dimensional map `m_i` of an additive model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScalarMap {
    /// `x -> coef * x`
    Linear { coef: f64 },
    /// `x -> exp(coef * x)`
    Exp { coef: f64 },
    /// `x -> x^2`
    Square,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Monotone {
    Increasing,
    Decreasing,
    Constant,
}

impl ScalarMap {
    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Self::Linear { coef } => coef * x,
            Self::Exp { coef } => (coef * x).exp(),
            Self::Square => x * x,
        }
    }

    fn monotonicity(self, law: &ScalarLaw) -> Option<Monotone> {
        let sign = |c: f64| {
            if c > 0.0 {
                Monotone::Increasing
            } else if c < 0.0 {
                Monotone::Decreasing
            } else {
                Monotone::Constant
            }
        };
        match self {
            Self::Linear { coef } | Self::Exp { coef } => Some(sign(coef)),
            Self::Square => (law.support_min() >= 0.0).then_some(Monotone::Increasing),
        }
    }

    /// `E[m(X)]` when it has a closed form.
    fn mean_under(self, law: &ScalarLaw) -> Option<f64> {
        match (self, *law) {
            (Self::Linear { coef }, _) => Some(coef * law.mean()),
            (Self::Square, _) => Some(law.variance() + law.mean() * law.mean()),
            (Self::Exp { coef }, ScalarLaw::Normal { mean, sd }) => Some((coef * mean + 0.5 * coef * coef * sd * sd).exp()),
            (Self::Exp { coef }, ScalarLaw::Exponential { rate }) if coef < rate => Some(rate / (rate - coef)),
            (Self::Exp { coef }, ScalarLaw::LogNormal { .. }) if coef == 0.0 => Some(1.0),
            _ => None,
        }
    }

    /// Quantile of `m(X)` at level `alpha` for maps monotone on the support.
    fn quantile_under(self, law: &ScalarLaw, alpha: QuantileLevel) -> Option<f64> {
        match self.monotonicity(law)? {
            Monotone::Constant => Some(self.apply(0.0)),
            Monotone::Increasing => law.quantile(alpha.value()).ok().map(|q| self.apply(q)),
            Monotone::Decreasing => law.quantile(1.0 - alpha.value()).ok().map(|q| self.apply(q)),
        }
    }

    fn validate(self) -> Result<()> {
        match self {
            Self::Linear { coef } | Self::Exp { coef } if !coef.is_finite() => Err(invalid("coef", "must be finite")),
            _ => Ok(()),
        }
    }
}

/// One term `m_i(X_i)` of an additive model with its independent input law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdditiveTerm {
    pub map: ScalarMap,
    pub law: ScalarLaw,
}

/// The registered model families.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelSpec {
    /// `beta0 + beta^T X`, `X ~ N(mu, Sigma)`.
    LinearGaussian { beta0: f64, beta: Vec<f64>, law: GaussianLaw },
    /// `exp(beta0 + beta^T X)`, `X ~ N(mu, Sigma)`.
    LogLinearGaussian { beta0: f64, beta: Vec<f64>, law: GaussianLaw },
    /// `X1 * X2` with independent `X1 ~ Exp(lambda)`, `X2 ~ Exp(delta)`.
    ExponentialProduct { lambda: f64, delta: f64 },
    /// `X1 - X2` with independent `X1 ~ Exp(lambda)`, `X2 ~ Exp(delta)`.
    ExponentialDifference { lambda: f64, delta: f64 },
    /// `m0 + sum_i m_i(X_i)` with independent inputs.
    Additive { m0: f64, terms: Vec<AdditiveTerm> },
}

impl ModelSpec {
    pub fn linear_gaussian(beta0: f64, beta: Vec<f64>, law: GaussianLaw) -> Result<Self> {
        let m = Self::LinearGaussian { beta0, beta, law };
        m.validate()?;
        Ok(m)
    }

    pub fn log_linear_gaussian(beta0: f64, beta: Vec<f64>, law: GaussianLaw) -> Result<Self> {
        let m = Self::LogLinearGaussian { beta0, beta, law };
        m.validate()?;
        Ok(m)
    }

    pub fn exponential_product(lambda: f64, delta: f64) -> Result<Self> {
        let m = Self::ExponentialProduct { lambda, delta };
        m.validate()?;
        Ok(m)
    }

    pub fn exponential_difference(lambda: f64, delta: f64) -> Result<Self> {
        let m = Self::ExponentialDifference { lambda, delta };
        m.validate()?;
        Ok(m)
    }

    pub fn additive(m0: f64, terms: Vec<AdditiveTerm>) -> Result<Self> {
        let m = Self::Additive { m0, terms };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::LinearGaussian { beta0, beta, law } | Self::LogLinearGaussian { beta0, beta, law } => {
                if beta.len() != law.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: law.dim(),
                        actual: beta.len(),
                    });
                }
                if !beta0.is_finite() || beta.iter().any(|b| !b.is_finite()) {
                    return Err(invalid("beta", "coefficients must be finite"));
                }
                if law.dim() > Coalition::MAX_PLAYERS {
                    return Err(invalid("beta", "too many inputs"));
                }
                Ok(())
            }
            Self::ExponentialProduct { lambda, delta } => ExponentialProductLaw::new(*lambda, *delta).map(drop),
            Self::ExponentialDifference { lambda, delta } => ExponentialDifferenceLaw::new(*lambda, *delta).map(drop),
            Self::Additive { m0, terms } => {
                if terms.is_empty() || terms.len() > Coalition::MAX_PLAYERS {
                    return Err(invalid("terms", "an additive model needs between 1 and 63 terms"));
                }
                if !m0.is_finite() {
                    return Err(invalid("m0", "must be finite"));
                }
                for t in terms {
                    t.law.validate()?;
                    t.map.validate()?;
                }
                Ok(())
            }
        }
    }

    /// Stable identifier of the model family.
    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::LinearGaussian { .. } => "linear_gaussian",
            Self::LogLinearGaussian { .. } => "log_linear_gaussian",
            Self::ExponentialProduct { .. } => "exponential_product",
            Self::ExponentialDifference { .. } => "exponential_difference",
            Self::Additive { .. } => "additive",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::LinearGaussian { beta, .. } | Self::LogLinearGaussian { beta, .. } => beta.len(),
            Self::ExponentialProduct { .. } | Self::ExponentialDifference { .. } => 2,
            Self::Additive { terms, .. } => terms.len(),
        }
    }

    pub fn input_law(&self) -> InputLaw {
        match self {
            Self::LinearGaussian { law, .. } | Self::LogLinearGaussian { law, .. } => InputLaw::Gaussian(law.clone()),
            Self::ExponentialProduct { lambda, delta } | Self::ExponentialDifference { lambda, delta } => {
                InputLaw::Independent(vec![
                    ScalarLaw::Exponential { rate: *lambda },
                    ScalarLaw::Exponential { rate: *delta },
                ])
            }
            Self::Additive { terms, .. } => InputLaw::Independent(terms.iter().map(|t| t.law).collect()),
        }
    }

    /// `eta(x)` without the length check.
    #[inline]
    pub(crate) fn eval_row(&self, x: &[f64]) -> f64 {
        match self {
            Self::LinearGaussian { beta0, beta, .. } => beta0 + dot(beta, x),
            Self::LogLinearGaussian { beta0, beta, .. } => (beta0 + dot(beta, x)).exp(),
            Self::ExponentialProduct { .. } => x[0] * x[1],
            Self::ExponentialDifference { .. } => x[0] - x[1],
            Self::Additive { m0, terms } => m0 + terms.iter().zip(x).map(|(t, &xi)| t.map.apply(xi)).sum::<f64>(),
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                actual: x.len(),
            });
        }
        Ok(self.eval_row(x))
    }

    /// Draws `n` inputs from the input law and evaluates the model on each.
    pub fn sample(&self, n: usize, stream: &RandomStream) -> EvaluatedSample {
        let inputs = self.input_law().sample(n, stream);
        let outputs = inputs.iter_rows().map(|x| self.eval_row(x)).collect();
        EvaluatedSample {
            inputs,
            outputs,
            stream: *stream,
        }
    }

    /// Exact conditional feature of `Y | X_given` for the given contrast:
    /// the alpha-quantile for pinball, the mean for squared loss.
    pub fn conditional_feature(&self, given: Coalition, kind: ContrastKind) -> Result<ConditionalFeature> {
        let d = self.dim();
        if !given.is_subset_of(Coalition::full(d)) {
            return Err(invalid("given", "coalition exceeds the model dimension"));
        }
        let form = match self {
            Self::LinearGaussian { beta0, beta, law } => gaussian_form(*beta0, beta, law, given, kind, false)?,
            Self::LogLinearGaussian { beta0, beta, law } => gaussian_form(*beta0, beta, law, given, kind, true)?,
            Self::ExponentialProduct { lambda, delta } => product_form(*lambda, *delta, given, kind)?,
            Self::ExponentialDifference { lambda, delta } => difference_form(*lambda, *delta, given, kind)?,
            Self::Additive { m0, terms } => additive_form(*m0, terms, given, kind)?,
        };
        Ok(ConditionalFeature { given, form })
    }

    pub fn conditional_quantile(&self, given: Coalition, alpha: QuantileLevel) -> Result<ConditionalFeature> {
        self.conditional_feature(given, ContrastKind::Pinball(alpha))
    }

    /// Exact `q^alpha(Y | X_given = values)`, with `values` listed in
    /// increasing index order of `given`.
    pub fn conditional_output_quantile_exact(&self, given: Coalition, values: &[f64], alpha: QuantileLevel) -> Result<f64> {
        if values.len() != given.len() {
            return Err(Error::DimensionMismatch {
                expected: given.len(),
                actual: values.len(),
            });
        }
        let feature = self.conditional_quantile(given, alpha)?;
        let mut row = vec![0.0; self.dim()];
        for (i, &v) in given.iter().zip(values) {
            row[i] = v;
        }
        Ok(feature.eval(&row))
    }

    pub fn supports_exact(&self, given: Coalition, kind: ContrastKind) -> bool {
        self.conditional_feature(given, kind).is_ok()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Inputs, outputs and the stream that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluatedSample {
    pub inputs: SampleMatrix,
    pub outputs: Vec<f64>,
    pub stream: RandomStream,
}

/// A prepared map from an input row to a conditional feature of the output.
/// Only the coordinates in `given` are read.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalFeature {
    given: Coalition,
    form: FeatureForm,
}

#[derive(Debug, Clone, PartialEq)]
enum FeatureForm {
    /// `post(offset + sum_j m_j(x_j))`
    Additive {
        offset: f64,
        terms: Vec<(usize, ScalarMap)>,
        exp: bool,
    },
    /// `scale * prod_j x_j`
    Product { scale: f64, factors: Vec<usize> },
}

impl ConditionalFeature {
    pub fn given(&self) -> Coalition {
        self.given
    }

    #[inline]
    pub fn eval(&self, row: &[f64]) -> f64 {
        match &self.form {
            FeatureForm::Additive { offset, terms, exp } => {
                let s = offset + terms.iter().map(|&(j, m)| m.apply(row[j])).sum::<f64>();
                if *exp {
                    s.exp()
                } else {
                    s
                }
            }
            FeatureForm::Product { scale, factors } => factors.iter().fold(*scale, |acc, &j| acc * row[j]),
        }
    }
}

fn gaussian_form(
    beta0: f64,
    beta: &[f64],
    law: &GaussianLaw,
    given: Coalition,
    kind: ContrastKind,
    log_linear: bool,
) -> Result<FeatureForm> {
    let c = law.conditioning(given)?;
    let mut offset = beta0;
    for (a, &k) in c.kept.iter().enumerate() {
        let mut shift = c.mean_kept[a];
        for b in 0..c.given.len() {
            shift -= c.coef[(a, b)] * c.mean_given[b];
        }
        offset += beta[k] * shift;
    }
    let terms = c
        .given
        .iter()
        .enumerate()
        .map(|(b, &j)| {
            let slope = beta[j] + c.kept.iter().enumerate().map(|(a, &k)| beta[k] * c.coef[(a, b)]).sum::<f64>();
            (j, ScalarMap::Linear { coef: slope })
        })
        .collect();
    let variance = c.residual_variance(beta);
    offset += match (kind, log_linear) {
        (ContrastKind::Pinball(alpha), _) => variance.sqrt() * std_normal_quantile(alpha.value())?,
        (ContrastKind::Squared, false) => 0.0,
        (ContrastKind::Squared, true) => 0.5 * variance,
    };
    Ok(FeatureForm::Additive {
        offset,
        terms,
        exp: log_linear,
    })
}

fn product_form(lambda: f64, delta: f64, given: Coalition, kind: ContrastKind) -> Result<FeatureForm> {
    let law = [ScalarLaw::exponential(lambda)?, ScalarLaw::exponential(delta)?];
    let marginal = |i: usize| -> Result<f64> {
        match kind {
            ContrastKind::Pinball(alpha) => law[i].quantile(alpha.value()),
            ContrastKind::Squared => Ok(law[i].mean()),
        }
    };
    Ok(match given.mask() {
        0b00 => {
            let product = ExponentialProductLaw::new(lambda, delta)?;
            let scale = match kind {
                ContrastKind::Pinball(alpha) => product.quantile(alpha.value())?,
                ContrastKind::Squared => product.mean(),
            };
            FeatureForm::Product { scale, factors: vec![] }
        }
        0b01 => FeatureForm::Product {
            scale: marginal(1)?,
            factors: vec![0],
        },
        0b10 => FeatureForm::Product {
            scale: marginal(0)?,
            factors: vec![1],
        },
        _ => FeatureForm::Product {
            scale: 1.0,
            factors: vec![0, 1],
        },
    })
}

fn difference_form(lambda: f64, delta: f64, given: Coalition, kind: ContrastKind) -> Result<FeatureForm> {
    let x1 = ScalarLaw::exponential(lambda)?;
    let x2 = ScalarLaw::exponential(delta)?;
    let plus = (0, ScalarMap::Linear { coef: 1.0 });
    let minus = (1, ScalarMap::Linear { coef: -1.0 });
    let (offset, terms) = match (given.mask(), kind) {
        (0b00, ContrastKind::Pinball(alpha)) => (ExponentialDifferenceLaw::new(lambda, delta)?.quantile(alpha.value())?, vec![]),
        (0b00, ContrastKind::Squared) => (x1.mean() - x2.mean(), vec![]),
        // q^alpha(x1 - X2) = x1 - q^{1-alpha}(X2)
        (0b01, ContrastKind::Pinball(alpha)) => (-x2.quantile(1.0 - alpha.value())?, vec![plus]),
        (0b01, ContrastKind::Squared) => (-x2.mean(), vec![plus]),
        (0b10, ContrastKind::Pinball(alpha)) => (x1.quantile(alpha.value())?, vec![minus]),
        (0b10, ContrastKind::Squared) => (x1.mean(), vec![minus]),
        _ => (0.0, vec![plus, minus]),
    };
    Ok(FeatureForm::Additive {
        offset,
        terms,
        exp: false,
    })
}

fn additive_form(m0: f64, terms: &[AdditiveTerm], given: Coalition, kind: ContrastKind) -> Result<FeatureForm> {
    let d = terms.len();
    let rest: Vec<&AdditiveTerm> = given.complement(d).iter().map(|k| &terms[k]).collect();
    let unsupported = || Error::Unsupported(format!("additive partial sum over inputs {}", given.complement(d)));
    let rest_feature = match kind {
        ContrastKind::Squared => rest
            .iter()
            .map(|t| t.map.mean_under(&t.law))
            .sum::<Option<f64>>()
            .ok_or_else(unsupported)?,
        ContrastKind::Pinball(alpha) => match rest.as_slice() {
            [] => 0.0,
            [t] => t.map.quantile_under(&t.law, alpha).ok_or_else(unsupported)?,
            many => {
                // Sums of linear maps of normal inputs stay normal.
                let mut mean = 0.0;
                let mut var = 0.0;
                for t in many {
                    match (t.map, t.law) {
                        (ScalarMap::Linear { coef }, ScalarLaw::Normal { mean: mu, sd }) => {
                            mean += coef * mu;
                            var += coef * coef * sd * sd;
                        }
                        _ => return Err(unsupported()),
                    }
                }
                mean + var.sqrt() * std_normal_quantile(alpha.value())?
            }
        },
    };
    Ok(FeatureForm::Additive {
        offset: m0 + rest_feature,
        terms: given.iter().map(|j| (j, terms[j].map)).collect(),
        exp: false,
    })
}
