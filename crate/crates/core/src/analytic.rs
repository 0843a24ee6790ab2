//! Closed-form index values for the registered test models.
//!
//! Every family is reduced to a normalized cost table `c(J)`; first-order,
//! total, group and Shapley indices are then read off the table.

// Unused whenever std is linked into the build.
#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::coalition::Coalition;
use crate::contrast::{ContrastKind, QuantileLevel};
use crate::distributions::{ExponentialDifferenceLaw, ExponentialProductLaw, GaussianLaw, ScalarLaw};
use crate::error::{invalid, Error, Result};
use crate::models::{ModelSpec, ScalarMap};
use crate::shapley::{shapley_exact, CostTable};
use crate::special::{std_normal_cdf, std_normal_quantile};

/// Largest input dimension evaluated by full coalition enumeration.
pub const ANALYTIC_DIM_CAP: usize = 15;

/// How the Gaussian exponent `beta^T X` reaches the output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputMap {
    Identity,
    Exp,
}

/// Conditional standard deviations of a Gaussian exponent `beta^T X` given
/// every subset of inputs, indexed by the mask of the conditioning set.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianExponent {
    d: usize,
    sd_given: Vec<f64>,
}

impl GaussianExponent {
    pub fn from_law(beta: &[f64], law: &GaussianLaw) -> Result<Self> {
        let d = law.dim();
        if beta.len() != d {
            return Err(Error::DimensionMismatch { expected: d, actual: beta.len() });
        }
        if d > ANALYTIC_DIM_CAP {
            return Err(Error::DimensionCap { d, cap: ANALYTIC_DIM_CAP });
        }
        let mut sd_given = vec![0.0; 1 << d];
        for (mask, slot) in sd_given.iter_mut().enumerate() {
            let given = Coalition::from_mask(mask as u64);
            *slot = if given == Coalition::full(d) {
                0.0
            } else {
                law.conditioning(given)?.residual_variance(beta).max(0.0).sqrt()
            };
        }
        Ok(Self { d, sd_given })
    }

    /// Two inputs with correlation `rho` in `[-1, 1]`; the endpoints are
    /// evaluated through the `sqrt(1 - rho^2)` limit instead of inverting.
    pub fn bivariate(beta: [f64; 2], sd: [f64; 2], rho: f64) -> Result<Self> {
        if !(-1.0..=1.0).contains(&rho) {
            return Err(invalid("rho", "must lie in [-1, 1]"));
        }
        if sd.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(invalid("sd", "must be positive and finite"));
        }
        let (a, b) = (beta[0] * sd[0], beta[1] * sd[1]);
        let total = (a * a + b * b + 2.0 * rho * a * b).max(0.0).sqrt();
        let r = (1.0 - rho * rho).max(0.0).sqrt();
        Ok(Self {
            d: 2,
            sd_given: vec![total, b.abs() * r, a.abs() * r, 0.0],
        })
    }

    /// Independent normal inputs with per-input spreads `|beta_i| sd_i`.
    pub fn independent(spreads: &[f64]) -> Result<Self> {
        let d = spreads.len();
        if d == 0 || d > ANALYTIC_DIM_CAP {
            return Err(Error::DimensionCap { d, cap: ANALYTIC_DIM_CAP });
        }
        let sd_given = Coalition::all(d)
            .map(|g| g.complement(d).iter().map(|k| spreads[k] * spreads[k]).sum::<f64>().sqrt())
            .collect();
        Ok(Self { d, sd_given })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn sd_given(&self, given: Coalition) -> f64 {
        self.sd_given[given.mask() as usize]
    }

    pub fn total_sd(&self) -> f64 {
        self.sd_given[0]
    }

    /// Normalized cost `c(J)`, a function of `s = sd(beta^T X | X_{-J})`.
    pub fn cost_table(&self, map: OutputMap, kind: ContrastKind) -> Result<CostTable> {
        let sigma = self.total_sd();
        if sigma < 1e-12 {
            return Err(Error::DegenerateOutput(sigma));
        }
        let cost: &dyn Fn(f64) -> f64 = match (map, kind) {
            (OutputMap::Identity, ContrastKind::Pinball(_)) => &|s| s / sigma,
            (OutputMap::Identity, ContrastKind::Squared) => &|s| (s / sigma) * (s / sigma),
            (OutputMap::Exp, ContrastKind::Pinball(alpha)) => {
                let z = std_normal_quantile(alpha.value())?;
                let a = alpha.value();
                let denom = a - std_normal_cdf(z - sigma);
                return self.table_from(move |s| (a - std_normal_cdf(z - s)) / denom);
            }
            (OutputMap::Exp, ContrastKind::Squared) => {
                let v = sigma * sigma;
                return self.table_from(move |s| v.exp() * -libm::expm1(-s * s) / libm::expm1(v));
            }
        };
        self.table_from(cost)
    }

    fn table_from<F: Fn(f64) -> f64>(&self, cost: F) -> Result<CostTable> {
        let d = self.d;
        CostTable::from_fn(d, |j| {
            Ok(if j == Coalition::full(d) {
                1.0
            } else {
                cost(self.sd_given(j.complement(d)))
            })
        })
    }
}

/// Kucherenko quantile indices of one input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KucherenkoValues {
    /// `E|q(Y) - q(Y | X_i)|`
    pub absolute: f64,
    /// `E[(q(Y) - q(Y | X_i))^2]`
    pub squared: f64,
    pub normalized_absolute: f64,
    pub normalized_squared: f64,
}

/// All closed-form indices of a model at one contrast.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticIndexSet {
    pub contrast: ContrastKind,
    pub first_order: Vec<f64>,
    pub total: Vec<f64>,
    pub shapley: Vec<f64>,
    pub kucherenko: Option<Vec<KucherenkoValues>>,
    pub costs: CostTable,
}

impl AnalyticIndexSet {
    pub fn from_costs(contrast: ContrastKind, costs: CostTable) -> Result<Self> {
        use crate::shapley::CostFunction;
        let d = costs.dim();
        let full = Coalition::full(d);
        let first_order = (0..d).map(|i| 1.0 - costs.cost(full.without(i))).collect();
        let total = (0..d).map(|i| costs.cost(Coalition::singleton(i))).collect();
        let shapley = shapley_exact(&costs)?.values;
        Ok(Self {
            contrast,
            first_order,
            total,
            shapley,
            kucherenko: None,
            costs,
        })
    }

    pub fn dim(&self) -> usize {
        self.first_order.len()
    }

    /// Closed index of a group: `1 - c(-group)`.
    pub fn group(&self, group: Coalition) -> f64 {
        use crate::shapley::CostFunction;
        1.0 - self.costs.cost(group.complement(self.dim()))
    }

    /// Interaction index of a group by inclusion-exclusion over its subsets.
    pub fn interaction(&self, group: Coalition) -> f64 {
        let mut acc = 0.0;
        for sub in Coalition::all(self.dim()).filter(|s| !s.is_empty() && s.is_subset_of(group)) {
            let sign = if (group.len() - sub.len()) % 2 == 0 { 1.0 } else { -1.0 };
            acc += sign * self.group(sub);
        }
        acc
    }
}

/// Closed-form indices of `model` for the given contrast.
pub fn analytic_indices(model: &ModelSpec, kind: ContrastKind) -> Result<AnalyticIndexSet> {
    match model {
        ModelSpec::LinearGaussian { beta, law, .. } => gaussian_indices(&GaussianExponent::from_law(beta, law)?, OutputMap::Identity, kind),
        ModelSpec::LogLinearGaussian { beta, law, .. } => gaussian_indices(&GaussianExponent::from_law(beta, law)?, OutputMap::Exp, kind),
        ModelSpec::ExponentialProduct { lambda, delta } => exponential_product_indices(*lambda, *delta, kind),
        ModelSpec::ExponentialDifference { lambda, delta } => exponential_difference_indices(*lambda, *delta, kind),
        ModelSpec::Additive { terms, .. } => {
            let d = terms.len();
            if d > ANALYTIC_DIM_CAP {
                return Err(Error::DimensionCap { d, cap: ANALYTIC_DIM_CAP });
            }
            let spreads: Option<Vec<f64>> = terms
                .iter()
                .map(|t| match (t.map, t.law) {
                    (ScalarMap::Linear { coef }, ScalarLaw::Normal { sd, .. }) => Some((coef * sd).abs()),
                    _ => None,
                })
                .collect();
            if let Some(spreads) = spreads {
                return gaussian_indices(&GaussianExponent::independent(&spreads)?, OutputMap::Identity, kind);
            }
            if kind != ContrastKind::Squared {
                return Err(Error::Unsupported(format!("closed-form quantile indices for this {} model", model.kind_name())));
            }
            let variances: Vec<f64> = terms
                .iter()
                .map(|t| term_variance(t.map, &t.law))
                .collect::<Option<_>>()
                .ok_or_else(|| Error::Unsupported("closed-form term variance".into()))?;
            additive_variance_indices(&variances)
        }
    }
}

pub fn gaussian_indices(exponent: &GaussianExponent, map: OutputMap, kind: ContrastKind) -> Result<AnalyticIndexSet> {
    AnalyticIndexSet::from_costs(kind, exponent.cost_table(map, kind)?)
}

/// `(S_i, ST_i)` of a linear Gaussian model; independent of the level.
pub fn gaussian_linear_qosa(beta: &[f64], law: &GaussianLaw, i: usize) -> Result<(f64, f64)> {
    let set = gaussian_indices(&GaussianExponent::from_law(beta, law)?, OutputMap::Identity, ContrastKind::Pinball(QuantileLevel::MEDIAN))?;
    pick(&set.first_order, i).and_then(|s| Ok((s, pick(&set.total, i)?)))
}

pub fn lognormal_qosa(beta: &[f64], law: &GaussianLaw, i: usize, alpha: QuantileLevel) -> Result<(f64, f64)> {
    let set = gaussian_indices(&GaussianExponent::from_law(beta, law)?, OutputMap::Exp, ContrastKind::Pinball(alpha))?;
    pick(&set.first_order, i).and_then(|s| Ok((s, pick(&set.total, i)?)))
}

pub fn gaussian_linear_qose(beta: &[f64], law: &GaussianLaw, i: usize) -> Result<f64> {
    let set = gaussian_indices(&GaussianExponent::from_law(beta, law)?, OutputMap::Identity, ContrastKind::Pinball(QuantileLevel::MEDIAN))?;
    pick(&set.shapley, i)
}

pub fn lognormal_qose(beta: &[f64], law: &GaussianLaw, i: usize, alpha: QuantileLevel) -> Result<f64> {
    let set = gaussian_indices(&GaussianExponent::from_law(beta, law)?, OutputMap::Exp, ContrastKind::Pinball(alpha))?;
    pick(&set.shapley, i)
}

fn pick(v: &[f64], i: usize) -> Result<f64> {
    v.get(i).copied().ok_or_else(|| invalid("input", format!("index {i} out of range")))
}

/// Shared `(S, ST)` of the product of two exponentials.
pub fn exponential_product_qosa(lambda: f64, delta: f64, alpha: QuantileLevel) -> Result<(f64, f64)> {
    let law = ExponentialProductLaw::new(lambda, delta)?;
    let a = alpha.value();
    let q = law.quantile(a)?;
    let trunc = law.truncated_mean(q)?;
    let total = (a - 1.0) * libm::log1p(-a) / (a - lambda * delta * trunc);
    Ok((1.0 - total, total))
}

fn exponential_product_indices(lambda: f64, delta: f64, kind: ContrastKind) -> Result<AnalyticIndexSet> {
    let total = match kind {
        ContrastKind::Pinball(alpha) => exponential_product_qosa(lambda, delta, alpha)?.1,
        // E[Var(Y | X_other)] / Var(Y) = (2 / (lambda delta)^2) / (3 / (lambda delta)^2)
        ContrastKind::Squared => 2.0 / 3.0,
    };
    AnalyticIndexSet::from_costs(kind, CostTable::new(2, vec![0.0, total, total, 1.0])?)
}

fn exponential_difference_indices(lambda: f64, delta: f64, kind: ContrastKind) -> Result<AnalyticIndexSet> {
    let (c1, c2) = match kind {
        ContrastKind::Pinball(alpha) => laplace_qosa_costs(lambda, delta, alpha)?,
        ContrastKind::Squared => {
            let (v1, v2) = (1.0 / (lambda * lambda), 1.0 / (delta * delta));
            (v1 / (v1 + v2), v2 / (v1 + v2))
        }
    };
    let mut set = AnalyticIndexSet::from_costs(kind, CostTable::new(2, vec![0.0, c1, c2, 1.0])?)?;
    if let ContrastKind::Pinball(alpha) = kind {
        if lambda == 1.0 && delta == 1.0 {
            set.kucherenko = Some(laplace_kucherenko(alpha).to_vec());
        }
    }
    Ok(set)
}

/// `(c({1}), c({2}))` for `X1 - X2`. The normalizer comes from quadrature.
fn laplace_qosa_costs(lambda: f64, delta: f64, alpha: QuantileLevel) -> Result<(f64, f64)> {
    let law = ExponentialDifferenceLaw::new(lambda, delta)?;
    let a = alpha.value();
    let q = law.quantile(a)?;
    let upsilon = a * law.mean() - law.truncated_mean(q)?;
    // Conditioning on the other input leaves a shifted exponential; the
    // negated one is evaluated at the complementary level.
    let c1 = -(1.0 - a) * libm::log1p(-a) / lambda / upsilon;
    let c2 = -a * a.ln() / delta / upsilon;
    Ok((c1, c2))
}

/// `(S_1, ST_1, S_2, ST_2)` of the exponential difference.
pub fn laplace_qosa(lambda: f64, delta: f64, alpha: QuantileLevel) -> Result<[f64; 4]> {
    let (c1, c2) = laplace_qosa_costs(lambda, delta, alpha)?;
    Ok([1.0 - c2, c1, 1.0 - c1, c2])
}

/// Kucherenko indices of `X1 - X2` with unit exponential inputs.
pub fn laplace_kucherenko(alpha: QuantileLevel) -> [KucherenkoValues; 2] {
    let a = alpha.value();
    let far = -(2.0 * a * (1.0 - a)).ln();
    let ln2 = core::f64::consts::LN_2;
    let gamma = if a >= 0.5 { [far, ln2] } else { [ln2, far] };
    let abs = gamma.map(|g| g + 2.0 * (-g).exp() - 1.0);
    let sq = gamma.map(|g| g * g - 2.0 * g + 2.0);
    let (sa, ss) = (abs[0] + abs[1], sq[0] + sq[1]);
    [0, 1].map(|i| KucherenkoValues {
        absolute: abs[i],
        squared: sq[i],
        normalized_absolute: abs[i] / sa,
        normalized_squared: sq[i] / ss,
    })
}

/// `Var(m(X))` when it has a closed form.
fn term_variance(map: ScalarMap, law: &ScalarLaw) -> Option<f64> {
    match (map, *law) {
        (ScalarMap::Linear { coef }, _) => Some(coef * coef * law.variance()),
        (ScalarMap::Exp { coef }, ScalarLaw::Normal { mean, sd }) => {
            let v = coef * coef * sd * sd;
            Some((2.0 * coef * mean + v).exp() * libm::expm1(v))
        }
        (ScalarMap::Square, ScalarLaw::Normal { mean, sd }) => {
            let (m2, s2) = (mean * mean, sd * sd);
            Some(4.0 * m2 * s2 + 2.0 * s2 * s2)
        }
        // E X^4 - (E X^2)^2 = 24/r^4 - 4/r^4
        (ScalarMap::Square, ScalarLaw::Exponential { rate }) => Some(20.0 / rate.powi(4)),
        _ => None,
    }
}

/// Variance indices of an additive model with independent terms.
pub fn additive_variance_indices(variances: &[f64]) -> Result<AnalyticIndexSet> {
    let d = variances.len();
    let total: f64 = variances.iter().sum();
    if total < crate::contrast::DEGENERACY_THRESHOLD {
        return Err(Error::DegenerateOutput(total));
    }
    let costs = CostTable::from_fn(d, |j| {
        Ok(if j == Coalition::full(d) { 1.0 } else { j.iter().map(|i| variances[i]).sum::<f64>() / total })
    })?;
    AnalyticIndexSet::from_costs(ContrastKind::Squared, costs)
}
