//! Contrast functions and the empirical features they define.
//!
//! Quantiles follow the type-1 (inverse cdf) convention: the `ceil(alpha n)`-th
//! order statistic, which is an exact minimizer of the empirical mean pinball
//! loss. Indicators use the non-strict comparison `y <= theta`.

// Unused whenever std is linked into the build.
#[allow(unused_imports)]
use num_traits::Float;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

/// Average contrasts below this value are treated as a constant output.
pub const DEGENERACY_THRESHOLD: f64 = 1e-14;

/// A quantile level in the open interval `(0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct QuantileLevel(f64);

impl QuantileLevel {
    pub const MEDIAN: QuantileLevel = QuantileLevel(0.5);

    pub fn new(alpha: f64) -> Result<Self> {
        if alpha > 0.0 && alpha < 1.0 {
            Ok(Self(alpha))
        } else {
            Err(Error::ProbabilityDomain(alpha))
        }
    }

    pub const fn value(self) -> f64 {
        self.0
    }

    /// The level `1 - alpha`.
    pub fn complement(self) -> Self {
        Self(1.0 - self.0)
    }
}

impl fmt::Display for QuantileLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// The loss whose expectation is minimized by the feature of interest:
/// pinball for a quantile, squared error for the mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ContrastKind {
    Pinball(QuantileLevel),
    Squared,
}

impl ContrastKind {
    #[inline]
    pub fn loss(self, y: f64, theta: f64) -> f64 {
        match self {
            Self::Pinball(alpha) => pinball(y, theta, alpha),
            Self::Squared => (y - theta) * (y - theta),
        }
    }

    /// Empirical minimizer of the mean loss on `sample`.
    pub fn empirical_feature(self, sample: &[f64]) -> Result<f64> {
        match self {
            Self::Pinball(alpha) => {
                if sample.is_empty() {
                    return Err(Error::EmptySample);
                }
                let mut sorted = sample.to_vec();
                sorted.sort_unstable_by(f64::total_cmp);
                empirical_quantile(&sorted, alpha)
            }
            Self::Squared => mean(sample),
        }
    }

    pub fn alpha(self) -> Option<QuantileLevel> {
        match self {
            Self::Pinball(a) => Some(a),
            Self::Squared => None,
        }
    }
}

/// Pinball loss `(y - theta)(alpha - 1{y <= theta})`.
#[inline]
pub fn pinball(y: f64, theta: f64, alpha: QuantileLevel) -> f64 {
    let indicator = if y <= theta { 1.0 } else { 0.0 };
    (y - theta) * (alpha.0 - indicator)
}

/// Zero-based index of the `ceil(alpha n)`-th order statistic.
///
/// `alpha * n` within a relative 1e-12 of an integer is snapped to it, so
/// levels such as `0.3` with `n = 10` select the third statistic despite
/// binary rounding of `alpha`.
pub fn order_statistic_index(n: usize, alpha: QuantileLevel) -> usize {
    debug_assert!(n > 0);
    let t = alpha.0 * n as f64;
    let nearest = t.round();
    let k = if (t - nearest).abs() <= 1e-12 * t.max(1.0) {
        nearest
    } else {
        t.ceil()
    };
    (k as usize).clamp(1, n) - 1
}

/// Type-1 empirical quantile of an ascending sample.
pub fn empirical_quantile(sorted: &[f64], alpha: QuantileLevel) -> Result<f64> {
    if sorted.is_empty() {
        return Err(Error::EmptySample);
    }
    debug_assert!(sorted.windows(2).all(|w| w[0] <= w[1]), "sample must be sorted");
    Ok(sorted[order_statistic_index(sorted.len(), alpha)])
}

/// Mean of `y 1{y <= threshold}`.
pub fn truncated_expectation(sample: &[f64], threshold: f64) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    let s: f64 = sample.iter().filter(|&&y| y <= threshold).sum();
    Ok(s / sample.len() as f64)
}

pub fn mean(sample: &[f64]) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(sample.iter().sum::<f64>() / sample.len() as f64)
}

/// Mean loss of `sample` against the fixed value `theta`.
pub fn mean_contrast(sample: &[f64], theta: f64, kind: ContrastKind) -> Result<f64> {
    if sample.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(sample.iter().map(|&y| kind.loss(y, theta)).sum::<f64>() / sample.len() as f64)
}

/// `E[psi(Y, theta*(Y))]` on a sample: the normalizer of every index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AverageContrast {
    pub value: f64,
    /// The empirical feature `theta*` (quantile or mean).
    pub feature: f64,
    pub degenerate: bool,
}

impl AverageContrast {
    /// The value, refusing degenerate outputs.
    pub fn normalizer(&self) -> Result<f64> {
        if self.degenerate {
            Err(Error::DegenerateOutput(self.value))
        } else {
            Ok(self.value)
        }
    }
}

/// Empirical average contrast: `Upsilon(Y)` for pinball, `Var(Y)` for squared.
///
/// The pinball value is the mean loss at the empirical quantile, i.e. the
/// empirical minimum. It equals `alpha mean(Y) - E[Y 1{Y <= q}]` whenever
/// `alpha n` is an integer and differs from it by `q (k/n - alpha)` otherwise.
pub fn average_contrast(sample: &[f64], kind: ContrastKind) -> Result<AverageContrast> {
    let feature = kind.empirical_feature(sample)?;
    let value = mean_contrast(sample, feature, kind)?;
    Ok(AverageContrast {
        value,
        feature,
        degenerate: !(value >= DEGENERACY_THRESHOLD),
    })
}

/// Sorts a copy of `sample` ascending.
pub fn sorted(sample: &[f64]) -> Vec<f64> {
    let mut v = sample.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    v
}
