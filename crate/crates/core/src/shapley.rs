//! Coalition games: cost tables, exact Shapley aggregation and an
//! antithetic permutation sampler.

// Unused whenever std is linked into the build.
#[allow(unused_imports)]
use num_traits::Float;
use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;
use core::cell::RefCell;

use rand::seq::SliceRandom;

use crate::coalition::Coalition;
use crate::contrast::{ContrastKind, QuantileLevel};
use crate::error::{invalid, Error, Result};
use crate::estimators::{CostEstimator, EstimatorConfig, IndexEstimate};
use crate::models::ModelSpec;
use crate::rng::RandomStream;

/// Largest `d` for which `shapley_exact` enumerates the full table.
pub const EXACT_DIM_CAP: usize = 25;

/// Anything that assigns a cost to every coalition of `dim()` players.
pub trait CostFunction {
    fn dim(&self) -> usize;
    fn cost(&self, coalition: Coalition) -> f64;
}

/// Costs of all `2^d` coalitions, indexed by mask.
#[derive(Debug, Clone, PartialEq)]
pub struct CostTable {
    d: usize,
    costs: Vec<f64>,
}

impl CostTable {
    pub fn new(d: usize, costs: Vec<f64>) -> Result<Self> {
        if d == 0 || d > EXACT_DIM_CAP {
            return Err(Error::DimensionCap { d, cap: EXACT_DIM_CAP });
        }
        if costs.len() != 1usize << d {
            return Err(Error::DimensionMismatch {
                expected: 1usize << d,
                actual: costs.len(),
            });
        }
        if costs[0] != 0.0 {
            return Err(invalid("costs", "the empty coalition must cost 0"));
        }
        if costs.iter().any(|c| !c.is_finite()) {
            return Err(invalid("costs", "all costs must be finite"));
        }
        Ok(Self { d, costs })
    }

    /// Tabulates `f` over every coalition; `f(EMPTY)` is not called.
    pub fn from_fn<F: FnMut(Coalition) -> Result<f64>>(d: usize, mut f: F) -> Result<Self> {
        if d == 0 || d > EXACT_DIM_CAP {
            return Err(Error::DimensionCap { d, cap: EXACT_DIM_CAP });
        }
        let mut costs = vec![0.0; 1usize << d];
        for (mask, slot) in costs.iter_mut().enumerate().skip(1) {
            *slot = f(Coalition::from_mask(mask as u64))?;
        }
        Self::new(d, costs)
    }

    pub fn costs(&self) -> &[f64] {
        &self.costs
    }

    pub fn grand(&self) -> f64 {
        self.costs[self.costs.len() - 1]
    }

    /// The table divided by its grand-coalition cost.
    pub fn normalized(&self) -> Result<Self> {
        let g = self.grand();
        if g.abs() < crate::contrast::DEGENERACY_THRESHOLD {
            return Err(Error::DegenerateOutput(g));
        }
        let mut costs: Vec<f64> = self.costs.iter().map(|c| c / g).collect();
        let last = costs.len() - 1;
        costs[last] = 1.0;
        Ok(Self { d: self.d, costs })
    }

    /// Entrywise sum of two games on the same players.
    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.d != other.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                actual: other.d,
            });
        }
        Self::new(self.d, self.costs.iter().zip(&other.costs).map(|(a, b)| a + b).collect())
    }
}

impl CostFunction for CostTable {
    fn dim(&self) -> usize {
        self.d
    }

    fn cost(&self, coalition: Coalition) -> f64 {
        self.costs[coalition.mask() as usize]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapleyMethod {
    Exact,
    Permutation { permutations: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShapleyAttribution {
    pub values: Vec<f64>,
    pub method: ShapleyMethod,
    /// Per-player standard errors; `None` for exact aggregation.
    pub std_errors: Option<Vec<f64>>,
}

impl ShapleyAttribution {
    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// `w[s] = s! (d-s-1)! / d!` for `s = 0..d`.
pub fn shapley_weights(d: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(d);
    let mut cur = 1.0 / d as f64;
    for s in 0..d {
        w.push(cur);
        if s + 1 < d {
            cur *= (s + 1) as f64 / (d - 1 - s) as f64;
        }
    }
    w
}

/// Exact Shapley values by enumerating coalitions in increasing mask order.
pub fn shapley_exact(table: &CostTable) -> Result<ShapleyAttribution> {
    let d = table.d;
    let w = shapley_weights(d);
    let mut values = vec![0.0; d];
    for mask in 0..(1u64 << d) {
        let j = Coalition::from_mask(mask);
        let base = table.costs[mask as usize];
        let weight = w.get(j.len()).copied().unwrap_or(0.0);
        for (i, v) in values.iter_mut().enumerate() {
            if !j.contains(i) {
                *v += weight * (table.costs[(mask | 1 << i) as usize] - base);
            }
        }
    }
    Ok(ShapleyAttribution {
        values,
        method: ShapleyMethod::Exact,
        std_errors: None,
    })
}

/// Monte Carlo Shapley values from `m` random orderings drawn as antithetic
/// pairs (an ordering and its reverse). Odd `m` is rounded up.
pub fn shapley_permutation<C: CostFunction + ?Sized>(game: &C, m: usize, stream: &RandomStream) -> Result<ShapleyAttribution> {
    if m == 0 {
        return Err(invalid("permutations", "need at least one"));
    }
    let d = game.dim();
    if d == 0 || d > Coalition::MAX_PLAYERS {
        return Err(Error::DimensionCap {
            d,
            cap: Coalition::MAX_PLAYERS,
        });
    }
    let pairs = m.div_ceil(2);
    let mut rng = stream.rng();
    let mut order: Vec<usize> = (0..d).collect();
    let mut sum = vec![0.0; d];
    let mut sum_sq = vec![0.0; d];
    let mut pair = vec![0.0; d];
    for _ in 0..pairs {
        order.shuffle(&mut rng);
        pair.iter_mut().for_each(|p| *p = 0.0);
        for reversed in [false, true] {
            let mut j = Coalition::EMPTY;
            let mut prev = 0.0;
            let mut step = |i: usize| {
                j = j.with(i);
                let c = game.cost(j);
                pair[i] += 0.5 * (c - prev);
                prev = c;
            };
            if reversed {
                order.iter().rev().for_each(|&i| step(i));
            } else {
                order.iter().for_each(|&i| step(i));
            }
        }
        for i in 0..d {
            sum[i] += pair[i];
            sum_sq[i] += pair[i] * pair[i];
        }
    }
    let n = pairs as f64;
    let values: Vec<f64> = sum.iter().map(|s| s / n).collect();
    let std_errors = (pairs > 1).then(|| {
        values
            .iter()
            .zip(&sum_sq)
            .map(|(mean, sq)| ((sq / n - mean * mean).max(0.0) * n / (n - 1.0) / n).sqrt())
            .collect()
    });
    Ok(ShapleyAttribution {
        values,
        method: ShapleyMethod::Permutation { permutations: 2 * pairs },
        std_errors,
    })
}

/// Shapley effects of the normalized cost `c(J)` estimated on one shared
/// sample. Exact aggregation reports batch standard errors; permutation
/// sampling reports its own sampling error.
pub fn shapley_effects(model: &ModelSpec, kind: ContrastKind, cfg: &EstimatorConfig, method: ShapleyMethod) -> Result<ShapleyAttribution> {
    let est = CostEstimator::new(model, kind, cfg)?;
    aggregate(&est, method, false)
}

/// Quantile-oriented Shapley effects.
pub fn qose(model: &ModelSpec, alpha: QuantileLevel, cfg: &EstimatorConfig, method: ShapleyMethod) -> Result<ShapleyAttribution> {
    shapley_effects(model, ContrastKind::Pinball(alpha), cfg, method)
}

/// Experimental: Shapley effects of the first cost function
/// `c~(J) = E[psi(theta*(Y | X_J), theta*(Y))]`. Its increments are not
/// known to be non-negative.
pub fn qose_first_cost(model: &ModelSpec, alpha: QuantileLevel, cfg: &EstimatorConfig, method: ShapleyMethod) -> Result<ShapleyAttribution> {
    let est = CostEstimator::new(model, ContrastKind::Pinball(alpha), cfg)?;
    aggregate(&est, method, true)
}

/// Shapley aggregation over an already built estimator.
pub fn aggregate(est: &CostEstimator, method: ShapleyMethod, first_cost: bool) -> Result<ShapleyAttribution> {
    match method {
        ShapleyMethod::Exact => {
            let (full, batches) = est.cost_tables(first_cost)?;
            let mut attribution = shapley_exact(&full)?;
            let per_batch: Vec<Vec<f64>> = batches.iter().map(|t| shapley_exact(t).map(|a| a.values)).collect::<Result<_>>()?;
            let b = per_batch.len() as f64;
            let se = (0..full.dim())
                .map(|i| {
                    let m = per_batch.iter().map(|v| v[i]).sum::<f64>() / b;
                    let var = per_batch.iter().map(|v| (v[i] - m) * (v[i] - m)).sum::<f64>() / (b - 1.0);
                    (var / b).sqrt()
                })
                .collect();
            attribution.std_errors = Some(se);
            Ok(attribution)
        }
        ShapleyMethod::Permutation { permutations } => {
            let game = LazyCosts::new(est, first_cost);
            let out = shapley_permutation(&game, permutations, &est.stream().substream(u64::MAX));
            match game.error.into_inner() {
                Some(e) => Err(e),
                None => out,
            }
        }
    }
}

/// Estimated costs computed on first use.
struct LazyCosts<'a> {
    est: &'a CostEstimator,
    first_cost: bool,
    memo: RefCell<BTreeMap<u64, f64>>,
    error: RefCell<Option<Error>>,
}

impl<'a> LazyCosts<'a> {
    fn new(est: &'a CostEstimator, first_cost: bool) -> Self {
        Self {
            est,
            first_cost,
            memo: RefCell::new(BTreeMap::new()),
            error: RefCell::new(None),
        }
    }
}

impl CostFunction for LazyCosts<'_> {
    fn dim(&self) -> usize {
        self.est.dim()
    }

    fn cost(&self, j: Coalition) -> f64 {
        if let Some(&c) = self.memo.borrow().get(&j.mask()) {
            return c;
        }
        let full = j == Coalition::full(self.dim());
        let value = if self.first_cost && !full {
            self.est.first_cost_batched(j)
        } else {
            self.est.cost_batched(j)
        };
        let c = match value {
            Ok(b) => b.full,
            Err(e) => {
                self.error.borrow_mut().get_or_insert(e);
                0.0
            }
        };
        self.memo.borrow_mut().insert(j.mask(), c);
        c
    }
}

/// Variance-based baseline on the same pipeline with the squared contrast.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceIndices {
    pub first_order: Vec<IndexEstimate>,
    pub total: Vec<IndexEstimate>,
    pub shapley: ShapleyAttribution,
}

pub fn variance_shapley_and_sobol(model: &ModelSpec, cfg: &EstimatorConfig, method: ShapleyMethod) -> Result<VarianceIndices> {
    let est = CostEstimator::new(model, ContrastKind::Squared, cfg)?;
    let d = est.dim();
    Ok(VarianceIndices {
        first_order: (0..d).map(|i| est.first_order(i)).collect::<Result<_>>()?,
        total: (0..d).map(|i| est.total(i)).collect::<Result<_>>()?,
        shapley: aggregate(&est, method, false)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_sum_per_player() {
        // sum over s of C(d-1, s) w[s] = 1
        let d = 7;
        let w = shapley_weights(d);
        let mut binom = 1.0;
        let mut total = 0.0;
        for (s, ws) in w.iter().enumerate() {
            total += binom * ws;
            binom *= (d - 1 - s) as f64 / (s + 1) as f64;
        }
        assert!((total - 1.0).abs() < 1e-14);
    }

    #[test]
    fn two_player_formula() {
        let (a, b, t) = (0.3, 0.9, 1.4);
        let table = CostTable::new(2, vec![0.0, a, b, t]).unwrap();
        let v = shapley_exact(&table).unwrap().values;
        assert!((v[0] - (a + t - b) / 2.0).abs() < 1e-15);
        assert!((v[1] - (b + t - a) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn additive_and_symmetric_games() {
        let w = [0.5, -1.0, 2.0, 0.25];
        let add = CostTable::from_fn(4, |j| Ok(j.iter().map(|i| w[i]).sum())).unwrap();
        for (v, wi) in shapley_exact(&add).unwrap().values.iter().zip(w) {
            assert!((v - wi).abs() < 1e-14);
        }
        let sym = CostTable::from_fn(4, |j| Ok((j.len() as f64).sqrt())).unwrap();
        let v = shapley_exact(&sym).unwrap().values;
        assert!(v.iter().all(|x| (x - 0.5).abs() < 1e-14));
    }

    #[test]
    fn single_player_permutation() {
        let t = CostTable::new(1, vec![0.0, 3.5]).unwrap();
        let a = shapley_permutation(&t, 1, &RandomStream::new(1)).unwrap();
        assert_eq!(a.values, vec![3.5]);
    }

    #[test]
    fn rejects_bad_tables() {
        assert!(CostTable::new(2, vec![0.1, 0.0, 0.0, 1.0]).is_err());
        assert!(CostTable::new(2, vec![0.0, 1.0]).is_err());
        assert!(CostTable::new(2, vec![0.0, f64::NAN, 0.0, 1.0]).is_err());
        assert!(CostTable::new(2, vec![0.0, 0.5, 0.5, 0.0]).unwrap().normalized().is_err());
    }
}
