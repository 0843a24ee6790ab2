//! Monte Carlo estimators of coalition costs and the indices built on them.
//!
//! Every quantity is a ratio of per-point contrast sums sharing one sample
//! and one unconditional feature. Standard errors come from recomputing the
//! same statistic on contiguous batches of the sample.

// Unused whenever std is linked into the build.
#[allow(unused_imports)]
use num_traits::Float;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::coalition::Coalition;
use crate::contrast::{average_contrast, ContrastKind, QuantileLevel, DEGENERACY_THRESHOLD};
use crate::distributions::SampleMatrix;
use crate::error::{invalid, Error, Result};
use crate::knn::{default_neighbors, knn_features};
use crate::models::{ConditionalFeature, ModelSpec};
use crate::rng::RandomStream;
use crate::shapley::CostTable;

/// How conditional features are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathChoice {
    /// Exact when the model has closed-form conditionals for every
    /// coalition, nested when `n_inner > 1`, nearest neighbours otherwise.
    Auto,
    Exact,
    Nested,
    Knn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimationPath {
    /// Closed-form conditional feature at each outer draw.
    Exact,
    /// Empirical feature of `n_inner` conditional redraws per outer draw.
    Nested,
    /// Leave-one-out nearest neighbours on the pooled sample.
    Knn,
}

impl EstimationPath {
    pub fn name(self) -> &'static str {
        match self {
            Self::Exact => "exact-conditional",
            Self::Nested => "nested-conditional",
            Self::Knn => "knn-conditional",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EstimatorConfig {
    /// Sample size on the exact and nested paths.
    pub n_outer: usize,
    pub n_inner: usize,
    /// Sample size on the nearest-neighbour path.
    pub n_pooled: usize,
    /// `None` uses `ceil(n_pooled^(1/3))`.
    pub k_neighbors: Option<usize>,
    pub n_batches: usize,
    pub stream: RandomStream,
    pub path: PathChoice,
}

pub const MIN_BATCHES: usize = 8;

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            n_outer: 100_000,
            n_inner: 1,
            n_pooled: 100_000,
            k_neighbors: None,
            n_batches: 16,
            stream: RandomStream::new(0),
            path: PathChoice::Auto,
        }
    }
}

impl EstimatorConfig {
    /// Same sample size on every path.
    pub fn with_samples(mut self, n: usize) -> Self {
        self.n_outer = n;
        self.n_pooled = n;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.stream = RandomStream::new(seed);
        self
    }

    pub fn with_path(mut self, path: PathChoice) -> Self {
        self.path = path;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_batches < MIN_BATCHES {
            return Err(invalid("n_batches", format!("need at least {MIN_BATCHES}")));
        }
        if self.n_inner == 0 {
            return Err(invalid("n_inner", "must be at least 1"));
        }
        for (name, n) in [("n_outer", self.n_outer), ("n_pooled", self.n_pooled)] {
            if n < self.n_batches {
                return Err(invalid(name, "must be at least n_batches"));
            }
        }
        if let Some(k) = self.k_neighbors {
            if k == 0 || k >= self.n_pooled {
                return Err(invalid("k_neighbors", "must lie in 1..n_pooled"));
            }
        }
        Ok(())
    }

    fn resolve(&self, model: Option<&ModelSpec>, kind: ContrastKind) -> Result<EstimationPath> {
        let exact_ok = || model.is_some_and(|m| supports_all(m, kind));
        match self.path {
            PathChoice::Exact if exact_ok() => Ok(EstimationPath::Exact),
            PathChoice::Exact => Err(Error::Unsupported("exact conditional features for this model".into())),
            PathChoice::Nested if model.is_some() => Ok(EstimationPath::Nested),
            PathChoice::Nested => Err(invalid("path", "nested sampling needs a model")),
            PathChoice::Knn => Ok(EstimationPath::Knn),
            PathChoice::Auto if exact_ok() => Ok(EstimationPath::Exact),
            PathChoice::Auto if model.is_some() && self.n_inner > 1 => Ok(EstimationPath::Nested),
            PathChoice::Auto => Ok(EstimationPath::Knn),
        }
    }
}

fn supports_all(model: &ModelSpec, kind: ContrastKind) -> bool {
    let d = model.dim();
    if d <= 12 {
        Coalition::all(d).all(|g| model.supports_exact(g, kind))
    } else {
        let full = Coalition::full(d);
        (0..d).all(|i| model.supports_exact(Coalition::singleton(i), kind) && model.supports_exact(full.without(i), kind))
    }
}

/// A scalar estimate with its batch standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndexEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_effective: usize,
    pub method: EstimationPath,
    pub contrast: ContrastKind,
}

/// A statistic on the whole sample and on each batch.
#[derive(Debug, Clone, PartialEq)]
pub struct Batched {
    pub full: f64,
    pub batches: Vec<f64>,
}

impl Batched {
    fn from_points(values: &[f64], n_batches: usize) -> Self {
        let n = values.len();
        let batches = (0..n_batches)
            .map(|b| values[b * n / n_batches..(b + 1) * n / n_batches].iter().sum())
            .collect();
        Self {
            full: values.iter().sum(),
            batches,
        }
    }

    fn zip(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            full: f(self.full, other.full),
            batches: self.batches.iter().zip(&other.batches).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// Standard error of the full-sample value from the batch spread.
    pub fn std_error(&self) -> f64 {
        let b = self.batches.len() as f64;
        let mean = self.batches.iter().sum::<f64>() / b;
        let var = self.batches.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (b - 1.0);
        (var / b).sqrt()
    }
}

/// Per-point contrasts `psi(y_r, theta_r)`.
pub fn contrast_contributions(outputs: &[f64], features: &[f64], kind: ContrastKind) -> Vec<f64> {
    outputs.iter().zip(features).map(|(&y, &t)| kind.loss(y, t)).collect()
}

/// Normalized cost `sum psi(y_r, theta_r) / sum psi(y_r, theta*)` from
/// explicit outputs and conditional features, `theta*` being the empirical
/// unconditional feature of `outputs`.
pub fn normalized_cost(outputs: &[f64], features: &[f64], kind: ContrastKind, n_batches: usize) -> Result<Batched> {
    if outputs.len() != features.len() {
        return Err(Error::DimensionMismatch {
            expected: outputs.len(),
            actual: features.len(),
        });
    }
    if n_batches < MIN_BATCHES || outputs.len() < n_batches {
        return Err(invalid("n_batches", "need at least 8 batches and one point per batch"));
    }
    let avg = average_contrast(outputs, kind)?;
    avg.normalizer()?;
    let v = Batched::from_points(&contrast_contributions(outputs, &vec![avg.feature; outputs.len()], kind), n_batches);
    let u = Batched::from_points(&contrast_contributions(outputs, features, kind), n_batches);
    Ok(u.zip(&v, |a, b| a / b))
}

/// A shared sample with its unconditional feature, from which every
/// coalition cost is estimated.
#[derive(Debug, Clone)]
pub struct CostEstimator {
    model: Option<ModelSpec>,
    inputs: SampleMatrix,
    outputs: Vec<f64>,
    kind: ContrastKind,
    path: EstimationPath,
    k: usize,
    n_batches: usize,
    n_inner: usize,
    stream: RandomStream,
    theta: f64,
    /// Batched sums of `psi(y_r, theta)`
    normalizer: Batched,
}

impl CostEstimator {
    /// Draws the sample for `model` according to `cfg`.
    pub fn new(model: &ModelSpec, kind: ContrastKind, cfg: &EstimatorConfig) -> Result<Self> {
        cfg.validate()?;
        let path = cfg.resolve(Some(model), kind)?;
        let n = if path == EstimationPath::Knn { cfg.n_pooled } else { cfg.n_outer };
        let sample = model.sample(n, &cfg.stream.substream(0));
        Self::assemble(Some(model.clone()), sample.inputs, sample.outputs, kind, cfg, path)
    }

    /// Uses a given sample; without a model only the nearest-neighbour path
    /// is available.
    pub fn from_sample(model: Option<&ModelSpec>, inputs: SampleMatrix, outputs: Vec<f64>, kind: ContrastKind, cfg: &EstimatorConfig) -> Result<Self> {
        if inputs.rows() != outputs.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.rows(),
                actual: outputs.len(),
            });
        }
        if let Some(m) = model {
            if m.dim() != inputs.cols() {
                return Err(Error::DimensionMismatch {
                    expected: m.dim(),
                    actual: inputs.cols(),
                });
            }
        }
        let path = cfg.resolve(model, kind)?;
        Self::assemble(model.cloned(), inputs, outputs, kind, cfg, path)
    }

    fn assemble(model: Option<ModelSpec>, inputs: SampleMatrix, outputs: Vec<f64>, kind: ContrastKind, cfg: &EstimatorConfig, path: EstimationPath) -> Result<Self> {
        let n = outputs.len();
        if n < cfg.n_batches.max(MIN_BATCHES) {
            return Err(invalid("sample", "fewer rows than batches"));
        }
        if inputs.cols() == 0 || inputs.cols() > Coalition::MAX_PLAYERS {
            return Err(invalid("inputs", "need between 1 and 63 columns"));
        }
        let avg = average_contrast(&outputs, kind)?;
        avg.normalizer()?;
        let normalizer = Batched::from_points(&contrast_contributions(&outputs, &vec![avg.feature; n], kind), cfg.n_batches);
        if normalizer.batches.iter().any(|&v| !(v / (n / cfg.n_batches) as f64 >= DEGENERACY_THRESHOLD)) {
            return Err(Error::DegenerateOutput(avg.value));
        }
        let k = cfg.k_neighbors.unwrap_or_else(|| default_neighbors(n));
        if path == EstimationPath::Knn && k >= n {
            return Err(invalid("k_neighbors", "must be below the sample size"));
        }
        Ok(Self {
            model,
            inputs,
            outputs,
            kind,
            path,
            k,
            n_batches: cfg.n_batches,
            n_inner: cfg.n_inner,
            stream: cfg.stream,
            theta: avg.feature,
            normalizer,
        })
    }

    pub fn dim(&self) -> usize {
        self.inputs.cols()
    }

    pub fn len(&self) -> usize {
        self.outputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outputs.is_empty()
    }

    pub fn path(&self) -> EstimationPath {
        self.path
    }

    pub fn contrast(&self) -> ContrastKind {
        self.kind
    }

    pub fn stream(&self) -> RandomStream {
        self.stream
    }

    pub fn neighbors(&self) -> usize {
        self.k
    }

    /// The empirical unconditional feature.
    pub fn unconditional_feature(&self) -> f64 {
        self.theta
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    /// Estimated `theta*(Y | X_given)` at every sample point.
    pub fn conditional_features(&self, given: Coalition) -> Result<Vec<f64>> {
        let d = self.dim();
        if !given.is_subset_of(Coalition::full(d)) {
            return Err(invalid("given", "coalition exceeds the input dimension"));
        }
        if given.is_empty() {
            return Ok(vec![self.theta; self.len()]);
        }
        if given == Coalition::full(d) {
            return Ok(self.outputs.clone());
        }
        match (self.path, &self.model) {
            (EstimationPath::Exact, Some(m)) => {
                let f: ConditionalFeature = m.conditional_feature(given, self.kind)?;
                Ok(self.inputs.iter_rows().map(|r| f.eval(r)).collect())
            }
            (EstimationPath::Nested, Some(m)) => self.nested_features(m, given),
            _ => knn_features(&self.inputs, &self.outputs, given, self.k, self.kind),
        }
    }

    fn nested_features(&self, model: &ModelSpec, given: Coalition) -> Result<Vec<f64>> {
        let sampler = model.input_law().conditional_sampler(given)?;
        let mut rng = self.stream.substream(1 + given.mask()).rng();
        let mut row = vec![0.0; self.dim()];
        let mut scratch = Vec::new();
        let mut inner = vec![0.0; self.n_inner];
        let mut out = Vec::with_capacity(self.len());
        for x in self.inputs.iter_rows() {
            for y in inner.iter_mut() {
                row.copy_from_slice(x);
                sampler.redraw(&mut row, &mut rng, &mut scratch);
                *y = model.eval_row(&row);
            }
            out.push(self.kind.empirical_feature(&inner)?);
        }
        Ok(out)
    }

    fn normalized(&self, points: &[f64]) -> Result<Batched> {
        Ok(Batched::from_points(points, self.n_batches).zip(&self.normalizer, |u, v| u / v))
    }

    /// `c(J) = E[psi(Y, theta*(Y | X_{-J}))] / E[psi(Y, theta*(Y))]`.
    pub fn cost_batched(&self, j: Coalition) -> Result<Batched> {
        let d = self.dim();
        if j.is_empty() {
            return Ok(Batched {
                full: 0.0,
                batches: vec![0.0; self.n_batches],
            });
        }
        if j == Coalition::full(d) {
            return Ok(Batched {
                full: 1.0,
                batches: vec![1.0; self.n_batches],
            });
        }
        let features = self.conditional_features(j.complement(d))?;
        self.normalized(&contrast_contributions(&self.outputs, &features, self.kind))
    }

    /// Experimental `c~(J) = E[psi(theta*(Y | X_J), theta*(Y))]`, normalized.
    pub fn first_cost_batched(&self, j: Coalition) -> Result<Batched> {
        let features = self.conditional_features(j)?;
        let points: Vec<f64> = features.iter().map(|&t| self.kind.loss(t, self.theta)).collect();
        self.normalized(&points)
    }

    fn estimate(&self, b: &Batched) -> IndexEstimate {
        IndexEstimate {
            value: b.full,
            std_error: b.std_error(),
            n_effective: self.len(),
            method: self.path,
            contrast: self.kind,
        }
    }

    /// `constant + sum_t w_t c(J_t)` with a joint standard error.
    pub fn combination(&self, constant: f64, terms: &[(f64, Coalition)]) -> Result<IndexEstimate> {
        let mut acc = Batched {
            full: constant,
            batches: vec![constant; self.n_batches],
        };
        for &(w, j) in terms {
            acc = acc.zip(&self.cost_batched(j)?, |a, c| a + w * c);
        }
        Ok(self.estimate(&acc))
    }

    pub fn cost(&self, j: Coalition) -> Result<IndexEstimate> {
        self.combination(0.0, &[(1.0, j)])
    }

    /// `c(J + i) - c(J)`.
    pub fn increment(&self, j: Coalition, i: usize) -> Result<IndexEstimate> {
        self.combination(0.0, &[(1.0, j.with(i)), (-1.0, j)])
    }

    fn check_input(&self, i: usize) -> Result<()> {
        if i < self.dim() {
            Ok(())
        } else {
            Err(invalid("input", format!("index {i} out of range")))
        }
    }

    /// `S_i = 1 - c(D \ i)`.
    pub fn first_order(&self, i: usize) -> Result<IndexEstimate> {
        self.check_input(i)?;
        self.combination(1.0, &[(-1.0, Coalition::full(self.dim()).without(i))])
    }

    /// `ST_i = c({i})`.
    pub fn total(&self, i: usize) -> Result<IndexEstimate> {
        self.check_input(i)?;
        self.cost(Coalition::singleton(i))
    }

    /// Closed group index `1 - c(-group)`; 0 for the empty group.
    pub fn group(&self, group: Coalition) -> Result<IndexEstimate> {
        if group.is_empty() {
            return self.combination(0.0, &[]);
        }
        self.combination(1.0, &[(-1.0, group.complement(self.dim()))])
    }

    /// Interaction index of a group by inclusion-exclusion over its
    /// nonempty subsets.
    pub fn interaction(&self, group: Coalition) -> Result<IndexEstimate> {
        let d = self.dim();
        if group.is_empty() || !group.is_subset_of(Coalition::full(d)) {
            return Err(invalid("group", "needs a nonempty subset of the inputs"));
        }
        let mut constant = 0.0;
        let mut terms = Vec::new();
        for sub in Coalition::all(d).filter(|s| !s.is_empty() && s.is_subset_of(group)) {
            let sign = if (group.len() - sub.len()) % 2 == 0 { 1.0 } else { -1.0 };
            constant += sign;
            terms.push((-sign, sub.complement(d)));
        }
        self.combination(constant, &terms)
    }

    /// The full-sample cost table and one table per batch.
    pub fn cost_tables(&self, first_cost: bool) -> Result<(CostTable, Vec<CostTable>)> {
        let d = self.dim();
        if d > crate::shapley::EXACT_DIM_CAP {
            return Err(Error::DimensionCap {
                d,
                cap: crate::shapley::EXACT_DIM_CAP,
            });
        }
        let size = 1usize << d;
        let mut full = vec![0.0; size];
        let mut batches = vec![vec![0.0; size]; self.n_batches];
        for mask in 1..size {
            let j = Coalition::from_mask(mask as u64);
            let b = if first_cost && j != Coalition::full(d) {
                self.first_cost_batched(j)?
            } else {
                self.cost_batched(j)?
            };
            full[mask] = b.full;
            for (t, v) in batches.iter_mut().zip(&b.batches) {
                t[mask] = *v;
            }
        }
        let batches = batches.into_iter().map(|t| CostTable::new(d, t)).collect::<Result<_>>()?;
        Ok((CostTable::new(d, full)?, batches))
    }

    /// Kucherenko indices of every input: `E|theta - theta_i|`,
    /// `E[(theta - theta_i)^2]` and their normalizations over inputs.
    pub fn kucherenko_all(&self) -> Result<Vec<KucherenkoEstimate>> {
        let d = self.dim();
        let mut abs = Vec::with_capacity(d);
        let mut sq = Vec::with_capacity(d);
        let n = self.len() as f64;
        // The differences are first-order in the unconditional feature, so
        // each batch uses its own: the spread then carries that noise too.
        let bounds: Vec<(usize, usize)> = (0..self.n_batches).map(|b| self.batch_bounds(b)).collect();
        let batch_theta = bounds
            .iter()
            .map(|&(lo, hi)| self.kind.empirical_feature(&self.outputs[lo..hi]))
            .collect::<Result<Vec<_>>>()?;
        for i in 0..d {
            let f = self.conditional_features(Coalition::singleton(i))?;
            let stat = |g: fn(f64) -> f64| Batched {
                full: f.iter().map(|t| g(t - self.theta)).sum::<f64>() / n,
                batches: bounds
                    .iter()
                    .zip(&batch_theta)
                    .map(|(&(lo, hi), &th)| f[lo..hi].iter().map(|t| g(t - th)).sum::<f64>() / (hi - lo) as f64)
                    .collect(),
            };
            abs.push(stat(f64::abs));
            sq.push(stat(|x| x * x));
        }
        let sum = |v: &[Batched]| v[1..].iter().fold(v[0].clone(), |acc, b| acc.zip(b, |x, y| x + y));
        let (sa, ss) = (sum(&abs), sum(&sq));
        Ok((0..d)
            .map(|i| KucherenkoEstimate {
                absolute: self.estimate(&abs[i]),
                squared: self.estimate(&sq[i]),
                normalized_absolute: self.estimate(&abs[i].zip(&sa, |x, s| x / s)),
                normalized_squared: self.estimate(&sq[i].zip(&ss, |x, s| x / s)),
            })
            .collect())
    }

    fn batch_bounds(&self, b: usize) -> (usize, usize) {
        let n = self.len();
        (b * n / self.n_batches, (b + 1) * n / self.n_batches)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KucherenkoEstimate {
    pub absolute: IndexEstimate,
    pub squared: IndexEstimate,
    pub normalized_absolute: IndexEstimate,
    pub normalized_squared: IndexEstimate,
}

fn pinball_estimator(model: &ModelSpec, alpha: QuantileLevel, cfg: &EstimatorConfig) -> Result<CostEstimator> {
    CostEstimator::new(model, ContrastKind::Pinball(alpha), cfg)
}

pub fn estimate_first_order_qosa(model: &ModelSpec, i: usize, alpha: QuantileLevel, cfg: &EstimatorConfig) -> Result<IndexEstimate> {
    pinball_estimator(model, alpha, cfg)?.first_order(i)
}

pub fn estimate_total_qosa(model: &ModelSpec, i: usize, alpha: QuantileLevel, cfg: &EstimatorConfig) -> Result<IndexEstimate> {
    pinball_estimator(model, alpha, cfg)?.total(i)
}

pub fn estimate_group_qosa(model: &ModelSpec, group: Coalition, alpha: QuantileLevel, cfg: &EstimatorConfig) -> Result<IndexEstimate> {
    pinball_estimator(model, alpha, cfg)?.group(group)
}

pub fn estimate_interaction_qosa(model: &ModelSpec, group: Coalition, alpha: QuantileLevel, cfg: &EstimatorConfig) -> Result<IndexEstimate> {
    pinball_estimator(model, alpha, cfg)?.interaction(group)
}

/// `q_{i,order}` for `order` 1 (absolute) or 2 (squared).
pub fn estimate_kucherenko(model: &ModelSpec, i: usize, alpha: QuantileLevel, order: u8, cfg: &EstimatorConfig) -> Result<IndexEstimate> {
    let all = pinball_estimator(model, alpha, cfg)?.kucherenko_all()?;
    let k = all.get(i).ok_or_else(|| invalid("input", format!("index {i} out of range")))?;
    match order {
        1 => Ok(k.absolute),
        2 => Ok(k.squared),
        _ => Err(invalid("order", "must be 1 or 2")),
    }
}

pub fn estimate_kucherenko_all(model: &ModelSpec, alpha: QuantileLevel, cfg: &EstimatorConfig) -> Result<Vec<KucherenkoEstimate>> {
    pinball_estimator(model, alpha, cfg)?.kucherenko_all()
}

pub fn coalition_cost(model: &ModelSpec, j: Coalition, alpha: QuantileLevel, cfg: &EstimatorConfig) -> Result<IndexEstimate> {
    pinball_estimator(model, alpha, cfg)?.cost(j)
}
