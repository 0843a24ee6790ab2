//! Evaluation of index sets over (rho, alpha) grids.

use anyhow::{bail, Context, Result};
use qosa_core::analytic::{analytic_indices, gaussian_indices, AnalyticIndexSet, GaussianExponent, OutputMap};
use qosa_core::coalition::Coalition;
use qosa_core::contrast::{ContrastKind, QuantileLevel};
use qosa_core::estimators::{CostEstimator, EstimatorConfig, IndexEstimate, PathChoice};
use qosa_core::rng::RandomStream;
use qosa_core::shapley::{aggregate, ShapleyAttribution, ShapleyMethod};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::model_file::{ModelDescription, NamedModel};
use crate::output::ResultRow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum Engine {
    Analytic,
    MonteCarlo,
}

impl Engine {
    pub fn name(self) -> &'static str {
        match self {
            Self::Analytic => "analytic",
            Self::MonteCarlo => "monte_carlo",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum IndexKind {
    QosaFirst,
    QosaTotal,
    /// Closed group index and interaction index of every coalition of size >= 2.
    QosaGroup,
    Qose,
    Kucherenko,
    Sobol,
    VarianceShapley,
}

pub const DEFAULT_INDICES: [IndexKind; 3] = [IndexKind::QosaFirst, IndexKind::QosaTotal, IndexKind::Qose];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PathArg {
    Auto,
    Exact,
    Nested,
    Knn,
}

impl From<PathArg> for PathChoice {
    fn from(p: PathArg) -> Self {
        match p {
            PathArg::Auto => PathChoice::Auto,
            PathArg::Exact => PathChoice::Exact,
            PathArg::Nested => PathChoice::Nested,
            PathArg::Knn => PathChoice::Knn,
        }
    }
}

/// Monte Carlo settings shared by every grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McSettings {
    pub samples: usize,
    pub inner: usize,
    pub batches: usize,
    pub k: Option<usize>,
    pub path: PathArg,
    /// `None` aggregates Shapley values over all coalitions.
    pub permutations: Option<usize>,
}

impl Default for McSettings {
    fn default() -> Self {
        let d = EstimatorConfig::default();
        Self {
            samples: d.n_outer,
            inner: d.n_inner,
            batches: d.n_batches,
            k: None,
            path: PathArg::Auto,
            permutations: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub model: NamedModel,
    pub alphas: Vec<f64>,
    /// `None` keeps the model's own correlation.
    pub rhos: Option<Vec<f64>>,
    pub indices: Vec<IndexKind>,
    pub engine: Engine,
    pub seed: u64,
    pub mc: McSettings,
    /// Adds the first-cost QOSE variant (Monte Carlo only).
    pub experimental: bool,
}

struct Point {
    rho_slot: usize,
    rho: Option<f64>,
    alpha_slot: usize,
    alpha: f64,
    model: ModelDescription,
}

/// Rows in a fixed order: rho, then alpha, then index kind, then input.
/// Grid points run in parallel; the Monte Carlo sample of a point depends
/// only on the seed and its rho slot, so all levels at one correlation
/// share common random numbers and thread count never changes a value.
pub fn run(spec: &RunSpec) -> Result<Vec<ResultRow>> {
    crate::grid::check_levels(&spec.alphas)?;
    if spec.alphas.is_empty() {
        bail!("no quantile levels");
    }
    if spec.experimental && spec.engine == Engine::Analytic {
        bail!("the first-cost QOSE variant has no closed form; use --engine monte_carlo");
    }
    let rhos: Vec<Option<f64>> = match &spec.rhos {
        Some(r) => {
            crate::grid::check_correlations(r)?;
            r.iter().map(|&v| Some(v)).collect()
        }
        None => vec![spec.model.model.rho()],
    };
    let mut points = Vec::new();
    for (rho_slot, rho) in rhos.iter().enumerate() {
        let model = match (rho, &spec.rhos) {
            (Some(r), Some(_)) => spec.model.model.with_rho(*r)?,
            _ => spec.model.model.clone(),
        };
        for (alpha_slot, &alpha) in spec.alphas.iter().enumerate() {
            points.push(Point {
                rho_slot,
                rho: *rho,
                alpha_slot,
                alpha,
                model: model.clone(),
            });
        }
    }
    let blocks: Vec<Vec<ResultRow>> = points
        .par_iter()
        .map(|p| evaluate(spec, p).with_context(|| format!("model {} at alpha={} rho={:?}", spec.model.id, p.alpha, p.rho)))
        .collect::<Result<_>>()?;
    Ok(blocks.into_iter().flatten().collect())
}

fn input_label(i: usize) -> String {
    (i + 1).to_string()
}

struct Emitter<'a> {
    spec: &'a RunSpec,
    point: &'a Point,
    rows: Vec<ResultRow>,
}

impl Emitter<'_> {
    fn push(&mut self, alpha: Option<f64>, index: &str, input: String, value: f64, est: Option<(f64, usize)>) {
        let mc = est.is_some();
        self.rows.push(ResultRow {
            model: self.spec.model.id.clone(),
            alpha,
            rho: self.point.rho,
            input,
            index: index.to_string(),
            value,
            std_error: est.map(|e| e.0),
            n_samples: est.map(|e| e.1),
            seed: mc.then_some(self.spec.seed),
            engine: self.spec.engine.name().to_string(),
        });
    }

    fn exact(&mut self, alpha: Option<f64>, index: &str, values: &[f64]) {
        for (i, &v) in values.iter().enumerate() {
            self.push(alpha, index, input_label(i), v, None);
        }
    }

    fn estimates(&mut self, alpha: Option<f64>, index: &str, values: &[IndexEstimate]) {
        for (i, e) in values.iter().enumerate() {
            self.push(alpha, index, input_label(i), e.value, Some((e.std_error, e.n_effective)));
        }
    }

    fn shapley(&mut self, alpha: Option<f64>, index: &str, a: &ShapleyAttribution, n: usize) {
        for (i, &v) in a.values.iter().enumerate() {
            let se = a.std_errors.as_ref().map(|s| s[i]).unwrap_or(f64::NAN);
            self.push(alpha, index, input_label(i), v, Some((se, n)));
        }
    }
}

fn groups(d: usize) -> impl Iterator<Item = Coalition> {
    Coalition::all(d).filter(|g| g.len() >= 2)
}

fn evaluate(spec: &RunSpec, p: &Point) -> Result<Vec<ResultRow>> {
    let mut em = Emitter {
        spec,
        point: p,
        rows: Vec::new(),
    };
    let alpha = QuantileLevel::new(p.alpha)?;
    let pinball = ContrastKind::Pinball(alpha);
    let quantile_kinds = spec.indices.iter().any(|k| !matches!(k, IndexKind::Sobol | IndexKind::VarianceShapley));
    // variance indices do not depend on the level: emitted once per rho
    let variance_kinds = p.alpha_slot == 0 && spec.indices.iter().any(|k| matches!(k, IndexKind::Sobol | IndexKind::VarianceShapley));
    let a = Some(p.alpha);
    match spec.engine {
        Engine::Analytic => {
            if quantile_kinds {
                let set = analytic_set(&p.model, pinball)?;
                for kind in &spec.indices {
                    match kind {
                        IndexKind::QosaFirst => em.exact(a, "qosa_first", &set.first_order),
                        IndexKind::QosaTotal => em.exact(a, "qosa_total", &set.total),
                        IndexKind::QosaGroup => {
                            for g in groups(set.dim()) {
                                em.push(a, "qosa_group", g.to_string(), set.group(g), None);
                                em.push(a, "qosa_interaction", g.to_string(), set.interaction(g), None);
                            }
                        }
                        IndexKind::Qose => em.exact(a, "qose", &set.shapley),
                        IndexKind::Kucherenko => {
                            let values = set
                                .kucherenko
                                .as_ref()
                                .context("no closed-form Kucherenko indices for this model; use --engine monte_carlo")?;
                            let pick = |f: fn(&qosa_core::analytic::KucherenkoValues) -> f64| values.iter().map(f).collect::<Vec<_>>();
                            em.exact(a, "kucherenko_abs", &pick(|v| v.absolute));
                            em.exact(a, "kucherenko_sq", &pick(|v| v.squared));
                            em.exact(a, "kucherenko_abs_norm", &pick(|v| v.normalized_absolute));
                            em.exact(a, "kucherenko_sq_norm", &pick(|v| v.normalized_squared));
                        }
                        IndexKind::Sobol | IndexKind::VarianceShapley => {}
                    }
                }
            }
            if variance_kinds {
                let set = analytic_set(&p.model, ContrastKind::Squared)?;
                for kind in &spec.indices {
                    match kind {
                        IndexKind::Sobol => {
                            em.exact(None, "sobol_first", &set.first_order);
                            em.exact(None, "sobol_total", &set.total);
                        }
                        IndexKind::VarianceShapley => em.exact(None, "variance_shapley", &set.shapley),
                        _ => {}
                    }
                }
            }
        }
        Engine::MonteCarlo => {
            let model = p.model.build()?;
            let cfg = EstimatorConfig {
                n_outer: spec.mc.samples,
                n_inner: spec.mc.inner,
                n_pooled: spec.mc.samples,
                k_neighbors: spec.mc.k,
                n_batches: spec.mc.batches,
                stream: RandomStream::new(spec.seed).substream(p.rho_slot as u64),
                path: spec.mc.path.into(),
            };
            let method = match spec.mc.permutations {
                Some(permutations) => ShapleyMethod::Permutation { permutations },
                None => ShapleyMethod::Exact,
            };
            if quantile_kinds || spec.experimental {
                let est = CostEstimator::new(&model, pinball, &cfg)?;
                let d = est.dim();
                let n = est.len();
                for kind in &spec.indices {
                    match kind {
                        IndexKind::QosaFirst => em.estimates(a, "qosa_first", &(0..d).map(|i| est.first_order(i)).collect::<Result<Vec<_>, _>>()?),
                        IndexKind::QosaTotal => em.estimates(a, "qosa_total", &(0..d).map(|i| est.total(i)).collect::<Result<Vec<_>, _>>()?),
                        IndexKind::QosaGroup => {
                            for g in groups(d) {
                                let gi = est.group(g)?;
                                em.push(a, "qosa_group", g.to_string(), gi.value, Some((gi.std_error, gi.n_effective)));
                                let ii = est.interaction(g)?;
                                em.push(a, "qosa_interaction", g.to_string(), ii.value, Some((ii.std_error, ii.n_effective)));
                            }
                        }
                        IndexKind::Qose => em.shapley(a, "qose", &aggregate(&est, method, false)?, n),
                        IndexKind::Kucherenko => {
                            let k = est.kucherenko_all()?;
                            em.estimates(a, "kucherenko_abs", &k.iter().map(|v| v.absolute).collect::<Vec<_>>());
                            em.estimates(a, "kucherenko_sq", &k.iter().map(|v| v.squared).collect::<Vec<_>>());
                            em.estimates(a, "kucherenko_abs_norm", &k.iter().map(|v| v.normalized_absolute).collect::<Vec<_>>());
                            em.estimates(a, "kucherenko_sq_norm", &k.iter().map(|v| v.normalized_squared).collect::<Vec<_>>());
                        }
                        IndexKind::Sobol | IndexKind::VarianceShapley => {}
                    }
                }
                if spec.experimental {
                    em.shapley(a, "qose_first_cost", &aggregate(&est, method, true)?, n);
                }
            }
            if variance_kinds {
                // first level's sample stream, so the baseline sits on the same draws
                let est = CostEstimator::new(&model, ContrastKind::Squared, &cfg)?;
                let d = est.dim();
                for kind in &spec.indices {
                    match kind {
                        IndexKind::Sobol => {
                            em.estimates(None, "sobol_first", &(0..d).map(|i| est.first_order(i)).collect::<Result<Vec<_>, _>>()?);
                            em.estimates(None, "sobol_total", &(0..d).map(|i| est.total(i)).collect::<Result<Vec<_>, _>>()?);
                        }
                        IndexKind::VarianceShapley => em.shapley(None, "variance_shapley", &aggregate(&est, method, false)?, est.len()),
                        _ => {}
                    }
                }
            }
        }
    }
    Ok(em.rows)
}

/// Closed-form index set; two-input Gaussian models go through the
/// correlation form, which stays defined at `|rho| = 1`.
pub fn analytic_set(model: &ModelDescription, kind: ContrastKind) -> Result<AnalyticIndexSet> {
    if let Some(g) = model.gaussian() {
        if let Some((sd, rho)) = g.bivariate() {
            let map = match model {
                ModelDescription::LogLinearGaussian(_) => OutputMap::Exp,
                _ => OutputMap::Identity,
            };
            let exponent = GaussianExponent::bivariate([g.beta[0], g.beta[1]], sd, rho)?;
            return Ok(gaussian_indices(&exponent, map, kind)?);
        }
    }
    Ok(analytic_indices(&model.build()?, kind)?)
}
