//! Acceptance suite. Prints one PASS/FAIL line per criterion and a summary.
//! Failures are fatal only with `QOSA_ACCEPTANCE_STRICT=1`, so a workspace
//! test run still reaches the other targets. Pass criterion numbers to run a subset:
//! `cargo test --test acceptance -- 3 4`. `QOSA_BLESS=1` rewrites the
//! golden sweep files instead of comparing them.

use std::path::PathBuf;
use std::process::Command;
use std::time::{Duration, Instant};

use anyhow::{anyhow, ensure, Context, Result};
use qosa_cli::output::{read_csv, ResultRow};
use qosa_core::analytic::{
    analytic_indices, exponential_product_qosa, gaussian_linear_qosa, gaussian_linear_qose, laplace_kucherenko, laplace_qosa,
};
use qosa_core::coalition::Coalition;
use qosa_core::contrast::{empirical_quantile, sorted, truncated_expectation, ContrastKind, QuantileLevel};
use qosa_core::distributions::{GaussianLaw, ScalarLaw};
use qosa_core::estimators::{estimate_kucherenko_all, normalized_cost, CostEstimator, EstimatorConfig, PathChoice};
use qosa_core::models::{AdditiveTerm, ModelSpec, ScalarMap};
use qosa_core::rng::RandomStream;
use qosa_core::shapley::{aggregate, shapley_exact, shapley_permutation, CostTable, ShapleyMethod};
use rand::Rng;
use rayon::prelude::*;

const LEVELS: [f64; 5] = [0.1, 0.3, 0.5, 0.7, 0.9];

fn level(a: f64) -> QuantileLevel {
    QuantileLevel::new(a).unwrap()
}

fn pinball(a: f64) -> ContrastKind {
    ContrastKind::Pinball(level(a))
}

fn cfg(n: usize, stream: RandomStream, path: PathChoice) -> EstimatorConfig {
    EstimatorConfig {
        stream,
        path,
        ..EstimatorConfig::default().with_samples(n)
    }
}

fn bivariate_law(rho: f64) -> GaussianLaw {
    GaussianLaw::bivariate([0.0, 0.0], [1.0, 2.0], rho).unwrap()
}

fn linear(rho: f64) -> ModelSpec {
    ModelSpec::linear_gaussian(0.0, vec![1.0, 1.0], bivariate_law(rho)).unwrap()
}

fn lognormal(rho: f64) -> ModelSpec {
    ModelSpec::log_linear_gaussian(0.0, vec![1.0, 1.0], bivariate_law(rho)).unwrap()
}

fn reference_models() -> Vec<(String, ModelSpec)> {
    let mut v = Vec::new();
    for rho in [0.0, 0.75] {
        v.push((format!("linear rho={rho}"), linear(rho)));
        v.push((format!("lognormal rho={rho}"), lognormal(rho)));
    }
    v.push(("product".into(), ModelSpec::exponential_product(0.1, 1.0).unwrap()));
    v.push(("laplace".into(), ModelSpec::exponential_difference(1.0, 1.0).unwrap()));
    v
}

struct Verdict {
    passed: bool,
    detail: String,
}

fn verdict(passed: bool, detail: impl Into<String>) -> Result<Verdict> {
    Ok(Verdict {
        passed,
        detail: detail.into(),
    })
}

// 1 ----------------------------------------------------------------------

fn analytic_reference() -> Result<Verdict> {
    let law = bivariate_law(0.0);
    let beta = [1.0, 1.0];
    let r5 = 5f64.sqrt();
    let start = Instant::now();
    let (s1, st1) = gaussian_linear_qosa(&beta, &law, 0)?;
    let sh1 = gaussian_linear_qose(&beta, &law, 0)?;
    let sh2 = gaussian_linear_qose(&beta, &law, 1)?;
    let elapsed = start.elapsed();
    let err = [(s1, 1.0 - 2.0 / r5), (st1, 1.0 / r5), (sh1, 0.5 - 1.0 / r5 + 1.0 / (2.0 * r5)), (sh1 + sh2, 1.0)]
        .iter()
        .map(|(g, e)| (g - e).abs())
        .fold(0.0, f64::max);
    verdict(
        err <= 1e-12 && elapsed < Duration::from_millis(1),
        format!("max error {err:.2e} (tol 1e-12), {:.1} us (limit 1 ms)", elapsed.as_secs_f64() * 1e6),
    )
}

// 2 ----------------------------------------------------------------------

fn mc_convergence() -> Result<Verdict> {
    let n = 1_000_000;
    let mut jobs = Vec::new();
    for (name, family) in [("linear", linear as fn(f64) -> ModelSpec), ("lognormal", lognormal)] {
        for rho in [0.0, 0.75] {
            for a in LEVELS {
                for path in [PathChoice::Exact, PathChoice::Knn] {
                    jobs.push((name, family(rho), rho, a, path));
                }
            }
        }
    }
    let errors: Vec<(PathChoice, f64, String)> = jobs
        .par_iter()
        .enumerate()
        .map(|(slot, (name, m, rho, a, path))| -> Result<_> {
            let reference = analytic_indices(m, pinball(*a))?;
            let est = CostEstimator::new(m, pinball(*a), &cfg(n, RandomStream::new(2).substream(slot as u64), *path))?;
            let sh = aggregate(&est, ShapleyMethod::Exact, false)?.values;
            let mut err = 0f64;
            for i in 0..2 {
                err = err
                    .max((est.first_order(i)?.value - reference.first_order[i]).abs())
                    .max((est.total(i)?.value - reference.total[i]).abs())
                    .max((sh[i] - reference.shapley[i]).abs());
            }
            Ok((*path, err, format!("{name} rho={rho} alpha={a}")))
        })
        .collect::<Result<_>>()?;
    let worst = |p: PathChoice| errors.iter().filter(|e| e.0 == p).max_by(|x, y| x.1.total_cmp(&y.1)).cloned().unwrap();
    let (ex, kn) = (worst(PathChoice::Exact), worst(PathChoice::Knn));
    verdict(
        ex.1 <= 0.02 && kn.1 <= 0.05,
        format!("exact path max error {:.4} at {} (tol 0.02); kNN max error {:.4} at {} (tol 0.05)", ex.1, ex.2, kn.1, kn.2),
    )
}

// 3 ----------------------------------------------------------------------

fn product_gap(a: f64) -> Result<f64> {
    let (s, st) = exponential_product_qosa(0.1, 1.0, level(a))?;
    Ok(st - s)
}

fn product_crossing() -> Result<Verdict> {
    let grid: Vec<f64> = (1..1000).map(|k| k as f64 / 1000.0).collect();
    let gaps = grid.iter().map(|&a| product_gap(a)).collect::<Result<Vec<_>>>()?;
    let changes: Vec<usize> = (1..gaps.len()).filter(|&k| (gaps[k - 1] > 0.0) != (gaps[k] > 0.0)).collect();
    ensure!(changes.len() == 1, "{} sign changes of ST - S on the grid", changes.len());
    let (mut lo, mut hi) = (grid[changes[0] - 1], grid[changes[0]]);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if product_gap(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = 0.5 * (lo + hi);
    let mut above_ok = true;
    for (&a, &g) in grid.iter().zip(&gaps).filter(|(a, _)| **a > root) {
        let (s, _) = exponential_product_qosa(0.1, 1.0, level(a))?;
        above_ok &= g < 0.0 && 2.0 * s > 1.0;
    }
    verdict(
        (0.94..=0.98).contains(&root) && above_ok,
        format!("unique crossing at alpha* = {root:.9} (window [0.94, 0.98]); ST < S and S1 + S2 > 1 above it: {above_ok}"),
    )
}

// 4 ----------------------------------------------------------------------

fn direction_changes(v: &[f64]) -> usize {
    let d: Vec<f64> = v.windows(2).map(|w| w[1] - w[0]).filter(|x| x.abs() > 1e-15).collect();
    d.windows(2).filter(|w| (w[0] > 0.0) != (w[1] > 0.0)).count()
}

fn laplace_pathologies() -> Result<Verdict> {
    let below: Vec<f64> = (1..500).map(|k| laplace_kucherenko(level(k as f64 / 1000.0))[0].absolute).collect();
    let spread = below.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - below.iter().cloned().fold(f64::INFINITY, f64::min);
    let grid: Vec<[f64; 2]> = (1..100)
        .map(|k| {
            let v = laplace_kucherenko(level(k as f64 / 100.0));
            [v[0].squared, v[1].squared]
        })
        .collect();
    let changes: Vec<usize> = (0..2).map(|i| direction_changes(&grid.iter().map(|r| r[i]).collect::<Vec<_>>())).collect();
    let model = ModelSpec::exponential_difference(1.0, 1.0)?;
    let mut mc_err = (0f64, 0f64, String::new());
    for (slot, a) in LEVELS.into_iter().enumerate() {
        let c = cfg(100_000, RandomStream::new(4).substream(slot as u64), PathChoice::Auto);
        let est = estimate_kucherenko_all(&model, level(a), &c)?;
        let exact = laplace_kucherenko(level(a));
        let q = laplace_qosa(1.0, 1.0, level(a))?;
        let qe = CostEstimator::new(&model, pinball(a), &c)?;
        for i in 0..2 {
            let pairs = [
                ("kucherenko_abs", est[i].absolute, exact[i].absolute),
                ("kucherenko_sq", est[i].squared, exact[i].squared),
                ("kucherenko_abs_norm", est[i].normalized_absolute, exact[i].normalized_absolute),
                ("kucherenko_sq_norm", est[i].normalized_squared, exact[i].normalized_squared),
                ("qosa_first", qe.first_order(i)?, q[2 * i]),
                ("qosa_total", qe.total(i)?, q[2 * i + 1]),
            ];
            for (name, e, x) in pairs {
                let err = (e.value - x).abs();
                if err > mc_err.0 {
                    mc_err = (err, e.std_error, format!("{name} input {} alpha={a}", i + 1));
                }
            }
        }
    }
    verdict(
        spread <= 1e-12 && changes.iter().all(|&c| c >= 1) && mc_err.0 <= 0.02,
        format!(
            "q11 spread below 1/2 {spread:.1e} (tol 1e-12); direction changes of q12, q22: {changes:?}; MC max error {:.4} (se {:.4}) at {}, n = 1e5 (tol 0.02)",
            mc_err.0, mc_err.1, mc_err.2
        ),
    )
}

// 5 ----------------------------------------------------------------------

fn quantile_subsets() -> Result<Verdict> {
    let mut rng = RandomStream::new(5).rng();
    let (mut events, mut violations) = (0usize, 0usize);
    for _ in 0..200 {
        let n = rng.random_range(2..=10);
        let mut atoms = std::collections::BTreeSet::new();
        while atoms.len() < n {
            atoms.insert(rng.random_range(-1000i64..1000));
        }
        let x: Vec<f64> = atoms.into_iter().map(|v| v as f64).collect();
        let s = sorted(&x);
        for k in 1..n {
            let q = empirical_quantile(&s, level(k as f64 / n as f64))?;
            let lowest = truncated_expectation(&x, q)?;
            for mask in (0u32..1 << n).filter(|m| m.count_ones() as usize == k) {
                events += 1;
                let e = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| x[i]).sum::<f64>() / n as f64;
                violations += usize::from(lowest > e);
            }
        }
    }
    verdict(violations == 0, format!("{violations} violations over {events} events of 200 distributions"))
}

// 6 ----------------------------------------------------------------------

fn dyadic(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| (x * 1048576.0).round() / 1048576.0).collect()
}

fn random_additive<R: Rng>(rng: &mut R) -> ModelSpec {
    let d = rng.random_range(2..=5);
    let terms = (0..d)
        .map(|_| AdditiveTerm {
            map: ScalarMap::Linear {
                coef: rng.random_range(0.2..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 },
            },
            law: ScalarLaw::normal(rng.random_range(-1.0..1.0), rng.random_range(0.2..2.0)).unwrap(),
        })
        .collect();
    ModelSpec::additive(rng.random_range(-1.0..1.0), terms).unwrap()
}

fn property_suites() -> Result<Verdict> {
    let stream = RandomStream::new(6);
    // exact-conditional path, features snapped to a dyadic grid
    let model = linear(0.5);
    let mut exact_mismatch = 0usize;
    for a in LEVELS {
        let est = CostEstimator::new(&model, pinball(a), &cfg(20_000, stream, PathChoice::Exact))?;
        let y = dyadic(est.outputs());
        let f = dyadic(&est.conditional_features(Coalition::singleton(1))?);
        let base = normalized_cost(&y, &f, pinball(a), 16)?;
        for (c, k) in [(3.25, 1.0), (-17.0, 1.0), (0.0, 4.0), (0.0, 0.125)] {
            let map = |v: &[f64]| v.iter().map(|x| x * k + c).collect::<Vec<_>>();
            exact_mismatch += usize::from(normalized_cost(&map(&y), &map(&f), pinball(a), 16)? != base);
        }
    }
    // nearest-neighbour path on one fixed input sample
    let sample = model.sample(20_000, &stream.substream(1));
    let y = dyadic(&sample.outputs);
    let mut knn_mismatch = 0usize;
    for a in LEVELS {
        let e = |out: Vec<f64>| -> Result<Vec<u64>> {
            let est = CostEstimator::from_sample(None, sample.inputs.clone(), out, pinball(a), &cfg(20_000, stream, PathChoice::Knn))?;
            Ok([est.first_order(0)?.value, est.first_order(1)?.value, est.total(0)?.value].map(f64::to_bits).to_vec())
        };
        let base = e(y.clone())?;
        for (c, k) in [(5.5, 1.0), (0.0, 2.0), (-1.0, 0.25)] {
            knn_mismatch += usize::from(e(y.iter().map(|v| v * k + c).collect())? != base);
        }
    }
    // negative homothety swaps the level
    let n = 50_000;
    let neg = ModelSpec::linear_gaussian(0.0, vec![-1.0, -1.0], bivariate_law(0.5))?;
    let mut flip = 0f64;
    for a in LEVELS {
        let p = CostEstimator::new(&model, pinball(1.0 - a), &cfg(n, stream.substream(2), PathChoice::Exact))?;
        let q = CostEstimator::new(&neg, pinball(a), &cfg(n, stream.substream(2), PathChoice::Exact))?;
        for i in 0..2 {
            flip = flip.max((p.first_order(i)?.value - q.first_order(i)?.value).abs());
        }
    }
    // additive independent Gaussian models
    let mut rng = stream.substream(3).rng();
    let models: Vec<(ModelSpec, f64)> = (0..50).map(|_| (random_additive(&mut rng), rng.random_range(0.05..0.95))).collect();
    let mut analytic_excess = f64::NEG_INFINITY;
    for (m, a) in &models {
        let set = analytic_indices(m, pinball(*a))?;
        analytic_excess = analytic_excess.max(set.first_order.iter().sum::<f64>() - 1.0);
        for i in 0..m.dim() {
            analytic_excess = analytic_excess.max(set.first_order[i] - set.total[i]);
        }
    }
    let mc_excess = models
        .par_iter()
        .enumerate()
        .map(|(slot, (m, a))| -> Result<f64> {
            let est = CostEstimator::new(m, pinball(*a), &cfg(50_000, stream.substream(10 + slot as u64), PathChoice::Auto))?;
            let d = est.dim();
            let full = Coalition::full(d);
            let terms: Vec<_> = (0..d).map(|i| (-1.0, full.without(i))).collect();
            let sum = est.combination(d as f64 - 1.0, &terms)?;
            let mut w = sum.value - 3.0 * sum.std_error;
            for i in 0..d {
                let gap = est.combination(1.0, &[(-1.0, full.without(i)), (-1.0, Coalition::singleton(i))])?;
                w = w.max(gap.value - 3.0 * gap.std_error);
            }
            Ok(w)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(f64::NEG_INFINITY, f64::max);
    verdict(
        exact_mismatch == 0 && knn_mismatch == 0 && flip <= 20.0 / n as f64 && analytic_excess <= 0.0 && mc_excess <= 0.0,
        format!(
            "shift/scale bit mismatches: exact path {exact_mismatch}, kNN path {knn_mismatch}; |S(-Y, a) - S(Y, 1-a)| {flip:.1e} (tol 20/n = {:.0e}); \
             analytic max(sum S - 1, S - ST) {analytic_excess:.2e}; MC max(excess - 3 se) {mc_excess:.4}",
            20.0 / n as f64
        ),
    )
}

// 7 ----------------------------------------------------------------------

fn random_table<R: Rng>(d: usize, rng: &mut R) -> CostTable {
    let mut c: Vec<f64> = (0..1usize << d).map(|_| rng.random_range(0.0..1.0)).collect();
    c[0] = 0.0;
    CostTable::new(d, c).unwrap()
}

fn all_orders(d: usize) -> Vec<Vec<usize>> {
    if d == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for p in all_orders(d - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, d - 1);
            out.push(q);
        }
    }
    out
}

fn shapley_suite() -> Result<Verdict> {
    let mut rng = RandomStream::new(7).rng();
    let mut brute = 0f64;
    for d in 1..=5 {
        for _ in 0..4 {
            let t = random_table(d, &mut rng);
            let orders = all_orders(d);
            let mut avg = vec![0.0; d];
            for p in &orders {
                let mut j = Coalition::EMPTY;
                for &i in p {
                    avg[i] += t.costs()[j.with(i).mask() as usize] - t.costs()[j.mask() as usize];
                    j = j.with(i);
                }
            }
            let v = shapley_exact(&t)?.values;
            for i in 0..d {
                brute = brute.max((avg[i] / orders.len() as f64 - v[i]).abs());
            }
        }
    }
    let mut axioms = 0f64;
    for d in 2..=6 {
        let (a, b) = (random_table(d, &mut rng), random_table(d, &mut rng));
        let (va, vb, vab) = (shapley_exact(&a)?.values, shapley_exact(&b)?.values, shapley_exact(&a.add(&b)?)?.values);
        axioms = axioms.max((va.iter().sum::<f64>() - a.grand()).abs());
        for i in 0..d {
            axioms = axioms.max((vab[i] - va[i] - vb[i]).abs());
        }
        // last player is a dummy; the first two are interchangeable
        let game: Vec<f64> = (0..1u64 << d)
            .map(|m| {
                let mut c = Coalition::from_mask(m).without(d - 1);
                if c.contains(0) != c.contains(1) {
                    c = c.without(1).with(0);
                }
                a.costs()[c.mask() as usize]
            })
            .collect();
        let v = shapley_exact(&CostTable::new(d, game)?)?.values;
        axioms = axioms.max(v[d - 1].abs());
        if d > 2 {
            axioms = axioms.max((v[0] - v[1]).abs());
        }
    }
    let mut z = 0f64;
    for t in 0..3 {
        let table = random_table(6, &mut rng);
        let exact = shapley_exact(&table)?.values;
        let s = shapley_permutation(&table, 4000, &RandomStream::new(7).substream(1 + t))?;
        let se = s.std_errors.as_ref().context("sampler reports std errors")?;
        for i in 0..6 {
            z = z.max((s.values[i] - exact[i]).abs() / se[i]);
        }
    }
    verdict(
        brute <= 1e-12 && axioms <= 1e-12 && z <= 3.0,
        format!("brute force d<=5 {brute:.1e}; axioms {axioms:.1e} (tol 1e-12); sampler max |err|/se on d=6 {z:.2} (tol 3)"),
    )
}

// 8 ----------------------------------------------------------------------

fn monotone_costs() -> Result<Verdict> {
    let models = reference_models();
    let mut jobs = Vec::new();
    for (mi, _) in models.iter().enumerate() {
        for a in LEVELS {
            jobs.push((mi, a));
        }
    }
    let (worst, at) = jobs
        .par_iter()
        .enumerate()
        .map(|(slot, &(mi, a))| -> Result<(f64, String)> {
            let est = CostEstimator::new(&models[mi].1, pinball(a), &cfg(100_000, RandomStream::new(8).substream(slot as u64), PathChoice::Auto))?;
            let d = est.dim();
            let mut worst = (f64::INFINITY, String::new());
            for j in Coalition::all(d) {
                for i in (0..d).filter(|&i| !j.contains(i)) {
                    let inc = est.increment(j, i)?;
                    let z = if inc.std_error > 0.0 { inc.value / inc.std_error } else if inc.value >= 0.0 { f64::INFINITY } else { f64::NEG_INFINITY };
                    if z < worst.0 {
                        worst = (z, format!("{} alpha={a} J={j} i={}", models[mi].0, i + 1));
                    }
                }
            }
            Ok(worst)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .min_by(|x, y| x.0.total_cmp(&y.0))
        .ok_or_else(|| anyhow!("no models"))?;
    verdict(worst >= -3.0, format!("smallest increment / std error {worst:.2} at {at} (bound -3), n = 1e5"))
}

// 9 ----------------------------------------------------------------------

struct Sweep {
    file: &'static str,
    args: &'static [&'static str],
}

const SWEEPS: [Sweep; 6] = [
    Sweep {
        file: "product_alpha.csv",
        args: &["sweep-alpha", "--model", "exp-product", "--indices", "qosa_first,qosa_total"],
    },
    Sweep {
        file: "gaussian_alpha.csv",
        args: &["sweep-alpha", "--model", "gaussian-linear-2d", "--rho", "0,0.75", "--indices", "qosa_first,qosa_total,qose"],
    },
    Sweep {
        file: "gaussian_rho.csv",
        args: &["sweep-rho", "--model", "gaussian-linear-2d", "--rho-grid", "-1:1:0.05", "--alpha", "0.1,0.5,0.9", "--indices", "qosa_first,qosa_total,qose"],
    },
    Sweep {
        file: "lognormal_alpha.csv",
        args: &["sweep-alpha", "--model", "gaussian-lognormal-2d", "--rho", "0,0.75", "--indices", "qosa_first,qosa_total,qose"],
    },
    Sweep {
        file: "lognormal_rho.csv",
        args: &["sweep-rho", "--model", "gaussian-lognormal-2d", "--rho-grid", "-1:1:0.05", "--alpha", "0.1,0.5,0.9", "--indices", "qosa_first,qosa_total,qose"],
    },
    Sweep {
        file: "laplace_alpha.csv",
        args: &["sweep-alpha", "--model", "laplace", "--indices", "qosa_first,qosa_total,kucherenko"],
    },
];

fn qosa(args: &[&str], threads: &str) -> Result<Vec<u8>> {
    let out = Command::new(env!("CARGO_BIN_EXE_qosa")).args(args).args(["--threads", threads]).env_remove("QOSA_SEED").output()?;
    ensure!(out.status.success(), "qosa {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    Ok(out.stdout)
}

/// Values of one (index, input) series keyed by (alpha, rho).
fn series<'a>(rows: &'a [ResultRow], index: &'a str, input: &'a str) -> impl Iterator<Item = &'a ResultRow> + 'a {
    rows.iter().filter(move |r| r.index == index && r.input == input)
}

fn value(rows: &[ResultRow], index: &str, input: &str, alpha: f64, rho: Option<f64>) -> f64 {
    series(rows, index, input).find(|r| r.alpha == Some(alpha) && r.rho == rho).map(|r| r.value).unwrap_or(f64::NAN)
}

fn column(rows: &[ResultRow], index: &str, input: &str, select: impl Fn(&ResultRow) -> bool) -> Vec<f64> {
    series(rows, index, input).filter(|r| select(r)).map(|r| r.value).collect()
}

fn sandwich_holds(rows: &[ResultRow]) -> bool {
    rows.iter().filter(|r| r.index == "qose").all(|r| {
        let (a, rho) = (r.alpha.unwrap(), r.rho);
        let s = value(rows, "qosa_first", &r.input, a, rho);
        let st = value(rows, "qosa_total", &r.input, a, rho);
        s.min(st) - 1e-12 <= r.value && r.value <= s.max(st) + 1e-12
    })
}

fn figure_checks(name: &str, rows: &[ResultRow]) -> Vec<(String, bool)> {
    let mut c = Vec::new();
    let mut check = |what: &str, ok: bool| c.push((format!("{name}: {what}"), ok));
    let nondecreasing = |v: &[f64]| v.windows(2).all(|w| w[1] >= w[0] - 1e-12);
    let nonincreasing = |v: &[f64]| v.windows(2).all(|w| w[1] <= w[0] + 1e-12);
    match name {
        "product_alpha.csv" => {
            let s = column(rows, "qosa_first", "1", |_| true);
            let st = column(rows, "qosa_total", "1", |_| true);
            check("S rises, ST falls in alpha", nondecreasing(&s) && nonincreasing(&st));
            let crossings = s.iter().zip(&st).map(|(a, b)| b < a).collect::<Vec<_>>().windows(2).filter(|w| w[0] != w[1]).count();
            let first = s.iter().zip(&st).position(|(a, b)| b < a).map(|k| (k + 1) as f64 / 100.0).unwrap_or(f64::NAN);
            check("single S/ST crossing near 0.96", crossings == 1 && (0.94..=0.98).contains(&first));
            check("S1 + S2 > 1 beyond the crossing", rows.iter().filter(|r| r.index == "qosa_first" && r.alpha.unwrap() > 0.97).all(|r| 2.0 * r.value > 1.0));
        }
        "gaussian_alpha.csv" => {
            let flat = ["qosa_first", "qosa_total", "qose"].iter().all(|k| {
                [Some(0.0), Some(0.75)].iter().all(|rho| {
                    let v = column(rows, k, "1", |r| r.rho == *rho);
                    v.iter().all(|x| (x - v[0]).abs() < 1e-12)
                })
            });
            check("indices constant in alpha", flat);
            check(
                "S <= Sh <= ST with independent inputs",
                rows.iter().filter(|r| r.index == "qose" && r.rho == Some(0.0)).all(|r| {
                    let a = r.alpha.unwrap();
                    value(rows, "qosa_first", &r.input, a, r.rho) <= r.value && r.value <= value(rows, "qosa_total", &r.input, a, r.rho)
                }),
            );
            check("sandwich at every grid point", sandwich_holds(rows));
        }
        "gaussian_rho.csv" | "lognormal_rho.csv" => {
            let at = |rho: f64, k: &str, i: &str| column(rows, k, i, |r| r.rho == Some(rho));
            let limits = [-1.0, 1.0].iter().all(|&rho| {
                ["1", "2"].iter().all(|i| at(rho, "qosa_total", i).iter().all(|v| v.abs() < 1e-12) && at(rho, "qose", i).iter().all(|v| (v - 0.5).abs() < 1e-12))
            });
            check("ST -> 0 and Sh -> 1/2 as |rho| -> 1", limits);
            let inverted = ["1", "2"].iter().all(|i| {
                series(rows, "qosa_total", i).any(|r| r.value <= value(rows, "qosa_first", i, r.alpha.unwrap(), r.rho))
            });
            check("ST_i <= S_i for some rho, each input", inverted);
            check("sandwich at every grid point", sandwich_holds(rows));
            if name == "lognormal_rho.csv" {
                let diff = |a: f64, r: f64| value(rows, "qose", "2", a, Some(r)) - value(rows, "qose", "1", a, Some(r));
                let interior: Vec<f64> = (-18..=18).map(|k| k as f64 * 0.05).map(|r| (r * 1e12).round() / 1e12).collect();
                check("X2 dominates QOSE at alpha=0.9 away from |rho|=1", interior.iter().all(|&r| diff(0.9, r) > 0.0));
                let small = interior.iter().map(|&r| diff(0.1, r).abs()).fold(0.0, f64::max);
                let large = interior.iter().map(|&r| diff(0.9, r).abs()).fold(0.0, f64::max);
                check("QOSE of both inputs closer at alpha=0.1 than at 0.9", small < large);
            }
        }
        "lognormal_alpha.csv" => {
            let dep = |k: &str, i: &str| column(rows, k, i, |r| r.rho == Some(0.75));
            check("rho=0.75: S1 increases with alpha", nondecreasing(&dep("qosa_first", "1")));
            let st2 = dep("qosa_total", "2");
            check("rho=0.75: ST2 decreases toward high alpha", nonincreasing(&st2[49..]) && st2[98] < st2[49]);
            check(
                "rho=0: first-order of X1 small below alpha=0.5",
                column(rows, "qosa_first", "1", |r| r.rho == Some(0.0) && r.alpha.unwrap() <= 0.5).iter().all(|&v| v < 0.05),
            );
            let inverted = ["1", "2"].iter().all(|i| {
                series(rows, "qosa_total", i).filter(|r| r.rho == Some(0.0)).any(|r| r.value <= value(rows, "qosa_first", i, r.alpha.unwrap(), r.rho))
            });
            check("rho=0: ST_i <= S_i from some level on", inverted);
            check("sandwich at every grid point", sandwich_holds(rows));
        }
        "laplace_alpha.csv" => {
            let side = |k: &str, i: &str, lower: bool| column(rows, k, i, |r| (r.alpha.unwrap() < 0.5) == lower && r.alpha != Some(0.5));
            let flat = |v: &[f64]| v.iter().all(|x| (x - v[0]).abs() < 1e-12);
            check(
                "q_1j flat below 1/2, q_2j flat above",
                ["kucherenko_abs", "kucherenko_sq"].iter().all(|k| flat(&side(k, "1", true)) && flat(&side(k, "2", false))),
            );
            check(
                "q_i2 not monotone",
                ["1", "2"].iter().all(|i| direction_changes(&column(rows, "kucherenko_sq", i, |_| true)) >= 1),
            );
            let ordered = rows.iter().filter(|r| r.index == "qosa_first" && r.input == "1" && r.alpha != Some(0.5)).all(|r| {
                let a = r.alpha.unwrap();
                (r.value > value(rows, "qosa_first", "2", a, None)) == (a > 0.5)
            });
            check("X1 dominates above 1/2, X2 below", ordered);
        }
        _ => check("known sweep", false),
    }
    c
}

fn golden_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("golden")
}

fn figure_sweeps() -> Result<Verdict> {
    let bless = std::env::var_os("QOSA_BLESS").is_some();
    let mut failures = Vec::new();
    let mut checks = 0;
    for sweep in &SWEEPS {
        let bytes = qosa(sweep.args, "4")?;
        ensure!(qosa(sweep.args, "1")? == bytes, "{}: output depends on the thread count", sweep.file);
        let parsed = read_csv(bytes.as_slice())?;
        for (what, ok) in figure_checks(sweep.file, &parsed.rows) {
            checks += 1;
            if !ok {
                failures.push(what);
            }
        }
        let path = golden_dir().join(sweep.file);
        if bless {
            std::fs::create_dir_all(golden_dir())?;
            std::fs::write(&path, &bytes)?;
        } else {
            let golden = std::fs::read(&path).with_context(|| format!("missing golden file {} (run with QOSA_BLESS=1)", path.display()))?;
            if golden != bytes {
                failures.push(format!("{}: differs from golden file", sweep.file));
            }
        }
    }
    let detail = if failures.is_empty() {
        format!("{checks} figure checks over {} sweeps, byte-identical to golden files and across thread counts", SWEEPS.len())
    } else {
        format!("failed: {}", failures.join("; "))
    };
    verdict(failures.is_empty(), detail)
}

type Criterion = (u32, &'static str, fn() -> Result<Verdict>);

const CRITERIA: [Criterion; 9] = [
    (1, "analytic Gaussian 2-d reference values", analytic_reference),
    (2, "Monte Carlo vs analytic at n = 1e6", mc_convergence),
    (3, "exponential product crossing", product_crossing),
    (4, "Laplace / Kucherenko pathologies", laplace_pathologies),
    (5, "lower-tail subset means by brute force", quantile_subsets),
    (6, "invariance and additive-model property suites", property_suites),
    (7, "Shapley axioms, brute force, permutation sampler", shapley_suite),
    (8, "coalition-cost monotonicity", monotone_costs),
    (9, "figure sweeps and golden files", figure_sweeps),
];

fn main() {
    let selected: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = Vec::new();
    let mut ran = 0;
    for (id, title, run) in CRITERIA {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let v = run().unwrap_or_else(|e| Verdict {
            passed: false,
            detail: format!("error: {e:#}"),
        });
        if !v.passed {
            failed.push(id.to_string());
        }
        println!(
            "criterion {id} {} {title} [{:.1}s]: {}",
            if v.passed { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            v.detail
        );
    }
    if failed.is_empty() {
        println!("acceptance: {ran}/{ran} criteria pass");
    } else {
        println!("acceptance: {}/{ran} criteria pass; failing: {}", ran - failed.len(), failed.join(", "));
        if std::env::var_os("QOSA_ACCEPTANCE_STRICT").is_some_and(|v| v == "1") {
            std::process::exit(1);
        }
    }
}
