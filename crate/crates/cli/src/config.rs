//! Run settings: command-line flags over a JSON config file over defaults.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use crate::grid::parse_values;
use crate::model_file;
use crate::output::Format;
use crate::runner::{Engine, IndexKind, McSettings, PathArg, RunSpec, DEFAULT_INDICES};

/// Environment variable consulted when no seed is given.
pub const SEED_ENV: &str = "QOSA_SEED";

/// Every setting is optional so a flag, a config-file entry or a default
/// can supply it. The same struct is the config-file schema.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Settings {
    /// Builtin model id or path to a JSON model file.
    #[arg(long)]
    pub model: Option<String>,
    /// Quantile level, or a comma-separated list of levels.
    #[arg(long, allow_hyphen_values = true)]
    pub alpha: Option<String>,
    /// Quantile level grid `start:stop:step`.
    #[arg(long)]
    pub alpha_grid: Option<String>,
    /// Correlation override (two-input Gaussian models), or a list.
    #[arg(long, allow_hyphen_values = true)]
    pub rho: Option<String>,
    /// Correlation grid `start:stop:step`.
    #[arg(long, allow_hyphen_values = true)]
    pub rho_grid: Option<String>,
    /// Index kinds, comma-separated.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub indices: Option<Vec<IndexKind>>,
    #[arg(long, value_enum)]
    pub engine: Option<Engine>,
    /// Monte Carlo sample size.
    #[arg(long)]
    pub samples: Option<usize>,
    /// Inner redraws per outer point on the nested path.
    #[arg(long)]
    pub inner: Option<usize>,
    /// Base seed; falls back to $QOSA_SEED, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads (default: all cores). Never changes results.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Batches for standard errors.
    #[arg(long)]
    pub batches: Option<usize>,
    /// Neighbours on the kNN path (default ceil(n^(1/3))).
    #[arg(long)]
    pub k: Option<usize>,
    /// Conditional-feature path of the estimators.
    #[arg(long, value_enum)]
    pub path: Option<PathArg>,
    /// Sampled permutations for Shapley values instead of full enumeration.
    #[arg(long)]
    pub permutations: Option<usize>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    /// Output file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Directory for gnuplot data files.
    #[arg(long)]
    pub gnuplot: Option<PathBuf>,
    /// Adds the first-cost QOSE variant.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub experimental: Option<bool>,
}

impl Settings {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    /// Fields of `self` win; the others come from `base`. Level and
    /// correlation pairs (value, grid) are taken as a unit.
    pub fn over(self, base: Settings) -> Settings {
        let (alpha, alpha_grid) = if self.alpha.is_some() || self.alpha_grid.is_some() {
            (self.alpha, self.alpha_grid)
        } else {
            (base.alpha, base.alpha_grid)
        };
        let (rho, rho_grid) = if self.rho.is_some() || self.rho_grid.is_some() {
            (self.rho, self.rho_grid)
        } else {
            (base.rho, base.rho_grid)
        };
        Settings {
            model: self.model.or(base.model),
            alpha,
            alpha_grid,
            rho,
            rho_grid,
            indices: self.indices.or(base.indices),
            engine: self.engine.or(base.engine),
            samples: self.samples.or(base.samples),
            inner: self.inner.or(base.inner),
            seed: self.seed.or(base.seed),
            threads: self.threads.or(base.threads),
            batches: self.batches.or(base.batches),
            k: self.k.or(base.k),
            path: self.path.or(base.path),
            permutations: self.permutations.or(base.permutations),
            format: self.format.or(base.format),
            out: self.out.or(base.out),
            gnuplot: self.gnuplot.or(base.gnuplot),
            experimental: self.experimental.or(base.experimental),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Analytic,
    Estimate,
    SweepAlpha,
    SweepRho,
}

impl Command {
    fn defaults(self) -> Settings {
        let mut s = Settings::default();
        match self {
            Self::Analytic => {
                s.alpha = Some("0.5".into());
                s.engine = Some(Engine::Analytic);
            }
            Self::Estimate => {
                s.alpha = Some("0.5".into());
                s.engine = Some(Engine::MonteCarlo);
            }
            Self::SweepAlpha => {
                s.alpha_grid = Some("0.01:0.99:0.01".into());
                s.engine = Some(Engine::Analytic);
            }
            Self::SweepRho => {
                s.alpha = Some("0.1,0.5,0.9".into());
                s.rho_grid = Some("-1:1:0.05".into());
                s.engine = Some(Engine::Analytic);
            }
        }
        s
    }
}

/// Everything a command needs after merging.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub run: RunSpec,
    pub threads: Option<usize>,
    pub format: Format,
    pub out: Option<PathBuf>,
    pub gnuplot: Option<PathBuf>,
    /// The merged settings, echoed into output headers. The thread count is
    /// left out so headers do not depend on it.
    pub effective: Settings,
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(s) if !s.trim().is_empty() => Ok(Some(s.trim().parse().with_context(|| format!("${SEED_ENV}={s:?} is not a u64"))?)),
        _ => Ok(None),
    }
}

fn values(single: &Option<String>, grid: &Option<String>, what: &str) -> Result<Option<Vec<f64>>> {
    match (single, grid) {
        (Some(_), Some(_)) => bail!("give either --{what} or --{what}-grid, not both"),
        (Some(s), None) => Ok(Some(parse_values(s)?)),
        (None, Some(g)) => {
            if !g.contains(':') {
                bail!("--{what}-grid expects start:stop:step");
            }
            Ok(Some(parse_values(g)?))
        }
        (None, None) => Ok(None),
    }
}

pub fn resolve(command: Command, cli: Settings, config: Option<&Path>) -> Result<Resolved> {
    let file = match config {
        Some(p) => Settings::load(p)?,
        None => Settings::default(),
    };
    let mut merged = cli.over(file);
    if command == Command::Analytic {
        if merged.engine == Some(Engine::MonteCarlo) {
            bail!("`analytic` always uses the analytic engine; use `estimate`");
        }
        merged.engine = Some(Engine::Analytic);
    }
    if command == Command::Estimate {
        if merged.engine == Some(Engine::Analytic) {
            bail!("`estimate` always uses the Monte Carlo engine; use `analytic`");
        }
        merged.engine = Some(Engine::MonteCarlo);
    }
    if merged.seed.is_none() {
        merged.seed = env_seed()?;
    }
    let merged = merged.over(command.defaults());
    let model_ref = merged.model.clone().context("no model given (--model <builtin-id|file>)")?;
    let model = model_file::resolve(&model_ref)?;
    let alphas = values(&merged.alpha, &merged.alpha_grid, "alpha")?.context("no quantile level")?;
    let rhos = values(&merged.rho, &merged.rho_grid, "rho")?;
    if rhos.is_some() && model.model.rho().is_none() {
        bail!("model {} has no correlation parameter to sweep", model.id);
    }
    let defaults = McSettings::default();
    let mc = McSettings {
        samples: merged.samples.unwrap_or(defaults.samples),
        inner: merged.inner.unwrap_or(defaults.inner),
        batches: merged.batches.unwrap_or(defaults.batches),
        k: merged.k,
        path: merged.path.unwrap_or(defaults.path),
        permutations: merged.permutations,
    };
    let run = RunSpec {
        model,
        alphas,
        rhos,
        indices: merged.indices.clone().unwrap_or_else(|| DEFAULT_INDICES.to_vec()),
        engine: merged.engine.expect("set by command defaults"),
        seed: merged.seed.unwrap_or(0),
        mc,
        experimental: merged.experimental.unwrap_or(false),
    };
    Ok(Resolved {
        threads: merged.threads,
        format: merged.format.unwrap_or(Format::Csv),
        out: merged.out.clone(),
        gnuplot: merged.gnuplot.clone(),
        run,
        effective: Settings { threads: None, ..merged },
    })
}
