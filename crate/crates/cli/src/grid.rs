//! `start:stop:step` grids and comma-separated level lists.

use std::fmt;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

const MAX_POINTS: usize = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Grid {
    /// Points `start + k step` up to `stop`, rounded to 12 decimals so that
    /// `0.01:0.99:0.01` yields the literal decimal levels.
    pub fn values(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|k| {
                let v = self.start + k as f64 * self.step;
                (v * 1e12).round() / 1e12
            })
            .collect()
    }

    fn check(&self) -> Result<()> {
        if !(self.start.is_finite() && self.stop.is_finite() && self.step.is_finite()) {
            bail!("grid bounds must be finite");
        }
        if self.step <= 0.0 {
            bail!("grid step must be positive");
        }
        if self.stop < self.start {
            bail!("grid stop {} lies below start {}", self.stop, self.start);
        }
        if (self.stop - self.start) / self.step > MAX_POINTS as f64 {
            bail!("grid has more than {MAX_POINTS} points");
        }
        Ok(())
    }
}

impl FromStr for Grid {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let [a, b, c] = parts.as_slice() else {
            bail!("expected start:stop:step, got {s:?}");
        };
        let num = |t: &str| t.trim().parse::<f64>().with_context(|| format!("bad number {t:?} in grid {s:?}"));
        let g = Grid {
            start: num(a)?,
            stop: num(b)?,
            step: num(c)?,
        };
        g.check()?;
        Ok(g)
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.start, self.stop, self.step)
    }
}

/// A grid (`s:e:step`) or a comma-separated list of values.
pub fn parse_values(s: &str) -> Result<Vec<f64>> {
    let values = if s.contains(':') {
        s.parse::<Grid>()?.values()
    } else {
        s.split(',')
            .map(|t| t.trim().parse::<f64>().with_context(|| format!("bad number {t:?}")))
            .collect::<Result<Vec<_>>>()?
    };
    if values.is_empty() {
        bail!("empty value list");
    }
    Ok(values)
}

pub fn check_levels(alphas: &[f64]) -> Result<()> {
    for &a in alphas {
        if !(a > 0.0 && a < 1.0) {
            bail!("quantile level {a} outside (0, 1)");
        }
    }
    Ok(())
}

pub fn check_correlations(rhos: &[f64]) -> Result<()> {
    for &r in rhos {
        if !(-1.0..=1.0).contains(&r) {
            bail!("correlation {r} outside [-1, 1]");
        }
    }
    Ok(())
}
