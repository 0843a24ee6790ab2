//! Result rows and their CSV, JSON and gnuplot renderings.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

pub const RESULTS_SCHEMA_VERSION: u32 = 1;

pub const CSV_COLUMNS: [&str; 10] = ["model", "alpha", "rho", "input", "index", "value", "std_error", "n_samples", "seed", "engine"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub model: String,
    pub alpha: Option<f64>,
    pub rho: Option<f64>,
    /// 1-based input number, or `1+2` for a group.
    pub input: String,
    pub index: String,
    pub value: f64,
    pub std_error: Option<f64>,
    pub n_samples: Option<usize>,
    pub seed: Option<u64>,
    pub engine: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

/// 17 significant digits: enough to round-trip every `f64`.
pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_real(x: Option<f64>) -> String {
    x.map(real).unwrap_or_default()
}

pub fn write_csv<W: Write>(out: W, rows: &[ResultRow], config: &serde_json::Value) -> Result<()> {
    let mut out = out;
    writeln!(out, "# qosa results schema_version={RESULTS_SCHEMA_VERSION}")?;
    writeln!(out, "# config {}", serde_json::to_string(config)?)?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_COLUMNS)?;
    for r in rows {
        w.write_record([
            r.model.clone(),
            opt_real(r.alpha),
            opt_real(r.rho),
            r.input.clone(),
            r.index.clone(),
            real(r.value),
            opt_real(r.std_error),
            r.n_samples.map(|n| n.to_string()).unwrap_or_default(),
            r.seed.map(|s| s.to_string()).unwrap_or_default(),
            r.engine.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Parsed CSV result file: header comments and rows.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvResults {
    pub schema_version: u32,
    pub config: serde_json::Value,
    pub rows: Vec<ResultRow>,
}

pub fn read_csv<R: BufRead>(mut input: R) -> Result<CsvResults> {
    let mut schema_version = None;
    let mut config = serde_json::Value::Null;
    let mut body = String::new();
    let mut line = String::new();
    while input.read_line(&mut line)? > 0 {
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(v) = comment.strip_prefix("qosa results schema_version=") {
                schema_version = Some(v.parse::<u32>().context("bad schema_version")?);
            } else if let Some(c) = comment.strip_prefix("config ") {
                config = serde_json::from_str(c).context("bad config header")?;
            }
        } else {
            body.push_str(&line);
        }
        line.clear();
    }
    let Some(schema_version) = schema_version else {
        bail!("missing schema_version header");
    };
    if schema_version != RESULTS_SCHEMA_VERSION {
        bail!("unsupported results schema_version {schema_version}");
    }
    let mut rdr = csv::Reader::from_reader(body.as_bytes());
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != CSV_COLUMNS {
        bail!("unexpected CSV columns {header:?}");
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let field = |i: usize| rec.get(i).unwrap_or("");
        let opt_f = |i: usize| -> Result<Option<f64>> {
            let s = field(i);
            if s.is_empty() {
                Ok(None)
            } else {
                Ok(Some(s.parse().with_context(|| format!("bad number {s:?}"))?))
            }
        };
        let n_samples = match field(7) {
            "" => None,
            s => Some(s.parse()?),
        };
        let seed = match field(8) {
            "" => None,
            s => Some(s.parse()?),
        };
        rows.push(ResultRow {
            model: field(0).to_string(),
            alpha: opt_f(1)?,
            rho: opt_f(2)?,
            input: field(3).to_string(),
            index: field(4).to_string(),
            value: opt_f(5)?.context("missing value")?,
            std_error: opt_f(6)?,
            n_samples,
            seed,
            engine: field(9).to_string(),
        });
    }
    Ok(CsvResults {
        schema_version,
        config,
        rows,
    })
}

#[derive(Serialize)]
struct JsonPoint<'a> {
    alpha: Option<f64>,
    rho: Option<f64>,
    input: &'a str,
    value: f64,
    std_error: Option<f64>,
    n_samples: Option<usize>,
    seed: Option<u64>,
    engine: &'a str,
}

/// Nested JSON: model id -> index kind -> points, in row order.
pub fn to_json(rows: &[ResultRow], config: &serde_json::Value) -> Result<serde_json::Value> {
    let mut models: Vec<(&str, Vec<(&str, Vec<JsonPoint>)>)> = Vec::new();
    for r in rows {
        if models.last().is_none_or(|(m, _)| *m != r.model) {
            models.push((&r.model, Vec::new()));
        }
        let indices = &mut models.last_mut().expect("pushed above").1;
        let slot = match indices.iter().position(|(k, _)| *k == r.index) {
            Some(p) => p,
            None => {
                indices.push((&r.index, Vec::new()));
                indices.len() - 1
            }
        };
        indices[slot].1.push(JsonPoint {
            alpha: r.alpha,
            rho: r.rho,
            input: &r.input,
            value: r.value,
            std_error: r.std_error,
            n_samples: r.n_samples,
            seed: r.seed,
            engine: &r.engine,
        });
    }
    let models: Vec<serde_json::Value> = models
        .into_iter()
        .map(|(id, indices)| {
            let mut map = serde_json::Map::new();
            for (k, points) in indices {
                map.insert(k.to_string(), serde_json::to_value(points)?);
            }
            Ok(serde_json::json!({ "model": id, "indices": map }))
        })
        .collect::<Result<_>>()?;
    Ok(serde_json::json!({
        "schema_version": RESULTS_SCHEMA_VERSION,
        "config": config,
        "models": models,
    }))
}

pub fn write_results<W: Write>(mut out: W, rows: &[ResultRow], config: &serde_json::Value, format: Format) -> Result<()> {
    match format {
        Format::Csv => write_csv(out, rows, config),
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, &to_json(rows, config)?)?;
            writeln!(out)?;
            Ok(())
        }
    }
}

/// Sweep variable of a gnuplot data file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Abscissa {
    Alpha,
    Rho,
}

/// One whitespace-separated `x value std_error` file per
/// (model, index, input, other coordinate). Returns the written paths.
pub fn write_gnuplot(dir: &Path, rows: &[ResultRow], x: Abscissa) -> Result<Vec<std::path::PathBuf>> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut series: BTreeMap<String, Vec<&ResultRow>> = BTreeMap::new();
    for r in rows {
        let (xv, other) = match x {
            Abscissa::Alpha => (r.alpha, r.rho.map(|v| format!("_rho{v}"))),
            Abscissa::Rho => (r.rho, r.alpha.map(|v| format!("_alpha{v}"))),
        };
        if xv.is_none() {
            continue;
        }
        let name = format!("{}_{}_x{}{}.dat", r.model, r.index, r.input.replace('+', "-"), other.unwrap_or_default());
        series.entry(name).or_default().push(r);
    }
    let mut paths = Vec::new();
    for (name, rows) in series {
        let path = dir.join(name);
        let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
        writeln!(f, "# {} value std_error", if x == Abscissa::Alpha { "alpha" } else { "rho" })?;
        for r in rows {
            let xv = if x == Abscissa::Alpha { r.alpha } else { r.rho };
            writeln!(f, "{} {} {}", opt_real(xv), real(r.value), r.std_error.map(real).unwrap_or_else(|| "0".into()))?;
        }
        f.flush()?;
        paths.push(path);
    }
    Ok(paths)
}
