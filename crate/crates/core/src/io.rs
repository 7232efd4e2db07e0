//! CSV ingestion of `t,value` series and deterministic emission of series,
//! tables and fit results.
//!
//! Floats are written with Rust's shortest round-trip formatting, so
//! emitting and reloading a series reproduces every value exactly.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{PlcError, Result};
use crate::fit::FitResult;
use crate::series::SalesSeries;

/// Relative spacing deviation still treated as a uniform grid.
const UNIFORM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    Penetration,
    Sales,
    Price,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Units {
    Fraction,
    Count,
    Currency,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schema {
    pub kind: DatasetKind,
    pub units: Units,
}

impl Schema {
    pub fn new(kind: DatasetKind, units: Units) -> Self {
        Self { kind, units }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub kind: DatasetKind,
    pub series: SalesSeries,
    pub units: Units,
    pub source_label: String,
    /// The input grid was not uniform and has been linearly resampled.
    pub resampled: bool,
}

/// Reads a `t,value` CSV file.
pub fn load_csv(path: impl AsRef<Path>, schema: Schema) -> Result<Dataset> {
    let path = path.as_ref();
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| PlcError::io(path, e))?;
    parse_csv(&text, path, schema)
}

/// Parses `t,value` CSV text; `origin` labels errors and the dataset.
pub fn parse_csv(text: &str, origin: impl AsRef<Path>, schema: Schema) -> Result<Dataset> {
    let origin = origin.as_ref();
    let parse_err = |line: u64, message: String| PlcError::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if header.is_empty() {
        return Err(PlcError::EmptyInput(format!(
            "{}: no header",
            origin.display()
        )));
    }
    if header.len() != 2 || &header[0] != "t" || &header[1] != "value" {
        return Err(parse_err(
            1,
            format!(
                "expected header `t,value`, got `{}`",
                header.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }

    let mut rows: Vec<(f64, f64, u64)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != 2 {
            return Err(parse_err(
                line,
                format!("expected 2 fields, got {}", record.len()),
            ));
        }
        let field = |i: usize, name: &str| -> Result<f64> {
            let v: f64 = record[i]
                .parse()
                .map_err(|_| parse_err(line, format!("{name} `{}` is not a number", &record[i])))?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(parse_err(line, format!("{name} must be finite")))
            }
        };
        let t = field(0, "t")?;
        let v = field(1, "value")?;
        match schema.kind {
            DatasetKind::Price if v <= 0.0 => {
                return Err(parse_err(line, format!("price must be positive, got {v}")))
            }
            DatasetKind::Sales | DatasetKind::Penetration if v < 0.0 => {
                return Err(parse_err(
                    line,
                    format!("value must be non-negative, got {v}"),
                ))
            }
            _ => {}
        }
        if let Some((prev, _, _)) = rows.last() {
            if t <= *prev {
                return Err(parse_err(
                    line,
                    format!("times must increase, {t} follows {prev}"),
                ));
            }
        }
        rows.push((t, v, line));
    }
    if rows.is_empty() {
        return Err(PlcError::EmptyInput(format!(
            "{}: no data rows",
            origin.display()
        )));
    }

    let (series, resampled) = uniform_series(&rows)?;
    Ok(Dataset {
        kind: schema.kind,
        series,
        units: schema.units,
        source_label: origin.display().to_string(),
        resampled,
    })
}

fn uniform_series(rows: &[(f64, f64, u64)]) -> Result<(SalesSeries, bool)> {
    let t0 = rows[0].0;
    if rows.len() == 1 {
        return Ok((SalesSeries::new(t0, 1.0, vec![rows[0].1])?, false));
    }
    let gaps: Vec<f64> = rows.windows(2).map(|w| w[1].0 - w[0].0).collect();
    let span = rows[rows.len() - 1].0 - t0;
    let mean_gap = span / gaps.len() as f64;
    if gaps
        .iter()
        .all(|g| ((g - mean_gap) / mean_gap).abs() <= UNIFORM_TOL)
    {
        let values = rows.iter().map(|r| r.1).collect();
        return Ok((SalesSeries::new(t0, mean_gap, values)?, false));
    }
    let dt = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let n = (span / dt + 1e-9).floor() as usize + 1;
    let mut values = Vec::with_capacity(n);
    let mut j = 0;
    for i in 0..n {
        let t = t0 + i as f64 * dt;
        while j + 2 < rows.len() && rows[j + 1].0 <= t {
            j += 1;
        }
        let (ta, va, _) = rows[j];
        let (tb, vb, _) = rows[j + 1];
        let f = ((t - ta) / (tb - ta)).clamp(0.0, 1.0);
        values.push(va + f * (vb - va));
    }
    Ok((SalesSeries::new(t0, dt, values)?, true))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmitFormat {
    Csv,
    PlotData,
}

impl std::str::FromStr for EmitFormat {
    type Err = PlcError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "plot-data" => Ok(Self::PlotData),
            other => Err(PlcError::Config(format!(
                "unknown format `{other}`, expected csv or plot-data"
            ))),
        }
    }
}

/// Writes one series as `t,value` CSV or two-column plot data.
pub fn emit_series(series: &SalesSeries, path: impl AsRef<Path>, format: EmitFormat) -> Result<()> {
    emit_components(&[("", series)], path, format)
}

/// Writes several named series. CSV gets a `component` column when there
/// is more than one series; plot data separates components by blank lines.
pub fn emit_components(
    components: &[(&str, &SalesSeries)],
    path: impl AsRef<Path>,
    format: EmitFormat,
) -> Result<()> {
    let tagged = components.len() > 1;
    let mut out = String::new();
    match format {
        EmitFormat::Csv => {
            out.push_str(if tagged {
                "t,value,component\n"
            } else {
                "t,value\n"
            });
            for (name, s) in components {
                for (t, v) in s.times().zip(&s.values) {
                    if tagged {
                        out.push_str(&format!("{t},{v},{name}\n"));
                    } else {
                        out.push_str(&format!("{t},{v}\n"));
                    }
                }
            }
        }
        EmitFormat::PlotData => {
            for (k, (name, s)) in components.iter().enumerate() {
                if k > 0 {
                    out.push_str("\n\n");
                }
                if name.is_empty() {
                    out.push_str("# t value\n");
                } else {
                    out.push_str(&format!("# {name}: t value\n"));
                }
                for (t, v) in s.times().zip(&s.values) {
                    out.push_str(&format!("{t} {v}\n"));
                }
            }
        }
    }
    write_text(path, &out)
}

/// Writes fit parameters as `parameter,value` CSV or plot data, followed by
/// loss, evaluation count and convergence flag.
pub fn emit_fit(result: &FitResult, path: impl AsRef<Path>, format: EmitFormat) -> Result<()> {
    let sep = match format {
        EmitFormat::Csv => ",",
        EmitFormat::PlotData => " ",
    };
    let mut out = match format {
        EmitFormat::Csv => "parameter,value\n".to_string(),
        EmitFormat::PlotData => "# parameter value\n".to_string(),
    };
    for (k, v) in &result.parameters {
        out.push_str(&format!("{k}{sep}{v}\n"));
    }
    out.push_str(&format!("loss{sep}{}\n", result.loss));
    out.push_str(&format!("n_evals{sep}{}\n", result.n_evals));
    out.push_str(&format!("converged{sep}{}\n", u8::from(result.converged)));
    write_text(path, &out)
}

/// Writes a CSV table with the given header; cells are already formatted.
pub fn write_table(
    path: impl AsRef<Path>,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| PlcError::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let wrap = |e: csv::Error| match e.into_kind() {
        csv::ErrorKind::Io(io) => PlcError::io(path, io),
        other => PlcError::InvalidInput(format!("{}: {other:?}", path.display())),
    };
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        w.write_record(&row).map_err(wrap)?;
    }
    w.flush().map_err(|e| PlcError::io(path, e))
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path: PathBuf = path.as_ref().to_path_buf();
    let mut f = File::create(&path).map_err(|e| PlcError::io(&path, e))?;
    f.write_all(text.as_bytes())
        .map_err(|e| PlcError::io(&path, e))
}
