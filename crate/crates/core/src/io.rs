//! CSV ingestion, standardization, and CSV output.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::metrics::Partition;

/// Per-column affine map: `standardized = (raw − mean) / sd`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl Standardization {
    /// Maps a point in standardized units back to raw units.
    pub fn invert(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.means).zip(&self.sds).map(|((v, m), s)| v * s + m).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub names: Vec<String>,
    pub values: Matrix,
    /// Raw truth labels in row order, when a label column was named.
    pub truth_labels: Option<Vec<String>>,
    pub transform: Option<Standardization>,
}

impl Dataset {
    pub fn new(names: Vec<String>, values: Matrix) -> Result<Self> {
        if names.len() != values.cols() {
            return Err(Error::DimensionMismatch { expected: values.cols(), found: names.len() });
        }
        Ok(Self { names, values, truth_labels: None, transform: None })
    }

    pub fn n(&self) -> usize {
        self.values.rows()
    }

    pub fn p(&self) -> usize {
        self.values.cols()
    }

    pub fn truth(&self) -> Option<Partition> {
        self.truth_labels.as_ref().map(|l| Partition::from_labels(l))
    }

    pub fn is_standardized(&self) -> bool {
        self.transform.is_some()
    }

    /// Writes a header row and every value with 17 significant digits, plus
    /// the truth column when present.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
        let mut header = self.names.clone();
        if self.truth_labels.is_some() {
            header.push(LABEL_HEADER.into());
        }
        w.write_record(&header).map_err(csv_io)?;
        for i in 0..self.n() {
            let mut rec: Vec<String> = self.values.row(i).iter().map(|v| fmt_f64(*v)).collect();
            if let Some(l) = &self.truth_labels {
                rec.push(l[i].clone());
            }
            w.write_record(&rec).map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Header written for the truth column.
pub const LABEL_HEADER: &str = "class";

fn csv_io(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        other => Error::Csv { row: 0, column: 0, message: format!("{other:?}") },
    }
}

/// Round-trip-exact decimal form used in every numeric output.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "NA".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

/// Reads a numeric CSV with a header row. Rows and columns in errors are
/// 1-based; row 1 is the first data row.
pub fn load_csv(path: &Path, label_column: Option<&str>) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_csv(file, label_column)
}

pub fn read_csv<R: std::io::Read>(reader: R, label_column: Option<&str>) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Csv { row: 0, column: 0, message: e.to_string() })?
        .clone();
    if headers.is_empty() || headers.iter().all(|h| h.trim().is_empty()) {
        return Err(Error::Csv { row: 0, column: 0, message: "missing header row".into() });
    }
    let label_idx = match label_column {
        Some(name) => Some(headers.iter().position(|h| h.trim() == name).ok_or_else(|| Error::Csv {
            row: 0,
            column: 0,
            message: format!("label column '{name}' not in header"),
        })?),
        None => None,
    };
    let names: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(j, _)| Some(*j) != label_idx)
        .map(|(_, h)| h.trim().to_string())
        .collect();
    let width = headers.len();
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (r, rec) in rdr.records().enumerate() {
        let row = r + 1;
        let rec = rec.map_err(|e| Error::Csv { row, column: 0, message: e.to_string() })?;
        if rec.len() != width {
            return Err(Error::Csv {
                row,
                column: rec.len().min(width) + 1,
                message: format!("expected {width} fields, found {}", rec.len()),
            });
        }
        for (j, cell) in rec.iter().enumerate() {
            if Some(j) == label_idx {
                labels.push(cell.trim().to_string());
                continue;
            }
            let v: f64 = cell.trim().parse().map_err(|_| Error::Csv {
                row,
                column: j + 1,
                message: format!("non-numeric value '{cell}'"),
            })?;
            if !v.is_finite() {
                return Err(Error::Csv { row, column: j + 1, message: format!("non-finite value '{cell}'") });
            }
            values.push(v);
        }
    }
    let n = values.len().checked_div(names.len()).unwrap_or(0);
    let matrix = Matrix::from_row_major(n, names.len(), values)?;
    let mut ds = Dataset::new(names, matrix)?;
    if label_idx.is_some() {
        ds.truth_labels = Some(labels);
    }
    Ok(ds)
}

/// Centers each column and divides by its n−1 standard deviation. Applying
/// it twice composes the stored transforms.
pub fn standardize(d: &Dataset) -> Result<Dataset> {
    let (n, p) = (d.n(), d.p());
    if n < 2 {
        return Err(Error::TooFewObservations { n, needed: 2 });
    }
    let mut means = vec![0.0; p];
    let mut sds = vec![0.0; p];
    for j in 0..p {
        let col = d.values.column(j);
        let m = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
        let sd = var.sqrt();
        let scale = col.iter().fold(0.0f64, |a, x| a.max(x.abs()));
        if !(sd > 1e-12 * scale.max(f64::MIN_POSITIVE)) {
            return Err(Error::ConstantColumn(d.names[j].clone()));
        }
        means[j] = m;
        sds[j] = sd;
    }
    let values = Matrix::from_fn(n, p, |i, j| (d.values[(i, j)] - means[j]) / sds[j]);
    let transform = match &d.transform {
        None => Standardization { means, sds },
        Some(prev) => Standardization {
            means: (0..p).map(|j| prev.means[j] + means[j] * prev.sds[j]).collect(),
            sds: (0..p).map(|j| prev.sds[j] * sds[j]).collect(),
        },
    };
    Ok(Dataset { names: d.names.clone(), values, truth_labels: d.truth_labels.clone(), transform: Some(transform) })
}

/// Writes rows of already formatted fields.
pub fn write_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
    w.write_record(header).map_err(csv_io)?;
    for r in rows {
        w.write_record(r).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes pretty JSON with a trailing newline.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(())
}
