//! Per-round metric rows and their CSV form.

use std::path::Path;

use crate::error::{Error, Result};

pub const CSV_HEADER: [&str; 8] = [
    "round",
    "objective_gap",
    "dist_to_truth",
    "grad_norm_sq",
    "running_min_grad_sq",
    "delta_inf_norm",
    "diverged",
    "wall_ms",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRecord {
    pub round: u64,
    /// `F(x_t) - F*`.
    pub objective_gap: f64,
    /// `||x_t - w*||`.
    pub dist_to_truth: f64,
    /// `||grad F(x_t)||^2` of the deterministic objective.
    pub grad_norm_sq: f64,
    /// Minimum of `grad_norm_sq` over rounds `1..=t`, all rounds included.
    pub running_min_grad_sq: f64,
    /// `||Delta_t||_inf`.
    pub delta_inf_norm: f64,
    pub diverged: bool,
    pub wall_ms: u64,
}

/// 17 significant digits: parsing the text gives back the same `f64`.
fn float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv(records: &[MetricsRecord], path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(records, file).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Csv {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    })
}

/// Writes the CSV form of `records` to any sink.
pub fn write_csv_to<W: std::io::Write>(records: &[MetricsRecord], sink: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.write_record([
            r.round.to_string(),
            float(r.objective_gap),
            float(r.dist_to_truth),
            float(r.grad_norm_sq),
            float(r.running_min_grad_sq),
            float(r.delta_inf_norm),
            r.diverged.to_string(),
            r.wall_ms.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv(path: &Path) -> Result<Vec<MetricsRecord>> {
    let bad = |message: String| Error::Csv {
        path: path.to_path_buf(),
        message,
    };
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => bad(format!("{other:?}")),
    })?;
    let header = r.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(bad(format!(
            "unexpected header `{}`",
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }
    let mut out = Vec::new();
    for (line, row) in r.records().enumerate() {
        let row = row.map_err(|e| bad(e.to_string()))?;
        let field = |i: usize| row.get(i).unwrap_or("");
        let num = |i: usize| -> Result<f64> {
            field(i).parse().map_err(|_| {
                bad(format!(
                    "row {}: `{}` is not a number in column {}",
                    line + 1,
                    field(i),
                    CSV_HEADER[i]
                ))
            })
        };
        let int = |i: usize| -> Result<u64> {
            field(i).parse().map_err(|_| {
                bad(format!(
                    "row {}: `{}` is not an integer in column {}",
                    line + 1,
                    field(i),
                    CSV_HEADER[i]
                ))
            })
        };
        out.push(MetricsRecord {
            round: int(0)?,
            objective_gap: num(1)?,
            dist_to_truth: num(2)?,
            grad_norm_sq: num(3)?,
            running_min_grad_sq: num(4)?,
            delta_inf_norm: num(5)?,
            diverged: field(6)
                .parse()
                .map_err(|_| bad(format!("row {}: `{}` is not a boolean", line + 1, field(6))))?,
            wall_ms: int(7)?,
        });
    }
    Ok(out)
}

impl MetricsRecord {
    /// Value of a named CSV column as a float.
    pub fn column(&self, name: &str) -> Option<f64> {
        Some(match name {
            "round" => self.round as f64,
            "objective_gap" => self.objective_gap,
            "dist_to_truth" => self.dist_to_truth,
            "grad_norm_sq" => self.grad_norm_sq,
            "running_min_grad_sq" => self.running_min_grad_sq,
            "delta_inf_norm" => self.delta_inf_norm,
            "wall_ms" => self.wall_ms as f64,
            _ => return None,
        })
    }
}
