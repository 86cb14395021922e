//! CSV files written by benchmark runs.
//!
//! Floats use Rust's shortest round-trip formatting and missing values are
//! empty fields, so reading a file back reproduces the written table exactly.

use std::io::{Read, Write};

use rfd_core::optimizers::Trajectory;

use crate::similarity::SimilarityMatrix;

pub const TRAJECTORY_HEADER: [&str; 7] = [
    "step",
    "loss_true",
    "loss_observed",
    "grad_norm",
    "xi",
    "eta",
    "cos_prev_grad",
];

pub const SUMMARY_HEADER: [&str; 5] = ["optimizer", "step", "mean_loss", "min_loss", "max_loss"];

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("bad header: expected `{expected}`, got `{got}`")]
    Header { expected: String, got: String },
    #[error("row {row}, column `{column}`: cannot parse `{value}`")]
    Field { row: usize, column: String, value: String },
    #[error("row {row}: expected {expected} fields, got {got}")]
    Width { row: usize, expected: usize, got: usize },
}

type Result<T> = std::result::Result<T, CsvError>;

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub step: usize,
    pub loss_true: f64,
    pub loss_observed: f64,
    pub grad_norm: f64,
    pub xi: Option<f64>,
    pub eta: Option<f64>,
    pub cos_prev_grad: Option<f64>,
    /// Present only when iterates are dumped.
    pub w: Option<Vec<f64>>,
}

/// The tabular view of a trajectory, as written to disk.
pub fn trajectory_rows(traj: &Trajectory, with_iterates: bool) -> Vec<TrajectoryRow> {
    traj.records
        .iter()
        .enumerate()
        .map(|(step, r)| TrajectoryRow {
            step,
            loss_true: r.loss_true,
            loss_observed: r.loss_observed,
            grad_norm: r.grad_norm,
            xi: r.xi,
            eta: r.eta,
            cos_prev_grad: r.cos_prev_grad,
            w: with_iterates.then(|| r.w.clone()),
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_trajectory<W: Write>(out: W, traj: &Trajectory, with_iterates: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let dim = traj.records.first().map_or(0, |r| r.w.len());
    let mut header: Vec<String> = TRAJECTORY_HEADER.iter().map(|s| s.to_string()).collect();
    if with_iterates {
        header.extend((0..dim).map(|i| format!("w_{i}")));
    }
    w.write_record(&header)?;
    for row in trajectory_rows(traj, with_iterates) {
        let mut fields = vec![
            row.step.to_string(),
            row.loss_true.to_string(),
            row.loss_observed.to_string(),
            row.grad_norm.to_string(),
            opt(row.xi),
            opt(row.eta),
            opt(row.cos_prev_grad),
        ];
        if let Some(it) = &row.w {
            fields.extend(it.iter().map(f64::to_string));
        }
        w.write_record(&fields)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

fn parse_f64(row: usize, column: &str, value: &str) -> Result<f64> {
    value.parse().map_err(|_| CsvError::Field {
        row,
        column: column.into(),
        value: value.into(),
    })
}

fn parse_opt(row: usize, column: &str, value: &str) -> Result<Option<f64>> {
    if value.is_empty() {
        Ok(None)
    } else {
        parse_f64(row, column, value).map(Some)
    }
}

pub fn read_trajectory<R: Read>(input: R) -> Result<Vec<TrajectoryRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let fixed = TRAJECTORY_HEADER.len();
    let iterate_cols = header.len().saturating_sub(fixed);
    let good_prefix = header.len() >= fixed && header[..fixed].iter().zip(TRAJECTORY_HEADER).all(|(a, b)| a == b);
    let good_tail = header[fixed.min(header.len())..]
        .iter()
        .enumerate()
        .all(|(i, h)| *h == format!("w_{i}"));
    if !good_prefix || !good_tail {
        return Err(CsvError::Header {
            expected: TRAJECTORY_HEADER.join(","),
            got: header.join(","),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != header.len() {
            return Err(CsvError::Width {
                row: i,
                expected: header.len(),
                got: rec.len(),
            });
        }
        let step = rec[0].parse().map_err(|_| CsvError::Field {
            row: i,
            column: "step".into(),
            value: rec[0].into(),
        })?;
        let w = if iterate_cols > 0 {
            Some(
                (0..iterate_cols)
                    .map(|k| parse_f64(i, &header[fixed + k], &rec[fixed + k]))
                    .collect::<Result<Vec<_>>>()?,
            )
        } else {
            None
        };
        rows.push(TrajectoryRow {
            step,
            loss_true: parse_f64(i, "loss_true", &rec[1])?,
            loss_observed: parse_f64(i, "loss_observed", &rec[2])?,
            grad_norm: parse_f64(i, "grad_norm", &rec[3])?,
            xi: parse_opt(i, "xi", &rec[4])?,
            eta: parse_opt(i, "eta", &rec[5])?,
            cos_prev_grad: parse_opt(i, "cos_prev_grad", &rec[6])?,
            w,
        });
    }
    Ok(rows)
}

/// Header row and first column hold step indices.
pub fn write_similarity<W: Write>(out: W, sim: &SimilarityMatrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let n = sim.len();
    let header: Vec<String> = std::iter::once("step".to_string())
        .chain((0..n).map(|i| i.to_string()))
        .collect();
    w.write_record(&header)?;
    for (i, row) in sim.entries.iter().enumerate() {
        let fields: Vec<String> = std::iter::once(i.to_string())
            .chain(row.iter().map(|v| opt(*v)))
            .collect();
        w.write_record(&fields)?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_similarity<R: Read>(input: R) -> Result<SimilarityMatrix> {
    let mut rdr = csv::Reader::from_reader(input);
    let n = rdr.headers()?.len().saturating_sub(1);
    let mut entries = Vec::with_capacity(n);
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != n + 1 {
            return Err(CsvError::Width {
                row: i,
                expected: n + 1,
                got: rec.len(),
            });
        }
        let row = (1..=n)
            .map(|j| parse_opt(i, &(j - 1).to_string(), &rec[j]))
            .collect::<Result<Vec<_>>>()?;
        entries.push(row);
    }
    Ok(SimilarityMatrix { entries })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub optimizer: String,
    pub step: usize,
    pub mean_loss: f64,
    pub min_loss: f64,
    pub max_loss: f64,
}

/// True-loss statistics across seeds, per optimizer and step.
pub fn summarize(optimizer: &str, runs: &[&Trajectory]) -> Vec<SummaryRow> {
    let steps = runs.iter().map(|t| t.len()).min().unwrap_or(0);
    (0..steps)
        .map(|step| {
            let losses: Vec<f64> = runs.iter().map(|t| t.records[step].loss_true).collect();
            SummaryRow {
                optimizer: optimizer.to_string(),
                step,
                mean_loss: losses.iter().sum::<f64>() / losses.len() as f64,
                min_loss: losses.iter().copied().fold(f64::INFINITY, f64::min),
                max_loss: losses.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect()
}

pub fn write_summary<W: Write>(out: W, rows: &[SummaryRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SUMMARY_HEADER)?;
    for r in rows {
        w.write_record([
            r.optimizer.clone(),
            r.step.to_string(),
            r.mean_loss.to_string(),
            r.min_loss.to_string(),
            r.max_loss.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
