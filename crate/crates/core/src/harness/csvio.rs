//! CSV files written by experiments.
//!
//! Each file starts with a `#` schema line. Floats use Rust's shortest
//! round-trip formatting, so reading a file back reproduces every value
//! exactly.

use std::io::{Read, Write};

use crate::driver::RunRecord;
use crate::error::{Error, Result};

pub const RUNS_SCHEMA: &str = "# mlmc-sr runs v1";
pub const SUMMARY_SCHEMA: &str = "# mlmc-sr summary v1";
pub const HISTOGRAM_SCHEMA: &str = "# mlmc-sr histogram v1";

const RUN_FIXED_COLUMNS: [&str; 8] = [
    "run_id",
    "epsilon",
    "q",
    "estimate_raw",
    "estimate_clamped",
    "abs_error",
    "total_cost",
    "final_L",
];

/// One line of the per-run file. `drawn[l]` is the sample count on level `l`.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRow {
    pub run_id: u64,
    pub epsilon: f64,
    pub q: f64,
    pub estimate_raw: f64,
    pub estimate_clamped: f64,
    pub abs_error: f64,
    pub total_cost: f64,
    pub final_level: usize,
    pub drawn: Vec<u64>,
}

impl RunRow {
    pub fn from_record(run_id: u64, record: &RunRecord, reference: Option<f64>) -> Self {
        RunRow {
            run_id,
            epsilon: record.config.epsilon,
            q: record.config.schedule.q(),
            estimate_raw: record.estimate_raw,
            estimate_clamped: record.estimate_clamped,
            abs_error: reference.map_or(f64::NAN, |r| (record.estimate_raw - r).abs()),
            total_cost: record.total_cost,
            final_level: record.final_level,
            drawn: record.drawn(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub epsilon: f64,
    pub q: f64,
    pub rmse: f64,
    pub mean_cost: f64,
    pub median_cost: f64,
    pub mean_level: f64,
}

fn parse<T: std::str::FromStr>(record: &csv::StringRecord, idx: usize, what: &str) -> Result<T> {
    let field = record
        .get(idx)
        .ok_or_else(|| Error::Config(format!("missing column {what}")))?;
    field
        .trim()
        .parse()
        .map_err(|_| Error::Config(format!("bad value '{field}' in column {what}")))
}

fn check_schema<R: Read>(reader: &mut R, expected: &str) -> Result<String> {
    let mut text = String::new();
    reader.read_to_string(&mut text)?;
    let first = text.lines().next().unwrap_or_default();
    if first != expected {
        return Err(Error::Config(format!(
            "expected schema line '{expected}', found '{first}'"
        )));
    }
    Ok(text)
}

pub fn write_runs<W: Write>(mut out: W, rows: &[RunRow]) -> Result<()> {
    writeln!(out, "{RUNS_SCHEMA}")?;
    let levels = rows.iter().map(|r| r.drawn.len()).max().unwrap_or(0);
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = RUN_FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend((0..levels).map(|l| format!("N_{l}")));
    w.write_record(&header)?;
    for r in rows {
        let mut fields = vec![
            r.run_id.to_string(),
            r.epsilon.to_string(),
            r.q.to_string(),
            r.estimate_raw.to_string(),
            r.estimate_clamped.to_string(),
            r.abs_error.to_string(),
            r.total_cost.to_string(),
            r.final_level.to_string(),
        ];
        fields.extend((0..levels).map(|l| r.drawn.get(l).map(u64::to_string).unwrap_or_default()));
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_runs<R: Read>(mut input: R) -> Result<Vec<RunRow>> {
    let text = check_schema(&mut input, RUNS_SCHEMA)?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record?;
        let drawn = (RUN_FIXED_COLUMNS.len()..record.len())
            .filter(|&i| !record[i].is_empty())
            .map(|i| parse(&record, i, "N_l"))
            .collect::<Result<Vec<u64>>>()?;
        rows.push(RunRow {
            run_id: parse(&record, 0, "run_id")?,
            epsilon: parse(&record, 1, "epsilon")?,
            q: parse(&record, 2, "q")?,
            estimate_raw: parse(&record, 3, "estimate_raw")?,
            estimate_clamped: parse(&record, 4, "estimate_clamped")?,
            abs_error: parse(&record, 5, "abs_error")?,
            total_cost: parse(&record, 6, "total_cost")?,
            final_level: parse(&record, 7, "final_L")?,
            drawn,
        });
    }
    Ok(rows)
}

/// Summary of the runs at one grid point (all rows share `epsilon`).
pub fn summarize(rows: &[RunRow]) -> Result<SummaryRow> {
    let first = rows
        .first()
        .ok_or_else(|| Error::InsufficientSamples("no runs to summarise".into()))?;
    let m = rows.len() as f64;
    let mse = rows.iter().map(|r| r.abs_error * r.abs_error).sum::<f64>() / m;
    let mean_cost = rows.iter().map(|r| r.total_cost).sum::<f64>() / m;
    let mut costs: Vec<f64> = rows.iter().map(|r| r.total_cost).collect();
    costs.sort_by(f64::total_cmp);
    let mid = costs.len() / 2;
    let median_cost = if costs.len() % 2 == 1 {
        costs[mid]
    } else {
        0.5 * (costs[mid - 1] + costs[mid])
    };
    let mean_level = rows.iter().map(|r| r.final_level as f64).sum::<f64>() / m;
    Ok(SummaryRow {
        epsilon: first.epsilon,
        q: first.q,
        rmse: mse.sqrt(),
        mean_cost,
        median_cost,
        mean_level,
    })
}

/// Summaries for each distinct epsilon, in order of first appearance.
pub fn summarize_grouped(rows: &[RunRow]) -> Result<Vec<SummaryRow>> {
    let mut order: Vec<u64> = Vec::new();
    for r in rows {
        if !order.contains(&r.epsilon.to_bits()) {
            order.push(r.epsilon.to_bits());
        }
    }
    order
        .into_iter()
        .map(|bits| {
            let group: Vec<RunRow> = rows
                .iter()
                .filter(|r| r.epsilon.to_bits() == bits)
                .cloned()
                .collect();
            summarize(&group)
        })
        .collect()
}

pub fn write_summary<W: Write>(mut out: W, rows: &[SummaryRow]) -> Result<()> {
    writeln!(out, "{SUMMARY_SCHEMA}")?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epsilon", "q", "rmse", "mean_cost", "median_cost", "mean_L"])?;
    for r in rows {
        w.write_record([
            r.epsilon.to_string(),
            r.q.to_string(),
            r.rmse.to_string(),
            r.mean_cost.to_string(),
            r.median_cost.to_string(),
            r.mean_level.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_summary<R: Read>(mut input: R) -> Result<Vec<SummaryRow>> {
    let text = check_schema(&mut input, SUMMARY_SCHEMA)?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    reader
        .records()
        .map(|record| {
            let record = record?;
            Ok(SummaryRow {
                epsilon: parse(&record, 0, "epsilon")?,
                q: parse(&record, 1, "q")?,
                rmse: parse(&record, 2, "rmse")?,
                mean_cost: parse(&record, 3, "mean_cost")?,
                median_cost: parse(&record, 4, "median_cost")?,
                mean_level: parse(&record, 5, "mean_L")?,
            })
        })
        .collect()
}

/// Mean refinement histogram over runs: `cells[j][l]`.
#[derive(Clone, Debug, PartialEq)]
pub struct HistogramTable {
    pub cells: Vec<Vec<f64>>,
}

impl HistogramTable {
    pub fn levels(&self) -> usize {
        self.cells.first().map_or(0, Vec::len)
    }

    /// Column sums, i.e. the mean sample count per level.
    pub fn column_totals(&self) -> Vec<f64> {
        (0..self.levels())
            .map(|l| self.cells.iter().map(|row| row[l]).sum())
            .collect()
    }
}

/// Averages the records' refinement histograms; levels a run never opened
/// count as zero.
pub fn emit_histogram(records: &[RunRecord]) -> Result<HistogramTable> {
    if records.is_empty() {
        return Err(Error::InsufficientSamples(
            "no records for histogram".into(),
        ));
    }
    let levels = records
        .iter()
        .map(|r| r.refinement_histogram.len())
        .max()
        .unwrap_or(0);
    let depth = records
        .iter()
        .flat_map(|r| r.refinement_histogram.iter().map(Vec::len))
        .max()
        .unwrap_or(0);
    let mut sums = vec![vec![0u64; levels]; depth];
    for r in records {
        for (l, column) in r.refinement_histogram.iter().enumerate() {
            for (j, &count) in column.iter().enumerate() {
                sums[j][l] += count;
            }
        }
    }
    let m = records.len() as f64;
    Ok(HistogramTable {
        cells: sums
            .into_iter()
            .map(|row| row.into_iter().map(|c| c as f64 / m).collect())
            .collect(),
    })
}

pub fn write_histogram<W: Write>(mut out: W, table: &HistogramTable) -> Result<()> {
    writeln!(out, "{HISTOGRAM_SCHEMA}")?;
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["j".to_string()];
    header.extend((0..table.levels()).map(|l| format!("level_{l}")));
    w.write_record(&header)?;
    for (j, row) in table.cells.iter().enumerate() {
        let mut fields = vec![j.to_string()];
        fields.extend(row.iter().map(f64::to_string));
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}
