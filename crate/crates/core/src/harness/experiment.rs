use std::fs;
use std::io::BufWriter;
use std::path::Path;

use super::config::{build_model, ExperimentConfig, Reference, ShippedModel};
use super::csvio::{
    emit_histogram, summarize, write_histogram, write_runs, write_summary, HistogramTable, RunRow,
    SummaryRow,
};
use crate::driver::{run, RunOptions, RunRecord};
use crate::error::{Error, Result};
use crate::par::{map_indices, Execution};
use crate::refinement::{Model, RefinementOptions};

/// All runs at one epsilon.
#[derive(Clone, Debug)]
pub struct GridPoint {
    pub epsilon: f64,
    /// Includes the partial records of runs that hit the level cap.
    pub records: Vec<RunRecord>,
    pub rows: Vec<RunRow>,
    pub summary: SummaryRow,
    pub histogram: HistogramTable,
    pub nonconverged: usize,
}

#[derive(Clone, Debug)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub reference: Option<Reference>,
    pub points: Vec<GridPoint>,
    pub warnings: Vec<String>,
}

impl ExperimentReport {
    pub fn rows(&self) -> Vec<RunRow> {
        self.points
            .iter()
            .flat_map(|p| p.rows.iter().cloned())
            .collect()
    }

    pub fn summaries(&self) -> Vec<SummaryRow> {
        self.points.iter().map(|p| p.summary.clone()).collect()
    }

    pub fn nonconverged(&self) -> usize {
        self.points.iter().map(|p| p.nonconverged).sum()
    }
}

impl ExperimentConfig {
    pub fn run_options(&self, execution: Execution) -> RunOptions {
        RunOptions {
            l_max: self.l_max,
            refinement: RefinementOptions {
                skip_redundant: self.skip_redundant,
                guard: self.guard,
            },
            execution,
            ..RunOptions::default()
        }
    }

    /// Seed of run `index`: the base seed plus the index.
    pub fn run_seed(&self, index: usize) -> u64 {
        self.seed.wrapping_add(index as u64)
    }
}

/// Executes one run; `Ok((record, converged))` also for level-cap aborts.
fn run_one<M: Model>(
    model: &M,
    config: &ExperimentConfig,
    epsilon: f64,
    index: usize,
    execution: Execution,
) -> Result<RunRecord> {
    let estimator = config.estimator(epsilon)?;
    match run(
        config.method,
        model,
        &estimator,
        config.run_seed(index),
        &config.run_options(execution),
    ) {
        Ok(r) => Ok(r),
        Err(Error::NonConvergence { record, .. }) => Ok(*record),
        Err(e) => Err(e),
    }
}

fn run_grid<M: Model>(
    model: &M,
    config: &ExperimentConfig,
    execution: Execution,
) -> Result<ExperimentReport> {
    let mut warnings = Vec::new();
    let reference = match (model.exact_probability(config.y), config.reference) {
        (Some(p), _) => Some(Reference {
            probability: p,
            std_error: 0.0,
        }),
        (None, Some(r)) => Some(r),
        (None, None) => {
            warnings.push(format!(
                "model '{}' has no exact probability and no reference was configured; RMSE is NaN",
                model.name()
            ));
            None
        }
    };
    let ref_p = reference.map(|r| r.probability);

    let mut points = Vec::with_capacity(config.epsilons.len());
    for &epsilon in &config.epsilons {
        let outcomes = map_indices(config.runs, execution, |i| {
            run_one(model, config, epsilon, i, execution)
        });
        let records = outcomes.into_iter().collect::<Result<Vec<_>>>()?;
        let nonconverged = records.iter().filter(|r| !r.converged).count();
        if nonconverged > 0 {
            warnings.push(format!(
                "epsilon {epsilon}: {nonconverged} run(s) hit the level cap {}",
                config.l_max
            ));
        }
        let rows: Vec<RunRow> = records
            .iter()
            .enumerate()
            .map(|(i, r)| RunRow::from_record(i as u64, r, ref_p))
            .collect();
        let summary = summarize(&rows)?;
        let histogram = emit_histogram(&records)?;
        points.push(GridPoint {
            epsilon,
            records,
            rows,
            summary,
            histogram,
            nonconverged,
        });
    }
    Ok(ExperimentReport {
        config: config.clone(),
        reference,
        points,
        warnings,
    })
}

/// Runs `config.runs` independent estimations at every epsilon.
pub fn run_experiment(config: &ExperimentConfig, execution: Execution) -> Result<ExperimentReport> {
    config.validate()?;
    match build_model(&config.model, config.q)? {
        ShippedModel::Synthetic(m) => run_grid(&m, config, execution),
        ShippedModel::Elliptic(m) => run_grid(&m, config, execution),
        ShippedModel::Constant(m) => run_grid(&m, config, execution),
    }
}

/// Writes `runs.csv`, `summary.csv` and `histogram_eps<i>.csv` into `dir`.
pub fn write_outputs(report: &ExperimentReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let create = |name: &str| -> Result<BufWriter<fs::File>> {
        Ok(BufWriter::new(fs::File::create(dir.join(name))?))
    };
    write_runs(create("runs.csv")?, &report.rows())?;
    write_summary(create("summary.csv")?, &report.summaries())?;
    for (i, p) in report.points.iter().enumerate() {
        write_histogram(create(&format!("histogram_eps{i}.csv"))?, &p.histogram)?;
    }
    Ok(())
}
