//! Level-loop orchestration for MLMC with selective refinement, plus the
//! single-level Monte Carlo baseline.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::estimator::{
    bias_bound, corrector_costs, corrector_moments, guarded_level0_moments, level_moments,
    mlmc_combine, optimal_allocation, termination_check, CorrectorTally, CostMode, EstimatorConfig,
    MomentEstimates, TerminationCheck,
};
use crate::par::{map_chunks, Execution, DEFAULT_CHUNK};
use crate::refinement::{refine, solve_full, Model, RefinementOptions};
use crate::rng::realization_key;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    MlmcSr,
    Mc,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::MlmcSr => "mlmc-sr",
            Method::Mc => "mc",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mlmc-sr" => Ok(Method::MlmcSr),
            "mc" => Ok(Method::Mc),
            other => Err(Error::Config(format!("unknown method '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunOptions {
    /// Highest level the loop may open before giving up.
    pub l_max: usize,
    pub refinement: RefinementOptions,
    pub execution: Execution,
    /// Samples per parallel task.
    pub chunk: u64,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            l_max: 30,
            refinement: RefinementOptions::default(),
            execution: Execution::default(),
            chunk: DEFAULT_CHUNK,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub level: usize,
    pub tally: CorrectorTally,
    pub moments: Option<MomentEstimates>,
    /// Most recent allocation target (before monotone reconciliation).
    pub target: u64,
    pub drawn: u64,
    /// Work spent on this level's samples.
    pub cost: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: Method,
    pub config: EstimatorConfig,
    pub seed: u64,
    pub estimate_raw: f64,
    pub estimate_clamped: f64,
    pub final_level: usize,
    pub levels: Vec<LevelRecord>,
    pub total_cost: f64,
    /// `refinement_histogram[l][j]`: samples on level `l` whose fine solve
    /// stopped at tolerance index `j`.
    pub refinement_histogram: Vec<Vec<u64>>,
    pub termination_trace: Vec<TerminationCheck>,
    pub converged: bool,
}

impl RunRecord {
    /// Samples drawn per level, in level order.
    pub fn drawn(&self) -> Vec<u64> {
        self.levels.iter().map(|l| l.drawn).collect()
    }
}

/// Partial statistics of a contiguous block of samples on one level.
#[derive(Clone, Debug)]
struct LevelBatch {
    tally: CorrectorTally,
    histogram: Vec<u64>,
    cost: f64,
}

impl LevelBatch {
    fn new(level: usize, tolerance_slots: usize) -> Self {
        LevelBatch {
            tally: CorrectorTally::new(level),
            histogram: vec![0; tolerance_slots],
            cost: 0.0,
        }
    }

    fn merge(&mut self, other: &LevelBatch) {
        self.tally.merge(&other.tally);
        for (a, b) in self.histogram.iter_mut().zip(&other.histogram) {
            *a += b;
        }
        self.cost += other.cost;
    }
}

fn reduce(level: usize, slots: usize, parts: Vec<Result<LevelBatch>>) -> Result<LevelBatch> {
    let mut acc = LevelBatch::new(level, slots);
    for part in parts {
        acc.merge(&part?);
    }
    Ok(acc)
}

/// Selectively refined samples `range` on `level`: the raw indicator for
/// level 0, the corrector `Q_l - Q_{l-1}` on the same realization otherwise.
fn sample_selective<M: Model>(
    model: &M,
    config: &EstimatorConfig,
    seed: u64,
    level: usize,
    range: Range<u64>,
    options: &RunOptions,
) -> Result<LevelBatch> {
    let y = config.y;
    let schedule = &config.schedule;
    let parts = map_chunks(range, options.chunk, options.execution, |chunk| {
        let mut batch = LevelBatch::new(level, level + 1);
        for i in chunk {
            let key = realization_key(seed, level, i);
            let realization = model.draw(key)?;
            let fine = refine(
                model,
                &realization,
                key,
                level,
                y,
                schedule,
                options.refinement,
            )?;
            batch.cost += fine.cost;
            batch.histogram[fine.achieved_tolerance_index as usize] += 1;
            if level == 0 {
                batch.tally.record_indicator(fine.indicator(y));
            } else {
                let coarse = refine(
                    model,
                    &realization,
                    key,
                    level - 1,
                    y,
                    schedule,
                    options.refinement,
                )?;
                batch.cost += coarse.cost;
                batch
                    .tally
                    .record_corrector(fine.indicator(y), coarse.indicator(y));
            }
        }
        Ok(batch)
    });
    reduce(level, level + 1, parts)
}

struct LevelState {
    batch: LevelBatch,
    target: u64,
    moments: Option<MomentEstimates>,
}

impl LevelState {
    fn drawn(&self) -> u64 {
        self.batch.tally.n
    }
}

fn extend_level<M: Model>(
    model: &M,
    config: &EstimatorConfig,
    seed: u64,
    level: usize,
    state: &mut LevelState,
    to: u64,
    options: &RunOptions,
) -> Result<()> {
    let from = state.drawn();
    if to > from {
        let more = sample_selective(model, config, seed, level, from..to, options)?;
        state.batch.merge(&more);
    }
    Ok(())
}

fn refresh_moments(levels: &mut [LevelState], k: f64) -> Result<Vec<MomentEstimates>> {
    levels
        .iter_mut()
        .map(|s| {
            let m = level_moments(&s.batch.tally, k)?;
            s.moments = Some(m);
            Ok(m)
        })
        .collect()
}

fn opening_size(config: &EstimatorConfig, level: usize) -> u64 {
    let n =
        (config.base_samples as f64 * config.schedule.gamma().powi(-(level as i32))).ceil() as u64;
    // Level-0 sample variance needs two observations.
    if level == 0 {
        n.max(2)
    } else {
        n.max(1)
    }
}

fn build_record(
    method: Method,
    config: &EstimatorConfig,
    seed: u64,
    levels: &[LevelState],
    extra_cost: f64,
    trace: Vec<TerminationCheck>,
    converged: bool,
) -> Result<RunRecord> {
    let tallies: Vec<CorrectorTally> = levels.iter().map(|s| s.batch.tally.clone()).collect();
    let estimate = mlmc_combine(&tallies)?;
    let total_cost = extra_cost + levels.iter().map(|s| s.batch.cost).sum::<f64>();
    Ok(RunRecord {
        method,
        config: config.clone(),
        seed,
        estimate_raw: estimate.raw,
        estimate_clamped: estimate.clamped,
        final_level: levels.len().saturating_sub(1),
        levels: levels
            .iter()
            .enumerate()
            .map(|(l, s)| LevelRecord {
                level: l,
                tally: s.batch.tally.clone(),
                moments: s.moments,
                target: s.target,
                drawn: s.drawn(),
                cost: s.batch.cost,
            })
            .collect(),
        total_cost,
        refinement_histogram: levels.iter().map(|s| s.batch.histogram.clone()).collect(),
        termination_trace: trace,
        converged,
    })
}

fn check_options(options: &RunOptions) -> Result<()> {
    if options.l_max < 2 {
        return Err(invalid(format!(
            "l_max must be at least 2 (termination needs two correctors), got {}",
            options.l_max
        )));
    }
    Ok(())
}

/// One MLMC-SR run.
///
/// For `L = 0, 1, ...`: open level `L` with `N gamma^-L` samples, bound the
/// corrector variances, reallocate all levels optimally under the selective
/// cost model (never discarding drawn samples), refresh the mean bounds and,
/// from `L = 2` on, stop once the bias test passes.
pub fn run_mlmc_sr<M: Model>(
    model: &M,
    config: &EstimatorConfig,
    seed: u64,
    options: &RunOptions,
) -> Result<RunRecord> {
    check_options(options)?;
    let mut levels: Vec<LevelState> = Vec::new();
    let mut trace = Vec::new();
    let mut top = 0;
    loop {
        let mut state = LevelState {
            batch: LevelBatch::new(top, top + 1),
            target: opening_size(config, top),
            moments: None,
        };
        let opening = state.target;
        extend_level(model, config, seed, top, &mut state, opening, options)?;
        levels.push(state);

        let moments = refresh_moments(&mut levels, config.k)?;
        let costs = corrector_costs(top, &config.schedule, CostMode::Selective);
        let allocation = optimal_allocation(&moments, &costs, config.epsilon)?;
        for (l, s) in levels.iter_mut().enumerate() {
            let target = allocation.sizes[l];
            s.target = target;
            let to = target.max(s.drawn());
            extend_level(model, config, seed, l, s, to, options)?;
        }
        let moments = refresh_moments(&mut levels, config.k)?;

        if top >= 2 {
            let check = termination_check(
                &moments[top - 1],
                &moments[top],
                &config.schedule,
                config.epsilon,
            );
            trace.push(check);
            if check.converged() {
                return build_record(Method::MlmcSr, config, seed, &levels, 0.0, trace, true);
            }
        }
        if top >= options.l_max {
            let record = build_record(Method::MlmcSr, config, seed, &levels, 0.0, trace, false)?;
            return Err(Error::NonConvergence {
                level_cap: options.l_max,
                record: Box::new(record),
            });
        }
        top += 1;
    }
}

/// Fully refined samples on `level`. With `with_corrector`, each sample also
/// records `Q'_l - Q'_{l-1}` into the returned corrector tally.
fn sample_full<M: Model>(
    model: &M,
    config: &EstimatorConfig,
    seed: u64,
    level: usize,
    range: Range<u64>,
    with_corrector: bool,
    options: &RunOptions,
) -> Result<(LevelBatch, CorrectorTally)> {
    let y = config.y;
    let schedule = &config.schedule;
    let parts = map_chunks(range, options.chunk, options.execution, |chunk| {
        let mut batch = LevelBatch::new(0, level + 1);
        let mut corrector = CorrectorTally::new(level.max(1));
        for i in chunk {
            let key = realization_key(seed, level, i);
            let realization = model.draw(key)?;
            let fine = solve_full(model, &realization, key, level, schedule)?;
            batch.cost += fine.cost;
            batch.histogram[level] += 1;
            batch.tally.record_indicator(fine.indicator(y));
            if with_corrector {
                let coarse = solve_full(model, &realization, key, level - 1, schedule)?;
                batch.cost += coarse.cost;
                corrector.record_corrector(fine.indicator(y), coarse.indicator(y));
            }
        }
        Ok::<_, Error>((batch, corrector))
    });
    let mut acc = LevelBatch::new(0, level + 1);
    let mut corr = CorrectorTally::new(level.max(1));
    for part in parts {
        let (b, c): (LevelBatch, CorrectorTally) = part?;
        acc.merge(&b);
        corr.merge(&c);
    }
    Ok((acc, corr))
}

/// Single-level Monte Carlo with full refinement.
///
/// Pilot correctors on `L = 1, 2, ...` (with `N gamma^-L` samples) bound the
/// bias; the first level whose bound is at most `eps / sqrt 2` is used, and
/// its sample is extended until `V / n <= eps^2 / 2`. The record holds one
/// level entry (the chosen level); its tally uses level-0 semantics.
pub fn run_mc_baseline<M: Model>(
    model: &M,
    config: &EstimatorConfig,
    seed: u64,
    options: &RunOptions,
) -> Result<RunRecord> {
    check_options(options)?;
    let threshold = config.epsilon / std::f64::consts::SQRT_2;
    let mut trace = Vec::new();
    let mut pilot_cost = 0.0;
    let mut level = 1;
    let (mut fine, pilot_n) = loop {
        let n = opening_size(config, level).max(2);
        let (batch, corrector) = sample_full(model, config, seed, level, 0..n, true, options)?;
        let bias = bias_bound(
            &corrector_moments(&corrector, config.k)?,
            config.schedule.gamma(),
        )?;
        trace.push(TerminationCheck {
            level,
            lhs: bias,
            rhs: threshold,
        });
        if bias <= threshold {
            break (batch, n);
        }
        if level >= options.l_max {
            let state = LevelState {
                batch,
                target: n,
                moments: None,
            };
            let mut record =
                build_record(Method::Mc, config, seed, &[state], pilot_cost, trace, false)?;
            record.final_level = level;
            record.levels[0].level = level;
            return Err(Error::NonConvergence {
                level_cap: options.l_max,
                record: Box::new(record),
            });
        }
        pilot_cost += batch.cost;
        level += 1;
    };

    let var = guarded_level0_moments(&fine.tally, config.k)?.var_bound;
    let eps2 = config.epsilon * config.epsilon;
    let target = ((2.0 * var / eps2).ceil() as u64).max(1);
    if target > pilot_n {
        let (more, _) = sample_full(model, config, seed, level, pilot_n..target, false, options)?;
        fine.merge(&more);
    }
    let moments = guarded_level0_moments(&fine.tally, config.k)?;
    let mut histogram = vec![Vec::new(); level];
    histogram.push(fine.histogram.clone());
    let state = LevelState {
        batch: fine,
        target,
        moments: Some(moments),
    };
    let mut record = build_record(Method::Mc, config, seed, &[state], pilot_cost, trace, true)?;
    record.final_level = level;
    record.levels[0].level = level;
    record.refinement_histogram = histogram;
    Ok(record)
}

/// Dispatches on `method`.
pub fn run<M: Model>(
    method: Method,
    model: &M,
    config: &EstimatorConfig,
    seed: u64,
    options: &RunOptions,
) -> Result<RunRecord> {
    match method {
        Method::MlmcSr => run_mlmc_sr(model, config, seed, options),
        Method::Mc => run_mc_baseline(model, config, seed, options),
    }
}
