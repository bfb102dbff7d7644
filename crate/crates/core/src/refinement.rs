//! Per-realization selective refinement.
//!
//! A realization is first solved to tolerance 1 and then re-solved to
//! `gamma^j`, `j = 0, 1, ..., l`, for as long as its certified error band
//! still contains the critical value. The result satisfies
//! `|X - X_l| <= gamma^l` or `|X - X_l| < |X_l - y|`, so outside the band the
//! failure indicator is already exact.

use serde::{Deserialize, Serialize};

use crate::error::{insufficient, Error, Result};
use crate::estimator::LevelSchedule;
use crate::rng::StreamKey;

/// A requested solve accuracy: `value = gamma^index`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub index: u32,
    pub value: f64,
}

impl Tolerance {
    pub fn unit() -> Self {
        Tolerance {
            index: 0,
            value: 1.0,
        }
    }

    pub fn at(schedule: &LevelSchedule, index: u32) -> Self {
        Tolerance {
            index,
            value: schedule.tolerance(index as usize),
        }
    }
}

/// Result of one solve: a value certified to the requested tolerance and
/// the work it cost.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Solution {
    pub value: f64,
    pub work: f64,
}

/// A stochastic model with solve-to-tolerance semantics.
///
/// `solve` must return a value within `tolerance.value` of the exact QoI,
/// and must be a pure function of `(realization, tolerance)`.
pub trait Model: Sync {
    type Realization: Send;

    fn name(&self) -> &'static str;

    fn draw(&self, key: StreamKey) -> Result<Self::Realization>;

    fn solve(&self, realization: &Self::Realization, tolerance: Tolerance) -> Result<Solution>;

    /// Cost of one solve at `tolerance`.
    fn work_units(&self, realization: &Self::Realization, tolerance: Tolerance) -> Result<f64> {
        Ok(self.solve(realization, tolerance)?.work)
    }

    /// Exact QoI, when the model can provide it (used by test oracles).
    fn exact_qoi(&self, _realization: &Self::Realization) -> Option<f64> {
        None
    }

    /// Exact `Pr(X <= y)`, when known analytically.
    fn exact_probability(&self, _y: f64) -> Option<f64> {
        None
    }
}

/// Which tolerance the loop guard compares against `|value - y|`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Guard {
    /// The tolerance `value` is certified to (that of the latest solve).
    /// Iteration `j` is entered iff `|value - y| <= gamma^(j-1)`, so every
    /// exit satisfies the two-branch accuracy condition.
    #[default]
    Certified,
    /// `gamma^j`, one step tighter than the certified tolerance. This can
    /// stop with `gamma^j <= |value - y| < |X - value|` and misclassify.
    Listing,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RefinementOptions {
    /// Reuse the initial tolerance-1 solve instead of repeating it at `j = 0`.
    pub skip_redundant: bool,
    pub guard: Guard,
}

/// Outcome of refining one realization on one level.
#[derive(Clone, Debug, PartialEq)]
pub struct RealizationState {
    pub seed: u64,
    pub level: usize,
    pub value: f64,
    /// `j` such that `|X - value| <= gamma^j` is certified.
    pub achieved_tolerance_index: u32,
    pub cost: f64,
    /// Solves performed, including the initial one.
    pub iterations: u32,
    /// Refinement-loop iterations executed (`0..loop_iterations` were visited).
    pub loop_iterations: u32,
    pub skip_redundant: bool,
}

impl RealizationState {
    pub fn indicator(&self, y: f64) -> bool {
        self.value <= y
    }

    /// Tolerance indices of the solves in execution order.
    pub fn solve_sequence(&self) -> Vec<u32> {
        let mut seq = vec![0];
        for j in 0..self.loop_iterations {
            if !(self.skip_redundant && j == 0) {
                seq.push(j);
            }
        }
        seq
    }
}

fn attach_seed(key: StreamKey, err: Error) -> Error {
    match err {
        Error::Solve { .. } => err,
        other => Error::Solve {
            seed: key.raw(),
            message: other.to_string(),
        },
    }
}

/// Runs the refinement loop on an already drawn realization.
pub fn refine<M: Model>(
    model: &M,
    realization: &M::Realization,
    key: StreamKey,
    level: usize,
    y: f64,
    schedule: &LevelSchedule,
    options: RefinementOptions,
) -> Result<RealizationState> {
    let solve = |tol: Tolerance| {
        model
            .solve(realization, tol)
            .map_err(|e| attach_seed(key, e))
    };

    let first = solve(Tolerance::unit())?;
    let mut value = first.value;
    let mut cost = first.work;
    let mut iterations = 1;
    let mut achieved = 0;
    let mut certified = 1.0;
    let mut j: u32 = 0;
    while j as usize <= level {
        let tol = Tolerance::at(schedule, j);
        let enter = match options.guard {
            Guard::Certified => certified >= (value - y).abs(),
            Guard::Listing => tol.value > (value - y).abs(),
        };
        if !enter {
            break;
        }
        if !(options.skip_redundant && j == 0) {
            let s = solve(tol)?;
            value = s.value;
            cost += s.work;
            iterations += 1;
        }
        certified = tol.value;
        achieved = j;
        j += 1;
    }
    Ok(RealizationState {
        seed: key.raw(),
        level,
        value,
        achieved_tolerance_index: achieved,
        cost,
        iterations,
        loop_iterations: j,
        skip_redundant: options.skip_redundant,
    })
}

/// Draws the realization for `key` and refines it selectively to `level`.
pub fn solve_selective<M: Model>(
    model: &M,
    key: StreamKey,
    level: usize,
    y: f64,
    schedule: &LevelSchedule,
    options: RefinementOptions,
) -> Result<RealizationState> {
    let realization = model.draw(key).map_err(|e| attach_seed(key, e))?;
    refine(model, &realization, key, level, y, schedule, options)
}

/// Full refinement: a single solve straight to `gamma^level`.
pub fn solve_full<M: Model>(
    model: &M,
    realization: &M::Realization,
    key: StreamKey,
    level: usize,
    schedule: &LevelSchedule,
) -> Result<RealizationState> {
    let tol = Tolerance::at(schedule, level as u32);
    let s = model
        .solve(realization, tol)
        .map_err(|e| attach_seed(key, e))?;
    Ok(RealizationState {
        seed: key.raw(),
        level,
        value: s.value,
        achieved_tolerance_index: level as u32,
        cost: s.work,
        iterations: 1,
        loop_iterations: 0,
        skip_redundant: false,
    })
}

/// Recomputes a state's cost by summing the work of its recorded solve
/// sequence in order.
pub fn replay_cost<M: Model>(
    model: &M,
    realization: &M::Realization,
    state: &RealizationState,
    schedule: &LevelSchedule,
) -> Result<f64> {
    let mut cost = 0.0;
    for (i, j) in state.solve_sequence().into_iter().enumerate() {
        let tol = if i == 0 {
            Tolerance::unit()
        } else {
            Tolerance::at(schedule, j)
        };
        cost += model.work_units(realization, tol)?;
    }
    Ok(cost)
}

/// The two-branch accuracy condition on a refined value.
pub fn accuracy_holds(exact: f64, value: f64, level_tolerance: f64, y: f64) -> bool {
    let err = (exact - value).abs();
    err <= level_tolerance || err < (value - y).abs()
}

pub fn mean_selective_cost(states: &[RealizationState]) -> Result<f64> {
    if states.is_empty() {
        return Err(insufficient("mean_selective_cost needs at least one state"));
    }
    Ok(states.iter().map(|s| s.cost).sum::<f64>() / states.len() as f64)
}
