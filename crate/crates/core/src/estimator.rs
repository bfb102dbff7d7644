//! Estimator arithmetic: corrector tallies, moment bounds, sample allocation,
//! bias bound and the termination test.
//!
//! Levels `l >= 1` carry the trinomial corrector `Y_l = Q_l - Q_{l-1}`, whose
//! moments are bounded through the shrinkage estimator
//! `p~ = (x + k) / (n + k)`. Level 0 carries the raw indicator `Q_0` and uses
//! plain sample statistics.

use serde::{Deserialize, Serialize};

use crate::error::{insufficient, invalid, Result};

/// Geometric tolerance ladder `gamma^l` together with the cost exponent `q`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelSchedule {
    gamma: f64,
    q: f64,
}

impl LevelSchedule {
    pub fn new(gamma: f64, q: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma < 1.0) {
            return Err(invalid(format!("gamma must lie in (0, 1), got {gamma}")));
        }
        if !(q > 0.0 && q.is_finite()) {
            return Err(invalid(format!(
                "cost exponent q must be positive, got {q}"
            )));
        }
        Ok(LevelSchedule { gamma, q })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// `gamma^level`; equals 1 at level 0.
    pub fn tolerance(&self, level: usize) -> f64 {
        self.gamma.powi(level as i32)
    }
}

/// Which sampling strategy the per-sample cost describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CostMode {
    /// Every sample solved to `gamma^l`.
    Full,
    /// Samples refined only while close to the critical value.
    Selective,
}

/// Expected work of one `Q_l` in work units (one unit = one solve at
/// tolerance 1).
pub fn cost_per_sample(level: usize, schedule: &LevelSchedule, mode: CostMode) -> f64 {
    let gamma = schedule.gamma();
    let q = schedule.q();
    match mode {
        CostMode::Full => gamma.powf(-q * level as f64),
        CostMode::Selective => (0..=level).map(|j| gamma.powf((1.0 - q) * j as f64)).sum(),
    }
}

/// Cost of one corrector sample, `c_l = cost(Q_l) + cost(Q_{l-1})` with
/// `cost(Q_{-1}) = 0`.
pub fn corrector_cost(level: usize, schedule: &LevelSchedule, mode: CostMode) -> f64 {
    let fine = cost_per_sample(level, schedule, mode);
    if level == 0 {
        fine
    } else {
        fine + cost_per_sample(level - 1, schedule, mode)
    }
}

/// Corrector costs for levels `0..=max_level`.
pub fn corrector_costs(max_level: usize, schedule: &LevelSchedule, mode: CostMode) -> Vec<f64> {
    (0..=max_level)
        .map(|l| corrector_cost(l, schedule, mode))
        .collect()
}

/// Sufficient statistic of the samples drawn on one level.
///
/// On level 0 `n_plus` counts `Q_0 = 1` and `n_minus` stays 0; on levels
/// `>= 1` the two counts are the occurrences of `Y_l = +1` and `Y_l = -1`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CorrectorTally {
    pub level: usize,
    pub n: u64,
    pub n_plus: u64,
    pub n_minus: u64,
    pub sum_q0: f64,
    pub sum_q0_sq: f64,
}

impl CorrectorTally {
    pub fn new(level: usize) -> Self {
        CorrectorTally {
            level,
            ..Default::default()
        }
    }

    /// Level-0 tally from raw indicator observations.
    pub fn from_indicators(observations: &[bool]) -> Self {
        let mut t = CorrectorTally::new(0);
        for &q in observations {
            t.record_indicator(q);
        }
        t
    }

    /// Level-`l` tally from explicit trinomial counts.
    pub fn from_counts(level: usize, n: u64, n_plus: u64, n_minus: u64) -> Result<Self> {
        if level == 0 {
            return Err(invalid("use from_indicators for level 0"));
        }
        if n_plus + n_minus > n {
            return Err(invalid(format!(
                "n_plus + n_minus = {} exceeds n = {n}",
                n_plus + n_minus
            )));
        }
        Ok(CorrectorTally {
            level,
            n,
            n_plus,
            n_minus,
            ..Default::default()
        })
    }

    pub fn record_indicator(&mut self, q0: bool) {
        debug_assert_eq!(self.level, 0);
        self.n += 1;
        if q0 {
            self.n_plus += 1;
            self.sum_q0 += 1.0;
            self.sum_q0_sq += 1.0;
        }
    }

    /// Records `Y_l = Q_l - Q_{l-1}` from the two indicators.
    pub fn record_corrector(&mut self, fine: bool, coarse: bool) {
        debug_assert!(self.level >= 1);
        self.n += 1;
        match (fine, coarse) {
            (true, false) => self.n_plus += 1,
            (false, true) => self.n_minus += 1,
            _ => {}
        }
    }

    /// Component-wise sum. Both tallies must describe the same level.
    pub fn merge(&mut self, other: &CorrectorTally) {
        debug_assert_eq!(self.level, other.level);
        self.n += other.n;
        self.n_plus += other.n_plus;
        self.n_minus += other.n_minus;
        self.sum_q0 += other.sum_q0;
        self.sum_q0_sq += other.sum_q0_sq;
    }

    /// Sample mean of `Q_0` on level 0, of `Y_l` otherwise.
    pub fn mean(&self) -> Result<f64> {
        if self.n == 0 {
            return Err(insufficient(format!("level {} has no samples", self.level)));
        }
        let n = self.n as f64;
        Ok(if self.level == 0 {
            self.sum_q0 / n
        } else {
            (self.n_plus as f64 - self.n_minus as f64) / n
        })
    }
}

/// Estimates (or bounds) of `|E[Y_l]|` and `V[Y_l]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimates {
    pub level: usize,
    pub mean_bound: f64,
    pub var_bound: f64,
}

/// Shrinkage estimate `(x + k) / (n + k)` of a binomial proportion.
///
/// Never returns 0, so a level with no observed events still reports a
/// positive bound.
pub fn shrinkage_estimate(x: u64, n: u64, k: f64) -> Result<f64> {
    if x > n {
        return Err(invalid(format!("success count {x} exceeds trials {n}")));
    }
    if !(k > 0.0) {
        return Err(invalid(format!("pseudo-count k must be positive, got {k}")));
    }
    Ok((x as f64 + k) / (n as f64 + k))
}

/// Trinomial bounds for a corrector level: `max(p~_1, p~_-1)` for the mean
/// and `p~_{+-1}` (the sum estimated on its own) for the variance.
pub fn corrector_moments(tally: &CorrectorTally, k: f64) -> Result<MomentEstimates> {
    if tally.level == 0 {
        return Err(invalid(
            "level 0 has no trinomial corrector; use level0_moments",
        ));
    }
    let p_plus = shrinkage_estimate(tally.n_plus, tally.n, k)?;
    let p_minus = shrinkage_estimate(tally.n_minus, tally.n, k)?;
    let p_either = shrinkage_estimate(tally.n_plus + tally.n_minus, tally.n, k)?;
    Ok(MomentEstimates {
        level: tally.level,
        mean_bound: p_plus.max(p_minus),
        var_bound: p_either,
    })
}

/// Sample mean and unbiased sample variance of `Q_0`.
pub fn level0_moments(tally: &CorrectorTally) -> Result<MomentEstimates> {
    if tally.level != 0 {
        return Err(invalid(format!(
            "level0_moments called on level {}",
            tally.level
        )));
    }
    if tally.n < 2 {
        return Err(insufficient(format!(
            "level 0 needs at least 2 samples, has {}",
            tally.n
        )));
    }
    let n = tally.n as f64;
    let mean = tally.sum_q0 / n;
    let var = ((tally.sum_q0_sq - tally.sum_q0 * tally.sum_q0 / n) / (n - 1.0)).max(0.0);
    Ok(MomentEstimates {
        level: 0,
        mean_bound: mean,
        var_bound: var,
    })
}

/// Level-0 moments as used for allocation. A sample whose draws are all
/// equal has zero sample variance; it is replaced by `p~ (1 - p~)` with
/// `p~ = k / (n + k)` the shrunk frequency of the unseen outcome.
pub fn guarded_level0_moments(tally: &CorrectorTally, k: f64) -> Result<MomentEstimates> {
    let mut m = level0_moments(tally)?;
    if m.var_bound == 0.0 {
        let p = shrinkage_estimate(0, tally.n, k)?;
        m.var_bound = p * (1.0 - p);
    }
    Ok(m)
}

/// Dispatches to `guarded_level0_moments` or `corrector_moments` by level.
pub fn level_moments(tally: &CorrectorTally, k: f64) -> Result<MomentEstimates> {
    if tally.level == 0 {
        guarded_level0_moments(tally, k)
    } else {
        corrector_moments(tally, k)
    }
}

/// Per-level target sample sizes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    pub sizes: Vec<u64>,
    /// Set when every variance was zero and the all-ones allocation was
    /// returned.
    pub degenerate: bool,
}

impl Allocation {
    /// Never shrinks below what has already been drawn.
    pub fn reconcile(&self, drawn: &[u64]) -> Allocation {
        let sizes = self
            .sizes
            .iter()
            .enumerate()
            .map(|(l, &n)| n.max(drawn.get(l).copied().unwrap_or(0)))
            .collect();
        Allocation {
            sizes,
            degenerate: self.degenerate,
        }
    }
}

/// Real-valued minimiser of `sum N_l c_l` subject to
/// `sum V_l / N_l = eps^2 / 2`:
/// `N_l = 2 eps^-2 sqrt(V_l / c_l) sum_k sqrt(V_k c_k)`.
pub fn optimal_allocation_real(variances: &[f64], costs: &[f64], epsilon: f64) -> Result<Vec<f64>> {
    if variances.len() != costs.len() || variances.is_empty() {
        return Err(invalid(format!(
            "got {} variances and {} costs",
            variances.len(),
            costs.len()
        )));
    }
    if !(epsilon > 0.0) {
        return Err(invalid(format!("epsilon must be positive, got {epsilon}")));
    }
    if let Some(v) = variances.iter().find(|v| !(**v >= 0.0)) {
        return Err(invalid(format!("variance must be nonnegative, got {v}")));
    }
    if let Some(c) = costs.iter().find(|c| !(**c > 0.0)) {
        return Err(invalid(format!("cost must be positive, got {c}")));
    }
    let total: f64 = variances
        .iter()
        .zip(costs)
        .map(|(v, c)| (v * c).sqrt())
        .sum();
    let scale = 2.0 / (epsilon * epsilon) * total;
    Ok(variances
        .iter()
        .zip(costs)
        .map(|(v, c)| scale * (v / c).sqrt())
        .collect())
}

/// Integer allocation: ceiling of the real optimum, floored at one sample.
pub fn optimal_allocation(
    moments: &[MomentEstimates],
    costs: &[f64],
    epsilon: f64,
) -> Result<Allocation> {
    let variances: Vec<f64> = moments.iter().map(|m| m.var_bound).collect();
    let real = optimal_allocation_real(&variances, costs, epsilon)?;
    let degenerate = variances.iter().all(|&v| v == 0.0);
    if degenerate {
        return Ok(Allocation {
            sizes: vec![1; real.len()],
            degenerate,
        });
    }
    let sizes = real.iter().map(|&n| (n.ceil() as u64).max(1)).collect();
    Ok(Allocation { sizes, degenerate })
}

/// Telescoped estimate, raw and clamped to `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub raw: f64,
    pub clamped: f64,
}

/// Sum of the per-level sample means; level 0 contributes `E[Q_0]`.
pub fn mlmc_combine(tallies: &[CorrectorTally]) -> Result<Estimate> {
    if tallies.is_empty() {
        return Err(insufficient("no levels to combine"));
    }
    let mut raw = 0.0;
    for t in tallies {
        raw += t.mean()?;
    }
    Ok(Estimate {
        raw,
        clamped: raw.clamp(0.0, 1.0),
    })
}

/// Bias bound `|E[Q - Q_l]| <= |E[Y_l]| / (gamma^-1 - 1)`.
pub fn bias_bound(moments: &MomentEstimates, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(invalid(format!("gamma must lie in (0, 1), got {gamma}")));
    }
    Ok(moments.mean_bound / (1.0 / gamma - 1.0))
}

/// Both sides of the stopping rule
/// `max(gamma |E[Y_{L-1}]|, |E[Y_L]|) < (gamma^-1 - 1) eps / sqrt(2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TerminationCheck {
    pub level: usize,
    pub lhs: f64,
    pub rhs: f64,
}

impl TerminationCheck {
    pub fn converged(&self) -> bool {
        self.lhs < self.rhs
    }
}

pub fn termination_check(
    previous: &MomentEstimates,
    finest: &MomentEstimates,
    schedule: &LevelSchedule,
    epsilon: f64,
) -> TerminationCheck {
    let gamma = schedule.gamma();
    let lhs = (gamma * previous.mean_bound).max(finest.mean_bound);
    let rhs = (1.0 / gamma - 1.0) * epsilon / std::f64::consts::SQRT_2;
    TerminationCheck {
        level: finest.level,
        lhs,
        rhs,
    }
}

/// Plain Monte Carlo mean of indicator observations.
pub fn mc_estimate(observations: &[bool]) -> Result<f64> {
    if observations.is_empty() {
        return Err(insufficient("mc_estimate needs at least one observation"));
    }
    let hits = observations.iter().filter(|&&q| q).count();
    Ok(hits as f64 / observations.len() as f64)
}

/// Validated run parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Critical value; failure is `X <= y`.
    pub y: f64,
    /// Target root-mean-square error.
    pub epsilon: f64,
    pub schedule: LevelSchedule,
    /// Base sample size `N`; level `L` opens with `N gamma^-L` samples.
    pub base_samples: u64,
    /// Shrinkage pseudo-count.
    pub k: f64,
}

impl EstimatorConfig {
    pub fn new(
        y: f64,
        epsilon: f64,
        gamma: f64,
        q: f64,
        base_samples: u64,
        k: f64,
    ) -> Result<Self> {
        let schedule = LevelSchedule::new(gamma, q)?;
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(invalid(format!("epsilon must be positive, got {epsilon}")));
        }
        if base_samples < 1 {
            return Err(invalid("base sample size N must be at least 1"));
        }
        if !(k > 0.0) {
            return Err(invalid(format!("pseudo-count k must be positive, got {k}")));
        }
        if !y.is_finite() {
            return Err(invalid("critical value y must be finite"));
        }
        Ok(EstimatorConfig {
            y,
            epsilon,
            schedule,
            base_samples,
            k,
        })
    }
}
