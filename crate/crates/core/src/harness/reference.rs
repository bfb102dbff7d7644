//! Brute-force references for models without an analytic probability.

use crate::error::{insufficient, invalid, Result};
use crate::estimator::LevelSchedule;
use crate::par::{map_chunks, Execution, DEFAULT_CHUNK};
use crate::refinement::{Model, Tolerance};
use crate::rng::StreamKey;

use super::config::Reference;
use super::rates::least_squares_slope;

/// Keeps pilot draws apart from every run's sample keys.
const PILOT_LABEL: u64 = 0x5049_4C4F_545F_4D43;

/// Exact QoIs of `samples` independent draws, in index order.
pub fn exact_qoi_sample<M: Model>(
    model: &M,
    samples: u64,
    seed: u64,
    execution: Execution,
) -> Result<Vec<f64>> {
    let base = StreamKey::root(seed).child(PILOT_LABEL);
    let parts = map_chunks(0..samples, DEFAULT_CHUNK, execution, |chunk| {
        chunk
            .map(|i| {
                let r = model.draw(base.child(i))?;
                model.exact_qoi(&r).ok_or_else(|| {
                    invalid(format!("model '{}' exposes no exact QoI", model.name()))
                })
            })
            .collect::<Result<Vec<f64>>>()
    });
    let mut out = Vec::with_capacity(samples as usize);
    for p in parts {
        out.extend(p?);
    }
    Ok(out)
}

/// Empirical `prob`-quantile (lower order statistic `ceil(prob n)`).
pub fn empirical_quantile(values: &[f64], prob: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(insufficient("quantile of an empty sample"));
    }
    if !(prob > 0.0 && prob <= 1.0) {
        return Err(invalid(format!(
            "quantile level must lie in (0, 1], got {prob}"
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((prob * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Ok(sorted[rank - 1])
}

/// Fraction of `values` at or below `y`, with its binomial standard error.
pub fn reference_from_sample(values: &[f64], y: f64) -> Result<Reference> {
    if values.is_empty() {
        return Err(insufficient("reference from an empty sample"));
    }
    let n = values.len() as f64;
    let p = values.iter().filter(|&&x| x <= y).count() as f64 / n;
    Ok(Reference {
        probability: p,
        std_error: (p * (1.0 - p) / n).sqrt(),
    })
}

/// Empirical cost exponent: the slope of `log(mean work at gamma^j)`
/// against `log(gamma^-j)` for `j = 0..=max_index`.
pub fn measured_work_exponent<M: Model>(
    model: &M,
    schedule: &LevelSchedule,
    max_index: u32,
    samples: u64,
    seed: u64,
    execution: Execution,
) -> Result<f64> {
    if max_index == 0 || samples == 0 {
        return Err(insufficient(
            "work exponent needs samples and at least two tolerances",
        ));
    }
    let base = StreamKey::root(seed).child(PILOT_LABEL ^ 1);
    let slots = max_index as usize + 1;
    let parts = map_chunks(0..samples, DEFAULT_CHUNK, execution, |chunk| {
        let mut sums = vec![0.0; slots];
        for i in chunk {
            let r = model.draw(base.child(i))?;
            for (j, s) in sums.iter_mut().enumerate() {
                *s += model.work_units(&r, Tolerance::at(schedule, j as u32))?;
            }
        }
        Ok::<_, crate::Error>(sums)
    });
    let mut sums = vec![0.0; slots];
    for p in parts {
        for (a, b) in sums.iter_mut().zip(p?) {
            *a += b;
        }
    }
    let xs: Vec<f64> = (0..slots).map(|j| -(schedule.tolerance(j)).ln()).collect();
    let ys: Vec<f64> = sums.iter().map(|s| (s / samples as f64).ln()).collect();
    least_squares_slope(&xs, &ys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{normal_cdf, SyntheticNormalModel};

    #[test]
    fn quantile_and_fraction() {
        let v = [5.0, 1.0, 3.0, 2.0, 4.0];
        assert_eq!(empirical_quantile(&v, 0.8).unwrap(), 4.0);
        assert_eq!(empirical_quantile(&v, 1.0).unwrap(), 5.0);
        let r = reference_from_sample(&v, 4.0).unwrap();
        assert_eq!(r.probability, 0.8);
        assert!(empirical_quantile(&[], 0.5).is_err());
    }

    #[test]
    fn synthetic_work_exponent_is_q() {
        let m = SyntheticNormalModel::new(0.1, 2.5).unwrap();
        let s = LevelSchedule::new(0.5, 2.5).unwrap();
        let q = measured_work_exponent(&m, &s, 6, 10, 1, Execution::Sequential).unwrap();
        assert!((q - 2.5).abs() < 1e-9);
    }

    #[test]
    fn synthetic_pilot_matches_cdf() {
        let m = SyntheticNormalModel::new(0.1, 1.0).unwrap();
        let xs = exact_qoi_sample(&m, 100_000, 4, Execution::Parallel).unwrap();
        let r = reference_from_sample(&xs, 0.8).unwrap();
        assert!((r.probability - normal_cdf(0.8)).abs() < 4.0 * r.std_error);
    }
}
