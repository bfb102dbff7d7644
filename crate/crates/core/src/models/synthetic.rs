use rand::Rng;
use rand_distr::StandardNormal;

use super::normal_cdf;
use crate::error::{invalid, Result};
use crate::refinement::{Model, Solution, Tolerance};
use crate::rng::StreamKey;

/// Label of the per-tolerance substreams; keeps `U` apart from the draw of `omega`.
const PERTURBATION_LABEL: u64 = 0x5045_5254_5552_4221;

/// Source of the uniform variate `U(omega, h)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Perturbation {
    /// Drawn from the realization stream keyed on the tolerance index.
    Stream,
    /// The same value for every realization and tolerance (test fixtures).
    Fixed(f64),
}

/// `X = omega ~ N(0, 1)` approximated by
/// `X_h = omega + h (2U - 1 + b) / (1 + b)`, which satisfies `|X_h - X| <= h`.
#[derive(Clone, Copy, Debug)]
pub struct SyntheticNormalModel {
    b: f64,
    q: f64,
    perturbation: Perturbation,
}

#[derive(Clone, Copy, Debug)]
pub struct SyntheticRealization {
    pub key: StreamKey,
    pub omega: f64,
}

impl SyntheticRealization {
    pub fn with_omega(key: StreamKey, omega: f64) -> Self {
        SyntheticRealization { key, omega }
    }
}

impl SyntheticNormalModel {
    pub fn new(b: f64, q: f64) -> Result<Self> {
        if !(b >= 0.0 && b.is_finite()) {
            return Err(invalid(format!(
                "bias parameter b must be nonnegative, got {b}"
            )));
        }
        if !(q > 0.0) {
            return Err(invalid(format!(
                "cost exponent q must be positive, got {q}"
            )));
        }
        Ok(SyntheticNormalModel {
            b,
            q,
            perturbation: Perturbation::Stream,
        })
    }

    pub fn with_perturbation(mut self, perturbation: Perturbation) -> Self {
        self.perturbation = perturbation;
        self
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// `U(omega, h)` for tolerance index `index`.
    pub fn uniform(&self, realization: &SyntheticRealization, index: u32) -> f64 {
        match self.perturbation {
            Perturbation::Fixed(u) => u,
            Perturbation::Stream => realization
                .key
                .child(PERTURBATION_LABEL ^ u64::from(index))
                .stream()
                .random::<f64>(),
        }
    }

    /// `omega + h (2u - 1 + b) / (1 + b)`.
    ///
    /// The sum is pulled towards `omega` by whole ulps if rounding would
    /// otherwise break `|value - omega| <= h` in floating point.
    pub fn perturbed(&self, omega: f64, h: f64, u: f64) -> f64 {
        let ratio = (2.0 * u - 1.0 + self.b) / (1.0 + self.b);
        let mut value = omega + h * ratio;
        while (value - omega).abs() > h {
            value = if value > omega {
                value.next_down()
            } else {
                value.next_up()
            };
        }
        value
    }

    pub fn work_at(&self, h: f64) -> f64 {
        h.powf(-self.q)
    }
}

impl Model for SyntheticNormalModel {
    type Realization = SyntheticRealization;

    fn name(&self) -> &'static str {
        "synthetic-normal"
    }

    fn draw(&self, key: StreamKey) -> Result<SyntheticRealization> {
        let omega: f64 = key.stream().sample(StandardNormal);
        Ok(SyntheticRealization { key, omega })
    }

    fn solve(&self, realization: &SyntheticRealization, tolerance: Tolerance) -> Result<Solution> {
        let h = tolerance.value;
        if !(h > 0.0 && h <= 1.0) {
            return Err(invalid(format!("tolerance must lie in (0, 1], got {h}")));
        }
        let u = self.uniform(realization, tolerance.index);
        Ok(Solution {
            value: self.perturbed(realization.omega, h, u),
            work: self.work_at(h),
        })
    }

    fn work_units(&self, _realization: &SyntheticRealization, tolerance: Tolerance) -> Result<f64> {
        Ok(self.work_at(tolerance.value))
    }

    fn exact_qoi(&self, realization: &SyntheticRealization) -> Option<f64> {
        Some(realization.omega)
    }

    fn exact_probability(&self, y: f64) -> Option<f64> {
        Some(normal_cdf(y))
    }
}
