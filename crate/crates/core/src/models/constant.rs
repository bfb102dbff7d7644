use crate::error::Result;
use crate::refinement::{Model, Solution, Tolerance};
use crate::rng::StreamKey;

/// Deterministic QoI; every solve is exact and costs one unit.
#[derive(Clone, Copy, Debug)]
pub struct ConstantModel {
    pub value: f64,
}

impl Model for ConstantModel {
    type Realization = ();

    fn name(&self) -> &'static str {
        "constant"
    }

    fn draw(&self, _key: StreamKey) -> Result<()> {
        Ok(())
    }

    fn solve(&self, _realization: &(), _tolerance: Tolerance) -> Result<Solution> {
        Ok(Solution {
            value: self.value,
            work: 1.0,
        })
    }

    fn exact_qoi(&self, _realization: &()) -> Option<f64> {
        Some(self.value)
    }

    fn exact_probability(&self, y: f64) -> Option<f64> {
        Some(if self.value <= y { 1.0 } else { 0.0 })
    }
}
