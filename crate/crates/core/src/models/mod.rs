//! Shipped model implementations.

mod constant;
mod elliptic;
mod synthetic;

pub use constant::ConstantModel;
pub use elliptic::{EllipticFluxModel, EllipticParams, EllipticRealization};
pub use synthetic::{Perturbation, SyntheticNormalModel, SyntheticRealization};

/// Standard normal cdf, `0.5 erfc(-y / sqrt 2)`.
///
/// `libm::erfc` is accurate to a few ulp, well inside 1e-10 absolute.
pub fn normal_cdf(y: f64) -> f64 {
    0.5 * libm::erfc(-y / std::f64::consts::SQRT_2)
}

/// Names accepted by the harness, with a one-line description each.
pub const MODEL_NAMES: &[(&str, &str)] = &[
    (
        "synthetic-normal",
        "X ~ N(0,1), X_h = X + h(2U - 1 + b)/(1 + b), cost h^-q",
    ),
    (
        "elliptic-flux-1d",
        "1D lognormal-coefficient flux, exponential covariance, dyadic coarse grids",
    ),
    ("constant", "X is a fixed value; exact at every tolerance"),
];
