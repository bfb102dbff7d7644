use std::io::Write;
use std::path::Path;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::refinement::{Model, Solution, Tolerance};
use crate::rng::StreamKey;

/// Parameters of the 1D flux model.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EllipticParams {
    /// Cells of the master grid; a power of two.
    pub master_cells: usize,
    /// Standard deviation of the log-coefficient.
    pub sigma: f64,
    /// Correlation length of the exponential covariance.
    pub rho: f64,
}

impl Default for EllipticParams {
    fn default() -> Self {
        EllipticParams {
            master_cells: 1 << 12,
            sigma: 1.0,
            rho: 0.1,
        }
    }
}

/// Unit-pressure-drop flux through `[0, 1]` with a lognormal, piecewise
/// constant conductivity on the master grid.
///
/// The exact QoI is the series-network flux `(sum_i h / a_i)^-1`. A coarse
/// grid with `2^m` cells replaces each block of master cells by its
/// arithmetic mean, which overestimates the flux; a solve to tolerance `t`
/// picks the coarsest dyadic grid whose flux is within `t` of the exact one
/// and charges its cell count as work.
#[derive(Clone, Debug)]
pub struct EllipticFluxModel {
    params: EllipticParams,
    /// Row-major lower-triangular covariance factor; `None` when `sigma = 0`.
    factor: Option<Vec<f64>>,
    /// Diagonal jitter that had to be added before factorising.
    jitter: f64,
}

#[derive(Clone, Debug)]
pub struct EllipticRealization {
    pub key: StreamKey,
    /// Master-grid conductivities `a_i = exp(kappa_i)`.
    pub coefficients: Vec<f64>,
    /// Flux on the grid with `2^m` cells, `m = 0..=log2(master_cells)`.
    pub coarse_fluxes: Vec<f64>,
    /// Master-grid flux; identical to the last entry of `coarse_fluxes`.
    pub exact: f64,
}

impl EllipticRealization {
    /// Log-coefficient `kappa_i = ln a_i`.
    pub fn log_coefficients(&self) -> Vec<f64> {
        self.coefficients.iter().map(|a| a.ln()).collect()
    }

    /// Writes the master-grid coefficients as little-endian `f64`s.
    pub fn dump_coefficients(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        for a in &self.coefficients {
            out.write_all(&a.to_le_bytes())?;
        }
        out.flush()?;
        Ok(())
    }
}

impl EllipticFluxModel {
    pub fn new(params: EllipticParams) -> Result<Self> {
        let n = params.master_cells;
        if n == 0 || !n.is_power_of_two() {
            return Err(invalid(format!(
                "master_cells must be a power of two, got {n}"
            )));
        }
        if !(params.sigma >= 0.0 && params.sigma.is_finite()) {
            return Err(invalid(format!(
                "sigma must be nonnegative, got {}",
                params.sigma
            )));
        }
        if !(params.rho > 0.0) {
            return Err(invalid(format!("rho must be positive, got {}", params.rho)));
        }
        if params.sigma == 0.0 {
            return Ok(EllipticFluxModel {
                params,
                factor: None,
                jitter: 0.0,
            });
        }

        let var = params.sigma * params.sigma;
        let h = 1.0 / n as f64;
        let cov = DMatrix::from_fn(n, n, |i, j| {
            let d = (i as f64 - j as f64).abs() * h;
            var * (-d / params.rho).exp()
        });
        let (chol, jitter) = match cov.clone().cholesky() {
            Some(c) => (c, 0.0),
            None => {
                // Rounding can leave the matrix numerically indefinite.
                let jitter = 1e-10 * var;
                let shifted = cov + DMatrix::identity(n, n) * jitter;
                let c = shifted.cholesky().ok_or_else(|| {
                    Error::ModelInit("covariance not positive definite after jitter".into())
                })?;
                (c, jitter)
            }
        };
        let l = chol.l();
        let mut factor = Vec::with_capacity(n * (n + 1) / 2);
        for i in 0..n {
            for j in 0..=i {
                factor.push(l[(i, j)]);
            }
        }
        Ok(EllipticFluxModel {
            params,
            factor: Some(factor),
            jitter,
        })
    }

    pub fn params(&self) -> &EllipticParams {
        &self.params
    }

    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    /// Number of dyadic grids, coarsest (one cell) to master.
    pub fn grid_count(&self) -> usize {
        self.params.master_cells.trailing_zeros() as usize + 1
    }

    fn log_field(&self, key: StreamKey) -> Vec<f64> {
        let n = self.params.master_cells;
        let Some(factor) = &self.factor else {
            return vec![0.0; n];
        };
        let mut stream = key.stream();
        let z: Vec<f64> = (0..n).map(|_| stream.sample(StandardNormal)).collect();
        let mut kappa = Vec::with_capacity(n);
        let mut offset = 0;
        for i in 0..n {
            let row = &factor[offset..offset + i + 1];
            kappa.push(row.iter().zip(&z).map(|(l, z)| l * z).sum());
            offset += i + 1;
        }
        kappa
    }

    /// Flux `(sum_j h / a_j)^-1` of a piecewise-constant conductivity.
    pub fn series_flux(coefficients: &[f64]) -> f64 {
        let h = 1.0 / coefficients.len() as f64;
        1.0 / coefficients.iter().map(|a| h / a).sum::<f64>()
    }

    /// Builds a realization from given master-grid coefficients.
    pub fn realization_from_coefficients(
        key: StreamKey,
        coefficients: Vec<f64>,
    ) -> EllipticRealization {
        let n = coefficients.len();
        debug_assert!(n.is_power_of_two());
        let grids = n.trailing_zeros() as usize + 1;
        let mut coarse_fluxes = vec![0.0; grids];

        // Block sums, finest first; the master level keeps the raw values so
        // its flux is bit-identical to the exact one.
        let mut sums = coefficients.clone();
        let mut block = 1usize;
        for m in (0..grids).rev() {
            let means: Vec<f64> = sums.iter().map(|s| s / block as f64).collect();
            coarse_fluxes[m] = Self::series_flux(&means);
            if m > 0 {
                sums = sums.chunks(2).map(|p| p[0] + p[1]).collect();
                block *= 2;
            }
        }
        let exact = Self::series_flux(&coefficients);
        debug_assert_eq!(exact, coarse_fluxes[grids - 1]);
        EllipticRealization {
            key,
            coefficients,
            coarse_fluxes,
            exact,
        }
    }

    /// Index `m` of the coarsest grid certified to `tolerance`.
    pub fn select_grid(realization: &EllipticRealization, tolerance: f64) -> usize {
        realization
            .coarse_fluxes
            .iter()
            .position(|x| (x - realization.exact).abs() <= tolerance)
            .unwrap_or(realization.coarse_fluxes.len() - 1)
    }
}

impl Model for EllipticFluxModel {
    type Realization = EllipticRealization;

    fn name(&self) -> &'static str {
        "elliptic-flux-1d"
    }

    fn draw(&self, key: StreamKey) -> Result<EllipticRealization> {
        let coefficients = self.log_field(key).into_iter().map(f64::exp).collect();
        Ok(Self::realization_from_coefficients(key, coefficients))
    }

    fn solve(&self, realization: &EllipticRealization, tolerance: Tolerance) -> Result<Solution> {
        if !(tolerance.value > 0.0) {
            return Err(invalid(format!(
                "tolerance must be positive, got {}",
                tolerance.value
            )));
        }
        let m = Self::select_grid(realization, tolerance.value);
        Ok(Solution {
            value: realization.coarse_fluxes[m],
            work: (1u64 << m) as f64,
        })
    }

    fn exact_qoi(&self, realization: &EllipticRealization) -> Option<f64> {
        Some(realization.exact)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(sigma: f64) -> EllipticFluxModel {
        EllipticFluxModel::new(EllipticParams {
            master_cells: 64,
            sigma,
            rho: 0.1,
        })
        .unwrap()
    }

    #[test]
    fn rejects_bad_grid() {
        let p = EllipticParams {
            master_cells: 48,
            ..Default::default()
        };
        assert!(EllipticFluxModel::new(p).is_err());
    }

    #[test]
    fn zero_variance_field_is_constant() {
        let m = small(0.0);
        let r = m.draw(StreamKey::root(1)).unwrap();
        assert!(r.coefficients.iter().all(|&a| a == 1.0));
        assert_eq!(r.exact, 1.0);
        let s = m.solve(&r, Tolerance::unit()).unwrap();
        assert_eq!((s.value, s.work), (1.0, 1.0));
    }

    #[test]
    fn constant_field_is_exact_on_every_grid() {
        let r = EllipticFluxModel::realization_from_coefficients(StreamKey::root(0), vec![2.5; 32]);
        assert!(r.coarse_fluxes.iter().all(|&x| (x - 2.5).abs() < 1e-14));
        assert_eq!(EllipticFluxModel::select_grid(&r, 1e-12), 0);
    }

    #[test]
    fn draws_are_reproducible() {
        let m = small(1.0);
        let a = m.draw(StreamKey::root(42)).unwrap();
        let b = m.draw(StreamKey::root(42)).unwrap();
        assert_eq!(a.coefficients, b.coefficients);
        let c = m.draw(StreamKey::root(43)).unwrap();
        assert_ne!(a.coefficients, c.coefficients);
    }

    #[test]
    fn flux_between_extreme_conductivities() {
        let m = small(1.0);
        for seed in 0..50 {
            let r = m.draw(StreamKey::root(seed)).unwrap();
            let lo = r.coefficients.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = r.coefficients.iter().cloned().fold(0.0, f64::max);
            assert!(lo <= r.exact && r.exact <= hi);
            assert!(r.coefficients.iter().all(|&a| a > 0.0));
            // Arithmetic averaging never lowers the flux.
            assert!(r
                .coarse_fluxes
                .iter()
                .all(|&x| x >= r.exact * (1.0 - 1e-12)));
        }
    }

    #[test]
    fn tighter_tolerance_never_coarsens() {
        let m = small(1.0);
        let r = m.draw(StreamKey::root(7)).unwrap();
        let mut t = 1.0;
        let mut last = 0.0;
        for _ in 0..30 {
            let s = m.solve(&r, Tolerance { index: 0, value: t }).unwrap();
            assert!(s.work >= last);
            assert!((s.value - r.exact).abs() <= t);
            last = s.work;
            t *= 0.5;
        }
        let s = m
            .solve(
                &r,
                Tolerance {
                    index: 0,
                    value: 1e-300,
                },
            )
            .unwrap();
        assert_eq!(s.value, r.exact);
        assert_eq!(s.work, 64.0);
    }

    #[test]
    fn dump_round_trips() {
        let m = small(1.0);
        let r = m.draw(StreamKey::root(3)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("field.bin");
        r.dump_coefficients(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let back: Vec<f64> = bytes
            .chunks(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        assert_eq!(back, r.coefficients);
    }
}
