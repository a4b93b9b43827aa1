//! Wind forecast model, Monte Carlo scenarios and their reduction to per-farm
//! reserve bounds.

mod covariance;
mod reserve;
mod trace;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, SymmetricEigen};
use crate::rng::{stream_rng, Stream};
use crate::scalar::Scalar;

pub use covariance::{estimate_covariance, psd_repair};
pub use reserve::{
    order_statistic_index, reserve_boosted, reserve_min, reserve_order_statistic, ReserveMethod, ReserveVector,
};
pub use trace::WindTrace;

/// Gaussian wind forecast `N(mean, covariance)` over the farms of a case.
#[derive(Clone, Debug, PartialEq)]
pub struct ForecastModel<T> {
    mean: Vec<T>,
    covariance: Matrix<T>,
    farm_order: Vec<usize>,
    /// `V·diag(√λ)`; handles singular covariances without regularization.
    factor: Matrix<T>,
}

impl<T: Scalar> ForecastModel<T> {
    /// Validates, symmetrizes and PSD-repairs the covariance.
    ///
    /// `farm_order[k]` is the index into the case's wind farm list that vector
    /// position `k` describes.
    pub fn new(mean: Vec<T>, covariance: Matrix<T>, farm_order: Vec<usize>) -> Result<Self> {
        let w = mean.len();
        if covariance.rows() != w || covariance.cols() != w {
            return Err(Error::dimension(format!(
                "covariance is {}x{} for a mean of length {w}",
                covariance.rows(),
                covariance.cols()
            )));
        }
        if farm_order.len() != w {
            return Err(Error::dimension(format!("farm_order has {} entries, expected {w}", farm_order.len())));
        }
        if mean.iter().chain(covariance.as_slice()).any(|v| !v.is_finite()) {
            return Err(Error::validation("forecast model has non-finite entries"));
        }
        let scale = T::one() + covariance.max_abs();
        if !covariance.is_symmetric(T::lit(1e-10) * scale) {
            return Err(Error::validation("covariance is not symmetric"));
        }
        let eig = SymmetricEigen::new(&covariance);
        if eig.min_value() < -T::lit(1e-8) * scale {
            return Err(Error::validation(format!(
                "covariance is indefinite (minimum eigenvalue {})",
                eig.min_value()
            )));
        }
        let covariance = psd_repair(&covariance);
        let eig = SymmetricEigen::new(&covariance);
        let roots: Vec<T> = eig.values.iter().map(|&l| l.max(T::zero()).sqrt()).collect();
        let factor = Matrix::from_fn(w, w, |i, j| eig.vectors[(i, j)] * roots[j]);
        Ok(ForecastModel {
            mean,
            covariance,
            farm_order,
            factor,
        })
    }

    /// Farms in case order, `farm_order = 0..w`.
    pub fn with_default_order(mean: Vec<T>, covariance: Matrix<T>) -> Result<Self> {
        let order = (0..mean.len()).collect();
        Self::new(mean, covariance, order)
    }

    pub fn mean(&self) -> &[T] {
        &self.mean
    }

    pub fn covariance(&self) -> &Matrix<T> {
        &self.covariance
    }

    pub fn farm_order(&self) -> &[usize] {
        &self.farm_order
    }

    pub fn n_farms(&self) -> usize {
        self.mean.len()
    }

    /// Same covariance, new mean.
    pub fn with_mean(&self, mean: Vec<T>) -> Result<Self> {
        if mean.len() != self.mean.len() {
            return Err(Error::dimension("mean length changed"));
        }
        Ok(ForecastModel { mean, ..self.clone() })
    }

    /// Draws `s` i.i.d. rows `mean + L·ξ` from the scheduling stream of `seed`.
    pub fn sample(&self, s: usize, seed: u64) -> ScenarioSet<T> {
        let mut rng = stream_rng(seed, Stream::Scheduling);
        ScenarioSet {
            samples: self.draw(s, &mut rng),
            seed,
        }
    }

    /// Draws `s` rows from an arbitrary generator.
    pub fn draw<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> Matrix<T> {
        let w = self.n_farms();
        let mut out = Matrix::zeros(s, w);
        let mut xi = vec![T::zero(); w];
        for r in 0..s {
            for v in xi.iter_mut() {
                let z: f64 = rng.sample(StandardNormal);
                *v = T::lit(z);
            }
            let row = out.row_mut(r);
            for i in 0..w {
                let mut acc = self.mean[i];
                for (j, &x) in xi.iter().enumerate() {
                    acc += self.factor[(i, j)] * x;
                }
                row[i] = acc;
            }
        }
        out
    }
}

#[derive(Serialize, Deserialize)]
struct ForecastModelFile<T> {
    mean: Vec<T>,
    covariance: Vec<Vec<T>>,
    farm_order: Vec<usize>,
}

impl<T: Scalar + Serialize> ForecastModel<T> {
    pub fn to_json(&self) -> Result<String> {
        let file = ForecastModelFile {
            mean: self.mean.clone(),
            covariance: self.covariance.to_rows(),
            farm_order: self.farm_order.clone(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }
}

impl<T: Scalar + for<'de> Deserialize<'de>> ForecastModel<T> {
    pub fn from_json(text: &str) -> Result<Self> {
        let file: ForecastModelFile<T> = serde_json::from_str(text)?;
        let cov = Matrix::from_rows(&file.covariance).ok_or_else(|| Error::validation("covariance rows are ragged"))?;
        Self::new(file.mean, cov, file.farm_order)
    }
}

/// `S` draws of the wind vector, one per row.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioSet<T> {
    pub samples: Matrix<T>,
    pub seed: u64,
}

impl<T: Scalar> ScenarioSet<T> {
    pub fn new(samples: Matrix<T>, seed: u64) -> Result<Self> {
        if samples.rows() == 0 {
            return Err(Error::InvalidArgument("a scenario set needs at least one sample".into()));
        }
        Ok(ScenarioSet { samples, seed })
    }

    pub fn n_samples(&self) -> usize {
        self.samples.rows()
    }

    pub fn n_farms(&self) -> usize {
        self.samples.cols()
    }

    /// Clips every draw to `[0, capacity]`; off unless requested.
    pub fn clip_to_capacity(&mut self, capacity: &[T]) -> Result<()> {
        if capacity.len() != self.n_farms() {
            return Err(Error::dimension("capacity length does not match farm count"));
        }
        for r in 0..self.n_samples() {
            for (v, &cap) in self.samples.row_mut(r).iter_mut().zip(capacity) {
                *v = v.max(T::zero()).min(cap);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_covariance_returns_mean() {
        let m = ForecastModel::with_default_order(vec![1.5, 0.0, 3.0], Matrix::zeros(3, 3)).unwrap();
        let set = m.sample(50, 3);
        for r in 0..50 {
            assert_eq!(set.samples.row(r), &[1.5, 0.0, 3.0]);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let cov = Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 2.0]);
        let m = ForecastModel::with_default_order(vec![0.0, 1.0], cov).unwrap();
        assert_eq!(m.sample(100, 11), m.sample(100, 11));
        assert_ne!(m.sample(100, 11).samples, m.sample(100, 12).samples);
    }

    #[test]
    fn rejects_indefinite() {
        let cov = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(ForecastModel::with_default_order(vec![0.0, 0.0], cov).is_err());
        let asym = Matrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(ForecastModel::with_default_order(vec![0.0, 0.0], asym).is_err());
    }

    #[test]
    fn json_round_trip() {
        let cov = Matrix::from_row_slice(2, 2, &[1.0, 0.25, 0.25, 2.0]);
        let m = ForecastModel::new(vec![0.5, 1.0], cov, vec![1, 0]).unwrap();
        let back = ForecastModel::<f64>::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn capacity_clipping() {
        let m = ForecastModel::with_default_order(vec![5.0], Matrix::from_row_slice(1, 1, &[100.0])).unwrap();
        let mut set = m.sample(200, 1);
        set.clip_to_capacity(&[10.0]).unwrap();
        assert!(set.samples.as_slice().iter().all(|&v| (0.0..=10.0).contains(&v)));
    }
}
