//! Out-of-sample Monte Carlo check of `Prob(z ⪰ w) ≥ 1 − α`.
//!
//! A trial violates the constraint when the drawn wind falls below the
//! schedule at one or more farms. Per-farm rates are diagnostics only.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rng::{stream_rng, Stream};
use crate::scalar::Scalar;
use crate::scenario::ForecastModel;

pub const DEFAULT_TRIALS: usize = 100_000;
const CHUNK: usize = 4096;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub empirical_risk: f64,
    pub violations: usize,
    pub n_trials: usize,
    pub alpha_target: f64,
    /// 95% normal-approximation half-width `1.96·√(r(1−r)/n)`.
    pub ci_halfwidth: f64,
    pub per_farm_violation_rates: Vec<f64>,
    /// `empirical_risk + ci_halfwidth ≤ alpha_target`
    pub pass: bool,
}

impl RiskReport {
    fn from_counts(violations: usize, per_farm: &[usize], n_trials: usize, alpha_target: f64) -> Self {
        let n = n_trials as f64;
        let r = violations as f64 / n;
        let ci_halfwidth = 1.96 * (r * (1.0 - r) / n).sqrt();
        RiskReport {
            empirical_risk: r,
            violations,
            n_trials,
            alpha_target,
            ci_halfwidth,
            per_farm_violation_rates: per_farm.iter().map(|&v| v as f64 / n).collect(),
            pass: r + ci_halfwidth <= alpha_target,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub const CSV_HEADER: &'static str =
        "alpha_target,n_trials,violations,empirical_risk,ci_halfwidth,pass,per_farm_violation_rates";

    /// One row matching [`RiskReport::CSV_HEADER`]; per-farm rates are
    /// `;`-separated in the last column.
    pub fn csv_row(&self) -> String {
        let farms: Vec<String> = self.per_farm_violation_rates.iter().map(|r| r.to_string()).collect();
        format!(
            "{},{},{},{},{},{},{}",
            self.alpha_target,
            self.n_trials,
            self.violations,
            self.empirical_risk,
            self.ci_halfwidth,
            self.pass,
            farms.join(";")
        )
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("risk level {alpha} must lie in (0, 1)")));
    }
    Ok(())
}

struct Tally {
    violations: usize,
    per_farm: Vec<usize>,
}

impl Tally {
    fn new(w: usize) -> Self {
        Tally {
            violations: 0,
            per_farm: vec![0; w],
        }
    }

    fn add<T: Scalar>(&mut self, w: &[T], samples: &Matrix<T>) {
        for r in 0..samples.rows() {
            let mut any = false;
            for (j, (&z, &wj)) in samples.row(r).iter().zip(w).enumerate() {
                if z < wj {
                    self.per_farm[j] += 1;
                    any = true;
                }
            }
            self.violations += usize::from(any);
        }
    }
}

/// Draws `n_trials` fresh scenarios from the validation stream of `seed`.
pub fn validate<T: Scalar>(
    w: &[T],
    model: &ForecastModel<T>,
    n_trials: usize,
    seed: u64,
    alpha_target: f64,
) -> Result<RiskReport> {
    if n_trials == 0 {
        return Err(Error::InvalidArgument("n_trials must be at least 1".into()));
    }
    if w.len() != model.n_farms() {
        return Err(Error::dimension(format!(
            "schedule has {} farms, model has {}",
            w.len(),
            model.n_farms()
        )));
    }
    check_alpha(alpha_target)?;
    let mut rng = stream_rng(seed, Stream::Validation);
    let mut tally = Tally::new(w.len());
    let mut left = n_trials;
    while left > 0 {
        let batch = left.min(CHUNK);
        tally.add(w, &model.draw(batch, &mut rng));
        left -= batch;
    }
    Ok(RiskReport::from_counts(tally.violations, &tally.per_farm, n_trials, alpha_target))
}

/// Evaluates `w` against given samples, for paired comparisons.
pub fn validate_on<T: Scalar>(w: &[T], samples: &Matrix<T>, alpha_target: f64) -> Result<RiskReport> {
    if samples.rows() == 0 {
        return Err(Error::InvalidArgument("no samples to validate against".into()));
    }
    if w.len() != samples.cols() {
        return Err(Error::dimension(format!(
            "schedule has {} farms, samples have {}",
            w.len(),
            samples.cols()
        )));
    }
    check_alpha(alpha_target)?;
    let mut tally = Tally::new(w.len());
    tally.add(w, samples);
    Ok(RiskReport::from_counts(tally.violations, &tally.per_farm, samples.rows(), alpha_target))
}
