use serde::{Deserialize, Serialize};

use super::ScenarioSet;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReserveMethod {
    Min,
    MinPlusDelta,
    OrderStatistic,
}

/// Per-farm upper bound on scheduled wind, truncated at zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReserveVector<T> {
    pub z_res: Vec<T>,
    /// Risk level, present for the order-statistic method.
    pub alpha: Option<f64>,
    pub method: ReserveMethod,
}

impl<T: Scalar> ReserveVector<T> {
    /// Reserve given explicitly, e.g. for fixtures.
    pub fn explicit(z_res: Vec<T>) -> Result<Self> {
        if z_res.iter().any(|v| !v.is_finite() || *v < T::zero()) {
            return Err(Error::InvalidArgument("reserve entries must be finite and non-negative".into()));
        }
        Ok(ReserveVector {
            z_res,
            alpha: None,
            method: ReserveMethod::Min,
        })
    }

    pub fn len(&self) -> usize {
        self.z_res.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z_res.is_empty()
    }
}

fn column_min<T: Scalar>(set: &ScenarioSet<T>) -> Vec<T> {
    let mut out = vec![T::infinity(); set.n_farms()];
    for r in 0..set.n_samples() {
        for (m, &v) in out.iter_mut().zip(set.samples.row(r)) {
            *m = m.min(v);
        }
    }
    out
}

/// `max(0, min_s z_m(s))` per farm.
pub fn reserve_min<T: Scalar>(set: &ScenarioSet<T>) -> ReserveVector<T> {
    ReserveVector {
        z_res: column_min(set).into_iter().map(|v| v.max(T::zero())).collect(),
        alpha: None,
        method: ReserveMethod::Min,
    }
}

/// `max(0, min_s z_m(s)) + δ_m`: truncate first, then lift.
pub fn reserve_boosted<T: Scalar>(set: &ScenarioSet<T>, delta: &[T]) -> Result<ReserveVector<T>> {
    if delta.len() != set.n_farms() {
        return Err(Error::dimension(format!(
            "delta has {} entries for {} farms",
            delta.len(),
            set.n_farms()
        )));
    }
    if delta.iter().any(|d| !(d.is_finite() && *d >= T::zero())) {
        return Err(Error::InvalidArgument("delta entries must be finite and non-negative".into()));
    }
    let base = reserve_min(set);
    Ok(ReserveVector {
        z_res: base.z_res.iter().zip(delta).map(|(&m, &d)| (m + d).max(T::zero())).collect(),
        alpha: None,
        method: ReserveMethod::MinPlusDelta,
    })
}

/// 1-based rank `⌈(1 − α)·S⌉` in descending order, computed as `S − ⌊α·S⌋`
/// with a 1e-9 guard so decimal risk levels land on the intended integer.
pub fn order_statistic_index(alpha: f64, s: usize) -> Result<usize> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("risk level {alpha} must lie in (0, 1)")));
    }
    let below = (alpha * s as f64 + 1e-9).floor() as usize;
    let k = s.saturating_sub(below);
    if k < 1 || k > s {
        return Err(Error::InvalidArgument(format!(
            "{s} samples are too few for risk level {alpha} (order-statistic index {k})"
        )));
    }
    Ok(k)
}

/// Per farm, the `⌈(1 − α)S⌉`-th largest sample, truncated at zero.
pub fn reserve_order_statistic<T: Scalar>(set: &ScenarioSet<T>, alpha: f64) -> Result<ReserveVector<T>> {
    let s = set.n_samples();
    let k = order_statistic_index(alpha, s)?;
    let mut column = Vec::with_capacity(s);
    let z_res = (0..set.n_farms())
        .map(|j| {
            column.clear();
            column.extend((0..s).map(|r| set.samples[(r, j)]));
            // k-th largest is the (S − k)-th smallest, 0-based
            let (_, v, _) = column.select_nth_unstable_by(s - k, |a, b| a.partial_cmp(b).expect("NaN sample"));
            v.max(T::zero())
        })
        .collect();
    Ok(ReserveVector {
        z_res,
        alpha: Some(alpha),
        method: ReserveMethod::OrderStatistic,
    })
}
