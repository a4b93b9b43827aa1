use chrono::{Duration, NaiveDate};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};
use crate::scenario::WindTrace;

const PERSISTENCE: f64 = 0.9;
const COMMON_SHARE: f64 = 0.6;
const LOGIT_GAIN: f64 = 1.6;
const BLANK_RATE: f64 = 0.02;

/// Normalized hourly wind trace in `[0, 1]` for `n_farms` farms.
///
/// Each farm follows a unit-variance Gaussian AR(1) whose innovations share a
/// common component, so farms are positively correlated; the latent value is
/// mapped through a logistic curve with a per-farm offset. About 2% of the
/// rows lose one cell to exercise missing-data handling. Timestamps start at
/// 2012-05-01T00:00.
pub fn generate_synthetic_trace(n_hours: usize, n_farms: usize, seed: u64) -> Result<WindTrace> {
    if n_hours < 2 {
        return Err(Error::InvalidArgument(format!("a trace needs at least 2 hours, got {n_hours}")));
    }
    if n_farms == 0 {
        return Err(Error::InvalidArgument("a trace needs at least one farm".into()));
    }
    let mut rng = stream_rng(seed, Stream::SyntheticTrace);
    let offsets: Vec<f64> = (0..n_farms).map(|_| rng.random_range(-0.6..0.4)).collect();
    let mut latent: Vec<f64> = (0..n_farms).map(|_| rng.sample(StandardNormal)).collect();
    let innovation = (1.0 - PERSISTENCE * PERSISTENCE).sqrt();
    let (common_w, own_w) = (COMMON_SHARE.sqrt(), (1.0 - COMMON_SHARE).sqrt());

    let start = NaiveDate::from_ymd_opt(2012, 5, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid start date");
    let mut timestamps = Vec::with_capacity(n_hours);
    let mut rows = Vec::with_capacity(n_hours);
    for h in 0..n_hours {
        if h > 0 {
            let shared: f64 = rng.sample(StandardNormal);
            for y in latent.iter_mut() {
                let own: f64 = rng.sample(StandardNormal);
                *y = PERSISTENCE * *y + innovation * (common_w * shared + own_w * own);
            }
        }
        let mut row: Vec<Option<f64>> = latent
            .iter()
            .zip(&offsets)
            .map(|(&y, &a)| Some(1.0 / (1.0 + (-(a + LOGIT_GAIN * y)).exp())))
            .collect();
        if rng.random_bool(BLANK_RATE) {
            let j = rng.random_range(0..n_farms);
            row[j] = None;
        }
        timestamps.push(start + Duration::hours(h as i64));
        rows.push(row);
    }
    Ok(WindTrace {
        timestamps,
        farm_names: (1..=n_farms).map(|j| format!("farm_{j}")).collect(),
        rows,
    })
}
