use super::GridCase;
use crate::error::{Error, Result};

/// Rescales conventional capacity and sizes the wind farms for a target penetration.
///
/// Generator limits are multiplied by `conventional_scale`, and every farm gets
/// an equal share of `penetration · C`, where `C` is the conventional capacity
/// before scaling. Total installed capacity stays at `C`, which requires
/// `conventional_scale + penetration = 1`.
pub fn scale_for_penetration(case: &GridCase, conventional_scale: f64, penetration: f64) -> Result<GridCase> {
    if !(conventional_scale > 0.0 && conventional_scale <= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "conventional scale {conventional_scale} must lie in (0, 1]"
        )));
    }
    if !(penetration > 0.0 && penetration < 1.0) {
        return Err(Error::InvalidArgument(format!("penetration {penetration} must lie in (0, 1)")));
    }
    if case.wind_farms.is_empty() {
        return Err(Error::InvalidArgument("case has no wind farms to scale".into()));
    }
    if (conventional_scale + penetration - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "inconsistent penetration: scaling conventional capacity by {conventional_scale} \
             leaves room for {:.6} wind, not {penetration}",
            1.0 - conventional_scale
        )));
    }

    let total = case.total_conventional_capacity_mw();
    let per_farm = penetration * total / case.wind_farms.len() as f64;
    let mut out = case.clone();
    for g in &mut out.generators {
        g.p_min_mw *= conventional_scale;
        g.p_max_mw *= conventional_scale;
    }
    for f in &mut out.wind_farms {
        f.capacity_mw = per_farm;
    }
    out.validate()?;
    Ok(out)
}

/// Multiplies every bus load by `beta`.
pub fn scale_loads(case: &GridCase, beta: f64) -> Result<GridCase> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::InvalidArgument(format!("load scale {beta} must be positive")));
    }
    let mut out = case.clone();
    for b in &mut out.buses {
        b.load_mw *= beta;
    }
    Ok(out)
}
