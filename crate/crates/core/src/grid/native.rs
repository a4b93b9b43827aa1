use serde::{Deserialize, Serialize};

use super::{CaseParts, GridCase};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CaseFile {
    base_mva: f64,
    #[serde(default)]
    bus: Vec<BusRecord>,
    #[serde(default)]
    branch: Vec<BranchRecord>,
    #[serde(default)]
    generator: Vec<GeneratorRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    wind_farm: Vec<WindFarmRecord>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BusRecord {
    id: u32,
    load_mw: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    has_wind: Option<bool>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BranchRecord {
    from_bus: u32,
    to_bus: u32,
    reactance: f64,
    flow_limit_mw: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeneratorRecord {
    bus: u32,
    p_min_mw: f64,
    p_max_mw: f64,
    cost_c2: f64,
    cost_c1: f64,
    #[serde(default)]
    cost_c0: f64,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WindFarmRecord {
    bus: u32,
    capacity_mw: f64,
}

/// Parses the native TOML case format.
pub fn parse_native(text: &str) -> Result<GridCase> {
    let file: CaseFile = toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
            .unwrap_or(0);
        Error::Parse {
            line,
            message: e.message().to_string(),
        }
    })?;
    GridCase::from_parts(CaseParts {
        base_mva: file.base_mva,
        buses: file.bus.iter().map(|b| (b.id, b.load_mw, b.has_wind)).collect(),
        branches: file
            .branch
            .iter()
            .map(|b| (b.from_bus, b.to_bus, b.reactance, b.flow_limit_mw))
            .collect(),
        generators: file
            .generator
            .iter()
            .map(|g| (g.bus, g.p_min_mw, g.p_max_mw, g.cost_c2, g.cost_c1, g.cost_c0))
            .collect(),
        wind_farms: file.wind_farm.iter().map(|w| (w.bus, w.capacity_mw)).collect(),
    })
}

/// Writes a case in the native format using external bus ids.
pub fn serialize_native(case: &GridCase) -> Result<String> {
    let parts = case.to_parts();
    let file = CaseFile {
        base_mva: parts.base_mva,
        bus: parts
            .buses
            .into_iter()
            .map(|(id, load_mw, has_wind)| BusRecord { id, load_mw, has_wind })
            .collect(),
        branch: parts
            .branches
            .into_iter()
            .map(|(from_bus, to_bus, reactance, flow_limit_mw)| BranchRecord {
                from_bus,
                to_bus,
                reactance,
                flow_limit_mw,
            })
            .collect(),
        generator: parts
            .generators
            .into_iter()
            .map(|(bus, p_min_mw, p_max_mw, cost_c2, cost_c1, cost_c0)| GeneratorRecord {
                bus,
                p_min_mw,
                p_max_mw,
                cost_c2,
                cost_c1,
                cost_c0,
            })
            .collect(),
        wind_farm: parts
            .wind_farms
            .into_iter()
            .map(|(bus, capacity_mw)| WindFarmRecord { bus, capacity_mw })
            .collect(),
    };
    toml::to_string(&file).map_err(|e| Error::Serialization(e.to_string()))
}
