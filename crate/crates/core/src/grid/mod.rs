//! Network data: buses, branches, generators and wind farms.
//!
//! A [`GridCase`] stores bus references as contiguous 0-based internal indices.
//! External ids from case files are kept on each [`Bus`] and restored on
//! serialization.

mod dc;
mod matpower;
mod native;
mod scale;

use std::collections::{HashMap, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use dc::{build_dc_model, build_dc_model_with_ref, DcModel};
pub use matpower::parse_matpower;
pub use native::{parse_native, serialize_native};
pub use scale::{scale_for_penetration, scale_loads};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    /// External id as written in the case file.
    pub id: u32,
    pub load_mw: f64,
    pub has_wind: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub from_bus: usize,
    pub to_bus: usize,
    /// Series reactance in per-unit.
    pub reactance: f64,
    pub flow_limit_mw: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub bus: usize,
    pub p_min_mw: f64,
    pub p_max_mw: f64,
    pub cost_c2: f64,
    pub cost_c1: f64,
    pub cost_c0: f64,
}

impl Generator {
    /// `c2·p² + c1·p + c0` in $/h for `p` in MW.
    pub fn cost(&self, p_mw: f64) -> f64 {
        (self.cost_c2 * p_mw + self.cost_c1) * p_mw + self.cost_c0
    }

    pub fn marginal_cost(&self, p_mw: f64) -> f64 {
        2.0 * self.cost_c2 * p_mw + self.cost_c1
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindFarm {
    pub bus: usize,
    pub capacity_mw: f64,
}

/// Element records as they appear in a case file, with external bus ids.
#[derive(Clone, Debug, Default)]
pub struct CaseParts {
    pub base_mva: f64,
    pub buses: Vec<(u32, f64, Option<bool>)>,
    pub branches: Vec<(u32, u32, f64, f64)>,
    pub generators: Vec<(u32, f64, f64, f64, f64, f64)>,
    pub wind_farms: Vec<(u32, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridCase {
    pub buses: Vec<Bus>,
    pub branches: Vec<Branch>,
    pub generators: Vec<Generator>,
    pub wind_farms: Vec<WindFarm>,
    pub base_mva: f64,
}

impl GridCase {
    /// Renumbers external bus ids and validates every invariant.
    pub fn from_parts(parts: CaseParts) -> Result<Self> {
        let mut index: HashMap<u32, usize> = HashMap::with_capacity(parts.buses.len());
        let mut buses = Vec::with_capacity(parts.buses.len());
        for (i, &(id, load_mw, _)) in parts.buses.iter().enumerate() {
            if index.insert(id, i).is_some() {
                return Err(Error::validation(format!("duplicate bus id {id}")));
            }
            buses.push(Bus {
                id,
                load_mw,
                has_wind: false,
            });
        }
        let resolve = |what: &str, k: usize, id: u32| {
            index.get(&id).copied().ok_or_else(|| {
                Error::validation(format!("dangling bus reference: {what} {k} references bus {id}"))
            })
        };

        let branches = parts
            .branches
            .iter()
            .enumerate()
            .map(|(k, &(f, t, x, lim))| {
                Ok(Branch {
                    from_bus: resolve("branch", k, f)?,
                    to_bus: resolve("branch", k, t)?,
                    reactance: x,
                    flow_limit_mw: lim,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let generators = parts
            .generators
            .iter()
            .enumerate()
            .map(|(k, &(b, pmin, pmax, c2, c1, c0))| {
                Ok(Generator {
                    bus: resolve("generator", k, b)?,
                    p_min_mw: pmin,
                    p_max_mw: pmax,
                    cost_c2: c2,
                    cost_c1: c1,
                    cost_c0: c0,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let wind_farms = parts
            .wind_farms
            .iter()
            .enumerate()
            .map(|(k, &(b, cap))| {
                Ok(WindFarm {
                    bus: resolve("wind_farm", k, b)?,
                    capacity_mw: cap,
                })
            })
            .collect::<Result<Vec<_>>>()?;

        for farm in &wind_farms {
            buses[farm.bus].has_wind = true;
        }
        for (bus, &(id, _, declared)) in buses.iter().zip(&parts.buses) {
            if let Some(declared) = declared {
                if declared != bus.has_wind {
                    return Err(Error::validation(format!(
                        "bus {id} declares has_wind = {declared} but {} wind farm",
                        if bus.has_wind { "hosts a" } else { "hosts no" }
                    )));
                }
            }
        }

        let case = GridCase {
            buses,
            branches,
            generators,
            wind_farms,
            base_mva: parts.base_mva,
        };
        case.validate()?;
        Ok(case)
    }

    /// Checks every element invariant plus connectivity.
    pub fn validate(&self) -> Result<()> {
        if !(self.base_mva.is_finite() && self.base_mva > 0.0) {
            return Err(Error::validation("base_mva must be positive"));
        }
        if self.buses.is_empty() {
            return Err(Error::validation("case has no buses"));
        }
        let m = self.buses.len();
        for bus in &self.buses {
            if !(bus.load_mw.is_finite() && bus.load_mw >= 0.0) {
                return Err(Error::validation(format!(
                    "bus {} load_mw must be finite and non-negative",
                    bus.id
                )));
            }
        }
        for (k, br) in self.branches.iter().enumerate() {
            if br.from_bus >= m || br.to_bus >= m {
                return Err(Error::validation(format!("dangling bus reference in branch {k}")));
            }
            if br.from_bus == br.to_bus {
                return Err(Error::validation(format!("branch {k} connects a bus to itself")));
            }
            if !(br.reactance.is_finite() && br.reactance > 0.0) {
                return Err(Error::validation(format!("branch {k} reactance must be positive")));
            }
            if !(br.flow_limit_mw.is_finite() && br.flow_limit_mw > 0.0) {
                return Err(Error::validation(format!(
                    "branch {k} flow_limit_mw must be finite and positive"
                )));
            }
        }
        for (k, g) in self.generators.iter().enumerate() {
            if g.bus >= m {
                return Err(Error::validation(format!("dangling bus reference in generator {k}")));
            }
            let finite = [g.p_min_mw, g.p_max_mw, g.cost_c2, g.cost_c1, g.cost_c0]
                .iter()
                .all(|v| v.is_finite());
            if !finite {
                return Err(Error::validation(format!("generator {k} has non-finite data")));
            }
            if !(0.0 <= g.p_min_mw && g.p_min_mw <= g.p_max_mw) {
                return Err(Error::validation(format!(
                    "generator {k} requires 0 <= p_min_mw <= p_max_mw"
                )));
            }
            if g.cost_c2 < 0.0 {
                return Err(Error::validation(format!("non-convex cost: generator {k} has cost_c2 < 0")));
            }
            if g.cost_c1 < 0.0 || g.cost_c0 < 0.0 {
                return Err(Error::validation(format!(
                    "generator {k} cost coefficients must be non-negative"
                )));
            }
            if g.marginal_cost(g.p_min_mw) <= 0.0 {
                return Err(Error::validation(format!(
                    "generator {k} cost is not strictly increasing on [p_min, p_max]"
                )));
            }
        }
        let mut seen = vec![false; m];
        for (k, farm) in self.wind_farms.iter().enumerate() {
            if farm.bus >= m {
                return Err(Error::validation(format!("dangling bus reference in wind_farm {k}")));
            }
            if std::mem::replace(&mut seen[farm.bus], true) {
                return Err(Error::validation(format!(
                    "more than one wind farm on bus {}",
                    self.buses[farm.bus].id
                )));
            }
            if !(farm.capacity_mw.is_finite() && farm.capacity_mw > 0.0) {
                return Err(Error::validation(format!("wind_farm {k} capacity must be positive")));
            }
        }
        for (i, bus) in self.buses.iter().enumerate() {
            if bus.has_wind != seen[i] {
                return Err(Error::validation(format!("bus {} has_wind flag is inconsistent", bus.id)));
            }
        }
        if let Some(orphan) = self.unreachable_bus() {
            return Err(Error::validation(format!(
                "disconnected network: bus {} is not reachable from bus {}",
                self.buses[orphan].id, self.buses[0].id
            )));
        }
        Ok(())
    }

    /// First bus not reachable from bus 0 by breadth-first search.
    fn unreachable_bus(&self) -> Option<usize> {
        let m = self.buses.len();
        let mut adj = vec![Vec::new(); m];
        for br in &self.branches {
            adj[br.from_bus].push(br.to_bus);
            adj[br.to_bus].push(br.from_bus);
        }
        let mut seen = vec![false; m];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen.iter().position(|&s| !s)
    }

    pub fn n_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn n_branches(&self) -> usize {
        self.branches.len()
    }

    pub fn bus_index(&self, external_id: u32) -> Option<usize> {
        self.buses.iter().position(|b| b.id == external_id)
    }

    pub fn total_load_mw(&self) -> f64 {
        self.buses.iter().map(|b| b.load_mw).sum()
    }

    pub fn total_conventional_capacity_mw(&self) -> f64 {
        self.generators.iter().map(|g| g.p_max_mw).sum()
    }

    pub fn total_wind_capacity_mw(&self) -> f64 {
        self.wind_farms.iter().map(|f| f.capacity_mw).sum()
    }

    /// Adds one farm per listed external bus id, replacing any existing farms.
    pub fn with_wind_farms(&self, bus_ids: &[u32], capacity_mw: f64) -> Result<Self> {
        let mut parts = self.to_parts();
        for b in &mut parts.buses {
            b.2 = None;
        }
        parts.wind_farms = bus_ids.iter().map(|&id| (id, capacity_mw)).collect();
        GridCase::from_parts(parts)
    }

    pub(crate) fn to_parts(&self) -> CaseParts {
        let id = |i: usize| self.buses[i].id;
        CaseParts {
            base_mva: self.base_mva,
            buses: self.buses.iter().map(|b| (b.id, b.load_mw, Some(b.has_wind))).collect(),
            branches: self
                .branches
                .iter()
                .map(|br| (id(br.from_bus), id(br.to_bus), br.reactance, br.flow_limit_mw))
                .collect(),
            generators: self
                .generators
                .iter()
                .map(|g| (id(g.bus), g.p_min_mw, g.p_max_mw, g.cost_c2, g.cost_c1, g.cost_c0))
                .collect(),
            wind_farms: self.wind_farms.iter().map(|f| (id(f.bus), f.capacity_mw)).collect(),
        }
    }
}

/// Parses either a native case file or a MATPOWER-style `.m` file, chosen by content.
pub fn parse_case(text: &str) -> Result<GridCase> {
    if looks_like_matpower(text) {
        parse_matpower(text)
    } else {
        parse_native(text)
    }
}

pub fn load_case(path: impl AsRef<Path>) -> Result<GridCase> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::InvalidArgument(format!("cannot read case {}: {e}", path.display())))?;
    parse_case(&text)
}

fn looks_like_matpower(text: &str) -> bool {
    text.lines()
        .map(|l| l.split('%').next().unwrap_or("").trim_start())
        .any(|l| l.starts_with("mpc.") || l.starts_with("function mpc"))
}
