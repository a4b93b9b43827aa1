use std::io::Write;

use serde::{Deserialize, Serialize};

use super::DispatchSolution;
use crate::error::Result;
use crate::grid::GridCase;
use crate::scalar::Scalar;

impl<T: Scalar + Serialize> DispatchSolution<T> {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Flat table: one `bus` row per bus carrying its LMP, then one `line` row
    /// per branch carrying flow, limit and both duals.
    ///
    /// Columns: `record,index,bus_id,from_bus,to_bus,lmp,flow_mw,limit_mw,dual_forward,dual_reverse`.
    pub fn write_csv<W: Write>(&self, case: &GridCase, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record([
            "record",
            "index",
            "bus_id",
            "from_bus",
            "to_bus",
            "lmp",
            "flow_mw",
            "limit_mw",
            "dual_forward",
            "dual_reverse",
        ])?;
        for (m, (bus, lmp)) in case.buses.iter().zip(&self.lmp).enumerate() {
            wtr.write_record([
                "bus".to_string(),
                m.to_string(),
                bus.id.to_string(),
                String::new(),
                String::new(),
                lmp.to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ])?;
        }
        for (l, ((br, flow), dual)) in case.branches.iter().zip(&self.flows).zip(&self.flow_duals).enumerate() {
            wtr.write_record([
                "line".to_string(),
                l.to_string(),
                String::new(),
                case.buses[br.from_bus].id.to_string(),
                case.buses[br.to_bus].id.to_string(),
                String::new(),
                flow.to_string(),
                br.flow_limit_mw.to_string(),
                dual.forward.to_string(),
                dual.reverse.to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

impl<T: Scalar + for<'de> Deserialize<'de>> DispatchSolution<T> {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}
