//! Machine-readable outputs: decision JSON and the iteration log CSV.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cg::IterationRecord;
use crate::energy::{Location, OffloadDecision};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDecision {
    pub id: usize,
    pub location: Location,
    pub slot: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionExport {
    pub psi: f64,
    pub psi_lower: f64,
    pub psi_upper: f64,
    pub epsilon: f64,
    pub iterations: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub termination: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assignments_enumerated: Option<u64>,
    pub nodes: Vec<NodeDecision>,
}

impl DecisionExport {
    pub fn new(
        decision: &OffloadDecision,
        psi: f64,
        psi_lower: f64,
        psi_upper: f64,
        epsilon: f64,
        iterations: usize,
    ) -> Self {
        DecisionExport {
            psi,
            psi_lower,
            psi_upper,
            epsilon,
            iterations,
            policy: None,
            termination: None,
            assignments_enumerated: None,
            nodes: decision
                .locations
                .iter()
                .zip(&decision.slots)
                .enumerate()
                .map(|(i, (&location, &slot))| NodeDecision {
                    id: i + 1,
                    location,
                    slot,
                })
                .collect(),
        }
    }

    pub fn decision(&self) -> OffloadDecision {
        OffloadDecision::new(
            self.nodes.iter().map(|n| n.location).collect(),
            self.nodes.iter().map(|n| n.slot).collect(),
        )
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("decision serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut d: DecisionExport = serde_json::from_str(&text)?;
        d.nodes.sort_by_key(|n| n.id);
        if d.nodes.iter().enumerate().any(|(i, n)| n.id != i + 1) {
            return Err(Error::Schema("decision node ids must be 1..N".into()));
        }
        Ok(d)
    }
}

pub fn iteration_log_csv(log: &[IterationRecord]) -> String {
    let mut out = String::from("iter,psi_upper,psi_lower,r_underbar,admitted_node\n");
    for r in log {
        let admitted = r.admitted_node.map(|n| n.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.iter, r.psi_upper, r.psi_lower, r.r_underbar, admitted
        ));
    }
    out
}

pub fn write_iteration_log(path: impl AsRef<Path>, log: &[IterationRecord]) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, iteration_log_csv(log)).map_err(|e| Error::io(path, e))
}
