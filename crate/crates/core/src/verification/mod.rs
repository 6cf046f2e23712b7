//! Oracles, residual diagnostics, the hypothesis battery and run reports.

mod battery;
mod oracles;
mod report;

use std::sync::Arc;

use crate::discretization::{OperatorSet, SpatialDiscretization, Weight};
use crate::error::Result;
use crate::operators::{InclusionOperator, OperatorData};

pub use battery::{hypothesis_battery, BatteryReport, CheckResult, CheckStatus, CHECK_NAMES};
pub use oracles::{
    manufactured_error, oracle_tiny_periodic, periodic_mode, FourierOracle, OracleSettings,
};
pub use report::{OracleComparison, RunReport, UniformBound};

/// A fully specified problem before any hypothesis has been checked.
#[derive(Debug, Clone)]
pub struct Instance {
    pub name: String,
    pub mesh: Arc<SpatialDiscretization>,
    pub weight: Weight,
    pub data: OperatorData,
    /// Time steps per period, used to sample a(t, ·).
    pub steps: usize,
    /// ε at which the V* inner product is probed.
    pub eps_probe: f64,
    pub seed: u64,
    pub probes: usize,
}

impl Instance {
    /// Assemble the operators; fails on the first violated hypothesis.
    pub fn build(&self) -> Result<(Arc<OperatorSet>, InclusionOperator)> {
        let ops = Arc::new(OperatorSet::assemble(&self.mesh, &self.weight)?);
        let op = InclusionOperator::new(self.mesh.clone(), ops.clone(), self.data.clone())?;
        Ok((ops, op))
    }
}
