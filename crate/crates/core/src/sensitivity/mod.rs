//! Crude per-scenario Monte Carlo estimates of price, delta, vega and rho.

mod estimators;
mod rho;
mod sweep;

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use estimators::{fd_equity_sensitivity, fd_sensitivity, mc_estimate, mc_estimate_batch, pathwise_adjoint, revalue, BumpSpec};
pub use rho::{forward_to_zero_rho, zero_to_forward_rho};
pub use sweep::{panel_sweep, Method, SweepContext};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityPanel {
    pub scenario_index: usize,
    pub price: f64,
    pub delta: f64,
    pub vega: f64,
    /// Keyed by the forward periods of the pricing curve.
    pub rho_fwd: Vec<f64>,
    /// Keyed by the pricing-curve tenor nodes.
    pub rho_zero: Vec<f64>,
    pub paths_used: usize,
}

/// Monte Carlo standard errors of the quantities in a panel.
#[derive(Debug, Clone, PartialEq)]
pub struct StandardErrors {
    pub price: f64,
    pub delta: f64,
    pub vega: f64,
    pub rho_fwd: Vec<f64>,
}

/// Names of the scalar columns of a panel in a fixed order: price, delta, vega,
/// then one `rho_<label>` per forward bucket.
pub fn panel_columns(rho_labels: &[String]) -> Vec<String> {
    let mut cols = vec!["price".to_string(), "delta".to_string(), "vega".to_string()];
    cols.extend(rho_labels.iter().map(|l| format!("rho_{l}")));
    cols
}

impl SensitivityPanel {
    /// Scalar values in `panel_columns` order (forward rhos).
    pub fn values(&self) -> Vec<f64> {
        let mut v = vec![self.price, self.delta, self.vega];
        v.extend(&self.rho_fwd);
        v
    }

    /// Inverse of `values`; zero rhos are recomputed from `tenors`.
    pub fn from_values(scenario_index: usize, values: &[f64], tenors: &[f64], paths_used: usize) -> Result<Self> {
        if values.len() != 3 + tenors.len() {
            return Err(Error::InvalidInput(format!(
                "{} values for {} rho buckets",
                values.len(),
                tenors.len()
            )));
        }
        let rho_fwd = values[3..].to_vec();
        Ok(Self {
            scenario_index,
            price: values[0],
            delta: values[1],
            vega: values[2],
            rho_zero: forward_to_zero_rho(&rho_fwd, tenors)?,
            rho_fwd,
            paths_used,
        })
    }
}

/// CSV with header `scenario,price,delta,vega,rho_<bucket>...`.
pub fn write_panels_csv<W: Write>(out: W, panels: &[SensitivityPanel], rho_labels: &[String]) -> Result<()> {
    let io = |e: csv::Error| Error::InvalidInput(format!("csv write failed: {e}"));
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["scenario".to_string()];
    header.extend(panel_columns(rho_labels));
    w.write_record(&header).map_err(io)?;
    for p in panels {
        let mut row = vec![p.scenario_index.to_string()];
        row.extend(p.values().iter().map(|v| format!("{v:.12e}")));
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|e| Error::InvalidInput(format!("csv flush failed: {e}")))
}
