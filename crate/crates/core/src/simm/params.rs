use std::collections::BTreeMap;

use serde::Deserialize;

use super::RiskClass;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct IrParams {
    pub tenors: Vec<String>,
    pub tenor_years: Vec<f64>,
    pub delta_weights: Vec<f64>,
    pub correlation_decay: f64,
    #[serde(default)]
    pub correlation_floor: f64,
    pub vega_weight: f64,
}

impl IrParams {
    pub fn tenor_index(&self, label: &str) -> Result<usize> {
        self.tenors
            .iter()
            .position(|t| t == label)
            .ok_or_else(|| Error::MissingParameter(format!("IR tenor `{label}`")))
    }

    pub fn correlation(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return 1.0;
        }
        let d = (self.tenor_years[i] / self.tenor_years[j]).ln().abs();
        (-self.correlation_decay * d).exp().max(self.correlation_floor)
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct EqBucketParams {
    pub bucket: u32,
    pub delta_weight: f64,
    pub correlation: f64,
    pub vega_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct EqParams {
    #[serde(default = "one")]
    pub historical_volatility_ratio: f64,
    pub buckets: Vec<EqBucketParams>,
}

fn one() -> f64 {
    1.0
}

impl EqParams {
    pub fn bucket(&self, bucket: u32) -> Result<&EqBucketParams> {
        self.buckets
            .iter()
            .find(|b| b.bucket == bucket)
            .ok_or_else(|| Error::MissingParameter(format!("EQ bucket {bucket}")))
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct SimmParams {
    pub version: String,
    pub curvature_quantile: f64,
    pub curvature_floor_days: f64,
    /// Keys `"A:B"` with risk-class codes, in either order.
    pub cross_class: BTreeMap<String, f64>,
    pub ir: IrParams,
    pub eq: EqParams,
}

const ILLUSTRATIVE: &str = include_str!("../../params/simm_illustrative.toml");

impl SimmParams {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let p: Self = toml::from_str(s).map_err(|e| Error::Parse(format!("SIMM parameters: {e}")))?;
        p.validate()?;
        Ok(p)
    }

    /// The parameter file shipped with the crate.
    pub fn illustrative() -> Self {
        Self::from_toml_str(ILLUSTRATIVE).expect("shipped SIMM parameters are valid")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        let n = self.ir.tenors.len();
        if n == 0 || self.ir.tenor_years.len() != n || self.ir.delta_weights.len() != n {
            return bad("IR tenors, tenor_years and delta_weights must have equal non-zero length".into());
        }
        if self.ir.tenor_years.windows(2).any(|w| !(w[0] < w[1])) || !(self.ir.tenor_years[0] > 0.0) {
            return bad("IR tenor_years must be positive and increasing".into());
        }
        let weights = self
            .ir
            .delta_weights
            .iter()
            .chain([&self.ir.vega_weight, &self.eq.historical_volatility_ratio])
            .chain(self.eq.buckets.iter().flat_map(|b| [&b.delta_weight, &b.vega_weight]));
        for w in weights {
            if !(*w >= 0.0) || !w.is_finite() {
                return bad(format!("weights must be non-negative, got {w}"));
            }
        }
        let corrs = self
            .cross_class
            .values()
            .chain(self.eq.buckets.iter().map(|b| &b.correlation))
            .chain([&self.ir.correlation_floor]);
        for c in corrs {
            if !(-1.0..=1.0).contains(c) {
                return bad(format!("correlation {c} outside [-1, 1]"));
            }
        }
        for key in self.cross_class.keys() {
            parse_pair(key)?;
        }
        if !(self.ir.correlation_decay >= 0.0) {
            return bad("IR correlation_decay must be non-negative".into());
        }
        if !(self.curvature_quantile > 0.5 && self.curvature_quantile < 1.0) {
            return bad(format!("curvature_quantile {} outside (0.5, 1)", self.curvature_quantile));
        }
        if !(self.curvature_floor_days > 0.0) {
            return bad("curvature_floor_days must be positive".into());
        }
        Ok(())
    }


    /// ψ between two risk classes.
    pub fn psi(&self, r: RiskClass, s: RiskClass) -> Result<f64> {
        if r == s {
            return Ok(1.0);
        }
        for (key, v) in &self.cross_class {
            let (a, b) = parse_pair(key)?;
            if (a, b) == (r, s) || (a, b) == (s, r) {
                return Ok(*v);
            }
        }
        Err(Error::MissingParameter(format!("cross-class correlation {r}:{s}")))
    }

    /// ψ with a different IR–EQ value, e.g. for sensitivity studies.
    pub fn with_psi_ir_eq(mut self, psi: f64) -> Self {
        let ir_eq = [
            (RiskClass::InterestRate, RiskClass::Equity),
            (RiskClass::Equity, RiskClass::InterestRate),
        ];
        self.cross_class
            .retain(|k, _| !parse_pair(k).is_ok_and(|pair| ir_eq.contains(&pair)));
        self.cross_class.insert("IR:EQ".into(), psi);
        self
    }
}

fn parse_pair(key: &str) -> Result<(RiskClass, RiskClass)> {
    let (a, b) = key
        .split_once(':')
        .ok_or_else(|| Error::Parse(format!("cross-class key `{key}` is not `A:B`")))?;
    Ok((a.trim().parse()?, b.trim().parse()?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_file_loads() {
        let p = SimmParams::illustrative();
        assert_eq!(p.psi(RiskClass::InterestRate, RiskClass::Equity).unwrap(), 0.19);
        assert_eq!(p.psi(RiskClass::Equity, RiskClass::InterestRate).unwrap(), 0.19);
        assert_eq!(p.psi(RiskClass::Equity, RiskClass::Equity).unwrap(), 1.0);
        assert_eq!(p.ir.tenors.len(), 12);
        assert!(p.eq.bucket(1).is_ok());
        assert!(matches!(p.eq.bucket(99), Err(Error::MissingParameter(_))));
    }

    #[test]
    fn ir_correlation_shape() {
        let p = SimmParams::illustrative();
        let ir = &p.ir;
        assert_eq!(ir.correlation(3, 3), 1.0);
        assert_eq!(ir.correlation(2, 7), ir.correlation(7, 2));
        assert!(ir.correlation(4, 5) > ir.correlation(4, 9));
        assert!(ir.correlation(0, 11) >= ir.correlation_floor);
    }

    #[test]
    fn rejects_bad_correlation() {
        let text = include_str!("../../params/simm_illustrative.toml").replace("\"IR:EQ\" = 0.19", "\"IR:EQ\" = 1.5");
        assert!(SimmParams::from_toml_str(&text).is_err());
    }

    #[test]
    fn psi_override() {
        let p = SimmParams::illustrative().with_psi_ir_eq(0.5);
        assert_eq!(p.psi(RiskClass::Equity, RiskClass::InterestRate).unwrap(), 0.5);
    }
}
