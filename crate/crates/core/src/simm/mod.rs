//! Sensitivity-based initial margin: delta, vega and curvature margins per
//! risk class, risk-class IM, product-class SIMM and portfolio totals.

mod crif;
mod margin;
mod params;

use std::collections::BTreeMap;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use crif::{allocate_to_tenors, panel_records, PanelRecordContext};
pub use margin::{
    compute_simm, curvature_margin, delta_margin, im_risk_class, marginal_simm, scaling_function,
    simm_portfolio_simplified, simm_product, vega_margin,
};
pub use params::{EqBucketParams, EqParams, IrParams, SimmParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RiskClass {
    #[serde(rename = "IR")]
    InterestRate,
    #[serde(rename = "CQ")]
    CreditQualifying,
    #[serde(rename = "CNQ")]
    CreditNonQualifying,
    #[serde(rename = "EQ")]
    Equity,
    #[serde(rename = "CM")]
    Commodity,
    #[serde(rename = "FX")]
    Fx,
}

impl RiskClass {
    pub const ALL: [RiskClass; 6] = [
        RiskClass::InterestRate,
        RiskClass::CreditQualifying,
        RiskClass::CreditNonQualifying,
        RiskClass::Equity,
        RiskClass::Commodity,
        RiskClass::Fx,
    ];

    pub fn code(self) -> &'static str {
        match self {
            RiskClass::InterestRate => "IR",
            RiskClass::CreditQualifying => "CQ",
            RiskClass::CreditNonQualifying => "CNQ",
            RiskClass::Equity => "EQ",
            RiskClass::Commodity => "CM",
            RiskClass::Fx => "FX",
        }
    }
}

impl fmt::Display for RiskClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for RiskClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RiskClass::ALL
            .into_iter()
            .find(|r| r.code().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Parse(format!("unknown risk class `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub enum ProductClass {
    RatesFX,
    Credit,
    #[default]
    Equity,
    Commodity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    #[default]
    Delta,
    Vega,
}

/// One CRIF-like line. Equity deltas are per unit relative move of the
/// underlying, rate deltas per basis point, vegas are `σ·∂V/∂σ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRecord {
    pub risk_class: RiskClass,
    pub bucket: u32,
    /// Tenor label for rates, underlying id for equity.
    pub qualifier: String,
    pub amount: f64,
    #[serde(default)]
    pub measure: Measure,
    /// Option expiry, needed for curvature.
    #[serde(default)]
    pub maturity_days: Option<f64>,
    #[serde(default)]
    pub product_class: ProductClass,
}

impl SensitivityRecord {
    pub fn delta(risk_class: RiskClass, bucket: u32, qualifier: impl Into<String>, amount: f64) -> Self {
        Self {
            risk_class,
            bucket,
            qualifier: qualifier.into(),
            amount,
            measure: Measure::Delta,
            maturity_days: None,
            product_class: ProductClass::Equity,
        }
    }

    pub fn vega(
        risk_class: RiskClass,
        bucket: u32,
        qualifier: impl Into<String>,
        amount: f64,
        maturity_days: f64,
    ) -> Self {
        Self {
            measure: Measure::Vega,
            maturity_days: Some(maturity_days),
            ..Self::delta(risk_class, bucket, qualifier, amount)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.amount.is_finite() {
            return Err(Error::InvalidInput(format!(
                "non-finite amount for {} {}",
                self.risk_class, self.qualifier
            )));
        }
        if let Some(t) = self.maturity_days {
            if !(t > 0.0) {
                return Err(Error::InvalidInput(format!("maturity must be positive, got {t}")));
            }
        }
        Ok(())
    }
}

/// Reads records from CSV with header `risk_class,bucket,qualifier,amount`
/// and optional `measure`, `maturity_days`, `product_class` columns.
pub fn read_records_csv<R: Read>(input: R) -> Result<Vec<SensitivityRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    let mut out = Vec::new();
    for (line, row) in rdr.deserialize().enumerate() {
        let rec: SensitivityRecord = row.map_err(|e| Error::Parse(format!("record {}: {e}", line + 1)))?;
        rec.validate()?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_records_csv<W: Write>(out: W, records: &[SensitivityRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in records {
        w.serialize(r).map_err(|e| Error::InvalidInput(format!("csv write failed: {e}")))?;
    }
    w.flush().map_err(|e| Error::InvalidInput(format!("csv flush failed: {e}")))
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RiskClassMargins {
    pub delta: f64,
    pub vega: f64,
    pub curvature: f64,
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProductResult {
    pub risk_classes: BTreeMap<RiskClass, RiskClassMargins>,
    pub simm: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SimmResult {
    pub products: BTreeMap<ProductClass, ProductResult>,
    pub total: f64,
}

impl SimmResult {
    pub fn im(&self, product: ProductClass, class: RiskClass) -> f64 {
        self.products
            .get(&product)
            .and_then(|p| p.risk_classes.get(&class))
            .map_or(0.0, |m| m.im)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_minimal_columns() {
        let text = "risk_class,bucket,qualifier,amount\nEQ,1,ABC,12.5\nIR,1,1y,-3\n";
        let recs = read_records_csv(text.as_bytes()).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[0], SensitivityRecord::delta(RiskClass::Equity, 1, "ABC", 12.5));
        assert_eq!(recs[1].risk_class, RiskClass::InterestRate);
        assert_eq!(recs[1].measure, Measure::Delta);
    }

    #[test]
    fn csv_round_trip_with_vega() {
        let recs = vec![
            SensitivityRecord::delta(RiskClass::Equity, 1, "ABC", 1.25),
            SensitivityRecord::vega(RiskClass::Equity, 1, "ABC", -0.5, 272.0),
        ];
        let mut buf = Vec::new();
        write_records_csv(&mut buf, &recs).unwrap();
        assert_eq!(read_records_csv(buf.as_slice()).unwrap(), recs);
    }

    #[test]
    fn csv_rejects_unknown_class() {
        let text = "risk_class,bucket,qualifier,amount\nXX,1,ABC,1\n";
        assert!(read_records_csv(text.as_bytes()).is_err());
        let text = "risk_class,bucket,qualifier,amount\nEQ,1,ABC,NaN\n";
        assert!(read_records_csv(text.as_bytes()).is_err());
    }
}
