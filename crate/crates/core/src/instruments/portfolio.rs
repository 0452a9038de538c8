use serde::{Deserialize, Serialize};

use super::{InstrumentKind, InstrumentSpec};
use crate::error::{invalid, Error, Result};
use crate::scenario::years;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Underlying {
    pub id: String,
    /// SIMM equity bucket.
    pub bucket: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Position {
    pub spec: InstrumentSpec,
    pub quantity: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PortfolioSpec {
    pub underlyings: Vec<Underlying>,
    pub positions: Vec<Position>,
}

/// One row of the portfolio file; dates are whole days from today.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PositionRecord {
    label: Option<String>,
    kind: InstrumentKind,
    underlying: String,
    maturity_days: f64,
    #[serde(default = "one")]
    quantity: f64,
    #[serde(default)]
    strike: f64,
    barrier: Option<f64>,
    window_start_days: Option<f64>,
    #[serde(default)]
    check_days: Vec<f64>,
    #[serde(default)]
    fixing_days: Vec<f64>,
    fixing_weights: Option<Vec<f64>>,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct PortfolioFile {
    underlying: Vec<Underlying>,
    position: Vec<PositionRecord>,
}

impl PortfolioSpec {
    pub fn new(underlyings: Vec<Underlying>, positions: Vec<Position>) -> Result<Self> {
        let p = Self { underlyings, positions };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.positions.is_empty() {
            return invalid("portfolio has no positions");
        }
        for pos in &self.positions {
            pos.spec.validate()?;
            if self.bucket(&pos.spec.underlying).is_none() {
                return invalid(format!("position {} references unknown underlying {}", pos.label, pos.spec.underlying));
            }
            if !pos.quantity.is_finite() {
                return invalid(format!("position {} has a non-finite quantity", pos.label));
            }
        }
        Ok(())
    }

    pub fn bucket(&self, underlying: &str) -> Option<u32> {
        self.underlyings.iter().find(|u| u.id == underlying).map(|u| u.bucket)
    }

    /// Parses the TOML portfolio file: `[[underlying]]` tables with `id` and
    /// `bucket`, and one `[[position]]` table per trade.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: PortfolioFile = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let positions = file
            .position
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                let maturity = years(r.maturity_days);
                let mut spec = InstrumentSpec::vanilla(r.kind, &r.underlying, r.strike, maturity);
                match r.kind {
                    InstrumentKind::AsianArith => {
                        let days = if r.fixing_days.is_empty() { vec![r.maturity_days] } else { r.fixing_days };
                        let weights = r
                            .fixing_weights
                            .unwrap_or_else(|| vec![1.0 / days.len() as f64; days.len()]);
                        if weights.len() != days.len() {
                            return invalid(format!("position {i}: fixing weights and days differ in length"));
                        }
                        spec.fixings = days.iter().map(|&d| years(d)).zip(weights).collect();
                    }
                    InstrumentKind::BarrierUpOut => {
                        spec.barrier = r.barrier;
                        spec.window_start = r.window_start_days.map(years);
                        spec.check_dates = r.check_days.iter().map(|&d| years(d)).collect();
                    }
                    _ => {}
                }
                Ok(Position {
                    label: r.label.unwrap_or_else(|| format!("{:?}-{}-{i}", r.kind, r.underlying).to_lowercase()),
                    spec,
                    quantity: r.quantity,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(file.underlying, positions)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FILE: &str = r#"
[[underlying]]
id = "ABC"
bucket = 5

[[position]]
kind = "european_call"
underlying = "ABC"
maturity_days = 455
strike = 100

[[position]]
kind = "asian_arith"
underlying = "ABC"
maturity_days = 272
strike = 105
fixing_days = [92, 182, 272]

[[position]]
kind = "barrier_up_out"
underlying = "ABC"
maturity_days = 272
strike = 100
barrier = 130
window_start_days = 30
check_days = [30, 60, 272]
"#;

    #[test]
    fn parses_and_validates() {
        let p = PortfolioSpec::from_toml_str(FILE).unwrap();
        assert_eq!(p.positions.len(), 3);
        assert_eq!(p.bucket("ABC"), Some(5));
        let asian = &p.positions[1].spec;
        assert!((asian.fixings[0].1 - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(p.positions[2].spec.check_dates.len(), 3);
    }

    #[test]
    fn unknown_underlying_is_rejected() {
        let bad = FILE.replacen("underlying = \"ABC\"\nmaturity_days = 455", "underlying = \"XYZ\"\nmaturity_days = 455", 1);
        assert!(PortfolioSpec::from_toml_str(&bad).is_err());
    }
}
