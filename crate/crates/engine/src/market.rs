//! Market file: equities, their correlation, and the Hull–White rates model.

use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use lsmc_core::scenario::{years, GbmParams, HullWhite, Hw1fParams};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquityMarket {
    pub id: String,
    pub spot: f64,
    pub vol: f64,
    pub drift_outer: f64,
    #[serde(default)]
    pub drift_inner: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesMarket {
    pub mean_reversion: f64,
    pub vol: f64,
    pub curve_days: Vec<f64>,
    pub zero_rates: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Market {
    /// Pairwise correlation between every two equities.
    #[serde(default)]
    pub equity_correlation: f64,
    #[serde(default)]
    pub equity_rate_correlation: f64,
    pub rates: RatesMarket,
    pub equity: Vec<EquityMarket>,
}

impl Market {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let market: Self = toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        market.validate()?;
        Ok(market)
    }

    pub fn validate(&self) -> Result<()> {
        let r = &self.rates;
        if r.curve_days.len() != r.zero_rates.len() || r.curve_days.is_empty() {
            bail!("rates.curve_days and rates.zero_rates must be non-empty and of equal length");
        }
        for (i, e) in self.equity.iter().enumerate() {
            if self.equity[..i].iter().any(|o| o.id == e.id) {
                bail!("equity {} is listed twice", e.id);
            }
            self.gbm(&e.id)?
                .validate()
                .with_context(|| format!("equity {}", e.id))?;
        }
        self.hw_params().validate()?;
        Ok(())
    }

    pub fn equity(&self, id: &str) -> Result<&EquityMarket> {
        self.equity
            .iter()
            .find(|e| e.id == id)
            .ok_or_else(|| anyhow!("market has no equity {id}"))
    }

    pub fn gbm(&self, id: &str) -> Result<GbmParams> {
        let e = self.equity(id)?;
        Ok(GbmParams {
            spot: e.spot,
            drift_outer: e.drift_outer,
            drift_inner: e.drift_inner,
            vol: e.vol,
        })
    }

    pub fn hw_params(&self) -> Hw1fParams {
        Hw1fParams {
            mean_reversion: self.rates.mean_reversion,
            vol: self.rates.vol,
            initial_curve: self
                .rates
                .curve_days
                .iter()
                .zip(&self.rates.zero_rates)
                .map(|(&d, &z)| (years(d), z))
                .collect(),
        }
    }

    pub fn hull_white(&self) -> Result<HullWhite> {
        Ok(HullWhite::new(&self.hw_params())?)
    }

    /// Curve node tenors in years.
    pub fn curve_tenors(&self) -> Vec<f64> {
        self.rates.curve_days.iter().map(|&d| years(d)).collect()
    }
}
