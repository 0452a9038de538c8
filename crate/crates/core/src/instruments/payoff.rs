use serde::{Deserialize, Serialize};

use super::{InstrumentKind, InstrumentSpec};
use crate::error::{invalid, Error, Result};
use crate::scenario::{ForwardCurve, MarketState};

const DATE_TOL: f64 = 1e-12;

/// `1 / (1 + e^{−x})`, evaluated without overflow.
pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Logistic of `sharpness·gap`, degenerating to the indicator `gap > 0` for
/// infinite sharpness.
fn soft_indicator(sharpness: f64, gap: f64) -> f64 {
    if sharpness.is_infinite() {
        if gap > 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        logistic(sharpness * gap)
    }
}

/// Fuzzy truth value of "finishes above the strike and never reaches the
/// barrier": `logistic(ε_K(S_L − K))·Π logistic(ε_l(B − S_l))` over the
/// `(S_l, ε_l)` check pairs.
pub fn degree_of_truth(
    final_stock: f64,
    strike: f64,
    strike_sharpness: f64,
    barrier: f64,
    checks: &[(f64, f64)],
) -> f64 {
    checks
        .iter()
        .fold(soft_indicator(strike_sharpness, final_stock - strike), |acc, &(s, eps)| {
            acc * soft_indicator(eps, barrier - s)
        })
}

/// Sharpness of the barrier and strike logistics: `ε_l = ε₁/σ(l)` and
/// `ε_K = ε₂/σ(L)` with `σ(l)` a price-scale standard deviation, so every
/// logistic argument is dimensionless.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingParams {
    pub eps1: f64,
    pub eps2: f64,
    /// `σ(l)` per barrier check date of the instrument, last entry at maturity.
    pub scales: Vec<f64>,
}

impl SmoothingParams {
    pub fn new(eps1: f64, eps2: f64, scales: Vec<f64>) -> Result<Self> {
        if !(eps1 > 0.0) || !(eps2 > 0.0) {
            return invalid("smoothing constants must be positive");
        }
        if scales.is_empty() || scales.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return invalid("smoothing scales must be positive");
        }
        Ok(Self { eps1, eps2, scales })
    }

    /// `σ(l)`: standard deviation of the risk-neutral stock price at each check
    /// date seen from today, `S_0/P(0,l)·√(e^{σ²l} − 1)`.
    pub fn model_implied(
        eps1: f64,
        eps2: f64,
        check_dates: &[f64],
        spot: f64,
        vol: f64,
        curve: &ForwardCurve,
    ) -> Result<Self> {
        let scales = check_dates
            .iter()
            .map(|&l| spot / curve.discount(l) * (vol * vol * l).exp_m1().sqrt())
            .collect();
        Self::new(eps1, eps2, scales)
    }

    /// Infinite sharpness everywhere: the hard knock-out payoff.
    pub fn hard(checks: usize) -> Self {
        Self {
            eps1: f64::INFINITY,
            eps2: f64::INFINITY,
            scales: vec![1.0; checks.max(1)],
        }
    }

    pub fn barrier_sharpness(&self, l: usize) -> f64 {
        self.eps1 / self.scales[l]
    }

    pub fn strike_sharpness(&self) -> f64 {
        self.eps2 / self.scales[self.scales.len() - 1]
    }

    pub fn is_hard(&self) -> bool {
        self.eps1.is_infinite() && self.eps2.is_infinite()
    }
}

/// `(K − Σ w_i S_{t_i})⁺·discount`, where fixings up to the origin are already
/// folded into `origin_running_average` and `fixings` holds the remaining ones.
pub fn payoff_asian(
    fixings: &[f64],
    spec: &InstrumentSpec,
    origin_time: f64,
    origin_running_average: f64,
    discount: f64,
) -> Result<f64> {
    if spec.kind != InstrumentKind::AsianArith {
        return invalid("not an Asian option");
    }
    let remaining: Vec<f64> = spec
        .fixings
        .iter()
        .filter(|f| f.0 > origin_time + DATE_TOL)
        .map(|f| f.1)
        .collect();
    if remaining.len() != fixings.len() {
        return invalid(format!(
            "{} remaining fixings expected, {} supplied",
            remaining.len(),
            fixings.len()
        ));
    }
    let avg = origin_running_average + remaining.iter().zip(fixings).map(|(w, s)| w * s).sum::<f64>();
    Ok((spec.strike - avg).max(0.0) * discount)
}

/// Smoothed knock-out call: `alive·(S_L − K)·DoT·discount` over the remaining
/// check dates, with `alive = 1 − barrier_breached` carried from the origin.
pub fn payoff_barrier_smoothed(
    checks: &[f64],
    spec: &InstrumentSpec,
    smoothing: &SmoothingParams,
    alive: f64,
    discount: f64,
) -> Result<f64> {
    let payoff = barrier_payoff(spec, smoothing, checks.len(), alive)?;
    Ok(payoff.evaluate(checks) * discount)
}

/// Indicator version: zero if any remaining check reaches the barrier.
pub fn payoff_barrier_hard(
    checks: &[f64],
    spec: &InstrumentSpec,
    alive: f64,
    discount: f64,
) -> Result<f64> {
    let payoff = barrier_payoff(spec, &SmoothingParams::hard(spec.check_dates.len()), checks.len(), alive)?;
    Ok(payoff.evaluate(checks) * discount)
}

fn barrier_payoff(
    spec: &InstrumentSpec,
    smoothing: &SmoothingParams,
    remaining: usize,
    alive: f64,
) -> Result<PathPayoff> {
    if spec.kind != InstrumentKind::BarrierUpOut {
        return invalid("not a barrier option");
    }
    let n = spec.check_dates.len();
    if remaining == 0 || remaining > n {
        return invalid(format!("{remaining} check fixings supplied for {n} check dates"));
    }
    let first = n - remaining;
    let sharpness = (first..n).map(|l| Some(sharpness_at(smoothing, l))).collect();
    Ok(PathPayoff::Barrier {
        strike: spec.strike,
        barrier: spec.barrier.unwrap_or(f64::INFINITY),
        checks: sharpness,
        strike_sharpness: smoothing.strike_sharpness(),
        alive,
    })
}

fn sharpness_at(smoothing: &SmoothingParams, l: usize) -> f64 {
    if smoothing.is_hard() {
        f64::INFINITY
    } else {
        smoothing.barrier_sharpness(l.min(smoothing.scales.len() - 1))
    }
}

/// Undiscounted payoff as a function of the stock on the simulation dates,
/// paid at the last date.
#[derive(Debug, Clone, PartialEq)]
pub enum PathPayoff {
    /// `(K − accrued − Σ w_j S_j)⁺`.
    Asian { strike: f64, weights: Vec<f64>, accrued: f64 },
    /// `alive·(S_L − K)·logistic(ε_K(S_L − K))·Π logistic(ε_j(B − S_j))` over
    /// dates with `Some(ε_j)`; infinite sharpness gives indicators.
    Barrier {
        strike: f64,
        barrier: f64,
        checks: Vec<Option<f64>>,
        strike_sharpness: f64,
        alive: f64,
    },
    /// `φ·logistic(εφ)` with `φ = ±(S_L − K)`.
    SmoothedEuropean { strike: f64, sharpness: f64, call: bool },
    /// `slope·S_L + intercept`.
    Linear { slope: f64, intercept: f64 },
}

impl PathPayoff {
    pub fn is_lipschitz(&self) -> bool {
        match self {
            Self::Barrier {
                checks,
                strike_sharpness,
                ..
            } => strike_sharpness.is_finite() && checks.iter().flatten().all(|e| e.is_finite()),
            Self::SmoothedEuropean { sharpness, .. } => sharpness.is_finite(),
            _ => true,
        }
    }

    pub fn evaluate(&self, s: &[f64]) -> f64 {
        let last = s[s.len() - 1];
        match self {
            Self::Asian {
                strike,
                weights,
                accrued,
            } => {
                let avg = accrued + weights.iter().zip(s).map(|(w, x)| w * x).sum::<f64>();
                (strike - avg).max(0.0)
            }
            Self::Barrier {
                strike,
                barrier,
                checks,
                strike_sharpness,
                alive,
            } => {
                if *alive == 0.0 {
                    return 0.0;
                }
                let phi = last - strike;
                let mut v = alive * phi * soft_indicator(*strike_sharpness, phi);
                for (x, eps) in s.iter().zip(checks) {
                    if let Some(eps) = eps {
                        v *= soft_indicator(*eps, barrier - x);
                    }
                }
                v
            }
            Self::SmoothedEuropean {
                strike,
                sharpness,
                call,
            } => {
                let phi = if *call { last - strike } else { strike - last };
                phi * soft_indicator(*sharpness, phi)
            }
            Self::Linear { slope, intercept } => slope * last + intercept,
        }
    }

    /// Payoff and `∂payoff/∂S_j` written into `grad`.
    pub fn evaluate_with_gradient(&self, s: &[f64], grad: &mut [f64]) -> f64 {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let n = s.len();
        let last = s[n - 1];
        match self {
            Self::Asian {
                strike,
                weights,
                accrued,
            } => {
                let avg = accrued + weights.iter().zip(s).map(|(w, x)| w * x).sum::<f64>();
                if strike - avg > 0.0 {
                    for (g, w) in grad.iter_mut().zip(weights) {
                        *g = -w;
                    }
                    strike - avg
                } else {
                    0.0
                }
            }
            Self::Barrier {
                strike,
                barrier,
                checks,
                strike_sharpness,
                alive,
            } => {
                if *alive == 0.0 {
                    return 0.0;
                }
                let phi = last - strike;
                let lk = soft_indicator(*strike_sharpness, phi);
                let mut survival = 1.0;
                for (x, eps) in s.iter().zip(checks) {
                    if let Some(eps) = eps {
                        survival *= soft_indicator(*eps, barrier - x);
                    }
                }
                let v = alive * phi * lk * survival;
                let dlk = if strike_sharpness.is_finite() {
                    strike_sharpness * lk * (1.0 - lk)
                } else {
                    0.0
                };
                grad[n - 1] = alive * survival * (lk + phi * dlk);
                for (j, (x, eps)) in s.iter().zip(checks).enumerate() {
                    if let Some(eps) = eps.filter(|e| e.is_finite()) {
                        let lj = logistic(eps * (barrier - x));
                        grad[j] -= eps * (1.0 - lj) * v;
                    }
                }
                v
            }
            Self::SmoothedEuropean {
                strike,
                sharpness,
                call,
            } => {
                let (phi, dphi) = if *call { (last - strike, 1.0) } else { (strike - last, -1.0) };
                let l = soft_indicator(*sharpness, phi);
                let dl = if sharpness.is_finite() {
                    sharpness * l * (1.0 - l)
                } else {
                    0.0
                };
                grad[n - 1] = dphi * (l + phi * dl);
                phi * l
            }
            Self::Linear { slope, intercept } => {
                grad[n - 1] = *slope;
                slope * last + intercept
            }
        }
    }
}

/// A payoff bound to an origin state: the absolute simulation dates after the
/// origin (ending at maturity) and the payoff over the stock on those dates.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundPayoff {
    pub dates: Vec<f64>,
    pub payoff: PathPayoff,
}

impl BoundPayoff {
    /// Binds an exotic to `origin`. Barriers use `smoothing`; `None` selects the
    /// hard knock-out.
    pub fn new(
        spec: &InstrumentSpec,
        origin: &MarketState,
        smoothing: Option<&SmoothingParams>,
    ) -> Result<Self> {
        spec.validate()?;
        let t0 = origin.time;
        if spec.maturity <= t0 + DATE_TOL {
            return invalid(format!("instrument matured at {} before origin {t0}", spec.maturity));
        }
        match spec.kind {
            InstrumentKind::AsianArith => {
                let remaining: Vec<&(f64, f64)> =
                    spec.fixings.iter().filter(|f| f.0 > t0 + DATE_TOL).collect();
                Ok(Self {
                    dates: remaining.iter().map(|f| f.0).collect(),
                    payoff: PathPayoff::Asian {
                        strike: spec.strike,
                        weights: remaining.iter().map(|f| f.1).collect(),
                        accrued: origin.running_average,
                    },
                })
            }
            InstrumentKind::BarrierUpOut => {
                let hard = SmoothingParams::hard(spec.check_dates.len());
                let smoothing = smoothing.unwrap_or(&hard);
                if !smoothing.is_hard() && smoothing.scales.len() != spec.check_dates.len() {
                    return invalid("one smoothing scale per barrier check date is required");
                }
                let first = spec.check_dates.iter().position(|&d| d > t0 + DATE_TOL).unwrap();
                let dates = spec.check_dates[first..].to_vec();
                let payoff = barrier_payoff(
                    spec,
                    smoothing,
                    dates.len(),
                    1.0 - origin.barrier_breached,
                )?;
                Ok(Self { dates, payoff })
            }
            _ => invalid(format!("{:?} has no path payoff; use the closed form", spec.kind)),
        }
    }

    pub fn ensure_lipschitz(&self) -> Result<()> {
        if self.payoff.is_lipschitz() {
            Ok(())
        } else {
            Err(Error::NonLipschitzPayoff(
                "hard barrier or strike indicator cannot be differentiated pathwise".into(),
            ))
        }
    }
}
