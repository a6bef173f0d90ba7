//! Economic environment, demand laws and the costs shared by every solver.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};

use crate::demand::CountLaw;
use crate::error::{check_dim, Error, Result};

/// Review periods (weeks) per year.
pub const PERIODS_PER_YEAR: u32 = 52;

/// Fixed joint order cost plus per-item variable, holding and backlog costs.
///
/// Holding and backlog costs are annual rates per unit, so a review period
/// of length `1/n` years charges `f(x)/n`; `r` is the annual interest rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostParams {
    pub c0: f64,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
    pub p: Vec<f64>,
    pub r: f64,
}

impl CostParams {
    pub fn new(c0: f64, c: Vec<f64>, h: Vec<f64>, p: Vec<f64>, r: f64) -> Result<Self> {
        let params = Self { c0, c, h, p, r };
        params.validate()?;
        Ok(params)
    }

    /// Same costs for every item.
    pub fn uniform(d: usize, c0: f64, c: f64, h: f64, p: f64, r: f64) -> Result<Self> {
        Self::new(c0, vec![c; d], vec![h; d], vec![p; d], r)
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.c.len();
        if d == 0 {
            return Err(Error::Config("cost vectors must have at least one item".into()));
        }
        check_dim(d, self.h.len())?;
        check_dim(d, self.p.len())?;
        let nonneg = |v: &[f64]| v.iter().all(|x| x.is_finite() && *x >= 0.0);
        if !(self.c0.is_finite() && self.c0 >= 0.0) {
            return Err(Error::Config(format!("c0 must be >= 0, got {}", self.c0)));
        }
        if !nonneg(&self.c) || !nonneg(&self.h) || !nonneg(&self.p) {
            return Err(Error::Config("per-item costs must be finite and >= 0".into()));
        }
        if !(self.r.is_finite() && self.r > 0.0) {
            return Err(Error::Config(format!("interest rate must be > 0, got {}", self.r)));
        }
        Ok(())
    }

    /// All money-valued parameters multiplied by `kappa`; the rate is untouched.
    pub fn scaled(&self, kappa: f64) -> Self {
        let s = |v: &[f64]| v.iter().map(|x| x * kappa).collect();
        Self { c0: self.c0 * kappa, c: s(&self.c), h: s(&self.h), p: s(&self.p), r: self.r }
    }

    /// Holding and backlog rates for a review period of `1/periods_per_year` years.
    pub fn per_period(&self, periods_per_year: u32) -> Self {
        let k = f64::from(periods_per_year);
        Self {
            c0: self.c0,
            c: self.c.clone(),
            h: self.h.iter().map(|x| x / k).collect(),
            p: self.p.iter().map(|x| x / k).collect(),
            r: self.r,
        }
    }

    /// Per-item holding/backlog cost `f_i(x_i)`.
    #[inline]
    pub fn item_cost(&self, i: usize, x: f64) -> f64 {
        if x >= 0.0 {
            self.h[i] * x
        } else {
            -self.p[i] * x
        }
    }
}

/// Fixed plus variable ordering cost `c(y)`.
pub fn ordering_cost(y: &[f64], params: &CostParams) -> Result<f64> {
    check_dim(params.dim(), y.len())?;
    if let Some(bad) = y.iter().find(|v| !(**v >= 0.0)) {
        return Err(Error::InvalidArgument(format!("order quantities must be >= 0, got {bad}")));
    }
    Ok(ordering_cost_unchecked(y, params))
}

#[inline]
pub(crate) fn ordering_cost_unchecked(y: &[f64], params: &CostParams) -> f64 {
    let total: f64 = y.iter().sum();
    if total > 0.0 {
        params.c0 + y.iter().zip(&params.c).map(|(a, b)| a * b).sum::<f64>()
    } else {
        0.0
    }
}

/// State cost `f(x) = sum_i f_i(x_i)`.
pub fn holding_backlog_cost(x: &InventoryState, params: &CostParams) -> Result<f64> {
    check_dim(params.dim(), x.dim())?;
    Ok(state_cost(&x.0, params))
}

#[inline]
pub(crate) fn state_cost(x: &[f64], params: &CostParams) -> f64 {
    x.iter().enumerate().map(|(i, &v)| params.item_cost(i, v)).sum()
}

/// Discount factor per review period, `exp(-r / periods_per_year)`.
pub fn period_discount(r: f64, periods_per_year: u32) -> f64 {
    (-r / f64::from(periods_per_year)).exp()
}

/// Weekly discount factor `exp(-r/52)`.
pub fn weekly_discount(params: &CostParams) -> f64 {
    period_discount(params.r, PERIODS_PER_YEAR)
}

/// Inventory levels (negative means backlog).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InventoryState(pub Vec<f64>);

impl InventoryState {
    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DemandKind {
    Poisson,
    NegBinomial,
    /// Constant integer demand every period; used as a test stub.
    Deterministic,
}

/// Independent per-item demand, specified through annual moments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandModel {
    pub kind: DemandKind,
    pub annual_mean: Vec<f64>,
    /// Coefficient of variation of annual demand. Ignored for Poisson
    /// (where it is `1/sqrt(mean)`) and deterministic demand.
    #[serde(default)]
    pub annual_cv: Vec<f64>,
    #[serde(default = "default_periods")]
    pub periods_per_year: u32,
}

fn default_periods() -> u32 {
    PERIODS_PER_YEAR
}

impl DemandModel {
    pub fn poisson(annual_mean: Vec<f64>) -> Result<Self> {
        let cv = annual_mean.iter().map(|m| 1.0 / m.sqrt()).collect();
        let m = Self { kind: DemandKind::Poisson, annual_mean, annual_cv: cv, periods_per_year: PERIODS_PER_YEAR };
        m.validate()?;
        Ok(m)
    }

    pub fn neg_binomial(annual_mean: Vec<f64>, annual_cv: Vec<f64>) -> Result<Self> {
        let m = Self { kind: DemandKind::NegBinomial, annual_mean, annual_cv, periods_per_year: PERIODS_PER_YEAR };
        m.validate()?;
        Ok(m)
    }

    /// `per_period[i]` units of item `i` every period.
    pub fn deterministic(per_period: Vec<u64>) -> Result<Self> {
        let n = PERIODS_PER_YEAR as f64;
        let annual_mean = per_period.iter().map(|&k| k as f64 * n).collect::<Vec<_>>();
        let d = annual_mean.len();
        let m = Self { kind: DemandKind::Deterministic, annual_mean, annual_cv: vec![0.0; d], periods_per_year: PERIODS_PER_YEAR };
        m.validate()?;
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.annual_mean.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.annual_mean.is_empty() {
            return Err(Error::Config("demand model needs at least one item".into()));
        }
        if self.periods_per_year == 0 {
            return Err(Error::Config("periods_per_year must be positive".into()));
        }
        match self.kind {
            DemandKind::Poisson => {
                if self.annual_mean.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
                    return Err(Error::Config("annual demand means must be > 0".into()));
                }
            }
            DemandKind::NegBinomial => {
                check_dim(self.dim(), self.annual_cv.len())?;
                for (m, cv) in self.annual_mean.iter().zip(&self.annual_cv) {
                    if !(m.is_finite() && *m > 0.0) {
                        return Err(Error::Config("annual demand means must be > 0".into()));
                    }
                    if !(cv * cv * m > 1.0) {
                        return Err(Error::Config(format!(
                            "negative binomial needs cv^2 * mean > 1 (mean {m}, cv {cv})"
                        )));
                    }
                }
            }
            DemandKind::Deterministic => {
                let n = f64::from(self.periods_per_year);
                for m in &self.annual_mean {
                    let w = m / n;
                    if !(w >= 0.0 && (w - w.round()).abs() < 1e-9) {
                        return Err(Error::Config(format!(
                            "deterministic demand must be an integer per period, got {w}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Law of item `i`'s demand over `periods` consecutive periods.
    ///
    /// Uses additive closure: Poisson rates scale, negative binomial shapes
    /// scale at fixed success probability.
    pub fn item_law(&self, i: usize, periods: u32) -> CountLaw {
        let n = f64::from(self.periods_per_year);
        let r = f64::from(periods);
        let mean = self.annual_mean[i];
        match self.kind {
            DemandKind::Poisson => CountLaw::Poisson { mean: mean * r / n },
            DemandKind::NegBinomial => {
                let cv = self.annual_cv[i];
                let prob = 1.0 / (cv * cv * mean);
                let annual_shape = mean * prob / (1.0 - prob);
                CountLaw::NegBinomial { shape: annual_shape * r / n, prob }
            }
            DemandKind::Deterministic => CountLaw::Point { value: (mean / n).round() as u64 * u64::from(periods) },
        }
    }

    /// Mean demand per period for item `i`.
    pub fn period_mean(&self, i: usize) -> f64 {
        self.annual_mean[i] / f64::from(self.periods_per_year)
    }

    /// Draws one period's demand vector directly from the parametric laws.
    pub fn sample_period<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dim()).map(|i| sample_law(&self.item_law(i, 1), rng)).collect()
    }
}

fn sample_law<R: Rng + ?Sized>(law: &CountLaw, rng: &mut R) -> f64 {
    match *law {
        CountLaw::Poisson { mean } => Poisson::new(mean).expect("positive rate").sample(rng),
        CountLaw::NegBinomial { shape, prob } => {
            let rate = Gamma::new(shape, (1.0 - prob) / prob).expect("valid gamma").sample(rng);
            // rand_distr's Poisson returns -1 when exp(-rate) rounds to 1
            if rate < 1e-8 {
                if rng.gen::<f64>() < rate {
                    1.0
                } else {
                    0.0
                }
            } else {
                Poisson::new(rate).expect("positive rate").sample(rng)
            }
        }
        CountLaw::Point { value } => value as f64,
    }
}

/// One period's demand vector drawn from `model`.
pub fn weekly_demand_sample<R: Rng + ?Sized>(model: &DemandModel, rng: &mut R) -> Result<Vec<f64>> {
    model.validate()?;
    Ok(model.sample_period(rng))
}

/// Drift and diffusion coefficient of the Brownian demand approximation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionParams {
    /// Annual drift of cumulative demand.
    pub mu: Vec<f64>,
    /// Diffusion coefficient, row-major `d x d`.
    pub sigma: Vec<f64>,
    /// `sigma * sigma^T`, row-major `d x d`.
    pub sigma_sq: Vec<f64>,
}

impl DiffusionParams {
    /// Independent items with the given annual drift and standard deviation.
    pub fn diagonal(mu: Vec<f64>, sd: Vec<f64>) -> Self {
        let d = mu.len();
        let mut sigma = vec![0.0; d * d];
        let mut sigma_sq = vec![0.0; d * d];
        for i in 0..d {
            sigma[i * d + i] = sd[i];
            sigma_sq[i * d + i] = sd[i] * sd[i];
        }
        Self { mu, sigma, sigma_sq }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// `sigma * v`.
    pub fn apply_sigma(&self, v: &[f64], out: &mut [f64]) {
        let d = self.dim();
        for i in 0..d {
            out[i] = (0..d).map(|j| self.sigma[i * d + j] * v[j]).sum();
        }
    }
}

/// Moment-matched diffusion for a discrete demand model.
pub fn diffusion_moments(model: &DemandModel) -> DiffusionParams {
    let sd = model
        .annual_mean
        .iter()
        .enumerate()
        .map(|(i, &m)| match model.kind {
            DemandKind::Poisson => m.sqrt(),
            DemandKind::NegBinomial => model.annual_cv[i] * m,
            DemandKind::Deterministic => 0.0,
        })
        .collect();
    DiffusionParams::diagonal(model.annual_mean.clone(), sd)
}
