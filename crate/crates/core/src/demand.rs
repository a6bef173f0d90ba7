//! Probability mass functions of count demand and a fast table sampler.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::DemandModel;

/// Mass left out when a pmf with unbounded support is tabulated.
pub const PMF_TAIL: f64 = 1e-12;

const MAX_SUPPORT: usize = 50_000_000;

/// A distribution on the non-negative integers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CountLaw {
    Poisson { mean: f64 },
    /// Failures before `shape` successes with success probability `prob`.
    NegBinomial { shape: f64, prob: f64 },
    Point { value: u64 },
}

impl CountLaw {
    pub fn mean(&self) -> f64 {
        match *self {
            CountLaw::Poisson { mean } => mean,
            CountLaw::NegBinomial { shape, prob } => shape * (1.0 - prob) / prob,
            CountLaw::Point { value } => value as f64,
        }
    }

    pub fn variance(&self) -> f64 {
        match *self {
            CountLaw::Poisson { mean } => mean,
            CountLaw::NegBinomial { shape, prob } => shape * (1.0 - prob) / (prob * prob),
            CountLaw::Point { .. } => 0.0,
        }
    }

    /// Tabulated pmf covering at least `1 - PMF_TAIL` of the mass, renormalized.
    pub fn pmf(&self) -> Result<Pmf> {
        self.pmf_with_tail(PMF_TAIL)
    }

    pub fn pmf_with_tail(&self, tail: f64) -> Result<Pmf> {
        let (log_p0, ratio): (f64, Box<dyn Fn(f64) -> f64>) = match *self {
            CountLaw::Point { value } => {
                let mut probs = vec![0.0; value as usize + 1];
                probs[value as usize] = 1.0;
                return Ok(Pmf { probs });
            }
            CountLaw::Poisson { mean } => {
                if !(mean > 0.0 && mean.is_finite()) {
                    return Err(Error::InvalidArgument(format!("poisson mean must be > 0, got {mean}")));
                }
                (-mean, Box::new(move |k| (mean / (k + 1.0)).ln()))
            }
            CountLaw::NegBinomial { shape, prob } => {
                if !(shape > 0.0 && prob > 0.0 && prob < 1.0) {
                    return Err(Error::InvalidArgument(format!(
                        "negative binomial needs shape > 0 and 0 < prob < 1, got ({shape}, {prob})"
                    )));
                }
                let lq = (1.0 - prob).ln();
                (shape * prob.ln(), Box::new(move |k| ((k + shape) / (k + 1.0)).ln() + lq))
            }
        };
        let mean = self.mean();
        let mut probs = Vec::new();
        let mut log_p = log_p0;
        let mut total = 0.0;
        let mut k = 0usize;
        loop {
            let p = log_p.exp();
            probs.push(p);
            total += p;
            if total >= 1.0 - tail && k as f64 >= mean {
                break;
            }
            if k >= MAX_SUPPORT {
                return Err(Error::Numeric(format!(
                    "pmf mass {total} did not reach 1 - {tail} within {MAX_SUPPORT} points"
                )));
            }
            log_p += ratio(k as f64);
            k += 1;
        }
        for p in &mut probs {
            *p /= total;
        }
        Ok(Pmf { probs })
    }
}

/// Probabilities of `0, 1, ..., len-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    pub probs: Vec<f64>,
}

impl Pmf {
    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }

    pub fn expect(&self, mut g: impl FnMut(usize) -> f64) -> f64 {
        self.probs.iter().enumerate().map(|(k, p)| p * g(k)).sum()
    }

    pub fn cdf(&self) -> Vec<f64> {
        let mut acc = 0.0;
        let mut out: Vec<f64> = self
            .probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        if let Some(last) = out.last_mut() {
            *last = 1.0;
        }
        out
    }

    /// Pmf of the sum of two independent variables.
    pub fn convolve(&self, other: &Pmf) -> Pmf {
        let mut probs = vec![0.0; self.len() + other.len() - 1];
        for (i, a) in self.probs.iter().enumerate() {
            for (j, b) in other.probs.iter().enumerate() {
                probs[i + j] += a * b;
            }
        }
        Pmf { probs }
    }
}

/// Per-item weekly pmfs of a demand model.
pub fn period_pmfs(model: &DemandModel) -> Result<Vec<Pmf>> {
    multi_period_pmfs(model, 1)
}

/// Per-item pmfs of demand aggregated over `periods` periods.
pub fn multi_period_pmfs(model: &DemandModel, periods: u32) -> Result<Vec<Pmf>> {
    model.validate()?;
    if periods == 0 {
        return Err(Error::InvalidArgument("need at least one period".into()));
    }
    (0..model.dim()).map(|i| model.item_law(i, periods).pmf()).collect()
}

/// Random stream for simulation path `path` under master seed `seed`.
///
/// Each path owns an independent ChaCha stream, so results do not depend on
/// how paths are scheduled across threads.
pub fn path_rng(seed: u64, path: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

/// Inverse-cdf sampler drawing one uniform per item and period.
#[derive(Debug, Clone)]
pub struct DemandSampler {
    cdfs: Vec<Vec<f64>>,
    periods_per_year: u32,
}

impl DemandSampler {
    pub fn new(model: &DemandModel) -> Result<Self> {
        let cdfs = period_pmfs(model)?.iter().map(Pmf::cdf).collect();
        Ok(Self { cdfs, periods_per_year: model.periods_per_year })
    }

    pub fn periods_per_year(&self) -> u32 {
        self.periods_per_year
    }

    pub fn dim(&self) -> usize {
        self.cdfs.len()
    }

    #[inline]
    pub fn quantile(&self, item: usize, u: f64) -> f64 {
        let cdf = &self.cdfs[item];
        let mut k = 0;
        while k + 1 < cdf.len() && cdf[k] < u {
            k += 1;
        }
        k as f64
    }

    #[inline]
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let u: f64 = rng.gen();
            *o = self.quantile(i, u);
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.sample_into(rng, &mut out);
        out
    }
}
