//! The standard 2-, 12- and 50-item test instances.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{CostParams, DemandModel};

pub const INTEREST_RATE: f64 = 0.05;

/// Annual demand rates of the 12-item problem.
pub const TWELVE_RATES: [f64; 12] = [40.0, 35.0, 40.0, 40.0, 40.0, 20.0, 20.0, 20.0, 28.0, 20.0, 20.0, 20.0];
/// Variable ordering costs of the 12-item problem.
pub const TWELVE_VARIABLE: [f64; 12] = [0.1, 0.1, 0.2, 0.2, 0.4, 0.2, 0.4, 0.4, 0.6, 0.6, 0.8, 0.8];
pub const TWELVE_HOLDING: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variability {
    /// Poisson demand.
    Low,
    /// Negative binomial with annual CV 0.5.
    Medium,
    /// Negative binomial with annual CV 1.
    High,
}

impl Variability {
    pub fn demand(self, annual_mean: Vec<f64>) -> Result<DemandModel> {
        let d = annual_mean.len();
        match self {
            Variability::Low => DemandModel::poisson(annual_mean),
            Variability::Medium => DemandModel::neg_binomial(annual_mean, vec![0.5; d]),
            Variability::High => DemandModel::neg_binomial(annual_mean, vec![1.0; d]),
        }
    }
}

/// Subset of the 12-item problem (0-based item indices).
pub fn twelve_item_subset(items: &[usize], variability: Variability, c0: f64, p: f64) -> Result<(DemandModel, CostParams)> {
    let means = items.iter().map(|&i| TWELVE_RATES[i]).collect();
    let c = items.iter().map(|&i| TWELVE_VARIABLE[i]).collect();
    let d = items.len();
    let params = CostParams::new(c0, c, vec![TWELVE_HOLDING; d], vec![p; d], INTEREST_RATE)?;
    Ok((variability.demand(means)?, params))
}

pub fn twelve_item(variability: Variability, c0: f64, p: f64) -> Result<(DemandModel, CostParams)> {
    twelve_item_subset(&(0..12).collect::<Vec<_>>(), variability, c0, p)
}

/// Items 1 and 7 of the 12-item problem.
pub fn two_item(variability: Variability, c0: f64, p: f64) -> Result<(DemandModel, CostParams)> {
    twelve_item_subset(&[0, 6], variability, c0, p)
}

/// Medium variability, `c0 = 50`, `p = 50`.
pub fn two_item_base_case() -> Result<(DemandModel, CostParams)> {
    two_item(Variability::Medium, 50.0, 50.0)
}

/// Three groups of 15, 15 and 20 identical items.
pub fn fifty_item(variability: Variability, c0: f64) -> Result<(DemandModel, CostParams)> {
    let groups = [(15, 50.0, 1.0, 25.0, 0.1), (15, 25.0, 2.0, 50.0, 0.2), (20, 12.5, 4.0, 100.0, 0.4)];
    let (mut mean, mut h, mut p, mut c) = (vec![], vec![], vec![], vec![]);
    for (n, m, hh, pp, cc) in groups {
        mean.extend(std::iter::repeat(m).take(n));
        h.extend(std::iter::repeat(hh).take(n));
        p.extend(std::iter::repeat(pp).take(n));
        c.extend(std::iter::repeat(cc).take(n));
    }
    let params = CostParams::new(c0, c, h, p, INTEREST_RATE)?;
    Ok((variability.demand(mean)?, params))
}
