//! Discrete-time inventory simulation and discounted-cost estimation.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::demand::{path_rng, DemandSampler};
use crate::error::{check_dim, Error, Result};
use crate::model::{period_discount, CostParams, DemandModel, InventoryState};

/// What a policy sees besides the inventory level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    /// 1-based period index.
    pub period: u64,
    /// Aggregate demand since the last replenishment epoch.
    pub demand_since_order: f64,
}

/// A replenishment rule evaluated at the start of every period.
///
/// `decide` writes the order vector into `order` (pre-zeroed by the caller)
/// and returns whether this period is a replenishment epoch, which resets
/// the demand counter reported in later observations.
pub trait Policy: Sync {
    fn dim(&self) -> usize;

    fn name(&self) -> String;

    fn decide(&self, x: &[f64], obs: &Observation, order: &mut [f64]) -> Result<bool>;
}

impl<P: Policy + Send + ?Sized> Policy for Box<P> {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn name(&self) -> String {
        (**self).name()
    }

    fn decide(&self, x: &[f64], obs: &Observation, order: &mut [f64]) -> Result<bool> {
        (**self).decide(x, obs, order)
    }
}

/// Never orders.
#[derive(Debug, Clone)]
pub struct NeverOrder {
    pub d: usize,
}

impl Policy for NeverOrder {
    fn dim(&self) -> usize {
        self.d
    }

    fn name(&self) -> String {
        "never".into()
    }

    fn decide(&self, _x: &[f64], _obs: &Observation, _order: &mut [f64]) -> Result<bool> {
        Ok(false)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub horizon_periods: u64,
    pub n_paths: u64,
    pub seed: u64,
    #[serde(default)]
    pub initial_state: Option<Vec<f64>>,
}

impl SimConfig {
    pub fn new(horizon_periods: u64, n_paths: u64, seed: u64) -> Self {
        Self { horizon_periods, n_paths, seed, initial_state: None }
    }

    fn initial(&self, d: usize) -> Result<Vec<f64>> {
        match &self.initial_state {
            Some(x) => {
                check_dim(d, x.len())?;
                Ok(x.clone())
            }
            None => Ok(vec![0.0; d]),
        }
    }
}

/// Discounted cost split by source.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostComponents {
    /// Fixed order costs.
    pub ordering: f64,
    pub holding: f64,
    pub backlog: f64,
    pub variable: f64,
    /// Number of orders placed (undiscounted; not part of the total).
    pub orders: f64,
}

impl CostComponents {
    pub fn total(&self) -> f64 {
        self.ordering + self.holding + self.backlog + self.variable
    }

    fn add(&mut self, o: &Self) {
        self.ordering += o.ordering;
        self.holding += o.holding;
        self.backlog += o.backlog;
        self.variable += o.variable;
        self.orders += o.orders;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub n_paths: u64,
    pub components: CostComponents,
    /// Mean number of orders per year of simulated time.
    pub orders_per_year: f64,
}

impl CostEstimate {
    fn from_paths(paths: &[CostComponents], years: f64) -> Self {
        let n = paths.len();
        let mut comp = CostComponents::default();
        let mut sum = 0.0;
        for p in paths {
            comp.add(p);
            sum += p.total();
        }
        if n == 0 {
            return Self { mean: 0.0, std_error: 0.0, n_paths: 0, components: comp, orders_per_year: 0.0 };
        }
        let nf = n as f64;
        let mean = sum / nf;
        let var = if n > 1 {
            paths.iter().map(|p| (p.total() - mean).powi(2)).sum::<f64>() / (nf - 1.0)
        } else {
            0.0
        };
        let components = CostComponents {
            ordering: comp.ordering / nf,
            holding: comp.holding / nf,
            backlog: comp.backlog / nf,
            variable: comp.variable / nf,
            orders: comp.orders / nf,
        };
        let orders_per_year = if years > 0.0 { components.orders / years } else { 0.0 };
        Self { mean: components.total(), std_error: (var / nf).sqrt(), n_paths: n as u64, components, orders_per_year }
    }
}

/// End-of-period state: order received before demand realizes.
pub fn step(x: &InventoryState, order: &[f64], demand: &[f64]) -> Result<InventoryState> {
    check_dim(x.dim(), order.len())?;
    check_dim(x.dim(), demand.len())?;
    if order.iter().any(|o| !(*o >= 0.0)) {
        return Err(Error::InvalidArgument("orders must be >= 0".into()));
    }
    Ok(InventoryState(x.0.iter().zip(order).zip(demand).map(|((a, b), c)| a + b - c).collect()))
}

/// One simulated period, as recorded by [`trace_path`].
#[derive(Debug, Clone, PartialEq)]
pub struct PeriodRecord {
    /// State at the start of the period, before ordering.
    pub start: Vec<f64>,
    pub order: Vec<f64>,
    pub demand: Vec<f64>,
}

struct PathRunner<'a, P: Policy + ?Sized> {
    policy: &'a P,
    sampler: &'a DemandSampler,
    params: &'a CostParams,
    h: Vec<f64>,
    p: Vec<f64>,
    gamma: f64,
    horizon: u64,
    seed: u64,
}

impl<'a, P: Policy + ?Sized> PathRunner<'a, P> {
    fn new(policy: &'a P, sampler: &'a DemandSampler, params: &'a CostParams, cfg: &SimConfig) -> Self {
        let n = sampler.periods_per_year();
        let per = params.per_period(n);
        Self {
            policy,
            sampler,
            params,
            h: per.h,
            p: per.p,
            gamma: period_discount(params.r, n),
            horizon: cfg.horizon_periods,
            seed: cfg.seed,
        }
    }

    fn run(
        &self,
        path: u64,
        x0: &[f64],
        mut record: Option<&mut Vec<PeriodRecord>>,
    ) -> Result<CostComponents> {
        let d = x0.len();
        let mut rng = path_rng(self.seed, path);
        let mut x = x0.to_vec();
        let mut order = vec![0.0; d];
        let mut demand = vec![0.0; d];
        let mut since = 0.0;
        let mut disc = 1.0;
        let mut cost = CostComponents::default();
        for n in 1..=self.horizon {
            order.iter_mut().for_each(|o| *o = 0.0);
            let obs = Observation { period: n, demand_since_order: since };
            let epoch = self.policy.decide(&x, &obs, &mut order)?;
            if let Some(bad) = order.iter().find(|o| !(**o >= 0.0 && o.is_finite())) {
                return Err(Error::PolicyContract(format!(
                    "{} returned order component {bad} at period {n}",
                    self.policy.name()
                )));
            }
            let total: f64 = order.iter().sum();
            if epoch || total > 0.0 {
                since = 0.0;
            }
            if total > 0.0 {
                cost.orders += 1.0;
                cost.ordering += disc * self.params.c0;
                cost.variable += disc * order.iter().zip(&self.params.c).map(|(a, b)| a * b).sum::<f64>();
            }
            self.sampler.sample_into(&mut rng, &mut demand);
            if let Some(rec) = record.as_deref_mut() {
                rec.push(PeriodRecord { start: x.clone(), order: order.clone(), demand: demand.clone() });
            }
            for i in 0..d {
                x[i] += order[i] - demand[i];
                since += demand[i];
                if x[i] >= 0.0 {
                    cost.holding += disc * self.h[i] * x[i];
                } else {
                    cost.backlog -= disc * self.p[i] * x[i];
                }
            }
            disc *= self.gamma;
        }
        Ok(cost)
    }
}

fn check_inputs<P: Policy + ?Sized>(policy: &P, model: &DemandModel, params: &CostParams) -> Result<()> {
    params.validate()?;
    model.validate()?;
    check_dim(model.dim(), params.dim())?;
    check_dim(model.dim(), policy.dim())
}

/// Mean discounted cost of `policy` over independent demand paths.
///
/// Path `k` draws its demand from the stream `(seed, k)`, so two policies
/// simulated with the same config face identical demand, and the result
/// does not depend on the number of worker threads.
pub fn simulate_policy<P: Policy + ?Sized>(
    policy: &P,
    model: &DemandModel,
    params: &CostParams,
    cfg: &SimConfig,
) -> Result<CostEstimate> {
    check_inputs(policy, model, params)?;
    let sampler = DemandSampler::new(model)?;
    simulate_with_sampler(policy, &sampler, params, cfg)
}

/// As [`simulate_policy`] with a prebuilt sampler, for repeated evaluations.
pub fn simulate_with_sampler<P: Policy + ?Sized>(
    policy: &P,
    sampler: &DemandSampler,
    params: &CostParams,
    cfg: &SimConfig,
) -> Result<CostEstimate> {
    check_dim(sampler.dim(), policy.dim())?;
    check_dim(sampler.dim(), params.dim())?;
    let x0 = cfg.initial(policy.dim())?;
    let runner = PathRunner::new(policy, sampler, params, cfg);
    let paths = (0..cfg.n_paths)
        .into_par_iter()
        .map(|k| runner.run(k, &x0, None))
        .collect::<Result<Vec<_>>>()?;
    let years = cfg.horizon_periods as f64 / f64::from(sampler.periods_per_year());
    Ok(CostEstimate::from_paths(&paths, years))
}

/// Per-path discounted costs, in path order.
pub fn simulate_paths<P: Policy + ?Sized>(
    policy: &P,
    model: &DemandModel,
    params: &CostParams,
    cfg: &SimConfig,
) -> Result<Vec<CostComponents>> {
    check_inputs(policy, model, params)?;
    let sampler = DemandSampler::new(model)?;
    let x0 = cfg.initial(policy.dim())?;
    let runner = PathRunner::new(policy, &sampler, params, cfg);
    (0..cfg.n_paths).into_par_iter().map(|k| runner.run(k, &x0, None)).collect()
}

/// Full period-by-period record of path `path`.
pub fn trace_path<P: Policy + ?Sized>(
    policy: &P,
    model: &DemandModel,
    params: &CostParams,
    cfg: &SimConfig,
    path: u64,
) -> Result<(Vec<PeriodRecord>, CostComponents)> {
    check_inputs(policy, model, params)?;
    let sampler = DemandSampler::new(model)?;
    let x0 = cfg.initial(policy.dim())?;
    let runner = PathRunner::new(policy, &sampler, params, cfg);
    let mut rec = Vec::with_capacity(cfg.horizon_periods as usize);
    let cost = runner.run(path, &x0, Some(&mut rec))?;
    Ok((rec, cost))
}
