//! Benchmark policy families, their closed-form and renewal-reward costs,
//! and the parameter searches used to tune them.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::demand::{path_rng, CountLaw, DemandSampler, Pmf};
use crate::error::{check_dim, Error, Result};
use crate::mdp::{policy_iteration, single_item_spec};
use crate::model::{period_discount, CostParams, DemandModel};
use crate::sim::{simulate_with_sampler, CostEstimate, Observation, Policy, SimConfig};

/// Review every `r` periods and raise each item to `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RsPolicy {
    pub r: u32,
    pub s: Vec<f64>,
}

impl Policy for RsPolicy {
    fn dim(&self) -> usize {
        self.s.len()
    }

    fn name(&self) -> String {
        format!("(R,S) R={}", self.r)
    }

    fn decide(&self, x: &[f64], obs: &Observation, order: &mut [f64]) -> Result<bool> {
        if (obs.period - 1) % u64::from(self.r) != 0 {
            return Ok(false);
        }
        for i in 0..x.len() {
            order[i] = (self.s[i] - x[i]).max(0.0);
        }
        Ok(true)
    }
}

/// Raise every item to `s` once aggregate demand since the last order
/// reaches `q`; the first period is always a replenishment epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QsPolicy {
    pub q: f64,
    pub s: Vec<f64>,
}

impl Policy for QsPolicy {
    fn dim(&self) -> usize {
        self.s.len()
    }

    fn name(&self) -> String {
        format!("(Q,S) Q={}", self.q)
    }

    fn decide(&self, x: &[f64], obs: &Observation, order: &mut [f64]) -> Result<bool> {
        if obs.period != 1 && obs.demand_since_order < self.q {
            return Ok(false);
        }
        for i in 0..x.len() {
            order[i] = (self.s[i] - x[i]).max(0.0);
        }
        Ok(true)
    }
}

/// Reorder points `s`, can-order levels `o` and order-up-to levels `big_s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CanOrderPolicy {
    pub s: Vec<f64>,
    pub o: Vec<f64>,
    #[serde(rename = "S")]
    pub big_s: Vec<f64>,
}

impl CanOrderPolicy {
    pub fn new(s: Vec<f64>, o: Vec<f64>, big_s: Vec<f64>) -> Result<Self> {
        check_dim(s.len(), o.len())?;
        check_dim(s.len(), big_s.len())?;
        for i in 0..s.len() {
            if !(s[i] <= o[i] && o[i] <= big_s[i]) {
                return Err(Error::InvalidArgument(format!(
                    "item {i}: need s <= o <= S, got ({}, {}, {})",
                    s[i], o[i], big_s[i]
                )));
            }
        }
        Ok(Self { s, o, big_s })
    }
}

impl Policy for CanOrderPolicy {
    fn dim(&self) -> usize {
        self.s.len()
    }

    fn name(&self) -> String {
        "can-order".into()
    }

    fn decide(&self, x: &[f64], _obs: &Observation, order: &mut [f64]) -> Result<bool> {
        if !x.iter().zip(&self.s).any(|(a, b)| a <= b) {
            return Ok(false);
        }
        for i in 0..x.len() {
            if x[i] <= self.o[i] {
                order[i] = self.big_s[i] - x[i];
            }
        }
        Ok(true)
    }
}

/// Each item reorders up to `big_s` on its own when it falls to `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndependentSsPolicy {
    pub s: Vec<f64>,
    #[serde(rename = "S")]
    pub big_s: Vec<f64>,
    pub alpha: f64,
}

impl Policy for IndependentSsPolicy {
    fn dim(&self) -> usize {
        self.s.len()
    }

    fn name(&self) -> String {
        format!("independent (s,S) alpha={}", self.alpha)
    }

    fn decide(&self, x: &[f64], _obs: &Observation, order: &mut [f64]) -> Result<bool> {
        let mut any = false;
        for i in 0..x.len() {
            if x[i] <= self.s[i] {
                order[i] = self.big_s[i] - x[i];
                any = true;
            }
        }
        Ok(any)
    }
}

/// One evaluated candidate of a search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub label: String,
    pub estimate: CostEstimate,
}

#[derive(Debug, Clone)]
pub struct SearchResult<P> {
    pub best: P,
    pub estimate: CostEstimate,
    pub candidates: Vec<Candidate>,
}

/// `E f_i(y - D)` for a fixed demand law, in O(1) per integer-floor lookup.
#[derive(Debug, Clone)]
pub struct LossTable {
    cdf: Vec<f64>,
    partial_mean: Vec<f64>,
    mean: f64,
    p_zero: f64,
}

impl LossTable {
    pub fn new(pmf: &Pmf) -> Self {
        let mut cdf = Vec::with_capacity(pmf.len());
        let mut partial_mean = Vec::with_capacity(pmf.len());
        let (mut a, mut b) = (0.0, 0.0);
        for (k, p) in pmf.probs.iter().enumerate() {
            a += p;
            b += k as f64 * p;
            cdf.push(a);
            partial_mean.push(b);
        }
        Self { cdf, partial_mean, mean: b, p_zero: pmf.probs[0] }
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn p_zero(&self) -> f64 {
        self.p_zero
    }

    /// `h E(y - D)^+ + p E(D - y)^+`.
    pub fn expected_cost(&self, y: f64, h: f64, p: f64) -> f64 {
        if y < 0.0 {
            return p * (self.mean - y);
        }
        let m = (y.floor() as usize).min(self.cdf.len() - 1);
        let (f, pm) = (self.cdf[m], self.partial_mean[m]);
        let over = y * f - pm;
        let under = (self.mean - pm) - y * (1.0 - f);
        h * over + p * under.max(0.0)
    }
}

/// Loss tables for `r`-period demand, `r = 1..`, grown on demand.
struct HorizonTables<'a> {
    model: &'a DemandModel,
    tables: Vec<Vec<LossTable>>,
}

impl<'a> HorizonTables<'a> {
    fn new(model: &'a DemandModel) -> Self {
        Self { model, tables: Vec::new() }
    }

    /// Tables for item demand over `r` periods (`r >= 1`).
    fn get(&mut self, r: u32) -> Result<&[LossTable]> {
        while self.tables.len() < r as usize {
            let periods = self.tables.len() as u32 + 1;
            let row = (0..self.model.dim())
                .map(|i| self.model.item_law(i, periods).pmf().map(|p| LossTable::new(&p)))
                .collect::<Result<Vec<_>>>()?;
            self.tables.push(row);
        }
        Ok(&self.tables[r as usize - 1])
    }
}

fn check_problem(model: &DemandModel, params: &CostParams) -> Result<()> {
    model.validate()?;
    params.validate()?;
    check_dim(model.dim(), params.dim())
}

fn gamma_of(model: &DemandModel, params: &CostParams) -> f64 {
    period_discount(params.r, model.periods_per_year)
}

fn per_period(model: &DemandModel, params: &CostParams) -> CostParams {
    params.per_period(model.periods_per_year)
}

/// Expected discounted cost of an (R,S) policy started from zero inventory.
pub fn rs_analytic_cost(policy: &RsPolicy, model: &DemandModel, params: &CostParams) -> Result<f64> {
    check_problem(model, params)?;
    check_dim(model.dim(), policy.s.len())?;
    if policy.r == 0 {
        return Err(Error::InvalidArgument("review period must be >= 1".into()));
    }
    if policy.s.iter().any(|s| !(*s >= 0.0)) {
        return Err(Error::InvalidArgument("base-stock levels must be >= 0".into()));
    }
    let mut tables = HorizonTables::new(model);
    rs_cost_with(policy, model, params, &mut tables)
}

fn rs_cost_with(policy: &RsPolicy, model: &DemandModel, params: &CostParams, tables: &mut HorizonTables) -> Result<f64> {
    let gamma = gamma_of(model, params);
    let w = per_period(model, params);
    let r = policy.r;
    let g_r = gamma.powi(r as i32);
    let p_none: f64 = tables.get(r)?.iter().map(LossTable::p_zero).product();
    let repeat = params.c0 * g_r / (1.0 - g_r) * (1.0 - p_none);
    let mut total = if policy.s.iter().any(|s| *s > 0.0) { params.c0 + repeat } else { repeat };
    for (i, &s) in policy.s.iter().enumerate() {
        let mut inv = 0.0;
        for k in 0..r {
            inv += gamma.powi(k as i32) * tables.get(k + 1)?[i].expected_cost(s, w.h[i], w.p[i]);
        }
        let demand = tables.get(r)?[i].mean();
        total += params.c[i] * s + (inv + g_r * params.c[i] * demand) / (1.0 - g_r);
    }
    Ok(total)
}

/// Scans integer `y = 0, 1, ...` until the convex objective first stops decreasing.
fn scan_convex(mut obj: impl FnMut(f64) -> Result<f64>) -> Result<i64> {
    let mut y = 0i64;
    let mut cur = obj(0.0)?;
    loop {
        let next = obj((y + 1) as f64)?;
        if next < cur {
            y += 1;
            cur = next;
        } else {
            return Ok(y);
        }
        if y > 100_000_000 {
            return Err(Error::Numeric("base-stock scan did not terminate".into()));
        }
    }
}

/// Optimal item base-stock level for review period `r`.
pub fn rs_optimal_basestock(r: u32, item: usize, model: &DemandModel, params: &CostParams) -> Result<i64> {
    check_problem(model, params)?;
    if r == 0 {
        return Err(Error::InvalidArgument("review period must be >= 1".into()));
    }
    let mut tables = HorizonTables::new(model);
    rs_basestock_with(r, item, model, params, &mut tables)
}

fn rs_basestock_with(r: u32, item: usize, model: &DemandModel, params: &CostParams, tables: &mut HorizonTables) -> Result<i64> {
    let gamma = gamma_of(model, params);
    let w = per_period(model, params);
    let lead = (1.0 - gamma.powi(r as i32)) * params.c[item];
    for k in 1..=r {
        tables.get(k)?;
    }
    let t = &tables.tables;
    scan_convex(|y| {
        let mut v = lead * y;
        for k in 0..r as usize {
            v += gamma.powi(k as i32) * t[k][item].expected_cost(y, w.h[item], w.p[item]);
        }
        Ok(v)
    })
}

/// Evaluates `(R, S*(R))` for `R = 1..=r_max` by simulation and keeps the
/// cheapest (ties go to the smaller `R`).
pub fn rs_search(model: &DemandModel, params: &CostParams, r_max: u32, cfg: &SimConfig) -> Result<SearchResult<RsPolicy>> {
    check_problem(model, params)?;
    if r_max == 0 {
        return Err(Error::InvalidArgument("r_max must be >= 1".into()));
    }
    let sampler = DemandSampler::new(model)?;
    let mut tables = HorizonTables::new(model);
    let mut best: Option<(RsPolicy, CostEstimate)> = None;
    let mut candidates = Vec::new();
    for r in 1..=r_max {
        let s = (0..model.dim())
            .map(|i| rs_basestock_with(r, i, model, params, &mut tables).map(|v| v as f64))
            .collect::<Result<Vec<_>>>()?;
        let policy = RsPolicy { r, s };
        let est = simulate_with_sampler(&policy, &sampler, params, cfg)?;
        candidates.push(Candidate { label: format!("R={r} S={:?}", policy.s), estimate: est.clone() });
        if best.as_ref().map_or(true, |(_, b)| est.mean < b.mean) {
            best = Some((policy, est));
        }
    }
    let (best, estimate) = best.expect("r_max >= 1");
    Ok(SearchResult { best, estimate, candidates })
}

/// Independent draws of the number of periods until aggregate demand reaches `q`.
pub fn qs_cycle_samples<R: Rng + ?Sized>(q: f64, model: &DemandModel, n_samples: usize, rng: &mut R) -> Result<Vec<u32>> {
    model.validate()?;
    if !(q >= 0.0) {
        return Err(Error::InvalidArgument(format!("Q must be >= 0, got {q}")));
    }
    let sampler = DemandSampler::new(model)?;
    let mut demand = vec![0.0; model.dim()];
    Ok((0..n_samples)
        .map(|_| {
            let mut total = 0.0;
            let mut r = 0u32;
            loop {
                r += 1;
                sampler.sample_into(rng, &mut demand);
                total += demand.iter().sum::<f64>();
                if total >= q {
                    return r;
                }
            }
        })
        .collect())
}

const MIN_CYCLE_SAMPLES: usize = 100;

fn qs_basestock_from_samples(
    samples: &[u32],
    item: usize,
    model: &DemandModel,
    params: &CostParams,
    tables: &mut HorizonTables,
) -> Result<i64> {
    let gamma = gamma_of(model, params);
    let w = per_period(model, params);
    let n = samples.len() as f64;
    let rmax = *samples.iter().max().expect("non-empty");
    let mean_disc = samples.iter().map(|&r| gamma.powi(r as i32)).sum::<f64>() / n;
    // survival[t] = P(R > t)
    let mut counts = vec![0usize; rmax as usize + 1];
    for &r in samples {
        counts[r as usize] += 1;
    }
    let mut survival = vec![0.0; rmax as usize];
    let mut left = samples.len();
    for t in 0..rmax as usize {
        left -= counts[t];
        survival[t] = left as f64 / n;
    }
    for k in 1..=rmax {
        tables.get(k)?;
    }
    let t = &tables.tables;
    let lead = (1.0 - mean_disc) * params.c[item];
    scan_convex(|y| {
        let mut v = lead * y;
        for k in 0..rmax as usize {
            if survival[k] > 0.0 {
                v += gamma.powi(k as i32) * survival[k] * t[k][item].expected_cost(y, w.h[item], w.p[item]);
            }
        }
        Ok(v)
    })
}

/// Sample-average-approximation base stock for item `item` under trigger `q`.
pub fn qs_optimal_basestock(
    q: f64,
    item: usize,
    model: &DemandModel,
    params: &CostParams,
    n_samples: usize,
    seed: u64,
) -> Result<i64> {
    check_problem(model, params)?;
    if n_samples < MIN_CYCLE_SAMPLES {
        return Err(Error::InvalidArgument(format!("need at least {MIN_CYCLE_SAMPLES} cycle samples")));
    }
    let samples = qs_cycle_samples(q, model, n_samples, &mut path_rng(seed, 0))?;
    qs_basestock_from_samples(&samples, item, model, params, &mut HorizonTables::new(model))
}

/// Renewal-reward cost of a (Q,S) policy from zero inventory, with cycle
/// expectations estimated from `n_samples` simulated cycles.
///
/// Within a cycle the one-period expected cost given the pre-demand state is
/// used in place of the realized cost.
pub fn qs_analytic_cost(
    policy: &QsPolicy,
    model: &DemandModel,
    params: &CostParams,
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    check_problem(model, params)?;
    check_dim(model.dim(), policy.s.len())?;
    if n_samples == 0 {
        return Err(Error::InvalidArgument("need at least one cycle sample".into()));
    }
    if policy.s.iter().any(|s| !(*s >= 0.0)) || !(policy.q >= 0.0) {
        return Err(Error::InvalidArgument("Q and S must be >= 0".into()));
    }
    let d = model.dim();
    let gamma = gamma_of(model, params);
    let w = per_period(model, params);
    let one = (0..d)
        .map(|i| model.item_law(i, 1).pmf().map(|p| LossTable::new(&p)))
        .collect::<Result<Vec<_>>>()?;
    let sampler = DemandSampler::new(model)?;
    let mut rng = path_rng(seed, 0);
    let mut demand = vec![0.0; d];
    let mut cum = vec![0.0; d];
    let mut sum_disc = 0.0;
    let mut cycle = vec![0.0; d];
    let mut ordered = vec![0.0; d];
    for _ in 0..n_samples {
        cum.iter_mut().for_each(|c| *c = 0.0);
        let mut disc = 1.0;
        let mut total = 0.0;
        loop {
            for i in 0..d {
                cycle[i] += disc * one[i].expected_cost(policy.s[i] - cum[i], w.h[i], w.p[i]);
            }
            sampler.sample_into(&mut rng, &mut demand);
            for i in 0..d {
                cum[i] += demand[i];
                total += demand[i];
            }
            disc *= gamma;
            if total >= policy.q {
                break;
            }
        }
        sum_disc += disc;
        for i in 0..d {
            ordered[i] += disc * cum[i];
        }
    }
    let n = n_samples as f64;
    let e_disc = sum_disc / n;
    let fixed_repeat = if policy.q > 0.0 {
        e_disc
    } else {
        gamma * (1.0 - one.iter().map(LossTable::p_zero).product::<f64>())
    };
    let initial = if policy.s.iter().any(|s| *s > 0.0) { params.c0 } else { 0.0 };
    let mut total = initial + params.c0 * fixed_repeat / (1.0 - e_disc);
    for i in 0..d {
        // with Q = 0 every cycle is one period long
        let ordered = if policy.q > 0.0 { ordered[i] / n } else { gamma * one[i].mean() };
        total += params.c[i] * policy.s[i] + (cycle[i] / n + params.c[i] * ordered) / (1.0 - e_disc);
    }
    Ok(total)
}

/// Trigger values scanned around the best review period `r_star`.
pub fn qs_window(model: &DemandModel, r_star: u32) -> (u64, u64) {
    let m: f64 = (0..model.dim()).map(|i| model.period_mean(i)).sum();
    let lo = ((r_star as f64 - 5.0) * m).floor().max(0.0) as u64;
    let hi = ((r_star as f64 + 5.0) * m).floor().max(0.0) as u64;
    (lo, hi)
}

/// Scans `Q` over [`qs_window`], each with SAA base stocks, keeping the
/// cheapest simulated policy (ties go to the smaller `Q`).
pub fn qs_search(
    model: &DemandModel,
    params: &CostParams,
    r_star: u32,
    cfg: &SimConfig,
    n_samples: usize,
) -> Result<SearchResult<QsPolicy>> {
    check_problem(model, params)?;
    if n_samples < MIN_CYCLE_SAMPLES {
        return Err(Error::InvalidArgument(format!("need at least {MIN_CYCLE_SAMPLES} cycle samples")));
    }
    let (lo, hi) = qs_window(model, r_star);
    let sampler = DemandSampler::new(model)?;
    let mut tables = HorizonTables::new(model);
    let mut best: Option<(QsPolicy, CostEstimate)> = None;
    let mut candidates = Vec::new();
    for q in lo..=hi {
        let q = q as f64;
        let samples = qs_cycle_samples(q, model, n_samples, &mut path_rng(cfg.seed ^ 0x5eed_c7c1e, q as u64))?;
        let s = (0..model.dim())
            .map(|i| qs_basestock_from_samples(&samples, i, model, params, &mut tables).map(|v| v as f64))
            .collect::<Result<Vec<_>>>()?;
        let policy = QsPolicy { q, s };
        let est = simulate_with_sampler(&policy, &sampler, params, cfg)?;
        candidates.push(Candidate { label: format!("Q={q} S={:?}", policy.s), estimate: est.clone() });
        if best.as_ref().map_or(true, |(_, b)| est.mean < b.mean) {
            best = Some((policy, est));
        }
    }
    let (best, estimate) = best.expect("window is non-empty");
    Ok(SearchResult { best, estimate, candidates })
}

const MAX_WIDENINGS: u32 = 3;

/// Reorder point and order-up-to level of the optimal single-item policy
/// for item `item` with fixed cost `c0`.
pub fn single_item_ss(model: &DemandModel, params: &CostParams, item: usize, c0: f64) -> Result<(i64, i64)> {
    let wm = model.period_mean(item);
    let mut bound = ((40.0 * wm).ceil() as i64).max(20);
    for _ in 0..=MAX_WIDENINGS {
        let spec = single_item_spec(model, params, item, c0, -bound, bound)?;
        let sol = policy_iteration(&spec)?;
        let mut found = None;
        for x in (-bound..=bound).rev() {
            let t = sol.target_at(&[x]).expect("in range")[0];
            if t != x {
                found = Some((x, t));
                break;
            }
        }
        let Some((s, big_s)) = found else {
            return Err(Error::Numeric(format!("item {item}: optimal single-item policy never orders")));
        };
        if big_s < bound && s > -bound + 1 {
            return Ok((s, big_s));
        }
        bound *= 2;
    }
    Err(Error::GridTooNarrow(format!(
        "item {item}: single-item (s,S) touches the truncation after {MAX_WIDENINGS} widenings"
    )))
}

/// Independent (s,S) levels from single-item problems with fixed cost `alpha * c0`.
pub fn make_independent_ss(alpha: f64, model: &DemandModel, params: &CostParams) -> Result<IndependentSsPolicy> {
    check_problem(model, params)?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1], got {alpha}")));
    }
    let mut s = Vec::with_capacity(model.dim());
    let mut big_s = Vec::with_capacity(model.dim());
    for i in 0..model.dim() {
        let (a, b) = single_item_ss(model, params, i, alpha * params.c0)?;
        s.push(a as f64);
        big_s.push(b as f64);
    }
    Ok(IndependentSsPolicy { s, big_s, alpha })
}

/// `{step, 2 step, ..., 1}` as exact decimal multiples.
fn grid(step_hundredths: u32) -> Vec<f64> {
    (1..=100 / step_hundredths).map(|k| f64::from(k * step_hundredths) / 100.0).collect()
}

/// Best independent (s,S) policy over `alpha in {0.05, 0.10, ..., 1}`.
pub fn independent_ss_search(model: &DemandModel, params: &CostParams, cfg: &SimConfig) -> Result<SearchResult<IndependentSsPolicy>> {
    check_problem(model, params)?;
    let sampler = DemandSampler::new(model)?;
    let mut best: Option<(IndependentSsPolicy, CostEstimate)> = None;
    let mut candidates = Vec::new();
    for alpha in grid(5) {
        let policy = make_independent_ss(alpha, model, params)?;
        let est = simulate_with_sampler(&policy, &sampler, params, cfg)?;
        candidates.push(Candidate {
            label: format!("alpha={alpha} s={:?} S={:?}", policy.s, policy.big_s),
            estimate: est.clone(),
        });
        if best.as_ref().map_or(true, |(_, b)| est.mean < b.mean) {
            best = Some((policy, est));
        }
    }
    let (best, estimate) = best.expect("grid is non-empty");
    Ok(SearchResult { best, estimate, candidates })
}

/// Can-order levels `o = round(kappa s + (1 - kappa) S)`.
pub fn can_order_from(ss: &IndependentSsPolicy, kappa: f64) -> CanOrderPolicy {
    let o = ss
        .s
        .iter()
        .zip(&ss.big_s)
        .map(|(s, b)| (kappa * s + (1.0 - kappa) * b).round().clamp(*s, *b))
        .collect();
    CanOrderPolicy { s: ss.s.clone(), o, big_s: ss.big_s.clone() }
}

/// Best can-order policy over `alpha in {0, 0.05, ..., 1}` and
/// `kappa in {0, 0.1, ..., 1}`; `alpha = 0` is evaluated as `alpha = 0.05`.
pub fn can_order_search(model: &DemandModel, params: &CostParams, cfg: &SimConfig) -> Result<SearchResult<CanOrderPolicy>> {
    check_problem(model, params)?;
    let sampler = DemandSampler::new(model)?;
    let mut best: Option<(CanOrderPolicy, CostEstimate)> = None;
    let mut candidates = Vec::new();
    let kappas: Vec<f64> = (0..=10).map(|k| f64::from(k) / 10.0).collect();
    for alpha in grid(5) {
        let ss = make_independent_ss(alpha, model, params)?;
        for &kappa in &kappas {
            let policy = can_order_from(&ss, kappa);
            let est = simulate_with_sampler(&policy, &sampler, params, cfg)?;
            candidates.push(Candidate {
                label: format!("alpha={alpha} kappa={kappa} o={:?}", policy.o),
                estimate: est.clone(),
            });
            if best.as_ref().map_or(true, |(_, b)| est.mean < b.mean) {
                best = Some((policy, est));
            }
        }
    }
    let (best, estimate) = best.expect("grid is non-empty");
    Ok(SearchResult { best, estimate, candidates })
}

/// Probability that no item sees demand over `periods` periods.
pub fn aggregate_zero_probability(model: &DemandModel, periods: u32) -> Result<f64> {
    (0..model.dim())
        .map(|i| {
            let law: CountLaw = model.item_law(i, periods);
            law.pmf().map(|p| p.probs[0])
        })
        .product()
}
