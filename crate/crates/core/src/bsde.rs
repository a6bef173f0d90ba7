//! Reference-process simulation, the penalized pathwise loss and the
//! training loop that fits the value network `H` and gradient network `G`.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::demand::path_rng;
use crate::error::{check_dim, Error, Result};
use crate::model::{ordering_cost_unchecked, state_cost, CostParams, DiffusionParams};
use crate::nn::{AdamState, Mlp};

/// Random order-up-to jumps at Poisson times, used only to generate training paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferencePolicy {
    /// Orders per year.
    pub lambda: f64,
    /// Mean of the lognormal order-up-to draw.
    pub order_up_to_mean: Vec<f64>,
    /// Coefficient of variation of the order-up-to draw.
    pub nu: f64,
    /// Scale of the exponential minimum order, mean `alpha mu_i / lambda`.
    pub alpha: f64,
}

impl ReferencePolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda must be > 0, got {}", self.lambda)));
        }
        if !(self.nu >= 0.0 && self.nu.is_finite()) {
            return Err(Error::Config(format!("nu must be >= 0, got {}", self.nu)));
        }
        if !(self.alpha >= 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("alpha must lie in [0, 1), got {}", self.alpha)));
        }
        if self.order_up_to_mean.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return Err(Error::Config("order-up-to means must be > 0".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.order_up_to_mean.len()
    }
}

/// One discretized reference path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    pub d: usize,
    pub dt: f64,
    /// `N + 1` states, row-major.
    pub states: Vec<f64>,
    /// `N` Brownian increments.
    pub brownian: Vec<f64>,
    /// `N` order increments.
    pub orders: Vec<f64>,
}

impl PathBundle {
    pub fn n_steps(&self) -> usize {
        self.brownian.len() / self.d
    }

    pub fn state(&self, n: usize) -> &[f64] {
        &self.states[n * self.d..(n + 1) * self.d]
    }

    pub fn initial(&self) -> &[f64] {
        self.state(0)
    }

    pub fn terminal(&self) -> &[f64] {
        self.state(self.n_steps())
    }
}

/// Simulates the reference process for `n_steps` steps of length `dt`.
pub fn euler_maruyama<R: Rng + ?Sized>(
    policy: &ReferencePolicy,
    diff: &DiffusionParams,
    n_steps: usize,
    dt: f64,
    x0: &[f64],
    rng: &mut R,
) -> Result<PathBundle> {
    let d = diff.dim();
    check_dim(d, x0.len())?;
    check_dim(d, policy.dim())?;
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("time step must be > 0, got {dt}")));
    }
    let p_order = policy.lambda * dt;
    if p_order > 1.0 {
        return Err(Error::Config(format!("lambda * dt = {p_order} exceeds 1")));
    }
    let sd_ln = (1.0 + policy.nu * policy.nu).ln().sqrt();
    let mean_ln: Vec<f64> = policy.order_up_to_mean.iter().map(|m| m.ln() - 0.5 * sd_ln * sd_ln).collect();
    let floor_mean: Vec<f64> = diff.mu.iter().map(|m| policy.alpha * m / policy.lambda).collect();

    let mut states = Vec::with_capacity((n_steps + 1) * d);
    states.extend_from_slice(x0);
    let mut brownian = vec![0.0; n_steps * d];
    let mut orders = vec![0.0; n_steps * d];
    let sqdt = dt.sqrt();
    let mut noise = vec![0.0; d];
    for n in 0..n_steps {
        let x = states[n * d..(n + 1) * d].to_vec();
        let db = &mut brownian[n * d..(n + 1) * d];
        for v in db.iter_mut() {
            let z: f64 = StandardNormal.sample(rng);
            *v = sqdt * z;
        }
        let du = &mut orders[n * d..(n + 1) * d];
        if rng.gen::<f64>() < p_order {
            for i in 0..d {
                let z = if policy.nu == 0.0 {
                    policy.order_up_to_mean[i]
                } else {
                    let e: f64 = StandardNormal.sample(rng);
                    (mean_ln[i] + sd_ln * e).exp()
                };
                let floor = if policy.alpha == 0.0 {
                    0.0
                } else {
                    let e: f64 = Exp1.sample(rng);
                    floor_mean[i] * e
                };
                du[i] = (z - x[i]).max(floor);
            }
        }
        diff.apply_sigma(db, &mut noise);
        for i in 0..d {
            states.push(x[i] - diff.mu[i] * dt - noise[i] + du[i]);
        }
    }
    Ok(PathBundle { d, dt, states, brownian, orders })
}

/// Path data reduced to what the loss needs.
#[derive(Debug, Clone)]
pub struct PreparedBatch {
    pub d: usize,
    pub k: usize,
    pub n_steps: usize,
    pub discount_t: f64,
    /// `K x d` initial states.
    pub x0: Vec<f64>,
    /// `K x d` terminal states.
    pub xt: Vec<f64>,
    /// `(K N) x d` states at left endpoints, path-major.
    pub xs: Vec<f64>,
    /// `(K N) x d` discounted `sigma dB`.
    pub noise: Vec<f64>,
    /// Discounted running and ordering cost per path.
    pub cost: Vec<f64>,
}

impl PreparedBatch {
    /// Evaluates costs under `params` (annual rates) and discount rate `params.r`.
    pub fn new(paths: &[PathBundle], params: &CostParams, diff: &DiffusionParams) -> Result<Self> {
        let first = paths.first().ok_or_else(|| Error::InvalidArgument("empty path batch".into()))?;
        let (d, n, dt) = (first.d, first.n_steps(), first.dt);
        check_dim(d, params.dim())?;
        let k = paths.len();
        let mut b = PreparedBatch {
            d,
            k,
            n_steps: n,
            discount_t: (-params.r * dt * n as f64).exp(),
            x0: Vec::with_capacity(k * d),
            xt: Vec::with_capacity(k * d),
            xs: Vec::with_capacity(k * n * d),
            noise: Vec::with_capacity(k * n * d),
            cost: Vec::with_capacity(k),
        };
        let disc: Vec<f64> = (0..n).map(|j| (-params.r * dt * j as f64).exp()).collect();
        let mut tmp = vec![0.0; d];
        for p in paths {
            if p.d != d || p.n_steps() != n || p.dt != dt {
                return Err(Error::InvalidArgument("paths in a batch must share shape and step".into()));
            }
            b.x0.extend_from_slice(p.initial());
            b.xt.extend_from_slice(p.terminal());
            b.xs.extend_from_slice(&p.states[..n * d]);
            let mut cost = 0.0;
            for j in 0..n {
                diff.apply_sigma(&p.brownian[j * d..(j + 1) * d], &mut tmp);
                b.noise.extend(tmp.iter().map(|v| disc[j] * v));
                let du = &p.orders[j * d..(j + 1) * d];
                cost += disc[j] * (state_cost(p.state(j), params) * dt + ordering_cost_unchecked(du, params));
            }
            b.cost.push(cost);
        }
        Ok(b)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub loss: f64,
    pub violation: f64,
    pub mean_h0: f64,
}

/// Per-path slack of the discounted pathwise inequality (positive when violated).
pub fn path_slacks(h: &Mlp, g: &Mlp, batch: &PreparedBatch) -> Result<Vec<f64>> {
    check_nets(h, g, batch.d)?;
    let h0 = h.forward_batch(&batch.x0, batch.k)?;
    let ht = h.forward_batch(&batch.xt, batch.k)?;
    let gdot = g_dot_noise(g, batch)?;
    Ok((0..batch.k).map(|k| h0[k] - batch.discount_t * ht[k] - gdot[k] - batch.cost[k]).collect())
}

fn check_nets(h: &Mlp, g: &Mlp, d: usize) -> Result<()> {
    check_dim(d, h.input_dim())?;
    check_dim(1, h.output_dim())?;
    check_dim(d, g.input_dim())?;
    check_dim(d, g.output_dim())
}

const CHUNK_ROWS: usize = 4096;

/// `sum_n G(x_n) . noise_n` per path.
fn g_dot_noise(g: &Mlp, batch: &PreparedBatch) -> Result<Vec<f64>> {
    let (d, n) = (batch.d, batch.n_steps);
    let rows = batch.k * n;
    let mut per_row = vec![0.0; rows];
    let mut start = 0;
    while start < rows {
        let end = (start + CHUNK_ROWS).min(rows);
        let out = g.forward_batch(&batch.xs[start * d..end * d], end - start)?;
        for (r, o) in out.chunks_exact(d).enumerate() {
            let w = &batch.noise[(start + r) * d..(start + r + 1) * d];
            per_row[start + r] = o.iter().zip(w).map(|(a, b)| a * b).sum();
        }
        start = end;
    }
    if n == 0 {
        return Ok(vec![0.0; batch.k]);
    }
    Ok(per_row.chunks_exact(n).map(|c| c.iter().sum()).collect())
}

/// Loss value without gradients.
pub fn loss(h: &Mlp, g: &Mlp, batch: &PreparedBatch, beta: f64) -> Result<LossReport> {
    let slack = path_slacks(h, g, batch)?;
    let h0 = h.forward_batch(&batch.x0, batch.k)?;
    report(&slack, &h0, beta)
}

fn report(slack: &[f64], h0: &[f64], beta: f64) -> Result<LossReport> {
    let k = slack.len() as f64;
    let mean_h0 = h0.iter().sum::<f64>() / k;
    let penalty = slack.iter().map(|s| s.max(0.0).powi(2)).sum::<f64>() / k;
    let loss = -mean_h0 + if beta == 0.0 { 0.0 } else { beta * penalty };
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("non-finite loss (mean H {mean_h0}, penalty {penalty})")));
    }
    let violation = slack.iter().filter(|s| **s > 0.0).count() as f64 / k;
    Ok(LossReport { loss, violation, mean_h0 })
}

/// Fraction of paths whose slack is positive.
pub fn violation_probability(h: &Mlp, g: &Mlp, batch: &PreparedBatch) -> Result<f64> {
    let slack = path_slacks(h, g, batch)?;
    Ok(slack.iter().filter(|s| **s > 0.0).count() as f64 / slack.len() as f64)
}

/// Loss and its gradients with respect to the parameters of `h` and `g`
/// (written into `grad_h`, `grad_g`).
pub fn loss_and_gradients(
    h: &Mlp,
    g: &Mlp,
    batch: &PreparedBatch,
    beta: f64,
    grad_h: &mut [f64],
    grad_g: &mut [f64],
) -> Result<LossReport> {
    check_nets(h, g, batch.d)?;
    check_dim(h.n_params(), grad_h.len())?;
    check_dim(g.n_params(), grad_g.len())?;
    let (d, k, n) = (batch.d, batch.k, batch.n_steps);
    let mut both = batch.x0.clone();
    both.extend_from_slice(&batch.xt);
    let tape_h = h.forward_tape(&both, 2 * k)?;
    let (h0, ht) = tape_h.output().split_at(k);
    let gdot = g_dot_noise(g, batch)?;
    let slack: Vec<f64> = (0..k).map(|i| h0[i] - batch.discount_t * ht[i] - gdot[i] - batch.cost[i]).collect();
    let rep = report(&slack, h0, beta)?;

    let kf = k as f64;
    // dL/dslack per path
    let ds: Vec<f64> = slack.iter().map(|s| 2.0 * beta * s.max(0.0) / kf).collect();
    let mut up_h = vec![0.0; 2 * k];
    for i in 0..k {
        up_h[i] = -1.0 / kf + ds[i];
        up_h[k + i] = -batch.discount_t * ds[i];
    }
    grad_h.iter_mut().for_each(|v| *v = 0.0);
    grad_g.iter_mut().for_each(|v| *v = 0.0);
    h.backward(&tape_h, &up_h, grad_h)?;

    if ds.iter().any(|v| *v != 0.0) && n > 0 {
        let rows = k * n;
        let mut start = 0;
        while start < rows {
            let end = (start + CHUNK_ROWS).min(rows);
            let tape = g.forward_tape(&batch.xs[start * d..end * d], end - start)?;
            let mut up = vec![0.0; (end - start) * d];
            for r in start..end {
                let w = -ds[r / n];
                for j in 0..d {
                    up[(r - start) * d + j] = w * batch.noise[r * d + j];
                }
            }
            g.backward(&tape, &up, grad_g)?;
            start = end;
        }
    }
    Ok(rep)
}

/// Piecewise-constant schedule: each step applies from iteration `from` on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleStep {
    pub from: u64,
    pub value: f64,
}

pub fn schedule_value(steps: &[ScheduleStep], iteration: u64) -> f64 {
    steps.iter().take_while(|s| s.from <= iteration).last().map_or(f64::NAN, |s| s.value)
}

fn validate_schedule(name: &str, steps: &[ScheduleStep], positive: bool) -> Result<()> {
    if steps.first().map(|s| s.from) != Some(1) {
        return Err(Error::Config(format!("{name} schedule must start at iteration 1")));
    }
    if steps.windows(2).any(|w| w[1].from <= w[0].from) {
        return Err(Error::Config(format!("{name} schedule iterations must increase")));
    }
    let bad = |v: f64| if positive { !(v > 0.0) } else { !(v >= 0.0) };
    if steps.iter().any(|s| !s.value.is_finite() || bad(s.value)) {
        return Err(Error::Config(format!("{name} schedule has an invalid value")));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    /// Episode length in years.
    pub horizon: f64,
    pub n_steps: usize,
    pub batch_size: usize,
    pub iterations: u64,
    pub hidden: Vec<usize>,
    pub lr_schedule: Vec<ScheduleStep>,
    pub beta_schedule: Vec<ScheduleStep>,
    pub kappa: f64,
    pub seed: u64,
    #[serde(default)]
    pub checkpoint_every: Option<u64>,
}

pub const MAX_STEP: f64 = 0.005;
pub const DIVERGENCE_LIMIT: f64 = 1e12;

impl TrainConfig {
    pub fn dt(&self) -> f64 {
        self.horizon / self.n_steps as f64
    }

    pub fn validate(&self, policy: &ReferencePolicy) -> Result<()> {
        if !(self.horizon > 0.0 && self.n_steps >= 1 && self.batch_size >= 1) {
            return Err(Error::Config("horizon, n_steps and batch_size must be positive".into()));
        }
        if self.dt() > MAX_STEP * (1.0 + 1e-12) {
            return Err(Error::Config(format!("time step {} exceeds {MAX_STEP}", self.dt())));
        }
        if policy.lambda * self.dt() > 1.0 {
            return Err(Error::Config("lambda * dt exceeds 1".into()));
        }
        if !(self.kappa > 0.0 && self.kappa.is_finite()) {
            return Err(Error::Config("kappa must be > 0".into()));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::Config("hidden widths must be non-empty and positive".into()));
        }
        validate_schedule("learning-rate", &self.lr_schedule, true)?;
        validate_schedule("penalty", &self.beta_schedule, false)
    }

    pub fn widths(&self, d: usize, out: usize) -> Vec<usize> {
        let mut w = vec![d];
        w.extend_from_slice(&self.hidden);
        w.push(out);
        w
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: u64,
    pub loss: f64,
    pub violation: f64,
    pub mean_h0: f64,
    pub lr: f64,
    pub beta: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub h: Mlp,
    pub g: Mlp,
    pub diagnostics: Vec<IterationRecord>,
    /// Initial states for a continuation run.
    pub states: Vec<Vec<f64>>,
}

/// Simulates one batch of reference paths; path `k` of iteration `m` uses
/// its own random stream.
pub fn simulate_batch(
    cfg: &TrainConfig,
    policy: &ReferencePolicy,
    diff: &DiffusionParams,
    starts: &[Vec<f64>],
    iteration: u64,
) -> Result<Vec<PathBundle>> {
    let k = starts.len() as u64;
    starts
        .par_iter()
        .enumerate()
        .map(|(i, x0)| {
            let mut rng = path_rng(cfg.seed, iteration * k + i as u64);
            euler_maruyama(policy, diff, cfg.n_steps, cfg.dt(), x0, &mut rng)
        })
        .collect()
}

/// Fresh He-initialized value and gradient networks.
pub fn init_networks(cfg: &TrainConfig, d: usize) -> Result<(Mlp, Mlp)> {
    let h = Mlp::he_init(&cfg.widths(d, 1), &mut path_rng(cfg.seed, u64::MAX))?;
    let g = Mlp::he_init(&cfg.widths(d, d), &mut path_rng(cfg.seed, u64::MAX - 1))?;
    Ok((h, g))
}

/// Trains from freshly initialized networks; see [`train_with`].
pub fn train(
    cfg: &TrainConfig,
    policy: &ReferencePolicy,
    diff: &DiffusionParams,
    params: &CostParams,
    x_init: &[f64],
) -> Result<TrainOutput> {
    train_with(cfg, policy, diff, params, x_init, |_, _, _| Ok(()))
}

/// Penalized training with Adam. `on_checkpoint(m, h, g)` is called every
/// `cfg.checkpoint_every` iterations and, on divergence, with the last good
/// networks before the error is returned.
pub fn train_with(
    cfg: &TrainConfig,
    policy: &ReferencePolicy,
    diff: &DiffusionParams,
    params: &CostParams,
    x_init: &[f64],
    mut on_checkpoint: impl FnMut(u64, &Mlp, &Mlp) -> Result<()>,
) -> Result<TrainOutput> {
    params.validate()?;
    policy.validate()?;
    cfg.validate(policy)?;
    let d = diff.dim();
    check_dim(d, params.dim())?;
    check_dim(d, policy.dim())?;
    check_dim(d, x_init.len())?;
    let scaled = params.scaled(cfg.kappa);
    let (mut h, mut g) = init_networks(cfg, d)?;
    let mut adam_h = AdamState::new(h.n_params());
    let mut adam_g = AdamState::new(g.n_params());
    let mut grad_h = vec![0.0; h.n_params()];
    let mut grad_g = vec![0.0; g.n_params()];
    let mut starts = vec![x_init.to_vec(); cfg.batch_size];
    let mut diagnostics = Vec::with_capacity(cfg.iterations as usize);
    for m in 1..=cfg.iterations {
        let lr = schedule_value(&cfg.lr_schedule, m);
        let beta = schedule_value(&cfg.beta_schedule, m);
        let paths = simulate_batch(cfg, policy, diff, &starts, m)?;
        let batch = PreparedBatch::new(&paths, &scaled, diff)?;
        let rep = match loss_and_gradients(&h, &g, &batch, beta, &mut grad_h, &mut grad_g) {
            Ok(r) if r.loss.abs() <= DIVERGENCE_LIMIT => r,
            Ok(r) => {
                on_checkpoint(m - 1, &h, &g)?;
                return Err(Error::Divergence { iteration: m, loss: r.loss });
            }
            Err(_) => {
                on_checkpoint(m - 1, &h, &g)?;
                return Err(Error::Divergence { iteration: m, loss: f64::NAN });
            }
        };
        adam_h.update(h.params_mut(), &grad_h, lr)?;
        adam_g.update(g.params_mut(), &grad_g, lr)?;
        diagnostics.push(IterationRecord { iteration: m, loss: rep.loss, violation: rep.violation, mean_h0: rep.mean_h0, lr, beta });
        for (s, p) in starts.iter_mut().zip(&paths) {
            s.copy_from_slice(p.terminal());
        }
        if let Some(every) = cfg.checkpoint_every {
            if every > 0 && m % every == 0 {
                on_checkpoint(m, &h, &g)?;
            }
        }
    }
    Ok(TrainOutput { h, g, diagnostics, states: starts })
}
