//! Implementable policies extracted from trained value/gradient networks,
//! and a serializable description of every policy family.

use std::collections::HashMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bench::{CanOrderPolicy, IndependentSsPolicy, QsPolicy, RsPolicy};
use crate::demand::path_rng;
use crate::error::{check_dim, Error, Result};
use crate::mdp::{MdpPolicy, MdpSolution};
use crate::model::{diffusion_moments, state_cost, CostParams, DemandModel, DiffusionParams};
use crate::nn::{read_checkpoint, Mlp};
use crate::optim::{minimize_box, BoxOptions};
use crate::sim::{NeverOrder, Observation, Policy};

/// Approximate value function with gradient and Hessian estimates.
pub trait ValueModel: Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> Result<f64>;

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Gradient and its input Jacobian, row-major `d x d`.
    fn gradient_jacobian(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)>;
}

fn finite(v: &[f64], what: &str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric(format!("non-finite {what}")))
    }
}

/// Trained value network `h: R^d -> R` and gradient network `g: R^d -> R^d`.
#[derive(Debug, Clone)]
pub struct NetworkPair {
    pub h: Mlp,
    pub g: Mlp,
}

impl NetworkPair {
    pub fn new(h: Mlp, g: Mlp) -> Result<Self> {
        let d = h.input_dim();
        check_dim(1, h.output_dim())?;
        check_dim(d, g.input_dim())?;
        check_dim(d, g.output_dim())?;
        Ok(Self { h, g })
    }

    /// Loads the two networks written by training, value network first.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut nets = read_checkpoint(path)?;
        if nets.len() != 2 {
            return Err(Error::Checkpoint(format!("expected 2 networks, found {}", nets.len())));
        }
        let g = nets.pop().expect("two");
        let h = nets.pop().expect("two");
        Self::new(h, g)
    }
}

impl ValueModel for NetworkPair {
    fn dim(&self) -> usize {
        self.h.input_dim()
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        let v = self.h.forward(x)?;
        finite(&v, "value network output")?;
        Ok(v[0])
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        let v = self.g.forward(x)?;
        finite(&v, "gradient network output")?;
        Ok(v)
    }

    fn gradient_jacobian(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let (g, j) = self.g.forward_with_jacobian(x)?;
        finite(&g, "gradient network output")?;
        finite(&j, "gradient network Jacobian")?;
        Ok((g, j))
    }
}

/// Value model from plain functions; the Jacobian is taken by central
/// differences of the gradient.
pub struct ClosureModel<V, G> {
    pub d: usize,
    pub value: V,
    pub gradient: G,
}

impl<V, G> ValueModel for ClosureModel<V, G>
where
    V: Fn(&[f64]) -> f64 + Sync,
    G: Fn(&[f64]) -> Vec<f64> + Sync,
{
    fn dim(&self) -> usize {
        self.d
    }

    fn value(&self, x: &[f64]) -> Result<f64> {
        check_dim(self.d, x.len())?;
        let v = (self.value)(x);
        finite(&[v], "value")?;
        Ok(v)
    }

    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.d, x.len())?;
        let g = (self.gradient)(x);
        check_dim(self.d, g.len())?;
        finite(&g, "gradient")?;
        Ok(g)
    }

    fn gradient_jacobian(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let g = self.gradient(x)?;
        let d = self.d;
        let mut jac = vec![0.0; d * d];
        let mut xp = x.to_vec();
        for j in 0..d {
            let step = 1e-5 * x[j].abs().max(1.0);
            xp[j] = x[j] + step;
            let up = (self.gradient)(&xp);
            xp[j] = x[j] - step;
            let dn = (self.gradient)(&xp);
            xp[j] = x[j];
            for i in 0..d {
                jac[i * d + j] = (up[i] - dn[i]) / (2.0 * step);
            }
        }
        finite(&jac, "Jacobian")?;
        Ok((g, jac))
    }
}

/// Residual of the no-action operator at `x`:
/// `-1/2 tr(sigma sigma^T J) + mu^T G + r H - f`.
/// Strongly negative values mean waiting is costlier than the model allows.
pub fn no_action_value(model: &dyn ValueModel, x: &[f64], params: &CostParams, diff: &DiffusionParams) -> Result<f64> {
    let d = model.dim();
    check_dim(d, x.len())?;
    check_dim(d, params.dim())?;
    check_dim(d, diff.dim())?;
    let h = model.value(x)?;
    let (g, jac) = model.gradient_jacobian(x)?;
    let mut trace = 0.0;
    for i in 0..d {
        for j in 0..d {
            trace += diff.sigma_sq[i * d + j] * jac[j * d + i];
        }
    }
    let drift: f64 = diff.mu.iter().zip(&g).map(|(m, gi)| m * gi).sum();
    Ok(-0.5 * trace + drift + params.r * h - state_cost(x, params))
}

/// Largest `|J_ij - J_ji|` of the Hessian estimate at `x`.
pub fn jacobian_asymmetry(model: &dyn ValueModel, x: &[f64]) -> Result<f64> {
    let d = model.dim();
    let (_, jac) = model.gradient_jacobian(x)?;
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in 0..i {
            worst = worst.max((jac[i * d + j] - jac[j * d + i]).abs());
        }
    }
    Ok(worst)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtractionMethod {
    /// Minimize `H(z) + c^T z` over the box.
    MinimizeValue,
    /// Minimize `1/2 |G(z) + c|^2` over the box.
    GradientStationarity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractionConfig {
    /// Trigger an order when the no-action value is at or below this.
    pub epsilon: f64,
    /// Box `[lo, hi]` as multiples of `reference`.
    pub bounds: [f64; 2],
    /// Start point as a multiple of `reference`.
    pub start: f64,
    pub method: ExtractionMethod,
    /// Per-item scale, normally a benchmark order-up-to level.
    pub reference: Vec<f64>,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub seed: u64,
}

fn default_restarts() -> usize {
    10
}

impl ExtractionConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.epsilon.is_finite() {
            return Err(Error::InvalidArgument("epsilon must be finite".into()));
        }
        let [lo, hi] = self.bounds;
        if !(lo.is_finite() && hi.is_finite() && lo <= self.start && self.start <= hi) {
            return Err(Error::InvalidArgument(format!("need bounds lo <= start <= hi, got [{lo}, {hi}] and {}", self.start)));
        }
        if self.reference.is_empty() || self.reference.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidArgument("reference levels must be finite and nonnegative".into()));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidArgument("restarts must be positive".into()));
        }
        Ok(())
    }

    pub fn lower(&self) -> Vec<f64> {
        self.reference.iter().map(|v| self.bounds[0] * v).collect()
    }

    pub fn upper(&self) -> Vec<f64> {
        self.reference.iter().map(|v| self.bounds[1] * v).collect()
    }

    pub fn start_point(&self) -> Vec<f64> {
        self.reference.iter().map(|v| self.start * v).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderUpTo {
    pub z: Vec<f64>,
    /// Best objective value found.
    pub objective: f64,
    pub converged: bool,
    /// Items whose optimum sits on a bound that the objective pushes against.
    pub pinned: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Order-up-to vector `z*` by box-constrained quasi-Newton with jittered restarts.
pub fn compute_order_up_to(model: &dyn ValueModel, params: &CostParams, cfg: &ExtractionConfig) -> Result<OrderUpTo> {
    cfg.validate()?;
    let d = model.dim();
    check_dim(d, cfg.reference.len())?;
    check_dim(d, params.dim())?;
    let lo = cfg.lower();
    let hi = cfg.upper();
    let c = &params.c;
    let objective = |z: &[f64]| -> Result<(f64, Vec<f64>)> {
        match cfg.method {
            ExtractionMethod::MinimizeValue => {
                let v = model.value(z)? + params.c0 + c.iter().zip(z).map(|(a, b)| a * b).sum::<f64>();
                let g = model.gradient(z)?.iter().zip(c).map(|(a, b)| a + b).collect();
                Ok((v, g))
            }
            ExtractionMethod::GradientStationarity => {
                let (g, jac) = model.gradient_jacobian(z)?;
                let res: Vec<f64> = g.iter().zip(c).map(|(a, b)| a + b).collect();
                let v = 0.5 * res.iter().map(|r| r * r).sum::<f64>();
                let grad = (0..d).map(|j| (0..d).map(|i| jac[i * d + j] * res[i]).sum()).collect();
                Ok((v, grad))
            }
        }
    };
    let start = cfg.start_point();
    let mut best: Option<crate::optim::BoxMinimum> = None;
    for k in 0..cfg.restarts {
        let x0: Vec<f64> = if k == 0 {
            start.clone()
        } else {
            let mut rng = path_rng(cfg.seed, k as u64);
            (0..d).map(|i| (start[i] * (1.0 + 0.1 * rng.gen_range(-1.0..=1.0))).clamp(lo[i], hi[i])).collect()
        };
        let run = minimize_box(objective, &x0, &lo, &hi, BoxOptions::default())?;
        if best.as_ref().map_or(true, |b| run.value < b.value) {
            best = Some(run);
        }
    }
    let best = best.expect("restarts >= 1");
    let mut warnings = Vec::new();
    let mut pinned = Vec::new();
    for i in 0..d {
        let g = best.gradient[i];
        let at_lo = best.x[i] <= lo[i] && g > 0.0;
        let at_hi = best.x[i] >= hi[i] && g < 0.0;
        if at_lo || at_hi {
            pinned.push(i);
            warnings.push(format!(
                "item {i}: order-up-to level pinned at {} bound {:.4} (gradient {g:.3e})",
                if at_lo { "lower" } else { "upper" },
                best.x[i]
            ));
        }
    }
    if !best.converged {
        warnings.push(format!("minimizer stopped after {} iterations without meeting the gradient tolerance", best.iterations));
    }
    Ok(OrderUpTo { z: best.x, objective: best.value, converged: best.converged, pinned, warnings })
}

/// Orders `(z* - x)^+` when the no-action value is at or below `epsilon`.
pub fn nn_policy_decide(
    x: &[f64],
    z_star: &[f64],
    epsilon: f64,
    model: &dyn ValueModel,
    params: &CostParams,
    diff: &DiffusionParams,
) -> Result<Vec<f64>> {
    check_dim(x.len(), z_star.len())?;
    if no_action_value(model, x, params, diff)? <= epsilon {
        Ok(x.iter().zip(z_star).map(|(a, z)| (z - a).max(0.0)).collect())
    } else {
        Ok(vec![0.0; x.len()])
    }
}

/// Network-driven policy for the discrete simulator. Trigger decisions on
/// integer states are memoized.
pub struct NeuralNetPolicy<M = NetworkPair> {
    model: M,
    z_star: Vec<f64>,
    epsilon: f64,
    /// Costs in the units the networks were trained in.
    params: CostParams,
    diff: DiffusionParams,
    cache: RwLock<HashMap<Vec<i64>, bool>>,
}

impl<M: ValueModel> NeuralNetPolicy<M> {
    pub fn new(model: M, z_star: Vec<f64>, epsilon: f64, params: CostParams, diff: DiffusionParams) -> Result<Self> {
        let d = model.dim();
        check_dim(d, z_star.len())?;
        check_dim(d, params.dim())?;
        check_dim(d, diff.dim())?;
        if !epsilon.is_finite() {
            return Err(Error::InvalidArgument("epsilon must be finite".into()));
        }
        Ok(Self { model, z_star, epsilon, params, diff, cache: RwLock::new(HashMap::new()) })
    }

    pub fn z_star(&self) -> &[f64] {
        &self.z_star
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    fn triggered(&self, x: &[f64]) -> Result<bool> {
        let key: Option<Vec<i64>> = x
            .iter()
            .map(|v| if v.fract() == 0.0 && v.abs() < 1e15 { Some(*v as i64) } else { None })
            .collect();
        if let Some(k) = &key {
            if let Some(hit) = self.cache.read().expect("cache lock").get(k) {
                return Ok(*hit);
            }
        }
        let fire = no_action_value(&self.model, x, &self.params, &self.diff)? <= self.epsilon;
        if let Some(k) = key {
            self.cache.write().expect("cache lock").insert(k, fire);
        }
        Ok(fire)
    }
}

impl<M: ValueModel> Policy for NeuralNetPolicy<M> {
    fn dim(&self) -> usize {
        self.z_star.len()
    }

    fn name(&self) -> String {
        "neural".into()
    }

    fn decide(&self, x: &[f64], _obs: &Observation, order: &mut [f64]) -> Result<bool> {
        if !self.triggered(x)? {
            return Ok(false);
        }
        for i in 0..x.len() {
            order[i] = (self.z_star[i] - x[i]).max(0.0);
        }
        Ok(order.iter().any(|o| *o > 0.0))
    }
}

/// Serializable description of any supported policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicySpec {
    NeverOrder { d: usize },
    Rs(RsPolicy),
    Qs(QsPolicy),
    CanOrder(CanOrderPolicy),
    IndependentSs(IndependentSsPolicy),
    Mdp {
        table: PathBuf,
    },
    NeuralNet {
        checkpoint: PathBuf,
        z_star: Vec<f64>,
        epsilon: f64,
        /// Cost scale used in training.
        kappa: f64,
    },
}

impl PolicySpec {
    /// Makes relative file references relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        match self {
            PolicySpec::Mdp { table } if table.is_relative() => *table = base.join(&*table),
            PolicySpec::NeuralNet { checkpoint, .. } if checkpoint.is_relative() => *checkpoint = base.join(&*checkpoint),
            _ => {}
        }
    }

    pub fn build(&self, model: &DemandModel, params: &CostParams) -> Result<Box<dyn Policy + Send>> {
        let d = model.dim();
        let policy: Box<dyn Policy + Send> = match self {
            PolicySpec::NeverOrder { d } => Box::new(NeverOrder { d: *d }),
            PolicySpec::Rs(p) => {
                if p.r == 0 {
                    return Err(Error::InvalidArgument("review period must be positive".into()));
                }
                Box::new(p.clone())
            }
            PolicySpec::Qs(p) => Box::new(p.clone()),
            PolicySpec::CanOrder(p) => Box::new(CanOrderPolicy::new(p.s.clone(), p.o.clone(), p.big_s.clone())?),
            PolicySpec::IndependentSs(p) => Box::new(p.clone()),
            PolicySpec::Mdp { table } => Box::new(MdpPolicy { solution: MdpSolution::read_binary(table)? }),
            PolicySpec::NeuralNet { checkpoint, z_star, epsilon, kappa } => {
                if !(*kappa > 0.0 && kappa.is_finite()) {
                    return Err(Error::InvalidArgument("kappa must be positive".into()));
                }
                let nets = NetworkPair::load(checkpoint)?;
                Box::new(NeuralNetPolicy::new(nets, z_star.clone(), *epsilon, params.scaled(*kappa), diffusion_moments(model))?)
            }
        };
        check_dim(d, policy.dim())?;
        Ok(policy)
    }
}

/// Trigger map of a 2-item policy on an integer grid.
#[derive(Debug, Clone, PartialEq)]
pub struct OrderRegion {
    pub lo: [i64; 2],
    pub len: [usize; 2],
    /// Row-major by the first item.
    pub cells: Vec<bool>,
}

impl OrderRegion {
    pub fn count(&self) -> usize {
        self.cells.iter().filter(|c| **c).count()
    }

    /// Number of cells where exactly one of the two regions orders.
    pub fn symmetric_difference(&self, other: &OrderRegion) -> Result<usize> {
        if self.lo != other.lo || self.len != other.len {
            return Err(Error::InvalidArgument("order regions cover different grids".into()));
        }
        Ok(self.cells.iter().zip(&other.cells).filter(|(a, b)| a != b).count())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "x1,x2,order")?;
        for a in 0..self.len[0] {
            for b in 0..self.len[1] {
                let cell = self.cells[a * self.len[1] + b];
                writeln!(w, "{},{},{}", self.lo[0] + a as i64, self.lo[1] + b as i64, u8::from(cell))?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Evaluates where `policy` orders over the box `[lo, hi]` (inclusive).
pub fn order_region(policy: &dyn Policy, lo: [i64; 2], hi: [i64; 2]) -> Result<OrderRegion> {
    check_dim(2, policy.dim())?;
    if lo[0] > hi[0] || lo[1] > hi[1] {
        return Err(Error::InvalidArgument("empty grid".into()));
    }
    let len = [(hi[0] - lo[0] + 1) as usize, (hi[1] - lo[1] + 1) as usize];
    let obs = Observation { period: 2, demand_since_order: 0.0 };
    let mut cells = Vec::with_capacity(len[0] * len[1]);
    for a in 0..len[0] {
        for b in 0..len[1] {
            let mut order = [0.0; 2];
            let x = [(lo[0] + a as i64) as f64, (lo[1] + b as i64) as f64];
            let epoch = policy.decide(&x, &obs, &mut order)?;
            cells.push(epoch && order.iter().any(|o| *o > 0.0));
        }
    }
    Ok(OrderRegion { lo, len, cells })
}
