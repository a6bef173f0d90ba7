//! Exact policy iteration for the truncated one- and two-item problem.
//!
//! States are integer inventory vectors in a box, decisions are order-up-to
//! vectors, and next states that fall below the lower bound are projected
//! onto it (their holding/backlog cost is charged at the true state).

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::demand::{period_pmfs, Pmf};
use crate::error::{check_dim, Error, Result};
use crate::model::{period_discount, CostParams, DemandModel};
#[cfg(test)]
use crate::model::weekly_discount;
use crate::sim::{Observation, Policy};
pub use crate::qvi::{solve_1d_qvi, QviGrid, QviSolution};

const MAX_ITERATIONS: usize = 200;
const IMPROVE_TOL: f64 = 1e-9;
const DUMP_MAGIC: &[u8; 8] = b"SJRPMDP1";

/// Truncated state and action sets for an exact solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedMdpSpec {
    pub state_lo: Vec<i64>,
    pub state_hi: Vec<i64>,
    /// Largest order-up-to level per item.
    pub action_hi: Vec<i64>,
    pub model: DemandModel,
    pub params: CostParams,
}

impl TruncatedMdpSpec {
    /// Same bounds for every item.
    pub fn uniform(model: DemandModel, params: CostParams, lo: i64, hi: i64, action_hi: i64) -> Self {
        let d = model.dim();
        Self { state_lo: vec![lo; d], state_hi: vec![hi; d], action_hi: vec![action_hi; d], model, params }
    }

    pub fn dim(&self) -> usize {
        self.model.dim()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d > 2 {
            return Err(Error::InvalidArgument(format!("exact solve supports at most 2 items, got {d}")));
        }
        self.params.validate()?;
        self.model.validate()?;
        check_dim(d, self.params.dim())?;
        check_dim(d, self.state_lo.len())?;
        check_dim(d, self.state_hi.len())?;
        check_dim(d, self.action_hi.len())?;
        for i in 0..d {
            let (lo, ah, hi) = (self.state_lo[i], self.action_hi[i], self.state_hi[i]);
            if !(lo < 0 && 0 <= ah && ah <= hi) {
                return Err(Error::Config(format!(
                    "item {i}: need state_lo < 0 <= action_hi <= state_hi, got ({lo}, {ah}, {hi})"
                )));
            }
        }
        Ok(())
    }
}

/// Optimal value and order-up-to table of a truncated problem.
#[derive(Debug, Clone, PartialEq)]
pub struct MdpSolution {
    pub d: usize,
    pub lo: [i64; 2],
    pub len: [usize; 2],
    /// Row-major over (item 1, item 2).
    pub value: Vec<f64>,
    /// Order-up-to level per state; equal to the state when not ordering.
    pub target: Vec<[i64; 2]>,
    pub residual: f64,
    pub iterations: usize,
}

impl MdpSolution {
    fn index(&self, x: &[i64]) -> Option<usize> {
        let mut idx = 0;
        for k in 0..2 {
            let v = if k < self.d { x[k] } else { 0 };
            let off = v - self.lo[k];
            if off < 0 || off as usize >= self.len[k] {
                return None;
            }
            idx = idx * self.len[k] + off as usize;
        }
        Some(idx)
    }

    pub fn value_at(&self, x: &[i64]) -> Option<f64> {
        self.index(x).map(|i| self.value[i])
    }

    /// Order-up-to level at `x` (`x` itself when no order is placed).
    pub fn target_at(&self, x: &[i64]) -> Option<Vec<i64>> {
        self.index(x).map(|i| self.target[i][..self.d].to_vec())
    }

    pub fn states(&self) -> impl Iterator<Item = Vec<i64>> + '_ {
        (0..self.value.len()).map(move |idx| {
            let i1 = idx / self.len[1];
            let i2 = idx % self.len[1];
            let x = [self.lo[0] + i1 as i64, self.lo[1] + i2 as i64];
            x[..self.d].to_vec()
        })
    }

    /// Flat binary layout: magic, d, per-dimension (lo: i64, len: u64), then
    /// the value table and each target component as little-endian f64,
    /// row-major.
    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::with_capacity(16 + self.value.len() * 8 * (1 + self.d));
        buf.extend_from_slice(DUMP_MAGIC);
        buf.extend_from_slice(&(self.d as u32).to_le_bytes());
        for k in 0..self.d {
            buf.extend_from_slice(&self.lo[k].to_le_bytes());
            buf.extend_from_slice(&(self.len[k] as u64).to_le_bytes());
        }
        for v in &self.value {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        for k in 0..self.d {
            for t in &self.target {
                buf.extend_from_slice(&(t[k] as f64).to_le_bytes());
            }
        }
        std::fs::File::create(path)?.write_all(&buf)?;
        Ok(())
    }

    pub fn read_binary(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut bytes)?;
        let bad = |m: &str| Error::Checkpoint(format!("{}: {m}", path.display()));
        let mut pos = 0usize;
        let mut take = |n: usize| -> Result<&[u8]> {
            let s = bytes.get(pos..pos + n).ok_or_else(|| bad("truncated"))?;
            pos += n;
            Ok(s)
        };
        if take(8)? != DUMP_MAGIC {
            return Err(bad("not an MDP table"));
        }
        let d = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        if !(1..=2).contains(&d) {
            return Err(bad("dimension must be 1 or 2"));
        }
        let mut lo = [0i64; 2];
        let mut len = [1usize; 2];
        for k in 0..d {
            lo[k] = i64::from_le_bytes(take(8)?.try_into().unwrap());
            len[k] = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
        }
        let n = len[0] * len[1];
        let mut read_f64s = |count: usize| -> Result<Vec<f64>> {
            let raw = take(count * 8)?;
            Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect())
        };
        let value = read_f64s(n)?;
        let mut target = vec![[0i64; 2]; n];
        for k in 0..d {
            for (t, v) in target.iter_mut().zip(read_f64s(n)?) {
                t[k] = v as i64;
            }
        }
        Ok(Self { d, lo, len, value, target, residual: f64::NAN, iterations: 0 })
    }

    /// CSV with one row per state: coordinates, value, targets and an order flag.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str("# sjrp mdp table v1\n");
        if self.d == 1 {
            out.push_str("x1,value,z1,order\n");
        } else {
            out.push_str("x1,x2,value,z1,z2,order\n");
        }
        for (idx, x) in self.states().enumerate() {
            let t = &self.target[idx];
            let order = (0..self.d).any(|k| t[k] != x[k]) as u8;
            if self.d == 1 {
                out.push_str(&format!("{},{},{},{}\n", x[0], self.value[idx], t[0], order));
            } else {
                out.push_str(&format!("{},{},{},{},{},{}\n", x[0], x[1], self.value[idx], t[0], t[1], order));
            }
        }
        std::fs::write(path, out)?;
        Ok(())
    }
}

/// Projected transition weights along one axis: from offset `i`, mass
/// `p[k]` moves to `i - k`, and everything at or beyond `i` lands on 0.
struct Axis {
    len: usize,
    lo: i64,
    action_hi: usize,
    pmf: Vec<f64>,
    /// `tail[i] = P(demand >= i)`.
    tail: Vec<f64>,
    /// Expected one-period item cost from each state.
    cost: Vec<f64>,
    c: f64,
}

impl Axis {
    fn new(lo: i64, hi: i64, action_hi: i64, pmf: &Pmf, c: f64, h: f64, p: f64) -> Self {
        let len = (hi - lo + 1) as usize;
        let probs = pmf.probs.clone();
        let mut tail = vec![0.0; len + 1];
        for i in (0..=len).rev() {
            let here = probs.get(i).copied().unwrap_or(0.0);
            let above = if i < len { tail[i + 1] } else { probs.iter().skip(len + 1).sum() };
            tail[i] = here + above;
        }
        let cost = (0..len)
            .map(|i| {
                let x = lo + i as i64;
                probs
                    .iter()
                    .enumerate()
                    .map(|(k, pk)| {
                        let y = (x - k as i64) as f64;
                        pk * if y >= 0.0 { h * y } else { -p * y }
                    })
                    .sum()
            })
            .collect();
        Self { len, lo, action_hi: (action_hi - lo) as usize, pmf: probs, tail, cost, c }
    }

    fn degenerate() -> Self {
        Self { len: 1, lo: 0, action_hi: 0, pmf: vec![1.0], tail: vec![1.0, 0.0], cost: vec![0.0], c: 0.0 }
    }

    /// Probability of staying at offset `i`.
    #[inline]
    fn stay(&self, i: usize) -> f64 {
        if i == 0 {
            1.0
        } else {
            self.pmf[0]
        }
    }

    /// Visit every strictly lower destination `(a, prob)` reachable from `i`.
    #[inline]
    fn for_lower(&self, i: usize, mut g: impl FnMut(usize, f64)) {
        if i == 0 {
            return;
        }
        let top = self.pmf.len().min(i);
        for k in 1..top {
            g(i - k, self.pmf[k]);
        }
        g(0, self.tail[i]);
    }
}

struct Solver {
    a1: Axis,
    a2: Axis,
    gamma: f64,
    c0: f64,
    d: usize,
}

/// Policy as a map state -> target class, with per-state order cost.
struct PolicyTable {
    /// `usize::MAX` for no order, else an index into `targets`.
    class: Vec<usize>,
    order_cost: Vec<f64>,
    /// Flat state index of each distinct target.
    targets: Vec<usize>,
    /// Flat target index per state (self when not ordering).
    target_of: Vec<usize>,
}

impl PolicyTable {
    fn from_targets(solver: &Solver, target_of: Vec<usize>) -> Self {
        let n = target_of.len();
        let mut class = vec![usize::MAX; n];
        let mut order_cost = vec![0.0; n];
        let mut targets = Vec::new();
        let mut seen = std::collections::HashMap::new();
        for idx in 0..n {
            let t = target_of[idx];
            if t != idx {
                let j = *seen.entry(t).or_insert_with(|| {
                    targets.push(t);
                    targets.len() - 1
                });
                class[idx] = j;
                order_cost[idx] = solver.order_cost(idx, t);
            }
        }
        Self { class, order_cost, targets, target_of }
    }
}

impl Solver {
    fn new(spec: &TruncatedMdpSpec) -> Result<Self> {
        spec.validate()?;
        let pmfs = period_pmfs(&spec.model)?;
        let n = spec.model.periods_per_year;
        let p = &spec.params.per_period(n);
        let mk = |i: usize| {
            Axis::new(spec.state_lo[i], spec.state_hi[i], spec.action_hi[i], &pmfs[i], p.c[i], p.h[i], p.p[i])
        };
        let a1 = mk(0);
        let a2 = if spec.dim() == 2 { mk(1) } else { Axis::degenerate() };
        Ok(Self { a1, a2, gamma: period_discount(p.r, n), c0: p.c0, d: spec.dim() })
    }

    fn n(&self) -> usize {
        self.a1.len * self.a2.len
    }

    #[inline]
    fn split(&self, idx: usize) -> (usize, usize) {
        (idx / self.a2.len, idx % self.a2.len)
    }

    fn order_cost(&self, from: usize, to: usize) -> f64 {
        if from == to {
            return 0.0;
        }
        let (f1, f2) = self.split(from);
        let (t1, t2) = self.split(to);
        self.c0 + self.a1.c * (t1 as f64 - f1 as f64) + self.a2.c * (t2 as f64 - f2 as f64)
    }

    /// Exact value of a policy given the expected continuation values `w` of
    /// its targets, by one lexicographic sweep. Returns the row-convolved
    /// table `u` (`u[x1][x2] = E V(x1, x2 - demand2)`) alongside the values.
    fn sweep(&self, pol: &PolicyTable, w: &[f64], with_costs: bool, v: &mut [f64], u: &mut [f64]) {
        let n2 = self.a2.len;
        let mut acc = vec![0.0; n2];
        for i1 in 0..self.a1.len {
            acc.iter_mut().for_each(|a| *a = 0.0);
            self.a1.for_lower(i1, |a, p| {
                let row = &u[a * n2..(a + 1) * n2];
                for (s, r) in acc.iter_mut().zip(row) {
                    *s += p * r;
                }
            });
            let stay1 = self.a1.stay(i1);
            let base = i1 * n2;
            for i2 in 0..n2 {
                let idx = base + i2;
                let mut lower2 = 0.0;
                self.a2.for_lower(i2, |b, p| lower2 += p * v[base + b]);
                let stay2 = self.a2.stay(i2);
                let val = match pol.class[idx] {
                    usize::MAX => {
                        let f = if with_costs { self.a1.cost[i1] + self.a2.cost[i2] } else { 0.0 };
                        (f + self.gamma * (acc[i2] + stay1 * lower2)) / (1.0 - self.gamma * stay1 * stay2)
                    }
                    j => w[j] + if with_costs { pol.order_cost[idx] } else { 0.0 },
                };
                v[idx] = val;
                u[idx] = lower2 + stay2 * val;
            }
        }
    }

    /// `Q(z) = E f(z - demand) + gamma E V(proj(z - demand))` at flat index `z`.
    fn q_at(&self, u: &[f64], z: usize, with_costs: bool) -> f64 {
        let n2 = self.a2.len;
        let (i1, i2) = self.split(z);
        let mut s = self.a1.stay(i1) * u[z];
        self.a1.for_lower(i1, |a, p| s += p * u[a * n2 + i2]);
        let f = if with_costs { self.a1.cost[i1] + self.a2.cost[i2] } else { 0.0 };
        f + self.gamma * s
    }

    fn q_table(&self, u: &[f64]) -> Vec<f64> {
        (0..self.n()).into_par_iter().map(|z| self.q_at(u, z, true)).collect()
    }

    /// Exact policy evaluation. Values are affine in the target continuation
    /// values, so one zero-cost sweep per target yields a small dense system.
    fn evaluate(&self, pol: &PolicyTable) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.n();
        let k = pol.targets.len();
        let mut v = vec![0.0; n];
        let mut u = vec![0.0; n];
        if k > 0 {
            let zeros = vec![0.0; k];
            self.sweep(pol, &zeros, true, &mut v, &mut u);
            let b = DVector::from_iterator(k, pol.targets.iter().map(|&z| self.q_at(&u, z, true)));
            let columns: Vec<Vec<f64>> = (0..k)
                .into_par_iter()
                .map(|j| {
                    let mut e = vec![0.0; k];
                    e[j] = 1.0;
                    let mut v = vec![0.0; n];
                    let mut u = vec![0.0; n];
                    self.sweep(pol, &e, false, &mut v, &mut u);
                    pol.targets.iter().map(|&z| self.q_at(&u, z, false)).collect()
                })
                .collect();
            let mut m = DMatrix::<f64>::identity(k, k);
            for (j, col) in columns.iter().enumerate() {
                for (i, a) in col.iter().enumerate() {
                    m[(i, j)] -= a;
                }
            }
            let w = m
                .lu()
                .solve(&b)
                .ok_or_else(|| Error::Numeric("singular policy evaluation system".into()))?;
            let w: Vec<f64> = w.iter().copied().collect();
            self.sweep(pol, &w, true, &mut v, &mut u);
        } else {
            self.sweep(pol, &[], true, &mut v, &mut u);
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::Numeric("non-finite value in policy evaluation".into()));
        }
        Ok((v, u))
    }

    /// Best order-up-to target per state from a `Q` table, returned as
    /// (value, flat target index).
    fn greedy(&self, q: &[f64]) -> Vec<(f64, usize)> {
        let n1 = self.a1.len;
        let n2 = self.a2.len;
        let h1 = self.a1.action_hi;
        let h2 = self.a2.action_hi;
        // w(z) = c.z + Q(z), measured in offsets; constant shifts cancel in the argmin
        let w = |idx: usize| {
            let (i1, i2) = self.split(idx);
            self.a1.c * i1 as f64 + self.a2.c * i2 as f64 + q[idx]
        };
        let inf = (f64::INFINITY, usize::MAX);
        let better = |a: (f64, usize), b: (f64, usize)| if b.0 < a.0 { b } else { a };
        // row suffix: min over z2 in [i2, h2] for fixed i1
        let mut row = vec![inf; n1 * n2];
        for i1 in 0..n1 {
            let mut best = inf;
            for i2 in (0..=h2.min(n2 - 1)).rev() {
                let idx = i1 * n2 + i2;
                best = better(best, (w(idx), idx));
                row[idx] = best;
            }
        }
        // column suffix: min over z1 in [i1, h1] for fixed i2
        let mut col = vec![inf; n1 * n2];
        for i2 in 0..n2 {
            let mut best = inf;
            for i1 in (0..=h1.min(n1 - 1)).rev() {
                let idx = i1 * n2 + i2;
                best = better(best, (w(idx), idx));
                col[idx] = best;
            }
        }
        // box suffix over [i1, h1] x [i2, h2]
        let mut boxed = vec![inf; n1 * n2];
        for i1 in (0..=h1.min(n1 - 1)).rev() {
            for i2 in 0..=h2.min(n2 - 1) {
                let idx = i1 * n2 + i2;
                let below = if i1 < h1 { boxed[idx + n2] } else { inf };
                boxed[idx] = better(row[idx], below);
            }
        }
        (0..n1 * n2)
            .into_par_iter()
            .map(|idx| {
                let (i1, i2) = self.split(idx);
                let cand = match (i1 <= h1, i2 <= h2) {
                    (true, true) => boxed[idx],
                    (false, true) => row[idx],
                    (true, false) => col[idx],
                    (false, false) => (w(idx), idx),
                };
                let stay = q[idx];
                if cand.1 == idx || cand.1 == usize::MAX {
                    return (stay, idx);
                }
                let ordered = self.order_cost(idx, cand.1) + q[cand.1];
                if ordered < stay {
                    (ordered, cand.1)
                } else {
                    (stay, idx)
                }
            })
            .collect()
    }

    fn residual(&self, v: &[f64], u: &[f64]) -> f64 {
        let q = self.q_table(u);
        self.greedy(&q).iter().zip(v).map(|((t, _), x)| (t - x).abs()).fold(0.0, f64::max)
    }

    fn solution(&self, spec: &TruncatedMdpSpec, v: Vec<f64>, pol: &PolicyTable, residual: f64, it: usize) -> MdpSolution {
        let target = pol
            .target_of
            .iter()
            .map(|&t| {
                let (i1, i2) = self.split(t);
                [self.a1.lo + i1 as i64, self.a2.lo + i2 as i64]
            })
            .collect();
        let len = [self.a1.len, self.a2.len];
        let lo = [spec.state_lo[0], if self.d == 2 { spec.state_lo[1] } else { 0 }];
        MdpSolution { d: self.d, lo, len, value: v, target, residual, iterations: it }
    }
}

/// Optimal policy of the truncated problem by policy iteration over
/// order-up-to decisions, starting from the never-order policy.
pub fn policy_iteration(spec: &TruncatedMdpSpec) -> Result<MdpSolution> {
    let solver = Solver::new(spec)?;
    let n = solver.n();
    let mut pol = PolicyTable::from_targets(&solver, (0..n).collect());
    let mut last_residual = f64::INFINITY;
    for it in 1..=MAX_ITERATIONS {
        let (v, u) = solver.evaluate(&pol)?;
        let q = solver.q_table(&u);
        let greedy = solver.greedy(&q);
        let scale = 1.0 + v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut changed = false;
        let mut next = pol.target_of.clone();
        let mut residual = 0.0f64;
        for idx in 0..n {
            let (best, t) = greedy[idx];
            residual = residual.max((best - v[idx]).abs());
            if t != pol.target_of[idx] && best < v[idx] - IMPROVE_TOL * scale {
                next[idx] = t;
                changed = true;
            }
        }
        last_residual = residual;
        if !changed {
            return Ok(solver.solution(spec, v, &pol, residual, it));
        }
        pol = PolicyTable::from_targets(&solver, next);
    }
    Err(Error::NonConvergence { iterations: MAX_ITERATIONS, residual: last_residual })
}

/// `max_x |V(x) - min_z {c(z - x) + E[f(z - demand) + gamma V(z - demand)]}|`.
pub fn bellman_residual(solution: &MdpSolution, spec: &TruncatedMdpSpec) -> Result<f64> {
    let solver = Solver::new(spec)?;
    check_dim(solver.n(), solution.value.len())?;
    let n2 = solver.a2.len;
    let mut u = vec![0.0; solver.n()];
    for i1 in 0..solver.a1.len {
        for i2 in 0..n2 {
            let mut s = solver.a2.stay(i2) * solution.value[i1 * n2 + i2];
            solver.a2.for_lower(i2, |b, p| s += p * solution.value[i1 * n2 + b]);
            u[i1 * n2 + i2] = s;
        }
    }
    Ok(solver.residual(&solution.value, &u))
}

/// Single-item problem for item `item` of a model, with fixed cost `c0`.
pub fn single_item_spec(
    model: &DemandModel,
    params: &CostParams,
    item: usize,
    c0: f64,
    lo: i64,
    hi: i64,
) -> Result<TruncatedMdpSpec> {
    let mut sub = model.clone();
    sub.annual_mean = vec![model.annual_mean[item]];
    sub.annual_cv = if model.annual_cv.is_empty() { vec![] } else { vec![model.annual_cv[item]] };
    let p = CostParams::new(c0, vec![params.c[item]], vec![params.h[item]], vec![params.p[item]], params.r)?;
    Ok(TruncatedMdpSpec { state_lo: vec![lo], state_hi: vec![hi], action_hi: vec![hi], model: sub, params: p })
}

/// Table lookup policy; states outside the table are clamped onto it.
#[derive(Debug, Clone)]
pub struct MdpPolicy {
    pub solution: MdpSolution,
}

impl Policy for MdpPolicy {
    fn dim(&self) -> usize {
        self.solution.d
    }

    fn name(&self) -> String {
        "mdp".into()
    }

    fn decide(&self, x: &[f64], _obs: &Observation, order: &mut [f64]) -> Result<bool> {
        let s = &self.solution;
        let mut key = [0i64; 2];
        for k in 0..s.d {
            let v = x[k].round() as i64;
            key[k] = v.clamp(s.lo[k], s.lo[k] + s.len[k] as i64 - 1);
        }
        let idx = s.index(&key[..s.d]).expect("clamped");
        let t = s.target[idx];
        if (0..s.d).all(|k| t[k] == key[k]) {
            return Ok(false);
        }
        for k in 0..s.d {
            order[k] = (t[k] as f64 - x[k]).max(0.0);
        }
        Ok(order.iter().any(|o| *o > 0.0))
    }
}
