//! Grid solver for the one-dimensional impulse-control quasi-variational
//! inequality
//!
//! `max{ rV + mu V' - sigma^2/2 V'' - f, V - MV } = 0`, with
//! `MV(x) = min_{x' > x} V(x') + c0 + c (x' - x)`,
//!
//! discretized with an upwind first difference and a central second
//! difference, and solved by policy iteration on the grid.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CostParams, DiffusionParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QviGrid {
    pub x_lo: f64,
    pub x_hi: f64,
    pub n_points: usize,
}

impl QviGrid {
    pub fn new(x_lo: f64, x_hi: f64, n_points: usize) -> Self {
        Self { x_lo, x_hi, n_points }
    }

    pub fn spacing(&self) -> f64 {
        (self.x_hi - self.x_lo) / (self.n_points - 1) as f64
    }

    pub fn point(&self, j: usize) -> f64 {
        self.x_lo + j as f64 * self.spacing()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QviSolution {
    pub x: Vec<f64>,
    pub value: Vec<f64>,
    /// Post-order level per grid point; equal to `x` where no order is placed.
    pub order_target: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    /// Value vector after each policy evaluation, starting from the never-order policy.
    pub history: Vec<Vec<f64>>,
}

impl QviSolution {
    fn locate(&self, x: f64) -> (usize, f64) {
        let h = self.x[1] - self.x[0];
        let t = ((x - self.x[0]) / h).clamp(0.0, (self.x.len() - 1) as f64);
        let j = (t.floor() as usize).min(self.x.len() - 2);
        (j, t - j as f64)
    }

    /// Piecewise-linear interpolation of the value, clamped to the grid.
    pub fn value_at(&self, x: f64) -> f64 {
        let (j, w) = self.locate(x);
        (1.0 - w) * self.value[j] + w * self.value[j + 1]
    }

    /// Centered difference of the value on the grid.
    pub fn gradient_at(&self, x: f64) -> f64 {
        let (j, w) = self.locate(x);
        let h = self.x[1] - self.x[0];
        let g = |k: usize| {
            let (a, b) = if k == 0 {
                (0, 1)
            } else if k + 1 == self.x.len() {
                (k - 1, k)
            } else {
                (k - 1, k + 1)
            };
            (self.value[b] - self.value[a]) / ((b - a) as f64 * h)
        };
        (1.0 - w) * g(j) + w * g(j + 1)
    }

    pub fn orders_at(&self, j: usize) -> bool {
        self.order_target[j] > self.x[j]
    }

    /// Largest grid point with an order, and its target.
    pub fn reorder_point(&self) -> Option<(f64, f64)> {
        (0..self.x.len()).rev().find(|&j| self.orders_at(j)).map(|j| (self.x[j], self.order_target[j]))
    }
}

const MAX_ITERATIONS: usize = 500;

struct Coefficients {
    diag: f64,
    lower: f64,
    upper: f64,
    /// diagonal for the last point where the second difference is dropped
    last_diag: f64,
    /// diagonal for the first point, where the missing left neighbour is reflected
    first_diag: f64,
}

/// Solves the 1-D QVI on `grid` by policy iteration.
pub fn solve_1d_qvi(params: &CostParams, diff: &DiffusionParams, grid: QviGrid) -> Result<QviSolution> {
    params.validate()?;
    if params.dim() != 1 || diff.dim() != 1 {
        return Err(Error::InvalidArgument("solve_1d_qvi needs a one-item problem".into()));
    }
    if !(grid.x_lo < 0.0 && grid.x_hi > 0.0 && grid.n_points >= 5) {
        return Err(Error::InvalidArgument(format!("bad QVI grid {grid:?}")));
    }
    let mu = diff.mu[0];
    if !(mu >= 0.0) {
        return Err(Error::InvalidArgument("QVI solver needs a non-negative demand drift".into()));
    }
    let (r, c0, c) = (params.r, params.c0, params.c[0]);
    let n = grid.n_points;
    let hx = grid.spacing();
    let half_var = 0.5 * diff.sigma_sq[0] / (hx * hx);
    let drift = mu / hx;
    let k = Coefficients {
        diag: r + drift + 2.0 * half_var,
        lower: -(drift + half_var),
        upper: -half_var,
        last_diag: r + drift,
        first_diag: r + half_var,
    };
    let x: Vec<f64> = (0..n).map(|j| grid.point(j)).collect();
    let f: Vec<f64> = x.iter().map(|&v| params.item_cost(0, v)).collect();
    let scale = 1.0 + f.iter().fold(0.0f64, |a, b| a.max(b.abs())) / r;

    // target[j] = Some(t) means order from j up to t > j
    let mut target: Vec<Option<usize>> = vec![None; n];
    let mut history = Vec::new();
    let mut value;
    let mut iterations = 0;
    loop {
        iterations += 1;
        value = evaluate(&k, &f, &x, &target, c0, c)?;
        history.push(value.clone());
        let best = suffix_best(&value, &x, c);
        let mut changed = false;
        for j in 0..n {
            let cont = row_residual(&k, &value, &f, j) / row_diag(&k, j, n);
            let (t, mv) = match best[j] {
                Some(t) => (Some(t), value[t] + c0 + c * (x[t] - x[j])),
                None => (None, f64::INFINITY),
            };
            let interv = value[j] - mv;
            let tol = 1e-12 * scale;
            let next = match target[j] {
                None if interv > cont + tol => t,
                Some(_) if cont > interv + tol => None,
                Some(cur) => {
                    let cur_cost = value[cur] + c0 + c * (x[cur] - x[j]);
                    if mv < cur_cost - tol {
                        t
                    } else {
                        Some(cur)
                    }
                }
                None => None,
            };
            if next != target[j] {
                target[j] = next;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        if iterations >= MAX_ITERATIONS {
            let residual = qvi_residual(&k, &value, &f, &x, c0, c);
            return Err(Error::NonConvergence { iterations, residual });
        }
    }
    if target[n - 1].is_some() || target.iter().any(|t| *t == Some(n - 1)) {
        return Err(Error::GridTooNarrow(format!(
            "order region or order target reaches x_hi = {}",
            grid.x_hi
        )));
    }
    let residual = qvi_residual(&k, &value, &f, &x, c0, c);
    let order_target = (0..n).map(|j| target[j].map_or(x[j], |t| x[t])).collect();
    Ok(QviSolution { x, value, order_target, iterations, residual, history })
}

fn row_diag(k: &Coefficients, j: usize, n: usize) -> f64 {
    if j == 0 {
        k.first_diag
    } else if j + 1 == n {
        k.last_diag
    } else {
        k.diag
    }
}

fn row_lower(k: &Coefficients, j: usize, n: usize) -> f64 {
    if j + 1 == n {
        k.lower - k.upper
    } else {
        k.lower
    }
}

/// `(rV + mu V' - sigma^2/2 V'' - f)_j` on the grid.
fn row_residual(k: &Coefficients, v: &[f64], f: &[f64], j: usize) -> f64 {
    let n = v.len();
    let mut s = row_diag(k, j, n) * v[j] - f[j];
    if j > 0 {
        s += row_lower(k, j, n) * v[j - 1];
    }
    if j + 1 < n {
        s += k.upper * v[j + 1];
    }
    s
}

/// For each `j`, the index `t > j` minimizing `V_t + c x_t`.
fn suffix_best(v: &[f64], x: &[f64], c: f64) -> Vec<Option<usize>> {
    let n = v.len();
    let mut out = vec![None; n];
    let mut best: Option<usize> = None;
    for j in (0..n).rev() {
        out[j] = best;
        let score = v[j] + c * x[j];
        if best.map_or(true, |b| score <= v[b] + c * x[b]) {
            best = Some(j);
        }
    }
    out
}

fn qvi_residual(k: &Coefficients, v: &[f64], f: &[f64], x: &[f64], c0: f64, c: f64) -> f64 {
    let best = suffix_best(v, x, c);
    (0..v.len())
        .map(|j| {
            let cont = row_residual(k, v, f, j) / row_diag(k, j, v.len());
            let interv = best[j].map_or(f64::NEG_INFINITY, |t| v[j] - (v[t] + c0 + c * (x[t] - x[j])));
            cont.max(interv).abs()
        })
        .fold(0.0, f64::max)
}

/// Solves the linear system of a fixed grid policy.
///
/// Ordering rows are eliminated by following each target chain to a
/// non-ordering point; the remaining system is tridiagonal except for the few
/// rows adjacent to the order region, which are handled by a low-rank update.
fn evaluate(k: &Coefficients, f: &[f64], x: &[f64], target: &[Option<usize>], c0: f64, c: f64) -> Result<Vec<f64>> {
    let n = f.len();
    // resolved[j] = (terminal non-ordering index, accumulated cost)
    let mut resolved = vec![(0usize, 0.0f64); n];
    for j in (0..n).rev() {
        resolved[j] = match target[j] {
            None => (j, 0.0),
            Some(t) => {
                let (end, acc) = resolved[t];
                (end, acc + c0 + c * (x[t] - x[j]))
            }
        };
    }
    let mut lo = vec![0.0; n];
    let mut di = vec![1.0; n];
    let mut up = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    // extra (row, col, coef) couplings
    let mut extra: Vec<(usize, usize, f64)> = Vec::new();
    for j in 0..n {
        if target[j].is_some() {
            continue;
        }
        di[j] = row_diag(k, j, n);
        rhs[j] = f[j];
        let mut couple = |nb: usize, coef: f64, slot: &mut f64, rhs_j: &mut f64| {
            if target[nb].is_none() {
                *slot = coef;
            } else {
                let (end, acc) = resolved[nb];
                *rhs_j -= coef * acc;
                extra.push((j, end, coef));
            }
        };
        if j > 0 {
            couple(j - 1, row_lower(k, j, n), &mut lo[j], &mut rhs[j]);
        }
        if j + 1 < n {
            couple(j + 1, k.upper, &mut up[j], &mut rhs[j]);
        }
    }
    let mut v = if extra.is_empty() {
        thomas(&lo, &di, &up, &rhs)?
    } else {
        let mut rows: Vec<usize> = extra.iter().map(|e| e.0).collect();
        rows.sort_unstable();
        rows.dedup();
        let m = rows.len();
        let y = thomas(&lo, &di, &up, &rhs)?;
        let z: Vec<Vec<f64>> = rows
            .iter()
            .map(|&row| {
                let mut e = vec![0.0; n];
                e[row] = 1.0;
                thomas(&lo, &di, &up, &e)
            })
            .collect::<Result<_>>()?;
        let wdot = |a: usize, vec: &[f64]| -> f64 {
            extra.iter().filter(|e| e.0 == rows[a]).map(|e| e.2 * vec[e.1]).sum()
        };
        let mut cap = DMatrix::<f64>::identity(m, m);
        for a in 0..m {
            for b in 0..m {
                cap[(a, b)] += wdot(a, &z[b]);
            }
        }
        let wy = DVector::from_iterator(m, (0..m).map(|a| wdot(a, &y)));
        let sol = cap
            .lu()
            .solve(&wy)
            .ok_or_else(|| Error::Numeric("singular low-rank correction in QVI evaluation".into()))?;
        let mut v = y;
        for b in 0..m {
            for (vi, zi) in v.iter_mut().zip(&z[b]) {
                *vi -= sol[b] * zi;
            }
        }
        v
    };
    for j in 0..n {
        if target[j].is_some() {
            let (end, acc) = resolved[j];
            v[j] = v[end] + acc;
        }
    }
    if v.iter().any(|a| !a.is_finite()) {
        return Err(Error::Numeric("non-finite value in QVI evaluation".into()));
    }
    Ok(v)
}

fn thomas(lo: &[f64], di: &[f64], up: &[f64], rhs: &[f64]) -> Result<Vec<f64>> {
    let n = di.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    let mut denom = di[0];
    if denom == 0.0 {
        return Err(Error::Numeric("singular tridiagonal system".into()));
    }
    cp[0] = up[0] / denom;
    dp[0] = rhs[0] / denom;
    for i in 1..n {
        denom = di[i] - lo[i] * cp[i - 1];
        if denom == 0.0 {
            return Err(Error::Numeric("singular tridiagonal system".into()));
        }
        cp[i] = up[i] / denom;
        dp[i] = (rhs[i] - lo[i] * dp[i - 1]) / denom;
    }
    let mut out = vec![0.0; n];
    out[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        out[i] = dp[i] - cp[i] * out[i + 1];
    }
    Ok(out)
}
