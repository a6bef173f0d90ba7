//! Box-constrained limited-memory quasi-Newton minimization with a
//! projected backtracking line search.

use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxOptions {
    pub memory: usize,
    pub max_iterations: usize,
    /// Stop when the projected gradient's max-norm falls below this.
    pub gradient_tol: f64,
}

impl Default for BoxOptions {
    fn default() -> Self {
        Self { memory: 10, max_iterations: 500, gradient_tol: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxMinimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient: Vec<f64>,
    pub iterations: usize,
    /// Projected gradient norm reached the tolerance.
    pub converged: bool,
}

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for i in 0..x.len() {
        x[i] = x[i].clamp(lo[i], hi[i]);
    }
}

fn projected_gradient_norm(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    (0..x.len()).map(|i| (x[i] - (x[i] - g[i]).clamp(lo[i], hi[i])).abs()).fold(0.0, f64::max)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Minimizes `f` over the box `[lo, hi]` starting from `x0` (projected).
/// `f` returns the value and a descent gradient.
pub fn minimize_box(
    mut f: impl FnMut(&[f64]) -> Result<(f64, Vec<f64>)>,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    opts: BoxOptions,
) -> Result<BoxMinimum> {
    let n = x0.len();
    check_dim(n, lo.len())?;
    check_dim(n, hi.len())?;
    if (0..n).any(|i| !(lo[i] <= hi[i])) {
        return Err(Error::InvalidArgument("box lower bound exceeds upper bound".into()));
    }
    let mut x = x0.to_vec();
    project(&mut x, lo, hi);
    let (mut fx, mut g) = f(&x)?;
    check_dim(n, g.len())?;
    let mut s_hist: Vec<Vec<f64>> = Vec::new();
    let mut y_hist: Vec<Vec<f64>> = Vec::new();
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        if projected_gradient_norm(&x, &g, lo, hi) <= opts.gradient_tol {
            return Ok(BoxMinimum { x, value: fx, gradient: g, iterations, converged: true });
        }
        iterations += 1;
        // variables held at a bound by the gradient
        let free: Vec<bool> =
            (0..n).map(|i| !((x[i] <= lo[i] && g[i] > 0.0) || (x[i] >= hi[i] && g[i] < 0.0))).collect();
        let masked = |v: &[f64]| -> Vec<f64> { v.iter().zip(&free).map(|(a, f)| if *f { *a } else { 0.0 }).collect() };
        let mut dir = two_loop(&masked(&g), &s_hist, &y_hist, &free);
        let mut steepest = s_hist.is_empty();
        if dot(&dir, &g) >= 0.0 {
            dir = masked(&g).iter().map(|v| -v).collect();
            steepest = true;
        }
        let mut accepted = None;
        for attempt in 0..2 {
            let gnorm = dir.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            let mut t = if steepest && s_hist.is_empty() { 1.0f64.min(1.0 / gnorm.max(1e-300)) } else { 1.0 };
            for _ in 0..60 {
                let mut xn: Vec<f64> = (0..n).map(|i| x[i] + t * dir[i]).collect();
                project(&mut xn, lo, hi);
                let step: Vec<f64> = (0..n).map(|i| xn[i] - x[i]).collect();
                let decrease = dot(&g, &step);
                if step.iter().all(|v| *v == 0.0) {
                    break;
                }
                let (fn_, gn) = f(&xn)?;
                if fn_.is_finite() && fn_ <= fx + 1e-4 * decrease.min(0.0) {
                    accepted = Some((xn, fn_, gn, step));
                    break;
                }
                t *= 0.5;
            }
            if accepted.is_some() || steepest || attempt == 1 {
                break;
            }
            s_hist.clear();
            y_hist.clear();
            dir = masked(&g).iter().map(|v| -v).collect();
            steepest = true;
        }
        let Some((xn, fn_, gn, step)) = accepted else {
            return Ok(BoxMinimum { x, value: fx, gradient: g, iterations, converged: false });
        };
        let yv: Vec<f64> = (0..n).map(|i| gn[i] - g[i]).collect();
        if dot(&step, &yv) > 1e-12 * dot(&yv, &yv).sqrt() * dot(&step, &step).sqrt() {
            s_hist.push(step);
            y_hist.push(yv);
            if s_hist.len() > opts.memory {
                s_hist.remove(0);
                y_hist.remove(0);
            }
        }
        x = xn;
        fx = fn_;
        g = gn;
    }
    let converged = projected_gradient_norm(&x, &g, lo, hi) <= opts.gradient_tol;
    Ok(BoxMinimum { x, value: fx, gradient: g, iterations, converged })
}

/// `-H g` on the free coordinates using the limited-memory inverse Hessian.
fn two_loop(g: &[f64], s_hist: &[Vec<f64>], y_hist: &[Vec<f64>], free: &[bool]) -> Vec<f64> {
    let mask = |v: &[f64]| -> Vec<f64> { v.iter().zip(free).map(|(a, f)| if *f { *a } else { 0.0 }).collect() };
    let mut q = g.to_vec();
    let m = s_hist.len();
    let mut alpha = vec![0.0; m];
    let ss: Vec<Vec<f64>> = s_hist.iter().map(|s| mask(s)).collect();
    let ys: Vec<Vec<f64>> = y_hist.iter().map(|y| mask(y)).collect();
    let rho: Vec<f64> = (0..m).map(|k| dot(&ys[k], &ss[k])).collect();
    for k in (0..m).rev() {
        if rho[k] <= 0.0 {
            continue;
        }
        alpha[k] = dot(&ss[k], &q) / rho[k];
        for (qi, yi) in q.iter_mut().zip(&ys[k]) {
            *qi -= alpha[k] * yi;
        }
    }
    if let Some(k) = (0..m).rev().find(|&k| rho[k] > 0.0) {
        let gamma = rho[k] / dot(&ys[k], &ys[k]);
        q.iter_mut().for_each(|v| *v *= gamma);
    }
    for k in 0..m {
        if rho[k] <= 0.0 {
            continue;
        }
        let beta = dot(&ys[k], &q) / rho[k];
        for (qi, si) in q.iter_mut().zip(&ss[k]) {
            *qi += (alpha[k] - beta) * si;
        }
    }
    mask(&q).into_iter().map(|v| -v).collect()
}
