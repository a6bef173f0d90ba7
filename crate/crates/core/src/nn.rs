//! Fully connected ELU networks with batched reverse-mode gradients,
//! forward-mode input Jacobians, Adam and a binary checkpoint format.
//!
//! Parameters live in one flat vector, layer by layer: the weight matrix
//! (`out x in`, row-major) followed by the bias (`out`).

use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;

use crate::error::{check_dim, Error, Result};

#[inline]
fn elu(u: f64) -> f64 {
    if u >= 0.0 {
        u
    } else {
        u.exp_m1()
    }
}

/// Derivative of ELU expressed through its output.
#[inline]
fn elu_grad_from_output(a: f64) -> f64 {
    if a >= 0.0 {
        1.0
    } else {
        a + 1.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    widths: Vec<usize>,
    params: Vec<f64>,
}

/// Activations of every layer for a batch, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct Tape {
    rows: usize,
    acts: Vec<Vec<f64>>,
}

impl Tape {
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Network outputs, `rows x out` row-major.
    pub fn output(&self) -> &[f64] {
        self.acts.last().expect("tape has an input layer")
    }
}

impl Mlp {
    /// Network with the given widths and all parameters zero.
    pub fn zeros(widths: &[usize]) -> Result<Self> {
        if widths.len() < 2 || widths.iter().any(|w| *w == 0) {
            return Err(Error::InvalidArgument(format!("invalid layer widths {widths:?}")));
        }
        let n = widths.windows(2).map(|w| w[1] * (w[0] + 1)).sum();
        Ok(Self { widths: widths.to_vec(), params: vec![0.0; n] })
    }

    /// He-uniform weights on `[-sqrt(6/fan_in), sqrt(6/fan_in)]`, zero biases.
    pub fn he_init<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(widths)?;
        let mut off = 0;
        for l in 0..net.layers() {
            let (fan_in, out) = (net.widths[l], net.widths[l + 1]);
            let bound = (6.0 / fan_in as f64).sqrt();
            for w in &mut net.params[off..off + out * fan_in] {
                *w = rng.gen_range(-bound..=bound);
            }
            off += out * (fan_in + 1);
        }
        Ok(net)
    }

    pub fn from_params(widths: &[usize], params: Vec<f64>) -> Result<Self> {
        let mut net = Self::zeros(widths)?;
        check_dim(net.params.len(), params.len())?;
        if params.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidArgument("non-finite network parameter".into()));
        }
        net.params = params;
        Ok(net)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.widths.last().expect("at least two widths")
    }

    pub fn layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Offsets of the weight matrix and bias of layer `l`.
    fn layer_offsets(&self, l: usize) -> (usize, usize) {
        let off: usize = self.widths.windows(2).take(l).map(|w| w[1] * (w[0] + 1)).sum();
        (off, off + self.widths[l + 1] * self.widths[l])
    }

    /// Weight matrix and bias of layer `l`.
    pub fn layer(&self, l: usize) -> (&[f64], &[f64]) {
        let (w, b) = self.layer_offsets(l);
        let out = self.widths[l + 1];
        (&self.params[w..b], &self.params[b..b + out])
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.forward_batch(x, 1)
    }

    /// Outputs for `rows` inputs stored row-major in `x`.
    pub fn forward_batch(&self, x: &[f64], rows: usize) -> Result<Vec<f64>> {
        check_dim(rows * self.input_dim(), x.len())?;
        let mut cur = x.to_vec();
        for l in 0..self.layers() {
            cur = self.apply_layer(l, &cur, rows);
        }
        Ok(cur)
    }

    /// Forward pass that keeps every layer's activations.
    pub fn forward_tape(&self, x: &[f64], rows: usize) -> Result<Tape> {
        check_dim(rows * self.input_dim(), x.len())?;
        let mut acts = Vec::with_capacity(self.widths.len());
        acts.push(x.to_vec());
        for l in 0..self.layers() {
            let next = self.apply_layer(l, &acts[l], rows);
            acts.push(next);
        }
        Ok(Tape { rows, acts })
    }

    fn apply_layer(&self, l: usize, input: &[f64], rows: usize) -> Vec<f64> {
        let (fan_in, out) = (self.widths[l], self.widths[l + 1]);
        let (w, b) = self.layer(l);
        let mut z = vec![0.0; rows * out];
        for row in z.chunks_exact_mut(out) {
            row.copy_from_slice(b);
        }
        // z += input (rows x in) * w^T (in x out)
        unsafe {
            matrixmultiply::dgemm(
                rows,
                fan_in,
                out,
                1.0,
                input.as_ptr(),
                fan_in as isize,
                1,
                w.as_ptr(),
                1,
                fan_in as isize,
                1.0,
                z.as_mut_ptr(),
                out as isize,
                1,
            );
        }
        if l + 1 < self.layers() {
            for v in &mut z {
                *v = elu(*v);
            }
        }
        z
    }

    /// Accumulates into `grads` the gradient of `sum(upstream .* output)`
    /// with respect to the parameters.
    pub fn backward(&self, tape: &Tape, upstream: &[f64], grads: &mut [f64]) -> Result<()> {
        let rows = tape.rows;
        check_dim(rows * self.output_dim(), upstream.len())?;
        check_dim(self.n_params(), grads.len())?;
        let mut delta = upstream.to_vec();
        for l in (0..self.layers()).rev() {
            let (fan_in, out) = (self.widths[l], self.widths[l + 1]);
            if l + 1 < self.layers() {
                for (d, a) in delta.iter_mut().zip(&tape.acts[l + 1]) {
                    *d *= elu_grad_from_output(*a);
                }
            }
            let (w_off, b_off) = self.layer_offsets(l);
            let input = &tape.acts[l];
            // dW (out x in) += delta^T (out x rows) * input (rows x in)
            unsafe {
                matrixmultiply::dgemm(
                    out,
                    rows,
                    fan_in,
                    1.0,
                    delta.as_ptr(),
                    1,
                    out as isize,
                    input.as_ptr(),
                    fan_in as isize,
                    1,
                    1.0,
                    grads[w_off..].as_mut_ptr(),
                    fan_in as isize,
                    1,
                );
            }
            let gb = &mut grads[b_off..b_off + out];
            for row in delta.chunks_exact(out) {
                for (g, d) in gb.iter_mut().zip(row) {
                    *g += d;
                }
            }
            if l > 0 {
                let w = &self.params[w_off..b_off];
                let mut prev = vec![0.0; rows * fan_in];
                // prev (rows x in) = delta (rows x out) * w (out x in)
                unsafe {
                    matrixmultiply::dgemm(
                        rows,
                        out,
                        fan_in,
                        1.0,
                        delta.as_ptr(),
                        out as isize,
                        1,
                        w.as_ptr(),
                        fan_in as isize,
                        1,
                        0.0,
                        prev.as_mut_ptr(),
                        fan_in as isize,
                        1,
                    );
                }
                delta = prev;
            }
        }
        Ok(())
    }

    /// Output and Jacobian (`out x in`, row-major) at a single input.
    pub fn forward_with_jacobian(&self, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let d = self.input_dim();
        check_dim(d, x.len())?;
        let mut a = x.to_vec();
        // jac is width x d, row-major
        let mut jac = vec![0.0; d * d];
        for i in 0..d {
            jac[i * d + i] = 1.0;
        }
        for l in 0..self.layers() {
            let (fan_in, out) = (self.widths[l], self.widths[l + 1]);
            let (w, b) = self.layer(l);
            let mut z = b.to_vec();
            let mut nj = vec![0.0; out * d];
            for j in 0..out {
                let row = &w[j * fan_in..(j + 1) * fan_in];
                z[j] += row.iter().zip(&a).map(|(p, q)| p * q).sum::<f64>();
                let dst = &mut nj[j * d..(j + 1) * d];
                for (k, wk) in row.iter().enumerate() {
                    if *wk != 0.0 {
                        for (t, s) in dst.iter_mut().zip(&jac[k * d..(k + 1) * d]) {
                            *t += wk * s;
                        }
                    }
                }
            }
            if l + 1 < self.layers() {
                for j in 0..out {
                    z[j] = elu(z[j]);
                    let g = elu_grad_from_output(z[j]);
                    for t in &mut nj[j * d..(j + 1) * d] {
                        *t *= g;
                    }
                }
            }
            a = z;
            jac = nj;
        }
        Ok((a, jac))
    }

    /// Jacobian of the output with respect to the input (`out x in`, row-major).
    pub fn input_jacobian(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.forward_with_jacobian(x).map(|(_, j)| j)
    }

    fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(&(self.widths.len() as u32).to_le_bytes())?;
        for width in &self.widths {
            w.write_all(&(*width as u32).to_le_bytes())?;
        }
        for p in &self.params {
            w.write_all(&p.to_le_bytes())?;
        }
        Ok(())
    }

    fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let n = read_u32(r)? as usize;
        if !(2..=64).contains(&n) {
            return Err(Error::Checkpoint(format!("implausible layer count {n}")));
        }
        let widths = (0..n).map(|_| read_u32(r).map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
        let mut net = Self::zeros(&widths).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mut buf = [0u8; 8];
        for p in &mut net.params {
            r.read_exact(&mut buf).map_err(|e| Error::Checkpoint(format!("truncated parameters: {e}")))?;
            *p = f64::from_le_bytes(buf);
        }
        Ok(net)
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf).map_err(|e| Error::Checkpoint(format!("truncated header: {e}")))?;
    Ok(u32::from_le_bytes(buf))
}

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"SJRPCKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Writes networks in order.
///
/// Layout (little endian): magic `SJRPCKPT`, `u32` version, `u32` network
/// count, then per network a `u32` width count, the `u32` widths and the
/// `f64` parameters in layer order (weights row-major, then bias).
pub fn write_checkpoint(path: impl AsRef<Path>, nets: &[&Mlp]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    out.write_all(CHECKPOINT_MAGIC)?;
    out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    out.write_all(&(nets.len() as u32).to_le_bytes())?;
    for net in nets {
        net.write_to(&mut out)?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> Result<Vec<Mlp>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)
        .map_err(|e| Error::Checkpoint(format!("cannot open {}: {e}", path.display())))?;
    let mut r = std::io::BufReader::new(file);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(|e| Error::Checkpoint(format!("truncated header: {e}")))?;
    if &magic != CHECKPOINT_MAGIC {
        return Err(Error::Checkpoint(format!("{} is not a network checkpoint", path.display())));
    }
    let version = read_u32(&mut r)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported checkpoint version {version}")));
    }
    let n = read_u32(&mut r)? as usize;
    let nets = (0..n).map(|_| Mlp::read_from(&mut r)).collect::<Result<Vec<_>>>()?;
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", rest.len())));
    }
    Ok(nets)
}

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(n_params: usize) -> Self {
        Self {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            step: 0,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            eps: ADAM_EPS,
        }
    }

    /// Bias-corrected Adam update of `params` in place.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        if !(lr > 0.0 && lr.is_finite()) {
            return Err(Error::InvalidArgument(format!("learning rate must be > 0, got {lr}")));
        }
        check_dim(self.m.len(), params.len())?;
        check_dim(self.m.len(), grads.len())?;
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= lr * mh / (vh.sqrt() + self.eps);
        }
        Ok(())
    }
}

/// Applies one Adam step to a network.
pub fn adam_step(net: &mut Mlp, grads: &[f64], state: &mut AdamState, lr: f64) -> Result<()> {
    state.update(net.params_mut(), grads, lr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::demand::path_rng;
    use approx::assert_relative_eq;

    /// Straight-line evaluation written independently of the batched path.
    fn naive_forward(net: &Mlp, x: &[f64]) -> Vec<f64> {
        let mut a = x.to_vec();
        for l in 0..net.layers() {
            let (w, b) = net.layer(l);
            let fan_in = net.widths()[l];
            let mut z: Vec<f64> = (0..b.len())
                .map(|j| b[j] + (0..fan_in).map(|k| w[j * fan_in + k] * a[k]).sum::<f64>())
                .collect();
            if l + 1 < net.layers() {
                z = z.into_iter().map(|u| if u >= 0.0 { u } else { u.exp() - 1.0 }).collect();
            }
            a = z;
        }
        a
    }

    #[test]
    fn he_bound_and_reproducibility() {
        let a = Mlp::he_init(&[6, 5, 1], &mut path_rng(1, 0)).unwrap();
        let (w, b) = a.layer(0);
        assert!(w.iter().all(|v| v.abs() <= 1.0));
        assert!(b.iter().all(|v| *v == 0.0));
        let again = Mlp::he_init(&[6, 5, 1], &mut path_rng(1, 0)).unwrap();
        assert_eq!(a, again);
        assert!(Mlp::he_init(&[3, 0, 1], &mut path_rng(1, 0)).is_err());
    }

    #[test]
    fn he_variance() {
        let net = Mlp::he_init(&[500, 200, 1], &mut path_rng(5, 0)).unwrap();
        let (w, _) = net.layer(0);
        let var = w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64;
        assert_relative_eq!(var, 2.0 / 500.0, max_relative = 0.05);
    }

    #[test]
    fn zero_net_outputs_zero() {
        let net = Mlp::zeros(&[3, 4, 2]).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn single_linear_layer() {
        let net = Mlp::from_params(&[2, 2], vec![1.0, 2.0, 3.0, 4.0, 0.5, -0.5]).unwrap();
        assert_eq!(net.forward(&[1.0, 1.0]).unwrap(), vec![3.5, 6.5]);
        assert_eq!(net.input_jacobian(&[7.0, -3.0]).unwrap(), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn batched_matches_naive() {
        let net = Mlp::he_init(&[3, 17, 9, 2], &mut path_rng(2, 0)).unwrap();
        let mut rng = path_rng(2, 1);
        let x: Vec<f64> = (0..3 * 11).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let out = net.forward_batch(&x, 11).unwrap();
        for r in 0..11 {
            let naive = naive_forward(&net, &x[3 * r..3 * r + 3]);
            for k in 0..2 {
                assert!((out[2 * r + k] - naive[k]).abs() <= 1e-13 * (1.0 + naive[k].abs()));
            }
        }
    }

    #[test]
    fn linear_squared_loss_gradient() {
        // loss = 0.5 (w x + b - y)^2
        let net = Mlp::from_params(&[2, 1], vec![0.5, -1.0, 0.25]).unwrap();
        let (x, y) = ([2.0, 3.0], 1.0);
        let tape = net.forward_tape(&x, 1).unwrap();
        let e = tape.output()[0] - y;
        let mut g = vec![0.0; 3];
        net.backward(&tape, &[e], &mut g).unwrap();
        assert_eq!(g, vec![e * 2.0, e * 3.0, e]);
    }

    #[test]
    fn constant_loss_zero_gradient() {
        let net = Mlp::he_init(&[2, 4, 1], &mut path_rng(3, 0)).unwrap();
        let tape = net.forward_tape(&[0.3, 0.1], 1).unwrap();
        let mut g = vec![0.0; net.n_params()];
        net.backward(&tape, &[0.0], &mut g).unwrap();
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn parameter_gradient_matches_finite_differences() {
        let net = Mlp::he_init(&[2, 8, 6, 3], &mut path_rng(4, 0)).unwrap();
        let mut rng = path_rng(4, 1);
        let rows = 5;
        let x: Vec<f64> = (0..2 * rows).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let wts: Vec<f64> = (0..3 * rows).map(|_| rng.gen_range(-1.0..1.0)).collect();
        // loss = sum(wts .* out^2) / 2
        let loss = |n: &Mlp| {
            let out = n.forward_batch(&x, rows).unwrap();
            out.iter().zip(&wts).map(|(o, w)| 0.5 * w * o * o).sum::<f64>()
        };
        let tape = net.forward_tape(&x, rows).unwrap();
        let up: Vec<f64> = tape.output().iter().zip(&wts).map(|(o, w)| w * o).collect();
        let mut g = vec![0.0; net.n_params()];
        net.backward(&tape, &up, &mut g).unwrap();
        for i in 0..net.n_params() {
            let h = 1e-6;
            let mut p = net.clone();
            p.params_mut()[i] += h;
            let mut m = net.clone();
            m.params_mut()[i] -= h;
            let fd = (loss(&p) - loss(&m)) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-5 * fd.abs().max(1e-3), "param {i}: fd {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn jacobian_matches_finite_differences_and_reverse_mode() {
        let net = Mlp::he_init(&[3, 10, 10, 2], &mut path_rng(6, 0)).unwrap();
        let x = [0.4, -1.2, 0.9];
        let jac = net.input_jacobian(&x).unwrap();
        for k in 0..3 {
            let h = 1e-6;
            let mut xp = x;
            xp[k] += h;
            let mut xm = x;
            xm[k] -= h;
            let (fp, fm) = (net.forward(&xp).unwrap(), net.forward(&xm).unwrap());
            for o in 0..2 {
                let fd = (fp[o] - fm[o]) / (2.0 * h);
                assert!((fd - jac[o * 3 + k]).abs() <= 1e-5 * fd.abs().max(1e-3));
            }
        }
        // row o equals the input gradient of output o by reverse mode through a
        // linear first layer prepended as an identity
        let tape = net.forward_tape(&x, 1).unwrap();
        for o in 0..2 {
            let mut up = vec![0.0; 2];
            up[o] = 1.0;
            let mut g = vec![0.0; net.n_params()];
            net.backward(&tape, &up, &mut g).unwrap();
            // d out / d W0[j][k] = delta_j x_k, so delta_j = g_b0[j] and d out/d x_k = sum_j delta_j W0[j][k]
            let (w0, _) = net.layer(0);
            let width = net.widths()[1];
            let b0 = &g[width * 3..width * 4];
            for k in 0..3 {
                let rev: f64 = (0..width).map(|j| b0[j] * w0[j * 3 + k]).sum();
                assert_relative_eq!(rev, jac[o * 3 + k], max_relative = 1e-12, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn scalar_jacobian_equals_reverse_gradient() {
        let net = Mlp::he_init(&[2, 7, 1], &mut path_rng(8, 0)).unwrap();
        let (y, jac) = net.forward_with_jacobian(&[0.2, 0.7]).unwrap();
        assert_relative_eq!(y[0], net.forward(&[0.2, 0.7]).unwrap()[0], max_relative = 1e-14);
        assert_eq!(jac.len(), 2);
    }

    #[test]
    fn adam_first_step_by_hand() {
        let mut net = Mlp::from_params(&[1, 1], vec![0.0, 0.0]).unwrap();
        let mut st = AdamState::new(2);
        adam_step(&mut net, &[1.0, 0.0], &mut st, 1e-3).unwrap();
        // m_hat = 1, v_hat = 1: step = lr / (1 + eps)
        assert_relative_eq!(net.params()[0], -1e-3 / (1.0 + 1e-8), max_relative = 1e-14);
        assert_eq!(net.params()[1], 0.0);
        assert_eq!(st.step, 1);
    }

    #[test]
    fn adam_bounded_steps() {
        let mut net = Mlp::from_params(&[1, 1], vec![0.0, 0.0]).unwrap();
        let mut st = AdamState::new(2);
        let mut last = 0.0;
        for _ in 0..200 {
            adam_step(&mut net, &[3.0, 0.0], &mut st, 1e-2).unwrap();
            let p = net.params()[0];
            assert!((p - last).abs() <= 1e-2 * (1.0 + 1e-9));
            last = p;
        }
        assert!(adam_step(&mut net, &[0.0, 0.0], &mut st, 0.0).is_err());
        let before = net.params().to_vec();
        let mut fresh = AdamState::new(2);
        adam_step(&mut net, &[0.0, 0.0], &mut fresh, 1e-3).unwrap();
        assert_eq!(net.params(), &before[..]);
        assert_eq!(fresh.step, 1);
    }

    #[test]
    fn checkpoint_roundtrip_is_bit_identical() {
        let h = Mlp::he_init(&[2, 5, 1], &mut path_rng(9, 0)).unwrap();
        let g = Mlp::he_init(&[2, 5, 2], &mut path_rng(9, 1)).unwrap();
        let dir = std::env::temp_dir().join(format!("sjrp-ckpt-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("net.ckpt");
        write_checkpoint(&path, &[&h, &g]).unwrap();
        let back = read_checkpoint(&path).unwrap();
        assert_eq!(back, vec![h.clone(), g]);
        let x = [0.3, -0.8];
        assert_eq!(back[0].forward(&x).unwrap()[0].to_bits(), h.forward(&x).unwrap()[0].to_bits());
        std::fs::write(&path, b"garbage!").unwrap();
        assert!(matches!(read_checkpoint(&path), Err(Error::Checkpoint(_))));
        std::fs::remove_dir_all(&dir).unwrap();
    }
}
