//! Forward and backward passes.
//!
//! Rows are processed in blocks of [`CHUNK`] so the `rows x width`
//! intermediates stay cache resident. Gradients are accumulated per group of
//! [`GROUP`] rows; groups may run in parallel and are combined by a pairwise
//! tree sum in group order, so the result does not depend on the thread count.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, ArrayView2, ArrayViewMut2};
use rayon::prelude::*;

use super::{NeurVecModel, RationalCoeffs};
use crate::error::{Error, Result};
use crate::systems::StateBatch;

const CHUNK: usize = 32;
const GROUP: usize = 256;
/// Lanes of the coefficient-gradient accumulators.
const LANES: usize = 4;

/// Reusable buffers for inference.
#[derive(Default)]
pub struct ForwardScratch {
    z: Array2<f64>,
    h: Array2<f64>,
    inv_q: Array2<f64>,
}

/// Gradient buffers with the same shapes as the model parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct Grads {
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    pub wa: Array2<f64>,
    pub a: [f64; 4],
    pub b: [f64; 3],
}

impl Grads {
    pub fn zeros_like(model: &NeurVecModel) -> Self {
        Self {
            w1: Array2::zeros(model.w1.raw_dim()),
            b1: Array1::zeros(model.b1.raw_dim()),
            wa: Array2::zeros(model.wa.raw_dim()),
            a: [0.0; 4],
            b: [0.0; 3],
        }
    }

    /// Tensors in the same order as [`NeurVecModel::params`].
    pub fn slices(&self) -> [&[f64]; 5] {
        [
            self.w1.as_slice().expect("standard layout"),
            self.b1.as_slice().expect("standard layout"),
            self.wa.as_slice().expect("standard layout"),
            &self.a,
            &self.b,
        ]
    }

    fn add(mut self, other: &Grads) -> Grads {
        self.w1 += &other.w1;
        self.b1 += &other.b1;
        self.wa += &other.wa;
        for (x, y) in self.a.iter_mut().zip(&other.a) {
            *x += y;
        }
        for (x, y) in self.b.iter_mut().zip(&other.b) {
            *x += y;
        }
        self
    }
}

/// Pre-activations, reciprocal denominators and activations for a block of rows.
fn activate(r: &RationalCoeffs, bias: &[f64], z: &mut [f64], inv_q: &mut [f64], h: &mut [f64]) {
    let [a0, a1, a2, a3] = r.a;
    let [b0, b1, b2] = r.b;
    let width = bias.len();
    for ((zr, qr), hr) in z.chunks_exact_mut(width).zip(inv_q.chunks_exact_mut(width)).zip(h.chunks_exact_mut(width)) {
        for (((zj, qj), hj), bj) in zr.iter_mut().zip(qr.iter_mut()).zip(hr.iter_mut()).zip(bias) {
            let x = *zj + bj;
            let inv = 1.0 / ((b2 * x + b1) * x + b0);
            *zj = x;
            *qj = inv;
            *hj = (((a3 * x + a2) * x + a1) * x + a0) * inv;
        }
    }
}

/// Lane-blocked partial sums of `Σ s z^k` (k = 0..3) and `-Σ s h z^k` (k = 0..2).
#[derive(Default)]
struct CoefAcc {
    lanes: [[f64; LANES]; 7],
    tail: [f64; 7],
}

impl CoefAcc {
    fn finish(&self, grads: &mut Grads) {
        for (k, (lane, tail)) in self.lanes.iter().zip(&self.tail).enumerate() {
            let total = (lane[0] + lane[2]) + (lane[1] + lane[3]) + tail;
            if k < 4 {
                grads.a[k] = total;
            } else {
                grads.b[k - 4] = total;
            }
        }
    }
}

/// Turns `dL/dh` in `g` into `dL/dz`, accumulating bias and coefficient
/// gradients along the way.
fn backward_activation(
    r: &RationalCoeffs,
    z: &[f64],
    inv_q: &[f64],
    h: &[f64],
    g: &mut [f64],
    gb1: &mut [f64],
    acc: &mut CoefAcc,
) {
    let [_, a1, a2, a3] = r.a;
    let [_, b1, b2] = r.b;
    let grad = |zj: f64, qj: f64, hj: f64, gj: f64| {
        let sj = gj * qj;
        let dp = (3.0 * a3 * zj + 2.0 * a2) * zj + a1;
        let dq = 2.0 * b2 * zj + b1;
        let z2 = zj * zj;
        let tj = -sj * hj;
        (sj * (dp - hj * dq), [sj, sj * zj, sj * z2, sj * z2 * zj, tj, tj * zj, tj * z2])
    };
    let width = gb1.len();
    let main = width - width % LANES;
    let rows = z.chunks_exact(width).zip(inv_q.chunks_exact(width)).zip(h.chunks_exact(width));
    for (((zr, qr), hr), gr) in rows.zip(g.chunks_exact_mut(width)) {
        for j0 in (0..main).step_by(LANES) {
            for l in 0..LANES {
                let j = j0 + l;
                let (gz, terms) = grad(zr[j], qr[j], hr[j], gr[j]);
                gr[j] = gz;
                gb1[j] += gz;
                for (k, t) in terms.iter().enumerate() {
                    acc.lanes[k][l] += t;
                }
            }
        }
        for j in main..width {
            let (gz, terms) = grad(zr[j], qr[j], hr[j], gr[j]);
            gr[j] = gz;
            gb1[j] += gz;
            for (k, t) in terms.iter().enumerate() {
                acc.tail[k] += t;
            }
        }
    }
}

impl NeurVecModel {
    /// `Wa · σ(W1 u + b1)` for every row.
    pub fn forward(&self, states: &StateBatch) -> Result<StateBatch> {
        if states.d() != self.d() {
            return Err(Error::DimensionMismatch { expected: self.d(), found: states.d() });
        }
        let mut out = StateBatch::zeros(states.n(), states.d());
        self.forward_into(states.as_slice(), out.as_mut_slice(), &mut ForwardScratch::default());
        Ok(out)
    }

    /// Flat-buffer forward pass; `u.len()` must be a multiple of `d`.
    pub fn forward_into(&self, u: &[f64], out: &mut [f64], scratch: &mut ForwardScratch) {
        let d = self.d();
        let n = u.len() / d;
        let width = self.width();
        if scratch.z.dim() != (CHUNK, width) {
            scratch.z = Array2::zeros((CHUNK, width));
            scratch.h = Array2::zeros((CHUNK, width));
            scratch.inv_q = Array2::zeros((CHUNK, width));
        }
        let u = ArrayView2::from_shape((n, d), u).expect("input shape");
        let mut out = ArrayViewMut2::from_shape((n, d), out).expect("output shape");
        let mut start = 0;
        while start < n {
            let end = (start + CHUNK).min(n);
            let rows = end - start;
            let mut z = scratch.z.slice_mut(s![..rows, ..]);
            let mut h = scratch.h.slice_mut(s![..rows, ..]);
            let mut iq = scratch.inv_q.slice_mut(s![..rows, ..]);
            self.hidden_layer(u.slice(s![start..end, ..]), &mut z, &mut iq, &mut h);
            general_mat_mul(1.0, &h, &self.wa.t(), 0.0, &mut out.slice_mut(s![start..end, ..]));
            start = end;
        }
    }

    fn hidden_layer(
        &self,
        u: ArrayView2<f64>,
        z: &mut ArrayViewMut2<f64>,
        iq: &mut ArrayViewMut2<f64>,
        h: &mut ArrayViewMut2<f64>,
    ) {
        general_mat_mul(1.0, &u, &self.w1.t(), 0.0, z);
        activate(
            &self.rational,
            self.b1.as_slice().expect("standard layout"),
            z.as_slice_mut().expect("contiguous block"),
            iq.as_slice_mut().expect("contiguous block"),
            h.as_slice_mut().expect("contiguous block"),
        );
    }

    /// Mean squared error `(1/G) Σ ||forward(u) - target||^2` without gradients.
    pub fn loss(&self, inputs: &[f64], targets: &[f64]) -> Result<f64> {
        let d = self.d();
        check_pair_shapes(d, inputs, targets)?;
        let g = inputs.len() / d;
        let mut pred = vec![0.0; inputs.len()];
        self.forward_into(inputs, &mut pred, &mut ForwardScratch::default());
        let sse: f64 = pred.iter().zip(targets).map(|(p, t)| (p - t) * (p - t)).sum();
        Ok(sse / g as f64)
    }

    /// Loss and exact gradients with respect to every trainable parameter,
    /// including the seven rational coefficients.
    pub fn loss_and_grads(&self, inputs: &[f64], targets: &[f64]) -> Result<(f64, Grads)> {
        let d = self.d();
        check_pair_shapes(d, inputs, targets)?;
        let g = inputs.len() / d;
        if g == 0 {
            return Ok((0.0, Grads::zeros_like(self)));
        }
        let scale = 2.0 / g as f64;
        let groups: Vec<(f64, Grads)> = (0..g.div_ceil(GROUP))
            .into_par_iter()
            .map(|i| {
                let lo = i * GROUP;
                let hi = ((i + 1) * GROUP).min(g);
                self.group_grads(&inputs[lo * d..hi * d], &targets[lo * d..hi * d], scale)
            })
            .collect();
        let (sse, grads) = tree_sum(groups);
        Ok((sse / g as f64, grads))
    }

    fn group_grads(&self, inputs: &[f64], targets: &[f64], scale: f64) -> (f64, Grads) {
        let d = self.d();
        let width = self.width();
        let n = inputs.len() / d;
        let u_all = ArrayView2::from_shape((n, d), inputs).expect("input shape");
        let t_all = ArrayView2::from_shape((n, d), targets).expect("target shape");
        let mut grads = Grads::zeros_like(self);
        let mut z_buf = Array2::<f64>::zeros((CHUNK, width));
        let mut h_buf = Array2::<f64>::zeros((CHUNK, width));
        let mut iq_buf = Array2::<f64>::zeros((CHUNK, width));
        let mut g_buf = Array2::<f64>::zeros((CHUNK, width));
        let mut y_buf = Array2::<f64>::zeros((CHUNK, d));
        let mut coef = CoefAcc::default();
        let mut sse = 0.0;

        let mut start = 0;
        while start < n {
            let end = (start + CHUNK).min(n);
            let rows = end - start;
            let u = u_all.slice(s![start..end, ..]);
            let t = t_all.slice(s![start..end, ..]);
            let mut z = z_buf.slice_mut(s![..rows, ..]);
            let mut h = h_buf.slice_mut(s![..rows, ..]);
            let mut iq = iq_buf.slice_mut(s![..rows, ..]);
            let mut gh = g_buf.slice_mut(s![..rows, ..]);
            let mut y = y_buf.slice_mut(s![..rows, ..]);

            self.hidden_layer(u, &mut z, &mut iq, &mut h);
            general_mat_mul(1.0, &h, &self.wa.t(), 0.0, &mut y);
            for (yv, tv) in y.iter_mut().zip(t.iter()) {
                let e = *yv - tv;
                sse += e * e;
                *yv = scale * e;
            }
            general_mat_mul(1.0, &y.t(), &h, 1.0, &mut grads.wa);
            general_mat_mul(1.0, &y, &self.wa, 0.0, &mut gh);
            backward_activation(
                &self.rational,
                z.as_slice().expect("contiguous block"),
                iq.as_slice().expect("contiguous block"),
                h.as_slice().expect("contiguous block"),
                gh.as_slice_mut().expect("contiguous block"),
                grads.b1.as_slice_mut().expect("standard layout"),
                &mut coef,
            );
            general_mat_mul(1.0, &gh.t(), &u, 1.0, &mut grads.w1);
            start = end;
        }
        coef.finish(&mut grads);
        (sse, grads)
    }
}

fn check_pair_shapes(d: usize, inputs: &[f64], targets: &[f64]) -> Result<()> {
    if inputs.len() != targets.len() || inputs.len() % d != 0 {
        return Err(Error::ShapeMismatch(format!(
            "inputs ({}) and targets ({}) must both be G x {d}",
            inputs.len(),
            targets.len()
        )));
    }
    Ok(())
}

/// Pairwise sum in index order: ((g0 + g1) + (g2 + g3)) + ...
fn tree_sum(mut parts: Vec<(f64, Grads)>) -> (f64, Grads) {
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some((sa, ga)) = it.next() {
            match it.next() {
                Some((sb, gb)) => next.push((sa + sb, ga.add(&gb))),
                None => next.push((sa, ga)),
            }
        }
        parts = next;
    }
    parts.pop().expect("at least one group")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neurvec::test_meta;
    use crate::rng::SeedStream;
    use crate::solvers::Scheme;
    use crate::systems::SystemId;

    fn model(d: usize, width: usize, seed: u64) -> NeurVecModel {
        let mut m = NeurVecModel::init(d, width, test_meta(SystemId::SpringChain, Scheme::Euler), seed);
        // Move the activation away from its reference point so every
        // coefficient contributes.
        m.rational.a = [0.1, 0.45, 0.62, 1.1];
        m.rational.b = [0.9, 0.2, 2.1];
        m
    }

    fn data(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = SeedStream::new(seed, 9);
        (0..len).map(|_| rng.uniform(-1.5, 1.5)).collect()
    }

    fn naive_forward(m: &NeurVecModel, u: &[f64]) -> Vec<f64> {
        let (d, width) = (m.d(), m.width());
        let mut out = Vec::new();
        for row in u.chunks(d) {
            let mut hidden = vec![0.0; width];
            for (j, h) in hidden.iter_mut().enumerate() {
                let mut z = m.b1[j];
                for k in 0..d {
                    z += m.w1[[j, k]] * row[k];
                }
                let [a0, a1, a2, a3] = m.rational.a;
                let [b0, b1, b2] = m.rational.b;
                *h = (a3 * z * z * z + a2 * z * z + a1 * z + a0) / (b2 * z * z + b1 * z + b0);
            }
            for i in 0..d {
                out.push((0..width).map(|j| m.wa[[i, j]] * hidden[j]).sum());
            }
        }
        out
    }

    #[test]
    fn forward_matches_naive_oracle() {
        for (d, width, n) in [(2, 7, 1), (4, 40, 33), (40, 64, 70)] {
            let m = model(d, width, 3);
            let u = data(n * d, 4);
            let fast = m.forward(&StateBatch::from_vec(n, d, u.clone()).unwrap()).unwrap();
            for (a, b) in fast.as_slice().iter().zip(naive_forward(&m, &u)) {
                assert!((a - b).abs() <= 1e-12 * b.abs().max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn zero_output_weights_give_zero() {
        let mut m = model(3, 16, 5);
        m.wa.fill(0.0);
        let out = m.forward(&StateBatch::from_vec(4, 3, data(12, 6)).unwrap()).unwrap();
        assert!(out.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_unit_by_hand() {
        let mut m = NeurVecModel::zeros(1, 1, test_meta(SystemId::SpringChain, Scheme::Euler));
        m.w1[[0, 0]] = 0.5;
        m.b1[0] = 0.1;
        m.wa[[0, 0]] = 2.0;
        let r = m.rational;
        let z: f64 = 0.6;
        let h = r.eval(z);
        let y = 2.0 * h;
        let (loss, g) = m.loss_and_grads(&[1.0], &[0.25]).unwrap();
        let e = y - 0.25;
        assert!((loss - e * e).abs() < 1e-15);
        assert!((g.wa[[0, 0]] - 2.0 * e * h).abs() < 1e-14);
        let dz = 2.0 * e * 2.0 * r.derivative(z);
        assert!((g.b1[0] - dz).abs() < 1e-14);
        assert!((g.w1[[0, 0]] - dz * 1.0).abs() < 1e-14);
        let q = r.denominator(z);
        for k in 0..4 {
            assert!((g.a[k] - 2.0 * e * 2.0 * z.powi(k as i32) / q).abs() < 1e-14);
        }
        for k in 0..3 {
            assert!((g.b[k] + 2.0 * e * 2.0 * h * z.powi(k as i32) / q).abs() < 1e-14);
        }
    }

    #[test]
    fn loss_agrees_with_loss_and_grads() {
        let m = model(4, 32, 7);
        let (u, t) = (data(4 * 300, 8), data(4 * 300, 9));
        let (l, _) = m.loss_and_grads(&u, &t).unwrap();
        let plain = m.loss(&u, &t).unwrap();
        assert!((l - plain).abs() <= 1e-13 * plain);
    }

    #[test]
    fn gradients_do_not_depend_on_thread_count() {
        let m = model(4, 48, 10);
        let (u, t) = (data(4 * 1100, 11), data(4 * 1100, 12));
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| m.loss_and_grads(&u, &t).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn finite_differences_small_model() {
        let m = model(2, 6, 13);
        let (u, t) = (data(2 * 9, 14), data(2 * 9, 15));
        let (_, g) = m.loss_and_grads(&u, &t).unwrap();
        let analytic: Vec<f64> = g.slices().iter().flat_map(|s| s.iter().copied()).collect();
        let mut idx = 0;
        for tensor in 0..5 {
            for k in 0..m.params()[tensor].len() {
                let h = 1e-5;
                let eval = |delta: f64| {
                    let mut p = m.clone();
                    p.params_mut()[tensor][k] += delta;
                    p.loss(&u, &t).unwrap()
                };
                let fd = (eval(h) - eval(-h)) / (2.0 * h);
                let a = analytic[idx];
                assert!((a - fd).abs() <= 1e-6 * a.abs().max(1e-3), "tensor {tensor} index {k}: {a} vs {fd}");
                idx += 1;
            }
        }
    }

    #[test]
    fn shape_errors() {
        let m = model(2, 4, 1);
        assert!(m.loss(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(m.loss_and_grads(&[1.0, 2.0], &[1.0]).is_err());
    }
}
