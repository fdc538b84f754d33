//! Network building blocks with analytic backward passes.
//!
//! Convolutions are evaluated as one GEMM per kernel tap: tap k of a
//! dilated kernel is a plain (out x in) matrix applied to a shifted
//! time slice, accumulated in place. The backward pass reuses the same
//! slicing for input and weight gradients.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array1, Array2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::tensor::{Elem, Tensor3};
use crate::error::{Error, Result};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

fn shape_err(expected: impl Into<String>, got: impl Into<String>) -> Error {
    Error::ShapeMismatch {
        expected: expected.into(),
        got: got.into(),
    }
}

/// Stride-1 1-D convolution with zero "same" padding.
pub struct Conv1d<E: Elem> {
    pub out_ch: usize,
    pub in_ch: usize,
    pub kernel: usize,
    pub dilation: usize,
    /// (out, in, tap)
    pub weight: ndarray::Array3<E>,
    pub bias: Array1<E>,
    pub dweight: ndarray::Array3<E>,
    pub dbias: Array1<E>,
    cache_x: Option<Tensor3<E>>,
}

fn conv_apply<E: Elem>(
    weight: &ndarray::Array3<E>,
    bias: &Array1<E>,
    dilation: usize,
    x: &Tensor3<E>,
) -> Tensor3<E> {
    let (batch, _in_ch, t_len) = x.dim();
    let (out_ch, _, kernel) = weight.dim();
    let left = dilation * (kernel - 1) / 2;
    let mut y = Tensor3::<E>::zeros((batch, out_ch, t_len));
    for o in 0..out_ch {
        y.slice_mut(s![.., o, ..]).fill(bias[o]);
    }
    for b in 0..batch {
        let xb = x.index_axis(Axis(0), b);
        let mut yb = y.index_axis_mut(Axis(0), b);
        for k in 0..kernel {
            let off = (k * dilation) as isize - left as isize;
            let t_lo = (-off).max(0) as usize;
            let t_hi = ((t_len as isize - off).min(t_len as isize)).max(0) as usize;
            if t_lo >= t_hi {
                continue;
            }
            let wk = weight.slice(s![.., .., k]);
            let x_slice = xb.slice(s![
                ..,
                (t_lo as isize + off) as usize..(t_hi as isize + off) as usize
            ]);
            let mut y_slice = yb.slice_mut(s![.., t_lo..t_hi]);
            general_mat_mul(E::one(), &wk, &x_slice, E::one(), &mut y_slice);
        }
    }
    y
}

impl<E: Elem> Conv1d<E> {
    /// Weights and bias drawn uniformly within 1/sqrt(fan_in); the rng
    /// is shared across the model so build order fixes every value.
    pub fn new(
        out_ch: usize,
        in_ch: usize,
        kernel: usize,
        dilation: usize,
        rng: &mut ChaCha8Rng,
    ) -> Self {
        let bound = 1.0 / ((in_ch * kernel) as f64).sqrt();
        let mut draw = || E::from_f64(rng.gen_range(-bound..bound));
        let weight = ndarray::Array3::from_shape_simple_fn((out_ch, in_ch, kernel), &mut draw);
        let bias = Array1::from_shape_simple_fn(out_ch, &mut draw);
        Conv1d {
            out_ch,
            in_ch,
            kernel,
            dilation,
            weight,
            bias,
            dweight: ndarray::Array3::zeros((out_ch, in_ch, kernel)),
            dbias: Array1::zeros(out_ch),
            cache_x: None,
        }
    }

    fn check_input(&self, x: &Tensor3<E>) -> Result<()> {
        if x.dim().1 != self.in_ch {
            return Err(shape_err(
                format!("{} input channels", self.in_ch),
                format!("{}", x.dim().1),
            ));
        }
        Ok(())
    }

    /// Pure forward; never touches the activation cache.
    pub fn infer(&self, x: &Tensor3<E>) -> Result<Tensor3<E>> {
        self.check_input(x)?;
        Ok(conv_apply(&self.weight, &self.bias, self.dilation, x))
    }

    /// Forward that caches the input for `backward`.
    pub fn forward(&mut self, x: &Tensor3<E>) -> Result<Tensor3<E>> {
        self.check_input(x)?;
        let y = conv_apply(&self.weight, &self.bias, self.dilation, x);
        self.cache_x = Some(x.clone());
        Ok(y)
    }

    /// Accumulates weight/bias gradients and returns the input gradient.
    pub fn backward(&mut self, dy: &Tensor3<E>) -> Result<Tensor3<E>> {
        let x = self.cache_x.take().ok_or(Error::MissingForwardCache)?;
        let (batch, _, t_len) = x.dim();
        if dy.dim() != (batch, self.out_ch, t_len) {
            return Err(shape_err(
                format!("({batch}, {}, {t_len})", self.out_ch),
                format!("{:?}", dy.dim()),
            ));
        }
        for o in 0..self.out_ch {
            let sum = dy
                .slice(s![.., o, ..])
                .iter()
                .fold(E::zero(), |acc, &g| acc + g);
            self.dbias[o] = self.dbias[o] + sum;
        }
        let left = self.dilation * (self.kernel - 1) / 2;
        let mut dx = Tensor3::<E>::zeros(x.dim());
        let mut dwk = Array2::<E>::zeros((self.out_ch, self.in_ch));
        for k in 0..self.kernel {
            let off = (k * self.dilation) as isize - left as isize;
            let t_lo = (-off).max(0) as usize;
            let t_hi = ((t_len as isize - off).min(t_len as isize)).max(0) as usize;
            if t_lo >= t_hi {
                continue;
            }
            let (x_lo, x_hi) = ((t_lo as isize + off) as usize, (t_hi as isize + off) as usize);
            dwk.fill(E::zero());
            let wk = self.weight.slice(s![.., .., k]);
            for b in 0..batch {
                let dyb = dy.index_axis(Axis(0), b);
                let dy_slice = dyb.slice(s![.., t_lo..t_hi]);
                let xb = x.index_axis(Axis(0), b);
                let x_slice = xb.slice(s![.., x_lo..x_hi]);
                general_mat_mul(E::one(), &dy_slice, &x_slice.t(), E::one(), &mut dwk);

                let mut dxb = dx.index_axis_mut(Axis(0), b);
                let mut dx_slice = dxb.slice_mut(s![.., x_lo..x_hi]);
                general_mat_mul(E::one(), &wk.t(), &dy_slice, E::one(), &mut dx_slice);
            }
            self.dweight
                .slice_mut(s![.., .., k])
                .zip_mut_with(&dwk, |acc, &g| *acc = *acc + g);
        }
        Ok(dx)
    }

    pub fn zero_grad(&mut self) {
        self.dweight.fill(E::zero());
        self.dbias.fill(E::zero());
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }
}

/// Per-channel batch normalization over (batch, time).
pub struct BatchNorm1d<E: Elem> {
    pub gain: Array1<E>,
    pub bias: Array1<E>,
    pub dgain: Array1<E>,
    pub dbias: Array1<E>,
    pub running_mean: Array1<E>,
    pub running_var: Array1<E>,
    cache: Option<BnCache<E>>,
}

struct BnCache<E: Elem> {
    xhat: Tensor3<E>,
    inv_std: Vec<f64>,
}

impl<E: Elem> BatchNorm1d<E> {
    pub fn new(channels: usize) -> Self {
        BatchNorm1d {
            gain: Array1::from_elem(channels, E::one()),
            bias: Array1::zeros(channels),
            dgain: Array1::zeros(channels),
            dbias: Array1::zeros(channels),
            running_mean: Array1::zeros(channels),
            running_var: Array1::from_elem(channels, E::one()),
            cache: None,
        }
    }

    pub fn channels(&self) -> usize {
        self.gain.len()
    }

    fn check_input(&self, x: &Tensor3<E>) -> Result<()> {
        if x.dim().1 != self.channels() {
            return Err(shape_err(
                format!("{} channels", self.channels()),
                format!("{}", x.dim().1),
            ));
        }
        Ok(())
    }

    /// Normalizes with batch statistics and updates running statistics
    /// (momentum 0.1, unbiased variance in the running estimate).
    pub fn forward_train(&mut self, x: &Tensor3<E>) -> Result<Tensor3<E>> {
        self.check_input(x)?;
        let (batch, channels, t_len) = x.dim();
        if batch < 2 {
            return Err(Error::BatchTooSmall(batch));
        }
        let n = (batch * t_len) as f64;
        let mut y = Tensor3::<E>::zeros(x.dim());
        let mut xhat = Tensor3::<E>::zeros(x.dim());
        let mut inv_stds = Vec::with_capacity(channels);
        for c in 0..channels {
            let xc = x.slice(s![.., c, ..]);
            let mean = xc.iter().map(|&v| v.to_f64()).sum::<f64>() / n;
            let var = xc
                .iter()
                .map(|&v| {
                    let d = v.to_f64() - mean;
                    d * d
                })
                .sum::<f64>()
                / n;
            let inv_std = 1.0 / (var + BN_EPS).sqrt();
            inv_stds.push(inv_std);

            let g = self.gain[c].to_f64();
            let b = self.bias[c].to_f64();
            let mut yc = y.slice_mut(s![.., c, ..]);
            let mut xhat_c = xhat.slice_mut(s![.., c, ..]);
            ndarray::Zip::from(&mut yc)
                .and(&mut xhat_c)
                .and(&xc)
                .for_each(|yv, hv, &xv| {
                    let h = (xv.to_f64() - mean) * inv_std;
                    *hv = E::from_f64(h);
                    *yv = E::from_f64(g * h + b);
                });

            let rm = self.running_mean[c].to_f64();
            let rv = self.running_var[c].to_f64();
            let unbiased = var * n / (n - 1.0);
            self.running_mean[c] = E::from_f64((1.0 - BN_MOMENTUM) * rm + BN_MOMENTUM * mean);
            self.running_var[c] = E::from_f64((1.0 - BN_MOMENTUM) * rv + BN_MOMENTUM * unbiased);
        }
        self.cache = Some(BnCache {
            xhat,
            inv_std: inv_stds,
        });
        Ok(y)
    }

    /// Pure normalization with the stored running statistics.
    pub fn forward_eval(&self, x: &Tensor3<E>) -> Result<Tensor3<E>> {
        self.check_input(x)?;
        let channels = self.channels();
        let mut y = Tensor3::<E>::zeros(x.dim());
        for c in 0..channels {
            let mean = self.running_mean[c].to_f64();
            let inv_std = 1.0 / (self.running_var[c].to_f64() + BN_EPS).sqrt();
            let g = self.gain[c].to_f64();
            let b = self.bias[c].to_f64();
            let xc = x.slice(s![.., c, ..]);
            let mut yc = y.slice_mut(s![.., c, ..]);
            ndarray::Zip::from(&mut yc).and(&xc).for_each(|yv, &xv| {
                *yv = E::from_f64(g * (xv.to_f64() - mean) * inv_std + b);
            });
        }
        Ok(y)
    }

    /// Full backward through the batch statistics.
    pub fn backward(&mut self, dy: &Tensor3<E>) -> Result<Tensor3<E>> {
        let cache = self.cache.take().ok_or(Error::MissingForwardCache)?;
        if dy.dim() != cache.xhat.dim() {
            return Err(shape_err(
                format!("{:?}", cache.xhat.dim()),
                format!("{:?}", dy.dim()),
            ));
        }
        let (batch, channels, t_len) = dy.dim();
        let n = (batch * t_len) as f64;
        let mut dx = Tensor3::<E>::zeros(dy.dim());
        for c in 0..channels {
            let dyc = dy.slice(s![.., c, ..]);
            let hc = cache.xhat.slice(s![.., c, ..]);
            let mut sum_dy = 0.0f64;
            let mut sum_dy_h = 0.0f64;
            ndarray::Zip::from(&dyc).and(&hc).for_each(|&g, &h| {
                sum_dy += g.to_f64();
                sum_dy_h += g.to_f64() * h.to_f64();
            });
            self.dbias[c] = self.dbias[c] + E::from_f64(sum_dy);
            self.dgain[c] = self.dgain[c] + E::from_f64(sum_dy_h);

            let scale = self.gain[c].to_f64() * cache.inv_std[c];
            let mean_dy = sum_dy / n;
            let mean_dy_h = sum_dy_h / n;
            let mut dxc = dx.slice_mut(s![.., c, ..]);
            ndarray::Zip::from(&mut dxc)
                .and(&dyc)
                .and(&hc)
                .for_each(|o, &g, &h| {
                    *o = E::from_f64(scale * (g.to_f64() - mean_dy - h.to_f64() * mean_dy_h));
                });
        }
        Ok(dx)
    }

    pub fn zero_grad(&mut self) {
        self.dgain.fill(E::zero());
        self.dbias.fill(E::zero());
    }

    pub fn param_count(&self) -> usize {
        self.gain.len() + self.bias.len()
    }
}

/// Rectifier with a cached output for the backward mask.
pub struct Relu<E: Elem> {
    cache_y: Option<Tensor3<E>>,
}

impl<E: Elem> Default for Relu<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E: Elem> Relu<E> {
    pub fn new() -> Self {
        Relu { cache_y: None }
    }

    pub fn infer(&self, x: &Tensor3<E>) -> Tensor3<E> {
        x.mapv(|v| v.max(E::zero()))
    }

    pub fn forward(&mut self, x: &Tensor3<E>) -> Tensor3<E> {
        let y = self.infer(x);
        self.cache_y = Some(y.clone());
        y
    }

    pub fn backward(&mut self, dy: &Tensor3<E>) -> Result<Tensor3<E>> {
        let y = self.cache_y.take().ok_or(Error::MissingForwardCache)?;
        if dy.dim() != y.dim() {
            return Err(shape_err(
                format!("{:?}", y.dim()),
                format!("{:?}", dy.dim()),
            ));
        }
        let mut dx = dy.clone();
        // Rectifier outputs are never negative or NaN, so <= 0 is the
        // exact complement of the active region.
        ndarray::Zip::from(&mut dx).and(&y).for_each(|g, &yv| {
            if yv <= E::zero() {
                *g = E::zero();
            }
        });
        Ok(dx)
    }
}

/// Nearest-neighbor repeat along time.
pub fn upsample_nearest<E: Elem>(x: &Tensor3<E>, factor: usize) -> Tensor3<E> {
    let (batch, channels, t_len) = x.dim();
    let mut y = Tensor3::<E>::zeros((batch, channels, t_len * factor));
    for b in 0..batch {
        for c in 0..channels {
            for t in 0..t_len {
                let v = x[(b, c, t)];
                for j in 0..factor {
                    y[(b, c, t * factor + j)] = v;
                }
            }
        }
    }
    y
}

/// Backward of nearest upsampling: sum over each repeated group.
pub fn upsample_backward<E: Elem>(dy: &Tensor3<E>, factor: usize) -> Tensor3<E> {
    let (batch, channels, t_up) = dy.dim();
    let t_len = t_up / factor;
    let mut dx = Tensor3::<E>::zeros((batch, channels, t_len));
    for b in 0..batch {
        for c in 0..channels {
            for t in 0..t_len {
                let mut acc = E::zero();
                for j in 0..factor {
                    acc = acc + dy[(b, c, t * factor + j)];
                }
                dx[(b, c, t)] = acc;
            }
        }
    }
    dx
}

/// Non-overlapping average pooling; time must divide the window.
pub fn avgpool<E: Elem>(x: &Tensor3<E>, window: usize) -> Result<Tensor3<E>> {
    let (batch, channels, t_len) = x.dim();
    if window == 0 || t_len % window != 0 {
        return Err(shape_err(
            format!("time divisible by {window}"),
            format!("{t_len}"),
        ));
    }
    let t_out = t_len / window;
    let inv = E::from_f64(1.0 / window as f64);
    let mut y = Tensor3::<E>::zeros((batch, channels, t_out));
    for b in 0..batch {
        for c in 0..channels {
            for t in 0..t_out {
                let mut acc = E::zero();
                for j in 0..window {
                    acc = acc + x[(b, c, t * window + j)];
                }
                y[(b, c, t)] = acc * inv;
            }
        }
    }
    Ok(y)
}

/// Backward of average pooling: each pooled position gets grad/window.
pub fn avgpool_backward<E: Elem>(dy: &Tensor3<E>, window: usize) -> Tensor3<E> {
    let (batch, channels, t_out) = dy.dim();
    let inv = E::from_f64(1.0 / window as f64);
    let mut dx = Tensor3::<E>::zeros((batch, channels, t_out * window));
    for b in 0..batch {
        for c in 0..channels {
            for t in 0..t_out {
                let g = dy[(b, c, t)] * inv;
                for j in 0..window {
                    dx[(b, c, t * window + j)] = g;
                }
            }
        }
    }
    dx
}

pub fn tanh_forward<E: Elem>(x: &Tensor3<E>) -> Tensor3<E> {
    x.mapv(|v| v.tanh())
}

/// Backward through tanh given its output.
pub fn tanh_backward<E: Elem>(dy: &Tensor3<E>, y: &Tensor3<E>) -> Tensor3<E> {
    let mut dx = dy.clone();
    ndarray::Zip::from(&mut dx).and(y).for_each(|g, &yv| {
        *g = *g * (E::one() - yv * yv);
    });
    dx
}
