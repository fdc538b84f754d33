//! The dilated temporal convolutional stack, assembled and trained
//! without any autodiff framework.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::layers::{
    avgpool, avgpool_backward, tanh_backward, tanh_forward, upsample_backward, upsample_nearest,
    BatchNorm1d, Conv1d, Relu,
};
use super::tensor::{Elem, Tensor3};
use crate::error::{Error, Result};
use crate::frontend::{SEGMENT_FRAMES, SPEC_FRAMES};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    F32,
    F64,
}

fn d_in_channels() -> usize {
    128
}
fn d_pre_filters() -> usize {
    128
}
fn d_dilated_filters() -> usize {
    256
}
fn d_dilations() -> Vec<usize> {
    vec![1, 4, 16]
}
fn d_kernel() -> usize {
    3
}
fn d_upsample() -> usize {
    4
}
fn d_pool() -> usize {
    5
}
fn d_targets() -> usize {
    1
}
fn d_precision() -> Precision {
    Precision::F32
}
fn d_seed() -> u64 {
    7
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub in_channels: usize,
    pub pre_filters: usize,
    pub dilated_filters: usize,
    pub dilations: Vec<usize>,
    pub kernel_dilated: usize,
    pub upsample_factor: usize,
    pub pool_window: usize,
    pub n_targets: usize,
    pub precision: Precision,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            in_channels: d_in_channels(),
            pre_filters: d_pre_filters(),
            dilated_filters: d_dilated_filters(),
            dilations: d_dilations(),
            kernel_dilated: d_kernel(),
            upsample_factor: d_upsample(),
            pool_window: d_pool(),
            n_targets: d_targets(),
            precision: d_precision(),
            seed: d_seed(),
        }
    }
}

impl ModelConfig {
    pub fn with_targets(n_targets: usize) -> Self {
        ModelConfig {
            n_targets,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::BadModelConfig(msg));
        if self.in_channels == 0
            || self.pre_filters == 0
            || self.dilated_filters == 0
            || self.n_targets == 0
        {
            return bad("channel counts must be positive".into());
        }
        if self.dilations.len() != 3 {
            return bad(format!(
                "the stack has three dilated layers, got {} dilations",
                self.dilations.len()
            ));
        }
        if self.dilations[0] == 0 {
            return bad("dilations must be positive".into());
        }
        if !self.dilations.windows(2).all(|w| w[0] < w[1]) {
            return bad(format!("dilations must ascend, got {:?}", self.dilations));
        }
        if self.kernel_dilated.is_multiple_of(2) || self.kernel_dilated == 0 {
            return bad(format!(
                "dilated kernel must be odd for symmetric padding, got {}",
                self.kernel_dilated
            ));
        }
        if self.upsample_factor == 0 || self.pool_window == 0 {
            return bad("upsample factor and pool window must be positive".into());
        }
        let t_up = SPEC_FRAMES * self.upsample_factor;
        if !t_up.is_multiple_of(self.pool_window) || t_up / self.pool_window != SEGMENT_FRAMES {
            return bad(format!(
                "upsample {} / pool {} maps {SPEC_FRAMES} frames to {}, need {SEGMENT_FRAMES}",
                self.upsample_factor,
                self.pool_window,
                t_up as f64 / self.pool_window as f64
            ));
        }
        Ok(())
    }
}

/// The full network with per-layer gradient buffers.
pub struct Model<E: Elem> {
    pub cfg: ModelConfig,
    c1: Conv1d<E>,
    bn1: BatchNorm1d<E>,
    relu1: Relu<E>,
    c2: Conv1d<E>,
    bn2: BatchNorm1d<E>,
    relu2: Relu<E>,
    d1: Conv1d<E>,
    bn3: BatchNorm1d<E>,
    relu3: Relu<E>,
    d2: Conv1d<E>,
    bn4: BatchNorm1d<E>,
    relu4: Relu<E>,
    d3: Conv1d<E>,
    bn5: BatchNorm1d<E>,
    relu5: Relu<E>,
    c3: Conv1d<E>,
    bn6: BatchNorm1d<E>,
    relu6: Relu<E>,
    c4: Conv1d<E>,
    bn7: BatchNorm1d<E>,
    relu7: Relu<E>,
    c5: Conv1d<E>,
    tanh_cache: Option<Tensor3<E>>,
}

/// Builds the stack with seeded initialization; the same config always
/// yields bitwise-identical parameters.
pub fn build_model<E: Elem>(cfg: &ModelConfig) -> Result<Model<E>> {
    Model::build(cfg)
}

impl<E: Elem> Model<E> {
    pub fn build(cfg: &ModelConfig) -> Result<Self> {
        cfg.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let (pre, dil, k) = (cfg.pre_filters, cfg.dilated_filters, cfg.kernel_dilated);
        Ok(Model {
            c1: Conv1d::new(pre, cfg.in_channels, 1, 1, &mut rng),
            bn1: BatchNorm1d::new(pre),
            relu1: Relu::new(),
            c2: Conv1d::new(pre, pre, 1, 1, &mut rng),
            bn2: BatchNorm1d::new(pre),
            relu2: Relu::new(),
            d1: Conv1d::new(dil, pre, k, cfg.dilations[0], &mut rng),
            bn3: BatchNorm1d::new(dil),
            relu3: Relu::new(),
            d2: Conv1d::new(dil, dil, k, cfg.dilations[1], &mut rng),
            bn4: BatchNorm1d::new(dil),
            relu4: Relu::new(),
            d3: Conv1d::new(dil, dil, k, cfg.dilations[2], &mut rng),
            bn5: BatchNorm1d::new(dil),
            relu5: Relu::new(),
            c3: Conv1d::new(dil, dil, 1, 1, &mut rng),
            bn6: BatchNorm1d::new(dil),
            relu6: Relu::new(),
            c4: Conv1d::new(dil, dil, k, 1, &mut rng),
            bn7: BatchNorm1d::new(dil),
            relu7: Relu::new(),
            c5: Conv1d::new(cfg.n_targets, dil, 1, 1, &mut rng),
            tanh_cache: None,
            cfg: cfg.clone(),
        })
    }

    fn check_input(&self, x: &Tensor3<E>) -> Result<(usize, usize)> {
        let (batch, channels, t_len) = x.dim();
        if channels != self.cfg.in_channels {
            return Err(Error::ShapeMismatch {
                expected: format!("{} input channels", self.cfg.in_channels),
                got: format!("{channels}"),
            });
        }
        if batch == 0 || t_len == 0 {
            return Err(Error::EmptySignal);
        }
        let t_up = t_len * self.cfg.upsample_factor;
        if !t_up.is_multiple_of(self.cfg.pool_window) {
            return Err(Error::ShapeMismatch {
                expected: format!(
                    "time length whose x{} upsample divides the pool window {}",
                    self.cfg.upsample_factor, self.cfg.pool_window
                ),
                got: format!("{t_len}"),
            });
        }
        Ok((batch, t_len))
    }

    /// Training forward: batch statistics in every BN, activations
    /// cached for `backward`.
    pub fn forward_train(&mut self, x: &Tensor3<E>) -> Result<Tensor3<E>> {
        let (batch, _) = self.check_input(x)?;
        if batch < 2 {
            return Err(Error::BatchTooSmall(batch));
        }
        let h = self.c1.forward(x)?;
        let h = self.bn1.forward_train(&h)?;
        let h = self.relu1.forward(&h);
        let h = self.c2.forward(&h)?;
        let h = self.bn2.forward_train(&h)?;
        let h = self.relu2.forward(&h);
        let h = self.d1.forward(&h)?;
        let h = self.bn3.forward_train(&h)?;
        let h = self.relu3.forward(&h);
        let h = self.d2.forward(&h)?;
        let h = self.bn4.forward_train(&h)?;
        let h = self.relu4.forward(&h);
        let h = self.d3.forward(&h)?;
        let h = self.bn5.forward_train(&h)?;
        let h = self.relu5.forward(&h);
        let h = self.c3.forward(&h)?;
        let h = self.bn6.forward_train(&h)?;
        let h = self.relu6.forward(&h);
        let h = self.c4.forward(&h)?;
        let h = self.bn7.forward_train(&h)?;
        let h = self.relu7.forward(&h);
        let h = upsample_nearest(&h, self.cfg.upsample_factor);
        let h = self.c5.forward(&h)?;
        let h = avgpool(&h, self.cfg.pool_window)?;
        let y = tanh_forward(&h);
        self.tanh_cache = Some(y.clone());
        Ok(y)
    }

    /// Pure inference with running BN statistics; safe to call
    /// concurrently from multiple readers.
    pub fn forward_eval(&self, x: &Tensor3<E>) -> Result<Tensor3<E>> {
        self.check_input(x)?;
        let h = self.c1.infer(x)?;
        let h = self.bn1.forward_eval(&h)?;
        let h = self.relu1.infer(&h);
        let h = self.c2.infer(&h)?;
        let h = self.bn2.forward_eval(&h)?;
        let h = self.relu2.infer(&h);
        let h = self.d1.infer(&h)?;
        let h = self.bn3.forward_eval(&h)?;
        let h = self.relu3.infer(&h);
        let h = self.d2.infer(&h)?;
        let h = self.bn4.forward_eval(&h)?;
        let h = self.relu4.infer(&h);
        let h = self.d3.infer(&h)?;
        let h = self.bn5.forward_eval(&h)?;
        let h = self.relu5.infer(&h);
        let h = self.c3.infer(&h)?;
        let h = self.bn6.forward_eval(&h)?;
        let h = self.relu6.infer(&h);
        let h = self.c4.infer(&h)?;
        let h = self.bn7.forward_eval(&h)?;
        let h = self.relu7.infer(&h);
        let h = upsample_nearest(&h, self.cfg.upsample_factor);
        let h = self.c5.infer(&h)?;
        let h = avgpool(&h, self.cfg.pool_window)?;
        Ok(tanh_forward(&h))
    }

    /// Backpropagates the loss gradient, accumulating parameter
    /// gradients. Consumes the activation caches, so it must follow a
    /// `forward_train` one-to-one.
    pub fn backward(&mut self, dloss_dy: &Tensor3<E>) -> Result<()> {
        let y = self.tanh_cache.take().ok_or(Error::MissingForwardCache)?;
        if dloss_dy.dim() != y.dim() {
            return Err(Error::ShapeMismatch {
                expected: format!("{:?}", y.dim()),
                got: format!("{:?}", dloss_dy.dim()),
            });
        }
        let g = tanh_backward(dloss_dy, &y);
        let g = avgpool_backward(&g, self.cfg.pool_window);
        let g = self.c5.backward(&g)?;
        let g = upsample_backward(&g, self.cfg.upsample_factor);
        let g = self.relu7.backward(&g)?;
        let g = self.bn7.backward(&g)?;
        let g = self.c4.backward(&g)?;
        let g = self.relu6.backward(&g)?;
        let g = self.bn6.backward(&g)?;
        let g = self.c3.backward(&g)?;
        let g = self.relu5.backward(&g)?;
        let g = self.bn5.backward(&g)?;
        let g = self.d3.backward(&g)?;
        let g = self.relu4.backward(&g)?;
        let g = self.bn4.backward(&g)?;
        let g = self.d2.backward(&g)?;
        let g = self.relu3.backward(&g)?;
        let g = self.bn3.backward(&g)?;
        let g = self.d1.backward(&g)?;
        let g = self.relu2.backward(&g)?;
        let g = self.bn2.backward(&g)?;
        let g = self.c2.backward(&g)?;
        let g = self.relu1.backward(&g)?;
        let g = self.bn1.backward(&g)?;
        let _ = self.c1.backward(&g)?;
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        for conv in [
            &mut self.c1,
            &mut self.c2,
            &mut self.d1,
            &mut self.d2,
            &mut self.d3,
            &mut self.c3,
            &mut self.c4,
            &mut self.c5,
        ] {
            conv.zero_grad();
        }
        for bn in [
            &mut self.bn1,
            &mut self.bn2,
            &mut self.bn3,
            &mut self.bn4,
            &mut self.bn5,
            &mut self.bn6,
            &mut self.bn7,
        ] {
            bn.zero_grad();
        }
    }

    /// Count of trainable scalars; running statistics excluded.
    pub fn param_count(&self) -> usize {
        let convs = [
            &self.c1, &self.c2, &self.d1, &self.d2, &self.d3, &self.c3, &self.c4, &self.c5,
        ];
        let bns = [
            &self.bn1, &self.bn2, &self.bn3, &self.bn4, &self.bn5, &self.bn6, &self.bn7,
        ];
        convs.iter().map(|c| c.param_count()).sum::<usize>()
            + bns.iter().map(|b| b.param_count()).sum::<usize>()
    }

    /// Visits every trainable parameter array with its gradient, in a
    /// fixed order shared by the optimizer and the checkpoint format.
    pub fn visit_params<F: FnMut(&str, &mut [E], &[E])>(&mut self, mut f: F) {
        macro_rules! conv {
            ($name:literal, $layer:expr) => {
                f(
                    concat!($name, ".weight"),
                    $layer.weight.as_slice_mut().expect("owned weights"),
                    $layer.dweight.as_slice().expect("owned grads"),
                );
                f(
                    concat!($name, ".bias"),
                    $layer.bias.as_slice_mut().expect("owned bias"),
                    $layer.dbias.as_slice().expect("owned grads"),
                );
            };
        }
        macro_rules! bn {
            ($name:literal, $layer:expr) => {
                f(
                    concat!($name, ".gain"),
                    $layer.gain.as_slice_mut().expect("owned gain"),
                    $layer.dgain.as_slice().expect("owned grads"),
                );
                f(
                    concat!($name, ".bias"),
                    $layer.bias.as_slice_mut().expect("owned bias"),
                    $layer.dbias.as_slice().expect("owned grads"),
                );
            };
        }
        conv!("c1", self.c1);
        bn!("bn1", self.bn1);
        conv!("c2", self.c2);
        bn!("bn2", self.bn2);
        conv!("d1", self.d1);
        bn!("bn3", self.bn3);
        conv!("d2", self.d2);
        bn!("bn4", self.bn4);
        conv!("d3", self.d3);
        bn!("bn5", self.bn5);
        conv!("c3", self.c3);
        bn!("bn6", self.bn6);
        conv!("c4", self.c4);
        bn!("bn7", self.bn7);
        conv!("c5", self.c5);
    }

    /// Serializes parameters plus BN running statistics as f32 blobs in
    /// checkpoint order.
    pub fn export_blobs(&self) -> Vec<(String, Vec<f32>)> {
        let mut out = Vec::new();
        let conv = |out: &mut Vec<(String, Vec<f32>)>, name: &str, layer: &Conv1d<E>| {
            out.push((
                format!("{name}.weight"),
                layer.weight.iter().map(|v| v.to_f64() as f32).collect(),
            ));
            out.push((
                format!("{name}.bias"),
                layer.bias.iter().map(|v| v.to_f64() as f32).collect(),
            ));
        };
        let bn = |out: &mut Vec<(String, Vec<f32>)>, name: &str, layer: &BatchNorm1d<E>| {
            for (suffix, arr) in [
                ("gain", &layer.gain),
                ("bias", &layer.bias),
                ("running_mean", &layer.running_mean),
                ("running_var", &layer.running_var),
            ] {
                out.push((
                    format!("{name}.{suffix}"),
                    arr.iter().map(|v| v.to_f64() as f32).collect(),
                ));
            }
        };
        conv(&mut out, "c1", &self.c1);
        bn(&mut out, "bn1", &self.bn1);
        conv(&mut out, "c2", &self.c2);
        bn(&mut out, "bn2", &self.bn2);
        conv(&mut out, "d1", &self.d1);
        bn(&mut out, "bn3", &self.bn3);
        conv(&mut out, "d2", &self.d2);
        bn(&mut out, "bn4", &self.bn4);
        conv(&mut out, "d3", &self.d3);
        bn(&mut out, "bn5", &self.bn5);
        conv(&mut out, "c3", &self.c3);
        bn(&mut out, "bn6", &self.bn6);
        conv(&mut out, "c4", &self.c4);
        bn(&mut out, "bn7", &self.bn7);
        conv(&mut out, "c5", &self.c5);
        out
    }

    /// Restores from named blobs, validating every shape; any missing,
    /// extra, or non-finite entry fails the load.
    pub fn import_blobs(&mut self, blobs: &HashMap<String, Vec<f32>>) -> Result<()> {
        let expected = self.export_blobs();
        if blobs.len() != expected.len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} parameter blobs", expected.len()),
                got: format!("{}", blobs.len()),
            });
        }
        let mut staged: Vec<(String, Vec<E>)> = Vec::with_capacity(expected.len());
        for (name, current) in &expected {
            let blob = blobs.get(name).ok_or_else(|| Error::ShapeMismatch {
                expected: format!("blob {name}"),
                got: "missing".into(),
            })?;
            if blob.len() != current.len() {
                return Err(Error::ShapeMismatch {
                    expected: format!("{name} with {} values", current.len()),
                    got: format!("{}", blob.len()),
                });
            }
            if blob.iter().any(|v| !v.is_finite()) {
                return Err(Error::ShapeMismatch {
                    expected: format!("finite values in {name}"),
                    got: "non-finite entry".into(),
                });
            }
            staged.push((
                name.clone(),
                blob.iter().map(|&v| E::from_f64(v as f64)).collect(),
            ));
        }
        for (name, values) in staged {
            self.write_blob(&name, &values);
        }
        Ok(())
    }

    fn write_blob(&mut self, name: &str, values: &[E]) {
        let (layer, field) = name.split_once('.').expect("validated blob name");
        let convs: [(&str, &mut Conv1d<E>); 8] = [
            ("c1", &mut self.c1),
            ("c2", &mut self.c2),
            ("d1", &mut self.d1),
            ("d2", &mut self.d2),
            ("d3", &mut self.d3),
            ("c3", &mut self.c3),
            ("c4", &mut self.c4),
            ("c5", &mut self.c5),
        ];
        for (cname, conv) in convs {
            if cname == layer {
                match field {
                    "weight" => {
                        for (dst, &src) in conv.weight.iter_mut().zip(values) {
                            *dst = src;
                        }
                    }
                    "bias" => {
                        for (dst, &src) in conv.bias.iter_mut().zip(values) {
                            *dst = src;
                        }
                    }
                    _ => unreachable!("validated conv field"),
                }
                return;
            }
        }
        let bns: [(&str, &mut BatchNorm1d<E>); 7] = [
            ("bn1", &mut self.bn1),
            ("bn2", &mut self.bn2),
            ("bn3", &mut self.bn3),
            ("bn4", &mut self.bn4),
            ("bn5", &mut self.bn5),
            ("bn6", &mut self.bn6),
            ("bn7", &mut self.bn7),
        ];
        for (bname, bn) in bns {
            if bname == layer {
                let target = match field {
                    "gain" => &mut bn.gain,
                    "bias" => &mut bn.bias,
                    "running_mean" => &mut bn.running_mean,
                    "running_var" => &mut bn.running_var,
                    _ => unreachable!("validated bn field"),
                };
                for (dst, &src) in target.iter_mut().zip(values) {
                    *dst = src;
                }
                return;
            }
        }
        unreachable!("validated layer name {layer}");
    }
}
