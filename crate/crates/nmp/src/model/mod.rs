//! The neural motion planner network: a five-block convolutional backbone
//! over the BEV raster, a perception header (anchor scores + per-timestep
//! box regression), and a cost-volume header producing T planar cost maps
//! at input resolution, clipped to +-1000.

pub mod anchors;
pub mod detect;
pub mod loss;

use crate::net::store::{Init, ParamStore, StoreError};
use crate::net::{Graph, NodeId, Tensor4};
use crate::scalar::Real;
use anchors::AnchorConfig;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("input {h}x{w} not divisible by the downsample rate {rate}")]
    IndivisibleInput { h: usize, w: usize, rate: usize },
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct ModelConfig {
    pub block_layers: [usize; 5],
    pub block_filters: [usize; 5],
    /// Feature-map resolution relative to the input. The backbone pools
    /// three times internally; all block outputs are resized to 1/rate
    /// before the final block.
    pub downsample: usize,
    /// Planning horizon steps (cost-volume channels).
    pub t_steps: usize,
    /// Seconds between planning steps.
    pub dt: f64,
    pub cost_clip: f64,
    /// Channel widths of the two cost-head deconvolutions.
    pub cost_channels: [usize; 2],
    pub anchors: AnchorConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig::desk()
    }
}

impl ModelConfig {
    /// CPU-trainable preset.
    pub fn desk() -> Self {
        ModelConfig {
            block_layers: [1, 1, 2, 2, 2],
            block_filters: [16, 16, 32, 32, 64],
            downsample: 4,
            t_steps: 6,
            dt: 0.5,
            cost_clip: 1000.0,
            cost_channels: [32, 16],
            anchors: AnchorConfig::default(),
        }
    }

    /// Full-scale preset with the original block sizes.
    pub fn full() -> Self {
        ModelConfig {
            block_layers: [2, 2, 3, 6, 5],
            block_filters: [32, 64, 128, 256, 256],
            cost_channels: [128, 64],
            ..ModelConfig::desk()
        }
    }

    pub fn anchors_per_location(&self) -> usize {
        self.anchors.per_location()
    }

    /// Channel of regression component `comp` for anchor `k` at timestep
    /// `t` in the (1, A*6*T, Hf, Wf) regression tensor.
    pub fn reg_channel(&self, k: usize, t: usize, comp: usize) -> usize {
        (k * self.t_steps + t) * 6 + comp
    }
}

/// Node handles of one forward pass plus the parameter bindings needed to
/// pull gradients back out of the graph.
pub struct Forward {
    pub bindings: Vec<(String, NodeId)>,
    pub features: NodeId,
    pub cls_logits: NodeId,
    pub reg: NodeId,
    pub cost: NodeId,
}

pub struct NmpModel {
    pub config: ModelConfig,
}

struct NetBuilder<'a, S: Real> {
    g: &'a mut Graph<S>,
    store: &'a mut ParamStore<S>,
    bindings: Vec<(String, NodeId)>,
    train: bool,
}

impl<'a, S: Real> NetBuilder<'a, S> {
    fn param(&mut self, name: &str, shape: (usize, usize, usize, usize), init: Init) -> NodeId {
        let value = self.store.get_or_init(name, shape, init);
        let id = self.g.leaf(value, self.train);
        self.bindings.push((name.to_string(), id));
        id
    }

    fn conv(&mut self, name: &str, x: NodeId, cout: usize, k: usize, pad: usize) -> NodeId {
        let cin = self.g.value(x).c;
        let w = self.param(&format!("{name}_w"), (cout, cin, k, k), Init::HeUniform);
        let b = self.param(&format!("{name}_b"), (cout, 1, 1, 1), Init::Zero);
        self.g.conv2d(x, w, b, 1, pad)
    }

    fn conv_relu(&mut self, name: &str, x: NodeId, cout: usize) -> NodeId {
        let y = self.conv(name, x, cout, 3, 1);
        self.g.relu(y)
    }

    /// 3x3 stride-2 deconvolution with output padding 1: doubles H and W.
    fn deconv_relu(&mut self, name: &str, x: NodeId, cout: usize) -> NodeId {
        let cin = self.g.value(x).c;
        let w = self.param(&format!("{name}_w"), (cin, cout, 3, 3), Init::HeUniform);
        let b = self.param(&format!("{name}_b"), (cout, 1, 1, 1), Init::Zero);
        let y = self.g.deconv2d(x, w, b, 2, 1, 1);
        self.g.relu(y)
    }
}

impl NmpModel {
    pub fn new(config: ModelConfig) -> Self {
        NmpModel { config }
    }

    /// Build the full forward graph. With `train` false the parameters are
    /// graph constants and backward never reaches them.
    pub fn forward<S: Real>(
        &self,
        g: &mut Graph<S>,
        store: &mut ParamStore<S>,
        input: Tensor4<S>,
        train: bool,
    ) -> Result<Forward, ModelError> {
        let cfg = &self.config;
        let (h, w) = (input.h, input.w);
        if h % cfg.downsample != 0 || w % cfg.downsample != 0 {
            return Err(ModelError::IndivisibleInput {
                h,
                w,
                rate: cfg.downsample,
            });
        }
        let (fh, fw) = (h / cfg.downsample, w / cfg.downsample);
        let mut b = NetBuilder {
            g,
            store,
            bindings: Vec::new(),
            train,
        };
        let x = b.g.leaf(input, false);

        // Blocks 1-4 with max-pooling between them; keep each block's
        // output for the multi-scale concat.
        let mut cur = x;
        let mut block_outputs = Vec::with_capacity(4);
        for block in 0..4 {
            for layer in 0..cfg.block_layers[block] {
                cur = b.conv_relu(
                    &format!("b{}_c{}", block + 1, layer + 1),
                    cur,
                    cfg.block_filters[block],
                );
            }
            block_outputs.push(cur);
            if block < 3 {
                cur = b.g.maxpool2d(cur, 2, 2);
            }
        }
        let resized: Vec<NodeId> = block_outputs
            .iter()
            .map(|&id| b.g.bilinear_resize(id, fh, fw))
            .collect();
        let mut features = b.g.concat_channels(&resized);
        for layer in 0..cfg.block_layers[4] {
            features = b.conv_relu(&format!("b5_c{}", layer + 1), features, cfg.block_filters[4]);
        }

        // Perception header: anchor scores and per-timestep regressions.
        let a = cfg.anchors_per_location();
        let cls_hidden = b.conv_relu("cls_c1", features, cfg.block_filters[4]);
        let cls_logits = b.conv("cls_out", cls_hidden, a, 1, 0);
        let reg_hidden = b.conv_relu("reg_c1", features, cfg.block_filters[4]);
        let reg = b.conv("reg_out", reg_hidden, a * 6 * cfg.t_steps, 1, 0);

        // Cost-volume header: two stride-2 deconvolutions back to input
        // resolution, then a T-channel projection and the clip.
        let d1 = b.deconv_relu("cost_d1", features, cfg.cost_channels[0]);
        let c1 = b.conv_relu("cost_c1", d1, cfg.cost_channels[0]);
        let d2 = b.deconv_relu("cost_d2", c1, cfg.cost_channels[1]);
        let c2 = b.conv_relu("cost_c2", d2, cfg.cost_channels[1]);
        let raw = b.conv("cost_out", c2, cfg.t_steps, 3, 1);
        let clip = S::of(cfg.cost_clip);
        let cost = b.g.clip(raw, -clip, clip);

        Ok(Forward {
            bindings: b.bindings,
            features,
            cls_logits,
            reg,
            cost,
        })
    }
}

/// Pull parameter gradients out of a finished backward pass, summing over
/// parameters bound more than once.
/// View a BEV raster as a single-batch NCHW tensor; both store channels
/// row-major, so this is a straight copy.
pub fn bev_to_tensor<S: Real>(bev: &crate::bev::BevTensor<S>) -> Tensor4<S> {
    Tensor4::from_vec(1, bev.c, bev.h, bev.w, bev.data.clone())
}

pub fn collect_param_grads<S: Real>(
    g: &mut Graph<S>,
    bindings: &[(String, NodeId)],
) -> BTreeMap<String, Tensor4<S>> {
    let mut out: BTreeMap<String, Tensor4<S>> = BTreeMap::new();
    for (name, id) in bindings {
        if let Some(grad) = g.take_grad(*id) {
            match out.get_mut(name) {
                Some(acc) => {
                    for (a, d) in acc.data.iter_mut().zip(grad.data) {
                        *a += d;
                    }
                }
                None => {
                    out.insert(name.clone(), grad);
                }
            }
        }
    }
    out
}
