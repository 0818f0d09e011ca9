//! The 18-layer residual speaker classifier.
//!
//! ```text
//! input [N, 257, W, 1]
//! stem: conv 7x7/2 -> BN -> ReLU -> maxpool 3x3/2
//! 4 stages x 2 pre-activation residual blocks (first block of stages 2-4 strides by 2)
//! BN -> ReLU -> global average pool   => embedding
//! dense softmax head                  => logits
//! ```
//!
//! Every batch-norm in the network feeds a ReLU, so none of them carries a
//! gain (the following convolution absorbs it). Convolutions feeding a
//! batch-norm have no bias. Under that convention the parameter counts land
//! on the published per-row figures.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::block::{BlockCache, ResidualBlock};
use crate::error::{Error, Result};
use crate::nn::{
    global_avgpool, global_avgpool_backward, relu, relu_backward, BatchNorm, BnCache, Conv2d, Dense, MaxPool2d,
    Mode, Param, Parameterized, PoolCache, Scalar, Tensor,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub input_height: usize,
    pub input_width: usize,
    pub stem_channels: usize,
    pub stem_kernel: usize,
    pub stage_channels: Vec<usize>,
    pub blocks_per_stage: usize,
    pub num_classes: usize,
}

impl NetworkConfig {
    /// The published architecture: 257x800 input, 64/128/256/512 channels.
    pub fn full(num_classes: usize) -> Self {
        Self {
            input_height: 257,
            input_width: 800,
            stem_channels: 64,
            stem_kernel: 7,
            stage_channels: vec![64, 128, 256, 512],
            blocks_per_stage: 2,
            num_classes,
        }
    }

    /// Reduced preset for laptop-scale runs: 257x200 input, 16/32/64/128.
    pub fn desk(num_classes: usize) -> Self {
        Self {
            input_width: 200,
            stem_channels: 16,
            stage_channels: vec![16, 32, 64, 128],
            ..Self::full(num_classes)
        }
    }

    /// Minimal clone used for end-to-end gradient checks: 17x20 input, 2/2/4/4.
    pub fn tiny(num_classes: usize) -> Self {
        Self {
            input_height: 17,
            input_width: 20,
            stem_channels: 2,
            stem_kernel: 7,
            stage_channels: vec![2, 2, 4, 4],
            blocks_per_stage: 2,
            num_classes,
        }
    }

    pub fn embedding_dim(&self) -> usize {
        *self.stage_channels.last().expect("at least one stage")
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::Config(format!("num_classes = {}, need at least 2", self.num_classes)));
        }
        if self.stage_channels.is_empty() || self.blocks_per_stage == 0 {
            return Err(Error::Config("network needs at least one stage and one block per stage".into()));
        }
        if [self.input_height, self.input_width, self.stem_channels, self.stem_kernel]
            .iter()
            .chain(&self.stage_channels)
            .any(|&v| v == 0)
        {
            return Err(Error::Config("network extents must be positive".into()));
        }
        Ok(())
    }
}

/// Parameter count of one architecture-table row.
#[derive(Debug, Clone, PartialEq)]
pub struct RowCount {
    pub row: String,
    /// `[H, W, C]`, or `[F]` after pooling.
    pub output: Vec<usize>,
    pub params: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParameterCounts {
    pub rows: Vec<RowCount>,
    pub total: usize,
}

impl ParameterCounts {
    pub fn row(&self, name: &str) -> Option<&RowCount> {
        self.rows.iter().find(|r| r.row == name)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network<T> {
    pub config: NetworkConfig,
    pub stem_conv: Conv2d<T>,
    pub stem_bn: BatchNorm<T>,
    pub pool: MaxPool2d,
    pub blocks: Vec<ResidualBlock<T>>,
    pub final_bn: BatchNorm<T>,
    pub head: Dense<T>,
    /// `(layer name, role)` in forward order, e.g. `("layer3", "block1.conv1")`.
    pub topology: Vec<(String, String)>,
}

/// Everything the backward pass needs from a training-mode forward.
pub struct NetCache<T> {
    input: Tensor<T>,
    stem_bn: Option<BnCache<T>>,
    stem_act: Tensor<T>,
    pool: PoolCache,
    blocks: Vec<BlockCache<T>>,
    final_bn: Option<BnCache<T>>,
    final_act: Tensor<T>,
    embedding: Tensor<T>,
}

pub struct ForwardOutput<T> {
    pub logits: Tensor<T>,
    pub embedding: Tensor<T>,
    /// Output dims (batch axis dropped) after each architecture-table row.
    pub trace: Vec<(String, Vec<usize>)>,
    pub cache: Option<NetCache<T>>,
}

fn drop_batch(d: &[usize]) -> Vec<usize> {
    d[1..].to_vec()
}

impl<T: Scalar> Network<T> {
    /// Build with He fan-in initialization from a seeded ChaCha stream.
    pub fn build(config: NetworkConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layer = 0usize;
        let mut topology = Vec::new();
        let mut next = |role: String, topo: &mut Vec<(String, String)>| {
            let n = format!("layer{layer}");
            layer += 1;
            topo.push((n.clone(), role));
            n
        };
        let stem_name = next("stem.conv".into(), &mut topology);
        let mut stem_conv = Conv2d::new(&stem_name, 1, config.stem_channels, config.stem_kernel, 2, false);
        stem_conv.init_he(&mut rng);
        let stem_bn = BatchNorm::new(&next("stem.bn".into(), &mut topology), config.stem_channels, false);

        let mut blocks = Vec::new();
        let mut in_ch = config.stem_channels;
        let mut counter = layer;
        for (s, &ch) in config.stage_channels.iter().enumerate() {
            for b in 0..config.blocks_per_stage {
                let stride = if s > 0 && b == 0 { 2 } else { 1 };
                let idx = blocks.len() + 1;
                let start = counter;
                let mut block = ResidualBlock::new(&mut counter, in_ch, ch, stride);
                block.init(&mut rng);
                let roles = ["bn1", "conv1", "bn2", "conv2", "projection"];
                for (i, l) in (start..counter).enumerate() {
                    topology.push((format!("layer{l}"), format!("block{idx}.{}", roles[i])));
                }
                blocks.push(block);
                in_ch = ch;
            }
        }
        let final_name = format!("layer{counter}");
        topology.push((final_name.clone(), "final.bn".into()));
        let final_bn = BatchNorm::new(&final_name, in_ch, false);
        let head_name = format!("layer{}", counter + 1);
        topology.push((head_name.clone(), "head".into()));
        let mut head = Dense::new(&head_name, in_ch, config.num_classes);
        head.init(&mut rng);

        Ok(Self { config, stem_conv, stem_bn, pool: MaxPool2d::new(3, 2), blocks, final_bn, head, topology })
    }

    pub fn embedding_dim(&self) -> usize {
        self.config.embedding_dim()
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<()> {
        let (_, h, w, c) = x.dims4()?;
        if h != self.config.input_height || w != self.config.input_width || c != 1 {
            return Err(Error::Dimension(format!(
                "network expects [N,{},{},1], got {:?}",
                self.config.input_height,
                self.config.input_width,
                x.dims()
            )));
        }
        Ok(())
    }

    /// Full forward. Training mode uses batch statistics, updates running
    /// statistics and returns a cache for `backward`.
    pub fn forward(&mut self, x: &Tensor<T>, mode: Mode) -> Result<ForwardOutput<T>> {
        self.check_input(x)?;
        let mut trace = Vec::new();
        let h = self.stem_conv.forward(x)?;
        let (b, stem_bn) = self.stem_bn.forward(&h, mode)?;
        let stem_act = relu(&b);
        trace.push(("stem".to_string(), drop_batch(stem_act.dims())));
        let (mut cur, pool) = self.pool.forward(&stem_act)?;
        trace.push(("maxpool".to_string(), drop_batch(cur.dims())));
        let mut block_caches = Vec::with_capacity(self.blocks.len());
        for (i, block) in self.blocks.iter_mut().enumerate() {
            let (y, c) = block.forward(&cur, mode)?;
            if let Some(c) = c {
                block_caches.push(c);
            }
            trace.push((format!("block{}", i + 1), drop_batch(y.dims())));
            cur = y;
        }
        let (fb, final_bn) = self.final_bn.forward(&cur, mode)?;
        let final_act = relu(&fb);
        let embedding = global_avgpool(&final_act)?;
        trace.push(("avgpool".to_string(), drop_batch(embedding.dims())));
        let logits = self.head.forward(&embedding)?;
        trace.push(("softmax".to_string(), drop_batch(logits.dims())));
        let cache = (mode == Mode::Train).then(|| NetCache {
            input: x.clone(),
            stem_bn,
            stem_act,
            pool,
            blocks: block_caches,
            final_bn,
            final_act,
            embedding: embedding.clone(),
        });
        Ok(ForwardOutput { logits, embedding, trace, cache })
    }

    /// Inference-mode forward that leaves the network untouched.
    pub fn infer(&self, x: &Tensor<T>) -> Result<ForwardOutput<T>> {
        self.check_input(x)?;
        let mut trace = Vec::new();
        let a = relu(&self.stem_bn.infer(&self.stem_conv.forward(x)?)?);
        trace.push(("stem".to_string(), drop_batch(a.dims())));
        let (mut cur, _) = self.pool.forward(&a)?;
        trace.push(("maxpool".to_string(), drop_batch(cur.dims())));
        for (i, block) in self.blocks.iter().enumerate() {
            cur = block.infer(&cur)?;
            trace.push((format!("block{}", i + 1), drop_batch(cur.dims())));
        }
        let act = relu(&self.final_bn.infer(&cur)?);
        let embedding = global_avgpool(&act)?;
        trace.push(("avgpool".to_string(), drop_batch(embedding.dims())));
        let logits = self.head.forward(&embedding)?;
        trace.push(("softmax".to_string(), drop_batch(logits.dims())));
        Ok(ForwardOutput { logits, embedding, trace, cache: None })
    }

    /// Backward from logits gradient; accumulates every parameter gradient
    /// and returns the input gradient.
    pub fn backward(&mut self, cache: &NetCache<T>, grad_logits: &Tensor<T>) -> Result<Tensor<T>> {
        let g_emb = self.head.backward(&cache.embedding, grad_logits)?;
        let g_act = global_avgpool_backward(cache.final_act.dims(), &g_emb)?;
        let g_fb = relu_backward(&cache.final_act, &g_act)?;
        let mut g = self.final_bn.backward(cache.final_bn.as_ref().expect("train cache"), &g_fb)?;
        for (block, bc) in self.blocks.iter_mut().zip(&cache.blocks).rev() {
            g = block.backward(bc, &g)?;
        }
        let g_stem_act = self.pool.backward(&cache.pool, &g)?;
        let g_b = relu_backward(&cache.stem_act, &g_stem_act)?;
        let g_h = self.stem_bn.backward(cache.stem_bn.as_ref().expect("train cache"), &g_b)?;
        self.stem_conv.backward(&cache.input, &g_h)
    }

    pub fn batchnorms(&self) -> Vec<&BatchNorm<T>> {
        let mut v = vec![&self.stem_bn];
        for b in &self.blocks {
            v.extend(b.batchnorms());
        }
        v.push(&self.final_bn);
        v
    }

    pub fn batchnorms_mut(&mut self) -> Vec<&mut BatchNorm<T>> {
        let mut v = vec![&mut self.stem_bn];
        for b in self.blocks.iter_mut() {
            v.extend(b.batchnorms_mut());
        }
        v.push(&mut self.final_bn);
        v
    }

    /// Output shapes by shape algebra alone, no arithmetic on data.
    pub fn shape_chain(&self) -> Result<Vec<(String, Vec<usize>)>> {
        let c = &self.config;
        let mut d = vec![1, c.input_height, c.input_width, 1];
        let mut out = Vec::new();
        d = self.stem_conv.output_dims(&d)?;
        out.push(("stem".to_string(), drop_batch(&d)));
        d = self.pool.output_dims(&d)?;
        out.push(("maxpool".to_string(), drop_batch(&d)));
        for (i, b) in self.blocks.iter().enumerate() {
            d = b.output_dims(&d)?;
            out.push((format!("block{}", i + 1), drop_batch(&d)));
        }
        out.push(("avgpool".to_string(), vec![d[3]]));
        out.push(("softmax".to_string(), vec![c.num_classes]));
        Ok(out)
    }

    /// Trainable parameter counts grouped by architecture-table row. The
    /// final batch-norm is reported with the last residual block.
    pub fn count_parameters(&self) -> Result<ParameterCounts> {
        let shapes = self.shape_chain()?;
        let count = |ps: Vec<&Param<T>>| ps.iter().map(|p| p.len()).sum::<usize>();
        let mut rows = Vec::new();
        let mut params_of = vec![count(self.stem_conv.params()) + count(self.stem_bn.params()), 0];
        for b in &self.blocks {
            params_of.push(count(b.params()));
        }
        *params_of.last_mut().unwrap() += count(self.final_bn.params());
        params_of.push(0);
        params_of.push(count(self.head.params()));
        for ((row, output), params) in shapes.into_iter().zip(params_of) {
            rows.push(RowCount { row, output, params });
        }
        let total = rows.iter().map(|r| r.params).sum();
        debug_assert_eq!(total, self.num_parameters());
        Ok(ParameterCounts { rows, total })
    }
}

impl<T: Scalar> Parameterized<T> for Network<T> {
    fn params(&self) -> Vec<&Param<T>> {
        let mut v = self.stem_conv.params();
        v.extend(self.stem_bn.params());
        for b in &self.blocks {
            v.extend(b.params());
        }
        v.extend(self.final_bn.params());
        v.extend(self.head.params());
        v
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut v = self.stem_conv.params_mut();
        v.extend(self.stem_bn.params_mut());
        for b in self.blocks.iter_mut() {
            v.extend(b.params_mut());
        }
        v.extend(self.final_bn.params_mut());
        v.extend(self.head.params_mut());
        v
    }
}
