//! The multi-level convolutional classifier: a shared text encoder over the
//! three feature channels, one softmax head per cell level, joint averaged
//! cross-entropy training with Adam, and combined multi-level inference.

mod combine;
mod io;
mod net;
mod train;

pub use combine::{combine_levels, CombinedScores, InferenceMode, Prediction, DEFAULT_TOP_K};
pub use io::{load_model, save_model, SavedModel};
pub use train::{gold_classes, lr_for_step, OptState, TrainItem, TrainStats, Trainer};

use ndarray::{Array1, Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cellgrid::{self, CellId, LatLng};
use crate::error::{Error, Result};
use crate::features::{EmbeddingTable, FeatureBundle, FeatureConfig};

/// Ordered set of cell levels the model trains and predicts over.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelConfig(Vec<u8>);

impl LevelConfig {
    /// Levels must be strictly increasing, each within [2, 12].
    pub fn new(levels: Vec<u8>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::InvalidArgument("empty level set".into()));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidArgument(format!(
                "levels {levels:?} not strictly increasing"
            )));
        }
        if levels.iter().any(|&l| !(2..=12).contains(&l)) {
            return Err(Error::InvalidArgument(format!(
                "levels {levels:?} outside [2, 12]"
            )));
        }
        Ok(LevelConfig(levels))
    }

    pub fn levels(&self) -> &[u8] {
        &self.0
    }

    pub fn finest(&self) -> u8 {
        *self.0.last().unwrap()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        self.0.iter().map(|&l| cellgrid::num_cells(l) as usize).collect()
    }
}

impl Default for LevelConfig {
    fn default() -> Self {
        LevelConfig(vec![5, 6, 7])
    }
}

/// Hyperparameters of the classifier and its training schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub features: FeatureConfig,
    /// Embedding dimension D.
    pub embedding_dim: usize,
    /// Convolution filters per n-gram width.
    pub filters: usize,
    /// Dense projection width per (channel, width) block.
    pub hidden: usize,
    /// N-gram widths for the context channel.
    pub widths_context: Vec<usize>,
    /// N-gram widths for the toponym channel.
    pub widths_toponyms: Vec<usize>,
    /// N-gram widths for the target channel.
    pub widths_target: Vec<usize>,
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Steps of linear learning-rate warm-up.
    pub warmup_steps: u64,
    /// Exponential decay factor applied per `decay_steps` after warm-up.
    pub decay_rate: f64,
    pub decay_steps: u64,
    pub seed: u64,
    pub freeze_embeddings: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            features: FeatureConfig::default(),
            embedding_dim: 50,
            filters: 32,
            hidden: 64,
            widths_context: vec![1, 2],
            widths_toponyms: vec![1, 2],
            widths_target: vec![1, 2, 3],
            learning_rate: 1e-4,
            batch_size: 512,
            warmup_steps: 1000,
            decay_rate: 0.98,
            decay_steps: 1000,
            seed: 0,
            freeze_embeddings: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("embedding_dim", self.embedding_dim),
            ("filters", self.filters),
            ("hidden", self.hidden),
            ("batch_size", self.batch_size),
        ];
        for (name, value) in positive {
            if value == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument("learning_rate must be finite".into()));
        }
        if !(self.decay_rate > 0.0 && self.decay_rate <= 1.0) {
            return Err(Error::InvalidArgument("decay_rate must be in (0, 1]".into()));
        }
        let channels = [
            ("context", &self.widths_context, self.features.len_context),
            ("toponyms", &self.widths_toponyms, self.features.len_toponyms),
            ("target", &self.widths_target, self.features.len_target),
        ];
        for (name, widths, len) in channels {
            if widths.is_empty() {
                return Err(Error::InvalidArgument(format!("no widths for channel {name}")));
            }
            if widths.iter().any(|&w| w == 0 || w > len) {
                return Err(Error::InvalidArgument(format!(
                    "widths {widths:?} invalid for channel {name} of length {len}"
                )));
            }
        }
        Ok(())
    }

    /// Encoder blocks in canonical order: context widths, toponym widths,
    /// target widths. The concatenated representation is `blocks * hidden`
    /// wide.
    pub(crate) fn block_specs(&self) -> Vec<BlockSpec> {
        let mut specs = Vec::new();
        for &(channel, widths, len) in &[
            (Channel::Context, &self.widths_context, self.features.len_context),
            (Channel::Toponyms, &self.widths_toponyms, self.features.len_toponyms),
            (Channel::Target, &self.widths_target, self.features.len_target),
        ] {
            for &width in widths {
                specs.push(BlockSpec {
                    channel,
                    width,
                    input_len: len,
                });
            }
        }
        specs
    }

    pub fn representation_width(&self) -> usize {
        (self.widths_context.len() + self.widths_toponyms.len() + self.widths_target.len())
            * self.hidden
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Channel {
    Context,
    Toponyms,
    Target,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct BlockSpec {
    pub channel: Channel,
    pub width: usize,
    pub input_len: usize,
}

impl Channel {
    pub(crate) fn tokens<'a>(&self, bundle: &'a FeatureBundle) -> &'a [usize] {
        match self {
            Channel::Context => &bundle.context,
            Channel::Toponyms => &bundle.toponyms,
            Channel::Target => &bundle.target,
        }
    }
}

/// One (channel, n-gram width) encoder block: convolution over embeddings,
/// max-pool, dense projection.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvBlock {
    /// width x D x F
    pub kernel: Array3<f64>,
    /// F
    pub bias: Array1<f64>,
    /// F x H
    pub dense_w: Array2<f64>,
    /// H
    pub dense_b: Array1<f64>,
}

/// Per-level affine classification head over the full cell vocabulary.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelHead {
    /// (blocks * H) x C_l
    pub w: Array2<f64>,
    /// C_l
    pub b: Array1<f64>,
}

/// All trainable parameters. Embedding row 0 is the padding vector and is
/// never updated.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// V x D, shared across channels.
    pub embeddings: Array2<f64>,
    pub blocks: Vec<ConvBlock>,
    pub heads: Vec<LevelHead>,
}

impl ModelParams {
    /// Zero-valued parameters with shapes derived from the configuration.
    pub fn zeros(config: &ModelConfig, levels: &LevelConfig, vocab_size: usize) -> Self {
        let d = config.embedding_dim;
        let f = config.filters;
        let h = config.hidden;
        let blocks = config
            .block_specs()
            .iter()
            .map(|spec| ConvBlock {
                kernel: Array3::zeros((spec.width, d, f)),
                bias: Array1::zeros(f),
                dense_w: Array2::zeros((f, h)),
                dense_b: Array1::zeros(h),
            })
            .collect();
        let rep = config.representation_width();
        let heads = levels
            .class_counts()
            .iter()
            .map(|&c| LevelHead {
                w: Array2::zeros((rep, c)),
                b: Array1::zeros(c),
            })
            .collect();
        ModelParams {
            embeddings: Array2::zeros((vocab_size, d)),
            blocks,
            heads,
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut copy = self.clone();
        copy.for_each_slice_mut(|_, s| s.fill(0.0));
        copy
    }

    /// Canonical tensor order shared by the optimizer, the serializer, and
    /// the gradient checks.
    pub fn tensor_names(&self) -> Vec<String> {
        let mut names = vec!["embeddings".to_string()];
        for i in 0..self.blocks.len() {
            names.push(format!("block{i}.kernel"));
            names.push(format!("block{i}.bias"));
            names.push(format!("block{i}.dense_w"));
            names.push(format!("block{i}.dense_b"));
        }
        for i in 0..self.heads.len() {
            names.push(format!("head{i}.w"));
            names.push(format!("head{i}.b"));
        }
        names
    }

    pub fn for_each_slice(&self, mut f: impl FnMut(usize, &[f64])) {
        let mut idx = 0;
        let mut visit = |s: &[f64]| {
            f(idx, s);
            idx += 1;
        };
        visit(self.embeddings.as_slice().unwrap());
        for b in &self.blocks {
            visit(b.kernel.as_slice().unwrap());
            visit(b.bias.as_slice().unwrap());
            visit(b.dense_w.as_slice().unwrap());
            visit(b.dense_b.as_slice().unwrap());
        }
        for h in &self.heads {
            visit(h.w.as_slice().unwrap());
            visit(h.b.as_slice().unwrap());
        }
    }

    pub fn for_each_slice_mut(&mut self, mut f: impl FnMut(usize, &mut [f64])) {
        let mut idx = 0;
        let mut visit = |s: &mut [f64]| {
            f(idx, s);
            idx += 1;
        };
        visit(self.embeddings.as_slice_mut().unwrap());
        for b in &mut self.blocks {
            visit(b.kernel.as_slice_mut().unwrap());
            visit(b.bias.as_slice_mut().unwrap());
            visit(b.dense_w.as_slice_mut().unwrap());
            visit(b.dense_b.as_slice_mut().unwrap());
        }
        for h in &mut self.heads {
            visit(h.w.as_slice_mut().unwrap());
            visit(h.b.as_slice_mut().unwrap());
        }
    }

    pub fn tensor_count(&self) -> usize {
        1 + 4 * self.blocks.len() + 2 * self.heads.len()
    }

    /// Walks four same-shaped parameter sets tensor by tensor in canonical
    /// order (the optimizer's (theta, m, v, grad) quadruple).
    pub fn zip_apply(
        theta: &mut ModelParams,
        m: &mut ModelParams,
        v: &mut ModelParams,
        g: &ModelParams,
        mut f: impl FnMut(&mut [f64], &mut [f64], &mut [f64], &[f64]),
    ) {
        f(
            theta.embeddings.as_slice_mut().unwrap(),
            m.embeddings.as_slice_mut().unwrap(),
            v.embeddings.as_slice_mut().unwrap(),
            g.embeddings.as_slice().unwrap(),
        );
        for idx in 0..theta.blocks.len() {
            let tb = &mut theta.blocks[idx];
            let mb = &mut m.blocks[idx];
            let vb = &mut v.blocks[idx];
            let gb = &g.blocks[idx];
            f(
                tb.kernel.as_slice_mut().unwrap(),
                mb.kernel.as_slice_mut().unwrap(),
                vb.kernel.as_slice_mut().unwrap(),
                gb.kernel.as_slice().unwrap(),
            );
            f(
                tb.bias.as_slice_mut().unwrap(),
                mb.bias.as_slice_mut().unwrap(),
                vb.bias.as_slice_mut().unwrap(),
                gb.bias.as_slice().unwrap(),
            );
            f(
                tb.dense_w.as_slice_mut().unwrap(),
                mb.dense_w.as_slice_mut().unwrap(),
                vb.dense_w.as_slice_mut().unwrap(),
                gb.dense_w.as_slice().unwrap(),
            );
            f(
                tb.dense_b.as_slice_mut().unwrap(),
                mb.dense_b.as_slice_mut().unwrap(),
                vb.dense_b.as_slice_mut().unwrap(),
                gb.dense_b.as_slice().unwrap(),
            );
        }
        for idx in 0..theta.heads.len() {
            let th = &mut theta.heads[idx];
            let mh = &mut m.heads[idx];
            let vh = &mut v.heads[idx];
            let gh = &g.heads[idx];
            f(
                th.w.as_slice_mut().unwrap(),
                mh.w.as_slice_mut().unwrap(),
                vh.w.as_slice_mut().unwrap(),
                gh.w.as_slice().unwrap(),
            );
            f(
                th.b.as_slice_mut().unwrap(),
                mh.b.as_slice_mut().unwrap(),
                vh.b.as_slice_mut().unwrap(),
                gh.b.as_slice().unwrap(),
            );
        }
    }

    pub fn is_finite(&self) -> bool {
        let mut ok = true;
        self.for_each_slice(|_, s| ok &= s.iter().all(|v| v.is_finite()));
        ok
    }
}

/// Per-level probability vectors over the full cell vocabulary of each
/// level. Levels ascend; each vector sums to one within 1e-5.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelDistributions {
    entries: Vec<(u8, Vec<f64>)>,
}

impl LevelDistributions {
    /// Wraps per-level probability vectors; levels must ascend and each
    /// vector must span its level's full class space.
    pub fn new(entries: Vec<(u8, Vec<f64>)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::InvalidArgument("no level distributions".into()));
        }
        if entries.windows(2).any(|w| w[0].0 >= w[1].0) {
            return Err(Error::InvalidArgument("levels not strictly increasing".into()));
        }
        for (level, probs) in &entries {
            if *level > cellgrid::MAX_LEVEL {
                return Err(Error::InvalidArgument(format!("level {level} out of range")));
            }
            let expect = cellgrid::num_cells(*level) as usize;
            if probs.len() != expect {
                return Err(Error::ShapeMismatch(format!(
                    "level {level} distribution has {} entries, expected {expect}",
                    probs.len()
                )));
            }
            if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "level {level} distribution has negative or non-finite entries"
                )));
            }
        }
        Ok(LevelDistributions { entries })
    }

    pub fn levels(&self) -> impl Iterator<Item = u8> + '_ {
        self.entries.iter().map(|(l, _)| *l)
    }

    pub fn probs(&self, level: u8) -> Option<&[f64]> {
        self.entries
            .iter()
            .find(|(l, _)| *l == level)
            .map(|(_, p)| p.as_slice())
    }

    pub fn finest(&self) -> (u8, &[f64]) {
        let (l, p) = self.entries.last().unwrap();
        (*l, p)
    }

    pub fn entries(&self) -> &[(u8, Vec<f64>)] {
        &self.entries
    }

    /// Restriction to a single level.
    pub fn only(&self, level: u8) -> Result<Self> {
        match self.probs(level) {
            Some(p) => LevelDistributions::new(vec![(level, p.to_vec())]),
            None => Err(Error::InvalidArgument(format!(
                "level {level} not among configured levels"
            ))),
        }
    }
}

/// Probability floor used when taking the log of a gold-class probability.
const LOG_FLOOR: f64 = 1e-30;

/// Joint loss: the per-level cross-entropies of the gold cell, averaged over
/// levels.
pub fn loss_multilevel(dists: &LevelDistributions, gold: LatLng) -> Result<f64> {
    let mut total = 0.0;
    for (level, probs) in dists.entries() {
        let class = CellId::from_latlng(gold, *level)?.class_index();
        total += -probs[class].max(LOG_FLOOR).ln();
    }
    Ok(total / dists.entries().len() as f64)
}

/// The classifier: configuration, level set, and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub levels: LevelConfig,
    pub params: ModelParams,
}

impl Model {
    /// Seeded initialization: the given embedding table, Glorot-uniform
    /// weights, zero biases.
    pub fn new(
        config: ModelConfig,
        levels: LevelConfig,
        embeddings: EmbeddingTable,
    ) -> Result<Self> {
        config.validate()?;
        if embeddings.dim() != config.embedding_dim {
            return Err(Error::ShapeMismatch(format!(
                "embedding table dim {} != configured {}",
                embeddings.dim(),
                config.embedding_dim
            )));
        }
        let vocab_size = embeddings.0.nrows();
        let mut params = ModelParams::zeros(&config, &levels, vocab_size);
        params.embeddings = embeddings.0;

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut init = |t: &mut [f64], fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for v in t {
                *v = rng.gen_range(-limit..limit);
            }
        };
        let (d, f, h) = (config.embedding_dim, config.filters, config.hidden);
        let rep = config.representation_width();
        let specs = config.block_specs();
        for (block, spec) in params.blocks.iter_mut().zip(&specs) {
            init(block.kernel.as_slice_mut().unwrap(), spec.width * d, f);
            init(block.dense_w.as_slice_mut().unwrap(), f, h);
        }
        for head in params.heads.iter_mut() {
            let c = head.b.len();
            init(head.w.as_slice_mut().unwrap(), rep, c);
        }
        Ok(Model {
            config,
            levels,
            params,
        })
    }
}
