//! Forward pass and gradients of the encoder and the per-level heads.
//!
//! Per channel x and n-gram width n: embed, 1D convolution with valid
//! padding, ReLU, global max-pool over positions, dense projection to H
//! with ReLU. The seven projections concatenate into the shared
//! representation; each level applies an affine map to its full class space
//! followed by softmax.

use ndarray::{Array1, Array2, Axis};

use super::{BlockSpec, LevelDistributions, Model, ModelParams};
use crate::error::{Error, Result};
use crate::features::FeatureBundle;

/// What the backward pass needs from one block of one example.
struct BlockTrace {
    /// Pooled activations, length F.
    pooled: Array1<f64>,
    /// Position of the pooled maximum per filter.
    argmax: Vec<usize>,
    /// Whether the pooled pre-activation was positive (ReLU passthrough).
    active: Vec<bool>,
    /// Dense ReLU mask, length H.
    dense_active: Vec<bool>,
}

pub(super) struct EncodeTrace {
    blocks: Vec<BlockTrace>,
}

impl Model {
    fn check_bundle(&self, bundle: &FeatureBundle) -> Result<()> {
        let f = &self.config.features;
        if bundle.context.len() != f.len_context
            || bundle.toponyms.len() != f.len_toponyms
            || bundle.target.len() != f.len_target
        {
            return Err(Error::ShapeMismatch(format!(
                "bundle channels ({}, {}, {}) do not match configured lengths ({}, {}, {})",
                bundle.context.len(),
                bundle.toponyms.len(),
                bundle.target.len(),
                f.len_context,
                f.len_toponyms,
                f.len_target
            )));
        }
        if let Some(&bad) = bundle
            .context
            .iter()
            .chain(&bundle.toponyms)
            .chain(&bundle.target)
            .find(|&&i| i >= self.params.embeddings.nrows())
        {
            return Err(Error::ShapeMismatch(format!(
                "token index {bad} outside vocabulary of {}",
                self.params.embeddings.nrows()
            )));
        }
        Ok(())
    }

    /// Embeds one channel's token ids as an L x D matrix.
    fn embed(&self, tokens: &[usize]) -> Array2<f64> {
        let d = self.config.embedding_dim;
        let mut out = Array2::zeros((tokens.len(), d));
        for (row, &id) in tokens.iter().enumerate() {
            out.row_mut(row).assign(&self.params.embeddings.row(id));
        }
        out
    }

    /// Runs the encoder on one example, producing the concatenated
    /// representation and the trace for backprop.
    pub(super) fn encode(&self, bundle: &FeatureBundle) -> Result<(Array1<f64>, EncodeTrace)> {
        self.check_bundle(bundle)?;
        let h = self.config.hidden;
        let specs = self.config.block_specs();
        let mut rep = Array1::zeros(self.config.representation_width());
        let mut traces = Vec::with_capacity(specs.len());

        let mut embedded: Option<(super::Channel, Array2<f64>)> = None;
        for (block_idx, spec) in specs.iter().enumerate() {
            // blocks of the same channel are adjacent; reuse the embedding
            if !matches!(&embedded, Some((c, _)) if *c == spec.channel) {
                embedded = Some((spec.channel, self.embed(spec.channel.tokens(bundle))));
            }
            let input = &embedded.as_ref().unwrap().1;
            let block = &self.params.blocks[block_idx];
            let (pooled, argmax, active) = conv_relu_pool(input, spec, block);

            let mut dense = block.dense_w.t().dot(&pooled);
            dense += &block.dense_b;
            let dense_active: Vec<bool> = dense.iter().map(|&v| v > 0.0).collect();
            dense.mapv_inplace(|v| v.max(0.0));

            rep.slice_mut(ndarray::s![block_idx * h..(block_idx + 1) * h])
                .assign(&dense);
            traces.push(BlockTrace {
                pooled,
                argmax,
                active,
                dense_active,
            });
        }
        Ok((rep, EncodeTrace { blocks: traces }))
    }

    /// Per-level class probabilities for one example.
    pub fn forward(&self, bundle: &FeatureBundle) -> Result<LevelDistributions> {
        let (rep, _) = self.encode(bundle)?;
        let mut entries = Vec::with_capacity(self.levels.levels().len());
        for (head, &level) in self.params.heads.iter().zip(self.levels.levels()) {
            let mut logits = head.w.t().dot(&rep);
            logits += &head.b;
            softmax_inplace(logits.as_slice_mut().unwrap());
            entries.push((level, logits.to_vec()));
        }
        LevelDistributions::new(entries)
    }

    /// Backpropagates `d_rep` for one example into the gradient accumulator.
    pub(super) fn encode_backward(
        &self,
        bundle: &FeatureBundle,
        trace: &EncodeTrace,
        d_rep: &Array1<f64>,
        grads: &mut ModelParams,
    ) {
        let h = self.config.hidden;
        let d = self.config.embedding_dim;
        let specs = self.config.block_specs();

        let mut channel_ctx: Option<(super::Channel, Array2<f64>, Array2<f64>)> = None;
        let flush = |ctx: &mut Option<(super::Channel, Array2<f64>, Array2<f64>)>,
                         grads: &mut ModelParams,
                         bundle: &FeatureBundle| {
            if let Some((channel, _, d_embedded)) = ctx.take() {
                for (row, &id) in channel.tokens(bundle).iter().enumerate() {
                    if id == crate::features::PAD_INDEX {
                        continue;
                    }
                    let mut grad_row = grads.embeddings.row_mut(id);
                    grad_row += &d_embedded.row(row);
                }
            }
        };

        for (block_idx, spec) in specs.iter().enumerate() {
            if !matches!(&channel_ctx, Some((c, _, _)) if *c == spec.channel) {
                flush(&mut channel_ctx, grads, bundle);
                let embedded = self.embed(spec.channel.tokens(bundle));
                let zeros = Array2::zeros(embedded.raw_dim());
                channel_ctx = Some((spec.channel, embedded, zeros));
            }
            let (_, embedded, d_embedded) = channel_ctx.as_mut().unwrap();
            let block = &self.params.blocks[block_idx];
            let block_trace = &trace.blocks[block_idx];
            let g = &mut grads.blocks[block_idx];

            // dense backward
            let dh = d_rep.slice(ndarray::s![block_idx * h..(block_idx + 1) * h]);
            let mut dq = dh.to_owned();
            for (v, &alive) in dq.iter_mut().zip(&block_trace.dense_active) {
                if !alive {
                    *v = 0.0;
                }
            }
            // dW += pooled (F) outer dq (H)
            for (fi, &m) in block_trace.pooled.iter().enumerate() {
                if m != 0.0 {
                    let mut row = g.dense_w.row_mut(fi);
                    row.scaled_add(m, &dq);
                }
            }
            g.dense_b += &dq;
            let dm = block.dense_w.dot(&dq); // F

            // pool + ReLU + convolution backward, sparse at the argmax
            for fi in 0..dm.len() {
                if !block_trace.active[fi] {
                    continue;
                }
                let gmax = dm[fi];
                if gmax == 0.0 {
                    continue;
                }
                let t = block_trace.argmax[fi];
                g.bias[fi] += gmax;
                for k in 0..spec.width {
                    let in_row = embedded.row(t + k);
                    let mut d_in_row = d_embedded.row_mut(t + k);
                    for di in 0..d {
                        g.kernel[[k, di, fi]] += gmax * in_row[di];
                        d_in_row[di] += gmax * block.kernel[[k, di, fi]];
                    }
                }
            }
        }
        flush(&mut channel_ctx, grads, bundle);
    }
}

/// Convolution, ReLU, max-pool for one block. Returns pooled values, the
/// argmax position per filter, and whether the max was positive.
fn conv_relu_pool(
    input: &Array2<f64>,
    spec: &BlockSpec,
    block: &super::ConvBlock,
) -> (Array1<f64>, Vec<usize>, Vec<bool>) {
    let positions = spec.input_len - spec.width + 1;
    let f = block.bias.len();
    let mut z = Array2::zeros((positions, f));
    for k in 0..spec.width {
        let window = input.slice(ndarray::s![k..k + positions, ..]);
        let kernel_k = block.kernel.index_axis(Axis(0), k);
        z += &window.dot(&kernel_k);
    }
    z += &block.bias;

    let mut pooled = Array1::zeros(f);
    let mut argmax = vec![0usize; f];
    let mut active = vec![false; f];
    for fi in 0..f {
        let mut best = f64::NEG_INFINITY;
        let mut best_t = 0;
        for t in 0..positions {
            let v = z[[t, fi]];
            if v > best {
                best = v;
                best_t = t;
            }
        }
        if best > 0.0 {
            pooled[fi] = best;
            argmax[fi] = best_t;
            active[fi] = true;
        }
    }
    (pooled, argmax, active)
}

pub(super) fn softmax_inplace(logits: &mut [f64]) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in logits.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in logits.iter_mut() {
        *v /= sum;
    }
}
