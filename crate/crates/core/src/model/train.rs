//! Joint training: batched gradients of the averaged multi-level
//! cross-entropy, Adam updates, and the warm-up/decay learning-rate
//! schedule.

use ndarray::{Array1, Array2};

use super::net::softmax_inplace;
use super::{Model, ModelConfig, ModelParams};
use crate::cellgrid::{CellId, LatLng};
use crate::error::{Error, Result};
use crate::features::FeatureBundle;

const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPSILON: f64 = 1e-8;

/// One training example: features plus the gold class index at each
/// configured level, derived once at example-build time.
#[derive(Debug, Clone)]
pub struct TrainItem {
    pub bundle: FeatureBundle,
    pub classes: Vec<usize>,
}

/// Gold cell class indices for each level.
pub fn gold_classes(gold: LatLng, levels: &[u8]) -> Result<Vec<usize>> {
    levels
        .iter()
        .map(|&l| Ok(CellId::from_latlng(gold, l)?.class_index()))
        .collect()
}

/// Linear warm-up to the base rate, then exponential decay:
/// `base * decay_rate^((step - warmup) / decay_steps)`. Steps are 1-based.
pub fn lr_for_step(config: &ModelConfig, step: u64) -> f64 {
    if config.warmup_steps > 0 && step <= config.warmup_steps {
        config.learning_rate * step as f64 / config.warmup_steps as f64
    } else {
        let past = step.saturating_sub(config.warmup_steps) as f64;
        config.learning_rate * config.decay_rate.powf(past / config.decay_steps.max(1) as f64)
    }
}

/// Adam moment estimates, in the same tensor layout as the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct OptState {
    pub m: ModelParams,
    pub v: ModelParams,
    /// Completed update count.
    pub step: u64,
}

impl OptState {
    pub fn new(params: &ModelParams) -> Self {
        OptState {
            m: params.zeros_like(),
            v: params.zeros_like(),
            step: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainStats {
    /// 1-based step number of this update.
    pub step: u64,
    pub lr: f64,
    /// Batch-mean joint loss.
    pub loss: f64,
    /// Batch-mean cross-entropy per level, in level order.
    pub per_level: Vec<f64>,
}

impl Model {
    /// Batch-mean joint loss and its gradient with respect to every
    /// parameter. Examples are processed in order; the reduction order is
    /// fixed, so results are bit-stable for a fixed batch.
    pub fn gradients(&self, batch: &[TrainItem]) -> Result<(ModelParams, f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty training batch".into()));
        }
        let n_levels = self.levels.levels().len();
        for item in batch {
            if item.classes.len() != n_levels {
                return Err(Error::ShapeMismatch(format!(
                    "example carries {} gold classes, model has {} levels",
                    item.classes.len(),
                    n_levels
                )));
            }
        }
        let b = batch.len();
        let rep_width = self.config.representation_width();

        let mut reps = Array2::zeros((b, rep_width));
        let mut traces = Vec::with_capacity(b);
        for (row, item) in batch.iter().enumerate() {
            let (rep, trace) = self.encode(&item.bundle)?;
            reps.row_mut(row).assign(&rep);
            traces.push(trace);
        }

        let mut grads = self.params.zeros_like();
        let mut d_reps: Array2<f64> = Array2::zeros((b, rep_width));
        let mut per_level = Vec::with_capacity(n_levels);
        let scale = 1.0 / (n_levels * b) as f64;

        for (level_idx, head) in self.params.heads.iter().enumerate() {
            // logits -> probabilities, one level at a time to bound memory
            let mut probs = reps.dot(&head.w);
            probs += &head.b;
            let mut level_loss = 0.0;
            for (row, item) in batch.iter().enumerate() {
                let row_slice = probs.row_mut(row).into_slice().unwrap();
                softmax_inplace(row_slice);
                level_loss += -row_slice[item.classes[level_idx]].max(super::LOG_FLOOR).ln();
            }
            per_level.push(level_loss / b as f64);

            // in place: dlogits = (p - onehot) / (levels * batch)
            for (row, item) in batch.iter().enumerate() {
                let mut r = probs.row_mut(row);
                r[item.classes[level_idx]] -= 1.0;
                r *= scale;
            }
            let dlogits = probs;
            grads.heads[level_idx].w = reps.t().dot(&dlogits);
            grads.heads[level_idx].b = dlogits.sum_axis(ndarray::Axis(0));
            d_reps += &dlogits.dot(&head.w.t());
        }

        for (row, item) in batch.iter().enumerate() {
            let d_rep: Array1<f64> = d_reps.row(row).to_owned();
            self.encode_backward(&item.bundle, &traces[row], &d_rep, &mut grads);
        }
        if self.config.freeze_embeddings {
            grads.embeddings.fill(0.0);
        }

        let loss = per_level.iter().sum::<f64>() / n_levels as f64;
        Ok((grads, loss, per_level))
    }

    /// Batch-mean joint loss only (used by finite-difference checks).
    pub fn batch_loss(&self, batch: &[TrainItem]) -> Result<f64> {
        if batch.is_empty() {
            return Err(Error::InvalidArgument("empty training batch".into()));
        }
        let n_levels = self.levels.levels().len();
        let mut total = 0.0;
        for item in batch {
            let dists = self.forward(&item.bundle)?;
            for (level_idx, (_, probs)) in dists.entries().iter().enumerate() {
                total += -probs[item.classes[level_idx]].max(super::LOG_FLOOR).ln();
            }
        }
        Ok(total / (n_levels * batch.len()) as f64)
    }
}

/// Owns the model and optimizer state through a training run.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub model: Model,
    pub opt: OptState,
}

impl Trainer {
    pub fn new(model: Model) -> Self {
        let opt = OptState::new(&model.params);
        Trainer { model, opt }
    }

    pub fn resume(model: Model, opt: OptState) -> Self {
        Trainer { model, opt }
    }

    /// One Adam update on the batch-mean joint loss. Aborts with a
    /// diagnostic if the loss or any gradient is non-finite.
    pub fn step(&mut self, batch: &[TrainItem]) -> Result<TrainStats> {
        let (grads, loss, per_level) = self.model.gradients(batch)?;
        if !loss.is_finite() {
            return Err(Error::TrainDiverged(format!(
                "non-finite loss {loss} at step {}",
                self.opt.step + 1
            )));
        }
        if !grads.is_finite() {
            return Err(Error::TrainDiverged(format!(
                "non-finite gradient at step {}",
                self.opt.step + 1
            )));
        }

        let t = self.opt.step + 1;
        let lr = lr_for_step(&self.model.config, t);
        let bias1 = 1.0 - ADAM_BETA1.powi(t as i32);
        let bias2 = 1.0 - ADAM_BETA2.powi(t as i32);

        ModelParams::zip_apply(
            &mut self.model.params,
            &mut self.opt.m,
            &mut self.opt.v,
            &grads,
            |theta, m, v, g| {
                for i in 0..theta.len() {
                    m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g[i];
                    v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g[i] * g[i];
                    let m_hat = m[i] / bias1;
                    let v_hat = v[i] / bias2;
                    theta[i] -= lr * m_hat / (v_hat.sqrt() + ADAM_EPSILON);
                }
            },
        );

        self.opt.step = t;
        Ok(TrainStats {
            step: t,
            lr,
            loss,
            per_level,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cellgrid::num_cells;
    use crate::features::{random_embeddings, FeatureConfig, Vocabulary};
    use crate::model::LevelConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tiny_model(seed: u64) -> Model {
        let config = ModelConfig {
            features: FeatureConfig {
                len_context: 8,
                len_toponyms: 5,
                len_target: 3,
            },
            embedding_dim: 3,
            filters: 2,
            hidden: 4,
            learning_rate: 0.01,
            warmup_steps: 2,
            decay_rate: 0.9,
            decay_steps: 10,
            seed,
            ..ModelConfig::default()
        };
        let vocab = Vocabulary::build(["a", "b", "c", "d", "e", "f"]);
        Model::new(
            config,
            LevelConfig::new(vec![2, 3]).unwrap(),
            random_embeddings(&vocab, 3, seed),
        )
        .unwrap()
    }

    fn random_batch(model: &Model, n: usize, seed: u64) -> Vec<TrainItem> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = &model.config.features;
        let vocab_size = model.params.embeddings.nrows();
        (0..n)
            .map(|_| {
                let channel = |len: usize, rng: &mut ChaCha8Rng| {
                    (0..len).map(|_| rng.gen_range(0..vocab_size)).collect()
                };
                let bundle = FeatureBundle::from_channels(
                    channel(f.len_context, &mut rng),
                    channel(f.len_toponyms, &mut rng),
                    channel(f.len_target, &mut rng),
                );
                let classes = model
                    .levels
                    .levels()
                    .iter()
                    .map(|&l| rng.gen_range(0..num_cells(l) as usize))
                    .collect();
                TrainItem { bundle, classes }
            })
            .collect()
    }

    #[test]
    fn lr_schedule_shape() {
        let config = ModelConfig {
            learning_rate: 1e-4,
            warmup_steps: 1000,
            decay_rate: 0.98,
            decay_steps: 1000,
            ..ModelConfig::default()
        };
        assert!((lr_for_step(&config, 1) - 1e-7).abs() < 1e-15);
        assert!((lr_for_step(&config, 500) - 5e-5).abs() < 1e-12);
        assert!((lr_for_step(&config, 1000) - 1e-4).abs() < 1e-15);
        let after = lr_for_step(&config, 2000);
        assert!((after - 1e-4 * 0.98).abs() < 1e-12);
        // monotone non-increasing after warm-up
        let mut prev = lr_for_step(&config, 1000);
        for step in 1001..1100 {
            let lr = lr_for_step(&config, step);
            assert!(lr <= prev);
            prev = lr;
        }
    }

    #[test]
    fn zero_learning_rate_keeps_params() {
        let mut model = tiny_model(4);
        model.config.learning_rate = 0.0;
        let batch = random_batch(&model, 3, 11);
        let mut trainer = Trainer::new(model);
        let before = trainer.model.params.clone();
        trainer.step(&batch).unwrap();
        assert_eq!(trainer.model.params, before);
    }

    #[test]
    fn loss_decreases_on_repeated_batch() {
        let model = tiny_model(5);
        let batch = random_batch(&model, 4, 12);
        let mut trainer = Trainer::new(model);
        let first = trainer.step(&batch).unwrap().loss;
        let mut last = first;
        for _ in 0..49 {
            last = trainer.step(&batch).unwrap().loss;
        }
        assert!(
            last < first,
            "loss did not decrease: {first} -> {last}"
        );
    }

    #[test]
    fn training_is_deterministic_bitwise() {
        let run = || {
            let model = tiny_model(6);
            let batch = random_batch(&model, 3, 13);
            let mut trainer = Trainer::new(model);
            for _ in 0..100 {
                trainer.step(&batch).unwrap();
            }
            trainer
        };
        let a = run();
        let b = run();
        assert_eq!(a.model.params, b.model.params);
        assert_eq!(a.opt.m, b.opt.m);
        assert_eq!(a.opt.v, b.opt.v);
    }

    #[test]
    fn embeddings_row_zero_never_moves() {
        let model = tiny_model(7);
        let batch = random_batch(&model, 4, 14);
        let mut trainer = Trainer::new(model);
        for _ in 0..20 {
            trainer.step(&batch).unwrap();
        }
        assert!(trainer
            .model
            .params
            .embeddings
            .row(0)
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn frozen_embeddings_do_not_move() {
        let mut model = tiny_model(8);
        model.config.freeze_embeddings = true;
        let frozen = model.params.embeddings.clone();
        let batch = random_batch(&model, 4, 15);
        let mut trainer = Trainer::new(model);
        for _ in 0..10 {
            trainer.step(&batch).unwrap();
        }
        assert_eq!(trainer.model.params.embeddings, frozen);
        // everything else trained
        assert!(trainer.model.params.heads[0].b.iter().any(|&v| v != 0.0));
    }

    /// Nudges biases off their zero init so every ReLU and max-pool sits at
    /// a generic, differentiable point; pad positions otherwise land
    /// exactly on the kink (pad embedding rows are zero).
    fn randomize_biases(model: &mut Model, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for block in &mut model.params.blocks {
            for v in block.bias.iter_mut().chain(block.dense_b.iter_mut()) {
                *v = rng.gen_range(-0.05..0.05);
            }
        }
        for head in &mut model.params.heads {
            for v in head.b.iter_mut() {
                *v = rng.gen_range(-0.05..0.05);
            }
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut model = tiny_model(42);
        randomize_biases(&mut model, 1042);
        let batch = random_batch(&model, 3, 16);
        let (grads, _, _) = model.gradients(&batch).unwrap();

        let mut grad_slices: Vec<Vec<f64>> = Vec::new();
        grads.for_each_slice(|_, s| grad_slices.push(s.to_vec()));
        let names = model.params.tensor_names();
        let d = model.config.embedding_dim;

        let mut max_rel = 0.0f64;
        for tensor_idx in 0..grad_slices.len() {
            let len = grad_slices[tensor_idx].len();
            for i in 0..len {
                // embedding row 0 is a constant, not a parameter
                if tensor_idx == 0 && i < d {
                    continue;
                }
                let mut read = |delta: f64, model: &mut Model| {
                    let mut original = 0.0;
                    model.params.for_each_slice_mut(|ti, s| {
                        if ti == tensor_idx {
                            original = s[i];
                            s[i] += delta;
                        }
                    });
                    let loss = model.batch_loss(&batch).unwrap();
                    model.params.for_each_slice_mut(|ti, s| {
                        if ti == tensor_idx {
                            s[i] = original;
                        }
                    });
                    loss
                };
                let h = 1e-5;
                let plus = read(h, &mut model);
                let minus = read(-h, &mut model);
                let fd = (plus - minus) / (2.0 * h);
                let analytic = grad_slices[tensor_idx][i];
                // the magnitude floor keeps central-difference roundoff on
                // near-zero gradients from registering as relative error
                let rel = (analytic - fd).abs() / analytic.abs().max(fd.abs()).max(1e-4);
                assert!(
                    rel < 1e-4,
                    "tensor {} [{}]: analytic {} vs fd {}",
                    names[tensor_idx],
                    i,
                    analytic,
                    fd
                );
                max_rel = max_rel.max(rel);
            }
        }
        assert!(max_rel < 1e-4);
    }

    #[test]
    fn gold_classes_match_cells() {
        let gold = LatLng::new(40.7128, -74.0060).unwrap();
        let classes = gold_classes(gold, &[5, 7]).unwrap();
        assert_eq!(
            classes[0],
            CellId::from_latlng(gold, 5).unwrap().class_index()
        );
        assert_eq!(
            classes[1],
            CellId::from_latlng(gold, 7).unwrap().class_index()
        );
    }
}
