//! Deterministic training: load and validate the corpus, shuffle and split,
//! build the vocabulary and features, then run seeded Adam steps with the
//! warm-up/decay schedule. Reruns with the same inputs and seed produce
//! byte-identical model files.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use mlgeo_core::corpus::{self, TrainingExample, DEFAULT_MAX_CONTEXT};
use mlgeo_core::features::{
    extract_features, load_embeddings, random_embeddings, FeatureConfig, Vocabulary,
};
use mlgeo_core::model::{
    gold_classes, save_model, LevelConfig, Model, ModelConfig, SavedModel, TrainItem, Trainer,
};

use crate::config::ConfigFile;
use crate::fileio::write_atomic;
use crate::TrainArgs;

struct TrainPlan {
    config: ModelConfig,
    levels: LevelConfig,
    steps: u64,
    split: f64,
    max_context: usize,
    checkpoint_every: u64,
    embeddings_path: Option<PathBuf>,
}

fn assemble_plan(args: &TrainArgs, file: &ConfigFile) -> anyhow::Result<TrainPlan> {
    let defaults = ModelConfig::default();
    let features = FeatureConfig {
        len_context: args
            .len_context
            .or(file.usize("len_context")?)
            .unwrap_or(defaults.features.len_context),
        len_toponyms: args
            .len_toponyms
            .or(file.usize("len_toponyms")?)
            .unwrap_or(defaults.features.len_toponyms),
        len_target: args
            .len_target
            .or(file.usize("len_target")?)
            .unwrap_or(defaults.features.len_target),
    };
    let config = ModelConfig {
        features,
        embedding_dim: args
            .embedding_dim
            .or(file.usize("embedding_dim")?)
            .unwrap_or(defaults.embedding_dim),
        filters: args.filters.or(file.usize("filters")?).unwrap_or(defaults.filters),
        hidden: args.hidden.or(file.usize("hidden")?).unwrap_or(defaults.hidden),
        learning_rate: args.lr.or(file.f64("lr")?).unwrap_or(defaults.learning_rate),
        batch_size: args
            .batch_size
            .or(file.usize("batch_size")?)
            .unwrap_or(defaults.batch_size),
        warmup_steps: args.warmup.or(file.u64("warmup")?).unwrap_or(defaults.warmup_steps),
        decay_rate: args
            .decay_rate
            .or(file.f64("decay_rate")?)
            .unwrap_or(defaults.decay_rate),
        decay_steps: args
            .decay_steps
            .or(file.u64("decay_steps")?)
            .unwrap_or(defaults.decay_steps),
        seed: args.seed.or(file.u64("seed")?).unwrap_or(defaults.seed),
        freeze_embeddings: args.freeze_embeddings
            || file.bool("freeze_embeddings")?.unwrap_or(defaults.freeze_embeddings),
        ..defaults
    };
    let levels = LevelConfig::new(
        args.levels
            .clone()
            .or(file.levels("levels")?)
            .unwrap_or_else(|| LevelConfig::default().levels().to_vec()),
    )?;
    let split = args.split.or(file.f64("split")?).unwrap_or(0.9);
    if !(0.0..=1.0).contains(&split) {
        anyhow::bail!("--split {split} outside [0, 1]");
    }
    Ok(TrainPlan {
        config,
        levels,
        steps: args.steps.or(file.u64("steps")?).unwrap_or(1000),
        split,
        max_context: args
            .max_context
            .or(file.usize("max_context")?)
            .unwrap_or(DEFAULT_MAX_CONTEXT),
        checkpoint_every: args
            .checkpoint_every
            .or(file.u64("checkpoint_every")?)
            .unwrap_or(0),
        embeddings_path: args
            .embeddings
            .clone()
            .or(file.string("embeddings")?.map(PathBuf::from)),
    })
}

/// Loads every record, reporting all invalid lines before aborting.
fn load_corpus(path: &Path, max_context: usize) -> anyhow::Result<Vec<TrainingExample>> {
    let mut examples = Vec::new();
    let mut problems = Vec::new();
    for item in corpus::load_training(path, max_context)? {
        match item {
            Ok(example) => examples.push(example),
            Err(e) => problems.push(e.to_string()),
        }
    }
    if !problems.is_empty() {
        for p in problems.iter().take(20) {
            eprintln!("invalid record: {p}");
        }
        anyhow::bail!(
            "{} invalid records in {} (first {} shown above)",
            problems.len(),
            path.display(),
            problems.len().min(20)
        );
    }
    if examples.is_empty() {
        anyhow::bail!("no training records in {}", path.display());
    }
    Ok(examples)
}

fn build_items(
    examples: &[TrainingExample],
    vocab: &Vocabulary,
    config: &ModelConfig,
    levels: &LevelConfig,
) -> anyhow::Result<Vec<TrainItem>> {
    examples
        .iter()
        .map(|ex| {
            Ok(TrainItem {
                bundle: extract_features(
                    &ex.context_tokens,
                    &ex.toponym_spans,
                    ex.target_span,
                    vocab,
                    &config.features,
                ),
                classes: gold_classes(ex.gold, levels.levels())?,
            })
        })
        .collect()
}

pub fn run(args: TrainArgs) -> anyhow::Result<()> {
    let file = match &args.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::empty(),
    };
    let plan = assemble_plan(&args, &file)?;
    plan.config.validate()?;

    let mut examples = load_corpus(&args.train, plan.max_context)?;
    let mut rng = ChaCha8Rng::seed_from_u64(plan.config.seed);
    examples.shuffle(&mut rng);
    let train_count = ((examples.len() as f64) * plan.split).floor() as usize;
    let train_count = train_count.clamp(usize::from(plan.split > 0.0), examples.len());
    let (train_split, dev_split) = examples.split_at(train_count);
    eprintln!(
        "corpus: {} records -> {} train / {} dev",
        examples.len(),
        train_split.len(),
        dev_split.len()
    );

    let vocab = Vocabulary::build(
        train_split
            .iter()
            .flat_map(|ex| ex.context_tokens.iter().map(|t| t.as_str())),
    );
    let embeddings = match &plan.embeddings_path {
        Some(path) => load_embeddings(path, &vocab, plan.config.embedding_dim, plan.config.seed)
            .with_context(|| format!("loading embeddings from {}", path.display()))?,
        None => random_embeddings(&vocab, plan.config.embedding_dim, plan.config.seed),
    };
    let train_items = build_items(train_split, &vocab, &plan.config, &plan.levels)?;
    let dev_items = build_items(dev_split, &vocab, &plan.config, &plan.levels)?;
    if train_items.is_empty() && plan.steps > 0 {
        anyhow::bail!("training split is empty but {} steps requested", plan.steps);
    }

    let model = Model::new(plan.config.clone(), plan.levels.clone(), embeddings)?;
    let mut trainer = Trainer::new(model);

    let mut log_rows: Vec<String> = Vec::new();
    let mut order: Vec<usize> = (0..train_items.len()).collect();
    let mut cursor = order.len(); // forces a shuffle before the first batch
    let batch_size = plan.config.batch_size.min(train_items.len());

    for _ in 0..plan.steps {
        if cursor + batch_size > order.len() {
            order.shuffle(&mut rng);
            cursor = 0;
        }
        let batch: Vec<TrainItem> = order[cursor..cursor + batch_size]
            .iter()
            .map(|&i| train_items[i].clone())
            .collect();
        cursor += batch_size;

        let stats = trainer.step(&batch)?;
        let per_level: Vec<String> = plan
            .levels
            .levels()
            .iter()
            .zip(&stats.per_level)
            .map(|(l, loss)| format!("l{l}={loss:.6}"))
            .collect();
        if args.log_every > 0 && (stats.step % args.log_every == 0 || stats.step == plan.steps) {
            eprintln!(
                "step={} lr={:.3e} loss={:.6} {}",
                stats.step,
                stats.lr,
                stats.loss,
                per_level.join(" ")
            );
        }
        log_rows.push(format!(
            "{},{},{},{}",
            stats.step,
            stats.lr,
            stats.loss,
            stats
                .per_level
                .iter()
                .map(|v| v.to_string())
                .collect::<Vec<_>>()
                .join(",")
        ));

        if plan.checkpoint_every > 0 && stats.step % plan.checkpoint_every == 0 {
            let path = checkpoint_path(&args.model, stats.step);
            save(&trainer, &vocab, &path)?;
            eprintln!("checkpoint: {}", path.display());
        }
    }

    if !dev_items.is_empty() {
        let dev_loss = trainer.model.batch_loss(&dev_items)?;
        eprintln!("dev_loss={dev_loss:.6} over {} records", dev_items.len());
    }

    save(&trainer, &vocab, &args.model)?;
    eprintln!("model: {}", args.model.display());

    if let Some(log_path) = &args.log {
        let header = std::iter::once("step,lr,loss".to_string())
            .chain(
                plan.levels
                    .levels()
                    .iter()
                    .map(|l| format!("loss_l{l}"))
                    .collect::<Vec<_>>()
                    .into_iter(),
            )
            .collect::<Vec<_>>()
            .join(",");
        // header ends up as "step,lr,loss,loss_l5,..."
        write_atomic(log_path, |w| {
            writeln!(w, "{header}")?;
            for row in &log_rows {
                writeln!(w, "{row}")?;
            }
            Ok(())
        })?;
    }
    Ok(())
}

fn checkpoint_path(model: &Path, step: u64) -> PathBuf {
    let mut name = model.file_name().unwrap_or_default().to_os_string();
    name.push(format!(".step{step}"));
    model.with_file_name(name)
}

fn save(trainer: &Trainer, vocab: &Vocabulary, path: &Path) -> anyhow::Result<()> {
    let saved = SavedModel {
        model: trainer.model.clone(),
        vocab: vocab.clone(),
        opt: trainer.opt.clone(),
    };
    save_model(&saved, path)?;
    Ok(())
}
