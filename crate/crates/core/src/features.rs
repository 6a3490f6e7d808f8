//! Input features: tokenization, vocabulary, the three model channels
//! (context tokens, toponym tokens, target surface form), ablation masks,
//! and embedding tables.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Span;
use crate::error::{Error, Result};

/// Reserved index for padding; embedding row 0 is pinned to zero.
pub const PAD_INDEX: usize = 0;
/// Reserved index for out-of-vocabulary tokens.
pub const UNK_INDEX: usize = 1;

/// Lowercases and splits on whitespace, detaching every non-alphanumeric
/// character as its own single-character token.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for ch in text.chars() {
        if ch.is_whitespace() {
            if !word.is_empty() {
                tokens.push(std::mem::take(&mut word));
            }
        } else if ch.is_alphanumeric() {
            word.extend(ch.to_lowercase());
        } else {
            if !word.is_empty() {
                tokens.push(std::mem::take(&mut word));
            }
            tokens.push(ch.to_string());
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    tokens
}

/// Token-to-index map with dense indices; 0 and 1 are reserved for padding
/// and unknown and never reassigned.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    index: HashMap<String, usize>,
    tokens: Vec<String>,
}

impl Vocabulary {
    /// Builds a vocabulary from tokens in first-seen order.
    pub fn build<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Self {
        let mut vocab = Vocabulary {
            index: HashMap::new(),
            tokens: vec!["<pad>".to_string(), "<unk>".to_string()],
        };
        for token in tokens {
            vocab.insert(token);
        }
        vocab
    }

    fn insert(&mut self, token: &str) {
        if !self.index.contains_key(token) {
            self.index.insert(token.to_string(), self.tokens.len());
            self.tokens.push(token.to_string());
        }
    }

    /// Index for a token, [`UNK_INDEX`] when absent.
    pub fn index_of(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK_INDEX)
    }

    /// Index only for tokens actually in the vocabulary.
    pub fn lookup(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    /// Total size including the two reserved slots.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.len() == 2
    }

    /// Non-reserved tokens in index order, for serialization.
    pub fn entries(&self) -> &[String] {
        &self.tokens[2..]
    }

    /// Rebuilds from serialized entries.
    pub fn from_entries(entries: Vec<String>) -> Self {
        let mut vocab = Vocabulary {
            index: HashMap::new(),
            tokens: vec!["<pad>".to_string(), "<unk>".to_string()],
        };
        for token in entries {
            vocab.insert(&token);
        }
        vocab
    }
}

/// Fixed channel lengths for the three feature channels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    /// Context token channel length.
    pub len_context: usize,
    /// Toponym mention channel length.
    pub len_toponyms: usize,
    /// Target surface form channel length.
    pub len_target: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            len_context: 400,
            len_toponyms: 100,
            len_target: 10,
        }
    }
}

/// The three input channels as padded index sequences, plus the positions
/// needed by the ablation masks.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBundle {
    /// Channel a: all context tokens.
    pub context: Vec<usize>,
    /// Channel b: tokens inside all toponym spans, concatenated in span order.
    pub toponyms: Vec<usize>,
    /// Channel c: tokens of the target span.
    pub target: Vec<usize>,
    target_positions_context: Vec<usize>,
    toponym_positions_context: Vec<usize>,
    target_positions_toponyms: Vec<usize>,
}

impl FeatureBundle {
    /// Builds a bundle directly from index sequences, without mask
    /// metadata. Intended for synthetic inputs in tests and benchmarks.
    pub fn from_channels(context: Vec<usize>, toponyms: Vec<usize>, target: Vec<usize>) -> Self {
        FeatureBundle {
            context,
            toponyms,
            target,
            target_positions_context: Vec::new(),
            toponym_positions_context: Vec::new(),
            target_positions_toponyms: Vec::new(),
        }
    }
}

fn pad_to(mut v: Vec<usize>, len: usize) -> Vec<usize> {
    v.truncate(len);
    v.resize(len, PAD_INDEX);
    v
}

/// Maps an example's tokens and spans into the three channels.
pub fn extract_features(
    tokens: &[String],
    toponym_spans: &[Span],
    target_span: Span,
    vocab: &Vocabulary,
    config: &FeatureConfig,
) -> FeatureBundle {
    let context: Vec<usize> = tokens.iter().map(|t| vocab.index_of(t)).collect();

    let mut toponyms = Vec::new();
    let mut target_positions_toponyms = Vec::new();
    let mut toponym_positions_context = Vec::new();
    for &(start, end) in toponym_spans {
        for pos in start..end {
            if pos < config.len_context {
                toponym_positions_context.push(pos);
            }
            if (start, end) == target_span && toponyms.len() < config.len_toponyms {
                target_positions_toponyms.push(toponyms.len());
            }
            toponyms.push(context[pos]);
        }
    }

    let target: Vec<usize> = (target_span.0..target_span.1)
        .map(|pos| context[pos])
        .collect();
    let target_positions_context = (target_span.0..target_span.1)
        .filter(|&pos| pos < config.len_context)
        .collect();

    FeatureBundle {
        context: pad_to(context, config.len_context),
        toponyms: pad_to(toponyms, config.len_toponyms),
        target: pad_to(target, config.len_target),
        target_positions_context,
        toponym_positions_context,
        target_positions_toponyms,
    }
}

/// Replaces the target surface form with padding: clears channel c and the
/// target token positions inside channels a and b. Idempotent.
pub fn mask_target(bundle: &FeatureBundle) -> FeatureBundle {
    let mut out = bundle.clone();
    for &pos in &bundle.target_positions_context {
        out.context[pos] = PAD_INDEX;
    }
    for &pos in &bundle.target_positions_toponyms {
        out.toponyms[pos] = PAD_INDEX;
    }
    for slot in &mut out.target {
        *slot = PAD_INDEX;
    }
    out
}

/// Masks every toponym: everything [`mask_target`] does, plus all of
/// channel b and all toponym token positions in channel a. Idempotent.
pub fn mask_all_toponyms(bundle: &FeatureBundle) -> FeatureBundle {
    let mut out = mask_target(bundle);
    for &pos in &bundle.toponym_positions_context {
        out.context[pos] = PAD_INDEX;
    }
    for slot in &mut out.toponyms {
        *slot = PAD_INDEX;
    }
    out
}

/// V x D embedding matrix; row 0 (padding) is always the zero vector.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable(pub Array2<f64>);

impl EmbeddingTable {
    pub fn dim(&self) -> usize {
        self.0.ncols()
    }
}

/// Seeded uniform init in [-0.05, 0.05] with a zero padding row.
pub fn random_embeddings(vocab: &Vocabulary, dim: usize, seed: u64) -> EmbeddingTable {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = Array2::zeros((vocab.len(), dim));
    for row in 1..vocab.len() {
        for col in 0..dim {
            table[[row, col]] = rng.gen_range(-0.05..0.05);
        }
    }
    EmbeddingTable(table)
}

/// Loads pretrained vectors in `token v1 ... vD` text format. Tokens absent
/// from the file keep their seeded random init; row 0 stays zero.
pub fn load_embeddings(
    path: &Path,
    vocab: &Vocabulary,
    dim: usize,
    seed: u64,
) -> Result<EmbeddingTable> {
    let mut table = random_embeddings(vocab, dim, seed);
    let file = File::open(path)?;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_text = line?;
        if line_text.trim().is_empty() {
            continue;
        }
        let mut parts = line_text.split_whitespace();
        let token = parts.next().expect("non-empty line has a first field");
        let values: Vec<f64> = parts
            .map(|p| {
                p.parse::<f64>().map_err(|e| Error::Parse {
                    line: idx + 1,
                    msg: format!("bad embedding value {p:?}: {e}"),
                })
            })
            .collect::<Result<_>>()?;
        if values.len() != dim {
            return Err(Error::Parse {
                line: idx + 1,
                msg: format!(
                    "embedding for {token:?} has {} values, expected {dim}",
                    values.len()
                ),
            });
        }
        if let Some(row) = vocab.lookup(token) {
            for (col, v) in values.into_iter().enumerate() {
                table.0[[row, col]] = v;
            }
        }
    }
    Ok(table)
}
