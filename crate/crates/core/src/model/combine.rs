//! Combined multi-level scoring: the score of a finest-level cell is the
//! product of its own probability and the probabilities of its ancestors at
//! every coarser configured level.

use super::{LevelDistributions, Model};
use crate::cellgrid::CellId;
use crate::error::{Error, Result};
use crate::features::FeatureBundle;

/// Default number of finest-level cells scored before the argmax guard
/// widens the candidate set.
pub const DEFAULT_TOP_K: usize = 4096;

/// Sparse combined scores over finest-level cells with nonzero finest
/// probability, sorted by cell id.
#[derive(Debug, Clone)]
pub struct CombinedScores {
    pub finest_level: u8,
    pub scores: Vec<(CellId, f64)>,
    /// Argmax of the combined score; ties go to the smaller cell id.
    pub best: CellId,
}

impl CombinedScores {
    pub fn score_of(&self, cell: CellId) -> Option<f64> {
        self.scores
            .binary_search_by_key(&cell, |&(c, _)| c)
            .ok()
            .map(|i| self.scores[i].1)
    }
}

/// Scores finest-level cells by the product of per-level ancestor
/// probabilities and returns the sparse score map plus the argmax.
///
/// Only the `top_k` most probable finest cells are scored at first. Because
/// every ancestor probability is at most one, a cell's combined score never
/// exceeds its finest-level probability, so once the best candidate score
/// reaches the largest finest probability outside the candidate set the
/// argmax is provably inside; until then the set keeps doubling.
pub fn combine_levels(dists: &LevelDistributions, top_k: usize) -> Result<CombinedScores> {
    let (finest, finest_probs) = dists.finest();
    let count = finest_probs.len();

    let mut order: Vec<usize> = (0..count).collect();
    order.sort_unstable_by(|&a, &b| finest_probs[b].total_cmp(&finest_probs[a]).then(a.cmp(&b)));
    let nonzero = count - order.iter().rev().take_while(|&&i| finest_probs[i] <= 0.0).count();
    if nonzero == 0 {
        return Err(Error::InvalidArgument(
            "no nonzero probability at the finest level".into(),
        ));
    }

    let coarser: Vec<(u32, &[f64])> = dists
        .entries()
        .iter()
        .rev()
        .skip(1)
        .map(|(level, probs)| (2 * (finest - level) as u32, probs.as_slice()))
        .collect();

    let score_of = |idx: usize| {
        let mut s = finest_probs[idx];
        for &(shift, probs) in &coarser {
            s *= probs[idx >> shift];
        }
        s
    };

    let mut k = top_k.clamp(1, count);
    loop {
        let take = k.min(nonzero);
        let mut best_idx = order[0];
        let mut best_score = f64::NEG_INFINITY;
        for &idx in &order[..take] {
            let s = score_of(idx);
            if s > best_score || (s == best_score && idx < best_idx) {
                best_score = s;
                best_idx = idx;
            }
        }
        // largest finest probability outside the candidate set bounds every
        // outside combined score
        let outside = if k >= count { 0.0 } else { finest_probs[order[k]] };
        if take == nonzero || outside <= 0.0 || best_score > outside {
            let mut scores: Vec<(usize, f64)> =
                order[..take].iter().map(|&idx| (idx, score_of(idx))).collect();
            scores.sort_unstable_by_key(|&(idx, _)| idx);
            let scores = scores
                .into_iter()
                .map(|(idx, s)| Ok((CellId::from_class_index(finest, idx)?, s)))
                .collect::<Result<Vec<_>>>()?;
            return Ok(CombinedScores {
                finest_level: finest,
                scores,
                best: CellId::from_class_index(finest, best_idx)?,
            });
        }
        k = (k * 2).min(count);
    }
}

/// How to turn per-level distributions into one cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InferenceMode {
    /// Product of ancestor probabilities over all configured levels.
    Combined,
    /// Argmax of a single configured level.
    Only(u8),
}

impl std::str::FromStr for InferenceMode {
    type Err = Error;

    /// `combined` or `only-<level>`.
    fn from_str(s: &str) -> Result<Self> {
        if s == "combined" {
            return Ok(InferenceMode::Combined);
        }
        if let Some(level) = s.strip_prefix("only-") {
            let level: u8 = level.parse().map_err(|_| {
                Error::InvalidArgument(format!("bad inference mode {s:?}"))
            })?;
            return Ok(InferenceMode::Only(level));
        }
        Err(Error::InvalidArgument(format!(
            "unknown inference mode {s:?} (expected `combined` or `only-<level>`)"
        )))
    }
}

/// Distributions, combined scores, the winning cell, and its center point.
#[derive(Debug, Clone)]
pub struct Prediction {
    pub distributions: LevelDistributions,
    pub scores: CombinedScores,
    pub best_cell: CellId,
    pub point: crate::cellgrid::LatLng,
}

impl Model {
    /// Full inference for one example.
    pub fn predict(
        &self,
        bundle: &FeatureBundle,
        mode: InferenceMode,
        top_k: usize,
    ) -> Result<Prediction> {
        let distributions = self.forward(bundle)?;
        let scores = match mode {
            InferenceMode::Combined => combine_levels(&distributions, top_k)?,
            InferenceMode::Only(level) => combine_levels(&distributions.only(level)?, top_k)?,
        };
        let best_cell = scores.best;
        let point = best_cell.center();
        Ok(Prediction {
            distributions,
            scores,
            best_cell,
            point,
        })
    }
}
