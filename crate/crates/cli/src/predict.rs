//! Inference over an evaluation set, optionally gazetteer-constrained, and
//! the population baseline.

use std::collections::BTreeMap;
use std::io::Write;
use std::str::FromStr;

use anyhow::Context;
use rayon::prelude::*;
use serde::Serialize;

use mlgeo_core::cellgrid::CellId;
use mlgeo_core::corpus::{self, EvalRecord};
use mlgeo_core::error::Error;
use mlgeo_core::features::{extract_features, mask_all_toponyms, mask_target};
use mlgeo_core::gazetteer::{load_gazetteer, Gazetteer};
use mlgeo_core::model::{load_model, InferenceMode, SavedModel, DEFAULT_TOP_K};

use crate::config::ConfigFile;
use crate::fileio::write_atomic;
use crate::{Ablation, BaselineArgs, PredictArgs};

/// Default population bias, the operating point for constrained selection.
const DEFAULT_POP_BIAS: f64 = 0.90;

#[derive(Serialize)]
struct PredRow {
    /// Token of the winning cell.
    token: String,
    /// Final predicted point: the cell center, or the gazetteer candidate
    /// when constrained selection applied.
    lat: f64,
    lng: f64,
    /// Center of the winning cell, kept alongside gazetteer output.
    cell_lat: f64,
    cell_lng: f64,
    /// Per-level argmax cell tokens.
    levels: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gazetteer_name: Option<String>,
    /// True when the mention was missing from the gazetteer and the
    /// unconstrained point was kept.
    #[serde(skip_serializing_if = "Option::is_none")]
    gazetteer_fallback: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dataset_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    doc_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mention: Option<String>,
}

fn predict_record(
    saved: &SavedModel,
    record: &EvalRecord,
    mode: InferenceMode,
    top_k: usize,
    ablate: Ablation,
    gazetteer: Option<&Gazetteer>,
    pop_bias: f64,
) -> Result<PredRow, Error> {
    let mut bundle = extract_features(
        &record.context_tokens,
        &record.toponym_spans,
        record.target_span,
        &saved.vocab,
        &saved.model.config.features,
    );
    bundle = match ablate {
        Ablation::None => bundle,
        Ablation::Target => mask_target(&bundle),
        Ablation::AllToponyms => mask_all_toponyms(&bundle),
    };
    let prediction = saved.model.predict(&bundle, mode, top_k)?;

    let mut levels = BTreeMap::new();
    for (level, probs) in prediction.distributions.entries() {
        let mut argmax = 0;
        for (i, &p) in probs.iter().enumerate() {
            if p > probs[argmax] {
                argmax = i;
            }
        }
        levels.insert(
            level.to_string(),
            CellId::from_class_index(*level, argmax)?.token(),
        );
    }

    let cell_center = prediction.point;
    let mut row = PredRow {
        token: prediction.best_cell.token(),
        lat: cell_center.lat(),
        lng: cell_center.lng(),
        cell_lat: cell_center.lat(),
        cell_lng: cell_center.lng(),
        levels,
        gazetteer_name: None,
        gazetteer_fallback: None,
        dataset_id: record.dataset_id.clone(),
        doc_id: record.doc_id.clone(),
        mention: record.mention.clone(),
    };
    if let Some(g) = gazetteer {
        match g.constrained_select(&record.mention_text(), cell_center, pop_bias) {
            Ok(candidate) => {
                row.lat = candidate.location.lat();
                row.lng = candidate.location.lng();
                row.gazetteer_name = Some(candidate.name.clone());
                row.gazetteer_fallback = Some(false);
            }
            Err(Error::NoCandidate(_)) => {
                // unknown mention: keep the unconstrained point, flagged
                row.gazetteer_fallback = Some(true);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(row)
}

pub fn run(args: PredictArgs) -> anyhow::Result<()> {
    let file = match &args.config {
        Some(path) => ConfigFile::load(path)?,
        None => ConfigFile::empty(),
    };
    let mode_text = match &args.mode {
        Some(m) => m.clone(),
        None => file.string("mode")?.unwrap_or_else(|| "combined".to_string()),
    };
    let mode = InferenceMode::from_str(&mode_text)?;
    let top_k = args
        .top_k
        .or(file.usize("top_k")?)
        .unwrap_or(DEFAULT_TOP_K);
    let pop_bias = args
        .pop_bias
        .or(file.f64("pop_bias")?)
        .unwrap_or(DEFAULT_POP_BIAS);

    let saved = load_model(&args.model)
        .with_context(|| format!("loading model {}", args.model.display()))?;
    let records = corpus::load_eval(&args.eval)?;
    let gazetteer = match &args.gazetteer {
        Some(path) => Some(load_gazetteer(path)?),
        None => None,
    };
    let ablate = args.ablate.unwrap_or(Ablation::None);

    let rows = records
        .par_iter()
        .map(|record| {
            predict_record(
                &saved,
                record,
                mode,
                top_k,
                ablate,
                gazetteer.as_ref(),
                pop_bias,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;

    write_atomic(&args.out, |w| {
        for row in &rows {
            serde_json::to_writer(&mut *w, row)?;
            writeln!(w)?;
        }
        Ok(())
    })?;
    eprintln!("predictions: {} records -> {}", rows.len(), args.out.display());
    Ok(())
}

#[derive(Serialize)]
struct BaselineRow {
    lat: f64,
    lng: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    name: Option<String>,
    /// True when the mention was missing from the gazetteer; the point
    /// falls back to (0, 0).
    fallback: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    dataset_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    doc_id: Option<String>,
    mention: String,
}

pub fn run_baseline(args: BaselineArgs) -> anyhow::Result<()> {
    let records = corpus::load_eval(&args.eval)?;
    let gazetteer = load_gazetteer(&args.gazetteer)?;
    let mut rows = Vec::with_capacity(records.len());
    for record in &records {
        let mention = record.mention_text();
        let row = match gazetteer.pop_baseline(&mention) {
            Ok(candidate) => BaselineRow {
                lat: candidate.location.lat(),
                lng: candidate.location.lng(),
                name: Some(candidate.name.clone()),
                fallback: false,
                dataset_id: record.dataset_id.clone(),
                doc_id: record.doc_id.clone(),
                mention,
            },
            Err(Error::NoCandidate(_)) => BaselineRow {
                lat: 0.0,
                lng: 0.0,
                name: None,
                fallback: true,
                dataset_id: record.dataset_id.clone(),
                doc_id: record.doc_id.clone(),
                mention,
            },
            Err(e) => return Err(e.into()),
        };
        rows.push(row);
    }
    write_atomic(&args.out, |w| {
        for row in &rows {
            serde_json::to_writer(&mut *w, row)?;
            writeln!(w)?;
        }
        Ok(())
    })?;
    eprintln!("baseline: {} records -> {}", rows.len(), args.out.display());
    Ok(())
}
