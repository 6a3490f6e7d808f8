//! Metrics over a predictions file against gold coordinates, overall and
//! per dataset.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};

use anyhow::Context;
use serde::{Deserialize, Serialize};

use mlgeo_core::cellgrid::LatLng;
use mlgeo_core::corpus;
use mlgeo_core::metrics::{self, EvalReport};

use crate::fileio::write_atomic;
use crate::EvaluateArgs;

#[derive(Deserialize)]
struct PredRow {
    lat: f64,
    lng: f64,
}

#[derive(Serialize)]
struct FullReport {
    overall: EvalReport,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    per_dataset: BTreeMap<String, EvalReport>,
}

pub fn run(args: EvaluateArgs) -> anyhow::Result<()> {
    let gold = corpus::load_eval(&args.eval)?;
    let file = File::open(&args.predictions)
        .with_context(|| format!("opening {}", args.predictions.display()))?;
    let mut predictions = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: PredRow = serde_json::from_str(&line)
            .with_context(|| format!("predictions line {}", idx + 1))?;
        predictions.push(LatLng::new(row.lat, row.lng)?);
    }
    if predictions.len() != gold.len() {
        anyhow::bail!(
            "{} predictions but {} gold records",
            predictions.len(),
            gold.len()
        );
    }
    if gold.is_empty() {
        anyhow::bail!("no records to evaluate");
    }

    let errors: Vec<f64> = predictions
        .iter()
        .zip(&gold)
        .map(|(pred, record)| metrics::error_km(*pred, record.gold))
        .collect();

    let mut by_dataset: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for (record, &err) in gold.iter().zip(&errors) {
        if let Some(id) = &record.dataset_id {
            by_dataset.entry(id.clone()).or_default().push(err);
        }
    }
    let report = FullReport {
        overall: metrics::eval_report(&errors)?,
        per_dataset: by_dataset
            .into_iter()
            .map(|(id, errs)| Ok((id, metrics::eval_report(&errs)?)))
            .collect::<anyhow::Result<_>>()?,
    };

    let json = serde_json::to_string_pretty(&report)?;
    println!("{json}");
    if let Some(path) = &args.report {
        write_atomic(path, |w| {
            writeln!(w, "{json}")?;
            Ok(())
        })?;
    }
    if let Some(path) = &args.curve {
        write_atomic(path, |w| {
            metrics::write_error_curve(&errors, w)?;
            Ok(())
        })?;
    }
    Ok(())
}
