//! Applies coordinate-unification patches to an evaluation set.

use serde::Serialize;

use mlgeo_core::corpus;

use crate::fileio::write_atomic;
use crate::UnifyArgs;

#[derive(Serialize)]
struct UnifyReport {
    records: usize,
    applied: usize,
    mismatched: usize,
    warnings: Vec<String>,
}

pub fn run(args: UnifyArgs) -> anyhow::Result<()> {
    let mut records = corpus::load_eval(&args.eval)?;
    let patches = corpus::load_patches(&args.patches)?;
    let report = corpus::apply_patches(&mut records, &patches);
    for warning in &report.warnings {
        eprintln!("warning: {warning}");
    }
    write_atomic(&args.out, |w| {
        corpus::write_eval_records(&records, w)?;
        Ok(())
    })?;
    let summary = UnifyReport {
        records: records.len(),
        applied: report.applied,
        mismatched: report.mismatched,
        warnings: report.warnings,
    };
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}
