//! Distance-error evaluation metrics: accuracy@161, mean error, and the
//! area under the sorted log-error curve.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cellgrid::LatLng;
use crate::error::{Error, Result};
use crate::geodesy::great_circle_km;

/// Threshold for accuracy@161: 161 km is 100 miles.
pub const ACCURACY_THRESHOLD_KM: f64 = 161.0;

/// Normalization constant for the log-error curve. Largest error distance
/// between two points on Earth used by the standard geocoding AUC metric.
pub const MAX_ERROR_KM: f64 = 20039.0;

/// Distance between a predicted point and the true location, in km.
pub fn error_km(pred: LatLng, gold: LatLng) -> f64 {
    great_circle_km(pred, gold)
}

/// Fraction of errors at or below `threshold_km` (inclusive).
pub fn accuracy_at(errors: &[f64], threshold_km: f64) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::UndefinedMetric("accuracy of empty error list"));
    }
    let hits = errors.iter().filter(|&&e| e <= threshold_km).count();
    Ok(hits as f64 / errors.len() as f64)
}

/// Arithmetic mean of the errors, in km.
pub fn mean_error(errors: &[f64]) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::UndefinedMetric("mean of empty error list"));
    }
    Ok(errors.iter().sum::<f64>() / errors.len() as f64)
}

fn log_normalized(e: f64) -> f64 {
    (1.0 + e).ln() / (1.0 + MAX_ERROR_KM).ln()
}

/// Area under the discrete curve of sorted, log-scaled, normalized error
/// distances: the equal-width left Riemann sum `(1/n) * sum ln(1+e_i) /
/// ln(1+20039)`. Lower is better; always in [0, 1] for errors within range.
pub fn auc_log_error(errors: &[f64]) -> Result<f64> {
    if errors.is_empty() {
        return Err(Error::UndefinedMetric("AUC of empty error list"));
    }
    if let Some(bad) = errors.iter().find(|e| !e.is_finite() || **e < 0.0) {
        return Err(Error::InvalidArgument(format!(
            "negative or non-finite error distance {bad}"
        )));
    }
    Ok(errors.iter().map(|&e| log_normalized(e)).sum::<f64>() / errors.len() as f64)
}

/// Summary of an evaluation run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub n: usize,
    pub accuracy_at_161: f64,
    pub mean_error_km: f64,
    pub auc_log_error: f64,
}

pub fn eval_report(errors: &[f64]) -> Result<EvalReport> {
    Ok(EvalReport {
        n: errors.len(),
        accuracy_at_161: accuracy_at(errors, ACCURACY_THRESHOLD_KM)?,
        mean_error_km: mean_error(errors)?,
        auc_log_error: auc_log_error(errors)?,
    })
}

/// Writes the sorted error curve as CSV with columns
/// `rank_fraction,error_km,log_error_normalized`.
pub fn error_curve_csv(errors: &[f64], path: &Path) -> Result<()> {
    let file = File::create(path)?;
    let mut w = BufWriter::new(file);
    write_error_curve(errors, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_error_curve(errors: &[f64], w: &mut impl Write) -> Result<()> {
    if errors.is_empty() {
        return Err(Error::UndefinedMetric("error curve of empty error list"));
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    writeln!(w, "rank_fraction,error_km,log_error_normalized")?;
    let n = sorted.len();
    for (i, e) in sorted.iter().enumerate() {
        writeln!(w, "{},{},{}", (i + 1) as f64 / n as f64, e, log_normalized(*e))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_boundary_is_inclusive() {
        let errors = [0.0, 160.9, 161.0, 161.1];
        assert_eq!(accuracy_at(&errors, ACCURACY_THRESHOLD_KM).unwrap(), 0.75);
    }

    #[test]
    fn accuracy_all_zero() {
        assert_eq!(accuracy_at(&[0.0; 5], 161.0).unwrap(), 1.0);
    }

    #[test]
    fn mean_basics() {
        assert_eq!(mean_error(&[100.0, 300.0]).unwrap(), 200.0);
        assert_eq!(mean_error(&[42.5]).unwrap(), 42.5);
    }

    #[test]
    fn empty_inputs_are_undefined() {
        assert!(accuracy_at(&[], 161.0).is_err());
        assert!(mean_error(&[]).is_err());
        assert!(auc_log_error(&[]).is_err());
    }

    #[test]
    fn auc_extremes() {
        assert_eq!(auc_log_error(&[0.0, 0.0, 0.0]).unwrap(), 0.0);
        let top = auc_log_error(&[MAX_ERROR_KM; 4]).unwrap();
        assert!((top - 1.0).abs() < 1e-12);
    }

    #[test]
    fn auc_fixture() {
        // Frozen from an independent high-precision evaluation of
        // (ln 1 + ln 162 + ln 5001) / (3 ln 20040).
        let got = auc_log_error(&[0.0, 161.0, 5000.0]).unwrap();
        assert!((got - 0.45782677456300419).abs() < 1e-12, "{got}");
    }

    #[test]
    fn auc_rejects_negative() {
        assert!(auc_log_error(&[10.0, -1.0]).is_err());
    }

    #[test]
    fn curve_is_sorted_and_round_trips() {
        let errors = [500.0, 0.0, 20.0, 161.0];
        let mut buf = Vec::new();
        write_error_curve(&errors, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut rows = text.lines().skip(1).map(|l| {
            let mut parts = l.split(',').map(|x| x.parse::<f64>().unwrap());
            (
                parts.next().unwrap(),
                parts.next().unwrap(),
                parts.next().unwrap(),
            )
        });
        let mut sorted = errors.to_vec();
        sorted.sort_by(|a, b| a.total_cmp(b));
        let mut prev = f64::NEG_INFINITY;
        for expect in sorted {
            let (_, e, log_norm) = rows.next().unwrap();
            assert!(e >= prev);
            prev = e;
            assert!((e - expect).abs() < 1e-9);
            assert!((log_norm - log_normalized(expect)).abs() < 1e-9);
        }
        assert!(rows.next().is_none());
    }

    #[test]
    fn single_row_curve() {
        let mut buf = Vec::new();
        write_error_curve(&[7.0], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 2);
    }
}
