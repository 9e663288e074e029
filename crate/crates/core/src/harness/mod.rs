//! Seeded experiment sweeps, null calibration and their CSV output.

mod calibrate;
mod format;
mod spec;
mod sweep;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

pub use calibrate::{
    run_null_calibration, simulate_idealized_counts, write_calibration, write_calibration_to, CalibrationReport,
    CalibrationRow, CALIBRATION_COLUMNS,
};
pub use format::{fmt_opt, fmt_sig};
pub use spec::{
    calibration_from_spec, experiments_from_spec, CalibrationPoint, CalibrationSpec, ExperimentSpec, GeneratorSpec,
    SpecFile,
};
pub use sweep::{
    reports_to_string, run_sweep, write_reports, write_reports_to, AlphaOutcome, Method, RateReport, RateRow,
    RepetitionRecord, CSV_COLUMNS,
};

use crate::error::{Error, Result};

/// False positive rate over the features outside `truth` and false negative
/// rate over `truth`; the latter is `None` when `truth` is empty. Duplicate
/// indices count once.
pub fn compute_rates(selected: &[usize], truth: &[usize], feature_count: usize) -> (f64, Option<f64>) {
    let mut is_true = vec![false; feature_count];
    for &t in truth {
        is_true[t] = true;
    }
    let positives = is_true.iter().filter(|&&b| b).count();
    let mut is_selected = vec![false; feature_count];
    for &s in selected {
        is_selected[s] = true;
    }
    let false_pos = (0..feature_count).filter(|&j| is_selected[j] && !is_true[j]).count();
    let missed = (0..feature_count).filter(|&j| is_true[j] && !is_selected[j]).count();
    let negatives = feature_count - positives;
    let fpr = if negatives == 0 {
        0.0
    } else {
        false_pos as f64 / negatives as f64
    };
    let fnr = (positives > 0).then(|| missed as f64 / positives as f64);
    (fpr, fnr)
}

fn write_with_context(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>) -> Result<()> {
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io_err)?);
    body(&mut w).map_err(io_err)?;
    w.flush().map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rates_examples() {
        assert_eq!(compute_rates(&[2, 3], &[2, 3], 10), (0.0, Some(0.0)));
        assert_eq!(compute_rates(&[], &[1], 10), (0.0, Some(1.0)));
        assert_eq!(compute_rates(&[0, 8], &[8, 9], 10), (1.0 / 8.0, Some(0.5)));
        assert_eq!(compute_rates(&[0, 1], &[], 4), (0.5, None));
    }

    #[test]
    fn unwritable_path_reports_file() {
        let err = write_with_context(Path::new("/nonexistent-dir/x.csv"), |_| Ok(())).unwrap_err();
        assert!(err.to_string().contains("/nonexistent-dir/x.csv"));
    }
}
