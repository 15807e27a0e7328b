//! CSV outputs.
//!
//! `history.csv` columns: `epoch`, `train_loss`, `test_accuracy`, then
//! `loss_p0` … `loss_p{K-1}`. `train_loss` is the shard-size weighted mean
//! of the participant losses of the model after that epoch's update;
//! `test_accuracy` is empty on epochs without evaluation. Wall-clock time
//! goes to `timing.csv` (`epoch`, `seconds`) so that the history of a
//! seeded run is byte-for-byte reproducible.

use std::path::Path;

use qfl_core::federated::RoundRecord;

use crate::error::{CliError, Result};

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::Data(format!("{}: {other:?}", path.display())),
    }
}

pub fn history_header(participants: usize) -> Vec<String> {
    let mut h = vec!["epoch".to_string(), "train_loss".into(), "test_accuracy".into()];
    h.extend((0..participants).map(|k| format!("loss_p{k}")));
    h
}

pub fn write_history(path: &Path, participants: usize, records: &[RoundRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(history_header(participants))
        .map_err(|e| csv_error(path, e))?;
    for r in records {
        let mut row = vec![
            r.epoch.to_string(),
            r.train_loss.to_string(),
            r.test_accuracy.map(|a| a.to_string()).unwrap_or_default(),
        ];
        row.extend(r.participant_losses.iter().map(f64::to_string));
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

pub fn write_timing(path: &Path, records: &[RoundRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(["epoch", "seconds"]).map_err(|e| csv_error(path, e))?;
    for r in records {
        w.write_record([r.epoch.to_string(), format!("{:.6}", r.duration_secs)])
            .map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// `(epoch, train_loss, test_accuracy)` rows of a history file.
pub fn read_history(path: &Path) -> Result<Vec<(usize, f64, Option<f64>)>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let bad = |what: &str| CliError::Data(format!("{}: malformed {what}", path.display()));
    r.records()
        .map(|rec| {
            let rec = rec.map_err(|e| csv_error(path, e))?;
            let epoch = rec.get(0).and_then(|s| s.parse().ok()).ok_or_else(|| bad("epoch"))?;
            let loss = rec
                .get(1)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| bad("train_loss"))?;
            let acc = match rec.get(2) {
                Some("") | None => None,
                Some(s) => Some(s.parse().map_err(|_| bad("test_accuracy"))?),
            };
            Ok((epoch, loss, acc))
        })
        .collect()
}

/// First epoch whose loss is at or below `threshold`, counting the initial
/// model as epoch 0.
pub fn epochs_to_threshold(
    initial_loss: f64,
    losses: impl IntoIterator<Item = (usize, f64)>,
    threshold: f64,
) -> Option<usize> {
    if initial_loss <= threshold {
        return Some(0);
    }
    losses.into_iter().find(|&(_, l)| l <= threshold).map(|(e, _)| e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use qfl_core::ParamVector;

    fn record(epoch: usize, loss: f64, acc: Option<f64>) -> RoundRecord {
        RoundRecord {
            epoch,
            global_params: ParamVector::zeros(2),
            train_loss: loss,
            participant_losses: vec![loss, loss * 2.0],
            test_accuracy: acc,
            duration_secs: 0.25,
        }
    }

    #[test]
    fn history_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("history.csv");
        let recs = [record(1, std::f64::consts::LN_2, Some(0.5)), record(2, 0.1, None)];
        write_history(&path, 2, &recs).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text.lines().next().unwrap(),
            "epoch,train_loss,test_accuracy,loss_p0,loss_p1"
        );
        assert_eq!(
            read_history(&path).unwrap(),
            vec![(1, std::f64::consts::LN_2, Some(0.5)), (2, 0.1, None)]
        );
    }

    #[test]
    fn threshold_epochs() {
        let losses = [(1, 0.6), (2, 0.4), (3, 0.3), (4, 0.2)];
        assert_eq!(epochs_to_threshold(0.7, losses, 0.35), Some(3));
        assert_eq!(epochs_to_threshold(0.3, losses, 0.35), Some(0));
        assert_eq!(epochs_to_threshold(0.7, losses, 0.1), None);
    }
}
