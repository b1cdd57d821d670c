use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use super::gru::GruModel;
use super::train::Sequence;
use crate::error::{Error, Result};
use crate::radar::GestureClass;

/// Rows are true classes, columns predicted classes.
pub type ConfusionMatrix = [[u32; GestureClass::COUNT]; GestureClass::COUNT];

/// Frame-to-recording aggregation: majority vote of the non-Background
/// per-frame predictions (argmax, ties to the lower class). Vote ties go to
/// the class with the larger summed log-probability over its voting frames.
/// A recording with no non-Background vote is Background.
pub fn recording_prediction(log_probs: ArrayView2<'_, f64>) -> GestureClass {
    let n = GestureClass::COUNT.min(log_probs.ncols());
    let mut votes = [0usize; GestureClass::COUNT];
    let mut mass = [0.0f64; GestureClass::COUNT];
    for row in log_probs.rows() {
        let mut arg = 0;
        for c in 1..n {
            if row[c] > row[arg] {
                arg = c;
            }
        }
        votes[arg] += 1;
        mass[arg] += row[arg];
    }
    let mut winner: Option<usize> = None;
    for c in (1..n).filter(|&c| votes[c] > 0) {
        winner = match winner {
            Some(w) if votes[w] > votes[c] || (votes[w] == votes[c] && mass[w] >= mass[c]) => {
                Some(w)
            }
            _ => Some(c),
        };
    }
    GestureClass::from_index(winner.unwrap_or(0)).expect("index below COUNT")
}

/// Accuracy over recordings whose true class is a gesture; `None` when there
/// are none.
pub fn gesture_accuracy(pairs: &[(GestureClass, GestureClass)]) -> Option<f64> {
    let gestures: Vec<_> = pairs
        .iter()
        .filter(|(truth, _)| *truth != GestureClass::Background)
        .collect();
    if gestures.is_empty() {
        return None;
    }
    let correct = gestures.iter().filter(|(t, p)| t == p).count();
    Some(correct as f64 / gestures.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Gesture accuracy of each model.
    pub accuracies: Vec<f64>,
    pub mean: f64,
    /// Sample standard deviation (0 for a single model).
    pub std: f64,
    pub confusion: Vec<ConfusionMatrix>,
}

pub fn predict_all(model: &GruModel, data: &[Sequence]) -> Result<Vec<GestureClass>> {
    data.iter()
        .map(|s| Ok(recording_prediction(model.forward(s.features.view())?.view())))
        .collect()
}

pub fn evaluate(models: &[GruModel], test: &[Sequence]) -> Result<EvalReport> {
    if models.is_empty() {
        return Err(Error::InvalidArgument("no models to evaluate".into()));
    }
    if !test.iter().any(|s| s.class != GestureClass::Background) {
        return Err(Error::InvalidArgument("empty test set".into()));
    }
    let mut accuracies = Vec::with_capacity(models.len());
    let mut confusion = Vec::with_capacity(models.len());
    for model in models {
        let predicted = predict_all(model, test)?;
        let mut matrix = [[0u32; GestureClass::COUNT]; GestureClass::COUNT];
        let pairs: Vec<_> = test.iter().map(|s| s.class).zip(predicted).collect();
        for (t, p) in &pairs {
            matrix[t.index()][p.index()] += 1;
        }
        accuracies.push(gesture_accuracy(&pairs).expect("test set has gestures"));
        confusion.push(matrix);
    }
    let n = accuracies.len() as f64;
    let mean = accuracies.iter().sum::<f64>() / n;
    let std = if accuracies.len() > 1 {
        (accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(EvalReport {
        accuracies,
        mean,
        std,
        confusion,
    })
}

pub fn write_confusion_csv<W: std::io::Write>(writer: W, m: &ConfusionMatrix) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["true\\predicted".to_string()];
    header.extend(GestureClass::ALL.iter().map(|c| c.name().to_string()));
    w.write_record(&header)?;
    for class in GestureClass::ALL {
        let mut row = vec![class.name().to_string()];
        row.extend(m[class.index()].iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
