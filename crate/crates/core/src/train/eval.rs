use serde::{Deserialize, Serialize};

use super::TrainError;
use crate::dsp::FeatureMap;
use crate::model::{Classifier, Prediction};

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub class_names: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(class_names: Vec<String>) -> Self {
        let c = class_names.len();
        Self {
            class_names,
            counts: vec![vec![0; c]; c],
        }
    }

    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn record(&mut self, truth: usize, predicted: usize) {
        self.counts[truth][predicted] += 1;
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.n_classes()).map(|i| self.counts[i][i]).sum()
    }

    /// `100 · trace / total`; 0 for an empty matrix.
    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            t => 100.0 * self.trace() as f64 / t as f64,
        }
    }

    pub fn row_sums(&self) -> Vec<u64> {
        self.counts.iter().map(|r| r.iter().sum()).collect()
    }

    pub fn column_sums(&self) -> Vec<u64> {
        (0..self.n_classes())
            .map(|j| self.counts.iter().map(|r| r[j]).sum())
            .collect()
    }

    /// CSV whose first row and first column hold the class names.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["true\\predicted".to_string()];
        header.extend(self.class_names.iter().cloned());
        w.write_record(&header).expect("in-memory csv");
        for (name, row) in self.class_names.iter().zip(&self.counts) {
            let mut rec = vec![name.clone()];
            rec.extend(row.iter().map(u64::to_string));
            w.write_record(&rec).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8")
    }

    pub fn from_csv(text: &str) -> Result<Self, TrainError> {
        let bad = |m: String| TrainError::BadReport(format!("confusion matrix: {m}"));
        let mut r = csv::ReaderBuilder::new().has_headers(false).from_reader(text.as_bytes());
        let mut records = r.records();
        let header = records.next().ok_or_else(|| bad("empty file".into()))?.map_err(|e| bad(e.to_string()))?;
        let class_names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut m = ConfusionMatrix::new(class_names);
        let mut rows = 0;
        for (i, rec) in records.enumerate() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            if i >= m.n_classes() || rec.len() != m.n_classes() + 1 {
                return Err(bad(format!("row {} has the wrong shape", i + 1)));
            }
            if rec[0] != m.class_names[i] {
                return Err(bad(format!("row {} is labelled '{}', expected '{}'", i + 1, &rec[0], m.class_names[i])));
            }
            for j in 0..m.n_classes() {
                m.counts[i][j] = rec[j + 1].trim().parse().map_err(|_| bad(format!("bad count '{}'", &rec[j + 1])))?;
            }
            rows += 1;
        }
        if rows != m.n_classes() {
            return Err(bad(format!("{rows} rows for {} classes", m.n_classes())));
        }
        Ok(m)
    }

    /// Aligned plain-text table for terminals.
    pub fn to_text_table(&self) -> String {
        let width = self
            .class_names
            .iter()
            .map(String::len)
            .chain(self.counts.iter().flatten().map(|c| c.to_string().len()))
            .max()
            .unwrap_or(1)
            .max(4);
        let mut out = format!("{:>width$}", "");
        for name in &self.class_names {
            out.push_str(&format!(" {name:>width$}"));
        }
        out.push('\n');
        for (name, row) in self.class_names.iter().zip(&self.counts) {
            out.push_str(&format!("{name:>width$}"));
            for c in row {
                out.push_str(&format!(" {c:>width$}"));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    /// Percentage of correctly classified examples.
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub predictions: Vec<Prediction>,
}

/// Predicts every feature map on its own (no padding) and tallies the
/// results against `labels`.
pub fn evaluate<M: Classifier + ?Sized>(
    model: &M,
    features: &[FeatureMap],
    labels: &[usize],
) -> Result<Evaluation, TrainError> {
    assert_eq!(features.len(), labels.len(), "one label per feature map");
    if features.is_empty() {
        return Err(TrainError::DatasetTooSmall("empty test set".into()));
    }
    let mut confusion = ConfusionMatrix::new(model.class_names().to_vec());
    let mut predictions = Vec::with_capacity(features.len());
    for (fm, &truth) in features.iter().zip(labels) {
        let p = model.predict(fm)?;
        confusion.record(truth, p.argmax_index);
        predictions.push(p);
    }
    Ok(Evaluation {
        accuracy: confusion.accuracy(),
        confusion,
        predictions,
    })
}
