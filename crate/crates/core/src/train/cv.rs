use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{evaluate, train, ConfusionMatrix, TrainConfig, TrainError, TrainReport};
use crate::dataset::{split_indices, DatasetManifest, SplitPlan};
use crate::dsp::{FeatureConfig, FeatureMap};
use crate::model::{build_fcn, save_model_file, FcnConfig, FcnModel};
use crate::nn::Rng;

/// Accuracy statistics over folds, in percent. `std` is the sample
/// standard deviation (n − 1 denominator), 0 for a single fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvSummary {
    pub per_fold: Vec<f64>,
    pub mean: f64,
    pub median: f64,
    pub std: f64,
}

impl CvSummary {
    pub fn from_per_fold(per_fold: Vec<f64>) -> Self {
        assert!(!per_fold.is_empty(), "at least one fold");
        let n = per_fold.len() as f64;
        let mean = per_fold.iter().sum::<f64>() / n;
        let mut sorted = per_fold.clone();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        let median = if sorted.len() % 2 == 1 {
            sorted[mid]
        } else {
            0.5 * (sorted[mid - 1] + sorted[mid])
        };
        let std = if per_fold.len() < 2 {
            0.0
        } else {
            (per_fold.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self {
            per_fold,
            mean,
            median,
            std,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain struct")
    }

    /// Parses and checks that the statistics agree with `per_fold`.
    pub fn from_json(text: &str) -> Result<Self, TrainError> {
        let s: CvSummary = serde_json::from_str(text).map_err(|e| TrainError::BadReport(e.to_string()))?;
        if s.per_fold.is_empty() {
            return Err(TrainError::BadReport("summary has no folds".into()));
        }
        let again = CvSummary::from_per_fold(s.per_fold.clone());
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(1.0);
        if !(close(s.mean, again.mean) && close(s.median, again.median) && close(s.std, again.std)) {
            return Err(TrainError::BadReport("summary statistics disagree with per-fold values".into()));
        }
        Ok(s)
    }
}

/// Aligned table with one row per descriptor:
/// `Audio Descriptor  Mean  Median  Std`.
pub fn render_summary_table(rows: &[(String, CvSummary)]) -> String {
    let w = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max("Audio Descriptor".len());
    let mut out = format!("{:<w$}  {:>8}  {:>8}  {:>8}\n", "Audio Descriptor", "Mean", "Median", "Std");
    for (name, s) in rows {
        out.push_str(&format!("{name:<w$}  {:>8.3}  {:>8.3}  {:>8.4}\n", s.mean, s.median, s.std));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub k: usize,
    /// Training share of each split.
    pub ratio: f64,
    pub seed: u64,
    pub stratified: bool,
    /// Where per-fold models, histories and confusion matrices go.
    pub out_dir: Option<PathBuf>,
    /// Recorded in every fold's model.
    pub features: Option<FeatureConfig>,
}

impl Default for CvOptions {
    fn default() -> Self {
        Self {
            k: 5,
            ratio: 0.8,
            seed: 0,
            stratified: false,
            out_dir: None,
            features: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldResult {
    pub fold: usize,
    pub seed: u64,
    pub accuracy: f64,
    pub confusion: ConfusionMatrix,
    pub report: TrainReport,
    pub model: FcnModel,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvOutcome {
    pub plan: SplitPlan,
    pub folds: Vec<FoldResult>,
    pub summary: CvSummary,
    /// Fold with the highest test accuracy (lowest index on ties).
    pub best_fold: usize,
}

impl CvOutcome {
    pub fn best(&self) -> &FoldResult {
        &self.folds[self.best_fold]
    }
}

fn pick<T: Clone>(items: &[T], idx: &[usize]) -> Vec<T> {
    idx.iter().map(|&i| items[i].clone()).collect()
}

fn run_fold(
    fold: usize,
    train_idx: &[usize],
    test_idx: &[usize],
    features: &[FeatureMap],
    labels: &[usize],
    class_names: &[String],
    model_cfg: &FcnConfig,
    train_cfg: &TrainConfig,
    opts: &CvOptions,
) -> Result<FoldResult, TrainError> {
    let seed = opts.seed ^ fold as u64;
    let mut init_rng = Rng::new(seed).fork(u64::MAX);
    let mut model = build_fcn(model_cfg.clone(), class_names.to_vec(), &mut init_rng)?;
    model.features = opts.features;
    let cfg = TrainConfig { seed, ..*train_cfg };
    log::info!("fold {fold}: {} train / {} test, seed {seed}", train_idx.len(), test_idx.len());
    let (model, report) = train(model, &pick(features, train_idx), &pick(labels, train_idx), &cfg)?;
    let ev = evaluate(&model, &pick(features, test_idx), &pick(labels, test_idx))?;
    log::info!("fold {fold}: test accuracy {:.2}% after {} epochs", ev.accuracy, report.stopped_epoch);
    Ok(FoldResult {
        fold,
        seed,
        accuracy: ev.accuracy,
        confusion: ev.confusion,
        report,
        model,
    })
}

fn persist(outcome: &CvOutcome, dir: &Path, descriptor_name: &str) -> Result<(), TrainError> {
    std::fs::create_dir_all(dir)?;
    for f in &outcome.folds {
        let fd = dir.join(format!("fold_{}", f.fold));
        std::fs::create_dir_all(&fd)?;
        save_model_file(&f.model, fd.join("model.fcna"))?;
        std::fs::write(fd.join("confusion.csv"), f.confusion.to_csv())?;
        std::fs::write(fd.join("history.csv"), f.report.to_csv())?;
    }
    std::fs::write(
        dir.join("splits.json"),
        serde_json::to_string(&outcome.plan).expect("plain struct"),
    )?;
    std::fs::write(dir.join("summary.json"), outcome.summary.to_json())?;
    std::fs::write(dir.join("best_confusion.csv"), outcome.best().confusion.to_csv())?;
    std::fs::write(
        dir.join("summary.txt"),
        render_summary_table(&[(descriptor_name.to_string(), outcome.summary.clone())]),
    )?;
    Ok(())
}

/// Monte Carlo cross-validation: for each of `opts.k` random splits, a
/// fresh model seeded with `seed ^ fold` is trained on the training share
/// and evaluated on the rest.
///
/// Folds run in parallel on the current rayon pool; results do not depend
/// on the pool size.
pub fn cross_validate(
    manifest: &DatasetManifest,
    features: &[FeatureMap],
    model_cfg: &FcnConfig,
    train_cfg: &TrainConfig,
    opts: &CvOptions,
) -> Result<CvOutcome, TrainError> {
    use rayon::prelude::*;

    if features.len() != manifest.len() {
        return Err(TrainError::InvalidConfig(format!(
            "{} feature maps for {} manifest entries",
            features.len(),
            manifest.len()
        )));
    }
    if let Some(fm) = features.iter().find(|f| f.descriptor() != train_cfg.descriptor) {
        return Err(TrainError::InvalidConfig(format!(
            "features are {}, training config expects {}",
            fm.descriptor(),
            train_cfg.descriptor
        )));
    }
    if model_cfg.n_classes != manifest.n_classes() {
        return Err(TrainError::InvalidConfig(format!(
            "model has {} classes, manifest {}",
            model_cfg.n_classes,
            manifest.n_classes()
        )));
    }
    train_cfg.validate()?;
    let labels = manifest.labels();
    let plan = split_indices(&labels, opts.ratio, opts.k, opts.seed, opts.stratified)?;
    let folds = plan
        .folds
        .par_iter()
        .enumerate()
        .map(|(i, f)| {
            run_fold(
                i,
                &f.train,
                &f.test,
                features,
                &labels,
                &manifest.class_names,
                model_cfg,
                train_cfg,
                opts,
            )
        })
        .collect::<Result<Vec<_>, _>>()?;
    let summary = CvSummary::from_per_fold(folds.iter().map(|f| f.accuracy).collect());
    let best_fold = (0..folds.len())
        .fold(0, |b, i| if folds[i].accuracy > folds[b].accuracy { i } else { b });
    let outcome = CvOutcome {
        plan,
        folds,
        summary,
        best_fold,
    };
    if let Some(dir) = &opts.out_dir {
        persist(&outcome, dir, &train_cfg.descriptor.to_string())?;
    }
    Ok(outcome)
}
