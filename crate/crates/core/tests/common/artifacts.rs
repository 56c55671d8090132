//! Parses a cross-validation output directory and checks its counting
//! invariants.

use std::path::Path;

use emovox::dataset::SplitPlan;
use emovox::model::load_model_file;
use emovox::train::{ConfusionMatrix, CvSummary, TrainReport};

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Returns the parsed summary when every file agrees with every other.
pub fn check_cv_dir(dir: &Path, k: usize, n_total: usize, n_classes: usize) -> Result<CvSummary, String> {
    let summary = CvSummary::from_json(&read(&dir.join("summary.json"))?).map_err(|e| e.to_string())?;
    if summary.per_fold.len() != k {
        return Err(format!("{} fold accuracies, expected {k}", summary.per_fold.len()));
    }
    let mean = summary.per_fold.iter().sum::<f64>() / k as f64;
    if !close(mean, summary.mean) {
        return Err(format!("mean {} vs recomputed {mean}", summary.mean));
    }
    let mut sorted = summary.per_fold.clone();
    sorted.sort_by(f64::total_cmp);
    let median = if k % 2 == 1 { sorted[k / 2] } else { 0.5 * (sorted[k / 2 - 1] + sorted[k / 2]) };
    if !close(median, summary.median) {
        return Err(format!("median {} vs recomputed {median}", summary.median));
    }
    if sorted.first().is_some_and(|&a| a < 0.0) || sorted.last().is_some_and(|&a| a > 100.0) {
        return Err("accuracy outside [0, 100]".into());
    }

    let plan: SplitPlan = serde_json::from_str(&read(&dir.join("splits.json"))?).map_err(|e| e.to_string())?;
    if plan.folds.len() != k {
        return Err(format!("{} splits, expected {k}", plan.folds.len()));
    }
    let mut best: Option<(f64, ConfusionMatrix)> = None;
    for (i, fold) in plan.folds.iter().enumerate() {
        let mut all: Vec<usize> = fold.train.iter().chain(&fold.test).copied().collect();
        all.sort_unstable();
        if all != (0..n_total).collect::<Vec<_>>() {
            return Err(format!("fold {i}: train and test do not partition the corpus"));
        }
        let fd = dir.join(format!("fold_{i}"));
        let cm = ConfusionMatrix::from_csv(&read(&fd.join("confusion.csv"))?).map_err(|e| e.to_string())?;
        if cm.n_classes() != n_classes {
            return Err(format!("fold {i}: {} classes", cm.n_classes()));
        }
        if cm.total() != fold.test.len() as u64 {
            return Err(format!("fold {i}: {} counts for {} test clips", cm.total(), fold.test.len()));
        }
        if cm.row_sums().iter().sum::<u64>() != cm.total() || cm.column_sums().iter().sum::<u64>() != cm.total() {
            return Err(format!("fold {i}: margins disagree"));
        }
        if !close(cm.accuracy(), summary.per_fold[i]) {
            return Err(format!("fold {i}: matrix says {}%, summary {}%", cm.accuracy(), summary.per_fold[i]));
        }
        let history = TrainReport::from_csv(&read(&fd.join("history.csv"))?).map_err(|e| e.to_string())?;
        if history.is_empty() {
            return Err(format!("fold {i}: empty history"));
        }
        let model = load_model_file(fd.join("model.fcna")).map_err(|e| format!("fold {i}: {e}"))?;
        if model.n_classes() != n_classes {
            return Err(format!("fold {i}: model has {} classes", model.n_classes()));
        }
        if best.as_ref().is_none_or(|(acc, _)| cm.accuracy() > *acc) {
            best = Some((cm.accuracy(), cm));
        }
    }
    let best_cm = ConfusionMatrix::from_csv(&read(&dir.join("best_confusion.csv"))?).map_err(|e| e.to_string())?;
    if Some(&best_cm) != best.as_ref().map(|(_, cm)| cm) {
        return Err("best_confusion.csv is not the most accurate fold".into());
    }
    let table = read(&dir.join("summary.txt"))?;
    if !table.contains(&format!("{:.3}", summary.mean)) {
        return Err("summary.txt does not show the mean".into());
    }
    Ok(summary)
}
