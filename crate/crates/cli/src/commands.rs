use std::io::{BufRead, Read, Write};
use std::path::{Path, PathBuf};

use emovox::audio::{load_canonical, SegmentPolicy};
use emovox::dataset::{
    extract_manifest, scan_dataset, synth_corpus, DatasetError, DatasetManifest, FeatureCache, LabelScheme,
    SynthSpec,
};
use emovox::dsp::{Descriptor, FeatureConfig, FeatureExtractor, FeatureMap};
use emovox::model::{build_fcn, load_model_file, save_model_file, FcnModel, Prediction};
use emovox::nn::Rng;
use emovox::stream::{stream_predict, StreamEngine};
use emovox::train::{cross_validate, evaluate as evaluate_model, render_summary_table, ConfusionMatrix, CvOptions, CvSummary};
use serde_json::json;

use crate::config::{CliConfig, EFFECTIVE_CONFIG};
use crate::CliError;

fn io(e: std::io::Error) -> CliError {
    CliError::io(e)
}

fn resolve_scheme(data: &Path, scheme: Option<&str>) -> Result<LabelScheme, CliError> {
    match scheme {
        Some(s) => Ok(LabelScheme::resolve(s)?),
        None => {
            let map = data.join("labels.map");
            if map.is_file() {
                Ok(LabelScheme::load(&map)?)
            } else {
                Err(CliError::Usage(format!(
                    "--scheme is required: {} has no labels.map",
                    data.display()
                )))
            }
        }
    }
}

fn scan(data: &Path, scheme: Option<&str>) -> Result<DatasetManifest, CliError> {
    let scheme = resolve_scheme(data, scheme)?;
    let outcome = scan_dataset(data, &scheme)?;
    for r in &outcome.rejects {
        if r.path.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")) {
            log::warn!("skipping {}: {}", r.path.display(), r.reason);
        } else {
            log::debug!("skipping {}: {}", r.path.display(), r.reason);
        }
    }
    log::info!(
        "{} clips in {} classes {:?}",
        outcome.manifest.len(),
        outcome.manifest.n_classes(),
        outcome.manifest.class_counts()
    );
    Ok(outcome.manifest)
}

fn features_for(cfg: &CliConfig, features: &FeatureConfig, manifest: &DatasetManifest) -> Result<Vec<FeatureMap>, CliError> {
    let cache = if cfg.run.cache {
        Some(FeatureCache::new(cfg.run.out.join("cache"), features).map_err(io)?)
    } else {
        None
    };
    Ok(extract_manifest(manifest, features, cache.as_ref())?)
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), CliError> {
    std::fs::write(path, contents).map_err(io)
}

fn print_line(line: &str) -> Result<(), CliError> {
    let mut out = std::io::stdout().lock();
    writeln!(out, "{line}").and_then(|_| out.flush()).map_err(io)
}

fn prediction_json(p: &Prediction) -> serde_json::Value {
    json!({ "label": p.label, "probs": p.probs })
}

/// Feature settings stored with the model, else the configured ones.
fn model_features(cfg: &CliConfig, model: &FcnModel) -> FeatureConfig {
    model.features.unwrap_or(cfg.features)
}

/// Labels of `manifest` as indices into the model's class list.
fn labels_for_model(manifest: &DatasetManifest, model: &FcnModel) -> Result<Vec<usize>, CliError> {
    manifest
        .entries
        .iter()
        .map(|e| {
            model.class_names.iter().position(|c| *c == e.label.name).ok_or_else(|| {
                CliError::from(DatasetError::BadManifest(format!(
                    "label '{}' of {} is not a model class",
                    e.label.name,
                    e.path.display()
                )))
            })
        })
        .collect()
}

pub fn extract(cfg: &CliConfig, data: &Path, scheme: Option<&str>, format: &str) -> Result<(), CliError> {
    let csv = match format {
        "fmap" => false,
        "csv" => true,
        other => return Err(CliError::Usage(format!("--format must be fmap or csv, not '{other}'"))),
    };
    let manifest = scan(data, scheme)?;
    let out = &cfg.run.out;
    let dir = out.join("features");
    std::fs::create_dir_all(&dir).map_err(io)?;
    cfg.write_effective(out)?;
    let features = features_for(cfg, &cfg.features, &manifest)?;
    for (i, (entry, fm)) in manifest.entries.iter().zip(&features).enumerate() {
        let stem = entry.path.file_stem().and_then(|s| s.to_str()).unwrap_or("clip");
        let name = format!("{i:05}_{stem}.{}", if csv { "csv" } else { "fmap" });
        if csv {
            write_file(&dir.join(name), fm.to_csv())?;
        } else {
            write_file(&dir.join(name), fm.to_fmap_bytes())?;
        }
    }
    write_file(&out.join("manifest.csv"), manifest.to_csv()?)?;
    print_line(&json!({ "clips": manifest.len(), "features_dir": dir }).to_string())
}

pub fn train(cfg: &CliConfig, data: &Path, scheme: Option<&str>) -> Result<(), CliError> {
    let manifest = scan(data, scheme)?;
    let model_cfg = cfg.model_config(manifest.n_classes())?;
    let out = &cfg.run.out;
    cfg.write_effective(out)?;
    let features = features_for(cfg, &cfg.features, &manifest)?;
    let mut model = build_fcn(model_cfg, manifest.class_names.clone(), &mut Rng::new(cfg.run.seed).fork(u64::MAX))?;
    model.features = Some(cfg.features);
    let (model, report) = emovox::train::train(model, &features, &manifest.labels(), &cfg.train)?;
    save_model_file(&model, out.join("model.fcna"))?;
    write_file(&out.join("history.csv"), report.to_csv())?;
    write_file(&out.join("manifest.csv"), manifest.to_csv()?)?;
    let best = &report.history[report.best_epoch - 1];
    print_line(
        &json!({
            "model": out.join("model.fcna"),
            "stopped_epoch": report.stopped_epoch,
            "best_epoch": report.best_epoch,
            "val_loss": best.val_loss,
            "val_acc": best.val_acc,
            "wall_time_s": report.wall_time_s,
        })
        .to_string(),
    )
}

pub fn crossval(cfg: &CliConfig, data: &Path, scheme: Option<&str>) -> Result<(), CliError> {
    let manifest = scan(data, scheme)?;
    let model_cfg = cfg.model_config(manifest.n_classes())?;
    let out = &cfg.run.out;
    cfg.write_effective(out)?;
    let features = features_for(cfg, &cfg.features, &manifest)?;
    let opts = CvOptions {
        k: cfg.crossval.folds,
        ratio: cfg.crossval.ratio,
        seed: cfg.run.seed,
        stratified: cfg.crossval.stratified,
        out_dir: Some(out.clone()),
        features: Some(cfg.features),
    };
    let outcome = cross_validate(&manifest, &features, &model_cfg, &cfg.train, &opts)?;
    write_file(&out.join("manifest.csv"), manifest.to_csv()?)?;
    let name = descriptor_title(cfg.features.descriptor);
    print!("{}", render_summary_table(&[(name.to_string(), outcome.summary.clone())]));
    println!("\nbest fold {} ({:.2}%):", outcome.best_fold, outcome.best().accuracy);
    print!("{}", outcome.best().confusion.to_text_table());
    Ok(())
}

pub fn evaluate(cfg: &CliConfig, model_path: &Path, data: &Path, scheme: Option<&str>) -> Result<(), CliError> {
    let model = load_model_file(model_path)?;
    let manifest = scan(data, scheme)?;
    let labels = labels_for_model(&manifest, &model)?;
    let out = &cfg.run.out;
    cfg.write_effective(out)?;
    let features = features_for(cfg, &model_features(cfg, &model), &manifest)?;
    let ev = evaluate_model(&model, &features, &labels)?;
    write_file(&out.join("confusion.csv"), ev.confusion.to_csv())?;
    let summary = json!({ "accuracy": ev.accuracy, "clips": labels.len() });
    write_file(&out.join("evaluation.json"), summary.to_string())?;
    println!("accuracy {:.2}% over {} clips", ev.accuracy, labels.len());
    print!("{}", ev.confusion.to_text_table());
    Ok(())
}

fn load_clip(path: &Path, features: &FeatureConfig) -> Result<emovox::audio::AudioClip, CliError> {
    let bytes = std::fs::read(path).map_err(io)?;
    Ok(load_canonical(&bytes, features.sample_rate)?)
}

pub fn predict(cfg: &CliConfig, model_path: &Path, wav: &Path, explicit_out: bool) -> Result<(), CliError> {
    let model = load_model_file(model_path)?;
    let features = model_features(cfg, &model);
    let clip = load_clip(wav, &features)?;
    let fm = FeatureExtractor::new(features)?.extract(&clip)?;
    let p = model.predict(&fm)?;
    if explicit_out {
        cfg.write_effective(&cfg.run.out)?;
    }
    print_line(&prediction_json(&p).to_string())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StreamMode {
    Cadence,
    Splits(usize),
    Window(f64),
}

impl StreamMode {
    pub fn from_flags(splits: Option<usize>, window: Option<f64>) -> Self {
        match (splits, window) {
            (Some(n), _) => StreamMode::Splits(n),
            (None, Some(w)) => StreamMode::Window(w),
            (None, None) => StreamMode::Cadence,
        }
    }
}

pub fn stream(
    cfg: &CliConfig,
    model_path: &Path,
    input: Option<&Path>,
    rate: u32,
    mode: StreamMode,
    csv: bool,
    explicit_out: bool,
) -> Result<(), CliError> {
    let model = load_model_file(model_path)?;
    let features = model_features(cfg, &model);
    if explicit_out {
        cfg.write_effective(&cfg.run.out)?;
    }
    match input {
        Some(p) if p != Path::new("-") => {
            let clip = load_clip(p, &features)?;
            let min = cfg.stream.min_duration_s;
            let policy = match mode {
                StreamMode::Splits(n) => SegmentPolicy::equal_splits(n, min),
                StreamMode::Window(w) => SegmentPolicy::fixed_window(w, min),
                StreamMode::Cadence => SegmentPolicy::fixed_window(cfg.stream.cadence_s, min),
            }
            .map_err(|e| CliError::Usage(e.to_string()))?;
            let timeline = stream_predict(&model, &clip, &policy, &features)?;
            if csv {
                print!("{}", timeline.to_csv(&model.class_names));
            } else {
                print!("{}", timeline.to_jsonl());
            }
            if let Some(o) = &timeline.overall {
                log::info!("overall: {}", o.label);
            }
            Ok(())
        }
        _ => {
            if mode != StreamMode::Cadence {
                return Err(CliError::Usage("--splits and --window need a WAV input".into()));
            }
            if csv {
                return Err(CliError::Usage("--csv needs a WAV input".into()));
            }
            if rate != features.sample_rate {
                return Err(CliError::Usage(format!(
                    "--rate {rate} differs from the model's {} Hz; resample the stream first",
                    features.sample_rate
                )));
            }
            stream_stdin(&model, features, cfg.stream.cadence_s)
        }
    }
}

/// One live window, in timeline field order plus the running vote.
#[derive(serde::Serialize)]
struct LiveRecord<'a> {
    start_s: f64,
    end_s: f64,
    label: &'a str,
    probs: &'a [f64],
    running_label: Option<&'a str>,
}

fn emit(prev_end: &mut f64, t: f64, p: &Prediction, running: Option<&str>) -> Result<(), CliError> {
    let rec = LiveRecord {
        start_s: *prev_end,
        end_s: t,
        label: &p.label,
        probs: &p.probs,
        running_label: running,
    };
    *prev_end = t;
    print_line(&serde_json::to_string(&rec).expect("plain struct"))
}

fn stream_stdin(model: &FcnModel, features: FeatureConfig, cadence_s: f64) -> Result<(), CliError> {
    let mut engine = StreamEngine::new(model, features, cadence_s)?;
    let mut stdin = std::io::stdin().lock();
    let mut carry: Option<u8> = None;
    let mut prev_end = 0.0;
    loop {
        let buf = stdin.fill_buf().map_err(io)?;
        if buf.is_empty() {
            break;
        }
        let mut bytes = Vec::with_capacity(buf.len() + 1);
        bytes.extend(carry.take());
        bytes.extend_from_slice(buf);
        let n = buf.len();
        stdin.consume(n);
        if bytes.len() % 2 == 1 {
            carry = bytes.pop();
        }
        let samples: Vec<f32> = bytes
            .chunks_exact(2)
            .map(|b| i16::from_le_bytes([b[0], b[1]]) as f32 / 32768.0)
            .collect();
        for (t, p) in engine.push_samples(&samples)? {
            emit(&mut prev_end, t, &p, engine.running_label())?;
        }
    }
    if carry.is_some() {
        log::warn!("ignoring a trailing odd byte on stdin");
    }
    for (t, p) in engine.flush()? {
        emit(&mut prev_end, t, &p, engine.running_label())?;
    }
    if let Some(label) = engine.running_label() {
        log::info!("overall (majority of {} windows): {label}", engine.emitted());
    }
    Ok(())
}

pub fn synth(cfg: &CliConfig, classes: usize, per_class: usize) -> Result<(), CliError> {
    let spec = SynthSpec::new(classes, per_class);
    let out = &cfg.run.out;
    let manifest = synth_corpus(&spec, out, cfg.run.seed)?;
    cfg.write_effective(out)?;
    print_line(&json!({ "clips": manifest.len(), "dir": out, "classes": spec.class_names }).to_string())
}

fn descriptor_title(d: Descriptor) -> &'static str {
    match d {
        Descriptor::Mfcc => "MFCC",
        Descriptor::MelSpectrogramDb => "Mel Spectrogram",
        Descriptor::MelSpectrogramPower => "Mel Spectrogram (power)",
    }
}

fn row_name(dir: &Path) -> String {
    let from_config = std::fs::read_to_string(dir.join(EFFECTIVE_CONFIG))
        .ok()
        .and_then(|t| toml::from_str::<CliConfig>(&t).ok())
        .map(|c| descriptor_title(c.features.descriptor).to_string());
    from_config.unwrap_or_else(|| dir.display().to_string())
}

/// Fold confusion matrices under `dir`, each checked for parseability.
fn fold_matrices(dir: &Path) -> Result<Vec<(PathBuf, ConfusionMatrix)>, CliError> {
    let mut out = Vec::new();
    for i in 0.. {
        let p = dir.join(format!("fold_{i}")).join("confusion.csv");
        if !p.is_file() {
            break;
        }
        let text = std::fs::read_to_string(&p).map_err(io)?;
        out.push((p, ConfusionMatrix::from_csv(&text)?));
    }
    Ok(out)
}

pub fn report(dirs: &[PathBuf]) -> Result<(), CliError> {
    let mut rows = Vec::new();
    for dir in dirs {
        let mut text = String::new();
        std::fs::File::open(dir.join("summary.json"))
            .and_then(|mut f| f.read_to_string(&mut text))
            .map_err(io)?;
        let summary = CvSummary::from_json(&text)?;
        let folds = fold_matrices(dir)?;
        if !folds.is_empty() && folds.len() != summary.per_fold.len() {
            log::warn!(
                "{}: {} fold matrices for {} fold accuracies",
                dir.display(),
                folds.len(),
                summary.per_fold.len()
            );
        }
        for ((path, m), acc) in folds.iter().zip(&summary.per_fold) {
            if (m.accuracy() - acc).abs() > 1e-9 {
                log::warn!("{}: accuracy {:.4} differs from summary {acc:.4}", path.display(), m.accuracy());
            }
        }
        rows.push((row_name(dir), summary));
    }
    print!("{}", render_summary_table(&rows));
    Ok(())
}
