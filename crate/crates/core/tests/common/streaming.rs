//! Streaming equivalence checks shared by the test suites and the
//! acceptance run.

use emovox::audio::{AudioClip, SegmentPolicy};
use emovox::dataset::{synth_clips, SynthSpec};
use emovox::dsp::FeatureConfig;
use emovox::model::{FcnModel, Prediction};
use emovox::nn::Rng;
use emovox::stream::{stream_predict, StreamEngine};

pub fn same_bits(a: &Prediction, b: &Prediction) -> bool {
    a.label == b.label
        && a.probs.len() == b.probs.len()
        && a.probs.iter().zip(&b.probs).all(|(x, y)| x.to_bits() == y.to_bits())
}

/// Synthetic clips of 0.6–3 s.
pub fn clips(n_classes: usize, per_class: usize, seed: u64) -> Vec<AudioClip> {
    synth_clips(&SynthSpec::new(n_classes, per_class), seed)
        .unwrap()
        .into_iter()
        .map(|(_, _, c)| c)
        .collect()
}

/// One equal split must reproduce the whole-file prediction exactly.
pub fn single_split_matches_whole_file(model: &FcnModel, features: &FeatureConfig, clip: &AudioClip) -> Result<(), String> {
    let policy = SegmentPolicy::equal_splits(1, 0.1).unwrap();
    let timeline = stream_predict(model, clip, &policy, features).map_err(|e| e.to_string())?;
    let [entry] = timeline.entries.as_slice() else {
        return Err(format!("{} entries for one split", timeline.entries.len()));
    };
    let mut ex = emovox::dsp::FeatureExtractor::new(*features).unwrap();
    let whole = model.predict(&ex.extract(clip).unwrap()).unwrap();
    if entry.start_s != 0.0 || (entry.end_s - clip.duration_s()).abs() > 1e-12 {
        return Err(format!("entry spans {}..{}", entry.start_s, entry.end_s));
    }
    if !same_bits(&entry.prediction, &whole) || !same_bits(timeline.overall.as_ref().unwrap(), &whole) {
        return Err("segment prediction differs from whole-file prediction".into());
    }
    Ok(())
}

fn run_engine(model: &FcnModel, features: &FeatureConfig, cadence: f64, chunks: &[&[f32]]) -> Vec<(f64, Prediction)> {
    let mut engine = StreamEngine::new(model, *features, cadence).unwrap();
    let mut out = Vec::new();
    for c in chunks {
        out.extend(engine.push_samples(c).unwrap());
    }
    out.extend(engine.flush().unwrap());
    out
}

/// Random push partitions of `clip` give the same windows, timestamps and
/// predictions as pushing it in one piece.
pub fn chunking_invariant(
    model: &FcnModel,
    features: &FeatureConfig,
    clip: &AudioClip,
    partitions: usize,
    rng: &mut Rng,
) -> Result<(), String> {
    let samples = clip.samples();
    let reference = run_engine(model, features, 1.0, &[samples]);
    for p in 0..partitions {
        let mut cuts = vec![0];
        while *cuts.last().unwrap() < samples.len() {
            let step = match rng.below(3) {
                0 => 1 + rng.below(64),
                1 => 1 + rng.below(4096),
                _ => 1 + rng.below(30_000),
            };
            cuts.push((cuts.last().unwrap() + step).min(samples.len()));
        }
        let chunks: Vec<&[f32]> = cuts.windows(2).map(|w| &samples[w[0]..w[1]]).collect();
        let got = run_engine(model, features, 1.0, &chunks);
        let same = got.len() == reference.len()
            && got
                .iter()
                .zip(&reference)
                .all(|((t1, a), (t2, b))| t1.to_bits() == t2.to_bits() && same_bits(a, b));
        if !same {
            return Err(format!("partition {p} ({} chunks) changed the output", chunks.len()));
        }
    }
    Ok(())
}
