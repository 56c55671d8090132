//! Segment-wise emotion tracking over a clip, and an incremental engine
//! that emits one prediction per fixed window of pushed samples.
//!
//! Every segment or window is featurised on its own from raw samples, so a
//! prediction depends only on the samples it covers.

use serde::Serialize;

use crate::audio::{segment_bounds, AudioClip, SegmentPolicy};
use crate::dsp::{Descriptor, FeatureConfig, FeatureExtractor};
use crate::model::{FcnModel, ModelError, Prediction};

/// Fewest samples whose feature map reaches the model's minimum width.
pub fn min_window_samples(model: &FcnModel, features: &FeatureConfig) -> usize {
    features.min_samples_for_frames(model.config.min_input_shape().1)
}

pub fn min_window_duration(model: &FcnModel, features: &FeatureConfig) -> f64 {
    min_window_samples(model, features) as f64 / features.sample_rate as f64
}

fn check_height(model: &FcnModel, features: &FeatureConfig) -> Result<(), ModelError> {
    let (min_h, min_w) = model.config.min_input_shape();
    let bins = match features.descriptor {
        Descriptor::Mfcc => features.n_mfcc,
        _ => features.mel.n_mels,
    };
    if bins < min_h {
        return Err(ModelError::InputBelowMinimum {
            h: bins,
            w: min_w,
            min_h,
            min_w,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TimelineEntry {
    pub start_s: f64,
    pub end_s: f64,
    pub prediction: Prediction,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmotionTimeline {
    /// Contiguous, in time order, covering the whole clip.
    pub entries: Vec<TimelineEntry>,
    pub overall: Option<Prediction>,
    pub clip_label: Option<String>,
}

#[derive(Serialize)]
struct EntryRecord<'a> {
    start_s: f64,
    end_s: f64,
    label: &'a str,
    probs: &'a [f64],
}

impl EmotionTimeline {
    /// One JSON object per entry: `{start_s, end_s, label, probs}`.
    pub fn to_jsonl(&self) -> String {
        self.entries
            .iter()
            .map(|e| {
                let rec = EntryRecord {
                    start_s: e.start_s,
                    end_s: e.end_s,
                    label: &e.prediction.label,
                    probs: &e.prediction.probs,
                };
                serde_json::to_string(&rec).expect("plain struct") + "\n"
            })
            .collect()
    }

    /// `start_s,end_s,label,<one probability column per class>`.
    pub fn to_csv(&self, class_names: &[String]) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["start_s".to_string(), "end_s".into(), "label".into()];
        header.extend(class_names.iter().cloned());
        w.write_record(&header).expect("in-memory csv");
        for e in &self.entries {
            let mut rec = vec![e.start_s.to_string(), e.end_s.to_string(), e.prediction.label.clone()];
            rec.extend(e.prediction.probs.iter().map(f64::to_string));
            w.write_record(&rec).expect("in-memory csv");
        }
        String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8")
    }
}

/// Splits `clip` per `policy`, predicts every segment, and predicts the
/// whole clip for `overall`. The policy's minimum duration is raised to
/// the model's minimum window if it is shorter.
pub fn stream_predict(
    model: &FcnModel,
    clip: &AudioClip,
    policy: &SegmentPolicy,
    features: &FeatureConfig,
) -> crate::Result<EmotionTimeline> {
    check_height(model, features)?;
    let policy = SegmentPolicy {
        min_duration_s: policy.min_duration_s.max(min_window_duration(model, features)),
        ..*policy
    };
    let sr = clip.sample_rate() as f64;
    let bounds = segment_bounds(clip.frames(), clip.sample_rate(), &policy)?;
    let mut extractor = FeatureExtractor::new(*features)?;
    let mut entries = Vec::with_capacity(bounds.len());
    for r in bounds {
        let fm = extractor.extract(&clip.slice(r.start, r.end))?;
        entries.push(TimelineEntry {
            start_s: r.start as f64 / sr,
            end_s: r.end as f64 / sr,
            prediction: model.predict(&fm)?,
        });
    }
    let overall = model.predict(&extractor.extract(clip)?)?;
    Ok(EmotionTimeline {
        entries,
        overall: Some(overall),
        clip_label: None,
    })
}

/// Incremental predictor over tumbling windows of `cadence_s` seconds.
///
/// Pushed samples accumulate; every full window is featurised, predicted
/// and dropped. Timestamps mark the end of each window in stream time.
#[derive(Debug, Clone)]
pub struct StreamEngine<'m> {
    model: &'m FcnModel,
    extractor: FeatureExtractor,
    cadence_s: f64,
    window: usize,
    min_len: usize,
    buffer: Vec<f32>,
    /// Samples already consumed by emitted or dropped windows.
    consumed: usize,
    votes: Vec<usize>,
    emitted: usize,
    dropped: usize,
}

impl<'m> StreamEngine<'m> {
    pub fn new(model: &'m FcnModel, features: FeatureConfig, cadence_s: f64) -> crate::Result<Self> {
        check_height(model, &features)?;
        let min_len = min_window_samples(model, &features);
        let window = (cadence_s * features.sample_rate as f64).round() as usize;
        if !(cadence_s.is_finite() && window >= min_len) {
            return Err(ModelError::InvalidConfig(format!(
                "cadence {cadence_s} s is shorter than the minimum window {:.4} s",
                min_window_duration(model, &features)
            ))
            .into());
        }
        Ok(Self {
            model,
            extractor: FeatureExtractor::new(features)?,
            cadence_s,
            window,
            min_len,
            buffer: Vec::with_capacity(window),
            consumed: 0,
            votes: vec![0; model.n_classes()],
            emitted: 0,
            dropped: 0,
        })
    }

    /// One-second windows.
    pub fn with_default_cadence(model: &'m FcnModel, features: FeatureConfig) -> crate::Result<Self> {
        Self::new(model, features, 1.0)
    }

    pub fn cadence_s(&self) -> f64 {
        self.cadence_s
    }

    pub fn sample_rate(&self) -> u32 {
        self.extractor.config().sample_rate
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    pub fn emitted(&self) -> usize {
        self.emitted
    }

    /// Trailing remainders discarded by `flush` for being too short.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    fn predict_samples(&mut self, samples: Vec<f32>) -> crate::Result<(f64, Prediction)> {
        self.consumed += samples.len();
        let clip = AudioClip::mono(samples, self.sample_rate())?;
        let fm = self.extractor.extract(&clip)?;
        let p = self.model.predict(&fm)?;
        self.votes[p.argmax_index] += 1;
        self.emitted += 1;
        Ok((self.consumed as f64 / self.sample_rate() as f64, p))
    }

    pub fn push_samples(&mut self, chunk: &[f32]) -> crate::Result<Vec<(f64, Prediction)>> {
        let mut out = Vec::new();
        let mut rest = chunk;
        while !rest.is_empty() {
            let take = (self.window - self.buffer.len()).min(rest.len());
            self.buffer.extend_from_slice(&rest[..take]);
            rest = &rest[take..];
            if self.buffer.len() == self.window {
                let full = std::mem::replace(&mut self.buffer, Vec::with_capacity(self.window));
                out.push(self.predict_samples(full)?);
            }
        }
        Ok(out)
    }

    /// Predicts the remainder if it is long enough, otherwise discards it
    /// and counts it in `dropped`. The buffer is empty afterwards.
    pub fn flush(&mut self) -> crate::Result<Vec<(f64, Prediction)>> {
        let rest = std::mem::take(&mut self.buffer);
        if rest.is_empty() {
            return Ok(Vec::new());
        }
        if rest.len() < self.min_len {
            log::warn!(
                "dropping {:.3} s of trailing audio, below the {:.3} s minimum",
                rest.len() as f64 / self.sample_rate() as f64,
                self.min_len as f64 / self.sample_rate() as f64
            );
            self.consumed += rest.len();
            self.dropped += 1;
            return Ok(Vec::new());
        }
        Ok(vec![self.predict_samples(rest)?])
    }

    /// Majority label over emitted windows, ties to the lower class index.
    pub fn running_label(&self) -> Option<&str> {
        if self.emitted == 0 {
            return None;
        }
        let mut best = 0;
        for (i, &v) in self.votes.iter().enumerate() {
            if v > self.votes[best] {
                best = i;
            }
        }
        Some(&self.model.class_names[best])
    }
}
