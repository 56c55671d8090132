//! Feature extraction for manifests, with an optional on-disk FMAP cache
//! keyed by SHA-256 of the audio bytes and the feature configuration.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::DatasetManifest;
use crate::audio::load_canonical;
use crate::dsp::{FeatureConfig, FeatureExtractor, FeatureMap};

/// Decodes, down-mixes, resamples and featurises one WAV file.
pub fn features_from_wav_bytes(bytes: &[u8], extractor: &mut FeatureExtractor) -> crate::Result<FeatureMap> {
    let clip = load_canonical(bytes, extractor.config().sample_rate)?;
    Ok(extractor.extract(&clip)?)
}

#[derive(Debug, Clone)]
pub struct FeatureCache {
    dir: PathBuf,
    fingerprint: String,
    cfg: FeatureConfig,
}

impl FeatureCache {
    pub fn new(dir: impl Into<PathBuf>, cfg: &FeatureConfig) -> std::io::Result<Self> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            fingerprint: cfg.fingerprint(),
            cfg: *cfg,
        })
    }

    pub fn key(&self, audio_bytes: &[u8]) -> String {
        let mut h = Sha256::new();
        h.update(audio_bytes);
        h.update(self.fingerprint.as_bytes());
        hex::encode(h.finalize())
    }

    fn entry_path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.fmap"))
    }

    /// Cached features for `path`, extracting and storing on a miss. An
    /// unreadable cache entry counts as a miss.
    pub fn features_for(&self, path: &Path, extractor: &mut FeatureExtractor) -> crate::Result<FeatureMap> {
        let bytes = std::fs::read(path)?;
        let entry = self.entry_path(&self.key(&bytes));
        if let Ok(cached) = std::fs::read(&entry) {
            let parsed = FeatureMap::from_fmap_bytes(&cached, 1.0, 0.0).and_then(|fm| {
                let times = (0..fm.frames())
                    .map(|t| self.cfg.stft.frame_time(t, self.cfg.sample_rate))
                    .collect();
                let (bins, frames) = fm.shape();
                FeatureMap::new(bins, frames, fm.values().to_vec(), times, fm.descriptor())
            });
            match parsed {
                Ok(fm) => return Ok(fm),
                Err(e) => log::warn!("ignoring bad cache entry {}: {e}", entry.display()),
            }
        }
        let fm = features_from_wav_bytes(&bytes, extractor)?;
        // Write then rename so readers never see a partial entry.
        let tmp = entry.with_extension(format!("tmp{}", std::process::id()));
        std::fs::write(&tmp, fm.to_fmap_bytes())?;
        std::fs::rename(&tmp, &entry)?;
        Ok(fm)
    }
}

/// Features for every manifest entry, in entry order. Files are processed
/// in parallel on the current rayon pool; results do not depend on the
/// pool size.
pub fn extract_manifest(
    manifest: &DatasetManifest,
    cfg: &FeatureConfig,
    cache: Option<&FeatureCache>,
) -> crate::Result<Vec<FeatureMap>> {
    let proto = FeatureExtractor::new(*cfg)?;
    manifest
        .entries
        .par_iter()
        .map_init(
            || proto.clone(),
            |ex, e| match cache {
                Some(c) => c.features_for(&e.path, ex),
                None => features_from_wav_bytes(&std::fs::read(&e.path)?, ex),
            },
        )
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{synth_corpus, SynthSpec};

    #[test]
    fn cache_hit_matches_fresh_extraction() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SynthSpec::new(2, 2);
        let manifest = synth_corpus(&spec, &dir.path().join("wav"), 3).unwrap();
        let cfg = FeatureConfig::default();
        let cache = FeatureCache::new(dir.path().join("cache"), &cfg).unwrap();
        let fresh = extract_manifest(&manifest, &cfg, None).unwrap();
        let first = extract_manifest(&manifest, &cfg, Some(&cache)).unwrap();
        let second = extract_manifest(&manifest, &cfg, Some(&cache)).unwrap();
        assert_eq!(first, fresh);
        assert_eq!(std::fs::read_dir(dir.path().join("cache")).unwrap().count(), 4);
        for (a, b) in fresh.iter().zip(&second) {
            assert_eq!(a.shape(), b.shape());
            assert_eq!(a.frame_times(), b.frame_times());
            for (x, y) in a.values().iter().zip(b.values()) {
                assert_eq!(*x as f32, *y as f32);
            }
        }
    }
}
