//! Stimulus lookup for the listening test, plus a deterministic synthesizer
//! used when no trained decoder is at hand.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grid::GridGeometry;
use crate::audio::write_wav;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StimulusEntry {
    pub text: String,
    pub xi: usize,
    pub yi: usize,
    /// Relative to the manifest directory unless absolute.
    pub path: PathBuf,
}

/// Audio file for every `(text, xi, yi)` of the lattice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusManifest {
    pub resolution: usize,
    pub texts: Vec<String>,
    /// Latent rectangle the lattice was sampled from, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<GridGeometry>,
    pub entries: Vec<StimulusEntry>,
    #[serde(skip)]
    root: PathBuf,
}

impl StimulusManifest {
    /// Entries are reordered to text-major, then `yi`, then `xi`.
    pub fn new(resolution: usize, texts: Vec<String>, mut entries: Vec<StimulusEntry>) -> Result<Self> {
        if resolution < 2 {
            return Err(Error::InvalidArgument("resolution must be at least 2".into()));
        }
        if texts.is_empty() {
            return Err(Error::InvalidArgument("manifest lists no texts".into()));
        }
        let text_pos = |t: &str| texts.iter().position(|x| x == t);
        for e in &entries {
            if text_pos(&e.text).is_none() {
                return Err(Error::InvalidArgument(format!("entry for unknown text `{}`", e.text)));
            }
            if e.xi >= resolution || e.yi >= resolution {
                return Err(Error::InvalidArgument(format!(
                    "entry ({}, {}) outside a {resolution}x{resolution} lattice",
                    e.xi, e.yi
                )));
            }
        }
        entries.sort_by_key(|e| (text_pos(&e.text), e.yi, e.xi));
        entries.dedup_by(|a, b| a.text == b.text && a.xi == b.xi && a.yi == b.yi);
        let expected = texts.len() * resolution * resolution;
        if entries.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "manifest has {} distinct entries, the lattice needs {expected}",
                entries.len()
            )));
        }
        Ok(StimulusManifest { resolution, texts, geometry: None, entries, root: PathBuf::new() })
    }

    pub fn with_geometry(mut self, geometry: GridGeometry) -> Result<Self> {
        if geometry.resolution != self.resolution {
            return Err(Error::InvalidArgument(format!(
                "grid resolution {} does not match stimulus resolution {}",
                geometry.resolution, self.resolution
            )));
        }
        self.geometry = Some(geometry);
        Ok(self)
    }

    /// Directory relative entry paths are resolved against.
    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let parsed: StimulusManifest = serde_json::from_str(&raw)?;
        let mut m = StimulusManifest::new(parsed.resolution, parsed.texts, parsed.entries)?;
        if let Some(g) = parsed.geometry {
            m = m.with_geometry(GridGeometry::new(g.bounds, g.resolution, g.cells)?)?;
        }
        m.root = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(m)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    pub fn entry(&self, text: &str, xi: usize, yi: usize) -> Option<&StimulusEntry> {
        let t = self.texts.iter().position(|x| x == text)?;
        if xi >= self.resolution || yi >= self.resolution {
            return None;
        }
        self.entries.get((t * self.resolution + yi) * self.resolution + xi)
    }

    /// Absolute path of a stimulus.
    pub fn resolve(&self, text: &str, xi: usize, yi: usize) -> Option<PathBuf> {
        self.entry(text, xi, yi).map(|e| self.root.join(&e.path))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub resolution: usize,
    pub n_texts: usize,
    pub sample_rate: u32,
    pub seed: u64,
    /// F0 at `xi = 0`; the x axis spans two octaves above it.
    pub f0_low_hz: f64,
    /// Utterance length at `yi = 0`; the y axis speeds it up to twice as fast.
    pub base_duration_secs: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            resolution: super::grid::DEFAULT_RESOLUTION,
            n_texts: 2,
            sample_rate: 16_000,
            seed: 2013,
            f0_low_hz: 100.0,
            base_duration_secs: 0.8,
        }
    }
}

impl SynthConfig {
    fn validate(&self) -> Result<()> {
        if self.resolution < 2 || self.n_texts == 0 {
            return Err(Error::InvalidArgument("need resolution >= 2 and at least one text".into()));
        }
        if self.sample_rate < 8000 || !(self.f0_low_hz > 0.0) || !(self.base_duration_secs > 0.0) {
            return Err(Error::InvalidArgument("bad synthesis parameters".into()));
        }
        if 4.0 * self.f0_low_hz * 2.0 >= self.sample_rate as f64 / 2.0 {
            return Err(Error::InvalidArgument("F0 range too high for the sample rate".into()));
        }
        Ok(())
    }

    /// F0 scale for column `xi`.
    pub fn f0_for(&self, xi: usize) -> f64 {
        self.f0_low_hz * 4f64.powf(xi as f64 / (self.resolution - 1) as f64)
    }

    /// Speaking-rate factor for row `yi`, 1 to 2.
    pub fn rate_for(&self, yi: usize) -> f64 {
        2f64.powf(yi as f64 / (self.resolution - 1) as f64)
    }

    pub fn text_name(t: usize) -> String {
        format!("t{t}")
    }
}

struct Syllable {
    /// Fraction of the utterance.
    share: f64,
    accent_st: f64,
    tilt: f64,
}

fn syllables(seed: u64, text: usize) -> Vec<Syllable> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x9e37_79b9_7f4a_7c15u64.wrapping_mul(text as u64 + 1)));
    let n = rng.random_range(3..=5);
    let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.6..1.4)).collect();
    let total: f64 = weights.iter().sum();
    weights
        .into_iter()
        .map(|w| Syllable {
            share: w / total,
            accent_st: rng.random_range(-2.0..2.0),
            tilt: rng.random_range(0.8..1.6),
        })
        .collect()
}

/// Samples for one lattice point. Only the seed and text pick the syllable
/// pattern, so neighbouring points differ only in F0 and rate.
pub fn synthesize_stimulus(cfg: &SynthConfig, text: usize, xi: usize, yi: usize) -> Result<Vec<f64>> {
    cfg.validate()?;
    if xi >= cfg.resolution || yi >= cfg.resolution {
        return Err(Error::InvalidArgument(format!("lattice point ({xi}, {yi}) out of range")));
    }
    let sr = cfg.sample_rate as f64;
    let f0 = cfg.f0_for(xi);
    let total = cfg.base_duration_secs / cfg.rate_for(yi);
    let n_harm = ((4000.0_f64.min(sr / 2.0 - 200.0)) / (4.0 * cfg.f0_low_hz)).floor().max(1.0) as usize;
    let mut out = Vec::with_capacity((total * sr) as usize + 1);
    let mut phase = 0.0;
    for syl in syllables(cfg.seed, text) {
        let len = (syl.share * total * sr).round() as usize;
        let voiced = (len as f64 * 0.8) as usize;
        let ramp = (0.15 * voiced as f64).max(1.0);
        let freq = f0 * 2f64.powf(syl.accent_st / 12.0);
        for i in 0..len {
            if i >= voiced {
                out.push(0.0);
                continue;
            }
            let env = if (i as f64) < ramp {
                0.5 - 0.5 * (PI * i as f64 / ramp).cos()
            } else if ((voiced - i) as f64) < ramp {
                0.5 - 0.5 * (PI * (voiced - i) as f64 / ramp).cos()
            } else {
                1.0
            };
            phase += 2.0 * PI * freq / sr;
            let mut s = 0.0;
            for k in 1..=n_harm {
                if k as f64 * freq < sr / 2.0 {
                    s += (k as f64 * phase).sin() / (k as f64).powf(syl.tilt);
                }
            }
            out.push(0.3 * env * s);
        }
        phase %= 2.0 * PI;
    }
    Ok(out)
}

/// Writes `t{text}/x{xi}_y{yi}.wav` for the whole lattice and a manifest
/// next to them. The manifest records `geometry` when given; its resolution
/// must match the config.
pub fn generate_synthetic_stimuli(
    out_dir: impl AsRef<Path>,
    cfg: &SynthConfig,
    geometry: Option<&GridGeometry>,
) -> Result<StimulusManifest> {
    cfg.validate()?;
    if let Some(g) = geometry {
        if g.resolution != cfg.resolution {
            return Err(Error::InvalidArgument(format!(
                "grid resolution {} does not match stimulus resolution {}",
                g.resolution, cfg.resolution
            )));
        }
    }
    let out_dir = out_dir.as_ref();
    let res = cfg.resolution;
    let texts: Vec<String> = (0..cfg.n_texts).map(SynthConfig::text_name).collect();
    for t in &texts {
        let d = out_dir.join(t);
        std::fs::create_dir_all(&d).map_err(|e| Error::io(&d, e))?;
    }
    let entries = (0..cfg.n_texts * res * res)
        .into_par_iter()
        .map(|i| {
            let (t, rem) = (i / (res * res), i % (res * res));
            let (yi, xi) = (rem / res, rem % res);
            let rel = PathBuf::from(&texts[t]).join(format!("x{xi:03}_y{yi:03}.wav"));
            write_wav(out_dir.join(&rel), &synthesize_stimulus(cfg, t, xi, yi)?, cfg.sample_rate)?;
            Ok(StimulusEntry { text: texts[t].clone(), xi, yi, path: rel })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut manifest = StimulusManifest::new(res, texts, entries)?;
    if let Some(g) = geometry {
        manifest = manifest.with_geometry(*g)?;
    }
    manifest.save(out_dir.join(MANIFEST_FILE))?;
    manifest.root = out_dir.to_path_buf();
    Ok(manifest)
}
