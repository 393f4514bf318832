//! Frame-level acoustic descriptors and utterance-level functionals.
//!
//! A clip is cut into overlapping frames (25 ms Hann window, 10 ms hop by
//! default). Each frame yields an F0 estimate with a voicing decision, a
//! mel cepstrum, band-energy ratios, two band-limited spectral slopes and an
//! RMS level. Functionals then summarize those contours per utterance.
//!
//! Loudness here is frame RMS in dB (`loudness_proxy`), not an auditory
//! loudness model. Formant and harmonic-amplitude descriptors are not
//! computed; tables carrying them can be brought in with
//! [`crate::table::import_feature_table`].

mod functionals;
mod pitch;
mod spectral;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use functionals::{
    apply_functionals, default_functionals, utterance_features, voiced_segment_stats,
    Descriptor, FunctionalKind, FunctionalSpec, Scope, SegmentStats,
};
pub use spectral::{hz_to_mel, mel_to_hz, SPECTRUM_FLOOR};

use crate::audio::{load_audio, AudioClip};
use crate::error::{Error, Result};
use crate::table::FeatureTable;
use pitch::PitchSearch;
use spectral::SpectralAnalyzer;

/// Reference frequency of semitone 0.
pub const SEMITONE_REF_HZ: f64 = 27.5;

/// Maps a frequency in Hz to semitones above 27.5 Hz.
///
/// Evaluated relative to the nearest equal-tempered grid frequency so that
/// `27.5 * 2^(n/12)` maps to exactly `n`.
pub fn hz_to_semitone(f0_hz: f64) -> f64 {
    let n = (12.0 * (f0_hz / SEMITONE_REF_HZ).log2()).round();
    let grid = SEMITONE_REF_HZ * (n / 12.0).exp2();
    n + 12.0 * (f0_hz / grid).log2()
}

pub fn semitone_to_hz(semitone: f64) -> f64 {
    SEMITONE_REF_HZ * (semitone / 12.0).exp2()
}

/// Analysis settings for [`extract_frame_descriptors`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameConfig {
    pub frame_secs: f64,
    pub hop_secs: f64,
    pub f0_min: f64,
    pub f0_max: f64,
    /// Minimum normalized autocorrelation peak for a frame to count as voiced.
    pub voicing_threshold: f64,
    /// Pitch analysis window. Defaults to the larger of the spectral frame and
    /// two periods at `f0_min`.
    pub pitch_window_secs: Option<f64>,
    /// Penalty per octave of lag, favouring the shortest strong period.
    pub octave_cost: f64,
    pub n_mel: usize,
    pub mel_fmin: f64,
    /// Highest cepstral index K; frames carry `c_0..=c_K`.
    pub cepstral_order: usize,
}

impl Default for FrameConfig {
    fn default() -> Self {
        FrameConfig {
            frame_secs: 0.025,
            hop_secs: 0.010,
            f0_min: 60.0,
            f0_max: 500.0,
            voicing_threshold: 0.45,
            pitch_window_secs: None,
            octave_cost: 0.01,
            n_mel: 26,
            mel_fmin: 20.0,
            cepstral_order: 13,
        }
    }
}

impl FrameConfig {
    fn pitch_window_secs(&self) -> f64 {
        self.pitch_window_secs
            .unwrap_or_else(|| self.frame_secs.max(2.0 / self.f0_min))
    }

    fn validate(&self, sample_rate: u32) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if !(self.frame_secs > 0.0 && self.hop_secs > 0.0) {
            return bad("frame and hop must be positive".into());
        }
        if !(self.f0_min > 0.0 && self.f0_min < self.f0_max) {
            return bad(format!(
                "f0 range [{}, {}] must satisfy 0 < f0_min < f0_max",
                self.f0_min, self.f0_max
            ));
        }
        let nyquist = sample_rate as f64 / 2.0;
        if self.f0_max >= nyquist / 2.0 {
            return bad(format!(
                "f0 range infeasible for sample rate {sample_rate} Hz (f0_max must be below {})",
                nyquist / 2.0
            ));
        }
        if self.pitch_window_secs() < 2.0 / self.f0_min {
            return bad(format!(
                "pitch window {} s shorter than two periods at f0_min ({} s)",
                self.pitch_window_secs(),
                2.0 / self.f0_min
            ));
        }
        if !(0.0..=1.0).contains(&self.voicing_threshold) {
            return bad("voicing threshold must lie in [0, 1]".into());
        }
        if self.cepstral_order < 4 {
            return bad("cepstral order must be at least 4 (mfcc1-4)".into());
        }
        if self.n_mel <= self.cepstral_order {
            return bad("need more mel filters than cepstral coefficients".into());
        }
        if self.mel_fmin >= nyquist {
            return bad("mel_fmin above Nyquist".into());
        }
        Ok(())
    }
}

/// Descriptors for one analysis frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRecord {
    /// 0 when unvoiced.
    pub f0_hz: f64,
    /// Semitones above 27.5 Hz; present only on voiced frames.
    pub f0_semitone: Option<f64>,
    pub voiced: bool,
    /// `c_0..=c_K`.
    pub mel_cepstra: Vec<f64>,
    pub mfcc: [f64; 4],
    pub alpha_ratio_db: f64,
    pub hammarberg_db: f64,
    /// dB/Hz
    pub slope_0_500: f64,
    /// dB/Hz
    pub slope_500_1500: f64,
    pub loudness_proxy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameTrack {
    pub id: String,
    pub hop_secs: f64,
    pub frames: Vec<FrameRecord>,
}

impl FrameTrack {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn voicing(&self) -> Vec<bool> {
        self.frames.iter().map(|f| f.voiced).collect()
    }

    pub fn f0(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.f0_hz).collect()
    }

    pub fn cepstra(&self) -> Vec<Vec<f64>> {
        self.frames.iter().map(|f| f.mel_cepstra.clone()).collect()
    }
}

/// Runs frame analysis over a clip. One record per hop; frames start at
/// `t * hop` and span the longer of the spectral and pitch windows.
pub fn extract_frame_descriptors(clip: &AudioClip, config: &FrameConfig) -> Result<FrameTrack> {
    clip.validate()?;
    config.validate(clip.sample_rate)?;
    let sr = clip.sample_rate as f64;
    let frame_len = (config.frame_secs * sr).round() as usize;
    let hop = ((config.hop_secs * sr).round() as usize).max(1);
    let pitch_len = (config.pitch_window_secs() * sr).ceil() as usize;
    let span = frame_len.max(pitch_len);
    if clip.samples.len() < span {
        return Err(Error::ClipTooShort {
            samples: clip.samples.len(),
            needed: span,
        });
    }

    let search = PitchSearch::new(
        sr,
        config.f0_min,
        config.f0_max,
        config.voicing_threshold,
        config.octave_cost,
    );
    let analyzer = SpectralAnalyzer::new(
        clip.sample_rate,
        frame_len,
        config.n_mel,
        config.mel_fmin,
        config.cepstral_order,
    );

    let n_frames = (clip.samples.len() - span) / hop + 1;
    let frames = (0..n_frames)
        .map(|t| {
            let start = t * hop;
            let spec_start = start + (span - frame_len) / 2;
            let pitch_start = start + (span - pitch_len) / 2;
            let spec_frame = &clip.samples[spec_start..spec_start + frame_len];
            let pitch = search.estimate(&clip.samples[pitch_start..pitch_start + pitch_len]);
            let spectral = analyzer.analyze(spec_frame);
            let power = spec_frame.iter().map(|x| x * x).sum::<f64>() / frame_len as f64;
            let c = &spectral.mel_cepstra;
            FrameRecord {
                f0_hz: pitch.f0_hz,
                f0_semitone: pitch.voiced.then(|| hz_to_semitone(pitch.f0_hz)),
                voiced: pitch.voiced,
                mfcc: [c[1], c[2], c[3], c[4]],
                alpha_ratio_db: spectral.alpha_ratio_db,
                hammarberg_db: spectral.hammarberg_db,
                slope_0_500: spectral.slope_0_500,
                slope_500_1500: spectral.slope_500_1500,
                loudness_proxy: 10.0 * power.max(SPECTRUM_FLOOR).log10(),
                mel_cepstra: spectral.mel_cepstra,
            }
        })
        .collect();

    Ok(FrameTrack {
        id: clip.id.clone(),
        hop_secs: hop as f64 / sr,
        frames,
    })
}

/// Loads every `.wav` under `dir` (non-recursive, sorted by file name),
/// extracts the default functional set in parallel and assembles a table
/// keyed by file stem.
pub fn extract_feature_table(dir: impl AsRef<Path>, config: &FrameConfig) -> Result<FeatureTable> {
    let dir = dir.as_ref();
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .is_some_and(|ext| ext.eq_ignore_ascii_case("wav"))
        })
        .collect();
    paths.sort();
    extract_feature_table_from_paths(&paths, config)
}

pub fn extract_feature_table_from_paths(
    paths: &[PathBuf],
    config: &FrameConfig,
) -> Result<FeatureTable> {
    let rows: Vec<(String, Vec<(String, Option<f64>)>)> = paths
        .par_iter()
        .map(|path| {
            let clip = load_audio(path)?;
            let track = extract_frame_descriptors(&clip, config)?;
            Ok((clip.id, utterance_features(&track)))
        })
        .collect::<Result<_>>()?;

    let names: Vec<String> = match rows.first() {
        Some((_, feats)) => feats.iter().map(|(n, _)| n.clone()).collect(),
        None => utterance_features(&FrameTrack {
            id: String::new(),
            hop_secs: config.hop_secs,
            frames: Vec::new(),
        })
        .into_iter()
        .map(|(n, _)| n)
        .collect(),
    };
    let ids = rows.iter().map(|(id, _)| id.clone()).collect();
    let values = rows
        .into_iter()
        .map(|(_, feats)| feats.into_iter().map(|(_, v)| v).collect())
        .collect();
    FeatureTable::new(ids, names, values)
}
