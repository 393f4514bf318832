//! Utterance-level statistics over frame contours.

use serde::{Deserialize, Serialize};

use super::{FrameRecord, FrameTrack};
use crate::stats;

/// Frame-level descriptor a functional is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Descriptor {
    F0Semitone,
    Loudness,
    /// MFCC 1 to 4.
    Mfcc(u8),
    AlphaRatio,
    Hammarberg,
    Slope0To500,
    Slope500To1500,
}

impl Descriptor {
    fn base_name(self) -> String {
        match self {
            Descriptor::F0Semitone => "F0semitone".into(),
            Descriptor::Loudness => "loudnessProxy".into(),
            Descriptor::Mfcc(i) => format!("mfcc{i}"),
            Descriptor::AlphaRatio => "alphaRatio".into(),
            Descriptor::Hammarberg => "hammarbergIndex".into(),
            Descriptor::Slope0To500 => "slope0-500".into(),
            Descriptor::Slope500To1500 => "slope500-1500".into(),
        }
    }

    fn value(self, frame: &FrameRecord) -> Option<f64> {
        match self {
            Descriptor::F0Semitone => frame.f0_semitone,
            Descriptor::Loudness => Some(frame.loudness_proxy),
            Descriptor::Mfcc(i) => frame.mfcc.get((i as usize).checked_sub(1)?).copied(),
            Descriptor::AlphaRatio => Some(frame.alpha_ratio_db),
            Descriptor::Hammarberg => Some(frame.hammarberg_db),
            Descriptor::Slope0To500 => Some(frame.slope_0_500),
            Descriptor::Slope500To1500 => Some(frame.slope_500_1500),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum FunctionalKind {
    Mean,
    /// Population stddev divided by |mean|.
    StddevNorm,
    Stddev,
    /// Percentile in (0, 100).
    Percentile(f64),
    MeanRisingSlope,
    MeanFallingSlope,
}

impl FunctionalKind {
    fn name(self) -> String {
        match self {
            FunctionalKind::Mean => "mean".into(),
            FunctionalKind::StddevNorm => "stddevNorm".into(),
            FunctionalKind::Stddev => "stddev".into(),
            FunctionalKind::Percentile(p) => format!("percentile{p:.1}"),
            FunctionalKind::MeanRisingSlope => "meanRisingSlope".into(),
            FunctionalKind::MeanFallingSlope => "meanFallingSlope".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scope {
    VoicedOnly,
    AllFrames,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSpec {
    pub descriptor: Descriptor,
    pub kind: FunctionalKind,
    pub scope: Scope,
}

impl FunctionalSpec {
    pub fn new(descriptor: Descriptor, kind: FunctionalKind, scope: Scope) -> Self {
        FunctionalSpec {
            descriptor,
            kind,
            scope,
        }
    }

    /// eGeMAPS-style column name, e.g. `F0semitone_percentile50.0` or
    /// `mfcc1V_mean`. F0 is voiced by construction and carries no `V`.
    pub fn name(&self) -> String {
        let suffix = match (self.descriptor, self.scope) {
            (Descriptor::F0Semitone, _) | (_, Scope::AllFrames) => "",
            (_, Scope::VoicedOnly) => "V",
        };
        format!("{}{}_{}", self.descriptor.base_name(), suffix, self.kind.name())
    }
}

/// Contour segments the functional operates on. Voiced-only scope splits the
/// contour at unvoiced gaps; F0 is always voiced-only.
fn segments(track: &FrameTrack, descriptor: Descriptor, scope: Scope) -> Vec<Vec<f64>> {
    let voiced_only = scope == Scope::VoicedOnly || descriptor == Descriptor::F0Semitone;
    let mut out = Vec::new();
    let mut current = Vec::new();
    for frame in &track.frames {
        let keep = !voiced_only || frame.voiced;
        match descriptor.value(frame) {
            Some(v) if keep => current.push(v),
            _ => {
                if !current.is_empty() {
                    out.push(std::mem::take(&mut current));
                }
            }
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

/// Signed slopes (units per second) of the maximal strictly monotone runs
/// within one segment.
fn monotone_run_slopes(segment: &[f64], hop_secs: f64) -> Vec<f64> {
    let mut slopes = Vec::new();
    let mut start = 0;
    let mut dir = 0i8;
    for i in 1..segment.len() {
        let step = segment[i] - segment[i - 1];
        let d = if step > 0.0 {
            1
        } else if step < 0.0 {
            -1
        } else {
            0
        };
        if d != dir {
            if dir != 0 {
                slopes.push((segment[i - 1] - segment[start]) / ((i - 1 - start) as f64 * hop_secs));
            }
            start = i - 1;
            dir = d;
        }
    }
    if dir != 0 {
        let last = segment.len() - 1;
        slopes.push((segment[last] - segment[start]) / ((last - start) as f64 * hop_secs));
    }
    slopes
}

fn evaluate(kind: FunctionalKind, segs: &[Vec<f64>], hop_secs: f64) -> Option<f64> {
    let values: Vec<f64> = segs.iter().flatten().copied().collect();
    match kind {
        FunctionalKind::Mean => stats::mean(&values),
        FunctionalKind::Stddev => stats::population_std(&values),
        FunctionalKind::StddevNorm => {
            let m = stats::mean(&values)?;
            if m == 0.0 {
                return None;
            }
            Some(stats::population_std(&values)? / m.abs())
        }
        FunctionalKind::Percentile(p) => {
            if !(p > 0.0 && p < 100.0) {
                return None;
            }
            stats::percentile(&values, p)
        }
        FunctionalKind::MeanRisingSlope | FunctionalKind::MeanFallingSlope => {
            let rising = kind == FunctionalKind::MeanRisingSlope;
            let slopes: Vec<f64> = segs
                .iter()
                .flat_map(|s| monotone_run_slopes(s, hop_secs))
                .filter(|&s| if rising { s > 0.0 } else { s < 0.0 })
                .collect();
            stats::mean(&slopes)
        }
    }
}

/// Applies each functional to the track. Undefined results (no voiced
/// frames, stddevNorm with zero mean, no monotone runs) are `None`.
pub fn apply_functionals(
    track: &FrameTrack,
    specs: &[FunctionalSpec],
) -> Vec<(String, Option<f64>)> {
    specs
        .iter()
        .map(|spec| {
            let segs = segments(track, spec.descriptor, spec.scope);
            (spec.name(), evaluate(spec.kind, &segs, track.hop_secs))
        })
        .collect()
}

/// The built-in eGeMAPS-like subset.
pub fn default_functionals() -> Vec<FunctionalSpec> {
    use Descriptor::*;
    use FunctionalKind::*;
    use Scope::*;

    let mut specs = Vec::new();
    let contour_set = [
        Mean,
        StddevNorm,
        Percentile(20.0),
        Percentile(50.0),
        Percentile(80.0),
        MeanRisingSlope,
        MeanFallingSlope,
    ];
    for kind in contour_set {
        specs.push(FunctionalSpec::new(F0Semitone, kind, VoicedOnly));
    }
    for kind in contour_set {
        specs.push(FunctionalSpec::new(Loudness, kind, AllFrames));
    }
    for i in 1..=4 {
        for scope in [VoicedOnly, AllFrames] {
            specs.push(FunctionalSpec::new(Mfcc(i), Mean, scope));
            specs.push(FunctionalSpec::new(Mfcc(i), StddevNorm, scope));
        }
    }
    for d in [AlphaRatio, Hammarberg, Slope0To500, Slope500To1500] {
        specs.push(FunctionalSpec::new(d, Mean, VoicedOnly));
        specs.push(FunctionalSpec::new(d, StddevNorm, VoicedOnly));
    }
    specs
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentStats {
    /// Voiced run lengths in seconds.
    pub lengths: Vec<f64>,
    pub mean: Option<f64>,
    /// Population standard deviation.
    pub stddev: Option<f64>,
}

pub fn voiced_segment_stats(track: &FrameTrack) -> SegmentStats {
    let mut lengths = Vec::new();
    let mut run = 0usize;
    for frame in &track.frames {
        if frame.voiced {
            run += 1;
        } else if run > 0 {
            lengths.push(run as f64 * track.hop_secs);
            run = 0;
        }
    }
    if run > 0 {
        lengths.push(run as f64 * track.hop_secs);
    }
    SegmentStats {
        mean: stats::mean(&lengths),
        stddev: stats::population_std(&lengths),
        lengths,
    }
}

/// Default functionals plus voiced-segment length statistics.
pub fn utterance_features(track: &FrameTrack) -> Vec<(String, Option<f64>)> {
    let mut out = apply_functionals(track, &default_functionals());
    let seg = voiced_segment_stats(track);
    out.push(("MeanVoicedSegmentLengthSec".into(), seg.mean));
    out.push(("StddevVoicedSegmentLengthSec".into(), seg.stddev));
    out
}
