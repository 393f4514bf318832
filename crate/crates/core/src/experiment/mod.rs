//! Perceptual localisation experiment: the sampling grid, answer logs,
//! scoring against chance, and stimulus lookup.

pub mod answers;
pub mod baseline;
pub mod durations;
pub mod grid;
pub mod scoring;
pub mod slope;
pub mod stimuli;

pub use answers::{effective_answers, read_answer_log, AnswerRecord, Variant};
pub use baseline::{random_baseline, BaselineMethod, BaselineReport, BaselineScheme};
pub use durations::{summarize_durations, upper_fence, DurationSummary, IndexDurations};
pub use grid::{build_grid, build_grid_with_cells, distance_grid_units, Bounds, GridGeometry, GridSpec, ANCHOR_CELLS, DEFAULT_RESOLUTION};
pub use scoring::{ci95_half_width, score_answers, DistanceSummary, ScoreOptions, ScoreReport, VariantScore};
pub use slope::{linear_slope_test, slope_test, SlopeStatistic, SlopeTest};
pub use stimuli::{generate_synthetic_stimuli, synthesize_stimulus, StimulusEntry, StimulusManifest, SynthConfig, MANIFEST_FILE};
