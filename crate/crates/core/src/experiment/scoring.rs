use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::answers::{AnswerRecord, Variant};
use super::durations::{summarize_durations, DurationSummary};
use super::grid::GridGeometry;
use super::slope::{slope_test, SlopeStatistic, SlopeTest};
use crate::error::{Error, Result};
use crate::stats::{self, Quartiles};

/// Normal-approximation 95% quantile.
pub const Z_95: f64 = 1.96;

/// `1.96 · s / √n` with the sample standard deviation; `None` for n < 2.
pub fn ci95_half_width(values: &[f64]) -> Option<f64> {
    Some(Z_95 * stats::sample_std(values)? / (values.len() as f64).sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceSummary {
    pub n: usize,
    /// Mean grid-unit distance to the true anchor.
    pub mean: f64,
    pub ci95: Option<f64>,
    pub quartiles: Quartiles,
    /// Mean distance in raw latent units.
    pub mean_latent: f64,
}

impl DistanceSummary {
    fn of(grid: &[f64], latent: &[f64]) -> Option<Self> {
        Some(DistanceSummary {
            n: grid.len(),
            mean: stats::mean(grid)?,
            ci95: ci95_half_width(grid),
            quartiles: Quartiles::of(grid)?,
            mean_latent: stats::mean(latent)?,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexDistances {
    pub task_index: u32,
    pub n: usize,
    pub mean: f64,
    pub median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantScore {
    pub variant: Variant,
    pub distances: DistanceSummary,
    pub by_index: Vec<IndexDistances>,
    /// Mean distance against task index.
    pub distance_slope: Option<SlopeTest>,
    /// Median duration (outliers kept) against task index.
    pub duration_slope: Option<SlopeTest>,
    pub durations: DurationSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub snapped: bool,
    pub overall: DistanceSummary,
    pub variants: Vec<VariantScore>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreOptions {
    /// Replace each click by its nearest anchor before measuring.
    pub snap: bool,
}

/// Scores answers as they are (no de-duplication; see
/// [`super::answers::effective_answers`]).
pub fn score_answers(
    geometry: &GridGeometry,
    answers: &[AnswerRecord],
    options: ScoreOptions,
) -> Result<ScoreReport> {
    if answers.is_empty() {
        return Err(Error::NotEnoughData("no answers to score".into()));
    }
    for a in answers {
        if a.true_anchor.0 >= geometry.cells || a.true_anchor.1 >= geometry.cells {
            return Err(Error::InvalidArgument(format!(
                "true anchor {:?} outside the {1}x{1} grid",
                a.true_anchor,
                geometry.cells
            )));
        }
    }

    let measure = |a: &AnswerRecord| -> (f64, f64) {
        let truth = geometry.anchor(a.true_anchor.0, a.true_anchor.1);
        let click = if options.snap {
            let (r, c) = geometry.nearest_anchor(a.clicked);
            geometry.anchor(r, c)
        } else {
            geometry.bounds.clamp(a.clicked)
        };
        (
            geometry.distance_grid_units(click, truth),
            (click[0] - truth[0]).hypot(click[1] - truth[1]),
        )
    };
    let measured: Vec<(f64, f64)> = answers.iter().map(measure).collect();
    let (all_grid, all_latent): (Vec<f64>, Vec<f64>) = measured.iter().copied().unzip();

    let mut groups: BTreeMap<Variant, Vec<usize>> = BTreeMap::new();
    for (i, a) in answers.iter().enumerate() {
        groups.entry(a.variant).or_default().push(i);
    }
    let durations = summarize_durations(answers);

    let variants = groups
        .into_iter()
        .map(|(variant, idx)| {
            let grid: Vec<f64> = idx.iter().map(|&i| measured[i].0).collect();
            let latent: Vec<f64> = idx.iter().map(|&i| measured[i].1).collect();
            let mut per_task: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
            for &i in &idx {
                per_task
                    .entry(answers[i].task_index)
                    .or_default()
                    .push(measured[i].0);
            }
            let by_index = per_task
                .iter()
                .map(|(&task_index, d)| IndexDistances {
                    task_index,
                    n: d.len(),
                    mean: stats::mean(d).expect("non-empty"),
                    median: stats::median(d).expect("non-empty"),
                })
                .collect();
            let distance_series: Vec<(f64, f64)> = idx
                .iter()
                .map(|&i| (answers[i].task_index as f64, measured[i].0))
                .collect();
            let duration_series: Vec<(f64, f64)> = idx
                .iter()
                .map(|&i| (answers[i].task_index as f64, answers[i].duration_secs))
                .collect();
            VariantScore {
                variant,
                distances: DistanceSummary::of(&grid, &latent).expect("non-empty"),
                by_index,
                distance_slope: slope_test(&distance_series, SlopeStatistic::MeanByIndex).ok(),
                duration_slope: slope_test(&duration_series, SlopeStatistic::MedianByIndex).ok(),
                durations: durations
                    .iter()
                    .find(|d| d.variant == variant)
                    .expect("every variant has durations")
                    .clone(),
            }
        })
        .collect();

    Ok(ScoreReport {
        snapped: options.snap,
        overall: DistanceSummary::of(&all_grid, &all_latent).expect("non-empty"),
        variants,
    })
}

impl fmt::Display for ScoreReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ci = |c: Option<f64>| c.map_or("n/a".to_string(), |v| format!("{v:.3}"));
        let line = |f: &mut fmt::Formatter<'_>, label: &str, d: &DistanceSummary| {
            writeln!(
                f,
                "{label:<28} n {:>5}  mean {:.3} ± {}  median {:.3}  IQR [{:.3}, {:.3}]  latent mean {:.4}",
                d.n,
                d.mean,
                ci(d.ci95),
                d.quartiles.median,
                d.quartiles.q1,
                d.quartiles.q3,
                d.mean_latent
            )
        };
        writeln!(
            f,
            "distances in grid units{}",
            if self.snapped { " (clicks snapped to anchors)" } else { "" }
        )?;
        for v in &self.variants {
            line(f, &v.variant.to_string(), &v.distances)?;
        }
        line(f, "all", &self.overall)?;
        for v in &self.variants {
            let slope = |s: &Option<SlopeTest>, unit: &str| {
                s.map_or("n/a".to_string(), |t| {
                    format!("{:+.4} {unit}/task (p = {:.4})", t.slope, t.p_value)
                })
            };
            writeln!(
                f,
                "{}: distance slope {}, median duration slope {}, duration outliers {}",
                v.variant,
                slope(&v.distance_slope, "units"),
                slope(&v.duration_slope, "s"),
                v.durations.n_outliers
            )?;
        }
        Ok(())
    }
}
