use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::grid::GridGeometry;
use crate::error::{Error, Result};

/// Smallest Monte-Carlo sample accepted.
pub const MIN_MC_DRAWS: usize = 1000;
/// Default Monte-Carlo sample.
pub const DEFAULT_MC_DRAWS: usize = 1_000_000;

/// What a guesser with no information picks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BaselineScheme {
    /// A uniformly random anchor.
    AnchorToAnchor,
    /// A uniformly random lattice sample.
    AnchorToLattice,
    /// A uniformly random point of the rectangle.
    AnchorToUniformClick,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BaselineMethod {
    ExactEnumeration {
        pairs: usize,
    },
    MonteCarlo {
        draws: usize,
        std_error: f64,
        /// `1.96 · std_error`
        ci95: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineReport {
    pub scheme: BaselineScheme,
    /// Expected grid-unit distance between the true anchor (uniform over
    /// anchors) and the random guess.
    pub expected: f64,
    pub method: BaselineMethod,
}

fn anchor_list(g: &GridGeometry) -> Vec<[f64; 2]> {
    g.anchors().into_iter().flatten().collect()
}

fn exact(g: &GridGeometry, guesses: &[[f64; 2]], scheme: BaselineScheme) -> BaselineReport {
    let anchors = anchor_list(g);
    let mut total = 0.0;
    for a in &anchors {
        for q in guesses {
            total += g.distance_grid_units(*a, *q);
        }
    }
    let pairs = anchors.len() * guesses.len();
    BaselineReport {
        scheme,
        expected: total / pairs as f64,
        method: BaselineMethod::ExactEnumeration { pairs },
    }
}

/// Expected distance of a random answer.
///
/// Without `n_mc`, anchor and lattice schemes are enumerated exactly and the
/// uniform-click scheme uses [`DEFAULT_MC_DRAWS`] draws. With `n_mc`, every
/// scheme is estimated by Monte-Carlo from `seed`.
pub fn random_baseline(
    g: &GridGeometry,
    scheme: BaselineScheme,
    n_mc: Option<usize>,
    seed: u64,
) -> Result<BaselineReport> {
    if let Some(n) = n_mc {
        if n < MIN_MC_DRAWS {
            return Err(Error::InvalidArgument(format!(
                "Monte-Carlo needs at least {MIN_MC_DRAWS} draws, got {n}"
            )));
        }
    }
    match (scheme, n_mc) {
        (BaselineScheme::AnchorToAnchor, None) => Ok(exact(g, &anchor_list(g), scheme)),
        (BaselineScheme::AnchorToLattice, None) => {
            let res = g.resolution;
            let lattice: Vec<[f64; 2]> = (0..res * res)
                .map(|i| g.lattice_point(i % res, i / res))
                .collect();
            Ok(exact(g, &lattice, scheme))
        }
        (_, n) => Ok(monte_carlo(g, scheme, n.unwrap_or(DEFAULT_MC_DRAWS), seed)),
    }
}

fn monte_carlo(g: &GridGeometry, scheme: BaselineScheme, draws: usize, seed: u64) -> BaselineReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cells = g.cells;
    let res = g.resolution;
    let b = g.bounds;
    // Welford
    let (mut mean, mut m2) = (0.0, 0.0);
    for i in 0..draws {
        let truth = g.anchor(rng.random_range(0..cells), rng.random_range(0..cells));
        let guess = match scheme {
            BaselineScheme::AnchorToAnchor => {
                g.anchor(rng.random_range(0..cells), rng.random_range(0..cells))
            }
            BaselineScheme::AnchorToLattice => {
                g.lattice_point(rng.random_range(0..res), rng.random_range(0..res))
            }
            BaselineScheme::AnchorToUniformClick => [
                b.x_min + rng.random::<f64>() * b.width(),
                b.y_min + rng.random::<f64>() * b.height(),
            ],
        };
        let d = g.distance_grid_units(truth, guess);
        let delta = d - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (d - mean);
    }
    let var = if draws > 1 { m2 / (draws - 1) as f64 } else { 0.0 };
    let std_error = (var / draws as f64).sqrt();
    BaselineReport {
        scheme,
        expected: mean,
        method: BaselineMethod::MonteCarlo {
            draws,
            std_error,
            ci95: 1.96 * std_error,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::grid::Bounds;

    #[test]
    fn single_cell_grid_is_zero() {
        let g = GridGeometry::new(Bounds::new(0.0, 1.0, 0.0, 1.0).unwrap(), 10, 1).unwrap();
        let r = random_baseline(&g, BaselineScheme::AnchorToAnchor, None, 0).unwrap();
        assert_eq!(r.expected, 0.0);
    }

    #[test]
    fn rejects_small_monte_carlo() {
        let g = GridGeometry::new(Bounds::new(0.0, 1.0, 0.0, 1.0).unwrap(), 10, 5).unwrap();
        assert!(random_baseline(&g, BaselineScheme::AnchorToUniformClick, Some(999), 0).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let g = GridGeometry::new(Bounds::new(0.0, 3.0, -1.0, 1.0).unwrap(), 10, 5).unwrap();
        let a = random_baseline(&g, BaselineScheme::AnchorToUniformClick, Some(5000), 9).unwrap();
        let b = random_baseline(&g, BaselineScheme::AnchorToUniformClick, Some(5000), 9).unwrap();
        assert_eq!(a, b);
    }
}
