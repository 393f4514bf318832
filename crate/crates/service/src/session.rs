use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use latentscope_core::experiment::Variant;

/// One trial as stored in the log. Never sent to participants as is.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskPlan {
    /// 1-based.
    pub task_index: u32,
    pub reference_text: String,
    pub space_text: String,
    /// `(row, col)`.
    pub true_anchor: (usize, usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub session_id: String,
    pub variant: Variant,
    /// Seed the task plan was drawn from.
    pub seed: u64,
    pub created_at_ms: u64,
    pub tasks: Vec<TaskPlan>,
}

/// Draws anchors uniformly over the `cells × cells` anchors. Variant 1 uses
/// one text per task for both sides; variant 2 picks two distinct texts.
pub fn plan_tasks(
    variant: Variant,
    texts: &[String],
    cells: usize,
    n_tasks: u32,
    seed: u64,
) -> Result<Vec<TaskPlan>, String> {
    if texts.is_empty() {
        return Err("no stimulus texts available".into());
    }
    if variant == Variant::DifferentText && texts.len() < 2 {
        return Err("variant 2 needs at least two texts".into());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((1..=n_tasks)
        .map(|task_index| {
            let r = rng.random_range(0..texts.len());
            let s = match variant {
                Variant::SameText => r,
                Variant::DifferentText => (r + rng.random_range(1..texts.len())) % texts.len(),
            };
            TaskPlan {
                task_index,
                reference_text: texts[r].clone(),
                space_text: texts[s].clone(),
                true_anchor: (rng.random_range(0..cells), rng.random_range(0..cells)),
            }
        })
        .collect())
}

/// 128 random bits from the thread-local CSPRNG, hex encoded.
pub fn new_token() -> String {
    format!("{:032x}", rand::random::<u128>())
}
