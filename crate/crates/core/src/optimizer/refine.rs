//! Direct search on the exact makespan over the product of simplices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::makespan::makespan_of;
use crate::plan::{BarrierConfig, ExecutionPlan};
use crate::platform::{PlatformGraph, Workload};

/// Step size control: start at `initial`, multiply by `decay` after
/// `patience` consecutive rejected moves, stop below `min`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepSchedule {
    pub initial: f64,
    pub decay: f64,
    pub min: f64,
    pub patience: usize,
}

impl Default for StepSchedule {
    fn default() -> Self {
        Self {
            initial: 0.1,
            decay: 0.5,
            min: 1e-7,
            patience: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RefineOptions {
    pub iterations: usize,
    pub schedule: StepSchedule,
    pub seed: u64,
}

impl Default for RefineOptions {
    fn default() -> Self {
        Self {
            iterations: 4000,
            schedule: StepSchedule::default(),
            seed: 0,
        }
    }
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        cumulative += ui;
        let t = (cumulative - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

fn perturb(row: &mut Vec<f64>, step: f64, rng: &mut ChaCha8Rng) {
    let noise = Normal::new(0.0, step).expect("positive step");
    let perturbed: Vec<f64> = row.iter().map(|v| v + noise.sample(rng)).collect();
    *row = project_simplex(&perturbed);
}

/// Which probability vector of the plan a move touches.
#[derive(Debug, Clone, Copy)]
enum Block {
    Push(usize),
    Reducer,
}

fn block_mut(plan: &mut ExecutionPlan, b: Block) -> &mut Vec<f64> {
    match b {
        Block::Push(i) => &mut plan.push_fraction[i],
        Block::Reducer => &mut plan.reducer_fraction,
    }
}

/// Improves `start` by randomized moves that keep every row on its simplex.
///
/// Each move shifts mass between two entries of one row, or adds Gaussian
/// noise to one row or to every row and projects back onto the simplex.
/// Only strict improvements are kept, so the result is never worse than
/// `start`. The outcome depends only on the inputs and `opts.seed`.
pub fn refine_plan(
    p: &PlatformGraph,
    w: &Workload,
    b: BarrierConfig,
    start: &ExecutionPlan,
    opts: &RefineOptions,
) -> ExecutionPlan {
    let mut blocks: Vec<Block> = Vec::new();
    if p.num_mappers() > 1 {
        blocks.extend((0..p.num_sources()).map(Block::Push));
    }
    if p.num_reducers() > 1 {
        blocks.push(Block::Reducer);
    }
    let mut best = start.clone();
    if blocks.is_empty() {
        return best;
    }
    let mut best_value = makespan_of(p, w, &best, b);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut step = opts.schedule.initial;
    let mut failures = 0;
    for _ in 0..opts.iterations {
        if step < opts.schedule.min {
            break;
        }
        let mut candidate = best.clone();
        let moved = match rng.random_range(0..3) {
            0 => {
                let block = blocks[rng.random_range(0..blocks.len())];
                let row = block_mut(&mut candidate, block);
                let donors: Vec<usize> = (0..row.len()).filter(|&a| row[a] > 0.0).collect();
                let a = donors[rng.random_range(0..donors.len())];
                let mut c = rng.random_range(0..row.len() - 1);
                if c >= a {
                    c += 1;
                }
                let amount = (step * rng.random::<f64>()).min(row[a]);
                row[a] -= amount;
                row[c] += amount;
                amount > 0.0
            }
            1 => {
                let block = blocks[rng.random_range(0..blocks.len())];
                perturb(block_mut(&mut candidate, block), step, &mut rng);
                true
            }
            _ => {
                // Joint move: some optima can only be left by changing push
                // and reducer fractions together.
                for &block in &blocks {
                    perturb(block_mut(&mut candidate, block), step, &mut rng);
                }
                true
            }
        };
        let value = if moved {
            makespan_of(p, w, &candidate, b)
        } else {
            f64::INFINITY
        };
        if value < best_value {
            best = candidate;
            best_value = value;
            failures = 0;
        } else {
            failures += 1;
            if failures >= opts.schedule.patience {
                step *= opts.schedule.decay;
                failures = 0;
            }
        }
    }
    let normalized = best.normalized();
    if makespan_of(p, w, &normalized, b) <= best_value {
        normalized
    } else {
        best
    }
}
