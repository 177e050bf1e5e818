//! Differential evolution (rand/1/bin) minimizer.
//!
//! Small, deterministic, bound-constrained. The cylinder fit needs nothing
//! fancier: six parameters, tight bounds, elitist selection.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::scalar::Real;

/// Result of a DE run.
#[derive(Debug, Clone)]
pub struct DeResult<T> {
    /// Best parameter vector found.
    pub x: Vec<T>,
    /// Objective at `x`.
    pub value: T,
    /// Best objective after each generation (elitist, non-increasing).
    pub best_per_generation: Vec<T>,
}

/// Minimize `objective` over the box `bounds` with rand/1/bin DE.
///
/// `init`, when given, seeds the first population member (clamped to the
/// box). The run is fully determined by `rng_seed`.
pub fn minimize<T, F>(
    mut objective: F,
    bounds: &[(T, T)],
    init: Option<&[T]>,
    population: usize,
    generations: usize,
    weight: T,
    crossover: T,
    rng_seed: u64,
) -> DeResult<T>
where
    T: Real,
    F: FnMut(&[T]) -> T,
{
    assert!(population >= 4, "rand/1/bin needs at least 4 members");
    let dim = bounds.len();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);

    let clamp = |x: T, (lo, hi): (T, T)| x.max(lo).min(hi);
    let uniform = |rng: &mut ChaCha8Rng, (lo, hi): (T, T)| {
        lo + (hi - lo) * T::of(rng.random::<f64>())
    };

    let mut pop: Vec<Vec<T>> = Vec::with_capacity(population);
    for i in 0..population {
        if i == 0 {
            if let Some(start) = init {
                assert_eq!(start.len(), dim);
                pop.push(
                    start
                        .iter()
                        .zip(bounds)
                        .map(|(&x, &b)| clamp(x, b))
                        .collect(),
                );
                continue;
            }
        }
        pop.push(bounds.iter().map(|&b| uniform(&mut rng, b)).collect());
    }
    let mut scores: Vec<T> = pop.iter().map(|x| objective(x)).collect::<Vec<_>>();

    let mut best_idx = 0usize;
    for i in 1..population {
        if scores[i] < scores[best_idx] {
            best_idx = i;
        }
    }

    let mut best_per_generation = Vec::with_capacity(generations);
    let mut trial = vec![T::zero(); dim];
    for _ in 0..generations {
        for i in 0..population {
            // Three distinct members, none equal to i.
            let pick = |rng: &mut ChaCha8Rng, exclude: &[usize]| loop {
                let k = rng.random_range(0..population);
                if !exclude.contains(&k) {
                    return k;
                }
            };
            let a = pick(&mut rng, &[i]);
            let b = pick(&mut rng, &[i, a]);
            let c = pick(&mut rng, &[i, a, b]);

            let j_rand = rng.random_range(0..dim);
            for j in 0..dim {
                let mutated = pop[a][j] + weight * (pop[b][j] - pop[c][j]);
                let use_mutant = j == j_rand || T::of(rng.random::<f64>()) < crossover;
                trial[j] = if use_mutant {
                    clamp(mutated, bounds[j])
                } else {
                    pop[i][j]
                };
            }

            let score = objective(&trial);
            if score <= scores[i] {
                pop[i].copy_from_slice(&trial);
                scores[i] = score;
                if score < scores[best_idx] {
                    best_idx = i;
                }
            }
        }
        best_per_generation.push(scores[best_idx]);
    }

    DeResult {
        x: pop[best_idx].clone(),
        value: scores[best_idx],
        best_per_generation,
    }
}
