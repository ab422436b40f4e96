#![allow(dead_code)]

use pcdm_core::problem::{CompositeProblem, LossKind, Regularizer};
use pcdm_core::SparseMatrix;
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random `m × n` matrix whose rows have between 1 and `omega` nonzeros,
/// with the first row holding exactly `omega`. Every column is touched.
pub fn partially_separable_matrix(m: usize, n: usize, omega: usize, seed: u64) -> SparseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut triplets = Vec::new();
    for r in 0..m {
        let k = if r == 0 { omega } else { rng.random_range(1..=omega) };
        for c in index::sample(&mut rng, n, k) {
            triplets.push((r, c, rng.random_range(-1.0..1.0)));
        }
    }
    // Columns left empty get one entry in a row that still has room.
    let mut counts: Vec<usize> = vec![0; m];
    let mut used = vec![false; n];
    for &(r, c, _) in &triplets {
        counts[r] += 1;
        used[c] = true;
    }
    for c in 0..n {
        if !used[c] {
            let r = (0..m).find(|&r| counts[r] < omega && !triplets.iter().any(|t| t.0 == r && t.1 == c));
            if let Some(r) = r {
                counts[r] += 1;
                triplets.push((r, c, rng.random_range(0.5..1.0)));
            }
        }
    }
    SparseMatrix::from_triplets(m, n, triplets).unwrap()
}

pub fn quadratic(m: usize, n: usize, omega: usize, seed: u64, reg: Regularizer) -> CompositeProblem {
    let a = partially_separable_matrix(m, n, omega, seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xb);
    let b: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
    CompositeProblem::unit_blocks(a, LossKind::square(b), reg).unwrap()
}

pub fn labels(m: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..m).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
}
