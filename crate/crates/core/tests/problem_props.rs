use pcdm_core::problem::{partial_separability_degree, BlockStructure, CompositeProblem, LossKind, Regularizer};
use pcdm_core::SparseMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize, density: f64) -> SparseMatrix {
    let mut t = Vec::new();
    for r in 0..m {
        for c in 0..n {
            if rng.random::<f64>() < density {
                t.push((r, c, rng.random_range(-2.0..2.0)));
            }
        }
    }
    SparseMatrix::from_triplets(m, n, t).unwrap()
}

fn random_blocks(rng: &mut ChaCha8Rng, dim: usize) -> BlockStructure {
    let mut sizes = Vec::new();
    let mut left = dim;
    while left > 0 {
        let s = rng.random_range(1..=left.min(3));
        sizes.push(s);
        left -= s;
    }
    BlockStructure::from_sizes(&sizes).unwrap()
}

fn labels(rng: &mut ChaCha8Rng, m: usize) -> Vec<f64> {
    (0..m).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect()
}

fn losses(rng: &mut ChaCha8Rng, m: usize) -> Vec<LossKind> {
    vec![
        LossKind::square((0..m).map(|_| rng.random_range(-1.0..1.0)).collect()),
        LossKind::logistic(labels(rng, m)),
        LossKind::hinge_square(labels(rng, m)),
    ]
}

fn dense_f(a: &SparseMatrix, loss: &LossKind, x: &[f64]) -> f64 {
    (0..a.rows())
        .map(|r| {
            let z: f64 = (0..a.cols()).map(|c| a.get(r, c) * x[c]).sum::<f64>() - loss.offset(r);
            loss.value(r, z)
        })
        .sum()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn omega_matches_brute_force(seed in any::<u64>(), m in 1usize..40, dim in 1usize..30, density in 0.02f64..0.6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_matrix(&mut rng, m, dim, density);
        let blocks = random_blocks(&mut rng, dim);
        let brute = (0..m)
            .map(|r| {
                let mut touched: Vec<usize> = (0..dim).filter(|&c| a.get(r, c) != 0.0).map(|c| blocks.block_of(c)).collect();
                touched.sort_unstable();
                touched.dedup();
                touched.len()
            })
            .max()
            .unwrap()
            .max(1);
        prop_assert_eq!(partial_separability_degree(&a, &blocks).unwrap(), brute);
    }

    #[test]
    fn dso_and_global_bounds_hold(seed in any::<u64>(), m in 1usize..30, dim in 1usize..20, density in 0.05f64..0.7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_matrix(&mut rng, m, dim, density);
        let blocks = random_blocks(&mut rng, dim);
        for loss in losses(&mut rng, m) {
            let p = CompositeProblem::new(a.clone(), loss, Regularizer::Zero, blocks.clone()).unwrap();
            let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
            let mut h: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
            // Sparsify h block by block so the DSO factor varies.
            for i in 0..p.n() {
                if rng.random::<f64>() < 0.5 {
                    for c in p.blocks().range(i) {
                        h[c] = 0.0;
                    }
                }
            }
            let moved: Vec<f64> = x.iter().zip(&h).map(|(a, b)| a + b).collect();
            let f_new = p.evaluate(&moved).unwrap().f;
            let bound = p.dso_upper_bound(&x, &h).unwrap();
            prop_assert!(f_new <= bound + 1e-9 * (1.0 + f_new.abs()), "{} > {}", f_new, bound);

            let f = p.evaluate(&x).unwrap().f;
            let g = p.gradient(&x).unwrap();
            let lin: f64 = g.iter().zip(&h).map(|(a, b)| a * b).sum();
            let global = f + lin + 0.5 * p.omega() as f64 * p.weighted_sq_norm(&h, p.lipschitz());
            prop_assert!(f_new <= global + 1e-9 * (1.0 + f_new.abs()));
        }
    }

    #[test]
    fn gradients_match_finite_differences(seed in any::<u64>(), m in 1usize..25, dim in 1usize..15) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_matrix(&mut rng, m, dim, 0.4);
        for loss in losses(&mut rng, m) {
            let p = CompositeProblem::unit_blocks(a.clone(), loss, Regularizer::Zero).unwrap();
            let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect();
            let g = p.gradient(&x).unwrap();
            for c in 0..dim {
                let step = 1e-6 * (1.0 + x[c].abs());
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[c] += step;
                xm[c] -= step;
                let fd = (p.evaluate(&xp).unwrap().f - p.evaluate(&xm).unwrap().f) / (2.0 * step);
                let scale = g[c].abs().max(fd.abs()).max(1.0);
                prop_assert!((fd - g[c]).abs() <= 1e-5 * scale, "coordinate {}: fd {} grad {}", c, fd, g[c]);
            }
        }
    }

    #[test]
    fn regularizers_are_block_additive(seed in any::<u64>(), dim in 1usize..30) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let blocks = random_blocks(&mut rng, dim);
        for reg in [
            Regularizer::L1 { lambda: 0.7 },
            Regularizer::L2Squared { lambda: 1.3 },
            Regularizer::Box { lo: -1.0, hi: 1.0 },
        ] {
            let total = reg.value(&x);
            let by_block: f64 = (0..blocks.n()).map(|i| reg.value(&x[blocks.range(i)])).sum();
            prop_assert!((total - by_block).abs() <= 1e-12 * (1.0 + total.abs()));
        }
    }

    #[test]
    fn evaluation_matches_dense_oracle(seed in any::<u64>(), m in 1usize..20, dim in 1usize..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_matrix(&mut rng, m, dim, 0.5);
        for loss in losses(&mut rng, m) {
            let p = CompositeProblem::unit_blocks(a.clone(), loss.clone(), Regularizer::L1 { lambda: 0.5 }).unwrap();
            let x: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            let obj = p.evaluate(&x).unwrap();
            let f = dense_f(&a, &loss, &x);
            prop_assert!((obj.f - f).abs() <= 1e-12 * (1.0 + f.abs()));
            let l1: f64 = 0.5 * x.iter().map(|v| v.abs()).sum::<f64>();
            prop_assert!((obj.total - f - l1).abs() <= 1e-12 * (1.0 + obj.total.abs()));
        }
    }
}

#[test]
fn box_outside_domain_is_infinite() {
    let a = SparseMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let p = CompositeProblem::unit_blocks(a, LossKind::square(vec![0.0; 2]), Regularizer::Box { lo: 0.0, hi: 1.0 })
        .unwrap();
    let obj = p.evaluate(&[2.0, 0.5]).unwrap();
    assert!(obj.total.is_infinite() && obj.reg.is_infinite());
    assert!(p.evaluate(&[f64::NAN, 0.0]).is_err());
}
