//! Empirical harnesses behind `sampling-stats` and `bench-speedup`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

use crate::datagen::generate_equal_row_matrix;
use crate::error::{Error, Result};
use crate::problem::{partial_separability_degree, BlockStructure, CompositeProblem, LossKind, Regularizer};
use crate::sampling::{iteration_rng, SamplingLaw};
use crate::solver::{speedup_factor, SolverConfig, Solver};

/// Minimum expected count of a chi-square bin; sparser bins are pooled.
const MIN_EXPECTED_PER_BIN: f64 = 5.0;

#[derive(Debug, Clone, Serialize)]
pub struct PairStat {
    pub i: usize,
    pub j: usize,
    pub exact: f64,
    pub empirical: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SamplingStats {
    pub law: String,
    pub n: usize,
    pub draws: usize,
    pub e1_exact: f64,
    pub e1_empirical: f64,
    pub e2_exact: f64,
    pub e2_empirical: f64,
    pub p_exact: f64,
    pub p_empirical_min: f64,
    pub p_empirical_max: f64,
    /// Bonferroni-corrected p-value of the largest per-block inclusion z-score.
    pub inclusion_p_value: f64,
    /// Exact and empirical `P(|Ŝ| = k)` for `k = 0..=n`.
    pub cardinality_exact: Vec<f64>,
    pub cardinality_empirical: Vec<f64>,
    /// Chi-square p-value of the cardinality histogram.
    pub cardinality_p_value: f64,
    pub pairs: Vec<PairStat>,
}

/// `P(|Ŝ| = k)` for any law (nonoverlapping laws via their cell sizes).
pub fn cardinality_law(law: &SamplingLaw) -> Vec<f64> {
    if let Some(q) = law.cardinality_distribution() {
        return q;
    }
    let mut q = vec![0.0; law.n() + 1];
    match law {
        SamplingLaw::NonoverlappingUniform(part) => {
            let each = 1.0 / part.len() as f64;
            for cell in part.cells() {
                q[cell.len()] += each;
            }
        }
        SamplingLaw::Mixture(components) => {
            for (w, c) in components {
                q.iter_mut().zip(cardinality_law(c)).for_each(|(a, b)| *a += w * b);
            }
        }
        _ => unreachable!("doubly uniform laws have a cardinality distribution"),
    }
    q
}

/// Pearson statistic with sparse bins pooled; returns the p-value.
pub fn chi_square_p_value(observed: &[f64], expected: &[f64]) -> f64 {
    let mut stat = 0.0;
    let mut bins = 0usize;
    let (mut pool_o, mut pool_e) = (0.0, 0.0);
    for (&o, &e) in observed.iter().zip(expected) {
        if e >= MIN_EXPECTED_PER_BIN {
            stat += (o - e) * (o - e) / e;
            bins += 1;
        } else {
            pool_o += o;
            pool_e += e;
        }
    }
    if pool_e > 0.0 {
        if pool_e >= MIN_EXPECTED_PER_BIN || bins == 0 {
            stat += (pool_o - pool_e) * (pool_o - pool_e) / pool_e;
            bins += 1;
        } else if pool_o > 0.0 {
            // Pooled bin too small to test; count any mass as one bin anyway.
            stat += (pool_o - pool_e) * (pool_o - pool_e) / pool_e.max(MIN_EXPECTED_PER_BIN);
            bins += 1;
        }
    }
    if bins < 2 {
        return 1.0;
    }
    let dist = ChiSquared::new((bins - 1) as f64).expect("positive degrees of freedom");
    1.0 - dist.cdf(stat)
}

/// Draws `draws` sets and compares empirical statistics with exact values.
/// `pair_count` random pairs `(i, j)` are reported.
pub fn sampling_stats(law: &SamplingLaw, draws: usize, pair_count: usize, seed: u64) -> Result<SamplingStats> {
    law.validate()?;
    if draws < 2 {
        return Err(Error::Config("need at least two draws".into()));
    }
    let n = law.n();
    let moments = law.moments();
    let mut pick = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let pairs: Vec<(usize, usize)> = if n > 1 {
        (0..pair_count)
            .map(|_| {
                let i = pick.random_range(0..n);
                let mut j = pick.random_range(0..n - 1);
                if j >= i {
                    j += 1;
                }
                (i, j)
            })
            .collect()
    } else {
        Vec::new()
    };
    let mut pair_hits = vec![0usize; pairs.len()];
    let mut inclusion = vec![0usize; n];
    let mut card = vec![0usize; n + 1];
    let mut member = vec![false; n];
    let mut set = Vec::new();
    let mut rng = iteration_rng(seed, 0);
    for _ in 0..draws {
        law.draw_into(&mut rng, &mut set);
        card[set.len()] += 1;
        for &i in &set {
            inclusion[i] += 1;
            member[i] = true;
        }
        for (hits, &(i, j)) in pair_hits.iter_mut().zip(&pairs) {
            if member[i] && member[j] {
                *hits += 1;
            }
        }
        for &i in &set {
            member[i] = false;
        }
    }
    let d = draws as f64;
    let card_emp: Vec<f64> = card.iter().map(|&c| c as f64 / d).collect();
    let e1: f64 = card_emp.iter().enumerate().map(|(k, q)| q * k as f64).sum();
    let e2: f64 = card_emp.iter().enumerate().map(|(k, q)| q * (k * k) as f64).sum();
    let p_emp: Vec<f64> = inclusion.iter().map(|&c| c as f64 / d).collect();

    let p = moments.p;
    let inclusion_p_value = if p < 1.0 {
        let sd = (p * (1.0 - p) / d).sqrt();
        let z = p_emp.iter().map(|q| (q - p).abs() / sd).fold(0.0, f64::max);
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        (2.0 * n as f64 * (1.0 - normal.cdf(z))).min(1.0)
    } else {
        1.0
    };

    let card_exact = cardinality_law(law);
    let observed: Vec<f64> = card.iter().map(|&c| c as f64).collect();
    let expected: Vec<f64> = card_exact.iter().map(|q| q * d).collect();
    let cardinality_p_value = chi_square_p_value(&observed, &expected);

    let pair_stats = if pairs.is_empty() {
        Vec::new()
    } else {
        let exact = law.pair_probability()?;
        pairs
            .iter()
            .zip(&pair_hits)
            .map(|(&(i, j), &h)| PairStat {
                i,
                j,
                exact: exact.get(i, j),
                empirical: h as f64 / d,
            })
            .collect()
    };

    Ok(SamplingStats {
        law: law.to_string(),
        n,
        draws,
        e1_exact: moments.e1,
        e1_empirical: e1,
        e2_exact: moments.e2,
        e2_empirical: e2,
        p_exact: p,
        p_empirical_min: p_emp.iter().copied().fold(f64::INFINITY, f64::min),
        p_empirical_max: p_emp.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        inclusion_p_value,
        cardinality_exact: card_exact,
        cardinality_empirical: card_emp,
        cardinality_p_value,
        pairs: pair_stats,
    })
}

/// Settings for [`bench_speedup`].
#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub m: usize,
    pub n: usize,
    pub omegas: Vec<usize>,
    pub taus: Vec<usize>,
    /// Target `F(x_k) ≤ eps · F(x_0)`; the optimum value is zero.
    pub eps: f64,
    pub seed: u64,
    /// Per-run cap on block updates divided by `n`.
    pub max_epochs: f64,
    /// Solver runs (with consecutive seeds) averaged per iteration count.
    pub runs: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            m: 3000,
            n: 1000,
            omegas: vec![5, 10, 50, 100],
            taus: vec![1, 2, 4, 8, 16, 32, 64],
            eps: 1e-6,
            seed: 0,
            max_epochs: 10_000.0,
            runs: 1,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub omega: usize,
    pub tau: usize,
    pub theoretical: f64,
    pub empirical: Option<f64>,
    /// Mean iterations to reach the target, over `runs` solver seeds.
    pub iters_serial: Option<f64>,
    pub iters_parallel: Option<f64>,
    pub failed: bool,
}

/// Consistent least-squares problem `½‖Ax − b‖²` with `b = A x̂`, so the
/// optimal value is zero.
pub fn equal_row_least_squares(m: usize, n: usize, omega: usize, seed: u64) -> Result<CompositeProblem> {
    let a = generate_equal_row_matrix(m, n, omega, seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let x_hat: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let b = a.mul_vec(&x_hat);
    let problem = CompositeProblem::unit_blocks(a, LossKind::square(b), Regularizer::Zero)?;
    let f_star = problem.evaluate(&x_hat)?.total;
    problem.with_known_optimum(x_hat, f_star)
}

fn iterations_to_target(problem: &CompositeProblem, law: SamplingLaw, cfg: &BenchConfig) -> Result<Option<f64>> {
    let f0 = problem.evaluate(&vec![0.0; problem.dim()])?.total;
    let runs = cfg.runs.max(1);
    let mut total = 0.0;
    for r in 0..runs {
        let config = SolverConfig::new(law.clone())
            .with_f_star(0.0)
            .with_target_gap(cfg.eps * f0)
            .with_max_iters(u64::MAX)
            .with_max_epochs(cfg.max_epochs)
            .with_seed(cfg.seed.wrapping_add(r as u64))
            .with_trace_every(u64::MAX);
        let trace = Solver::new(problem, config)?.run()?;
        if !trace.converged {
            return Ok(None);
        }
        total += trace.iterations as f64;
    }
    Ok(Some(total / runs as f64))
}

/// Serial versus `τ`-nice iteration counts on equal-row least-squares
/// problems, next to the theoretical speedup `τ/β`.
pub fn bench_speedup(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    let mut rows = Vec::new();
    for &omega in &cfg.omegas {
        let problem = equal_row_least_squares(cfg.m, cfg.n, omega, cfg.seed)?;
        let degree = partial_separability_degree(problem.matrix(), &BlockStructure::unit(cfg.n))?;
        let serial = iterations_to_target(&problem, SamplingLaw::serial(cfg.n)?, cfg)?;
        for &tau in &cfg.taus {
            let law = SamplingLaw::nice(cfg.n, tau)?;
            let theoretical = speedup_factor(&law, degree, None)?;
            let parallel = iterations_to_target(&problem, law, cfg)?;
            let empirical = match (serial, parallel) {
                (Some(s), Some(p)) if p > 0.0 => Some(s / p),
                _ => None,
            };
            rows.push(BenchRow {
                omega: degree,
                tau,
                theoretical,
                empirical,
                iters_serial: serial,
                iters_parallel: parallel,
                failed: empirical.is_none(),
            });
        }
    }
    Ok(rows)
}
