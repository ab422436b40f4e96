use crate::error::{Error, Result};

use super::{SamplingLaw, SamplingMoments};

/// Largest `n` accepted by [`SamplingLaw::enumerate_pmf`].
pub const MAX_ENUMERATION_N: usize = 20;

/// Exact distribution of a sampling over all `2^n` subsets, indexed by bitmask.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf {
    n: usize,
    probs: Vec<f64>,
}

fn binomial_coefficient(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |c, i| c * (n - i) as f64 / (i + 1) as f64)
}

impl SamplingLaw {
    /// `P(Ŝ = S)` for every subset `S`.
    pub fn enumerate_pmf(&self) -> Result<Pmf> {
        let n = self.n();
        if n > MAX_ENUMERATION_N {
            return Err(Error::EnumerationTooLarge(n));
        }
        self.validate()?;
        let mut probs = vec![0.0; 1 << n];
        self.accumulate(1.0, &mut probs);
        Ok(Pmf { n, probs })
    }

    fn accumulate(&self, weight: f64, probs: &mut [f64]) {
        let n = self.n();
        match self {
            SamplingLaw::NonoverlappingUniform(part) => {
                let each = weight / part.len() as f64;
                for cell in part.cells() {
                    let mask: usize = cell.iter().map(|&i| 1usize << i).sum();
                    probs[mask] += each;
                }
            }
            SamplingLaw::Mixture(components) => {
                for (w, law) in components {
                    law.accumulate(weight * w, probs);
                }
            }
            _ => {
                let q = self.cardinality_distribution().expect("doubly uniform law");
                let per_set: Vec<f64> = (0..=n).map(|k| weight * q[k] / binomial_coefficient(n, k)).collect();
                for (mask, p) in probs.iter_mut().enumerate() {
                    *p += per_set[mask.count_ones() as usize];
                }
            }
        }
    }
}

impl Pmf {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn prob(&self, mask: usize) -> f64 {
        self.probs[mask]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Subsets with nonzero probability as (sorted members, probability).
    pub fn support(&self) -> impl Iterator<Item = (Vec<usize>, f64)> + '_ {
        let n = self.n;
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, &p)| p > 0.0)
            .map(move |(mask, &p)| ((0..n).filter(|i| mask >> i & 1 == 1).collect(), p))
    }

    pub fn total(&self) -> f64 {
        self.probs.iter().sum()
    }

    pub fn element_probability(&self, i: usize) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .filter(|(mask, _)| mask >> i & 1 == 1)
            .map(|(_, p)| p)
            .sum()
    }

    /// `P = (p_ij)` with `p_ii = P(i ∈ Ŝ)`.
    pub fn pair_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.n;
        let mut p = vec![vec![0.0; n]; n];
        for (mask, &pr) in self.probs.iter().enumerate() {
            if pr == 0.0 {
                continue;
            }
            let members: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
            for &i in &members {
                for &j in &members {
                    p[i][j] += pr;
                }
            }
        }
        p
    }

    /// `(E[|J ∩ Ŝ|], E[|J ∩ Ŝ|²])` for the subset `J` given as a bitmask.
    pub fn intersection_moments(&self, j_mask: usize) -> (f64, f64) {
        self.probs.iter().enumerate().fold((0.0, 0.0), |(a, b), (mask, &p)| {
            let c = (mask & j_mask).count_ones() as f64;
            (a + p * c, b + p * c * c)
        })
    }

    pub fn moments(&self) -> SamplingMoments {
        let (e1, e2) = self.intersection_moments((1 << self.n) - 1);
        SamplingMoments { e1, e2, p: e1 / self.n as f64 }
    }

    /// `ν_i = E[min{ω, |Ŝ|} | i ∈ Ŝ]`.
    pub fn nu(&self, omega: usize) -> Vec<f64> {
        let mut num = vec![0.0; self.n];
        let mut den = vec![0.0; self.n];
        for (mask, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let size = (mask.count_ones() as usize).min(omega) as f64;
            for i in 0..self.n {
                if mask >> i & 1 == 1 {
                    num[i] += p * size;
                    den[i] += p;
                }
            }
        }
        num.iter().zip(&den).map(|(a, b)| if *b > 0.0 { a / b } else { 0.0 }).collect()
    }
}
