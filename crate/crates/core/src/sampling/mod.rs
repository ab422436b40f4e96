//! Random block samplings.
//!
//! Every law here is uniform: each block is selected with the same
//! probability `E[|Ŝ|]/n`. Doubly uniform laws (serial, fully parallel,
//! nice, independent, binomial, explicit `q`) are characterised by their
//! cardinality distribution `q`; nonoverlapping uniform laws pick one cell of
//! a fixed partition.

mod draw;
mod enumerate;
mod independent;

use std::fmt;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

pub use draw::iteration_rng;
pub use enumerate::Pmf;
pub use independent::{independent_q, independent_q_exact};

/// Tolerance for probability vectors summing to one.
const PROBABILITY_SUM_TOL: f64 = 1e-9;

/// Partition of `0..n` into nonempty disjoint cells.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    cells: Vec<Vec<usize>>,
    cell_of: Vec<usize>,
}

impl Partition {
    pub fn new(n: usize, cells: Vec<Vec<usize>>) -> Result<Self> {
        let mut cell_of = vec![usize::MAX; n];
        let mut cells = cells;
        for (j, cell) in cells.iter_mut().enumerate() {
            if cell.is_empty() {
                return Err(Error::Sampling(format!("partition cell {j} is empty")));
            }
            cell.sort_unstable();
            for &i in cell.iter() {
                if i >= n {
                    return Err(Error::Sampling(format!("block {i} out of range for n = {n}")));
                }
                if cell_of[i] != usize::MAX {
                    return Err(Error::Sampling(format!("block {i} appears in two cells")));
                }
                cell_of[i] = j;
            }
        }
        if let Some(i) = cell_of.iter().position(|&c| c == usize::MAX) {
            return Err(Error::Sampling(format!("block {i} is not covered by the partition")));
        }
        Ok(Self { cells, cell_of })
    }

    pub fn singletons(n: usize) -> Self {
        Self {
            cells: (0..n).map(|i| vec![i]).collect(),
            cell_of: (0..n).collect(),
        }
    }

    pub fn whole(n: usize) -> Self {
        Self {
            cells: vec![(0..n).collect()],
            cell_of: vec![0; n],
        }
    }

    /// Parses one cell per nonempty line, indices separated by whitespace.
    pub fn parse(text: &str, n: usize) -> Result<Self> {
        let mut cells = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cell = line
                .split_whitespace()
                .map(|t| {
                    t.parse::<usize>().map_err(|e| Error::Parse {
                        line: lineno + 1,
                        msg: format!("bad block index {t:?}: {e}"),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            cells.push(cell);
        }
        Self::new(n, cells)
    }

    pub fn n(&self) -> usize {
        self.cell_of.len()
    }

    /// Number of cells `l`.
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn cell_of(&self, i: usize) -> usize {
        self.cell_of[i]
    }
}

/// Exact first two moments of `|Ŝ|` and the common element probability.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplingMoments {
    /// `E[|Ŝ|]`
    pub e1: f64,
    /// `E[|Ŝ|²]`
    pub e2: f64,
    /// `P(i ∈ Ŝ) = E[|Ŝ|]/n`
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum SamplingLaw {
    /// One block, uniformly at random.
    Serial { n: usize },
    /// All blocks.
    FullyParallel { n: usize },
    /// Uniform over all subsets of size `tau`.
    Nice { n: usize, tau: usize },
    /// Union of `tau` independent uniform picks.
    Independent { n: usize, tau: usize },
    /// `K ~ Binomial(tau, p)` then a `K`-nice subset.
    Binomial { n: usize, tau: usize, p: f64 },
    /// One cell of the partition, uniformly at random.
    NonoverlappingUniform(Partition),
    /// Cardinality `k ~ q` (indexed `0..=n`), then a `k`-nice subset.
    DoublyUniform { q: Vec<f64> },
    /// Pick a component with the given probability, then draw from it.
    Mixture(Vec<(f64, SamplingLaw)>),
}

impl SamplingLaw {
    pub fn serial(n: usize) -> Result<Self> {
        let law = SamplingLaw::Serial { n };
        law.validate()?;
        Ok(law)
    }

    pub fn fully_parallel(n: usize) -> Result<Self> {
        let law = SamplingLaw::FullyParallel { n };
        law.validate()?;
        Ok(law)
    }

    pub fn nice(n: usize, tau: usize) -> Result<Self> {
        let law = SamplingLaw::Nice { n, tau };
        law.validate()?;
        Ok(law)
    }

    pub fn independent(n: usize, tau: usize) -> Result<Self> {
        let law = SamplingLaw::Independent { n, tau };
        law.validate()?;
        Ok(law)
    }

    pub fn binomial(n: usize, tau: usize, p: f64) -> Result<Self> {
        let law = SamplingLaw::Binomial { n, tau, p };
        law.validate()?;
        Ok(law)
    }

    pub fn nonoverlapping(partition: Partition) -> Result<Self> {
        let law = SamplingLaw::NonoverlappingUniform(partition);
        law.validate()?;
        Ok(law)
    }

    pub fn doubly_uniform(q: Vec<f64>) -> Result<Self> {
        let law = SamplingLaw::DoublyUniform { q };
        law.validate()?;
        Ok(law)
    }

    /// Convex combination of laws over the same `n`.
    ///
    /// Zero-weight components are dropped. When every component is doubly
    /// uniform the result is normalised to `DoublyUniform(Σ_j w_j q_j)`.
    pub fn mixture(components: Vec<(f64, SamplingLaw)>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::Sampling("empty mixture".into()));
        }
        let n = components[0].1.n();
        let mut total = 0.0;
        for (w, law) in &components {
            if !(w.is_finite() && *w >= 0.0) {
                return Err(Error::Sampling(format!("mixture weight {w} is not a probability")));
            }
            if law.n() != n {
                return Err(Error::Sampling("mixture components disagree on n".into()));
            }
            law.validate()?;
            total += w;
        }
        if (total - 1.0).abs() > PROBABILITY_SUM_TOL {
            return Err(Error::Sampling(format!("mixture weights sum to {total}")));
        }
        let kept: Vec<(f64, SamplingLaw)> = components.into_iter().filter(|(w, _)| *w > 0.0).collect();
        if kept.iter().all(|(_, law)| law.cardinality_distribution().is_some()) {
            let mut q = vec![0.0; n + 1];
            for (w, law) in &kept {
                let qj = law.cardinality_distribution().unwrap();
                q.iter_mut().zip(&qj).for_each(|(a, b)| *a += w * b);
            }
            return SamplingLaw::doubly_uniform(q);
        }
        if kept.len() == 1 {
            return Ok(kept.into_iter().next().unwrap().1);
        }
        let law = SamplingLaw::Mixture(kept);
        law.validate()?;
        Ok(law)
    }

    /// Parses `serial`, `full`, `nice:τ`, `indep:τ`, `binom:τ:p`,
    /// `nu:<partition-file>`, `du:<q-file>`.
    pub fn parse(spec: &str, n: usize) -> Result<Self> {
        let mut parts = spec.splitn(2, ':');
        let kind = parts.next().unwrap_or_default().trim();
        let rest = parts.next().map(str::trim);
        let tau = |s: Option<&str>| -> Result<usize> {
            s.ok_or_else(|| Error::Sampling(format!("{kind} needs a parameter")))?
                .parse::<usize>()
                .map_err(|e| Error::Sampling(format!("bad tau in {spec:?}: {e}")))
        };
        match kind {
            "serial" => SamplingLaw::serial(n),
            "full" => SamplingLaw::fully_parallel(n),
            "nice" => SamplingLaw::nice(n, tau(rest)?),
            "indep" => SamplingLaw::independent(n, tau(rest)?),
            "binom" => {
                let rest = rest.ok_or_else(|| Error::Sampling("binom needs tau:p".into()))?;
                let (t, p) = rest
                    .split_once(':')
                    .ok_or_else(|| Error::Sampling(format!("binom needs tau:p, got {rest:?}")))?;
                let p = p
                    .parse::<f64>()
                    .map_err(|e| Error::Sampling(format!("bad p in {spec:?}: {e}")))?;
                SamplingLaw::binomial(n, tau(Some(t))?, p)
            }
            "nu" => {
                let path = rest.ok_or_else(|| Error::Sampling("nu needs a partition file".into()))?;
                let text = std::fs::read_to_string(Path::new(path))?;
                SamplingLaw::nonoverlapping(Partition::parse(&text, n)?)
            }
            "du" => {
                let path = rest.ok_or_else(|| Error::Sampling("du needs a q file".into()))?;
                let text = std::fs::read_to_string(Path::new(path))?;
                SamplingLaw::doubly_uniform(parse_q(&text, n)?)
            }
            other => Err(Error::Sampling(format!("unknown sampling {other:?}"))),
        }
    }

    /// Number of blocks the law samples from.
    pub fn n(&self) -> usize {
        match self {
            SamplingLaw::Serial { n }
            | SamplingLaw::FullyParallel { n }
            | SamplingLaw::Nice { n, .. }
            | SamplingLaw::Independent { n, .. }
            | SamplingLaw::Binomial { n, .. } => *n,
            SamplingLaw::NonoverlappingUniform(p) => p.n(),
            SamplingLaw::DoublyUniform { q } => q.len().saturating_sub(1),
            SamplingLaw::Mixture(c) => c.first().map_or(0, |(_, l)| l.n()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n();
        if n == 0 {
            return Err(Error::Sampling("no blocks to sample".into()));
        }
        let check_tau = |tau: usize| {
            if (1..=n).contains(&tau) {
                Ok(())
            } else {
                Err(Error::Sampling(format!("tau = {tau} outside 1..={n}")))
            }
        };
        match self {
            SamplingLaw::Serial { .. } | SamplingLaw::FullyParallel { .. } => Ok(()),
            SamplingLaw::Nice { tau, .. } | SamplingLaw::Independent { tau, .. } => check_tau(*tau),
            SamplingLaw::Binomial { tau, p, .. } => {
                check_tau(*tau)?;
                if *p > 0.0 && *p <= 1.0 {
                    Ok(())
                } else {
                    Err(Error::Sampling(format!("binomial p = {p} outside (0, 1]")))
                }
            }
            SamplingLaw::NonoverlappingUniform(_) => Ok(()),
            SamplingLaw::DoublyUniform { q } => {
                if q.iter().any(|v| !v.is_finite() || *v < 0.0) {
                    return Err(Error::Sampling("q has a negative or non-finite entry".into()));
                }
                let total: f64 = q.iter().sum();
                if (total - 1.0).abs() > PROBABILITY_SUM_TOL {
                    return Err(Error::Sampling(format!("q sums to {total}")));
                }
                if q[0] >= 1.0 - PROBABILITY_SUM_TOL {
                    return Err(Error::NilSampling);
                }
                Ok(())
            }
            SamplingLaw::Mixture(components) => {
                if components.is_empty() {
                    return Err(Error::Sampling("empty mixture".into()));
                }
                let mut total = 0.0;
                for (w, law) in components {
                    if law.n() != n {
                        return Err(Error::Sampling("mixture components disagree on n".into()));
                    }
                    law.validate()?;
                    total += w;
                }
                if (total - 1.0).abs() > PROBABILITY_SUM_TOL {
                    return Err(Error::Sampling(format!("mixture weights sum to {total}")));
                }
                Ok(())
            }
        }
    }

    /// Cardinality distribution `q_k = P(|Ŝ| = k)`, `k = 0..=n`, for doubly
    /// uniform laws; `None` for laws that are not doubly uniform.
    pub fn cardinality_distribution(&self) -> Option<Vec<f64>> {
        let n = self.n();
        let point = |k: usize| {
            let mut q = vec![0.0; n + 1];
            q[k] = 1.0;
            q
        };
        match self {
            SamplingLaw::Serial { .. } => Some(point(1)),
            SamplingLaw::FullyParallel { .. } => Some(point(n)),
            SamplingLaw::Nice { tau, .. } => Some(point(*tau)),
            SamplingLaw::Independent { tau, .. } => independent_q(n, *tau).ok(),
            SamplingLaw::Binomial { tau, p, .. } => Some(binomial_q(n, *tau, *p)),
            SamplingLaw::DoublyUniform { q } => Some(q.clone()),
            SamplingLaw::NonoverlappingUniform(part) => {
                // Only the two trivial partitions are also doubly uniform.
                if part.len() == n {
                    Some(point(1))
                } else if part.len() == 1 {
                    Some(point(n))
                } else {
                    None
                }
            }
            SamplingLaw::Mixture(components) => {
                let mut q = vec![0.0; n + 1];
                for (w, law) in components {
                    let qj = law.cardinality_distribution()?;
                    q.iter_mut().zip(&qj).for_each(|(a, b)| *a += w * b);
                }
                Some(q)
            }
        }
    }

    /// `Some(τ)` when `|Ŝ| = τ` almost surely.
    pub fn fixed_cardinality(&self) -> Option<usize> {
        match self {
            SamplingLaw::Serial { .. } => Some(1),
            SamplingLaw::FullyParallel { n } => Some(*n),
            SamplingLaw::Nice { tau, .. } => Some(*tau),
            SamplingLaw::Binomial { tau, p, .. } if *p == 1.0 => Some(*tau),
            SamplingLaw::Independent { tau: 1, .. } => Some(1),
            SamplingLaw::NonoverlappingUniform(part) => {
                let size = part.cells()[0].len();
                part.cells().iter().all(|c| c.len() == size).then_some(size)
            }
            SamplingLaw::DoublyUniform { q } => q.iter().position(|&v| v == 1.0),
            SamplingLaw::Mixture(components) => {
                let first = components[0].1.fixed_cardinality()?;
                components
                    .iter()
                    .all(|(_, l)| l.fixed_cardinality() == Some(first))
                    .then_some(first)
            }
            _ => None,
        }
    }

    pub fn moments(&self) -> SamplingMoments {
        let n = self.n() as f64;
        let (e1, e2) = match self {
            SamplingLaw::Serial { .. } => (1.0, 1.0),
            SamplingLaw::FullyParallel { .. } => (n, n * n),
            SamplingLaw::Nice { tau, .. } => {
                let t = *tau as f64;
                (t, t * t)
            }
            SamplingLaw::Independent { tau, .. } => {
                // P(i ∈ Ŝ) = 1 − (1 − 1/n)^τ and
                // P(i, j ∈ Ŝ) = 1 − 2(1 − 1/n)^τ + (1 − 2/n)^τ.
                let t = *tau as i32;
                let miss1 = (1.0 - 1.0 / n).powi(t);
                let e1 = n * (1.0 - miss1);
                let pair = if n > 1.0 {
                    1.0 - 2.0 * miss1 + (1.0 - 2.0 / n).powi(t)
                } else {
                    0.0
                };
                (e1, e1 + n * (n - 1.0) * pair)
            }
            SamplingLaw::Binomial { tau, p, .. } => {
                let t = *tau as f64;
                (t * p, t * p * (1.0 + t * p - p))
            }
            SamplingLaw::NonoverlappingUniform(part) => {
                let l = part.len() as f64;
                let e2 = part.cells().iter().map(|c| (c.len() * c.len()) as f64).sum::<f64>() / l;
                (n / l, e2)
            }
            SamplingLaw::DoublyUniform { q } => q.iter().enumerate().fold((0.0, 0.0), |(a, b), (k, &qk)| {
                let k = k as f64;
                (a + qk * k, b + qk * k * k)
            }),
            SamplingLaw::Mixture(components) => components.iter().fold((0.0, 0.0), |(a, b), (w, law)| {
                let m = law.moments();
                (a + w * m.e1, b + w * m.e2)
            }),
        };
        SamplingMoments { e1, e2, p: e1 / n }
    }

    /// Probability that two distinct blocks are both selected.
    pub fn pair_probability(&self) -> Result<PairProbability> {
        let n = self.n();
        if n < 2 {
            return Err(Error::SingleBlock);
        }
        Ok(match self {
            SamplingLaw::NonoverlappingUniform(part) => PairProbability::SameCell {
                partition: part.clone(),
                p_same: 1.0 / part.len() as f64,
            },
            SamplingLaw::Mixture(components) if self.cardinality_distribution().is_none() => {
                PairProbability::Mixture(
                    components
                        .iter()
                        .map(|(w, law)| Ok((*w, law.pair_probability()?)))
                        .collect::<Result<Vec<_>>>()?,
                )
            }
            _ => {
                let m = self.moments();
                let nf = n as f64;
                PairProbability::Constant(((m.e2 - m.e1) / (nf * (nf - 1.0))).max(0.0))
            }
        })
    }

    /// Short description in the command-line syntax.
    pub fn label(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for SamplingLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SamplingLaw::Serial { .. } => write!(f, "serial"),
            SamplingLaw::FullyParallel { .. } => write!(f, "full"),
            SamplingLaw::Nice { tau, .. } => write!(f, "nice:{tau}"),
            SamplingLaw::Independent { tau, .. } => write!(f, "indep:{tau}"),
            SamplingLaw::Binomial { tau, p, .. } => write!(f, "binom:{tau}:{p}"),
            SamplingLaw::NonoverlappingUniform(p) => write!(f, "nu[{} cells]", p.len()),
            SamplingLaw::DoublyUniform { .. } => write!(f, "du"),
            SamplingLaw::Mixture(c) => write!(f, "mixture[{}]", c.len()),
        }
    }
}

/// `p_ij` for `i ≠ j`.
#[derive(Debug, Clone, PartialEq)]
pub enum PairProbability {
    /// Doubly uniform laws: `E[|Ŝ|² − |Ŝ|] / (n(n−1))` for every pair.
    Constant(f64),
    /// Nonoverlapping uniform laws: `1/l` inside a cell, zero across cells.
    SameCell { partition: Partition, p_same: f64 },
    Mixture(Vec<(f64, PairProbability)>),
}

impl PairProbability {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert_ne!(i, j);
        match self {
            PairProbability::Constant(p) => *p,
            PairProbability::SameCell { partition, p_same } => {
                if partition.cell_of(i) == partition.cell_of(j) {
                    *p_same
                } else {
                    0.0
                }
            }
            PairProbability::Mixture(c) => c.iter().map(|(w, p)| w * p.get(i, j)).sum(),
        }
    }
}

/// `q_k = C(τ,k) p^k (1−p)^{τ−k}` padded to length `n + 1`.
pub fn binomial_q(n: usize, tau: usize, p: f64) -> Vec<f64> {
    let mut q = vec![0.0; n + 1];
    let mut coef = 1.0f64;
    for k in 0..=tau {
        if k > 0 {
            coef *= (tau - k + 1) as f64 / k as f64;
        }
        q[k] = coef * p.powi(k as i32) * (1.0 - p).powi((tau - k) as i32);
    }
    q
}

/// Whitespace-separated `q_0, q_1, …`; missing trailing entries are zero.
pub fn parse_q(text: &str, n: usize) -> Result<Vec<f64>> {
    let mut q = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        for tok in line.split_whitespace() {
            q.push(tok.parse::<f64>().map_err(|e| Error::Parse {
                line: lineno + 1,
                msg: format!("bad probability {tok:?}: {e}"),
            })?);
        }
    }
    if q.len() > n + 1 {
        return Err(Error::Sampling(format!("q has {} entries, at most {} allowed", q.len(), n + 1)));
    }
    q.resize(n + 1, 0.0);
    Ok(q)
}
