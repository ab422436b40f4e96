use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use super::SamplingLaw;

/// Generator for iteration `k` of a run seeded with `seed`.
///
/// Each iteration gets its own ChaCha stream, so draws do not depend on how
/// much randomness earlier iterations consumed.
pub fn iteration_rng(seed: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(k);
    rng
}

/// Uniform `k`-subset of `0..n`, sorted.
pub(crate) fn nice_subset<R: Rng + ?Sized>(rng: &mut R, n: usize, k: usize, out: &mut Vec<usize>) {
    out.clear();
    if k == 0 {
        return;
    }
    if k == n {
        out.extend(0..n);
        return;
    }
    if 2 * k <= n {
        out.extend(index::sample(rng, n, k));
        out.sort_unstable();
    } else {
        let mut skip = vec![false; n];
        for i in index::sample(rng, n, n - k) {
            skip[i] = true;
        }
        out.extend((0..n).filter(|&i| !skip[i]));
    }
}

fn pick_index<R: Rng + ?Sized>(rng: &mut R, weights: impl Iterator<Item = f64> + Clone) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (k, w) in weights.enumerate() {
        if w > 0.0 {
            last = k;
        }
        acc += w;
        if u < acc {
            return k;
        }
    }
    last
}

impl SamplingLaw {
    /// Draws a sorted set of distinct blocks.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let mut out = Vec::new();
        self.draw_into(rng, &mut out);
        out
    }

    pub fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<usize>) {
        match self {
            SamplingLaw::Serial { n } => {
                out.clear();
                out.push(rng.random_range(0..*n));
            }
            SamplingLaw::FullyParallel { n } => {
                out.clear();
                out.extend(0..*n);
            }
            SamplingLaw::Nice { n, tau } => nice_subset(rng, *n, *tau, out),
            SamplingLaw::Independent { n, tau } => {
                out.clear();
                out.extend((0..*tau).map(|_| rng.random_range(0..*n)));
                out.sort_unstable();
                out.dedup();
            }
            SamplingLaw::Binomial { n, tau, p } => {
                let k = if *p >= 1.0 {
                    *tau
                } else {
                    Binomial::new(*tau as u64, *p).expect("validated binomial").sample(rng) as usize
                };
                nice_subset(rng, *n, k, out)
            }
            SamplingLaw::NonoverlappingUniform(part) => {
                out.clear();
                let j = rng.random_range(0..part.len());
                out.extend_from_slice(&part.cells()[j]);
            }
            SamplingLaw::DoublyUniform { q } => {
                let k = pick_index(rng, q.iter().copied());
                nice_subset(rng, q.len() - 1, k, out)
            }
            SamplingLaw::Mixture(components) => {
                let j = pick_index(rng, components.iter().map(|(w, _)| *w));
                components[j].1.draw_into(rng, out)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::Partition;

    fn check_set(s: &[usize], n: usize) {
        assert!(s.windows(2).all(|w| w[0] < w[1]), "not sorted/distinct: {s:?}");
        assert!(s.iter().all(|&i| i < n));
    }

    #[test]
    fn draws_are_valid_sets() {
        let n = 17;
        let part = Partition::new(n, vec![(0..5).collect(), (5..6).collect(), (6..17).collect()]).unwrap();
        let laws = [
            SamplingLaw::serial(n).unwrap(),
            SamplingLaw::fully_parallel(n).unwrap(),
            SamplingLaw::nice(n, 3).unwrap(),
            SamplingLaw::nice(n, 15).unwrap(),
            SamplingLaw::independent(n, 9).unwrap(),
            SamplingLaw::binomial(n, 10, 0.4).unwrap(),
            SamplingLaw::nonoverlapping(part).unwrap(),
        ];
        let mut rng = iteration_rng(3, 0);
        for law in &laws {
            for _ in 0..200 {
                let s = law.draw(&mut rng);
                check_set(&s, n);
                if let Some(k) = law.fixed_cardinality() {
                    assert_eq!(s.len(), k, "{law}");
                }
            }
        }
    }

    #[test]
    fn iteration_streams_are_reproducible_and_distinct() {
        let law = SamplingLaw::nice(1000, 10).unwrap();
        let a = law.draw(&mut iteration_rng(7, 5));
        let b = law.draw(&mut iteration_rng(7, 5));
        let c = law.draw(&mut iteration_rng(7, 6));
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn empirical_inclusion_matches_p() {
        let n = 8;
        let law = SamplingLaw::independent(n, 5).unwrap();
        let p = law.moments().p;
        let draws = 40_000;
        let mut counts = vec![0usize; n];
        let mut rng = iteration_rng(11, 0);
        for _ in 0..draws {
            for i in law.draw(&mut rng) {
                counts[i] += 1;
            }
        }
        let sd = (p * (1.0 - p) / draws as f64).sqrt();
        for c in counts {
            assert!((c as f64 / draws as f64 - p).abs() < 5.0 * sd);
        }
    }
}
