use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::error::{Error, Result};

/// Largest `n` accepted by [`independent_q_exact`].
pub const EXACT_Q_MAX_N: usize = 64;

/// Cardinality distribution of the union of `τ` independent uniform picks
/// from `0..n`, as a vector of length `n + 1`.
///
/// Uses the occupancy recursion
/// `P_t(k) = P_{t−1}(k)·k/n + P_{t−1}(k−1)·(n−k+1)/n`, which only adds
/// nonnegative terms and therefore stays accurate for large `n`.
pub fn independent_q(n: usize, tau: usize) -> Result<Vec<f64>> {
    if n == 0 || tau == 0 || tau > n {
        return Err(Error::Sampling(format!("independent sampling needs 1 <= tau <= n, got tau = {tau}, n = {n}")));
    }
    let nf = n as f64;
    let mut cur = vec![0.0; tau + 1];
    cur[0] = 1.0;
    for t in 1..=tau {
        for k in (1..=t).rev() {
            cur[k] = cur[k] * (k as f64 / nf) + cur[k - 1] * ((n - k + 1) as f64 / nf);
        }
        cur[0] = 0.0;
    }
    let mut q = vec![0.0; n + 1];
    q[..=tau].copy_from_slice(&cur);
    Ok(q)
}

/// Exact rational version of [`independent_q`] for `n ≤ 64`.
///
/// Follows the inclusion–exclusion recurrence `c_1 = n^{−τ}`,
/// `c_k = (k/n)^τ − Σ_{i<k} C(k,i) c_i`, `q_k = C(n,k) c_k`, where `c_k` is
/// the probability that the picks cover exactly one fixed `k`-set.
pub fn independent_q_exact(n: usize, tau: usize) -> Result<Vec<BigRational>> {
    if n == 0 || tau == 0 || tau > n {
        return Err(Error::Sampling(format!("independent sampling needs 1 <= tau <= n, got tau = {tau}, n = {n}")));
    }
    if n > EXACT_Q_MAX_N {
        return Err(Error::Sampling(format!("exact q limited to n <= {EXACT_Q_MAX_N}")));
    }
    let binom = |a: usize, b: usize| -> BigInt {
        let mut c = BigInt::one();
        for i in 0..b {
            c = c * BigInt::from(a - i) / BigInt::from(i + 1);
        }
        c
    };
    let nbig = BigInt::from(n);
    let mut c: Vec<BigRational> = vec![BigRational::zero(); tau + 1];
    let mut q = vec![BigRational::zero(); n + 1];
    for k in 1..=tau {
        let mut v = BigRational::new(BigInt::from(k).pow(tau as u32), nbig.pow(tau as u32));
        for i in 1..k {
            v -= BigRational::from_integer(binom(k, i)) * &c[i];
        }
        q[k] = BigRational::from_integer(binom(n, k)) * &v;
        c[k] = v;
    }
    Ok(q)
}
