//! Synthetic instances: LASSO with a planted optimum, DSO-tight 0-1
//! matrices, and matrices with equal nonzeros per row.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::problem::CompositeProblem;
use crate::sparse::SparseMatrix;

/// LASSO instance `½‖Ax − b‖² + λ‖x‖₁` with known minimiser.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedInstance {
    pub matrix: SparseMatrix,
    pub b: Vec<f64>,
    pub lambda: f64,
    pub x_star: Vec<f64>,
    pub f_star: f64,
}

/// Tolerance of the optimality certificate checked by the generator.
pub const KKT_TOL: f64 = 1e-10;

/// Column resampling attempts before giving up on a support column.
const MAX_COLUMN_RETRIES: usize = 1000;

/// Off-support correlations are kept below this fraction of `λ`.
const OFF_SUPPORT_CAP: f64 = 0.9;

impl GeneratedInstance {
    pub fn problem(&self) -> Result<CompositeProblem> {
        CompositeProblem::lasso(self.matrix.clone(), self.b.clone(), self.lambda)?
            .with_known_optimum(self.x_star.clone(), self.f_star)
    }

    /// Largest violation of the LASSO optimality conditions at `x_star`,
    /// relative to `λ`.
    pub fn kkt_violation(&self) -> f64 {
        kkt_violation(&self.matrix, &self.b, self.lambda, &self.x_star)
    }
}

/// `max_i` violation of `Aᵀ(Ax − b) ∈ −λ∂‖x‖₁`, divided by `λ`.
pub fn kkt_violation(matrix: &SparseMatrix, b: &[f64], lambda: f64, x: &[f64]) -> f64 {
    let mut r = matrix.mul_vec(x);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri -= bi);
    let g = matrix.tmul_vec(&r);
    g.iter()
        .zip(x)
        .map(|(&gi, &xi)| {
            if xi != 0.0 {
                (gi + lambda * xi.signum()).abs()
            } else {
                (gi.abs() - lambda).max(0.0)
            }
        })
        .fold(0.0, f64::max)
        / lambda
}

fn random_column(rng: &mut ChaCha8Rng, m: usize, nnz: usize) -> (Vec<usize>, Vec<f64>) {
    let mut rows = index::sample(rng, m, nnz).into_vec();
    rows.sort_unstable();
    let mut vals: Vec<f64> = (0..nnz).map(|_| rng.random_range(-1.0..=1.0)).collect();
    // A zero entry would silently reduce the column's support.
    for v in &mut vals {
        while *v == 0.0 {
            *v = rng.random_range(-1.0..=1.0);
        }
    }
    (rows, vals)
}

/// LASSO instance whose optimum has `support_size` nonzeros.
///
/// A residual `r` is drawn first. Each column gets `nnz_per_col` entries at
/// random rows, uniform in `[−1, 1]`, and is then rescaled so that
/// `a_iᵀr = −λ sign(x*_i)` on the support and `|a_iᵀr| ≤ 0.9λ` elsewhere.
/// With `b = Ax* − r` these are exactly the optimality conditions.
pub fn generate_lasso(
    n: usize,
    m: usize,
    nnz_per_col: usize,
    support_size: usize,
    lambda: f64,
    seed: u64,
) -> Result<GeneratedInstance> {
    if n == 0 || m == 0 {
        return Err(Error::Generator("need n, m >= 1".into()));
    }
    if nnz_per_col == 0 || nnz_per_col > m {
        return Err(Error::Generator(format!("nnz_per_col = {nnz_per_col} outside 1..={m}")));
    }
    if support_size > n {
        return Err(Error::Generator(format!("support {support_size} exceeds n = {n}")));
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Generator(format!("lambda = {lambda} must be positive")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Typical |a_iᵀr| of about 0.3λ before any rescaling.
    let sigma = 0.3 * lambda / (nnz_per_col as f64 / 3.0).sqrt();
    let r: Vec<f64> = (0..m).map(|_| sigma * rng.sample::<f64, _>(StandardNormal)).collect();

    let mut x_star = vec![0.0f64; n];
    for i in index::sample(&mut rng, n, support_size) {
        let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
        x_star[i] = sign * rng.random_range(0.5..1.5);
    }

    let mut triplets = Vec::with_capacity(n * nnz_per_col);
    for (i, &xi) in x_star.iter().enumerate() {
        let (rows, mut vals) = if xi != 0.0 {
            let mut attempt = 0;
            loop {
                let (rows, vals) = random_column(&mut rng, m, nnz_per_col);
                let t: f64 = rows.iter().zip(&vals).map(|(&j, v)| v * r[j]).sum();
                let a_norm = vals.iter().map(|v| v * v).sum::<f64>().sqrt();
                let r_norm = rows.iter().map(|&j| r[j] * r[j]).sum::<f64>().sqrt();
                // Insist on a reasonable angle so the rescaled column stays moderate.
                if t.abs() >= 0.1 * a_norm * r_norm && t != 0.0 {
                    let s = -lambda * xi.signum() / t;
                    break (rows, vals.into_iter().map(|v| v * s).collect::<Vec<_>>());
                }
                attempt += 1;
                if attempt >= MAX_COLUMN_RETRIES {
                    return Err(Error::Generator(format!("could not place support column {i}")));
                }
            }
        } else {
            random_column(&mut rng, m, nnz_per_col)
        };
        if xi == 0.0 {
            let t: f64 = rows.iter().zip(&vals).map(|(&j, v)| v * r[j]).sum();
            if t.abs() > OFF_SUPPORT_CAP * lambda {
                let s = OFF_SUPPORT_CAP * lambda / t.abs();
                vals.iter_mut().for_each(|v| *v *= s);
            }
        }
        triplets.extend(rows.into_iter().zip(vals).map(|(j, v)| (j, i, v)));
    }
    let matrix = SparseMatrix::from_triplets(m, n, triplets)?;
    let ax = matrix.mul_vec(&x_star);
    let b: Vec<f64> = ax.iter().zip(&r).map(|(a, ri)| a - ri).collect();
    let problem = CompositeProblem::lasso(matrix.clone(), b.clone(), lambda)?;
    let f_star = problem.evaluate(&x_star)?.total;
    let inst = GeneratedInstance {
        matrix,
        b,
        lambda,
        x_star,
        f_star,
    };
    let violation = inst.kkt_violation();
    if violation > KKT_TOL {
        return Err(Error::Generator(format!("optimality certificate fails by {violation:e}")));
    }
    Ok(inst)
}

/// 0-1 matrix with `omega` ones per row and `omega·m/n` ones per column.
///
/// Row `j` has ones in columns `jω, jω+1, …, jω+ω−1` (mod `n`).
pub fn generate_tightness_matrix(n: usize, m: usize, omega: usize) -> Result<SparseMatrix> {
    if n == 0 || m == 0 || omega == 0 || omega > n {
        return Err(Error::Generator(format!("need 1 <= omega <= n, got omega = {omega}, n = {n}")));
    }
    if !(omega * m).is_multiple_of(n) {
        return Err(Error::Generator(format!("omega·m = {} is not divisible by n = {n}", omega * m)));
    }
    let triplets = (0..m).flat_map(|j| (0..omega).map(move |t| (j, (j * omega + t) % n, 1.0)));
    SparseMatrix::from_triplets(m, n, triplets)
}

/// `m × n` matrix whose rows each hold `omega` equal nonzeros at random
/// columns; the common value of a row is drawn uniformly from `[0.5, 1.5]`.
pub fn generate_equal_row_matrix(m: usize, n: usize, omega: usize, seed: u64) -> Result<SparseMatrix> {
    if n == 0 || m == 0 || omega == 0 || omega > n {
        return Err(Error::Generator(format!("need 1 <= omega <= n, got omega = {omega}, n = {n}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut triplets = Vec::with_capacity(m * omega);
    for j in 0..m {
        let value = rng.random_range(0.5..=1.5);
        triplets.extend(index::sample(&mut rng, n, omega).into_iter().map(|c| (j, c, value)));
    }
    SparseMatrix::from_triplets(m, n, triplets)
}
