//! The composite objective `F = f + Ω` over a sparse data matrix.

mod blocks;
mod loss;
mod regularizer;
pub(crate) mod workspace;

pub use blocks::BlockStructure;
pub use loss::LossKind;
pub use regularizer::{soft_threshold, Regularizer};
pub use workspace::{block_gradient, maintain_residual, Workspace};


use crate::error::{Error, Result};
use crate::sparse::SparseMatrix;

/// Floor for the Lipschitz constant of a block whose columns are all empty.
pub const EMPTY_BLOCK_LIPSCHITZ: f64 = f64::EPSILON;

/// Values of the two parts of the objective at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    /// Smooth part `f(x)`.
    pub f: f64,
    /// Regulariser `Ω(x)`; `+∞` outside a box domain.
    pub reg: f64,
    /// `F(x) = f(x) + Ω(x)`.
    pub total: f64,
}

impl Objective {
    fn new(f: f64, reg: f64) -> Self {
        Self { f, reg, total: f + reg }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KnownOptimum {
    pub x: Vec<f64>,
    pub value: f64,
}

/// `F(x) = Σ_j ℓ_j(A_jᵀx) + ⟨c, x⟩ + Ω(x)` with a block structure on `x`.
///
/// The optional linear term `c` lets the SVM dual be written in this form;
/// it is separable and changes neither `ω` nor the Lipschitz constants.
/// Immutable after construction, so it can be shared across threads.
#[derive(Debug, Clone)]
pub struct CompositeProblem {
    matrix: SparseMatrix,
    loss: LossKind,
    reg: Regularizer,
    blocks: BlockStructure,
    linear: Option<Vec<f64>>,
    lipschitz: Vec<f64>,
    omega: usize,
    // Row -> sorted distinct blocks touched by the row's nonzeros.
    row_block_ptr: Vec<usize>,
    row_block_idx: Vec<usize>,
    optimum: Option<KnownOptimum>,
}

impl CompositeProblem {
    pub fn new(
        matrix: SparseMatrix,
        loss: LossKind,
        reg: Regularizer,
        blocks: BlockStructure,
    ) -> Result<Self> {
        if matrix.rows() == 0 {
            return Err(Error::NoLossTerms);
        }
        if blocks.dim() != matrix.cols() {
            return Err(Error::Dimension(format!(
                "block structure covers {} coordinates, matrix has {} columns",
                blocks.dim(),
                matrix.cols()
            )));
        }
        loss.validate(matrix.rows())?;
        reg.validate()?;

        let (row_block_ptr, row_block_idx) = row_block_incidence(&matrix, &blocks);
        let omega = row_block_ptr
            .windows(2)
            .map(|w| w[1] - w[0])
            .max()
            .unwrap_or(0)
            .max(1);
        let lipschitz = block_lipschitz_constants(&matrix, &loss, &blocks);
        Ok(Self {
            matrix,
            loss,
            reg,
            blocks,
            linear: None,
            lipschitz,
            omega,
            row_block_ptr,
            row_block_idx,
            optimum: None,
        })
    }

    /// Unit blocks: one coordinate per block.
    pub fn unit_blocks(matrix: SparseMatrix, loss: LossKind, reg: Regularizer) -> Result<Self> {
        let blocks = BlockStructure::unit(matrix.cols());
        Self::new(matrix, loss, reg, blocks)
    }

    /// LASSO: `½‖Ax − b‖² + λ‖x‖₁`.
    pub fn lasso(matrix: SparseMatrix, b: Vec<f64>, lambda: f64) -> Result<Self> {
        Self::unit_blocks(matrix, LossKind::square(b), Regularizer::L1 { lambda })
    }

    /// Dual of the L2-regularised hinge-loss SVM over examples `data` (rows)
    /// with labels `y`:
    ///
    /// `min_{x ∈ [0,1]^n} (1/(2λn²)) xᵀZx − (1/n) Σ x_i`, `Z_ij = y_i y_j ⟨A_i, A_j⟩`.
    ///
    /// Written as a square loss over the feature-by-example matrix with
    /// columns `y_i A_i / (n√λ)`, zero targets, and a linear term `−1/n`.
    pub fn svm_dual(data: &SparseMatrix, labels: &[f64], lambda: f64) -> Result<Self> {
        let n = data.rows();
        if labels.len() != n {
            return Err(Error::Dimension(format!("{} labels for {n} examples", labels.len())));
        }
        if let Some(i) = labels.iter().position(|&y| y != 1.0 && y != -1.0) {
            return Err(Error::Problem(format!("label {} at example {i} is not ±1", labels[i])));
        }
        if !(lambda > 0.0) {
            return Err(Error::Problem("SVM regularisation must be positive".into()));
        }
        let scale = 1.0 / (n as f64 * lambda.sqrt());
        let m = SparseMatrix::from_triplets(
            data.cols(),
            n,
            data.triplets().map(|(i, feat, v)| (feat, i, v * labels[i] * scale)),
        )?;
        let d = m.rows();
        Self::unit_blocks(m, LossKind::square(vec![0.0; d]), Regularizer::Box { lo: 0.0, hi: 1.0 })?
            .with_linear_term(vec![-1.0 / n as f64; n])
    }

    pub fn with_linear_term(mut self, c: Vec<f64>) -> Result<Self> {
        if c.len() != self.dim() {
            return Err(Error::Dimension(format!("linear term of length {} for N = {}", c.len(), self.dim())));
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::Problem("non-finite linear term".into()));
        }
        self.linear = Some(c);
        Ok(self)
    }

    pub fn with_known_optimum(mut self, x: Vec<f64>, value: f64) -> Result<Self> {
        if x.len() != self.dim() {
            return Err(Error::Dimension(format!("optimum of length {} for N = {}", x.len(), self.dim())));
        }
        self.optimum = Some(KnownOptimum { x, value });
        Ok(self)
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn loss(&self) -> &LossKind {
        &self.loss
    }

    pub fn regularizer(&self) -> &Regularizer {
        &self.reg
    }

    pub fn blocks(&self) -> &BlockStructure {
        &self.blocks
    }

    pub fn linear_term(&self) -> Option<&[f64]> {
        self.linear.as_deref()
    }

    /// Number of blocks `n`.
    pub fn n(&self) -> usize {
        self.blocks.n()
    }

    /// Number of coordinates `N`.
    pub fn dim(&self) -> usize {
        self.blocks.dim()
    }

    /// Number of loss terms `m`.
    pub fn m(&self) -> usize {
        self.matrix.rows()
    }

    /// Degree of partial separability ω.
    pub fn omega(&self) -> usize {
        self.omega
    }

    /// Block Lipschitz constants `L_i`.
    pub fn lipschitz(&self) -> &[f64] {
        &self.lipschitz
    }

    pub fn known_optimum(&self) -> Option<&KnownOptimum> {
        self.optimum.as_ref()
    }

    /// Sorted distinct blocks touched by row `j`.
    #[inline]
    pub fn row_blocks(&self, j: usize) -> &[usize] {
        &self.row_block_idx[self.row_block_ptr[j]..self.row_block_ptr[j + 1]]
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Dimension(format!("point of length {} for N = {}", x.len(), self.dim())));
        }
        match x.iter().position(|v| !v.is_finite()) {
            Some(i) => Err(Error::NonFinite(i)),
            None => Ok(()),
        }
    }

    /// Residual variables `z_j = A_jᵀx − b_j` (`b = 0` for classification losses).
    pub fn residual_of(&self, x: &[f64]) -> Vec<f64> {
        let mut z = self.matrix.mul_vec(x);
        for (j, zj) in z.iter_mut().enumerate() {
            *zj -= self.loss.offset(j);
        }
        z
    }

    /// `f` from a residual consistent with `x`.
    pub fn smooth_from_residual(&self, z: &[f64], x: &[f64]) -> f64 {
        let loss: f64 = z.iter().enumerate().map(|(j, &zj)| self.loss.value(j, zj)).sum();
        loss + self.linear_value(x)
    }

    pub(crate) fn linear_value(&self, x: &[f64]) -> f64 {
        self.linear
            .as_ref()
            .map_or(0.0, |c| c.iter().zip(x).map(|(a, b)| a * b).sum())
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<Objective> {
        self.check_point(x)?;
        let z = self.residual_of(x);
        Ok(Objective::new(self.smooth_from_residual(&z, x), self.reg.value(x)))
    }

    /// Full gradient `∇f(x)`.
    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        let z = self.residual_of(x);
        let d: Vec<f64> = z.iter().enumerate().map(|(j, &zj)| self.loss.derivative(j, zj)).collect();
        let mut g = self.matrix.tmul_vec(&d);
        if let Some(c) = &self.linear {
            g.iter_mut().zip(c).for_each(|(gi, ci)| *gi += ci);
        }
        Ok(g)
    }

    /// `max_j |J_j ∩ supp(h)|` where `J_j` is the block set of row `j` and
    /// `supp(h)` the set of blocks on which `h` is nonzero.
    pub fn dso_factor(&self, h: &[f64]) -> usize {
        let support: Vec<bool> = (0..self.n())
            .map(|i| h[self.blocks.range(i)].iter().any(|&v| v != 0.0))
            .collect();
        (0..self.m())
            .map(|j| self.row_blocks(j).iter().filter(|&&i| support[i]).count())
            .max()
            .unwrap_or(0)
    }

    /// Deterministic separable overapproximation of `f(x + h)`:
    /// `f(x) + ⟨∇f(x), h⟩ + (max_J |J ∩ supp(h)| / 2) ‖h‖²_L`.
    pub fn dso_upper_bound(&self, x: &[f64], h: &[f64]) -> Result<f64> {
        self.check_point(h)?;
        let f = self.evaluate(x)?.f;
        let g = self.gradient(x)?;
        let lin: f64 = g.iter().zip(h).map(|(a, b)| a * b).sum();
        let factor = self.dso_factor(h) as f64;
        Ok(f + lin + 0.5 * factor * self.weighted_sq_norm(h, &self.lipschitz))
    }

    /// `‖h‖²_w = Σ_i w_i ‖h^{(i)}‖²`.
    pub fn weighted_sq_norm(&self, h: &[f64], w: &[f64]) -> f64 {
        (0..self.n())
            .map(|i| w[i] * h[self.blocks.range(i)].iter().map(|v| v * v).sum::<f64>())
            .sum()
    }

    /// Change `f(x + Σ_{i∈blocks} U_i h^{(i)}) − f(x)` given the residual at `x`.
    /// `h` is a full-length direction; only the listed blocks are used.
    pub fn f_change(&self, z: &[f64], blocks: &[usize], h: &[f64], scratch: &mut DeltaScratch) -> f64 {
        scratch.reset(self.m());
        let mut change = 0.0;
        for &i in blocks {
            for c in self.blocks.range(i) {
                let d = h[c];
                if d == 0.0 {
                    continue;
                }
                if let Some(lin) = &self.linear {
                    change += lin[c] * d;
                }
                let (rows, vals) = self.matrix.col(c);
                for (&r, &a) in rows.iter().zip(vals) {
                    scratch.add(r, a * d);
                }
            }
        }
        for &r in &scratch.touched {
            change += self.loss.value_change(r, z[r], scratch.delta[r]);
        }
        change
    }
}

/// Sparse accumulator for residual perturbations.
#[derive(Debug, Default, Clone)]
pub struct DeltaScratch {
    delta: Vec<f64>,
    seen: Vec<bool>,
    touched: Vec<usize>,
}

impl DeltaScratch {
    fn reset(&mut self, m: usize) {
        if self.delta.len() != m {
            self.delta = vec![0.0; m];
            self.seen = vec![false; m];
        } else {
            for &r in &self.touched {
                self.delta[r] = 0.0;
                self.seen[r] = false;
            }
        }
        self.touched.clear();
    }

    #[inline]
    fn add(&mut self, r: usize, v: f64) {
        if !self.seen[r] {
            self.seen[r] = true;
            self.touched.push(r);
        }
        self.delta[r] += v;
    }
}

fn row_block_incidence(matrix: &SparseMatrix, blocks: &BlockStructure) -> (Vec<usize>, Vec<usize>) {
    let mut ptr = Vec::with_capacity(matrix.rows() + 1);
    let mut idx = Vec::with_capacity(matrix.nnz());
    ptr.push(0);
    for j in 0..matrix.rows() {
        let start = idx.len();
        // Columns are increasing and blocks are contiguous, so block ids come
        // out sorted and only adjacent duplicates need skipping.
        for &c in matrix.row(j).0 {
            let b = blocks.block_of(c);
            if idx.len() == start || idx[idx.len() - 1] != b {
                idx.push(b);
            }
        }
        ptr.push(idx.len());
    }
    (ptr, idx)
}

/// Degree of partial separability: the largest number of distinct blocks
/// touched by a single row.
pub fn partial_separability_degree(matrix: &SparseMatrix, blocks: &BlockStructure) -> Result<usize> {
    if matrix.rows() == 0 {
        return Err(Error::NoLossTerms);
    }
    if blocks.dim() != matrix.cols() {
        return Err(Error::Dimension(format!(
            "block structure covers {} coordinates, matrix has {} columns",
            blocks.dim(),
            matrix.cols()
        )));
    }
    let (ptr, _) = row_block_incidence(matrix, blocks);
    Ok(ptr.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0).max(1))
}

/// Block Lipschitz constants of `∇f` with identity block metric.
///
/// Unit blocks get `curvature · ‖a_i‖²`; wider blocks get the curvature
/// times the largest eigenvalue of the block's Gram matrix. Empty blocks are
/// floored at [`EMPTY_BLOCK_LIPSCHITZ`].
pub fn block_lipschitz_constants(matrix: &SparseMatrix, loss: &LossKind, blocks: &BlockStructure) -> Vec<f64> {
    let curvature = loss.curvature_bound();
    (0..blocks.n())
        .map(|i| {
            let range = blocks.range(i);
            let sigma = if range.len() == 1 {
                matrix.col_sq_norm(range.start)
            } else {
                gram_top_eigenvalue(matrix, range)
            };
            (curvature * sigma).max(EMPTY_BLOCK_LIPSCHITZ)
        })
        .collect()
}

fn sparse_dot(a: (&[usize], &[f64]), b: (&[usize], &[f64])) -> f64 {
    let (mut p, mut q, mut acc) = (0, 0, 0.0);
    while p < a.0.len() && q < b.0.len() {
        match a.0[p].cmp(&b.0[q]) {
            std::cmp::Ordering::Less => p += 1,
            std::cmp::Ordering::Greater => q += 1,
            std::cmp::Ordering::Equal => {
                acc += a.1[p] * b.1[q];
                p += 1;
                q += 1;
            }
        }
    }
    acc
}

/// Power iteration on the dense Gram matrix of a column range.
fn gram_top_eigenvalue(matrix: &SparseMatrix, range: std::ops::Range<usize>) -> f64 {
    let k = range.len();
    let cols: Vec<usize> = range.collect();
    let mut gram = vec![0.0; k * k];
    for p in 0..k {
        for q in p..k {
            let v = sparse_dot(matrix.col(cols[p]), matrix.col(cols[q]));
            gram[p * k + q] = v;
            gram[q * k + p] = v;
        }
    }
    let trace: f64 = (0..k).map(|p| gram[p * k + p]).sum();
    if trace == 0.0 {
        return 0.0;
    }
    // Deterministic start with distinct entries so it is not orthogonal to
    // the top eigenvector in symmetric cases.
    let mut v: Vec<f64> = (0..k).map(|p| 1.0 + 1e-3 * p as f64).collect();
    let mut lambda = 0.0;
    for _ in 0..10_000 {
        let norm = v.iter().map(|t| t * t).sum::<f64>().sqrt();
        v.iter_mut().for_each(|t| *t /= norm);
        let gv: Vec<f64> = (0..k).map(|p| (0..k).map(|q| gram[p * k + q] * v[q]).sum()).collect();
        let next: f64 = gv.iter().zip(&v).map(|(a, b)| a * b).sum();
        v = gv;
        if (next - lambda).abs() <= 1e-15 * next.abs() {
            lambda = next;
            break;
        }
        lambda = next;
    }
    lambda
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lasso_identity() -> CompositeProblem {
        let a = SparseMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        CompositeProblem::unit_blocks(a, LossKind::square(vec![0.0, 0.0]), Regularizer::Zero).unwrap()
    }

    #[test]
    fn omega_of_diagonal_and_dense_row() {
        let diag = SparseMatrix::from_triplets(5, 5, (0..5).map(|i| (i, i, 1.0))).unwrap();
        assert_eq!(partial_separability_degree(&diag, &BlockStructure::unit(5)).unwrap(), 1);
        let dense = SparseMatrix::from_dense(&[vec![1.0; 7]]).unwrap();
        assert_eq!(partial_separability_degree(&dense, &BlockStructure::unit(7)).unwrap(), 7);
        let blocks = BlockStructure::from_sizes(&[3, 4]).unwrap();
        assert_eq!(partial_separability_degree(&dense, &blocks).unwrap(), 2);
    }

    #[test]
    fn omega_needs_rows() {
        let empty = SparseMatrix::from_triplets(0, 3, vec![]).unwrap();
        assert!(matches!(
            partial_separability_degree(&empty, &BlockStructure::unit(3)),
            Err(Error::NoLossTerms)
        ));
    }

    #[test]
    fn lipschitz_examples() {
        let a = SparseMatrix::from_dense(&[vec![3.0], vec![4.0]]).unwrap();
        let sq = block_lipschitz_constants(&a, &LossKind::square(vec![0.0; 2]), &BlockStructure::unit(1));
        assert_eq!(sq, vec![25.0]);
        let b = SparseMatrix::from_dense(&[vec![2.0], vec![0.0]]).unwrap();
        let lg = block_lipschitz_constants(&b, &LossKind::logistic(vec![1.0; 2]), &BlockStructure::unit(1));
        assert_eq!(lg, vec![1.0]);
        let eye = SparseMatrix::from_dense(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let blk = block_lipschitz_constants(
            &eye,
            &LossKind::square(vec![0.0; 2]),
            &BlockStructure::from_sizes(&[2]).unwrap(),
        );
        assert!((blk[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn block_lipschitz_is_top_gram_eigenvalue() {
        // Gram [[2, 1], [1, 2]] has eigenvalues 1 and 3.
        let a = SparseMatrix::from_dense(&[vec![1.0, 1.0], vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        let l = block_lipschitz_constants(&a, &LossKind::square(vec![0.0; 3]), &BlockStructure::from_sizes(&[2]).unwrap());
        assert!((l[0] - 3.0).abs() < 1e-10);
    }

    #[test]
    fn empty_column_gets_floor() {
        let a = SparseMatrix::from_triplets(2, 2, vec![(0, 0, 1.0)]).unwrap();
        let l = block_lipschitz_constants(&a, &LossKind::square(vec![0.0; 2]), &BlockStructure::unit(2));
        assert_eq!(l[1], EMPTY_BLOCK_LIPSCHITZ);
    }

    #[test]
    fn evaluate_examples() {
        let p = lasso_identity();
        assert_eq!(p.evaluate(&[1.0, 1.0]).unwrap().total, 1.0);
        let empty = SparseMatrix::from_triplets(1, 2, vec![]).unwrap();
        let p = CompositeProblem::lasso(empty, vec![0.0], 2.0).unwrap();
        let obj = p.evaluate(&[1.0, -1.0]).unwrap();
        assert_eq!((obj.f, obj.reg, obj.total), (0.0, 4.0, 4.0));
        assert!(matches!(p.evaluate(&[f64::NAN, 0.0]), Err(Error::NonFinite(0))));
    }

    #[test]
    fn gradient_examples() {
        let p = lasso_identity();
        assert_eq!(p.gradient(&[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
        let a = SparseMatrix::from_dense(&[vec![1.0, 2.0], vec![-1.0, 0.5]]).unwrap();
        let y = vec![1.0, -1.0];
        let p = CompositeProblem::unit_blocks(a, LossKind::logistic(y), Regularizer::Zero).unwrap();
        // σ(0) = ½, so ∇_i = −½ Σ_j y_j A_ji.
        let g = p.gradient(&[0.0, 0.0]).unwrap();
        assert!((g[0] - (-0.5 * (1.0 + 1.0))).abs() < 1e-15);
        assert!((g[1] - (-0.5 * (2.0 - 0.5))).abs() < 1e-15);
    }

    #[test]
    fn dso_reduces_to_block_bound_on_single_block() {
        let a = SparseMatrix::from_dense(&[vec![1.0, 2.0, 0.0], vec![0.5, 0.0, -1.0]]).unwrap();
        let p = CompositeProblem::unit_blocks(a, LossKind::square(vec![0.3, -0.2]), Regularizer::Zero).unwrap();
        let x = [0.1, -0.4, 0.7];
        let h = [0.0, 0.6, 0.0];
        let g = p.gradient(&x).unwrap();
        let f = p.evaluate(&x).unwrap().f;
        let expected = f + g[1] * 0.6 + 0.5 * p.lipschitz()[1] * 0.36;
        assert!((p.dso_upper_bound(&x, &h).unwrap() - expected).abs() < 1e-12);
        assert_eq!(p.dso_upper_bound(&x, &[0.0; 3]).unwrap(), f);
    }

    #[test]
    fn svm_dual_matches_quadratic_form() {
        let data = SparseMatrix::from_dense(&[vec![1.0, 0.0, 2.0], vec![0.0, -1.0, 1.0], vec![0.5, 0.5, 0.0]]).unwrap();
        let y = [1.0, -1.0, 1.0];
        let lambda = 0.3;
        let p = CompositeProblem::svm_dual(&data, &y, lambda).unwrap();
        let x = [0.2, 0.9, 0.4];
        let n = 3.0;
        let mut quad = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                let dot: f64 = (0..3).map(|k| data.get(i, k) * data.get(j, k)).sum();
                quad += x[i] * x[j] * y[i] * y[j] * dot;
            }
        }
        let expected = quad / (2.0 * lambda * n * n) - x.iter().sum::<f64>() / n;
        let obj = p.evaluate(&x).unwrap();
        assert!((obj.f - expected).abs() < 1e-14);
        assert_eq!(obj.reg, 0.0);
        assert!(p.evaluate(&[1.2, 0.0, 0.0]).unwrap().total.is_infinite());
    }
}
