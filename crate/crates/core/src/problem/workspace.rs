use rayon::prelude::*;
use rayon::ThreadPool;

use super::{CompositeProblem, Objective, Regularizer};
use crate::error::{Error, Result};

/// Iterate plus the quantities maintained alongside it: the residual
/// vector `z = Ax − b`, and running values of `f` and `Ω`.
///
/// Updates are applied incrementally in `O(nnz(block columns))`. Every
/// `refresh_period` block updates (default `2n`) everything is recomputed
/// from `x` to bound floating-point drift.
#[derive(Debug, Clone)]
pub struct Workspace {
    x: Vec<f64>,
    residual: Vec<f64>,
    f: f64,
    reg: f64,
    x_version: u64,
    synced_version: u64,
    updates_since_refresh: usize,
    refresh_period: usize,
}

/// Record of overwritten values so a step can be rolled back exactly.
#[derive(Debug, Default, Clone)]
pub(crate) struct UndoLog {
    x: Vec<(usize, f64)>,
    residual: Vec<(usize, f64)>,
    f: f64,
    reg: f64,
}

impl Workspace {
    pub fn new(problem: &CompositeProblem, x0: Vec<f64>) -> Result<Self> {
        let obj = problem.evaluate(&x0)?;
        let residual = problem.residual_of(&x0);
        Ok(Self {
            x: x0,
            residual,
            f: obj.f,
            reg: obj.reg,
            x_version: 0,
            synced_version: 0,
            updates_since_refresh: 0,
            refresh_period: 2 * problem.n(),
        })
    }

    /// Start at the origin, projected onto the box domain if there is one.
    pub fn at_origin(problem: &CompositeProblem) -> Result<Self> {
        let start = match *problem.regularizer() {
            Regularizer::Box { lo, hi } => 0.0f64.clamp(lo, hi),
            _ => 0.0,
        };
        Self::new(problem, vec![start; problem.dim()])
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn into_x(self) -> Vec<f64> {
        self.x
    }

    pub fn residual(&self) -> &[f64] {
        &self.residual
    }

    /// Maintained objective values (not recomputed).
    pub fn objective(&self) -> Objective {
        Objective {
            f: self.f,
            reg: self.reg,
            total: self.f + self.reg,
        }
    }

    /// Direct write access to the iterate. The workspace is stale until
    /// [`Workspace::refresh`] is called.
    pub fn x_mut(&mut self) -> &mut [f64] {
        self.x_version += 1;
        &mut self.x
    }

    pub fn is_fresh(&self) -> bool {
        self.x_version == self.synced_version
    }

    pub fn refresh_period(&self) -> usize {
        self.refresh_period
    }

    pub fn set_refresh_period(&mut self, period: usize) {
        self.refresh_period = period.max(1);
    }

    /// Recompute residual and objective from `x`.
    pub fn refresh(&mut self, problem: &CompositeProblem) -> Result<()> {
        let obj = problem.evaluate(&self.x)?;
        self.residual = problem.residual_of(&self.x);
        self.f = obj.f;
        self.reg = obj.reg;
        self.synced_version = self.x_version;
        self.updates_since_refresh = 0;
        Ok(())
    }

    /// Refresh if the drift budget is used up; returns whether it did.
    pub fn maybe_refresh(&mut self, problem: &CompositeProblem) -> Result<bool> {
        if self.updates_since_refresh >= self.refresh_period {
            self.refresh(problem)?;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    fn check(&self, problem: &CompositeProblem) -> Result<()> {
        if !self.is_fresh() {
            return Err(Error::StaleWorkspace);
        }
        if self.x.len() != problem.dim() || self.residual.len() != problem.m() {
            return Err(Error::Dimension("workspace does not belong to this problem".into()));
        }
        Ok(())
    }

    /// Add `delta` to block `i`, updating residual and objective incrementally.
    pub fn apply_block(&mut self, problem: &CompositeProblem, i: usize, delta: &[f64]) -> Result<()> {
        self.check(problem)?;
        let mut delta = delta.to_vec();
        self.apply_step(problem, &[i], &mut delta, None, None);
        Ok(())
    }

    /// Apply the deltas of several distinct blocks (concatenated in the order
    /// of `blocks`). With a thread pool, residual rows are split into one
    /// contiguous range per thread; each range sees the updates in the same
    /// block order, so the residual is identical to the sequential result.
    pub(crate) fn apply_step(
        &mut self,
        problem: &CompositeProblem,
        blocks: &[usize],
        deltas: &mut [f64],
        mut undo: Option<&mut UndoLog>,
        pool: Option<(&ThreadPool, usize)>,
    ) {
        let layout = problem.blocks();
        let reg = problem.regularizer();
        let linear = problem.linear_term();
        let bounds = match *reg {
            Regularizer::Box { lo, hi } => Some((lo, hi)),
            _ => None,
        };
        if let Some(u) = undo.as_deref_mut() {
            u.x.clear();
            u.residual.clear();
            u.f = self.f;
            u.reg = self.reg;
        }

        let mut f_change = 0.0;
        let mut reg_change = 0.0;
        let mut offset = 0;
        for &i in blocks {
            for c in layout.range(i) {
                let old = self.x[c];
                let mut new = old + deltas[offset];
                if let Some((lo, hi)) = bounds {
                    new = new.clamp(lo, hi);
                }
                let d = new - old;
                deltas[offset] = d;
                offset += 1;
                if d == 0.0 {
                    continue;
                }
                if let Some(u) = undo.as_deref_mut() {
                    u.x.push((c, old));
                }
                reg_change += reg.coord_value(new) - reg.coord_value(old);
                if let Some(lin) = linear {
                    f_change += lin[c] * d;
                }
                self.x[c] = new;
            }
        }

        let deltas: &[f64] = deltas;
        let keep_undo = undo.is_some();
        let m = self.residual.len();
        let (loss_change, saved) = match pool {
            Some((pool, parts)) if parts > 1 && m > 0 => {
                let chunk = m.div_ceil(parts);
                let partials: Vec<(f64, Vec<(usize, f64)>)> = pool.install(|| {
                    self.residual
                        .par_chunks_mut(chunk)
                        .enumerate()
                        .map(|(p, rows)| {
                            let lo = p * chunk;
                            update_rows(problem, blocks, deltas, rows, lo, keep_undo)
                        })
                        .collect()
                });
                let mut total = 0.0;
                let mut saved = Vec::new();
                for (change, log) in partials {
                    total += change;
                    saved.extend(log);
                }
                (total, saved)
            }
            _ => update_rows(problem, blocks, deltas, &mut self.residual, 0, keep_undo),
        };
        if let Some(u) = undo {
            u.residual = saved;
        }
        self.f += f_change + loss_change;
        self.reg += reg_change;
        self.updates_since_refresh += blocks.len();
    }

    /// Roll back the step recorded in `undo`.
    pub(crate) fn undo(&mut self, undo: &UndoLog) {
        for &(c, v) in undo.x.iter().rev() {
            self.x[c] = v;
        }
        for &(r, v) in undo.residual.iter().rev() {
            self.residual[r] = v;
        }
        self.f = undo.f;
        self.reg = undo.reg;
    }
}

/// Apply block deltas to the residual rows `lo..lo + rows.len()`; returns the
/// change in the loss part of `f` and, optionally, the overwritten values.
fn update_rows(
    problem: &CompositeProblem,
    blocks: &[usize],
    deltas: &[f64],
    rows: &mut [f64],
    lo: usize,
    keep_undo: bool,
) -> (f64, Vec<(usize, f64)>) {
    let hi = lo + rows.len();
    let matrix = problem.matrix();
    let loss = problem.loss();
    let layout = problem.blocks();
    let full = lo == 0 && hi == matrix.rows();
    let mut change = 0.0;
    let mut saved = Vec::new();
    let mut offset = 0;
    for &i in blocks {
        for c in layout.range(i) {
            let d = deltas[offset];
            offset += 1;
            if d == 0.0 {
                continue;
            }
            let (idx, vals) = matrix.col(c);
            let (start, end) = if full {
                (0, idx.len())
            } else {
                (idx.partition_point(|&r| r < lo), idx.partition_point(|&r| r < hi))
            };
            for (&r, &a) in idx[start..end].iter().zip(&vals[start..end]) {
                let slot = &mut rows[r - lo];
                let dz = a * d;
                if keep_undo {
                    saved.push((r, *slot));
                }
                change += loss.value_change(r, *slot, dz);
                *slot += dz;
            }
        }
    }
    (change, saved)
}

/// `∇_i f(x)` from the maintained residual.
pub fn block_gradient(problem: &CompositeProblem, ws: &Workspace, i: usize) -> Result<Vec<f64>> {
    ws.check(problem)?;
    let mut out = vec![0.0; problem.blocks().size(i)];
    block_gradient_into(problem, ws.residual(), i, &mut out);
    Ok(out)
}

/// Writes `∇_i f` into `out` given a residual consistent with the iterate.
#[inline]
pub(crate) fn block_gradient_into(problem: &CompositeProblem, residual: &[f64], i: usize, out: &mut [f64]) {
    let matrix = problem.matrix();
    let loss = problem.loss();
    let linear = problem.linear_term();
    for (slot, c) in out.iter_mut().zip(problem.blocks().range(i)) {
        let (idx, vals) = matrix.col(c);
        let mut g: f64 = idx
            .iter()
            .zip(vals)
            .map(|(&r, &a)| a * loss.derivative(r, residual[r]))
            .sum();
        if let Some(lin) = linear {
            g += lin[c];
        }
        *slot = g;
    }
}

/// Incremental residual maintenance for one block update, followed by the
/// periodic full recomputation.
pub fn maintain_residual(problem: &CompositeProblem, ws: &mut Workspace, i: usize, delta: &[f64]) -> Result<()> {
    if delta.len() != problem.blocks().size(i) {
        return Err(Error::Dimension(format!(
            "delta of length {} for block {i} of size {}",
            delta.len(),
            problem.blocks().size(i)
        )));
    }
    ws.apply_block(problem, i, delta)?;
    ws.maybe_refresh(problem)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::LossKind;
    use crate::sparse::SparseMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_problem(seed: u64, loss: &str) -> CompositeProblem {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (m, n) = (40, 25);
        let mut trip = Vec::new();
        for r in 0..m {
            for c in 0..n {
                if rng.random::<f64>() < 0.15 {
                    trip.push((r, c, rng.random_range(-1.0..1.0)));
                }
            }
        }
        let a = SparseMatrix::from_triplets(m, n, trip).unwrap();
        let labels: Vec<f64> = (0..m).map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 }).collect();
        let loss = match loss {
            "square" => LossKind::square((0..m).map(|_| rng.random_range(-1.0..1.0)).collect()),
            "logistic" => LossKind::logistic(labels),
            _ => LossKind::hinge_square(labels),
        };
        CompositeProblem::unit_blocks(a, loss, Regularizer::L1 { lambda: 0.1 }).unwrap()
    }

    #[test]
    fn zero_delta_leaves_residual() {
        let p = random_problem(1, "square");
        let mut ws = Workspace::new(&p, vec![0.3; p.dim()]).unwrap();
        let before = ws.residual().to_vec();
        maintain_residual(&p, &mut ws, 3, &[0.0]).unwrap();
        assert_eq!(ws.residual(), &before[..]);
    }

    #[test]
    fn unit_delta_adds_scaled_column() {
        let p = random_problem(2, "square");
        let mut ws = Workspace::new(&p, vec![0.0; p.dim()]).unwrap();
        let before = ws.residual().to_vec();
        let delta = 0.7;
        maintain_residual(&p, &mut ws, 5, &[delta]).unwrap();
        let mut expected = before;
        let (idx, vals) = p.matrix().col(5);
        for (&r, &a) in idx.iter().zip(vals) {
            expected[r] += delta * a;
        }
        assert_eq!(ws.residual(), &expected[..]);
    }

    #[test]
    fn incremental_tracking_matches_recompute() {
        for loss in ["square", "logistic", "hinge"] {
            let p = random_problem(3, loss);
            let mut ws = Workspace::new(&p, vec![0.0; p.dim()]).unwrap();
            ws.set_refresh_period(usize::MAX);
            let mut rng = ChaCha8Rng::seed_from_u64(9);
            for _ in 0..10_000 {
                let i = rng.random_range(0..p.n());
                maintain_residual(&p, &mut ws, i, &[rng.random_range(-0.01..0.01)]).unwrap();
            }
            let fresh = p.residual_of(ws.x());
            let scale = fresh.iter().map(|v| v.abs()).fold(1.0, f64::max);
            for (a, b) in ws.residual().iter().zip(&fresh) {
                assert!((a - b).abs() <= 1e-8 * scale, "{loss}");
            }
            let exact = p.evaluate(ws.x()).unwrap();
            let tracked = ws.objective();
            assert!((tracked.total - exact.total).abs() <= 1e-8 * (1.0 + exact.total.abs()), "{loss}");
        }
    }

    #[test]
    fn stale_workspace_is_rejected() {
        let p = random_problem(4, "square");
        let mut ws = Workspace::new(&p, vec![0.0; p.dim()]).unwrap();
        ws.x_mut()[0] = 1.0;
        assert!(matches!(block_gradient(&p, &ws, 0), Err(Error::StaleWorkspace)));
        ws.refresh(&p).unwrap();
        assert!(block_gradient(&p, &ws, 0).is_ok());
    }

    #[test]
    fn parallel_row_split_is_bit_identical() {
        let p = random_problem(5, "square");
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let mut seq = Workspace::new(&p, vec![0.1; p.dim()]).unwrap();
        let mut par = seq.clone();
        let blocks = [1, 4, 7, 20];
        let deltas = [0.3, -0.2, 0.05, 1.0];
        seq.apply_step(&p, &blocks, &mut deltas.clone(), None, None);
        par.apply_step(&p, &blocks, &mut deltas.clone(), None, Some((&pool, 3)));
        assert_eq!(seq.x(), par.x());
        assert_eq!(seq.residual(), par.residual());
    }

    #[test]
    fn undo_restores_exactly() {
        let p = random_problem(6, "logistic");
        let mut ws = Workspace::new(&p, vec![0.2; p.dim()]).unwrap();
        let snapshot = ws.clone();
        let mut log = UndoLog::default();
        ws.apply_step(&p, &[0, 2, 3], &mut [0.5, -0.5, 0.25], Some(&mut log), None);
        ws.undo(&log);
        assert_eq!(ws.x(), snapshot.x());
        assert_eq!(ws.residual(), snapshot.residual());
        assert_eq!(ws.objective(), snapshot.objective());
    }
}
