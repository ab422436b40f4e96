use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use rayon::{ThreadPool, ThreadPoolBuilder};
use serde::Serialize;

use super::trace::{Trace, TraceRecord};
use super::update::block_update_into;
use crate::eso::{eso_for_problem, EsoParams};
use crate::error::{Error, Result};
use crate::problem::workspace::{block_gradient_into, UndoLog};
use crate::problem::{CompositeProblem, Workspace};
use crate::sampling::{iteration_rng, SamplingLaw};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Variant {
    /// Plain parallel step.
    Pcdm1,
    /// Step is rolled back whenever it would increase `F`.
    Pcdm2,
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "pcdm1" => Ok(Variant::Pcdm1),
            "pcdm2" => Ok(Variant::Pcdm2),
            other => Err(Error::Config(format!("unknown variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExecutionMode {
    /// Single thread; the parallel step is simulated exactly.
    SequentialSimulation,
    /// Block updates computed and residual rows updated on a pool of threads.
    ParallelThreads(usize),
}

#[derive(Debug, Clone)]
pub struct SolverConfig {
    pub law: SamplingLaw,
    /// Certificate to use; `None` picks the default for the law and problem.
    pub eso: Option<EsoParams>,
    pub variant: Variant,
    pub mode: ExecutionMode,
    pub max_iters: u64,
    /// Optional cap on block updates divided by `n`.
    pub max_epochs: Option<f64>,
    /// Stop once `F − F* ≤ target_gap` (requires `F*`).
    pub target_gap: Option<f64>,
    /// Optimal value; defaults to the problem's known optimum.
    pub f_star: Option<f64>,
    pub seed: u64,
    pub trace_every: u64,
    /// Relative change of `F` over one epoch below which a run without a
    /// target gap is considered converged.
    pub stall_tol: f64,
}

impl SolverConfig {
    pub fn new(law: SamplingLaw) -> Self {
        Self {
            law,
            eso: None,
            variant: Variant::Pcdm1,
            mode: ExecutionMode::SequentialSimulation,
            max_iters: 1000,
            max_epochs: None,
            target_gap: None,
            f_star: None,
            seed: 0,
            trace_every: 1,
            stall_tol: 1e-12,
        }
    }

    pub fn with_eso(mut self, eso: EsoParams) -> Self {
        self.eso = Some(eso);
        self
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_mode(mut self, mode: ExecutionMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_max_iters(mut self, max_iters: u64) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_max_epochs(mut self, epochs: f64) -> Self {
        self.max_epochs = Some(epochs);
        self
    }

    pub fn with_target_gap(mut self, eps: f64) -> Self {
        self.target_gap = Some(eps);
        self
    }

    pub fn with_f_star(mut self, f_star: f64) -> Self {
        self.f_star = Some(f_star);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_trace_every(mut self, every: u64) -> Self {
        self.trace_every = every;
        self
    }
}

/// Iterate and bookkeeping carried between steps.
#[derive(Debug, Clone)]
pub struct SolverState {
    ws: Workspace,
    k: u64,
    best_f: f64,
    updates: u64,
    rejected: u64,
}

impl SolverState {
    pub fn x(&self) -> &[f64] {
        self.ws.x()
    }

    pub fn workspace(&self) -> &Workspace {
        &self.ws
    }

    pub fn iteration(&self) -> u64 {
        self.k
    }

    /// Current `F` as maintained incrementally.
    pub fn objective(&self) -> f64 {
        self.ws.objective().total
    }

    /// Smallest `F` seen so far.
    pub fn best_objective(&self) -> f64 {
        self.best_f
    }

    /// Total number of block updates performed.
    pub fn block_updates(&self) -> u64 {
        self.updates
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    pub blocks: usize,
    pub rejected: bool,
    pub objective: f64,
}

pub struct Solver<'p> {
    problem: &'p CompositeProblem,
    config: SolverConfig,
    eso: EsoParams,
    steps: Vec<f64>,
    pool: Option<(ThreadPool, usize)>,
    state: SolverState,
    set: Vec<usize>,
    deltas: Vec<f64>,
    grad: Vec<f64>,
    undo: UndoLog,
}

impl<'p> Solver<'p> {
    /// Solver starting from the origin (projected onto a box domain).
    pub fn new(problem: &'p CompositeProblem, config: SolverConfig) -> Result<Self> {
        let ws = Workspace::at_origin(problem)?;
        Self::with_workspace(problem, config, ws)
    }

    pub fn with_start(problem: &'p CompositeProblem, config: SolverConfig, x0: Vec<f64>) -> Result<Self> {
        let ws = Workspace::new(problem, x0)?;
        Self::with_workspace(problem, config, ws)
    }

    fn with_workspace(problem: &'p CompositeProblem, config: SolverConfig, ws: Workspace) -> Result<Self> {
        config.law.validate()?;
        if config.law.n() != problem.n() {
            return Err(Error::Config(format!(
                "sampling over {} blocks, problem has {}",
                config.law.n(),
                problem.n()
            )));
        }
        if config.trace_every == 0 {
            return Err(Error::Config("trace_every must be at least 1".into()));
        }
        if let Some(eps) = config.target_gap {
            if !(eps > 0.0) {
                return Err(Error::Config(format!("target gap {eps} must be positive")));
            }
        }
        let eso = match &config.eso {
            Some(e) if e.n() != problem.n() => {
                return Err(Error::Config("certificate dimension does not match the problem".into()))
            }
            Some(e) => e.clone(),
            None => eso_for_problem(&config.law, problem)?,
        };
        let pool = match config.mode {
            ExecutionMode::SequentialSimulation => None,
            ExecutionMode::ParallelThreads(0) => return Err(Error::Config("thread count must be positive".into())),
            ExecutionMode::ParallelThreads(t) => {
                let pool = ThreadPoolBuilder::new()
                    .num_threads(t)
                    .build()
                    .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
                Some((pool, t))
            }
        };
        let best_f = ws.objective().total;
        if !best_f.is_finite() {
            return Err(Error::NonFinite(0));
        }
        let max_block = (0..problem.n()).map(|i| problem.blocks().size(i)).max().unwrap_or(1);
        Ok(Self {
            problem,
            steps: eso.step_weights(),
            eso,
            config,
            pool,
            state: SolverState {
                ws,
                k: 0,
                best_f,
                updates: 0,
                rejected: 0,
            },
            set: Vec::new(),
            deltas: Vec::new(),
            grad: vec![0.0; max_block],
            undo: UndoLog::default(),
        })
    }

    pub fn eso(&self) -> &EsoParams {
        &self.eso
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    pub fn x(&self) -> &[f64] {
        self.state.ws.x()
    }

    pub fn into_x(self) -> Vec<f64> {
        self.state.ws.into_x()
    }

    /// Blocks drawn for iteration `k` (identical in every execution mode).
    pub fn blocks_for_iteration(&self, k: u64) -> Vec<usize> {
        self.config.law.draw(&mut iteration_rng(self.config.seed, k))
    }

    /// `F` as reported in traces: the best value seen for PCDM2, the
    /// current value for PCDM1.
    fn reported_objective(&self) -> f64 {
        match self.config.variant {
            Variant::Pcdm1 => self.state.objective(),
            Variant::Pcdm2 => self.state.best_f,
        }
    }

    fn compute_deltas(&mut self) {
        let problem = self.problem;
        let layout = problem.blocks();
        let reg = problem.regularizer();
        let residual = self.state.ws.residual();
        let x = self.state.ws.x();
        let steps = &self.steps;
        let compute = |blocks: &[usize], out: &mut Vec<f64>, grad: &mut [f64]| {
            for &i in blocks {
                let r = layout.range(i);
                let len = r.len();
                let start = out.len();
                out.resize(start + len, 0.0);
                block_gradient_into(problem, residual, i, &mut grad[..len]);
                block_update_into(reg, steps[i], &x[r], &grad[..len], &mut out[start..]);
            }
        };
        self.deltas.clear();
        match &self.pool {
            Some((pool, threads)) if *threads > 1 && self.set.len() > 1 => {
                let chunk = self.set.len().div_ceil(*threads);
                let max_block = self.grad.len();
                let parts: Vec<Vec<f64>> = pool.install(|| {
                    self.set
                        .par_chunks(chunk)
                        .map(|blocks| {
                            let mut out = Vec::new();
                            let mut grad = vec![0.0; max_block];
                            compute(blocks, &mut out, &mut grad);
                            out
                        })
                        .collect()
                });
                for p in parts {
                    self.deltas.extend(p);
                }
            }
            _ => compute(&self.set, &mut self.deltas, &mut self.grad),
        }
    }

    /// One iteration: draw `S_k`, compute every `h^{(i)}` from the current
    /// iterate, then apply them together.
    pub fn step(&mut self) -> Result<StepInfo> {
        let k = self.state.k;
        let mut rng = iteration_rng(self.config.seed, k);
        self.config.law.draw_into(&mut rng, &mut self.set);
        self.state.k += 1;
        if self.set.is_empty() {
            return Ok(StepInfo {
                blocks: 0,
                rejected: false,
                objective: self.state.objective(),
            });
        }
        self.compute_deltas();
        let pool = self.pool.as_ref().map(|(p, t)| (p, *t));
        let before = self.state.objective();
        let mut rejected = false;
        match self.config.variant {
            Variant::Pcdm1 => {
                self.state
                    .ws
                    .apply_step(self.problem, &self.set, &mut self.deltas, None, pool);
            }
            Variant::Pcdm2 => {
                self.state
                    .ws
                    .apply_step(self.problem, &self.set, &mut self.deltas, Some(&mut self.undo), pool);
                if self.state.objective() > before {
                    self.state.ws.undo(&self.undo);
                    self.state.rejected += 1;
                    rejected = true;
                }
            }
        }
        self.state.updates += self.set.len() as u64;
        let k = self.state.k;
        if !self.state.objective().is_finite() {
            return Err(Error::Divergence(k));
        }
        self.state.ws.maybe_refresh(self.problem).map_err(|e| match e {
            Error::NonFinite(_) => Error::Divergence(k),
            e => e,
        })?;
        let f = self.state.objective();
        if !f.is_finite() {
            return Err(Error::Divergence(k));
        }
        self.state.best_f = self.state.best_f.min(f);
        Ok(StepInfo {
            blocks: self.set.len(),
            rejected,
            objective: f,
        })
    }

    /// Iterates until the target gap, the stall criterion, or an iteration
    /// or epoch cap is reached.
    pub fn run(&mut self) -> Result<Trace> {
        let n = self.problem.n() as f64;
        let f_star = self
            .config
            .f_star
            .or_else(|| self.problem.known_optimum().map(|o| o.value));
        let target = match (f_star, self.config.target_gap) {
            (Some(fs), Some(eps)) => Some((fs, eps)),
            _ => None,
        };
        let value = |f: f64| f_star.map_or(f, |fs| f - fs);
        let start = Instant::now();
        let mut trace = Trace {
            reports_gap: f_star.is_some(),
            ..Default::default()
        };
        let record = |state: &SolverState, f: f64, trace: &mut Trace| {
            if trace.records.last().is_some_and(|r| r.k == state.k) {
                return;
            }
            trace.records.push(TraceRecord {
                k: state.k,
                normalized_updates: state.updates as f64 / n,
                gap_or_f: value(f),
                elapsed_s: start.elapsed().as_secs_f64(),
            });
        };
        record(&self.state, self.reported_objective(), &mut trace);
        if let Some((fs, eps)) = target {
            if self.reported_objective() - fs <= eps {
                trace.converged = true;
            }
        }
        let mut window_updates = self.state.updates;
        let mut window_f = self.reported_objective();
        while !trace.converged {
            if self.state.k >= self.config.max_iters {
                break;
            }
            if let Some(cap) = self.config.max_epochs {
                if self.state.updates as f64 / n >= cap {
                    break;
                }
            }
            self.step()?;
            let mut f = self.reported_objective();
            if let Some((fs, eps)) = target {
                if f - fs <= eps {
                    // Confirm against a freshly recomputed objective.
                    self.state.ws.refresh(self.problem)?;
                    let fresh = self.state.objective();
                    self.state.best_f = self.state.best_f.min(fresh);
                    f = self.reported_objective();
                    trace.converged = fresh - fs <= eps;
                }
            } else if (self.state.updates - window_updates) as f64 >= n {
                if (window_f - f).abs() <= self.config.stall_tol * f.abs().max(1.0) {
                    trace.converged = true;
                }
                window_updates = self.state.updates;
                window_f = f;
            }
            if trace.converged || self.state.k.is_multiple_of(self.config.trace_every) {
                record(&self.state, f, &mut trace);
            }
        }
        let f = self.reported_objective();
        record(&self.state, f, &mut trace);
        trace.iterations = self.state.k;
        trace.epochs = self.state.updates as f64 / n;
        trace.final_objective = f;
        trace.rejected_steps = self.state.rejected;
        Ok(trace)
    }
}

/// Runs a solver from the origin and returns its trace.
pub fn run(problem: &CompositeProblem, config: SolverConfig) -> Result<Trace> {
    Solver::new(problem, config)?.run()
}

/// Concatenated `h^{(i)}(x)` for `blocks`, all computed from the iterate held
/// in `ws`.
pub fn snapshot_updates(
    problem: &CompositeProblem,
    eso: &EsoParams,
    ws: &Workspace,
    blocks: &[usize],
) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for &i in blocks {
        let g = crate::problem::block_gradient(problem, ws, i)?;
        out.extend(super::update::block_update(problem, eso, ws.x(), i, &g));
    }
    Ok(out)
}

/// `H_{β,w}(x, h(x)) = f(x) + ⟨∇f(x), h⟩ + (β/2)‖h‖²_w + Ω(x + h)` at the
/// full update `h(x)`.
pub fn separable_model(problem: &CompositeProblem, eso: &EsoParams, x: &[f64]) -> Result<f64> {
    let ws = Workspace::new(problem, x.to_vec())?;
    let all: Vec<usize> = (0..problem.n()).collect();
    let h = snapshot_updates(problem, eso, &ws, &all)?;
    let g = problem.gradient(x)?;
    let lin: f64 = g.iter().zip(&h).map(|(a, b)| a * b).sum();
    let quad = 0.5 * eso.beta() * problem.weighted_sq_norm(&h, eso.w());
    let moved: Vec<f64> = x.iter().zip(&h).map(|(a, b)| a + b).collect();
    Ok(ws.objective().f + lin + quad + problem.regularizer().value(&moved))
}
