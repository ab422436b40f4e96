//! Python bindings: problems, sampling laws, certificates, the solver and
//! the instance generators.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use pcdm_core::datagen;
use pcdm_core::eso::{self, McConfig};
use pcdm_core::io;
use pcdm_core::sampling;
use pcdm_core::solver::{self, ConvexBound};
use pcdm_core::{CompositeProblem, EsoParams, ExecutionMode, LossKind, Regularizer, SamplingLaw, SparseMatrix};

fn err(e: pcdm_core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn regularizer(name: &str, lam: f64) -> PyResult<Regularizer> {
    Ok(match name {
        "zero" => Regularizer::Zero,
        "l1" => Regularizer::L1 { lambda: lam },
        "l2" => Regularizer::L2Squared { lambda: lam },
        other => return Err(PyValueError::new_err(format!("unknown regularizer {other:?}"))),
    })
}

/// Composite objective `f(x) + Ω(x)` over unit blocks.
#[pyclass(name = "Problem", frozen)]
struct PyProblem {
    inner: CompositeProblem,
}

#[pymethods]
impl PyProblem {
    /// Build from `(row, col, value)` triplets.
    ///
    /// `loss` is "square" (targets `y`), "logistic" or "hinge_square"
    /// (labels `y`); `reg` is "zero", "l1" or "l2".
    #[new]
    #[pyo3(signature = (m, n, triplets, y, loss = "square", reg = "l1", lam = 1.0))]
    fn new(
        m: usize,
        n: usize,
        triplets: Vec<(usize, usize, f64)>,
        y: Vec<f64>,
        loss: &str,
        reg: &str,
        lam: f64,
    ) -> PyResult<Self> {
        let a = SparseMatrix::from_triplets(m, n, triplets).map_err(err)?;
        let loss = match loss {
            "square" => LossKind::square(y),
            "logistic" => LossKind::logistic(y),
            "hinge_square" => LossKind::hinge_square(y),
            other => return Err(PyValueError::new_err(format!("unknown loss {other:?}"))),
        };
        let inner = CompositeProblem::unit_blocks(a, loss, regularizer(reg, lam)?).map_err(err)?;
        Ok(Self { inner })
    }

    /// LASSO problem from a pcdm-instance v1 file.
    #[staticmethod]
    fn from_instance(path: &str) -> PyResult<Self> {
        let inst = io::read_instance(path).map_err(err)?;
        Ok(Self {
            inner: inst.lasso_problem().map_err(err)?,
        })
    }

    /// Problem on a LIBSVM dataset; `loss = "svm_dual"` builds the SVM dual.
    #[staticmethod]
    #[pyo3(signature = (path, loss = "logistic", reg = "l1", lam = 1.0))]
    fn from_libsvm(path: &str, loss: &str, reg: &str, lam: f64) -> PyResult<Self> {
        let (a, y) = io::read_libsvm(path).map_err(err)?;
        let inner = match loss {
            "square" => CompositeProblem::unit_blocks(a, LossKind::square(y), regularizer(reg, lam)?),
            "logistic" => CompositeProblem::unit_blocks(a, LossKind::logistic(y), regularizer(reg, lam)?),
            "svm_dual" => CompositeProblem::svm_dual(&a, &y, lam),
            other => return Err(PyValueError::new_err(format!("unknown loss {other:?}"))),
        }
        .map_err(err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn m(&self) -> usize {
        self.inner.m()
    }

    #[getter]
    fn nnz(&self) -> usize {
        self.inner.matrix().nnz()
    }

    /// Degree of partial separability.
    #[getter]
    fn omega(&self) -> usize {
        self.inner.omega()
    }

    #[getter]
    fn lipschitz(&self) -> Vec<f64> {
        self.inner.lipschitz().to_vec()
    }

    /// Optimal value when the problem carries a planted optimum.
    #[getter]
    fn f_star(&self) -> Option<f64> {
        self.inner.known_optimum().map(|o| o.value)
    }

    fn objective(&self, x: Vec<f64>) -> PyResult<f64> {
        Ok(self.inner.evaluate(&x).map_err(err)?.total)
    }

    fn gradient(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.inner.gradient(&x).map_err(err)
    }
}

/// Random block-selection law, described as "serial", "full", "nice:T",
/// "indep:T", "binom:T:P", "nu:FILE" or "du:FILE".
#[pyclass(name = "SamplingLaw", frozen)]
struct PyLaw {
    inner: SamplingLaw,
}

#[pymethods]
impl PyLaw {
    #[new]
    fn new(spec: &str, n: usize) -> PyResult<Self> {
        Ok(Self {
            inner: SamplingLaw::parse(spec, n).map_err(err)?,
        })
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label()
    }

    /// `(E|S|, E|S|², P(i ∈ S))`.
    fn moments(&self) -> (f64, f64, f64) {
        let m = self.inner.moments();
        (m.e1, m.e2, m.p)
    }

    /// `P(i ∈ S, j ∈ S)` for `i ≠ j`.
    fn pair_probability(&self, i: usize, j: usize) -> PyResult<f64> {
        Ok(self.inner.pair_probability().map_err(err)?.get(i, j))
    }

    /// The set used at iteration `k` of a run seeded with `seed`.
    fn draw(&self, seed: u64, k: u64) -> Vec<usize> {
        self.inner.draw(&mut sampling::iteration_rng(seed, k))
    }

    fn __repr__(&self) -> String {
        format!("SamplingLaw({:?})", self.inner.label())
    }
}

/// Step-size certificate `(β, w)`.
#[pyclass(name = "Eso", frozen)]
struct PyEso {
    inner: EsoParams,
}

#[pymethods]
impl PyEso {
    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta()
    }

    #[getter]
    fn w(&self) -> Vec<f64> {
        self.inner.w().to_vec()
    }

    #[getter]
    fn monotonic(&self) -> bool {
        self.inner.monotonic()
    }
}

/// Default certificate of `law` on `problem`.
#[pyfunction]
fn eso_for(law: &PyLaw, problem: &PyProblem) -> PyResult<PyEso> {
    Ok(PyEso {
        inner: eso::eso_for_problem(&law.inner, &problem.inner).map_err(err)?,
    })
}

/// Certificate from the degree alone, with unit Lipschitz constants.
#[pyfunction]
fn eso_from_degree(law: &PyLaw, omega: usize) -> PyResult<PyEso> {
    Ok(PyEso {
        inner: eso::eso_for(&law.inner, omega, &vec![1.0; law.inner.n()]).map_err(err)?,
    })
}

/// Number of Monte-Carlo points at which the ESO inequality failed.
#[pyfunction]
#[pyo3(signature = (problem, law, certificate, trials = 10_000, points = 20, seed = 0, sigmas = 3.0))]
#[allow(clippy::too_many_arguments)]
fn validate_eso(
    py: Python<'_>,
    problem: &PyProblem,
    law: &PyLaw,
    certificate: &PyEso,
    trials: usize,
    points: usize,
    seed: u64,
    sigmas: f64,
) -> PyResult<usize> {
    let cfg = McConfig {
        trials,
        points,
        seed,
        sigmas,
    };
    py.detach(|| eso::monte_carlo_validate(&problem.inner, &law.inner, &certificate.inner, &cfg))
        .map(|r| r.violations)
        .map_err(err)
}

#[pyfunction]
#[pyo3(signature = (law, omega, mu_omega = None))]
fn speedup_factor(law: &PyLaw, omega: usize, mu_omega: Option<f64>) -> PyResult<f64> {
    solver::speedup_factor(&law.inner, omega, mu_omega).map_err(err)
}

/// `P(|S| = k)` for the union of `tau` independent uniform picks.
#[pyfunction]
fn independent_q(n: usize, tau: usize) -> PyResult<Vec<f64>> {
    sampling::independent_q(n, tau).map_err(err)
}

/// High-probability iteration bound for convex problems.
#[pyfunction]
#[pyo3(signature = (beta, alpha, r_w, gap, eps, rho, small_epsilon = false))]
fn iteration_bound_convex(
    beta: f64,
    alpha: f64,
    r_w: f64,
    gap: f64,
    eps: f64,
    rho: f64,
    small_epsilon: bool,
) -> PyResult<u64> {
    let form = if small_epsilon {
        ConvexBound::SmallEpsilon
    } else {
        ConvexBound::General
    };
    solver::iteration_bound_convex(beta, alpha, r_w, gap, eps, rho, form).map_err(err)
}

#[pyfunction]
fn iteration_bound_strongly_convex(
    beta: f64,
    alpha: f64,
    mu_f: f64,
    mu_omega: f64,
    gap: f64,
    eps: f64,
    rho: f64,
) -> PyResult<u64> {
    solver::iteration_bound_strongly_convex(beta, alpha, mu_f, mu_omega, gap, eps, rho).map_err(err)
}

/// Outcome of [`solve`].
#[pyclass(name = "SolveResult", frozen, get_all)]
struct PySolveResult {
    x: Vec<f64>,
    /// `(k, epochs, F or F − F*, seconds)` per recorded iteration.
    trace: Vec<(u64, f64, f64, f64)>,
    converged: bool,
    iterations: u64,
    epochs: f64,
    final_objective: f64,
    rejected_steps: u64,
}

#[pyfunction]
#[pyo3(signature = (
    problem, law, variant = "pcdm1", max_iters = 1000, eps = None, max_epochs = None,
    seed = 0, threads = None, trace_every = 1, certificate = None,
))]
#[allow(clippy::too_many_arguments)]
fn solve(
    py: Python<'_>,
    problem: &PyProblem,
    law: &PyLaw,
    variant: &str,
    max_iters: u64,
    eps: Option<f64>,
    max_epochs: Option<f64>,
    seed: u64,
    threads: Option<usize>,
    trace_every: u64,
    certificate: Option<&PyEso>,
) -> PyResult<PySolveResult> {
    let mut cfg = solver::SolverConfig::new(law.inner.clone())
        .with_variant(variant.parse().map_err(err)?)
        .with_max_iters(max_iters)
        .with_seed(seed)
        .with_trace_every(trace_every);
    if let Some(t) = threads {
        cfg = cfg.with_mode(ExecutionMode::ParallelThreads(t));
    }
    if let Some(e) = eps {
        cfg = cfg.with_target_gap(e);
    }
    if let Some(e) = max_epochs {
        cfg = cfg.with_max_epochs(e);
    }
    if let Some(c) = certificate {
        cfg = cfg.with_eso(c.inner.clone());
    }
    let p = &problem.inner;
    let (x, trace) = py
        .detach(|| {
            let mut s = solver::Solver::new(p, cfg)?;
            let trace = s.run()?;
            Ok((s.into_x(), trace))
        })
        .map_err(err)?;
    Ok(PySolveResult {
        x,
        trace: trace
            .records
            .iter()
            .map(|r| (r.k, r.normalized_updates, r.gap_or_f, r.elapsed_s))
            .collect(),
        converged: trace.converged,
        iterations: trace.iterations,
        epochs: trace.epochs,
        final_objective: trace.final_objective,
        rejected_steps: trace.rejected_steps,
    })
}

/// LASSO with a planted optimum: returns `(problem, x_star, f_star)`.
#[pyfunction]
#[pyo3(signature = (n, m, nnz_per_col, support, lam = 1.0, seed = 0))]
fn generate_lasso(
    n: usize,
    m: usize,
    nnz_per_col: usize,
    support: usize,
    lam: f64,
    seed: u64,
) -> PyResult<(PyProblem, Vec<f64>, f64)> {
    let g = datagen::generate_lasso(n, m, nnz_per_col, support, lam, seed).map_err(err)?;
    let p = g.problem().map_err(err)?;
    Ok((PyProblem { inner: p }, g.x_star, g.f_star))
}

/// Writes a generated LASSO instance in the pcdm-instance v1 format.
#[pyfunction]
#[pyo3(signature = (path, n, m, nnz_per_col, support, lam = 1.0, seed = 0))]
fn write_lasso_instance(
    path: &str,
    n: usize,
    m: usize,
    nnz_per_col: usize,
    support: usize,
    lam: f64,
    seed: u64,
) -> PyResult<()> {
    let g = datagen::generate_lasso(n, m, nnz_per_col, support, lam, seed).map_err(err)?;
    io::write_instance(path, &io::Instance::from(g)).map_err(err)
}

#[pymodule]
fn pcdm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyProblem>()?;
    m.add_class::<PyLaw>()?;
    m.add_class::<PyEso>()?;
    m.add_class::<PySolveResult>()?;
    m.add_function(wrap_pyfunction!(eso_for, m)?)?;
    m.add_function(wrap_pyfunction!(eso_from_degree, m)?)?;
    m.add_function(wrap_pyfunction!(validate_eso, m)?)?;
    m.add_function(wrap_pyfunction!(speedup_factor, m)?)?;
    m.add_function(wrap_pyfunction!(independent_q, m)?)?;
    m.add_function(wrap_pyfunction!(iteration_bound_convex, m)?)?;
    m.add_function(wrap_pyfunction!(iteration_bound_strongly_convex, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(generate_lasso, m)?)?;
    m.add_function(wrap_pyfunction!(write_lasso_instance, m)?)?;
    Ok(())
}
