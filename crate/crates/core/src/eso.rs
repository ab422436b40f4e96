//! Expected separable overapproximation certificates `(β, w)`.
//!
//! A certificate states that for every `x`, `h`
//!
//! ```text
//! E[f(x + h_[Ŝ])] ≤ f(x) + (E|Ŝ|/n) (⟨∇f(x), h⟩ + (β/2) ‖h‖²_w).
//! ```

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::problem::{CompositeProblem, DeltaScratch};
use crate::sampling::{iteration_rng, Partition, SamplingLaw};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EsoParams {
    beta: f64,
    w: Vec<f64>,
    monotonic: bool,
}

impl EsoParams {
    pub fn new(beta: f64, w: Vec<f64>, monotonic: bool) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::Eso(format!("beta = {beta} must be positive")));
        }
        if let Some(i) = w.iter().position(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Eso(format!("w[{i}] = {} must be positive", w[i])));
        }
        Ok(Self { beta, w, monotonic })
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn w(&self) -> &[f64] {
        &self.w
    }

    /// Whether PCDM1 with this certificate never increases `F`.
    pub fn monotonic(&self) -> bool {
        self.monotonic
    }

    pub fn n(&self) -> usize {
        self.w.len()
    }

    /// Step weights `β w_i` used by the block updates.
    pub fn step_weights(&self) -> Vec<f64> {
        self.w.iter().map(|w| self.beta * w).collect()
    }

    /// Same certificate with `β` moved by a factor `c` into `w`:
    /// `(β, w) ↦ (β/c, c w)`.
    pub fn reshuffled(&self, c: f64) -> Result<Self> {
        EsoParams::new(self.beta / c, self.w.iter().map(|w| w * c).collect(), self.monotonic)
    }

    /// Folds `β` into the weights: `(1, β w)`.
    pub fn normalized(&self) -> Self {
        Self {
            beta: 1.0,
            w: self.step_weights(),
            monotonic: self.monotonic,
        }
    }

    /// Two certificates are equivalent when their products `β w` agree.
    pub fn equivalent(&self, other: &EsoParams, rtol: f64) -> bool {
        self.n() == other.n()
            && self
                .step_weights()
                .iter()
                .zip(other.step_weights())
                .all(|(a, b)| (a - b).abs() <= rtol * a.abs().max(b.abs()))
    }

    /// Smallest `β'` with `β w ≤ β' L` coordinatewise, so that the certificate
    /// can be compared to ones stated with respect to `L`.
    pub fn beta_relative_to(&self, lipschitz: &[f64]) -> f64 {
        self.w
            .iter()
            .zip(lipschitz)
            .map(|(w, l)| self.beta * w / l)
            .fold(0.0, f64::max)
    }
}

fn check_inputs(law: &SamplingLaw, omega: usize, lipschitz: &[f64]) -> Result<()> {
    law.validate()?;
    let n = law.n();
    if lipschitz.len() != n {
        return Err(Error::Dimension(format!("{} Lipschitz constants for n = {n}", lipschitz.len())));
    }
    if omega == 0 || omega > n {
        return Err(Error::Eso(format!("omega = {omega} outside 1..={n}")));
    }
    if lipschitz.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
        return Err(Error::Eso("Lipschitz constants must be positive".into()));
    }
    Ok(())
}

fn denominator(n: usize) -> f64 {
    n.saturating_sub(1).max(1) as f64
}

/// `β` for a doubly uniform law with moments `e1`, `e2`.
fn du_beta(omega: usize, n: usize, e1: f64, e2: f64) -> f64 {
    1.0 + (omega as f64 - 1.0) * (e2 / e1 - 1.0) / denominator(n)
}

/// Default certificate for `law` on a function of degree `omega` with block
/// Lipschitz constants `lipschitz`.
///
/// Nonoverlapping uniform laws use the bound `γ_i ≤ min{ω, |cell(i)|}`; see
/// [`eso_for_problem`] for the exact `γ`.
pub fn eso_for(law: &SamplingLaw, omega: usize, lipschitz: &[f64]) -> Result<EsoParams> {
    check_inputs(law, omega, lipschitz)?;
    let n = law.n();
    let l = lipschitz.to_vec();
    let w_f = omega as f64;
    match law {
        SamplingLaw::Serial { .. } => EsoParams::new(1.0, l, true),
        SamplingLaw::FullyParallel { .. } => EsoParams::new(w_f, l, true),
        SamplingLaw::Nice { tau, .. } => {
            let beta = 1.0 + (w_f - 1.0) * (*tau as f64 - 1.0) / denominator(n);
            EsoParams::new(beta, l, false)
        }
        SamplingLaw::Binomial { tau, p, .. } => {
            let beta = 1.0 + p * (w_f - 1.0) * (*tau as f64 - 1.0) / denominator(n);
            EsoParams::new(beta, l, false)
        }
        SamplingLaw::NonoverlappingUniform(part) => {
            let gamma: Vec<f64> = (0..n)
                .map(|i| part.cells()[part.cell_of(i)].len().min(omega) as f64)
                .collect();
            EsoParams::new(1.0, gamma.iter().zip(&l).map(|(g, l)| g * l).collect(), true)
        }
        SamplingLaw::Mixture(components) => {
            let parts = components
                .iter()
                .map(|(w, c)| Ok((*w, c.clone(), eso_for(c, omega, lipschitz)?)))
                .collect::<Result<Vec<_>>>()?;
            combine_eso(&parts)
        }
        SamplingLaw::Independent { .. } | SamplingLaw::DoublyUniform { .. } => {
            let m = law.moments();
            EsoParams::new(du_beta(omega, n, m.e1, m.e2), l, false)
        }
    }
}

/// Like [`eso_for`] but with `ω`, `L` and, for nonoverlapping uniform laws,
/// the exact `γ` taken from `problem`.
pub fn eso_for_problem(law: &SamplingLaw, problem: &CompositeProblem) -> Result<EsoParams> {
    if law.n() != problem.n() {
        return Err(Error::Dimension(format!("sampling over {} blocks, problem has {}", law.n(), problem.n())));
    }
    match law {
        SamplingLaw::NonoverlappingUniform(part) => {
            let gamma = gamma_vector(part, problem)?;
            let w = gamma.iter().zip(problem.lipschitz()).map(|(g, l)| g * l).collect();
            EsoParams::new(1.0, w, true)
        }
        SamplingLaw::Mixture(components) => {
            let parts = components
                .iter()
                .map(|(w, c)| Ok((*w, c.clone(), eso_for_problem(c, problem)?)))
                .collect::<Result<Vec<_>>>()?;
            combine_eso(&parts)
        }
        _ => eso_for(law, problem.omega(), problem.lipschitz()),
    }
}

/// `(min{ω, τ}, L)` for laws with `|Ŝ| = τ` almost surely. Monotonic.
pub fn tau_uniform_eso(law: &SamplingLaw, omega: usize, lipschitz: &[f64]) -> Result<EsoParams> {
    check_inputs(law, omega, lipschitz)?;
    let tau = law
        .fixed_cardinality()
        .ok_or_else(|| Error::Eso(format!("{law} does not have a fixed cardinality")))?;
    EsoParams::new(omega.min(tau) as f64, lipschitz.to_vec(), true)
}

/// `(1, ν ⊙ L)` valid for any uniform law.
pub fn uniform_eso(law: &SamplingLaw, omega: usize, lipschitz: &[f64]) -> Result<EsoParams> {
    check_inputs(law, omega, lipschitz)?;
    let nu = nu_vector(law, omega)?;
    EsoParams::new(1.0, nu.iter().zip(lipschitz).map(|(v, l)| v * l).collect(), false)
}

/// `ν_i = E[min{ω, |Ŝ|} | i ∈ Ŝ]` in closed form.
pub fn nu_vector(law: &SamplingLaw, omega: usize) -> Result<Vec<f64>> {
    law.validate()?;
    let n = law.n();
    Ok(match law {
        SamplingLaw::NonoverlappingUniform(part) => (0..n)
            .map(|i| part.cells()[part.cell_of(i)].len().min(omega) as f64)
            .collect(),
        SamplingLaw::Mixture(components) if law.cardinality_distribution().is_none() => {
            // Condition on the component: weights proportional to w_j P_j(i ∈ Ŝ).
            let mut num = vec![0.0; n];
            let mut den = 0.0;
            for (w, c) in components {
                let p = c.moments().p;
                let nu = nu_vector(c, omega)?;
                num.iter_mut().zip(&nu).for_each(|(a, v)| *a += w * p * v);
                den += w * p;
            }
            num.into_iter().map(|a| a / den).collect()
        }
        _ => {
            let q = law.cardinality_distribution().expect("doubly uniform law");
            let e1: f64 = q.iter().enumerate().map(|(k, v)| v * k as f64).sum();
            let s: f64 = q
                .iter()
                .enumerate()
                .map(|(k, v)| v * (k * k.min(omega)) as f64)
                .sum();
            vec![s / e1; n]
        }
    })
}

/// `ν` by exhaustive enumeration of the law (`n ≤ 20`).
pub fn nu_vector_enumerated(law: &SamplingLaw, omega: usize) -> Result<Vec<f64>> {
    Ok(law.enumerate_pmf()?.nu(omega))
}

/// `γ_i = max_j |J_j ∩ cell(i)|` over the rows `j` of the problem.
pub fn gamma_vector(partition: &Partition, problem: &CompositeProblem) -> Result<Vec<f64>> {
    let n = problem.n();
    if partition.n() != n {
        return Err(Error::Dimension(format!("partition of {} blocks, problem has {n}", partition.n())));
    }
    let mut gamma = vec![1usize; n];
    let mut count = vec![0usize; partition.len()];
    for j in 0..problem.m() {
        let blocks = problem.row_blocks(j);
        for &i in blocks {
            count[partition.cell_of(i)] += 1;
        }
        for &i in blocks {
            let c = count[partition.cell_of(i)];
            if c > gamma[i] {
                gamma[i] = c;
            }
        }
        for &i in blocks {
            count[partition.cell_of(i)] = 0;
        }
    }
    Ok(gamma.into_iter().map(|g| g as f64).collect())
}

/// Certificate for the mixture `Σ_j q_j Ŝ_j`, reshuffled to `β = 1`:
/// `w = Σ_j q_j E|Ŝ_j| β_j w_j / Σ_j q_j E|Ŝ_j|`.
pub fn combine_eso(components: &[(f64, SamplingLaw, EsoParams)]) -> Result<EsoParams> {
    let n = components
        .first()
        .map(|(_, _, e)| e.n())
        .ok_or_else(|| Error::Eso("no components".into()))?;
    let mut w = vec![0.0; n];
    let mut den = 0.0;
    for (q, law, eso) in components {
        if eso.n() != n || law.n() != n {
            return Err(Error::Dimension("mixture components disagree on n".into()));
        }
        if !(q.is_finite() && *q >= 0.0) {
            return Err(Error::Eso(format!("mixture weight {q} is not a probability")));
        }
        let c = q * law.moments().e1;
        w.iter_mut().zip(eso.w()).for_each(|(a, wi)| *a += c * eso.beta() * wi);
        den += c;
    }
    if den <= 0.0 {
        return Err(Error::NilSampling);
    }
    w.iter_mut().for_each(|a| *a /= den);
    let monotonic = components.len() == 1 && components[0].2.monotonic();
    EsoParams::new(1.0, w, monotonic)
}

/// Certificate for `Σ_j c_j f_j` given certificates for each `f_j` under a
/// shared sampling: `(1, Σ_j c_j β_j w_j)`.
pub fn conic_combine(terms: &[(f64, EsoParams)]) -> Result<EsoParams> {
    let n = terms
        .first()
        .map(|(_, e)| e.n())
        .ok_or_else(|| Error::Eso("no terms".into()))?;
    if terms.iter().any(|(c, _)| !(c.is_finite() && *c >= 0.0)) {
        return Err(Error::Eso("conic coefficients must be nonnegative".into()));
    }
    if terms.iter().all(|(c, _)| *c == 0.0) {
        return Err(Error::Eso("all conic coefficients are zero".into()));
    }
    let mut w = vec![0.0; n];
    for (c, eso) in terms {
        if eso.n() != n {
            return Err(Error::Dimension("terms disagree on n".into()));
        }
        w.iter_mut().zip(eso.w()).for_each(|(a, wi)| *a += c * eso.beta() * wi);
    }
    let monotonic = terms.iter().all(|(c, e)| *c == 0.0 || e.monotonic());
    EsoParams::new(1.0, w, monotonic)
}

/// Per-point outcome of [`monte_carlo_validate`].
#[derive(Debug, Clone, Serialize)]
pub struct McPoint {
    /// Mean of `f(x+h_[S]) − f(x) − Σ_{i∈S} (⟨∇_i f, h_i⟩ + (β w_i/2)‖h_i‖²)`.
    pub mean_gap: f64,
    pub stderr: f64,
    /// Mean gap beyond the rounding slack, in standard errors. The point is a
    /// violation when this exceeds `sigmas`.
    pub gap_sigma: f64,
    pub violated: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct McReport {
    pub violations: usize,
    pub max_gap_sigma: f64,
    pub points: Vec<McPoint>,
}

/// Settings for [`monte_carlo_validate`].
#[derive(Debug, Clone, Copy)]
pub struct McConfig {
    pub trials: usize,
    pub points: usize,
    pub seed: u64,
    /// Violation threshold in standard errors.
    pub sigmas: f64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            trials: 10_000,
            points: 20,
            seed: 0,
            sigmas: 3.0,
        }
    }
}

/// Relative slack absorbing rounding in the comparison.
const MC_ROUNDING_SLACK: f64 = 1e-9;

/// Statistical check of the ESO inequality at random points.
///
/// Each block enters the sampled model with probability `E|Ŝ|/n`, so the
/// expected value of `Σ_{i∈S} (⟨∇_i f, h_i⟩ + (β w_i/2)‖h_i‖²)` is exactly the
/// right-hand side minus `f(x)`. The check therefore averages the per-draw
/// difference between the true change of `f` and that model, which has far
/// smaller variance than averaging `f(x+h_[S])` alone. The draws depend only
/// on `config.seed`, so different certificates are compared on the same
/// sets.
pub fn monte_carlo_validate(
    problem: &CompositeProblem,
    law: &SamplingLaw,
    eso: &EsoParams,
    config: &McConfig,
) -> Result<McReport> {
    if law.n() != problem.n() || eso.n() != problem.n() {
        return Err(Error::Dimension("law, certificate and problem disagree on n".into()));
    }
    if config.trials < 2 {
        return Err(Error::Eso("need at least two trials".into()));
    }
    let points = (0..config.points)
        .into_par_iter()
        .map(|p| mc_point(problem, law, eso, config, p as u64))
        .collect::<Result<Vec<_>>>()?;
    let violations = points.iter().filter(|p| p.violated).count();
    let max_gap_sigma = points.iter().map(|p| p.gap_sigma).fold(f64::NEG_INFINITY, f64::max);
    Ok(McReport {
        violations,
        max_gap_sigma,
        points,
    })
}

fn mc_point(
    problem: &CompositeProblem,
    law: &SamplingLaw,
    eso: &EsoParams,
    config: &McConfig,
    p: u64,
) -> Result<McPoint> {
    let dim = problem.dim();
    let blocks = problem.blocks();
    let mut rng = iteration_rng(config.seed, 2 * p);
    let x: Vec<f64> = (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let scale = 10f64.powf(rng.random_range(-2.0..1.0));
    let h: Vec<f64> = (0..dim).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();

    let z = problem.residual_of(&x);
    let fx = problem.smooth_from_residual(&z, &x);
    let g = problem.gradient(&x)?;
    let model: Vec<f64> = (0..problem.n())
        .map(|i| {
            let r = blocks.range(i);
            let lin: f64 = g[r.clone()].iter().zip(&h[r.clone()]).map(|(a, b)| a * b).sum();
            let sq: f64 = h[r].iter().map(|v| v * v).sum();
            lin + 0.5 * eso.beta() * eso.w()[i] * sq
        })
        .collect();
    let magnitude: f64 = 1.0 + fx.abs() + model.iter().map(|v| v.abs()).sum::<f64>();

    let mut draws = iteration_rng(config.seed, 2 * p + 1);
    let mut scratch = DeltaScratch::default();
    let mut set = Vec::new();
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..config.trials {
        law.draw_into(&mut draws, &mut set);
        let df = problem.f_change(&z, &set, &h, &mut scratch);
        let d = df - set.iter().map(|&i| model[i]).sum::<f64>();
        sum += d;
        sum_sq += d * d;
    }
    let t = config.trials as f64;
    let mean = sum / t;
    let var = ((sum_sq - t * mean * mean) / (t - 1.0)).max(0.0);
    let stderr = (var / t).sqrt();
    let excess = mean - MC_ROUNDING_SLACK * magnitude;
    let gap_sigma = if stderr > 0.0 {
        excess / stderr
    } else if excess > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    Ok(McPoint {
        mean_gap: mean,
        stderr,
        gap_sigma,
        violated: excess > config.sigmas * stderr,
    })
}
