//! Iteration-complexity and speedup formulas.

use serde::Serialize;

use crate::eso::{eso_for, EsoParams};
use crate::error::{Error, Result};
use crate::sampling::SamplingLaw;

/// Which high-probability bound to evaluate for the convex case.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConvexBound {
    /// `K ≥ 2 + (2(β/α) max{R², gap/β} / ε)(1 − ε/gap + ln(1/ρ))`, valid for
    /// every `ε < gap`.
    General,
    /// `K ≥ (2(β/α) R² / ε) ln(gap/(ερ))`, valid for
    /// `ε < min{2(β/α)R², gap}`.
    SmallEpsilon,
}

fn check_common(beta: f64, alpha: f64, f0_gap: f64, eps: f64, rho: f64) -> Result<()> {
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(Error::Bound(format!("beta = {beta} must be positive")));
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Bound(format!("alpha = {alpha} outside (0, 1]")));
    }
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Bound(format!("rho = {rho} outside (0, 1)")));
    }
    if !(eps > 0.0) {
        return Err(Error::Bound(format!("eps = {eps} must be positive")));
    }
    if eps >= f0_gap {
        return Err(Error::Bound(format!("eps = {eps} is not below the initial gap {f0_gap}")));
    }
    Ok(())
}

fn to_iterations(k: f64) -> Result<u64> {
    if !k.is_finite() || k > u64::MAX as f64 {
        return Err(Error::Bound(format!("bound {k} is not representable")));
    }
    Ok(k.max(0.0).ceil() as u64)
}

/// Iterations after which `P(F(x_K) − F* ≤ ε) ≥ 1 − ρ` for convex `F`.
///
/// `r_w` is the radius `R_w(x₀, x*)`, `alpha = E|Ŝ|/n`.
pub fn iteration_bound_convex(
    beta: f64,
    alpha: f64,
    r_w: f64,
    f0_gap: f64,
    eps: f64,
    rho: f64,
    form: ConvexBound,
) -> Result<u64> {
    check_common(beta, alpha, f0_gap, eps, rho)?;
    let r2 = r_w * r_w;
    let ratio = beta / alpha;
    let k = match form {
        ConvexBound::General => {
            2.0 + (2.0 * ratio * r2.max(f0_gap / beta) / eps) * (1.0 - eps / f0_gap + (1.0 / rho).ln())
        }
        ConvexBound::SmallEpsilon => {
            let limit = (2.0 * ratio * r2).min(f0_gap);
            if eps >= limit {
                return Err(Error::Bound(format!("eps = {eps} must be below min(2(β/α)R², gap) = {limit}")));
            }
            (2.0 * ratio * r2 / eps) * (f0_gap / (eps * rho)).ln()
        }
    };
    to_iterations(k)
}

/// Iterations after which `P(F(x_K) − F* ≤ ε) ≥ 1 − ρ` when `f` and `Ω` are
/// strongly convex with parameters `mu_f`, `mu_omega` in the norm `‖·‖_w`.
pub fn iteration_bound_strongly_convex(
    beta: f64,
    alpha: f64,
    mu_f: f64,
    mu_omega: f64,
    f0_gap: f64,
    eps: f64,
    rho: f64,
) -> Result<u64> {
    if !(mu_f >= 0.0 && mu_omega >= 0.0 && mu_f + mu_omega > 0.0) {
        return Err(Error::Bound(format!(
            "strong convexity parameters mu_f = {mu_f}, mu_omega = {mu_omega} must be nonnegative with positive sum"
        )));
    }
    check_common(beta, alpha, f0_gap, eps, rho)?;
    let k = (1.0 / alpha) * ((beta + mu_omega) / (mu_f + mu_omega)) * (f0_gap / (eps * rho)).ln();
    to_iterations(k)
}

/// Ratio of the serial to the parallel leading complexity term for a
/// certificate stated relative to `lipschitz`.
///
/// Convex case: `E|Ŝ| / β`. With `mu_omega = Some(μ)`:
/// `E|Ŝ| (1 + μ) / (β + μ)`.
pub fn speedup_from_certificate(
    law: &SamplingLaw,
    eso: &EsoParams,
    lipschitz: &[f64],
    mu_omega: Option<f64>,
) -> Result<f64> {
    if eso.n() != law.n() || lipschitz.len() != law.n() {
        return Err(Error::Dimension("law, certificate and Lipschitz constants disagree on n".into()));
    }
    let beta = eso.beta_relative_to(lipschitz);
    let e1 = law.moments().e1;
    Ok(match mu_omega {
        None => e1 / beta,
        Some(mu) => e1 * (1.0 + mu) / (beta + mu),
    })
}

/// Theoretical parallelisation speedup of `law` on a function of degree
/// `omega` with the default certificate.
pub fn speedup_factor(law: &SamplingLaw, omega: usize, mu_omega: Option<f64>) -> Result<f64> {
    let ones = vec![1.0; law.n()];
    let eso = eso_for(law, omega, &ones)?;
    speedup_from_certificate(law, &eso, &ones, mu_omega)
}
