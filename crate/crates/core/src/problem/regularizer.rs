use crate::error::{Error, Result};

/// Block-separable regulariser `Ω(x) = Σ_i Ω_i(x^{(i)})`. Every variant is
/// coordinatewise, so each block subproblem has a closed-form minimiser.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularizer {
    Zero,
    /// `λ‖x‖₁`
    L1 { lambda: f64 },
    /// `(λ/2)‖x‖²`
    L2Squared { lambda: f64 },
    /// Indicator of `[lo, hi]` applied to every coordinate.
    Box { lo: f64, hi: f64 },
}

impl Regularizer {
    pub(crate) fn validate(&self) -> Result<()> {
        match *self {
            Regularizer::Zero => Ok(()),
            Regularizer::L1 { lambda } | Regularizer::L2Squared { lambda } => {
                if lambda > 0.0 && lambda.is_finite() {
                    Ok(())
                } else {
                    Err(Error::Problem(format!("regularisation weight {lambda} must be positive")))
                }
            }
            Regularizer::Box { lo, hi } => {
                if lo <= hi && !lo.is_nan() && !hi.is_nan() {
                    Ok(())
                } else {
                    Err(Error::Problem(format!("empty box [{lo}, {hi}]")))
                }
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Regularizer::Zero => "zero",
            Regularizer::L1 { .. } => "l1",
            Regularizer::L2Squared { .. } => "l2",
            Regularizer::Box { .. } => "box",
        }
    }

    /// Value on one coordinate; `+∞` outside the box.
    #[inline]
    pub fn coord_value(&self, t: f64) -> f64 {
        match *self {
            Regularizer::Zero => 0.0,
            Regularizer::L1 { lambda } => lambda * t.abs(),
            Regularizer::L2Squared { lambda } => 0.5 * lambda * t * t,
            Regularizer::Box { lo, hi } => {
                if (lo..=hi).contains(&t) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        x.iter().map(|&t| self.coord_value(t)).sum()
    }

    /// Minimiser over `t` of `g (t − x) + (s/2)(t − x)² + Ω(t)`.
    #[inline]
    pub fn prox_coord(&self, x: f64, g: f64, s: f64) -> f64 {
        match *self {
            Regularizer::Zero => x - g / s,
            Regularizer::L1 { lambda } => soft_threshold(x - g / s, lambda / s),
            Regularizer::L2Squared { lambda } => x - (g + lambda * x) / (s + lambda),
            Regularizer::Box { lo, hi } => (x - g / s).clamp(lo, hi),
        }
    }

    /// Strong convexity modulus of `Ω` with respect to `‖·‖_w` for unit
    /// blocks with identity metric. Only the squared-ℓ2 term contributes.
    pub fn strong_convexity(&self, w: &[f64]) -> f64 {
        match *self {
            Regularizer::L2Squared { lambda } => {
                let wmax = w.iter().cloned().fold(0.0, f64::max);
                if wmax > 0.0 {
                    lambda / wmax
                } else {
                    0.0
                }
            }
            _ => 0.0,
        }
    }
}

#[inline]
pub fn soft_threshold(v: f64, threshold: f64) -> f64 {
    if v > threshold {
        v - threshold
    } else if v < -threshold {
        v + threshold
    } else {
        0.0
    }
}
