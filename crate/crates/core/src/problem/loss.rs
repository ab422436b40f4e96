use crate::error::{Error, Result};

/// Per-row loss `ℓ_j`. Each row contributes `ℓ_j(z_j)` to `f`, where
/// `z_j = A_jᵀx − b_j` for the square loss and `z_j = A_jᵀx` for the
/// classification losses.
#[derive(Debug, Clone, PartialEq)]
pub enum LossKind {
    /// `½ (A_jᵀx − b_j)²`
    Square { targets: Vec<f64> },
    /// `log(1 + exp(−y_j A_jᵀx))`
    Logistic { labels: Vec<f64> },
    /// `½ max(0, 1 − y_j A_jᵀx)²`
    HingeSquare { labels: Vec<f64> },
}

impl LossKind {
    pub fn square(targets: Vec<f64>) -> Self {
        LossKind::Square { targets }
    }

    pub fn logistic(labels: Vec<f64>) -> Self {
        LossKind::Logistic { labels }
    }

    pub fn hinge_square(labels: Vec<f64>) -> Self {
        LossKind::HingeSquare { labels }
    }

    pub fn name(&self) -> &'static str {
        match self {
            LossKind::Square { .. } => "square",
            LossKind::Logistic { .. } => "logistic",
            LossKind::HingeSquare { .. } => "hinge-square",
        }
    }

    pub(crate) fn validate(&self, rows: usize) -> Result<()> {
        let (data, labels) = match self {
            LossKind::Square { targets } => (targets, false),
            LossKind::Logistic { labels } | LossKind::HingeSquare { labels } => (labels, true),
        };
        if data.len() != rows {
            return Err(Error::Dimension(format!(
                "{} loss data for {rows} rows",
                data.len()
            )));
        }
        if labels {
            if let Some(j) = data.iter().position(|&y| y != 1.0 && y != -1.0) {
                return Err(Error::Problem(format!("label {} at row {j} is not ±1", data[j])));
            }
        } else if let Some(j) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Problem(format!("non-finite target at row {j}")));
        }
        Ok(())
    }

    /// Upper bound on `ℓ''`, so that a column `a` yields the coordinate
    /// Lipschitz constant `curvature · ‖a‖²`.
    pub fn curvature_bound(&self) -> f64 {
        match self {
            LossKind::Square { .. } | LossKind::HingeSquare { .. } => 1.0,
            LossKind::Logistic { .. } => 0.25,
        }
    }

    /// Offset subtracted from `A_jᵀx` to form the residual variable.
    #[inline]
    pub fn offset(&self, j: usize) -> f64 {
        match self {
            LossKind::Square { targets } => targets[j],
            _ => 0.0,
        }
    }

    #[inline]
    pub fn value(&self, j: usize, z: f64) -> f64 {
        match self {
            LossKind::Square { .. } => 0.5 * z * z,
            LossKind::Logistic { labels } => softplus(-labels[j] * z),
            LossKind::HingeSquare { labels } => {
                let t = (1.0 - labels[j] * z).max(0.0);
                0.5 * t * t
            }
        }
    }

    /// `ℓ_j(z + dz) − ℓ_j(z)`, computed without cancellation for the square loss.
    #[inline]
    pub fn value_change(&self, j: usize, z: f64, dz: f64) -> f64 {
        match self {
            LossKind::Square { .. } => dz * (z + 0.5 * dz),
            _ => self.value(j, z + dz) - self.value(j, z),
        }
    }

    #[inline]
    pub fn derivative(&self, j: usize, z: f64) -> f64 {
        match self {
            LossKind::Square { .. } => z,
            LossKind::Logistic { labels } => {
                let y = labels[j];
                -y * sigmoid(-y * z)
            }
            LossKind::HingeSquare { labels } => {
                let y = labels[j];
                -y * (1.0 - y * z).max(0.0)
            }
        }
    }
}

/// `log(1 + e^t)` without overflow.
#[inline]
pub(crate) fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

#[inline]
pub(crate) fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}
