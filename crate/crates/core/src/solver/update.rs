use crate::eso::EsoParams;
use crate::problem::{CompositeProblem, Regularizer};

/// Writes `h^{(i)} = argmin_t ⟨g, t⟩ + (s/2)‖t‖² + Ω_i(x + t)` into `out`.
///
/// `Ω` is coordinate separable, so the minimisation splits per coordinate.
#[inline]
pub fn block_update_into(reg: &Regularizer, s: f64, x: &[f64], g: &[f64], out: &mut [f64]) {
    for ((o, &xi), &gi) in out.iter_mut().zip(x).zip(g) {
        *o = reg.prox_coord(xi, gi, s) - xi;
    }
}

/// `h^{(i)}(x)` for block `i` with step weight `β w_i`, given `∇_i f(x)`.
pub fn block_update(problem: &CompositeProblem, eso: &EsoParams, x: &[f64], i: usize, grad_i: &[f64]) -> Vec<f64> {
    let range = problem.blocks().range(i);
    let mut h = vec![0.0; range.len()];
    block_update_into(problem.regularizer(), eso.beta() * eso.w()[i], &x[range], grad_i, &mut h);
    h
}
