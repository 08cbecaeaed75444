//! Right-hand side of the time-local master equation
//!
//! ```text
//! dρ/dt = −i[H_LS, ρ] + Σ_j Δ_j(t) (C_j ρ C_j† − ½{C_j†C_j, ρ}),   H_LS = Σ_j λ_j(t) C_j†C_j
//! ```

use num_complex::Complex64 as C64;

use crate::error::Result;
use crate::linalg::{DensityMatrix, Matrix};
use crate::models::ModelSpec;

/// `L(ρ)` for given instantaneous rates.
pub fn rhs_with_rates(model: &ModelSpec, rho: &Matrix, decay: &[f64], lamb_shift: &[f64]) -> Matrix {
    let d = model.dim();
    let mut out = Matrix::zeros(d);
    let half = C64::new(0.5, 0.0);
    for (j, ch) in model.channels.iter().enumerate() {
        let c = &ch.jump_op;
        let n = model.number_op(j);
        let jump = &(c * rho) * &c.adjoint();
        let anti = &(n * rho) + &(rho * n);
        let dissipator = &jump - &anti.scale(half);
        out += &dissipator.scale(C64::new(decay[j], 0.0));
        if lamb_shift[j] != 0.0 {
            let comm = &(n * rho) - &(rho * n);
            out += &comm.scale(C64::new(0.0, -lamb_shift[j]));
        }
    }
    out
}

/// `L(ρ, t)` with the model's own rates at time `t`.
pub fn rhs(model: &ModelSpec, rho: &DensityMatrix, t: f64) -> Result<Matrix> {
    let decay = model.decay_rates(t)?;
    let lamb = model.lamb_shift_rates(t)?;
    Ok(rhs_with_rates(model, rho.matrix(), &decay, &lamb))
}
