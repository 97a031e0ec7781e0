//! The auxiliary truncated system over the excited channels `n ≥ 1`.
//!
//! Its block operator has diagonal blocks `h_g + diag(V_nn) + (ε_n − ε_0)`
//! and off-diagonal blocks `diag(V_nn')`. Because the channel shifts are
//! absorbed into the operator, its eigenvalues are directly the pole
//! positions of the effective potential.

use crate::error::{Error, Result};
use crate::linalg::{diagonalize_sym, Mat};
use crate::model::ChannelSystem;
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct TruncatedSolution<T> {
    pub dim: usize,
    pub n_g: usize,
    /// Ascending eigenvalues of the truncated operator.
    pub eigvals: Vec<T>,
    /// Eigenvectors as columns; row `(n − 1)·N_g + ξ` holds channel `n`.
    pub eigvecs: Mat<T>,
    /// `ε_n − ε_0` for `n = 1..N_tot`.
    pub shifts: Vec<T>,
    pub residual_bound: T,
    pub operator_norm: T,
}

impl<T: Real> TruncatedSolution<T> {
    pub fn n_channels(&self) -> usize {
        self.shifts.len()
    }

    /// Component `ψ⁰_k(n, ξ)` for channel `n ≥ 1`.
    pub fn component(&self, k: usize, n: usize, x: usize) -> T {
        self.eigvecs[((n - 1) * self.n_g + x, k)]
    }
}

/// Assemble the truncated block operator of size `(N_tot − 1)·N_g`.
pub fn build_truncated<T: Real>(system: &ChannelSystem<T>) -> Result<Mat<T>> {
    let nt = system.n_tot();
    if nt < 2 {
        return Err(Error::InvalidInput(format!(
            "the truncated system needs N_tot ≥ 2, have {nt}"
        )));
    }
    let ng = system.n_g();
    let ne = nt - 1;
    let mut l = Mat::zeros(ne * ng, ne * ng);
    for n in 1..nt {
        let r0 = (n - 1) * ng;
        let block = system.channel_block(n).shifted(-system.shift(n));
        l.set_block(r0, r0, &block);
        for m in (n + 1)..nt {
            let c0 = (m - 1) * ng;
            for (x, &vnm) in system.v.profile(n, m).iter().enumerate() {
                l[(r0 + x, c0 + x)] = vnm;
                l[(c0 + x, r0 + x)] = vnm;
            }
        }
    }
    Ok(l)
}

/// Build and diagonalize the truncated system.
pub fn solve_truncated<T: Real>(system: &ChannelSystem<T>) -> Result<TruncatedSolution<T>> {
    let l = build_truncated(system)?;
    let eig = diagonalize_sym(&l, T::default_tol())?;
    let residual_bound = eig.residual_bound(&l);
    Ok(TruncatedSolution {
        dim: l.rows(),
        n_g: system.n_g(),
        eigvals: eig.values,
        eigvecs: eig.vectors,
        shifts: (1..system.n_tot()).map(|n| system.shift(n)).collect(),
        residual_bound,
        operator_norm: l.frobenius(),
    })
}
