//! Full two-field states rebuilt from effective-potential eigen-solutions,
//! their densities, and localization/entanglement diagnostics.

use crate::effective::{residue_vector, EpLevel};
use crate::error::{Error, Result};
use crate::linalg::{singular_values, Mat};
use crate::model::{Grid, ModeBasis};
use crate::scalar::{dot, Real};
use crate::spectrum::SpectrumResult;

#[derive(Clone, Debug)]
pub struct AssembledState<T> {
    pub root_index: usize,
    pub eta: T,
    pub energy: T,
    /// Explicit-channel amplitude `ψ_0(ξ)`.
    pub psi0: Vec<T>,
    /// Excited-channel amplitudes `ψ_n(ξ)`, `n = 1..N_tot`.
    pub tails: Vec<Vec<T>>,
    /// `Ψ(q, ξ) = Σ_n φ_n(q) ψ_n(ξ)`, normalized.
    pub full: Mat<T>,
    pub q_weights: Vec<T>,
    pub xi_weights: Vec<T>,
}

impl<T: Real> AssembledState<T> {
    /// Channel amplitudes stacked as `n · N_g + ξ`.
    pub fn coefficients(&self) -> Vec<T> {
        let mut c = self.psi0.clone();
        for t in &self.tails {
            c.extend_from_slice(t);
        }
        c
    }

    /// `Σ_{q,ξ} w_q w_ξ |Ψ|²`.
    pub fn norm_sq(&self) -> T {
        weighted_mass(&self.full, &self.q_weights, &self.xi_weights)
    }

    /// `Σ_{n≥1} Σ_ξ w_ξ ψ_n(ξ)²`.
    pub fn tail_weight(&self) -> T {
        self.tails
            .iter()
            .flat_map(|t| t.iter().zip(&self.xi_weights).map(|(&a, &w)| w * a * a))
            .sum()
    }
}

fn weighted_mass<T: Real>(m: &Mat<T>, wq: &[T], wx: &[T]) -> T {
    let mut s = T::zero();
    for (q, &a) in wq.iter().enumerate() {
        for (x, &b) in wx.iter().enumerate() {
            s += a * b * m[(q, x)] * m[(q, x)];
        }
    }
    s
}

/// Rebuild every certified root of `sr` as a full state.
pub fn reconstruct_all<T: Real>(
    sr: &SpectrumResult<T>,
    level: &EpLevel<T>,
    basis: &ModeBasis<T>,
    xi_grid: &Grid<T>,
) -> Result<Vec<AssembledState<T>>> {
    let w: Vec<Vec<T>> = (0..level.truncated.dim)
        .map(|k| residue_vector(&level.truncated, &level.system, k))
        .collect();
    (0..sr.roots.len())
        .map(|i| reconstruct_with(sr, i, level, &w, basis, xi_grid))
        .collect()
}

/// Rebuild root `i`: tails from the truncated eigenpairs, then the full
/// state on the product grid, normalized to unit weighted norm.
pub fn reconstruct_state<T: Real>(
    sr: &SpectrumResult<T>,
    i: usize,
    level: &EpLevel<T>,
    basis: &ModeBasis<T>,
    xi_grid: &Grid<T>,
) -> Result<AssembledState<T>> {
    let w: Vec<Vec<T>> = (0..level.truncated.dim)
        .map(|k| residue_vector(&level.truncated, &level.system, k))
        .collect();
    reconstruct_with(sr, i, level, &w, basis, xi_grid)
}

fn reconstruct_with<T: Real>(
    sr: &SpectrumResult<T>,
    i: usize,
    level: &EpLevel<T>,
    residues: &[Vec<T>],
    basis: &ModeBasis<T>,
    xi_grid: &Grid<T>,
) -> Result<AssembledState<T>> {
    let eta = *sr
        .roots
        .get(i)
        .ok_or_else(|| Error::InvalidInput(format!("root index {i} out of range")))?;
    let trunc = &level.truncated;
    let ng = level.system.n_g();
    let nt = level.system.n_tot();
    if basis.n_tot() != nt || xi_grid.len() != ng {
        return Err(Error::Shape("mode basis or grid does not match the channel system".into()));
    }
    let psi0 = sr.vectors[i].clone();
    let mut tails = vec![vec![T::zero(); ng]; nt - 1];
    for (k, w) in residues.iter().enumerate() {
        let overlap = dot(w, &psi0);
        if overlap == T::zero() {
            continue;
        }
        let p = trunc.eigvals[k];
        if (eta - p).abs() <= level.ep.pole_guard {
            return Err(Error::PoleProximity {
                eta: eta.as_f64(),
                pole: p.as_f64(),
                guard: level.ep.pole_guard.as_f64(),
            });
        }
        let c = overlap / (eta - p);
        for (n, tail) in tails.iter_mut().enumerate() {
            for (x, t) in tail.iter_mut().enumerate() {
                *t += c * trunc.component(k, n + 1, x);
            }
        }
    }
    let nq = basis.q_grid.len();
    let mut full = Mat::zeros(nq, ng);
    for q in 0..nq {
        for x in 0..ng {
            let mut s = basis.phi[0][q] * psi0[x];
            for (n, tail) in tails.iter().enumerate() {
                s += basis.phi[n + 1][q] * tail[x];
            }
            full[(q, x)] = s;
        }
    }
    let q_weights = basis.q_grid.weights().to_vec();
    let xi_weights = xi_grid.weights().to_vec();
    let nrm = weighted_mass(&full, &q_weights, &xi_weights).sqrt();
    if !(nrm > T::zero()) {
        return Err(Error::Degenerate(format!("state for root {i} vanishes")));
    }
    let s = nrm.recip();
    let scale = |v: &mut Vec<T>| v.iter_mut().for_each(|x| *x *= s);
    let mut psi0 = psi0;
    scale(&mut psi0);
    tails.iter_mut().for_each(scale);
    for q in 0..nq {
        for x in 0..ng {
            full[(q, x)] *= s;
        }
    }
    Ok(AssembledState {
        root_index: i,
        eta,
        energy: sr.energies[i],
        psi0,
        tails,
        full,
        q_weights,
        xi_weights,
    })
}

/// `ρ(q, ξ) = |Ψ|²` with its marginals as per-cell probability masses.
#[derive(Clone, Debug)]
pub struct DensityField<T> {
    pub rho: Mat<T>,
    /// `w_ξ Σ_q w_q ρ(q, ξ)`.
    pub marginal_xi: Vec<T>,
    /// `w_q Σ_ξ w_ξ ρ(q, ξ)`.
    pub marginal_q: Vec<T>,
}

impl<T: Real> DensityField<T> {
    pub fn from_rho(rho: Mat<T>, wq: &[T], wx: &[T]) -> Self {
        let marginal_xi = (0..rho.cols())
            .map(|x| wx[x] * (0..rho.rows()).map(|q| wq[q] * rho[(q, x)]).sum::<T>())
            .collect();
        let marginal_q = (0..rho.rows())
            .map(|q| wq[q] * (0..rho.cols()).map(|x| wx[x] * rho[(q, x)]).sum::<T>())
            .collect();
        Self {
            rho,
            marginal_xi,
            marginal_q,
        }
    }
}

pub fn density<T: Real>(state: &AssembledState<T>) -> DensityField<T> {
    let rho = Mat::from_fn(state.full.rows(), state.full.cols(), |q, x| {
        state.full[(q, x)] * state.full[(q, x)]
    });
    DensityField::from_rho(rho, &state.q_weights, &state.xi_weights)
}

/// `1 / Σ p²` for a normalized distribution; between 1 and `len(p)`.
pub fn participation_ratio<T: Real>(p: &[T]) -> Result<T> {
    if p.iter().any(|&x| x < T::zero()) {
        return Err(Error::InvalidInput("distribution has negative entries".into()));
    }
    let total: T = p.iter().copied().sum();
    if (total - T::one()).abs() > T::lit(1e-9).max(T::epsilon() * T::from_count(p.len().max(1)) * T::lit(8.0)) {
        return Err(Error::InvalidInput(format!("distribution sums to {total}, not 1")));
    }
    let s: T = p.iter().map(|&x| x * x).sum();
    Ok(s.recip())
}

/// Number of Schmidt coefficients above `tol ×` the leading one, computed
/// on the weighted amplitude matrix `√w_q Ψ(q, ξ) √w_ξ`.
pub fn schmidt_rank<T: Real>(state: &AssembledState<T>, tol: T) -> Result<usize> {
    let m = Mat::from_fn(state.full.rows(), state.full.cols(), |q, x| {
        state.q_weights[q].sqrt() * state.full[(q, x)] * state.xi_weights[x].sqrt()
    });
    schmidt_rank_of(&m, tol)
}

/// Thresholded rank of an amplitude matrix.
pub fn schmidt_rank_of<T: Real>(m: &Mat<T>, tol: T) -> Result<usize> {
    let sv = singular_values(m)?;
    let lead = sv.first().copied().unwrap_or(T::zero());
    if !(lead > T::zero()) {
        return Err(Error::Degenerate("zero state has no Schmidt decomposition".into()));
    }
    Ok(sv.iter().filter(|&&s| s > tol * lead).count())
}

/// `ln(n)`: zero for a single realisation, strictly increasing.
pub fn complexity_measure<T: Real>(n_realizations: usize) -> Result<T> {
    if n_realizations < 1 {
        return Err(Error::InvalidInput("at least one realisation is required".into()));
    }
    Ok(T::from_count(n_realizations).ln())
}
