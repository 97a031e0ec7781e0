//! Brute-force reference: the full coupled-channel operator diagonalized
//! directly, without any effective-potential reformulation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{diagonalize_sym, Mat, SymEigen};
use crate::model::ChannelSystem;
use crate::scalar::Real;

pub const DEFAULT_DIMENSION_CAP: usize = 2000;

/// `H[(n,ξ),(n',ξ')] = δ_nn' (h_g + ε_n)(ξ,ξ') + δ_ξξ' V_nn'(ξ)`, rows
/// ordered `n · N_g + ξ`.
pub fn full_hamiltonian<T: Real>(system: &ChannelSystem<T>) -> Mat<T> {
    let ng = system.n_g();
    let nt = system.n_tot();
    let mut h = Mat::zeros(nt * ng, nt * ng);
    for n in 0..nt {
        h.set_block(n * ng, n * ng, &system.hg.shifted(-system.eps[n]));
        for m in 0..nt {
            for x in 0..ng {
                h[(n * ng + x, m * ng + x)] += system.v.get(n, m, x);
            }
        }
    }
    h
}

#[derive(Clone, Debug)]
pub struct DirectSpectrum<T> {
    pub hamiltonian: Mat<T>,
    pub eigen: SymEigen<T>,
}

impl<T: Real> DirectSpectrum<T> {
    pub fn energies(&self) -> &[T] {
        &self.eigen.values
    }
}

/// Diagonalize the full operator; refuses dimensions above `cap`.
pub fn direct_spectrum<T: Real>(system: &ChannelSystem<T>, cap: usize) -> Result<DirectSpectrum<T>> {
    let dim = system.n_tot() * system.n_g();
    if dim > cap {
        return Err(Error::Unsupported(format!(
            "direct spectrum of dimension {dim} exceeds the cap of {cap}"
        )));
    }
    let hamiltonian = full_hamiltonian(system);
    let eigen = diagonalize_sym(&hamiltonian, T::default_tol())?;
    Ok(DirectSpectrum { hamiltonian, eigen })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub max_abs_dev: f64,
    pub max_rel_dev: f64,
    pub matched_pairs: usize,
    pub unmatched_a: Vec<f64>,
    pub unmatched_b: Vec<f64>,
    pub tol: f64,
    pub pass: bool,
}

/// Match two ascending spectra in order. Deviations are relative to the
/// larger of the two spectral magnitudes `max |λ|` (or 1 if both vanish).
/// Passes iff every entry is matched and `max_rel_dev ≤ tol`.
pub fn compare_spectra<T: Real>(a: &[T], b: &[T], tol: T) -> ComparisonReport {
    let scale = a
        .iter()
        .chain(b)
        .fold(0.0f64, |m, &x| m.max(x.as_f64().abs()));
    let scale = if scale > 0.0 { scale } else { 1.0 };
    let tol = tol.as_f64();
    let window = tol * scale;
    let (mut i, mut j) = (0, 0);
    let mut report = ComparisonReport {
        max_abs_dev: 0.0,
        max_rel_dev: 0.0,
        matched_pairs: 0,
        unmatched_a: Vec::new(),
        unmatched_b: Vec::new(),
        tol,
        pass: false,
    };
    let equal_len = a.len() == b.len();
    while i < a.len() && j < b.len() {
        let (x, y) = (a[i].as_f64(), b[j].as_f64());
        let d = (x - y).abs();
        if equal_len || d <= window {
            report.max_abs_dev = report.max_abs_dev.max(d);
            report.max_rel_dev = report.max_rel_dev.max(d / scale);
            report.matched_pairs += 1;
            i += 1;
            j += 1;
        } else if x < y {
            report.unmatched_a.push(x);
            i += 1;
        } else {
            report.unmatched_b.push(y);
            j += 1;
        }
    }
    report.unmatched_a.extend(a[i..].iter().map(|x| x.as_f64()));
    report.unmatched_b.extend(b[j..].iter().map(|x| x.as_f64()));
    report.pass = report.unmatched_a.is_empty() && report.unmatched_b.is_empty() && report.max_rel_dev <= tol;
    report
}
