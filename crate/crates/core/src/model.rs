//! The discretized two-field problem.
//!
//! The measuring field lives on a uniform ξ grid with a finite-difference
//! medium operator `h_g`. The measured field is expanded in free modes
//! `φ_n(q)` with energies `ε_n`. Projecting the interaction kernel
//! `V_eg(q, ξ)` onto pairs of modes eliminates `q` and leaves the
//! coupled-channel matrices `V_nn'(ξ)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Dirichlet,
    Periodic,
}

/// Ordered quadrature grid.
#[derive(Clone, Debug, PartialEq)]
pub struct Grid<T> {
    points: Vec<T>,
    weights: Vec<T>,
    boundary: Boundary,
}

impl<T: Real> Grid<T> {
    pub fn new(points: Vec<T>, weights: Vec<T>, boundary: Boundary) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::InvalidInput(format!(
                "grid needs at least 2 points, got {}",
                points.len()
            )));
        }
        if weights.len() != points.len() {
            return Err(Error::Shape(format!(
                "{} weights for {} grid points",
                weights.len(),
                points.len()
            )));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("grid points must be strictly increasing".into()));
        }
        if weights.iter().any(|&w| w <= T::zero()) {
            return Err(Error::InvalidInput("grid weights must be positive".into()));
        }
        Ok(Self {
            points,
            weights,
            boundary,
        })
    }

    /// `n` evenly spaced points on `[lo, hi]` with trapezoid weights
    /// (Dirichlet), or on `[lo, hi)` with equal weights (periodic, the
    /// trapezoid rule on a closed loop).
    pub fn uniform(n: usize, lo: T, hi: T, boundary: Boundary) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput(format!("grid needs at least 2 points, got {n}")));
        }
        if !(hi > lo) {
            return Err(Error::InvalidInput("grid span must satisfy lo < hi".into()));
        }
        let (points, weights) = match boundary {
            Boundary::Dirichlet => {
                let h = (hi - lo) / T::from_count(n - 1);
                let points: Vec<T> = (0..n).map(|i| lo + h * T::from_count(i)).collect();
                let mut weights = vec![h; n];
                weights[0] = h * T::lit(0.5);
                weights[n - 1] = h * T::lit(0.5);
                (points, weights)
            }
            Boundary::Periodic => {
                let h = (hi - lo) / T::from_count(n);
                ((0..n).map(|i| lo + h * T::from_count(i)).collect(), vec![h; n])
            }
        };
        Self::new(points, weights, boundary)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[T] {
        &self.points
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Spacing of the first cell.
    pub fn spacing(&self) -> T {
        self.points[1] - self.points[0]
    }

    pub fn is_uniform(&self) -> bool {
        let h = self.spacing();
        // spacing differences carry rounding of the point coordinates
        let scale = self.points.iter().fold(h, |m, &x| m.max(x.abs()));
        let tol = T::rel_tol(1e-9, 16.0) * scale;
        self.points.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= tol)
    }

    /// `Σ w_i f_i`.
    pub fn integrate(&self, f: &[T]) -> T {
        self.weights.iter().zip(f).map(|(&w, &x)| w * x).sum()
    }
}

/// How the free modes of the measured field are obtained.
#[derive(Clone, Debug, PartialEq)]
pub enum ModeSource<T> {
    /// Declared spectrum and amplitude samples (one row per mode).
    Given { eps: Vec<T>, phi: Vec<Vec<T>> },
    /// Overlapping Gaussian bumps at evenly spaced centres with
    /// `ε_n = n · spacing`; bump width is `width_factor` × centre spacing.
    GaussianBumps {
        n_tot: usize,
        spacing: T,
        width_factor: T,
    },
}

/// Free-mode spectrum `ε_n` and normalized samples `φ_n(q)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeBasis<T> {
    pub eps: Vec<T>,
    pub phi: Vec<Vec<T>>,
    pub q_grid: Grid<T>,
}

impl<T: Real> ModeBasis<T> {
    pub fn n_tot(&self) -> usize {
        self.eps.len()
    }

    /// `Σ_q w_q φ_n(q) φ_m(q)`.
    pub fn overlap(&self, n: usize, m: usize) -> T {
        self.q_grid
            .weights()
            .iter()
            .zip(self.phi[n].iter().zip(&self.phi[m]))
            .map(|(&w, (&a, &b))| w * a * b)
            .sum()
    }
}

/// Build the free-mode basis on `q_grid`.
pub fn free_modes<T: Real>(source: &ModeSource<T>, q_grid: &Grid<T>) -> Result<ModeBasis<T>> {
    let nq = q_grid.len();
    let (eps, raw) = match source {
        ModeSource::Given { eps, phi } => {
            if eps.len() != phi.len() {
                return Err(Error::config(
                    "modes.phi",
                    format!("{} mode energies but {} amplitude rows", eps.len(), phi.len()),
                ));
            }
            if let Some((n, row)) = phi.iter().enumerate().find(|(_, r)| r.len() != nq) {
                return Err(Error::config(
                    format!("modes.phi[{n}]"),
                    format!("{} samples for a q-grid of {nq} points", row.len()),
                ));
            }
            (eps.clone(), phi.clone())
        }
        ModeSource::GaussianBumps {
            n_tot,
            spacing,
            width_factor,
        } => {
            let q = q_grid.points();
            let lo = q[0];
            let hi = q[nq - 1];
            let dq = (hi - lo) / T::from_count(*n_tot);
            let width = *width_factor * dq;
            let two_w2 = T::lit(2.0) * width * width;
            let eps = (0..*n_tot).map(|n| *spacing * T::from_count(n)).collect();
            let phi = (0..*n_tot)
                .map(|n| {
                    let centre = lo + dq * (T::from_count(n) + T::lit(0.5));
                    q.iter()
                        .map(|&x| (-(x - centre) * (x - centre) / two_w2).exp())
                        .collect()
                })
                .collect();
            (eps, phi)
        }
    };
    if eps.len() < 2 {
        return Err(Error::config("modes", "at least 2 modes (N_tot ≥ 2) are required"));
    }
    if eps.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::config("modes.eps", "mode energies must be nondecreasing"));
    }
    let mut phi = Vec::with_capacity(raw.len());
    for (n, row) in raw.into_iter().enumerate() {
        let sq: Vec<T> = row.iter().map(|&x| x * x).collect();
        let nrm2 = q_grid.integrate(&sq);
        if !(nrm2 > T::zero()) || !nrm2.is_finite() {
            return Err(Error::InvalidInput(format!("mode {n} is not normalizable")));
        }
        let s = nrm2.sqrt().recip();
        phi.push(row.into_iter().map(|x| x * s).collect());
    }
    Ok(ModeBasis {
        eps,
        phi,
        q_grid: q_grid.clone(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingKind {
    GaussianAttractive,
    Constant,
    CustomSampled,
}

/// Interaction kernel `V_eg(q, ξ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingSpec<T> {
    pub g: T,
    pub sigma: T,
    pub kind: CouplingKind,
    /// Kernel values indexed `(q, ξ)`; required for `CustomSampled`.
    pub samples: Option<Mat<T>>,
}

impl<T: Real> CouplingSpec<T> {
    pub fn gaussian(g: T, sigma: T) -> Self {
        Self {
            g,
            sigma,
            kind: CouplingKind::GaussianAttractive,
            samples: None,
        }
    }

    pub fn constant(g: T) -> Self {
        Self {
            g,
            sigma: T::one(),
            kind: CouplingKind::Constant,
            samples: None,
        }
    }

    pub fn sampled(samples: Mat<T>) -> Self {
        Self {
            g: T::one(),
            sigma: T::one(),
            kind: CouplingKind::CustomSampled,
            samples: Some(samples),
        }
    }

    /// Kernel sampled on the product grid, indexed `(q, ξ)`.
    pub fn kernel(&self, q_grid: &Grid<T>, xi_grid: &Grid<T>) -> Result<Mat<T>> {
        let (nq, ng) = (q_grid.len(), xi_grid.len());
        match self.kind {
            CouplingKind::GaussianAttractive => {
                let two_s2 = T::lit(2.0) * self.sigma * self.sigma;
                Ok(Mat::from_fn(nq, ng, |i, j| {
                    let d = q_grid.points()[i] - xi_grid.points()[j];
                    -self.g * (-(d * d) / two_s2).exp()
                }))
            }
            CouplingKind::Constant => Ok(Mat::from_fn(nq, ng, |_, _| -self.g)),
            CouplingKind::CustomSampled => {
                let s = self
                    .samples
                    .as_ref()
                    .ok_or_else(|| Error::config("coupling.samples", "custom_sampled kernel needs samples"))?;
                if s.rows() != nq || s.cols() != ng {
                    return Err(Error::Shape(format!(
                        "kernel samples are {}x{}, product grid is {nq}x{ng}",
                        s.rows(),
                        s.cols()
                    )));
                }
                Ok(s.clone())
            }
        }
    }
}

/// Complete definition of one two-field instance.
#[derive(Clone, Debug, PartialEq)]
pub struct ProblemSpec<T> {
    pub xi_grid: Grid<T>,
    pub modes: ModeBasis<T>,
    pub coupling: CouplingSpec<T>,
    pub g_stiffness: T,
    pub g_potential: Vec<T>,
}

impl<T: Real> ProblemSpec<T> {
    pub fn new(
        xi_grid: Grid<T>,
        modes: ModeBasis<T>,
        coupling: CouplingSpec<T>,
        g_stiffness: T,
        g_potential: Vec<T>,
    ) -> Result<Self> {
        if g_potential.len() != xi_grid.len() {
            return Err(Error::config(
                "hg.potential",
                format!("{} samples for N_g = {}", g_potential.len(), xi_grid.len()),
            ));
        }
        if !xi_grid.is_uniform() {
            return Err(Error::config("grid", "the ξ grid must be uniform"));
        }
        if g_stiffness < T::zero() {
            return Err(Error::config("hg.stiffness", "must be ≥ 0"));
        }
        if modes.n_tot() < 2 {
            return Err(Error::config("modes", "N_tot must be ≥ 2"));
        }
        if coupling.g < T::zero() || coupling.sigma <= T::zero() {
            return Err(Error::config("coupling", "g must be ≥ 0 and sigma > 0"));
        }
        Ok(Self {
            xi_grid,
            modes,
            coupling,
            g_stiffness,
            g_potential,
        })
    }

    pub fn n_g(&self) -> usize {
        self.xi_grid.len()
    }

    pub fn n_tot(&self) -> usize {
        self.modes.n_tot()
    }
}

/// Medium operator: `stiffness · (−d²/dξ²)` by the 3-point stencil under the
/// grid's boundary condition, plus `diag(g_potential)`. Exactly symmetric.
pub fn hamiltonian_g<T: Real>(spec: &ProblemSpec<T>) -> Mat<T> {
    medium_operator(&spec.xi_grid, spec.g_stiffness, &spec.g_potential)
}

pub(crate) fn medium_operator<T: Real>(grid: &Grid<T>, stiffness: T, potential: &[T]) -> Mat<T> {
    let n = grid.len();
    let h = grid.spacing();
    let k = stiffness / (h * h);
    let mut m = Mat::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = T::lit(2.0) * k + potential[i];
    }
    for i in 0..n - 1 {
        m[(i, i + 1)] -= k;
        m[(i + 1, i)] -= k;
    }
    if grid.boundary() == Boundary::Periodic {
        m[(0, n - 1)] -= k;
        m[(n - 1, 0)] -= k;
    }
    m
}

/// Projected coupling `V_nn'(ξ)`, stored densely as `(n, n', ξ)`.
#[derive(Clone, Debug, PartialEq)]
pub struct CouplingMatrices<T> {
    n_tot: usize,
    n_g: usize,
    data: Vec<T>,
}

impl<T: Real> CouplingMatrices<T> {
    pub fn zeros(n_tot: usize, n_g: usize) -> Self {
        Self {
            n_tot,
            n_g,
            data: vec![T::zero(); n_tot * n_tot * n_g],
        }
    }

    pub fn n_tot(&self) -> usize {
        self.n_tot
    }

    pub fn n_g(&self) -> usize {
        self.n_g
    }

    pub fn get(&self, n: usize, m: usize, x: usize) -> T {
        self.data[(n * self.n_tot + m) * self.n_g + x]
    }

    /// Set `V_nm(ξ)` and `V_mn(ξ)` together.
    pub fn set_sym(&mut self, n: usize, m: usize, x: usize, value: T) {
        let ng = self.n_g;
        let nt = self.n_tot;
        self.data[(n * nt + m) * ng + x] = value;
        self.data[(m * nt + n) * ng + x] = value;
    }

    /// The ξ-profile `V_nm(·)`.
    pub fn profile(&self, n: usize, m: usize) -> &[T] {
        let start = (n * self.n_tot + m) * self.n_g;
        &self.data[start..start + self.n_g]
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == T::zero())
    }

    /// Copy with `V_nn'` zeroed for every `n ≠ n'` with `n, n' ≥ 1`, leaving
    /// the mode-0 couplings and the diagonal intact.
    pub fn without_cross_couplings(&self) -> Self {
        let mut out = self.clone();
        for n in 1..self.n_tot {
            for m in (n + 1)..self.n_tot {
                for x in 0..self.n_g {
                    out.set_sym(n, m, x, T::zero());
                }
            }
        }
        out
    }

    /// Channels `first..` only, renumbered from 0.
    pub fn sub_channels(&self, first: usize) -> Self {
        let nt = self.n_tot - first;
        let mut out = Self::zeros(nt, self.n_g);
        for n in 0..nt {
            for m in n..nt {
                for x in 0..self.n_g {
                    out.set_sym(n, m, x, self.get(n + first, m + first, x));
                }
            }
        }
        out
    }

    /// Same matrices with channels `1..` permuted by `perm` (a permutation
    /// of `1..n_tot`); channel 0 stays fixed.
    pub fn permute_excited(&self, perm: &[usize]) -> Self {
        let map = |n: usize| if n == 0 { 0 } else { perm[n - 1] };
        let mut out = Self::zeros(self.n_tot, self.n_g);
        for n in 0..self.n_tot {
            for m in n..self.n_tot {
                for x in 0..self.n_g {
                    out.set_sym(n, m, x, self.get(map(n), map(m), x));
                }
            }
        }
        out
    }

    pub fn max_asymmetry(&self) -> T {
        let mut worst = T::zero();
        for n in 0..self.n_tot {
            for m in 0..self.n_tot {
                for x in 0..self.n_g {
                    worst = worst.max((self.get(n, m, x) - self.get(m, n, x)).abs());
                }
            }
        }
        worst
    }
}

/// `V_nn'(ξ) = Σ_q w_q φ_n(q) V_eg(q, ξ) φ_n'(q)`.
pub fn project_coupling<T: Real>(
    basis: &ModeBasis<T>,
    coupling: &CouplingSpec<T>,
    xi_grid: &Grid<T>,
) -> Result<CouplingMatrices<T>> {
    let kernel = coupling.kernel(&basis.q_grid, xi_grid)?;
    let nq = basis.q_grid.len();
    let ng = xi_grid.len();
    let nt = basis.n_tot();
    let wq = basis.q_grid.weights();
    let mut out = CouplingMatrices::zeros(nt, ng);
    for n in 0..nt {
        for m in n..nt {
            let wpp: Vec<T> = (0..nq)
                .map(|q| wq[q] * basis.phi[n][q] * basis.phi[m][q])
                .collect();
            for x in 0..ng {
                let v = (0..nq).map(|q| wpp[q] * kernel[(q, x)]).sum();
                out.set_sym(n, m, x, v);
            }
        }
    }
    Ok(out)
}

/// The coupled-channel system the effective-potential construction acts on:
/// a medium operator, channel energies and channel couplings. Channel 0 is
/// the one kept explicitly.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelSystem<T> {
    pub hg: Mat<T>,
    pub eps: Vec<T>,
    pub v: CouplingMatrices<T>,
}

impl<T: Real> ChannelSystem<T> {
    pub fn new(hg: Mat<T>, eps: Vec<T>, v: CouplingMatrices<T>) -> Result<Self> {
        if !hg.is_square() || hg.rows() != v.n_g() {
            return Err(Error::Shape(format!(
                "medium operator is {}x{}, couplings have N_g = {}",
                hg.rows(),
                hg.cols(),
                v.n_g()
            )));
        }
        if eps.len() != v.n_tot() {
            return Err(Error::Shape(format!(
                "{} channel energies for {} coupled channels",
                eps.len(),
                v.n_tot()
            )));
        }
        Ok(Self { hg, eps, v })
    }

    pub fn from_problem(spec: &ProblemSpec<T>, v: &CouplingMatrices<T>) -> Result<Self> {
        Self::new(hamiltonian_g(spec), spec.modes.eps.clone(), v.clone())
    }

    pub fn n_g(&self) -> usize {
        self.hg.rows()
    }

    pub fn n_tot(&self) -> usize {
        self.eps.len()
    }

    /// Shift of channel `n` relative to channel 0, `ε_n − ε_0`.
    pub fn shift(&self, n: usize) -> T {
        self.eps[n] - self.eps[0]
    }

    /// Diagonal block `h_g + diag(V_nn)` without the channel energy.
    pub fn channel_block(&self, n: usize) -> Mat<T> {
        let mut b = self.hg.clone();
        for (x, &vnn) in self.v.profile(n, n).iter().enumerate() {
            b[(x, x)] += vnn;
        }
        b
    }

    /// The system obtained by dropping channel 0; channel 1 becomes the new
    /// explicit channel.
    pub fn drop_lowest_channel(&self) -> Result<Self> {
        if self.n_tot() < 3 {
            return Err(Error::InvalidInput(format!(
                "dropping a channel needs N_tot ≥ 3, have {}",
                self.n_tot()
            )));
        }
        Self::new(self.hg.clone(), self.eps[1..].to_vec(), self.v.sub_channels(1))
    }

    pub fn without_cross_couplings(&self) -> Self {
        Self {
            hg: self.hg.clone(),
            eps: self.eps.clone(),
            v: self.v.without_cross_couplings(),
        }
    }
}
