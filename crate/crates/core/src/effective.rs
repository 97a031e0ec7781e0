//! The energy-dependent effective potential for the explicit channel.
//!
//! Eliminating every excited channel leaves
//!
//! ```text
//! V_eff(ξ, ξ'; η) = V_00(ξ) δ_ξξ' + Σ_k w_k(ξ) w_k(ξ') / (η − p_k)
//! w_k(ξ)          = Σ_{n≥1} V_0n(ξ) ψ⁰_k(n, ξ)
//! ```
//!
//! where `p_k`, `ψ⁰_k` are the eigenpairs of the truncated operator. The
//! compound eigenvalues are the roots of `F(η) = det[h_g + V_eff(η) − η]`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{determinant, diagonalize_sym, Mat};
use crate::model::ChannelSystem;
use crate::scalar::{argmax, argmin, Real};
use crate::truncated::{solve_truncated, TruncatedSolution};

/// Tolerances of the effective potential, relative to its spectral span.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpOptions<T> {
    /// Poles closer than `merge_rel · span` are merged.
    pub merge_rel: T,
    /// `eta` closer than `guard_rel · span` to an active pole is rejected.
    pub guard_rel: T,
    /// Residue eigenvalues below `rank_rel ×` the leading one count as zero.
    pub rank_rel: T,
}

impl<T: Real> Default for EpOptions<T> {
    fn default() -> Self {
        Self {
            merge_rel: T::rel_tol(1e-8, 64.0),
            guard_rel: T::rel_tol(1e-9, 16.0),
            rank_rel: T::rel_tol(1e-10, 1024.0),
        }
    }
}

/// One (possibly merged) pole with its residue vectors.
#[derive(Clone, Debug)]
pub struct PoleTerm<T> {
    pub position: T,
    /// Raw residue vectors `w_k` of every truncated eigenpair merged here.
    pub vectors: Vec<Vec<T>>,
    /// Rank of `Σ w_k w_kᵀ`.
    pub rank: usize,
    /// Scaled residue directions: columns `c` with `Σ c cᵀ = Σ w wᵀ`.
    pub factor: Vec<Vec<T>>,
}

impl<T: Real> PoleTerm<T> {
    pub fn multiplicity(&self) -> usize {
        self.vectors.len()
    }

    /// Residue matrix `Σ_k w_k w_kᵀ`.
    pub fn residue(&self) -> Mat<T> {
        let n = self.vectors.first().map_or(0, Vec::len);
        Mat::from_fn(n, n, |i, j| self.vectors.iter().map(|w| w[i] * w[j]).sum())
    }
}

#[derive(Clone, Debug)]
pub struct EffectivePotential<T> {
    /// Medium operator `h_g`.
    pub hg: Mat<T>,
    /// Diagonal self-coupling `V_00(ξ)`.
    pub v00: Vec<T>,
    /// `h_g + diag(V_00)`.
    pub h0: Mat<T>,
    /// Poles sorted ascending after merging.
    pub poles: Vec<PoleTerm<T>>,
    /// Pole count before merging, `(N_tot − 1)·N_g` for an assembled EP.
    pub n_raw_poles: usize,
    /// Number of eliminated channels `N_e`.
    pub n_channels: usize,
    /// Energy of the explicit channel; `E = η + eps0`.
    pub eps0: T,
    pub span: T,
    pub pole_merge_tol: T,
    pub pole_guard: T,
}

impl<T: Real> EffectivePotential<T> {
    /// Build from raw `(pole, residue vector)` pairs, merging near-coincident
    /// poles and rank-revealing their summed residues.
    pub fn from_raw_poles(
        hg: Mat<T>,
        v00: Vec<T>,
        raw: Vec<(T, Vec<T>)>,
        n_channels: usize,
        eps0: T,
        opts: EpOptions<T>,
    ) -> Result<Self> {
        let ng = hg.rows();
        if v00.len() != ng || raw.iter().any(|(_, w)| w.len() != ng) {
            return Err(Error::Shape("effective potential parts disagree on N_g".into()));
        }
        let mut h0 = hg.clone();
        for (x, &v) in v00.iter().enumerate() {
            h0[(x, x)] += v;
        }
        let mut raw = raw;
        raw.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        let (g_lo, g_hi) = h0.gershgorin();
        let lo = raw.iter().fold(g_lo, |m, p| m.min(p.0));
        let hi = raw.iter().fold(g_hi, |m, p| m.max(p.0));
        let span = if hi - lo > T::zero() { hi - lo } else { T::one() };
        let merge_tol = opts.merge_rel * span;

        let n_raw_poles = raw.len();
        let mut clusters: Vec<(Vec<T>, Vec<Vec<T>>)> = Vec::new();
        for (p, w) in raw {
            match clusters.last_mut() {
                Some((ps, ws)) if p - *ps.last().unwrap() <= merge_tol => {
                    ps.push(p);
                    ws.push(w);
                }
                _ => clusters.push((vec![p], vec![w])),
            }
        }
        // a residue this weak puts its root inside the pole guard: the
        // pole is numerically decoupled
        let floor = (T::epsilon() * span).powi(2).max(opts.guard_rel * span * span);
        let mut poles = Vec::with_capacity(clusters.len());
        for (ps, vectors) in clusters {
            let position = ps.iter().copied().sum::<T>() / T::from_count(ps.len());
            let mut term = PoleTerm {
                position,
                vectors,
                rank: 0,
                factor: Vec::new(),
            };
            let (rank, factor) = rank_factor(&term.residue(), opts.rank_rel, floor)?;
            term.rank = rank;
            term.factor = factor;
            poles.push(term);
        }
        Ok(Self {
            hg,
            v00,
            h0,
            poles,
            n_raw_poles,
            n_channels,
            eps0,
            span,
            pole_merge_tol: merge_tol,
            pole_guard: opts.guard_rel * span,
        })
    }

    pub fn n_g(&self) -> usize {
        self.h0.rows()
    }

    /// Σ_k rank(R_k).
    pub fn rank_sum(&self) -> usize {
        self.poles.iter().map(|p| p.rank).sum()
    }

    /// Poles that carry a nonzero residue.
    pub fn active_poles(&self) -> impl Iterator<Item = &PoleTerm<T>> {
        self.poles.iter().filter(|p| p.rank > 0)
    }

    /// Error if `eta` lies within the guard distance of an active pole.
    pub fn check_guard(&self, eta: T) -> Result<()> {
        for p in self.active_poles() {
            if (eta - p.position).abs() <= self.pole_guard {
                return Err(Error::PoleProximity {
                    eta: eta.as_f64(),
                    pole: p.position.as_f64(),
                    guard: self.pole_guard.as_f64(),
                });
            }
        }
        Ok(())
    }

    pub fn to_dump(&self) -> EpDump {
        EpDump {
            n_g: self.n_g(),
            n_channels: self.n_channels,
            n_raw_poles: self.n_raw_poles,
            span: self.span.as_f64(),
            eps0: self.eps0.as_f64(),
            v00: self.v00.iter().map(|x| x.as_f64()).collect(),
            h0_diag: self.h0.diag().iter().map(|x| x.as_f64()).collect(),
            poles: self
                .poles
                .iter()
                .map(|p| PoleDump {
                    position: p.position.as_f64(),
                    multiplicity: p.multiplicity(),
                    rank: p.rank,
                    residue_vectors: p
                        .vectors
                        .iter()
                        .map(|w| w.iter().map(|x| x.as_f64()).collect())
                        .collect(),
                })
                .collect(),
        }
    }
}

/// Serializable snapshot of an effective potential.
#[derive(Clone, Debug, Serialize)]
pub struct EpDump {
    pub n_g: usize,
    pub n_channels: usize,
    pub n_raw_poles: usize,
    pub span: f64,
    pub eps0: f64,
    pub v00: Vec<f64>,
    pub h0_diag: Vec<f64>,
    pub poles: Vec<PoleDump>,
}

#[derive(Clone, Debug, Serialize)]
pub struct PoleDump {
    pub position: f64,
    pub multiplicity: usize,
    pub rank: usize,
    pub residue_vectors: Vec<Vec<f64>>,
}

/// Numerical rank and scaled eigen-directions of a PSD residue matrix.
fn rank_factor<T: Real>(r: &Mat<T>, rank_rel: T, floor: T) -> Result<(usize, Vec<Vec<T>>)> {
    let eig = diagonalize_sym(r, T::default_tol())?;
    let lead = eig.values.iter().fold(T::zero(), |m, &x| m.max(x));
    if lead <= floor {
        return Ok((0, Vec::new()));
    }
    let cut = rank_rel * lead;
    let factor: Vec<Vec<T>> = (0..eig.values.len())
        .rev()
        .filter(|&k| eig.values[k] > cut)
        .map(|k| {
            let s = eig.values[k].sqrt();
            eig.vector(k).into_iter().map(|x| x * s).collect()
        })
        .collect();
    Ok((factor.len(), factor))
}

/// Assemble the effective potential from a solved truncated system.
pub fn assemble_ep<T: Real>(
    trunc: &TruncatedSolution<T>,
    system: &ChannelSystem<T>,
    opts: EpOptions<T>,
) -> Result<EffectivePotential<T>> {
    let ng = system.n_g();
    if trunc.n_g != ng || trunc.n_channels() + 1 != system.n_tot() {
        return Err(Error::Shape("truncated solution does not match the channel system".into()));
    }
    let raw = (0..trunc.dim)
        .map(|k| (trunc.eigvals[k], residue_vector(trunc, system, k)))
        .collect();
    EffectivePotential::from_raw_poles(
        system.hg.clone(),
        system.v.profile(0, 0).to_vec(),
        raw,
        system.n_tot() - 1,
        system.eps[0],
        opts,
    )
}

/// `w_k(ξ) = Σ_{n≥1} V_0n(ξ) ψ⁰_k(n, ξ)`.
pub fn residue_vector<T: Real>(trunc: &TruncatedSolution<T>, system: &ChannelSystem<T>, k: usize) -> Vec<T> {
    (0..system.n_g())
        .map(|x| {
            (1..system.n_tot())
                .map(|n| system.v.get(0, n, x) * trunc.component(k, n, x))
                .sum()
        })
        .collect()
}

/// `h0 + Σ_k w_k w_kᵀ / (η − p_k)`; exactly symmetric.
pub fn eval_ep<T: Real>(ep: &EffectivePotential<T>, eta: T) -> Result<Mat<T>> {
    ep.check_guard(eta)?;
    let n = ep.n_g();
    let mut m = ep.h0.clone();
    for p in ep.active_poles() {
        let inv = (eta - p.position).recip();
        for c in &p.factor {
            for i in 0..n {
                let ci = c[i] * inv;
                for j in i..n {
                    m[(i, j)] += ci * c[j];
                }
            }
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            m[(j, i)] = m[(i, j)];
        }
    }
    Ok(m)
}

/// Characteristic function `F(η) = det[H(η) − η]`.
pub fn characteristic<T: Real>(ep: &EffectivePotential<T>, eta: T) -> Result<T> {
    determinant(&eval_ep(ep, eta)?.shifted(eta))
}

/// `‖[H(η) − η] x‖ / ‖x‖`.
pub fn ep_residual<T: Real>(ep: &EffectivePotential<T>, eta: T, x: &[T]) -> Result<T> {
    let h = eval_ep(ep, eta)?;
    let hx = h.matvec(x);
    let r: Vec<T> = hx.iter().zip(x).map(|(&a, &b)| a - eta * b).collect();
    Ok(crate::scalar::norm(&r) / crate::scalar::norm(x))
}

/// Where the effective well sits relative to where the state peaks.
#[derive(Clone, Debug, Serialize)]
pub struct WellAlignment {
    /// `[H(η)](ξ, ξ) − h_g(ξ, ξ)`.
    pub profile: Vec<f64>,
    pub well_index: usize,
    pub density_argmax: usize,
    pub aligned: bool,
    pub residual: f64,
}

/// Residual tolerance (× span) for accepting a root.
pub const ROOT_RESIDUAL_REL: f64 = 1e-7;

/// Root certification threshold relative to the spectral span.
pub fn root_residual_rel<T: Real>() -> T {
    T::rel_tol(ROOT_RESIDUAL_REL, 1024.0)
}

/// Compare the minimum of the diagonal effective well at `root` with the
/// peak of `|state|²`. Aligned when they are at most one grid cell apart.
pub fn ep_well_alignment<T: Real>(ep: &EffectivePotential<T>, root: T, state: &[T]) -> Result<WellAlignment> {
    let residual = ep_residual(ep, root, state)?;
    if residual > root_residual_rel::<T>() * ep.span {
        return Err(Error::Numerical(format!(
            "eta = {root} is not a root for this state (residual {residual})"
        )));
    }
    let h = eval_ep(ep, root)?;
    let profile: Vec<T> = (0..ep.n_g()).map(|x| h[(x, x)] - ep.hg[(x, x)]).collect();
    let density: Vec<T> = state.iter().map(|&s| s * s).collect();
    let well_index = argmin(&profile).expect("nonempty profile");
    let density_argmax = argmax(&density).expect("nonempty state");
    Ok(WellAlignment {
        profile: profile.iter().map(|x| x.as_f64()).collect(),
        well_index,
        density_argmax,
        aligned: well_index.abs_diff(density_argmax) <= 1,
        residual: residual.as_f64(),
    })
}

/// One level of the effective-potential hierarchy.
#[derive(Clone, Debug)]
pub struct EpLevel<T> {
    pub system: ChannelSystem<T>,
    pub truncated: TruncatedSolution<T>,
    pub ep: EffectivePotential<T>,
}

impl<T: Real> EpLevel<T> {
    pub fn build(system: ChannelSystem<T>, opts: EpOptions<T>) -> Result<Self> {
        let truncated = solve_truncated(&system)?;
        let ep = assemble_ep(&truncated, &system, opts)?;
        Ok(Self {
            system,
            truncated,
            ep,
        })
    }
}

/// Apply the effective-potential construction `depth` times. Level 2 treats
/// the truncated system of level 1 as a new coupled problem whose explicit
/// channel is the lowest excited channel.
pub fn recurse_ep<T: Real>(system: &ChannelSystem<T>, depth: u32, opts: EpOptions<T>) -> Result<Vec<EpLevel<T>>> {
    if !(1..=2).contains(&depth) {
        return Err(Error::Unsupported(format!(
            "depth unsupported: {depth} (only 1 and 2 are implemented)"
        )));
    }
    if depth == 2 && system.n_tot() < 3 {
        return Err(Error::InvalidInput(format!(
            "depth 2 needs N_tot ≥ 3, have {}",
            system.n_tot()
        )));
    }
    let mut levels = vec![EpLevel::build(system.clone(), opts)?];
    if depth == 2 {
        levels.push(EpLevel::build(system.drop_lowest_channel()?, opts)?);
    }
    Ok(levels)
}
