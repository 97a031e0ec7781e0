//! Grouping of eigen-solutions into realisations, their probabilities and
//! the expectation density.
//!
//! States whose ξ-marginal is spread out (participation ratio ≥ τ) form the
//! intermediate realisation. Every other state is keyed by the grid point
//! where its ξ-marginal peaks; each distinct peak is one regular
//! realisation centred there.

use serde::{Deserialize, Serialize};

use crate::assembly::{density, participation_ratio, AssembledState, DensityField};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::{argmax, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbMode {
    /// `α_j = 1 / N_R`.
    Uniform,
    /// `α_j = N_j / N_R`, `N_j` the member count of group `j`.
    Grouped,
    /// `α_j ∝` intermediate-density mass in the cell of centre `j`.
    Born,
}

impl ProbMode {
    pub const ALL: [ProbMode; 3] = [ProbMode::Uniform, ProbMode::Grouped, ProbMode::Born];

    pub fn name(self) -> &'static str {
        match self {
            ProbMode::Uniform => "uniform",
            ProbMode::Grouped => "grouped",
            ProbMode::Born => "born",
        }
    }
}

impl std::str::FromStr for ProbMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(ProbMode::Uniform),
            "grouped" => Ok(ProbMode::Grouped),
            "born" => Ok(ProbMode::Born),
            other => Err(Error::config("prob_mode", format!("unknown probability mode `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Group<T> {
    pub center_index: usize,
    pub center_coord: T,
    pub members: Vec<usize>,
}

/// One outcome of a reduction event.
#[derive(Clone, Debug, PartialEq)]
pub struct Realization<T> {
    pub id: usize,
    pub center_index: usize,
    pub center_coord: T,
    pub members: Vec<usize>,
    pub intermediate: bool,
}

#[derive(Clone, Debug)]
pub struct RealizationSet<T> {
    pub groups: Vec<Group<T>>,
    pub intermediate: Vec<usize>,
    pub n_states: usize,
    pub pr_threshold: T,
    pub participation: Vec<T>,
    pub centers_of_states: Vec<usize>,
    pub xi_points: Vec<T>,
    pub xi_weights: Vec<T>,
    /// Peak of the mean intermediate marginal; the centre used when no
    /// state is localized.
    pub intermediate_center: usize,
    probabilities: Vec<(ProbMode, Vec<T>)>,
}

impl<T: Real> RealizationSet<T> {
    /// Number of realisations `N_R`: the regular groups, or 1 when every
    /// state is delocalized.
    pub fn n_realizations(&self) -> usize {
        self.groups.len().max(1)
    }

    pub fn is_delocalized(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn realizations(&self) -> Vec<Realization<T>> {
        if self.groups.is_empty() {
            return vec![Realization {
                id: 0,
                center_index: self.intermediate_center,
                center_coord: self.xi_points[self.intermediate_center],
                members: self.intermediate.clone(),
                intermediate: true,
            }];
        }
        self.groups
            .iter()
            .enumerate()
            .map(|(id, g)| Realization {
                id,
                center_index: g.center_index,
                center_coord: g.center_coord,
                members: g.members.clone(),
                intermediate: false,
            })
            .collect()
    }

    /// Member counts `N_j` per realisation.
    pub fn group_counts(&self) -> Vec<usize> {
        self.realizations().iter().map(|r| r.members.len()).collect()
    }

    /// Nearest-centre partition of the ξ grid: the realisation id owning
    /// each grid point. Ties go to the lower id.
    pub fn cells(&self) -> Vec<usize> {
        let centres: Vec<T> = self.realizations().iter().map(|r| r.center_coord).collect();
        self.xi_points
            .iter()
            .map(|&x| {
                let mut best = 0;
                for (j, &c) in centres.iter().enumerate() {
                    if (x - c).abs() < (x - centres[best]).abs() {
                        best = j;
                    }
                }
                best
            })
            .collect()
    }

    /// Store `alpha` for `mode` after checking it is a distribution over
    /// the realisations.
    pub fn set_probabilities(&mut self, mode: ProbMode, alpha: Vec<T>) -> Result<()> {
        if alpha.len() != self.n_realizations() {
            return Err(Error::Shape(format!(
                "{} probabilities for {} realisations",
                alpha.len(),
                self.n_realizations()
            )));
        }
        let total: T = alpha.iter().copied().sum();
        if alpha.iter().any(|&a| a < T::zero()) || (total - T::one()).abs() > T::rel_tol(1e-12, 16.0) {
            return Err(Error::InvalidInput(format!("probabilities sum to {total}")));
        }
        self.probabilities.retain(|(m, _)| *m != mode);
        self.probabilities.push((mode, alpha));
        Ok(())
    }

    pub fn probabilities_for(&self, mode: ProbMode) -> Option<&[T]> {
        self.probabilities
            .iter()
            .find(|(m, _)| *m == mode)
            .map(|(_, a)| a.as_slice())
    }

    /// Every state index in exactly one group or in the intermediate set.
    pub fn is_partition(&self) -> bool {
        let mut seen = vec![0usize; self.n_states];
        for i in self.groups.iter().flat_map(|g| &g.members).chain(&self.intermediate) {
            if *i >= self.n_states {
                return false;
            }
            seen[*i] += 1;
        }
        seen.iter().all(|&c| c == 1)
    }

    pub fn to_dump(&self) -> RealizationDump {
        RealizationDump {
            n_realizations: self.n_realizations(),
            delocalized: self.is_delocalized(),
            pr_threshold: self.pr_threshold.as_f64(),
            realizations: self
                .realizations()
                .into_iter()
                .map(|r| RealizationEntry {
                    id: r.id,
                    center_index: r.center_index,
                    center_coord: r.center_coord.as_f64(),
                    members: r.members,
                    intermediate: r.intermediate,
                })
                .collect(),
            intermediate: self.intermediate.clone(),
            participation: self.participation.iter().map(|x| x.as_f64()).collect(),
            probabilities: self
                .probabilities
                .iter()
                .map(|(m, a)| (m.name().to_string(), a.iter().map(|x| x.as_f64()).collect()))
                .collect(),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RealizationDump {
    pub n_realizations: usize,
    pub delocalized: bool,
    pub pr_threshold: f64,
    pub realizations: Vec<RealizationEntry>,
    pub intermediate: Vec<usize>,
    pub participation: Vec<f64>,
    pub probabilities: std::collections::BTreeMap<String, Vec<f64>>,
}

#[derive(Clone, Debug, Serialize)]
pub struct RealizationEntry {
    pub id: usize,
    pub center_index: usize,
    pub center_coord: f64,
    pub members: Vec<usize>,
    pub intermediate: bool,
}

/// Default participation-ratio threshold: `N_g / 3`, or the midpoint of
/// `(1, N_g)` on grids too small for that.
pub fn default_pr_threshold<T: Real>(n_g: usize) -> T {
    let third = T::from_count(n_g) / T::lit(3.0);
    if third > T::one() {
        third
    } else {
        (T::one() + T::from_count(n_g)) * T::lit(0.5)
    }
}

/// Group normalized states into realisations.
pub fn group_realizations<T: Real>(
    states: &[AssembledState<T>],
    xi_points: &[T],
    pr_threshold: Option<T>,
) -> Result<RealizationSet<T>> {
    if states.is_empty() {
        return Err(Error::InvalidInput("no states to group".into()));
    }
    let ng = xi_points.len();
    let tau = pr_threshold.unwrap_or_else(|| default_pr_threshold(ng));
    if !(tau > T::one() && tau < T::from_count(ng)) {
        return Err(Error::InvalidInput(format!("τ = {tau} must lie in (1, {ng})")));
    }
    let mut groups: Vec<Group<T>> = Vec::new();
    let mut intermediate = Vec::new();
    let mut participation = Vec::with_capacity(states.len());
    let mut centers_of_states = Vec::with_capacity(states.len());
    let mut mean_marginal = vec![T::zero(); ng];
    for (i, s) in states.iter().enumerate() {
        let marginal = normalize(density(s).marginal_xi)
            .map_err(|_| Error::Degenerate(format!("state {i} has no density")))?;
        let pr = participation_ratio(&marginal)?;
        participation.push(pr);
        let peak = argmax(&marginal).expect("nonempty grid");
        centers_of_states.push(peak);
        if pr >= tau {
            intermediate.push(i);
            mean_marginal.iter_mut().zip(&marginal).for_each(|(m, &x)| *m += x);
            continue;
        }
        match groups.iter_mut().find(|g| g.center_index == peak) {
            Some(g) => g.members.push(i),
            None => groups.push(Group {
                center_index: peak,
                center_coord: xi_points[peak],
                members: vec![i],
            }),
        }
    }
    groups.sort_by_key(|g| g.center_index);
    let intermediate_center = argmax(&mean_marginal).unwrap_or(0);
    Ok(RealizationSet {
        groups,
        intermediate,
        n_states: states.len(),
        pr_threshold: tau,
        participation,
        centers_of_states,
        xi_points: xi_points.to_vec(),
        xi_weights: states[0].xi_weights.clone(),
        intermediate_center,
        probabilities: Vec::new(),
    })
}

/// Realisation probabilities under `mode`. Born mode needs the intermediate
/// density `ρ_int(ξ)` (per unit ξ, integrated with the grid weights).
pub fn probabilities<T: Real>(
    rs: &RealizationSet<T>,
    mode: ProbMode,
    intermediate_density: Option<&[T]>,
) -> Result<Vec<T>> {
    let n = rs.n_realizations();
    match mode {
        ProbMode::Uniform => Ok(vec![T::one() / T::from_count(n); n]),
        ProbMode::Grouped => {
            let counts = rs.group_counts();
            let total = T::from_count(counts.iter().sum());
            Ok(counts.iter().map(|&c| T::from_count(c) / total).collect())
        }
        ProbMode::Born => {
            let rho = intermediate_density
                .ok_or_else(|| Error::InvalidInput("born mode needs an intermediate density".into()))?;
            if rho.len() != rs.xi_points.len() {
                return Err(Error::Shape("intermediate density length differs from N_g".into()));
            }
            let masses = cell_masses(rs, |x| rs.xi_weights[x] * rho[x]);
            normalize(masses)
        }
    }
}

fn cell_masses<T: Real>(rs: &RealizationSet<T>, f: impl Fn(usize) -> T) -> Vec<T> {
    let mut m = vec![T::zero(); rs.n_realizations()];
    for (x, &j) in rs.cells().iter().enumerate() {
        m[j] += f(x);
    }
    m
}

fn normalize<T: Real>(v: Vec<T>) -> Result<Vec<T>> {
    let total: T = v.iter().copied().sum();
    if !(total > T::zero()) {
        return Err(Error::Degenerate("all cell weights vanish".into()));
    }
    Ok(v.into_iter().map(|x| x / total).collect())
}

/// Matching amplitudes of the intermediate state onto the realisation cells.
#[derive(Clone, Debug)]
pub struct BornMatch<T> {
    /// `C_j = ⟨u_j, ψ⟩` with `u_j` the normalized restriction of `ψ` to
    /// cell `j`, so `C_j = ‖ψ|_cell j‖ ≥ 0`.
    pub amplitudes: Vec<T>,
    pub alpha: Vec<T>,
}

pub fn born_match<T: Real>(rs: &RealizationSet<T>, psi0_intermediate: &[T]) -> Result<BornMatch<T>> {
    if psi0_intermediate.len() != rs.xi_points.len() {
        return Err(Error::Shape("intermediate state length differs from N_g".into()));
    }
    let sq = cell_masses(rs, |x| rs.xi_weights[x] * psi0_intermediate[x] * psi0_intermediate[x]);
    let amplitudes: Vec<T> = sq.iter().map(|&m| m.sqrt()).collect();
    if amplitudes.iter().all(|&c| c == T::zero()) {
        return Err(Error::Degenerate("all matching amplitudes vanish".into()));
    }
    let alpha = normalize(amplitudes.iter().map(|&c| c * c).collect())?;
    Ok(BornMatch { amplitudes, alpha })
}

/// Mean ξ-density `Σ_q w_q ρ(q, ξ)` of the intermediate states; homogeneous
/// when there are none.
pub fn intermediate_density<T: Real>(rs: &RealizationSet<T>, states: &[AssembledState<T>]) -> Vec<T> {
    let ng = rs.xi_points.len();
    if rs.intermediate.is_empty() {
        let length: T = rs.xi_weights.iter().copied().sum();
        return vec![length.recip(); ng];
    }
    let mut out = vec![T::zero(); ng];
    for &i in &rs.intermediate {
        let d = density(&states[i]);
        for x in 0..ng {
            out[x] += d.marginal_xi[x] / rs.xi_weights[x];
        }
    }
    let k = T::from_count(rs.intermediate.len());
    out.iter_mut().for_each(|v| *v /= k);
    out
}

#[derive(Clone, Debug)]
pub struct MixedDensity<T> {
    pub rho_ex: DensityField<T>,
    pub mode: ProbMode,
    /// Per-realisation mean densities `ρ_j`.
    pub components: Vec<DensityField<T>>,
    /// Mean density of the intermediate states, reported separately.
    pub intermediate: Option<DensityField<T>>,
}

/// Mean density over a set of states.
pub fn mean_density<T: Real>(states: &[AssembledState<T>], members: &[usize]) -> Result<DensityField<T>> {
    let first = members
        .first()
        .ok_or_else(|| Error::InvalidInput("empty member list".into()))?;
    let s0 = &states[*first];
    let mut rho: Mat<T> = Mat::zeros(s0.full.rows(), s0.full.cols());
    for &i in members {
        let d = density(&states[i]);
        for q in 0..rho.rows() {
            for x in 0..rho.cols() {
                rho[(q, x)] += d.rho[(q, x)];
            }
        }
    }
    let k = T::from_count(members.len()).recip();
    let rho = Mat::from_fn(rho.rows(), rho.cols(), |q, x| rho[(q, x)] * k);
    Ok(DensityField::from_rho(rho, &s0.q_weights, &s0.xi_weights))
}

/// `ρ_ex = Σ_j α_j ρ_j` with the probabilities stored for `mode`.
pub fn mix_density<T: Real>(rs: &RealizationSet<T>, states: &[AssembledState<T>], mode: ProbMode) -> Result<MixedDensity<T>> {
    let alpha = rs.probabilities_for(mode).ok_or_else(|| {
        Error::InvalidInput(format!("no probabilities stored for mode `{}`", mode.name()))
    })?;
    if states.len() != rs.n_states {
        return Err(Error::Shape("state list differs from the grouped states".into()));
    }
    let components = rs
        .realizations()
        .iter()
        .map(|r| mean_density(states, &r.members))
        .collect::<Result<Vec<_>>>()?;
    let s0 = &states[0];
    let (nq, ng) = (s0.full.rows(), s0.full.cols());
    let rho = Mat::from_fn(nq, ng, |q, x| {
        components
            .iter()
            .zip(alpha)
            .map(|(c, &a)| a * c.rho[(q, x)])
            .sum()
    });
    let intermediate = if rs.is_delocalized() || rs.intermediate.is_empty() {
        None
    } else {
        Some(mean_density(states, &rs.intermediate)?)
    };
    Ok(MixedDensity {
        rho_ex: DensityField::from_rho(rho, &s0.q_weights, &s0.xi_weights),
        mode,
        components,
        intermediate,
    })
}
