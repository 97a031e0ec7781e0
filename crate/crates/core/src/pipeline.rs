//! End-to-end solve: project → truncate → effective potential → roots →
//! states → realisations → probabilities.

use crate::assembly::{reconstruct_all, AssembledState};
use crate::effective::{EpLevel, EpOptions};
use crate::error::Result;
use crate::model::{project_coupling, ChannelSystem, CouplingMatrices, ProblemSpec};
use crate::realizations::{group_realizations, intermediate_density, probabilities, ProbMode, RealizationSet};
use crate::scalar::Real;
use crate::spectrum::{find_roots, SpectrumResult};

#[derive(Clone, Copy, Debug)]
pub struct PipelineOptions<T> {
    pub ep: EpOptions<T>,
    /// Keep couplings between excited channels.
    pub cross_coupling: bool,
    pub pr_threshold: Option<T>,
    pub schmidt_tol: T,
}

impl<T: Real> Default for PipelineOptions<T> {
    fn default() -> Self {
        Self {
            ep: EpOptions::default(),
            cross_coupling: true,
            pr_threshold: None,
            schmidt_tol: T::rel_tol(1e-8, 64.0),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Solution<T> {
    pub spec: ProblemSpec<T>,
    pub couplings: CouplingMatrices<T>,
    pub level: EpLevel<T>,
    pub spectrum: SpectrumResult<T>,
    pub states: Vec<AssembledState<T>>,
    /// Carries probabilities for every [`ProbMode`].
    pub realizations: RealizationSet<T>,
    pub intermediate_density: Vec<T>,
}

impl<T: Real> Solution<T> {
    pub fn system(&self) -> &ChannelSystem<T> {
        &self.level.system
    }
}

/// The channel system a problem reduces to under `opts`.
pub fn channel_system<T: Real>(spec: &ProblemSpec<T>, cross_coupling: bool) -> Result<(CouplingMatrices<T>, ChannelSystem<T>)> {
    let v = project_coupling(&spec.modes, &spec.coupling, &spec.xi_grid)?;
    let v = if cross_coupling { v } else { v.without_cross_couplings() };
    let system = ChannelSystem::from_problem(spec, &v)?;
    Ok((v, system))
}

pub fn solve<T: Real>(spec: &ProblemSpec<T>, opts: &PipelineOptions<T>) -> Result<Solution<T>> {
    let (couplings, system) = channel_system(spec, opts.cross_coupling)?;
    let level = EpLevel::build(system, opts.ep)?;
    let spectrum = find_roots(&level.ep)?;
    let states = reconstruct_all(&spectrum, &level, &spec.modes, &spec.xi_grid)?;
    let mut realizations = group_realizations(&states, spec.xi_grid.points(), opts.pr_threshold)?;
    let rho_int = intermediate_density(&realizations, &states);
    for mode in ProbMode::ALL {
        let alpha = probabilities(&realizations, mode, Some(&rho_int))?;
        realizations.set_probabilities(mode, alpha)?;
    }
    Ok(Solution {
        spec: spec.clone(),
        couplings,
        level,
        spectrum,
        states,
        realizations,
        intermediate_density: rho_int,
    })
}
