//! Seeded simulation of the reduction–extension cycle.
//!
//! Each tick is one full cycle: the system passes through the intermediate
//! realisation and reduces to one regular realisation drawn independently
//! with the stored probabilities. Draw `t` uses SplitMix64 output number `t`
//! of the seed, so a trajectory is a pure function of its inputs.

use crate::assembly::DensityField;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::realizations::{ProbMode, RealizationSet};
use crate::rng::{categorical_from_cdf, splitmix_at, unit_f64};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct BeatEvent<T> {
    pub tick: u64,
    pub realization_id: usize,
    pub center_index: usize,
    pub center_coord: T,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BeatTrajectory<T> {
    pub seed: u64,
    pub mode: ProbMode,
    pub alpha: Vec<T>,
    pub events: Vec<BeatEvent<T>>,
    pub empirical: Vec<f64>,
}

impl<T: Real> BeatTrajectory<T> {
    pub fn n_realizations(&self) -> usize {
        self.alpha.len()
    }

    pub fn ids(&self) -> Vec<usize> {
        self.events.iter().map(|e| e.realization_id).collect()
    }
}

pub fn simulate_beat<T: Real>(rs: &RealizationSet<T>, cycles: u64, seed: u64, mode: ProbMode) -> Result<BeatTrajectory<T>> {
    if cycles == 0 {
        return Err(Error::InvalidInput("the beat needs at least one cycle".into()));
    }
    if rs.n_states == 0 {
        return Err(Error::InvalidInput("empty realisation set".into()));
    }
    let alpha = rs
        .probabilities_for(mode)
        .ok_or_else(|| Error::InvalidInput(format!("no probabilities stored for mode `{}`", mode.name())))?
        .to_vec();
    let realizations = rs.realizations();
    let cdf: Vec<T> = alpha
        .iter()
        .scan(T::zero(), |acc, &a| {
            *acc += a;
            Some(*acc)
        })
        .collect();
    let events: Vec<BeatEvent<T>> = (0..cycles)
        .map(|tick| {
            let j = categorical_from_cdf(&cdf, unit_f64(splitmix_at(seed, tick)));
            let r = &realizations[j];
            BeatEvent {
                tick,
                realization_id: j,
                center_index: r.center_index,
                center_coord: r.center_coord,
            }
        })
        .collect();
    let mut traj = BeatTrajectory {
        seed,
        mode,
        alpha,
        events,
        empirical: Vec::new(),
    };
    traj.empirical = empirical_freqs(&traj);
    Ok(traj)
}

/// `α̂_j = count_j / T`.
pub fn empirical_freqs<T: Real>(traj: &BeatTrajectory<T>) -> Vec<f64> {
    let mut counts = vec![0u64; traj.n_realizations()];
    for e in &traj.events {
        counts[e.realization_id] += 1;
    }
    let total = traj.events.len().max(1) as f64;
    counts.into_iter().map(|c| c as f64 / total).collect()
}

/// Density accumulated along the trajectory: `Σ_j α̂_j ρ_j`.
pub fn visited_density<T: Real>(traj: &BeatTrajectory<T>, components: &[DensityField<T>]) -> Result<Mat<T>> {
    if components.len() != traj.n_realizations() {
        return Err(Error::Shape("one density per realisation is required".into()));
    }
    let (nq, ng) = (components[0].rho.rows(), components[0].rho.cols());
    Ok(Mat::from_fn(nq, ng, |q, x| {
        components
            .iter()
            .zip(&traj.empirical)
            .map(|(c, &a)| T::lit(a) * c.rho[(q, x)])
            .sum()
    }))
}
