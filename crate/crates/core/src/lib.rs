//! Unreduced effective-potential treatment of two coupled fields.
//!
//! A measured field expanded in free modes interacts with a measuring
//! medium on a 1-D grid. Eliminating every mode except the lowest gives an
//! energy-dependent, pole-structured effective potential; all roots of its
//! characteristic function are found exactly, rebuilt into entangled
//! two-field states, grouped into realisations and sampled as a seeded
//! sequence of reduction events.
//!
//! Every numerical type is generic over [`Real`] (`f32` or `f64`); the
//! `*64` aliases below are what the command-line runner uses.

// `!(x > 0.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod assembly;
pub mod beat;
pub mod config;
pub mod effective;
pub mod error;
pub mod fixtures;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod pipeline;
pub mod realizations;
pub mod rng;
pub mod scalar;
pub mod spectrum;
pub mod truncated;

pub use error::{Error, Result};
pub use scalar::Real;

pub use assembly::{complexity_measure, density, participation_ratio, schmidt_rank, AssembledState, DensityField};
pub use beat::{empirical_freqs, simulate_beat, BeatEvent, BeatTrajectory};
pub use config::{build_problem, parse_config, Config};
pub use effective::{
    assemble_ep, characteristic, ep_well_alignment, eval_ep, recurse_ep, EffectivePotential, EpLevel, EpOptions,
};
pub use linalg::{diagonalize_sym, Mat};
pub use model::{
    free_modes, hamiltonian_g, project_coupling, Boundary, ChannelSystem, CouplingMatrices, CouplingSpec, Grid,
    ModeBasis, ProblemSpec,
};
pub use oracle::{compare_spectra, direct_spectrum, ComparisonReport};
pub use pipeline::{solve, PipelineOptions, Solution};
pub use realizations::{born_match, group_realizations, mix_density, probabilities, ProbMode, RealizationSet};
pub use spectrum::{count_accounting, find_roots, linearize_ep, AccountingReport, SpectrumResult};
pub use truncated::{build_truncated, solve_truncated, TruncatedSolution};

pub type Grid64 = Grid<f64>;
pub type ModeBasis64 = ModeBasis<f64>;
pub type ProblemSpec64 = ProblemSpec<f64>;
pub type CouplingMatrices64 = CouplingMatrices<f64>;
pub type ChannelSystem64 = ChannelSystem<f64>;
pub type EffectivePotential64 = EffectivePotential<f64>;
pub type SpectrumResult64 = SpectrumResult<f64>;
pub type AssembledState64 = AssembledState<f64>;
pub type RealizationSet64 = RealizationSet<f64>;
pub type BeatTrajectory64 = BeatTrajectory<f64>;
pub type Solution64 = Solution<f64>;

pub type ProblemSpec32 = ProblemSpec<f32>;
pub type EffectivePotential32 = EffectivePotential<f32>;
pub type SpectrumResult32 = SpectrumResult<f32>;
