//! Reference instances used by the verification runs and the test suites.

use crate::effective::{EffectivePotential, EpOptions};
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::model::{free_modes, Boundary, CouplingSpec, Grid, ModeSource, ProblemSpec};
use crate::rng::SplitMix64;
use crate::scalar::Real;

/// Random instance: bump modes with random level spacing, a random sampled
/// kernel, random external potential and a kinetic term of order one.
pub fn random_problem<T: Real>(n_tot: usize, n_g: usize, rng: &mut SplitMix64) -> Result<ProblemSpec<T>> {
    let xi = Grid::uniform(n_g, T::zero(), T::one(), Boundary::Dirichlet)?;
    let q = Grid::uniform(12, T::zero(), T::one(), Boundary::Dirichlet)?;
    let spacing = rng.uniform(T::lit(0.3), T::lit(1.2));
    let modes = free_modes(
        &ModeSource::GaussianBumps {
            n_tot,
            spacing,
            width_factor: T::lit(1.5),
        },
        &q,
    )?;
    let kernel = Mat::from_fn(q.len(), n_g, |_, _| rng.uniform(T::lit(-1.0), T::lit(0.3)));
    let h = xi.spacing();
    let stiffness = rng.uniform(T::lit(0.5), T::lit(1.5)) * h * h;
    let potential = (0..n_g).map(|_| rng.uniform(T::lit(-1.0), T::one())).collect();
    ProblemSpec::new(xi, modes, CouplingSpec::sampled(kernel), stiffness, potential)
}

/// Free, uncoupled instance: zero potential, `g = 0`.
pub fn zero_coupling_problem<T: Real>(n_tot: usize, n_g: usize) -> Result<ProblemSpec<T>> {
    let xi = Grid::uniform(n_g, T::zero(), T::one(), Boundary::Dirichlet)?;
    let q = Grid::uniform(24, T::zero(), T::one(), Boundary::Dirichlet)?;
    let modes = free_modes(
        &ModeSource::GaussianBumps {
            n_tot,
            spacing: T::lit(0.5),
            width_factor: T::lit(1.5),
        },
        &q,
    )?;
    let h = xi.spacing();
    ProblemSpec::new(
        xi,
        modes,
        CouplingSpec::gaussian(T::zero(), T::lit(0.15)),
        h * h,
        vec![T::zero(); n_g],
    )
}

/// Excited channels with a narrow mode centred at each of `centres`, seen
/// through a flat explicit mode on a periodic medium. Each narrow mode makes
/// a well of depth about `g` in its own channel that binds one state, and
/// the explicit channel only sees these wells through the poles.
fn pole_wells<T: Real>(n_g: usize, g: T, centres: &[f64], eps: &[f64]) -> Result<ProblemSpec<T>> {
    let xi = Grid::uniform(n_g, T::zero(), T::one(), Boundary::Periodic)?;
    let q = Grid::uniform(WELL_Q_POINTS, T::zero(), T::one(), Boundary::Dirichlet)?;
    let bump = |c: f64| -> Vec<T> {
        q.points()
            .iter()
            .map(|&x| {
                let d = x - T::lit(c);
                (-(d * d) / T::lit(2.0 * WELL_MODE_WIDTH * WELL_MODE_WIDTH)).exp()
            })
            .collect()
    };
    let mut phi = vec![vec![T::one(); q.len()]];
    phi.extend(centres.iter().map(|&c| bump(c)));
    let modes = free_modes(
        &ModeSource::Given {
            eps: eps.iter().map(|&e| T::lit(e)).collect(),
            phi,
        },
        &q,
    )?;
    let h = xi.spacing();
    ProblemSpec::new(
        xi,
        modes,
        CouplingSpec::gaussian(g, T::lit(WELL_KERNEL_WIDTH)),
        T::lit(WELL_HOPPING) * h * h,
        vec![T::zero(); n_g],
    )
}

const WELL_Q_POINTS: usize = 801;
const WELL_MODE_WIDTH: f64 = 0.01;
const WELL_KERNEL_WIDTH: f64 = 0.02;
const WELL_HOPPING: f64 = 30.0;

/// Coupling strength at which each well binds exactly one state.
pub const STRONG_WELL_COUPLING: f64 = 60.0;

/// Mirror-image wells at ξ = 1/4 and ξ = 3/4 in two excited channels
/// (levels 2 and 8). `n_g` must be a multiple of 4 so both centres are grid
/// points.
pub fn two_well_problem<T: Real>(n_g: usize, g: T) -> Result<ProblemSpec<T>> {
    if !n_g.is_multiple_of(4) {
        return Err(Error::InvalidInput(format!(
            "two-well instance needs N_g divisible by 4, got {n_g}"
        )));
    }
    pole_wells(n_g, g, &TWO_WELL_CENTRES, &[0.0, 2.0, 8.0])
}

/// Well centres of [`two_well_problem`].
pub const TWO_WELL_CENTRES: [f64; 2] = [0.25, 0.75];

/// One well at ξ = 1/2 in a single excited channel; `n_g` must be even.
pub fn single_well_problem<T: Real>(n_g: usize, g: T) -> Result<ProblemSpec<T>> {
    if !n_g.is_multiple_of(2) {
        return Err(Error::InvalidInput(format!(
            "single-well instance needs an even N_g, got {n_g}"
        )));
    }
    pole_wells(n_g, g, &[0.5], &[0.0, 2.0])
}

/// Hand-built effective potential in which each of `n_channels · n_g`
/// distinct poles is `n_g`-fold degenerate with a full-rank residue, so the
/// root count reaches `n_g (n_channels · n_g + 1)`.
pub fn full_rank_ep<T: Real>(n_g: usize, n_channels: usize, rng: &mut SplitMix64) -> Result<EffectivePotential<T>> {
    let mut h0 = Mat::zeros(n_g, n_g);
    for i in 0..n_g {
        for j in i..n_g {
            let x = rng.uniform(T::lit(-1.0), T::one());
            h0[(i, j)] = x;
            h0[(j, i)] = x;
        }
    }
    let n_poles = n_channels * n_g;
    let mut raw = Vec::with_capacity(n_poles * n_g);
    for k in 0..n_poles {
        let p = T::lit(-3.0) + T::lit(6.0) * (T::from_count(k) + T::lit(0.5)) / T::from_count(n_poles);
        for _ in 0..n_g {
            let w = (0..n_g).map(|_| rng.uniform(T::lit(-0.5), T::lit(0.5))).collect();
            raw.push((p, w));
        }
    }
    EffectivePotential::from_raw_poles(h0, vec![T::zero(); n_g], raw, n_channels, T::zero(), EpOptions::default())
}
