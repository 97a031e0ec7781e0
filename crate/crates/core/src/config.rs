//! JSON run configuration and its validation into a [`ProblemSpec`].
//!
//! ```json
//! {
//!   "grid":     { "n_g": 16, "span": [0, 1], "boundary": "dirichlet" },
//!   "modes":    { "kind": "gaussian_bumps", "n_tot": 3, "spacing": 0.5,
//!                 "width_factor": 1.5, "q_points": 48, "q_span": [0, 1] },
//!   "coupling": { "kind": "gaussian_attractive", "g": 1.0, "sigma": 0.15 },
//!   "hg":       { "stiffness": 0.001, "potential": null },
//!   "run":      { "seed": 0, "cycles": 10000, "prob_mode": "uniform" }
//! }
//! ```
//!
//! Unknown keys anywhere are rejected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::model::{
    free_modes, Boundary, CouplingKind, CouplingSpec, Grid, ModeSource, ProblemSpec,
};
use crate::realizations::ProbMode;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub grid: GridConfig,
    pub modes: ModesConfig,
    pub coupling: CouplingConfig,
    #[serde(default)]
    pub hg: HgConfig,
    #[serde(default)]
    pub run: RunConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub n_g: usize,
    #[serde(default = "unit_span")]
    pub span: [f64; 2],
    #[serde(default = "dirichlet")]
    pub boundary: Boundary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeKind {
    GaussianBumps,
    Given,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModesConfig {
    pub kind: ModeKind,
    /// Number of modes for `gaussian_bumps`.
    #[serde(default)]
    pub n_tot: Option<usize>,
    /// Level spacing `Δε` for `gaussian_bumps`.
    #[serde(default)]
    pub spacing: Option<f64>,
    #[serde(default)]
    pub width_factor: Option<f64>,
    pub q_points: usize,
    #[serde(default = "unit_span")]
    pub q_span: [f64; 2],
    #[serde(default = "dirichlet")]
    pub q_boundary: Boundary,
    /// Declared spectrum for `given`.
    #[serde(default)]
    pub eps: Option<Vec<f64>>,
    /// Declared samples for `given`, one row per mode.
    #[serde(default)]
    pub phi: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    pub kind: CouplingKind,
    #[serde(default = "one")]
    pub g: f64,
    #[serde(default = "one")]
    pub sigma: f64,
    /// Kernel values indexed `[q][ξ]` for `custom_sampled`.
    #[serde(default)]
    pub samples: Option<Vec<Vec<f64>>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HgConfig {
    #[serde(default = "one")]
    pub stiffness: f64,
    /// External potential samples on the ξ grid; zero when absent.
    #[serde(default)]
    pub potential: Option<Vec<f64>>,
}

impl Default for HgConfig {
    fn default() -> Self {
        Self {
            stiffness: 1.0,
            potential: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_cycles")]
    pub cycles: u64,
    #[serde(default = "default_mode")]
    pub prob_mode: ProbMode,
    #[serde(default = "default_depth")]
    pub depth: u32,
    /// Participation-ratio threshold τ; `N_g / 3` when absent.
    #[serde(default)]
    pub pr_threshold: Option<f64>,
    /// Keep the couplings between excited channels in the truncated system.
    #[serde(default = "yes")]
    pub cross_coupling: bool,
    /// Pole merge tolerance relative to the spectral span.
    #[serde(default = "default_merge")]
    pub pole_merge_rel: f64,
    #[serde(default = "default_schmidt")]
    pub schmidt_tol: f64,
    /// Extra random instances checked by `verify`.
    #[serde(default)]
    pub random_instances: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            cycles: default_cycles(),
            prob_mode: default_mode(),
            depth: default_depth(),
            pr_threshold: None,
            cross_coupling: true,
            pole_merge_rel: default_merge(),
            schmidt_tol: default_schmidt(),
            random_instances: 0,
        }
    }
}

fn unit_span() -> [f64; 2] {
    [0.0, 1.0]
}
fn dirichlet() -> Boundary {
    Boundary::Dirichlet
}
fn one() -> f64 {
    1.0
}
fn yes() -> bool {
    true
}
fn default_cycles() -> u64 {
    10_000
}
fn default_mode() -> ProbMode {
    ProbMode::Uniform
}
fn default_depth() -> u32 {
    1
}
fn default_merge() -> f64 {
    1e-8
}
fn default_schmidt() -> f64 {
    1e-8
}

/// Parse a JSON config document. Errors carry the JSON path of the
/// offending key.
pub fn parse_config(json: &str) -> Result<Config> {
    let de = &mut serde_json::Deserializer::from_str(json);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::config(path, e.into_inner().to_string())
    })
}

/// Validate a config and build the problem it describes.
pub fn build_problem<T: Real>(config: &Config) -> Result<ProblemSpec<T>> {
    let g = &config.grid;
    if g.n_g < 2 {
        return Err(Error::config("grid.n_g", format!("N_g must be ≥ 2, got {}", g.n_g)));
    }
    if !(g.span[0] < g.span[1]) {
        return Err(Error::config("grid.span", "span must be [lo, hi] with lo < hi"));
    }
    let xi_grid = Grid::uniform(g.n_g, T::lit(g.span[0]), T::lit(g.span[1]), g.boundary)
        .map_err(|e| Error::config("grid", e.to_string()))?;

    let m = &config.modes;
    if m.q_points < 2 {
        return Err(Error::config(
            "modes.q_points",
            format!("q grid needs ≥ 2 points, got {}", m.q_points),
        ));
    }
    if !(m.q_span[0] < m.q_span[1]) {
        return Err(Error::config("modes.q_span", "span must be [lo, hi] with lo < hi"));
    }
    let q_grid = Grid::uniform(m.q_points, T::lit(m.q_span[0]), T::lit(m.q_span[1]), m.q_boundary)
        .map_err(|e| Error::config("modes", e.to_string()))?;
    let source = match m.kind {
        ModeKind::GaussianBumps => {
            let n_tot = m
                .n_tot
                .ok_or_else(|| Error::config("modes.n_tot", "required for gaussian_bumps"))?;
            if n_tot < 2 {
                return Err(Error::config("modes.n_tot", format!("N_tot must be ≥ 2, got {n_tot}")));
            }
            let spacing = m.spacing.unwrap_or(1.0);
            if spacing < 0.0 {
                return Err(Error::config("modes.spacing", "must be ≥ 0"));
            }
            let width_factor = m.width_factor.unwrap_or(1.5);
            if width_factor <= 0.0 {
                return Err(Error::config("modes.width_factor", "must be > 0"));
            }
            ModeSource::GaussianBumps {
                n_tot,
                spacing: T::lit(spacing),
                width_factor: T::lit(width_factor),
            }
        }
        ModeKind::Given => {
            let eps = m
                .eps
                .as_ref()
                .ok_or_else(|| Error::config("modes.eps", "required for given modes"))?;
            let phi = m
                .phi
                .as_ref()
                .ok_or_else(|| Error::config("modes.phi", "required for given modes"))?;
            ModeSource::Given {
                eps: eps.iter().map(|&x| T::lit(x)).collect(),
                phi: phi
                    .iter()
                    .map(|r| r.iter().map(|&x| T::lit(x)).collect())
                    .collect(),
            }
        }
    };
    let modes = free_modes(&source, &q_grid)?;

    let c = &config.coupling;
    if c.g < 0.0 {
        return Err(Error::config("coupling.g", "must be ≥ 0"));
    }
    if c.sigma <= 0.0 {
        return Err(Error::config("coupling.sigma", "must be > 0"));
    }
    let samples = match (c.kind, &c.samples) {
        (CouplingKind::CustomSampled, None) => {
            return Err(Error::config("coupling.samples", "required for custom_sampled"))
        }
        (CouplingKind::CustomSampled, Some(rows)) => {
            let rows: Vec<Vec<T>> = rows
                .iter()
                .map(|r| r.iter().map(|&x| T::lit(x)).collect())
                .collect();
            let mat = Mat::from_rows(&rows).map_err(|e| Error::config("coupling.samples", e.to_string()))?;
            if mat.rows() != m.q_points || mat.cols() != g.n_g {
                return Err(Error::config(
                    "coupling.samples",
                    format!(
                        "expected {}x{} (q_points x n_g), got {}x{}",
                        m.q_points,
                        g.n_g,
                        mat.rows(),
                        mat.cols()
                    ),
                ));
            }
            Some(mat)
        }
        (_, _) => None,
    };
    let coupling = CouplingSpec {
        g: T::lit(c.g),
        sigma: T::lit(c.sigma),
        kind: c.kind,
        samples,
    };

    let h = &config.hg;
    if h.stiffness < 0.0 {
        return Err(Error::config("hg.stiffness", "must be ≥ 0"));
    }
    let potential = match &h.potential {
        Some(p) if p.len() != g.n_g => {
            return Err(Error::config(
                "hg.potential",
                format!("{} samples for N_g = {}", p.len(), g.n_g),
            ))
        }
        Some(p) => p.iter().map(|&x| T::lit(x)).collect(),
        None => vec![T::zero(); g.n_g],
    };
    let r = &config.run;
    if let Some(tau) = r.pr_threshold {
        if !(tau > 1.0 && tau < g.n_g as f64) {
            return Err(Error::config("run.pr_threshold", "τ must lie in (1, N_g)"));
        }
    }
    if !(1..=2).contains(&r.depth) {
        return Err(Error::config("run.depth", "depth must be 1 or 2"));
    }
    ProblemSpec::new(xi_grid, modes, coupling, T::lit(h.stiffness), potential)
}
