use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use protofield_core::config::RunConfig;
use protofield_core::effective::{EpDump, EpLevel};
use protofield_core::linalg::diagonalize_sym;
use protofield_core::spectrum::{Counts, ExcludedRoot};
use protofield_core::{
    build_problem, build_truncated, complexity_measure, compare_spectra, density, find_roots, mix_density, parse_config,
    recurse_ep, schmidt_rank, simulate_beat, solve, ComparisonReport, Config, PipelineOptions, ProbMode, Solution64,
};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::failure::{core, io, Failure, Kind};
use crate::output::{fmt_f64, OutDir};

pub type Flags = BTreeMap<String, String>;

/// Run settings given on the command line; each one overrides the config.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub cycles: Option<u64>,
    pub prob_mode: Option<ProbMode>,
    pub depth: Option<u32>,
}

pub struct Loaded {
    pub path: PathBuf,
    pub sha256: String,
    pub config: Config,
}

pub fn load(path: &Path, ov: &Overrides) -> Result<Loaded, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::new("config", Kind::Config, format!("cannot read {}: {e}", path.display())))?;
    let sha256 = hex::encode(Sha256::digest(text.as_bytes()));
    let mut config = parse_config(&text).map_err(core("config"))?;
    let run = &mut config.run;
    if let Some(s) = ov.seed {
        run.seed = s;
    }
    if let Some(c) = ov.cycles {
        run.cycles = c;
    }
    if let Some(m) = ov.prob_mode {
        run.prob_mode = m;
    }
    if let Some(d) = ov.depth {
        run.depth = d;
    }
    if run.cycles == 0 {
        return Err(Failure::new("config", Kind::Config, "run.cycles: at least one cycle is required"));
    }
    if !(1..=2).contains(&run.depth) {
        return Err(Failure::new("config", Kind::Config, "run.depth: depth must be 1 or 2"));
    }
    if !(run.pole_merge_rel > 0.0) {
        return Err(Failure::new("config", Kind::Config, "run.pole_merge_rel: must be > 0"));
    }
    if !(run.schmidt_tol > 0.0 && run.schmidt_tol < 1.0) {
        return Err(Failure::new("config", Kind::Config, "run.schmidt_tol: must lie in (0, 1)"));
    }
    Ok(Loaded {
        path: path.to_path_buf(),
        sha256,
        config,
    })
}

pub fn pipeline_options(run: &RunConfig) -> PipelineOptions<f64> {
    let mut o = PipelineOptions::default();
    o.ep.merge_rel = run.pole_merge_rel;
    o.cross_coupling = run.cross_coupling;
    o.pr_threshold = run.pr_threshold;
    o.schmidt_tol = run.schmidt_tol;
    o
}

pub fn solve_config(config: &Config) -> Result<Solution64, Failure> {
    let spec = build_problem::<f64>(config).map_err(core("config"))?;
    solve(&spec, &pipeline_options(&config.run)).map_err(core("solve"))
}

#[derive(Serialize)]
struct SpectrumDump<'a> {
    cross_coupling: bool,
    eps0: f64,
    roots: &'a [f64],
    energies: &'a [f64],
    residuals: &'a [f64],
    decoupled_poles: &'a [f64],
    decoupled_energies: Vec<f64>,
    excluded: &'a [ExcludedRoot],
    counts: &'a Counts,
}

#[derive(Serialize)]
struct StateEntry<'a> {
    root_index: usize,
    eta: f64,
    energy: f64,
    norm_sq: f64,
    tail_weight: f64,
    participation: f64,
    schmidt_rank: usize,
    center_index: usize,
    marginal_xi: Vec<f64>,
    psi0: &'a [f64],
    tails: &'a [Vec<f64>],
}

#[derive(Serialize)]
struct RealizationsDump {
    #[serde(flatten)]
    set: protofield_core::realizations::RealizationDump,
    complexity_measure: f64,
    selected_mode: &'static str,
    intermediate_density: Vec<f64>,
}

/// spectrum, EP, states, realisations and density tables.
pub fn write_solution(sol: &Solution64, run: &RunConfig, out: &mut OutDir) -> Result<(), Failure> {
    let sr = &sol.spectrum;
    let eps0 = sol.level.ep.eps0;
    out.json(
        "spectrum.json",
        &SpectrumDump {
            cross_coupling: run.cross_coupling,
            eps0,
            roots: &sr.roots,
            energies: &sr.energies,
            residuals: &sr.residuals,
            decoupled_poles: &sr.decoupled_poles,
            decoupled_energies: sr.decoupled_poles.iter().map(|p| p + eps0).collect(),
            excluded: &sr.excluded,
            counts: &sr.counts,
        },
    )
    .map_err(io("write spectrum"))?;
    out.json("ep.json", &sol.level.ep.to_dump()).map_err(io("write ep"))?;

    let rs = &sol.realizations;
    let states = sol
        .states
        .iter()
        .enumerate()
        .map(|(i, st)| {
            Ok(StateEntry {
                root_index: st.root_index,
                eta: st.eta,
                energy: st.energy,
                norm_sq: st.norm_sq(),
                tail_weight: st.tail_weight(),
                participation: rs.participation[i],
                schmidt_rank: schmidt_rank(st, run.schmidt_tol).map_err(core("states"))?,
                center_index: rs.centers_of_states[i],
                marginal_xi: density(st).marginal_xi,
                psi0: &st.psi0,
                tails: &st.tails,
            })
        })
        .collect::<Result<Vec<_>, Failure>>()?;
    out.json("states.json", &states).map_err(io("write states"))?;

    let complexity = complexity_measure::<f64>(rs.n_realizations()).map_err(core("realizations"))?;
    out.json(
        "realizations.json",
        &RealizationsDump {
            set: rs.to_dump(),
            complexity_measure: complexity,
            selected_mode: run.prob_mode.name(),
            intermediate_density: sol.intermediate_density.clone(),
        },
    )
    .map_err(io("write realizations"))?;

    let mix = mix_density(rs, &sol.states, run.prob_mode).map_err(core("density"))?;
    let q = sol.spec.modes.q_grid.points();
    let xi = sol.spec.xi_grid.points();
    for (r, comp) in rs.realizations().iter().zip(&mix.components) {
        density_csv(out, &format!("density_realization_{}.csv", r.id), q, xi, &comp.rho)?;
    }
    density_csv(out, "density_mixed.csv", q, xi, &mix.rho_ex.rho)
}

/// One row per ξ; the header carries the q coordinates.
fn density_csv(
    out: &mut OutDir,
    name: &str,
    q: &[f64],
    xi: &[f64],
    rho: &protofield_core::Mat<f64>,
) -> Result<(), Failure> {
    let mut header = vec!["xi/q".to_string()];
    header.extend(q.iter().map(|&x| fmt_f64(x)));
    let rows = xi.iter().enumerate().map(|(x, &c)| {
        let mut row = vec![fmt_f64(c)];
        row.extend((0..q.len()).map(|k| fmt_f64(rho[(k, x)])));
        row
    });
    out.csv(name, &header, rows).map_err(io("write density"))
}

#[derive(Serialize)]
struct BeatDump<'a> {
    seed: u64,
    mode: &'static str,
    cycles: u64,
    alpha: &'a [f64],
    empirical: &'a [f64],
    within_three_sigma: Vec<bool>,
}

pub fn write_beat(sol: &Solution64, run: &RunConfig, out: &mut OutDir, flags: &mut Flags) -> Result<(), Failure> {
    if sol.realizations.n_realizations() == 0 {
        flags.insert("beat".into(), "not run".into());
        return Ok(());
    }
    let traj = simulate_beat(&sol.realizations, run.cycles, run.seed, run.prob_mode).map_err(core("beat"))?;
    let header: Vec<String> = ["tick", "realization_id", "center_index", "center_coord"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows = traj.events.iter().map(|e| {
        vec![
            e.tick.to_string(),
            e.realization_id.to_string(),
            e.center_index.to_string(),
            fmt_f64(e.center_coord),
        ]
    });
    out.csv("events.csv", &header, rows).map_err(io("write events"))?;
    let t = run.cycles as f64;
    out.json(
        "beat.json",
        &BeatDump {
            seed: run.seed,
            mode: run.prob_mode.name(),
            cycles: run.cycles,
            alpha: &traj.alpha,
            empirical: &traj.empirical,
            within_three_sigma: traj
                .empirical
                .iter()
                .zip(&traj.alpha)
                .map(|(&f, &a)| (f - a).abs() <= 3.0 * (a * (1.0 - a) / t).sqrt())
                .collect(),
        },
    )
    .map_err(io("write beat"))?;
    flags.insert("beat".into(), "run".into());
    Ok(())
}

#[derive(Serialize)]
struct LevelDump {
    level: usize,
    n_tot: usize,
    energies: Vec<f64>,
    decoupled_energies: Vec<f64>,
    counts: Counts,
    ep: EpDump,
}

#[derive(Serialize)]
pub struct HierarchyDump {
    depth: u32,
    levels: Vec<LevelDump>,
    /// Level-2 energies against the spectrum of the level-1 truncated operator.
    truncated_check: Option<ComparisonReport>,
}

impl HierarchyDump {
    pub fn truncated_check(&self) -> Option<&ComparisonReport> {
        self.truncated_check.as_ref()
    }
}

/// All energies of a level: roots plus poles that decouple from it.
fn level_energies(level: &EpLevel<f64>) -> Result<(Vec<f64>, Vec<f64>, Counts), Failure> {
    let sr = find_roots(&level.ep).map_err(core("hierarchy"))?;
    let decoupled = sr.decoupled_poles.iter().map(|p| p + level.ep.eps0).collect();
    Ok((sr.energies, decoupled, sr.counts))
}

pub fn hierarchy(sol: &Solution64, run: &RunConfig, depth: u32) -> Result<HierarchyDump, Failure> {
    let system = sol.system();
    if depth == 2 && system.n_tot() < 3 {
        return Err(Failure::new(
            "hierarchy",
            Kind::Config,
            format!("run.depth: depth 2 needs at least 3 modes, have {}", system.n_tot()),
        ));
    }
    let levels = recurse_ep(system, depth, pipeline_options(run).ep).map_err(core("hierarchy"))?;
    let mut dumps = Vec::new();
    let mut check = None;
    for (i, level) in levels.iter().enumerate() {
        let (energies, decoupled, counts) = level_energies(level)?;
        if i == 1 {
            let mut got: Vec<f64> = energies.iter().chain(&decoupled).map(|e| e - system.eps[0]).collect();
            got.sort_by(f64::total_cmp);
            let t = build_truncated(system).map_err(core("hierarchy"))?;
            let want = diagonalize_sym(&t, 1e-14).map_err(core("hierarchy"))?.values;
            check = Some(compare_spectra(&got, &want, 1e-7));
        }
        dumps.push(LevelDump {
            level: i + 1,
            n_tot: level.system.n_tot(),
            energies,
            decoupled_energies: decoupled,
            counts,
            ep: level.ep.to_dump(),
        });
    }
    Ok(HierarchyDump {
        depth,
        levels: dumps,
        truncated_check: check,
    })
}

const REPORT_SOURCES: [&str; 6] = [
    "spectrum.json",
    "realizations.json",
    "beat.json",
    "verify.json",
    "accounting.json",
    "hierarchy.json",
];

/// Key numbers from whichever summaries exist in the output directory.
pub fn report(out: &OutDir) -> Result<serde_json::Value, Failure> {
    use serde_json::{json, Map, Value};
    let mut found = Map::new();
    for name in REPORT_SOURCES {
        let path = out.root().join(name);
        if !path.exists() {
            continue;
        }
        let text = fs::read_to_string(&path).map_err(io("report"))?;
        let v: Value = serde_json::from_str(&text)
            .map_err(|e| Failure::new("report", Kind::Io, format!("{name}: {e}")))?;
        let summary = match name {
            "spectrum.json" => json!({ "counts": v["counts"], "n_excluded": v["excluded"].as_array().map(Vec::len) }),
            "realizations.json" => json!({
                "n_realizations": v["n_realizations"],
                "delocalized": v["delocalized"],
                "complexity_measure": v["complexity_measure"],
                "probabilities": v["probabilities"],
            }),
            "beat.json" => json!({
                "mode": v["mode"], "cycles": v["cycles"], "alpha": v["alpha"], "empirical": v["empirical"],
            }),
            "verify.json" => json!({
                "pass": v["pass"],
                "checks": v["checks"].as_array().map(|cs| cs.iter().map(|c| json!({
                    "name": c["name"], "pass": c["pass"], "enforced": c["enforced"]
                })).collect::<Vec<_>>()),
            }),
            "accounting.json" => json!({ "verdicts": v["verdicts"], "full_rank_count_gap": v["full_rank_count_gap"] }),
            _ => json!({ "depth": v["depth"], "truncated_check": v["truncated_check"] }),
        };
        found.insert(name.to_string(), summary);
    }
    if found.is_empty() {
        return Err(Failure::new(
            "report",
            Kind::Io,
            format!("no summaries found in {}", out.root().display()),
        ));
    }
    Ok(Value::Object(found))
}

#[derive(Serialize)]
struct Manifest<'a> {
    subcommand: &'a str,
    config: Option<String>,
    config_sha256: Option<&'a str>,
    seed: Option<u64>,
    cycles: Option<u64>,
    prob_mode: Option<&'static str>,
    depth: Option<u32>,
    created_unix_s: u64,
    outputs: &'a [String],
    flags: &'a Flags,
}

/// Written last; the only file that carries a timestamp.
pub fn write_manifest(subcommand: &str, loaded: Option<&Loaded>, out: &mut OutDir, flags: &Flags) -> Result<(), Failure> {
    let created = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let run = loaded.map(|l| &l.config.run);
    let outputs: Vec<String> = out.files().to_vec();
    let m = Manifest {
        subcommand,
        config: loaded.map(|l| l.path.display().to_string()),
        config_sha256: loaded.map(|l| l.sha256.as_str()),
        seed: run.map(|r| r.seed),
        cycles: run.map(|r| r.cycles),
        prob_mode: run.map(|r| r.prob_mode.name()),
        depth: run.map(|r| r.depth),
        created_unix_s: created,
        outputs: &outputs,
        flags,
    };
    out.json("manifest.json", &m).map_err(io("write manifest"))
}
