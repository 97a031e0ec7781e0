use protofield_core::config::RunConfig;
use protofield_core::effective::root_residual_rel;
use protofield_core::fixtures::random_problem;
use protofield_core::oracle::{full_hamiltonian, DEFAULT_DIMENSION_CAP};
use protofield_core::pipeline::channel_system;
use protofield_core::rng::{splitmix_at, SplitMix64};
use protofield_core::{
    compare_spectra, complexity_measure, count_accounting, direct_spectrum, ep_well_alignment, eval_ep, schmidt_rank,
    simulate_beat, solve, AccountingReport, ProbMode, Solution64,
};
use serde::Serialize;
use serde_json::{json, Value};

use crate::failure::{core, Failure};
use crate::run::{hierarchy, pipeline_options};

const EXACTNESS_REL: f64 = 1e-7;
const STATE_RESIDUAL: f64 = 1e-6;
const PROBABILITY_SUM: f64 = 1e-12;
const BEAT_SEEDS: u64 = 20;

#[derive(Serialize)]
pub struct Check {
    pub name: &'static str,
    /// Informational checks are reported but never fail the run.
    pub enforced: bool,
    pub pass: bool,
    pub detail: Value,
}

#[derive(Serialize)]
pub struct VerifyReport {
    pub pass: bool,
    pub checks: Vec<Check>,
}

fn check(name: &'static str, pass: bool, detail: Value) -> Check {
    Check {
        name,
        enforced: true,
        pass,
        detail,
    }
}

fn info(name: &'static str, pass: bool, detail: Value) -> Check {
    Check {
        name,
        enforced: false,
        pass,
        detail,
    }
}

/// Sorted energies of every solution of the full problem the EP accounts
/// for: the roots plus the poles that decouple from the explicit channel.
fn all_energies(sol: &Solution64) -> Vec<f64> {
    let eps0 = sol.level.ep.eps0;
    let mut e = sol.spectrum.energies.clone();
    e.extend(sol.spectrum.decoupled_poles.iter().map(|p| p + eps0));
    e.sort_by(f64::total_cmp);
    e
}

/// Largest `‖(H − E)c‖ / ‖c‖` over the reconstructed states, with `H` the
/// assembled full operator.
fn max_state_residual(sol: &Solution64) -> f64 {
    let h = full_hamiltonian(sol.system());
    sol.states
        .iter()
        .map(|st| {
            let c = st.coefficients();
            let hc = h.matvec(&c);
            let r: f64 = hc.iter().zip(&c).map(|(a, b)| (a - st.energy * b).powi(2)).sum();
            let n: f64 = c.iter().map(|x| x * x).sum();
            (r / n).sqrt()
        })
        .fold(0.0, f64::max)
}

struct Exactness {
    checked: bool,
    pass: bool,
    max_rel_dev: f64,
    unmatched: usize,
    max_state_residual: f64,
    rank_accounting: bool,
}

fn exactness(sol: &Solution64) -> Result<Exactness, Failure> {
    let dim = sol.system().n_tot() * sol.system().n_g();
    let accounting = count_accounting(&sol.spectrum).measured_equals_rank_accounting;
    let res = max_state_residual(sol);
    if dim > DEFAULT_DIMENSION_CAP {
        return Ok(Exactness {
            checked: false,
            pass: true,
            max_rel_dev: f64::NAN,
            unmatched: 0,
            max_state_residual: res,
            rank_accounting: accounting,
        });
    }
    let direct = direct_spectrum(sol.system(), DEFAULT_DIMENSION_CAP).map_err(core("verify"))?;
    let cmp = compare_spectra(&all_energies(sol), direct.energies(), EXACTNESS_REL);
    Ok(Exactness {
        checked: true,
        pass: cmp.pass,
        max_rel_dev: cmp.max_rel_dev,
        unmatched: cmp.unmatched_a.len() + cmp.unmatched_b.len(),
        max_state_residual: res,
        rank_accounting: accounting,
    })
}

fn probability_checks(sol: &Solution64, checks: &mut Vec<Check>) {
    let rs = &sol.realizations;
    let n = rs.n_realizations();
    let uniform = rs.probabilities_for(ProbMode::Uniform).unwrap_or(&[]);
    let grouped = rs.probabilities_for(ProbMode::Grouped).unwrap_or(&[]);
    let counts = rs.group_counts();
    let total: usize = counts.iter().sum();
    let uniform_exact = uniform.len() == n && uniform.iter().all(|&a| a == 1.0 / n as f64);
    let grouped_exact =
        grouped.len() == n && grouped.iter().zip(&counts).all(|(&a, &c)| a == c as f64 / total as f64);
    let sums: Vec<f64> = ProbMode::ALL
        .iter()
        .map(|&m| rs.probabilities_for(m).map_or(f64::NAN, |a| a.iter().sum()))
        .collect();
    let sums_ok = sums.iter().all(|s| (s - 1.0).abs() <= PROBABILITY_SUM);
    checks.push(check(
        "probability_rules",
        uniform_exact && grouped_exact && sums_ok,
        json!({ "uniform_exact": uniform_exact, "grouped_exact": grouped_exact, "sums": sums }),
    ));

    // Born α against the intermediate-density mass in each Voronoi cell
    let born = rs.probabilities_for(ProbMode::Born).unwrap_or(&[]);
    let mut masses = vec![0.0; n];
    for (x, &j) in rs.cells().iter().enumerate() {
        masses[j] += rs.xi_weights[x] * sol.intermediate_density[x];
    }
    let m_total: f64 = masses.iter().sum();
    let dev = born
        .iter()
        .zip(&masses)
        .map(|(a, m)| (a - m / m_total).abs())
        .fold(0.0, f64::max);
    checks.push(check(
        "born_rule",
        born.len() == n && dev <= PROBABILITY_SUM,
        json!({ "max_dev_from_cell_masses": dev }),
    ));
}

fn zero_coupling_checks(sol: &Solution64, run: &RunConfig, checks: &mut Vec<Check>) -> Result<(), Failure> {
    let ep = &sol.level.ep;
    // V_eff(η) = h_g + V_00 for every η
    let probe = ep.eps0 + 0.37 * ep.span;
    let veff = eval_ep(ep, probe).map_err(core("verify"))?;
    let v00 = sol.couplings.profile(0, 0);
    let h0_is_static = (0..ep.n_g())
        .all(|i| (0..ep.n_g()).all(|j| ep.h0[(i, j)] == sol.system().hg[(i, j)] + if i == j { v00[i] } else { 0.0 }));
    let veff_is_v00 = ep.rank_sum() == 0 && veff == ep.h0 && h0_is_static;

    let rs = &sol.realizations;
    let complexity = complexity_measure::<f64>(rs.n_realizations()).map_err(core("verify"))?;
    let ranks = sol
        .states
        .iter()
        .map(|s| schmidt_rank(s, run.schmidt_tol))
        .collect::<Result<Vec<_>, _>>()
        .map_err(core("verify"))?;
    let tails_zero = sol.states.iter().all(|s| s.tails.iter().flatten().all(|&t| t == 0.0));
    let traj = simulate_beat(rs, 1000, run.seed, run.prob_mode).map_err(core("verify"))?;
    let constant = traj.events.iter().all(|e| e.realization_id == traj.events[0].realization_id);
    let pass = veff_is_v00 && rs.n_realizations() == 1 && complexity == 0.0 && ranks.iter().all(|&r| r == 1) && tails_zero && constant;
    checks.push(check(
        "zero_coupling",
        pass,
        json!({
            "veff_equals_static_potential": veff_is_v00,
            "n_realizations": rs.n_realizations(),
            "complexity_measure": complexity,
            "max_schmidt_rank": ranks.iter().max(),
            "tails_zero": tails_zero,
            "constant_beat": constant,
        }),
    ));
    Ok(())
}

fn beat_convergence(sol: &Solution64, run: &RunConfig) -> Result<Check, Failure> {
    let t = run.cycles as f64;
    let mut good = 0;
    for k in 0..BEAT_SEEDS {
        let traj = simulate_beat(&sol.realizations, run.cycles, run.seed.wrapping_add(k), run.prob_mode)
            .map_err(core("verify"))?;
        let ok = traj
            .empirical
            .iter()
            .zip(&traj.alpha)
            .all(|(&f, &a)| (f - a).abs() <= 3.0 * (a * (1.0 - a) / t).sqrt());
        good += usize::from(ok);
    }
    Ok(check(
        "beat_convergence",
        good + 1 >= BEAT_SEEDS as usize,
        json!({ "seeds": BEAT_SEEDS, "within_three_sigma": good, "cycles": run.cycles, "mode": run.prob_mode.name() }),
    ))
}

/// Each reading of the excited-channel couplings, measured against the
/// full operator with all couplings kept.
fn coupling_readings(sol: &Solution64, run: &RunConfig) -> Result<Check, Failure> {
    let (_, full) = channel_system(&sol.spec, true).map_err(core("verify"))?;
    if full.n_tot() * full.n_g() > DEFAULT_DIMENSION_CAP {
        return Ok(info("coupling_readings", true, json!("skipped: dimension above the cap")));
    }
    let direct = direct_spectrum(&full, DEFAULT_DIMENSION_CAP).map_err(core("verify"))?;
    let mut detail = serde_json::Map::new();
    for keep in [true, false] {
        let mut opts = pipeline_options(run);
        opts.cross_coupling = keep;
        let alt = solve(&sol.spec, &opts).map_err(core("verify"))?;
        let cmp = compare_spectra(&all_energies(&alt), direct.energies(), EXACTNESS_REL);
        let key = if keep { "with_cross_couplings" } else { "without_cross_couplings" };
        detail.insert(
            key.into(),
            json!({ "max_rel_dev": cmp.max_rel_dev, "matches_full_operator": cmp.pass, "n_roots": alt.spectrum.roots.len() }),
        );
    }
    Ok(info("coupling_readings", true, Value::Object(detail)))
}

fn well_alignment(sol: &Solution64) -> Result<Option<Check>, Failure> {
    let localized: Vec<usize> = sol
        .realizations
        .realizations()
        .iter()
        .filter(|r| !r.intermediate)
        .flat_map(|r| r.members.clone())
        .collect();
    if localized.is_empty() {
        return Ok(None);
    }
    let mut rows = Vec::new();
    let mut all = true;
    for i in localized {
        let a = ep_well_alignment(&sol.level.ep, sol.spectrum.roots[i], &sol.spectrum.vectors[i])
            .map_err(core("verify"))?;
        all &= a.aligned;
        rows.push(json!({ "root": i, "well_index": a.well_index, "density_argmax": a.density_argmax, "aligned": a.aligned }));
    }
    Ok(Some(info("well_alignment", all, json!(rows))))
}

fn random_instances(run: &RunConfig) -> Result<Check, Failure> {
    let mut failures = Vec::new();
    let mut worst_dev: f64 = 0.0;
    let mut worst_res: f64 = 0.0;
    for i in 0..run.random_instances as u64 {
        let n_tot = 2 + (i % 4) as usize;
        let n_g = 2 + ((i / 4) % 7) as usize;
        let mut rng = SplitMix64::new(splitmix_at(run.seed, i));
        let spec = random_problem::<f64>(n_tot, n_g, &mut rng).map_err(core("verify"))?;
        let sol = solve(&spec, &pipeline_options(run)).map_err(core("verify"))?;
        let ex = exactness(&sol)?;
        worst_dev = worst_dev.max(ex.max_rel_dev);
        worst_res = worst_res.max(ex.max_state_residual);
        if !(ex.pass && ex.rank_accounting && ex.max_state_residual <= STATE_RESIDUAL) {
            failures.push(json!({ "instance": i, "n_tot": n_tot, "n_g": n_g }));
        }
    }
    Ok(check(
        "random_instances",
        failures.is_empty(),
        json!({
            "count": run.random_instances,
            "max_rel_dev": worst_dev,
            "max_state_residual": worst_res,
            "failures": failures,
        }),
    ))
}

pub fn verify(sol: &Solution64, run: &RunConfig) -> Result<(VerifyReport, AccountingReport), Failure> {
    let mut checks = Vec::new();
    let ex = exactness(sol)?;
    checks.push(Check {
        name: "ep_exactness",
        enforced: ex.checked,
        pass: ex.pass,
        detail: if ex.checked {
            json!({ "max_rel_dev": ex.max_rel_dev, "unmatched": ex.unmatched, "tol": EXACTNESS_REL })
        } else {
            json!("skipped: dimension above the cap")
        },
    });
    let accounting = count_accounting(&sol.spectrum);
    checks.push(check(
        "rank_accounting",
        ex.rank_accounting,
        json!({ "n_roots": accounting.n_roots, "rank_accounting": accounting.rank_accounting }),
    ));
    let tol = root_residual_rel::<f64>() * sol.level.ep.span;
    let worst = sol.spectrum.residuals.iter().copied().fold(0.0, f64::max);
    checks.push(check("root_residuals", worst <= tol, json!({ "max": worst, "tol": tol })));
    checks.push(check(
        "state_residuals",
        ex.max_state_residual <= STATE_RESIDUAL,
        json!({ "max": ex.max_state_residual, "tol": STATE_RESIDUAL }),
    ));
    probability_checks(sol, &mut checks);
    if sol.couplings.is_zero() {
        zero_coupling_checks(sol, run, &mut checks)?;
    }
    checks.push(beat_convergence(sol, run)?);
    if sol.system().n_tot() >= 3 {
        let h = hierarchy(sol, run, 2)?;
        let cmp = h.truncated_check();
        checks.push(check("hierarchy_depth2", cmp.is_some_and(|c| c.pass), json!(cmp)));
    }
    checks.push(coupling_readings(sol, run)?);
    if let Some(c) = well_alignment(sol)? {
        checks.push(c);
    }
    if run.random_instances > 0 {
        checks.push(random_instances(run)?);
    }
    let pass = checks.iter().all(|c| c.pass || !c.enforced);
    Ok((VerifyReport { pass, checks }, accounting))
}
