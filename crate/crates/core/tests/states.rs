//! Reconstructed states: limits, entanglement, localization and the
//! dynamically produced wells.

mod common;

use common::state_residual;
use protofield_core::assembly::schmidt_rank_of;
use protofield_core::fixtures::{
    random_problem, single_well_problem, two_well_problem, zero_coupling_problem, STRONG_WELL_COUPLING,
    TWO_WELL_CENTRES,
};
use protofield_core::linalg::diagonalize_sym;
use protofield_core::model::ModeSource;
use protofield_core::rng::SplitMix64;
use protofield_core::{
    complexity_measure, density, ep_well_alignment, free_modes, project_coupling, schmidt_rank, solve, Boundary,
    CouplingSpec, Grid, Mat, PipelineOptions, ProblemSpec, Solution,
};

fn solved(spec: &ProblemSpec<f64>) -> Solution<f64> {
    solve(spec, &PipelineOptions::default()).unwrap()
}

#[test]
fn zero_coupling_gives_product_states() {
    for (n_tot, n_g) in [(2, 6), (3, 9), (4, 12)] {
        let sol = solved(&zero_coupling_problem(n_tot, n_g).unwrap());
        assert_eq!(sol.states.len(), n_g);
        let phi0 = &sol.spec.modes.phi[0];
        for st in &sol.states {
            assert!(st.tails.iter().flatten().all(|&t| t == 0.0));
            assert_eq!(schmidt_rank(st, 1e-8).unwrap(), 1);
            // Ψ = φ_0 ⊗ ψ_0 exactly
            for q in 0..phi0.len() {
                for x in 0..n_g {
                    assert!((st.full[(q, x)] - phi0[q] * st.psi0[x]).abs() <= 1e-14);
                }
            }
        }
        let rs = &sol.realizations;
        assert!(rs.is_delocalized());
        assert_eq!(rs.n_realizations(), 1);
        assert_eq!(complexity_measure::<f64>(rs.n_realizations()).unwrap(), 0.0);
        // every pole is decoupled and shows up in the direct spectrum only
        assert_eq!(sol.spectrum.decoupled_poles.len(), (n_tot - 1) * n_g);
    }
}

#[test]
fn tails_grow_with_coupling() {
    let q = Grid::uniform(48, 0.0, 1.0, Boundary::Dirichlet).unwrap();
    let xi = Grid::uniform(10, 0.0, 1.0, Boundary::Dirichlet).unwrap();
    let modes = free_modes(
        &ModeSource::GaussianBumps {
            n_tot: 3,
            spacing: 1.0,
            width_factor: 1.5,
        },
        &q,
    )
    .unwrap();
    let h = xi.spacing();
    let mut last = 0.0;
    for g in [0.1, 0.5, 1.0] {
        let spec = ProblemSpec::new(
            xi.clone(),
            modes.clone(),
            CouplingSpec::gaussian(g, 0.2),
            h * h,
            vec![0.0; 10],
        )
        .unwrap();
        let sol = solved(&spec);
        let ground = sol.states[0].tail_weight();
        assert!(ground >= last, "g {g}: ground-state tail {ground} < {last}");
        assert!(ground > 0.0);
        last = ground;
    }
}

/// Rank from the eigenvalues of `M Mᵀ`. Squaring costs half the digits, so
/// exact zeros come back near `√ε` of the leading singular value and the
/// oracle only resolves cuts well above that.
fn gram_rank(m: &Mat<f64>, tol: f64) -> usize {
    let ev = diagonalize_sym(&m.matmul(&m.transpose()), 1e-15).unwrap().values;
    let lead = ev.iter().fold(0.0f64, |a, &b| a.max(b)).sqrt();
    ev.iter().filter(|&&l| l > 0.0 && l.sqrt() > tol * lead).count()
}

fn random_product_sum(rng: &mut SplitMix64, nq: usize, nx: usize, terms: usize) -> Mat<f64> {
    let mut m = Mat::zeros(nq, nx);
    for _ in 0..terms {
        let a: Vec<f64> = (0..nq).map(|_| rng.uniform(-1.0, 1.0)).collect();
        let b: Vec<f64> = (0..nx).map(|_| rng.uniform(-1.0, 1.0)).collect();
        for i in 0..nq {
            for j in 0..nx {
                m[(i, j)] += a[i] * b[j];
            }
        }
    }
    m
}

#[test]
fn schmidt_rank_matches_gram_eigenvalue_oracle() {
    let mut rng = SplitMix64::new(99);
    for case in 0..20 {
        let (nq, nx) = (3 + case % 5, 4 + case % 3);
        let full = random_product_sum(&mut rng, nq, nx, nq.max(nx));
        assert_eq!(schmidt_rank_of(&full, 1e-8).unwrap(), gram_rank(&full, 1e-8), "case {case}");
        assert_eq!(gram_rank(&full, 1e-8), nq.min(nx));

        let rank = 1 + case % nq.min(nx);
        let low = random_product_sum(&mut rng, nq, nx, rank);
        assert_eq!(schmidt_rank_of(&low, 1e-6).unwrap(), gram_rank(&low, 1e-6), "case {case}");
        assert_eq!(gram_rank(&low, 1e-6), rank);
    }
}

#[test]
fn reconstructed_state_rank_matches_gram_oracle() {
    for (n_tot, n_g, seed) in [(2, 5, 1u64), (3, 6, 2), (4, 7, 3)] {
        let sol = solved(&random_problem(n_tot, n_g, &mut SplitMix64::new(seed)).unwrap());
        for st in &sol.states {
            let m = Mat::from_fn(st.full.rows(), st.full.cols(), |q, x| {
                st.q_weights[q].sqrt() * st.full[(q, x)] * st.xi_weights[x].sqrt()
            });
            let r = schmidt_rank(st, 1e-6).unwrap();
            assert_eq!(r, gram_rank(&m, 1e-6));
            assert_eq!(r, n_tot.min(n_g));
        }
    }
}

#[test]
fn schmidt_rank_on_a_fine_q_grid() {
    // 801 x 24 amplitude matrices with at most 3 Schmidt terms
    let sol = solved(&two_well_problem(24, STRONG_WELL_COUPLING).unwrap());
    for st in &sol.states {
        let m = Mat::from_fn(st.full.rows(), st.full.cols(), |q, x| {
            st.q_weights[q].sqrt() * st.full[(q, x)] * st.xi_weights[x].sqrt()
        });
        let r = schmidt_rank(st, 1e-6).unwrap();
        // the 24 x 24 Gram matrix carries the same nonzero spectrum
        assert_eq!(r, gram_rank(&m.transpose(), 1e-6), "root {}", st.root_index);
        assert!(r <= 3);
    }
}

#[test]
fn coupled_states_are_entangled() {
    let spec = random_problem::<f64>(3, 5, &mut SplitMix64::new(3)).unwrap();
    let sol = solved(&spec);
    let ranks: Vec<usize> = sol.states.iter().map(|s| schmidt_rank(s, 1e-8).unwrap()).collect();
    assert!(ranks.iter().all(|&r| r > 1), "{ranks:?}");
}

#[test]
fn densities_are_normalized() {
    let sol = solved(&two_well_problem(16, STRONG_WELL_COUPLING).unwrap());
    for st in &sol.states {
        let d = density(st);
        assert!(d.rho.to_rows().iter().flatten().all(|&r| r >= 0.0));
        assert!((d.marginal_xi.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        assert!((d.marginal_q.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        assert!(state_residual(sol.system(), st) <= 1e-6);
    }
}

fn well_index(xi: &[f64], centre: f64) -> usize {
    xi.iter()
        .enumerate()
        .min_by(|a, b| (a.1 - centre).abs().partial_cmp(&(b.1 - centre).abs()).unwrap())
        .unwrap()
        .0
}

/// Minimum of each excited channel's self-coupling: where the wells are.
fn channel_wells(sol: &Solution<f64>) -> Vec<usize> {
    (1..sol.couplings.n_tot())
        .map(|n| protofield_core::scalar::argmin(sol.couplings.profile(n, n)).unwrap())
        .collect()
}

#[test]
fn strong_two_well_instance_has_two_regular_groups_at_the_wells() {
    for n_g in [16, 24] {
        let sol = solved(&two_well_problem(n_g, STRONG_WELL_COUPLING).unwrap());
        let xi = sol.spec.xi_grid.points();
        let wells = channel_wells(&sol);
        let expect: Vec<usize> = TWO_WELL_CENTRES.iter().map(|&c| well_index(xi, c)).collect();
        assert_eq!(wells, expect);

        let rs = &sol.realizations;
        let regular: Vec<usize> = rs
            .realizations()
            .iter()
            .filter(|r| !r.intermediate)
            .map(|r| r.center_index)
            .collect();
        assert_eq!(regular, wells, "N_g {n_g}");
    }
}

#[test]
fn localized_roots_align_with_their_own_well() {
    for (sol, n_wells) in [
        (solved(&single_well_problem(16, STRONG_WELL_COUPLING).unwrap()), 1),
        (solved(&two_well_problem(24, STRONG_WELL_COUPLING).unwrap()), 2),
    ] {
        let localized: Vec<usize> = sol
            .realizations
            .realizations()
            .iter()
            .filter(|r| !r.intermediate)
            .flat_map(|r| r.members.clone())
            .collect();
        assert_eq!(localized.len(), n_wells);
        for i in localized {
            let a = ep_well_alignment(&sol.level.ep, sol.spectrum.roots[i], &sol.spectrum.vectors[i]).unwrap();
            assert!(a.aligned, "root {i}: well {} vs density peak {}", a.well_index, a.density_argmax);
        }
    }
}

#[test]
fn zero_coupling_profile_is_the_static_potential() {
    let sol = solved(&zero_coupling_problem(2, 6).unwrap());
    let a = ep_well_alignment(&sol.level.ep, sol.spectrum.roots[0], &sol.spectrum.vectors[0]).unwrap();
    let v00 = project_coupling(&sol.spec.modes, &sol.spec.coupling, &sol.spec.xi_grid).unwrap();
    assert_eq!(a.profile, v00.profile(0, 0).to_vec());
}
