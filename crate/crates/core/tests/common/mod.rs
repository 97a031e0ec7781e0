#![allow(dead_code)]

use protofield_core::fixtures::random_problem;
use protofield_core::rng::SplitMix64;
use protofield_core::{AssembledState, ChannelSystem, Mat, ProblemSpec};

/// The 100 random instances: N_tot cycles through 2..=5, N_g through 2..=8.
pub fn random_instances() -> impl Iterator<Item = (usize, usize, ProblemSpec<f64>)> {
    (0..100u64).map(|i| {
        let n_tot = 2 + (i % 4) as usize;
        let n_g = 2 + ((i / 4) % 7) as usize;
        let mut rng = SplitMix64::new(0xC0FFEE ^ (i * 7919));
        (n_tot, n_g, random_problem(n_tot, n_g, &mut rng).unwrap())
    })
}

/// Apply the full coupled operator to channel-stacked amplitudes without
/// forming a matrix.
pub fn apply_full(s: &ChannelSystem<f64>, c: &[f64]) -> Vec<f64> {
    let ng = s.n_g();
    let nt = s.n_tot();
    let mut y = vec![0.0; c.len()];
    for n in 0..nt {
        for x in 0..ng {
            let mut acc = s.eps[n] * c[n * ng + x];
            for z in 0..ng {
                acc += s.hg[(x, z)] * c[n * ng + z];
            }
            for m in 0..nt {
                acc += s.v.get(n, m, x) * c[m * ng + x];
            }
            y[n * ng + x] = acc;
        }
    }
    y
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `‖(H − E) c‖ / ‖c‖` for a reconstructed state.
pub fn state_residual(s: &ChannelSystem<f64>, st: &AssembledState<f64>) -> f64 {
    let c = st.coefficients();
    let hc = apply_full(s, &c);
    let r: Vec<f64> = hc.iter().zip(&c).map(|(a, b)| a - st.energy * b).collect();
    norm(&r) / norm(&c)
}

/// States concentrated on single ξ points (`None` = spread uniformly).
pub fn point_states(ng: usize, peaks: &[Option<usize>]) -> Vec<AssembledState<f64>> {
    peaks
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let psi: Vec<f64> = match p {
                Some(k) => (0..ng).map(|x| if x == *k { 1.0 } else { 0.0 }).collect(),
                None => vec![(1.0 / ng as f64).sqrt(); ng],
            };
            AssembledState {
                root_index: i,
                eta: 0.0,
                energy: 0.0,
                psi0: psi.clone(),
                tails: vec![],
                full: Mat::from_fn(1, ng, |_, x| psi[x]),
                q_weights: vec![1.0],
                xi_weights: vec![1.0; ng],
            }
        })
        .collect()
}
