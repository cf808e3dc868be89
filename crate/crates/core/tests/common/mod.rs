#![allow(dead_code)]

use std::sync::Arc;

use nalgebra::DMatrix;
use qhmm::env::{episode_rng, Action, QhmmEnvironment, RewardTable, Trajectory};
use qhmm::random;
use rand::Rng;

/// Random undercomplete environment with the given sizes (O ≥ S).
pub fn random_env(seed: u64, s: usize, o: usize, a: usize, l: usize) -> QhmmEnvironment {
    let mut rng = episode_rng(seed, 0);
    let actions = (0..a)
        .map(|k| Action { label: format!("a{k}"), instrument: Arc::new(random::undercomplete_instrument(&mut rng, s, o)) })
        .collect();
    let channels = (0..l.saturating_sub(1)).map(|_| random::channel(&mut rng, s, s, 2)).collect();
    let rewards = RewardTable::Stationary((0..a).map(|_| (0..o).map(|_| rng.gen_range(0.0..1.0)).collect()).collect());
    QhmmEnvironment::new(random::density(&mut rng, s), channels, actions, rewards, l).unwrap()
}

/// Sizes drawn uniformly with S ≤ O.
pub fn random_sizes<R: Rng>(rng: &mut R, max: usize, max_l: usize) -> (usize, usize, usize, usize) {
    let s = rng.gen_range(1..=max);
    let o = rng.gen_range(s.max(2)..=max);
    let a = rng.gen_range(1..=max);
    let l = rng.gen_range(1..=max_l);
    (s, o, a, l)
}

/// Every trajectory of length `l` over `a` actions and `o` outcomes.
pub fn all_trajectories(a: usize, o: usize, l: usize) -> Vec<Trajectory> {
    let mut out = vec![Vec::new()];
    for _ in 0..l {
        out = out
            .into_iter()
            .flat_map(|p: Vec<(usize, usize)>| {
                (0..a).flat_map(move |x| (0..o).map(move |y| (x, y))).map(move |step| {
                    let mut q = p.clone();
                    q.push(step);
                    q
                })
            })
            .collect();
    }
    out.iter().map(|p| Trajectory::from_pairs(p)).collect()
}

/// Column-stochastic matrix as nalgebra.
pub fn stochastic<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    let m = random::stochastic(rng, rows, cols);
    DMatrix::from_fn(rows, cols, |i, j| m[i][j])
}

/// Forward algorithm: emit from the current state, then move.
pub fn classical_forward(t: &[DMatrix<f64>], e: &DMatrix<f64>, init: &[f64], pairs: &[(usize, usize)]) -> f64 {
    let mut alpha: Vec<f64> = init.to_vec();
    for &(a, o) in pairs {
        let s = alpha.len();
        let mut next = vec![0.0; s];
        for from in 0..s {
            let w = alpha[from] * e[(o, from)];
            for (to, n) in next.iter_mut().enumerate() {
                *n += t[a][(to, from)] * w;
            }
        }
        alpha = next;
    }
    alpha.iter().sum()
}
