//! Fast invariant suites across the modules, run by `qhmm verify`.
//!
//! Each suite is a short property check drawn from random instances of a
//! fixed seed. Thresholds do not depend on the seed.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{episode_rng, Action, QhmmEnvironment, RewardTable, Trajectory, UniformPolicy};
use crate::error::Result;
use crate::hardness::{
    bandit_pair, biased_trivial_povm, embed_classical_pomdp, embed_maqb, projective_grid, sic_orbit, SicPovm,
};
use crate::learner::{run_omle, OmleConfig};
use crate::linalg::{choi_of, DensityOperator, HermitianOperator};
use crate::oom::{build_recovery_maps, kappa_uc, oom_trajectory_prob, spanning_dimension, OomModel};
use crate::planner::{backward_value_iteration, ActionGrid};
use crate::random;
use crate::workx::{build_case_study, dissipation_series, protocol_expected_work, CaseStudyConfig};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

/// Everything a suite may read. The tetrahedral measurement is an input so
/// that a damaged fixture can be checked.
#[derive(Clone, Debug)]
pub struct VerifyInput {
    pub seed: u64,
    pub sic: SicPovm,
}

type Suite = fn(&VerifyInput) -> Result<(bool, String)>;

const SUITES: &[(&str, Suite)] = &[
    ("linalg", suite_linalg),
    ("env", suite_env),
    ("oom", suite_oom),
    ("sic", suite_sic),
    ("bandit", suite_bandit),
    ("spandim", suite_spandim),
    ("planner", suite_planner),
    ("workx", suite_workx),
    ("embedding", suite_embedding),
];

pub fn suite_names() -> Vec<&'static str> {
    SUITES.iter().map(|(n, _)| *n).collect()
}

/// Runs every suite; an error inside a suite counts as a failure.
pub fn run_all(input: &VerifyInput) -> Vec<SuiteResult> {
    SUITES
        .iter()
        .map(|(name, suite)| {
            let (passed, detail) = match suite(input) {
                Ok(r) => r,
                Err(e) => (false, format!("error: {e}")),
            };
            SuiteResult { name: name.to_string(), passed, detail }
        })
        .collect()
}

fn random_env(seed: u64, s: usize, o: usize, a: usize, l: usize) -> Result<QhmmEnvironment> {
    let mut rng = episode_rng(seed, 0);
    let actions = (0..a)
        .map(|k| Action { label: format!("a{k}"), instrument: Arc::new(random::undercomplete_instrument(&mut rng, s, o)) })
        .collect();
    let channels = (0..l.saturating_sub(1)).map(|_| random::channel(&mut rng, s, s, 2)).collect();
    QhmmEnvironment::new(random::density(&mut rng, s), channels, actions, RewardTable::zeros(a, o), l)
}

fn all_pairs(a: usize, o: usize, l: usize) -> Vec<Vec<(usize, usize)>> {
    let mut out = vec![Vec::new()];
    for _ in 0..l {
        let mut next = Vec::with_capacity(out.len() * a * o);
        for p in &out {
            for x in 0..a {
                for y in 0..o {
                    let mut q: Vec<(usize, usize)> = p.clone();
                    q.push((x, y));
                    next.push(q);
                }
            }
        }
        out = next;
    }
    out
}

fn suite_linalg(input: &VerifyInput) -> Result<(bool, String)> {
    let mut rng = episode_rng(input.seed, 1);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let d = rng.gen_range(2..=4);
        let ch = random::channel(&mut rng, d, d, 3);
        let rho = random::density(&mut rng, d);
        let out = ch.apply(rho.op())?;
        worst = worst.max((out.trace() - 1.0).abs()).max((-out.min_eigenvalue()).max(0.0));
        // The Choi matrix of a channel is PSD with partial trace I.
        worst = worst.max((-choi_of(&ch).min_eigenvalue()).max(0.0));
    }
    Ok((worst <= 1e-9, format!("max trace/positivity defect {worst:.1e}")))
}

fn suite_env(input: &VerifyInput) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for k in 0..10 {
        let env = random_env(input.seed.wrapping_add(100 + k), 2, 2, 2, 3)?;
        let pol = UniformPolicy::over(2);
        let mut total = 0.0;
        for p in all_pairs(2, 2, 3) {
            total += env.trajectory_prob(&pol, &Trajectory::from_pairs(&p))?;
        }
        worst = worst.max((total - 1.0).abs());
    }
    Ok((worst <= 1e-8, format!("max |Σ P(τ) − 1| {worst:.1e}")))
}

fn suite_oom(input: &VerifyInput) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for k in 0..20 {
        let env = random_env(input.seed.wrapping_add(200 + k), 2, 3, 2, 3)?;
        let oom = OomModel::from_env(&env)?;
        for p in all_pairs(2, 3, 3) {
            let t = Trajectory::from_pairs(&p);
            worst = worst.max((oom_trajectory_prob(&oom, &t)? - env.observation_likelihood(&t)?).abs());
        }
    }
    Ok((worst <= 1e-9, format!("max OOM/filter gap {worst:.1e}")))
}

fn suite_sic(input: &VerifyInput) -> Result<(bool, String)> {
    let e = input.sic.projectors();
    let mut gram = 0.0f64;
    for i in 0..4 {
        for j in 0..4 {
            let want = if i == j { 1.0 } else { 1.0 / 3.0 };
            gram = gram.max((e[i].hs_inner(&e[j]) - want).abs());
        }
    }
    let sum = e.iter().try_fold(HermitianOperator::zeros(2), |acc, x| acc.add(&x.scale(0.5)))?;
    let completeness = sum.max_abs_diff(&HermitianOperator::identity(2));
    let mut ok = gram <= 1e-12 && completeness <= 1e-12;
    let mut detail = format!("Gram error {gram:.1e}, completeness {completeness:.1e}");
    if ok {
        let env = embed_maqb(&DensityOperator::maximally_mixed(2), 2)?;
        let k = kappa_uc(&build_recovery_maps(&env)?);
        ok &= (k - 1.0).abs() <= 1e-10;
        detail.push_str(&format!(", κ_uc {k:.12}"));
    }
    Ok((ok, detail))
}

fn suite_bandit(_: &VerifyInput) -> Result<(bool, String)> {
    let mut worst = 0.0f64;
    for k in 1..=16 {
        let d = k as f64 / 100.0;
        let pair = bandit_pair(d, 1 + k % 3)?;
        let m = pair.means(&pair.rho1);
        worst = worst.max((m[0] - (1.0 + d) / 4.0).abs());
        worst = worst.max((m[0] - m[1] - d / 3.0).abs());
        worst = worst.max((pair.squared_difference() - d * d / 3.0).abs());
        if pair.chi_squared() > 8.0 * d * d / 3.0 + 1e-12 {
            return Ok((false, format!("χ² bound fails at Δ = {d}")));
        }
    }
    Ok((worst <= 1e-12, format!("max algebra error {worst:.1e}")))
}

fn suite_spandim(input: &VerifyInput) -> Result<(bool, String)> {
    let grid = projective_grid(16);
    let a = spanning_dimension(&grid)?;
    let mut biased = grid;
    biased.push(biased_trivial_povm(0.3)?);
    let b = spanning_dimension(&biased)?;
    let c = spanning_dimension(&sic_orbit(20, &mut episode_rng(input.seed, 3))?)?;
    Ok(((a, b, c) == (3, 4, 9), format!("dimensions {a}, {b}, {c}")))
}

fn suite_planner(_: &VerifyInput) -> Result<(bool, String)> {
    // L = 1: the best one-step work measures in the eigenbasis of ξ with the
    // clamped eigenvalue as purity. The grid only loses the angle spacing.
    let cfg = CaseStudyConfig::default();
    let model = cfg.model(0.7)?;
    let grid = ActionGrid::new(&model, 11, 256, cfg.eps)?;
    let table = backward_value_iteration(&model, &grid, 1);
    let mut worst = 0.0f64;
    for (i, &b) in grid.beliefs().iter().enumerate() {
        let xi = DensityOperator::mixture(&[b, 1.0 - b], model.sigmas())?;
        let p = xi.op().eigenvalues().into_iter().fold(0.0, f64::max);
        let lam = p.clamp(cfg.eps, 1.0 - cfg.eps);
        let best = std::f64::consts::LN_2 + p * lam.ln() + (1.0 - p) * (1.0 - lam).ln();
        let v = table.values[0][i] * model.inv_temperature();
        if v > best + 1e-12 {
            return Ok((false, format!("value {v} exceeds the eigenbasis optimum {best}")));
        }
        worst = worst.max(best - v);
    }
    Ok((worst <= 1e-4, format!("max shortfall from the eigenbasis optimum {worst:.1e}")))
}

fn suite_workx(input: &VerifyInput) -> Result<(bool, String)> {
    let rho = DensityOperator::basis_state(2, 0);
    let target = DensityOperator::diagonal(&[0.8, 0.2])?;
    let gap = (protocol_expected_work(&rho, &target, 10_000, 1.0, 0.0)? - 1.6f64.ln()).abs();
    let cfg = CaseStudyConfig { n_belief: 51, n_angle: 16, ..CaseStudyConfig::default() };
    let (env, fam) = build_case_study(0.8, 3, &cfg)?;
    let run = run_omle(&fam, &env, Some(&[0.8]), &OmleConfig { episodes: 30, c: 1e-4, seed: input.seed, ..OmleConfig::default() })?;
    let identity = dissipation_series(&run.logs, &fam, 0.8).is_ok();
    let ok = gap <= 1e-4 && identity;
    Ok((ok, format!("protocol bias at M = 10⁴ {gap:.1e}, dissipation identity held: {identity}")))
}

fn suite_embedding(input: &VerifyInput) -> Result<(bool, String)> {
    let mut rng = episode_rng(input.seed, 4);
    let stoch = |rng: &mut rand_chacha::ChaCha8Rng, r: usize, c: usize| {
        let m = random::stochastic(rng, r, c);
        DMatrix::from_fn(r, c, |i, j| m[i][j])
    };
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let ts = vec![stoch(&mut rng, 2, 2), stoch(&mut rng, 2, 2)];
        let e = stoch(&mut rng, 3, 2);
        let init = [0.3, 0.7];
        let env = embed_classical_pomdp(&ts, &e, &init, RewardTable::zeros(2, 3), 3)?;
        for p in all_pairs(2, 3, 3) {
            let mut alpha = init.to_vec();
            for &(a, o) in &p {
                let w: Vec<f64> = (0..2).map(|s| alpha[s] * e[(o, s)]).collect();
                alpha = (0..2).map(|to| (0..2).map(|s| ts[a][(to, s)] * w[s]).sum()).collect();
            }
            let classical: f64 = alpha.iter().sum();
            worst = worst.max((classical - env.observation_likelihood(&Trajectory::from_pairs(&p))?).abs());
        }
        // Diagonal inputs stay diagonal.
        let mut f = env.initial_filter();
        for (a, o) in [(0, 1), (1, 2)] {
            f = env.advance(&f, a, o)?;
            let off = f.tilde_rho[(0, 1)].norm();
            worst = worst.max(off);
        }
    }
    Ok((worst <= 1e-10, format!("max gap to the forward algorithm {worst:.1e}")))
}
