//! Lower-bound instances: the tetrahedral qubit measurement, the two-state
//! bandit pair built on it, its embedding as a resetting quantum memory, and
//! the embedding of classical POMDPs.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::env::{Action, Policy, QhmmEnvironment, RewardTable};
use crate::error::{QhmmError, Result};
use crate::linalg::{c, CMatrix, Channel, DensityOperator, HermitianOperator, Instrument, Povm};
use crate::oom::{build_recovery_map, numerical_rank, RANK_CUTOFF};

/// Bloch vectors of the regular tetrahedron with one vertex on +z.
pub fn tetrahedron() -> [[f64; 3]; 4] {
    let (r2, r6) = (2f64.sqrt(), 6f64.sqrt());
    [
        [0.0, 0.0, 1.0],
        [2.0 * r2 / 3.0, 0.0, -1.0 / 3.0],
        [-r2 / 3.0, r6 / 3.0, -1.0 / 3.0],
        [-r2 / 3.0, -r6 / 3.0, -1.0 / 3.0],
    ]
}

/// Four rank-one effects M_x = E_x/2 with E_x = (I + n_x·σ)/2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SicPovm {
    pub bloch: [[f64; 3]; 4],
}

impl SicPovm {
    /// Projector E_x.
    pub fn projector(&self, x: usize) -> HermitianOperator {
        HermitianOperator::from_matrix_unchecked(crate::linalg::bloch_matrix(0.5, self.bloch[x].map(|v| v / 2.0)))
    }

    pub fn projectors(&self) -> Vec<HermitianOperator> {
        (0..4).map(|x| self.projector(x)).collect()
    }

    /// Effects E_x/2, validated as a POVM.
    pub fn povm(&self) -> Result<Povm> {
        Povm::new(self.projectors().iter().map(|e| e.scale(0.5)).collect())
    }

    /// Effects reordered by `perm`: outcome o reads effect perm[o].
    pub fn permuted_povm(&self, perm: &[usize; 4]) -> Result<Povm> {
        let p = self.povm()?;
        Povm::new(perm.iter().map(|&x| p.effects()[x].clone()).collect())
    }

    /// U M_x U† for a 2×2 unitary.
    pub fn rotated(&self, u: &CMatrix) -> Result<Povm> {
        let p = self.povm()?;
        Povm::new(p.effects().iter().map(|e| HermitianOperator::from_matrix_unchecked(u * e.matrix() * u.adjoint())).collect())
    }
}

pub fn sic_tetrahedron() -> SicPovm {
    SicPovm { bloch: tetrahedron() }
}

/// Transposition of outcome 0 and outcome `a`.
pub fn swap_perm(a: usize) -> [usize; 4] {
    let mut p = [0, 1, 2, 3];
    p.swap(0, a);
    p
}

/// The two bandit hypotheses ρ₁ = (1−Δ)/2·I + ΔE₁ and
/// ρ_l = (1−3Δ)/2·I + ΔE₁ + 2ΔE_l. Arm indices are 0-based, so arm 0 is
/// optimal under ρ₁ and arm `l` under ρ_l.
#[derive(Clone, Debug)]
pub struct BanditPair {
    pub rho1: DensityOperator,
    pub rho_l: DensityOperator,
    pub delta: f64,
    pub l: usize,
    pub sic: SicPovm,
}

pub fn bandit_pair(delta: f64, l: usize) -> Result<BanditPair> {
    if !(delta > 0.0 && delta <= 1.0 / 6.0 + 1e-15) {
        return Err(QhmmError::OutOfRange(format!("Δ = {delta} outside (0, 1/6]")));
    }
    if !(1..4).contains(&l) {
        return Err(QhmmError::OutOfRange(format!("alternative arm {l} must be 1, 2 or 3")));
    }
    let sic = sic_tetrahedron();
    let id = HermitianOperator::identity(2);
    let e1 = sic.projector(0);
    let el = sic.projector(l);
    let rho1 = DensityOperator::new(id.scale((1.0 - delta) / 2.0).add(&e1.scale(delta))?)?;
    let rho_l = DensityOperator::new(id.scale((1.0 - 3.0 * delta) / 2.0).add(&e1.scale(delta))?.add(&el.scale(2.0 * delta))?)?;
    Ok(BanditPair { rho1, rho_l, delta, l, sic })
}

impl BanditPair {
    /// μ_i(ρ) = Tr(M_{π_i(0)} ρ) = Tr(E_i ρ)/2.
    pub fn means(&self, rho: &DensityOperator) -> [f64; 4] {
        self.outcome_probs(rho)
    }

    /// Unpermuted outcome law Tr(M_x ρ).
    pub fn outcome_probs(&self, rho: &DensityOperator) -> [f64; 4] {
        let pr = self.sic.povm().expect("tetrahedral POVM").probabilities(rho);
        [pr[0], pr[1], pr[2], pr[3]]
    }

    /// Σ_x (P₁(x) − P_l(x))².
    pub fn squared_difference(&self) -> f64 {
        let (p, q) = (self.outcome_probs(&self.rho1), self.outcome_probs(&self.rho_l));
        p.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum()
    }

    /// χ²(P₁ ‖ P_l).
    pub fn chi_squared(&self) -> f64 {
        let (p, q) = (self.outcome_probs(&self.rho1), self.outcome_probs(&self.rho_l));
        p.iter().zip(&q).map(|(a, b)| (a - b).powi(2) / b).sum()
    }

    /// KL(P₁^(a) ‖ P_l^(a)); the same for every arm since arms permute outcomes.
    pub fn arm_kl(&self) -> f64 {
        crate::linalg::kl_divergence(&self.outcome_probs(&self.rho1), &self.outcome_probs(&self.rho_l))
    }
}

/// Resetting memory: ρ₁ = ρ*, E(X) = Tr(X)ρ*, arm a measures the
/// tetrahedral POVM with outcomes 0 and a swapped, prepares ρ₀ = |1⟩⟨1|, and
/// pays 1 on outcome 0.
pub fn embed_maqb(target: &DensityOperator, horizon: usize) -> Result<QhmmEnvironment> {
    if target.dim() != 2 {
        return Err(QhmmError::DimensionMismatch("the bandit target is a qubit".into()));
    }
    let sic = sic_tetrahedron();
    let rho0 = DensityOperator::basis_state(2, 1);
    let actions = (0..4)
        .map(|a| {
            let povm = sic.permuted_povm(&swap_perm(a))?;
            let ins = Instrument::measure_and_prepare(&povm, &vec![rho0.clone(); 4])?;
            Ok(Action { label: format!("arm{a}"), instrument: Arc::new(ins) })
        })
        .collect::<Result<Vec<_>>>()?;
    let channels = vec![Channel::replacing(target, 2); horizon.saturating_sub(1)];
    QhmmEnvironment::new(target.clone(), channels, actions, RewardTable::indicator(4, 4, 0), horizon)
}

/// A classical POMDP with transitions `transitions[a][(s′, s)]`, emission
/// `emission[(o, s)]` read before the transition, and identity memory
/// channels.
pub fn embed_classical_pomdp(
    transitions: &[DMatrix<f64>],
    emission: &DMatrix<f64>,
    initial: &[f64],
    rewards: RewardTable,
    horizon: usize,
) -> Result<QhmmEnvironment> {
    let s = initial.len();
    let o = emission.nrows();
    if emission.ncols() != s {
        return Err(QhmmError::DimensionMismatch("emission columns must index states".into()));
    }
    let check_columns = |m: &DMatrix<f64>, what: &str| -> Result<()> {
        for j in 0..m.ncols() {
            let col = m.column(j);
            if col.iter().any(|&v| !(0.0..=1.0 + 1e-12).contains(&v)) || (col.sum() - 1.0).abs() > 1e-9 {
                return Err(QhmmError::OutOfRange(format!("{what} column {j} is not a distribution")));
            }
        }
        Ok(())
    };
    check_columns(emission, "emission")?;
    let actions = transitions
        .iter()
        .enumerate()
        .map(|(a, t)| {
            if t.nrows() != s || t.ncols() != s {
                return Err(QhmmError::DimensionMismatch(format!("transition of action {a}")));
            }
            check_columns(t, "transition")?;
            let sets = (0..o)
                .map(|x| {
                    let mut kraus = Vec::new();
                    for from in 0..s {
                        for to in 0..s {
                            let w = emission[(x, from)] * t[(to, from)];
                            if w > 0.0 {
                                let mut k = CMatrix::zeros(s, s);
                                k[(to, from)] = c(w.sqrt(), 0.0);
                                kraus.push(k);
                            }
                        }
                    }
                    if kraus.is_empty() {
                        kraus.push(CMatrix::zeros(s, s));
                    }
                    kraus
                })
                .collect();
            let ins = Instrument::from_kraus_sets(sets, s, s)?;
            Ok(Action { label: format!("a{a}"), instrument: Arc::new(ins) })
        })
        .collect::<Result<Vec<_>>>()?;
    if actions.is_empty() {
        return Err(QhmmError::EmptyActionSet);
    }
    if numerical_rank(emission, RANK_CUTOFF) < s {
        let residual = build_recovery_map(&actions[0].instrument).err().map_or(0.0, |e| match e {
            QhmmError::NotUndercomplete { residual } => residual,
            _ => f64::NAN,
        });
        return Err(QhmmError::NotUndercomplete { residual });
    }
    let rho1 = DensityOperator::diagonal(initial)?;
    let channels = vec![Channel::identity(s); horizon.saturating_sub(1)];
    QhmmEnvironment::new(rho1, channels, actions, rewards, horizon)
}

/// ‖M‖₁→₁, the largest column absolute sum.
pub fn norm_one_to_one(m: &DMatrix<f64>) -> f64 {
    (0..m.ncols()).map(|j| m.column(j).iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// Smallest of the min(rows, cols) singular values.
pub fn sigma_min(m: &DMatrix<f64>) -> f64 {
    m.clone().svd(false, false).singular_values.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Emission of the illustrative lock: three outcomes, the middle one
/// uninformative, the outer two tilted by `alpha` towards the state.
pub fn lock_emission(alpha: f64) -> DMatrix<f64> {
    let third = 1.0 / 3.0;
    DMatrix::from_row_slice(3, 2, &[third + alpha, third - alpha, third, third, third - alpha, third + alpha])
}

/// A small combination lock (three rounds, two actions) for regret-floor
/// demonstrations. State 0 is "open"; pressing anything but action 1 drops
/// it into the absorbing state 1. Only the last round pays, on outcome 0.
/// An illustration, not a worst-case lock family.
pub fn lock_fixture(alpha: f64) -> Result<QhmmEnvironment> {
    let good = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
    let bad = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 1.0]);
    let horizon = 3;
    let rewards = RewardTable::from_fn(horizon, 2, 3, |t, _, o| if t == horizon - 1 && o == 0 { 1.0 } else { 0.0 });
    embed_classical_pomdp(&[bad, good], &lock_emission(alpha), &[1.0, 0.0], rewards, horizon)
}

/// Observability used by the shipped lock fixture.
pub const LOCK_ALPHA: f64 = 0.25;

/// Empirical check of the divergence decomposition for a bandit policy.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlReport {
    pub rounds: usize,
    pub pulls: Vec<usize>,
    /// Exact KL(P^(a) ‖ Q^(a)) per arm.
    pub arm_kl: Vec<f64>,
    /// Bias-corrected plug-in estimate per arm from outcomes seen under P.
    pub arm_kl_estimate: Vec<f64>,
    pub decomposed_exact: f64,
    pub decomposed_estimate: f64,
    /// Three standard errors of the decomposed estimate.
    pub slack: f64,
    pub bound: f64,
    pub passed: bool,
}

/// Plays `policy` for `rounds` pulls against `p_state` and compares
/// Σ_a T_a·KL(P^(a)‖Q^(a)) with `bound`.
pub fn empirical_kl_between<R: Rng + ?Sized>(
    p_state: &DensityOperator,
    q_state: &DensityOperator,
    policy: &dyn Policy,
    rounds: usize,
    bound: f64,
    rng: &mut R,
) -> Result<KlReport> {
    let env = embed_maqb(p_state, rounds)?;
    let traj = env.simulate_episode(policy, rng)?;
    let q_env = embed_maqb(q_state, 1)?;
    let p_env = embed_maqb(p_state, 1)?;
    let law = |env: &QhmmEnvironment, a: usize| env.conditional_outcome_prob(&env.initial_filter(), a);
    let mut pulls = vec![0usize; 4];
    let mut counts = [[0usize; 4]; 4];
    for s in &traj.steps {
        pulls[s.action] += 1;
        counts[s.action][s.outcome] += 1;
    }
    let (mut arm_kl, mut arm_est) = (Vec::new(), Vec::new());
    let (mut exact, mut est, mut var) = (0.0, 0.0, 0.0);
    for a in 0..4 {
        let (p, q) = (law(&p_env, a)?, law(&q_env, a)?);
        let kl = crate::linalg::kl_divergence(&p, &q);
        arm_kl.push(kl);
        exact += pulls[a] as f64 * kl;
        let n = pulls[a];
        if n == 0 {
            arm_est.push(0.0);
            continue;
        }
        let ph: Vec<f64> = counts[a].iter().map(|&k| k as f64 / n as f64).collect();
        let support = ph.iter().filter(|&&v| v > 0.0).count();
        // Miller–Madow correction of the plug-in bias (k − 1)/(2n).
        let e = crate::linalg::kl_divergence(&ph, &q) - (support.saturating_sub(1)) as f64 / (2.0 * n as f64);
        arm_est.push(e);
        est += n as f64 * e;
        let mean: f64 = (0..4).filter(|&x| ph[x] > 0.0).map(|x| ph[x] * (ph[x] / q[x]).ln()).sum();
        let second: f64 = (0..4).filter(|&x| ph[x] > 0.0).map(|x| ph[x] * (ph[x] / q[x]).ln().powi(2)).sum();
        // Delta-method variance plus the χ² fluctuation that dominates near P = Q.
        var += n as f64 * (second - mean * mean).max(0.0) + (support.saturating_sub(1)) as f64 / 2.0;
    }
    let slack = 3.0 * var.sqrt();
    Ok(KlReport {
        rounds,
        pulls,
        arm_kl,
        arm_kl_estimate: arm_est,
        decomposed_exact: exact,
        decomposed_estimate: est,
        slack,
        bound,
        passed: est <= bound + slack,
    })
}

/// The bandit-pair instance of [`empirical_kl_between`] with bound 8Δ²N/3.
pub fn empirical_kl_check<R: Rng + ?Sized>(pair: &BanditPair, policy: &dyn Policy, rounds: usize, rng: &mut R) -> Result<KlReport> {
    let bound = 8.0 * pair.delta * pair.delta * rounds as f64 / 3.0;
    empirical_kl_between(&pair.rho1, &pair.rho_l, policy, rounds, bound, rng)
}

/// Projective qubit measurements along `n` directions spread over the
/// sphere (a Fibonacci lattice).
pub fn projective_grid(n: usize) -> Vec<Povm> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let phi = golden * i as f64;
            Povm::qubit_projective([r * phi.cos(), r * phi.sin(), z]).expect("unit vector")
        })
        .collect()
}

/// {pI, (1 − p)I}: ignores the state, biased towards outcome 1 for p < 1/2.
pub fn biased_trivial_povm(p: f64) -> Result<Povm> {
    Povm::new(vec![HermitianOperator::identity(2).scale(p), HermitianOperator::identity(2).scale(1.0 - p)])
}

/// The tetrahedral POVM under `n` random unitaries.
pub fn sic_orbit<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Vec<Povm>> {
    let sic = sic_tetrahedron();
    (0..n).map(|_| sic.rotated(&crate::random::unitary(rng, 2))).collect()
}
