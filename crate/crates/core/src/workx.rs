//! State-agnostic work extraction from a source whose emitted qubit states
//! are driven by a hidden two-state classical memory.
//!
//! Work for outcome i of a measurement in basis {|ψ⟩, |ψ⊥⟩} with target
//! purity λ is β⁻¹(ln 2 + ln λ_i), λ₀ = λ and λ₁ = 1 − λ. The learner's
//! regret on this family is the cumulative dissipated work.

use std::collections::HashMap;
use std::f64::consts::LN_2;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::RngCore;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{episode_rng, Action, Policy, QhmmEnvironment, RewardTable};
use crate::error::{QhmmError, Result};
use crate::learner::{EnvDims, EpisodeLog, ModelFamily, Plan};
use crate::linalg::{
    c, kl_divergence, relative_entropy, shannon_entropy, CMatrix, Channel, DensityOperator, Instrument, Povm,
};
use crate::oom::{ClassicalOom, ObservableOperators};
use crate::planner::{
    backward_value_iteration, evaluate_policy_exact, expected_state, marginal_beliefs, open_loop_random_value,
    walk_policy_tree, ActionGrid, Belief, OpenLoopRandomPolicy, TablePolicy, WorkAction,
};

fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

fn scaled(a: [f64; 3], s: f64) -> [f64; 3] {
    [a[0] * s, a[1] * s, a[2] * s]
}

fn minus(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// Orthonormal (u, v) spanning the plane of the two Bloch vectors, with u
/// along the first nonzero one.
fn emission_plane(r1: [f64; 3], r2: [f64; 3]) -> [[f64; 3]; 2] {
    let u = if norm(r1) > 1e-12 {
        scaled(r1, 1.0 / norm(r1))
    } else if norm(r2) > 1e-12 {
        scaled(r2, 1.0 / norm(r2))
    } else {
        [0.0, 0.0, 1.0]
    };
    let mut v = minus(r2, scaled(u, dot(r2, u)));
    if norm(v) <= 1e-12 {
        // Collinear vectors: any perpendicular direction spans an equally good plane.
        let seed = if u[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
        v = minus(seed, scaled(u, dot(seed, u)));
    }
    let v = scaled(v, 1.0 / norm(v));
    [u, v]
}

/// Hidden two-state memory emitting σ_m, with transition T[m′][m] = T(m′|m).
#[derive(Clone, Debug)]
pub struct EmissionModel {
    sigmas: [DensityOperator; 2],
    bloch: [[f64; 3]; 2],
    plane: [[f64; 3]; 2],
    transition: [[f64; 2]; 2],
    initial: Belief,
    inv_temperature: f64,
}

impl EmissionModel {
    pub fn new(
        sigmas: [DensityOperator; 2],
        transition: [[f64; 2]; 2],
        initial: Belief,
        inv_temperature: f64,
    ) -> Result<Self> {
        for s in &sigmas {
            if s.dim() != 2 {
                return Err(QhmmError::DimensionMismatch("emitted states must be qubits".into()));
            }
        }
        for m in 0..2 {
            let col = [transition[0][m], transition[1][m]];
            if col.iter().any(|x| !(0.0..=1.0).contains(x)) || (col[0] + col[1] - 1.0).abs() > 1e-12 {
                return Err(QhmmError::OutOfRange(format!("transition column {m} is not a distribution")));
            }
        }
        if !(inv_temperature > 0.0 && inv_temperature.is_finite()) {
            return Err(QhmmError::OutOfRange(format!("inverse temperature {inv_temperature}")));
        }
        let bloch = [sigmas[0].bloch(), sigmas[1].bloch()];
        let plane = emission_plane(bloch[0], bloch[1]);
        Ok(Self { sigmas, bloch, plane, transition, initial, inv_temperature })
    }

    /// T = [[θ, 1−θ], [1−θ, θ]].
    pub fn case_study(theta: f64, sigmas: [DensityOperator; 2], initial: Belief, inv_temperature: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&theta) {
            return Err(QhmmError::OutOfRange(format!("θ = {theta} outside [0,1]")));
        }
        Self::new(sigmas, [[theta, 1.0 - theta], [1.0 - theta, theta]], initial, inv_temperature)
    }

    pub fn with_theta(&self, theta: f64) -> Result<Self> {
        Self::case_study(theta, self.sigmas.clone(), self.initial, self.inv_temperature)
    }

    pub fn sigmas(&self) -> &[DensityOperator; 2] {
        &self.sigmas
    }

    pub fn transition(&self) -> [[f64; 2]; 2] {
        self.transition
    }

    pub fn initial(&self) -> Belief {
        self.initial
    }

    pub fn inv_temperature(&self) -> f64 {
        self.inv_temperature
    }

    /// σ₁ ≠ σ₂; otherwise no measurement distinguishes the memory states.
    pub fn identifiable(&self) -> bool {
        self.sigmas[0].op().max_abs_diff(self.sigmas[1].op()) > 1e-10
    }

    /// n(φ) = cos φ·u + sin φ·v.
    pub fn direction(&self, basis_angle: f64) -> [f64; 3] {
        let [u, v] = self.plane;
        let (s, co) = basis_angle.sin_cos();
        [co * u[0] + s * v[0], co * u[1] + s * v[1], co * u[2] + s * v[2]]
    }

    /// Angle in [0, π) of the basis whose axis is the in-plane part of `r`.
    pub fn angle_of_direction(&self, r: [f64; 3]) -> f64 {
        let [u, v] = self.plane;
        let phi = dot(r, v).atan2(dot(r, u));
        phi.rem_euclid(std::f64::consts::PI)
    }

    /// p(0|m) = ⟨ψ|σ_m|ψ⟩ = (1 + n·r_m)/2.
    pub fn emission_probs(&self, basis_angle: f64) -> [f64; 2] {
        let n = self.direction(basis_angle);
        [(1.0 + dot(n, self.bloch[0])) / 2.0, (1.0 + dot(n, self.bloch[1])) / 2.0]
    }

    pub fn measurement(&self, basis_angle: f64) -> Povm {
        Povm::qubit_projective(self.direction(basis_angle)).expect("unit direction")
    }

    /// ρ_a = λ|ψ⟩⟨ψ| + (1 − λ)|ψ⊥⟩⟨ψ⊥|.
    pub fn target_state(&self, action: &WorkAction) -> DensityOperator {
        DensityOperator::from_bloch(scaled(self.direction(action.basis_angle), 2.0 * action.purity - 1.0))
            .expect("purity in [0,1]")
    }

    /// The measurement read through the classical memory: branch o maps
    /// |m⟩⟨m| to p(o|m)|m⟩⟨m| and kills coherences.
    pub fn instrument(&self, basis_angle: f64) -> Instrument {
        let e = self.emission_probs(basis_angle);
        let sets = (0..2)
            .map(|o| {
                (0..2)
                    .map(|m| {
                        let p = if o == 0 { e[m] } else { 1.0 - e[m] };
                        let mut k = CMatrix::zeros(2, 2);
                        k[(m, m)] = c(p.max(0.0).sqrt(), 0.0);
                        k
                    })
                    .collect()
            })
            .collect();
        Instrument::from_kraus_sets(sets, 2, 2).expect("classical readout is an instrument")
    }

    /// The memory transition as a channel on the classical register.
    pub fn memory_channel(&self) -> Channel {
        let mut kraus = Vec::new();
        for m in 0..2 {
            for m2 in 0..2 {
                let p = self.transition[m2][m];
                if p > 0.0 {
                    let mut k = CMatrix::zeros(2, 2);
                    k[(m2, m)] = c(p.sqrt(), 0.0);
                    kraus.push(k);
                }
            }
        }
        Channel::from_kraus(kraus, 2, 2).expect("stochastic matrix gives a channel")
    }
}

/// O^(a) = [[1−q₁, 1−q₂], [q₁, q₂]] with q_m = Tr(M₁ σ_m), and whether it is
/// invertible.
pub fn observation_matrix(model: &EmissionModel, basis_angle: f64) -> ([[f64; 2]; 2], bool) {
    let e = model.emission_probs(basis_angle);
    let (q1, q2) = (1.0 - e[0], 1.0 - e[1]);
    ([[1.0 - q1, 1.0 - q2], [q1, q2]], (q1 - q2).abs() > 1e-10)
}

/// (w₀, w₁) = β⁻¹(ln 2 + ln λ, ln 2 + ln(1 − λ)).
pub fn work_values(purity: f64, inv_temperature: f64) -> (f64, f64) {
    ((LN_2 + purity.ln()) / inv_temperature, (LN_2 + (1.0 - purity).ln()) / inv_temperature)
}

/// β⁻¹[D(ρ‖I/2) − D(ρ‖ρ*)]: expected work of the protocol tailored to
/// `target` when fed `rho`.
pub fn expected_work_arbitrary(rho: &DensityOperator, target: &DensityOperator, inv_temperature: f64) -> f64 {
    let gamma = DensityOperator::maximally_mixed(rho.dim());
    (relative_entropy(rho, &gamma) - relative_entropy(rho, target)) / inv_temperature
}

/// Target eigenvalues ordered so that p₀ ≥ 1/2, with the weights ⟨φ_i|ρ|φ_i⟩
/// that the dephasing step assigns to each label.
fn protocol_setup(rho: &DensityOperator, target: &DensityOperator, eps: f64) -> Result<(f64, [f64; 2])> {
    if rho.dim() != 2 || target.dim() != 2 {
        return Err(QhmmError::DimensionMismatch("the protocol acts on a qubit".into()));
    }
    let (vals, vecs) = target.op().eigen();
    // Ascending order: the larger eigenvalue is label 0.
    let order = [1usize, 0];
    let p0 = vals[order[0]];
    if p0 > 1.0 - eps {
        return Err(QhmmError::OutOfRange(format!("target eigenvalue {p0} exceeds 1 − ε = {}", 1.0 - eps)));
    }
    let mut weights = [0.0; 2];
    for (i, &k) in order.iter().enumerate() {
        let v = vecs.column(k);
        weights[i] = (v.adjoint() * rho.matrix() * v)[(0, 0)].re.clamp(0.0, 1.0);
    }
    let s = weights[0] + weights[1];
    Ok((p0, [weights[0] / s, weights[1] / s]))
}

/// ν(l) for l = 1..=M, stored at index l − 1.
fn protocol_gaps(p0: f64, m: usize, inv_temperature: f64) -> Vec<f64> {
    let p1 = 1.0 - p0;
    let dp = (p0 - 0.5) / m as f64;
    (1..=m)
        .map(|l| {
            let l = l as f64;
            ((p0 - l * dp) / (p1 + l * dp)).ln() / inv_temperature
        })
        .collect()
}

/// Exact mean of the finite-M protocol:
/// −iν(1) + Σ_{l<M} p_{1,l}(ν(l) − ν(l+1)) + p_{1,M}ν(M), averaged over i.
pub fn protocol_expected_work(
    rho: &DensityOperator,
    target: &DensityOperator,
    m: usize,
    inv_temperature: f64,
    eps: f64,
) -> Result<f64> {
    if m == 0 {
        return Err(QhmmError::OutOfRange("M must be at least 1".into()));
    }
    let (p0, w) = protocol_setup(rho, target, eps)?;
    let nu = protocol_gaps(p0, m, inv_temperature);
    let dp = (p0 - 0.5) / m as f64;
    let p1l = |l: usize| 1.0 - p0 + l as f64 * dp;
    let mut common = p1l(m) * nu[m - 1];
    for l in 1..m {
        common += p1l(l) * (nu[l - 1] - nu[l]);
    }
    Ok(common - w[1] * nu[0])
}

/// Sample mean and spread of the protocol's work.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolEstimate {
    pub mean: f64,
    pub std: f64,
    pub stderr: f64,
    pub samples: usize,
}

const PROTOCOL_CHUNK: usize = 1024;

/// Monte Carlo of the finite-M protocol: dephase in the target eigenbasis,
/// then run the bit through M thermal swaps, banking (x_l − x_{l−1})ν(l).
/// Chunk c of samples draws from stream c of `seed`, so results do not depend
/// on the thread count.
pub fn protocol_monte_carlo(
    rho: &DensityOperator,
    target: &DensityOperator,
    m: usize,
    inv_temperature: f64,
    n_samples: usize,
    seed: u64,
    eps: f64,
) -> Result<ProtocolEstimate> {
    if m == 0 || n_samples < 2 {
        return Err(QhmmError::OutOfRange("need M ≥ 1 and at least 2 samples".into()));
    }
    let (p0, w) = protocol_setup(rho, target, eps)?;
    let nu = protocol_gaps(p0, m, inv_temperature);
    let dp = (p0 - 0.5) / m as f64;
    let to_threshold = |p: f64| (p.clamp(0.0, 1.0) * 18_446_744_073_709_551_616.0) as u64;
    let thresholds: Vec<u64> = (1..=m).map(|l| to_threshold(1.0 - p0 + l as f64 * dp)).collect();
    let start = to_threshold(w[1]);
    let chunks = n_samples.div_ceil(PROTOCOL_CHUNK);
    let stats: Vec<(f64, f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let mut rng = episode_rng(seed, ci as u64);
            let n = PROTOCOL_CHUNK.min(n_samples - ci * PROTOCOL_CHUNK);
            let (mut mean, mut m2) = (0.0, 0.0);
            for s in 0..n {
                let mut prev = rng.next_u64() < start;
                let mut work = 0.0;
                for (thr, g) in thresholds.iter().zip(&nu) {
                    let x = rng.next_u64() < *thr;
                    if x != prev {
                        work += if x { *g } else { -*g };
                    }
                    prev = x;
                }
                let delta = work - mean;
                mean += delta / (s + 1) as f64;
                m2 += delta * (work - mean);
            }
            (n as f64, mean, m2)
        })
        .collect();
    // Chan et al. pairwise merge, in chunk order.
    let (mut n, mut mean, mut m2) = (0.0, 0.0, 0.0);
    for (nb, mb, m2b) in stats {
        let tot = n + nb;
        let d = mb - mean;
        mean += d * nb / tot;
        m2 += m2b + d * d * n * nb / tot;
        n = tot;
    }
    let std = (m2 / (n - 1.0)).sqrt();
    Ok(ProtocolEstimate { mean, std, stderr: std / n.sqrt(), samples: n_samples })
}

/// Purity clamp for a run of K episodes: max(1/K, 10⁻⁶).
pub fn purity_clamp(episodes: usize) -> f64 {
    (1.0 / episodes.max(1) as f64).max(1e-6)
}

/// Settings of the two-state case study.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CaseStudyConfig {
    pub bloch: [[f64; 3]; 2],
    pub inv_temperature: f64,
    pub initial: f64,
    pub n_belief: usize,
    pub n_angle: usize,
    pub eps: f64,
    pub theta_bounds: (f64, f64),
}

impl Default for CaseStudyConfig {
    fn default() -> Self {
        Self {
            bloch: [[0.0, 0.0, 1.0], [3f64.sqrt() / 2.0, 0.0, -0.5]],
            inv_temperature: 1.0,
            initial: 0.5,
            n_belief: 201,
            n_angle: 64,
            eps: purity_clamp(500),
            theta_bounds: (0.01, 0.99),
        }
    }
}

impl CaseStudyConfig {
    pub fn model(&self, theta: f64) -> Result<EmissionModel> {
        let sigmas = [DensityOperator::from_bloch(self.bloch[0])?, DensityOperator::from_bloch(self.bloch[1])?];
        EmissionModel::case_study(theta, sigmas, Belief::new(self.initial)?, self.inv_temperature)
    }
}

/// The θ-parameterized family of case-study environments over a fixed
/// discretized action grid.
#[derive(Clone, Debug)]
pub struct WorkFamily {
    config: CaseStudyConfig,
    horizon: usize,
    base: EmissionModel,
    grid: Arc<ActionGrid>,
    bounds: [(f64, f64); 1],
    instruments: Vec<Arc<Instrument>>,
}

impl WorkFamily {
    pub fn new(config: CaseStudyConfig, horizon: usize) -> Result<Self> {
        if horizon == 0 {
            return Err(QhmmError::OutOfRange("horizon must be at least 1".into()));
        }
        let (lo, hi) = config.theta_bounds;
        if !(0.0 <= lo && lo < hi && hi <= 1.0) {
            return Err(QhmmError::OutOfRange(format!("θ bounds ({lo}, {hi})")));
        }
        let base = config.model(0.5)?;
        if !base.identifiable() {
            return Err(QhmmError::Identifiability("σ₁ = σ₂".into()));
        }
        let grid = Arc::new(ActionGrid::new(&base, config.n_belief, config.n_angle, config.eps)?);
        let instruments = grid.angles().iter().map(|&phi| Arc::new(base.instrument(phi))).collect();
        Ok(Self { bounds: [config.theta_bounds], config, horizon, base, grid, instruments })
    }

    pub fn config(&self) -> &CaseStudyConfig {
        &self.config
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn grid(&self) -> &Arc<ActionGrid> {
        &self.grid
    }

    pub fn model(&self, theta: f64) -> Result<EmissionModel> {
        self.base.with_theta(theta)
    }

    /// β⁻¹(ln 2 + ln(1/ε)), an upper bound on |work| for any clamped purity.
    pub fn declared_reward_bound(&self) -> f64 {
        (LN_2 - self.config.eps.ln()) / self.config.inv_temperature
    }

    pub fn rewards(&self) -> RewardTable {
        let beta = self.config.inv_temperature;
        RewardTable::Stationary(
            (0..self.grid.num_actions())
                .map(|a| {
                    let (w0, w1) = work_values(self.grid.work_action(a).purity, beta);
                    vec![w0, w1]
                })
                .collect(),
        )
    }

    pub fn table_policy(&self, theta: f64) -> Result<TablePolicy> {
        let model = self.model(theta)?;
        let table = Arc::new(backward_value_iteration(&model, &self.grid, self.horizon));
        Ok(TablePolicy { model, grid: self.grid.clone(), table })
    }

    pub fn random_policy(&self, theta: f64) -> Result<OpenLoopRandomPolicy> {
        Ok(OpenLoopRandomPolicy::new(&self.model(theta)?, self.grid.clone(), self.horizon))
    }

    fn theta(&self, params: &[f64]) -> Result<f64> {
        match params {
            [t] => Ok(*t),
            _ => Err(QhmmError::DimensionMismatch(format!("expected 1 parameter, got {}", params.len()))),
        }
    }
}

impl ModelFamily for WorkFamily {
    fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    fn dims(&self) -> EnvDims {
        EnvDims { horizon: self.horizon, actions: self.instruments.len(), outcomes: 2, memory_dim: 2 }
    }

    fn instantiate(&self, params: &[f64]) -> Result<QhmmEnvironment> {
        let model = self.model(self.theta(params)?)?;
        let init = model.initial();
        let rho1 = DensityOperator::diagonal(&init.probs)?;
        let channels = vec![model.memory_channel(); self.horizon - 1];
        let na = self.grid.angles().len();
        let actions = (0..self.grid.num_actions())
            .map(|id| Action { label: format!("b{}-a{}", id / na, id % na), instrument: self.instruments[id % na].clone() })
            .collect();
        QhmmEnvironment::new(rho1, channels, actions, self.rewards(), self.horizon)
    }

    /// Likelihoods depend on the basis only, not on the purity.
    fn likelihood_action(&self, action: usize) -> usize {
        self.grid.decode(action).1
    }

    fn observable_model(&self, params: &[f64]) -> Result<Box<dyn ObservableOperators + Send + Sync>> {
        let model = self.model(self.theta(params)?)?;
        let t = model.transition();
        let tm = DMatrix::from_fn(2, 2, |i, j| t[i][j]);
        let emissions = (0..self.grid.angles().len())
            .map(|k| {
                let e = self.grid.emission(k);
                DMatrix::from_row_slice(2, 2, &[e[0], e[1], 1.0 - e[0], 1.0 - e[1]])
            })
            .collect::<Vec<_>>();
        let n = emissions.len();
        let init = DVector::from_column_slice(&model.initial().probs);
        Ok(Box::new(ClassicalOom::new(init, vec![tm; self.horizon.saturating_sub(1)], emissions, (0..n).collect())?))
    }

    fn plan(&self, params: &[f64]) -> Result<Plan> {
        let theta = self.theta(params)?;
        let policy = self.table_policy(theta)?;
        let value = evaluate_policy_exact(&policy.model, &self.grid, self.horizon, &policy)?;
        Ok(Plan { policy: Arc::new(policy), value })
    }
}

/// Builds the case-study environment at θ together with its family.
pub fn build_case_study(theta: f64, horizon: usize, config: &CaseStudyConfig) -> Result<(QhmmEnvironment, WorkFamily)> {
    let family = WorkFamily::new(config.clone(), horizon)?;
    let env = family.instantiate(&[theta])?;
    Ok((env, family))
}

/// Expected work of `policy` computed from entropies: β⁻¹(L ln 2 − E[Σ_l c_l])
/// where c_l = H(p_l) + KL(p_l‖λ_l) before the last round and
/// S(ξ_L) + D(ξ_L‖ρ_{a_L}) in the last one. The KL and D terms are the local
/// mismatch; they vanish when the purity matches the outcome law.
pub fn entropy_form_value(model: &EmissionModel, grid: &ActionGrid, horizon: usize, policy: &dyn Policy) -> Result<f64> {
    let mut cost = 0.0;
    walk_policy_tree(model, grid, horizon, policy, &mut |n| {
        let action = n.grid.work_action(n.action);
        let c = if n.t + 1 < horizon {
            let e = model.emission_probs(action.basis_angle);
            let p0 = n.belief.probs[0] * e[0] + n.belief.probs[1] * e[1];
            let p = [p0, 1.0 - p0];
            shannon_entropy(&p) + kl_divergence(&p, &[action.purity, 1.0 - action.purity])
        } else {
            let xi = expected_state(&n.belief, model);
            xi.von_neumann_entropy() + relative_entropy(&xi, &model.target_state(&action))
        };
        cost += n.weight * c;
    })?;
    Ok((horizon as f64 * LN_2 - cost) / model.inv_temperature())
}

/// One row of cumulative dissipation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DissipationRow {
    pub episode: usize,
    pub value_form: f64,
    pub entropy_form: f64,
    pub random_baseline: f64,
}

/// Agreement required between the value and entropy forms per episode.
pub const IDENTITY_TOL: f64 = 1e-9;

/// Cumulative dissipation of a learning run, from the value function and
/// from entropies, plus the open-loop random baseline. Fails if the two
/// forms of any episode's dissipation differ by more than [`IDENTITY_TOL`].
pub fn dissipation_series(logs: &[EpisodeLog], family: &WorkFamily, truth: f64) -> Result<Vec<DissipationRow>> {
    let model = family.model(truth)?;
    let grid = family.grid();
    let l = family.horizon();
    let star = family.table_policy(truth)?;
    let v_star = evaluate_policy_exact(&model, grid, l, &star)?;
    let e_star = entropy_form_value(&model, grid, l, &star)?;
    let random = family.random_policy(truth)?;
    let gap_random = v_star - open_loop_random_value(&model, &random, l);
    let mut cache: HashMap<u64, (f64, f64)> = HashMap::new();
    let (mut cv, mut ce) = (0.0, 0.0);
    let mut rows = Vec::with_capacity(logs.len());
    for log in logs {
        let theta = family.theta(&log.chosen_params)?;
        let (v, e) = match cache.get(&theta.to_bits()) {
            Some(&pair) => pair,
            None => {
                let pol = family.table_policy(theta)?;
                let pair = (evaluate_policy_exact(&model, grid, l, &pol)?, entropy_form_value(&model, grid, l, &pol)?);
                cache.insert(theta.to_bits(), pair);
                pair
            }
        };
        let (dv, de) = (v_star - v, e_star - e);
        if (dv - de).abs() > IDENTITY_TOL {
            return Err(QhmmError::IdentityViolation(format!(
                "episode {}: value form {dv:.15e} vs entropy form {de:.15e}",
                log.episode
            )));
        }
        cv += dv;
        ce += de;
        rows.push(DissipationRow {
            episode: log.episode,
            value_form: cv,
            entropy_form: ce,
            random_baseline: gap_random * log.episode as f64,
        });
    }
    Ok(rows)
}

/// Cumulative realized dissipation Σ_k (V* − W_k) of the open-loop random
/// policy over `episodes` simulated episodes of `env`.
pub fn simulate_random_baseline(env: &QhmmEnvironment, family: &WorkFamily, truth: f64, episodes: usize, seed: u64) -> Result<Vec<f64>> {
    let model = family.model(truth)?;
    let star = family.table_policy(truth)?;
    let v_star = evaluate_policy_exact(&model, family.grid(), family.horizon(), &star)?;
    let random = family.random_policy(truth)?;
    let mut acc = 0.0;
    (1..=episodes)
        .map(|k| {
            let traj = env.simulate_episode(&random, &mut episode_rng(seed, k as u64))?;
            acc += v_star - traj.total_reward();
            Ok(acc)
        })
        .collect()
}

/// Unconditional memory distribution at each round, exposed for reports.
pub fn marginal_memory(model: &EmissionModel, horizon: usize) -> Vec<[f64; 2]> {
    marginal_beliefs(model, horizon).into_iter().map(|b| b.probs).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{shannon_entropy, trace_norm_matrix};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn orthogonal() -> EmissionModel {
        EmissionModel::case_study(
            0.7,
            [DensityOperator::basis_state(2, 0), DensityOperator::basis_state(2, 1)],
            Belief::uniform(),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn observation_matrix_examples() {
        let (o, inv) = observation_matrix(&orthogonal(), 0.0);
        assert!(inv);
        assert!((o[0][0] - 1.0).abs() < 1e-15 && o[0][1].abs() < 1e-15 && o[1][0].abs() < 1e-15);
        let s = DensityOperator::from_bloch([0.3, 0.0, 0.2]).unwrap();
        let same = EmissionModel::case_study(0.7, [s.clone(), s], Belief::uniform(), 1.0).unwrap();
        assert!(!same.identifiable());
        for k in 0..16 {
            assert!(!observation_matrix(&same, k as f64 * 0.2).1);
        }
        let cfg = CaseStudyConfig::default();
        let m = cfg.model(0.8).unwrap();
        for k in 0..50 {
            let (o, _) = observation_matrix(&m, k as f64 * 0.063);
            for j in 0..2 {
                assert!((o[0][j] + o[1][j] - 1.0).abs() < 1e-15);
                assert!((0.0..=1.0).contains(&o[0][j]) && (0.0..=1.0).contains(&o[1][j]));
            }
        }
    }

    #[test]
    fn work_value_examples() {
        assert_eq!(work_values(0.5, 1.0), (0.0, 0.0));
        let (a, b) = work_values(0.9, 1.0);
        assert!((a - 1.8f64.ln()).abs() < 1e-15 && (b - 0.2f64.ln()).abs() < 1e-15);
        let (a2, b2) = work_values(0.9, 2.0);
        assert!((a2 - a / 2.0).abs() < 1e-15 && (b2 - b / 2.0).abs() < 1e-15);
    }

    #[test]
    fn arbitrary_input_work() {
        let rho = DensityOperator::diagonal(&[0.9, 0.1]).unwrap();
        let w = expected_work_arbitrary(&rho, &rho, 1.0);
        assert!((w - (LN_2 - shannon_entropy(&[0.9, 0.1]))).abs() < 1e-12);
        let target = DensityOperator::from_bloch([0.3, -0.4, 0.5]).unwrap();
        let mixed = DensityOperator::maximally_mixed(2);
        assert!(expected_work_arbitrary(&mixed, &target, 1.0) <= 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let rho = crate::random::density(&mut rng, 2);
            let sigma = crate::random::density(&mut rng, 2);
            assert!(expected_work_arbitrary(&rho, &rho, 1.0) >= expected_work_arbitrary(&rho, &sigma, 1.0) - 1e-12);
            // Born-rule average over the target's eigenbasis.
            let (vals, vecs) = sigma.op().eigen();
            let mut want = 0.0;
            for i in 0..2 {
                let v = vecs.column(i);
                let p = (v.adjoint() * rho.matrix() * v)[(0, 0)].re;
                want += p * (LN_2 + vals[i].ln());
            }
            assert!((expected_work_arbitrary(&rho, &sigma, 1.0) - want).abs() < 1e-10);
        }
    }

    #[test]
    fn protocol_for_maximally_mixed_target_is_idle() {
        let rho = DensityOperator::basis_state(2, 0);
        let t = DensityOperator::maximally_mixed(2);
        let est = protocol_monte_carlo(&rho, &t, 50, 1.0, 1000, 1, 1e-6).unwrap();
        assert_eq!(est.mean, 0.0);
        assert_eq!(est.std, 0.0);
        assert_eq!(protocol_expected_work(&rho, &t, 50, 1.0, 1e-6).unwrap(), 0.0);
    }

    #[test]
    fn protocol_rejects_pure_targets() {
        let rho = DensityOperator::basis_state(2, 0);
        assert!(protocol_expected_work(&rho, &rho, 10, 1.0, 1e-6).is_err());
    }

    #[test]
    fn protocol_exact_mean_matches_brute_force() {
        // Enumerate all 2^(M+1) bit chains for a tiny M.
        let rho = DensityOperator::from_bloch([0.2, 0.1, 0.4]).unwrap();
        let target = DensityOperator::diagonal(&[0.3, 0.7]).unwrap();
        let m = 6;
        let (p0, w) = protocol_setup(&rho, &target, 1e-6).unwrap();
        let nu = protocol_gaps(p0, m, 1.0);
        let dp = (p0 - 0.5) / m as f64;
        let mut want = 0.0;
        for bits in 0u32..(1 << (m + 1)) {
            let x: Vec<usize> = (0..=m).map(|l| ((bits >> l) & 1) as usize).collect();
            let mut p = w[x[0]];
            let mut work = 0.0;
            for l in 1..=m {
                let p1 = 1.0 - p0 + l as f64 * dp;
                p *= if x[l] == 1 { p1 } else { 1.0 - p1 };
                work += (x[l] as f64 - x[l - 1] as f64) * nu[l - 1];
            }
            want += p * work;
        }
        let got = protocol_expected_work(&rho, &target, m, 1.0, 1e-6).unwrap();
        assert!((got - want).abs() < 1e-13, "{got} vs {want}");
        let mc = protocol_monte_carlo(&rho, &target, m, 1.0, 200_000, 7, 1e-6).unwrap();
        assert!((mc.mean - want).abs() < 4.0 * mc.stderr);
    }

    #[test]
    fn protocol_monte_carlo_is_seeded() {
        let rho = DensityOperator::basis_state(2, 0);
        let t = DensityOperator::diagonal(&[0.8, 0.2]).unwrap();
        let a = protocol_monte_carlo(&rho, &t, 100, 1.0, 5000, 11, 1e-6).unwrap();
        let b = protocol_monte_carlo(&rho, &t, 100, 1.0, 5000, 11, 1e-6).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn classical_instrument_matches_measurement() {
        let m = CaseStudyConfig::default().model(0.8).unwrap();
        let phi = 0.7;
        let ins = m.instrument(phi);
        let povm = m.measurement(phi);
        for (k, s) in m.sigmas().iter().enumerate() {
            let probs = povm.probabilities(s);
            let mem = DensityOperator::basis_state(2, k);
            for o in 0..2 {
                assert!((ins.branch_weight(o, mem.matrix()) - probs[o]).abs() < 1e-14);
            }
        }
        let rho = DensityOperator::diagonal(&[0.3, 0.7]).unwrap();
        let out = m.memory_channel().apply_matrix(rho.matrix());
        let want = DensityOperator::diagonal(&[0.8 * 0.3 + 0.2 * 0.7, 0.2 * 0.3 + 0.8 * 0.7]).unwrap();
        assert!(trace_norm_matrix(&(out - want.matrix())) < 1e-14);
    }

    #[test]
    fn case_study_reward_bound() {
        let mut cfg = CaseStudyConfig::default();
        cfg.n_belief = 11;
        cfg.n_angle = 8;
        let (env, family) = build_case_study(0.8, 2, &cfg).unwrap();
        let eps = cfg.eps;
        // A grid belief at a vertex with a sharp basis drives λ to the clamp.
        assert!((env.reward_bound() - (-eps.ln() - LN_2)).abs() < 1e-12);
        assert!(env.reward_bound() <= family.declared_reward_bound());
        assert!((family.declared_reward_bound() - (LN_2 + (1.0 / eps).ln())).abs() < 1e-12);
    }
}
