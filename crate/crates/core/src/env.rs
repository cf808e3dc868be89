//! The input-output quantum hidden Markov environment.
//!
//! Steps are indexed from 0 in code: step `t` is round `t + 1` of an episode
//! of horizon `L`. The filter carried between rounds is the subnormalized
//! memory state conditioned on the observed history; its trace is the
//! probability of the observed outcomes given the chosen actions.

use std::collections::HashMap;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QhmmError, Result};
use crate::linalg::{
    partial_trace_matrix, CMatrix, Channel, DensityOperator, HermitianOperator, Instrument, MatrixRepr, Povm,
    Subsystem,
};

/// Branch probabilities below this are never sampled.
pub const PROB_ZERO: f64 = 1e-15;

/// Exact enumeration refuses to visit more leaves than this.
pub const ENUMERATION_LIMIT: usize = 1_000_000;

/// RNG for episode `episode` of a run seeded with `seed`: one ChaCha stream
/// per episode, so episodes can be replayed or run in parallel.
pub fn episode_rng(seed: u64, episode: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(episode);
    rng
}

/// Inverse-CDF draw from unnormalized weights, skipping negligible entries.
pub fn sample_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> Option<usize> {
    let total: f64 = weights.iter().filter(|&&w| w >= PROB_ZERO).sum();
    if total <= 0.0 {
        return None;
    }
    let target = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last = None;
    for (i, &w) in weights.iter().enumerate() {
        if w < PROB_ZERO {
            continue;
        }
        acc += w;
        last = Some(i);
        if target < acc {
            return Some(i);
        }
    }
    last
}

#[derive(Clone, Debug)]
pub struct Action {
    pub label: String,
    pub instrument: Arc<Instrument>,
}

/// Reward r(t, a, o).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardTable {
    /// Indexed [action][outcome], the same at every step.
    Stationary(Vec<Vec<f64>>),
    /// Indexed [step][action][outcome].
    PerStep(Vec<Vec<Vec<f64>>>),
}

impl RewardTable {
    pub fn zeros(actions: usize, outcomes: usize) -> Self {
        RewardTable::Stationary(vec![vec![0.0; outcomes]; actions])
    }

    /// Reward 1 on outcome `o` for every action.
    pub fn indicator(actions: usize, outcomes: usize, o: usize) -> Self {
        let mut row = vec![0.0; outcomes];
        row[o] = 1.0;
        RewardTable::Stationary(vec![row; actions])
    }

    pub fn from_fn(horizon: usize, actions: usize, outcomes: usize, f: impl Fn(usize, usize, usize) -> f64) -> Self {
        RewardTable::PerStep(
            (0..horizon).map(|t| (0..actions).map(|a| (0..outcomes).map(|o| f(t, a, o)).collect()).collect()).collect(),
        )
    }

    pub fn get(&self, t: usize, a: usize, o: usize) -> f64 {
        match self {
            RewardTable::Stationary(r) => r[a][o],
            RewardTable::PerStep(r) => r[t][a][o],
        }
    }

    /// R = max |r|.
    pub fn bound(&self) -> f64 {
        let rows: Box<dyn Iterator<Item = &Vec<f64>>> = match self {
            RewardTable::Stationary(r) => Box::new(r.iter()),
            RewardTable::PerStep(r) => Box::new(r.iter().flatten()),
        };
        rows.flatten().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn check(&self, horizon: usize, actions: usize, outcomes: usize) -> Result<()> {
        let bad = |what: &str| Err(QhmmError::DimensionMismatch(format!("reward table {what}")));
        let tables: Vec<&Vec<Vec<f64>>> = match self {
            RewardTable::Stationary(r) => vec![r],
            RewardTable::PerStep(r) => {
                if r.len() != horizon {
                    return bad("step count");
                }
                r.iter().collect()
            }
        };
        for t in tables {
            if t.len() != actions {
                return bad("action count");
            }
            if t.iter().any(|row| row.len() != outcomes) {
                return bad("outcome count");
            }
            if t.iter().flatten().any(|v| !v.is_finite()) {
                return Err(QhmmError::OutOfRange("non-finite reward".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub action: usize,
    pub outcome: usize,
    pub reward: f64,
}

/// τ = (a₁, o₁, …, a_l, o_l) with the rewards received.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub steps: Vec<TrajectoryStep>,
}

impl Trajectory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: &[(usize, usize)]) -> Self {
        Self {
            steps: pairs.iter().map(|&(action, outcome)| TrajectoryStep { action, outcome, reward: 0.0 }).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn push(&mut self, action: usize, outcome: usize, reward: f64) {
        self.steps.push(TrajectoryStep { action, outcome, reward });
    }

    pub fn total_reward(&self) -> f64 {
        self.steps.iter().map(|s| s.reward).sum()
    }

    /// (action, outcome) pairs, the part of a trajectory a likelihood sees.
    pub fn key(&self) -> Vec<(usize, usize)> {
        self.steps.iter().map(|s| (s.action, s.outcome)).collect()
    }
}

/// Sparse distribution over action ids.
#[derive(Clone, Debug, PartialEq)]
pub struct ActionDistribution {
    entries: Vec<(usize, f64)>,
}

impl ActionDistribution {
    pub fn deterministic(action: usize) -> Self {
        Self { entries: vec![(action, 1.0)] }
    }

    pub fn uniform(actions: &[usize]) -> Self {
        let p = 1.0 / actions.len() as f64;
        Self { entries: actions.iter().map(|&a| (a, p)).collect() }
    }

    pub fn new(entries: Vec<(usize, f64)>) -> Result<Self> {
        if entries.iter().any(|&(_, p)| !(0.0..=1.0 + 1e-12).contains(&p)) {
            return Err(QhmmError::OutOfRange("action probability outside [0,1]".into()));
        }
        let s: f64 = entries.iter().map(|e| e.1).sum();
        if (s - 1.0).abs() > 1e-12 {
            return Err(QhmmError::OutOfRange(format!("action probabilities sum to {s}")));
        }
        Ok(Self { entries })
    }

    pub fn entries(&self) -> &[(usize, f64)] {
        &self.entries
    }

    pub fn prob(&self, action: usize) -> f64 {
        self.entries.iter().filter(|e| e.0 == action).map(|e| e.1).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<usize> {
        let w: Vec<f64> = self.entries.iter().map(|e| e.1).collect();
        sample_index(&w, rng).map(|i| self.entries[i].0)
    }
}

/// π_t(· | τ_{t}) as a function of the step index and the history so far.
pub trait Policy: Send + Sync {
    fn distribution(&self, t: usize, history: &Trajectory) -> ActionDistribution;
}

/// Plays a fixed action sequence regardless of outcomes.
#[derive(Clone, Debug)]
pub struct OpenLoopPolicy(pub Vec<usize>);

impl Policy for OpenLoopPolicy {
    fn distribution(&self, t: usize, _: &Trajectory) -> ActionDistribution {
        ActionDistribution::deterministic(self.0[t.min(self.0.len() - 1)])
    }
}

#[derive(Clone, Debug)]
pub struct UniformPolicy {
    pub actions: Vec<usize>,
}

impl UniformPolicy {
    pub fn over(n: usize) -> Self {
        Self { actions: (0..n).collect() }
    }
}

impl Policy for UniformPolicy {
    fn distribution(&self, _: usize, _: &Trajectory) -> ActionDistribution {
        ActionDistribution::uniform(&self.actions)
    }
}

/// Policy from a closure.
pub struct FnPolicy<F>(pub F);

impl<F> Policy for FnPolicy<F>
where
    F: Fn(usize, &Trajectory) -> ActionDistribution + Send + Sync,
{
    fn distribution(&self, t: usize, history: &Trajectory) -> ActionDistribution {
        (self.0)(t, history)
    }
}

/// Deterministic policy keyed by the full (action, outcome) history.
#[derive(Clone, Debug, Default)]
pub struct HistoryPolicy {
    pub table: HashMap<Vec<(usize, usize)>, usize>,
    pub fallback: usize,
}

impl Policy for HistoryPolicy {
    fn distribution(&self, _: usize, history: &Trajectory) -> ActionDistribution {
        ActionDistribution::deterministic(*self.table.get(&history.key()).unwrap_or(&self.fallback))
    }
}

/// ρ̃ after `step` completed rounds.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterState {
    pub tilde_rho: CMatrix,
    pub step: usize,
}

impl FilterState {
    pub fn trace(&self) -> f64 {
        crate::linalg::trace(&self.tilde_rho).re
    }

    /// ρ̃ / Tr ρ̃.
    pub fn normalized(&self) -> Result<DensityOperator> {
        let tr = self.trace();
        if tr <= 0.0 {
            return Err(QhmmError::DegenerateTrajectory);
        }
        DensityOperator::from_matrix(self.tilde_rho.map(|z| z / tr))
    }
}

#[derive(Clone, Debug)]
pub struct StepResult {
    pub outcome: usize,
    pub reward: f64,
    pub filter: FilterState,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ValueMode {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
    /// Exact when enumerable, otherwise Monte Carlo.
    ExactOrMonteCarlo { samples: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValueEstimate {
    pub value: f64,
    /// None for exact enumeration.
    pub std_error: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct QhmmEnvironment {
    memory_dim: usize,
    outcomes: usize,
    horizon: usize,
    rho1: DensityOperator,
    channels: Vec<Channel>,
    actions: Vec<Action>,
    rewards: RewardTable,
    reward_bound: f64,
}

impl QhmmEnvironment {
    pub fn new(
        rho1: DensityOperator,
        channels: Vec<Channel>,
        actions: Vec<Action>,
        rewards: RewardTable,
        horizon: usize,
    ) -> Result<Self> {
        if horizon == 0 {
            return Err(QhmmError::OutOfRange("horizon must be at least 1".into()));
        }
        if actions.is_empty() {
            return Err(QhmmError::EmptyActionSet);
        }
        let s = rho1.dim();
        if channels.len() != horizon - 1 {
            return Err(QhmmError::DimensionMismatch(format!(
                "{} memory channels for horizon {horizon}",
                channels.len()
            )));
        }
        for ch in &channels {
            if ch.dim_in() != s || ch.dim_out() != s {
                return Err(QhmmError::DimensionMismatch("memory channel dims".into()));
            }
            if !ch.is_trace_preserving() {
                return Err(QhmmError::NotTracePreserving(f64::NAN));
            }
        }
        let outcomes = actions[0].instrument.outcomes();
        for a in &actions {
            if a.instrument.dim_in() != s || a.instrument.dim_out() != s || a.instrument.outcomes() != outcomes {
                return Err(QhmmError::DimensionMismatch(format!("instrument of action '{}'", a.label)));
            }
        }
        rewards.check(horizon, actions.len(), outcomes)?;
        let reward_bound = rewards.bound();
        Ok(Self { memory_dim: s, outcomes, horizon, rho1, channels, actions, rewards, reward_bound })
    }

    /// Builds branch maps Φ_o(X) = Tr_{S_O}[(I ⊗ M_o) E(X)] from an emission
    /// channel E: S → S ⊗ S_O and one POVM on S_O per action.
    pub fn from_sequential_emission(
        rho1: DensityOperator,
        emission: &Channel,
        memory_channels: Vec<Channel>,
        povms: Vec<(String, Povm)>,
        rewards: RewardTable,
        horizon: usize,
    ) -> Result<Self> {
        let s = rho1.dim();
        if emission.dim_in() != s || !emission.dim_out().is_multiple_of(s) {
            return Err(QhmmError::DimensionMismatch("emission channel must map S to S⊗S_O".into()));
        }
        let so = emission.dim_out() / s;
        let mut actions = Vec::with_capacity(povms.len());
        for (label, povm) in povms {
            if povm.dim() != so {
                return Err(QhmmError::InvalidPovm(format!("POVM for '{label}' acts on dim {}", povm.dim())));
            }
            let mut sets = Vec::new();
            for e in povm.effects() {
                let root = crate::linalg::hermitian_function(e.matrix(), |v| v.max(0.0).sqrt());
                let lifted = crate::linalg::kron(&CMatrix::identity(s, s), &root);
                let mut kraus = Vec::new();
                for k in emission.kraus() {
                    let mk = &lifted * k;
                    for j in 0..so {
                        // (I ⊗ ⟨j|) picks rows i·so + j.
                        kraus.push(CMatrix::from_fn(s, s, |r, col| mk[(r * so + j, col)]));
                    }
                }
                sets.push(kraus);
            }
            let instrument = Instrument::from_kraus_sets(sets, s, s)?;
            actions.push(Action { label, instrument: Arc::new(instrument) });
        }
        Self::new(rho1, memory_channels, actions, rewards, horizon)
    }

    pub fn memory_dim(&self) -> usize {
        self.memory_dim
    }

    pub fn outcomes(&self) -> usize {
        self.outcomes
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_actions(&self) -> usize {
        self.actions.len()
    }

    pub fn rho1(&self) -> &DensityOperator {
        &self.rho1
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn instrument(&self, a: usize) -> Result<&Instrument> {
        self.actions.get(a).map(|x| x.instrument.as_ref()).ok_or(QhmmError::UnknownAction(a))
    }

    pub fn rewards(&self) -> &RewardTable {
        &self.rewards
    }

    pub fn reward(&self, t: usize, a: usize, o: usize) -> f64 {
        self.rewards.get(t, a, o)
    }

    pub fn reward_bound(&self) -> f64 {
        self.reward_bound
    }

    pub fn initial_filter(&self) -> FilterState {
        FilterState { tilde_rho: self.rho1.matrix().clone(), step: 0 }
    }

    /// Pr(o | τ, a) = Tr Φ_o(ρ̃) / Tr ρ̃.
    pub fn conditional_outcome_prob(&self, filter: &FilterState, action: usize) -> Result<Vec<f64>> {
        let ins = self.instrument(action)?;
        let tr = filter.trace();
        if tr <= 0.0 {
            return Err(QhmmError::DegenerateTrajectory);
        }
        Ok((0..self.outcomes).map(|o| (ins.branch_weight(o, &filter.tilde_rho) / tr).max(0.0)).collect())
    }

    /// E_t(Φ_o(ρ̃)), or Φ_o(ρ̃) on the final round.
    pub fn advance(&self, filter: &FilterState, action: usize, outcome: usize) -> Result<FilterState> {
        if filter.step >= self.horizon {
            return Err(QhmmError::EpisodeFinished { step: filter.step, horizon: self.horizon });
        }
        if outcome >= self.outcomes {
            return Err(QhmmError::OutcomeOutOfRange(outcome));
        }
        let branch = self.instrument(action)?.apply_branch(outcome, &filter.tilde_rho);
        let next = if filter.step + 1 < self.horizon {
            self.channels[filter.step].apply_matrix(&branch)
        } else {
            branch
        };
        Ok(FilterState { tilde_rho: crate::linalg::hermitian_part(&next), step: filter.step + 1 })
    }

    pub fn step<R: Rng + ?Sized>(&self, filter: &FilterState, action: usize, rng: &mut R) -> Result<StepResult> {
        if filter.step >= self.horizon {
            return Err(QhmmError::EpisodeFinished { step: filter.step, horizon: self.horizon });
        }
        let probs = self.conditional_outcome_prob(filter, action)?;
        let outcome = sample_index(&probs, rng).ok_or(QhmmError::DegenerateTrajectory)?;
        let reward = self.reward(filter.step, action, outcome);
        let filter = self.advance(filter, action, outcome)?;
        Ok(StepResult { outcome, reward, filter })
    }

    pub fn simulate_episode<R: Rng + ?Sized>(&self, policy: &dyn Policy, rng: &mut R) -> Result<Trajectory> {
        let mut filter = self.initial_filter();
        let mut traj = Trajectory::new();
        for t in 0..self.horizon {
            let action = policy.distribution(t, &traj).sample(rng).ok_or(QhmmError::DegenerateTrajectory)?;
            let res = self.step(&filter, action, rng)?;
            traj.push(action, res.outcome, res.reward);
            filter = res.filter;
            // Only the direction of ρ̃ matters here; rescale before it underflows.
            let tr = filter.trace();
            if tr > 0.0 {
                filter.tilde_rho.unscale_mut(tr);
            }
        }
        Ok(traj)
    }

    /// A(τ): probability of the outcomes given the actions, via the filter.
    pub fn observation_likelihood(&self, traj: &Trajectory) -> Result<f64> {
        if traj.len() > self.horizon {
            return Err(QhmmError::EpisodeFinished { step: traj.len(), horizon: self.horizon });
        }
        let mut filter = self.initial_filter();
        for s in &traj.steps {
            filter = self.advance(&filter, s.action, s.outcome)?;
        }
        Ok(filter.trace().clamp(0.0, 1.0))
    }

    /// P^π(τ) = π(τ)·A(τ).
    pub fn trajectory_prob(&self, policy: &dyn Policy, traj: &Trajectory) -> Result<f64> {
        let mut prefix = Trajectory::new();
        let mut pi = 1.0;
        for (t, s) in traj.steps.iter().enumerate() {
            pi *= policy.distribution(t, &prefix).prob(s.action);
            prefix.steps.push(*s);
        }
        if pi == 0.0 {
            return Ok(0.0);
        }
        Ok(pi * self.observation_likelihood(traj)?)
    }

    pub fn value_of_policy(&self, policy: &dyn Policy, mode: ValueMode) -> Result<ValueEstimate> {
        match mode {
            ValueMode::Exact => self.exact_value(policy),
            ValueMode::MonteCarlo { samples, seed } => self.monte_carlo_value(policy, samples, seed),
            ValueMode::ExactOrMonteCarlo { samples, seed } => match self.exact_value(policy) {
                Err(QhmmError::EnumerationTooLarge { .. }) => self.monte_carlo_value(policy, samples, seed),
                other => other,
            },
        }
    }

    fn exact_value(&self, policy: &dyn Policy) -> Result<ValueEstimate> {
        let mut leaves = 0usize;
        let mut history = Trajectory::new();
        let value = self.explore(policy, &self.initial_filter(), 1.0, &mut history, &mut leaves)?;
        Ok(ValueEstimate { value, std_error: None })
    }

    /// Σ over reachable continuations of P(node)·r, depth first.
    fn explore(
        &self,
        policy: &dyn Policy,
        filter: &FilterState,
        weight: f64,
        history: &mut Trajectory,
        leaves: &mut usize,
    ) -> Result<f64> {
        let t = filter.step;
        if t == self.horizon {
            *leaves += 1;
            if *leaves > ENUMERATION_LIMIT {
                return Err(QhmmError::EnumerationTooLarge { limit: ENUMERATION_LIMIT });
            }
            return Ok(0.0);
        }
        let mut total = 0.0;
        for &(a, pa) in policy.distribution(t, history).entries() {
            if pa == 0.0 {
                continue;
            }
            let ins = self.instrument(a)?;
            for o in 0..self.outcomes {
                let w = ins.branch_weight(o, &filter.tilde_rho);
                if w <= PROB_ZERO * weight {
                    continue;
                }
                let p = pa * w;
                let r = self.reward(t, a, o);
                total += p * r;
                let next = self.advance(filter, a, o)?;
                history.push(a, o, r);
                total += pa * self.explore(policy, &next, w, history, leaves)?;
                history.steps.pop();
            }
        }
        Ok(total)
    }

    fn monte_carlo_value(&self, policy: &dyn Policy, samples: usize, seed: u64) -> Result<ValueEstimate> {
        let n = samples.max(2);
        let mut sum = 0.0;
        let mut sum2 = 0.0;
        for k in 0..n {
            let mut rng = episode_rng(seed, k as u64);
            let r = self.simulate_episode(policy, &mut rng)?.total_reward();
            sum += r;
            sum2 += r * r;
        }
        let mean = sum / n as f64;
        let var = ((sum2 - n as f64 * mean * mean) / (n as f64 - 1.0)).max(0.0);
        Ok(ValueEstimate { value: mean, std_error: Some((var / n as f64).sqrt()) })
    }

    /// Exhaustive expectimax over histories: the optimal deterministic policy
    /// and its value. Only for tiny instances.
    pub fn plan_exhaustive(&self) -> Result<(HistoryPolicy, f64)> {
        let paths = (self.actions.len() * self.outcomes) as f64;
        if paths.powi(self.horizon as i32) > ENUMERATION_LIMIT as f64 {
            return Err(QhmmError::EnumerationTooLarge { limit: ENUMERATION_LIMIT });
        }
        let mut policy = HistoryPolicy::default();
        let mut history = Vec::new();
        let v = self.expectimax(&self.initial_filter(), &mut history, &mut policy)?;
        Ok((policy, v))
    }

    /// Returns the optimal expected future reward weighted by Tr ρ̃.
    fn expectimax(
        &self,
        filter: &FilterState,
        history: &mut Vec<(usize, usize)>,
        policy: &mut HistoryPolicy,
    ) -> Result<f64> {
        let t = filter.step;
        if t == self.horizon {
            return Ok(0.0);
        }
        let mut best = f64::NEG_INFINITY;
        let mut best_a = 0;
        for a in 0..self.actions.len() {
            let ins = &self.actions[a].instrument;
            let mut q = 0.0;
            for o in 0..self.outcomes {
                let w = ins.branch_weight(o, &filter.tilde_rho);
                if w <= 0.0 {
                    continue;
                }
                q += w * self.reward(t, a, o);
                let next = self.advance(filter, a, o)?;
                history.push((a, o));
                q += self.expectimax(&next, history, policy)?;
                history.pop();
            }
            if q > best {
                best = q;
                best_a = a;
            }
        }
        policy.table.insert(history.clone(), best_a);
        Ok(best)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(&EnvDocument::from_env(self)).map_err(|e| QhmmError::Serialization(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let doc: EnvDocument = serde_json::from_str(s).map_err(|e| QhmmError::Serialization(e.to_string()))?;
        doc.into_env()
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelDoc {
    dim_in: usize,
    dim_out: usize,
    kraus: Vec<MatrixRepr>,
}

impl ChannelDoc {
    fn from_channel(ch: &Channel) -> Self {
        Self { dim_in: ch.dim_in(), dim_out: ch.dim_out(), kraus: ch.kraus().iter().map(MatrixRepr::from_matrix).collect() }
    }

    fn into_channel(self) -> Result<Channel> {
        let kraus = self.kraus.iter().map(|m| m.to_matrix()).collect::<Result<Vec<_>>>()?;
        Channel::from_kraus(kraus, self.dim_in, self.dim_out)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActionDoc {
    label: String,
    branches: Vec<ChannelDoc>,
}

/// On-disk environment format.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EnvDocument {
    memory_dim: usize,
    outcomes: usize,
    horizon: usize,
    rho1: MatrixRepr,
    channels: Vec<ChannelDoc>,
    actions: Vec<ActionDoc>,
    rewards: RewardTable,
}

impl EnvDocument {
    fn from_env(env: &QhmmEnvironment) -> Self {
        Self {
            memory_dim: env.memory_dim,
            outcomes: env.outcomes,
            horizon: env.horizon,
            rho1: MatrixRepr::from_matrix(env.rho1.matrix()),
            channels: env.channels.iter().map(ChannelDoc::from_channel).collect(),
            actions: env
                .actions
                .iter()
                .map(|a| ActionDoc {
                    label: a.label.clone(),
                    branches: a.instrument.branches().iter().map(ChannelDoc::from_channel).collect(),
                })
                .collect(),
            rewards: env.rewards.clone(),
        }
    }

    fn into_env(self) -> Result<QhmmEnvironment> {
        let rho1 = DensityOperator::new(HermitianOperator::new(self.rho1.to_matrix()?)?)?;
        let channels = self.channels.into_iter().map(ChannelDoc::into_channel).collect::<Result<Vec<_>>>()?;
        let actions = self
            .actions
            .into_iter()
            .map(|a| {
                let branches = a.branches.into_iter().map(ChannelDoc::into_channel).collect::<Result<Vec<_>>>()?;
                Ok(Action { label: a.label, instrument: Arc::new(Instrument::new(branches)?) })
            })
            .collect::<Result<Vec<_>>>()?;
        let env = QhmmEnvironment::new(rho1, channels, actions, self.rewards, self.horizon)?;
        if env.memory_dim != self.memory_dim || env.outcomes != self.outcomes {
            return Err(QhmmError::DimensionMismatch("declared dims disagree with matrices".into()));
        }
        Ok(env)
    }
}

/// Marginal on the emitted register S_O of an S⊗S_O operator.
pub fn emitted_register(x: &CMatrix, s: usize, so: usize) -> Result<CMatrix> {
    partial_trace_matrix(x, (s, so), Subsystem::B)
}
