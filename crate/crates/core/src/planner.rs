//! Belief-MDP planning for a two-state classical memory that emits known
//! qubit states.
//!
//! An action measures in a basis {|ψ⟩, |ψ⊥⟩} lying in the plane of the two
//! emitted Bloch vectors and extracts work against a target purity λ. The
//! agent's belief η over the hidden memory is the state of the MDP.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::env::{ActionDistribution, Policy, Trajectory, ENUMERATION_LIMIT, PROB_ZERO};
use crate::error::{QhmmError, Result};
use crate::linalg::{relative_entropy, DensityOperator};
use crate::workx::EmissionModel;

const LN2: f64 = std::f64::consts::LN_2;

/// Probability distribution over the two memory states.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Belief {
    pub probs: [f64; 2],
}

impl Belief {
    pub fn new(p1: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p1) {
            return Err(QhmmError::OutOfRange(format!("belief {p1} outside [0,1]")));
        }
        Ok(Self { probs: [p1, 1.0 - p1] })
    }

    pub fn from_weights(w: [f64; 2]) -> Result<Self> {
        let s = w[0] + w[1];
        if !(s > 0.0) || w[0] < 0.0 || w[1] < 0.0 {
            return Err(QhmmError::ImpossibleObservation);
        }
        Ok(Self { probs: [w[0] / s, w[1] / s] })
    }

    pub fn uniform() -> Self {
        Self { probs: [0.5, 0.5] }
    }
}

/// Measurement basis angle and target purity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkAction {
    pub basis_angle: f64,
    pub purity: f64,
}

/// ξ_η = Σ η(m) σ_m.
pub fn expected_state(belief: &Belief, model: &EmissionModel) -> DensityOperator {
    DensityOperator::mixture(&belief.probs, model.sigmas()).expect("mixture of states is a state")
}

/// Bayes update on outcome `outcome` of the basis at `basis_angle`, then one
/// step of the memory dynamics.
pub fn belief_update(belief: &Belief, basis_angle: f64, outcome: usize, model: &EmissionModel) -> Result<Belief> {
    let e = model.emission_probs(basis_angle);
    update_with(belief, &e, outcome, &model.transition())
}

/// Same as [`belief_update`] with precomputed p(0|m).
pub(crate) fn update_with(belief: &Belief, e: &[f64; 2], outcome: usize, t: &[[f64; 2]; 2]) -> Result<Belief> {
    let lik = |m: usize| if outcome == 0 { e[m] } else { 1.0 - e[m] };
    let post = [belief.probs[0] * lik(0), belief.probs[1] * lik(1)];
    let z = post[0] + post[1];
    if z <= PROB_ZERO {
        return Err(QhmmError::ImpossibleObservation);
    }
    let post = [post[0] / z, post[1] / z];
    Belief::from_weights([t[0][0] * post[0] + t[0][1] * post[1], t[1][0] * post[0] + t[1][1] * post[1]])
}

/// λ = ⟨ψ|ξ_η|ψ⟩ clamped to [ε, 1 − ε].
pub fn optimal_purity(belief: &Belief, basis_angle: f64, model: &EmissionModel, eps: f64) -> f64 {
    let e = model.emission_probs(basis_angle);
    clamp_purity(belief.probs[0] * e[0] + belief.probs[1] * e[1], eps)
}

pub fn clamp_purity(p: f64, eps: f64) -> f64 {
    p.clamp(eps, 1.0 - eps)
}

/// β⁻¹[D(ξ‖I/2) − D(ξ‖ρ_a)] with ρ_a = λ|ψ⟩⟨ψ| + (1−λ)|ψ⊥⟩⟨ψ⊥|.
pub fn expected_immediate_work(belief: &Belief, action: &WorkAction, model: &EmissionModel) -> f64 {
    let xi = expected_state(belief, model);
    let target = model.target_state(action);
    let gamma = DensityOperator::maximally_mixed(2);
    (relative_entropy(&xi, &gamma) - relative_entropy(&xi, &target)) / model.inv_temperature()
}

/// β·E[w] from Born probabilities: ln 2 + p₀ ln λ + p₁ ln(1 − λ).
#[inline]
pub(crate) fn born_work(p0: f64, lambda: f64) -> f64 {
    let mut w = LN2;
    if p0 > 0.0 {
        w += p0 * lambda.ln();
    }
    if p0 < 1.0 {
        w += (1.0 - p0) * (1.0 - lambda).ln();
    }
    w
}

/// Discretized beliefs and measurement angles with their purities.
///
/// Action id = belief_index · angles.len() + angle_index; the action plays
/// the angle with the purity optimal for that grid belief.
#[derive(Clone, Debug)]
pub struct ActionGrid {
    beliefs: Vec<f64>,
    angles: Vec<f64>,
    emissions: Vec<[f64; 2]>,
    lambdas: Vec<f64>,
    eps: f64,
    dropped_angles: usize,
}

impl ActionGrid {
    /// Angles whose observation matrix is singular are left out.
    pub fn new(model: &EmissionModel, n_belief: usize, n_angle: usize, eps: f64) -> Result<Self> {
        if n_belief < 2 || n_angle < 2 {
            return Err(QhmmError::OutOfRange("grids need at least 2 points".into()));
        }
        if !(0.0..0.5).contains(&eps) {
            return Err(QhmmError::OutOfRange(format!("purity clamp {eps} outside [0, 1/2)")));
        }
        let beliefs: Vec<f64> = (0..n_belief).map(|i| i as f64 / (n_belief - 1) as f64).collect();
        let mut angles = Vec::new();
        let mut emissions = Vec::new();
        for j in 0..n_angle {
            let phi = std::f64::consts::PI * j as f64 / n_angle as f64;
            let e = model.emission_probs(phi);
            if (e[0] - e[1]).abs() > 1e-10 {
                angles.push(phi);
                emissions.push(e);
            }
        }
        if angles.is_empty() {
            return Err(QhmmError::Identifiability("every grid basis has a singular observation matrix".into()));
        }
        let mut lambdas = Vec::with_capacity(beliefs.len() * angles.len());
        for &b in &beliefs {
            for e in &emissions {
                lambdas.push(clamp_purity(b * e[0] + (1.0 - b) * e[1], eps));
            }
        }
        let dropped_angles = n_angle - emissions.len();
        Ok(Self { beliefs, angles, emissions, lambdas, eps, dropped_angles })
    }

    pub fn beliefs(&self) -> &[f64] {
        &self.beliefs
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn dropped_angles(&self) -> usize {
        self.dropped_angles
    }

    pub fn num_actions(&self) -> usize {
        self.beliefs.len() * self.angles.len()
    }

    /// p(0|m) for each memory state m under angle index k.
    pub fn emission(&self, k: usize) -> [f64; 2] {
        self.emissions[k]
    }

    pub fn lambda(&self, i: usize, k: usize) -> f64 {
        self.lambdas[i * self.angles.len() + k]
    }

    pub fn action_id(&self, i: usize, k: usize) -> usize {
        i * self.angles.len() + k
    }

    /// (belief index, angle index).
    pub fn decode(&self, id: usize) -> (usize, usize) {
        (id / self.angles.len(), id % self.angles.len())
    }

    pub fn work_action(&self, id: usize) -> WorkAction {
        let (i, k) = self.decode(id);
        WorkAction { basis_angle: self.angles[k], purity: self.lambda(i, k) }
    }

    /// Nearest grid belief to η(1), ties to the lower index.
    pub fn nearest(&self, p1: f64) -> usize {
        let n = self.beliefs.len() - 1;
        let x = p1.clamp(0.0, 1.0) * n as f64;
        let lo = x.floor();
        let i = if x - lo > 0.5 { lo as usize + 1 } else { lo as usize };
        i.min(n)
    }
}

/// Optimal values and angle choices on the belief grid. Row `t` is round
/// t + 1; row L holds the terminal zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct ValueTable {
    pub values: Vec<Vec<f64>>,
    pub policy: Vec<Vec<usize>>,
}

impl ValueTable {
    pub fn horizon(&self) -> usize {
        self.policy.len()
    }

    /// V₁ at the grid point nearest to `belief`.
    pub fn value_at(&self, grid: &ActionGrid, belief: &Belief) -> f64 {
        self.values[0][grid.nearest(belief.probs[0])]
    }
}

/// Backward value iteration with nearest-grid projection of updated beliefs.
pub fn backward_value_iteration(model: &EmissionModel, grid: &ActionGrid, horizon: usize) -> ValueTable {
    let nb = grid.beliefs.len();
    let na = grid.angles.len();
    let t_mat = model.transition();
    let beta = model.inv_temperature();
    let mut values = vec![vec![0.0; nb]; horizon + 1];
    let mut policy = vec![vec![0usize; nb]; horizon];
    // Successor indices and probabilities do not depend on the step.
    let mut succ = vec![[(0usize, 0.0f64); 2]; nb * na];
    let mut reward = vec![0.0; nb * na];
    for i in 0..nb {
        let b = Belief { probs: [grid.beliefs[i], 1.0 - grid.beliefs[i]] };
        for k in 0..na {
            let e = grid.emissions[k];
            let p0 = b.probs[0] * e[0] + b.probs[1] * e[1];
            reward[i * na + k] = born_work(p0, grid.lambda(i, k)) / beta;
            for o in 0..2 {
                let po = if o == 0 { p0 } else { 1.0 - p0 };
                succ[i * na + k][o] = if po > PROB_ZERO {
                    let next = update_with(&b, &e, o, &t_mat).expect("positive outcome probability");
                    (grid.nearest(next.probs[0]), po)
                } else {
                    (0, 0.0)
                };
            }
        }
    }
    for t in (0..horizon).rev() {
        let (head, tail) = values.split_at_mut(t + 1);
        let next = &tail[0];
        for i in 0..nb {
            let mut best = f64::NEG_INFINITY;
            let mut best_k = 0;
            for k in 0..na {
                let s = &succ[i * na + k];
                let mut q = reward[i * na + k];
                for &(j, po) in s {
                    if po > 0.0 {
                        q += po * next[j];
                    }
                }
                if q > best {
                    best = q;
                    best_k = k;
                }
            }
            head[t][i] = best;
            policy[t][i] = best_k;
        }
    }
    ValueTable { values, policy }
}

/// Plays the table: tracks the exact belief under its own model and snaps
/// it to the grid.
#[derive(Clone, Debug)]
pub struct TablePolicy {
    pub model: EmissionModel,
    pub grid: Arc<ActionGrid>,
    pub table: Arc<ValueTable>,
}

impl TablePolicy {
    pub fn belief_after(&self, history: &Trajectory) -> Belief {
        let t_mat = self.model.transition();
        let mut b = self.model.initial();
        for s in &history.steps {
            let (_, k) = self.grid.decode(s.action);
            // An observation the model deems impossible leaves the belief alone.
            if let Ok(next) = update_with(&b, &self.grid.emissions[k], s.outcome, &t_mat) {
                b = next;
            }
        }
        b
    }

    pub fn action(&self, t: usize, history: &Trajectory) -> usize {
        let i = self.grid.nearest(self.belief_after(history).probs[0]);
        self.grid.action_id(i, self.table.policy[t][i])
    }
}

impl Policy for TablePolicy {
    fn distribution(&self, t: usize, history: &Trajectory) -> ActionDistribution {
        ActionDistribution::deterministic(self.action(t, history))
    }
}

/// Uniform over angles, purity from the grid belief nearest to the
/// unconditional memory distribution at that step. Ignores outcomes.
#[derive(Clone, Debug)]
pub struct OpenLoopRandomPolicy {
    pub grid: Arc<ActionGrid>,
    rows: Vec<usize>,
}

impl OpenLoopRandomPolicy {
    pub fn new(model: &EmissionModel, grid: Arc<ActionGrid>, horizon: usize) -> Self {
        let rows = marginal_beliefs(model, horizon).iter().map(|b| grid.nearest(b.probs[0])).collect();
        Self { grid, rows }
    }

    pub fn actions_at(&self, t: usize) -> Vec<usize> {
        (0..self.grid.angles.len()).map(|k| self.grid.action_id(self.rows[t], k)).collect()
    }
}

impl Policy for OpenLoopRandomPolicy {
    fn distribution(&self, t: usize, _: &Trajectory) -> ActionDistribution {
        ActionDistribution::uniform(&self.actions_at(t))
    }
}

/// Distribution of the memory at each round when nothing is conditioned on.
pub fn marginal_beliefs(model: &EmissionModel, horizon: usize) -> Vec<Belief> {
    let t = model.transition();
    let mut b = model.initial();
    let mut out = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        out.push(b);
        b = Belief { probs: [t[0][0] * b.probs[0] + t[0][1] * b.probs[1], t[1][0] * b.probs[0] + t[1][1] * b.probs[1]] };
    }
    out
}

/// Exact value of the open-loop random policy. Measurements of a classical
/// memory do not disturb its marginal, so each round is averaged separately.
pub fn open_loop_random_value(model: &EmissionModel, policy: &OpenLoopRandomPolicy, horizon: usize) -> f64 {
    let grid = &policy.grid;
    let na = grid.angles.len() as f64;
    marginal_beliefs(model, horizon)
        .iter()
        .enumerate()
        .map(|(t, b)| {
            policy
                .actions_at(t)
                .iter()
                .map(|&id| {
                    let (i, k) = grid.decode(id);
                    let e = grid.emissions[k];
                    born_work(b.probs[0] * e[0] + b.probs[1] * e[1], grid.lambda(i, k))
                })
                .sum::<f64>()
                / na
        })
        .sum::<f64>()
        / model.inv_temperature()
}

/// One visited decision in a policy tree.
pub struct TreeNode<'a> {
    pub t: usize,
    /// Probability of reaching this node and choosing this action.
    pub weight: f64,
    /// True conditional memory distribution.
    pub belief: Belief,
    pub action: usize,
    pub grid: &'a ActionGrid,
}

/// Depth-first walk over every (action, outcome) path the policy can
/// produce, with the memory distribution tracked under `model`.
pub fn walk_policy_tree(
    model: &EmissionModel,
    grid: &ActionGrid,
    horizon: usize,
    policy: &dyn Policy,
    visit: &mut dyn FnMut(&TreeNode),
) -> Result<()> {
    let mut leaves = 0usize;
    let mut history = Trajectory::new();
    walk(model, grid, horizon, policy, visit, 0, 1.0, model.initial(), &mut history, &mut leaves)
}

#[allow(clippy::too_many_arguments)]
fn walk(
    model: &EmissionModel,
    grid: &ActionGrid,
    horizon: usize,
    policy: &dyn Policy,
    visit: &mut dyn FnMut(&TreeNode),
    t: usize,
    reach: f64,
    belief: Belief,
    history: &mut Trajectory,
    leaves: &mut usize,
) -> Result<()> {
    if t == horizon {
        *leaves += 1;
        if *leaves > ENUMERATION_LIMIT {
            return Err(QhmmError::EnumerationTooLarge { limit: ENUMERATION_LIMIT });
        }
        return Ok(());
    }
    let t_mat = model.transition();
    for &(a, pa) in policy.distribution(t, history).entries() {
        if pa == 0.0 {
            continue;
        }
        if a >= grid.num_actions() {
            return Err(QhmmError::UnknownAction(a));
        }
        let weight = reach * pa;
        visit(&TreeNode { t, weight, belief, action: a, grid });
        let (_, k) = grid.decode(a);
        let e = grid.emissions[k];
        let p0 = belief.probs[0] * e[0] + belief.probs[1] * e[1];
        for o in 0..2 {
            let po = if o == 0 { p0 } else { 1.0 - p0 };
            if po <= PROB_ZERO {
                continue;
            }
            let next = update_with(&belief, &e, o, &t_mat)?;
            history.push(a, o, 0.0);
            walk(model, grid, horizon, policy, visit, t + 1, weight * po, next, history, leaves)?;
            history.steps.pop();
        }
    }
    Ok(())
}

/// Exact expected cumulative work of `policy` when the memory follows `model`.
pub fn evaluate_policy_exact(model: &EmissionModel, grid: &ActionGrid, horizon: usize, policy: &dyn Policy) -> Result<f64> {
    let beta = model.inv_temperature();
    let mut total = 0.0;
    walk_policy_tree(model, grid, horizon, policy, &mut |n| {
        let (i, k) = n.grid.decode(n.action);
        let e = n.grid.emission(k);
        let p0 = n.belief.probs[0] * e[0] + n.belief.probs[1] * e[1];
        total += n.weight * born_work(p0, n.grid.lambda(i, k)) / beta;
    })?;
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DensityOperator;

    fn model(theta: f64) -> EmissionModel {
        let s1 = DensityOperator::from_bloch([0.0, 0.0, 1.0]).unwrap();
        let s2 = DensityOperator::from_bloch([0.8, 0.0, -0.3]).unwrap();
        EmissionModel::case_study(theta, [s1, s2], Belief::uniform(), 1.0).unwrap()
    }

    fn orthogonal_model(theta: f64) -> EmissionModel {
        let s1 = DensityOperator::basis_state(2, 0);
        let s2 = DensityOperator::basis_state(2, 1);
        EmissionModel::case_study(theta, [s1, s2], Belief::uniform(), 1.0).unwrap()
    }

    #[test]
    fn expected_state_examples() {
        let m = orthogonal_model(0.7);
        let xi = expected_state(&Belief::new(1.0).unwrap(), &m);
        assert!(xi.op().max_abs_diff(m.sigmas()[0].op()) < 1e-15);
        let xi = expected_state(&Belief::uniform(), &m);
        assert!(xi.op().max_abs_diff(DensityOperator::maximally_mixed(2).op()) < 1e-15);
        let ev = expected_state(&Belief::new(0.3).unwrap(), &model(0.7)).op().eigenvalues();
        assert!(ev.iter().all(|v| (-1e-12..=1.0 + 1e-12).contains(v)));
    }

    #[test]
    fn belief_update_examples() {
        let m = EmissionModel::case_study(1.0, model(0.5).sigmas().clone(), Belief::uniform(), 1.0).unwrap();
        // Deterministic emissions: the basis whose first vector is σ₁'s Bloch direction.
        let det = orthogonal_model(1.0);
        let b = belief_update(&Belief::uniform(), 0.0, 0, &det).unwrap();
        assert!((b.probs[0] - 1.0).abs() < 1e-15);
        assert!(matches!(
            belief_update(&Belief::new(1.0).unwrap(), 0.0, 1, &det),
            Err(QhmmError::ImpossibleObservation)
        ));
        let mixing = model(0.5);
        for o in 0..2 {
            let b = belief_update(&Belief::new(0.9).unwrap(), 0.7, o, &mixing).unwrap();
            assert!((b.probs[0] - 0.5).abs() < 1e-15);
        }
        let _ = m;
    }

    #[test]
    fn belief_update_matches_joint_enumeration() {
        let m = model(0.73);
        let prior = Belief::new(0.35).unwrap();
        let phi = 1.1;
        let e = m.emission_probs(phi);
        let t = m.transition();
        for o in 0..2 {
            // Joint table over (m, m′) for the observed o.
            let mut joint = [[0.0; 2]; 2];
            for a in 0..2 {
                for b in 0..2 {
                    let po = if o == 0 { e[a] } else { 1.0 - e[a] };
                    joint[a][b] = prior.probs[a] * po * t[b][a];
                }
            }
            let z: f64 = joint.iter().flatten().sum();
            let want = (joint[0][0] + joint[1][0]) / z;
            let got = belief_update(&prior, phi, o, &m).unwrap();
            assert!((got.probs[0] - want).abs() < 1e-14);
            let scaled = Belief::from_weights([0.35 * 7.0, 0.65 * 7.0]).unwrap();
            assert!((belief_update(&scaled, phi, o, &m).unwrap().probs[0] - want).abs() < 1e-14);
        }
    }

    #[test]
    fn optimal_purity_examples() {
        let m = orthogonal_model(0.6);
        let b = Belief::new(0.8).unwrap();
        assert!((optimal_purity(&b, 0.0, &m, 1e-6) - 0.8).abs() < 1e-15);
        for phi in [0.0, 0.4, 2.0] {
            assert!((optimal_purity(&Belief::uniform(), phi, &m, 1e-6) - 0.5).abs() < 1e-15);
        }
        // λ maximizes the expected work at a fixed basis.
        let m = model(0.6);
        let b = Belief::new(0.3).unwrap();
        let phi = 0.9;
        let lam = optimal_purity(&b, phi, &m, 1e-6);
        let f = |l: f64| expected_immediate_work(&b, &WorkAction { basis_angle: phi, purity: l }, &m);
        let grid_best = (1..1000).map(|i| i as f64 / 1000.0).max_by(|x, y| f(*x).total_cmp(&f(*y))).unwrap();
        assert!((grid_best - lam).abs() <= 1e-3);
    }

    #[test]
    fn immediate_work_examples() {
        let m = model(0.6);
        let b = Belief::new(0.3).unwrap();
        let xi = expected_state(&b, &m);
        // Basis diagonalizing ξ with unclamped optimal purity.
        let r = xi.bloch();
        let angle = m.angle_of_direction(r);
        let lam = optimal_purity(&b, angle, &m, 1e-9);
        let w = expected_immediate_work(&b, &WorkAction { basis_angle: angle, purity: lam }, &m);
        let free = relative_entropy(&xi, &DensityOperator::maximally_mixed(2));
        assert!((w - free).abs() < 1e-10);
        let mixed = orthogonal_model(0.6);
        let w = expected_immediate_work(&Belief::uniform(), &WorkAction { basis_angle: 0.3, purity: 0.8 }, &mixed);
        assert!(w < 0.0);
        // Born-rule expectation over the two work values.
        let a = WorkAction { basis_angle: 1.3, purity: 0.7 };
        let e = m.emission_probs(a.basis_angle);
        let p0 = b.probs[0] * e[0] + b.probs[1] * e[1];
        let (w0, w1) = crate::workx::work_values(a.purity, 1.0);
        let want = p0 * w0 + (1.0 - p0) * w1;
        assert!((expected_immediate_work(&b, &a, &m) - want).abs() < 1e-12);
        assert!((born_work(p0, a.purity) - want).abs() < 1e-12);
    }

    #[test]
    fn nearest_grid_ties_go_low() {
        let grid = ActionGrid::new(&model(0.6), 3, 4, 1e-6).unwrap();
        assert_eq!(grid.nearest(0.25), 0);
        assert_eq!(grid.nearest(0.2500001), 1);
        assert_eq!(grid.nearest(0.75), 1);
        assert_eq!(grid.nearest(1.0), 2);
    }

    #[test]
    fn single_step_table_diagonalizes() {
        let m = model(0.8);
        let grid = ActionGrid::new(&m, 21, 64, 1e-6).unwrap();
        let table = backward_value_iteration(&m, &grid, 1);
        for (i, &p) in grid.beliefs().iter().enumerate() {
            let b = Belief::new(p).unwrap();
            let free = relative_entropy(&expected_state(&b, &m), &DensityOperator::maximally_mixed(2));
            let v = table.values[0][i];
            assert!(v <= free + 1e-12);
            assert!(free - v < 2e-3, "{free} vs {v}");
            assert_eq!(table.values[1][i], 0.0);
        }
    }

    #[test]
    fn memoryless_value_is_horizon_times_myopic() {
        let m = model(0.5);
        let grid = ActionGrid::new(&m, 201, 64, 1e-6).unwrap();
        let one = backward_value_iteration(&m, &grid, 1);
        let four = backward_value_iteration(&m, &grid, 4);
        let i = grid.nearest(0.5);
        assert!((four.values[0][i] - 4.0 * one.values[0][i]).abs() < 1e-12);
    }

    #[test]
    fn table_policy_value_matches_generic_walk() {
        let m = model(0.8);
        let grid = Arc::new(ActionGrid::new(&m, 51, 16, 1e-3).unwrap());
        let table = Arc::new(backward_value_iteration(&m, &grid, 3));
        let policy = TablePolicy { model: m.clone(), grid: grid.clone(), table };
        let v = evaluate_policy_exact(&m, &grid, 3, &policy).unwrap();
        let random = OpenLoopRandomPolicy::new(&m, grid.clone(), 3);
        let vr = evaluate_policy_exact(&m, &grid, 3, &random).unwrap();
        assert!((vr - open_loop_random_value(&m, &random, 3)).abs() < 1e-12);
        assert!(v > vr);
        assert_eq!(evaluate_policy_exact(&m, &grid, 0, &policy).unwrap(), 0.0);
    }
}
