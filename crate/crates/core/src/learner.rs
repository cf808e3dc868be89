//! Optimistic maximum-likelihood learning over a parameterized family of
//! environments.
//!
//! Each episode: fit the MLE on the data so far, keep the grid parameters
//! whose log-likelihood is within the confidence radius of the maximum, plan
//! on every member, act with the most optimistic plan, and record the
//! trajectory.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{episode_rng, Policy, QhmmEnvironment, Trajectory, ValueMode};
use crate::error::{QhmmError, Result};
use crate::oom::{ObservableOperators, OomModel};

/// Trajectory probabilities below this are clamped before taking logs.
pub const P_FLOOR: f64 = 1e-12;

/// Default grid resolution per parameter.
pub const GRID_POINTS: usize = 64;

/// Golden-section refinement stops at this bracket width.
pub const REFINE_TOL: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvDims {
    pub horizon: usize,
    /// Distinct instruments; actions that differ only in reward count once.
    pub actions: usize,
    pub outcomes: usize,
    pub memory_dim: usize,
}

/// An optimal policy for one member and its value on that member.
#[derive(Clone)]
pub struct Plan {
    pub policy: Arc<dyn Policy>,
    pub value: f64,
}

impl std::fmt::Debug for Plan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Plan").field("value", &self.value).finish_non_exhaustive()
    }
}

type BoxedOom = Box<dyn ObservableOperators + Send + Sync>;

/// A box-bounded parameterization of environments.
pub trait ModelFamily: Send + Sync {
    fn bounds(&self) -> &[(f64, f64)];

    fn dims(&self) -> EnvDims;

    fn instantiate(&self, params: &[f64]) -> Result<QhmmEnvironment>;

    /// Label under which an action enters the likelihood. Actions sharing an
    /// instrument may share a label so that their trajectories are grouped.
    fn likelihood_action(&self, action: usize) -> usize {
        action
    }

    /// Observable operators indexed by likelihood labels.
    fn observable_model(&self, params: &[f64]) -> Result<BoxedOom> {
        Ok(Box::new(OomModel::from_env(&self.instantiate(params)?)?))
    }

    /// Optimal policy of the member at `params`. Exhaustive search by default.
    fn plan(&self, params: &[f64]) -> Result<Plan> {
        let (policy, value) = self.instantiate(params)?.plan_exhaustive()?;
        Ok(Plan { policy: Arc::new(policy), value })
    }

    /// Exact value of `policy` on `env`.
    fn policy_value(&self, env: &QhmmEnvironment, policy: &dyn Policy) -> Result<f64> {
        Ok(env.value_of_policy(policy, ValueMode::Exact)?.value)
    }

    fn param_dim(&self) -> usize {
        self.bounds().len()
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_dim() {
            return Err(QhmmError::DimensionMismatch(format!(
                "{} parameters for a {}-dimensional family",
                params.len(),
                self.param_dim()
            )));
        }
        for (p, (lo, hi)) in params.iter().zip(self.bounds()) {
            if !(lo <= p && p <= hi) {
                return Err(QhmmError::OutOfRange(format!("parameter {p} outside [{lo}, {hi}]")));
            }
        }
        Ok(())
    }
}

/// Observed trajectories, grouped by their likelihood key.
#[derive(Clone, Debug, Default)]
pub struct Dataset {
    /// (parameters of the plan that produced it, trajectory)
    episodes: Vec<(Vec<f64>, Trajectory)>,
    groups: Vec<(Vec<(usize, usize)>, usize)>,
    index: HashMap<Vec<(usize, usize)>, usize>,
}

impl Dataset {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, family: &dyn ModelFamily, policy_params: Vec<f64>, traj: Trajectory) -> usize {
        let key: Vec<(usize, usize)> = traj.steps.iter().map(|s| (family.likelihood_action(s.action), s.outcome)).collect();
        self.episodes.push((policy_params, traj));
        let g = match self.index.get(&key) {
            Some(&g) => {
                self.groups[g].1 += 1;
                g
            }
            None => {
                self.index.insert(key.clone(), self.groups.len());
                self.groups.push((key, 1));
                self.groups.len() - 1
            }
        };
        g
    }

    pub fn len(&self) -> usize {
        self.episodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.episodes.is_empty()
    }

    pub fn episodes(&self) -> &[(Vec<f64>, Trajectory)] {
        &self.episodes
    }

    /// Distinct likelihood keys with their multiplicities.
    pub fn groups(&self) -> &[(Vec<(usize, usize)>, usize)] {
        &self.groups
    }
}

fn log_prob(model: &dyn ObservableOperators, key: &[(usize, usize)]) -> Result<f64> {
    Ok(model.trajectory_prob(key)?.max(P_FLOOR).ln())
}

fn log_likelihood_with(model: &dyn ObservableOperators, data: &Dataset) -> Result<f64> {
    data.groups.iter().map(|(key, n)| Ok(*n as f64 * log_prob(model, key)?)).sum()
}

/// Σ log max(A_θ(τ), p_floor) over the dataset; −∞ where the member has no
/// recovery map. Policy factors are omitted since they do not depend on θ.
pub fn log_likelihood(family: &dyn ModelFamily, params: &[f64], data: &Dataset) -> Result<f64> {
    family.check_params(params)?;
    if data.is_empty() {
        return Ok(0.0);
    }
    match family.observable_model(params) {
        Ok(model) => log_likelihood_with(model.as_ref(), data),
        Err(QhmmError::NotUndercomplete { .. }) => Ok(f64::NEG_INFINITY),
        Err(e) => Err(e),
    }
}

/// Cartesian grid of `points` per coordinate in lexicographic order.
pub fn parameter_grid(bounds: &[(f64, f64)], points: usize) -> Result<Vec<Vec<f64>>> {
    if bounds.is_empty() || bounds.len() > 3 {
        return Err(QhmmError::FamilyInvalid(format!("grid search supports 1 to 3 parameters, got {}", bounds.len())));
    }
    if points < 2 {
        return Err(QhmmError::OutOfRange("grid needs at least 2 points".into()));
    }
    let axes: Vec<Vec<f64>> = bounds
        .iter()
        .map(|&(lo, hi)| (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect())
        .collect();
    let mut grid = vec![Vec::new()];
    for axis in &axes {
        grid = grid.into_iter().flat_map(|p| axis.iter().map(move |&x| [p.clone(), vec![x]].concat())).collect();
    }
    Ok(grid)
}

/// Lexicographic "a < b" on parameter vectors.
fn lex_less(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).find(|(x, y)| x != y).is_some_and(|(x, y)| x < y)
}

/// Grid likelihoods kept up to date as data arrives, with golden-section
/// refinement of the best grid point.
pub struct MleState<'a> {
    family: &'a dyn ModelFamily,
    grid: Vec<Vec<f64>>,
    models: Vec<Option<BoxedOom>>,
    grid_ll: Vec<f64>,
    data: Dataset,
}

impl<'a> MleState<'a> {
    pub fn new(family: &'a dyn ModelFamily, points: usize) -> Result<Self> {
        let grid = parameter_grid(family.bounds(), points)?;
        let models = grid
            .par_iter()
            .map(|p| match family.observable_model(p) {
                Ok(m) => Ok(Some(m)),
                Err(QhmmError::NotUndercomplete { .. }) => Ok(None),
                Err(e) => Err(e),
            })
            .collect::<Result<Vec<_>>>()?;
        if models.iter().all(Option::is_none) {
            return Err(QhmmError::FamilyInvalid("no grid point is undercomplete".into()));
        }
        let grid_ll = models.iter().map(|m| if m.is_some() { 0.0 } else { f64::NEG_INFINITY }).collect();
        Ok(Self { family, grid, models, grid_ll, data: Dataset::new() })
    }

    pub fn from_dataset(family: &'a dyn ModelFamily, points: usize, data: &Dataset) -> Result<Self> {
        let mut s = Self::new(family, points)?;
        s.data = data.clone();
        let lls = s
            .models
            .par_iter()
            .map(|m| match m {
                Some(m) => log_likelihood_with(m.as_ref(), data),
                None => Ok(f64::NEG_INFINITY),
            })
            .collect::<Result<Vec<_>>>()?;
        s.grid_ll = lls;
        Ok(s)
    }

    pub fn grid(&self) -> &[Vec<f64>] {
        &self.grid
    }

    pub fn grid_log_likelihoods(&self) -> &[f64] {
        &self.grid_ll
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn push(&mut self, policy_params: Vec<f64>, traj: Trajectory) -> Result<()> {
        let g = self.data.push(self.family, policy_params, traj);
        let key = self.data.groups[g].0.clone();
        let deltas = self
            .models
            .par_iter()
            .map(|m| match m {
                Some(m) => log_prob(m.as_ref(), &key),
                None => Ok(0.0),
            })
            .collect::<Result<Vec<_>>>()?;
        for (ll, d) in self.grid_ll.iter_mut().zip(deltas) {
            *ll += d;
        }
        Ok(())
    }

    /// Index of the best grid point, ties to the earliest (lexicographically
    /// smallest) one.
    pub fn best_grid_index(&self) -> usize {
        let mut best = 0;
        for (i, &ll) in self.grid_ll.iter().enumerate() {
            if ll > self.grid_ll[best] {
                best = i;
            }
        }
        best
    }

    /// Refined maximizer and its log-likelihood.
    pub fn fit(&self) -> Result<(Vec<f64>, f64)> {
        if self.data.is_empty() {
            return Err(QhmmError::OutOfRange("maximum likelihood needs data".into()));
        }
        let gi = self.best_grid_index();
        let (mut x, mut fx) = (self.grid[gi].clone(), self.grid_ll[gi]);
        if !fx.is_finite() {
            return Err(QhmmError::FamilyInvalid("every grid point has −∞ log-likelihood".into()));
        }
        let bounds = self.family.bounds();
        let points = (self.grid.len() as f64).powf(1.0 / bounds.len() as f64).round() as usize;
        for (d, &(lo, hi)) in bounds.iter().enumerate() {
            let h = (hi - lo) / (points - 1) as f64;
            let (a, b) = ((x[d] - h).max(lo), (x[d] + h).min(hi));
            let mut probe = x.clone();
            let mut f = |v: f64| -> Result<f64> {
                probe[d] = v;
                log_likelihood(self.family, &probe, &self.data)
            };
            let (v, fv) = golden_section_max(&mut f, a, b, REFINE_TOL)?;
            let better = fv > fx || (fv == fx && v < x[d]);
            if better {
                x[d] = v;
                fx = fv;
            }
        }
        Ok((x, fx))
    }
}

/// Maximizes a unimodal function on [a, b]; returns the best point seen.
fn golden_section_max(f: &mut dyn FnMut(f64) -> Result<f64>, mut a: f64, mut b: f64, tol: f64) -> Result<(f64, f64)> {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    let mut best = if fd > fc { (d, fd) } else { (c, fc) };
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c)?;
            if fc > best.1 || (fc == best.1 && c < best.0) {
                best = (c, fc);
            }
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d)?;
            if fd > best.1 {
                best = (d, fd);
            }
        }
    }
    Ok(best)
}

/// Grid search plus per-coordinate golden-section refinement.
pub fn mle_fit(family: &dyn ModelFamily, data: &Dataset) -> Result<Vec<f64>> {
    mle_fit_with(family, data, GRID_POINTS)
}

pub fn mle_fit_with(family: &dyn ModelFamily, data: &Dataset, points: usize) -> Result<Vec<f64>> {
    Ok(MleState::from_dataset(family, points, data)?.fit()?.0)
}

/// β = c((L + A·O)S⁴ ln(K·S·A·O·L) + ln(K/δ)).
pub fn conf_radius(dims: EnvDims, episodes: usize, delta: f64, c: f64) -> Result<f64> {
    if episodes == 0 {
        return Err(QhmmError::OutOfRange("K must be at least 1".into()));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(QhmmError::OutOfRange(format!("δ = {delta} outside (0,1)")));
    }
    let EnvDims { horizon: l, actions: a, outcomes: o, memory_dim: s } = dims;
    let (l, a, o, s, k) = (l as f64, a as f64, o as f64, s as f64, episodes as f64);
    Ok(c * ((l + a * o) * s.powi(4) * (k * s * a * o * l).ln() + (k / delta).ln()))
}

/// Members of the confidence set, sorted lexicographically.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfidenceSet {
    /// None before any data has been seen.
    pub center: Option<Vec<f64>>,
    pub radius: f64,
    pub members: Vec<Vec<f64>>,
    /// Grid index of each member, None for the refined center.
    pub grid_index: Vec<Option<usize>>,
    /// Log-likelihood of the center; −∞ before any data.
    pub top: f64,
}

impl ConfidenceSet {
    /// {center} ∪ {grid points with ℓ ≥ ℓ(center) − β}, or the whole grid
    /// without data.
    pub fn build(state: &MleState, radius: f64) -> Result<Self> {
        if state.data().is_empty() {
            let n = state.grid().len();
            let idx: Vec<usize> = (0..n).filter(|&i| state.grid_ll[i].is_finite()).collect();
            return Ok(Self {
                center: None,
                radius,
                members: idx.iter().map(|&i| state.grid[i].clone()).collect(),
                grid_index: idx.into_iter().map(Some).collect(),
                top: f64::NEG_INFINITY,
            });
        }
        let (center, top) = state.fit()?;
        let mut entries: Vec<(Vec<f64>, Option<usize>)> = state
            .grid_ll
            .iter()
            .enumerate()
            .filter(|(_, &ll)| ll >= top - radius)
            .map(|(i, _)| (state.grid[i].clone(), Some(i)))
            .collect();
        if !entries.iter().any(|(p, _)| *p == center) {
            let pos = entries.iter().position(|(p, _)| lex_less(&center, p)).unwrap_or(entries.len());
            entries.insert(pos, (center.clone(), None));
        }
        let (members, grid_index) = entries.into_iter().unzip();
        Ok(Self { center: Some(center), radius, members, grid_index, top })
    }

    /// Whether `params` passes the same likelihood test as the members.
    pub fn admits(&self, state: &MleState, params: &[f64]) -> Result<bool> {
        if self.center.is_none() {
            return Ok(state.family.check_params(params).is_ok());
        }
        Ok(log_likelihood(state.family, params, state.data())? >= self.top - self.radius)
    }
}

/// Plans computed for grid members, reused across episodes.
#[derive(Default)]
pub struct PlanCache {
    plans: HashMap<usize, Plan>,
}

impl PlanCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Plans every grid point up front.
    pub fn fill(&mut self, family: &dyn ModelFamily, grid: &[Vec<f64>]) -> Result<()> {
        let plans = grid.par_iter().map(|p| family.plan(p)).collect::<Result<Vec<_>>>()?;
        self.plans.extend(plans.into_iter().enumerate());
        Ok(())
    }
}

/// The member with the largest planned value, ties to the first (smallest)
/// member.
pub fn optimistic_plan(family: &dyn ModelFamily, set: &ConfidenceSet, cache: &mut PlanCache) -> Result<(Vec<f64>, Plan)> {
    if set.members.is_empty() {
        return Err(QhmmError::FamilyInvalid("empty confidence set".into()));
    }
    let mut best: Option<(usize, Plan)> = None;
    for (i, (p, gi)) in set.members.iter().zip(&set.grid_index).enumerate() {
        let plan = match gi {
            Some(g) => match cache.plans.get(g) {
                Some(plan) => plan.clone(),
                None => {
                    let plan = family.plan(p)?;
                    cache.plans.insert(*g, plan.clone());
                    plan
                }
            },
            None => family.plan(p)?,
        };
        if best.as_ref().is_none_or(|(_, b)| plan.value > b.value) {
            best = Some((i, plan));
        }
    }
    let (i, plan) = best.expect("non-empty set");
    Ok((set.members[i].clone(), plan))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OmleConfig {
    pub episodes: usize,
    pub delta: f64,
    /// Scale of the confidence radius.
    pub c: f64,
    pub seed: u64,
    pub grid_points: usize,
}

impl Default for OmleConfig {
    fn default() -> Self {
        Self { episodes: 500, delta: 0.05, c: 1.0, seed: 0, grid_points: GRID_POINTS }
    }
}

/// Per-episode record of a learning run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeLog {
    pub episode: usize,
    /// MLE from the episodes before this one; NaN before any data.
    pub theta_hat: Vec<f64>,
    pub chosen_params: Vec<f64>,
    pub conf_radius: f64,
    /// Planned value on the chosen member.
    pub chosen_value: f64,
    pub realized_reward: f64,
    pub policy_value_true_env: f64,
    pub inst_regret: f64,
    pub cum_regret: f64,
    /// Whether the true parameters were in the confidence set, when known.
    pub truth_in_set: Option<bool>,
}

#[derive(Clone, Debug)]
pub struct OmleRun {
    pub logs: Vec<EpisodeLog>,
    pub v_star: f64,
    pub final_estimate: Option<Vec<f64>>,
    pub warnings: Vec<String>,
}

/// Runs the learning loop on `true_env`. With `truth` given, V* is the value
/// of the family's plan at the truth; otherwise the environment is treated
/// as possibly outside the family and V* comes from exhaustive planning.
pub fn run_omle(family: &dyn ModelFamily, true_env: &QhmmEnvironment, truth: Option<&[f64]>, cfg: &OmleConfig) -> Result<OmleRun> {
    if cfg.episodes == 0 {
        return Err(QhmmError::OutOfRange("need at least one episode".into()));
    }
    let mut warnings = Vec::new();
    let v_star = match truth {
        Some(t) => {
            family.check_params(t)?;
            let plan = family.plan(t)?;
            family.policy_value(true_env, plan.policy.as_ref())?
        }
        None => {
            warnings.push("true environment not given as a family member; regret is measured against exhaustive planning".into());
            true_env.plan_exhaustive()?.1
        }
    };
    let radius = conf_radius(family.dims(), cfg.episodes, cfg.delta, cfg.c)?;
    let mut state = MleState::new(family, cfg.grid_points)?;
    let mut cache = PlanCache::new();
    cache.fill(family, state.grid())?;
    let mut logs = Vec::with_capacity(cfg.episodes);
    let mut cum = 0.0;
    for k in 1..=cfg.episodes {
        let set = ConfidenceSet::build(&state, radius)?;
        let truth_in_set = truth.map(|t| set.admits(&state, t)).transpose()?;
        let (chosen, plan) = optimistic_plan(family, &set, &mut cache)?;
        let traj = true_env.simulate_episode(plan.policy.as_ref(), &mut episode_rng(cfg.seed, k as u64))?;
        let v = family.policy_value(true_env, plan.policy.as_ref())?;
        let inst = v_star - v;
        cum += inst;
        logs.push(EpisodeLog {
            episode: k,
            theta_hat: set.center.clone().unwrap_or_else(|| vec![f64::NAN; family.param_dim()]),
            chosen_params: chosen.clone(),
            conf_radius: radius,
            chosen_value: plan.value,
            realized_reward: traj.total_reward(),
            policy_value_true_env: v,
            inst_regret: inst,
            cum_regret: cum,
            truth_in_set,
        });
        state.push(chosen, traj)?;
    }
    let final_estimate = Some(state.fit()?.0);
    Ok(OmleRun { logs, v_star, final_estimate, warnings })
}

/// Cumulative regret Σ_k (V* − V^{π_k}).
pub fn regret_report(logs: &[EpisodeLog], v_star: f64) -> Result<Vec<f64>> {
    if logs.is_empty() {
        return Err(QhmmError::OutOfRange("no episodes".into()));
    }
    let mut acc = 0.0;
    Ok(logs
        .iter()
        .map(|l| {
            acc += v_star - l.policy_value_true_env;
            acc
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{Action, RewardTable};
    use crate::linalg::{DensityOperator, Instrument, Povm};

    /// Qubit memory |0⟩ rotated towards |1⟩ by angle θ·π/2 each round,
    /// measured in the computational basis by a measure-and-prepare
    /// instrument. Two actions differ only in reward.
    struct Rotation;

    impl ModelFamily for Rotation {
        fn bounds(&self) -> &[(f64, f64)] {
            &[(0.0, 1.0)]
        }

        fn dims(&self) -> EnvDims {
            EnvDims { horizon: 2, actions: 2, outcomes: 2, memory_dim: 2 }
        }

        fn instantiate(&self, params: &[f64]) -> Result<QhmmEnvironment> {
            self.check_params(params)?;
            let q = params[0];
            let rho1 = DensityOperator::diagonal(&[1.0 - q, q])?;
            let states = [DensityOperator::basis_state(2, 0), DensityOperator::diagonal(&[0.5, 0.5])?];
            let ins = Arc::new(Instrument::measure_and_prepare(&Povm::computational(2), &states)?);
            let actions = vec![
                Action { label: "bet0".into(), instrument: ins.clone() },
                Action { label: "bet1".into(), instrument: ins },
            ];
            let rewards = RewardTable::Stationary(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
            QhmmEnvironment::new(rho1, vec![crate::linalg::Channel::identity(2)], actions, rewards, 2)
        }
    }

    fn data_from(q: f64, n: usize, seed: u64) -> Dataset {
        let fam = Rotation;
        let env = fam.instantiate(&[q]).unwrap();
        let pol = crate::env::OpenLoopPolicy(vec![0, 1]);
        let mut d = Dataset::new();
        for k in 0..n {
            let traj = env.simulate_episode(&pol, &mut episode_rng(seed, k as u64)).unwrap();
            d.push(&fam, vec![], traj);
        }
        d
    }

    #[test]
    fn empty_dataset_has_zero_likelihood() {
        assert_eq!(log_likelihood(&Rotation, &[0.3], &Dataset::new()).unwrap(), 0.0);
    }

    #[test]
    fn certain_trajectory_has_zero_likelihood() {
        let mut d = Dataset::new();
        d.push(&Rotation, vec![], Trajectory::from_pairs(&[(0, 0), (1, 0)]));
        // q = 0: outcome 0 first, then the prepared |0⟩ gives 0 again.
        assert!(log_likelihood(&Rotation, &[0.0], &d).unwrap().abs() < 1e-12);
    }

    #[test]
    fn likelihood_ignores_policy_labels() {
        let mut a = Dataset::new();
        let mut b = Dataset::new();
        let t = Trajectory::from_pairs(&[(0, 1), (1, 0)]);
        a.push(&Rotation, vec![0.1], t.clone());
        b.push(&Rotation, vec![0.9], t);
        assert_eq!(log_likelihood(&Rotation, &[0.4], &a).unwrap(), log_likelihood(&Rotation, &[0.4], &b).unwrap());
    }

    #[test]
    fn mle_recovers_parameter() {
        let d = data_from(0.3, 3000, 5);
        let q = mle_fit(&Rotation, &d).unwrap();
        // Only the first outcome is informative: frequency of 1 estimates q.
        let ones = d.episodes().iter().filter(|(_, t)| t.steps[0].outcome == 1).count() as f64 / 3000.0;
        assert!((q[0] - ones).abs() < 2e-4, "{} vs {ones}", q[0]);
    }

    #[test]
    fn single_episode_fit_is_in_bounds() {
        let q = mle_fit(&Rotation, &data_from(0.5, 1, 1)).unwrap();
        assert!((0.0..=1.0).contains(&q[0]));
    }

    #[test]
    fn radius_formula() {
        let dims = EnvDims { horizon: 3, actions: 4, outcomes: 2, memory_dim: 2 };
        let want = 16.0 * 11.0 * (100.0f64 * 2.0 * 4.0 * 2.0 * 3.0).ln() + (100.0f64 / 0.05).ln();
        assert!((conf_radius(dims, 100, 0.05, 1.0).unwrap() - want).abs() < 1e-9);
        assert!(conf_radius(dims, 200, 0.05, 1.0).unwrap() > conf_radius(dims, 100, 0.05, 1.0).unwrap());
        let near_one = conf_radius(dims, 100, 1.0 - 1e-12, 1.0).unwrap();
        assert!((near_one - (16.0 * 11.0 * 4800f64.ln() + 100f64.ln())).abs() < 1e-9);
        assert!(conf_radius(dims, 0, 0.05, 1.0).is_err());
    }

    #[test]
    fn grid_is_lexicographic() {
        let g = parameter_grid(&[(0.0, 1.0), (2.0, 3.0)], 3).unwrap();
        assert_eq!(g.len(), 9);
        assert_eq!(g[1], vec![0.0, 2.5]);
        assert!(g.windows(2).all(|w| lex_less(&w[0], &w[1])));
    }

    #[test]
    fn first_episode_uses_whole_grid_and_singleton_reduces_to_mle() {
        let state = MleState::new(&Rotation, 8).unwrap();
        let set = ConfidenceSet::build(&state, 1.0).unwrap();
        assert_eq!(set.members.len(), 8);
        let state = MleState::from_dataset(&Rotation, 8, &data_from(0.3, 200, 2)).unwrap();
        let set = ConfidenceSet::build(&state, 0.0).unwrap();
        let center = set.center.clone().unwrap();
        assert!(set.members.contains(&center));
        if set.members.len() == 1 {
            let mut cache = PlanCache::new();
            let (p, plan) = optimistic_plan(&Rotation, &set, &mut cache).unwrap();
            assert_eq!(p, center);
            assert_eq!(plan.value, Rotation.plan(&center).unwrap().value);
        }
    }

    #[test]
    fn optimistic_choice_takes_largest_value() {
        let state = MleState::new(&Rotation, 4).unwrap();
        let set = ConfidenceSet::build(&state, 1.0).unwrap();
        let mut cache = PlanCache::new();
        let (p, plan) = optimistic_plan(&Rotation, &set, &mut cache).unwrap();
        let best = set.members.iter().map(|m| Rotation.plan(m).unwrap().value).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(plan.value, best);
        assert!(set.members.iter().take_while(|m| *m != &p).all(|m| Rotation.plan(m).unwrap().value < best));
    }

    #[test]
    fn omle_is_reproducible_and_regret_nonnegative() {
        let env = Rotation.instantiate(&[0.2]).unwrap();
        let cfg = OmleConfig { episodes: 60, delta: 0.1, c: 0.05, seed: 9, grid_points: 16 };
        let a = run_omle(&Rotation, &env, Some(&[0.2]), &cfg).unwrap();
        let b = run_omle(&Rotation, &env, Some(&[0.2]), &cfg).unwrap();
        assert_eq!(format!("{:?}", a.logs), format!("{:?}", b.logs));
        assert!(a.logs[0].theta_hat[0].is_nan());
        for l in &a.logs {
            assert!(l.inst_regret >= -1e-9);
        }
        let cum = regret_report(&a.logs, a.v_star).unwrap();
        for (c, l) in cum.iter().zip(&a.logs) {
            assert!((c - l.cum_regret).abs() < 1e-12);
        }
    }

    #[test]
    fn regret_report_examples() {
        let log = |k: usize, v: f64| EpisodeLog {
            episode: k,
            theta_hat: vec![],
            chosen_params: vec![],
            conf_radius: 0.0,
            chosen_value: 0.0,
            realized_reward: 0.0,
            policy_value_true_env: v,
            inst_regret: 0.0,
            cum_regret: 0.0,
            truth_in_set: None,
        };
        let opt: Vec<_> = (1..=5).map(|k| log(k, 2.0)).collect();
        assert!(regret_report(&opt, 2.0).unwrap().iter().all(|&r| r == 0.0));
        let sub: Vec<_> = (1..=5).map(|k| log(k, 1.5)).collect();
        let r = regret_report(&sub, 2.0).unwrap();
        for (k, v) in r.iter().enumerate() {
            assert!((v - 0.5 * (k + 1) as f64).abs() < 1e-15);
        }
        assert!(regret_report(&[], 1.0).is_err());
    }
}
