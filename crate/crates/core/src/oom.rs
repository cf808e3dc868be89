//! Recovery maps, κ_uc and observable-operator trajectory likelihoods.
//!
//! An instrument is undercomplete when its full quantum-classical output
//! P(X) = Σ_o Φ_o(X) ⊗ |o⟩⟨o| can be rebuilt linearly from the classical
//! marginal Tr_S P(X) = (Tr M_o X)_o. The rebuilding map R is the recovery
//! map. With one for every action, the likelihood of a trajectory is a product
//! of O×O matrices acting on the classical register alone.

use nalgebra::{DMatrix, DVector};

use crate::env::{QhmmEnvironment, Trajectory};
use crate::error::{QhmmError, Result};
use crate::linalg::{pauli_basis, pauli_coordinates, trace_norm_matrix, CMatrix, Instrument, Povm};

/// Residual above which a recovery map is rejected.
pub const TAU_REC: f64 = 1e-8;

/// Relative singular-value cutoff for the pseudo-inverse.
pub const PINV_CUTOFF: f64 = 1e-10;

/// Relative singular-value cutoff for rank computations.
pub const RANK_CUTOFF: f64 = 1e-8;

/// Moore-Penrose pseudo-inverse with singular values below
/// `cutoff · σ_max` dropped.
pub fn pseudo_inverse(m: &DMatrix<f64>, cutoff: f64) -> DMatrix<f64> {
    let svd = m.clone().svd(true, true);
    let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let mut out = DMatrix::zeros(m.ncols(), m.nrows());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s <= cutoff * smax || s == 0.0 {
            continue;
        }
        out += vt.row(k).transpose() * u.column(k).transpose() / s;
    }
    out
}

/// Numerical rank with threshold `cutoff · σ_max`.
pub fn numerical_rank(m: &DMatrix<f64>, cutoff: f64) -> usize {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0;
    }
    let sv = m.singular_values();
    let smax = sv.iter().cloned().fold(0.0, f64::max);
    if smax == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > cutoff * smax).count()
}

/// R^(a): diagonal O-vectors to S⊗O operators, stored by its images of the
/// outcome basis, R(Σ d_o |o⟩⟨o|) = Σ d_o R(|o⟩⟨o|).
#[derive(Clone, Debug, PartialEq)]
pub struct RecoveryMap {
    pub action: usize,
    pub memory_dim: usize,
    pub outcomes: usize,
    columns: Vec<CMatrix>,
    pub residual: f64,
}

impl RecoveryMap {
    pub fn columns(&self) -> &[CMatrix] {
        &self.columns
    }

    pub fn apply(&self, d: &[f64]) -> CMatrix {
        let n = self.memory_dim * self.outcomes;
        let mut out = CMatrix::zeros(n, n);
        for (col, &x) in self.columns.iter().zip(d) {
            out += col.map(|z| z * x);
        }
        out
    }

    /// (I ⊗ ⟨o|) Z (I ⊗ |o⟩) for Z on S⊗O.
    pub fn block(&self, z: &CMatrix, o: usize) -> CMatrix {
        let (s, no) = (self.memory_dim, self.outcomes);
        CMatrix::from_fn(s, s, |i, j| z[(i * no + o, j * no + o)])
    }
}

/// Minimum-Frobenius-norm solution of R ∘ Tr_S ∘ P = P over the Hermitian
/// input space, checked to `TAU_REC` on the Pauli basis.
pub fn build_recovery_map(instrument: &Instrument) -> Result<RecoveryMap> {
    let s = instrument.dim_in();
    if instrument.dim_out() != s {
        return Err(QhmmError::DimensionMismatch("recovery needs an S→S instrument".into()));
    }
    let no = instrument.outcomes();
    let basis = pauli_basis(s);
    let f = DMatrix::from_fn(no, basis.len(), |o, mu| instrument.branch_weight(o, basis[mu].matrix()));
    let outputs: Vec<CMatrix> = basis.iter().map(|b| instrument.output(b.matrix())).collect();
    let fp = pseudo_inverse(&f, PINV_CUTOFF);
    let n = s * no;
    let columns: Vec<CMatrix> = (0..no)
        .map(|o| {
            let mut col = CMatrix::zeros(n, n);
            for (mu, out) in outputs.iter().enumerate() {
                col += out.map(|z| z * fp[(mu, o)]);
            }
            col
        })
        .collect();
    let mut residual = 0.0f64;
    for (mu, out) in outputs.iter().enumerate() {
        let mut rebuilt = CMatrix::zeros(n, n);
        for (o, col) in columns.iter().enumerate() {
            rebuilt += col.map(|z| z * f[(o, mu)]);
        }
        residual = residual.max(trace_norm_matrix(&(rebuilt - out)));
    }
    if residual > TAU_REC {
        return Err(QhmmError::NotUndercomplete { residual });
    }
    Ok(RecoveryMap { action: 0, memory_dim: s, outcomes: no, columns, residual })
}

/// One recovery map per action, in action order.
pub fn build_recovery_maps(env: &QhmmEnvironment) -> Result<Vec<RecoveryMap>> {
    let mut maps: Vec<RecoveryMap> = Vec::with_capacity(env.num_actions());
    for (a, act) in env.actions().iter().enumerate() {
        // Actions often share one instrument.
        let shared = env.actions()[..a].iter().position(|b| std::sync::Arc::ptr_eq(&b.instrument, &act.instrument));
        let mut map = match shared {
            Some(b) => maps[b].clone(),
            None => build_recovery_map(&act.instrument)?,
        };
        map.action = a;
        maps.push(map);
    }
    Ok(maps)
}

/// max over actions a and outcomes o of ‖R^(a)(|o⟩⟨o|)‖₁.
pub fn kappa_uc(maps: &[RecoveryMap]) -> f64 {
    maps.iter().flat_map(|m| m.columns.iter()).map(trace_norm_matrix).fold(0.0, f64::max)
}

/// Tr_S P^(a′)((E_t ⊗ T_o)(R^(a)(|j⟩⟨j|))) as a full O×O matrix; it is
/// diagonal by construction.
pub fn oom_operator_output(
    env: &QhmmEnvironment,
    maps: &[RecoveryMap],
    t: usize,
    o: usize,
    a: usize,
    a_next: usize,
    j: usize,
) -> Result<CMatrix> {
    let map = maps.get(a).ok_or(QhmmError::MissingRecoveryMap(a))?;
    if t + 1 >= env.horizon() {
        return Err(QhmmError::EpisodeFinished { step: t + 1, horizon: env.horizon() });
    }
    let col = &map.columns[j];
    let x = env.channels()[t].apply_matrix(&map.block(col, o));
    let full = env.instrument(a_next)?.output(&x);
    let n = env.outcomes();
    crate::linalg::partial_trace_matrix(&full, (env.memory_dim(), n), crate::linalg::Subsystem::B)
}

/// A_t(o, a, a′) on diagonal coordinates (code step t is round t + 1).
pub fn oom_operator(
    env: &QhmmEnvironment,
    maps: &[RecoveryMap],
    t: usize,
    o: usize,
    a: usize,
    a_next: usize,
) -> Result<DMatrix<f64>> {
    let n = env.outcomes();
    let mut m = DMatrix::zeros(n, n);
    for j in 0..n {
        let out = oom_operator_output(env, maps, t, o, a, a_next, j)?;
        for i in 0..n {
            m[(i, j)] = out[(i, i)].re;
        }
    }
    Ok(m)
}

/// Anything that yields initial vectors and observable operators.
pub trait ObservableOperators {
    fn outcomes(&self) -> usize;

    /// a(a) = (Tr M_o^(a) ρ₁)_o.
    fn initial(&self, action: usize) -> Result<DVector<f64>>;

    fn operator(&self, t: usize, o: usize, a: usize, a_next: usize) -> Result<DMatrix<f64>>;

    /// A(τ) = e_{o_l}ᵀ A_{l−1} ⋯ A_1 a(a₁).
    fn trajectory_prob(&self, pairs: &[(usize, usize)]) -> Result<f64> {
        let Some(&(a1, _)) = pairs.first() else {
            return Ok(1.0);
        };
        let mut x = self.initial(a1)?;
        for t in 0..pairs.len() - 1 {
            let (a, o) = pairs[t];
            let a_next = pairs[t + 1].0;
            x = self.operator(t, o, a, a_next)? * x;
        }
        let o_last = pairs[pairs.len() - 1].1;
        if o_last >= self.outcomes() {
            return Err(QhmmError::OutcomeOutOfRange(o_last));
        }
        Ok(x[o_last].max(0.0))
    }
}

/// Dense OOM for a generic environment.
#[derive(Clone, Debug)]
pub struct OomModel {
    outcomes: usize,
    actions: usize,
    initial_vectors: Vec<DVector<f64>>,
    operators: Vec<DMatrix<f64>>,
    pub kappa_uc: f64,
}

impl OomModel {
    pub fn from_env(env: &QhmmEnvironment) -> Result<Self> {
        let maps = build_recovery_maps(env)?;
        Self::from_maps(env, &maps)
    }

    pub fn from_maps(env: &QhmmEnvironment, maps: &[RecoveryMap]) -> Result<Self> {
        let (n, na) = (env.outcomes(), env.num_actions());
        let initial_vectors = (0..na)
            .map(|a| {
                let ins = env.instrument(a)?;
                Ok(DVector::from_fn(n, |o, _| ins.branch_weight(o, env.rho1().matrix())))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut operators = Vec::with_capacity(env.horizon().saturating_sub(1) * n * na * na);
        for t in 0..env.horizon().saturating_sub(1) {
            for o in 0..n {
                for a in 0..na {
                    for a2 in 0..na {
                        operators.push(oom_operator(env, maps, t, o, a, a2)?);
                    }
                }
            }
        }
        Ok(Self { outcomes: n, actions: na, initial_vectors, operators, kappa_uc: kappa_uc(maps) })
    }
}

impl ObservableOperators for OomModel {
    fn outcomes(&self) -> usize {
        self.outcomes
    }

    fn initial(&self, action: usize) -> Result<DVector<f64>> {
        self.initial_vectors.get(action).cloned().ok_or(QhmmError::UnknownAction(action))
    }

    fn operator(&self, t: usize, o: usize, a: usize, a_next: usize) -> Result<DMatrix<f64>> {
        let (n, na) = (self.outcomes, self.actions);
        if a >= na || a_next >= na {
            return Err(QhmmError::UnknownAction(a.max(a_next)));
        }
        let idx = ((t * n + o) * na + a) * na + a_next;
        self.operators.get(idx).cloned().ok_or(QhmmError::EpisodeFinished { step: t + 1, horizon: t + 1 })
    }
}

/// OOM of a classical hidden Markov memory observed through invertible
/// square emission matrices: A_t(o,a,a′) = O^(a′) T_t D_o^(a) (O^(a))⁻¹.
#[derive(Clone, Debug)]
pub struct ClassicalOom {
    initial: DVector<f64>,
    transitions: Vec<DMatrix<f64>>,
    emissions: Vec<DMatrix<f64>>,
    inverses: Vec<DMatrix<f64>>,
    /// action id → emission index
    action_emission: Vec<usize>,
}

impl ClassicalOom {
    /// `emissions[k][(o, m)] = p_k(o|m)`, `transitions[t][(m′, m)] = T_t(m′|m)`.
    pub fn new(
        initial: DVector<f64>,
        transitions: Vec<DMatrix<f64>>,
        emissions: Vec<DMatrix<f64>>,
        action_emission: Vec<usize>,
    ) -> Result<Self> {
        let s = initial.len();
        let mut inverses = Vec::with_capacity(emissions.len());
        for e in &emissions {
            if e.nrows() != s || e.ncols() != s {
                return Err(QhmmError::DimensionMismatch("classical OOM needs square emissions".into()));
            }
            let inv = e.clone().try_inverse().ok_or(QhmmError::NotUndercomplete { residual: f64::INFINITY })?;
            inverses.push(inv);
        }
        if action_emission.iter().any(|&k| k >= emissions.len()) {
            return Err(QhmmError::DimensionMismatch("action maps to a missing emission".into()));
        }
        Ok(Self { initial, transitions, emissions, inverses, action_emission })
    }

    fn emission_of(&self, a: usize) -> Result<usize> {
        self.action_emission.get(a).copied().ok_or(QhmmError::UnknownAction(a))
    }

    /// max_a ‖(O^(a))⁻¹‖₁→₁, the classical κ_uc.
    pub fn kappa_uc(&self) -> f64 {
        self.inverses
            .iter()
            .map(|m| (0..m.ncols()).map(|j| m.column(j).iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max))
            .fold(0.0, f64::max)
    }
}

impl ObservableOperators for ClassicalOom {
    fn outcomes(&self) -> usize {
        self.initial.len()
    }

    fn initial(&self, action: usize) -> Result<DVector<f64>> {
        Ok(&self.emissions[self.emission_of(action)?] * &self.initial)
    }

    fn operator(&self, t: usize, o: usize, a: usize, a_next: usize) -> Result<DMatrix<f64>> {
        let (k, k2) = (self.emission_of(a)?, self.emission_of(a_next)?);
        let tr = self.transitions.get(t).ok_or(QhmmError::EpisodeFinished { step: t + 1, horizon: t + 1 })?;
        let d = DMatrix::from_diagonal(&self.emissions[k].row(o).transpose());
        Ok(&self.emissions[k2] * tr * d * &self.inverses[k])
    }

    fn trajectory_prob(&self, pairs: &[(usize, usize)]) -> Result<f64> {
        // Same product as the default, associated to avoid forming matrices.
        let Some(&(a1, _)) = pairs.first() else {
            return Ok(1.0);
        };
        let s = self.initial.len();
        let mut x = self.initial(a1)?;
        let mut y = DVector::zeros(s);
        for t in 0..pairs.len() - 1 {
            let (a, o) = pairs[t];
            let k = self.emission_of(a)?;
            let k2 = self.emission_of(pairs[t + 1].0)?;
            let tr = self.transitions.get(t).ok_or(QhmmError::EpisodeFinished { step: t + 1, horizon: t + 1 })?;
            self.inverses[k].mul_to(&x, &mut y);
            for m in 0..s {
                y[m] *= self.emissions[k][(o, m)];
            }
            let z = tr * &y;
            self.emissions[k2].mul_to(&z, &mut x);
        }
        let o_last = pairs[pairs.len() - 1].1;
        if o_last >= s {
            return Err(QhmmError::OutcomeOutOfRange(o_last));
        }
        Ok(x[o_last].max(0.0))
    }
}

pub fn oom_trajectory_prob(oom: &dyn ObservableOperators, traj: &Trajectory) -> Result<f64> {
    oom.trajectory_prob(&traj.key())
}

/// Rank of the span of effect-tuple differences M^(a) − M^(a₀) in real
/// Pauli coordinates.
pub fn spanning_dimension(actions: &[Povm]) -> Result<usize> {
    let Some(first) = actions.first() else {
        return Err(QhmmError::EmptyActionSet);
    };
    let (s, no) = (first.dim(), first.outcomes());
    if actions.iter().any(|p| p.dim() != s || p.outcomes() != no) {
        return Err(QhmmError::DimensionMismatch("POVMs must share (S, O)".into()));
    }
    let basis = pauli_basis(s);
    let coords = |p: &Povm| -> Vec<f64> {
        p.effects().iter().flat_map(|e| pauli_coordinates(e, &basis)).collect()
    };
    let base = coords(first);
    let width = base.len();
    let rows: Vec<Vec<f64>> =
        actions[1..].iter().map(|p| coords(p).iter().zip(&base).map(|(x, y)| x - y).collect()).collect();
    if rows.is_empty() {
        return Ok(0);
    }
    let m = DMatrix::from_fn(rows.len(), width, |i, j| rows[i][j]);
    Ok(numerical_rank(&m, RANK_CUTOFF))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{episode_rng, Action, RewardTable};
    use crate::linalg::{Channel, DensityOperator, HermitianOperator};
    use crate::random;
    use std::sync::Arc;

    #[test]
    fn pseudo_inverse_of_full_rank_is_inverse() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 1.0, 3.0]);
        let p = pseudo_inverse(&m, PINV_CUTOFF);
        assert!((&m * &p - DMatrix::identity(2, 2)).abs().max() < 1e-14);
    }

    #[test]
    fn unsharp_luders_is_not_undercomplete() {
        let m0 = HermitianOperator::from_real_diagonal(&[0.7, 0.3]);
        let m1 = HermitianOperator::from_real_diagonal(&[0.3, 0.7]);
        let ins = Instrument::luders(&Povm::new(vec![m0, m1]).unwrap()).unwrap();
        match build_recovery_map(&ins) {
            Err(QhmmError::NotUndercomplete { residual }) => assert!(residual > 0.1),
            other => panic!("expected NotUndercomplete, got {other:?}"),
        }
    }

    #[test]
    fn rank_one_projective_luders_is_measure_and_prepare() {
        // Rank-one Lüders branches re-prepare |o⟩⟨o|, so R exists with κ = 1.
        let ins = Instrument::luders(&Povm::computational(2)).unwrap();
        let map = build_recovery_map(&ins).unwrap();
        assert!(map.residual < 1e-12);
        assert!((kappa_uc(&[map]) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn qutrit_rank_two_projector_is_not_undercomplete() {
        let p = HermitianOperator::from_real_diagonal(&[1.0, 1.0, 0.0]);
        let q = HermitianOperator::from_real_diagonal(&[0.0, 0.0, 1.0]);
        let ins = Instrument::luders(&Povm::new(vec![p, q]).unwrap()).unwrap();
        assert!(matches!(build_recovery_map(&ins), Err(QhmmError::NotUndercomplete { .. })));
    }

    fn classical_instrument(q1: f64, q2: f64) -> Instrument {
        // Φ_o(X) = Σ_m ⟨m|X|m⟩ p(o|m) |m⟩⟨m| with p(1|m) = q_m.
        let p: [[f64; 2]; 2] = [[1.0 - q1, 1.0 - q2], [q1, q2]];
        let sets = (0..2)
            .map(|o| {
                (0..2)
                    .map(|m| {
                        let mut k = CMatrix::zeros(2, 2);
                        k[(m, m)] = crate::linalg::c(p[o][m].sqrt(), 0.0);
                        k
                    })
                    .collect()
            })
            .collect();
        Instrument::from_kraus_sets(sets, 2, 2).unwrap()
    }

    #[test]
    fn classical_recovery_matches_inverse_observation_matrix() {
        let map = build_recovery_map(&classical_instrument(0.9, 0.1)).unwrap();
        assert!(map.residual < 1e-10);
        // Oracle: max column sum of |O⁻¹| for O = [[0.1, 0.9], [0.9, 0.1]].
        let det: f64 = 0.1 * 0.1 - 0.9 * 0.9;
        let inv = [[0.1 / det, -0.9 / det], [-0.9 / det, 0.1 / det]];
        let oracle = (0..2).map(|j| inv[0][j].abs() + inv[1][j].abs()).fold(0.0, f64::max);
        assert!((oracle - 1.25).abs() < 1e-12);
        assert!((kappa_uc(&[map]) - oracle).abs() < 1e-10);
    }

    fn random_env(seed: u64, s: usize, o: usize, a: usize, l: usize) -> QhmmEnvironment {
        let mut rng = episode_rng(seed, 0);
        let actions = (0..a)
            .map(|k| Action {
                label: format!("a{k}"),
                instrument: Arc::new(random::undercomplete_instrument(&mut rng, s, o)),
            })
            .collect();
        let channels = (0..l - 1).map(|_| random::channel(&mut rng, s, s, 2)).collect();
        QhmmEnvironment::new(random::density(&mut rng, s), channels, actions, RewardTable::zeros(a, o), l).unwrap()
    }

    #[test]
    fn recovery_identity_holds_on_random_hermitian_inputs() {
        let mut rng = episode_rng(30, 1);
        for seed in 0..10 {
            let ins = {
                let mut r = episode_rng(seed, 7);
                random::undercomplete_instrument(&mut r, 3, 3)
            };
            let map = build_recovery_map(&ins).unwrap();
            for _ in 0..100 {
                let x = random::hermitian(&mut rng, 3);
                let d: Vec<f64> = (0..3).map(|o| ins.branch_weight(o, x.matrix())).collect();
                let err = trace_norm_matrix(&(map.apply(&d) - ins.output(x.matrix())));
                assert!(err <= TAU_REC);
            }
        }
    }

    #[test]
    fn first_step_probability_is_initial_vector_entry() {
        let env = random_env(31, 2, 3, 2, 2);
        let oom = OomModel::from_env(&env).unwrap();
        for a in 0..2 {
            for o in 0..3 {
                let t = Trajectory::from_pairs(&[(a, o)]);
                let p = oom_trajectory_prob(&oom, &t).unwrap();
                assert!((p - oom.initial(a).unwrap()[o]).abs() < 1e-15);
                assert!((p - env.observation_likelihood(&t).unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn oom_matches_filter_on_all_trajectories() {
        for seed in 0..5 {
            let env = random_env(40 + seed, 3, 2, 2, 3);
            let oom = OomModel::from_env(&env).unwrap();
            for code in 0..(4usize.pow(3)) {
                let pairs: Vec<(usize, usize)> = (0..3).map(|k| ((code >> (2 * k)) & 1, (code >> (2 * k + 1)) & 1)).collect();
                let t = Trajectory::from_pairs(&pairs);
                let a = oom_trajectory_prob(&oom, &t).unwrap();
                let b = env.observation_likelihood(&t).unwrap();
                assert!((a - b).abs() < 1e-9, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn operator_outputs_are_diagonal() {
        let env = random_env(50, 2, 3, 2, 2);
        let maps = build_recovery_maps(&env).unwrap();
        for o in 0..3 {
            for j in 0..3 {
                let out = oom_operator_output(&env, &maps, 0, o, 1, 0, j).unwrap();
                for r in 0..3 {
                    for c in 0..3 {
                        if r != c {
                            assert_eq!(out[(r, c)].norm(), 0.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn operator_mass_does_not_grow() {
        let env = random_env(51, 2, 2, 2, 2);
        let oom = OomModel::from_env(&env).unwrap();
        let x = oom.initial(0).unwrap();
        let mut next = DVector::zeros(2);
        for o in 0..2 {
            for a2 in 0..2 {
                next += oom.operator(0, o, 0, a2).unwrap() * &x * 0.5;
            }
        }
        assert!(next.sum() <= x.sum() + 1e-12);
    }

    #[test]
    fn identity_channel_with_deterministic_instrument() {
        // Oracle: the 2×2 composition for a readout that maps |m⟩ to outcome m.
        let ins = Arc::new(classical_instrument(0.0, 1.0));
        let env = QhmmEnvironment::new(
            DensityOperator::diagonal(&[0.3, 0.7]).unwrap(),
            vec![Channel::identity(2)],
            vec![Action { label: "z".into(), instrument: ins }],
            RewardTable::zeros(1, 2),
            2,
        )
        .unwrap();
        let maps = build_recovery_maps(&env).unwrap();
        let a0 = oom_operator(&env, &maps, 0, 0, 0, 0).unwrap();
        let a1 = oom_operator(&env, &maps, 0, 1, 0, 0).unwrap();
        let want0 = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let want1 = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 0.0, 1.0]);
        assert!((a0 - want0).abs().max() < 1e-12);
        assert!((a1 - want1).abs().max() < 1e-12);
    }

    #[test]
    fn classical_oom_agrees_with_generic_oom() {
        let (q, t): ([(f64, f64); 2], f64) = ([(0.85, 0.2), (0.3, 0.75)], 0.7);
        let instruments: Vec<Arc<Instrument>> =
            q.iter().map(|&(a, b)| Arc::new(classical_instrument(a, b))).collect();
        let tm = DMatrix::from_row_slice(2, 2, &[t, 1.0 - t, 1.0 - t, t]);
        let chan = {
            let mut kraus = Vec::new();
            for m in 0..2 {
                for m2 in 0..2 {
                    let mut k = CMatrix::zeros(2, 2);
                    k[(m2, m)] = crate::linalg::c(tm[(m2, m)].sqrt(), 0.0);
                    kraus.push(k);
                }
            }
            Channel::from_kraus(kraus, 2, 2).unwrap()
        };
        let env = QhmmEnvironment::new(
            DensityOperator::diagonal(&[0.4, 0.6]).unwrap(),
            vec![chan.clone(), chan],
            instruments.iter().enumerate().map(|(i, ins)| Action { label: format!("{i}"), instrument: ins.clone() }).collect(),
            RewardTable::zeros(2, 2),
            3,
        )
        .unwrap();
        let generic = OomModel::from_env(&env).unwrap();
        let emissions: Vec<DMatrix<f64>> =
            q.iter().map(|&(a, b)| DMatrix::from_row_slice(2, 2, &[1.0 - a, 1.0 - b, a, b])).collect();
        let classical = ClassicalOom::new(
            DVector::from_vec(vec![0.4, 0.6]),
            vec![tm.clone(), tm],
            emissions,
            vec![0, 1],
        )
        .unwrap();
        for o in 0..2 {
            for a in 0..2 {
                for a2 in 0..2 {
                    let d = generic.operator(1, o, a, a2).unwrap() - classical.operator(1, o, a, a2).unwrap();
                    assert!(d.abs().max() < 1e-10);
                }
            }
        }
        let t = Trajectory::from_pairs(&[(0, 1), (1, 0), (0, 0)]);
        let (x, y) = (oom_trajectory_prob(&generic, &t).unwrap(), oom_trajectory_prob(&classical, &t).unwrap());
        assert!((x - y).abs() < 1e-12);
        assert!((generic.kappa_uc - classical.kappa_uc()).abs() < 1e-9);
    }

    #[test]
    fn spanning_dimension_is_permutation_and_duplicate_invariant() {
        let mut rng = episode_rng(60, 0);
        let mut povms: Vec<Povm> = (0..4).map(|_| random::povm(&mut rng, 2, 2)).collect();
        let d = spanning_dimension(&povms).unwrap();
        povms.reverse();
        assert_eq!(spanning_dimension(&povms).unwrap(), d);
        povms.push(povms[1].clone());
        assert_eq!(spanning_dimension(&povms).unwrap(), d);
        assert_eq!(spanning_dimension(&povms[..1]).unwrap(), 0);
        assert!(matches!(spanning_dimension(&[]), Err(QhmmError::EmptyActionSet)));
    }
}
