//! Dense complex operator algebra on small Hilbert spaces.
//!
//! Everything here is immutable after construction. Constructors symmetrize
//! their input before validation so that round-off accumulated by long chains
//! of channel applications does not trip the Hermiticity checks.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{QhmmError, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

pub const TOL_HERM: f64 = 1e-9;
pub const TOL_TRACE: f64 = 1e-9;
pub const TOL_TP: f64 = 1e-9;
pub const TOL_PSD: f64 = 1e-9;

/// Eigenvalues at or below this are outside the support.
pub const SUPPORT_FLOOR: f64 = 1e-300;

pub(crate) fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).map(|z| z * 0.5)
}

fn hermiticity_deviation(m: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    let eig = hermitian_part(m).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (col, &k) in order.iter().enumerate() {
        vectors.set_column(col, &eig.eigenvectors.column(k));
    }
    (values, vectors)
}

/// Applies `f` to the spectrum of a Hermitian matrix.
pub fn hermitian_function(m: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let (vals, vecs) = hermitian_eigen(m);
    let d = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        vals.len(),
        vals.iter().map(|&v| c(f(v), 0.0)),
    ));
    &vecs * d * vecs.adjoint()
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Pauli matrices (σ1, σ2, σ3).
pub fn pauli() -> [CMatrix; 3] {
    let o = c(0.0, 0.0);
    let one = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    [
        CMatrix::from_row_slice(2, 2, &[o, one, one, o]),
        CMatrix::from_row_slice(2, 2, &[o, -i, i, o]),
        CMatrix::from_row_slice(2, 2, &[one, o, o, -one]),
    ]
}

/// (a I + r·σ) for a qubit.
pub fn bloch_matrix(a: f64, r: [f64; 3]) -> CMatrix {
    let s = pauli();
    let mut m = CMatrix::identity(2, 2).map(|z| z * a);
    for k in 0..3 {
        m += s[k].map(|z| z * r[k]);
    }
    m
}

/// A Hermitian matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianOperator {
    m: CMatrix,
}

impl HermitianOperator {
    pub fn new(m: CMatrix) -> Result<Self> {
        if m.nrows() != m.ncols() || m.nrows() == 0 {
            return Err(QhmmError::DimensionMismatch(format!(
                "expected a non-empty square matrix, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        let dev = hermiticity_deviation(&m);
        if dev > TOL_HERM {
            return Err(QhmmError::NotHermitian(dev));
        }
        Ok(Self { m: hermitian_part(&m) })
    }

    /// Skips the tolerance check but still symmetrizes.
    pub fn from_matrix_unchecked(m: CMatrix) -> Self {
        Self { m: hermitian_part(&m) }
    }

    pub fn from_real_diagonal(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = CMatrix::zeros(n, n);
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = c(v, 0.0);
        }
        Self { m }
    }

    pub fn identity(dim: usize) -> Self {
        Self { m: CMatrix::identity(dim, dim) }
    }

    pub fn zeros(dim: usize) -> Self {
        Self { m: CMatrix::zeros(dim, dim) }
    }

    /// |v⟩⟨v| (not normalized).
    pub fn projector(v: &[C64]) -> Self {
        let n = v.len();
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = v[i] * v[j].conj();
            }
        }
        Self { m }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.m
    }

    pub fn into_matrix(self) -> CMatrix {
        self.m
    }

    pub fn trace(&self) -> f64 {
        trace(&self.m).re
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigen(&self.m).0
    }

    pub fn eigen(&self) -> (Vec<f64>, CMatrix) {
        hermitian_eigen(&self.m)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn scale(&self, a: f64) -> Self {
        Self { m: self.m.map(|z| z * a) }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_same_dim(self.dim(), other.dim())?;
        Ok(Self { m: &self.m + &other.m })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_same_dim(self.dim(), other.dim())?;
        Ok(Self { m: &self.m - &other.m })
    }

    pub fn kron(&self, other: &Self) -> Self {
        Self { m: kron(&self.m, &other.m) }
    }

    /// Re Tr(AB), the Hilbert-Schmidt inner product of Hermitian operators.
    pub fn hs_inner(&self, other: &Self) -> f64 {
        self.m.iter().zip(other.m.transpose().iter()).map(|(a, b)| (a * b).re).sum()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.m.iter().zip(other.m.iter()).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

fn check_same_dim(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(QhmmError::DimensionMismatch(format!("{a} vs {b}")));
    }
    Ok(())
}

/// A positive semidefinite, unit-trace operator.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityOperator {
    op: HermitianOperator,
}

impl DensityOperator {
    pub fn new(op: HermitianOperator) -> Result<Self> {
        let tr = op.trace();
        if (tr - 1.0).abs() > TOL_TRACE {
            return Err(QhmmError::BadTrace(tr));
        }
        let min = op.min_eigenvalue();
        if min < -TOL_PSD {
            return Err(QhmmError::NotPositive(min));
        }
        Ok(Self { op })
    }

    pub fn from_matrix(m: CMatrix) -> Result<Self> {
        Self::new(HermitianOperator::new(m)?)
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { op: HermitianOperator::identity(dim).scale(1.0 / dim as f64) }
    }

    pub fn diagonal(probs: &[f64]) -> Result<Self> {
        Self::new(HermitianOperator::from_real_diagonal(probs))
    }

    /// Pure state from an (unnormalized) vector.
    pub fn pure(v: &[C64]) -> Result<Self> {
        let norm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        if norm2 <= 0.0 {
            return Err(QhmmError::OutOfRange("zero state vector".into()));
        }
        Self::new(HermitianOperator::projector(v).scale(1.0 / norm2))
    }

    pub fn basis_state(dim: usize, k: usize) -> Self {
        let mut d = vec![0.0; dim];
        d[k] = 1.0;
        Self { op: HermitianOperator::from_real_diagonal(&d) }
    }

    /// Qubit state (I + r·σ)/2, requires |r| ≤ 1.
    pub fn from_bloch(r: [f64; 3]) -> Result<Self> {
        let len = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        if len > 1.0 + TOL_PSD {
            return Err(QhmmError::OutOfRange(format!("Bloch vector length {len}")));
        }
        Self::new(HermitianOperator::from_matrix_unchecked(bloch_matrix(0.5, r.map(|x| 0.5 * x))))
    }

    /// Bloch vector of a qubit state.
    pub fn bloch(&self) -> [f64; 3] {
        let s = pauli();
        let h = self.op();
        [0, 1, 2].map(|k| h.hs_inner(&HermitianOperator::from_matrix_unchecked(s[k].clone())))
    }

    pub fn dim(&self) -> usize {
        self.op.dim()
    }

    pub fn op(&self) -> &HermitianOperator {
        &self.op
    }

    pub fn matrix(&self) -> &CMatrix {
        self.op.matrix()
    }

    /// Convex combination Σ w_i ρ_i.
    pub fn mixture(weights: &[f64], states: &[DensityOperator]) -> Result<Self> {
        if weights.len() != states.len() || states.is_empty() {
            return Err(QhmmError::DimensionMismatch("mixture weights vs states".into()));
        }
        let d = states[0].dim();
        let mut m = CMatrix::zeros(d, d);
        for (w, s) in weights.iter().zip(states) {
            check_same_dim(d, s.dim())?;
            m += s.matrix().map(|z| z * *w);
        }
        Self::new(HermitianOperator::from_matrix_unchecked(m))
    }

    pub fn von_neumann_entropy(&self) -> f64 {
        self.op.eigenvalues().iter().map(|&p| xlogx_neg(p)).sum()
    }
}

/// -p ln p with the 0 ln 0 = 0 convention and negative round-off clipped.
fn xlogx_neg(p: f64) -> f64 {
    if p <= SUPPORT_FLOOR {
        0.0
    } else {
        -p * p.ln()
    }
}

/// Shannon entropy in nats.
pub fn shannon_entropy(p: &[f64]) -> f64 {
    p.iter().map(|&x| xlogx_neg(x)).sum()
}

/// Classical KL divergence in nats, +inf on support violation.
pub fn kl_divergence(p: &[f64], q: &[f64]) -> f64 {
    let mut d = 0.0;
    for (&a, &b) in p.iter().zip(q) {
        if a <= SUPPORT_FLOOR {
            continue;
        }
        if b <= SUPPORT_FLOOR {
            return f64::INFINITY;
        }
        d += a * (a / b).ln();
    }
    d
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelKind {
    TracePreserving,
    TraceNonIncreasing,
}

/// A completely positive map in Kraus form.
#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    dim_in: usize,
    dim_out: usize,
    kraus: Vec<CMatrix>,
    kind: ChannelKind,
}

impl Channel {
    pub fn from_kraus(kraus: Vec<CMatrix>, dim_in: usize, dim_out: usize) -> Result<Self> {
        for k in &kraus {
            if k.nrows() != dim_out || k.ncols() != dim_in {
                return Err(QhmmError::DimensionMismatch(format!(
                    "Kraus operator {}x{} for a map {dim_in}->{dim_out}",
                    k.nrows(),
                    k.ncols()
                )));
            }
        }
        let gram = kraus_gram(&kraus, dim_in);
        let defect = CMatrix::identity(dim_in, dim_in) - gram;
        let dev = defect.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let kind = if dev <= TOL_TP {
            ChannelKind::TracePreserving
        } else {
            let min = hermitian_eigen(&defect).0[0];
            if min < -TOL_PSD {
                return Err(QhmmError::TraceIncreasing(-min));
            }
            ChannelKind::TraceNonIncreasing
        };
        Ok(Self { dim_in, dim_out, kraus, kind })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            dim_in: dim,
            dim_out: dim,
            kraus: vec![CMatrix::identity(dim, dim)],
            kind: ChannelKind::TracePreserving,
        }
    }

    pub fn unitary(u: CMatrix) -> Result<Self> {
        let d = u.nrows();
        Self::from_kraus(vec![u], d, d)
    }

    /// X ↦ Tr(X)·σ.
    pub fn replacing(sigma: &DensityOperator, dim_in: usize) -> Self {
        let (vals, vecs) = sigma.op().eigen();
        let dim_out = sigma.dim();
        let mut kraus = Vec::new();
        for (k, &v) in vals.iter().enumerate() {
            if v <= 0.0 {
                continue;
            }
            for j in 0..dim_in {
                let mut m = CMatrix::zeros(dim_out, dim_in);
                for i in 0..dim_out {
                    m[(i, j)] = vecs[(i, k)] * v.sqrt();
                }
                kraus.push(m);
            }
        }
        Self { dim_in, dim_out, kraus, kind: ChannelKind::TracePreserving }
    }

    /// X ↦ Tr(X)·I/d.
    pub fn depolarizing(dim: usize) -> Self {
        Self::replacing(&DensityOperator::maximally_mixed(dim), dim)
    }

    /// Kraus decomposition of a Choi matrix with (output ⊗ input) ordering.
    pub fn from_choi(j: &HermitianOperator, dim_in: usize, dim_out: usize) -> Result<Self> {
        if j.dim() != dim_in * dim_out {
            return Err(QhmmError::DimensionMismatch(format!(
                "Choi dim {} for a map {dim_in}->{dim_out}",
                j.dim()
            )));
        }
        let (vals, vecs) = j.eigen();
        if vals[0] < -TOL_PSD {
            return Err(QhmmError::NotPositive(vals[0]));
        }
        let mut kraus = Vec::new();
        for (k, &v) in vals.iter().enumerate() {
            if v <= TOL_PSD {
                continue;
            }
            let s = v.sqrt();
            let mut m = CMatrix::zeros(dim_out, dim_in);
            for o in 0..dim_out {
                for i in 0..dim_in {
                    m[(o, i)] = vecs[(o * dim_in + i, k)] * s;
                }
            }
            kraus.push(m);
        }
        Self::from_kraus(kraus, dim_in, dim_out)
    }

    pub fn dim_in(&self) -> usize {
        self.dim_in
    }

    pub fn dim_out(&self) -> usize {
        self.dim_out
    }

    pub fn kraus(&self) -> &[CMatrix] {
        &self.kraus
    }

    pub fn kind(&self) -> ChannelKind {
        self.kind
    }

    pub fn is_trace_preserving(&self) -> bool {
        self.kind == ChannelKind::TracePreserving
    }

    /// Σ K ρ K† on a raw matrix, without validation.
    pub fn apply_matrix(&self, rho: &CMatrix) -> CMatrix {
        let mut out = CMatrix::zeros(self.dim_out, self.dim_out);
        for k in &self.kraus {
            out += k * rho * k.adjoint();
        }
        out
    }

    pub fn apply(&self, rho: &HermitianOperator) -> Result<HermitianOperator> {
        if rho.dim() != self.dim_in {
            return Err(QhmmError::DimensionMismatch(format!(
                "state dim {} for channel input {}",
                rho.dim(),
                self.dim_in
            )));
        }
        Ok(HermitianOperator::from_matrix_unchecked(self.apply_matrix(rho.matrix())))
    }

    /// `other ∘ self`.
    pub fn then(&self, other: &Channel) -> Result<Channel> {
        if other.dim_in != self.dim_out {
            return Err(QhmmError::DimensionMismatch("channel composition".into()));
        }
        let mut kraus = Vec::with_capacity(self.kraus.len() * other.kraus.len());
        for b in &other.kraus {
            for a in &self.kraus {
                kraus.push(b * a);
            }
        }
        Channel::from_kraus(kraus, self.dim_in, other.dim_out)
    }

    /// Σ K†K.
    pub fn gram(&self) -> CMatrix {
        kraus_gram(&self.kraus, self.dim_in)
    }
}

fn kraus_gram(kraus: &[CMatrix], dim_in: usize) -> CMatrix {
    let mut g = CMatrix::zeros(dim_in, dim_in);
    for k in kraus {
        g += k.adjoint() * k;
    }
    g
}

pub fn apply_channel(ch: &Channel, rho: &HermitianOperator) -> Result<HermitianOperator> {
    ch.apply(rho)
}

/// Choi matrix J = Σ_ij Φ(|i⟩⟨j|) ⊗ |i⟩⟨j|, output factor first.
pub fn choi_of(ch: &Channel) -> HermitianOperator {
    let (di, dout) = (ch.dim_in(), ch.dim_out());
    let mut j = CMatrix::zeros(dout * di, dout * di);
    for a in 0..di {
        for b in 0..di {
            let mut e = CMatrix::zeros(di, di);
            e[(a, b)] = c(1.0, 0.0);
            let img = ch.apply_matrix(&e);
            for o in 0..dout {
                for p in 0..dout {
                    j[(o * di + a, p * di + b)] = img[(o, p)];
                }
            }
        }
    }
    HermitianOperator::from_matrix_unchecked(j)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subsystem {
    A,
    B,
}

/// Partial trace on a raw matrix over A ⊗ B, keeping `keep`.
pub fn partial_trace_matrix(x: &CMatrix, dims: (usize, usize), keep: Subsystem) -> Result<CMatrix> {
    let (da, db) = dims;
    if x.nrows() != da * db || x.ncols() != da * db {
        return Err(QhmmError::DimensionMismatch(format!(
            "matrix dim {} is not {da}*{db}",
            x.nrows()
        )));
    }
    Ok(match keep {
        Subsystem::A => CMatrix::from_fn(da, da, |i, j| (0..db).map(|k| x[(i * db + k, j * db + k)]).sum()),
        Subsystem::B => CMatrix::from_fn(db, db, |i, j| (0..da).map(|k| x[(k * db + i, k * db + j)]).sum()),
    })
}

pub fn partial_trace(x: &HermitianOperator, dims: (usize, usize), keep: Subsystem) -> Result<HermitianOperator> {
    Ok(HermitianOperator::from_matrix_unchecked(partial_trace_matrix(x.matrix(), dims, keep)?))
}

pub fn trace_norm(x: &HermitianOperator) -> f64 {
    x.eigenvalues().iter().map(|v| v.abs()).sum()
}

pub fn trace_norm_matrix(x: &CMatrix) -> f64 {
    hermitian_eigen(x).0.iter().map(|v| v.abs()).sum()
}

/// D(ρ‖σ) in nats; +inf when the support of ρ is not inside that of σ.
pub fn relative_entropy(rho: &DensityOperator, sigma: &DensityOperator) -> f64 {
    if rho.dim() != sigma.dim() {
        return f64::NAN;
    }
    let (p, a) = rho.op().eigen();
    let (q, b) = sigma.op().eigen();
    let overlap = a.adjoint() * &b;
    let mut d = -shannon_entropy(&p);
    for (j, &qj) in q.iter().enumerate() {
        let w: f64 = p
            .iter()
            .enumerate()
            .filter(|(_, &pi)| pi > SUPPORT_FLOOR)
            .map(|(i, &pi)| pi * overlap[(i, j)].norm_sqr())
            .sum();
        if qj <= SUPPORT_FLOOR {
            // Overlaps of order 1e-12 are round-off, not support.
            if w > 1e-12 {
                return f64::INFINITY;
            }
            continue;
        }
        d -= w * qj.ln();
    }
    d
}

/// Normalized generalized Pauli basis: I/√d, then symmetric, antisymmetric
/// and diagonal traceless generators. Orthonormal under Re Tr(AB).
pub fn pauli_basis(dim: usize) -> Vec<HermitianOperator> {
    let mut basis = vec![HermitianOperator::identity(dim).scale(1.0 / (dim as f64).sqrt())];
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for j in 0..dim {
        for k in (j + 1)..dim {
            let mut s = CMatrix::zeros(dim, dim);
            s[(j, k)] = c(r, 0.0);
            s[(k, j)] = c(r, 0.0);
            basis.push(HermitianOperator { m: s });
            let mut a = CMatrix::zeros(dim, dim);
            a[(j, k)] = c(0.0, -r);
            a[(k, j)] = c(0.0, r);
            basis.push(HermitianOperator { m: a });
        }
    }
    for l in 1..dim {
        let norm = 1.0 / ((l * (l + 1)) as f64).sqrt();
        let mut d = vec![0.0; dim];
        for x in d.iter_mut().take(l) {
            *x = norm;
        }
        d[l] = -(l as f64) * norm;
        basis.push(HermitianOperator::from_real_diagonal(&d));
    }
    basis
}

/// Real coordinates of a Hermitian operator in `pauli_basis`.
pub fn pauli_coordinates(x: &HermitianOperator, basis: &[HermitianOperator]) -> Vec<f64> {
    basis.iter().map(|b| b.hs_inner(x)).collect()
}

/// A positive operator-valued measure.
#[derive(Clone, Debug, PartialEq)]
pub struct Povm {
    effects: Vec<HermitianOperator>,
}

impl Povm {
    pub fn new(effects: Vec<HermitianOperator>) -> Result<Self> {
        let Some(first) = effects.first() else {
            return Err(QhmmError::InvalidPovm("no effects".into()));
        };
        let d = first.dim();
        let mut sum = CMatrix::zeros(d, d);
        for (o, e) in effects.iter().enumerate() {
            if e.dim() != d {
                return Err(QhmmError::InvalidPovm(format!("effect {o} has dim {}", e.dim())));
            }
            let min = e.min_eigenvalue();
            if min < -TOL_PSD {
                return Err(QhmmError::InvalidPovm(format!("effect {o} has eigenvalue {min:.3e}")));
            }
            sum += e.matrix();
        }
        let dev = (sum - CMatrix::identity(d, d)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if dev > TOL_TP {
            return Err(QhmmError::InvalidPovm(format!("effects sum deviates from I by {dev:.3e}")));
        }
        Ok(Self { effects })
    }

    pub fn computational(dim: usize) -> Self {
        Self { effects: (0..dim).map(|k| DensityOperator::basis_state(dim, k).op().clone()).collect() }
    }

    /// Two-outcome qubit measurement along unit Bloch direction n: M0 = (I + n·σ)/2.
    pub fn qubit_projective(n: [f64; 3]) -> Result<Self> {
        let m0 = HermitianOperator::from_matrix_unchecked(bloch_matrix(0.5, n.map(|x| 0.5 * x)));
        let m1 = HermitianOperator::identity(2).sub(&m0)?;
        Self::new(vec![m0, m1])
    }

    pub fn effects(&self) -> &[HermitianOperator] {
        &self.effects
    }

    pub fn outcomes(&self) -> usize {
        self.effects.len()
    }

    pub fn dim(&self) -> usize {
        self.effects[0].dim()
    }

    pub fn probabilities(&self, rho: &DensityOperator) -> Vec<f64> {
        self.effects.iter().map(|e| e.hs_inner(rho.op())).collect()
    }
}

/// A collection of CP trace-non-increasing branch maps summing to a channel.
#[derive(Clone, Debug, PartialEq)]
pub struct Instrument {
    branches: Vec<Channel>,
    effects: Vec<CMatrix>,
}

impl Instrument {
    pub fn new(branches: Vec<Channel>) -> Result<Self> {
        let Some(first) = branches.first() else {
            return Err(QhmmError::InvalidPovm("instrument without branches".into()));
        };
        let (di, dout) = (first.dim_in(), first.dim_out());
        let mut sum = CMatrix::zeros(di, di);
        let mut effects = Vec::with_capacity(branches.len());
        for b in &branches {
            if b.dim_in() != di || b.dim_out() != dout {
                return Err(QhmmError::DimensionMismatch("instrument branch dims differ".into()));
            }
            let g = b.gram();
            sum += &g;
            effects.push(hermitian_part(&g));
        }
        let dev = (sum - CMatrix::identity(di, di)).iter().map(|z| z.norm()).fold(0.0, f64::max);
        if dev > TOL_TP {
            return Err(QhmmError::NotTracePreserving(dev));
        }
        Ok(Self { branches, effects })
    }

    pub fn from_kraus_sets(sets: Vec<Vec<CMatrix>>, dim_in: usize, dim_out: usize) -> Result<Self> {
        let branches = sets
            .into_iter()
            .map(|k| Channel::from_kraus(k, dim_in, dim_out))
            .collect::<Result<Vec<_>>>()?;
        Self::new(branches)
    }

    /// Lüders instrument: Φ_o(X) = √M_o X √M_o.
    pub fn luders(povm: &Povm) -> Result<Self> {
        let d = povm.dim();
        let sets = povm
            .effects()
            .iter()
            .map(|e| vec![hermitian_function(e.matrix(), |v| v.max(0.0).sqrt())])
            .collect();
        Self::from_kraus_sets(sets, d, d)
    }

    /// Φ_o(X) = Tr(M_o X)·τ_o.
    pub fn measure_and_prepare(povm: &Povm, states: &[DensityOperator]) -> Result<Self> {
        if states.len() != povm.outcomes() {
            return Err(QhmmError::DimensionMismatch("one prepared state per outcome".into()));
        }
        let din = povm.dim();
        let dout = states[0].dim();
        let mut sets = Vec::new();
        for (e, tau) in povm.effects().iter().zip(states) {
            let (mv, mvec) = e.eigen();
            let (tv, tvec) = tau.op().eigen();
            let mut kraus = Vec::new();
            for (j, &m) in mv.iter().enumerate() {
                if m <= 0.0 {
                    continue;
                }
                for (k, &t) in tv.iter().enumerate() {
                    if t <= 0.0 {
                        continue;
                    }
                    let s = (m * t).sqrt();
                    let kr = CMatrix::from_fn(dout, din, |r, col| tvec[(r, k)] * mvec[(col, j)].conj() * s);
                    kraus.push(kr);
                }
            }
            if kraus.is_empty() {
                kraus.push(CMatrix::zeros(dout, din));
            }
            sets.push(kraus);
        }
        Self::from_kraus_sets(sets, din, dout)
    }

    pub fn branches(&self) -> &[Channel] {
        &self.branches
    }

    pub fn outcomes(&self) -> usize {
        self.branches.len()
    }

    pub fn dim_in(&self) -> usize {
        self.branches[0].dim_in()
    }

    pub fn dim_out(&self) -> usize {
        self.branches[0].dim_out()
    }

    /// Effects M_o = Σ K†K of the branches.
    pub fn effect_matrices(&self) -> &[CMatrix] {
        &self.effects
    }

    pub fn povm(&self) -> Povm {
        Povm {
            effects: self.effects.iter().map(|m| HermitianOperator::from_matrix_unchecked(m.clone())).collect(),
        }
    }

    /// Tr Φ_o(X) = Tr(M_o X).
    pub fn branch_weight(&self, o: usize, x: &CMatrix) -> f64 {
        let m = &self.effects[o];
        let mut s = 0.0;
        for i in 0..m.nrows() {
            for j in 0..m.ncols() {
                s += (m[(i, j)] * x[(j, i)]).re;
            }
        }
        s
    }

    pub fn apply_branch(&self, o: usize, x: &CMatrix) -> CMatrix {
        self.branches[o].apply_matrix(x)
    }

    /// P(X) = Σ_o Φ_o(X) ⊗ |o⟩⟨o| on S ⊗ O.
    pub fn output(&self, x: &CMatrix) -> CMatrix {
        let s = self.dim_out();
        let no = self.outcomes();
        let mut out = CMatrix::zeros(s * no, s * no);
        for o in 0..no {
            let b = self.apply_branch(o, x);
            for i in 0..s {
                for j in 0..s {
                    out[(i * no + o, j * no + o)] = b[(i, j)];
                }
            }
        }
        out
    }
}

/// Serializable matrix as nested [re, im] pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MatrixRepr(pub Vec<Vec<[f64; 2]>>);

impl MatrixRepr {
    pub fn from_matrix(m: &CMatrix) -> Self {
        Self((0..m.nrows()).map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect()).collect())
    }

    pub fn to_matrix(&self) -> Result<CMatrix> {
        let rows = self.0.len();
        let cols = self.0.first().map_or(0, |r| r.len());
        if self.0.iter().any(|r| r.len() != cols) {
            return Err(QhmmError::Serialization("ragged matrix".into()));
        }
        Ok(CMatrix::from_fn(rows, cols, |i, j| c(self.0[i][j][0], self.0[i][j][1])))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn binary_entropy(p: f64) -> f64 {
        -p * p.ln() - (1.0 - p) * (1.0 - p).ln()
    }

    #[test]
    fn identity_channel_is_noop() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rho = random::density(&mut rng, 3);
        let out = Channel::identity(3).apply(rho.op()).unwrap();
        assert!(out.max_abs_diff(rho.op()) < 1e-15);
    }

    #[test]
    fn depolarizing_maps_to_maximally_mixed() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rho = random::density(&mut rng, 3);
        let out = Channel::depolarizing(3).apply(rho.op()).unwrap();
        assert!(out.max_abs_diff(DensityOperator::maximally_mixed(3).op()) < 1e-14);
    }

    #[test]
    fn random_channel_output_is_a_state() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let ch = random::channel(&mut rng, 2, 2, 3);
        let out = ch.apply(DensityOperator::basis_state(2, 0).op()).unwrap();
        assert!(DensityOperator::new(out).is_ok());
        let j = choi_of(&ch);
        assert!(j.min_eigenvalue() > -TOL_PSD);
        let tr_out = partial_trace(&j, (2, 2), Subsystem::B).unwrap();
        assert!(tr_out.max_abs_diff(&HermitianOperator::identity(2)) < 1e-12);
    }

    #[test]
    fn choi_examples() {
        let j = choi_of(&Channel::identity(2));
        let ev = j.eigenvalues();
        assert!((j.trace() - 2.0).abs() < 1e-14);
        assert!((ev[3] - 2.0).abs() < 1e-14 && ev[2].abs() < 1e-14);
        let j = choi_of(&Channel::depolarizing(2));
        assert!(j.max_abs_diff(&HermitianOperator::identity(4).scale(0.5)) < 1e-14);
    }

    #[test]
    fn choi_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ch = random::channel(&mut rng, 2, 3, 2);
        let back = Channel::from_choi(&choi_of(&ch), 2, 3).unwrap();
        assert!(back.is_trace_preserving());
        let rho = random::density(&mut rng, 2);
        let a = ch.apply(rho.op()).unwrap();
        let b = back.apply(rho.op()).unwrap();
        assert!(a.max_abs_diff(&b) < 1e-10);
    }

    #[test]
    fn partial_trace_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rho = random::density(&mut rng, 2);
        let sigma = random::density(&mut rng, 3);
        let o = DensityOperator::basis_state(3, 1);
        let prod = rho.op().kron(o.op());
        assert!(partial_trace(&prod, (2, 3), Subsystem::A).unwrap().max_abs_diff(rho.op()) < 1e-15);
        let prod = rho.op().kron(sigma.op());
        assert!(partial_trace(&prod, (2, 3), Subsystem::B).unwrap().max_abs_diff(sigma.op()) < 1e-15);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let bell = HermitianOperator::projector(&[c(r, 0.0), c(0.0, 0.0), c(0.0, 0.0), c(r, 0.0)]);
        let red = partial_trace(&bell, (2, 2), Subsystem::A).unwrap();
        assert!(red.max_abs_diff(&HermitianOperator::identity(2).scale(0.5)) < 1e-15);
        assert!(partial_trace(&bell, (3, 2), Subsystem::A).is_err());
    }

    #[test]
    fn trace_norm_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let rho = random::density(&mut rng, 3);
        assert!((trace_norm(rho.op()) - 1.0).abs() < 1e-12);
        assert!((trace_norm(&HermitianOperator::from_real_diagonal(&[0.3, -0.3])) - 0.6).abs() < 1e-15);
        let sigma = random::density(&mut rng, 3);
        let t = trace_norm(&rho.op().sub(sigma.op()).unwrap());
        assert!((0.0..=2.0).contains(&t));
    }

    #[test]
    fn relative_entropy_examples() {
        let zero = DensityOperator::basis_state(2, 0);
        let mixed = DensityOperator::maximally_mixed(2);
        assert!((relative_entropy(&zero, &mixed) - 2f64.ln()).abs() < 1e-14);
        assert!(relative_entropy(&zero, &zero).abs() < 1e-14);
        let d = DensityOperator::diagonal(&[0.9, 0.1]).unwrap();
        assert!((relative_entropy(&d, &mixed) - (2f64.ln() - binary_entropy(0.9))).abs() < 1e-14);
        assert_eq!(relative_entropy(&mixed, &zero), f64::INFINITY);
        assert_eq!(relative_entropy(&DensityOperator::basis_state(2, 1), &zero), f64::INFINITY);
    }

    #[test]
    fn relative_entropy_of_rotated_states_is_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rho = random::density(&mut rng, 3);
        let sigma = random::density(&mut rng, 3);
        let u = random::unitary(&mut rng, 3);
        let rot = |s: &DensityOperator| DensityOperator::from_matrix(&u * s.matrix() * u.adjoint()).unwrap();
        let a = relative_entropy(&rho, &sigma);
        let b = relative_entropy(&rot(&rho), &rot(&sigma));
        assert!((a - b).abs() < 1e-10);
    }

    #[test]
    fn pauli_basis_is_orthonormal() {
        for d in 1..=4 {
            let b = pauli_basis(d);
            assert_eq!(b.len(), d * d);
            for (i, x) in b.iter().enumerate() {
                for (j, y) in b.iter().enumerate() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((x.hs_inner(y) - want).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn constructors_reject_invalid_input() {
        let m = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)]);
        assert!(matches!(HermitianOperator::new(m), Err(QhmmError::NotHermitian(_))));
        assert!(matches!(DensityOperator::diagonal(&[0.5, 0.6]), Err(QhmmError::BadTrace(_))));
        assert!(matches!(DensityOperator::diagonal(&[1.5, -0.5]), Err(QhmmError::NotPositive(_))));
        let k = CMatrix::identity(2, 2).map(|z| z * 1.1);
        assert!(matches!(Channel::from_kraus(vec![k], 2, 2), Err(QhmmError::TraceIncreasing(_))));
        let half = CMatrix::identity(2, 2).map(|z| z * 0.5);
        assert_eq!(Channel::from_kraus(vec![half], 2, 2).unwrap().kind(), ChannelKind::TraceNonIncreasing);
        let bad = Povm::new(vec![HermitianOperator::from_real_diagonal(&[1.0, 0.0])]);
        assert!(bad.is_err());
    }

    #[test]
    fn measure_and_prepare_acts_as_declared() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let povm = random::povm(&mut rng, 2, 3);
        let states: Vec<_> = (0..3).map(|_| random::density(&mut rng, 2)).collect();
        let ins = Instrument::measure_and_prepare(&povm, &states).unwrap();
        let rho = random::density(&mut rng, 2);
        for o in 0..3 {
            let got = ins.apply_branch(o, rho.matrix());
            let want = states[o].matrix().map(|z| z * povm.effects()[o].hs_inner(rho.op()));
            assert!((got - want).iter().all(|z| z.norm() < 1e-12));
        }
    }

    #[test]
    fn matrix_repr_round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let rho = random::density(&mut rng, 3);
        let repr = MatrixRepr::from_matrix(rho.matrix());
        let s = serde_json::to_string(&repr).unwrap();
        let back: MatrixRepr = serde_json::from_str(&s).unwrap();
        assert_eq!(&back.to_matrix().unwrap(), rho.matrix());
    }
}
