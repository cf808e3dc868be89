//! Random operators, channels and environments for property tests and
//! verification suites. All generators are driven by the caller's RNG.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::{c, hermitian_function, CMatrix, Channel, DensityOperator, HermitianOperator, Instrument, Povm};

pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| {
        c(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    })
}

pub fn hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> HermitianOperator {
    HermitianOperator::from_matrix_unchecked(ginibre(rng, dim, dim))
}

/// Full-rank random state G G† / Tr.
pub fn density<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DensityOperator {
    let g = ginibre(rng, dim, dim);
    let m = &g * g.adjoint();
    let tr = crate::linalg::trace(&m).re;
    DensityOperator::from_matrix(m.map(|z| z / tr)).expect("Wishart matrix is a state")
}

/// Haar-ish unitary from the QR decomposition of a Ginibre matrix.
pub fn unitary<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMatrix {
    let qr = ginibre(rng, dim, dim).qr();
    let (q, r) = (qr.q(), qr.r());
    let mut u = q;
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { c(1.0, 0.0) };
        for i in 0..dim {
            u[(i, j)] *= phase;
        }
    }
    u
}

/// Normalizes {G_k} to {G_k S^{-1/2}} with S = Σ G†G.
fn normalize_kraus(ops: Vec<CMatrix>, dim_in: usize) -> Vec<CMatrix> {
    let mut s = CMatrix::zeros(dim_in, dim_in);
    for g in &ops {
        s += g.adjoint() * g;
    }
    let inv_sqrt = hermitian_function(&s, |v| 1.0 / v.sqrt());
    ops.into_iter().map(|g| g * &inv_sqrt).collect()
}

pub fn channel<R: Rng + ?Sized>(rng: &mut R, dim_in: usize, dim_out: usize, n_kraus: usize) -> Channel {
    let ops = (0..n_kraus).map(|_| ginibre(rng, dim_out, dim_in)).collect();
    Channel::from_kraus(normalize_kraus(ops, dim_in), dim_in, dim_out).expect("normalized Kraus set")
}

pub fn povm<R: Rng + ?Sized>(rng: &mut R, dim: usize, outcomes: usize) -> Povm {
    let ins = instrument(rng, dim, outcomes, 1);
    ins.povm()
}

/// Random instrument: a random channel's Kraus set split into branches.
pub fn instrument<R: Rng + ?Sized>(rng: &mut R, dim: usize, outcomes: usize, kraus_per_branch: usize) -> Instrument {
    let ops: Vec<CMatrix> = (0..outcomes * kraus_per_branch).map(|_| ginibre(rng, dim, dim)).collect();
    let ops = normalize_kraus(ops, dim);
    let sets = ops.chunks(kraus_per_branch).map(|c| c.to_vec()).collect();
    Instrument::from_kraus_sets(sets, dim, dim).expect("normalized Kraus set")
}

/// Column-stochastic matrix with `rows` outcomes and `cols` inputs, entries
/// bounded away from zero.
pub fn stochastic<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Vec<Vec<f64>> {
    let mut m = vec![vec![0.0; cols]; rows];
    for j in 0..cols {
        let w: Vec<f64> = (0..rows).map(|_| rng.gen_range(0.05..1.0)).collect();
        let s: f64 = w.iter().sum();
        for i in 0..rows {
            m[i][j] = w[i] / s;
        }
    }
    m
}

/// An instrument whose branches only depend on a measured POVM, so that a
/// recovery map exists: either measure-and-prepare, or a classical readout of
/// the computational basis followed by preparation (needs outcomes ≥ dim).
pub fn undercomplete_instrument<R: Rng + ?Sized>(rng: &mut R, dim: usize, outcomes: usize) -> Instrument {
    if outcomes >= dim && rng.gen_bool(0.5) {
        let emission = stochastic(rng, outcomes, dim);
        let states: Vec<DensityOperator> = (0..dim).map(|_| density(rng, dim)).collect();
        let mut sets = Vec::new();
        for row in emission.iter().take(outcomes) {
            let mut kraus = Vec::new();
            for (s, state) in states.iter().enumerate() {
                let (vals, vecs) = state.op().eigen();
                for (k, &v) in vals.iter().enumerate() {
                    let w = (row[s] * v.max(0.0)).sqrt();
                    kraus.push(CMatrix::from_fn(dim, dim, |r, col| if col == s { vecs[(r, k)] * w } else { c(0.0, 0.0) }));
                }
            }
            sets.push(kraus);
        }
        Instrument::from_kraus_sets(sets, dim, dim).expect("classical readout instrument")
    } else {
        let m = povm(rng, dim, outcomes);
        let states: Vec<DensityOperator> = (0..outcomes).map(|_| density(rng, dim)).collect();
        Instrument::measure_and_prepare(&m, &states).expect("measure-and-prepare instrument")
    }
}
