//! Shared samplers for the integration suites. Everything is driven by a
//! caller-supplied seeded generator so every suite is reproducible.

use cpinterp::choi_kraus::{ChoiMatrix, KrausSet};
use cpinterp::hermlinalg::{adjoint, eigh, CMatrix, HermitianMatrix, C64};
use rand::rngs::StdRng;
use rand::Rng;

pub fn random_matrix(rows: usize, cols: usize, rng: &mut StdRng) -> CMatrix {
    CMatrix::from_shape_fn((rows, cols), |_| {
        C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
    })
}

pub fn random_hermitian(n: usize, rng: &mut StdRng) -> HermitianMatrix {
    let g = random_matrix(n, n, rng);
    let adj = adjoint(&g);
    HermitianMatrix::new((g + adj).mapv(|z| z * 0.5)).expect("symmetrized matrix is Hermitian")
}

/// Two-pass modified Gram-Schmidt on the columns; the input must have
/// linearly independent columns.
pub fn orthonormal_columns(g: &CMatrix) -> CMatrix {
    let (rows, cols) = g.dim();
    let mut q = g.clone();
    for c in 0..cols {
        for _pass in 0..2 {
            for prev in 0..c {
                let mut dot = C64::new(0.0, 0.0);
                for r in 0..rows {
                    dot += q[[r, prev]].conj() * q[[r, c]];
                }
                for r in 0..rows {
                    let sub = dot * q[[r, prev]];
                    q[[r, c]] -= sub;
                }
            }
        }
        let norm: f64 = (0..rows).map(|r| q[[r, c]].norm_sqr()).sum::<f64>().sqrt();
        assert!(norm > 1e-12, "columns must be independent");
        for r in 0..rows {
            q[[r, c]] /= C64::new(norm, 0.0);
        }
    }
    q
}

pub fn random_kraus(n: usize, k: usize, count: usize, rng: &mut StdRng) -> KrausSet {
    KrausSet::new(n, k, (0..count).map(|_| random_matrix(n, k, rng)).collect())
        .expect("sampled Kraus shapes are valid")
}

/// Random trace-preserving Kraus set: orthonormalize the columns of a
/// stacked Gaussian block matrix, slice it into `count` blocks of `k` rows,
/// and adjoint each block. By construction the adjoints `V_j` satisfy
/// `sum_j V_j V_j^* = I_n`.
pub fn random_channel(n: usize, k: usize, count: usize, rng: &mut StdRng) -> KrausSet {
    assert!(k * count >= n, "need k*count >= n for an isometry");
    let g = random_matrix(k * count, n, rng);
    let q = orthonormal_columns(&g);
    let ops = (0..count)
        .map(|j| {
            let block = q.slice(ndarray::s![j * k..(j + 1) * k, ..]).to_owned();
            adjoint(&block)
        })
        .collect();
    KrausSet::new(n, k, ops).expect("sliced isometry blocks are n x k adjoints")
}

/// PSD Choi matrix of exactly the prescribed rank: a weighted sum of
/// projectors onto orthonormal vectors with weights bounded away from zero.
pub fn psd_choi_of_rank(n: usize, k: usize, rank: usize, rng: &mut StdRng) -> ChoiMatrix {
    let dim = n * k;
    assert!(rank >= 1 && rank <= dim);
    let q = orthonormal_columns(&random_matrix(dim, rank, rng));
    let mut m = CMatrix::zeros((dim, dim));
    for t in 0..rank {
        let w = rng.gen_range(0.5..2.0);
        for r in 0..dim {
            for c in 0..dim {
                m[[r, c]] += C64::new(w, 0.0) * q[[r, t]] * q[[c, t]].conj();
            }
        }
    }
    ChoiMatrix::new(n, k, m).expect("projector sums are valid Choi matrices")
}

/// Random Hermitian matrix with exactly `plus` positive and `minus`
/// negative eigenvalues (magnitudes in `[0.2, 2]`), the rest zero, in a
/// random eigenbasis.
pub fn hermitian_with_signature(
    n: usize,
    plus: usize,
    minus: usize,
    rng: &mut StdRng,
) -> HermitianMatrix {
    assert!(plus + minus <= n);
    let basis = eigh(&random_hermitian(n, rng)).expect("random Hermitian eigendecomposition");
    let mut values = vec![0.0; n];
    for value in values.iter_mut().take(plus) {
        *value = rng.gen_range(0.2..2.0);
    }
    for value in values.iter_mut().skip(plus).take(minus) {
        *value = -rng.gen_range(0.2..2.0);
    }
    let u = &basis.eigenvectors;
    let mut m = CMatrix::zeros((n, n));
    for (t, &lambda) in values.iter().enumerate() {
        if lambda == 0.0 {
            continue;
        }
        for r in 0..n {
            for c in 0..n {
                m[[r, c]] += C64::new(lambda, 0.0) * u[[r, t]] * u[[c, t]].conj();
            }
        }
    }
    HermitianMatrix::new(m).expect("spectral sums are Hermitian")
}

/// Random PSD element supported on the hub pattern: ground size 3 with the
/// off-diagonal positions `(i, j)` and `(j, l)` (plus adjoints) allowed.
/// The parametrization `b = s sqrt(ad) e^{i theta}`, `c = t sqrt(ae)
/// e^{i eta}` with `s^2 + t^2 <= 1` covers that positive cone exactly.
pub fn hub_positive_sample(triple: (usize, usize, usize), rng: &mut StdRng) -> CMatrix {
    let (i, j, l) = triple;
    let a: f64 = rng.gen_range(0.0..2.0);
    let d: f64 = rng.gen_range(0.0..2.0);
    let e: f64 = rng.gen_range(0.0..2.0);
    let (s, t) = loop {
        let s: f64 = rng.gen_range(0.0..1.0);
        let t: f64 = rng.gen_range(0.0..1.0);
        if s * s + t * t <= 1.0 {
            break (s, t);
        }
    };
    let theta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let eta: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
    let b = C64::from_polar(s * (a * d).sqrt(), theta);
    let c = C64::from_polar(t * (a * e).sqrt(), eta);
    let mut m = CMatrix::zeros((3, 3));
    m[[i, i]] = C64::new(d, 0.0);
    m[[j, j]] = C64::new(a, 0.0);
    m[[l, l]] = C64::new(e, 0.0);
    m[[j, i]] = b;
    m[[i, j]] = b.conj();
    m[[j, l]] = c;
    m[[l, j]] = c.conj();
    m
}
