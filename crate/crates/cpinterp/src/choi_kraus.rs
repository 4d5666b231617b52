//! Choi matrices, Kraus sets, and the shuffle between index layouts.
//!
//! A linear map `phi: M_n -> M_k` is stored either as its Choi matrix, the
//! `kn x kn` block matrix `[phi(E_lm)]` indexed by `r = l*k + i` (zero-based:
//! `l` indexes the `M_n` factor, `i` the `M_k` factor), or as a Kraus set of
//! `n x k` matrices `V_j` acting by `A -> sum V_j* A V_j`. The density matrix
//! of the associated functional uses the opposite layout `i*n + l`; the
//! canonical shuffle permutation converts between the two.

use crate::hermlinalg::{
    adjoint, eigh, hs_norm, identity, CMatrix, HermitianMatrix, C64,
};
use crate::Error;

/// Choi matrix of a linear map `M_n -> M_k`.
///
/// `matrix[[l*k + i, m*k + j]]` is the `(i,j)` entry of the image of the
/// matrix unit `E_lm` (all indices zero-based).
#[derive(Debug, Clone)]
pub struct ChoiMatrix {
    n: usize,
    k: usize,
    matrix: CMatrix,
}

impl ChoiMatrix {
    /// Wraps a `kn x kn` matrix in the Choi index layout.
    pub fn new(n: usize, k: usize, matrix: CMatrix) -> Result<Self, Error> {
        let d = n * k;
        if matrix.dim() != (d, d) {
            return Err(Error::ShapeMismatch {
                context: format!(
                    "Choi matrix for n={n}, k={k} must be {d}x{d}, got {:?}",
                    matrix.dim()
                ),
            });
        }
        Ok(Self { n, k, matrix })
    }

    /// Input dimension `n`.
    pub fn input_dim(&self) -> usize {
        self.n
    }

    /// Output dimension `k`.
    pub fn output_dim(&self) -> usize {
        self.k
    }

    /// Borrows the underlying `kn x kn` matrix.
    pub fn as_matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Consumes into the underlying matrix.
    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }
}

/// Kraus representation: a list of `n x k` operation elements.
#[derive(Debug, Clone)]
pub struct KrausSet {
    n: usize,
    k: usize,
    ops: Vec<CMatrix>,
}

impl KrausSet {
    /// Wraps operation elements, all of shape `n x k`. The list may be
    /// empty (the zero map).
    pub fn new(n: usize, k: usize, ops: Vec<CMatrix>) -> Result<Self, Error> {
        for (j, v) in ops.iter().enumerate() {
            if v.dim() != (n, k) {
                return Err(Error::ShapeMismatch {
                    context: format!(
                        "Kraus element {j} must be {n}x{k}, got {:?}",
                        v.dim()
                    ),
                });
            }
        }
        Ok(Self { n, k, ops })
    }

    /// Input dimension `n`.
    pub fn input_dim(&self) -> usize {
        self.n
    }

    /// Output dimension `k`.
    pub fn output_dim(&self) -> usize {
        self.k
    }

    /// The operation elements.
    pub fn ops(&self) -> &[CMatrix] {
        &self.ops
    }

    /// Number of operation elements.
    pub fn len(&self) -> usize {
        self.ops.len()
    }

    /// True for the zero map.
    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }
}

/// Permutation matrix sending the density layout to the Choi layout:
/// column `i*n + l` carries its 1 in row `l*k + i` (zero-based), so
/// `U e_{i*n+l} = e_{l*k+i}`.
pub fn shuffle_matrix(n: usize, k: usize) -> CMatrix {
    let d = n * k;
    let mut u = CMatrix::zeros((d, d));
    for i in 0..k {
        for l in 0..n {
            u[[l * k + i, i * n + l]] = C64::new(1.0, 0.0);
        }
    }
    u
}

/// Density matrix of the functional associated with a Choi matrix:
/// `D = U* conj(Phi) U` with `U` the canonical shuffle.
pub fn choi_to_density(phi: &ChoiMatrix) -> Result<HermitianMatrix, Error> {
    let u = shuffle_matrix(phi.n, phi.k);
    let conj_phi = phi.matrix.mapv(|z| z.conj());
    let d = adjoint(&u).dot(&conj_phi).dot(&u);
    HermitianMatrix::new(d)
}

/// Inverse of [`choi_to_density`]: `Phi = U conj(D) U*`.
pub fn density_to_choi(d: &HermitianMatrix, n: usize, k: usize) -> Result<ChoiMatrix, Error> {
    if d.dim() != n * k {
        return Err(Error::ShapeMismatch {
            context: format!(
                "density matrix for n={n}, k={k} must have side {}, got {}",
                n * k,
                d.dim()
            ),
        });
    }
    let u = shuffle_matrix(n, k);
    let conj_d = d.as_matrix().mapv(|z| z.conj());
    let phi = u.dot(&conj_d).dot(&adjoint(&u));
    ChoiMatrix::new(n, k, phi)
}

/// Applies the map described by a Choi matrix:
/// `phi(C)[i,j] = sum_{l,m} Phi[l*k+i, m*k+j] C[l,m]`.
pub fn apply_choi(phi: &ChoiMatrix, c: &CMatrix) -> Result<CMatrix, Error> {
    let (n, k) = (phi.n, phi.k);
    if c.dim() != (n, n) {
        return Err(Error::ShapeMismatch {
            context: format!("apply_choi input must be {n}x{n}, got {:?}", c.dim()),
        });
    }
    let mut out = CMatrix::zeros((k, k));
    for i in 0..k {
        for j in 0..k {
            let mut acc = C64::new(0.0, 0.0);
            for l in 0..n {
                for m in 0..n {
                    acc += phi.matrix[[l * k + i, m * k + j]] * c[[l, m]];
                }
            }
            out[[i, j]] = acc;
        }
    }
    Ok(out)
}

/// Extracts a minimal Kraus set from a PSD Choi matrix.
///
/// Eigenvalues above `tol` each contribute one operation element, so the
/// count equals the numerical rank at `tol`; an eigenvalue below `-tol` is
/// rejected. For reproducibility each eigenvector is rotated so its first
/// nonzero entry is real positive, and elements are emitted with the
/// largest eigenvalue first.
pub fn kraus_from_choi(phi: &ChoiMatrix, tol: f64) -> Result<KrausSet, Error> {
    let herm = HermitianMatrix::new(phi.matrix.clone())?;
    let eig = eigh(&herm)?;
    if let Some(&lam) = eig.eigenvalues.first() {
        if lam < -tol {
            return Err(Error::NotPsd {
                lambda_min: lam,
                tol,
            });
        }
    }
    let (n, k) = (phi.n, phi.k);
    let mut ops = Vec::new();
    for idx in (0..eig.eigenvalues.len()).rev() {
        let lam = eig.eigenvalues[idx];
        if lam <= tol {
            break;
        }
        let mut g: Vec<C64> = eig.eigenvectors.column(idx).to_vec();
        if let Some(first) = g.iter().find(|z| z.norm() > 1e-12).copied() {
            let rot = first.conj() / first.norm();
            for z in g.iter_mut() {
                *z *= rot;
            }
        }
        let scale = lam.sqrt();
        let mut v = CMatrix::zeros((n, k));
        for l in 0..n {
            for i in 0..k {
                v[[l, i]] = g[l * k + i].conj() * scale;
            }
        }
        ops.push(v);
    }
    KrausSet::new(n, k, ops)
}

/// Applies a Kraus set: `A -> sum_j V_j* A V_j`.
pub fn apply_kraus(kraus: &KrausSet, a: &CMatrix) -> Result<CMatrix, Error> {
    let (n, k) = (kraus.n, kraus.k);
    if a.dim() != (n, n) {
        return Err(Error::ShapeMismatch {
            context: format!("apply_kraus input must be {n}x{n}, got {:?}", a.dim()),
        });
    }
    let mut out = CMatrix::zeros((k, k));
    for v in &kraus.ops {
        out = out + adjoint(v).dot(a).dot(v);
    }
    Ok(out)
}

/// Choi matrix of a Kraus set:
/// `Phi[l*k+i, m*k+j] = sum_t conj(V_t[l,i]) V_t[m,j]`.
pub fn choi_of_kraus(kraus: &KrausSet) -> ChoiMatrix {
    let (n, k) = (kraus.n, kraus.k);
    let d = n * k;
    let mut phi = CMatrix::zeros((d, d));
    for v in &kraus.ops {
        for l in 0..n {
            for i in 0..k {
                let lhs = v[[l, i]].conj();
                if lhs == C64::new(0.0, 0.0) {
                    continue;
                }
                for m in 0..n {
                    for j in 0..k {
                        phi[[l * k + i, m * k + j]] += lhs * v[[m, j]];
                    }
                }
            }
        }
    }
    ChoiMatrix { n, k, matrix: phi }
}

/// Trace of the map's Choi image over the output factor:
/// `(sum_i Phi[l*k+i, m*k+i])_{l,m}`, an `n x n` matrix. The map is trace
/// preserving exactly when this equals the identity.
pub fn kraus_trace_image(kraus: &KrausSet) -> CMatrix {
    let n = kraus.n;
    let mut out = CMatrix::zeros((n, n));
    for v in &kraus.ops {
        out = out + v.dot(&adjoint(v));
    }
    out
}

/// `sum_j V_j V_j* - I_n`, whose norm measures the trace-preservation
/// defect of a Kraus set.
pub fn trace_preservation_defect(kraus: &KrausSet) -> f64 {
    let sum = kraus_trace_image(kraus);
    hs_norm(&(&sum - &identity(kraus.n)))
}
