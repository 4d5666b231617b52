//! Dense complex matrix kernel.
//!
//! Everything downstream works with small dense matrices over `Complex64`:
//! Hilbert-Schmidt geometry, a cyclic Jacobi eigensolver for Hermitian
//! matrices, inertia counts, projection onto the positive semidefinite cone,
//! Gram-Schmidt orthonormalization of Hermitian families, Kronecker products,
//! and semidefinite square roots.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::Error;

/// Complex scalar used throughout the crate.
pub type C64 = Complex64;
/// Dense complex matrix.
pub type CMatrix = Array2<C64>;
/// Dense complex vector.
pub type CVector = Array1<C64>;

/// Relative deviation above which a matrix is rejected as non-Hermitian.
pub const HERMITIAN_REL_TOL: f64 = 1e-9;

/// Sweep cap for the Jacobi eigensolver.
const JACOBI_MAX_SWEEPS: usize = 100;
/// Off-diagonal mass threshold for Jacobi convergence, relative to the
/// Hilbert-Schmidt norm of the input.
const JACOBI_OFF_TOL: f64 = 1e-13;

/// Hilbert-Schmidt inner product `tr(Y* X)`.
///
/// # Panics
/// Panics when the shapes differ.
pub fn hs_inner(x: &CMatrix, y: &CMatrix) -> C64 {
    assert_eq!(
        x.dim(),
        y.dim(),
        "hs_inner: shapes {:?} and {:?} differ",
        x.dim(),
        y.dim()
    );
    let mut acc = C64::new(0.0, 0.0);
    for (xe, ye) in x.iter().zip(y.iter()) {
        acc += ye.conj() * xe;
    }
    acc
}

/// Hilbert-Schmidt (Frobenius) norm.
pub fn hs_norm(x: &CMatrix) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Conjugate transpose.
pub fn adjoint(x: &CMatrix) -> CMatrix {
    let (r, c) = x.dim();
    CMatrix::from_shape_fn((c, r), |(i, j)| x[[j, i]].conj())
}

/// `y += alpha * x`, entrywise.
pub fn axpy(y: &mut CMatrix, alpha: C64, x: &CMatrix) {
    y.zip_mut_with(x, |ye, xe| *ye += alpha * xe);
}

/// Complex identity matrix.
pub fn identity(n: usize) -> CMatrix {
    CMatrix::from_shape_fn((n, n), |(i, j)| {
        if i == j {
            C64::new(1.0, 0.0)
        } else {
            C64::new(0.0, 0.0)
        }
    })
}

/// Matrix unit `E_{ij}` of the given rectangular shape (zero-based indices).
pub fn matrix_unit(rows: usize, cols: usize, i: usize, j: usize) -> CMatrix {
    let mut m = CMatrix::zeros((rows, cols));
    m[[i, j]] = C64::new(1.0, 0.0);
    m
}

/// Pauli basis of `M_2` in the ordering used by this crate:
/// `pauli(0) = I`, `pauli(1) = [[0, -i], [i, 0]]`, `pauli(2) = [[0, 1], [1, 0]]`,
/// `pauli(3) = diag(1, -1)`. Any two distinct elements are Hilbert-Schmidt
/// orthogonal and each has squared norm 2.
pub fn pauli(j: usize) -> CMatrix {
    let o = C64::new(0.0, 0.0);
    let l = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    let entries = match j {
        0 => [l, o, o, l],
        1 => [o, -i, i, o],
        2 => [o, l, l, o],
        3 => [l, o, o, -l],
        _ => panic!("pauli: index {j} out of range 0..4"),
    };
    CMatrix::from_shape_vec((2, 2), entries.to_vec()).unwrap()
}

/// Hermitian matrix, kept exactly self-adjoint after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianMatrix {
    mat: CMatrix,
}

impl HermitianMatrix {
    /// Builds from a general complex matrix. The input must be square and
    /// Hermitian within `HERMITIAN_REL_TOL` relative deviation; it is then
    /// replaced by its Hermitian part `(M + M*)/2` so the stored entries
    /// satisfy `entry(i,j) = conj(entry(j,i))` exactly.
    pub fn new(mat: CMatrix) -> Result<Self, Error> {
        let (r, c) = mat.dim();
        if r != c {
            return Err(Error::NotSquare { rows: r, cols: c });
        }
        let adj = adjoint(&mat);
        let deviation = hs_norm(&(&mat - &adj));
        let bound = HERMITIAN_REL_TOL * hs_norm(&mat).max(f64::MIN_POSITIVE);
        if deviation > bound {
            return Err(Error::NotHermitian { deviation, bound });
        }
        Ok(Self::average(mat, adj))
    }

    /// Hermitian part of a square matrix known to be self-adjoint up to
    /// floating-point noise; no tolerance gate.
    pub(crate) fn symmetrized(mat: CMatrix) -> Self {
        let adj = adjoint(&mat);
        Self::average(mat, adj)
    }

    fn average(mat: CMatrix, adj: CMatrix) -> Self {
        let half = C64::new(0.5, 0.0);
        let mut sym = mat;
        sym.zip_mut_with(&adj, |m, a| *m = (*m + *a) * half);
        // Force exact conjugate symmetry; the averaged entries can still
        // disagree in the last bit.
        let n = sym.nrows();
        for i in 0..n {
            sym[[i, i]] = C64::new(sym[[i, i]].re, 0.0);
            for j in (i + 1)..n {
                let v = sym[[i, j]];
                sym[[j, i]] = v.conj();
            }
        }
        Self { mat: sym }
    }

    /// Zero matrix.
    pub fn zero(n: usize) -> Self {
        Self {
            mat: CMatrix::zeros((n, n)),
        }
    }

    /// Identity matrix.
    pub fn identity(n: usize) -> Self {
        Self { mat: identity(n) }
    }

    /// Side length.
    pub fn dim(&self) -> usize {
        self.mat.nrows()
    }

    /// Borrows the underlying matrix.
    pub fn as_matrix(&self) -> &CMatrix {
        &self.mat
    }

    /// Consumes into the underlying matrix.
    pub fn into_matrix(self) -> CMatrix {
        self.mat
    }

    /// Real trace.
    pub fn trace(&self) -> f64 {
        (0..self.dim()).map(|i| self.mat[[i, i]].re).sum()
    }

    /// Hilbert-Schmidt norm.
    pub fn norm(&self) -> f64 {
        hs_norm(&self.mat)
    }

    /// `self + other`.
    pub fn add(&self, other: &Self) -> Self {
        Self {
            mat: &self.mat + &other.mat,
        }
    }

    /// `self - other`.
    pub fn sub(&self, other: &Self) -> Self {
        Self {
            mat: &self.mat - &other.mat,
        }
    }

    /// `c * self` for real `c` (Hermitian is preserved).
    pub fn scale(&self, c: f64) -> Self {
        Self {
            mat: self.mat.mapv(|z| z * c),
        }
    }
}

/// Eigendecomposition of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    /// Eigenvalues in ascending order.
    pub eigenvalues: Vec<f64>,
    /// Unitary matrix whose `i`-th column is the eigenvector of
    /// `eigenvalues[i]`.
    pub eigenvectors: CMatrix,
}

impl EigenDecomposition {
    /// Rebuilds `V f(Lambda) V*` for a real function of the eigenvalues.
    pub fn rebuild(&self, f: impl Fn(f64) -> f64) -> HermitianMatrix {
        let n = self.eigenvalues.len();
        let v = &self.eigenvectors;
        let mut out = CMatrix::zeros((n, n));
        for (idx, &lam) in self.eigenvalues.iter().enumerate() {
            let flam = f(lam);
            if flam == 0.0 {
                continue;
            }
            let col = v.column(idx);
            for r in 0..n {
                let vr = col[r] * flam;
                for c in 0..n {
                    out[[r, c]] += vr * col[c].conj();
                }
            }
        }
        HermitianMatrix::symmetrized(out)
    }
}

/// Inertia of a Hermitian matrix: counts of negative, near-zero, and
/// positive eigenvalues.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Inertia {
    pub kappa_minus: usize,
    pub kappa_zero: usize,
    pub kappa_plus: usize,
}

/// Default tolerance separating zero from nonzero eigenvalues.
pub fn default_rank_tol(dim: usize, max_abs_eig: f64) -> f64 {
    1e-9 * dim as f64 * max_abs_eig
}

/// Hermitian eigendecomposition by cyclic Jacobi rotations.
///
/// Runs complex Jacobi sweeps until the off-diagonal Hilbert-Schmidt mass
/// drops below `1e-13` times the norm of the input, with a cap of 100
/// sweeps. Eigenvalues are returned in ascending order.
pub fn eigh(h: &HermitianMatrix) -> Result<EigenDecomposition, Error> {
    let n = h.dim();
    let mut a = h.as_matrix().clone();
    let mut v = identity(n);
    let norm = hs_norm(&a);
    let threshold = JACOBI_OFF_TOL * norm;
    // Entries at or below this magnitude are not worth a rotation; leaving
    // them all in place still keeps the off-diagonal mass below threshold.
    let rotate_eps = if n > 1 {
        threshold / (n * n) as f64
    } else {
        0.0
    };

    let mut off = off_diagonal_norm(&a);
    let mut sweeps = 0;
    while off > threshold {
        if sweeps >= JACOBI_MAX_SWEEPS {
            return Err(Error::EighNoConvergence {
                sweeps,
                off_diag: off,
                threshold,
            });
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let b = a[[p, q]];
                let abs_b = b.norm();
                if abs_b <= rotate_eps {
                    continue;
                }
                // Diagonalize the 2x2 block [[app, b], [conj(b), aqq]]:
                // strip the phase of b, then a real Jacobi rotation.
                let app = a[[p, p]].re;
                let aqq = a[[q, q]].re;
                let phase = b / abs_b;
                let tau = (aqq - app) / (2.0 * abs_b);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    1.0 / (tau - (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Unitary G is the identity outside rows/columns p,q and
                // [[c, s], [-conj(phase) s, conj(phase) c]] inside them.
                let gpp = C64::new(c, 0.0);
                let gpq = C64::new(s, 0.0);
                let gqp = -phase.conj() * s;
                let gqq = phase.conj() * c;

                // A <- G* A G. Columns first, then rows by symmetry.
                for r in 0..n {
                    let arp = a[[r, p]];
                    let arq = a[[r, q]];
                    a[[r, p]] = arp * gpp + arq * gqp;
                    a[[r, q]] = arp * gpq + arq * gqq;
                }
                for r in 0..n {
                    a[[p, r]] = a[[r, p]].conj();
                    a[[q, r]] = a[[r, q]].conj();
                }
                a[[p, p]] = C64::new(app - t * abs_b, 0.0);
                a[[q, q]] = C64::new(aqq + t * abs_b, 0.0);
                a[[p, q]] = C64::new(0.0, 0.0);
                a[[q, p]] = C64::new(0.0, 0.0);

                // V <- V G.
                for r in 0..n {
                    let vrp = v[[r, p]];
                    let vrq = v[[r, q]];
                    v[[r, p]] = vrp * gpp + vrq * gqp;
                    v[[r, q]] = vrp * gpq + vrq * gqq;
                }
            }
        }
        sweeps += 1;
        off = off_diagonal_norm(&a);
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[[i, i]].re.partial_cmp(&a[[j, j]].re).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a[[i, i]].re).collect();
    let mut eigenvectors = CMatrix::zeros((n, n));
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..n {
            eigenvectors[[r, new_col]] = v[[r, old_col]];
        }
    }
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

fn off_diagonal_norm(a: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for r in 0..n {
        for c in 0..n {
            if r != c {
                acc += a[[r, c]].norm_sqr();
            }
        }
    }
    acc.sqrt()
}

/// Counts eigenvalues below `-tol`, within `[-tol, tol]`, and above `tol`.
pub fn inertia(h: &HermitianMatrix, tol: f64) -> Result<Inertia, Error> {
    let eig = eigh(h)?;
    let mut out = Inertia {
        kappa_minus: 0,
        kappa_zero: 0,
        kappa_plus: 0,
    };
    for &lam in &eig.eigenvalues {
        if lam < -tol {
            out.kappa_minus += 1;
        } else if lam > tol {
            out.kappa_plus += 1;
        } else {
            out.kappa_zero += 1;
        }
    }
    Ok(out)
}

/// Nearest positive semidefinite matrix in Hilbert-Schmidt norm: negative
/// eigenvalues are clipped to zero.
pub fn psd_project(h: &HermitianMatrix) -> Result<HermitianMatrix, Error> {
    let eig = eigh(h)?;
    if eig.eigenvalues.first().map_or(true, |&l| l >= 0.0) {
        return Ok(h.clone());
    }
    Ok(eig.rebuild(|lam| lam.max(0.0)))
}

/// Result of Gram-Schmidt orthonormalization of a Hermitian family.
#[derive(Debug, Clone)]
pub struct GramSchmidt {
    /// Orthonormal Hermitian matrices spanning the same real-linear span.
    pub ortho: Vec<HermitianMatrix>,
    /// `coeffs[nu][j]` expands input `nu` as a real combination of
    /// `ortho[j]`.
    pub coeffs: Vec<Vec<f64>>,
    /// Indices of inputs that were linear combinations of earlier ones.
    pub dependent: Vec<usize>,
}

/// Classical Gram-Schmidt with one re-orthogonalization pass. Inputs whose
/// residual Hilbert-Schmidt norm is at most `tol` are reported dependent
/// and skipped; all coefficients are real, so the outputs stay Hermitian.
pub fn gram_schmidt_herm(list: &[HermitianMatrix], tol: f64) -> GramSchmidt {
    let mut ortho: Vec<HermitianMatrix> = Vec::new();
    let mut dependent = Vec::new();
    for (idx, a) in list.iter().enumerate() {
        let mut u = a.as_matrix().clone();
        for _pass in 0..2 {
            for g in &ortho {
                let c = hs_inner(&u, g.as_matrix()).re;
                axpy(&mut u, C64::new(-c, 0.0), g.as_matrix());
            }
        }
        let r = hs_norm(&u);
        if r <= tol {
            dependent.push(idx);
        } else {
            ortho.push(HermitianMatrix::symmetrized(u.mapv(|z| z / r)));
        }
    }
    let coeffs = list
        .iter()
        .map(|a| {
            ortho
                .iter()
                .map(|g| hs_inner(a.as_matrix(), g.as_matrix()).re)
                .collect()
        })
        .collect();
    GramSchmidt {
        ortho,
        coeffs,
        dependent,
    }
}

/// Kronecker product with the left factor indexing blocks: the entry of
/// `X ⊗ Y` at `(i*rows(Y) + l, j*cols(Y) + m)` is `X[i,j] * Y[l,m]`, so the
/// product is `X` with each entry replaced by that entry times `Y`.
pub fn kron(x: &CMatrix, y: &CMatrix) -> CMatrix {
    let (xr, xc) = x.dim();
    let (yr, yc) = y.dim();
    let mut out = CMatrix::zeros((xr * yr, xc * yc));
    for i in 0..xr {
        for j in 0..xc {
            let xij = x[[i, j]];
            if xij == C64::new(0.0, 0.0) {
                continue;
            }
            for l in 0..yr {
                for m in 0..yc {
                    out[[i * yr + l, j * yc + m]] = xij * y[[l, m]];
                }
            }
        }
    }
    out
}

/// Positive semidefinite square root. Rejects inputs whose smallest
/// eigenvalue is below `-tol`; eigenvalues in `[-tol, 0)` are treated as 0.
pub fn sqrt_psd(h: &HermitianMatrix, tol: f64) -> Result<HermitianMatrix, Error> {
    let eig = eigh(h)?;
    reject_below(&eig, tol)?;
    Ok(eig.rebuild(|lam| lam.max(0.0).sqrt()))
}

/// Pseudo-inverse square root: eigenvalues at most `tol` map to 0, the rest
/// to `1/sqrt(lambda)`. Rejects inputs with an eigenvalue below `-tol`.
pub fn pinv_sqrt(h: &HermitianMatrix, tol: f64) -> Result<HermitianMatrix, Error> {
    let eig = eigh(h)?;
    reject_below(&eig, tol)?;
    Ok(eig.rebuild(|lam| if lam <= tol { 0.0 } else { 1.0 / lam.sqrt() }))
}

fn reject_below(eig: &EigenDecomposition, tol: f64) -> Result<(), Error> {
    if let Some(&lam) = eig.eigenvalues.first() {
        if lam < -tol {
            return Err(Error::NotPsd {
                lambda_min: lam,
                tol,
            });
        }
    }
    Ok(())
}

/// Orthonormal Hermitian basis of `M_n`: the `n` diagonal units `E_ll`,
/// then for each pair `l < m` the symmetric unit `(E_lm + E_ml)/sqrt(2)`
/// followed by the antisymmetric unit `i(E_lm - E_ml)/sqrt(2)`, pairs in
/// lexicographic order. The family has `n^2` elements.
pub fn herm_unit_basis(n: usize) -> Vec<HermitianMatrix> {
    let mut basis = Vec::with_capacity(n * n);
    for l in 0..n {
        basis.push(HermitianMatrix::symmetrized(matrix_unit(n, n, l, l)));
    }
    let inv_sqrt2 = 1.0 / 2.0_f64.sqrt();
    for l in 0..n {
        for m in (l + 1)..n {
            let mut sym = CMatrix::zeros((n, n));
            sym[[l, m]] = C64::new(inv_sqrt2, 0.0);
            sym[[m, l]] = C64::new(inv_sqrt2, 0.0);
            basis.push(HermitianMatrix::symmetrized(sym));
            let mut asym = CMatrix::zeros((n, n));
            asym[[l, m]] = C64::new(0.0, inv_sqrt2);
            asym[[m, l]] = C64::new(0.0, -inv_sqrt2);
            basis.push(HermitianMatrix::symmetrized(asym));
        }
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_hermitian(n: usize, rng: &mut StdRng) -> HermitianMatrix {
        let m = CMatrix::from_shape_fn((n, n), |_| {
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        HermitianMatrix::symmetrized(m)
    }

    /// Off-diagonal corners rho, ones on the diagonal, in M_3.
    fn corner_matrix(rho: f64) -> HermitianMatrix {
        let mut m = CMatrix::zeros((3, 3));
        for i in 0..3 {
            m[[i, i]] = c(1.0, 0.0);
        }
        m[[0, 2]] = c(rho, 0.0);
        m[[2, 0]] = c(rho, 0.0);
        HermitianMatrix::new(m).unwrap()
    }

    /// Hub matrix with ones on the diagonal and rho at (0,1) and (0,2).
    fn hub_matrix(rho: f64) -> HermitianMatrix {
        let mut m = CMatrix::zeros((3, 3));
        for i in 0..3 {
            m[[i, i]] = c(1.0, 0.0);
        }
        m[[0, 1]] = c(rho, 0.0);
        m[[1, 0]] = c(rho, 0.0);
        m[[0, 2]] = c(rho, 0.0);
        m[[2, 0]] = c(rho, 0.0);
        HermitianMatrix::new(m).unwrap()
    }

    #[test]
    fn hs_inner_identity_and_paulis() {
        let i2 = identity(2);
        assert_eq!(hs_inner(&i2, &i2), c(2.0, 0.0));
        for a in 0..4 {
            for b in 0..4 {
                let got = hs_inner(&pauli(a), &pauli(b));
                let want = if a == b { c(2.0, 0.0) } else { c(0.0, 0.0) };
                assert!(
                    (got - want).norm() < 1e-15,
                    "pauli({a}) vs pauli({b}): {got}"
                );
            }
        }
        let e11 = matrix_unit(2, 2, 0, 0);
        let e22 = matrix_unit(2, 2, 1, 1);
        assert_eq!(hs_inner(&e11, &e22), c(0.0, 0.0));
    }

    #[test]
    fn hermitian_gate_rejects_and_symmetrizes() {
        let skew = CMatrix::from_shape_vec((2, 2), vec![c(0.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(0.0, 0.0)])
            .unwrap();
        assert!(matches!(
            HermitianMatrix::new(skew),
            Err(Error::NotHermitian { .. })
        ));
        let nearly = CMatrix::from_shape_vec(
            (2, 2),
            vec![c(1.0, 1e-12), c(0.5, 0.25), c(0.5, -0.25 + 1e-12), c(2.0, 0.0)],
        )
        .unwrap();
        let h = HermitianMatrix::new(nearly).unwrap();
        let m = h.as_matrix();
        assert_eq!(m[[0, 1]], m[[1, 0]].conj());
        assert_eq!(m[[0, 0]].im, 0.0);
    }

    #[test]
    fn eigh_diagonal_and_corner_examples() {
        let sigma3 = HermitianMatrix::new(pauli(3)).unwrap();
        let eig = eigh(&sigma3).unwrap();
        assert!((eig.eigenvalues[0] + 1.0).abs() < 1e-14);
        assert!((eig.eigenvalues[1] - 1.0).abs() < 1e-14);

        let sqrt2 = 2.0_f64.sqrt();
        let d = corner_matrix(sqrt2);
        let eig = eigh(&d).unwrap();
        let want = [1.0 - sqrt2, 1.0, 1.0 + sqrt2];
        for (got, want) in eig.eigenvalues.iter().zip(want.iter()) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }

        // Hub matrix at rho = 1 has the same spectrum.
        let eig = eigh(&hub_matrix(1.0)).unwrap();
        for (got, want) in eig.eigenvalues.iter().zip(want.iter()) {
            assert!((got - want).abs() < 1e-10, "{got} vs {want}");
        }
    }

    #[test]
    fn eigh_reconstructs_random_inputs() {
        let mut rng = StdRng::seed_from_u64(7);
        for n in [1usize, 2, 3, 5, 8, 12] {
            let h = random_hermitian(n, &mut rng);
            let eig = eigh(&h).unwrap();
            let rebuilt = eig.rebuild(|lam| lam);
            let err = hs_norm(&(h.as_matrix() - rebuilt.as_matrix()));
            assert!(err <= 1e-10 * (1.0 + h.norm()), "n={n}: err {err}");
            // Columns form a unitary matrix.
            let v = &eig.eigenvectors;
            let gram = adjoint(v).dot(v);
            let dev = hs_norm(&(&gram - &identity(n)));
            assert!(dev < 1e-12, "n={n}: unitary deviation {dev}");
            // Ascending order.
            for w in eig.eigenvalues.windows(2) {
                assert!(w[0] <= w[1]);
            }
        }
    }

    #[test]
    fn inertia_examples() {
        let d = CMatrix::from_shape_fn((3, 3), |(i, j)| {
            if i == j {
                c([2.0, -3.0, 0.0][i], 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        let h = HermitianMatrix::new(d).unwrap();
        let t = inertia(&h, 1e-12).unwrap();
        assert_eq!((t.kappa_minus, t.kappa_zero, t.kappa_plus), (1, 1, 1));

        let t = inertia(&hub_matrix(0.9), 1e-12).unwrap();
        assert_eq!((t.kappa_minus, t.kappa_zero, t.kappa_plus), (1, 0, 2));

        let z = HermitianMatrix::zero(4);
        let t = inertia(&z, 1e-12).unwrap();
        assert_eq!((t.kappa_minus, t.kappa_zero, t.kappa_plus), (0, 4, 0));
    }

    #[test]
    fn inertia_is_congruence_invariant_on_diagonals() {
        let mut rng = StdRng::seed_from_u64(11);
        for _ in 0..20 {
            let diag: Vec<f64> = (0..4)
                .map(|_| {
                    let (lo, hi) = [(-2.0, -0.5), (0.0, 0.0), (0.5, 2.0)][rng.gen_range(0..3)];
                    if lo == hi {
                        0.0
                    } else {
                        rng.gen_range(lo..hi)
                    }
                })
                .collect();
            let d = CMatrix::from_shape_fn((4, 4), |(i, j)| {
                if i == j {
                    c(diag[i], 0.0)
                } else {
                    c(0.0, 0.0)
                }
            });
            let h = HermitianMatrix::new(d.clone()).unwrap();
            let before = inertia(&h, 1e-9).unwrap();
            // Congruence by an invertible real diagonal matrix.
            let s: Vec<f64> = (0..4)
                .map(|_| {
                    let v: f64 = rng.gen_range(0.2..3.0);
                    if rng.gen_bool(0.5) {
                        -v
                    } else {
                        v
                    }
                })
                .collect();
            let sds = CMatrix::from_shape_fn((4, 4), |(i, j)| {
                if i == j {
                    c(s[i] * diag[i] * s[i], 0.0)
                } else {
                    c(0.0, 0.0)
                }
            });
            let after = inertia(&HermitianMatrix::new(sds).unwrap(), 1e-9).unwrap();
            assert_eq!(before, after);
        }
    }

    #[test]
    fn psd_project_examples() {
        let sigma3 = HermitianMatrix::new(pauli(3)).unwrap();
        let p = psd_project(&sigma3).unwrap();
        let want = matrix_unit(2, 2, 0, 0);
        assert!(hs_norm(&(p.as_matrix() - &want)) < 1e-12);

        let neg = HermitianMatrix::new(identity(3).mapv(|z| -z)).unwrap();
        let p = psd_project(&neg).unwrap();
        assert!(p.norm() < 1e-12);

        let mut rng = StdRng::seed_from_u64(5);
        let g = CMatrix::from_shape_fn((4, 4), |_| {
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let psd = HermitianMatrix::symmetrized(adjoint(&g).dot(&g));
        let p = psd_project(&psd).unwrap();
        assert!(hs_norm(&(p.as_matrix() - psd.as_matrix())) < 1e-10 * (1.0 + psd.norm()));

        // Idempotent, and the output is essentially PSD.
        let h = random_hermitian(5, &mut rng);
        let p1 = psd_project(&h).unwrap();
        let p2 = psd_project(&p1).unwrap();
        assert!(hs_norm(&(p1.as_matrix() - p2.as_matrix())) < 1e-10);
        let eig = eigh(&p1).unwrap();
        assert!(eig.eigenvalues[0] >= -1e-12);
    }

    #[test]
    fn gram_schmidt_examples() {
        let paulis: Vec<HermitianMatrix> = (0..4)
            .map(|j| HermitianMatrix::new(pauli(j)).unwrap())
            .collect();
        let gs = gram_schmidt_herm(&paulis, 1e-12);
        assert_eq!(gs.ortho.len(), 4);
        assert!(gs.dependent.is_empty());
        let inv_sqrt2 = 1.0 / 2.0_f64.sqrt();
        for (j, g) in gs.ortho.iter().enumerate() {
            let want = pauli(j).mapv(|z| z * inv_sqrt2);
            assert!(hs_norm(&(g.as_matrix() - &want)) < 1e-12);
        }

        let single = [paulis[2].clone()];
        let gs = gram_schmidt_herm(&single, 1e-12);
        assert!((gs.ortho[0].norm() - 1.0).abs() < 1e-14);
        assert!((gs.coeffs[0][0] - 2.0_f64.sqrt()).abs() < 1e-12);

        let dep = [paulis[0].clone(), paulis[0].scale(2.0)];
        let gs = gram_schmidt_herm(&dep, 1e-12);
        assert_eq!(gs.dependent, vec![1]);
        assert_eq!(gs.ortho.len(), 1);
    }

    #[test]
    fn gram_schmidt_random_family_properties() {
        let mut rng = StdRng::seed_from_u64(23);
        let list: Vec<HermitianMatrix> = (0..6).map(|_| random_hermitian(3, &mut rng)).collect();
        let gs = gram_schmidt_herm(&list, 1e-9);
        for (i, gi) in gs.ortho.iter().enumerate() {
            for (j, gj) in gs.ortho.iter().enumerate() {
                let got = hs_inner(gi.as_matrix(), gj.as_matrix());
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((got - c(want, 0.0)).norm() < 1e-10);
            }
        }
        // Each input reassembles from the returned coefficients.
        for (nu, a) in list.iter().enumerate() {
            let mut acc = CMatrix::zeros((3, 3));
            for (j, g) in gs.ortho.iter().enumerate() {
                axpy(&mut acc, c(gs.coeffs[nu][j], 0.0), g.as_matrix());
            }
            assert!(hs_norm(&(a.as_matrix() - &acc)) < 1e-9);
        }
    }

    #[test]
    fn kron_examples_and_mixed_product() {
        let i4 = kron(&identity(2), &identity(2));
        assert!(hs_norm(&(&i4 - &identity(4))) < 1e-15);

        let placed = kron(&matrix_unit(2, 2, 0, 1), &pauli(3));
        for r in 0..4 {
            for cc in 0..4 {
                let want = if r < 2 && cc >= 2 {
                    pauli(3)[[r, cc - 2]]
                } else {
                    c(0.0, 0.0)
                };
                assert_eq!(placed[[r, cc]], want);
            }
        }

        let mut rng = StdRng::seed_from_u64(31);
        let rand2 = |rng: &mut StdRng| {
            CMatrix::from_shape_fn((2, 2), |_| {
                c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            })
        };
        for _ in 0..10 {
            let (x, y, xp, yp) = (rand2(&mut rng), rand2(&mut rng), rand2(&mut rng), rand2(&mut rng));
            let lhs = kron(&x, &y).dot(&kron(&xp, &yp));
            let rhs = kron(&x.dot(&xp), &y.dot(&yp));
            assert!(hs_norm(&(&lhs - &rhs)) < 1e-12);
        }

        // Action on elementary tensors, as an independent route.
        for _ in 0..5 {
            let x = rand2(&mut rng);
            let y = rand2(&mut rng);
            let k = kron(&x, &y);
            for i in 0..2 {
                for l in 0..2 {
                    let mut e = CVector::zeros(4);
                    e[i * 2 + l] = c(1.0, 0.0);
                    let got = k.dot(&e);
                    for r in 0..2 {
                        for s in 0..2 {
                            let want = x[[r, i]] * y[[s, l]];
                            assert!((got[r * 2 + s] - want).norm() < 1e-13);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn sqrt_and_pinv_sqrt() {
        let d49 = CMatrix::from_shape_fn((2, 2), |(i, j)| {
            if i == j {
                c([4.0, 9.0][i], 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        let h = HermitianMatrix::new(d49).unwrap();
        let s = sqrt_psd(&h, 1e-12).unwrap();
        assert!((s.as_matrix()[[0, 0]].re - 2.0).abs() < 1e-12);
        assert!((s.as_matrix()[[1, 1]].re - 3.0).abs() < 1e-12);

        let d40 = CMatrix::from_shape_fn((2, 2), |(i, j)| {
            if i == j {
                c([4.0, 0.0][i], 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        let h = HermitianMatrix::new(d40).unwrap();
        let p = pinv_sqrt(&h, 1e-12).unwrap();
        assert!((p.as_matrix()[[0, 0]].re - 0.5).abs() < 1e-12);
        assert!(p.as_matrix()[[1, 1]].norm() < 1e-15);

        let mut rng = StdRng::seed_from_u64(37);
        let g = CMatrix::from_shape_fn((4, 4), |_| {
            c(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        });
        let psd = HermitianMatrix::symmetrized(adjoint(&g).dot(&g));
        let s = sqrt_psd(&psd, 1e-10).unwrap();
        let back = s.as_matrix().dot(s.as_matrix());
        assert!(hs_norm(&(&back - psd.as_matrix())) < 1e-10 * (1.0 + psd.norm()));

        let sigma3 = HermitianMatrix::new(pauli(3)).unwrap();
        assert!(matches!(sqrt_psd(&sigma3, 1e-9), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn herm_unit_basis_is_orthonormal_and_complete() {
        for n in [2usize, 3, 4] {
            let basis = herm_unit_basis(n);
            assert_eq!(basis.len(), n * n);
            for (i, gi) in basis.iter().enumerate() {
                for (j, gj) in basis.iter().enumerate() {
                    let got = hs_inner(gi.as_matrix(), gj.as_matrix());
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((got - c(want, 0.0)).norm() < 1e-14, "n={n} i={i} j={j}");
                }
            }
        }
    }
}
