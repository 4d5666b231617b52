//! Closed-form theory for a single Hermitian pair.
//!
//! For one pair `(A, B)` the interpolation problem has a complete answer in
//! terms of inertia: a CP map with `phi(A) = B` built from `r` Kraus
//! elements exists exactly when `kappa_plus(B) <= r * kappa_plus(A)` and
//! `kappa_minus(B) <= r * kappa_minus(A)`, and the minimizing `r` comes
//! with an explicit construction: split the spectrum of `B` into groups
//! respecting the inertia of `A` and solve each group by a rank-one map.

use crate::choi_kraus::KrausSet;
use crate::hermlinalg::{eigh, CMatrix, CVector, HermitianMatrix, C64};
use crate::Error;

/// Eigenpairs of a Hermitian matrix split by the sign of the eigenvalue.
#[derive(Debug, Clone)]
pub struct SpectralSplit {
    /// Positive eigenpairs `(lambda, v)`, eigenvalues descending.
    pub h_plus: Vec<(f64, CVector)>,
    /// Negative eigenpairs stored with positive values `(|lambda|, v)`,
    /// absolute values descending.
    pub h_minus: Vec<(f64, CVector)>,
    /// Number of eigenvalues within `tol` of zero.
    pub kernel_dim: usize,
}

/// Splits the spectrum by sign; eigenvalues with `|lambda| <= tol` count
/// as kernel. The lists reassemble the input as
/// `sum lambda v v* - sum mu w w*`.
pub fn spectral_split(h: &HermitianMatrix, tol: f64) -> Result<SpectralSplit, Error> {
    let eig = eigh(h)?;
    let mut h_plus = Vec::new();
    let mut h_minus = Vec::new();
    let mut kernel_dim = 0;
    for (i, &lam) in eig.eigenvalues.iter().enumerate() {
        let v = eig.eigenvectors.column(i).to_owned();
        if lam > tol {
            h_plus.push((lam, v));
        } else if lam < -tol {
            h_minus.push((-lam, v));
        } else {
            kernel_dim += 1;
        }
    }
    // eigh returns ascending order: reverse the positive list so both
    // lists are descending in absolute value.
    h_plus.reverse();
    Ok(SpectralSplit {
        h_plus,
        h_minus,
        kernel_dim,
    })
}

/// Builds an `n x k` matrix `V` with `V* A V = B`, which exists exactly
/// when `kappa_plus(B) <= kappa_plus(A)` and
/// `kappa_minus(B) <= kappa_minus(A)`: the `i`-th eigenvector of each sign
/// block of `B` is paired with the `i`-th eigenvector of the same block of
/// `A` (eigenvalues descending) and weighted by the square root of the
/// eigenvalue ratio.
pub fn rank_one_map(
    a: &HermitianMatrix,
    b: &HermitianMatrix,
    tol: f64,
) -> Result<CMatrix, Error> {
    let sa = spectral_split(a, tol)?;
    let sb = spectral_split(b, tol)?;
    if sb.h_plus.len() > sa.h_plus.len() {
        return Err(Error::RankCondition {
            sign: "positive",
            needed: sb.h_plus.len(),
            available: sa.h_plus.len(),
        });
    }
    if sb.h_minus.len() > sa.h_minus.len() {
        return Err(Error::RankCondition {
            sign: "negative",
            needed: sb.h_minus.len(),
            available: sa.h_minus.len(),
        });
    }
    let (n, k) = (a.dim(), b.dim());
    let mut v = CMatrix::zeros((n, k));
    let blocks = [(&sa.h_plus, &sb.h_plus), (&sa.h_minus, &sb.h_minus)];
    for (a_list, b_list) in blocks {
        for (i, (weight_b, bv)) in b_list.iter().enumerate() {
            let (weight_a, av) = &a_list[i];
            let c = C64::new((weight_b / weight_a).sqrt(), 0.0);
            for r in 0..n {
                for cc in 0..k {
                    v[[r, cc]] += c * av[r] * bv[cc].conj();
                }
            }
        }
    }
    Ok(v)
}

/// Minimal number of Kraus elements of a CP map sending `A` to `B`:
/// `max(ceil(kappa_plus(B)/kappa_plus(A)), ceil(kappa_minus(B)/kappa_minus(A)))`
/// with `0/0` read as `0`. Infeasible when `A` is semidefinite (or zero)
/// but `B` has eigenvalues of a sign that `A` lacks.
pub fn minimal_rank(a: &HermitianMatrix, b: &HermitianMatrix, tol: f64) -> Result<usize, Error> {
    let sa = spectral_split(a, tol)?;
    let sb = spectral_split(b, tol)?;
    let need = |b_count: usize, a_count: usize, sign: &str| -> Result<usize, Error> {
        if b_count == 0 {
            Ok(0)
        } else if a_count == 0 {
            Err(Error::SinglePairInfeasible {
                detail: format!(
                    "the target has {b_count} {sign} eigenvalue(s) but the input has none \
                     of that sign"
                ),
            })
        } else {
            Ok(b_count.div_ceil(a_count))
        }
    };
    let r_plus = need(sb.h_plus.len(), sa.h_plus.len(), "positive")?;
    let r_minus = need(sb.h_minus.len(), sa.h_minus.len(), "negative")?;
    Ok(r_plus.max(r_minus))
}

/// Constructs a CP map with `phi(A) = B` using exactly the minimal number
/// of Kraus elements: the positive spectral terms of `B` are distributed
/// round-robin (absolute values descending) into `r` groups, likewise the
/// negative terms, so every group satisfies the inertia bound of `A` and
/// is solved by [`rank_one_map`].
pub fn solve_single(
    a: &HermitianMatrix,
    b: &HermitianMatrix,
    tol: f64,
) -> Result<KrausSet, Error> {
    let r = minimal_rank(a, b, tol)?;
    let (n, k) = (a.dim(), b.dim());
    if r == 0 {
        return KrausSet::new(n, k, Vec::new());
    }
    let sb = spectral_split(b, tol)?;
    let mut groups = vec![CMatrix::zeros((k, k)); r];
    for (j, (lam, v)) in sb.h_plus.iter().enumerate() {
        accumulate_outer(&mut groups[j % r], *lam, v);
    }
    for (j, (mu, v)) in sb.h_minus.iter().enumerate() {
        accumulate_outer(&mut groups[j % r], -*mu, v);
    }
    let ops = groups
        .into_iter()
        .map(|g| rank_one_map(a, &HermitianMatrix::symmetrized(g), tol))
        .collect::<Result<Vec<_>, _>>()?;
    KrausSet::new(n, k, ops)
}

fn accumulate_outer(target: &mut CMatrix, weight: f64, v: &CVector) {
    let k = v.len();
    let w = C64::new(weight, 0.0);
    for i in 0..k {
        for j in 0..k {
            target[[i, j]] += w * v[i] * v[j].conj();
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::choi_kraus::{apply_kraus, choi_of_kraus};
    use crate::hermlinalg::{adjoint, hs_norm, inertia, pauli};
    use crate::interpolation::{solve, Problem, SolveOptions, SolveOutcome};
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    const SPLIT_TOL: f64 = 1e-10;

    fn herm(m: CMatrix) -> HermitianMatrix {
        HermitianMatrix::symmetrized(m)
    }

    fn random_hermitian(n: usize, rng: &mut StdRng) -> HermitianMatrix {
        herm(CMatrix::from_shape_fn((n, n), |_| {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        }))
    }

    fn diag(entries: &[f64]) -> HermitianMatrix {
        let n = entries.len();
        let mut m = CMatrix::zeros((n, n));
        for (i, &v) in entries.iter().enumerate() {
            m[[i, i]] = C64::new(v, 0.0);
        }
        herm(m)
    }

    fn conjugate(v: &CMatrix, a: &HermitianMatrix) -> HermitianMatrix {
        herm(adjoint(v).dot(a.as_matrix()).dot(v))
    }

    /// Hermitian matrix with the prescribed signature, rotated by the
    /// eigenbasis of a random Hermitian matrix.
    fn with_signature(dim: usize, plus: usize, minus: usize, rng: &mut StdRng) -> HermitianMatrix {
        assert!(plus + minus <= dim);
        let basis = eigh(&random_hermitian(dim, rng)).unwrap().eigenvectors;
        let mut m = CMatrix::zeros((dim, dim));
        for i in 0..plus {
            let lam: f64 = rng.gen_range(0.2..2.0);
            let v = basis.column(i).to_owned();
            accumulate_outer(&mut m, lam, &v);
        }
        for i in 0..minus {
            let lam: f64 = rng.gen_range(0.2..2.0);
            let v = basis.column(plus + i).to_owned();
            accumulate_outer(&mut m, -lam, &v);
        }
        herm(m)
    }

    #[test]
    fn spectral_split_examples_and_reconstruction() {
        let split = spectral_split(&herm(pauli(3)), SPLIT_TOL).unwrap();
        assert_eq!(split.h_plus.len(), 1);
        assert_eq!(split.h_minus.len(), 1);
        assert_eq!(split.kernel_dim, 0);
        assert!((split.h_plus[0].0 - 1.0).abs() < 1e-12);
        assert!((split.h_minus[0].0 - 1.0).abs() < 1e-12);

        let psd = diag(&[2.0, 1.0, 0.0]);
        let split = spectral_split(&psd, SPLIT_TOL).unwrap();
        assert!(split.h_minus.is_empty());
        assert_eq!(split.h_plus.len(), 2);
        assert_eq!(split.kernel_dim, 1);
        assert!(split.h_plus[0].0 >= split.h_plus[1].0);

        let mut rng = StdRng::seed_from_u64(113);
        for _ in 0..20 {
            let h = random_hermitian(4, &mut rng);
            let split = spectral_split(&h, SPLIT_TOL).unwrap();
            let mut rebuilt = CMatrix::zeros((4, 4));
            for (lam, v) in &split.h_plus {
                accumulate_outer(&mut rebuilt, *lam, v);
            }
            for (mu, v) in &split.h_minus {
                accumulate_outer(&mut rebuilt, -*mu, v);
            }
            assert!(hs_norm(&(&rebuilt - h.as_matrix())) < 1e-10);
            let inert = inertia(&h, SPLIT_TOL).unwrap();
            assert_eq!(split.h_plus.len(), inert.kappa_plus);
            assert_eq!(split.h_minus.len(), inert.kappa_minus);
            assert_eq!(split.kernel_dim, inert.kappa_zero);
        }
    }

    #[test]
    fn rank_one_map_diagonal_example() {
        let a = herm(pauli(3));
        let b = diag(&[4.0, -9.0]);
        let v = rank_one_map(&a, &b, SPLIT_TOL).unwrap();
        // V is diag(2, 3) up to eigenvector phases.
        assert!((v[[0, 0]].norm() - 2.0).abs() < 1e-12);
        assert!((v[[1, 1]].norm() - 3.0).abs() < 1e-12);
        assert!(v[[0, 1]].norm() < 1e-12);
        assert!(v[[1, 0]].norm() < 1e-12);
        let image = conjugate(&v, &a);
        assert!(hs_norm(&(image.as_matrix() - b.as_matrix())) < 1e-12);
    }

    #[test]
    fn rank_one_map_edge_cases() {
        let a = diag(&[1.0, 2.0]);
        let b = HermitianMatrix::zero(3);
        let v = rank_one_map(&a, &b, SPLIT_TOL).unwrap();
        assert!(hs_norm(&v) < 1e-15);

        // Wider target: B in M_4 with inertia (1, 1) from A = sigma_3.
        let a = herm(pauli(3));
        let b = diag(&[1.0, -1.0, 0.0, 0.0]);
        let v = rank_one_map(&a, &b, SPLIT_TOL).unwrap();
        assert_eq!(v.dim(), (2, 4));
        let image = conjugate(&v, &a);
        assert!(hs_norm(&(image.as_matrix() - b.as_matrix())) < 1e-10);

        assert!(matches!(
            rank_one_map(&diag(&[1.0, 0.0]), &herm(pauli(3)), SPLIT_TOL),
            Err(Error::RankCondition {
                sign: "negative",
                ..
            })
        ));
    }

    #[test]
    fn congruence_never_raises_inertia() {
        let mut rng = StdRng::seed_from_u64(127);
        for _ in 0..50 {
            let n = rng.gen_range(2..=4);
            let k = rng.gen_range(1..=4);
            let a = random_hermitian(n, &mut rng);
            let v = CMatrix::from_shape_fn((n, k), |_| {
                C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            });
            let b = conjugate(&v, &a);
            let tol_b = 1e-9 * (1.0 + b.norm());
            let ia = inertia(&a, SPLIT_TOL).unwrap();
            let ib = inertia(&b, tol_b).unwrap();
            assert!(ib.kappa_plus <= ia.kappa_plus);
            assert!(ib.kappa_minus <= ia.kappa_minus);
        }
    }

    #[test]
    fn minimal_rank_examples() {
        let a = herm(pauli(3));
        let b = diag(&[1.0, 1.0, -1.0, -1.0]);
        assert_eq!(minimal_rank(&a, &b, SPLIT_TOL).unwrap(), 2);

        assert!(matches!(
            minimal_rank(&diag(&[1.0, 0.0]), &herm(pauli(3)), SPLIT_TOL),
            Err(Error::SinglePairInfeasible { .. })
        ));

        let mut rng = StdRng::seed_from_u64(131);
        let a = random_hermitian(3, &mut rng);
        assert_eq!(minimal_rank(&a, &a, SPLIT_TOL).unwrap(), 1);

        let zero2 = HermitianMatrix::zero(2);
        let zero3 = HermitianMatrix::zero(3);
        assert_eq!(minimal_rank(&zero2, &zero3, SPLIT_TOL).unwrap(), 0);
        assert!(matches!(
            minimal_rank(&zero2, &diag(&[1.0, 0.0, 0.0]), SPLIT_TOL),
            Err(Error::SinglePairInfeasible { .. })
        ));
        assert_eq!(minimal_rank(&a, &zero3, SPLIT_TOL).unwrap(), 0);
    }

    #[test]
    fn minimal_rank_matches_brute_force_on_random_pairs() {
        let mut rng = StdRng::seed_from_u64(137);
        for _ in 0..100 {
            let n = rng.gen_range(2..=4);
            let ap = rng.gen_range(0..=n);
            let am = rng.gen_range(0..=(n - ap));
            let a = with_signature(n, ap, am, &mut rng);
            let k = rng.gen_range(2..=5);
            let bp = rng.gen_range(0..=k);
            let bm = rng.gen_range(0..=(k - bp));
            let b = with_signature(k, bp, bm, &mut rng);
            let brute = (0..=6usize).find(|&m| bp <= m * ap && bm <= m * am);
            match minimal_rank(&a, &b, SPLIT_TOL) {
                Ok(r) => assert_eq!(Some(r), brute, "inertias ({ap},{am}) -> ({bp},{bm})"),
                Err(Error::SinglePairInfeasible { .. }) => {
                    assert_eq!(brute, None, "inertias ({ap},{am}) -> ({bp},{bm})")
                }
                Err(e) => panic!("unexpected error {e}"),
            }
        }
    }

    #[test]
    fn solve_single_examples() {
        let a = herm(pauli(3));
        let b = diag(&[1.0, 1.0, -1.0, -1.0]);
        let set = solve_single(&a, &b, SPLIT_TOL).unwrap();
        assert_eq!(set.len(), 2);
        let image = apply_kraus(&set, a.as_matrix()).unwrap();
        assert!(hs_norm(&(&image - b.as_matrix())) < 1e-9);

        // A = B: one element, unitary on the support of A.
        let mut rng = StdRng::seed_from_u64(139);
        let a = with_signature(3, 1, 1, &mut rng);
        let set = solve_single(&a, &a, SPLIT_TOL).unwrap();
        assert_eq!(set.len(), 1);
        let v = &set.ops()[0];
        let support = eigh(&a)
            .unwrap()
            .rebuild(|lam| if lam.abs() > SPLIT_TOL { 1.0 } else { 0.0 });
        let vv = adjoint(v).dot(v);
        assert!(hs_norm(&(&vv - support.as_matrix())) < 1e-10);

        let zero = HermitianMatrix::zero(2);
        let set = solve_single(&a, &HermitianMatrix::zero(2), SPLIT_TOL).unwrap();
        assert!(set.is_empty());
        assert!(hs_norm(&(&apply_kraus(&set, a.as_matrix()).unwrap() - zero.as_matrix())) < 1e-15);
    }

    #[test]
    fn solve_single_random_suite_attains_minimal_rank() {
        let mut rng = StdRng::seed_from_u64(149);
        for _ in 0..100 {
            let n = rng.gen_range(2..=4);
            let ap = rng.gen_range(0..=n);
            let am = rng.gen_range(0..=(n - ap));
            if ap + am == 0 {
                continue;
            }
            let a = with_signature(n, ap, am, &mut rng);
            let bp = rng.gen_range(0..=(3 * ap).min(3));
            let bm = rng.gen_range(0..=(3 * am).min(3));
            let k = (bp + bm).max(1) + rng.gen_range(0..=1);
            let b = with_signature(k, bp, bm, &mut rng);
            let r = minimal_rank(&a, &b, SPLIT_TOL).unwrap();
            let set = solve_single(&a, &b, SPLIT_TOL).unwrap();
            assert_eq!(set.len(), r);
            let image = apply_kraus(&set, a.as_matrix()).unwrap();
            let err = hs_norm(&(&image - b.as_matrix()));
            assert!(err <= 1e-8 * (1.0 + b.norm()), "residual {err}");
            if r > 0 {
                let choi = choi_of_kraus(&set);
                let h = HermitianMatrix::new(choi.as_matrix().clone()).unwrap();
                let eig = eigh(&h).unwrap();
                let max = eig.eigenvalues.last().copied().unwrap_or(0.0);
                let rank = eig
                    .eigenvalues
                    .iter()
                    .filter(|&&lam| lam > 1e-9 * (1.0 + max))
                    .count();
                assert!(rank <= r, "Choi rank {rank} exceeds element count {r}");
            }
        }
    }

    #[test]
    fn solve_single_agrees_with_the_general_pipeline() {
        let a = herm(pauli(3));
        let b = diag(&[2.0, -0.5]);
        let set = solve_single(&a, &b, SPLIT_TOL).unwrap();
        let direct = apply_kraus(&set, a.as_matrix()).unwrap();
        assert!(hs_norm(&(&direct - b.as_matrix())) < 1e-9);

        let problem = Problem::new(
            2,
            2,
            vec![a.as_matrix().clone()],
            vec![b.as_matrix().clone()],
            false,
            false,
        )
        .unwrap();
        let outcome = solve(&problem, &SolveOptions::default()).unwrap();
        let SolveOutcome::Solved(sol) = outcome else {
            panic!("pipeline must solve a feasible single pair");
        };
        assert!(sol.residuals.iter().all(|&res| res <= 1e-7));
    }
}
