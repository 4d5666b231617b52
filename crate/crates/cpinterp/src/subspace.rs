//! Geometry of the input span and its Hilbert-Schmidt complement, plus the
//! matrix-unit relation theory used to study positivity of functionals on
//! operator systems.
//!
//! The span `S_A` of the Hermitian inputs is a *-subspace of `M_n`; its
//! orthogonal complement (inside the Hermitian matrices) parametrizes the
//! admissible perturbations of the density matrix. Relations on a finite
//! ground set describe spans of matrix units: reflexive symmetric relations
//! give operator systems, equivalence relations give algebras, and on a
//! non-transitive operator system there is an explicit indefinite matrix
//! acting as a positive functional.

use std::collections::HashSet;

use crate::hermlinalg::{
    gram_schmidt_herm, herm_unit_basis, hs_inner, hs_norm, identity, kron, CMatrix,
    HermitianMatrix, C64,
};
use crate::interpolation::{feasibility, DensityData, FeasibilityStatus, SolveOptions};
use crate::Error;

/// Strict-positivity shift used by the positive-definite-element search.
const PD_SHIFT: f64 = 1e-6;

/// Orthonormal Hermitian basis of the input span and of its complement.
#[derive(Debug, Clone)]
pub struct SpanBasis {
    /// Ambient dimension: all elements live in `M_n`.
    pub n: usize,
    /// Orthonormal Hermitian matrices spanning `S_A`.
    pub span: Vec<HermitianMatrix>,
    /// Orthonormal Hermitian matrices spanning `S_A^perp`; together with
    /// `span` they form an orthonormal basis of the Hermitian matrices, so
    /// `span.len() + complement.len() == n * n`.
    pub complement: Vec<HermitianMatrix>,
    /// Real coefficients expressing each original input in the span basis:
    /// `A_nu = sum_j coeffs[nu][j] * span[j]`.
    pub coeffs: Vec<Vec<f64>>,
}

/// Orthonormalizes the inputs into a span basis and completes it to a basis
/// of the Hermitian matrices by orthonormalizing the Hermitian matrix-unit
/// family against the span, keeping residuals above `tol`. The second
/// component lists the indices of inputs that were linearly dependent on
/// earlier ones.
pub fn build_span(a: &[HermitianMatrix], tol: f64) -> (SpanBasis, Vec<usize>) {
    assert!(!a.is_empty(), "build_span needs at least one input");
    let n = a[0].dim();
    let gs = gram_schmidt_herm(a, tol);
    let span = gs.ortho;

    let mut complement = Vec::new();
    for candidate in herm_unit_basis(n) {
        let mut u = candidate.as_matrix().clone();
        for _pass in 0..2 {
            for g in span.iter().chain(complement.iter()) {
                let c = hs_inner(&u, g.as_matrix());
                for (uv, gv) in u.iter_mut().zip(g.as_matrix().iter()) {
                    *uv -= c * gv;
                }
            }
        }
        let r = hs_norm(&u);
        if r > tol {
            complement.push(HermitianMatrix::symmetrized(u.mapv(|z| z / r)));
        }
    }
    debug_assert_eq!(span.len() + complement.len(), n * n);

    (
        SpanBasis {
            n,
            span,
            complement,
            coeffs: gs.coeffs,
        },
        gs.dependent,
    )
}

/// Orthonormal Hermitian basis of `M_k (x) S_A^perp`: the matrices
/// `H_a (x) F_mu` where `H_a` runs over the Hermitian unit basis of `M_k`
/// and `F_mu` over the complement. Sized `k^2 * complement.len()`.
pub fn tensor_complement(k: usize, basis: &SpanBasis) -> Vec<HermitianMatrix> {
    let mut out = Vec::with_capacity(k * k * basis.complement.len());
    for h in herm_unit_basis(k) {
        for f in &basis.complement {
            out.push(HermitianMatrix::symmetrized(kron(
                h.as_matrix(),
                f.as_matrix(),
            )));
        }
    }
    out
}

/// Whether the identity matrix lies in the span:
/// `‖I - proj_span(I)‖ <= tol`.
pub fn contains_identity(basis: &SpanBasis, tol: f64) -> bool {
    let mut residual = identity(basis.n);
    for g in &basis.span {
        let c = hs_inner(&residual, g.as_matrix());
        for (rv, gv) in residual.iter_mut().zip(g.as_matrix().iter()) {
            *rv -= c * gv;
        }
    }
    hs_norm(&residual) <= tol
}

/// Searches the span for a positive definite element by running the
/// feasibility solver on the shifted problem `X - delta*I PSD, X in span`.
/// Returns a unit-norm witness, or `None` when none was found within the
/// iteration budget; absence of a witness is not a proof that none exists.
pub fn positive_definite_element(
    basis: &SpanBasis,
    opts: &SolveOptions,
) -> Result<Option<HermitianMatrix>, Error> {
    let n = basis.n;
    let shifted = HermitianMatrix::symmetrized(identity(n).mapv(|z| z * (-PD_SHIFT)));
    let data = DensityData {
        d: shifted,
        span_basis: basis.clone(),
        tensor_complement: basis.span.clone(),
    };
    let search_opts = SolveOptions {
        tol: opts.tol.min(PD_SHIFT / 100.0),
        ..opts.clone()
    };
    let result = feasibility(&data, None, &search_opts)?;
    if result.status != FeasibilityStatus::Feasible {
        return Ok(None);
    }
    let x = result.x.expect("feasible result carries a point");
    let mut witness = x.as_matrix().clone();
    for i in 0..n {
        witness[[i, i]] += C64::new(PD_SHIFT, 0.0);
    }
    let witness = HermitianMatrix::symmetrized(witness);
    let norm = witness.norm();
    if norm == 0.0 {
        return Ok(None);
    }
    Ok(Some(witness.scale(1.0 / norm)))
}

/// A relation on the ground set `{0, .., m-1}`, describing the span of the
/// matrix units `E_ij` with `(i, j)` in the relation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnitRelation {
    m: usize,
    pairs: Vec<(usize, usize)>,
}

impl UnitRelation {
    /// Canonicalizes (sorts and deduplicates) the pair list; indices must
    /// be below `m`.
    pub fn new(m: usize, mut pairs: Vec<(usize, usize)>) -> Result<Self, Error> {
        if m == 0 {
            return Err(Error::ParameterRange {
                detail: "relation ground set must be nonempty".into(),
            });
        }
        for &(i, j) in &pairs {
            if i >= m || j >= m {
                return Err(Error::ParameterRange {
                    detail: format!("pair ({i}, {j}) is outside the ground set of size {m}"),
                });
            }
        }
        pairs.sort_unstable();
        pairs.dedup();
        Ok(Self { m, pairs })
    }

    pub fn ground_size(&self) -> usize {
        self.m
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.pairs.binary_search(&(i, j)).is_ok()
    }

    pub fn is_reflexive(&self) -> bool {
        (0..self.m).all(|i| self.contains(i, i))
    }

    pub fn is_symmetric(&self) -> bool {
        self.pairs.iter().all(|&(i, j)| self.contains(j, i))
    }

    pub fn is_transitive(&self) -> bool {
        let set: HashSet<(usize, usize)> = self.pairs.iter().copied().collect();
        for &(i, j) in &self.pairs {
            for &(j2, l) in &self.pairs {
                if j == j2 && !set.contains(&(i, l)) {
                    return false;
                }
            }
        }
        true
    }

    /// Connected components of the relation, each sorted; for an
    /// equivalence relation these are the equivalence classes and the span
    /// of the matrix units is the direct sum of full matrix algebras on
    /// them.
    pub fn classes(&self) -> Vec<Vec<usize>> {
        let mut root: Vec<usize> = (0..self.m).collect();
        fn find(root: &mut Vec<usize>, mut i: usize) -> usize {
            while root[i] != i {
                root[i] = root[root[i]];
                i = root[i];
            }
            i
        }
        for &(i, j) in &self.pairs {
            let (ri, rj) = (find(&mut root, i), find(&mut root, j));
            if ri != rj {
                root[ri.max(rj)] = ri.min(rj);
            }
        }
        let mut classes: Vec<Vec<usize>> = vec![Vec::new(); self.m];
        for i in 0..self.m {
            let r = find(&mut root, i);
            classes[r].push(i);
        }
        classes.retain(|c| !c.is_empty());
        classes
    }
}

/// Structural class of the span of matrix units described by a relation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelationClass {
    /// Not reflexive or not symmetric: the span is not closed under the
    /// adjoint together with containing the diagonal.
    NotStarClosed,
    /// Reflexive and symmetric but not transitive.
    OperatorSystem,
    /// Reflexive, symmetric, and transitive: an equivalence relation, and
    /// the span is a direct sum of full matrix algebras.
    Algebra,
}

pub fn classify_relation(relation: &UnitRelation) -> RelationClass {
    if !relation.is_reflexive() || !relation.is_symmetric() {
        RelationClass::NotStarClosed
    } else if relation.is_transitive() {
        RelationClass::Algebra
    } else {
        RelationClass::OperatorSystem
    }
}

/// Orthonormal Hermitian basis of the span of the matrix units of a
/// reflexive symmetric relation: `E_ii` for the diagonal and
/// `(E_ij + E_ji)/sqrt(2)`, `i(E_ij - E_ji)/sqrt(2)` for each pair `i < j`
/// in the relation.
pub fn relation_herm_basis(relation: &UnitRelation) -> Vec<HermitianMatrix> {
    let m = relation.ground_size();
    let inv_sqrt2 = 1.0 / 2.0_f64.sqrt();
    let mut out = Vec::new();
    for i in 0..m {
        if relation.contains(i, i) {
            let mut e = CMatrix::zeros((m, m));
            e[[i, i]] = C64::new(1.0, 0.0);
            out.push(HermitianMatrix::symmetrized(e));
        }
    }
    for i in 0..m {
        for j in (i + 1)..m {
            if relation.contains(i, j) {
                let mut sym = CMatrix::zeros((m, m));
                sym[[i, j]] = C64::new(inv_sqrt2, 0.0);
                sym[[j, i]] = C64::new(inv_sqrt2, 0.0);
                out.push(HermitianMatrix::symmetrized(sym));
                let mut skew = CMatrix::zeros((m, m));
                skew[[i, j]] = C64::new(0.0, inv_sqrt2);
                skew[[j, i]] = C64::new(0.0, -inv_sqrt2);
                out.push(HermitianMatrix::symmetrized(skew));
            }
        }
    }
    out
}

/// On a non-transitive reflexive symmetric relation, produces an
/// indefinite matrix in the span of the relation's matrix units that is
/// nevertheless a positive functional on the span: a triple of distinct
/// indices `(i, j, l)` with `(i, j)` and `(j, l)` related but `(i, l)` not
/// is found by lexicographic search, and the hub matrix with ones on the
/// three diagonal entries and `rho` at the `(i, j)` and `(j, l)` positions
/// is embedded there. Indefinite exactly when `rho > 1/sqrt(2)`; positive
/// as a functional for `rho <= 1`.
pub fn counterexample_functional(
    relation: &UnitRelation,
    rho: f64,
) -> Result<HermitianMatrix, Error> {
    match classify_relation(relation) {
        RelationClass::OperatorSystem => {}
        RelationClass::Algebra => {
            return Err(Error::RelationUnsuitable {
                detail: "the relation is transitive, so its span is an algebra and every \
                         positive functional on it has a PSD density matrix"
                    .into(),
            })
        }
        RelationClass::NotStarClosed => {
            return Err(Error::RelationUnsuitable {
                detail: "the relation is not reflexive and symmetric, so its span is not \
                         an operator system"
                    .into(),
            })
        }
    }
    let lo = 1.0 / 2.0_f64.sqrt();
    if !(rho > lo && rho <= 1.0) {
        return Err(Error::ParameterRange {
            detail: format!(
                "rho must satisfy 1/sqrt(2) < rho <= 1 for an indefinite positive \
                 functional; got {rho}"
            ),
        });
    }
    let m = relation.ground_size();
    let mut triple = None;
    'search: for i in 0..m {
        for j in 0..m {
            if j == i || !relation.contains(i, j) {
                continue;
            }
            for l in 0..m {
                if l == i || l == j {
                    continue;
                }
                if relation.contains(j, l) && !relation.contains(i, l) {
                    triple = Some((i, j, l));
                    break 'search;
                }
            }
        }
    }
    let Some((i, j, l)) = triple else {
        return Err(Error::RelationUnsuitable {
            detail: "no witness triple found although the relation is not transitive".into(),
        });
    };
    let mut d = CMatrix::zeros((m, m));
    let one = C64::new(1.0, 0.0);
    let r = C64::new(rho, 0.0);
    d[[i, i]] = one;
    d[[j, j]] = one;
    d[[l, l]] = one;
    d[[i, j]] = r;
    d[[j, i]] = r;
    d[[j, l]] = r;
    d[[l, j]] = r;
    Ok(HermitianMatrix::symmetrized(d))
}
