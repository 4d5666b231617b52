//! The interpolation pipeline.
//!
//! A problem asks for a completely positive map `phi: M_n -> M_k` with
//! `phi(A_nu) = B_nu`. After canonicalization (Hermitian splitting,
//! dependence reduction, orthonormalization of the inputs with the targets
//! transformed by the same coefficients) the data is encoded in the density
//! matrix `D = sum B_nu^T (x) A_nu`, and a solution exists exactly when the
//! affine set `D + M_k (x) S_A^perp` meets the positive semidefinite cone.
//! Feasibility runs Dykstra alternating projections between the cone and
//! the affine set, with an optional rank-forcing polish for solutions that
//! touch the cone boundary tangentially; a feasible point is converted back
//! to a Choi matrix and a Kraus set.

use crate::choi_kraus::{
    density_to_choi, kraus_from_choi, trace_preservation_defect, ChoiMatrix, KrausSet,
};
use crate::hermlinalg::{
    adjoint, axpy, default_rank_tol, eigh, herm_unit_basis, hs_inner, hs_norm, identity, kron,
    CMatrix, HermitianMatrix, C64,
};
use crate::subspace::{build_span, contains_identity, tensor_complement, SpanBasis};
use crate::Error;

/// Default solver tolerance.
pub const DEFAULT_TOL: f64 = 1e-8;
/// Default Dykstra iteration budget.
pub const DEFAULT_MAX_ITER: usize = 20_000;
/// Stall detection: gap change below this, per iteration...
const STALL_EPS: f64 = 1e-12;
/// ...for this many consecutive iterations, declares a stall.
const STALL_WINDOW: usize = 200;
/// The rank-forcing polish runs every this many iterations.
const POLISH_PERIOD: usize = 400;
/// Residual threshold used when orthonormalizing the complement basis.
const COMPLEMENT_TOL: f64 = 1e-7;
/// Polish is skipped above this many perturbation coordinates.
const POLISH_COORD_CAP: usize = 2048;

/// Solver options shared by the feasibility search and the CLI.
#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Feasibility tolerance for memberships and eigenvalue bounds.
    pub tol: f64,
    /// Dykstra iteration budget.
    pub max_iter: usize,
    /// Recorded for reproducibility bookkeeping; the pipeline itself is
    /// deterministic and draws no random numbers.
    pub seed: u64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
            seed: 0,
        }
    }
}

/// Interpolation instance as supplied by the caller.
#[derive(Debug, Clone)]
pub struct Problem {
    pub n: usize,
    pub k: usize,
    pub a: Vec<CMatrix>,
    pub b: Vec<CMatrix>,
    pub trace_preserving: bool,
    pub unital: bool,
}

impl Problem {
    /// Validates shapes: `|A| = |B| >= 1`, every `A_nu` is `n x n` and
    /// every `B_nu` is `k x k`.
    pub fn new(
        n: usize,
        k: usize,
        a: Vec<CMatrix>,
        b: Vec<CMatrix>,
        trace_preserving: bool,
        unital: bool,
    ) -> Result<Self, Error> {
        if n == 0 || k == 0 {
            return Err(Error::ShapeMismatch {
                context: "dimensions n and k must be at least 1".into(),
            });
        }
        if a.is_empty() || a.len() != b.len() {
            return Err(Error::ShapeMismatch {
                context: format!(
                    "need equally many inputs and targets, at least one pair; got {} and {}",
                    a.len(),
                    b.len()
                ),
            });
        }
        for (nu, m) in a.iter().enumerate() {
            if m.dim() != (n, n) {
                return Err(Error::ShapeMismatch {
                    context: format!("input {nu} must be {n}x{n}, got {:?}", m.dim()),
                });
            }
        }
        for (nu, m) in b.iter().enumerate() {
            if m.dim() != (k, k) {
                return Err(Error::ShapeMismatch {
                    context: format!("target {nu} must be {k}x{k}, got {:?}", m.dim()),
                });
            }
        }
        Ok(Self {
            n,
            k,
            a,
            b,
            trace_preserving,
            unital,
        })
    }
}

/// What canonicalization did to the raw pairs.
#[derive(Debug, Clone, Default)]
pub struct CanonicalReport {
    /// Raw pair indices that were split into Hermitian and skew parts.
    pub split_pairs: Vec<usize>,
    /// Indices into the expanded pair list that were dropped as dependent
    /// (after their targets were checked for the same dependence).
    pub dropped_dependent: Vec<usize>,
    /// The unital flag appended the pair `(I_n, I_k)`.
    pub unital_appended: bool,
}

/// Canonicalized instance: Hermitian pairs with orthonormal inputs.
#[derive(Debug, Clone)]
pub struct CanonicalProblem {
    pub n: usize,
    pub k: usize,
    /// Orthonormal Hermitian inputs.
    pub a: Vec<HermitianMatrix>,
    /// Targets transformed by the same Gram-Schmidt coefficients.
    pub b: Vec<HermitianMatrix>,
    pub trace_preserving: bool,
    /// Hermitian pairs before orthonormalization (after splitting and
    /// unital augmentation); prechecks run on these as well.
    pub expanded: Vec<(HermitianMatrix, HermitianMatrix)>,
    /// The raw pairs (plus `(I_n, I_k)` when unital), kept so solution
    /// residuals are measured against what the caller actually asked for.
    pub original: Vec<(CMatrix, CMatrix)>,
    pub report: CanonicalReport,
}

/// Splits every non-Hermitian pair into Hermitian and skew parts, appends
/// `(I_n, I_k)` under the unital flag, drops dependent inputs after
/// verifying the same linear dependence holds for the targets, and
/// orthonormalizes the inputs with the targets transformed by the
/// identical coefficients.
pub fn canonicalize(problem: &Problem, tol: f64) -> Result<CanonicalProblem, Error> {
    let (n, k) = (problem.n, problem.k);
    let mut report = CanonicalReport::default();
    let mut expanded: Vec<(HermitianMatrix, HermitianMatrix)> = Vec::new();
    let mut original: Vec<(CMatrix, CMatrix)> = Vec::new();

    for (nu, (a, b)) in problem.a.iter().zip(problem.b.iter()).enumerate() {
        original.push((a.clone(), b.clone()));
        match (HermitianMatrix::new(a.clone()), HermitianMatrix::new(b.clone())) {
            (Ok(ha), Ok(hb)) => expanded.push((ha, hb)),
            _ => {
                report.split_pairs.push(nu);
                expanded.push((hermitian_part(a), hermitian_part(b)));
                expanded.push((skew_part(a), skew_part(b)));
            }
        }
    }
    if problem.unital {
        report.unital_appended = true;
        expanded.push((HermitianMatrix::identity(n), HermitianMatrix::identity(k)));
        original.push((identity(n), identity(k)));
    }

    // Gram-Schmidt on the inputs, applying each elementary operation to the
    // targets as well, so that a linear map interpolates the canonical pairs
    // exactly when it interpolates the expanded ones.
    let mut ga: Vec<HermitianMatrix> = Vec::new();
    let mut gb: Vec<HermitianMatrix> = Vec::new();
    for (idx, (a, b)) in expanded.iter().enumerate() {
        let mut u = a.as_matrix().clone();
        let mut w = b.as_matrix().clone();
        let mut weight = 0.0;
        for _pass in 0..2 {
            for (aj, bj) in ga.iter().zip(gb.iter()) {
                let c = hs_inner(&u, aj.as_matrix()).re;
                axpy(&mut u, C64::new(-c, 0.0), aj.as_matrix());
                axpy(&mut w, C64::new(-c, 0.0), bj.as_matrix());
                weight += c.abs() * bj.norm();
            }
        }
        let r = hs_norm(&u);
        if r <= tol * (1.0 + hs_norm(a.as_matrix())) {
            let slack = hs_norm(&w);
            let bound = tol * (1.0 + hs_norm(b.as_matrix()) + weight);
            if slack > bound {
                return Err(Error::InconsistentData {
                    detail: format!(
                        "input {idx} is a linear combination of earlier inputs but its \
                         target deviates from the same combination by {slack:.3e} \
                         (bound {bound:.3e}); no linear map interpolates the data"
                    ),
                });
            }
            report.dropped_dependent.push(idx);
        } else {
            ga.push(HermitianMatrix::symmetrized(u.mapv(|z| z / r)));
            gb.push(HermitianMatrix::symmetrized(w.mapv(|z| z / r)));
        }
    }

    Ok(CanonicalProblem {
        n,
        k,
        a: ga,
        b: gb,
        trace_preserving: problem.trace_preserving,
        expanded,
        original,
        report,
    })
}

fn hermitian_part(m: &CMatrix) -> HermitianMatrix {
    let adj = adjoint(m);
    HermitianMatrix::symmetrized((m + &adj).mapv(|z| z * 0.5))
}

fn skew_part(m: &CMatrix) -> HermitianMatrix {
    let adj = adjoint(m);
    let half_over_i = C64::new(0.0, -0.5);
    HermitianMatrix::symmetrized((m - &adj).mapv(|z| z * half_over_i))
}

/// Density matrix of the data functional together with the span geometry.
#[derive(Debug, Clone)]
pub struct DensityData {
    /// `D = sum B_nu^T (x) A_nu`, a Hermitian `kn x kn` matrix.
    pub d: HermitianMatrix,
    /// Span basis of the inputs inside `M_n`, with complement.
    pub span_basis: SpanBasis,
    /// Orthonormal Hermitian basis of the admissible perturbation
    /// directions `M_k (x) S_A^perp`.
    pub tensor_complement: Vec<HermitianMatrix>,
}

/// Builds the density matrix for a canonical problem via the tensor
/// formula `D = sum B_nu^T (x) A_nu`.
pub fn density_matrix(problem: &CanonicalProblem) -> DensityData {
    let (n, k) = (problem.n, problem.k);
    let mut d = CMatrix::zeros((n * k, n * k));
    for (a, b) in problem.a.iter().zip(problem.b.iter()) {
        let bt = transpose(b.as_matrix());
        d = d + kron(&bt, a.as_matrix());
    }
    let (span_basis, _) = build_span(&problem.a, COMPLEMENT_TOL);
    let tensor = tensor_complement(k, &span_basis);
    DensityData {
        d: HermitianMatrix::symmetrized(d),
        span_basis,
        tensor_complement: tensor,
    }
}

/// Density matrix for a general independent Hermitian family, solving the
/// Gram system `sum_mu d_{i,j,mu} tr(A_mu A_nu) = conj((B_nu)_{ij})` and
/// assembling `D = sum d_{i,j,mu} E_ij (x) A_mu`. Agrees with
/// [`density_matrix`] when the inputs are orthonormal.
pub fn density_matrix_from_pairs(
    a: &[HermitianMatrix],
    b: &[HermitianMatrix],
) -> Result<HermitianMatrix, Error> {
    if a.is_empty() || a.len() != b.len() {
        return Err(Error::ShapeMismatch {
            context: "need equally many inputs and targets, at least one pair".into(),
        });
    }
    let n = a[0].dim();
    let k = b[0].dim();
    let nn = a.len();
    let mut gram = vec![vec![0.0; nn]; nn];
    for (mu, am) in a.iter().enumerate() {
        for (nu, an) in a.iter().enumerate() {
            gram[mu][nu] = hs_inner(am.as_matrix(), an.as_matrix()).re;
        }
    }
    let mut d = CMatrix::zeros((n * k, n * k));
    for i in 0..k {
        for j in 0..k {
            let rhs: Vec<C64> = b.iter().map(|bm| bm.as_matrix()[[i, j]].conj()).collect();
            let re = solve_real_system(&gram, &rhs.iter().map(|z| z.re).collect::<Vec<_>>())
                .ok_or_else(|| Error::InconsistentData {
                    detail: "Gram matrix of the inputs is numerically singular; \
                             remove dependent inputs first"
                        .into(),
                })?;
            let im = solve_real_system(&gram, &rhs.iter().map(|z| z.im).collect::<Vec<_>>())
                .ok_or_else(|| Error::InconsistentData {
                    detail: "Gram matrix of the inputs is numerically singular; \
                             remove dependent inputs first"
                        .into(),
                })?;
            for (mu, am) in a.iter().enumerate() {
                let coeff = C64::new(re[mu], im[mu]);
                for l in 0..n {
                    for m in 0..n {
                        d[[i * n + l, j * n + m]] += coeff * am.as_matrix()[[l, m]];
                    }
                }
            }
        }
    }
    Ok(HermitianMatrix::symmetrized(d))
}

fn transpose(m: &CMatrix) -> CMatrix {
    let (r, c) = m.dim();
    CMatrix::from_shape_fn((c, r), |(i, j)| m[[j, i]])
}

/// Gaussian elimination with partial pivoting; `None` when the matrix is
/// numerically singular.
fn solve_real_system(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let m = b.len();
    let mut aug: Vec<Vec<f64>> = a
        .iter()
        .zip(b.iter())
        .map(|(row, &rhs)| {
            let mut r = row.clone();
            r.push(rhs);
            r
        })
        .collect();
    let scale: f64 = aug
        .iter()
        .flat_map(|r| r.iter().take(m))
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    for col in 0..m {
        let (pivot_row, pivot_val) = (col..m)
            .map(|r| (r, aug[r][col].abs()))
            .max_by(|x, y| x.1.partial_cmp(&y.1).unwrap())?;
        if pivot_val <= 1e-13 * scale {
            return None;
        }
        aug.swap(col, pivot_row);
        for r in (col + 1)..m {
            let factor = aug[r][col] / aug[col][col];
            if factor == 0.0 {
                continue;
            }
            for cc in col..=m {
                let sub = factor * aug[col][cc];
                aug[r][cc] -= sub;
            }
        }
    }
    let mut x = vec![0.0; m];
    for row in (0..m).rev() {
        let mut acc = aug[row][m];
        for cc in (row + 1)..m {
            acc -= aug[row][cc] * x[cc];
        }
        x[row] = acc / aug[row][row];
    }
    Some(x)
}

/// A violated necessary condition, reported before the solver runs.
#[derive(Debug, Clone)]
pub enum PrecheckViolation {
    /// A semidefinite input must map to a semidefinite target of the same
    /// type; `pair` indexes the Hermitian pair list that failed.
    TypeMismatch {
        pair: usize,
        canonical: bool,
        a_psd: bool,
        b_lambda: f64,
    },
    /// With the identity in the input span, the trace of the density
    /// matrix must be nonnegative.
    TraceNegative { trace: f64 },
    /// A trace-preserving map forces `tr(B_nu) = tr(A_nu)`.
    TraceMismatch {
        pair: usize,
        trace_a: f64,
        trace_b: f64,
    },
}

impl std::fmt::Display for PrecheckViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PrecheckViolation::TypeMismatch {
                pair,
                canonical,
                a_psd,
                b_lambda,
            } => {
                let stage = if *canonical { "canonical" } else { "given" };
                let kind = if *a_psd {
                    "positive semidefinite"
                } else {
                    "negative semidefinite"
                };
                write!(
                    f,
                    "{stage} pair {pair}: input is {kind} but the target has an \
                     eigenvalue of the opposite sign ({b_lambda:.6e})"
                )
            }
            PrecheckViolation::TraceNegative { trace } => write!(
                f,
                "identity lies in the input span but the density matrix has \
                 negative trace {trace:.6e}"
            ),
            PrecheckViolation::TraceMismatch {
                pair,
                trace_a,
                trace_b,
            } => write!(
                f,
                "trace preservation forces tr(B) = tr(A), but pair {pair} has \
                 tr(A) = {trace_a:.6e} and tr(B) = {trace_b:.6e}"
            ),
        }
    }
}

/// Necessary conditions checked before the solver runs. An empty list does
/// not imply feasibility.
pub fn prechecks(problem: &CanonicalProblem, density: &DensityData) -> Vec<PrecheckViolation> {
    let mut out = Vec::new();
    let pairs = problem
        .expanded
        .iter()
        .map(|(a, b)| (a, b, false))
        .chain(problem.a.iter().zip(problem.b.iter()).map(|(a, b)| (a, b, true)));
    for (idx, (a, b, canonical)) in pairs.enumerate() {
        let (Ok(ea), Ok(eb)) = (eigh(a), eigh(b)) else {
            continue;
        };
        let tol_a = rank_tol_of(&ea.eigenvalues, problem.n);
        let tol_b = rank_tol_of(&eb.eigenvalues, problem.k);
        let a_lo = *ea.eigenvalues.first().unwrap_or(&0.0);
        let a_hi = *ea.eigenvalues.last().unwrap_or(&0.0);
        let b_lo = *eb.eigenvalues.first().unwrap_or(&0.0);
        let b_hi = *eb.eigenvalues.last().unwrap_or(&0.0);
        if a_lo >= -tol_a && b_lo < -tol_b {
            out.push(PrecheckViolation::TypeMismatch {
                pair: idx,
                canonical,
                a_psd: true,
                b_lambda: b_lo,
            });
        }
        if a_hi <= tol_a && b_hi > tol_b {
            out.push(PrecheckViolation::TypeMismatch {
                pair: idx,
                canonical,
                a_psd: false,
                b_lambda: b_hi,
            });
        }
    }
    if contains_identity(&density.span_basis, 1e-9) {
        let trace = density.d.trace();
        if trace < -1e-9 * (1.0 + density.d.norm()) {
            out.push(PrecheckViolation::TraceNegative { trace });
        }
    }
    if problem.trace_preserving {
        for (nu, (a, b)) in problem.a.iter().zip(problem.b.iter()).enumerate() {
            let (ta, tb) = (a.trace(), b.trace());
            if (ta - tb).abs() > 1e-8 * (1.0 + ta.abs() + tb.abs()) {
                out.push(PrecheckViolation::TraceMismatch {
                    pair: nu,
                    trace_a: ta,
                    trace_b: tb,
                });
            }
        }
    }
    out
}

fn rank_tol_of(eigenvalues: &[f64], dim: usize) -> f64 {
    let max_abs = eigenvalues
        .iter()
        .fold(0.0f64, |acc, &v| acc.max(v.abs()));
    default_rank_tol(dim, max_abs).max(1e-12)
}

/// One real affine constraint `tr(X * functional) = rhs` on the Hermitian
/// search variable.
#[derive(Debug, Clone)]
pub struct AffineConstraint {
    pub functional: HermitianMatrix,
    pub rhs: f64,
}

/// The trace-preservation constraints: the partial trace of `X` over the
/// `M_k` factor must equal `I_n`, expressed as the `n^2` real constraints
/// `tr(X (I_k (x) G_t)) = tr(G_t)` over the Hermitian unit basis `G_t` of
/// `M_n`.
pub fn trace_preserving_constraints(
    problem: &CanonicalProblem,
    _density: &DensityData,
) -> Vec<AffineConstraint> {
    let (n, k) = (problem.n, problem.k);
    let ik = identity(k);
    herm_unit_basis(n)
        .into_iter()
        .map(|g| {
            let rhs = g.trace();
            let functional = HermitianMatrix::symmetrized(kron(&ik, g.as_matrix()));
            AffineConstraint { functional, rhs }
        })
        .collect()
}

/// Partial trace of a `kn x kn` matrix in the density layout over the
/// `M_k` factor: the `n x n` matrix with entries
/// `sum_i X[i*n + l, i*n + m]`.
pub fn partial_trace_over_k(x: &CMatrix, n: usize, k: usize) -> CMatrix {
    let mut out = CMatrix::zeros((n, n));
    for i in 0..k {
        for l in 0..n {
            for m in 0..n {
                out[[l, m]] += x[[i * n + l, i * n + m]];
            }
        }
    }
    out
}

/// Outcome status of the feasibility search.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeasibilityStatus {
    /// A PSD point of the affine set was found within tolerance.
    Feasible,
    /// The inter-set gap stopped moving while still positive: evidence of
    /// infeasibility, not a certificate.
    GapStalled,
    /// The iteration budget ran out first.
    IterationLimit,
}

/// Result of the feasibility search.
#[derive(Debug, Clone)]
pub struct FeasibilityResult {
    pub status: FeasibilityStatus,
    /// The feasible point, present when `status` is `Feasible`; it lies in
    /// the affine set exactly and is PSD within tolerance.
    pub x: Option<HermitianMatrix>,
    /// Coordinates of `X - D` in the perturbation basis (when feasible).
    pub p: Vec<f64>,
    /// Smallest eigenvalue of the last affine iterate.
    pub lambda_min: f64,
    /// Last Hilbert-Schmidt distance between the cone-side and affine-side
    /// iterates.
    pub gap: f64,
    /// Dykstra iterations performed.
    pub iterations: usize,
    /// Gap after each iteration, for diagnostics.
    pub gap_history: Vec<f64>,
}

/// Orthogonal projection onto the affine search set
/// `{D + sum p_mu F_mu} ∩ {tr(X M_t) = r_t}`, with the equality part
/// handled by a precomputed least-squares map. When the constraints are
/// inconsistent with the affine set, the projection lands on the
/// least-squares surrogate and the true constraint residual stays positive,
/// which prevents a Feasible verdict.
struct AffineProjector<'a> {
    d: &'a HermitianMatrix,
    dirs: &'a [HermitianMatrix],
    cons: &'a [AffineConstraint],
    /// `l[t][mu] = <F_mu, M_t>`.
    l: Vec<Vec<f64>>,
    /// Pseudo-inverse of `L L^T`.
    pinv_llt: Vec<Vec<f64>>,
    /// `c[t] = r_t - <D, M_t>`.
    c: Vec<f64>,
}

impl<'a> AffineProjector<'a> {
    fn new(
        d: &'a HermitianMatrix,
        dirs: &'a [HermitianMatrix],
        cons: &'a [AffineConstraint],
    ) -> Result<Self, Error> {
        let t = cons.len();
        let m = dirs.len();
        let mut l = vec![vec![0.0; m]; t];
        let mut c = vec![0.0; t];
        for (ti, con) in cons.iter().enumerate() {
            for (mu, f) in dirs.iter().enumerate() {
                l[ti][mu] = hs_inner(f.as_matrix(), con.functional.as_matrix()).re;
            }
            c[ti] = con.rhs - hs_inner(d.as_matrix(), con.functional.as_matrix()).re;
        }
        let pinv_llt = if t == 0 {
            Vec::new()
        } else {
            let mut llt = CMatrix::zeros((t, t));
            for i in 0..t {
                for j in 0..t {
                    let dot: f64 = l[i].iter().zip(l[j].iter()).map(|(x, y)| x * y).sum();
                    llt[[i, j]] = C64::new(dot, 0.0);
                }
            }
            let eig = eigh(&HermitianMatrix::symmetrized(llt))?;
            let lam_max = eig.eigenvalues.last().copied().unwrap_or(0.0).max(0.0);
            let cut = default_rank_tol(t, lam_max).max(1e-14);
            let pinv = eig.rebuild(|lam| if lam <= cut { 0.0 } else { 1.0 / lam });
            (0..t)
                .map(|i| (0..t).map(|j| pinv.as_matrix()[[i, j]].re).collect())
                .collect()
        };
        Ok(Self {
            d,
            dirs,
            cons,
            l,
            pinv_llt,
            c,
        })
    }

    /// Coordinates of the projection of `y`, then the projected point.
    fn project(&self, y: &HermitianMatrix) -> (HermitianMatrix, Vec<f64>) {
        let diff = y.as_matrix() - self.d.as_matrix();
        let mut p: Vec<f64> = self
            .dirs
            .iter()
            .map(|f| hs_inner(&diff, f.as_matrix()).re)
            .collect();
        if !self.cons.is_empty() {
            let t = self.cons.len();
            let mut viol = vec![0.0; t];
            for ti in 0..t {
                let lp: f64 = self.l[ti].iter().zip(p.iter()).map(|(a, b)| a * b).sum();
                viol[ti] = lp - self.c[ti];
            }
            let mut w = vec![0.0; t];
            for ti in 0..t {
                w[ti] = self.pinv_llt[ti]
                    .iter()
                    .zip(viol.iter())
                    .map(|(a, b)| a * b)
                    .sum();
            }
            for (mu, pv) in p.iter_mut().enumerate() {
                let corr: f64 = (0..t).map(|ti| self.l[ti][mu] * w[ti]).sum();
                *pv -= corr;
            }
        }
        (self.assemble(&p), p)
    }

    fn assemble(&self, p: &[f64]) -> HermitianMatrix {
        let mut x = self.d.as_matrix().clone();
        for (f, &coeff) in self.dirs.iter().zip(p.iter()) {
            axpy(&mut x, C64::new(coeff, 0.0), f.as_matrix());
        }
        HermitianMatrix::symmetrized(x)
    }

    /// Largest absolute violation of the true constraints at `x`.
    fn constraint_residual(&self, x: &HermitianMatrix) -> f64 {
        self.cons
            .iter()
            .map(|con| (hs_inner(x.as_matrix(), con.functional.as_matrix()).re - con.rhs).abs())
            .fold(0.0, f64::max)
    }
}

/// Decides whether the affine set `D + span(tensor_complement)`, optionally
/// cut by extra affine constraints, meets the PSD cone.
///
/// Shortcut: when `D` itself is PSD within `opts.tol` and satisfies the
/// constraints, the answer is Feasible with `p = 0`. Otherwise Dykstra
/// alternating projections run between the cone and the affine set, with a
/// periodic rank-forcing polish that solves for an affine point
/// annihilating the near-kernel of the current iterate (this reaches
/// boundary solutions that plain alternating projections approach only
/// sublinearly). Gap stalls are reported as `GapStalled`, exhausted budgets
/// as `IterationLimit`.
pub fn feasibility(
    density: &DensityData,
    constraints: Option<&[AffineConstraint]>,
    opts: &SolveOptions,
) -> Result<FeasibilityResult, Error> {
    let d = &density.d;
    let dirs = &density.tensor_complement;
    let cons = constraints.unwrap_or(&[]);
    let projector = AffineProjector::new(d, dirs, cons)?;
    let tol = opts.tol;

    let eig_d = eigh(d)?;
    let lam_min_d = eig_d.eigenvalues.first().copied().unwrap_or(0.0);
    if lam_min_d >= -tol && projector.constraint_residual(d) <= tol {
        return Ok(FeasibilityResult {
            status: FeasibilityStatus::Feasible,
            x: Some(d.clone()),
            p: vec![0.0; dirs.len()],
            lambda_min: lam_min_d,
            gap: 0.0,
            iterations: 0,
            gap_history: Vec::new(),
        });
    }

    let mut x = d.clone();
    let mut increment = CMatrix::zeros(x.as_matrix().dim());
    let mut gap_history = Vec::new();
    let mut stall_count = 0usize;
    let mut prev_gap = f64::INFINITY;

    for iteration in 1..=opts.max_iter {
        let shifted = HermitianMatrix::symmetrized(x.as_matrix() + &increment);
        let eig = eigh(&shifted)?;
        let y = eig.rebuild(|lam| lam.max(0.0));
        increment = shifted.as_matrix() - y.as_matrix();
        let (x_new, p_new) = projector.project(&y);
        let gap = hs_norm(&(y.as_matrix() - x_new.as_matrix()));
        gap_history.push(gap);

        if gap <= tol && projector.constraint_residual(&x_new) <= tol {
            let lam = eigh(&x_new)?.eigenvalues.first().copied().unwrap_or(0.0);
            return Ok(FeasibilityResult {
                status: FeasibilityStatus::Feasible,
                x: Some(x_new),
                p: p_new,
                lambda_min: lam,
                gap,
                iterations: iteration,
                gap_history,
            });
        }

        let stalled = {
            if (prev_gap - gap).abs() < STALL_EPS {
                stall_count += 1;
            } else {
                stall_count = 0;
            }
            prev_gap = gap;
            stall_count >= STALL_WINDOW && gap > tol
        };

        if stalled || iteration % POLISH_PERIOD == 0 || iteration == opts.max_iter {
            if let Some(res) =
                rank_polish(&projector, &x_new, &p_new, tol, iteration, &gap_history)?
            {
                return Ok(res);
            }
        }
        if stalled {
            let lam = eigh(&x_new)?.eigenvalues.first().copied().unwrap_or(0.0);
            return Ok(FeasibilityResult {
                status: FeasibilityStatus::GapStalled,
                x: None,
                p: Vec::new(),
                lambda_min: lam,
                gap,
                iterations: iteration,
                gap_history,
            });
        }
        x = x_new;
    }

    let lam = eigh(&x)?.eigenvalues.first().copied().unwrap_or(0.0);
    let gap = gap_history.last().copied().unwrap_or(f64::INFINITY);
    Ok(FeasibilityResult {
        status: FeasibilityStatus::IterationLimit,
        x: None,
        p: Vec::new(),
        lambda_min: lam,
        gap,
        iterations: opts.max_iter,
        gap_history,
    })
}

/// Attempts to land exactly on a boundary solution: takes the near-kernel
/// of the current iterate, solves in least squares for perturbation
/// coordinates that annihilate it while keeping the extra constraints, and
/// accepts the candidate if it is PSD within tolerance. Up to three
/// Newton-style refinements of the kernel guess are made per kernel size.
fn rank_polish(
    projector: &AffineProjector<'_>,
    x: &HermitianMatrix,
    p: &[f64],
    tol: f64,
    iteration: usize,
    gap_history: &[f64],
) -> Result<Option<FeasibilityResult>, Error> {
    let m = projector.dirs.len();
    if m == 0 || m > POLISH_COORD_CAP {
        return Ok(None);
    }
    let dim = x.dim();
    let base_eig = eigh(x)?;
    let scale = base_eig
        .eigenvalues
        .iter()
        .fold(1.0f64, |acc, &v| acc.max(v.abs()));
    let lam_min = base_eig.eigenvalues.first().copied().unwrap_or(0.0);
    for factor in [4.0, 32.0] {
        let tau = (factor * lam_min.abs()).max(factor * 2.5e-8 * scale);
        let mut cur = x.clone();
        let mut cur_p = p.to_vec();
        let mut cur_eig = base_eig.clone();
        for _refine in 0..3 {
            let kernel: Vec<usize> = cur_eig
                .eigenvalues
                .iter()
                .enumerate()
                .filter(|(_, &lam)| lam < tau)
                .map(|(i, _)| i)
                .collect();
            if kernel.is_empty() || kernel.len() == dim {
                break;
            }
            let Some(delta) = solve_kernel_least_squares(projector, &cur, &cur_p, &cur_eig, &kernel)
            else {
                break;
            };
            let mut next_p = cur_p.clone();
            for (pv, dv) in next_p.iter_mut().zip(delta.iter()) {
                *pv += dv;
            }
            let candidate = projector.assemble(&next_p);
            let cand_eig = eigh(&candidate)?;
            let cand_lam = cand_eig.eigenvalues.first().copied().unwrap_or(0.0);
            if cand_lam >= -tol && projector.constraint_residual(&candidate) <= tol {
                let psd_dist = cand_eig
                    .eigenvalues
                    .iter()
                    .map(|&l| l.min(0.0).powi(2))
                    .sum::<f64>()
                    .sqrt();
                let mut history = gap_history.to_vec();
                history.push(psd_dist);
                return Ok(Some(FeasibilityResult {
                    status: FeasibilityStatus::Feasible,
                    x: Some(candidate),
                    p: next_p,
                    lambda_min: cand_lam,
                    gap: psd_dist,
                    iterations: iteration,
                    gap_history: history,
                }));
            }
            cur = candidate;
            cur_p = next_p;
            cur_eig = cand_eig;
        }
    }
    Ok(None)
}

/// Least-squares step for the polish: minimizes the norm of
/// `(X + sum delta_mu F_mu) W` over `delta`, where `W` collects the kernel
/// eigenvectors, together with the constraint equations, under a small
/// Tikhonov regularization. Returns `None` when the normal equations are
/// singular.
fn solve_kernel_least_squares(
    projector: &AffineProjector<'_>,
    x: &HermitianMatrix,
    p: &[f64],
    eig: &crate::hermlinalg::EigenDecomposition,
    kernel: &[usize],
) -> Option<Vec<f64>> {
    let m = projector.dirs.len();
    let dim = x.dim();
    let rows = kernel.len() * dim * 2 + projector.cons.len();
    let mut a = vec![vec![0.0f64; m]; rows];
    let mut b = vec![0.0f64; rows];
    let mut row = 0;
    for &kc in kernel {
        let w = eig.eigenvectors.column(kc);
        for (mu, f) in projector.dirs.iter().enumerate() {
            let fm = f.as_matrix();
            for r in 0..dim {
                let mut acc = C64::new(0.0, 0.0);
                for cc in 0..dim {
                    acc += fm[[r, cc]] * w[cc];
                }
                a[row + 2 * r][mu] = acc.re;
                a[row + 2 * r + 1][mu] = acc.im;
            }
        }
        let xm = x.as_matrix();
        for r in 0..dim {
            let mut acc = C64::new(0.0, 0.0);
            for cc in 0..dim {
                acc += xm[[r, cc]] * w[cc];
            }
            b[row + 2 * r] = -acc.re;
            b[row + 2 * r + 1] = -acc.im;
        }
        row += 2 * dim;
    }
    for ti in 0..projector.cons.len() {
        for mu in 0..m {
            a[row + ti][mu] = projector.l[ti][mu];
        }
        let lp: f64 = projector.l[ti].iter().zip(p.iter()).map(|(x, y)| x * y).sum();
        b[row + ti] = projector.c[ti] - lp;
    }

    let mut ata = vec![vec![0.0f64; m]; m];
    let mut atb = vec![0.0f64; m];
    for r in 0..rows {
        for i in 0..m {
            let ari = a[r][i];
            if ari == 0.0 {
                continue;
            }
            atb[i] += ari * b[r];
            for j in i..m {
                ata[i][j] += ari * a[r][j];
            }
        }
    }
    let mut reg = 0.0f64;
    for i in 0..m {
        reg = reg.max(ata[i][i]);
        for j in 0..i {
            ata[i][j] = ata[j][i];
        }
    }
    let ridge = 1e-12 * reg.max(1e-30);
    for (i, row) in ata.iter_mut().enumerate() {
        row[i] += ridge;
    }
    solve_real_system(&ata, &atb)
}

/// A constructed interpolating map.
#[derive(Debug, Clone)]
pub struct Solution {
    pub choi: ChoiMatrix,
    pub kraus: KrausSet,
    /// `‖phi(A_nu) - B_nu‖` against the original, pre-canonicalization
    /// pairs (including the unital pair when requested).
    pub residuals: Vec<f64>,
    /// `‖sum V_j V_j* - I_n‖` when trace preservation was requested.
    pub trace_residual: Option<f64>,
}

/// Converts a feasible point into Choi and Kraus form and measures the
/// interpolation residuals against the original pairs.
///
/// # Panics
/// Panics when called on a result whose status is not `Feasible`.
pub fn extract_solution(
    density: &DensityData,
    result: &FeasibilityResult,
    problem: &CanonicalProblem,
    opts: &SolveOptions,
) -> Result<Solution, Error> {
    assert!(
        result.status == FeasibilityStatus::Feasible && result.x.is_some(),
        "extract_solution requires a Feasible result"
    );
    let x = result.x.as_ref().unwrap();
    let x_psd = crate::hermlinalg::psd_project(x)?;
    let _ = density;
    let (n, k) = (problem.n, problem.k);
    let choi = density_to_choi(&x_psd, n, k)?;
    let lam_max = eigh(&x_psd)?.eigenvalues.last().copied().unwrap_or(0.0);
    let rank_tol = default_rank_tol(n * k, lam_max).max(10.0 * opts.tol);
    let kraus = kraus_from_choi(&choi, rank_tol)?;

    let mut residuals = Vec::with_capacity(problem.original.len());
    let mut worst = 0.0f64;
    let mut worst_bound = 0.0f64;
    for (araw, braw) in &problem.original {
        let image = crate::choi_kraus::apply_kraus(&kraus, araw)?;
        let res = hs_norm(&(&image - braw));
        let bound = 100.0 * opts.tol * (1.0 + hs_norm(braw));
        if res > worst {
            worst = res;
            worst_bound = bound;
        }
        residuals.push(res);
    }
    if worst > worst_bound {
        return Err(Error::InconsistentData {
            detail: format!(
                "solution residual {worst:.3e} exceeds the solution tolerance \
                 {worst_bound:.3e}; per-pair residuals {residuals:?}"
            ),
        });
    }
    let trace_residual = problem
        .trace_preserving
        .then(|| trace_preservation_defect(&kraus));
    Ok(Solution {
        choi,
        kraus,
        residuals,
        trace_residual,
    })
}

/// Evaluates the map parametrized by a density-layout matrix `X` on an
/// input `A`: the `k x k` matrix with entries `tr(X (E_ij (x) A))`.
pub fn apply_density(x: &HermitianMatrix, a: &CMatrix, n: usize, k: usize) -> CMatrix {
    let xm = x.as_matrix();
    let mut out = CMatrix::zeros((k, k));
    for i in 0..k {
        for j in 0..k {
            let mut acc = C64::new(0.0, 0.0);
            for l in 0..n {
                for m in 0..n {
                    acc += xm[[j * n + m, i * n + l]] * a[[l, m]];
                }
            }
            out[[i, j]] = acc;
        }
    }
    out
}

/// Why `solve` stopped without a solution.
#[derive(Debug, Clone)]
pub enum Diagnosis {
    /// A linear dependence among the inputs is not matched by the targets.
    InconsistentDependence { detail: String },
    /// Necessary conditions failed; the solver was not run.
    PrecheckViolations(Vec<PrecheckViolation>),
    /// The feasibility search ended without a PSD point.
    NotFound(FeasibilityResult),
}

impl std::fmt::Display for Diagnosis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Diagnosis::InconsistentDependence { detail } => {
                write!(f, "inconsistent data: {detail}")
            }
            Diagnosis::PrecheckViolations(list) => {
                write!(f, "necessary conditions violated:")?;
                for v in list {
                    write!(f, "\n  - {v}")?;
                }
                Ok(())
            }
            Diagnosis::NotFound(res) => match res.status {
                FeasibilityStatus::GapStalled => write!(
                    f,
                    "no PSD point found; stalled gap = {:.6e} after {} iterations",
                    res.gap, res.iterations
                ),
                _ => write!(
                    f,
                    "no PSD point found within {} iterations (gap {:.6e})",
                    res.iterations, res.gap
                ),
            },
        }
    }
}

/// Outcome of the full pipeline.
#[derive(Debug, Clone)]
pub enum SolveOutcome {
    Solved(Box<Solution>),
    Diagnosed(Diagnosis),
}

/// Full pipeline: canonicalize, build the density matrix, run prechecks,
/// decide feasibility (with trace-preservation constraints when requested),
/// and extract a solution.
pub fn solve(problem: &Problem, opts: &SolveOptions) -> Result<SolveOutcome, Error> {
    let canonical = match canonicalize(problem, opts.tol) {
        Ok(c) => c,
        Err(Error::InconsistentData { detail }) => {
            return Ok(SolveOutcome::Diagnosed(Diagnosis::InconsistentDependence {
                detail,
            }))
        }
        Err(e) => return Err(e),
    };
    let density = density_matrix(&canonical);
    let violations = prechecks(&canonical, &density);
    if !violations.is_empty() {
        return Ok(SolveOutcome::Diagnosed(Diagnosis::PrecheckViolations(
            violations,
        )));
    }
    let constraints = canonical
        .trace_preserving
        .then(|| trace_preserving_constraints(&canonical, &density));
    let result = feasibility(&density, constraints.as_deref(), opts)?;
    if result.status != FeasibilityStatus::Feasible {
        return Ok(SolveOutcome::Diagnosed(Diagnosis::NotFound(result)));
    }
    let solution = extract_solution(&density, &result, &canonical, opts)?;
    Ok(SolveOutcome::Solved(Box::new(solution)))
}
