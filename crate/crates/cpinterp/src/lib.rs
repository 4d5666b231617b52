//! Completely positive interpolation between prescribed Hermitian matrices.
//!
//! Given Hermitian matrices `A_1..A_N` of size `n` and targets `B_1..B_N` of
//! size `k`, this crate decides whether a completely positive map `phi` with
//! `phi(A_nu) = B_nu` for all `nu` exists, and constructs one in Choi-matrix
//! and Kraus form when it does. Feasibility reduces to finding a positive
//! semidefinite matrix in an affine set built from the data; the solver runs
//! Dykstra alternating projections between that affine set and the PSD cone.
//!
//! Module layout:
//! * [`hermlinalg`]: dense complex kernel (eigendecomposition, inertia,
//!   projections, Gram-Schmidt, Kronecker products).
//! * [`choi_kraus`]: Choi matrices, Kraus sets, and the shuffle between the
//!   Choi and density-matrix index orders.
//! * [`subspace`]: span bases, orthogonal complements, and operator systems
//!   spanned by matrix units.
//! * [`interpolation`]: the interpolation pipeline from raw pairs to a
//!   solved map.
//! * [`single_pair`]: the one-pair problem, decided exactly through inertia.
//! * [`cli`]: the `cpinterp` command line front end.

pub mod choi_kraus;
pub mod cli;
pub mod hermlinalg;
pub mod interpolation;
pub mod single_pair;
pub mod subspace;

use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Clone, Error)]
pub enum Error {
    /// A square matrix was required.
    #[error("expected a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    /// Two arguments had incompatible shapes.
    #[error("shape mismatch: {context}")]
    ShapeMismatch { context: String },
    /// A matrix failed the Hermitian tolerance gate.
    #[error("matrix is not Hermitian: deviation {deviation:.3e} exceeds bound {bound:.3e}")]
    NotHermitian { deviation: f64, bound: f64 },
    /// The Jacobi eigensolver hit its sweep cap.
    #[error("eigensolver did not converge after {sweeps} sweeps (off-diagonal {off_diag:.3e}, threshold {threshold:.3e})")]
    EighNoConvergence {
        sweeps: usize,
        off_diag: f64,
        threshold: f64,
    },
    /// A positive semidefinite matrix was required.
    #[error("matrix is not positive semidefinite: lambda_min = {lambda_min:.3e} is below -{tol:.3e}")]
    NotPsd { lambda_min: f64, tol: f64 },
    /// The inertia of the target exceeds what a single Kraus element allows.
    #[error("rank-one condition violated: target needs {needed} {sign} eigenvalue directions, source offers {available}")]
    RankCondition {
        sign: &'static str,
        needed: usize,
        available: usize,
    },
    /// No completely positive map exists for the pair, at any Kraus count.
    #[error("no completely positive map sends the source to the target: {detail}")]
    SinglePairInfeasible { detail: String },
    /// Linearly dependent inputs whose targets disagree with the dependence.
    #[error("inconsistent data: {detail}")]
    InconsistentData { detail: String },
    /// A relation-based operation received an unsuitable relation.
    #[error("unsuitable relation: {detail}")]
    RelationUnsuitable { detail: String },
    /// A parameter was outside its documented range.
    #[error("parameter out of range: {detail}")]
    ParameterRange { detail: String },
}
