//! Stabilised primal–dual finite element solver for nonsymmetric, noncoercive
//! and ill-posed second-order elliptic problems on the unit square.
//!
//! The library discretises a forward problem and its formal adjoint
//! simultaneously: the primal unknown `u_h` and a dual unknown `z_h` are
//! coupled through symmetric stabilisation operators (continuous interior
//! penalty on gradient/Laplacian jumps, optional Galerkin least squares) and
//! weakly imposed boundary conditions of Nitsche type. The resulting block
//! system
//!
//! ```text
//! [  A    S_a ] [u]   [F1]
//! [ -S_p  A^T ] [z] = [F2]
//! ```
//!
//! is solved by a sparse direct factorisation. Built-in problem definitions
//! cover convection–diffusion with Dirichlet or pure Neumann conditions and
//! elliptic Cauchy (data completion) configurations, together with the error
//! quantities and experimental convergence orders used to study them.

pub mod analysis;
pub mod assembly;
pub mod error;
pub mod fe_space;
pub mod mesh;
pub mod problems;
pub mod saddle;
pub mod sparse;
pub mod study;

pub use analysis::{
    boundary_flux_error, compute_eoc, h1_seminorm_error, l2_error, l2_norm, stab_seminorm,
    ConvergenceReport, LevelRecord,
};
pub use assembly::{
    assemble_a, assemble_boundary_penalty, assemble_mean_vector, assemble_rhs, assemble_scip,
    assemble_sgls, BoundaryPenalty, GlsOperator, Side, StabMode, StabilisationParams,
};
pub use error::{Error, Result};
pub use fe_space::{make_quadrature, FeSpace, QuadEntity, QuadratureRule};
pub use mesh::{build_mesh, BoundaryTag, Face, FaceGeometry, Mesh};
pub use problems::{
    make_cauchy_cd, make_cauchy_poisson, make_dirichlet_cd, make_neumann_cd, BoundaryRole,
    ExactSolution, ProblemSpec,
};
pub use saddle::{build_block_system, solve, BlockSystem, Solution, SolveDiagnostics};
pub use sparse::SparseOperator;
pub use study::{run_study, run_parameter_sweep, OutputFormat, StudyConfig, SweepRow};
