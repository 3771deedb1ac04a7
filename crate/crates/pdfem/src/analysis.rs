//! Error quantities and experimental orders of convergence.
//!
//! All norms are evaluated with the space's own element and edge quadrature
//! (exactness 2k+4 and 2k+2), which integrates every polynomial quantity in
//! the built-in studies exactly.

use crate::assembly::{BoundaryPenalty, GlsOperator};
use crate::fe_space::{make_quadrature, FeSpace, QuadEntity, QuadratureRule, MAX_DEGREE};
use crate::mesh::Vec2;
use crate::saddle::SolveDiagnostics;
use crate::sparse::SparseOperator;

/// Error norms use the strongest supported rule so that the reference
/// quantities (like the unit norm of the manufactured solution, a degree-8
/// integrand) come out exact regardless of the space degree.
fn error_rule(entity: QuadEntity) -> QuadratureRule {
    make_quadrature(entity, MAX_DEGREE).expect("max degree is supported")
}

/// L2 norm of u_h − exact over the mesh.
pub fn l2_error(space: &FeSpace, u_h: &[f64], exact: impl Fn(Vec2) -> f64) -> f64 {
    let rule = error_rule(QuadEntity::Triangle);
    let mut acc = 0.0;
    for elem in 0..space.mesh.num_triangles() {
        let map = space.element_map(elem);
        let jac = map.det.abs();
        let dofs = &space.element_dofs[elem];
        for (p, &w) in rule.points.iter().zip(&rule.weights) {
            let (xi, eta) = (p[1], p[2]);
            let basis = space.eval_basis_mapped(&map, xi, eta);
            let x = map.to_physical(xi, eta);
            let uh: f64 = dofs
                .iter()
                .zip(&basis.values)
                .map(|(&d, &v)| u_h[d] * v)
                .sum();
            let diff = uh - exact(x);
            acc += w * jac * diff * diff;
        }
    }
    acc.sqrt()
}

/// Plain L2 norm of a discrete function.
pub fn l2_norm(space: &FeSpace, u_h: &[f64]) -> f64 {
    l2_error(space, u_h, |_| 0.0)
}

/// L2 norm of ∇(u_h − exact), given the exact gradient.
pub fn h1_seminorm_error(space: &FeSpace, u_h: &[f64], exact_grad: impl Fn(Vec2) -> Vec2) -> f64 {
    let rule = error_rule(QuadEntity::Triangle);
    let mut acc = 0.0;
    for elem in 0..space.mesh.num_triangles() {
        let map = space.element_map(elem);
        let jac = map.det.abs();
        let dofs = &space.element_dofs[elem];
        for (p, &w) in rule.points.iter().zip(&rule.weights) {
            let (xi, eta) = (p[1], p[2]);
            let basis = space.eval_basis_mapped(&map, xi, eta);
            let x = map.to_physical(xi, eta);
            let mut guh = Vec2::new(0.0, 0.0);
            for (&d, g) in dofs.iter().zip(&basis.gradients) {
                guh = guh + *g * u_h[d];
            }
            let diff = guh - exact_grad(x);
            acc += w * jac * diff.dot(diff);
        }
    }
    acc.sqrt()
}

/// Error in the diffusive boundary flux, measured in the mesh-weighted
/// discrete H^{−1/2} norm: sqrt of ∫_{∂Ω} h_F (∇(u − u_h)·n)² ds.
pub fn boundary_flux_error(
    space: &FeSpace,
    u_h: &[f64],
    exact_grad: impl Fn(Vec2) -> Vec2,
) -> f64 {
    let rule = error_rule(QuadEntity::Edge);
    let mut acc = 0.0;
    for (_, face) in space.mesh.boundary_faces() {
        let elem = face.triangles.0;
        let map = space.element_map(elem);
        let dofs = &space.element_dofs[elem];
        let n = face.normal;
        let h_f = face.length;
        for (p, &w) in rule.points.iter().zip(&rule.weights) {
            let x = face.point_at(&space.mesh, p[1]);
            let (xi, eta) = map.to_reference(x);
            let basis = space.eval_basis_mapped(&map, xi, eta);
            let mut guh = Vec2::new(0.0, 0.0);
            for (&d, g) in dofs.iter().zip(&basis.gradients) {
                guh = guh + *g * u_h[d];
            }
            let diff = (guh - exact_grad(x)).dot(n);
            acc += w * h_f * h_f * diff * diff;
        }
    }
    acc.sqrt()
}

/// Stabilisation seminorm of a dof vector: interior jump terms evaluated on
/// the vector itself plus the boundary-penalty (and optional least-squares)
/// residuals against the problem data.
pub fn stab_seminorm(
    u: &[f64],
    interior: &SparseOperator,
    penalty: &BoundaryPenalty,
    gls: Option<&GlsOperator>,
) -> f64 {
    let mut acc = interior.quadratic_form(u).max(0.0);
    acc += penalty.residual_form(u);
    if let Some(g) = gls {
        acc += g.residual_form(u);
    }
    acc.sqrt()
}

/// Experimental orders of convergence: EOC[j] = log₂(e[j−1]/e[j]) for
/// consecutive levels with doubled resolution. The first level and any
/// non-finite entry (zero or growing error) are reported as absent.
pub fn compute_eoc(errors: &[f64]) -> Vec<Option<f64>> {
    let mut eoc = vec![None; errors.len()];
    for j in 1..errors.len() {
        let (prev, cur) = (errors[j - 1], errors[j]);
        if prev > 0.0 && cur > 0.0 && cur <= prev {
            eoc[j] = Some((prev / cur).log2());
        }
    }
    eoc
}

/// Error quantities of one refinement level.
#[derive(Clone, Debug)]
pub struct LevelRecord {
    /// Refinement exponent N (n = 2^N cells per side).
    pub level: u32,
    /// Cells per side.
    pub n: usize,
    /// Maximum triangle diameter.
    pub h: f64,
    /// ‖u − u_h‖.
    pub l2: f64,
    /// ‖∇(u − u_h)‖.
    pub h1: f64,
    /// ‖z_h‖ (the exact dual solution is zero).
    pub z_norm: f64,
    /// |u_h|_{S_p} + |z_h|_{S_a}.
    pub stab: f64,
    /// Boundary flux error in the discrete H^{−1/2} norm.
    pub flux: f64,
    /// ‖u − u_h‖ / ‖u‖ on the same mesh.
    pub rel_l2: f64,
    pub diagnostics: SolveDiagnostics,
}

/// A convergence study: per-level records, per-quantity EOC sequences and
/// any failed levels.
#[derive(Clone, Debug, Default)]
pub struct ConvergenceReport {
    pub records: Vec<LevelRecord>,
    /// Levels that failed to solve, with the error message.
    pub failures: Vec<(u32, String)>,
}

impl ConvergenceReport {
    pub fn eoc_of(&self, quantity: impl Fn(&LevelRecord) -> f64) -> Vec<Option<f64>> {
        let errors: Vec<f64> = self.records.iter().map(quantity).collect();
        compute_eoc(&errors)
    }

    pub fn l2_eoc(&self) -> Vec<Option<f64>> {
        self.eoc_of(|r| r.l2)
    }

    pub fn stab_eoc(&self) -> Vec<Option<f64>> {
        self.eoc_of(|r| r.stab)
    }

    pub fn flux_eoc(&self) -> Vec<Option<f64>> {
        self.eoc_of(|r| r.flux)
    }

    pub fn z_eoc(&self) -> Vec<Option<f64>> {
        self.eoc_of(|r| r.z_norm)
    }
}
