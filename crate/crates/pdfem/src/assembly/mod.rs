//! Assembly of all discrete operators of the coupled primal–dual method:
//! the bilinear form `a_h`, interior-penalty and Galerkin-least-squares
//! stabilisation, boundary penalties and the right-hand sides.
//!
//! Conventions: matrices are stored with the test function as the row index,
//! `A[i][j] = a_h(φ_j, φ_i)`. Face integrals use the face length as the local
//! mesh size and the orientation stored in the mesh (normals point out of the
//! first adjacent triangle; jumps are first minus second).

mod boundary;
mod cip;
mod gls;

pub use boundary::{assemble_boundary_penalty, BoundaryPenalty};
pub use cip::assemble_scip;
pub use gls::{assemble_sgls, GlsOperator};

use crate::error::{Error, Result};
use crate::fe_space::{BasisEval, FeSpace};
use crate::mesh::{Face, Vec2};
use crate::problems::{BoundaryRole, FormKind, ProblemSpec};
use crate::sparse::{CooBuilder, SparseOperator};

/// Which stabilisation terms are active.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StabMode {
    Cip,
    Gls,
    CipGls,
}

impl StabMode {
    pub fn has_cip(self) -> bool {
        matches!(self, StabMode::Cip | StabMode::CipGls)
    }

    pub fn has_gls(self) -> bool {
        matches!(self, StabMode::Gls | StabMode::CipGls)
    }
}

/// Which equation a stabilisation operator belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Primal,
    Adjoint,
}

/// Dimensionless stabilisation multipliers.
#[derive(Clone, Copy, Debug)]
pub struct StabilisationParams {
    /// Gradient-jump multiplier γ₁.
    pub gamma1: f64,
    /// Laplacian-jump multiplier γ₂ (inert for k = 1).
    pub gamma2: f64,
    /// Least-squares multiplier γ_GLS; 0 disables GLS.
    pub gamma_gls: f64,
    /// Boundary penalty multiplier γ_bc.
    pub gamma_bc: f64,
    pub mode: StabMode,
    /// Include the |(β·n)_±| boundary term of the Dirichlet penalty. It is
    /// dominated by the μ/h term at low Péclet numbers and may be disabled.
    pub include_convective_bc: bool,
}

impl StabilisationParams {
    /// The parameter choices used by all convergence studies:
    /// γ₁ = γ₂ = 0.01 for k = 1 and 0.001 for k = 2, γ_bc = 10, CIP only.
    pub fn defaults_for(degree: usize) -> Self {
        let g = if degree == 1 { 0.01 } else { 0.001 };
        Self {
            gamma1: g,
            gamma2: g,
            gamma_gls: 0.0,
            gamma_bc: 10.0,
            mode: StabMode::Cip,
            include_convective_bc: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("gamma_gls", self.gamma_gls),
            ("gamma_bc", self.gamma_bc),
        ] {
            if v < 0.0 {
                return Err(Error::Config(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if self.mode == StabMode::Cip && self.gamma_gls != 0.0 {
            return Err(Error::Config(
                "mode 'cip' forces gamma_gls = 0; use mode 'gls' or 'cip+gls'".into(),
            ));
        }
        if self.mode.has_gls() && self.gamma_gls <= 0.0 {
            return Err(Error::Config(
                "GLS mode requires a positive gamma_gls".into(),
            ));
        }
        Ok(())
    }
}

/// Role of a boundary face under the given problem, or an error if the
/// problem's boundary configuration does not cover it.
pub(crate) fn face_role(problem: &ProblemSpec, face_idx: usize, face: &Face) -> Result<BoundaryRole> {
    let tag = face
        .tag
        .ok_or_else(|| Error::Assembly(format!("face {face_idx} is not a boundary face")))?;
    problem
        .role(tag)
        .ok_or(Error::UnassignedBoundaryFace { face: face_idx })
}

/// Runs `body` for every element quadrature point with the physical point,
/// the quadrature weight (including the Jacobian) and the local basis.
pub(crate) fn for_each_element_qp(
    space: &FeSpace,
    mut body: impl FnMut(usize, Vec2, f64, &BasisEval),
) {
    for elem in 0..space.mesh.num_triangles() {
        let map = space.element_map(elem);
        let jac = map.det.abs();
        for (p, &w) in space.tri_rule.points.iter().zip(&space.tri_rule.weights) {
            let (xi, eta) = (p[1], p[2]);
            let x = map.to_physical(xi, eta);
            let basis = space.eval_basis_mapped(&map, xi, eta);
            body(elem, x, w * jac, &basis);
        }
    }
}

/// Runs `body` for every quadrature point of one face, with the physical
/// point, the scaled weight and the basis of the requested adjacent element.
pub(crate) fn for_each_face_qp(
    space: &FeSpace,
    face: &Face,
    element: usize,
    mut body: impl FnMut(Vec2, f64, &BasisEval),
) {
    let map = space.element_map(element);
    for (p, &w) in space.edge_rule.points.iter().zip(&space.edge_rule.weights) {
        let t = p[1];
        let x = face.point_at(&space.mesh, t);
        let (xi, eta) = map.to_reference(x);
        let basis = space.eval_basis_mapped(&map, xi, eta);
        body(x, w * face.length, &basis);
    }
}

/// Negative part (β·n)₋ = min(β·n, 0).
pub(crate) fn beta_n_minus(bn: f64) -> f64 {
    0.5 * (bn - bn.abs())
}

/// Positive part (β·n)₊ = max(β·n, 0).
pub(crate) fn beta_n_plus(bn: f64) -> f64 {
    0.5 * (bn + bn.abs())
}

/// Assembles the system matrix of the discrete bilinear form `a_h` for the
/// given problem, `A[i][j] = a_h(φ_j, φ_i)`.
pub fn assemble_a(space: &FeSpace, problem: &ProblemSpec) -> Result<SparseOperator> {
    let mut coo = CooBuilder::new(space.ndof, space.ndof);

    // Volume terms.
    let has_beta = problem.beta.is_some();
    for_each_element_qp(space, |elem, x, w, basis| {
        let dofs = &space.element_dofs[elem];
        let beta = problem.beta_at(x);
        let c0 = match problem.form {
            // Conservative form: (β·∇u + (∇·β) u, v) plus reaction.
            FormKind::DirichletCd => problem.reaction_at(x),
            // Nonconservative form: −(u, β·∇v) plus c + κ.
            FormKind::NeumannCd | FormKind::Cauchy => problem.c_at(x) + problem.kappa,
        };
        for (i, &gi) in dofs.iter().enumerate() {
            for (j, &gj) in dofs.iter().enumerate() {
                let diffusion = problem.mu * basis.gradients[j].dot(basis.gradients[i]);
                let convection = if !has_beta {
                    0.0
                } else {
                    match problem.form {
                        FormKind::DirichletCd => beta.dot(basis.gradients[j]) * basis.values[i],
                        FormKind::NeumannCd | FormKind::Cauchy => {
                            -basis.values[j] * beta.dot(basis.gradients[i])
                        }
                    }
                };
                let reaction = c0 * basis.values[j] * basis.values[i];
                coo.push(gi, gj, w * (diffusion + convection + reaction));
            }
        }
    });

    // Boundary terms, by role.
    for (fi, face) in space.mesh.boundary_faces() {
        let role = face_role(problem, fi, face)?;
        let elem = face.triangles.0;
        let n = face.normal;
        let dofs = space.face_element_dofs(elem);
        match (problem.form, role) {
            (FormKind::NeumannCd, BoundaryRole::NeumannData) => {}
            (FormKind::DirichletCd, BoundaryRole::StrongData) => {
                for_each_face_qp(space, face, elem, |x, w, basis| {
                    let bn = if has_beta { problem.beta_at(x).dot(n) } else { 0.0 };
                    for (i, &gi) in dofs.iter().enumerate() {
                        for (j, &gj) in dofs.iter().enumerate() {
                            let du_n = problem.mu * basis.gradients[j].dot(n);
                            let dv_n = problem.mu * basis.gradients[i].dot(n);
                            let mut v = -du_n * basis.values[i] - dv_n * basis.values[j];
                            v -= beta_n_minus(bn) * basis.values[j] * basis.values[i];
                            coo.push(gi, gj, w * v);
                        }
                    }
                });
            }
            (FormKind::Cauchy, BoundaryRole::CauchyData) => {
                // Γ_V: dual-consistency term −⟨μ ∇v·n, u⟩.
                for_each_face_qp(space, face, elem, |_, w, basis| {
                    for (i, &gi) in dofs.iter().enumerate() {
                        for (j, &gj) in dofs.iter().enumerate() {
                            let dv_n = problem.mu * basis.gradients[i].dot(n);
                            coo.push(gi, gj, -w * dv_n * basis.values[j]);
                        }
                    }
                });
            }
            (FormKind::Cauchy, BoundaryRole::Free) => {
                // Γ_W: −⟨μ ∇u·n, v⟩ plus the unknown convective trace.
                for_each_face_qp(space, face, elem, |x, w, basis| {
                    let bn = if has_beta { problem.beta_at(x).dot(n) } else { 0.0 };
                    for (i, &gi) in dofs.iter().enumerate() {
                        for (j, &gj) in dofs.iter().enumerate() {
                            let du_n = problem.mu * basis.gradients[j].dot(n);
                            let mut v = -du_n * basis.values[i];
                            v += bn * basis.values[j] * basis.values[i];
                            coo.push(gi, gj, w * v);
                        }
                    }
                });
            }
            (form, role) => {
                return Err(Error::Assembly(format!(
                    "boundary role {role:?} is not supported by the {form:?} form"
                )))
            }
        }
    }

    Ok(coo.finalize())
}

/// Assembles both right-hand sides of the coupled system: `F1[i] = (f, φ_i)`
/// plus the boundary consistency data of `a_h`, and `F2[i] = −s_p(u, φ_i)`
/// expressed through the problem data (boundary-penalty data terms plus, in
/// GLS mode, the least-squares source term).
pub fn assemble_rhs(space: &FeSpace, problem: &ProblemSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    let params = problem.stab;
    let mut f1 = vec![0.0; space.ndof];

    for_each_element_qp(space, |elem, x, w, basis| {
        let fx = (problem.f)(x);
        if fx != 0.0 {
            for (i, &gi) in space.element_dofs[elem].iter().enumerate() {
                f1[gi] += w * fx * basis.values[i];
            }
        }
    });

    let has_beta = problem.beta.is_some();
    for (fi, face) in space.mesh.boundary_faces() {
        let role = face_role(problem, fi, face)?;
        let elem = face.triangles.0;
        let n = face.normal;
        let dofs = space.face_element_dofs(elem);
        match role {
            BoundaryRole::StrongData => {
                // −⟨μ ∇v·n, g_D⟩ − ⟨(β·n)₋ g_D, v⟩.
                for_each_face_qp(space, face, elem, |x, w, basis| {
                    let gd = (problem.g_d)(x);
                    if gd == 0.0 {
                        return;
                    }
                    let bn = if has_beta { problem.beta_at(x).dot(n) } else { 0.0 };
                    for (i, &gi) in dofs.iter().enumerate() {
                        let dv_n = problem.mu * basis.gradients[i].dot(n);
                        f1[gi] -= w * gd * (dv_n + beta_n_minus(bn) * basis.values[i]);
                    }
                });
            }
            BoundaryRole::NeumannData => {
                // −⟨g_N, v⟩: the weak-form datum of the total-flux condition.
                for_each_face_qp(space, face, elem, |x, w, basis| {
                    let gn = (problem.g_n)(x, n);
                    for (i, &gi) in dofs.iter().enumerate() {
                        f1[gi] -= w * gn * basis.values[i];
                    }
                });
            }
            BoundaryRole::CauchyData => {
                // +⟨g_N − (β·n) g_D, v⟩ − ⟨μ ∇v·n, g_D⟩ on Γ_V.
                for_each_face_qp(space, face, elem, |x, w, basis| {
                    let gd = (problem.g_d)(x);
                    let gn = (problem.g_n)(x, n);
                    let bn = if has_beta { problem.beta_at(x).dot(n) } else { 0.0 };
                    for (i, &gi) in dofs.iter().enumerate() {
                        let dv_n = problem.mu * basis.gradients[i].dot(n);
                        f1[gi] += w * ((gn - bn * gd) * basis.values[i] - dv_n * gd);
                    }
                });
            }
            BoundaryRole::Free => {}
        }
    }

    // F2 = −s_p(u, ·): interior jump terms of the smooth solution vanish, so
    // only boundary-penalty data and, in GLS mode, the source term survive.
    let penalty = assemble_boundary_penalty(space, problem, Side::Primal, &params)?;
    let mut f2: Vec<f64> = penalty.data.iter().map(|&v| -v).collect();
    if params.mode.has_gls() {
        let gls = assemble_sgls(space, problem, &params, Side::Primal)?;
        for (o, d) in f2.iter_mut().zip(&gls.data) {
            *o -= d;
        }
    }

    Ok((f1, f2))
}

/// Mass-weighted integral functional m_i = ∫_Ω φ_i, the constraint vector of
/// the zero-mean Lagrange multipliers (the row sums of the mass matrix).
pub fn assemble_mean_vector(space: &FeSpace) -> Vec<f64> {
    let mut m = vec![0.0; space.ndof];
    for_each_element_qp(space, |elem, _, w, basis| {
        for (i, &gi) in space.element_dofs[elem].iter().enumerate() {
            m[gi] += w * basis.values[i];
        }
    });
    m
}

impl FeSpace {
    /// Local dof slice of the element adjacent to a boundary face. Traces on
    /// the face only involve these dofs (others vanish there), but assembly
    /// integrates the full local basis, which is simpler and equivalent.
    pub(crate) fn face_element_dofs(&self, elem: usize) -> &[usize] {
        &self.element_dofs[elem]
    }
}
