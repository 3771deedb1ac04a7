//! Galerkin-least-squares stabilisation: the element-wise strong residual
//! weighted by γ_GLS h_K²,
//!
//! ```text
//! s_{p,GLS}(u, v) = Σ_K γ_GLS h_K² (L u, L v)_K,
//! s_{a,GLS}(z, w) = Σ_K γ_GLS h_K² (L* z, L* w)_K,
//! ```
//!
//! where the adjoint side applies the formal adjoint operator. The primal
//! data vector realises the known right-hand side of the second equation,
//! `(f, γ_GLS h_K² L v)_K`; the adjoint data vanishes since the dual load is
//! zero. Laplacians enter analytically and are identically zero for k = 1.

use super::{Side, StabilisationParams};
use crate::error::{Error, Result};
use crate::fe_space::FeSpace;
use crate::problems::ProblemSpec;
use crate::sparse::{CooBuilder, SparseOperator};

/// A least-squares stabilisation operator with its data terms, in the same
/// `(op, data, data_sq)` convention as the boundary penalties.
#[derive(Clone, Debug)]
pub struct GlsOperator {
    pub op: SparseOperator,
    /// `data[i] = (f, γ_GLS h² L φ_i)_h`; zero on the adjoint side.
    pub data: Vec<f64>,
    /// `data_sq = (f, γ_GLS h² f)_h`; zero on the adjoint side.
    pub data_sq: f64,
}

impl GlsOperator {
    /// Least-squares residual of a dof vector against the source data.
    pub fn residual_form(&self, u: &[f64]) -> f64 {
        let quad = self.op.quadratic_form(u);
        let lin: f64 = u.iter().zip(&self.data).map(|(a, b)| a * b).sum();
        (quad - 2.0 * lin + self.data_sq).max(0.0)
    }
}

/// Assembles the GLS operator of one side.
pub fn assemble_sgls(
    space: &FeSpace,
    problem: &ProblemSpec,
    params: &StabilisationParams,
    side: Side,
) -> Result<GlsOperator> {
    if side == Side::Adjoint && !problem.adjoint_configured {
        return Err(Error::AdjointNotConfigured(problem.name.clone()));
    }

    let mut coo = CooBuilder::new(space.ndof, space.ndof);
    let mut data = vec![0.0; space.ndof];
    let mut data_sq = 0.0;

    for elem in 0..space.mesh.num_triangles() {
        let map = space.element_map(elem);
        let jac = map.det.abs();
        let h_k = space.mesh.triangle_diameter(elem);
        let tau = params.gamma_gls * h_k * h_k;
        if tau == 0.0 {
            continue;
        }
        let dofs = &space.element_dofs[elem];
        for (p, &wq) in space.tri_rule.points.iter().zip(&space.tri_rule.weights) {
            let (xi, eta) = (p[1], p[2]);
            let x = map.to_physical(xi, eta);
            let basis = space.eval_basis_mapped(&map, xi, eta);
            let w = wq * jac;
            let residual: Vec<f64> = (0..dofs.len())
                .map(|l| {
                    let (v, g, lap) = (basis.values[l], basis.gradients[l], basis.laplacian(l));
                    match side {
                        Side::Primal => problem.strong_primal(x, v, g, lap),
                        Side::Adjoint => problem.strong_adjoint(x, v, g, lap),
                    }
                })
                .collect();
            for (i, &gi) in dofs.iter().enumerate() {
                for (j, &gj) in dofs.iter().enumerate() {
                    coo.push(gi, gj, w * tau * residual[j] * residual[i]);
                }
            }
            if side == Side::Primal {
                let fx = (problem.f)(x);
                if fx != 0.0 {
                    for (i, &gi) in dofs.iter().enumerate() {
                        data[gi] += w * tau * fx * residual[i];
                    }
                    data_sq += w * tau * fx * fx;
                }
            }
        }
    }

    Ok(GlsOperator {
        op: coo.finalize(),
        data,
        data_sq,
    })
}
