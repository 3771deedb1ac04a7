//! Continuous interior penalty: jumps of the gradient and of the Laplacian
//! over interior faces,
//!
//! ```text
//! s_cip(u, v) = Σ_F ∫_F  h_F γ₁ w1_F [[∇u]]·[[∇v]] + h_F³ γ₂ w2_F [[Δu]][[Δv]]
//! ```
//!
//! with problem-supplied face weights w1_F = μ + h_F ‖β·n_F‖_∞ and w2_F = μ.
//! The operator is symmetric positive semi-definite; for k = 1 its kernel
//! contains all globally affine functions and the Laplacian term vanishes
//! identically.

use super::StabilisationParams;
use crate::fe_space::FeSpace;
use crate::mesh::Vec2;
use crate::problems::ProblemSpec;
use crate::sparse::{CooBuilder, SparseOperator};

/// Assembles the interior-penalty stabilisation matrix. The same matrix is
/// used for the primal and the adjoint equation.
pub fn assemble_scip(
    space: &FeSpace,
    params: &StabilisationParams,
    problem: &ProblemSpec,
) -> SparseOperator {
    let mut coo = CooBuilder::new(space.ndof, space.ndof);
    let nloc = space.dofs_per_element();

    for (_, face) in space.mesh.interior_faces() {
        let t0 = face.triangles.0;
        let t1 = face.triangles.1.expect("interior face");
        let h_f = face.length;

        let mut samples: Vec<Vec2> = space
            .edge_rule
            .points
            .iter()
            .map(|p| face.point_at(&space.mesh, p[1]))
            .collect();
        samples.push(space.mesh.vertices[face.vertices[0]]);
        samples.push(space.mesh.vertices[face.vertices[1]]);
        let (w1, w2) = problem.face_weights(h_f, face.normal, &samples);
        let c_grad = params.gamma1 * w1 * h_f;
        let c_lap = params.gamma2 * w2 * h_f * h_f * h_f;
        if c_grad == 0.0 && c_lap == 0.0 {
            continue;
        }

        let map0 = space.element_map(t0);
        let map1 = space.element_map(t1);
        let dofs: Vec<usize> = space.element_dofs[t0]
            .iter()
            .chain(space.element_dofs[t1].iter())
            .copied()
            .collect();

        for (p, &wq) in space.edge_rule.points.iter().zip(&space.edge_rule.weights) {
            let x = face.point_at(&space.mesh, p[1]);
            let w = wq * h_f;
            let (xi0, eta0) = map0.to_reference(x);
            let (xi1, eta1) = map1.to_reference(x);
            let b0 = space.eval_basis_mapped(&map0, xi0, eta0);
            let b1 = space.eval_basis_mapped(&map1, xi1, eta1);

            // Jump contributions of every local shape function: trace from
            // the first triangle counts +, from the second −. Shared dofs
            // appear on both sides and merge through the global index.
            let mut jump_grad = Vec::with_capacity(2 * nloc);
            let mut jump_lap = Vec::with_capacity(2 * nloc);
            for l in 0..nloc {
                jump_grad.push(b0.gradients[l]);
                jump_lap.push(b0.laplacian(l));
            }
            for l in 0..nloc {
                jump_grad.push(b1.gradients[l] * -1.0);
                jump_lap.push(-b1.laplacian(l));
            }

            for (i, &gi) in dofs.iter().enumerate() {
                for (j, &gj) in dofs.iter().enumerate() {
                    let v = c_grad * jump_grad[j].dot(jump_grad[i])
                        + c_lap * jump_lap[j] * jump_lap[i];
                    coo.push(gi, gj, w * v);
                }
            }
        }
    }

    coo.finalize()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::StabMode;
    use crate::mesh::{build_mesh, Mesh};
    use crate::problems::{make_cauchy_poisson, make_dirichlet_cd};
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn unit_params(gamma1: f64, gamma2: f64) -> StabilisationParams {
        StabilisationParams {
            gamma1,
            gamma2,
            gamma_gls: 0.0,
            gamma_bc: 1.0,
            mode: StabMode::Cip,
            include_convective_bc: true,
        }
    }

    #[test]
    fn symmetric_and_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for k in [1usize, 2] {
            let mesh = Arc::new(build_mesh(4, 0.2, 11).unwrap());
            let space = FeSpace::new(mesh, k).unwrap();
            let spec = make_dirichlet_cd(k);
            let s = assemble_scip(&space, &spec.stab, &spec);
            assert!(s.asymmetry() <= 1e-12, "k={k}");
            for _ in 0..100 {
                let v: Vec<f64> = (0..space.ndof).map(|_| rng.gen_range(-1.0..1.0)).collect();
                assert!(s.quadratic_form(&v) >= -1e-12, "k={k}");
            }
        }
    }

    /// |v^T S v| measured against the cancellation mass Σ |S_ij||v_i||v_j|,
    /// the scale at which "exactly zero" is meaningful in floating point.
    fn relative_quadratic_form(s: &crate::sparse::SparseOperator, v: &[f64]) -> f64 {
        let q = s.quadratic_form(v);
        let mut mass = 0.0;
        for r in 0..s.rows {
            let (cols, vals) = s.row(r);
            for (c, val) in cols.iter().zip(vals) {
                mass += val.abs() * v[r].abs() * v[*c].abs();
            }
        }
        q.abs() / mass.max(1.0)
    }

    #[test]
    fn affine_functions_are_in_the_kernel() {
        // Unit-weight problem so the bound is scale-free.
        let spec = make_cauchy_poisson(1);
        for (n, seed) in [(2usize, 0u64), (4, 7)] {
            let mesh = Arc::new(build_mesh(n, 0.2, seed).unwrap());
            let space = FeSpace::new(mesh, 1).unwrap();
            let s = assemble_scip(&space, &unit_params(1.0, 1.0), &spec);
            for (a, b, c) in [(1.0, 0.0, 0.0), (0.3, -1.2, 0.8), (0.0, 1.0, 1.0)] {
                let v = space.interpolate(|p| a + b * p.x + c * p.y);
                let q = relative_quadratic_form(&s, &v);
                assert!(q <= 1e-14, "n={n} ({a},{b},{c}): {q}");
            }
        }
    }

    #[test]
    fn global_quadratics_are_in_the_p2_kernel() {
        let spec = make_cauchy_poisson(2);
        let mesh = Arc::new(build_mesh(3, 0.15, 5).unwrap());
        let space = FeSpace::new(mesh, 2).unwrap();
        let s = assemble_scip(&space, &unit_params(1.0, 1.0), &spec);
        let v = space.interpolate(|p| 0.5 * p.x * p.x - p.x * p.y + 0.25 * p.y * p.y + p.x - 0.3);
        let q = relative_quadratic_form(&s, &v);
        assert!(q <= 1e-13, "quadratic kernel: {q}");
    }

    #[test]
    fn laplacian_term_is_inert_for_p1() {
        let mesh = Arc::new(build_mesh(3, 0.2, 2).unwrap());
        let space = FeSpace::new(mesh, 1).unwrap();
        let spec = make_dirichlet_cd(1);
        let s0 = assemble_scip(&space, &unit_params(0.7, 0.0), &spec);
        let s17 = assemble_scip(&space, &unit_params(0.7, 17.0), &spec);
        for r in 0..space.ndof {
            let (c0, v0) = s0.row(r);
            let (c1, v1) = s17.row(r);
            assert_eq!(c0, c1);
            for (a, b) in v0.iter().zip(v1) {
                assert_eq!(a, b);
            }
        }
    }

    /// Two unit-height cells split by the vertical face x = 1/2. The function
    /// v = x on the left and 2x − 1/2 on the right is continuous, its gradient
    /// jump across the middle face is (−1, 0), and every other face sees no
    /// jump. The quadratic form therefore equals the single face integral
    /// h_F γ₁ w1 |F| · 1.
    #[test]
    fn single_face_jump_value_by_hand() {
        let mesh = Mesh::from_raw(
            vec![
                Vec2::new(0.0, 0.0),
                Vec2::new(0.5, 0.0),
                Vec2::new(1.0, 0.0),
                Vec2::new(0.0, 1.0),
                Vec2::new(0.5, 1.0),
                Vec2::new(1.0, 1.0),
            ],
            vec![[0, 1, 4], [0, 4, 3], [1, 2, 5], [1, 5, 4]],
        )
        .unwrap();
        let space = FeSpace::new(Arc::new(mesh), 1).unwrap();
        let spec = make_cauchy_poisson(1); // w1 = μ = 1
        let s = assemble_scip(&space, &unit_params(1.0, 1.0), &spec);
        let v = space.interpolate(|p| if p.x <= 0.5 { p.x } else { 2.0 * p.x - 0.5 });
        let q = s.quadratic_form(&v);
        // h_F = |F| = 1, w1 = 1, γ₁ = 1, |[[∇v]]|² = 1.
        assert!((q - 1.0).abs() <= 1e-13, "face contribution {q}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn kernel_and_psd_hold_for_random_meshes(
            seed in 0u64..1000,
            a in -2.0f64..2.0,
            b in -2.0f64..2.0,
            c in -2.0f64..2.0,
        ) {
            let mesh = Arc::new(build_mesh(3, 0.2, seed).unwrap());
            let space = FeSpace::new(mesh, 1).unwrap();
            let spec = make_cauchy_poisson(1);
            let s = assemble_scip(&space, &unit_params(1.0, 1.0), &spec);
            let v = space.interpolate(|p| a + b * p.x + c * p.y);
            prop_assert!(relative_quadratic_form(&s, &v) <= 1e-13);
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
            let w: Vec<f64> = (0..space.ndof).map(|_| rng.gen_range(-1.0..1.0)).collect();
            prop_assert!(s.quadratic_form(&w) >= -1e-12);
        }
    }
}
