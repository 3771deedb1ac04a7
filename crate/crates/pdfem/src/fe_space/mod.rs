//! Continuous Lagrange finite element spaces X_h^k on triangles, k = 1, 2.
//!
//! Degrees of freedom are point values: at the vertices for k = 1, at the
//! vertices and edge midpoints for k = 2. Shared dofs carry identical global
//! indices, which is what makes the space globally continuous. Basis values,
//! physical gradients and physical second derivatives are evaluated through
//! the affine element map; second derivatives are analytic (zero for k = 1,
//! constant per element for k = 2).

mod quadrature;

pub use quadrature::{make_quadrature, QuadEntity, QuadratureRule, MAX_DEGREE};

use crate::error::{Error, Result};
use crate::mesh::{Mesh, Vec2};
use std::sync::Arc;

/// Values, gradients and second derivatives of all local shape functions at
/// one point. Hessians are stored as `[d_xx, d_xy, d_yy]`.
#[derive(Clone, Debug)]
pub struct BasisEval {
    pub values: Vec<f64>,
    pub gradients: Vec<Vec2>,
    pub hessians: Vec<[f64; 3]>,
}

impl BasisEval {
    pub fn laplacian(&self, local: usize) -> f64 {
        self.hessians[local][0] + self.hessians[local][2]
    }
}

/// Affine map x = a + J ξ from the reference triangle to a physical one.
#[derive(Clone, Copy, Debug)]
pub struct ElementMap {
    pub origin: Vec2,
    /// Columns of the Jacobian.
    pub j: [Vec2; 2],
    /// Rows of the inverse Jacobian.
    pub inv: [Vec2; 2],
    pub det: f64,
}

impl ElementMap {
    pub fn new(coords: [Vec2; 3]) -> Self {
        let c0 = coords[1] - coords[0];
        let c1 = coords[2] - coords[0];
        let det = c0.x * c1.y - c1.x * c0.y;
        let inv = [
            Vec2::new(c1.y / det, -c1.x / det),
            Vec2::new(-c0.y / det, c0.x / det),
        ];
        Self {
            origin: coords[0],
            j: [c0, c1],
            inv,
            det,
        }
    }

    pub fn to_physical(&self, xi: f64, eta: f64) -> Vec2 {
        self.origin + self.j[0] * xi + self.j[1] * eta
    }

    /// Inverse of the affine map; exact for straight triangles.
    pub fn to_reference(&self, p: Vec2) -> (f64, f64) {
        let d = p - self.origin;
        (self.inv[0].dot(d), self.inv[1].dot(d))
    }
}

/// Continuous Lagrange space of degree k over a shared mesh.
#[derive(Clone, Debug)]
pub struct FeSpace {
    pub mesh: Arc<Mesh>,
    pub degree: usize,
    pub ndof: usize,
    /// Physical coordinates of every dof.
    pub dof_coords: Vec<Vec2>,
    /// Global dof indices per element; 3 entries for k=1, 6 for k=2
    /// (vertices first, then midpoints of edges (0,1), (1,2), (2,0)).
    pub element_dofs: Vec<Vec<usize>>,
    /// Global dof indices on each face (endpoints, then midpoint for k=2).
    pub face_dofs: Vec<Vec<usize>>,
    /// Element rule of exactness 2k+4, used for all volume integrals.
    pub tri_rule: QuadratureRule,
    /// Edge rule of exactness 2k+2, used for all face integrals.
    pub edge_rule: QuadratureRule,
}

impl FeSpace {
    pub fn new(mesh: Arc<Mesh>, degree: usize) -> Result<FeSpace> {
        if !(1..=2).contains(&degree) {
            return Err(Error::Assembly(format!(
                "unsupported polynomial degree {degree}; only k = 1, 2 are available"
            )));
        }
        let nv = mesh.num_vertices();
        let nf = mesh.num_faces();
        let ndof = if degree == 1 { nv } else { nv + nf };

        let mut dof_coords: Vec<Vec2> = mesh.vertices.clone();
        if degree == 2 {
            for f in &mesh.faces {
                let a = mesh.vertices[f.vertices[0]];
                let b = mesh.vertices[f.vertices[1]];
                dof_coords.push((a + b) * 0.5);
            }
        }

        let mut element_dofs = Vec::with_capacity(mesh.num_triangles());
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let mut dofs: Vec<usize> = tri.to_vec();
            if degree == 2 {
                for e in 0..3 {
                    dofs.push(nv + mesh.triangle_faces[t][e]);
                }
            }
            element_dofs.push(dofs);
        }

        let mut face_dofs = Vec::with_capacity(nf);
        for (fi, f) in mesh.faces.iter().enumerate() {
            let mut dofs = f.vertices.to_vec();
            if degree == 2 {
                dofs.push(nv + fi);
            }
            face_dofs.push(dofs);
        }

        let tri_rule = make_quadrature(QuadEntity::Triangle, 2 * degree + 4)?;
        let edge_rule = make_quadrature(QuadEntity::Edge, 2 * degree + 2)?;

        Ok(FeSpace {
            mesh,
            degree,
            ndof,
            dof_coords,
            element_dofs,
            face_dofs,
            tri_rule,
            edge_rule,
        })
    }

    pub fn dofs_per_element(&self) -> usize {
        if self.degree == 1 {
            3
        } else {
            6
        }
    }

    pub fn element_map(&self, element: usize) -> ElementMap {
        ElementMap::new(self.mesh.triangle_coords(element))
    }

    /// Evaluates all local shape functions of `element` at a reference point,
    /// returning values together with physical gradients and Hessians.
    pub fn eval_basis(&self, element: usize, xi: f64, eta: f64) -> BasisEval {
        let map = self.element_map(element);
        self.eval_basis_mapped(&map, xi, eta)
    }

    /// Same as [`eval_basis`](Self::eval_basis) with a precomputed map.
    pub fn eval_basis_mapped(&self, map: &ElementMap, xi: f64, eta: f64) -> BasisEval {
        let lambda = [1.0 - xi - eta, xi, eta];
        // Reference gradients of the barycentric coordinates.
        let dl = [Vec2::new(-1.0, -1.0), Vec2::new(1.0, 0.0), Vec2::new(0.0, 1.0)];

        let push_physical = |g: Vec2| -> Vec2 {
            // Physical gradient: J^{-T} applied to the reference gradient.
            Vec2::new(
                map.inv[0].x * g.x + map.inv[1].x * g.y,
                map.inv[0].y * g.x + map.inv[1].y * g.y,
            )
        };

        if self.degree == 1 {
            let values = lambda.to_vec();
            let gradients = dl.iter().map(|&g| push_physical(g)).collect();
            let hessians = vec![[0.0; 3]; 3];
            return BasisEval {
                values,
                gradients,
                hessians,
            };
        }

        let mut values = Vec::with_capacity(6);
        let mut ref_grads = Vec::with_capacity(6);
        let mut ref_hess = Vec::with_capacity(6);
        for i in 0..3 {
            values.push(lambda[i] * (2.0 * lambda[i] - 1.0));
            ref_grads.push(dl[i] * (4.0 * lambda[i] - 1.0));
            // H(λ(2λ−1)) = 4 ∇λ ∇λᵀ = 2 (∇λ ∇λᵀ + ∇λ ∇λᵀ).
            ref_hess.push(outer_sym(dl[i], dl[i], 2.0));
        }
        for (i, j) in [(0usize, 1usize), (1, 2), (2, 0)] {
            values.push(4.0 * lambda[i] * lambda[j]);
            ref_grads.push(dl[i] * (4.0 * lambda[j]) + dl[j] * (4.0 * lambda[i]));
            // H(4λᵢλⱼ) = 4 (∇λᵢ ∇λⱼᵀ + ∇λⱼ ∇λᵢᵀ).
            ref_hess.push(outer_sym(dl[i], dl[j], 4.0));
        }

        let gradients: Vec<Vec2> = ref_grads.into_iter().map(push_physical).collect();
        let hessians = ref_hess
            .into_iter()
            .map(|h| push_hessian(map, h))
            .collect();
        BasisEval {
            values,
            gradients,
            hessians,
        }
    }

    /// Nodal Lagrange interpolant: point values of `f` at the dof coordinates.
    pub fn interpolate(&self, f: impl Fn(Vec2) -> f64) -> Vec<f64> {
        self.dof_coords.iter().map(|&p| f(p)).collect()
    }

    /// Value of a dof vector at a reference point of an element.
    pub fn value_at(&self, u: &[f64], element: usize, xi: f64, eta: f64) -> f64 {
        let basis = self.eval_basis(element, xi, eta);
        self.element_dofs[element]
            .iter()
            .zip(&basis.values)
            .map(|(&d, &v)| u[d] * v)
            .sum()
    }
}

/// scale · (a bᵀ + b aᵀ), stored as [xx, xy, yy].
fn outer_sym(a: Vec2, b: Vec2, scale: f64) -> [f64; 3] {
    [
        2.0 * scale * a.x * b.x,
        scale * (a.x * b.y + a.y * b.x),
        2.0 * scale * a.y * b.y,
    ]
}

/// Physical Hessian J^{-T} H_ref J^{-1} for an affine map.
fn push_hessian(map: &ElementMap, h: [f64; 3]) -> [f64; 3] {
    // inv rows are the rows of J^{-1}; (J^{-T} H J^{-1})_{ab} =
    // sum_{cd} inv[c].component(a) * H_{cd} * inv[d].component(b).
    let inv = map.inv;
    let href = [[h[0], h[1]], [h[1], h[2]]];
    let mut out = [[0.0; 2]; 2];
    let col = |r: Vec2, a: usize| if a == 0 { r.x } else { r.y };
    for a in 0..2 {
        for b in 0..2 {
            let mut s = 0.0;
            for c in 0..2 {
                for d in 0..2 {
                    s += col(inv[c], a) * href[c][d] * col(inv[d], b);
                }
            }
            out[a][b] = s;
        }
    }
    [out[0][0], out[0][1], out[1][1]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_mesh;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn space(n: usize, perturb: f64, seed: u64, k: usize) -> FeSpace {
        let mesh = Arc::new(build_mesh(n, perturb, seed).unwrap());
        FeSpace::new(mesh, k).unwrap()
    }

    #[test]
    fn dof_counts() {
        let m = build_mesh(4, 0.0, 0).unwrap();
        let (nv, nf) = (m.num_vertices(), m.num_faces());
        let s1 = FeSpace::new(Arc::new(m.clone()), 1).unwrap();
        assert_eq!(s1.ndof, nv);
        let s2 = FeSpace::new(Arc::new(m), 2).unwrap();
        assert_eq!(s2.ndof, nv + nf);
    }

    #[test]
    fn rejects_bad_degree() {
        let mesh = Arc::new(build_mesh(2, 0.0, 0).unwrap());
        assert!(FeSpace::new(mesh.clone(), 0).is_err());
        assert!(FeSpace::new(mesh, 3).is_err());
    }

    #[test]
    fn lagrange_delta_property() {
        for k in [1usize, 2] {
            let s = space(3, 0.2, 4, k);
            for t in 0..s.mesh.num_triangles() {
                let map = s.element_map(t);
                for (local, &dof) in s.element_dofs[t].iter().enumerate() {
                    let (xi, eta) = map.to_reference(s.dof_coords[dof]);
                    let basis = s.eval_basis(t, xi, eta);
                    for (other, &v) in basis.values.iter().enumerate() {
                        let want = if other == local { 1.0 } else { 0.0 };
                        assert!(
                            (v - want).abs() <= 1e-12,
                            "k={k} t={t} local={local} other={other}: {v}"
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn partition_of_unity_at_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for k in [1usize, 2] {
            let s = space(3, 0.15, 8, k);
            for t in 0..s.mesh.num_triangles() {
                for _ in 0..20 {
                    let mut xi: f64 = rng.gen_range(0.0..1.0);
                    let mut eta: f64 = rng.gen_range(0.0..1.0);
                    if xi + eta > 1.0 {
                        (xi, eta) = (1.0 - xi, 1.0 - eta);
                    }
                    let basis = s.eval_basis(t, xi, eta);
                    let sum: f64 = basis.values.iter().sum();
                    assert!((sum - 1.0).abs() <= 1e-13, "k={k} sum={sum}");
                }
            }
        }
    }

    #[test]
    fn reference_gradient_of_first_barycentric() {
        // Identity map: triangle (0,0),(1,0),(0,1); grad of λ0 = 1-x-y is (-1,-1).
        let mesh = Mesh::from_raw(
            vec![
                Vec2::new(0.0, 0.0),
                Vec2::new(1.0, 0.0),
                Vec2::new(0.0, 1.0),
                Vec2::new(1.0, 1.0),
            ],
            vec![[0, 1, 2], [1, 3, 2]],
        )
        .unwrap();
        let s = FeSpace::new(Arc::new(mesh), 1).unwrap();
        let basis = s.eval_basis(0, 0.25, 0.25);
        assert!((basis.gradients[0].x + 1.0).abs() <= 1e-14);
        assert!((basis.gradients[0].y + 1.0).abs() <= 1e-14);
    }

    #[test]
    fn p2_midpoint_basis_is_nodal() {
        let s = space(2, 0.0, 0, 2);
        // Local dof 3 is the midpoint of edge (0,1): reference point (1/2, 0).
        let basis = s.eval_basis(0, 0.5, 0.0);
        assert!((basis.values[3] - 1.0).abs() <= 1e-14);
        for v in [basis.values[0], basis.values[1], basis.values[2]] {
            assert!(v.abs() <= 1e-14);
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let step = 1e-6;
        for k in [1usize, 2] {
            let s = space(2, 0.2, 5, k);
            for t in 0..s.mesh.num_triangles() {
                let map = s.element_map(t);
                for _ in 0..5 {
                    let xi: f64 = rng.gen_range(0.2..0.4);
                    let eta: f64 = rng.gen_range(0.2..0.4);
                    let p = map.to_physical(xi, eta);
                    let basis = s.eval_basis(t, xi, eta);
                    for local in 0..s.dofs_per_element() {
                        let value_at = |q: Vec2| {
                            let (a, b) = map.to_reference(q);
                            s.eval_basis(t, a, b).values[local]
                        };
                        let fd_x = (value_at(Vec2::new(p.x + step, p.y))
                            - value_at(Vec2::new(p.x - step, p.y)))
                            / (2.0 * step);
                        let fd_y = (value_at(Vec2::new(p.x, p.y + step))
                            - value_at(Vec2::new(p.x, p.y - step)))
                            / (2.0 * step);
                        assert!((basis.gradients[local].x - fd_x).abs() <= 1e-6);
                        assert!((basis.gradients[local].y - fd_y).abs() <= 1e-6);
                    }
                }
            }
        }
    }

    #[test]
    fn hessians_zero_for_p1_and_match_fd_for_p2() {
        let s1 = space(2, 0.1, 6, 1);
        let b = s1.eval_basis(0, 0.3, 0.3);
        assert!(b.hessians.iter().all(|h| h.iter().all(|&v| v == 0.0)));

        let s2 = space(2, 0.1, 6, 2);
        let step = 1e-5;
        for t in 0..s2.mesh.num_triangles() {
            let map = s2.element_map(t);
            let p = map.to_physical(0.25, 0.25);
            let basis = s2.eval_basis(t, 0.25, 0.25);
            for local in 0..6 {
                let grad_at = |q: Vec2| {
                    let (a, b) = map.to_reference(q);
                    s2.eval_basis(t, a, b).gradients[local]
                };
                let gxp = grad_at(Vec2::new(p.x + step, p.y));
                let gxm = grad_at(Vec2::new(p.x - step, p.y));
                let gyp = grad_at(Vec2::new(p.x, p.y + step));
                let gym = grad_at(Vec2::new(p.x, p.y - step));
                let h = basis.hessians[local];
                assert!((h[0] - (gxp.x - gxm.x) / (2.0 * step)).abs() <= 1e-7);
                assert!((h[1] - (gyp.x - gym.x) / (2.0 * step)).abs() <= 1e-7);
                assert!((h[2] - (gyp.y - gym.y) / (2.0 * step)).abs() <= 1e-7);
            }
        }
    }

    #[test]
    fn traces_agree_across_interior_faces() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for k in [1usize, 2] {
            let s = space(8, 0.2, 21, k);
            let u: Vec<f64> = (0..s.ndof).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let interior: Vec<usize> = s
                .mesh
                .interior_faces()
                .map(|(i, _)| i)
                .collect();
            for _ in 0..50 {
                let fi = interior[rng.gen_range(0..interior.len())];
                let f = &s.mesh.faces[fi];
                let (t0, t1) = (f.triangles.0, f.triangles.1.unwrap());
                for t_par in [0.21, 0.5, 0.86] {
                    let p = f.point_at(&s.mesh, t_par);
                    let (x0, y0) = s.element_map(t0).to_reference(p);
                    let (x1, y1) = s.element_map(t1).to_reference(p);
                    let v0 = s.value_at(&u, t0, x0, y0);
                    let v1 = s.value_at(&u, t1, x1, y1);
                    assert!((v0 - v1).abs() <= 1e-12, "k={k} face {fi}: {v0} vs {v1}");
                }
            }
        }
    }

    #[test]
    fn interpolate_constant_and_affine() {
        let s = space(3, 0.2, 2, 1);
        let ones = s.interpolate(|_| 1.0);
        assert!(ones.iter().all(|&v| v == 1.0));

        let affine = |p: Vec2| 0.4 + 1.3 * p.x - 0.7 * p.y;
        let u = s.interpolate(affine);
        // P1 reproduces affine functions exactly at every quadrature point.
        for t in 0..s.mesh.num_triangles() {
            let map = s.element_map(t);
            for p in &s.tri_rule.points {
                let (xi, eta) = (p[1], p[2]);
                let x = map.to_physical(xi, eta);
                assert!((s.value_at(&u, t, xi, eta) - affine(x)).abs() <= 1e-13);
            }
        }
    }
}
