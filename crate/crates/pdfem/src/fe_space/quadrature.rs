//! Quadrature rules on the reference triangle and the unit edge.
//!
//! Rules are generated from Gauss–Legendre nodes (computed by Newton
//! iteration on the Legendre polynomials, so no tabulated constants are
//! needed). Triangle rules use the collapsed-square transform
//! (x, y) = (s, t(1-s)) with Jacobian (1-s), which keeps every weight
//! strictly positive and gives provable exactness degrees.

use crate::error::{Error, Result};

/// Highest exactness degree any integrand in this crate requires.
pub const MAX_DEGREE: usize = 8;

/// Entity a quadrature rule integrates over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QuadEntity {
    /// Reference triangle with vertices (0,0), (1,0), (0,1); measure 1/2.
    Triangle,
    /// Unit edge [0,1]; measure 1.
    Edge,
}

/// A positive-weight quadrature rule in barycentric coordinates.
///
/// Triangle points carry three barycentric coordinates; edge points use
/// `[1-t, t, 0]` for the parameter t along the edge. Weights are given in
/// the reference measure (they sum to 1/2 for the triangle, 1 for the edge).
#[derive(Clone, Debug)]
pub struct QuadratureRule {
    pub entity: QuadEntity,
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    /// Every polynomial of total degree <= `degree` is integrated exactly.
    pub degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Applies the rule to a function of the reference coordinates
    /// (x, y) for triangles, (t, 0) for edges.
    pub fn integrate(&self, mut f: impl FnMut(f64, f64) -> f64) -> f64 {
        let mut acc = 0.0;
        for (p, w) in self.points.iter().zip(&self.weights) {
            let (x, y) = match self.entity {
                QuadEntity::Triangle => (p[1], p[2]),
                QuadEntity::Edge => (p[1], 0.0),
            };
            acc += w * f(x, y);
        }
        acc
    }
}

/// Builds a rule of exactness at least `degree` on the requested entity.
/// Degrees above [`MAX_DEGREE`] are rejected; nothing here needs them.
pub fn make_quadrature(entity: QuadEntity, degree: usize) -> Result<QuadratureRule> {
    if degree > MAX_DEGREE {
        return Err(Error::UnsupportedQuadratureDegree(degree));
    }
    let degree = degree.max(1);
    match entity {
        QuadEntity::Edge => {
            let m = degree / 2 + 1; // 2m-1 >= degree
            let (nodes, weights) = gauss_legendre_unit(m);
            let points = nodes.iter().map(|&t| [1.0 - t, t, 0.0]).collect();
            Ok(QuadratureRule {
                entity,
                points,
                weights,
                degree,
            })
        }
        QuadEntity::Triangle => {
            // Degree d integrand becomes degree d+1 in s and d in t after the
            // collapse, so the s-direction needs one extra exactness order.
            let ms = (degree + 3) / 2;
            let mt = (degree + 2) / 2;
            let (sn, sw) = gauss_legendre_unit(ms);
            let (tn, tw) = gauss_legendre_unit(mt);
            let mut points = Vec::with_capacity(ms * mt);
            let mut weights = Vec::with_capacity(ms * mt);
            for (&s, &ws) in sn.iter().zip(&sw) {
                for (&t, &wt) in tn.iter().zip(&tw) {
                    let x = s;
                    let y = t * (1.0 - s);
                    points.push([1.0 - x - y, x, y]);
                    weights.push(ws * wt * (1.0 - s));
                }
            }
            Ok(QuadratureRule {
                entity,
                points,
                weights,
                degree,
            })
        }
    }
}

/// Gauss–Legendre nodes and weights on [0,1].
fn gauss_legendre_unit(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; m];
    let mut weights = vec![0.0; m];
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_m.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre_and_derivative(m, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre_and_derivative(m, x);
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (x + 1.0);
        weights[i] = 0.5 * w;
    }
    // Ascending order, purely for readability of dumps.
    let mut idx: Vec<usize> = (0..m).collect();
    idx.sort_by(|&a, &b| nodes[a].total_cmp(&nodes[b]));
    (
        idx.iter().map(|&i| nodes[i]).collect(),
        idx.iter().map(|&i| weights[i]).collect(),
    )
}

fn legendre_and_derivative(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if m == 0 {
        return (1.0, 0.0);
    }
    let dp = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exact integral of x^a y^b over the reference triangle: a! b! / (a+b+2)!.
    fn tri_monomial(a: u32, b: u32) -> f64 {
        let fact = |n: u32| (1..=n).map(|k| k as f64).product::<f64>().max(1.0);
        fact(a) * fact(b) / fact(a + b + 2)
    }

    #[test]
    fn triangle_rules_integrate_monomials() {
        for degree in 1..=MAX_DEGREE {
            let rule = make_quadrature(QuadEntity::Triangle, degree).unwrap();
            for a in 0..=degree as u32 {
                for b in 0..=(degree as u32 - a) {
                    let got = rule.integrate(|x, y| x.powi(a as i32) * y.powi(b as i32));
                    let want = tri_monomial(a, b);
                    assert!(
                        (got - want).abs() <= 1e-14 * want.abs().max(1.0),
                        "deg {degree} x^{a} y^{b}: got {got}, want {want}"
                    );
                }
            }
        }
    }

    #[test]
    fn edge_rules_integrate_monomials() {
        for degree in 1..=MAX_DEGREE {
            let rule = make_quadrature(QuadEntity::Edge, degree).unwrap();
            for a in 0..=degree as u32 {
                let got = rule.integrate(|t, _| t.powi(a as i32));
                let want = 1.0 / (a as f64 + 1.0);
                assert!(
                    (got - want).abs() <= 1e-14 * want.abs().max(1.0),
                    "deg {degree} t^{a}: got {got}, want {want}"
                );
            }
        }
    }

    #[test]
    fn weights_positive_and_sum_to_measure() {
        for degree in 1..=MAX_DEGREE {
            let tri = make_quadrature(QuadEntity::Triangle, degree).unwrap();
            assert!(tri.weights.iter().all(|&w| w > 0.0));
            let sum: f64 = tri.weights.iter().sum();
            assert!((sum - 0.5).abs() <= 1e-14);

            let edge = make_quadrature(QuadEntity::Edge, degree).unwrap();
            assert!(edge.weights.iter().all(|&w| w > 0.0));
            let sum: f64 = edge.weights.iter().sum();
            assert!((sum - 1.0).abs() <= 1e-14);
        }
    }

    #[test]
    fn specific_values() {
        let tri2 = make_quadrature(QuadEntity::Triangle, 2).unwrap();
        // Constant 1 integrates to the reference area 1/2.
        assert!((tri2.integrate(|_, _| 1.0) - 0.5).abs() <= 1e-15);
        // x*y over the reference triangle is 1/24.
        assert!((tri2.integrate(|x, y| x * y) - 1.0 / 24.0).abs() <= 1e-15);
        // x on the unit edge is 1/2.
        let edge1 = make_quadrature(QuadEntity::Edge, 1).unwrap();
        assert!((edge1.integrate(|t, _| t) - 0.5).abs() <= 1e-15);
    }

    #[test]
    fn rejects_unsupported_degree() {
        assert!(matches!(
            make_quadrature(QuadEntity::Triangle, 9),
            Err(Error::UnsupportedQuadratureDegree(9))
        ));
    }
}
