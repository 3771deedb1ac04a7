//! Triangulations of the unit square Ω = (0,1)×(0,1).
//!
//! Meshes are structured n×n grids in which every cell is split into two
//! triangles. The split diagonal alternates per cell (union-jack pattern) so
//! that convection tests see no preferred direction. Interior vertices may be
//! displaced by a seeded pseudo-random offset to break structure while
//! keeping the family quasi-uniform; boundary vertices never move.
//!
//! Face conventions used throughout the crate:
//! - a face stores its two endpoint vertices with the smaller index first,
//! - `triangles[0]` is the first triangle that registered the face, the
//!   stored unit normal points out of `triangles[0]` (into `triangles[1]`
//!   for interior faces, out of Ω for boundary faces),
//! - the jump `[[v]]` across an interior face is the trace from
//!   `triangles[0]` minus the trace from `triangles[1]`.

use crate::error::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Geometric tolerance for boundary classification.
const GEOM_TOL: f64 = 1e-12;

/// A point or vector in the plane.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.dot(self).sqrt()
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

/// Which side of the unit square a boundary face lies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    /// x = 0
    Left,
    /// x = 1
    Right,
    /// y = 0
    Bottom,
    /// y = 1
    Top,
}

impl BoundaryTag {
    pub const ALL: [BoundaryTag; 4] = [
        BoundaryTag::Left,
        BoundaryTag::Right,
        BoundaryTag::Bottom,
        BoundaryTag::Top,
    ];
}

/// A unique edge of the triangulation.
#[derive(Clone, Debug)]
pub struct Face {
    /// Endpoint vertex indices, smaller index first.
    pub vertices: [usize; 2],
    /// Adjacent triangles; `triangles[1]` is `None` on the boundary.
    pub triangles: (usize, Option<usize>),
    /// Unit normal pointing out of `triangles.0`.
    pub normal: Vec2,
    /// Face length h_F.
    pub length: f64,
    /// Boundary classification, `None` for interior faces.
    pub tag: Option<BoundaryTag>,
}

impl Face {
    pub fn is_interior(&self) -> bool {
        self.triangles.1.is_some()
    }

    /// Midpoint of the face.
    pub fn midpoint(&self, mesh: &Mesh) -> Vec2 {
        let a = mesh.vertices[self.vertices[0]];
        let b = mesh.vertices[self.vertices[1]];
        (a + b) * 0.5
    }

    /// Physical point at parameter t ∈ [0,1] along the face.
    pub fn point_at(&self, mesh: &Mesh, t: f64) -> Vec2 {
        let a = mesh.vertices[self.vertices[0]];
        let b = mesh.vertices[self.vertices[1]];
        a + (b - a) * t
    }
}

/// Answer of [`Mesh::face_geometry`]: everything assembly needs to integrate
/// over one face with a consistent orientation.
#[derive(Clone, Copy, Debug)]
pub struct FaceGeometry {
    /// Unit normal pointing out of the first adjacent triangle.
    pub normal: Vec2,
    /// Face length h_F.
    pub length: f64,
    /// Adjacent triangles in stored order.
    pub triangles: (usize, Option<usize>),
}

/// Immutable triangulation of the unit square.
#[derive(Clone, Debug)]
pub struct Mesh {
    /// Vertex coordinates in [0,1]².
    pub vertices: Vec<Vec2>,
    /// Vertex indices per triangle, counterclockwise.
    pub triangles: Vec<[usize; 3]>,
    /// Unique edges with adjacency, orientation and boundary tags.
    pub faces: Vec<Face>,
    /// Face indices of each triangle (unordered).
    pub triangle_faces: Vec<[usize; 3]>,
    /// Maximum triangle diameter.
    pub h: f64,
}

impl Mesh {
    /// Assembles connectivity from raw vertices and triangles and validates
    /// all mesh invariants. Triangles must be counterclockwise.
    pub fn from_raw(vertices: Vec<Vec2>, triangles: Vec<[usize; 3]>) -> Result<Mesh> {
        build_connectivity(vertices, triangles)
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_faces(&self) -> usize {
        self.faces.len()
    }

    pub fn interior_faces(&self) -> impl Iterator<Item = (usize, &Face)> {
        self.faces
            .iter()
            .enumerate()
            .filter(|(_, f)| f.is_interior())
    }

    pub fn boundary_faces(&self) -> impl Iterator<Item = (usize, &Face)> {
        self.faces
            .iter()
            .enumerate()
            .filter(|(_, f)| !f.is_interior())
    }

    /// Corner coordinates of a triangle.
    pub fn triangle_coords(&self, t: usize) -> [Vec2; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Signed area of a triangle (positive for counterclockwise orientation).
    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_coords(t);
        0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
    }

    /// Diameter h_K of a triangle (its longest edge).
    pub fn triangle_diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangle_coords(t);
        (b - a).norm().max((c - b).norm()).max((a - c).norm())
    }

    pub fn triangle_centroid(&self, t: usize) -> Vec2 {
        let [a, b, c] = self.triangle_coords(t);
        Vec2::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0)
    }

    /// Normal, length and adjacency of a face. The normal points from the
    /// first-listed triangle into the second (interior) or out of the domain
    /// (boundary); jumps are trace-from-first minus trace-from-second.
    pub fn face_geometry(&self, face: usize) -> FaceGeometry {
        let f = &self.faces[face];
        FaceGeometry {
            normal: f.normal,
            length: f.length,
            triangles: f.triangles,
        }
    }

    /// Plain-text dump of the mesh for debugging: vertex list, triangle list
    /// and tagged boundary faces. The format is documented in the README.
    pub fn to_plain_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        writeln!(out, "vertices {}", self.vertices.len()).unwrap();
        for v in &self.vertices {
            writeln!(out, "{:.17e} {:.17e}", v.x, v.y).unwrap();
        }
        writeln!(out, "triangles {}", self.triangles.len()).unwrap();
        for t in &self.triangles {
            writeln!(out, "{} {} {}", t[0], t[1], t[2]).unwrap();
        }
        let nb = self.boundary_faces().count();
        writeln!(out, "boundary_faces {}", nb).unwrap();
        for (_, f) in self.boundary_faces() {
            writeln!(
                out,
                "{} {} {:?}",
                f.vertices[0],
                f.vertices[1],
                f.tag.expect("boundary face has tag")
            )
            .unwrap();
        }
        out
    }
}

/// Builds a triangulation of the unit square with `n` cells per side.
///
/// Each cell is split into two triangles along a diagonal whose direction
/// alternates per cell. Interior vertices are displaced by a reproducible
/// pseudo-random offset of at most `perturbation / n` in each coordinate;
/// boundary vertices stay put. `perturbation` must lie in [0, 0.25]: larger
/// values can invert triangles.
pub fn build_mesh(n: usize, perturbation: f64, seed: u64) -> Result<Mesh> {
    if n < 1 {
        return Err(Error::Mesh("n must be at least 1".into()));
    }
    if !(0.0..=0.25).contains(&perturbation) {
        return Err(Error::Mesh(format!(
            "perturbation {perturbation} outside [0, 0.25]"
        )));
    }

    let np = n + 1;
    let dx = 1.0 / n as f64;
    let mut vertices = Vec::with_capacity(np * np);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amp = perturbation * dx;
    for j in 0..np {
        for i in 0..np {
            let mut p = Vec2::new(i as f64 * dx, j as f64 * dx);
            let interior = i > 0 && i < n && j > 0 && j < n;
            if interior && amp > 0.0 {
                // Draw for every interior vertex in a fixed order so that the
                // mesh is a pure function of (n, perturbation, seed).
                p.x += rng.gen_range(-amp..=amp);
                p.y += rng.gen_range(-amp..=amp);
            }
            vertices.push(p);
        }
    }

    let vid = |i: usize, j: usize| j * np + i;
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let v00 = vid(i, j);
            let v10 = vid(i + 1, j);
            let v01 = vid(i, j + 1);
            let v11 = vid(i + 1, j + 1);
            if (i + j) % 2 == 0 {
                // Diagonal v00-v11.
                triangles.push([v00, v10, v11]);
                triangles.push([v00, v11, v01]);
            } else {
                // Diagonal v10-v01.
                triangles.push([v00, v10, v01]);
                triangles.push([v10, v11, v01]);
            }
        }
    }

    build_connectivity(vertices, triangles)
}

fn build_connectivity(vertices: Vec<Vec2>, triangles: Vec<[usize; 3]>) -> Result<Mesh> {
    let nv = vertices.len();
    for (t, tri) in triangles.iter().enumerate() {
        if tri.iter().any(|&v| v >= nv) {
            return Err(Error::Mesh(format!("triangle {t} references missing vertex")));
        }
    }

    // Collect unique edges; the map key is the sorted endpoint pair so the
    // face numbering is independent of traversal order.
    let mut edge_map: std::collections::BTreeMap<(usize, usize), (usize, Option<usize>)> =
        std::collections::BTreeMap::new();
    for (t, tri) in triangles.iter().enumerate() {
        for e in 0..3 {
            let a = tri[e];
            let b = tri[(e + 1) % 3];
            let key = (a.min(b), a.max(b));
            match edge_map.get_mut(&key) {
                None => {
                    edge_map.insert(key, (t, None));
                }
                Some((_, second @ None)) => *second = Some(t),
                Some(_) => {
                    return Err(Error::Mesh(format!(
                        "edge {key:?} is shared by more than two triangles"
                    )))
                }
            }
        }
    }

    let mut faces = Vec::with_capacity(edge_map.len());
    let mut face_index: std::collections::BTreeMap<(usize, usize), usize> =
        std::collections::BTreeMap::new();
    for (&(a, b), &(t0, t1)) in &edge_map {
        let pa = vertices[a];
        let pb = vertices[b];
        let d = pb - pa;
        let length = d.norm();
        if length <= 0.0 {
            return Err(Error::Mesh(format!("degenerate face between {a} and {b}")));
        }
        let mut normal = Vec2::new(d.y / length, -d.x / length);
        // Orient the normal out of the first adjacent triangle.
        let c0 = {
            let [p, q, r] = [
                vertices[triangles[t0][0]],
                vertices[triangles[t0][1]],
                vertices[triangles[t0][2]],
            ];
            Vec2::new((p.x + q.x + r.x) / 3.0, (p.y + q.y + r.y) / 3.0)
        };
        let mid = (pa + pb) * 0.5;
        if normal.dot(mid - c0) < 0.0 {
            normal = Vec2::new(-normal.x, -normal.y);
        }
        let tag = if t1.is_none() {
            Some(classify_boundary(pa, pb).ok_or_else(|| {
                Error::Mesh(format!(
                    "boundary face ({a},{b}) does not lie on a side of the unit square"
                ))
            })?)
        } else {
            None
        };
        face_index.insert((a, b), faces.len());
        faces.push(Face {
            vertices: [a, b],
            triangles: (t0, t1),
            normal,
            length,
            tag,
        });
    }

    let mut triangle_faces = Vec::with_capacity(triangles.len());
    for tri in &triangles {
        let mut tf = [0usize; 3];
        for e in 0..3 {
            let a = tri[e];
            let b = tri[(e + 1) % 3];
            tf[e] = face_index[&(a.min(b), a.max(b))];
        }
        triangle_faces.push(tf);
    }

    let mut mesh = Mesh {
        vertices,
        triangles,
        faces,
        triangle_faces,
        h: 0.0,
    };
    mesh.h = (0..mesh.num_triangles())
        .map(|t| mesh.triangle_diameter(t))
        .fold(0.0, f64::max);
    validate(&mesh)?;
    Ok(mesh)
}

fn classify_boundary(a: Vec2, b: Vec2) -> Option<BoundaryTag> {
    let on = |va: f64, vb: f64, target: f64| (va - target).abs() <= GEOM_TOL && (vb - target).abs() <= GEOM_TOL;
    if on(a.x, b.x, 0.0) {
        Some(BoundaryTag::Left)
    } else if on(a.x, b.x, 1.0) {
        Some(BoundaryTag::Right)
    } else if on(a.y, b.y, 0.0) {
        Some(BoundaryTag::Bottom)
    } else if on(a.y, b.y, 1.0) {
        Some(BoundaryTag::Top)
    } else {
        None
    }
}

fn validate(mesh: &Mesh) -> Result<()> {
    let mut min_diam = f64::INFINITY;
    let mut max_diam: f64 = 0.0;
    for t in 0..mesh.num_triangles() {
        let area = mesh.triangle_area(t);
        if area <= 0.0 {
            return Err(Error::Mesh(format!(
                "triangle {t} has non-positive signed area {area:.3e}"
            )));
        }
        let d = mesh.triangle_diameter(t);
        min_diam = min_diam.min(d);
        max_diam = max_diam.max(d);
    }
    if max_diam / min_diam > 4.0 {
        return Err(Error::Mesh(format!(
            "quasi-uniformity violated: max/min diameter = {:.3}",
            max_diam / min_diam
        )));
    }
    // Euler relation for the simply connected square.
    let euler = mesh.num_vertices() as i64 - mesh.num_faces() as i64 + mesh.num_triangles() as i64;
    if euler != 1 {
        return Err(Error::Mesh(format!("Euler relation violated: V-E+T = {euler}")));
    }
    for (idx, f) in mesh.faces.iter().enumerate() {
        let shared = |t: usize| {
            f.vertices
                .iter()
                .all(|v| mesh.triangles[t].contains(v))
        };
        if !shared(f.triangles.0) || f.triangles.1.map(|t| !shared(t)).unwrap_or(false) {
            return Err(Error::Mesh(format!(
                "face {idx} is not an edge of its adjacent triangles"
            )));
        }
    }
    Ok(())
}
