//! Conforming triangulations of the square `(-1, 1)²` and red refinement.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{LdgError, Result};

/// Reference-triangle vertices.
pub const REF_VERTICES: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

/// A mesh edge. The vertex order follows the counterclockwise orientation of
/// `plus`, so the normal (outward from `plus`) is the tangent rotated
/// clockwise. On boundary faces it is the outward normal of the domain.
#[derive(Clone, Debug, PartialEq)]
pub struct Face {
    pub vertices: [usize; 2],
    pub plus: usize,
    pub minus: Option<usize>,
    /// Local edge index of the face in `plus` (and `minus`).
    pub local_plus: usize,
    pub local_minus: Option<usize>,
    pub normal: [f64; 2],
    pub length: f64,
}

impl Face {
    pub fn is_boundary(&self) -> bool {
        self.minus.is_none()
    }

    /// Elements of the face patch `S_γ`.
    pub fn patch(&self) -> impl Iterator<Item = usize> + '_ {
        std::iter::once(self.plus).chain(self.minus)
    }

    /// Physical point at edge parameter `t ∈ [0, 1]`.
    pub fn point(&self, mesh: &Mesh, t: f64) -> [f64; 2] {
        let a = mesh.vertices[self.vertices[0]];
        let b = mesh.vertices[self.vertices[1]];
        [(1.0 - t) * a[0] + t * b[0], (1.0 - t) * a[1] + t * b[1]]
    }
}

/// Side of a face as seen from one of its elements.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Plus,
    Minus,
}

#[derive(Clone, Debug)]
pub struct Mesh {
    pub vertices: Vec<[f64; 2]>,
    /// Counterclockwise vertex triples.
    pub elements: Vec<[usize; 3]>,
    pub faces: Vec<Face>,
    /// `element_faces[k][j]` is the face on local edge `j = (v_j, v_{j+1})`.
    pub element_faces: Vec<[usize; 3]>,
    /// Maximal element diameter.
    pub h: f64,
    pub level: usize,
    /// Maximal diameter / inradius ratio.
    pub chunkiness: f64,
}

impl Mesh {
    /// Builds the mesh from vertices and counterclockwise elements.
    pub fn from_elements(vertices: Vec<[f64; 2]>, elements: Vec<[usize; 3]>, level: usize) -> Result<Mesh> {
        let mut edge_map: HashMap<(usize, usize), usize> = HashMap::new();
        let mut faces: Vec<Face> = Vec::new();
        let mut element_faces = vec![[usize::MAX; 3]; elements.len()];
        for (k, el) in elements.iter().enumerate() {
            if signed_area(&vertices, el) <= 0.0 {
                return Err(LdgError::InvalidParameter(format!(
                    "element {k} is not counterclockwise"
                )));
            }
            for j in 0..3 {
                let (a, b) = (el[j], el[(j + 1) % 3]);
                let key = (a.min(b), a.max(b));
                match edge_map.get(&key) {
                    Some(&f) => {
                        let face = &mut faces[f];
                        if face.minus.is_some() || face.vertices != [b, a] {
                            return Err(LdgError::InvalidParameter(format!("non-conforming edge ({a}, {b})")));
                        }
                        face.minus = Some(k);
                        face.local_minus = Some(j);
                        element_faces[k][j] = f;
                    }
                    None => {
                        let (pa, pb) = (vertices[a], vertices[b]);
                        let (dx, dy) = (pb[0] - pa[0], pb[1] - pa[1]);
                        let length = dx.hypot(dy);
                        edge_map.insert(key, faces.len());
                        element_faces[k][j] = faces.len();
                        faces.push(Face {
                            vertices: [a, b],
                            plus: k,
                            minus: None,
                            local_plus: j,
                            local_minus: None,
                            normal: [dy / length, -dx / length],
                            length,
                        });
                    }
                }
            }
        }
        let mut h: f64 = 0.0;
        let mut chunkiness: f64 = 0.0;
        for el in &elements {
            let d = diameter(&vertices, el);
            h = h.max(d);
            chunkiness = chunkiness.max(d / inradius(&vertices, el));
        }
        Ok(Mesh {
            vertices,
            elements,
            faces,
            element_faces,
            h,
            level,
            chunkiness,
        })
    }

    /// 4×4 squares of side 1/2 on `(-1, 1)²`, each cut along the diagonal
    /// through the corner nearest the domain corner in its quadrant
    /// (checkerboard pattern). `h = 1/√2` and the origin is a vertex.
    pub fn build_initial() -> Mesh {
        let n = 4;
        let idx = |i: usize, j: usize| j * (n + 1) + i;
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                vertices.push([-1.0 + 0.5 * i as f64, -1.0 + 0.5 * j as f64]);
            }
        }
        let mut elements = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (v00, v10, v01, v11) = (idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1));
                if (i + j) % 2 == 0 {
                    elements.push([v00, v10, v11]);
                    elements.push([v00, v11, v01]);
                } else {
                    elements.push([v00, v10, v01]);
                    elements.push([v10, v11, v01]);
                }
            }
        }
        Mesh::from_elements(vertices, elements, 0).expect("initial mesh is valid")
    }

    /// Red refinement: every triangle is split into four similar children.
    pub fn refine_red(&self) -> Mesh {
        let mut vertices = self.vertices.clone();
        let mut midpoint: Vec<usize> = Vec::with_capacity(self.faces.len());
        for f in &self.faces {
            let a = self.vertices[f.vertices[0]];
            let b = self.vertices[f.vertices[1]];
            midpoint.push(vertices.len());
            vertices.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
        }
        let mut elements = Vec::with_capacity(4 * self.elements.len());
        for (k, el) in self.elements.iter().enumerate() {
            let m = self.element_faces[k].map(|f| midpoint[f]);
            // m[j] sits on edge (v_j, v_{j+1})
            elements.push([el[0], m[0], m[2]]);
            elements.push([m[0], el[1], m[1]]);
            elements.push([m[2], m[1], el[2]]);
            elements.push([m[0], m[1], m[2]]);
        }
        Mesh::from_elements(vertices, elements, self.level + 1).expect("refinement is conforming")
    }

    /// Parent in the previous level of element `k` of a red-refined mesh;
    /// children of `K` are numbered `4K..4K+4`.
    pub fn parent_of(k: usize) -> usize {
        k / 4
    }

    /// Initial mesh refined `level` times.
    pub fn at_level(level: usize) -> Mesh {
        (0..level).fold(Mesh::build_initial(), |m, _| m.refine_red())
    }

    pub fn n_elements(&self) -> usize {
        self.elements.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn element_vertices(&self, k: usize) -> [[f64; 2]; 3] {
        self.elements[k].map(|v| self.vertices[v])
    }

    pub fn area(&self, k: usize) -> f64 {
        signed_area(&self.vertices, &self.elements[k])
    }

    pub fn diameter(&self, k: usize) -> f64 {
        diameter(&self.vertices, &self.elements[k])
    }

    /// Affine map of element `k`: `x = x0 + J ξ`.
    pub fn affine(&self, k: usize) -> AffineMap {
        AffineMap::new(self.element_vertices(k))
    }

    /// Reference coordinates in element `k` of the face point with edge
    /// parameter `t` (measured from `face.vertices[0]`).
    pub fn face_ref_point(&self, face: &Face, side: Side, t: f64) -> [f64; 2] {
        let (local, t) = match side {
            Side::Plus => (face.local_plus, t),
            Side::Minus => (face.local_minus.expect("interior face"), 1.0 - t),
        };
        let a = REF_VERTICES[local];
        let b = REF_VERTICES[(local + 1) % 3];
        [(1.0 - t) * a[0] + t * b[0], (1.0 - t) * a[1] + t * b[1]]
    }

    pub fn boundary_faces(&self) -> impl Iterator<Item = &Face> {
        self.faces.iter().filter(|f| f.is_boundary())
    }

    /// Elements sharing a face with `k`.
    pub fn neighbors(&self, k: usize) -> impl Iterator<Item = usize> + '_ {
        self.element_faces[k].iter().filter_map(move |&f| {
            let face = &self.faces[f];
            if face.plus == k {
                face.minus
            } else {
                Some(face.plus)
            }
        })
    }

    /// Plain-text dump: one record per line, `v x y`, `e a b c`,
    /// `f a b plus minus` (minus = -1 on the boundary).
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# level {} h {:e} vertices {} elements {} faces {}",
            self.level,
            self.h,
            self.vertices.len(),
            self.elements.len(),
            self.faces.len()
        );
        for v in &self.vertices {
            let _ = writeln!(s, "v {:e} {:e}", v[0], v[1]);
        }
        for e in &self.elements {
            let _ = writeln!(s, "e {} {} {}", e[0], e[1], e[2]);
        }
        for f in &self.faces {
            let minus = f.minus.map(|m| m as i64).unwrap_or(-1);
            let _ = writeln!(s, "f {} {} {} {}", f.vertices[0], f.vertices[1], f.plus, minus);
        }
        s
    }
}

#[derive(Clone, Copy, Debug)]
pub struct AffineMap {
    pub origin: [f64; 2],
    /// Columns are the edge vectors `x1 - x0`, `x2 - x0`.
    pub jac: [[f64; 2]; 2],
    pub det: f64,
    /// Inverse Jacobian.
    pub inv: [[f64; 2]; 2],
}

impl AffineMap {
    pub fn new(x: [[f64; 2]; 3]) -> Self {
        let jac = [
            [x[1][0] - x[0][0], x[2][0] - x[0][0]],
            [x[1][1] - x[0][1], x[2][1] - x[0][1]],
        ];
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let inv = [[jac[1][1] / det, -jac[0][1] / det], [-jac[1][0] / det, jac[0][0] / det]];
        AffineMap {
            origin: x[0],
            jac,
            det,
            inv,
        }
    }

    pub fn to_physical(&self, xi: [f64; 2]) -> [f64; 2] {
        [
            self.origin[0] + self.jac[0][0] * xi[0] + self.jac[0][1] * xi[1],
            self.origin[1] + self.jac[1][0] * xi[0] + self.jac[1][1] * xi[1],
        ]
    }

    pub fn to_reference(&self, x: [f64; 2]) -> [f64; 2] {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        [
            self.inv[0][0] * d[0] + self.inv[0][1] * d[1],
            self.inv[1][0] * d[0] + self.inv[1][1] * d[1],
        ]
    }

    /// Physical gradient from a reference gradient: `J^{-T} ĝ`.
    pub fn grad(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.inv[0][0] * g[0] + self.inv[1][0] * g[1],
            self.inv[0][1] * g[0] + self.inv[1][1] * g[1],
        ]
    }
}

fn signed_area(v: &[[f64; 2]], el: &[usize; 3]) -> f64 {
    let (a, b, c) = (v[el[0]], v[el[1]], v[el[2]]);
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn edge_lengths(v: &[[f64; 2]], el: &[usize; 3]) -> [f64; 3] {
    let d = |i: usize, j: usize| {
        let (a, b) = (v[el[i]], v[el[j]]);
        (b[0] - a[0]).hypot(b[1] - a[1])
    };
    [d(0, 1), d(1, 2), d(2, 0)]
}

fn diameter(v: &[[f64; 2]], el: &[usize; 3]) -> f64 {
    let l = edge_lengths(v, el);
    l[0].max(l[1]).max(l[2])
}

fn inradius(v: &[[f64; 2]], el: &[usize; 3]) -> f64 {
    let l = edge_lengths(v, el);
    2.0 * signed_area(v, el) / (l[0] + l[1] + l[2])
}
