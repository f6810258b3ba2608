//! Broken polynomial spaces, the continuous P1 pressure space, global DOF
//! numbering and local L²-projections.
//!
//! DG layouts are element-major: element `k` owns the contiguous block
//! `[k·c·n, (k+1)·c·n)` for `c` components and `n` local nodes, ordered
//! component-major inside the block. Tensor components are ordered
//! `[11, 12, 21, 22]`. The continuous space numbers its DOFs by mesh vertex.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{LdgError, Result};
use crate::mesh::Mesh;
use crate::quadrature::volume_rule;
use crate::tensor::Tensor2;

/// Nodal Lagrange basis of `P_k` on the reference triangle.
#[derive(Clone, Debug)]
pub struct LagrangeBasis {
    pub degree: usize,
    pub nodes: Vec<[f64; 2]>,
    exponents: Vec<(i32, i32)>,
    /// `coeffs[i * n + j]`: coefficient of monomial `j` in basis function `i`.
    coeffs: Vec<f64>,
}

impl LagrangeBasis {
    pub fn new(degree: usize) -> Self {
        let k = degree;
        let mut nodes = Vec::new();
        if k == 0 {
            nodes.push([1.0 / 3.0, 1.0 / 3.0]);
        } else {
            nodes.extend([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]);
            for j in 0..=k {
                for i in 0..=(k - j) {
                    let corner = (i == 0 && j == 0) || (i == k && j == 0) || (i == 0 && j == k);
                    if !corner {
                        nodes.push([i as f64 / k as f64, j as f64 / k as f64]);
                    }
                }
            }
        }
        let mut exponents = Vec::new();
        for total in 0..=k as i32 {
            for b in 0..=total {
                exponents.push((total - b, b));
            }
        }
        let n = nodes.len();
        let vander = DMatrix::from_fn(n, n, |i, j| {
            let (a, b) = exponents[j];
            nodes[i][0].powi(a) * nodes[i][1].powi(b)
        });
        let inv = vander.try_inverse().expect("Lagrange nodes are unisolvent");
        // N_i = Σ_j inv[j, i] m_j
        let mut coeffs = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                coeffs[i * n + j] = inv[(j, i)];
            }
        }
        LagrangeBasis {
            degree,
            nodes,
            exponents,
            coeffs,
        }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn eval(&self, xi: [f64; 2], out: &mut [f64]) {
        if self.degree == 1 {
            out[0] = 1.0 - xi[0] - xi[1];
            out[1] = xi[0];
            out[2] = xi[1];
            return;
        }
        let n = self.len();
        let m: Vec<f64> = self
            .exponents
            .iter()
            .map(|&(a, b)| xi[0].powi(a) * xi[1].powi(b))
            .collect();
        for i in 0..n {
            out[i] = (0..n).map(|j| self.coeffs[i * n + j] * m[j]).sum();
        }
    }

    pub fn values(&self, xi: [f64; 2]) -> Vec<f64> {
        let mut v = vec![0.0; self.len()];
        self.eval(xi, &mut v);
        v
    }

    /// Reference gradients `∂N_i/∂ξ`.
    pub fn grad(&self, xi: [f64; 2], out: &mut [[f64; 2]]) {
        if self.degree == 1 {
            out[0] = [-1.0, -1.0];
            out[1] = [1.0, 0.0];
            out[2] = [0.0, 1.0];
            return;
        }
        let n = self.len();
        let dm: Vec<[f64; 2]> = self
            .exponents
            .iter()
            .map(|&(a, b)| {
                let dx = if a > 0 {
                    a as f64 * xi[0].powi(a - 1) * xi[1].powi(b)
                } else {
                    0.0
                };
                let dy = if b > 0 {
                    b as f64 * xi[0].powi(a) * xi[1].powi(b - 1)
                } else {
                    0.0
                };
                [dx, dy]
            })
            .collect();
        for i in 0..n {
            let mut g = [0.0, 0.0];
            for j in 0..n {
                g[0] += self.coeffs[i * n + j] * dm[j][0];
                g[1] += self.coeffs[i * n + j] * dm[j][1];
            }
            out[i] = g;
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SpaceKind {
    ScalarDg(usize),
    VectorDg(usize),
    TensorDg(usize),
    /// Continuous piecewise linears.
    ScalarCg1,
}

impl SpaceKind {
    pub fn degree(&self) -> usize {
        match *self {
            SpaceKind::ScalarDg(k) | SpaceKind::VectorDg(k) | SpaceKind::TensorDg(k) => k,
            SpaceKind::ScalarCg1 => 1,
        }
    }

    pub fn components(&self) -> usize {
        match self {
            SpaceKind::ScalarDg(_) | SpaceKind::ScalarCg1 => 1,
            SpaceKind::VectorDg(_) => 2,
            SpaceKind::TensorDg(_) => 4,
        }
    }

    pub fn is_dg(&self) -> bool {
        !matches!(self, SpaceKind::ScalarCg1)
    }
}

#[derive(Debug)]
pub struct Space {
    pub kind: SpaceKind,
    pub mesh: Arc<Mesh>,
    pub basis: LagrangeBasis,
    /// Inverse reference mass matrix, row-major.
    ref_mass_inv: Vec<f64>,
    pub n_dof: usize,
}

impl Space {
    pub fn new(mesh: Arc<Mesh>, kind: SpaceKind) -> Arc<Space> {
        let basis = LagrangeBasis::new(kind.degree());
        let n = basis.len();
        let rule = volume_rule(2 * kind.degree()).expect("mass rule");
        let mut mass = DMatrix::<f64>::zeros(n, n);
        let mut vals = vec![0.0; n];
        for (xi, w) in rule.iter() {
            basis.eval(*xi, &mut vals);
            for i in 0..n {
                for j in 0..n {
                    mass[(i, j)] += w * vals[i] * vals[j];
                }
            }
        }
        let inv = mass.try_inverse().expect("reference mass matrix is SPD");
        let ref_mass_inv = (0..n * n).map(|ij| inv[(ij / n, ij % n)]).collect();
        let n_dof = match kind {
            SpaceKind::ScalarCg1 => mesh.n_vertices(),
            _ => mesh.n_elements() * n * kind.components(),
        };
        Arc::new(Space {
            kind,
            mesh,
            basis,
            ref_mass_inv,
            n_dof,
        })
    }

    pub fn n_local(&self) -> usize {
        self.basis.len()
    }

    pub fn components(&self) -> usize {
        self.kind.components()
    }

    /// Number of DOFs owned by one element (DG) or touched by it (CG).
    pub fn element_block(&self) -> usize {
        self.n_local() * self.components()
    }

    /// Global DOF of component `comp` at local node `node` of element `k`.
    pub fn dof(&self, k: usize, comp: usize, node: usize) -> usize {
        match self.kind {
            SpaceKind::ScalarCg1 => self.mesh.elements[k][node],
            _ => (k * self.components() + comp) * self.n_local() + node,
        }
    }

    /// Inverse of the reference mass matrix; the physical inverse is this
    /// divided by `|det J|`.
    pub fn ref_mass_inv(&self) -> &[f64] {
        &self.ref_mass_inv
    }

    pub fn zeros(self: &Arc<Self>) -> FieldCoeffs {
        FieldCoeffs {
            space: Arc::clone(self),
            values: vec![0.0; self.n_dof],
        }
    }

    /// Local L²-projection of `f(k, x, out)` with quadrature degree `2k+2`.
    pub fn project(self: &Arc<Self>, f: impl Fn(usize, [f64; 2], &mut [f64]) + Sync) -> Result<FieldCoeffs> {
        self.project_with_degree(2 * self.kind.degree() + 2, f)
    }

    pub fn project_with_degree(
        self: &Arc<Self>,
        degree: usize,
        f: impl Fn(usize, [f64; 2], &mut [f64]) + Sync,
    ) -> Result<FieldCoeffs> {
        if !self.kind.is_dg() {
            return Err(LdgError::InvalidParameter(
                "local L2 projection needs a DG space".into(),
            ));
        }
        let rule = volume_rule(degree)?;
        let n = self.n_local();
        let nc = self.components();
        let block = n * nc;
        let mut values = vec![0.0; self.n_dof];
        values.par_chunks_mut(block).enumerate().for_each(|(k, out)| {
            let map = self.mesh.affine(k);
            let mut phi = vec![0.0; n];
            let mut fx = vec![0.0; nc];
            let mut rhs = vec![0.0; block];
            for (xi, w) in rule.iter() {
                self.basis.eval(*xi, &mut phi);
                f(k, map.to_physical(*xi), &mut fx);
                for c in 0..nc {
                    for i in 0..n {
                        rhs[c * n + i] += w * fx[c] * phi[i];
                    }
                }
            }
            for c in 0..nc {
                for i in 0..n {
                    out[c * n + i] = (0..n).map(|j| self.ref_mass_inv[i * n + j] * rhs[c * n + j]).sum();
                }
            }
        });
        Ok(FieldCoeffs {
            space: Arc::clone(self),
            values,
        })
    }

    /// Nodal interpolation (exact on `P_k` for DG, on P1 for CG).
    pub fn interpolate(self: &Arc<Self>, f: impl Fn([f64; 2], &mut [f64])) -> FieldCoeffs {
        let mut values = vec![0.0; self.n_dof];
        let nc = self.components();
        let mut fx = vec![0.0; nc];
        if let SpaceKind::ScalarCg1 = self.kind {
            for (v, x) in self.mesh.vertices.iter().enumerate() {
                f(*x, &mut fx);
                values[v] = fx[0];
            }
        } else {
            for k in 0..self.mesh.n_elements() {
                let map = self.mesh.affine(k);
                for (node, xi) in self.basis.nodes.iter().enumerate() {
                    f(map.to_physical(*xi), &mut fx);
                    for c in 0..nc {
                        values[self.dof(k, c, node)] = fx[c];
                    }
                }
            }
        }
        FieldCoeffs {
            space: Arc::clone(self),
            values,
        }
    }
}

/// Pointwise value of a field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum FieldValue {
    Scalar(f64),
    Vector([f64; 2]),
    Tensor(Tensor2),
}

#[derive(Clone, Debug)]
pub struct FieldCoeffs {
    pub space: Arc<Space>,
    pub values: Vec<f64>,
}

impl FieldCoeffs {
    pub fn new(space: Arc<Space>, values: Vec<f64>) -> Result<Self> {
        if values.len() != space.n_dof {
            return Err(LdgError::DimensionMismatch {
                expected: space.n_dof,
                got: values.len(),
            });
        }
        Ok(FieldCoeffs { space, values })
    }

    /// Raw component values at reference point `xi` of element `k`.
    pub fn eval_components(&self, k: usize, xi: [f64; 2], out: &mut [f64]) {
        let s = &self.space;
        let n = s.n_local();
        let mut phi = [0.0; 32];
        s.basis.eval(xi, &mut phi[..n]);
        for (c, o) in out.iter_mut().enumerate().take(s.components()) {
            *o = (0..n).map(|i| phi[i] * self.values[s.dof(k, c, i)]).sum();
        }
    }

    pub fn evaluate(&self, k: usize, xi: [f64; 2]) -> Result<FieldValue> {
        if k >= self.space.mesh.n_elements() {
            return Err(LdgError::OutOfRange {
                index: k,
                len: self.space.mesh.n_elements(),
            });
        }
        let mut c = [0.0; 4];
        self.eval_components(k, xi, &mut c);
        Ok(match self.space.components() {
            1 => FieldValue::Scalar(c[0]),
            2 => FieldValue::Vector([c[0], c[1]]),
            _ => FieldValue::Tensor(Tensor2::from_components(c)),
        })
    }

    /// Element mean of every component.
    pub fn element_mean(&self, k: usize) -> [f64; 4] {
        let rule = volume_rule(self.space.kind.degree().max(1)).expect("rule");
        let mut acc = [0.0; 4];
        let mut c = [0.0; 4];
        for (xi, w) in rule.iter() {
            self.eval_components(k, *xi, &mut c);
            for i in 0..4 {
                acc[i] += 2.0 * w * c[i];
            }
        }
        acc
    }

    /// `⟨f⟩_Ω` of a scalar field.
    pub fn mean_value(&self) -> f64 {
        let mesh = &self.space.mesh;
        let total: f64 = (0..mesh.n_elements())
            .map(|k| self.element_mean(k)[0] * mesh.area(k))
            .sum();
        let area: f64 = (0..mesh.n_elements()).map(|k| mesh.area(k)).sum();
        total / area
    }
}

/// Exact transfer of a field to the once red-refined mesh (nodal
/// interpolation of the coarse piecewise polynomial on every child).
pub fn prolongate(coarse: &FieldCoeffs, fine: &Arc<Space>) -> Result<FieldCoeffs> {
    let cm = &coarse.space.mesh;
    let fm = &fine.mesh;
    if coarse.space.kind != fine.kind || fm.n_elements() != 4 * cm.n_elements() || fm.level != cm.level + 1 {
        return Err(LdgError::InvalidParameter(
            "prolongation needs the same space kind on the once refined mesh".into(),
        ));
    }
    let nc = fine.components();
    let mut values = vec![0.0; fine.n_dof];
    let mut c = [0.0; 4];
    for k in 0..fm.n_elements() {
        let parent = Mesh::parent_of(k);
        let pmap = cm.affine(parent);
        let fmap = fm.affine(k);
        for (node, xi) in fine.basis.nodes.iter().enumerate() {
            let x = fmap.to_physical(*xi);
            coarse.eval_components(parent, pmap.to_reference(x), &mut c);
            for (comp, cv) in c.iter().enumerate().take(nc) {
                values[fine.dof(k, comp, node)] = *cv;
            }
        }
    }
    FieldCoeffs::new(Arc::clone(fine), values)
}

/// `⟨f⟩_Ω` by element quadrature of the given degree.
pub fn mean_value_fn(mesh: &Mesh, degree: usize, f: impl Fn([f64; 2]) -> f64) -> Result<f64> {
    let rule = volume_rule(degree)?;
    let mut total = 0.0;
    let mut area = 0.0;
    for k in 0..mesh.n_elements() {
        let map = mesh.affine(k);
        for (xi, w) in rule.iter() {
            total += w * map.det * f(map.to_physical(*xi));
        }
        area += mesh.area(k);
    }
    Ok(total / area)
}
