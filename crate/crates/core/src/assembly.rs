//! Residual and Jacobian of the primal LDG scheme with continuous P1
//! pressure, a Lagrange multiplier for the pressure mean, the shifted
//! stabilisation flux, and the skew-symmetric convective form.
//!
//! Unknown vector layout: `[v (velocity DOFs) | q (vertex values) | λ]`.
//! Element-level work runs in parallel; contributions are merged in element
//! (then face) order so results do not depend on the thread count.

use std::sync::{Arc, OnceLock};

use rayon::prelude::*;

use crate::constitutive::ConstitutiveParams;
use crate::dgops::{self, assemble_lifting, patch_dofs, LiftingOperator, VectorFn};
use crate::error::{LdgError, Result};
use crate::mesh::{Mesh, Side};
use crate::quadrature::{face_rule, volume_rule, QuadratureRule};
use crate::spaces::{FieldCoeffs, LagrangeBasis, Space, SpaceKind};
use crate::sparse::{AssemblyPattern, SparseMatrix};
use crate::tensor::Tensor2;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SchemeParams {
    pub alpha: f64,
    pub include_convection: bool,
    pub quad_degree_volume: usize,
    pub quad_degree_face: usize,
}

impl Default for SchemeParams {
    fn default() -> Self {
        SchemeParams {
            alpha: 2.5,
            include_convection: true,
            quad_degree_volume: 8,
            quad_degree_face: 8,
        }
    }
}

impl SchemeParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(LdgError::InvalidParameter(format!(
                "alpha must be positive, got {}",
                self.alpha
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct DiscreteState {
    pub v: FieldCoeffs,
    pub q: FieldCoeffs,
    pub lambda: f64,
}

impl DiscreteState {
    pub fn to_vector(&self) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.v.values.len() + self.q.values.len() + 1);
        x.extend_from_slice(&self.v.values);
        x.extend_from_slice(&self.q.values);
        x.push(self.lambda);
        x
    }
}

#[derive(Clone, Debug)]
pub struct RecoveredFields {
    pub l: FieldCoeffs,
    pub s: FieldCoeffs,
    pub k: FieldCoeffs,
}

/// One discretised problem on a fixed mesh: spaces, lifting, load vector
/// and boundary data.
pub struct Discretization {
    pub mesh: Arc<Mesh>,
    pub velocity: Arc<Space>,
    pub tensor: Arc<Space>,
    pub pressure: Arc<Space>,
    pub lift: LiftingOperator,
    pub constitutive: ConstitutiveParams,
    pub scheme: SchemeParams,
    load: Vec<f64>,
    vol: QuadratureRule,
    face: QuadratureRule,
    phi_v: Vec<Vec<f64>>,
    phi_p: Vec<[f64; 3]>,
    mean_weights: Vec<f64>,
    /// `v₀` at face quadrature points, boundary faces only.
    datum: Vec<Vec<[f64; 2]>>,
    pattern: OnceLock<AssemblyPattern>,
}

/// Per-element residual pieces before the ordered merge.
struct ElementResidual {
    patch_rows: Vec<f64>,
    own_rows: Vec<f64>,
    pressure_rows: [f64; 3],
    mean: f64,
}

impl Discretization {
    pub fn new(
        mesh: Arc<Mesh>,
        degree: usize,
        constitutive: ConstitutiveParams,
        scheme: SchemeParams,
        forcing: VectorFn<'_>,
        v0: VectorFn<'_>,
    ) -> Result<Self> {
        scheme.validate()?;
        let velocity = Space::new(Arc::clone(&mesh), SpaceKind::VectorDg(degree));
        let tensor = Space::new(Arc::clone(&mesh), SpaceKind::TensorDg(degree));
        let pressure = Space::new(Arc::clone(&mesh), SpaceKind::ScalarCg1);
        let lift = assemble_lifting(&velocity, &tensor, scheme.quad_degree_face, v0)?;
        let vol = volume_rule(scheme.quad_degree_volume)?;
        let face = face_rule(scheme.quad_degree_face)?;
        let basis: &LagrangeBasis = &velocity.basis;
        let phi_v: Vec<Vec<f64>> = vol.points.iter().map(|xi| basis.values(*xi)).collect();
        let phi_p = vol
            .points
            .iter()
            .map(|xi| [1.0 - xi[0] - xi[1], xi[0], xi[1]])
            .collect();
        let n = basis.len();
        let mut mean_weights = vec![0.0; n];
        for (q, (_, w)) in vol.iter().enumerate() {
            for j in 0..n {
                mean_weights[j] += 2.0 * w * phi_v[q][j];
            }
        }
        let datum = mesh
            .faces
            .iter()
            .map(|f| {
                if f.is_boundary() {
                    face.points.iter().map(|t| v0(f.point(&mesh, t[0]))).collect()
                } else {
                    Vec::new()
                }
            })
            .collect();
        let block = velocity.element_block();
        let mut load = vec![0.0; velocity.n_dof];
        load.par_chunks_mut(block).enumerate().for_each(|(k, out)| {
            let map = mesh.affine(k);
            for (q, (xi, w)) in vol.iter().enumerate() {
                let g = forcing(map.to_physical(*xi));
                for c in 0..2 {
                    for i in 0..n {
                        out[c * n + i] += w * map.det * g[c] * phi_v[q][i];
                    }
                }
            }
        });
        Ok(Discretization {
            mesh,
            velocity,
            tensor,
            pressure,
            lift,
            constitutive,
            scheme,
            load,
            vol,
            face,
            phi_v,
            phi_p,
            mean_weights,
            datum,
            pattern: OnceLock::new(),
        })
    }

    pub fn n_velocity(&self) -> usize {
        self.velocity.n_dof
    }

    pub fn n_pressure(&self) -> usize {
        self.pressure.n_dof
    }

    pub fn n_unknowns(&self) -> usize {
        self.n_velocity() + self.n_pressure() + 1
    }

    /// `(g, z)` for every velocity basis function.
    pub fn load(&self) -> &[f64] {
        &self.load
    }

    pub fn with_constitutive(mut self, constitutive: ConstitutiveParams) -> Self {
        self.constitutive = constitutive;
        self
    }

    pub fn set_constitutive(&mut self, constitutive: ConstitutiveParams) {
        self.constitutive = constitutive;
    }

    pub fn zero_state(&self) -> DiscreteState {
        DiscreteState {
            v: self.velocity.zeros(),
            q: self.pressure.zeros(),
            lambda: 0.0,
        }
    }

    pub fn state_from_vector(&self, x: &[f64]) -> Result<DiscreteState> {
        self.check_len(x)?;
        let nv = self.n_velocity();
        let np = self.n_pressure();
        Ok(DiscreteState {
            v: FieldCoeffs::new(Arc::clone(&self.velocity), x[..nv].to_vec())?,
            q: FieldCoeffs::new(Arc::clone(&self.pressure), x[nv..nv + np].to_vec())?,
            lambda: x[nv + np],
        })
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_unknowns() {
            return Err(LdgError::DimensionMismatch {
                expected: self.n_unknowns(),
                got: x.len(),
            });
        }
        Ok(())
    }

    fn element_lifted(&self, k: usize, x: &[f64]) -> Vec<f64> {
        let mut l = vec![0.0; self.tensor.element_block()];
        self.lift.element_gradient(k, &x[..self.n_velocity()], true, &mut l);
        l
    }

    fn eval_tensor(&self, coeffs: &[f64], q: usize) -> Tensor2 {
        let n = self.velocity.n_local();
        let phi = &self.phi_v[q];
        let mut c = [0.0; 4];
        for (ab, cv) in c.iter_mut().enumerate() {
            *cv = (0..n).map(|j| phi[j] * coeffs[ab * n + j]).sum();
        }
        Tensor2::from_components(c)
    }

    fn eval_velocity(&self, k: usize, x: &[f64], q: usize) -> [f64; 2] {
        let n = self.velocity.n_local();
        let base = k * 2 * n;
        let phi = &self.phi_v[q];
        let mut v = [0.0; 2];
        for (c, vc) in v.iter_mut().enumerate() {
            *vc = (0..n).map(|i| phi[i] * x[base + c * n + i]).sum();
        }
        v
    }

    fn eval_pressure(&self, k: usize, x: &[f64], q: usize) -> f64 {
        let nv = self.n_velocity();
        let verts = self.mesh.elements[k];
        (0..3).map(|i| self.phi_p[q][i] * x[nv + verts[i]]).sum()
    }

    /// `a_γ = {|Π⁰ L_h^sym|}` for every face.
    pub fn face_shifts(&self, state: &DiscreteState) -> Vec<f64> {
        self.face_shifts_vec(&state.to_vector())
    }

    pub fn face_shifts_vec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.velocity.n_local();
        let per_element: Vec<f64> = (0..self.mesh.n_elements())
            .into_par_iter()
            .map(|k| {
                let l = self.element_lifted(k, x);
                let mut c = [0.0; 4];
                for (ab, cv) in c.iter_mut().enumerate() {
                    *cv = (0..n).map(|j| self.mean_weights[j] * l[ab * n + j]).sum();
                }
                Tensor2::from_components(c).sym().norm()
            })
            .collect();
        self.mesh
            .faces
            .iter()
            .map(|f| match f.minus {
                Some(m) => 0.5 * (per_element[f.plus] + per_element[m]),
                None => per_element[f.plus],
            })
            .collect()
    }

    fn element_residual(&self, k: usize, x: &[f64]) -> ElementResidual {
        let n = self.velocity.n_local();
        let map = self.mesh.affine(k);
        let lift = &self.lift.local[k];
        let lc = self.element_lifted(k, x);
        let lambda = x[x.len() - 1];
        let conv = self.scheme.include_convection;
        let mut m = vec![0.0; 4 * n];
        let mut own_rows = vec![0.0; 2 * n];
        let mut pressure_rows = [0.0; 3];
        let mut mean = 0.0;
        for (q, (_, w)) in self.vol.iter().enumerate() {
            let wd = w * map.det;
            let l = self.eval_tensor(&lc, q);
            let qv = self.eval_pressure(k, x, q);
            let mut t = self.constitutive.stress(&l).to_tensor();
            t.0[0][0] -= qv;
            t.0[1][1] -= qv;
            let phi = &self.phi_v[q];
            if conv {
                let v = self.eval_velocity(k, x, q);
                t = t - Tensor2::outer(v, v).scale(0.5);
                let lv = l.apply(v);
                for c in 0..2 {
                    for i in 0..n {
                        own_rows[c * n + i] += 0.5 * wd * lv[c] * phi[i];
                    }
                }
            }
            let tc = t.components();
            for ab in 0..4 {
                for j in 0..n {
                    m[ab * n + j] += wd * tc[ab] * phi[j];
                }
            }
            let tr = l.trace();
            for (i, pr) in pressure_rows.iter_mut().enumerate() {
                *pr += wd * (tr + lambda) * self.phi_p[q][i];
            }
            mean += wd * qv;
        }
        let cols = lift.cols();
        let mut patch_rows = vec![0.0; cols];
        for (row, mv) in m.iter().enumerate() {
            let g = &lift.g[row * cols..(row + 1) * cols];
            for (pr, gv) in patch_rows.iter_mut().zip(g) {
                *pr += gv * mv;
            }
        }
        ElementResidual {
            patch_rows,
            own_rows,
            pressure_rows,
            mean,
        }
    }

    /// Jump `[[(v − v₀)⊗n]]` at face quadrature point `t`.
    fn face_jump_at(&self, f: usize, x: &[f64], tq: usize, phi_plus: &[f64], phi_minus: &[f64]) -> Tensor2 {
        let face = &self.mesh.faces[f];
        let n = self.velocity.n_local();
        let mut w = [0.0; 2];
        for (c, wc) in w.iter_mut().enumerate() {
            let base = face.plus * 2 * n + c * n;
            *wc = (0..n).map(|i| phi_plus[i] * x[base + i]).sum();
            match face.minus {
                Some(m) => {
                    let base = m * 2 * n + c * n;
                    *wc -= (0..n).map(|i| phi_minus[i] * x[base + i]).sum::<f64>();
                }
                None => *wc -= self.datum[f][tq][c],
            }
        }
        Tensor2::outer(w, face.normal)
    }

    fn face_basis(&self, f: usize, t: f64) -> (Vec<f64>, Vec<f64>) {
        let face = &self.mesh.faces[f];
        let basis = &self.velocity.basis;
        let plus = basis.values(self.mesh.face_ref_point(face, Side::Plus, t));
        let minus = if face.minus.is_some() {
            basis.values(self.mesh.face_ref_point(face, Side::Minus, t))
        } else {
            Vec::new()
        };
        (plus, minus)
    }

    /// Stabilisation rows of one face: `[plus block | minus block]`.
    fn face_residual(&self, f: usize, x: &[f64], shift: f64) -> Vec<f64> {
        let face = &self.mesh.faces[f];
        let n = self.velocity.n_local();
        let h = self.mesh.h;
        let sides = if face.minus.is_some() { 2 } else { 1 };
        let mut out = vec![0.0; sides * 2 * n];
        for (tq, (t, w)) in self.face.iter().enumerate() {
            let (pp, pm) = self.face_basis(f, t[0]);
            let j = self.face_jump_at(f, x, tq, &pp, &pm);
            let s = self.constitutive.stress_shifted(shift, &j.scale(1.0 / h));
            let sn = s.apply(face.normal);
            let wl = self.scheme.alpha * w * face.length;
            for c in 0..2 {
                for i in 0..n {
                    out[c * n + i] += wl * sn[c] * pp[i];
                    if sides == 2 {
                        out[2 * n + c * n + i] -= wl * sn[c] * pm[i];
                    }
                }
            }
        }
        out
    }

    /// Residual with the face shifts computed from `state`.
    pub fn residual(&self, state: &DiscreteState) -> Result<Vec<f64>> {
        let x = state.to_vector();
        let shifts = self.face_shifts_vec(&x);
        self.residual_with_shifts(&x, &shifts)
    }

    pub fn residual_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x)?;
        let shifts = self.face_shifts_vec(x);
        self.residual_with_shifts(x, &shifts)
    }

    /// Residual with prescribed (frozen) face shifts.
    pub fn residual_with_shifts(&self, x: &[f64], shifts: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x)?;
        if shifts.len() != self.mesh.faces.len() {
            return Err(LdgError::DimensionMismatch {
                expected: self.mesh.faces.len(),
                got: shifts.len(),
            });
        }
        let nv = self.n_velocity();
        let block = self.velocity.element_block();
        let elements: Vec<ElementResidual> = (0..self.mesh.n_elements())
            .into_par_iter()
            .map(|k| self.element_residual(k, x))
            .collect();
        let faces: Vec<Vec<f64>> = (0..self.mesh.faces.len())
            .into_par_iter()
            .map(|f| self.face_residual(f, x, shifts[f]))
            .collect();
        let mut r = vec![0.0; x.len()];
        for (k, e) in elements.iter().enumerate() {
            for (pos, &el) in self.lift.local[k].patch.iter().enumerate() {
                for i in 0..block {
                    r[el * block + i] += e.patch_rows[pos * block + i];
                }
            }
            for i in 0..block {
                r[k * block + i] += e.own_rows[i];
            }
            for (i, &vtx) in self.mesh.elements[k].iter().enumerate() {
                r[nv + vtx] += e.pressure_rows[i];
            }
            let last = r.len() - 1;
            r[last] += e.mean;
        }
        for (f, fr) in faces.iter().enumerate() {
            let face = &self.mesh.faces[f];
            for (s, el) in face.patch().enumerate() {
                for i in 0..block {
                    r[el * block + i] += fr[s * block + i];
                }
            }
        }
        for (ri, li) in r[..nv].iter_mut().zip(&self.load) {
            *ri -= li;
        }
        Ok(r)
    }

    /// Row/column pairs of every Jacobian contribution, in emission order.
    fn pattern_indices(&self) -> Vec<(usize, usize)> {
        let nv = self.n_velocity();
        let lam = self.n_unknowns() - 1;
        let mut idx = Vec::new();
        for k in 0..self.mesh.n_elements() {
            let dofs = patch_dofs(&self.velocity, &self.lift.local[k].patch);
            let verts = self.mesh.elements[k];
            for &r in &dofs {
                for &c in &dofs {
                    idx.push((r, c));
                }
            }
            for &r in &dofs {
                for &v in &verts {
                    idx.push((r, nv + v));
                }
            }
            for &v in &verts {
                for &c in &dofs {
                    idx.push((nv + v, c));
                }
            }
            for &v in &verts {
                idx.push((nv + v, lam));
                idx.push((lam, nv + v));
            }
        }
        for face in &self.mesh.faces {
            let dofs = patch_dofs(&self.velocity, &face.patch().collect::<Vec<_>>());
            for &r in &dofs {
                for &c in &dofs {
                    idx.push((r, c));
                }
            }
        }
        idx
    }

    pub fn pattern(&self) -> Result<&AssemblyPattern> {
        if let Some(p) = self.pattern.get() {
            return Ok(p);
        }
        let n = self.n_unknowns();
        let p = AssemblyPattern::new(n, n, &self.pattern_indices())?;
        Ok(self.pattern.get_or_init(|| p))
    }

    /// Element Jacobian values in the order of [`Self::pattern_indices`].
    fn element_jacobian(&self, k: usize, x: &[f64]) -> Vec<f64> {
        let n = self.velocity.n_local();
        let map = self.mesh.affine(k);
        let lift = &self.lift.local[k];
        let cols = lift.cols();
        let nt = 4 * n;
        let nown = 2 * n;
        let lc = self.element_lifted(k, x);
        let conv = self.scheme.include_convection;

        // a: tensor×tensor, e: tensor×own velocity, fm: own velocity×tensor,
        // c1: own×own, pm: tensor×pressure vertex, pl: pressure mass.
        let mut a = vec![0.0; nt * nt];
        let mut e = vec![0.0; nt * nown];
        let mut fm = vec![0.0; nown * nt];
        let mut c1 = vec![0.0; nown * nown];
        let mut pm = vec![0.0; nt * 3];
        let mut pl = [0.0; 3];
        for (q, (_, w)) in self.vol.iter().enumerate() {
            let wd = w * map.det;
            let l = self.eval_tensor(&lc, q);
            let ds = self.constitutive.stress_derivative(&l).matrix4();
            let phi = &self.phi_v[q];
            let pp = &self.phi_p[q];
            for ab in 0..4 {
                for j in 0..n {
                    let row = ab * n + j;
                    for cd in 0..4 {
                        let d = wd * ds[ab][cd] * phi[j];
                        if d != 0.0 {
                            for l2 in 0..n {
                                a[row * nt + cd * n + l2] += d * phi[l2];
                            }
                        }
                    }
                }
            }
            for j in 0..n {
                for (vtx, pv) in pp.iter().enumerate() {
                    let d = wd * phi[j] * pv;
                    pm[j * 3 + vtx] -= d;
                    pm[(3 * n + j) * 3 + vtx] -= d;
                }
            }
            for (vtx, pv) in pp.iter().enumerate() {
                pl[vtx] += wd * pv;
            }
            if conv {
                let v = self.eval_velocity(k, x, q);
                for a_ in 0..2 {
                    for b in 0..2 {
                        let ab = 2 * a_ + b;
                        for j in 0..n {
                            for c in 0..2 {
                                let coef = (if a_ == c { v[b] } else { 0.0 }) + (if b == c { v[a_] } else { 0.0 });
                                if coef == 0.0 {
                                    continue;
                                }
                                for i in 0..n {
                                    e[(ab * n + j) * nown + c * n + i] -= 0.5 * wd * coef * phi[j] * phi[i];
                                }
                            }
                        }
                    }
                }
                for c in 0..2 {
                    for i in 0..n {
                        let row = c * n + i;
                        for b in 0..2 {
                            for j in 0..n {
                                fm[row * nt + (2 * c + b) * n + j] += 0.5 * wd * phi[i] * phi[j] * v[b];
                            }
                        }
                        for c2 in 0..2 {
                            for i2 in 0..n {
                                c1[row * nown + c2 * n + i2] += 0.5 * wd * phi[i] * phi[i2] * l.0[c][c2];
                            }
                        }
                    }
                }
            }
        }

        let g = &lift.g;
        // ag = a·G + e·S (nt × cols), S selects the own columns
        let mut ag = vec![0.0; nt * cols];
        for r in 0..nt {
            for s in 0..nt {
                let av = a[r * nt + s];
                if av != 0.0 {
                    let gs = &g[s * cols..(s + 1) * cols];
                    for (o, gv) in ag[r * cols..(r + 1) * cols].iter_mut().zip(gs) {
                        *o += av * gv;
                    }
                }
            }
            for c in 0..nown {
                ag[r * cols + c] += e[r * nown + c];
            }
        }
        let mut vv = vec![0.0; cols * cols];
        for s in 0..nt {
            let gs = &g[s * cols..(s + 1) * cols];
            let ags = &ag[s * cols..(s + 1) * cols];
            for (r, &gr) in gs.iter().enumerate() {
                if gr != 0.0 {
                    for (o, av) in vv[r * cols..(r + 1) * cols].iter_mut().zip(ags) {
                        *o += gr * av;
                    }
                }
            }
        }
        if conv {
            for r in 0..nown {
                for s in 0..nt {
                    let fv = fm[r * nt + s];
                    if fv != 0.0 {
                        let gs = &g[s * cols..(s + 1) * cols];
                        for (o, gv) in vv[r * cols..(r + 1) * cols].iter_mut().zip(gs) {
                            *o += fv * gv;
                        }
                    }
                }
                for c in 0..nown {
                    vv[r * cols + c] += c1[r * nown + c];
                }
            }
        }
        // vp = Gᵀ pm (cols × 3), pv = -(pm)ᵀ G (3 × cols)
        let mut vp = vec![0.0; cols * 3];
        for s in 0..nt {
            for r in 0..cols {
                let gr = g[s * cols + r];
                for vtx in 0..3 {
                    vp[r * 3 + vtx] += gr * pm[s * 3 + vtx];
                }
            }
        }
        let mut out = Vec::with_capacity(cols * cols + 6 * cols + 6);
        out.extend_from_slice(&vv);
        out.extend_from_slice(&vp);
        for vtx in 0..3 {
            for r in 0..cols {
                out.push(-vp[r * 3 + vtx]);
            }
        }
        for &p in &pl {
            out.push(p);
            out.push(p);
        }
        out
    }

    fn face_jacobian(&self, f: usize, x: &[f64], shift: f64) -> Vec<f64> {
        let face = &self.mesh.faces[f];
        let n = self.velocity.n_local();
        let h = self.mesh.h;
        let sides = if face.minus.is_some() { 2 } else { 1 };
        let dim = sides * 2 * n;
        let nrm = face.normal;
        let mut out = vec![0.0; dim * dim];
        for (tq, (t, w)) in self.face.iter().enumerate() {
            let (pp, pm) = self.face_basis(f, t[0]);
            let j = self.face_jump_at(f, x, tq, &pp, &pm);
            let m4 = self
                .constitutive
                .stress_shifted_derivative(shift, &j.scale(1.0 / h))
                .matrix4();
            // kn[c][c2] = Σ_{b,d} m4[cb][c2 d] n_b n_d
            let mut kn = [[0.0; 2]; 2];
            for c in 0..2 {
                for c2 in 0..2 {
                    for b in 0..2 {
                        for d in 0..2 {
                            kn[c][c2] += m4[2 * c + b][2 * c2 + d] * nrm[b] * nrm[d];
                        }
                    }
                }
            }
            let wl = self.scheme.alpha * w * face.length / h;
            // signed trace values per side
            let side_phi = |s: usize, i: usize| if s == 0 { pp[i] } else { -pm[i] };
            for s in 0..sides {
                for c in 0..2 {
                    for i in 0..n {
                        let row = s * 2 * n + c * n + i;
                        let pr = side_phi(s, i);
                        for s2 in 0..sides {
                            for c2 in 0..2 {
                                let kv = wl * kn[c][c2] * pr;
                                for i2 in 0..n {
                                    out[row * dim + s2 * 2 * n + c2 * n + i2] += kv * side_phi(s2, i2);
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Jacobian with the face shifts frozen at `x`.
    pub fn jacobian(&self, x: &[f64]) -> Result<SparseMatrix> {
        let shifts = self.face_shifts_vec(x);
        self.jacobian_with_shifts(x, &shifts)
    }

    pub fn jacobian_with_shifts(&self, x: &[f64], shifts: &[f64]) -> Result<SparseMatrix> {
        self.check_len(x)?;
        let pattern = self.pattern()?;
        let elements: Vec<Vec<f64>> = (0..self.mesh.n_elements())
            .into_par_iter()
            .map(|k| self.element_jacobian(k, x))
            .collect();
        let faces: Vec<Vec<f64>> = (0..self.mesh.faces.len())
            .into_par_iter()
            .map(|f| self.face_jacobian(f, x, shifts[f]))
            .collect();
        let mut values = Vec::with_capacity(pattern.len());
        for e in elements.iter().chain(faces.iter()) {
            values.extend_from_slice(e);
        }
        pattern.assemble(&values)
    }

    /// `L_h`, `S_h = Π S(L_h^sym)` and `K_h = Π(v⊗v)` with quadrature degree
    /// `degree` for the projections.
    pub fn recover_fields(&self, state: &DiscreteState, degree: usize) -> Result<RecoveredFields> {
        let l = dgops::lifted_gradient(&state.v, &self.lift)?;
        let c = &self.constitutive;
        let s = self.tensor.project_with_degree(degree, |k, x, out| {
            let xi = self.mesh.affine(k).to_reference(x);
            let mut lc = [0.0; 4];
            l.eval_components(k, xi, &mut lc);
            out.copy_from_slice(&c.stress(&Tensor2::from_components(lc)).to_tensor().components());
        })?;
        let kf = self.tensor.project_with_degree(degree, |k, x, out| {
            let xi = self.mesh.affine(k).to_reference(x);
            let mut v = [0.0; 4];
            state.v.eval_components(k, xi, &mut v);
            out.copy_from_slice(&Tensor2::outer([v[0], v[1]], [v[0], v[1]]).components());
        })?;
        Ok(RecoveredFields { l, s, k: kf })
    }
}

/// `b_h(x, y, z) = ½(z⊗x, G y) − ½(y⊗x, G z)`.
pub fn b_h(lift: &LiftingOperator, x: &FieldCoeffs, y: &FieldCoeffs, z: &FieldCoeffs, degree: usize) -> Result<f64> {
    let gy = dgops::discrete_gradient(y, lift)?;
    let gz = dgops::discrete_gradient(z, lift)?;
    let mesh = &lift.velocity.mesh;
    let rule = volume_rule(degree)?;
    let mut total = 0.0;
    let (mut xv, mut yv, mut zv, mut gyv, mut gzv) = ([0.0; 4], [0.0; 4], [0.0; 4], [0.0; 4], [0.0; 4]);
    for k in 0..mesh.n_elements() {
        let det = mesh.affine(k).det;
        for (xi, w) in rule.iter() {
            x.eval_components(k, *xi, &mut xv);
            y.eval_components(k, *xi, &mut yv);
            z.eval_components(k, *xi, &mut zv);
            gy.eval_components(k, *xi, &mut gyv);
            gz.eval_components(k, *xi, &mut gzv);
            let xx = [xv[0], xv[1]];
            let a = Tensor2::outer([zv[0], zv[1]], xx).ddot(&Tensor2::from_components(gyv));
            let b = Tensor2::outer([yv[0], yv[1]], xx).ddot(&Tensor2::from_components(gzv));
            total += w * det * 0.5 * (a - b);
        }
    }
    Ok(total)
}
