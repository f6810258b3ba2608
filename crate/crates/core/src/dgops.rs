//! Jumps, averages, the lifting operator, discrete gradients, DG divergence,
//! DG norms and the face modular.
//!
//! Sign conventions: on an interior face with normal `n = n⁺` (outward from
//! `plus`), `[[w⊗n]] = (w⁺ − w⁻)⊗n`. On a boundary face `[[w⊗n]] = w⊗n`.
//! Averages `{X}` are `½(X⁺ + X⁻)` inside and the trace on the boundary.

use std::sync::Arc;

use rayon::prelude::*;

use crate::constitutive::ConstitutiveParams;
use crate::error::{LdgError, Result};
use crate::mesh::{Face, Mesh, Side};
use crate::quadrature::{face_rule, volume_rule};
use crate::spaces::{FieldCoeffs, FieldValue, Space, SpaceKind};
use crate::sparse::{self, SparseMatrix};
use crate::tensor::Tensor2;

/// Boundary velocity datum `v₀`.
pub type VectorFn<'a> = &'a (dyn Fn([f64; 2]) -> [f64; 2] + Sync);

/// Homogeneous datum.
pub fn zero_datum(_: [f64; 2]) -> [f64; 2] {
    [0.0, 0.0]
}

fn check_same_mesh(a: &Space, b: &Space) -> Result<()> {
    if !Arc::ptr_eq(&a.mesh, &b.mesh) {
        return Err(LdgError::InvalidParameter("spaces live on different meshes".into()));
    }
    Ok(())
}

/// Trace of `field` on `face` from the given side at edge parameter `t`.
pub fn face_trace(field: &FieldCoeffs, face: &Face, side: Side, t: f64) -> [f64; 4] {
    let mesh = &field.space.mesh;
    let k = match side {
        Side::Plus => face.plus,
        Side::Minus => face.minus.expect("interior face"),
    };
    let mut c = [0.0; 4];
    field.eval_components(k, mesh.face_ref_point(face, side, t), &mut c);
    c
}

/// `[[v⊗n]]` of a velocity field.
pub fn face_jump(v: &FieldCoeffs, face: &Face, t: f64) -> Tensor2 {
    let plus = face_trace(v, face, Side::Plus, t);
    let mut w = [plus[0], plus[1]];
    if face.minus.is_some() {
        let minus = face_trace(v, face, Side::Minus, t);
        w[0] -= minus[0];
        w[1] -= minus[1];
    }
    Tensor2::outer(w, face.normal)
}

/// `{f}` of any field.
pub fn face_avg(field: &FieldCoeffs, face: &Face, t: f64) -> FieldValue {
    let mut c = face_trace(field, face, Side::Plus, t);
    if face.minus.is_some() {
        let m = face_trace(field, face, Side::Minus, t);
        for i in 0..4 {
            c[i] = 0.5 * (c[i] + m[i]);
        }
    }
    match field.space.components() {
        1 => FieldValue::Scalar(c[0]),
        2 => FieldValue::Vector([c[0], c[1]]),
        _ => FieldValue::Tensor(Tensor2::from_components(c)),
    }
}

/// Per-element data of the lifted gradient `L|_K = G_K v|_patch + b0_K`.
#[derive(Clone, Debug)]
pub struct LocalLift {
    /// `patch[0] = K`, followed by its face neighbours.
    pub patch: Vec<usize>,
    /// Row-major `(4n) × (2n·patch.len())`; rows follow the tensor layout of
    /// `K`, columns the velocity layout of each patch element in turn.
    pub g: Vec<f64>,
    /// Lift of the boundary datum on `K` (zero for interior elements).
    pub b0: Vec<f64>,
}

impl LocalLift {
    pub fn cols(&self) -> usize {
        self.g.len() / self.b0.len()
    }
}

/// The lifting operator `R` as an explicit sparse matrix, the datum lift
/// `r₀`, and the per-element blocks of the discrete gradient `G = ∇_h − R`.
#[derive(Clone, Debug)]
pub struct LiftingOperator {
    pub velocity: Arc<Space>,
    pub tensor: Arc<Space>,
    /// `n_tensor × n_velocity`.
    pub r: SparseMatrix,
    pub r0: Vec<f64>,
    pub local: Vec<LocalLift>,
}

/// Velocity DOFs of a patch in column order of [`LocalLift::g`].
pub fn patch_dofs(space: &Space, patch: &[usize]) -> Vec<usize> {
    let block = space.element_block();
    patch.iter().flat_map(|&k| (k * block)..((k + 1) * block)).collect()
}

/// Builds `R`, `r₀` and the local gradient blocks.
pub fn assemble_lifting(
    velocity: &Arc<Space>,
    tensor: &Arc<Space>,
    face_degree: usize,
    v0: VectorFn<'_>,
) -> Result<LiftingOperator> {
    check_same_mesh(velocity, tensor)?;
    if !matches!(velocity.kind, SpaceKind::VectorDg(_)) || !matches!(tensor.kind, SpaceKind::TensorDg(_)) {
        return Err(LdgError::InvalidParameter(
            "lifting needs vector and tensor DG spaces".into(),
        ));
    }
    if velocity.kind.degree() != tensor.kind.degree() {
        return Err(LdgError::InvalidParameter("velocity and tensor degrees differ".into()));
    }
    let mesh = &velocity.mesh;
    let n = velocity.n_local();
    let basis = &velocity.basis;
    let minv = velocity.ref_mass_inv();
    let vrule = volume_rule((2 * velocity.kind.degree()).max(1))?;
    let frule = face_rule(2 * velocity.kind.degree() + 2)?.clone();
    let drule = face_rule(face_degree)?;

    // Reference moments ∫ N_l ∂_ξd N_i, used for the broken gradient.
    let mut moments = vec![[0.0; 2]; n * n];
    {
        let mut phi = vec![0.0; n];
        let mut dphi = vec![[0.0; 2]; n];
        for (xi, w) in vrule.iter() {
            basis.eval(*xi, &mut phi);
            basis.grad(*xi, &mut dphi);
            for l in 0..n {
                for i in 0..n {
                    moments[l * n + i][0] += w * phi[l] * dphi[i][0];
                    moments[l * n + i][1] += w * phi[l] * dphi[i][1];
                }
            }
        }
    }

    let local: Vec<(LocalLift, Vec<f64>)> = (0..mesh.n_elements())
        .into_par_iter()
        .map(|k| {
            let map = mesh.affine(k);
            let mut patch = vec![k];
            patch.extend(mesh.neighbors(k));
            let cols = 2 * n * patch.len();
            let rows = 4 * n;
            let mut g = vec![0.0; rows * cols];
            let mut rk = vec![0.0; rows * cols];
            let mut b0 = vec![0.0; rows];

            // broken gradient: (∂_b v_a) coefficients on K
            for a in 0..2 {
                for b in 0..2 {
                    for j in 0..n {
                        for i in 0..n {
                            let mut s = 0.0;
                            for l in 0..n {
                                let m = moments[l * n + i];
                                // physical derivative: J^{-T} ∇ξ
                                let phys = map.inv[0][b] * m[0] + map.inv[1][b] * m[1];
                                s += minv[j * n + l] * phys;
                            }
                            g[((2 * a + b) * n + j) * cols + a * n + i] = s;
                        }
                    }
                }
            }

            let mut phi = vec![0.0; n];
            let mut phi_nb = vec![0.0; n];
            for &f in &mesh.element_faces[k] {
                let face = &mesh.faces[f];
                let (side, normal) = if face.plus == k {
                    (Side::Plus, face.normal)
                } else {
                    (Side::Minus, [-face.normal[0], -face.normal[1]])
                };
                let neighbour = match side {
                    Side::Plus => face.minus,
                    Side::Minus => Some(face.plus),
                };
                let weight = if neighbour.is_some() { 0.5 } else { 1.0 };
                let scale = weight * face.length / map.det;
                let nb_pos = neighbour.map(|nb| patch.iter().position(|&e| e == nb).unwrap());
                let other = match side {
                    Side::Plus => Side::Minus,
                    Side::Minus => Side::Plus,
                };
                // ∫_γ N_l N_i (own) and ∫_γ N_l N'_i (neighbour)
                let mut own = vec![0.0; n * n];
                let mut nbm = vec![0.0; n * n];
                for (t, w) in frule.iter() {
                    basis.eval(mesh.face_ref_point(face, side, t[0]), &mut phi);
                    if neighbour.is_some() {
                        basis.eval(mesh.face_ref_point(face, other, t[0]), &mut phi_nb);
                    }
                    for l in 0..n {
                        for i in 0..n {
                            own[l * n + i] += w * phi[l] * phi[i];
                            if neighbour.is_some() {
                                nbm[l * n + i] += w * phi[l] * phi_nb[i];
                            }
                        }
                    }
                }
                for a in 0..2 {
                    for b in 0..2 {
                        for j in 0..n {
                            let row = (2 * a + b) * n + j;
                            for i in 0..n {
                                let mut so = 0.0;
                                let mut sn = 0.0;
                                for l in 0..n {
                                    so += minv[j * n + l] * own[l * n + i];
                                    sn += minv[j * n + l] * nbm[l * n + i];
                                }
                                rk[row * cols + a * n + i] += scale * so * normal[b];
                                if let Some(pos) = nb_pos {
                                    rk[row * cols + pos * 2 * n + a * n + i] -= scale * sn * normal[b];
                                }
                            }
                        }
                    }
                }
                if neighbour.is_none() {
                    // datum lift: M_K^{-1} ∫_γ N_l v0_a n_b
                    let mut mom = vec![[0.0; 2]; n];
                    for (t, w) in drule.iter() {
                        basis.eval(mesh.face_ref_point(face, side, t[0]), &mut phi);
                        let d = v0(face.point(mesh, t[0]));
                        for l in 0..n {
                            mom[l][0] += w * phi[l] * d[0];
                            mom[l][1] += w * phi[l] * d[1];
                        }
                    }
                    for a in 0..2 {
                        for b in 0..2 {
                            for j in 0..n {
                                let s: f64 = (0..n).map(|l| minv[j * n + l] * mom[l][a]).sum();
                                b0[(2 * a + b) * n + j] += face.length / map.det * s * normal[b];
                            }
                        }
                    }
                }
            }
            for (gv, rv) in g.iter_mut().zip(&rk) {
                *gv -= rv;
            }
            (LocalLift { patch, g, b0 }, rk)
        })
        .collect();

    let mut entries = Vec::new();
    let mut r0 = vec![0.0; tensor.n_dof];
    let tblock = tensor.element_block();
    for (k, (lift, rk)) in local.iter().enumerate() {
        let cols = lift.cols();
        let col_dofs = patch_dofs(velocity, &lift.patch);
        for row in 0..tblock {
            for (c, &dof) in col_dofs.iter().enumerate() {
                let v = rk[row * cols + c];
                if v != 0.0 {
                    entries.push((k * tblock + row, dof, v));
                }
            }
            r0[k * tblock + row] = lift.b0[row];
        }
    }
    let r = sparse::from_triplets(tensor.n_dof, velocity.n_dof, &entries)?;
    Ok(LiftingOperator {
        velocity: Arc::clone(velocity),
        tensor: Arc::clone(tensor),
        r,
        r0,
        local: local.into_iter().map(|(l, _)| l).collect(),
    })
}

impl LiftingOperator {
    /// Tensor coefficients of `G_K v` (+ `b0_K` when `with_datum`) on `K`.
    pub fn element_gradient(&self, k: usize, v: &[f64], with_datum: bool, out: &mut [f64]) {
        let lift = &self.local[k];
        let cols = lift.cols();
        let block = self.velocity.element_block();
        for (row, o) in out.iter_mut().enumerate().take(lift.b0.len()) {
            let mut s = if with_datum { lift.b0[row] } else { 0.0 };
            let g = &lift.g[row * cols..(row + 1) * cols];
            for (pos, &e) in lift.patch.iter().enumerate() {
                let vk = &v[e * block..(e + 1) * block];
                let gk = &g[pos * block..(pos + 1) * block];
                s += gk.iter().zip(vk).map(|(a, b)| a * b).sum::<f64>();
            }
            *o = s;
        }
    }

    fn gradient(&self, v: &FieldCoeffs, with_datum: bool) -> Result<FieldCoeffs> {
        if !Arc::ptr_eq(&v.space, &self.velocity) {
            return Err(LdgError::InvalidParameter(
                "field is not in the lifting's velocity space".into(),
            ));
        }
        let block = self.tensor.element_block();
        let mut values = vec![0.0; self.tensor.n_dof];
        values
            .par_chunks_mut(block)
            .enumerate()
            .for_each(|(k, out)| self.element_gradient(k, &v.values, with_datum, out));
        FieldCoeffs::new(Arc::clone(&self.tensor), values)
    }

    /// `R w` as a tensor field.
    pub fn apply(&self, w: &FieldCoeffs) -> Result<FieldCoeffs> {
        FieldCoeffs::new(Arc::clone(&self.tensor), sparse::mul_vec(&self.r, &w.values))
    }
}

/// `L_h = ∇_h v − R v + r₀`.
pub fn lifted_gradient(v: &FieldCoeffs, lift: &LiftingOperator) -> Result<FieldCoeffs> {
    lift.gradient(v, true)
}

/// Homogeneous discrete gradient `G_h^k v = ∇_h v − R v`.
pub fn discrete_gradient(v: &FieldCoeffs, lift: &LiftingOperator) -> Result<FieldCoeffs> {
    lift.gradient(v, false)
}

/// Element-wise trace of a tensor field, e.g. `Div_h^k v = tr G_h^k v`.
pub fn dg_div(gradient: &FieldCoeffs) -> Result<FieldCoeffs> {
    let k = match gradient.space.kind {
        SpaceKind::TensorDg(k) => k,
        _ => return Err(LdgError::InvalidParameter("dg_div expects a tensor field".into())),
    };
    let scalar = Space::new(Arc::clone(&gradient.space.mesh), SpaceKind::ScalarDg(k));
    let n = scalar.n_local();
    let mut values = vec![0.0; scalar.n_dof];
    for (e, out) in values.chunks_mut(n).enumerate() {
        for (j, o) in out.iter_mut().enumerate() {
            *o = gradient.values[gradient.space.dof(e, 0, j)] + gradient.values[gradient.space.dof(e, 3, j)];
        }
    }
    FieldCoeffs::new(scalar, values)
}

fn broken_gradient_norm(v: &FieldCoeffs, p: f64, sym: bool, degree: usize) -> Result<f64> {
    let mesh = &v.space.mesh;
    let n = v.space.n_local();
    let rule = volume_rule(degree)?;
    let total: f64 = (0..mesh.n_elements())
        .into_par_iter()
        .map(|k| {
            let map = mesh.affine(k);
            let mut dphi = vec![[0.0; 2]; n];
            let mut s = 0.0;
            for (xi, w) in rule.iter() {
                v.space.basis.grad(*xi, &mut dphi);
                let mut g = Tensor2::ZERO;
                for (i, d) in dphi.iter().enumerate() {
                    let d = map.grad(*d);
                    for a in 0..2 {
                        let c = v.values[v.space.dof(k, a, i)];
                        g.0[a][0] += c * d[0];
                        g.0[a][1] += c * d[1];
                    }
                }
                let m = if sym { g.sym().norm() } else { g.norm() };
                s += w * map.det * m.powf(p);
            }
            s
        })
        .collect::<Vec<_>>()
        .iter()
        .sum();
    Ok(total.powf(1.0 / p))
}

/// `‖h⁻¹[[v⊗n]]‖_{p,Γ_h}` with homogeneous boundary jumps.
fn jump_norm(v: &FieldCoeffs, p: f64, degree: usize) -> Result<f64> {
    let mesh = &v.space.mesh;
    let rule = face_rule(degree)?;
    let h = mesh.h;
    let total: f64 = mesh
        .faces
        .iter()
        .map(|face| {
            rule.iter()
                .map(|(t, w)| w * face.length * (face_jump(v, face, t[0]).norm() / h).powf(p))
                .sum::<f64>()
        })
        .sum();
    Ok(total.powf(1.0 / p))
}

/// `‖∇_h v‖_p + h^{1/p} ‖h⁻¹[[v⊗n]]‖_{p,Γ_h}`.
pub fn dg_norm(v: &FieldCoeffs, p: f64) -> Result<f64> {
    check_p(p)?;
    let d = 2 * v.space.kind.degree() + 2;
    Ok(broken_gradient_norm(v, p, false, d)? + v.space.mesh.h.powf(1.0 / p) * jump_norm(v, p, d)?)
}

/// `‖D_h v‖_p + h^{1/p} ‖h⁻¹[[v⊗n]]‖_{p,Γ_h}`.
pub fn sym_dg_norm(v: &FieldCoeffs, p: f64) -> Result<f64> {
    check_p(p)?;
    let d = 2 * v.space.kind.degree() + 2;
    Ok(broken_gradient_norm(v, p, true, d)? + v.space.mesh.h.powf(1.0 / p) * jump_norm(v, p, d)?)
}

/// `‖G_h^k v‖_p + h^{1/p} ‖h⁻¹[[v⊗n]]‖_{p,Γ_h}`.
pub fn lifted_dg_norm(v: &FieldCoeffs, lift: &LiftingOperator, p: f64) -> Result<f64> {
    check_p(p)?;
    let g = discrete_gradient(v, lift)?;
    let d = 2 * v.space.kind.degree() + 2;
    Ok(tensor_lp_norm(&g, p, d)? + v.space.mesh.h.powf(1.0 / p) * jump_norm(v, p, d)?)
}

/// `‖A‖_p` of a tensor field.
pub fn tensor_lp_norm(a: &FieldCoeffs, p: f64, degree: usize) -> Result<f64> {
    let mesh = &a.space.mesh;
    let rule = volume_rule(degree)?;
    let mut total = 0.0;
    let mut c = [0.0; 4];
    for k in 0..mesh.n_elements() {
        let det = mesh.affine(k).det;
        for (xi, w) in rule.iter() {
            a.eval_components(k, *xi, &mut c);
            total += w * det * Tensor2::from_components(c).norm().powf(p);
        }
    }
    Ok(total.powf(1.0 / p))
}

fn check_p(p: f64) -> Result<()> {
    if !(p.is_finite() && p > 1.0) {
        return Err(LdgError::InvalidParameter(format!("p must lie in (1, ∞), got {p}")));
    }
    Ok(())
}

/// `h Σ_γ ∫_γ φ_{a_γ}(h⁻¹ |[[(v − v_exact)⊗n]]|) ds`. Interior faces use the
/// jump of `v` alone (`v_exact` is continuous).
pub fn jump_modular(
    params: &ConstitutiveParams,
    shifts: &[f64],
    v: &FieldCoeffs,
    v_exact: VectorFn<'_>,
    face_degree: usize,
) -> Result<f64> {
    let mesh: &Mesh = &v.space.mesh;
    if shifts.len() != mesh.faces.len() {
        return Err(LdgError::DimensionMismatch {
            expected: mesh.faces.len(),
            got: shifts.len(),
        });
    }
    if let Some(a) = shifts.iter().find(|a| !(**a >= 0.0)) {
        return Err(LdgError::Domain(format!("negative face shift {a}")));
    }
    let rule = face_rule(face_degree)?;
    let h = mesh.h;
    let per_face: Vec<f64> = mesh
        .faces
        .par_iter()
        .zip(shifts.par_iter())
        .map(|(face, &a)| {
            let mut s = 0.0;
            for (t, w) in rule.iter() {
                let mut j = face_jump(v, face, t[0]);
                if face.is_boundary() {
                    let e = v_exact(face.point(mesh, t[0]));
                    j = j - Tensor2::outer(e, face.normal);
                }
                s += w * face.length * params.phi_shifted(a, j.norm() / h)?;
            }
            Ok(s)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(h * per_face.iter().sum::<f64>())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup(level: usize) -> (Arc<Space>, Arc<Space>) {
        let mesh = Arc::new(Mesh::at_level(level));
        (
            Space::new(Arc::clone(&mesh), SpaceKind::VectorDg(1)),
            Space::new(mesh, SpaceKind::TensorDg(1)),
        )
    }

    #[test]
    fn linear_field_with_matching_datum_has_exact_gradient() {
        let (vs, ts) = setup(1);
        let f = |x: [f64; 2]| [1.0 + 2.0 * x[0] - 0.5 * x[1], 3.0 * x[1] + x[0]];
        let lift = assemble_lifting(&vs, &ts, 4, &f).unwrap();
        let v = vs.interpolate(|x, o| {
            let y = f(x);
            o[0] = y[0];
            o[1] = y[1];
        });
        let l = lifted_gradient(&v, &lift).unwrap();
        let expected = [2.0, -0.5, 1.0, 3.0];
        for k in 0..vs.mesh.n_elements() {
            for j in 0..3 {
                for c in 0..4 {
                    assert!((l.values[ts.dof(k, c, j)] - expected[c]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn zero_field_zero_datum() {
        let (vs, ts) = setup(0);
        let lift = assemble_lifting(&vs, &ts, 4, &zero_datum).unwrap();
        assert!(lift.r0.iter().all(|&x| x == 0.0));
        let l = lifted_gradient(&vs.zeros(), &lift).unwrap();
        assert!(l.values.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn rotation_is_divergence_free() {
        let (vs, ts) = setup(1);
        let f = |x: [f64; 2]| [x[1], -x[0]];
        let lift = assemble_lifting(&vs, &ts, 4, &f).unwrap();
        let v = vs.interpolate(|x, o| {
            o[0] = x[1];
            o[1] = -x[0];
        });
        let div = dg_div(&lifted_gradient(&v, &lift).unwrap()).unwrap();
        assert!(div.values.iter().all(|d| d.abs() < 1e-12));
    }

    #[test]
    fn boundary_jump_of_constant() {
        let (vs, _) = setup(0);
        let v = vs.interpolate(|_, o| {
            o[0] = 2.0;
            o[1] = -1.0;
        });
        let mesh = &vs.mesh;
        for face in &mesh.faces {
            let j = face_jump(&v, face, 0.3);
            if face.is_boundary() {
                let e = Tensor2::outer([2.0, -1.0], face.normal);
                assert!((j - e).norm() < 1e-14);
            } else {
                assert!(j.norm() < 1e-14);
            }
        }
    }

    #[test]
    fn modular_vanishes_for_matching_field() {
        let (vs, _) = setup(1);
        let f = |x: [f64; 2]| [x[1], 0.5 * x[0]];
        let v = vs.interpolate(|x, o| {
            let y = f(x);
            o[0] = y[0];
            o[1] = y[1];
        });
        let params = ConstitutiveParams::new(3.0, 1e-4).unwrap();
        let shifts = vec![0.3; vs.mesh.faces.len()];
        let m = jump_modular(&params, &shifts, &v, &f, 6).unwrap();
        assert!(m.abs() < 1e-20);
        assert!(jump_modular(&params, &shifts[1..], &v, &f, 6).is_err());
    }

    #[test]
    fn norms_of_zero() {
        let (vs, _) = setup(0);
        assert_eq!(dg_norm(&vs.zeros(), 3.0).unwrap(), 0.0);
        assert_eq!(sym_dg_norm(&vs.zeros(), 3.0).unwrap(), 0.0);
        assert!(dg_norm(&vs.zeros(), 1.0).is_err());
    }
}
