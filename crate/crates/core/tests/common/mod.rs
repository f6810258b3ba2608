//! Independent oracles shared by the integration tests and the acceptance
//! runner.
#![allow(dead_code)]

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ldg_core::assembly::{Discretization, SchemeParams};
use ldg_core::constitutive::ConstitutiveParams;
use ldg_core::dgops::{self, assemble_lifting, face_avg, face_jump, zero_datum, LiftingOperator};
use ldg_core::mesh::{Face, Mesh};
use ldg_core::quadrature::{face_rule, volume_rule};
use ldg_core::spaces::{FieldCoeffs, FieldValue, Space, SpaceKind};
use ldg_core::sparse::mul_vec;
use ldg_core::tensor::Tensor2;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random tensor with log-uniform magnitude in `[10^lo, 10^hi]`.
pub fn random_tensor(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Tensor2 {
    let s = 10f64.powf(rng.gen_range(lo..hi));
    let c: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
    Tensor2::from_components(c).scale(s)
}

pub fn random_field(space: &Arc<Space>, rng: &mut ChaCha8Rng) -> FieldCoeffs {
    let values = (0..space.n_dof).map(|_| rng.gen_range(-1.0..1.0)).collect();
    FieldCoeffs::new(Arc::clone(space), values).unwrap()
}

/// Random tensor field with `X₁₂ = X₂₁`.
pub fn random_sym_field(space: &Arc<Space>, rng: &mut ChaCha8Rng) -> FieldCoeffs {
    let mut x = random_field(space, rng);
    for k in 0..space.mesh.n_elements() {
        for j in 0..space.n_local() {
            x.values[space.dof(k, 2, j)] = x.values[space.dof(k, 1, j)];
        }
    }
    x
}

/// Gauss-Legendre nodes and weights on `[-1, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre_oracle(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// `∫_a^b f` with `n`-point Gauss-Legendre.
pub fn gl_integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, rule: &[(f64, f64)]) -> f64 {
    let (m, r) = (0.5 * (a + b), 0.5 * (b - a));
    rule.iter().map(|(x, w)| w * r * f(m + r * x)).sum()
}

/// `∫_0^t f` on panels graded geometrically towards 0.
pub fn graded_integral(f: impl Fn(f64) -> f64, t: f64) -> f64 {
    let rule = gauss_legendre_oracle(24);
    let mut total = 0.0;
    let mut b = t;
    for _ in 0..80 {
        let a = 0.5 * b;
        total += gl_integrate(&f, a, b, &rule);
        b = a;
    }
    total
}

/// `⟨|x|^γ⟩` over `(−1, 1)²` on dyadic L-shaped shells around the origin.
pub fn mean_power_oracle(gamma: f64) -> f64 {
    let rule = gauss_legendre_oracle(24);
    let f = |x: f64, y: f64| (x * x + y * y).sqrt().powf(gamma);
    let square = |x0: f64, x1: f64, y0: f64, y1: f64| {
        let mut s = 0.0;
        for (xi, wx) in &rule {
            let x = 0.5 * (x0 + x1) + 0.5 * (x1 - x0) * xi;
            for (yi, wy) in &rule {
                let y = 0.5 * (y0 + y1) + 0.5 * (y1 - y0) * yi;
                s += wx * wy * f(x, y);
            }
        }
        s * 0.25 * (x1 - x0) * (y1 - y0)
    };
    let mut quarter = 0.0;
    let mut b = 1.0;
    for _ in 0..80 {
        let a = 0.5 * b;
        quarter += square(a, b, 0.0, a) + square(0.0, a, a, b) + square(a, b, a, b);
        b = a;
    }
    // the quarter square has unit area
    quarter
}

/// Broken gradient `∇v` of a vector DG field.
pub fn broken_gradient(v: &FieldCoeffs, k: usize, xi: [f64; 2]) -> Tensor2 {
    let map = v.space.mesh.affine(k);
    let n = v.space.n_local();
    let mut d = vec![[0.0; 2]; n];
    v.space.basis.grad(xi, &mut d);
    let mut g = Tensor2::ZERO;
    for (i, di) in d.iter().enumerate() {
        let di = map.grad(*di);
        for a in 0..2 {
            let c = v.values[v.space.dof(k, a, i)];
            g.0[a][0] += c * di[0];
            g.0[a][1] += c * di[1];
        }
    }
    g
}

pub fn eval4(f: &FieldCoeffs, k: usize, xi: [f64; 2]) -> [f64; 4] {
    let mut c = [0.0; 4];
    f.eval_components(k, xi, &mut c);
    c
}

pub fn eval_tensor(f: &FieldCoeffs, k: usize, xi: [f64; 2]) -> Tensor2 {
    Tensor2::from_components(eval4(f, k, xi))
}

/// `∫_Ω f(k, ξ, x)`.
pub fn integrate_volume(mesh: &Mesh, degree: usize, mut f: impl FnMut(usize, [f64; 2], [f64; 2]) -> f64) -> f64 {
    let rule = volume_rule(degree).unwrap();
    let mut s = 0.0;
    for k in 0..mesh.n_elements() {
        let map = mesh.affine(k);
        for (xi, w) in rule.iter() {
            s += w * map.det * f(k, *xi, map.to_physical(*xi));
        }
    }
    s
}

/// `Σ_γ ∫_γ f(γ, t)`.
pub fn integrate_faces(mesh: &Mesh, degree: usize, mut f: impl FnMut(&Face, f64) -> f64) -> f64 {
    let rule = face_rule(degree).unwrap();
    let mut s = 0.0;
    for face in &mesh.faces {
        for (t, w) in rule.iter() {
            s += w * face.length * f(face, t[0]);
        }
    }
    s
}

pub fn rel(a: f64, b: f64) -> f64 {
    let s = a.abs().max(b.abs());
    if s == 0.0 {
        0.0
    } else {
        (a - b).abs() / s
    }
}

pub fn as_tensor(v: FieldValue) -> Tensor2 {
    match v {
        FieldValue::Tensor(t) => t,
        _ => panic!("expected a tensor value"),
    }
}

pub fn spaces(level: usize) -> (Arc<Space>, Arc<Space>, LiftingOperator) {
    let mesh = Arc::new(Mesh::at_level(level));
    let vs = Space::new(Arc::clone(&mesh), SpaceKind::VectorDg(1));
    let ts = Space::new(mesh, SpaceKind::TensorDg(1));
    let lift = assemble_lifting(&vs, &ts, 8, &zero_datum).unwrap();
    (vs, ts, lift)
}

pub fn discretization(level: usize, p: f64, delta: f64, convection: bool) -> Discretization {
    let mesh = Arc::new(Mesh::at_level(level));
    let scheme = SchemeParams {
        include_convection: convection,
        ..SchemeParams::default()
    };
    Discretization::new(
        mesh,
        1,
        ConstitutiveParams::new(p, delta).unwrap(),
        scheme,
        &zero_datum,
        &zero_datum,
    )
    .unwrap()
}

pub fn random_vector(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

// ---------------------------------------------------------------------------
// Constitutive property suite

/// Fixed interval `[c, C]` for both ratio families on every `(p, δ)` grid point.
pub const RATIO_BOUNDS: (f64, f64) = (0.5, 2.0);
pub const RATIO_GRID_P: [f64; 3] = [2.25, 3.0, 3.5];
pub const RATIO_GRID_DELTA: [f64; 3] = [0.0, 1e-4, 1.0];

pub struct RatioStats {
    /// Smallest `(S(A) − S(B)):(A − B)` divided by `|S(A) − S(B)||A − B|`.
    pub min_monotonicity: f64,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub star_min: f64,
    pub star_max: f64,
}

/// Empirical bounds of `(S(A) − S(B)):(A − B) / |F(A) − F(B)|²` and of
/// `|F*(S(A)) − F*(S(B))|² / |F(A) − F(B)|²` over random pairs. Half of the
/// pairs are independent, half are small perturbations.
pub fn constitutive_ratios(p: f64, delta: f64, samples: usize, seed: u64) -> RatioStats {
    let c = ConstitutiveParams::new(p, delta).unwrap();
    let mut r = rng(seed);
    let mut st = RatioStats {
        min_monotonicity: f64::INFINITY,
        ratio_min: f64::INFINITY,
        ratio_max: 0.0,
        star_min: f64::INFINITY,
        star_max: 0.0,
    };
    for i in 0..samples {
        let a = random_tensor(&mut r, -3.0, 2.0);
        let b = if i % 2 == 0 {
            random_tensor(&mut r, -3.0, 2.0)
        } else {
            let scale = a.norm() * 10f64.powf(r.gen_range(-4.0..0.0));
            a + random_tensor(&mut r, 0.0, 0.0001).scale(scale)
        };
        let ds = c.stress(&a) - c.stress(&b);
        let dab = (a - b).sym();
        let prod = ds.ddot(&dab);
        let fd = (c.f_map(&a) - c.f_map(&b)).norm().powi(2);
        let fs = (c.fstar_map(&c.stress(&a).to_tensor()) - c.fstar_map(&c.stress(&b).to_tensor()))
            .norm()
            .powi(2);
        if fd == 0.0 {
            continue;
        }
        st.min_monotonicity = st.min_monotonicity.min(prod / (ds.norm() * dab.norm()));
        let q = prod / fd;
        st.ratio_min = st.ratio_min.min(q);
        st.ratio_max = st.ratio_max.max(q);
        let qs = fs / fd;
        st.star_min = st.star_min.min(qs);
        st.star_max = st.star_max.max(qs);
    }
    st
}

/// Largest relative deviation of `stress_derivative(A)[B]` from the central
/// difference `(S(A + hB) − S(A − hB)) / 2h`.
pub fn stress_derivative_fd_error(p: f64, delta: f64, samples: usize, seed: u64) -> f64 {
    let c = ConstitutiveParams::new(p, delta).unwrap();
    let mut r = rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let a = random_tensor(&mut r, -2.0, 1.0);
        let b = random_tensor(&mut r, 0.0, 0.0001);
        let h = 1e-5 * a.norm();
        let fd = (c.stress(&(a + b.scale(h))) - c.stress(&(a - b.scale(h)))).scale(0.5 / h);
        let exact = c.stress_derivative(&a).apply(&b);
        worst = worst.max((fd - exact).norm() / exact.norm());
    }
    worst
}

/// `(p, δ, a, t)` points for the modular checks.
pub const PHI_CASES: [(f64, f64, f64, f64); 8] = [
    (2.5, 1e-4, 0.0, 2.0),
    (3.0, 1e-4, 0.7, 1.3),
    (3.0, 0.0, 0.0, 1.0),
    (2.25, 0.0, 0.0, 0.5),
    (3.5, 1.0, 0.2, 10.0),
    (2.25, 1e-4, 0.3, 1e-3),
    (2.75, 1e-4, 0.0, 1e-6),
    (1.5, 1e-4, 0.05, 3.0),
];

/// Largest relative deviation of `φ_a(t)` from graded Gauss-Legendre
/// integration of `s ↦ (δ + a + s)^{p−2} s`.
pub fn phi_quadrature_error() -> f64 {
    PHI_CASES
        .iter()
        .map(|&(p, delta, a, t)| {
            let c = ConstitutiveParams::new(p, delta).unwrap();
            let oracle = graded_integral(|s| (delta + a + s).powf(p - 2.0) * s, t);
            rel(c.phi_shifted(a, t).unwrap(), oracle)
        })
        .fold(0.0, f64::max)
}

// ---------------------------------------------------------------------------
// Operator identity suite. Each returns a relative defect.

/// `(R w, X) = ⟨[[w⊗n]], {X}⟩`.
pub fn lifting_adjoint_defect(level: usize, seed: u64) -> f64 {
    let (vs, ts, lift) = spaces(level);
    let mut r = rng(seed);
    let w = random_field(&vs, &mut r);
    let x = random_field(&ts, &mut r);
    let rw = lift.apply(&w).unwrap();
    let mesh = &vs.mesh;
    let lhs = integrate_volume(mesh, 4, |k, xi, _| {
        eval_tensor(&rw, k, xi).ddot(&eval_tensor(&x, k, xi))
    });
    let rhs = integrate_faces(mesh, 4, |f, t| face_jump(&w, f, t).ddot(&as_tensor(face_avg(&x, f, t))));
    rel(lhs, rhs)
}

/// `(D_h^k v, X) = (D_h v, X) − ⟨[[v⊗n]], {X}⟩` for symmetric `X`.
pub fn sym_gradient_defect(level: usize, seed: u64) -> f64 {
    let (vs, ts, lift) = spaces(level);
    let mut r = rng(seed);
    let v = random_field(&vs, &mut r);
    let x = random_sym_field(&ts, &mut r);
    let g = dgops::discrete_gradient(&v, &lift).unwrap();
    let mesh = &vs.mesh;
    let lhs = integrate_volume(mesh, 4, |k, xi, _| {
        eval_tensor(&g, k, xi).sym().to_tensor().ddot(&eval_tensor(&x, k, xi))
    });
    let vol = integrate_volume(mesh, 4, |k, xi, _| {
        broken_gradient(&v, k, xi)
            .sym()
            .to_tensor()
            .ddot(&eval_tensor(&x, k, xi))
    });
    let faces = integrate_faces(mesh, 4, |f, t| face_jump(&v, f, t).ddot(&as_tensor(face_avg(&x, f, t))));
    rel(lhs, vol - faces)
}

/// `(Div_h^k Π v, z) = (div v, z) = −(v, ∇z)` for `v = ((1−x₁²)(1−x₂²), 0)`
/// and random continuous piecewise linear `z`.
pub fn divergence_identity_defect(level: usize, seed: u64) -> f64 {
    let (vs, _, lift) = spaces(level);
    let mesh = Arc::clone(&vs.mesh);
    let cg = Space::new(Arc::clone(&mesh), SpaceKind::ScalarCg1);
    let mut r = rng(seed);
    let z = random_field(&cg, &mut r);
    let bubble = |x: [f64; 2]| (1.0 - x[0] * x[0]) * (1.0 - x[1] * x[1]);
    let pv = vs
        .project_with_degree(10, |_, x, out| {
            out[0] = bubble(x);
            out[1] = 0.0;
        })
        .unwrap();
    let div = dgops::dg_div(&dgops::discrete_gradient(&pv, &lift).unwrap()).unwrap();
    let zval = |k: usize, xi: [f64; 2]| eval4(&z, k, xi)[0];
    let lhs = integrate_volume(&mesh, 4, |k, xi, _| eval4(&div, k, xi)[0] * zval(k, xi));
    let strong = integrate_volume(&mesh, 10, |k, xi, x| -2.0 * x[0] * (1.0 - x[1] * x[1]) * zval(k, xi));
    let weak = integrate_volume(&mesh, 10, |k, xi, x| {
        let map = mesh.affine(k);
        let mut d = [[0.0; 2]; 3];
        cg.basis.grad(xi, &mut d);
        let mut gz = [0.0; 2];
        for (i, di) in d.iter().enumerate() {
            let di = map.grad(*di);
            let c = z.values[cg.dof(k, 0, i)];
            gz[0] += c * di[0];
            gz[1] += c * di[1];
        }
        -bubble(x) * gz[0]
    });
    rel(lhs, strong).max(rel(lhs, weak))
}

/// `b_h(x, z, z) = 0` relative to `|b_h(x, y, z)|`, and the convective part
/// of the assembled residual tested with `z` equals `b_h(v, v, z)` and
/// vanishes for `z = v`.
pub fn skew_symmetry_defect(level: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let with = discretization(level, 2.0, 1e-4, true);
    let without = discretization(level, 2.0, 1e-4, false);
    let vs = &with.velocity;
    let x = random_field(vs, &mut r);
    let y = random_field(vs, &mut r);
    let z = random_field(vs, &mut r);
    let b =
        |a: &FieldCoeffs, b: &FieldCoeffs, c: &FieldCoeffs| ldg_core::assembly::b_h(&with.lift, a, b, c, 4).unwrap();
    let bxyz = b(&x, &y, &z);
    let mut worst = b(&x, &z, &z).abs() / bxyz.abs();
    worst = worst.max(rel(bxyz, -b(&x, &z, &y)));

    let nv = with.n_velocity();
    let mut state = random_vector(with.n_unknowns(), &mut r);
    state[..nv].copy_from_slice(&x.values);
    let shifts = with.face_shifts_vec(&state);
    let rc = with.residual_with_shifts(&state, &shifts).unwrap();
    let rn = without.residual_with_shifts(&state, &shifts).unwrap();
    let conv: Vec<f64> = rc[..nv].iter().zip(&rn[..nv]).map(|(a, b)| a - b).collect();
    worst = worst.max(rel(dot(&conv, &z.values), b(&x, &x, &z)));
    let scale: f64 = conv.iter().zip(&x.values).map(|(c, v)| (c * v).abs()).sum();
    worst.max(dot(&conv, &x.values).abs() / scale)
}

/// `(q I, D_h^k z) = (q, Div_h^k z)` for random continuous `q` and DG `z`,
/// checked against both pressure couplings of the assembled Jacobian.
pub fn pressure_trace_defect(level: usize, seed: u64) -> f64 {
    let mut r = rng(seed);
    let disc = discretization(level, 2.0, 1e-4, false);
    let z = random_field(&disc.velocity, &mut r);
    let q = random_field(&disc.pressure, &mut r);
    let g = dgops::discrete_gradient(&z, &disc.lift).unwrap();
    let mesh = &disc.mesh;
    let qval = |k: usize, xi: [f64; 2]| eval4(&q, k, xi)[0];
    let qi_dz = integrate_volume(mesh, 4, |k, xi, _| {
        Tensor2::IDENTITY
            .scale(qval(k, xi))
            .ddot(&eval_tensor(&g, k, xi).sym().to_tensor())
    });
    let div = dgops::dg_div(&g).unwrap();
    let q_div = integrate_volume(mesh, 4, |k, xi, _| qval(k, xi) * eval4(&div, k, xi)[0]);

    let (nv, np) = (disc.n_velocity(), disc.n_pressure());
    let jac = disc.jacobian(&vec![0.0; disc.n_unknowns()]).unwrap();
    let mut xz = vec![0.0; disc.n_unknowns()];
    xz[..nv].copy_from_slice(&z.values);
    let jz = mul_vec(&jac, &xz);
    let qjz = dot(&q.values, &jz[nv..nv + np]);
    let mut xq = vec![0.0; disc.n_unknowns()];
    xq[nv..nv + np].copy_from_slice(&q.values);
    let jq = mul_vec(&jac, &xq);
    let zjq = -dot(&z.values, &jq[..nv]);
    rel(qi_dz, q_div).max(rel(qjz, q_div)).max(rel(zjq, q_div))
}
