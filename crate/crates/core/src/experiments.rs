//! Manufactured singular solution, error quantities, EOC and the level sweep.

use std::sync::Arc;

use log::{info, warn};
use rayon::prelude::*;

use crate::assembly::{Discretization, SchemeParams};
use crate::constitutive::ConstitutiveParams;
use crate::dgops::{self, jump_modular, VectorFn};
use crate::dual::Dual;
use crate::error::{LdgError, Result};
use crate::mesh::Mesh;
use crate::newton::{self, NewtonConfig, SolveReport};
use crate::quadrature::{gauss_legendre, volume_rule};
use crate::spaces::{prolongate, FieldCoeffs};
use crate::tensor::Tensor2;

pub const BETA: f64 = 1e-2;
pub const PRESSURE_SCALE: f64 = 25.0;
const GAMMA_OFFSET: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum GammaCase {
    /// `γ = 1 − 2/p′ + 10⁻⁴`, expected rate `p′/2`.
    Case1,
    /// `γ = β(p − 2)/2 + 10⁻⁴`, expected rate 1.
    Case2,
}

impl GammaCase {
    pub fn number(self) -> u8 {
        match self {
            GammaCase::Case1 => 1,
            GammaCase::Case2 => 2,
        }
    }

    pub fn from_number(n: u8) -> Result<Self> {
        match n {
            1 => Ok(GammaCase::Case1),
            2 => Ok(GammaCase::Case2),
            _ => Err(LdgError::InvalidParameter(format!("unknown case {n}, expected 1 or 2"))),
        }
    }

    pub fn gamma(self, p: f64, beta: f64) -> f64 {
        match self {
            GammaCase::Case1 => 1.0 - 2.0 / conjugate(p) + GAMMA_OFFSET,
            GammaCase::Case2 => beta * (p - 2.0) / 2.0 + GAMMA_OFFSET,
        }
    }

    pub fn expected_rate(self, p: f64) -> f64 {
        match self {
            GammaCase::Case1 => conjugate(p) / 2.0,
            GammaCase::Case2 => 1.0,
        }
    }
}

fn conjugate(p: f64) -> f64 {
    p / (p - 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ManufacturedParams {
    pub p: f64,
    pub beta: f64,
    pub gamma: f64,
    pub gamma_case: GammaCase,
    pub pressure_scale: f64,
    /// `⟨|·|^γ⟩_Ω`.
    pub mean_const: f64,
}

impl ManufacturedParams {
    pub fn new(p: f64, gamma_case: GammaCase) -> Result<Self> {
        if !(p.is_finite() && p > 1.0) {
            return Err(LdgError::InvalidParameter(format!("p must exceed 1, got {p}")));
        }
        let gamma = gamma_case.gamma(p, BETA);
        Ok(ManufacturedParams {
            p,
            beta: BETA,
            gamma,
            gamma_case,
            pressure_scale: PRESSURE_SCALE,
            mean_const: mean_power(gamma, 64),
        })
    }
}

/// `⟨|x|^γ⟩` over `(−1, 1)²`, using
/// `∫_Ω |x|^γ = 8/(γ+2) ∫_0^{π/4} cos(θ)^{−(γ+2)} dθ` and an `n`-point
/// Gauss-Legendre rule for the smooth angular integral.
pub fn mean_power(gamma: f64, n: usize) -> f64 {
    let (x, w) = gauss_legendre(n);
    let quarter = std::f64::consts::FRAC_PI_4;
    let s: f64 = x
        .iter()
        .zip(&w)
        .map(|(t, wt)| wt * quarter * (t * quarter).cos().powf(-(gamma + 2.0)))
        .sum();
    8.0 / (gamma + 2.0) * s / 4.0
}

/// Closed-form exact solution and its forcing.
#[derive(Clone, Copy, Debug)]
pub struct ExactSolution {
    pub params: ManufacturedParams,
    pub constitutive: ConstitutiveParams,
    pub convection: bool,
}

fn check_point(x: [f64; 2]) -> Result<()> {
    if x[0] == 0.0 && x[1] == 0.0 {
        return Err(LdgError::Domain("derivative evaluated at the singular origin".into()));
    }
    Ok(())
}

fn grad_v_generic(x1: Dual, x2: Dual, beta: f64) -> [[Dual; 2]; 2] {
    let r2 = x1 * x1 + x2 * x2;
    let rb = r2.powf(0.5 * beta);
    let rb2 = r2.powf(0.5 * (beta - 2.0)) * beta;
    [
        [rb2 * x1 * x2, rb2 * x2 * x2 + rb],
        [-(rb2 * x1 * x1) - rb, -(rb2 * x2 * x1)],
    ]
}

impl ExactSolution {
    pub fn new(params: ManufacturedParams, delta: f64, convection: bool) -> Result<Self> {
        Ok(ExactSolution {
            params,
            constitutive: ConstitutiveParams::new(params.p, delta)?,
            convection,
        })
    }

    pub fn v(&self, x: [f64; 2]) -> [f64; 2] {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        let rb = if r == 0.0 { 0.0 } else { r.powf(self.params.beta) };
        [rb * x[1], -rb * x[0]]
    }

    /// `(∇v)_{ab} = ∂_b v_a`.
    pub fn grad_v(&self, x: [f64; 2]) -> Result<Tensor2> {
        check_point(x)?;
        let g = grad_v_generic(Dual::constant(x[0]), Dual::constant(x[1]), self.params.beta);
        Ok(Tensor2::new(g[0][0].re, g[0][1].re, g[1][0].re, g[1][1].re))
    }

    pub fn q(&self, x: [f64; 2]) -> f64 {
        let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
        let rg = if r == 0.0 {
            if self.params.gamma > 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            r.powf(self.params.gamma)
        };
        self.params.pressure_scale * (rg - self.params.mean_const)
    }

    pub fn grad_q(&self, x: [f64; 2]) -> Result<[f64; 2]> {
        check_point(x)?;
        let r2 = x[0] * x[0] + x[1] * x[1];
        let c = self.params.pressure_scale * self.params.gamma * r2.powf(0.5 * (self.params.gamma - 2.0));
        Ok([c * x[0], c * x[1]])
    }

    /// `S(Dv)` with dual-valued coordinates.
    fn stress_dual(&self, x1: Dual, x2: Dual) -> [[Dual; 2]; 2] {
        let g = grad_v_generic(x1, x2, self.params.beta);
        let d11 = g[0][0];
        let d22 = g[1][1];
        let d12 = (g[0][1] + g[1][0]) * 0.5;
        let norm = (d11 * d11 + d12 * d12 * 2.0 + d22 * d22).sqrt();
        let c = (norm + self.constitutive.delta()).powf(self.constitutive.p() - 2.0);
        [[c * d11, c * d12], [c * d12, c * d22]]
    }

    /// `g = −div S(Dv) + [∇v]v + ∇q` (convective term only when enabled).
    pub fn forcing(&self, x: [f64; 2]) -> Result<[f64; 2]> {
        check_point(x)?;
        let s1 = self.stress_dual(Dual::new(x[0], 1.0), Dual::constant(x[1]));
        let s2 = self.stress_dual(Dual::constant(x[0]), Dual::new(x[1], 1.0));
        let div = [s1[0][0].eps + s2[0][1].eps, s1[1][0].eps + s2[1][1].eps];
        let gq = self.grad_q(x)?;
        let mut g = [gq[0] - div[0], gq[1] - div[1]];
        if self.convection {
            let gv = self.grad_v(x)?;
            let cv = gv.apply(self.v(x));
            g[0] += cv[0];
            g[1] += cv[1];
        }
        Ok(g)
    }

    pub fn forcing_or_zero(&self, x: [f64; 2]) -> [f64; 2] {
        self.forcing(x).unwrap_or([0.0, 0.0])
    }
}

/// `EOC_i = log(e_i / e_{i−1}) / log(h_i / h_{i−1})`.
pub fn eoc(errors: &[f64], hs: &[f64]) -> Result<Vec<f64>> {
    if errors.len() != hs.len() {
        return Err(LdgError::DimensionMismatch {
            expected: errors.len(),
            got: hs.len(),
        });
    }
    if errors.len() < 2 {
        return Err(LdgError::InvalidParameter("EOC needs at least two levels".into()));
    }
    if errors.iter().chain(hs).any(|v| !(*v > 0.0)) {
        return Err(LdgError::Domain("EOC needs positive errors and mesh sizes".into()));
    }
    Ok(errors
        .windows(2)
        .zip(hs.windows(2))
        .map(|(e, h)| (e[1] / e[0]).ln() / (h[1] / h[0]).ln())
        .collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ErrorRecord {
    pub level: usize,
    pub h: f64,
    pub n_dof: usize,
    pub e_l: f64,
    pub e_s: f64,
    pub e_jump: f64,
    pub eoc_l: Option<f64>,
    pub eoc_s: Option<f64>,
    pub eoc_jump: Option<f64>,
    pub newton_iterations: usize,
    pub residual: f64,
}

/// `‖F(L_h^sym) − F(∇v^sym)‖₂` for the exact gradient `grad_v`.
pub fn error_e_l(
    disc: &Discretization,
    l: &FieldCoeffs,
    grad_v: impl Fn([f64; 2]) -> Result<Tensor2> + Sync,
    degree: usize,
) -> Result<f64> {
    let c = disc.constitutive;
    volume_error(&disc.mesh, degree, |k, xi, x| {
        let mut lc = [0.0; 4];
        l.eval_components(k, xi, &mut lc);
        let dv = grad_v(x)?;
        Ok((c.f_map(&Tensor2::from_components(lc)) - c.f_map(&dv)).norm().powi(2))
    })
}

/// `‖F*(S_h) − F*(S(∇v^sym))‖₂`.
pub fn error_e_s(
    disc: &Discretization,
    s: &FieldCoeffs,
    grad_v: impl Fn([f64; 2]) -> Result<Tensor2> + Sync,
    degree: usize,
) -> Result<f64> {
    let c = disc.constitutive;
    volume_error(&disc.mesh, degree, |k, xi, x| {
        let mut sc = [0.0; 4];
        s.eval_components(k, xi, &mut sc);
        let se = c.stress(&grad_v(x)?).to_tensor();
        Ok((c.fstar_map(&Tensor2::from_components(sc)) - c.fstar_map(&se))
            .norm()
            .powi(2))
    })
}

/// `m_{φ_a, h}(v_h − v)^{1/2}` with the scheme's face shifts.
pub fn error_e_jump(
    disc: &Discretization,
    v: &FieldCoeffs,
    shifts: &[f64],
    v_exact: VectorFn<'_>,
    face_degree: usize,
) -> Result<f64> {
    let m = jump_modular(&disc.constitutive, shifts, v, v_exact, face_degree)?;
    Ok(m.sqrt())
}

fn volume_error(
    mesh: &Mesh,
    degree: usize,
    f: impl Fn(usize, [f64; 2], [f64; 2]) -> Result<f64> + Sync,
) -> Result<f64> {
    let rule = volume_rule(degree)?;
    let parts = (0..mesh.n_elements())
        .into_par_iter()
        .map(|k| {
            let map = mesh.affine(k);
            let mut s = 0.0;
            for (xi, w) in rule.iter() {
                s += w * map.det * f(k, *xi, map.to_physical(*xi))?;
            }
            Ok(s)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(parts.iter().sum::<f64>().sqrt())
}

#[derive(Clone, Debug, PartialEq)]
pub struct StudyConfig {
    pub p: f64,
    pub gamma_case: GammaCase,
    /// Meshes `i = 1..=levels`, `h_i = h_0 / 2^i`.
    pub levels: usize,
    pub degree: usize,
    pub delta: f64,
    pub scheme: SchemeParams,
    pub newton: NewtonConfig,
    pub quad_degree_error: usize,
}

impl StudyConfig {
    pub fn new(p: f64, gamma_case: GammaCase, levels: usize) -> Self {
        StudyConfig {
            p,
            gamma_case,
            levels,
            degree: 1,
            delta: 1e-4,
            scheme: SchemeParams::default(),
            newton: NewtonConfig::default(),
            quad_degree_error: 12,
        }
    }
}

/// Solution on one level together with the data needed downstream.
pub struct LevelSolution {
    pub disc: Discretization,
    pub x: Vec<f64>,
    pub report: SolveReport,
}

/// Builds and solves level `level`, warm-started from `previous` (the
/// solution one level coarser) or by continuation in `p` from zero.
pub fn solve_level(
    cfg: &StudyConfig,
    exact: &ExactSolution,
    level: usize,
    previous: Option<LevelSolution>,
) -> Result<LevelSolution> {
    let mesh = Arc::new(match &previous {
        Some(prev) => prev.disc.mesh.refine_red(),
        None => Mesh::at_level(level),
    });
    let constitutive = ConstitutiveParams::new(cfg.p, cfg.delta)?;
    let mut disc = Discretization::new(
        mesh,
        cfg.degree,
        constitutive,
        cfg.scheme,
        &|x| exact.forcing_or_zero(x),
        &|x| exact.v(x),
    )?;
    let tag = |e: LdgError| LdgError::AtLevel {
        level,
        source: Box::new(e),
    };
    let warm = match previous {
        Some(prev) => {
            let ps = prev.disc.state_from_vector(&prev.x)?;
            let v = prolongate(&ps.v, &disc.velocity)?;
            let q = prolongate(&ps.q, &disc.pressure)?;
            let mut x0 = v.values;
            x0.extend_from_slice(&q.values);
            x0.push(ps.lambda);
            Some(x0)
        }
        None => None,
    };
    let (x, report) = match warm {
        Some(x0) => match newton::solve(&disc, x0.clone(), &cfg.newton) {
            Ok(r) => r,
            Err(e) if e.is_non_convergence() => {
                warn!("level {level}: warm start failed ({e}), retrying with continuation");
                newton::solve_with_continuation(&mut disc, cfg.p, x0, &cfg.newton).map_err(tag)?
            }
            Err(e) => return Err(tag(e)),
        },
        None => {
            let x0 = vec![0.0; disc.n_unknowns()];
            newton::solve_with_continuation(&mut disc, cfg.p, x0, &cfg.newton).map_err(tag)?
        }
    };
    info!(
        "p = {}, case {}, level {level}: {} unknowns, {} Newton iterations, residual {:.2e}",
        cfg.p,
        cfg.gamma_case.number(),
        disc.n_unknowns(),
        report.iterations,
        report.residual_abs
    );
    Ok(LevelSolution { disc, x, report })
}

/// Errors of a solved level (EOC fields left empty).
pub fn level_errors(
    cfg: &StudyConfig,
    exact: &ExactSolution,
    level: usize,
    sol: &LevelSolution,
) -> Result<ErrorRecord> {
    let disc = &sol.disc;
    let state = disc.state_from_vector(&sol.x)?;
    let rec = disc.recover_fields(&state, cfg.quad_degree_error)?;
    let shifts = disc.face_shifts(&state);
    let grad = |x| exact.grad_v(x);
    let e_l = error_e_l(disc, &rec.l, grad, cfg.quad_degree_error)?;
    let e_s = error_e_s(disc, &rec.s, grad, cfg.quad_degree_error)?;
    let e_jump = error_e_jump(disc, &state.v, &shifts, &|x| exact.v(x), cfg.quad_degree_error)?;
    Ok(ErrorRecord {
        level,
        h: disc.mesh.h,
        n_dof: disc.n_unknowns(),
        e_l,
        e_s,
        e_jump,
        eoc_l: None,
        eoc_s: None,
        eoc_jump: None,
        newton_iterations: sol.report.iterations,
        residual: sol.report.residual_abs,
    })
}

/// Full level sweep `i = 1..=levels`.
pub fn run_study(cfg: &StudyConfig) -> Result<Vec<ErrorRecord>> {
    if cfg.levels < 2 {
        return Err(LdgError::InvalidParameter(format!(
            "a study needs at least two levels, got {}",
            cfg.levels
        )));
    }
    let params = ManufacturedParams::new(cfg.p, cfg.gamma_case)?;
    let exact = ExactSolution::new(params, cfg.delta, cfg.scheme.include_convection)?;
    let mut records: Vec<ErrorRecord> = Vec::with_capacity(cfg.levels);
    let mut previous: Option<LevelSolution> = None;
    for level in 1..=cfg.levels {
        let sol = solve_level(cfg, &exact, level, previous.take())?;
        let mut rec = level_errors(cfg, &exact, level, &sol)?;
        if let Some(prev) = records.last() {
            let rate = |a: f64, b: f64| eoc(&[a, b], &[prev.h, rec.h]).ok().map(|v| v[0]);
            rec.eoc_l = rate(prev.e_l, rec.e_l);
            rec.eoc_s = rate(prev.e_s, rec.e_s);
            rec.eoc_jump = rate(prev.e_jump, rec.e_jump);
        }
        records.push(rec);
        previous = Some(sol);
    }
    Ok(records)
}

/// Discrete divergence of the lifted gradient (handy for diagnostics).
pub fn discrete_divergence_norm(disc: &Discretization, x: &[f64]) -> Result<f64> {
    let state = disc.state_from_vector(x)?;
    let l = dgops::lifted_gradient(&state.v, &disc.lift)?;
    let div = dgops::dg_div(&l)?;
    Ok(div.values.iter().map(|v| v * v).sum::<f64>().sqrt())
}
