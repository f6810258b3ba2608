//! Damped Newton iteration with sparse LU solves and continuation in `p`.

#[cfg(not(feature = "umfpack"))]
use faer::linalg::solvers::Solve;
#[cfg(not(feature = "umfpack"))]
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
#[cfg(not(feature = "umfpack"))]
use faer::Mat;
use log::{debug, info};

use crate::assembly::Discretization;
use crate::error::{LdgError, Result};
use crate::sparse::SparseMatrix;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonConfig {
    pub tau_abs: f64,
    pub tau_rel: f64,
    pub max_iters: usize,
    /// Step reduction factor of the backtracking line search.
    pub damping: f64,
    pub max_backtracks: usize,
    pub continuation_step: f64,
}

impl Default for NewtonConfig {
    fn default() -> Self {
        NewtonConfig {
            tau_abs: 1e-8,
            tau_rel: 1e-10,
            max_iters: 50,
            damping: 0.5,
            max_backtracks: 10,
            continuation_step: 0.25,
        }
    }
}

impl NewtonConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_abs > 0.0 && self.tau_rel > 0.0) {
            return Err(LdgError::InvalidParameter("tolerances must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(LdgError::InvalidParameter("max_iters must be at least 1".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(LdgError::InvalidParameter(format!(
                "damping must lie in (0, 1], got {}",
                self.damping
            )));
        }
        if !(self.continuation_step > 0.0) {
            return Err(LdgError::InvalidParameter("continuation step must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ContinuationStage {
    pub p: f64,
    pub iterations: usize,
    pub residual: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    pub residual_abs: f64,
    pub residual_rel: f64,
    pub converged: bool,
    /// Residual norm before each iteration and at the end.
    pub history: Vec<f64>,
    pub continuation: Vec<ContinuationStage>,
}

pub trait NonlinearProblem {
    fn dimension(&self) -> usize;
    fn residual(&self, x: &[f64]) -> Result<Vec<f64>>;
    fn jacobian(&self, x: &[f64]) -> Result<SparseMatrix>;
}

/// A problem family indexed by the power-law exponent.
pub trait PowerLawFamily: NonlinearProblem {
    fn p(&self) -> f64;
    fn set_p(&mut self, p: f64) -> Result<()>;
}

impl NonlinearProblem for Discretization {
    fn dimension(&self) -> usize {
        self.n_unknowns()
    }

    fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.residual_vec(x)
    }

    fn jacobian(&self, x: &[f64]) -> Result<SparseMatrix> {
        Discretization::jacobian(self, x)
    }
}

impl PowerLawFamily for Discretization {
    fn p(&self) -> f64 {
        self.constitutive.p()
    }

    fn set_p(&mut self, p: f64) -> Result<()> {
        let c = self.constitutive.with_p(p)?;
        self.set_constitutive(c);
        Ok(())
    }
}

/// Sparse LU with the symbolic analysis cached across factorizations of
/// matrices sharing one pattern. Uses UMFPACK with a METIS ordering when the
/// `umfpack` feature is on and faer's LU otherwise.
#[derive(Default)]
pub struct LinearSolver {
    #[cfg(feature = "umfpack")]
    umfpack: Option<crate::umfpack::Umfpack>,
    #[cfg(not(feature = "umfpack"))]
    symbolic: Option<SymbolicLu<usize>>,
}

impl LinearSolver {
    pub fn new() -> Self {
        // sequential kernels keep pivoting and summation order reproducible
        faer::set_global_parallelism(faer::Par::Seq);
        LinearSolver::default()
    }

    pub fn solve(&mut self, a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
        if a.nrows() != b.len() || a.ncols() != b.len() {
            return Err(LdgError::DimensionMismatch {
                expected: a.nrows(),
                got: b.len(),
            });
        }
        let x = self.factor_and_solve(a, b)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(LdgError::SingularFactorization("non-finite solution".into()));
        }
        Ok(x)
    }

    #[cfg(feature = "umfpack")]
    fn factor_and_solve(&mut self, a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
        use crate::umfpack::Umfpack;
        if !self.umfpack.as_ref().is_some_and(|u| u.matches(a)) {
            self.umfpack = None;
            self.umfpack = Some(Umfpack::analyze(a)?);
        }
        self.umfpack.as_ref().expect("analysed above").solve(a, b)
    }

    #[cfg(not(feature = "umfpack"))]
    fn factor_and_solve(&mut self, a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
        let symbolic = match &self.symbolic {
            Some(s) => s.clone(),
            _ => {
                let s = SymbolicLu::try_new(a.symbolic())
                    .map_err(|e| LdgError::SingularFactorization(format!("symbolic analysis: {e:?}")))?;
                self.symbolic = Some(s.clone());
                s
            }
        };
        let lu = Lu::try_new_with_symbolic(symbolic, a.as_ref())
            .map_err(|e| LdgError::SingularFactorization(format!("{e:?}")))?;
        let mut rhs = Mat::from_fn(b.len(), 1, |i, _| b[i]);
        lu.solve_in_place(rhs.as_mut());
        Ok((0..b.len()).map(|i| rhs[(i, 0)]).collect())
    }
}

pub fn norm(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Newton's method from `x0`.
pub fn solve<P: NonlinearProblem + ?Sized>(
    problem: &P,
    x0: Vec<f64>,
    cfg: &NewtonConfig,
) -> Result<(Vec<f64>, SolveReport)> {
    let mut lin = LinearSolver::new();
    solve_with(problem, x0, cfg, &mut lin)
}

pub fn solve_with<P: NonlinearProblem + ?Sized>(
    problem: &P,
    x0: Vec<f64>,
    cfg: &NewtonConfig,
    lin: &mut LinearSolver,
) -> Result<(Vec<f64>, SolveReport)> {
    cfg.validate()?;
    if x0.len() != problem.dimension() {
        return Err(LdgError::DimensionMismatch {
            expected: problem.dimension(),
            got: x0.len(),
        });
    }
    let mut x = x0;
    let mut r = problem.residual(&x)?;
    let r0 = norm(&r);
    let mut rn = r0;
    let mut report = SolveReport {
        history: vec![rn],
        ..SolveReport::default()
    };
    let done = |rn: f64| rn <= cfg.tau_abs || (r0 > 0.0 && rn / r0 <= cfg.tau_rel);
    while !done(rn) {
        if report.iterations >= cfg.max_iters {
            return Err(LdgError::NonConvergence {
                reason: "iteration limit reached".into(),
                iterations: report.iterations,
                residual: rn,
                stage: None,
            });
        }
        let jac = problem.jacobian(&x)?;
        let dx = lin.solve(&jac, &r)?;
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=cfg.max_backtracks {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a - step * d).collect();
            let rt = problem.residual(&trial)?;
            let tn = norm(&rt);
            if tn.is_finite() && tn < rn {
                accepted = Some((trial, rt, tn));
                break;
            }
            step *= cfg.damping;
        }
        report.iterations += 1;
        match accepted {
            Some((xt, rt, tn)) => {
                debug!("newton iteration {}: step {step}, residual {tn:.3e}", report.iterations);
                x = xt;
                r = rt;
                rn = tn;
                report.history.push(rn);
            }
            None => {
                return Err(LdgError::NonConvergence {
                    reason: "line search stalled".into(),
                    iterations: report.iterations,
                    residual: rn,
                    stage: None,
                });
            }
        }
    }
    report.residual_abs = rn;
    report.residual_rel = if r0 > 0.0 { rn / r0 } else { 0.0 };
    report.converged = true;
    Ok((x, report))
}

/// Values of `p` visited when continuing from 2 to `target`.
pub fn continuation_ladder(target: f64, step: f64) -> Vec<f64> {
    let mut ladder = Vec::new();
    if target > 2.0 {
        let mut p = 2.0;
        while p < target - 1e-12 {
            ladder.push(p);
            p += step;
        }
    }
    ladder.push(target);
    ladder
}

/// Solves at `p = 2` first and walks up to `target` in steps of
/// `cfg.continuation_step`, warm-starting every stage.
pub fn solve_with_continuation<P: PowerLawFamily + ?Sized>(
    problem: &mut P,
    target: f64,
    x0: Vec<f64>,
    cfg: &NewtonConfig,
) -> Result<(Vec<f64>, SolveReport)> {
    cfg.validate()?;
    let mut lin = LinearSolver::new();
    let mut x = x0;
    let mut total = SolveReport::default();
    for p in continuation_ladder(target, cfg.continuation_step) {
        problem.set_p(p)?;
        let (xs, rep) = solve_with(&*problem, x, cfg, &mut lin).map_err(|e| match e {
            LdgError::NonConvergence {
                reason,
                iterations,
                residual,
                ..
            } => LdgError::NonConvergence {
                reason,
                iterations,
                residual,
                stage: Some(p),
            },
            other => other,
        })?;
        info!("continuation stage p = {p}: {} iterations", rep.iterations);
        x = xs;
        total.continuation.push(ContinuationStage {
            p,
            iterations: rep.iterations,
            residual: rep.residual_abs,
        });
        total.iterations += rep.iterations;
        total.history.extend(rep.history);
        total.residual_abs = rep.residual_abs;
        total.residual_rel = rep.residual_rel;
        total.converged = rep.converged;
    }
    Ok((x, total))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::from_triplets;

    /// `x_i² − c_i = 0`, diagonal Jacobian.
    struct Squares(Vec<f64>);

    impl NonlinearProblem for Squares {
        fn dimension(&self) -> usize {
            self.0.len()
        }
        fn residual(&self, x: &[f64]) -> Result<Vec<f64>> {
            Ok(x.iter().zip(&self.0).map(|(a, c)| a * a - c).collect())
        }
        fn jacobian(&self, x: &[f64]) -> Result<SparseMatrix> {
            let t: Vec<_> = x.iter().enumerate().map(|(i, a)| (i, i, 2.0 * a)).collect();
            from_triplets(x.len(), x.len(), &t)
        }
    }

    #[test]
    fn solves_scalar_squares() {
        let p = Squares(vec![4.0, 9.0, 2.0]);
        let (x, rep) = solve(&p, vec![1.0, 1.0, 1.0], &NewtonConfig::default()).unwrap();
        assert!(rep.converged);
        // |x - root| ≈ |r| / (2 root)
        assert!((x[0] - 2.0).abs() < 1e-8 && (x[1] - 3.0).abs() < 1e-8);
        assert!((x[2] - 2f64.sqrt()).abs() < 1e-8);
        assert!(rep.residual_abs <= 1e-8);
    }

    #[test]
    fn exact_root_needs_no_iteration() {
        let p = Squares(vec![1.0]);
        let (_, rep) = solve(&p, vec![1.0], &NewtonConfig::default()).unwrap();
        assert_eq!(rep.iterations, 0);
    }

    #[test]
    fn singular_jacobian_is_reported() {
        let p = Squares(vec![1.0]);
        let e = solve(&p, vec![0.0], &NewtonConfig::default()).unwrap_err();
        assert!(matches!(e, LdgError::SingularFactorization(_)), "{e:?}");
    }

    #[test]
    fn iteration_limit() {
        let p = Squares(vec![4.0]);
        let cfg = NewtonConfig {
            max_iters: 1,
            ..NewtonConfig::default()
        };
        assert!(solve(&p, vec![100.0], &cfg).unwrap_err().is_non_convergence());
    }

    #[test]
    fn ladder() {
        assert_eq!(continuation_ladder(2.0, 0.25), vec![2.0]);
        assert_eq!(continuation_ladder(2.5, 0.25), vec![2.0, 2.25, 2.5]);
        assert_eq!(continuation_ladder(3.5, 0.25).len(), 7);
        assert_eq!(continuation_ladder(2.3, 0.25), vec![2.0, 2.25, 2.3]);
    }
}
