//! Minimal binding to the UMFPACK sparse LU (`umfpack_dl_*`, 64-bit indices).

use std::ffi::c_void;
use std::ptr;
use std::sync::Mutex;

use crate::error::{LdgError, Result};
use crate::sparse::SparseMatrix;

const CONTROL_LEN: usize = 20;
const INFO_LEN: usize = 90;
const STRATEGY: usize = 5;
const ORDERING: usize = 10;
const STRATEGY_SYMMETRIC: f64 = 3.0;
const ORDERING_METIS: f64 = 3.0;
const SYS_A: i64 = 0;

/// Concurrent calls (the METIS ordering and the BLAS kernels) do not give
/// bitwise reproducible results, so every call holds this lock.
static LOCK: Mutex<()> = Mutex::new(());

fn lock() -> std::sync::MutexGuard<'static, ()> {
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

#[link(name = "umfpack")]
extern "C" {
    fn umfpack_dl_defaults(control: *mut f64);
    fn umfpack_dl_symbolic(
        n_row: i64,
        n_col: i64,
        ap: *const i64,
        ai: *const i64,
        ax: *const f64,
        symbolic: *mut *mut c_void,
        control: *const f64,
        info: *mut f64,
    ) -> i64;
    fn umfpack_dl_numeric(
        ap: *const i64,
        ai: *const i64,
        ax: *const f64,
        symbolic: *mut c_void,
        numeric: *mut *mut c_void,
        control: *const f64,
        info: *mut f64,
    ) -> i64;
    fn umfpack_dl_solve(
        sys: i64,
        ap: *const i64,
        ai: *const i64,
        ax: *const f64,
        x: *mut f64,
        b: *const f64,
        numeric: *mut c_void,
        control: *const f64,
        info: *mut f64,
    ) -> i64;
    fn umfpack_dl_free_symbolic(symbolic: *mut *mut c_void);
    fn umfpack_dl_free_numeric(numeric: *mut *mut c_void);
}

// usize and i64 share a layout here, so faer's index arrays are passed as is
const _: () = assert!(std::mem::size_of::<usize>() == std::mem::size_of::<i64>());

struct Numeric(*mut c_void);

impl Drop for Numeric {
    fn drop(&mut self) {
        if !self.0.is_null() {
            unsafe { umfpack_dl_free_numeric(&mut self.0) };
        }
    }
}

/// Symbolic analysis kept for repeated factorizations of one sparsity pattern.
pub struct Umfpack {
    symbolic: *mut c_void,
    shape: (usize, usize),
    control: [f64; CONTROL_LEN],
}

// the handle is owned exclusively and UMFPACK keeps no global state
unsafe impl Send for Umfpack {}

fn check(status: i64, phase: &str) -> Result<()> {
    match status {
        0 => Ok(()),
        1 => Err(LdgError::SingularFactorization(format!("{phase}: matrix is singular"))),
        s => Err(LdgError::SingularFactorization(format!("{phase}: umfpack status {s}"))),
    }
}

fn arrays(a: &SparseMatrix) -> (*const i64, *const i64, *const f64) {
    let s = a.symbolic();
    (
        s.col_ptr().as_ptr() as *const i64,
        s.row_idx().as_ptr() as *const i64,
        a.val().as_ptr(),
    )
}

impl Umfpack {
    pub fn analyze(a: &SparseMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(LdgError::DimensionMismatch {
                expected: a.nrows(),
                got: a.ncols(),
            });
        }
        if a.symbolic().col_nnz().is_some() {
            return Err(LdgError::SingularFactorization(
                "matrix is not in compressed form".into(),
            ));
        }
        let mut control = [0.0; CONTROL_LEN];
        let mut info = [0.0; INFO_LEN];
        let mut symbolic = ptr::null_mut();
        let (ap, ai, ax) = arrays(a);
        let n = a.nrows() as i64;
        let guard = lock();
        let status = unsafe {
            umfpack_dl_defaults(control.as_mut_ptr());
            control[STRATEGY] = STRATEGY_SYMMETRIC;
            control[ORDERING] = ORDERING_METIS;
            umfpack_dl_symbolic(n, n, ap, ai, ax, &mut symbolic, control.as_ptr(), info.as_mut_ptr())
        };
        drop(guard);
        let out = Umfpack {
            symbolic,
            shape: (a.nrows(), a.compute_nnz()),
            control,
        };
        check(status, "symbolic analysis")?;
        Ok(out)
    }

    pub fn matches(&self, a: &SparseMatrix) -> bool {
        self.shape == (a.nrows(), a.compute_nnz())
    }

    pub fn solve(&self, a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
        let (ap, ai, ax) = arrays(a);
        let mut info = [0.0; INFO_LEN];
        let mut numeric = Numeric(ptr::null_mut());
        let _guard = lock();
        let status = unsafe {
            umfpack_dl_numeric(
                ap,
                ai,
                ax,
                self.symbolic,
                &mut numeric.0,
                self.control.as_ptr(),
                info.as_mut_ptr(),
            )
        };
        check(status, "numeric factorization")?;
        let mut x = vec![0.0; b.len()];
        let status = unsafe {
            umfpack_dl_solve(
                SYS_A,
                ap,
                ai,
                ax,
                x.as_mut_ptr(),
                b.as_ptr(),
                numeric.0,
                self.control.as_ptr(),
                info.as_mut_ptr(),
            )
        };
        check(status, "triangular solve")?;
        Ok(x)
    }
}

impl Drop for Umfpack {
    fn drop(&mut self) {
        if !self.symbolic.is_null() {
            unsafe { umfpack_dl_free_symbolic(&mut self.symbolic) };
        }
    }
}
