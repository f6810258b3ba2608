//! The (p, δ) N-function, its shifted family and the associated tensor maps.
//!
//! With `φ'(t) = (δ + t)^{p-2} t` every shifted function `φ_a` is the same
//! function with `δ` replaced by `δ + a`, so all closed forms below are
//! written in terms of the combined offset `c = δ + a`.

use crate::error::{LdgError, Result};
use crate::tensor::{SymTensor2, Tensor2};

/// Below this norm the rank-one part of the stress derivative is dropped.
pub const SINGULAR_NORM: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConstitutiveParams {
    p: f64,
    delta: f64,
}

impl ConstitutiveParams {
    pub fn new(p: f64, delta: f64) -> Result<Self> {
        if !(p > 1.0 && p.is_finite()) {
            return Err(LdgError::InvalidParameter(format!("p must be > 1, got {p}")));
        }
        if !(delta >= 0.0 && delta.is_finite()) {
            return Err(LdgError::InvalidParameter(format!("delta must be >= 0, got {delta}")));
        }
        Ok(ConstitutiveParams { p, delta })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Conjugate exponent `p' = p / (p - 1)`.
    pub fn p_conj(&self) -> f64 {
        self.p / (self.p - 1.0)
    }

    /// Same exponent, different regularization.
    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        Self::new(self.p, delta)
    }

    pub fn with_p(&self, p: f64) -> Result<Self> {
        Self::new(p, self.delta)
    }

    /// `φ(t) = ∫₀ᵗ (δ+s)^{p-2} s ds`.
    pub fn phi(&self, t: f64) -> Result<f64> {
        self.phi_shifted(0.0, t)
    }

    /// Shifted N-function `φ_a(t) = ∫₀ᵗ (δ+a+s)^{p-2} s ds`.
    pub fn phi_shifted(&self, a: f64, t: f64) -> Result<f64> {
        if a < 0.0 || a.is_nan() {
            return Err(LdgError::Domain(format!("negative shift a = {a}")));
        }
        if t < 0.0 || t.is_nan() {
            return Err(LdgError::Domain(format!("negative argument t = {t}")));
        }
        Ok(phi_offset(self.p, self.delta + a, t))
    }

    /// `φ'_a(t) = (δ+a+t)^{p-2} t`.
    pub fn phi_shifted_prime(&self, a: f64, t: f64) -> f64 {
        if t == 0.0 {
            return 0.0;
        }
        (self.delta + a + t).powf(self.p - 2.0) * t
    }

    /// `S(A) = (δ + |A^sym|)^{p-2} A^sym`.
    pub fn stress(&self, a: &Tensor2) -> SymTensor2 {
        power_law(a.sym(), self.delta, self.p - 2.0)
    }

    /// `S_a(A) = φ'_a(|A^sym|) / |A^sym| · A^sym = (δ+a+|A^sym|)^{p-2} A^sym`.
    pub fn stress_shifted(&self, shift: f64, a: &Tensor2) -> SymTensor2 {
        power_law(a.sym(), self.delta + shift, self.p - 2.0)
    }

    pub fn stress_derivative(&self, a: &Tensor2) -> StressJacobian {
        self.stress_shifted_derivative(0.0, a)
    }

    /// Derivative of `B ↦ S_a(B)` at `A`.
    pub fn stress_shifted_derivative(&self, shift: f64, a: &Tensor2) -> StressJacobian {
        let s = a.sym();
        let n = s.norm();
        let c = self.delta + shift;
        let base = c + n;
        let scalar = if base == 0.0 {
            if self.p > 2.0 {
                0.0
            } else if self.p == 2.0 {
                1.0
            } else {
                f64::INFINITY
            }
        } else {
            base.powf(self.p - 2.0)
        };
        if n < SINGULAR_NORM {
            return StressJacobian {
                scalar,
                rank_one: 0.0,
                direction: SymTensor2::ZERO,
            };
        }
        StressJacobian {
            scalar,
            rank_one: (self.p - 2.0) * base.powf(self.p - 3.0) * n,
            direction: s.scale(1.0 / n),
        }
    }

    /// `F(A) = (δ + |A^sym|)^{(p-2)/2} A^sym`.
    pub fn f_map(&self, a: &Tensor2) -> SymTensor2 {
        power_law(a.sym(), self.delta, 0.5 * (self.p - 2.0))
    }

    /// `F*(A) = (δ^{p-1} + |A^sym|)^{(p'-2)/2} A^sym`.
    pub fn fstar_map(&self, a: &Tensor2) -> SymTensor2 {
        power_law(a.sym(), self.delta.powf(self.p - 1.0), 0.5 * (self.p_conj() - 2.0))
    }
}

/// `(c + |s|)^e s`, with the origin mapped to zero.
fn power_law(s: SymTensor2, c: f64, e: f64) -> SymTensor2 {
    let n = s.norm();
    if n == 0.0 {
        return SymTensor2::ZERO;
    }
    s.scale((c + n).powf(e))
}

/// `∫₀ᵗ (c+s)^{p-2} s ds` for `c, t ≥ 0`.
///
/// For `t ≪ c` the closed form cancels badly, so a binomial series in `t/c`
/// is summed instead.
fn phi_offset(p: f64, c: f64, t: f64) -> f64 {
    if t == 0.0 {
        return 0.0;
    }
    let x = if c > 0.0 { t / c } else { f64::INFINITY };
    if x < 0.05 {
        // c^p Σ_n binom(p-2, n) x^{n+2} / (n+2)
        let mut coeff = 1.0;
        let mut xp = x * x;
        let mut sum = 0.0;
        for n in 0..40 {
            let term = coeff * xp / (n as f64 + 2.0);
            sum += term;
            if term.abs() <= 1e-18 * sum.abs() {
                break;
            }
            coeff *= (p - 2.0 - n as f64) / (n as f64 + 1.0);
            xp *= x;
        }
        return c.powf(p) * sum;
    }
    let ct = c + t;
    t * ct.powf(p - 1.0) / (p - 1.0) - (ct.powf(p) - c.powf(p)) / (p * (p - 1.0))
}

/// Linear map `B ↦ scalar·B^sym + rank_one·(dir : B^sym)·dir`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StressJacobian {
    pub scalar: f64,
    pub rank_one: f64,
    pub direction: SymTensor2,
}

impl StressJacobian {
    pub fn apply(&self, b: &Tensor2) -> SymTensor2 {
        let bs = b.sym();
        let proj = self.direction.ddot(&bs);
        bs.scale(self.scalar) + self.direction.scale(self.rank_one * proj)
    }

    /// Row-major 4×4 matrix on `[a11, a12, a21, a22]` components, output as
    /// the full (symmetric) tensor.
    pub fn matrix4(&self) -> [[f64; 4]; 4] {
        let mut m = [[0.0; 4]; 4];
        for (col, row) in (0..4).map(|c| {
            let mut e = [0.0; 4];
            e[c] = 1.0;
            (c, self.apply(&Tensor2::from_components(e)).to_tensor().components())
        }) {
            for r in 0..4 {
                m[r][col] = row[r];
            }
        }
        m
    }

    /// Symmetric 3×3 representation in the orthonormal coordinates
    /// `(b11, b22, √2·b12)` of symmetric tensors.
    pub fn voigt(&self) -> [[f64; 3]; 3] {
        let r2 = std::f64::consts::SQRT_2;
        let basis = [
            SymTensor2::new(1.0, 0.0, 0.0),
            SymTensor2::new(0.0, 0.0, 1.0),
            SymTensor2::new(0.0, 1.0 / r2, 0.0),
        ];
        let mut m = [[0.0; 3]; 3];
        for (j, bj) in basis.iter().enumerate() {
            let out = self.apply(&bj.to_tensor());
            for (i, bi) in basis.iter().enumerate() {
                m[i][j] = bi.ddot(&out);
            }
        }
        m
    }
}
