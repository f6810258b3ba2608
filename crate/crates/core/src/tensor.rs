//! Small fixed-size 2×2 tensors used at quadrature points.

use std::ops::{Add, AddAssign, Mul, Neg, Sub};

/// General 2×2 real matrix, row-major.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Tensor2(pub [[f64; 2]; 2]);

impl Tensor2 {
    pub const ZERO: Tensor2 = Tensor2([[0.0; 2]; 2]);
    pub const IDENTITY: Tensor2 = Tensor2([[1.0, 0.0], [0.0, 1.0]]);

    pub fn new(a11: f64, a12: f64, a21: f64, a22: f64) -> Self {
        Tensor2([[a11, a12], [a21, a22]])
    }

    /// `u ⊗ w`, i.e. entries `u_i w_j`.
    pub fn outer(u: [f64; 2], w: [f64; 2]) -> Self {
        Tensor2([[u[0] * w[0], u[0] * w[1]], [u[1] * w[0], u[1] * w[1]]])
    }

    /// Components in the order `[a11, a12, a21, a22]`.
    pub fn from_components(c: [f64; 4]) -> Self {
        Tensor2([[c[0], c[1]], [c[2], c[3]]])
    }

    pub fn components(&self) -> [f64; 4] {
        [self.0[0][0], self.0[0][1], self.0[1][0], self.0[1][1]]
    }

    pub fn sym(&self) -> SymTensor2 {
        SymTensor2 {
            a11: self.0[0][0],
            a12: 0.5 * (self.0[0][1] + self.0[1][0]),
            a22: self.0[1][1],
        }
    }

    pub fn transpose(&self) -> Self {
        Tensor2([[self.0[0][0], self.0[1][0]], [self.0[0][1], self.0[1][1]]])
    }

    pub fn trace(&self) -> f64 {
        self.0[0][0] + self.0[1][1]
    }

    pub fn ddot(&self, other: &Tensor2) -> f64 {
        self.0[0][0] * other.0[0][0]
            + self.0[0][1] * other.0[0][1]
            + self.0[1][0] * other.0[1][0]
            + self.0[1][1] * other.0[1][1]
    }

    pub fn norm(&self) -> f64 {
        self.ddot(self).sqrt()
    }

    /// Matrix-vector product `A u`.
    pub fn apply(&self, u: [f64; 2]) -> [f64; 2] {
        [
            self.0[0][0] * u[0] + self.0[0][1] * u[1],
            self.0[1][0] * u[0] + self.0[1][1] * u[1],
        ]
    }

    pub fn scale(&self, s: f64) -> Self {
        let a = self.0;
        Tensor2([[s * a[0][0], s * a[0][1]], [s * a[1][0], s * a[1][1]]])
    }
}

impl Add for Tensor2 {
    type Output = Tensor2;
    fn add(self, o: Tensor2) -> Tensor2 {
        let (a, b) = (self.0, o.0);
        Tensor2([
            [a[0][0] + b[0][0], a[0][1] + b[0][1]],
            [a[1][0] + b[1][0], a[1][1] + b[1][1]],
        ])
    }
}

impl AddAssign for Tensor2 {
    fn add_assign(&mut self, o: Tensor2) {
        *self = *self + o;
    }
}

impl Sub for Tensor2 {
    type Output = Tensor2;
    fn sub(self, o: Tensor2) -> Tensor2 {
        self + o.scale(-1.0)
    }
}

impl Neg for Tensor2 {
    type Output = Tensor2;
    fn neg(self) -> Tensor2 {
        self.scale(-1.0)
    }
}

impl Mul<Tensor2> for f64 {
    type Output = Tensor2;
    fn mul(self, t: Tensor2) -> Tensor2 {
        t.scale(self)
    }
}

/// Symmetric 2×2 matrix; `a21 ≡ a12` by construction.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SymTensor2 {
    pub a11: f64,
    pub a12: f64,
    pub a22: f64,
}

impl SymTensor2 {
    pub const ZERO: SymTensor2 = SymTensor2 {
        a11: 0.0,
        a12: 0.0,
        a22: 0.0,
    };

    pub fn new(a11: f64, a12: f64, a22: f64) -> Self {
        SymTensor2 { a11, a12, a22 }
    }

    pub fn norm(&self) -> f64 {
        self.ddot(self).sqrt()
    }

    pub fn ddot(&self, o: &SymTensor2) -> f64 {
        self.a11 * o.a11 + 2.0 * self.a12 * o.a12 + self.a22 * o.a22
    }

    pub fn trace(&self) -> f64 {
        self.a11 + self.a22
    }

    pub fn scale(&self, s: f64) -> Self {
        SymTensor2::new(s * self.a11, s * self.a12, s * self.a22)
    }

    pub fn to_tensor(&self) -> Tensor2 {
        Tensor2([[self.a11, self.a12], [self.a12, self.a22]])
    }

    pub fn apply(&self, u: [f64; 2]) -> [f64; 2] {
        [self.a11 * u[0] + self.a12 * u[1], self.a12 * u[0] + self.a22 * u[1]]
    }
}

impl Add for SymTensor2 {
    type Output = SymTensor2;
    fn add(self, o: SymTensor2) -> SymTensor2 {
        SymTensor2::new(self.a11 + o.a11, self.a12 + o.a12, self.a22 + o.a22)
    }
}

impl Sub for SymTensor2 {
    type Output = SymTensor2;
    fn sub(self, o: SymTensor2) -> SymTensor2 {
        SymTensor2::new(self.a11 - o.a11, self.a12 - o.a12, self.a22 - o.a22)
    }
}

impl From<SymTensor2> for Tensor2 {
    fn from(s: SymTensor2) -> Tensor2 {
        s.to_tensor()
    }
}
