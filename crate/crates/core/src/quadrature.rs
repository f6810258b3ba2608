//! Quadrature on the reference triangle `{(ξ, η) : ξ, η ≥ 0, ξ + η ≤ 1}`
//! and the reference edge `(0, 1)`.
//!
//! Triangle rules up to degree 8 are fully symmetric with positive weights
//! and interior points. Other degrees up to
//! [`MAX_TRIANGLE_DEGREE`] fall back to a collapsed (Duffy) Gauss product
//! rule, which is also positive and interior but not symmetric.

use crate::error::{LdgError, Result};

pub const MAX_TRIANGLE_DEGREE: usize = 20;
pub const MAX_EDGE_DEGREE: usize = 41;

#[derive(Clone, Debug)]
pub struct QuadratureRule {
    /// Reference coordinates; edge rules use only the first entry.
    pub points: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[f64; 2], f64)> {
        self.points.iter().zip(self.weights.iter().copied())
    }
}

// Orbit generators: (kind, parameters, weight). Weights sum to 1/2.
// 'c' = centroid, 'a' = (a, a, 1-2a), 'b' = permutations of (a, b, 1-a-b).
type Orbit = (char, &'static [f64], f64);

const RULE_1: &[Orbit] = &[('c', &[], 0.5)];
const RULE_2: &[Orbit] = &[('a', &[1.0 / 6.0], 1.0 / 6.0)];
const RULE_3: &[Orbit] = &[
    ('a', &[0.447_048_936_398_614_76], 0.077_815_291_715_258_79),
    ('a', &[0.131_392_121_788_892_45], 0.088_851_374_951_407_9),
];
const RULE_4: &[Orbit] = &[
    ('a', &[0.445_948_490_915_964_67], 0.111_690_794_839_005_49),
    ('a', &[0.091_576_213_509_771_09], 0.054_975_871_827_661_2),
];
const RULE_5: &[Orbit] = &[
    ('c', &[], 0.1125),
    ('a', &[0.101_286_507_323_456_68], 0.062_969_590_272_413_88),
    ('a', &[0.470_142_064_105_116_16], 0.066_197_076_394_251_65),
];
const RULE_6: &[Orbit] = &[
    ('a', &[0.249_286_745_170_917_26], 0.058_393_137_863_183_53),
    ('a', &[0.063_089_014_491_500_5], 0.025_422_453_185_102_268),
    (
        'b',
        &[0.310_352_451_033_779_06, 0.053_145_049_844_822_26],
        0.041_425_537_809_190_43,
    ),
];
const RULE_7: &[Orbit] = &[
    ('a', &[0.140_546_538_894_568_9], 0.046_320_797_794_748_54),
    ('a', &[0.423_715_007_866_946_94], 0.075_624_450_066_863_44),
    ('a', &[0.040_496_569_507_998_87], 0.011_942_300_829_961_007),
    (
        'b',
        &[0.004_368_416_419_856_677, 0.311_484_360_318_227_1],
        0.016_389_558_987_546_838,
    ),
];
const RULE_8: &[Orbit] = &[
    ('c', &[], 0.072_157_803_838_894_53),
    ('a', &[0.050_547_228_317_030_34], 0.016_229_248_811_599_064),
    ('a', &[0.170_569_307_751_754_44], 0.051_608_685_267_359_69),
    ('a', &[0.459_292_588_292_720_3], 0.047_545_817_133_642_7),
    (
        'b',
        &[0.263_112_829_634_653_7, 0.008_394_777_409_952_628],
        0.013_615_157_087_216_848,
    ),
];

fn symmetric_table(degree: usize) -> Option<&'static [Orbit]> {
    Some(match degree {
        0 | 1 => RULE_1,
        2 => RULE_2,
        3 => RULE_3,
        4 => RULE_4,
        5 => RULE_5,
        6 => RULE_6,
        7 => RULE_7,
        8 => RULE_8,
        _ => return None,
    })
}

fn expand(orbits: &[Orbit], degree: usize) -> QuadratureRule {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for &(kind, par, w) in orbits {
        let bary: Vec<[f64; 3]> = match kind {
            'c' => vec![[1.0 / 3.0; 3]],
            'a' => {
                let a = par[0];
                let b = 1.0 - 2.0 * a;
                vec![[a, a, b], [a, b, a], [b, a, a]]
            }
            _ => {
                let (a, b) = (par[0], par[1]);
                let c = 1.0 - a - b;
                vec![[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]]
            }
        };
        for l in bary {
            points.push([l[1], l[2]]);
            weights.push(w);
        }
    }
    QuadratureRule {
        points,
        weights,
        degree,
    }
}

/// Triangle rule exact for polynomials of total degree `degree`.
pub fn volume_rule(degree: usize) -> Result<QuadratureRule> {
    if degree > MAX_TRIANGLE_DEGREE {
        return Err(LdgError::UnsupportedDegree {
            degree,
            max: MAX_TRIANGLE_DEGREE,
        });
    }
    if let Some(t) = symmetric_table(degree) {
        return Ok(expand(t, degree.max(1)));
    }
    Ok(collapsed_rule(degree))
}

/// Duffy map `(s, t) ↦ (s, (1-s) t)` with Gauss-Legendre factors.
fn collapsed_rule(degree: usize) -> QuadratureRule {
    // the Jacobian factor (1 - s) raises the degree in s by one
    let (xs, ws) = gauss_legendre(degree.div_ceil(2) + 1);
    let (xt, wt) = gauss_legendre(degree / 2 + 1);
    let mut points = Vec::with_capacity(xs.len() * xt.len());
    let mut weights = Vec::with_capacity(xs.len() * xt.len());
    for (s, ws) in xs.iter().zip(&ws) {
        for (t, wt) in xt.iter().zip(&wt) {
            points.push([*s, (1.0 - s) * t]);
            weights.push(ws * wt * (1.0 - s));
        }
    }
    QuadratureRule {
        points,
        weights,
        degree,
    }
}

/// Gauss-Legendre rule on `(0, 1)` exact for polynomials of degree `degree`.
pub fn face_rule(degree: usize) -> Result<QuadratureRule> {
    if degree > MAX_EDGE_DEGREE {
        return Err(LdgError::UnsupportedDegree {
            degree,
            max: MAX_EDGE_DEGREE,
        });
    }
    let n = degree / 2 + 1;
    let (x, w) = gauss_legendre(n);
    Ok(QuadratureRule {
        points: x.iter().map(|&t| [t, 0.0]).collect(),
        weights: w,
        degree: degree.max(1),
    })
}

/// `n`-point Gauss-Legendre nodes and weights on `(0, 1)`, ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Chebyshev-like initial guess, then Newton on P_n.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                let jf = j as f64;
                p0 = ((2.0 * jf + 1.0) * z * p1 - jf * p2) / (jf + 1.0);
            }
            dp = nf * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        // map [-1, 1] → [0, 1]
        x[i] = 0.5 * (1.0 - z);
        x[n - 1 - i] = 0.5 * (1.0 + z);
        w[i] = 0.5 * wi;
        w[n - 1 - i] = 0.5 * wi;
    }
    (x, w)
}
