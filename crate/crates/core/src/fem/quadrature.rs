//! Quadrature on the reference triangle (0,0), (1,0), (0,1) and on intervals.

use crate::error::{Error, Result};

/// Points in barycentric coordinates `[l0, l1, l2]`; reference coordinates
/// are `(l1, l2)`. Weights sum to the reference area 1/2.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    pub degree: usize,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Reference coordinates of point `q`.
    pub fn xy(&self, q: usize) -> (f64, f64) {
        (self.points[q][1], self.points[q][2])
    }

    /// Integrate `f(x, y)` over the reference triangle.
    pub fn integrate(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * f(p[1], p[2]))
            .sum()
    }
}

// Symmetric rules with weights normalised to area 1. Each entry is an orbit
// generator (a, b, c) with its weight; orbits of size 1, 3 or 6 are expanded
// by permuting the barycentric coordinates.
const RULE_1: &[([f64; 3], f64)] = &[([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 1.0)];

const RULE_2: &[([f64; 3], f64)] = &[([2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0], 1.0 / 3.0)];

const RULE_4: &[([f64; 3], f64)] = &[
    (
        [0.108_103_018_168_070, 0.445_948_490_915_965, 0.445_948_490_915_965],
        0.223_381_589_678_011,
    ),
    (
        [0.816_847_572_980_459, 0.091_576_213_509_771, 0.091_576_213_509_771],
        0.109_951_743_655_322,
    ),
];

const RULE_5: &[([f64; 3], f64)] = &[
    ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.225),
    (
        [0.059_715_871_789_770, 0.470_142_064_105_115, 0.470_142_064_105_115],
        0.132_394_152_788_506,
    ),
    (
        [0.797_426_985_353_087, 0.101_286_507_323_456, 0.101_286_507_323_456],
        0.125_939_180_544_827,
    ),
];

const RULE_6: &[([f64; 3], f64)] = &[
    (
        [0.501_426_509_658_179, 0.249_286_745_170_910, 0.249_286_745_170_910],
        0.116_786_275_726_379,
    ),
    (
        [0.873_821_971_016_996, 0.063_089_014_491_502, 0.063_089_014_491_502],
        0.050_844_906_370_207,
    ),
    (
        [0.053_145_049_844_817, 0.310_352_451_033_784, 0.636_502_499_121_399],
        0.082_851_075_618_374,
    ),
];

fn expand(orbits: &[([f64; 3], f64)], degree: usize) -> QuadratureRule {
    let mut points = Vec::new();
    let mut weights = Vec::new();
    for &([a, b, c], w) in orbits {
        let perms: Vec<[f64; 3]> = if a == b && b == c {
            vec![[a, b, c]]
        } else if b == c {
            vec![[a, b, c], [b, a, c], [b, c, a]]
        } else {
            vec![[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]]
        };
        for p in perms {
            points.push(p);
            weights.push(0.5 * w);
        }
    }
    QuadratureRule {
        points,
        weights,
        degree,
    }
}

/// Symmetric rule exact for all polynomials of total degree `degree` (1..=6).
pub fn quadrature_rule(degree: usize) -> Result<QuadratureRule> {
    let orbits = match degree {
        1 => RULE_1,
        2 => RULE_2,
        // The 6-point degree-4 rule has positive weights, unlike the
        // classical degree-3 rule.
        3 | 4 => RULE_4,
        5 => RULE_5,
        6 => RULE_6,
        _ => {
            return Err(Error::InvalidParameter(format!(
                "no symmetric triangle rule of degree {degree}; supported degrees are 1 to 6"
            )))
        }
    };
    Ok(expand(orbits, degree))
}

/// Gauss-Legendre nodes and weights on [0, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "Gauss-Legendre rule needs at least one point");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = 0.5 * (1.0 - x);
        nodes[n - 1 - i] = 0.5 * (1.0 + x);
        weights[i] = 0.5 * w;
        weights[n - 1 - i] = 0.5 * w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Collapsed (Duffy) tensor Gauss rule exact to any requested degree.
pub fn conical_rule(degree: usize) -> QuadratureRule {
    let n = degree / 2 + 1;
    let (gx, gw) = gauss_legendre(n + 1);
    let (hx, hw) = gauss_legendre(n);
    let mut points = Vec::with_capacity(gx.len() * hx.len());
    let mut weights = Vec::with_capacity(gx.len() * hx.len());
    for (&u, &wu) in gx.iter().zip(&gw) {
        for (&v, &wv) in hx.iter().zip(&hw) {
            let x = u;
            let y = v * (1.0 - u);
            points.push([1.0 - x - y, x, y]);
            weights.push(wu * wv * (1.0 - u));
        }
    }
    QuadratureRule {
        points,
        weights,
        degree,
    }
}
