//! Truncated fractional Laplacian: kernel constant, element-pair
//! classification, pair integration and the dense assembled operator.

mod operator;
mod pair;

pub use operator::{
    apply_fractional, assemble_fractional, assemble_fractional_rows, DenseOperator, RowSet,
};
pub use pair::{pair_matrix, PairMatrix};

use statrs::function::gamma::gamma;

use crate::error::{Error, Result};
use crate::mesh::Point2;

/// Parameters of the nonlocal term.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionalParams {
    /// Order of the fractional Laplacian, in (0, 1).
    pub alpha: f64,
    /// Closure coefficient multiplying the nonlocal term.
    pub gamma: f64,
    /// Truncation radius of the kernel.
    pub lambda: f64,
    /// Exactness degree of the triangle rules used per element.
    pub pair_quadrature_degree: usize,
    /// Grading levels of the outer rule for singular and near pairs.
    pub diagonal_refinement_levels: usize,
}

impl FractionalParams {
    pub fn new(alpha: f64, gamma: f64, lambda: f64) -> Result<Self> {
        let p = Self {
            alpha,
            gamma,
            lambda,
            pair_quadrature_degree: 6,
            diagonal_refinement_levels: 4,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "alpha = {} must lie in (0, 1)",
                self.alpha
            )));
        }
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "gamma = {} must be finite and nonnegative",
                self.gamma
            )));
        }
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "lambda = {} must be finite and positive",
                self.lambda
            )));
        }
        if !(1..=6).contains(&self.pair_quadrature_degree) {
            return Err(Error::InvalidParameter(format!(
                "pair quadrature degree {} must be between 1 and 6",
                self.pair_quadrature_degree
            )));
        }
        if self.diagonal_refinement_levels < 1 {
            return Err(Error::InvalidParameter(
                "at least one refinement level is required".into(),
            ));
        }
        Ok(())
    }
}

/// C_{d,α} = α 2^{2α} Γ((d+2)/2) / (Γ(1/2) Γ(1−α)).
pub fn kernel_constant(d: usize, alpha: f64) -> Result<f64> {
    if !(1..=2).contains(&d) {
        return Err(Error::InvalidParameter(format!("dimension {d} must be 1 or 2")));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter(format!("alpha = {alpha} must lie in (0, 1)")));
    }
    let d = d as f64;
    Ok(alpha * 2f64.powf(2.0 * alpha) * gamma((d + 2.0) / 2.0)
        / (gamma(0.5) * gamma(1.0 - alpha)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PairClass {
    Identical,
    Touching,
    DisjointNear,
    DisjointFar,
}

/// Classify two triangles of one mesh given by index and corners. `h` is
/// the mesh size.
pub fn classify_pair(
    t1: (usize, &[usize; 3]),
    t2: (usize, &[usize; 3]),
    corners1: &[Point2; 3],
    corners2: &[Point2; 3],
    lambda: f64,
    h: f64,
) -> PairClass {
    if t1.0 == t2.0 {
        return PairClass::Identical;
    }
    if t1.1.iter().any(|v| t2.1.contains(v)) {
        return PairClass::Touching;
    }
    if min_vertex_distance(corners1, corners2) > lambda + 2.0 * h {
        PairClass::DisjointFar
    } else {
        PairClass::DisjointNear
    }
}

pub(crate) fn min_vertex_distance(a: &[Point2; 3], b: &[Point2; 3]) -> f64 {
    let mut d = f64::INFINITY;
    for p in a {
        for q in b {
            d = d.min(p.distance(*q));
        }
    }
    d
}
