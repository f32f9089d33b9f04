//! Reference elements, quadrature, dof numbering and interpolation.

pub mod basis;
pub mod dofmap;
pub mod quadrature;

pub use basis::{reference_basis_p1, reference_basis_p2, BasisEval, ElementGeometry};
pub use dofmap::{build_dof_map, DofMap};
pub use quadrature::{quadrature_rule, QuadratureRule};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    P1,
    P2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    VelocityX,
    VelocityY,
    Pressure,
}

/// Coefficients in dof order: P2 nodes for velocity components, pressure
/// dofs for pressure.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientVector {
    pub role: Role,
    pub values: Vec<f64>,
}

impl CoefficientVector {
    pub fn new(role: Role, values: Vec<f64>, dofmap: &DofMap) -> Result<Self> {
        let expected = match role {
            Role::Pressure => dofmap.n_p(),
            Role::VelocityX | Role::VelocityY => dofmap.n_nodes(),
        };
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: values.len(),
            });
        }
        Ok(Self { role, values })
    }
}

/// Nodal interpolation of `f` into P2 (all nodes) or P1 (pressure vertices).
pub fn interpolate(f: impl Fn(f64, f64) -> f64, space: Space, dofmap: &DofMap) -> Vec<f64> {
    match space {
        Space::P2 => dofmap.nodes().iter().map(|p| f(p.x, p.y)).collect(),
        Space::P1 => dofmap
            .pressure_vertices()
            .iter()
            .map(|&v| {
                let p = dofmap.nodes()[v];
                f(p.x, p.y)
            })
            .collect(),
    }
}
