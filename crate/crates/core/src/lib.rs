//! Finite-element solver for the incompressible Navier-Stokes equations with
//! a fractional-Laplacian turbulence closure
//!
//! ```text
//! u_t + (u·∇)u − νΔu + γ(−Δ)^α u + ∇p = f,   ∇·u = 0   in Ω = (0,1)²,
//! ```
//!
//! with the nonlocal operator truncated to interactions of range λ and a
//! volume constraint prescribed on the halo around Ω. Velocities use P2 and
//! pressures P1 (Taylor-Hood) on a structured triangulation.

pub mod error;
pub mod fem;
pub mod local_assembly;
pub mod mesh;
pub mod mms;
pub mod nonlocal;
pub mod solvers;
pub mod spectrum;
pub mod timestepping;

pub use error::{Error, Result};
