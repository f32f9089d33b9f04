//! Manufactured-solution convergence harness.
//!
//! Exact fields on Ω = (0,1)²:
//! u1 = x²y + sin t, u2 = −xy² + sin t, p = sin x + sin y.
//! The local part of the forcing is evaluated in closed form; the
//! nonlocal part is lifted discretely as γ A I_h u(t).

use std::io::Write;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::fem::{build_dof_map, quadrature_rule, DofMap, ElementGeometry};
use crate::local_assembly::assemble_load;
use crate::mesh::{build_rectangle_mesh, Mesh, Region};
use crate::nonlocal::{DenseOperator, FractionalParams};
use crate::timestepping::{nonlocal_lifting, Integrator, Scheme, SchemeConfig, State};

/// Quadrature degree of the error integrals.
const ERROR_DEGREE: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ExactSolution;

impl ExactSolution {
    pub fn velocity(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        let s = t.sin();
        [x * x * y + s, -x * y * y + s]
    }

    /// Rows are components, columns ∂x and ∂y.
    pub fn velocity_gradient(&self, x: f64, y: f64) -> [[f64; 2]; 2] {
        [[2.0 * x * y, x * x], [-y * y, -2.0 * x * y]]
    }

    pub fn velocity_laplacian(&self, x: f64, y: f64) -> [f64; 2] {
        [2.0 * y, -2.0 * x]
    }

    pub fn divergence(&self, x: f64, y: f64) -> f64 {
        let g = self.velocity_gradient(x, y);
        g[0][0] + g[1][1]
    }

    pub fn pressure(&self, x: f64, y: f64) -> f64 {
        x.sin() + y.sin()
    }

    pub fn pressure_gradient(&self, x: f64, y: f64) -> [f64; 2] {
        [x.cos(), y.cos()]
    }

    /// Mean of p over Ω, 2(1 − cos 1).
    pub fn pressure_mean(&self) -> f64 {
        2.0 * (1.0 - 1f64.cos())
    }
}

/// u_t + (u·∇)u − νΔu + ∇p for the exact fields.
pub fn local_forcing(t: f64, x: f64, y: f64, nu: f64) -> [f64; 2] {
    let e = ExactSolution;
    let u = e.velocity(x, y, t);
    let g = e.velocity_gradient(x, y);
    let lap = e.velocity_laplacian(x, y);
    let gp = e.pressure_gradient(x, y);
    let ut = t.cos();
    [
        ut + u[0] * g[0][0] + u[1] * g[0][1] - nu * lap[0] + gp[0],
        ut + u[0] * g[1][0] + u[1] * g[1][1] - nu * lap[1] + gp[1],
    ]
}

/// Discrete right-hand side at time t over all nodes: the local load plus
/// γ A I_h u(t) on free nodes, exact nodal velocity on constrained nodes.
pub fn discrete_rhs(
    t: f64,
    mesh: &Mesh,
    dofmap: &DofMap,
    frac: &DenseOperator,
    gamma: f64,
    nu: f64,
) -> Result<[Vec<f64>; 2]> {
    let mut load = assemble_load(|x, y, t| local_forcing(t, x, y, nu), t, mesh, dofmap);
    if gamma != 0.0 {
        let lift = nonlocal_lifting(frac, dofmap, gamma, |x, y| ExactSolution.velocity(x, y, t))?;
        for c in 0..2 {
            for (k, &i) in dofmap.free_nodes().iter().enumerate() {
                load[c][i] += lift[c][k];
            }
        }
    }
    for &i in dofmap.constrained_nodes() {
        let x = dofmap.nodes()[i];
        let v = ExactSolution.velocity(x.x, x.y, t);
        load[0][i] = v[0];
        load[1][i] = v[1];
    }
    Ok(load)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variable {
    U1,
    U2,
    P,
}

impl Variable {
    pub const ALL: [Variable; 3] = [Variable::U1, Variable::U2, Variable::P];

    pub fn name(self) -> &'static str {
        match self {
            Variable::U1 => "u1",
            Variable::U2 => "u2",
            Variable::P => "p",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Norms {
    pub linf: f64,
    pub l2: f64,
    /// H¹ seminorm.
    pub h1: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorRow {
    /// Grid spacing 1/n.
    pub h: f64,
    pub dt: f64,
    /// Errors of u1, u2 and p.
    pub errors: [Norms; 3],
}

/// Final-time errors of a state against the exact fields, by quadrature
/// over Ω triangles. Pressure is compared after removing the exact mean.
pub fn error_norms(state: &State, mesh: &Mesh, dofmap: &DofMap) -> Result<[Norms; 3]> {
    let n = dofmap.n_nodes();
    for c in &state.u {
        if c.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: c.len(),
            });
        }
    }
    let p = state.p.as_deref();
    if let Some(p) = p {
        if p.len() != dofmap.n_p() {
            return Err(Error::DimensionMismatch {
                expected: dofmap.n_p(),
                found: p.len(),
            });
        }
    }
    let e = ExactSolution;
    let pbar = e.pressure_mean();
    let rule = quadrature_rule(ERROR_DEGREE)?;
    let mut sq = [[0.0f64; 2]; 3];
    let mut linf = [0.0f64; 3];
    for t in 0..mesh.n_triangles() {
        if mesh.region(t) != Region::Omega {
            continue;
        }
        let g = ElementGeometry::new(mesh.corners(t));
        let nodes = dofmap.element_nodes(t);
        let pdofs = dofmap.element_pressure(t);
        for (l, w) in rule.points.iter().zip(&rule.weights) {
            let wd = w * g.det.abs();
            let x = g.point(*l);
            let b2 = g.p2(*l);
            let ex = e.velocity(x.x, x.y, state.t);
            let eg = e.velocity_gradient(x.x, x.y);
            for c in 0..2 {
                let mut v = 0.0;
                let mut dv = [0.0; 2];
                for k in 0..6 {
                    let uk = state.u[c][nodes[k]];
                    v += b2.values[k] * uk;
                    dv[0] += b2.gradients[k][0] * uk;
                    dv[1] += b2.gradients[k][1] * uk;
                }
                let err = v - ex[c];
                linf[c] = linf[c].max(err.abs());
                sq[c][0] += wd * err * err;
                sq[c][1] += wd * ((dv[0] - eg[c][0]).powi(2) + (dv[1] - eg[c][1]).powi(2));
            }
            if let (Some(p), Some(q)) = (p, pdofs) {
                let b1 = g.p1(*l);
                let mut v = 0.0;
                let mut dv = [0.0; 2];
                for k in 0..3 {
                    v += b1.values[k] * p[q[k]];
                    dv[0] += b1.gradients[k][0] * p[q[k]];
                    dv[1] += b1.gradients[k][1] * p[q[k]];
                }
                let gp = e.pressure_gradient(x.x, x.y);
                let err = v - (e.pressure(x.x, x.y) - pbar);
                linf[2] = linf[2].max(err.abs());
                sq[2][0] += wd * err * err;
                sq[2][1] += wd * ((dv[0] - gp[0]).powi(2) + (dv[1] - gp[1]).powi(2));
            }
        }
    }
    let norms = |k: usize| Norms {
        linf: linf[k],
        l2: sq[k][0].sqrt(),
        h1: sq[k][1].sqrt(),
    };
    if p.is_none() {
        return Ok([norms(0), norms(1), Norms {
            linf: f64::NAN,
            l2: f64::NAN,
            h1: f64::NAN,
        }]);
    }
    Ok([norms(0), norms(1), norms(2)])
}

/// log₂(e(h)/e(h/2)) between consecutive refinements.
pub fn rates(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DtMode {
    /// Δt = h.
    EqH,
    /// Δt = h².
    EqH2,
}

impl std::str::FromStr for DtMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "h" | "dt_eq_h" => Ok(DtMode::EqH),
            "h2" | "dt_eq_h2" => Ok(DtMode::EqH2),
            _ => Err(Error::InvalidParameter(format!(
                "unknown time-step mode '{s}' (expected h or h2)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StudyParams {
    pub scheme: Scheme,
    pub dt_mode: DtMode,
    pub nu: f64,
    pub t_final: f64,
    pub fractional: FractionalParams,
}

impl StudyParams {
    /// ν = 1, α = ½, γ = 1, λ = 1, T = 0.5, coupled scheme.
    pub fn standard(dt_mode: DtMode) -> Self {
        Self {
            scheme: Scheme::Coupled,
            dt_mode,
            nu: 1.0,
            t_final: 0.5,
            fractional: FractionalParams::new(0.5, 1.0, 1.0).expect("valid defaults"),
        }
    }
}

/// Configuration of one MMS run with the given step.
pub fn mms_config(params: &StudyParams, dt: f64) -> SchemeConfig {
    let nu = params.nu;
    let mut cfg = SchemeConfig::new(params.scheme, dt, params.t_final, nu, params.fractional);
    cfg.forcing = Some(Arc::new(move |x, y, t| local_forcing(t, x, y, nu)));
    cfg.boundary = Some(Arc::new(|x, y, t| ExactSolution.velocity(x, y, t)));
    cfg.nonlocal_source = Some(Arc::new(|x, y, t| ExactSolution.velocity(x, y, t)));
    cfg
}

/// Run the manufactured problem on the n×n grid and return the final state.
pub fn run_mms(n: usize, dt: f64, params: &StudyParams) -> Result<(Mesh, DofMap, State)> {
    let mesh = build_rectangle_mesh(n, params.fractional.lambda)?;
    let dofmap = build_dof_map(&mesh)?;
    let cfg = mms_config(params, dt);
    let init = State::from_fn(|x, y| ExactSolution.velocity(x, y, 0.0), 0.0, &dofmap, &cfg)?;
    let mut integ = Integrator::new(cfg, &mesh, &dofmap)?;
    let tr = integ.run_with(init, |_, _| {})?;
    Ok((mesh, dofmap, tr.final_state))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub rows: Vec<ErrorRow>,
}

impl ErrorReport {
    pub fn errors(&self, var: Variable, pick: impl Fn(&Norms) -> f64) -> Vec<f64> {
        self.rows.iter().map(|r| pick(&r.errors[var as usize])).collect()
    }

    pub fn rates(&self, var: Variable, pick: impl Fn(&Norms) -> f64) -> Vec<f64> {
        rates(&self.errors(var, pick))
    }

    /// CSV with one block per variable: h, var, Linf, Linf_rate, L2,
    /// L2_rate, H1, H1_rate; the first row of each block has empty rates.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        writeln!(w, "h,var,Linf,Linf_rate,L2,L2_rate,H1,H1_rate")?;
        for var in Variable::ALL {
            let k = var as usize;
            for (i, row) in self.rows.iter().enumerate() {
                let e = row.errors[k];
                let rate = |f: fn(&Norms) -> f64| -> String {
                    if i == 0 {
                        String::new()
                    } else {
                        format!("{:.4}", (f(&self.rows[i - 1].errors[k]) / f(&e)).log2())
                    }
                };
                writeln!(
                    w,
                    "{},{},{:.4e},{},{:.4e},{},{:.4e},{}",
                    format_h(row.h),
                    var.name(),
                    e.linf,
                    rate(|n| n.linf),
                    e.l2,
                    rate(|n| n.l2),
                    e.h1,
                    rate(|n| n.h1),
                )?;
            }
        }
        Ok(())
    }
}

fn format_h(h: f64) -> String {
    let n = (1.0 / h).round();
    if (n * h - 1.0).abs() < 1e-12 {
        format!("1/{n}")
    } else {
        format!("{h}")
    }
}

/// Run the manufactured problem on each n×n grid (h = 1/n) and tabulate
/// final-time errors. `observe` is called after each level.
pub fn convergence_study(
    ns: &[usize],
    params: &StudyParams,
    mut observe: impl FnMut(&ErrorRow),
) -> Result<ErrorReport> {
    if ns.is_empty() {
        return Err(Error::InvalidParameter("no refinement levels given".into()));
    }
    if ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidParameter(
            "refinements must have strictly decreasing h".into(),
        ));
    }
    let mut rows = Vec::new();
    for &n in ns {
        let h = 1.0 / n as f64;
        let dt = match params.dt_mode {
            DtMode::EqH => h,
            DtMode::EqH2 => h * h,
        };
        let (mesh, dofmap, state) = run_mms(n, dt, params)?;
        let row = ErrorRow {
            h,
            dt,
            errors: error_norms(&state, &mesh, &dofmap)?,
        };
        observe(&row);
        rows.push(row);
    }
    Ok(ErrorReport { rows })
}
