//! Time integration: the coupled IMEX Euler scheme and the two-stage
//! modular scheme, with energy diagnostics.
//!
//! Coupled step (convection lagged, everything else implicit):
//!
//! ```text
//! (u' − u)/Δt + N(u) u' + ν K u' + γ A u' − Bᵀp' = f'     B u' = 0
//! ```
//!
//! Modular step: Stage 1 is the same local problem with the nonlocal term
//! moved to the right as −γ A u; Stage 2 solves
//! `(M + 2Δtγ A) u' = M w' + 2Δtγ A u` on free nodes.

use std::io::Write;
use std::sync::Arc;

use faer::linalg::solvers::{Llt, Solve};
use faer::{Mat, Side};

use crate::error::{Error, Result};
use crate::fem::DofMap;
use crate::local_assembly::{
    assemble_convection, assemble_divergence, assemble_load, assemble_mass, assemble_stiffness,
    SparseOperator,
};
use crate::mesh::Mesh;
use crate::nonlocal::{assemble_fractional, DenseOperator, FractionalParams};
use crate::solvers::{solve_saddle, SaddleSystem, Stage2Solver};

/// Time-dependent vector field (x, y, t) ↦ value.
pub type VectorField = dyn Fn(f64, f64, f64) -> [f64; 2] + Send + Sync;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Coupled,
    Modular,
}

impl std::str::FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "coupled" | "coupled_imex" => Ok(Scheme::Coupled),
            "modular" => Ok(Scheme::Modular),
            _ => Err(Error::InvalidParameter(format!(
                "unknown scheme '{s}' (expected coupled or modular)"
            ))),
        }
    }
}

#[derive(Clone)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    pub dt: f64,
    pub t_final: f64,
    pub nu: f64,
    pub fractional: FractionalParams,
    /// Body force; `None` means zero.
    pub forcing: Option<Arc<VectorField>>,
    /// Values prescribed on constrained nodes; `None` means zero.
    pub boundary: Option<Arc<VectorField>>,
    /// Field g whose nodal interpolant enters the load as γ A g(t); used
    /// to lift the nonlocal part of a manufactured forcing.
    pub nonlocal_source: Option<Arc<VectorField>>,
}

impl std::fmt::Debug for SchemeConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SchemeConfig")
            .field("scheme", &self.scheme)
            .field("dt", &self.dt)
            .field("t_final", &self.t_final)
            .field("nu", &self.nu)
            .field("fractional", &self.fractional)
            .field("forcing", &self.forcing.is_some())
            .field("boundary", &self.boundary.is_some())
            .field("nonlocal_source", &self.nonlocal_source.is_some())
            .finish()
    }
}

impl SchemeConfig {
    pub fn new(scheme: Scheme, dt: f64, t_final: f64, nu: f64, fractional: FractionalParams) -> Self {
        Self {
            scheme,
            dt,
            t_final,
            nu,
            fractional,
            forcing: None,
            boundary: None,
            nonlocal_source: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.fractional.validate()?;
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!("Δt = {} must be positive", self.dt)));
        }
        if !(self.nu > 0.0) || !self.nu.is_finite() {
            return Err(Error::InvalidParameter(format!("ν = {} must be positive", self.nu)));
        }
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "final time {} must be finite and nonnegative",
                self.t_final
            )));
        }
        if self.t_final > 0.0 && self.dt > self.t_final {
            return Err(Error::InvalidParameter(format!(
                "Δt = {} exceeds the final time {}",
                self.dt, self.t_final
            )));
        }
        Ok(())
    }

    /// ⌈T/Δt⌉, requiring T/Δt to be an integer up to rounding.
    pub fn n_steps(&self) -> Result<usize> {
        let r = self.t_final / self.dt;
        let n = (r - 1e-9).ceil().max(0.0);
        if (r - n).abs() > 1e-9 * r.max(1.0) {
            return Err(Error::InvalidParameter(format!(
                "final time {} is not an integer multiple of Δt = {}",
                self.t_final, self.dt
            )));
        }
        Ok(n as usize)
    }

    fn boundary_at(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        self.boundary.as_ref().map_or([0.0; 2], |g| g(x, y, t))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub step: usize,
    pub t: f64,
    /// Nodal velocity per component over all nodes.
    pub u: [Vec<f64>; 2],
    /// Pressure per pressure dof; for the modular scheme this is the
    /// Stage-1 pressure.
    pub p: Option<Vec<f64>>,
    /// Intermediate Stage-1 velocity of the modular scheme.
    pub w: Option<[Vec<f64>; 2]>,
}

impl State {
    /// State at time `t` with constrained nodes overwritten by the
    /// prescribed data.
    pub fn new(u: [Vec<f64>; 2], t: f64, dofmap: &DofMap, config: &SchemeConfig) -> Result<Self> {
        let n = dofmap.n_nodes();
        for c in &u {
            if c.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: c.len(),
                });
            }
        }
        let mut u = u;
        for &i in dofmap.constrained_nodes() {
            let x = dofmap.nodes()[i];
            let g = config.boundary_at(x.x, x.y, t);
            u[0][i] = g[0];
            u[1][i] = g[1];
        }
        Ok(Self {
            step: 0,
            t,
            u,
            p: None,
            w: None,
        })
    }

    /// Nodal interpolant of `f` at time `t`.
    pub fn from_fn(
        f: impl Fn(f64, f64) -> [f64; 2],
        t: f64,
        dofmap: &DofMap,
        config: &SchemeConfig,
    ) -> Result<Self> {
        let mut u = [vec![0.0; dofmap.n_nodes()], vec![0.0; dofmap.n_nodes()]];
        for (i, x) in dofmap.nodes().iter().enumerate() {
            let v = f(x.x, x.y);
            u[0][i] = v[0];
            u[1][i] = v[1];
        }
        Self::new(u, t, dofmap, config)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyDiagnostics {
    pub step: usize,
    pub t: f64,
    /// ½‖u‖² over Ω.
    pub kinetic: f64,
    /// Σ over free nodes of u_i (A u)_i; equals uᵀAu when u vanishes on
    /// constrained nodes.
    pub gagliardo: f64,
    /// ‖A u‖ measured in the dual mass norm on free nodes.
    pub frac_l2: f64,
    /// ‖u − u_prev‖² over Ω; zero at the initial state.
    pub increment: f64,
    /// Largest |Σ_c B_c u_c| over pressure dofs.
    pub div_residual: f64,
    /// Scheme-specific stability functional, non-increasing for f = 0.
    pub budget: f64,
}

impl EnergyDiagnostics {
    pub const CSV_HEADER: &'static str = "step,t,kinetic,gagliardo,frac_l2,div_residual";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            self.step, self.t, self.kinetic, self.gagliardo, self.frac_l2, self.div_residual
        )
    }
}

/// Write diagnostics as CSV.
pub fn write_diagnostics_csv(mut w: impl Write, rows: &[EnergyDiagnostics]) -> Result<()> {
    writeln!(w, "{}", EnergyDiagnostics::CSV_HEADER)?;
    for r in rows {
        writeln!(w, "{}", r.csv_row())?;
    }
    Ok(())
}

/// γ (A I_h g) on free nodes, in free order, for the nodal interpolant
/// I_h g over all nodes.
pub fn nonlocal_lifting(
    frac: &DenseOperator,
    dofmap: &DofMap,
    gamma: f64,
    g: impl Fn(f64, f64) -> [f64; 2],
) -> Result<[Vec<f64>; 2]> {
    let n = dofmap.n_nodes();
    let mut v = [vec![0.0; n], vec![0.0; n]];
    for (i, x) in dofmap.nodes().iter().enumerate() {
        let gv = g(x.x, x.y);
        v[0][i] = gv[0];
        v[1][i] = gv[1];
    }
    let free = dofmap.free_nodes();
    let mut out = [frac.rows_mul(free, &v[0])?, frac.rows_mul(free, &v[1])?];
    for c in out.iter_mut() {
        c.iter_mut().for_each(|x| *x *= gamma);
    }
    Ok(out)
}

/// Assembled operators shared by all steps on one mesh.
pub struct Operators {
    pub mass: SparseOperator,
    pub stiffness: SparseOperator,
    pub divergence: [SparseOperator; 2],
    pub frac: Arc<DenseOperator>,
    mass_ff: Mat<f64>,
    stiff_ff: Mat<f64>,
    frac_ff: Mat<f64>,
    div_f: [Mat<f64>; 2],
    mean_row: Vec<f64>,
    mass_llt: Llt<f64>,
}

impl Operators {
    /// Assemble every operator, including the nonlocal one.
    pub fn assemble(mesh: &Mesh, dofmap: &DofMap, params: &FractionalParams) -> Result<Self> {
        let frac = assemble_fractional(mesh, dofmap, params)?;
        Self::with_fractional(mesh, dofmap, Arc::new(frac))
    }

    /// Assemble the local operators around a given nonlocal operator, whose
    /// free rows must be stored.
    pub fn with_fractional(mesh: &Mesh, dofmap: &DofMap, frac: Arc<DenseOperator>) -> Result<Self> {
        if frac.n_cols() != dofmap.n_nodes() {
            return Err(Error::DimensionMismatch {
                expected: dofmap.n_nodes(),
                found: frac.n_cols(),
            });
        }
        let free = dofmap.free_nodes();
        let mass = assemble_mass(mesh, dofmap);
        let stiffness = assemble_stiffness(mesh, dofmap);
        let divergence = assemble_divergence(mesh, dofmap);
        let pressure: Vec<usize> = (0..dofmap.n_p()).collect();
        let mass_ff = mass.dense_block(free, free);
        let stiff_ff = stiffness.dense_block(free, free);
        let frac_ff = frac.block(free, free)?;
        let div_f = [
            divergence[0].dense_block(&pressure, free),
            divergence[1].dense_block(&pressure, free),
        ];
        let mut mean_row = vec![0.0; dofmap.n_p()];
        for t in 0..mesh.n_triangles() {
            if let Some(q) = dofmap.element_pressure(t) {
                let a = mesh.signed_area(t).abs() / 3.0;
                for k in q {
                    mean_row[k] += a;
                }
            }
        }
        let mass_llt = mass_ff
            .llt(Side::Lower)
            .map_err(|e| Error::Factorization(format!("free mass block: {e:?}")))?;
        Ok(Self {
            mass,
            stiffness,
            divergence,
            frac,
            mass_ff,
            stiff_ff,
            frac_ff,
            div_f,
            mean_row,
            mass_llt,
        })
    }

    /// ∫ψ_q for every pressure dof.
    pub fn pressure_integrals(&self) -> &[f64] {
        &self.mean_row
    }

    pub fn frac_free_block(&self) -> &Mat<f64> {
        &self.frac_ff
    }

    pub fn mass_free_block(&self) -> &Mat<f64> {
        &self.mass_ff
    }
}

/// Time integrator for one configuration on one mesh.
pub struct Integrator<'a> {
    config: SchemeConfig,
    mesh: &'a Mesh,
    dofmap: &'a DofMap,
    ops: Arc<Operators>,
    /// Part of the velocity block that does not change between steps.
    base: Mat<f64>,
    stage2: Option<Stage2Solver>,
}

impl<'a> Integrator<'a> {
    pub fn new(config: SchemeConfig, mesh: &'a Mesh, dofmap: &'a DofMap) -> Result<Self> {
        config.validate()?;
        let ops = Operators::assemble(mesh, dofmap, &config.fractional)?;
        Self::with_operators(config, mesh, dofmap, Arc::new(ops))
    }

    pub fn with_operators(
        config: SchemeConfig,
        mesh: &'a Mesh,
        dofmap: &'a DofMap,
        ops: Arc<Operators>,
    ) -> Result<Self> {
        config.validate()?;
        let (dt, nu, gamma) = (config.dt, config.nu, config.fractional.gamma);
        let mut base = &ops.mass_ff * (1.0 / dt) + &ops.stiff_ff * nu;
        let stage2 = match config.scheme {
            Scheme::Coupled => {
                if gamma != 0.0 {
                    base += &ops.frac_ff * gamma;
                }
                None
            }
            Scheme::Modular => Some(Stage2Solver::new(ops.mass_ff.clone(), ops.frac_ff.clone())?),
        };
        Ok(Self {
            config,
            mesh,
            dofmap,
            ops,
            base,
            stage2,
        })
    }

    pub fn config(&self) -> &SchemeConfig {
        &self.config
    }

    pub fn operators(&self) -> &Arc<Operators> {
        &self.ops
    }

    /// Vector that is zero on free nodes and equal to the prescribed data
    /// on constrained nodes.
    fn lifting(&self, t: f64) -> [Vec<f64>; 2] {
        let n = self.dofmap.n_nodes();
        let mut g = [vec![0.0; n], vec![0.0; n]];
        if self.config.boundary.is_some() {
            for &i in self.dofmap.constrained_nodes() {
                let x = self.dofmap.nodes()[i];
                let v = self.config.boundary_at(x.x, x.y, t);
                g[0][i] = v[0];
                g[1][i] = v[1];
            }
        }
        g
    }

    /// Solve the local saddle problem at t^{n+1}: the nonlocal term is
    /// implicit for the coupled scheme and an explicit load for Stage 1.
    fn local_solve(&self, state: &State, g: &[Vec<f64>; 2]) -> Result<([Vec<f64>; 2], Vec<f64>)> {
        let dm = self.dofmap;
        let free = dm.free_nodes();
        let (dt, nu, gamma) = (self.config.dt, self.config.nu, self.config.fractional.gamma);
        let t1 = state.t + dt;
        let coupled = self.config.scheme == Scheme::Coupled;

        let conv = assemble_convection([&state.u[0], &state.u[1]], self.mesh, dm)?;
        let velocity_block = &self.base + conv.dense_block(free, free);

        let mut load = match &self.config.forcing {
            Some(f) => assemble_load(|x, y, t| f(x, y, t), t1, self.mesh, dm),
            None => [vec![0.0; dm.n_nodes()], vec![0.0; dm.n_nodes()]],
        };
        if let (Some(src), true) = (&self.config.nonlocal_source, gamma != 0.0) {
            let lift = nonlocal_lifting(&self.ops.frac, dm, gamma, |x, y| src(x, y, t1))?;
            for c in 0..2 {
                for (k, &i) in free.iter().enumerate() {
                    load[c][i] += lift[c][k];
                }
            }
        }
        let mut rhs = [Vec::new(), Vec::new()];
        let mut continuity_rhs = vec![0.0; dm.n_p()];
        for c in 0..2 {
            let mu = self.ops.mass.mul_vec(&state.u[c])?;
            let mg = self.ops.mass.mul_vec(&g[c])?;
            let kg = self.ops.stiffness.mul_vec(&g[c])?;
            let ng = conv.mul_vec(&g[c])?;
            let mut r: Vec<f64> = free
                .iter()
                .map(|&i| (mu[i] - mg[i]) / dt + load[c][i] - nu * kg[i] - ng[i])
                .collect();
            if gamma != 0.0 {
                // Coupled: −γ A g'. Stage 1: −γ A uⁿ.
                let v = if coupled { &g[c] } else { &state.u[c] };
                let av = self.ops.frac.rows_mul(free, v)?;
                for (r, a) in r.iter_mut().zip(av) {
                    *r -= gamma * a;
                }
            }
            rhs[c] = r;
            let bg = self.ops.divergence[c].mul_vec(&g[c])?;
            for (q, b) in continuity_rhs.iter_mut().zip(bg) {
                *q -= b;
            }
        }
        let sys = SaddleSystem {
            velocity_block,
            divergence: self.ops.div_f.clone(),
            mean_row: self.ops.mean_row.clone(),
            rhs,
            continuity_rhs,
        };
        let sol = solve_saddle(&sys)?;
        let mut u = g.clone();
        for c in 0..2 {
            dm.scatter_free(&sol.velocity[c], &mut u[c]);
        }
        Ok((u, sol.pressure))
    }

    pub fn step_coupled(&self, state: &State) -> Result<State> {
        if self.config.scheme != Scheme::Coupled {
            return Err(Error::InvalidParameter("integrator is configured for the modular scheme".into()));
        }
        let t1 = state.t + self.config.dt;
        let g = self.lifting(t1);
        let (u, p) = self.local_solve(state, &g)?;
        Ok(State {
            step: state.step + 1,
            t: t1,
            u,
            p: Some(p),
            w: None,
        })
    }

    pub fn step_modular(&mut self, state: &State) -> Result<State> {
        if self.config.scheme != Scheme::Modular {
            return Err(Error::InvalidParameter("integrator is configured for the coupled scheme".into()));
        }
        let (dt, gamma) = (self.config.dt, self.config.fractional.gamma);
        let t1 = state.t + dt;
        let g = self.lifting(t1);
        let (w, p) = self.local_solve(state, &g)?;
        let dm = self.dofmap;
        let free = dm.free_nodes();
        let wf = [dm.gather_free(&w[0]), dm.gather_free(&w[1])];
        let mut a_prev = [Vec::new(), Vec::new()];
        if gamma != 0.0 {
            for c in 0..2 {
                let v: Vec<f64> = state.u[c].iter().zip(&g[c]).map(|(u, g)| u - g).collect();
                a_prev[c] = self.ops.frac.rows_mul(free, &v)?;
            }
        } else {
            a_prev = [vec![0.0; free.len()], vec![0.0; free.len()]];
        }
        let stage2 = self.stage2.as_mut().expect("modular integrator owns a stage-2 solver");
        let uf = stage2.solve(dt, gamma, [&wf[0], &wf[1]], [&a_prev[0], &a_prev[1]])?;
        let mut u = g;
        for c in 0..2 {
            dm.scatter_free(&uf[c], &mut u[c]);
        }
        Ok(State {
            step: state.step + 1,
            t: t1,
            u,
            p: Some(p),
            w: Some(w),
        })
    }

    pub fn step(&mut self, state: &State) -> Result<State> {
        match self.config.scheme {
            Scheme::Coupled => self.step_coupled(state),
            Scheme::Modular => self.step_modular(state),
        }
    }

    /// Diagnostics of `state`; `prev` supplies the increment and the
    /// running budget.
    pub fn diagnostics(&self, state: &State, prev: Option<(&State, &EnergyDiagnostics)>) -> Result<EnergyDiagnostics> {
        let dm = self.dofmap;
        let free = dm.free_nodes();
        let (dt, nu, gamma) = (self.config.dt, self.config.nu, self.config.fractional.gamma);
        let mut kinetic = 0.0;
        let mut gagliardo = 0.0;
        let mut frac_sq = 0.0;
        let mut increment = 0.0;
        let mut dissipation = 0.0;
        let mut div = vec![0.0; dm.n_p()];
        for c in 0..2 {
            let u = &state.u[c];
            kinetic += 0.5 * self.ops.mass.bilinear(u, u)?;
            let au = self.ops.frac.rows_mul(free, u)?;
            gagliardo += free.iter().zip(&au).map(|(&i, a)| u[i] * a).sum::<f64>();
            let y = self.ops.mass_llt.solve(Mat::from_fn(au.len(), 1, |i, _| au[i]));
            frac_sq += (0..au.len()).map(|i| au[i] * y[(i, 0)]).sum::<f64>();
            dissipation += self.ops.stiffness.bilinear(u, u)?;
            if let Some((p, _)) = prev {
                let d: Vec<f64> = u.iter().zip(&p.u[c]).map(|(a, b)| a - b).collect();
                increment += self.ops.mass.bilinear(&d, &d)?;
            }
            for (q, b) in div.iter_mut().zip(self.ops.divergence[c].mul_vec(u)?) {
                *q += b;
            }
        }
        let budget = match self.config.scheme {
            Scheme::Coupled => {
                let carried = prev.map_or(0.0, |(_, d)| d.budget - d.kinetic);
                let step_terms = if prev.is_some() {
                    0.5 * increment + 0.5 * dt * nu * dissipation + dt * gamma * gagliardo
                } else {
                    0.0
                };
                kinetic + carried + step_terms
            }
            Scheme::Modular => {
                2.0 * kinetic + 2.0 * dt * gamma * gagliardo + 2.0 * dt * dt * gamma * gamma * frac_sq
            }
        };
        Ok(EnergyDiagnostics {
            step: state.step,
            t: state.t,
            kinetic,
            gagliardo,
            frac_l2: frac_sq.sqrt(),
            increment,
            div_residual: div.iter().fold(0.0f64, |m, v| m.max(v.abs())),
            budget,
        })
    }

    /// Advance `initial` to the final time, calling `observe` after every
    /// diagnostics record (including the initial one).
    pub fn run_with(
        &mut self,
        initial: State,
        mut observe: impl FnMut(&EnergyDiagnostics, &State),
    ) -> Result<Trajectory> {
        let n = self.config.n_steps()?;
        let mut state = initial;
        let mut diags = vec![self.diagnostics(&state, None)?];
        observe(&diags[0], &state);
        for _ in 0..n {
            let next = self.step(&state)?;
            let d = self.diagnostics(&next, Some((&state, diags.last().expect("nonempty"))))?;
            observe(&d, &next);
            diags.push(d);
            state = next;
        }
        Ok(Trajectory {
            diagnostics: diags,
            final_state: state,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub diagnostics: Vec<EnergyDiagnostics>,
    pub final_state: State,
}

/// Assemble operators and integrate from `initial` to the final time.
pub fn run(config: SchemeConfig, mesh: &Mesh, dofmap: &DofMap, initial: State) -> Result<Trajectory> {
    let mut integ = Integrator::new(config, mesh, dofmap)?;
    integ.run_with(initial, |_, _| {})
}
