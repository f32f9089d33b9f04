//! Direct solvers for the velocity-pressure saddle system and for the
//! symmetric positive definite Stage-2 system of the modular scheme.
//!
//! The saddle system acts on free velocity dofs of both components and on
//! all pressure dofs:
//!
//! ```text
//! F u_c − B_cᵀ p         = r_c      (c = 1, 2)
//! Σ_c B_c u_c    + m μ   = g
//!          mᵀ p          = 0
//! ```
//!
//! where F is the scalar velocity block shared by both components and m the
//! vector of pressure-basis integrals. It is solved through the pressure
//! Schur complement with one LU factorization of F.

use faer::linalg::solvers::Solve;
use faer::{Mat, Side};

use crate::error::{Error, Result};

/// Pivot ratio below which a factorization is declared singular.
const PIVOT_TOLERANCE: f64 = 1e-13;

#[derive(Debug, Clone)]
pub struct SaddleSystem {
    /// Scalar velocity block on free nodes.
    pub velocity_block: Mat<f64>,
    /// Divergence blocks, pressure dofs × free nodes.
    pub divergence: [Mat<f64>; 2],
    /// ∫ q dx for every pressure basis function.
    pub mean_row: Vec<f64>,
    pub rhs: [Vec<f64>; 2],
    pub continuity_rhs: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SaddleSolution {
    /// Free velocity values per component.
    pub velocity: [Vec<f64>; 2],
    pub pressure: Vec<f64>,
    /// Multiplier of the zero-mean constraint.
    pub multiplier: f64,
    /// Normwise relative residual of the full block system.
    pub residual: f64,
}

impl SaddleSystem {
    fn check(&self) -> Result<(usize, usize)> {
        let n = self.velocity_block.nrows();
        let np = self.mean_row.len();
        if n == 0 {
            return Err(Error::SingularSystem("no free velocity dofs: empty interior".into()));
        }
        if np == 0 {
            return Err(Error::SingularSystem("no pressure dofs".into()));
        }
        let dims = [
            (self.velocity_block.ncols(), n),
            (self.divergence[0].nrows(), np),
            (self.divergence[1].nrows(), np),
            (self.divergence[0].ncols(), n),
            (self.divergence[1].ncols(), n),
            (self.rhs[0].len(), n),
            (self.rhs[1].len(), n),
            (self.continuity_rhs.len(), np),
        ];
        for (found, expected) in dims {
            if found != expected {
                return Err(Error::DimensionMismatch { expected, found });
            }
        }
        Ok((n, np))
    }

    /// Normwise backward error ‖r‖∞ / (‖K‖∞‖x‖∞ + ‖b‖∞) of a candidate.
    pub fn residual(&self, u: &[Vec<f64>; 2], p: &[f64], mu: f64) -> f64 {
        let f = &self.velocity_block;
        let (n, np) = (f.nrows(), p.len());
        let mut res = 0.0f64;
        let mut bnorm = 0.0f64;
        let mut row_norm = 0.0f64;
        for c in 0..2 {
            let b = &self.divergence[c];
            for i in 0..n {
                let mut r = -self.rhs[c][i];
                let mut s = 0.0;
                for j in 0..n {
                    r += f[(i, j)] * u[c][j];
                    s += f[(i, j)].abs();
                }
                for q in 0..np {
                    r -= b[(q, i)] * p[q];
                    s += b[(q, i)].abs();
                }
                res = res.max(r.abs());
                bnorm = bnorm.max(self.rhs[c][i].abs());
                row_norm = row_norm.max(s);
            }
        }
        for q in 0..np {
            let mut r = self.mean_row[q] * mu - self.continuity_rhs[q];
            let mut s = self.mean_row[q].abs();
            for c in 0..2 {
                for j in 0..n {
                    let b = self.divergence[c][(q, j)];
                    r += b * u[c][j];
                    s += b.abs();
                }
            }
            res = res.max(r.abs());
            bnorm = bnorm.max(self.continuity_rhs[q].abs());
            row_norm = row_norm.max(s);
        }
        let r: f64 = self.mean_row.iter().zip(p).map(|(m, p)| m * p).sum();
        res = res.max(r.abs());
        row_norm = row_norm.max(self.mean_row.iter().map(|m| m.abs()).sum());
        let xnorm = u
            .iter()
            .flatten()
            .chain(p)
            .fold(mu.abs(), |m, v| m.max(v.abs()));
        let denom = row_norm * xnorm + bnorm;
        if denom == 0.0 {
            0.0
        } else {
            res / denom
        }
    }
}

fn check_pivots(u: faer::MatRef<'_, f64>, what: &str) -> Result<()> {
    let n = u.nrows().min(u.ncols());
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..n {
        let d = u[(i, i)].abs();
        lo = lo.min(d);
        hi = hi.max(d);
    }
    if !(lo > PIVOT_TOLERANCE * hi) || !hi.is_finite() {
        return Err(Error::SingularSystem(format!(
            "{what}: pivot ratio {:.3e} (smallest {lo:.3e}, largest {hi:.3e})",
            lo / hi
        )));
    }
    Ok(())
}

fn column(v: &[f64]) -> Mat<f64> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

/// Solve the saddle system through its pressure Schur complement.
pub fn solve_saddle(sys: &SaddleSystem) -> Result<SaddleSolution> {
    let (n, np) = sys.check()?;
    let lu = sys.velocity_block.partial_piv_lu();
    check_pivots(lu.U(), "velocity block")?;

    // Columns: r_1, r_2, B_1ᵀ, B_2ᵀ.
    let mut rhs = Mat::<f64>::zeros(n, 2 + 2 * np);
    for c in 0..2 {
        for i in 0..n {
            rhs[(i, c)] = sys.rhs[c][i];
            for q in 0..np {
                rhs[(i, 2 + c * np + q)] = sys.divergence[c][(q, i)];
            }
        }
    }
    lu.solve_in_place(rhs.as_mut());

    let mut schur = Mat::<f64>::zeros(np + 1, np + 1);
    let mut srhs = vec![0.0; np + 1];
    srhs[..np].copy_from_slice(&sys.continuity_rhs);
    for c in 0..2 {
        let b = sys.divergence[c].as_ref();
        let finv_bt = rhs.as_ref().subcols(2 + c * np, np);
        let prod = b * finv_bt;
        for q in 0..np {
            for r in 0..np {
                schur[(q, r)] += prod[(q, r)];
            }
        }
        let finv_r = rhs.as_ref().col(c);
        let br = b * finv_r;
        for q in 0..np {
            srhs[q] -= br[q];
        }
    }
    for q in 0..np {
        schur[(q, np)] = sys.mean_row[q];
        schur[(np, q)] = sys.mean_row[q];
    }
    let slu = schur.partial_piv_lu();
    check_pivots(slu.U(), "pressure Schur complement (inf-sup violation?)")?;
    let sol = slu.solve(column(&srhs));
    let pressure: Vec<f64> = (0..np).map(|q| sol[(q, 0)]).collect();
    let multiplier = sol[(np, 0)];

    let mut velocity = [vec![0.0; n], vec![0.0; n]];
    for c in 0..2 {
        for i in 0..n {
            let mut v = rhs[(i, c)];
            for q in 0..np {
                v += rhs[(i, 2 + c * np + q)] * pressure[q];
            }
            velocity[c][i] = v;
        }
    }
    if velocity.iter().flatten().chain(&pressure).any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem("non-finite saddle solution".into()));
    }
    let residual = sys.residual(&velocity, &pressure, multiplier);
    Ok(SaddleSolution {
        velocity,
        pressure,
        multiplier,
        residual,
    })
}

/// Stage-2 system (M + 2Δtγ A) u = M w + 2Δtγ a on free nodes, with the
/// Cholesky factor kept for the last (Δt, γ).
#[derive(Debug)]
pub struct Stage2Solver {
    mass: Mat<f64>,
    frac: Mat<f64>,
    cache: Option<(f64, f64, faer::linalg::solvers::Llt<f64>)>,
}

impl Stage2Solver {
    /// `mass` and `frac` are the free-free blocks of M and A.
    pub fn new(mass: Mat<f64>, frac: Mat<f64>) -> Result<Self> {
        let n = mass.nrows();
        for (found, expected) in [(mass.ncols(), n), (frac.nrows(), n), (frac.ncols(), n)] {
            if found != expected {
                return Err(Error::DimensionMismatch { expected, found });
            }
        }
        Ok(Self {
            mass,
            frac,
            cache: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.mass.nrows()
    }

    fn factor(&mut self, dt: f64, gamma: f64) -> Result<&faer::linalg::solvers::Llt<f64>> {
        let hit = matches!(&self.cache, Some((d, g, _)) if *d == dt && *g == gamma);
        if !hit {
            let s = 2.0 * dt * gamma;
            let k = &self.mass + s * &self.frac;
            let llt = k.llt(Side::Lower).map_err(|e| {
                Error::Factorization(format!("stage-2 matrix not positive definite: {e:?}"))
            })?;
            self.cache = Some((dt, gamma, llt));
        }
        Ok(&self.cache.as_ref().expect("filled above").2)
    }

    /// Solve for the free values of u^{n+1} given w^{n+1} and
    /// `a_prev` = A_ff uⁿ_f + A_fc(gⁿ − gⁿ⁺¹).
    pub fn solve(
        &mut self,
        dt: f64,
        gamma: f64,
        w: [&[f64]; 2],
        a_prev: [&[f64]; 2],
    ) -> Result<[Vec<f64>; 2]> {
        if !(dt > 0.0) || !(gamma >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "stage 2 needs Δt > 0 and γ ≥ 0, got Δt = {dt}, γ = {gamma}"
            )));
        }
        let n = self.dim();
        for v in w.iter().chain(&a_prev) {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: v.len(),
                });
            }
        }
        if gamma == 0.0 {
            return Ok([w[0].to_vec(), w[1].to_vec()]);
        }
        let s = 2.0 * dt * gamma;
        let mut rhs = Mat::<f64>::zeros(n, 2);
        for c in 0..2 {
            let mw = &self.mass * column(w[c]);
            for i in 0..n {
                rhs[(i, c)] = mw[(i, 0)] + s * a_prev[c][i];
            }
        }
        let llt = self.factor(dt, gamma)?;
        llt.solve_in_place(rhs.as_mut());
        Ok([
            (0..n).map(|i| rhs[(i, 0)]).collect(),
            (0..n).map(|i| rhs[(i, 1)]).collect(),
        ])
    }

    /// Relative residual ‖K u − b‖ / ‖b‖ of a Stage-2 solution.
    pub fn residual(
        &self,
        dt: f64,
        gamma: f64,
        w: [&[f64]; 2],
        a_prev: [&[f64]; 2],
        u: &[Vec<f64>; 2],
    ) -> f64 {
        let s = 2.0 * dt * gamma;
        let (mut num, mut den) = (0.0f64, 0.0f64);
        for c in 0..2 {
            let ku = &self.mass * column(&u[c]) + s * (&self.frac * column(&u[c]));
            let mw = &self.mass * column(w[c]);
            for i in 0..self.dim() {
                let b = mw[(i, 0)] + s * a_prev[c][i];
                num += (ku[(i, 0)] - b).powi(2);
                den += b * b;
            }
        }
        if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    }
}
