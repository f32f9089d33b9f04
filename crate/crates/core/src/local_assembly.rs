//! Sparse operators of the local terms: mass, viscous stiffness, divergence,
//! skew-symmetrised convection and load vectors.
//!
//! All forms integrate over Ω triangles only and act on scalar P2 node
//! vectors; the velocity operators are applied to each component.

use faer::Mat;
use sprs::{CsMat, TriMat};

use crate::error::{Error, Result};
use crate::fem::{quadrature_rule, DofMap, ElementGeometry, QuadratureRule};
use crate::mesh::{Mesh, Region};

const MASS_DEGREE: usize = 4;
const CONVECTION_DEGREE: usize = 5;
const LOAD_DEGREE: usize = 6;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    mat: CsMat<f64>,
    symmetric: bool,
}

impl SparseOperator {
    fn from_triplets(tri: TriMat<f64>, symmetric: bool) -> Self {
        Self {
            mat: tri.to_csr(),
            symmetric,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.mat.rows(), self.mat.cols())
    }

    /// Whether the operator was built as a symmetric form.
    pub fn declared_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn csr(&self) -> &CsMat<f64> {
        &self.mat
    }

    pub fn nnz(&self) -> usize {
        self.mat.nnz()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.mat.get(i, j).copied().unwrap_or(0.0)
    }

    /// Largest |A_ij − A_ji| relative to the largest entry.
    pub fn symmetry_defect(&self) -> f64 {
        let max = self.max_abs();
        if max == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for (row, vec) in self.mat.outer_iterator().enumerate() {
            for (col, &v) in vec.iter() {
                worst = worst.max((v - self.get(col, row)).abs());
            }
        }
        worst / max
    }

    pub fn max_abs(&self) -> f64 {
        self.mat.data().iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mul_vec(&self, x: &[f64]) -> Result<Vec<f64>> {
        let (rows, cols) = self.shape();
        if x.len() != cols {
            return Err(Error::DimensionMismatch {
                expected: cols,
                found: x.len(),
            });
        }
        let mut y = vec![0.0; rows];
        for (row, vec) in self.mat.outer_iterator().enumerate() {
            y[row] = vec.iter().map(|(c, v)| v * x[c]).sum();
        }
        Ok(y)
    }

    /// xᵀ A y.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let ay = self.mul_vec(y)?;
        if x.len() != ay.len() {
            return Err(Error::DimensionMismatch {
                expected: ay.len(),
                found: x.len(),
            });
        }
        Ok(x.iter().zip(&ay).map(|(a, b)| a * b).sum())
    }

    /// Dense copy of the block `rows × cols`, given as index lists.
    pub fn dense_block(&self, rows: &[usize], cols: &[usize]) -> Mat<f64> {
        let mut col_pos = vec![usize::MAX; self.mat.cols()];
        for (k, &c) in cols.iter().enumerate() {
            col_pos[c] = k;
        }
        let mut out = Mat::zeros(rows.len(), cols.len());
        for (r, &row) in rows.iter().enumerate() {
            if let Some(vec) = self.mat.outer_view(row) {
                for (c, &v) in vec.iter() {
                    let k = col_pos[c];
                    if k != usize::MAX {
                        out[(r, k)] += v;
                    }
                }
            }
        }
        out
    }

    /// y = A[rows, cols] x for index lists `rows`, `cols`, with x indexed by
    /// position in `cols`.
    pub fn block_mul(&self, rows: &[usize], cols: &[usize], x: &[f64]) -> Vec<f64> {
        let mut full = vec![0.0; self.mat.cols()];
        for (&c, &v) in cols.iter().zip(x) {
            full[c] = v;
        }
        rows.iter()
            .map(|&row| match self.mat.outer_view(row) {
                Some(vec) => vec.iter().map(|(c, v)| v * full[c]).sum(),
                None => 0.0,
            })
            .collect()
    }
}

/// Per-element data shared by the assembly loops.
struct OmegaElements<'a> {
    mesh: &'a Mesh,
    dofmap: &'a DofMap,
}

impl<'a> OmegaElements<'a> {
    fn new(mesh: &'a Mesh, dofmap: &'a DofMap) -> Self {
        Self { mesh, dofmap }
    }

    fn for_each(&self, mut f: impl FnMut(usize, &ElementGeometry, &[usize; 6])) {
        for t in 0..self.mesh.n_triangles() {
            if self.mesh.region(t) == Region::Omega {
                let g = ElementGeometry::new(self.mesh.corners(t));
                f(t, &g, self.dofmap.element_nodes(t));
            }
        }
    }
}

fn rule(degree: usize) -> QuadratureRule {
    quadrature_rule(degree).expect("built-in degree")
}

pub fn assemble_mass(mesh: &Mesh, dofmap: &DofMap) -> SparseOperator {
    let n = dofmap.n_nodes();
    let q = rule(MASS_DEGREE);
    let mut tri = TriMat::new((n, n));
    OmegaElements::new(mesh, dofmap).for_each(|_, g, nodes| {
        let mut local = [[0.0; 6]; 6];
        for (p, w) in q.points.iter().zip(&q.weights) {
            let b = g.p2(*p);
            let wd = w * g.det;
            for i in 0..6 {
                for j in 0..6 {
                    local[i][j] += wd * b.values[i] * b.values[j];
                }
            }
        }
        push_local(&mut tri, nodes, nodes, &local);
    });
    SparseOperator::from_triplets(tri, true)
}

/// ∫ ∇φ_i·∇φ_j without the viscosity factor.
pub fn assemble_stiffness(mesh: &Mesh, dofmap: &DofMap) -> SparseOperator {
    let n = dofmap.n_nodes();
    let q = rule(MASS_DEGREE);
    let mut tri = TriMat::new((n, n));
    OmegaElements::new(mesh, dofmap).for_each(|_, g, nodes| {
        let mut local = [[0.0; 6]; 6];
        for (p, w) in q.points.iter().zip(&q.weights) {
            let b = g.p2(*p);
            let wd = w * g.det;
            for i in 0..6 {
                for j in 0..6 {
                    let gi = b.gradients[i];
                    let gj = b.gradients[j];
                    local[i][j] += wd * (gi[0] * gj[0] + gi[1] * gj[1]);
                }
            }
        }
        push_local(&mut tri, nodes, nodes, &local);
    });
    SparseOperator::from_triplets(tri, true)
}

/// Pressure-by-velocity blocks `B_c[q, i] = ∫ ψ_q ∂_c φ_i` for c = x, y.
pub fn assemble_divergence(mesh: &Mesh, dofmap: &DofMap) -> [SparseOperator; 2] {
    let (np, n) = (dofmap.n_p(), dofmap.n_nodes());
    let q = rule(MASS_DEGREE);
    let mut tx = TriMat::new((np, n));
    let mut ty = TriMat::new((np, n));
    OmegaElements::new(mesh, dofmap).for_each(|t, g, nodes| {
        let pdofs = dofmap
            .element_pressure(t)
            .expect("Ω triangles carry pressure dofs");
        let mut lx = [[0.0; 6]; 3];
        let mut ly = [[0.0; 6]; 3];
        for (p, w) in q.points.iter().zip(&q.weights) {
            let b = g.p2(*p);
            let wd = w * g.det;
            for a in 0..3 {
                for i in 0..6 {
                    lx[a][i] += wd * p[a] * b.gradients[i][0];
                    ly[a][i] += wd * p[a] * b.gradients[i][1];
                }
            }
        }
        for a in 0..3 {
            for i in 0..6 {
                tx.add_triplet(pdofs[a], nodes[i], lx[a][i]);
                ty.add_triplet(pdofs[a], nodes[i], ly[a][i]);
            }
        }
    });
    [
        SparseOperator::from_triplets(tx, false),
        SparseOperator::from_triplets(ty, false),
    ]
}

/// Skew form N(u)_{ij} = ½∫(u·∇φ_j)φ_i − ½∫(u·∇φ_i)φ_j, built element by
/// element so that vᵀN(u)v vanishes for every v.
pub fn assemble_convection(u: [&[f64]; 2], mesh: &Mesh, dofmap: &DofMap) -> Result<SparseOperator> {
    let n = dofmap.n_nodes();
    for c in u {
        if c.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: c.len(),
            });
        }
    }
    let q = rule(CONVECTION_DEGREE);
    let mut tri = TriMat::new((n, n));
    OmegaElements::new(mesh, dofmap).for_each(|_, g, nodes| {
        let mut c = [[0.0; 6]; 6];
        for (p, w) in q.points.iter().zip(&q.weights) {
            let b = g.p2(*p);
            let wd = w * g.det;
            let mut uq = [0.0; 2];
            for k in 0..6 {
                uq[0] += b.values[k] * u[0][nodes[k]];
                uq[1] += b.values[k] * u[1][nodes[k]];
            }
            for j in 0..6 {
                let adv = uq[0] * b.gradients[j][0] + uq[1] * b.gradients[j][1];
                for i in 0..6 {
                    c[i][j] += wd * adv * b.values[i];
                }
            }
        }
        for i in 0..6 {
            for j in (i + 1)..6 {
                let v = 0.5 * (c[i][j] - c[j][i]);
                tri.add_triplet(nodes[i], nodes[j], v);
                tri.add_triplet(nodes[j], nodes[i], -v);
            }
        }
    });
    Ok(SparseOperator::from_triplets(tri, false))
}

/// Componentwise ∫ f·φ_i over Ω triangles.
pub fn assemble_load(
    f: impl Fn(f64, f64, f64) -> [f64; 2],
    t: f64,
    mesh: &Mesh,
    dofmap: &DofMap,
) -> [Vec<f64>; 2] {
    let n = dofmap.n_nodes();
    let q = rule(LOAD_DEGREE);
    let mut out = [vec![0.0; n], vec![0.0; n]];
    OmegaElements::new(mesh, dofmap).for_each(|_, g, nodes| {
        for (p, w) in q.points.iter().zip(&q.weights) {
            let b = g.p2(*p);
            let x = g.point(*p);
            let fv = f(x.x, x.y, t);
            let wd = w * g.det;
            for i in 0..6 {
                out[0][nodes[i]] += wd * fv[0] * b.values[i];
                out[1][nodes[i]] += wd * fv[1] * b.values[i];
            }
        }
    });
    out
}

fn push_local(tri: &mut TriMat<f64>, rows: &[usize; 6], cols: &[usize; 6], local: &[[f64; 6]; 6]) {
    for i in 0..6 {
        for j in 0..6 {
            tri.add_triplet(rows[i], cols[j], local[i][j]);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{build_dof_map, interpolate, Space};
    use crate::mesh::build_rectangle_mesh;

    fn setup(n: usize, lambda: f64) -> (Mesh, DofMap) {
        let mesh = build_rectangle_mesh(n, lambda).unwrap();
        let dm = build_dof_map(&mesh).unwrap();
        (mesh, dm)
    }

    #[test]
    fn mass_total_is_area() {
        let (mesh, dm) = setup(3, 1.0 / 3.0);
        let m = assemble_mass(&mesh, &dm);
        let ones = vec![1.0; dm.n_nodes()];
        assert!((m.bilinear(&ones, &ones).unwrap() - 1.0).abs() < 1e-13);
        assert!(m.symmetry_defect() < 1e-14);
    }

    #[test]
    fn stiffness_kills_constants() {
        let (mesh, dm) = setup(4, 0.0);
        let k = assemble_stiffness(&mesh, &dm);
        let ones = vec![1.0; dm.n_nodes()];
        let r = k.mul_vec(&ones).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-12));
        let x = interpolate(|x, _| x, Space::P2, &dm);
        assert!((k.bilinear(&x, &x).unwrap() - 1.0).abs() < 1e-12);
        assert!(k.symmetry_defect() < 1e-14);
    }

    #[test]
    fn divergence_of_constants_and_solenoidal_fields() {
        let (mesh, dm) = setup(3, 0.0);
        let [bx, by] = assemble_divergence(&mesh, &dm);
        let ones = vec![1.0; dm.n_nodes()];
        assert!(bx.mul_vec(&ones).unwrap().iter().all(|v| v.abs() < 1e-14));
        let ux = interpolate(|x, _| x, Space::P2, &dm);
        let uy = interpolate(|_, y| -y, Space::P2, &dm);
        let dx = bx.mul_vec(&ux).unwrap();
        let dy = by.mul_vec(&uy).unwrap();
        assert!(dx.iter().zip(&dy).all(|(a, b)| (a + b).abs() < 1e-14));
    }

    #[test]
    fn convection_is_skew() {
        let (mesh, dm) = setup(3, 0.0);
        let u0 = interpolate(|x, y| x * y + 1.0, Space::P2, &dm);
        let u1 = interpolate(|x, y| x - y * y, Space::P2, &dm);
        let n = assemble_convection([&u0, &u1], &mesh, &dm).unwrap();
        let v = interpolate(|x, y| (3.0 * x).sin() + y, Space::P2, &dm);
        let q = n.bilinear(&v, &v).unwrap();
        let vv: f64 = v.iter().map(|a| a * a).sum();
        assert!(q.abs() <= 1e-12 * n.max_abs() * vv);
        let zero = vec![0.0; dm.n_nodes()];
        let n0 = assemble_convection([&zero, &zero], &mesh, &dm).unwrap();
        assert_eq!(n0.max_abs(), 0.0);
    }

    #[test]
    fn load_sums() {
        let (mesh, dm) = setup(4, 0.5);
        let [fx, fy] = assemble_load(|_, _, _| [1.0, 0.0], 0.0, &mesh, &dm);
        assert!((fx.iter().sum::<f64>() - 1.0).abs() < 1e-13);
        assert!(fy.iter().all(|&v| v == 0.0));
        let [fx, _] = assemble_load(|x, _, _| [x, 0.0], 0.0, &mesh, &dm);
        assert!((fx.iter().sum::<f64>() - 0.5).abs() < 1e-13);
    }

    #[test]
    fn dense_block_matches_entries() {
        let (mesh, dm) = setup(2, 0.0);
        let m = assemble_mass(&mesh, &dm);
        let rows = dm.free_nodes().to_vec();
        let cols = dm.constrained_nodes().to_vec();
        let d = m.dense_block(&rows, &cols);
        for (r, &i) in rows.iter().enumerate() {
            for (c, &j) in cols.iter().enumerate() {
                assert_eq!(d[(r, c)], m.get(i, j));
            }
        }
        let x: Vec<f64> = (0..cols.len()).map(|k| k as f64).collect();
        let y = m.block_mul(&rows, &cols, &x);
        for r in 0..rows.len() {
            let expect: f64 = (0..cols.len()).map(|c| d[(r, c)] * x[c]).sum();
            assert!((y[r] - expect).abs() < 1e-15);
        }
    }
}
