//! Dense assembled nonlocal operator and its binary dump format.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use faer::Mat;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fem::DofMap;
use crate::mesh::{Mesh, Point2, Region};

use super::pair::{pair_matrix, PairMatrix};
use super::{classify_pair, FractionalParams, PairClass};

const DUMP_MAGIC: &[u8; 8] = b"FRLAPOP1";
/// Outer triangles processed per batch; fixed so results do not depend on
/// the worker count.
const BATCH: usize = 64;

/// Which rows of the operator are assembled and stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowSet {
    /// Rows of unconstrained nodes only; columns still span every node.
    Free,
    /// Every row.
    All,
}

/// Scalar nonlocal operator over P2 nodes, including the factor C/2.
///
/// Rows are stored for a subset of nodes (all nodes, or the unconstrained
/// ones), columns for every node. The stored square block is exactly
/// symmetric.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseOperator {
    n_cols: usize,
    rows: Vec<usize>,
    row_pos: Vec<Option<usize>>,
    data: Vec<f64>,
    alpha: f64,
    lambda: f64,
}

impl DenseOperator {
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    /// Node index of each stored row.
    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Stored row of node `node`.
    pub fn row(&self, node: usize) -> Option<&[f64]> {
        let r = self.row_pos.get(node).copied().flatten()?;
        Some(&self.data[r * self.n_cols..(r + 1) * self.n_cols])
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.row(i).map(|r| r[j])
    }

    /// Dense block over stored rows `row_nodes` and any `col_nodes`.
    pub fn block(&self, row_nodes: &[usize], col_nodes: &[usize]) -> Result<Mat<f64>> {
        let mut out = Mat::zeros(row_nodes.len(), col_nodes.len());
        for (r, &i) in row_nodes.iter().enumerate() {
            let row = self.row(i).ok_or_else(|| {
                Error::InvalidParameter(format!("row of node {i} is not stored"))
            })?;
            for (c, &j) in col_nodes.iter().enumerate() {
                out[(r, c)] = row[j];
            }
        }
        Ok(out)
    }

    /// (A u)_i for each node i in `row_nodes`, with `u` over all nodes.
    pub fn rows_mul(&self, row_nodes: &[usize], u: &[f64]) -> Result<Vec<f64>> {
        self.check_len(u)?;
        row_nodes
            .iter()
            .map(|&i| {
                let row = self.row(i).ok_or_else(|| {
                    Error::InvalidParameter(format!("row of node {i} is not stored"))
                })?;
                Ok(dot(row, u))
            })
            .collect()
    }

    /// uᵀAu for `u` vanishing on every node whose row is not stored.
    pub fn quadratic_form(&self, u: &[f64]) -> Result<f64> {
        self.check_len(u)?;
        if let Some(i) = (0..self.n_cols).find(|&i| self.row_pos[i].is_none() && u[i] != 0.0) {
            return Err(Error::InvalidParameter(format!(
                "vector is nonzero at node {i}, whose row is not stored"
            )));
        }
        Ok(self
            .rows
            .iter()
            .enumerate()
            .map(|(r, &i)| u[i] * dot(&self.data[r * self.n_cols..(r + 1) * self.n_cols], u))
            .sum())
    }

    /// Largest |A_ij − A_ji| over the stored square block.
    pub fn symmetry_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for &i in &self.rows {
            for &j in &self.rows {
                worst = worst.max((self.get(i, j).unwrap() - self.get(j, i).unwrap()).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    fn check_len(&self, u: &[f64]) -> Result<()> {
        if u.len() != self.n_cols {
            return Err(Error::DimensionMismatch {
                expected: self.n_cols,
                found: u.len(),
            });
        }
        Ok(())
    }

    fn checksum(&self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update((self.n_cols as u64).to_le_bytes());
        h.update(self.alpha.to_le_bytes());
        h.update(self.lambda.to_le_bytes());
        for &r in &self.rows {
            h.update((r as u64).to_le_bytes());
        }
        for v in &self.data {
            h.update(v.to_le_bytes());
        }
        h.finalize().into()
    }

    /// Binary dump: magic, n_cols, n_rows, α, λ, SHA-256 checksum, row
    /// nodes, row-major data; all little endian.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(DUMP_MAGIC)?;
        w.write_all(&(self.n_cols as u64).to_le_bytes())?;
        w.write_all(&(self.rows.len() as u64).to_le_bytes())?;
        w.write_all(&self.alpha.to_le_bytes())?;
        w.write_all(&self.lambda.to_le_bytes())?;
        w.write_all(&self.checksum())?;
        for &r in &self.rows {
            w.write_all(&(r as u64).to_le_bytes())?;
        }
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != DUMP_MAGIC {
            return Err(Error::CorruptDump("bad magic".into()));
        }
        let mut b8 = [0u8; 8];
        let mut read_u64 = |r: &mut BufReader<File>| -> Result<u64> {
            r.read_exact(&mut b8)?;
            Ok(u64::from_le_bytes(b8))
        };
        let n_cols = read_u64(&mut r)? as usize;
        let n_rows = read_u64(&mut r)? as usize;
        let alpha = f64::from_bits(read_u64(&mut r)?);
        let lambda = f64::from_bits(read_u64(&mut r)?);
        if n_rows > n_cols {
            return Err(Error::CorruptDump(format!("{n_rows} rows for {n_cols} columns")));
        }
        let mut stored = [0u8; 32];
        r.read_exact(&mut stored)?;
        let mut rows = Vec::with_capacity(n_rows);
        let mut row_pos = vec![None; n_cols];
        for k in 0..n_rows {
            let i = read_u64(&mut r)? as usize;
            if i >= n_cols || row_pos[i].is_some() {
                return Err(Error::CorruptDump(format!("invalid row node {i}")));
            }
            row_pos[i] = Some(k);
            rows.push(i);
        }
        let mut data = vec![0.0; n_rows * n_cols];
        for v in data.iter_mut() {
            *v = f64::from_bits(read_u64(&mut r)?);
        }
        if r.read(&mut [0u8; 1])? != 0 {
            return Err(Error::CorruptDump("trailing bytes".into()));
        }
        let op = Self {
            n_cols,
            rows,
            row_pos,
            data,
            alpha,
            lambda,
        };
        if op.checksum() != stored {
            return Err(Error::CorruptDump("checksum mismatch".into()));
        }
        Ok(op)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A·u restricted to the stored rows, in stored-row order.
pub fn apply_fractional(a: &DenseOperator, u: &[f64]) -> Result<Vec<f64>> {
    a.check_len(u)?;
    Ok((0..a.n_rows())
        .map(|r| dot(&a.data[r * a.n_cols..(r + 1) * a.n_cols], u))
        .collect())
}

/// Assemble the operator on a mesh whose halo covers the interaction
/// range; only rows of unconstrained nodes are stored.
pub fn assemble_fractional(
    mesh: &Mesh,
    dofmap: &DofMap,
    params: &FractionalParams,
) -> Result<DenseOperator> {
    params.validate()?;
    if params.lambda > mesh.halo_width() + 1e-12 {
        return Err(Error::InvalidParameter(format!(
            "truncation radius {} exceeds the mesh halo width {}",
            params.lambda,
            mesh.halo_width()
        )));
    }
    assemble_fractional_rows(mesh, dofmap, params, RowSet::Free)
}

/// Assemble over the whole mesh without checking the halo width: every
/// triangle takes part regardless of its region tag, so a mesh without a
/// halo is treated as the entire interaction domain.
pub fn assemble_fractional_rows(
    mesh: &Mesh,
    dofmap: &DofMap,
    params: &FractionalParams,
    rows: RowSet,
) -> Result<DenseOperator> {
    params.validate()?;
    let n = dofmap.n_nodes();
    let row_nodes: Vec<usize> = match rows {
        RowSet::All => (0..n).collect(),
        RowSet::Free => dofmap.free_nodes().to_vec(),
    };
    let mut row_pos = vec![None; n];
    for (k, &i) in row_nodes.iter().enumerate() {
        row_pos[i] = Some(k);
    }
    let mut data = vec![0.0; row_nodes.len() * n];

    let nt = mesh.n_triangles();
    let h = mesh.mesh_size();
    let corners: Vec<[Point2; 3]> = (0..nt).map(|t| mesh.corners(t)).collect();
    let grid = CentroidGrid::new(&corners, params.lambda + 4.0 * h);
    let quantum = 1e-9 * h;

    let mut cache: HashMap<[i64; 10], usize> = HashMap::new();
    let mut matrices: Vec<PairMatrix> = Vec::new();
    let mut pairs: Vec<(usize, usize, usize)> = Vec::new();
    let mut pending: Vec<(usize, usize)> = Vec::new();

    let outer: Vec<usize> = (0..nt)
        .filter(|&t| rows == RowSet::All || mesh.region(t) == Region::Omega)
        .collect();
    for chunk in outer.chunks(BATCH) {
        pairs.clear();
        pending.clear();
        for &t1 in chunk {
            let v1 = &mesh.triangles()[t1].v;
            for t2 in grid.neighbours(&corners[t1]) {
                let keep = match rows {
                    RowSet::All => t2 >= t1,
                    RowSet::Free => mesh.region(t2) == Region::Halo || t2 >= t1,
                };
                if !keep {
                    continue;
                }
                let v2 = &mesh.triangles()[t2].v;
                let class = classify_pair(
                    (t1, v1),
                    (t2, v2),
                    &corners[t1],
                    &corners[t2],
                    params.lambda,
                    h,
                );
                if class == PairClass::DisjointFar {
                    continue;
                }
                let key = pair_key(&corners[t1], &corners[t2], t1 == t2, quantum);
                let id = *cache.entry(key).or_insert_with(|| {
                    pending.push((t1, t2));
                    matrices.len() + pending.len() - 1
                });
                pairs.push((t1, t2, id));
            }
        }
        let fresh: Vec<PairMatrix> = pending
            .par_iter()
            .map(|&(a, b)| pair_matrix(&corners[a], &corners[b], a == b, params))
            .collect();
        matrices.extend(fresh);
        for &(t1, t2, id) in &pairs {
            scatter(
                &matrices[id],
                dofmap.element_nodes(t1),
                dofmap.element_nodes(t2),
                &row_pos,
                n,
                &mut data,
            );
        }
    }

    // Mirror the upper triangle of the stored square block.
    for (r, &i) in row_nodes.iter().enumerate() {
        for &j in row_nodes.iter().filter(|&&j| j < i) {
            let rj = row_pos[j].unwrap();
            data[r * n + j] = data[rj * n + i];
        }
    }

    Ok(DenseOperator {
        n_cols: n,
        rows: row_nodes,
        row_pos,
        data,
        alpha: params.alpha,
        lambda: params.lambda,
    })
}

fn pair_key(a: &[Point2; 3], b: &[Point2; 3], identical: bool, quantum: f64) -> [i64; 10] {
    let o = a[0];
    let q = |p: Point2| {
        (
            ((p.x - o.x) / quantum).round() as i64,
            ((p.y - o.y) / quantum).round() as i64,
        )
    };
    let mut key = [0i64; 10];
    let pts = [a[1], a[2], b[0], b[1], b[2]];
    for (k, p) in pts.iter().enumerate() {
        let (x, y) = q(*p);
        key[2 * k] = x;
        key[2 * k + 1] = y;
    }
    if identical {
        // Distinguish the identical pair from a coincident distinct pair.
        key[4] = i64::MIN;
    }
    key
}

/// Add the pair matrix into the stored rows, writing only entries (i, j)
/// with i ≤ j when both rows are stored.
fn scatter(
    pm: &PairMatrix,
    n1: &[usize; 6],
    n2: &[usize; 6],
    row_pos: &[Option<usize>],
    n: usize,
    data: &mut [f64],
) {
    let mut slots: Vec<(usize, usize)> = (0..6).map(|k| (k, n1[k])).collect();
    for k in 0..6 {
        if pm.t2_slots[k] >= 6 {
            slots.push((pm.t2_slots[k], n2[k]));
        }
    }
    for &(s, i) in &slots {
        let Some(r) = row_pos[i] else { continue };
        let row = &mut data[r * n..(r + 1) * n];
        for &(t, j) in &slots {
            if row_pos[j].is_some() && j < i {
                continue;
            }
            row[j] += pm.values[s][t];
        }
    }
}

/// Uniform bins of triangle centroids for range queries.
struct CentroidGrid {
    origin: (f64, f64),
    cell: f64,
    dims: (usize, usize),
    bins: Vec<Vec<usize>>,
}

impl CentroidGrid {
    fn new(corners: &[[Point2; 3]], reach: f64) -> Self {
        let cent: Vec<(f64, f64)> = corners
            .iter()
            .map(|c| ((c[0].x + c[1].x + c[2].x) / 3.0, (c[0].y + c[1].y + c[2].y) / 3.0))
            .collect();
        let (mut x0, mut y0, mut x1, mut y1) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
        for &(x, y) in &cent {
            x0 = x0.min(x);
            y0 = y0.min(y);
            x1 = x1.max(x);
            y1 = y1.max(y);
        }
        let cell = reach.max(1e-12);
        let nx = (((x1 - x0) / cell).floor() as usize + 1).min(4096);
        let ny = (((y1 - y0) / cell).floor() as usize + 1).min(4096);
        let mut bins = vec![Vec::new(); nx * ny];
        let idx = |v: f64, o: f64, n: usize| (((v - o) / cell).floor() as usize).min(n - 1);
        for (t, &(x, y)) in cent.iter().enumerate() {
            bins[idx(y, y0, ny) * nx + idx(x, x0, nx)].push(t);
        }
        Self {
            origin: (x0, y0),
            cell,
            dims: (nx, ny),
            bins,
        }
    }

    /// Triangles whose centroid lies within one reach of this triangle's
    /// centroid, in increasing index order.
    fn neighbours(&self, c: &[Point2; 3]) -> Vec<usize> {
        let (cx, cy) = ((c[0].x + c[1].x + c[2].x) / 3.0, (c[0].y + c[1].y + c[2].y) / 3.0);
        let (nx, ny) = self.dims;
        let bx = ((cx - self.origin.0) / self.cell).floor() as isize;
        let by = ((cy - self.origin.1) / self.cell).floor() as isize;
        let mut out = Vec::new();
        for j in (by - 1).max(0)..=(by + 1).min(ny as isize - 1) {
            for i in (bx - 1).max(0)..=(bx + 1).min(nx as isize - 1) {
                out.extend_from_slice(&self.bins[j as usize * nx + i as usize]);
            }
        }
        out.sort_unstable();
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::build_dof_map;
    use crate::mesh::build_rectangle_mesh;

    #[test]
    fn all_rows_small_mesh_properties() {
        let mesh = build_rectangle_mesh(2, 0.0).unwrap();
        let dm = build_dof_map(&mesh).unwrap();
        let p = FractionalParams::new(0.5, 1.0, 10.0).unwrap();
        let a = assemble_fractional_rows(&mesh, &dm, &p, RowSet::All).unwrap();
        assert_eq!(a.symmetry_defect(), 0.0);
        let ones = vec![1.0; dm.n_nodes()];
        let r = apply_fractional(&a, &ones).unwrap();
        assert!(r.iter().all(|v| v.abs() <= 1e-10), "{:?}", r);
        for &i in a.rows() {
            assert!(a.get(i, i).unwrap() > 0.0);
        }
    }

    #[test]
    fn halo_check() {
        let mesh = build_rectangle_mesh(2, 0.5).unwrap();
        let dm = build_dof_map(&mesh).unwrap();
        let p = FractionalParams::new(0.5, 1.0, 1.0).unwrap();
        assert!(assemble_fractional(&mesh, &dm, &p).is_err());
    }

    #[test]
    fn dump_round_trip_and_corruption() {
        let mesh = build_rectangle_mesh(2, 0.5).unwrap();
        let dm = build_dof_map(&mesh).unwrap();
        let p = FractionalParams::new(0.25, 1.0, 0.5).unwrap();
        let a = assemble_fractional(&mesh, &dm, &p).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("op.bin");
        a.save(&path).unwrap();
        assert_eq!(DenseOperator::load(&path).unwrap(), a);
        let mut bytes = std::fs::read(&path).unwrap();
        let last = bytes.len() - 1;
        bytes[last] ^= 1;
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(DenseOperator::load(&path), Err(Error::CorruptDump(_))));
    }

    #[test]
    fn free_rows_match_all_rows() {
        let mesh = build_rectangle_mesh(2, 0.5).unwrap();
        let dm = build_dof_map(&mesh).unwrap();
        let p = FractionalParams::new(0.75, 1.0, 0.5).unwrap();
        let free = assemble_fractional(&mesh, &dm, &p).unwrap();
        let all = assemble_fractional_rows(&mesh, &dm, &p, RowSet::All).unwrap();
        for &i in free.rows() {
            for j in 0..dm.n_nodes() {
                let (a, b) = (free.get(i, j).unwrap(), all.get(i, j).unwrap());
                assert!((a - b).abs() <= 1e-13 * all.max_abs(), "{i},{j}: {a} {b}");
            }
        }
    }
}
