//! Taylor-Hood degree-of-freedom numbering.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::fem::basis::P2_EDGES;
use crate::mesh::{Mesh, Point2, Region};

/// P2 velocity nodes (vertices first, then edge midpoints in order of first
/// appearance) and P1 pressure nodes (vertices of Ω triangles).
///
/// Velocity is vector valued; component `c` of node `i` is dof
/// `c * n_nodes + i`. All scalar operators act on node indices.
#[derive(Debug, Clone, PartialEq)]
pub struct DofMap {
    nodes: Vec<Point2>,
    n_vertices: usize,
    element_nodes: Vec<[usize; 6]>,
    free: Vec<usize>,
    constrained: Vec<usize>,
    free_index: Vec<Option<usize>>,
    pressure_vertices: Vec<usize>,
    pressure_index: Vec<Option<usize>>,
}

impl DofMap {
    /// Coordinates of all P2 nodes.
    pub fn nodes(&self) -> &[Point2] {
        &self.nodes
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    /// Number of velocity dofs over both components.
    pub fn n_u(&self) -> usize {
        2 * self.nodes.len()
    }

    pub fn n_p(&self) -> usize {
        self.pressure_vertices.len()
    }

    /// Global P2 node numbers of triangle `t` in local order.
    pub fn element_nodes(&self, t: usize) -> &[usize; 6] {
        &self.element_nodes[t]
    }

    /// Nodes inside the open square, in increasing node order.
    pub fn free_nodes(&self) -> &[usize] {
        &self.free
    }

    /// Nodes on ∂Ω or in the halo.
    pub fn constrained_nodes(&self) -> &[usize] {
        &self.constrained
    }

    pub fn n_free(&self) -> usize {
        self.free.len()
    }

    pub fn free_index(&self, node: usize) -> Option<usize> {
        self.free_index[node]
    }

    pub fn is_constrained(&self, node: usize) -> bool {
        self.free_index[node].is_none()
    }

    /// Constrained velocity dofs over both components, sorted.
    pub fn constrained_velocity_dofs(&self) -> Vec<usize> {
        let n = self.nodes.len();
        let mut dofs: Vec<usize> = self.constrained.to_vec();
        dofs.extend(self.constrained.iter().map(|&i| i + n));
        dofs
    }

    /// Mesh vertex carrying each pressure dof.
    pub fn pressure_vertices(&self) -> &[usize] {
        &self.pressure_vertices
    }

    pub fn pressure_index(&self, vertex: usize) -> Option<usize> {
        self.pressure_index[vertex]
    }

    /// Pressure dofs of triangle `t`; `None` for halo triangles.
    pub fn element_pressure(&self, t: usize) -> Option<[usize; 3]> {
        let v = &self.element_nodes[t];
        Some([
            self.pressure_index[v[0]]?,
            self.pressure_index[v[1]]?,
            self.pressure_index[v[2]]?,
        ])
    }

    /// Restrict a nodal vector to the free nodes.
    pub fn gather_free(&self, full: &[f64]) -> Vec<f64> {
        self.free.iter().map(|&i| full[i]).collect()
    }

    /// Write free values back into a nodal vector.
    pub fn scatter_free(&self, free_values: &[f64], full: &mut [f64]) {
        for (&i, &v) in self.free.iter().zip(free_values) {
            full[i] = v;
        }
    }
}

pub fn build_dof_map(mesh: &Mesh) -> Result<DofMap> {
    check_conformity(mesh)?;
    let nv = mesh.n_vertices();
    let mut nodes: Vec<Point2> = mesh.vertices().to_vec();
    let mut edge_ids: HashMap<(usize, usize), usize> = HashMap::new();
    let mut element_nodes = Vec::with_capacity(mesh.n_triangles());
    for t in mesh.triangles() {
        let mut local = [t.v[0], t.v[1], t.v[2], 0, 0, 0];
        for (e, &[a, b]) in P2_EDGES.iter().enumerate() {
            let (va, vb) = (t.v[a], t.v[b]);
            let key = (va.min(vb), va.max(vb));
            let id = *edge_ids.entry(key).or_insert_with(|| {
                let (pa, pb) = (mesh.vertices()[va], mesh.vertices()[vb]);
                nodes.push(Point2::new(0.5 * (pa.x + pb.x), 0.5 * (pa.y + pb.y)));
                nodes.len() - 1
            });
            local[3 + e] = id;
        }
        element_nodes.push(local);
    }

    let mut free = Vec::new();
    let mut constrained = Vec::new();
    let mut free_index = vec![None; nodes.len()];
    for (i, p) in nodes.iter().enumerate() {
        if p.in_open_square() {
            free_index[i] = Some(free.len());
            free.push(i);
        } else {
            constrained.push(i);
        }
    }

    let mut is_pressure = vec![false; nv];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        if mesh.region(t) == Region::Omega {
            for &v in &tri.v {
                is_pressure[v] = true;
            }
        }
    }
    let mut pressure_vertices = Vec::new();
    let mut pressure_index = vec![None; nodes.len()];
    for v in 0..nv {
        if is_pressure[v] {
            pressure_index[v] = Some(pressure_vertices.len());
            pressure_vertices.push(v);
        }
    }

    Ok(DofMap {
        nodes,
        n_vertices: nv,
        element_nodes,
        free,
        constrained,
        free_index,
        pressure_vertices,
        pressure_index,
    })
}

/// Reject hanging nodes: a vertex lying inside an edge that only one
/// triangle uses.
fn check_conformity(mesh: &Mesh) -> Result<()> {
    let verts = mesh.vertices();
    let h = mesh.mesh_size();
    for ((a, b), tris) in mesh.edge_triangles() {
        if tris.len() != 1 {
            continue;
        }
        let (pa, pb) = (verts[a], verts[b]);
        let (dx, dy) = (pb.x - pa.x, pb.y - pa.y);
        let len2 = dx * dx + dy * dy;
        for (v, p) in verts.iter().enumerate() {
            if v == a || v == b {
                continue;
            }
            let s = ((p.x - pa.x) * dx + (p.y - pa.y) * dy) / len2;
            if s <= 1e-12 || s >= 1.0 - 1e-12 {
                continue;
            }
            let cross = (p.x - pa.x) * dy - (p.y - pa.y) * dx;
            if cross.abs() <= 1e-12 * h * h {
                return Err(Error::MeshValidation(format!(
                    "vertex {v} hangs on edge ({a}, {b})"
                )));
            }
        }
    }
    Ok(())
}
