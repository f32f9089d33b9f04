//! Structured triangulations of the unit square and its interaction halo.
//!
//! The computational domain is Ω = (0,1)². Nonlocal interactions reach a
//! distance λ outside Ω, so the mesh covers the square `[-λ, 1+λ]²`; every
//! triangle is tagged as belonging to Ω or to the halo. The square halo is a
//! superset of the exact interaction set (which has rounded corners). Points
//! beyond distance λ never interact with Ω because the kernel is truncated
//! pointwise, so the extra corner area changes no assembled entry.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

const MESH_HEADER: &str = "fraclap-mesh v1";
const GEOM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// True when the point lies strictly inside the open unit square.
    pub fn in_open_square(self) -> bool {
        self.x > GEOM_TOL && self.x < 1.0 - GEOM_TOL && self.y > GEOM_TOL && self.y < 1.0 - GEOM_TOL
    }

    pub fn in_closed_square(self) -> bool {
        self.x >= -GEOM_TOL
            && self.x <= 1.0 + GEOM_TOL
            && self.y >= -GEOM_TOL
            && self.y <= 1.0 + GEOM_TOL
    }
}

/// Three vertex indices in counterclockwise order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triangle {
    pub v: [usize; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Omega,
    Halo,
}

impl Region {
    fn tag(self) -> &'static str {
        match self {
            Region::Omega => "omega",
            Region::Halo => "halo",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point2>,
    triangles: Vec<Triangle>,
    region: Vec<Region>,
    mesh_size: f64,
    halo_width: f64,
}

impl Mesh {
    /// Assemble a mesh from raw parts, checking every structural invariant.
    pub fn new(vertices: Vec<Point2>, triangles: Vec<Triangle>, region: Vec<Region>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::MeshValidation("mesh has no triangles".into()));
        }
        if region.len() != triangles.len() {
            return Err(Error::MeshValidation(format!(
                "{} region tags for {} triangles",
                region.len(),
                triangles.len()
            )));
        }
        let mut mesh = Self {
            vertices,
            triangles,
            region,
            mesh_size: 0.0,
            halo_width: 0.0,
        };
        mesh.validate()?;
        mesh.mesh_size = mesh
            .triangles
            .iter()
            .map(|t| mesh.longest_edge(t))
            .fold(0.0, f64::max);
        mesh.halo_width = mesh
            .vertices
            .iter()
            .map(|p| (-p.x).max(p.x - 1.0).max(-p.y).max(p.y - 1.0).max(0.0))
            .fold(0.0, f64::max);
        Ok(mesh)
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn regions(&self) -> &[Region] {
        &self.region
    }

    pub fn region(&self, t: usize) -> Region {
        self.region[t]
    }

    /// Longest edge over all triangles.
    pub fn mesh_size(&self) -> f64 {
        self.mesh_size
    }

    /// Distance the mesh extends beyond the unit square.
    pub fn halo_width(&self) -> f64 {
        self.halo_width
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn corners(&self, t: usize) -> [Point2; 3] {
        let v = self.triangles[t].v;
        [self.vertices[v[0]], self.vertices[v[1]], self.vertices[v[2]]]
    }

    pub fn signed_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y))
    }

    fn longest_edge(&self, t: &Triangle) -> f64 {
        let p = t.v.map(|i| self.vertices[i]);
        p[0].distance(p[1]).max(p[1].distance(p[2])).max(p[2].distance(p[0]))
    }

    /// Map from sorted vertex pair to the triangles containing that edge.
    pub fn edge_triangles(&self) -> HashMap<(usize, usize), Vec<usize>> {
        let mut edges: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
        for (ti, t) in self.triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (t.v[k], t.v[(k + 1) % 3]);
                edges.entry((a.min(b), a.max(b))).or_default().push(ti);
            }
        }
        edges
    }

    /// Vertices lying on an edge used by exactly one triangle.
    pub fn boundary_vertices(&self) -> Vec<bool> {
        let mut on_boundary = vec![false; self.vertices.len()];
        for ((a, b), tris) in self.edge_triangles() {
            if tris.len() == 1 {
                on_boundary[a] = true;
                on_boundary[b] = true;
            }
        }
        on_boundary
    }

    fn validate(&self) -> Result<()> {
        let nv = self.vertices.len();
        for (i, p) in self.vertices.iter().enumerate() {
            if !p.x.is_finite() || !p.y.is_finite() {
                return Err(Error::MeshValidation(format!("vertex {i} is not finite")));
            }
        }
        for (ti, t) in self.triangles.iter().enumerate() {
            if t.v.iter().any(|&i| i >= nv) {
                return Err(Error::MeshValidation(format!(
                    "triangle {ti} references a vertex out of range"
                )));
            }
            if t.v[0] == t.v[1] || t.v[1] == t.v[2] || t.v[0] == t.v[2] {
                return Err(Error::MeshValidation(format!("triangle {ti} repeats a vertex")));
            }
            if self.signed_area(ti) <= 0.0 {
                return Err(Error::MeshValidation(format!(
                    "triangle {ti} is not counterclockwise (signed area {})",
                    self.signed_area(ti)
                )));
            }
            let [a, b, c] = self.corners(ti);
            let centroid = Point2::new((a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0);
            match self.region[ti] {
                Region::Omega => {
                    if !(a.in_closed_square() && b.in_closed_square() && c.in_closed_square()) {
                        return Err(Error::MeshValidation(format!(
                            "omega triangle {ti} leaves the unit square"
                        )));
                    }
                }
                Region::Halo => {
                    if centroid.in_open_square() {
                        return Err(Error::MeshValidation(format!(
                            "halo triangle {ti} lies inside the unit square"
                        )));
                    }
                }
            }
        }
        for ((a, b), tris) in self.edge_triangles() {
            if tris.len() > 2 {
                return Err(Error::MeshValidation(format!(
                    "edge ({a}, {b}) is shared by {} triangles",
                    tris.len()
                )));
            }
            if tris.len() == 2 {
                // Both neighbours must traverse the edge in opposite directions.
                let dir = |t: usize| {
                    let v = self.triangles[t].v;
                    (0..3).any(|k| v[k] == a && v[(k + 1) % 3] == b)
                };
                if dir(tris[0]) == dir(tris[1]) {
                    return Err(Error::MeshValidation(format!(
                        "edge ({a}, {b}) has inconsistently oriented neighbours"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path)?;
        Self::parse(&text, path)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{MESH_HEADER}");
        let _ = writeln!(out, "{} {}", self.vertices.len(), self.triangles.len());
        for p in &self.vertices {
            let _ = writeln!(out, "{:?} {:?}", p.x, p.y);
        }
        for (t, r) in self.triangles.iter().zip(&self.region) {
            let _ = writeln!(out, "{} {} {} {}", t.v[0], t.v[1], t.v[2], r.tag());
        }
        out
    }

    /// Parse the text format; `origin` is only used in error messages.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let err = |line: usize, message: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        let (ln, header) = lines.next().ok_or_else(|| err(1, "empty mesh file".into()))?;
        if header != MESH_HEADER {
            return Err(err(ln, format!("expected header `{MESH_HEADER}`, found `{header}`")));
        }
        let (ln, counts) = lines
            .next()
            .ok_or_else(|| err(ln + 1, "missing vertex/triangle counts".into()))?;
        let counts: Vec<&str> = counts.split_whitespace().collect();
        if counts.len() != 2 {
            return Err(err(ln, "expected `<n_vertices> <n_triangles>`".into()));
        }
        let parse_count = |s: &str| {
            s.parse::<usize>()
                .map_err(|e| err(ln, format!("bad count `{s}`: {e}")))
        };
        let nv = parse_count(counts[0])?;
        let nt = parse_count(counts[1])?;

        let mut last = ln;
        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (ln, line) = lines
                .next()
                .ok_or_else(|| err(last + 1, format!("expected {nv} vertex lines")))?;
            last = ln;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(err(ln, "vertex line must be `x y`".into()));
            }
            let coord = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| err(ln, format!("bad coordinate `{s}`: {e}")))
            };
            vertices.push(Point2::new(coord(fields[0])?, coord(fields[1])?));
        }

        let mut triangles = Vec::with_capacity(nt);
        let mut region = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (ln, line) = lines
                .next()
                .ok_or_else(|| err(last + 1, format!("expected {nt} triangle lines")))?;
            last = ln;
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(err(ln, "triangle line must be `i j k tag`".into()));
            }
            let mut v = [0usize; 3];
            for k in 0..3 {
                v[k] = fields[k]
                    .parse()
                    .map_err(|e| err(ln, format!("bad vertex index `{}`: {e}", fields[k])))?;
            }
            triangles.push(Triangle { v });
            region.push(match fields[3] {
                "omega" => Region::Omega,
                "halo" => Region::Halo,
                other => return Err(err(ln, format!("unknown region tag `{other}`"))),
            });
        }
        if let Some((ln, _)) = lines.next() {
            return Err(err(ln, "trailing content after the last triangle".into()));
        }
        Self::new(vertices, triangles, region)
    }
}

/// Uniform grid of `n` cells per unit length over `[-λ, 1+λ]²`, each square
/// split along its lower-left to upper-right diagonal.
pub fn build_rectangle_mesh(n: usize, lambda: f64) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::InvalidParameter("n must be at least 1".into()));
    }
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return Err(Error::InvalidParameter(format!("halo width {lambda} must be finite and nonnegative")));
    }
    let halo_cells = lambda * n as f64;
    let m = halo_cells.round();
    if (halo_cells - m).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!(
            "lambda*n = {halo_cells} is not an integer; the halo would not conform to the square boundary"
        )));
    }
    let m = m as usize;
    let cells = n + 2 * m;
    let side = cells + 1;
    let coord = |i: usize| (i as f64 - m as f64) / n as f64;

    let mut vertices = Vec::with_capacity(side * side);
    for j in 0..side {
        for i in 0..side {
            vertices.push(Point2::new(coord(i), coord(j)));
        }
    }
    let id = |i: usize, j: usize| j * side + i;
    let mut triangles = Vec::with_capacity(2 * cells * cells);
    let mut region = Vec::with_capacity(2 * cells * cells);
    for j in 0..cells {
        for i in 0..cells {
            let inside = (m..m + n).contains(&i) && (m..m + n).contains(&j);
            let tag = if inside { Region::Omega } else { Region::Halo };
            triangles.push(Triangle {
                v: [id(i, j), id(i + 1, j), id(i + 1, j + 1)],
            });
            triangles.push(Triangle {
                v: [id(i, j), id(i + 1, j + 1), id(i, j + 1)],
            });
            region.push(tag);
            region.push(tag);
        }
    }
    let mut mesh = Mesh::new(vertices, triangles, region)?;
    // Exact values instead of the floating-point maxima.
    mesh.mesh_size = std::f64::consts::SQRT_2 / n as f64;
    mesh.halo_width = m as f64 / n as f64;
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_meshes_have_expected_counts() {
        let m = build_rectangle_mesh(2, 0.0).unwrap();
        assert_eq!(m.n_vertices(), 9);
        assert_eq!(m.n_triangles(), 8);
        assert!(m.regions().iter().all(|&r| r == Region::Omega));

        let m = build_rectangle_mesh(2, 1.0).unwrap();
        assert_eq!(m.n_vertices(), 49);
        assert_eq!(m.n_triangles(), 72);
        let omega = m.regions().iter().filter(|&&r| r == Region::Omega).count();
        assert_eq!(omega, 8);
        assert_eq!(m.n_triangles() - omega, 64);
    }

    #[test]
    fn mesh_size_is_cell_diagonal() {
        let m = build_rectangle_mesh(4, 1.0).unwrap();
        let measured = (0..m.n_triangles())
            .map(|t| m.longest_edge(&m.triangles()[t]))
            .fold(0.0, f64::max);
        assert!((m.mesh_size() - 2f64.sqrt() / 4.0).abs() < 1e-15);
        assert!((measured - m.mesh_size()).abs() < 1e-14);
        assert_eq!(m.halo_width(), 1.0);
    }

    #[test]
    fn rejects_non_integer_halo() {
        assert!(matches!(
            build_rectangle_mesh(3, 0.5),
            Err(Error::InvalidParameter(_))
        ));
        assert!(build_rectangle_mesh(4, 0.5).is_ok());
        assert!(build_rectangle_mesh(0, 0.0).is_err());
    }

    #[test]
    fn text_round_trip() {
        let m = build_rectangle_mesh(2, 0.5).unwrap();
        let back = Mesh::parse(&m.to_text(), Path::new("mem")).unwrap();
        assert_eq!(back.vertices(), m.vertices());
        assert_eq!(back.triangles(), m.triangles());
        assert_eq!(back.regions(), m.regions());
        assert!((back.mesh_size() - m.mesh_size()).abs() < 1e-15);
        assert_eq!(back.halo_width(), m.halo_width());
    }

    #[test]
    fn clockwise_triangle_is_rejected() {
        let text = "fraclap-mesh v1\n3 1\n0 0\n1 0\n0 1\n0 2 1 omega\n";
        let e = Mesh::parse(text, Path::new("cw.txt")).unwrap_err();
        assert!(matches!(e, Error::MeshValidation(_)), "{e}");
    }

    #[test]
    fn parse_errors_name_the_line() {
        let e = Mesh::parse("", Path::new("empty.txt")).unwrap_err();
        assert!(matches!(e, Error::Parse { line: 1, .. }), "{e}");

        let text = "fraclap-mesh v1\n3 1\n0 0\n1 zero\n0 1\n0 1 2 omega\n";
        match Mesh::parse(text, Path::new("bad.txt")).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 4),
            other => panic!("unexpected {other}"),
        }

        let text = "fraclap-mesh v1\n3 1\n0 0\n1 0\n0 1\n0 1 2 fluid\n";
        match Mesh::parse(text, Path::new("tag.txt")).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 6),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn boundary_edges_belong_to_one_triangle() {
        let m = build_rectangle_mesh(3, 0.0).unwrap();
        let edges = m.edge_triangles();
        let boundary = edges.values().filter(|t| t.len() == 1).count();
        assert_eq!(boundary, 4 * 3);
        assert!(edges.values().all(|t| t.len() <= 2));
    }
}
