//! Independent reference for the untruncated nonlocal stiffness matrix on
//! tiny meshes.
//!
//! In relative coordinates z = y − x the form becomes
//!
//! ```text
//! a_ij = (C/2) ∫ G_ij(z) |z|^{−2−2α} dz,
//! G_ij(z) = Σ_{a,b} ∫_{T_a ∩ (T_b − z)} (φ_i(x) − φ_i(x+z)) (φ_j(x) − φ_j(x+z)) dx.
//! ```
//!
//! G is evaluated exactly: the overlap polygon is found by clipping, fanned
//! into triangles and integrated with a collapsed Gauss rule that is exact
//! for the degree-4 integrand. Along each ray z = ρ(cos θ, sin θ), G is a
//! polynomial between the breakpoints where a vertex crosses an edge line,
//! and G/ρ² is a quartic on the first piece, so the radial integral is
//! exact there and Gauss-Legendre on geometrically graded panels elsewhere.
//! Angles are split at all vertex-to-vertex directions. G(−z) = G(z), so
//! only θ ∈ [0, π) is integrated.

#![allow(dead_code)]

use std::f64::consts::PI;

pub struct OracleMesh {
    pub vertices: Vec<[f64; 2]>,
    pub triangles: Vec<[usize; 3]>,
}

/// P2 nodes of the oracle mesh: vertices, then midpoints in first-seen order.
pub struct OracleNodes {
    pub coords: Vec<[f64; 2]>,
    pub element: Vec<[usize; 6]>,
}

const EDGES: [[usize; 2]; 3] = [[0, 1], [1, 2], [2, 0]];

pub fn p2_nodes(mesh: &OracleMesh) -> OracleNodes {
    let mut coords = mesh.vertices.clone();
    let mut element = Vec::new();
    let mut seen: Vec<((usize, usize), usize)> = Vec::new();
    for t in &mesh.triangles {
        let mut e = [t[0], t[1], t[2], 0, 0, 0];
        for (k, [a, b]) in EDGES.iter().enumerate() {
            let key = (t[*a].min(t[*b]), t[*a].max(t[*b]));
            let id = match seen.iter().find(|(k2, _)| *k2 == key) {
                Some((_, id)) => *id,
                None => {
                    let (p, q) = (mesh.vertices[t[*a]], mesh.vertices[t[*b]]);
                    coords.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
                    seen.push((key, coords.len() - 1));
                    coords.len() - 1
                }
            };
            e[3 + k] = id;
        }
        element.push(e);
    }
    OracleNodes { coords, element }
}

struct Tri {
    p: [[f64; 2]; 3],
    // Barycentric coordinate k = c[k] + g[k]·x.
    c: [f64; 3],
    g: [[f64; 2]; 3],
}

impl Tri {
    fn new(p: [[f64; 2]; 3]) -> Self {
        let det = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
        let mut c = [0.0; 3];
        let mut g = [[0.0; 2]; 3];
        for k in 0..3 {
            let (a, b) = (p[(k + 1) % 3], p[(k + 2) % 3]);
            // l_k vanishes on the opposite edge (a, b) and equals 1 at p[k].
            g[k] = [(a[1] - b[1]) / det, (b[0] - a[0]) / det];
            c[k] = (a[0] * b[1] - b[0] * a[1]) / det;
        }
        Self { p, c, g }
    }

    fn basis(&self, x: [f64; 2]) -> [f64; 6] {
        let l: Vec<f64> = (0..3)
            .map(|k| self.c[k] + self.g[k][0] * x[0] + self.g[k][1] * x[1])
            .collect();
        [
            l[0] * (2.0 * l[0] - 1.0),
            l[1] * (2.0 * l[1] - 1.0),
            l[2] * (2.0 * l[2] - 1.0),
            4.0 * l[0] * l[1],
            4.0 * l[1] * l[2],
            4.0 * l[2] * l[0],
        ]
    }
}

/// Clip a convex polygon by the half-plane n·x ≥ c.
fn clip(poly: &[[f64; 2]], n: [f64; 2], c: f64) -> Vec<[f64; 2]> {
    let mut out = Vec::new();
    let m = poly.len();
    for i in 0..m {
        let (p, q) = (poly[i], poly[(i + 1) % m]);
        let (fp, fq) = (n[0] * p[0] + n[1] * p[1] - c, n[0] * q[0] + n[1] * q[1] - c);
        if fp >= 0.0 {
            out.push(p);
        }
        if (fp >= 0.0) != (fq >= 0.0) {
            let t = fp / (fp - fq);
            out.push([p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]);
        }
    }
    out
}

/// Inward half-planes n·x ≥ c of a counterclockwise triangle.
fn half_planes(p: &[[f64; 2]; 3]) -> [([f64; 2], f64); 3] {
    let mut out = [([0.0; 2], 0.0); 3];
    for k in 0..3 {
        let (a, b) = (p[k], p[(k + 1) % 3]);
        let n = [-(b[1] - a[1]), b[0] - a[0]];
        out[k] = (n, n[0] * a[0] + n[1] * a[1]);
    }
    out
}

/// Collapsed 3×3 Gauss rule on the reference triangle, exact to degree 5.
fn collapsed_rule() -> Vec<([f64; 2], f64)> {
    let g = [
        (0.5 - 0.5 * (3.0f64 / 5.0).sqrt(), 5.0 / 18.0),
        (0.5, 8.0 / 18.0),
        (0.5 + 0.5 * (3.0f64 / 5.0).sqrt(), 5.0 / 18.0),
    ];
    let mut out = Vec::new();
    for &(u, wu) in &g {
        for &(v, wv) in &g {
            out.push(([u, v * (1.0 - u)], wu * wv * (1.0 - u)));
        }
    }
    out
}

fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for i in 0..n {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut d = 0.0;
        for _ in 0..200 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((0.5 * (1.0 - x), 1.0 / ((1.0 - x * x) * d * d)));
    }
    out
}

struct Setup {
    tris: Vec<Tri>,
    nodes: Vec<[usize; 6]>,
    n: usize,
    rule: Vec<([f64; 2], f64)>,
}

impl Setup {
    /// G(z) accumulated into `out` (n×n, row major).
    fn g(&self, z: [f64; 2], out: &mut [f64]) {
        for (a, ta) in self.tris.iter().enumerate() {
            for (b, tb) in self.tris.iter().enumerate() {
                let shifted = [
                    [tb.p[0][0] - z[0], tb.p[0][1] - z[1]],
                    [tb.p[1][0] - z[0], tb.p[1][1] - z[1]],
                    [tb.p[2][0] - z[0], tb.p[2][1] - z[1]],
                ];
                let mut poly: Vec<[f64; 2]> = ta.p.to_vec();
                for (nrm, c) in half_planes(&shifted) {
                    poly = clip(&poly, nrm, c);
                    if poly.len() < 3 {
                        break;
                    }
                }
                if poly.len() < 3 {
                    continue;
                }
                let mut d = [0.0f64; 12];
                let mut idx = [0usize; 12];
                for k in 0..6 {
                    idx[k] = self.nodes[a][k];
                    idx[6 + k] = self.nodes[b][k];
                }
                for s in 1..poly.len() - 1 {
                    let (p0, p1, p2) = (poly[0], poly[s], poly[s + 1]);
                    let det = ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1])).abs();
                    if det == 0.0 {
                        continue;
                    }
                    for &(r, w) in &self.rule {
                        let x = [
                            p0[0] + r[0] * (p1[0] - p0[0]) + r[1] * (p2[0] - p0[0]),
                            p0[1] + r[0] * (p1[1] - p0[1]) + r[1] * (p2[1] - p0[1]),
                        ];
                        let y = [x[0] + z[0], x[1] + z[1]];
                        let fa = ta.basis(x);
                        let fb = tb.basis(y);
                        for k in 0..6 {
                            d[k] = fa[k];
                            d[6 + k] = -fb[k];
                        }
                        let wd = w * det;
                        for i in 0..12 {
                            let di = wd * d[i];
                            for j in 0..12 {
                                out[idx[i] * self.n + idx[j]] += di * d[j];
                            }
                        }
                    }
                }
            }
        }
    }

    /// Positive ρ where some vertex crosses some edge line along direction e.
    fn breakpoints(&self, e: [f64; 2], rho_max: f64) -> Vec<f64> {
        let mut out = Vec::new();
        let tol = 1e-10 * rho_max;
        for ta in &self.tris {
            for tb in &self.tris {
                for (nrm, c) in half_planes(&tb.p) {
                    let ne = nrm[0] * e[0] + nrm[1] * e[1];
                    if ne.abs() < 1e-14 {
                        continue;
                    }
                    for v in &ta.p {
                        // Vertex v meets the line of T_b − ρe, or the pair
                        // with roles swapped meets it from the other side.
                        let r = (c - nrm[0] * v[0] - nrm[1] * v[1]) / ne;
                        if r > tol && r < rho_max {
                            out.push(r);
                        }
                        let r = -r;
                        if r > tol && r < rho_max {
                            out.push(r);
                        }
                    }
                }
            }
        }
        out.sort_by(f64::total_cmp);
        out.dedup_by(|a, b| (*a - *b).abs() <= tol);
        out
    }
}

/// Oracle matrices (including C/2) for each α, in the oracle's node order.
pub fn oracle_matrices(mesh: &OracleMesh, alphas: &[f64], constants: &[f64]) -> (OracleNodes, Vec<Vec<f64>>) {
    let nodes = p2_nodes(mesh);
    let n = nodes.coords.len();
    let tris: Vec<Tri> = mesh
        .triangles
        .iter()
        .map(|t| Tri::new([mesh.vertices[t[0]], mesh.vertices[t[1]], mesh.vertices[t[2]]]))
        .collect();
    let setup = Setup {
        tris,
        nodes: nodes.element.clone(),
        n,
        rule: collapsed_rule(),
    };
    let mut span = 0.0f64;
    for p in &mesh.vertices {
        for q in &mesh.vertices {
            span = span.max(((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt());
        }
    }
    let rho_max = span * (1.0 + 1e-9);

    // Angular sectors between vertex-to-vertex directions.
    let mut dirs = vec![0.0];
    for p in &mesh.vertices {
        for q in &mesh.vertices {
            if p != q {
                dirs.push((q[1] - p[1]).atan2(q[0] - p[0]).rem_euclid(PI));
            }
        }
    }
    dirs.push(PI);
    dirs.sort_by(f64::total_cmp);
    dirs.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let theta_rule = gauss_legendre(20);
    let rho_rule = gauss_legendre(12);
    let cheb: Vec<f64> = (0..5).map(|k| 0.5 - 0.5 * ((2 * k + 1) as f64 * PI / 10.0).cos()).collect();

    let mut out = vec![vec![0.0; n * n]; alphas.len()];
    let mut gbuf = vec![0.0; n * n];
    let mut samples = vec![vec![0.0; n * n]; 5];
    for w in dirs.windows(2) {
        let (t0, t1) = (w[0], w[1]);
        for &(u, wu) in &theta_rule {
            let theta = t0 + u * (t1 - t0);
            let wt = 2.0 * wu * (t1 - t0);
            let e = [theta.cos(), theta.sin()];
            let mut bps = setup.breakpoints(e, rho_max);
            bps.push(rho_max);
            // First piece: G/ρ² is a quartic in ρ.
            let r1 = bps[0];
            for (s, &t) in cheb.iter().enumerate() {
                samples[s].iter_mut().for_each(|v| *v = 0.0);
                let rho = t * r1;
                setup.g([rho * e[0], rho * e[1]], &mut samples[s]);
            }
            let vinv = vandermonde_inverse(&cheb);
            for (ai, &alpha) in alphas.iter().enumerate() {
                let mut weights = [0.0; 5];
                for s in 0..5 {
                    let rho = cheb[s] * r1;
                    for m in 0..5 {
                        // Coefficient m of G/ρ² picks sample s with vinv[m][s].
                        weights[s] += vinv[m][s] / (m as f64 + 2.0 - 2.0 * alpha);
                    }
                    weights[s] *= r1.powf(2.0 - 2.0 * alpha) / (rho * rho);
                }
                let o = &mut out[ai];
                for s in 0..5 {
                    let f = wt * weights[s];
                    for (k, v) in samples[s].iter().enumerate() {
                        o[k] += f * v;
                    }
                }
            }
            // Remaining pieces on panels with end ratio at most 2.
            let mut lo = r1;
            for &hi in &bps[1..] {
                let mut a = lo;
                while a < hi * (1.0 - 1e-15) {
                    let b = (2.0 * a).min(hi);
                    for &(u, wu) in &rho_rule {
                        let rho = a + u * (b - a);
                        gbuf.iter_mut().for_each(|v| *v = 0.0);
                        setup.g([rho * e[0], rho * e[1]], &mut gbuf);
                        for (ai, &alpha) in alphas.iter().enumerate() {
                            let f = wt * wu * (b - a) * rho.powf(-1.0 - 2.0 * alpha);
                            for (k, v) in gbuf.iter().enumerate() {
                                out[ai][k] += f * v;
                            }
                        }
                    }
                    a = b;
                }
                lo = hi;
            }
        }
    }
    for (ai, c) in constants.iter().enumerate() {
        out[ai].iter_mut().for_each(|v| *v *= 0.5 * c);
    }
    (nodes, out)
}

/// Inverse of V[s][m] = t_s^m.
fn vandermonde_inverse(t: &[f64]) -> Vec<Vec<f64>> {
    let n = t.len();
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|s| {
            let mut row: Vec<f64> = (0..n).map(|m| t[s].powi(m as i32)).collect();
            row.extend((0..n).map(|k| if k == s { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        let d = a[col][col];
        a[col].iter_mut().for_each(|v| *v /= d);
        for r in 0..n {
            if r != col {
                let f = a[r][col];
                if f != 0.0 {
                    let pivot_row = a[col].clone();
                    for (v, p) in a[r].iter_mut().zip(&pivot_row) {
                        *v -= f * p;
                    }
                }
            }
        }
    }
    // Rows of the inverse of V map samples to coefficients.
    (0..n).map(|m| a[m][n..].to_vec()).collect()
}
