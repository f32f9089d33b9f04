//! Integration of the truncated nonlocal form over one pair of triangles.
//!
//! For a pair (T1, T2) the unordered contribution
//!
//! ```text
//! (C/2) ∬_{T1×T2 ∪ T2×T1} (φ_i(x) − φ_i(y)) (φ_j(x) − φ_j(y)) |x − y|^{−2−2α} 1{|x−y| ≤ λ}
//! ```
//!
//! is returned as a 12×12 matrix over "slots": slots 0..6 hold the nodes of
//! T1 and slots 6..12 the nodes of T2, with nodes shared by both triangles
//! folded onto their T1 slot.
//!
//! Well separated pairs use a tensor product of triangle rules with the
//! truncation applied per point pair. Identical, touching and close pairs
//! are integrated in polar coordinates around each point x of a graded rule
//! on the outer triangle: along a ray y = x + ρe every basis function of the
//! inner triangle is a quadratic in ρ, so the radial integral is done in
//! closed form against ρ^{−1−2α} and only the angle and x need quadrature.

use crate::fem::basis::{p2_values, ElementGeometry, P2_EDGES};
use crate::fem::quadrature::{gauss_legendre, quadrature_rule};
use crate::mesh::Point2;

use super::{kernel_constant, FractionalParams};

/// Pairs closer than this many element diameters use the polar scheme.
const NEAR_RATIO: f64 = 1.0;
/// Gauss-Legendre points per angular panel.
const ANGULAR_POINTS: usize = 8;
/// Largest allowed ratio of ray lengths across one angular panel.
const PANEL_RATIO: f64 = 2.0;
const MAX_PANEL_DEPTH: usize = 40;
/// Outer leaves within this many of their own diameters of the singular
/// set are refined.
const GRADING_REACH: f64 = 0.0;

#[derive(Debug, Clone, PartialEq)]
pub struct PairMatrix {
    /// Slot of each node of T2.
    pub t2_slots: [usize; 6],
    pub values: [[f64; 12]; 12],
}

/// Geometric kind of a pair, decided from coordinates alone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Identical,
    Touching,
    Near,
    Far,
}

/// Set toward which the outer rule is graded, as physical segments (a
/// point is a degenerate segment).
#[derive(Debug, Clone)]
struct Grading(Vec<(Point2, Point2)>);

impl Grading {
    fn edges(c: &[Point2; 3]) -> Self {
        Self((0..3).map(|k| (c[k], c[(k + 1) % 3])).collect())
    }

    fn distance(&self, t: &[Point2; 3]) -> f64 {
        let mut d = f64::INFINITY;
        for &(a, b) in &self.0 {
            for &v in t {
                d = d.min(point_segment_distance(v, a, b));
            }
            d = d.min(point_triangle_distance(a, t)).min(point_triangle_distance(b, t));
            for k in 0..3 {
                d = d.min(segment_distance(a, b, t[k], t[(k + 1) % 3]));
            }
        }
        d
    }
}

/// Unordered pair contribution, including the factor C/2.
pub fn pair_matrix(
    c1: &[Point2; 3],
    c2: &[Point2; 3],
    identical: bool,
    params: &FractionalParams,
) -> PairMatrix {
    let constant = kernel_constant(2, params.alpha).expect("validated alpha");
    let mut m = [[0.0; 12]; 12];
    let (t2_slots, shared) = if identical {
        ([0, 1, 2, 3, 4, 5], vec![(0, 0), (1, 1), (2, 2)])
    } else {
        slots(c1, c2)
    };
    let kind = if identical {
        Kind::Identical
    } else if !shared.is_empty() {
        Kind::Touching
    } else if triangle_distance(c1, c2) < NEAR_RATIO * diameter(c1).max(diameter(c2)) {
        Kind::Near
    } else {
        Kind::Far
    };
    let s1 = [0, 1, 2, 3, 4, 5];
    match kind {
        Kind::Far => tensor(c1, c2, &s1, &t2_slots, params, &mut m),
        Kind::Identical => {
            let g = Grading::edges(c1);
            polar(c1, c1, &s1, &s1, true, &g, params, &mut m);
        }
        Kind::Touching => {
            let (a, b) = (shared[0].0, shared[shared.len() - 1].0);
            let g = Grading(vec![(c1[a], c1[b])]);
            polar(c1, c2, &s1, &t2_slots, false, &g, params, &mut m);
            polar(c2, c1, &t2_slots, &s1, false, &g, params, &mut m);
        }
        Kind::Near => {
            polar(c1, c2, &s1, &t2_slots, false, &Grading::edges(c2), params, &mut m);
            polar(c2, c1, &t2_slots, &s1, false, &Grading::edges(c1), params, &mut m);
        }
    }
    let scale = 0.5 * constant;
    for row in m.iter_mut() {
        for v in row.iter_mut() {
            *v *= scale;
        }
    }
    PairMatrix {
        t2_slots,
        values: m,
    }
}

/// Slot map of T2's nodes and the shared vertices as (T1 index, T2 index).
fn slots(c1: &[Point2; 3], c2: &[Point2; 3]) -> ([usize; 6], Vec<(usize, usize)>) {
    let mut map = [0usize; 6];
    let mut vmap = [None; 3];
    let mut shared = Vec::new();
    for k in 0..3 {
        vmap[k] = (0..3).find(|&m| c1[m] == c2[k]);
        match vmap[k] {
            Some(m) => {
                map[k] = m;
                shared.push((m, k));
            }
            None => map[k] = 6 + k,
        }
    }
    for (e, &[a, b]) in P2_EDGES.iter().enumerate() {
        map[3 + e] = match (vmap[a], vmap[b]) {
            (Some(ma), Some(mb)) => {
                let e1 = P2_EDGES
                    .iter()
                    .position(|&[p, q]| (p == ma && q == mb) || (p == mb && q == ma))
                    .expect("two distinct vertices span an edge");
                3 + e1
            }
            _ => 9 + e,
        };
    }
    (map, shared)
}

fn diameter(c: &[Point2; 3]) -> f64 {
    c[0].distance(c[1]).max(c[1].distance(c[2])).max(c[2].distance(c[0]))
}

fn point_segment_distance(p: Point2, a: Point2, b: Point2) -> f64 {
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = (((p.x - a.x) * dx + (p.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    p.distance(Point2::new(a.x + t * dx, a.y + t * dy))
}

fn segment_distance(a: Point2, b: Point2, c: Point2, d: Point2) -> f64 {
    let cross = |o: Point2, p: Point2, q: Point2| (p.x - o.x) * (q.y - o.y) - (p.y - o.y) * (q.x - o.x);
    let (d1, d2) = (cross(a, b, c), cross(a, b, d));
    let (d3, d4) = (cross(c, d, a), cross(c, d, b));
    if d1 * d2 < 0.0 && d3 * d4 < 0.0 {
        return 0.0;
    }
    point_segment_distance(a, c, d)
        .min(point_segment_distance(b, c, d))
        .min(point_segment_distance(c, a, b))
        .min(point_segment_distance(d, a, b))
}

/// Distance between two triangles with disjoint interiors.
pub(crate) fn triangle_distance(a: &[Point2; 3], b: &[Point2; 3]) -> f64 {
    let mut d = f64::INFINITY;
    for (p, tri) in [(a, b), (b, a)] {
        for &v in p.iter() {
            for k in 0..3 {
                d = d.min(point_segment_distance(v, tri[k], tri[(k + 1) % 3]));
            }
        }
    }
    d
}

/// Point-to-triangle distance, zero inside.
fn point_triangle_distance(p: Point2, t: &[Point2; 3]) -> f64 {
    let g = ElementGeometry::new(*t);
    if g.barycentric(p).iter().all(|&l| l >= 0.0) {
        return 0.0;
    }
    (0..3)
        .map(|k| point_segment_distance(p, t[k], t[(k + 1) % 3]))
        .fold(f64::INFINITY, f64::min)
}

fn kernel(r: f64, alpha: f64, lambda: f64) -> f64 {
    if r > lambda {
        0.0
    } else {
        r.powf(-2.0 - 2.0 * alpha)
    }
}

/// Tensor rule for a separated pair; adds both orders.
fn tensor(
    c1: &[Point2; 3],
    c2: &[Point2; 3],
    s1: &[usize; 6],
    s2: &[usize; 6],
    params: &FractionalParams,
    m: &mut [[f64; 12]; 12],
) {
    let rule = quadrature_rule(params.pair_quadrature_degree).expect("validated degree");
    let (g1, g2) = (ElementGeometry::new(*c1), ElementGeometry::new(*c2));
    let pts = |g: &ElementGeometry| -> Vec<(Point2, f64, [f64; 6])> {
        rule.points
            .iter()
            .zip(&rule.weights)
            .map(|(l, w)| (g.point(*l), w * g.det.abs(), p2_values(*l)))
            .collect()
    };
    let (xs, ys) = (pts(&g1), pts(&g2));
    let mut w = vec![vec![0.0; ys.len()]; xs.len()];
    let mut kx = vec![0.0; xs.len()];
    let mut ky = vec![0.0; ys.len()];
    for (a, (x, wx, _)) in xs.iter().enumerate() {
        for (b, (y, wy, _)) in ys.iter().enumerate() {
            let v = wx * wy * kernel(x.distance(*y), params.alpha, params.lambda);
            w[a][b] = v;
            kx[a] += v;
            ky[b] += v;
        }
    }
    for (a, (_, _, px)) in xs.iter().enumerate() {
        for i in 0..6 {
            for j in 0..6 {
                m[s1[i]][s1[j]] += 2.0 * kx[a] * px[i] * px[j];
            }
        }
    }
    for (b, (_, _, py)) in ys.iter().enumerate() {
        for i in 0..6 {
            for j in 0..6 {
                m[s2[i]][s2[j]] += 2.0 * ky[b] * py[i] * py[j];
            }
        }
    }
    let mut cross = [[0.0; 6]; 6];
    for (a, (_, _, px)) in xs.iter().enumerate() {
        for (b, (_, _, py)) in ys.iter().enumerate() {
            let v = w[a][b];
            if v == 0.0 {
                continue;
            }
            for i in 0..6 {
                let pv = px[i] * v;
                for j in 0..6 {
                    cross[i][j] += pv * py[j];
                }
            }
        }
    }
    for i in 0..6 {
        for j in 0..6 {
            m[s1[i]][s2[j]] -= 2.0 * cross[i][j];
            m[s2[j]][s1[i]] -= 2.0 * cross[i][j];
        }
    }
}

/// Graded leaves of the outer triangle in its barycentric coordinates.
fn graded_leaves(outer: &[Point2; 3], grading: &Grading, levels: usize) -> Vec<[[f64; 3]; 3]> {
    let root = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let geo = ElementGeometry::new(*outer);
    let touches = |t: &[[f64; 3]; 3]| -> bool {
        let pts = t.map(|l| geo.point(l));
        grading.distance(&pts) <= GRADING_REACH * diameter(&pts)
    };
    let mut leaves = Vec::new();
    let mut active = if touches(&root) { vec![root] } else { leaves.push(root); vec![] };
    for _ in 0..levels {
        let mut next = Vec::new();
        for t in active {
            let mid = |a: [f64; 3], b: [f64; 3]| {
                [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])]
            };
            let (m01, m12, m20) = (mid(t[0], t[1]), mid(t[1], t[2]), mid(t[2], t[0]));
            for child in [
                [t[0], m01, m20],
                [m01, t[1], m12],
                [m20, m12, t[2]],
                [m01, m12, m20],
            ] {
                if touches(&child) {
                    next.push(child);
                } else {
                    leaves.push(child);
                }
            }
        }
        active = next;
    }
    leaves.extend(active);
    leaves
}

/// Outer points (barycentric in the outer triangle) and physical weights.
fn outer_rule(
    outer: &[Point2; 3],
    grading: &Grading,
    params: &FractionalParams,
) -> Vec<([f64; 3], f64)> {
    let rule = quadrature_rule(params.pair_quadrature_degree).expect("validated degree");
    let det = ElementGeometry::new(*outer).det.abs();
    let mut out = Vec::new();
    for leaf in graded_leaves(outer, grading, params.diagonal_refinement_levels) {
        let ratio = ((leaf[1][1] - leaf[0][1]) * (leaf[2][2] - leaf[0][2])
            - (leaf[2][1] - leaf[0][1]) * (leaf[1][2] - leaf[0][2]))
            .abs();
        for (q, w) in rule.points.iter().zip(&rule.weights) {
            let mut l = [0.0; 3];
            for (v, &qv) in leaf.iter().zip(q) {
                for k in 0..3 {
                    l[k] += qv * v[k];
                }
            }
            out.push((l, w * ratio * det));
        }
    }
    out
}

/// Ray data of the inner triangle seen from a fixed point x.
struct RayFrame {
    l: [f64; 3],
    grad: [[f64; 2]; 3],
    inside: bool,
    lambda: f64,
}

impl RayFrame {
    /// Parameter interval of the ray inside the inner triangle and ball.
    fn interval(&self, theta: f64) -> Option<(f64, f64, [f64; 3])> {
        let e = [theta.cos(), theta.sin()];
        let s = [
            self.grad[0][0] * e[0] + self.grad[0][1] * e[1],
            self.grad[1][0] * e[0] + self.grad[1][1] * e[1],
            self.grad[2][0] * e[0] + self.grad[2][1] * e[1],
        ];
        let mut r0: f64 = 0.0;
        let mut r1 = self.lambda;
        for k in 0..3 {
            if s[k] > 0.0 {
                if !self.inside {
                    r0 = r0.max(-self.l[k] / s[k]);
                }
            } else if s[k] < 0.0 {
                r1 = r1.min(self.l[k] / -s[k]);
            } else if self.l[k] < 0.0 {
                return None;
            }
        }
        if self.inside {
            r0 = 0.0;
        }
        (r1 > r0).then_some((r0, r1, s))
    }
}

/// Angular breakpoints around x: directions of the inner vertices, of the
/// feet of the perpendiculars to its edge lines, and of the points where
/// those lines meet the truncation circle.
fn angular_panels(x: Point2, inner: &[Point2; 3], inside: bool, lambda: f64) -> Vec<(f64, f64)> {
    use std::f64::consts::TAU;
    let angle = |p: Point2| (p.y - x.y).atan2(p.x - x.x);
    let vertex_angles: Vec<f64> = inner.iter().map(|&p| angle(p)).collect();
    let (start, end) = if inside {
        (vertex_angles[0], vertex_angles[0] + TAU)
    } else {
        let mut a = vertex_angles.clone();
        a.sort_by(f64::total_cmp);
        let gaps = [a[1] - a[0], a[2] - a[1], a[0] + TAU - a[2]];
        let (k, gmax) = gaps
            .iter()
            .enumerate()
            .fold((0, f64::MIN), |acc, (i, &g)| if g > acc.1 { (i, g) } else { acc });
        let start = a[(k + 1) % 3];
        (start, start + TAU - gmax)
    };
    let mut cuts = vertex_angles;
    for k in 0..3 {
        let (p, q) = (inner[k], inner[(k + 1) % 3]);
        let (dx, dy) = (q.x - p.x, q.y - p.y);
        let t = ((x.x - p.x) * dx + (x.y - p.y) * dy) / (dx * dx + dy * dy);
        let foot = Point2::new(p.x + t * dx, p.y + t * dy);
        let d = foot.distance(x);
        if d > 1e-14 * (dx.abs() + dy.abs()) {
            let a = angle(foot);
            cuts.push(a);
            if d < lambda {
                let spread = (d / lambda).acos();
                cuts.push(a + spread);
                cuts.push(a - spread);
            }
        }
    }
    let mut inner_cuts: Vec<f64> = cuts
        .into_iter()
        .map(|a| start + (a - start).rem_euclid(TAU))
        .filter(|&a| a > start && a < end)
        .collect();
    inner_cuts.sort_by(f64::total_cmp);
    let mut edges = vec![start];
    for a in inner_cuts {
        if a - edges.last().unwrap() > 1e-13 {
            edges.push(a);
        }
    }
    if end - edges.last().unwrap() > 1e-13 {
        edges.push(end);
    } else {
        *edges.last_mut().unwrap() = end;
    }
    edges.windows(2).map(|w| (w[0], w[1])).collect()
}

fn refine_panel(frame: &RayFrame, a: f64, b: f64, depth: usize, out: &mut Vec<(f64, f64)>) {
    let span = b - a;
    let samples = [a + 1e-9 * span, 0.5 * (a + b), b - 1e-9 * span];
    let mut r0 = (f64::INFINITY, 0.0f64);
    let mut r1 = (f64::INFINITY, 0.0f64);
    let mut hits = 0;
    for &t in &samples {
        if let Some((lo, hi, _)) = frame.interval(t) {
            hits += 1;
            r0 = (r0.0.min(lo), r0.1.max(lo));
            r1 = (r1.0.min(hi), r1.1.max(hi));
        }
    }
    let steep = hits > 0
        && (r1.1 > PANEL_RATIO * r1.0 || (r0.0 > 0.0 && r0.1 > PANEL_RATIO * r0.0));
    if depth < MAX_PANEL_DEPTH && (steep || (hits > 0 && hits < samples.len())) {
        let mid = 0.5 * (a + b);
        refine_panel(frame, a, mid, depth + 1, out);
        refine_panel(frame, mid, b, depth + 1, out);
    } else {
        out.push((a, b));
    }
}

/// ∫_{r0}^{r1} ρ^{k−1−2α} dρ for k = 0..=4.
fn radial_moments(r0: f64, r1: f64, alpha: f64, first: usize) -> [f64; 5] {
    let mut out = [0.0; 5];
    let (l0, l1) = (r0.ln(), r1.ln());
    for (k, o) in out.iter_mut().enumerate().skip(first) {
        let eps = k as f64 - 2.0 * alpha;
        *o = if r0 == 0.0 {
            r1.powf(eps) / eps
        } else if eps.abs() < 1e-12 {
            l1 - l0
        } else {
            ((eps * l1).exp_m1() - (eps * l0).exp_m1()) / eps
        };
    }
    out
}

/// Ordered contribution ∫_{outer} ∫_{inner} with x on the outer triangle.
#[allow(clippy::too_many_arguments)]
fn polar(
    outer: &[Point2; 3],
    inner: &[Point2; 3],
    so: &[usize; 6],
    si: &[usize; 6],
    same: bool,
    grading: &Grading,
    params: &FractionalParams,
    m: &mut [[f64; 12]; 12],
) {
    let (gl_x, gl_w) = gauss_legendre(ANGULAR_POINTS);
    let go = ElementGeometry::new(*outer);
    let gi = ElementGeometry::new(*inner);
    let mut active: Vec<usize> = so.iter().chain(si.iter()).copied().collect();
    active.sort_unstable();
    active.dedup();
    let na = active.len();
    let pos = |s: usize| active.iter().position(|&a| a == s).unwrap();
    let po: Vec<usize> = so.iter().map(|&s| pos(s)).collect();
    let pi: Vec<usize> = si.iter().map(|&s| pos(s)).collect();
    let first = if same { 2 } else { 0 };

    let mut acc = vec![0.0; na * na];
    let mut panels = Vec::new();
    for (lx, wx) in outer_rule(outer, grading, params) {
        let x = go.point(lx);
        let frame = RayFrame {
            l: if same { lx } else { gi.barycentric(x) },
            grad: gi.bary_grad,
            inside: same,
            lambda: params.lambda,
        };
        let phi_x = p2_values(lx);
        panels.clear();
        for (a, b) in angular_panels(x, inner, same, params.lambda) {
            refine_panel(&frame, a, b, 0, &mut panels);
        }
        for &(ta, tb) in &panels {
            let span = tb - ta;
            for (&u, &wu) in gl_x.iter().zip(&gl_w) {
                let theta = ta + u * span;
                let Some((r0, r1, s)) = frame.interval(theta) else {
                    continue;
                };
                let l = frame.l;
                let mut v = [[0.0f64; 12]; 3];
                for k in 0..3 {
                    let (lk, sk) = (l[k], s[k]);
                    v[0][pi[k]] -= lk * (2.0 * lk - 1.0);
                    v[1][pi[k]] -= sk * (4.0 * lk - 1.0);
                    v[2][pi[k]] -= 2.0 * sk * sk;
                }
                for (e, &[a, b]) in P2_EDGES.iter().enumerate() {
                    let (la, lb, sa, sb) = (l[a], l[b], s[a], s[b]);
                    v[0][pi[3 + e]] -= 4.0 * la * lb;
                    v[1][pi[3 + e]] -= 4.0 * (la * sb + lb * sa);
                    v[2][pi[3 + e]] -= 4.0 * sa * sb;
                }
                if same {
                    v[0] = [0.0; 12];
                } else {
                    for k in 0..6 {
                        v[0][po[k]] += phi_x[k];
                    }
                }
                let mom = radial_moments(r0, r1, params.alpha, first);
                let w = wx * wu * span;
                // U_p = Σ_q I_{p+q} V_q.
                let mut uq = [[0.0f64; 12]; 3];
                for p in 0..3 {
                    for q in 0..3 {
                        let i = mom[p + q];
                        if i == 0.0 {
                            continue;
                        }
                        for t in 0..na {
                            uq[p][t] += i * v[q][t];
                        }
                    }
                }
                for s_ in 0..na {
                    let (a0, a1, a2) = (w * v[0][s_], w * v[1][s_], w * v[2][s_]);
                    let row = &mut acc[s_ * na..(s_ + 1) * na];
                    for t in 0..na {
                        row[t] += a0 * uq[0][t] + a1 * uq[1][t] + a2 * uq[2][t];
                    }
                }
            }
        }
    }
    for (i, &si_) in active.iter().enumerate() {
        for (j, &sj) in active.iter().enumerate() {
            m[si_][sj] += acc[i * na + j];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(alpha: f64, lambda: f64) -> FractionalParams {
        FractionalParams::new(alpha, 1.0, lambda).unwrap()
    }

    fn lower(i: f64, j: f64, h: f64) -> [Point2; 3] {
        [
            Point2::new(i * h, j * h),
            Point2::new((i + 1.0) * h, j * h),
            Point2::new((i + 1.0) * h, (j + 1.0) * h),
        ]
    }

    fn upper(i: f64, j: f64, h: f64) -> [Point2; 3] {
        [
            Point2::new(i * h, j * h),
            Point2::new((i + 1.0) * h, (j + 1.0) * h),
            Point2::new(i * h, (j + 1.0) * h),
        ]
    }

    fn assert_rows_vanish(pm: &PairMatrix) {
        let max = pm
            .values
            .iter()
            .flatten()
            .fold(0.0f64, |m, v| m.max(v.abs()));
        for row in &pm.values {
            let s: f64 = row.iter().sum();
            assert!(s.abs() <= 1e-12 * max, "row sum {s} vs max {max}");
        }
    }

    #[test]
    fn constants_are_annihilated() {
        let p = params(0.5, 10.0);
        let a = lower(0.0, 0.0, 1.0);
        assert_rows_vanish(&pair_matrix(&a, &a, true, &p));
        assert_rows_vanish(&pair_matrix(&a, &upper(0.0, 0.0, 1.0), false, &p));
        assert_rows_vanish(&pair_matrix(&a, &upper(1.0, 1.0, 1.0), false, &p));
        assert_rows_vanish(&pair_matrix(&a, &lower(2.0, 0.0, 1.0), false, &p));
        assert_rows_vanish(&pair_matrix(&a, &lower(5.0, 3.0, 1.0), false, &p));
    }

    #[test]
    fn shared_nodes_fold_onto_first_triangle() {
        let (map, shared) = slots(&lower(0.0, 0.0, 1.0), &upper(0.0, 0.0, 1.0));
        // upper = (v00, v11, v01); lower = (v00, v10, v11).
        assert_eq!(shared, vec![(0, 0), (2, 1)]);
        assert_eq!(map[0], 0);
        assert_eq!(map[1], 2);
        assert_eq!(map[2], 8);
        // Edge (0,1) of upper is the diagonal, edge (2,0) of lower.
        assert_eq!(map[3], 5);
        assert_eq!(map[4], 10);
        assert_eq!(map[5], 11);
    }

    #[test]
    fn local_matrices_are_positive_semidefinite() {
        let p = params(0.75, 10.0);
        let a = lower(0.0, 0.0, 0.5);
        for other in [upper(0.0, 0.0, 0.5), upper(1.0, 0.0, 0.5), lower(3.0, 2.0, 0.5)] {
            let pm = pair_matrix(&a, &other, false, &p);
            // Gershgorin is too weak; check random quadratic forms instead.
            let mut seed = 7u64;
            for _ in 0..200 {
                let v: Vec<f64> = (0..12)
                    .map(|_| {
                        seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                        (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
                    })
                    .collect();
                let q: f64 = (0..12)
                    .flat_map(|i| (0..12).map(move |j| (i, j)))
                    .map(|(i, j)| v[i] * pm.values[i][j] * v[j])
                    .sum();
                assert!(q >= -1e-12, "{q}");
            }
        }
    }

    #[test]
    fn truncation_beyond_reach_gives_zero() {
        let p = params(0.5, 0.1);
        let pm = pair_matrix(&lower(0.0, 0.0, 1.0), &lower(5.0, 0.0, 1.0), false, &p);
        assert!(pm.values.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn moments_match_closed_form() {
        let m = radial_moments(0.3, 1.7, 0.25, 0);
        for (k, &v) in m.iter().enumerate() {
            let e = k as f64 - 0.5;
            let exact = (1.7f64.powf(e) - 0.3f64.powf(e)) / e;
            assert!((v - exact).abs() < 1e-14 * exact.abs().max(1.0));
        }
        let m = radial_moments(0.3, 1.7, 0.5, 0);
        assert!((m[1] - (1.7f64 / 0.3).ln()).abs() < 1e-14);
    }

    #[test]
    fn graded_leaf_counts() {
        let t = lower(0.0, 0.0, 1.0);
        let area = |leaves: &[[[f64; 3]; 3]]| -> f64 {
            leaves
                .iter()
                .map(|l| {
                    0.5 * ((l[1][1] - l[0][1]) * (l[2][2] - l[0][2])
                        - (l[2][1] - l[0][1]) * (l[1][2] - l[0][2]))
                        .abs()
                })
                .sum()
        };
        let all = graded_leaves(&t, &Grading::edges(&t), 2);
        assert_eq!(all.len(), 16);
        assert!((area(&all) - 0.5).abs() < 1e-15);
        let v = graded_leaves(&t, &Grading(vec![(t[1], t[1])]), 3);
        assert_eq!(v.len(), 10);
        assert!((area(&v) - 0.5).abs() < 1e-15);
    }
}
