//! Lagrange P1 and P2 bases and affine element geometry.
//!
//! Local P2 ordering: vertices 0, 1, 2, then the midpoints of edges
//! (0,1), (1,2), (2,0).

use crate::mesh::Point2;

/// Local vertex pairs of the three P2 edge nodes.
pub const P2_EDGES: [[usize; 2]; 3] = [[0, 1], [1, 2], [2, 0]];

// Gradients of the barycentric coordinates on the reference triangle.
const REF_BARY_GRAD: [[f64; 2]; 3] = [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisEval<const N: usize> {
    pub values: [f64; N],
    pub gradients: [[f64; 2]; N],
}

/// P2 values and reference-coordinate gradients at a barycentric point.
pub fn reference_basis_p2(l: [f64; 3]) -> BasisEval<6> {
    p2_with_bary_gradients(l, &REF_BARY_GRAD)
}

/// P1 values and reference-coordinate gradients at a barycentric point.
pub fn reference_basis_p1(l: [f64; 3]) -> BasisEval<3> {
    BasisEval {
        values: l,
        gradients: REF_BARY_GRAD,
    }
}

/// P2 basis given the gradients of the barycentric coordinates in whatever
/// frame the caller wants (reference or physical).
pub fn p2_with_bary_gradients(l: [f64; 3], g: &[[f64; 2]; 3]) -> BasisEval<6> {
    let mut values = [0.0; 6];
    let mut gradients = [[0.0; 2]; 6];
    for i in 0..3 {
        values[i] = l[i] * (2.0 * l[i] - 1.0);
        let s = 4.0 * l[i] - 1.0;
        gradients[i] = [s * g[i][0], s * g[i][1]];
    }
    for (e, &[a, b]) in P2_EDGES.iter().enumerate() {
        values[3 + e] = 4.0 * l[a] * l[b];
        gradients[3 + e] = [
            4.0 * (l[a] * g[b][0] + l[b] * g[a][0]),
            4.0 * (l[a] * g[b][1] + l[b] * g[a][1]),
        ];
    }
    BasisEval { values, gradients }
}

/// P2 values only.
pub fn p2_values(l: [f64; 3]) -> [f64; 6] {
    let mut v = [0.0; 6];
    for i in 0..3 {
        v[i] = l[i] * (2.0 * l[i] - 1.0);
    }
    for (e, &[a, b]) in P2_EDGES.iter().enumerate() {
        v[3 + e] = 4.0 * l[a] * l[b];
    }
    v
}

/// Affine map from the reference triangle onto a physical triangle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementGeometry {
    pub corners: [Point2; 3],
    /// Twice the signed area.
    pub det: f64,
    /// Physical gradients of the barycentric coordinates.
    pub bary_grad: [[f64; 2]; 3],
}

impl ElementGeometry {
    pub fn new(corners: [Point2; 3]) -> Self {
        let [a, b, c] = corners;
        let (j00, j01) = (b.x - a.x, c.x - a.x);
        let (j10, j11) = (b.y - a.y, c.y - a.y);
        let det = j00 * j11 - j01 * j10;
        // Rows of J^{-1}: gradients of l1 and l2.
        let g1 = [j11 / det, -j01 / det];
        let g2 = [-j10 / det, j00 / det];
        let g0 = [-g1[0] - g2[0], -g1[1] - g2[1]];
        Self {
            corners,
            det,
            bary_grad: [g0, g1, g2],
        }
    }

    pub fn area(&self) -> f64 {
        0.5 * self.det.abs()
    }

    pub fn point(&self, l: [f64; 3]) -> Point2 {
        let [a, b, c] = self.corners;
        Point2::new(
            l[0] * a.x + l[1] * b.x + l[2] * c.x,
            l[0] * a.y + l[1] * b.y + l[2] * c.y,
        )
    }

    /// Barycentric coordinates of an arbitrary point.
    pub fn barycentric(&self, p: Point2) -> [f64; 3] {
        let a = self.corners[0];
        let (dx, dy) = (p.x - a.x, p.y - a.y);
        let l1 = self.bary_grad[1][0] * dx + self.bary_grad[1][1] * dy;
        let l2 = self.bary_grad[2][0] * dx + self.bary_grad[2][1] * dy;
        [1.0 - l1 - l2, l1, l2]
    }

    /// P2 values and physical gradients.
    pub fn p2(&self, l: [f64; 3]) -> BasisEval<6> {
        p2_with_bary_gradients(l, &self.bary_grad)
    }

    /// P1 values and physical gradients.
    pub fn p1(&self, l: [f64; 3]) -> BasisEval<3> {
        BasisEval {
            values: l,
            gradients: self.bary_grad,
        }
    }
}
