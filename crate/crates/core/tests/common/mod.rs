#![allow(dead_code)]

pub mod oracle;

use fraclap::fem::{build_dof_map, DofMap};
use fraclap::mesh::{Mesh, Point2, Region, Triangle};
use fraclap::nonlocal::{assemble_fractional_rows, FractionalParams, RowSet};

use oracle::{oracle_matrices, OracleMesh};

/// Kernel constants C_{2,α} for α = 0.25, 0.5, 0.75 from a high-precision
/// evaluation of the gamma-function formula.
pub const ORACLE_ALPHAS: [f64; 3] = [0.25, 0.5, 0.75];
#[allow(clippy::approx_constant, clippy::excessive_precision)]
pub const ORACLE_CONSTANTS: [f64; 3] = [
    0.162_778_212_341_515_444_33,
    0.318_309_886_183_790_671_54,
    0.330_103_588_499_749_130_69,
];

/// Irregular four-triangle mesh of a quadrilateral with an interior vertex.
pub fn irregular_mesh() -> Mesh {
    let v = vec![
        Point2::new(0.0, 0.0),
        Point2::new(1.0, 0.1),
        Point2::new(0.9, 1.0),
        Point2::new(0.15, 0.8),
        Point2::new(0.45, 0.4),
    ];
    let t = vec![
        Triangle { v: [0, 1, 4] },
        Triangle { v: [1, 2, 4] },
        Triangle { v: [2, 3, 4] },
        Triangle { v: [3, 0, 4] },
    ];
    Mesh::new(v, t, vec![Region::Omega; 4]).unwrap()
}

pub struct OracleComparison {
    pub alpha: f64,
    /// max |A − O| / max |O|.
    pub max_rel_to_max: f64,
    /// max |A − O| / |O| over entries with |O| ≥ 1e-2 max |O|.
    pub max_rel_entry: f64,
    pub symmetry_defect: f64,
    pub constant_residual: f64,
}

/// Compare the assembled operator on `mesh` (treated as the whole domain)
/// with the oracle for the three reference α values.
pub fn compare_with_oracle(mesh: &Mesh, params_for: impl Fn(f64) -> FractionalParams) -> Vec<OracleComparison> {
    let dm: DofMap = build_dof_map(mesh).unwrap();
    let om = OracleMesh {
        vertices: mesh.vertices().iter().map(|p| [p.x, p.y]).collect(),
        triangles: mesh.triangles().iter().map(|t| t.v).collect(),
    };
    let (onodes, mats) = oracle_matrices(&om, &ORACLE_ALPHAS, &ORACLE_CONSTANTS);
    let n = dm.n_nodes();
    assert_eq!(onodes.coords.len(), n);
    // Match oracle nodes to library nodes by coordinates.
    let map: Vec<usize> = onodes
        .coords
        .iter()
        .map(|c| {
            dm.nodes()
                .iter()
                .position(|p| (p.x - c[0]).abs() < 1e-12 && (p.y - c[1]).abs() < 1e-12)
                .expect("oracle node present in dof map")
        })
        .collect();
    ORACLE_ALPHAS
        .iter()
        .zip(&mats)
        .map(|(&alpha, o)| {
            let a = assemble_fractional_rows(mesh, &dm, &params_for(alpha), RowSet::All).unwrap();
            let omax = o.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            let mut worst = 0.0f64;
            let mut worst_entry = 0.0f64;
            for i in 0..n {
                for j in 0..n {
                    let ov = o[i * n + j];
                    let av = a.get(map[i], map[j]).unwrap();
                    let d = (av - ov).abs();
                    worst = worst.max(d);
                    if ov.abs() >= 1e-2 * omax {
                        worst_entry = worst_entry.max(d / ov.abs());
                    }
                }
            }
            let ones = vec![1.0; n];
            let residual = fraclap::nonlocal::apply_fractional(&a, &ones)
                .unwrap()
                .iter()
                .fold(0.0f64, |m, v| m.max(v.abs()));
            OracleComparison {
                alpha,
                max_rel_to_max: worst / omax,
                max_rel_entry: worst_entry,
                symmetry_defect: a.symmetry_defect(),
                constant_residual: residual,
            }
        })
        .collect()
}
