use fraclap::mms::{error_norms, run_mms, DtMode, StudyParams, Variable};

#[test]
fn halving_the_pair_quadrature_degree_barely_moves_errors() {
    let errors = |degree| {
        let mut params = StudyParams::standard(DtMode::EqH);
        params.fractional.pair_quadrature_degree = degree;
        let (mesh, dofmap, state) = run_mms(8, 1.0 / 8.0, &params).unwrap();
        error_norms(&state, &mesh, &dofmap).unwrap()
    };
    let (lo, hi) = (errors(3), errors(6));
    for var in Variable::ALL {
        let (a, b) = (lo[var as usize], hi[var as usize]);
        for (x, y) in [(a.linf, b.linf), (a.l2, b.l2), (a.h1, b.h1)] {
            assert!((x - y).abs() < 0.1 * y, "{}: {x:e} vs {y:e}", var.name());
        }
    }
}
