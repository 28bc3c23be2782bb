use dispersion_core::evolution::{Coefficient, EquationSpec};
use dispersion_core::solver::{picard_solve, reference_solve, SolveConfig};
use dispersion_core::spectral::{SpectralField, TorusGrid};

const KAPPA: f64 = 0.25;

fn soliton(x: f64, t: f64) -> f64 {
    let s = 1.0 / (KAPPA * (x - 4.0 * KAPPA * KAPPA * t)).cosh();
    2.0 * KAPPA * KAPPA * s * s
}

fn setup() -> (EquationSpec, TorusGrid<f64>, SpectralField<f64>, SpectralField<f64>) {
    let spec = EquationSpec::generic(1, vec![Coefficient::real(0, 1, -6.0)]).unwrap();
    let grid = TorusGrid::new(64.0, 256).unwrap();
    let u0 = SpectralField::from_real_fn(&grid, |x| soliton(x, 0.0)).unwrap();
    let exact = SpectralField::from_real_fn(&grid, |x| soliton(x, 1.0)).unwrap();
    (spec, grid, u0, exact)
}

#[test]
fn picard_tracks_soliton() {
    let (spec, _, u0, exact) = setup();
    let report = picard_solve(&spec, &u0, &SolveConfig::new(1.0, 0.01)).unwrap();
    assert!(report.converged, "{:?}", report.distances);
    let err = report.trajectory.last().sub(&exact).l2_norm() / exact.l2_norm();
    println!("picard iterations {} err {err:e} ratios {:?}", report.iterations, report.ratios);
    assert!(err < 1e-4, "relative error {err}");
    assert!(report.residual.unwrap() <= 1e-10);
}

#[test]
fn reference_tracks_soliton() {
    let (spec, _, u0, exact) = setup();
    let traj = reference_solve(&spec, &u0, 1.0, 1e-3).unwrap();
    let err = traj.last().sub(&exact).l2_norm() / exact.l2_norm();
    println!("reference err {err:e}");
    assert!(err < 1e-6, "relative error {err}");
}
