use dispersion_core::ensemble::{Ensemble, Generator};
use dispersion_core::estimates::*;
use dispersion_core::evolution::{Coefficient, EquationSpec};
use dispersion_core::illposed::WitnessConfig;
use dispersion_core::norms::embedding_gap;

fn airy_family() -> EquationSpec {
    EquationSpec::derivative_of_square(1, 1, 1.0).unwrap()
}

fn by_name<'a>(reports: &'a [EstimateReport], name: &str) -> &'a EstimateReport {
    reports.iter().find(|r| r.estimate == name).unwrap()
}

#[test]
fn bernstein_slopes_vanish_on_blocks() {
    let e = Ensemble::new(Generator::DyadicBlock { l: 0, spread: 8.0 }, 6, 7);
    let reports = verify_bernstein(&e, 2, &[2, 3, 4, 5, 6, 7], &Resolution::default()).unwrap();
    assert_eq!(reports.len(), 3);
    for r in &reports {
        assert!(r.pass, "{}", r.estimate);
    }
    assert!(by_name(&reports, "bernstein").fitted_exponent.unwrap().abs() <= 0.1);
    assert!(by_name(&reports, "bernstein_weighted_sharp").fitted_exponent.unwrap().abs() <= 0.1);
}

#[test]
fn localized_exponents_hold() {
    let e = Ensemble::new(Generator::DyadicBlock { l: 0, spread: 8.0 }, 4, 7);
    let reports = verify_localized(&airy_family(), &e, &[0, 2, 3, 4, 5, 6], None, &LabConfig::new(0.1)).unwrap();
    assert_eq!(reports.len(), LOCALIZED_ESTIMATES.len());
    for r in &reports {
        assert!(r.pass, "{} fitted {:?}", r.estimate, r.fitted_exponent);
        assert!(r.rows.iter().all(|row| row.guard < 1.0));
    }
    let unitary = by_name(&reports, "block_unitarity");
    assert!(unitary.rows.iter().all(|r| (r.ratio - 1.0).abs() <= 1e-12));

    let only =
        verify_localized(&airy_family(), &e, &[2, 3], Some(LocalizedGroup::Maximal), &LabConfig::new(0.1)).unwrap();
    assert_eq!(only.len(), 3);
}

#[test]
fn smoothing_and_maximal_are_scale_stable() {
    let e = Ensemble::new(Generator::Gaussian { spread: 2.0 }, 4, 11);
    let scan = Scan::Dilation { factors: vec![1.0, 2.0, 4.0, 8.0] };
    let reports = verify_free_group(&airy_family(), &e, &scan, &LabConfig::new(0.1)).unwrap();
    assert_eq!(reports.len(), 6);
    for r in &reports {
        assert!(r.pass, "{} fitted {:?}", r.estimate, r.fitted_exponent);
    }
    let growth = by_name(&reports, "maximal_l1_horizon");
    assert!(growth.fitted_exponent.unwrap() <= 1.05);
}

#[test]
fn kato_gain_balances_the_carrier() {
    let e = Ensemble::new(Generator::WavePacket { n: 0.0, sigma: 2.0 }, 2, 3);
    let scan = Scan::Modulation { carriers: vec![8.0, 16.0, 32.0, 64.0] };
    let reports = verify_smoothing(&airy_family(), &e, &scan, &LabConfig::new(0.1)).unwrap();
    let r = by_name(&reports, "smoothing_homogeneous");
    assert!(r.fitted_exponent.unwrap() <= 0.05);
    // the line value of the homogeneous ratio for j = 1
    assert!(r.rows.iter().all(|row| (row.ratio - 3f64.sqrt().recip()).abs() < 1e-3));
}

#[test]
fn wraparound_breaks_the_smoothing_bound() {
    let e = Ensemble::new(Generator::WavePacket { n: 4.0, sigma: 1.0 }, 1, 3);
    let scan = Scan::Dilation { factors: vec![1.0, 2.0] };
    let mut cfg = LabConfig::new(1.0);
    cfg.horizon_scaling = HorizonScaling::Fixed;
    cfg.grid = Some(FixedGrid { half_period: 20.0, points: 512, time_steps: 2048 });
    let err = verify_smoothing(&airy_family(), &e, &scan, &cfg).unwrap_err();
    assert!(err.to_string().contains("anti-wraparound guard"));

    cfg.enforce_guard = false;
    let ratio = |cfg: &LabConfig| verify_smoothing(&airy_family(), &e, &scan, cfg).unwrap()[0].rows[0].ratio;
    let short = ratio(&cfg);
    cfg.horizon = 4.0;
    let long = ratio(&cfg);
    assert!(long > 1.5 * short);
    assert!(long > 1.5 / 3f64.sqrt());
}

#[test]
fn bilinear_bound_is_refinement_stable() {
    let spec = EquationSpec::generic(1, vec![Coefficient::real(0, 1, 1.0)]).unwrap();
    let e = Ensemble::new(Generator::Gaussian { spread: 2.0 }, 4, 5);
    let cfg = LabConfig::new(0.1);
    let coarse = verify_bilinear(&spec, &e, &cfg).unwrap();
    let fine = verify_bilinear(&spec, &e, &cfg.refined()).unwrap();
    assert!(coarse.pass && fine.pass);
    for (a, b) in coarse.rows.iter().zip(&fine.rows) {
        assert!((a.ratio / b.ratio - 1.0).abs() < 0.05);
    }
}

#[test]
fn witness_breaks_the_sobolev_bilinear_bound() {
    let template = WitnessConfig::generic(1, 2, 0.0, 16.0);
    let r = verify_bilinear_witness(&template, &[16.0, 32.0, 64.0, 128.0, 256.0]).unwrap();
    assert!(r.pass, "{:?}", r.fitted_exponent);
    assert!((r.fitted_exponent.unwrap() - 0.75).abs() <= 0.1);
}

#[test]
fn equivalence_brackets_and_embedding_constant() {
    assert!((embedding_gap::<f64>(1, 2.75).unwrap() - 1.0).abs() < 1e-12);
    let e = Ensemble::new(Generator::Gaussian { spread: 2.0 }, 8, 1);
    let reports = verify_equivalences(&e, &EquivalenceConfig::new(2.0, 2, 1, 2.75)).unwrap();
    assert_eq!(reports.len(), 4);
    for r in &reports {
        assert!(r.pass, "{} in [{}, {}]", r.estimate, r.min_ratio, r.max_ratio);
    }
}
