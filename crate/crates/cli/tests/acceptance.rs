//! Acceptance checks 1 to 9, one line each. Runs without the libtest
//! harness so the lines always reach stdout.

use std::f64::consts::PI;
use std::path::Path;
use std::process::ExitCode;
use std::time::Instant;

use dispersion_cli::{execute, RunConfig};
use dispersion_core::ensemble::{Ensemble, Generator};
use dispersion_core::estimates::*;
use dispersion_core::evolution::{Coefficient, EquationSpec};
use dispersion_core::illposed::{
    default_n_values, frechet_check, grid_oracle_norm, growth_scan, q_poly, witness_norm, WitnessConfig,
};
use dispersion_core::norms::{besov_norm, embedding_gap, Summation};
use dispersion_core::solver::{picard_solve, reference_solve, SolveConfig};
use dispersion_core::{DyadicDecomposition, SpectralField, TorusGrid};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

type Outcome = Result<(bool, String), String>;
type Criterion = (&'static str, fn() -> Outcome);

fn fail(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn airy() -> EquationSpec {
    EquationSpec::derivative_of_square(1, 1, 1.0).unwrap()
}

fn by_name<'a>(reports: &'a [EstimateReport], name: &str) -> &'a EstimateReport {
    reports.iter().find(|r| r.estimate == name).expect("report present")
}

fn growth_law_generic() -> Outcome {
    let r = growth_scan(&WitnessConfig::generic(1, 2, 0.0, 16.0), &default_n_values()).map_err(fail)?;
    Ok(((r.slope - 0.75).abs() <= 0.1, format!("slope {:.4} over N = 2^4..2^10, target 0.75 ± 0.1", r.slope)))
}

fn growth_law_nonlocal() -> Outcome {
    let hobo = EquationSpec::HoBo { a: 1.0, b: 1.0, c: 1.0, d: 1.0, eps: 0.5 };
    let hoilw = EquationSpec::HoIlw { a1: 1.0, a2: 1.0, b: 1.0, c: 1.0, d: 1.0, h: 1.0, eps: 0.5 };
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, eq) in [("ho_bo", hobo), ("ho_ilw", hoilw)] {
        let r = growth_scan(&WitnessConfig::nonlocal(eq, 0.0, 16.0), &default_n_values()).map_err(fail)?;
        ok &= (r.slope - 0.75).abs() <= 0.1;
        parts.push(format!("{name} slope {:.4}", r.slope));
    }
    Ok((ok, format!("{}, target 0.75 ± 0.1", parts.join(", "))))
}

fn resonance_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for j in 1..=4u32 {
        let n = 2 * j as i32 + 1;
        for _ in 0..10_000 {
            let xi: f64 = rng.random_range(-4.0..4.0);
            let xi1: f64 = rng.random_range(-4.0..4.0);
            let lhs = xi1.powi(n) + (xi - xi1).powi(n) - xi.powi(n);
            let rhs = (xi - xi1) * q_poly(j, xi, xi1);
            let scale = xi.abs().max(xi1.abs()).max(1e-3).powi(n);
            worst = worst.max((lhs - rhs).abs() / scale);
        }
    }
    let (q2, q4) = (q_poly(1, 2.0, 1.0), q_poly(2, 2.0, 1.0));
    let ok = worst <= 1e-12 && q2 == -6.0 && q4 == -30.0;
    Ok((ok, format!("worst relative defect {worst:.2e} on 4x10^4 pairs, Q2(2,1) = {q2}, Q4(2,1) = {q4}")))
}

fn witness_oracle() -> Outcome {
    let cfg = WitnessConfig::generic(1, 2, 0.0, 8.0);
    let w = witness_norm(&cfg).map_err(fail)?;
    let g = grid_oracle_norm(&cfg, 32, 32).map_err(fail)?;
    let rel = (w - g).abs() / g;
    Ok((rel <= 0.05, format!("quadrature {w:.6} vs grid iterate {g:.6}, relative gap {rel:.4}")))
}

fn picard_solver() -> Outcome {
    let kdv = EquationSpec::generic(1, vec![Coefficient::real(0, 1, -6.0)]).map_err(fail)?;
    let g = TorusGrid::<f64>::new(40.0, 256).map_err(fail)?;
    let small = SpectralField::from_real_fn(&g, |x| 0.01 * (-x * x).exp()).map_err(fail)?;
    let r = picard_solve(&kdv, &small, &SolveConfig::new(0.5, 0.01)).map_err(fail)?;
    let max_ratio = r.ratios.iter().cloned().fold(0.0, f64::max);
    let residual = r.residual.unwrap_or(f64::INFINITY);
    let contraction = r.converged && r.ratios.iter().all(|q| *q < 1.0) && residual <= 1e-10;

    const KAPPA: f64 = 0.25;
    let soliton = |x: f64, t: f64| {
        let s = 1.0 / (KAPPA * (x - 4.0 * KAPPA * KAPPA * t)).cosh();
        2.0 * KAPPA * KAPPA * s * s
    };
    let g = TorusGrid::new(64.0, 256).map_err(fail)?;
    let u0 = SpectralField::from_real_fn(&g, |x| soliton(x, 0.0)).map_err(fail)?;
    let exact = SpectralField::from_real_fn(&g, |x| soliton(x, 1.0)).map_err(fail)?;
    let p = picard_solve(&kdv, &u0, &SolveConfig::new(1.0, 0.01)).map_err(fail)?;
    let picard_err = p.trajectory.last().sub(&exact).l2_norm() / exact.l2_norm();
    let traj = reference_solve(&kdv, &u0, 1.0, 1e-3).map_err(fail)?;
    let ref_err = traj.last().sub(&exact).l2_norm() / exact.l2_norm();
    let ok = contraction && p.converged && picard_err < 1e-4 && ref_err < 1e-6;
    Ok((
        ok,
        format!(
            "max contraction ratio {max_ratio:.3}, residual {residual:.1e}, soliton error picard {picard_err:.1e} reference {ref_err:.1e}"
        ),
    ))
}

fn frechet_identities() -> Outcome {
    let spec = EquationSpec::derivative_of_square(1, 2, 1.0).map_err(fail)?;
    let grid = TorusGrid::<f64>::new(25.0, 256).map_err(fail)?;
    let phi = SpectralField::from_real_fn(&grid, |x| (-x * x).exp()).map_err(fail)?;
    let psi = SpectralField::from_real_fn(&grid, |x| 0.5 * (-(x - 1.0).powi(2) / 2.0).exp()).map_err(fail)?;
    let r = frechet_check(&spec, &phi, &psi, &SolveConfig::new(0.5, 0.01), &[1e-2, 1e-3]).map_err(fail)?;
    let second = |i: usize| r.rows[i].second_error.unwrap_or(f64::NAN);
    let first = |i: usize| r.rows[i].first_error.unwrap_or(f64::NAN);
    let ratio = second(0) / second(1);
    let ok = r.pass && (7.0..14.0).contains(&ratio) && first(1) < first(0);
    Ok((
        ok,
        format!(
            "second-difference error ratio {ratio:.2} between δ = 1e-2 and 1e-3, first-difference errors {:.1e} -> {:.1e}",
            first(0),
            first(1)
        ),
    ))
}

fn linear_estimates() -> Outcome {
    let mut notes = Vec::new();
    let mut ok = true;
    let res = Resolution::default();

    let pure = Ensemble::new(Generator::PureMode { l: 0 }, 1, 1);
    let pure_reports = verify_bernstein(&pure, 2, &[1, 2, 3, 4, 5, 6], &res).map_err(fail)?;
    let pure_dev = pure_reports[0].rows.iter().map(|r| (r.ratio - 1.0).abs()).fold(0.0, f64::max);
    ok &= pure_dev <= 1e-12;
    notes.push(format!("pure-mode Bernstein |ratio-1| {pure_dev:.1e}"));

    let blocks = Ensemble::new(Generator::DyadicBlock { l: 0, spread: 8.0 }, 6, 7);
    let block_reports = verify_bernstein(&blocks, 2, &[2, 3, 4, 5, 6, 7], &res).map_err(fail)?;
    let slope = by_name(&block_reports, "bernstein").fitted_exponent.unwrap_or(f64::NAN);
    ok &= slope.abs() <= 0.1;
    notes.push(format!("block slope {slope:.1e}"));

    let lab = LabConfig::new(0.1);
    let blocks = Ensemble::new(Generator::DyadicBlock { l: 0, spread: 8.0 }, 4, 7);
    let localized = verify_localized(&airy(), &blocks, &[0, 2, 3, 4, 5, 6], None, &lab).map_err(fail)?;
    let unit_dev =
        by_name(&localized, "block_unitarity").rows.iter().map(|r| (r.ratio - 1.0).abs()).fold(0.0, f64::max);
    ok &= unit_dev <= 1e-12;
    notes.push(format!("block energy equality {unit_dev:.1e}"));
    let mut margin = f64::INFINITY;
    for r in &localized {
        let excess = r.predicted_exponent.unwrap_or(0.0) + 0.1 - r.fitted_exponent.unwrap_or(f64::INFINITY);
        margin = margin.min(excess);
        ok &= r.pass && excess >= 0.0;
    }
    notes.push(format!("{} localized fits, smallest margin {margin:.3}", localized.len()));

    let gaussians = Ensemble::new(Generator::Gaussian { spread: 2.0 }, 4, 11);
    let scan = Scan::Dilation { factors: vec![1.0, 2.0, 4.0, 8.0] };
    let free = verify_free_group(&airy(), &gaussians, &scan, &lab).map_err(fail)?;
    let mut worst = f64::NEG_INFINITY;
    for name in ["smoothing_homogeneous", "smoothing_energy", "smoothing_retarded", "maximal_l4", "maximal_l1"] {
        let r = by_name(&free, name);
        let s = r.fitted_exponent.unwrap_or(f64::INFINITY);
        worst = worst.max(s);
        ok &= r.pass && s <= 0.05 && r.rows.iter().all(|row| row.guard < 1.0);
    }
    let horizon = by_name(&free, "maximal_l1_horizon").fitted_exponent.unwrap_or(f64::INFINITY);
    ok &= horizon <= 1.05;
    notes.push(format!("largest dilation slope {worst:.3}, horizon exponent {horizon:.3}"));

    let packets = Ensemble::new(Generator::WavePacket { n: 0.0, sigma: 2.0 }, 2, 3);
    let carriers = Scan::Modulation { carriers: vec![8.0, 16.0, 32.0, 64.0] };
    let kato = verify_smoothing(&airy(), &packets, &carriers, &lab).map_err(fail)?;
    let hom = by_name(&kato, "smoothing_homogeneous");
    let kato_slope = hom.fitted_exponent.unwrap_or(f64::INFINITY);
    ok &= kato_slope <= 0.05;
    notes.push(format!("modulation slope {kato_slope:.1e}"));
    Ok((ok, notes.join(", ")))
}

fn norm_machinery() -> Outcome {
    let mut ok = true;
    let mut notes = Vec::new();

    let g = TorusGrid::new(50.0, 1024).map_err(fail)?;
    let dec = DyadicDecomposition::new(&g);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let coeffs =
        (0..g.num_points()).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let f = SpectralField::from_coeffs(&g, coeffs).map_err(fail)?;
    let rec = dec.reconstruct(&f).map_err(fail)?.sub(&f).l2_norm() / f.l2_norm();
    ok &= rec < 1e-12;
    notes.push(format!("reconstruction {rec:.1e}"));

    let ens = Ensemble::new(Generator::Gaussian { spread: 2.0 }, 8, 1);
    let eq = verify_equivalences(&ens, &EquivalenceConfig::new(2.0, 2, 1, 2.75)).map_err(fail)?;
    for r in &eq {
        ok &= r.pass;
        notes.push(format!("{} in [{:.3}, {:.3}]", r.estimate, r.min_ratio, r.max_ratio));
    }
    let constant = 1.0 + embedding_gap::<f64>(1, 2.75).map_err(fail)?;
    ok &= (constant - 2.0).abs() < 1e-12;
    notes.push(format!("embedding constant {constant}"));

    let g = TorusGrid::new(PI, 64).map_err(fail)?;
    let dec = DyadicDecomposition::new(&g);
    let mode = SpectralField::pure_mode(&g, 8, Complex64::new(1.0, 0.0)).map_err(fail)?;
    let b = besov_norm(&dec, &mode, 0.25, Summation::L1).map_err(fail)?;
    let exact = 2f64.powf(0.75) * (2.0 * PI).sqrt();
    let rel = (b - exact).abs() / exact;
    ok &= rel <= 1e-13;
    notes.push(format!("pure-mode Besov rel. error {rel:.1e}"));
    Ok((ok, notes.join(", ")))
}

const DETERMINISM_CONFIGS: [&str; 2] = [
    r#"
        seed = 9
        [equation]
        variant = "derivative_of_square"
        j = 1
        k = 1
        [experiment]
        kind = "verify"
        estimate = "free_group"
        scan = { kind = "dilation", factors = [1.0, 2.0, 4.0] }
        [experiment.ensemble]
        count = 3
        generator = { kind = "band_limited", band = 4.0 }
        [experiment.lab]
        horizon = 0.1
    "#,
    r#"
        seed = 9
        [equation]
        variant = "derivative_of_square"
        j = 1
        k = 2
        [grid]
        half_period = 25.0
        points = 256
        [time]
        horizon = 0.5
        dt = 0.01
        [data]
        kind = "gaussian"
        amplitude = 0.1
        [experiment]
        kind = "solve"
    "#,
];

fn csv_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

/// Largest relative change of paired ratios and largest change of fitted slopes.
fn drift(coarse: &[EstimateReport], fine: &[EstimateReport]) -> (f64, f64) {
    let mut ratio = 0.0f64;
    let mut slope = 0.0f64;
    for (a, b) in coarse.iter().zip(fine) {
        for (x, y) in a.rows.iter().zip(&b.rows) {
            ratio = ratio.max((x.ratio / y.ratio - 1.0).abs());
        }
        if let (Some(x), Some(y)) = (a.fitted_exponent, b.fitted_exponent) {
            slope = slope.max((x - y).abs());
        }
    }
    (ratio, slope)
}

fn determinism_and_refinement() -> Outcome {
    let mut identical = true;
    for text in DETERMINISM_CONFIGS {
        let cfg = RunConfig::parse(text, Path::new("acceptance.toml")).map_err(fail)?;
        let (a, b) = (TempDir::new().map_err(fail)?, TempDir::new().map_err(fail)?);
        execute(&cfg, a.path(), true).map_err(fail)?;
        execute(&cfg, b.path(), false).map_err(fail)?;
        let (x, y) = (csv_bytes(a.path()), csv_bytes(b.path()));
        identical &= !x.is_empty() && x == y;
    }

    let lab = LabConfig::new(0.1);
    let fine_lab = lab.refined();
    let mut ratio = 0.0f64;
    let mut slope = 0.0f64;
    let mut add = |(r, s): (f64, f64)| {
        ratio = ratio.max(r);
        slope = slope.max(s);
    };

    let blocks = Ensemble::new(Generator::DyadicBlock { l: 0, spread: 8.0 }, 4, 7);
    let levels = [0, 2, 3, 4, 5, 6];
    add(drift(
        &verify_localized(&airy(), &blocks, &levels, None, &lab).map_err(fail)?,
        &verify_localized(&airy(), &blocks, &levels, None, &fine_lab).map_err(fail)?,
    ));
    let gaussians = Ensemble::new(Generator::Gaussian { spread: 2.0 }, 4, 11);
    let scan = Scan::Dilation { factors: vec![1.0, 2.0, 4.0, 8.0] };
    add(drift(
        &verify_free_group(&airy(), &gaussians, &scan, &lab).map_err(fail)?,
        &verify_free_group(&airy(), &gaussians, &scan, &fine_lab).map_err(fail)?,
    ));
    let res = Resolution::default();
    let bern = Ensemble::new(Generator::DyadicBlock { l: 0, spread: 8.0 }, 6, 7);
    let bl = [2, 3, 4, 5, 6];
    add(drift(
        &verify_bernstein(&bern, 2, &bl, &res).map_err(fail)?,
        &verify_bernstein(&bern, 2, &bl, &res.refined()).map_err(fail)?,
    ));
    let spec = EquationSpec::generic(1, vec![Coefficient::real(0, 1, 1.0)]).map_err(fail)?;
    let pair = Ensemble::new(Generator::Gaussian { spread: 2.0 }, 4, 5);
    add(drift(
        &[verify_bilinear(&spec, &pair, &lab).map_err(fail)?],
        &[verify_bilinear(&spec, &pair, &fine_lab).map_err(fail)?],
    ));
    let eq = EquivalenceConfig::new(2.0, 2, 1, 2.75);
    let eq_fine = EquivalenceConfig { resolution: eq.resolution.refined(), ..eq };
    let ens = Ensemble::new(Generator::Gaussian { spread: 2.0 }, 8, 1);
    add(drift(&verify_equivalences(&ens, &eq).map_err(fail)?, &verify_equivalences(&ens, &eq_fine).map_err(fail)?));

    let template = WitnessConfig::generic(1, 2, 0.0, 16.0);
    let refined = WitnessConfig {
        outer_nodes: 2 * template.outer_nodes,
        inner_nodes: 2 * template.inner_nodes,
        ..template.clone()
    };
    let (a, b) = (
        growth_scan(&template, &default_n_values()).map_err(fail)?,
        growth_scan(&refined, &default_n_values()).map_err(fail)?,
    );
    for (x, y) in a.rows.iter().zip(&b.rows) {
        ratio = ratio.max((x.norm / y.norm - 1.0).abs());
    }
    slope = slope.max((a.slope - b.slope).abs());

    let ok = identical && ratio < 0.05 && slope < 0.02;
    Ok((
        ok,
        format!("byte-identical CSVs: {identical}, largest ratio change {ratio:.2e}, largest slope change {slope:.2e}"),
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("generic growth law", growth_law_generic),
        ("nonlocal growth law", growth_law_nonlocal),
        ("resonance factorization", resonance_identity),
        ("witness vs grid iterate", witness_oracle),
        ("Picard solver", picard_solver),
        ("Fréchet identities", frechet_identities),
        ("linear estimate suite", linear_estimates),
        ("norm machinery", norm_machinery),
        ("determinism and refinement", determinism_and_refinement),
    ];
    let mut failures = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (pass, detail) = check().unwrap_or_else(|e| (false, format!("error: {e}")));
        if !pass {
            failures += 1;
        }
        let secs = start.elapsed().as_secs_f64();
        println!("criterion {} {}: {name}: {detail} ({secs:.1} s)", i + 1, if pass { "PASS" } else { "FAIL" });
    }
    println!("acceptance: {} of {} criteria pass", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
