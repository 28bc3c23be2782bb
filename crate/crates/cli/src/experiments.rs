use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use dispersion_core::estimates::{
    reports_to_csv, verify_bernstein, verify_bilinear, verify_bilinear_witness, verify_equivalences, verify_free_group,
    verify_localized, verify_maximal, verify_smoothing, EstimateReport,
};
use dispersion_core::illposed::{frechet_check, growth_scan};
use dispersion_core::solver::picard_solve;
use dispersion_core::{DyadicDecomposition, NormReport, Summation, Trajectory};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Estimate, Job, RunConfig, VerifyJob};
use crate::error::{at_key, CliError};

/// Top-level experiments and the result each one exercises.
const TOP_LEVEL: [(&str, &str); 4] = [
    ("solve", "Theorem 1 local well-posedness by Picard iteration"),
    ("illposed", "Theorem 3/4 growth law"),
    ("norms", "Lemma 3 Sobolev and Besov norm tables"),
    ("frechet", "Theorem 3/4 Fréchet derivatives of the flow map"),
];

fn verify_result(e: Estimate) -> &'static str {
    match e {
        Estimate::Bernstein => "Lemma 2",
        Estimate::Smoothing => "Proposition 1",
        Estimate::Maximal => "Proposition 2",
        Estimate::FreeGroup => "Propositions 1-2",
        Estimate::Localized => "Propositions 3-5",
        Estimate::Bilinear => "Theorem 1 bilinear estimate",
        Estimate::BilinearWitness => "Theorem 3/4 bilinear counterexample",
        Estimate::Equivalence => "Lemmas 3 and 5",
    }
}

/// Every runnable experiment, in display order.
pub fn registry() -> Vec<(String, &'static str)> {
    let mut rows: Vec<(String, &'static str)> = TOP_LEVEL.iter().map(|(c, r)| (c.to_string(), *r)).collect();
    rows.extend(Estimate::ALL.iter().map(|&e| (format!("verify {}", e.name()), verify_result(e))));
    rows
}

/// One `experiment → result` line per registered experiment.
pub fn list_experiments() -> String {
    registry().iter().map(|(c, r)| format!("{c} → {r}\n")).collect()
}

/// What a finished run produced.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub experiment: String,
    pub pass: bool,
    pub files: Vec<PathBuf>,
}

struct Artifacts {
    experiment: String,
    pass: bool,
    csv: Vec<(&'static str, String)>,
    report: Value,
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize to JSON")
}

fn trajectory_csv(traj: &Trajectory<f64>, snapshots: usize) -> String {
    let mut out = String::from("t,x,re,im\n");
    let last = traj.len() - 1;
    let count = snapshots.min(traj.len());
    let mut picked: Vec<usize> = (0..count).map(|i| (i * last + (count - 1) / 2) / (count - 1).max(1)).collect();
    picked.dedup();
    let xs = traj.grid().coordinates();
    for n in picked {
        let t = traj.times().time(n);
        for (x, v) in xs.iter().zip(traj.fields()[n].to_physical()) {
            let _ = writeln!(out, "{t:.12e},{x:.12e},{:.12e},{:.12e}", v.re, v.im);
        }
    }
    out
}

fn estimate_artifacts(what: &str, reports: Vec<EstimateReport>) -> Artifacts {
    Artifacts {
        experiment: what.to_string(),
        pass: !reports.is_empty() && reports.iter().all(|r| r.pass),
        csv: vec![("estimates.csv", reports_to_csv(&reports))],
        report: to_value(&reports),
    }
}

fn run_verify(job: &VerifyJob) -> Result<Artifacts, CliError> {
    let key = "experiment";
    Ok(match job {
        VerifyJob::Bernstein { ensemble, order, levels, resolution } => {
            let what = "verify bernstein";
            estimate_artifacts(what, verify_bernstein(ensemble, *order, levels, resolution).map_err(at_key(key, what))?)
        }
        VerifyJob::FreeGroup { estimate, spec, ensemble, scan, lab } => {
            let what = format!("verify {}", estimate.name());
            let run = match estimate {
                Estimate::Smoothing => verify_smoothing,
                Estimate::Maximal => verify_maximal,
                _ => verify_free_group,
            };
            estimate_artifacts(&what, run(spec, ensemble, scan, lab).map_err(at_key("experiment.lab", &what))?)
        }
        VerifyJob::Localized { spec, ensemble, levels, group, lab } => {
            let what = "verify localized";
            let reports =
                verify_localized(spec, ensemble, levels, *group, lab).map_err(at_key("experiment.lab", what))?;
            estimate_artifacts(what, reports)
        }
        VerifyJob::Bilinear { spec, ensemble, lab } => {
            let what = "verify bilinear";
            estimate_artifacts(
                what,
                vec![verify_bilinear(spec, ensemble, lab).map_err(at_key("experiment.lab", what))?],
            )
        }
        VerifyJob::BilinearWitness { template, n_values } => {
            let what = "verify bilinear_witness";
            estimate_artifacts(what, vec![verify_bilinear_witness(template, n_values).map_err(at_key(key, what))?])
        }
        VerifyJob::Equivalence { ensemble, cfg } => {
            let what = "verify equivalence";
            estimate_artifacts(
                what,
                verify_equivalences(ensemble, cfg).map_err(at_key("experiment.equivalence", what))?,
            )
        }
    })
}

fn run_job(job: &Job) -> Result<Artifacts, CliError> {
    Ok(match job {
        Job::Solve { spec, u0, cfg, snapshots } => {
            let report = picard_solve(spec, u0, cfg).map_err(at_key("experiment", "solve"))?;
            Artifacts {
                experiment: "solve".into(),
                pass: report.converged && !report.diverged,
                csv: vec![
                    ("solve_history.csv", report.history_csv()),
                    ("trajectory.csv", trajectory_csv(&report.trajectory, *snapshots)),
                ],
                report: to_value(&report.summary()),
            }
        }
        Job::Illposed { template, n_values } => {
            let report = growth_scan(template, n_values).map_err(at_key("experiment", "illposed"))?;
            Artifacts {
                experiment: "illposed".into(),
                pass: report.pass,
                csv: vec![("growth.csv", report.to_csv())],
                report: to_value(&report),
            }
        }
        Job::Verify(v) => run_verify(v)?,
        Job::Norms { field, sobolev, besov, weighted_sobolev } => {
            let dec = DyadicDecomposition::new(field.grid());
            let mut reports: Vec<NormReport> = sobolev.iter().map(|&s| NormReport::sobolev(&dec, field, s)).collect();
            for b in besov {
                let q = Summation::from_q(b.q).map_err(at_key("experiment.besov.q", "norms"))?;
                reports.push(
                    NormReport::besov(&dec, field, b.s, q, b.weighted).map_err(at_key("experiment.besov", "norms"))?,
                );
            }
            reports.extend(weighted_sobolev.iter().map(|&k| NormReport::weighted_sobolev(&dec, field, k)));
            let mut csv = NormReport::csv_header(dec.l_max());
            csv.push('\n');
            for r in &reports {
                csv.push_str(&r.csv_row());
                csv.push('\n');
            }
            let weighted_ok = reports.iter().filter(|r| r.name.starts_with("weighted")).all(|r| r.weighted_valid());
            Artifacts {
                experiment: "norms".into(),
                pass: weighted_ok,
                csv: vec![("norms.csv", csv)],
                report: to_value(&reports),
            }
        }
        Job::Frechet { spec, phi, psi, cfg, deltas } => {
            let report = frechet_check(spec, phi, psi, cfg, deltas).map_err(at_key("experiment", "frechet"))?;
            Artifacts {
                experiment: "frechet".into(),
                pass: report.pass,
                csv: vec![("frechet.csv", report.to_csv())],
                report: to_value(&report),
            }
        }
    })
}

/// Resolves, runs and writes the artifacts of one configuration into `dir`.
pub fn execute(cfg: &RunConfig, dir: &Path, json: bool) -> Result<Outcome, CliError> {
    let job = cfg.resolve()?;
    let art = run_job(&job)?;
    let out_err = |source| CliError::Output { path: dir.to_path_buf(), source };
    std::fs::create_dir_all(dir).map_err(out_err)?;
    let mut files = Vec::new();
    for (name, body) in &art.csv {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(out_err)?;
        files.push(path);
    }
    if json {
        let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let summary = json!({
            "experiment": art.experiment,
            "seed": cfg.seed,
            "pass": art.pass,
            "generated_at_unix": stamp,
            "files": art.csv.iter().map(|(n, _)| *n).collect::<Vec<_>>(),
            "config": to_value(cfg),
            "report": art.report,
        });
        let path = dir.join("summary.json");
        let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
        std::fs::write(&path, text + "\n").map_err(out_err)?;
        files.push(path);
    }
    Ok(Outcome { experiment: art.experiment, pass: art.pass, files })
}
