//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit when
//! any criterion fails.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use ptt_core::integrator::{Scheme, StepperConfig};
use ptt_core::ModelParams;
use ptt_runner::config::{RunConfig, Scenario};
use ptt_runner::probes::{default_baseline_path, probe_checks, ProbeOptions};
use ptt_runner::run::{run, Check, RunOutcome};
use ptt_runner::verify::{convergence_study, lp_checks, model_checks, CheckResult};

type Outcome = Result<(bool, String), String>;

fn failed_checks(checks: &[CheckResult]) -> String {
    let bad: Vec<String> = checks.iter().filter(|c| !c.pass).map(|c| c.to_string()).collect();
    if bad.is_empty() {
        format!("{} checks", checks.len())
    } else {
        bad.join("; ")
    }
}

fn summarize(checks: &[Check]) -> String {
    checks
        .iter()
        .map(|c| format!("{}={:.3e} (limit {:.3e}, {})", c.name, c.value, c.limit, if c.pass { "ok" } else { "bad" }))
        .collect::<Vec<_>>()
        .join(", ")
}

fn special_solution() -> Outcome {
    let mut worst = 0.0f64;
    for c0 in [1.0, 3.0] {
        let cfg = RunConfig {
            n: 32,
            model: ModelParams::paper(c0),
            scenario: Scenario::SpecialSolution,
            t_end: 1.0,
            particles: Default::default(),
            ..RunConfig::default()
        };
        let out = run(&cfg).map_err(|e| e.to_string())?;
        if out.report.blowup.is_some() {
            return Ok((false, format!("c0 = {c0}: unexpected blow-up")));
        }
        worst = worst.max(out.max_perturbation);
    }
    Ok((worst <= 1e-10, format!("max_t |sigma|_inf + |u|_inf = {worst:.3e} for c0 in {{1, 3}}")))
}

fn riccati_blowup() -> Outcome {
    let cfg = RunConfig {
        n: 32,
        scenario: Scenario::NegativeTraceBlowup {
            min_trace: -1.0,
            velocity_amplitude: 1e-2,
        },
        stepper: StepperConfig {
            dt: 1e-3,
            scheme: Scheme::IfRk4,
            ..StepperConfig::default()
        },
        adaptive: true,
        t_end: 1.5,
        ..RunConfig::default()
    };
    let out = run(&cfg).map_err(|e| e.to_string())?;
    let y0 = out
        .particles
        .iter()
        .find(|r| r.id == 0)
        .map(|r| r.tr_sampled)
        .unwrap_or(f64::NAN);
    let start_ok = (y0 + 1.0).abs() <= 1e-12;
    let pass = start_ok && out.report.pass && out.report.blowup.is_some();
    Ok((pass, format!("tr tau0(x0) = {y0:.12}; {}", summarize(&out.report.checks))))
}

fn small_data_config(out_dir: Option<PathBuf>) -> RunConfig {
    RunConfig {
        n: 32,
        p: 2.0,
        model: ModelParams::paper(1.0),
        scenario: Scenario::SmallData { delta0: 1e-3 },
        stepper: StepperConfig {
            dt: 1e-2,
            ..StepperConfig::default()
        },
        t_end: 20.0,
        seed: 0,
        out_dir,
        write_final_state: false,
        ..RunConfig::default()
    }
}

fn small_data(first: &Result<RunOutcome, String>) -> Outcome {
    let out = first.as_ref().map_err(|e| e.clone())?;
    let names = ["no_blowup", "energy_bounded", "low_velocity_decays"];
    let present = names
        .iter()
        .all(|n| out.report.checks.iter().any(|c| c.name == *n));
    let pass = present && out.report.pass && (out.report.t_final - 20.0).abs() < 1e-9;
    Ok((
        pass,
        format!(
            "E(0) = {:.3e}, {} steps; {}",
            out.report.e0,
            out.report.steps,
            summarize(&out.report.checks)
        ),
    ))
}

fn integrator_order() -> Outcome {
    let study = convergence_study(Scheme::IfRk2, &[4e-3, 2e-3, 1e-3], 0.1, 1e-6).map_err(|e| e.to_string())?;
    let worst = study.ratios.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((
        worst >= 3.5,
        format!("errors {:?}, reduction factors {:?}", study.errors, study.ratios),
    ))
}

fn littlewood_paley() -> Outcome {
    let checks = lp_checks(0).map_err(|e| e.to_string())?;
    Ok((checks.iter().all(|c| c.pass), failed_checks(&checks)))
}

fn structural() -> Outcome {
    let checks = model_checks(0, 50).map_err(|e| e.to_string())?;
    Ok((checks.iter().all(|c| c.pass), failed_checks(&checks)))
}

fn probes() -> Outcome {
    let checks = probe_checks(&ProbeOptions::default(), Some(&default_baseline_path())).map_err(|e| e.to_string())?;
    let recorded = checks.iter().filter(|c| c.detail.contains("recorded")).count();
    let mut msg = failed_checks(&checks);
    if recorded > 0 {
        msg.push_str(&format!(", {recorded} baselines recorded on this run"));
    }
    Ok((checks.iter().all(|c| c.pass), msg))
}

fn determinism(first: &Result<RunOutcome, String>, dir: &Path) -> Outcome {
    let a_dir = match first {
        Ok(out) => out.out_dir.clone().ok_or("first run wrote no files")?,
        Err(_) => {
            let d = dir.join("a");
            run(&small_data_config(Some(d.clone()))).map_err(|e| e.to_string())?;
            d
        }
    };
    let b_dir = dir.join("b");
    run(&small_data_config(Some(b_dir.clone()))).map_err(|e| e.to_string())?;
    let a = std::fs::read(a_dir.join("history.csv")).map_err(|e| e.to_string())?;
    let b = std::fs::read(b_dir.join("history.csv")).map_err(|e| e.to_string())?;
    Ok((
        a == b && !a.is_empty(),
        format!("history.csv {} bytes vs {} bytes, identical = {}", a.len(), b.len(), a == b),
    ))
}

fn report(id: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let (pass, detail) = match f() {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    println!(
        "{} [{id}] {name}: {detail} ({:.1} s)",
        if pass { "PASS" } else { "FAIL" },
        start.elapsed().as_secs_f64()
    );
    pass
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().expect("temporary directory");
    let mut all = true;
    all &= report(1, "special solution exactness", special_solution);
    all &= report(2, "riccati blow-up law", riccati_blowup);

    let start = Instant::now();
    let first = run(&small_data_config(Some(tmp.path().join("a")))).map_err(|e| e.to_string());
    let first_secs = start.elapsed().as_secs_f64();
    all &= report(3, "small-data boundedness", || {
        small_data(&first).map(|(p, d)| (p, format!("{d}; run took {first_secs:.1} s")))
    });
    all &= report(4, "integrator order", integrator_order);
    all &= report(5, "littlewood-paley suite", littlewood_paley);
    all &= report(6, "structural identities", structural);
    all &= report(7, "bony decomposition and estimate probes", probes);
    all &= report(8, "determinism", || determinism(&first, tmp.path()));

    println!("acceptance: {}", if all { "all criteria passed" } else { "some criteria failed" });
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
