//! Time loop, output files and per-scenario checks.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use ptt_core::diagnostics::{EnergyLedger, HistoryRow};
use ptt_core::field::FieldComponents;
use ptt_core::integrator::{max_abs_trace, step_with_dt, suggest_dt, BlowUp, BlowUpKind};
use ptt_core::lagrangian::{blowup_time, riccati_exact, trace_along_trajectory, ParticleSet, BLOWUP_TRACE};
use ptt_core::lp::{lp_norm, shell_range};
use ptt_core::model::{special_trace, trace_field};
use ptt_core::{DyadicBank, Error, Grid, SimState};
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, Scenario};
use crate::error::RunnerError;
use crate::scenario::build_initial_data;

/// Steps below this are treated as a collapse of the time step.
pub const DT_FLOOR: f64 = 1e-10;

/// Times the loop lands on exactly, when inside `(0, t_end)`.
const CHECKPOINTS: [f64; 1] = [1.0];

pub const PARTICLES_HEADER: &str = "t,id,x,y,z,tr_sampled,tr_exact";

/// Pass/fail outcome of one scenario check.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub limit: f64,
    pub detail: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Completed,
    BlowUp,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub scenario: String,
    pub status: RunStatus,
    pub expected_blowup: bool,
    pub blowup: Option<BlowUp>,
    pub t_final: f64,
    pub steps: usize,
    pub e0: f64,
    pub final_row: HistoryRow,
    pub checks: Vec<Check>,
    pub pass: bool,
}

impl Report {
    /// Blow-up in a scenario that does not expect one.
    pub fn unexpected_blowup(&self) -> bool {
        self.status == RunStatus::BlowUp && !self.expected_blowup
    }
}

/// One particle sample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleRecord {
    pub t: f64,
    pub id: usize,
    pub position: [f64; 3],
    pub tr_sampled: f64,
    /// Riccati value from the initial trace; NaN past its blow-up time.
    pub tr_exact: f64,
}

impl ParticleRecord {
    pub fn to_csv(&self) -> String {
        format!(
            "{:.17e},{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
            self.t, self.id, self.position[0], self.position[1], self.position[2], self.tr_sampled, self.tr_exact
        )
    }
}

pub struct RunOutcome {
    pub report: Report,
    pub history: Vec<HistoryRow>,
    pub particles: Vec<ParticleRecord>,
    pub final_state: SimState,
    /// `max_t (|u|_inf + |sigma|_inf)` over the samples.
    pub max_perturbation: f64,
    pub out_dir: Option<PathBuf>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    crate_version: &'static str,
    created_unix_seconds: u64,
    scenario: &'a str,
    seed: u64,
    n: usize,
    box_length: f64,
    shell_range: (i32, i32),
    cutoff: i32,
    config: &'a RunConfig,
}

struct Sinks {
    dir: PathBuf,
    history: BufWriter<File>,
    particles: BufWriter<File>,
}

impl Sinks {
    fn open(dir: &Path, cfg: &RunConfig, grid: &Grid) -> Result<Self, RunnerError> {
        std::fs::create_dir_all(dir)?;
        let manifest = Manifest {
            crate_version: env!("CARGO_PKG_VERSION"),
            created_unix_seconds: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            scenario: cfg.scenario.name(),
            seed: cfg.seed,
            n: cfg.n,
            box_length: grid.length(),
            shell_range: shell_range(grid),
            cutoff: cfg.cutoff,
            config: cfg,
        };
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
        let mut history = BufWriter::new(File::create(dir.join("history.csv"))?);
        writeln!(history, "{}", HistoryRow::CSV_HEADER)?;
        let mut particles = BufWriter::new(File::create(dir.join("particles.csv"))?);
        writeln!(particles, "{PARTICLES_HEADER}")?;
        Ok(Self {
            dir: dir.to_path_buf(),
            history,
            particles,
        })
    }
}

/// Runs `cfg` to `t_end` or blow-up. Files go to `cfg.out_dir` when set;
/// rows are streamed so a failure leaves the samples written so far.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome, RunnerError> {
    cfg.validate()?;
    let grid = Grid::new(cfg.n)?;
    let bank = DyadicBank::new(&grid, cfg.cutoff)?;
    let mut state = build_initial_data(cfg, &grid, &bank)?;
    let params = cfg.model;
    let c0 = params.c0;
    let mut sinks = match &cfg.out_dir {
        Some(d) => Some(Sinks::open(d, cfg, &grid)?),
        None => None,
    };

    let mut ledger = EnergyLedger::new(&bank, cfg.p, &state)?;
    let trace_tau = |s: &SimState| {
        let mut tr = trace_field(&s.sigma);
        tr.coeffs_mut()[0].re += special_trace(c0, s.t);
        tr
    };
    let mut particles = ParticleSet::seeded(&trace_tau(&state), cfg.particles.positions.clone());
    let mut records = Vec::new();
    let mut max_perturbation = perturbation_size(&state);

    let emit_particles = |ps: &ParticleSet, s: &SimState, out: &mut Vec<ParticleRecord>| -> Vec<ParticleRecord> {
        let sampled = ps.sample_scalar(&trace_tau(s));
        let new: Vec<ParticleRecord> = (0..ps.len())
            .map(|i| ParticleRecord {
                t: s.t,
                id: i,
                position: ps.positions[i],
                tr_sampled: sampled[i],
                tr_exact: riccati_exact(ps.initial_trace[i], s.t).unwrap_or(f64::NAN),
            })
            .collect();
        out.extend_from_slice(&new);
        new
    };

    let first = emit_particles(&particles, &state, &mut records);
    if let Some(s) = sinks.as_mut() {
        writeln!(s.history, "{}", ledger.latest().to_csv())?;
        for r in &first {
            writeln!(s.particles, "{}", r.to_csv())?;
        }
    }

    let mut steps = 0usize;
    let mut blowup: Option<BlowUp> = None;
    let eps = 1e-12 * cfg.t_end.max(1.0);
    while state.t < cfg.t_end - eps {
        let mut dt = if cfg.adaptive {
            suggest_dt(&state, &cfg.stepper)
        } else {
            cfg.stepper.dt
        };
        if dt < DT_FLOOR {
            blowup = Some(BlowUp {
                kind: BlowUpKind::StepCollapse,
                t: state.t,
                dt,
                max_abs_trace: max_abs_trace(&state.sigma),
            });
            break;
        }
        let mut target = cfg.t_end;
        for &c in &CHECKPOINTS {
            if c > state.t + eps && c < target {
                target = c;
            }
        }
        // Land exactly on the target rather than leaving a sliver.
        if state.t + dt * (1.0 + 1e-6) >= target {
            dt = target - state.t;
        }
        let next = match step_with_dt(&state, &cfg.stepper, &params, dt) {
            Ok(next) => next,
            Err(Error::BlowUp(b)) => {
                blowup = Some(b);
                break;
            }
            Err(e) => return Err(e.into()),
        };
        if next.t == state.t {
            blowup = Some(BlowUp {
                kind: BlowUpKind::StepCollapse,
                t: state.t,
                dt,
                max_abs_trace: max_abs_trace(&state.sigma),
            });
            break;
        }
        particles.advect_between(&state.u, &next.u, dt, cfg.particles.interpolation);
        state = next;
        steps += 1;
        let fresh = emit_particles(&particles, &state, &mut records);
        let on_checkpoint = CHECKPOINTS.iter().any(|&c| (state.t - c).abs() <= eps);
        let done = state.t >= cfg.t_end - eps;
        if steps % cfg.sample_every == 0 || on_checkpoint || done {
            ledger.update(&state)?;
            max_perturbation = max_perturbation.max(perturbation_size(&state));
            if let Some(s) = sinks.as_mut() {
                writeln!(s.history, "{}", ledger.latest().to_csv())?;
            }
        }
        if let Some(s) = sinks.as_mut() {
            for r in &fresh {
                writeln!(s.particles, "{}", r.to_csv())?;
            }
        }
        let tr = lp_norm(&trace_tau(&state), f64::INFINITY);
        if !tr.is_finite() || tr > BLOWUP_TRACE {
            blowup = Some(BlowUp {
                kind: BlowUpKind::TraceThreshold,
                t: state.t,
                dt,
                max_abs_trace: tr,
            });
            break;
        }
    }

    let history = ledger.history().to_vec();
    let checks = scenario_checks(cfg, &history, &records, particles.len(), blowup.as_ref(), max_perturbation);
    let expected_blowup = cfg.scenario.expects_blowup();
    let status = if blowup.is_some() {
        RunStatus::BlowUp
    } else {
        RunStatus::Completed
    };
    let pass = checks.iter().all(|c| c.pass) && (blowup.is_none() || expected_blowup);
    let report = Report {
        scenario: cfg.scenario.name().to_string(),
        status,
        expected_blowup,
        blowup,
        t_final: state.t,
        steps,
        e0: ledger.e0(),
        final_row: *ledger.latest(),
        checks,
        pass,
    };

    let out_dir = if let Some(mut s) = sinks {
        s.history.flush()?;
        s.particles.flush()?;
        std::fs::write(s.dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
        if cfg.write_final_state {
            write_state(&s.dir.join("final_state.bin"), &state)?;
        }
        Some(s.dir)
    } else {
        None
    };

    Ok(RunOutcome {
        report,
        history,
        particles: records,
        final_state: state,
        max_perturbation,
        out_dir,
    })
}

fn perturbation_size(state: &SimState) -> f64 {
    lp_norm(&state.u, f64::INFINITY) + lp_norm(&state.sigma, f64::INFINITY)
}

fn check(name: &str, value: f64, limit: f64, pass: bool, detail: String) -> Check {
    Check {
        name: name.to_string(),
        pass,
        value,
        limit,
        detail,
    }
}

/// The row whose time is closest to `t`.
pub fn row_near(history: &[HistoryRow], t: f64) -> Option<&HistoryRow> {
    history
        .iter()
        .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
}

fn scenario_checks(
    cfg: &RunConfig,
    history: &[HistoryRow],
    records: &[ParticleRecord],
    n_particles: usize,
    blowup: Option<&BlowUp>,
    max_perturbation: f64,
) -> Vec<Check> {
    let mut out = Vec::new();
    match &cfg.scenario {
        Scenario::SpecialSolution => {
            out.push(check(
                "perturbation_stays_zero",
                max_perturbation,
                1e-10,
                max_perturbation <= 1e-10,
                "max over samples of |u|_inf + |sigma|_inf".into(),
            ));
        }
        Scenario::SmallData { .. } | Scenario::Custom { .. } => {
            out.push(check(
                "no_blowup",
                blowup.map_or(0.0, |b| b.t),
                0.0,
                blowup.is_none(),
                blowup.map_or("completed".into(), |b| b.to_string()),
            ));
            if let (Some(first), Some(last)) = (history.first(), history.last()) {
                // Reference sample: t = 1 when the run goes past it, else t = 0.
                let reference = if last.t > 1.0 { row_near(history, 1.0).unwrap_or(first) } else { first };
                out.push(check(
                    "energy_bounded",
                    last.e_total,
                    10.0 * reference.e_total,
                    last.e_total <= 10.0 * reference.e_total,
                    format!("E(t = {}) against 10 E(t = {})", last.t, reference.t),
                ));
                if last.t > 1.0 {
                    out.push(check(
                        "low_velocity_decays",
                        last.u_low_b12,
                        reference.u_low_b12,
                        last.u_low_b12 <= reference.u_low_b12,
                        format!("|u^l|_B^(1/2) at t = {} against t = {}", last.t, reference.t),
                    ));
                }
            }
        }
        Scenario::NegativeTraceBlowup { .. } => {
            if n_particles == 0 {
                out.push(check("riccati_agreement", f64::NAN, 1e-3, false, "no particles".into()));
                return out;
            }
            let mut times = Vec::new();
            let mut sampled = Vec::new();
            let mut y0 = f64::NAN;
            for r in records.iter().filter(|r| r.id == 0) {
                if times.is_empty() {
                    y0 = r.tr_sampled;
                }
                times.push(r.t);
                sampled.push(r.tr_sampled);
            }
            let t_star = blowup_time(y0);
            let series = trace_along_trajectory(&times, &sampled, y0, 0.9 * t_star);
            let covered = times.iter().any(|&t| t >= 0.9 * t_star - 1e-12);
            out.push(check(
                "riccati_agreement",
                series.max_rel_deviation,
                1e-3,
                covered && series.max_rel_deviation <= 1e-3,
                format!("first particle, y0 = {y0:.6}, compared up to t = {:.6}", 0.9 * t_star),
            ));
            let declared = blowup.map_or(f64::INFINITY, |b| b.t);
            out.push(check(
                "blowup_time",
                declared,
                t_star,
                declared >= 0.9 * t_star && declared <= 1.1 * t_star,
                format!("declared blow-up against [0.9, 1.1] x {t_star:.6}"),
            ));
        }
    }
    out
}

/// Raw dump: magic, `n` (u64), `t` (f64), then the 3 velocity and 6 stress
/// coefficient arrays as little-endian `(re, im)` pairs.
pub fn write_state(path: &Path, state: &SimState) -> Result<(), RunnerError> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(b"PTTSTATE")?;
    w.write_all(&(state.grid().n() as u64).to_le_bytes())?;
    w.write_all(&state.t.to_le_bytes())?;
    let comps = state.u.components().iter().chain(state.sigma.components());
    for c in comps {
        for z in c.coeffs() {
            w.write_all(&z.re.to_le_bytes())?;
            w.write_all(&z.im.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Inverse of [`write_state`].
pub fn read_state(path: &Path) -> Result<SimState, RunnerError> {
    let bytes = std::fs::read(path)?;
    let bad = || RunnerError::Config(format!("{} is not a state dump", path.display()));
    if bytes.len() < 24 || &bytes[..8] != b"PTTSTATE" {
        return Err(bad());
    }
    let word = |i: usize| -> [u8; 8] { bytes[i..i + 8].try_into().expect("eight bytes") };
    let n = u64::from_le_bytes(word(8)) as usize;
    let t = f64::from_le_bytes(word(16));
    let grid = Grid::new(n)?;
    let n3 = grid.size();
    if bytes.len() != 24 + 9 * n3 * 16 {
        return Err(bad());
    }
    let mut state = SimState::zeros(&grid);
    state.t = t;
    let mut off = 24;
    let mut fill = |c: &mut ptt_core::ScalarField| {
        for z in c.coeffs_mut() {
            z.re = f64::from_le_bytes(word(off));
            z.im = f64::from_le_bytes(word(off + 8));
            off += 16;
        }
    };
    state.u.components_mut().iter_mut().for_each(&mut fill);
    state.sigma.components_mut().iter_mut().for_each(&mut fill);
    Ok(state)
}
