use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use ptt_core::integrator::StepperConfig;
use ptt_core::lagrangian::Interpolation;
use ptt_core::ModelParams;
use serde::{Deserialize, Serialize};

use crate::error::RunnerError;

/// A single Fourier mode `amplitude * cos(k.x + phase)` added to one
/// component of `u` (0..3) or `sigma` (0..6, upper-triangular order).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeSpec {
    pub field: ModeField,
    pub component: usize,
    pub k: [i64; 3],
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeField {
    U,
    Sigma,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Scenario {
    /// `u0 = 0`, `sigma0 = 0`: the uniform special solution.
    SpecialSolution,
    /// Seeded random data rescaled so that `E(0) = delta0`.
    SmallData {
        #[serde(default = "default_delta0")]
        delta0: f64,
    },
    /// Isotropic stress whose trace dips to `min_trace` at `(pi, pi, pi)`,
    /// with a random solenoidal velocity of grid maximum `velocity_amplitude`.
    NegativeTraceBlowup {
        #[serde(default = "default_min_trace")]
        min_trace: f64,
        #[serde(default = "default_velocity_amplitude")]
        velocity_amplitude: f64,
    },
    /// Explicit mode list, optionally rescaled to `E(0) = delta0`.
    Custom {
        modes: Vec<ModeSpec>,
        #[serde(default)]
        delta0: Option<f64>,
    },
}

fn default_delta0() -> f64 {
    1e-3
}
fn default_min_trace() -> f64 {
    -1.0
}
fn default_velocity_amplitude() -> f64 {
    1e-2
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::SpecialSolution => "special_solution",
            Scenario::SmallData { .. } => "small_data",
            Scenario::NegativeTraceBlowup { .. } => "negative_trace_blowup",
            Scenario::Custom { .. } => "custom",
        }
    }

    pub fn expects_blowup(&self) -> bool {
        matches!(self, Scenario::NegativeTraceBlowup { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParticleConfig {
    /// Tracked starting points; the first is the reference characteristic.
    pub positions: Vec<[f64; 3]>,
    pub interpolation: Interpolation,
}

impl Default for ParticleConfig {
    fn default() -> Self {
        Self {
            positions: vec![[PI, PI, PI], [0.0, 0.0, 0.0], [PI / 2.0, PI, 3.0 * PI / 2.0]],
            interpolation: Interpolation::Trilinear,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n: usize,
    /// Lebesgue index of the high-frequency norms.
    pub p: f64,
    /// Low/high cutoff shell `N`.
    pub cutoff: i32,
    pub model: ModelParams,
    pub scenario: Scenario,
    pub stepper: StepperConfig,
    /// Use `suggest_dt` each step, with `stepper.dt` as the ceiling.
    pub adaptive: bool,
    pub t_end: f64,
    /// Ledger update and history row every this many steps.
    pub sample_every: usize,
    pub seed: u64,
    pub particles: ParticleConfig,
    pub out_dir: Option<PathBuf>,
    pub write_final_state: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n: 32,
            p: 2.0,
            cutoff: 2,
            model: ModelParams::paper(1.0),
            scenario: Scenario::SmallData { delta0: 1e-3 },
            stepper: StepperConfig {
                dt: 1e-2,
                ..StepperConfig::default()
            },
            adaptive: true,
            t_end: 1.0,
            sample_every: 1,
            seed: 0,
            particles: ParticleConfig::default(),
            out_dir: None,
            write_final_state: true,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, RunnerError> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| RunnerError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, RunnerError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| RunnerError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), RunnerError> {
        let bad = |m: String| Err(RunnerError::Config(m));
        if self.n < 8 || self.n % 2 != 0 {
            return bad(format!("n = {} must be even and at least 8", self.n));
        }
        if !(2.0..=4.0).contains(&self.p) {
            return bad(format!("p = {} must lie in [2, 4]", self.p));
        }
        self.model.validate().map_err(|e| RunnerError::Config(e.to_string()))?;
        self.model
            .check_perturbation_regime()
            .map_err(|e| RunnerError::Config(e.to_string()))?;
        self.stepper.validate().map_err(|e| RunnerError::Config(e.to_string()))?;
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad(format!("t_end = {} must be positive", self.t_end));
        }
        if self.sample_every == 0 {
            return bad("sample_every must be at least 1".into());
        }
        if self.particles.positions.iter().flatten().any(|x| !x.is_finite()) {
            return bad("particle positions must be finite".into());
        }
        match &self.scenario {
            Scenario::SpecialSolution => {}
            Scenario::SmallData { delta0 } => {
                if !(*delta0 > 0.0 && delta0.is_finite()) {
                    return bad(format!("small_data needs delta0 > 0, got {delta0}"));
                }
            }
            Scenario::NegativeTraceBlowup {
                min_trace,
                velocity_amplitude,
            } => {
                if !(*min_trace < 0.0) {
                    return bad(format!("negative_trace_blowup needs min_trace < 0, got {min_trace}"));
                }
                if !(*velocity_amplitude >= 0.0 && velocity_amplitude.is_finite()) {
                    return bad("velocity_amplitude must be finite and nonnegative".into());
                }
            }
            Scenario::Custom { modes, delta0 } => {
                for m in modes {
                    let limit = match m.field {
                        ModeField::U => 3,
                        ModeField::Sigma => 6,
                    };
                    if m.component >= limit {
                        return bad(format!("mode component {} out of range", m.component));
                    }
                    let half = (self.n / 2) as i64;
                    if m.k.iter().any(|&k| k.abs() >= half) {
                        return bad(format!("mode {:?} not representable without Nyquist at n = {}", m.k, self.n));
                    }
                }
                if let Some(d) = delta0 {
                    if !(*d > 0.0) {
                        return bad(format!("delta0 = {d} must be positive"));
                    }
                    if modes.is_empty() {
                        return bad("delta0 given but the mode list is empty".into());
                    }
                }
            }
        }
        Ok(())
    }
}
