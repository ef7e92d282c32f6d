//! JSON run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use neural_pulse::kernels::{
    load_table_csv, make_damped_oscillatory_kernel, make_exponential_kernel, make_table_kernel, KernelSpec,
};
use neural_pulse::pulse::PulseOptions;
use neural_pulse::simulator::{BumpSpec, GridConfig};
use neural_pulse::verification::{VerifyOptions, DEFAULT_DELTA, DEFAULT_HAUSDORFF_BOUND, DEFAULT_RESOLUTION};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelConfig {
    Exponential {
        rho: f64,
    },
    DampedOscillatory {
        a: f64,
    },
    /// CSV with columns `x,K`; a relative path is resolved against the
    /// config file's directory.
    Table {
        path: PathBuf,
        tail_alpha: f64,
        tail_rho: f64,
    },
}

impl KernelConfig {
    pub fn build(&self, base_dir: &Path) -> neural_pulse::Result<KernelSpec> {
        match self {
            KernelConfig::Exponential { rho } => make_exponential_kernel(*rho),
            KernelConfig::DampedOscillatory { a } => make_damped_oscillatory_kernel(*a),
            KernelConfig::Table {
                path,
                tail_alpha,
                tail_rho,
            } => {
                let full = if path.is_absolute() { path.clone() } else { base_dir.join(path) };
                make_table_kernel(&load_table_csv(&full)?, *tail_alpha, *tail_rho)
            }
        }
    }
}

/// A single `ε` or a list of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Epsilons {
    One(f64),
    Many(Vec<f64>),
}

impl Epsilons {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Epsilons::One(e) => vec![*e],
            Epsilons::Many(v) => v.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub epsilon_max: f64,
    pub condition_max: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let d = PulseOptions::default();
        Self {
            tol: d.tol,
            max_iter: d.max_iter,
            epsilon_max: d.epsilon_max,
            condition_max: d.condition_max,
        }
    }
}

impl SolverConfig {
    pub fn options(&self) -> PulseOptions {
        PulseOptions {
            tol: self.tol,
            target: self.tol.min(PulseOptions::default().target),
            max_iter: self.max_iter,
            epsilon_max: self.epsilon_max,
            condition_max: self.condition_max,
            ..PulseOptions::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerificationConfig {
    /// Overrides the automatic choice of `z0`.
    pub z0: Option<f64>,
    pub resolution: f64,
    pub hausdorff_bound: f64,
    pub delta: f64,
}

impl Default for VerificationConfig {
    fn default() -> Self {
        Self {
            z0: None,
            resolution: DEFAULT_RESOLUTION,
            hausdorff_bound: DEFAULT_HAUSDORFF_BOUND,
            delta: DEFAULT_DELTA,
        }
    }
}

impl VerificationConfig {
    pub fn options(&self) -> VerifyOptions {
        let mut o = VerifyOptions {
            resolution: self.resolution,
            hausdorff_bound: self.hausdorff_bound,
            z0: self.z0,
            ..VerifyOptions::default()
        };
        o.regions.delta = self.delta;
        o
    }
}

/// Window and density of exported profiles; the window defaults to the
/// region where the wave is not yet at rest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfileConfig {
    pub z_min: Option<f64>,
    pub z_max: Option<f64>,
    pub points: usize,
}

impl Default for ProfileConfig {
    fn default() -> Self {
        Self {
            z_min: None,
            z_max: None,
            points: 1001,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig {
    #[serde(flatten)]
    pub grid: GridConfig,
    /// Defaults to the standard raised cosine near the right boundary.
    #[serde(default)]
    pub bump: Option<BumpSpec>,
    /// Allowed relative disagreement with the analytic speed.
    #[serde(default = "default_speed_tol")]
    pub speed_tol: f64,
    #[serde(default = "default_width_tol")]
    pub width_tol: f64,
}

fn default_speed_tol() -> f64 {
    0.02
}

fn default_width_tol() -> f64 {
    0.05
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Both,
}

impl Format {
    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }

    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub format: Format,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("."),
            format: Format::Both,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub kernel: KernelConfig,
    pub theta: f64,
    pub gamma: f64,
    #[serde(default)]
    pub epsilon: Option<Epsilons>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub verification: VerificationConfig,
    #[serde(default)]
    pub profile: ProfileConfig,
    #[serde(default)]
    pub simulation: Option<SimulationConfig>,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub workers: Option<usize>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, String> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| e.to_string())?;
        cfg.validate()?;
        Ok(cfg)
    }

    #[cfg(test)]
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Range and positivity checks that serde cannot express.
    pub fn validate(&self) -> Result<(), String> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(format!("{name} must be positive, got {v}"))
            }
        };
        if !(self.theta.is_finite() && self.gamma.is_finite()) {
            return Err("theta and gamma must be finite".into());
        }
        positive("solver.tol", self.solver.tol)?;
        positive("solver.epsilon_max", self.solver.epsilon_max)?;
        positive("solver.condition_max", self.solver.condition_max)?;
        if self.solver.max_iter == 0 {
            return Err("solver.max_iter must be at least 1".into());
        }
        positive("verification.resolution", self.verification.resolution)?;
        positive("verification.hausdorff_bound", self.verification.hausdorff_bound)?;
        positive("verification.delta", self.verification.delta)?;
        if let Some(z0) = self.verification.z0 {
            positive("verification.z0", z0)?;
        }
        if self.profile.points < 2 {
            return Err("profile.points must be at least 2".into());
        }
        if let Some(eps) = &self.epsilon {
            let v = eps.values();
            if v.is_empty() {
                return Err("epsilon list is empty".into());
            }
            if let Some(bad) = v.iter().find(|e| !(**e >= 0.0 && e.is_finite())) {
                return Err(format!("epsilon values must be >= 0, got {bad}"));
            }
        }
        if let Some(sim) = &self.simulation {
            positive("simulation.speed_tol", sim.speed_tol)?;
            positive("simulation.width_tol", sim.width_tol)?;
            positive("simulation.dt", sim.grid.dt)?;
        }
        if self.workers == Some(0) {
            return Err("workers must be at least 1".into());
        }
        Ok(())
    }

    pub fn epsilons(&self) -> Vec<f64> {
        self.epsilon.as_ref().map(Epsilons::values).unwrap_or_default()
    }

    /// The single `ε` required by `pulse`, `verify` and `simulate`.
    pub fn single_epsilon(&self) -> Result<f64, String> {
        match self.epsilons().as_slice() {
            [e] => Ok(*e),
            [] => Err("config needs an `epsilon` value".into()),
            _ => Err("this command takes a single `epsilon`; use `sweep` for lists".into()),
        }
    }
}
