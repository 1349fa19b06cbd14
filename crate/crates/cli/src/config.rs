//! Experiment configuration: one JSON document describing sources, grids,
//! depths, noise, and solver settings. Command-line flags override file
//! values, which override the built-in defaults.

use std::path::{Path, PathBuf};

use gravicont::{NnlsOptions, NoiseSpec, PointSource, Rect};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObservationConfig {
    #[serde(default = "default_extent")]
    pub extent: Rect,
    #[serde(default = "default_subdivisions")]
    pub n1: usize,
    #[serde(default = "default_subdivisions")]
    pub n2: usize,
    #[serde(default)]
    pub elevation: f64,
}

impl Default for ObservationConfig {
    fn default() -> Self {
        ObservationConfig {
            extent: default_extent(),
            n1: default_subdivisions(),
            n2: default_subdivisions(),
            elevation: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContinuationConfig {
    #[serde(default = "default_extent")]
    pub extent: Rect,
    #[serde(default = "default_subdivisions")]
    pub m1: usize,
    #[serde(default = "default_subdivisions")]
    pub m2: usize,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        ContinuationConfig {
            extent: default_extent(),
            m1: default_subdivisions(),
            m2: default_subdivisions(),
        }
    }
}

fn default_extent() -> Rect {
    Rect { a1: -1.0, b1: 1.0, a2: -1.0, b2: 1.0 }
}

fn default_subdivisions() -> usize {
    40
}

/// Depth grid: either an explicit list or a start/stop/step range.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DepthSpec {
    Range { start: f64, stop: f64, step: f64 },
    List(Vec<f64>),
}

impl Default for DepthSpec {
    fn default() -> Self {
        DepthSpec::Range { start: 0.05, stop: 0.8, step: 0.005 }
    }
}

impl DepthSpec {
    /// Expands to a concrete list of depths.
    pub fn expand(&self) -> Result<Vec<f64>, CliError> {
        match self {
            DepthSpec::List(values) => {
                if values.is_empty() {
                    return Err(CliError::Config("depth list is empty".into()));
                }
                Ok(values.clone())
            }
            DepthSpec::Range { start, stop, step } => {
                if !(*step > 0.0) || !(*start > 0.0) || stop < start {
                    return Err(CliError::Config(format!(
                        "invalid depth range: start {start}, stop {stop}, step {step}"
                    )));
                }
                let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
                Ok((0..count).map(|i| start + i as f64 * step).collect())
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub sources: Vec<PointSource>,
    #[serde(default)]
    pub observation: ObservationConfig,
    #[serde(default)]
    pub continuation: ContinuationConfig,
    #[serde(default)]
    pub depths: DepthSpec,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default = "default_g")]
    pub gravitational_constant: f64,
    #[serde(default = "default_output_directory")]
    pub output_directory: PathBuf,
    #[serde(default)]
    pub solver: NnlsOptions,
}

fn default_g() -> f64 {
    gravicont::DEFAULT_G
}

fn default_output_directory() -> PathBuf {
    PathBuf::from("out")
}

/// Command-line overrides applied on top of the configuration file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub output_directory: Option<PathBuf>,
    pub delta: Option<f64>,
    pub seed: Option<u64>,
    pub depth_start: Option<f64>,
    pub depth_stop: Option<f64>,
    pub depth_step: Option<f64>,
}

impl ExperimentConfig {
    /// Reads and validates a configuration file, applying flag overrides.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Io { path: path.to_path_buf(), source: e })?;
        let mut config: ExperimentConfig = serde_json::from_str(&text).map_err(|e| {
            CliError::Config(format!("{}: {e}", path.display()))
        })?;
        config.apply(overrides)?;
        config.validate()?;
        Ok(config)
    }

    fn apply(&mut self, overrides: &Overrides) -> Result<(), CliError> {
        if let Some(dir) = &overrides.output_directory {
            self.output_directory = dir.clone();
        }
        if let Some(delta) = overrides.delta {
            self.noise.delta = delta;
        }
        if let Some(seed) = overrides.seed {
            self.noise.seed = seed;
        }
        let range_override = overrides.depth_start.is_some()
            || overrides.depth_stop.is_some()
            || overrides.depth_step.is_some();
        if range_override {
            let (mut start, mut stop, mut step) = match self.depths {
                DepthSpec::Range { start, stop, step } => (start, stop, step),
                DepthSpec::List(_) => (0.05, 0.8, 0.005),
            };
            if let Some(v) = overrides.depth_start {
                start = v;
            }
            if let Some(v) = overrides.depth_stop {
                stop = v;
            }
            if let Some(v) = overrides.depth_step {
                step = v;
            }
            self.depths = DepthSpec::Range { start, stop, step };
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.observation
            .extent
            .validate()
            .and_then(|_| self.continuation.extent.validate())
            .map_err(|e| CliError::Config(e.to_string()))?;
        for (i, s) in self.sources.iter().enumerate() {
            PointSource::new(s.mass, s.position)
                .map_err(|e| CliError::Config(format!("sources[{i}]: {e}")))?;
        }
        NoiseSpec::new(self.noise.delta, self.noise.seed)
            .map_err(|e| CliError::Config(format!("noise: {e}")))?;
        if !self.gravitational_constant.is_finite() || self.gravitational_constant <= 0.0 {
            return Err(CliError::Config(format!(
                "gravitational_constant must be positive, got {}",
                self.gravitational_constant
            )));
        }
        self.depths.expand()?;
        Ok(())
    }

    pub fn nnls_options(&self) -> NnlsOptions {
        self.solver
    }
}
