//! Experiment configuration: a TOML file of optional overrides on top of a
//! preset, resolved into [`ExperimentConfig`] and echoed into every output
//! directory.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::ValueEnum;
use contactgen::cvae::{CvaeArch, LossConfig, TrainConfig};
use contactgen::eval::{SimulationConfig, CONTACT_THRESHOLD, DEFAULT_CLUSTERS, DEFAULT_RESTARTS, PENETRATION_VOXEL};
use contactgen::hand::NUM_PARTS;
use contactgen::repr::{ShapeKind, ShapeSpec, CONTACT_FLOOR};
use contactgen::solver::{LossWeights, SolverConfig, StageConfig};
use serde::{Deserialize, Serialize};

use crate::Invalid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Full,
    Desk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeEntry {
    pub kind: String,
    pub min_size: f64,
    pub max_size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetConfig {
    pub shapes: Vec<ShapeEntry>,
    pub grasps_per_object: usize,
    pub points: usize,
    /// Every `test_every`-th record goes to the test split; 0 keeps all in train.
    pub test_every: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub kl_weight: f64,
    pub kl_ramp: f64,
    pub rotation_range: f64,
    pub part_weight: f64,
    pub direction_weight: f64,
    pub contact_floor: f64,
    pub checkpoint_every: usize,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolverSection {
    pub global_iterations: usize,
    pub global_learning_rate: f64,
    pub local_iterations: usize,
    pub local_learning_rate: f64,
    pub contact_weight: f64,
    pub direction_weight: f64,
    pub penetration_weight: f64,
    pub regularization_weight: f64,
    pub openings: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsSection {
    pub contact_threshold: f64,
    pub penetration_voxel: f64,
    pub clusters: usize,
    pub restarts: usize,
    pub sim_horizon: f64,
    pub sim_friction: f64,
    pub sim_density: f64,
}

/// Fully resolved configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub seed: u64,
    pub dataset: DatasetConfig,
    pub train: TrainSection,
    pub solver: SolverSection,
    pub metrics: MetricsSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    preset: Option<Preset>,
    seed: Option<u64>,
    #[serde(default)]
    dataset: DatasetFile,
    #[serde(default)]
    train: TrainFile,
    #[serde(default)]
    solver: SolverFile,
    #[serde(default)]
    metrics: MetricsFile,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DatasetFile {
    shapes: Option<Vec<ShapeEntry>>,
    grasps_per_object: Option<usize>,
    points: Option<usize>,
    test_every: Option<usize>,
    manifest: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainFile {
    learning_rate: Option<f64>,
    batch_size: Option<usize>,
    epochs: Option<usize>,
    kl_weight: Option<f64>,
    kl_ramp: Option<f64>,
    rotation_range: Option<f64>,
    part_weight: Option<f64>,
    direction_weight: Option<f64>,
    contact_floor: Option<f64>,
    checkpoint_every: Option<usize>,
    width: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverFile {
    global_iterations: Option<usize>,
    global_learning_rate: Option<f64>,
    local_iterations: Option<usize>,
    local_learning_rate: Option<f64>,
    contact_weight: Option<f64>,
    direction_weight: Option<f64>,
    penetration_weight: Option<f64>,
    regularization_weight: Option<f64>,
    openings: Option<Vec<f64>>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct MetricsFile {
    contact_threshold: Option<f64>,
    penetration_voxel: Option<f64>,
    clusters: Option<usize>,
    restarts: Option<usize>,
    sim_horizon: Option<f64>,
    sim_friction: Option<f64>,
    sim_density: Option<f64>,
}

impl ExperimentConfig {
    pub fn preset(preset: Preset) -> Self {
        let train = match preset {
            Preset::Full => TrainConfig::default(),
            Preset::Desk => TrainConfig::desk(),
        };
        let arch = match preset {
            Preset::Full => CvaeArch::full(NUM_PARTS),
            Preset::Desk => CvaeArch::desk(NUM_PARTS),
        };
        let solver = SolverConfig::default();
        let sim = SimulationConfig::default();
        Self {
            preset,
            seed: 0,
            dataset: DatasetConfig {
                shapes: ShapeSpec::default_suite()
                    .iter()
                    .map(|s| ShapeEntry {
                        kind: s.kind.name().to_string(),
                        min_size: s.min_size,
                        max_size: s.max_size,
                    })
                    .collect(),
                grasps_per_object: 4,
                points: match preset {
                    Preset::Full => 2048,
                    Preset::Desk => 512,
                },
                test_every: 5,
                manifest: None,
            },
            train: TrainSection {
                learning_rate: train.learning_rate,
                batch_size: train.batch_size,
                epochs: train.epochs,
                kl_weight: train.kl_max,
                kl_ramp: train.kl_ramp,
                rotation_range: train.rotation_range,
                part_weight: train.loss.part_weight,
                direction_weight: train.loss.direction_weight,
                contact_floor: train.loss.delta,
                checkpoint_every: train.checkpoint_every,
                width: arch.backbone.width,
            },
            solver: SolverSection {
                global_iterations: solver.global_stage.iterations,
                global_learning_rate: solver.global_stage.learning_rate,
                local_iterations: solver.local_stage.iterations,
                local_learning_rate: solver.local_stage.learning_rate,
                contact_weight: solver.weights.contact,
                direction_weight: solver.weights.direction,
                penetration_weight: solver.weights.penetration,
                regularization_weight: solver.weights.regularization,
                openings: solver.openings,
            },
            metrics: MetricsSection {
                contact_threshold: CONTACT_THRESHOLD,
                penetration_voxel: PENETRATION_VOXEL,
                clusters: DEFAULT_CLUSTERS,
                restarts: DEFAULT_RESTARTS,
                sim_horizon: sim.horizon,
                sim_friction: sim.friction,
                sim_density: sim.density,
            },
        }
    }

    /// Reads `path` (if any) over the preset chosen by, in order, the
    /// command line, the file, or `desk`. Relative paths in the file are
    /// taken relative to the file.
    pub fn load(path: Option<&Path>, preset: Option<Preset>, seed: Option<u64>) -> Result<Self> {
        let file = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| Invalid(format!("cannot read config {}: {e}", p.display())))?;
                toml::from_str::<ConfigFile>(&text).map_err(|e| Invalid(format!("config {}: {e}", p.display())))?
            }
            None => ConfigFile::default(),
        };
        let mut cfg = Self::preset(preset.or(file.preset).unwrap_or(Preset::Desk));
        if let Some(s) = seed.or(file.seed) {
            cfg.seed = s;
        }

        let d = file.dataset;
        set(&mut cfg.dataset.shapes, d.shapes);
        set(&mut cfg.dataset.grasps_per_object, d.grasps_per_object);
        set(&mut cfg.dataset.points, d.points);
        set(&mut cfg.dataset.test_every, d.test_every);
        let base = path.and_then(Path::parent).unwrap_or(Path::new(""));
        cfg.dataset.manifest = d.manifest.map(|m| base.join(m));

        let t = file.train;
        set(&mut cfg.train.learning_rate, t.learning_rate);
        set(&mut cfg.train.batch_size, t.batch_size);
        set(&mut cfg.train.epochs, t.epochs);
        set(&mut cfg.train.kl_weight, t.kl_weight);
        set(&mut cfg.train.kl_ramp, t.kl_ramp);
        set(&mut cfg.train.rotation_range, t.rotation_range);
        set(&mut cfg.train.part_weight, t.part_weight);
        set(&mut cfg.train.direction_weight, t.direction_weight);
        set(&mut cfg.train.contact_floor, t.contact_floor);
        set(&mut cfg.train.checkpoint_every, t.checkpoint_every);
        set(&mut cfg.train.width, t.width);

        let s = file.solver;
        set(&mut cfg.solver.global_iterations, s.global_iterations);
        set(&mut cfg.solver.global_learning_rate, s.global_learning_rate);
        set(&mut cfg.solver.local_iterations, s.local_iterations);
        set(&mut cfg.solver.local_learning_rate, s.local_learning_rate);
        set(&mut cfg.solver.contact_weight, s.contact_weight);
        set(&mut cfg.solver.direction_weight, s.direction_weight);
        set(&mut cfg.solver.penetration_weight, s.penetration_weight);
        set(&mut cfg.solver.regularization_weight, s.regularization_weight);
        set(&mut cfg.solver.openings, s.openings);

        let m = file.metrics;
        set(&mut cfg.metrics.contact_threshold, m.contact_threshold);
        set(&mut cfg.metrics.penetration_voxel, m.penetration_voxel);
        set(&mut cfg.metrics.clusters, m.clusters);
        set(&mut cfg.metrics.restarts, m.restarts);
        set(&mut cfg.metrics.sim_horizon, m.sim_horizon);
        set(&mut cfg.metrics.sim_friction, m.sim_friction);
        set(&mut cfg.metrics.sim_density, m.sim_density);

        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| -> anyhow::Error { Invalid(msg).into() };
        self.shape_specs()?;
        if self.dataset.grasps_per_object == 0 || self.dataset.points == 0 {
            return Err(bad("dataset.grasps_per_object and dataset.points must be positive".into()));
        }
        if let Some(m) = &self.dataset.manifest {
            if !m.is_file() {
                return Err(bad(format!("dataset manifest {} does not exist", m.display())));
            }
        }
        self.train_config(None, None).map_err(|e| bad(format!("train: {e}")))?;
        self.arch().validate().map_err(|e| bad(format!("train: {e}")))?;
        if !(self.train.width > 0.0 && self.train.width.is_finite()) {
            return Err(bad(format!("train.width must be positive, got {}", self.train.width)));
        }
        self.solver_config().validate().map_err(|e| bad(format!("solver: {e}")))?;
        let m = &self.metrics;
        for (name, v) in [
            ("contact_threshold", m.contact_threshold),
            ("penetration_voxel", m.penetration_voxel),
            ("sim_horizon", m.sim_horizon),
            ("sim_density", m.sim_density),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(bad(format!("metrics.{name} must be positive, got {v}")));
            }
        }
        if !(m.sim_friction >= 0.0) || m.clusters == 0 || m.restarts == 0 {
            return Err(bad("metrics: friction must be non-negative, clusters and restarts positive".into()));
        }
        Ok(())
    }

    pub fn shape_specs(&self) -> Result<Vec<ShapeSpec>> {
        if self.dataset.shapes.is_empty() {
            return Err(Invalid("dataset.shapes is empty".into()).into());
        }
        self.dataset
            .shapes
            .iter()
            .map(|s| {
                let kind = ShapeKind::parse(&s.kind).map_err(|e| Invalid(e.to_string()))?;
                Ok(ShapeSpec::new(kind, s.min_size, s.max_size).map_err(|e| Invalid(e.to_string()))?)
            })
            .collect()
    }

    pub fn arch(&self) -> CvaeArch {
        let mut arch = CvaeArch::full(NUM_PARTS);
        arch.backbone.width = self.train.width;
        arch.seed = self.seed;
        arch
    }

    pub fn train_config(&self, checkpoint_dir: Option<PathBuf>, metrics_csv: Option<PathBuf>) -> contactgen::Result<TrainConfig> {
        let t = &self.train;
        let cfg = TrainConfig {
            learning_rate: t.learning_rate,
            batch_size: t.batch_size,
            epochs: t.epochs,
            loss: LossConfig {
                part_weight: t.part_weight,
                direction_weight: t.direction_weight,
                delta: t.contact_floor,
            },
            kl_max: t.kl_weight,
            kl_ramp: t.kl_ramp,
            rotation_range: t.rotation_range,
            seed: self.seed,
            start_epoch: 0,
            checkpoint_every: t.checkpoint_every,
            checkpoint_dir,
            metrics_csv,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn solver_config(&self) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            weights: LossWeights {
                contact: s.contact_weight,
                direction: s.direction_weight,
                penetration: s.penetration_weight,
                regularization: s.regularization_weight,
            },
            delta: CONTACT_FLOOR,
            global_stage: StageConfig {
                iterations: s.global_iterations,
                learning_rate: s.global_learning_rate,
            },
            local_stage: StageConfig {
                iterations: s.local_iterations,
                learning_rate: s.local_learning_rate,
            },
            openings: s.openings.clone(),
        }
    }

    pub fn simulation(&self) -> SimulationConfig {
        SimulationConfig {
            horizon: self.metrics.sim_horizon,
            friction: self.metrics.sim_friction,
            density: self.metrics.sim_density,
            ..SimulationConfig::default()
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Writes the resolved config as `config.toml` in `dir`.
    pub fn echo_into(&self, dir: &Path) -> Result<()> {
        let path = dir.join("config.toml");
        std::fs::write(&path, self.to_toml()).with_context(|| format!("writing {}", path.display()))
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}
