use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::loss::LossConfig;
use super::model::{standard_normal_latent, CvaeArch, CvaeModel, LATENT_DIM};
use crate::error::{Error, Result};
use crate::geometry::{axis_angle_to_rotation, RigidTransform, Vec3};
use crate::hand::HandModel;
use crate::nn::Grouping;
use crate::optim::Adam;
use crate::repr::{extract_ground_truth, ContactGenMaps, GraspSample, ObjectPoints};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub loss: LossConfig,
    /// KL weight reached at the end of the ramp.
    pub kl_max: f64,
    /// Fraction of training over which the KL weight ramps linearly from 0.
    pub kl_ramp: f64,
    /// Per-axis rotation range, radians.
    pub rotation_range: f64,
    pub seed: u64,
    /// First epoch to run when resuming; the KL schedule and checkpoint
    /// names continue from it.
    pub start_epoch: usize,
    /// Write a checkpoint every this many epochs; 0 disables.
    pub checkpoint_every: usize,
    pub checkpoint_dir: Option<PathBuf>,
    pub metrics_csv: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1.6e-3,
            batch_size: 256,
            epochs: 3000,
            loss: LossConfig::default(),
            kl_max: 5e-2,
            kl_ramp: 0.5,
            rotation_range: std::f64::consts::FRAC_PI_6,
            seed: 0,
            start_epoch: 0,
            checkpoint_every: 100,
            checkpoint_dir: None,
            metrics_csv: None,
        }
    }
}

impl TrainConfig {
    pub fn desk() -> Self {
        Self {
            epochs: 300,
            checkpoint_every: 50,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            self.learning_rate,
            self.loss.part_weight,
            self.loss.direction_weight,
            self.kl_ramp,
        ];
        if positive.iter().any(|v| !(*v > 0.0 && v.is_finite())) || self.kl_max < 0.0 || self.rotation_range < 0.0 {
            return Err(Error::InvalidArgument(format!("rates and weights must be positive: {self:?}")));
        }
        if !(self.loss.delta > 0.0 && self.loss.delta <= 1.0) {
            return Err(Error::InvalidArgument(format!("contact floor must lie in (0, 1], got {}", self.loss.delta)));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be positive".into()));
        }
        if self.start_epoch > self.epochs {
            return Err(Error::InvalidArgument(format!(
                "start epoch {} is past the last epoch {}",
                self.start_epoch, self.epochs
            )));
        }
        Ok(())
    }

    /// KL weight used during `epoch` (zero-based).
    pub fn kl_weight(&self, epoch: usize) -> f64 {
        let ramp = self.kl_ramp * self.epochs as f64;
        if ramp <= 0.0 {
            return self.kl_max;
        }
        self.kl_max * (epoch as f64 / ramp).min(1.0)
    }
}

/// Means over the samples seen in one epoch, before that epoch's updates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub recon: f64,
    pub contact: f64,
    pub part: f64,
    pub direction: f64,
    pub kl: f64,
    pub kl_weight: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    pub checkpoints: Vec<PathBuf>,
}

pub const METRICS_HEADER: &str = "epoch,recon,contact,ce,dir,kl,kl_weight,total";

/// Uniform per-axis rotation in `[-range, range]`.
pub fn random_rotation(rng: &mut impl Rng, range: f64) -> RigidTransform {
    if range == 0.0 {
        return RigidTransform::identity();
    }
    let mut angle = || rng.gen_range(-range..=range);
    let rx = axis_angle_to_rotation(&Vec3::new(angle(), 0.0, 0.0));
    let ry = axis_angle_to_rotation(&Vec3::new(0.0, angle(), 0.0));
    let rz = axis_angle_to_rotation(&Vec3::new(0.0, 0.0, angle()));
    RigidTransform::new(rz * ry * rx, Vec3::zeros())
}

/// Rotates object and hand together and re-extracts the maps.
pub fn augment(sample: &GraspSample, hand: &HandModel, w: &RigidTransform) -> Result<(ObjectPoints, ContactGenMaps)> {
    let object = sample.object.transformed(w);
    let root = &hand.chain.joints()[0];
    let params = sample.hand.moved_by(w, &root.offset.eval(&sample.hand.shape), &root.rest_rotation);
    let maps = extract_ground_truth(&object, &params, hand)?;
    Ok((object, maps))
}

const EPOCH_KEY: &str = "completed_epochs=";

fn config_echo(arch: &CvaeArch, cfg: &TrainConfig, completed: usize) -> String {
    format!("{EPOCH_KEY}{completed}\n{arch:?}\n{cfg:?}")
}

/// Number of finished epochs recorded in a checkpoint's config echo.
pub fn checkpoint_epoch(echo: &str) -> Option<usize> {
    echo.lines().find_map(|l| l.strip_prefix(EPOCH_KEY)?.parse().ok())
}

fn checkpoint(model: &CvaeModel, dir: &Path, name: &str, echo: &str) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    model.save(&path, echo)?;
    Ok(path)
}

/// Trains a fresh model built from `arch`.
pub fn train(samples: &[GraspSample], hand: &HandModel, arch: CvaeArch, cfg: &TrainConfig) -> Result<(CvaeModel, TrainReport)> {
    train_model(CvaeModel::new(arch)?, samples, hand, cfg)
}

/// Continues training `model`. On a non-finite loss or gradient the model
/// from the end of the last complete epoch is written to
/// `last_good.cgcvae` (when a checkpoint directory is set) and an error is
/// returned.
pub fn train_model(
    mut model: CvaeModel,
    samples: &[GraspSample],
    hand: &HandModel,
    cfg: &TrainConfig,
) -> Result<(CvaeModel, TrainReport)> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    if hand.part_count() != model.arch().parts {
        return Err(Error::ShapeMismatch(format!(
            "hand has {} parts, model {}",
            hand.part_count(),
            model.arch().parts
        )));
    }
    let arch = *model.arch();
    let groupings = samples
        .iter()
        .map(|s| Grouping::new(&s.object.points, &arch.backbone))
        .collect::<Result<Vec<_>>>()?;
    let mut metrics = match &cfg.metrics_csv {
        // a resumed run appends to the rows already written
        Some(path) if cfg.start_epoch > 0 && std::fs::metadata(path).is_ok_and(|m| m.len() > 0) => {
            Some(BufWriter::new(std::fs::OpenOptions::new().append(true).open(path)?))
        }
        Some(path) => {
            let mut f = BufWriter::new(File::create(path)?);
            writeln!(f, "{METRICS_HEADER}")?;
            Some(f)
        }
        None => None,
    };

    let seed = if cfg.start_epoch == 0 {
        cfg.seed
    } else {
        crate::repr::derive_seed(cfg.seed, cfg.start_epoch as u64)
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut adam = Adam::new(cfg.learning_rate);
    let mut flat = model.params().to_flat();
    let mut last_good = flat.clone();
    let mut report = TrainReport::default();
    let mut order: Vec<usize> = (0..samples.len()).collect();

    for epoch in cfg.start_epoch..cfg.epochs {
        let kl_weight = cfg.kl_weight(epoch);
        order.shuffle(&mut rng);
        let mut sums = [0.0; 6];
        for batch in order.chunks(cfg.batch_size) {
            let mut grad = vec![0.0; flat.len()];
            for &i in batch {
                let w = random_rotation(&mut rng, cfg.rotation_range);
                let noise: [[f64; LATENT_DIM]; 3] = std::array::from_fn(|_| standard_normal_latent(&mut rng));
                let (object, maps) = augment(&samples[i], hand, &w)?;
                let pass = model.train_pass(&object, &groupings[i], &maps, &noise, &cfg.loss, kl_weight)?;
                let r = pass.report;
                let finite = r.total.is_finite() && pass.grads.iter().all(|t| t.iter().all(|v| v.is_finite()));
                if !finite {
                    if let Some(dir) = &cfg.checkpoint_dir {
                        model.params_mut().set_flat(&last_good);
                        let echo = config_echo(&arch, cfg, epoch);
                        report.checkpoints.push(checkpoint(&model, dir, "last_good.cgcvae", &echo)?);
                    }
                    return Err(Error::Diverged {
                        epoch,
                        detail: format!("non-finite loss {} on sample {i}", r.total),
                    });
                }
                for (s, v) in sums.iter_mut().zip([r.recon.total, r.recon.contact, r.recon.part, r.recon.direction, r.kl, r.total]) {
                    *s += v;
                }
                let scale = 1.0 / batch.len() as f64;
                let mut at = 0;
                for t in &pass.grads {
                    for (g, v) in grad[at..at + t.len()].iter_mut().zip(t.iter()) {
                        *g += scale * v;
                    }
                    at += t.len();
                }
            }
            adam.step(&mut flat, &grad);
            model.params_mut().set_flat(&flat);
        }
        let n = samples.len() as f64;
        let stats = EpochStats {
            epoch,
            recon: sums[0] / n,
            contact: sums[1] / n,
            part: sums[2] / n,
            direction: sums[3] / n,
            kl: sums[4] / n,
            kl_weight,
            total: sums[5] / n,
        };
        if let Some(f) = metrics.as_mut() {
            writeln!(
                f,
                "{},{},{},{},{},{},{},{}",
                stats.epoch, stats.recon, stats.contact, stats.part, stats.direction, stats.kl, stats.kl_weight, stats.total
            )?;
            f.flush()?;
        }
        log::debug!("epoch {epoch}: recon {:.5} kl {:.4}", stats.recon, stats.kl);
        report.epochs.push(stats);
        last_good.clone_from(&flat);
        if let Some(dir) = &cfg.checkpoint_dir {
            if cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0 {
                let echo = config_echo(&arch, cfg, epoch + 1);
                report.checkpoints.push(checkpoint(&model, dir, &format!("epoch-{:05}.cgcvae", epoch + 1), &echo)?);
            }
        }
    }
    if let Some(dir) = &cfg.checkpoint_dir {
        let echo = config_echo(&arch, cfg, cfg.epochs);
        report.checkpoints.push(checkpoint(&model, dir, "final.cgcvae", &echo)?);
    }
    Ok((model, report))
}
