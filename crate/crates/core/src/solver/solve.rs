use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use super::objective::{LossBreakdown, LossWeights, Objective};
use crate::error::{Error, Result};
use crate::geometry::{axis_angle_to_rotation, rotation_to_axis_angle, Mat3, RigidTransform, TriangleMesh, Vec3};
use crate::hand::anatomy::RELAXED_FLEXION;
use crate::hand::{HandModel, HandParams, FLAT_DIM, NUM_PARTS, SHAPE_DIM};
use crate::optim::Adam;
use crate::repr::{ContactGenMaps, ObjectPoints, CONTACT_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageConfig {
    pub iterations: usize,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub weights: LossWeights,
    /// Floor added to the contact value when weighting the direction term.
    pub delta: f64,
    /// Global rotation and translation only.
    pub global_stage: StageConfig,
    /// Articulation and shape, global pose frozen.
    pub local_stage: StageConfig,
    /// Flexion offsets added to every finger joint of each deterministic
    /// start when no initialization is given. Negative values open the hand.
    pub openings: Vec<f64>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            weights: LossWeights::default(),
            delta: CONTACT_FLOOR,
            global_stage: StageConfig {
                iterations: 200,
                learning_rate: 5e-2,
            },
            local_stage: StageConfig {
                iterations: 1000,
                learning_rate: 5e-3,
            },
            openings: vec![0.0, -RELAXED_FLEXION],
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let w = &self.weights;
        for (name, v) in [
            ("contact weight", w.contact),
            ("direction weight", w.direction),
            ("penetration weight", w.penetration),
            ("regularization weight", w.regularization),
            ("global-stage learning rate", self.global_stage.learning_rate),
            ("local-stage learning rate", self.local_stage.learning_rate),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.delta > 0.0 && self.delta <= 1.0) {
            return Err(Error::InvalidArgument(format!("delta must lie in (0, 1], got {}", self.delta)));
        }
        if self.global_stage.iterations == 0 || self.local_stage.iterations == 0 {
            return Err(Error::InvalidArgument("stage iteration counts must be >= 1".into()));
        }
        if self.openings.is_empty() || self.openings.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("openings must be a non-empty list of finite values".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iteration: usize,
    pub stage: u8,
    pub losses: LossBreakdown,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraspResult {
    pub params: HandParams,
    /// Global transform of the root part.
    pub global: RigidTransform,
    pub losses: LossBreakdown,
    pub initial_losses: LossBreakdown,
    /// Fixed-topology hand surface at `params`.
    pub mesh: TriangleMesh,
    /// One row per evaluated iterate; iteration 0 is the initialization.
    pub trace: Vec<TraceRow>,
    /// Set when a non-finite loss stopped the optimization early.
    pub failed: bool,
}

fn check_lengths(object: &ObjectPoints, maps: &ContactGenMaps) -> Result<()> {
    if maps.len() != object.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} object points but maps of length {}",
            object.len(),
            maps.len()
        )));
    }
    Ok(())
}

/// Root placed at `center` with the hand frame (x toward the fingers, z out
/// of the back of the hand) given by `x_hint` and `z`.
fn framed_pose(model: &HandModel, center: Vec3, z: Vec3, x_hint: Vec3) -> HandParams {
    let mut x = x_hint - z * z.dot(&x_hint);
    if x.norm() < 1e-9 {
        x = if z.x.abs() < 0.9 { Vec3::x() } else { Vec3::y() };
        x -= z * z.dot(&x);
    }
    let x = x.normalize();
    let y = z.cross(&x);
    let global = Mat3::from_columns(&[x, y, z]);

    let root = &model.chain.joints()[0];
    let mut params = HandParams::rest();
    let rest = root.rest_rotation;
    params.pose[0] = rotation_to_axis_angle(&(rest.transpose() * global * rest));
    let rotation = rest * axis_angle_to_rotation(&params.pose[0]);
    params.translation = center - root.offset.eval(&params.shape) + rotation * root.anchor.eval(&params.shape);
    params
}

/// Contact-weighted sums over points whose label satisfies `keep`:
/// (Σ w·p, Σ w·n, Σ w).
fn weighted_sums(object: &ObjectPoints, maps: &ContactGenMaps, keep: impl Fn(usize) -> bool) -> (Vec3, Vec3, f64) {
    let total: f64 = maps.contact.iter().sum();
    let (mut p, mut n, mut w) = (Vec3::zeros(), Vec3::zeros(), 0.0);
    for i in 0..object.len() {
        if !keep(maps.parts[i]) {
            continue;
        }
        let wi = if total > 1e-9 { maps.contact[i] } else { 1.0 };
        p += object.points[i] * wi;
        n += object.normals[i] * wi;
        w += wi;
    }
    (p, n, w)
}

fn finger_direction(object: &ObjectPoints, maps: &ContactGenMaps) -> Vec3 {
    let (palm, _, palm_w) = weighted_sums(object, maps, |b| b == 0);
    let (fingers, _, fingers_w) = weighted_sums(object, maps, |b| b != 0);
    if palm_w > 1e-9 && fingers_w > 1e-9 {
        fingers / fingers_w - palm / palm_w
    } else {
        Vec3::zeros()
    }
}

/// Deterministic starting pose: rest articulation, palm centroid at the
/// contact-weighted object centroid, palmar side facing the mean contact
/// normal, fingers pointing from palm-labeled toward finger-labeled contacts.
pub fn initial_pose(object: &ObjectPoints, maps: &ContactGenMaps, model: &HandModel) -> Result<HandParams> {
    check_lengths(object, maps)?;
    let (p, n, w) = weighted_sums(object, maps, |_| true);
    let z = if n.norm() > 1e-9 { n.normalize() } else { Vec3::z() };
    Ok(framed_pose(model, p / w, z, finger_direction(object, maps)))
}

/// Like [`initial_pose`] but centered on, and facing the mean normal of,
/// the palm-labeled contacts only. Falls back to [`initial_pose`] when no
/// point carries contact weight on the palm.
pub fn palm_initial_pose(object: &ObjectPoints, maps: &ContactGenMaps, model: &HandModel) -> Result<HandParams> {
    check_lengths(object, maps)?;
    let (p, n, w) = weighted_sums(object, maps, |b| b == 0);
    if w <= 1e-9 || n.norm() <= 1e-9 {
        return initial_pose(object, maps, model);
    }
    Ok(framed_pose(model, p / w, n.normalize(), finger_direction(object, maps)))
}

/// Starts tried by [`solve`] without an explicit initialization: both
/// deterministic poses, each with every finger offset in `openings`.
pub fn initial_candidates(
    object: &ObjectPoints,
    maps: &ContactGenMaps,
    model: &HandModel,
    openings: &[f64],
) -> Result<Vec<HandParams>> {
    let bases = [initial_pose(object, maps, model)?, palm_initial_pose(object, maps, model)?];
    let mut out: Vec<HandParams> = Vec::new();
    for base in bases {
        for &open in openings {
            let mut p = base;
            for b in 1..NUM_PARTS {
                p.pose[b].y += open;
            }
            if !out.contains(&p) {
                out.push(p);
            }
        }
    }
    Ok(out)
}

/// Maps every axis-angle with norm above π to the equivalent one below it.
fn wrap_rotations(flat: &mut [f64; FLAT_DIM]) {
    for b in 0..NUM_PARTS {
        let v = Vec3::from_column_slice(&flat[3 * b..3 * b + 3]);
        let n = v.norm();
        if n > PI {
            let turns = ((n + PI) / (2.0 * PI)).floor();
            let w = v * (1.0 - 2.0 * PI * turns / n);
            flat[3 * b..3 * b + 3].copy_from_slice(w.as_slice());
        }
    }
}

const GLOBAL_VARS: [usize; 6] = [0, 1, 2, FLAT_DIM - 3, FLAT_DIM - 2, FLAT_DIM - 1];

fn local_vars() -> Vec<usize> {
    (3..NUM_PARTS * 3 + SHAPE_DIM).collect()
}

/// Fits hand parameters to `maps` with a global stage followed by a local
/// stage. Without `init` every start from [`initial_candidates`] is run and
/// the result with the lowest final objective is kept, preferring runs that
/// did not fail.
pub fn solve(
    object: &ObjectPoints,
    maps: &ContactGenMaps,
    model: &HandModel,
    config: &SolverConfig,
    init: Option<&HandParams>,
) -> Result<GraspResult> {
    config.validate()?;
    let objective = Objective::new(object, maps, model, config.weights, config.delta)?;
    if let Some(p) = init {
        return solve_from(&objective, model, config, *p);
    }
    let mut best: Option<GraspResult> = None;
    for start in initial_candidates(object, maps, model, &config.openings)? {
        let r = solve_from(&objective, model, config, start)?;
        let better = match &best {
            None => true,
            Some(b) => (!r.failed, -r.losses.total) > (!b.failed, -b.losses.total),
        };
        if better {
            best = Some(r);
        }
    }
    Ok(best.expect("at least one start"))
}

fn solve_from(objective: &Objective<'_>, model: &HandModel, config: &SolverConfig, start: HandParams) -> Result<GraspResult> {
    let initial_losses = objective.evaluate(&start)?;
    if !initial_losses.is_finite() {
        return Err(Error::NonFinite("solver objective at the initial pose"));
    }

    let mut trace = vec![TraceRow {
        iteration: 0,
        stage: 0,
        losses: initial_losses,
    }];
    let mut best = (start, initial_losses);
    let mut last = best;
    let mut failed = false;
    let mut iteration = 0;

    let stages = [(1u8, config.global_stage, GLOBAL_VARS.to_vec()), (2u8, config.local_stage, local_vars())];
    'stages: for (stage, stage_cfg, vars) in stages {
        // each stage starts from the best iterate found so far
        let mut current = best.0.to_flat();
        let mut adam = Adam::new(stage_cfg.learning_rate);
        let mut x: Vec<f64> = vars.iter().map(|&k| current[k]).collect();
        for _ in 0..stage_cfg.iterations {
            let params = HandParams::from_flat(&current)?;
            let (_, grad) = objective.evaluate_with_gradient(&params)?;
            let g = grad.to_flat();
            let gv: Vec<f64> = vars.iter().map(|&k| g[k]).collect();
            if gv.iter().any(|v| !v.is_finite()) {
                failed = true;
                break 'stages;
            }
            adam.step(&mut x, &gv);
            for (&k, &v) in vars.iter().zip(&x) {
                current[k] = v;
            }
            wrap_rotations(&mut current);
            for (&k, v) in vars.iter().zip(x.iter_mut()) {
                *v = current[k];
            }
            iteration += 1;
            let params = HandParams::from_flat(&current)?;
            let losses = match objective.evaluate(&params) {
                Ok(l) if l.is_finite() => l,
                _ => {
                    failed = true;
                    break 'stages;
                }
            };
            trace.push(TraceRow {
                iteration,
                stage,
                losses,
            });
            last = (params, losses);
            if losses.total < best.1.total {
                best = last;
            }
        }
    }

    let (params, losses) = if failed { last } else { best };
    let posed = model.pose(&params);
    Ok(GraspResult {
        params,
        global: posed.transforms[0],
        losses,
        initial_losses,
        mesh: posed.template_mesh(),
        trace,
        failed,
    })
}

/// `iteration,stage,contact,direction,penetration,regularization,total`.
pub fn write_trace_csv(trace: &[TraceRow], path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "iteration,stage,contact,direction,penetration,regularization,total")?;
    for row in trace {
        let l = &row.losses;
        writeln!(
            f,
            "{},{},{:e},{:e},{:e},{:e},{:e}",
            row.iteration, row.stage, l.contact, l.direction, l.penetration, l.regularization, l.total
        )?;
    }
    f.flush()?;
    Ok(())
}
