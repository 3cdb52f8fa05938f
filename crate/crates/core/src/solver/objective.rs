use crate::error::{Error, Result};
use crate::geometry::{Mat3, Vec3};
use crate::hand::{HandModel, HandParams, ParamGrad, PartSdf, NUM_PARTS, SHAPE_DIM};
use crate::repr::{ContactGenMaps, ObjectPoints};

/// Smoothing of `|SDF|` in the contact term, meters.
pub const ABS_SMOOTHING: f64 = 1e-6;

/// Below this local radius the part direction is treated as undefined.
const MIN_DIRECTION_RADIUS: f64 = 1e-12;

/// Point count at which a per-point mean matches a per-point sum scaled by
/// the regularization weight's nominal value.
pub const REFERENCE_POINTS: f64 = 2048.0;

/// Weights of the four objective terms. The data terms are means over
/// object points, so the nominal regularization weight 1e-2 is divided by
/// [`REFERENCE_POINTS`] to keep its balance against them.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossWeights {
    pub contact: f64,
    pub direction: f64,
    pub penetration: f64,
    pub regularization: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            contact: 1e-1,
            direction: 1e-2,
            penetration: 3.0,
            regularization: 1e-2 / REFERENCE_POINTS,
        }
    }
}

/// Unweighted terms and the weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossBreakdown {
    pub contact: f64,
    pub direction: f64,
    pub penetration: f64,
    pub regularization: f64,
    pub total: f64,
    /// Points whose direction was undefined and were left out of the direction term.
    pub skipped_directions: usize,
}

impl LossBreakdown {
    pub fn is_finite(&self) -> bool {
        [self.contact, self.direction, self.penetration, self.regularization, self.total]
            .iter()
            .all(|v| v.is_finite())
    }
}

/// The solver objective for one object and one set of target maps.
#[derive(Debug, Clone, Copy)]
pub struct Objective<'a> {
    pub object: &'a ObjectPoints,
    pub maps: &'a ContactGenMaps,
    pub model: &'a HandModel,
    pub weights: LossWeights,
    pub delta: f64,
}

fn smooth_abs(s: f64) -> (f64, f64) {
    let r = (s * s + ABS_SMOOTHING * ABS_SMOOTHING).sqrt();
    (r - ABS_SMOOTHING, s / r)
}

impl<'a> Objective<'a> {
    pub fn new(
        object: &'a ObjectPoints,
        maps: &'a ContactGenMaps,
        model: &'a HandModel,
        weights: LossWeights,
        delta: f64,
    ) -> Result<Self> {
        maps.validate()?;
        if maps.len() != object.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} object points but maps of length {}",
                object.len(),
                maps.len()
            )));
        }
        if maps.part_count != model.part_count() {
            return Err(Error::ShapeMismatch(format!(
                "maps have {} parts, the hand has {}",
                maps.part_count,
                model.part_count()
            )));
        }
        Ok(Self {
            object,
            maps,
            model,
            weights,
            delta,
        })
    }

    pub fn evaluate(&self, params: &HandParams) -> Result<LossBreakdown> {
        self.run(params, false).map(|(l, _)| l)
    }

    pub fn evaluate_with_gradient(&self, params: &HandParams) -> Result<(LossBreakdown, ParamGrad)> {
        self.run(params, true).map(|(l, g)| (l, g.expect("gradient requested")))
    }

    fn run(&self, params: &HandParams, want_grad: bool) -> Result<(LossBreakdown, Option<ParamGrad>)> {
        params.validate()?;
        let chain = &self.model.chain;
        let sdf = &self.model.sdf;
        let transforms = chain.forward(params);
        let nb = transforms.len();
        let n = self.object.len() as f64;
        let w = self.weights;

        let mut out = LossBreakdown::default();
        let mut g_rot = vec![Mat3::zeros(); nb];
        let mut g_trans = vec![Vec3::zeros(); nb];
        let mut g_shape = [0.0; SHAPE_DIM];

        // Accumulates d(scale · f)/d(local point) and d/dβ into the part-level buffers.
        let mut push = |b: usize, offset: &Vec3, g_local: Vec3, d_shape: Option<&[f64; SHAPE_DIM]>, scale: f64| {
            let g = g_local * scale;
            g_rot[b] += offset * g.transpose();
            g_trans[b] -= transforms[b].rotation * g;
            if let Some(ds) = d_shape {
                for k in 0..SHAPE_DIM {
                    g_shape[k] += ds[k] * scale;
                }
            }
        };

        for (i, o) in self.object.points.iter().enumerate() {
            let c = self.maps.contact[i];
            let label = self.maps.parts[i];
            for b in 0..nb {
                let offset = o - transforms[b].translation;
                let local = transforms[b].rotation.transpose() * offset;
                let s = if want_grad {
                    sdf.gradient(b, &local, &params.shape)
                } else {
                    crate::hand::SdfSample {
                        value: sdf.value(b, &local, &params.shape),
                        d_point: Vec3::zeros(),
                        d_shape: [0.0; SHAPE_DIM],
                    }
                };
                if !s.value.is_finite() {
                    return Err(Error::NonFiniteSdf { part: b });
                }
                if s.value < 0.0 {
                    out.penetration -= s.value;
                    if want_grad {
                        push(b, &offset, -s.d_point, Some(&s.d_shape.map(|v| -v)), w.penetration / n);
                    }
                }
                if b != label {
                    continue;
                }
                if c > 0.0 {
                    let (a, da) = smooth_abs(s.value);
                    out.contact += c * a;
                    if want_grad {
                        push(b, &offset, s.d_point * da, Some(&s.d_shape.map(|v| v * da)), w.contact * c / n);
                    }
                }
                let r = local.norm();
                if r <= MIN_DIRECTION_RADIUS {
                    out.skipped_directions += 1;
                    continue;
                }
                let u = local / r;
                let target = self.maps.directions[i];
                let wc = c + self.delta;
                out.direction += wc * (1.0 - target.dot(&u));
                if want_grad {
                    let g_local = -(target - u * u.dot(&target)) / r;
                    push(b, &offset, g_local, None, w.direction * wc / n);
                }
            }
        }
        out.contact /= n;
        out.direction /= n;
        out.penetration /= n;
        out.regularization = regularization(params);
        out.total = w.contact * out.contact
            + w.direction * out.direction
            + w.penetration * out.penetration
            + w.regularization * out.regularization;

        if !want_grad {
            return Ok((out, None));
        }
        let mut grad = chain.backward(params, &transforms, &g_rot, &g_trans);
        for k in 0..SHAPE_DIM {
            grad.shape[k] += g_shape[k] + 2.0 * w.regularization * params.shape[k];
        }
        for b in 1..NUM_PARTS {
            grad.pose[b] += params.pose[b] * (2.0 * w.regularization);
        }
        Ok((out, Some(grad)))
    }
}

fn regularization(params: &HandParams) -> f64 {
    params.articulation().iter().map(|t| t.norm_squared()).sum::<f64>() + params.shape.iter().map(|b| b * b).sum::<f64>()
}

/// Mean over points of `ĉ_i · |SDF_{b̂(i)}|`, with `|·|` smoothed.
pub fn loss_contact(object: &ObjectPoints, maps: &ContactGenMaps, params: &HandParams, model: &HandModel) -> Result<f64> {
    Objective::new(object, maps, model, LossWeights::default(), 0.0)?
        .evaluate(params)
        .map(|l| l.contact)
}

/// Mean over points of `(ĉ_i + δ)(1 − ⟨d̂_i, direction_{b̂(i)}(o_i)⟩)`, and the
/// number of points skipped because their direction is undefined.
pub fn loss_direction(
    object: &ObjectPoints,
    maps: &ContactGenMaps,
    params: &HandParams,
    model: &HandModel,
    delta: f64,
) -> Result<(f64, usize)> {
    Objective::new(object, maps, model, LossWeights::default(), delta)?
        .evaluate(params)
        .map(|l| (l.direction, l.skipped_directions))
}

/// Mean over points of `Σ_b max(−SDF_b, 0)`.
pub fn loss_penetration(object: &ObjectPoints, params: &HandParams, model: &HandModel) -> Result<f64> {
    let posed = model.pose(params);
    let mut total = 0.0;
    for p in &object.points {
        for b in 0..posed.part_count() {
            total += (-posed.part_sdf(p, b)?).max(0.0);
        }
    }
    Ok(total / object.len() as f64)
}

/// `‖θ_1..‖² + ‖β‖²`; the global orientation is not penalized.
pub fn loss_reg(params: &HandParams) -> f64 {
    regularization(params)
}
