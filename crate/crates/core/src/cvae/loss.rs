use super::model::{LatentGaussian, LATENT_DIM};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::repr::{ContactGenMaps, CONTACT_FLOOR};

/// Smoothing in the direction-head normalization `r / √(‖r‖² + ε²)`.
pub const DIRECTION_EPS: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    /// Weight of the part cross-entropy.
    pub part_weight: f64,
    pub direction_weight: f64,
    /// Floor `δ` in `W_C = C + δ`.
    pub delta: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            part_weight: 0.5,
            direction_weight: 1.0,
            delta: CONTACT_FLOOR,
        }
    }
}

/// Raw decoder outputs for one object: contact after the sigmoid, part
/// logits, unnormalized directions.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderOutputs {
    pub contact: Vec<f64>,
    pub part_logits: Vec<Vec<f64>>,
    pub direction_raw: Vec<Vec3>,
}

/// Per-point means of `W_C·|C − Ĉ|`, `W_C·CE` and `W_C·(1 − cos)`, and
/// their weighted sum.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ReconTerms {
    pub contact: f64,
    pub part: f64,
    pub direction: f64,
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LossReport {
    pub recon: ReconTerms,
    /// Sum of the three KL terms.
    pub kl: f64,
    pub kl_weight: f64,
    pub total: f64,
}

pub(crate) struct ReconGrad {
    pub contact: Vec<f64>,
    pub part_logits: Vec<Vec<f64>>,
    pub direction_raw: Vec<Vec3>,
}

/// KL divergence of a diagonal Gaussian from the standard normal.
pub fn kl_divergence(g: &LatentGaussian) -> f64 {
    (0..LATENT_DIM)
        .map(|i| 0.5 * (g.mean[i] * g.mean[i] + g.log_var[i].exp() - 1.0 - g.log_var[i]))
        .sum()
}

/// Gradient of [`kl_divergence`] with respect to mean and log-variance.
pub(crate) fn kl_gradient(g: &LatentGaussian) -> ([f64; LATENT_DIM], [f64; LATENT_DIM]) {
    let mut dm = [0.0; LATENT_DIM];
    let mut dv = [0.0; LATENT_DIM];
    for i in 0..LATENT_DIM {
        dm[i] = g.mean[i];
        dv[i] = 0.5 * (g.log_var[i].exp() - 1.0);
    }
    (dm, dv)
}

fn check_shapes(gt: &ContactGenMaps, out: &DecoderOutputs) -> Result<()> {
    let n = gt.len();
    if out.contact.len() != n || out.part_logits.len() != n || out.direction_raw.len() != n {
        return Err(Error::ShapeMismatch(format!(
            "decoder outputs ({}, {}, {}) for {n} points",
            out.contact.len(),
            out.part_logits.len(),
            out.direction_raw.len()
        )));
    }
    if let Some(row) = out.part_logits.iter().find(|r| r.len() != gt.part_count) {
        return Err(Error::ShapeMismatch(format!("{} part logits, expected {}", row.len(), gt.part_count)));
    }
    if n == 0 {
        return Err(Error::InvalidArgument("empty map".into()));
    }
    Ok(())
}

pub(crate) fn recon_with_grad(gt: &ContactGenMaps, out: &DecoderOutputs, cfg: &LossConfig) -> Result<(ReconTerms, ReconGrad)> {
    check_shapes(gt, out)?;
    let n = gt.len();
    let inv_n = 1.0 / n as f64;
    let mut terms = ReconTerms::default();
    let mut grad = ReconGrad {
        contact: vec![0.0; n],
        part_logits: Vec::with_capacity(n),
        direction_raw: vec![Vec3::zeros(); n],
    };
    for i in 0..n {
        let c = gt.contact[i];
        let w = c + cfg.delta;

        let diff = out.contact[i] - c;
        terms.contact += w * diff.abs();
        let sign = if diff > 0.0 { 1.0 } else if diff < 0.0 { -1.0 } else { 0.0 };
        grad.contact[i] = w * sign * inv_n;

        let logits = &out.part_logits[i];
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = logits.iter().map(|l| (l - max).exp()).sum();
        let log_z = max + sum.ln();
        terms.part += w * (log_z - logits[gt.parts[i]]);
        let k = w * cfg.part_weight * inv_n;
        let mut g: Vec<f64> = logits.iter().map(|l| k * (l - log_z).exp()).collect();
        g[gt.parts[i]] -= k;
        grad.part_logits.push(g);

        let r = out.direction_raw[i];
        let d = gt.directions[i];
        let s = (r.norm_squared() + DIRECTION_EPS * DIRECTION_EPS).sqrt();
        let dot = d.dot(&r);
        terms.direction += w * (1.0 - dot / s);
        grad.direction_raw[i] = -(w * cfg.direction_weight * inv_n) * (d / s - r * (dot / (s * s * s)));
    }
    terms.contact *= inv_n;
    terms.part *= inv_n;
    terms.direction *= inv_n;
    terms.total = terms.contact + cfg.part_weight * terms.part + cfg.direction_weight * terms.direction;
    Ok((terms, grad))
}

pub fn reconstruction_loss(gt: &ContactGenMaps, out: &DecoderOutputs, cfg: &LossConfig) -> Result<ReconTerms> {
    recon_with_grad(gt, out, cfg).map(|(t, _)| t)
}

/// `L_rec + kl_weight · Σ KL` for the contact, part and direction codes.
pub fn cvae_loss(
    gt: &ContactGenMaps,
    out: &DecoderOutputs,
    gaussians: &[LatentGaussian; 3],
    cfg: &LossConfig,
    kl_weight: f64,
) -> Result<LossReport> {
    let recon = reconstruction_loss(gt, out, cfg)?;
    let kl: f64 = gaussians.iter().map(kl_divergence).sum();
    Ok(LossReport {
        recon,
        kl,
        kl_weight,
        total: recon.total + kl_weight * kl,
    })
}
