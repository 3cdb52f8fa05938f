use crate::error::{Error, Result};
use crate::geometry::{TriangleMesh, Vec3};

/// Upper end of the AUC threshold range, meters.
pub const AUC_MAX_THRESHOLD: f64 = 0.05;
pub const AUC_STEPS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshMetricReport {
    /// Mean per-vertex distance, centimeters.
    pub epe_cm: f64,
    pub auc: f64,
    pub f_5mm: f64,
    pub f_15mm: f64,
}

/// Mean distance between corresponding vertices, meters.
pub fn vertex_error(pred: &TriangleMesh, gt: &TriangleMesh) -> Result<f64> {
    if pred.vertices.len() != gt.vertices.len() || pred.vertices.is_empty() {
        return Err(Error::ShapeMismatch(format!(
            "meshes hold {} and {} vertices; vertex errors need matching topology",
            pred.vertices.len(),
            gt.vertices.len()
        )));
    }
    let sum: f64 = pred.vertices.iter().zip(&gt.vertices).map(|(a, b)| (a - b).norm()).sum();
    Ok(sum / pred.vertices.len() as f64)
}

/// Fraction of corresponding vertices within `threshold`, averaged over
/// `AUC_STEPS` thresholds evenly spaced in `(0, AUC_MAX_THRESHOLD]`.
pub fn pck_auc(pred: &TriangleMesh, gt: &TriangleMesh) -> Result<f64> {
    vertex_error(pred, gt)?;
    let d: Vec<f64> = pred.vertices.iter().zip(&gt.vertices).map(|(a, b)| (a - b).norm()).collect();
    let mut total = 0.0;
    for k in 1..=AUC_STEPS {
        let t = AUC_MAX_THRESHOLD * k as f64 / AUC_STEPS as f64;
        total += d.iter().filter(|&&v| v <= t).count() as f64 / d.len() as f64;
    }
    Ok(total / AUC_STEPS as f64)
}

/// Distance from each point of `from` to its nearest point in `to`.
pub fn nearest_distances(from: &[Vec3], to: &[Vec3]) -> Vec<f64> {
    from.iter()
        .map(|p| to.iter().map(|q| (p - q).norm_squared()).fold(f64::INFINITY, f64::min).sqrt())
        .collect()
}

/// Harmonic mean of vertex precision and recall at `threshold`, using
/// nearest neighbors in both directions.
pub fn f_score(pred: &TriangleMesh, gt: &TriangleMesh, threshold: f64) -> f64 {
    f_score_from(&nearest_distances(&pred.vertices, &gt.vertices), &nearest_distances(&gt.vertices, &pred.vertices), threshold)
}

fn f_score_from(pred_to_gt: &[f64], gt_to_pred: &[f64], threshold: f64) -> f64 {
    let frac = |d: &[f64]| {
        if d.is_empty() {
            0.0
        } else {
            d.iter().filter(|&&v| v <= threshold).count() as f64 / d.len() as f64
        }
    };
    let precision = frac(pred_to_gt);
    let recall = frac(gt_to_pred);
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

pub fn mesh_metrics(pred: &TriangleMesh, gt: &TriangleMesh) -> Result<MeshMetricReport> {
    let epe = vertex_error(pred, gt)?;
    let auc = pck_auc(pred, gt)?;
    let a = nearest_distances(&pred.vertices, &gt.vertices);
    let b = nearest_distances(&gt.vertices, &pred.vertices);
    Ok(MeshMetricReport {
        epe_cm: epe * 100.0,
        auc,
        f_5mm: f_score_from(&a, &b, 0.005),
        f_15mm: f_score_from(&a, &b, 0.015),
    })
}
