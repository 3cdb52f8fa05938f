use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use super::mesh::MeshMetricReport;
use crate::error::Result;

/// Metrics of one solved grasp.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub sample: String,
    pub failed: bool,
    /// Present when a ground-truth hand is known.
    pub mesh: Option<MeshMetricReport>,
    pub penetration_cm3: f64,
    pub in_contact: bool,
    /// `None` when no simulation engine is available.
    pub simulation_cm: Option<f64>,
}

/// Aggregates over a set of grasps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GraspSetReport {
    pub penetration_cm3: f64,
    pub contact_ratio: f64,
    pub simulation_cm: Option<f64>,
    pub entropy: Option<f64>,
    pub cluster_size: Option<f64>,
}

pub const UNAVAILABLE: &str = "unavailable";

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| UNAVAILABLE.to_string(), |x| format!("{x:.6}"))
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for v in values {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

impl GraspSetReport {
    /// Physical aggregates of `rows`; diversity is filled in separately.
    pub fn from_rows(rows: &[EvalRow]) -> Self {
        let n = rows.len().max(1) as f64;
        // the simulation column is only reported when every grasp has it
        let simulation_cm = if rows.is_empty() || rows.iter().any(|r| r.simulation_cm.is_none()) {
            None
        } else {
            mean(rows.iter().filter_map(|r| r.simulation_cm))
        };
        Self {
            penetration_cm3: rows.iter().map(|r| r.penetration_cm3).sum::<f64>() / n,
            contact_ratio: rows.iter().filter(|r| r.in_contact).count() as f64 / n,
            simulation_cm,
            entropy: None,
            cluster_size: None,
        }
    }
}

/// Per-grasp CSV. The mesh metric columns are left out entirely when no
/// row has a ground-truth comparison.
pub fn write_report_csv(rows: &[EvalRow], path: impl AsRef<Path>) -> Result<()> {
    let with_mesh = rows.iter().any(|r| r.mesh.is_some());
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    if with_mesh {
        writeln!(f, "sample,status,epe_cm,auc,f_5mm,f_15mm,penetration_cm3,in_contact,simulation_cm")?;
    } else {
        writeln!(f, "sample,status,penetration_cm3,in_contact,simulation_cm")?;
    }
    for r in rows {
        write!(f, "{},{},", r.sample, if r.failed { "failed" } else { "ok" })?;
        if with_mesh {
            let m = |g: fn(&MeshMetricReport) -> f64| opt(r.mesh.as_ref().map(g));
            write!(f, "{},{},{},{},", m(|x| x.epe_cm), m(|x| x.auc), m(|x| x.f_5mm), m(|x| x.f_15mm))?;
        }
        writeln!(f, "{:.6},{},{}", r.penetration_cm3, u8::from(r.in_contact), opt(r.simulation_cm))?;
    }
    f.flush()?;
    Ok(())
}

pub fn write_summary_csv(summary: &GraspSetReport, path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "metric,value")?;
    writeln!(f, "penetration_cm3,{:.6}", summary.penetration_cm3)?;
    writeln!(f, "contact_ratio,{:.6}", summary.contact_ratio)?;
    writeln!(f, "simulation_cm,{}", opt(summary.simulation_cm))?;
    writeln!(f, "entropy,{}", opt(summary.entropy))?;
    writeln!(f, "cluster_size,{}", opt(summary.cluster_size))?;
    f.flush()?;
    Ok(())
}

/// Fixed-width table of the rows followed by the aggregates.
pub fn format_table(rows: &[EvalRow], summary: &GraspSetReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "{:<24} {:>7} {:>8} {:>6} {:>6} {:>6} {:>9} {:>7} {:>12}",
        "sample", "status", "EPE cm", "AUC", "F@5", "F@15", "pen cm3", "contact", "sim cm"
    );
    let cell = |v: Option<f64>, w: usize, p: usize| match v {
        Some(x) => format!("{x:>w$.p$}"),
        None => format!("{:>w$}", "-"),
    };
    for r in rows {
        let m = r.mesh.as_ref();
        let _ = writeln!(
            s,
            "{:<24} {:>7} {} {} {} {} {:>9.3} {:>7} {}",
            r.sample,
            if r.failed { "failed" } else { "ok" },
            cell(m.map(|x| x.epe_cm), 8, 2),
            cell(m.map(|x| x.auc), 6, 3),
            cell(m.map(|x| x.f_5mm), 6, 3),
            cell(m.map(|x| x.f_15mm), 6, 3),
            r.penetration_cm3,
            if r.in_contact { "yes" } else { "no" },
            r.simulation_cm.map_or_else(|| format!("{UNAVAILABLE:>12}"), |x| format!("{x:>12.3}"))
        );
    }
    let _ = writeln!(s);
    let _ = writeln!(s, "penetration volume  {:.3} cm3", summary.penetration_cm3);
    let _ = writeln!(s, "contact ratio       {:.3}", summary.contact_ratio);
    let _ = writeln!(s, "simulation disp.    {}", opt(summary.simulation_cm));
    let _ = writeln!(s, "entropy             {}", opt(summary.entropy));
    let _ = writeln!(s, "cluster size        {}", opt(summary.cluster_size));
    s
}
