use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use contactgen::cvae::{checkpoint_epoch, sample_contactgen, train_model, CvaeModel};
use contactgen::eval::{
    diversity_metrics, format_table, mesh_metrics, simulation_displacement, write_report_csv, write_summary_csv, EvalRow,
    GraspSetReport, PhysicsProbe, ProcessEngine, SimulationEngine,
};
use contactgen::geometry::io::{read_mesh, write_mesh};
use contactgen::geometry::{sample_surface_points, TriangleMesh};
use contactgen::hand::{default_hand, HandModel};
use contactgen::repr::{derive_seed, make_synthetic_dataset, read_maps, write_maps, GraspSample};
use contactgen::solver::{solve, write_trace_csv};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::files::{read_params, read_points, write_params, write_points, DatasetManifest, Record, Split};
use crate::Invalid;

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))
}

pub fn make_data(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let hand = default_hand();
    let specs = cfg.shape_specs()?;
    for sub in ["objects", "points", "maps", "hands"] {
        create_dir(&out.join(sub))?;
    }
    cfg.echo_into(out)?;
    let data = make_synthetic_dataset(&specs, cfg.dataset.grasps_per_object, cfg.seed, cfg.dataset.points, &hand)?;
    if data.skipped > 0 {
        log::warn!("{} grasps failed to close and were skipped", data.skipped);
    }
    let every = cfg.dataset.test_every;
    let mut records = Vec::with_capacity(data.samples.len());
    for (i, s) in data.samples.iter().enumerate() {
        let id = format!("sample-{i:03}");
        let r = Record {
            id: id.clone(),
            split: if every > 0 && i % every == every - 1 { Split::Test } else { Split::Train },
            object_mesh: PathBuf::from(format!("objects/{id}.obj")),
            points: Some(PathBuf::from(format!("points/{id}.xyzn"))),
            maps: Some(PathBuf::from(format!("maps/{id}.cgmaps"))),
            hand_params: Some(PathBuf::from(format!("hands/{id}.toml"))),
            hand_mesh: Some(PathBuf::from(format!("hands/{id}.obj"))),
        };
        write_mesh(&s.object_mesh, out.join(&r.object_mesh))?;
        write_points(&s.object, &out.join(r.points.as_ref().unwrap()))?;
        write_maps(&s.maps, out.join(r.maps.as_ref().unwrap()))?;
        write_params(&s.hand, &out.join(r.hand_params.as_ref().unwrap()))?;
        write_mesh(&hand.pose(&s.hand).template_mesh(), out.join(r.hand_mesh.as_ref().unwrap()))?;
        records.push(r);
    }
    let manifest = DatasetManifest { seed: cfg.seed, records };
    manifest.save(&out.join("manifest.toml"))?;
    log::info!("wrote {} samples to {}", manifest.records.len(), out.display());
    Ok(())
}

fn load_sample(base: &Path, r: &Record) -> Result<GraspSample> {
    let need = |p: &Option<PathBuf>, what: &str| -> Result<PathBuf> {
        p.as_ref()
            .map(|p| base.join(p))
            .ok_or_else(|| Invalid(format!("training record {} has no {what}", r.id)).into())
    };
    let object = read_points(&need(&r.points, "points")?)?;
    let maps = read_maps(need(&r.maps, "maps")?)?;
    if maps.len() != object.len() {
        bail!(Invalid(format!("record {}: {} map rows for {} points", r.id, maps.len(), object.len())));
    }
    Ok(GraspSample {
        object,
        object_mesh: read_mesh(base.join(&r.object_mesh))?,
        hand: read_params(&need(&r.hand_params, "hand parameters")?)?,
        maps,
    })
}

pub fn train(cfg: &ExperimentConfig, out: &Path, resume: Option<&Path>) -> Result<()> {
    let manifest_path = cfg
        .dataset
        .manifest
        .as_deref()
        .ok_or_else(|| Invalid("no dataset: pass --manifest or set dataset.manifest".into()))?;
    let (manifest, base) = DatasetManifest::load(manifest_path)?;
    let records: Vec<&Record> = manifest.records.iter().filter(|r| r.split == Split::Train).collect();
    if records.is_empty() {
        bail!(Invalid(format!("{} has no train records", manifest_path.display())));
    }
    let samples = records.iter().map(|r| load_sample(&base, r)).collect::<Result<Vec<_>>>()?;

    let (model, start) = match resume {
        Some(path) => {
            if !path.is_file() {
                bail!(Invalid(format!("checkpoint {} does not exist", path.display())));
            }
            let (model, echo) = CvaeModel::load(path)?;
            let done = checkpoint_epoch(&echo)
                .ok_or_else(|| Invalid(format!("checkpoint {} does not record its epoch", path.display())))?;
            if done >= cfg.train.epochs {
                bail!(Invalid(format!("checkpoint already has {done} of {} epochs", cfg.train.epochs)));
            }
            (model, done)
        }
        None => (CvaeModel::new(cfg.arch())?, 0),
    };
    let min_points = model.arch().backbone.sa1_points;
    if let Some(s) = samples.iter().find(|s| s.object.len() < min_points) {
        bail!(Invalid(format!("{} has {} points; the network needs at least {min_points}", s.object.source, s.object.len())));
    }

    create_dir(out)?;
    cfg.echo_into(out)?;
    let mut tc = cfg.train_config(Some(out.join("checkpoints")), Some(out.join("metrics.csv")))?;
    tc.start_epoch = start;
    log::info!("training on {} samples, epochs {start}..{}", samples.len(), tc.epochs);
    let hand = default_hand();
    let (_, report) = train_model(model, &samples, &hand, &tc)?;
    if let (Some(first), Some(last)) = (report.epochs.first(), report.epochs.last()) {
        log::info!("reconstruction loss {:.4} -> {:.4}", first.recon, last.recon);
    }
    log::info!("final checkpoint {}", out.join("checkpoints/final.cgcvae").display());
    Ok(())
}

/// Where a results directory came from.
#[derive(Debug, Serialize, Deserialize)]
struct Source {
    object: PathBuf,
    checkpoint: PathBuf,
    count: usize,
    seed: u64,
}

const SUMMARY_HEADER: &str = "sample,seed,status,contact,direction,penetration,regularization,total,message";

pub fn sample_solve(cfg: &ExperimentConfig, object: &Path, checkpoint: &Path, count: usize, out: &Path) -> Result<()> {
    for (what, p) in [("object mesh", object), ("checkpoint", checkpoint)] {
        if !p.is_file() {
            bail!(Invalid(format!("{what} {} does not exist", p.display())));
        }
    }
    let (model, _) = CvaeModel::load(checkpoint)?;
    let mesh = read_mesh(object)?;
    let points = sample_surface_points(&mesh, cfg.dataset.points, derive_seed(cfg.seed, 0))?;
    let min_points = model.arch().backbone.sa1_points;
    if points.len() < min_points {
        bail!(Invalid(format!("dataset.points is {}; the network needs at least {min_points}", points.len())));
    }
    let solver = cfg.solver_config();
    let hand = default_hand();

    create_dir(out)?;
    cfg.echo_into(out)?;
    let source = Source {
        object: std::fs::canonicalize(object)?,
        checkpoint: std::fs::canonicalize(checkpoint)?,
        count,
        seed: cfg.seed,
    };
    std::fs::write(out.join("source.toml"), toml::to_string(&source)?)?;
    write_mesh(&mesh, out.join("object.obj"))?;
    write_points(&points, &out.join("points.xyzn"))?;

    let mut summary = String::from(SUMMARY_HEADER);
    summary.push('\n');
    let mut failures = 0;
    for i in 0..count {
        let id = format!("sample-{i:03}");
        let seed = derive_seed(cfg.seed, i as u64 + 1);
        let dir = out.join(&id);
        create_dir(&dir)?;
        let outcome = sample_contactgen(&points, &model, seed)
            .map_err(anyhow::Error::from)
            .and_then(|maps| {
                write_maps(&maps, dir.join("maps.cgmaps"))?;
                Ok(solve(&points, &maps, &hand, &solver, None)?)
            });
        match outcome {
            Ok(r) => {
                write_mesh(&r.mesh, dir.join("hand.obj"))?;
                write_params(&r.params, &dir.join("params.toml"))?;
                write_trace_csv(&r.trace, dir.join("trace.csv"))?;
                let l = r.losses;
                let status = if r.failed { "failed" } else { "ok" };
                failures += usize::from(r.failed);
                writeln!(
                    summary,
                    "{id},{seed},{status},{},{},{},{},{},",
                    l.contact, l.direction, l.penetration, l.regularization, l.total
                )?;
                log::info!("{id}: {status}, objective {:.6}", l.total);
            }
            Err(e) => {
                failures += 1;
                log::warn!("{id}: {e:#}");
                let msg = format!("{e:#}").replace([',', '\n'], ";");
                writeln!(summary, "{id},{seed},failed,,,,,,{msg}")?;
            }
        }
    }
    std::fs::write(out.join("summary.csv"), summary)?;
    log::info!("{count} samples, {failures} failed, written to {}", out.display());
    Ok(())
}

struct SolvedRow {
    id: String,
    failed: bool,
    hand: Option<TriangleMesh>,
    keypoints: Option<Vec<f64>>,
}

fn read_results(results: &Path, hand: &HandModel) -> Result<Vec<SolvedRow>> {
    let path = results.join("summary.csv");
    let text = std::fs::read_to_string(&path).map_err(|_| Invalid(format!("{} has no summary.csv", results.display())))?;
    let mut rows = Vec::new();
    for line in text.lines().skip(1).filter(|l| !l.is_empty()) {
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() < 3 {
            bail!("{}: malformed row {line:?}", path.display());
        }
        let params_path = results.join(cols[0]).join("params.toml");
        let (mesh, keypoints) = if params_path.is_file() {
            let posed = hand.pose(&read_params(&params_path)?);
            let kp = posed.keypoints().iter().flat_map(|k| [k.x, k.y, k.z]).collect();
            (Some(posed.template_mesh()), Some(kp))
        } else {
            (None, None)
        };
        rows.push(SolvedRow {
            id: cols[0].to_string(),
            failed: cols[2] != "ok",
            hand: mesh,
            keypoints,
        });
    }
    Ok(rows)
}

/// Ground-truth hand for the results' object, looked up by mesh path.
fn ground_truth(results: &Path, manifest: &Path, hand: &HandModel) -> Result<Option<TriangleMesh>> {
    let source: Source = toml::from_str(&std::fs::read_to_string(results.join("source.toml"))?)?;
    let (m, base) = DatasetManifest::load(manifest)?;
    for r in &m.records {
        let same = std::fs::canonicalize(base.join(&r.object_mesh)).is_ok_and(|p| p == source.object);
        if let (true, Some(params)) = (same, &r.hand_params) {
            return Ok(Some(hand.pose(&read_params(&base.join(params))?).template_mesh()));
        }
    }
    Ok(None)
}

pub fn eval(
    cfg: &ExperimentConfig,
    results: &Path,
    manifest: Option<&Path>,
    adapter: Option<&Path>,
    out: &Path,
) -> Result<()> {
    if !results.is_dir() {
        bail!(Invalid(format!("results directory {} does not exist", results.display())));
    }
    let hand = default_hand();
    let solved = read_results(results, &hand)?;
    if solved.is_empty() {
        bail!(Invalid(format!("{} holds no results", results.display())));
    }
    let object = read_mesh(results.join("object.obj"))?;
    let gt = match manifest {
        Some(m) => ground_truth(results, m, &hand)?,
        None => None,
    };
    if gt.is_none() {
        log::warn!("no ground-truth grasp for this object; mesh metric columns omitted");
    }
    let engine = match adapter {
        Some(p) => {
            if !p.is_file() {
                bail!(Invalid(format!("engine adapter {} does not exist", p.display())));
            }
            let work = out.join("simulation");
            create_dir(&work)?;
            Some(ProcessEngine::new(p, work))
        }
        None => {
            log::info!("no engine adapter; simulation displacement unavailable");
            None
        }
    };
    let sim_cfg = cfg.simulation();
    let probe = PhysicsProbe::new(&object, cfg.metrics.penetration_voxel, cfg.metrics.contact_threshold)?;

    let mut rows = Vec::new();
    for s in &solved {
        let Some(mesh) = &s.hand else {
            log::warn!("{}: no solved hand, left out of the report", s.id);
            continue;
        };
        let physics = probe.measure(mesh)?;
        let simulation_cm = match &engine {
            Some(e) => simulation_displacement(mesh, &object, Some(e as &dyn SimulationEngine), &sim_cfg)
                .unwrap_or_else(|err| {
                    log::warn!("{}: simulation failed: {err}", s.id);
                    None
                }),
            None => None,
        };
        rows.push(EvalRow {
            sample: s.id.clone(),
            failed: s.failed,
            mesh: gt.as_ref().map(|g| mesh_metrics(mesh, g)).transpose()?,
            penetration_cm3: physics.penetration_cm3,
            in_contact: physics.in_contact,
            simulation_cm,
        });
    }
    if rows.is_empty() {
        bail!("no result in {} has a solved hand", results.display());
    }
    let mut summary = GraspSetReport::from_rows(&rows);
    let keypoints: Vec<Vec<f64>> = solved.iter().filter(|s| !s.failed).filter_map(|s| s.keypoints.clone()).collect();
    if !keypoints.is_empty() {
        let k = cfg.metrics.clusters.min(keypoints.len());
        let d = diversity_metrics(&keypoints, k, cfg.metrics.restarts, cfg.seed)?;
        summary.entropy = Some(d.entropy);
        summary.cluster_size = Some(d.cluster_size);
    }

    create_dir(out)?;
    if out != results {
        cfg.echo_into(out)?;
    }
    write_report_csv(&rows, out.join("eval.csv"))?;
    write_summary_csv(&summary, out.join("eval_summary.csv"))?;
    print!("{}", format_table(&rows, &summary));
    Ok(())
}
