use std::io::{BufRead, BufReader, Write};
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::geometry::io::write_obj;
use crate::geometry::{TriangleMesh, Vec3};

/// Settings sent to the engine. None of them come from a published setup;
/// they are plain defaults.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimulationConfig {
    /// Simulated time, seconds.
    pub horizon: f64,
    pub gravity: Vec3,
    pub friction: f64,
    /// Object density, kg/m³.
    pub density: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            gravity: Vec3::new(0.0, 0.0, -9.81),
            friction: 0.8,
            density: 1000.0,
        }
    }
}

/// A rigid-body engine that holds the hand fixed, lets the object fall under
/// gravity and reports the object's center of mass before and after.
pub trait SimulationEngine {
    fn object_com_path(&self, hand: &TriangleMesh, object: &TriangleMesh, cfg: &SimulationConfig) -> Result<(Vec3, Vec3)>;
}

/// Center-of-mass displacement in cm, or `None` when no engine is available.
pub fn simulation_displacement(
    hand: &TriangleMesh,
    object: &TriangleMesh,
    engine: Option<&dyn SimulationEngine>,
    cfg: &SimulationConfig,
) -> Result<Option<f64>> {
    let Some(engine) = engine else { return Ok(None) };
    let (start, end) = engine.object_com_path(hand, object, cfg)?;
    let d = (end - start).norm();
    if !d.is_finite() {
        return Err(Error::Adapter("engine reported a non-finite center of mass".into()));
    }
    Ok(Some(d * 100.0))
}

/// Returns a fixed center-of-mass path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MockEngine {
    pub start: Vec3,
    pub end: Vec3,
}

impl SimulationEngine for MockEngine {
    fn object_com_path(&self, _: &TriangleMesh, _: &TriangleMesh, _: &SimulationConfig) -> Result<(Vec3, Vec3)> {
        Ok((self.start, self.end))
    }
}

/// Runs an external program once per query.
///
/// The program reads these lines on stdin:
///
/// ```text
/// hand <obj path>
/// object <obj path>
/// horizon <seconds>
/// gravity <x> <y> <z>
/// friction <mu>
/// density <kg/m3>
/// run
/// ```
///
/// and answers with `start <x> <y> <z>` and `end <x> <y> <z>` lines on
/// stdout, or a line starting with `error`. Other lines are ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessEngine {
    pub program: PathBuf,
    pub args: Vec<String>,
    pub work_dir: PathBuf,
}

static QUERY: AtomicU64 = AtomicU64::new(0);

fn parse_point(rest: &[&str]) -> Result<Vec3> {
    if rest.len() != 3 {
        return Err(Error::Adapter(format!("expected three coordinates, got {rest:?}")));
    }
    let mut v = [0.0; 3];
    for (out, s) in v.iter_mut().zip(rest) {
        *out = s.parse().map_err(|_| Error::Adapter(format!("bad coordinate {s:?}")))?;
    }
    Ok(Vec3::from(v))
}

impl ProcessEngine {
    pub fn new(program: impl Into<PathBuf>, work_dir: impl Into<PathBuf>) -> Self {
        Self {
            program: program.into(),
            args: Vec::new(),
            work_dir: work_dir.into(),
        }
    }
}

impl SimulationEngine for ProcessEngine {
    fn object_com_path(&self, hand: &TriangleMesh, object: &TriangleMesh, cfg: &SimulationConfig) -> Result<(Vec3, Vec3)> {
        std::fs::create_dir_all(&self.work_dir)?;
        let id = QUERY.fetch_add(1, Ordering::Relaxed);
        let tag = format!("{}-{id}", std::process::id());
        let hand_path = self.work_dir.join(format!("sim-hand-{tag}.obj"));
        let object_path = self.work_dir.join(format!("sim-object-{tag}.obj"));
        write_obj(hand, &hand_path)?;
        write_obj(object, &object_path)?;

        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Adapter(format!("cannot start {:?}: {e}", self.program)))?;
        {
            let mut stdin = child.stdin.take().expect("piped stdin");
            let g = cfg.gravity;
            write!(
                stdin,
                "hand {}\nobject {}\nhorizon {}\ngravity {} {} {}\nfriction {}\ndensity {}\nrun\n",
                hand_path.display(),
                object_path.display(),
                cfg.horizon,
                g.x,
                g.y,
                g.z,
                cfg.friction,
                cfg.density
            )?;
        }
        let stdout = child.stdout.take().expect("piped stdout");
        let (mut start, mut end) = (None, None);
        let mut failure = None;
        for line in BufReader::new(stdout).lines() {
            let line = line?;
            let words: Vec<&str> = line.split_whitespace().collect();
            match words.first() {
                Some(&"start") => start = Some(parse_point(&words[1..])?),
                Some(&"end") => end = Some(parse_point(&words[1..])?),
                Some(&"error") => failure = Some(line.clone()),
                _ => {}
            }
        }
        let status = child.wait()?;
        let _ = std::fs::remove_file(&hand_path);
        let _ = std::fs::remove_file(&object_path);
        if let Some(msg) = failure {
            return Err(Error::Adapter(msg));
        }
        if !status.success() {
            return Err(Error::Adapter(format!("engine exited with {status}")));
        }
        match (start, end) {
            (Some(s), Some(e)) => Ok((s, e)),
            _ => Err(Error::Adapter("engine did not report start and end positions".into())),
        }
    }
}
