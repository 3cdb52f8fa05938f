//! Plain-text parameter file for analytic hands.
//!
//! ```text
//! contactgen-analytic-hand 1
//! parts 16
//! part 0 palm -1
//! rest <9 numbers, row-major>
//! offset <3 base> <30 coefficients, 3 per shape component>
//! anchor <3 base> <30 coefficients>
//! half_length <base> <10 coefficients>
//! radius <base> <10 coefficients>
//! ```

use std::fmt::Write as _;
use std::path::Path;

use super::capsule::{Capsule, CapsuleSet};
use super::chain::{Joint, KinematicChain};
use super::model::HandModel;
use super::params::{Affine, Affine3, SHAPE_DIM};
use super::sdf::PartSdfModel;
use crate::error::{Error, Result};
use crate::geometry::{Mat3, Vec3};

const HEADER: &str = "contactgen-analytic-hand 1";

fn push_affine(s: &mut String, a: &Affine) {
    write!(s, " {:e}", a.base).unwrap();
    for c in &a.coef {
        write!(s, " {c:e}").unwrap();
    }
}

fn push_affine3(s: &mut String, a: &Affine3) {
    for v in a.base.iter() {
        write!(s, " {v:e}").unwrap();
    }
    for c in &a.coef {
        for v in c.iter() {
            write!(s, " {v:e}").unwrap();
        }
    }
}

pub fn write_analytic_hand(model: &HandModel, path: impl AsRef<Path>) -> Result<()> {
    let PartSdfModel::Analytic(caps) = &model.sdf else {
        return Err(Error::InvalidArgument("only analytic hands have a text form".into()));
    };
    let mut s = String::new();
    writeln!(s, "{HEADER}").unwrap();
    writeln!(s, "parts {}", model.chain.len()).unwrap();
    for (b, (j, c)) in model.chain.joints().iter().zip(&caps.capsules).enumerate() {
        let parent = j.parent.map(|p| p as i64).unwrap_or(-1);
        writeln!(s, "part {b} {} {parent}", j.name).unwrap();
        s.push_str("rest");
        for r in 0..3 {
            for col in 0..3 {
                write!(s, " {:e}", j.rest_rotation[(r, col)]).unwrap();
            }
        }
        s.push_str("\noffset");
        push_affine3(&mut s, &j.offset);
        s.push_str("\nanchor");
        push_affine3(&mut s, &j.anchor);
        s.push_str("\nhalf_length");
        push_affine(&mut s, &c.half_length);
        s.push_str("\nradius");
        push_affine(&mut s, &c.radius);
        s.push('\n');
    }
    std::fs::write(path, s)?;
    Ok(())
}

pub fn read_analytic_hand(path: impl AsRef<Path>) -> Result<HandModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let err = |line: usize, d: &str| Error::format(path, format!("line {line}: {d}"));
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let mut next = |what: &str| -> Result<(usize, Vec<String>)> {
        let (i, l) = lines.next().ok_or_else(|| Error::format(path, format!("missing {what}")))?;
        Ok((i + 1, l.split_whitespace().map(str::to_owned).collect()))
    };
    let (ln, header) = next("header")?;
    if header.join(" ") != HEADER {
        return Err(err(ln, "bad header"));
    }
    let (ln, toks) = next("part count")?;
    let parts: usize = match toks.as_slice() {
        [k, n] if k == "parts" => n.parse().map_err(|_| err(ln, "bad part count"))?,
        _ => return Err(err(ln, "expected `parts <n>`")),
    };
    let nums = |ln: usize, toks: &[String], key: &str, n: usize| -> Result<Vec<f64>> {
        if toks.first().map(String::as_str) != Some(key) || toks.len() != n + 1 {
            return Err(err(ln, &format!("expected `{key}` with {n} values")));
        }
        toks[1..]
            .iter()
            .map(|t| t.parse::<f64>().map_err(|_| err(ln, &format!("bad number {t:?}"))))
            .collect()
    };
    let affine = |v: &[f64]| Affine {
        base: v[0],
        coef: std::array::from_fn(|k| v[1 + k]),
    };
    let affine3 = |v: &[f64]| Affine3 {
        base: Vec3::new(v[0], v[1], v[2]),
        coef: std::array::from_fn(|k| Vec3::new(v[3 + 3 * k], v[4 + 3 * k], v[5 + 3 * k])),
    };
    let mut joints = Vec::with_capacity(parts);
    let mut capsules = Vec::with_capacity(parts);
    for b in 0..parts {
        let (ln, toks) = next("part")?;
        let (name, parent) = match toks.as_slice() {
            [k, idx, name, parent] if k == "part" && idx.parse::<usize>().ok() == Some(b) => {
                let p: i64 = parent.parse().map_err(|_| err(ln, "bad parent"))?;
                (name.clone(), (p >= 0).then_some(p as usize))
            }
            _ => return Err(err(ln, &format!("expected `part {b} <name> <parent>`"))),
        };
        let (ln, toks) = next("rest")?;
        let r = nums(ln, &toks, "rest", 9)?;
        let (ln, toks) = next("offset")?;
        let offset = affine3(&nums(ln, &toks, "offset", 3 + 3 * SHAPE_DIM)?);
        let (ln, toks) = next("anchor")?;
        let anchor = affine3(&nums(ln, &toks, "anchor", 3 + 3 * SHAPE_DIM)?);
        let (ln, toks) = next("half_length")?;
        let half_length = affine(&nums(ln, &toks, "half_length", 1 + SHAPE_DIM)?);
        let (ln, toks) = next("radius")?;
        let radius = affine(&nums(ln, &toks, "radius", 1 + SHAPE_DIM)?);
        joints.push(Joint {
            name,
            parent,
            rest_rotation: Mat3::from_row_slice(&r),
            offset,
            anchor,
        });
        capsules.push(Capsule { half_length, radius });
    }
    HandModel::new(KinematicChain::new(joints)?, PartSdfModel::Analytic(CapsuleSet { capsules }))
}
