use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::loss::{kl_gradient, recon_with_grad, DecoderOutputs, LossConfig, LossReport};
use crate::binio::{Reader, Writer};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::nn::{DenseStack, Grouping, ParamId, ParamStore, PointNetConfig, PointNetPlusPlus, Tape, Tensor, Var};
use crate::repr::{ContactGenMaps, ObjectPoints};

pub const LATENT_DIM: usize = 16;

const MAGIC: &[u8; 8] = b"CGCVAE\0\0";
const VERSION: u32 = 1;

/// Diagonal Gaussian over one latent code.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatentGaussian {
    pub mean: [f64; LATENT_DIM],
    pub log_var: [f64; LATENT_DIM],
}

impl LatentGaussian {
    pub fn standard() -> Self {
        Self {
            mean: [0.0; LATENT_DIM],
            log_var: [0.0; LATENT_DIM],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.mean.iter().chain(&self.log_var).all(|v| v.is_finite())
    }
}

/// `μ + exp(½·log σ²) ⊙ noise`.
pub fn reparameterize(g: &LatentGaussian, noise: &[f64; LATENT_DIM]) -> [f64; LATENT_DIM] {
    std::array::from_fn(|i| g.mean[i] + (0.5 * g.log_var[i]).exp() * noise[i])
}

pub fn standard_normal_latent(rng: &mut impl Rng) -> [f64; LATENT_DIM] {
    std::array::from_fn(|_| rng.sample(StandardNormal))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Factor {
    Contact,
    Part,
    Direction,
}

/// Ground-truth map handed to an encoder.
#[derive(Debug, Clone, Copy)]
pub enum Target<'a> {
    Contact(&'a [f64]),
    Part(&'a [usize]),
    Direction(&'a [Vec3]),
}

impl Target<'_> {
    pub fn factor(&self) -> Factor {
        match self {
            Target::Contact(_) => Factor::Contact,
            Target::Part(_) => Factor::Part,
            Target::Direction(_) => Factor::Direction,
        }
    }

    fn len(&self) -> usize {
        match self {
            Target::Contact(v) => v.len(),
            Target::Part(v) => v.len(),
            Target::Direction(v) => v.len(),
        }
    }
}

/// What the part and direction decoders are conditioned on.
#[derive(Debug, Clone, Copy)]
pub enum Conditioning<'a> {
    /// Ground-truth contact for the part decoder and ground-truth parts for
    /// the direction decoder.
    TeacherForced(&'a ContactGenMaps),
    /// The model's own contact and argmax parts.
    SelfConditioned,
}

/// Backbone output, N × feature width.
#[derive(Debug, Clone, PartialEq)]
pub struct PointFeatures {
    pub values: Tensor,
}

impl PointFeatures {
    pub fn len(&self) -> usize {
        self.values.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.values.nrows() == 0
    }

    pub fn dim(&self) -> usize {
        self.values.ncols()
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    pub maps: ContactGenMaps,
    pub outputs: DecoderOutputs,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CvaeArch {
    pub backbone: PointNetConfig,
    pub parts: usize,
    /// Initialization seed.
    pub seed: u64,
}

impl CvaeArch {
    pub fn full(parts: usize) -> Self {
        Self {
            backbone: PointNetConfig::default(),
            parts,
            seed: 0,
        }
    }

    /// Half-width network.
    pub fn desk(parts: usize) -> Self {
        let mut a = Self::full(parts);
        a.backbone.width = 0.5;
        a
    }

    pub fn validate(&self) -> Result<()> {
        self.backbone.validate()?;
        if self.parts < 2 {
            return Err(Error::InvalidArgument(format!("need at least two parts, got {}", self.parts)));
        }
        Ok(())
    }

    fn hidden(&self) -> usize {
        self.backbone.scaled(128)
    }

    fn narrow(&self) -> usize {
        self.backbone.scaled(64)
    }

    pub fn embedding_dim(&self) -> usize {
        self.backbone.scaled(64)
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Encoder {
    point: DenseStack,
    head: DenseStack,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvaeModel {
    arch: CvaeArch,
    store: ParamStore,
    backbone: PointNetPlusPlus,
    embedding: ParamId,
    encoders: [Encoder; 3],
    decoders: [DenseStack; 3],
}

pub(crate) struct TrainPass {
    pub report: LossReport,
    pub grads: Vec<Tensor>,
}

fn column(values: &[f64]) -> Tensor {
    Tensor::from_shape_fn((values.len(), 1), |(r, _)| values[r])
}

fn latent_of(tape: &Tape<'_>, mu: Var, lv: Var) -> LatentGaussian {
    LatentGaussian {
        mean: std::array::from_fn(|i| tape.value(mu)[[0, i]]),
        log_var: std::array::from_fn(|i| tape.value(lv)[[0, i]]),
    }
}

fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn unit_or_x(r: &Vec3) -> Vec3 {
    let n = r.norm();
    if n > 0.0 && n.is_finite() {
        r / n
    } else {
        Vec3::x()
    }
}

impl CvaeModel {
    pub fn new(arch: CvaeArch) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(arch.seed);
        let mut store = ParamStore::new();
        let backbone = PointNetPlusPlus::new(&mut store, "backbone", arch.backbone, &mut rng)?;
        let f = arch.backbone.feature_dim();
        let (h, m, e) = (arch.hidden(), arch.narrow(), arch.embedding_dim());
        let embedding = store.add(
            "part_embedding",
            Tensor::from_shape_fn((arch.parts, e), |_| rng.sample::<f64, _>(StandardNormal)),
        );
        let mut encoder = |name: &str, extra: usize| Encoder {
            point: DenseStack::new(&mut store, &format!("{name}.point"), &[f + extra, h, h], true, &mut rng),
            head: DenseStack::new(&mut store, &format!("{name}.head"), &[h, m, 2 * LATENT_DIM], false, &mut rng),
        };
        let encoders = [encoder("enc_contact", 1), encoder("enc_part", e), encoder("enc_direction", 3)];
        let z = LATENT_DIM;
        let decoders = [
            DenseStack::new(&mut store, "dec_contact", &[f + z, h, m, 1], false, &mut rng),
            DenseStack::new(&mut store, "dec_part", &[f + z + 1, h, m, arch.parts], false, &mut rng),
            DenseStack::new(&mut store, "dec_direction", &[f + z + e, h, m, 3], false, &mut rng),
        ];
        Ok(Self {
            arch,
            store,
            backbone,
            embedding,
            encoders,
            decoders,
        })
    }

    pub fn arch(&self) -> &CvaeArch {
        &self.arch
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn grouping(&self, object: &ObjectPoints) -> Result<Grouping> {
        Grouping::new(&object.points, &self.arch.backbone)
    }

    fn check_object(&self, object: &ObjectPoints) -> Result<()> {
        if object.points.len() != object.normals.len() {
            return Err(Error::ShapeMismatch("points and normals differ in length".into()));
        }
        Ok(())
    }

    pub fn extract_features(&self, object: &ObjectPoints) -> Result<PointFeatures> {
        self.check_object(object)?;
        let grouping = self.grouping(object)?;
        let mut tape = Tape::new(&self.store);
        let v = self.backbone.forward(&mut tape, &object.points, &object.normals, &grouping);
        Ok(PointFeatures {
            values: tape.value(v).clone(),
        })
    }

    fn check_labels(&self, labels: &[usize]) -> Result<()> {
        match labels.iter().find(|&&p| p >= self.arch.parts) {
            Some(&label) => Err(Error::PartLabelOutOfRange {
                label,
                parts: self.arch.parts,
            }),
            None => Ok(()),
        }
    }

    fn encode_var(&self, tape: &mut Tape<'_>, feats: Var, n: usize, target: &Target<'_>) -> Result<(Var, Var)> {
        if target.len() != n {
            return Err(Error::ShapeMismatch(format!("target holds {} points, features {n}", target.len())));
        }
        let (enc, input) = match target {
            Target::Contact(c) => (&self.encoders[0], tape.constant(column(c))),
            Target::Part(p) => {
                self.check_labels(p)?;
                let table = tape.param(self.embedding);
                (&self.encoders[1], tape.gather(table, p.to_vec()))
            }
            Target::Direction(d) => (&self.encoders[2], tape.constant(Tensor::from_shape_fn((n, 3), |(r, c)| d[r][c]))),
        };
        let x = tape.concat(&[feats, input]);
        let x = enc.point.forward(tape, x);
        let pooled = tape.group_max(x, n);
        let out = enc.head.forward(tape, pooled);
        let mu = tape.columns(out, 0, LATENT_DIM);
        let lv = tape.columns(out, LATENT_DIM, LATENT_DIM);
        Ok((mu, lv))
    }

    fn decode_contact_var(&self, tape: &mut Tape<'_>, feats: Var, z: Var, n: usize) -> Var {
        let zr = tape.repeat(z, n);
        let x = tape.concat(&[feats, zr]);
        let logit = self.decoders[0].forward(tape, x);
        tape.sigmoid(logit)
    }

    fn decode_part_var(&self, tape: &mut Tape<'_>, feats: Var, z: Var, contact: &[f64]) -> Var {
        let zr = tape.repeat(z, contact.len());
        let c = tape.constant(column(contact));
        let x = tape.concat(&[feats, zr, c]);
        self.decoders[1].forward(tape, x)
    }

    fn decode_direction_var(&self, tape: &mut Tape<'_>, feats: Var, z: Var, labels: &[usize]) -> Var {
        let zr = tape.repeat(z, labels.len());
        let table = tape.param(self.embedding);
        let emb = tape.gather(table, labels.to_vec());
        let x = tape.concat(&[feats, zr, emb]);
        self.decoders[2].forward(tape, x)
    }

    fn check_features(&self, features: &PointFeatures) -> Result<()> {
        if features.dim() != self.arch.backbone.feature_dim() {
            return Err(Error::ShapeMismatch(format!(
                "features have width {}, model expects {}",
                features.dim(),
                self.arch.backbone.feature_dim()
            )));
        }
        Ok(())
    }

    pub fn encode(&self, features: &PointFeatures, target: Target<'_>) -> Result<LatentGaussian> {
        self.check_features(features)?;
        let mut tape = Tape::new(&self.store);
        let feats = tape.constant(features.values.clone());
        let (mu, lv) = self.encode_var(&mut tape, feats, features.len(), &target)?;
        Ok(latent_of(&tape, mu, lv))
    }

    /// Contact from `z_c`, then parts from `z_p` and a contact map, then
    /// directions from `z_d` and a part map.
    pub fn decode_sequential(
        &self,
        features: &PointFeatures,
        z_c: &[f64; LATENT_DIM],
        z_p: &[f64; LATENT_DIM],
        z_d: &[f64; LATENT_DIM],
        conditioning: Conditioning<'_>,
    ) -> Result<Decoded> {
        self.check_features(features)?;
        let n = features.len();
        if let Conditioning::TeacherForced(gt) = conditioning {
            if gt.len() != n || gt.part_count != self.arch.parts {
                return Err(Error::ShapeMismatch(format!(
                    "conditioning maps hold {} points and {} parts, expected {n} and {}",
                    gt.len(),
                    gt.part_count,
                    self.arch.parts
                )));
            }
        }
        let mut tape = Tape::new(&self.store);
        let feats = tape.constant(features.values.clone());
        let latent = |tape: &mut Tape<'_>, z: &[f64; LATENT_DIM]| tape.constant(Tensor::from_shape_fn((1, LATENT_DIM), |(_, i)| z[i]));

        let zc = latent(&mut tape, z_c);
        let c = self.decode_contact_var(&mut tape, feats, zc, n);
        let contact: Vec<f64> = tape.value(c).column(0).to_vec();

        let zp = latent(&mut tape, z_p);
        let cond_c = match conditioning {
            Conditioning::TeacherForced(gt) => &gt.contact,
            Conditioning::SelfConditioned => &contact,
        };
        let logits_v = self.decode_part_var(&mut tape, feats, zp, cond_c);
        let part_logits: Vec<Vec<f64>> = tape.value(logits_v).rows().into_iter().map(|r| r.to_vec()).collect();
        let parts: Vec<usize> = part_logits.iter().map(|r| argmax(r)).collect();

        let zd = latent(&mut tape, z_d);
        let cond_p = match conditioning {
            Conditioning::TeacherForced(gt) => &gt.parts,
            Conditioning::SelfConditioned => &parts,
        };
        let raw_v = self.decode_direction_var(&mut tape, feats, zd, cond_p);
        let direction_raw: Vec<Vec3> = tape.value(raw_v).rows().into_iter().map(|r| Vec3::new(r[0], r[1], r[2])).collect();

        if contact.iter().any(|v| !v.is_finite()) || direction_raw.iter().any(|d| !d.iter().all(|v| v.is_finite())) {
            return Err(Error::NonFinite("decoder output"));
        }
        let maps = ContactGenMaps::new(
            contact.iter().map(|c| c.clamp(0.0, 1.0)).collect(),
            parts,
            direction_raw.iter().map(unit_or_x).collect(),
            self.arch.parts,
        )?;
        Ok(Decoded {
            maps,
            outputs: DecoderOutputs {
                contact,
                part_logits,
                direction_raw,
            },
        })
    }

    /// One teacher-forced pass: loss, posteriors and parameter gradients.
    pub(crate) fn train_pass(
        &self,
        object: &ObjectPoints,
        grouping: &Grouping,
        maps: &ContactGenMaps,
        noise: &[[f64; LATENT_DIM]; 3],
        loss: &LossConfig,
        kl_weight: f64,
    ) -> Result<TrainPass> {
        self.check_object(object)?;
        let n = object.len();
        if maps.len() != n || maps.part_count != self.arch.parts {
            return Err(Error::ShapeMismatch(format!("maps hold {} points for an object of {n}", maps.len())));
        }
        let mut tape = Tape::new(&self.store);
        let feats = self.backbone.forward(&mut tape, &object.points, &object.normals, grouping);
        let targets = [
            Target::Contact(&maps.contact),
            Target::Part(&maps.parts),
            Target::Direction(&maps.directions),
        ];
        let mut moments = Vec::with_capacity(3);
        let mut codes = Vec::with_capacity(3);
        for (target, eps) in targets.iter().zip(noise) {
            let (mu, lv) = self.encode_var(&mut tape, feats, n, target)?;
            let half = tape.scale(lv, 0.5);
            let std = tape.exp(half);
            let e = tape.constant(Tensor::from_shape_fn((1, LATENT_DIM), |(_, i)| eps[i]));
            let spread = tape.mul(std, e);
            codes.push(tape.add(mu, spread));
            moments.push((mu, lv));
        }
        let c = self.decode_contact_var(&mut tape, feats, codes[0], n);
        let logits = self.decode_part_var(&mut tape, feats, codes[1], &maps.contact);
        let raw = self.decode_direction_var(&mut tape, feats, codes[2], &maps.parts);

        let outputs = DecoderOutputs {
            contact: tape.value(c).column(0).to_vec(),
            part_logits: tape.value(logits).rows().into_iter().map(|r| r.to_vec()).collect(),
            direction_raw: tape.value(raw).rows().into_iter().map(|r| Vec3::new(r[0], r[1], r[2])).collect(),
        };
        let (recon, g) = recon_with_grad(maps, &outputs, loss)?;
        let gaussians: [LatentGaussian; 3] = std::array::from_fn(|k| latent_of(&tape, moments[k].0, moments[k].1));
        let kl: f64 = gaussians.iter().map(super::loss::kl_divergence).sum();

        let b = self.arch.parts;
        let mut seeds = vec![
            (c, column(&g.contact)),
            (logits, Tensor::from_shape_fn((n, b), |(r, k)| g.part_logits[r][k])),
            (raw, Tensor::from_shape_fn((n, 3), |(r, k)| g.direction_raw[r][k])),
        ];
        for (k, (mu, lv)) in moments.iter().enumerate() {
            let (dm, dv) = kl_gradient(&gaussians[k]);
            seeds.push((*mu, Tensor::from_shape_fn((1, LATENT_DIM), |(_, i)| kl_weight * dm[i])));
            seeds.push((*lv, Tensor::from_shape_fn((1, LATENT_DIM), |(_, i)| kl_weight * dv[i])));
        }
        let grads = tape.backward(seeds);
        Ok(TrainPass {
            report: LossReport {
                recon,
                kl,
                kl_weight,
                total: recon.total + kl_weight * kl,
            },
            grads,
        })
    }

    /// Teacher-forced loss and its gradient over all parameters, flattened
    /// in storage order.
    pub fn loss_and_gradient(
        &self,
        object: &ObjectPoints,
        maps: &ContactGenMaps,
        noise: &[[f64; LATENT_DIM]; 3],
        loss: &LossConfig,
        kl_weight: f64,
    ) -> Result<(LossReport, Vec<f64>)> {
        let grouping = self.grouping(object)?;
        let pass = self.train_pass(object, &grouping, maps, noise, loss, kl_weight)?;
        let flat = pass.grads.iter().flat_map(|t| t.iter().copied()).collect();
        Ok((pass.report, flat))
    }

    /// Stores the architecture, a free-form configuration echo and all
    /// parameters.
    pub fn save(&self, path: impl AsRef<Path>, config_echo: &str) -> Result<()> {
        let mut w = Writer::new(BufWriter::new(File::create(path)?));
        w.bytes(MAGIC)?;
        w.u32(VERSION)?;
        let b = &self.arch.backbone;
        w.u32(b.sa1_points as u32)?;
        w.f64(b.sa1_radius)?;
        w.u32(b.sa2_points as u32)?;
        w.f64(b.sa2_radius)?;
        w.u32(b.neighbors as u32)?;
        w.f64(b.width)?;
        w.f64(b.coordinate_scale)?;
        w.u32(self.arch.parts as u32)?;
        w.u64(self.arch.seed)?;
        w.string(config_echo)?;
        self.store.write(&mut w)?;
        w.finish()?;
        Ok(())
    }

    /// Returns the model and the configuration echo it was saved with.
    pub fn load(path: impl AsRef<Path>) -> Result<(Self, String)> {
        let path = path.as_ref();
        let mut r = Reader::new(BufReader::new(File::open(path)?), path);
        r.expect_magic(MAGIC)?;
        let version = r.u32()?;
        if version != VERSION {
            return Err(r.err(format!("unsupported version {version}")));
        }
        let backbone = PointNetConfig {
            sa1_points: r.u32()? as usize,
            sa1_radius: r.f64()?,
            sa2_points: r.u32()? as usize,
            sa2_radius: r.f64()?,
            neighbors: r.u32()? as usize,
            width: r.f64()?,
            coordinate_scale: r.f64()?,
        };
        let arch = CvaeArch {
            backbone,
            parts: r.u32()? as usize,
            seed: r.u64()?,
        };
        arch.validate().map_err(|e| r.err(e.to_string()))?;
        let echo = r.string()?;
        let mut model = Self::new(arch)?;
        model.store.read_into(&mut r)?;
        r.expect_end()?;
        Ok((model, echo))
    }
}

/// Maps decoded from three independent standard-normal codes, each stage
/// conditioned on the previous stage's output.
pub fn sample_contactgen(object: &ObjectPoints, model: &CvaeModel, seed: u64) -> Result<ContactGenMaps> {
    let features = model.extract_features(object)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z_c = standard_normal_latent(&mut rng);
    let z_p = standard_normal_latent(&mut rng);
    let z_d = standard_normal_latent(&mut rng);
    Ok(model.decode_sequential(&features, &z_c, &z_p, &z_d, Conditioning::SelfConditioned)?.maps)
}
