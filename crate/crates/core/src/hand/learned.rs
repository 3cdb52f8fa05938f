//! Learned per-part signed distance: one small perceptron per part, fed the
//! part-local query point and the global shape code.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::chain::KinematicChain;
use super::params::{HandParams, SHAPE_DIM};
use super::sdf::{PartSdf, SdfSample};
use crate::binio::{Reader, Writer};
use crate::error::{Error, Result};
use crate::geometry::{sample_with_faces, MeshDistance, TriangleMesh, Vec3};
use crate::optim::Adam;

const LEAKY_SLOPE: f64 = 0.1;
const INPUT_DIM: usize = 3 + SHAPE_DIM;
const MAGIC: &[u8; 8] = b"CGSDFNET";
const VERSION: u32 = 1;

/// Fully connected network with leaky-ReLU hidden layers and a scalar output.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

struct Trace {
    /// Layer inputs; `inputs[0]` is the network input.
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
}

impl Mlp {
    pub fn new(sizes: &[usize], rng: &mut impl Rng) -> Self {
        let mut params = Vec::new();
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (6.0 / fan_in as f64).sqrt() / (1.0 + LEAKY_SLOPE * LEAKY_SLOPE).sqrt();
            params.extend((0..fan_in * fan_out).map(|_| rng.gen_range(-bound..bound)));
            params.extend(std::iter::repeat(0.0).take(fan_out));
        }
        Self {
            sizes: sizes.to_vec(),
            params,
        }
    }

    /// Geometric initialization: the network starts close to the sphere
    /// distance `‖x[..3]‖ − radius`, ignoring the remaining inputs.
    pub fn new_geometric(sizes: &[usize], point_dims: usize, radius: f64, rng: &mut impl Rng) -> Self {
        let nl = sizes.len() - 1;
        let mut params = Vec::new();
        for (li, w) in sizes.windows(2).enumerate() {
            let (fan_in, fan_out) = (w[0], w[1]);
            if li + 1 == nl {
                let mean = (std::f64::consts::PI / fan_in as f64).sqrt();
                let normal = Normal::new(mean, 1e-4).expect("valid normal");
                params.extend((0..fan_in * fan_out).map(|_| normal.sample(rng)));
                params.extend(std::iter::repeat(-radius).take(fan_out));
            } else {
                let normal = Normal::new(0.0, (2.0 / fan_out as f64).sqrt()).expect("valid normal");
                for _ in 0..fan_out {
                    for i in 0..fan_in {
                        let v = normal.sample(rng);
                        params.push(if li == 0 && i >= point_dims { 0.0 } else { v });
                    }
                }
                params.extend(std::iter::repeat(0.0).take(fan_out));
            }
        }
        Self {
            sizes: sizes.to_vec(),
            params,
        }
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    fn layers(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let mut offset = 0;
        self.sizes.windows(2).map(move |w| {
            let start = offset;
            offset += w[0] * w[1] + w[1];
            (start, w[0], w[1])
        })
    }

    fn run(&self, x: &[f64]) -> (f64, Trace) {
        let nl = self.sizes.len() - 1;
        let mut trace = Trace {
            inputs: vec![x.to_vec()],
            pre: Vec::with_capacity(nl),
        };
        for (li, (start, fin, fout)) in self.layers().enumerate() {
            let input = &trace.inputs[li];
            let w = &self.params[start..start + fin * fout];
            let b = &self.params[start + fin * fout..start + fin * fout + fout];
            let z: Vec<f64> = (0..fout)
                .map(|o| b[o] + w[o * fin..(o + 1) * fin].iter().zip(input).map(|(a, c)| a * c).sum::<f64>())
                .collect();
            let last = li + 1 == nl;
            let h = if last {
                z.clone()
            } else {
                z.iter().map(|&v| if v > 0.0 { v } else { LEAKY_SLOPE * v }).collect()
            };
            trace.pre.push(z);
            trace.inputs.push(h);
        }
        (trace.inputs[nl][0], trace)
    }

    pub fn forward(&self, x: &[f64]) -> f64 {
        self.run(x).0
    }

    /// Back-propagates `d_out`; accumulates parameter gradients when given and
    /// returns the input gradient.
    fn backward(&self, trace: &Trace, d_out: f64, mut grad: Option<&mut [f64]>) -> Vec<f64> {
        let nl = self.sizes.len() - 1;
        let layers: Vec<_> = self.layers().collect();
        let mut delta = vec![d_out];
        for li in (0..nl).rev() {
            let (start, fin, fout) = layers[li];
            if li + 1 != nl {
                for (d, &z) in delta.iter_mut().zip(&trace.pre[li]) {
                    if z <= 0.0 {
                        *d *= LEAKY_SLOPE;
                    }
                }
            }
            let input = &trace.inputs[li];
            if let Some(g) = grad.as_deref_mut() {
                for o in 0..fout {
                    let row = &mut g[start + o * fin..start + (o + 1) * fin];
                    for (gw, &a) in row.iter_mut().zip(input) {
                        *gw += delta[o] * a;
                    }
                    g[start + fin * fout + o] += delta[o];
                }
            }
            let w = &self.params[start..start + fin * fout];
            let mut next = vec![0.0; fin];
            for o in 0..fout {
                for (n, &wv) in next.iter_mut().zip(&w[o * fin..(o + 1) * fin]) {
                    *n += delta[o] * wv;
                }
            }
            delta = next;
        }
        delta
    }

    /// Input gradient `g` for a traced evaluation, and accumulates
    /// `scale · ∂(g · r)/∂params` into `grad`, where `r` touches the first
    /// `r.len()` inputs. With piecewise-linear activations `g` is locally
    /// multilinear in the weights and independent of the biases: the weight
    /// gradient of layer `l` is the outer product of its backward delta and
    /// the tangent `r` pushed forward to its input.
    fn input_grad_backward(&self, trace: &Trace, r: &[f64], scale: f64, grad: &mut [f64]) -> Vec<f64> {
        let nl = self.sizes.len() - 1;
        let layers: Vec<_> = self.layers().collect();
        let slope = |li: usize, o: usize| if trace.pre[li][o] > 0.0 { 1.0 } else { LEAKY_SLOPE };
        let mut deltas: Vec<Vec<f64>> = vec![Vec::new(); nl];
        let mut delta = vec![1.0];
        for li in (0..nl).rev() {
            let (start, fin, fout) = layers[li];
            if li + 1 != nl {
                for (o, d) in delta.iter_mut().enumerate() {
                    *d *= slope(li, o);
                }
            }
            let w = &self.params[start..start + fin * fout];
            let mut next = vec![0.0; fin];
            for o in 0..fout {
                for (n, &wv) in next.iter_mut().zip(&w[o * fin..(o + 1) * fin]) {
                    *n += delta[o] * wv;
                }
            }
            deltas[li] = std::mem::replace(&mut delta, next);
        }
        let input_grad = delta;
        let mut v = vec![0.0; self.sizes[0]];
        v[..r.len()].copy_from_slice(r);
        for li in 0..nl {
            let (start, fin, fout) = layers[li];
            for o in 0..fout {
                let row = &mut grad[start + o * fin..start + (o + 1) * fin];
                let d = deltas[li][o] * scale;
                for (gw, &a) in row.iter_mut().zip(&v) {
                    *gw += d * a;
                }
            }
            if li + 1 != nl {
                let w = &self.params[start..start + fin * fout];
                v = (0..fout)
                    .map(|o| slope(li, o) * w[o * fin..(o + 1) * fin].iter().zip(&v).map(|(a, b)| a * b).sum::<f64>())
                    .collect();
            }
        }
        input_grad
    }

    fn input_grad(&self, trace: &Trace) -> Vec<f64> {
        self.backward(trace, 1.0, None)
    }

    /// Output and input gradient.
    pub fn forward_with_input_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        let (y, trace) = self.run(x);
        (y, self.input_grad(&trace))
    }
}

/// Learned per-part evaluator. Queries farther than 1.5× a part's bound
/// radius fall back to the sphere lower bound `‖p‖ − bound`.
#[derive(Debug, Clone, PartialEq)]
pub struct LearnedSdf {
    nets: Vec<Mlp>,
    bounds: Vec<f64>,
    /// Length unit of network inputs and outputs, in meters.
    scale: f64,
}

impl LearnedSdf {
    pub fn new(parts: usize, hidden: usize, layers: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut sizes = vec![INPUT_DIM];
        sizes.extend(std::iter::repeat(hidden).take(layers));
        sizes.push(1);
        Self {
            nets: (0..parts).map(|_| Mlp::new_geometric(&sizes, 3, 0.3, &mut rng)).collect(),
            bounds: vec![0.05; parts],
            scale: 0.05,
        }
    }

    fn input(&self, local: &Vec3, shape: &[f64; SHAPE_DIM]) -> [f64; INPUT_DIM] {
        let mut x = [0.0; INPUT_DIM];
        for i in 0..3 {
            x[i] = local[i] / self.scale;
        }
        x[3..].copy_from_slice(shape);
        x
    }

    fn outside_bound(&self, part: usize, local: &Vec3) -> bool {
        local.norm() > 1.5 * self.bounds[part]
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = Writer::new(BufWriter::new(File::create(path)?));
        w.bytes(MAGIC)?;
        w.u32(VERSION)?;
        w.f64(self.scale)?;
        w.u32(self.nets.len() as u32)?;
        for (net, &bound) in self.nets.iter().zip(&self.bounds) {
            w.f64(bound)?;
            w.u32(net.sizes.len() as u32)?;
            for &s in &net.sizes {
                w.u32(s as u32)?;
            }
            w.f64s(&net.params)?;
        }
        w.finish()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = Reader::new(BufReader::new(File::open(path)?), path);
        r.expect_magic(MAGIC)?;
        let version = r.u32()?;
        if version != VERSION {
            return Err(r.err(format!("unsupported version {version}")));
        }
        let scale = r.f64()?;
        let parts = r.u32()? as usize;
        if parts == 0 || parts > 64 {
            return Err(r.err(format!("bad part count {parts}")));
        }
        let mut nets = Vec::with_capacity(parts);
        let mut bounds = Vec::with_capacity(parts);
        for _ in 0..parts {
            bounds.push(r.f64()?);
            let n = r.u32()? as usize;
            if !(2..=16).contains(&n) {
                return Err(r.err("bad layer count"));
            }
            let sizes = (0..n).map(|_| r.u32().map(|v| v as usize)).collect::<Result<Vec<_>>>()?;
            if sizes[0] != INPUT_DIM || sizes[n - 1] != 1 {
                return Err(r.err("layer sizes do not match the expected input/output"));
            }
            let expected: usize = sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
            let params = r.f64s(expected)?;
            if params.len() != expected {
                return Err(r.err("parameter count mismatch"));
            }
            nets.push(Mlp { sizes, params });
        }
        r.expect_end()?;
        Ok(Self { nets, bounds, scale })
    }
}

impl PartSdf for LearnedSdf {
    fn part_count(&self) -> usize {
        self.nets.len()
    }

    fn value(&self, part: usize, local: &Vec3, shape: &[f64; SHAPE_DIM]) -> f64 {
        if self.outside_bound(part, local) {
            return local.norm() - self.bounds[part];
        }
        self.nets[part].forward(&self.input(local, shape)) * self.scale
    }

    fn gradient(&self, part: usize, local: &Vec3, shape: &[f64; SHAPE_DIM]) -> SdfSample {
        if self.outside_bound(part, local) {
            let n = local.norm();
            return SdfSample {
                value: n - self.bounds[part],
                d_point: local / n,
                d_shape: [0.0; SHAPE_DIM],
            };
        }
        let (y, g) = self.nets[part].forward_with_input_grad(&self.input(local, shape));
        let mut d_shape = [0.0; SHAPE_DIM];
        for k in 0..SHAPE_DIM {
            d_shape[k] = g[3 + k] * self.scale;
        }
        SdfSample {
            value: y * self.scale,
            d_point: Vec3::new(g[0], g[1], g[2]),
            d_shape,
        }
    }

    fn bound_radius(&self, part: usize, _shape: &[f64; SHAPE_DIM]) -> f64 {
        self.bounds[part]
    }
}

/// One posed hand mesh with per-vertex skinning weights `(part, weight)`.
#[derive(Debug, Clone)]
pub struct HandMeshSample {
    pub params: HandParams,
    pub mesh: TriangleMesh,
    pub vertex_weights: Vec<Vec<(usize, f64)>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdfFitConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub surface_points: usize,
    pub near_points: usize,
    pub off_points: usize,
    /// Standard deviation of the near-surface perturbation, meters.
    pub sigma: f64,
    pub batch_size: usize,
    /// Weight of the `‖∇f − n‖` term against the exact distance gradient.
    pub normal_weight: f64,
    pub hidden: usize,
    pub layers: usize,
    pub seed: u64,
}

impl Default for SdfFitConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            learning_rate: 1e-4,
            surface_points: 7000,
            near_points: 7000,
            off_points: 1400,
            sigma: 0.01,
            batch_size: 256,
            normal_weight: 0.1,
            hidden: 32,
            layers: 4,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdfFitReport {
    /// Mean training objective per epoch.
    pub epoch_losses: Vec<f64>,
    /// Mean absolute distance error per epoch, meters.
    pub value_errors: Vec<f64>,
    pub examples: usize,
}

struct Example {
    input: [f64; INPUT_DIM],
    target: f64,
    /// Exact distance gradient in the part frame.
    normal: [f64; 3],
}

fn top_two(weights: &[f64]) -> [Option<usize>; 2] {
    let mut idx: Vec<usize> = (0..weights.len()).filter(|&i| weights[i] > 0.0).collect();
    idx.sort_by(|&a, &b| weights[b].total_cmp(&weights[a]).then(a.cmp(&b)));
    [idx.first().copied(), idx.get(1).copied()]
}

/// Builds per-part training examples from one posed mesh. Each surface
/// sample is assigned to its face's two highest-weighted parts; targets are
/// signed distances to the part's own surface patch.
fn examples_for_sample(
    sample: &HandMeshSample,
    chain: &KinematicChain,
    parts: usize,
    cfg: &SdfFitConfig,
    scale: f64,
    rng: &mut ChaCha8Rng,
    out: &mut [Vec<Example>],
    bounds: &mut [f64],
) -> Result<()> {
    let mesh = &sample.mesh;
    if sample.vertex_weights.len() != mesh.vertices.len() {
        return Err(Error::ShapeMismatch("skinning weights do not match mesh vertices".into()));
    }
    let transforms = chain.forward(&sample.params);
    let face_weights: Vec<Vec<f64>> = mesh
        .faces
        .iter()
        .map(|f| {
            let mut w = vec![0.0; parts];
            for &v in f {
                for &(b, wt) in &sample.vertex_weights[v as usize] {
                    if b < parts {
                        w[b] += wt;
                    }
                }
            }
            w
        })
        .collect();
    let face_top: Vec<[Option<usize>; 2]> = face_weights.iter().map(|w| top_two(w)).collect();
    let patches: Vec<Option<MeshDistance>> = (0..parts)
        .map(|b| {
            let faces: Vec<usize> = (0..mesh.faces.len()).filter(|&f| face_top[f][0] == Some(b)).collect();
            (!faces.is_empty()).then(|| MeshDistance::new(&mesh.submesh(&faces))).transpose()
        })
        .collect::<Result<_>>()?;

    let push = |b: usize, x: &Vec3, on_surface: bool, out: &mut [Vec<Example>], bounds: &mut [f64]| {
        let Some(patch) = &patches[b] else { return };
        let local = transforms[b].inverse_apply(x);
        let (target, world_normal) = patch.signed_distance_with_gradient(x);
        let normal = transforms[b].rotation.transpose() * world_normal;
        if on_surface && target.abs() < 1e-9 {
            bounds[b] = bounds[b].max(local.norm());
        }
        let mut input = [0.0; INPUT_DIM];
        for i in 0..3 {
            input[i] = local[i] / scale;
        }
        input[3..].copy_from_slice(&sample.params.shape);
        out[b].push(Example {
            input,
            target: target / scale,
            normal: [normal.x, normal.y, normal.z],
        });
    };

    let seed = rng.gen();
    let n_surface = cfg.surface_points.max(cfg.near_points);
    let (points, _, faces) = sample_with_faces(mesh, n_surface, seed)?;
    let noise = Normal::new(0.0, cfg.sigma).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    for (i, (p, &f)) in points.iter().zip(&faces).enumerate() {
        let near = Vec3::new(noise.sample(rng), noise.sample(rng), noise.sample(rng)) + p;
        for b in face_top[f].iter().flatten() {
            if i < cfg.surface_points {
                push(*b, p, true, out, bounds);
            }
            if i < cfg.near_points {
                push(*b, &near, false, out, bounds);
            }
        }
    }
    if cfg.off_points > 0 {
        let whole = MeshDistance::new(mesh)?;
        let (lo, hi) = mesh.bounds().expect("non-empty mesh");
        let pad = Vec3::repeat(2.0 * cfg.sigma);
        let (lo, hi) = (lo - pad, hi + pad);
        for _ in 0..cfg.off_points {
            let x = Vec3::new(rng.gen_range(lo.x..hi.x), rng.gen_range(lo.y..hi.y), rng.gen_range(lo.z..hi.z));
            let face = whole.nearest(&x).face;
            if let Some(b) = face_top[face][0] {
                push(b, &x, false, out, bounds);
            }
        }
    }
    Ok(())
}

/// Fits one network per part to a dataset of posed hand meshes.
pub fn fit_part_sdfs(
    dataset: &[HandMeshSample],
    chain: &KinematicChain,
    cfg: &SdfFitConfig,
) -> Result<(LearnedSdf, SdfFitReport)> {
    let parts = chain.len();
    let mut model = LearnedSdf::new(parts, cfg.hidden, cfg.layers, cfg.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5DF5_EED5);
    let mut data: Vec<Vec<Example>> = (0..parts).map(|_| Vec::new()).collect();
    let mut bounds = vec![0.0; parts];
    for sample in dataset {
        examples_for_sample(sample, chain, parts, cfg, model.scale, &mut rng, &mut data, &mut bounds)?;
    }
    for (b, &r) in bounds.iter().enumerate() {
        if r > 0.0 {
            model.bounds[b] = r;
        }
    }
    let examples = data.iter().map(Vec::len).sum();
    let mut report = SdfFitReport {
        epoch_losses: Vec::with_capacity(cfg.epochs),
        value_errors: Vec::with_capacity(cfg.epochs),
        examples,
    };
    if cfg.epochs == 0 || examples == 0 {
        return Ok((model, report));
    }

    let mut optimizers: Vec<Adam> = (0..parts).map(|_| Adam::new(cfg.learning_rate)).collect();
    let batch = cfg.batch_size.max(1);
    for epoch in 0..cfg.epochs {
        let (mut total, mut value_total) = (0.0, 0.0);
        for b in 0..parts {
            let net = &mut model.nets[b];
            let mut order: Vec<usize> = (0..data[b].len()).collect();
            order.shuffle(&mut rng);
            let mut grad = vec![0.0; net.param_count()];
            for chunk in order.chunks(batch) {
                grad.iter_mut().for_each(|g| *g = 0.0);
                let inv = 1.0 / chunk.len() as f64;
                for &i in chunk {
                    let ex = &data[b][i];
                    let (y, trace) = net.run(&ex.input);
                    let err = y - ex.target;
                    value_total += err.abs();
                    total += err.abs();
                    net.backward(&trace, err.signum() * inv, Some(&mut grad));
                    if cfg.normal_weight > 0.0 {
                        let g = net.input_grad(&trace);
                        let diff: [f64; 3] = std::array::from_fn(|k| g[k] - ex.normal[k]);
                        let norm = diff.iter().map(|d| d * d).sum::<f64>().sqrt();
                        total += cfg.normal_weight * norm;
                        if norm > 1e-12 {
                            let r = diff.map(|d| d / norm);
                            net.input_grad_backward(&trace, &r, cfg.normal_weight * inv, &mut grad);
                        }
                    }
                }
                optimizers[b].step(&mut net.params, &grad);
            }
        }
        let mean = total / examples as f64;
        let value_error = value_total * model.scale / examples as f64;
        if !mean.is_finite() {
            return Err(Error::Diverged {
                epoch,
                detail: format!("mean training loss is {mean}"),
            });
        }
        log::debug!("sdf fit epoch {epoch}: loss {mean:.6}, mean |err| {value_error:.6} m");
        report.epoch_losses.push(mean);
        report.value_errors.push(value_error);
    }
    Ok((model, report))
}
