//! Reverse-mode differentiation over row-major matrices.

use ndarray::{s, Array2, Axis};

use crate::binio::{Reader, Writer};
use crate::error::Result;

pub type Tensor = Array2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named trainable matrices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore {
    tensors: Vec<Tensor>,
    names: Vec<String>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> ParamId {
        self.tensors.push(value);
        self.names.push(name.into());
        ParamId(self.tensors.len() - 1)
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total number of scalars.
    pub fn scalar_count(&self) -> usize {
        self.tensors.iter().map(|t| t.len()).sum()
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.scalar_count());
        for t in &self.tensors {
            out.extend(t.iter());
        }
        out
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.scalar_count());
        let mut at = 0;
        for t in &mut self.tensors {
            for (dst, src) in t.iter_mut().zip(&flat[at..]) {
                *dst = *src;
            }
            at += t.len();
        }
    }

    pub fn zeros_like(&self) -> Vec<Tensor> {
        self.tensors.iter().map(|t| Tensor::zeros(t.raw_dim())).collect()
    }

    pub(crate) fn write<W: std::io::Write>(&self, w: &mut Writer<W>) -> Result<()> {
        w.u32(self.tensors.len() as u32)?;
        for (t, name) in self.tensors.iter().zip(&self.names) {
            w.string(name)?;
            w.u32(t.nrows() as u32)?;
            w.u32(t.ncols() as u32)?;
            for &v in t.iter() {
                w.f64(v)?;
            }
        }
        Ok(())
    }

    /// Reads values into an already laid-out store, checking names and shapes.
    pub(crate) fn read_into<R: std::io::Read>(&mut self, r: &mut Reader<'_, R>) -> Result<()> {
        let count = r.u32()? as usize;
        if count != self.tensors.len() {
            return Err(r.err(format!("holds {count} tensors, model expects {}", self.tensors.len())));
        }
        for (t, name) in self.tensors.iter_mut().zip(&self.names) {
            let found = r.string()?;
            let rows = r.u32()? as usize;
            let cols = r.u32()? as usize;
            if found != *name || rows != t.nrows() || cols != t.ncols() {
                return Err(r.err(format!(
                    "tensor {found} {rows}x{cols} does not match {name} {}x{}",
                    t.nrows(),
                    t.ncols()
                )));
            }
            for v in t.iter_mut() {
                *v = r.f64()?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Leaf,
    Param(ParamId),
    MatMul(Var, Var),
    /// Matrix plus a broadcast 1×C row.
    AddRow(Var, Var),
    Add(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Relu(Var),
    Sigmoid(Var),
    Exp(Var),
    Concat(Vec<Var>),
    Columns(Var, usize),
    Gather(Var, Vec<usize>),
    /// Output entry (g, c) is input entry (argmax[g·C + c], c).
    GroupMax(Var, Vec<usize>),
    Interp(Var, Vec<[usize; 3]>, Vec<[f64; 3]>),
    Repeat(Var),
}

struct Node {
    value: Tensor,
    op: Op,
    needs_grad: bool,
}

/// Records operations for one forward pass.
pub struct Tape<'a> {
    store: &'a ParamStore,
    nodes: Vec<Node>,
}

impl<'a> Tape<'a> {
    pub fn new(store: &'a ParamStore) -> Self {
        Self { store, nodes: Vec::new() }
    }

    fn push(&mut self, value: Tensor, op: Op, needs_grad: bool) -> Var {
        self.nodes.push(Node { value, op, needs_grad });
        Var(self.nodes.len() - 1)
    }

    fn needs(&self, v: Var) -> bool {
        self.nodes[v.0].needs_grad
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    pub fn constant(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn param(&mut self, id: ParamId) -> Var {
        let value = self.store.get(id).clone();
        self.push(value, Op::Param(id), true)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a).dot(self.value(b));
        let n = self.needs(a) || self.needs(b);
        self.push(value, Op::MatMul(a, b), n)
    }

    pub fn add_row(&mut self, x: Var, row: Var) -> Var {
        let value = self.value(x) + self.value(row);
        let n = self.needs(x) || self.needs(row);
        self.push(value, Op::AddRow(x, row), n)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) + self.value(b);
        let n = self.needs(a) || self.needs(b);
        self.push(value, Op::Add(a, b), n)
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let value = self.value(a) * self.value(b);
        let n = self.needs(a) || self.needs(b);
        self.push(value, Op::Mul(a, b), n)
    }

    pub fn scale(&mut self, x: Var, k: f64) -> Var {
        let value = self.value(x) * k;
        let n = self.needs(x);
        self.push(value, Op::Scale(x, k), n)
    }

    pub fn relu(&mut self, x: Var) -> Var {
        let value = self.value(x).mapv(|v| v.max(0.0));
        let n = self.needs(x);
        self.push(value, Op::Relu(x), n)
    }

    pub fn sigmoid(&mut self, x: Var) -> Var {
        let value = self.value(x).mapv(|v| 1.0 / (1.0 + (-v).exp()));
        let n = self.needs(x);
        self.push(value, Op::Sigmoid(x), n)
    }

    pub fn exp(&mut self, x: Var) -> Var {
        let value = self.value(x).mapv(f64::exp);
        let n = self.needs(x);
        self.push(value, Op::Exp(x), n)
    }

    /// Column-wise concatenation; all parts share the row count.
    pub fn concat(&mut self, parts: &[Var]) -> Var {
        let views: Vec<_> = parts.iter().map(|v| self.value(*v).view()).collect();
        let value = ndarray::concatenate(Axis(1), &views).expect("concat: row counts differ");
        let n = parts.iter().any(|v| self.needs(*v));
        self.push(value, Op::Concat(parts.to_vec()), n)
    }

    /// Columns `start..start + len`.
    pub fn columns(&mut self, x: Var, start: usize, len: usize) -> Var {
        let value = self.value(x).slice(s![.., start..start + len]).to_owned();
        let n = self.needs(x);
        self.push(value, Op::Columns(x, start), n)
    }

    pub fn gather(&mut self, x: Var, rows: Vec<usize>) -> Var {
        let value = self.value(x).select(Axis(0), &rows);
        let n = self.needs(x);
        self.push(value, Op::Gather(x, rows), n)
    }

    /// Column-wise maximum over consecutive blocks of `group` rows.
    pub fn group_max(&mut self, x: Var, group: usize) -> Var {
        let input = self.value(x);
        let (rows, cols) = input.dim();
        assert!(group > 0 && rows % group == 0, "group_max: {rows} rows not divisible by {group}");
        let groups = rows / group;
        let mut value = Tensor::zeros((groups, cols));
        let mut argmax = vec![0usize; groups * cols];
        for g in 0..groups {
            for c in 0..cols {
                let mut best = g * group;
                for r in g * group + 1..(g + 1) * group {
                    if input[[r, c]] > input[[best, c]] {
                        best = r;
                    }
                }
                value[[g, c]] = input[[best, c]];
                argmax[g * cols + c] = best;
            }
        }
        let n = self.needs(x);
        self.push(value, Op::GroupMax(x, argmax), n)
    }

    /// Row `i` of the output is `Σ_k w[i][k] · x[idx[i][k]]`.
    pub fn interp(&mut self, x: Var, idx: Vec<[usize; 3]>, w: Vec<[f64; 3]>) -> Var {
        let input = self.value(x);
        let mut value = Tensor::zeros((idx.len(), input.ncols()));
        for (i, (ids, ws)) in idx.iter().zip(&w).enumerate() {
            let mut row = value.row_mut(i);
            for k in 0..3 {
                row.scaled_add(ws[k], &input.row(ids[k]));
            }
        }
        let n = self.needs(x);
        self.push(value, Op::Interp(x, idx, w), n)
    }

    /// Repeats a single row `rows` times.
    pub fn repeat(&mut self, x: Var, rows: usize) -> Var {
        let input = self.value(x);
        assert_eq!(input.nrows(), 1, "repeat expects one row");
        let value = input.broadcast((rows, input.ncols())).expect("broadcast").to_owned();
        let n = self.needs(x);
        self.push(value, Op::Repeat(x), n)
    }

    /// Gradients of `Σ ⟨seed, node⟩` over the given seeds, per parameter.
    pub fn backward(&self, seeds: Vec<(Var, Tensor)>) -> Vec<Tensor> {
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        let mut out = self.store.zeros_like();
        for (v, g) in seeds {
            assert_eq!(g.dim(), self.value(v).dim(), "seed shape mismatch");
            accumulate(&mut grads[v.0], g);
        }
        for i in (0..self.nodes.len()).rev() {
            let Some(g) = grads[i].take() else { continue };
            let node = &self.nodes[i];
            if !node.needs_grad {
                continue;
            }
            match &node.op {
                Op::Leaf => {}
                Op::Param(id) => out[id.0] += &g,
                Op::MatMul(a, b) => {
                    if self.needs(*a) {
                        let ga = g.dot(&self.value(*b).t());
                        accumulate(&mut grads[a.0], ga);
                    }
                    if self.needs(*b) {
                        let gb = self.value(*a).t().dot(&g);
                        accumulate(&mut grads[b.0], gb);
                    }
                }
                Op::AddRow(x, row) => {
                    if self.needs(*row) {
                        let gr = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                        accumulate(&mut grads[row.0], gr);
                    }
                    if self.needs(*x) {
                        accumulate(&mut grads[x.0], g);
                    }
                }
                Op::Add(a, b) => {
                    if self.needs(*b) {
                        accumulate(&mut grads[b.0], g.clone());
                    }
                    if self.needs(*a) {
                        accumulate(&mut grads[a.0], g);
                    }
                }
                Op::Mul(a, b) => {
                    if self.needs(*a) {
                        accumulate(&mut grads[a.0], &g * self.value(*b));
                    }
                    if self.needs(*b) {
                        accumulate(&mut grads[b.0], &g * self.value(*a));
                    }
                }
                Op::Scale(x, k) => accumulate(&mut grads[x.0], g * *k),
                Op::Relu(x) => {
                    let mut gx = g;
                    gx.zip_mut_with(&node.value, |gv, &y| {
                        if y <= 0.0 {
                            *gv = 0.0;
                        }
                    });
                    accumulate(&mut grads[x.0], gx);
                }
                Op::Sigmoid(x) => {
                    let mut gx = g;
                    gx.zip_mut_with(&node.value, |gv, &y| *gv *= y * (1.0 - y));
                    accumulate(&mut grads[x.0], gx);
                }
                Op::Exp(x) => accumulate(&mut grads[x.0], g * &node.value),
                Op::Concat(parts) => {
                    let mut at = 0;
                    for p in parts {
                        let w = self.value(*p).ncols();
                        if self.needs(*p) {
                            accumulate(&mut grads[p.0], g.slice(s![.., at..at + w]).to_owned());
                        }
                        at += w;
                    }
                }
                Op::Columns(x, start) => {
                    let mut gx = Tensor::zeros(self.value(*x).raw_dim());
                    gx.slice_mut(s![.., *start..*start + g.ncols()]).assign(&g);
                    accumulate(&mut grads[x.0], gx);
                }
                Op::Gather(x, rows) => {
                    let mut gx = Tensor::zeros(self.value(*x).raw_dim());
                    for (i, &r) in rows.iter().enumerate() {
                        let mut dst = gx.row_mut(r);
                        dst += &g.row(i);
                    }
                    accumulate(&mut grads[x.0], gx);
                }
                Op::GroupMax(x, argmax) => {
                    let mut gx = Tensor::zeros(self.value(*x).raw_dim());
                    let cols = g.ncols();
                    for ((gi, c), &v) in g.indexed_iter() {
                        gx[[argmax[gi * cols + c], c]] += v;
                    }
                    accumulate(&mut grads[x.0], gx);
                }
                Op::Interp(x, idx, w) => {
                    let mut gx = Tensor::zeros(self.value(*x).raw_dim());
                    for (i, (ids, ws)) in idx.iter().zip(w).enumerate() {
                        for k in 0..3 {
                            let mut dst = gx.row_mut(ids[k]);
                            dst.scaled_add(ws[k], &g.row(i));
                        }
                    }
                    accumulate(&mut grads[x.0], gx);
                }
                Op::Repeat(x) => {
                    let gx = g.sum_axis(Axis(0)).insert_axis(Axis(0));
                    accumulate(&mut grads[x.0], gx);
                }
            }
        }
        out
    }
}

fn accumulate(slot: &mut Option<Tensor>, g: Tensor) {
    match slot {
        Some(acc) => *acc += &g,
        None => *slot = Some(g),
    }
}
