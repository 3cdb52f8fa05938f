use rand::Rng;

use super::tape::{ParamId, ParamStore, Tape, Tensor, Var};

/// `x·W + b` with `W` stored as in×out.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dense {
    pub weight: ParamId,
    pub bias: ParamId,
    pub inputs: usize,
    pub outputs: usize,
}

impl Dense {
    /// Uniform He initialization, zero bias.
    pub fn new(store: &mut ParamStore, name: &str, inputs: usize, outputs: usize, rng: &mut impl Rng) -> Self {
        let bound = (6.0 / inputs as f64).sqrt();
        let w = Tensor::from_shape_fn((inputs, outputs), |_| rng.gen_range(-bound..bound));
        Self {
            weight: store.add(format!("{name}.weight"), w),
            bias: store.add(format!("{name}.bias"), Tensor::zeros((1, outputs))),
            inputs,
            outputs,
        }
    }

    pub fn forward(&self, tape: &mut Tape<'_>, x: Var) -> Var {
        let w = tape.param(self.weight);
        let b = tape.param(self.bias);
        let y = tape.matmul(x, w);
        tape.add_row(y, b)
    }
}

/// Dense layers with ReLU between them, optionally after the last one too.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseStack {
    pub layers: Vec<Dense>,
    pub relu_last: bool,
}

impl DenseStack {
    pub fn new(store: &mut ParamStore, name: &str, sizes: &[usize], relu_last: bool, rng: &mut impl Rng) -> Self {
        assert!(sizes.len() >= 2, "a stack needs at least one layer");
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| Dense::new(store, &format!("{name}.{i}"), w[0], w[1], rng))
            .collect();
        Self { layers, relu_last }
    }

    pub fn outputs(&self) -> usize {
        self.layers.last().expect("non-empty").outputs
    }

    pub fn forward(&self, tape: &mut Tape<'_>, mut x: Var) -> Var {
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            x = layer.forward(tape, x);
            if i < last || self.relu_last {
                x = tape.relu(x);
            }
        }
        x
    }
}
