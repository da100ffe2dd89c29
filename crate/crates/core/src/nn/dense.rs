use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use super::params::ParamSet;
use crate::error::{Error, Result};
use crate::rng::Rng64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
    Tanh,
    Sigmoid,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
        }
    }

    /// Derivative expressed through the activation's output.
    fn grad_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Uniform matrix in [-bound, bound].
pub(crate) fn uniform_matrix(rows: usize, cols: usize, bound: f64, rng: &mut Rng64) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.uniform(-bound, bound))
}

pub(crate) fn uniform_vector(len: usize, bound: f64, rng: &mut Rng64) -> Array1<f64> {
    Array1::from_shape_simple_fn(len, || rng.uniform(-bound, bound))
}

/// Fully connected layer, `y = act(x W^T + b)` on row-major batches.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn new(input: usize, output: usize, activation: Activation, rng: &mut Rng64) -> Self {
        let bound = 1.0 / (input.max(1) as f64).sqrt();
        Dense {
            weight: uniform_matrix(output, input, bound, rng),
            bias: uniform_vector(output, bound, rng),
            activation,
        }
    }

    pub fn zeros(input: usize, output: usize, activation: Activation) -> Self {
        Dense {
            weight: Array2::zeros((output, input)),
            bias: Array1::zeros(output),
            activation,
        }
    }

    pub fn input_size(&self) -> usize {
        self.weight.ncols()
    }

    pub fn output_size(&self) -> usize {
        self.weight.nrows()
    }

    pub fn forward(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        if x.ncols() != self.input_size() {
            return Err(Error::shape("dense input", self.input_size(), x.ncols()));
        }
        let mut y = x.dot(&self.weight.t()) + &self.bias;
        let act = self.activation;
        y.mapv_inplace(|v| act.apply(v));
        Ok(y)
    }

    /// Gradients given the layer input `x`, its output `y`, and `dy`.
    pub fn backward(&self, x: &Array2<f64>, y: &Array2<f64>, dy: &Array2<f64>) -> (Dense, Array2<f64>) {
        let act = self.activation;
        let mut dz = dy.clone();
        dz.zip_mut_with(y, |d, &out| *d *= act.grad_from_output(out));
        let grads = Dense {
            weight: dz.t().dot(x).as_standard_layout().into_owned(),
            bias: dz.sum_axis(Axis(0)),
            activation: act,
        };
        let dx = dz.dot(&self.weight);
        (grads, dx)
    }
}

/// Multilayer perceptron.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    pub layers: Vec<Dense>,
}

/// Layer inputs and outputs cached by [`MlpParams::forward`].
#[derive(Debug, Clone)]
pub struct MlpTape {
    activations: Vec<Array2<f64>>,
}

impl MlpParams {
    /// `sizes = [input, hidden.., output]`.
    pub fn new(sizes: &[usize], hidden: Activation, output: Activation, rng: &mut Rng64) -> Self {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        let last = sizes.len() - 2;
        let layers = sizes
            .windows(2)
            .enumerate()
            .map(|(i, w)| Dense::new(w[0], w[1], if i == last { output } else { hidden }, rng))
            .collect();
        MlpParams { layers }
    }

    pub fn input_size(&self) -> usize {
        self.layers[0].input_size()
    }

    pub fn output_size(&self) -> usize {
        self.layers.last().map(Dense::output_size).unwrap_or(0)
    }

    pub fn forward(&self, x: &Array2<f64>) -> Result<(Array2<f64>, MlpTape)> {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.clone());
        for layer in &self.layers {
            let y = layer.forward(activations.last().expect("nonempty"))?;
            activations.push(y);
        }
        let out = activations.last().expect("nonempty").clone();
        Ok((out, MlpTape { activations }))
    }

    pub fn infer(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        let mut a = x.clone();
        for layer in &self.layers {
            a = layer.forward(&a)?;
        }
        Ok(a)
    }

    /// Parameter gradients and the gradient with respect to the input.
    pub fn backward(&self, tape: &MlpTape, dout: &Array2<f64>) -> Result<(MlpParams, Array2<f64>)> {
        if tape.activations.len() != self.layers.len() + 1 {
            return Err(Error::shape("mlp tape", self.layers.len() + 1, tape.activations.len()));
        }
        let last = tape.activations.last().expect("nonempty");
        if last.dim() != dout.dim() {
            return Err(Error::shape("mlp output gradient", format!("{:?}", last.dim()), format!("{:?}", dout.dim())));
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut d = dout.clone();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            let (g, dx) = layer.backward(&tape.activations[k], &tape.activations[k + 1], &d);
            grads.push(g);
            d = dx;
        }
        grads.reverse();
        Ok((MlpParams { layers: grads }, d))
    }
}

impl ParamSet for MlpParams {
    fn visit(&self, f: &mut dyn FnMut(&str, &[usize], &[f64])) {
        for (i, l) in self.layers.iter().enumerate() {
            f(&format!("layer{i}.weight"), l.weight.shape(), l.weight.as_slice().expect("standard layout"));
            f(&format!("layer{i}.bias"), l.bias.shape(), l.bias.as_slice().expect("standard layout"));
        }
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&str, &mut [f64])) {
        for (i, l) in self.layers.iter_mut().enumerate() {
            f(&format!("layer{i}.weight"), l.weight.as_slice_mut().expect("standard layout"));
            f(&format!("layer{i}.bias"), l.bias.as_slice_mut().expect("standard layout"));
        }
    }
}
