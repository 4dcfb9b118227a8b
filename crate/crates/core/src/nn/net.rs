use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::matrix::{gemm, Matrix};

/// Transform applied to a contiguous segment of the final layer's output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OutputHead {
    Identity(usize),
    Sigmoid(usize),
    Softmax(usize),
}

impl OutputHead {
    pub fn len(&self) -> usize {
        match *self {
            OutputHead::Identity(n) | OutputHead::Sigmoid(n) | OutputHead::Softmax(n) => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

static NEXT_GENERATION: AtomicU64 = AtomicU64::new(1);

fn fresh_generation() -> u64 {
    NEXT_GENERATION.fetch_add(1, Ordering::Relaxed)
}

/// Fully connected network with tanh hidden layers.
///
/// Parameters live in one flat vector: every layer's weights (layer-major,
/// each an `in x out` row-major block), then every layer's biases.
#[derive(Debug, Serialize, Deserialize)]
pub struct DenseNet {
    shapes: Vec<(usize, usize)>,
    heads: Vec<OutputHead>,
    params: Vec<f64>,
    /// Changes on every parameter mutation; caches record it to detect
    /// staleness.
    #[serde(skip, default = "fresh_generation")]
    generation: u64,
}

impl Clone for DenseNet {
    fn clone(&self) -> Self {
        Self {
            shapes: self.shapes.clone(),
            heads: self.heads.clone(),
            params: self.params.clone(),
            generation: fresh_generation(),
        }
    }
}

impl PartialEq for DenseNet {
    fn eq(&self, other: &Self) -> bool {
        self.shapes == other.shapes && self.heads == other.heads && self.params == other.params
    }
}

/// Activations recorded by a forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input of every layer; entry 0 is the network input.
    layer_inputs: Vec<Matrix>,
    /// Final affine output before heads.
    raw: Matrix,
    output: Matrix,
    generation: u64,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        &self.output
    }

    pub fn raw(&self) -> &Matrix {
        &self.raw
    }

    pub fn input(&self) -> &Matrix {
        &self.layer_inputs[0]
    }
}

#[derive(Debug, Clone)]
pub struct Gradients {
    /// Same layout as the network parameters, summed over the batch.
    pub params: Vec<f64>,
    /// Gradient with respect to the network input, one row per sample.
    pub input: Matrix,
}

impl DenseNet {
    /// Builds a zero-initialized network. `sizes` lists layer widths from
    /// input to output; `heads` must cover the output width exactly.
    pub fn zeros(sizes: &[usize], heads: Vec<OutputHead>) -> Result<Self> {
        if sizes.len() < 2 || sizes.contains(&0) {
            return Err(Error::contract(format!("bad layer sizes {sizes:?}")));
        }
        let out = *sizes.last().unwrap();
        let covered: usize = heads.iter().map(OutputHead::len).sum();
        if covered != out || heads.iter().any(OutputHead::is_empty) {
            return Err(Error::contract(format!(
                "heads cover {covered} of {out} outputs"
            )));
        }
        let shapes: Vec<_> = sizes.windows(2).map(|w| (w[0], w[1])).collect();
        let count = shapes.iter().map(|(i, o)| i * o + o).sum();
        Ok(Self {
            shapes,
            heads,
            params: vec![0.0; count],
            generation: fresh_generation(),
        })
    }

    /// Uniform `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` initialization.
    pub fn new<R: Rng + ?Sized>(sizes: &[usize], heads: Vec<OutputHead>, rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(sizes, heads)?;
        let shapes = net.shapes.clone();
        for (l, &(fan_in, out)) in shapes.iter().enumerate() {
            let bound = 1.0 / (fan_in as f64).sqrt();
            let w = net.weight_range(l);
            for v in &mut net.params[w] {
                *v = rng.random_range(-bound..=bound);
            }
            let b = net.bias_range(l);
            debug_assert_eq!(b.len(), out);
            for v in &mut net.params[b] {
                *v = rng.random_range(-bound..=bound);
            }
        }
        Ok(net)
    }

    /// Rebuilds a network from raw parts, checking consistency.
    pub fn from_parts(shapes: Vec<(usize, usize)>, heads: Vec<OutputHead>, params: Vec<f64>) -> Result<Self> {
        let mut sizes: Vec<usize> = shapes.iter().map(|s| s.0).collect();
        if shapes.windows(2).any(|w| w[0].1 != w[1].0) {
            return Err(Error::contract("layer shapes do not chain"));
        }
        sizes.push(shapes.last().map(|s| s.1).unwrap_or(0));
        let mut net = Self::zeros(&sizes, heads)?;
        if params.len() != net.params.len() {
            return Err(Error::contract(format!(
                "expected {} parameters, got {}",
                net.params.len(),
                params.len()
            )));
        }
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("network parameters".into()));
        }
        net.params = params;
        Ok(net)
    }

    pub fn shapes(&self) -> &[(usize, usize)] {
        &self.shapes
    }

    pub fn heads(&self) -> &[OutputHead] {
        &self.heads
    }

    pub fn input_dim(&self) -> usize {
        self.shapes[0].0
    }

    pub fn output_dim(&self) -> usize {
        self.shapes.last().unwrap().1
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable access to the parameters; invalidates outstanding caches.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.generation = fresh_generation();
        &mut self.params
    }

    fn weight_offset(&self, layer: usize) -> usize {
        self.shapes[..layer].iter().map(|(i, o)| i * o).sum()
    }

    pub fn weight_range(&self, layer: usize) -> std::ops::Range<usize> {
        let start = self.weight_offset(layer);
        let (i, o) = self.shapes[layer];
        start..start + i * o
    }

    pub fn bias_range(&self, layer: usize) -> std::ops::Range<usize> {
        let weights_total: usize = self.shapes.iter().map(|(i, o)| i * o).sum();
        let start = weights_total + self.shapes[..layer].iter().map(|s| s.1).sum::<usize>();
        start..start + self.shapes[layer].1
    }

    pub fn forward(&self, input: &[f64]) -> Result<(Vec<f64>, ForwardCache)> {
        let cache = self.forward_batch(&Matrix::row_vector(input))?;
        Ok((cache.output.row(0).to_vec(), cache))
    }

    /// Affine + tanh per hidden layer, affine output, then the heads.
    pub fn forward_batch(&self, input: &Matrix) -> Result<ForwardCache> {
        if input.cols() != self.input_dim() {
            return Err(Error::contract(format!(
                "input width {} does not match network input {}",
                input.cols(),
                self.input_dim()
            )));
        }
        let batch = input.rows();
        let last = self.shapes.len() - 1;
        let mut layer_inputs = Vec::with_capacity(self.shapes.len());
        let mut current = input.clone();
        let mut raw = None;
        for (l, &(fan_in, fan_out)) in self.shapes.iter().enumerate() {
            let mut z = Matrix::zeros(batch, fan_out);
            let bias = &self.params[self.bias_range(l)];
            for r in 0..batch {
                z.row_mut(r).copy_from_slice(bias);
            }
            gemm(
                batch,
                fan_in,
                fan_out,
                current.as_slice(),
                (fan_in as isize, 1),
                &self.params[self.weight_range(l)],
                (fan_out as isize, 1),
                z.as_mut_slice(),
                true,
            );
            layer_inputs.push(current);
            if l == last {
                raw = Some(z);
                break;
            }
            for v in z.as_mut_slice() {
                *v = v.tanh();
            }
            current = z;
        }
        let raw = raw.expect("at least one layer");
        let mut output = raw.clone();
        for r in 0..batch {
            self.apply_heads(output.row_mut(r));
        }
        Ok(ForwardCache {
            layer_inputs,
            raw,
            output,
            generation: self.generation,
        })
    }

    /// Applies the output heads in place to one raw output row.
    pub fn apply_heads(&self, row: &mut [f64]) {
        let mut at = 0;
        for head in &self.heads {
            let seg = &mut row[at..at + head.len()];
            match head {
                OutputHead::Identity(_) => {}
                OutputHead::Sigmoid(_) => {
                    for v in seg.iter_mut() {
                        *v = sigmoid(*v);
                    }
                }
                OutputHead::Softmax(_) => softmax_in_place(seg),
            }
            at += head.len();
        }
    }

    /// Maps a gradient on head outputs back onto the raw outputs.
    pub fn heads_backward(&self, output: &[f64], grad: &[f64], out: &mut [f64]) {
        let mut at = 0;
        for head in &self.heads {
            let range = at..at + head.len();
            let (y, g, o) = (&output[range.clone()], &grad[range.clone()], &mut out[range]);
            match head {
                OutputHead::Identity(_) => o.copy_from_slice(g),
                OutputHead::Sigmoid(_) => {
                    for i in 0..y.len() {
                        o[i] = g[i] * y[i] * (1.0 - y[i]);
                    }
                }
                OutputHead::Softmax(_) => {
                    let dot: f64 = y.iter().zip(g).map(|(a, b)| a * b).sum();
                    for i in 0..y.len() {
                        o[i] = y[i] * (g[i] - dot);
                    }
                }
            }
            at += head.len();
        }
    }

    /// Reverse-mode pass. `grad_output` is the gradient of the objective
    /// with respect to the head outputs; parameter gradients are summed
    /// over the batch.
    pub fn backward(&self, cache: &ForwardCache, grad_output: &Matrix) -> Result<Gradients> {
        let mut raw_grad = Matrix::zeros(grad_output.rows(), grad_output.cols());
        self.check_cache(cache, grad_output)?;
        for r in 0..grad_output.rows() {
            self.heads_backward(cache.output.row(r), grad_output.row(r), raw_grad.row_mut(r));
        }
        self.backward_raw(cache, raw_grad)
    }

    /// Like [`DenseNet::backward`], with the gradient already taken with
    /// respect to the pre-head outputs.
    pub fn backward_raw(&self, cache: &ForwardCache, grad_raw: Matrix) -> Result<Gradients> {
        self.check_cache(cache, &grad_raw)?;
        let batch = grad_raw.rows();
        let mut grads = vec![0.0; self.params.len()];
        let mut delta = grad_raw;
        for l in (0..self.shapes.len()).rev() {
            let (fan_in, fan_out) = self.shapes[l];
            let a = &cache.layer_inputs[l];
            let w_range = self.weight_range(l);
            // dW = a^T · delta
            gemm(
                fan_in,
                batch,
                fan_out,
                a.as_slice(),
                (1, fan_in as isize),
                delta.as_slice(),
                (fan_out as isize, 1),
                &mut grads[w_range.clone()],
                false,
            );
            let b_range = self.bias_range(l);
            let gb = &mut grads[b_range];
            for r in 0..batch {
                for (g, d) in gb.iter_mut().zip(delta.row(r)) {
                    *g += d;
                }
            }
            // d(input) = delta · W^T
            let mut prev = Matrix::zeros(batch, fan_in);
            gemm(
                batch,
                fan_out,
                fan_in,
                delta.as_slice(),
                (fan_out as isize, 1),
                &self.params[w_range],
                (1, fan_out as isize),
                prev.as_mut_slice(),
                false,
            );
            if l > 0 {
                // a is the tanh output of the previous layer
                for (p, act) in prev.as_mut_slice().iter_mut().zip(a.as_slice()) {
                    *p *= 1.0 - act * act;
                }
            }
            delta = prev;
        }
        Ok(Gradients {
            params: grads,
            input: delta,
        })
    }

    fn check_cache(&self, cache: &ForwardCache, grad: &Matrix) -> Result<()> {
        if cache.generation != self.generation {
            return Err(Error::contract("forward cache is stale for this network"));
        }
        if grad.rows() != cache.output.rows() || grad.cols() != self.output_dim() {
            return Err(Error::contract(format!(
                "output gradient is {}x{}, expected {}x{}",
                grad.rows(),
                grad.cols(),
                cache.output.rows(),
                self.output_dim()
            )));
        }
        Ok(())
    }

    /// Copies parameters from a same-shaped network.
    pub fn copy_from(&mut self, source: &DenseNet) -> Result<()> {
        self.ensure_same_shape(source)?;
        self.params_mut().copy_from_slice(&source.params);
        Ok(())
    }

    fn ensure_same_shape(&self, other: &DenseNet) -> Result<()> {
        if self.shapes != other.shapes || self.heads != other.heads {
            return Err(Error::contract(format!(
                "shape mismatch: {:?} vs {:?}",
                self.shapes, other.shapes
            )));
        }
        Ok(())
    }
}

/// `target = tau * source + (1 - tau) * target`, elementwise.
pub fn soft_update(target: &mut DenseNet, source: &DenseNet, tau: f64) -> Result<()> {
    target.ensure_same_shape(source)?;
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::contract(format!("tau {tau} outside [0, 1]")));
    }
    if tau == 1.0 {
        return target.copy_from(source);
    }
    if tau == 0.0 {
        return Ok(());
    }
    for (t, s) in target.params_mut().iter_mut().zip(&source.params) {
        *t = tau * s + (1.0 - tau) * *t;
    }
    Ok(())
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softmax_in_place(seg: &mut [f64]) {
    let max = seg.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in seg.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in seg.iter_mut() {
        *v /= sum;
    }
}
