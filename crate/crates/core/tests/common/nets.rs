//! Random networks and central finite differences.

use rand::Rng;
use sagin_sched::nn::{DenseNet, Matrix, OutputHead};

/// Random widths (1 to 3 layers, up to 64 units) and a random mix of heads.
pub fn random_net<R: Rng>(rng: &mut R) -> DenseNet {
    let layers = rng.random_range(1..=3);
    let mut sizes = vec![rng.random_range(1..=12)];
    for _ in 1..layers {
        sizes.push(rng.random_range(1..=64));
    }
    let out = rng.random_range(1..=8);
    sizes.push(out);
    let mut heads = Vec::new();
    let mut left = out;
    while left > 0 {
        let n = rng.random_range(1..=left);
        heads.push(match rng.random_range(0..3) {
            0 => OutputHead::Identity(n),
            1 => OutputHead::Sigmoid(n),
            _ => OutputHead::Softmax(n),
        });
        left -= n;
    }
    let mut net = DenseNet::new(&sizes, heads, rng).unwrap();
    // larger weights than the default so tanh leaves its linear range
    for p in net.params_mut() {
        *p *= 1.5;
    }
    net
}

pub fn random_matrix<R: Rng>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> Matrix {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-scale..=scale)).collect())
}

/// `Σ weights ⊙ outputs` over a batch.
pub fn weighted_output(net: &DenseNet, input: &Matrix, weights: &Matrix) -> f64 {
    let cache = net.forward_batch(input).unwrap();
    cache.output().as_slice().iter().zip(weights.as_slice()).map(|(y, w)| y * w).sum()
}

/// Central difference of `f` around `x[i]`.
pub fn central(x: &mut [f64], i: usize, h: f64, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let keep = x[i];
    x[i] = keep + h;
    let up = f(x);
    x[i] = keep - h;
    let down = f(x);
    x[i] = keep;
    (up - down) / (2.0 * h)
}
