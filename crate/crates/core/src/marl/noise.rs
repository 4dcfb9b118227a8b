//! Ornstein-Uhlenbeck exploration noise.

use rand_distr::{Distribution, StandardNormal};

use crate::rng::SimRng;

#[derive(Debug, Clone)]
pub struct OUNoise {
    state: Vec<f64>,
    pub mean: f64,
    pub sigma: f64,
    pub theta: f64,
    /// Time step of the discretization.
    pub dt: f64,
    rng: SimRng,
}

impl OUNoise {
    pub fn new(dim: usize, sigma: f64, theta: f64, rng: SimRng) -> Self {
        Self {
            state: vec![0.0; dim],
            mean: 0.0,
            sigma,
            theta,
            dt: 1.0,
            rng,
        }
    }

    /// `x += theta (mean - x) dt + sigma sqrt(dt) N(0, 1)` per component.
    pub fn sample(&mut self) -> &[f64] {
        let sq = self.dt.sqrt();
        for x in &mut self.state {
            let n: f64 = StandardNormal.sample(&mut self.rng);
            *x += self.theta * (self.mean - *x) * self.dt + self.sigma * sq * n;
        }
        &self.state
    }

    pub fn state(&self) -> &[f64] {
        &self.state
    }

    pub fn reset(&mut self) {
        self.state.iter_mut().for_each(|x| *x = self.mean);
    }
}
