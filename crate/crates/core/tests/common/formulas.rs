//! Closed forms evaluated along a different route than the library: natural
//! logarithms instead of decimal ones, division instead of a negative
//! exponent, and sums in a different order.

use std::f64::consts::{LN_10, LN_2, PI};

pub const C: f64 = 299_792_458.0;

pub fn profit(bits: f64, cycles_per_bit: f64, deadline: f64, sensitivity: f64) -> f64 {
    bits * cycles_per_bit / (sensitivity * deadline).exp()
}

/// Loss in dB for a carrier `freq`, exponent `n`, reference `d0`.
pub fn path_loss(distance: f64, d0: f64, freq: f64, n: f64, shadowing: f64) -> f64 {
    let d = if distance < d0 { d0 } else { distance };
    let reference = 20.0 * ((4.0 * PI).ln() + d0.ln() + freq.ln() - C.ln()) / LN_10;
    shadowing + reference + 10.0 * n * (d.ln() - d0.ln()) / LN_10
}

pub fn rate(bandwidth: f64, power: f64, gt: f64, gr: f64, noise: f64, loss_db: f64) -> f64 {
    let snr = (power.ln() + gt.ln() + gr.ln() - noise.ln() - loss_db * LN_10 / 10.0).exp();
    bandwidth * snr.ln_1p() / LN_2
}

pub fn propagation(satellite: bool, distance: f64) -> f64 {
    if satellite {
        distance / C
    } else {
        0.0
    }
}

pub fn transmission(bits: f64, rate: f64, satellite: bool, local: bool, distance: f64) -> f64 {
    if local {
        0.0
    } else {
        propagation(satellite, distance) + bits / rate
    }
}

pub fn computing(bits: f64, cycles_per_bit: f64, hz: f64) -> f64 {
    bits / (hz / cycles_per_bit)
}

pub fn total(q: f64, t: f64, c: f64) -> f64 {
    c + (t + q)
}
