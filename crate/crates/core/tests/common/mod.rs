//! Independent reference implementations shared by the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use pvm_core::analysis::histogram_entropy;
use pvm_core::unit::{gradients, init_weights};
use pvm_core::{Frame, UnitSpec, UnitWeights};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn spec(signal: usize, hidden: usize, context: usize) -> UnitSpec {
    UnitSpec {
        unit_id: 0,
        level: 0,
        signal_dim: signal,
        hidden_dim: hidden,
        context_dim: context,
        tile: None,
    }
}

/// `½Σ(P* − target)²` with plain loops over the row-major weight layout.
pub fn oracle_loss(s: &UnitSpec, w: &UnitWeights, input: &[f64], target: &[f64]) -> f64 {
    let sig = |z: f64| 1.0 / (1.0 + (-z).exp());
    let n = input.len();
    let mut h = vec![0.0; s.hidden_dim];
    for j in 0..s.hidden_dim {
        let mut z = w.hidden_bias[j];
        for k in 0..n {
            z += w.hidden_weights[j * n + k] * input[k];
        }
        h[j] = sig(z);
    }
    let mut loss = 0.0;
    for i in 0..s.signal_dim {
        let mut z = w.output_bias[i];
        for j in 0..s.hidden_dim {
            z += w.output_weights[i * s.hidden_dim + j] * h[j];
        }
        let d = sig(z) - target[i];
        loss += 0.5 * d * d;
    }
    loss
}

fn params_mut(w: &mut UnitWeights) -> [&mut Vec<f64>; 4] {
    [
        &mut w.hidden_weights,
        &mut w.hidden_bias,
        &mut w.output_weights,
        &mut w.output_bias,
    ]
}

/// Largest relative error between analytic and central-difference gradients
/// (ε = 1e-5) over every parameter of a randomly weighted unit.
pub fn worst_gradient_error(s: &UnitSpec, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = init_weights(s, seed);
    // wider than the init range so no gradient is negligibly small
    for p in params_mut(&mut w) {
        for v in p.iter_mut() {
            *v = rng.gen_range(-1.5..1.5);
        }
    }
    let input: Vec<f64> = (0..s.input_dim()).map(|_| rng.gen()).collect();
    let target: Vec<f64> = (0..s.signal_dim).map(|_| rng.gen()).collect();
    let g = gradients(s, &w, &input, &target);
    let analytic = [&g.hidden_weights, &g.hidden_bias, &g.output_weights, &g.output_bias];

    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for (pi, grad) in analytic.iter().enumerate() {
        for k in 0..grad.len() {
            let mut plus = w.clone();
            params_mut(&mut plus)[pi][k] += eps;
            let mut minus = w.clone();
            params_mut(&mut minus)[pi][k] -= eps;
            let numeric =
                (oracle_loss(s, &plus, &input, &target) - oracle_loss(s, &minus, &input, &target)) / (2.0 * eps);
            let denom = numeric.abs().max(grad[k].abs()).max(1e-7);
            worst = worst.max((numeric - grad[k]).abs() / denom);
        }
    }
    worst
}

/// Best window sum over all channels and its top-left, first hit in
/// row-major order.
pub fn naive_windows(map: &Frame, ww: usize, wh: usize) -> (f64, (usize, usize)) {
    let mut best = (f64::NEG_INFINITY, (0, 0));
    for y0 in 0..=map.height - wh {
        for x0 in 0..=map.width - ww {
            let mut s = 0.0;
            for y in y0..y0 + wh {
                for x in x0..x0 + ww {
                    for c in 0..3 {
                        s += map.get(x, y, c);
                    }
                }
            }
            if s > best.0 {
                best = (s, (x0, y0));
            }
        }
    }
    best
}

/// Per-pixel histogram over the border-clipped disk, channels summed.
pub fn naive_entropy(frame: &Frame, r: usize) -> Vec<f64> {
    let q = frame.to_u8();
    let (w, h) = (frame.width as i64, frame.height as i64);
    let r = r as i64;
    let mut out = vec![0.0; (w * h) as usize];
    for y in 0..h {
        for x in 0..w {
            let mut total = 0.0;
            for c in 0..3 {
                let mut hist = vec![0u32; 256];
                let mut n = 0;
                for dy in -r..=r {
                    for dx in -r..=r {
                        let (xx, yy) = (x + dx, y + dy);
                        if dx * dx + dy * dy <= r * r && (0..w).contains(&xx) && (0..h).contains(&yy) {
                            hist[q[((yy * w + xx) * 3 + c) as usize] as usize] += 1;
                            n += 1;
                        }
                    }
                }
                total += histogram_entropy(&hist, n);
            }
            out[(y * w + x) as usize] = total;
        }
    }
    out
}

/// Frame whose bytes take `levels` evenly spaced values.
pub fn random_frame(w: usize, h: usize, levels: u32, rng: &mut impl Rng) -> Frame {
    let step = if levels > 1 { 255 / (levels - 1) } else { 0 };
    let bytes: Vec<u8> = (0..w * h * 3).map(|_| (rng.gen_range(0..levels) * step) as u8).collect();
    Frame::from_u8(w, h, &bytes)
}

/// Uniform random frame in [0, 1).
pub fn noise_frame(w: usize, h: usize, rng: &mut impl Rng) -> Frame {
    Frame { width: w, height: h, data: (0..w * h * 3).map(|_| rng.gen()).collect() }
}
