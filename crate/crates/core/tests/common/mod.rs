//! Shared fixtures: deterministic synthetic "photographs".
//!
//! Scenes mix multi-octave value noise, soft-edged shapes with shading, and
//! per-pixel grain, so block averages vary smoothly while JPEG still has
//! texture to destroy.

#![allow(dead_code)]

use sealkit::key::{seed_stream, KeyedStream};
use sealkit::{GrayImage, SecretKey};

pub const SIDE: usize = 512;

pub fn test_key() -> SecretKey {
    "5ea1c0de0badf00d0123456789abcdeffedcba98765432100f1e2d3c4b5a6978"[..48]
        .parse()
        .unwrap()
}

fn unit(s: &mut KeyedStream) -> f64 {
    (s.next_u64() >> 11) as f64 / (1u64 << 53) as f64
}

fn gaussian(s: &mut KeyedStream) -> f64 {
    let u1 = unit(s).max(1e-300);
    let u2 = unit(s);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

fn smooth(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Bilinear value noise with smoothstep easing on a lattice of `cell` pixels.
fn value_noise(s: &mut KeyedStream, side: usize, cell: usize, out: &mut [f64], amp: f64) {
    let n = side / cell + 2;
    let lattice: Vec<f64> = (0..n * n).map(|_| unit(s) * 2.0 - 1.0).collect();
    for y in 0..side {
        let gy = y / cell;
        let ty = smooth((y % cell) as f64 / cell as f64);
        for x in 0..side {
            let gx = x / cell;
            let tx = smooth((x % cell) as f64 / cell as f64);
            let a = lattice[gy * n + gx];
            let b = lattice[gy * n + gx + 1];
            let c = lattice[(gy + 1) * n + gx];
            let d = lattice[(gy + 1) * n + gx + 1];
            let top = a + (b - a) * tx;
            let bottom = c + (d - c) * tx;
            out[y * side + x] += amp * (top + (bottom - top) * ty);
        }
    }
}

pub fn scene(seed: u64) -> GrayImage {
    scene_sized(seed, SIDE)
}

pub fn scene_sized(seed: u64, side: usize) -> GrayImage {
    let mut s = seed_stream(seed.wrapping_mul(0x2545_F491_4F6C_DD1D) ^ 0x5CE7E);
    let mut px = vec![0.0; side * side];

    for (cell, amp) in [
        (128, 45.0),
        (64, 28.0),
        (32, 16.0),
        (16, 9.0),
        (8, 5.0),
        (4, 3.0),
    ] {
        let cell = cell.min(side / 2).max(2);
        value_noise(&mut s, side, cell, &mut px, amp);
    }

    let shapes = 6 + (s.next_below(10).unwrap() as usize);
    for _ in 0..shapes {
        let cx = unit(&mut s) * side as f64;
        let cy = unit(&mut s) * side as f64;
        let rx = (0.04 + 0.2 * unit(&mut s)) * side as f64;
        let ry = (0.04 + 0.2 * unit(&mut s)) * side as f64;
        let level = (unit(&mut s) - 0.5) * 140.0;
        let shade = (unit(&mut s) - 0.5) * 2.0;
        let rect = s.next_below(2).unwrap() == 0;
        let soft = 1.0 + 4.0 * unit(&mut s);
        for y in 0..side {
            let dy = (y as f64 - cy) / ry;
            if dy.abs() > 1.5 {
                continue;
            }
            for x in 0..side {
                let dx = (x as f64 - cx) / rx;
                let dist = if rect {
                    dx.abs().max(dy.abs())
                } else {
                    (dx * dx + dy * dy).sqrt()
                };
                let edge = ((1.0 - dist) * rx.min(ry) / soft).clamp(0.0, 1.0);
                if edge > 0.0 {
                    px[y * side + x] += edge * (level + shade * 25.0 * dx);
                }
            }
        }
    }

    let grain = 1.0 + 3.0 * unit(&mut s);
    for v in px.iter_mut() {
        *v += grain * gaussian(&mut s);
    }

    let (lo, hi) = px
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
            (a.min(v), b.max(v))
        });
    let target_lo = 5.0 + 30.0 * unit(&mut s);
    let target_hi = 220.0 + 33.0 * unit(&mut s);
    let scale = (target_hi - target_lo) / (hi - lo).max(1e-9);
    let samples = px
        .iter()
        .map(|&v| ((v - lo) * scale + target_lo).round().clamp(0.0, 255.0) as u8)
        .collect();
    GrayImage::new(side, side, samples).unwrap()
}
