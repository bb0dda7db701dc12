// SPDX-License-Identifier: Apache-2.0

//! Procedural 28x28 digit images.
//!
//! A stand-in for MNIST when the real files are not available: every digit is
//! a fixed set of strokes drawn with a random affine distortion and stroke
//! width, then rendered with a soft edge. The classes are clearly separable
//! but not trivially so.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::idx::IdxImages;

pub const SIDE: usize = 28;

type Pt = (f64, f64);

fn arc(cx: f64, cy: f64, rx: f64, ry: f64, from: f64, to: f64, n: usize) -> Vec<Pt> {
    (0..=n)
        .map(|i| {
            let a = (from + (to - from) * i as f64 / n as f64) * PI / 180.0;
            (cx + rx * a.cos(), cy + ry * a.sin())
        })
        .collect()
}

/// Polylines of a digit in a unit box, y pointing down.
fn strokes(digit: u8) -> Vec<Vec<Pt>> {
    match digit {
        0 => vec![arc(0.5, 0.5, 0.3, 0.42, 0.0, 360.0, 24)],
        1 => vec![vec![(0.35, 0.25), (0.55, 0.08), (0.55, 0.92)]],
        2 => {
            let mut s = arc(0.5, 0.32, 0.28, 0.24, 180.0, 380.0, 12);
            s.extend([(0.2, 0.9), (0.82, 0.9)]);
            vec![s]
        }
        3 => vec![
            arc(0.48, 0.3, 0.27, 0.22, 200.0, 450.0, 12),
            arc(0.48, 0.7, 0.3, 0.22, 270.0, 520.0, 12),
        ],
        4 => vec![vec![(0.66, 0.92), (0.66, 0.08), (0.18, 0.64), (0.84, 0.64)]],
        5 => {
            let mut s = vec![(0.8, 0.1), (0.28, 0.1), (0.24, 0.46)];
            s.extend(arc(0.48, 0.66, 0.3, 0.25, 225.0, 500.0, 14));
            vec![s]
        }
        6 => {
            let mut s = arc(0.55, 0.5, 0.32, 0.42, 300.0, 180.0, 10);
            s.extend(arc(0.5, 0.7, 0.27, 0.21, 180.0, 540.0, 16));
            vec![s]
        }
        7 => vec![vec![(0.18, 0.1), (0.82, 0.1), (0.4, 0.92)]],
        8 => vec![
            arc(0.5, 0.29, 0.24, 0.2, 0.0, 360.0, 16),
            arc(0.5, 0.7, 0.29, 0.22, 0.0, 360.0, 16),
        ],
        _ => {
            let mut s = arc(0.48, 0.32, 0.27, 0.23, 0.0, 360.0, 16);
            s.extend([(0.75, 0.32), (0.7, 0.92)]);
            vec![s]
        }
    }
}

fn seg_dist(p: Pt, a: Pt, b: Pt) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 == 0.0 {
        0.0
    } else {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    };
    let (qx, qy) = (a.0 + t * dx - p.0, a.1 + t * dy - p.1);
    (qx * qx + qy * qy).sqrt()
}

/// Renders one digit with distortions drawn from `rng`.
pub fn render_digit<R: Rng>(digit: u8, rng: &mut R) -> Vec<u8> {
    let size = rng.random_range(16.0..21.0);
    let rot = rng.random_range(-0.2..0.2f64);
    let shear = rng.random_range(-0.25..0.25);
    let aspect = rng.random_range(0.85..1.15);
    let cx = 14.0 + rng.random_range(-1.5..1.5);
    let cy = 14.0 + rng.random_range(-1.5..1.5);
    let width = rng.random_range(0.4..1.0);
    let (s, c) = rot.sin_cos();
    let map = |(x, y): Pt| -> Pt {
        let (u, v) = ((x - 0.5) * size * aspect, (y - 0.5) * size);
        let u = u + shear * v;
        (cx + c * u - s * v, cy + s * u + c * v)
    };
    let lines: Vec<Vec<Pt>> = strokes(digit)
        .into_iter()
        .map(|l| l.into_iter().map(map).collect())
        .collect();
    let mut img = vec![0u8; SIDE * SIDE];
    for (i, px) in img.iter_mut().enumerate() {
        let p = ((i % SIDE) as f64 + 0.5, (i / SIDE) as f64 + 0.5);
        let d = lines
            .iter()
            .flat_map(|l| l.windows(2).map(|w| seg_dist(p, w[0], w[1])))
            .fold(f64::INFINITY, f64::min);
        let v = (1.0 - (d - width)).clamp(0.0, 1.0);
        *px = (v * 255.0).round() as u8;
    }
    // sparse speckle
    for _ in 0..rng.random_range(0..4) {
        let i = rng.random_range(0..SIDE * SIDE);
        img[i] = img[i].max(rng.random_range(128..=255));
    }
    img
}

/// `n` images with uniformly drawn labels.
pub fn synthetic_digits(n: usize, seed: u64) -> (IdxImages, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pixels = Vec::with_capacity(n * SIDE * SIDE);
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let d = rng.random_range(0..10u8);
        pixels.extend(render_digit(d, &mut rng));
        labels.push(d);
    }
    (
        IdxImages {
            rows: SIDE,
            cols: SIDE,
            pixels,
        },
        labels,
    )
}
