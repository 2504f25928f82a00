#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use stylecolor::colorstats::ColorStats;
use stylecolor::imageio::ImagePlanarF;
use stylecolor::linalg3::{Mat3, SymMat3, Vec3};

use std::f64::consts::TAU;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_mat(rng: &mut impl Rng) -> Mat3 {
    Mat3(std::array::from_fn(|_| {
        std::array::from_fn(|_| rng.random_range(-1.0..1.0))
    }))
}

/// `M M^T + 0.01 I` with `M` uniform in `[-1, 1]`.
pub fn random_spd(rng: &mut impl Rng) -> SymMat3 {
    let m = random_mat(rng);
    (m * m.transpose()).symmetric_part().add_identity(0.01)
}

pub fn random_stats(rng: &mut impl Rng) -> ColorStats {
    ColorStats::new(
        Vec3(std::array::from_fn(|_| rng.random_range(0.0..1.0))),
        random_spd(rng),
    )
}

pub fn permutation(p: [usize; 3]) -> Mat3 {
    let mut m = Mat3::ZERO;
    for (r, &c) in p.iter().enumerate() {
        m.0[r][c] = 1.0;
    }
    m
}

/// Stats of the channel-permuted pixels `P x`.
pub fn permute_stats(s: &ColorStats, p: &Mat3) -> ColorStats {
    ColorStats::new(*p * s.mean, s.cov.congruence(&p.transpose()))
}

fn build(
    w: usize,
    h: usize,
    seed: u64,
    f: impl Fn(f64, f64) -> [f64; 3],
    noise: f64,
) -> ImagePlanarF {
    let mut rng = rng(seed);
    let mut planes = [
        Vec::with_capacity(w * h),
        Vec::with_capacity(w * h),
        Vec::with_capacity(w * h),
    ];
    for y in 0..h {
        for x in 0..w {
            let rgb = f(x as f64 / w as f64, y as f64 / h as f64);
            for c in 0..3 {
                let v = rgb[c] + rng.random_range(-noise..noise);
                planes[c].push(v.clamp(0.0, 1.0));
            }
        }
    }
    ImagePlanarF::from_planes(w, h, planes).unwrap()
}

/// A muted landscape: bluish sky over a green-brown field.
pub fn synthetic_content(w: usize, h: usize) -> ImagePlanarF {
    build(
        w,
        h,
        101,
        |u, v| {
            let horizon = 0.45 + 0.05 * (TAU * u).sin();
            if v < horizon {
                [0.45 + 0.1 * u, 0.55 + 0.1 * v, 0.7 - 0.1 * v]
            } else {
                let t = (9.0 * u + 3.0 * v).sin().powi(2);
                [0.35 + 0.15 * t, 0.45 + 0.1 * (7.0 * v).cos(), 0.3 + 0.1 * u]
            }
        },
        0.03,
    )
}

/// Warm swirling strokes: oranges and purples with little green.
pub fn synthetic_style(w: usize, h: usize) -> ImagePlanarF {
    build(
        w,
        h,
        202,
        |u, v| {
            let t = (10.0 * ((u - 0.5).powi(2) + (v - 0.4).powi(2)) * TAU).sin();
            let s = (8.0 * u * TAU).cos();
            [
                0.65 + 0.2 * t,
                0.35 + 0.12 * s,
                0.3 + 0.15 * t * (5.0 * v).cos(),
            ]
        },
        0.05,
    )
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
