//! Population mean and covariance of pixel colors.
//!
//! Both passes split the pixels into fixed-size blocks, reduce each block in
//! parallel, then combine the block partials with a pairwise tree whose shape
//! depends only on the pixel count. Results are therefore bit-identical for
//! any rayon thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imageio::ImagePlanarF;
use crate::linalg3::{SymMat3, Vec3};

const BLOCK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColorStats {
    pub mean: Vec3,
    pub cov: SymMat3,
    pub n: usize,
}

impl ColorStats {
    pub fn new(mean: Vec3, cov: SymMat3) -> Self {
        Self { mean, cov, n: 1 }
    }
}

/// Mean and population standard deviation of a single plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalarStats {
    pub mean: f64,
    pub std: f64,
}

pub fn compute_color_stats(img: &ImagePlanarF) -> Result<ColorStats> {
    let [r, g, b] = img.planes();
    stats_of_planes([r, g, b])
}

/// Statistics of three equally sized planes, which need not lie in `[0, 1]`.
pub fn stats_of_planes(planes: [&[f64]; 3]) -> Result<ColorStats> {
    let n = planes[0].len();
    if n == 0 {
        return Err(Error::EmptyImage);
    }
    if planes.iter().any(|p| p.len() != n) {
        return Err(Error::Dimension("planes differ in length".into()));
    }
    let inv_n = 1.0 / n as f64;

    let sums: Vec<[f64; 3]> = block_ranges(n)
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut s = [0.0; 3];
            for i in lo..hi {
                for c in 0..3 {
                    s[c] += planes[c][i];
                }
            }
            s
        })
        .collect();
    let sum = tree_reduce(sums, |a, b| std::array::from_fn(|c| a[c] + b[c]));
    let mean = sum.map(|v| v * inv_n);

    // upper triangle order: rr rg rb gg gb bb
    let moments: Vec<[f64; 6]> = block_ranges(n)
        .into_par_iter()
        .map(|(lo, hi)| {
            let mut s = [0.0; 6];
            for i in lo..hi {
                let d0 = planes[0][i] - mean[0];
                let d1 = planes[1][i] - mean[1];
                let d2 = planes[2][i] - mean[2];
                s[0] += d0 * d0;
                s[1] += d0 * d1;
                s[2] += d0 * d2;
                s[3] += d1 * d1;
                s[4] += d1 * d2;
                s[5] += d2 * d2;
            }
            s
        })
        .collect();
    let m = tree_reduce(moments, |a, b| std::array::from_fn(|k| a[k] + b[k])).map(|v| v * inv_n);

    Ok(ColorStats {
        mean: Vec3(mean),
        cov: SymMat3::new(m[0], m[1], m[2], m[3], m[4], m[5]),
        n,
    })
}

pub fn compute_scalar_stats(plane: &[f64]) -> Result<ScalarStats> {
    let n = plane.len();
    if n == 0 {
        return Err(Error::EmptyImage);
    }
    let inv_n = 1.0 / n as f64;
    let partial: Vec<f64> = block_ranges(n)
        .into_par_iter()
        .map(|(lo, hi)| plane[lo..hi].iter().sum::<f64>())
        .collect();
    let mean = tree_reduce(partial, |a, b| a + b) * inv_n;
    let partial: Vec<f64> = block_ranges(n)
        .into_par_iter()
        .map(|(lo, hi)| {
            plane[lo..hi]
                .iter()
                .map(|v| (v - mean) * (v - mean))
                .sum::<f64>()
        })
        .collect();
    let var = tree_reduce(partial, |a, b| a + b) * inv_n;
    Ok(ScalarStats {
        mean,
        std: var.sqrt(),
    })
}

fn block_ranges(n: usize) -> Vec<(usize, usize)> {
    (0..n.div_ceil(BLOCK))
        .map(|b| (b * BLOCK, ((b + 1) * BLOCK).min(n)))
        .collect()
}

/// Pairwise reduction: adjacent pairs combined level by level.
fn tree_reduce<T: Copy>(mut items: Vec<T>, combine: impl Fn(T, T) -> T) -> T {
    assert!(!items.is_empty());
    while items.len() > 1 {
        items = items
            .chunks(2)
            .map(|pair| match pair {
                [a, b] => combine(*a, *b),
                [a] => *a,
                _ => unreachable!(),
            })
            .collect();
    }
    items[0]
}
