//! YIQ split/merge and linear luminance matching.

use std::sync::LazyLock;

use rayon::prelude::*;

use crate::colorstats::ScalarStats;
use crate::error::{Error, Result};
use crate::imageio::ImagePlanarF;
use crate::linalg3::{Mat3, Vec3};

/// NTSC RGB -> YIQ.
pub const RGB_TO_YIQ: Mat3 = Mat3([
    [0.299, 0.587, 0.114],
    [0.595716, -0.274453, -0.321263],
    [0.211456, -0.522591, 0.311135],
]);

static YIQ_TO_RGB: LazyLock<Mat3> =
    LazyLock::new(|| RGB_TO_YIQ.inverse().expect("YIQ matrix is invertible"));

pub fn yiq_to_rgb_matrix() -> Mat3 {
    *YIQ_TO_RGB
}

/// Style standard deviations at or below this are rejected by [`match_luminance`].
pub const MIN_STYLE_STD: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct YiqImage {
    width: usize,
    height: usize,
    pub y: Vec<f64>,
    pub i: Vec<f64>,
    pub q: Vec<f64>,
}

impl YiqImage {
    pub fn new(width: usize, height: usize, y: Vec<f64>, i: Vec<f64>, q: Vec<f64>) -> Result<Self> {
        let n = width * height;
        if n == 0 || y.len() != n || i.len() != n || q.len() != n {
            return Err(Error::Dimension(format!(
                "YIQ planes must each hold {width}x{height} samples"
            )));
        }
        if [&y, &i, &q]
            .iter()
            .any(|p| p.iter().any(|v| !v.is_finite()))
        {
            return Err(Error::Numeric("non-finite YIQ sample".into()));
        }
        Ok(Self {
            width,
            height,
            y,
            i,
            q,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }
}

fn transform_planes(m: &Mat3, src: [&[f64]; 3]) -> [Vec<f64>; 3] {
    let n = src[0].len();
    let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let [o0, o1, o2] = &mut out;
    const CHUNK: usize = 8192;
    o0.par_chunks_mut(CHUNK)
        .zip(o1.par_chunks_mut(CHUNK))
        .zip(o2.par_chunks_mut(CHUNK))
        .enumerate()
        .for_each(|(k, ((o0, o1), o2))| {
            let base = k * CHUNK;
            for j in 0..o0.len() {
                let idx = base + j;
                let v = *m * Vec3([src[0][idx], src[1][idx], src[2][idx]]);
                o0[j] = v[0];
                o1[j] = v[1];
                o2[j] = v[2];
            }
        });
    out
}

pub fn rgb_to_yiq(img: &ImagePlanarF) -> YiqImage {
    let [r, g, b] = img.planes();
    let [y, i, q] = transform_planes(&RGB_TO_YIQ, [r, g, b]);
    YiqImage {
        width: img.width(),
        height: img.height(),
        y,
        i,
        q,
    }
}

/// Converts back to RGB without clamping.
pub fn yiq_to_rgb_unclamped(img: &YiqImage) -> [Vec<f64>; 3] {
    transform_planes(&YIQ_TO_RGB, [&img.y, &img.i, &img.q])
}

pub fn yiq_to_rgb(img: &YiqImage) -> ImagePlanarF {
    yiq_to_rgb_counting(img).0
}

/// Like [`yiq_to_rgb`], also returning how many pixels needed clamping.
pub fn yiq_to_rgb_counting(img: &YiqImage) -> (ImagePlanarF, usize) {
    let planes = yiq_to_rgb_unclamped(img);
    let clamped = (0..img.y.len())
        .filter(|&k| planes.iter().any(|p| !(0.0..=1.0).contains(&p[k])))
        .count();
    let out = ImagePlanarF::from_planes_clamped(img.width, img.height, planes)
        .expect("finite YIQ input gives finite RGB");
    (out, clamped)
}

/// `(σ_dst / σ_src) (l - μ_src) + μ_dst` per sample, not clamped.
pub fn match_luminance_unclamped(
    plane: &[f64],
    target: ScalarStats,
    source: ScalarStats,
) -> Result<Vec<f64>> {
    if !(source.std > MIN_STYLE_STD) {
        return Err(Error::DegenerateLuminance { std: source.std });
    }
    let gain = target.std / source.std;
    Ok(plane
        .iter()
        .map(|&l| gain * (l - source.mean) + target.mean)
        .collect())
}

/// Gives the style luminance the content's mean and standard deviation, then clamps to `[0, 1]`.
pub fn match_luminance(
    style_l: &[f64],
    content: ScalarStats,
    style: ScalarStats,
) -> Result<Vec<f64>> {
    let mut out = match_luminance_unclamped(style_l, content, style)?;
    for v in out.iter_mut() {
        *v = v.clamp(0.0, 1.0);
    }
    Ok(out)
}

/// Puts a new luminance plane under the content's chroma.
pub fn recombine(y_styled: &[f64], content: &YiqImage) -> Result<ImagePlanarF> {
    recombine_counting(y_styled, content).map(|(img, _)| img)
}

pub fn recombine_counting(y_styled: &[f64], content: &YiqImage) -> Result<(ImagePlanarF, usize)> {
    if y_styled.len() != content.y.len() {
        return Err(Error::Dimension(format!(
            "styled luminance has {} samples, content has {}",
            y_styled.len(),
            content.y.len()
        )));
    }
    let merged = YiqImage::new(
        content.width,
        content.height,
        y_styled.to_vec(),
        content.i.clone(),
        content.q.clone(),
    )?;
    Ok(yiq_to_rgb_counting(&merged))
}
