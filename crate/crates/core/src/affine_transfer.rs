//! Affine color maps `x -> A x + b` that carry one color distribution's mean
//! and covariance onto another's.
//!
//! Any `A` with `A Σ_src A^T = Σ_dst` and `b = μ_dst - A μ_src` matches the
//! first two moments. Three members of that family are provided:
//!
//! * [`Variant::Cholesky`]: `A = L_dst L_src^{-1}` from the triangular factors.
//!   Depends on the channel order.
//! * [`Variant::ImageAnalogies`]: `A = Σ_dst^{1/2} Σ_src^{-1/2}` with symmetric
//!   square roots.
//! * [`Variant::Mkl`]: the Monge-Kantorovich linear map
//!   `A = Σ_src^{-1/2} (Σ_src^{1/2} Σ_dst Σ_src^{1/2})^{1/2} Σ_src^{-1/2}`,
//!   the member of the family with least expected squared displacement.
//!
//! Both covariances are regularized as `Σ + eps I` before factoring.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::colorstats::ColorStats;
use crate::error::{Error, Result};
use crate::imageio::ImagePlanarF;
use crate::linalg3::{
    cholesky, lower_triangular_inverse, sym_inv_sqrt, sym_sqrt, Mat3, SymMat3, Vec3,
};

/// Default relative regularization: `eps = 1e-8 * trace(Σ) / 3` per covariance.
pub const DEFAULT_RELATIVE_EPS: f64 = 1e-8;

/// Relative covariance residual a solved map must stay under.
pub const COV_RESIDUAL_TOLERANCE: f64 = 1e-8;

pub const MEAN_RESIDUAL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Cholesky,
    ImageAnalogies,
    Mkl,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Cholesky, Variant::ImageAnalogies, Variant::Mkl];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Cholesky => "cholesky",
            Variant::ImageAnalogies => "image_analogies",
            Variant::Mkl => "mkl",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "cholesky" | "chol" => Ok(Variant::Cholesky),
            "ia" | "image_analogies" | "image-analogies" => Ok(Variant::ImageAnalogies),
            "mkl" => Ok(Variant::Mkl),
            other => Err(format!(
                "unknown variant '{other}' (expected cholesky, ia or mkl)"
            )),
        }
    }
}

/// How much to add to each covariance diagonal before factoring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Regularization {
    /// `rel * trace(Σ) / 3`, computed separately for each covariance.
    Relative(f64),
    /// The same absolute value for both covariances.
    Absolute(f64),
}

impl Default for Regularization {
    fn default() -> Self {
        Regularization::Relative(DEFAULT_RELATIVE_EPS)
    }
}

impl Regularization {
    pub fn eps_for(self, cov: &SymMat3) -> f64 {
        match self {
            Regularization::Relative(rel) => rel * cov.trace() / 3.0,
            Regularization::Absolute(eps) => eps,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineColorMap {
    pub variant: Variant,
    #[serde(rename = "A")]
    pub a: Mat3,
    pub b: Vec3,
    /// Diagonal shift that was applied to the source covariance.
    pub source_eps: f64,
    /// Diagonal shift that was applied to the target covariance.
    pub target_eps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residuals {
    /// `|A μ_src + b - μ_dst|_2`
    pub mean_residual: f64,
    /// `|A Σ̃_src A^T - Σ̃_dst|_F`
    pub cov_residual: f64,
    /// `cov_residual / |Σ̃_dst|_F`
    pub cov_residual_relative: f64,
}

impl Residuals {
    pub fn within_tolerance(&self) -> bool {
        self.mean_residual < MEAN_RESIDUAL_TOLERANCE
            && self.cov_residual_relative < COV_RESIDUAL_TOLERANCE
    }
}

impl AffineColorMap {
    /// The map with `A = I`, `b = 0` and no regularization.
    pub fn identity(variant: Variant) -> Self {
        Self::from_parts(variant, Mat3::IDENTITY, Vec3::ZERO)
    }

    pub fn from_parts(variant: Variant, a: Mat3, b: Vec3) -> Self {
        Self {
            variant,
            a,
            b,
            source_eps: 0.0,
            target_eps: 0.0,
        }
    }

    pub fn apply_pixel(&self, x: Vec3) -> Vec3 {
        self.a * x + self.b
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite()
    }
}

/// Solves for the map carrying `source` statistics onto `target` statistics.
pub fn solve_affine_map(
    source: &ColorStats,
    target: &ColorStats,
    variant: Variant,
    reg: Regularization,
) -> Result<AffineColorMap> {
    if !(source.cov.is_finite()
        && target.cov.is_finite()
        && source.mean.is_finite()
        && target.mean.is_finite())
    {
        return Err(Error::Numeric("non-finite color statistics".into()));
    }
    let source_eps = reg.eps_for(&source.cov);
    let target_eps = reg.eps_for(&target.cov);
    let src = source.cov.add_identity(source_eps);
    let dst = target.cov.add_identity(target_eps);

    let a = match variant {
        Variant::Cholesky => {
            let l_src = cholesky(&src, 0.0).map_err(|e| degenerate("source", e))?;
            let l_dst = cholesky(&dst, 0.0).map_err(|e| degenerate("target", e))?;
            l_dst * lower_triangular_inverse(&l_src).map_err(|e| degenerate("source", e))?
        }
        Variant::ImageAnalogies => {
            let dst_half = sym_sqrt(&dst).map_err(|e| degenerate("target", e))?;
            let src_inv_half = sym_inv_sqrt(&src, 0.0).map_err(|e| degenerate("source", e))?;
            dst_half.to_mat3() * src_inv_half.to_mat3()
        }
        Variant::Mkl => {
            let src_half = sym_sqrt(&src).map_err(|e| degenerate("source", e))?;
            let src_inv_half = sym_inv_sqrt(&src, 0.0).map_err(|e| degenerate("source", e))?;
            let middle = dst.congruence(&src_half.to_mat3());
            let middle_half = sym_sqrt(&middle).map_err(|e| degenerate("target", e))?;
            let a = src_inv_half.to_mat3() * middle_half.to_mat3() * src_inv_half.to_mat3();
            // exactly symmetric in theory; drop the rounding asymmetry
            a.symmetric_part().to_mat3()
        }
    };
    if !a.is_finite() {
        return Err(Error::DegenerateStats(format!(
            "{variant} map has non-finite entries"
        )));
    }
    let b = target.mean - a * source.mean;
    Ok(AffineColorMap {
        variant,
        a,
        b,
        source_eps,
        target_eps,
    })
}

fn degenerate(which: &str, e: Error) -> Error {
    Error::DegenerateStats(format!("{which} covariance: {e}"))
}

pub fn verify_constraint(
    map: &AffineColorMap,
    source: &ColorStats,
    target: &ColorStats,
) -> Residuals {
    let src = source.cov.add_identity(map.source_eps).to_mat3();
    let dst = target.cov.add_identity(map.target_eps).to_mat3();
    let mean_residual = (map.a * source.mean + map.b - target.mean).norm();
    let cov_residual = (map.a * src * map.a.transpose() - dst).frobenius();
    let scale = dst.frobenius();
    let cov_residual_relative = if scale > 0.0 {
        cov_residual / scale
    } else {
        cov_residual
    };
    Residuals {
        mean_residual,
        cov_residual,
        cov_residual_relative,
    }
}

/// Expected squared displacement `E|(A - I) x + b|^2` for `x ~ (μ_src, Σ̃_src)`.
pub fn transport_cost(map: &AffineColorMap, source: &ColorStats) -> f64 {
    let d = map.a - Mat3::IDENTITY;
    let src = source.cov.add_identity(map.source_eps).to_mat3();
    let shift = d * source.mean + map.b;
    shift.dot(shift) + (d * src * d.transpose()).trace()
}

/// Applies the map to every pixel and clamps to `[0, 1]`.
pub fn apply_affine_map(img: &ImagePlanarF, map: &AffineColorMap) -> Result<ImagePlanarF> {
    let planes = apply_affine_map_unclamped(img, map)?;
    ImagePlanarF::from_planes_clamped(img.width(), img.height(), planes)
}

/// Applies the map without clamping, so samples may leave `[0, 1]`.
pub fn apply_affine_map_unclamped(
    img: &ImagePlanarF,
    map: &AffineColorMap,
) -> Result<[Vec<f64>; 3]> {
    if !map.is_finite() {
        return Err(Error::Numeric("affine map has non-finite entries".into()));
    }
    let n = img.len();
    let [r, g, b] = img.planes();
    let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    let [or, og, ob] = &mut out;
    let row = img.width();
    or.par_chunks_mut(row)
        .zip(og.par_chunks_mut(row))
        .zip(ob.par_chunks_mut(row))
        .enumerate()
        .for_each(|(y, ((or, og), ob))| {
            let base = y * row;
            for x in 0..or.len() {
                let i = base + x;
                let p = map.apply_pixel(Vec3([r[i], g[i], b[i]]));
                or[x] = p[0];
                og[x] = p[1];
                ob[x] = p[2];
            }
        });
    Ok(out)
}

/// Fraction of pixels with at least one channel outside `[0, 1]`.
pub fn out_of_gamut_fraction(planes: &[Vec<f64>; 3]) -> f64 {
    let n = planes[0].len();
    if n == 0 {
        return 0.0;
    }
    let bad = (0..n)
        .filter(|&i| planes.iter().any(|p| !(0.0..=1.0).contains(&p[i])))
        .count();
    bad as f64 / n as f64
}
