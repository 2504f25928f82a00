//! End-to-end runs: color transfer before styling, color transfer after
//! styling, and luminance-only styling.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::affine_transfer::{
    apply_affine_map_unclamped, out_of_gamut_fraction, solve_affine_map, transport_cost,
    verify_constraint, AffineColorMap, Regularization, Residuals, Variant,
};
use crate::colorstats::{
    compute_color_stats, compute_scalar_stats, stats_of_planes, ColorStats, ScalarStats,
};
use crate::error::{Error, Result, StageExt};
use crate::imageio::{read_image, to_float, to_u8, write_image, ImageFormat, ImagePlanarF};
use crate::luminance::{
    match_luminance, match_luminance_unclamped, recombine_counting, rgb_to_yiq,
};
use crate::styler_hook::{run_styler, StylerSpec};

/// Above this Frobenius norm a solved `A` is flagged as suspicious.
pub const LARGE_MAP_NORM: f64 = 1e3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Match the style image's colors to the content, then style.
    #[default]
    ColorPre,
    /// Style first, then match the result's colors to the content.
    ColorPost,
    /// Style the luminance only and reuse the content's chroma.
    Luminance,
}

impl Mode {
    pub fn is_color(self) -> bool {
        matches!(self, Mode::ColorPre | Mode::ColorPost)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::ColorPre => "color-pre",
            Mode::ColorPost => "color-post",
            Mode::Luminance => "luminance",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "color-pre" | "color_pre" => Ok(Mode::ColorPre),
            "color-post" | "color_post" => Ok(Mode::ColorPost),
            "luminance" => Ok(Mode::Luminance),
            other => Err(format!("unknown mode '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub mode: Mode,
    pub variant: Variant,
    pub lum_match: bool,
    pub styler: StylerSpec,
    pub regularization: Regularization,
    pub content_path: PathBuf,
    pub style_path: PathBuf,
    pub output_path: PathBuf,
    pub report_path: Option<PathBuf>,
}

impl PipelineConfig {
    pub fn new(
        content: impl Into<PathBuf>,
        style: impl Into<PathBuf>,
        output: impl Into<PathBuf>,
    ) -> Self {
        Self {
            mode: Mode::default(),
            variant: Variant::ImageAnalogies,
            lum_match: false,
            styler: StylerSpec::Identity,
            regularization: Regularization::default(),
            content_path: content.into(),
            style_path: style.into(),
            output_path: output.into(),
            report_path: None,
        }
    }

    pub fn with_mode(mut self, mode: Mode) -> Self {
        self.mode = mode;
        self
    }

    pub fn with_variant(mut self, variant: Variant) -> Self {
        self.variant = variant;
        self
    }

    pub fn with_styler(mut self, styler: StylerSpec) -> Self {
        self.styler = styler;
        self
    }

    pub fn with_lum_match(mut self, on: bool) -> Self {
        self.lum_match = on;
        self
    }

    pub fn with_regularization(mut self, reg: Regularization) -> Self {
        self.regularization = reg;
        self
    }

    pub fn with_report(mut self, path: impl Into<PathBuf>) -> Self {
        self.report_path = Some(path.into());
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.styler.validate()?;
        if self.lum_match && self.mode.is_color() {
            return Err(Error::InvalidSpec(
                "luminance matching only applies to luminance mode".into(),
            ));
        }
        let eps = match self.regularization {
            Regularization::Relative(e) | Regularization::Absolute(e) => e,
        };
        if !(eps.is_finite() && eps >= 0.0) {
            return Err(Error::InvalidSpec(format!(
                "eps must be finite and >= 0, got {eps}"
            )));
        }
        Ok(())
    }
}

/// A solved map together with how well it meets its constraints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapReport {
    #[serde(flatten)]
    pub map: AffineColorMap,
    pub residuals: Residuals,
    pub transport_cost: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LuminanceReport {
    pub content: ScalarStats,
    pub style: ScalarStats,
    /// Style luminance statistics after matching, before clamping.
    pub matched_style: Option<ScalarStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTiming {
    pub stage: String,
    pub ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub mode: Mode,
    pub variant: Option<Variant>,
    pub lum_match: bool,
    pub styler: StylerSpec,
    pub content_stats: ColorStats,
    pub style_stats: ColorStats,
    /// Statistics of the raw styler output (color-post only).
    pub styled_stats: Option<ColorStats>,
    pub map: Option<MapReport>,
    /// Statistics of the color-matched image before clamping.
    pub matched_stats: Option<ColorStats>,
    pub luminance: Option<LuminanceReport>,
    /// Fraction of pixels that needed gamut clamping in the final color step.
    pub clamped_fraction: f64,
    pub output_stats: ColorStats,
    pub timings: Vec<StageTiming>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub image: ImagePlanarF,
    pub report: RunReport,
}

#[derive(Default)]
struct Timer(Vec<StageTiming>);

impl Timer {
    fn time<T>(&mut self, stage: &'static str, f: impl FnOnce() -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f().stage(stage);
        self.0.push(StageTiming {
            stage: stage.to_string(),
            ms: start.elapsed().as_secs_f64() * 1e3,
        });
        out
    }
}

struct ColorMatch {
    image: ImagePlanarF,
    map: MapReport,
    matched_stats: ColorStats,
    clamped_fraction: f64,
}

/// Solves `source -> target`, applies it to `img` and records everything about it.
fn color_match(
    timer: &mut Timer,
    warnings: &mut Vec<String>,
    img: &ImagePlanarF,
    source: &ColorStats,
    target: &ColorStats,
    cfg: &PipelineConfig,
) -> Result<ColorMatch> {
    let map = timer.time("solve_affine_map", || {
        solve_affine_map(source, target, cfg.variant, cfg.regularization)
    })?;
    let residuals = verify_constraint(&map, source, target);
    if !residuals.within_tolerance() {
        warnings.push(format!(
            "{} map misses its constraints: mean residual {:e}, relative covariance residual {:e}",
            map.variant, residuals.mean_residual, residuals.cov_residual_relative
        ));
    }
    let norm = map.a.frobenius();
    if norm > LARGE_MAP_NORM {
        warnings.push(format!(
            "{} map is nearly singular (|A|_F = {norm:.3e}); the source colors are close to degenerate",
            map.variant
        ));
    }
    let (image, matched_stats, clamped_fraction) = timer.time("apply_affine_map", || {
        let planes = apply_affine_map_unclamped(img, &map)?;
        let stats = stats_of_planes([&planes[0], &planes[1], &planes[2]])?;
        let clamped = out_of_gamut_fraction(&planes);
        let image = ImagePlanarF::from_planes_clamped(img.width(), img.height(), planes)?;
        Ok((image, stats, clamped))
    })?;
    Ok(ColorMatch {
        image,
        map: MapReport {
            map,
            residuals,
            transport_cost: transport_cost(&map, source),
        },
        matched_stats,
        clamped_fraction,
    })
}

fn input_stats(
    timer: &mut Timer,
    content: &ImagePlanarF,
    style: &ImagePlanarF,
) -> Result<(ColorStats, ColorStats)> {
    timer.time("color_stats", || {
        Ok((compute_color_stats(content)?, compute_color_stats(style)?))
    })
}

fn styled(
    timer: &mut Timer,
    warnings: &mut Vec<String>,
    spec: &StylerSpec,
    content: &ImagePlanarF,
    style: &ImagePlanarF,
) -> Result<ImagePlanarF> {
    let out = timer.time("run_styler", || run_styler(spec, content, style))?;
    warnings.extend(out.warnings);
    Ok(out.image)
}

/// Color-matches the style image to the content, then styles with the matched style.
pub fn run_color_pre(
    cfg: &PipelineConfig,
    content: &ImagePlanarF,
    style: &ImagePlanarF,
) -> Result<RunOutput> {
    let mut timer = Timer::default();
    let mut warnings = Vec::new();
    let (content_stats, style_stats) = input_stats(&mut timer, content, style)?;
    let matched = color_match(
        &mut timer,
        &mut warnings,
        style,
        &style_stats,
        &content_stats,
        cfg,
    )?;
    let image = styled(
        &mut timer,
        &mut warnings,
        &cfg.styler,
        content,
        &matched.image,
    )?;
    finish(
        image,
        RunReport {
            mode: Mode::ColorPre,
            variant: Some(cfg.variant),
            lum_match: false,
            styler: cfg.styler.clone(),
            content_stats,
            style_stats,
            styled_stats: None,
            map: Some(matched.map),
            matched_stats: Some(matched.matched_stats),
            luminance: None,
            clamped_fraction: matched.clamped_fraction,
            output_stats: content_stats,
            timings: Vec::new(),
            warnings,
        },
        timer,
    )
}

/// Styles with the original inputs, then color-matches the result to the content.
pub fn run_color_post(
    cfg: &PipelineConfig,
    content: &ImagePlanarF,
    style: &ImagePlanarF,
) -> Result<RunOutput> {
    let mut timer = Timer::default();
    let mut warnings = Vec::new();
    let (content_stats, style_stats) = input_stats(&mut timer, content, style)?;
    let raw = styled(&mut timer, &mut warnings, &cfg.styler, content, style)?;
    let styled_stats = timer.time("color_stats", || compute_color_stats(&raw))?;
    let matched = color_match(
        &mut timer,
        &mut warnings,
        &raw,
        &styled_stats,
        &content_stats,
        cfg,
    )?;
    finish(
        matched.image,
        RunReport {
            mode: Mode::ColorPost,
            variant: Some(cfg.variant),
            lum_match: false,
            styler: cfg.styler.clone(),
            content_stats,
            style_stats,
            styled_stats: Some(styled_stats),
            map: Some(matched.map),
            matched_stats: Some(matched.matched_stats),
            luminance: None,
            clamped_fraction: matched.clamped_fraction,
            output_stats: content_stats,
            timings: Vec::new(),
            warnings,
        },
        timer,
    )
}

/// Styles the luminance channels and puts the result under the content's chroma.
pub fn run_luminance(
    cfg: &PipelineConfig,
    content: &ImagePlanarF,
    style: &ImagePlanarF,
) -> Result<RunOutput> {
    let mut timer = Timer::default();
    let mut warnings = Vec::new();
    let (content_stats, style_stats) = input_stats(&mut timer, content, style)?;
    let (content_yiq, style_yiq) = timer.time("rgb_to_yiq", || {
        Ok((rgb_to_yiq(content), rgb_to_yiq(style)))
    })?;
    let (content_l, style_l) = timer.time("color_stats", || {
        Ok((
            compute_scalar_stats(&content_yiq.y)?,
            compute_scalar_stats(&style_yiq.y)?,
        ))
    })?;

    let mut matched_style = None;
    let style_plane = if cfg.lum_match {
        timer.time("match_luminance", || {
            let unclamped = match_luminance_unclamped(&style_yiq.y, content_l, style_l)?;
            matched_style = Some(compute_scalar_stats(&unclamped)?);
            match_luminance(&style_yiq.y, content_l, style_l)
        })?
    } else {
        style_yiq.y.clone()
    };

    let (content_gray, style_gray) = timer.time("rgb_to_yiq", || {
        Ok((
            ImagePlanarF::from_gray(content.width(), content.height(), &content_yiq.y)?,
            ImagePlanarF::from_gray(style.width(), style.height(), &style_plane)?,
        ))
    })?;
    let result = styled(
        &mut timer,
        &mut warnings,
        &cfg.styler,
        &content_gray,
        &style_gray,
    )?;
    let (image, clamped) = timer.time("recombine", || {
        let y = rgb_to_yiq(&result).y;
        recombine_counting(&y, &content_yiq)
    })?;
    let clamped_fraction = clamped as f64 / image.len() as f64;
    finish(
        image,
        RunReport {
            mode: Mode::Luminance,
            variant: None,
            lum_match: cfg.lum_match,
            styler: cfg.styler.clone(),
            content_stats,
            style_stats,
            styled_stats: None,
            map: None,
            matched_stats: None,
            luminance: Some(LuminanceReport {
                content: content_l,
                style: style_l,
                matched_style,
            }),
            clamped_fraction,
            output_stats: content_stats,
            timings: Vec::new(),
            warnings,
        },
        timer,
    )
}

fn finish(image: ImagePlanarF, mut report: RunReport, mut timer: Timer) -> Result<RunOutput> {
    report.output_stats = timer.time("color_stats", || compute_color_stats(&image))?;
    report.timings = timer.0;
    Ok(RunOutput { image, report })
}

/// Runs the configured mode on in-memory images.
pub fn run_images(
    cfg: &PipelineConfig,
    content: &ImagePlanarF,
    style: &ImagePlanarF,
) -> Result<RunOutput> {
    cfg.validate()?;
    match cfg.mode {
        Mode::ColorPre => run_color_pre(cfg, content, style),
        Mode::ColorPost => run_color_post(cfg, content, style),
        Mode::Luminance => run_luminance(cfg, content, style),
    }
}

fn load_inputs(cfg: &PipelineConfig) -> Result<(ImagePlanarF, ImagePlanarF)> {
    let content = read_image(&cfg.content_path)
        .map_err(|e| with_path(e, &cfg.content_path))
        .stage("load_content")?;
    let style = read_image(&cfg.style_path)
        .map_err(|e| with_path(e, &cfg.style_path))
        .stage("load_style")?;
    Ok((to_float(&content), to_float(&style)))
}

fn with_path(e: Error, path: &Path) -> Error {
    match e {
        Error::Io(io) => Error::Io(std::io::Error::new(
            io.kind(),
            format!("{}: {io}", path.display()),
        )),
        other => other,
    }
}

fn save(path: &Path, image: &ImagePlanarF) -> Result<()> {
    write_image(path, &to_u8(image)?).stage("write_output")
}

fn check_output_path(path: &Path) -> Result<()> {
    ImageFormat::from_path(path).map(|_| ()).ok_or_else(|| {
        Error::InvalidSpec(format!(
            "{}: output must end in .png or .ppm",
            path.display()
        ))
    })
}

/// Loads the inputs, runs the configured mode and writes the output image and optional report.
pub fn run(cfg: &PipelineConfig) -> Result<RunReport> {
    cfg.validate()?;
    check_output_path(&cfg.output_path)?;
    let (content, style) = load_inputs(cfg)?;
    let out = run_images(cfg, &content, &style)?;
    save(&cfg.output_path, &out.image)?;
    if let Some(path) = &cfg.report_path {
        write_json(path, &out.report)?;
    }
    Ok(out.report)
}

/// Both color-transfer placements on the same inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub color_pre: RunReport,
    pub color_post: RunReport,
}

/// Output paths used by [`run_compare`]: `name-pre.ext` and `name-post.ext`.
pub fn compare_paths(output: &Path) -> (PathBuf, PathBuf) {
    let stem = output
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let ext = output
        .extension()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let with = |tag: &str| output.with_file_name(format!("{stem}-{tag}.{ext}"));
    (with("pre"), with("post"))
}

/// Runs color-pre and color-post side by side.
pub fn run_compare(cfg: &PipelineConfig) -> Result<CompareReport> {
    if !cfg.mode.is_color() {
        return Err(Error::InvalidSpec(
            "--compare applies to the color modes only".into(),
        ));
    }
    cfg.validate()?;
    check_output_path(&cfg.output_path)?;
    let (content, style) = load_inputs(cfg)?;
    let pre = run_color_pre(cfg, &content, &style)?;
    let post = run_color_post(cfg, &content, &style)?;
    let (pre_path, post_path) = compare_paths(&cfg.output_path);
    save(&pre_path, &pre.image)?;
    save(&post_path, &post.image)?;
    let report = CompareReport {
        color_pre: pre.report,
        color_post: post.report,
    };
    if let Some(path) = &cfg.report_path {
        write_json(path, &report)?;
    }
    Ok(report)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)
        .map_err(Error::from)
        .stage("write_report")
}
