//! Command-line front end. Exit codes: 0 success, 1 usage error, 2 processing error.

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Duration;

use clap::builder::{PossibleValuesParser, TypedValueParser};
use clap::error::ErrorKind;
use clap::Parser;

use crate::affine_transfer::{Regularization, Variant};
use crate::error::Error;
use crate::imageio::ImageFormat;
use crate::pipeline::{run, run_compare, Mode, PipelineConfig};
use crate::styler_hook::StylerSpec;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_PROCESSING: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "stylecolor",
    version,
    about = "Preserve the content image's colors around a style-transfer step",
    after_help = "STYLER TEMPLATES:\n  --styler-cmd runs through `sh -c` and must contain {content}, {style} and {output}\n  exactly once each; they are replaced by PNG paths in a scratch directory."
)]
struct Args {
    /// Content image (PNG or binary PPM)
    #[arg(long, value_name = "PATH")]
    content: PathBuf,

    /// Style image (PNG or binary PPM)
    #[arg(long, value_name = "PATH")]
    style: PathBuf,

    /// Output image; the extension (.png or .ppm) picks the format
    #[arg(long, value_name = "PATH")]
    out: PathBuf,

    #[arg(
        long,
        default_value = "color-pre",
        value_parser = PossibleValuesParser::new(["color-pre", "color-post", "luminance"])
            .map(|s| s.parse::<Mode>().expect("listed mode"))
    )]
    mode: Mode,

    /// Affine solver for the color modes [default: ia]
    #[arg(
        long,
        value_parser = PossibleValuesParser::new(["cholesky", "ia", "mkl"])
            .map(|s| s.parse::<Variant>().expect("listed variant"))
    )]
    variant: Option<Variant>,

    /// Match the style luminance to the content before styling (luminance mode)
    #[arg(long)]
    lum_match: bool,

    /// External styler command template
    #[arg(long, value_name = "TEMPLATE", conflicts_with = "styler")]
    styler_cmd: Option<String>,

    /// Built-in styler: identity or blend:ALPHA [default: identity]
    #[arg(long, value_name = "KIND", value_parser = parse_builtin_styler)]
    styler: Option<StylerSpec>,

    /// Seconds before the external styler is killed
    #[arg(long, value_name = "SECS", requires = "styler_cmd")]
    timeout: Option<f64>,

    /// Absolute covariance regularization [default: 1e-8 * trace / 3 per covariance]
    #[arg(long, value_name = "FLOAT")]
    eps: Option<f64>,

    /// Write a JSON run report here
    #[arg(long, value_name = "PATH")]
    report: Option<PathBuf>,

    /// Run color-pre and color-post together, writing NAME-pre.EXT and NAME-post.EXT
    #[arg(long)]
    compare: bool,

    /// Worker threads [default: all cores]
    #[arg(long, value_name = "N")]
    threads: Option<usize>,
}

fn parse_builtin_styler(s: &str) -> Result<StylerSpec, String> {
    if s == "identity" {
        return Ok(StylerSpec::Identity);
    }
    let alpha = s
        .strip_prefix("blend:")
        .ok_or_else(|| format!("expected 'identity' or 'blend:ALPHA', got '{s}'"))?;
    let alpha: f64 = alpha
        .parse()
        .map_err(|_| format!("blend alpha '{alpha}' is not a number"))?;
    StylerSpec::blend(alpha).map_err(|e| e.to_string())
}

fn build_config(args: &Args) -> Result<PipelineConfig, String> {
    if args.lum_match && args.mode != Mode::Luminance {
        return Err("--lum-match only applies to --mode luminance".into());
    }
    if args.variant.is_some() && args.mode == Mode::Luminance {
        return Err("--variant only applies to the color modes".into());
    }
    if args.compare && args.mode == Mode::Luminance {
        return Err("--compare only applies to the color modes".into());
    }
    if ImageFormat::from_path(&args.out).is_none() {
        return Err(format!(
            "--out {}: extension must be .png or .ppm",
            args.out.display()
        ));
    }
    if args.threads == Some(0) {
        return Err("--threads must be at least 1".into());
    }

    let styler = match (&args.styler_cmd, &args.styler) {
        (Some(template), _) => {
            let secs = args
                .timeout
                .unwrap_or(crate::styler_hook::DEFAULT_TIMEOUT.as_secs_f64());
            let timeout = Duration::try_from_secs_f64(secs)
                .map_err(|_| format!("--timeout {secs} is not a valid duration"))?;
            StylerSpec::external(template.clone(), timeout).map_err(|e| e.to_string())?
        }
        (None, Some(spec)) => spec.clone(),
        (None, None) => StylerSpec::Identity,
    };

    let regularization = match args.eps {
        Some(eps) if eps.is_finite() && eps >= 0.0 => Regularization::Absolute(eps),
        Some(eps) => return Err(format!("--eps must be finite and >= 0, got {eps}")),
        None => Regularization::default(),
    };

    let mut cfg = PipelineConfig::new(&args.content, &args.style, &args.out)
        .with_mode(args.mode)
        .with_variant(args.variant.unwrap_or(Variant::ImageAnalogies))
        .with_lum_match(args.lum_match)
        .with_styler(styler)
        .with_regularization(regularization);
    if let Some(report) = &args.report {
        cfg = cfg.with_report(report);
    }
    Ok(cfg)
}

fn execute(args: &Args, cfg: &PipelineConfig) -> Result<Vec<String>, Error> {
    if args.compare {
        let report = run_compare(cfg)?;
        let mut warnings = report.color_pre.warnings;
        warnings.extend(report.color_post.warnings);
        Ok(warnings)
    } else {
        Ok(run(cfg)?.warnings)
    }
}

/// Parses `argv` (including the program name), runs, and returns the exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(args) => args,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
        }
    };
    let cfg = match build_config(&args) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("error: {msg}\n\nFor more information, try '--help'.");
            return EXIT_USAGE;
        }
    };

    let result = match args.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| execute(&args, &cfg)),
            Err(e) => {
                eprintln!("error: cannot start {n} worker threads: {e}");
                return EXIT_PROCESSING;
            }
        },
        None => execute(&args, &cfg),
    };

    match result {
        Ok(warnings) => {
            for w in warnings {
                eprintln!("warning: {w}");
            }
            EXIT_OK
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_PROCESSING
        }
    }
}
