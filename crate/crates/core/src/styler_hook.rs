//! The style-transfer stage, seen from the outside.
//!
//! The neural synthesis itself is not part of this crate. A [`StylerSpec`]
//! either shells out to an external command or runs one of two mock stylers
//! (identity and a per-pixel blend) that keep the whole pipeline testable.

use std::fs::File;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imageio::{read_image, to_float, to_u8, write_image, ImagePlanarF};

pub const PLACEHOLDERS: [&str; 3] = ["{content}", "{style}", "{output}"];

pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(3600);

/// Longest stderr/stdout excerpt carried in a [`Error::StylerFailed`].
const DIAGNOSTIC_LIMIT: usize = 4096;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum StylerSpec {
    /// Runs `command_template` through `sh -c` after substituting the
    /// `{content}`, `{style}` and `{output}` placeholders with scratch paths.
    External {
        command_template: String,
        #[serde(with = "duration_secs")]
        timeout: Duration,
    },
    /// Returns the content image.
    Identity,
    /// `alpha * style + (1 - alpha) * content`, style resampled to the content size.
    MockBlend { alpha: f64 },
}

mod duration_secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Duration::try_from_secs_f64(secs).map_err(serde::de::Error::custom)
    }
}

impl StylerSpec {
    pub fn external(command_template: impl Into<String>, timeout: Duration) -> Result<Self> {
        let spec = StylerSpec::External {
            command_template: command_template.into(),
            timeout,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn blend(alpha: f64) -> Result<Self> {
        let spec = StylerSpec::MockBlend { alpha };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            StylerSpec::External {
                command_template, ..
            } => {
                for p in PLACEHOLDERS {
                    let count = command_template.matches(p).count();
                    if count != 1 {
                        return Err(Error::InvalidSpec(format!(
                            "command template must contain {p} exactly once (found {count})"
                        )));
                    }
                }
                Ok(())
            }
            StylerSpec::Identity => Ok(()),
            StylerSpec::MockBlend { alpha } => {
                if (0.0..=1.0).contains(alpha) {
                    Ok(())
                } else {
                    Err(Error::InvalidSpec(format!(
                        "blend alpha {alpha} outside [0, 1]"
                    )))
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StylerOutput {
    pub image: ImagePlanarF,
    pub warnings: Vec<String>,
}

pub fn run_styler(
    spec: &StylerSpec,
    content: &ImagePlanarF,
    style: &ImagePlanarF,
) -> Result<StylerOutput> {
    spec.validate()?;
    match spec {
        StylerSpec::Identity => Ok(StylerOutput {
            image: content.clone(),
            warnings: Vec::new(),
        }),
        StylerSpec::MockBlend { alpha } => Ok(StylerOutput {
            image: blend(content, style, *alpha)?,
            warnings: Vec::new(),
        }),
        StylerSpec::External {
            command_template,
            timeout,
        } => run_external(command_template, *timeout, content, style),
    }
}

fn blend(content: &ImagePlanarF, style: &ImagePlanarF, alpha: f64) -> Result<ImagePlanarF> {
    let style = style.resize_nearest(content.width(), content.height())?;
    let beta = 1.0 - alpha;
    let planes = std::array::from_fn(|c| {
        content
            .plane(c)
            .iter()
            .zip(style.plane(c))
            .map(|(&x, &s)| alpha * s + beta * x)
            .collect()
    });
    ImagePlanarF::from_planes_clamped(content.width(), content.height(), planes)
}

/// Single-quotes a path for `sh`.
fn shell_quote(path: &Path) -> String {
    let s = path.to_string_lossy();
    format!("'{}'", s.replace('\'', r"'\''"))
}

fn run_external(
    template: &str,
    timeout: Duration,
    content: &ImagePlanarF,
    style: &ImagePlanarF,
) -> Result<StylerOutput> {
    // removed on drop, whichever way this function exits
    let scratch = tempfile::Builder::new().prefix("stylecolor-").tempdir()?;
    let content_path = scratch.path().join("content.png");
    let style_path = scratch.path().join("style.png");
    let output_path = scratch.path().join("output.png");
    let stdout_path = scratch.path().join("stdout.log");
    let stderr_path = scratch.path().join("stderr.log");
    write_image(&content_path, &to_u8(content)?)?;
    write_image(&style_path, &to_u8(style)?)?;

    let command = template
        .replace("{content}", &shell_quote(&content_path))
        .replace("{style}", &shell_quote(&style_path))
        .replace("{output}", &shell_quote(&output_path));

    let mut child = Command::new("sh")
        .arg("-c")
        .arg(&command)
        .current_dir(scratch.path())
        .stdin(Stdio::null())
        .stdout(File::create(&stdout_path)?)
        .stderr(File::create(&stderr_path)?)
        .spawn()?;

    let started = Instant::now();
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break status;
        }
        if started.elapsed() >= timeout {
            let _ = child.kill();
            let _ = child.wait();
            return Err(Error::Timeout(timeout));
        }
        std::thread::sleep(Duration::from_millis(10));
    };

    if !status.success() {
        return Err(Error::StylerFailed {
            status: status.to_string(),
            diagnostics: diagnostics(&stderr_path, &stdout_path),
        });
    }

    let raw = read_image(&output_path).map_err(|e| match e {
        Error::Io(io) => Error::Format(format!("styler output unreadable: {io}")),
        other => other,
    })?;
    let mut image = to_float(&raw);
    let mut warnings = Vec::new();
    if (image.width(), image.height()) != (content.width(), content.height()) {
        warnings.push(format!(
            "styler output is {}x{}, resampled to content size {}x{}",
            image.width(),
            image.height(),
            content.width(),
            content.height()
        ));
        image = image.resize_nearest(content.width(), content.height())?;
    }
    Ok(StylerOutput { image, warnings })
}

fn diagnostics(stderr: &Path, stdout: &Path) -> String {
    let read = |p: &Path| std::fs::read_to_string(p).unwrap_or_default();
    let mut text = read(stderr);
    if text.trim().is_empty() {
        text = read(stdout);
    }
    let text = text.trim();
    if text.len() > DIAGNOSTIC_LIMIT {
        let mut cut = text.len() - DIAGNOSTIC_LIMIT;
        while !text.is_char_boundary(cut) {
            cut += 1;
        }
        format!("...{}", &text[cut..])
    } else {
        text.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize, offset: f64) -> ImagePlanarF {
        let planes = std::array::from_fn(|c| {
            (0..w * h)
                .map(|i| (i as f64 * 0.37 + c as f64 * 0.11 + offset) % 1.0)
                .collect()
        });
        ImagePlanarF::from_planes(w, h, planes).unwrap()
    }

    #[test]
    fn identity_returns_content() {
        let (c, s) = (ramp(4, 3, 0.0), ramp(5, 5, 0.5));
        let out = run_styler(&StylerSpec::Identity, &c, &s).unwrap();
        assert_eq!(out.image, c);
    }

    #[test]
    fn blend_endpoints() {
        let (c, s) = (ramp(4, 3, 0.0), ramp(4, 3, 0.5));
        assert_eq!(
            run_styler(&StylerSpec::blend(0.0).unwrap(), &c, &s)
                .unwrap()
                .image,
            c
        );
        assert_eq!(
            run_styler(&StylerSpec::blend(1.0).unwrap(), &c, &s)
                .unwrap()
                .image,
            s
        );
    }

    #[test]
    fn blend_resamples_style() {
        let c = ramp(4, 4, 0.0);
        let s = ramp(2, 2, 0.3);
        let out = run_styler(&StylerSpec::blend(1.0).unwrap(), &c, &s)
            .unwrap()
            .image;
        assert_eq!(out, s.resize_nearest(4, 4).unwrap());
    }

    #[test]
    fn blend_is_linear_in_alpha() {
        let (c, s) = (ramp(6, 5, 0.1), ramp(3, 7, 0.6));
        let at = |a| {
            run_styler(&StylerSpec::blend(a).unwrap(), &c, &s)
                .unwrap()
                .image
        };
        let (zero, one) = (at(0.0), at(1.0));
        for alpha in [0.1, 0.25, 0.5, 0.9] {
            let mid = at(alpha);
            for ch in 0..3 {
                for k in 0..c.len() {
                    let expected = alpha * one.plane(ch)[k] + (1.0 - alpha) * zero.plane(ch)[k];
                    assert!((mid.plane(ch)[k] - expected).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn spec_validation() {
        assert!(StylerSpec::blend(1.5).is_err());
        assert!(StylerSpec::blend(-0.1).is_err());
        assert!(StylerSpec::external("x {content} {style}", DEFAULT_TIMEOUT).is_err());
        assert!(
            StylerSpec::external("x {content} {content} {style} {output}", DEFAULT_TIMEOUT)
                .is_err()
        );
        assert!(StylerSpec::external("x {content} {style} {output}", DEFAULT_TIMEOUT).is_ok());
    }

    #[test]
    fn spec_json() {
        let spec = StylerSpec::external("cp {content} {output} # {style}", Duration::from_secs(5))
            .unwrap();
        let json = serde_json::to_value(&spec).unwrap();
        assert_eq!(json["kind"], "external");
        assert_eq!(json["timeout"], 5.0);
        let back: StylerSpec = serde_json::from_value(json).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn shell_quoting() {
        assert_eq!(shell_quote(Path::new("/tmp/a b")), "'/tmp/a b'");
        assert_eq!(shell_quote(Path::new("/tmp/it's")), r"'/tmp/it'\''s'");
    }
}
