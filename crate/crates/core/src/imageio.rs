//! Image containers and the PNG / binary PPM codecs.
//!
//! Two representations are used throughout the crate: [`ImageU8`] holds
//! interleaved 8-bit RGB exactly as stored on disk, and [`ImagePlanarF`]
//! holds three `f64` planes normalized to `[0, 1]`, which is what every
//! statistic and color map operates on. No gamma decoding happens anywhere;
//! samples are used as stored.

use std::io::Cursor;
use std::path::Path;

use crate::error::{Error, Result};

pub const CHANNELS: usize = 3;

/// On-disk container formats.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Png,
    Ppm,
}

impl ImageFormat {
    /// Sniffs the container from its leading magic bytes.
    pub fn detect(bytes: &[u8]) -> Option<Self> {
        const PNG_MAGIC: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a];
        if bytes.starts_with(&PNG_MAGIC) {
            Some(ImageFormat::Png)
        } else if bytes.starts_with(b"P6") {
            Some(ImageFormat::Ppm)
        } else {
            None
        }
    }

    pub fn from_path(path: &Path) -> Option<Self> {
        let ext = path.extension()?.to_str()?.to_ascii_lowercase();
        match ext.as_str() {
            "png" => Some(ImageFormat::Png),
            "ppm" => Some(ImageFormat::Ppm),
            _ => None,
        }
    }
}

/// Interleaved 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageU8 {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl ImageU8 {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Result<Self> {
        check_dims(width, height)?;
        let expected = width * height * CHANNELS;
        if data.len() != expected {
            return Err(Error::Dimension(format!(
                "{width}x{height} RGB image needs {expected} samples, got {}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * CHANNELS;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }
}

/// Planar RGB image with samples in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImagePlanarF {
    width: usize,
    height: usize,
    planes: [Vec<f64>; 3],
}

impl ImagePlanarF {
    /// Builds an image from three planes; every sample must be finite and in `[0, 1]`.
    pub fn from_planes(width: usize, height: usize, planes: [Vec<f64>; 3]) -> Result<Self> {
        check_planes(width, height, &planes)?;
        for plane in &planes {
            if let Some(v) = plane.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(Error::Numeric(format!("sample {v} outside [0, 1]")));
            }
        }
        Ok(Self {
            width,
            height,
            planes,
        })
    }

    /// Like [`from_planes`](Self::from_planes) but clamps finite out-of-range samples.
    pub fn from_planes_clamped(
        width: usize,
        height: usize,
        mut planes: [Vec<f64>; 3],
    ) -> Result<Self> {
        check_planes(width, height, &planes)?;
        for plane in planes.iter_mut() {
            for v in plane.iter_mut() {
                if !v.is_finite() {
                    return Err(Error::Numeric(format!("non-finite sample {v}")));
                }
                *v = v.clamp(0.0, 1.0);
            }
        }
        Ok(Self {
            width,
            height,
            planes,
        })
    }

    /// Replicates one plane into all three channels.
    pub fn from_gray(width: usize, height: usize, plane: &[f64]) -> Result<Self> {
        Self::from_planes_clamped(
            width,
            height,
            [plane.to_vec(), plane.to_vec(), plane.to_vec()],
        )
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Result<Self> {
        let n = width * height;
        Self::from_planes(width, height, rgb.map(|v| vec![v; n]))
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn planes(&self) -> &[Vec<f64>; 3] {
        &self.planes
    }

    pub fn plane(&self, channel: usize) -> &[f64] {
        &self.planes[channel]
    }

    pub fn into_planes(self) -> [Vec<f64>; 3] {
        self.planes
    }

    pub fn pixel(&self, index: usize) -> [f64; 3] {
        [
            self.planes[0][index],
            self.planes[1][index],
            self.planes[2][index],
        ]
    }

    /// Nearest-neighbor resample. Source pixel for destination `x` is
    /// `floor((2x + 1) * src_w / (2 * dst_w))`, computed in integers.
    pub fn resize_nearest(&self, width: usize, height: usize) -> Result<Self> {
        check_dims(width, height)?;
        if width == self.width && height == self.height {
            return Ok(self.clone());
        }
        let xs: Vec<usize> = (0..width)
            .map(|x| ((2 * x + 1) * self.width) / (2 * width))
            .collect();
        let planes = self.planes.clone().map(|src| {
            let mut out = Vec::with_capacity(width * height);
            for y in 0..height {
                let sy = ((2 * y + 1) * self.height) / (2 * height);
                let row = &src[sy * self.width..(sy + 1) * self.width];
                out.extend(xs.iter().map(|&sx| row[sx]));
            }
            out
        });
        Ok(Self {
            width,
            height,
            planes,
        })
    }
}

fn check_dims(width: usize, height: usize) -> Result<()> {
    if width == 0 || height == 0 {
        return Err(Error::Dimension(format!(
            "image dimensions must be at least 1x1, got {width}x{height}"
        )));
    }
    Ok(())
}

fn check_planes(width: usize, height: usize, planes: &[Vec<f64>; 3]) -> Result<()> {
    check_dims(width, height)?;
    let n = width * height;
    if planes.iter().any(|p| p.len() != n) {
        return Err(Error::Dimension(format!(
            "planes must hold {n} samples each for {width}x{height}"
        )));
    }
    Ok(())
}

/// `v -> v / 255`, deinterleaved.
pub fn to_float(img: &ImageU8) -> ImagePlanarF {
    let n = img.width * img.height;
    let mut planes = [
        Vec::with_capacity(n),
        Vec::with_capacity(n),
        Vec::with_capacity(n),
    ];
    for px in img.data.chunks_exact(CHANNELS) {
        for (plane, &v) in planes.iter_mut().zip(px) {
            plane.push(f64::from(v) / 255.0);
        }
    }
    ImagePlanarF {
        width: img.width,
        height: img.height,
        planes,
    }
}

/// `v -> round(clamp(v, 0, 1) * 255)`, rounding half away from zero, interleaved.
pub fn to_u8(img: &ImagePlanarF) -> Result<ImageU8> {
    let n = img.len();
    let mut data = Vec::with_capacity(n * CHANNELS);
    for i in 0..n {
        for plane in &img.planes {
            data.push(quantize(plane[i])?);
        }
    }
    ImageU8::new(img.width, img.height, data)
}

pub fn quantize(v: f64) -> Result<u8> {
    if !v.is_finite() {
        return Err(Error::Numeric(format!(
            "cannot quantize non-finite sample {v}"
        )));
    }
    // f64::round rounds half away from zero.
    Ok((v.clamp(0.0, 1.0) * 255.0).round() as u8)
}

pub fn decode_image(bytes: &[u8], format: ImageFormat) -> Result<ImageU8> {
    match format {
        ImageFormat::Png => decode_png(bytes),
        ImageFormat::Ppm => decode_ppm(bytes),
    }
}

pub fn encode_image(img: &ImageU8, format: ImageFormat) -> Result<Vec<u8>> {
    match format {
        ImageFormat::Png => encode_png(img),
        ImageFormat::Ppm => Ok(encode_ppm(img)),
    }
}

/// Reads an image file, sniffing the container from its contents.
pub fn read_image(path: &Path) -> Result<ImageU8> {
    let bytes = std::fs::read(path)?;
    let format = ImageFormat::detect(&bytes).ok_or_else(|| {
        Error::Format(format!("{}: not a PNG or binary PPM file", path.display()))
    })?;
    decode_image(&bytes, format)
}

/// Writes an image file, choosing the container from the extension.
pub fn write_image(path: &Path, img: &ImageU8) -> Result<()> {
    let format = ImageFormat::from_path(path).ok_or_else(|| {
        Error::Format(format!(
            "{}: output extension must be .png or .ppm",
            path.display()
        ))
    })?;
    std::fs::write(path, encode_image(img, format)?)?;
    Ok(())
}

fn decode_png(bytes: &[u8]) -> Result<ImageU8> {
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(png_error)?;
    if reader.info().bit_depth == png::BitDepth::Sixteen {
        return Err(Error::UnsupportedDepth(
            "16-bit PNG samples are not supported".into(),
        ));
    }
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Format("PNG image too large".into()))?;
    let mut buf = vec![0u8; size];
    let frame = reader.next_frame(&mut buf).map_err(png_error)?;
    let (width, height) = (frame.width as usize, frame.height as usize);
    let buf = &buf[..frame.buffer_size()];

    let data: Vec<u8> = match frame.color_type {
        png::ColorType::Rgb => buf.to_vec(),
        png::ColorType::Rgba => buf
            .chunks_exact(4)
            .flat_map(|px| [px[0], px[1], px[2]])
            .collect(),
        png::ColorType::Grayscale => buf.iter().flat_map(|&v| [v, v, v]).collect(),
        png::ColorType::GrayscaleAlpha => buf
            .chunks_exact(2)
            .flat_map(|px| [px[0], px[0], px[0]])
            .collect(),
        png::ColorType::Indexed => {
            return Err(Error::Format("unexpanded indexed PNG".into()));
        }
    };
    ImageU8::new(width, height, data)
}

fn png_error(e: png::DecodingError) -> Error {
    match e {
        png::DecodingError::IoError(io) if io.kind() == std::io::ErrorKind::UnexpectedEof => {
            Error::Truncated {
                expected: 0,
                found: 0,
            }
        }
        png::DecodingError::IoError(io) => Error::Io(io),
        other => Error::Format(other.to_string()),
    }
}

fn encode_png(img: &ImageU8) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, img.width as u32, img.height as u32);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder
            .write_header()
            .map_err(|e| Error::Format(e.to_string()))?;
        writer
            .write_image_data(&img.data)
            .map_err(|e| Error::Format(e.to_string()))?;
        writer.finish().map_err(|e| Error::Format(e.to_string()))?;
    }
    Ok(out)
}

fn encode_ppm(img: &ImageU8) -> Vec<u8> {
    let header = format!("P6\n{} {}\n255\n", img.width, img.height);
    let mut out = Vec::with_capacity(header.len() + img.data.len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(&img.data);
    out
}

/// Netpbm header tokenizer: whitespace separated, `#` comments run to end of line.
struct PpmHeader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> PpmHeader<'a> {
    fn skip_space_and_comments(&mut self) {
        while let Some(&c) = self.bytes.get(self.pos) {
            if c == b'#' {
                while let Some(&c) = self.bytes.get(self.pos) {
                    self.pos += 1;
                    if c == b'\n' || c == b'\r' {
                        break;
                    }
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Format(format!("PPM header: missing {what}")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format(format!("PPM header: {what} out of range")))
    }
}

fn decode_ppm(bytes: &[u8]) -> Result<ImageU8> {
    if !bytes.starts_with(b"P6") {
        return Err(Error::Format("PPM: expected magic P6".into()));
    }
    let mut header = PpmHeader { bytes, pos: 2 };
    if !header
        .bytes
        .get(2)
        .is_some_and(|c| c.is_ascii_whitespace() || *c == b'#')
    {
        return Err(Error::Format("PPM: malformed magic".into()));
    }
    let width = header.number("width")?;
    let height = header.number("height")?;
    let maxval = header.number("maxval")?;
    check_dims(width, height)?;
    if maxval > 255 {
        return Err(Error::UnsupportedDepth(format!(
            "PPM maxval {maxval} implies 16-bit samples"
        )));
    }
    if maxval != 255 {
        return Err(Error::Format(format!(
            "PPM maxval must be 255, got {maxval}"
        )));
    }
    // Exactly one whitespace byte separates the header from the raster.
    match bytes.get(header.pos) {
        Some(c) if c.is_ascii_whitespace() => {}
        _ => return Err(Error::Format("PPM: missing whitespace after maxval".into())),
    }
    let payload = &bytes[header.pos + 1..];
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(CHANNELS))
        .ok_or_else(|| Error::Dimension(format!("{width}x{height} overflows")))?;
    if payload.len() < expected {
        return Err(Error::Truncated {
            expected,
            found: payload.len(),
        });
    }
    ImageU8::new(width, height, payload[..expected].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn ppm_decode_two_pixels() {
        let mut bytes = b"P6\n2 1\n255\n".to_vec();
        bytes.extend_from_slice(&[255, 0, 0, 0, 255, 0]);
        let img = decode_image(&bytes, ImageFormat::Ppm).unwrap();
        assert_eq!((img.width(), img.height()), (2, 1));
        assert_eq!(img.data(), &[255, 0, 0, 0, 255, 0]);
    }

    #[test]
    fn ppm_header_with_comments() {
        let mut bytes = b"P6 # made by hand\n1 # w\n1\n255 ".to_vec();
        bytes.extend_from_slice(&[1, 2, 3]);
        let img = decode_image(&bytes, ImageFormat::Ppm).unwrap();
        assert_eq!(img.pixel(0, 0), [1, 2, 3]);
    }

    #[test]
    fn ppm_zero_width_is_dimension_error() {
        let err = decode_image(b"P6 0 1 255\n", ImageFormat::Ppm).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)), "{err:?}");
    }

    #[test]
    fn ppm_errors() {
        assert!(matches!(
            decode_image(b"P5 1 1 255\n\0", ImageFormat::Ppm),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            decode_image(b"P6 1 1\n", ImageFormat::Ppm),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            decode_image(b"P6 1 1 65535\n\0\0\0\0\0\0", ImageFormat::Ppm),
            Err(Error::UnsupportedDepth(_))
        ));
        assert!(matches!(
            decode_image(b"P6 2 1 255\n\0\0\0\0", ImageFormat::Ppm),
            Err(Error::Truncated {
                expected: 6,
                found: 4
            })
        ));
    }

    /// Independent P6 writer: magic, whitespace, width, whitespace, height,
    /// whitespace, maxval, one whitespace byte, raw raster.
    fn netpbm_p6(width: usize, height: usize, raster: &[u8]) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(b"P6");
        out.push(b'\n');
        out.extend_from_slice(width.to_string().as_bytes());
        out.push(b' ');
        out.extend_from_slice(height.to_string().as_bytes());
        out.push(b'\n');
        out.extend_from_slice(b"255");
        out.push(b'\n');
        out.extend_from_slice(raster);
        out
    }

    #[test]
    fn ppm_encode_is_bit_exact() {
        for px in [[0u8, 0, 0], [255, 255, 255]] {
            let img = ImageU8::new(1, 1, px.to_vec()).unwrap();
            let bytes = encode_image(&img, ImageFormat::Ppm).unwrap();
            assert_eq!(bytes.len(), 14);
            assert_eq!(bytes, netpbm_p6(1, 1, &px));
        }
        let img = ImageU8::new(1, 1, vec![0, 0, 0]).unwrap();
        let bytes = encode_image(&img, ImageFormat::Ppm).unwrap();
        assert_eq!(&bytes[..11], b"P6\n1 1\n255\n");
    }

    fn gray_png(value: u8) -> Vec<u8> {
        let mut out = Vec::new();
        let mut enc = png::Encoder::new(&mut out, 1, 1);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().unwrap();
        w.write_image_data(&[value]).unwrap();
        w.finish().unwrap();
        out
    }

    #[test]
    fn png_grayscale_is_replicated() {
        let img = decode_image(&gray_png(128), ImageFormat::Png).unwrap();
        assert_eq!(img.pixel(0, 0), [128, 128, 128]);
    }

    #[test]
    fn png_rgba_alpha_is_stripped() {
        let mut out = Vec::new();
        let mut enc = png::Encoder::new(&mut out, 2, 1);
        enc.set_color(png::ColorType::Rgba);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().unwrap();
        w.write_image_data(&[10, 20, 30, 0, 40, 50, 60, 255])
            .unwrap();
        w.finish().unwrap();
        let img = decode_image(&out, ImageFormat::Png).unwrap();
        assert_eq!(img.data(), &[10, 20, 30, 40, 50, 60]);
    }

    #[test]
    fn png_sixteen_bit_is_rejected() {
        let mut out = Vec::new();
        let mut enc = png::Encoder::new(&mut out, 1, 1);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Sixteen);
        let mut w = enc.write_header().unwrap();
        w.write_image_data(&[0; 6]).unwrap();
        w.finish().unwrap();
        let err = decode_image(&out, ImageFormat::Png).unwrap_err();
        assert!(matches!(err, Error::UnsupportedDepth(_)), "{err:?}");
    }

    #[test]
    fn png_truncated_and_garbage() {
        let img = ImageU8::new(8, 8, (0..192).map(|v| v as u8).collect()).unwrap();
        let bytes = encode_image(&img, ImageFormat::Png).unwrap();
        let err = decode_image(&bytes[..bytes.len() / 2], ImageFormat::Png).unwrap_err();
        assert!(
            matches!(err, Error::Truncated { .. } | Error::Format(_)),
            "{err:?}"
        );
        assert!(decode_image(b"not a png", ImageFormat::Png).is_err());
    }

    #[test]
    fn format_detection() {
        assert_eq!(ImageFormat::detect(&gray_png(0)), Some(ImageFormat::Png));
        assert_eq!(ImageFormat::detect(b"P6 1 1 255\n"), Some(ImageFormat::Ppm));
        assert_eq!(ImageFormat::detect(b"GIF89a"), None);
        assert_eq!(
            ImageFormat::from_path(Path::new("a/b.PPM")),
            Some(ImageFormat::Ppm)
        );
        assert_eq!(ImageFormat::from_path(Path::new("a/b.jpg")), None);
    }

    #[test]
    fn float_conversion_endpoints() {
        let img = ImageU8::new(3, 1, vec![0, 255, 128, 0, 0, 0, 0, 0, 0]).unwrap();
        let f = to_float(&img);
        assert_eq!(f.plane(0)[0], 0.0);
        assert_eq!(f.plane(1)[0], 1.0);
        assert_eq!(f.plane(2)[0], 128.0 / 255.0);
    }

    #[test]
    fn quantize_rounds_half_away_from_zero() {
        assert_eq!(quantize(1.0).unwrap(), 255);
        assert_eq!(quantize(0.5).unwrap(), 128);
        assert_eq!(quantize(-0.2).unwrap(), 0);
        assert_eq!(quantize(1.7).unwrap(), 255);
        assert!(matches!(quantize(f64::NAN), Err(Error::Numeric(_))));
    }

    #[test]
    fn planar_constructor_rejects_bad_samples() {
        assert!(ImagePlanarF::from_planes(1, 1, [vec![1.5], vec![0.0], vec![0.0]]).is_err());
        assert!(ImagePlanarF::from_planes(1, 1, [vec![f64::NAN], vec![0.0], vec![0.0]]).is_err());
        assert!(ImagePlanarF::from_planes(2, 1, [vec![0.0], vec![0.0], vec![0.0]]).is_err());
        assert!(ImagePlanarF::from_planes_clamped(
            1,
            1,
            [vec![f64::INFINITY], vec![0.0], vec![0.0]]
        )
        .is_err());
        let c =
            ImagePlanarF::from_planes_clamped(1, 1, [vec![1.5], vec![-0.5], vec![0.25]]).unwrap();
        assert_eq!(c.pixel(0), [1.0, 0.0, 0.25]);
    }

    #[test]
    fn nearest_resize() {
        let img = ImagePlanarF::from_planes(2, 1, [vec![0.0, 1.0], vec![0.0, 1.0], vec![0.0, 1.0]])
            .unwrap();
        let up = img.resize_nearest(4, 2).unwrap();
        assert_eq!(up.plane(0), &[0.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0, 1.0]);
        let down = up.resize_nearest(2, 1).unwrap();
        assert_eq!(down, img);
    }

    fn arb_image() -> impl Strategy<Value = ImageU8> {
        (1usize..12, 1usize..12).prop_flat_map(|(w, h)| {
            proptest::collection::vec(any::<u8>(), w * h * 3)
                .prop_map(move |data| ImageU8::new(w, h, data).unwrap())
        })
    }

    proptest! {
        #[test]
        fn quantization_roundtrip(img in arb_image()) {
            prop_assert_eq!(to_u8(&to_float(&img)).unwrap(), img);
        }

        #[test]
        fn codec_roundtrip(img in arb_image()) {
            for format in [ImageFormat::Png, ImageFormat::Ppm] {
                let bytes = encode_image(&img, format).unwrap();
                prop_assert_eq!(&decode_image(&bytes, format).unwrap(), &img);
            }
        }
    }
}
