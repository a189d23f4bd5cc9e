//! File formats: binary PPM images, CSV traces and JSON latent codes.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::image::ImageGrid;
use crate::latent::LatentCode;
use crate::trace::ScoreTrace;

/// Round-half-up quantization of a clamped channel value.
pub fn quantize(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0 + 0.5).floor() as u8
}

pub fn encode_ppm(image: &ImageGrid) -> Vec<u8> {
    let header = format!("P6\n{} {}\n255\n", image.width(), image.height());
    let mut out = Vec::with_capacity(header.len() + image.len());
    out.extend_from_slice(header.as_bytes());
    out.extend(image.as_slice().iter().map(|&v| quantize(v)));
    out
}

pub fn write_ppm(image: &ImageGrid, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_ppm(image)).map_err(|e| Error::io(path, e))
}

pub fn read_ppm(path: impl AsRef<Path>) -> Result<ImageGrid> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_ppm(&bytes).map_err(|reason| Error::Ppm {
        path: path.to_path_buf(),
        reason,
    })
}

fn decode_ppm(bytes: &[u8]) -> std::result::Result<ImageGrid, String> {
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        // whitespace and comments
        while pos < bytes.len() {
            if bytes[pos].is_ascii_whitespace() {
                pos += 1;
            } else if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                break;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err("truncated header".into());
        }
        fields.push(std::str::from_utf8(&bytes[start..pos]).map_err(|_| "non-ASCII header")?);
    }
    if fields[0] != "P6" {
        return Err(format!("expected magic P6, found {:?}", fields[0]));
    }
    let parse = |s: &str, what: &str| -> std::result::Result<usize, String> {
        s.parse::<usize>().map_err(|_| format!("bad {what} {s:?}"))
    };
    let width = parse(fields[1], "width")?;
    let height = parse(fields[2], "height")?;
    let maxval = parse(fields[3], "maxval")?;
    if maxval != 255 {
        return Err(format!("only maxval 255 is supported, found {maxval}"));
    }
    if width == 0 || height == 0 {
        return Err("zero image dimension".into());
    }
    // exactly one whitespace byte separates the header from the raster
    pos += 1;
    let expected = width * height * 3;
    let body = bytes.get(pos..).unwrap_or(&[]);
    if body.len() != expected {
        return Err(format!("expected {expected} raster bytes, found {}", body.len()));
    }
    let data = body.iter().map(|&b| f64::from(b) / 255.0).collect();
    ImageGrid::from_vec(height, width, data).map_err(|e| e.to_string())
}

/// Decimal rendering with at least 12 significant digits, never using
/// exponent notation.
pub fn fmt_decimal(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0.000000000000".into();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (11 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

pub const TRACE_HEADER: &str = "iter,s,l,lambda,gnorm_s,gnorm_l";

pub fn trace_csv(trace: &ScoreTrace) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in trace.rows() {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.iter,
            fmt_decimal(r.s),
            fmt_decimal(r.l),
            fmt_decimal(r.lambda),
            fmt_decimal(r.gnorm_s),
            fmt_decimal(r.gnorm_l)
        ));
    }
    out
}

pub fn write_trace_csv(trace: &ScoreTrace, path: impl AsRef<Path>) -> Result<()> {
    write_text(path, &trace_csv(trace))
}

pub fn write_text(path: impl AsRef<Path>, text: &str) -> Result<()> {
    let path = path.as_ref();
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Latent codes are stored as `{"z": [...], "y": [...]}`.
pub fn read_latent(path: impl AsRef<Path>) -> Result<LatentCode> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let code: LatentCode =
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    LatentCode::new(code.z, code.y)
}

pub fn write_latent(code: &LatentCode, path: impl AsRef<Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(code).expect("latent codes serialize");
    write_text(path, &(text + "\n"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::TraceRow;
    use proptest::prelude::*;

    #[test]
    fn zero_image_body() {
        let bytes = encode_ppm(&ImageGrid::zeros(2, 2));
        let header = b"P6\n2 2\n255\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(&bytes[header.len()..], &[0u8; 12]);
    }

    #[test]
    fn quantizer_values() {
        assert_eq!(quantize(1.0), 255);
        assert_eq!(quantize(0.5), 128);
        assert_eq!(quantize(0.0), 0);
        assert_eq!(quantize(-3.0), 0);
        assert_eq!(quantize(7.0), 255);
    }

    #[test]
    fn malformed_headers_rejected() {
        assert!(decode_ppm(b"P5\n1 1\n255\n\0").is_err());
        assert!(decode_ppm(b"P6\n1 1\n").is_err());
        assert!(decode_ppm(b"P6\n1 1\n255\n\0\0").is_err());
        assert!(decode_ppm(b"P6\n1 1\n65535\n\0\0\0").is_err());
        assert!(decode_ppm(b"P6 # comment\n1 1\n255\n\x01\x02\x03").is_ok());
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(read_ppm("/nonexistent/x.ppm"), Err(Error::Io { .. })));
    }

    #[test]
    fn trace_csv_lines() {
        let mut t = ScoreTrace::new();
        assert_eq!(trace_csv(&t), format!("{TRACE_HEADER}\n"));
        for i in 0..3 {
            t.push(TraceRow {
                iter: i,
                s: 0.5,
                l: 0.25,
                lambda: 1.0,
                gnorm_s: 1.0 / 3.0,
                gnorm_l: 0.0,
            })
            .unwrap();
        }
        let csv = trace_csv(&t);
        assert_eq!(csv.lines().count(), 4);
        let first: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
        assert_eq!(first[0], "0");
        assert_eq!(first[1], "0.500000000000");
        assert_eq!(first[4], "0.333333333333");
    }

    #[test]
    fn decimal_format_keeps_precision() {
        for x in [1.234_567_890_123e-7, -98_765.432_101_234, 3.0, 1e-12] {
            let s = fmt_decimal(x);
            assert!(!s.contains('e'), "{s}");
            let back: f64 = s.parse().unwrap();
            assert!(((back - x) / x).abs() < 1e-9, "{x} -> {s}");
        }
    }

    proptest! {
        #[test]
        fn ppm_round_trip_within_one_level(
            h in 1usize..6, w in 1usize..6, seed in any::<u64>()
        ) {
            let img = ImageGrid::from_fn(h, w, |r, c, ch| {
                let v = crate::rng::mix64(seed ^ ((r * 31 + c) * 3 + ch) as u64) as f64 / u64::MAX as f64;
                v * 1.2 - 0.1
            });
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("x.ppm");
            write_ppm(&img, &p).unwrap();
            let back = read_ppm(&p).unwrap();
            prop_assert!(back.max_abs_diff(&img.clamped()) <= 0.5 / 255.0 + 1e-12);
        }
    }
}
