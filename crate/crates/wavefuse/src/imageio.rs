//! Binary PGM (P5) and 8-bit PNG reading and writing.

use std::fs;
use std::io::Cursor;
use std::path::Path;

use wavefuse_core::image::GrayImage;

use crate::error::{Error, Result};

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a];

/// Loads a P5 PGM or 8-bit PNG, detected from the file contents.
///
/// RGB(A) PNGs are converted with luma weights 0.299 / 0.587 / 0.114.
pub fn load_grayscale(path: impl AsRef<Path>) -> Result<GrayImage> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}

/// Decodes an in-memory image; `path` only labels errors.
pub fn decode(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    if bytes.starts_with(b"P5") {
        decode_pgm(bytes, path)
    } else if bytes.starts_with(&PNG_SIGNATURE) {
        decode_png(bytes, path)
    } else if bytes.starts_with(b"P2") {
        Err(Error::format(
            path,
            "PGM",
            "ASCII (P2) PGM is not supported, use binary P5",
        ))
    } else {
        Err(Error::format(
            path,
            "unknown",
            "not a binary PGM or PNG file",
        ))
    }
}

/// Next whitespace-delimited header token, skipping `#` comments.
fn header_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a [u8]> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (start < *pos).then(|| &bytes[start..*pos])
}

fn decode_pgm(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    let mut pos = 2;
    let mut field = |name: &str| -> Result<usize> {
        let tok = header_token(bytes, &mut pos)
            .ok_or_else(|| Error::format(path, "PGM", format!("header ends before {name}")))?;
        std::str::from_utf8(tok)
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| {
                Error::format(
                    path,
                    "PGM",
                    format!("bad {name} '{}'", String::from_utf8_lossy(tok)),
                )
            })
    };
    let width = field("width")?;
    let height = field("height")?;
    let maxval = field("maxval")?;
    if maxval != 255 {
        return Err(Error::format(
            path,
            "PGM",
            format!("maxval {maxval} is not supported, only 8-bit (255)"),
        ));
    }
    // exactly one whitespace byte separates the header from the raster
    let start = pos + 1;
    let need = width
        .checked_mul(height)
        .ok_or_else(|| Error::format(path, "PGM", "image dimensions overflow"))?;
    if width == 0 || height == 0 {
        return Err(Error::format(
            path,
            "PGM",
            format!("empty {width}x{height} image"),
        ));
    }
    let raster = bytes.get(start..start + need).ok_or_else(|| {
        Error::format(path, "PGM", format!("raster truncated: need {need} bytes"))
    })?;
    Ok(GrayImage::from_u8(width, height, raster)?)
}

fn decode_png(bytes: &[u8], path: &Path) -> Result<GrayImage> {
    let fail = |e: png::DecodingError| Error::format(path, "PNG", e.to_string());
    let mut decoder = png::Decoder::new(Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder.read_info().map_err(fail)?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(fail)?;
    if info.bit_depth != png::BitDepth::Eight {
        return Err(Error::format(
            path,
            "PNG",
            format!(
                "bit depth {:?} is not supported, only 8-bit",
                info.bit_depth
            ),
        ));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let data = &buf[..info.buffer_size()];
    let luma =
        |px: &[u8]| (0.299 * px[0] as f64 + 0.587 * px[1] as f64 + 0.114 * px[2] as f64) / 255.0;
    let pixels: Vec<f64> = match info.color_type {
        png::ColorType::Grayscale => data.iter().map(|&b| b as f64 / 255.0).collect(),
        png::ColorType::GrayscaleAlpha => {
            data.chunks_exact(2).map(|p| p[0] as f64 / 255.0).collect()
        }
        png::ColorType::Rgb => data.chunks_exact(3).map(luma).collect(),
        png::ColorType::Rgba => data.chunks_exact(4).map(luma).collect(),
        other => {
            return Err(Error::format(
                path,
                "PNG",
                format!("color type {other:?} is not supported"),
            ))
        }
    };
    Ok(GrayImage::from_clamped(w, h, pixels)?)
}

/// P5 bytes of a quantized image.
pub fn encode_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width(), img.height()).into_bytes();
    out.extend_from_slice(&img.to_u8());
    out
}

/// 8-bit grayscale PNG bytes of a quantized image.
pub fn encode_png(img: &GrayImage) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, img.width() as u32, img.height() as u32);
        enc.set_color(png::ColorType::Grayscale);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().expect("writing to a Vec cannot fail");
        writer
            .write_image_data(&img.to_u8())
            .expect("buffer size matches header");
    }
    out
}

/// Writes a PGM or PNG chosen by the file extension.
pub fn save_grayscale(img: &GrayImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase);
    let bytes = match ext.as_deref() {
        Some("pgm") => encode_pgm(img),
        Some("png") => encode_png(img),
        _ => {
            return Err(Error::format(
                path,
                "output",
                "unsupported extension, use .pgm or .png",
            ));
        }
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// True for file names this module can read.
pub fn is_image_path(path: &Path) -> bool {
    matches!(
        path.extension()
            .and_then(|e| e.to_str())
            .map(str::to_ascii_lowercase)
            .as_deref(),
        Some("pgm" | "png")
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(name: &str) -> &Path {
        Path::new(name)
    }

    #[test]
    fn pgm_byte_oracle() {
        let bytes = b"P5\n2 2\n255\n\x00\x80\xff\x40";
        let img = decode(bytes, p("x.pgm")).unwrap();
        assert_eq!(img.pixels(), &[0.0, 128.0 / 255.0, 1.0, 64.0 / 255.0]);
        assert_eq!(encode_pgm(&img), bytes);
    }

    #[test]
    fn pgm_header_comments_and_errors() {
        let img = decode(b"P5 # c\n3 # w\n1\n255\n\xff\xff\xff", p("x")).unwrap();
        assert!(img.pixels().iter().all(|&v| v == 1.0));
        assert!(matches!(
            decode(b"P5\n2 2\n65535\n", p("x")),
            Err(Error::Format { .. })
        ));
        assert!(matches!(
            decode(b"P5\n2 2\n255\n\x00", p("x")),
            Err(Error::Format { .. })
        ));
        assert!(matches!(
            decode(b"GIF89a", p("x")),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn png_round_trip() {
        let img = GrayImage::from_u8(3, 2, &[0, 10, 20, 200, 255, 7]).unwrap();
        let back = decode(&encode_png(&img), p("x.png")).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn rgb_png_uses_luma() {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, 1, 1);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            enc.write_header()
                .unwrap()
                .write_image_data(&[100, 150, 200])
                .unwrap();
        }
        let img = decode(&out, p("c.png")).unwrap();
        let expect = (0.299 * 100.0 + 0.587 * 150.0 + 0.114 * 200.0) / 255.0;
        assert!((img.pixels()[0] - expect).abs() < 1e-15);
    }

    #[test]
    fn sixteen_bit_png_is_rejected_by_name() {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, 1, 1);
            enc.set_color(png::ColorType::Grayscale);
            enc.set_depth(png::BitDepth::Sixteen);
            enc.write_header()
                .unwrap()
                .write_image_data(&[1, 2])
                .unwrap();
        }
        let err = decode(&out, p("d.png")).unwrap_err();
        assert!(err.to_string().contains("PNG"), "{err}");
    }
}
