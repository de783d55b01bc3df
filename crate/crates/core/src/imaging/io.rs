//! Image files: binary PGM (`P5`) and PNG, 8- or 16-bit.
//!
//! Samples are mapped linearly to `[0, 1]` on load (`v / maxval`) and back with
//! rounding and clipping on save. Grayscale images load as `[H, W]`, color PNGs
//! as `[H, W, 3]` (alpha is dropped).

use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma, Rgb};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BitDepth {
    Eight,
    Sixteen,
}

impl BitDepth {
    fn maxval(self) -> f64 {
        match self {
            BitDepth::Eight => 255.0,
            BitDepth::Sixteen => 65535.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Pgm,
    Png,
}

fn format_of(path: &Path) -> Result<Format> {
    match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref() {
        Some("pgm") | Some("pnm") => Ok(Format::Pgm),
        Some("png") => Ok(Format::Png),
        _ => Err(Error::Format(format!("{}: unsupported image format", path.display()))),
    }
}

fn quantize(v: f64, depth: BitDepth) -> u16 {
    (v.clamp(0.0, 1.0) * depth.maxval()).round() as u16
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    match format_of(path)? {
        Format::Pgm => {
            let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
            decode_pgm(&bytes).map_err(|e| Error::Format(format!("{}: {e}", path.display())))
        }
        Format::Png => {
            let img = image::open(path).map_err(|e| match e {
                image::ImageError::IoError(io) => Error::io(path, io),
                other => Error::Format(format!("{}: {other}", path.display())),
            })?;
            Ok(from_dynamic(img))
        }
    }
}

pub fn save_image(path: impl AsRef<Path>, x: &Tensor, depth: BitDepth) -> Result<()> {
    let path = path.as_ref();
    match format_of(path)? {
        Format::Pgm => {
            let bytes = encode_pgm(x, depth)?;
            std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
        }
        Format::Png => {
            let (h, w, c) = x.spatial();
            let q: Vec<u16> = x.data().iter().map(|&v| quantize(v, depth)).collect();
            let (w32, h32) = (w as u32, h as u32);
            let res = match (c, depth) {
                (1, BitDepth::Eight) => {
                    let d: Vec<u8> = q.iter().map(|&v| v as u8).collect();
                    ImageBuffer::<Luma<u8>, _>::from_raw(w32, h32, d).map(|b| b.save(path))
                }
                (1, BitDepth::Sixteen) => ImageBuffer::<Luma<u16>, _>::from_raw(w32, h32, q).map(|b| b.save(path)),
                (3, BitDepth::Eight) => {
                    let d: Vec<u8> = q.iter().map(|&v| v as u8).collect();
                    ImageBuffer::<Rgb<u8>, _>::from_raw(w32, h32, d).map(|b| b.save(path))
                }
                (3, BitDepth::Sixteen) => ImageBuffer::<Rgb<u16>, _>::from_raw(w32, h32, q).map(|b| b.save(path)),
                _ => return Err(Error::Format(format!("cannot store {c} channels as PNG"))),
            };
            match res {
                Some(Ok(())) => Ok(()),
                Some(Err(image::ImageError::IoError(io))) => Err(Error::io(path, io)),
                Some(Err(e)) => Err(Error::Format(format!("{}: {e}", path.display()))),
                None => Err(Error::Format("buffer size mismatch".into())),
            }
        }
    }
}

fn from_dynamic(img: DynamicImage) -> Tensor {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let gray = !img.color().has_color();
    let sixteen = img.color().bytes_per_pixel() / img.color().channel_count() > 1;
    let max = if sixteen { 65535.0 } else { 255.0 };
    let (shape, data): (Vec<usize>, Vec<f64>) = match (gray, sixteen) {
        (true, false) => (vec![h, w], img.to_luma8().into_raw().into_iter().map(|v| v as f64 / max).collect()),
        (true, true) => (vec![h, w], img.to_luma16().into_raw().into_iter().map(|v| v as f64 / max).collect()),
        (false, false) => (vec![h, w, 3], img.to_rgb8().into_raw().into_iter().map(|v| v as f64 / max).collect()),
        (false, true) => (vec![h, w, 3], img.to_rgb16().into_raw().into_iter().map(|v| v as f64 / max).collect()),
    };
    Tensor::from_parts(shape, data)
}

/// Reads a binary PGM. Header tokens may be separated by any whitespace and
/// interleaved with `#` comments; exactly one whitespace byte precedes the
/// raster. Samples are one byte for `maxval < 256`, else two bytes big-endian.
pub fn decode_pgm(bytes: &[u8]) -> Result<Tensor> {
    let mut pos = 0;
    let token = |pos: &mut usize| -> Result<String> {
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
        if start == *pos {
            return Err(Error::Format("truncated PGM header".into()));
        }
        Ok(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    };
    if token(&mut pos)? != "P5" {
        return Err(Error::Format("not a binary PGM (missing P5)".into()));
    }
    let mut num = |what: &str| -> Result<usize> {
        let t = token(&mut pos)?;
        t.parse::<usize>()
            .map_err(|_| Error::Format(format!("bad PGM {what}: {t:?}")))
    };
    let (w, h, maxval) = (num("width")?, num("height")?, num("maxval")?);
    if w == 0 || h == 0 || maxval == 0 || maxval > 65535 {
        return Err(Error::Format(format!("bad PGM header: {w}x{h}, maxval {maxval}")));
    }
    pos += 1;
    let per = if maxval < 256 { 1 } else { 2 };
    let need = w.checked_mul(h).and_then(|n| n.checked_mul(per));
    let raster = bytes.get(pos..).unwrap_or(&[]);
    if need != Some(raster.len()) {
        return Err(Error::Format(format!(
            "PGM raster has {} bytes, expected {}",
            raster.len(),
            need.map_or("too many".into(), |n| n.to_string())
        )));
    }
    let m = maxval as f64;
    let data: Vec<f64> = if per == 1 {
        raster.iter().map(|&v| v as f64 / m).collect()
    } else {
        raster.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]]) as f64 / m).collect()
    };
    if data.iter().any(|&v| v > 1.0) {
        return Err(Error::Format("PGM sample exceeds maxval".into()));
    }
    Ok(Tensor::from_parts(vec![h, w], data))
}

pub fn encode_pgm(x: &Tensor, depth: BitDepth) -> Result<Vec<u8>> {
    let (h, w, c) = x.spatial();
    if c != 1 {
        return Err(Error::Format(format!("PGM holds one channel, got {c}")));
    }
    let mut out = format!("P5\n{w} {h}\n{}\n", depth.maxval() as u32).into_bytes();
    for &v in x.data() {
        let q = quantize(v, depth);
        match depth {
            BitDepth::Eight => out.push(q as u8),
            BitDepth::Sixteen => out.extend_from_slice(&q.to_be_bytes()),
        }
    }
    Ok(out)
}
