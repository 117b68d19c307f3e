//! PGM (P5) and PNG grayscale storage plus JSON sidecars.
//!
//! Samples are stored value-preserving: 10-bit frames go into 16-bit
//! containers unscaled and the true depth is recorded in `<file>.json`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::domain::ChannelLabel;
use crate::error::{Error, Result};

use super::image::{BinaryMask, BitDepth, ImageGray, ImageRgb};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImageFormat {
    Pgm,
    Png,
}

impl ImageFormat {
    pub fn from_path(path: &Path) -> Result<Self> {
        match path.extension().and_then(|e| e.to_str()).map(|e| e.to_ascii_lowercase()).as_deref() {
            Some("pgm") => Ok(ImageFormat::Pgm),
            Some("png") => Ok(ImageFormat::Png),
            other => Err(Error::UnsupportedFormat(format!("extension {other:?}"))),
        }
    }
}

/// Sidecar metadata stored next to an image as `<file>.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImageMeta {
    pub bit_depth: BitDepth,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelLabel>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes `bytes` to a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    }
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn encode_pgm(img: &ImageGray) -> Vec<u8> {
    let max = img.full_scale();
    let mut out = format!("P5\n{} {}\n{}\n", img.width(), img.height(), max).into_bytes();
    if max < 256 {
        out.extend(img.data().iter().map(|&v| v as u8));
    } else {
        for &v in img.data() {
            out.extend_from_slice(&v.to_be_bytes());
        }
    }
    out
}

pub fn decode_pgm(bytes: &[u8]) -> Result<ImageGray> {
    if bytes.len() < 2 {
        return Err(Error::TruncatedFile);
    }
    if &bytes[..2] != b"P5" {
        return Err(Error::UnsupportedFormat("PGM magic is not P5".into()));
    }
    let mut pos = 2;
    let mut fields = [0usize; 3];
    for field in fields.iter_mut() {
        // whitespace and comments
        loop {
            match bytes.get(pos) {
                None => return Err(Error::TruncatedFile),
                Some(b'#') => {
                    while let Some(&c) = bytes.get(pos) {
                        pos += 1;
                        if c == b'\n' {
                            break;
                        }
                    }
                }
                Some(c) if c.is_ascii_whitespace() => pos += 1,
                Some(_) => break,
            }
        }
        let start = pos;
        while bytes.get(pos).is_some_and(|c| c.is_ascii_digit()) {
            pos += 1;
        }
        if start == pos {
            return Err(Error::TruncatedFile);
        }
        *field = std::str::from_utf8(&bytes[start..pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or(Error::TruncatedFile)?;
    }
    // single whitespace before raster
    if !bytes.get(pos).is_some_and(|c| c.is_ascii_whitespace()) {
        return Err(Error::TruncatedFile);
    }
    pos += 1;
    let [w, h, maxval] = fields;
    if maxval == 0 || maxval > 65535 {
        return Err(Error::UnsupportedFormat(format!("PGM maxval {maxval}")));
    }
    let depth = if maxval <= 255 {
        BitDepth::Eight
    } else if maxval <= 1023 {
        BitDepth::Ten
    } else {
        BitDepth::Sixteen
    };
    let bpp = if maxval < 256 { 1 } else { 2 };
    let need = w.checked_mul(h).and_then(|n| n.checked_mul(bpp)).ok_or(Error::TruncatedFile)?;
    let raster = bytes.get(pos..pos + need).ok_or(Error::TruncatedFile)?;
    let data = if bpp == 1 {
        raster.iter().map(|&b| b as u16).collect()
    } else {
        raster.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect()
    };
    ImageGray::from_vec(w, h, depth, data)
}

fn png_err(e: impl std::fmt::Display) -> Error {
    Error::Png(e.to_string())
}

fn encode_png_raw(width: usize, height: usize, color: png::ColorType, depth: png::BitDepth, raw: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(color);
        enc.set_depth(depth);
        let mut writer = enc.write_header().map_err(png_err)?;
        writer.write_image_data(raw).map_err(png_err)?;
    }
    Ok(out)
}

/// 8-bit images as 8-bit PNG, everything else as 16-bit PNG (unscaled).
pub fn encode_png(img: &ImageGray) -> Result<Vec<u8>> {
    if img.bit_depth() == BitDepth::Eight {
        let raw: Vec<u8> = img.data().iter().map(|&v| v as u8).collect();
        encode_png_raw(img.width(), img.height(), png::ColorType::Grayscale, png::BitDepth::Eight, &raw)
    } else {
        let raw: Vec<u8> = img.data().iter().flat_map(|v| v.to_be_bytes()).collect();
        encode_png_raw(img.width(), img.height(), png::ColorType::Grayscale, png::BitDepth::Sixteen, &raw)
    }
}

struct RawPng {
    width: usize,
    height: usize,
    color: png::ColorType,
    depth: png::BitDepth,
    line_size: usize,
    buf: Vec<u8>,
}

fn decode_png_raw(bytes: &[u8]) -> Result<RawPng> {
    if bytes.len() < 8 {
        return Err(Error::TruncatedFile);
    }
    let mut decoder = png::Decoder::new(bytes);
    decoder.set_transformations(png::Transformations::IDENTITY);
    let mut reader = decoder.read_info().map_err(|e| match e {
        png::DecodingError::IoError(_) => Error::TruncatedFile,
        png::DecodingError::Format(f) => Error::UnsupportedFormat(f.to_string()),
        other => png_err(other),
    })?;
    let mut buf = vec![0; reader.output_buffer_size()];
    let info = reader.next_frame(&mut buf).map_err(|e| match e {
        png::DecodingError::IoError(_) => Error::TruncatedFile,
        other => png_err(other),
    })?;
    buf.truncate(info.buffer_size());
    Ok(RawPng {
        width: info.width as usize,
        height: info.height as usize,
        color: info.color_type,
        depth: info.bit_depth,
        line_size: info.line_size,
        buf,
    })
}

pub fn decode_png(bytes: &[u8], declared: Option<BitDepth>) -> Result<ImageGray> {
    let raw = decode_png_raw(bytes)?;
    if raw.color != png::ColorType::Grayscale {
        return Err(Error::UnsupportedFormat(format!("PNG color type {:?}", raw.color)));
    }
    match raw.depth {
        png::BitDepth::Eight => ImageGray::from_vec(raw.width, raw.height, BitDepth::Eight, raw.buf.iter().map(|&b| b as u16).collect()),
        png::BitDepth::Sixteen => {
            let data = raw.buf.chunks_exact(2).map(|c| u16::from_be_bytes([c[0], c[1]])).collect();
            ImageGray::from_vec(raw.width, raw.height, declared.unwrap_or(BitDepth::Sixteen), data)
        }
        d => Err(Error::UnsupportedFormat(format!("grayscale PNG depth {d:?}"))),
    }
}

/// Reads an image; a sidecar, when present, supplies the true bit depth.
pub fn load_image(path: &Path) -> Result<ImageGray> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let meta = read_sidecar(path)?;
    match ImageFormat::from_path(path)? {
        ImageFormat::Pgm => decode_pgm(&bytes),
        ImageFormat::Png => decode_png(&bytes, meta.map(|m| m.bit_depth)),
    }
}

/// Writes the image and its sidecar.
pub fn save_image(img: &ImageGray, path: &Path, channel: Option<ChannelLabel>) -> Result<()> {
    save_image_tagged(img, path, channel, None)
}

/// [`save_image`] with the producing configuration's hash in the sidecar.
pub fn save_image_tagged(img: &ImageGray, path: &Path, channel: Option<ChannelLabel>, config_hash: Option<&str>) -> Result<()> {
    let bytes = match ImageFormat::from_path(path)? {
        ImageFormat::Pgm => encode_pgm(img),
        ImageFormat::Png => encode_png(img)?,
    };
    write_atomic(path, &bytes)?;
    let meta = ImageMeta { bit_depth: img.bit_depth(), channel, config_hash: config_hash.map(str::to_owned) };
    write_atomic(&sidecar_path(path), &serde_json::to_vec_pretty(&meta)?)
}

pub fn read_sidecar(path: &Path) -> Result<Option<ImageMeta>> {
    let side = sidecar_path(path);
    if !side.exists() {
        return Ok(None);
    }
    let bytes = fs::read(&side).map_err(|e| Error::io(&side, e))?;
    Ok(Some(serde_json::from_slice(&bytes)?))
}

/// 1-bit grayscale PNG.
pub fn encode_mask_png(mask: &BinaryMask) -> Result<Vec<u8>> {
    let (w, h) = (mask.width(), mask.height());
    let stride = w.div_ceil(8);
    let mut raw = vec![0u8; stride * h];
    for y in 0..h {
        for x in 0..w {
            if mask.get(x, y) {
                raw[y * stride + x / 8] |= 0x80 >> (x % 8);
            }
        }
    }
    encode_png_raw(w, h, png::ColorType::Grayscale, png::BitDepth::One, &raw)
}

pub fn decode_mask_png(bytes: &[u8]) -> Result<BinaryMask> {
    let raw = decode_png_raw(bytes)?;
    if raw.color != png::ColorType::Grayscale {
        return Err(Error::UnsupportedFormat(format!("mask PNG color type {:?}", raw.color)));
    }
    let (w, h, stride) = (raw.width, raw.height, raw.line_size);
    match raw.depth {
        png::BitDepth::One => Ok(BinaryMask::from_fn(w, h, |x, y| raw.buf[y * stride + x / 8] & (0x80 >> (x % 8)) != 0)),
        png::BitDepth::Eight => Ok(BinaryMask::from_fn(w, h, |x, y| raw.buf[y * stride + x] != 0)),
        d => Err(Error::UnsupportedFormat(format!("mask PNG depth {d:?}"))),
    }
}

pub fn encode_rgb_png(img: &ImageRgb) -> Result<Vec<u8>> {
    if img.bit_depth == BitDepth::Eight {
        let raw: Vec<u8> = img.data.iter().flat_map(|p| p.map(|v| v as u8)).collect();
        encode_png_raw(img.width, img.height, png::ColorType::Rgb, png::BitDepth::Eight, &raw)
    } else {
        let raw: Vec<u8> = img.data.iter().flat_map(|p| p.iter().flat_map(|v| v.to_be_bytes()).collect::<Vec<_>>()).collect();
        encode_png_raw(img.width, img.height, png::ColorType::Rgb, png::BitDepth::Sixteen, &raw)
    }
}

pub fn decode_rgb_png(bytes: &[u8]) -> Result<ImageRgb> {
    let raw = decode_png_raw(bytes)?;
    if raw.color != png::ColorType::Rgb {
        return Err(Error::UnsupportedFormat(format!("expected RGB PNG, got {:?}", raw.color)));
    }
    let data: Vec<[u16; 3]> = match raw.depth {
        png::BitDepth::Eight => raw.buf.chunks_exact(3).map(|c| [c[0] as u16, c[1] as u16, c[2] as u16]).collect(),
        png::BitDepth::Sixteen => raw
            .buf
            .chunks_exact(6)
            .map(|c| {
                [
                    u16::from_be_bytes([c[0], c[1]]),
                    u16::from_be_bytes([c[2], c[3]]),
                    u16::from_be_bytes([c[4], c[5]]),
                ]
            })
            .collect(),
        d => return Err(Error::UnsupportedFormat(format!("RGB PNG depth {d:?}"))),
    };
    let bit_depth = if raw.depth == png::BitDepth::Eight { BitDepth::Eight } else { BitDepth::Sixteen };
    Ok(ImageRgb { width: raw.width, height: raw.height, bit_depth, data })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{Camera, Wavelength};

    fn ten_bit() -> ImageGray {
        ImageGray::from_fn(13, 7, BitDepth::Ten, |x, y| ((x * 97 + y * 131) % 1024) as u16)
    }

    #[test]
    fn ten_bit_round_trips_through_both_formats() {
        let dir = tempfile::tempdir().unwrap();
        let img = ten_bit();
        let label = ChannelLabel { camera: Camera::Left, wavelength: Wavelength::Nir850, bank: 2 };
        for name in ["a.png", "a.pgm"] {
            let p = dir.path().join(name);
            save_image(&img, &p, Some(label)).unwrap();
            let back = load_image(&p).unwrap();
            assert_eq!(back, img);
            assert_eq!(read_sidecar(&p).unwrap().unwrap().channel, Some(label));
        }
    }

    #[test]
    fn eight_bit_checkerboard_pgm() {
        let mut bytes = b"P5\n# checker\n4 2\n255\n".to_vec();
        bytes.extend([0, 255, 0, 255, 255, 0, 255, 0]);
        let img = decode_pgm(&bytes).unwrap();
        assert_eq!(img.bit_depth(), BitDepth::Eight);
        assert_eq!(img.data(), &[0, 255, 0, 255, 255, 0, 255, 0]);
    }

    #[test]
    fn corrupted_header_is_truncated() {
        assert!(matches!(decode_pgm(b"P5\n4 "), Err(Error::TruncatedFile)));
        assert!(matches!(decode_pgm(b"P5\n4 2\n255\n\x00\x01"), Err(Error::TruncatedFile)));
        assert!(matches!(decode_pgm(b"P2\n4 2\n255\n"), Err(Error::UnsupportedFormat(_))));
        assert!(matches!(decode_png(b"\x89PNG", None), Err(Error::TruncatedFile)));
    }

    #[test]
    fn mask_png_round_trip() {
        let m = BinaryMask::from_fn(19, 5, |x, y| (x * y) % 3 == 1);
        let back = decode_mask_png(&encode_mask_png(&m).unwrap()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn unknown_extension_rejected() {
        assert!(matches!(ImageFormat::from_path(Path::new("x.tiff")), Err(Error::UnsupportedFormat(_))));
    }
}
