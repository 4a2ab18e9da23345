use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use image::codecs::png::PngEncoder;
use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{DynamicImage, ExtendedColorType, ImageEncoder, ImageReader};

use super::{Image, MAX_INTENSITY};
use crate::error::{Error, Result};

/// Reads an 8-bit grayscale or RGB PNG, PGM (P5) or PPM (P6).
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let io_err = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let reader = ImageReader::open(path)
        .map_err(io_err)?
        .with_guessed_format()
        .map_err(io_err)?;
    let decoded = reader.decode().map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    let (width, height) = (decoded.width() as usize, decoded.height() as usize);
    let (channels, interleaved) = match decoded {
        DynamicImage::ImageLuma8(buf) => (1, buf.into_raw()),
        DynamicImage::ImageRgb8(buf) => (3, buf.into_raw()),
        DynamicImage::ImageLuma16(_)
        | DynamicImage::ImageLumaA16(_)
        | DynamicImage::ImageRgb16(_)
        | DynamicImage::ImageRgba16(_)
        | DynamicImage::ImageRgb32F(_)
        | DynamicImage::ImageRgba32F(_) => {
            return Err(Error::UnsupportedDepth {
                path: path.to_path_buf(),
                detail: format!("{:?}", decoded.color()),
            })
        }
        other => {
            return Err(Error::Format {
                path: path.to_path_buf(),
                message: format!(
                    "unsupported channel layout {:?}; expected 8-bit gray or RGB",
                    other.color()
                ),
            })
        }
    };
    let n = width * height;
    let mut data = vec![0.0; n * channels];
    for (i, &byte) in interleaved.iter().enumerate() {
        data[(i % channels) * n + i / channels] = f64::from(byte);
    }
    Image::new(width, height, channels, data)
}

/// Rounds working values to the nearest integer and clamps to `[0, 255]`,
/// returning interleaved bytes.
pub fn to_bytes(img: &Image) -> Vec<u8> {
    let n = img.pixel_count();
    let c = img.channels();
    let mut out = vec![0u8; n * c];
    for ch in 0..c {
        for (i, &v) in img.plane(ch).iter().enumerate() {
            out[i * c + ch] = v.round().clamp(0.0, MAX_INTENSITY) as u8;
        }
    }
    out
}

/// Writes PNG, PGM or PPM depending on the file extension.
pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(str::to_ascii_lowercase)
        .unwrap_or_default();
    let color = if img.channels() == 1 {
        ExtendedColorType::L8
    } else {
        ExtendedColorType::Rgb8
    };
    let subtype = match (ext.as_str(), img.channels()) {
        ("png", _) => None,
        ("pgm", 1) | ("pnm", 1) => Some(PnmSubtype::Graymap(SampleEncoding::Binary)),
        ("ppm", 3) | ("pnm", 3) => Some(PnmSubtype::Pixmap(SampleEncoding::Binary)),
        ("pgm", _) | ("ppm", _) => {
            return Err(Error::InvalidInput(format!(
                "{}: .{ext} cannot hold a {}-channel image",
                path.display(),
                img.channels()
            )))
        }
        _ => {
            return Err(Error::InvalidInput(format!(
                "{}: unknown image extension; use .png, .pgm or .ppm",
                path.display()
            )))
        }
    };
    let bytes = to_bytes(img);
    let file = File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut writer = BufWriter::new(file);
    let (w, h) = (img.width() as u32, img.height() as u32);
    let encoded = match subtype {
        None => PngEncoder::new(&mut writer).write_image(&bytes, w, h, color),
        Some(sub) => PnmEncoder::new(&mut writer)
            .with_subtype(sub)
            .write_image(&bytes, w, h, color),
    };
    encoded.map_err(|e| Error::Format {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    writer.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
