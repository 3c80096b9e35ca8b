//! PNG/JPEG decoding and 8-bit grayscale PNG encoding.

use std::io::Cursor;
use std::path::Path;

use image::{GrayImage, ImageFormat, RgbImage};

use crate::error::{Error, Result};
use crate::imaging::{BinaryMask, Image};

fn from_rgb8(rgb: &RgbImage) -> Result<Image> {
    let (w, h) = rgb.dimensions();
    let pixels = rgb
        .pixels()
        .map(|p| [p[0] as f64 / 255.0, p[1] as f64 / 255.0, p[2] as f64 / 255.0])
        .collect();
    Image::from_pixels(w as usize, h as usize, pixels)
}

pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|source| Error::Codec {
        path: Some(path.to_path_buf()),
        source,
    })?;
    from_rgb8(&img.to_rgb8())
}

/// Decodes PNG or JPEG bytes; any alpha channel is dropped.
pub fn decode_image(bytes: &[u8]) -> Result<Image> {
    let img = image::load_from_memory(bytes).map_err(|source| Error::Codec { path: None, source })?;
    match image::guess_format(bytes) {
        Ok(ImageFormat::Png) | Ok(ImageFormat::Jpeg) => {}
        _ => {
            return Err(Error::Codec {
                path: None,
                source: image::ImageError::Unsupported(image::error::UnsupportedError::from(
                    image::error::ImageFormatHint::Unknown,
                )),
            })
        }
    }
    from_rgb8(&img.to_rgb8())
}

pub fn image_to_rgb8(img: &Image) -> RgbImage {
    let mut out = RgbImage::new(img.width() as u32, img.height() as u32);
    for (dst, src) in out.pixels_mut().zip(img.pixels()) {
        dst.0 = src.map(|c| (c * 255.0).round().clamp(0.0, 255.0) as u8);
    }
    out
}

pub fn encode_rgb_png(img: &Image) -> Result<Vec<u8>> {
    let mut buf = Cursor::new(Vec::new());
    image_to_rgb8(img)
        .write_to(&mut buf, ImageFormat::Png)
        .map_err(|source| Error::Codec { path: None, source })?;
    Ok(buf.into_inner())
}

/// Encodes an 8-bit grayscale buffer (row-major) as PNG.
pub fn encode_gray_png(width: usize, height: usize, data: Vec<u8>) -> Result<Vec<u8>> {
    let gray = GrayImage::from_raw(width as u32, height as u32, data)
        .ok_or_else(|| Error::InvalidConfig("gray buffer does not match dimensions".into()))?;
    let mut buf = Cursor::new(Vec::new());
    gray.write_to(&mut buf, ImageFormat::Png)
        .map_err(|source| Error::Codec { path: None, source })?;
    Ok(buf.into_inner())
}

pub fn mask_to_gray(mask: &BinaryMask) -> Vec<u8> {
    mask.labels().iter().map(|&l| if l { 255 } else { 0 }).collect()
}

/// Mask PNG: foreground 255, background 0.
pub fn encode_mask_png(mask: &BinaryMask) -> Result<Vec<u8>> {
    encode_gray_png(mask.width(), mask.height(), mask_to_gray(mask))
}

pub fn write_bytes(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn save_mask(path: impl AsRef<Path>, mask: &BinaryMask) -> Result<()> {
    write_bytes(path, &encode_mask_png(mask)?)
}

pub fn save_image(path: impl AsRef<Path>, img: &Image) -> Result<()> {
    write_bytes(path, &encode_rgb_png(img)?)
}

/// Reads a mask file; gray values >= 128 are foreground.
pub fn load_mask(path: impl AsRef<Path>) -> Result<BinaryMask> {
    let path = path.as_ref();
    let img = image::open(path).map_err(|source| Error::Codec {
        path: Some(path.to_path_buf()),
        source,
    })?;
    let gray = img.to_luma8();
    let (w, h) = gray.dimensions();
    BinaryMask::new(w as usize, h as usize, gray.pixels().map(|p| p[0] >= 128).collect())
}
