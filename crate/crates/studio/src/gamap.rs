//! `GAMAP1` files and 8-bit grayscale PNG for maps and images.

use std::io::Cursor;
use std::path::{Path, PathBuf};

use gazestudio_core::attnmap::{decode_gamap, encode_gamap, AttnMapError};
use gazestudio_core::net::GrayImage;
use gazestudio_core::AttentionMap;
use image::{ImageFormat, ImageReader, Luma};
use thiserror::Error;

use crate::track::write_atomic;

#[derive(Debug, Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Map { path: PathBuf, source: AttnMapError },
    #[error("{path}: {source}")]
    Png { path: PathBuf, source: image::ImageError },
}

pub fn write_gamap(path: &Path, map: &AttentionMap) -> Result<(), FileError> {
    write_atomic(path, &encode_gamap(map)).map_err(|source| FileError::Io { path: path.into(), source })
}

pub fn read_gamap(path: &Path) -> Result<AttentionMap, FileError> {
    let bytes = std::fs::read(path).map_err(|source| FileError::Io { path: path.into(), source })?;
    decode_gamap(&bytes).map_err(|source| FileError::Map { path: path.into(), source })
}

/// PNG bytes of a single-channel 8-bit image.
pub fn encode_png(width: usize, height: usize, gray: Vec<u8>) -> Result<Vec<u8>, image::ImageError> {
    let img = image::ImageBuffer::<Luma<u8>, _>::from_raw(width as u32, height as u32, gray)
        .expect("gray buffer matches dimensions");
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

/// Decodes any PNG to 8-bit luma, returning `(width, height, bytes)`.
pub fn decode_png(bytes: &[u8]) -> Result<(usize, usize, Vec<u8>), image::ImageError> {
    let img = ImageReader::with_format(Cursor::new(bytes), ImageFormat::Png).decode()?.into_luma8();
    let (w, h) = img.dimensions();
    Ok((w as usize, h as usize, img.into_raw()))
}

/// Map export for viewing: `value * 255`, rounded half up.
pub fn map_png(map: &AttentionMap) -> Result<Vec<u8>, image::ImageError> {
    encode_png(map.width(), map.height(), map.to_gray8())
}

pub fn write_map_png(path: &Path, map: &AttentionMap) -> Result<(), FileError> {
    let bytes = map_png(map).map_err(|source| FileError::Png { path: path.into(), source })?;
    write_atomic(path, &bytes).map_err(|source| FileError::Io { path: path.into(), source })
}

pub fn write_image(path: &Path, image: &GrayImage) -> Result<(), FileError> {
    let bytes =
        encode_png(image.width, image.height, image.to_gray8()).map_err(|source| FileError::Png { path: path.into(), source })?;
    write_atomic(path, &bytes).map_err(|source| FileError::Io { path: path.into(), source })
}

pub fn read_image(path: &Path) -> Result<GrayImage, FileError> {
    let bytes = std::fs::read(path).map_err(|source| FileError::Io { path: path.into(), source })?;
    let (w, h, gray) = decode_png(&bytes).map_err(|source| FileError::Png { path: path.into(), source })?;
    Ok(GrayImage::from_gray8(w, h, &gray))
}

/// Width and height from the PNG header, without decoding pixels.
pub fn image_dimensions(path: &Path) -> Result<(u32, u32), FileError> {
    image::image_dimensions(path).map_err(|source| FileError::Png { path: path.into(), source })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_gray() {
        let gray: Vec<u8> = (0..=255).collect();
        let png = encode_png(16, 16, gray.clone()).unwrap();
        assert_eq!(decode_png(&png).unwrap(), (16, 16, gray));
    }

    #[test]
    fn map_png_rounds_half_up() {
        let m = AttentionMap::from_values(3, 1, vec![0.0, 0.5, 1.0]).unwrap();
        let (_, _, g) = decode_png(&map_png(&m).unwrap()).unwrap();
        assert_eq!(g, [0, 128, 255]);
    }
}
