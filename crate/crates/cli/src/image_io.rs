//! 8-bit grayscale image files (binary PGM canonical, PNG also accepted).
//!
//! Pixels are vectorized column by column, so `data[c * height + r]` is row
//! `r`, column `c`.

use std::path::Path;

use abcs::ImageVector;
use image::codecs::pnm::{PnmEncoder, PnmSubtype, SampleEncoding};
use image::{ColorType, DynamicImage, GrayImage, ImageEncoder, ImageFormat};

use crate::error::{CliError, CliResult};

/// Reads an 8-bit grayscale image with intensities in `[0, 255]`.
pub fn read_gray(path: &Path) -> CliResult<ImageVector<f64>> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    let img = image::load_from_memory(&bytes).map_err(|e| CliError::format(path, e.to_string()))?;
    let gray = match img {
        DynamicImage::ImageLuma8(g) => g,
        other => {
            let ct = other.color();
            let detail = match ct {
                ColorType::L16 | ColorType::La16 | ColorType::Rgb16 | ColorType::Rgba16 => {
                    "16-bit images are not supported; convert to 8-bit grayscale"
                }
                _ => "only single-channel 8-bit grayscale images are supported",
            };
            return Err(CliError::format(path, format!("{detail} (found {ct:?})")));
        }
    };
    Ok(from_gray(&gray))
}

pub fn from_gray(gray: &GrayImage) -> ImageVector<f64> {
    let (w, h) = gray.dimensions();
    ImageVector::from_fn(w as usize, h as usize, |r, c| gray.get_pixel(c as u32, r as u32)[0] as f64)
}

/// Rounds to the nearest gray level after clamping to `[0, 255]`.
pub fn to_gray(img: &ImageVector<f64>) -> GrayImage {
    GrayImage::from_fn(img.width() as u32, img.height() as u32, |c, r| {
        image::Luma([img.get(r as usize, c as usize).clamp(0.0, 255.0).round() as u8])
    })
}

/// Writes binary PGM for `.pgm` (or no) extension, PNG for `.png`.
pub fn write_gray(path: &Path, img: &ImageVector<f64>) -> CliResult<()> {
    let gray = to_gray(img);
    let is_png = matches!(ImageFormat::from_path(path), Ok(ImageFormat::Png));
    let mut buf = Vec::new();
    let res = if is_png {
        image::codecs::png::PngEncoder::new(&mut buf).write_image(
            gray.as_raw(),
            gray.width(),
            gray.height(),
            ColorType::L8,
        )
    } else {
        PnmEncoder::new(&mut buf)
            .with_subtype(PnmSubtype::Graymap(SampleEncoding::Binary))
            .write_image(gray.as_raw(), gray.width(), gray.height(), ColorType::L8)
    };
    res.map_err(|e| CliError::format(path, e.to_string()))?;
    std::fs::write(path, buf).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_and_png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let img = ImageVector::from_fn(7, 5, |r, c| ((r * 37 + c * 91) % 256) as f64);
        for name in ["a.pgm", "a.png"] {
            let path = dir.path().join(name);
            write_gray(&path, &img).unwrap();
            assert_eq!(read_gray(&path).unwrap(), img);
        }
    }

    #[test]
    fn column_stacked_order() {
        // 2 rows x 3 columns, pixel value 10 * row + col
        let gray = GrayImage::from_fn(3, 2, |c, r| image::Luma([(10 * r + c) as u8]));
        let v = from_gray(&gray);
        assert_eq!(v.data().to_vec(), vec![0.0, 10.0, 1.0, 11.0, 2.0, 12.0]);
    }

    #[test]
    fn rejects_sixteen_bit() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("deep.pgm");
        let mut bytes = b"P5\n2 1\n65535\n".to_vec();
        bytes.extend_from_slice(&[0x12, 0x34, 0xff, 0x00]);
        std::fs::write(&path, bytes).unwrap();
        let err = read_gray(&path).unwrap_err();
        assert!(err.to_string().contains("16-bit"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn rejects_missing_and_garbage() {
        let dir = tempfile::tempdir().unwrap();
        let missing = read_gray(&dir.path().join("nope.pgm")).unwrap_err();
        assert!(matches!(missing, CliError::Io { .. }));
        let junk = dir.path().join("junk.pgm");
        std::fs::write(&junk, b"not an image").unwrap();
        assert!(matches!(read_gray(&junk).unwrap_err(), CliError::Format { .. }));
    }

    #[test]
    fn writing_rounds_and_clamps() {
        let img = ImageVector::from_fn(3, 1, |_, c| [-4.0, 127.6, 300.0][c]);
        let gray = to_gray(&img);
        assert_eq!(gray.as_raw(), &vec![0u8, 128, 255]);
    }
}
