//! Grayscale image ingestion (8/16-bit PNG) and the raw `KIMG` float64
//! format whose round trip is bit-exact.

use std::io::{Read, Write};
use std::path::Path;

use image::{DynamicImage, ImageBuffer, Luma};
use ndarray::Array2;

use crate::error::{Error, Result};

const KIMG_MAGIC: &[u8; 4] = b"KIMG";

/// Load a square grayscale image. PNG values are normalized to [0, 1];
/// `.kimg` files are read verbatim.
pub fn load_gray_image(path: &Path) -> Result<Array2<f64>> {
    if path.extension().and_then(|e| e.to_str()) == Some("kimg") {
        let mut f = std::fs::File::open(path)?;
        return read_kimg(&mut f);
    }
    let img = image::open(path)?;
    let (w, h) = (img.width() as usize, img.height() as usize);
    if w != h {
        return Err(Error::Format(format!("image must be square, got {w}x{h}")));
    }
    match img {
        DynamicImage::ImageLuma8(buf) => Ok(Array2::from_shape_fn((h, w), |(i, j)| {
            buf.get_pixel(j as u32, i as u32)[0] as f64 / 255.0
        })),
        DynamicImage::ImageLuma16(buf) => Ok(Array2::from_shape_fn((h, w), |(i, j)| {
            buf.get_pixel(j as u32, i as u32)[0] as f64 / 65535.0
        })),
        other => {
            // accept anything losslessly convertible to 16-bit gray
            let gray = other.to_luma16();
            Ok(Array2::from_shape_fn((h, w), |(i, j)| {
                gray.get_pixel(j as u32, i as u32)[0] as f64 / 65535.0
            }))
        }
    }
}

/// Save an image: `.png` quantizes to 8-bit (round half up), `.kimg`
/// stores raw float64 little-endian with a 12-byte header.
pub fn save_image(path: &Path, img: &Array2<f64>) -> Result<()> {
    let n = img.shape()[0];
    if img.shape()[1] != n {
        return Err(Error::ShapeMismatch("image must be square".into()));
    }
    match path.extension().and_then(|e| e.to_str()) {
        Some("kimg") => {
            let mut f = std::fs::File::create(path)?;
            write_kimg(&mut f, img)
        }
        Some("png") => {
            let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
                ImageBuffer::from_fn(n as u32, n as u32, |x, y| {
                    let v = img[[y as usize, x as usize]].clamp(0.0, 1.0);
                    Luma([(v * 255.0 + 0.5).floor() as u8])
                });
            buf.save(path)?;
            Ok(())
        }
        other => Err(Error::Format(format!("unsupported image extension {other:?}"))),
    }
}

/// `KIMG` header (magic + u32 N, little-endian) followed by N*N float64
/// values in row-major order.
pub fn write_kimg<W: Write>(w: &mut W, img: &Array2<f64>) -> Result<()> {
    let n = img.shape()[0];
    if img.shape()[1] != n {
        return Err(Error::ShapeMismatch("image must be square".into()));
    }
    w.write_all(KIMG_MAGIC)?;
    w.write_all(&(n as u32).to_le_bytes())?;
    // pad header to 12 bytes
    w.write_all(&[0u8; 4])?;
    for v in img.iter() {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_kimg<R: Read>(r: &mut R) -> Result<Array2<f64>> {
    let mut head = [0u8; 12];
    r.read_exact(&mut head).map_err(|_| Error::Format("truncated KIMG header".into()))?;
    if &head[0..4] != KIMG_MAGIC {
        return Err(Error::Format("bad KIMG magic".into()));
    }
    let n = u32::from_le_bytes(head[4..8].try_into().unwrap()) as usize;
    if n == 0 {
        return Err(Error::Format("empty KIMG image".into()));
    }
    let mut data = Vec::with_capacity(n * n);
    let mut buf = [0u8; 8];
    for _ in 0..n * n {
        r.read_exact(&mut buf).map_err(|_| Error::Format("truncated KIMG payload".into()))?;
        data.push(f64::from_le_bytes(buf));
    }
    Array2::from_shape_vec((n, n), data).map_err(|e| Error::Format(e.to_string()))
}
