use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Read an image file into a `(1, h, w, 3)` tensor on `[0, 1]`. 8-bit and
/// 16-bit PNGs are both accepted (values normalized); grayscale is expanded
/// to RGB.
pub fn read_rgb_png<T: Scalar>(path: &Path) -> Result<Tensor<T>> {
    let img = image::open(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    let rgb = img.to_rgb16();
    let (w, h) = rgb.dimensions();
    let raw = rgb.into_raw();
    let data = raw
        .into_iter()
        .map(|v| T::from_f64(v as f64 / 65535.0))
        .collect();
    Tensor::from_vec(&[1, h as usize, w as usize, 3], data)
}

/// Write a `(1, h, w, 3)` or `(h, w, 3)` tensor as an 8-bit RGB PNG,
/// clamping values to `[0, 1]`.
pub fn write_rgb_png<T: Scalar>(path: &Path, img: &Tensor<T>) -> Result<()> {
    let (h, w) = match img.shape() {
        [1, h, w, 3] => (*h, *w),
        [h, w, 3] => (*h, *w),
        other => {
            return Err(Error::shape(
                "write_rgb_png",
                format!("expected (1, h, w, 3) or (h, w, 3), got {other:?}"),
            ))
        }
    };
    let bytes: Vec<u8> = img
        .data()
        .iter()
        .map(|v| (v.to_f64().clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let buf = image::RgbImage::from_raw(w as u32, h as u32, bytes).ok_or_else(|| Error::Image {
        path: path.to_path_buf(),
        detail: "buffer size mismatch".into(),
    })?;
    buf.save(path).map_err(|e| Error::Image {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}

/// PNG files in a directory, sorted by filename for reproducible ordering.
pub fn list_png_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .map(|e| e.eq_ignore_ascii_case("png"))
                .unwrap_or(false)
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Image {
            path: dir.to_path_buf(),
            detail: "no .png files found".into(),
        });
    }
    Ok(files)
}

/// Load every PNG in a directory as `(stem, tensor)` pairs.
pub fn load_rgb_dir<T: Scalar>(dir: &Path) -> Result<Vec<(String, Tensor<T>)>> {
    list_png_files(dir)?
        .into_iter()
        .map(|p| {
            let name = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            Ok((name, read_rgb_png(&p)?))
        })
        .collect()
}
