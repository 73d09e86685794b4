use std::path::Path;

use super::{Dataset, Split};
use crate::tensor::Tensor;
use crate::{Error, Result, Scalar};

/// Big-endian magic of an unsigned-byte, three-dimensional IDX file.
pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
/// Big-endian magic of an unsigned-byte, one-dimensional IDX file.
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Format(format!("{what}: truncated header")))
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Loads an MNIST-style image/label pair. Pixels are flattened row-major and
/// scaled to `[0, 1]`; the class count is the largest label plus one.
pub fn load_idx<T: Scalar>(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<Dataset<T>> {
    let images = read_file(images_path.as_ref())?;
    let labels = read_file(labels_path.as_ref())?;

    let magic = read_u32(&images, 0, "images")?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Format(format!(
            "images: bad magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}"
        )));
    }
    let n = read_u32(&images, 4, "images")? as usize;
    let rows = read_u32(&images, 8, "images")? as usize;
    let cols = read_u32(&images, 12, "images")? as usize;
    let d = rows * cols;
    let pixels = &images[16..];
    if pixels.len() != n * d {
        return Err(Error::Format(format!(
            "images: header promises {n}×{rows}×{cols} bytes, file holds {}",
            pixels.len()
        )));
    }

    let magic = read_u32(&labels, 0, "labels")?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Format(format!(
            "labels: bad magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}"
        )));
    }
    let n_labels = read_u32(&labels, 4, "labels")? as usize;
    let label_bytes = &labels[8..];
    if label_bytes.len() != n_labels {
        return Err(Error::Format(format!(
            "labels: header promises {n_labels} bytes, file holds {}",
            label_bytes.len()
        )));
    }
    if n_labels != n {
        return Err(Error::Data(format!("{n} images but {n_labels} labels")));
    }
    if n == 0 || d == 0 {
        return Err(Error::Data("IDX files contain no samples".into()));
    }

    let features = Tensor::from_vec(
        &[n, d],
        pixels.iter().map(|&p| T::of(f64::from(p) / 255.0)).collect(),
    )?;
    let labels: Vec<usize> = label_bytes.iter().map(|&b| usize::from(b)).collect();
    let classes = labels.iter().max().map_or(0, |m| m + 1);
    Dataset::new(features, labels, classes, Split::Train)
}
