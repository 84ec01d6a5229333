//! Reader for the big-endian IDX files MNIST ships in, reduced to a binary
//! digit-pair task.

use std::fs;
use std::path::Path;

use sha2::{Digest, Sha256};
use steepest_core::{Dataset, Matrix};

use crate::error::{HarnessError, Result};

pub const IMAGE_MAGIC: u32 = 2051;
pub const LABEL_MAGIC: u32 = 2049;

fn be_u32(bytes: &[u8], at: usize) -> Option<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

/// Images as `(count, rows, cols, pixels)`.
pub fn parse_images(bytes: &[u8]) -> std::result::Result<(usize, usize, usize, &[u8]), String> {
    let magic = be_u32(bytes, 0).ok_or("truncated header")?;
    if magic != IMAGE_MAGIC {
        return Err(format!("bad image magic {magic:#010x}, expected {IMAGE_MAGIC:#010x}"));
    }
    let n = be_u32(bytes, 4).ok_or("truncated header")? as usize;
    let rows = be_u32(bytes, 8).ok_or("truncated header")? as usize;
    let cols = be_u32(bytes, 12).ok_or("truncated header")? as usize;
    let need = n
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or("image dimensions overflow")?;
    let body = &bytes[16..];
    if body.len() < need {
        return Err(format!("truncated: {} pixel bytes, header promises {need}", body.len()));
    }
    Ok((n, rows, cols, &body[..need]))
}

pub fn parse_labels(bytes: &[u8]) -> std::result::Result<&[u8], String> {
    let magic = be_u32(bytes, 0).ok_or("truncated header")?;
    if magic != LABEL_MAGIC {
        return Err(format!("bad label magic {magic:#010x}, expected {LABEL_MAGIC:#010x}"));
    }
    let n = be_u32(bytes, 4).ok_or("truncated header")? as usize;
    let body = &bytes[8..];
    if body.len() < n {
        return Err(format!("truncated: {} labels, header promises {n}", body.len()));
    }
    Ok(&body[..n])
}

pub fn encode_images(rows: usize, cols: usize, images: &[Vec<u8>]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.len() * rows * cols);
    for v in [IMAGE_MAGIC, images.len() as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    for img in images {
        assert_eq!(img.len(), rows * cols);
        out.extend_from_slice(img);
    }
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// The first `m_train` images (in file order) showing `digit_a` (label +1)
/// or `digit_b` (label −1), flattened with pixels scaled to `[0, 1]`.
pub fn load_idx(
    images_path: &Path,
    labels_path: &Path,
    digit_a: u8,
    digit_b: u8,
    m_train: usize,
) -> Result<Dataset<f64>> {
    let img_bytes = fs::read(images_path).map_err(|e| HarnessError::io(images_path, e))?;
    let lbl_bytes = fs::read(labels_path).map_err(|e| HarnessError::io(labels_path, e))?;
    let (n, rows, cols, pixels) =
        parse_images(&img_bytes).map_err(|r| HarnessError::format(images_path, r))?;
    let labels = parse_labels(&lbl_bytes).map_err(|r| HarnessError::format(labels_path, r))?;
    if labels.len() != n {
        return Err(HarnessError::format(
            labels_path,
            format!("{} labels for {n} images", labels.len()),
        ));
    }
    if digit_a == digit_b {
        return Err(HarnessError::Config("digit pair must be two distinct digits".into()));
    }
    let d = rows * cols;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (i, &l) in labels.iter().enumerate() {
        if ys.len() == m_train {
            break;
        }
        let y = if l == digit_a {
            1.0
        } else if l == digit_b {
            -1.0
        } else {
            continue;
        };
        xs.extend(pixels[i * d..(i + 1) * d].iter().map(|&p| p as f64 / 255.0));
        ys.push(y);
    }
    let has_a = ys.contains(&1.0);
    let has_b = ys.contains(&-1.0);
    if !has_a || !has_b {
        let missing = if has_a { digit_b } else { digit_a };
        return Err(HarnessError::format(labels_path, format!("digit {missing} not present")));
    }
    if ys.len() < m_train {
        return Err(HarnessError::format(
            labels_path,
            format!("only {} images of digits {digit_a}/{digit_b}, {m_train} requested", ys.len()),
        ));
    }
    let meta = format!(
        "idx images={} labels={} pair={digit_a}/{digit_b} m={}",
        hex_digest(&img_bytes),
        hex_digest(&lbl_bytes),
        ys.len()
    );
    Ok(Dataset::new(Matrix::from_vec(ys.len(), d, xs), ys, meta)?)
}
