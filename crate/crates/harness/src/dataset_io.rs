//! Dataset persistence: a small binary container (`STPD`) that round-trips
//! bit-exactly, plus CSV import/export for inspection and hand-made instances.
//!
//! Layout, all little-endian: `b"STPD"`, `u32` version, `u64` m, `u64` d,
//! `u32` meta length and UTF-8 meta, `m*d` `f64` features row-major, `m` `i8` labels.

use std::fs;
use std::path::Path;

use steepest_core::{Dataset, Matrix};

use crate::error::{HarnessError, Result};

pub const MAGIC: &[u8; 4] = b"STPD";
pub const VERSION: u32 = 1;

pub fn encode_dataset(ds: &Dataset<f64>) -> Vec<u8> {
    let meta = ds.meta.as_bytes();
    let mut out = Vec::with_capacity(32 + meta.len() + ds.x.len() * 8 + ds.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(ds.len() as u64).to_le_bytes());
    out.extend_from_slice(&(ds.dim() as u64).to_le_bytes());
    out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    out.extend_from_slice(meta);
    for v in ds.x.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out.extend(ds.y.iter().map(|&y| (y as i8) as u8));
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.at.checked_add(n).ok_or("length overflow")?;
        let s = self
            .bytes
            .get(self.at..end)
            .ok_or_else(|| format!("truncated at byte {}", self.at))?;
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

pub fn decode_dataset(bytes: &[u8]) -> std::result::Result<Dataset<f64>, String> {
    let mut r = Reader { bytes, at: 0 };
    if r.take(4)? != MAGIC {
        return Err("not an STPD dataset (bad magic)".into());
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(format!(
            "unsupported STPD version {version}; this build reads version {VERSION}"
        ));
    }
    let m = usize::try_from(r.u64()?).map_err(|_| "row count too large")?;
    let d = usize::try_from(r.u64()?).map_err(|_| "dimension too large")?;
    let meta_len = r.u32()? as usize;
    let meta = String::from_utf8(r.take(meta_len)?.to_vec()).map_err(|_| "meta is not UTF-8")?;
    let n = m.checked_mul(d).ok_or("dimension overflow")?;
    let raw = r.take(n.checked_mul(8).ok_or("dimension overflow")?)?;
    let x: Vec<f64> = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let y: Vec<f64> = r.take(m)?.iter().map(|&b| b as i8 as f64).collect();
    if r.at != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - r.at));
    }
    Dataset::new(Matrix::from_vec(m, d, x), y, meta).map_err(|e| e.to_string())
}

pub fn save_dataset(ds: &Dataset<f64>, path: &Path) -> Result<()> {
    fs::write(path, encode_dataset(ds)).map_err(|e| HarnessError::io(path, e))
}

pub fn load_dataset(path: &Path) -> Result<Dataset<f64>> {
    let bytes = fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    decode_dataset(&bytes).map_err(|r| HarnessError::format(path, r))
}

/// Header `x1,…,xd,y`, one row per example, shortest round-trip floats.
pub fn dataset_csv(ds: &Dataset<f64>) -> String {
    let mut out = String::new();
    let header: Vec<String> = (1..=ds.dim()).map(|j| format!("x{j}")).collect();
    out.push_str(&header.join(","));
    out.push_str(",y\n");
    for i in 0..ds.len() {
        let (x, y) = ds.example(i);
        for v in x {
            out.push_str(&format!("{v},"));
        }
        out.push_str(&format!("{y}\n"));
    }
    out
}

pub fn export_csv(ds: &Dataset<f64>, path: &Path) -> Result<()> {
    fs::write(path, dataset_csv(ds)).map_err(|e| HarnessError::io(path, e))
}

/// Parse CSV written by [`dataset_csv`] (the last column is the label; a
/// non-numeric first line is treated as a header).
pub fn parse_csv(text: &str) -> std::result::Result<Dataset<f64>, String> {
    let mut rows = Vec::new();
    let mut ys = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        let fields = match fields {
            Ok(f) => f,
            Err(_) if rows.is_empty() && ys.is_empty() && lineno == 0 => continue,
            Err(e) => return Err(format!("line {}: {e}", lineno + 1)),
        };
        if fields.len() < 2 {
            return Err(format!("line {}: need at least one feature and a label", lineno + 1));
        }
        let (x, y) = fields.split_at(fields.len() - 1);
        if let Some(first) = rows.first() {
            let first: &Vec<f64> = first;
            if first.len() != x.len() {
                return Err(format!("line {}: expected {} features", lineno + 1, first.len()));
            }
        }
        rows.push(x.to_vec());
        ys.push(y[0]);
    }
    if rows.is_empty() {
        return Err("no data rows".into());
    }
    Dataset::new(Matrix::from_rows(&rows), ys, "csv").map_err(|e| e.to_string())
}

/// Load a dataset from `.csv` or STPD (anything else).
pub fn load_any(path: &Path) -> Result<Dataset<f64>> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        parse_csv(&text).map_err(|r| HarnessError::format(path, r))
    } else {
        load_dataset(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use steepest_core::Rng;

    fn random_dataset(seed: u64, m: usize, d: usize) -> Dataset<f64> {
        let mut rng = Rng::new(seed);
        let x: Vec<f64> = (0..m * d).map(|_| rng.gaussian()).collect();
        let y: Vec<f64> = (0..m)
            .map(|_| if rng.uniform() < 0.5 { 1.0 } else { -1.0 })
            .collect();
        Dataset::new(Matrix::from_vec(m, d, x), y, "random").unwrap()
    }

    #[test]
    fn binary_round_trip() {
        let ds = random_dataset(4, 17, 5);
        let back = decode_dataset(&encode_dataset(&ds)).unwrap();
        assert_eq!(back, ds);
        let bits: Vec<u64> = back.x.as_slice().iter().map(|v| v.to_bits()).collect();
        let orig: Vec<u64> = ds.x.as_slice().iter().map(|v| v.to_bits()).collect();
        assert_eq!(bits, orig);
    }

    #[test]
    fn version_bump_rejected() {
        let mut bytes = encode_dataset(&random_dataset(1, 3, 2));
        bytes[4..8].copy_from_slice(&2u32.to_le_bytes());
        let err = decode_dataset(&bytes).unwrap_err();
        assert!(err.contains("unsupported STPD version 2"), "{err}");
    }

    #[test]
    fn bad_magic_and_truncation() {
        let mut bytes = encode_dataset(&random_dataset(1, 3, 2));
        assert!(decode_dataset(&bytes[..bytes.len() - 1]).is_err());
        bytes[0] = b'X';
        assert!(decode_dataset(&bytes).is_err());
    }

    #[test]
    fn csv_has_header_plus_rows() {
        let ds = random_dataset(2, 9, 3);
        let text = dataset_csv(&ds);
        assert_eq!(text.lines().count(), 10);
        assert!(text.starts_with("x1,x2,x3,y\n"));
        let back = parse_csv(&text).unwrap();
        assert_eq!(back.x, ds.x);
        assert_eq!(back.y, ds.y);
    }

    #[test]
    fn csv_without_header() {
        let ds = parse_csv("1,0,1\n-1,0,-1\n").unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.dim(), 2);
        assert!(parse_csv("1,0,1\n-1,-1\n").is_err());
    }
}
