//! Binary checkpoints of a trained model.
//!
//! Layout, little-endian: `b"STPC"`, `u32` version, `u64` step, `u8` model
//! kind (0 linear, 1 two-layer, 2 two-layer with frozen head), `u64`
//! input_dim, `u64` width, `u64` head length and `f64` head, `u64` block
//! count, per block `u64` rows, `u64` cols and `f64` entries row-major.

use std::fs;
use std::path::Path;

use steepest_core::{Matrix, Model, ModelSpec, Params};

use crate::error::{HarnessError, Result};

pub const MAGIC: &[u8; 4] = b"STPC";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub model: Model<f64>,
    pub theta: Params<f64>,
    pub step: u64,
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64s(out: &mut Vec<u8>, xs: &[f64]) {
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

pub fn encode_checkpoint(ck: &Checkpoint) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    put_u64(&mut out, ck.step);
    let (kind, d, width) = match *ck.model.spec() {
        ModelSpec::Linear { input_dim } => (0u8, input_dim, 0),
        ModelSpec::TwoLayerRelu {
            input_dim,
            width,
            freeze_second_layer,
        } => (if freeze_second_layer { 2 } else { 1 }, input_dim, width),
    };
    out.push(kind);
    put_u64(&mut out, d as u64);
    put_u64(&mut out, width as u64);
    let head = ck.model.frozen_head().unwrap_or(&[]);
    put_u64(&mut out, head.len() as u64);
    put_f64s(&mut out, head);
    put_u64(&mut out, ck.theta.num_blocks() as u64);
    for b in ck.theta.blocks() {
        put_u64(&mut out, b.rows() as u64);
        put_u64(&mut out, b.cols() as u64);
        put_f64s(&mut out, b.as_slice());
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.at.checked_add(n).ok_or("length overflow")?;
        let s = self
            .bytes
            .get(self.at..end)
            .ok_or_else(|| format!("truncated at byte {}", self.at))?;
        self.at = end;
        Ok(s)
    }

    fn u64(&mut self) -> std::result::Result<u64, String> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn usize(&mut self) -> std::result::Result<usize, String> {
        usize::try_from(self.u64()?).map_err(|_| "size too large".to_string())
    }

    fn f64s(&mut self, n: usize) -> std::result::Result<Vec<f64>, String> {
        let raw = self.take(n.checked_mul(8).ok_or("length overflow")?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn decode_checkpoint(bytes: &[u8]) -> std::result::Result<Checkpoint, String> {
    let mut c = Cursor { bytes, at: 0 };
    if c.take(4)? != MAGIC {
        return Err("not a checkpoint (bad magic)".into());
    }
    let version = u32::from_le_bytes(c.take(4)?.try_into().unwrap());
    if version != VERSION {
        return Err(format!("unsupported checkpoint version {version}"));
    }
    let step = c.u64()?;
    let kind = c.take(1)?[0];
    let input_dim = c.usize()?;
    let width = c.usize()?;
    let head_len = c.usize()?;
    let head = c.f64s(head_len)?;
    let nblocks = c.usize()?;
    let mut blocks = Vec::with_capacity(nblocks.min(16));
    for _ in 0..nblocks {
        let rows = c.usize()?;
        let cols = c.usize()?;
        let n = rows.checked_mul(cols).ok_or("block too large")?;
        blocks.push(Matrix::from_vec(rows, cols, c.f64s(n)?));
    }
    if c.at != bytes.len() {
        return Err("trailing bytes".into());
    }
    let model = match kind {
        0 => Model::new(ModelSpec::Linear { input_dim }),
        1 => Model::new(ModelSpec::TwoLayerRelu {
            input_dim,
            width,
            freeze_second_layer: false,
        }),
        2 => Model::with_head(
            ModelSpec::TwoLayerRelu {
                input_dim,
                width,
                freeze_second_layer: true,
            },
            head,
        ),
        other => return Err(format!("unknown model kind {other}")),
    }
    .map_err(|e| e.to_string())?;
    let theta = Params::new(blocks);
    theta
        .check_shapes(&model.spec().param_shapes())
        .map_err(|e| e.to_string())?;
    Ok(Checkpoint { model, theta, step })
}

pub fn save_checkpoint(path: &Path, ck: &Checkpoint) -> Result<()> {
    fs::write(path, encode_checkpoint(ck)).map_err(|e| HarnessError::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| HarnessError::io(path, e))?;
    decode_checkpoint(&bytes).map_err(|r| HarnessError::format(path, r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use steepest_core::models::init_params;
    use steepest_core::{InitScheme, InitSpec};

    #[test]
    fn round_trip_all_kinds() {
        let init = InitSpec {
            scale: 0.5,
            scheme: InitScheme::PaperUniform,
            seed: 3,
        };
        for spec in [
            ModelSpec::Linear { input_dim: 3 },
            ModelSpec::TwoLayerRelu {
                input_dim: 3,
                width: 4,
                freeze_second_layer: false,
            },
            ModelSpec::TwoLayerRelu {
                input_dim: 3,
                width: 4,
                freeze_second_layer: true,
            },
        ] {
            let (model, theta) = init_params::<f64>(&spec, &init).unwrap();
            let ck = Checkpoint { model, theta, step: 17 };
            assert_eq!(decode_checkpoint(&encode_checkpoint(&ck)).unwrap(), ck);
        }
    }

    #[test]
    fn corrupted_rejected() {
        let (model, theta) = init_params::<f64>(
            &ModelSpec::Linear { input_dim: 2 },
            &InitSpec {
                scale: 1.0,
                scheme: InitScheme::PaperUniform,
                seed: 0,
            },
        )
        .unwrap();
        let bytes = encode_checkpoint(&Checkpoint { model, theta, step: 0 });
        assert!(decode_checkpoint(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[0] = 0;
        assert!(decode_checkpoint(&bad).is_err());
    }
}
