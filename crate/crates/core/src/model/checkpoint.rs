//! Flat binary model checkpoints.
//!
//! Layout (little-endian): 8-byte magic, kind byte (0 = CNN, 1 = logistic),
//! variant byte, fusion flag, input channel count, input downsample factor
//! (u32), block count (u32), block widths (u32 each), feature dim (u32),
//! parameter count (u64), then the parameters as 64-bit floats.

use std::path::Path;

use thiserror::Error;

use super::cnn::{BackboneConfig, CnnModel};
use super::logistic::LogisticVcdr;
use super::ModelError;
use crate::config::Variant;

const MAGIC: &[u8; 8] = b"FFCKPT01";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("failed to access checkpoint {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        source: std::io::Error,
    },
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A trained model together with the input-construction facts needed to
/// score new samples consistently.
#[derive(Debug, Clone, PartialEq)]
pub enum Checkpoint {
    Cnn {
        variant: Variant,
        input_downsample: u32,
        model: CnnModel,
    },
    Logistic {
        variant: Variant,
        model: LogisticVcdr,
    },
}

impl Checkpoint {
    pub fn variant(&self) -> Variant {
        match self {
            Checkpoint::Cnn { variant, .. } | Checkpoint::Logistic { variant, .. } => *variant,
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        match self {
            Checkpoint::Cnn {
                variant,
                input_downsample,
                model,
            } => {
                out.push(0);
                out.push(variant.code());
                out.push(model.uses_vcdr() as u8);
                out.push(model.config().in_channels as u8);
                out.extend_from_slice(&input_downsample.to_le_bytes());
                let widths = &model.config().block_widths;
                out.extend_from_slice(&(widths.len() as u32).to_le_bytes());
                for &w in widths {
                    out.extend_from_slice(&(w as u32).to_le_bytes());
                }
                out.extend_from_slice(&(model.config().feature_dim as u32).to_le_bytes());
                let params = model.parameters();
                out.extend_from_slice(&(params.len() as u64).to_le_bytes());
                for p in params {
                    out.extend_from_slice(&p.to_le_bytes());
                }
            }
            Checkpoint::Logistic { variant, model } => {
                out.push(1);
                out.push(variant.code());
                out.push(0);
                out.push(0);
                out.extend_from_slice(&0u32.to_le_bytes());
                out.extend_from_slice(&0u32.to_le_bytes());
                out.extend_from_slice(&0u32.to_le_bytes());
                out.extend_from_slice(&2u64.to_le_bytes());
                out.extend_from_slice(&model.slope.to_le_bytes());
                out.extend_from_slice(&model.intercept.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Checkpoint, CheckpointError> {
        let mut reader = ByteReader::new(bytes);
        if reader.take(8)? != MAGIC {
            return Err(CheckpointError::Malformed("bad magic".into()));
        }
        let kind = reader.u8()?;
        let variant = Variant::from_code(reader.u8()?)
            .ok_or_else(|| CheckpointError::Malformed("unknown variant code".into()))?;
        let use_vcdr = reader.u8()? != 0;
        let in_channels = reader.u8()? as usize;
        let input_downsample = reader.u32()?;
        let n_blocks = reader.u32()? as usize;
        let mut widths = Vec::with_capacity(n_blocks);
        for _ in 0..n_blocks {
            widths.push(reader.u32()? as usize);
        }
        let feature_dim = reader.u32()? as usize;
        let param_count = reader.u64()? as usize;
        let mut params = Vec::with_capacity(param_count);
        for _ in 0..param_count {
            params.push(reader.f64()?);
        }
        if !reader.is_empty() {
            return Err(CheckpointError::Malformed("trailing bytes".into()));
        }
        match kind {
            0 => {
                let config = BackboneConfig {
                    in_channels,
                    block_widths: widths,
                    feature_dim,
                };
                let mut model = CnnModel::new(config, use_vcdr, 0)?;
                if params.len() != model.parameter_count() {
                    return Err(CheckpointError::Malformed(format!(
                        "parameter count {} does not match architecture ({})",
                        params.len(),
                        model.parameter_count()
                    )));
                }
                model.set_parameters(&params);
                Ok(Checkpoint::Cnn {
                    variant,
                    input_downsample,
                    model,
                })
            }
            1 => {
                if params.len() != 2 {
                    return Err(CheckpointError::Malformed(
                        "logistic checkpoint must hold exactly 2 parameters".into(),
                    ));
                }
                Ok(Checkpoint::Logistic {
                    variant,
                    model: LogisticVcdr {
                        slope: params[0],
                        intercept: params[1],
                    },
                })
            }
            other => Err(CheckpointError::Malformed(format!(
                "unknown model kind {other}"
            ))),
        }
    }
}

pub fn save_checkpoint(path: &Path, checkpoint: &Checkpoint) -> Result<(), CheckpointError> {
    std::fs::write(path, checkpoint.to_bytes()).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let bytes = std::fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Checkpoint::from_bytes(&bytes)
}

struct ByteReader<'a> {
    bytes: &'a [u8],
    offset: usize,
}

impl<'a> ByteReader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, offset: 0 }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        if self.offset + n > self.bytes.len() {
            return Err(CheckpointError::Malformed("unexpected end of file".into()));
        }
        let slice = &self.bytes[self.offset..self.offset + n];
        self.offset += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8, CheckpointError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, CheckpointError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn is_empty(&self) -> bool {
        self.offset == self.bytes.len()
    }
}
