//! CRNW weight files on disk.

use std::path::Path;

use ccl_core::format::{decode_weights, decode_weights_for, encode_weights, LayerDescriptor};
use ccl_core::layer::LayerWeights;
use ccl_core::model::ArchConfig;

use crate::error::{read, write, IoError, Result};

pub fn write_weights(path: &Path, config: &ArchConfig, weights: &[LayerWeights]) -> Result<()> {
    let bytes = encode_weights(config, weights).map_err(|e| IoError::core(path, e))?;
    write(path, bytes)
}

/// Reads weights and checks them against `config`.
pub fn read_weights(path: &Path, config: &ArchConfig) -> Result<Vec<LayerWeights>> {
    decode_weights_for(&read(path)?, config).map_err(|e| IoError::core(path, e))
}

/// Reads weights without an architecture to check against.
pub fn read_weights_raw(path: &Path) -> Result<(Vec<LayerDescriptor>, Vec<LayerWeights>)> {
    decode_weights(&read(path)?).map_err(|e| IoError::core(path, e))
}
