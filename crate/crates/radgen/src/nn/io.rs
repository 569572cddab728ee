//! Binary serialization for named weight tensors.
//!
//! Layout: magic `RGW1`, then a little-endian u32 tensor count, then per
//! tensor a u32 name length, the UTF-8 name, u32 rows, u32 cols, and
//! rows·cols f64 values in row-major order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use ndarray::Array2;

use crate::error::{Error, Result};

use super::ParamSet;

const MAGIC: &[u8; 4] = b"RGW1";

/// SHA-256 hex digest of a training configuration's canonical JSON form,
/// stored in checkpoint metadata so a loaded model can be traced back to
/// the exact settings that produced it.
pub fn config_fingerprint<T: serde::Serialize>(config: &T) -> String {
    use sha2::Digest;
    let canonical = serde_json::to_string(config).expect("config serializes");
    hex::encode(sha2::Sha256::digest(canonical.as_bytes()))
}

/// Writes all parameters to `path` in declaration order.
pub fn save_weights(path: &Path, params: &ParamSet) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_u32::<LittleEndian>(params.len() as u32)?;
    for (name, value) in params.entries() {
        out.write_u32::<LittleEndian>(name.len() as u32)?;
        out.write_all(name.as_bytes())?;
        out.write_u32::<LittleEndian>(value.nrows() as u32)?;
        out.write_u32::<LittleEndian>(value.ncols() as u32)?;
        for &v in value.iter() {
            out.write_f64::<LittleEndian>(v)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads a parameter set written by [`save_weights`].
pub fn load_weights(path: &Path) -> Result<ParamSet> {
    let mut input = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint(format!(
            "{} is not a weights file (bad magic)",
            path.display()
        )));
    }
    let count = input.read_u32::<LittleEndian>()?;
    let mut params = ParamSet::new();
    for _ in 0..count {
        let name_len = input.read_u32::<LittleEndian>()? as usize;
        let mut name_bytes = vec![0u8; name_len];
        input.read_exact(&mut name_bytes)?;
        let name = String::from_utf8(name_bytes).map_err(|_| {
            Error::Checkpoint(format!("{}: tensor name is not UTF-8", path.display()))
        })?;
        let rows = input.read_u32::<LittleEndian>()? as usize;
        let cols = input.read_u32::<LittleEndian>()? as usize;
        let mut values = vec![0f64; rows * cols];
        input.read_f64_into::<LittleEndian>(&mut values)?;
        let tensor = Array2::from_shape_vec((rows, cols), values).map_err(|_| {
            Error::Checkpoint(format!("{}: tensor {name} has bad shape", path.display()))
        })?;
        params.add(&name, tensor);
    }
    Ok(params)
}
