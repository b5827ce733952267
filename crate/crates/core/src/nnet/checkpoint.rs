//! Model checkpoint file: a spec echo followed by the flat parameter
//! vector as little-endian f64.
//!
//! ```text
//! magic      4 bytes  "CMDL"
//! version    u32      1
//! arch       u32      0 = linear, 1 = mlp, 2 = cnn_small
//! hidden     u32 count + u32 sizes (mlp only)
//! ndim       u32 + u32 dims     input shape
//! classes    u32
//! init_seed  u64
//! params     u64 count + f64 values
//! ```

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use super::{init_model, Architecture, Model, ModelSpec};
use crate::{Error, Result};

const MAGIC: [u8; 4] = *b"CMDL";
const VERSION: u32 = 1;

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    let spec = model.spec();
    let mut buf = Vec::new();
    buf.extend_from_slice(&MAGIC);
    buf.extend_from_slice(&VERSION.to_le_bytes());
    match &spec.architecture {
        Architecture::Linear => buf.extend_from_slice(&0u32.to_le_bytes()),
        Architecture::Mlp { hidden } => {
            buf.extend_from_slice(&1u32.to_le_bytes());
            buf.extend_from_slice(&(hidden.len() as u32).to_le_bytes());
            for &h in hidden {
                buf.extend_from_slice(&(h as u32).to_le_bytes());
            }
        }
        Architecture::CnnSmall => buf.extend_from_slice(&2u32.to_le_bytes()),
    }
    buf.extend_from_slice(&(spec.input_shape.len() as u32).to_le_bytes());
    for &d in &spec.input_shape {
        buf.extend_from_slice(&(d as u32).to_le_bytes());
    }
    buf.extend_from_slice(&(spec.num_classes as u32).to_le_bytes());
    buf.extend_from_slice(&spec.init_seed.to_le_bytes());
    let params = model.params_flat();
    buf.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for p in params {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    fs::File::create(path)
        .and_then(|mut f| f.write_all(&buf))
        .map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<Model> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    let mut pos = 0usize;
    let take = |pos: &mut usize, n: usize| -> Result<&[u8]> {
        if *pos + n > bytes.len() {
            return Err(Error::format(path, "unexpected end of checkpoint"));
        }
        let out = &bytes[*pos..*pos + n];
        *pos += n;
        Ok(out)
    };
    let u32_at = |pos: &mut usize| -> Result<u32> {
        Ok(u32::from_le_bytes(take(pos, 4)?.try_into().unwrap()))
    };

    if take(&mut pos, 4)? != MAGIC {
        return Err(Error::format(path, "bad magic, not a model checkpoint"));
    }
    let version = u32_at(&mut pos)?;
    if version != VERSION {
        return Err(Error::format(path, format!("unsupported version {version}")));
    }
    let architecture = match u32_at(&mut pos)? {
        0 => Architecture::Linear,
        1 => {
            let count = u32_at(&mut pos)? as usize;
            let mut hidden = Vec::with_capacity(count);
            for _ in 0..count {
                hidden.push(u32_at(&mut pos)? as usize);
            }
            Architecture::Mlp { hidden }
        }
        2 => Architecture::CnnSmall,
        tag => return Err(Error::format(path, format!("unknown architecture tag {tag}"))),
    };
    let ndim = u32_at(&mut pos)? as usize;
    let mut input_shape = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        input_shape.push(u32_at(&mut pos)? as usize);
    }
    let num_classes = u32_at(&mut pos)? as usize;
    let init_seed = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap());
    let count = u64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()) as usize;
    let mut params = Vec::with_capacity(count);
    for _ in 0..count {
        params.push(f64::from_le_bytes(take(&mut pos, 8)?.try_into().unwrap()));
    }

    let spec = ModelSpec {
        architecture,
        input_shape,
        num_classes,
        init_seed,
    };
    let mut model = init_model(&spec)?;
    model
        .set_params_flat(&params)
        .map_err(|_| Error::format(path, "parameter count does not match spec"))?;
    Ok(model)
}
