use std::fs;
use std::path::Path;

use super::config::ModelConfig;
use super::model::LearnerState;
use crate::binio::{put_f32, put_u32, to_u32, Reader};
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &str = "XSL1";
pub const CHECKPOINT_VERSION: u32 = 1;
const WHAT: &str = "checkpoint";

/// Serialize parameters as a versioned tensor manifest plus f32 payload.
pub fn to_bytes(state: &LearnerState) -> Result<Vec<u8>> {
    let layout = state.layout();
    let mut out = Vec::with_capacity(64 + 4 * state.n_params());
    out.extend_from_slice(CHECKPOINT_MAGIC.as_bytes());
    put_u32(&mut out, CHECKPOINT_VERSION);
    put_u32(&mut out, to_u32(layout.len(), WHAT)?);
    for spec in &layout {
        put_u32(&mut out, to_u32(spec.name.len(), WHAT)?);
        out.extend_from_slice(spec.name.as_bytes());
        put_u32(&mut out, to_u32(spec.shape.len(), WHAT)?);
        for &d in &spec.shape {
            put_u32(&mut out, to_u32(d, WHAT)?);
        }
    }
    for &p in &state.params {
        put_f32(&mut out, p as f32);
    }
    Ok(out)
}

/// Parse a checkpoint, validating its manifest against `config`.
pub fn from_bytes(bytes: &[u8], config: &ModelConfig) -> Result<LearnerState> {
    let mut r = Reader::new(bytes, WHAT);
    r.magic(CHECKPOINT_MAGIC)?;
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::UnsupportedVersion { what: WHAT, version });
    }
    let expected = super::params::layout(config);
    let n_tensors = r.u32()? as usize;
    if n_tensors != expected.len() {
        return Err(Error::ConfigMismatch(format!(
            "checkpoint has {n_tensors} tensors, model expects {}",
            expected.len()
        )));
    }
    let mut total = 0usize;
    for spec in &expected {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.bytes(name_len)?).map_err(|e| Error::malformed(WHAT, e.to_string()))?;
        let ndim = r.u32()? as usize;
        let shape = (0..ndim).map(|_| r.u32().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        if name != spec.name || shape != spec.shape {
            return Err(Error::ConfigMismatch(format!(
                "checkpoint tensor {name} {shape:?} does not match {} {:?}",
                spec.name, spec.shape
            )));
        }
        total += spec.len();
    }
    r.expect_remaining(total * 4)?;
    let params = r.f32s(total)?.into_iter().map(f64::from).collect();
    r.finish()?;
    LearnerState::from_params(*config, params)
}

pub fn save(state: &LearnerState, path: &Path) -> Result<()> {
    fs::write(path, to_bytes(state)?)?;
    Ok(())
}

pub fn load(path: &Path, config: &ModelConfig) -> Result<LearnerState> {
    let bytes = fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingCheckpoint(path.to_path_buf()),
        _ => Error::Io(e),
    })?;
    from_bytes(&bytes, config)
}

/// Round parameters to the precision a checkpoint stores.
pub fn quantize(state: &LearnerState) -> LearnerState {
    let mut s = state.clone();
    s.params.iter_mut().for_each(|p| *p = f64::from(*p as f32));
    s
}
