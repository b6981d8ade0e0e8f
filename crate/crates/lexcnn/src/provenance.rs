//! Provenance headers for output files.
//!
//! Every artifact the tools write starts with `#`-prefixed comment lines
//! naming the tool version, the effective configuration and digests of the
//! input files, so results can always be traced back to what produced them.
//! Nothing time-dependent goes into the header: identical invocations on
//! identical inputs must produce byte-identical files.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

pub const TOOL_NAME: &str = "lexcnn";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// FNV-1a 64-bit hash.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// FNV-1a 64 digest of a file's contents, as `fnv1a64:<hex>`.
pub fn file_digest(path: &Path) -> Result<String> {
    let bytes =
        std::fs::read(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(format!("fnv1a64:{:016x}", fnv1a64(&bytes)))
}

/// One named input for the provenance header.
#[derive(Debug, Clone)]
pub struct InputRef {
    pub name: String,
    pub path: String,
    pub digest: String,
}

impl InputRef {
    pub fn from_file(name: &str, path: &Path) -> Result<Self> {
        Ok(InputRef {
            name: name.to_string(),
            path: path.display().to_string(),
            digest: file_digest(path)?,
        })
    }
}

/// Renders the standard header block. `config` lines are `key = value`
/// pairs already formatted by the caller.
pub fn header(config: &[(String, String)], inputs: &[InputRef]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# tool = {} {}", TOOL_NAME, TOOL_VERSION);
    for (k, v) in config {
        let _ = writeln!(out, "# config.{k} = {v}");
    }
    for i in inputs {
        let _ = writeln!(out, "# input.{} = {} {}", i.name, i.path, i.digest);
    }
    out
}
