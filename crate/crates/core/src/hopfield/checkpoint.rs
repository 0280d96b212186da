//! Binary checkpoint format.
//!
//! Little-endian: magic `HOPDEQ1\0`, `u32` version, `u8` variant
//! (0 = CHN, 1 = HAM), `u32` layer count `L`, `L` x `u32` layer sizes, then
//! the blocks `W_0 .. W_{L-2}` row-major as `f64`, then the biases `b_1 .. b_{L-1}`.
//! The nonlinearity is not stored; loaded models use the default.

use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};

use super::architecture::Architecture;
use super::params::{ModelParams, Variant};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"HOPDEQ1\0";
pub const VERSION: u32 = 1;

pub fn to_bytes(p: &ModelParams) -> Vec<u8> {
    let sizes = p.arch().layer_sizes();
    let mut out = Vec::with_capacity(8 + 4 + 1 + 4 + 4 * sizes.len() + 8 * p.num_parameters());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(p.variant.code());
    out.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
    for &n in sizes {
        out.extend_from_slice(&(n as u32).to_le_bytes());
    }
    for b in &p.blocks {
        // iter() on a standard-layout array is row-major
        for v in b.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    for b in &p.biases {
        for v in b.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| {
                Error::Checkpoint(format!(
                    "truncated while reading {what}: need {n} bytes at offset {}, file has {}",
                    self.pos,
                    self.bytes.len()
                ))
            })?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let len = n
            .checked_mul(8)
            .ok_or_else(|| Error::Checkpoint(format!("{what} too large")))?;
        Ok(self
            .take(len, what)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn from_bytes(bytes: &[u8]) -> Result<ModelParams> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(8, "magic")? != MAGIC {
        return Err(Error::Checkpoint("bad magic bytes".into()));
    }
    let version = r.u32("version")?;
    if version != VERSION {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let code = r.take(1, "variant")?[0];
    let variant = Variant::from_code(code)
        .ok_or_else(|| Error::Checkpoint(format!("unknown variant code {code}")))?;
    let num_layers = r.u32("layer count")? as usize;
    if !(2..=1 << 16).contains(&num_layers) {
        return Err(Error::Checkpoint(format!("implausible layer count {num_layers}")));
    }
    let sizes = (0..num_layers)
        .map(|_| r.u32("layer sizes").map(|v| v as usize))
        .collect::<Result<Vec<_>>>()?;
    let arch = Architecture::new(sizes.clone())
        .map_err(|e| Error::Checkpoint(format!("invalid architecture: {e}")))?;
    let mut blocks = Vec::with_capacity(num_layers - 1);
    for w in sizes.windows(2) {
        let data = r.f64s(w[1].saturating_mul(w[0]), "weight block")?;
        blocks.push(Array2::from_shape_vec((w[1], w[0]), data).expect("shape matches length"));
    }
    let mut biases = Vec::with_capacity(num_layers - 1);
    for &n in &sizes[1..] {
        biases.push(Array1::from_vec(r.f64s(n, "bias")?));
    }
    if r.pos != bytes.len() {
        return Err(Error::Checkpoint(format!(
            "{} trailing bytes after payload",
            bytes.len() - r.pos
        )));
    }
    ModelParams::new(arch, variant, blocks, biases)
}

pub fn save(p: &ModelParams, path: &Path) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(&to_bytes(p))?;
    f.sync_all()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<ModelParams> {
    from_bytes(&fs::read(path)?)
}
