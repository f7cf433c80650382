//! Binary state files used for checkpoints.
//!
//! Layout (little endian): magic `MPS1`, format version `u32`, then a header of
//! model name (`u32` length + UTF-8 bytes), chain length, local dimension, max
//! bond, seed (`u64` each) and the orthogonality center (`u64::MAX` if none).
//! Each site follows as three `u64` dimensions and its row-major entries as
//! `(re, im)` pairs of `f64`.

use std::io::{Read, Write};

use num_complex::Complex64 as C64;

use super::MatrixProductState;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

const MAGIC: &[u8; 4] = b"MPS1";
pub const FORMAT_VERSION: u32 = 1;

/// Header fields stored next to the tensors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct StateHeader {
    pub model: String,
    pub seed: u64,
}

pub fn write_state<W: Write>(out: &mut W, psi: &MatrixProductState, header: &StateHeader) -> Result<()> {
    out.write_all(MAGIC)?;
    out.write_all(&FORMAT_VERSION.to_le_bytes())?;
    let name = header.model.as_bytes();
    out.write_all(&(name.len() as u32).to_le_bytes())?;
    out.write_all(name)?;
    for v in [
        psi.len() as u64,
        psi.local_dim() as u64,
        psi.max_bond() as u64,
        header.seed,
        psi.center().map_or(u64::MAX, |c| c as u64),
    ] {
        out.write_all(&v.to_le_bytes())?;
    }
    for t in psi.tensors() {
        for &dim in t.shape() {
            out.write_all(&(dim as u64).to_le_bytes())?;
        }
        for z in t.data() {
            out.write_all(&z.re.to_le_bytes())?;
            out.write_all(&z.im.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    Ok(f64::from_bits(read_u64(r)?))
}

fn truncated(e: std::io::Error) -> Error {
    Error::Decode(format!("truncated state file: {e}"))
}

fn read_dim<R: Read>(r: &mut R, what: &str) -> Result<usize> {
    let v = read_u64(r)?;
    usize::try_from(v)
        .ok()
        .filter(|&x| x < (1 << 32))
        .ok_or_else(|| Error::Decode(format!("implausible {what} {v}")))
}

pub fn read_state<R: Read>(input: &mut R) -> Result<(MatrixProductState, StateHeader)> {
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic).map_err(truncated)?;
    if &magic != MAGIC {
        return Err(Error::Decode("not an MPS state file".into()));
    }
    let version = read_u32(input)?;
    if version != FORMAT_VERSION {
        return Err(Error::Decode(format!("unsupported format version {version}")));
    }
    let name_len = read_u32(input)? as usize;
    if name_len > 256 {
        return Err(Error::Decode(format!("model name of {name_len} bytes")));
    }
    let mut name = vec![0u8; name_len];
    input.read_exact(&mut name).map_err(truncated)?;
    let model = String::from_utf8(name).map_err(|e| Error::Decode(e.to_string()))?;
    let length = read_dim(input, "length")?;
    let local_dim = read_dim(input, "local dimension")?;
    let max_bond = read_dim(input, "bond dimension")?;
    let seed = read_u64(input)?;
    let center = read_u64(input)?;

    let mut tensors = Vec::with_capacity(length);
    for _ in 0..length {
        let shape = [
            read_dim(input, "bond")?,
            read_dim(input, "physical dimension")?,
            read_dim(input, "bond")?,
        ];
        let n = shape[0]
            .checked_mul(shape[1])
            .and_then(|x| x.checked_mul(shape[2]))
            .filter(|&n| n <= 1 << 28)
            .ok_or_else(|| Error::Decode(format!("site shape {shape:?} too large")))?;
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            let re = read_f64(input)?;
            let im = read_f64(input)?;
            data.push(C64::new(re, im));
        }
        tensors.push(Tensor::from_vec(&shape, data));
    }
    let mut psi = MatrixProductState::from_tensors(tensors).map_err(|e| Error::Decode(e.to_string()))?;
    if psi.local_dim() != local_dim || psi.max_bond() != max_bond {
        return Err(Error::Decode("header disagrees with site tensors".into()));
    }
    if center != u64::MAX {
        let c = center as usize;
        if c >= length {
            return Err(Error::Decode(format!("center {c} outside chain")));
        }
        psi.center = Some(c);
    }
    Ok((psi, StateHeader { model, seed }))
}

pub fn save_state(path: &std::path::Path, psi: &MatrixProductState, header: &StateHeader) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })?;
    let mut w = std::io::BufWriter::new(file);
    write_state(&mut w, psi, header)?;
    w.flush()?;
    Ok(())
}

pub fn load_state(path: &std::path::Path) -> Result<(MatrixProductState, StateHeader)> {
    let file = std::fs::File::open(path).map_err(|source| Error::File {
        path: path.to_path_buf(),
        source,
    })?;
    read_state(&mut std::io::BufReader::new(file))
}
