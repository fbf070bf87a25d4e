//! Binary checkpoint and text export.
//!
//! Binary layout, all integers and floats little-endian:
//!
//! ```text
//! magic "AEKM" | u32 version | u32 name length | activation name (UTF-8)
//! u32 layer count | u32 width per layer
//! f64 weights of every transition (row-major), then f64 biases of every transition
//! ```

use std::io::{Read, Write};

use super::{Activation, NetworkParams};
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"AEKM";

/// `tanh`, or `tanh/affine` when the reconstruction layer differs from the hidden layers.
fn activation_label(p: &NetworkParams) -> String {
    if p.output_activation() == p.activation() {
        p.activation().name().to_string()
    } else {
        format!("{}/{}", p.activation(), p.output_activation())
    }
}

fn parse_activation_label(label: &str) -> Result<(Activation, Activation)> {
    let parse = |s: &str| s.parse::<Activation>().map_err(|e| Error::Format(format!("{e}")));
    match label.split_once('/') {
        Some((hidden, output)) => Ok((parse(hidden)?, parse(output)?)),
        None => parse(label).map(|a| (a, a)),
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::Format(format!("checkpoint I/O: {e}"))
}

fn put_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes()).map_err(io_err)
}

fn get_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(io_err)?;
    Ok(u32::from_le_bytes(b))
}

fn get_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf).map_err(io_err)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect())
}

pub fn write_checkpoint<W: Write>(mut w: W, p: &NetworkParams) -> Result<()> {
    w.write_all(MAGIC).map_err(io_err)?;
    put_u32(&mut w, CHECKPOINT_VERSION)?;
    let label = activation_label(p);
    let name = label.as_bytes();
    put_u32(&mut w, name.len() as u32)?;
    w.write_all(name).map_err(io_err)?;
    put_u32(&mut w, p.dims().len() as u32)?;
    for &d in p.dims() {
        put_u32(&mut w, d as u32)?;
    }
    for block in p.weights.iter().chain(&p.biases) {
        let mut bytes = Vec::with_capacity(block.len() * 8);
        for v in block {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&bytes).map_err(io_err)?;
    }
    w.flush().map_err(io_err)
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<NetworkParams> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io_err)?;
    if &magic != MAGIC {
        return Err(Error::Format("not an autoencoder checkpoint (bad magic)".into()));
    }
    let version = get_u32(&mut r)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let name_len = get_u32(&mut r)? as usize;
    if name_len > 64 {
        return Err(Error::Format("activation name too long".into()));
    }
    let mut name = vec![0u8; name_len];
    r.read_exact(&mut name).map_err(io_err)?;
    let (activation, output_activation) = parse_activation_label(
        std::str::from_utf8(&name).map_err(|_| Error::Format("activation name is not UTF-8".into()))?,
    )?;
    let n_layers = get_u32(&mut r)? as usize;
    if n_layers > 1024 {
        return Err(Error::Format("implausible layer count".into()));
    }
    let dims = (0..n_layers)
        .map(|_| get_u32(&mut r).map(|d| d as usize))
        .collect::<Result<Vec<_>>>()?;
    super::validate_dims(&dims).map_err(|e| Error::Format(e.to_string()))?;
    let weights = (0..n_layers - 1)
        .map(|l| get_f64s(&mut r, dims[l] * dims[l + 1]))
        .collect::<Result<Vec<_>>>()?;
    let biases = (0..n_layers - 1)
        .map(|l| get_f64s(&mut r, dims[l + 1]))
        .collect::<Result<Vec<_>>>()?;
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing).map_err(io_err)? != 0 {
        return Err(Error::Format("trailing bytes after checkpoint".into()));
    }
    NetworkParams::from_parts(dims, activation, output_activation, weights, biases)
}

/// One value per line, each block introduced by a `[weights l rows x cols]` or `[biases l n]`
/// marker. Values use the shortest representation that reads back exactly.
pub fn write_text_export<W: Write>(mut w: W, p: &NetworkParams) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("# autoencoder checkpoint v{CHECKPOINT_VERSION}\n"));
    out.push_str(&format!("activation {}\n", activation_label(p)));
    let dims: Vec<String> = p.dims().iter().map(|d| d.to_string()).collect();
    out.push_str(&format!("dims {}\n", dims.join(" ")));
    for l in 0..p.n_transitions() {
        let (rows, cols) = p.weight_shape(l);
        out.push_str(&format!("[weights {l} {rows}x{cols}]\n"));
        for v in p.weights(l) {
            out.push_str(&format!("{v:?}\n"));
        }
    }
    for l in 0..p.n_transitions() {
        out.push_str(&format!("[biases {l} {}]\n", p.biases(l).len()));
        for v in p.biases(l) {
            out.push_str(&format!("{v:?}\n"));
        }
    }
    w.write_all(out.as_bytes()).map_err(io_err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_byte_identical() {
        let p = NetworkParams::init(&[5, 3, 2, 3, 5], Activation::Relu, 3).unwrap();
        let mut first = Vec::new();
        write_checkpoint(&mut first, &p).unwrap();
        let q = read_checkpoint(first.as_slice()).unwrap();
        assert_eq!(p, q);
        let mut second = Vec::new();
        write_checkpoint(&mut second, &q).unwrap();
        assert_eq!(first, second);
        // 4 + 4 + 4 + 4 + 4 + 5*4 header bytes, then 15+6+6+15 weights and 3+2+3+5 biases.
        assert_eq!(first.len(), 40 + 8 * (42 + 13));
    }

    #[test]
    fn mixed_activations_round_trip() {
        let p = NetworkParams::init(&[4, 2, 4], Activation::Tanh, 3)
            .unwrap()
            .with_output_activation(Activation::Affine);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &p).unwrap();
        assert_eq!(&buf[12..23], b"tanh/affine");
        assert_eq!(read_checkpoint(buf.as_slice()).unwrap(), p);
    }

    #[test]
    fn truncated_or_corrupt_files_rejected() {
        let p = NetworkParams::init(&[4, 2, 4], Activation::Tanh, 3).unwrap();
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, &p).unwrap();
        assert!(read_checkpoint(&buf[..buf.len() - 1]).is_err());
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_checkpoint(bad.as_slice()).is_err());
        let mut long = buf.clone();
        long.push(0);
        assert!(read_checkpoint(long.as_slice()).is_err());
    }

    #[test]
    fn text_export_has_markers() {
        let p = NetworkParams::init(&[4, 2, 4], Activation::Tanh, 3).unwrap();
        let mut buf = Vec::new();
        write_text_export(&mut buf, &p).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("activation tanh\ndims 4 2 4\n[weights 0 2x4]\n"));
        assert!(text.contains("[biases 1 4]"));
        assert_eq!(text.lines().count(), 3 + 2 + 8 + 8 + 2 + 2 + 4);
    }
}
