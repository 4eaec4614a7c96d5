//! Binary checkpoint of the online network.
//!
//! Layout, all integers and floats little-endian:
//! `"CXFLOW1"`, `u32` direction count J, `u32` layer count L, `L + 1` `u32`
//! widths, then per layer the weight matrix (`out × in`, row-major) followed
//! by the bias vector as `f64`.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::{Array1, Array2};

use super::network::{Dense, Mlp};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 7] = b"CXFLOW1";

pub fn write_checkpoint(w: &mut impl Write, directions: u32, net: &Mlp) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&directions.to_le_bytes())?;
    w.write_all(&(net.layers.len() as u32).to_le_bytes())?;
    for d in net.dims() {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    for layer in &net.layers {
        for x in layer.w.iter().chain(layer.b.iter()) {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|_| Error::Checkpoint("truncated header".into()))?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    r.read_exact(&mut buf).map_err(|_| Error::Checkpoint("truncated parameters".into()))?;
    Ok(buf.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}

/// Returns the direction count and network.
pub fn read_checkpoint(r: &mut impl Read) -> Result<(u32, Mlp)> {
    let mut magic = [0u8; 7];
    r.read_exact(&mut magic).map_err(|_| Error::Checkpoint("file too short".into()))?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic".into()));
    }
    let directions = read_u32(r)?;
    let layers = read_u32(r)? as usize;
    if layers == 0 || layers > 64 {
        return Err(Error::Checkpoint(format!("implausible layer count {layers}")));
    }
    let dims: Vec<usize> = (0..=layers).map(|_| read_u32(r).map(|d| d as usize)).collect::<Result<_>>()?;
    let mut out = Vec::with_capacity(layers);
    for d in dims.windows(2) {
        let w = read_f64s(r, d[0] * d[1])?;
        let b = read_f64s(r, d[1])?;
        out.push(Dense {
            w: Array2::from_shape_vec((d[1], d[0]), w).map_err(|e| Error::Checkpoint(e.to_string()))?,
            b: Array1::from(b),
        });
    }
    let mut rest = Vec::new();
    r.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", rest.len())));
    }
    Ok((directions, Mlp { layers: out }))
}

pub fn save(path: &Path, directions: u32, net: &Mlp) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_checkpoint(&mut f, directions, net)?;
    f.flush()?;
    Ok(())
}

pub fn load(path: &Path) -> Result<(u32, Mlp)> {
    let mut f = std::io::BufReader::new(std::fs::File::open(path).map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?);
    read_checkpoint(&mut f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{substream, Substream};

    #[test]
    fn roundtrip_is_exact() {
        let net = Mlp::new(&[5, 7, 2], &mut substream(3, Substream::NetInit));
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, 8, &net).unwrap();
        assert_eq!(&buf[..7], b"CXFLOW1");
        assert_eq!(buf.len(), 7 + 4 + 4 + 3 * 4 + 8 * (5 * 7 + 7 + 7 * 2 + 2));
        let (j, back) = read_checkpoint(&mut buf.as_slice()).unwrap();
        assert_eq!(j, 8);
        assert_eq!(back, net);
    }

    #[test]
    fn corrupt_inputs_are_rejected() {
        assert!(read_checkpoint(&mut &b"NOTCXF1...."[..]).is_err());
        let net = Mlp::zeros(&[2, 2]);
        let mut buf = Vec::new();
        write_checkpoint(&mut buf, 8, &net).unwrap();
        buf.pop();
        assert!(read_checkpoint(&mut buf.as_slice()).is_err());
    }
}
