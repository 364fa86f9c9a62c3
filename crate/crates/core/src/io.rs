//! The FIOF binary field format.
//!
//! Layout (little-endian): magic `FIOF`, `u32` version (= 1), `u32` n,
//! `u32` N, `f64` L, then `N^n` complex samples as interleaved `f64` pairs in
//! row-major order.

use crate::error::{Error, Result};
use crate::fourier::{GridField, GridSpec, C64};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"FIOF";
const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 + 4 + 8;

/// Raw FIOF payload: an `n`-dimensional cube of side `N` with period `L`.
///
/// Fields use `n` equal to the spatial dimension; tabulated symbols use
/// `2n`, with the `n` spatial axes first and the `n` frequency axes last.
#[derive(Clone, Debug, PartialEq)]
pub struct FiofArray {
    pub dim: u32,
    pub size: u32,
    pub period: f64,
    pub samples: Vec<C64>,
}

impl FiofArray {
    pub fn from_field(f: &GridField) -> Self {
        let s = f.spec();
        FiofArray { dim: s.dim() as u32, size: s.size() as u32, period: s.period(), samples: f.samples().to_vec() }
    }

    /// Interprets the payload as a field on its own grid.
    pub fn into_field(self) -> Result<GridField> {
        let spec = GridSpec::new(self.dim as usize, self.size as usize, self.period)?;
        GridField::new(spec, self.samples)
    }

    pub fn encode(&self, out: &mut impl Write) -> std::io::Result<()> {
        out.write_all(MAGIC)?;
        out.write_all(&VERSION.to_le_bytes())?;
        out.write_all(&self.dim.to_le_bytes())?;
        out.write_all(&self.size.to_le_bytes())?;
        out.write_all(&self.period.to_le_bytes())?;
        for z in &self.samples {
            out.write_all(&z.re.to_le_bytes())?;
            out.write_all(&z.im.to_le_bytes())?;
        }
        Ok(())
    }

    /// Decodes a payload; `origin` only labels error messages.
    pub fn decode(input: &mut impl Read, origin: &Path) -> Result<Self> {
        let mut header = [0u8; HEADER_LEN];
        input.read_exact(&mut header).map_err(|_| Error::format(origin, "truncated header"))?;
        if &header[0..4] != MAGIC {
            return Err(Error::format(origin, "bad magic bytes"));
        }
        let word = |i: usize| u32::from_le_bytes(header[i..i + 4].try_into().expect("4 bytes"));
        let version = word(4);
        if version != VERSION {
            return Err(Error::format(origin, format!("unsupported version {version}")));
        }
        let (dim, size) = (word(8), word(12));
        let period = f64::from_le_bytes(header[16..24].try_into().expect("8 bytes"));
        let count = (size as usize)
            .checked_pow(dim)
            .filter(|&c| c <= (1 << 31))
            .ok_or_else(|| Error::format(origin, format!("implausible shape n={dim}, N={size}")))?;
        let mut bytes = vec![0u8; count * 16];
        input.read_exact(&mut bytes).map_err(|_| Error::format(origin, "truncated sample block"))?;
        let mut rest = Vec::new();
        input.read_to_end(&mut rest).map_err(|e| Error::io(origin, e))?;
        if !rest.is_empty() {
            return Err(Error::format(origin, "trailing bytes after sample block"));
        }
        let samples = bytes
            .chunks_exact(16)
            .map(|c| {
                C64::new(
                    f64::from_le_bytes(c[0..8].try_into().expect("8 bytes")),
                    f64::from_le_bytes(c[8..16].try_into().expect("8 bytes")),
                )
            })
            .collect();
        Ok(FiofArray { dim, size, period, samples })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        FiofArray::decode(&mut BufReader::new(file), path)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.encode(&mut w).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
    }
}

/// Reads a field file.
pub fn read_field(path: &Path) -> Result<GridField> {
    FiofArray::read(path)?.into_field()
}

/// Writes a field file.
pub fn write_field(path: &Path, f: &GridField) -> Result<()> {
    FiofArray::from_field(f).write(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_through_bytes() {
        let g = GridSpec::new(2, 16, 2.5).unwrap();
        let f = GridField::from_fn(g, |x| C64::new(x[0].sin(), x[1] * 0.25));
        let mut buf = Vec::new();
        FiofArray::from_field(&f).encode(&mut buf).unwrap();
        assert_eq!(buf.len(), HEADER_LEN + 16 * 256);
        assert_eq!(&buf[0..4], b"FIOF");
        let back = FiofArray::decode(&mut buf.as_slice(), Path::new("mem")).unwrap().into_field().unwrap();
        assert_eq!(back, f);
    }

    #[test]
    fn rejects_corruption() {
        let g = GridSpec::new(1, 16, 1.0).unwrap();
        let mut buf = Vec::new();
        FiofArray::from_field(&GridField::zeros(g)).encode(&mut buf).unwrap();
        let p = Path::new("mem");
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(FiofArray::decode(&mut bad.as_slice(), p), Err(Error::Format { .. })));
        let mut bad = buf.clone();
        bad[4] = 2;
        assert!(matches!(FiofArray::decode(&mut bad.as_slice(), p), Err(Error::Format { .. })));
        assert!(FiofArray::decode(&mut &buf[..buf.len() - 1], p).is_err());
        let mut long = buf.clone();
        long.push(0);
        assert!(FiofArray::decode(&mut long.as_slice(), p).is_err());
    }

    #[test]
    fn file_round_trip_and_missing_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f.fiof");
        let g = GridSpec::new(2, 16, 1.0).unwrap();
        let f = GridField::from_fn(g, |x| C64::new(x[0], -x[1]));
        write_field(&path, &f).unwrap();
        assert_eq!(read_field(&path).unwrap(), f);
        assert!(matches!(read_field(&dir.path().join("none")), Err(Error::Io { .. })));
    }
}
