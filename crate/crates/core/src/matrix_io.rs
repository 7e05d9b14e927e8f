//! Readout weight files.
//!
//! Binary: `b"ESNW"`, then `u32` version, rows and cols (little endian),
//! then the entries as row-major `f64` LE. CSV: a `rows,cols` line, then
//! one line per row.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"ESNW";
pub const VERSION: u32 = 1;

pub fn encode_blob(m: &DMatrix<f64>) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 8 * m.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(m.nrows() as u32).to_le_bytes());
    out.extend_from_slice(&(m.ncols() as u32).to_le_bytes());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.extend_from_slice(&m[(r, c)].to_le_bytes());
        }
    }
    out
}

pub fn decode_blob(bytes: &[u8]) -> Result<DMatrix<f64>> {
    if bytes.len() < 16 || &bytes[..4] != MAGIC {
        return Err(Error::Blob("missing ESNW header".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    let version = word(4);
    if version != VERSION {
        return Err(Error::Blob(format!("unsupported version {version}")));
    }
    let (rows, cols) = (word(8) as usize, word(12) as usize);
    let body = &bytes[16..];
    if body.len() != 8 * rows * cols {
        return Err(Error::Blob(format!(
            "{rows}×{cols} needs {} payload bytes, found {}",
            8 * rows * cols,
            body.len()
        )));
    }
    let vals = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap()));
    Ok(DMatrix::from_row_iterator(rows, cols, vals))
}

pub fn write_blob(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode_blob(m)).map_err(|e| Error::io(path, e))
}

pub fn read_blob(path: &Path) -> Result<DMatrix<f64>> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode_blob(&bytes)
}

pub fn write_csv(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    let mut text = format!("{},{}\n", m.nrows(), m.ncols());
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| m[(r, c)].to_string()).collect();
        text.push_str(&row.join(","));
        text.push('\n');
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn parse_csv(text: &str) -> Result<DMatrix<f64>> {
    let bad = |m: String| Error::Blob(m);
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let head = lines.next().ok_or_else(|| bad("empty weight CSV".into()))?;
    let dims: Vec<usize> = head
        .split(',')
        .map(|s| s.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| bad(format!("bad shape line `{head}`: {e}")))?;
    let [rows, cols] = dims[..] else {
        return Err(bad(format!("shape line `{head}` needs two fields")));
    };
    let mut data = Vec::with_capacity(rows * cols);
    for (r, line) in lines.enumerate() {
        let vals: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| bad(format!("row {r}: {e}")))?;
        if vals.len() != cols {
            return Err(bad(format!("row {r} has {} values, expected {cols}", vals.len())));
        }
        data.extend(vals);
    }
    if data.len() != rows * cols {
        return Err(bad(format!("expected {rows} rows, found {}", data.len() / cols.max(1))));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

pub fn read_csv(path: &Path) -> Result<DMatrix<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 3, &[1.0, -2.5, 3.25e-9, f64::MAX, 0.0, -0.1])
    }

    #[test]
    fn blob_layout() {
        let b = encode_blob(&sample());
        assert_eq!(&b[..4], b"ESNW");
        assert_eq!(&b[4..8], &1u32.to_le_bytes());
        assert_eq!(&b[8..12], &2u32.to_le_bytes());
        assert_eq!(&b[12..16], &3u32.to_le_bytes());
        // row-major: second entry is (0, 1)
        assert_eq!(&b[24..32], &(-2.5f64).to_le_bytes());
        assert_eq!(b.len(), 16 + 48);
    }

    #[test]
    fn corrupt_blobs_rejected() {
        let mut b = encode_blob(&sample());
        assert!(decode_blob(&b[..20]).is_err());
        b[4] = 9;
        assert!(decode_blob(&b).is_err());
        assert!(decode_blob(b"NOPE").is_err());
    }

    #[test]
    fn files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let m = sample();
        let bp = dir.path().join("w.bin");
        let cp = dir.path().join("w.csv");
        write_blob(&bp, &m).unwrap();
        write_csv(&cp, &m).unwrap();
        assert_eq!(read_blob(&bp).unwrap(), m);
        assert_eq!(read_csv(&cp).unwrap(), m);
        assert!(std::fs::read_to_string(&cp).unwrap().starts_with("2,3\n"));
    }

    #[test]
    fn csv_shape_mismatch_rejected() {
        assert!(parse_csv("2,2\n1,2\n3\n").is_err());
        assert!(parse_csv("2,2\n1,2\n").is_err());
        assert!(parse_csv("x\n").is_err());
    }

    proptest! {
        #[test]
        fn round_trip_bit_exact(rows in 0usize..6, cols in 0usize..6, seed in any::<u64>()) {
            let mut s = seed;
            let m = DMatrix::from_fn(rows, cols, |_, _| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                f64::from_bits(s >> 2) - 1.0
            });
            let back = decode_blob(&encode_blob(&m)).unwrap();
            prop_assert_eq!(back.shape(), m.shape());
            for (a, b) in back.iter().zip(m.iter()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
            let csv = {
                let mut t = format!("{rows},{cols}\n");
                for r in 0..rows {
                    let row: Vec<String> = (0..cols).map(|c| m[(r, c)].to_string()).collect();
                    t.push_str(&row.join(","));
                    t.push('\n');
                }
                t
            };
            if rows > 0 && cols > 0 {
                prop_assert_eq!(parse_csv(&csv).unwrap(), m);
            }
        }
    }
}
