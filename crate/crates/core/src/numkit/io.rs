//! Matrix files.
//!
//! `FMAT`: the four magic bytes `FMAT`, `u32` rows, `u32` cols (little endian),
//! then `rows * cols` little-endian `f64` values in row-major order.
//! CSV: one matrix row per line, comma separated reals.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::DenseMatrix;
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"FMAT";

pub fn write_matrix_fmat(path: impl AsRef<Path>, m: &DenseMatrix) -> Result<()> {
    let rows = u32::try_from(m.rows()).map_err(|_| Error::Format("too many rows".into()))?;
    let cols = u32::try_from(m.cols()).map_err(|_| Error::Format("too many cols".into()))?;
    let mut buf = Vec::with_capacity(12 + 8 * m.data().len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&rows.to_le_bytes());
    buf.extend_from_slice(&cols.to_le_bytes());
    for v in m.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf)?;
    Ok(())
}

pub fn parse_fmat(bytes: &[u8]) -> Result<DenseMatrix> {
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(Error::Format("missing FMAT header".into()));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = &bytes[12..];
    if body.len() != rows * cols * 8 {
        return Err(Error::Format(format!(
            "{rows}x{cols} matrix needs {} payload bytes, found {}",
            rows * cols * 8,
            body.len()
        )));
    }
    let data = body.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    DenseMatrix::from_vec(rows, cols, data)
}

pub fn read_matrix_fmat(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    parse_fmat(&fs::read(path)?)
}

pub fn parse_csv(text: &str) -> Result<DenseMatrix> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(',')
            .map(|t| {
                t.trim().parse::<f64>().map_err(|e| Error::Parse { line: i + 1, msg: e.to_string() })
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    DenseMatrix::from_rows(&rows).map_err(|e| Error::Format(e.to_string()))
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    parse_csv(&fs::read_to_string(path)?)
}

pub fn write_matrix_csv(path: impl AsRef<Path>, m: &DenseMatrix) -> Result<()> {
    let mut f = fs::File::create(path)?;
    for r in 0..m.rows() {
        let line: Vec<String> = m.row(r).iter().map(|v| format!("{v:?}")).collect();
        writeln!(f, "{}", line.join(","))?;
    }
    Ok(())
}

/// Reads either format, sniffing the `FMAT` magic.
pub fn read_matrix(path: impl AsRef<Path>) -> Result<DenseMatrix> {
    let bytes = fs::read(path)?;
    if bytes.starts_with(MAGIC) {
        parse_fmat(&bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))?;
        parse_csv(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkit::{glorot_init, Rng};

    #[test]
    fn fmat_layout_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.fmat");
        let m = DenseMatrix::from_rows(&[[1.0, 2.0, 3.0]]).unwrap();
        write_matrix_fmat(&path, &m).unwrap();
        let bytes = fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"FMAT");
        assert_eq!(&bytes[4..12], &[1, 0, 0, 0, 3, 0, 0, 0]);
        assert_eq!(&bytes[12..20], &1.0f64.to_le_bytes());
        assert_eq!(bytes.len(), 12 + 24);
    }

    #[test]
    fn both_formats_read_back() {
        let dir = tempfile::tempdir().unwrap();
        let m = glorot_init(3, 4, &mut Rng::new(5));
        write_matrix_fmat(dir.path().join("a"), &m).unwrap();
        write_matrix_csv(dir.path().join("b"), &m).unwrap();
        assert_eq!(read_matrix(dir.path().join("a")).unwrap(), m);
        assert_eq!(read_matrix(dir.path().join("b")).unwrap(), m);
    }

    #[test]
    fn truncated_fmat_rejected() {
        assert!(matches!(parse_fmat(b"FMAT\x01\0\0\0\x01\0\0\0"), Err(Error::Format(_))));
        assert!(parse_csv("1,2\n3").is_err());
    }
}
