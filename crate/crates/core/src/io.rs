//! On-disk matrix format and CSV ingestion.
//!
//! An MSC1 file is the 4-byte magic `MSC1`, the row and column counts as
//! little-endian `u64`, then `rows * cols` little-endian `f64` values in
//! column-major order. Nothing else: no padding, no trailer.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::tensor::Matrix;

pub const MAGIC: &[u8; 4] = b"MSC1";
const HEADER_LEN: usize = 4 + 8 + 8;

/// Serializes a matrix to MSC1 bytes.
pub fn encode_matrix(m: &Matrix) -> Result<Vec<u8>> {
    if m.rows() == 0 || m.cols() == 0 {
        return Err(Error::Argument(format!(
            "cannot save degenerate {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    let mut buf = Vec::with_capacity(HEADER_LEN + 8 * m.data().len());
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    buf.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for v in m.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    Ok(buf)
}

/// Parses MSC1 bytes. `path` is only used in error messages.
pub fn decode_matrix(bytes: &[u8], path: &Path) -> Result<Matrix> {
    let fail = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    if bytes.len() < HEADER_LEN {
        return Err(fail(format!("truncated header ({} bytes)", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(fail(format!("bad magic {:?}", &bytes[..4])));
    }
    let rows = u64::from_le_bytes(bytes[4..12].try_into().unwrap());
    let cols = u64::from_le_bytes(bytes[12..20].try_into().unwrap());
    if rows == 0 || cols == 0 {
        return Err(fail(format!("degenerate dimensions {rows}x{cols}")));
    }
    let count = rows
        .checked_mul(cols)
        .and_then(|c| c.checked_mul(8))
        .and_then(|b| usize::try_from(b).ok())
        .ok_or_else(|| fail(format!("dimensions {rows}x{cols} overflow")))?;
    let payload = &bytes[HEADER_LEN..];
    if payload.len() < count {
        return Err(fail(format!(
            "truncated payload: {} of {count} bytes",
            payload.len()
        )));
    }
    if payload.len() > count {
        return Err(fail(format!(
            "{} trailing bytes after payload",
            payload.len() - count
        )));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Matrix::from_col_major(rows as usize, cols as usize, data).map_err(|e| fail(e.to_string()))
}

pub fn save_matrix(m: &Matrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_matrix(m)?;
    let mut f = fs::File::create(path)
        .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    f.write_all(&bytes)
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let bytes =
        fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    decode_matrix(&bytes, path)
}

/// Reads comma-separated decimal rows; each line becomes one matrix row.
/// Blank lines are skipped.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)
        .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    parse_csv(&text, path)
}

pub fn parse_csv(text: &str, path: &Path) -> Result<Matrix> {
    let fail = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    let mut cols = None;
    let mut rows = 0;
    let mut values = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let before = values.len();
        for field in line.split(',') {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| fail(format!("line {}: bad number {field:?}", lineno + 1)))?;
            values.push(v);
        }
        let width = values.len() - before;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(fail(format!(
                    "line {}: {width} fields, expected {c}",
                    lineno + 1
                )))
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| fail("no data rows".into()))?;
    Matrix::from_row_major(rows, cols, &values).map_err(|e| fail(e.to_string()))
}

/// Loads a data matrix with examples as columns.
///
/// `.csv` files hold one example per line and are transposed on ingest;
/// anything else is read as MSC1 with examples already in columns.
pub fn load_examples(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    if is_csv {
        Ok(load_csv(path)?.transpose())
    } else {
        load_matrix(path)
    }
}

/// `stem` with `.suffix` appended, keeping any dots already in the stem.
pub fn with_suffix(stem: &Path, suffix: &str) -> PathBuf {
    let mut s = stem.as_os_str().to_owned();
    s.push(".");
    s.push(suffix);
    PathBuf::from(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn round_trip_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.msc");
        let m = Matrix::from_row_major(2, 3, &[1.0, -0.0, 3.5, 1e-300, 2.0, -7.25]).unwrap();
        save_matrix(&m, &path).unwrap();
        let back = load_matrix(&path).unwrap();
        assert_eq!(back.shape(), (2, 3));
        let bits = |m: &Matrix| m.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&back), bits(&m));
    }

    #[test]
    fn layout_is_exact() {
        let m = Matrix::from_row_major(1, 2, &[1.0, 2.0]).unwrap();
        let bytes = encode_matrix(&m).unwrap();
        assert_eq!(&bytes[..4], b"MSC1");
        assert_eq!(&bytes[4..12], &1u64.to_le_bytes());
        assert_eq!(&bytes[12..20], &2u64.to_le_bytes());
        assert_eq!(&bytes[20..28], &1.0f64.to_le_bytes());
        assert_eq!(&bytes[28..36], &2.0f64.to_le_bytes());
        assert_eq!(bytes.len(), 36);
    }

    #[test]
    fn wrong_magic() {
        let m = Matrix::from_row_major(1, 1, &[1.0]).unwrap();
        let mut bytes = encode_matrix(&m).unwrap();
        bytes[0] = b'X';
        assert!(matches!(
            decode_matrix(&bytes, Path::new("x")),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn truncated_and_overflowing() {
        let m = Matrix::from_row_major(2, 2, &[1.0, 2.0, 3.0, 4.0]).unwrap();
        let bytes = encode_matrix(&m).unwrap();
        assert!(decode_matrix(&bytes[..bytes.len() - 1], Path::new("x")).is_err());
        assert!(decode_matrix(&bytes[..10], Path::new("x")).is_err());

        let mut huge = Vec::from(&MAGIC[..]);
        huge.extend_from_slice(&u64::MAX.to_le_bytes());
        huge.extend_from_slice(&3u64.to_le_bytes());
        assert!(matches!(
            decode_matrix(&huge, Path::new("x")),
            Err(Error::Format { .. })
        ));
    }

    #[test]
    fn zero_rows_rejected_at_save() {
        let m = Matrix::zeros(0, 3);
        assert!(matches!(encode_matrix(&m), Err(Error::Argument(_))));
    }

    #[test]
    fn csv_rows() {
        let m = parse_csv("1, 2,3\n\n4,5,6\n", Path::new("x")).unwrap();
        assert_eq!(m.shape(), (2, 3));
        assert_eq!(m.get(1, 0), 4.0);
        assert!(parse_csv("1,2\n3\n", Path::new("x")).is_err());
        assert!(parse_csv("1,a\n", Path::new("x")).is_err());
    }

    proptest! {
        #[test]
        fn encode_decode_bit_exact(rows in 1usize..5, cols in 1usize..5, seed in proptest::collection::vec(-1e6f64..1e6, 16)) {
            let data: Vec<f64> = (0..rows * cols).map(|i| seed[i % seed.len()] * (i as f64 + 0.5)).collect();
            let m = Matrix::from_col_major(rows, cols, data).unwrap();
            let back = decode_matrix(&encode_matrix(&m).unwrap(), Path::new("x")).unwrap();
            prop_assert_eq!(back.shape(), m.shape());
            for (a, b) in back.data().iter().zip(m.data()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
