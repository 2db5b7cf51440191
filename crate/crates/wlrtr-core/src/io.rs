//! Tensor serialization, text matrix loading, and per-band image export.
//!
//! Tensors travel in a tiny self-describing binary format:
//!
//! ```text
//! offset  size  field
//! 0       4     magic "HST1"
//! 4       4     rows,  u32 little-endian
//! 8       4     cols,  u32 little-endian
//! 12      4     bands, u32 little-endian
//! 16      1     dtype: 0 = f32, 1 = f64
//! 17      ...   payload, band-sequential row-major, little-endian
//! ```
//!
//! Files are written as f64; f32 payloads are widened on load.

use std::fs;
use std::path::{Path, PathBuf};

use crate::error::{Result, WlrtrError};
use crate::tensor::{Matrix, Tensor3};

const MAGIC: &[u8; 4] = b"HST1";
const HEADER_LEN: usize = 17;

/// Dtype codes of the tensor file format.
pub const DTYPE_F32: u8 = 0;
pub const DTYPE_F64: u8 = 1;

/// Write `t` as an f64 HST1 file.
pub fn save_tensor(path: impl AsRef<Path>, t: &Tensor3) -> Result<()> {
    let (rows, cols, bands) = t.dims();
    if rows > u32::MAX as usize || cols > u32::MAX as usize || bands > u32::MAX as usize {
        return Err(WlrtrError::DimOverflow);
    }
    let mut buf = Vec::with_capacity(HEADER_LEN + t.data().len() * 8);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(rows as u32).to_le_bytes());
    buf.extend_from_slice(&(cols as u32).to_le_bytes());
    buf.extend_from_slice(&(bands as u32).to_le_bytes());
    buf.push(DTYPE_F64);
    for v in t.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, buf)?;
    Ok(())
}

/// Read an HST1 file; f32 payloads are widened to f64.
pub fn load_tensor(path: impl AsRef<Path>) -> Result<Tensor3> {
    let buf = fs::read(path)?;
    if buf.len() < 4 || &buf[0..4] != MAGIC {
        return Err(WlrtrError::BadMagic);
    }
    if buf.len() < HEADER_LEN {
        return Err(WlrtrError::Truncated {
            expected: HEADER_LEN as u64,
            got: buf.len() as u64,
        });
    }
    let rows = u32::from_le_bytes(buf[4..8].try_into().unwrap()) as usize;
    let cols = u32::from_le_bytes(buf[8..12].try_into().unwrap()) as usize;
    let bands = u32::from_le_bytes(buf[12..16].try_into().unwrap()) as usize;
    let dtype = buf[16];
    decode_payload(&buf[HEADER_LEN..], rows, cols, bands, dtype)
}

/// Interpret a headerless band-sequential file with the stated dimensions;
/// the raw-import path for external datasets.
pub fn load_raw_tensor(
    path: impl AsRef<Path>,
    rows: usize,
    cols: usize,
    bands: usize,
    dtype: u8,
) -> Result<Tensor3> {
    let buf = fs::read(path)?;
    decode_payload(&buf, rows, cols, bands, dtype)
}

fn decode_payload(
    payload: &[u8],
    rows: usize,
    cols: usize,
    bands: usize,
    dtype: u8,
) -> Result<Tensor3> {
    let elem = match dtype {
        DTYPE_F32 => 4usize,
        DTYPE_F64 => 8usize,
        other => return Err(WlrtrError::UnsupportedDtype(other)),
    };
    if rows == 0 || cols == 0 || bands == 0 {
        return Err(WlrtrError::EmptyDimension { rows, cols, bands });
    }
    let count = rows
        .checked_mul(cols)
        .and_then(|v| v.checked_mul(bands))
        .ok_or(WlrtrError::DimOverflow)?;
    let expected = count.checked_mul(elem).ok_or(WlrtrError::DimOverflow)?;
    if payload.len() != expected {
        return Err(WlrtrError::Truncated {
            expected: expected as u64,
            got: payload.len() as u64,
        });
    }
    let data: Vec<f64> = match dtype {
        DTYPE_F32 => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect(),
        _ => payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect(),
    };
    Tensor3::from_vec(rows, cols, bands, data)
}

/// Export each band as a binary P5 portable graymap, values clamped to
/// [0, 255] and rounded. Returns the written paths.
pub fn export_band_images(t: &Tensor3, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    let (rows, cols, bands) = t.dims();
    let mut paths = Vec::with_capacity(bands);
    for b in 0..bands {
        let mut buf = format!("P5\n{} {}\n255\n", cols, rows).into_bytes();
        for i in 0..rows {
            for j in 0..cols {
                buf.push(t.get(i, j, b).round().clamp(0.0, 255.0) as u8);
            }
        }
        let path = dir.join(format!("band_{:03}.pgm", b));
        fs::write(&path, buf)?;
        paths.push(path);
    }
    Ok(paths)
}

/// Parse a whitespace-separated text matrix (one row per non-empty line).
pub fn load_matrix_text(path: impl AsRef<Path>) -> Result<Matrix> {
    let text = fs::read_to_string(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            line.split_whitespace().map(str::parse::<f64>).collect();
        let row = row.map_err(|e| {
            WlrtrError::InvalidConfig(format!("matrix line {}: {}", lineno + 1, e))
        })?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(WlrtrError::InvalidConfig("matrix file is empty".into()));
    }
    let cols = rows[0].len();
    if rows.iter().any(|r| r.len() != cols) {
        return Err(WlrtrError::InvalidConfig(
            "matrix rows have inconsistent lengths".into(),
        ));
    }
    let data: Vec<f64> = rows.into_iter().flatten().collect();
    Matrix::from_vec(data.len() / cols, cols, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.hst");
        let t = Tensor3::from_fn(5, 4, 3, |i, j, k| {
            (i as f64 + 0.125) * (j as f64 - 7.5) + k as f64 * 0.001
        });
        save_tensor(&path, &t).unwrap();
        let back = load_tensor(&path).unwrap();
        assert!(back
            .data()
            .iter()
            .zip(t.data().iter())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn file_size_is_header_plus_payload() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.hst");
        let t = Tensor3::from_vec(1, 1, 1, vec![3.5]).unwrap();
        save_tensor(&path, &t).unwrap();
        assert_eq!(fs::metadata(&path).unwrap().len(), 17 + 8);
    }

    #[test]
    fn truncated_file_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.hst");
        let t = Tensor3::from_fn(4, 4, 2, |i, j, k| (i + j + k) as f64);
        save_tensor(&path, &t).unwrap();
        let mut buf = fs::read(&path).unwrap();
        buf.truncate(buf.len() - 9);
        fs::write(&path, buf).unwrap();
        assert!(matches!(load_tensor(&path), Err(WlrtrError::Truncated { .. })));
    }

    #[test]
    fn bad_magic_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.hst");
        fs::write(&path, b"NOPE12345678901234567890").unwrap();
        assert!(matches!(load_tensor(&path), Err(WlrtrError::BadMagic)));
    }

    #[test]
    fn f32_payload_widens() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("f32.hst");
        let mut buf = Vec::new();
        buf.extend_from_slice(b"HST1");
        buf.extend_from_slice(&2u32.to_le_bytes());
        buf.extend_from_slice(&1u32.to_le_bytes());
        buf.extend_from_slice(&1u32.to_le_bytes());
        buf.push(DTYPE_F32);
        buf.extend_from_slice(&1.5f32.to_le_bytes());
        buf.extend_from_slice(&(-2.25f32).to_le_bytes());
        fs::write(&path, buf).unwrap();
        let t = load_tensor(&path).unwrap();
        assert_eq!(t.data(), &[1.5, -2.25]);
    }

    #[test]
    fn unknown_dtype_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("odd.hst");
        let mut buf = Vec::new();
        buf.extend_from_slice(b"HST1");
        buf.extend_from_slice(&1u32.to_le_bytes());
        buf.extend_from_slice(&1u32.to_le_bytes());
        buf.extend_from_slice(&1u32.to_le_bytes());
        buf.push(9);
        buf.extend_from_slice(&0u64.to_le_bytes());
        fs::write(&path, buf).unwrap();
        assert!(matches!(
            load_tensor(&path),
            Err(WlrtrError::UnsupportedDtype(9))
        ));
    }

    #[test]
    fn pgm_export_clamps_and_counts() {
        let dir = tempfile::tempdir().unwrap();
        let t = Tensor3::from_fn(2, 3, 2, |i, j, k| {
            if k == 0 {
                128.0
            } else {
                300.0 * i as f64 - 10.0 * j as f64
            }
        });
        let paths = export_band_images(&t, dir.path()).unwrap();
        assert_eq!(paths.len(), 2);
        let band0 = fs::read(&paths[0]).unwrap();
        let header = b"P5\n3 2\n255\n";
        assert_eq!(&band0[..header.len()], header);
        assert!(band0[header.len()..].iter().all(|&b| b == 128));
        let band1 = fs::read(&paths[1]).unwrap();
        let px = &band1[header.len()..];
        assert_eq!(px[0], 0); // -0 clamped
        assert_eq!(px[3], 255); // 300 clamped
    }

    #[test]
    fn matrix_text_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.txt");
        fs::write(&path, "0.1 0.2 0.1\n0.2 0.4 0.2\n# comment\n0.1 0.2 0.1\n").unwrap();
        let m = load_matrix_text(&path).unwrap();
        assert_eq!((m.rows(), m.cols()), (3, 3));
        assert_eq!(m.get(1, 1), 0.4);
    }

    #[test]
    fn ragged_matrix_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.txt");
        fs::write(&path, "1 2 3\n4 5\n").unwrap();
        assert!(load_matrix_text(&path).is_err());
    }
}
