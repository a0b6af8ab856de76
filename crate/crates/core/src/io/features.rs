//! `PADF` container: `b"PADF"`, then little-endian `u32` version, rows and
//! cols, then `rows * cols` little-endian `f32` values in row-major order.

use std::path::Path;

use crate::scalar::Real;

use super::TrialIoError;

pub const PADF_MAGIC: &[u8; 4] = b"PADF";
pub const PADF_VERSION: u32 = 1;
const HEADER_LEN: usize = 16;

/// Provenance of an extracted matrix. Kept in memory only; not serialized.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureMeta {
    pub frontend: String,
    pub config_hash: u64,
}

/// `rows` frames by `cols` dimensions, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
    pub meta: Option<FeatureMeta>,
}

impl<T: Real> FeatureMatrix<T> {
    pub fn new(rows: usize, cols: usize, data: Vec<T>) -> Result<Self, TrialIoError> {
        if rows == 0 || cols == 0 {
            return Err(TrialIoError::InvalidMatrix(format!("empty shape {rows}x{cols}")));
        }
        let expected = rows.checked_mul(cols).ok_or(TrialIoError::DimensionOverflow)?;
        if data.len() != expected {
            return Err(TrialIoError::InvalidMatrix(format!(
                "{} values for shape {rows}x{cols}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(TrialIoError::InvalidMatrix(format!(
                "non-finite value at row {}, col {}",
                pos / cols,
                pos % cols
            )));
        }
        Ok(Self {
            rows,
            cols,
            data,
            meta: None,
        })
    }

    /// Builds a matrix from equally sized rows.
    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self, TrialIoError> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(TrialIoError::InvalidMatrix("ragged rows".into()));
        }
        Self::new(rows.len(), cols, rows.concat())
    }

    pub fn with_meta(mut self, meta: FeatureMeta) -> Self {
        self.meta = Some(meta);
        self
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, n: usize) -> &[T] {
        &self.data[n * self.cols..(n + 1) * self.cols]
    }

    pub fn iter_rows(&self) -> std::slice::ChunksExact<'_, T> {
        self.data.chunks_exact(self.cols)
    }

    pub fn get(&self, row: usize, col: usize) -> T {
        self.data[row * self.cols + col]
    }

    /// Stacks matrices with equal column counts.
    pub fn concat(parts: &[&FeatureMatrix<T>]) -> Result<Self, TrialIoError> {
        let first = parts
            .first()
            .ok_or_else(|| TrialIoError::InvalidMatrix("nothing to concatenate".into()))?;
        if parts.iter().any(|p| p.cols != first.cols) {
            return Err(TrialIoError::InvalidMatrix("column counts differ".into()));
        }
        let rows = parts.iter().map(|p| p.rows).sum();
        let mut data = Vec::with_capacity(rows * first.cols);
        for p in parts {
            data.extend_from_slice(&p.data);
        }
        Ok(Self {
            rows,
            cols: first.cols,
            data,
            meta: None,
        })
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, TrialIoError> {
        let rows = u32::try_from(self.rows).map_err(|_| TrialIoError::DimensionOverflow)?;
        let cols = u32::try_from(self.cols).map_err(|_| TrialIoError::DimensionOverflow)?;
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.data.len());
        out.extend_from_slice(PADF_MAGIC);
        out.extend_from_slice(&PADF_VERSION.to_le_bytes());
        out.extend_from_slice(&rows.to_le_bytes());
        out.extend_from_slice(&cols.to_le_bytes());
        for v in &self.data {
            let x = v
                .to_f32()
                .ok_or_else(|| TrialIoError::InvalidMatrix("value not representable as f32".into()))?;
            out.extend_from_slice(&x.to_le_bytes());
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, TrialIoError> {
        if bytes.len() < 4 {
            return Err(TrialIoError::TruncatedFile {
                expected: HEADER_LEN as u64,
                actual: bytes.len() as u64,
            });
        }
        if &bytes[..4] != PADF_MAGIC {
            return Err(TrialIoError::BadMagic);
        }
        if bytes.len() < HEADER_LEN {
            return Err(TrialIoError::TruncatedFile {
                expected: HEADER_LEN as u64,
                actual: bytes.len() as u64,
            });
        }
        let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().expect("4-byte slice"));
        let version = word(4);
        if version != PADF_VERSION {
            return Err(TrialIoError::UnsupportedVersion(version));
        }
        let rows = word(8) as usize;
        let cols = word(12) as usize;
        let count = rows.checked_mul(cols).ok_or(TrialIoError::DimensionOverflow)?;
        let payload = count
            .checked_mul(4)
            .and_then(|p| p.checked_add(HEADER_LEN))
            .ok_or(TrialIoError::DimensionOverflow)?;
        if bytes.len() < payload {
            return Err(TrialIoError::TruncatedFile {
                expected: payload as u64,
                actual: bytes.len() as u64,
            });
        }
        if bytes.len() > payload {
            return Err(TrialIoError::TrailingData((bytes.len() - payload) as u64));
        }
        let data = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| {
                let x = f32::from_le_bytes(c.try_into().expect("4-byte chunk"));
                T::from_f32(x).expect("f32 converts to scalar")
            })
            .collect();
        Self::new(rows, cols, data)
    }
}

pub fn write_features<T: Real>(path: impl AsRef<Path>, m: &FeatureMatrix<T>) -> Result<(), TrialIoError> {
    let path = path.as_ref();
    std::fs::write(path, m.to_bytes()?).map_err(|e| TrialIoError::io(path, e))
}

pub fn read_features<T: Real>(path: impl AsRef<Path>) -> Result<FeatureMatrix<T>, TrialIoError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| TrialIoError::io(path, e))?;
    FeatureMatrix::from_bytes(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn one_by_one_is_twenty_bytes() {
        let m = FeatureMatrix::new(1, 1, vec![0.0_f64]).unwrap();
        let b = m.to_bytes().unwrap();
        assert_eq!(b.len(), 20);
        assert_eq!(&b[..4], b"PADF");
        assert_eq!(&b[4..8], &1u32.to_le_bytes());
        assert_eq!(&b[8..12], &1u32.to_le_bytes());
        assert_eq!(&b[12..16], &1u32.to_le_bytes());
        assert_eq!(&b[16..], &0.0f32.to_le_bytes());
    }

    #[test]
    fn file_roundtrip_three_by_sixty() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let data: Vec<f32> = (0..180).map(|_| rng.gen_range(-50.0..50.0)).collect();
        let m = FeatureMatrix::new(3, 60, data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.padf");
        write_features(&p, &m).unwrap();
        let back: FeatureMatrix<f32> = read_features(&p).unwrap();
        assert_eq!(back.rows(), 3);
        assert_eq!(back.cols(), 60);
        for (a, b) in back.data().iter().zip(m.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn malformed_files() {
        let m = FeatureMatrix::new(2, 3, vec![1.0_f64; 6]).unwrap();
        let mut b = m.to_bytes().unwrap();
        b.truncate(b.len() - 1);
        assert!(matches!(
            FeatureMatrix::<f64>::from_bytes(&b),
            Err(TrialIoError::TruncatedFile {
                expected: 40,
                actual: 39
            })
        ));
        assert!(matches!(
            FeatureMatrix::<f64>::from_bytes(&b[..10]),
            Err(TrialIoError::TruncatedFile { .. })
        ));
        let mut bad = m.to_bytes().unwrap();
        bad[0] = b'X';
        assert!(matches!(
            FeatureMatrix::<f64>::from_bytes(&bad),
            Err(TrialIoError::BadMagic)
        ));
        let mut long = m.to_bytes().unwrap();
        long.push(0);
        assert!(matches!(
            FeatureMatrix::<f64>::from_bytes(&long),
            Err(TrialIoError::TrailingData(1))
        ));
        let mut v2 = m.to_bytes().unwrap();
        v2[4] = 2;
        assert!(matches!(
            FeatureMatrix::<f64>::from_bytes(&v2),
            Err(TrialIoError::UnsupportedVersion(2))
        ));
    }

    #[test]
    fn huge_declared_shape_overflows_or_truncates() {
        let mut b = Vec::new();
        b.extend_from_slice(b"PADF");
        b.extend_from_slice(&1u32.to_le_bytes());
        b.extend_from_slice(&u32::MAX.to_le_bytes());
        b.extend_from_slice(&u32::MAX.to_le_bytes());
        let err = FeatureMatrix::<f32>::from_bytes(&b).unwrap_err();
        assert!(matches!(
            err,
            TrialIoError::DimensionOverflow | TrialIoError::TruncatedFile { .. }
        ));
    }

    #[test]
    fn constructor_validates_shape_and_values() {
        assert!(FeatureMatrix::<f64>::new(0, 3, vec![]).is_err());
        assert!(FeatureMatrix::<f64>::new(1, 2, vec![1.0]).is_err());
        assert!(FeatureMatrix::<f64>::new(1, 2, vec![1.0, f64::NAN]).is_err());
        assert!(FeatureMatrix::from_rows(&[vec![1.0_f64], vec![1.0, 2.0]]).is_err());
    }

    proptest! {
        #[test]
        fn bytes_roundtrip_is_exact_at_f32(
            (rows, cols, data) in (1usize..8, 1usize..8).prop_flat_map(|(r, c)| {
                (Just(r), Just(c), proptest::collection::vec(-1e30f32..1e30, r * c))
            })
        ) {
            let m = FeatureMatrix::new(rows, cols, data).unwrap();
            let back = FeatureMatrix::<f32>::from_bytes(&m.to_bytes().unwrap()).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
