//! `PADG` model container: `b"PADG"`, little-endian `u32` version and record
//! type, then a record body. All real values are little-endian `f64`.
//!
//! Record 1, GMM pair: `D`, then for bona fide and spoof in turn `M`,
//! `M` weights, `M * D` means and `M * D` variances.
//!
//! Record 2, Mahalanobis model: `D`, pooling (`0` mean, `1` mean+std), then
//! for bona fide and spoof in turn a `D` mean and a `D * D` covariance.

use std::path::Path;

use thiserror::Error;

use crate::distance::{ClassGaussian, MdistModel, PoolingMode};
use crate::gmm::{Gmm, GmmPair};
use crate::scalar::Real;

pub const PADG_MAGIC: &[u8; 4] = b"PADG";
pub const PADG_VERSION: u32 = 1;
const RECORD_GMM_PAIR: u32 = 1;
const RECORD_MDIST: u32 = 2;

#[derive(Debug, Error)]
pub enum ModelFileError {
    #[error("cannot access {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("not a PADG model file")]
    BadMagic,
    #[error("unsupported PADG version {0}")]
    UnsupportedVersion(u32),
    #[error("unknown PADG record type {0}")]
    UnknownRecord(u32),
    #[error("model file truncated")]
    Truncated,
    #[error("{0} trailing bytes after model record")]
    TrailingData(usize),
    #[error("invalid model: {0}")]
    Invalid(String),
    #[error("model holds a {found} record, expected {expected}")]
    WrongRecord {
        expected: &'static str,
        found: &'static str,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ModelFile<T> {
    Gmm(GmmPair<T>),
    Mdist(MdistModel<T>),
}

impl<T: Real> ModelFile<T> {
    fn kind(&self) -> &'static str {
        match self {
            ModelFile::Gmm(_) => "GMM",
            ModelFile::Mdist(_) => "Mahalanobis",
        }
    }

    pub fn into_gmm(self) -> Result<GmmPair<T>, ModelFileError> {
        match self {
            ModelFile::Gmm(p) => Ok(p),
            other => Err(ModelFileError::WrongRecord {
                expected: "GMM",
                found: other.kind(),
            }),
        }
    }

    pub fn into_mdist(self) -> Result<MdistModel<T>, ModelFileError> {
        match self {
            ModelFile::Mdist(m) => Ok(m),
            other => Err(ModelFileError::WrongRecord {
                expected: "Mahalanobis",
                found: other.kind(),
            }),
        }
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, ModelFileError> {
        let mut w = Writer::default();
        w.bytes.extend_from_slice(PADG_MAGIC);
        w.u32(PADG_VERSION);
        match self {
            ModelFile::Gmm(pair) => {
                w.u32(RECORD_GMM_PAIR);
                w.count(pair.dim())?;
                for g in [&pair.bona, &pair.spoof] {
                    w.count(g.n_components())?;
                    w.reals(g.weights());
                    w.reals(g.means());
                    w.reals(g.variances());
                }
            }
            ModelFile::Mdist(model) => {
                w.u32(RECORD_MDIST);
                w.count(model.bona.dim())?;
                w.u32(match model.pooling {
                    PoolingMode::Mean => 0,
                    PoolingMode::MeanStd => 1,
                });
                for g in [&model.bona, &model.spoof] {
                    w.reals(g.mean());
                    w.reals(g.covariance());
                }
            }
        }
        Ok(w.bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ModelFileError> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != PADG_MAGIC {
            return Err(ModelFileError::BadMagic);
        }
        let version = r.u32()?;
        if version != PADG_VERSION {
            return Err(ModelFileError::UnsupportedVersion(version));
        }
        let invalid = |e: &dyn std::fmt::Display| ModelFileError::Invalid(e.to_string());
        let model = match r.u32()? {
            RECORD_GMM_PAIR => {
                let d = r.u32()? as usize;
                let mut read_gmm = |label: &str| -> Result<Gmm<T>, ModelFileError> {
                    let m = r.u32()? as usize;
                    let md = m.checked_mul(d).ok_or(ModelFileError::Truncated)?;
                    let weights = r.reals(m)?;
                    let means = r.reals(md)?;
                    let variances = r.reals(md)?;
                    Gmm::new(weights, means, variances, d)
                        .map(|g| g.with_label(label))
                        .map_err(|e| invalid(&e))
                };
                let bona = read_gmm("bonafide")?;
                let spoof = read_gmm("spoof")?;
                ModelFile::Gmm(GmmPair::new(bona, spoof).map_err(|e| invalid(&e))?)
            }
            RECORD_MDIST => {
                let d = r.u32()? as usize;
                let pooling = match r.u32()? {
                    0 => PoolingMode::Mean,
                    1 => PoolingMode::MeanStd,
                    other => return Err(ModelFileError::Invalid(format!("unknown pooling code {other}"))),
                };
                let dd = d.checked_mul(d).ok_or(ModelFileError::Truncated)?;
                let mut read_class = |label: &str| -> Result<ClassGaussian<T>, ModelFileError> {
                    let mean = r.reals(d)?;
                    let cov = r.reals(dd)?;
                    ClassGaussian::new(mean, cov)
                        .map(|g| g.with_label(label))
                        .map_err(|e| invalid(&e))
                };
                let bona = read_class("bonafide")?;
                let spoof = read_class("spoof")?;
                ModelFile::Mdist(MdistModel::new(bona, spoof, pooling).map_err(|e| invalid(&e))?)
            }
            other => return Err(ModelFileError::UnknownRecord(other)),
        };
        let rest = bytes.len() - r.pos;
        if rest != 0 {
            return Err(ModelFileError::TrailingData(rest));
        }
        Ok(model)
    }
}

#[derive(Default)]
struct Writer {
    bytes: Vec<u8>,
}

impl Writer {
    fn u32(&mut self, v: u32) {
        self.bytes.extend_from_slice(&v.to_le_bytes());
    }

    fn count(&mut self, n: usize) -> Result<(), ModelFileError> {
        let v = u32::try_from(n).map_err(|_| ModelFileError::Invalid(format!("size {n} exceeds u32")))?;
        self.u32(v);
        Ok(())
    }

    fn reals<T: Real>(&mut self, values: &[T]) {
        for v in values {
            self.bytes.extend_from_slice(&v.as_f64().to_le_bytes());
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelFileError> {
        let end = self.pos.checked_add(n).ok_or(ModelFileError::Truncated)?;
        let out = self.bytes.get(self.pos..end).ok_or(ModelFileError::Truncated)?;
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32, ModelFileError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4-byte slice")))
    }

    fn reals<T: Real>(&mut self, n: usize) -> Result<Vec<T>, ModelFileError> {
        let raw = self.take(n.checked_mul(8).ok_or(ModelFileError::Truncated)?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| T::lit(f64::from_le_bytes(c.try_into().expect("8-byte chunk"))))
            .collect())
    }
}

pub fn read_model<T: Real>(path: impl AsRef<Path>) -> Result<ModelFile<T>, ModelFileError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| ModelFileError::Io {
        path: path.display().to_string(),
        source,
    })?;
    ModelFile::from_bytes(&bytes)
}

pub fn write_model<T: Real>(path: impl AsRef<Path>, model: &ModelFile<T>) -> Result<(), ModelFileError> {
    let path = path.as_ref();
    std::fs::write(path, model.to_bytes()?).map_err(|source| ModelFileError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair() -> GmmPair<f64> {
        let bona = Gmm::new(
            vec![0.25, 0.75],
            vec![0.0, 1.0, -2.0, 0.5],
            vec![1.0, 2.0, 0.1, 1.0 / 3.0],
            2,
        )
        .unwrap();
        let spoof = Gmm::new(vec![1.0], vec![3.0, -3.0], vec![0.5, 0.5], 2).unwrap();
        GmmPair::new(bona, spoof).unwrap()
    }

    fn mdist() -> MdistModel<f64> {
        let bona = ClassGaussian::new(vec![1.0, 2.0], vec![2.0, 0.5, 0.5, 1.0]).unwrap();
        let spoof = ClassGaussian::new(vec![-1.0, 0.0], vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        MdistModel::new(bona, spoof, PoolingMode::MeanStd).unwrap()
    }

    #[test]
    fn gmm_pair_round_trip_is_exact() {
        let file = ModelFile::Gmm(pair());
        let bytes = file.to_bytes().unwrap();
        assert_eq!(&bytes[..4], b"PADG");
        let back = ModelFile::<f64>::from_bytes(&bytes).unwrap().into_gmm().unwrap();
        let orig = pair();
        assert_eq!(back.bona.means(), orig.bona.means());
        assert_eq!(back.bona.variances(), orig.bona.variances());
        assert_eq!(back.spoof.weights(), orig.spoof.weights());
        assert_eq!(back.bona.label.as_deref(), Some("bonafide"));
    }

    #[test]
    fn mdist_round_trip_is_exact() {
        let bytes = ModelFile::Mdist(mdist()).to_bytes().unwrap();
        let back = ModelFile::<f64>::from_bytes(&bytes).unwrap().into_mdist().unwrap();
        assert_eq!(back.pooling, PoolingMode::MeanStd);
        assert_eq!(back.bona.covariance(), mdist().bona.covariance());
        assert_eq!(back.spoof.mean(), mdist().spoof.mean());
    }

    #[test]
    fn record_type_is_checked_on_conversion() {
        let bytes = ModelFile::Mdist(mdist()).to_bytes().unwrap();
        let file = ModelFile::<f64>::from_bytes(&bytes).unwrap();
        assert!(matches!(file.into_gmm(), Err(ModelFileError::WrongRecord { .. })));
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let bytes = ModelFile::Gmm(pair()).to_bytes().unwrap();
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(matches!(
            ModelFile::<f64>::from_bytes(&magic),
            Err(ModelFileError::BadMagic)
        ));
        let mut version = bytes.clone();
        version[4] = 9;
        assert!(matches!(
            ModelFile::<f64>::from_bytes(&version),
            Err(ModelFileError::UnsupportedVersion(9))
        ));
        let mut record = bytes.clone();
        record[8] = 7;
        assert!(matches!(
            ModelFile::<f64>::from_bytes(&record),
            Err(ModelFileError::UnknownRecord(7))
        ));
        for cut in [0, 3, 11, 20, bytes.len() - 1] {
            assert!(matches!(
                ModelFile::<f64>::from_bytes(&bytes[..cut]),
                Err(ModelFileError::Truncated | ModelFileError::BadMagic)
            ));
        }
        let mut long = bytes.clone();
        long.push(0);
        assert!(matches!(
            ModelFile::<f64>::from_bytes(&long),
            Err(ModelFileError::TrailingData(1))
        ));
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.padg");
        write_model(&path, &ModelFile::Gmm(pair())).unwrap();
        let back: GmmPair<f64> = read_model(&path).unwrap().into_gmm().unwrap();
        assert_eq!(back.spoof.means(), pair().spoof.means());
        assert!(matches!(
            read_model::<f64>(dir.path().join("missing")),
            Err(ModelFileError::Io { .. })
        ));
    }
}
