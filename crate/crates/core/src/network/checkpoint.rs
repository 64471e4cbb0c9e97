//! Binary checkpoints.
//!
//! Layout: `b"OVRL"`, a version byte, a little-endian `u32` header length,
//! the UTF-8 JSON header (array names, dtypes, shapes and string metadata),
//! then every array as raw little-endian `f64` in header order.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::layer::{Activation, DenseLayer};
use crate::datasets::PcaModel;
use crate::error::{OvrError, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"OVRL";
pub const CHECKPOINT_VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl NamedArray {
    pub fn matrix(name: &str, a: &Array2<f64>) -> Self {
        Self {
            name: name.into(),
            shape: vec![a.nrows(), a.ncols()],
            data: a.iter().copied().collect(),
        }
    }

    pub fn vector(name: &str, a: &Array1<f64>) -> Self {
        Self {
            name: name.into(),
            shape: vec![a.len()],
            data: a.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    pub meta: BTreeMap<String, String>,
    pub arrays: Vec<NamedArray>,
}

#[derive(Serialize, Deserialize)]
struct HeaderArray {
    name: String,
    dtype: String,
    shape: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    arrays: Vec<HeaderArray>,
    meta: BTreeMap<String, String>,
}

impl Checkpoint {
    pub fn with_meta(mut self, key: &str, value: impl ToString) -> Self {
        self.meta.insert(key.into(), value.to_string());
        self
    }

    pub fn array(&self, name: &str) -> Option<&NamedArray> {
        self.arrays.iter().find(|a| a.name == name)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let header = Header {
            arrays: self
                .arrays
                .iter()
                .map(|a| HeaderArray {
                    name: a.name.clone(),
                    dtype: "f64".into(),
                    shape: a.shape.clone(),
                })
                .collect(),
            meta: self.meta.clone(),
        };
        let header = serde_json::to_vec(&header).expect("header is plain data");
        let payload: usize = self.arrays.iter().map(|a| a.data.len() * 8).sum();
        let mut out = Vec::with_capacity(9 + header.len() + payload);
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.push(CHECKPOINT_VERSION);
        out.extend_from_slice(&(header.len() as u32).to_le_bytes());
        out.extend_from_slice(&header);
        for a in &self.arrays {
            for v in &a.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], file: &Path) -> Result<Self> {
        let err = |message: String| OvrError::Format {
            file: file.to_path_buf(),
            record: None,
            message,
        };
        if bytes.len() < 9 || &bytes[..4] != CHECKPOINT_MAGIC {
            return Err(err("missing OVRL magic".into()));
        }
        if bytes[4] != CHECKPOINT_VERSION {
            return Err(err(format!("unsupported checkpoint version {}", bytes[4])));
        }
        let header_len = u32::from_le_bytes(bytes[5..9].try_into().expect("4 bytes")) as usize;
        let body = &bytes[9..];
        if body.len() < header_len {
            return Err(err(format!("header length {header_len} exceeds file")));
        }
        let header: Header = serde_json::from_slice(&body[..header_len])
            .map_err(|e| err(format!("bad header: {e}")))?;
        let mut data = &body[header_len..];
        let mut arrays = Vec::with_capacity(header.arrays.len());
        for h in header.arrays {
            if h.dtype != "f64" {
                return Err(err(format!("array {} has unsupported dtype {}", h.name, h.dtype)));
            }
            let count: usize = h.shape.iter().product();
            if data.len() < count * 8 {
                return Err(err(format!("array {} truncated", h.name)));
            }
            let (chunk, rest) = data.split_at(count * 8);
            data = rest;
            arrays.push(NamedArray {
                name: h.name,
                shape: h.shape,
                data: chunk
                    .chunks_exact(8)
                    .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
                    .collect(),
            });
        }
        if !data.is_empty() {
            return Err(err(format!("{} trailing bytes", data.len())));
        }
        Ok(Self {
            meta: header.meta,
            arrays,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes()).map_err(|e| OvrError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| OvrError::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }

    fn missing(&self, what: &str) -> OvrError {
        OvrError::Format {
            file: self.meta.get("source").cloned().unwrap_or_default().into(),
            record: None,
            message: format!("checkpoint lacks {what}"),
        }
    }

    pub fn matrix(&self, name: &str) -> Result<Array2<f64>> {
        let a = self.array(name).ok_or_else(|| self.missing(&format!("array {name}")))?;
        match a.shape[..] {
            [r, c] => Ok(Array2::from_shape_vec((r, c), a.data.clone()).expect("shape checked on load")),
            _ => Err(OvrError::Shape(format!("array {name} has shape {:?}, expected 2-D", a.shape))),
        }
    }

    pub fn vector(&self, name: &str) -> Result<Array1<f64>> {
        let a = self.array(name).ok_or_else(|| self.missing(&format!("array {name}")))?;
        match a.shape[..] {
            [_] => Ok(Array1::from(a.data.clone())),
            _ => Err(OvrError::Shape(format!("array {name} has shape {:?}, expected 1-D", a.shape))),
        }
    }

    /// Adds `{prefix}.weights`, `{prefix}.bias` and the activation as metadata.
    pub fn push_layer(&mut self, prefix: &str, layer: &DenseLayer) {
        self.arrays.push(NamedArray::matrix(&format!("{prefix}.weights"), &layer.weights));
        self.arrays.push(NamedArray::vector(&format!("{prefix}.bias"), &layer.bias));
        self.meta.insert(format!("{prefix}.activation"), layer.activation.to_string());
        self.meta.insert(format!("{prefix}.name"), layer.name.clone());
    }

    pub fn layer(&self, prefix: &str) -> Result<DenseLayer> {
        let activation: Activation = self
            .meta
            .get(&format!("{prefix}.activation"))
            .ok_or_else(|| self.missing(&format!("{prefix}.activation")))?
            .parse()?;
        let name = self
            .meta
            .get(&format!("{prefix}.name"))
            .cloned()
            .unwrap_or_else(|| prefix.to_string());
        DenseLayer::new(
            name,
            self.matrix(&format!("{prefix}.weights"))?,
            self.vector(&format!("{prefix}.bias"))?,
            activation,
        )
    }

    pub fn from_pca(model: &PcaModel) -> Self {
        Self {
            meta: BTreeMap::from([("kind".to_string(), "pca".to_string())]),
            arrays: vec![
                NamedArray::vector("mean", &model.mean),
                NamedArray::matrix("components", &model.components),
                NamedArray::vector("variances", &model.variances),
            ],
        }
    }

    pub fn pca(&self) -> Result<PcaModel> {
        let model = PcaModel {
            mean: self.vector("mean")?,
            components: self.matrix("components")?,
            variances: self.vector("variances")?,
        };
        if model.components.ncols() != model.mean.len() || model.components.nrows() != model.variances.len() {
            return Err(OvrError::Shape("inconsistent PCA arrays".into()));
        }
        Ok(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testutil::random_matrix;

    #[test]
    fn layer_round_trip_is_bit_exact() {
        let layer = DenseLayer::new(
            "encoder",
            random_matrix(3, 5, -1.0, 1.0, 1),
            Array1::from(vec![0.1, f64::MIN_POSITIVE, -0.0]),
            Activation::Sigmoid,
        )
        .unwrap();
        let mut ck = Checkpoint::default().with_meta("lambda", 1e-4);
        ck.push_layer("encoder", &layer);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("enc.ovrl");
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ck);
        let restored = back.layer("encoder").unwrap();
        for (a, b) in restored.weights.iter().zip(layer.weights.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert_eq!(restored.bias[2].to_bits(), (-0.0f64).to_bits());
        assert_eq!(std::fs::read(&path).unwrap(), back.to_bytes());
    }

    #[test]
    fn header_layout() {
        let mut ck = Checkpoint::default();
        ck.arrays.push(NamedArray::vector("v", &Array1::from(vec![1.0, 2.0])));
        let bytes = ck.to_bytes();
        assert_eq!(&bytes[..4], b"OVRL");
        assert_eq!(bytes[4], 1);
        let len = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
        let header = std::str::from_utf8(&bytes[9..9 + len]).unwrap();
        assert_eq!(header, r#"{"arrays":[{"name":"v","dtype":"f64","shape":[2]}],"meta":{}}"#);
        assert_eq!(&bytes[9 + len..9 + len + 8], &1.0f64.to_le_bytes());
        assert_eq!(bytes.len(), 9 + len + 16);
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let mut ck = Checkpoint::default();
        ck.arrays.push(NamedArray::vector("v", &Array1::from(vec![1.0, 2.0])));
        let bytes = ck.to_bytes();
        let p = Path::new("x.ovrl");
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 1], p).is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(Checkpoint::from_bytes(&extra, p).is_err());
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert!(Checkpoint::from_bytes(&magic, p).is_err());
        let mut version = bytes;
        version[4] = 9;
        assert!(Checkpoint::from_bytes(&version, p).is_err());
    }

    #[test]
    fn pca_round_trip() {
        let model = crate::datasets::fit_pca(&random_matrix(10, 4, -1.0, 1.0, 2), 3).unwrap();
        let ck = Checkpoint::from_bytes(&Checkpoint::from_pca(&model).to_bytes(), Path::new("p")).unwrap();
        assert_eq!(ck.pca().unwrap(), model);
    }
}
