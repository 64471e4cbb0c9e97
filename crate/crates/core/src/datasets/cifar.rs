//! CIFAR-10 binary batches: 10000 records of 1 label byte + 3072 planar RGB bytes.

use std::path::Path;

use ndarray::Array2;

use super::{LabeledDataset, Provenance};
use crate::error::{OvrError, Result};

pub const CIFAR_IMAGE_BYTES: usize = 3072;
pub const CIFAR_RECORDS_PER_FILE: usize = 10_000;
const RECORD_BYTES: usize = CIFAR_IMAGE_BYTES + 1;

const TRAIN_FILES: [&str; 5] = [
    "data_batch_1.bin",
    "data_batch_2.bin",
    "data_batch_3.bin",
    "data_batch_4.bin",
    "data_batch_5.bin",
];
const TEST_FILE: &str = "test_batch.bin";

/// Parses one batch file's bytes. Pixels are scaled by 1/255 and keep the
/// file's planar R, G, B layout.
pub fn parse_cifar_batch(bytes: &[u8], file: &Path) -> Result<(Array2<f64>, Vec<usize>)> {
    let expected = CIFAR_RECORDS_PER_FILE * RECORD_BYTES;
    if bytes.len() != expected {
        let record = (bytes.len() / RECORD_BYTES).min(CIFAR_RECORDS_PER_FILE);
        let message = if bytes.len() < expected {
            format!(
                "file is {} bytes, expected {expected}; record {record} is incomplete",
                bytes.len()
            )
        } else {
            format!(
                "file is {} bytes, expected {expected}; trailing data after record {}",
                bytes.len(),
                CIFAR_RECORDS_PER_FILE - 1
            )
        };
        return Err(OvrError::Format {
            file: file.to_path_buf(),
            record: Some(record),
            message,
        });
    }
    let mut x = Array2::zeros((CIFAR_RECORDS_PER_FILE, CIFAR_IMAGE_BYTES));
    let mut y = Vec::with_capacity(CIFAR_RECORDS_PER_FILE);
    for (i, (record, mut row)) in bytes
        .chunks_exact(RECORD_BYTES)
        .zip(x.rows_mut())
        .enumerate()
    {
        let label = record[0];
        if label > 9 {
            return Err(OvrError::Format {
                file: file.to_path_buf(),
                record: Some(i),
                message: format!("label byte {label} > 9"),
            });
        }
        y.push(label as usize);
        for (dst, &px) in row.iter_mut().zip(&record[1..]) {
            *dst = px as f64 / 255.0;
        }
    }
    Ok((x, y))
}

fn read_batch(dir: &Path, name: &str) -> Result<(Array2<f64>, Vec<usize>)> {
    let path = dir.join(name);
    let bytes = std::fs::read(&path).map_err(|e| OvrError::io(&path, e))?;
    parse_cifar_batch(&bytes, &path)
}

/// Loads `data_batch_1..5.bin` (50000 rows) and `test_batch.bin` (10000 rows).
pub fn load_cifar10(dir: &Path) -> Result<(LabeledDataset, LabeledDataset)> {
    let mut train_x = Array2::zeros((TRAIN_FILES.len() * CIFAR_RECORDS_PER_FILE, CIFAR_IMAGE_BYTES));
    let mut train_y = Vec::with_capacity(train_x.nrows());
    for (f, name) in TRAIN_FILES.iter().enumerate() {
        let (x, y) = read_batch(dir, name)?;
        let start = f * CIFAR_RECORDS_PER_FILE;
        train_x
            .slice_mut(ndarray::s![start..start + CIFAR_RECORDS_PER_FILE, ..])
            .assign(&x);
        train_y.extend(y);
    }
    let (test_x, test_y) = read_batch(dir, TEST_FILE)?;
    let prov = |split: &str| Provenance::Cifar10 {
        path: dir.display().to_string(),
        split: split.into(),
        pca_dims: None,
    };
    Ok((
        LabeledDataset::new(train_x, train_y, 10, prov("train"))?,
        LabeledDataset::new(test_x, test_y, 10, prov("test"))?,
    ))
}
