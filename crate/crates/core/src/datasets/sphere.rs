//! Points on the unit sphere, labelled by the class of the surface tile they land in.
//!
//! The surface is cut into `n_cuts + 1` equal-angle latitude bands and
//! `m_sectors` longitude sectors. Each tile gets a class drawn uniformly from
//! `[0, num_classes)`, so classes repeat across tiles and the labelled manifold
//! is discontinuous.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{LabeledDataset, Provenance};
use crate::error::{OvrError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpherePartitionSpec {
    pub m_sectors: usize,
    pub n_cuts: usize,
    pub num_classes: usize,
    pub num_points: usize,
    pub seed: u64,
}

impl SpherePartitionSpec {
    pub fn partition_count(&self) -> usize {
        self.m_sectors * (self.n_cuts + 1)
    }

    fn validate(&self) -> Result<()> {
        if self.num_points == 0 {
            return Err(OvrError::InvalidSpec("num_points must be positive".into()));
        }
        if self.m_sectors == 0 {
            return Err(OvrError::InvalidSpec("m_sectors must be positive".into()));
        }
        if self.num_classes == 0 {
            return Err(OvrError::InvalidSpec("num_classes must be positive".into()));
        }
        Ok(())
    }

    /// Partition-to-class table drawn from the generator seed.
    pub fn class_table(&self) -> Result<Vec<usize>> {
        self.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        Ok(Self::draw_table(&mut rng, self.partition_count(), self.num_classes))
    }

    fn draw_table(rng: &mut ChaCha8Rng, partitions: usize, classes: usize) -> Vec<usize> {
        (0..partitions).map(|_| rng.random_range(0..classes)).collect()
    }
}

/// Tile index `band * m_sectors + sector` of a unit vector.
///
/// Band 0 holds the north pole. Sectors start at azimuth −π, so `atan2`'s
/// convention `atan2(0, 0) = 0` puts both poles in sector `m_sectors / 2`.
pub fn partition_index(point: [f64; 3], m_sectors: usize, n_cuts: usize) -> Result<usize> {
    if m_sectors == 0 {
        return Err(OvrError::InvalidArgument("m_sectors must be positive".into()));
    }
    let [x, y, z] = point;
    let norm = (x * x + y * y + z * z).sqrt();
    if !((norm - 1.0).abs() <= 1e-6) {
        return Err(OvrError::InvalidPoint { norm });
    }
    let bands = n_cuts + 1;
    let polar = 1.0 - (z.clamp(-1.0, 1.0).asin() + PI / 2.0) / PI;
    let band = ((bands as f64 * polar).floor().max(0.0) as usize).min(n_cuts);
    let azimuth = (y.atan2(x) + PI) / (2.0 * PI);
    let sector = ((m_sectors as f64 * azimuth).floor().max(0.0) as usize).min(m_sectors - 1);
    Ok(band * m_sectors + sector)
}

/// Uniform samples on the unit sphere (normalised Gaussian triples), labelled
/// through the seeded tile-to-class table.
pub fn generate_sphere_dataset(spec: &SpherePartitionSpec) -> Result<LabeledDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let table = SpherePartitionSpec::draw_table(&mut rng, spec.partition_count(), spec.num_classes);

    let mut x = Array2::zeros((spec.num_points, 3));
    let mut y = Vec::with_capacity(spec.num_points);
    for mut row in x.rows_mut() {
        let p = loop {
            let g: [f64; 3] = [
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
                rng.sample(StandardNormal),
            ];
            let norm = (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]).sqrt();
            if norm > 1e-9 {
                break [g[0] / norm, g[1] / norm, g[2] / norm];
            }
        };
        row.assign(&ndarray::arr1(&p));
        y.push(table[partition_index(p, spec.m_sectors, spec.n_cuts)?]);
    }
    LabeledDataset::new(x, y, spec.num_classes, Provenance::Sphere(*spec))
}

/// Writes `x,y,z,label` rows with 17 significant digits.
pub fn write_sphere_csv(dataset: &LabeledDataset, path: &Path) -> Result<()> {
    if dataset.dim() != 3 {
        return Err(OvrError::Shape(format!(
            "sphere CSV needs 3 columns, dataset has {}",
            dataset.dim()
        )));
    }
    let mut out = String::from("x,y,z,label\n");
    for (row, label) in dataset.x.rows().into_iter().zip(&dataset.y) {
        let _ = writeln!(out, "{:.16e},{:.16e},{:.16e},{label}", row[0], row[1], row[2]);
    }
    std::fs::write(path, out).map_err(|e| OvrError::io(path, e))
}

pub fn read_sphere_csv(path: &Path, class_count: usize) -> Result<LabeledDataset> {
    let text = std::fs::read_to_string(path).map_err(|e| OvrError::io(path, e))?;
    let format_err = |record: Option<usize>, message: String| OvrError::Format {
        file: path.to_path_buf(),
        record,
        message,
    };
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("x,y,z,label") {
        return Err(format_err(None, "missing `x,y,z,label` header".into()));
    }
    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != 4 {
            return Err(format_err(Some(i), format!("expected 4 fields, got {}", fields.len())));
        }
        for f in &fields[..3] {
            values.push(
                f.parse::<f64>()
                    .map_err(|e| format_err(Some(i), format!("bad float {f:?}: {e}")))?,
            );
        }
        labels.push(
            fields[3]
                .parse::<usize>()
                .map_err(|e| format_err(Some(i), format!("bad label {:?}: {e}", fields[3])))?,
        );
    }
    let x = Array2::from_shape_vec((labels.len(), 3), values)
        .map_err(|e| format_err(None, e.to_string()))?;
    LabeledDataset::new(
        x,
        labels,
        class_count,
        Provenance::Derived(format!("csv:{}", path.display())),
    )
}
