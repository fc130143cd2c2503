//! Deterministic synthetic datasets and binary dataset I/O.
//!
//! The generator produces a K-component Gaussian mixture: class means drawn
//! from the seed on a sphere of the given scale, examples N(mean_y, cov²·I).
//! Unlabeled and test points carry hidden labels retained only for the
//! pseudo-label audit path; the training API never exposes them.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::binio::{ByteReader, ByteWriter};
use crate::error::{contract, Error, Result};
use crate::numkernel::{l2_norm, normal_vec, substream};

pub const DATA_MAGIC: &[u8; 16] = b"SYNTHAUG-DATA\0\0\0";
pub const DATA_VERSION: u32 = 1;

/// Labeled, unlabeled and test splits of one dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSplit {
    pub labeled: Vec<(Vec<f64>, usize)>,
    pub unlabeled: Vec<Vec<f64>>,
    pub test: Vec<(Vec<f64>, usize)>,
    pub data_dim: usize,
    pub num_classes: usize,
    hidden_labels: Vec<usize>,
}

impl DatasetSplit {
    /// Hidden ground-truth labels of the unlabeled split. Audit interface for
    /// pseudo-label verification only; training code must not call this.
    pub fn audit_hidden_labels(&self) -> &[usize] {
        &self.hidden_labels
    }
}

/// Recipe for a synthetic mixture dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthSpec {
    pub num_classes: usize,
    pub data_dim: usize,
    pub class_mean_scale: f64,
    pub class_cov_scale: f64,
    pub num_labeled: usize,
    pub num_unlabeled: usize,
    pub test_size: usize,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            num_classes: 4,
            data_dim: 16,
            class_mean_scale: 3.0,
            class_cov_scale: 0.6,
            num_labeled: 40,
            num_unlabeled: 4000,
            test_size: 1000,
            seed: 0,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(contract("need at least two classes"));
        }
        if self.num_labeled < self.num_classes
            || self.num_unlabeled < self.num_classes
            || self.test_size < self.num_classes
        {
            return Err(contract("split sizes must be at least K"));
        }
        if !(self.class_mean_scale > 0.0) || !(self.class_cov_scale >= 0.0) {
            return Err(contract("scales must be positive (cov may be zero)"));
        }
        Ok(())
    }
}

const STREAM_MEANS: u8 = 0x10;
const STREAM_LABELED: u8 = 0x11;
const STREAM_UNLABELED: u8 = 0x12;
const STREAM_TEST: u8 = 0x13;

/// Deterministic mixture dataset. The labeled split is class-balanced within
/// ±1 by round-robin label assignment.
pub fn make_synthetic(spec: &SynthSpec) -> Result<DatasetSplit> {
    spec.validate()?;
    let (k, d) = (spec.num_classes, spec.data_dim);
    let mut means = Vec::with_capacity(k);
    {
        let mut rng = substream(spec.seed, STREAM_MEANS, 0, 0);
        for _ in 0..k {
            let v = normal_vec(&mut rng, d);
            let norm = l2_norm(&v).max(1e-12);
            means.push(
                v.iter()
                    .map(|x| x / norm * spec.class_mean_scale)
                    .collect::<Vec<f64>>(),
            );
        }
    }
    let draw = |purpose: u8, idx: u64, y: usize| -> Vec<f64> {
        let mut rng = substream(spec.seed, purpose, idx, 0);
        let noise = normal_vec(&mut rng, d);
        means[y]
            .iter()
            .zip(&noise)
            .map(|(m, e)| m + spec.class_cov_scale * e)
            .collect()
    };
    let labeled: Vec<(Vec<f64>, usize)> = (0..spec.num_labeled)
        .map(|i| (draw(STREAM_LABELED, i as u64, i % k), i % k))
        .collect();
    let mut unlabeled = Vec::with_capacity(spec.num_unlabeled);
    let mut hidden_labels = Vec::with_capacity(spec.num_unlabeled);
    for i in 0..spec.num_unlabeled {
        let y = i % k;
        unlabeled.push(draw(STREAM_UNLABELED, i as u64, y));
        hidden_labels.push(y);
    }
    let test: Vec<(Vec<f64>, usize)> = (0..spec.test_size)
        .map(|i| (draw(STREAM_TEST, i as u64, i % k), i % k))
        .collect();
    Ok(DatasetSplit {
        labeled,
        unlabeled,
        test,
        data_dim: d,
        num_classes: k,
        hidden_labels,
    })
}

pub fn save_dataset(split: &DatasetSplit, path: &Path) -> Result<()> {
    let mut w = ByteWriter::new(BufWriter::new(File::create(path)?));
    w.write_bytes(DATA_MAGIC)?;
    w.write_u32(DATA_VERSION)?;
    w.write_u32(split.data_dim as u32)?;
    w.write_u32(split.num_classes as u32)?;
    w.write_u32(split.labeled.len() as u32)?;
    w.write_u32(split.unlabeled.len() as u32)?;
    w.write_u32(split.test.len() as u32)?;
    for (x, y) in &split.labeled {
        w.write_f64_slice(x)?;
        w.write_u32(*y as u32)?;
    }
    for (x, y) in split.unlabeled.iter().zip(&split.hidden_labels) {
        w.write_f64_slice(x)?;
        w.write_u32(*y as u32)?;
    }
    for (x, y) in &split.test {
        w.write_f64_slice(x)?;
        w.write_u32(*y as u32)?;
    }
    Ok(())
}

pub fn load_dataset(path: &Path) -> Result<DatasetSplit> {
    let mut r = ByteReader::new(BufReader::new(File::open(path)?));
    r.expect_magic(DATA_MAGIC, "dataset")?;
    r.expect_version(DATA_VERSION)?;
    let d = r.read_u32("data dim")? as usize;
    let k = r.read_u32("class count")? as usize;
    let m = r.read_u32("labeled count")? as usize;
    let n = r.read_u32("unlabeled count")? as usize;
    let t = r.read_u32("test count")? as usize;
    if k < 2 || d == 0 {
        return Err(Error::Parse {
            offset: 20,
            detail: format!("implausible dataset header (D={d}, K={k})"),
        });
    }
    let read_pair = |r: &mut ByteReader<_>, what: &str| -> Result<(Vec<f64>, usize)> {
        let x = r.read_f64_vec(d, what)?;
        let at = r.offset();
        let y = r.read_u32("label")? as usize;
        if y >= k {
            return Err(Error::Parse {
                offset: at,
                detail: format!("label {y} out of range for K = {k}"),
            });
        }
        Ok((x, y))
    };
    let labeled: Result<Vec<_>> = (0..m).map(|_| read_pair(&mut r, "labeled example")).collect();
    let labeled = labeled?;
    let mut unlabeled = Vec::with_capacity(n);
    let mut hidden_labels = Vec::with_capacity(n);
    for _ in 0..n {
        let (x, y) = read_pair(&mut r, "unlabeled example")?;
        unlabeled.push(x);
        hidden_labels.push(y);
    }
    let test: Result<Vec<_>> = (0..t).map(|_| read_pair(&mut r, "test example")).collect();
    let test = test?;
    r.expect_eof()?;
    Ok(DatasetSplit {
        labeled,
        unlabeled,
        test,
        data_dim: d,
        num_classes: k,
        hidden_labels,
    })
}
