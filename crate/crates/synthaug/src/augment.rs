//! Class-conditional synthesis and entropy-based curation.
//!
//! Samples are drawn per class by conditional Langevin chains in latent
//! space, decoded through the generator with observation noise, and scored by
//! the Shannon entropy of the latent classifier at the pre-decoding z. The
//! filter keeps samples with entropy strictly below the threshold.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::binio::{ByteReader, ByteWriter};
use crate::error::{contract, Error, Result};
use crate::model::ModelParams;
use crate::numkernel::{normal_vec, rng_stream, shannon_entropy};
use crate::sampler::{langevin_conditional, LangevinConfig};

pub const AUG_MAGIC: &[u8; 16] = b"SYNTHAUG-AUG\0\0\0\0";
pub const AUG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleSource {
    Synthetic,
    PseudoLabeled,
}

impl SampleSource {
    fn code(self) -> u8 {
        match self {
            SampleSource::Synthetic => 0,
            SampleSource::PseudoLabeled => 1,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(SampleSource::Synthetic),
            1 => Some(SampleSource::PseudoLabeled),
            _ => None,
        }
    }
}

/// A synthesized or pseudo-labeled example with its entropy score.
#[derive(Debug, Clone)]
pub struct AugmentedSample {
    pub x: Vec<f64>,
    pub y: usize,
    pub entropy: f64,
    pub source: SampleSource,
}

/// A batch of augmented samples with bookkeeping.
#[derive(Debug, Clone)]
pub struct AugmentationBatch {
    pub samples: Vec<AugmentedSample>,
    pub per_class_counts: Vec<usize>,
    pub threshold_used: f64,
}

impl AugmentationBatch {
    pub fn from_samples(samples: Vec<AugmentedSample>, num_classes: usize, threshold: f64) -> Self {
        let mut counts = vec![0; num_classes];
        for s in &samples {
            counts[s.y] += 1;
        }
        Self {
            samples,
            per_class_counts: counts,
            threshold_used: threshold,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Shannon entropy of the latent classifier at z, in [0, ln K].
pub fn entropy_score(params: &ModelParams, z: &[f64]) -> Result<f64> {
    Ok(shannon_entropy(&params.classify_latent(z)?))
}

/// Draws `per_class` conditional samples for every class. Each sample's
/// latent comes from a conditional Langevin chain initialized at p0, the
/// data-space value is decode_mean(z) + σ·ε, and the entropy field is scored
/// at the pre-decoding z. Chains run in parallel with per-chain streams;
/// results are collected in class-major order.
pub fn generate_conditional(
    params: &ModelParams,
    per_class: usize,
    cfg: &LangevinConfig,
    rng: &mut impl Rng,
) -> Result<AugmentationBatch> {
    if per_class == 0 {
        return Err(contract("generate_conditional needs per_class >= 1"));
    }
    let k = params.num_classes;
    let jobs: Vec<(usize, u64)> = (0..k)
        .flat_map(|y| (0..per_class).map(move |_| y))
        .map(|y| (y, rng.gen::<u64>()))
        .collect();
    let samples: Result<Vec<AugmentedSample>> = jobs
        .par_iter()
        .map(|&(y, chain_seed)| {
            let mut chain_rng = rng_stream(chain_seed, 0);
            let z0 = normal_vec(&mut chain_rng, params.latent_dim);
            let chain = langevin_conditional(params, y, &z0, cfg, &mut chain_rng)?;
            let entropy = entropy_score(params, &chain.final_z)?;
            let mean = params.decode_mean(&chain.final_z)?;
            let noise = normal_vec(&mut chain_rng, params.data_dim);
            let x: Vec<f64> = mean
                .iter()
                .zip(&noise)
                .map(|(m, e)| m + params.obs_sigma * e)
                .collect();
            Ok(AugmentedSample {
                x,
                y,
                entropy,
                source: SampleSource::Synthetic,
            })
        })
        .collect();
    Ok(AugmentationBatch::from_samples(samples?, k, f64::INFINITY))
}

/// Keeps exactly the samples with entropy strictly below the threshold,
/// preserving order.
pub fn filter_by_entropy(batch: &AugmentationBatch, threshold: f64) -> Result<AugmentationBatch> {
    if threshold.is_nan() {
        return Err(contract("entropy threshold must not be NaN"));
    }
    let kept: Vec<AugmentedSample> = batch
        .samples
        .iter()
        .filter(|s| s.entropy < threshold)
        .cloned()
        .collect();
    Ok(AugmentationBatch::from_samples(
        kept,
        batch.per_class_counts.len(),
        threshold,
    ))
}

/// Stable ascending sort by entropy.
pub fn sort_by_entropy(batch: &AugmentationBatch) -> AugmentationBatch {
    let mut samples = batch.samples.clone();
    samples.sort_by(|a, b| a.entropy.partial_cmp(&b.entropy).unwrap());
    AugmentationBatch {
        samples,
        per_class_counts: batch.per_class_counts.clone(),
        threshold_used: batch.threshold_used,
    }
}

/// Pseudo-labels unlabeled points: each x gets the argmax class of its
/// n_mc-averaged prediction and is kept iff the prediction entropy is
/// strictly below the threshold. Argmax ties break toward the lowest index.
pub fn pseudo_label(
    params: &ModelParams,
    unlabeled: &[Vec<f64>],
    threshold: f64,
    rng: &mut impl Rng,
    n_mc: usize,
) -> Result<Vec<AugmentedSample>> {
    if !(threshold > 0.0) {
        return Err(contract("pseudo-label threshold must be positive"));
    }
    let jobs: Vec<(usize, u64)> = (0..unlabeled.len())
        .map(|i| (i, rng.gen::<u64>()))
        .collect();
    let labeled: Result<Vec<Option<AugmentedSample>>> = jobs
        .par_iter()
        .map(|&(i, seed)| {
            let mut r = rng_stream(seed, 0);
            let p = params.predict(&unlabeled[i], &mut r, n_mc)?;
            let entropy = shannon_entropy(&p);
            if entropy >= threshold {
                return Ok(None);
            }
            let mut y = 0;
            for (k, &pk) in p.iter().enumerate() {
                if pk > p[y] {
                    y = k;
                }
            }
            Ok(Some(AugmentedSample {
                x: unlabeled[i].clone(),
                y,
                entropy,
                source: SampleSource::PseudoLabeled,
            }))
        })
        .collect();
    Ok(labeled?.into_iter().flatten().collect())
}

/// Writes an augmentation batch: magic, version, count, data width, then per
/// sample the label, entropy, source code and data vector.
pub fn save_batch(batch: &AugmentationBatch, num_classes: usize, path: &Path) -> Result<()> {
    let dim = batch.samples.first().map_or(0, |s| s.x.len());
    if batch.samples.iter().any(|s| s.x.len() != dim) {
        return Err(contract("augmentation batch has inconsistent data widths"));
    }
    let mut w = ByteWriter::new(BufWriter::new(File::create(path)?));
    w.write_bytes(AUG_MAGIC)?;
    w.write_u32(AUG_VERSION)?;
    w.write_u32(batch.samples.len() as u32)?;
    w.write_u32(dim as u32)?;
    w.write_u32(num_classes as u32)?;
    w.write_f64(batch.threshold_used)?;
    for s in &batch.samples {
        w.write_u32(s.y as u32)?;
        w.write_f64(s.entropy)?;
        w.write_u8(s.source.code())?;
        w.write_f64_slice(&s.x)?;
    }
    Ok(())
}

pub fn load_batch(path: &Path) -> Result<AugmentationBatch> {
    let mut r = ByteReader::new(BufReader::new(File::open(path)?));
    r.expect_magic(AUG_MAGIC, "augmentation")?;
    r.expect_version(AUG_VERSION)?;
    let count = r.read_u32("sample count")? as usize;
    let dim = r.read_u32("data width")? as usize;
    let num_classes = r.read_u32("class count")? as usize;
    let threshold = r.read_f64("threshold")?;
    let mut samples = Vec::with_capacity(count);
    for _ in 0..count {
        let label_at = r.offset();
        let y = r.read_u32("label")? as usize;
        if y >= num_classes {
            return Err(Error::Parse {
                offset: label_at,
                detail: format!("label {y} out of range for K = {num_classes}"),
            });
        }
        let entropy = r.read_f64("entropy")?;
        let src_at = r.offset();
        let code = r.read_u8("source code")?;
        let source = SampleSource::from_code(code).ok_or_else(|| Error::Parse {
            offset: src_at,
            detail: format!("unknown source code {code}"),
        })?;
        let x = r.read_f64_vec(dim, "sample data")?;
        samples.push(AugmentedSample {
            x,
            y,
            entropy,
            source,
        });
    }
    r.expect_eof()?;
    Ok(AugmentationBatch::from_samples(
        samples,
        num_classes,
        threshold,
    ))
}

/// Renders the batch as a plain PGM (P5) grid, tiles row-major sorted by
/// increasing entropy. Requires the data width to be a perfect square.
/// Returns the sorted batch used for the tiling.
pub fn write_entropy_grid(batch: &AugmentationBatch, path: &Path) -> Result<AugmentationBatch> {
    let sorted = sort_by_entropy(batch);
    if sorted.is_empty() {
        return Err(contract("cannot render an empty batch"));
    }
    let dim = sorted.samples[0].x.len();
    let side = (dim as f64).sqrt().round() as usize;
    if side * side != dim {
        return Err(contract(format!(
            "data width {dim} is not a perfect square; no grid export"
        )));
    }
    let n = sorted.len();
    let cols = (n as f64).sqrt().ceil() as usize;
    let rows = n.div_ceil(cols);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for s in &sorted.samples {
        for &v in &s.x {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let span = if hi > lo { hi - lo } else { 1.0 };
    let (w_px, h_px) = (cols * side, rows * side);
    let mut pixels = vec![0u8; w_px * h_px];
    for (idx, s) in sorted.samples.iter().enumerate() {
        let (tr, tc) = (idx / cols, idx % cols);
        for py in 0..side {
            for px in 0..side {
                let v = (s.x[py * side + px] - lo) / span;
                pixels[(tr * side + py) * w_px + tc * side + px] = (v * 255.0).round() as u8;
            }
        }
    }
    let mut f = BufWriter::new(File::create(path)?);
    write!(f, "P5\n{w_px} {h_px}\n255\n")?;
    f.write_all(&pixels)?;
    Ok(sorted)
}
