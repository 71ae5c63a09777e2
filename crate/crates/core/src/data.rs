//! Orbit-labelled datasets.
//!
//! A dataset is built from `C` random exemplars on a group: class `c`
//! consists of translates `g . exemplar_c`, one per retained group
//! element, so every class is (a subset of) one orbit. Labels are the
//! exemplar indices `0..C`.
//!
//! Everything here is counter-seeded: each randomized decision draws
//! from its own ChaCha stream keyed by `(seed, domain, index)`, so
//! generation, splits and batch schedules are reproducible bit for bit
//! and independent of each other.

use crate::group::{FiniteAbelianGroup, GroupError};
use crate::linalg::C64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(
        "batch of {needed_classes} classes x {per_class} samples is infeasible: \
         only {eligible_classes} classes have at least {per_class} samples \
         (limiting class: {limiting_label})"
    )]
    InfeasibleBatch {
        needed_classes: usize,
        per_class: usize,
        eligible_classes: usize,
        limiting_label: usize,
    },
    #[error("dataset holds complex signals, the text format stores real values only")]
    ComplexData,
    #[error("malformed dataset file at line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error(transparent)]
    Group(#[from] GroupError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One labelled signal.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub signal: Vec<C64>,
    pub label: usize,
}

/// A labelled collection of group-orbit samples.
#[derive(Clone, Debug, PartialEq)]
pub struct OrbitDataset {
    group: FiniteAbelianGroup,
    classes: usize,
    samples: Vec<Sample>,
    exemplars: Vec<Vec<C64>>,
    class_indices: Vec<Vec<usize>>,
}

/// Domain tags for the ChaCha streams, so distinct purposes can never
/// collide even under the same seed.
const STREAM_EXEMPLARS: u64 = 0;
const STREAM_SUBSET: u64 = 1;
const STREAM_SPLIT: u64 = 2;
const STREAM_EPOCH_SHUFFLE: u64 = 3;
const STREAM_EPOCH_DRAW: u64 = 4;

pub(crate) fn stream_rng(seed: u64, domain: u64, a: u64, b: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((domain << 56) | (a << 28) | b);
    rng
}

impl OrbitDataset {
    fn from_parts(
        group: FiniteAbelianGroup,
        classes: usize,
        samples: Vec<Sample>,
        exemplars: Vec<Vec<C64>>,
    ) -> Self {
        let mut class_indices = vec![Vec::new(); classes];
        for (i, s) in samples.iter().enumerate() {
            class_indices[s.label].push(i);
        }
        OrbitDataset { group, classes, samples, exemplars, class_indices }
    }

    pub fn group(&self) -> &FiniteAbelianGroup {
        &self.group
    }

    pub fn num_classes(&self) -> usize {
        self.classes
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    /// The untransformed seed signal of each class. For datasets read
    /// back from disk this is the first stored sample of the class,
    /// which generation writes first.
    pub fn exemplars(&self) -> &[Vec<C64>] {
        &self.exemplars
    }

    /// Sample indices per class label.
    pub fn class_indices(&self) -> &[Vec<usize>] {
        &self.class_indices
    }

    pub fn min_class_size(&self) -> usize {
        self.class_indices.iter().map(Vec::len).min().unwrap_or(0)
    }

    /// Borrowed (signal, label) views for a list of sample indices.
    pub fn batch_views(&self, indices: &[usize]) -> Vec<(&[C64], usize)> {
        indices
            .iter()
            .map(|&i| (self.samples[i].signal.as_slice(), self.samples[i].label))
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<(), DataError> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        Ok(())
    }

    pub fn write_to(&self, w: &mut impl Write) -> Result<(), DataError> {
        if self
            .samples
            .iter()
            .any(|s| s.signal.iter().any(|v| v.im != 0.0))
        {
            return Err(DataError::ComplexData);
        }
        writeln!(
            w,
            "BNND v1 group={} classes={} samples={}",
            self.group.spec(),
            self.classes,
            self.samples.len()
        )?;
        for s in &self.samples {
            write!(w, "{}", s.label)?;
            for v in &s.signal {
                write!(w, ",{}", crate::fmt_f64(v.re))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, DataError> {
        Self::read_from(&mut BufReader::new(File::open(path)?))
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self, DataError> {
        let reader = BufReader::new(r);
        let mut lines = reader.lines();
        let header = lines
            .next()
            .ok_or_else(|| malformed(1, "empty file"))??;
        let (group, classes, count) = parse_header(&header)?;
        let n = group.order();

        let mut samples = Vec::with_capacity(count);
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let label: usize = parts
                .next()
                .unwrap()
                .trim()
                .parse()
                .map_err(|_| malformed(lineno + 2, "bad label"))?;
            if label >= classes {
                return Err(malformed(lineno + 2, "label out of range"));
            }
            let signal: Result<Vec<C64>, DataError> = parts
                .map(|p| {
                    p.trim()
                        .parse::<f64>()
                        .map(|v| C64::new(v, 0.0))
                        .map_err(|_| malformed(lineno + 2, "bad float"))
                })
                .collect();
            let signal = signal?;
            if signal.len() != n {
                return Err(malformed(lineno + 2, "wrong signal length"));
            }
            samples.push(Sample { signal, label });
        }
        if samples.len() != count {
            return Err(malformed(1, "sample count does not match header"));
        }

        let mut exemplars: Vec<Option<Vec<C64>>> = vec![None; classes];
        for s in &samples {
            exemplars[s.label].get_or_insert_with(|| s.signal.clone());
        }
        let exemplars: Result<Vec<Vec<C64>>, DataError> = exemplars
            .into_iter()
            .enumerate()
            .map(|(c, e)| e.ok_or_else(|| malformed(1, &format!("class {c} has no samples"))))
            .collect();
        Ok(Self::from_parts(group, classes, samples, exemplars?))
    }
}

fn malformed(line: usize, message: &str) -> DataError {
    DataError::Malformed { line, message: message.to_string() }
}

fn parse_header(header: &str) -> Result<(FiniteAbelianGroup, usize, usize), DataError> {
    let mut tokens = header.split_whitespace();
    if tokens.next() != Some("BNND") || tokens.next() != Some("v1") {
        return Err(malformed(1, "expected 'BNND v1' header"));
    }
    let mut group = None;
    let mut classes = None;
    let mut samples = None;
    for tok in tokens {
        match tok.split_once('=') {
            Some(("group", v)) => group = Some(FiniteAbelianGroup::from_spec(v)?),
            Some(("classes", v)) => {
                classes = v.parse().ok();
            }
            Some(("samples", v)) => {
                samples = v.parse().ok();
            }
            _ => return Err(malformed(1, "unknown header field")),
        }
    }
    match (group, classes, samples) {
        (Some(g), Some(c), Some(s)) => Ok((g, c, s)),
        _ => Err(malformed(1, "missing header field")),
    }
}

/// Generates a dataset of `num_exemplars` orbit classes.
///
/// Exemplar entries are iid standard normal reals. Each class holds the
/// translates of its exemplar under a retained subset of the group:
/// all of it for `subset_fraction = 1.0`, otherwise a random
/// `round(fraction * N)` elements that always include the identity, so
/// the untransformed exemplar is always the first sample of its class.
///
/// With `normalize` set, each exemplar is shifted to zero mean and
/// scaled to unit standard deviation before its orbit is taken.
pub fn generate(
    group: &FiniteAbelianGroup,
    num_exemplars: usize,
    subset_fraction: f64,
    normalize: bool,
    seed: u64,
) -> Result<OrbitDataset, DataError> {
    if num_exemplars == 0 {
        return Err(DataError::InvalidParameter("num_exemplars must be positive".into()));
    }
    if !(subset_fraction > 0.0 && subset_fraction <= 1.0) {
        return Err(DataError::InvalidParameter(format!(
            "subset_fraction must be in (0, 1], got {subset_fraction}"
        )));
    }
    let n = group.order();
    let keep = ((subset_fraction * n as f64).round() as usize).clamp(1, n);

    let mut exemplar_rng = stream_rng(seed, STREAM_EXEMPLARS, 0, 0);
    let mut samples = Vec::with_capacity(num_exemplars * keep);
    let mut exemplars = Vec::with_capacity(num_exemplars);
    for class in 0..num_exemplars {
        let mut x: Vec<C64> = (0..n)
            .map(|_| C64::new(exemplar_rng.sample(StandardNormal), 0.0))
            .collect();
        if normalize {
            normalize_in_place(&mut x);
        }

        let retained: Vec<usize> = if keep == n {
            (0..n).collect()
        } else {
            // Identity plus a random subset of the rest, in ascending
            // order so the exemplar itself always comes first.
            let mut rest: Vec<usize> = (1..n).collect();
            let mut rng = stream_rng(seed, STREAM_SUBSET, class as u64, 0);
            rest.shuffle(&mut rng);
            let mut chosen: Vec<usize> = rest.into_iter().take(keep - 1).collect();
            chosen.push(0);
            chosen.sort_unstable();
            chosen
        };
        for gi in retained {
            let signal = group.act_on_signal(&group.element(gi), &x)?;
            samples.push(Sample { signal, label: class });
        }
        exemplars.push(x);
    }
    Ok(OrbitDataset::from_parts(group.clone(), num_exemplars, samples, exemplars))
}

fn normalize_in_place(x: &mut [C64]) {
    let n = x.len() as f64;
    let mean: f64 = x.iter().map(|v| v.re).sum::<f64>() / n;
    for v in x.iter_mut() {
        v.re -= mean;
    }
    let std = (x.iter().map(|v| v.re * v.re).sum::<f64>() / n).sqrt();
    if std > 1e-12 {
        for v in x.iter_mut() {
            v.re /= std;
        }
    }
}

/// Stratified split into (train, validation).
///
/// The validation set gets `round(val_fraction * len)` samples overall,
/// allocated per class by largest remainder, and no class is ever
/// emptied on the train side. Both halves keep the parent's label
/// space.
pub fn split(
    ds: &OrbitDataset,
    val_fraction: f64,
    seed: u64,
) -> Result<(OrbitDataset, OrbitDataset), DataError> {
    if !(0.0..=1.0).contains(&val_fraction) {
        return Err(DataError::InvalidParameter(format!(
            "val_fraction must be in [0, 1], got {val_fraction}"
        )));
    }
    let total_target = (val_fraction * ds.len() as f64).round() as usize;

    // Largest-remainder allocation, capped so train keeps >= 1 per class.
    let sizes: Vec<usize> = ds.class_indices.iter().map(Vec::len).collect();
    let mut take: Vec<usize> = Vec::with_capacity(ds.classes);
    let mut remainders: Vec<(f64, usize)> = Vec::with_capacity(ds.classes);
    let mut allocated = 0usize;
    for (c, &size) in sizes.iter().enumerate() {
        let ideal = val_fraction * size as f64;
        let base = (ideal.floor() as usize).min(size.saturating_sub(1));
        take.push(base);
        allocated += base;
        remainders.push((ideal - base as f64, c));
    }
    remainders.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    for &(_, c) in &remainders {
        if allocated >= total_target {
            break;
        }
        if take[c] + 1 < sizes[c] {
            take[c] += 1;
            allocated += 1;
        }
    }

    let mut train = Vec::new();
    let mut val = Vec::new();
    for (c, indices) in ds.class_indices.iter().enumerate() {
        let mut shuffled = indices.clone();
        let mut rng = stream_rng(seed, STREAM_SPLIT, c as u64, 0);
        shuffled.shuffle(&mut rng);
        let (to_val, to_train) = shuffled.split_at(take[c]);
        val.extend(to_val.iter().copied());
        train.extend(to_train.iter().copied());
    }
    train.sort_unstable();
    val.sort_unstable();

    let pick = |idx: &[usize]| {
        OrbitDataset::from_parts(
            ds.group.clone(),
            ds.classes,
            idx.iter().map(|&i| ds.samples[i].clone()).collect(),
            ds.exemplars.clone(),
        )
    };
    Ok((pick(&train), pick(&val)))
}

/// Draws one class-balanced batch: `batch_size / per_class` distinct
/// classes chosen uniformly among classes with at least `per_class`
/// samples, then `per_class` samples without replacement from each.
/// Returns sample indices grouped by class.
pub fn sample_batch(
    ds: &OrbitDataset,
    batch_size: usize,
    per_class: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<usize>, DataError> {
    let needed_classes = check_batch_shape(ds, batch_size, per_class)?;
    let eligible: Vec<usize> = (0..ds.classes)
        .filter(|&c| ds.class_indices[c].len() >= per_class)
        .collect();
    let mut chosen = eligible;
    chosen.shuffle(rng);
    chosen.truncate(needed_classes);

    let mut out = Vec::with_capacity(batch_size);
    for c in chosen {
        let mut pool = ds.class_indices[c].clone();
        pool.shuffle(rng);
        out.extend(pool.into_iter().take(per_class));
    }
    Ok(out)
}

fn check_batch_shape(
    ds: &OrbitDataset,
    batch_size: usize,
    per_class: usize,
) -> Result<usize, DataError> {
    if per_class == 0 || batch_size == 0 || batch_size % per_class != 0 {
        return Err(DataError::InvalidParameter(format!(
            "batch_size {batch_size} must be a positive multiple of per_class {per_class}"
        )));
    }
    let needed_classes = batch_size / per_class;
    let eligible = ds
        .class_indices
        .iter()
        .filter(|c| c.len() >= per_class)
        .count();
    if eligible < needed_classes {
        let limiting = ds
            .class_indices
            .iter()
            .enumerate()
            .filter(|(_, idx)| idx.len() < per_class)
            .max_by_key(|(_, idx)| idx.len())
            .map(|(c, _)| c)
            .unwrap_or(0);
        return Err(DataError::InfeasibleBatch {
            needed_classes,
            per_class,
            eligible_classes: eligible,
            limiting_label: limiting,
        });
    }
    Ok(needed_classes)
}

/// Deterministic batch schedule for one epoch: eligible classes are
/// shuffled under the epoch's stream, partitioned into batch-sized
/// groups (remainder classes sit the epoch out), and each batch draws
/// `per_class` samples per class without replacement.
pub fn epoch_batches(
    ds: &OrbitDataset,
    batch_size: usize,
    per_class: usize,
    seed: u64,
    epoch: u64,
) -> Result<Vec<Vec<usize>>, DataError> {
    let needed_classes = check_batch_shape(ds, batch_size, per_class)?;
    let mut eligible: Vec<usize> = (0..ds.classes)
        .filter(|&c| ds.class_indices[c].len() >= per_class)
        .collect();
    let mut shuffle_rng = stream_rng(seed, STREAM_EPOCH_SHUFFLE, epoch, 0);
    eligible.shuffle(&mut shuffle_rng);

    let mut batches = Vec::new();
    for (b, chunk) in eligible.chunks_exact(needed_classes).enumerate() {
        let mut rng = stream_rng(seed, STREAM_EPOCH_DRAW, epoch, b as u64);
        let mut batch = Vec::with_capacity(batch_size);
        for &c in chunk {
            let mut pool = ds.class_indices[c].clone();
            pool.shuffle(&mut rng);
            batch.extend(pool.into_iter().take(per_class));
        }
        batches.push(batch);
    }
    Ok(batches)
}
