//! In-memory dataset handling: digit filtering, block-average pooling into
//! `[0,1]^U`, stratified subsampling and participant sharding. Parsing the
//! IDX files themselves is left to the IO layer.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const IMAGE_SIDE: usize = 28;
pub const IMAGE_PIXELS: usize = IMAGE_SIDE * IMAGE_SIDE;

/// A 28×28 grayscale digit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledImage {
    pixels: Vec<u8>,
    pub label: u8,
}

impl LabeledImage {
    pub fn new(pixels: Vec<u8>, label: u8) -> Result<Self> {
        if pixels.len() != IMAGE_PIXELS {
            return Err(Error::DimensionMismatch {
                what: "image pixels",
                expected: IMAGE_PIXELS,
                found: pixels.len(),
            });
        }
        if label > 9 {
            return Err(Error::LabelOutOfRange {
                label: label as usize,
                classes: 10,
            });
        }
        Ok(Self { pixels, label })
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }
}

/// An image kept by [`filter_digits`], with its class in the digit set and
/// its position in the unfiltered input.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FilteredImage {
    pub image: LabeledImage,
    pub class_index: usize,
    pub source_index: usize,
}

/// Encoder input: features in `[0,1]^U` and a 0-based class.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSample {
    pub features: Vec<f64>,
    pub class_index: usize,
}

impl FeatureSample {
    pub fn new(features: Vec<f64>, class_index: usize) -> Self {
        Self { features, class_index }
    }
}

/// Keeps images whose label is in `digits`, in input order. The class index
/// is the label's position in `digits`.
pub fn filter_digits(data: &[LabeledImage], digits: &[u8]) -> Result<Vec<FilteredImage>> {
    if digits.is_empty() {
        return Err(Error::Config("empty digit set".into()));
    }
    for (i, d) in digits.iter().enumerate() {
        if *d > 9 {
            return Err(Error::Config(alloc::format!("digit {d} outside 0..=9")));
        }
        if digits[..i].contains(d) {
            return Err(Error::Config(alloc::format!("digit {d} listed twice")));
        }
    }
    let kept: Vec<FilteredImage> = data
        .iter()
        .enumerate()
        .filter_map(|(source_index, image)| {
            digits
                .iter()
                .position(|d| *d == image.label)
                .map(|class_index| FilteredImage {
                    image: image.clone(),
                    class_index,
                    source_index,
                })
        })
        .collect();
    if kept.is_empty() {
        return Err(Error::Config(alloc::format!("no images with digits {digits:?}")));
    }
    Ok(kept)
}

/// Block-pooling grid; both sides must divide 28.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PoolGrid {
    rows: usize,
    cols: usize,
}

impl PoolGrid {
    pub const SUPPORTED: [(usize, usize); 5] = [(2, 2), (2, 4), (4, 4), (4, 7), (7, 7)];

    pub fn new(rows: usize, cols: usize) -> Result<Self> {
        if !Self::SUPPORTED.contains(&(rows, cols)) {
            return Err(Error::Config(alloc::format!(
                "unsupported pooling grid {rows}x{cols}; use one of 2x2, 2x4, 4x4, 4x7, 7x7"
            )));
        }
        Ok(Self { rows, cols })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of features, and so of qubits.
    pub fn features(&self) -> usize {
        self.rows * self.cols
    }
}

/// Mean pixel of each grid cell divided by 255, row-major over the grid.
pub fn pool_features(image: &LabeledImage, grid: PoolGrid) -> Vec<f64> {
    let bh = IMAGE_SIDE / grid.rows;
    let bw = IMAGE_SIDE / grid.cols;
    let mut out = Vec::with_capacity(grid.features());
    for r in 0..grid.rows {
        for c in 0..grid.cols {
            let mut sum: u32 = 0;
            for y in r * bh..(r + 1) * bh {
                for x in c * bw..(c + 1) * bw {
                    sum += image.pixels[y * IMAGE_SIDE + x] as u32;
                }
            }
            let value = sum as f64 / (bh * bw) as f64 / 255.0;
            out.push(value.clamp(0.0, 1.0));
        }
    }
    out
}

/// Chooses at most `cap` positions from `classes` (one class index per
/// item), keeping class proportions: each class gets `⌊cap·n_c/n⌋` and the
/// remaining slots go to the largest fractional remainders, ties to the
/// lower class. Within a class the picks are a seeded shuffle. The returned
/// positions are sorted.
pub fn stratified_subsample(classes: &[usize], cap: usize, seed: u64) -> Vec<usize> {
    let n = classes.len();
    if cap >= n {
        return (0..n).collect();
    }
    let n_classes = classes.iter().copied().max().map_or(0, |m| m + 1);
    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &c) in classes.iter().enumerate() {
        members[c].push(i);
    }
    let mut quota: Vec<usize> = members.iter().map(|m| cap * m.len() / n).collect();
    let mut remainders: Vec<(usize, usize)> = members
        .iter()
        .enumerate()
        .map(|(c, m)| ((cap * m.len()) % n, c))
        .collect();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut left = cap - quota.iter().sum::<usize>();
    for &(_, c) in &remainders {
        if left == 0 {
            break;
        }
        if quota[c] < members[c].len() {
            quota[c] += 1;
            left -= 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = Vec::with_capacity(cap);
    for (c, m) in members.iter_mut().enumerate() {
        m.shuffle(&mut rng);
        picked.extend_from_slice(&m[..quota[c]]);
    }
    picked.sort_unstable();
    picked
}

/// Seeded shuffle of `data` split into `k` shards whose sizes differ by at
/// most one; the larger shards are the lower ids.
pub fn partition_equal<T: Clone>(data: &[T], k: usize, seed: u64) -> Result<Vec<Vec<T>>> {
    if k == 0 {
        return Err(Error::Config("participant count must be at least 1".into()));
    }
    if k > data.len() {
        return Err(Error::Config(alloc::format!(
            "{k} participants but only {} samples",
            data.len()
        )));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let base = data.len() / k;
    let extra = data.len() % k;
    let mut shards = Vec::with_capacity(k);
    let mut start = 0;
    for id in 0..k {
        let len = base + usize::from(id < extra);
        shards.push(order[start..start + len].iter().map(|&i| data[i].clone()).collect());
        start += len;
    }
    Ok(shards)
}

/// Label-skewed split for non-IID experiments: items are ordered by class
/// (stable) and cut into `k` contiguous shards of near-equal size.
pub fn partition_label_skew<T: Clone>(data: &[T], classes: &[usize], k: usize) -> Result<Vec<Vec<T>>> {
    if data.len() != classes.len() {
        return Err(Error::DimensionMismatch {
            what: "class labels",
            expected: data.len(),
            found: classes.len(),
        });
    }
    if k == 0 || k > data.len() {
        return Err(Error::Config(alloc::format!(
            "cannot split {} samples across {k} participants",
            data.len()
        )));
    }
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.sort_by_key(|&i| classes[i]);
    let base = data.len() / k;
    let extra = data.len() % k;
    let mut shards = Vec::with_capacity(k);
    let mut start = 0;
    for id in 0..k {
        let len = base + usize::from(id < extra);
        shards.push(order[start..start + len].iter().map(|&i| data[i].clone()).collect());
        start += len;
    }
    Ok(shards)
}
