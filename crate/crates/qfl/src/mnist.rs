//! Locating and loading the four MNIST files inside a data directory.

use std::path::{Path, PathBuf};

use qfl_core::dataset::LabeledImage;
use qfl_core::Task;

use crate::error::{CliError, Result};
use crate::idx::load_idx;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    fn prefix(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "t10k",
        }
    }

    /// Item count of the published files.
    pub fn official_size(self) -> usize {
        match self {
            Split::Train => 60_000,
            Split::Test => 10_000,
        }
    }
}

/// Filtered `(train, test)` counts of the published files for `task`.
pub fn expected_counts(task: Task) -> (usize, usize) {
    match task {
        Task::Binary => (11_379, 1_924),
        Task::Ternary => (19_138, 3_173),
    }
}

fn find(dir: &Path, prefix: &str, kind: &str, idx: &str) -> Result<PathBuf> {
    let stems = [
        format!("{prefix}-{kind}-{idx}-ubyte"),
        format!("{prefix}-{kind}.{idx}-ubyte"),
    ];
    for stem in &stems {
        for name in [stem.clone(), format!("{stem}.gz")] {
            let path = dir.join(name);
            if path.is_file() {
                return Ok(path);
            }
        }
    }
    Err(CliError::Data(format!(
        "no {prefix} {kind} file ({}[.gz]) in {}",
        stems[0],
        dir.display()
    )))
}

/// `(images, labels)` paths for `split`.
pub fn locate(dir: &Path, split: Split) -> Result<(PathBuf, PathBuf)> {
    Ok((
        find(dir, split.prefix(), "images", "idx3")?,
        find(dir, split.prefix(), "labels", "idx1")?,
    ))
}

pub fn load_split(dir: &Path, split: Split) -> Result<Vec<LabeledImage>> {
    let (images, labels) = locate(dir, split)?;
    log::debug!("loading {} and {}", images.display(), labels.display());
    load_idx(&images, &labels)
}
