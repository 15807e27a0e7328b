//! IDX reader for the MNIST image and label files, plain or gzipped.

use std::fs;
use std::io::Read;
use std::path::Path;

use flate2::read::GzDecoder;
use qfl_core::dataset::{LabeledImage, IMAGE_PIXELS, IMAGE_SIDE};

use crate::error::{CliError, FormatError, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// File contents, inflated when the file starts with the gzip signature.
pub fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = fs::read(path).map_err(|e| CliError::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| CliError::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Cursor<'a> {
    fn error(&self, offset: usize, message: String) -> FormatError {
        FormatError {
            path: self.path.to_path_buf(),
            offset: offset as u64,
            message,
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32, FormatError> {
        let end = self.pos + 4;
        let b = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| self.error(self.bytes.len(), format!("truncated while reading {what}")))?;
        self.pos = end;
        Ok(u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn take(&mut self, len: usize, what: &str) -> Result<&'a [u8], FormatError> {
        let end = self.pos + len;
        if end > self.bytes.len() {
            return Err(self.error(
                self.bytes.len(),
                format!("truncated {what}: expected {len} bytes from offset {}", self.pos),
            ));
        }
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn magic(&mut self, expected: u32) -> Result<(), FormatError> {
        let found = self.u32("magic number")?;
        if found != expected {
            return Err(self.error(0, format!("bad magic: expected {expected:#010x}, found {found:#010x}")));
        }
        Ok(())
    }
}

/// Parses an image file body; returns `(rows, cols, pixels)` with one
/// row-major block of `rows·cols` bytes per image.
pub fn parse_images(bytes: &[u8], path: &Path) -> Result<(usize, usize, Vec<u8>), FormatError> {
    let mut c = Cursor { bytes, pos: 0, path };
    c.magic(IMAGE_MAGIC)?;
    let count = c.u32("image count")? as usize;
    let rows = c.u32("row count")? as usize;
    let cols = c.u32("column count")? as usize;
    let pixels = c.take(count * rows * cols, "pixel data")?;
    Ok((rows, cols, pixels.to_vec()))
}

pub fn parse_labels(bytes: &[u8], path: &Path) -> Result<Vec<u8>, FormatError> {
    let mut c = Cursor { bytes, pos: 0, path };
    c.magic(LABEL_MAGIC)?;
    let count = c.u32("label count")? as usize;
    Ok(c.take(count, "label data")?.to_vec())
}

/// Pairs an image file with its label file.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<Vec<LabeledImage>> {
    let (rows, cols, pixels) = parse_images(&read_maybe_gz(images_path)?, images_path)?;
    let labels = parse_labels(&read_maybe_gz(labels_path)?, labels_path)?;
    if rows != IMAGE_SIDE || cols != IMAGE_SIDE {
        return Err(FormatError {
            path: images_path.to_path_buf(),
            offset: 8,
            message: format!("images are {rows}x{cols}, expected {IMAGE_SIDE}x{IMAGE_SIDE}"),
        }
        .into());
    }
    let count = pixels.len() / IMAGE_PIXELS;
    if count != labels.len() {
        return Err(FormatError {
            path: labels_path.to_path_buf(),
            offset: 4,
            message: format!("{} labels for {count} images", labels.len()),
        }
        .into());
    }
    if let Some(i) = labels.iter().position(|&l| l > 9) {
        return Err(FormatError {
            path: labels_path.to_path_buf(),
            offset: 8 + i as u64,
            message: format!("label {} is not a digit", labels[i]),
        }
        .into());
    }
    pixels
        .chunks_exact(IMAGE_PIXELS)
        .zip(labels)
        .map(|(px, label)| LabeledImage::new(px.to_vec(), label).map_err(CliError::from))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn image_file(count: u32, rows: u32, cols: u32, body: usize) -> Vec<u8> {
        let mut v = Vec::new();
        for w in [IMAGE_MAGIC, count, rows, cols] {
            v.extend_from_slice(&w.to_be_bytes());
        }
        v.extend(std::iter::repeat_n(7u8, body));
        v
    }

    #[test]
    fn parses_header_and_body() {
        let (r, c, px) = parse_images(&image_file(2, 3, 2, 12), Path::new("x")).unwrap();
        assert_eq!((r, c, px.len()), (3, 2, 12));
        let mut labels = LABEL_MAGIC.to_be_bytes().to_vec();
        labels.extend_from_slice(&3u32.to_be_bytes());
        labels.extend_from_slice(&[1, 2, 5]);
        assert_eq!(parse_labels(&labels, Path::new("y")).unwrap(), vec![1, 2, 5]);
    }

    #[test]
    fn wrong_magic_names_both_values() {
        let mut bytes = image_file(1, 1, 1, 1);
        bytes[3] = 0x01;
        let err = parse_images(&bytes, Path::new("x")).unwrap_err();
        assert_eq!(err.offset, 0);
        assert!(
            err.message.contains("0x00000803") && err.message.contains("0x00000801"),
            "{}",
            err.message
        );
    }

    #[test]
    fn truncation_reports_offset() {
        let err = parse_images(&image_file(2, 28, 28, 1000), Path::new("x")).unwrap_err();
        assert_eq!(err.offset, 16 + 1000);
        let err = parse_images(&image_file(2, 28, 28, 0)[..10], Path::new("x")).unwrap_err();
        assert_eq!(err.offset, 10);
    }

    #[test]
    fn gzip_is_detected() {
        use flate2::write::GzEncoder;
        use std::io::Write;
        let dir = tempfile::tempdir().unwrap();
        let plain = image_file(1, 1, 1, 1);
        let mut enc = GzEncoder::new(Vec::new(), flate2::Compression::default());
        enc.write_all(&plain).unwrap();
        let path = dir.path().join("a.gz");
        fs::write(&path, enc.finish().unwrap()).unwrap();
        assert_eq!(read_maybe_gz(&path).unwrap(), plain);
        let path = dir.path().join("b");
        fs::write(&path, &plain).unwrap();
        assert_eq!(read_maybe_gz(&path).unwrap(), plain);
    }
}
