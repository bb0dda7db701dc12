// SPDX-License-Identifier: Apache-2.0

//! IDX image and label files, and their presentation as binary sequences.

use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::gru::Sequence;

const IMAGES_MAGIC: u32 = 0x0803;
const LABELS_MAGIC: u32 = 0x0801;

/// A stack of 8-bit grayscale images.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IdxImages {
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    pub fn len(&self) -> usize {
        self.pixels.len() / (self.rows * self.cols).max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.rows * self.cols;
        &self.pixels[i * n..(i + 1) * n]
    }
}

fn idx_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Idx {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().expect("4 bytes"))
}

fn parse(path: &Path, bytes: &[u8], magic: u32, dims: usize) -> Result<(Vec<usize>, usize)> {
    let header = 4 + 4 * dims;
    if bytes.len() < header {
        return Err(idx_err(path, "truncated header"));
    }
    let found = be_u32(bytes, 0);
    if found != magic {
        return Err(idx_err(
            path,
            format!("magic {found:#010x}, expected {magic:#010x}"),
        ));
    }
    let shape: Vec<usize> = (0..dims)
        .map(|d| be_u32(bytes, 4 + 4 * d) as usize)
        .collect();
    let body: usize = shape.iter().product();
    if bytes.len() != header + body {
        return Err(idx_err(
            path,
            format!("{} data bytes for shape {shape:?}", bytes.len() - header),
        ));
    }
    Ok((shape, header))
}

pub fn read_idx_images(path: &Path) -> Result<IdxImages> {
    let bytes = std::fs::read(path)?;
    let (shape, header) = parse(path, &bytes, IMAGES_MAGIC, 3)?;
    Ok(IdxImages {
        rows: shape[1],
        cols: shape[2],
        pixels: bytes[header..].to_vec(),
    })
}

pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = std::fs::read(path)?;
    let (_, header) = parse(path, &bytes, LABELS_MAGIC, 1)?;
    Ok(bytes[header..].to_vec())
}

pub fn write_idx_images(path: &Path, images: &IdxImages) -> Result<()> {
    let mut bytes = Vec::with_capacity(16 + images.pixels.len());
    for v in [
        IMAGES_MAGIC,
        images.len() as u32,
        images.rows as u32,
        images.cols as u32,
    ] {
        bytes.extend_from_slice(&v.to_be_bytes());
    }
    bytes.extend_from_slice(&images.pixels);
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut bytes = Vec::with_capacity(8 + labels.len());
    bytes.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    bytes.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    bytes.extend_from_slice(labels);
    std::fs::write(path, bytes)?;
    Ok(())
}

/// How an image is unrolled into a sequence.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Presentation {
    /// One pixel per step, row-major.
    #[default]
    PixelStream,
    /// One image row per step.
    Rows,
}

impl FromStr for Presentation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pixel" | "pixel-stream" => Ok(Self::PixelStream),
            "row" | "rows" => Ok(Self::Rows),
            _ => Err(Error::Config(format!(
                "unknown presentation {s:?} (expected pixel or row)"
            ))),
        }
    }
}

/// A pixel is on when `pixel / 255 >= threshold`.
pub fn binarize(pixel: u8, threshold: f64) -> bool {
    pixel as f64 / 255.0 >= threshold
}

pub fn image_sequence(
    image: &[u8],
    rows: usize,
    cols: usize,
    presentation: Presentation,
    threshold: f64,
) -> Result<Sequence> {
    if image.len() != rows * cols {
        return Err(Error::DimMismatch(format!(
            "{} pixels for a {rows}x{cols} image",
            image.len()
        )));
    }
    let bits = image.iter().map(|&p| binarize(p, threshold)).collect();
    let width = match presentation {
        Presentation::PixelStream => 1,
        Presentation::Rows => cols,
    };
    Sequence::new(width, bits)
}
