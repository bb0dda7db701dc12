// SPDX-License-Identifier: Apache-2.0

//! Labelled binary sequence datasets.
//!
//! CSV datasets use a long layout with header `seq,step,label,x0,...,x{n-1}`:
//! one line per step, steps of a sequence in order, the label repeated on
//! every line of its sequence.

use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::gru::Sequence;

use super::idx::{image_sequence, read_idx_images, read_idx_labels, Presentation};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Example {
    pub input: Sequence,
    pub label: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Dataset {
    pub examples: Vec<Example>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    /// One more than the largest label.
    pub fn n_classes(&self) -> usize {
        self.examples.iter().map(|e| e.label + 1).max().unwrap_or(0)
    }

    /// Common input width, or an error for an empty or mixed-width dataset.
    pub fn width(&self) -> Result<usize> {
        let w = self
            .examples
            .first()
            .ok_or(Error::EmptyDataset)?
            .input
            .width();
        if self.examples.iter().any(|e| e.input.width() != w) {
            return Err(Error::Dataset("sequences have different widths".into()));
        }
        Ok(w)
    }

    pub fn truncate(&mut self, n: usize) {
        self.examples.truncate(n);
    }
}

/// Where a dataset comes from.
#[derive(Clone, Debug, PartialEq)]
pub enum DatasetSource {
    Idx {
        images: PathBuf,
        labels: PathBuf,
        threshold: f64,
        presentation: Presentation,
        limit: Option<usize>,
    },
    Csv {
        path: PathBuf,
        limit: Option<usize>,
    },
}

impl DatasetSource {
    /// IDX pair in `dir`: `{prefix}-images-idx3-ubyte` and `{prefix}-labels-idx1-ubyte`.
    pub fn idx_dir(dir: &Path, prefix: &str, threshold: f64, presentation: Presentation) -> Self {
        Self::Idx {
            images: dir.join(format!("{prefix}-images-idx3-ubyte")),
            labels: dir.join(format!("{prefix}-labels-idx1-ubyte")),
            threshold,
            presentation,
            limit: None,
        }
    }

    pub fn with_limit(mut self, n: Option<usize>) -> Self {
        match &mut self {
            Self::Idx { limit, .. } | Self::Csv { limit, .. } => *limit = n,
        }
        self
    }

    pub fn load(&self) -> Result<Dataset> {
        match self {
            Self::Idx {
                images,
                labels,
                threshold,
                presentation,
                limit,
            } => {
                let imgs = read_idx_images(images)?;
                let labs = read_idx_labels(labels)?;
                if imgs.len() != labs.len() {
                    return Err(Error::Dataset(format!(
                        "{} images but {} labels",
                        imgs.len(),
                        labs.len()
                    )));
                }
                let n = limit.map_or(imgs.len(), |l| l.min(imgs.len()));
                let examples = (0..n)
                    .map(|i| {
                        Ok(Example {
                            input: image_sequence(
                                imgs.image(i),
                                imgs.rows,
                                imgs.cols,
                                *presentation,
                                *threshold,
                            )?,
                            label: labs[i] as usize,
                        })
                    })
                    .collect::<Result<_>>()?;
                Ok(Dataset { examples })
            }
            Self::Csv { path, limit } => {
                let mut ds = read_csv_sequences(std::fs::File::open(path)?)?;
                if let Some(l) = limit {
                    ds.truncate(*l);
                }
                Ok(ds)
            }
        }
    }
}

fn bit(field: &str, line: u64) -> Result<bool> {
    match field.trim() {
        "0" => Ok(false),
        "1" => Ok(true),
        v => Err(Error::Dataset(format!(
            "line {line}: input bit {v:?} is not 0 or 1"
        ))),
    }
}

fn int(field: &str, name: &str, line: u64) -> Result<usize> {
    field
        .trim()
        .parse()
        .map_err(|_| Error::Dataset(format!("line {line}: bad {name} {field:?}")))
}

pub fn read_csv_sequences<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let width = headers.len().saturating_sub(3);
    let expected: Vec<String> = ["seq", "step", "label"]
        .iter()
        .map(|s| s.to_string())
        .chain((0..width).map(|i| format!("x{i}")))
        .collect();
    if width == 0 || headers.iter().ne(expected.iter().map(String::as_str)) {
        return Err(Error::Dataset(format!(
            "header must be seq,step,label,x0..x{{n-1}}, got {:?}",
            headers.iter().collect::<Vec<_>>()
        )));
    }

    let mut examples: Vec<Example> = Vec::new();
    let mut current: Option<(usize, usize, Vec<bool>)> = None;
    let mut finish = |cur: Option<(usize, usize, Vec<bool>)>| -> Result<()> {
        if let Some((_, label, bits)) = cur {
            examples.push(Example {
                input: Sequence::new(width, bits)?,
                label,
            });
        }
        Ok(())
    };
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        let seq = int(&rec[0], "seq", line)?;
        let step = int(&rec[1], "step", line)?;
        let label = int(&rec[2], "label", line)?;
        let new_seq = current.as_ref().is_none_or(|(s, _, _)| *s != seq);
        if new_seq {
            finish(current.take())?;
            current = Some((seq, label, Vec::new()));
        }
        let (_, l, bits) = current.as_mut().expect("set above");
        if *l != label {
            return Err(Error::Dataset(format!(
                "line {line}: label changes inside sequence {seq}"
            )));
        }
        if step != bits.len() / width {
            return Err(Error::Dataset(format!(
                "line {line}: expected step {} of sequence {seq}, got {step}",
                bits.len() / width
            )));
        }
        for f in rec.iter().skip(3) {
            bits.push(bit(f, line)?);
        }
    }
    finish(current)?;
    if examples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(Dataset { examples })
}

pub fn write_csv_sequences<W: Write>(writer: W, data: &Dataset) -> Result<()> {
    let width = data.width()?;
    let mut w = csv::Writer::from_writer(writer);
    let mut header = vec!["seq".to_string(), "step".into(), "label".into()];
    header.extend((0..width).map(|i| format!("x{i}")));
    w.write_record(&header)?;
    for (s, ex) in data.examples.iter().enumerate() {
        for (t, x) in ex.input.iter().enumerate() {
            let mut row = vec![s.to_string(), t.to_string(), ex.label.to_string()];
            row.extend(x.iter().map(|&b| (b as u8).to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}
