//! Dataset ingestion: numeric CSV matrices and MNIST IDX files downsampled
//! to 7x7.

use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Load a rectangular numeric CSV as a rows-are-samples matrix.
pub fn load_csv<P: AsRef<Path>>(path: P, has_header: bool) -> Result<Array2<f64>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_path(path.as_ref())
        .map_err(csv_error)?;

    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(csv_error)?;
        let line = record
            .position()
            .map(|p| p.line())
            .unwrap_or(rows.len() as u64 + 1);
        let mut row = Vec::with_capacity(record.len());
        for field in record.iter() {
            let value: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("not a number: {field:?}"),
            })?;
            row.push(value);
        }
        if row.is_empty() {
            return Err(Error::Parse {
                line,
                msg: "empty row".into(),
            });
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Empty("CSV has no data rows"));
    }
    let d = rows[0].len();
    let n = rows.len();
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    Array2::from_shape_vec((n, d), flat)
        .map_err(|e| Error::Format(format!("CSV rows are not rectangular: {e}")))
}

fn csv_error(err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    match err.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        csv::ErrorKind::UnequalLengths { expected_len, len, .. } => Error::Parse {
            line,
            msg: format!("ragged row: expected {expected_len} fields, found {len}"),
        },
        other => Error::Parse {
            line,
            msg: format!("{other:?}"),
        },
    }
}

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn be_u32(bytes: &[u8], offset: usize, what: &'static str) -> Result<u32> {
    let slice = bytes
        .get(offset..offset + 4)
        .ok_or_else(|| Error::Format(format!("{what}: truncated header")))?;
    Ok(u32::from_be_bytes(slice.try_into().expect("4-byte slice")))
}

/// Load MNIST images and labels (IDX layout, big-endian), keep digits in
/// `digit_filter`, rescale pixels to [0,1] and downsample each 28x28 image to
/// 7x7 by 4x4 average pooling, flattened row-major to 49 columns.
pub fn load_mnist_7x7<P: AsRef<Path>>(
    images_path: P,
    labels_path: P,
    digit_filter: &[u8],
) -> Result<Array2<f64>> {
    let images = std::fs::read(images_path.as_ref())?;
    let labels = std::fs::read(labels_path.as_ref())?;

    if be_u32(&images, 0, "images")? != IDX_IMAGES_MAGIC {
        return Err(Error::Format("images: bad IDX magic number".into()));
    }
    if be_u32(&labels, 0, "labels")? != IDX_LABELS_MAGIC {
        return Err(Error::Format("labels: bad IDX magic number".into()));
    }
    let count = be_u32(&images, 4, "images")? as usize;
    let rows = be_u32(&images, 8, "images")? as usize;
    let cols = be_u32(&images, 12, "images")? as usize;
    let label_count = be_u32(&labels, 4, "labels")? as usize;
    if count != label_count {
        return Err(Error::Format(format!(
            "image count {count} does not match label count {label_count}"
        )));
    }
    if rows != 28 || cols != 28 {
        return Err(Error::Format(format!(
            "expected 28x28 images, got {rows}x{cols}"
        )));
    }
    let pixels = &images
        .get(16..16 + count * 784)
        .ok_or_else(|| Error::Format("images: truncated pixel data".into()))?;
    let label_bytes = &labels
        .get(8..8 + count)
        .ok_or_else(|| Error::Format("labels: truncated label data".into()))?;

    let keep: Vec<usize> = label_bytes
        .iter()
        .enumerate()
        .filter(|(_, l)| digit_filter.contains(l))
        .map(|(i, _)| i)
        .collect();

    let mut out = Array2::zeros((keep.len(), 49));
    for (dst, &src) in keep.iter().enumerate() {
        let img = &pixels[src * 784..(src + 1) * 784];
        for br in 0..7 {
            for bc in 0..7 {
                let mut sum = 0u32;
                for r in 0..4 {
                    for c in 0..4 {
                        sum += img[(br * 4 + r) * 28 + (bc * 4 + c)] as u32;
                    }
                }
                out[[dst, br * 7 + bc]] = sum as f64 / (16.0 * 255.0);
            }
        }
    }
    Ok(out)
}
