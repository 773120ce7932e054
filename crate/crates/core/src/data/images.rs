use std::fs;
use std::path::Path;

use super::{io_err, read_label_file, DataError, Dataset, RawObject};
use crate::filtration::GreyImage;

const IDX_IMAGES: u32 = 0x0803;
const IDX_LABELS: u32 = 0x0801;

fn read_bytes(path: &Path) -> Result<Vec<u8>, DataError> {
    if !path.exists() {
        return Err(DataError::MissingFile(path.to_path_buf()));
    }
    fs::read(path).map_err(|e| io_err(path, e))
}

fn be_u32(bytes: &[u8], at: usize) -> Option<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

fn format_err(path: &Path, reason: String) -> DataError {
    DataError::Format {
        path: path.to_path_buf(),
        reason,
    }
}

/// Decodes an IDX image file, keeping at most `limit` images.
pub fn read_idx_images(
    path: &Path,
    bytes: &[u8],
    limit: usize,
) -> Result<Vec<GreyImage>, DataError> {
    let header = |at| be_u32(bytes, at).ok_or_else(|| format_err(path, "truncated header".into()));
    let magic = header(0)?;
    if magic != IDX_IMAGES {
        return Err(format_err(
            path,
            format!("magic {magic:#06x}, expected {IDX_IMAGES:#06x}"),
        ));
    }
    let (n, rows, cols) = (
        header(4)? as usize,
        header(8)? as usize,
        header(12)? as usize,
    );
    let take = n.min(limit);
    let size = rows * cols;
    let need = 16 + take * size;
    if bytes.len() < need {
        return Err(format_err(
            path,
            format!(
                "truncated: {} bytes, need {need} for {take} images",
                bytes.len()
            ),
        ));
    }
    (0..take)
        .map(|i| {
            let px = &bytes[16 + i * size..16 + (i + 1) * size];
            GreyImage::from_u8(cols, rows, px).map_err(|e| format_err(path, e.to_string()))
        })
        .collect()
}

/// Decodes an IDX label file, keeping at most `limit` labels.
pub fn read_idx_labels(path: &Path, bytes: &[u8], limit: usize) -> Result<Vec<u8>, DataError> {
    let header = |at| be_u32(bytes, at).ok_or_else(|| format_err(path, "truncated header".into()));
    let magic = header(0)?;
    if magic != IDX_LABELS {
        return Err(format_err(
            path,
            format!("magic {magic:#06x}, expected {IDX_LABELS:#06x}"),
        ));
    }
    let take = (header(4)? as usize).min(limit);
    bytes
        .get(8..8 + take)
        .map(<[u8]>::to_vec)
        .ok_or_else(|| format_err(path, format!("truncated: need {take} labels")))
}

/// Loads an IDX image/label file pair.
pub fn load_idx(images: &Path, labels: &Path, limit: usize) -> Result<Dataset, DataError> {
    let imgs = read_idx_images(images, &read_bytes(images)?, limit)?;
    let labs = read_idx_labels(labels, &read_bytes(labels)?, limit)?;
    if imgs.len() != labs.len() {
        return Err(format_err(
            labels,
            format!("{} labels for {} images", labs.len(), imgs.len()),
        ));
    }
    let ids = (0..imgs.len()).map(|i| i.to_string()).collect();
    let raw = labs.iter().map(|l| l.to_string()).collect();
    Ok(Dataset::from_raw_labels(
        ids,
        imgs.into_iter().map(RawObject::Image).collect(),
        raw,
    ))
}

/// Loads an IDX image file whose labels sit next to it under the MNIST
/// naming scheme (`*-images-idx3-ubyte` / `*-labels-idx1-ubyte`).
pub fn load_idx_images(images: &Path, limit: usize) -> Result<Dataset, DataError> {
    let name = images
        .file_name()
        .and_then(|n| n.to_str())
        .filter(|n| n.contains("images-idx3"))
        .ok_or_else(|| format_err(images, "file name does not contain \"images-idx3\"".into()))?;
    let labels = images.with_file_name(name.replace("images-idx3", "labels-idx1"));
    load_idx(images, &labels, limit)
}

/// Parses a binary (P5) or ASCII (P2) PGM with `maxval < 256`.
pub fn parse_pgm(path: &Path, bytes: &[u8]) -> Result<GreyImage, DataError> {
    // Header tokens, skipping comments.
    let mut pos = 0;
    let mut tokens = Vec::new();
    while tokens.len() < 4 {
        while pos < bytes.len() && (bytes[pos].is_ascii_whitespace() || bytes[pos] == b'#') {
            if bytes[pos] == b'#' {
                while pos < bytes.len() && bytes[pos] != b'\n' {
                    pos += 1;
                }
            } else {
                pos += 1;
            }
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(format_err(path, "truncated header".into()));
        }
        tokens.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    let num = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| format_err(path, format!("bad header field {s:?}")))
    };
    let (w, h, maxval) = (num(&tokens[1])?, num(&tokens[2])?, num(&tokens[3])?);
    if maxval == 0 || maxval > 255 {
        return Err(format_err(path, format!("maxval {maxval} not in 1..=255")));
    }
    let scale = |v: usize| v as f64 / maxval as f64;
    let values: Vec<f64> = match tokens[0].as_str() {
        "P5" => {
            let data = bytes
                .get(pos + 1..pos + 1 + w * h)
                .ok_or_else(|| format_err(path, "truncated pixel data".into()))?;
            data.iter().map(|&b| scale(b as usize)).collect()
        }
        "P2" => {
            let text = String::from_utf8_lossy(&bytes[pos..]);
            let vals = text
                .split_ascii_whitespace()
                .map(num)
                .collect::<Result<Vec<_>, _>>()?;
            if vals.len() != w * h {
                return Err(format_err(
                    path,
                    format!("{} pixels, expected {}", vals.len(), w * h),
                ));
            }
            vals.into_iter().map(scale).collect()
        }
        m => return Err(format_err(path, format!("unsupported magic {m:?}"))),
    };
    GreyImage::new(w, h, values).map_err(|e| format_err(path, e.to_string()))
}

/// Loads a PGM directory (see the module docs for the layout).
pub fn load_pgm_dataset(dir: &Path) -> Result<Dataset, DataError> {
    let entries = read_label_file(&dir.join("labels.txt"))?;
    if entries.is_empty() {
        return Err(DataError::Empty);
    }
    let mut ids = Vec::new();
    let mut objects = Vec::new();
    let mut raw = Vec::new();
    for (name, label) in entries {
        let path = dir.join(format!("{name}.pgm"));
        objects.push(RawObject::Image(parse_pgm(&path, &read_bytes(&path)?)?));
        ids.push(name);
        raw.push(label);
    }
    Ok(Dataset::from_raw_labels(ids, objects, raw))
}
