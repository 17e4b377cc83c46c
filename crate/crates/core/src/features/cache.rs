//! Feature cache files.
//!
//! Binary (`EFM1`), all integers little-endian:
//!
//! ```text
//! magic      4 bytes  "EFM1"
//! width      u8       4 (f32 values) or 8 (f64 values)
//! rows       u64
//! dim        u64
//! backbone   u32 length + UTF-8 bytes
//! per row    u32 length + UTF-8 image id, u8 class code
//! values     rows * dim floats, row-major
//! ```
//!
//! Values are written as f32 whenever that is lossless, which is always the
//! case for CNN outputs. Text caches are CSV with header
//! `image_id,label,f0,...,f{d-1}`.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::{FeatureError, FeatureMatrix};
use crate::dataset::ClassLabel;
use crate::fsutil::write_atomic;

pub const BINARY_MAGIC: &[u8; 4] = b"EFM1";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> FeatureError + '_ {
    move |source| FeatureError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn format_err(path: &Path, reason: impl Into<String>) -> FeatureError {
    FeatureError::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn fits_f32(values: &Array2<f64>) -> bool {
    values.iter().all(|&v| (v as f32) as f64 == v)
}

/// Writes the binary cache atomically.
pub fn save_features(m: &FeatureMatrix, path: &Path) -> Result<(), FeatureError> {
    let narrow = fits_f32(m.values());
    write_atomic(path, |w| {
        w.write_all(BINARY_MAGIC)?;
        w.write_all(&[if narrow { 4 } else { 8 }])?;
        w.write_all(&(m.len() as u64).to_le_bytes())?;
        w.write_all(&(m.dim() as u64).to_le_bytes())?;
        w.write_all(&(m.backbone().len() as u32).to_le_bytes())?;
        w.write_all(m.backbone().as_bytes())?;
        for (id, label) in m.ids().iter().zip(m.labels()) {
            w.write_all(&(id.len() as u32).to_le_bytes())?;
            w.write_all(id.as_bytes())?;
            w.write_all(&[label.code()])?;
        }
        if narrow {
            for &v in m.values() {
                w.write_all(&(v as f32).to_le_bytes())?;
            }
        } else {
            for &v in m.values() {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    })
    .map_err(io_err(path))
}

struct Reader<'a> {
    path: &'a Path,
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FeatureError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let out = &self.buf[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(format_err(self.path, format!("truncated at byte {}", self.pos))),
        }
    }

    fn u8(&mut self) -> Result<u8, FeatureError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, FeatureError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, FeatureError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn string(&mut self) -> Result<String, FeatureError> {
        let len = self.u32()? as usize;
        let bytes = self.take(len)?;
        String::from_utf8(bytes.to_vec()).map_err(|_| format_err(self.path, "invalid UTF-8 string"))
    }
}

/// Reads a binary cache written by [`save_features`].
pub fn load_features(path: &Path) -> Result<FeatureMatrix, FeatureError> {
    let buf = fs::read(path).map_err(io_err(path))?;
    let mut r = Reader { path, buf: &buf, pos: 0 };
    if r.take(4).ok() != Some(&BINARY_MAGIC[..]) {
        return Err(format_err(path, "bad magic"));
    }
    let width = r.u8()?;
    if width != 4 && width != 8 {
        return Err(format_err(path, format!("unsupported value width {width}")));
    }
    let rows = r.u64()? as usize;
    let dim = r.u64()? as usize;
    let backbone = r.string()?;
    // bound the allocation by what the file can possibly hold
    if rows > buf.len() {
        return Err(format_err(path, "row count exceeds file size"));
    }
    let mut ids = Vec::with_capacity(rows);
    let mut labels = Vec::with_capacity(rows);
    for _ in 0..rows {
        ids.push(r.string()?);
        let code = r.u8()?;
        labels.push(
            ClassLabel::from_code(code).ok_or_else(|| format_err(path, format!("bad class code {code}")))?,
        );
    }
    let count = rows
        .checked_mul(dim)
        .ok_or_else(|| format_err(path, "dimensions overflow"))?;
    let bytes = r.take(
        count
            .checked_mul(width as usize)
            .ok_or_else(|| format_err(path, "dimensions overflow"))?,
    )?;
    if r.pos != buf.len() {
        return Err(format_err(path, "trailing bytes after values"));
    }
    let flat: Vec<f64> = if width == 4 {
        bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
            .collect()
    } else {
        bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect()
    };
    let values = Array2::from_shape_vec((rows, dim), flat).map_err(|e| format_err(path, e.to_string()))?;
    FeatureMatrix::new(backbone, ids, labels, values)
}

/// Writes the CSV cache atomically. Values use the shortest round-trip decimal form.
pub fn save_features_csv(m: &FeatureMatrix, path: &Path) -> Result<(), FeatureError> {
    write_atomic(path, |w| {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["image_id".to_string(), "label".to_string()];
        header.extend((0..m.dim()).map(|j| format!("f{j}")));
        out.write_record(&header)?;
        for i in 0..m.len() {
            let mut record = vec![m.ids()[i].clone(), m.labels()[i].code().to_string()];
            record.extend(m.row(i).iter().map(|v| v.to_string()));
            out.write_record(&record)?;
        }
        out.flush()?;
        Ok(())
    })
    .map_err(io_err(path))
}

/// Reads a CSV cache. The backbone name is not stored in the CSV and is supplied by the caller.
pub fn load_features_csv(path: &Path, backbone: &str) -> Result<FeatureMatrix, FeatureError> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| format_err(path, e.to_string()))?;
    let header = reader.headers().map_err(|e| format_err(path, e.to_string()))?.clone();
    if header.len() < 2 || &header[0] != "image_id" || &header[1] != "label" {
        return Err(format_err(path, "header must start with `image_id,label`"));
    }
    for (j, name) in header.iter().skip(2).enumerate() {
        if name != format!("f{j}") {
            return Err(format_err(path, format!("unexpected column `{name}`")));
        }
    }
    let dim = header.len() - 2;
    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut flat = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| format_err(path, e.to_string()))?;
        if record.len() != dim + 2 {
            return Err(FeatureError::DimMismatch {
                expected: dim,
                found: record.len().saturating_sub(2),
                context: format!("row {} of {}", ids.len() + 1, path.display()),
            });
        }
        ids.push(record[0].to_string());
        let label: ClassLabel = record[1].parse().map_err(|e: String| format_err(path, e))?;
        labels.push(label);
        for field in record.iter().skip(2) {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| format_err(path, format!("bad number `{field}`")))?;
            flat.push(v);
        }
    }
    let values = Array2::from_shape_vec((ids.len(), dim), flat).map_err(|e| format_err(path, e.to_string()))?;
    FeatureMatrix::new(backbone, ids, labels, values)
}
