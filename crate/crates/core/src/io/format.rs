//! Feature file formats.
//!
//! Text: one sample per line, `label,v1,...,vd`. Lines starting with `#` and
//! blank lines are skipped. Values are written with 17 significant digits.
//!
//! Binary (all integers little-endian):
//!
//! ```text
//! offset  size              field
//! 0       8                 magic "GFDENSE1"
//! 8       8                 n (u64)
//! 16      8                 d (u64)
//! 24      4                 label_width (u32)
//! 28      n * label_width   labels, ASCII, zero-padded
//! ...     n * d * 8         values, f64, row-major
//! ```

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::features::LabeledFeatures;

pub const MAGIC: &[u8; 8] = b"GFDENSE1";
const HEADER_LEN: usize = 28;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FeatureFileHeader {
    pub n: u64,
    pub d: u64,
    pub label_width: u32,
}

impl FeatureFileHeader {
    pub fn to_bytes(&self) -> [u8; HEADER_LEN] {
        let mut out = [0u8; HEADER_LEN];
        out[..8].copy_from_slice(MAGIC);
        out[8..16].copy_from_slice(&self.n.to_le_bytes());
        out[16..24].copy_from_slice(&self.d.to_le_bytes());
        out[24..28].copy_from_slice(&self.label_width.to_le_bytes());
        out
    }

    fn payload_len(&self) -> Option<u64> {
        let labels = self.n.checked_mul(self.label_width as u64)?;
        let values = self.n.checked_mul(self.d)?.checked_mul(8)?;
        labels.checked_add(values)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FileFormat {
    Text,
    Bin,
}

impl std::str::FromStr for FileFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "text" => Ok(FileFormat::Text),
            "bin" => Ok(FileFormat::Bin),
            other => Err(Error::Config(format!("unknown format {other:?} (expected text or bin)"))),
        }
    }
}

impl FileFormat {
    /// `.bin` means binary, anything else text.
    pub fn from_extension(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some("bin") => FileFormat::Bin,
            _ => FileFormat::Text,
        }
    }
}

pub fn load_features(path: &Path, format: FileFormat) -> Result<LabeledFeatures> {
    match format {
        FileFormat::Text => load_features_text(path),
        FileFormat::Bin => load_features_binary(path),
    }
}

pub fn save_features(path: &Path, data: &LabeledFeatures, format: FileFormat) -> Result<()> {
    match format {
        FileFormat::Text => save_features_text(path, data),
        FileFormat::Bin => save_features_binary(path, data),
    }
}

pub fn load_features_text(path: &Path) -> Result<LabeledFeatures> {
    let reader = BufReader::new(fs::File::open(path)?);
    let parse_err = |line: usize, msg: String| Error::ParseError { path: path.to_path_buf(), line, msg };

    let mut labels = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    let mut d: Option<usize> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut fields = trimmed.split(',');
        let label = fields.next().unwrap_or_default().trim();
        if label.is_empty() {
            return Err(parse_err(lineno, "empty label".into()));
        }
        let start = values.len();
        for field in fields {
            let v = field
                .trim()
                .parse::<f64>()
                .map_err(|e| parse_err(lineno, format!("bad value {:?}: {e}", field.trim())))?;
            values.push(v);
        }
        let found = values.len() - start;
        match d {
            None if found == 0 => return Err(parse_err(lineno, "no feature values".into())),
            None => d = Some(found),
            Some(expected) if expected != found => {
                return Err(Error::InconsistentDimension { path: path.to_path_buf(), line: lineno, expected, found })
            }
            Some(_) => {}
        }
        labels.push(label.to_string());
    }
    let d = d.ok_or_else(|| parse_err(0, "no samples in file".into()))?;
    let features = DMatrix::from_row_slice(labels.len(), d, &values);
    LabeledFeatures::new(features, labels)
}

fn check_text_label(label: &str) -> Result<()> {
    if label.is_empty() || label.contains([',', '\n', '\r']) || label.starts_with('#') || label.trim() != label {
        return Err(Error::InvalidFile(format!("label {label:?} cannot be written to the text format")));
    }
    Ok(())
}

pub fn save_features_text(path: &Path, data: &LabeledFeatures) -> Result<()> {
    let mut out = BufWriter::new(fs::File::create(path)?);
    for (label, row) in data.labels().iter().zip(data.features().row_iter()) {
        check_text_label(label)?;
        out.write_all(label.as_bytes())?;
        for v in row.iter() {
            write!(out, ",{v:.16e}")?;
        }
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_features_binary(path: &Path) -> Result<LabeledFeatures> {
    let bytes = fs::read(path)?;
    let truncated = |msg: String| Error::TruncatedFile { path: path.to_path_buf(), msg };
    if bytes.len() < MAGIC.len() || &bytes[..8] != MAGIC {
        return Err(Error::BadMagic(path.to_path_buf()));
    }
    if bytes.len() < HEADER_LEN {
        return Err(truncated(format!("header needs {HEADER_LEN} bytes, file has {}", bytes.len())));
    }
    let header = FeatureFileHeader {
        n: u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")),
        d: u64::from_le_bytes(bytes[16..24].try_into().expect("8 bytes")),
        label_width: u32::from_le_bytes(bytes[24..28].try_into().expect("4 bytes")),
    };
    let payload = &bytes[HEADER_LEN..];
    let expected =
        header.payload_len().ok_or_else(|| Error::InvalidFile(format!("{}: header sizes overflow", path.display())))?;
    if (payload.len() as u64) < expected {
        return Err(truncated(format!("payload has {} bytes, header implies {expected}", payload.len())));
    }
    if payload.len() as u64 > expected {
        return Err(Error::InvalidFile(format!(
            "{}: {} trailing bytes after payload",
            path.display(),
            payload.len() as u64 - expected
        )));
    }

    let n = header.n as usize;
    let d = header.d as usize;
    let width = header.label_width as usize;
    let (label_bytes, value_bytes) = payload.split_at(n * width);
    let labels = label_bytes
        .chunks(width.max(1))
        .take(n)
        .map(|chunk| {
            let chunk = if width == 0 { &[][..] } else { chunk };
            let end = chunk.iter().position(|&b| b == 0).unwrap_or(chunk.len());
            std::str::from_utf8(&chunk[..end])
                .map(str::to_owned)
                .map_err(|_| Error::InvalidFile(format!("{}: label is not ASCII", path.display())))
        })
        .collect::<Result<Vec<_>>>()?;
    let labels = if width == 0 { vec![String::new(); n] } else { labels };
    let values: Vec<f64> =
        value_bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
    LabeledFeatures::new(DMatrix::from_row_slice(n, d, &values), labels)
}

pub fn save_features_binary(path: &Path, data: &LabeledFeatures) -> Result<()> {
    if let Some(bad) = data.labels().iter().find(|l| !l.is_ascii() || l.contains('\0')) {
        return Err(Error::InvalidFile(format!("label {bad:?} is not NUL-free ASCII")));
    }
    let width = data.labels().iter().map(String::len).max().unwrap_or(0);
    let header = FeatureFileHeader {
        n: data.n() as u64,
        d: data.d() as u64,
        label_width: u32::try_from(width).map_err(|_| Error::InvalidFile("label longer than u32::MAX bytes".into()))?,
    };
    let mut out = BufWriter::new(fs::File::create(path)?);
    out.write_all(&header.to_bytes())?;
    let pad = vec![0u8; width];
    for label in data.labels() {
        out.write_all(label.as_bytes())?;
        out.write_all(&pad[label.len()..])?;
    }
    for row in data.features().row_iter() {
        for v in row.iter() {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}
