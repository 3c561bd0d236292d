//! Patchset files.
//!
//! Binary part, little-endian: `PSET`, `u32` version, `u32` patch count `N`,
//! `u16` channels, `u16` height, `u16` width, then `N` records of `C·H·W`
//! `f32` pixels. Metadata lives in a sidecar CSV (`<path>.index.csv`) with
//! header `record,scan_id,lesion_id,label,augmented_from`, one row per record.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{CandidateSet, Label, Patch};
use crate::binio::{put_f32s, Reader};
use crate::nn::Tensor;
use crate::{Error, Result};

pub const PSET_MAGIC: &[u8; 4] = b"PSET";
pub const PSET_VERSION: u32 = 1;
const COUNT_OFFSET: u64 = 8;

#[derive(Debug, Serialize, Deserialize)]
struct IndexRow {
    record: usize,
    scan_id: String,
    lesion_id: String,
    label: u8,
    augmented_from: String,
}

/// Sidecar index path for a patchset file.
pub fn index_path(path: &Path) -> PathBuf {
    let mut s = OsString::from(path.as_os_str());
    s.push(".index.csv");
    PathBuf::from(s)
}

pub fn save_patchset(set: &CandidateSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let [c, h, w] = set.patch_shape().unwrap_or([0, 0, 0]);
    let dim = |d: usize| {
        u16::try_from(d)
            .map_err(|_| Error::Config(format!("patch dimension {d} does not fit in u16")))
    };
    let mut out = Vec::with_capacity(18 + set.len() * c * h * w * 4);
    out.extend_from_slice(PSET_MAGIC);
    out.extend_from_slice(&PSET_VERSION.to_le_bytes());
    let n = u32::try_from(set.len())
        .map_err(|_| Error::Config("too many patches for a patchset".into()))?;
    out.extend_from_slice(&n.to_le_bytes());
    for d in [c, h, w] {
        out.extend_from_slice(&dim(d)?.to_le_bytes());
    }
    for p in set.patches() {
        put_f32s(&mut out, p.pixels.data());
    }

    let mut index = csv::Writer::from_writer(Vec::new());
    for (record, p) in set.patches().iter().enumerate() {
        index.serialize(IndexRow {
            record,
            scan_id: p.scan_id.clone(),
            lesion_id: p.lesion_id.clone(),
            label: p.label.as_u8(),
            augmented_from: p.augmented_from.clone().unwrap_or_default(),
        })?;
    }
    if set.is_empty() {
        index.write_record(["record", "scan_id", "lesion_id", "label", "augmented_from"])?;
    }
    let index = index.into_inner().map_err(|e| Error::Io(e.into_error()))?;

    fs::write(path, out)?;
    fs::write(index_path(path), index)?;
    Ok(())
}

pub fn load_patchset(path: impl AsRef<Path>) -> Result<CandidateSet> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    let mut r = Reader::new(&bytes);
    r.expect_magic(PSET_MAGIC)?;
    let at = r.offset();
    let version = r.u32("version")?;
    if version != PSET_VERSION {
        return Err(Error::format(
            at,
            format!("unsupported patchset version {version}"),
        ));
    }
    let n = r.u32("patch count")? as usize;
    let shape = [
        r.u16("channels")? as usize,
        r.u16("height")? as usize,
        r.u16("width")? as usize,
    ];
    let per = shape.iter().product::<usize>();
    if n > 0 && per == 0 {
        return Err(Error::format(
            r.offset() - 6,
            format!("zero patch dimension in {shape:?}"),
        ));
    }
    let expected = n * per * 4;
    if r.remaining() != expected {
        let what = if r.remaining() < expected {
            "truncated"
        } else {
            "oversized"
        };
        return Err(Error::format(
            r.offset() + expected.min(r.remaining()) as u64,
            format!(
                "{what} pixel block: expected {expected} bytes for {n} records, found {}",
                r.remaining()
            ),
        ));
    }

    let index_file = index_path(path);
    let index_bytes = fs::read(&index_file)?;
    let mut rows = Vec::with_capacity(n);
    let mut reader = csv::Reader::from_reader(index_bytes.as_slice());
    for row in reader.deserialize::<IndexRow>() {
        let row = row.map_err(|e| {
            let offset = e.position().map(|p| p.byte()).unwrap_or(0);
            Error::format(offset, format!("{}: {e}", index_file.display()))
        })?;
        if row.record != rows.len() {
            return Err(Error::format(
                reader.position().byte(),
                format!("index row {} is labelled record {}", rows.len(), row.record),
            ));
        }
        rows.push(row);
    }
    if rows.len() != n {
        return Err(Error::format(
            COUNT_OFFSET,
            format!("header declares {n} records, index lists {}", rows.len()),
        ));
    }

    let mut patches = Vec::with_capacity(n);
    for row in rows {
        let pixels = Tensor::new(shape.to_vec(), r.f32s(per, "pixels")?)?;
        patches.push(Patch {
            pixels,
            label: Label::from_u8(row.label)?,
            scan_id: row.scan_id,
            lesion_id: row.lesion_id,
            augmented_from: (!row.augmented_from.is_empty()).then_some(row.augmented_from),
        });
    }
    CandidateSet::new(patches)
}
