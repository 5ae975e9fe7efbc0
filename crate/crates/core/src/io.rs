//! File formats for fields, covers and partitions.
//!
//! Fields are stored node-major: row `i` (first chart axis) after row `i - 1`, each row
//! listing `j = 0..ny`. Both formats carry the grid descriptor as a JSON header.
//!
//! * CSV: a first line `# {json header}`, then one line per row `i` with `ny` values.
//! * Binary: `PBLF`, a little-endian `u32` header length, the JSON header, then
//!   `nx * ny` little-endian `f64` values.
//!
//! Covers are JSON with each mask run-length encoded as alternating run lengths,
//! starting with a run of `false`.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cover::Cover;
use crate::error::{Error, Result};
use crate::partition::PartitionOfUnity;
use crate::real::Real;
use crate::surface::{GridDescriptor, ScalarField, SurfaceGrid};

const MAGIC: &[u8; 4] = b"PBLF";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldHeader {
    pub grid: GridDescriptor,
    /// Always `"node-major"`.
    pub order: String,
}

impl FieldHeader {
    fn for_grid<T: Real>(grid: &SurfaceGrid<T>) -> Self {
        Self { grid: grid.descriptor(), order: "node-major".into() }
    }
}

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidField(msg.into())
}

pub fn write_field_csv<T: Real>(mut w: impl Write, f: &ScalarField<T>) -> Result<()> {
    writeln!(w, "# {}", serde_json::to_string(&FieldHeader::for_grid(f.grid()))?)?;
    let ny = f.grid().ny();
    for row in f.values().chunks(ny) {
        let line: Vec<String> = row.iter().map(|v| format!("{:e}", v.f64())).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn read_field_csv<T: Real>(r: impl Read) -> Result<ScalarField<T>> {
    let mut lines = BufReader::new(r).lines();
    let first = lines.next().ok_or_else(|| bad("empty field file"))??;
    let json = first.strip_prefix("# ").ok_or_else(|| bad("missing header line"))?;
    let header: FieldHeader = serde_json::from_str(json)?;
    let grid = SurfaceGrid::<T>::from_descriptor(&header.grid)?;
    let mut values = Vec::with_capacity(grid.len());
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<T> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>().map(T::lit).map_err(|e| bad(format!("bad value {s:?}: {e}"))))
            .collect::<Result<_>>()?;
        if row.len() != grid.ny() {
            return Err(bad(format!("row has {} values, expected {}", row.len(), grid.ny())));
        }
        values.extend(row);
    }
    ScalarField::new(grid, values)
}

pub fn write_field_binary<T: Real>(mut w: impl Write, f: &ScalarField<T>) -> Result<()> {
    let header = serde_json::to_vec(&FieldHeader::for_grid(f.grid()))?;
    w.write_all(MAGIC)?;
    w.write_all(&(header.len() as u32).to_le_bytes())?;
    w.write_all(&header)?;
    for v in f.values() {
        w.write_all(&v.f64().to_le_bytes())?;
    }
    Ok(())
}

pub fn read_field_binary<T: Real>(mut r: impl Read) -> Result<ScalarField<T>> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(bad("not a field file"));
    }
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let mut header = vec![0u8; u32::from_le_bytes(len) as usize];
    r.read_exact(&mut header)?;
    let header: FieldHeader = serde_json::from_slice(&header)?;
    let grid = SurfaceGrid::<T>::from_descriptor(&header.grid)?;
    let mut buf = vec![0u8; grid.len() * 8];
    r.read_exact(&mut buf)?;
    let values = buf.chunks_exact(8).map(|c| T::lit(f64::from_le_bytes(c.try_into().expect("chunk of 8")))).collect();
    ScalarField::new(grid, values)
}

/// Run lengths of a mask, alternating and starting with `false`.
pub fn encode_runs(mask: &[bool]) -> Vec<u32> {
    let mut runs = Vec::new();
    let mut current = false;
    let mut len = 0u32;
    for &b in mask {
        if b == current {
            len += 1;
        } else {
            runs.push(len);
            current = b;
            len = 1;
        }
    }
    runs.push(len);
    runs
}

pub fn decode_runs(runs: &[u32], n: usize) -> Result<Vec<bool>> {
    let mut mask = Vec::with_capacity(n);
    for (r, &len) in runs.iter().enumerate() {
        mask.extend(std::iter::repeat_n(r % 2 == 1, len as usize));
    }
    if mask.len() != n {
        return Err(Error::InvalidCover(format!("runs cover {} nodes, expected {n}", mask.len())));
    }
    Ok(mask)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetRecord {
    pub id: usize,
    pub runs: Vec<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverFile {
    pub grid: GridDescriptor,
    pub sets: Vec<SetRecord>,
}

pub fn cover_to_file<T: Real>(c: &Cover<T>) -> CoverFile {
    CoverFile { grid: c.grid().descriptor(), sets: c.sets().iter().map(|s| SetRecord { id: s.id, runs: encode_runs(&s.mask) }).collect() }
}

pub fn cover_from_file<T: Real>(file: &CoverFile) -> Result<Cover<T>> {
    let grid = SurfaceGrid::<T>::from_descriptor(&file.grid)?;
    let mut sets: Vec<&SetRecord> = file.sets.iter().collect();
    sets.sort_by_key(|s| s.id);
    if sets.iter().enumerate().any(|(i, s)| s.id != i) {
        return Err(Error::InvalidCover("set ids must be 0..n".into()));
    }
    let masks = sets.iter().map(|s| decode_runs(&s.runs, grid.len())).collect::<Result<_>>()?;
    Cover::new(grid, masks)
}

/// Partition manifest: field files and subordination, relative to the manifest's directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionManifest {
    pub cover: PathBuf,
    pub fields: Vec<PathBuf>,
    pub subordination: Vec<usize>,
}

/// Writes `manifest.json`, `cover.json` and one binary file per field into `dir`.
pub fn save_partition<T: Real>(dir: &Path, p: &PartitionOfUnity<T>) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("cover.json"), serde_json::to_vec(&cover_to_file(p.cover()))?)?;
    let mut fields = Vec::new();
    for (i, f) in p.fields().iter().enumerate() {
        let name = PathBuf::from(format!("field_{i:04}.pblf"));
        write_field_binary(fs::File::create(dir.join(&name))?, f)?;
        fields.push(name);
    }
    let manifest = PartitionManifest { cover: "cover.json".into(), fields, subordination: p.subordination().to_vec() };
    fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(())
}

pub fn load_partition<T: Real>(dir: &Path) -> Result<PartitionOfUnity<T>> {
    let manifest: PartitionManifest = serde_json::from_slice(&fs::read(dir.join("manifest.json"))?)?;
    let cover_file: CoverFile = serde_json::from_slice(&fs::read(dir.join(&manifest.cover))?)?;
    let cover = cover_from_file(&cover_file)?;
    let fields = manifest.fields.iter().map(|f| read_field_binary(fs::File::open(dir.join(f))?)).collect::<Result<_>>()?;
    PartitionOfUnity::new(fields, cover, manifest.subordination)
}
