//! Dense array storage: sidecar metadata, chunk-aligned splits, and a split reader that
//! applies value predicates while loading.
//!
//! Arrays live as `<name>.bin` (little-endian cells, row-major, no header) beside
//! `<name>.meta.json`. Chunking is logical. It decides how a query box is cut into splits
//! and which byte ranges each split reads, but the file itself is one contiguous blob.

mod generate;
mod reader;
mod schema;
mod splits;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;

pub use generate::{generate_array, write_cells, Fill};
pub use reader::{read_split, SplitReader};
pub use schema::{load_schema, write_schema, ArraySchema, Dimension, ElementType};
pub use splits::{compute_splits, ArraySplit, ByteRange};

pub(crate) use schema::is_identifier;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed metadata: {0}")]
    Malformed(String),
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("{path}: data file holds {actual} bytes, metadata implies {expected}")]
    DataLength {
        path: PathBuf,
        expected: u64,
        actual: u64,
    },
    #[error("box {bbox} is outside the extents of array {array}")]
    OutOfBounds { array: String, bbox: BoundingBox },
    #[error("box has {got} dimensions, array {array} has {expected}")]
    RankMismatch {
        array: String,
        expected: usize,
        got: usize,
    },
    #[error("short read in split {split_id} of {path}: file does not match its metadata")]
    ShortRead { split_id: u64, path: PathBuf },
    #[error("array {0:?} is already registered")]
    DuplicateArray(String),
}

/// Inclusive per-dimension coordinate box.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BoundingBox {
    pub lo: Vec<i64>,
    pub hi: Vec<i64>,
}

impl BoundingBox {
    /// Returns `None` unless `lo` and `hi` have equal length and `lo <= hi` componentwise.
    pub fn new(lo: Vec<i64>, hi: Vec<i64>) -> Option<Self> {
        if lo.len() != hi.len() || lo.is_empty() || lo.iter().zip(&hi).any(|(l, h)| l > h) {
            return None;
        }
        Some(Self { lo, hi })
    }

    pub fn rank(&self) -> usize {
        self.lo.len()
    }

    pub fn extent(&self, dim: usize) -> u64 {
        (self.hi[dim] - self.lo[dim] + 1) as u64
    }

    pub fn extents(&self) -> Vec<u64> {
        (0..self.rank()).map(|d| self.extent(d)).collect()
    }

    pub fn cell_count(&self) -> u64 {
        (0..self.rank()).map(|d| self.extent(d)).product()
    }

    pub fn contains(&self, coord: &[i64]) -> bool {
        coord.len() == self.rank()
            && coord
                .iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(c, (l, h))| l <= c && c <= h)
    }

    pub fn contains_box(&self, other: &BoundingBox) -> bool {
        other.rank() == self.rank() && self.contains(&other.lo) && self.contains(&other.hi)
    }

    pub fn intersect(&self, other: &BoundingBox) -> Option<BoundingBox> {
        let lo = self
            .lo
            .iter()
            .zip(&other.lo)
            .map(|(a, b)| *a.max(b))
            .collect();
        let hi = self
            .hi
            .iter()
            .zip(&other.hi)
            .map(|(a, b)| *a.min(b))
            .collect();
        BoundingBox::new(lo, hi)
    }

    /// Calls `f` with every coordinate in the box, in row-major order.
    pub fn for_each_coord(&self, mut f: impl FnMut(&[i64])) {
        let mut coord = self.lo.clone();
        loop {
            f(&coord);
            if !advance_row_major(&mut coord, &self.lo, &self.hi) {
                return;
            }
        }
    }
}

/// Odometer step over `[lo, hi]`, last dimension fastest. Returns false after the last cell.
pub(crate) fn advance_row_major(coord: &mut [i64], lo: &[i64], hi: &[i64]) -> bool {
    for d in (0..coord.len()).rev() {
        if coord[d] < hi[d] {
            coord[d] += 1;
            return true;
        }
        coord[d] = lo[d];
    }
    false
}

impl fmt::Display for BoundingBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_tuple(f, &self.lo)?;
        f.write_str("-")?;
        write_tuple(f, &self.hi)
    }
}

fn write_tuple(f: &mut fmt::Formatter<'_>, values: &[i64]) -> fmt::Result {
    f.write_str("(")?;
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            f.write_str(",")?;
        }
        write!(f, "{v}")?;
    }
    f.write_str(")")
}

/// A cell value in the array's element type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellValue {
    Float(f64),
    Int(i64),
}

impl CellValue {
    pub fn as_f64(self) -> f64 {
        match self {
            CellValue::Float(v) => v,
            CellValue::Int(v) => v as f64,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellRecord {
    pub coord: Vec<i64>,
    pub value: CellValue,
}

/// A schema together with the location of its data file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoredArray {
    pub schema: ArraySchema,
    pub data_path: PathBuf,
}

impl StoredArray {
    /// Opens `<dir>/<name>.meta.json` and checks that `<dir>/<name>.bin` has the right length.
    pub fn open(dir: &Path, name: &str) -> Result<Self, StoreError> {
        Self::open_metadata(&metadata_path(dir, name))
    }

    pub fn open_metadata(meta_path: &Path) -> Result<Self, StoreError> {
        let schema = load_schema(meta_path)?;
        let dir = meta_path.parent().unwrap_or_else(|| Path::new("."));
        let data_path = data_path(dir, &schema.name);
        let actual = fs::metadata(&data_path)
            .map_err(|source| StoreError::Io {
                path: data_path.clone(),
                source,
            })?
            .len();
        if actual != schema.byte_len() {
            return Err(StoreError::DataLength {
                path: data_path,
                expected: schema.byte_len(),
                actual,
            });
        }
        Ok(Self { schema, data_path })
    }
}

pub fn metadata_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.meta.json"))
}

pub fn data_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.bin"))
}

/// Registered arrays visible to semantic analysis, keyed by array name.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    arrays: BTreeMap<String, Arc<StoredArray>>,
}

impl Catalog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers every `*.meta.json` array found in `dir`.
    pub fn load_dir(dir: &Path) -> Result<Self, StoreError> {
        let mut catalog = Self::new();
        let entries = fs::read_dir(dir).map_err(|source| StoreError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let mut metas = Vec::new();
        for entry in entries {
            let entry = entry.map_err(|source| StoreError::Io {
                path: dir.to_path_buf(),
                source,
            })?;
            let path = entry.path();
            if path
                .file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.ends_with(".meta.json"))
            {
                metas.push(path);
            }
        }
        metas.sort();
        for meta in metas {
            catalog.register(StoredArray::open_metadata(&meta)?)?;
        }
        Ok(catalog)
    }

    pub fn register(&mut self, array: StoredArray) -> Result<Arc<StoredArray>, StoreError> {
        array.schema.validate()?;
        if self.arrays.contains_key(&array.schema.name) {
            return Err(StoreError::DuplicateArray(array.schema.name));
        }
        let array = Arc::new(array);
        self.arrays
            .insert(array.schema.name.clone(), Arc::clone(&array));
        Ok(array)
    }

    /// Registers a schema whose data file is not checked. Useful for translation-only work.
    pub fn register_schema(&mut self, schema: ArraySchema) -> Result<Arc<StoredArray>, StoreError> {
        let data_path = PathBuf::from(format!("{}.bin", schema.name));
        self.register(StoredArray { schema, data_path })
    }

    pub fn get(&self, name: &str) -> Option<&Arc<StoredArray>> {
        self.arrays.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.arrays.keys().map(String::as_str)
    }
}
