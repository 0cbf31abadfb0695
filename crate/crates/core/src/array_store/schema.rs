use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::StoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ElementType {
    Float64,
    Int64,
}

impl ElementType {
    pub fn size(self) -> usize {
        8
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ElementType::Float64 => "float64",
            ElementType::Int64 => "int64",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "float64" => Some(ElementType::Float64),
            "int64" => Some(ElementType::Int64),
            _ => None,
        }
    }
}

impl fmt::Display for ElementType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One named dimension with an inclusive index range and its logical chunk length.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dimension {
    pub name: String,
    pub start: i64,
    pub end: i64,
    pub chunk: u64,
}

impl Dimension {
    pub fn new(name: impl Into<String>, start: i64, end: i64, chunk: u64) -> Self {
        Self {
            name: name.into(),
            start,
            end,
            chunk,
        }
    }

    pub fn extent(&self) -> u64 {
        (self.end - self.start + 1) as u64
    }
}

/// Dense n-dimensional array description: the metadata stored beside the data file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArraySchema {
    pub name: String,
    pub element_type: ElementType,
    pub attribute: String,
    pub dims: Vec<Dimension>,
}

#[derive(Serialize, Deserialize)]
struct MetadataDoc {
    name: String,
    element_type: String,
    attribute: String,
    dims: Vec<Dimension>,
    order: String,
}

const ROW_MAJOR: &str = "row-major";

impl ArraySchema {
    /// Builds and validates a schema.
    pub fn new(
        name: impl Into<String>,
        element_type: ElementType,
        attribute: impl Into<String>,
        dims: Vec<Dimension>,
    ) -> Result<Self, StoreError> {
        let schema = Self {
            name: name.into(),
            element_type,
            attribute: attribute.into(),
            dims,
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn validate(&self) -> Result<(), StoreError> {
        if !is_identifier(&self.name) {
            return Err(StoreError::InvalidSchema(format!(
                "array name {:?} is not an identifier",
                self.name
            )));
        }
        if !is_identifier(&self.attribute) {
            return Err(StoreError::InvalidSchema(format!(
                "attribute name {:?} is not an identifier",
                self.attribute
            )));
        }
        if self.dims.is_empty() {
            return Err(StoreError::InvalidSchema("array has no dimensions".into()));
        }
        let mut seen = HashSet::new();
        for dim in &self.dims {
            if !is_identifier(&dim.name) {
                return Err(StoreError::InvalidSchema(format!(
                    "dimension name {:?} is not an identifier",
                    dim.name
                )));
            }
            if !seen.insert(dim.name.as_str()) {
                return Err(StoreError::InvalidSchema(format!(
                    "duplicate dimension {:?}",
                    dim.name
                )));
            }
            if dim.start > dim.end {
                return Err(StoreError::InvalidSchema(format!(
                    "dimension {:?} has start {} > end {}",
                    dim.name, dim.start, dim.end
                )));
            }
            if dim.chunk == 0 {
                return Err(StoreError::InvalidSchema(format!(
                    "dimension {:?} has zero chunk length",
                    dim.name
                )));
            }
            if dim.chunk > dim.extent() {
                return Err(StoreError::InvalidSchema(format!(
                    "chunk exceeds extent on dimension {:?} ({} > {})",
                    dim.name,
                    dim.chunk,
                    dim.extent()
                )));
            }
        }
        Ok(())
    }

    pub fn rank(&self) -> usize {
        self.dims.len()
    }

    pub fn extents(&self) -> Vec<u64> {
        self.dims.iter().map(Dimension::extent).collect()
    }

    pub fn chunk_shape(&self) -> Vec<u64> {
        self.dims.iter().map(|d| d.chunk).collect()
    }

    pub fn cell_count(&self) -> u64 {
        self.dims.iter().map(Dimension::extent).product()
    }

    pub fn byte_len(&self) -> u64 {
        self.cell_count() * self.element_type.size() as u64
    }

    pub fn dim_index(&self, name: &str) -> Option<usize> {
        self.dims.iter().position(|d| d.name == name)
    }

    /// The box covering every cell of the array.
    pub fn full_box(&self) -> super::BoundingBox {
        super::BoundingBox {
            lo: self.dims.iter().map(|d| d.start).collect(),
            hi: self.dims.iter().map(|d| d.end).collect(),
        }
    }

    /// Row-major linear index of a coordinate that lies inside the array.
    pub fn linear_index(&self, coord: &[i64]) -> u64 {
        let mut idx = 0u64;
        for (dim, &c) in self.dims.iter().zip(coord) {
            idx = idx * dim.extent() + (c - dim.start) as u64;
        }
        idx
    }

    pub fn to_json(&self) -> String {
        let doc = MetadataDoc {
            name: self.name.clone(),
            element_type: self.element_type.as_str().to_string(),
            attribute: self.attribute.clone(),
            dims: self.dims.clone(),
            order: ROW_MAJOR.to_string(),
        };
        let mut text = serde_json::to_string_pretty(&doc).expect("metadata serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, StoreError> {
        let doc: MetadataDoc =
            serde_json::from_str(text).map_err(|e| StoreError::Malformed(e.to_string()))?;
        let element_type = ElementType::parse(&doc.element_type).ok_or_else(|| {
            StoreError::Malformed(format!("unknown element_type {:?}", doc.element_type))
        })?;
        if doc.order != ROW_MAJOR {
            return Err(StoreError::Malformed(format!(
                "unsupported order {:?}, expected \"row-major\"",
                doc.order
            )));
        }
        Self::new(doc.name, element_type, doc.attribute, doc.dims)
    }
}

/// Reads and validates a `<name>.meta.json` file.
pub fn load_schema(metadata_path: &Path) -> Result<ArraySchema, StoreError> {
    let text = fs::read_to_string(metadata_path).map_err(|source| StoreError::Io {
        path: metadata_path.to_path_buf(),
        source,
    })?;
    ArraySchema::from_json(&text)
}

pub fn write_schema(schema: &ArraySchema, metadata_path: &Path) -> Result<(), StoreError> {
    fs::write(metadata_path, schema.to_json()).map_err(|source| StoreError::Io {
        path: metadata_path.to_path_buf(),
        source,
    })
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}
