use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{ArraySchema, CellValue, ElementType, StoreError};

/// Synthetic fill patterns for test and benchmark arrays.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Fill {
    Constant(f64),
    /// Cell at row-major index `i` holds `i`.
    Ramp,
    /// Deterministic per seed. Floats are drawn from (0, 1], integers from [1, 1000].
    Uniform {
        seed: u64,
    },
}

pub fn generate_array(schema: &ArraySchema, fill: Fill, out_path: &Path) -> Result<(), StoreError> {
    let n = schema.cell_count();
    let et = schema.element_type;
    match fill {
        Fill::Constant(c) => write_cells(
            schema,
            out_path,
            (0..n).map(|_| match et {
                ElementType::Float64 => CellValue::Float(c),
                ElementType::Int64 => CellValue::Int(c as i64),
            }),
        ),
        Fill::Ramp => write_cells(
            schema,
            out_path,
            (0..n).map(|i| match et {
                ElementType::Float64 => CellValue::Float(i as f64),
                ElementType::Int64 => CellValue::Int(i as i64),
            }),
        ),
        Fill::Uniform { seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            write_cells(
                schema,
                out_path,
                (0..n).map(|_| match et {
                    ElementType::Float64 => CellValue::Float(1.0 - rng.gen::<f64>()),
                    ElementType::Int64 => CellValue::Int(rng.gen_range(1..=1000)),
                }),
            )
        }
    }
}

/// Writes exactly `schema.cell_count()` cells in row-major order.
///
/// Values whose variant differs from the schema's element type are converted.
pub fn write_cells(
    schema: &ArraySchema,
    out_path: &Path,
    cells: impl IntoIterator<Item = CellValue>,
) -> Result<(), StoreError> {
    let io = |source| StoreError::Io {
        path: out_path.to_path_buf(),
        source,
    };
    let mut out = BufWriter::new(File::create(out_path).map_err(io)?);
    let mut written = 0u64;
    for cell in cells {
        let bytes = match (schema.element_type, cell) {
            (ElementType::Float64, v) => v.as_f64().to_le_bytes(),
            (ElementType::Int64, CellValue::Int(v)) => v.to_le_bytes(),
            (ElementType::Int64, CellValue::Float(v)) => (v as i64).to_le_bytes(),
        };
        out.write_all(&bytes).map_err(io)?;
        written += 1;
    }
    out.flush().map_err(io)?;
    if written != schema.cell_count() {
        return Err(StoreError::DataLength {
            path: out_path.to_path_buf(),
            expected: schema.byte_len(),
            actual: written * schema.element_type.size() as u64,
        });
    }
    Ok(())
}
