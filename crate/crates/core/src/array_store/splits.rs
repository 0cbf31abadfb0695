use super::{advance_row_major, ArraySchema, BoundingBox, StoreError};

/// Contiguous span of the data file, in bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ByteRange {
    pub offset: u64,
    pub length: u64,
}

/// Map-task input: one logical chunk clipped to the query box.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArraySplit {
    /// Row-major index of the chunk in the array's chunk grid.
    pub split_id: u64,
    pub region: BoundingBox,
    /// Row-major runs covering exactly the cells of `region`. Adjacent runs are merged.
    pub byte_ranges: Vec<ByteRange>,
}

impl ArraySplit {
    pub fn byte_len(&self) -> u64 {
        self.byte_ranges.iter().map(|r| r.length).sum()
    }
}

/// Cuts `bbox` into one split per intersecting chunk, ordered by chunk index.
pub fn compute_splits(
    schema: &ArraySchema,
    bbox: &BoundingBox,
) -> Result<Vec<ArraySplit>, StoreError> {
    if bbox.rank() != schema.rank() {
        return Err(StoreError::RankMismatch {
            array: schema.name.clone(),
            expected: schema.rank(),
            got: bbox.rank(),
        });
    }
    if !schema.full_box().contains_box(bbox) {
        return Err(StoreError::OutOfBounds {
            array: schema.name.clone(),
            bbox: bbox.clone(),
        });
    }

    let rank = schema.rank();
    let chunks_per_dim: Vec<u64> = schema
        .dims
        .iter()
        .map(|d| d.extent().div_ceil(d.chunk))
        .collect();
    let chunk_lo: Vec<i64> = schema
        .dims
        .iter()
        .zip(&bbox.lo)
        .map(|(d, &lo)| ((lo - d.start) as u64 / d.chunk) as i64)
        .collect();
    let chunk_hi: Vec<i64> = schema
        .dims
        .iter()
        .zip(&bbox.hi)
        .map(|(d, &hi)| ((hi - d.start) as u64 / d.chunk) as i64)
        .collect();

    let mut splits = Vec::new();
    let mut chunk = chunk_lo.clone();
    loop {
        let mut split_id = 0u64;
        let mut lo = Vec::with_capacity(rank);
        let mut hi = Vec::with_capacity(rank);
        for (d, dim) in schema.dims.iter().enumerate() {
            split_id = split_id * chunks_per_dim[d] + chunk[d] as u64;
            let start = dim.start + chunk[d] * dim.chunk as i64;
            let end = (start + dim.chunk as i64 - 1).min(dim.end);
            lo.push(start.max(bbox.lo[d]));
            hi.push(end.min(bbox.hi[d]));
        }
        let region = BoundingBox { lo, hi };
        let byte_ranges = byte_ranges(schema, &region);
        splits.push(ArraySplit {
            split_id,
            region,
            byte_ranges,
        });
        if !advance_row_major(&mut chunk, &chunk_lo, &chunk_hi) {
            break;
        }
    }
    Ok(splits)
}

fn byte_ranges(schema: &ArraySchema, region: &BoundingBox) -> Vec<ByteRange> {
    let size = schema.element_type.size() as u64;
    let last = region.rank() - 1;
    let run = region.extent(last) * size;
    let mut ranges: Vec<ByteRange> = Vec::new();
    let mut coord = region.lo.clone();
    let outer_hi = {
        let mut hi = region.hi.clone();
        hi[last] = region.lo[last];
        hi
    };
    loop {
        let offset = schema.linear_index(&coord) * size;
        match ranges.last_mut() {
            Some(prev) if prev.offset + prev.length == offset => prev.length += run,
            _ => ranges.push(ByteRange {
                offset,
                length: run,
            }),
        }
        if !advance_row_major(&mut coord, &region.lo, &outer_hi) {
            break;
        }
    }
    ranges
}
