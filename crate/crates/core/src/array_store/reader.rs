use std::fs::File;
use std::io::{ErrorKind, Read, Seek, SeekFrom};
use std::path::PathBuf;

use super::{
    advance_row_major, ArraySplit, CellRecord, CellValue, ElementType, StoreError, StoredArray,
};
use crate::aql::ValuePredicate;
use crate::counters::Counters;

/// Streams the cells of one split in row-major order, dropping cells that fail the predicate.
///
/// Every byte range of the split is read regardless of the predicate, so `bytes_read`
/// depends only on the split geometry.
pub struct SplitReader<'a> {
    file: File,
    path: PathBuf,
    split: &'a ArraySplit,
    element_type: ElementType,
    predicate: Option<&'a ValuePredicate>,
    counters: &'a Counters,
    next_range: usize,
    buf: Vec<u8>,
    pos: usize,
    cursor: Vec<i64>,
    current: Vec<i64>,
}

pub fn read_split<'a>(
    array: &StoredArray,
    split: &'a ArraySplit,
    predicate: Option<&'a ValuePredicate>,
    counters: &'a Counters,
) -> Result<SplitReader<'a>, StoreError> {
    let file = File::open(&array.data_path).map_err(|source| StoreError::Io {
        path: array.data_path.clone(),
        source,
    })?;
    Ok(SplitReader {
        file,
        path: array.data_path.clone(),
        split,
        element_type: array.schema.element_type,
        predicate,
        counters,
        next_range: 0,
        buf: Vec::new(),
        pos: 0,
        cursor: split.region.lo.clone(),
        current: split.region.lo.clone(),
    })
}

impl SplitReader<'_> {
    /// Lending variant of `next`: the coordinate slice is valid until the following call.
    pub fn next_cell(&mut self) -> Result<Option<(&[i64], CellValue)>, StoreError> {
        loop {
            if self.pos >= self.buf.len() && !self.load_next_range()? {
                return Ok(None);
            }
            let bytes: [u8; 8] = self.buf[self.pos..self.pos + 8]
                .try_into()
                .expect("8-byte cell");
            self.pos += 8;
            let value = match self.element_type {
                ElementType::Float64 => CellValue::Float(f64::from_le_bytes(bytes)),
                ElementType::Int64 => CellValue::Int(i64::from_le_bytes(bytes)),
            };
            self.current.copy_from_slice(&self.cursor);
            advance_row_major(
                &mut self.cursor,
                &self.split.region.lo,
                &self.split.region.hi,
            );
            if self.predicate.is_none_or(|p| p.matches(value.as_f64())) {
                self.counters.add_map_input_records(1);
                return Ok(Some((&self.current, value)));
            }
        }
    }

    fn load_next_range(&mut self) -> Result<bool, StoreError> {
        let Some(range) = self.split.byte_ranges.get(self.next_range) else {
            return Ok(false);
        };
        self.next_range += 1;
        self.buf.resize(range.length as usize, 0);
        self.pos = 0;
        let io_err = |path: &PathBuf, source: std::io::Error| StoreError::Io {
            path: path.clone(),
            source,
        };
        self.file
            .seek(SeekFrom::Start(range.offset))
            .map_err(|e| io_err(&self.path, e))?;
        match self.file.read_exact(&mut self.buf) {
            Ok(()) => {}
            Err(e) if e.kind() == ErrorKind::UnexpectedEof => {
                return Err(StoreError::ShortRead {
                    split_id: self.split.split_id,
                    path: self.path.clone(),
                })
            }
            Err(e) => return Err(io_err(&self.path, e)),
        }
        self.counters.add_bytes_read(range.length);
        Ok(true)
    }
}

impl Iterator for SplitReader<'_> {
    type Item = Result<CellRecord, StoreError>;

    fn next(&mut self) -> Option<Self::Item> {
        match self.next_cell() {
            Ok(Some((coord, value))) => Some(Ok(CellRecord {
                coord: coord.to_vec(),
                value,
            })),
            Ok(None) => None,
            Err(e) => Some(Err(e)),
        }
    }
}
