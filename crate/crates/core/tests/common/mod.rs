//! Serial brute-force reference shared by integration and acceptance tests.
//!
//! Nothing here goes through splits, the split reader, group membership, or the aggregator
//! summaries: cell values are decoded straight from the data file and every group is
//! enumerated from its geometric definition.
#![allow(dead_code)]

use std::fs;
use std::path::Path;

use aqlmr::aql::{
    analyze, parse, AggregationKind, Comparator, GeometryParams, QueryObject, RingMode,
};
use aqlmr::array_store::{
    data_path, generate_array, metadata_path, write_schema, ArraySchema, Dimension, ElementType,
    Fill,
};
use aqlmr::{AggregatorRegistry, Catalog, StoredArray};
use rand::Rng;

pub struct ArraySpec {
    pub name: String,
    pub element_type: ElementType,
    /// (start, end, chunk) per dimension.
    pub dims: Vec<(i64, i64, u64)>,
    pub fill: Fill,
}

impl ArraySpec {
    pub fn schema(&self) -> ArraySchema {
        let names = ["x", "y", "z", "w"];
        ArraySchema::new(
            self.name.clone(),
            self.element_type,
            "Val",
            self.dims
                .iter()
                .enumerate()
                .map(|(i, &(s, e, c))| Dimension::new(names[i], s, e, c))
                .collect(),
        )
        .expect("valid test schema")
    }

    /// Writes data and metadata into `dir` and registers the array in `catalog`.
    pub fn create(&self, dir: &Path, catalog: &mut Catalog) {
        let schema = self.schema();
        write_schema(&schema, &metadata_path(dir, &schema.name)).unwrap();
        generate_array(&schema, self.fill, &data_path(dir, &schema.name)).unwrap();
        catalog
            .register(StoredArray::open(dir, &schema.name).unwrap())
            .unwrap();
    }
}

pub fn analyze_text(text: &str, catalog: &Catalog) -> QueryObject {
    let ast = parse(text).unwrap_or_else(|e| panic!("{text}: {e}"));
    analyze(&ast, catalog, &AggregatorRegistry::with_builtins())
        .unwrap_or_else(|e| panic!("{text}: {e}"))
}

/// All cell values of the array in row-major order, decoded from the data file.
pub fn load_values(array: &StoredArray) -> Vec<f64> {
    let bytes = fs::read(&array.data_path).unwrap();
    bytes
        .chunks_exact(8)
        .map(|b| {
            let b: [u8; 8] = b.try_into().unwrap();
            match array.schema.element_type {
                ElementType::Float64 => f64::from_le_bytes(b),
                ElementType::Int64 => i64::from_le_bytes(b) as f64,
            }
        })
        .collect()
}

fn offset_of(array: &StoredArray, coord: &[i64]) -> usize {
    let mut idx = 0usize;
    for (d, dim) in array.schema.dims.iter().enumerate() {
        let extent = (dim.end - dim.start + 1) as usize;
        idx = idx * extent + (coord[d] - dim.start) as usize;
    }
    idx
}

/// Every coordinate of the inclusive box `lo..=hi`, row-major.
pub fn box_cells(lo: &[i64], hi: &[i64]) -> Vec<Vec<i64>> {
    let mut out = vec![Vec::new()];
    for d in 0..lo.len() {
        let mut next = Vec::new();
        for prefix in &out {
            for x in lo[d]..=hi[d] {
                let mut c = prefix.clone();
                c.push(x);
                next.push(c);
            }
        }
        out = next;
    }
    out
}

fn passes(obj: &QueryObject, v: f64) -> bool {
    let Some(p) = &obj.predicate else { return true };
    p.conjuncts.iter().all(|c| match c.comparator {
        Comparator::Lt => v < c.constant,
        Comparator::Le => v <= c.constant,
        Comparator::Gt => v > c.constant,
        Comparator::Ge => v >= c.constant,
        Comparator::Eq => v == c.constant,
        Comparator::Ne => v != c.constant,
    })
}

/// Member cells of every group, in group-id order.
pub fn group_members(obj: &QueryObject) -> Vec<Vec<Vec<i64>>> {
    let (lo, hi) = (&obj.bbox.lo, &obj.bbox.hi);
    let rank = lo.len();
    match &obj.geometry {
        GeometryParams::Grid { partitions } => {
            let mut starts: Vec<Vec<(i64, i64)>> = Vec::new();
            for d in 0..rank {
                let p = partitions[d] as i64;
                let mut s = lo[d];
                let mut v = Vec::new();
                while s <= hi[d] {
                    v.push((s, (s + p - 1).min(hi[d])));
                    s += p;
                }
                starts.push(v);
            }
            cartesian(&starts)
                .into_iter()
                .map(|blocks| {
                    let b_lo: Vec<i64> = blocks.iter().map(|b| b.0).collect();
                    let b_hi: Vec<i64> = blocks.iter().map(|b| b.1).collect();
                    box_cells(&b_lo, &b_hi)
                })
                .collect()
        }
        GeometryParams::Sliding { windows, stride } => {
            let mut centers: Vec<Vec<(i64, i64)>> = Vec::new();
            for d in 0..rank {
                let mut v = Vec::new();
                let mut c = lo[d];
                while c <= hi[d] {
                    v.push((
                        (c - windows[d].preceding as i64).max(lo[d]),
                        (c + windows[d].following as i64).min(hi[d]),
                    ));
                    c += *stride as i64;
                }
                centers.push(v);
            }
            cartesian(&centers)
                .into_iter()
                .map(|w| {
                    let w_lo: Vec<i64> = w.iter().map(|b| b.0).collect();
                    let w_hi: Vec<i64> = w.iter().map(|b| b.1).collect();
                    box_cells(&w_lo, &w_hi)
                })
                .collect()
        }
        GeometryParams::Ring { radius, step, mode } => {
            let center: Vec<i64> = (0..rank)
                .map(|d| ((lo[d] + hi[d]) as f64 / 2.0).floor() as i64)
                .collect();
            let reach = (0..rank)
                .map(|d| (center[d] - lo[d]).min(hi[d] - center[d]))
                .min()
                .unwrap();
            let r = |k: i64| *radius as i64 + k * *step as i64;
            let mut last = 0;
            while r(last) < reach {
                last += 1;
            }
            let euclid = obj.kind == AggregationKind::Circular;
            let cells = box_cells(lo, hi);
            // Compare squared distances against squared radii to stay in integers.
            let dist = |c: &[i64]| -> i64 {
                let diffs = c.iter().zip(&center).map(|(a, b)| (a - b).abs());
                if euclid {
                    diffs.map(|x| x * x).sum()
                } else {
                    diffs.max().unwrap()
                }
            };
            let bound = |k: i64| if euclid { r(k) * r(k) } else { r(k) };
            (0..=last)
                .map(|k| {
                    cells
                        .iter()
                        .filter(|c| {
                            let d = dist(c);
                            let inside = d <= bound(k);
                            match mode {
                                RingMode::Nested => inside,
                                RingMode::Disjoint => inside && (k == 0 || d > bound(k - 1)),
                            }
                        })
                        .cloned()
                        .collect()
                })
                .collect()
        }
    }
}

fn cartesian<T: Clone>(axes: &[Vec<T>]) -> Vec<Vec<T>> {
    let mut out = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::new();
        for prefix in &out {
            for item in axis {
                let mut p = prefix.clone();
                p.push(item.clone());
                next.push(p);
            }
        }
        out = next;
    }
    out
}

/// Predicate-passing values of every group.
pub fn group_values(obj: &QueryObject) -> Vec<Vec<f64>> {
    let values = load_values(&obj.array);
    group_members(obj)
        .into_iter()
        .map(|cells| {
            cells
                .iter()
                .map(|c| values[offset_of(&obj.array, c)])
                .filter(|&v| passes(obj, v))
                .collect()
        })
        .collect()
}

/// Direct (two-pass where it matters) evaluation of the named aggregate.
pub fn reference_aggregate(name: &str, vals: &[f64]) -> Option<f64> {
    if vals.is_empty() {
        return None;
    }
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    Some(match name {
        "SUM" => vals.iter().sum(),
        "COUNT" => n,
        "AVG" => mean,
        "MIN" => vals.iter().copied().fold(f64::INFINITY, f64::min),
        "MAX" => vals.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        "STDDEV" => (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt(),
        "GEOMEAN" => (vals.iter().map(|v| v.ln()).sum::<f64>() / n).exp(),
        "MEDIAN" => {
            let mut s = vals.to_vec();
            s.sort_by(f64::total_cmp);
            let m = s.len() / 2;
            if s.len() % 2 == 1 {
                s[m]
            } else {
                (s[m - 1] + s[m]) / 2.0
            }
        }
        other => panic!("no reference for {other}"),
    })
}

/// Expected per-group results.
pub fn oracle(obj: &QueryObject) -> Vec<Option<f64>> {
    let name = obj.aggregator.name().to_string();
    group_values(obj)
        .iter()
        .map(|v| reference_aggregate(&name, v))
        .collect()
}

/// Number of raw pairs a naive run must emit: one per (passing cell, group) membership.
pub fn oracle_naive_pairs(obj: &QueryObject) -> u64 {
    group_values(obj).iter().map(|v| v.len() as u64).sum()
}

/// Whether results must match bit for bit rather than within a relative tolerance.
pub fn exact_aggregate(name: &str, element_type: ElementType) -> bool {
    matches!(name, "MIN" | "MAX" | "COUNT" | "MEDIAN")
        || (name == "SUM" && element_type == ElementType::Int64)
}

pub fn within(expected: Option<f64>, got: Option<f64>, exact: bool, rel: f64) -> bool {
    match (expected, got) {
        (None, None) => true,
        (Some(e), Some(g)) if exact => e == g,
        (Some(e), Some(g)) => (e - g).abs() <= rel * e.abs().max(g.abs()).max(f64::MIN_POSITIVE),
        _ => false,
    }
}

/// First mismatching group, if any.
pub fn compare(
    expected: &[Option<f64>],
    got: &[Option<f64>],
    exact: bool,
    rel: f64,
) -> Result<(), String> {
    if expected.len() != got.len() {
        return Err(format!("group count {} vs {}", expected.len(), got.len()));
    }
    for (i, (e, g)) in expected.iter().zip(got).enumerate() {
        if !within(*e, *g, exact, rel) {
            return Err(format!("group {i}: expected {e:?}, got {g:?}"));
        }
    }
    Ok(())
}

pub const ALGEBRAIC: [&str; 7] = ["sum", "count", "avg", "min", "max", "stddev", "geomean"];

/// One randomized array plus query over it.
pub struct RandomCase {
    pub array: ArraySpec,
    pub query: String,
}

/// Draws an array of at most 64×64 cells (or a small 1-D/3-D one) and a query of `kind`.
pub fn random_case(
    rng: &mut impl Rng,
    kind: AggregationKind,
    aggregate: &str,
    id: usize,
) -> RandomCase {
    let rank = match rng.gen_range(0..10) {
        0 => 1,
        1 => 3,
        _ => 2,
    };
    let max_extent = match rank {
        1 => 200,
        2 => 64,
        _ => 12,
    };
    let dims: Vec<(i64, i64, u64)> = (0..rank)
        .map(|_| {
            let start = rng.gen_range(-6..6);
            let extent = rng.gen_range(1..=max_extent);
            let chunk = rng.gen_range(1..=extent.min(24)) as u64;
            (start, start + extent - 1, chunk)
        })
        .collect();
    let element_type = if aggregate != "geomean" && rng.gen_bool(0.3) {
        ElementType::Int64
    } else {
        ElementType::Float64
    };
    let fill = if aggregate != "geomean" && rng.gen_bool(0.2) {
        Fill::Ramp
    } else {
        Fill::Uniform { seed: rng.gen() }
    };
    let name = format!("R{id}");
    let names = ["x", "y", "z"];

    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for &(s, e, _) in &dims {
        if rng.gen_bool(0.5) {
            let a = rng.gen_range(s..=e);
            let b = rng.gen_range(s..=e);
            lo.push(a.min(b));
            hi.push(a.max(b));
        } else {
            lo.push(s);
            hi.push(e);
        }
    }
    let source = if lo.iter().zip(&dims).all(|(l, d)| *l == d.0)
        && hi.iter().zip(&dims).all(|(h, d)| *h == d.1)
    {
        name.clone()
    } else {
        let coords: Vec<String> = lo.iter().chain(&hi).map(|c| c.to_string()).collect();
        format!("between ({name}, {})", coords.join(", "))
    };

    let predicate = if rng.gen_bool(0.3) {
        let t = match (element_type, fill) {
            (ElementType::Int64, Fill::Uniform { .. }) => rng.gen_range(1..1000) as f64,
            (_, Fill::Ramp) => rng.gen_range(0..200) as f64,
            _ => (rng.gen_range(0..100) as f64) / 100.0,
        };
        let op = [">", ">=", "<", "<=", "<>"][rng.gen_range(0..5)];
        format!(" where Val {op} {t}")
    } else {
        String::new()
    };

    let shape = match kind {
        AggregationKind::Grid => {
            let parts: Vec<String> = (0..rank)
                .map(|d| {
                    format!(
                        "{} {}",
                        names[d],
                        rng.gen_range(1..=(hi[d] - lo[d] + 1).min(20))
                    )
                })
                .collect();
            format!("grid as (partition by {})", parts.join(", "))
        }
        AggregationKind::Sliding => {
            let ws: Vec<String> = (0..rank)
                .map(|d| {
                    format!(
                        "{} {} preceding and {} following",
                        names[d],
                        rng.gen_range(0..3),
                        rng.gen_range(0..3)
                    )
                })
                .collect();
            let stride = if rng.gen_bool(0.5) {
                format!(" stride {}", rng.gen_range(1..4))
            } else {
                String::new()
            };
            format!("fixed window as (partition by {}{stride})", ws.join(", "))
        }
        AggregationKind::Hierarchical | AggregationKind::Circular => {
            let mode = match rng.gen_range(0..3) {
                0 => " mode nested",
                1 => " mode disjoint",
                _ => "",
            };
            format!(
                "{} as (radius {} step {}{mode})",
                kind.as_str(),
                rng.gen_range(0..6),
                rng.gen_range(1..5)
            )
        }
    };

    RandomCase {
        array: ArraySpec {
            name,
            element_type,
            dims,
            fill,
        },
        query: format!("select {aggregate}(Val) from {source}{predicate} {shape}"),
    }
}
