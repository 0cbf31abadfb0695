use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use super::{QueryAst, RingClause, RingMode, ShapeClause, Source, ValuePredicate};
use crate::aggregates::{AggregatorRef, AggregatorRegistry};
use crate::array_store::{BoundingBox, Catalog, StoredArray};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AggregationKind {
    Grid,
    Sliding,
    Hierarchical,
    Circular,
}

impl AggregationKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AggregationKind::Grid => "grid",
            AggregationKind::Sliding => "sliding",
            AggregationKind::Hierarchical => "hierarchical",
            AggregationKind::Circular => "circular",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "grid" => AggregationKind::Grid,
            "sliding" => AggregationKind::Sliding,
            "hierarchical" => AggregationKind::Hierarchical,
            "circular" => AggregationKind::Circular,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub preceding: u64,
    pub following: u64,
}

/// Kind-specific grouping parameters, one entry per array dimension where applicable.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GeometryParams {
    Grid {
        partitions: Vec<u64>,
    },
    Sliding {
        windows: Vec<Window>,
        stride: u64,
    },
    Ring {
        radius: u64,
        step: u64,
        mode: RingMode,
    },
}

/// A parsed and checked query, self-contained for planning.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryObject {
    pub aggregator: AggregatorRef,
    pub kind: AggregationKind,
    pub array: Arc<StoredArray>,
    pub bbox: BoundingBox,
    pub predicate: Option<ValuePredicate>,
    pub geometry: GeometryParams,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SemanticError {
    #[error("unknown array {0:?}")]
    UnknownArray(String),
    #[error("unknown aggregate {0:?}")]
    UnknownAggregate(String),
    #[error("index {index} on dimension {dim:?} is outside the physical layout [{start}, {end}]")]
    IndexOutsideLayout {
        dim: String,
        index: i64,
        start: i64,
        end: i64,
    },
    #[error("between bounds on dimension {dim:?} are reversed ({lo} > {hi})")]
    ReversedBounds { dim: String, lo: i64, hi: i64 },
    #[error("dimension {dim:?} is not in array {array:?}")]
    UnknownDimension { array: String, dim: String },
    #[error("dimension {0:?} is listed twice")]
    DuplicateDimension(String),
    #[error("attribute {found:?} does not match the array attribute {expected:?}")]
    AttributeMismatch { expected: String, found: String },
    #[error("between lists {found} coordinates, array {array:?} needs {expected} (lo then hi per dimension)")]
    DimensionCountMismatch {
        array: String,
        expected: usize,
        found: usize,
    },
    #[error("{0}")]
    InvalidParameter(String),
}

/// Resolves names against the catalog and registry, checks bounds, and fills defaults.
pub fn analyze(
    ast: &QueryAst,
    catalog: &Catalog,
    registry: &AggregatorRegistry,
) -> Result<QueryObject, SemanticError> {
    let array_name = ast.source.array();
    let array = catalog
        .get(array_name)
        .cloned()
        .ok_or_else(|| SemanticError::UnknownArray(array_name.to_string()))?;
    let aggregator = registry
        .get(&ast.aggregate)
        .cloned()
        .ok_or_else(|| SemanticError::UnknownAggregate(ast.aggregate.clone()))?;
    let schema = &array.schema;

    if ast.argument != schema.attribute {
        return Err(SemanticError::AttributeMismatch {
            expected: schema.attribute.clone(),
            found: ast.argument.clone(),
        });
    }

    let bbox = match &ast.source {
        Source::Array(_) => schema.full_box(),
        Source::Between { coords, .. } => {
            let rank = schema.rank();
            if coords.len() != 2 * rank {
                return Err(SemanticError::DimensionCountMismatch {
                    array: schema.name.clone(),
                    expected: 2 * rank,
                    found: coords.len(),
                });
            }
            let (lo, hi) = coords.split_at(rank);
            for (d, dim) in schema.dims.iter().enumerate() {
                for &index in [lo[d], hi[d]].iter() {
                    if index < dim.start || index > dim.end {
                        return Err(SemanticError::IndexOutsideLayout {
                            dim: dim.name.clone(),
                            index,
                            start: dim.start,
                            end: dim.end,
                        });
                    }
                }
                if lo[d] > hi[d] {
                    return Err(SemanticError::ReversedBounds {
                        dim: dim.name.clone(),
                        lo: lo[d],
                        hi: hi[d],
                    });
                }
            }
            BoundingBox {
                lo: lo.to_vec(),
                hi: hi.to_vec(),
            }
        }
    };

    if let Some(pred) = &ast.predicate {
        if let Some(c) = pred
            .conjuncts
            .iter()
            .find(|c| c.attribute != schema.attribute)
        {
            return Err(SemanticError::AttributeMismatch {
                expected: schema.attribute.clone(),
                found: c.attribute.clone(),
            });
        }
    }

    let resolve_dims =
        |names: &mut dyn Iterator<Item = &str>| -> Result<Vec<usize>, SemanticError> {
            let mut seen = vec![false; schema.rank()];
            names
                .map(|name| {
                    let d =
                        schema
                            .dim_index(name)
                            .ok_or_else(|| SemanticError::UnknownDimension {
                                array: schema.name.clone(),
                                dim: name.to_string(),
                            })?;
                    if std::mem::replace(&mut seen[d], true) {
                        return Err(SemanticError::DuplicateDimension(name.to_string()));
                    }
                    Ok(d)
                })
                .collect()
        };

    let (kind, geometry) = match &ast.shape {
        ShapeClause::Grid { partitions } => {
            let dims = resolve_dims(&mut partitions.iter().map(|(n, _)| n.as_str()))?;
            // Dimensions left out of the clause form a single block along that axis.
            let mut sizes = bbox.extents();
            for (&d, (name, size)) in dims.iter().zip(partitions) {
                sizes[d] = positive(*size, || format!("partition size for {name:?}"))?;
            }
            (
                AggregationKind::Grid,
                GeometryParams::Grid { partitions: sizes },
            )
        }
        ShapeClause::Window { windows, stride } => {
            let dims = resolve_dims(&mut windows.iter().map(|w| w.dim.as_str()))?;
            let mut resolved = vec![
                Window {
                    preceding: 0,
                    following: 0
                };
                schema.rank()
            ];
            for (&d, w) in dims.iter().zip(windows) {
                resolved[d] = Window {
                    preceding: non_negative(w.preceding, || format!("preceding for {:?}", w.dim))?,
                    following: non_negative(w.following, || format!("following for {:?}", w.dim))?,
                };
            }
            let stride = match stride {
                Some(s) => positive(*s, || "stride".to_string())?,
                None => 1,
            };
            (
                AggregationKind::Sliding,
                GeometryParams::Sliding {
                    windows: resolved,
                    stride,
                },
            )
        }
        ShapeClause::Hierarchical(ring) => (
            AggregationKind::Hierarchical,
            ring_params(ring, RingMode::Nested)?,
        ),
        ShapeClause::Circular(ring) => (
            AggregationKind::Circular,
            ring_params(ring, RingMode::Disjoint)?,
        ),
    };

    Ok(QueryObject {
        aggregator,
        kind,
        array,
        bbox,
        predicate: ast.predicate.clone(),
        geometry,
    })
}

fn ring_params(ring: &RingClause, default_mode: RingMode) -> Result<GeometryParams, SemanticError> {
    Ok(GeometryParams::Ring {
        radius: non_negative(ring.radius, || "radius".to_string())?,
        step: positive(ring.step, || "step".to_string())?,
        mode: ring.mode.unwrap_or(default_mode),
    })
}

fn positive(v: i64, what: impl FnOnce() -> String) -> Result<u64, SemanticError> {
    if v >= 1 {
        Ok(v as u64)
    } else {
        Err(SemanticError::InvalidParameter(format!(
            "{} must be at least 1, got {v}",
            what()
        )))
    }
}

fn non_negative(v: i64, what: impl FnOnce() -> String) -> Result<u64, SemanticError> {
    if v >= 0 {
        Ok(v as u64)
    } else {
        Err(SemanticError::InvalidParameter(format!(
            "{} must not be negative, got {v}",
            what()
        )))
    }
}

/// Deterministic multi-line rendering of every query-object field.
pub fn explain(obj: &QueryObject) -> String {
    let schema = &obj.array.schema;
    let mut out = String::new();
    let _ = writeln!(out, "kind: {}", obj.kind.as_str());
    let _ = writeln!(
        out,
        "aggregator: {} ({})",
        obj.aggregator.name(),
        if obj.aggregator.algebraic() {
            "algebraic"
        } else {
            "holistic"
        }
    );
    let _ = writeln!(
        out,
        "array: {} ({}, attribute {})",
        schema.name, schema.element_type, schema.attribute
    );
    let dims: Vec<String> = schema
        .dims
        .iter()
        .map(|d| format!("{}[{}..{}] chunk {}", d.name, d.start, d.end, d.chunk))
        .collect();
    let _ = writeln!(out, "dims: {}", dims.join(", "));
    let total = schema.cell_count();
    let cells = obj.bbox.cell_count();
    let _ = writeln!(
        out,
        "box: {} ({} of {} cells, {:.2}%)",
        obj.bbox,
        cells,
        total,
        100.0 * cells as f64 / total as f64
    );
    match &obj.predicate {
        Some(p) => {
            let _ = writeln!(out, "predicate: {p}");
        }
        None => {
            let _ = writeln!(out, "predicate: none");
        }
    }
    let named = |values: Vec<String>| -> String {
        schema
            .dims
            .iter()
            .zip(values)
            .map(|(d, v)| format!("{}={}", d.name, v))
            .collect::<Vec<_>>()
            .join(", ")
    };
    match &obj.geometry {
        GeometryParams::Grid { partitions } => {
            let _ = writeln!(
                out,
                "partition: {}",
                named(partitions.iter().map(u64::to_string).collect())
            );
        }
        GeometryParams::Sliding { windows, stride } => {
            let _ = writeln!(
                out,
                "window: {}",
                named(
                    windows
                        .iter()
                        .map(|w| format!("{} preceding/{} following", w.preceding, w.following))
                        .collect()
                )
            );
            let _ = writeln!(out, "stride: {stride}");
        }
        GeometryParams::Ring { radius, step, mode } => {
            let metric = match obj.kind {
                AggregationKind::Circular => "euclidean",
                _ => "chebyshev",
            };
            let _ = writeln!(out, "radius: {radius}");
            let _ = writeln!(out, "step: {step}");
            let _ = writeln!(out, "mode: {}", mode.as_str());
            let _ = writeln!(out, "metric: {metric}");
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aql::parse;
    use crate::array_store::{ArraySchema, Dimension, ElementType};

    fn catalog() -> Catalog {
        let mut catalog = Catalog::new();
        for name in ["L1", "L2"] {
            catalog
                .register_schema(
                    ArraySchema::new(
                        name,
                        ElementType::Float64,
                        "Val",
                        vec![
                            Dimension::new("x", 0, 32767, 512),
                            Dimension::new("y", 0, 32767, 512),
                        ],
                    )
                    .unwrap(),
                )
                .unwrap();
        }
        catalog
    }

    fn run(q: &str) -> Result<QueryObject, SemanticError> {
        analyze(
            &parse(q).unwrap(),
            &catalog(),
            &AggregatorRegistry::with_builtins(),
        )
    }

    #[test]
    fn quarter_grid_subset() {
        let obj = run(
            "select avg(Val) from between (L1, 16384, 0, 24575, 32767) grid as (partition by x 512, y 512)",
        )
        .unwrap();
        assert_eq!(obj.kind, AggregationKind::Grid);
        assert_eq!(obj.bbox.lo, vec![16384, 0]);
        assert_eq!(obj.bbox.hi, vec![24575, 32767]);
        assert_eq!(obj.bbox.cell_count() * 4, obj.array.schema.cell_count());
        assert_eq!(
            obj.geometry,
            GeometryParams::Grid {
                partitions: vec![512, 512]
            }
        );
        assert_eq!(obj.aggregator.name(), "AVG");
    }

    #[test]
    fn error_paths() {
        type Check = fn(&SemanticError) -> bool;
        let cases: &[(&str, Check)] = &[
            (
                "select avg(Val) from between (L9, 16384, 0, 24575, 32767) grid as (partition by x 512)",
                |e| matches!(e, SemanticError::UnknownArray(_)),
            ),
            (
                "select mode_of(Val) from L1 grid as (partition by x 512)",
                |e| matches!(e, SemanticError::UnknownAggregate(_)),
            ),
            (
                "select avg(Val) from between (L1, 0, 0, 40000, 32767) grid as (partition by x 512)",
                |e| matches!(e, SemanticError::IndexOutsideLayout { index: 40000, .. }),
            ),
            (
                "select avg(Val) from between (L1, -1, 0, 5, 5) grid as (partition by x 512)",
                |e| matches!(e, SemanticError::IndexOutsideLayout { index: -1, .. }),
            ),
            (
                "select avg(Val) from between (L1, 9, 0, 5, 5) grid as (partition by x 512)",
                |e| matches!(e, SemanticError::ReversedBounds { .. }),
            ),
            (
                "select avg(Val) from L1 grid as (partition by z 512)",
                |e| matches!(e, SemanticError::UnknownDimension { .. }),
            ),
            (
                "select avg(Val) from L1 grid as (partition by x 512 x 4)",
                |e| matches!(e, SemanticError::DuplicateDimension(_)),
            ),
            (
                "select avg(Val) from L1 where age > 33 grid as (partition by x 512)",
                |e| matches!(e, SemanticError::AttributeMismatch { .. }),
            ),
            (
                "select avg(val) from L1 grid as (partition by x 512)",
                |e| matches!(e, SemanticError::AttributeMismatch { .. }),
            ),
            (
                "select avg(Val) from between (L1, 0, 0, 1, 1, 2, 2) grid as (partition by x 512)",
                |e| matches!(e, SemanticError::DimensionCountMismatch { expected: 4, found: 6, .. }),
            ),
            (
                "select avg(Val) from L1 grid as (partition by x 0)",
                |e| matches!(e, SemanticError::InvalidParameter(_)),
            ),
            (
                "select avg(Val) from L1 fixed window as (partition by x -1 preceding and 1 following)",
                |e| matches!(e, SemanticError::InvalidParameter(_)),
            ),
            (
                "select avg(Val) from L1 fixed window as (partition by x 1 preceding and 1 following stride 0)",
                |e| matches!(e, SemanticError::InvalidParameter(_)),
            ),
            (
                "select avg(Val) from L1 circular as (radius -1 step 1)",
                |e| matches!(e, SemanticError::InvalidParameter(_)),
            ),
            (
                "select avg(Val) from L1 hierarchical as (radius 1 step 0)",
                |e| matches!(e, SemanticError::InvalidParameter(_)),
            ),
        ];
        for (q, check) in cases {
            let err = run(q).unwrap_err();
            assert!(check(&err), "{q}: {err:?}");
        }
        let err = run(
            "select avg(Val) from between (L1, 0, 0, 40000, 32767) grid as (partition by x 512)",
        )
        .unwrap_err();
        assert!(err.to_string().contains("outside the physical layout"));
        let err = run("select avg(Val) from L9 grid as (partition by x 512)").unwrap_err();
        assert!(err.to_string().contains("unknown array"));
    }

    #[test]
    fn defaults_are_filled() {
        let obj = run(
            "select avg(Val) from L1 fixed window as (partition by x 1 preceding and 1 following)",
        )
        .unwrap();
        assert_eq!(
            obj.geometry,
            GeometryParams::Sliding {
                windows: vec![
                    Window {
                        preceding: 1,
                        following: 1
                    },
                    Window {
                        preceding: 0,
                        following: 0
                    }
                ],
                stride: 1
            }
        );
        let text = explain(&obj);
        assert!(text.contains("kind: sliding"), "{text}");
        assert!(text.contains("stride: 1"), "{text}");

        let grid = run("select sum(Val) from L1 grid as (partition by y 512)").unwrap();
        assert_eq!(
            grid.geometry,
            GeometryParams::Grid {
                partitions: vec![32768, 512]
            }
        );
        let text = explain(&grid);
        assert!(
            text.contains("kind: grid") && text.contains("partition: x=32768, y=512"),
            "{text}"
        );

        let circ = run("select avg(Val) from L1 circular as (radius 4 step 2)").unwrap();
        assert!(matches!(
            circ.geometry,
            GeometryParams::Ring {
                mode: RingMode::Disjoint,
                ..
            }
        ));
        assert!(explain(&circ).contains("mode: disjoint"));
        let hier = run("select avg(Val) from L1 hierarchical as (radius 4 step 2)").unwrap();
        assert!(explain(&hier).contains("mode: nested"));
        assert!(explain(&hier).contains("metric: chebyshev"));
    }

    #[test]
    fn explain_is_deterministic() {
        let q = "select max(Val) from between (L2, 0, 0, 16383, 32767) where Val >= 0.5 grid as (partition by x 512, y 512)";
        let a = explain(&run(q).unwrap());
        let b = explain(&run(q).unwrap());
        assert_eq!(a, b);
        assert!(a.contains("predicate: Val >= 0.5"));
        assert!(a.contains("50.00%"));
    }
}
