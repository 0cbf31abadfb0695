//! Job planning: template selection, execution mode, and parameter configuration files.
//!
//! A parameter configuration is UTF-8 text with one `key=value` per line, keys sorted,
//! and `#` comment lines ignored:
//!
//! ```text
//! aggregator=avg
//! array.attribute=Val
//! array.dims=x:0:1023:16,y:0:1023:16
//! array.element_type=float64
//! array.name=L1
//! array.path=data/L1.bin
//! box.hi.x=1023
//! box.hi.y=1023
//! box.lo.x=0
//! box.lo.y=0
//! geometry.kind=grid
//! geometry.partition.x=16
//! geometry.partition.y=16
//! mode=optimized
//! template=grid_opt
//! workers=1
//! ```
//!
//! Sliding plans use `geometry.window.<dim>.preceding`, `geometry.window.<dim>.following`
//! and `geometry.stride`; ring plans use `geometry.radius`, `geometry.step` and
//! `geometry.mode`. A value predicate is stored as `predicate.<n>=<attr> <op> <constant>`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::aggregates::{AggregatorRef, AggregatorRegistry};
use crate::aql::{
    analyze, AggregationKind, Comparator, Conjunct, GeometryParams, QueryAst, QueryObject,
    RingClause, RingMode, SemanticError, ShapeClause, Source, ValuePredicate, WindowItem,
};
use crate::array_store::{compute_splits, ArraySplit, Catalog, ElementType, StoreError};
use crate::grouping::{GroupGeometry, GroupingError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExecutionMode {
    /// Mappers emit every raw value; reducers aggregate.
    Naive,
    /// Mappers emit one local summary per touched group; reducers merge.
    Optimized,
}

impl ExecutionMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ExecutionMode::Naive => "naive",
            ExecutionMode::Optimized => "optimized",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "naive" => Some(ExecutionMode::Naive),
            "optimized" => Some(ExecutionMode::Optimized),
            _ => None,
        }
    }
}

impl fmt::Display for ExecutionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ModeRequest {
    /// Optimized when the aggregator is algebraic.
    #[default]
    Auto,
    Naive,
    Optimized,
}

impl ModeRequest {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "auto" => Some(ModeRequest::Auto),
            "naive" => Some(ModeRequest::Naive),
            "optimized" => Some(ModeRequest::Optimized),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TemplateId {
    GridNaive,
    GridOpt,
    SlidingNaive,
    SlidingOpt,
    RingNaive,
    RingOpt,
}

impl TemplateId {
    pub const ALL: [TemplateId; 6] = [
        TemplateId::GridNaive,
        TemplateId::GridOpt,
        TemplateId::SlidingNaive,
        TemplateId::SlidingOpt,
        TemplateId::RingNaive,
        TemplateId::RingOpt,
    ];

    /// Hierarchical and circular aggregation share the ring templates.
    pub fn select(kind: AggregationKind, mode: ExecutionMode) -> Self {
        use AggregationKind::*;
        use ExecutionMode::*;
        match (kind, mode) {
            (Grid, Naive) => TemplateId::GridNaive,
            (Grid, Optimized) => TemplateId::GridOpt,
            (Sliding, Naive) => TemplateId::SlidingNaive,
            (Sliding, Optimized) => TemplateId::SlidingOpt,
            (Hierarchical | Circular, Naive) => TemplateId::RingNaive,
            (Hierarchical | Circular, Optimized) => TemplateId::RingOpt,
        }
    }

    pub fn mode(self) -> ExecutionMode {
        match self {
            TemplateId::GridNaive | TemplateId::SlidingNaive | TemplateId::RingNaive => {
                ExecutionMode::Naive
            }
            _ => ExecutionMode::Optimized,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::GridNaive => "grid_naive",
            TemplateId::GridOpt => "grid_opt",
            TemplateId::SlidingNaive => "sliding_naive",
            TemplateId::SlidingOpt => "sliding_opt",
            TemplateId::RingNaive => "ring_naive",
            TemplateId::RingOpt => "ring_opt",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Everything the engine needs to run one query.
#[derive(Debug, Clone, PartialEq)]
pub struct JobPlan {
    pub template: TemplateId,
    pub query: QueryObject,
    pub geometry: GroupGeometry,
    /// One split per chunk intersecting the query box, in chunk order.
    pub splits: Vec<ArraySplit>,
    pub mode: ExecutionMode,
    pub workers: usize,
}

impl JobPlan {
    pub fn aggregator(&self) -> &AggregatorRef {
        &self.query.aggregator
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers.max(1);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOutcome {
    pub plan: JobPlan,
    pub warnings: Vec<String>,
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error(transparent)]
    Grouping(#[from] GroupingError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

pub fn plan(obj: &QueryObject, request: ModeRequest) -> Result<PlanOutcome, PlanError> {
    let algebraic = obj.aggregator.algebraic();
    let mut warnings = Vec::new();
    let mode = match request {
        ModeRequest::Auto if algebraic => ExecutionMode::Optimized,
        ModeRequest::Auto | ModeRequest::Naive => ExecutionMode::Naive,
        ModeRequest::Optimized if algebraic => ExecutionMode::Optimized,
        ModeRequest::Optimized => {
            warnings.push(format!(
                "{} is holistic and cannot aggregate in the mapper; running naive instead",
                obj.aggregator.name()
            ));
            ExecutionMode::Naive
        }
    };
    Ok(PlanOutcome {
        plan: build(obj.clone(), mode, 1)?,
        warnings,
    })
}

fn build(query: QueryObject, mode: ExecutionMode, workers: usize) -> Result<JobPlan, PlanError> {
    let geometry = GroupGeometry::from_query(&query)?;
    let splits = compute_splits(&query.array.schema, &query.bbox)?;
    Ok(JobPlan {
        template: TemplateId::select(query.kind, mode),
        query,
        geometry,
        splits,
        mode,
        workers: workers.max(1),
    })
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("missing key {0}")]
    MissingKey(String),
    #[error("unknown key {0}")]
    UnknownKey(String),
    #[error("invalid value for {key}: {value:?}")]
    InvalidValue { key: String, value: String },
    #[error("array {0} is not in the catalog")]
    UnknownArray(String),
    #[error("array {array} does not match the catalog: {detail}")]
    SchemaMismatch { array: String, detail: String },
    #[error("unknown aggregator {0}")]
    UnknownAggregator(String),
    #[error("holistic aggregator cannot run optimized ({0})")]
    HolisticOptimized(String),
    #[error("template {template} does not match {kind} aggregation in {mode} mode")]
    TemplateMismatch {
        template: String,
        kind: &'static str,
        mode: &'static str,
    },
    #[error(transparent)]
    Semantic(#[from] SemanticError),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

/// Flat, sorted key-value form of a plan.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ParamConfig {
    entries: BTreeMap<String, String>,
}

impl ParamConfig {
    pub fn from_plan(plan: &JobPlan) -> Self {
        let q = &plan.query;
        let schema = &q.array.schema;
        let mut e = BTreeMap::new();
        let mut put = |k: String, v: String| {
            e.insert(k, v);
        };
        put(
            "aggregator".into(),
            q.aggregator.name().to_ascii_lowercase(),
        );
        put("array.name".into(), schema.name.clone());
        put("array.path".into(), q.array.data_path.display().to_string());
        put("array.element_type".into(), schema.element_type.to_string());
        put("array.attribute".into(), schema.attribute.clone());
        put(
            "array.dims".into(),
            schema
                .dims
                .iter()
                .map(|d| format!("{}:{}:{}:{}", d.name, d.start, d.end, d.chunk))
                .collect::<Vec<_>>()
                .join(","),
        );
        for (i, d) in schema.dims.iter().enumerate() {
            put(format!("box.lo.{}", d.name), q.bbox.lo[i].to_string());
            put(format!("box.hi.{}", d.name), q.bbox.hi[i].to_string());
        }
        put("geometry.kind".into(), q.kind.as_str().into());
        match &q.geometry {
            GeometryParams::Grid { partitions } => {
                for (d, p) in schema.dims.iter().zip(partitions) {
                    put(format!("geometry.partition.{}", d.name), p.to_string());
                }
            }
            GeometryParams::Sliding { windows, stride } => {
                for (d, w) in schema.dims.iter().zip(windows) {
                    put(
                        format!("geometry.window.{}.preceding", d.name),
                        w.preceding.to_string(),
                    );
                    put(
                        format!("geometry.window.{}.following", d.name),
                        w.following.to_string(),
                    );
                }
                put("geometry.stride".into(), stride.to_string());
            }
            GeometryParams::Ring { radius, step, mode } => {
                put("geometry.radius".into(), radius.to_string());
                put("geometry.step".into(), step.to_string());
                put("geometry.mode".into(), mode.as_str().into());
            }
        }
        if let Some(p) = &q.predicate {
            for (i, c) in p.conjuncts.iter().enumerate() {
                put(
                    format!("predicate.{i}"),
                    format!("{} {} {}", c.attribute, c.comparator.as_str(), c.constant),
                );
            }
        }
        put("mode".into(), plan.mode.as_str().into());
        put("template".into(), plan.template.as_str().into());
        put("workers".into(), plan.workers.to_string());
        Self { entries: e }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.entries.insert(key.into(), value.into());
    }

    pub fn remove(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::from("# aqlmr job parameters\n");
        for (k, v) in &self.entries {
            out.push_str(k);
            out.push('=');
            out.push_str(v);
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let malformed = |message: String| ConfigError::Malformed {
                line: i + 1,
                message,
            };
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| malformed(format!("expected key=value, found {line:?}")))?;
            let k = k.trim();
            if k.is_empty() {
                return Err(malformed("empty key".into()));
            }
            if entries
                .insert(k.to_string(), v.trim().to_string())
                .is_some()
            {
                return Err(malformed(format!("duplicate key {k}")));
            }
        }
        Ok(Self { entries })
    }

    /// Rebuilds the plan, re-validating every parameter against the catalog and registry.
    pub fn to_plan(
        &self,
        catalog: &Catalog,
        registry: &AggregatorRegistry,
    ) -> Result<JobPlan, ConfigError> {
        let mut r = Reader {
            cfg: self,
            used: Vec::new(),
        };

        let name = r.req("array.name")?;
        let array = catalog
            .get(name)
            .cloned()
            .ok_or_else(|| ConfigError::UnknownArray(name.to_string()))?;
        let schema = &array.schema;
        let mismatch = |detail: String| ConfigError::SchemaMismatch {
            array: schema.name.clone(),
            detail,
        };
        r.req("array.path")?;
        let element_type = r.req("array.element_type")?;
        if ElementType::parse(element_type) != Some(schema.element_type) {
            return Err(mismatch(format!(
                "element type {element_type}, catalog has {}",
                schema.element_type
            )));
        }
        let attribute = r.req("array.attribute")?;
        if attribute != schema.attribute {
            return Err(mismatch(format!(
                "attribute {attribute}, catalog has {}",
                schema.attribute
            )));
        }
        let dims = r.req("array.dims")?;
        let expected_dims = schema
            .dims
            .iter()
            .map(|d| format!("{}:{}:{}:{}", d.name, d.start, d.end, d.chunk))
            .collect::<Vec<_>>()
            .join(",");
        if dims != expected_dims {
            return Err(mismatch(format!(
                "dims {dims}, catalog has {expected_dims}"
            )));
        }

        let mut coords = Vec::with_capacity(2 * schema.rank());
        for side in ["lo", "hi"] {
            for d in &schema.dims {
                coords.push(r.int::<i64>(&format!("box.{side}.{}", d.name))?);
            }
        }

        let kind_key = "geometry.kind";
        let kind_text = r.req(kind_key)?;
        let kind = AggregationKind::parse(kind_text).ok_or_else(|| invalid(kind_key, kind_text))?;
        let shape = match kind {
            AggregationKind::Grid => {
                let mut partitions = Vec::new();
                for d in &schema.dims {
                    let p = r.int::<i64>(&format!("geometry.partition.{}", d.name))?;
                    partitions.push((d.name.clone(), p));
                }
                ShapeClause::Grid { partitions }
            }
            AggregationKind::Sliding => {
                let mut windows = Vec::new();
                for d in &schema.dims {
                    windows.push(WindowItem {
                        dim: d.name.clone(),
                        preceding: r.int(&format!("geometry.window.{}.preceding", d.name))?,
                        following: r.int(&format!("geometry.window.{}.following", d.name))?,
                    });
                }
                let stride = Some(r.int("geometry.stride")?);
                ShapeClause::Window { windows, stride }
            }
            AggregationKind::Hierarchical | AggregationKind::Circular => {
                let mode_text = r.req("geometry.mode")?;
                let ring = RingClause {
                    radius: r.int("geometry.radius")?,
                    step: r.int("geometry.step")?,
                    mode: Some(
                        RingMode::parse(mode_text)
                            .ok_or_else(|| invalid("geometry.mode", mode_text))?,
                    ),
                };
                if kind == AggregationKind::Circular {
                    ShapeClause::Circular(ring)
                } else {
                    ShapeClause::Hierarchical(ring)
                }
            }
        };

        let mut conjuncts = Vec::new();
        for i in 0.. {
            let key = format!("predicate.{i}");
            let Some(text) = r.opt(&key) else { break };
            conjuncts.push(parse_conjunct(text).ok_or_else(|| invalid(&key, text))?);
        }
        let predicate = (!conjuncts.is_empty()).then_some(ValuePredicate { conjuncts });

        let agg_name = r.req("aggregator")?;
        let aggregator = registry
            .get(agg_name)
            .ok_or_else(|| ConfigError::UnknownAggregator(agg_name.to_string()))?;
        let mode_text = r.req("mode")?;
        let mode = ExecutionMode::parse(mode_text).ok_or_else(|| invalid("mode", mode_text))?;
        if mode == ExecutionMode::Optimized && !aggregator.algebraic() {
            return Err(ConfigError::HolisticOptimized(
                aggregator.name().to_string(),
            ));
        }
        let template_text = r.req("template")?;
        let template =
            TemplateId::parse(template_text).ok_or_else(|| invalid("template", template_text))?;
        if template != TemplateId::select(kind, mode) {
            return Err(ConfigError::TemplateMismatch {
                template: template_text.to_string(),
                kind: kind.as_str(),
                mode: mode.as_str(),
            });
        }
        let workers: usize = r.int("workers")?;
        if workers == 0 {
            return Err(invalid("workers", "0"));
        }

        if let Some(extra) = self.keys().find(|k| !r.used.iter().any(|u| u == k)) {
            return Err(ConfigError::UnknownKey(extra.to_string()));
        }

        let ast = QueryAst {
            aggregate: agg_name.to_string(),
            argument: attribute.to_string(),
            source: Source::Between {
                array: name.to_string(),
                coords,
            },
            predicate,
            shape,
        };
        let query = analyze(&ast, catalog, registry)?;
        Ok(build(query, mode, workers)?)
    }
}

struct Reader<'a> {
    cfg: &'a ParamConfig,
    used: Vec<String>,
}

impl<'a> Reader<'a> {
    fn opt(&mut self, key: &str) -> Option<&'a str> {
        let v = self.cfg.get(key)?;
        self.used.push(key.to_string());
        Some(v)
    }

    fn req(&mut self, key: &str) -> Result<&'a str, ConfigError> {
        self.opt(key)
            .ok_or_else(|| ConfigError::MissingKey(key.to_string()))
    }

    fn int<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, ConfigError> {
        let v = self.req(key)?;
        v.parse().map_err(|_| invalid(key, v))
    }
}

fn invalid(key: &str, value: &str) -> ConfigError {
    ConfigError::InvalidValue {
        key: key.to_string(),
        value: value.to_string(),
    }
}

fn parse_conjunct(text: &str) -> Option<Conjunct> {
    let mut parts = text.split_whitespace();
    let attribute = parts.next()?.to_string();
    let comparator = Comparator::parse(parts.next()?)?;
    let constant: f64 = parts.next()?.parse().ok()?;
    if parts.next().is_some() || !constant.is_finite() {
        return None;
    }
    Some(Conjunct {
        attribute,
        comparator,
        constant,
    })
}

/// Writes the plan's configuration to `out_path` and returns it.
pub fn emit_param_config(plan: &JobPlan, out_path: &Path) -> Result<ParamConfig, ConfigError> {
    let cfg = ParamConfig::from_plan(plan);
    fs::write(out_path, cfg.to_text()).map_err(|source| ConfigError::Io {
        path: out_path.to_path_buf(),
        source,
    })?;
    Ok(cfg)
}

pub fn load_param_config(
    path: &Path,
    catalog: &Catalog,
    registry: &AggregatorRegistry,
) -> Result<JobPlan, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    ParamConfig::parse(&text)?.to_plan(catalog, registry)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::aql::parse;
    use crate::array_store::{ArraySchema, Dimension};

    fn catalog() -> Catalog {
        let mut c = Catalog::new();
        c.register_schema(
            ArraySchema::new(
                "L1",
                ElementType::Float64,
                "Val",
                vec![
                    Dimension::new("x", 0, 1023, 16),
                    Dimension::new("y", 0, 1023, 16),
                ],
            )
            .unwrap(),
        )
        .unwrap();
        c
    }

    fn query(text: &str) -> QueryObject {
        analyze(
            &parse(text).unwrap(),
            &catalog(),
            &AggregatorRegistry::with_builtins(),
        )
        .unwrap()
    }

    fn round_trip(plan: &JobPlan) -> JobPlan {
        ParamConfig::parse(&ParamConfig::from_plan(plan).to_text())
            .unwrap()
            .to_plan(&catalog(), &AggregatorRegistry::with_builtins())
            .unwrap()
    }

    const GRID: &str = "select avg(Val) from L1 grid as (partition by x 16, y 16)";

    #[test]
    fn auto_picks_optimized_for_algebraic() {
        let out = plan(&query(GRID), ModeRequest::Auto).unwrap();
        assert_eq!(out.plan.template, TemplateId::GridOpt);
        assert_eq!(out.plan.mode, ExecutionMode::Optimized);
        assert_eq!(out.plan.geometry.group_count(), 64 * 64);
        assert_eq!(out.plan.splits.len(), 64 * 64);
        assert!(out.warnings.is_empty());
    }

    #[test]
    fn holistic_optimized_request_downgrades() {
        let out = plan(
            &query("select median(Val) from L1 grid as (partition by x 16, y 16)"),
            ModeRequest::Optimized,
        )
        .unwrap();
        assert_eq!(out.plan.template, TemplateId::GridNaive);
        assert_eq!(out.warnings.len(), 1);
        assert!(out.warnings[0].contains("MEDIAN"));
    }

    #[test]
    fn explicit_naive_is_honored() {
        let out = plan(
            &query("select avg(Val) from L1 fixed window as (partition by x 1 preceding and 1 following, y 1 preceding and 1 following)"),
            ModeRequest::Naive,
        )
        .unwrap();
        assert_eq!(out.plan.template, TemplateId::SlidingNaive);
        assert!(out.warnings.is_empty());
    }

    #[test]
    fn every_kind_and_mode_has_a_template() {
        for kind in [
            AggregationKind::Grid,
            AggregationKind::Sliding,
            AggregationKind::Hierarchical,
            AggregationKind::Circular,
        ] {
            for mode in [ExecutionMode::Naive, ExecutionMode::Optimized] {
                let t = TemplateId::select(kind, mode);
                assert_eq!(t.mode(), mode);
                assert_eq!(TemplateId::parse(t.as_str()), Some(t));
            }
        }
    }

    #[test]
    fn config_text_is_sorted_and_stable() {
        let p = plan(&query(GRID), ModeRequest::Auto).unwrap().plan;
        let text = ParamConfig::from_plan(&p).to_text();
        assert!(text.contains("template=grid_opt\n"));
        assert!(text.contains("geometry.partition.x=16\n"));
        let keys: Vec<&str> = text
            .lines()
            .filter(|l| !l.starts_with('#'))
            .map(|l| l.split('=').next().unwrap())
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert_eq!(text, ParamConfig::from_plan(&p).to_text());
    }

    #[test]
    fn config_round_trips_every_kind() {
        for text in [
            GRID,
            "select sum(Val) from between (L1, 512, 0, 767, 1023) where Val > 0.5 and Val <> 2 grid as (partition by x 16, y 16)",
            "select avg(Val) from between (L1, 0, 0, 99, 99) fixed window as (partition by x 1 preceding and 2 following, y 0 preceding and 0 following stride 3)",
            "select max(Val) from L1 hierarchical as (radius 4 step 8)",
            "select min(Val) from between (L1, 10, 10, 50, 90) circular as (radius 0 step 3 mode nested)",
            "select median(Val) from L1 circular as (radius 1 step 1)",
        ] {
            let p = plan(&query(text), ModeRequest::Auto).unwrap().plan.with_workers(3);
            assert_eq!(round_trip(&p), p, "{text}");
        }
    }

    fn grid_config() -> ParamConfig {
        ParamConfig::from_plan(&plan(&query(GRID), ModeRequest::Auto).unwrap().plan)
    }

    fn load(cfg: &ParamConfig) -> Result<JobPlan, ConfigError> {
        cfg.to_plan(&catalog(), &AggregatorRegistry::with_builtins())
    }

    #[test]
    fn optimized_median_config_is_rejected() {
        let mut cfg = grid_config();
        cfg.set("aggregator", "median");
        let err = load(&cfg).unwrap_err();
        assert!(
            err.to_string()
                .contains("holistic aggregator cannot run optimized"),
            "{err}"
        );
    }

    #[test]
    fn config_errors() {
        let mut cfg = grid_config();
        cfg.set("array.name", "L9");
        assert!(matches!(load(&cfg), Err(ConfigError::UnknownArray(_))));

        let mut cfg = grid_config();
        cfg.remove("box.lo.x");
        assert!(matches!(load(&cfg), Err(ConfigError::MissingKey(k)) if k == "box.lo.x"));

        let mut cfg = grid_config();
        cfg.set("geometry.colour", "blue");
        assert!(matches!(load(&cfg), Err(ConfigError::UnknownKey(_))));

        let mut cfg = grid_config();
        cfg.set("array.dims", "x:0:2047:16,y:0:1023:16");
        assert!(matches!(
            load(&cfg),
            Err(ConfigError::SchemaMismatch { .. })
        ));

        let mut cfg = grid_config();
        cfg.set("template", "sliding_opt");
        assert!(matches!(
            load(&cfg),
            Err(ConfigError::TemplateMismatch { .. })
        ));

        let mut cfg = grid_config();
        cfg.set("box.hi.x", "5000");
        assert!(matches!(load(&cfg), Err(ConfigError::Semantic(_))));

        let mut cfg = grid_config();
        cfg.set("workers", "0");
        assert!(matches!(load(&cfg), Err(ConfigError::InvalidValue { .. })));

        assert!(matches!(
            ParamConfig::parse("# c\nnovalue\n"),
            Err(ConfigError::Malformed { line: 2, .. })
        ));
        assert!(matches!(
            ParamConfig::parse("a=1\na=2\n"),
            Err(ConfigError::Malformed { line: 2, .. })
        ));
    }

    #[test]
    fn emit_and_load_files() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("job.conf");
        let p = plan(&query(GRID), ModeRequest::Auto).unwrap().plan;
        emit_param_config(&p, &path).unwrap();
        let first = fs::read(&path).unwrap();
        emit_param_config(&p, &path).unwrap();
        assert_eq!(first, fs::read(&path).unwrap());
        let loaded =
            load_param_config(&path, &catalog(), &AggregatorRegistry::with_builtins()).unwrap();
        assert_eq!(loaded, p);
        assert!(matches!(
            load_param_config(
                &dir.path().join("absent.conf"),
                &catalog(),
                &AggregatorRegistry::with_builtins()
            ),
            Err(ConfigError::Io { .. })
        ));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn kinds() -> impl Strategy<Value = String> {
            let agg = prop_oneof![
                Just("sum"),
                Just("count"),
                Just("avg"),
                Just("min"),
                Just("max"),
                Just("stddev"),
                Just("geomean"),
                Just("median")
            ];
            let bx = (0i64..1000, 0i64..1000, 1i64..24, 1i64..24);
            let shape = prop_oneof![
                (1i64..40, 1i64..40)
                    .prop_map(|(a, b)| format!("grid as (partition by x {a}, y {b})")),
                (0i64..4, 0i64..4, 0i64..4, 1i64..5).prop_map(|(a, b, c, s)| format!(
                    "fixed window as (partition by x {a} preceding and {b} following, y {c} preceding and 0 following stride {s})"
                )),
                (0i64..6, 1i64..4, any::<bool>(), any::<bool>()).prop_map(|(r, s, circ, nested)| format!(
                    "{} as (radius {r} step {s} mode {})",
                    if circ { "circular" } else { "hierarchical" },
                    if nested { "nested" } else { "disjoint" }
                )),
            ];
            let pred = prop::option::of((-2.0f64..2.0).prop_map(|c| format!(" where Val >= {c}")));
            (agg, bx, pred, shape).prop_map(|(a, (x, y, w, h), p, s)| {
                format!(
                    "select {a}(Val) from between (L1, {x}, {y}, {}, {}){} {s}",
                    x + w,
                    y + h,
                    p.unwrap_or_default()
                )
            })
        }

        proptest! {
            #[test]
            fn load_of_emit_is_identity(text in kinds(), naive in any::<bool>(), workers in 1usize..9) {
                let req = if naive { ModeRequest::Naive } else { ModeRequest::Auto };
                let p = plan(&query(&text), req).unwrap().plan.with_workers(workers);
                prop_assert_eq!(round_trip(&p), p.clone());
                prop_assert_eq!(plan(&query(&text), req).unwrap().plan.with_workers(workers), p);
            }
        }
    }
}
