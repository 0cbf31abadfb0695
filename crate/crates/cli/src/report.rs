//! JSON reports. Key order follows field order; wall-clock data lives only under `timings`.

use std::collections::BTreeMap;
use std::time::Duration;

use aqlmr::engine::{JobResult, PhaseTimings};
use aqlmr::planner::{JobPlan, ParamConfig};
use aqlmr::CounterSnapshot;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanSummary {
    pub template: String,
    pub kind: String,
    pub aggregator: String,
    pub algebraic: bool,
    pub array: String,
    #[serde(rename = "box")]
    pub bbox: String,
    pub box_cells: u64,
    pub predicate: Option<String>,
    pub geometry: BTreeMap<String, String>,
    pub splits: usize,
}

impl PlanSummary {
    pub fn new(plan: &JobPlan) -> Self {
        let q = &plan.query;
        let cfg = ParamConfig::from_plan(plan);
        let geometry = cfg
            .keys()
            .filter_map(|k| {
                let short = k.strip_prefix("geometry.")?;
                Some((short.to_string(), cfg.get(k)?.to_string()))
            })
            .collect();
        Self {
            template: plan.template.as_str().to_string(),
            kind: q.kind.as_str().to_string(),
            aggregator: q.aggregator.name().to_string(),
            algebraic: q.aggregator.algebraic(),
            array: q.array.schema.name.clone(),
            bbox: q.bbox.to_string(),
            box_cells: q.bbox.cell_count(),
            predicate: q.predicate.as_ref().map(|p| p.to_string()),
            geometry,
            splits: plan.splits.len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRecord {
    pub id: u64,
    pub extent: String,
    /// `null` for a group with no qualifying cells.
    pub value: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Timings {
    pub map_ms: f64,
    pub shuffle_ms: f64,
    pub reduce_ms: f64,
    pub total_ms: f64,
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1000.0
}

impl From<PhaseTimings> for Timings {
    fn from(t: PhaseTimings) -> Self {
        Self {
            map_ms: ms(t.map),
            shuffle_ms: ms(t.shuffle),
            reduce_ms: ms(t.reduce),
            total_ms: ms(t.total),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub query: Option<String>,
    pub plan: PlanSummary,
    pub mode: String,
    pub workers: usize,
    pub group_count: u64,
    pub groups: Vec<GroupRecord>,
    pub counters: CounterSnapshot,
    pub timings: Timings,
}

impl RunReport {
    pub fn new(query: Option<&str>, plan: &JobPlan, workers: usize, result: &JobResult) -> Self {
        let groups = result
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| GroupRecord {
                id: i as u64,
                extent: plan
                    .geometry
                    .group_extent(aqlmr::GroupId(i as u64))
                    .map(|e| e.to_string())
                    .unwrap_or_default(),
                value: *v,
            })
            .collect();
        Self {
            query: query.map(str::to_string),
            plan: PlanSummary::new(plan),
            mode: plan.mode.as_str().to_string(),
            workers,
            group_count: plan.geometry.group_count(),
            groups,
            counters: result.counters,
            timings: result.timings.into(),
        }
    }

    pub fn values(&self) -> Vec<Option<f64>> {
        self.groups.iter().map(|g| g.value).collect()
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchTiming {
    pub workers: usize,
    pub naive: Timings,
    pub optimized: Timings,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub query: Option<String>,
    pub workers_list: Vec<usize>,
    pub max_relative_difference: f64,
    /// Naive over optimized map output records; `null` when the optimized run emitted nothing.
    pub map_output_ratio: Option<f64>,
    pub bytes_shuffled_ratio: Option<f64>,
    /// Runs with the first worker count.
    pub naive: RunReport,
    pub optimized: RunReport,
    pub timings: Vec<BenchTiming>,
}

impl CompareReport {
    pub fn new(
        naive: RunReport,
        optimized: RunReport,
        workers_list: Vec<usize>,
        timings: Vec<BenchTiming>,
    ) -> Self {
        let ratio = |a: u64, b: u64| (b > 0).then(|| a as f64 / b as f64);
        Self {
            query: naive.query.clone(),
            workers_list,
            max_relative_difference: max_relative_difference(&naive.values(), &optimized.values()),
            map_output_ratio: ratio(
                naive.counters.map_output_records,
                optimized.counters.map_output_records,
            ),
            bytes_shuffled_ratio: ratio(
                naive.counters.bytes_shuffled,
                optimized.counters.bytes_shuffled,
            ),
            naive,
            optimized,
            timings,
        }
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }
}

/// Largest `|a - b| / max(|a|, |b|)` over paired groups; infinite when exactly one side is empty.
pub fn max_relative_difference(a: &[Option<f64>], b: &[Option<f64>]) -> f64 {
    if a.len() != b.len() {
        return f64::INFINITY;
    }
    a.iter()
        .zip(b)
        .map(|(x, y)| match (x, y) {
            (None, None) => 0.0,
            (Some(x), Some(y)) if x == y => 0.0,
            (Some(x), Some(y)) => (x - y).abs() / x.abs().max(y.abs()),
            _ => f64::INFINITY,
        })
        .fold(0.0, f64::max)
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports serialize");
    s.push('\n');
    s
}
