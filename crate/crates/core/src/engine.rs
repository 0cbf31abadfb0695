//! In-process MapReduce execution of a [`JobPlan`].
//!
//! Map tasks run one per split on a pool of scoped worker threads pulling from a shared
//! queue. After the map barrier, the shuffle orders every group's values by
//! `(split_id, emission order)`, so floating-point merges happen in the same order whatever
//! the worker count. Reduce workers then own contiguous ranges of the shuffled groups.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicBool, AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use thiserror::Error;

use crate::aggregates::{AggError, AggSummary, AggregateFunction};
use crate::array_store::{read_split, ArraySplit, StoreError};
use crate::counters::{CounterSnapshot, Counters};
use crate::grouping::GroupId;
use crate::planner::{ExecutionMode, JobPlan};

/// Serialized size of a group key.
pub const KEY_BYTES: u64 = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MapValue {
    Raw(f64),
    Summary(AggSummary),
}

impl MapValue {
    /// Bytes this value occupies in the shuffle, excluding the key.
    pub fn shuffled_bytes(&self) -> u64 {
        match self {
            MapValue::Raw(_) => 8,
            MapValue::Summary(s) if s.ext.is_some() => 24,
            MapValue::Summary(_) => 16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeyValuePair {
    pub key: GroupId,
    pub value: MapValue,
}

/// Pairs emitted by one map task, in emission order.
#[derive(Debug, Clone, PartialEq)]
pub struct MapOutput {
    pub split_id: u64,
    pub pairs: Vec<KeyValuePair>,
}

/// One reduce input: a group key and its values in shuffle order.
#[derive(Debug, Clone, PartialEq)]
pub struct ShuffledGroup {
    pub key: GroupId,
    pub values: Vec<MapValue>,
}

#[derive(Debug, Error)]
pub enum TaskError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Aggregate(#[from] AggError),
    #[error("{template} received a {found} value")]
    ValueKind {
        template: &'static str,
        found: &'static str,
    },
}

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("map task for split {split_id} failed: {source}")]
    Map {
        split_id: u64,
        #[source]
        source: TaskError,
    },
    #[error("reduce task for group {group} failed: {source}")]
    Reduce {
        group: GroupId,
        #[source]
        source: TaskError,
    },
    #[error("{operation} needs a {expected} plan, got template {template}")]
    ModeMismatch {
        operation: &'static str,
        expected: &'static str,
        template: &'static str,
    },
    #[error("worker count must be at least 1")]
    NoWorkers,
}

/// Wall-clock duration of each phase.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PhaseTimings {
    pub map: Duration,
    pub shuffle: Duration,
    pub reduce: Duration,
    pub total: Duration,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JobResult {
    /// Final value of group `i` at index `i`; `None` marks an empty group.
    pub values: Vec<Option<f64>>,
    pub counters: CounterSnapshot,
    pub timings: PhaseTimings,
}

fn require_mode(
    plan: &JobPlan,
    mode: ExecutionMode,
    operation: &'static str,
) -> Result<(), EngineError> {
    if plan.mode == mode {
        Ok(())
    } else {
        Err(EngineError::ModeMismatch {
            operation,
            expected: mode.as_str(),
            template: plan.template.as_str(),
        })
    }
}

/// Emits `(group, raw value)` for every predicate-passing cell and every group it belongs to.
pub fn naive_map(
    plan: &JobPlan,
    split: &ArraySplit,
    counters: &Counters,
) -> Result<MapOutput, EngineError> {
    require_mode(plan, ExecutionMode::Naive, "naive_map")?;
    let fail = |source: TaskError| EngineError::Map {
        split_id: split.split_id,
        source,
    };
    let q = &plan.query;
    let mut reader =
        read_split(&q.array, split, q.predicate.as_ref(), counters).map_err(|e| fail(e.into()))?;
    let mut pairs = Vec::new();
    while let Some((coord, value)) = reader.next_cell().map_err(|e| fail(e.into()))? {
        let v = value.as_f64();
        plan.geometry.visit_groups(coord, |key| {
            pairs.push(KeyValuePair {
                key,
                value: MapValue::Raw(v),
            })
        });
    }
    counters.add_map_output_records(pairs.len() as u64);
    Ok(MapOutput {
        split_id: split.split_id,
        pairs,
    })
}

/// Folds each cell into a local summary per touched group and emits the summaries sorted
/// by group id. Groups the split never touches get no summary.
pub fn optimized_map(
    plan: &JobPlan,
    split: &ArraySplit,
    counters: &Counters,
) -> Result<MapOutput, EngineError> {
    require_mode(plan, ExecutionMode::Optimized, "optimized_map")?;
    let fail = |source: TaskError| EngineError::Map {
        split_id: split.split_id,
        source,
    };
    let q = &plan.query;
    let agg: &dyn AggregateFunction = &**plan.aggregator();
    let mut locals: BTreeMap<GroupId, AggSummary> = BTreeMap::new();
    let mut reader =
        read_split(&q.array, split, q.predicate.as_ref(), counters).map_err(|e| fail(e.into()))?;
    let mut error = None;
    while let Some((coord, value)) = reader.next_cell().map_err(|e| fail(e.into()))? {
        let v = value.as_f64();
        plan.geometry.visit_groups(coord, |key| {
            if error.is_some() {
                return;
            }
            let slot = locals.entry(key).or_insert_with(|| agg.identity());
            match agg.update_in_map(*slot, v) {
                Ok(s) => *slot = s,
                Err(e) => error = Some(e),
            }
        });
        if let Some(e) = error.take() {
            return Err(fail(e.into()));
        }
    }
    let pairs: Vec<KeyValuePair> = locals
        .into_iter()
        .map(|(key, s)| KeyValuePair {
            key,
            value: MapValue::Summary(s),
        })
        .collect();
    counters.add_map_output_records(pairs.len() as u64);
    Ok(MapOutput {
        split_id: split.split_id,
        pairs,
    })
}

/// Groups all map output by key, ascending; values keep `(split_id, emission order)`.
pub fn shuffle(mut outputs: Vec<MapOutput>, counters: &Counters) -> Vec<ShuffledGroup> {
    outputs.sort_by_key(|o| o.split_id);
    let mut pairs: Vec<KeyValuePair> = outputs.into_iter().flat_map(|o| o.pairs).collect();
    counters.add_bytes_shuffled(
        pairs
            .iter()
            .map(|p| KEY_BYTES + p.value.shuffled_bytes())
            .sum(),
    );
    // Stable: equal keys keep the concatenation order.
    pairs.sort_by_key(|p| p.key);
    let mut groups: Vec<ShuffledGroup> = Vec::new();
    for p in pairs {
        match groups.last_mut() {
            Some(g) if g.key == p.key => g.values.push(p.value),
            _ => groups.push(ShuffledGroup {
                key: p.key,
                values: vec![p.value],
            }),
        }
    }
    counters.add_shuffle_groups(groups.len() as u64);
    groups
}

/// Aggregates a group's raw values in one pass.
pub fn naive_reduce(
    plan: &JobPlan,
    group: &ShuffledGroup,
    counters: &Counters,
) -> Result<Option<f64>, EngineError> {
    require_mode(plan, ExecutionMode::Naive, "naive_reduce")?;
    counters.add_reduce_input_records(group.values.len() as u64);
    let fail = |source: TaskError| EngineError::Reduce {
        group: group.key,
        source,
    };
    let raw = group
        .values
        .iter()
        .map(|v| match v {
            MapValue::Raw(x) => Ok(*x),
            MapValue::Summary(_) => Err(fail(TaskError::ValueKind {
                template: plan.template.as_str(),
                found: "summary",
            })),
        })
        .collect::<Result<Vec<f64>, _>>()?;
    plan.aggregator()
        .aggregate_values(&raw)
        .map_err(|e| fail(e.into()))
}

/// Merges a group's local summaries into the identity and finalizes.
pub fn optimized_reduce(
    plan: &JobPlan,
    group: &ShuffledGroup,
    counters: &Counters,
) -> Result<Option<f64>, EngineError> {
    require_mode(plan, ExecutionMode::Optimized, "optimized_reduce")?;
    counters.add_reduce_input_records(group.values.len() as u64);
    let fail = |source: TaskError| EngineError::Reduce {
        group: group.key,
        source,
    };
    let agg = plan.aggregator();
    let mut global = agg.identity();
    for v in &group.values {
        let MapValue::Summary(local) = v else {
            return Err(fail(TaskError::ValueKind {
                template: plan.template.as_str(),
                found: "raw",
            }));
        };
        global = agg
            .update_in_reduce(global, *local)
            .map_err(|e| fail(e.into()))?;
    }
    Ok(agg.get_agg_result(&global))
}

/// Runs map, shuffle, and reduce with at most `workers` concurrent tasks per phase.
pub fn run_job(plan: &JobPlan, workers: usize) -> Result<JobResult, EngineError> {
    if workers == 0 {
        return Err(EngineError::NoWorkers);
    }
    let counters = Counters::new();
    let started = Instant::now();

    let map_task = |split: &ArraySplit| match plan.mode {
        ExecutionMode::Naive => naive_map(plan, split, &counters),
        ExecutionMode::Optimized => optimized_map(plan, split, &counters),
    };
    let outputs = run_pool(&plan.splits, workers, map_task)?;
    let map_done = Instant::now();

    let groups = shuffle(outputs, &counters);
    let shuffle_done = Instant::now();

    let reduced = reduce_phase(plan, &groups, workers, &counters)?;
    let mut values = vec![None; plan.geometry.group_count() as usize];
    for (group, value) in groups.iter().zip(reduced) {
        values[group.key.0 as usize] = value;
    }
    let done = Instant::now();

    Ok(JobResult {
        values,
        counters: counters.snapshot(),
        timings: PhaseTimings {
            map: map_done - started,
            shuffle: shuffle_done - map_done,
            reduce: done - shuffle_done,
            total: done - started,
        },
    })
}

/// Runs `task` over `items` on up to `workers` threads, pulling from a shared queue.
/// Stops handing out work after the first failure and reports the failure of the
/// lowest-indexed item among those that ran.
fn run_pool<T: Sync, R: Send>(
    items: &[T],
    workers: usize,
    task: impl Fn(&T) -> Result<R, EngineError> + Sync,
) -> Result<Vec<R>, EngineError> {
    let next = AtomicUsize::new(0);
    let abort = AtomicBool::new(false);
    let slots: Vec<Mutex<Option<Result<R, EngineError>>>> =
        items.iter().map(|_| Mutex::new(None)).collect();
    let work = || loop {
        if abort.load(Ordering::Relaxed) {
            return;
        }
        let i = next.fetch_add(1, Ordering::Relaxed);
        if i >= items.len() {
            return;
        }
        let result = task(&items[i]);
        if result.is_err() {
            abort.store(true, Ordering::Relaxed);
        }
        *slots[i].lock().expect("slot lock") = Some(result);
    };
    let threads = workers.min(items.len());
    if threads <= 1 {
        work();
    } else {
        thread::scope(|s| {
            for _ in 0..threads {
                s.spawn(work);
            }
        });
    }
    let mut out = Vec::with_capacity(items.len());
    for slot in slots {
        match slot.into_inner().expect("slot lock") {
            Some(Ok(r)) => out.push(r),
            Some(Err(e)) => return Err(e),
            // Skipped after an abort; a failure is recorded further along.
            None => {}
        }
    }
    if out.len() < items.len() {
        unreachable!("tasks are only skipped after a recorded failure");
    }
    Ok(out)
}

fn reduce_phase(
    plan: &JobPlan,
    groups: &[ShuffledGroup],
    workers: usize,
    counters: &Counters,
) -> Result<Vec<Option<f64>>, EngineError> {
    let ranges: Vec<&[ShuffledGroup]> = if groups.is_empty() {
        Vec::new()
    } else {
        groups.chunks(groups.len().div_ceil(workers)).collect()
    };
    let per_range = run_pool(&ranges, workers, |range| {
        range
            .iter()
            .map(|g| match plan.mode {
                ExecutionMode::Naive => naive_reduce(plan, g, counters),
                ExecutionMode::Optimized => optimized_reduce(plan, g, counters),
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(per_range.into_iter().flatten().collect())
}
