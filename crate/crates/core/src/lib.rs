//! AQL structural aggregation compiled to MapReduce jobs over chunked arrays.
//!
//! Pipeline: [`aql::parse`] → [`aql::analyze`] → [`planner::plan`] → [`engine::run_job`].

pub mod aggregates;
pub mod aql;
pub mod array_store;
pub mod counters;
pub mod engine;
pub mod grouping;
pub mod planner;

pub use aggregates::{AggError, AggSummary, AggregateFunction, AggregatorRef, AggregatorRegistry};
pub use array_store::{BoundingBox, Catalog, StoreError, StoredArray};
pub use counters::{CounterSnapshot, Counters};
pub use engine::{run_job, EngineError, JobResult};
pub use grouping::{GroupExtent, GroupGeometry, GroupId, GroupingError};
pub use planner::{plan, ExecutionMode, JobPlan, ModeRequest, ParamConfig, TemplateId};
