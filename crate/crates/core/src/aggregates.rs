//! The three-function aggregation API and the built-in aggregators.
//!
//! An aggregator folds cell values into an [`AggSummary`] on the map side
//! (`update_in_map`), merges summaries on the reduce side (`update_in_reduce`), and turns
//! the merged summary into the final value (`get_agg_result`). Only algebraic aggregators
//! have bounded, mergeable summaries; holistic ones such as MEDIAN see every raw value of a
//! group at once through [`AggregateFunction::aggregate_values`].

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use thiserror::Error;

use crate::array_store::is_identifier;

/// Intermediate aggregation state: primary accumulator, cell count, and an optional
/// extension field for aggregators that need a second accumulator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AggSummary {
    pub aggregate: f64,
    pub count: u64,
    pub ext: Option<f64>,
}

impl AggSummary {
    pub const fn new(aggregate: f64, count: u64, ext: Option<f64>) -> Self {
        Self {
            aggregate,
            count,
            ext,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AggError {
    #[error(
        "{aggregator}: value {value} is outside the domain (natural log needs a positive value)"
    )]
    Domain { aggregator: String, value: f64 },
    #[error("{aggregator}: NaN input value")]
    NotANumber { aggregator: String },
    #[error("{aggregator} is holistic and has no mergeable summary")]
    Holistic { aggregator: String },
    #[error("{aggregator}: summary layout does not belong to this aggregator")]
    SummaryMismatch { aggregator: String },
    #[error("aggregator {0:?} is already registered")]
    Duplicate(String),
    #[error("aggregator name {0:?} is not an identifier")]
    InvalidName(String),
}

/// Behaviour of one aggregator.
pub trait AggregateFunction: Send + Sync + fmt::Debug {
    fn name(&self) -> &str;

    /// True when summaries can be merged associatively, making in-mapper aggregation legal.
    fn algebraic(&self) -> bool;

    fn uses_ext(&self) -> bool {
        self.identity().ext.is_some()
    }

    /// The fresh summary. Merging it into any summary leaves that summary unchanged.
    fn identity(&self) -> AggSummary;

    fn update_in_map(&self, summary: AggSummary, value: f64) -> Result<AggSummary, AggError>;

    fn update_in_reduce(
        &self,
        global: AggSummary,
        local: AggSummary,
    ) -> Result<AggSummary, AggError>;

    /// `None` marks an empty group.
    fn get_agg_result(&self, global: &AggSummary) -> Option<f64>;

    /// Aggregates a complete group of raw values. Holistic aggregators override this.
    fn aggregate_values(&self, values: &[f64]) -> Result<Option<f64>, AggError> {
        let mut summary = self.identity();
        for &v in values {
            summary = self.update_in_map(summary, v)?;
        }
        Ok(self.get_agg_result(&summary))
    }
}

/// Shared handle to a registered aggregator. Equality is by name.
#[derive(Debug, Clone)]
pub struct AggregatorRef(Arc<dyn AggregateFunction>);

impl AggregatorRef {
    pub fn new(f: impl AggregateFunction + 'static) -> Self {
        Self(Arc::new(f))
    }
}

impl Deref for AggregatorRef {
    type Target = dyn AggregateFunction;

    fn deref(&self) -> &Self::Target {
        self.0.as_ref()
    }
}

impl PartialEq for AggregatorRef {
    fn eq(&self, other: &Self) -> bool {
        self.name() == other.name()
    }
}

impl Eq for AggregatorRef {}

/// Name → aggregator lookup. Names are case-insensitive.
#[derive(Debug, Clone, Default)]
pub struct AggregatorRegistry {
    entries: BTreeMap<String, AggregatorRef>,
}

impl AggregatorRegistry {
    /// An empty registry, without built-ins.
    pub fn empty() -> Self {
        Self::default()
    }

    /// SUM, COUNT, AVG, MIN, MAX, STDDEV, GEOMEAN, and MEDIAN.
    pub fn with_builtins() -> Self {
        let mut registry = Self::empty();
        for f in [
            AggregatorRef::new(Sum),
            AggregatorRef::new(Count),
            AggregatorRef::new(Avg),
            AggregatorRef::new(Min),
            AggregatorRef::new(Max),
            AggregatorRef::new(Stddev),
            AggregatorRef::new(Geomean),
            AggregatorRef::new(Median),
        ] {
            registry.register(f).expect("built-in names are unique");
        }
        registry
    }

    pub fn register(&mut self, f: AggregatorRef) -> Result<AggregatorRef, AggError> {
        if !is_identifier(f.name()) {
            return Err(AggError::InvalidName(f.name().to_string()));
        }
        let key = f.name().to_ascii_lowercase();
        if self.entries.contains_key(&key) {
            return Err(AggError::Duplicate(f.name().to_string()));
        }
        self.entries.insert(key, f.clone());
        Ok(f)
    }

    pub fn get(&self, name: &str) -> Option<&AggregatorRef> {
        self.entries.get(&name.to_ascii_lowercase())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.values().map(|f| f.name())
    }
}

fn check_nan(name: &str, value: f64) -> Result<(), AggError> {
    if value.is_nan() {
        return Err(AggError::NotANumber {
            aggregator: name.to_string(),
        });
    }
    Ok(())
}

fn check_layout(f: &dyn AggregateFunction, summaries: &[&AggSummary]) -> Result<(), AggError> {
    let uses_ext = f.uses_ext();
    if summaries.iter().any(|s| s.ext.is_some() != uses_ext) {
        return Err(AggError::SummaryMismatch {
            aggregator: f.name().to_string(),
        });
    }
    Ok(())
}

fn nonempty(summary: &AggSummary, result: impl FnOnce(&AggSummary) -> f64) -> Option<f64> {
    (summary.count > 0).then(|| result(summary))
}

#[derive(Debug, Clone, Copy)]
pub struct Sum;

impl AggregateFunction for Sum {
    fn name(&self) -> &str {
        "SUM"
    }
    fn algebraic(&self) -> bool {
        true
    }
    fn identity(&self) -> AggSummary {
        AggSummary::new(0.0, 0, None)
    }
    fn update_in_map(&self, s: AggSummary, value: f64) -> Result<AggSummary, AggError> {
        check_nan(self.name(), value)?;
        Ok(AggSummary::new(s.aggregate + value, s.count + 1, None))
    }
    fn update_in_reduce(&self, g: AggSummary, l: AggSummary) -> Result<AggSummary, AggError> {
        check_layout(self, &[&g, &l])?;
        Ok(AggSummary::new(
            g.aggregate + l.aggregate,
            g.count + l.count,
            None,
        ))
    }
    fn get_agg_result(&self, g: &AggSummary) -> Option<f64> {
        nonempty(g, |s| s.aggregate)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Count;

impl AggregateFunction for Count {
    fn name(&self) -> &str {
        "COUNT"
    }
    fn algebraic(&self) -> bool {
        true
    }
    fn identity(&self) -> AggSummary {
        AggSummary::new(0.0, 0, None)
    }
    fn update_in_map(&self, s: AggSummary, value: f64) -> Result<AggSummary, AggError> {
        check_nan(self.name(), value)?;
        Ok(AggSummary::new(s.aggregate, s.count + 1, None))
    }
    fn update_in_reduce(&self, g: AggSummary, l: AggSummary) -> Result<AggSummary, AggError> {
        check_layout(self, &[&g, &l])?;
        Ok(AggSummary::new(g.aggregate, g.count + l.count, None))
    }
    fn get_agg_result(&self, g: &AggSummary) -> Option<f64> {
        nonempty(g, |s| s.count as f64)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Avg;

impl AggregateFunction for Avg {
    fn name(&self) -> &str {
        "AVG"
    }
    fn algebraic(&self) -> bool {
        true
    }
    fn identity(&self) -> AggSummary {
        AggSummary::new(0.0, 0, None)
    }
    fn update_in_map(&self, s: AggSummary, value: f64) -> Result<AggSummary, AggError> {
        check_nan(self.name(), value)?;
        Ok(AggSummary::new(s.aggregate + value, s.count + 1, None))
    }
    fn update_in_reduce(&self, g: AggSummary, l: AggSummary) -> Result<AggSummary, AggError> {
        check_layout(self, &[&g, &l])?;
        Ok(AggSummary::new(
            g.aggregate + l.aggregate,
            g.count + l.count,
            None,
        ))
    }
    fn get_agg_result(&self, g: &AggSummary) -> Option<f64> {
        nonempty(g, |s| s.aggregate / s.count as f64)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Min;

impl AggregateFunction for Min {
    fn name(&self) -> &str {
        "MIN"
    }
    fn algebraic(&self) -> bool {
        true
    }
    fn identity(&self) -> AggSummary {
        AggSummary::new(f64::INFINITY, 0, None)
    }
    fn update_in_map(&self, s: AggSummary, value: f64) -> Result<AggSummary, AggError> {
        check_nan(self.name(), value)?;
        Ok(AggSummary::new(s.aggregate.min(value), s.count + 1, None))
    }
    fn update_in_reduce(&self, g: AggSummary, l: AggSummary) -> Result<AggSummary, AggError> {
        check_layout(self, &[&g, &l])?;
        Ok(AggSummary::new(
            g.aggregate.min(l.aggregate),
            g.count + l.count,
            None,
        ))
    }
    fn get_agg_result(&self, g: &AggSummary) -> Option<f64> {
        nonempty(g, |s| s.aggregate)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Max;

impl AggregateFunction for Max {
    fn name(&self) -> &str {
        "MAX"
    }
    fn algebraic(&self) -> bool {
        true
    }
    fn identity(&self) -> AggSummary {
        AggSummary::new(f64::NEG_INFINITY, 0, None)
    }
    fn update_in_map(&self, s: AggSummary, value: f64) -> Result<AggSummary, AggError> {
        check_nan(self.name(), value)?;
        Ok(AggSummary::new(s.aggregate.max(value), s.count + 1, None))
    }
    fn update_in_reduce(&self, g: AggSummary, l: AggSummary) -> Result<AggSummary, AggError> {
        check_layout(self, &[&g, &l])?;
        Ok(AggSummary::new(
            g.aggregate.max(l.aggregate),
            g.count + l.count,
            None,
        ))
    }
    fn get_agg_result(&self, g: &AggSummary) -> Option<f64> {
        nonempty(g, |s| s.aggregate)
    }
}

/// Population standard deviation. `ext` carries the sum of squares.
#[derive(Debug, Clone, Copy)]
pub struct Stddev;

impl AggregateFunction for Stddev {
    fn name(&self) -> &str {
        "STDDEV"
    }
    fn algebraic(&self) -> bool {
        true
    }
    fn identity(&self) -> AggSummary {
        AggSummary::new(0.0, 0, Some(0.0))
    }
    fn update_in_map(&self, s: AggSummary, value: f64) -> Result<AggSummary, AggError> {
        check_nan(self.name(), value)?;
        check_layout(self, &[&s])?;
        let sq = s.ext.unwrap_or(0.0) + value * value;
        Ok(AggSummary::new(s.aggregate + value, s.count + 1, Some(sq)))
    }
    fn update_in_reduce(&self, g: AggSummary, l: AggSummary) -> Result<AggSummary, AggError> {
        check_layout(self, &[&g, &l])?;
        let sq = g.ext.unwrap_or(0.0) + l.ext.unwrap_or(0.0);
        Ok(AggSummary::new(
            g.aggregate + l.aggregate,
            g.count + l.count,
            Some(sq),
        ))
    }
    fn get_agg_result(&self, g: &AggSummary) -> Option<f64> {
        nonempty(g, |s| {
            let n = s.count as f64;
            let mean = s.aggregate / n;
            // Rounding can push E[x²] − mean² slightly below zero for near-constant groups.
            (s.ext.unwrap_or(0.0) / n - mean * mean).max(0.0).sqrt()
        })
    }
}

/// Geometric mean via the mean of natural logs.
#[derive(Debug, Clone, Copy)]
pub struct Geomean;

impl AggregateFunction for Geomean {
    fn name(&self) -> &str {
        "GEOMEAN"
    }
    fn algebraic(&self) -> bool {
        true
    }
    fn identity(&self) -> AggSummary {
        AggSummary::new(0.0, 0, None)
    }
    fn update_in_map(&self, s: AggSummary, value: f64) -> Result<AggSummary, AggError> {
        check_nan(self.name(), value)?;
        if value <= 0.0 {
            return Err(AggError::Domain {
                aggregator: self.name().to_string(),
                value,
            });
        }
        Ok(AggSummary::new(s.aggregate + value.ln(), s.count + 1, None))
    }
    fn update_in_reduce(&self, g: AggSummary, l: AggSummary) -> Result<AggSummary, AggError> {
        check_layout(self, &[&g, &l])?;
        Ok(AggSummary::new(
            g.aggregate + l.aggregate,
            g.count + l.count,
            None,
        ))
    }
    fn get_agg_result(&self, g: &AggSummary) -> Option<f64> {
        nonempty(g, |s| (s.aggregate / s.count as f64).exp())
    }
}

/// Holistic median. Even-sized groups average the two middle values.
#[derive(Debug, Clone, Copy)]
pub struct Median;

impl Median {
    fn holistic(&self) -> AggError {
        AggError::Holistic {
            aggregator: self.name().to_string(),
        }
    }
}

impl AggregateFunction for Median {
    fn name(&self) -> &str {
        "MEDIAN"
    }
    fn algebraic(&self) -> bool {
        false
    }
    fn identity(&self) -> AggSummary {
        AggSummary::new(0.0, 0, None)
    }
    fn update_in_map(&self, _: AggSummary, _: f64) -> Result<AggSummary, AggError> {
        Err(self.holistic())
    }
    fn update_in_reduce(&self, _: AggSummary, _: AggSummary) -> Result<AggSummary, AggError> {
        Err(self.holistic())
    }
    fn get_agg_result(&self, _: &AggSummary) -> Option<f64> {
        None
    }
    fn aggregate_values(&self, values: &[f64]) -> Result<Option<f64>, AggError> {
        if values.is_empty() {
            return Ok(None);
        }
        for &v in values {
            check_nan(self.name(), v)?;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let mid = sorted.len() / 2;
        Ok(Some(if sorted.len() % 2 == 1 {
            sorted[mid]
        } else {
            (sorted[mid - 1] + sorted[mid]) / 2.0
        }))
    }
}
