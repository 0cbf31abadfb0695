//! Group identity and membership for grid, sliding, hierarchical, and circular aggregation.
//!
//! Group ids are dense in `[0, group_count)`:
//! - grid: row-major index of the block, blocks anchored at `box.lo` (the last block along
//!   a dimension is smaller when the partition size does not divide the extent);
//! - sliding: row-major index of the window center, centers at `box.lo + j * stride`;
//!   windows are truncated at the box edges;
//! - rings: ring index `k` with radius `r_k = r0 + k * step` around the box centroid,
//!   Chebyshev distance for hierarchical and Euclidean for circular.

use std::fmt;

use thiserror::Error;

use crate::aql::{AggregationKind, GeometryParams, QueryObject, RingMode, Window};
use crate::array_store::BoundingBox;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupId(pub u64);

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GroupingError {
    #[error("coordinate {coord:?} is outside the query box {bbox}")]
    OutsideBox { coord: Vec<i64>, bbox: BoundingBox },
    #[error("operation needs {expected} geometry, this one is {actual}")]
    WrongKind {
        expected: &'static str,
        actual: &'static str,
    },
    #[error("group {gid} is out of range (group count {count})")]
    GroupOutOfRange { gid: u64, count: u64 },
    #[error("geometry parameters do not fit a {rank}-dimensional box")]
    RankMismatch { rank: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Chebyshev,
    Euclidean,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Layout {
    Grid {
        partitions: Vec<u64>,
        blocks: Vec<u64>,
    },
    Sliding {
        windows: Vec<Window>,
        stride: u64,
        centers: Vec<u64>,
    },
    Ring {
        metric: Metric,
        radius: u64,
        step: u64,
        mode: RingMode,
        centroid: Vec<i64>,
        /// Index K of the outermost ring, the first whose radius reaches the box boundary.
        outermost: u64,
    },
}

/// Fully resolved grouping for one query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupGeometry {
    kind: AggregationKind,
    bbox: BoundingBox,
    layout: Layout,
    group_count: u64,
}

/// What a group covers, for reports.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GroupExtent {
    Box(BoundingBox),
    /// Distances `d` with `inner < d <= outer`; `inner = None` means `0 <= d <= outer`.
    Ring {
        inner: Option<u64>,
        outer: u64,
    },
}

impl fmt::Display for GroupExtent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GroupExtent::Box(b) => b.fmt(f),
            GroupExtent::Ring {
                inner: Some(inner),
                outer,
            } => write!(f, "({inner}, {outer}]"),
            GroupExtent::Ring { inner: None, outer } => write!(f, "[0, {outer}]"),
        }
    }
}

impl GroupGeometry {
    pub fn from_query(obj: &QueryObject) -> Result<Self, GroupingError> {
        Self::new(obj.kind, obj.bbox.clone(), &obj.geometry)
    }

    pub fn new(
        kind: AggregationKind,
        bbox: BoundingBox,
        params: &GeometryParams,
    ) -> Result<Self, GroupingError> {
        let rank = bbox.rank();
        let mismatch = || GroupingError::RankMismatch { rank };
        let (layout, group_count) = match (kind, params) {
            (AggregationKind::Grid, GeometryParams::Grid { partitions }) => {
                if partitions.len() != rank || partitions.contains(&0) {
                    return Err(mismatch());
                }
                let blocks: Vec<u64> = partitions
                    .iter()
                    .enumerate()
                    .map(|(d, &p)| bbox.extent(d).div_ceil(p))
                    .collect();
                let count = blocks.iter().product();
                (
                    Layout::Grid {
                        partitions: partitions.clone(),
                        blocks,
                    },
                    count,
                )
            }
            (AggregationKind::Sliding, GeometryParams::Sliding { windows, stride }) => {
                if windows.len() != rank || *stride == 0 {
                    return Err(mismatch());
                }
                let centers: Vec<u64> = (0..rank)
                    .map(|d| bbox.extent(d).div_ceil(*stride))
                    .collect();
                let count = centers.iter().product();
                (
                    Layout::Sliding {
                        windows: windows.clone(),
                        stride: *stride,
                        centers,
                    },
                    count,
                )
            }
            (
                AggregationKind::Hierarchical | AggregationKind::Circular,
                GeometryParams::Ring { radius, step, mode },
            ) => {
                if *step == 0 {
                    return Err(mismatch());
                }
                let metric = if kind == AggregationKind::Circular {
                    Metric::Euclidean
                } else {
                    Metric::Chebyshev
                };
                let centroid: Vec<i64> = (0..rank)
                    .map(|d| (bbox.lo[d] + bbox.hi[d]).div_euclid(2))
                    .collect();
                let reach = (0..rank)
                    .map(|d| (centroid[d] - bbox.lo[d]).min(bbox.hi[d] - centroid[d]) as u64)
                    .min()
                    .unwrap_or(0);
                let outermost = if *radius >= reach {
                    0
                } else {
                    (reach - radius).div_ceil(*step)
                };
                (
                    Layout::Ring {
                        metric,
                        radius: *radius,
                        step: *step,
                        mode: *mode,
                        centroid,
                        outermost,
                    },
                    outermost + 1,
                )
            }
            _ => {
                return Err(GroupingError::WrongKind {
                    expected: kind.as_str(),
                    actual: params_kind(params),
                })
            }
        };
        Ok(Self {
            kind,
            bbox,
            layout,
            group_count,
        })
    }

    pub fn kind(&self) -> AggregationKind {
        self.kind
    }

    pub fn bbox(&self) -> &BoundingBox {
        &self.bbox
    }

    pub fn group_count(&self) -> u64 {
        self.group_count
    }

    /// Ring center; `None` for grid and sliding geometries.
    pub fn centroid(&self) -> Option<&[i64]> {
        match &self.layout {
            Layout::Ring { centroid, .. } => Some(centroid),
            _ => None,
        }
    }

    /// Calls `f` with every group containing `coord`, in ascending id order.
    ///
    /// `coord` must lie inside the box; the checked entry points are
    /// [`grid_group_of`](Self::grid_group_of), [`sliding_groups_of`](Self::sliding_groups_of)
    /// and [`ring_groups_of`](Self::ring_groups_of).
    pub fn visit_groups(&self, coord: &[i64], mut f: impl FnMut(GroupId)) {
        let lo = &self.bbox.lo;
        match &self.layout {
            Layout::Grid { partitions, blocks } => {
                let mut gid = 0u64;
                for d in 0..coord.len() {
                    gid = gid * blocks[d] + (coord[d] - lo[d]) as u64 / partitions[d];
                }
                f(GroupId(gid));
            }
            Layout::Sliding {
                windows,
                stride,
                centers,
            } => {
                let ctx = SlidingVisit {
                    coord,
                    lo,
                    hi: &self.bbox.hi,
                    windows,
                    stride: *stride as i64,
                    centers,
                };
                if ctx.covered() {
                    ctx.walk(0, 0, &mut f);
                }
            }
            Layout::Ring {
                metric,
                radius,
                step,
                mode,
                centroid,
                outermost,
            } => {
                let Some(k) = ring_index(*metric, *radius, *step, centroid, coord) else {
                    return;
                };
                if k > *outermost {
                    return;
                }
                match mode {
                    RingMode::Disjoint => f(GroupId(k)),
                    RingMode::Nested => (k..=*outermost).for_each(|k| f(GroupId(k))),
                }
            }
        }
    }

    fn check_coord(&self, coord: &[i64]) -> Result<(), GroupingError> {
        if self.bbox.contains(coord) {
            Ok(())
        } else {
            Err(GroupingError::OutsideBox {
                coord: coord.to_vec(),
                bbox: self.bbox.clone(),
            })
        }
    }

    fn collect(&self, coord: &[i64]) -> Vec<GroupId> {
        let mut out = Vec::new();
        self.visit_groups(coord, |g| out.push(g));
        out
    }

    pub fn grid_group_of(&self, coord: &[i64]) -> Result<GroupId, GroupingError> {
        self.expect_kind(matches!(self.layout, Layout::Grid { .. }), "grid")?;
        self.check_coord(coord)?;
        Ok(self.collect(coord)[0])
    }

    pub fn sliding_groups_of(&self, coord: &[i64]) -> Result<Vec<GroupId>, GroupingError> {
        self.expect_kind(matches!(self.layout, Layout::Sliding { .. }), "sliding")?;
        self.check_coord(coord)?;
        Ok(self.collect(coord))
    }

    pub fn ring_groups_of(&self, coord: &[i64]) -> Result<Vec<GroupId>, GroupingError> {
        self.expect_kind(
            matches!(self.layout, Layout::Ring { .. }),
            "hierarchical or circular",
        )?;
        self.check_coord(coord)?;
        Ok(self.collect(coord))
    }

    /// Membership for any kind.
    pub fn groups_of(&self, coord: &[i64]) -> Result<Vec<GroupId>, GroupingError> {
        self.check_coord(coord)?;
        Ok(self.collect(coord))
    }

    fn expect_kind(&self, ok: bool, expected: &'static str) -> Result<(), GroupingError> {
        if ok {
            Ok(())
        } else {
            Err(GroupingError::WrongKind {
                expected,
                actual: self.kind.as_str(),
            })
        }
    }

    pub fn group_extent(&self, gid: GroupId) -> Result<GroupExtent, GroupingError> {
        if gid.0 >= self.group_count {
            return Err(GroupingError::GroupOutOfRange {
                gid: gid.0,
                count: self.group_count,
            });
        }
        let (lo, hi) = (&self.bbox.lo, &self.bbox.hi);
        Ok(match &self.layout {
            Layout::Grid { partitions, blocks } => {
                let idx = unlinearize(gid.0, blocks);
                let mut b_lo = Vec::with_capacity(idx.len());
                let mut b_hi = Vec::with_capacity(idx.len());
                for d in 0..idx.len() {
                    let start = lo[d] + (idx[d] * partitions[d]) as i64;
                    b_lo.push(start);
                    b_hi.push((start + partitions[d] as i64 - 1).min(hi[d]));
                }
                GroupExtent::Box(BoundingBox { lo: b_lo, hi: b_hi })
            }
            Layout::Sliding {
                windows,
                stride,
                centers,
            } => {
                let idx = unlinearize(gid.0, centers);
                let mut b_lo = Vec::with_capacity(idx.len());
                let mut b_hi = Vec::with_capacity(idx.len());
                for d in 0..idx.len() {
                    let c = lo[d] + (idx[d] * stride) as i64;
                    b_lo.push((c - windows[d].preceding as i64).max(lo[d]));
                    b_hi.push((c + windows[d].following as i64).min(hi[d]));
                }
                GroupExtent::Box(BoundingBox { lo: b_lo, hi: b_hi })
            }
            Layout::Ring {
                radius, step, mode, ..
            } => {
                let outer = radius + gid.0 * step;
                let inner = match mode {
                    RingMode::Disjoint if gid.0 > 0 => Some(outer - step),
                    _ => None,
                };
                GroupExtent::Ring { inner, outer }
            }
        })
    }

    /// Window center of a sliding group.
    pub fn sliding_center(&self, gid: GroupId) -> Option<Vec<i64>> {
        match &self.layout {
            Layout::Sliding {
                stride, centers, ..
            } if gid.0 < self.group_count => Some(
                unlinearize(gid.0, centers)
                    .iter()
                    .zip(&self.bbox.lo)
                    .map(|(j, lo)| lo + (j * stride) as i64)
                    .collect(),
            ),
            _ => None,
        }
    }
}

struct SlidingVisit<'a> {
    coord: &'a [i64],
    lo: &'a [i64],
    hi: &'a [i64],
    windows: &'a [Window],
    stride: i64,
    centers: &'a [u64],
}

impl SlidingVisit<'_> {
    /// Center index range along `d`: centers c with c - preceding <= x <= c + following.
    fn span(&self, d: usize) -> (i64, i64) {
        let w = self.windows[d];
        let from = (self.coord[d] - w.following as i64).max(self.lo[d]) - self.lo[d];
        let to = (self.coord[d] + w.preceding as i64).min(self.hi[d]) - self.lo[d];
        ((from + self.stride - 1) / self.stride, to / self.stride)
    }

    fn covered(&self) -> bool {
        (0..self.coord.len()).all(|d| {
            let (a, b) = self.span(d);
            a <= b
        })
    }

    fn walk(&self, d: usize, prefix: u64, f: &mut impl FnMut(GroupId)) {
        if d == self.coord.len() {
            f(GroupId(prefix));
            return;
        }
        let (a, b) = self.span(d);
        for j in a..=b {
            self.walk(d + 1, prefix * self.centers[d] + j as u64, f);
        }
    }
}

fn params_kind(params: &GeometryParams) -> &'static str {
    match params {
        GeometryParams::Grid { .. } => "grid",
        GeometryParams::Sliding { .. } => "sliding",
        GeometryParams::Ring { .. } => "ring",
    }
}

fn unlinearize(mut id: u64, shape: &[u64]) -> Vec<u64> {
    let mut idx = vec![0; shape.len()];
    for d in (0..shape.len()).rev() {
        idx[d] = id % shape[d];
        id /= shape[d];
    }
    idx
}

/// Smallest ring index k with r_k >= distance(coord, centroid).
fn ring_index(
    metric: Metric,
    radius: u64,
    step: u64,
    centroid: &[i64],
    coord: &[i64],
) -> Option<u64> {
    match metric {
        Metric::Chebyshev => {
            let d = coord
                .iter()
                .zip(centroid)
                .map(|(x, c)| (x - c).unsigned_abs())
                .max()
                .unwrap_or(0);
            Some(if d <= radius {
                0
            } else {
                (d - radius).div_ceil(step)
            })
        }
        Metric::Euclidean => {
            let d2: u128 = coord
                .iter()
                .zip(centroid)
                .map(|(x, c)| {
                    let v = (x - c).unsigned_abs() as u128;
                    v * v
                })
                .sum();
            let r_sq = |k: u64| {
                let r = (radius + k * step) as u128;
                r * r
            };
            if d2 <= r_sq(0) {
                return Some(0);
            }
            let estimate = ((d2 as f64).sqrt() - radius as f64) / step as f64;
            let mut k = estimate.max(0.0).ceil() as u64;
            while k > 0 && r_sq(k - 1) >= d2 {
                k -= 1;
            }
            while r_sq(k) < d2 {
                k += 1;
            }
            Some(k)
        }
    }
}
