//! Parallel partition-based spatial merge join.
//!
//! A join runs in two phases over `m` worker threads:
//!
//! * **Partitioning.** Both inputs are cut into `m` equal slices. Workers
//!   count per-tile assignments for their slices, the counts become
//!   disjoint write ranges, and workers copy their rectangles into them.
//!   With the adaptive policy the sweeping axis of every tile is picked
//!   here from sampled histograms of the fresh tile buffers.
//! * **Joining.** Every non-empty tile buffer is sorted on its tile's
//!   axis, then every tile holding both inputs is plane-swept. Results
//!   whose reference point falls outside the tile are dropped, so each
//!   intersecting pair is reported exactly once.
//!
//! Both sub-phases of the join draw tasks from a shared queue, largest
//! first.

use std::time::{Duration, Instant};

use crate::axis_model::{self, AxisHistograms};
use crate::error::{Error, Result};
use crate::geometry::{Axis, Rect};
use crate::partition::{
    count_pass, write_pass, LayoutKind, PartitionLayout, PartitionedDataset, WritePlan,
};
use crate::pool::{self, OwnedQueue, TaskCursor};
use crate::sweep::{self, AxisPolicy, DupFilter, ResultSink, SinkMode};

#[derive(Clone, Debug, PartialEq)]
pub struct JoinConfig {
    pub layout: PartitionLayout,
    pub axis_policy: AxisPolicy,
    pub threads: usize,
    pub sink_mode: SinkMode,
    /// Histogram sampling stride; defaults to [`axis_model::DEFAULT_SAMPLE_STRIDE`].
    pub sample_stride: Option<usize>,
    /// Fixed histogram bucket count; derived per tile when unset.
    pub k_buckets: Option<usize>,
    /// Record per-tile join task sizes in the report.
    pub diagnostics: bool,
}

impl JoinConfig {
    /// Single-threaded, count-only, with the layout's natural axis policy
    /// (stripes sweep along themselves, grids use the model).
    pub fn new(layout: PartitionLayout) -> Self {
        let axis_policy = match layout.kind() {
            LayoutKind::Stripes1D => AxisPolicy::Auto1D,
            LayoutKind::Grid2D => AxisPolicy::Adaptive,
        };
        JoinConfig {
            layout,
            axis_policy,
            threads: 1,
            sink_mode: SinkMode::CountOnly,
            sample_stride: None,
            k_buckets: None,
            diagnostics: false,
        }
    }

    pub fn with_axis_policy(mut self, policy: AxisPolicy) -> Self {
        self.axis_policy = policy;
        self
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }

    pub fn collecting(mut self) -> Self {
        self.sink_mode = SinkMode::CollectPairs;
        self
    }

    pub fn with_diagnostics(mut self) -> Self {
        self.diagnostics = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.threads == 0 {
            return Err(Error::Config("thread count must be at least 1".into()));
        }
        if self.axis_policy == AxisPolicy::Auto1D && self.layout.kind() != LayoutKind::Stripes1D {
            return Err(Error::Config(
                "the auto axis policy only applies to 1D stripes; use adaptive for grids".into(),
            ));
        }
        if self.sample_stride == Some(0) || self.k_buckets == Some(0) {
            return Err(Error::Config(
                "sampling stride and bucket count must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// How many tiles were swept along each axis.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct AxisChoices {
    pub x: usize,
    pub y: usize,
}

#[derive(Clone, Debug, Default)]
pub struct JoinReport {
    pub result_count: u64,
    /// Unordered result pairs `(r.id, s.id)`, in collect mode only.
    pub pairs: Option<Vec<(u64, u64)>>,
    /// Counting, writing and axis selection.
    pub partition_time: Duration,
    /// Sorting alone; also included in `join_time`.
    pub sort_time: Duration,
    /// Sorting plus sweeping.
    pub join_time: Duration,
    pub total_time: Duration,
    pub axis_choices: AxisChoices,
    /// Join tasks in execution order, when diagnostics are on.
    pub join_tasks: Option<Vec<JoinTask>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Input {
    R,
    S,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SortTask {
    pub tile: usize,
    pub input: Input,
    pub len: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct JoinTask {
    pub tile: usize,
    pub r_len: usize,
    pub s_len: usize,
}

impl JoinTask {
    pub fn size(&self) -> usize {
        self.r_len + self.s_len
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TaskQueue {
    pub sort_tasks: Vec<SortTask>,
    /// Largest first.
    pub join_tasks: Vec<JoinTask>,
}

/// One sort task per non-empty tile buffer and one join task per tile where
/// both inputs are present, each list ordered by decreasing size.
pub fn build_task_queue(r: &PartitionedDataset, s: &PartitionedDataset) -> TaskQueue {
    let tiles = r.num_tiles().min(s.num_tiles());
    let mut sort_tasks = Vec::new();
    let mut join_tasks = Vec::new();
    for tile in 0..tiles {
        let (r_len, s_len) = (r.tile_len(tile), s.tile_len(tile));
        if r_len > 0 {
            sort_tasks.push(SortTask {
                tile,
                input: Input::R,
                len: r_len,
            });
        }
        if s_len > 0 {
            sort_tasks.push(SortTask {
                tile,
                input: Input::S,
                len: s_len,
            });
        }
        if r_len > 0 && s_len > 0 {
            join_tasks.push(JoinTask { tile, r_len, s_len });
        }
    }
    sort_tasks.sort_by_key(|t| std::cmp::Reverse(t.len));
    join_tasks.sort_by_key(|t| std::cmp::Reverse(t.size()));
    TaskQueue {
        sort_tasks,
        join_tasks,
    }
}

/// Intersection join of `r` and `s`: every pair of intersecting rectangles,
/// each reported once.
pub fn join(r: &[Rect], s: &[Rect], cfg: &JoinConfig) -> Result<JoinReport> {
    execute(r, s, cfg, None)
}

/// A point with an identifier.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Point {
    pub id: u64,
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(id: u64, x: f64, y: f64) -> Self {
        Point { id, x, y }
    }
}

/// All pairs `(p, q)` within Euclidean distance `epsilon`.
///
/// Each point becomes a square of side `epsilon` around it (clipped to the
/// domain), the squares are joined, and candidate pairs are refined on the
/// original points.
pub fn epsilon_distance_join(
    p: &[Point],
    q: &[Point],
    epsilon: f64,
    cfg: &JoinConfig,
) -> Result<JoinReport> {
    if !epsilon.is_finite() || epsilon <= 0.0 {
        return Err(Error::Config(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    // Pad by a few ulps of the unit interval so rounding in the square
    // bounds never loses a pair sitting exactly at distance epsilon.
    let half = 0.5 * epsilon + 4.0 * f64::EPSILON;
    let square = |idx: usize, pt: &Point| {
        Rect::new(
            idx as u64,
            (pt.x - half).max(0.0),
            (pt.y - half).max(0.0),
            (pt.x + half).min(1.0),
            (pt.y + half).min(1.0),
        )
    };
    for pt in p.iter().chain(q) {
        if !(0.0..=1.0).contains(&pt.x) || !(0.0..=1.0).contains(&pt.y) {
            return Err(Error::Config(format!(
                "point {} lies outside the unit square",
                pt.id
            )));
        }
    }
    let ps: Vec<Rect> = p.iter().enumerate().map(|(i, pt)| square(i, pt)).collect();
    let qs: Vec<Rect> = q.iter().enumerate().map(|(i, pt)| square(i, pt)).collect();
    let eps2 = epsilon * epsilon;
    let refine = |a: &Rect, b: &Rect| {
        let (pa, qb) = (&p[a.id as usize], &q[b.id as usize]);
        let (dx, dy) = (pa.x - qb.x, pa.y - qb.y);
        dx * dx + dy * dy <= eps2
    };
    let mut report = execute(&ps, &qs, cfg, Some(&refine))?;
    if let Some(pairs) = report.pairs.as_mut() {
        for (a, b) in pairs.iter_mut() {
            *a = p[*a as usize].id;
            *b = q[*b as usize].id;
        }
    }
    Ok(report)
}

type Refine<'a> = &'a (dyn Fn(&Rect, &Rect) -> bool + Sync);

struct Counted {
    r: Vec<usize>,
    s: Vec<usize>,
    extent_sum: f64,
    invalid: Option<u64>,
}

fn execute(
    r: &[Rect],
    s: &[Rect],
    cfg: &JoinConfig,
    refine: Option<Refine<'_>>,
) -> Result<JoinReport> {
    cfg.validate()?;
    let start = Instant::now();
    let layout = cfg.layout;
    let m = cfg.threads;
    let tiles = layout.num_tiles();

    // Partitioning: count, plan, write.
    let r_parts = pool::split_even(r, m);
    let s_parts = pool::split_even(s, m);
    let counted = pool::scoped_map(m, |w| {
        let invalid = r_parts[w]
            .iter()
            .chain(s_parts[w])
            .find(|x| !x.is_normalized())
            .map(|x| x.id);
        let extent_sum = r_parts[w]
            .iter()
            .chain(s_parts[w])
            .map(|x| x.extent(Axis::X) + x.extent(Axis::Y))
            .sum();
        Counted {
            r: count_pass(r_parts[w], &layout),
            s: count_pass(s_parts[w], &layout),
            extent_sum,
            invalid,
        }
    });
    if let Some(id) = counted.iter().find_map(|c| c.invalid) {
        return Err(Error::Config(format!(
            "rectangle {id} is not a valid rectangle inside the unit square"
        )));
    }
    let extent_sum: f64 = counted.iter().map(|c| c.extent_sum).sum();
    let (r_counts, s_counts): (Vec<_>, Vec<_>) = counted.into_iter().map(|c| (c.r, c.s)).unzip();
    let r_plan = WritePlan::from_counts(r_counts, tiles);
    let s_plan = WritePlan::from_counts(s_counts, tiles);
    let mut r_tiles = write_pass(&r_parts, &layout, &r_plan)?;
    let mut s_tiles = write_pass(&s_parts, &layout, &s_plan)?;

    let queue = build_task_queue(&r_tiles, &s_tiles);
    let n_rects = r.len() + s.len();
    let avg_extent = if n_rects == 0 {
        0.0
    } else {
        extent_sum / (2 * n_rects) as f64
    };
    let axes = select_axes(cfg, &r_tiles, &s_tiles, &queue.join_tasks, avg_extent);
    let partition_time = start.elapsed();

    // Sorting.
    let sort_start = Instant::now();
    {
        let mut r_views: Vec<Option<&mut [Rect]>> =
            r_tiles.tiles_mut().into_iter().map(Some).collect();
        let mut s_views: Vec<Option<&mut [Rect]>> =
            s_tiles.tiles_mut().into_iter().map(Some).collect();
        let jobs: Vec<(&mut [Rect], Axis)> = queue
            .sort_tasks
            .iter()
            .filter_map(|t| {
                let views = match t.input {
                    Input::R => &mut r_views,
                    Input::S => &mut s_views,
                };
                views[t.tile].take().map(|v| (v, axes[t.tile]))
            })
            .collect();
        let jobs = OwnedQueue::new(jobs);
        pool::scoped_map(m, |_| {
            while let Some((buf, axis)) = jobs.pop() {
                sweep::sort_by_lower(buf, axis);
            }
        });
    }
    let sort_time = sort_start.elapsed();

    // Sweeping.
    let mode = cfg.sink_mode;
    let cursor = TaskCursor::new(queue.join_tasks.len());
    let (r_tiles, s_tiles) = (&r_tiles, &s_tiles);
    let sinks = pool::scoped_map(m, |_| {
        let mut sink = ResultSink::new(mode);
        while let Some(i) = cursor.claim() {
            let tile = queue.join_tasks[i].tile;
            let filter = tile_filter(&layout, tile);
            let (rt, st) = (r_tiles.tile(tile), s_tiles.tile(tile));
            match refine {
                None => sweep::sweep(rt, st, axes[tile], |a, b| {
                    if filter.accepts(a, b) {
                        sink.emit(a.id, b.id);
                    }
                }),
                Some(refine) => sweep::sweep(rt, st, axes[tile], |a, b| {
                    if filter.accepts(a, b) && refine(a, b) {
                        sink.emit(a.id, b.id);
                    }
                }),
            }
        }
        sink
    });
    let join_time = sort_start.elapsed();

    let mut total = ResultSink::new(mode);
    for sink in sinks {
        total.absorb(sink);
    }
    let mut axis_choices = AxisChoices::default();
    for task in &queue.join_tasks {
        match axes[task.tile] {
            Axis::X => axis_choices.x += 1,
            Axis::Y => axis_choices.y += 1,
        }
    }
    let result_count = total.count();
    Ok(JoinReport {
        result_count,
        pairs: (mode == SinkMode::CollectPairs).then(|| total.into_pairs()),
        partition_time,
        sort_time,
        join_time,
        total_time: start.elapsed(),
        axis_choices,
        join_tasks: cfg.diagnostics.then(|| queue.join_tasks.clone()),
    })
}

fn tile_filter(layout: &PartitionLayout, tile: usize) -> DupFilter {
    if layout.num_tiles() == 1 {
        return DupFilter::None;
    }
    match layout.kind() {
        LayoutKind::Grid2D => DupFilter::Grid(layout.extent(tile)),
        LayoutKind::Stripes1D => DupFilter::Stripe(layout.extent(tile), layout.partition_axis()),
    }
}

/// Sweeping axis for every tile. Tiles without a join task sweep X.
fn select_axes(
    cfg: &JoinConfig,
    r: &PartitionedDataset,
    s: &PartitionedDataset,
    join_tasks: &[JoinTask],
    avg_extent: f64,
) -> Vec<Axis> {
    let layout = cfg.layout;
    let tiles = layout.num_tiles();
    match cfg.axis_policy {
        AxisPolicy::ForcedX => vec![Axis::X; tiles],
        AxisPolicy::ForcedY => vec![Axis::Y; tiles],
        AxisPolicy::Auto1D => vec![layout.partition_axis().other(); tiles],
        AxisPolicy::Adaptive => {
            let stride = cfg
                .sample_stride
                .unwrap_or(axis_model::DEFAULT_SAMPLE_STRIDE);
            let cursor = TaskCursor::new(join_tasks.len());
            let picked = pool::scoped_map(cfg.threads, |_| {
                let mut mine = Vec::new();
                while let Some(i) = cursor.claim() {
                    let tile = join_tasks[i].tile;
                    let extent = layout.extent(tile);
                    let k = cfg
                        .k_buckets
                        .unwrap_or_else(|| axis_model::bucket_count(&extent, avg_extent));
                    let hist =
                        AxisHistograms::build(r.tile(tile), s.tile(tile), &extent, k, stride);
                    mine.push((tile, axis_model::select_axis(&hist)));
                }
                mine
            });
            let mut axes = vec![Axis::X; tiles];
            for (tile, axis) in picked.into_iter().flatten() {
                axes[tile] = axis;
            }
            axes
        }
    }
}
