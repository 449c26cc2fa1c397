//! Uniform stripe and grid decomposition with multi-assignment.
//!
//! Partitioning runs in two passes over equal contiguous slices of the
//! input: every worker first counts how many rectangles it will place in
//! each tile, the counts are turned into disjoint per-worker write ranges,
//! and then every worker copies its rectangles into its own ranges. Each
//! tile's rectangles end up contiguous in one buffer.

use crate::error::{Error, Result};
use crate::geometry::{division_lo, Axis, Rect, TileExtent};
use crate::pool;

/// Default upper bound on divisions per axis.
pub const DEFAULT_K_MAX: usize = 20_000;

/// Upper bound on the number of partitions in one layout.
pub const MAX_TILES: usize = 1 << 24;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayoutKind {
    Stripes1D,
    Grid2D,
}

/// `k` stripes across `partition_axis`, or a `k × k` grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PartitionLayout {
    kind: LayoutKind,
    partition_axis: Axis,
    k: usize,
}

impl PartitionLayout {
    /// Stripes cutting `partition_axis` into `k` equal intervals.
    pub fn stripes(partition_axis: Axis, k: usize) -> Result<Self> {
        PartitionLayout {
            kind: LayoutKind::Stripes1D,
            partition_axis,
            k,
        }
        .validated()
    }

    pub fn grid(k: usize) -> Result<Self> {
        PartitionLayout {
            kind: LayoutKind::Grid2D,
            partition_axis: Axis::X,
            k,
        }
        .validated()
    }

    fn validated(self) -> Result<Self> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        let tiles = match self.kind {
            LayoutKind::Stripes1D => Some(self.k),
            LayoutKind::Grid2D => self.k.checked_mul(self.k),
        };
        match tiles {
            Some(t) if t <= MAX_TILES => Ok(self),
            _ => Err(Error::Config(format!(
                "k={} yields more than {MAX_TILES} partitions",
                self.k
            ))),
        }
    }

    pub fn kind(&self) -> LayoutKind {
        self.kind
    }

    /// Axis cut by the stripes. Meaningless for grids (reports X).
    pub fn partition_axis(&self) -> Axis {
        self.partition_axis
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_tiles(&self) -> usize {
        match self.kind {
            LayoutKind::Stripes1D => self.k,
            LayoutKind::Grid2D => self.k * self.k,
        }
    }

    /// Grid tiles are numbered row-major: `row * k + col`, rows along y.
    pub fn extent(&self, tile: usize) -> TileExtent {
        match (self.kind, self.partition_axis) {
            (LayoutKind::Grid2D, _) => {
                TileExtent::grid_cell(tile / self.k, tile % self.k, self.k, self.k)
            }
            (LayoutKind::Stripes1D, Axis::X) => TileExtent::grid_cell(0, tile, self.k, 1),
            (LayoutKind::Stripes1D, Axis::Y) => TileExtent::grid_cell(tile, 0, 1, self.k),
        }
    }

    /// Precomputed index arithmetic for assigning rectangles to tiles.
    pub fn mapper(&self) -> TileMapper {
        TileMapper::new(*self)
    }
}

/// Assigns rectangles to the tiles of one layout.
///
/// Holds the division boundaries `i / k` so that index lookups need no
/// division while agreeing exactly with
/// [`division_index`](crate::geometry::division_index) and the extents
/// reported by [`PartitionLayout::extent`].
#[derive(Clone, Debug)]
pub struct TileMapper {
    layout: PartitionLayout,
    scale: f64,
    bounds: Vec<f64>,
}

impl TileMapper {
    pub fn new(layout: PartitionLayout) -> Self {
        let k = layout.k;
        TileMapper {
            layout,
            scale: k as f64,
            bounds: (0..=k).map(|i| division_lo(i, k)).collect(),
        }
    }

    pub fn layout(&self) -> &PartitionLayout {
        &self.layout
    }

    /// Same result as [`division_index`](crate::geometry::division_index) for this layout's `k`.
    #[inline]
    pub fn index(&self, p: f64) -> usize {
        let last = self.layout.k - 1;
        if last == 0 || p.is_nan() || p <= 0.0 {
            return 0;
        }
        // p > 0, so truncation is floor.
        let mut i = ((p * self.scale) as usize).min(last);
        while i > 0 && p < self.bounds[i] {
            i -= 1;
        }
        while i < last && p >= self.bounds[i + 1] {
            i += 1;
        }
        i
    }

    /// Inclusive division ranges `(first, last)` the rectangle covers on
    /// the cut axes: `(cols, rows)` for grids, `(stripes, stripes)` for 1D.
    #[inline]
    fn spans(&self, r: &Rect) -> ((usize, usize), (usize, usize)) {
        match self.layout.kind {
            LayoutKind::Grid2D => (
                (self.index(r.x_lo), self.index(r.x_hi)),
                (self.index(r.y_lo), self.index(r.y_hi)),
            ),
            LayoutKind::Stripes1D => {
                let a = self.layout.partition_axis;
                let span = (self.index(r.lo(a)), self.index(r.hi(a)));
                (span, span)
            }
        }
    }

    /// Calls `f` for every tile the rectangle overlaps, in increasing order.
    #[inline]
    pub fn for_each_tile(&self, r: &Rect, mut f: impl FnMut(usize)) {
        let ((c0, c1), (r0, r1)) = self.spans(r);
        match self.layout.kind {
            LayoutKind::Stripes1D => (c0..=c1).for_each(f),
            LayoutKind::Grid2D => {
                let k = self.layout.k;
                for row in r0..=r1 {
                    let base = row * k;
                    for col in c0..=c1 {
                        f(base + col);
                    }
                }
            }
        }
    }
}

/// Every tile the closed rectangle overlaps under the half-open tiling.
pub fn tiles_overlapping(r: &Rect, layout: &PartitionLayout) -> Vec<usize> {
    let mut out = Vec::new();
    layout.mapper().for_each_tile(r, |t| out.push(t));
    out
}

/// Per-tile number of assignments produced by `rects`.
pub fn count_pass(rects: &[Rect], layout: &PartitionLayout) -> Vec<usize> {
    let mut counts = vec![0usize; layout.num_tiles()];
    let mapper = layout.mapper();
    for r in rects {
        mapper.for_each_tile(r, |t| counts[t] += 1);
    }
    counts
}

/// Where every writer puts its share of every tile.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WritePlan {
    /// `tile_starts[t]..tile_starts[t + 1]` is tile `t` in the output.
    pub tile_starts: Vec<usize>,
    /// `segment_offsets[w][t]`: first slot of writer `w` inside tile `t`.
    pub segment_offsets: Vec<Vec<usize>>,
    /// `writer_counts[w][t]`: slots allotted to writer `w` inside tile `t`.
    pub writer_counts: Vec<Vec<usize>>,
}

impl WritePlan {
    /// Lays writers out back to back inside each tile, in writer order.
    pub fn from_counts(writer_counts: Vec<Vec<usize>>, num_tiles: usize) -> Self {
        let mut tile_starts = Vec::with_capacity(num_tiles + 1);
        let mut segment_offsets = vec![vec![0usize; num_tiles]; writer_counts.len()];
        let mut pos = 0usize;
        for t in 0..num_tiles {
            tile_starts.push(pos);
            for (w, counts) in writer_counts.iter().enumerate() {
                segment_offsets[w][t] = pos;
                pos += counts[t];
            }
        }
        tile_starts.push(pos);
        WritePlan {
            tile_starts,
            segment_offsets,
            writer_counts,
        }
    }

    pub fn total(&self) -> usize {
        self.tile_starts.last().copied().unwrap_or(0)
    }

    /// Per-tile totals over all writers.
    pub fn tile_counts(&self) -> Vec<usize> {
        self.tile_starts.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Every writer range lies inside its tile and ranges never overlap.
    fn check(&self, writers: usize, num_tiles: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("malformed write plan: {msg}")));
        if self.tile_starts.len() != num_tiles + 1
            || self.segment_offsets.len() != writers
            || self.writer_counts.len() != writers
            || self
                .segment_offsets
                .iter()
                .chain(&self.writer_counts)
                .any(|v| v.len() != num_tiles)
        {
            return bad("dimensions do not match the layout".into());
        }
        if self.tile_starts.windows(2).any(|w| w[0] > w[1]) {
            return bad("tile starts are not monotone".into());
        }
        let mut ranges = Vec::with_capacity(writers);
        for t in 0..num_tiles {
            ranges.clear();
            for w in 0..writers {
                let start = self.segment_offsets[w][t];
                let end = start.checked_add(self.writer_counts[w][t]);
                match end {
                    Some(end) if start >= self.tile_starts[t] && end <= self.tile_starts[t + 1] => {
                        ranges.push((start, end))
                    }
                    _ => return bad(format!("writer {w} range escapes tile {t}")),
                }
            }
            ranges.sort_unstable();
            if ranges.windows(2).any(|p| p[0].1 > p[1].0) {
                return bad(format!("writer ranges overlap in tile {t}"));
            }
        }
        Ok(())
    }
}

/// Rectangles of one input grouped contiguously by tile.
#[derive(Clone, Debug)]
pub struct PartitionedDataset {
    layout: PartitionLayout,
    rects: Vec<Rect>,
    starts: Vec<usize>,
}

impl PartitionedDataset {
    pub fn layout(&self) -> &PartitionLayout {
        &self.layout
    }

    pub fn num_tiles(&self) -> usize {
        self.starts.len() - 1
    }

    pub fn tile(&self, t: usize) -> &[Rect] {
        &self.rects[self.starts[t]..self.starts[t + 1]]
    }

    pub fn tile_len(&self, t: usize) -> usize {
        self.starts[t + 1] - self.starts[t]
    }

    pub fn counts(&self) -> Vec<usize> {
        self.starts.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Total assignments, at least the input size once replication happens.
    pub fn total_len(&self) -> usize {
        self.rects.len()
    }

    /// Disjoint mutable views of all tiles, indexed by tile.
    pub fn tiles_mut(&mut self) -> Vec<&mut [Rect]> {
        let mut out = Vec::with_capacity(self.num_tiles());
        let mut rest = self.rects.as_mut_slice();
        for w in self.starts.windows(2) {
            let (head, tail) = rest.split_at_mut(w[1] - w[0]);
            out.push(head);
            rest = tail;
        }
        out
    }
}

#[derive(Clone, Copy)]
struct SharedBuffer(*mut Rect);

impl SharedBuffer {
    fn ptr(&self) -> *mut Rect {
        self.0
    }
}

// Writers only touch the disjoint ranges a checked `WritePlan` assigns them.
unsafe impl Send for SharedBuffer {}
unsafe impl Sync for SharedBuffer {}

/// Second pass: writer `w` copies `parts[w]` into its ranges of `plan`.
/// One thread per part. Fails if any writer produces more or fewer
/// assignments for a tile than the plan allotted it.
pub fn write_pass(
    parts: &[&[Rect]],
    layout: &PartitionLayout,
    plan: &WritePlan,
) -> Result<PartitionedDataset> {
    let tiles = layout.num_tiles();
    plan.check(parts.len(), tiles)?;
    let mut rects = vec![Rect::default(); plan.total()];
    let buffer = SharedBuffer(rects.as_mut_ptr());

    let outcomes = pool::scoped_map(parts.len(), |w| {
        let ends: Vec<usize> = plan.segment_offsets[w]
            .iter()
            .zip(&plan.writer_counts[w])
            .map(|(o, c)| o + c)
            .collect();
        let mut cursor = plan.segment_offsets[w].clone();
        let mut overflow = None;
        let mapper = layout.mapper();
        for r in parts[w] {
            mapper.for_each_tile(r, |t| {
                if cursor[t] < ends[t] {
                    // SAFETY: `plan.check` proved [offset, end) lies inside the
                    // buffer and is owned by this writer alone.
                    unsafe { buffer.ptr().add(cursor[t]).write(*r) };
                    cursor[t] += 1;
                } else if overflow.is_none() {
                    overflow = Some(t);
                }
            });
            if overflow.is_some() {
                break;
            }
        }
        if let Some(tile) = overflow {
            return Err(Error::PartitionMismatch {
                tile,
                writer: w,
                allotted: plan.writer_counts[w][tile],
                produced: plan.writer_counts[w][tile] + 1,
            });
        }
        for t in 0..tiles {
            if cursor[t] != ends[t] {
                return Err(Error::PartitionMismatch {
                    tile: t,
                    writer: w,
                    allotted: plan.writer_counts[w][t],
                    produced: cursor[t] - plan.segment_offsets[w][t],
                });
            }
        }
        Ok(())
    });
    outcomes.into_iter().collect::<Result<()>>()?;

    Ok(PartitionedDataset {
        layout: *layout,
        rects,
        starts: plan.tile_starts.clone(),
    })
}

/// Full two-pass partitioning of one input with `workers` threads.
pub fn partition(
    rects: &[Rect],
    layout: &PartitionLayout,
    workers: usize,
) -> Result<PartitionedDataset> {
    let parts = pool::split_even(rects, workers);
    let counts = pool::scoped_map(parts.len(), |w| count_pass(parts[w], layout));
    let plan = WritePlan::from_counts(counts, layout.num_tiles());
    write_pass(&parts, layout, &plan)
}

/// Divisions per axis so that a partition is about ten times the average
/// rectangle extent on that axis, clamped to `[1, k_max]`.
pub fn recommend_k(avg_extent: f64, kind: LayoutKind) -> Result<usize> {
    recommend_k_capped(avg_extent, kind, DEFAULT_K_MAX)
}

/// [`recommend_k`] with an explicit cap. Grids use the same per-axis rule.
pub fn recommend_k_capped(avg_extent: f64, _kind: LayoutKind, k_max: usize) -> Result<usize> {
    if avg_extent.is_nan() || avg_extent <= 0.0 {
        return Err(Error::InvalidStatistics(format!(
            "average extent must be positive, got {avg_extent}"
        )));
    }
    let k = (1.0 / (10.0 * avg_extent)).round();
    let k_max = k_max.max(1);
    Ok(if k >= k_max as f64 {
        k_max
    } else {
        (k as usize).max(1)
    })
}
