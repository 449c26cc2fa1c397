//! Forward-scan plane sweep over two rectangle sets.

use crate::axis_model::{self, AxisHistograms};
use crate::geometry::{duplicate_test_1d, duplicate_test_2d, Axis, Rect, TileExtent};

/// Whether a sink keeps the reported pairs or only counts them.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SinkMode {
    #[default]
    CountOnly,
    CollectPairs,
}

/// Receives join results.
#[derive(Clone, Debug, Default)]
pub struct ResultSink {
    mode: SinkMode,
    count: u64,
    pairs: Vec<(u64, u64)>,
}

impl ResultSink {
    pub fn new(mode: SinkMode) -> Self {
        ResultSink {
            mode,
            count: 0,
            pairs: Vec::new(),
        }
    }

    pub fn counting() -> Self {
        ResultSink::new(SinkMode::CountOnly)
    }

    pub fn collecting() -> Self {
        ResultSink::new(SinkMode::CollectPairs)
    }

    #[inline]
    pub fn emit(&mut self, r: u64, s: u64) {
        self.count += 1;
        if self.mode == SinkMode::CollectPairs {
            self.pairs.push((r, s));
        }
    }

    pub fn mode(&self) -> SinkMode {
        self.mode
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn pairs(&self) -> &[(u64, u64)] {
        &self.pairs
    }

    pub fn into_pairs(self) -> Vec<(u64, u64)> {
        self.pairs
    }

    /// Folds another sink's results into this one.
    pub fn absorb(&mut self, other: ResultSink) {
        self.count += other.count;
        if self.mode == SinkMode::CollectPairs {
            self.pairs.extend(other.pairs);
        }
    }
}

/// Duplicate-elimination filter bound to the tile a sweep runs in.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DupFilter {
    /// Single-partition layouts produce no replicas.
    None,
    Grid(TileExtent),
    Stripe(TileExtent, Axis),
}

impl DupFilter {
    #[inline]
    pub fn accepts(&self, r: &Rect, s: &Rect) -> bool {
        match self {
            DupFilter::None => true,
            DupFilter::Grid(t) => duplicate_test_2d(r, s, t),
            DupFilter::Stripe(t, axis) => duplicate_test_1d(r, s, t, *axis),
        }
    }
}

/// Sorts in place by lower endpoint on `axis`. Ties keep no particular order.
pub fn sort_by_lower(rects: &mut [Rect], axis: Axis) {
    match axis {
        Axis::X => rects.sort_unstable_by(|a, b| a.x_lo.total_cmp(&b.x_lo)),
        Axis::Y => rects.sort_unstable_by(|a, b| a.y_lo.total_cmp(&b.y_lo)),
    }
}

/// Joins `r` and `s`, both sorted by lower endpoint on `sweep_axis`,
/// emitting every intersecting pair accepted by `filter` into `sink`.
pub fn forward_scan_join(
    r: &[Rect],
    s: &[Rect],
    sweep_axis: Axis,
    filter: DupFilter,
    sink: &mut ResultSink,
) {
    sweep(r, s, sweep_axis, |a, b| {
        if filter.accepts(a, b) {
            sink.emit(a.id, b.id);
        }
    });
}

/// How the sweeping axis is picked.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AxisPolicy {
    ForcedX,
    ForcedY,
    /// Per-partition choice from sampled histograms.
    Adaptive,
    /// Stripes only: sweep along the axis the stripes run along.
    Auto1D,
}

/// Sorts both inputs on the axis `policy` selects and sweeps them with no
/// duplicate filter. Returns the axis used.
pub fn choose_and_sweep(
    r: &mut [Rect],
    s: &mut [Rect],
    policy: AxisPolicy,
    sink: &mut ResultSink,
) -> Axis {
    let axis = match policy {
        AxisPolicy::ForcedX => Axis::X,
        AxisPolicy::ForcedY => Axis::Y,
        AxisPolicy::Adaptive | AxisPolicy::Auto1D => {
            let k = axis_model::bucket_count_for_rects(&TileExtent::unit(), r, s);
            let hist = AxisHistograms::build(
                r,
                s,
                &TileExtent::unit(),
                k,
                axis_model::DEFAULT_SAMPLE_STRIDE,
            );
            axis_model::select_axis(&hist)
        }
    };
    sort_by_lower(r, axis);
    sort_by_lower(s, axis);
    forward_scan_join(r, s, axis, DupFilter::None, sink);
    axis
}

/// Forward-scan kernel. `emit` receives `(r, s)` for every pair that
/// intersects on both axes, each exactly once.
#[inline]
pub(crate) fn sweep<F>(r: &[Rect], s: &[Rect], axis: Axis, emit: F)
where
    F: FnMut(&Rect, &Rect),
{
    match axis {
        Axis::X => sweep_on::<XAxis, F>(r, s, emit),
        Axis::Y => sweep_on::<YAxis, F>(r, s, emit),
    }
}

trait SweepAxis {
    fn lo(r: &Rect) -> f64;
    fn hi(r: &Rect) -> f64;
    fn cross(a: &Rect, b: &Rect) -> bool;
}

struct XAxis;
struct YAxis;

impl SweepAxis for XAxis {
    #[inline(always)]
    fn lo(r: &Rect) -> f64 {
        r.x_lo
    }
    #[inline(always)]
    fn hi(r: &Rect) -> f64 {
        r.x_hi
    }
    #[inline(always)]
    fn cross(a: &Rect, b: &Rect) -> bool {
        a.y_lo <= b.y_hi && b.y_lo <= a.y_hi
    }
}

impl SweepAxis for YAxis {
    #[inline(always)]
    fn lo(r: &Rect) -> f64 {
        r.y_lo
    }
    #[inline(always)]
    fn hi(r: &Rect) -> f64 {
        r.y_hi
    }
    #[inline(always)]
    fn cross(a: &Rect, b: &Rect) -> bool {
        a.x_lo <= b.x_hi && b.x_lo <= a.x_hi
    }
}

fn sweep_on<A: SweepAxis, F: FnMut(&Rect, &Rect)>(r: &[Rect], s: &[Rect], mut emit: F) {
    let (mut i, mut j) = (0, 0);
    while i < r.len() && j < s.len() {
        let ri = &r[i];
        let sj = &s[j];
        if A::lo(ri) < A::lo(sj) {
            let hi = A::hi(ri);
            for sk in &s[j..] {
                if hi < A::lo(sk) {
                    break;
                }
                if A::cross(ri, sk) {
                    emit(ri, sk);
                }
            }
            i += 1;
        } else {
            let hi = A::hi(sj);
            for rk in &r[i..] {
                if hi < A::lo(rk) {
                    break;
                }
                if A::cross(rk, sj) {
                    emit(rk, sj);
                }
            }
            j += 1;
        }
    }
}
