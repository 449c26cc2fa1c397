//! Rectangles, tile extents and the predicates the join is built on.
//!
//! All coordinates live in the normalized unit square. Rectangles are
//! closed boxes; tiles are half-open `[lo, hi)` on each axis except where
//! they touch the domain boundary at `1.0`, which they include.

use std::fmt;

/// One of the two axes of the plane.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Axis {
    X,
    Y,
}

impl Axis {
    /// The other axis.
    #[inline]
    pub fn other(self) -> Axis {
        match self {
            Axis::X => Axis::Y,
            Axis::Y => Axis::X,
        }
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Axis::X => f.write_str("x"),
            Axis::Y => f.write_str("y"),
        }
    }
}

/// Axis-aligned minimum bounding rectangle with an opaque identifier.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Rect {
    pub id: u64,
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
}

impl Rect {
    pub fn new(id: u64, x_lo: f64, y_lo: f64, x_hi: f64, y_hi: f64) -> Self {
        Rect {
            id,
            x_lo,
            x_hi,
            y_lo,
            y_hi,
        }
    }

    /// Zero-extent rectangle standing in for a point.
    pub fn point(id: u64, x: f64, y: f64) -> Self {
        Rect::new(id, x, y, x, y)
    }

    #[inline]
    pub fn lo(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.x_lo,
            Axis::Y => self.y_lo,
        }
    }

    #[inline]
    pub fn hi(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.x_hi,
            Axis::Y => self.y_hi,
        }
    }

    #[inline]
    pub fn extent(&self, axis: Axis) -> f64 {
        self.hi(axis) - self.lo(axis)
    }

    /// Lower endpoints are not above upper endpoints and nothing is NaN.
    pub fn is_valid(&self) -> bool {
        self.x_lo <= self.x_hi && self.y_lo <= self.y_hi
    }

    /// Valid and inside `[0,1]²`.
    pub fn is_normalized(&self) -> bool {
        self.is_valid()
            && (0.0..=1.0).contains(&self.x_lo)
            && (0.0..=1.0).contains(&self.x_hi)
            && (0.0..=1.0).contains(&self.y_lo)
            && (0.0..=1.0).contains(&self.y_hi)
    }
}

/// Closed-interval intersection test: boundary contact counts.
#[inline]
pub fn intersects(r: &Rect, s: &Rect) -> bool {
    r.x_lo <= s.x_hi && s.x_lo <= r.x_hi && r.y_lo <= s.y_hi && s.y_lo <= r.y_hi
}

/// Projection overlap on a single axis.
#[inline]
pub fn intersects_on(r: &Rect, s: &Rect, axis: Axis) -> bool {
    r.lo(axis) <= s.hi(axis) && s.lo(axis) <= r.hi(axis)
}

/// Lower boundary of division `index` out of `k` equal divisions of `[0,1]`.
#[inline]
pub fn division_lo(index: usize, k: usize) -> f64 {
    index as f64 / k as f64
}

/// Index of the half-open division of `[0,1]` containing `p`, for `k`
/// equal divisions. Values at or beyond `1.0` clamp to the last division,
/// values below `0.0` to the first.
///
/// The result is consistent with [`division_lo`]: `division_lo(i, k) <= p`
/// holds exactly when `i <= division_index(p, k)`, so the assignment of
/// rectangles to tiles and the reference-point test agree bit for bit.
#[inline]
pub fn division_index(p: f64, k: usize) -> usize {
    if k <= 1 || p <= 0.0 || p.is_nan() {
        return 0;
    }
    let last = k - 1;
    let mut i = ((p * k as f64).floor() as usize).min(last);
    // floor(p·k) can land one off near a boundary; settle against the
    // boundaries that tile extents actually report.
    while i > 0 && p < division_lo(i, k) {
        i -= 1;
    }
    while i < last && p >= division_lo(i + 1, k) {
        i += 1;
    }
    i
}

/// Spatial extent of one tile or stripe together with its grid position.
///
/// `row` indexes the y divisions and `col` the x divisions. A stripe of a
/// 1D layout spans the whole domain on the non-partitioned axis and uses
/// only one of the two indices.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TileExtent {
    pub x_lo: f64,
    pub x_hi: f64,
    pub y_lo: f64,
    pub y_hi: f64,
    pub row: usize,
    pub col: usize,
}

impl TileExtent {
    /// Cell `(row, col)` of a `k_x × k_y` uniform grid over the unit square.
    pub fn grid_cell(row: usize, col: usize, k_x: usize, k_y: usize) -> Self {
        TileExtent {
            x_lo: division_lo(col, k_x),
            x_hi: division_lo(col + 1, k_x),
            y_lo: division_lo(row, k_y),
            y_hi: division_lo(row + 1, k_y),
            row,
            col,
        }
    }

    /// The whole domain as a single tile.
    pub fn unit() -> Self {
        TileExtent::grid_cell(0, 0, 1, 1)
    }

    #[inline]
    pub fn lo(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.x_lo,
            Axis::Y => self.y_lo,
        }
    }

    #[inline]
    pub fn hi(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.x_hi,
            Axis::Y => self.y_hi,
        }
    }

    #[inline]
    pub fn len(&self, axis: Axis) -> f64 {
        self.hi(axis) - self.lo(axis)
    }

    /// Half-open containment, closed on the side touching `1.0`.
    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        let in_axis = |p: f64, lo: f64, hi: f64| p >= lo && (p < hi || (hi >= 1.0 && p <= hi));
        in_axis(x, self.x_lo, self.x_hi) && in_axis(y, self.y_lo, self.y_hi)
    }

    /// Whether the closed rectangle overlaps this half-open tile.
    pub fn overlaps(&self, r: &Rect) -> bool {
        let on_axis = |lo: f64, hi: f64, t_lo: f64, t_hi: f64| {
            hi >= t_lo && (lo < t_hi || (t_hi >= 1.0 && lo <= t_hi))
        };
        on_axis(r.x_lo, r.x_hi, self.x_lo, self.x_hi)
            && on_axis(r.y_lo, r.y_hi, self.y_lo, self.y_hi)
    }
}

/// Reference-point test for a pair found intersecting in a 2D grid tile:
/// report only if the lower corner of the intersection lies in `tile`.
#[inline]
pub fn duplicate_test_2d(r: &Rect, s: &Rect, tile: &TileExtent) -> bool {
    r.x_lo.max(s.x_lo) >= tile.x_lo && r.y_lo.max(s.y_lo) >= tile.y_lo
}

/// Single-comparison reference-point test for stripes on `partition_axis`.
#[inline]
pub fn duplicate_test_1d(r: &Rect, s: &Rect, tile: &TileExtent, partition_axis: Axis) -> bool {
    r.lo(partition_axis).max(s.lo(partition_axis)) >= tile.lo(partition_axis)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rect(x_lo: f64, x_hi: f64, y_lo: f64, y_hi: f64) -> Rect {
        Rect::new(0, x_lo, y_lo, x_hi, y_hi)
    }

    #[test]
    fn intersection_cases() {
        let r = rect(0.0, 0.4, 0.0, 0.4);
        assert!(!intersects(&r, &rect(0.5, 0.9, 0.0, 0.4)));
        assert!(intersects(&r, &rect(0.4, 0.9, 0.4, 0.9)));
        assert!(intersects(
            &rect(0.1, 0.3, 0.1, 0.3),
            &rect(0.15, 0.2, 0.15, 0.2)
        ));
    }

    #[test]
    fn reference_point_2d() {
        let r = rect(0.05, 0.15, 0.05, 0.15);
        let s = rect(0.08, 0.2, 0.08, 0.2);
        let t00 = TileExtent::grid_cell(0, 0, 10, 10);
        let t01 = TileExtent::grid_cell(0, 1, 10, 10);
        assert!(duplicate_test_2d(&r, &s, &t00));
        assert!(!duplicate_test_2d(&r, &s, &t01));
    }

    #[test]
    fn reference_point_1d() {
        let r = rect(0.05, 0.15, 0.0, 1.0);
        let s = rect(0.08, 0.2, 0.0, 1.0);
        let stripe0 = TileExtent::grid_cell(0, 0, 10, 1);
        let stripe1 = TileExtent::grid_cell(0, 1, 10, 1);
        assert!(duplicate_test_1d(&r, &s, &stripe0, Axis::X));
        assert!(!duplicate_test_1d(&r, &s, &stripe1, Axis::X));
    }

    #[test]
    fn division_index_clamps_and_matches_boundaries() {
        assert_eq!(division_index(0.0, 10), 0);
        assert_eq!(division_index(1.0, 10), 9);
        assert_eq!(division_index(0.1, 10), 1);
        assert_eq!(division_index(0.0999999, 10), 0);
        assert_eq!(division_index(-0.5, 10), 0);
        assert_eq!(division_index(0.7, 1), 0);
        for k in [3usize, 7, 10, 33, 100, 999, 20000] {
            for i in 0..k.min(500) {
                let b = division_lo(i, k);
                assert_eq!(division_index(b, k), i, "k={k} i={i}");
                if i > 0 {
                    let below = f64::from_bits(b.to_bits() - 1);
                    assert_eq!(division_index(below, k), i - 1, "k={k} i={i}");
                }
            }
        }
    }

    #[test]
    fn tile_containment_is_half_open() {
        let t = TileExtent::grid_cell(0, 0, 2, 2);
        assert!(t.contains_point(0.0, 0.0));
        assert!(!t.contains_point(0.5, 0.2));
        let last = TileExtent::grid_cell(1, 1, 2, 2);
        assert!(last.contains_point(1.0, 1.0));
        assert!(last.contains_point(0.5, 0.5));
    }

    #[test]
    fn tile_overlap_excludes_touching_upper_edge() {
        let t = TileExtent::grid_cell(0, 0, 10, 1);
        assert!(!t.overlaps(&rect(0.1, 0.2, 0.0, 1.0)));
        assert!(t.overlaps(&rect(0.0, 0.1, 0.0, 1.0)));
        let t1 = TileExtent::grid_cell(0, 1, 10, 1);
        assert!(t1.overlaps(&rect(0.1, 0.1, 0.5, 0.5)));
    }

    #[test]
    fn axis_other() {
        assert_eq!(Axis::X.other(), Axis::Y);
        assert_eq!(Axis::Y.other(), Axis::X);
    }
}
