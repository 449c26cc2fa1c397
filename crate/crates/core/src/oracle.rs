//! Exhaustive reference joins.
//!
//! These deliberately share nothing with the partitioned engine: no
//! layouts, no histograms, no duplicate tests, and their own predicates.
//! Cost is `O(|R|·|S|)`, so keep inputs small.

use std::collections::BTreeSet;

use crate::engine::Point;
use crate::geometry::Rect;

/// `{(r.id, s.id) : r and s share at least one point}`.
pub fn nested_loop_join(r: &[Rect], s: &[Rect]) -> BTreeSet<(u64, u64)> {
    let mut out = BTreeSet::new();
    for a in r {
        for b in s {
            let x_overlap = !(a.x_hi < b.x_lo || b.x_hi < a.x_lo);
            let y_overlap = !(a.y_hi < b.y_lo || b.y_hi < a.y_lo);
            if x_overlap && y_overlap {
                out.insert((a.id, b.id));
            }
        }
    }
    out
}

/// `{(p.id, q.id) : |p - q| <= epsilon}`.
pub fn nested_loop_distance(p: &[Point], q: &[Point], epsilon: f64) -> BTreeSet<(u64, u64)> {
    let mut out = BTreeSet::new();
    let limit = epsilon * epsilon;
    for a in p {
        for b in q {
            let dx = a.x - b.x;
            let dy = a.y - b.y;
            if dx * dx + dy * dy <= limit {
                out.insert((a.id, b.id));
            }
        }
    }
    out
}
