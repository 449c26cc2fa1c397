//! Parameter recommendations from dataset statistics.

use crate::dataset::DatasetStats;
use crate::geometry::Axis;
use crate::partition::{recommend_k_capped, LayoutKind, PartitionLayout, DEFAULT_K_MAX};
use crate::sweep::AxisPolicy;

#[derive(Clone, Debug, PartialEq)]
pub struct Recommendation {
    pub layout: PartitionLayout,
    pub axis_policy: AxisPolicy,
    /// Axis the stripes are swept along.
    pub sweep_axis: Axis,
    /// Cardinality-weighted average extent of both inputs on the split axis.
    pub avg_extent: f64,
    pub warning: Option<String>,
}

impl Recommendation {
    pub fn k(&self) -> usize {
        self.layout.k()
    }
}

/// Average extent of both inputs on `axis`, weighted by cardinality.
pub fn combined_extent(r: &DatasetStats, s: &DatasetStats, axis: Axis) -> f64 {
    let n = r.cardinality + s.cardinality;
    if n == 0 {
        return 0.0;
    }
    (r.avg_extent(axis) * r.cardinality as f64 + s.avg_extent(axis) * s.cardinality as f64)
        / n as f64
}

/// Stripes across x, `K` from the extent rule, swept along y.
pub fn recommend(r: &DatasetStats, s: &DatasetStats) -> Recommendation {
    recommend_with_cap(r, s, DEFAULT_K_MAX)
}

pub fn recommend_with_cap(r: &DatasetStats, s: &DatasetStats, k_max: usize) -> Recommendation {
    let split = Axis::X;
    let avg_extent = combined_extent(r, s, split);
    let (k, warning) = match recommend_k_capped(avg_extent, LayoutKind::Stripes1D, k_max) {
        Ok(k) => (k, None),
        Err(_) => (
            k_max.max(1),
            Some(format!(
                "average {split}-extent is {avg_extent}; data looks like points, using the cap K={}",
                k_max.max(1)
            )),
        ),
    };
    let layout = PartitionLayout::stripes(split, k).expect("k within [1, k_max]");
    Recommendation {
        layout,
        axis_policy: AxisPolicy::Auto1D,
        sweep_axis: split.other(),
        avg_extent,
        warning,
    }
}
