//! Partition-based spatial merge join for in-memory rectangle collections.
//!
//! The pieces, bottom up:
//!
//! * [`geometry`]: rectangles, tiles, and the intersection and
//!   reference-point duplicate tests.
//! * [`sweep`]: the forward-scan plane-sweep kernel.
//! * [`partition`]: uniform 1D stripe / 2D grid partitioning with
//!   replication, in two parallel passes.
//! * [`axis_model`]: histogram estimates for choosing the sweeping axis.
//! * [`engine`]: the parallel join pipeline and the ε-distance join.
//! * [`oracle`]: brute-force references for verification.
//! * [`dataset`]: file formats, normalization, statistics and synthetic data.
//! * [`tune`]: parameter recommendations from statistics.
//!
//! ```
//! use pbsm_core::{join, Axis, JoinConfig, PartitionLayout, Rect};
//!
//! let r = vec![Rect::new(1, 0.1, 0.1, 0.3, 0.3)];
//! let s = vec![Rect::new(2, 0.2, 0.2, 0.4, 0.4), Rect::new(3, 0.5, 0.5, 0.6, 0.6)];
//! let cfg = JoinConfig::new(PartitionLayout::stripes(Axis::X, 4)?).collecting();
//! let report = join(&r, &s, &cfg)?;
//! assert_eq!(report.pairs, Some(vec![(1, 2)]));
//! # Ok::<(), pbsm_core::Error>(())
//! ```

pub mod axis_model;
pub mod dataset;
pub mod engine;
pub mod error;
pub mod geometry;
pub mod oracle;
pub mod partition;
mod pool;
pub mod sweep;
pub mod tune;

pub use axis_model::{candidate_count, select_axis, AxisHistograms};
pub use dataset::{
    generate_synthetic, BoundingBox, Dataset, DatasetStats, SpatialDistribution, SyntheticSpec,
};
pub use engine::{build_task_queue, epsilon_distance_join, join, JoinConfig, JoinReport, Point};
pub use error::{Error, Result};
pub use geometry::{duplicate_test_1d, duplicate_test_2d, intersects, Axis, Rect, TileExtent};
pub use partition::{
    recommend_k, tiles_overlapping, LayoutKind, PartitionLayout, PartitionedDataset,
};
pub use sweep::{AxisPolicy, ResultSink, SinkMode};
