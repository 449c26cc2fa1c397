//! Sweeping-axis selection from sampled projection histograms.
//!
//! Each tile's x and y projections are cut into `k` equal buckets. A sample
//! of each input increments every bucket its (tile-clipped) projection
//! overlaps, and the dot product of the two inputs' histograms on an axis
//! estimates how many pairs overlap on that axis, i.e. how many candidates
//! a sweep along it would have to verify. The cheaper axis wins.

use crate::error::{Error, Result};
use crate::geometry::{Axis, Rect, TileExtent};

/// Bucket count used for tiles much larger than the rectangles.
pub const MAX_BUCKETS: usize = 1000;

/// One of every `DEFAULT_SAMPLE_STRIDE` rectangles feeds the histograms.
pub const DEFAULT_SAMPLE_STRIDE: usize = 100;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AxisHistograms {
    k_buckets: usize,
    sample_stride: usize,
    r_x: Vec<u64>,
    r_y: Vec<u64>,
    s_x: Vec<u64>,
    s_y: Vec<u64>,
}

impl AxisHistograms {
    /// Zeroed histograms. `k_buckets` and `sample_stride` are raised to 1.
    pub fn empty(k_buckets: usize, sample_stride: usize) -> Self {
        let k = k_buckets.max(1);
        AxisHistograms {
            k_buckets: k,
            sample_stride: sample_stride.max(1),
            r_x: vec![0; k],
            r_y: vec![0; k],
            s_x: vec![0; k],
            s_y: vec![0; k],
        }
    }

    /// Samples positions `0, φ, 2φ, …` of both tile buffers into histograms
    /// over `extent`.
    pub fn build(
        r: &[Rect],
        s: &[Rect],
        extent: &TileExtent,
        k_buckets: usize,
        sample_stride: usize,
    ) -> Self {
        let mut hist = AxisHistograms::empty(k_buckets, sample_stride);
        let stride = hist.sample_stride;
        for rect in r.iter().step_by(stride) {
            hist.add(Side::R, rect, extent);
        }
        for rect in s.iter().step_by(stride) {
            hist.add(Side::S, rect, extent);
        }
        hist
    }

    fn add(&mut self, side: Side, rect: &Rect, extent: &TileExtent) {
        let k = self.k_buckets;
        let (hx, hy) = match side {
            Side::R => (&mut self.r_x, &mut self.r_y),
            Side::S => (&mut self.s_x, &mut self.s_y),
        };
        for (axis, hist) in [(Axis::X, hx), (Axis::Y, hy)] {
            if let Some((first, last)) = bucket_range(rect, extent, axis, k) {
                for b in &mut hist[first..=last] {
                    *b += 1;
                }
            }
        }
    }

    /// Bucket-wise sum, for combining per-worker partial histograms.
    pub fn merge(&mut self, other: &AxisHistograms) -> Result<()> {
        if other.k_buckets != self.k_buckets {
            return Err(Error::InvalidHistogram(format!(
                "cannot merge {} buckets into {}",
                other.k_buckets, self.k_buckets
            )));
        }
        for (dst, src) in [
            (&mut self.r_x, &other.r_x),
            (&mut self.r_y, &other.r_y),
            (&mut self.s_x, &other.s_x),
            (&mut self.s_y, &other.s_y),
        ] {
            dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
        }
        Ok(())
    }

    pub fn k_buckets(&self) -> usize {
        self.k_buckets
    }

    pub fn sample_stride(&self) -> usize {
        self.sample_stride
    }

    /// Histogram of input `R` (`first == true`) or `S` on `axis`.
    pub fn histogram(&self, first: bool, axis: Axis) -> &[u64] {
        match (first, axis) {
            (true, Axis::X) => &self.r_x,
            (true, Axis::Y) => &self.r_y,
            (false, Axis::X) => &self.s_x,
            (false, Axis::Y) => &self.s_y,
        }
    }

    /// Estimated candidate pairs when sweeping along `axis`.
    pub fn candidates(&self, axis: Axis) -> u64 {
        let (a, b) = match axis {
            Axis::X => (&self.r_x, &self.s_x),
            Axis::Y => (&self.r_y, &self.s_y),
        };
        dot(a, b)
    }
}

#[derive(Clone, Copy)]
enum Side {
    R,
    S,
}

/// Inclusive bucket range covered by the rectangle's projection on `axis`
/// after clipping to the tile, or `None` if it misses the tile entirely.
fn bucket_range(rect: &Rect, extent: &TileExtent, axis: Axis, k: usize) -> Option<(usize, usize)> {
    let (t_lo, t_hi) = (extent.lo(axis), extent.hi(axis));
    let lo = rect.lo(axis).max(t_lo);
    let hi = rect.hi(axis).min(t_hi);
    if lo > hi {
        return None;
    }
    let len = t_hi - t_lo;
    if len <= 0.0 {
        return Some((0, 0));
    }
    let index = |v: f64| ((((v - t_lo) / len) * k as f64).floor() as usize).min(k - 1);
    Some((index(lo), index(hi)))
}

fn dot(a: &[u64], b: &[u64]) -> u64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Dot product of two equally sized histograms.
pub fn candidate_count(a: &[u64], b: &[u64]) -> Result<u64> {
    if a.len() != b.len() {
        return Err(Error::InvalidHistogram(format!(
            "length mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(dot(a, b))
}

/// X unless sweeping Y is estimated strictly cheaper.
pub fn select_axis(hist: &AxisHistograms) -> Axis {
    if hist.candidates(Axis::X) <= hist.candidates(Axis::Y) {
        Axis::X
    } else {
        Axis::Y
    }
}

/// `min(1000, max(1, floor(tile_len / avg_rect_len)))`.
pub fn bucket_count_for_tile(tile_extent_len: f64, avg_rect_extent_len: f64) -> Result<usize> {
    if tile_extent_len.is_nan()
        || tile_extent_len <= 0.0
        || avg_rect_extent_len.is_nan()
        || avg_rect_extent_len <= 0.0
    {
        return Err(Error::InvalidStatistics(format!(
            "tile length {tile_extent_len} and average extent {avg_rect_extent_len} must be positive"
        )));
    }
    let ratio = (tile_extent_len / avg_rect_extent_len).floor();
    Ok(if ratio >= MAX_BUCKETS as f64 {
        MAX_BUCKETS
    } else {
        (ratio as usize).max(1)
    })
}

/// Bucket count for `tile` given the mean rectangle side length. Zero-extent
/// data (points) count as arbitrarily small rectangles.
pub fn bucket_count(tile: &TileExtent, avg_extent: f64) -> usize {
    let tile_len = tile.len(Axis::X).max(tile.len(Axis::Y));
    bucket_count_for_tile(tile_len, avg_extent).unwrap_or(MAX_BUCKETS)
}

/// [`bucket_count`] with the mean side length measured over both inputs.
pub fn bucket_count_for_rects(tile: &TileExtent, r: &[Rect], s: &[Rect]) -> usize {
    let n = r.len() + s.len();
    if n == 0 {
        return 1;
    }
    let sum: f64 = r
        .iter()
        .chain(s)
        .map(|x| x.extent(Axis::X) + x.extent(Axis::Y))
        .sum();
    bucket_count(tile, sum / (2 * n) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_in_tile(
        rng: &mut ChaCha8Rng,
        tile: &TileExtent,
        n: usize,
        w: f64,
        h: f64,
    ) -> Vec<Rect> {
        (0..n)
            .map(|i| {
                let x = tile.x_lo - w / 2.0 + rng.random::<f64>() * (tile.len(Axis::X) + w / 2.0);
                let y = tile.y_lo - h / 2.0 + rng.random::<f64>() * (tile.len(Axis::Y) + h / 2.0);
                Rect::new(
                    i as u64,
                    x.max(0.0),
                    y.max(0.0),
                    (x + w).min(1.0),
                    (y + h).min(1.0),
                )
            })
            .collect()
    }

    #[test]
    fn whole_tile_rect_fills_every_bucket() {
        let tile = TileExtent::grid_cell(1, 2, 4, 4);
        let r = vec![Rect::new(0, tile.x_lo, tile.y_lo, tile.x_hi, tile.y_hi)];
        let h = AxisHistograms::build(&r, &[], &tile, 8, 1);
        assert!(h.histogram(true, Axis::X).iter().all(|&c| c == 1));
        assert!(h.histogram(true, Axis::Y).iter().all(|&c| c == 1));
        assert!(h.histogram(false, Axis::X).iter().all(|&c| c == 0));
    }

    #[test]
    fn empty_input_estimates_zero() {
        let s = vec![Rect::new(0, 0.1, 0.1, 0.2, 0.2)];
        let h = AxisHistograms::build(&[], &s, &TileExtent::unit(), 10, 1);
        assert_eq!(h.candidates(Axis::X), 0);
        assert_eq!(h.candidates(Axis::Y), 0);
    }

    #[test]
    fn dot_product() {
        assert_eq!(candidate_count(&[0, 0], &[0, 0]).unwrap(), 0);
        assert_eq!(candidate_count(&[1, 2], &[3, 4]).unwrap(), 11);
        assert!(matches!(
            candidate_count(&[1], &[1, 2]),
            Err(Error::InvalidHistogram(_))
        ));
    }

    #[test]
    fn buckets_match_direct_recount() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let tile = TileExtent::grid_cell(2, 1, 5, 5);
        let k = 17;
        let r = random_in_tile(&mut rng, &tile, 300, 0.03, 0.01);
        let s = random_in_tile(&mut rng, &tile, 200, 0.005, 0.04);
        let h = AxisHistograms::build(&r, &s, &tile, k, 1);
        // Direct overlap count of each bucket as a closed-open interval.
        for (first, data) in [(true, &r), (false, &s)] {
            for axis in [Axis::X, Axis::Y] {
                let w = tile.len(axis) / k as f64;
                let expected: Vec<u64> = (0..k)
                    .map(|b| {
                        let b_lo = tile.lo(axis) + b as f64 * w;
                        let b_hi = if b + 1 == k { tile.hi(axis) } else { b_lo + w };
                        data.iter()
                            .filter(|x| {
                                let lo = x.lo(axis).max(tile.lo(axis));
                                let hi = x.hi(axis).min(tile.hi(axis));
                                lo <= hi && hi >= b_lo && (lo < b_hi || b + 1 == k)
                            })
                            .count() as u64
                    })
                    .collect();
                assert_eq!(h.histogram(first, axis), &expected[..], "{first} {axis}");
            }
        }
        // Eq. (dot product) recomputed by hand from the recounted buckets.
        let ix: u64 = (0..k)
            .map(|b| h.histogram(true, Axis::X)[b] * h.histogram(false, Axis::X)[b])
            .sum();
        assert_eq!(h.candidates(Axis::X), ix);
    }

    #[test]
    fn stride_sampling_uses_every_phi_th() {
        let tile = TileExtent::unit();
        let r: Vec<Rect> = (0..250).map(|i| Rect::new(i, 0.0, 0.0, 1.0, 1.0)).collect();
        let h = AxisHistograms::build(&r, &r, &tile, 4, 100);
        // positions 0, 100, 200
        assert_eq!(h.histogram(true, Axis::X), &[3, 3, 3, 3]);
    }

    #[test]
    fn tie_breaks_to_x() {
        let r: Vec<Rect> = (0..10).map(|i| Rect::new(i, 0.1, 0.1, 0.2, 0.2)).collect();
        let h = AxisHistograms::build(&r, &r, &TileExtent::unit(), 1, 1);
        assert_eq!(h.candidates(Axis::X), 100);
        assert_eq!(h.candidates(Axis::Y), 100);
        assert_eq!(select_axis(&h), Axis::X);
    }

    #[test]
    fn wide_flat_selects_y_and_tall_thin_selects_x() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let tile = TileExtent::unit();
        let wide_r = random_in_tile(&mut rng, &tile, 2000, 0.01, 0.001);
        let wide_s = random_in_tile(&mut rng, &tile, 2000, 0.01, 0.001);
        let h = AxisHistograms::build(&wide_r, &wide_s, &tile, 1000, 1);
        assert!(h.candidates(Axis::Y) < h.candidates(Axis::X));
        assert_eq!(select_axis(&h), Axis::Y);

        let tall_r = random_in_tile(&mut rng, &tile, 2000, 0.001, 0.01);
        let tall_s = random_in_tile(&mut rng, &tile, 2000, 0.001, 0.01);
        let h = AxisHistograms::build(&tall_r, &tall_s, &tile, 1000, 1);
        assert!(h.candidates(Axis::X) < h.candidates(Axis::Y));
        assert_eq!(select_axis(&h), Axis::X);
    }

    #[test]
    fn selection_symmetric_in_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let tile = TileExtent::unit();
        for _ in 0..20 {
            let dims: [f64; 4] = std::array::from_fn(|_| rng.random::<f64>() * 0.05);
            let r = random_in_tile(&mut rng, &tile, 200, dims[0], dims[1]);
            let s = random_in_tile(&mut rng, &tile, 150, dims[2], dims[3]);
            let a = AxisHistograms::build(&r, &s, &tile, 50, 3);
            let b = AxisHistograms::build(&s, &r, &tile, 50, 3);
            assert_eq!(a.candidates(Axis::X), b.candidates(Axis::X));
            assert_eq!(select_axis(&a), select_axis(&b));
        }
    }

    #[test]
    fn single_bucket_gives_product_of_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let tile = TileExtent::unit();
        let r = random_in_tile(&mut rng, &tile, 37, 0.1, 0.02);
        let s = random_in_tile(&mut rng, &tile, 23, 0.02, 0.1);
        let h = AxisHistograms::build(&r, &s, &tile, 1, 1);
        assert_eq!(h.candidates(Axis::X), 37 * 23);
        assert_eq!(h.candidates(Axis::Y), 37 * 23);
        assert_eq!(select_axis(&h), Axis::X);
    }

    #[test]
    fn merge_is_bucketwise_sum() {
        let tile = TileExtent::unit();
        let a = vec![Rect::new(0, 0.0, 0.0, 0.3, 0.3)];
        let b = vec![Rect::new(1, 0.6, 0.6, 1.0, 1.0)];
        let mut ha = AxisHistograms::build(&a, &b, &tile, 10, 1);
        let hb = AxisHistograms::build(&b, &a, &tile, 10, 1);
        let whole = AxisHistograms::build(&[a[0], b[0]], &[b[0], a[0]], &tile, 10, 1);
        ha.merge(&hb).unwrap();
        assert_eq!(ha, whole);
        assert!(ha.merge(&AxisHistograms::empty(3, 1)).is_err());
    }

    #[test]
    fn bucket_count_rule() {
        assert_eq!(bucket_count_for_tile(1.0, 1e-5).unwrap(), 1000);
        assert_eq!(bucket_count_for_tile(0.001, 0.0005).unwrap(), 2);
        assert_eq!(bucket_count_for_tile(0.001, 0.01).unwrap(), 1);
        assert!(bucket_count_for_tile(0.0, 0.1).is_err());
        assert!(bucket_count_for_tile(0.1, -1.0).is_err());
    }
}
