//! Loading, normalizing, summarizing and generating rectangle datasets.
//!
//! Two on-disk formats are supported:
//!
//! * CSV, one `id,x_l,y_l,x_u,y_u` record per line. A header line is
//!   allowed and recognized by a non-numeric first field.
//! * Binary, little-endian: the magic `SJB1`, a `u64` record count, then
//!   per record an `u64` id followed by `x_l, y_l, x_u, y_u` as `f64`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::engine::Point;
use crate::error::{Error, Result};
use crate::geometry::{Axis, Rect};

pub const BINARY_MAGIC: &[u8; 4] = b"SJB1";
const BINARY_RECORD: usize = 8 + 4 * 8;
pub const CSV_HEADER: &str = "id,x_l,y_l,x_u,y_u";

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoundingBox {
    pub x_lo: f64,
    pub y_lo: f64,
    pub x_hi: f64,
    pub y_hi: f64,
}

impl BoundingBox {
    pub const UNIT: BoundingBox = BoundingBox {
        x_lo: 0.0,
        y_lo: 0.0,
        x_hi: 1.0,
        y_hi: 1.0,
    };

    /// Smallest box around `rects`, or `None` when empty.
    pub fn of(rects: &[Rect]) -> Option<Self> {
        let first = rects.first()?;
        let init = BoundingBox {
            x_lo: first.x_lo,
            y_lo: first.y_lo,
            x_hi: first.x_hi,
            y_hi: first.y_hi,
        };
        Some(rects.iter().fold(init, |b, r| BoundingBox {
            x_lo: b.x_lo.min(r.x_lo),
            y_lo: b.y_lo.min(r.y_lo),
            x_hi: b.x_hi.max(r.x_hi),
            y_hi: b.y_hi.max(r.y_hi),
        }))
    }

    pub fn union(&self, other: &BoundingBox) -> BoundingBox {
        BoundingBox {
            x_lo: self.x_lo.min(other.x_lo),
            y_lo: self.y_lo.min(other.y_lo),
            x_hi: self.x_hi.max(other.x_hi),
            y_hi: self.y_hi.max(other.y_hi),
        }
    }

    pub fn width(&self) -> f64 {
        self.x_hi - self.x_lo
    }

    pub fn height(&self) -> f64 {
        self.y_hi - self.y_lo
    }

    pub fn within_unit(&self) -> bool {
        self.x_lo >= 0.0 && self.y_lo >= 0.0 && self.x_hi <= 1.0 && self.y_hi <= 1.0
    }

    /// Coordinate frame the data is measured in: the unit square when the
    /// data already fits in it, otherwise the box itself.
    pub fn frame(&self) -> BoundingBox {
        if self.within_unit() {
            BoundingBox::UNIT
        } else {
            *self
        }
    }
}

/// Cardinality and relative average side lengths.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DatasetStats {
    pub cardinality: usize,
    /// Average x-extent relative to the width of the data's frame.
    pub avg_x_extent: f64,
    pub avg_y_extent: f64,
    /// Raw bounding box; `None` for an empty dataset.
    pub bbox: Option<BoundingBox>,
}

impl DatasetStats {
    pub fn compute(rects: &[Rect]) -> Self {
        let bbox = BoundingBox::of(rects);
        let (mut avg_x, mut avg_y) = (0.0, 0.0);
        if let Some(frame) = bbox.map(|b| b.frame()) {
            let n = rects.len() as f64;
            let sum_x: f64 = rects.iter().map(|r| r.extent(Axis::X)).sum();
            let sum_y: f64 = rects.iter().map(|r| r.extent(Axis::Y)).sum();
            if frame.width() > 0.0 {
                avg_x = sum_x / n / frame.width();
            }
            if frame.height() > 0.0 {
                avg_y = sum_y / n / frame.height();
            }
        }
        DatasetStats {
            cardinality: rects.len(),
            avg_x_extent: avg_x,
            avg_y_extent: avg_y,
            bbox,
        }
    }

    pub fn avg_extent(&self, axis: Axis) -> f64 {
        match axis {
            Axis::X => self.avg_x_extent,
            Axis::Y => self.avg_y_extent,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub rects: Vec<Rect>,
    pub stats: DatasetStats,
}

impl Dataset {
    pub fn new(rects: Vec<Rect>) -> Self {
        let stats = DatasetStats::compute(&rects);
        Dataset { rects, stats }
    }
}

/// Reads a CSV or binary file, picking the format from the magic bytes.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(BINARY_MAGIC) {
        parse_binary(path, &bytes)
    } else {
        let text = String::from_utf8(bytes).map_err(|e| Error::Parse {
            path: path.into(),
            line: 0,
            message: format!("not UTF-8 text: {e}"),
        })?;
        parse_csv(path, &text)
    }
}

pub fn load_mbr_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_csv(path, &text)
}

pub fn load_mbr_binary(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_binary(path, &bytes)
}

fn parse_csv(path: &Path, text: &str) -> Result<Dataset> {
    let mut rects = Vec::new();
    let mut seen_data = false;
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if !seen_data && rects.is_empty() && fields[0].parse::<f64>().is_err() && fields.len() == 5
        {
            // header
            seen_data = true;
            continue;
        }
        seen_data = true;
        let parse_err = |message: String| Error::Parse {
            path: path.into(),
            line: line_no,
            message,
        };
        if fields.len() != 5 {
            return Err(parse_err(format!(
                "expected 5 fields (id,x_l,y_l,x_u,y_u), found {}",
                fields.len()
            )));
        }
        let id: u64 = fields[0]
            .parse()
            .map_err(|_| parse_err(format!("invalid id {:?}", fields[0])))?;
        let mut coords = [0f64; 4];
        for (c, f) in coords.iter_mut().zip(&fields[1..]) {
            *c = f
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| parse_err(format!("invalid coordinate {f:?}")))?;
        }
        let r = Rect::new(id, coords[0], coords[1], coords[2], coords[3]);
        check_record(path, rects.len() + 1, &r)?;
        rects.push(r);
    }
    Ok(Dataset::new(rects))
}

fn check_record(path: &Path, record: usize, r: &Rect) -> Result<()> {
    if !r.is_valid() {
        return Err(Error::Record {
            path: path.into(),
            record,
            message: format!(
                "rectangle {} has a lower corner above its upper corner",
                r.id
            ),
        });
    }
    Ok(())
}

fn parse_binary(path: &Path, bytes: &[u8]) -> Result<Dataset> {
    let corrupt = |message: String| Error::Parse {
        path: path.into(),
        line: 0,
        message,
    };
    if bytes.len() < 12 || &bytes[..4] != BINARY_MAGIC {
        return Err(corrupt("missing SJB1 header".into()));
    }
    let count = u64::from_le_bytes(bytes[4..12].try_into().unwrap());
    let body = &bytes[12..];
    if count.checked_mul(BINARY_RECORD as u64) != Some(body.len() as u64) {
        return Err(corrupt(format!(
            "header announces {count} records but body holds {} bytes",
            body.len()
        )));
    }
    let mut rects = Vec::with_capacity(count as usize);
    for (i, rec) in body.chunks_exact(BINARY_RECORD).enumerate() {
        let word = |k: usize| <[u8; 8]>::try_from(&rec[k * 8..k * 8 + 8]).unwrap();
        let id = u64::from_le_bytes(word(0));
        let [x_lo, y_lo, x_hi, y_hi] = [1, 2, 3, 4].map(|k| f64::from_le_bytes(word(k)));
        let r = Rect::new(id, x_lo, y_lo, x_hi, y_hi);
        if ![x_lo, y_lo, x_hi, y_hi].iter().all(|v| v.is_finite()) {
            return Err(Error::Record {
                path: path.into(),
                record: i + 1,
                message: "non-finite coordinate".into(),
            });
        }
        check_record(path, i + 1, &r)?;
        rects.push(r);
    }
    Ok(Dataset::new(rects))
}

pub fn write_mbr_csv(path: impl AsRef<Path>, rects: &[Rect]) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<fs::File>| -> std::io::Result<()> {
        writeln!(out, "{CSV_HEADER}")?;
        for r in rects {
            writeln!(out, "{},{},{},{},{}", r.id, r.x_lo, r.y_lo, r.x_hi, r.y_hi)?;
        }
        out.flush()
    };
    write(&mut out).map_err(|e| Error::io(path, e))
}

pub fn write_mbr_binary(path: impl AsRef<Path>, rects: &[Rect]) -> Result<()> {
    let path = path.as_ref();
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let write = |out: &mut BufWriter<fs::File>| -> std::io::Result<()> {
        out.write_all(BINARY_MAGIC)?;
        out.write_all(&(rects.len() as u64).to_le_bytes())?;
        for r in rects {
            out.write_all(&r.id.to_le_bytes())?;
            for v in [r.x_lo, r.y_lo, r.x_hi, r.y_hi] {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        out.flush()
    };
    write(&mut out).map_err(|e| Error::io(path, e))
}

/// Maps `bbox` (the data's own box when `None`) affinely onto `[0,1]²`.
pub fn normalize(rects: &[Rect], bbox: Option<BoundingBox>) -> Result<Vec<Rect>> {
    let Some(bbox) = bbox.or_else(|| BoundingBox::of(rects)) else {
        return Ok(Vec::new());
    };
    if bbox.width().is_nan()
        || bbox.width() <= 0.0
        || bbox.height().is_nan()
        || bbox.height() <= 0.0
    {
        return Err(Error::Normalization(format!(
            "bounding box {bbox:?} has zero width or height"
        )));
    }
    let (w, h) = (bbox.width(), bbox.height());
    let fx = |v: f64| ((v - bbox.x_lo) / w).clamp(0.0, 1.0);
    let fy = |v: f64| ((v - bbox.y_lo) / h).clamp(0.0, 1.0);
    Ok(rects
        .iter()
        .map(|r| Rect::new(r.id, fx(r.x_lo), fy(r.y_lo), fx(r.x_hi), fy(r.y_hi)))
        .collect())
}

/// Brings two inputs into one shared frame. Data already inside the unit
/// square is left as is; otherwise both are mapped by their union box.
pub fn normalize_pair(r: &[Rect], s: &[Rect]) -> Result<(Vec<Rect>, Vec<Rect>)> {
    let union = match (BoundingBox::of(r), BoundingBox::of(s)) {
        (Some(a), Some(b)) => a.union(&b),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => return Ok((Vec::new(), Vec::new())),
    };
    if union.within_unit() {
        return Ok((r.to_vec(), s.to_vec()));
    }
    Ok((normalize(r, Some(union))?, normalize(s, Some(union))?))
}

/// Treats each rectangle as the point at its center.
pub fn rects_to_points(rects: &[Rect]) -> Vec<Point> {
    rects
        .iter()
        .map(|r| Point::new(r.id, 0.5 * (r.x_lo + r.x_hi), 0.5 * (r.y_lo + r.y_hi)))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpatialDistribution {
    Uniform,
    /// Centers drawn around `clusters` uniformly placed seeds with
    /// standard deviation `sigma`.
    Clustered {
        clusters: usize,
        sigma: f64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub mean_x_extent: f64,
    pub mean_y_extent: f64,
    pub distribution: SpatialDistribution,
    pub seed: u64,
    /// Identifier of the first rectangle; the rest follow consecutively.
    pub first_id: u64,
}

impl SyntheticSpec {
    pub fn uniform(n: usize, mean_extent: f64, seed: u64) -> Self {
        SyntheticSpec {
            n,
            mean_x_extent: mean_extent,
            mean_y_extent: mean_extent,
            distribution: SpatialDistribution::Uniform,
            seed,
            first_id: 0,
        }
    }

    pub fn with_extents(mut self, mean_x: f64, mean_y: f64) -> Self {
        self.mean_x_extent = mean_x;
        self.mean_y_extent = mean_y;
        self
    }

    pub fn with_first_id(mut self, first_id: u64) -> Self {
        self.first_id = first_id;
        self
    }
}

/// Deterministic rectangles in the unit square: centers from the spatial
/// distribution, side lengths exponential around the per-axis means, all
/// clipped to the domain.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Vec<Rect> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let side = |mean: f64| (mean > 0.0).then(|| Exp::new(1.0 / mean).expect("positive rate"));
    let (ex, ey) = (side(spec.mean_x_extent), side(spec.mean_y_extent));
    let seeds: Vec<(f64, f64)> = match spec.distribution {
        SpatialDistribution::Uniform => Vec::new(),
        SpatialDistribution::Clustered { clusters, .. } => (0..clusters.max(1))
            .map(|_| (rng.random(), rng.random()))
            .collect(),
    };
    let spread = match spec.distribution {
        SpatialDistribution::Clustered { sigma, .. } if sigma > 0.0 => Normal::new(0.0, sigma).ok(),
        _ => None,
    };
    (0..spec.n)
        .map(|i| {
            let (cx, cy) = if seeds.is_empty() {
                (rng.random::<f64>(), rng.random::<f64>())
            } else {
                let (sx, sy) = seeds[rng.random_range(0..seeds.len())];
                let jitter = |rng: &mut ChaCha8Rng| spread.map_or(0.0, |d| d.sample(rng));
                let x = (sx + jitter(&mut rng)).clamp(0.0, 1.0);
                let y = (sy + jitter(&mut rng)).clamp(0.0, 1.0);
                (x, y)
            };
            let w = ex.map_or(0.0, |d| d.sample(&mut rng));
            let h = ey.map_or(0.0, |d| d.sample(&mut rng));
            Rect::new(
                spec.first_id + i as u64,
                (cx - 0.5 * w).max(0.0),
                (cy - 0.5 * h).max(0.0),
                (cx + 0.5 * w).min(1.0),
                (cy + 0.5 * h).min(1.0),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::nested_loop_join;

    fn temp_with(contents: &[u8]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents).unwrap();
        f
    }

    #[test]
    fn single_line_csv() {
        let f = temp_with(b"7,0.1,0.2,0.3,0.4\n");
        let ds = load_mbr_csv(f.path()).unwrap();
        assert_eq!(ds.rects, vec![Rect::new(7, 0.1, 0.2, 0.3, 0.4)]);
        assert_eq!(ds.stats.cardinality, 1);
        assert!((ds.stats.avg_x_extent - 0.2).abs() < 1e-12);
        assert!((ds.stats.avg_y_extent - 0.2).abs() < 1e-12);
    }

    #[test]
    fn header_is_skipped() {
        let f = temp_with(b"id,x_l,y_l,x_u,y_u\n1,0,0,0.5,0.5\n\n2,0.5,0.5,1,1\n");
        let ds = load_dataset(f.path()).unwrap();
        assert_eq!(ds.rects.len(), 2);
    }

    #[test]
    fn empty_csv() {
        let f = temp_with(b"");
        let ds = load_mbr_csv(f.path()).unwrap();
        assert!(ds.rects.is_empty());
        assert_eq!(ds.stats.cardinality, 0);
        assert_eq!(ds.stats.avg_x_extent, 0.0);
        assert_eq!(ds.stats.bbox, None);
    }

    #[test]
    fn malformed_line_names_line_number() {
        let f = temp_with(b"a,b,c\n");
        match load_mbr_csv(f.path()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
        let f = temp_with(b"1,0,0,1,1\n2,0,x,1,1\n");
        assert!(matches!(
            load_mbr_csv(f.path()),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn inverted_record_rejects_file() {
        let f = temp_with(b"1,0.5,0,0.4,1\n");
        assert!(matches!(
            load_mbr_csv(f.path()),
            Err(Error::Record { record: 1, .. })
        ));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(
            load_dataset("/nonexistent/file.csv"),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn binary_round_trip_and_detection() {
        let rects = generate_synthetic(&SyntheticSpec::uniform(100, 0.01, 4));
        let dir = tempfile::tempdir().unwrap();
        let bin = dir.path().join("a.sjb");
        let csv = dir.path().join("a.csv");
        write_mbr_binary(&bin, &rects).unwrap();
        write_mbr_csv(&csv, &rects).unwrap();
        assert_eq!(load_dataset(&bin).unwrap().rects, rects);
        assert_eq!(load_mbr_binary(&bin).unwrap().rects, rects);
        assert_eq!(load_dataset(&csv).unwrap().rects, rects);

        let mut bytes = fs::read(&bin).unwrap();
        bytes.truncate(bytes.len() - 3);
        let f = temp_with(&bytes);
        assert!(matches!(load_dataset(f.path()), Err(Error::Parse { .. })));
    }

    #[test]
    fn normalization_examples() {
        let bbox = BoundingBox {
            x_lo: 0.0,
            y_lo: 0.0,
            x_hi: 10.0,
            y_hi: 10.0,
        };
        let out = normalize(&[Rect::new(1, 2.0, 5.0, 4.0, 5.0)], Some(bbox)).unwrap();
        assert_eq!(out, vec![Rect::new(1, 0.2, 0.5, 0.4, 0.5)]);

        let unit = vec![
            Rect::new(0, 0.0, 0.0, 1.0, 1.0),
            Rect::new(1, 0.25, 0.5, 0.75, 0.5),
        ];
        assert_eq!(normalize(&unit, Some(BoundingBox::UNIT)).unwrap(), unit);

        let flat = vec![Rect::new(0, 0.0, 3.0, 1.0, 3.0)];
        assert!(matches!(
            normalize(&flat, None),
            Err(Error::Normalization(_))
        ));
    }

    #[test]
    fn normalization_preserves_join_result() {
        let scale = |r: &Rect| {
            Rect::new(
                r.id,
                100.0 + 40.0 * r.x_lo,
                -5.0 + 3.0 * r.y_lo,
                100.0 + 40.0 * r.x_hi,
                -5.0 + 3.0 * r.y_hi,
            )
        };
        let r = generate_synthetic(&SyntheticSpec::uniform(300, 0.05, 1));
        let s = generate_synthetic(&SyntheticSpec::uniform(300, 0.05, 2).with_first_id(1000));
        let raw_r: Vec<Rect> = r.iter().map(scale).collect();
        let raw_s: Vec<Rect> = s.iter().map(scale).collect();
        let (nr, ns) = normalize_pair(&raw_r, &raw_s).unwrap();
        assert!(nr.iter().chain(&ns).all(Rect::is_normalized));
        assert_eq!(nested_loop_join(&raw_r, &raw_s), nested_loop_join(&nr, &ns));
    }

    #[test]
    fn stats_of_raw_data_are_relative() {
        let rects = vec![
            Rect::new(0, 0.0, 0.0, 10.0, 1.0),
            Rect::new(1, 90.0, 9.0, 100.0, 10.0),
        ];
        let stats = DatasetStats::compute(&rects);
        assert!((stats.avg_x_extent - 0.1).abs() < 1e-12);
        assert!((stats.avg_y_extent - 0.1).abs() < 1e-12);
    }

    #[test]
    fn synthetic_generation() {
        assert!(generate_synthetic(&SyntheticSpec::uniform(0, 0.01, 1)).is_empty());
        let spec = SyntheticSpec::uniform(1000, 0.01, 99);
        assert_eq!(generate_synthetic(&spec), generate_synthetic(&spec));
        let clustered = SyntheticSpec {
            distribution: SpatialDistribution::Clustered {
                clusters: 5,
                sigma: 0.02,
            },
            ..spec
        };
        let rects = generate_synthetic(&clustered);
        assert!(rects.iter().all(Rect::is_normalized));
        assert_eq!(rects.len(), 1000);
    }

    #[test]
    fn synthetic_mean_extent_within_ten_percent() {
        let rects = generate_synthetic(&SyntheticSpec::uniform(100_000, 0.001, 12));
        let stats = DatasetStats::compute(&rects);
        for axis in [Axis::X, Axis::Y] {
            let avg = stats.avg_extent(axis);
            assert!((avg - 0.001).abs() <= 0.0001, "{axis}: {avg}");
        }
    }
}
