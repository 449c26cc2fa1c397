//! `pbsm`: run, benchmark and tune spatial intersection joins.

use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use pbsm_core::dataset::{self, normalize, normalize_pair, rects_to_points};
use pbsm_core::oracle::{nested_loop_distance, nested_loop_join};
use pbsm_core::partition::DEFAULT_K_MAX;
use pbsm_core::{
    epsilon_distance_join, generate_synthetic, join, recommend_k, tune, Axis, AxisPolicy,
    BoundingBox, Dataset, DatasetStats, JoinConfig, JoinReport, LayoutKind, PartitionLayout, Point,
    Rect, SpatialDistribution, SyntheticSpec,
};

/// Largest input (per side) that `--verify` will check against the nested-loop oracle.
const VERIFY_LIMIT: usize = 100_000;

const BENCH_HEADER: &str = "layout,k,axis,threads,rep,partition_s,join_s,total_s,result_count";

#[derive(Parser)]
#[command(
    name = "pbsm",
    version,
    about = "Parallel partition-based spatial merge join"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Join two MBR files and report the result count and phase timings.
    Join(JoinArgs),
    /// Sweep configurations and emit one CSV row per configuration and repetition.
    Bench(BenchArgs),
    /// Print dataset statistics and the recommended configuration.
    Tune(TuneArgs),
    /// Write a synthetic MBR dataset.
    Generate(GenerateArgs),
}

#[derive(Args)]
struct Inputs {
    /// Left input (CSV or SJB1 binary).
    #[arg(long)]
    left: PathBuf,
    /// Right input (CSV or SJB1 binary).
    #[arg(long)]
    right: PathBuf,
    /// Point-distance mode: join record centers within this Euclidean distance.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Axis split by 1D stripes.
    #[arg(long, value_enum, default_value_t = AxisArg::X)]
    partition_axis: AxisArg,
}

#[derive(Args)]
struct JoinArgs {
    #[command(flatten)]
    inputs: Inputs,
    #[arg(long, value_enum, default_value_t = LayoutArg::OneD)]
    layout: LayoutArg,
    /// Partitions per dimension, or `auto` for the extent rule.
    #[arg(long, default_value = "auto", value_parser = parse_k)]
    k: KArg,
    /// Sweep axis policy; `auto` sweeps along 1D stripes.
    #[arg(long, value_enum)]
    axis: Option<PolicyArg>,
    #[arg(long, default_value_t = default_threads())]
    threads: usize,
    /// Materialize result pairs and print them after the report.
    #[arg(long)]
    collect: bool,
    /// Check the result against the nested-loop oracle (inputs up to 100000 records).
    #[arg(long)]
    verify: bool,
    #[arg(long, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Drop one result before verification, to exercise the failure path.
    #[arg(long, hide = true)]
    fault_drop_result: bool,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    inputs: Inputs,
    /// Comma-separated K values; `auto` is allowed.
    #[arg(long, value_delimiter = ',', value_parser = parse_k, default_value = "auto")]
    k_list: Vec<KArg>,
    #[arg(long, value_delimiter = ',', value_enum, default_value = "1d")]
    layout_list: Vec<LayoutArg>,
    /// Comma-separated axis policies; `auto` is skipped for 2D layouts.
    #[arg(long, value_delimiter = ',', value_enum)]
    axis_list: Option<Vec<PolicyArg>>,
    #[arg(long, value_delimiter = ',', default_value = "1")]
    threads_list: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    reps: usize,
}

#[derive(Args)]
struct TuneArgs {
    #[arg(long)]
    left: PathBuf,
    /// Required unless `--stats-only` is given.
    #[arg(long)]
    right: Option<PathBuf>,
    /// Only print per-file statistics as CSV.
    #[arg(long)]
    stats_only: bool,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    n: usize,
    /// Mean side length (both axes unless `--extent-y` is given).
    #[arg(long, default_value_t = 0.001)]
    extent: f64,
    #[arg(long)]
    extent_y: Option<f64>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    first_id: u64,
    /// Number of Gaussian clusters; uniform when unset.
    #[arg(long)]
    clusters: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    sigma: f64,
    /// Write the SJB1 binary format instead of CSV.
    #[arg(long)]
    binary: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LayoutArg {
    #[value(name = "1d")]
    OneD,
    #[value(name = "2d")]
    TwoD,
}

impl LayoutArg {
    fn name(self) -> &'static str {
        match self {
            LayoutArg::OneD => "1d",
            LayoutArg::TwoD => "2d",
        }
    }

    fn kind(self) -> LayoutKind {
        match self {
            LayoutArg::OneD => LayoutKind::Stripes1D,
            LayoutArg::TwoD => LayoutKind::Grid2D,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum AxisArg {
    X,
    Y,
}

impl From<AxisArg> for Axis {
    fn from(a: AxisArg) -> Axis {
        match a {
            AxisArg::X => Axis::X,
            AxisArg::Y => Axis::Y,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PolicyArg {
    X,
    Y,
    Adaptive,
    Auto,
}

impl PolicyArg {
    fn name(self) -> &'static str {
        match self {
            PolicyArg::X => "x",
            PolicyArg::Y => "y",
            PolicyArg::Adaptive => "adaptive",
            PolicyArg::Auto => "auto",
        }
    }

    fn policy(self) -> AxisPolicy {
        match self {
            PolicyArg::X => AxisPolicy::ForcedX,
            PolicyArg::Y => AxisPolicy::ForcedY,
            PolicyArg::Adaptive => AxisPolicy::Adaptive,
            PolicyArg::Auto => AxisPolicy::Auto1D,
        }
    }

    fn default_for(layout: LayoutArg) -> PolicyArg {
        match layout {
            LayoutArg::OneD => PolicyArg::Auto,
            LayoutArg::TwoD => PolicyArg::Adaptive,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum KArg {
    Auto,
    Fixed(usize),
}

fn parse_k(s: &str) -> Result<KArg, String> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(KArg::Auto);
    }
    match s.parse::<usize>() {
        Ok(0) | Err(_) => Err(format!("expected a positive integer or `auto`, got `{s}`")),
        Ok(k) => Ok(KArg::Fixed(k)),
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Csv,
}

fn default_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Join(args) => cmd_join(&args),
        Command::Bench(args) => cmd_bench(&args),
        Command::Tune(args) => cmd_tune(&args),
        Command::Generate(args) => cmd_generate(&args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

// ---------------------------------------------------------------------------
// Workloads

/// Both inputs in a shared unit-square frame.
enum Workload {
    Rects {
        r: Vec<Rect>,
        s: Vec<Rect>,
    },
    /// `epsilon` is rescaled into the normalized frame.
    Points {
        p: Vec<Point>,
        q: Vec<Point>,
        epsilon: f64,
    },
}

impl Workload {
    fn load(inputs: &Inputs) -> Result<Self> {
        let (left, right) = std::thread::scope(|scope| {
            let left = scope.spawn(|| load(&inputs.left));
            let right = load(&inputs.right);
            (left.join().expect("loader thread panicked"), right)
        });
        let (left, right) = (left?, right?);
        match inputs.epsilon {
            None => {
                let (r, s) =
                    normalize_pair(&left.rects, &right.rects).context("normalizing inputs")?;
                Ok(Workload::Rects { r, s })
            }
            Some(eps) => {
                ensure!(
                    eps > 0.0 && eps.is_finite(),
                    "--epsilon must be positive, got {eps}"
                );
                let (p, q, epsilon) = normalize_points(&left.rects, &right.rects, eps)?;
                Ok(Workload::Points { p, q, epsilon })
            }
        }
    }

    fn sizes(&self) -> (usize, usize) {
        match self {
            Workload::Rects { r, s } => (r.len(), s.len()),
            Workload::Points { p, q, .. } => (p.len(), q.len()),
        }
    }

    /// Average extent driving `--k auto`: the square side in point mode.
    fn avg_extent(&self, layout: LayoutArg, split: Axis) -> f64 {
        match self {
            Workload::Points { epsilon, .. } => *epsilon,
            Workload::Rects { r, s } => {
                let (sr, ss) = (DatasetStats::compute(r), DatasetStats::compute(s));
                match layout {
                    LayoutArg::OneD => tune::combined_extent(&sr, &ss, split),
                    LayoutArg::TwoD => {
                        0.5 * (tune::combined_extent(&sr, &ss, Axis::X)
                            + tune::combined_extent(&sr, &ss, Axis::Y))
                    }
                }
            }
        }
    }

    fn resolve_k(&self, k: KArg, layout: LayoutArg, split: Axis) -> usize {
        match k {
            KArg::Fixed(k) => k,
            // Zero extents (points) fall into the cap region.
            KArg::Auto => {
                recommend_k(self.avg_extent(layout, split), layout.kind()).unwrap_or(DEFAULT_K_MAX)
            }
        }
    }

    fn run(&self, cfg: &JoinConfig) -> Result<JoinReport> {
        Ok(match self {
            Workload::Rects { r, s } => join(r, s, cfg)?,
            Workload::Points { p, q, epsilon } => epsilon_distance_join(p, q, *epsilon, cfg)?,
        })
    }

    fn oracle(&self) -> std::collections::BTreeSet<(u64, u64)> {
        match self {
            Workload::Rects { r, s } => nested_loop_join(r, s),
            Workload::Points { p, q, epsilon } => nested_loop_distance(p, q, *epsilon),
        }
    }
}

fn load(path: &Path) -> Result<Dataset> {
    dataset::load_dataset(path).with_context(|| format!("loading {}", path.display()))
}

/// Record centers as points. Data outside the unit square is scaled by one
/// factor on both axes so distances stay Euclidean; `eps` scales with it.
fn normalize_points(
    left: &[Rect],
    right: &[Rect],
    eps: f64,
) -> Result<(Vec<Point>, Vec<Point>, f64)> {
    let (p, q) = (rects_to_points(left), rects_to_points(right));
    let as_rects = |pts: &[Point]| {
        pts.iter()
            .map(|pt| Rect::point(pt.id, pt.x, pt.y))
            .collect::<Vec<_>>()
    };
    let (pr, qr) = (as_rects(&p), as_rects(&q));
    let union = match (BoundingBox::of(&pr), BoundingBox::of(&qr)) {
        (Some(a), Some(b)) => a.union(&b),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => return Ok((p, q, eps)),
    };
    if union.within_unit() {
        return Ok((p, q, eps));
    }
    let side = union.width().max(union.height());
    ensure!(
        side > 0.0,
        "cannot normalize: all points coincide outside the unit square"
    );
    let frame = BoundingBox {
        x_lo: union.x_lo,
        y_lo: union.y_lo,
        x_hi: union.x_lo + side,
        y_hi: union.y_lo + side,
    };
    let to_points = |rects: Vec<Rect>| {
        rects
            .into_iter()
            .map(|r| Point::new(r.id, r.x_lo, r.y_lo))
            .collect()
    };
    Ok((
        to_points(normalize(&pr, Some(frame))?),
        to_points(normalize(&qr, Some(frame))?),
        eps / side,
    ))
}

fn build_config(
    layout: LayoutArg,
    k: usize,
    split: Axis,
    policy: PolicyArg,
    threads: usize,
) -> Result<JoinConfig> {
    if layout == LayoutArg::TwoD && policy == PolicyArg::Auto {
        bail!("--axis auto applies to 1D stripes only; use --axis adaptive with --layout 2d");
    }
    ensure!(threads >= 1, "--threads must be at least 1");
    let part = match layout {
        LayoutArg::OneD => PartitionLayout::stripes(split, k)?,
        LayoutArg::TwoD => PartitionLayout::grid(k)?,
    };
    Ok(JoinConfig::new(part)
        .with_axis_policy(policy.policy())
        .with_threads(threads))
}

fn secs(d: std::time::Duration) -> String {
    format!("{:.6}", d.as_secs_f64())
}

// ---------------------------------------------------------------------------
// Commands

fn cmd_join(args: &JoinArgs) -> Result<()> {
    let policy = args.axis.unwrap_or(PolicyArg::default_for(args.layout));
    let split = Axis::from(args.inputs.partition_axis);
    // Reject bad flag combinations before touching the inputs.
    build_config(args.layout, 1, split, policy, args.threads)?;
    let workload = Workload::load(&args.inputs)?;
    let (nl, nr) = workload.sizes();
    if args.verify {
        ensure!(
            nl <= VERIFY_LIMIT && nr <= VERIFY_LIMIT,
            "--verify is limited to {VERIFY_LIMIT} records per input (got {nl} and {nr})"
        );
    }
    let k = workload.resolve_k(args.k, args.layout, split);
    let mut cfg = build_config(args.layout, k, split, policy, args.threads)?;
    if args.collect || args.verify {
        cfg = cfg.collecting();
    }
    let mut report = workload.run(&cfg)?;
    if args.fault_drop_result {
        drop_one_result(&mut report);
    }

    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    match args.format {
        Format::Text => {
            writeln!(
                out,
                "layout={} k={k} axis={} threads={}",
                args.layout.name(),
                policy.name(),
                args.threads
            )?;
            writeln!(out, "result_count={}", report.result_count)?;
            writeln!(out, "partition_s={}", secs(report.partition_time))?;
            writeln!(out, "sort_s={}", secs(report.sort_time))?;
            writeln!(out, "join_s={}", secs(report.join_time))?;
            writeln!(out, "total_s={}", secs(report.total_time))?;
            writeln!(
                out,
                "tiles_swept_x={} tiles_swept_y={}",
                report.axis_choices.x, report.axis_choices.y
            )?;
        }
        Format::Csv => {
            writeln!(out, "{BENCH_HEADER}")?;
            write_row(&mut out, args.layout, k, policy, args.threads, 1, &report)?;
        }
    }

    if args.verify {
        let expected = workload.oracle();
        let pairs = report.pairs.as_deref().unwrap_or_default();
        let got: std::collections::BTreeSet<_> = pairs.iter().copied().collect();
        let ok = got == expected
            && pairs.len() == expected.len()
            && report.result_count == expected.len() as u64;
        match args.format {
            Format::Text => writeln!(out, "verify={}", if ok { "ok" } else { "MISMATCH" })?,
            Format::Csv => {}
        }
        out.flush()?;
        if !ok {
            bail!(
                "verification failed: engine reported {} pairs ({} distinct), oracle {}",
                pairs.len(),
                got.len(),
                expected.len()
            );
        }
    }
    if args.collect {
        if let Some(pairs) = &report.pairs {
            let mut sorted = pairs.clone();
            sorted.sort_unstable();
            writeln!(out, "left_id,right_id")?;
            for (a, b) in sorted {
                writeln!(out, "{a},{b}")?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn drop_one_result(report: &mut JoinReport) {
    if let Some(pairs) = report.pairs.as_mut() {
        pairs.pop();
    }
    report.result_count = report.result_count.saturating_sub(1);
}

fn write_row(
    out: &mut impl Write,
    layout: LayoutArg,
    k: usize,
    policy: PolicyArg,
    threads: usize,
    rep: usize,
    report: &JoinReport,
) -> io::Result<()> {
    writeln!(
        out,
        "{},{k},{},{threads},{rep},{},{},{},{}",
        layout.name(),
        policy.name(),
        secs(report.partition_time),
        secs(report.join_time),
        secs(report.total_time),
        report.result_count
    )
}

fn cmd_bench(args: &BenchArgs) -> Result<()> {
    ensure!(args.reps >= 1, "--reps must be at least 1");
    ensure!(!args.k_list.is_empty(), "--k-list must not be empty");
    ensure!(
        !args.layout_list.is_empty(),
        "--layout-list must not be empty"
    );
    ensure!(
        !args.threads_list.is_empty(),
        "--threads-list must not be empty"
    );
    let split = Axis::from(args.inputs.partition_axis);
    let workload = Workload::load(&args.inputs)?;

    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    writeln!(out, "{BENCH_HEADER}")?;
    let mut reference: Option<u64> = None;
    for &layout in &args.layout_list {
        let policies = match &args.axis_list {
            Some(list) => list.clone(),
            None => vec![PolicyArg::default_for(layout)],
        };
        for &policy in &policies {
            if layout == LayoutArg::TwoD && policy == PolicyArg::Auto {
                eprintln!("note: skipping axis=auto for layout=2d (1D only)");
                continue;
            }
            for &k_arg in &args.k_list {
                let k = workload.resolve_k(k_arg, layout, split);
                for &threads in &args.threads_list {
                    let cfg = build_config(layout, k, split, policy, threads)?;
                    for rep in 1..=args.reps {
                        let report = workload.run(&cfg)?;
                        write_row(&mut out, layout, k, policy, threads, rep, &report)?;
                        match reference {
                            None => reference = Some(report.result_count),
                            Some(c) if c != report.result_count => {
                                out.flush()?;
                                bail!(
                                    "result_count {} for layout={} k={k} axis={} threads={threads} \
                                     differs from earlier rows ({c})",
                                    report.result_count,
                                    layout.name(),
                                    policy.name()
                                );
                            }
                            Some(_) => {}
                        }
                    }
                }
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn cmd_tune(args: &TuneArgs) -> Result<()> {
    let stdout = io::stdout();
    let mut out = BufWriter::new(stdout.lock());
    if args.stats_only {
        writeln!(out, "dataset,cardinality,avg_x_extent,avg_y_extent")?;
        for path in std::iter::once(&args.left).chain(&args.right) {
            let ds = load(path)?;
            writeln!(
                out,
                "{},{},{:e},{:e}",
                path.display(),
                ds.stats.cardinality,
                ds.stats.avg_x_extent,
                ds.stats.avg_y_extent
            )?;
        }
        out.flush()?;
        return Ok(());
    }
    let Some(right) = &args.right else {
        bail!("--right is required unless --stats-only is given");
    };
    let (left_ds, right_ds) = (load(&args.left)?, load(right)?);
    for (label, path, ds) in [("left", &args.left, &left_ds), ("right", right, &right_ds)] {
        let st = &ds.stats;
        writeln!(
            out,
            "{label}: {} cardinality={} avg_x_extent={:e} avg_y_extent={:e}",
            path.display(),
            st.cardinality,
            st.avg_x_extent,
            st.avg_y_extent
        )?;
    }
    let rec = tune::recommend(&left_ds.stats, &right_ds.stats);
    writeln!(out, "recommended layout=1d")?;
    writeln!(
        out,
        "recommended partition_axis={}",
        rec.layout.partition_axis()
    )?;
    writeln!(out, "recommended k={}", rec.k())?;
    writeln!(
        out,
        "recommended axis=auto (sweep along {})",
        rec.sweep_axis
    )?;
    writeln!(out, "avg_extent={:e}", rec.avg_extent)?;
    if let Some(w) = &rec.warning {
        writeln!(out, "warning: {w}")?;
    }
    out.flush()?;
    Ok(())
}

fn cmd_generate(args: &GenerateArgs) -> Result<()> {
    let mut spec = SyntheticSpec::uniform(args.n, args.extent, args.seed)
        .with_extents(args.extent, args.extent_y.unwrap_or(args.extent))
        .with_first_id(args.first_id);
    if let Some(clusters) = args.clusters {
        ensure!(clusters >= 1, "--clusters must be at least 1");
        spec.distribution = SpatialDistribution::Clustered {
            clusters,
            sigma: args.sigma,
        };
    }
    let rects = generate_synthetic(&spec);
    if args.binary {
        dataset::write_mbr_binary(&args.out, &rects)?;
    } else {
        dataset::write_mbr_csv(&args.out, &rects)?;
    }
    eprintln!("wrote {} rectangles to {}", rects.len(), args.out.display());
    Ok(())
}
