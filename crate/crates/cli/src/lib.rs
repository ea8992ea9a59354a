//! Command-line driver for `xorchaos`.
//!
//! Exit codes: 0 on success, 1 when `--strict` and a reproduction
//! (`table`, `example1`, `example2`, `props`) does not match its fixtures,
//! 2 on usage, parse or runtime errors.

use std::io::Write;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use xorchaos::branches::{full_branch_decomposition, BranchDecomposition};
use xorchaos::config::{OutputFormat, RunConfig};
use xorchaos::diagnostics::{
    basin_map, diagnose, find_fixed_points_with, invariant_histogram, iterate_orbit, seed_points,
    Stability,
};
use xorchaos::exec::Execution;
use xorchaos::experiments::{
    expected_verdict, run_example1, run_example2, run_prop_suite, run_xor_table,
};
use xorchaos::map::{catalog, parse_map_expr, MapExpr};
use xorchaos::pa::to_piecewise_affine;
use xorchaos::plot::{graph_series, render_plot, Overlay, PlotData, PlotKind, PlotSpec};
use xorchaos::report::{report_stem, write_atomic, write_report, Report};

pub const EXIT_OK: i32 = 0;
pub const EXIT_MISMATCH: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "xorchaos",
    version,
    about = "Fuzzy-XOR combinations of interval maps and chaos diagnostics"
)]
struct Cli {
    #[command(flatten)]
    flags: Flags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Flags {
    /// Base seed of the run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of orbit seeds.
    #[arg(long, global = true)]
    seeds: Option<usize>,
    /// Post-transient iterates per seed.
    #[arg(long, global = true)]
    iters: Option<usize>,
    #[arg(long, global = true)]
    transient: Option<usize>,
    /// Histogram and coverage bins.
    #[arg(long, global = true)]
    bins: Option<usize>,
    /// Grid size for root scans and basins.
    #[arg(long, global = true)]
    grid: Option<usize>,
    /// Logistic parameter for `table` and `example1`.
    #[arg(long, global = true)]
    r: Option<f64>,
    /// Exit with status 1 when a reproduction does not match.
    #[arg(long, global = true)]
    strict: bool,
    /// Output directory for reports and plots.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Report formats (repeatable).
    #[arg(long = "format", global = true, value_parser = parse_format)]
    formats: Vec<OutputFormat>,
    /// Worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Run every computation on the calling thread.
    #[arg(long, global = true)]
    sequential: bool,
    #[arg(long, global = true)]
    lyapunov_chaotic: Option<f64>,
    #[arg(long, global = true)]
    lyapunov_nonchaotic: Option<f64>,
    #[arg(long, global = true)]
    coverage_min: Option<f64>,
    #[arg(long, global = true)]
    basin_min: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List the catalog maps.
    Catalog,
    /// Evaluate an expression at a point.
    Eval { expr: String, x: f64 },
    /// Print the canonical form, or the piecewise-affine form with --emit-pa.
    Combine {
        expr: String,
        #[arg(long)]
        emit_pa: bool,
    },
    /// Monotone and full-branch decomposition.
    Branches {
        expr: String,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
    },
    /// Full diagnostics report and verdict.
    Diagnose { expr: String },
    /// Periodic points of the given period.
    FixedPoints {
        expr: String,
        #[arg(long, default_value_t = 1)]
        period: usize,
    },
    /// Basin fractions of the given targets (default: stable fixed points).
    Basin {
        expr: String,
        #[arg(long = "target")]
        targets: Vec<f64>,
        #[arg(long, default_value_t = 10_000)]
        max_iter: usize,
        #[arg(long, default_value_t = 1e-6)]
        tol: f64,
    },
    /// Pairwise XOR verdicts over the catalog.
    Table,
    /// Fixed points, zero set and basins of xor(logistic(r), tent).
    Example1,
    /// Chaos checks for xor(tent, inverted_tent).
    Example2,
    /// Branch doubling and chaos of xor(f, mirror(f)).
    Props,
    /// Plot `KIND:EXPR` with KIND one of graph, cobweb, histogram, basin.
    Plot {
        spec: String,
        #[arg(long, default_value_t = 512)]
        resolution: usize,
        /// diagonal or half (repeatable).
        #[arg(long = "overlay", value_parser = parse_overlay)]
        overlays: Vec<Overlay>,
        /// Cobweb starting point.
        #[arg(long, default_value_t = 0.7)]
        x0: f64,
        /// Cobweb steps.
        #[arg(long, default_value_t = 50)]
        steps: usize,
    },
}

fn parse_format(s: &str) -> Result<OutputFormat, String> {
    match s {
        "json" => Ok(OutputFormat::Json),
        "csv" => Ok(OutputFormat::Csv),
        "svg" => Ok(OutputFormat::Svg),
        other => Err(format!("unknown format `{other}` (json, csv, svg)")),
    }
}

fn parse_overlay(s: &str) -> Result<Overlay, String> {
    s.parse()
}

/// An error to be reported as a usage problem.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn parse_expr(text: &str) -> Result<MapExpr> {
    parse_map_expr(text).map_err(|e| {
        let caret = format!("{}^", " ".repeat(e.offset));
        anyhow!(Usage(format!("{e}\n  {text}\n  {caret}")))
    })
}

impl Flags {
    fn config(&self) -> Result<RunConfig> {
        let mut c = RunConfig::default();
        if let Some(v) = self.seed {
            c.base_seed = v;
        }
        if let Some(v) = self.seeds {
            c.seeds = v;
        }
        if let Some(v) = self.iters {
            c.iterates = v;
        }
        if let Some(v) = self.transient {
            c.transient = v;
        }
        if let Some(v) = self.bins {
            c.bins = v;
        }
        if let Some(v) = self.grid {
            c.grid_n = v;
        }
        let t = &mut c.thresholds;
        if let Some(v) = self.lyapunov_chaotic {
            t.lyapunov_chaotic = v;
        }
        if let Some(v) = self.lyapunov_nonchaotic {
            t.lyapunov_nonchaotic = v;
        }
        if let Some(v) = self.coverage_min {
            t.coverage_min = v;
        }
        if let Some(v) = self.basin_min {
            t.basin_min = v;
        }
        if let Some(dir) = &self.out {
            c.output_dir = dir.clone();
        }
        if !self.formats.is_empty() {
            c.formats = self.formats.clone();
        }
        if self.sequential {
            c.execution = Execution::Sequential;
        }
        c.validate().map_err(|e| anyhow!(Usage(e)))?;
        Ok(c)
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the exit code. Output goes to `out`, diagnostics to `err`.
pub fn run_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if code == EXIT_OK {
                write!(out, "{e}")
            } else {
                write!(err, "{e}")
            };
            return code;
        }
    };
    let mut buffer = Vec::new();
    let result = match cli.flags.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .context("building thread pool")
            .and_then(|pool| pool.install(|| dispatch(&cli, &mut buffer))),
        None => dispatch(&cli, &mut buffer),
    };
    let _ = out.write_all(&buffer);
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_USAGE
        }
    }
}

pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(argv, &mut stdout.lock(), &mut stderr.lock())
}

fn strict_code(strict: bool, pass: bool) -> i32 {
    if strict && !pass {
        EXIT_MISMATCH
    } else {
        EXIT_OK
    }
}

fn print_paths(out: &mut dyn Write, paths: &[PathBuf]) -> Result<()> {
    for p in paths {
        writeln!(out, "wrote {}", p.display())?;
    }
    Ok(())
}

fn print_branches(out: &mut dyn Write, d: &BranchDecomposition) -> Result<()> {
    writeln!(out, "{d}")?;
    for b in &d.branches {
        writeln!(
            out,
            "  [{}, {}] {:?} image [{}, {}]{}",
            b.interval.lo,
            b.interval.hi,
            b.monotonicity,
            b.image.lo,
            b.image.hi,
            if b.is_full { " full" } else { "" }
        )?;
    }
    if let Some(cuts) = &d.exact_cuts {
        let cuts: Vec<String> = cuts.iter().map(|c| c.to_string()).collect();
        writeln!(out, "  exact cuts {}", cuts.join(" "))?;
    }
    Ok(())
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<i32> {
    let flags = &cli.flags;
    let config = flags.config()?;
    match &cli.command {
        Command::Catalog => {
            for e in catalog() {
                let params: Vec<String> = e
                    .params
                    .iter()
                    .map(|p| {
                        let open = if p.lo_open { "(" } else { "[" };
                        format!("{}∈{open}{},{}] default {}", p.name, p.lo, p.hi, p.default)
                    })
                    .collect();
                writeln!(
                    out,
                    "{:<14} {:<22} full branches {}{}{}",
                    e.id.name(),
                    e.formula,
                    e.full_branches,
                    if e.exact_affine {
                        ", piecewise affine"
                    } else {
                        ""
                    },
                    if params.is_empty() {
                        String::new()
                    } else {
                        format!(", {}", params.join(", "))
                    }
                )?;
            }
        }
        Command::Eval { expr, x } => {
            let m = parse_expr(expr)?;
            writeln!(out, "{}", m.eval(*x)?)?;
        }
        Command::Combine { expr, emit_pa } => {
            let m = parse_expr(expr)?;
            if *emit_pa {
                let pa = to_piecewise_affine(&m).map_err(|e| {
                    anyhow!(Usage(format!("{m} has no piecewise-affine form: {e}")))
                })?;
                writeln!(out, "{}", serde_json::to_string_pretty(&pa.to_json())?)?;
            } else {
                writeln!(out, "{m}")?;
            }
        }
        Command::Branches { expr, tol } => {
            let m = parse_expr(expr)?;
            print_branches(out, &full_branch_decomposition(&m, *tol)?)?;
        }
        Command::Diagnose { expr } => {
            let m = parse_expr(expr)?;
            let mut report = diagnose(&m, &config)?;
            report.fixtures_match = expected_verdict(&m).map(|e| e.expected == report.verdict);
            writeln!(out, "{}: {}", report.expression, report.verdict)?;
            writeln!(
                out,
                "lyapunov median {:.6} (iqr {:.2e}), coverage {:.4}, sensitivity {:.3}",
                report.lyapunov.median,
                report.lyapunov.iqr,
                report.coverage,
                report.lyapunov.sensitivity
            )?;
            let stable = report.fixed_points.stable().count();
            writeln!(
                out,
                "{} periodic points up to period {}, {stable} stable",
                report.fixed_points.points.len(),
                report.fixed_points.max_period
            )?;
            print_paths(
                out,
                &write_report(&Report::Diagnostics(&report), "diagnose", &config)?,
            )?;
        }
        Command::FixedPoints { expr, period } => {
            let m = parse_expr(expr)?;
            let scan = find_fixed_points_with(
                &m,
                config.grid_n.max(1_000),
                *period,
                config.thresholds.stability_band,
                config.execution,
            )?;
            for p in &scan.points {
                writeln!(
                    out,
                    "{:.12} multiplier {:.9} {:?} period {}",
                    p.location, p.multiplier, p.stability, p.period
                )?;
            }
            if scan.truncated {
                writeln!(out, "truncated at {} roots", scan.points.len())?;
            }
        }
        Command::Basin {
            expr,
            targets,
            max_iter,
            tol,
        } => {
            let m = parse_expr(expr)?;
            let targets = if targets.is_empty() {
                let scan = find_fixed_points_with(
                    &m,
                    config.grid_n.max(1_000),
                    1,
                    config.thresholds.stability_band,
                    config.execution,
                )?;
                let stable: Vec<f64> = scan
                    .points
                    .iter()
                    .filter(|p| p.stability == Stability::Stable)
                    .map(|p| p.location)
                    .collect();
                if stable.is_empty() {
                    bail!(Usage("no stable fixed point found; pass --target".into()));
                }
                stable
            } else {
                targets.clone()
            };
            let b = basin_map(&m, &targets, config.grid_n, *max_iter, *tol)?;
            for (t, f) in targets.iter().zip(&b.fractions) {
                writeln!(out, "{t:.12} {f:.6}")?;
            }
            writeln!(out, "unresolved {:.6}", b.unresolved)?;
        }
        Command::Table => {
            let matrix = run_xor_table(flags.r.unwrap_or(4.0), &config)?;
            write!(out, "{matrix}")?;
            print_paths(
                out,
                &write_report(&Report::Table(&matrix), "table", &config)?,
            )?;
            return Ok(strict_code(flags.strict, matrix.accepted()));
        }
        Command::Example1 => {
            let report = run_example1(flags.r.unwrap_or(3.9), &config)?;
            writeln!(out, "{report}")?;
            print_paths(
                out,
                &write_report(&Report::Example(&report), "example1", &config)?,
            )?;
            return Ok(strict_code(flags.strict, report.pass));
        }
        Command::Example2 => {
            let report = run_example2(&config)?;
            writeln!(out, "{report}")?;
            print_paths(
                out,
                &write_report(&Report::Example(&report), "example2", &config)?,
            )?;
            return Ok(strict_code(flags.strict, report.pass));
        }
        Command::Props => {
            let report = run_prop_suite(&config)?;
            writeln!(out, "{report}")?;
            print_paths(
                out,
                &write_report(&Report::Example(&report), "props", &config)?,
            )?;
            return Ok(strict_code(flags.strict, report.pass));
        }
        Command::Plot {
            spec,
            resolution,
            overlays,
            x0,
            steps,
        } => {
            let (kind_name, text) = spec
                .split_once(':')
                .ok_or_else(|| anyhow!(Usage(format!("plot spec `{spec}` is not KIND:EXPR"))))?;
            let kind: PlotKind = kind_name.parse().map_err(|e: String| anyhow!(Usage(e)))?;
            if *resolution < PlotSpec::MIN_RESOLUTION {
                bail!(Usage(format!(
                    "resolution must be at least {}",
                    PlotSpec::MIN_RESOLUTION
                )));
            }
            let m = parse_expr(text)?;
            let data = match kind {
                PlotKind::Graph => PlotData::Graph(graph_series(&m, *resolution)?),
                PlotKind::Cobweb => PlotData::Cobweb {
                    graph: graph_series(&m, *resolution)?,
                    orbit: iterate_orbit(&m, *x0, steps + 1, 0)?.points,
                },
                PlotKind::Histogram => PlotData::Histogram(invariant_histogram(
                    &m,
                    &seed_points(config.base_seed, config.seeds),
                    config.iterates,
                    config.bins,
                )?),
                PlotKind::Basin => {
                    let scan = find_fixed_points_with(
                        &m,
                        config.grid_n.max(1_000),
                        1,
                        config.thresholds.stability_band,
                        config.execution,
                    )?;
                    let stable: Vec<f64> = scan
                        .points
                        .iter()
                        .filter(|p| p.stability == Stability::Stable)
                        .map(|p| p.location)
                        .collect();
                    if stable.is_empty() {
                        PlotData::Basin(vec![None; *resolution])
                    } else {
                        let b = basin_map(
                            &m,
                            &stable,
                            *resolution,
                            config.basin_iterations,
                            config.basin_tolerance,
                        )?;
                        PlotData::Basin(b.classification)
                    }
                }
            };
            let plot = PlotSpec {
                kind,
                expression: m.to_string(),
                resolution: *resolution,
                overlays: overlays.clone(),
            };
            let svg = render_plot(&plot, &data);
            let stem = report_stem(
                &format!("plot-{kind_name}"),
                &plot.expression,
                config.base_seed,
            );
            let path = config.output_dir.join(format!("{stem}.svg"));
            write_atomic(&path, svg.as_bytes())?;
            print_paths(out, &[path])?;
        }
    }
    Ok(EXIT_OK)
}
