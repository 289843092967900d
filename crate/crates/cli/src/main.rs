//! `kchol` command-line tool.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand_distr::{Distribution, StandardNormal};

use kchol::geometry::{gen_deformed_manifold, gen_grid, gen_line, gen_uniform, BoundaryPolicy, PointCloud};
use kchol::ichol::{factor_kernel_with_h, FactorMode};
use kchol::io::{self, PlanSection};
use kchol::kernels::{dense_kernel_matrix, KernelSpec};
use kchol::linalg::{pca_approx, pca_approx_against, FactorOperator, Meaning};
use kchol::metrics::{default_samples, exact_frobenius_error, sampled_frobenius_error, ReportRow, CSV_HEADER, DEFAULT_REPS};
use kchol::ordering::{maximin_fast, maximin_naive_with_cap, DEFAULT_ORACLE_CAP};
use kchol::supernodal::{build_supernodal, DEFAULT_H};
use kchol::Error;

mod csvio;

const EXIT_USAGE: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_NUMERIC: u8 = 4;

/// A failure with the exit code it maps to.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(msg: impl Into<String>) -> Self {
        Failure { code: EXIT_USAGE, message: msg.into() }
    }

    fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        Failure { code: EXIT_IO, message: format!("{}: {e}", path.display()) }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Io(_) | Error::Format(_) | Error::NonFinite { .. } | Error::DuplicatePoint { .. } => EXIT_IO,
            Error::InvalidParameter(_)
            | Error::InvalidDimension(_)
            | Error::EmptyCloud
            | Error::Boundary(_)
            | Error::OracleCapExceeded { .. }
            | Error::IndexOutOfRange { .. }
            | Error::NoInteriorPoints => EXIT_USAGE,
            _ => EXIT_NUMERIC,
        };
        Failure { code, message: e.to_string() }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

#[derive(Parser, Debug)]
#[command(name = "kchol", version, about = "Sparse Cholesky factors of kernel matrices from maximin orderings")]
struct Cli {
    /// Worker threads. Every stage is sequential, so values above 1 only
    /// print a notice.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    threads: u32,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a point cloud.
    Gen(GenArgs),
    /// Compute a maximin ordering and sparsity pattern.
    Order(OrderArgs),
    /// Order, assemble and factor a kernel matrix; prints one CSV row.
    Factor(FactorArgs),
    /// Solve (L L^T) x = b.
    Solve(VecArgs),
    /// Multiply by L L^T.
    Matvec(VecArgs),
    /// Print log det(L L^T).
    Logdet(LogdetArgs),
    /// Draw a Gaussian sample with covariance L L^T.
    Sample(SampleArgs),
    /// Residual of the leading-k-column approximation.
    Pca(PcaArgs),
    /// Relative Frobenius error of a factor against its kernel.
    Error(ErrorArgs),
    /// Sweep sizes, rho values and kernels; prints a CSV table.
    Bench(BenchArgs),
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum Shape {
    Uniform,
    Manifold,
    Grid,
    Line,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum PointFormat {
    Kpts,
    Csv,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum Boundary {
    None,
    Unitbox,
}

impl Boundary {
    fn policy(self) -> BoundaryPolicy {
        match self {
            Boundary::None => BoundaryPolicy::None,
            Boundary::Unitbox => BoundaryPolicy::UnitBox,
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq)]
enum Mode {
    Maximin,
    Supernodal,
}

impl From<Mode> for FactorMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Maximin => FactorMode::Maximin,
            Mode::Supernodal => FactorMode::Supernodal,
        }
    }
}

#[derive(Args, Debug)]
struct GenArgs {
    /// Number of points (for `grid`, a perfect d-th power).
    #[arg(long)]
    n: usize,
    /// Dimension (ignored by `manifold`, which is 3-D, and `line`).
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_enum, default_value_t = Shape::Uniform)]
    shape: Shape,
    /// Shorthand for `--shape manifold`.
    #[arg(long)]
    manifold: bool,
    /// Vertical amplitude of the deformed manifold.
    #[arg(long, default_value_t = 0.3)]
    dz: f64,
    /// Drop the small vertical noise of the manifold.
    #[arg(long)]
    no_noise: bool,
    /// Output format; defaults to CSV for `.csv` paths and KPTS otherwise.
    #[arg(long, value_enum)]
    format: Option<PointFormat>,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct PointsArgs {
    /// Point file (KPTS or CSV).
    #[arg(long)]
    points: PathBuf,
    #[arg(long, value_enum, default_value_t = Boundary::None)]
    boundary: Boundary,
}

#[derive(Args, Debug)]
struct OrderArgs {
    #[command(flatten)]
    points: PointsArgs,
    #[arg(long)]
    rho: f64,
    #[arg(long, value_enum, default_value_t = Mode::Maximin)]
    mode: Mode,
    /// Level ratio for the supernodal plan.
    #[arg(long, default_value_t = DEFAULT_H)]
    h: f64,
    /// Use the quadratic reference algorithm.
    #[arg(long)]
    naive: bool,
    /// Largest N accepted by `--naive`.
    #[arg(long, default_value_t = DEFAULT_ORACLE_CAP)]
    oracle_cap: usize,
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ErrorOpts {
    /// Sampled pairs per repetition; defaults to min(500000, N^2).
    #[arg(long)]
    samples: Option<usize>,
    /// Repetitions of the sampled error; 0 skips the error columns.
    #[arg(long, default_value_t = DEFAULT_REPS)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Debug)]
struct FactorArgs {
    #[command(flatten)]
    points: PointsArgs,
    /// Kernel, e.g. `matern:nu=1.0,l=0.2`, `cauchy:l=0.4,alpha=0.5,beta=0.025`, `exp:l=0.2`.
    #[arg(long)]
    kernel: String,
    #[arg(long, default_value_t = 0.0)]
    nugget: f64,
    #[arg(long)]
    rho: f64,
    #[arg(long, value_enum, default_value_t = Mode::Maximin)]
    mode: Mode,
    #[arg(long, default_value_t = DEFAULT_H)]
    h: f64,
    #[command(flatten)]
    error: ErrorOpts,
    /// Factor output (KCHL).
    #[arg(long, short)]
    out: PathBuf,
    /// Also write the ordering (KORD, with the plan in supernodal mode).
    #[arg(long)]
    order_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VecArgs {
    /// Factor file (KCHL).
    #[arg(long)]
    factor: PathBuf,
    /// Input vector (KVEC or one value per line), in original point order.
    #[arg(long)]
    input: PathBuf,
    /// Treat the factor as a reverse-ordered precision factor.
    #[arg(long)]
    precision: bool,
    #[arg(long, short)]
    out: PathBuf,
    /// Write text instead of KVEC.
    #[arg(long)]
    text: bool,
}

#[derive(Args, Debug)]
struct LogdetArgs {
    #[arg(long)]
    factor: PathBuf,
}

#[derive(Args, Debug)]
struct SampleArgs {
    #[arg(long)]
    factor: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long)]
    text: bool,
}

#[derive(Args, Debug)]
struct PcaArgs {
    #[arg(long)]
    factor: PathBuf,
    /// Ranks to evaluate.
    #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
    k: Vec<usize>,
    /// Measure against the dense kernel matrix of these points instead of
    /// the factor itself (needs `--kernel`).
    #[arg(long, requires = "kernel")]
    points: Option<PathBuf>,
    #[arg(long, requires = "points")]
    kernel: Option<String>,
    #[arg(long, default_value_t = 0.0)]
    nugget: f64,
}

#[derive(Args, Debug)]
struct ErrorArgs {
    #[arg(long)]
    factor: PathBuf,
    #[command(flatten)]
    points: PointsArgs,
    #[arg(long)]
    kernel: String,
    #[arg(long, default_value_t = 0.0)]
    nugget: f64,
    #[command(flatten)]
    error: ErrorOpts,
    /// Restrict sampled pairs to the interior box.
    #[arg(long)]
    interior: bool,
    /// Compute the error densely instead of sampling.
    #[arg(long, conflicts_with = "interior")]
    exact: bool,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Sizes.
    #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
    n: Vec<usize>,
    #[arg(long, num_args = 1.., value_delimiter = ',', required = true)]
    rho: Vec<f64>,
    /// Kernel strings; repeat the flag for several kernels.
    #[arg(long, required = true)]
    kernel: Vec<String>,
    #[arg(long, default_value_t = 0.0)]
    nugget: f64,
    #[arg(long, default_value_t = 2)]
    d: usize,
    /// Points on the deformed 3-D manifold instead of the unit cube.
    #[arg(long)]
    manifold: bool,
    #[arg(long, default_value_t = 0.3)]
    dz: f64,
    #[arg(long, value_enum, default_value_t = Mode::Maximin)]
    mode: Mode,
    #[arg(long, default_value_t = DEFAULT_H)]
    h: f64,
    #[command(flatten)]
    error: ErrorOpts,
    /// Write the table here instead of stdout.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if cli.threads > 1 {
        eprintln!("note: running single-threaded; --threads {} has no effect", cli.threads);
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cmd: Command) -> CliResult {
    match cmd {
        Command::Gen(a) => cmd_gen(a),
        Command::Order(a) => cmd_order(a),
        Command::Factor(a) => cmd_factor(a),
        Command::Solve(a) => cmd_vec(a, VecOp::Solve),
        Command::Matvec(a) => cmd_vec(a, VecOp::Matvec),
        Command::Logdet(a) => cmd_logdet(a),
        Command::Sample(a) => cmd_sample(a),
        Command::Pca(a) => cmd_pca(a),
        Command::Error(a) => cmd_error(a),
        Command::Bench(a) => cmd_bench(a),
    }
}

fn read_file(path: &Path) -> CliResult<Vec<u8>> {
    let mut buf = Vec::new();
    File::open(path).and_then(|mut f| f.read_to_end(&mut buf)).map_err(|e| Failure::io(path, e))?;
    Ok(buf)
}

/// Writes through a buffer; errors are tagged with the path.
fn write_file(path: &Path, body: impl FnOnce(&mut BufWriter<File>) -> kchol::Result<()>) -> CliResult {
    let file = File::create(path).map_err(|e| Failure::io(path, e))?;
    let mut w = BufWriter::new(file);
    body(&mut w).map_err(|e| Failure::io(path, e))?;
    w.flush().map_err(|e| Failure::io(path, e))
}

fn tag(path: &Path) -> impl Fn(Error) -> Failure + '_ {
    move |e| {
        let mut f = Failure::from(e);
        f.message = format!("{}: {}", path.display(), f.message);
        f
    }
}

fn load_points(args: &PointsArgs) -> CliResult<PointCloud> {
    let bytes = read_file(&args.points)?;
    if bytes.starts_with(io::POINTS_MAGIC) {
        io::read_points(&mut &bytes[..], args.boundary.policy()).map_err(tag(&args.points))
    } else {
        csvio::read_points(&bytes, args.boundary.policy()).map_err(tag(&args.points))
    }
}

fn load_factor(path: &Path) -> CliResult<kchol::ichol::SparseLowerFactor> {
    let bytes = read_file(path)?;
    io::read_factor(&mut &bytes[..]).map_err(tag(path))
}

fn load_vector(path: &Path) -> CliResult<Vec<f64>> {
    let bytes = read_file(path)?;
    io::read_vector_any(&bytes).map_err(tag(path))
}

fn save_vector(path: &Path, v: &[f64], text: bool) -> CliResult {
    write_file(path, |w| if text { io::write_vector_text(w, v) } else { io::write_vector(w, v) })
}

fn parse_kernel(s: &str, nugget: f64) -> CliResult<KernelSpec> {
    let spec: KernelSpec = s.parse().map_err(|e: Error| Failure::usage(format!("--kernel: {e}")))?;
    spec.with_nugget(nugget).map_err(|e| Failure::usage(format!("--nugget: {e}")))
}

fn warn_rho(rho: f64) {
    if rho < 2.0 {
        eprintln!("warning: rho = {rho} is below 2; the factor will be accurate only to a few digits");
    }
}

fn cmd_gen(a: GenArgs) -> CliResult {
    if a.n == 0 {
        return Err(Failure::usage("--n must be at least 1"));
    }
    let shape = if a.manifold { Shape::Manifold } else { a.shape };
    let cloud = match shape {
        Shape::Uniform => gen_uniform(a.n, a.d, a.seed)?,
        Shape::Manifold => gen_deformed_manifold(a.n, a.dz, a.seed, !a.no_noise)?,
        Shape::Line => gen_line(a.n)?,
        Shape::Grid => {
            let m = (a.n as f64).powf(1.0 / a.d.max(1) as f64).round() as usize;
            if a.d == 0 || m.checked_pow(a.d as u32) != Some(a.n) {
                return Err(Failure::usage(format!("--n {} is not a perfect power of d = {}", a.n, a.d)));
            }
            gen_grid(m, a.d)?
        }
    };
    let csv = match a.format {
        Some(f) => f == PointFormat::Csv,
        None => a.out.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")),
    };
    if csv {
        write_file(&a.out, |w| csvio::write_points(w, &cloud))
    } else {
        write_file(&a.out, |w| io::write_points(w, &cloud))
    }
}

fn cmd_order(a: OrderArgs) -> CliResult {
    let cloud = load_points(&a.points)?;
    warn_rho(a.rho);
    let result = if a.naive { maximin_naive_with_cap(&cloud, a.rho, a.oracle_cap)? } else { maximin_fast(&cloud, a.rho)? };
    let plan = match a.mode {
        Mode::Maximin => None,
        Mode::Supernodal => {
            let plan = build_supernodal(&result.ordering, &cloud, a.rho, a.h)?;
            Some(PlanSection::from_plan(&plan, &result.ordering))
        }
    };
    write_file(&a.out, |w| io::write_ordering(w, &result.ordering, &result.pattern, plan.as_ref()))?;
    println!("N,nnz,rho");
    println!("{},{},{}", cloud.len(), result.pattern.nnz(), a.rho);
    Ok(())
}

/// Factor plus optional sampled errors as a table row.
fn factor_row(
    cloud: &PointCloud,
    spec: &KernelSpec,
    kernel: &str,
    rho: f64,
    mode: Mode,
    h: f64,
    opts: &ErrorOpts,
) -> CliResult<(kchol::ichol::KernelFactorization, ReportRow)> {
    let out = factor_kernel_with_h(cloud, spec, rho, mode.into(), h)?;
    let f = &out.factor;
    let nan = kchol::metrics::ErrorReport { mean_e: f64::NAN, std_e: f64::NAN, m: 0, reps: 0, interior: false, seed: opts.seed };
    let (error, interior) = if opts.reps == 0 {
        (nan, None)
    } else {
        let m = opts.samples.unwrap_or_else(|| default_samples(cloud.len()));
        let e = sampled_frobenius_error(f, cloud, spec, m, opts.reps, opts.seed, false)?;
        let eb = match sampled_frobenius_error(f, cloud, spec, m, opts.reps, opts.seed, true) {
            Ok(r) => Some(r),
            Err(Error::NoInteriorPoints) => None,
            Err(e) => return Err(e.into()),
        };
        (e, eb)
    };
    if !f.is_full_rank() {
        eprintln!("warning: {} nonpositive pivot(s); factor rank {} of {}", f.zeroed_columns.len(), f.rank, f.n());
    }
    let row = ReportRow {
        n: cloud.len(),
        d: cloud.dim(),
        kernel: kernel.to_string(),
        rho,
        nnz: f.nnz(),
        rank: f.rank,
        timings: out.timings,
        error,
        interior,
    };
    Ok((out, row))
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().from_writer(w)
}

fn cmd_factor(a: FactorArgs) -> CliResult {
    let cloud = load_points(&a.points)?;
    let spec = parse_kernel(&a.kernel, a.nugget)?;
    warn_rho(a.rho);
    let (out, row) = factor_row(&cloud, &spec, &spec.to_string(), a.rho, a.mode, a.h, &a.error)?;
    write_file(&a.out, |w| io::write_factor(w, &out.factor))?;
    if let Some(path) = &a.order_out {
        let plan = out.plan.as_ref().map(|p| PlanSection::from_plan(p, &out.maximin.ordering));
        write_file(path, |w| io::write_ordering(w, &out.maximin.ordering, &out.maximin.pattern, plan.as_ref()))?;
    }
    let mut w = csv_writer(std::io::stdout().lock());
    let stdout_err = |e: csv::Error| Failure { code: EXIT_IO, message: format!("stdout: {e}") };
    w.write_record(CSV_HEADER).map_err(stdout_err)?;
    w.write_record(row.fields()).map_err(stdout_err)?;
    w.flush().map_err(|e| Failure { code: EXIT_IO, message: format!("stdout: {e}") })
}

enum VecOp {
    Solve,
    Matvec,
}

fn operator(factor: kchol::ichol::SparseLowerFactor, precision: bool) -> FactorOperator {
    FactorOperator::new(factor, if precision { Meaning::Precision } else { Meaning::Covariance })
}

fn cmd_vec(a: VecArgs, op: VecOp) -> CliResult {
    let f = operator(load_factor(&a.factor)?, a.precision);
    let v = load_vector(&a.input)?;
    if v.len() != f.n() {
        return Err(Failure {
            code: EXIT_NUMERIC,
            message: format!("{} has {} entries but the factor has N = {}", a.input.display(), v.len(), f.n()),
        });
    }
    let y = match op {
        VecOp::Solve => f.solve(&v)?,
        VecOp::Matvec => f.matvec(&v)?,
    };
    save_vector(&a.out, &y, a.text)
}

fn cmd_logdet(a: LogdetArgs) -> CliResult {
    let f = FactorOperator::covariance(load_factor(&a.factor)?);
    println!("{}", f.logdet()?);
    Ok(())
}

fn cmd_sample(a: SampleArgs) -> CliResult {
    let f = FactorOperator::covariance(load_factor(&a.factor)?);
    let mut rng = kchol::geometry::rng_from_seed(a.seed);
    let z: Vec<f64> = (0..f.n()).map(|_| StandardNormal.sample(&mut rng)).collect();
    if !f.factor().is_full_rank() {
        eprintln!("warning: factor has rank {} of {}; the sample covers that subspace", f.factor().rank, f.n());
    }
    save_vector(&a.out, &f.sample(&z)?, a.text)
}

fn cmd_pca(a: PcaArgs) -> CliResult {
    let f = load_factor(&a.factor)?;
    let theta = match (&a.points, &a.kernel) {
        (Some(p), Some(k)) => {
            let cloud = load_points(&PointsArgs { points: p.clone(), boundary: Boundary::None })?;
            if cloud.len() != f.n() {
                return Err(Failure {
                    code: EXIT_NUMERIC,
                    message: format!("{} has {} points but the factor has N = {}", p.display(), cloud.len(), f.n()),
                });
            }
            Some(dense_kernel_matrix(&cloud, &parse_kernel(k, a.nugget)?)?)
        }
        _ => None,
    };
    println!("k,residual_norm");
    for &k in &a.k {
        let approx = match &theta {
            Some(t) => pca_approx_against(&f, k, t)?,
            None => pca_approx(&f, k)?,
        };
        println!("{k},{}", approx.residual_norm);
    }
    Ok(())
}

fn cmd_error(a: ErrorArgs) -> CliResult {
    let f = load_factor(&a.factor)?;
    let cloud = load_points(&a.points)?;
    if cloud.len() != f.n() {
        return Err(Failure {
            code: EXIT_NUMERIC,
            message: format!("{} has {} points but the factor has N = {}", a.points.points.display(), cloud.len(), f.n()),
        });
    }
    let spec = parse_kernel(&a.kernel, a.nugget)?;
    if a.exact {
        let e = exact_frobenius_error(&f, &dense_kernel_matrix(&cloud, &spec)?)?;
        println!("E");
        println!("{e}");
        return Ok(());
    }
    if a.error.reps == 0 {
        return Err(Failure::usage("--reps must be at least 1"));
    }
    let m = a.error.samples.unwrap_or_else(|| default_samples(cloud.len()));
    let r = sampled_frobenius_error(&f, &cloud, &spec, m, a.error.reps, a.error.seed, a.interior)?;
    println!("E_mean,E_std,m,reps,interior,seed");
    println!("{},{},{},{},{},{}", r.mean_e, r.std_e, r.m, r.reps, r.interior, r.seed);
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> CliResult {
    let specs: Vec<(String, KernelSpec)> =
        a.kernel.iter().map(|k| parse_kernel(k, a.nugget).map(|s| (s.to_string(), s))).collect::<CliResult<_>>()?;
    if a.n.contains(&0) {
        return Err(Failure::usage("--n values must be at least 1"));
    }
    let sink: Box<dyn Write> = match &a.out {
        Some(p) => Box::new(File::create(p).map_err(|e| Failure::io(p, e))?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv_writer(sink);
    let io_err = |e: csv::Error| Failure { code: EXIT_IO, message: format!("writing table: {e}") };
    let mut header: Vec<&str> = CSV_HEADER.to_vec();
    header.extend(["t_total", "status"]);
    w.write_record(&header).map_err(io_err)?;
    let mut failed = 0;
    for &n in &a.n {
        let cloud = if a.manifold { gen_deformed_manifold(n, a.dz, a.error.seed, true)? } else { gen_uniform(n, a.d, a.error.seed)? };
        for &rho in &a.rho {
            for (name, spec) in &specs {
                let t = Instant::now();
                let fields = match factor_row(&cloud, spec, name, rho, a.mode, a.h, &a.error) {
                    Ok((_, row)) => {
                        let mut f = row.fields();
                        f.push(t.elapsed().as_secs_f64().to_string());
                        f.push("ok".into());
                        f
                    }
                    Err(e) => {
                        failed += 1;
                        eprintln!("error: N={n} rho={rho} kernel={name}: {}", e.message);
                        let mut f = vec![String::new(); CSV_HEADER.len() + 2];
                        f[0] = n.to_string();
                        f[1] = cloud.dim().to_string();
                        f[2] = name.clone();
                        f[3] = rho.to_string();
                        f[CSV_HEADER.len() + 1] = "failed".into();
                        f
                    }
                };
                w.write_record(&fields).map_err(io_err)?;
                w.flush().map_err(|e| Failure { code: EXIT_IO, message: format!("writing table: {e}") })?;
            }
        }
    }
    if failed > 0 {
        return Err(Failure { code: EXIT_NUMERIC, message: format!("{failed} configuration(s) failed") });
    }
    Ok(())
}
