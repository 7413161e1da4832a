//! `spiderstick`: folded moments, modulation bounds, stickiness certificates
//! and Monte Carlo modulation estimates for laws on the K-spider.
//!
//! Exit codes: 0 success, 1 certificate refused, 2 input error,
//! 3 scan cap exceeded, 4 I/O error.

mod output;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use spiderstick::{
    bound_curve, certify_with, modulation_curve, BoundError, BoundInputs, BoundRow, Certification,
    DiscreteSpiderDistribution, Execution, SimulationConfig, DEFAULT_SCAN_CAP,
};

use output::{num, write_atomic, RunManifest, Table};

/// Environment variable holding the default worker thread count.
pub const THREADS_ENV: &str = "SPIDERSTICK_THREADS";

#[derive(Parser, Debug)]
#[command(
    name = "spiderstick",
    version,
    about = "Finite sample stickiness on K-spiders"
)]
struct Cli {
    /// Worker threads for certify and simulate (default: all cores)
    #[arg(long, global = true, env = THREADS_ENV)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Per-leg folded moments and the population Fréchet mean
    Moments {
        #[command(flatten)]
        source: Source,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exhaustively verify a stickiness certificate over n = N..=N^l
    Certify {
        #[command(flatten)]
        source: Source,
        /// Base N
        #[arg(long)]
        base: u64,
        /// Scale l
        #[arg(long)]
        scale: u32,
        /// Largest admissible N^l
        #[arg(long, default_value_t = DEFAULT_SCAN_CAP)]
        cap: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate p_n, p_nk and the modulation bound
    Curve {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        grid: GridArgs,
        /// Linear stride from nmin instead of a log grid (diagnostic preview)
        #[arg(long)]
        stride: Option<u64>,
        /// Draw a reference line at 1 - rho in the SVG
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
    /// Monte Carlo estimates of the variance modulation
    Simulate {
        #[command(flatten)]
        source: Source,
        #[command(flatten)]
        grid: GridArgs,
        /// Replications per sample size
        #[arg(long, default_value_t = 10_000)]
        reps: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        svg: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
struct Source {
    /// Distribution JSON file
    dist: Option<PathBuf>,
    /// Example family X_t, e.g. `K=3,t=0.01`
    #[arg(long)]
    xt: Option<XtSpec>,
}

#[derive(Args, Debug)]
struct GridArgs {
    #[arg(long)]
    nmin: u64,
    #[arg(long)]
    nmax: u64,
    /// Number of log-spaced grid points
    #[arg(long, default_value_t = 50)]
    points: usize,
}

#[derive(Debug, Clone, Copy)]
struct XtSpec {
    legs: usize,
    t: f64,
}

impl FromStr for XtSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (mut legs, mut t) = (None, None);
        for part in s.split(',') {
            let (key, value) = part
                .split_once('=')
                .ok_or_else(|| format!("expected key=value, got `{part}`"))?;
            match key.trim() {
                "K" | "k" => {
                    legs = Some(
                        value
                            .trim()
                            .parse::<usize>()
                            .map_err(|e| format!("K: {e}"))?,
                    )
                }
                "t" => t = Some(value.trim().parse::<f64>().map_err(|e| format!("t: {e}"))?),
                other => return Err(format!("unknown key `{other}`")),
            }
        }
        match (legs, t) {
            (Some(legs), Some(t)) => Ok(XtSpec { legs, t }),
            _ => Err("need both K and t".into()),
        }
    }
}

#[derive(Debug)]
enum Failure {
    Refused(String),
    Input(String),
    Cap(String),
    Io(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Refused(_) => 1,
            Failure::Input(_) => 2,
            Failure::Cap(_) => 3,
            Failure::Io(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Refused(m) | Failure::Input(m) | Failure::Cap(m) | Failure::Io(m) => m,
        }
    }
}

impl From<BoundError> for Failure {
    fn from(e: BoundError) -> Self {
        match e {
            BoundError::Overflow { .. } => Failure::Cap(format!("error: {e}")),
            other => Failure::Input(format!("error: {other}")),
        }
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads.filter(|&n| n > 0) {
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    };
    match pool.install(|| run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn run(command: Command) -> CmdResult {
    match command {
        Command::Moments { source, out } => moments(&source, out.as_deref()),
        Command::Certify {
            source,
            base,
            scale,
            cap,
            out,
        } => certify(&source, base, scale, cap, out.as_deref()),
        Command::Curve {
            source,
            grid,
            stride,
            rho,
            out,
            svg,
        } => curve(&source, &grid, stride, rho, out.as_deref(), svg.as_deref()),
        Command::Simulate {
            source,
            grid,
            reps,
            seed,
            out,
            svg,
        } => simulate(&source, &grid, reps, seed, out.as_deref(), svg.as_deref()),
    }
}

fn load(source: &Source) -> Result<(DiscreteSpiderDistribution, String), Failure> {
    let dist = match (&source.dist, source.xt) {
        (_, Some(XtSpec { legs, t })) => DiscreteSpiderDistribution::example_xt(legs, t)
            .map(|d| (d, format!("xt(K={legs},t={t})"))),
        (Some(path), None) => {
            let text = std::fs::read_to_string(path).map_err(|e| {
                Failure::Input(format!("error: cannot read {}: {e}", path.display()))
            })?;
            DiscreteSpiderDistribution::from_json(&text).map(|d| (d, path.display().to_string()))
        }
        (None, None) => return Err(Failure::Input("error: no distribution given".into())),
    };
    let (dist, label) = dist.map_err(|e| Failure::Input(format!("error: {e}")))?;
    if !dist.is_nondegenerate() {
        eprintln!("warning: distribution is degenerate (mass on fewer than 3 legs)");
    }
    Ok((dist, label))
}

fn emit(out: Option<&Path>, manifest: &RunManifest, started: Instant, body: &str) -> CmdResult {
    let text = format!("{}{}", manifest.render(started.elapsed()), body);
    match out {
        Some(path) => write_atomic(path, &text)
            .map_err(|e| Failure::Io(format!("error: cannot write {}: {e}", path.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_svg(path: &Path, chart: &svg::Chart) -> CmdResult {
    write_atomic(path, &chart.render())
        .map_err(|e| Failure::Io(format!("error: cannot write {}: {e}", path.display())))
}

fn moments(source: &Source, out: Option<&Path>) -> CmdResult {
    let started = Instant::now();
    let (dist, label) = load(source)?;
    let s = dist.folded_summary();
    let mut manifest = RunManifest::new("moments");
    manifest.param("dist", &label);
    manifest
        .note("nondegenerate", dist.is_nondegenerate())
        .note("third_at_origin", num(s.third_at_origin))
        .note("population_mean", dist.frechet_mean())
        .note("variance_about_mean", num(dist.variance_about_mean()));
    let mut table = Table::new(["k", "leg_mass", "m", "sigma2", "abs_central_third"]);
    for k in 0..dist.legs() {
        table.push(vec![
            (k + 1).to_string(),
            num(s.leg_mass[k]),
            num(s.m[k]),
            num(s.sigma2[k]),
            num(s.abs_central_third[k]),
        ]);
    }
    emit(out, &manifest, started, &table.render())
}

fn certify(source: &Source, base: u64, scale: u32, cap: u64, out: Option<&Path>) -> CmdResult {
    let started = Instant::now();
    let (dist, label) = load(source)?;
    let inputs = BoundInputs::new(&dist)?;
    let result = certify_with(base, scale, &inputs, cap, Execution::Parallel)?;
    let mut manifest = RunManifest::new("certify");
    manifest
        .param("dist", &label)
        .param("base", base)
        .param("scale", scale)
        .param("cap", cap);
    let mut table = Table::new([
        "status",
        "base",
        "scale",
        "end",
        "mean_leg",
        "rho",
        "argmin_n",
        "max_bound",
        "min_bound",
        "failing_n",
        "failed_condition",
    ]);
    let end = (base as u128).pow(scale);
    match &result {
        Certification::Certified(c) => {
            println!(
                "certified: rho = {:.6} (scale {}, base {}); max bound {} at n = {}; min bound {}",
                c.level,
                c.scale,
                c.base,
                num(c.max_bound),
                c.argmin_n,
                num(c.min_bound)
            );
            table.push(vec![
                "certified".into(),
                base.to_string(),
                scale.to_string(),
                end.to_string(),
                inputs.mean_leg().to_string(),
                num(c.level),
                c.argmin_n.to_string(),
                num(c.max_bound),
                num(c.min_bound),
                String::new(),
                String::new(),
            ]);
        }
        Certification::Refused(f) => {
            println!(
                "refused: {} at n = {} (p_n = {}, p_nk = {}, bound = {})",
                f.condition,
                f.n,
                num(f.row.p_upper),
                num(f.row.p_lower),
                num(f.row.bound)
            );
            table.push(vec![
                "refused".into(),
                base.to_string(),
                scale.to_string(),
                end.to_string(),
                inputs.mean_leg().to_string(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                f.n.to_string(),
                f.condition.to_string(),
            ]);
        }
    }
    if let Some(path) = out {
        emit(Some(path), &manifest, started, &table.render())?;
    }
    match result {
        Certification::Certified(_) => Ok(()),
        Certification::Refused(f) => Err(Failure::Refused(format!(
            "certificate refused: {} at n = {}",
            f.condition, f.n
        ))),
    }
}

/// `points` log-spaced integers from `nmin` to `nmax`, deduplicated.
fn log_grid(nmin: u64, nmax: u64, points: usize) -> Result<Vec<u64>, Failure> {
    if nmin == 0 || nmin > nmax {
        return Err(Failure::Input(format!(
            "error: need 1 <= nmin <= nmax, got {nmin}..{nmax}"
        )));
    }
    if points == 0 {
        return Err(Failure::Input("error: --points must be at least 1".into()));
    }
    if points == 1 || nmin == nmax {
        return Ok(vec![nmin]);
    }
    let (lo, hi) = ((nmin as f64).ln(), (nmax as f64).ln());
    let mut grid: Vec<u64> = (0..points)
        .map(|i| {
            let v = (lo + (hi - lo) * i as f64 / (points - 1) as f64)
                .exp()
                .round() as u64;
            v.clamp(nmin, nmax)
        })
        .collect();
    grid[0] = nmin;
    grid[points - 1] = nmax;
    grid.dedup();
    Ok(grid)
}

fn curve(
    source: &Source,
    grid: &GridArgs,
    stride: Option<u64>,
    rho: Option<f64>,
    out: Option<&Path>,
    svg_path: Option<&Path>,
) -> CmdResult {
    let started = Instant::now();
    let (dist, label) = load(source)?;
    let inputs = BoundInputs::new(&dist)?;
    let rows: Vec<BoundRow> = match stride {
        Some(stride) => {
            if grid.nmin == 0 || grid.nmin > grid.nmax {
                return Err(Failure::Input("error: need 1 <= nmin <= nmax".into()));
            }
            if stride == 0 {
                return Err(Failure::Input("error: --stride must be at least 1".into()));
            }
            let mut ns: Vec<u64> = (grid.nmin..=grid.nmax).step_by(stride as usize).collect();
            if ns.last() != Some(&grid.nmax) {
                ns.push(grid.nmax);
            }
            bound_curve(&ns, &inputs)?
        }
        None => bound_curve(&log_grid(grid.nmin, grid.nmax, grid.points)?, &inputs)?,
    };
    let mut manifest = RunManifest::new("curve");
    manifest
        .param("dist", &label)
        .param("nmin", grid.nmin)
        .param("nmax", grid.nmax)
        .param("points", grid.points)
        .param("stride", stride.map_or("none".into(), |s| s.to_string()))
        .param("rho", rho.map_or("none".into(), |r| r.to_string()))
        .note("mean_leg", inputs.mean_leg());
    let mut table = Table::new(["n", "p_n", "p_nk", "bound"]);
    for r in &rows {
        table.push(vec![
            r.n.to_string(),
            num(r.p_upper),
            num(r.p_lower),
            num(r.bound),
        ]);
    }
    emit(out, &manifest, started, &table.render())?;
    if let Some(path) = svg_path {
        let chart = svg::Chart {
            title: format!("modulation bound, {label}"),
            bound: rows.iter().map(|r| (r.n as f64, r.bound)).collect(),
            markers: Vec::new(),
            level: rho.map(|r| 1.0 - r),
        };
        write_svg(path, &chart)?;
    }
    Ok(())
}

fn simulate(
    source: &Source,
    grid: &GridArgs,
    reps: u64,
    seed: u64,
    out: Option<&Path>,
    svg_path: Option<&Path>,
) -> CmdResult {
    let started = Instant::now();
    let (dist, label) = load(source)?;
    let legs = dist.legs();
    let ns = log_grid(grid.nmin, grid.nmax, grid.points)?;
    // the bound only exists for nondegenerate laws with a mean on a leg
    let inputs = BoundInputs::new(&dist).ok();
    let cfg = SimulationConfig::new(dist, ns, reps, seed)
        .map_err(|e| Failure::Input(format!("error: {e}")))?;
    let estimates = modulation_curve(&cfg).map_err(|e| Failure::Input(format!("error: {e}")))?;

    let mut manifest = RunManifest::new("simulate");
    manifest
        .param("dist", &label)
        .param("nmin", grid.nmin)
        .param("nmax", grid.nmax)
        .param("points", grid.points)
        .param("reps", reps);
    manifest.seed = Some(seed);
    let mut header: Vec<String> = ["n", "m_hat", "std_err", "mean_sq_dist", "freq_origin"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((1..=legs).map(|k| format!("freq_A{k}")));
    let mut table = Table::new(header);
    for e in &estimates {
        let mut row = vec![
            e.n.to_string(),
            num(e.m_hat),
            num(e.std_err),
            num(e.mean_sq_dist),
            num(e.origin_freq()),
        ];
        row.extend(e.event_freq[..legs].iter().map(|&f| num(f)));
        table.push(row);
    }
    emit(out, &manifest, started, &table.render())?;
    if let Some(path) = svg_path {
        let bound = match &inputs {
            Some(inputs) => estimates
                .iter()
                .map(|e| (e.n as f64, inputs.row(e.n).bound))
                .collect(),
            None => Vec::new(),
        };
        let chart = svg::Chart {
            title: format!("variance modulation, {label}, B = {reps}"),
            bound,
            markers: estimates
                .iter()
                .map(|e| svg::Marker {
                    n: e.n as f64,
                    value: e.m_hat,
                    half_width: 2.0 * e.std_err,
                })
                .collect(),
            level: None,
        };
        write_svg(path, &chart)?;
    }
    Ok(())
}
