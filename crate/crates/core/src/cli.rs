//! Command-line front end.
//!
//! Exit codes: `0` correctly solvable (or all checks passed), `1` not
//! correctly solvable (or a check failed), `2` inconclusive, `3` bad input
//! or I/O, `4` numerical failure.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::auxiliary::{compute_s, S_TOL};
use crate::coefficients::CoefficientPair;
use crate::error::{Error, Result};
use crate::green::{self, apply_green, fd_residual, GreenKernel, Operator, Rhs, ROW_TOL};
use crate::pfss::{construct_pfss, PfssOptions};
use crate::report::{self, serialize_extended};
use crate::solvability::{analyze, AnalyzeOptions, Verdict};
use crate::trend::TrendPolicy;
use crate::verify::{run_suite, VerifyOptions};

pub const EXIT_INPUT: i32 = 3;
pub const EXIT_NUMERIC: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "sl-solv", version, about = "Correct solvability of -(r y')' + q y = f in L_p on the real line")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Decide correct solvability and write report.json.
    Analyze(AnalyzeArgs),
    /// Solve for one right-hand side and write solution.csv.
    Solve(SolveArgs),
    /// Analyze a grid of power-law pairs and write sweep.csv.
    Sweep(SweepArgs),
    /// Run the invariant suites and write verify.json.
    Verify(VerifyArgs),
    /// Tabulate u, v, rho and s and write pfss.csv and width.csv.
    PfssDump(DumpArgs),
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Seed for probe randomness.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Tolerance of the width equation |F(s) - 1|.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct AnalyzeArgs {
    /// Coefficient description (JSON).
    #[arg(long)]
    pub problem: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    /// Also compute the Hardy bracket and probe witnesses for this p.
    #[arg(long)]
    pub norms: bool,
    /// Number of random probes used with --norms.
    #[arg(long, default_value_t = 16)]
    pub probes: usize,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RhsKind {
    Gaussian,
    Indicator,
    File,
}

#[derive(Debug, Clone, Args)]
pub struct GridArgs {
    #[arg(long, default_value_t = -10.0, allow_hyphen_values = true)]
    pub xmin: f64,
    #[arg(long, default_value_t = 10.0, allow_hyphen_values = true)]
    pub xmax: f64,
    #[arg(long, default_value_t = 201)]
    pub n: usize,
}

impl GridArgs {
    fn points(&self) -> Result<Vec<f64>> {
        if !(self.xmin < self.xmax) || self.n < 2 {
            return Err(Error::InvalidArgument("grid needs xmin < xmax and n ≥ 2".into()));
        }
        let h = (self.xmax - self.xmin) / (self.n - 1) as f64;
        Ok((0..self.n).map(|i| if i + 1 == self.n { self.xmax } else { self.xmin + h * i as f64 }).collect())
    }
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    #[arg(long)]
    pub problem: PathBuf,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[arg(long, value_enum, default_value_t = RhsKind::Gaussian)]
    pub rhs: RhsKind,
    /// `t,f` table for --rhs file.
    #[arg(long)]
    pub rhs_file: Option<PathBuf>,
    /// Support of --rhs indicator.
    #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
    pub a: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub b: f64,
    /// Step of the finite-difference residual.
    #[arg(long, default_value_t = 1e-2)]
    pub fd_step: f64,
    /// Solve even when the equation is not correctly solvable.
    #[arg(long)]
    pub force: bool,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// Comma-separated exponents of r = (1 + x²)^alpha.
    #[arg(long, default_value = "", allow_hyphen_values = true)]
    pub alpha_list: String,
    /// Comma-separated exponents of q = (1 + x²)^(-beta).
    #[arg(long, default_value = "", allow_hyphen_values = true)]
    pub beta_list: String,
    #[arg(long, default_value_t = 2.0)]
    pub p: f64,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub problem: PathBuf,
    /// Multiplies u without touching v, for fault injection.
    #[arg(long, hide = true)]
    pub corrupt_u: Option<f64>,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Clone, Args)]
pub struct DumpArgs {
    #[arg(long)]
    pub problem: PathBuf,
    #[command(flatten)]
    pub grid: GridArgs,
    #[command(flatten)]
    pub common: Common,
}

fn exit_code_of(e: &Error) -> i32 {
    match e {
        Error::Io(_) | Error::Parse(_) | Error::InvalidArgument(_) | Error::InvalidCoefficients(_) => EXIT_INPUT,
        _ => EXIT_NUMERIC,
    }
}

fn load_problem(path: &Path) -> Result<CoefficientPair> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    CoefficientPair::from_json(&text)
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn analyze_options(common: &Common) -> AnalyzeOptions {
    AnalyzeOptions { s_tol: common.tol.unwrap_or(S_TOL), seed: common.seed, ..AnalyzeOptions::default() }
}

fn parse_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| Error::Parse(format!("not a number: {t}"))))
        .collect()
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { 0 };
        }
    };
    configure_threads();
    let result = match &cli.command {
        Command::Analyze(a) => cmd_analyze(a),
        Command::Solve(a) => cmd_solve(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Verify(a) => cmd_verify(a),
        Command::PfssDump(a) => cmd_pfss_dump(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.code());
            exit_code_of(&e)
        }
    }
}

fn configure_threads() {
    if let Some(n) = std::env::var("SL_SOLV_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // A second call fails once the pool exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

pub fn cmd_analyze(args: &AnalyzeArgs) -> Result<i32> {
    let pair = load_problem(&args.problem)?;
    let mut opts = analyze_options(&args.common);
    if args.norms {
        opts.hardy = true;
        opts.probes = args.probes;
    }
    let rep = analyze(&pair, args.p, &opts)?;
    ensure_dir(&args.common.out)?;
    let path = args.common.out.join("report.json");
    write(&path, &report::to_sorted_json(&rep)?)?;
    println!("verdict: {:?}", rep.verdict);
    for e in &rep.evidence {
        println!("  {:<26} {:<12} {}", e.criterion, format!("{:?}", e.outcome), e.detail);
    }
    println!("report: {}", path.display());
    Ok(rep.verdict.exit_code())
}

#[derive(Debug, Serialize)]
struct SolveSummary {
    verdict: Verdict,
    forced: bool,
    p: f64,
    rhs: String,
    #[serde(serialize_with = "serialize_extended")]
    norm_y: f64,
    #[serde(serialize_with = "serialize_extended")]
    norm_f: f64,
    #[serde(serialize_with = "serialize_extended")]
    ratio: f64,
    #[serde(serialize_with = "serialize_extended")]
    max_residual: f64,
    residual_points: usize,
}

fn build_rhs(args: &SolveArgs) -> Result<Rhs> {
    match args.rhs {
        RhsKind::Gaussian => Ok(Rhs::gaussian()),
        RhsKind::Indicator => Rhs::indicator(args.a, args.b),
        RhsKind::File => {
            let path = args
                .rhs_file
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("--rhs file needs --rhs-file".into()))?;
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
            Rhs::from_csv(&text)
        }
    }
}

pub fn cmd_solve(args: &SolveArgs) -> Result<i32> {
    let pair = load_problem(&args.problem)?;
    let f = build_rhs(args)?;
    let grid = args.grid.points()?;
    let opts = analyze_options(&args.common);
    let rep = analyze(&pair, args.p, &opts)?;
    if rep.verdict == Verdict::NotCorrectlySolvable {
        if !args.force {
            eprintln!("the equation is not correctly solvable in L_p; pass --force to solve anyway");
            return Ok(Verdict::NotCorrectlySolvable.exit_code());
        }
        eprintln!("warning: the equation is not correctly solvable in L_p; solving anyway");
    }
    let sys = construct_pfss(&pair, &PfssOptions::default())?;
    let kernel = GreenKernel::new(&sys);
    let ys: Vec<f64> = grid.par_iter().map(|&x| apply_green(&kernel, &f, x, ROW_TOL)).collect::<Result<_>>()?;
    let h = args.fd_step;
    let interior: Vec<f64> = grid.iter().copied().filter(|&x| x - h >= grid[0] && x + h <= grid[grid.len() - 1]).collect();
    let residuals: Vec<f64> =
        interior.par_iter().map(|&x| fd_residual(&kernel, &f, x, h)).collect::<Result<_>>()?;
    let norm_f = f.lp_norm(args.p)?;
    let norm_y = green::output_norm(&kernel, &f, Operator::Full, args.p)?;
    let summary = SolveSummary {
        verdict: rep.verdict,
        forced: args.force,
        p: args.p,
        rhs: format!("{:?}", args.rhs).to_lowercase(),
        norm_y,
        norm_f,
        ratio: if norm_f > 0.0 { norm_y / norm_f } else { f64::NAN },
        max_residual: residuals.iter().map(|r| r.abs()).fold(0.0, f64::max),
        residual_points: residuals.len(),
    };
    let out = &args.common.out;
    ensure_dir(out)?;
    let rows: Vec<Vec<f64>> = grid.iter().zip(&ys).map(|(&x, &y)| vec![x, y]).collect();
    write(&out.join("solution.csv"), &report::csv_string("x,y", &rows))?;
    let rows: Vec<Vec<f64>> = interior.iter().zip(&residuals).map(|(&x, &r)| vec![x, r]).collect();
    write(&out.join("residual.csv"), &report::csv_string("x,residual", &rows))?;
    write(&out.join("green_slice.csv"), &kernel.slice_csv(sys.x0(), &grid))?;
    let mut norms = vec![green::l1_norm(&kernel, &TrendPolicy::default())];
    if args.p > 1.0 {
        let hardy = green::hardy_bounds(&kernel, args.p, &TrendPolicy::default())?;
        norms.push(hardy.g1);
        norms.push(hardy.g2);
    }
    write(&out.join("norms.csv"), &green::norm_table_csv(&norms))?;
    write(&out.join("summary.json"), &report::to_sorted_json(&summary)?)?;
    println!(
        "||y||_p = {}, ||f||_p = {}, ratio = {}, max residual = {}",
        report::fmt_float(summary.norm_y),
        report::fmt_float(summary.norm_f),
        report::fmt_float(summary.ratio),
        report::fmt_float(summary.max_residual)
    );
    Ok(0)
}

pub fn cmd_sweep(args: &SweepArgs) -> Result<i32> {
    let alphas = parse_list(&args.alpha_list)?;
    let betas = parse_list(&args.beta_list)?;
    let opts = analyze_options(&args.common);
    let cells: Vec<(f64, f64)> = alphas.iter().flat_map(|&a| betas.iter().map(move |&b| (a, b))).collect();
    let rows: Vec<String> = cells
        .par_iter()
        .map(|&(a, b)| {
            let outcome = CoefficientPair::power_law(a, b).and_then(|pair| analyze(&pair, args.p, &opts));
            let (verdict, value) = match outcome {
                Ok(rep) => (rep.verdict.short().to_string(), rep.d_or_exponent().unwrap_or(f64::NAN)),
                Err(e) => (format!("error:{}", e.code()), f64::NAN),
            };
            format!("{},{},{},{}\n", report::fmt_float(a), report::fmt_float(b), verdict, report::fmt_float(value))
        })
        .collect();
    let mut csv = String::from("alpha,beta,verdict,D_or_exponent\n");
    rows.iter().for_each(|r| csv.push_str(r));
    ensure_dir(&args.common.out)?;
    write(&args.common.out.join("sweep.csv"), &csv)?;
    print!("{csv}");
    Ok(0)
}

pub fn cmd_verify(args: &VerifyArgs) -> Result<i32> {
    let pair = load_problem(&args.problem)?;
    let mut sys = construct_pfss(&pair, &PfssOptions::default())?;
    if let Some(k) = args.corrupt_u {
        sys = sys.with_u_scaled(k);
    }
    let opts = VerifyOptions { seed: args.common.seed, ..VerifyOptions::default() };
    let label = args.problem.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let rep = run_suite(&label, &sys, &opts);
    ensure_dir(&args.common.out)?;
    write(&args.common.out.join("verify.json"), &report::to_sorted_json(&rep)?)?;
    for c in &rep.checks {
        println!(
            "{} {:<26} measured {} threshold {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            report::fmt_float(c.measured),
            report::fmt_float(c.threshold)
        );
    }
    Ok(if rep.passed { 0 } else { 1 })
}

pub fn cmd_pfss_dump(args: &DumpArgs) -> Result<i32> {
    let pair = load_problem(&args.problem)?;
    let sys = construct_pfss(&pair, &PfssOptions::default())?;
    let grid: Vec<f64> = args.grid.points()?.into_iter().filter(|&x| sys.contains(x)).collect();
    let tol = args.common.tol.unwrap_or(S_TOL);
    let widths: Vec<Vec<f64>> = grid
        .par_iter()
        .map(|&x| compute_s(&sys, x, tol).map(|s| vec![x, s]))
        .collect::<Result<_>>()?;
    ensure_dir(&args.common.out)?;
    write(&args.common.out.join("pfss.csv"), &report::csv_string("x,u,v,rho", &sys.table(&grid)))?;
    write(&args.common.out.join("width.csv"), &report::csv_string("x,s", &widths))?;
    println!("method {:?}, x0 = {}", sys.method(), report::fmt_float(sys.x0()));
    Ok(0)
}
