//! Command-line front end.
//!
//! Exit codes: 0 success, 1 failed acceptance rows, 2 unreadable or invalid
//! input, 3 routes disagree beyond `--tol`, 4 solver failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use crate::acceptance::{self, DEFAULT_SEED};
use crate::analytic::{optimal_diffusion, r0_analytic};
use crate::discrete::Grid;
use crate::error::{Error, Result};
use crate::greens::mutation;
use crate::heatkernel::{r0_time_domain, KChoice};
use crate::model::{ensure_valid, load_model, ModelSpec, MollifierFamily, MollifierKind};
use crate::nextgen::{mollifier_field, r0_limit, r0_rank_one, richardson, Method, R0Report, DEFAULT_SCHEDULE};
use crate::semigroup::{default_horizon, EvolutionState, Scheme, Stepper};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATE_FAILED: i32 = 1;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_DISAGREE: i32 = 3;
pub const EXIT_SOLVER: i32 = 4;

const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser)]
#[command(
    name = "r0kit",
    version,
    about = "Basic reproduction numbers of structured population models"
)]
pub struct Cli {
    /// Minimum number of finite-volume cells.
    #[arg(long, global = true, default_value_t = 4096)]
    pub grid_n: usize,

    /// Largest allowed disagreement between routes.
    #[arg(long, global = true, default_value_t = 1e-3)]
    pub tol: f64,

    /// Concentrating family used for the offspring densities.
    #[arg(long, global = true, default_value = "uniform")]
    pub family: MollifierKind,

    /// Write the CSV table to this file instead of stdout.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Seed for the randomized acceptance subsets.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    /// Deliberately broken kernel, for checking that validate catches it.
    #[arg(long, global = true, hide = true)]
    pub mutate: Option<Mutation>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mutation {
    Lambda2Sign,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Route {
    Analytic,
    GreenLimit,
    TimeDomain,
    All,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    ImplicitEuler,
    CrankNicolson,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// R0 by one route or all of them.
    Compute {
        model: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        method: Route,
    },
    /// R0,k over a k-schedule, followed by the extrapolated limit.
    Converge {
        model: PathBuf,
        /// Comma-separated k values.
        #[arg(long, value_delimiter = ',', default_values_t = DEFAULT_SCHEDULE.to_vec())]
        k: Vec<u32>,
    },
    /// R0 as a function of the diffusion coefficient.
    SweepD {
        model: PathBuf,
        #[arg(long, default_value_t = 1e-3)]
        d_min: f64,
        #[arg(long, default_value_t = 1e3)]
        d_max: f64,
        #[arg(long, default_value_t = 61)]
        points: usize,
        /// Space the points linearly instead of logarithmically.
        #[arg(long)]
        linear: bool,
    },
    /// Time-stepping of the population started from the k-th offspring density.
    Simulate {
        model: PathBuf,
        #[arg(long, default_value_t = 64)]
        k: u32,
        #[arg(long, default_value_t = 1e-2)]
        dt: f64,
        /// Final time; defaults to 50 / min mu.
        #[arg(long)]
        t_end: Option<f64>,
        #[arg(long, value_enum, default_value = "implicit-euler")]
        scheme: SchemeArg,
        /// Emit every n-th step.
        #[arg(long, default_value_t = 1)]
        every: usize,
    },
    /// Runs the acceptance suite.
    Validate {
        /// Group name or criterion id, comma separated ("appendix" for the heat-kernel checks).
        #[arg(long)]
        filter: Option<String>,
    },
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    if cli.mutate == Some(Mutation::Lambda2Sign) {
        mutation::set_flip_lambda2(true);
    }
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("r0kit: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Parse { .. } | Error::InvalidModel(_) | Error::Io(_) | Error::Domain(_) => EXIT_INPUT,
        _ => EXIT_SOLVER,
    }
}

/// Twelve significant digits, `.` separator.
pub fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.11e}")
    } else {
        v.to_string()
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

pub fn run(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Compute { model, method } => cmd_compute(cli, model, *method),
        Command::Converge { model, k } => cmd_converge(cli, model, k),
        Command::SweepD {
            model,
            d_min,
            d_max,
            points,
            linear,
        } => cmd_sweep_d(cli, model, *d_min, *d_max, *points, !linear),
        Command::Simulate {
            model,
            k,
            dt,
            t_end,
            scheme,
            every,
        } => cmd_simulate(cli, model, *k, *dt, *t_end, *scheme, *every),
        Command::Validate { filter } => cmd_validate(cli, filter.as_deref()),
    }
}

fn load(path: &Path) -> Result<ModelSpec> {
    let m = load_model(path)?;
    ensure_valid(&m)?;
    Ok(m)
}

struct Table {
    text: String,
}

impl Table {
    fn new(cli: &Cli, command: &str, flags: &str, columns: &[&str]) -> Self {
        let mut text = String::new();
        let mut global = format!(
            "--grid-n {} --tol {} --family {} --seed {}",
            cli.grid_n, cli.tol, cli.family, cli.seed
        );
        if cli.mutate.is_some() {
            global.push_str(" --mutate lambda2-sign");
        }
        let _ = writeln!(text, "# r0kit v{VERSION} {command} {global} {flags}");
        let mut t = Self { text };
        let _ = t.row(columns);
        t
    }

    fn comment(&mut self, line: &str) {
        let _ = writeln!(self.text, "# {line}");
    }

    fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(fields)?;
        let buf = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
        self.text.push_str(&String::from_utf8_lossy(&buf));
        Ok(())
    }

    fn emit(self, out: Option<&Path>) -> Result<()> {
        match out {
            Some(p) => fs::write(p, &self.text)?,
            None => print!("{}", self.text),
        }
        Ok(())
    }
}

fn schedule_text(ks: &[u32]) -> String {
    ks.iter().map(u32::to_string).collect::<Vec<_>>().join(",")
}

fn green_route(cli: &Cli, m: &ModelSpec, ks: &[u32]) -> Result<R0Report> {
    let k_max = ks.iter().copied().max().unwrap_or(1);
    let g = Grid::for_model(m, cli.grid_n, k_max)?;
    let fam = MollifierFamily::for_model(cli.family, m)?;
    r0_limit(m, &fam, ks, &g)
}

fn cmd_compute(cli: &Cli, path: &Path, method: Route) -> Result<i32> {
    let m = load(path)?;
    let mut table = Table::new(
        cli,
        "compute",
        &format!("--method {} {}", route_name(method), path.display()),
        &["route", "r0", "error_estimate", "grid_n", "note"],
    );
    table.comment(&format!(
        "k-schedule {}, truncation {}, time horizon max(10a, 50/mu)",
        schedule_text(&DEFAULT_SCHEDULE),
        fmt_num(m.truncation())
    ));

    let routes: Vec<Route> = match method {
        Route::All => vec![Route::Analytic, Route::GreenLimit, Route::TimeDomain],
        r => vec![r],
    };
    let mut values = Vec::new();
    for r in routes {
        let result = match r {
            Route::Analytic => r0_analytic(&m).map(|v| R0Report::simple(v, Method::Analytic)),
            Route::GreenLimit => green_route(cli, &m, &DEFAULT_SCHEDULE),
            Route::TimeDomain => r0_time_domain(&m, KChoice::Limit).map(|v| R0Report::simple(v, Method::TimeDomain)),
            Route::All => unreachable!(),
        };
        match result {
            Ok(rep) => {
                for f in &rep.flags {
                    eprintln!("r0kit: {}: {f}", route_name(r));
                }
                table.row([
                    route_name(r).to_string(),
                    fmt_num(rep.value),
                    fmt_opt(rep.extrapolation_error_estimate),
                    rep.grid_n.map(|n| n.to_string()).unwrap_or_default(),
                    rep.flags.join("; "),
                ])?;
                values.push(rep.value);
            }
            Err(Error::Unsupported(why)) if method == Route::All => {
                table.row([route_name(r), "", "", "", &format!("not applicable: {why}")])?;
            }
            Err(e) => return Err(e),
        }
    }

    let spread =
        values.iter().copied().fold(f64::NEG_INFINITY, f64::max) - values.iter().copied().fold(f64::INFINITY, f64::min);
    let agree = !(spread > cli.tol);
    if method == Route::All {
        table.comment(&format!(
            "max route difference {} (tol {}): {}",
            fmt_num(spread.max(0.0)),
            cli.tol,
            if agree { "consistent" } else { "DISAGREE" }
        ));
    }
    table.emit(cli.out.as_deref())?;
    if !agree {
        eprintln!("r0kit: routes disagree by {spread:.3e} > {}", cli.tol);
        return Ok(EXIT_DISAGREE);
    }
    Ok(EXIT_OK)
}

fn route_name(r: Route) -> &'static str {
    match r {
        Route::Analytic => "analytic",
        Route::GreenLimit => "green-limit",
        Route::TimeDomain => "time-domain",
        Route::All => "all",
    }
}

fn cmd_converge(cli: &Cli, path: &Path, ks: &[u32]) -> Result<i32> {
    let m = load(path)?;
    let mut ks = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();
    if ks.is_empty() || ks[0] == 0 {
        return Err(Error::Domain("k values must be positive".into()));
    }
    let k_max = *ks.last().unwrap_or(&1);
    let g = Grid::for_model(&m, cli.grid_n, k_max)?;
    let fam = MollifierFamily::for_model(cli.family, &m)?;
    let rs = ks
        .par_iter()
        .map(|&k| r0_rank_one(&m, &fam, k, &g))
        .collect::<Result<Vec<f64>>>()?;
    let ex = richardson(&ks, &rs);

    let mut table = Table::new(
        cli,
        "converge",
        &format!("--k {} {}", schedule_text(&ks), path.display()),
        &["k", "r0_k", "abs_diff_to_limit"],
    );
    table.comment(&format!("grid n {} spacing {}", g.n_cells(), fmt_num(g.spacing())));
    for (k, r) in ks.iter().zip(&rs) {
        table.row([k.to_string(), fmt_num(*r), fmt_num((r - ex.value).abs())])?;
    }
    for f in &ex.flags {
        eprintln!("r0kit: warning: {f}");
        table.comment(&format!("warning: {f}"));
    }
    if ks.len() > 1 {
        table.row(["limit".to_string(), fmt_num(ex.value), fmt_opt(ex.error_estimate)])?;
    }
    table.emit(cli.out.as_deref())?;
    Ok(EXIT_OK)
}

fn cmd_sweep_d(cli: &Cli, path: &Path, d_min: f64, d_max: f64, points: usize, log_scale: bool) -> Result<i32> {
    let m = load(path)?;
    let mu = m
        .constant_mu()
        .ok_or_else(|| Error::Unsupported("sweep-d needs a constant mortality".into()))?;
    if !(d_min > 0.0 && d_max > d_min && points >= 2) {
        return Err(Error::Domain(format!(
            "need 0 < d-min < d-max and at least 2 points (got {d_min}, {d_max}, {points})"
        )));
    }
    let ds: Vec<f64> = (0..points)
        .map(|i| {
            let t = i as f64 / (points - 1) as f64;
            if log_scale {
                (d_min.ln() + t * (d_max / d_min).ln()).exp()
            } else {
                d_min + t * (d_max - d_min)
            }
        })
        .collect();
    let values = ds
        .par_iter()
        .map(|&d| {
            let mut md = m.clone();
            md.diffusion = d;
            r0_analytic(&md)
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut table = Table::new(
        cli,
        "sweep-d",
        &format!(
            "--d-min {d_min} --d-max {d_max} --points {points}{} {}",
            if log_scale { "" } else { " --linear" },
            path.display()
        ),
        &["D", "r0"],
    );
    for (d, v) in ds.iter().zip(&values) {
        table.row([fmt_num(*d), fmt_num(*v)])?;
    }
    let opt = optimal_diffusion(&m.beta, mu)?;
    let (kind, d_star) = match opt.d_star {
        crate::analytic::Maximiser::Interior(d) => ("interior", fmt_num(d)),
        crate::analytic::Maximiser::Boundary(d) => ("boundary", fmt_num(d)),
        crate::analytic::Maximiser::Flat => ("flat", String::new()),
    };
    table.comment(&format!(
        "optimum,{kind},D*={d_star},R0*={}",
        fmt_num(opt.r0_star * m.birth_multiplicity)
    ));
    table.emit(cli.out.as_deref())?;
    Ok(EXIT_OK)
}

fn cmd_simulate(
    cli: &Cli,
    path: &Path,
    k: u32,
    dt: f64,
    t_end: Option<f64>,
    scheme: SchemeArg,
    every: usize,
) -> Result<i32> {
    let m = load(path)?;
    let t_end = t_end.unwrap_or_else(|| default_horizon(&m));
    if !(dt > 0.0 && t_end > 0.0) {
        return Err(Error::Domain(format!(
            "dt and t-end must be positive (got {dt}, {t_end})"
        )));
    }
    let scheme = match scheme {
        SchemeArg::ImplicitEuler => Scheme::ImplicitEuler,
        SchemeArg::CrankNicolson => Scheme::CrankNicolson,
    };
    let g = Grid::for_model(&m, cli.grid_n, k)?;
    let fam = MollifierFamily::for_model(cli.family, &m)?;
    let stepper = Stepper::new(&m, &fam, k, &g, dt, scheme)?;
    let steps = (t_end / dt).round().max(1.0) as usize;
    let every = every.max(1);

    let mut table = Table::new(
        cli,
        "simulate",
        &format!(
            "--k {k} --dt {dt} --t-end {t_end} --scheme {} --every {every} {}",
            match scheme {
                Scheme::ImplicitEuler => "implicit-euler",
                Scheme::CrankNicolson => "crank-nicolson",
            },
            path.display()
        ),
        &["t", "mass", "births", "mortality", "outflow", "imbalance"],
    );
    table.comment(&format!("grid n {} spacing {}", g.n_cells(), fmt_num(g.spacing())));
    let mut state = EvolutionState::new(mollifier_field(&fam, k, &g));
    table.row([
        fmt_num(0.0),
        fmt_num(state.mass()),
        "".into(),
        "".into(),
        "".into(),
        "".into(),
    ])?;
    state.mass_history.clear();
    for i in 1..=steps {
        let (next, ledger) = stepper.step(state)?;
        state = next;
        // The history is not needed here; keep it from growing.
        state.mass_history.clear();
        if i % every == 0 || i == steps {
            table.row([
                fmt_num(state.time),
                fmt_num(state.mass()),
                fmt_num(ledger.births),
                fmt_num(ledger.mortality),
                fmt_num(ledger.outflow),
                fmt_num(ledger.imbalance()),
            ])?;
        }
    }
    table.emit(cli.out.as_deref())?;
    Ok(EXIT_OK)
}

fn cmd_validate(cli: &Cli, filter: Option<&str>) -> Result<i32> {
    let results = acceptance::run(filter, cli.seed);
    if results.is_empty() {
        return Err(Error::Domain(format!(
            "filter {:?} selects no criteria",
            filter.unwrap_or("")
        )));
    }
    for r in &results {
        println!("{r}");
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!("{} passed, {failed} failed", results.len() - failed);
    if let Some(out) = &cli.out {
        let mut table = Table::new(
            cli,
            "validate",
            &format!("--filter {}", filter.unwrap_or("all")),
            &["id", "group", "passed", "measured"],
        );
        for r in &results {
            table.row([
                r.id.to_string(),
                r.group.to_string(),
                r.passed.to_string(),
                r.measured.clone(),
            ])?;
        }
        table.emit(Some(out))?;
    }
    Ok(if failed == 0 { EXIT_OK } else { EXIT_VALIDATE_FAILED })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_have_twelve_significant_digits() {
        assert_eq!(fmt_num(2.0), "2.00000000000e0");
        assert_eq!(fmt_num(-0.000123456789012345), "-1.23456789012e-4");
    }

    #[test]
    fn flags_parse_with_defaults() {
        let cli = Cli::try_parse_from(["r0kit", "compute", "m.txt"]).unwrap();
        assert_eq!(cli.grid_n, 4096);
        assert_eq!(cli.tol, 1e-3);
        assert_eq!(cli.family, MollifierKind::UniformIndicator);
        assert!(matches!(cli.command, Command::Compute { method: Route::All, .. }));
        let cli = Cli::try_parse_from(["r0kit", "converge", "m.txt", "--k", "8,32", "--family", "bump"]).unwrap();
        assert_eq!(cli.family, MollifierKind::SmoothBump);
        assert!(matches!(cli.command, Command::Converge { ref k, .. } if k == &[8, 32]));
    }

    #[test]
    fn bad_flag_is_input_error() {
        assert_eq!(
            main_with_args(["r0kit", "compute", "m.txt", "--method", "nope"]),
            EXIT_INPUT
        );
        assert_eq!(
            main_with_args(["r0kit", "compute", "/nonexistent/model.txt"]),
            EXIT_INPUT
        );
    }

    #[test]
    fn table_header_and_line_endings() {
        let cli = Cli::try_parse_from(["r0kit", "validate"]).unwrap();
        let mut t = Table::new(&cli, "validate", "--filter all", &["a", "b"]);
        t.row(["1", "2"]).unwrap();
        t.comment("note");
        assert!(t
            .text
            .starts_with(&format!("# r0kit v{VERSION} validate --grid-n 4096")));
        assert!(t.text.ends_with("a,b\n1,2\n# note\n"));
        assert!(!t.text.contains('\r'));
    }
}
