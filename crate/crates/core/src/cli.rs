//! Command-line front end.
//!
//! Exit status: 0 on success, 2 for invalid arguments (one-line
//! diagnostic), 1 for numerical failures.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::cramer::{CramerProfile, ProfileOptions};
use crate::error::{Error, Result};
use crate::measures::{MeasureSpec, TabulatedDensity};
use crate::polytope::{self, SweepConfig, SweepGrid};
use crate::stats::fmt_g17;
use crate::thresholds::{self, Window};
use crate::verify;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "hullthresh",
    version,
    about = "Cramér transforms and random polytope thresholds"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Properties of a measure
    Dist {
        #[command(subcommand)]
        action: DistAction,
    },
    /// Tables of the Cramér transform
    Cramer {
        #[command(subcommand)]
        action: CramerAction,
    },
    /// Threshold constants and the theoretical window
    Threshold {
        #[command(subcommand)]
        action: ThresholdAction,
    },
    /// Monte Carlo experiments on random polytopes
    Simulate {
        #[command(subcommand)]
        action: SimulateAction,
    },
    /// Acceptance suite
    Verify {
        #[command(subcommand)]
        action: VerifyAction,
    },
}

#[derive(Debug, Subcommand, Serialize)]
pub enum DistAction {
    Info(DistInfoArgs),
}

#[derive(Debug, Subcommand, Serialize)]
pub enum CramerAction {
    Table(CramerTableArgs),
}

#[derive(Debug, Subcommand, Serialize)]
pub enum ThresholdAction {
    Constants(ConstantsArgs),
}

#[derive(Debug, Subcommand, Serialize)]
pub enum SimulateAction {
    Sweep(SweepArgs),
}

#[derive(Debug, Subcommand, Serialize)]
pub enum VerifyAction {
    All(VerifyArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MeasureArgs {
    /// rademacher, uniform, exp, pnorm or tabulated
    #[arg(long)]
    pub measure: String,
    /// exponent for pnorm
    #[arg(long)]
    pub p: Option<f64>,
    /// two-column CSV (x, f(x)) with header, for --measure tabulated
    #[arg(long)]
    pub density: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ToleranceArgs {
    #[arg(long, default_value_t = 1e-10)]
    pub tol_newton: f64,
    #[arg(long, default_value_t = 1e-12)]
    pub tol_quad: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct DistInfoArgs {
    #[command(flatten)]
    pub measure: MeasureArgs,
    #[command(flatten)]
    pub tol: ToleranceArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct CramerTableArgs {
    #[command(flatten)]
    pub measure: MeasureArgs,
    #[arg(long)]
    pub x_min: f64,
    #[arg(long)]
    pub x_max: f64,
    #[arg(long)]
    pub steps: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub tol: ToleranceArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct ConstantsArgs {
    #[command(flatten)]
    pub measure: MeasureArgs,
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0.25)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[command(flatten)]
    pub tol: ToleranceArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub measure: MeasureArgs,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub rho_min: f64,
    #[arg(long)]
    pub rho_max: f64,
    #[arg(long)]
    pub rho_steps: usize,
    #[arg(long)]
    pub replicates: usize,
    #[arg(long)]
    pub test_points: usize,
    #[arg(long, default_value_t = 0.25)]
    pub delta: f64,
    #[arg(long, default_value_t = 0.1)]
    pub epsilon: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// also write the two-block plot dataset here
    #[arg(long)]
    pub plot_data: Option<PathBuf>,
    /// N_max·M·R ceiling; defaults to $HULLTHRESH_OP_CAP or 5e9
    #[arg(long)]
    pub op_cap: Option<f64>,
    #[command(flatten)]
    pub tol: ToleranceArgs,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub op_cap: Option<f64>,
}

/// Parse `args` and run, writing results to `out` and diagnostics to `err`.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    let op = command_name(&cli.command);
    match dispatch(&cli, out, err) {
        Ok(code) => code,
        Err(e) => {
            let line = e.to_string().replace('\n', " ");
            if e.is_validation() {
                let _ = writeln!(err, "error: {line}");
                2
            } else {
                let _ = writeln!(err, "error in `{op}`: {line}");
                1
            }
        }
    }
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Dist { .. } => "dist info",
        Command::Cramer { .. } => "cramer table",
        Command::Threshold { .. } => "threshold constants",
        Command::Simulate { .. } => "simulate sweep",
        Command::Verify { .. } => "verify all",
    }
}

fn dispatch(cli: &Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    let config = serde_json::to_value(&cli.command)?;
    match &cli.command {
        Command::Dist {
            action: DistAction::Info(a),
        } => dist_info(a, config, out),
        Command::Cramer {
            action: CramerAction::Table(a),
        } => cramer_table(a, config, out),
        Command::Threshold {
            action: ThresholdAction::Constants(a),
        } => threshold_constants(a, config, out),
        Command::Simulate {
            action: SimulateAction::Sweep(a),
        } => simulate_sweep(a, config, out, err),
        Command::Verify {
            action: VerifyAction::All(a),
        } => verify_all(a, config, out, err),
    }
    .inspect(|_code| {
        let _ = out.flush();
    })
}

/// JSON number, with ±inf as the strings "inf"/"-inf" and NaN as null.
pub fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(x)
    } else if x.is_nan() {
        Value::Null
    } else if x > 0.0 {
        json!("inf")
    } else {
        json!("-inf")
    }
}

fn opt_num(x: Option<f64>) -> Value {
    x.map(num).unwrap_or(Value::Null)
}

fn with_meta(mut body: Map<String, Value>, config: Value) -> Value {
    body.insert("version".into(), json!(VERSION));
    body.insert("config".into(), config);
    Value::Object(body)
}

fn resolve_measure(m: &MeasureArgs) -> Result<MeasureSpec> {
    if m.measure == "tabulated" {
        let path = m
            .density
            .as_ref()
            .ok_or_else(|| Error::invalid("measure `tabulated` requires --density FILE"))?;
        return Ok(MeasureSpec::tabulated(TabulatedDensity::from_csv(path)?));
    }
    if m.density.is_some() {
        return Err(Error::invalid(
            "--density is only valid with --measure tabulated",
        ));
    }
    if m.p.is_some() && m.measure != "pnorm" {
        return Err(Error::invalid("--p is only valid with --measure pnorm"));
    }
    MeasureSpec::from_name(&m.measure, m.p)
}

fn build_profile(m: &MeasureArgs, tol: &ToleranceArgs) -> Result<CramerProfile> {
    for (name, v) in [
        ("--tol-newton", tol.tol_newton),
        ("--tol-quad", tol.tol_quad),
    ] {
        if !(v > 0.0 && v < 1.0) {
            return Err(Error::invalid(format!("{name} must lie in (0, 1)")));
        }
    }
    CramerProfile::build(
        resolve_measure(m)?,
        ProfileOptions {
            tol_newton: tol.tol_newton,
            tol_quad: tol.tol_quad,
            ..Default::default()
        },
    )
}

fn open_out<'a>(path: &Option<PathBuf>, stdout: &'a mut dyn Write) -> Result<Box<dyn Write + 'a>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(stdout),
    })
}

fn write_json_line(out: &mut dyn Write, v: &Value) -> Result<()> {
    serde_json::to_writer(&mut *out, v)?;
    writeln!(out)?;
    Ok(())
}

fn dist_info(a: &DistInfoArgs, config: Value, out: &mut dyn Write) -> Result<i32> {
    let profile = build_profile(&a.measure, &a.tol)?;
    let spec = profile.spec();
    let mut body = Map::new();
    body.insert("measure".into(), json!(spec.label()));
    body.insert("x_star".into(), num(spec.x_star()));
    body.insert("t_star".into(), num(spec.t_star()));
    body.insert("atomic".into(), json!(spec.is_atomic()));
    body.insert("variance".into(), num(spec.variance()));
    body.insert("admissible".into(), json!(spec.admissible()));
    body.insert(
        "lambda_star_condition".into(),
        json!(spec.lambda_star_condition()),
    );
    body.insert("x_max_eval".into(), num(profile.x_max_eval()));
    write_json_line(out, &with_meta(body, config))?;
    Ok(0)
}

fn cramer_table(a: &CramerTableArgs, config: Value, out: &mut dyn Write) -> Result<i32> {
    if a.steps < 2 {
        return Err(Error::invalid("--steps must be at least 2"));
    }
    if !(a.x_min.is_finite() && a.x_max.is_finite() && a.x_min < a.x_max) {
        return Err(Error::invalid("need finite --x-min < --x-max"));
    }
    let profile = build_profile(&a.measure, &a.tol)?;
    let xm = profile.x_max_eval();
    if a.x_min.abs() > xm || a.x_max.abs() > xm {
        return Err(Error::domain(
            "cramer table",
            if a.x_max.abs() > xm { a.x_max } else { a.x_min },
            format!("requires |x| <= x_max_eval = {}", fmt_g17(xm)),
        ));
    }
    let xs: Vec<f64> = (0..a.steps)
        .map(|k| {
            if k + 1 == a.steps {
                a.x_max
            } else {
                a.x_min + (a.x_max - a.x_min) * k as f64 / (a.steps - 1) as f64
            }
        })
        .collect();
    let mut rows = Vec::with_capacity(xs.len());
    for &x in &xs {
        rows.push(profile.cramer_transform(x)?);
    }
    let mut w = open_out(&a.out, out)?;
    write_header(&mut *w, &config)?;
    writeln!(w, "x,lambda_star,h,m,ratio")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            fmt_g17(r.x),
            fmt_g17(r.lambda_star),
            fmt_g17(r.h_of_x),
            fmt_g17(r.tail_m),
            fmt_g17(r.ratio)
        )?;
    }
    w.flush()?;
    Ok(0)
}

fn write_header(w: &mut dyn Write, config: &Value) -> Result<()> {
    writeln!(w, "# hullthresh {VERSION}")?;
    writeln!(w, "# config {}", serde_json::to_string(config)?)?;
    Ok(())
}

fn window_or_none(
    consts: &thresholds::ThresholdConstants,
    n: usize,
    delta: f64,
    eps: f64,
) -> Result<Option<Window>> {
    match thresholds::theoretical_window(consts, n, delta, eps) {
        Ok(w) => Ok(Some(w)),
        Err(Error::NotApplicable(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

fn check_delta_eps(delta: f64, eps: f64) -> Result<()> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::invalid("--delta must lie in (0, 0.5)"));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::invalid("--epsilon must lie in (0, 1)"));
    }
    Ok(())
}

fn threshold_constants(a: &ConstantsArgs, config: Value, out: &mut dyn Write) -> Result<i32> {
    if a.n == 0 {
        return Err(Error::invalid("--n must be at least 1"));
    }
    check_delta_eps(a.delta, a.epsilon)?;
    let profile = build_profile(&a.measure, &a.tol)?;
    let c = thresholds::constants(&profile)?;
    let window = window_or_none(&c, a.n, a.delta, a.epsilon)?;
    let mut body = Map::new();
    body.insert("measure".into(), json!(profile.spec().label()));
    body.insert("t1".into(), num(c.t1));
    body.insert("var_star".into(), num(c.var_star));
    body.insert("beta".into(), num(c.beta));
    body.insert("kappa_vol".into(), opt_num(c.kappa_vol));
    body.insert("rho1_lower".into(), opt_num(window.map(|w| w.rho1_lower)));
    body.insert("rho2_upper".into(), opt_num(window.map(|w| w.rho2_upper)));
    body.insert("admissible".into(), json!(c.admissible));
    body.insert("warnings".into(), json!(c.warnings));
    write_json_line(out, &with_meta(body, config))?;
    Ok(0)
}

fn simulate_sweep(
    a: &SweepArgs,
    config: Value,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32> {
    if a.rho_steps == 0 {
        return Err(Error::invalid("--rho-steps must be at least 1"));
    }
    if !(a.rho_min > 0.0 && a.rho_min.is_finite() && a.rho_max.is_finite()) {
        return Err(Error::invalid("need finite --rho-min > 0 and --rho-max"));
    }
    if a.rho_steps == 1 && a.rho_max != a.rho_min || a.rho_steps > 1 && !(a.rho_max > a.rho_min) {
        return Err(Error::invalid(
            "need --rho-max > --rho-min (or equal with --rho-steps 1)",
        ));
    }
    check_delta_eps(a.delta, a.epsilon)?;
    let op_cap = match a.op_cap {
        Some(c) if c > 0.0 => c,
        Some(_) => return Err(Error::invalid("--op-cap must be positive")),
        None => polytope::op_cap_from_env()?,
    };
    let rho_grid: Vec<f64> = if a.rho_steps == 1 {
        vec![a.rho_min]
    } else {
        (0..a.rho_steps)
            .map(|k| {
                if k + 1 == a.rho_steps {
                    a.rho_max
                } else {
                    a.rho_min + (a.rho_max - a.rho_min) * k as f64 / (a.rho_steps - 1) as f64
                }
            })
            .collect()
    };
    let profile = build_profile(&a.measure, &a.tol)?;
    let consts = thresholds::constants(&profile)?;
    for w in &consts.warnings {
        let _ = writeln!(err, "warning: {w}");
    }
    let cfg = SweepConfig {
        n: a.n,
        rho_grid,
        replicates: a.replicates,
        test_points: a.test_points,
        delta: a.delta,
        seed: a.seed,
        op_cap,
    };
    let grid = polytope::sweep(profile.spec(), &cfg)?;
    let window = window_or_none(&consts, a.n, a.delta, a.epsilon)?;

    let mut config = config;
    if let Some(obj) = config
        .pointer_mut("/Simulate/action/Sweep")
        .and_then(Value::as_object_mut)
    {
        obj.insert("op_cap".into(), num(op_cap));
    }
    let mut w = open_out(&a.out, out)?;
    write_header(&mut *w, &config)?;
    write_sweep_csv(&mut *w, &grid)?;
    let mut tail = Map::new();
    tail.insert("rho_hat_low".into(), opt_num(grid.rho_hat_low));
    tail.insert("rho_hat_high".into(), opt_num(grid.rho_hat_high));
    tail.insert("t1_reference".into(), num(consts.t1));
    write_json_line(&mut *w, &with_meta(tail, config.clone()))?;
    w.flush()?;
    drop(w);
    if let Some(path) = &a.plot_data {
        emit_plot_data(&grid, consts.t1, window.as_ref(), path, &config)?;
    }
    Ok(0)
}

pub fn write_sweep_csv(w: &mut dyn Write, grid: &SweepGrid) -> Result<()> {
    writeln!(w, "n,rho,N,mean,ci_half,replicates,test_points")?;
    for r in &grid.rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            r.n,
            fmt_g17(r.rho),
            r.big_n,
            fmt_g17(r.mean),
            fmt_g17(r.ci_half),
            r.replicates,
            r.test_points
        )?;
    }
    Ok(())
}

/// Two whitespace-separated blocks split by a blank line: the curve
/// (rho, mean, ci_half, N), then vertical reference lines (label, rho).
pub fn emit_plot_data(
    grid: &SweepGrid,
    t1: f64,
    window: Option<&Window>,
    path: &Path,
    config: &Value,
) -> Result<()> {
    if grid.rows.is_empty() {
        return Err(Error::invalid("cannot emit plot data for an empty sweep"));
    }
    let mut w = BufWriter::new(File::create(path)?);
    write_header(&mut w, config)?;
    writeln!(w, "# curve: rho mean ci_half N")?;
    for r in &grid.rows {
        writeln!(
            w,
            "{} {} {} {}",
            fmt_g17(r.rho),
            fmt_g17(r.mean),
            fmt_g17(r.ci_half),
            r.big_n
        )?;
    }
    writeln!(w)?;
    writeln!(w)?;
    writeln!(w, "# references: label rho")?;
    writeln!(w, "t1 {}", fmt_g17(t1))?;
    match window {
        Some(win) => {
            writeln!(w, "rho1_lower {}", fmt_g17(win.rho1_lower))?;
            writeln!(w, "rho2_upper {}", fmt_g17(win.rho2_upper))?;
        }
        None => writeln!(w, "# theoretical window not applicable at n = {}", grid.n)?,
    }
    if let Some(lo) = grid.rho_hat_low {
        writeln!(w, "rho_hat_low {}", fmt_g17(lo))?;
    }
    if let Some(hi) = grid.rho_hat_high {
        writeln!(w, "rho_hat_high {}", fmt_g17(hi))?;
    }
    w.flush()?;
    Ok(())
}

fn verify_all(
    a: &VerifyArgs,
    config: Value,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> Result<i32> {
    let op_cap = match a.op_cap {
        Some(c) if c > 0.0 => c,
        Some(_) => return Err(Error::invalid("--op-cap must be positive")),
        None => polytope::op_cap_from_env()?,
    };
    let report = verify::run_all(a.seed, op_cap);
    let mut config = config;
    if let Some(obj) = config
        .pointer_mut("/Verify/action/All")
        .and_then(Value::as_object_mut)
    {
        obj.insert("op_cap".into(), num(op_cap));
    }
    write_header(out, &config)?;
    write!(out, "{}", report.render())?;
    let _ = write!(err, "{}", report.render_timings());
    Ok(if report.all_pass() { 0 } else { 1 })
}

/// Entry point for the binary.
pub fn main_with_env() -> i32 {
    let stdout = io::stdout();
    let stderr = io::stderr();
    let mut out = stdout.lock();
    let mut err = stderr.lock();
    run(std::env::args_os(), &mut out, &mut err)
}
