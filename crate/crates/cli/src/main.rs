mod config;

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use config::ConfigFile;
use gpm_core::compat::equivalence_report;
use gpm_core::geometry::{
    covering_radius, perturbed_lattice, read_points_csv, uniform_volumes, voronoi_decompose, write_points_csv,
    ParticleSystem, RectDomain,
};
use gpm_core::harness::{
    influence_radius_checked, parse_dx_levels, run_study, write_gnuplot, write_study_csv, DomainConfig, StudyConfig,
};
use gpm_core::indicators::{regularity_report, voronoi_deviation, write_indicator_csv, IndicatorRow, DEFAULT_LP_CAP};
use gpm_core::operators::OperatorKind;
use gpm_core::weights::{
    catalog, catalog_weight, check_admissible, check_moment_order, check_smoothness_order, construct_polynomial_weight,
    RadialWeight,
};

#[derive(Parser)]
#[command(
    name = "gpm",
    version,
    about = "Generalized particle method: lattices, indicators, weights, convergence studies"
)]
struct Cli {
    /// JSON file with flag values grouped by subcommand; flags on the
    /// command line take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Log progress to stderr
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Perturbed lattice on the unit square with uniform volumes
    Gen(GenArgs),
    /// Covering radius, Voronoi deviation and c0 of a point set
    Indicators(IndicatorArgs),
    /// Inspect or construct reference weights
    #[command(subcommand)]
    Weights(WeightsCommand),
    /// Truncation-error study over a sequence of lattice spacings
    Convergence(ConvergenceArgs),
    /// SPH/MPS against the generalized operators
    CompatCheck(CompatArgs),
}

#[derive(Subcommand)]
enum WeightsCommand {
    Check(CheckArgs),
    Construct(ConstructArgs),
}

/// A single real, also accepted as `2^-5`.
fn parse_real(s: &str) -> Result<f64, String> {
    match parse_dx_levels(s).map_err(|e| e.to_string())?.as_slice() {
        [v] => Ok(*v),
        _ => Err(format!("expected one number, got `{s}`")),
    }
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct GenArgs {
    #[arg(long, value_parser = parse_real)]
    dx: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Bound on the lattice perturbation, in units of dx [default: 0.25]
    #[arg(long)]
    noise: Option<f64>,
    /// Extension width H of the computational box [default: 0.1]
    #[arg(long)]
    extension: Option<f64>,
    /// Output CSV (`id,x,y,volume`); stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct IndicatorArgs {
    /// Point CSV as written by `gen`
    #[arg(long)]
    pts: Option<PathBuf>,
    /// Largest N solved exactly; above it the greedy bound is reported
    #[arg(long)]
    exact_lp_cap: Option<usize>,
    /// Influence radius for c0 [default: from dx and m]
    #[arg(long)]
    h: Option<f64>,
    /// Regularity order [default: 5]
    #[arg(long)]
    m: Option<f64>,
    /// Lattice spacing [default: sqrt(|Omega_H| / N)]
    #[arg(long, value_parser = parse_real)]
    dx: Option<f64>,
    #[arg(long)]
    extension: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct CheckArgs {
    /// Catalog name (I1..I3, G1..G3, L1..L3, spline2d, mps-classic)
    #[arg(long)]
    name: Option<String>,
    /// Weight definition as JSON instead of a catalog name
    #[arg(long, conflicts_with = "name")]
    file: Option<PathBuf>,
    /// Write the checked weight as JSON
    #[arg(long)]
    export: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct ConstructArgs {
    #[arg(long)]
    d: Option<usize>,
    /// Moment order
    #[arg(long)]
    n: Option<u32>,
    /// Polynomial degree
    #[arg(long)]
    p: Option<usize>,
    /// JSON output; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct ConvergenceArgs {
    #[arg(long)]
    m: Option<f64>,
    #[arg(long)]
    weight: Option<String>,
    /// interp, grad or lap
    #[arg(long)]
    op: Option<OperatorKind>,
    /// `2^-5..2^-9` or a comma list
    #[arg(long)]
    dx_levels: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long)]
    extension: Option<f64>,
    #[arg(long)]
    exact_lp_cap: Option<usize>,
    /// Grid size per axis for the denominator of the relative error
    #[arg(long)]
    denominator_samples: Option<usize>,
    /// Exact d_N on a small window of each level [default: true]
    #[arg(long)]
    spot_check: Option<bool>,
    /// Study CSV; the error-vs-h plot data goes next to it with extension .dat
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
struct CompatArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// Random configurations
    #[arg(long)]
    configs: Option<usize>,
    /// Particles per configuration
    #[arg(long)]
    n: Option<usize>,
}

type CliResult<T> = Result<T, String>;

fn required<T>(v: Option<T>, flag: &str) -> CliResult<T> {
    v.ok_or_else(|| format!("missing --{flag} (flag or config file)"))
}

fn sink(path: Option<&Path>) -> CliResult<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| format!("{}: {e}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout())),
    })
}

fn unit_square(extension: Option<f64>) -> CliResult<RectDomain> {
    RectDomain::unit_cube(2, extension.unwrap_or(DomainConfig::default().extension)).map_err(|e| e.to_string())
}

fn gen(args: GenArgs) -> CliResult<ExitCode> {
    let dx = required(args.dx, "dx")?;
    let domain = unit_square(args.extension)?;
    let coords = perturbed_lattice(dx, args.noise.unwrap_or(0.25), args.seed.unwrap_or(0), &domain)
        .map_err(|e| e.to_string())?;
    let volumes = uniform_volumes(coords.len() / 2, &domain);
    write_points_csv(sink(args.out.as_deref())?, &coords, &volumes).map_err(|e| e.to_string())?;
    log::info!("wrote {} particles", volumes.len());
    Ok(ExitCode::SUCCESS)
}

fn indicators(args: IndicatorArgs) -> CliResult<ExitCode> {
    let path = required(args.pts, "pts")?;
    let file = File::open(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let (coords, volumes) = read_points_csv(file).map_err(|e| e.to_string())?;
    let domain = unit_square(args.extension)?;
    let n = volumes.len();
    let m = args.m.unwrap_or(5.0);
    let dx = args
        .dx
        .unwrap_or_else(|| (domain.extended_volume() / n.max(1) as f64).sqrt());
    let h = match args.h {
        Some(h) => h,
        None => influence_radius_checked(dx, m, domain.extension()).map_err(|e| e.to_string())?,
    };
    let ps = ParticleSystem::new(&domain, coords, volumes, h).map_err(|e| e.to_string())?;
    let diagram = voronoi_decompose(&ps, &domain).map_err(|e| e.to_string())?;
    let r_n = covering_radius(&diagram, ps.coords());
    let dev =
        voronoi_deviation(&ps, &diagram, args.exact_lp_cap.unwrap_or(DEFAULT_LP_CAP)).map_err(|e| e.to_string())?;
    let report = regularity_report(r_n, dev.value, h, m).map_err(|e| e.to_string())?;
    let row = IndicatorRow {
        level: 0,
        dx,
        h,
        n,
        r_n,
        d_n_kind: dev.kind,
        d_n: dev.value,
        c0: report.c0,
    };
    write_indicator_csv(sink(args.out.as_deref())?, &[row], m).map_err(|e| e.to_string())?;
    Ok(ExitCode::SUCCESS)
}

fn mark(ok: bool) -> &'static str {
    if ok {
        "pass"
    } else {
        "FAIL"
    }
}

fn weights_check(args: CheckArgs) -> CliResult<ExitCode> {
    let w: RadialWeight = match (&args.name, &args.file) {
        (Some(name), None) => catalog_weight(name).map_err(|e| e.to_string())?,
        (None, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            RadialWeight::from_json(&text).map_err(|e| e.to_string())?
        }
        _ => return Err("give exactly one of --name and --file".into()),
    };
    let mut out = io::stdout().lock();
    let claimed_k = w.smooth_order.map_or("-".to_string(), |k| k.to_string());
    let _ = writeln!(
        out,
        "weight {} (d = {}, claimed n = {}, k = {claimed_k})",
        w.name, w.dim, w.moment_order
    );
    if let Some(c) = catalog().corrections.iter().find(|c| c.name == w.name) {
        let _ = writeln!(
            out,
            "note: printed constant {:.12} gives mass {:.12}; renormalized to {:.12}",
            c.printed, c.measured_mass, c.corrected
        );
    }
    let adm = check_admissible(&w);
    let _ = writeln!(
        out,
        "admissible      {}  mass = {:.15}, continuous = {}, support [0,1] = {}",
        mark(adm.admissible()),
        adm.mass,
        adm.continuous,
        adm.support
    );
    let mom = check_moment_order(&w, w.moment_order);
    let _ = writeln!(
        out,
        "moment order {}  {}  residuals {:?}",
        w.moment_order,
        mark(mom.passed),
        mom.residuals
    );
    let mut ok = mom.passed && (adm.admissible() || w.name == "mps-classic");
    if let Some(k) = w.smooth_order {
        let s = check_smoothness_order(&w, k);
        let _ = writeln!(
            out,
            "smoothness {k}    {}  lowest degree at 0 = {:?}, C1 across breaks = {}",
            mark(s.passed),
            s.lowest_degree,
            s.c1_interior
        );
        ok &= s.passed;
    }
    if let Some(path) = &args.export {
        std::fs::write(path, w.to_json().map_err(|e| e.to_string())?)
            .map_err(|e| format!("{}: {e}", path.display()))?;
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn weights_construct(args: ConstructArgs) -> CliResult<ExitCode> {
    let w = construct_polynomial_weight(required(args.d, "d")?, required(args.n, "n")?, required(args.p, "p")?)
        .map_err(|e| e.to_string())?;
    let mut out = sink(args.out.as_deref())?;
    writeln!(out, "{}", w.to_json().map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    Ok(ExitCode::SUCCESS)
}

fn study_config(args: &ConvergenceArgs) -> CliResult<StudyConfig> {
    let mut cfg = StudyConfig::default();
    if let Some(m) = args.m {
        cfg.m = m;
    }
    if let Some(w) = &args.weight {
        cfg.weight = w.clone();
    }
    if let Some(op) = args.op {
        cfg.operator = op;
    }
    if let Some(levels) = &args.dx_levels {
        cfg.dx_levels = parse_dx_levels(levels).map_err(|e| e.to_string())?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(noise) = args.noise {
        cfg.noise = noise;
    }
    if let Some(h) = args.extension {
        cfg.domain.extension = h;
    }
    if let Some(cap) = args.exact_lp_cap {
        cfg.exact_lp_cap = cap;
    }
    if let Some(s) = args.denominator_samples {
        cfg.denominator_samples = s;
    }
    if let Some(s) = args.spot_check {
        cfg.spot_check = s;
    }
    Ok(cfg)
}

fn convergence(args: ConvergenceArgs) -> CliResult<ExitCode> {
    let cfg = study_config(&args)?;
    let out = args.out.clone().unwrap_or_else(|| PathBuf::from("study.csv"));
    let study = run_study(&cfg).map_err(|e| e.to_string())?;
    write_study_csv(sink(Some(&out))?, &study).map_err(|e| e.to_string())?;
    write_gnuplot(sink(Some(&out.with_extension("dat")))?, &study).map_err(|e| e.to_string())?;

    let mut stdout = io::stdout().lock();
    let theo = study.rate_theoretical.map_or("N/A".to_string(), |r| format!("{r}"));
    let _ = writeln!(
        stdout,
        "{} {} m = {} (theoretical rate {theo})",
        cfg.weight, cfg.operator, cfg.m
    );
    let _ = writeln!(
        stdout,
        "{:>12} {:>12} {:>8} {:>12} {:>12}",
        "dx", "h", "N", "rel_error", "rate"
    );
    let mut failed = 0;
    for (level, rate) in study.levels.iter().zip(&study.rates) {
        let err = level.rel_error.map_or("N/A".to_string(), |e| format!("{e:.4e}"));
        let rate = rate.map_or("N/A".to_string(), |r| format!("{r:.3}"));
        let _ = writeln!(
            stdout,
            "{:>12.4e} {:>12.4e} {:>8} {err:>12} {rate:>12}",
            level.dx, level.h, level.n_particles
        );
        if let Some(why) = &level.failure {
            failed += 1;
            eprintln!("warning: level dx = {} failed: {why}", level.dx);
        }
    }
    Ok(if failed == study.levels.len() {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn compat_check(args: CompatArgs) -> CliResult<ExitCode> {
    let report = equivalence_report(
        args.seed.unwrap_or(11),
        args.configs.unwrap_or(100),
        args.n.unwrap_or(50),
    )
    .map_err(|e| e.to_string())?;
    let mut out = io::stdout().lock();
    let _ = writeln!(
        out,
        "{:<16} {:>12} {:>10}  result",
        "identity", "max |diff|", "tolerance"
    );
    for c in &report {
        let _ = writeln!(
            out,
            "{:<16} {:>12.3e} {:>10.0e}  {}",
            c.name,
            c.max_abs_diff,
            c.tolerance,
            if c.passed { "PASS" } else { "FAIL" }
        );
    }
    Ok(if report.iter().all(|c| c.passed) {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn run(cli: Cli) -> CliResult<ExitCode> {
    let file = match &cli.config {
        Some(p) => ConfigFile::load(p)?,
        None => ConfigFile::empty(),
    };
    match cli.command {
        Command::Gen(a) => gen(file.merge(&["gen"], &a)?),
        Command::Indicators(a) => indicators(file.merge(&["indicators"], &a)?),
        Command::Weights(WeightsCommand::Check(a)) => weights_check(file.merge(&["weights", "check"], &a)?),
        Command::Weights(WeightsCommand::Construct(a)) => weights_construct(file.merge(&["weights", "construct"], &a)?),
        Command::Convergence(a) => convergence(file.merge(&["convergence"], &a)?),
        Command::CompatCheck(a) => compat_check(file.merge(&["compat-check"], &a)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
