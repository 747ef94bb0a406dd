//! `biprobit` subcommands. [`run`] parses arguments, executes one
//! subcommand and returns the process exit status.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use biprobit_core::data::{
    build_design, build_dyads, load_departments, load_scholars, load_seminars, read_dyads, write_dyads,
    DesignSpec, DEFAULT_REFERENCE_YEAR,
};
use biprobit_core::estimator::{fit_biprobit_partial, fit_probit_design, lr_test_rho, FitOptions};
use biprobit_core::query::{predict, prob_ratio, Coefficients, Equation};
use biprobit_core::report::{lr_test_reports, FitReport};
use biprobit_core::simulate::{monte_carlo, simulate, write_output, McReport, SimConfig};
use clap::{Args, Parser, Subcommand};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] biprobit_core::Error),
    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_numerical() => 2,
            _ => 1,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "biprobit", version, about = "Partial-observability bivariate probit toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a synthetic market and write its rosters, seminars and dyads.
    Simulate {
        /// JSON simulation config; defaults are used for absent fields.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Cross departments with scholars into the dyad table.
    Build {
        #[arg(long)]
        departments: PathBuf,
        #[arg(long)]
        scholars: PathBuf,
        #[arg(long)]
        seminars: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_REFERENCE_YEAR)]
        reference_year: i32,
    },
    /// Estimate on a dyad table and write a JSON report.
    Fit(FitArgs),
    /// Likelihood-ratio test of rho = 0 from two fit reports.
    Lrtest {
        #[arg(long)]
        unrestricted: PathBuf,
        #[arg(long)]
        restricted: PathBuf,
    },
    /// Monte Carlo study: simulate and fit repeatedly.
    Mc {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        reps: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the full report, including every replication, as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predicted probability at given covariate values.
    Predict(QueryArgs),
    /// Ratio of counterfactual to baseline predicted probability.
    Ratio {
        #[command(flatten)]
        query: QueryArgs,
        /// Covariate overrides applied on top of the baseline.
        #[arg(long = "counterfactual", value_name = "NAME=VALUE")]
        counterfactual: Vec<String>,
    },
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Dyad table as written by `build`.
    #[arg(long)]
    design: PathBuf,
    /// `affiliation`, `citations`, or a JSON design spec.
    #[arg(long, default_value = "affiliation")]
    spec: String,
    #[arg(long, conflicts_with = "biprobit")]
    probit: bool,
    #[arg(long)]
    biprobit: bool,
    #[arg(long, conflicts_with = "probit")]
    fix_rho: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    starts: Option<usize>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct QueryArgs {
    /// Coefficient file or fit report.
    #[arg(long)]
    params: PathBuf,
    #[arg(long)]
    equation: String,
    #[arg(long = "set", value_name = "NAME=VALUE")]
    set: Vec<String>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| biprobit_core::Error::Io { path: path.into(), source: e }.into())
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| biprobit_core::Error::Io { path: path.into(), source: e }.into())
}

fn load_config(path: Option<&Path>, seed: Option<u64>) -> Result<SimConfig> {
    let mut cfg = match path {
        Some(p) => SimConfig::from_json(&read(p)?)?,
        None => SimConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn load_spec(spec: &str) -> Result<DesignSpec> {
    if let Some(s) = DesignSpec::preset(spec) {
        return Ok(s);
    }
    let text = read(Path::new(spec))?;
    let s: DesignSpec = serde_json::from_str(&text).map_err(biprobit_core::Error::from)?;
    s.check_exclusion_restriction()?;
    Ok(s)
}

fn load_params(path: &Path) -> Result<Coefficients> {
    let text = read(path)?;
    if let Ok(c) = serde_json::from_str::<Coefficients>(&text) {
        return Ok(c);
    }
    match FitReport::from_json(&text) {
        Ok(r) => r.coefficients.ok_or_else(|| {
            CliError::Usage(format!("{}: report has no two-equation coefficients", path.display()))
        }),
        Err(_) => {
            let err = serde_json::from_str::<Coefficients>(&text).unwrap_err();
            Err(CliError::Usage(format!("{}: not a parameter file: {err}", path.display())))
        }
    }
}

fn parse_assignments(items: &[String], flag: &str) -> Result<BTreeMap<String, f64>> {
    let mut out = BTreeMap::new();
    for item in items {
        let (name, value) = item
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("--{flag} expects NAME=VALUE, got `{item}`")))?;
        let v: f64 = value
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("--{flag} {name}: `{value}` is not a number")))?;
        out.insert(name.trim().to_string(), v);
    }
    Ok(out)
}

fn cmd_simulate(config: Option<&Path>, out_dir: &Path, seed: Option<u64>, stdout: &mut dyn Write) -> Result<()> {
    let cfg = load_config(config, seed)?;
    let out = simulate(&cfg)?;
    write_output(out_dir, &out, &cfg)?;
    let n = out.dyads.len();
    let _ = writeln!(
        stdout,
        "simulated {} departments, {} scholars, {n} dyads, {} seminars (rate {:.4})",
        out.departments.len(),
        out.scholars.len(),
        out.seminars.len(),
        out.seminars.len() as f64 / n as f64
    );
    Ok(())
}

fn cmd_build(
    departments: &Path,
    scholars: &Path,
    seminars: &Path,
    out: &Path,
    reference_year: i32,
    stdout: &mut dyn Write,
    stderr: &mut dyn Write,
) -> Result<()> {
    let depts = load_departments(departments)?;
    let schol = load_scholars(scholars, reference_year)?;
    let events = load_seminars(seminars)?;
    for (file, rejected) in [(departments, &depts.rejected), (scholars, &schol.rejected)] {
        for r in rejected {
            let _ = writeln!(stderr, "{}: line {}: {} excluded: {}", file.display(), r.line, r.id, r.reason);
        }
    }
    let built = build_dyads(&depts.records, &schol.records, &events, reference_year)?;
    let file = File::create(out).map_err(|e| biprobit_core::Error::Io { path: out.into(), source: e })?;
    write_dyads(BufWriter::new(file), &built.dyads)?;
    let r = &built.report;
    let _ = writeln!(
        stdout,
        "{} dyads from {} departments x {} scholars ({} own-department pairs excluded)\n\
         {} seminars matched; {} duplicates collapsed; {} own-department events and {} unknown presenters dropped",
        r.n_dyads,
        r.n_departments,
        r.n_scholars,
        r.own_department_pairs,
        r.n_seminars_matched,
        r.duplicate_events_collapsed,
        r.own_department_events_dropped,
        r.unknown_presenters_dropped
    );
    if !r.scholars_without_department.is_empty() {
        let _ = writeln!(
            stderr,
            "{} scholars have an affiliation outside the department roster and were skipped",
            r.scholars_without_department.len()
        );
    }
    Ok(())
}

fn cmd_fit(a: &FitArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let spec = load_spec(&a.spec)?;
    let file = File::open(&a.design).map_err(|e| biprobit_core::Error::Io { path: a.design.clone(), source: e })?;
    let dyads = read_dyads(file, &a.design.display().to_string())?;
    let design = build_design(&dyads, &spec, true)?;
    if design.dropped_missing > 0 {
        let _ = writeln!(stderr, "dropped {} dyads with missing covariates", design.dropped_missing);
    }
    let defaults = FitOptions::default();
    let options = FitOptions {
        seed: a.seed,
        n_starts: a.starts.unwrap_or(defaults.n_starts),
        max_iterations: a.max_iterations.unwrap_or(defaults.max_iterations),
        fix_rho_at_zero: a.fix_rho,
        ..defaults
    };
    let report = if a.probit {
        let fit = fit_probit_design(&design, &options)?;
        FitReport::new(&fit, &design, &options)?
    } else {
        let fit = fit_biprobit_partial(&design, &options)?;
        let mut report = FitReport::new(&fit, &design, &options)?;
        if !a.fix_rho && fit.converged {
            let restricted = FitOptions { fix_rho_at_zero: true, ..options.clone() };
            let r = fit_biprobit_partial(&design, &restricted)?;
            report.lr_test_rho = Some(lr_test_rho(&fit, &r)?);
        }
        report
    };
    write(&a.out, &report.to_json()?)?;
    let _ = write!(stdout, "{}", report.to_table());
    if !report.converged {
        return Err(biprobit_core::Error::NoConvergence { starts: report.start_log.len() }.into());
    }
    Ok(())
}

fn cmd_lrtest(unrestricted: &Path, restricted: &Path, stdout: &mut dyn Write) -> Result<()> {
    let u = FitReport::from_json(&read(unrestricted)?)?;
    let r = FitReport::from_json(&read(restricted)?)?;
    let lr = lr_test_reports(&u, &r)?;
    let _ = writeln!(stdout, "{}", serde_json::to_string_pretty(&lr).map_err(biprobit_core::Error::from)?);
    Ok(())
}

fn mc_table(rep: &McReport) -> String {
    let mut s = format!(
        "{} replications, {} failed\n{:<28}{:>9}{:>9}{:>9}{:>9}{:>9}{:>9}\n",
        rep.n_replications, rep.n_failed, "parameter", "truth", "mean", "bias", "mc_se", "rmse", "cover95"
    );
    for p in &rep.parameters {
        s += &format!(
            "{:<28}{:>9.4}{:>9.4}{:>9.4}{:>9.4}{:>9.4}{:>9.3}\n",
            p.name, p.truth, p.mean, p.bias, p.mc_se, p.rmse, p.coverage_95
        );
    }
    s += &format!("LR rejection rate at 5%: {:.4}\n", rep.lr_rejection_rate);
    if rep.degenerate_mc_se {
        s += "Monte Carlo SE is degenerate (fewer than two successful replications).\n";
    }
    s
}

fn cmd_mc(
    config: Option<&Path>,
    reps: usize,
    seed: Option<u64>,
    out: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<()> {
    let cfg = load_config(config, seed)?;
    let rep = monte_carlo(&cfg, reps, &cfg.fit)?;
    if let Some(path) = out {
        write(path, &(serde_json::to_string_pretty(&rep).map_err(biprobit_core::Error::from)? + "\n"))?;
    }
    let _ = write!(stdout, "{}", mc_table(&rep));
    Ok(())
}

fn cmd_query(q: &QueryArgs, counterfactual: Option<&[String]>, stdout: &mut dyn Write) -> Result<()> {
    let coefs = load_params(&q.params)?;
    let eq: Equation = q.equation.parse()?;
    let baseline = parse_assignments(&q.set, "set")?;
    match counterfactual {
        None => {
            let p = predict(eq, &baseline, &coefs)?;
            let _ = writeln!(stdout, "{eq} probability: {}", p.get());
        }
        Some(items) => {
            let mut cf = baseline.clone();
            cf.extend(parse_assignments(items, "counterfactual")?);
            let r = prob_ratio(eq, &baseline, &cf, &coefs)?;
            let _ = writeln!(
                stdout,
                "{eq} probability: baseline {}, counterfactual {}\nratio: {}",
                r.baseline, r.counterfactual, r.ratio
            );
        }
    }
    Ok(())
}

fn dispatch(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Simulate { config, out, seed } => cmd_simulate(config.as_deref(), &out, seed, stdout),
        Command::Build {
            departments,
            scholars,
            seminars,
            out,
            reference_year,
        } => cmd_build(&departments, &scholars, &seminars, &out, reference_year, stdout, stderr),
        Command::Fit(a) => cmd_fit(&a, stdout, stderr),
        Command::Lrtest { unrestricted, restricted } => cmd_lrtest(&unrestricted, &restricted, stdout),
        Command::Mc { config, reps, seed, out } => cmd_mc(config.as_deref(), reps, seed, out.as_deref(), stdout),
        Command::Predict(q) => cmd_query(&q, None, stdout),
        Command::Ratio { query, counterfactual } => cmd_query(&query, Some(&counterfactual), stdout),
    }
}

/// Runs one subcommand. Exit status: 0 on success, 1 for invalid input or
/// usage, 2 for numerical failure.
pub fn run<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{}", e.render());
                return 1;
            }
            let _ = write!(stdout, "{}", e.render());
            return 0;
        }
    };
    match dispatch(cli, stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}
