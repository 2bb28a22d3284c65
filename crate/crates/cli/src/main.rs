//! `medboot`: mediation analysis with missing data from the command line.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use medboot::simlab::{imputation_sensitivity, run_study, GenParams, Mechanism, StudyConfig};
use medboot::{analyze, load_dataset, missing_patterns, AnalysisOptions, ImputationConfig, MissingCode, RoleSpec};

mod emit;

use emit::{AnalysisOutput, Format, SensitivityOutput, SimulationOutput};

#[derive(Parser)]
#[command(
    name = "medboot",
    version,
    about = "Mediation analysis with missing data via multiple imputation and bootstrap"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a delimited data file.
    Analyze(AnalyzeArgs),
    /// Run a simulation study over generated datasets.
    Simulate(SimulateArgs),
    /// Relative change of the `ab` estimate and SE as the number of imputations grows.
    Sensitivity(SensitivityArgs),
}

#[derive(Args)]
struct Common {
    /// Number of imputations per dataset.
    #[arg(long, default_value_t = 100)]
    nimpute: usize,
    /// Number of bootstrap replicates.
    #[arg(long, default_value_t = 1000)]
    nboot: usize,
    /// Confidence level of the bias-corrected intervals.
    #[arg(long, default_value_t = 0.95)]
    level: f64,
    #[arg(long, env = "MEDBOOT_SEED", default_value_t = 1)]
    seed: u64,
    /// Worker threads (defaults to available parallelism). Results do not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Data-augmentation iterations before the first imputation.
    #[arg(long, default_value_t = ImputationConfig::default().burn_in)]
    burn_in: usize,
    /// Data-augmentation iterations between imputations.
    #[arg(long, default_value_t = ImputationConfig::default().thin)]
    thin: usize,
}

impl Common {
    fn imputation(&self) -> ImputationConfig {
        ImputationConfig { burn_in: self.burn_in, thin: self.thin, ..ImputationConfig::with_imputations(self.nimpute) }
    }
}

#[derive(Args)]
struct AnalyzeArgs {
    #[arg(long)]
    data: PathBuf,
    /// Independent variable.
    #[arg(long)]
    x: String,
    /// Mediator.
    #[arg(long)]
    m: String,
    /// Outcome.
    #[arg(long)]
    y: String,
    /// Auxiliary variables used only by the imputation model.
    #[arg(long, value_delimiter = ',')]
    aux: Vec<String>,
    /// Numeric missing-value code, or `blank`. Empty fields are always missing.
    #[arg(long, default_value = "blank", value_parser = parse_missing_code)]
    missing_code: MissingCode,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct StudyArgs {
    /// Missingness mechanism.
    #[arg(long, value_enum)]
    mechanism: Option<MechanismArg>,
    /// Proportion of M and of Y values to delete.
    #[arg(long, default_value_t = 0.1)]
    prop: f64,
    /// Include the generated auxiliaries in the imputation model.
    #[arg(long)]
    use_aux: bool,
    /// Sample size of each generated dataset.
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = GenParams::default().a)]
    gen_a: f64,
    #[arg(long, default_value_t = GenParams::default().b)]
    gen_b: f64,
    #[arg(long, default_value_t = GenParams::default().c_prime)]
    gen_c_prime: f64,
    #[arg(long, default_value_t = GenParams::default().i_m)]
    gen_i_m: f64,
    #[arg(long, default_value_t = GenParams::default().i_y)]
    gen_i_y: f64,
    #[arg(long, default_value_t = GenParams::default().var_e_x)]
    gen_var_x: f64,
    #[arg(long, default_value_t = GenParams::default().var_e_m)]
    gen_var_e_m: f64,
    #[arg(long, default_value_t = GenParams::default().var_e_y)]
    gen_var_e_y: f64,
    /// Correlation of each auxiliary with M (first) or Y (second).
    #[arg(long, default_value_t = GenParams::default().aux_corr)]
    aux_corr: f64,
    #[command(flatten)]
    common: Common,
}

impl StudyArgs {
    fn config(&self, default_mechanism: Mechanism, reps: usize) -> StudyConfig {
        let gen = GenParams {
            a: self.gen_a,
            b: self.gen_b,
            c_prime: self.gen_c_prime,
            i_m: self.gen_i_m,
            i_y: self.gen_i_y,
            var_e_x: self.gen_var_x,
            var_e_m: self.gen_var_e_m,
            var_e_y: self.gen_var_e_y,
            aux_corr: self.aux_corr,
            ..GenParams::default()
        };
        StudyConfig {
            gen,
            n: self.n,
            mechanism: self.mechanism.map_or(default_mechanism, Mechanism::from),
            proportion: self.prop,
            use_aux: self.use_aux,
            reps,
            n_boot: self.common.nboot,
            imputation: self.common.imputation(),
            level: self.common.level,
            seed: self.common.seed,
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// Number of replications.
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    #[command(flatten)]
    study: StudyArgs,
}

#[derive(Args)]
struct SensitivityArgs {
    /// Imputation counts to compare.
    #[arg(long, value_delimiter = ',', default_values_t = [10, 20, 30, 40, 50, 60, 70, 80, 90, 100])]
    k_grid: Vec<usize>,
    /// Reference imputation count.
    #[arg(long, default_value_t = 100)]
    k_ref: usize,
    #[command(flatten)]
    study: StudyArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum MechanismArg {
    Mcar,
    Mar,
    Mnar,
}

impl From<MechanismArg> for Mechanism {
    fn from(m: MechanismArg) -> Self {
        match m {
            MechanismArg::Mcar => Mechanism::Mcar,
            MechanismArg::Mar => Mechanism::Mar,
            MechanismArg::Mnar => Mechanism::Mnar,
        }
    }
}

fn parse_missing_code(s: &str) -> std::result::Result<MissingCode, String> {
    if s.eq_ignore_ascii_case("blank") {
        return Ok(MissingCode::Blank);
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(MissingCode::Code(v)),
        _ => Err(format!("expected a number or `blank`, got `{s}`")),
    }
}

fn check_common(c: &Common) -> Result<()> {
    if c.workers == Some(0) {
        bail!("--workers must be at least 1");
    }
    Ok(())
}

/// Runs `f` on a pool with the requested number of workers.
fn with_workers<T: Send>(workers: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()
        .context("cannot start worker pool")?;
    Ok(pool.install(f))
}

fn write_report(common: &Common, render: impl FnOnce(&mut dyn Write, Format) -> Result<()>) -> Result<()> {
    match &common.output {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
            let mut out = BufWriter::new(file);
            render(&mut out, common.format)?;
            out.flush()?;
        }
        None => {
            let stdout = io::stdout();
            let mut out = stdout.lock();
            render(&mut out, common.format)?;
            out.flush()?;
        }
    }
    Ok(())
}

fn run_analyze(args: &AnalyzeArgs) -> Result<()> {
    let c = &args.common;
    check_common(c)?;
    let roles = RoleSpec::new(&args.x, &args.m, &args.y).with_aux(&args.aux);
    let ds = load_dataset(&args.data, &roles, args.missing_code)?;
    let opts = AnalysisOptions { n_boot: c.nboot, imputation: c.imputation(), level: c.level, seed: c.seed };
    let report = with_workers(c.workers, || analyze(&ds, &opts))??;
    if report.dropped() > 0 {
        eprintln!("warning: {} of {} bootstrap replicates dropped", report.dropped(), report.b_requested);
    }
    let out = AnalysisOutput::new(&ds, &missing_patterns(&ds), &report, c.nimpute, c.seed);
    write_report(c, |w, f| out.render(w, f))
}

fn run_simulate(args: &SimulateArgs) -> Result<()> {
    let c = &args.study.common;
    check_common(c)?;
    let cfg = args.study.config(Mechanism::Mcar, args.reps);
    let report = with_workers(c.workers, || run_study(&cfg))??;
    if report.meta.reps_failed > 0 {
        eprintln!("warning: {} of {} replications failed", report.meta.reps_failed, report.meta.reps);
    }
    if report.meta.dropped_replicates > 0 {
        eprintln!("warning: {} bootstrap replicates dropped across replications", report.meta.dropped_replicates);
    }
    let out = SimulationOutput::from(report);
    write_report(c, |w, f| out.render(w, f))
}

fn run_sensitivity(args: &SensitivityArgs) -> Result<()> {
    let c = &args.study.common;
    check_common(c)?;
    let cfg = args.study.config(Mechanism::Mnar, 1);
    let rows = with_workers(c.workers, || imputation_sensitivity(&cfg, &args.k_grid, args.k_ref))??;
    let out = SensitivityOutput::new(&cfg, args.k_ref, rows);
    write_report(c, |w, f| out.render(w, f))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Analyze(a) => run_analyze(a),
        Command::Simulate(s) => run_simulate(s),
        Command::Sensitivity(s) => run_sensitivity(s),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
