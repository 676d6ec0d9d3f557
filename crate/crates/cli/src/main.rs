use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dgtime_cli::config::RunConfig;
use dgtime_cli::error::Result;
use dgtime_cli::report::{all_passed, write_csv, write_plotdata, PropertyCheck, ReportRow};
use dgtime_cli::{converge, interp, maxreg, oracle};

#[derive(Parser, Debug)]
#[command(name = "dgtime", version, about = "Discontinuous Galerkin time-stepping experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Directory for CSV and plot-data output.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Overrides `output.seed`.
    #[arg(long, global = true, value_name = "INT")]
    seed: Option<u64>,

    /// Print failures and the summary only.
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Error norms, residuals and observed orders on a manufactured problem.
    Converge,
    /// Maximal-regularity ratios for a zero initial value.
    Maxreg,
    /// Galerkin versus Radau-averaged solves and exactness cases.
    OracleCheck,
    /// Interpolation orders, reproduction and norm-equivalence checks.
    InterpCheck,
}

impl Command {
    fn stem(self) -> &'static str {
        match self {
            Command::Converge => "converge",
            Command::Maxreg => "maxreg",
            Command::OracleCheck => "oracle",
            Command::InterpCheck => "interp",
        }
    }
}

/// `--out DIR` wins over the configured path, which is relative to the config file.
fn output_path(cli: &Cli, cfg: &RunConfig, configured: Option<&Path>, file: String) -> Option<PathBuf> {
    match (&cli.out, configured) {
        (Some(dir), _) => Some(dir.join(file)),
        (None, Some(p)) => Some(cfg.resolve(p)),
        (None, None) => None,
    }
}

fn write_report(cli: &Cli, cfg: &RunConfig, rows: &[ReportRow]) -> Result<()> {
    let stem = cli.command.stem();
    if let Some(path) = output_path(cli, cfg, cfg.output.csv_path.as_deref(), format!("{stem}.csv")) {
        write_csv(File::create(path)?, rows)?;
    }
    if let Some(path) = output_path(cli, cfg, cfg.output.plotdata_path.as_deref(), format!("{stem}.dat")) {
        write_plotdata(File::create(path)?, rows)?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<Vec<PropertyCheck>> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| dgtime_cli::error::config_error("--config", "a configuration file is required"))?;
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.output.seed = seed;
    }
    if let Some(dir) = &cli.out {
        std::fs::create_dir_all(dir)?;
    }
    match cli.command {
        Command::Converge => {
            let report = converge::run_convergence(&cfg)?;
            write_report(cli, &cfg, &report.rows)?;
            Ok(report.checks)
        }
        Command::Maxreg => {
            let sweep = maxreg::run_maxreg_sweep(&cfg)?;
            write_report(cli, &cfg, &sweep.rows)?;
            Ok(sweep.checks)
        }
        Command::OracleCheck => oracle::run_oracle(&cfg),
        Command::InterpCheck => {
            let report = interp::run_interp_check(&cfg)?;
            if let Some(path) = output_path(cli, &cfg, cfg.output.csv_path.as_deref(), "interp.csv".into()) {
                interp::write_interp_csv(File::create(path)?, &report.rows)?;
            }
            Ok(report.checks)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = if cli.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(&cli) {
        Ok(checks) => {
            for c in checks.iter().filter(|c| !cli.quiet || !c.passed) {
                println!("{c}");
            }
            let passed = checks.iter().filter(|c| c.passed).count();
            println!("{passed}/{} properties passed", checks.len());
            if all_passed(&checks) {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(2)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
