use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fpcr_cli::commands::{self, GenerateConfig};
use fpcr_cli::{CliError, CliResult};
use fpcr_core::function_space::Space;
use fpcr_core::inference::TestConfig;
use fpcr_core::simulation::SlopeKind;

#[derive(Parser)]
#[command(name = "fpcr", version, about = "Functional principal component regression: simulations, tests and validation")]
struct Cli {
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the size/power experiment grid from a JSON config
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Bootstrap test of no effect on a CSV dataset (header y,x_1,...,x_m)
    Test {
        #[arg(long)]
        data: PathBuf,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 1000)]
        boot: usize,
        #[arg(long, default_value = "l2")]
        space: Space,
        #[arg(long, default_value_t = 0.75)]
        fve: f64,
        #[arg(long, default_value_t = 20)]
        jmax: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run the numerical validation suite
    Validate {
        #[arg(long)]
        out: PathBuf,
    },
    /// Write one simulated dataset as CSV
    Generate {
        #[arg(long, default_value_t = 50)]
        n: usize,
        #[arg(long, default_value_t = 50)]
        m: usize,
        #[arg(long, default_value_t = 0.0)]
        c: f64,
        #[arg(long, default_value = "sparsest")]
        slope: SlopeKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(k) = cli.threads {
        if k == 0 {
            return Err(CliError::Input("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global()
            .map_err(|e| CliError::Other(e.into()))?;
    }
    match cli.command {
        Cmd::Simulate { config, out } => {
            let path = commands::simulate(&config, &out)?;
            println!("wrote {}", path.display());
        }
        Cmd::Test {
            data,
            alpha,
            boot,
            space,
            fve,
            jmax,
            seed,
            out,
        } => {
            let cfg = TestConfig {
                alpha,
                bootstrap: boot,
                space,
                fve_threshold: fve,
                j_max: jmax,
                seed,
            };
            commands::test(&data, &cfg, &out)?;
        }
        Cmd::Validate { out } => {
            commands::validate(&out)?;
        }
        Cmd::Generate {
            n,
            m,
            c,
            slope,
            seed,
            out,
        } => {
            let cfg = GenerateConfig {
                n,
                m,
                c,
                slope_kind: slope,
                seed,
            };
            commands::generate(&cfg, &out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("fpcr: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
