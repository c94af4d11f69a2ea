use clap::{Parser, Subcommand};
use raman_echo::cli::{
    cmd_efficiency, cmd_figure, cmd_match, cmd_simulate, cmd_spectra, CliError, SweepSpec,
};
use raman_echo::config::RunConfig;
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "raman-echo-sim",
    version,
    about = "Cavity Raman photon-echo memory analysis"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// S-function, SS-function and echo filter on the configured grid.
    Spectra {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Long-format surface sweep, e.g. 'delta_in=0.1:0.5:5'.
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Storage/echo efficiency and fidelity versus input spectral width.
    Efficiency {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Sweep override, e.g. 'dw_f=0.02:0.4:20'.
        #[arg(long)]
        sweep: Option<String>,
    },
    /// Matching-condition residuals and the transmission working numbers.
    Match {
        #[arg(long)]
        config: PathBuf,
    },
    /// Time-domain pipeline: storage, rephasing map, retrieval, echo report.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Canonical data surfaces (ids 6-11), written as fig<id>.csv.
    Figure {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        #[arg(long)]
        fig: u32,
    },
}

fn run() -> Result<(), CliError> {
    let args = Args::parse();
    match args.command {
        Command::Spectra { config, out, sweep } => {
            let cfg = RunConfig::from_file(&config)?;
            let sweep = sweep.as_deref().map(SweepSpec::parse).transpose()?;
            std::fs::create_dir_all(&out)?;
            let path = cmd_spectra(&cfg, &out, sweep.as_ref())?;
            println!("wrote {}", path.display());
        }
        Command::Efficiency { config, out, sweep } => {
            let cfg = RunConfig::from_file(&config)?;
            let sweep = sweep.as_deref().map(SweepSpec::parse).transpose()?;
            std::fs::create_dir_all(&out)?;
            let path = cmd_efficiency(&cfg, &out, sweep.as_ref())?;
            println!("wrote {}", path.display());
        }
        Command::Match { config } => {
            let cfg = RunConfig::from_file(&config)?;
            print!("{}", cmd_match(&cfg)?);
        }
        Command::Simulate { config, out } => {
            let cfg = RunConfig::from_file(&config)?;
            for w in cfg.system.warnings() {
                eprintln!("warning: {w}");
            }
            std::fs::create_dir_all(&out)?;
            for path in cmd_simulate(&cfg, &out)? {
                println!("wrote {}", path.display());
            }
        }
        Command::Figure { config, out, fig } => {
            let cfg = RunConfig::from_file(&config)?;
            std::fs::create_dir_all(&out)?;
            let path = cmd_figure(&cfg, &out, fig)?;
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() {
    if let Err(e) = run() {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
