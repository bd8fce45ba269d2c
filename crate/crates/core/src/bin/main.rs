use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use weylscale::cli::{load_config, run, validate_config, Experiment};

#[derive(Parser)]
#[command(
    name = "weylscale",
    version,
    about = "Scaling-limit and quasi-equivalence diagnostics for the 2d free scalar field"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Run one experiment and write its data file and manifest.json.
    Run {
        /// One of the names printed by `weylscale list`.
        experiment: String,
        #[command(flatten)]
        flags: Flags,
    },
    /// Check a config file and report every problem in it.
    Validate { file: PathBuf },
    /// Print the experiment names.
    List,
}

#[derive(Args)]
struct Flags {
    /// Flat `key = value` config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    mass: Option<String>,
    /// `start:end:count`, geometric.
    #[arg(long)]
    lambda_grid: Option<String>,
    #[arg(long)]
    grid_points: Option<String>,
    #[arg(long)]
    half_width: Option<String>,
    /// Quadrature nodes per axis of the spacetime weight.
    #[arg(long)]
    nodes: Option<String>,
    /// Output directory.
    #[arg(long)]
    output: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// csv or json.
    #[arg(long)]
    format: Option<String>,
    /// Charge profile `q:a:n`.
    #[arg(long, allow_hyphen_values = true)]
    profile: Option<String>,
    /// plus or minus.
    #[arg(long)]
    sign: Option<String>,
    /// Number of Fourier coefficients `K`.
    #[arg(long = "k", alias = "K")]
    k: Option<String>,
    #[arg(long)]
    basis_size: Option<String>,
    /// `a:b`.
    #[arg(long, allow_hyphen_values = true)]
    interval: Option<String>,
    #[arg(long)]
    samples: Option<String>,
    /// null or charged (ir-slope).
    #[arg(long)]
    symbol: Option<String>,
}

impl Flags {
    fn pairs(&self) -> Vec<(String, String)> {
        let entries = [
            ("mass", &self.mass),
            ("lambda_grid", &self.lambda_grid),
            ("grid_points", &self.grid_points),
            ("half_width", &self.half_width),
            ("nodes", &self.nodes),
            ("output", &self.output),
            ("seed", &self.seed),
            ("format", &self.format),
            ("profile", &self.profile),
            ("sign", &self.sign),
            ("k", &self.k),
            ("basis_size", &self.basis_size),
            ("interval", &self.interval),
            ("samples", &self.samples),
            ("symbol", &self.symbol),
        ];
        entries
            .iter()
            .filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone())))
            .collect()
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::List => {
            for e in Experiment::ALL {
                println!("{e}");
            }
            ExitCode::SUCCESS
        }
        Command::Validate { file } => {
            let text = match std::fs::read_to_string(&file) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("{}: {e}", file.display());
                    return ExitCode::from(4);
                }
            };
            match validate_config(&text) {
                Ok(_) => {
                    println!("ok");
                    ExitCode::SUCCESS
                }
                Err(errs) => {
                    for e in errs {
                        eprintln!("{e}");
                    }
                    ExitCode::from(2)
                }
            }
        }
        Command::Run { experiment, flags } => {
            let mut pairs = flags.pairs();
            pairs.insert(0, ("experiment".into(), experiment));
            let result = load_config(flags.config.as_deref(), &pairs).and_then(|cfg| {
                let e = cfg
                    .experiment
                    .expect("experiment is always set on the command line");
                run(e, &cfg)
            });
            match result {
                Ok(report) => {
                    println!("{}", report.data_path.display());
                    println!("{}", report.manifest_path.display());
                    println!("summary: {}", if report.pass { "pass" } else { "fail" });
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprint!("{e}");
                    if !e.to_string().ends_with('\n') {
                        eprintln!();
                    }
                    ExitCode::from(e.exit_code() as u8)
                }
            }
        }
    }
}
