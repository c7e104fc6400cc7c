use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod cli;

use cli::{CliError, PipelineConfig};

#[derive(Parser)]
#[command(
    name = "mercer",
    version,
    about = "Mercer decompositions of matrix-valued kernels on weighted atoms"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check Hermitian symmetry and positive semidefiniteness of the kernel.
    Validate(CommonArgs),
    /// Pseudo-metric matrix, quotient classes and support of the measure.
    Metric(CommonArgs),
    /// Spectrum and eigenfunctions of the integral operator.
    Decompose(CommonArgs),
    /// Truncated Mercer reconstruction error table.
    Reconstruct(CommonArgs),
    /// Per-component Parseval frames with their Parseval deviations.
    Frames(CommonArgs),
    /// Matrix kernel from scalar frames, checked against the scalar kernels.
    Synthesize(SynthArgs),
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// JSON config; command-line flags take precedence over it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Atom CSV (`id,w,c1,...,cd`).
    #[arg(long)]
    atoms: Option<PathBuf>,
    /// Kernel spec JSON.
    #[arg(long)]
    kernel: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    tol_eig: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    tol_recon: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    tol_quotient: Option<f64>,
    /// Absolute eigenvalue cutoff (default: 1e-12 * sigma_1).
    #[arg(long, allow_hyphen_values = true)]
    rank_cutoff: Option<f64>,
    /// Atom ids, comma separated (default: the support).
    #[arg(long, value_delimiter = ',')]
    subset: Option<Vec<String>>,
    /// Truncation orders, comma separated (default: 0..=rank).
    #[arg(long, value_delimiter = ',')]
    truncations: Option<Vec<usize>>,
}

#[derive(Args)]
struct SynthArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Frame CSVs, one per output component (default: derived from --originals).
    #[arg(long, value_delimiter = ',')]
    frames: Option<Vec<PathBuf>>,
    /// Scalar kernel spec JSONs the diagonal blocks are checked against.
    #[arg(long, value_delimiter = ',')]
    originals: Option<Vec<PathBuf>>,
}

fn config(
    args: &CommonArgs,
    frames: Option<Vec<PathBuf>>,
    originals: Option<Vec<PathBuf>>,
) -> Result<PipelineConfig, CliError> {
    let mut cfg = match &args.config {
        Some(p) => PipelineConfig::from_json_path(p)?,
        None => PipelineConfig::default(),
    };
    let flags = PipelineConfig {
        atoms: args.atoms.clone(),
        kernel: args.kernel.clone(),
        out: args.out.clone(),
        tolerances: mercer_core::Tolerances {
            tol_sym: None,
            tol_quotient: args.tol_quotient,
            rank_cutoff: args.rank_cutoff,
            tol_eig: args.tol_eig,
            tol_recon: args.tol_recon,
        },
        subset: args.subset.clone(),
        truncations: args.truncations.clone(),
        frames,
        originals,
    };
    cfg = cfg.overridden_by(flags);
    cfg.check()?;
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Validate(a) => cli::cmd_validate(&config(&a, None, None)?),
        Command::Metric(a) => cli::cmd_metric(&config(&a, None, None)?),
        Command::Decompose(a) => cli::cmd_decompose(&config(&a, None, None)?),
        Command::Reconstruct(a) => cli::cmd_reconstruct(&config(&a, None, None)?),
        Command::Frames(a) => cli::cmd_frames(&config(&a, None, None)?),
        Command::Synthesize(s) => cli::cmd_synthesize(&config(&s.common, s.frames, s.originals)?),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
