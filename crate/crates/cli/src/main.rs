use std::net::{IpAddr, SocketAddr};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use quasisym_cli::commands::{cmd_analyze, cmd_generate, cmd_peaks, AnalyzeArgs, GenArgs, PeaksArgs};
use quasisym_cli::exit::Status;

/// Point group and symmorphism detection for images of (quasi)periodic
/// structures.
#[derive(Parser, Debug)]
#[command(name = "quasisym", version)]
struct Cli {
    /// More log output; repeat for debug.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Renders a tiling to PNG.
    Gen(GenArgs),
    /// Lists diffraction peaks and optionally refines guesses.
    Peaks(PeaksArgs),
    /// Runs the full analysis and writes the session and CSVs.
    Analyze(AnalyzeArgs),
    /// Hosts the HTTP API of the browser companion.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
    },
}

fn init_threads() -> Result<(), String> {
    let Ok(v) = std::env::var("QUASISYM_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| format!("QUASISYM_THREADS must be a positive integer, got `{v}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return Status::BadFlags.into();
    }
    let mut out = std::io::stdout().lock();
    let result = match &cli.command {
        Command::Gen(args) => cmd_generate(args, &mut out),
        Command::Peaks(args) => cmd_peaks(args, &mut out),
        Command::Analyze(args) => cmd_analyze(args, &mut out).map(|_| ()),
        Command::Serve { port, host } => {
            let runtime = match tokio::runtime::Runtime::new() {
                Ok(rt) => rt,
                Err(e) => {
                    eprintln!("error: {e}");
                    return Status::Io.into();
                }
            };
            runtime.block_on(quasisym_cli::server::serve(SocketAddr::new(*host, *port)))
        }
    };
    match result {
        Ok(()) => Status::Success.into(),
        Err(e) => {
            eprintln!("error: {e}");
            Status::of(&e).into()
        }
    }
}
