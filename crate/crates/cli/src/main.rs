//! `freqatt` command-line interface.

mod cmd;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "freqatt", version, about = "Attention-augmented CRNN tools for sound event detection")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Model config (key=value); defaults apply when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Output directory (or weight stem for `init`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parameter totals and deltas for every attention variant.
    Audit(cmd::audit::AuditArgs),
    /// Median forward latency per variant.
    Bench(cmd::bench::BenchArgs),
    /// Frame probabilities and decoded events for WAV or mel inputs.
    Infer(cmd::infer::InferArgs),
    /// Synthetic labelled clips.
    Synth(cmd::synth::SynthArgs),
    /// Finite-difference check of analytic backward passes.
    Gradcheck(cmd::gradcheck::GradcheckArgs),
    /// Collar F1 and PSDS of estimates against references.
    Eval(cmd::eval::EvalArgs),
    /// Log-mel spectrograms of WAV files.
    Features(cmd::features::FeaturesArgs),
    /// Writes a config and seeded initial weights.
    Init(cmd::init::InitArgs),
}

/// How a successful run ended.
pub enum Outcome {
    Ok,
    ChecksFailed,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Audit(a) => cmd::audit::run(&cli.common, a),
        Command::Bench(a) => cmd::bench::run(&cli.common, a),
        Command::Infer(a) => cmd::infer::run(&cli.common, a),
        Command::Synth(a) => cmd::synth::run(&cli.common, a),
        Command::Gradcheck(a) => cmd::gradcheck::run(&cli.common, a),
        Command::Eval(a) => cmd::eval::run(&cli.common, a),
        Command::Features(a) => cmd::features::run(&cli.common, a),
        Command::Init(a) => cmd::init::run(&cli.common, a),
    };
    match result {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::ChecksFailed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
