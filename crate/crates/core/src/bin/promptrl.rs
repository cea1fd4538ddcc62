use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use promptrl::policy::PolicyKind;
use promptrl::run::{compare_files, evaluate, inspect_corpus, load_config, replay, train, RunError};

#[derive(Parser)]
#[command(name = "promptrl", about = "Train and evaluate prompt-refinement policies")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the PPO policy.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Continue from this checkpoint.
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Evaluate a policy on the test split.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        /// ppo, direct, ga, rewrite or random.
        #[arg(long)]
        policy: PolicyKind,
        /// PPO checkpoint; defaults to the final training checkpoint.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Paired significance tests between two evaluation reports.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Corpus statistics.
    Corpus {
        #[command(subcommand)]
        action: CorpusAction,
    },
    /// Re-execute a trace file and check every recorded reward.
    Replay { trace: PathBuf },
}

#[derive(Subcommand)]
enum CorpusAction {
    /// Task counts for a corpus file, or per split for a run config.
    Inspect { file: PathBuf },
}

fn to_json<T: serde::Serialize>(v: &T) -> Result<String, RunError> {
    serde_json::to_string_pretty(v).map_err(|e| RunError::Io(e.to_string()))
}

fn run(cli: Cli) -> Result<(), RunError> {
    match cli.command {
        Command::Train { config, resume } => {
            let loaded = load_config(&config)?;
            let out = train(&loaded, resume.as_deref())?;
            let solved = out.log.iter().filter(|e| e.solved).count();
            println!(
                "trained {} episodes ({} solved this session); checkpoint {}",
                out.checkpoint.episodes_done,
                solved,
                loaded.config.train_dir().join(promptrl::run::FINAL_CHECKPOINT).display()
            );
        }
        Command::Evaluate {
            config,
            policy,
            checkpoint,
        } => {
            let loaded = load_config(&config)?;
            let out = evaluate(&loaded, policy, checkpoint.as_deref())?;
            println!("{}", out.report.summary());
            for note in &out.manifest.notes {
                println!("note: {note}");
            }
            println!("report: {}", out.report_path.display());
        }
        Command::Compare { a, b, json } => {
            let c = compare_files(&a, &b)?;
            if json {
                println!("{}", to_json(&c)?);
            } else {
                print!("{}", c.to_table());
            }
        }
        Command::Corpus {
            action: CorpusAction::Inspect { file },
        } => println!("{}", to_json(&inspect_corpus(&file)?)?),
        Command::Replay { trace } => {
            let s = replay(&trace)?;
            for m in &s.mismatches {
                eprintln!("mismatch: {m}");
            }
            if !s.mismatches.is_empty() {
                return Err(RunError::Mismatch(format!(
                    "{} of {} steps differ from {}",
                    s.mismatches.len(),
                    s.checked,
                    trace.display()
                )));
            }
            println!("replayed {} steps from {}: all match", s.checked, trace.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
