use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgAction, Parser, Subcommand};
use qfl::config::ConfigArgs;
use qfl::experiment;

/// Federated training of variational quantum classifiers on MNIST digits.
#[derive(Debug, Parser)]
#[command(name = "qfl", version)]
struct Cli {
    /// Log progress (-v) or details (-vv) to stderr.
    #[arg(short, long, action = ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train one optimizer and write history.csv, result.json, config.echo,
    /// circuit.txt and params.bin to the output directory.
    Run(ConfigArgs),
    /// Train all four optimizers on identical shards and compare them.
    Sweep {
        #[command(flatten)]
        args: ConfigArgs,
        /// Optimizers trained concurrently.
        #[arg(long, default_value_t = 4)]
        jobs: usize,
    },
    /// Print the block-diagonal metric of one training sample as JSON.
    Metric {
        #[command(flatten)]
        args: ConfigArgs,
        /// Use the circuit and trained parameters of this run directory.
        #[arg(long)]
        run: Option<PathBuf>,
        /// Position in the (subsampled, sharded) training set.
        #[arg(long, default_value_t = 0)]
        sample: usize,
    },
}

fn execute(cli: Cli) -> qfl::Result<()> {
    match cli.command {
        Command::Run(args) => {
            let r = experiment::run(args.build()?)?;
            println!(
                "{} {}: final train loss {:.5}, test accuracy {:.4}, epochs to loss {}: {}",
                r.task,
                r.optimizer,
                r.final_train_loss,
                r.test_accuracy,
                r.loss_threshold,
                r.epochs_to_threshold.map_or("not reached".into(), |e| e.to_string())
            );
        }
        Command::Sweep { args, jobs } => {
            let s = experiment::sweep(args.build()?, jobs)?;
            println!("{:<8} {:>10} {:>10} {:>8}", "", "test_acc", "loss", "epochs");
            for r in &s.runs {
                println!(
                    "{:<8} {:>10.4} {:>10.5} {:>8}",
                    r.optimizer,
                    r.test_accuracy,
                    r.final_train_loss,
                    r.epochs_to_threshold.map_or("-".into(), |e| e.to_string())
                );
            }
            println!("fqngd fastest to loss {}: {}", s.loss_threshold, s.fqngd_fastest);
        }
        Command::Metric { mut args, run, sample } => {
            if let Some(dir) = &run {
                args.config = Some(dir.join("config.echo"));
            }
            println!("{}", experiment::metric_report(args.build()?, run.as_deref(), sample)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("qfl: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
