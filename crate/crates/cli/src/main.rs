use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use infer_cli::{run, validate_with, Overrides, RunError};

/// Inverse probability experiments from JSON configs.
#[derive(Parser)]
#[command(name = "infer", version)]
struct Cli {
    #[command(subcommand)]
    action: Action,
}

#[derive(clap::Args)]
struct Flags {
    /// Config document (JSON).
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    n_obs: Option<u64>,
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    factor: Option<String>,
    /// Output path prefix.
    #[arg(long)]
    output: Option<String>,
    #[arg(long)]
    emit_plot: bool,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Subcommand)]
enum Action {
    /// Validate the config and run its command.
    Run(Flags),
    /// Validate the config and print the parsed form.
    Validate(Flags),
}

impl Flags {
    fn overrides(&self) -> Overrides {
        let mut o = Overrides::default();
        if let Some(v) = self.seed {
            o.set("seed", v);
        }
        if let Some(v) = self.trials {
            o.set("trials", v);
        }
        if let Some(v) = self.delta {
            o.set("delta", v);
        }
        if let Some(v) = self.alpha {
            o.set("alpha", v);
        }
        if let Some(v) = self.n_obs {
            o.set("n_obs", v);
        }
        if let Some(v) = &self.family {
            o.set("family", v.as_str());
        }
        if let Some(v) = &self.factor {
            o.set("factor", v.as_str());
        }
        if let Some(v) = &self.output {
            o.set("output", v.as_str());
        }
        if self.emit_plot {
            o.set("emit_plot", true);
        }
        o
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("INFER_LOG", "warn"))
        .target(env_logger::Target::Stderr)
        .init();
    let cli = Cli::parse();
    let (flags, execute) = match &cli.action {
        Action::Run(f) => (f, true),
        Action::Validate(f) => (f, false),
    };
    let outcome = (|| -> Result<(), RunError> {
        let text = std::fs::read_to_string(&flags.config)
            .map_err(|e| RunError::Io(format!("{}: {e}", flags.config.display())))?;
        let cfg = validate_with(&text, &flags.overrides()).map_err(RunError::Config)?;
        if !execute {
            println!(
                "{}",
                serde_json::to_string_pretty(&cfg).expect("config serializes")
            );
            return Ok(());
        }
        if let Some(j) = flags.jobs {
            rayon::ThreadPoolBuilder::new()
                .num_threads(j.max(1))
                .build_global()
                .map_err(|e| RunError::Io(e.to_string()))?;
        }
        let manifest = run(&cfg)?;
        for f in &manifest.output_files {
            println!("{f}");
        }
        Ok(())
    })();
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
