use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use morphorl::config::PRESETS;
use morphorl::output::RunStatus;
use morphorl::{oracle, run_to_dir, EngineConfig};

#[derive(Parser)]
#[command(name = "morphorl", version, about = "Multi-agent tissue-repair simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a full experiment and write CSV traces.
    Run {
        #[command(flatten)]
        source: ConfigSource,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Load and validate a configuration, printing the resolved values.
    ValidateConfig {
        #[command(flatten)]
        source: ConfigSource,
    },
    /// Run the analytic and brute-force oracle suites.
    Oracle,
}

#[derive(Args)]
struct ConfigSource {
    /// TOML file mirroring the engine configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Named parameter set.
    #[arg(long)]
    preset: Option<String>,
    /// Overrides the seed from the config or preset.
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigSource {
    fn load(&self) -> Result<EngineConfig> {
        let mut config = match (&self.config, &self.preset) {
            (Some(_), Some(_)) => bail!("--config and --preset are mutually exclusive"),
            (Some(path), None) => EngineConfig::from_file(path)
                .with_context(|| format!("loading {}", path.display()))?,
            (None, Some(name)) => EngineConfig::preset(name)
                .with_context(|| format!("unknown preset {name:?} (known: {})", PRESETS.join(", ")))?,
            (None, None) => EngineConfig::default(),
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        config.validate()?;
        Ok(config)
    }
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Run { source, out } => {
            let config = source.load()?;
            let artifacts = run_to_dir(config, &out)?;
            for (name, rows) in &artifacts.rows {
                println!("{name}: {rows} rows");
            }
            match artifacts.status {
                RunStatus::Complete => {
                    println!("wrote {} steps to {}", artifacts.steps, out.display());
                    Ok(ExitCode::SUCCESS)
                }
                RunStatus::Partial(why) => {
                    eprintln!("run stopped after {} steps: {why}", artifacts.steps);
                    Ok(ExitCode::FAILURE)
                }
            }
        }
        Command::ValidateConfig { source } => {
            let config = source.load()?;
            print!("{}", config.to_toml_string());
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle => {
            let checks = oracle::run_all();
            for c in &checks {
                println!("{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
            }
            Ok(if checks.iter().all(|c| c.passed) {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    }
}
