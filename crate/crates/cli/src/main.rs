//! `sfqo`: runs one experiment per invocation and writes CSV/JSON results
//! plus a manifest into the output directory.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 numerical
//! non-convergence, 1 anything else.

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use config::ConfigError;
use output::{Bundle, RunInfo};

#[derive(Parser, Debug)]
#[command(name = "sfqo", version, about = "Strong-field quantum optics experiments")]
struct Cli {
    #[arg(value_enum)]
    subcommand: Sub,
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Dotted-key override, e.g. `--set pulse.e0=0.06`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Grid refinement level (0-4).
    #[arg(long)]
    refine: Option<u32>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Sub {
    Dipole,
    HhgSpectrum,
    ChiDelta,
    CssPhoton,
    AtiPhoton,
    CatWigner,
    Tomo,
    Qspec,
    Optics,
}

impl Sub {
    fn name(self) -> String {
        self.to_possible_value()
            .expect("no skipped variants")
            .get_name()
            .to_string()
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    let cfg = config::load(&cli.config, &cli.overrides)?.with_cli(cli.seed, cli.refine)?;
    if let Ok(n) = std::env::var("SFQO_THREADS") {
        let n: usize = n.parse().map_err(|_| {
            anyhow::anyhow!(ConfigError(format!(
                "SFQO_THREADS must be a positive integer, got `{n}`"
            )))
        })?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    let mut bundle = Bundle::default();
    match cli.subcommand {
        Sub::Dipole => commands::dipole(&cfg, &mut bundle)?,
        Sub::HhgSpectrum => commands::hhg(&cfg, &mut bundle)?,
        Sub::ChiDelta => commands::chi_delta(&cfg, &mut bundle)?,
        Sub::CssPhoton => commands::css_photon(&cfg, &mut bundle)?,
        Sub::AtiPhoton => commands::ati_photon(&cfg, &mut bundle)?,
        Sub::CatWigner => commands::cat_wigner(&cfg, &mut bundle)?,
        Sub::Tomo => commands::tomo(&cfg, &mut bundle)?,
        Sub::Qspec => commands::qspec(&cfg, &mut bundle)?,
        Sub::Optics => commands::optics(&cfg, &mut bundle)?,
    }
    let config_json = serde_json::to_vec(&cfg)?;
    bundle.add_json("config.json", &cfg)?;
    let name = cli.subcommand.name();
    let info = RunInfo {
        subcommand: &name,
        config_json: &config_json,
        seed: cfg.seed,
        refine: cfg.refine,
    };
    for f in bundle.commit(&cli.out, &info)? {
        println!("{}", cli.out.join(f).display());
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<ConfigError>().is_some() {
            return 2;
        }
        match cause.downcast_ref::<sfqo::Error>() {
            Some(sfqo::Error::NoConvergence { .. } | sfqo::Error::TruncationTooSmall { .. }) => return 3,
            Some(sfqo::Error::InvalidParameter { .. }) => return 2,
            _ => {}
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
