use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ncsat_core::harness::{self, emit_plot_data, HarnessError, Scenario};
use ncsat_core::CodecConfig;

/// Network-coded tunnel experiments over emulated satellite links.
#[derive(Parser)]
#[command(name = "ncsat", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its time series.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        /// Overrides the seed in the scenario file.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Goodput of each flow class against downlink random loss.
    SweepLoss {
        #[arg(long)]
        scenario: PathBuf,
        /// Comma-separated loss probabilities.
        #[arg(long, value_delimiter = ',', default_value = "0,0.005,0.01,0.02,0.05")]
        losses: Vec<f64>,
        /// Seeded runs per loss value.
        #[arg(long, default_value_t = 1)]
        runs: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Encode and decode random generations in memory.
    CodecBench {
        #[arg(long, default_value_t = 30)]
        n: u16,
        #[arg(long, default_value_t = 6)]
        omega: u16,
        #[arg(long, default_value_t = 1000)]
        generations: usize,
        /// Datagrams dropped per generation; defaults to omega.
        #[arg(long)]
        drop: Option<usize>,
        /// Symbol size in bytes.
        #[arg(long, default_value_t = 1430)]
        symbol_size: usize,
        #[arg(long)]
        seed: u64,
    },
    /// Drop a burst of consecutive tunnel datagrams and count lost generations.
    BurstTest {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        burst_len: usize,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load(path: &Path, seed: Option<u64>) -> Result<Scenario, HarnessError> {
    let mut s = Scenario::load(path)?;
    if seed.is_some() {
        s.seed = seed;
    }
    s.seed()?;
    Ok(s)
}

fn create_dir(dir: &Path) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|source| HarnessError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

fn execute(cmd: Command) -> Result<(), HarnessError> {
    match cmd {
        Command::Run { scenario, seed, out } => {
            let s = load(&scenario, seed)?;
            create_dir(&out)?;
            let result = harness::run(&s)?;
            let csv = out.join(format!("{}_timeseries.csv", s.name));
            let (csv, script) = emit_plot_data(&result.rows, &csv)?;
            let summary = out.join(format!("{}_summary.txt", s.name));
            std::fs::write(&summary, result.summary.to_string()).map_err(|source| HarnessError::Io {
                path: summary.clone(),
                source,
            })?;
            print!("{}", result.summary);
            println!("wrote {}, {}, {}", csv.display(), script.display(), summary.display());
        }
        Command::SweepLoss {
            scenario,
            losses,
            runs,
            seed,
            out,
        } => {
            let s = load(&scenario, seed)?;
            create_dir(&out)?;
            let rows = harness::sweep_loss(&s, &losses, runs)?;
            for r in &rows {
                println!(
                    "loss {:>6.2}%  tcp {:>8.3} Mbps  tcp/nc {:>8.3} Mbps",
                    r.loss_pct, r.tcp_goodput_mbps, r.nc_goodput_mbps
                );
            }
            let (csv, script) = emit_plot_data(&rows, &out.join(format!("{}_sweep.csv", s.name)))?;
            println!("wrote {}, {}", csv.display(), script.display());
        }
        Command::CodecBench {
            n,
            omega,
            generations,
            drop,
            symbol_size,
            seed,
        } => {
            let cfg = CodecConfig::new(n, omega, symbol_size).map_err(|e| HarnessError::Config(e.to_string()))?;
            let report = harness::codec_bench(&cfg, generations, drop.unwrap_or(omega as usize), seed)?;
            print!("{report}");
        }
        Command::BurstTest {
            scenario,
            burst_len,
            seed,
        } => {
            let s = load(&scenario, seed)?;
            let report = harness::burst_test(&s, burst_len, s.seed()?)?;
            print!("{report}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
