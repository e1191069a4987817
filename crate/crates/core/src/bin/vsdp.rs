use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use vsdp::ber::{self, SweepConfig};
use vsdp::sdp::SolverOptions;
use vsdp::uwb::{self, BlockConfig, ChannelPreset};
use vsdp::volterra::{demodulate_ml, demodulate_sdp_traced, VolterraSystem};
use vsdp::{selftest, Error, Result};

#[derive(Parser)]
#[command(name = "vsdp", version, about = "SDP equalization for differential UWB links")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo BER sweep from a `key = value` config file.
    Sweep {
        config: PathBuf,
        #[arg(long)]
        out_csv: Option<PathBuf>,
        #[arg(long)]
        out_plot: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; overrides VSDP_THREADS and the config.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Demodulate one block from a system file.
    Demod {
        system: PathBuf,
        /// Also run the exhaustive detector.
        #[arg(long)]
        ml: bool,
        /// Write the per-iteration solver trace (TSV).
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        gap_tol: Option<f64>,
        #[arg(long, default_value_t = SolverOptions::default().max_iter)]
        max_iter: usize,
    },
    /// Simulate one block and write its system file.
    Simulate {
        #[arg(long, default_value = "cm1")]
        preset: String,
        /// Omit for a noiseless block.
        #[arg(long)]
        ebn0_db: Option<f64>,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 0)]
        trial: u64,
        #[arg(long)]
        out_system: PathBuf,
        #[arg(long)]
        out_channel: Option<PathBuf>,
        #[arg(long)]
        out_waveform: Option<PathBuf>,
    },
    /// Render a BER CSV as SVG.
    Plot { csv: PathBuf, out: PathBuf },
    /// Run the built-in invariant checks.
    Selftest,
}

/// Prefixes file errors with the path involved.
fn at(path: &Path, e: Error) -> Error {
    match e {
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        Error::Parse { line, msg } => Error::Parse {
            line,
            msg: format!("{msg} (in {})", path.display()),
        },
        other => other,
    }
}

fn thread_count(flag: Option<usize>, config: Option<usize>) -> Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var("VSDP_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::InvalidInput(format!("VSDP_THREADS={v:?} is not a positive integer"))),
        },
        Err(_) => Ok(config),
    }
}

fn sweep(
    config: PathBuf,
    out_csv: Option<PathBuf>,
    out_plot: Option<PathBuf>,
    seed: Option<u64>,
    threads: Option<usize>,
) -> Result<()> {
    let mut cfg = SweepConfig::load(&config).map_err(|e| at(&config, e))?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let csv = out_csv
        .or(cfg.out_csv.clone())
        .ok_or_else(|| Error::InvalidInput("no CSV output path (use --out-csv or out_csv)".into()))?;
    let plot = out_plot.or(cfg.out_plot.clone());
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = thread_count(threads, cfg.threads)? {
        if n == 0 {
            return Err(Error::InvalidInput("--threads must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::InvalidInput(format!("thread pool: {e}")))?;
    let records = pool.install(|| ber::run_sweep(&cfg))?;
    for r in records.iter().filter(|r| r.failures > 0) {
        eprintln!(
            "warning: {} at {} dB: {} of the {} blocks hit a solver failure (partial decisions scored)",
            r.preset,
            r.ebn0_db,
            r.failures,
            r.bits / cfg.block.nb as u64
        );
    }
    ber::emit_csv(&records, &csv).map_err(|e| at(&csv, e))?;
    if let Some(p) = plot {
        ber::emit_plot(&csv, &p).map_err(|e| at(&p, e))?;
    }
    Ok(())
}

fn demod(system: PathBuf, ml: bool, trace: Option<PathBuf>, gap_tol: Option<f64>, max_iter: usize) -> Result<()> {
    let sys = VolterraSystem::load(&system).map_err(|e| at(&system, e))?;
    let opts = SolverOptions {
        gap_tol,
        max_iter,
        ..SolverOptions::default()
    };
    let (res, outcome) = match demodulate_sdp_traced(&sys, &opts) {
        Ok(r) => r,
        Err(Error::Demod { source, partial }) => {
            eprintln!("warning: {source}; reporting the last iterate");
            let d = partial.d_hat.clone();
            println!("sdp {}", bits(&d));
            return Err(Error::Demod { source, partial });
        }
        Err(e) => return Err(e),
    };
    println!("sdp {}", bits(&res.d_hat));
    println!(
        "iterations {} gap {:.6e} converged {}",
        res.iterations, res.gap, res.converged
    );
    if let Some(p) = trace {
        outcome.trace.dump(p)?;
    }
    if ml {
        let (d, resid) = demodulate_ml(&sys)?;
        println!("ml {}", bits(&d));
        println!("ml residual {resid:.6e}");
    }
    Ok(())
}

fn bits(d: &[i8]) -> String {
    d.iter().map(|&b| if b > 0 { "+1" } else { "-1" }).collect::<Vec<_>>().join(" ")
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    preset: String,
    ebn0_db: Option<f64>,
    seed: u64,
    trial: u64,
    out_system: PathBuf,
    out_channel: Option<PathBuf>,
    out_waveform: Option<PathBuf>,
) -> Result<()> {
    let preset = ChannelPreset::from_name(&preset)?;
    let cfg = BlockConfig {
        ebn0_db: ebn0_db.unwrap_or(f64::INFINITY),
        ..BlockConfig::default()
    };
    let mut rng = uwb::trial_rng(seed, trial);
    let channel = uwb::sample_channel(preset, &mut rng);
    let d = uwb::random_symbols(&mut rng, cfg.nb);
    let block = uwb::simulate_block(&cfg, &channel, &d, &mut rng)?;
    block.system(&cfg)?.save(&out_system)?;
    if let Some(p) = out_channel {
        channel.save(p)?;
    }
    if let Some(p) = out_waveform {
        uwb::write_waveform(p, cfg.fs, &block.received)?;
    }
    let d: Vec<i8> = d.iter().map(|&x| x as i8).collect();
    println!("sent {}", bits(&d));
    Ok(())
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Sweep {
            config,
            out_csv,
            out_plot,
            seed,
            threads,
        } => sweep(config, out_csv, out_plot, seed, threads)?,
        Command::Demod {
            system,
            ml,
            trace,
            gap_tol,
            max_iter,
        } => demod(system, ml, trace, gap_tol, max_iter)?,
        Command::Simulate {
            preset,
            ebn0_db,
            seed,
            trial,
            out_system,
            out_channel,
            out_waveform,
        } => simulate(preset, ebn0_db, seed, trial, out_system, out_channel, out_waveform)?,
        Command::Plot { csv, out } => ber::emit_plot(&csv, &out).map_err(|e| at(&csv, e))?,
        Command::Selftest => {
            let results = selftest::run();
            for r in &results {
                println!("{} {}: {}", if r.passed { "PASS" } else { "FAIL" }, r.name, r.detail);
            }
            return Ok(results.iter().all(|r| r.passed));
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
