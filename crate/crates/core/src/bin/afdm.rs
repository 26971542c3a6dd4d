use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use faer::Mat;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use afdm::channel::{build_af_matrix, build_time_matrix, sample_channel, write_matrix_csv, ChannelProfile, DopplerMode};
use afdm::harness::{complexity_reports, format_reports, inversion_bench, run_ber_sweep_with, write_points, ExperimentConfig};
use afdm::waveform::{AfdmConfig, Daft, Modulation};
use afdm::{Error, C64};

#[derive(Parser)]
#[command(name = "afdm", version, about = "AFDM link-level simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte-Carlo BER sweep described by a config file.
    Ber {
        #[arg(long)]
        config: PathBuf,
        /// CSV destination; overrides the config's `output`, stdout if neither is set.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Suppress per-point progress on stderr.
        #[arg(long)]
        quiet: bool,
    },
    /// Dumps one channel-derived matrix as CSV.
    Matrix {
        #[arg(long, value_enum)]
        channel: ChannelKind,
        #[arg(long, value_enum)]
        what: MatrixKind,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        paths: usize,
        /// Maximum normalized Doppler; defaults to 0 for `fs` and 1 for `ds`.
        #[arg(long)]
        numax: Option<f64>,
        /// Domain of the Gram matrix; defaults to AF for `fs` and time for `ds`.
        #[arg(long, value_enum)]
        domain: Option<GramDomain>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compares the truncated block inverse with dense inversion.
    InvBench {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        lmax: usize,
        #[arg(long)]
        k: usize,
        /// Complex noise variance σ² of the EP-style test matrix.
        #[arg(long, default_value_t = 0.1)]
        noise_var: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Prints analytic and measured multiplication counts per detector.
    Complexity {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum ChannelKind {
    Fs,
    Ds,
}

#[derive(Clone, Copy, ValueEnum)]
enum MatrixKind {
    Ht,
    Haf,
    Gram,
}

#[derive(Clone, Copy, ValueEnum)]
enum GramDomain {
    Af,
    Time,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::FailureThreshold { .. } | Error::Singular { .. } => 2,
        _ => 1,
    }
}

fn ber(config: PathBuf, out: Option<PathBuf>, quiet: bool) -> afdm::Result<()> {
    let cfg = ExperimentConfig::load(&config)?;
    let points = run_ber_sweep_with(&cfg, |p| {
        if !quiet {
            eprintln!(
                "{:<12} snr {:>6.2} dB  frames {:>6}  errors {:>7}  ber {:.3e}",
                p.detector, p.snr_db, p.frames, p.bit_errors, p.ber
            );
        }
    })?;
    match out.or(cfg.output) {
        Some(path) => write_points(&points, BufWriter::new(File::create(path)?)),
        None => write_points(&points, io::stdout().lock()),
    }
}

fn gram(h: &Mat<C64>) -> Mat<C64> {
    h.adjoint() * h
}

#[allow(clippy::too_many_arguments)]
fn matrix(
    channel: ChannelKind,
    what: MatrixKind,
    n: usize,
    paths: usize,
    numax: Option<f64>,
    domain: Option<GramDomain>,
    seed: u64,
    out: PathBuf,
) -> afdm::Result<()> {
    let (profile, nu_max) = match channel {
        ChannelKind::Fs => {
            let nu = numax.unwrap_or(0.0);
            let mode = if nu > 0.0 { DopplerMode::Jakes } else { DopplerMode::None };
            (ChannelProfile::new(paths, nu, mode)?, nu)
        }
        ChannelKind::Ds => {
            let nu = numax.unwrap_or(1.0);
            (ChannelProfile::new(paths, nu, DopplerMode::Jakes)?, nu)
        }
    };
    let config = AfdmConfig::with_defaults(n, nu_max, profile.l_max(), Modulation::Qam4)?;
    let daft = Daft::new(&config)?;
    let realization = sample_channel(&profile, &mut ChaCha8Rng::seed_from_u64(seed));
    let h_t = build_time_matrix(&realization, &daft)?;
    let m = match what {
        MatrixKind::Ht => h_t,
        MatrixKind::Haf => build_af_matrix(&h_t, &daft)?,
        MatrixKind::Gram => {
            let domain = domain.unwrap_or(match channel {
                ChannelKind::Fs => GramDomain::Af,
                ChannelKind::Ds => GramDomain::Time,
            });
            match domain {
                GramDomain::Af => gram(&build_af_matrix(&h_t, &daft)?),
                GramDomain::Time => gram(&h_t),
            }
        }
    };
    let mut w = BufWriter::new(File::create(out)?);
    write_matrix_csv(&m, &mut w)?;
    w.flush()?;
    Ok(())
}

fn inv_bench(n: usize, lmax: usize, k: usize, noise_var: f64, seed: u64) -> afdm::Result<()> {
    let r = inversion_bench(n, lmax, k, noise_var, seed)?;
    println!("N {}  l_max {}  k {}  phi {}", r.n, r.l_max, r.k, r.phi);
    println!("B inverse rel. Frobenius error     {:.3e}", r.b_error);
    println!("Psi inverse rel. Frobenius error   {:.3e}", r.psi_error);
    println!("diag(Psi inverse) max rel. error   {:.3e}", r.diag_error);
    println!("dense time   {:>10.3} ms", r.dense_time.as_secs_f64() * 1e3);
    println!("banded time  {:>10.3} ms", r.banded_time.as_secs_f64() * 1e3);
    Ok(())
}

fn complexity(config: PathBuf) -> afdm::Result<()> {
    let cfg = ExperimentConfig::load(&config)?;
    print!("{}", format_reports(&complexity_reports(&cfg)?));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Ber { config, out, quiet } => ber(config, out, quiet),
        Command::Matrix {
            channel,
            what,
            n,
            paths,
            numax,
            domain,
            seed,
            out,
        } => matrix(channel, what, n, paths, numax, domain, seed, out),
        Command::InvBench {
            n,
            lmax,
            k,
            noise_var,
            seed,
        } => inv_bench(n, lmax, k, noise_var, seed),
        Command::Complexity { config } => complexity(config),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
