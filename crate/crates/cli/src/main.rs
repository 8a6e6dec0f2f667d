//! `xnet`: WEP sweeps, numerical checks and difference-rank scans.

use std::fs;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use xnet_core::channel::{sample_channel_set, ChannelDist};
use xnet_core::constellation::{Constellation, ConstellationKind};
use xnet_core::rng::stream_rng;
use xnet_core::sim::{emit_outputs, estimate_diversity_slope, run_wep_sweep_with, SimConfig};
use xnet_core::stbc::{admissible_theta, diff_rank_scan, ScanMode};
use xnet_core::verify::{check_chain_pivots, check_js_alignment, check_r_fullrank, e_coefficient_expression, h22_examples};
use xnet_core::Error;

#[derive(Parser)]
#[command(name = "xnet", version, about = "2x2 MIMO X network link-level simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Monte Carlo WEP sweep over a power grid.
    Sweep(SweepArgs),
    /// Numerical checks of cancellation, alignment and IC pivots.
    Verify(VerifyArgs),
    /// Minimum |det| of codeword differences for a constellation and theta.
    Rankscan(RankscanArgs),
}

#[derive(Args)]
struct SweepArgs {
    /// key=value file with the same option names; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// ljj, msr, js, trivial or tdma.
    #[arg(long)]
    scheme: Option<String>,
    /// bpsk, qam4, qam8 or qam16.
    #[arg(long = "const")]
    constellation: Option<String>,
    /// Constellation rotation in radians.
    #[arg(long, allow_hyphen_values = true)]
    phi: Option<String>,
    /// Codeword phase in radians.
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<String>,
    /// start:step:stop in dB, or a comma list.
    #[arg(long, allow_hyphen_values = true)]
    pdb: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    /// Early stop per point; 0 disables it.
    #[arg(long)]
    target_errors: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    /// Worker threads; 0 uses every core.
    #[arg(long)]
    workers: Option<String>,
    /// Directory for wep.csv, wep.svg and manifest.txt.
    #[arg(long)]
    out: Option<String>,
    /// Remove receiver noise (diagnostic).
    #[arg(long)]
    no_noise: bool,
    /// network or per-rx.
    #[arg(long)]
    wep_scope: Option<String>,
    /// sphere or exhaustive.
    #[arg(long)]
    decoder: Option<String>,
    /// gaussian or uniform:<lo>:<hi>.
    #[arg(long, allow_hyphen_values = true)]
    channel: Option<String>,
    /// Antennas per node for TDMA.
    #[arg(long)]
    m: Option<String>,
    /// TDMA precoder blocks as tau:psi:theta[;tau:psi:theta].
    #[arg(long, allow_hyphen_values = true)]
    tdma: Option<String>,
}

impl SweepArgs {
    fn config(&self) -> Result<SimConfig> {
        let mut cfg = SimConfig::default();
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            cfg.apply_text(&text).with_context(|| format!("in {}", path.display()))?;
        }
        let flags = [
            ("scheme", &self.scheme),
            ("const", &self.constellation),
            ("phi", &self.phi),
            ("theta", &self.theta),
            ("pdb", &self.pdb),
            ("trials", &self.trials),
            ("target_errors", &self.target_errors),
            ("seed", &self.seed),
            ("workers", &self.workers),
            ("out", &self.out),
            ("wep_scope", &self.wep_scope),
            ("decoder", &self.decoder),
            ("channel", &self.channel),
            ("m", &self.m),
            ("tdma", &self.tdma),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, v).with_context(|| format!("--{}", key.replace('_', "-")))?;
            }
        }
        if self.no_noise {
            cfg.noise = false;
        }
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Check {
    /// Conditioning of the two-antenna receive matrix.
    Rank,
    /// Interference alignment residuals and signal rank.
    Align,
    /// Pivots of the four-antenna cancellation chain on one draw.
    Pivots,
    /// The e-coefficient expression on the two tabulated H22 matrices.
    Coeff,
    All,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum, default_value = "all")]
    check: Check,
    #[arg(long, default_value_t = 10_000)]
    draws: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_4, allow_hyphen_values = true)]
    theta: f64,
    #[arg(long, default_value = "gaussian", allow_hyphen_values = true)]
    channel: String,
    /// sigma_min / sigma_max below this counts as rank-deficient.
    #[arg(long, default_value_t = 1e-12)]
    threshold: f64,
}

#[derive(Args)]
struct RankscanArgs {
    #[arg(long = "const", default_value = "bpsk")]
    constellation: String,
    /// Rotation; defaults to atan(2)/2.
    #[arg(long, allow_hyphen_values = true)]
    phi: Option<f64>,
    #[arg(long, default_value_t = std::f64::consts::FRAC_PI_4, allow_hyphen_values = true)]
    theta: f64,
    /// Sample this many tuples instead of scanning all of them.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Search a theta grid for the first full-rank value instead.
    #[arg(long)]
    find_theta: bool,
    /// Also write the report to this file.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn print_kv(prefix: &str, lines: &[(String, String)]) {
    for (k, v) in lines {
        println!("{prefix}.{k}={v}");
    }
}

fn sweep(args: &SweepArgs) -> Result<()> {
    let cfg = args.config()?;
    cfg.validate()?;
    eprint!("{}", cfg.to_text());
    println!("p_db,trials,word_errors,wep,ci_low,ci_high,degenerate_resamples");
    let res = run_wep_sweep_with(&cfg, |r| {
        println!(
            "{},{},{},{:.6e},{:.6e},{:.6e},{}",
            r.p_db, r.trials, r.word_errors, r.wep, r.ci_low, r.ci_high, r.degenerate_resamples
        );
    })?;
    match estimate_diversity_slope(&res, 0..res.rows.len()) {
        Ok(s) => eprintln!("diversity_slope={:.3} stderr={:.3} points={}", s.slope, s.stderr, s.points),
        Err(Error::Insufficient(msg)) => eprintln!("diversity_slope=n/a ({msg})"),
        Err(e) => return Err(e.into()),
    }
    if let Some(dir) = &cfg.out {
        let paths = emit_outputs(&res, &cfg, dir)?;
        eprintln!("wrote {}, {}, {}", paths.csv.display(), paths.plot.display(), paths.manifest.display());
    }
    Ok(())
}

fn verify(args: &VerifyArgs) -> Result<()> {
    let dist: ChannelDist = args.channel.parse()?;
    let all = matches!(args.check, Check::All);
    if all || matches!(args.check, Check::Rank) {
        let r = check_r_fullrank(args.draws, &dist, args.seed, args.threshold)?;
        print_kv("rank", &r.kv_lines());
    }
    if all || matches!(args.check, Check::Align) {
        let (mut worst, mut min_rank, mut resampled) = (0f64, usize::MAX, 0usize);
        for i in 0..args.draws {
            let mut rng = stream_rng(args.seed, 1, i as u64);
            let ch = sample_channel_set(4, &dist, &mut rng)?.channel;
            match check_js_alignment(&ch) {
                Ok(r) => {
                    worst = worst.max(r.align1).max(r.align2);
                    min_rank = min_rank.min(r.signal_rank);
                }
                Err(Error::Degenerate(_) | Error::Singular(_)) => resampled += 1,
                Err(e) => return Err(e.into()),
            }
        }
        println!("align.draws={}", args.draws);
        println!("align.max_residual={worst:.6e}");
        println!("align.min_signal_rank={min_rank}");
        println!("align.degenerate={resampled}");
    }
    if all || matches!(args.check, Check::Pivots) {
        let mut rng = stream_rng(args.seed, 2, 0);
        let ch = sample_channel_set(4, &dist, &mut rng)?.channel;
        print_kv("pivots", &check_chain_pivots(&ch, args.theta)?.kv_lines());
    }
    if all || matches!(args.check, Check::Coeff) {
        for (i, (_, inv)) in h22_examples().iter().enumerate() {
            let v = e_coefficient_expression(inv, args.theta);
            println!("coeff.example{}={:.12}{:+.12}i", i + 1, v.re, v.im);
        }
    }
    Ok(())
}

fn rankscan(args: &RankscanArgs) -> Result<()> {
    let kind: ConstellationKind = args.constellation.parse()?;
    let phi = args.phi.unwrap_or_else(xnet_core::constellation::full_diversity_rotation);
    let k = Constellation::new(kind, phi);
    let mode = match args.samples {
        Some(n) => ScanMode::Sampled { n, seed: args.seed },
        None => ScanMode::Exhaustive,
    };
    let report = if args.find_theta {
        match admissible_theta(&k, mode)? {
            Some((_, r)) => r,
            None => anyhow::bail!("no full-rank theta on the search grid"),
        }
    } else {
        diff_rank_scan(&k, args.theta, mode)?
    };
    let mut text = format!("const={kind}\nphi={phi}\n");
    for (key, v) in report.kv_lines() {
        text.push_str(&format!("{key}={v}\n"));
    }
    print!("{text}");
    if let Some(path) = &args.out {
        fs::write(path, &text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().cmd {
        Cmd::Sweep(a) => sweep(&a),
        Cmd::Verify(a) => verify(&a),
        Cmd::Rankscan(a) => rankscan(&a),
    }
}
