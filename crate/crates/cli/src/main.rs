use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use ed4sim_cli::commands::{self, PointCache, VerifySettings};
use ed4sim_cli::config::SimConfig;
use ed4sim_cli::CliError;

/// Error-rate, threshold and resource estimates for concatenated
/// error-detecting codes on fusion-built cluster states.
#[derive(Parser)]
#[command(name = "ed4sim", version)]
struct Cli {
    /// TOML configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for sampling. Results do not depend on it.
    #[arg(long, global = true, env = "ED4SIM_WORKERS")]
    workers: Option<usize>,
    /// Suppress progress lines on stderr.
    #[arg(long, short, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct Common {
    /// Photon loss probability per noise location.
    #[arg(long)]
    gamma: Option<f64>,
    /// Depolarization probability per noise location.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Concatenation method, 1 or 2.
    #[arg(long)]
    method: Option<u8>,
    /// Highest level run in the delayed form.
    #[arg(long)]
    l_c: Option<u32>,
    /// Highest sampled level.
    #[arg(long)]
    max_level: Option<u32>,
    /// Dangling nodes per microcluster; only 4 is supported.
    #[arg(long)]
    dangling_count: Option<u32>,
    /// Samples per level from level 0, comma separated.
    #[arg(long, value_delimiter = ',')]
    samples: Option<Vec<u64>>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Full-size samples and Δε = 1e-6; expect weeks of CPU time.
    #[arg(long)]
    full_fidelity: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Rate table from level 0 to max level.
    Estimate(Common),
    /// ε* against γ for each method, resumable.
    Threshold {
        #[command(flatten)]
        common: Common,
        /// γ values, comma separated.
        #[arg(long, value_delimiter = ',')]
        gammas: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        methods: Option<Vec<u8>>,
        #[arg(long)]
        eps_min: Option<f64>,
        #[arg(long)]
        eps_max: Option<f64>,
        /// Points of the coarse ε scan from eps-min to eps-max.
        #[arg(long)]
        coarse_points: Option<usize>,
        /// Fine ε step above the last coarse pass.
        #[arg(long)]
        delta: Option<f64>,
    },
    /// Located rate and Bell-pair cost per level.
    Resources {
        #[command(flatten)]
        common: Common,
        /// Highest level reported, extrapolated past max-level.
        #[arg(long)]
        horizon: Option<u32>,
        /// Located memory rate at which the cost is read off.
        #[arg(long)]
        target_q: Option<f64>,
    },
    /// Code checks and engine/oracle sweeps.
    Verify {
        #[arg(long, short)]
        output: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Patterns with at most this many fault pairs get all of them.
        #[arg(long)]
        exhaustive_pairs: Option<usize>,
        /// Random fault pairs for larger patterns.
        #[arg(long)]
        sampled_pairs: Option<usize>,
    },
}

fn apply(cfg: &mut SimConfig, c: &Common) {
    macro_rules! set {
        ($($f:ident => $g:ident),*) => { $(if let Some(v) = c.$f.clone() { cfg.$g = v; })* };
    }
    set!(gamma => gamma, epsilon => epsilon, method => method, l_c => l_c, max_level => max_level,
         dangling_count => dangling_count, samples => samples_per_level, seed => seed, output => output);
    cfg.full_fidelity |= c.full_fidelity;
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => SimConfig::load(p)?,
        None => SimConfig::default(),
    };
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(CliError::Usage("--workers must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let quiet = cli.quiet;
    let progress = move |m: &str| {
        if !quiet {
            eprintln!("[ed4sim] {m}");
        }
    };
    let start = Instant::now();
    let common = match &cli.command {
        Command::Estimate(c) | Command::Threshold { common: c, .. } | Command::Resources { common: c, .. } => Some(c),
        Command::Verify { .. } => None,
    };
    if let Some(c) = common {
        apply(&mut cfg, c);
    }
    match &cli.command {
        Command::Threshold { gammas, methods, eps_min, eps_max, coarse_points, delta, .. } => {
            let s = &mut cfg.sweep;
            if let Some(v) = gammas {
                s.gammas = v.clone();
            }
            if let Some(v) = methods {
                s.methods = v.clone();
            }
            if let Some(v) = *eps_min {
                s.eps_min = v;
            }
            if let Some(v) = *eps_max {
                s.eps_max = v;
            }
            if let Some(v) = *coarse_points {
                s.coarse_points = v;
            }
            if let Some(v) = *delta {
                s.delta = v;
            }
        }
        Command::Resources { horizon, target_q, .. } => {
            if let Some(v) = *horizon {
                cfg.resources.horizon = v;
            }
            if let Some(v) = *target_q {
                cfg.resources.target_q = v;
            }
        }
        _ => {}
    }
    if cfg.full_fidelity {
        progress("full fidelity: 1e7-1e8 samples per level and Δε = 1e-6; a sweep takes weeks of CPU time");
        cfg.apply_full_fidelity();
    }
    cfg.validate()?;
    let elapsed = || start.elapsed().as_secs_f64();
    let written = match &cli.command {
        Command::Estimate(_) => {
            let d = commands::estimate(&cfg, &progress)?;
            commands::write_estimate(&cfg.output, d, elapsed())?
        }
        Command::Threshold { .. } => {
            let mut cache = PointCache::open(cfg.output.join("sweep_points.jsonl"), commands::settings_fingerprint(&cfg))?;
            let d = commands::threshold(&cfg, &mut cache, &progress)?;
            progress(&format!("{} points computed, {} reused from earlier runs", cache.computed, cache.reused));
            commands::write_threshold(&cfg.output, d, elapsed())?
        }
        Command::Resources { .. } => {
            let d = commands::resources(&cfg, &progress)?;
            commands::write_resources(&cfg.output, d, elapsed())?
        }
        Command::Verify { output, seed, exhaustive_pairs, sampled_pairs } => {
            let mut s = VerifySettings::default();
            if let Some(v) = *seed {
                s.seed = v;
            }
            if let Some(v) = *exhaustive_pairs {
                s.exhaustive_pairs = v;
            }
            if let Some(v) = *sampled_pairs {
                s.sampled_pairs = v;
            }
            let dir = output.clone().unwrap_or(cfg.output.clone());
            let d = commands::verify(&s, &progress)?;
            for c in &d.categories {
                println!(
                    "{:<20} {:>8} cases {:>4} failures  {}",
                    c.name,
                    c.cases,
                    c.failures,
                    if c.pass { "ok" } else { "FAIL" }
                );
            }
            let pass = d.pass;
            commands::write_verify(&dir, d, elapsed())?;
            if !pass {
                return Err(CliError::Verification("see verify.json".into()));
            }
            return Ok(());
        }
    };
    for p in written {
        println!("{}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ed4sim: {e}");
            e.exit_code()
        }
    }
}
