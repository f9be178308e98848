use std::path::PathBuf;
use std::process::ExitCode;

use bayescp_core::emit::{emit_classic, emit_multi, read_column};
use bayescp_core::harness::{cmd_lipschitz, run_classic, run_multi};
use bayescp_core::irf::{rate_fit, RateFit};
use bayescp_core::{Error, ExperimentConfig, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "bayescp",
    version,
    about = "Sequential Bayesian change-point detection experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Replicated single change-point runs with the Shiryayev rule.
    SimulateClassic(RunArgs),
    /// Exact and approximate network filters on shared data.
    SimulateMulti(RunArgs),
    /// Compare closed-form Lipschitz bounds with sampled estimates.
    LipschitzCheck(LipschitzArgs),
    /// Fit the log-linear decay rate of a column of emitted traces.
    RateFit(RateFitArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Built-in network: "classic" or "star4".
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    horizon: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    /// Output directory for CSV traces and summary.json.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LipschitzArgs {
    /// Comma-separated ρ values; overrides the network's.
    #[arg(long, value_delimiter = ',')]
    rhos: Vec<f64>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    /// Number of sampled pairs.
    #[arg(long, default_value_t = 10_000)]
    pairs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct RateFitArgs {
    /// Trace CSV files.
    #[arg(required = true)]
    files: Vec<PathBuf>,
    #[arg(long, default_value = "exact_dist")]
    column: String,
    /// First step included in the fit.
    #[arg(long, default_value_t = 0)]
    start: usize,
}

impl RunArgs {
    fn config(&self, default_preset: &str) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_path(path)?,
            None => ExperimentConfig::with_preset(default_preset),
        };
        let p = &mut cfg.experiment;
        if let Some(v) = &self.preset {
            p.preset = Some(v.clone());
        }
        if let Some(v) = self.seed {
            p.seed = v;
        }
        if let Some(v) = self.reps {
            p.reps = v;
        }
        if let Some(v) = self.horizon {
            p.horizon = v;
        }
        if let Some(v) = self.alpha {
            p.alpha = v;
        }
        if let Some(v) = &self.out {
            p.out = Some(v.clone());
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn print_json<T: serde::Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn simulate_classic(args: &RunArgs) -> Result<()> {
    let cfg = args.config("classic")?;
    let (reps, summary) = run_classic(&cfg)?;
    if !summary.detectable {
        eprintln!(
            "warning: pre- and post-change laws coincide; delays are censored at the horizon"
        );
    }
    if let Some(out) = &cfg.experiment.out {
        let files = emit_classic(out, &cfg, &reps, &summary)?;
        eprintln!("wrote {} files to {}", files.len(), out.display());
    }
    print_json(&summary)
}

fn simulate_multi(args: &RunArgs) -> Result<()> {
    let cfg = args.config("star4")?;
    let (reps, summary) = run_multi(&cfg)?;
    if !summary.hypotheses.i_star_positive {
        eprintln!("warning: I*(κ̄) = {:.4} ≤ 0", summary.info.i_star);
    }
    if !summary.hypotheses.k_rho_at_most_one {
        eprintln!("warning: K_ρ = {:.4} > 1", summary.k_rho);
    }
    for f in &summary.failures {
        eprintln!(
            "replication {} (seed {}) failed: {}",
            f.rep, f.seed, f.message
        );
    }
    if let Some(out) = &cfg.experiment.out {
        let files = emit_multi(out, &cfg, &reps, &summary)?;
        eprintln!("wrote {} files to {}", files.len(), out.display());
    }
    print_json(&summary)
}

fn lipschitz_check(args: &LipschitzArgs) -> Result<bool> {
    let rhos = if args.rhos.is_empty() {
        let mut cfg = match &args.config {
            Some(path) => ExperimentConfig::from_path(path)?,
            None => ExperimentConfig::with_preset("star4"),
        };
        if let Some(p) = &args.preset {
            cfg.experiment.preset = Some(p.clone());
        }
        cfg.network()?.rhos()
    } else {
        args.rhos.clone()
    };
    let r = cmd_lipschitz(&rhos, args.pairs, args.seed)?;
    let mark = |ok: bool| if ok { "pass" } else { "FAIL" };
    println!(
        "T_ex: bound {:.6}, sampled {:.6} [{}]",
        r.l_rho,
        r.tex_empirical,
        mark(r.tex_within_bound)
    );
    println!(
        "T_ap: bound {:.6}, sampled {:.6} [{}]",
        r.k_rho,
        r.tap_empirical,
        mark(r.tap_within_bound)
    );
    if let (Some(j), Some(ok)) = (r.jacobian, r.jacobian_identities_hold) {
        println!(
            "Jacobians: |colsum(J_H) - 2| ≤ {:.2e}, |colsum(J_K') - K/2| ≤ {:.2e}, product norm {:.6} ≤ {:.6} [{}]",
            j.jh_colsum_dev,
            j.jk_colsum_dev,
            j.product_norm,
            j.bound,
            mark(ok)
        );
    }
    if !r.k_rho_at_most_one {
        eprintln!(
            "warning: K_ρ = {:.4} > 1; the approximate filter's convergence bound does not apply",
            r.k_rho
        );
    }
    Ok(r.all_pass())
}

fn rate_fit_cmd(args: &RateFitArgs) -> Result<()> {
    for path in &args.files {
        let values = read_column(path, &args.column)?;
        let tail = values.get(args.start..).ok_or_else(|| {
            Error::Argument(format!(
                "{} has only {} values",
                path.display(),
                values.len()
            ))
        })?;
        match rate_fit(tail, 0)? {
            RateFit::Slope(s) => println!("{}\t{s:.6}", path.display()),
            RateFit::ExactConvergence { step } => {
                println!(
                    "{}\texact convergence at step {}",
                    path.display(),
                    args.start + step
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::SimulateClassic(a) => simulate_classic(a).map(|()| true),
        Command::SimulateMulti(a) => simulate_multi(a).map(|()| true),
        Command::LipschitzCheck(a) => lipschitz_check(a),
        Command::RateFit(a) => rate_fit_cmd(a).map(|()| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
