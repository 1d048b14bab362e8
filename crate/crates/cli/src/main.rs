//! `cogsec`: calibrate power-allocation policies, evaluate their ergodic
//! secrecy rates and run reproducible parameter sweeps.

use std::fs;
use std::io::{self, Write};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use cogsec::calibrate::{calibrate_lambda_on, optimize_threshold, ConstraintSet};
use cogsec::mc::SampleSet;
use cogsec::policy::{onoff_power_level, PolicyFamily, PolicySpec};
use cogsec::rate::{nats_to_bits, onoff_rate_closed_form, secrecy_rate_on};
use cogsec::sweep::{run_sweep, write_csv, Preset, RowFlag, SweepConfig};
use cogsec::FadingParams;

#[derive(Debug, Parser)]
#[command(
    name = "cogsec",
    version,
    about = "Secrecy power allocation under received-power constraints"
)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct GlobalOpts {
    /// Flat `key = value` configuration file; flags override it.
    #[arg(long, global = true)]
    config: Option<String>,
    /// Start from a named experiment: fig2, fig3 or fig4.
    #[arg(long, global = true)]
    preset: Option<Preset>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Monte Carlo sample count (default 1000000).
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Relative calibration tolerance (default 1e-3).
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Output path for sweep CSV (stdout when absent).
    #[arg(long, global = true)]
    out: Option<String>,
    /// Report rates in bits instead of nats (human-readable output only).
    #[arg(long, global = true)]
    bits: bool,
    #[arg(long, global = true)]
    gamma_m: Option<f64>,
    #[arg(long, global = true)]
    gamma_e: Option<f64>,
    #[arg(long, global = true)]
    gamma_p: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Calibrate the Lagrange multiplier of one policy.
    Calibrate(PointArgs),
    /// Calibrate one policy and report its ergodic secrecy rate.
    Evaluate(PointArgs),
    /// Run the configured sweep and write CSV.
    Sweep,
}

#[derive(Debug, Args)]
struct PointArgs {
    /// full_csi_avg, full_csi_avg_peak, no_ecsi or onoff.
    #[arg(long)]
    policy: PolicyFamily,
    #[arg(long)]
    q_avg: f64,
    /// Peak received-power limit; `inf` for none.
    #[arg(long)]
    q_peak: Option<f64>,
    /// On/off threshold; optimized over [0, tau_max] when absent.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    tau_max: Option<f64>,
}

fn load_config(g: &GlobalOpts) -> Result<SweepConfig> {
    let mut cfg = match g.preset {
        Some(p) => SweepConfig::preset(p),
        None => SweepConfig::new(FadingParams {
            gamma_m: 1.0,
            gamma_e: 1.0,
            gamma_p: 2.0,
        }),
    };
    if let Some(path) = &g.config {
        let text = fs::read_to_string(path).with_context(|| format!("reading config {path}"))?;
        cfg.apply_kv(&text)?;
    }
    if let Some(v) = g.gamma_m {
        cfg.params.gamma_m = v;
    }
    if let Some(v) = g.gamma_e {
        cfg.params.gamma_e = v;
    }
    if let Some(v) = g.gamma_p {
        cfg.params.gamma_p = v;
    }
    if let Some(v) = g.seed {
        cfg.seed = v;
    }
    if let Some(v) = g.samples {
        cfg.n_samples = v;
    }
    if let Some(v) = g.tol {
        cfg.tol = v;
    }
    if let Some(v) = &g.out {
        cfg.out = Some(v.clone());
    }
    Ok(cfg)
}

fn unit(bits: bool) -> (&'static str, fn(f64) -> f64) {
    if bits {
        ("bits", nats_to_bits)
    } else {
        ("nats", |x| x)
    }
}

fn fmt_peak(q: Option<f64>) -> String {
    q.map(|q| q.to_string()).unwrap_or_default()
}

fn point(cfg: &mut SweepConfig, args: &PointArgs, bits: bool, with_rate: bool) -> Result<()> {
    if let Some(t) = args.tau_max {
        cfg.tau_max = Some(t);
    }
    // validate knobs through the sweep rules with this single point
    cfg.q_avg_grid = vec![args.q_avg];
    cfg.families = vec![args.policy];
    cfg.validate()?;
    let constraints = ConstraintSet {
        q_avg: args.q_avg,
        q_peak: args.q_peak,
    };
    constraints.validate()?;
    let samples = SampleSet::generate(&cfg.params, cfg.n_samples, cfg.seed, cfg.partitions)?;
    let (label, conv) = unit(bits);
    let mut out = String::new();
    let mut line = |k: &str, v: String| {
        out.push_str(k);
        out.push_str(" = ");
        out.push_str(&v);
        out.push('\n');
    };
    line("policy", args.policy.to_string());
    line("gamma_m", cfg.params.gamma_m.to_string());
    line("gamma_e", cfg.params.gamma_e.to_string());
    line("gamma_p", cfg.params.gamma_p.to_string());
    line("q_avg", args.q_avg.to_string());
    line("q_peak", fmt_peak(args.q_peak));
    line("n_samples", cfg.n_samples.to_string());
    line("seed", cfg.seed.to_string());

    let policy = if args.policy == PolicyFamily::OnOff {
        if !with_rate {
            bail!("onoff has no multiplier to calibrate; use `evaluate`");
        }
        let (tau, p_level) = match args.tau {
            Some(tau) => (
                tau,
                onoff_power_level(args.q_avg, cfg.params.gamma_p, cfg.params.gamma_m, tau)?,
            ),
            None => {
                let opt = optimize_threshold(&cfg.params, args.q_avg, cfg.tau_max())?;
                (opt.tau, opt.p_level)
            }
        };
        line("tau", tau.to_string());
        line("p_level", p_level.to_string());
        let cf = onoff_rate_closed_form(&cfg.params, args.q_avg, tau)?;
        line(&format!("closed_form_rate_{label}"), conv(cf).to_string());
        PolicySpec::OnOff { tau, p_level }
    } else {
        let report = calibrate_lambda_on(args.policy, &constraints, cfg.tol, &samples)?;
        line("lambda", report.lambda_star.to_string());
        line("achieved_avg_power", report.achieved_avg_power.to_string());
        line("avg_power_std_err", report.std_error.to_string());
        line("residual", report.residual.to_string());
        line("iterations", report.iterations.to_string());
        line("flag", report.flag.to_string());
        report.policy
    };
    if with_rate {
        let est = secrecy_rate_on(&policy, &samples)?;
        line(&format!("rate_{label}"), conv(est.mean).to_string());
        line("std_err", conv(est.std_error).to_string());
    }
    io::stdout().write_all(out.as_bytes())?;
    Ok(())
}

fn sweep(cfg: &SweepConfig, bits: bool) -> Result<()> {
    let rows = run_sweep(cfg)?;
    match &cfg.out {
        Some(path) => {
            let file = fs::File::create(path).with_context(|| format!("creating {path}"))?;
            let mut w = io::BufWriter::new(file);
            write_csv(&rows, &mut w)?;
            w.flush()?;
        }
        None => write_csv(&rows, io::stdout().lock())?,
    }
    let (label, conv) = unit(bits);
    let mut err = io::stderr().lock();
    for r in &rows {
        let rate = r
            .rate
            .map(|e| format!("{:.6} ± {:.6} {label}", conv(e.mean), conv(e.std_error)))
            .unwrap_or_else(|| "-".into());
        let flag = match r.flag {
            RowFlag::Ok => String::new(),
            f => format!(" [{}]", f.as_str()),
        };
        writeln!(
            err,
            "q_avg={} q_peak={} {}: {rate}{flag}",
            r.q_avg,
            fmt_peak(r.q_peak),
            r.family
        )?;
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = load_config(&cli.global)?;
    match &cli.command {
        Command::Calibrate(args) => point(&mut cfg, args, cli.global.bits, false),
        Command::Evaluate(args) => point(&mut cfg, args, cli.global.bits, true),
        Command::Sweep => sweep(&cfg, cli.global.bits),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
