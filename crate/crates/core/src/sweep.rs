//! Sweep harness: calibrate each policy over a grid of average budgets and
//! tabulate ergodic secrecy rates as CSV.
//!
//! All sweep points share one [`SampleSet`] drawn from the configured seed;
//! calibration and rate evaluation both run on it. Rows come out in grid
//! order whatever order the points finish in.

use std::fmt::{self, Write as _};
use std::io;
use std::str::FromStr;

use rayon::prelude::*;

use crate::calibrate::{
    calibrate_lambda_on, default_tau_max, optimize_threshold, CalibrationFlag, ConstraintSet,
    DEFAULT_SAMPLES, DEFAULT_TOL,
};
use crate::error::{Error, Result};
use crate::fading::FadingParams;
use crate::mc::{RateEstimate, SampleSet, DEFAULT_PARTITIONS, MIN_SAMPLES};
use crate::policy::PolicyFamily;
use crate::rate::secrecy_rate_on;

pub const CSV_HEADER: &str = "q_avg,q_peak,policy,lambda,tau,rate_nats,std_err,n_samples,seed,flag";
pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Fig2,
    Fig3,
    Fig4,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::Fig2, Preset::Fig3, Preset::Fig4];

    pub fn as_str(&self) -> &'static str {
        match self {
            Preset::Fig2 => "fig2",
            Preset::Fig3 => "fig3",
            Preset::Fig4 => "fig4",
        }
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown preset '{s}' (expected fig2, fig3 or fig4)"
                ))
            })
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// How peak limits are attached to `full_csi_avg_peak` rows.
#[derive(Debug, Clone, PartialEq)]
pub enum PeakSpec {
    /// No peak limit (`Q_peak = ∞`).
    Absent,
    /// One curve per listed `Q_peak`; `inf` allowed.
    Fixed(Vec<f64>),
    /// One curve per listed `Q_peak/Q_avg` ratio, each `> 1`.
    Ratio(Vec<f64>),
}

impl PeakSpec {
    fn peaks_for(&self, q_avg: f64) -> Vec<f64> {
        match self {
            PeakSpec::Absent => vec![f64::INFINITY],
            PeakSpec::Fixed(v) => v.clone(),
            PeakSpec::Ratio(r) => r.iter().map(|r| r * q_avg).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub params: FadingParams,
    pub q_avg_grid: Vec<f64>,
    pub peak: PeakSpec,
    pub families: Vec<PolicyFamily>,
    pub n_samples: usize,
    pub seed: u64,
    pub tol: f64,
    /// Defaults to `10·γ̄_M` when unset.
    pub tau_max: Option<f64>,
    pub partitions: usize,
    pub out: Option<String>,
}

const FIG2_Q_AVG: [f64; 7] = [0.01, 0.03, 0.1, 0.3, 1.0, 3.0, 10.0];
const FIG34_Q_AVG: [f64; 7] = [0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0];

impl SweepConfig {
    /// Baseline configuration shared by all presets.
    pub fn new(params: FadingParams) -> Self {
        Self {
            params,
            q_avg_grid: FIG34_Q_AVG.to_vec(),
            peak: PeakSpec::Absent,
            families: vec![PolicyFamily::FullCsiAvg],
            n_samples: DEFAULT_SAMPLES,
            seed: DEFAULT_SEED,
            tol: DEFAULT_TOL,
            tau_max: None,
            partitions: DEFAULT_PARTITIONS,
            out: None,
        }
    }

    /// - `fig2`: γ̄ = (1, 1, 2), `Q_peak ∈ {0.5, 1, 2, ∞}`.
    /// - `fig3`: γ̄ = (1, 2, 2), `Q_peak/Q_avg ∈ {2, 4}` plus the unconstrained curve.
    /// - `fig4`: γ̄ = (1, 2, 2), full CSI vs. no eavesdropper CSI vs. on/off.
    pub fn preset(preset: Preset) -> Self {
        let fig2 = FadingParams {
            gamma_m: 1.0,
            gamma_e: 1.0,
            gamma_p: 2.0,
        };
        let fig34 = FadingParams {
            gamma_m: 1.0,
            gamma_e: 2.0,
            gamma_p: 2.0,
        };
        match preset {
            Preset::Fig2 => Self {
                q_avg_grid: FIG2_Q_AVG.to_vec(),
                peak: PeakSpec::Fixed(vec![0.5, 1.0, 2.0, f64::INFINITY]),
                families: vec![PolicyFamily::FullCsiAvgPeak],
                ..Self::new(fig2)
            },
            Preset::Fig3 => Self {
                peak: PeakSpec::Ratio(vec![2.0, 4.0]),
                families: vec![PolicyFamily::FullCsiAvgPeak, PolicyFamily::FullCsiAvg],
                ..Self::new(fig34)
            },
            Preset::Fig4 => Self {
                families: vec![
                    PolicyFamily::FullCsiAvg,
                    PolicyFamily::NoEcsi,
                    PolicyFamily::OnOff,
                ],
                ..Self::new(fig34)
            },
        }
    }

    pub fn tau_max(&self) -> f64 {
        self.tau_max
            .unwrap_or_else(|| default_tau_max(&self.params))
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if self.q_avg_grid.is_empty() {
            return Err(Error::Config("q_avg grid is empty".into()));
        }
        if self.q_avg_grid.iter().any(|q| !(q.is_finite() && *q > 0.0)) {
            return Err(Error::Config(
                "q_avg values must be positive and finite".into(),
            ));
        }
        if !self.q_avg_grid.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config(
                "q_avg grid must be strictly increasing".into(),
            ));
        }
        match &self.peak {
            PeakSpec::Absent => {}
            PeakSpec::Fixed(v) => {
                if v.is_empty() {
                    return Err(Error::Config("q_peak list is empty".into()));
                }
                if v.iter().any(|q| !(*q > 0.0)) {
                    return Err(Error::Config("q_peak values must be positive".into()));
                }
                if !v.windows(2).all(|w| w[0] < w[1]) {
                    return Err(Error::Config(
                        "q_peak values must be strictly increasing".into(),
                    ));
                }
            }
            PeakSpec::Ratio(r) => {
                if r.is_empty() {
                    return Err(Error::Config("q_peak_ratio list is empty".into()));
                }
                if let Some(bad) = r.iter().find(|r| !(r.is_finite() && **r > 1.0)) {
                    return Err(Error::Config(format!(
                        "q_peak_ratio must exceed 1 (peak above average), got {bad}"
                    )));
                }
                if !r.windows(2).all(|w| w[0] < w[1]) {
                    return Err(Error::Config(
                        "q_peak_ratio values must be strictly increasing".into(),
                    ));
                }
            }
        }
        if self.families.is_empty() {
            return Err(Error::Config("no policy families selected".into()));
        }
        if self.n_samples < MIN_SAMPLES {
            return Err(Error::Config(format!(
                "samples must be at least {MIN_SAMPLES}, got {}",
                self.n_samples
            )));
        }
        if !(self.tol > 0.0 && self.tol < 1.0) {
            return Err(Error::Config(format!(
                "tol must lie in (0, 1), got {}",
                self.tol
            )));
        }
        if let Some(t) = self.tau_max {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::Config(format!("tau_max must be positive, got {t}")));
            }
        }
        if self.partitions == 0 {
            return Err(Error::Config("partitions must be positive".into()));
        }
        Ok(())
    }

    /// Applies `key = value` lines. `#` starts a comment; lists are
    /// comma-separated; `inf` denotes an infinite peak limit.
    pub fn apply_kv(&mut self, text: &str) -> Result<()> {
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            self.set(key.trim(), value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", lineno + 1)))?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "gamma_m" => self.params.gamma_m = parse_f64(key, value)?,
            "gamma_e" => self.params.gamma_e = parse_f64(key, value)?,
            "gamma_p" => self.params.gamma_p = parse_f64(key, value)?,
            "q_avg" => self.q_avg_grid = parse_list(key, value)?,
            "q_peak" => {
                self.peak = match value {
                    "" | "none" => PeakSpec::Absent,
                    v => PeakSpec::Fixed(parse_list(key, v)?),
                }
            }
            "q_peak_ratio" => self.peak = PeakSpec::Ratio(parse_list(key, value)?),
            "policies" => {
                self.families = value
                    .split(',')
                    .map(|s| s.trim().parse())
                    .collect::<Result<_>>()?
            }
            "samples" => self.n_samples = parse_int(key, value)?,
            "seed" => self.seed = parse_int(key, value)?,
            "tol" => self.tol = parse_f64(key, value)?,
            "tau_max" => self.tau_max = Some(parse_f64(key, value)?),
            "partitions" => self.partitions = parse_int(key, value)?,
            "out" => self.out = Some(value.to_string()),
            other => return Err(Error::Config(format!("unknown key '{other}'"))),
        }
        Ok(())
    }
}

fn parse_f64(key: &str, value: &str) -> Result<f64> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{value}' as a number")))
}

fn parse_int<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .replace('_', "")
        .parse()
        .map_err(|_| Error::Config(format!("{key}: cannot parse '{value}' as an integer")))
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>> {
    value.split(',').map(|v| parse_f64(key, v.trim())).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowFlag {
    Ok,
    /// Peak limit caps the average below `Q_avg`; `λ` sits at its floor.
    Unattainable,
    /// Calibration or evaluation failed; rate columns are empty.
    Failed,
}

impl RowFlag {
    pub fn as_str(&self) -> &'static str {
        match self {
            RowFlag::Ok => "",
            RowFlag::Unattainable => "unattainable",
            RowFlag::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub q_avg: f64,
    pub q_peak: Option<f64>,
    pub family: PolicyFamily,
    pub lambda: Option<f64>,
    pub tau: Option<f64>,
    pub rate: Option<RateEstimate>,
    pub seed: u64,
    pub flag: RowFlag,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl SweepRow {
    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "{},{},{},{},{},{},{},{},{},{}",
            self.q_avg,
            opt(self.q_peak),
            self.family,
            opt(self.lambda),
            opt(self.tau),
            opt(self.rate.map(|r| r.mean)),
            opt(self.rate.map(|r| r.std_error)),
            self.rate
                .map(|r| r.n_samples.to_string())
                .unwrap_or_default(),
            self.seed,
            self.flag.as_str(),
        );
        s
    }
}

#[derive(Debug, Clone, Copy)]
struct Task {
    q_avg: f64,
    family: PolicyFamily,
    q_peak: Option<f64>,
}

fn tasks(cfg: &SweepConfig) -> Vec<Task> {
    let mut out = Vec::new();
    for &q_avg in &cfg.q_avg_grid {
        for &family in &cfg.families {
            if family == PolicyFamily::FullCsiAvgPeak {
                for q_peak in cfg.peak.peaks_for(q_avg) {
                    out.push(Task {
                        q_avg,
                        family,
                        q_peak: Some(q_peak),
                    });
                }
            } else {
                out.push(Task {
                    q_avg,
                    family,
                    q_peak: None,
                });
            }
        }
    }
    out
}

fn run_task(cfg: &SweepConfig, samples: &SampleSet, task: Task) -> SweepRow {
    let mut row = SweepRow {
        q_avg: task.q_avg,
        q_peak: task.q_peak,
        family: task.family,
        lambda: None,
        tau: None,
        rate: None,
        seed: cfg.seed,
        flag: RowFlag::Failed,
    };
    let outcome = (|| -> Result<()> {
        if task.family == PolicyFamily::OnOff {
            let opt = optimize_threshold(&cfg.params, task.q_avg, cfg.tau_max())?;
            row.tau = Some(opt.tau);
            row.rate = Some(secrecy_rate_on(&opt.policy(), samples)?);
            row.flag = RowFlag::Ok;
            return Ok(());
        }
        let constraints = ConstraintSet {
            q_avg: task.q_avg,
            q_peak: task.q_peak,
        };
        let report = calibrate_lambda_on(task.family, &constraints, cfg.tol, samples)?;
        row.lambda = Some(report.lambda_star);
        row.rate = Some(secrecy_rate_on(&report.policy, samples)?);
        row.flag = match report.flag {
            CalibrationFlag::Converged => RowFlag::Ok,
            CalibrationFlag::Unattainable => RowFlag::Unattainable,
        };
        Ok(())
    })();
    if outcome.is_err() {
        row.rate = None;
        row.flag = RowFlag::Failed;
    }
    row
}

/// Runs every `(q_avg, family, q_peak)` point of the sweep.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let samples = SampleSet::generate(&cfg.params, cfg.n_samples, cfg.seed, cfg.partitions)?;
    Ok(tasks(cfg)
        .into_par_iter()
        .map(|t| run_task(cfg, &samples, t))
        .collect())
}

pub fn write_csv<W: io::Write>(rows: &[SweepRow], mut w: W) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", r.to_csv())?;
    }
    Ok(())
}

pub fn to_csv_string(rows: &[SweepRow]) -> String {
    let mut buf = Vec::new();
    write_csv(rows, &mut buf).expect("writing to a Vec cannot fail");
    String::from_utf8(buf).expect("CSV is ASCII")
}
