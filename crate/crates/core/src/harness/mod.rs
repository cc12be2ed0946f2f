//! Monte-Carlo experiments over random channel realizations.
//!
//! Every `(sweep point, realization)` pair draws from its own ChaCha stream,
//! so results do not depend on thread count or scheduling. Realizations
//! run in parallel; statistics are accumulated in index order afterwards.

pub mod channel;
pub mod config;

use std::fmt;
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::altopt::{alternate, run_schemes, AltOptResult, Scheme};
use crate::error::{Error, Result};
use crate::model::{IrsCoefficients, LinkResponse, SystemConfig};
use crate::sdr_init::cpm_init;
use channel::{generate_channel, ChannelGenSpec, SnrReference};
use config::ConfigFile;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    /// Rate after each outer iteration of the alternating optimization.
    Convergence,
    /// Mean rate versus SNR in dB.
    Snr,
    /// Mean rate versus the number of reflecting elements.
    M,
    /// Mean rate versus the reflected-to-direct power ratio.
    Alpha,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 4] = [ExperimentKind::Convergence, ExperimentKind::Snr, ExperimentKind::M, ExperimentKind::Alpha];

    pub fn tag(self) -> &'static str {
        match self {
            ExperimentKind::Convergence => "convergence",
            ExperimentKind::Snr => "snr",
            ExperimentKind::M => "m",
            ExperimentKind::Alpha => "alpha",
        }
    }

    fn stream_id(self) -> u64 {
        match self {
            ExperimentKind::Convergence => 1,
            ExperimentKind::Snr => 2,
            ExperimentKind::M => 3,
            ExperimentKind::Alpha => 4,
        }
    }

    pub fn default_sweep(self, file: &ConfigFile) -> Vec<f64> {
        match self {
            ExperimentKind::Convergence => vec![file.channel.snr_db],
            ExperimentKind::Snr => vec![0.0, 5.0, 10.0, 15.0, 20.0],
            ExperimentKind::M => vec![10.0, 20.0, 30.0, 40.0],
            ExperimentKind::Alpha => vec![1e-3, 1e-1, 1.0, 10.0, 100.0],
        }
    }

    pub fn default_schemes(self) -> Vec<Scheme> {
        match self {
            ExperimentKind::Convergence => vec![Scheme::CpmInit, Scheme::RandomPhase],
            _ => Scheme::ALL.to_vec(),
        }
    }

    /// Channel settings this experiment uses unless the file sets them:
    /// the M sweep runs at 5 dB with the total link power held fixed as `M`
    /// grows, the α sweep is referenced to the direct link at 10 dB.
    fn channel_defaults(self, file: &ConfigFile) -> ChannelGenSpec {
        let mut ch = file.channel.clone();
        let (reference, snr_db) = match self {
            ExperimentKind::Convergence | ExperimentKind::Snr => (SnrReference::Total, None),
            ExperimentKind::M => (SnrReference::Total, Some(5.0)),
            ExperimentKind::Alpha => (SnrReference::DirectOnly, Some(10.0)),
        };
        if !file.is_explicit("snr_reference") {
            ch.snr_reference = reference;
        }
        if let Some(db) = snr_db.filter(|_| !file.is_explicit("snr_db")) {
            ch.snr_db = db;
        }
        ch
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.tag() == s)
            .ok_or_else(|| Error::invalid(format!("unknown experiment `{s}`")))
    }
}

#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    /// Values of the swept quantity; a single SNR in dB for convergence runs.
    pub sweep: Vec<f64>,
    pub realizations: usize,
    /// System parameters; `noise_var` is re-derived at every sweep point.
    pub base: SystemConfig,
    pub channel: ChannelGenSpec,
    /// For convergence runs, each scheme selects a starting point for the
    /// alternating optimization: SDR for `iterative` and `cpm_init`, all
    /// ones for `random_phase`, zeros for `no_irs`.
    pub schemes: Vec<Scheme>,
    pub out_path: PathBuf,
}

impl ExperimentSpec {
    pub fn new(kind: ExperimentKind, file: &ConfigFile, out_path: impl Into<PathBuf>) -> Self {
        ExperimentSpec {
            kind,
            sweep: kind.default_sweep(file),
            realizations: 100,
            base: file.system.clone(),
            channel: kind.channel_defaults(file),
            schemes: kind.default_schemes(),
            out_path: out_path.into(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.base.seed
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweep.is_empty() {
            return Err(Error::invalid("sweep is empty"));
        }
        if !self.sweep.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::invalid("sweep must be strictly increasing"));
        }
        if self.realizations == 0 {
            return Err(Error::invalid("realizations must be at least 1"));
        }
        if self.schemes.is_empty() {
            return Err(Error::invalid("no schemes selected"));
        }
        for &x in &self.sweep {
            let (cfg, ch) = self.point(x)?;
            cfg.validate()?;
            ch.validate(&cfg)?;
        }
        Ok(())
    }

    /// System and channel settings at one sweep value.
    pub fn point(&self, x: f64) -> Result<(SystemConfig, ChannelGenSpec)> {
        let mut cfg = self.base.clone();
        let mut ch = self.channel.clone();
        match self.kind {
            ExperimentKind::Convergence | ExperimentKind::Snr => ch.snr_db = x,
            ExperimentKind::Alpha => ch.alpha = x,
            ExperimentKind::M => {
                if !(x >= 1.0 && x.fract() == 0.0 && x <= u32::MAX as f64) {
                    return Err(Error::invalid(format!("element count {x} is not a positive integer")));
                }
                cfg.m_elems = x as usize;
            }
        }
        cfg.noise_var = ch.noise_var(&cfg);
        Ok((cfg, ch))
    }

    fn rng(&self, point: usize, realization: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed());
        rng.set_stream(self.kind.stream_id() << 56 | (point as u64) << 32 | realization as u64);
        rng
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SchemeSummary {
    pub scheme: Scheme,
    /// Rate of every realization in index order.
    pub rates: Vec<f64>,
    pub mean: f64,
    /// Standard error of the mean.
    pub stderr: f64,
}

impl SchemeSummary {
    fn new(scheme: Scheme, rates: Vec<f64>) -> Self {
        let n = rates.len() as f64;
        let mean = rates.iter().sum::<f64>() / n;
        let stderr = if rates.len() > 1 {
            (rates.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (n - 1.0) / n).sqrt()
        } else {
            0.0
        };
        SchemeSummary {
            scheme,
            rates,
            mean,
            stderr,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepPoint {
    pub x: f64,
    pub noise_var: f64,
    pub m_elems: usize,
    pub schemes: Vec<SchemeSummary>,
}

impl SweepPoint {
    pub fn scheme(&self, scheme: Scheme) -> Option<&SchemeSummary> {
        self.schemes.iter().find(|s| s.scheme == scheme)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceTrace {
    pub scheme: Scheme,
    pub realization: usize,
    /// Rate after each outer iteration, starting with the initial point.
    pub rates: Vec<f64>,
    pub sca_iterations: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentResult {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub realizations: usize,
    pub points: Vec<SweepPoint>,
    /// Filled for convergence runs only.
    pub traces: Vec<ConvergenceTrace>,
}

impl ExperimentResult {
    pub fn traces_for(&self, scheme: Scheme) -> impl Iterator<Item = &ConvergenceTrace> {
        self.traces.iter().filter(move |t| t.scheme == scheme)
    }
}

fn convergence_runs(spec: &ExperimentSpec, cfg: &SystemConfig, ch: &ChannelGenSpec, rng: &mut ChaCha8Rng) -> Result<Vec<AltOptResult>> {
    let channel = generate_channel(ch, cfg, rng)?;
    let resp = LinkResponse::new(&channel, cfg)?;
    let needs_sdr = spec.schemes.iter().any(|s| matches!(s, Scheme::Iterative | Scheme::CpmInit));
    let phi0 = if needs_sdr { Some(cpm_init(&channel, cfg, rng)?.0) } else { None };
    spec.schemes
        .iter()
        .map(|&scheme| {
            let start = match scheme {
                Scheme::Iterative | Scheme::CpmInit => phi0.clone().expect("computed above"),
                Scheme::RandomPhase => IrsCoefficients::ones(cfg.m_elems),
                Scheme::NoIrs => IrsCoefficients::zeros(cfg.m_elems),
            };
            let mut out = alternate(&start, &resp, cfg)?;
            out.scheme = scheme;
            Ok(out)
        })
        .collect()
}

/// Runs the experiment without touching the filesystem.
pub fn simulate(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let points: Vec<(SystemConfig, ChannelGenSpec)> = spec.sweep.iter().map(|&x| spec.point(x)).collect::<Result<_>>()?;
    let reps = spec.realizations;
    let jobs: Vec<(usize, usize)> = (0..points.len()).flat_map(|i| (0..reps).map(move |r| (i, r))).collect();

    let runs: Vec<Vec<AltOptResult>> = jobs
        .par_iter()
        .map(|&(i, r)| {
            let (cfg, ch) = &points[i];
            let mut rng = spec.rng(i, r);
            if spec.kind == ExperimentKind::Convergence {
                convergence_runs(spec, cfg, ch, &mut rng)
            } else {
                let channel = generate_channel(ch, cfg, &mut rng)?;
                run_schemes(&spec.schemes, &channel, cfg, &mut rng)
            }
        })
        .collect::<Result<_>>()?;

    let mut sweep = Vec::with_capacity(points.len());
    let mut traces = Vec::new();
    for (i, (cfg, _)) in points.iter().enumerate() {
        let block = &runs[i * reps..(i + 1) * reps];
        let schemes = spec
            .schemes
            .iter()
            .enumerate()
            .map(|(s, &scheme)| SchemeSummary::new(scheme, block.iter().map(|run| run[s].rate()).collect()))
            .collect();
        sweep.push(SweepPoint {
            x: spec.sweep[i],
            noise_var: cfg.noise_var,
            m_elems: cfg.m_elems,
            schemes,
        });
        if spec.kind == ExperimentKind::Convergence {
            for (r, run) in block.iter().enumerate() {
                for out in run {
                    traces.push(ConvergenceTrace {
                        scheme: out.scheme,
                        realization: r,
                        rates: out.rate_trace.clone(),
                        sca_iterations: out.sca_iterations,
                    });
                }
            }
        }
    }

    Ok(ExperimentResult {
        kind: spec.kind,
        seed: spec.seed(),
        realizations: reps,
        points: sweep,
        traces,
    })
}

/// Sidecar path for the resolved configuration: `out.csv` → `out.config.json`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("config.json")
}

fn write_csv(file: File, result: &ExperimentResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(file);
    if result.kind == ExperimentKind::Convergence {
        w.write_record(["iter", "scheme", "rate_bpshz", "realization"])?;
        for t in &result.traces {
            for (k, rate) in t.rates.iter().enumerate() {
                w.write_record([k.to_string(), t.scheme.to_string(), rate.to_string(), t.realization.to_string()])?;
            }
        }
    } else {
        w.write_record(["x", "scheme", "mean_rate_bpshz", "stderr", "realizations", "seed"])?;
        for p in &result.points {
            for s in &p.schemes {
                w.write_record([
                    p.x.to_string(),
                    s.scheme.to_string(),
                    s.mean.to_string(),
                    s.stderr.to_string(),
                    result.realizations.to_string(),
                    result.seed.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

fn sidecar_json(spec: &ExperimentSpec, result: &ExperimentResult) -> Result<String> {
    let points: Vec<_> = result
        .points
        .iter()
        .map(|p| serde_json::json!({ "x": p.x, "noise_var": p.noise_var, "m_elems": p.m_elems }))
        .collect();
    let doc = serde_json::json!({
        "experiment": spec.kind,
        "seed": spec.seed(),
        "realizations": spec.realizations,
        "sweep": spec.sweep,
        "schemes": spec.schemes,
        "system": spec.base,
        "channel": spec.channel,
        "points": points,
    });
    Ok(serde_json::to_string_pretty(&doc)? + "\n")
}

/// Runs the experiment and writes the CSV plus the JSON sidecar. Both files
/// are created before any computation, so an unwritable destination fails
/// fast.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let csv_file = File::create(&spec.out_path)?;
    let mut json_file = File::create(sidecar_path(&spec.out_path))?;
    let result = simulate(spec)?;
    write_csv(csv_file, &result)?;
    json_file.write_all(sidecar_json(spec, &result)?.as_bytes())?;
    Ok(result)
}
