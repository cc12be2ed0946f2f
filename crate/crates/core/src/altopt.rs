//! Alternating optimization of the power allocation and the reflection
//! vector, plus the fixed benchmark strategies.
//!
//! With `φ` fixed, water-filling is optimal for `p`; with `p` fixed, the
//! SCA solver improves `φ` from a warm start. Alternating the two never
//! decreases the rate, which is bounded, so the loop converges.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChannelRealization, IrsCoefficients, LinkResponse, PowerAllocation, SystemConfig};
use crate::sca::run_sca;
use crate::sdr_init::cpm_init;
use crate::wf::waterfill;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// SDR initialization followed by alternating optimization.
    Iterative,
    /// SDR initialization and one water-filling pass.
    CpmInit,
    /// `φ = 1` and one water-filling pass.
    RandomPhase,
    /// `φ = 0`, i.e. water-filling on the direct link alone.
    NoIrs,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Iterative, Scheme::CpmInit, Scheme::RandomPhase, Scheme::NoIrs];

    pub fn tag(self) -> &'static str {
        match self {
            Scheme::Iterative => "iterative",
            Scheme::CpmInit => "cpm_init",
            Scheme::RandomPhase => "random_phase",
            Scheme::NoIrs => "no_irs",
        }
    }

    fn needs_sdr(self) -> bool {
        matches!(self, Scheme::Iterative | Scheme::CpmInit)
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL
            .into_iter()
            .find(|sc| sc.tag() == s.trim())
            .ok_or_else(|| Error::invalid(format!("unknown scheme `{s}`")))
    }
}

#[derive(Clone, Debug)]
pub struct AltOptResult {
    pub p: PowerAllocation,
    pub phi: IrsCoefficients,
    /// Rate in bps/Hz after each water-filling pass; entry 0 is the rate at
    /// the starting `φ`.
    pub rate_trace: Vec<f64>,
    /// Rate in bps/Hz right after each SCA call, before re-allocating power.
    pub sca_rate_trace: Vec<f64>,
    /// Outer iterations (one SCA call plus one water-filling pass each).
    pub iterations: usize,
    /// Linearize-and-solve rounds summed over all SCA calls.
    pub sca_iterations: usize,
    /// Some inner solve hit its iteration cap.
    pub inner_warning: bool,
    pub scheme: Scheme,
}

impl AltOptResult {
    pub fn rate(&self) -> f64 {
        *self.rate_trace.last().expect("trace holds the starting rate")
    }
}

fn allocate(resp: &LinkResponse, phi: &IrsCoefficients, cfg: &SystemConfig) -> Result<PowerAllocation> {
    Ok(waterfill(&resp.cnr(phi, cfg), cfg.total_power)?.p)
}

/// Water-filling at a fixed `φ`, no further optimization.
pub fn single_pass(phi: IrsCoefficients, resp: &LinkResponse, cfg: &SystemConfig, scheme: Scheme) -> Result<AltOptResult> {
    let p = allocate(resp, &phi, cfg)?;
    let rate = resp.rate(&p, &phi, cfg);
    Ok(AltOptResult {
        p,
        phi,
        rate_trace: vec![rate],
        sca_rate_trace: Vec::new(),
        iterations: 0,
        sca_iterations: 0,
        inner_warning: false,
        scheme,
    })
}

/// Alternates water-filling and SCA from `phi0` until the relative rate
/// gain of an outer iteration is at most `tol_outer`.
pub fn alternate(phi0: &IrsCoefficients, resp: &LinkResponse, cfg: &SystemConfig) -> Result<AltOptResult> {
    Error::check_len("reflection vector", phi0.len(), resp.m_elems())?;
    let scale = cfg.rate_scale();
    let mut phi = phi0.clone();
    let mut p = allocate(resp, &phi, cfg)?;
    let mut value = resp.sum_log_rate(&p, &phi, cfg);
    let mut rate_trace = vec![value * scale];
    let mut sca_rate_trace = Vec::new();
    let mut sca_iterations = 0;
    let mut inner_warning = false;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        iterations += 1;
        let sca = run_sca(&phi, &p, resp, cfg);
        sca_iterations += sca.iterations;
        inner_warning |= sca.inner_warning;
        sca_rate_trace.push(sca.objective() * scale);
        phi = sca.state.phi;
        p = allocate(resp, &phi, cfg)?;
        let next = resp.sum_log_rate(&p, &phi, cfg);
        rate_trace.push(next * scale);
        let gain = next - value;
        value = next;
        if !(gain > cfg.tol_outer * value.abs()) {
            break;
        }
    }

    Ok(AltOptResult {
        p,
        phi,
        rate_trace,
        sca_rate_trace,
        iterations,
        sca_iterations,
        inner_warning,
        scheme: Scheme::Iterative,
    })
}

/// Runs every requested scheme on one realization. The SDR initialization
/// is computed once and shared by `iterative` and `cpm_init`, so the former
/// starts exactly from the latter's output.
pub fn run_schemes<R: Rng + ?Sized>(
    schemes: &[Scheme],
    ch: &ChannelRealization,
    cfg: &SystemConfig,
    rng: &mut R,
) -> Result<Vec<AltOptResult>> {
    ch.check(cfg)?;
    let resp = LinkResponse::new(ch, cfg)?;
    let phi0 = if schemes.iter().any(|s| s.needs_sdr()) {
        Some(cpm_init(ch, cfg, rng)?.0)
    } else {
        None
    };
    let m = cfg.m_elems;
    schemes
        .iter()
        .map(|&scheme| match scheme {
            Scheme::Iterative => {
                let mut out = alternate(phi0.as_ref().expect("computed above"), &resp, cfg)?;
                out.scheme = scheme;
                Ok(out)
            }
            Scheme::CpmInit => single_pass(phi0.clone().expect("computed above"), &resp, cfg, scheme),
            Scheme::RandomPhase => single_pass(IrsCoefficients::ones(m), &resp, cfg, scheme),
            Scheme::NoIrs => single_pass(IrsCoefficients::zeros(m), &resp, cfg, scheme),
        })
        .collect()
}

pub fn run_scheme<R: Rng + ?Sized>(
    scheme: Scheme,
    ch: &ChannelRealization,
    cfg: &SystemConfig,
    rng: &mut R,
) -> Result<AltOptResult> {
    Ok(run_schemes(&[scheme], ch, cfg, rng)?.remove(0))
}
