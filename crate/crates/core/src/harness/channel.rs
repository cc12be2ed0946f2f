//! Random channel realizations with sparse exponentially decaying taps.

use nalgebra::DMatrix;
use rand::seq::index::sample;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ChannelRealization, SystemConfig, C64};

/// What the SNR knob refers to when deriving the noise variance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SnrReference {
    /// `γ = P (P_d + P_r) / (N σ²)` with both links counted.
    Total,
    /// `γ_d = P P_d / (N σ²)`, the direct link alone.
    DirectOnly,
    /// Link powers calibrated for a single reflecting element and per-element
    /// variances held fixed as `M` grows, so the reflected power scales
    /// with `M`; `γ̄` counts both links at `M = 1`.
    PerElementM1,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelGenSpec {
    /// Nonzero taps per link, at distinct random delays.
    pub n_nonzero_taps: usize,
    /// Tap `l` has average power proportional to `exp(−decay_rate · l)`.
    pub decay_rate: f64,
    /// Reflected-to-direct average power ratio `P_r / P_d`.
    pub alpha: f64,
    pub snr_db: f64,
    pub snr_reference: SnrReference,
}

impl Default for ChannelGenSpec {
    fn default() -> Self {
        ChannelGenSpec {
            n_nonzero_taps: 8,
            decay_rate: 0.5,
            alpha: 10.0,
            snr_db: 15.0,
            snr_reference: SnrReference::Total,
        }
    }
}

impl ChannelGenSpec {
    pub fn validate(&self, cfg: &SystemConfig) -> Result<()> {
        if self.n_nonzero_taps > cfg.l_direct.min(cfg.l_reflect) {
            return Err(Error::invalid(format!(
                "n_nonzero_taps = {} exceeds the tap budget min(l_direct, l_reflect) = {}",
                self.n_nonzero_taps,
                cfg.l_direct.min(cfg.l_reflect)
            )));
        }
        if !(self.decay_rate >= 0.0 && self.decay_rate.is_finite()) {
            return Err(Error::invalid("decay_rate must be finite and nonnegative"));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::invalid("alpha must be finite and nonnegative"));
        }
        if !self.snr_db.is_finite() {
            return Err(Error::invalid("snr_db must be finite"));
        }
        Ok(())
    }

    /// `(P_d, P_r)` at the configured `M`.
    pub fn link_powers(&self, m_elems: usize) -> (f64, f64) {
        let pd = 1.0 / (1.0 + self.alpha);
        let pr = self.alpha / (1.0 + self.alpha);
        match self.snr_reference {
            SnrReference::PerElementM1 => (pd, pr * m_elems as f64),
            SnrReference::Total | SnrReference::DirectOnly => (pd, pr),
        }
    }

    /// Noise variance realizing `snr_db` under the chosen reference.
    pub fn noise_var(&self, cfg: &SystemConfig) -> f64 {
        let snr = 10f64.powf(self.snr_db / 10.0);
        let pd = 1.0 / (1.0 + self.alpha);
        let reference_power = match self.snr_reference {
            SnrReference::Total | SnrReference::PerElementM1 => 1.0,
            SnrReference::DirectOnly => pd,
        };
        cfg.total_power * reference_power / (cfg.n_sc as f64 * snr)
    }
}

fn cscg<R: Rng + ?Sized>(rng: &mut R, var: f64) -> C64 {
    let s = (var / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re * s, im * s)
}

/// Picks `k` distinct delays below `budget` and returns them with their
/// normalized power weights.
fn tap_profile<R: Rng + ?Sized>(rng: &mut R, budget: usize, k: usize, decay: f64) -> Vec<(usize, f64)> {
    let mut taps: Vec<usize> = sample(rng, budget, k).into_vec();
    taps.sort_unstable();
    let total: f64 = taps.iter().map(|&l| (-decay * l as f64).exp()).sum();
    taps.into_iter().map(|l| (l, (-decay * l as f64).exp() / total)).collect()
}

/// Draws one realization: the direct link averages `P_d` in total power and
/// the cascaded taps `g_lᴴ diag(h_l)` average `P_r`, split evenly between
/// the two hops and across elements.
pub fn generate_channel<R: Rng + ?Sized>(spec: &ChannelGenSpec, cfg: &SystemConfig, rng: &mut R) -> Result<ChannelRealization> {
    spec.validate(cfg)?;
    let m = cfg.m_elems;
    let (pd, pr) = spec.link_powers(m);
    let k = spec.n_nonzero_taps;

    let mut h_direct = vec![C64::new(0.0, 0.0); cfg.l_direct];
    for (l, w) in tap_profile(rng, cfg.l_direct, k, spec.decay_rate) {
        h_direct[l] = cscg(rng, pd * w);
    }

    let mut h = DMatrix::zeros(m, cfg.l_reflect);
    let mut g = DMatrix::zeros(m, cfg.l_reflect);
    if m > 0 {
        for (l, w) in tap_profile(rng, cfg.l_reflect, k, spec.decay_rate) {
            let hop_var = (pr * w / m as f64).sqrt();
            for e in 0..m {
                h[(e, l)] = cscg(rng, hop_var);
                g[(e, l)] = cscg(rng, hop_var);
            }
        }
    }
    ChannelRealization::new(h_direct, h, g)
}
