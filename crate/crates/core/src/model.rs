//! Link model: channel taps, reflect-array coefficients, frequency response
//! and achievable rate of a cyclic-prefixed OFDM link.
//!
//! The composite impulse response is the direct link plus one reflected
//! contribution per tap,
//!
//! ```text
//! h̃[l] = h_d[l] + g_lᴴ diag(φ) h_l        (l < L₀)
//! ```
//!
//! which is affine in the reflection vector `φ`. Writing
//! `ν_l = conj(h_l) ∘ g_l` and `V = [ν_0 … ν_{L₀-1} 0 …] ∈ ℂ^{M×N}` gives
//! `h̃ = h_d + Vᴴ φ`. The frequency response uses the non-unitary DFT
//! `v_n = Σ_k h̃_k e^{-j2πnk/N}`, so `Σ|v_n|² = N Σ|h̃_k|²`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Slack allowed on every inequality constraint (`|φ_m| ≤ 1`, `p_n ≥ 0`,
/// `Σ p_n ≤ P`).
pub const FEAS_TOL: f64 = 1e-9;

/// MCS gap, stored in dB as configured and converted to linear scale once.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(from = "f64", into = "f64")]
pub struct Gap {
    db: f64,
    linear: f64,
}

impl Gap {
    pub fn from_db(db: f64) -> Self {
        Gap {
            db,
            linear: 10f64.powf(db / 10.0),
        }
    }

    pub fn db(self) -> f64 {
        self.db
    }

    pub fn linear(self) -> f64 {
        self.linear
    }
}

impl From<f64> for Gap {
    fn from(db: f64) -> Self {
        Gap::from_db(db)
    }
}

impl From<Gap> for f64 {
    fn from(g: Gap) -> f64 {
        g.db
    }
}

/// Dimensions, link budget and solver controls shared by every module.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SystemConfig {
    /// Number of subcarriers `N`.
    pub n_sc: usize,
    /// Number of reflecting elements `M`.
    pub m_elems: usize,
    /// Direct-link tap count `L`.
    pub l_direct: usize,
    /// Reflected-link tap count `L₀`.
    pub l_reflect: usize,
    /// Cyclic prefix length `μ` in samples.
    pub cp_len: usize,
    /// Transmit power budget `P`.
    pub total_power: f64,
    #[serde(rename = "gap_db")]
    pub gap: Gap,
    /// Receiver noise variance `σ²` per subcarrier.
    pub noise_var: f64,
    /// Number of Gaussian randomization candidates.
    pub q_rand: usize,
    pub seed: u64,
    /// Relative objective change that ends the alternating and SCA loops.
    pub tol_outer: f64,
    /// Projected-gradient norm that ends the inner surrogate solve.
    pub tol_inner: f64,
    /// Iteration cap for the alternating loop and for each SCA run.
    pub max_iters: usize,
    /// Iteration cap for each inner surrogate solve.
    pub max_inner_iters: usize,
}

impl Default for SystemConfig {
    fn default() -> Self {
        SystemConfig {
            n_sc: 64,
            m_elems: 20,
            l_direct: 16,
            l_reflect: 16,
            cp_len: 16,
            total_power: 1.0,
            gap: Gap::from_db(8.8),
            // 15 dB average SNR with unit total channel power.
            noise_var: 1.0 / (64.0 * 10f64.powf(1.5)),
            q_rand: 50,
            seed: 0,
            tol_outer: 1e-6,
            tol_inner: 1e-7,
            max_iters: 100,
            max_inner_iters: 500,
        }
    }
}

impl SystemConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::invalid(msg));
        if self.n_sc == 0 {
            return bad("n_sc must be at least 1");
        }
        if self.m_elems == 0 {
            return bad("m_elems must be at least 1");
        }
        if self.l_direct == 0 || self.l_reflect == 0 {
            return bad("tap counts must be at least 1");
        }
        if self.l_direct > self.n_sc || self.l_reflect > self.n_sc {
            return bad("tap counts cannot exceed n_sc");
        }
        if self.cp_len < self.l_direct.max(self.l_reflect) {
            return bad("cp_len must be at least max(l_direct, l_reflect)");
        }
        if !(self.total_power > 0.0 && self.total_power.is_finite()) {
            return bad("total_power must be positive and finite");
        }
        if !(self.noise_var > 0.0 && self.noise_var.is_finite()) {
            return bad("noise_var must be positive and finite");
        }
        if !(self.gap.linear() >= 1.0 && self.gap.linear().is_finite()) {
            return bad("gap_db must be >= 0 dB");
        }
        if self.q_rand == 0 {
            return bad("q_rand must be at least 1");
        }
        if !(self.tol_outer > 0.0 && self.tol_inner > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.max_iters == 0 || self.max_inner_iters == 0 {
            return bad("iteration caps must be at least 1");
        }
        Ok(())
    }

    /// `Γσ²`, the denominator of every per-subcarrier SNR.
    pub fn noise_floor(&self) -> f64 {
        self.gap.linear() * self.noise_var
    }

    /// `1 / (N + μ)`: converts a subcarrier sum of log-rates to bps/Hz.
    pub fn rate_scale(&self) -> f64 {
        1.0 / (self.n_sc + self.cp_len) as f64
    }
}

/// Tap-domain channels of one fading block. Zero padding to `N` is left to
/// consumers.
#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    h_direct: Vec<C64>,
    h_bs_irs: DMatrix<C64>,
    g_irs_user: DMatrix<C64>,
}

impl ChannelRealization {
    /// `h_bs_irs` and `g_irs_user` are `M × L₀`, column `l` holding tap `l`.
    pub fn new(
        h_direct: Vec<C64>,
        h_bs_irs: DMatrix<C64>,
        g_irs_user: DMatrix<C64>,
    ) -> Result<Self> {
        if h_bs_irs.shape() != g_irs_user.shape() {
            return Err(Error::invalid(format!(
                "BS-IRS taps are {:?} but IRS-user taps are {:?}",
                h_bs_irs.shape(),
                g_irs_user.shape()
            )));
        }
        let finite = |z: &C64| z.re.is_finite() && z.im.is_finite();
        if !(h_direct.iter().all(finite)
            && h_bs_irs.iter().all(finite)
            && g_irs_user.iter().all(finite))
        {
            return Err(Error::invalid("channel taps must be finite"));
        }
        Ok(ChannelRealization {
            h_direct,
            h_bs_irs,
            g_irs_user,
        })
    }

    pub fn h_direct(&self) -> &[C64] {
        &self.h_direct
    }

    pub fn h_bs_irs(&self) -> &DMatrix<C64> {
        &self.h_bs_irs
    }

    pub fn g_irs_user(&self) -> &DMatrix<C64> {
        &self.g_irs_user
    }

    pub fn m_elems(&self) -> usize {
        self.h_bs_irs.nrows()
    }

    pub fn l_reflect(&self) -> usize {
        self.h_bs_irs.ncols()
    }

    pub fn check(&self, cfg: &SystemConfig) -> Result<()> {
        Error::check_len("direct taps", self.h_direct.len(), cfg.l_direct)?;
        Error::check_len("reflect-array elements", self.m_elems(), cfg.m_elems)?;
        Error::check_len("reflected taps", self.l_reflect(), cfg.l_reflect)?;
        if cfg.l_direct > cfg.n_sc || cfg.l_reflect > cfg.n_sc {
            return Err(Error::invalid("tap counts cannot exceed n_sc"));
        }
        Ok(())
    }

    /// Direct taps zero-padded to length `n`.
    pub fn padded_direct(&self, n: usize) -> DVector<C64> {
        let mut h = DVector::zeros(n);
        for (dst, src) in h.iter_mut().zip(&self.h_direct) {
            *dst = *src;
        }
        h
    }
}

/// Reflection vector `φ`, one complex coefficient per element with
/// `|φ_m| ≤ 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct IrsCoefficients(DVector<C64>);

impl IrsCoefficients {
    pub fn new(phi: DVector<C64>) -> Result<Self> {
        if let Some((m, z)) = phi
            .iter()
            .enumerate()
            .find(|(_, z)| !(z.norm() <= 1.0 + FEAS_TOL))
        {
            return Err(Error::invalid(format!(
                "reflection coefficient {m} has modulus {} > 1",
                z.norm()
            )));
        }
        Ok(IrsCoefficients(phi))
    }

    /// Radially clips every entry onto the unit disk.
    pub fn projected(mut phi: DVector<C64>) -> Self {
        project_unit_disks(&mut phi);
        IrsCoefficients(phi)
    }

    pub fn zeros(m: usize) -> Self {
        IrsCoefficients(DVector::zeros(m))
    }

    /// All elements at full amplitude and zero phase.
    pub fn ones(m: usize) -> Self {
        IrsCoefficients(DVector::from_element(m, C64::new(1.0, 0.0)))
    }

    pub fn from_phases(theta: &[f64]) -> Self {
        IrsCoefficients(DVector::from_iterator(
            theta.len(),
            theta.iter().map(|&t| C64::from_polar(1.0, t)),
        ))
    }

    pub fn as_vector(&self) -> &DVector<C64> {
        &self.0
    }

    pub fn into_vector(self) -> DVector<C64> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn max_modulus(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

pub(crate) fn project_unit_disks(phi: &mut DVector<C64>) {
    for z in phi.iter_mut() {
        let r = z.norm();
        if r > 1.0 {
            *z /= r;
        }
    }
}

/// Per-subcarrier transmit powers.
#[derive(Clone, Debug, PartialEq)]
pub struct PowerAllocation(Vec<f64>);

impl PowerAllocation {
    pub fn new(p: Vec<f64>, total_power: f64) -> Result<Self> {
        if p.iter().any(|&x| !(x >= -FEAS_TOL) || !x.is_finite()) {
            return Err(Error::invalid("subcarrier powers must be finite and nonnegative"));
        }
        let sum: f64 = p.iter().sum();
        if sum > total_power * (1.0 + FEAS_TOL) {
            return Err(Error::invalid(format!(
                "allocation uses {sum} but the budget is {total_power}"
            )));
        }
        Ok(PowerAllocation(p))
    }

    pub fn zeros(n: usize) -> Self {
        PowerAllocation(vec![0.0; n])
    }

    /// Equal split of `total_power` over `n` subcarriers.
    pub fn uniform(n: usize, total_power: f64) -> Self {
        PowerAllocation(vec![total_power / n as f64; n])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Composite impulse response, its frequency response and the `V` matrix it
/// was built from.
#[derive(Clone, Debug)]
pub struct EffectiveChannel {
    pub v: DVector<C64>,
    pub v_mat: DMatrix<C64>,
    pub cir: DVector<C64>,
}

impl EffectiveChannel {
    pub fn new(ch: &ChannelRealization, phi: &IrsCoefficients, cfg: &SystemConfig) -> Result<Self> {
        let v_mat = build_v_matrix(ch, cfg)?;
        Error::check_len("reflection vector", phi.len(), cfg.m_elems)?;
        let cir = ch.padded_direct(cfg.n_sc) + v_mat.ad_mul(phi.as_vector());
        let v = DVector::from_vec(cfr(cir.as_slice()));
        Ok(EffectiveChannel { v, v_mat, cir })
    }
}

/// `V ∈ ℂ^{M×N}` with column `l` equal to `conj(h_l) ∘ g_l` for `l < L₀` and
/// zero beyond, so that `(Vᴴφ)_l = g_lᴴ diag(φ) h_l`.
pub fn build_v_matrix(ch: &ChannelRealization, cfg: &SystemConfig) -> Result<DMatrix<C64>> {
    ch.check(cfg)?;
    let (m, l0) = (cfg.m_elems, cfg.l_reflect);
    let mut v = DMatrix::zeros(m, cfg.n_sc);
    for l in 0..l0 {
        for e in 0..m {
            v[(e, l)] = ch.h_bs_irs[(e, l)].conj() * ch.g_irs_user[(e, l)];
        }
    }
    Ok(v)
}

/// Zero-padded composite impulse response `h_d + Vᴴ φ`.
pub fn compose_cir(
    ch: &ChannelRealization,
    phi: &IrsCoefficients,
    cfg: &SystemConfig,
) -> Result<DVector<C64>> {
    let v = build_v_matrix(ch, cfg)?;
    Error::check_len("reflection vector", phi.len(), cfg.m_elems)?;
    Ok(ch.padded_direct(cfg.n_sc) + v.ad_mul(phi.as_vector()))
}

/// Forward DFT `v_n = Σ_k x_k e^{-j2πnk/N}` without normalization.
pub fn cfr(cir: &[C64]) -> Vec<C64> {
    let mut buf = cir.to_vec();
    if buf.len() > 1 {
        FftPlanner::new()
            .plan_fft_forward(buf.len())
            .process(&mut buf);
    }
    buf
}

/// Effective CNR `|v_n|² / (Γσ²)` per subcarrier.
pub fn cnr(v: &[C64], cfg: &SystemConfig) -> Vec<f64> {
    let floor = cfg.noise_floor();
    v.iter().map(|z| z.norm_sqr() / floor).collect()
}

/// Un-normalized sum `Σ_n log₂(1 + |v_n|² p_n / (Γσ²))`, the objective the
/// solvers maximize.
pub fn sum_log_rate(p: &[f64], v: &[C64], cfg: &SystemConfig) -> f64 {
    let floor = cfg.noise_floor();
    p.iter()
        .zip(v)
        .map(|(&pn, z)| (z.norm_sqr() * pn / floor).ln_1p())
        .sum::<f64>()
        / std::f64::consts::LN_2
}

/// Achievable rate in bps/Hz, including the cyclic-prefix overhead.
pub fn achievable_rate(
    p: &PowerAllocation,
    phi: &IrsCoefficients,
    ch: &ChannelRealization,
    cfg: &SystemConfig,
) -> Result<f64> {
    Error::check_len("power allocation", p.len(), cfg.n_sc)?;
    let cir = compose_cir(ch, phi, cfg)?;
    let v = cfr(cir.as_slice());
    Ok(sum_log_rate(p.as_slice(), &v, cfg) * cfg.rate_scale())
}

/// Frequency-domain view of a realization with the DFT already applied:
/// `v(φ) = direct + cascade · φ`, where `direct = F h_d` and
/// `cascade = F Vᴴ` (`N × M`). Row `n` of `cascade` is `f_nᴴ Vᴴ`.
#[derive(Clone, Debug)]
pub struct LinkResponse {
    pub direct: DVector<C64>,
    pub cascade: DMatrix<C64>,
}

impl LinkResponse {
    pub fn new(ch: &ChannelRealization, cfg: &SystemConfig) -> Result<Self> {
        let v = build_v_matrix(ch, cfg)?;
        let n = cfg.n_sc;
        let direct = DVector::from_vec(cfr(ch.padded_direct(n).as_slice()));
        let fft = FftPlanner::new().plan_fft_forward(n);
        let mut cascade = DMatrix::zeros(n, cfg.m_elems);
        let mut buf = vec![C64::new(0.0, 0.0); n];
        for e in 0..cfg.m_elems {
            for (k, b) in buf.iter_mut().enumerate() {
                *b = v[(e, k)].conj();
            }
            fft.process(&mut buf);
            cascade.column_mut(e).copy_from_slice(&buf);
        }
        Ok(LinkResponse { direct, cascade })
    }

    pub fn n_sc(&self) -> usize {
        self.direct.len()
    }

    pub fn m_elems(&self) -> usize {
        self.cascade.ncols()
    }

    pub fn cfr(&self, phi: &IrsCoefficients) -> DVector<C64> {
        &self.direct + &self.cascade * phi.as_vector()
    }

    pub fn sum_log_rate(&self, p: &PowerAllocation, phi: &IrsCoefficients, cfg: &SystemConfig) -> f64 {
        sum_log_rate(p.as_slice(), self.cfr(phi).as_slice(), cfg)
    }

    pub fn rate(&self, p: &PowerAllocation, phi: &IrsCoefficients, cfg: &SystemConfig) -> f64 {
        self.sum_log_rate(p, phi, cfg) * cfg.rate_scale()
    }

    pub fn cnr(&self, phi: &IrsCoefficients, cfg: &SystemConfig) -> Vec<f64> {
        cnr(self.cfr(phi).as_slice(), cfg)
    }
}
