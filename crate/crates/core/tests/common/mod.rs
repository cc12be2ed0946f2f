#![allow(dead_code)]

use irs_ofdm::model::{ChannelRealization, Gap, SystemConfig, C64};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn cfg(n: usize, m: usize, l: usize) -> SystemConfig {
    SystemConfig {
        n_sc: n,
        m_elems: m,
        l_direct: l,
        l_reflect: l,
        cp_len: l,
        noise_var: 0.05,
        gap: Gap::from_db(0.0),
        ..SystemConfig::default()
    }
}

/// Unit-variance circularly symmetric Gaussian.
pub fn cn(rng: &mut ChaCha8Rng) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

pub fn cn_vec(rng: &mut ChaCha8Rng, n: usize) -> DVector<C64> {
    DVector::from_fn(n, |_, _| cn(rng))
}

/// Dense Gaussian taps with the given per-entry scales.
pub fn channel(rng: &mut ChaCha8Rng, cfg: &SystemConfig, direct: f64, hop: f64) -> ChannelRealization {
    let hd = (0..cfg.l_direct).map(|_| cn(rng) * direct).collect();
    let h = DMatrix::from_fn(cfg.m_elems, cfg.l_reflect, |_, _| cn(rng) * hop);
    let g = DMatrix::from_fn(cfg.m_elems, cfg.l_reflect, |_, _| cn(rng) * hop);
    ChannelRealization::new(hd, h, g).unwrap()
}

/// A point drawn uniformly from the product of unit disks.
pub fn disk_point(rng: &mut ChaCha8Rng, m: usize) -> DVector<C64> {
    DVector::from_fn(m, |_, _| {
        let r = rng.random::<f64>().sqrt();
        C64::from_polar(r, rng.random::<f64>() * std::f64::consts::TAU)
    })
}

pub fn unit_modulus(rng: &mut ChaCha8Rng, m: usize) -> DVector<C64> {
    DVector::from_fn(m, |_, _| C64::from_polar(1.0, rng.random::<f64>() * std::f64::consts::TAU))
}

/// `O(N²)` DFT straight from the definition.
pub fn naive_dft(x: &[C64]) -> Vec<C64> {
    let n = x.len();
    (0..n)
        .map(|k| {
            x.iter()
                .enumerate()
                .map(|(t, &xt)| xt * C64::from_polar(1.0, -std::f64::consts::TAU * (k * t) as f64 / n as f64))
                .sum()
        })
        .collect()
}

/// `g_lᴴ diag(φ) h_l` for every reflected tap, by explicit summation.
pub fn reflected_taps(ch: &ChannelRealization, phi: &DVector<C64>) -> Vec<C64> {
    let (h, g) = (ch.h_bs_irs(), ch.g_irs_user());
    (0..h.ncols())
        .map(|l| (0..h.nrows()).map(|m| g[(m, l)].conj() * phi[m] * h[(m, l)]).sum())
        .collect()
}

/// Zero-padded `h_d + h_r` assembled tap by tap.
pub fn cir_oracle(ch: &ChannelRealization, phi: &DVector<C64>, n: usize) -> Vec<C64> {
    let mut out = vec![C64::new(0.0, 0.0); n];
    for (l, z) in ch.h_direct().iter().enumerate() {
        out[l] += z;
    }
    for (l, z) in reflected_taps(ch, phi).into_iter().enumerate() {
        out[l] += z;
    }
    out
}

/// Water-filling by enumerating active-set sizes over sorted CNRs and
/// keeping the one that satisfies its own KKT conditions.
pub fn waterfill_oracle(c: &[f64], total: f64) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..c.len()).filter(|&i| c[i] > 0.0).collect();
    idx.sort_by(|&a, &b| c[b].partial_cmp(&c[a]).unwrap());
    let mut best = vec![0.0; c.len()];
    for k in 1..=idx.len() {
        let level = (total + idx[..k].iter().map(|&i| 1.0 / c[i]).sum::<f64>()) / k as f64;
        let feasible = idx[..k].iter().all(|&i| level >= 1.0 / c[i]);
        let tight = idx[k..].iter().all(|&i| level <= 1.0 / c[i]);
        if feasible && tight {
            best = vec![0.0; c.len()];
            for &i in &idx[..k] {
                best[i] = level - 1.0 / c[i];
            }
            return best;
        }
    }
    best
}

/// Water level by bisection on `Σ (w − 1/c_n)⁺ = P`.
pub fn waterfill_bisect(c: &[f64], total: f64) -> Vec<f64> {
    let spend = |w: f64| c.iter().filter(|&&x| x > 0.0).map(|&x| (w - 1.0 / x).max(0.0)).sum::<f64>();
    let (mut lo, mut hi) = (0.0, total + c.iter().filter(|&&x| x > 0.0).map(|&x| 1.0 / x).fold(0.0, f64::min) + total);
    while spend(hi) < total {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if spend(mid) < total {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let w = 0.5 * (lo + hi);
    c.iter().map(|&x| if x > 0.0 { (w - 1.0 / x).max(0.0) } else { 0.0 }).collect()
}

pub fn log_rate(c: &[f64], p: &[f64]) -> f64 {
    c.iter().zip(p).map(|(&cn, &pn)| (1.0 + cn * pn).log2()).sum()
}

/// Best rate over a `(β, θ)` grid for a single element, with water-filling
/// at every grid point. Returns the rate in bps/Hz.
pub fn grid_oracle_m1(ch: &ChannelRealization, cfg: &SystemConfig, step: f64) -> f64 {
    let n = cfg.n_sc;
    let direct = naive_dft(&cir_oracle(ch, &DVector::zeros(1), n));
    let reflect: Vec<C64> = {
        let with = naive_dft(&cir_oracle(ch, &DVector::from_element(1, C64::new(1.0, 0.0)), n));
        with.iter().zip(&direct).map(|(a, b)| a - b).collect()
    };
    let floor = cfg.noise_floor();
    let nb = (1.0 / step).round() as usize;
    let nt = (std::f64::consts::TAU / step).ceil() as usize;
    let mut best = f64::NEG_INFINITY;
    let mut inv = vec![0.0; n];
    for ib in 0..=nb {
        let beta = ib as f64 * step;
        for it in 0..nt {
            let phi = C64::from_polar(beta, it as f64 * step);
            for k in 0..n {
                inv[k] = floor / (direct[k] + reflect[k] * phi).norm_sqr();
            }
            best = best.max(waterfilled_rate(&mut inv, cfg.total_power));
        }
    }
    best * cfg.rate_scale()
}

/// Water-filled `Σ log₂(1 + p_n/inv_n)` given inverse CNRs; sorts `inv`.
fn waterfilled_rate(inv: &mut [f64], total: f64) -> f64 {
    inv.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut sum = 0.0;
    let mut level = 0.0;
    let mut k = 0;
    while k < inv.len() && inv[k].is_finite() {
        let trial = (total + sum + inv[k]) / (k + 1) as f64;
        if k > 0 && trial <= inv[k] {
            break;
        }
        sum += inv[k];
        level = trial;
        k += 1;
    }
    inv[..k].iter().map(|&x| (level / x).log2()).sum()
}
