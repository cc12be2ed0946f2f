//! Channel-power-maximizing initialization of the reflection vector.
//!
//! The time-domain channel power is the quadratic
//!
//! ```text
//! ‖h_d + Vᴴφ‖² = φᴴAφ + 2ℜ(φᴴu) + ‖h_d‖²,   A = VVᴴ,  u = V h_d.
//! ```
//!
//! Lifting `w = [φ; u]` to `W = wwᴴ` turns the quadratic into
//! `Tr(W M)` with `M = [[A, I], [I, 0]]`. Dropping `rank(W) = 1` leaves an SDP
//! whose diagonal entries are bounded by one (reflect-array block) or pinned
//! to `|u_m|²` (auxiliary block). A near rank-one solution is read off
//! directly; otherwise Gaussian randomization draws unit-modulus candidates
//! from the upper-left block and keeps the best.

pub mod eigh;
pub mod sdp;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::model::{build_v_matrix, compose_cir, project_unit_disks, ChannelRealization, IrsCoefficients, SystemConfig, C64};
use eigh::{eigh, eigvalsh};
use sdp::{solve_diag_sdp, SdpOptions};

/// Rank-one test threshold on `λ₂/λ₁` of the SDP solution.
pub const RANK1_RATIO: f64 = 1e-6;

/// Auxiliary rows whose pinned diagonal `|u_m|²` falls below this fraction
/// of the largest bound are removed before solving; a zero diagonal forces
/// the whole row of `W` to zero.
const PINNED_ZERO: f64 = 1e-14;

#[derive(Clone, Debug)]
pub struct QcqpData {
    /// `A = VVᴴ`.
    pub a_mat: DMatrix<C64>,
    /// `u = V h_d` with `h_d` zero-padded to `N`.
    pub u_vec: DVector<C64>,
    /// `[[A, I], [I, 0]]`.
    pub big_m: DMatrix<C64>,
    /// `‖h_d‖²`.
    pub direct_power: f64,
}

impl QcqpData {
    /// `φᴴAφ + 2ℜ(φᴴu) + ‖h_d‖²`.
    pub fn channel_power(&self, phi: &DVector<C64>) -> f64 {
        let quad = phi.dotc(&(&self.a_mat * phi)).re;
        quad + 2.0 * phi.dotc(&self.u_vec).re + self.direct_power
    }

    pub fn m_elems(&self) -> usize {
        self.u_vec.len()
    }
}

pub fn build_qcqp(ch: &ChannelRealization, cfg: &SystemConfig) -> Result<QcqpData> {
    let v = build_v_matrix(ch, cfg)?;
    let m = v.nrows();
    let hd = ch.padded_direct(cfg.n_sc);
    let mut a_mat = &v * v.adjoint();
    for i in 0..m {
        a_mat[(i, i)].im = 0.0;
        for j in i + 1..m {
            a_mat[(i, j)] = a_mat[(j, i)].conj();
        }
    }
    let u_vec = &v * &hd;
    let one = C64::new(1.0, 0.0);
    let mut big_m = DMatrix::zeros(2 * m, 2 * m);
    big_m.view_mut((0, 0), (m, m)).copy_from(&a_mat);
    for i in 0..m {
        big_m[(i, m + i)] = one;
        big_m[(m + i, i)] = one;
    }
    Ok(QcqpData {
        a_mat,
        u_vec,
        big_m,
        direct_power: hd.norm_squared(),
    })
}

#[derive(Clone, Debug)]
pub struct SdrSolution {
    /// Optimal lifted matrix `W★`, `2M × 2M`.
    pub w_mat: DMatrix<C64>,
    /// Upper-left `M × M` block of `W★`.
    pub upper_block: DMatrix<C64>,
    /// `λ₂/λ₁ ≤ RANK1_RATIO` for `W★`.
    pub rank1: bool,
    /// `Tr(W★ M)`.
    pub sdp_objective: f64,
    pub dual_objective: f64,
    /// Relative duality gap.
    pub gap: f64,
    pub complementarity: f64,
    pub iterations: usize,
}

fn attempts() -> [SdpOptions; 3] {
    [
        SdpOptions::default(),
        SdpOptions {
            max_iters: 200,
            step_fraction: 0.9,
            ..SdpOptions::default()
        },
        SdpOptions {
            max_iters: 400,
            step_fraction: 0.75,
            ..SdpOptions::default()
        },
    ]
}

/// Solves the relaxation, retrying with more conservative steps before
/// reporting a solver failure.
pub fn solve_sdr(q: &QcqpData) -> Result<SdrSolution> {
    let m = q.m_elems();
    let u2: Vec<f64> = q.u_vec.iter().map(|z| z.norm_sqr()).collect();
    let scale = u2.iter().copied().fold(1.0, f64::max);
    let mut keep: Vec<usize> = (0..m).collect();
    keep.extend((0..m).filter(|&i| u2[i] > PINNED_ZERO * scale).map(|i| m + i));
    let k = keep.len();
    let cost = DMatrix::from_fn(k, k, |i, j| q.big_m[(keep[i], keep[j])]);
    let bound: Vec<f64> = keep.iter().map(|&i| if i < m { 1.0 } else { u2[i - m] }).collect();

    let mut last_err = None;
    for opts in attempts() {
        match solve_diag_sdp(&cost, &bound, m, &opts) {
            Ok(sol) => {
                let mut w_mat = DMatrix::zeros(2 * m, 2 * m);
                for (i, &ri) in keep.iter().enumerate() {
                    for (j, &rj) in keep.iter().enumerate() {
                        w_mat[(ri, rj)] = sol.x[(i, j)];
                    }
                }
                let eig = eigvalsh(&w_mat);
                let rank1 = eig[0] <= 0.0 || eig.get(1).is_none_or(|l2| l2.max(0.0) <= RANK1_RATIO * eig[0]);
                let upper_block = w_mat.view((0, 0), (m, m)).into_owned();
                let gap = (sol.primal_objective - sol.dual_objective).abs() / (1.0 + sol.primal_objective.abs());
                return Ok(SdrSolution {
                    w_mat,
                    upper_block,
                    rank1,
                    sdp_objective: sol.primal_objective,
                    dual_objective: sol.dual_objective,
                    gap,
                    complementarity: sol.complementarity,
                    iterations: sol.iterations,
                });
            }
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

/// Reads a reflection vector off the relaxation: the scaled principal
/// eigenvector when `W★` is numerically rank one, otherwise the best of
/// `q_rand` Gaussian-randomized unit-modulus candidates.
pub fn extract_phi<R: Rng + ?Sized>(sol: &SdrSolution, q: &QcqpData, q_rand: usize, rng: &mut R) -> IrsCoefficients {
    let m = q.m_elems();
    let eig = eigh(&sol.upper_block);
    if sol.rank1 {
        let mut phi = eig.vectors.column(0) * C64::new(eig.values[0].max(0.0).sqrt(), 0.0);
        let align = phi.dotc(&q.u_vec);
        if align.norm() > 0.0 {
            phi *= align / align.norm();
        }
        project_unit_disks(&mut phi);
        return IrsCoefficients::projected(phi);
    }

    let mut factor = eig.vectors.clone();
    for (j, &lam) in eig.values.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        factor.column_mut(j).iter_mut().for_each(|z| *z *= s);
    }
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let mut best: Option<(f64, DVector<C64>)> = None;
    for _ in 0..q_rand.max(1) {
        let r = DVector::from_fn(m, |_, _| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            C64::new(re * half, im * half)
        });
        let dir = &factor * r;
        let cand = dir.map(|z| C64::from_polar(1.0, z.arg()));
        let power = q.channel_power(&cand);
        if best.as_ref().is_none_or(|(b, _)| power > *b) {
            best = Some((power, cand));
        }
    }
    IrsCoefficients::projected(best.expect("at least one candidate").1)
}

/// `‖h_d + Vᴴφ‖²`.
pub fn channel_power(phi: &IrsCoefficients, ch: &ChannelRealization, cfg: &SystemConfig) -> Result<f64> {
    Ok(compose_cir(ch, phi, cfg)?.norm_squared())
}

/// Builds, solves and extracts in one call.
pub fn cpm_init<R: Rng + ?Sized>(
    ch: &ChannelRealization,
    cfg: &SystemConfig,
    rng: &mut R,
) -> Result<(IrsCoefficients, SdrSolution)> {
    if ch.m_elems() == 0 {
        return Err(Error::invalid("the reflect-array has no elements"));
    }
    let q = build_qcqp(ch, cfg)?;
    let sol = solve_sdr(&q)?;
    let phi = extract_phi(&sol, &q, cfg.q_rand, rng);
    Ok((phi, sol))
}
