//! Reflection-coefficient optimization for a fixed power allocation by
//! successive convex approximation.
//!
//! The per-subcarrier gain `|v_n(φ)|² = a_n² + b_n²` is convex in
//! `(a_n, b_n) = (ℜ v_n, ℑ v_n)`, so its tangent plane at `(ã_n, b̃_n)`,
//!
//! ```text
//! f_n(a, b) = ã² + b̃² + 2ã(a − ã) + 2b̃(b − b̃) = 2ℜ(conj(ṽ_n) v_n) − |ṽ_n|²,
//! ```
//!
//! is a global minorant that is tight at the tangent point. Substituting the
//! tight bound for the auxiliary rate variable leaves
//!
//! ```text
//! maximize  Σ_n log₂(1 + w_n f_n(v_n(φ)))   subject to |φ_m| ≤ 1,
//! ```
//!
//! with `w_n = p_n / (Γσ²)`. Since `v(φ)` is affine, every term is a
//! concave function of an affine map and the feasible set is a product of
//! unit disks. The surrogate is only defined where every log argument is
//! positive; steps leaving that region are rejected by the line search.
//!
//! The inner problem is solved by projected gradient ascent with
//! Barzilai–Borwein step lengths and Armijo backtracking. Each accepted
//! inner solution becomes the next tangent point; the true objective never
//! decreases from one outer iteration to the next.

use std::f64::consts::LN_2;

use nalgebra::{DMatrix, DVector};

use crate::model::{project_unit_disks, IrsCoefficients, LinkResponse, PowerAllocation, SystemConfig, C64};

/// Log arguments at or below this are outside the surrogate's domain.
const DOMAIN_FLOOR: f64 = 1e-12;
const ARMIJO: f64 = 1e-4;
const MAX_BACKTRACKS: usize = 60;
/// Running log arguments are rebuilt from scratch this often.
const REFRESH_EVERY: usize = 64;

/// Tangent plane of `a² + b²` at `(at, bt)`, evaluated at `(a, b)`.
pub fn surrogate_bound(a: f64, b: f64, at: f64, bt: f64) -> f64 {
    at * at + bt * bt + 2.0 * at * (a - at) + 2.0 * bt * (b - bt)
}

/// Real and imaginary parts of the frequency response at `phi`.
pub fn linearize(phi: &IrsCoefficients, resp: &LinkResponse) -> (Vec<f64>, Vec<f64>) {
    let v = resp.cfr(phi);
    (v.iter().map(|z| z.re).collect(), v.iter().map(|z| z.im).collect())
}

/// The concave surrogate around one tangent point, restricted to the
/// subcarriers that carry power.
#[derive(Clone, Debug)]
pub struct Surrogate {
    weights: Vec<f64>,
    /// `2ℜ(conj(ṽ_k) d_k) − |ṽ_k|²`: the affine bound's constant part.
    offset: Vec<f64>,
    /// Row `k` is `conj(ṽ_k)` times row `k` of the cascade, so
    /// `f_k(φ) = offset_k + 2ℜ(rows · φ)_k`.
    rows: DMatrix<C64>,
}

impl Surrogate {
    pub fn new(
        resp: &LinkResponse,
        p: &PowerAllocation,
        a_tilde: &[f64],
        b_tilde: &[f64],
        cfg: &SystemConfig,
    ) -> Self {
        let floor = cfg.noise_floor();
        let active: Vec<usize> = (0..resp.n_sc()).filter(|&n| p.as_slice()[n] > 0.0).collect();
        let m = resp.m_elems();
        let mut rows = DMatrix::zeros(active.len(), m);
        let mut offset = Vec::with_capacity(active.len());
        let mut weights = Vec::with_capacity(active.len());
        for (k, &n) in active.iter().enumerate() {
            let vt = C64::new(a_tilde[n], b_tilde[n]);
            let d = resp.direct[n];
            offset.push(2.0 * (vt.conj() * d).re - vt.norm_sqr());
            weights.push(p.as_slice()[n] / floor);
            for e in 0..m {
                rows[(k, e)] = vt.conj() * resp.cascade[(n, e)];
            }
        }
        Surrogate {
            weights,
            offset,
            rows,
        }
    }

    /// Tangent-plane values `f_k(φ)` on the powered subcarriers.
    pub fn bounds(&self, phi: &DVector<C64>) -> Vec<f64> {
        let lin = &self.rows * phi;
        self.offset
            .iter()
            .zip(lin.iter())
            .map(|(o, z)| o + 2.0 * z.re)
            .collect()
    }

    fn log_args(&self, phi: &DVector<C64>) -> Vec<f64> {
        self.bounds(phi)
            .iter()
            .zip(&self.weights)
            .map(|(f, w)| 1.0 + w * f)
            .collect()
    }

    /// Surrogate objective in bits, or `None` outside its domain.
    pub fn value(&self, phi: &DVector<C64>) -> Option<f64> {
        let args = self.log_args(phi);
        if args.iter().any(|&x| x <= DOMAIN_FLOOR) {
            return None;
        }
        Some(args.iter().map(|x| x.ln()).sum::<f64>() / LN_2)
    }

    /// Gradient with respect to `(ℜφ, ℑφ)`, packed as `∂/∂ℜ + j ∂/∂ℑ`.
    pub fn gradient(&self, phi: &DVector<C64>) -> DVector<C64> {
        self.gradient_from_args(&self.log_args(phi))
    }

    fn gradient_from_args(&self, args: &[f64]) -> DVector<C64> {
        let scale = DVector::from_iterator(
            args.len(),
            args.iter()
                .zip(&self.weights)
                .map(|(x, w)| C64::new(2.0 * w / (x * LN_2), 0.0)),
        );
        self.rows.ad_mul(&scale)
    }
}

/// Why an inner solve stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InnerStatus {
    /// Projected-gradient norm fell below `tol_inner`.
    Converged,
    /// No step passes the line search at machine precision.
    Stalled,
    MaxIterations,
}

#[derive(Clone, Debug)]
pub struct InnerSolve {
    pub phi: IrsCoefficients,
    /// Surrogate gain over the starting point, in bits.
    pub improvement: f64,
    pub iterations: usize,
    pub projected_gradient: f64,
    pub status: InnerStatus,
}

fn real_dot(a: &DVector<C64>, b: &DVector<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

fn projected_gradient_norm(x: &DVector<C64>, g: &DVector<C64>) -> f64 {
    let mut probe = x + g;
    project_unit_disks(&mut probe);
    (x - probe).norm()
}

/// Maximizes the surrogate over the unit disks, starting from `start`.
///
/// `start` must lie in the surrogate's domain; the tangent point always
/// does. Never panics: on iteration exhaustion the best iterate is returned
/// with [`InnerStatus::MaxIterations`].
pub fn solve_p12(sur: &Surrogate, start: &IrsCoefficients, cfg: &SystemConfig) -> InnerSolve {
    let mut x = start.as_vector().clone();
    project_unit_disks(&mut x);
    let mut args = sur.log_args(&x);
    if sur.weights.is_empty() || args.iter().any(|&a| a <= DOMAIN_FLOOR) {
        let status = if sur.weights.is_empty() {
            InnerStatus::Converged
        } else {
            InnerStatus::Stalled
        };
        return InnerSolve {
            phi: IrsCoefficients::projected(x),
            improvement: 0.0,
            iterations: 0,
            projected_gradient: 0.0,
            status,
        };
    }

    let mut g = sur.gradient_from_args(&args);
    let mut step = 1.0;
    let mut improvement = 0.0;
    let mut status = InnerStatus::MaxIterations;
    let mut pg = projected_gradient_norm(&x, &g);
    let mut iterations = 0;

    while iterations < cfg.max_inner_iters {
        if pg <= cfg.tol_inner {
            status = InnerStatus::Converged;
            break;
        }
        let mut t = step;
        let mut accepted = None;
        for _ in 0..MAX_BACKTRACKS {
            let mut trial = &x + &g * C64::new(t, 0.0);
            project_unit_disks(&mut trial);
            let d = &trial - &x;
            // Change of each tangent-plane value; the objective increment is
            // accumulated from these directly to avoid cancellation.
            let delta_f = (&sur.rows * &d).map(|z| 2.0 * z.re);
            let mut gain = 0.0;
            let mut inside = true;
            for ((a, w), df) in args.iter().zip(&sur.weights).zip(delta_f.iter()) {
                let ratio = w * df / a;
                if a * (1.0 + ratio) <= DOMAIN_FLOOR {
                    inside = false;
                    break;
                }
                gain += ratio.ln_1p();
            }
            gain /= LN_2;
            if inside && gain >= ARMIJO * real_dot(&g, &d) && gain > 0.0 {
                accepted = Some((trial, d, delta_f, gain));
                break;
            }
            t *= 0.5;
        }
        let Some((trial, d, delta_f, gain)) = accepted else {
            status = InnerStatus::Stalled;
            break;
        };
        iterations += 1;
        improvement += gain;
        x = trial;
        if iterations % REFRESH_EVERY == 0 {
            args = sur.log_args(&x);
        } else {
            for ((a, w), df) in args.iter_mut().zip(&sur.weights).zip(delta_f.iter()) {
                *a += w * df;
            }
        }
        let g_new = sur.gradient_from_args(&args);
        let sy = -real_dot(&d, &(&g_new - &g));
        let ss = real_dot(&d, &d);
        step = if sy > 0.0 {
            (ss / sy).clamp(1e-12, 1e12)
        } else {
            (2.0 * t).min(1e12)
        };
        g = g_new;
        pg = projected_gradient_norm(&x, &g);
    }
    if status == InnerStatus::MaxIterations && pg <= cfg.tol_inner {
        status = InnerStatus::Converged;
    }

    InnerSolve {
        phi: IrsCoefficients::projected(x),
        improvement,
        iterations,
        projected_gradient: pg,
        status,
    }
}

/// Running state of the outer loop: the tangent point always equals the
/// frequency response at the accepted `phi`.
#[derive(Clone, Debug)]
pub struct ScaState {
    pub a_tilde: Vec<f64>,
    pub b_tilde: Vec<f64>,
    pub phi: IrsCoefficients,
    /// True objective `Σ log₂(1 + |v_n|² p_n / Γσ²)` after each outer
    /// iteration, starting with the initial point.
    pub objective_trace: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ScaOutcome {
    pub state: ScaState,
    /// Linearize-and-solve rounds performed.
    pub iterations: usize,
    pub inner_iterations: usize,
    /// Some inner solve ran out of iterations before reaching `tol_inner`.
    pub inner_warning: bool,
}

impl ScaOutcome {
    pub fn phi(&self) -> &IrsCoefficients {
        &self.state.phi
    }

    pub fn objective(&self) -> f64 {
        *self.state.objective_trace.last().expect("trace holds the initial value")
    }
}

/// Alternates tangent-point updates and surrogate solves until the relative
/// gain in the true objective drops below `tol_outer`.
pub fn run_sca(
    phi_init: &IrsCoefficients,
    p: &PowerAllocation,
    resp: &LinkResponse,
    cfg: &SystemConfig,
) -> ScaOutcome {
    let mut phi = phi_init.clone();
    let mut value = resp.sum_log_rate(p, &phi, cfg);
    let (mut a_tilde, mut b_tilde) = linearize(&phi, resp);
    let mut trace = vec![value];
    let mut iterations = 0;
    let mut inner_iterations = 0;
    let mut inner_warning = false;

    while iterations < cfg.max_iters {
        iterations += 1;
        let sur = Surrogate::new(resp, p, &a_tilde, &b_tilde, cfg);
        let inner = solve_p12(&sur, &phi, cfg);
        inner_iterations += inner.iterations;
        inner_warning |= inner.status == InnerStatus::MaxIterations;

        let candidate = resp.sum_log_rate(p, &inner.phi, cfg);
        let gain = candidate - value;
        if gain > 0.0 {
            phi = inner.phi;
            value = candidate;
            (a_tilde, b_tilde) = linearize(&phi, resp);
        }
        trace.push(value);
        if !(gain > cfg.tol_outer * value.abs()) {
            break;
        }
    }

    ScaOutcome {
        state: ScaState {
            a_tilde,
            b_tilde,
            phi,
            objective_trace: trace,
        },
        iterations,
        inner_iterations,
        inner_warning,
    }
}
