//! Primal-dual interior-point solver for small dense complex SDPs whose
//! linear constraints touch only the diagonal:
//!
//! ```text
//! maximize   ⟨C, X⟩
//! subject to X_ii ≤ b_i   (i < k)
//!            X_ii = b_i   (i ≥ k)
//!            X ⪰ 0,  X Hermitian n × n
//! ```
//!
//! The inequalities get nonnegative slacks, so the cone is one Hermitian PSD
//! block times a k-dimensional orthant. Internally the problem is solved in
//! minimization form `min ⟨−C, X⟩` with dual
//!
//! ```text
//! maximize bᵀy   subject to  Z = −C − Diag(y) ⪰ 0,  t = −y_{<k} ≥ 0.
//! ```
//!
//! Search directions use Nesterov–Todd scaling: with `X = L Lᴴ` and
//! `Lᴴ Z L = Q D Qᴴ`, the scaling `G = L Q D^{-1/4}` maps both `X` and `Z` to
//! the same diagonal `Λ = D^{1/2}`. Steps follow Mehrotra's
//! predictor-corrector scheme with separate primal and dual step lengths.
//! Because every constraint is a single diagonal entry, the Schur complement
//! is simply `|W_ij|²` with `W = G Gᴴ`.

use nalgebra::{Cholesky, DMatrix, DVector};

use super::eigh::{eigh, eigvalsh};
use crate::error::{Error, Result};
use crate::model::C64;

#[derive(Clone, Debug)]
pub struct SdpOptions {
    pub max_iters: usize,
    /// Relative primal and dual infeasibility targeted before stopping.
    pub feas_tol: f64,
    /// Relative duality gap targeted before stopping.
    pub gap_tol: f64,
    /// Target for `‖X^{1/2} Z X^{1/2}‖_F + ‖s ∘ t‖` relative to
    /// `1 + |objective|`.
    pub comp_tol: f64,
    /// Looser limits an iterate must meet to be reported as a solution when
    /// the targets are not reached.
    pub accept_feas: f64,
    pub accept_gap: f64,
    pub accept_comp: f64,
    /// Fraction of the distance to the cone boundary taken per step.
    pub step_fraction: f64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        SdpOptions {
            max_iters: 100,
            feas_tol: 1e-10,
            gap_tol: 1e-9,
            comp_tol: 1e-9,
            accept_feas: 1e-8,
            accept_gap: 1e-6,
            accept_comp: 1e-6,
            step_fraction: 0.98,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub x: DMatrix<C64>,
    pub z: DMatrix<C64>,
    pub y: DVector<f64>,
    /// Slack of each inequality, `b_i − X_ii`.
    pub slack: DVector<f64>,
    /// `⟨C, X⟩` at the returned iterate.
    pub primal_objective: f64,
    /// Dual bound `−bᵀy` on the maximum.
    pub dual_objective: f64,
    /// `⟨X, Z⟩ + slackᵀt`; equals the duality gap at feasible points.
    pub gap: f64,
    /// `‖b − diag(X) − slack‖ / (1 + ‖b‖)`.
    pub primal_residual: f64,
    /// `‖−C − Diag(y) − Z‖ / (1 + ‖C‖)`, including the slack duals.
    pub dual_residual: f64,
    /// `(‖X^{1/2} Z X^{1/2}‖_F + ‖slack ∘ t‖) / (1 + |objective|)`.
    pub complementarity: f64,
    pub iterations: usize,
}

fn inner(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.re * y.re + x.im * y.im).sum()
}

/// `‖X^{1/2} Z X^{1/2}‖_F + ‖s ∘ t‖`. The symmetric form is used because
/// `XZ` itself is far from normal near a low-rank optimum, which inflates
/// its norm without saying anything about optimality.
fn complementarity(x: &DMatrix<C64>, z: &DMatrix<C64>, s: &DVector<f64>, t: &DVector<f64>) -> f64 {
    let root = eigh(x).reconstruct_with(|l| l.max(0.0).sqrt());
    (&root * z * &root).norm() + s.component_mul(t).norm()
}

/// Real parts of the diagonal of `a · b`.
fn diag_of_product(a: &DMatrix<C64>, b: &DMatrix<C64>) -> Vec<f64> {
    (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| (a[(i, j)] * b[(j, i)]).re).sum())
        .collect()
}

fn hermitize(a: &mut DMatrix<C64>) {
    let n = a.nrows();
    for j in 0..n {
        a[(j, j)].im = 0.0;
        for i in j + 1..n {
            let avg = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            a[(i, j)] = avg;
            a[(j, i)] = avg.conj();
        }
    }
}

fn sub_diag(a: &DMatrix<C64>, d: &DVector<f64>) -> DMatrix<C64> {
    let mut out = a.clone();
    for i in 0..d.len() {
        out[(i, i)] -= d[i];
    }
    out
}

/// Largest `α` keeping `L Lᴴ + α Δ ⪰ 0`, from the spectrum of `L⁻¹ Δ L⁻ᴴ`.
fn psd_step(l: &DMatrix<C64>, delta: &DMatrix<C64>) -> f64 {
    let Some(half) = l.solve_lower_triangular(delta) else {
        return 0.0;
    };
    let Some(mut m) = l.solve_lower_triangular(&half.adjoint()) else {
        return 0.0;
    };
    hermitize(&mut m);
    let min = eigvalsh(&m).last().copied().unwrap_or(0.0);
    if min < 0.0 {
        -1.0 / min
    } else {
        f64::INFINITY
    }
}

fn orthant_step(x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
    x.iter()
        .zip(dx.iter())
        .filter(|(_, d)| **d < 0.0)
        .map(|(v, d)| -v / d)
        .fold(f64::INFINITY, f64::min)
}

struct Direction {
    dx: DMatrix<C64>,
    dz: DMatrix<C64>,
    dy: DVector<f64>,
    ds: DVector<f64>,
    dt: DVector<f64>,
    /// Scaled directions `G⁻¹ΔX G⁻ᴴ` and `Gᴴ ΔZ G`.
    dx_scaled: DMatrix<C64>,
    dz_scaled: DMatrix<C64>,
}

/// Quantities fixed within one interior-point iteration.
struct Scaling<'a> {
    g: DMatrix<C64>,
    lambda: Vec<f64>,
    /// Cholesky factors of the current `X` and `Z`.
    lx: DMatrix<C64>,
    lz: DMatrix<C64>,
    schur: Cholesky<f64, nalgebra::Dyn>,
    /// Diagonal of `W R_d W`.
    w_rd_w: Vec<f64>,
    rd: &'a DMatrix<C64>,
    rp: &'a DVector<f64>,
    rt: &'a DVector<f64>,
    s: &'a DVector<f64>,
    t: &'a DVector<f64>,
}

impl Scaling<'_> {
    /// Solves the linearized system for complementarity right-hand sides
    /// `r_mat` (scaled PSD block) and `r_lp` (orthant).
    fn direction(&self, r_mat: &DMatrix<C64>, r_lp: &DVector<f64>) -> Direction {
        let n = self.lambda.len();
        let k = self.s.len();
        let h = DMatrix::from_fn(n, n, |i, j| r_mat[(i, j)] * (2.0 / (self.lambda[i] + self.lambda[j])));
        let ghg = diag_of_product(&(&self.g * &h), &self.g.adjoint());
        let mut rhs = DVector::zeros(n);
        for i in 0..n {
            rhs[i] = self.rp[i] - (ghg[i] - self.w_rd_w[i]);
            if i < k {
                rhs[i] -= (r_lp[i] - self.s[i] * self.rt[i]) / self.t[i];
            }
        }
        let dy = self.schur.solve(&rhs);
        let dz = sub_diag(self.rd, &dy);
        let dt = DVector::from_fn(k, |i, _| self.rt[i] - dy[i]);
        let ds = DVector::from_fn(k, |i, _| (r_lp[i] - self.s[i] * dt[i]) / self.t[i]);
        let mut dz_scaled = self.g.adjoint() * &dz * &self.g;
        hermitize(&mut dz_scaled);
        // Forming ΔX = GHGᴴ − WΔZW directly cancels badly once W is large;
        // the scaled difference does not.
        let dx_scaled = &h - &dz_scaled;
        let mut dx = &self.g * &dx_scaled * self.g.adjoint();
        hermitize(&mut dx);
        // The diagonal is pinned by the linearized constraints; restoring it
        // exactly keeps rounding from accumulating in the primal residual.
        for i in 0..n {
            let slack = if i < k { ds[i] } else { 0.0 };
            dx[(i, i)] = C64::new(self.rp[i] - slack, 0.0);
        }
        Direction {
            dx,
            dz,
            dy,
            ds,
            dt,
            dx_scaled,
            dz_scaled,
        }
    }

    fn step_lengths(&self, d: &Direction) -> (f64, f64) {
        let ap = psd_step(&self.lx, &d.dx).min(orthant_step(self.s, &d.ds));
        let ad = psd_step(&self.lz, &d.dz).min(orthant_step(self.t, &d.dt));
        (ap, ad)
    }
}

struct Residuals {
    rp: DVector<f64>,
    rd: DMatrix<C64>,
    rt: DVector<f64>,
    primal: f64,
    dual: f64,
}

/// Solves the diagonal-constrained SDP described in the module docs. The
/// first `n_upper` entries of `bound` are upper bounds, the rest equalities.
///
/// The congruence `X = D X' D` with `D = diag(√b)` maps every bound to one
/// and is applied before solving; residuals and the complementarity measure
/// are reported in those unit-bound coordinates, objectives and iterates in
/// the original ones.
pub fn solve_diag_sdp(
    cost: &DMatrix<C64>,
    bound: &[f64],
    n_upper: usize,
    opts: &SdpOptions,
) -> Result<SdpSolution> {
    let n = cost.nrows();
    Error::check_len("SDP cost columns", cost.ncols(), n)?;
    Error::check_len("SDP bounds", bound.len(), n)?;
    if n_upper > n {
        return Err(Error::invalid("more inequality rows than the matrix has"));
    }
    if bound.iter().any(|&b| !(b > 0.0 && b.is_finite())) {
        return Err(Error::invalid("diagonal bounds must be positive and finite"));
    }
    let d: Vec<f64> = bound.iter().map(|b| b.sqrt()).collect();
    let scaled = DMatrix::from_fn(n, n, |i, j| cost[(i, j)] * (d[i] * d[j]));
    let mut sol = solve_unit_bounds(&scaled, n_upper, opts)?;
    for j in 0..n {
        for i in 0..n {
            sol.x[(i, j)] *= d[i] * d[j];
            sol.z[(i, j)] /= d[i] * d[j];
        }
        sol.y[j] /= bound[j];
    }
    for (s, b) in sol.slack.iter_mut().zip(&bound[..n_upper]) {
        *s *= b;
    }
    Ok(sol)
}

fn solve_unit_bounds(cost: &DMatrix<C64>, n_upper: usize, opts: &SdpOptions) -> Result<SdpSolution> {
    let n = cost.nrows();
    let bound = vec![1.0; n];
    let k = n_upper;
    let mut cm = -cost.clone();
    hermitize(&mut cm);
    let b = DVector::from_column_slice(&bound);
    let b_norm = b.norm();
    let c_norm = cm.norm();

    let xi = 1.0f64.max(b.max());
    let eta = 1.0 + c_norm;
    let mut x = DMatrix::<C64>::identity(n, n) * C64::new(xi, 0.0);
    let mut z = DMatrix::<C64>::identity(n, n) * C64::new(eta, 0.0);
    let mut y = DVector::<f64>::zeros(n);
    let mut s = DVector::from_element(k, xi);
    let mut t = DVector::from_element(k, eta);

    let residuals = |x: &DMatrix<C64>, z: &DMatrix<C64>, y: &DVector<f64>, s: &DVector<f64>, t: &DVector<f64>| {
        let rp = DVector::from_fn(n, |i, _| b[i] - x[(i, i)].re - if i < k { s[i] } else { 0.0 });
        let mut rd = sub_diag(&cm, y) - z;
        hermitize(&mut rd);
        let rt = DVector::from_fn(k, |i, _| -(y[i] + t[i]));
        let primal = rp.norm() / (1.0 + b_norm);
        let dual = (rd.norm_squared() + rt.norm_squared()).sqrt() / (1.0 + c_norm);
        Residuals { rp, rd, rt, primal, dual }
    };

    let mut iterations = 0;
    loop {
        let res = residuals(&x, &z, &y, &s, &t);
        let pobj = inner(&cm, &x);
        let dobj = b.dot(&y);
        let comp = inner(&x, &z) + s.dot(&t);
        let gap_rel = comp.max((pobj - dobj).abs()) / (1.0 + pobj.abs());
        let done = res.primal <= opts.feas_tol
            && res.dual <= opts.feas_tol
            && gap_rel <= opts.gap_tol
            && complementarity(&x, &z, &s, &t) <= opts.comp_tol * (1.0 + pobj.abs());
        if done || iterations >= opts.max_iters {
            break;
        }

        let mu = comp / (n + k) as f64;
        let Some(chol_x) = Cholesky::new(x.clone()) else {
            break;
        };
        let Some(chol_z) = Cholesky::new(z.clone()) else {
            break;
        };
        let l = chol_x.l();
        let mut lzl = l.adjoint() * &z * &l;
        hermitize(&mut lzl);
        let eig = eigh(&lzl);
        let floor = eig.values[0].abs().max(1e-300) * 1e-300;
        let d: Vec<f64> = eig.values.iter().map(|&v| v.max(floor)).collect();
        let lambda: Vec<f64> = d.iter().map(|v| v.sqrt()).collect();
        let mut g = &l * &eig.vectors;
        for (j, dj) in d.iter().enumerate() {
            let sc = dj.powf(-0.25);
            g.column_mut(j).iter_mut().for_each(|zz| *zz *= sc);
        }
        let w = &g * g.adjoint();
        let mut schur_m = DMatrix::from_fn(n, n, |i, j| w[(i, j)].norm_sqr());
        for i in 0..k {
            schur_m[(i, i)] += s[i] / t[i];
        }
        let Some(schur) = Cholesky::new(schur_m) else {
            break;
        };
        let w_rd = &w * &res.rd;
        let w_rd_w = diag_of_product(&w_rd, &w);
        let scaling = Scaling {
            g,
            lambda,
            lx: l,
            lz: chol_z.l(),
            schur,
            w_rd_w,
            rd: &res.rd,
            rp: &res.rp,
            rt: &res.rt,
            s: &s,
            t: &t,
        };

        // Predictor (affine scaling).
        let lam2 = DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(scaling.lambda[i] * scaling.lambda[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let st = s.component_mul(&t);
        let aff = scaling.direction(&-&lam2, &-&st);
        let (ap, ad) = scaling.step_lengths(&aff);
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let x_aff = &x + &aff.dx * C64::new(ap, 0.0);
        let z_aff = &z + &aff.dz * C64::new(ad, 0.0);
        let mu_aff = (inner(&x_aff, &z_aff) + (&s + &aff.ds * ap).dot(&(&t + &aff.dt * ad))) / (n + k) as f64;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // Corrector with the second-order term.
        let cross = &aff.dx_scaled * &aff.dz_scaled;
        let cross_sym = (&cross + cross.adjoint()) * C64::new(0.5, 0.0);
        let r_mat = DMatrix::<C64>::identity(n, n) * C64::new(sigma * mu, 0.0) - &lam2 - cross_sym;
        let r_lp = DVector::from_fn(k, |i, _| sigma * mu - st[i] - aff.ds[i] * aff.dt[i]);
        let dir = scaling.direction(&r_mat, &r_lp);
        let (ap, ad) = scaling.step_lengths(&dir);
        let ap = (opts.step_fraction * ap).min(1.0);
        let ad = (opts.step_fraction * ad).min(1.0);
        if ap.max(ad) < 1e-12 {
            break;
        }

        x += &dir.dx * C64::new(ap, 0.0);
        hermitize(&mut x);
        s += &dir.ds * ap;
        y += &dir.dy * ad;
        z += &dir.dz * C64::new(ad, 0.0);
        hermitize(&mut z);
        t += &dir.dt * ad;
        iterations += 1;
    }

    let res = residuals(&x, &z, &y, &s, &t);
    let pobj = inner(&cm, &x);
    let dobj = b.dot(&y);
    let comp = inner(&x, &z) + s.dot(&t);
    let gap_rel = comp.max((pobj - dobj).abs()) / (1.0 + pobj.abs());
    let complementarity = complementarity(&x, &z, &s, &t) / (1.0 + pobj.abs());
    if !(res.primal <= opts.accept_feas
        && res.dual <= opts.accept_feas
        && gap_rel <= opts.accept_gap
        && complementarity <= opts.accept_comp)
    {
        return Err(Error::SolverFailed {
            iterations,
            gap: gap_rel,
            primal_residual: res.primal,
            dual_residual: res.dual,
        });
    }
    Ok(SdpSolution {
        x,
        z,
        y: y.clone(),
        slack: s,
        primal_objective: -pobj,
        dual_objective: -dobj,
        gap: comp,
        primal_residual: res.primal,
        dual_residual: res.dual,
        complementarity,
        iterations,
    })
}
