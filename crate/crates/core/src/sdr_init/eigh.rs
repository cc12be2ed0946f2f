//! Dense Hermitian eigendecomposition.
//!
//! Householder reflections reduce the matrix to Hermitian tridiagonal form;
//! a diagonal phase change makes the off-diagonal real, and implicit QL
//! iterations with Wilkinson-style shifts diagonalize the real tridiagonal.
//! Rotations in the QL phase are real and are applied to the complex basis.

use nalgebra::{DMatrix, DVector};

use crate::model::C64;

#[derive(Clone, Debug)]
pub struct HermitianEigen {
    /// Eigenvalues, largest first.
    pub values: Vec<f64>,
    /// Orthonormal eigenvectors, column `i` paired with `values[i]`.
    pub vectors: DMatrix<C64>,
}

impl HermitianEigen {
    /// `U diag(f(λ)) Uᴴ`.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> DMatrix<C64> {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &lam) in self.values.iter().enumerate() {
            let s = f(lam);
            scaled.column_mut(j).iter_mut().for_each(|z| *z *= s);
        }
        let out = scaled * self.vectors.adjoint();
        debug_assert_eq!(out.nrows(), n);
        out
    }
}

/// Eigenvalues and eigenvectors of a Hermitian matrix. Only the lower
/// triangle is read.
pub fn eigh(a: &DMatrix<C64>) -> HermitianEigen {
    let (d, e, q) = tridiagonalize(a, true);
    let mut q = q.expect("basis requested");
    let mut d = d;
    tql2(&mut d, e, Some(&mut q));
    sort_descending(d, Some(q))
}

/// Eigenvalues of a Hermitian matrix, largest first.
pub fn eigvalsh(a: &DMatrix<C64>) -> Vec<f64> {
    let (mut d, e, _) = tridiagonalize(a, false);
    tql2(&mut d, e, None);
    sort_descending(d, None).values
}

fn sort_descending(d: Vec<f64>, q: Option<DMatrix<C64>>) -> HermitianEigen {
    let n = d.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[j].total_cmp(&d[i]));
    let values = order.iter().map(|&i| d[i]).collect();
    let vectors = match q {
        Some(q) => DMatrix::from_fn(n, n, |r, c| q[(r, order[c])]),
        None => DMatrix::zeros(0, 0),
    };
    HermitianEigen { values, vectors }
}

/// Returns the real diagonal, the real subdiagonal (`e[i]` couples rows
/// `i` and `i + 1`) and, when requested, the unitary `Q` with
/// `A = Q T Qᴴ`.
fn tridiagonalize(a: &DMatrix<C64>, want_q: bool) -> (Vec<f64>, Vec<f64>, Option<DMatrix<C64>>) {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "eigh needs a square matrix");
    // Work on a fully Hermitian copy built from the lower triangle.
    let mut w = DMatrix::from_fn(n, n, |i, j| if i >= j { a[(i, j)] } else { a[(j, i)].conj() });
    let mut q = want_q.then(|| DMatrix::<C64>::identity(n, n));
    let mut sub = vec![C64::new(0.0, 0.0); n.saturating_sub(1)];

    let mut v = DVector::<C64>::zeros(n);
    let mut p = DVector::<C64>::zeros(n);
    for k in 0..n.saturating_sub(1) {
        let len = n - k - 1;
        let alpha = (0..len).map(|i| w[(k + 1 + i, k)].norm_sqr()).sum::<f64>().sqrt();
        if alpha == 0.0 {
            continue;
        }
        let x0 = w[(k + 1, k)];
        let phase = if x0.norm() > 0.0 { x0 / x0.norm() } else { C64::new(1.0, 0.0) };
        // v = x + phase·α e₁ so that (I − τvvᴴ)x = −phase·α e₁.
        for i in 0..len {
            v[i] = w[(k + 1 + i, k)];
        }
        v[0] += phase * alpha;
        let vnorm2: f64 = (0..len).map(|i| v[i].norm_sqr()).sum();
        let tau = 2.0 / vnorm2;

        // Trailing block update: A ← A − v qᴴ − q vᴴ with
        // p = τAv, q = p − (τ vᴴp / 2) v.
        p.fill(C64::new(0.0, 0.0));
        for j in 0..len {
            let vj = v[j] * tau;
            for i in 0..len {
                p[i] += w[(k + 1 + i, k + 1 + j)] * vj;
            }
        }
        let vhp: C64 = (0..len).map(|i| v[i].conj() * p[i]).sum();
        let kk = vhp.re * tau * 0.5;
        for i in 0..len {
            p[i] -= v[i] * kk;
        }
        for j in 0..len {
            let (vj, pj) = (v[j].conj(), p[j].conj());
            for i in 0..len {
                let upd = v[i] * pj + p[i] * vj;
                w[(k + 1 + i, k + 1 + j)] -= upd;
            }
        }
        sub[k] = -phase * alpha;
        for i in 0..len {
            w[(k + 1 + i, k)] = C64::new(0.0, 0.0);
        }

        if let Some(q) = q.as_mut() {
            // Q ← Q H on columns k+1..n.
            let mut qv = vec![C64::new(0.0, 0.0); n];
            for i in 0..len {
                let vi = v[i] * tau;
                for (r, acc) in qv.iter_mut().enumerate() {
                    *acc += q[(r, k + 1 + i)] * vi;
                }
            }
            for i in 0..len {
                let vi = v[i].conj();
                for (r, acc) in qv.iter().enumerate() {
                    q[(r, k + 1 + i)] -= acc * vi;
                }
            }
        }
    }

    let d: Vec<f64> = (0..n).map(|i| w[(i, i)].re).collect();
    // Phase change D with T = D T_r Dᴴ and real nonnegative off-diagonal.
    let mut e = vec![0.0; n];
    let mut phase = C64::new(1.0, 0.0);
    for k in 0..n.saturating_sub(1) {
        let mag = sub[k].norm();
        if mag > 0.0 {
            phase *= sub[k] / mag;
        }
        e[k] = mag;
        if let Some(q) = q.as_mut() {
            q.column_mut(k + 1).iter_mut().for_each(|z| *z *= phase);
        }
    }
    (d, e, q)
}

/// Implicit QL on the symmetric tridiagonal `(d, e)`; `e[i]` couples `i`
/// and `i + 1`. Eigenvalues are left in `d`.
fn tql2(d: &mut [f64], mut e: Vec<f64>, mut q: Option<&mut DMatrix<C64>>) {
    let n = d.len();
    if n == 0 {
        return;
    }
    e.resize(n, 0.0);
    e[n - 1] = 0.0;
    let eps = f64::EPSILON;
    let mut f = 0.0;
    let mut tst1: f64 = 0.0;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > 60 {
                    break;
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().skip(l + 2) {
                    *di -= h;
                }
                f += h;

                p = d[m];
                let mut c = 1.0;
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = 0.0;
                let mut s2 = 0.0;
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(q) = q.as_deref_mut() {
                        let (mut lo, mut hi) = q.columns_range_pair_mut(i, i + 1);
                        for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                            let hv = *b;
                            *b = *a * s + hv * c;
                            *a = *a * c - hv * s;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
}
