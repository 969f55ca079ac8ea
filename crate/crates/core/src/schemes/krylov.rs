//! Restarted GMRES with right preconditioning for the coupled BDF2 system.

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct KrylovOptions {
    /// Relative residual target `|b - Ax| <= tol |b|`.
    pub tol: f64,
    pub max_iter: usize,
    pub restart: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 500,
            restart: 50,
        }
    }
}

#[derive(Debug, Clone)]
pub struct KrylovOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn residual<A>(apply: &A, b: &[f64], x: &[f64], out: &mut [f64])
where
    A: Fn(&[f64], &mut [f64]),
{
    apply(x, out);
    for (o, bi) in out.iter_mut().zip(b) {
        *o = bi - *o;
    }
}

/// Solves `A x = b` with GMRES(`restart`) on `A M⁻¹ y = b`, `x = M⁻¹ y`.
pub fn gmres<A, P>(
    apply: A,
    precond: P,
    b: &[f64],
    x0: Vec<f64>,
    opts: &KrylovOptions,
) -> Result<KrylovOutcome>
where
    A: Fn(&[f64], &mut [f64]),
    P: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let mut x = x0;
    let bnorm = norm(b).max(f64::MIN_POSITIVE);
    let target = opts.tol * bnorm;
    let m = opts.restart.max(1);

    let mut r = vec![0.0; n];
    residual(&apply, b, &x, &mut r);
    let mut beta = norm(&r);
    let mut iterations = 0;
    if beta <= target {
        return Ok(KrylovOutcome {
            x,
            iterations,
            residual: beta / bnorm,
        });
    }

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut h = vec![vec![0.0; m]; m + 1];
    let mut cs = vec![0.0; m];
    let mut sn = vec![0.0; m];
    let mut gvec = vec![0.0; m + 1];
    let mut z = vec![0.0; n];
    let mut w = vec![0.0; n];

    loop {
        basis.clear();
        basis.push(r.iter().map(|v| v / beta).collect());
        gvec.iter_mut().for_each(|v| *v = 0.0);
        gvec[0] = beta;
        let mut k = 0;

        while k < m && iterations < opts.max_iter {
            precond(&basis[k], &mut z);
            apply(&z, &mut w);
            for (i, v) in basis.iter().enumerate() {
                let hij = dot(&w, v);
                h[i][k] = hij;
                for (wj, vj) in w.iter_mut().zip(v) {
                    *wj -= hij * vj;
                }
            }
            let wn = norm(&w);
            h[k + 1][k] = wn;

            for i in 0..k {
                let tmp = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = tmp;
            }
            let denom = h[k][k].hypot(h[k + 1][k]);
            if denom == 0.0 {
                cs[k] = 1.0;
                sn[k] = 0.0;
            } else {
                cs[k] = h[k][k] / denom;
                sn[k] = h[k + 1][k] / denom;
            }
            h[k][k] = denom;
            h[k + 1][k] = 0.0;
            gvec[k + 1] = -sn[k] * gvec[k];
            gvec[k] *= cs[k];

            iterations += 1;
            k += 1;
            if gvec[k].abs() <= target || wn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }

        // back substitution for the k x k upper-triangular system
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = gvec[i];
            for j in i + 1..k {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        let mut update = vec![0.0; n];
        for (yi, v) in y.iter().zip(&basis) {
            for (u, vi) in update.iter_mut().zip(v) {
                *u += yi * vi;
            }
        }
        precond(&update, &mut z);
        for (xi, zi) in x.iter_mut().zip(&z) {
            *xi += zi;
        }

        residual(&apply, b, &x, &mut r);
        beta = norm(&r);
        if beta <= target {
            return Ok(KrylovOutcome {
                x,
                iterations,
                residual: beta / bnorm,
            });
        }
        if iterations >= opts.max_iter {
            return Err(Error::NoConvergence {
                iterations,
                residual: beta / bnorm,
            });
        }
    }
}
