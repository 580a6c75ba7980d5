//! Matrix-free Krylov solvers: preconditioned CG, preconditioned MINRES and a
//! Lanczos estimate of the lowest eigenpair.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::field::dot;

#[derive(Debug, Clone, Copy)]
pub struct KrylovOutcome {
    pub iterations: usize,
    /// Relative residual `‖b - Ax‖ / ‖b‖` at exit.
    pub relative_residual: f64,
    pub converged: bool,
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Preconditioned conjugate gradients for a symmetric positive (semi)definite
/// operator. `precond` applies an SPD approximation of `A^{-1}`.
pub fn conjugate_gradient<A, P>(
    apply: A,
    precond: P,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> KrylovOutcome
where
    A: Fn(&[f64], &mut [f64]),
    P: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return KrylovOutcome {
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let mut r = vec![0.0; n];
    apply(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z = vec![0.0; n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut rel = norm(&r) / bnorm;
    for it in 0..max_iter {
        if rel <= tol {
            return KrylovOutcome {
                iterations: it,
                relative_residual: rel,
                converged: true,
            };
        }
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        rel = norm(&r) / bnorm;
        precond(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    // recompute the true residual
    apply(x, &mut ap);
    let res: f64 = b
        .iter()
        .zip(&ap)
        .map(|(bi, ai)| (bi - ai).powi(2))
        .sum::<f64>()
        .sqrt();
    KrylovOutcome {
        iterations: max_iter,
        relative_residual: res / bnorm,
        converged: res / bnorm <= tol,
    }
}

/// Preconditioned MINRES for symmetric, possibly indefinite or singular but
/// consistent systems. Starts from `x = 0`.
pub fn minres<A, P>(
    apply: A,
    precond: P,
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
) -> KrylovOutcome
where
    A: Fn(&[f64], &mut [f64]),
    P: Fn(&[f64], &mut [f64]),
{
    let n = b.len();
    x.iter_mut().for_each(|v| *v = 0.0);
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return KrylovOutcome {
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let mut r1 = b.to_vec();
    let mut y = vec![0.0; n];
    precond(&r1, &mut y);
    let beta1 = dot(&r1, &y).max(0.0).sqrt();
    let mut r2 = r1.clone();
    let mut oldb = 0.0;
    let mut beta = beta1;
    let mut dbar = 0.0;
    let mut epsln = 0.0;
    let mut phibar = beta1;
    let mut cs = -1.0;
    let mut sn = 0.0;
    let mut w = vec![0.0; n];
    let mut w1 = vec![0.0; n];
    let mut w2 = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut iterations = 0;

    for itn in 1..=max_iter {
        iterations = itn;
        let s = 1.0 / beta;
        for i in 0..n {
            v[i] = s * y[i];
        }
        apply(&v, &mut y);
        if itn >= 2 {
            let f = beta / oldb;
            for i in 0..n {
                y[i] -= f * r1[i];
            }
        }
        let alfa = dot(&v, &y);
        let f = alfa / beta;
        for i in 0..n {
            y[i] -= f * r2[i];
        }
        std::mem::swap(&mut r1, &mut r2);
        r2.copy_from_slice(&y);
        precond(&r2, &mut y);
        oldb = beta;
        beta = dot(&r2, &y).max(0.0).sqrt();

        let oldeps = epsln;
        let delta = cs * dbar + sn * alfa;
        let gbar = sn * dbar - cs * alfa;
        epsln = sn * beta;
        dbar = -cs * beta;
        let gamma = gbar.hypot(beta).max(f64::EPSILON);
        cs = gbar / gamma;
        sn = beta / gamma;
        let phi = cs * phibar;
        phibar *= sn;

        std::mem::swap(&mut w1, &mut w2);
        std::mem::swap(&mut w2, &mut w);
        for i in 0..n {
            w[i] = (v[i] - oldeps * w1[i] - delta * w2[i]) / gamma;
            x[i] += phi * w[i];
        }
        if phibar / beta1 <= 0.1 * tol || beta == 0.0 {
            break;
        }
    }
    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    let res: f64 = b
        .iter()
        .zip(&ax)
        .map(|(bi, ai)| (bi - ai).powi(2))
        .sum::<f64>()
        .sqrt();
    KrylovOutcome {
        iterations,
        relative_residual: res / bnorm,
        converged: res / bnorm <= tol,
    }
}

/// Lowest eigenpair of a symmetric operator restricted to the orthogonal
/// complement of `exclude` (unit vector), by Lanczos with full
/// reorthogonalisation. Returns `(eigenvalue, unit eigenvector)`.
pub fn lowest_eigenpair<A>(
    apply: A,
    n: usize,
    exclude: &[f64],
    start: &[f64],
    max_steps: usize,
    tol: f64,
) -> (f64, Vec<f64>)
where
    A: Fn(&[f64], &mut [f64]),
{
    let project = |v: &mut [f64]| {
        let c = dot(v, exclude);
        for i in 0..v.len() {
            v[i] -= c * exclude[i];
        }
    };
    let mut q = start.to_vec();
    project(&mut q);
    let qn = norm(&q);
    q.iter_mut().for_each(|x| *x /= qn);
    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut alphas = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut w = vec![0.0; n];
    let steps = max_steps.min(n.saturating_sub(1)).max(1);
    let mut best = (f64::INFINITY, basis[0].clone());
    for j in 0..steps {
        apply(&basis[j], &mut w);
        project(&mut w);
        let a = dot(&w, &basis[j]);
        alphas.push(a);
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                for i in 0..n {
                    w[i] -= c * b[i];
                }
            }
        }
        let bnext = norm(&w);

        let m = alphas.len();
        let mut t = DMatrix::<f64>::zeros(m, m);
        for i in 0..m {
            t[(i, i)] = alphas[i];
            if i + 1 < m {
                t[(i, i + 1)] = betas[i];
                t[(i + 1, i)] = betas[i];
            }
        }
        let eig = SymmetricEigen::new(t);
        let (imin, &lmin) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        let s = eig.eigenvectors.column(imin);
        let resid = (bnext * s[m - 1]).abs();
        let done = resid <= tol * lmin.abs().max(1.0) || bnext < 1e-14 || j + 1 == steps;
        if done || (j + 1) % 10 == 0 {
            let mut vec = vec![0.0; n];
            for (k, b) in basis.iter().enumerate() {
                for i in 0..n {
                    vec[i] += s[k] * b[i];
                }
            }
            let vn = norm(&vec);
            vec.iter_mut().for_each(|x| *x /= vn);
            best = (lmin, vec);
        }
        if done {
            break;
        }
        betas.push(bnext);
        basis.push(w.iter().map(|x| x / bnext).collect());
    }
    best
}
