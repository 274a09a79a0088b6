//! Matrix-free Krylov solvers: preconditioned CG, right-preconditioned GMRES and Lanczos.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{BbmError, Result};
use crate::grid::dot;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KrylovStats {
    pub iterations: usize,
    pub residual: f64,
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

/// Preconditioned conjugate gradients for a symmetric positive definite operator.
pub fn pcg(
    a: impl Fn(&[f64]) -> Vec<f64>,
    m_inv: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, KrylovStats)> {
    let bn = norm(b);
    let mut x = vec![0.0; b.len()];
    if bn == 0.0 {
        return Ok((x, KrylovStats { iterations: 0, residual: 0.0 }));
    }
    let mut r = b.to_vec();
    let mut z = m_inv(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        let ap = a(&p);
        let alpha = rz / dot(&p, &ap);
        axpy(&mut x, alpha, &p);
        axpy(&mut r, -alpha, &ap);
        let res = norm(&r) / bn;
        if res <= tol {
            return Ok((x, KrylovStats { iterations: it, residual: res }));
        }
        z = m_inv(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    let res = norm(&r) / bn;
    Err(BbmError::SolverStalled { iterations: max_iter, residual: res })
}

/// Restarted GMRES with right preconditioning and modified Gram-Schmidt.
pub fn gmres(
    a: impl Fn(&[f64]) -> Vec<f64>,
    m_inv: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    tol: f64,
    restart: usize,
    max_iter: usize,
) -> Result<(Vec<f64>, KrylovStats)> {
    let n = b.len();
    let bn = norm(b);
    let mut x = vec![0.0; n];
    if bn == 0.0 {
        return Ok((x, KrylovStats { iterations: 0, residual: 0.0 }));
    }
    let mut total = 0;
    let mut res = 1.0;
    while total < max_iter {
        let ax = a(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(bi, ai)| bi - ai).collect();
        let beta = norm(&r);
        res = beta / bn;
        if res <= tol {
            break;
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|ri| ri / beta).collect()];
        let mut h: Vec<Vec<f64>> = Vec::new();
        let mut cs: Vec<f64> = Vec::new();
        let mut sn: Vec<f64> = Vec::new();
        let mut g = vec![beta];
        let mut k = 0;
        while k < restart && total < max_iter {
            total += 1;
            let mut w = a(&m_inv(&v[k]));
            let mut col = vec![0.0; k + 2];
            for _ in 0..2 {
                for (i, vi) in v.iter().enumerate() {
                    let c = dot(&w, vi);
                    col[i] += c;
                    axpy(&mut w, -c, vi);
                }
            }
            let wn = norm(&w);
            col[k + 1] = wn;
            for i in 0..k {
                let t = cs[i] * col[i] + sn[i] * col[i + 1];
                col[i + 1] = -sn[i] * col[i] + cs[i] * col[i + 1];
                col[i] = t;
            }
            let d = col[k].hypot(col[k + 1]);
            let (c, s) = if d == 0.0 { (1.0, 0.0) } else { (col[k] / d, col[k + 1] / d) };
            col[k] = d;
            col[k + 1] = 0.0;
            cs.push(c);
            sn.push(s);
            let gk = g[k];
            g[k] = c * gk;
            g.push(-s * gk);
            h.push(col);
            k += 1;
            res = g[k].abs() / bn;
            if res <= tol || wn == 0.0 {
                break;
            }
            v.push(w.iter().map(|wi| wi / wn).collect());
        }
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= h[j][i] * y[j];
            }
            y[i] = s / h[i][i];
        }
        let mut u = vec![0.0; n];
        for (yi, vi) in y.iter().zip(&v) {
            axpy(&mut u, *yi, vi);
        }
        axpy(&mut x, 1.0, &m_inv(&u));
        if res <= tol {
            let ax = a(&x);
            let true_res =
                b.iter().zip(&ax).map(|(bi, ai)| (bi - ai).powi(2)).sum::<f64>().sqrt() / bn;
            if true_res <= 10.0 * tol {
                return Ok((x, KrylovStats { iterations: total, residual: true_res }));
            }
        }
    }
    if res <= tol {
        return Ok((x, KrylovStats { iterations: total, residual: res }));
    }
    Err(BbmError::SolverStalled { iterations: total, residual: res })
}

fn reorthogonalize(w: &mut [f64], basis: &[Vec<f64>]) {
    for _ in 0..2 {
        for q in basis {
            let c = dot(w, q);
            axpy(w, -c, q);
        }
    }
}

#[derive(Debug, Clone)]
pub struct RitzPair {
    pub value: f64,
    pub vector: Vec<f64>,
    /// Residual estimate `|A v - value v|` for the unit Ritz vector.
    pub residual: f64,
}

/// Lanczos with full reorthogonalization. `project` is applied to every new
/// vector, so the iteration stays inside an invariant subspace of the operator.
/// Returns all Ritz pairs in ascending order.
pub fn lanczos(
    mut op: impl FnMut(&[f64]) -> Vec<f64>,
    start: &[f64],
    steps: usize,
    project: impl Fn(&mut Vec<f64>),
) -> Vec<RitzPair> {
    let mut q0 = start.to_vec();
    project(&mut q0);
    let n0 = norm(&q0);
    let mut basis: Vec<Vec<f64>> = vec![q0.iter().map(|v| v / n0).collect()];
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut scale: f64 = 0.0;
    for j in 0..steps {
        let mut w = op(&basis[j]);
        project(&mut w);
        let a = dot(&w, &basis[j]);
        alpha.push(a);
        scale = scale.max(a.abs()).max(norm(&w));
        reorthogonalize(&mut w, &basis);
        let b = norm(&w);
        beta.push(b);
        if b < 1e-10 * scale || j + 1 == steps {
            break;
        }
        // Near breakdown the normalized residual amplifies roundoff outside the
        // constrained subspace; clean it once more after scaling.
        w.iter_mut().for_each(|v| *v /= b);
        project(&mut w);
        reorthogonalize(&mut w, &basis);
        let nw = norm(&w);
        w.iter_mut().for_each(|v| *v /= nw);
        basis.push(w);
    }
    let m = alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let last_beta = beta[m - 1];
    order
        .into_iter()
        .map(|i| {
            let s = eig.eigenvectors.column(i);
            let mut v = vec![0.0; start.len()];
            for (k, q) in basis.iter().take(m).enumerate() {
                axpy(&mut v, s[k], q);
            }
            RitzPair { value: eig.eigenvalues[i], vector: v, residual: (last_beta * s[m - 1]).abs() }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(v: &[f64]) -> Vec<f64> {
        let n = v.len();
        (0..n)
            .map(|i| {
                let l = if i > 0 { v[i - 1] } else { 0.0 };
                let r = if i + 1 < n { v[i + 1] } else { 0.0 };
                4.0 * v[i] - l - r + 0.01 * i as f64 * v[i]
            })
            .collect()
    }

    #[test]
    fn pcg_and_gmres_agree() {
        let b: Vec<f64> = (0..200).map(|i| ((i as f64) * 0.1).sin()).collect();
        let (x1, _) = pcg(tridiag, |r| r.to_vec(), &b, 1e-13, 500).unwrap();
        let (x2, _) = gmres(tridiag, |r| r.iter().map(|v| v / 4.0).collect(), &b, 1e-13, 50, 2000).unwrap();
        let ax = tridiag(&x2);
        for i in 0..200 {
            assert!((x1[i] - x2[i]).abs() < 1e-10);
            assert!((ax[i] - b[i]).abs() < 1e-11);
        }
    }

    #[test]
    fn lanczos_finds_diagonal_extremes() {
        let d: Vec<f64> = (0..300).map(|i| 1.0 + i as f64).collect();
        let op = |v: &[f64]| v.iter().zip(&d).map(|(a, b)| a * b).collect::<Vec<f64>>();
        let start = vec![1.0; 300];
        let pairs = lanczos(op, &start, 120, |_| {});
        assert!((pairs[0].value - 1.0).abs() < 1e-8);
        assert!((pairs.last().unwrap().value - 300.0).abs() < 1e-8);
    }
}
