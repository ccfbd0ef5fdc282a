//! Restarted Lanczos with full reorthogonalization for the lowest eigenpair
//! of a real symmetric sparse matrix.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};
use crate::hamiltonian::{residual, SolverOptions, SparseHamiltonian};

const BREAKDOWN: f64 = 1e-14;

pub(crate) fn lowest_eigenpair(
    h: &SparseHamiltonian,
    opts: &SolverOptions,
) -> Result<(f64, Vec<f64>)> {
    let dim = h.dim();
    if dim == 1 {
        return Ok((h.diagonal(0), vec![1.0]));
    }

    // deterministic, strictly positive start: overlaps the nodeless ground state
    let mut start: Vec<f64> = (0..dim)
        .map(|i| 1.0 + 0.5 * ((i as f64 + 1.0) * 0.618_033_988_749_895).fract())
        .collect();
    normalize(&mut start);

    let mut best = (f64::INFINITY, start.clone(), f64::INFINITY);
    for restart in 0..=opts.max_restarts {
        let (e, v) = cycle(h, &start, opts.max_krylov.min(dim), opts.tolerance);
        let r = residual(h, &v, e);
        log::debug!("lanczos cycle {restart}: E = {e:.14}, residual {r:.3e}");
        if r <= opts.tolerance {
            return Ok((e, v));
        }
        if r < best.2 {
            best = (e, v.clone(), r);
        }
        start = v;
    }
    Err(Error::numerical(
        format!(
            "Lanczos did not converge after {} restarts",
            opts.max_restarts
        ),
        best.2,
    ))
}

/// One Lanczos cycle from `start`; returns the lowest Ritz pair.
fn cycle(h: &SparseHamiltonian, start: &[f64], max_krylov: usize, tol: f64) -> (f64, Vec<f64>) {
    let dim = start.len();
    let mut basis: Vec<Vec<f64>> = vec![start.to_vec()];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut w = vec![0.0; dim];

    loop {
        let j = basis.len() - 1;
        h.apply_real(&basis[j], &mut w);
        let a = dot(&basis[j], &w);
        alpha.push(a);
        axpy(-a, &basis[j], &mut w);
        if j > 0 {
            axpy(-beta[j - 1], &basis[j - 1], &mut w);
        }
        // two passes of full reorthogonalization
        for _ in 0..2 {
            for q in &basis {
                let o = dot(q, &w);
                axpy(-o, q, &mut w);
            }
        }
        let b = dot(&w, &w).sqrt();
        let m = alpha.len();

        let check = m == max_krylov || b < BREAKDOWN || m % 5 == 0;
        if check {
            let (theta, s) = lowest_ritz(&alpha, &beta);
            // |beta_m s_m| bounds the residual of the Ritz pair
            let estimate = (b * s[m - 1]).abs();
            if m == max_krylov || b < BREAKDOWN || estimate < 0.1 * tol {
                let mut v = vec![0.0; dim];
                for (q, &c) in basis.iter().zip(s.iter()) {
                    axpy(c, q, &mut v);
                }
                normalize(&mut v);
                return (theta, v);
            }
        }
        beta.push(b);
        w.iter_mut().for_each(|x| *x /= b);
        basis.push(std::mem::replace(&mut w, vec![0.0; dim]));
    }
}

fn lowest_ritz(alpha: &[f64], beta: &[f64]) -> (f64, Vec<f64>) {
    let m = alpha.len();
    let mut t = DMatrix::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let (imin, &theta) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .expect("nonempty tridiagonal");
    (
        theta,
        eig.eigenvectors.column(imin).iter().copied().collect(),
    )
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

fn normalize(v: &mut [f64]) {
    let n = dot(v, v).sqrt();
    v.iter_mut().for_each(|x| *x /= n);
}
