//! Unitary propagation `exp(-i H t)` with `hbar = 1` and time in units of `1/J`.
//!
//! Two back ends share one interface. The dense one diagonalizes `H` once and
//! propagates by phase rotation in the eigenbasis; it is exact to rounding and
//! is the reference wherever the dimension allows. The Krylov one builds a
//! Lanczos basis from the vector being propagated and exponentiates the small
//! tridiagonal projection, subdividing steps until the a-posteriori error
//! estimate meets the per-step tolerance.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::{norm_sqr, FockBasis, QuantumState};
use crate::hamiltonian::SparseHamiltonian;

/// Norm drift tolerated per propagation before it is reported as an error.
pub const NORM_DRIFT_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropagationMethod {
    Auto,
    DenseExponential,
    Krylov,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PropagatorOptions {
    pub method: PropagationMethod,
    /// Largest dimension diagonalized densely under `Auto`.
    pub dense_limit: usize,
    pub krylov_dim: usize,
    /// Error bound per Krylov substep.
    pub tolerance: f64,
}

impl Default for PropagatorOptions {
    fn default() -> Self {
        PropagatorOptions {
            method: PropagationMethod::Auto,
            dense_limit: 1000,
            krylov_dim: 30,
            tolerance: 1e-12,
        }
    }
}

struct Eigenbasis {
    energies: Vec<f64>,
    /// Columns are eigenvectors.
    vectors: DMatrix<f64>,
    vectors_t: DMatrix<f64>,
}

enum Backend {
    Dense(Eigenbasis),
    Krylov { krylov_dim: usize, tolerance: f64 },
}

pub struct Propagator {
    hamiltonian: Arc<SparseHamiltonian>,
    backend: Backend,
}

impl std::fmt::Debug for Propagator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Propagator")
            .field("dim", &self.hamiltonian.dim())
            .field("method", &self.method())
            .finish()
    }
}

impl Propagator {
    pub fn new(hamiltonian: Arc<SparseHamiltonian>) -> Self {
        Self::with_options(hamiltonian, &PropagatorOptions::default())
    }

    pub fn with_options(hamiltonian: Arc<SparseHamiltonian>, opts: &PropagatorOptions) -> Self {
        let dense = match opts.method {
            PropagationMethod::DenseExponential => true,
            PropagationMethod::Krylov => false,
            PropagationMethod::Auto => hamiltonian.dim() <= opts.dense_limit,
        };
        let backend = if dense {
            let eig = SymmetricEigen::new(hamiltonian.to_dense());
            let vectors_t = eig.eigenvectors.transpose();
            Backend::Dense(Eigenbasis {
                energies: eig.eigenvalues.iter().copied().collect(),
                vectors: eig.eigenvectors,
                vectors_t,
            })
        } else {
            Backend::Krylov {
                krylov_dim: opts.krylov_dim.max(2),
                tolerance: opts.tolerance,
            }
        };
        Propagator {
            hamiltonian,
            backend,
        }
    }

    pub fn hamiltonian(&self) -> &Arc<SparseHamiltonian> {
        &self.hamiltonian
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        self.hamiltonian.basis()
    }

    pub fn method(&self) -> PropagationMethod {
        match self.backend {
            Backend::Dense(_) => PropagationMethod::DenseExponential,
            Backend::Krylov { .. } => PropagationMethod::Krylov,
        }
    }

    /// `U(dt) |psi>`.
    pub fn evolve(&self, state: &QuantumState, dt: f64) -> Result<QuantumState> {
        check_time(dt)?;
        let out = self.evolve_vector(state.amplitudes(), dt)?;
        self.renormalized(out)
    }

    /// States at each (ascending) grid time, stepping from one time to the next.
    pub fn evolve_grid(&self, state: &QuantumState, times: &[f64]) -> Result<Vec<QuantumState>> {
        let mut out = Vec::with_capacity(times.len());
        self.evolve_grid_with(state, times, |_, s| out.push(s.clone()))?;
        Ok(out)
    }

    /// Like [`evolve_grid`](Self::evolve_grid) but hands each state to `visit`
    /// instead of collecting them.
    pub fn evolve_grid_with<F>(
        &self,
        state: &QuantumState,
        times: &[f64],
        mut visit: F,
    ) -> Result<()>
    where
        F: FnMut(usize, &QuantumState),
    {
        self.evolve_vector_grid_with(state.amplitudes(), times, |k, v| {
            let s = QuantumState::normalized_unchecked(self.basis().clone(), v.to_vec());
            visit(k, &s);
        })
    }

    /// `U(dt) v` for an arbitrary (not necessarily normalized) vector.
    pub fn evolve_vector(&self, v: &[Complex64], dt: f64) -> Result<Vec<Complex64>> {
        check_time(dt)?;
        if dt == 0.0 {
            return Ok(v.to_vec());
        }
        match &self.backend {
            Backend::Dense(eb) => {
                let mut c = eb.to_eigen(v);
                rotate(&mut c, &eb.energies, dt);
                Ok(eb.expand(&c))
            }
            Backend::Krylov {
                krylov_dim,
                tolerance,
            } => {
                let mut out = v.to_vec();
                krylov_advance(&self.hamiltonian, &mut out, dt, *krylov_dim, *tolerance)?;
                Ok(out)
            }
        }
    }

    /// Evolve `v` along an ascending grid, passing `U(t_k) v` to `visit`.
    pub fn evolve_vector_grid_with<F>(
        &self,
        v: &[Complex64],
        times: &[f64],
        mut visit: F,
    ) -> Result<()>
    where
        F: FnMut(usize, &[Complex64]),
    {
        check_grid(times)?;
        let n0 = norm_sqr(v);
        match &self.backend {
            Backend::Dense(eb) => {
                let mut c = eb.to_eigen(v);
                let mut t = 0.0;
                for (k, &tk) in times.iter().enumerate() {
                    if tk > t {
                        rotate(&mut c, &eb.energies, tk - t);
                        t = tk;
                    }
                    let out = if tk == 0.0 { v.to_vec() } else { eb.expand(&c) };
                    check_norm(n0, &out)?;
                    visit(k, &out);
                }
            }
            Backend::Krylov {
                krylov_dim,
                tolerance,
            } => {
                let mut cur = v.to_vec();
                let mut t = 0.0;
                for (k, &tk) in times.iter().enumerate() {
                    if tk > t {
                        krylov_advance(
                            &self.hamiltonian,
                            &mut cur,
                            tk - t,
                            *krylov_dim,
                            *tolerance,
                        )?;
                        t = tk;
                    }
                    check_norm(n0, &cur)?;
                    visit(k, &cur);
                }
            }
        }
        Ok(())
    }

    fn renormalized(&self, v: Vec<Complex64>) -> Result<QuantumState> {
        check_norm(1.0, &v)?;
        Ok(QuantumState::normalized_unchecked(self.basis().clone(), v))
    }
}

impl Eigenbasis {
    fn to_eigen(&self, v: &[Complex64]) -> (DVector<f64>, DVector<f64>) {
        let re = DVector::from_iterator(v.len(), v.iter().map(|c| c.re));
        let im = DVector::from_iterator(v.len(), v.iter().map(|c| c.im));
        (&self.vectors_t * re, &self.vectors_t * im)
    }

    fn expand(&self, c: &(DVector<f64>, DVector<f64>)) -> Vec<Complex64> {
        let re = &self.vectors * &c.0;
        let im = &self.vectors * &c.1;
        re.iter()
            .zip(im.iter())
            .map(|(&a, &b)| Complex64::new(a, b))
            .collect()
    }
}

fn rotate(c: &mut (DVector<f64>, DVector<f64>), energies: &[f64], dt: f64) {
    for (k, &e) in energies.iter().enumerate() {
        let (s, co) = (-e * dt).sin_cos();
        let (a, b) = (c.0[k], c.1[k]);
        c.0[k] = a * co - b * s;
        c.1[k] = a * s + b * co;
    }
}

fn check_time(dt: f64) -> Result<()> {
    if !(dt >= 0.0) || !dt.is_finite() {
        return Err(Error::config(format!(
            "evolution time must be finite and non-negative, got {dt}"
        )));
    }
    Ok(())
}

pub(crate) fn check_grid(times: &[f64]) -> Result<()> {
    for &t in times {
        check_time(t)?;
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::config("time grid must be ascending"));
    }
    Ok(())
}

fn check_norm(expected: f64, v: &[Complex64]) -> Result<()> {
    let n = norm_sqr(v);
    let drift = (n - expected).abs() / expected.max(f64::MIN_POSITIVE);
    if drift > NORM_DRIFT_TOLERANCE {
        return Err(Error::numerical(
            "propagation did not preserve the norm",
            drift,
        ));
    }
    Ok(())
}

/// `exp(-i T tau) e_1` for the symmetric tridiagonal `T` with diagonal
/// `alpha` and off-diagonal `beta`.
fn tridiagonal_exp_e1(alpha: &[f64], beta: &[f64], tau: f64) -> Vec<Complex64> {
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
    (0..m)
        .map(|r| {
            (0..m)
                .map(|k| {
                    let s = eig.eigenvectors[(0, k)] * eig.eigenvectors[(r, k)];
                    Complex64::from_polar(s, -eig.eigenvalues[k] * tau)
                })
                .sum()
        })
        .collect()
}

/// Uncompensated `<a|b>`; the Krylov basis is reorthogonalized, so plain
/// summation is accurate enough there.
fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter()
        .zip(b)
        .fold(Complex64::new(0.0, 0.0), |acc, (x, y)| acc + x.conj() * y)
}

/// Advance `v` by `dt` in place with adaptive Krylov substeps.
fn krylov_advance(
    h: &SparseHamiltonian,
    v: &mut [Complex64],
    dt: f64,
    m_max: usize,
    tol: f64,
) -> Result<()> {
    let dim = v.len();
    let m_max = m_max.min(dim);
    let mut remaining = dt;
    let mut tau_try = dt;

    while remaining > 0.0 {
        let beta0 = norm_sqr(v).sqrt();
        if beta0 == 0.0 {
            return Ok(());
        }
        // Lanczos basis of K_m(H, v)
        let mut q: Vec<Vec<Complex64>> = vec![v.iter().map(|c| c / beta0).collect()];
        let mut alpha = Vec::with_capacity(m_max);
        let mut beta = Vec::with_capacity(m_max);
        let mut w = vec![Complex64::new(0.0, 0.0); dim];
        let mut tail = 0.0;
        for j in 0..m_max {
            h.apply(&q[j], &mut w);
            let a = dot(&q[j], &w).re;
            alpha.push(a);
            for (wi, qi) in w.iter_mut().zip(&q[j]) {
                *wi -= qi * a;
            }
            if j > 0 {
                let b = beta[j - 1];
                for (wi, qi) in w.iter_mut().zip(&q[j - 1]) {
                    *wi -= qi * b;
                }
            }
            for qk in &q {
                let o = dot(qk, &w);
                for (wi, qi) in w.iter_mut().zip(qk) {
                    *wi -= qi * o;
                }
            }
            let b = norm_sqr(&w).sqrt();
            if b < 1e-13 * (1.0 + a.abs()) {
                tail = 0.0;
                break;
            }
            if j + 1 == m_max {
                tail = b;
                break;
            }
            // stop early once the attempted step is already accurate enough
            if j + 1 >= 4 {
                let y = tridiagonal_exp_e1(&alpha, &beta, tau_try.min(remaining));
                if beta0 * b * y[j].norm() <= tol {
                    tail = b;
                    break;
                }
            }
            beta.push(b);
            q.push(w.iter().map(|c| c / b).collect());
        }

        let m = alpha.len();
        let small_exp = |tau: f64| tridiagonal_exp_e1(&alpha, &beta[..m - 1], tau);

        let mut tau = tau_try.min(remaining);
        let mut y;
        let mut halvings = 0;
        loop {
            y = small_exp(tau);
            let err = beta0 * tail * y[m - 1].norm();
            if err <= tol {
                break;
            }
            tau *= 0.5;
            halvings += 1;
            if halvings > 60 {
                return Err(Error::numerical("Krylov step size underflow", err));
            }
        }

        for x in v.iter_mut() {
            *x = Complex64::new(0.0, 0.0);
        }
        for (qk, yk) in q.iter().zip(&y) {
            let c = yk * beta0;
            for (x, qi) in v.iter_mut().zip(qk) {
                *x += qi * c;
            }
        }
        remaining -= tau;
        if remaining < 1e-15 * dt {
            remaining = 0.0;
        }
        tau_try = if halvings == 0 { tau * 1.5 } else { tau };
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fockspace::{build_basis, LatticeSpec};
    use crate::hamiltonian::{build_hamiltonian, ground_state, BoseHubbardParams};

    fn setup(l: usize, n: usize, cap: usize, u: f64) -> Arc<SparseHamiltonian> {
        let b = Arc::new(build_basis(LatticeSpec::new(l, n, cap).unwrap()).unwrap());
        Arc::new(build_hamiltonian(b, BoseHubbardParams::new(u)).unwrap())
    }

    fn both(h: &Arc<SparseHamiltonian>) -> [Propagator; 2] {
        let mut o = PropagatorOptions {
            method: PropagationMethod::DenseExponential,
            ..Default::default()
        };
        let dense = Propagator::with_options(h.clone(), &o);
        o.method = PropagationMethod::Krylov;
        [dense, Propagator::with_options(h.clone(), &o)]
    }

    fn dist(a: &QuantumState, b: &QuantumState) -> f64 {
        a.amplitudes()
            .iter()
            .zip(b.amplitudes())
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    #[test]
    fn zero_time_is_identity() {
        let h = setup(3, 3, 3, 1.0);
        let gs = ground_state(&h).unwrap().state;
        for p in both(&h) {
            let out = p.evolve(&gs, 0.0).unwrap();
            assert_eq!(out.amplitudes(), gs.amplitudes());
        }
    }

    #[test]
    fn two_site_hopping_closed_form() {
        let h = setup(2, 1, 1, 0.0);
        let b = h.basis().clone();
        let start = QuantumState::fock(b, &[1, 0]).unwrap();
        for p in both(&h) {
            for &t in &[0.1, 0.7, 1.3, 2.9] {
                let d = p.evolve(&start, t).unwrap().density_expectation();
                assert!(
                    (d[0] - t.cos().powi(2)).abs() < 1e-12,
                    "{:?} t={t}",
                    p.method()
                );
            }
        }
    }

    #[test]
    fn eigenstate_only_picks_up_phase() {
        let h = setup(4, 4, 3, 2.0);
        let gs = ground_state(&h).unwrap();
        for p in both(&h) {
            let out = p.evolve(&gs.state, 1.7).unwrap();
            let phase = Complex64::from_polar(1.0, -gs.energy * 1.7);
            for (a, b) in out.amplitudes().iter().zip(gs.state.amplitudes()) {
                assert!((a - b * phase).norm() < 1e-9);
            }
            let d0 = gs.state.density_expectation();
            for (x, y) in out.density_expectation().iter().zip(&d0) {
                assert!((x - y).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn grid_matches_single_evolves_and_backends_agree() {
        let h = setup(5, 5, 3, 2.0);
        let start = QuantumState::fock(h.basis().clone(), &[2, 0, 1, 2, 0]).unwrap();
        let times = [0.0, 0.05, 0.5, 1.0, 2.2, 3.0];
        let [dense, krylov] = both(&h);
        let gd = dense.evolve_grid(&start, &times).unwrap();
        let gk = krylov.evolve_grid(&start, &times).unwrap();
        for (k, &t) in times.iter().enumerate() {
            assert!(dist(&gd[k], &dense.evolve(&start, t).unwrap()) < 1e-8);
            assert!(dist(&gk[k], &krylov.evolve(&start, t).unwrap()) < 1e-8);
            assert!(dist(&gd[k], &gk[k]) < 1e-8);
        }
        assert_eq!(gd[0].amplitudes(), start.amplitudes());
    }

    #[test]
    fn energy_conserved() {
        let h = setup(5, 5, 3, 3.0);
        let start = QuantumState::fock(h.basis().clone(), &[1, 2, 0, 1, 1]).unwrap();
        let e0 = h.energy(start.amplitudes());
        for p in both(&h) {
            let e1 = h.energy(p.evolve(&start, 2.5).unwrap().amplitudes());
            assert!(((e1 - e0) / e0).abs() < 1e-9);
        }
    }

    #[test]
    fn negative_time_and_unsorted_grid_rejected() {
        let h = setup(2, 1, 1, 0.0);
        let s = QuantumState::fock(h.basis().clone(), &[1, 0]).unwrap();
        let p = Propagator::new(h);
        assert!(p.evolve(&s, -0.1).is_err());
        assert!(p.evolve_grid(&s, &[0.0, 1.0, 0.5]).is_err());
    }
}
