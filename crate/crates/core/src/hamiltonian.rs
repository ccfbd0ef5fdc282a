//! Bose-Hubbard Hamiltonian on the fixed-`N` Fock basis and its ground state.

use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::{FockBasis, QuantumState};
use crate::lanczos;

/// How the on-site interaction is written.
///
/// The two forms differ by `U N`, a constant at fixed particle number, so
/// every density correlator is the same under either one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionConvention {
    /// `(U/2) sum n_j (n_j - 1)`
    #[default]
    StandardNnMinus1,
    /// `(U/2) sum n_j (n_j + 1)`
    ShiftedNnPlus1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    #[default]
    Open,
    Periodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoseHubbardParams {
    pub tunneling: f64,
    pub interaction: f64,
    #[serde(default)]
    pub convention: InteractionConvention,
    #[serde(default)]
    pub boundary: Boundary,
}

impl BoseHubbardParams {
    /// `J = 1`, open chain, standard convention.
    pub fn new(interaction: f64) -> Self {
        BoseHubbardParams {
            tunneling: 1.0,
            interaction,
            convention: InteractionConvention::default(),
            boundary: Boundary::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tunneling > 0.0) {
            return Err(Error::config("tunneling J must be positive"));
        }
        if !(self.interaction >= 0.0) {
            return Err(Error::config("interaction U must be non-negative"));
        }
        Ok(())
    }

    fn onsite(&self, n: u8) -> f64 {
        let n = n as f64;
        match self.convention {
            InteractionConvention::StandardNnMinus1 => 0.5 * self.interaction * n * (n - 1.0),
            InteractionConvention::ShiftedNnPlus1 => 0.5 * self.interaction * n * (n + 1.0),
        }
    }
}

/// Real symmetric matrix in compressed-row form.
#[derive(Debug, Clone)]
pub struct SparseHamiltonian {
    basis: Arc<FockBasis>,
    params: BoseHubbardParams,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    values: Vec<f64>,
}

pub fn build_hamiltonian(
    basis: Arc<FockBasis>,
    params: BoseHubbardParams,
) -> Result<SparseHamiltonian> {
    params.validate()?;
    let l = basis.sites();
    let dim = basis.dim();

    let mut bonds: Vec<(usize, usize)> = (0..l.saturating_sub(1)).map(|j| (j, j + 1)).collect();
    // a wrap bond on two sites would double the existing one
    if params.boundary == Boundary::Periodic && l > 2 {
        bonds.push((l - 1, 0));
    }

    let mut row_ptr = Vec::with_capacity(dim + 1);
    let mut cols = Vec::new();
    let mut values = Vec::new();
    let mut scratch = vec![0u8; l];
    let mut row: Vec<(usize, f64)> = Vec::new();
    row_ptr.push(0);

    for k in 0..dim {
        let state = basis.state(k);
        row.clear();
        let diag: f64 = state.iter().map(|&n| params.onsite(n)).sum();
        row.push((k, diag));

        // -J a_a^dag a_b acting on |state> for both hop directions of every bond
        for &(a, b) in &bonds {
            for (to, from) in [(a, b), (b, a)] {
                if state[from] == 0 {
                    continue;
                }
                scratch.copy_from_slice(state);
                scratch[from] -= 1;
                scratch[to] += 1;
                if let Some(r) = basis.index_of(&scratch) {
                    let amp =
                        -params.tunneling * ((state[to] as f64 + 1.0) * state[from] as f64).sqrt();
                    row.push((r, amp));
                }
            }
        }
        // H[r][k] = amp, and H is symmetric so row k gets the same entries
        row.sort_by_key(|&(c, _)| c);
        let mut last: Option<usize> = None;
        for &(c, v) in row.iter() {
            if last == Some(c) {
                *values.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                values.push(v);
                last = Some(c);
            }
        }
        row_ptr.push(cols.len());
    }

    Ok(SparseHamiltonian {
        basis,
        params,
        row_ptr,
        cols,
        values,
    })
}

impl SparseHamiltonian {
    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn params(&self) -> BoseHubbardParams {
        self.params
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(row, col, value)` for every stored entry.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim()).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |i| (r, self.cols[i], self.values[i]))
        })
    }

    pub fn diagonal(&self, k: usize) -> f64 {
        let range = self.row_ptr[k]..self.row_ptr[k + 1];
        self.cols[range.clone()]
            .iter()
            .zip(&self.values[range])
            .find(|(&c, _)| c == k)
            .map_or(0.0, |(_, &v)| v)
    }

    pub fn apply_real(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[i] * x[self.cols[i]];
            }
            *out = acc;
        }
    }

    pub fn apply(&self, x: &[Complex64], y: &mut [Complex64]) {
        for (r, out) in y.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for i in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += x[self.cols[i]] * self.values[i];
            }
            *out = acc;
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim(), self.dim());
        for (r, c, v) in self.entries() {
            m[(r, c)] = v;
        }
        m
    }

    /// `<psi|H|psi>` (real for Hermitian `H`).
    pub fn energy(&self, psi: &[Complex64]) -> f64 {
        let mut hpsi = vec![Complex64::new(0.0, 0.0); psi.len()];
        self.apply(psi, &mut hpsi);
        crate::fockspace::inner(psi, &hpsi).re
    }

    /// Gershgorin bound on the spectral radius.
    pub fn norm_bound(&self) -> f64 {
        (0..self.dim())
            .map(|r| {
                self.values[self.row_ptr[r]..self.row_ptr[r + 1]]
                    .iter()
                    .map(|v| v.abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    /// Dense below `dense_limit`, Lanczos above.
    Auto,
    Dense,
    Lanczos,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub method: EigenMethod,
    /// Largest dimension handled by dense diagonalization under `Auto`.
    pub dense_limit: usize,
    /// Required `||H psi - E psi||`.
    pub tolerance: f64,
    /// Krylov vectors per Lanczos cycle.
    pub max_krylov: usize,
    pub max_restarts: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            method: EigenMethod::Auto,
            dense_limit: 1000,
            tolerance: 1e-10,
            max_krylov: 300,
            max_restarts: 20,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GroundState {
    pub state: QuantumState,
    pub energy: f64,
    pub residual: f64,
}

pub fn ground_state(h: &SparseHamiltonian) -> Result<GroundState> {
    ground_state_with(h, &SolverOptions::default())
}

/// Lowest eigenpair. The global phase is fixed so that the largest-magnitude
/// amplitude is real and positive.
pub fn ground_state_with(h: &SparseHamiltonian, opts: &SolverOptions) -> Result<GroundState> {
    let dim = h.dim();
    if dim == 0 {
        return Err(Error::config("empty Hilbert space"));
    }
    let use_dense = match opts.method {
        EigenMethod::Dense => true,
        EigenMethod::Lanczos => false,
        EigenMethod::Auto => dim <= opts.dense_limit,
    };
    let (energy, mut vector) = if use_dense {
        let eig = h.to_dense().symmetric_eigen();
        let (imin, &e) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(b.1))
            .expect("nonempty");
        (
            e,
            eig.eigenvectors
                .column(imin)
                .iter()
                .copied()
                .collect::<Vec<f64>>(),
        )
    } else {
        lanczos::lowest_eigenpair(h, opts)?
    };

    let pivot = vector
        .iter()
        .copied()
        .max_by(|a, b| a.abs().total_cmp(&b.abs()))
        .unwrap_or(1.0);
    let norm = vector.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = pivot.signum() / norm;
    vector.iter_mut().for_each(|x| *x *= scale);

    let residual = residual(h, &vector, energy);
    if !(residual <= opts.tolerance) {
        return Err(Error::numerical(
            "ground state residual above tolerance",
            residual,
        ));
    }
    let amplitudes = vector.into_iter().map(|x| Complex64::new(x, 0.0)).collect();
    Ok(GroundState {
        state: QuantumState::new(h.basis().clone(), amplitudes)?,
        energy,
        residual,
    })
}

pub(crate) fn residual(h: &SparseHamiltonian, v: &[f64], e: f64) -> f64 {
    let mut hv = vec![0.0; v.len()];
    h.apply_real(v, &mut hv);
    hv.iter()
        .zip(v)
        .map(|(a, b)| (a - e * b).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fockspace::{build_basis, LatticeSpec};

    fn basis(l: usize, n: usize, cap: usize) -> Arc<FockBasis> {
        Arc::new(build_basis(LatticeSpec::new(l, n, cap).unwrap()).unwrap())
    }

    #[test]
    fn single_particle_two_sites() {
        let h = build_hamiltonian(basis(2, 1, 1), BoseHubbardParams::new(3.7)).unwrap();
        let d = h.to_dense();
        assert_eq!(d, DMatrix::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0]));
    }

    #[test]
    fn two_free_bosons_ground_energy() {
        let h = build_hamiltonian(basis(2, 2, 2), BoseHubbardParams::new(0.0)).unwrap();
        let gs = ground_state(&h).unwrap();
        assert!((gs.energy + 2.0).abs() < 1e-12);
    }

    #[test]
    fn explicit_three_by_three() {
        // basis (2,0), (1,1), (0,2); U = 2 gives diag (2, 0, 2), hops -sqrt(2)
        let h = build_hamiltonian(basis(2, 2, 2), BoseHubbardParams::new(2.0)).unwrap();
        let s2 = 2f64.sqrt();
        let expect = DMatrix::from_row_slice(3, 3, &[2.0, -s2, 0.0, -s2, 0.0, -s2, 0.0, -s2, 2.0]);
        assert_eq!(h.to_dense(), expect);
        let e_min = expect.symmetric_eigen().eigenvalues.min();
        // characteristic polynomial: the symmetric sector gives E = 1 - sqrt(5)
        assert!((e_min - (1.0 - 5f64.sqrt())).abs() < 1e-12);
        assert!((ground_state(&h).unwrap().energy - e_min).abs() < 1e-12);
    }

    #[test]
    fn assembled_matrix_is_symmetric() {
        let h = build_hamiltonian(basis(5, 5, 3), BoseHubbardParams::new(1.3)).unwrap();
        let d = h.to_dense();
        assert_eq!(d, d.transpose());
    }

    #[test]
    fn diagonal_is_interaction_energy() {
        let b = basis(4, 4, 3);
        let h = build_hamiltonian(b.clone(), BoseHubbardParams::new(2.5)).unwrap();
        for k in 0..b.dim() {
            let e: f64 = b
                .state(k)
                .iter()
                .map(|&n| 1.25 * (n as f64) * (n as f64 - 1.0))
                .sum();
            assert_eq!(h.diagonal(k), e);
        }
    }

    #[test]
    fn two_site_ground_state_vector() {
        let h = build_hamiltonian(basis(2, 1, 1), BoseHubbardParams::new(0.0)).unwrap();
        let gs = ground_state(&h).unwrap();
        assert!((gs.energy + 1.0).abs() < 1e-14);
        let s = std::f64::consts::FRAC_1_SQRT_2;
        for c in gs.state.amplitudes() {
            assert!((c.re - s).abs() < 1e-12 && c.im == 0.0);
        }
    }

    #[test]
    fn dense_and_lanczos_agree() {
        let h = build_hamiltonian(basis(6, 6, 3), BoseHubbardParams::new(2.0)).unwrap();
        let mut opts = SolverOptions {
            method: EigenMethod::Dense,
            ..Default::default()
        };
        let dense = ground_state_with(&h, &opts).unwrap();
        opts.method = EigenMethod::Lanczos;
        let lanczos = ground_state_with(&h, &opts).unwrap();
        assert!((dense.energy - lanczos.energy).abs() < 1e-9);
        assert!(lanczos.residual <= 1e-10);
        let overlap = dense.state.inner(&lanczos.state).norm();
        assert!((overlap - 1.0).abs() < 1e-9);
    }

    #[test]
    fn convention_shifts_spectrum_by_un() {
        let b = basis(4, 4, 3);
        let mut p = BoseHubbardParams::new(2.0);
        let std_h = build_hamiltonian(b.clone(), p).unwrap();
        p.convention = InteractionConvention::ShiftedNnPlus1;
        let shifted_h = build_hamiltonian(b, p).unwrap();
        let e1 = std_h.to_dense().symmetric_eigen().eigenvalues;
        let e2 = shifted_h.to_dense().symmetric_eigen().eigenvalues;
        let mut a: Vec<f64> = e1.iter().copied().collect();
        let mut c: Vec<f64> = e2.iter().copied().collect();
        a.sort_by(f64::total_cmp);
        c.sort_by(f64::total_cmp);
        for (x, y) in a.iter().zip(&c) {
            assert!((y - x - 2.0 * 4.0).abs() < 1e-10);
        }
        let g1 = ground_state(&std_h).unwrap();
        let g2 = ground_state(&shifted_h).unwrap();
        assert!((g1.state.inner(&g2.state).norm() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn ground_energy_monotone_in_u() {
        let b = basis(5, 5, 3);
        let energies: Vec<f64> = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0]
            .iter()
            .map(|&u| {
                ground_state(&build_hamiltonian(b.clone(), BoseHubbardParams::new(u)).unwrap())
                    .unwrap()
                    .energy
            })
            .collect();
        assert!(energies.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn periodic_ring_adds_wrap_bond() {
        let mut p = BoseHubbardParams::new(0.0);
        p.boundary = Boundary::Periodic;
        let h = build_hamiltonian(basis(4, 1, 1), p).unwrap();
        // single particle on a 4-ring: E = -2J cos k, minimum -2
        assert!((ground_state(&h).unwrap().energy + 2.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(build_hamiltonian(basis(2, 1, 1), BoseHubbardParams::new(-1.0)).is_err());
        let mut p = BoseHubbardParams::new(1.0);
        p.tunneling = 0.0;
        assert!(build_hamiltonian(basis(2, 1, 1), p).is_err());
    }
}
