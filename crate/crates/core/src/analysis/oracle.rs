//! Exact two-time correlators and the error model they feed.
//!
//! `C_jj'(t) = <psi| n_j U†(t) n_j' U(t) |psi>` is evaluated as the overlap of
//! `U(t) n_j psi` with `n_j' U(t) psi`. Its real part is what the two-measurement
//! estimator converges to.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis::correlate::{displacement_count, CorrelatorKind, VanHoveGrid};
use crate::analysis::cutoff::cutoff_matrix;
use crate::error::Result;
use crate::evolution::Propagator;
use crate::fockspace::{number_matrix_element, QuantumState};
use crate::measurement::check_normalized;

/// Weight of `Γ L²` in the predicted variance of a noise-correlation sample.
///
/// The O(Γ) drift `-Γ L` of the evolved density multiplies the first-record
/// noise `m / (2 sqrt Γ)`, contributing `-(sqrt Γ / 2) m L` to the product
/// and hence `Γ L² / 4` to its variance.
pub const SYSTEMATIC_VARIANCE_COEFF: f64 = 0.25;

/// `<U(t) n_j psi | n_j' | U(t) psi>`.
pub fn oracle_two_time(
    propagator: &Propagator,
    psi0: &QuantumState,
    j: usize,
    jp: usize,
    t: f64,
) -> Result<Complex64> {
    check_normalized(psi0)?;
    let basis = psi0.basis();
    basis.check_site(jp)?;
    let a = propagator.evolve_vector(psi0.amplitudes(), t)?;
    let b = propagator.evolve_vector(&psi0.apply_number_op(j)?, t)?;
    Ok(number_matrix_element(basis, &b, jp, &a))
}

/// `C_jj'(t)` for every site pair and grid time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleCorrelations {
    pub sites: usize,
    pub times: Vec<f64>,
    /// `[time][j * L + j']`.
    pub matrices: Vec<Vec<Complex64>>,
    /// `<n_j>` at `t = 0`.
    pub initial_densities: Vec<f64>,
    /// `<n_j(t)>` per grid time.
    pub densities: Vec<Vec<f64>>,
}

impl OracleCorrelations {
    pub fn get(&self, j: usize, jp: usize, k: usize) -> Complex64 {
        self.matrices[k][j * self.sites + jp]
    }

    /// `Re C - <n_j><n_j'(t)>` for the connected kind, `Re C` for the raw one.
    pub fn real_part(&self, j: usize, jp: usize, k: usize, kind: CorrelatorKind) -> f64 {
        let c = self.get(j, jp, k).re;
        match kind {
            CorrelatorKind::Raw => c,
            CorrelatorKind::Connected => c - self.initial_densities[j] * self.densities[k][jp],
        }
    }

    /// Exact Van Hove function with the same pair averaging as the estimator.
    pub fn van_hove(&self, kind: CorrelatorKind) -> VanHoveGrid {
        let l = self.sites;
        let width = displacement_count(l);
        let mut values = Vec::with_capacity(self.times.len() * width);
        for k in 0..self.times.len() {
            for d in 0..width {
                let dj = d as i64 - (l as i64 - 1);
                let lo = (-dj).max(0) as usize;
                let hi = (l as i64 - dj.max(0)) as usize;
                let s: f64 = (lo..hi)
                    .map(|j| self.real_part(j, (j as i64 + dj) as usize, k, kind))
                    .sum();
                values.push(s / (hi - lo) as f64);
            }
        }
        let n = values.len();
        VanHoveGrid::from_values(l, self.times.clone(), kind, values, vec![0.0; n], 0)
    }

    /// Correlations of low-pass filtered records: `P C Pᵀ` and `P <n>`.
    pub fn filtered(&self, k_max: f64) -> Result<OracleCorrelations> {
        let l = self.sites;
        let p = cutoff_matrix(l, k_max)?;
        let apply_vec = |v: &[f64]| -> Vec<f64> {
            (0..l)
                .map(|r| (0..l).map(|c| p[(r, c)] * v[c]).sum())
                .collect()
        };
        let matrices = self
            .matrices
            .iter()
            .map(|m| {
                let mut out = vec![Complex64::new(0.0, 0.0); l * l];
                for a in 0..l {
                    for b in 0..l {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for j in 0..l {
                            for jp in 0..l {
                                acc += m[j * l + jp] * (p[(a, j)] * p[(b, jp)]);
                            }
                        }
                        out[a * l + b] = acc;
                    }
                }
                out
            })
            .collect();
        Ok(OracleCorrelations {
            sites: l,
            times: self.times.clone(),
            matrices,
            initial_densities: apply_vec(&self.initial_densities),
            densities: self.densities.iter().map(|d| apply_vec(d)).collect(),
        })
    }
}

/// All `C_jj'(t)` on an ascending grid: `L + 1` grid propagations.
pub fn oracle_correlations(
    propagator: &Propagator,
    psi0: &QuantumState,
    times: &[f64],
) -> Result<OracleCorrelations> {
    check_normalized(psi0)?;
    let basis = psi0.basis();
    let l = basis.sites();
    let mut evolved: Vec<Vec<Complex64>> = Vec::with_capacity(times.len());
    let mut densities = Vec::with_capacity(times.len());
    propagator.evolve_vector_grid_with(psi0.amplitudes(), times, |_, v| {
        densities.push(crate::fockspace::densities(basis, v));
        evolved.push(v.to_vec());
    })?;
    let mut matrices = vec![vec![Complex64::new(0.0, 0.0); l * l]; times.len()];
    for j in 0..l {
        let start = psi0.apply_number_op(j)?;
        propagator.evolve_vector_grid_with(&start, times, |k, b| {
            for jp in 0..l {
                matrices[k][j * l + jp] = number_matrix_element(basis, b, jp, &evolved[k]);
            }
        })?;
    }
    Ok(OracleCorrelations {
        sites: l,
        times: times.to_vec(),
        matrices,
        initial_densities: psi0.density_expectation(),
        densities,
    })
}

/// Exact ingredients of the predicted noise-correlation variance at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceTerms {
    pub sites: usize,
    pub time: f64,
    /// `Re<δn_j1(0) δn_j'(t)>` at `[j1 * L + j']`.
    pub connected: Vec<f64>,
    /// `L_j'(t)` per site.
    pub lindblad: Vec<f64>,
}

impl VarianceTerms {
    pub fn compute(propagator: &Propagator, psi0: &QuantumState, t: f64) -> Result<Self> {
        check_normalized(psi0)?;
        let basis = psi0.basis();
        let l = basis.sites();
        let nbar = psi0.density_expectation();
        let a = propagator.evolve_vector(psi0.amplitudes(), t)?;
        let mut connected = vec![0.0; l * l];
        let mut lindblad = vec![0.0; l];
        for j1 in 0..l {
            let shift = |power: i32| -> Vec<Complex64> {
                psi0.amplitudes()
                    .iter()
                    .enumerate()
                    .map(|(k, c)| c * (basis.occupation(k, j1) as f64 - nbar[j1]).powi(power))
                    .collect()
            };
            let b = propagator.evolve_vector(&shift(1), t)?;
            let b2 = propagator.evolve_vector(&shift(2), t)?;
            for jp in 0..l {
                connected[j1 * l + jp] = number_matrix_element(basis, &b, jp, &a).re;
                lindblad[jp] += number_matrix_element(basis, &b2, jp, &a).re
                    - number_matrix_element(basis, &b, jp, &b).re;
            }
        }
        Ok(VarianceTerms {
            sites: l,
            time: t,
            connected,
            lindblad,
        })
    }

    /// `1/(16 Γ²)`: the product of two independent record noises.
    pub fn leading_term(gamma: f64) -> f64 {
        1.0 / (16.0 * gamma * gamma)
    }

    /// Predicted variance of `δn_j(0) δn_j'(t)` with second-measurement noise
    /// included.
    pub fn predicted_variance(
        &self,
        gamma: f64,
        j: usize,
        jp: usize,
        include_systematic: bool,
    ) -> f64 {
        let l = self.sites;
        let r = |a: usize, b: usize| self.connected[a * l + b];
        let mut v = Self::leading_term(gamma) + r(j, jp).powi(2);
        v += (0..l).map(|j1| r(j1, jp).powi(2)).sum::<f64>();
        if include_systematic {
            v += SYSTEMATIC_VARIANCE_COEFF * gamma * self.lindblad[jp].powi(2);
        }
        v
    }
}

/// `L_j'(t) = Σ_j1 Re(<δn_j1² n_j'(t)> - <δn_j1 n_j'(t) δn_j1>)`.
pub fn lindblad_term(
    propagator: &Propagator,
    psi0: &QuantumState,
    jp: usize,
    t: f64,
) -> Result<f64> {
    psi0.basis().check_site(jp)?;
    Ok(VarianceTerms::compute(propagator, psi0, t)?.lindblad[jp])
}

pub fn predicted_variance(
    propagator: &Propagator,
    psi0: &QuantumState,
    gamma: f64,
    j: usize,
    jp: usize,
    t: f64,
    include_systematic: bool,
) -> Result<f64> {
    psi0.basis().check_site(j)?;
    psi0.basis().check_site(jp)?;
    Ok(
        VarianceTerms::compute(propagator, psi0, t)?.predicted_variance(
            gamma,
            j,
            jp,
            include_systematic,
        ),
    )
}
