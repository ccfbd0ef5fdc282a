//! Number-conserving bosonic Fock space of an `L`-site chain.
//!
//! States are occupation tuples `(n_1, ..., n_L)` with `sum n_j = N` and
//! `0 <= n_j <= n_max`. They are listed in descending lexicographic order, so
//! for two sites and two particles the basis is `(2,0), (1,1), (0,2)`.

use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `sum |c_k|^2 - 1` for a state to count as normalized.
pub const NORM_TOLERANCE: f64 = 1e-12;

/// Input states are accepted up to this norm deviation and then renormalized.
const NORM_ACCEPT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LatticeSpec {
    pub sites: usize,
    pub particles: usize,
    pub max_occupancy: usize,
}

impl LatticeSpec {
    pub fn new(sites: usize, particles: usize, max_occupancy: usize) -> Result<Self> {
        let spec = LatticeSpec {
            sites,
            particles,
            max_occupancy,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Unit filling with the default per-site cap of 3.
    pub fn unit_filling(sites: usize) -> Result<Self> {
        Self::new(sites, sites, 3.min(sites.max(1)))
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites == 0 {
            return Err(Error::config("lattice needs at least one site"));
        }
        if self.max_occupancy == 0 {
            return Err(Error::config("per-site cap must be positive"));
        }
        if self.particles > self.sites * self.max_occupancy {
            return Err(Error::config(format!(
                "{} particles do not fit on {} sites with cap {}",
                self.particles, self.sites, self.max_occupancy
            )));
        }
        Ok(())
    }
}

/// Enumerated basis with its inverse index map.
#[derive(Debug, Clone)]
pub struct FockBasis {
    spec: LatticeSpec,
    /// Row-major `dim x sites` occupations.
    occupations: Vec<u8>,
    index: HashMap<Box<[u8]>, usize>,
}

impl FockBasis {
    pub fn new(spec: LatticeSpec) -> Result<Self> {
        build_basis(spec)
    }

    pub fn spec(&self) -> LatticeSpec {
        self.spec
    }

    pub fn sites(&self) -> usize {
        self.spec.sites
    }

    pub fn particles(&self) -> usize {
        self.spec.particles
    }

    pub fn dim(&self) -> usize {
        self.occupations.len() / self.spec.sites
    }

    pub fn state(&self, k: usize) -> &[u8] {
        let l = self.spec.sites;
        &self.occupations[k * l..(k + 1) * l]
    }

    pub fn occupation(&self, k: usize, site: usize) -> u8 {
        self.occupations[k * self.spec.sites + site]
    }

    pub fn index_of(&self, occupation: &[u8]) -> Option<usize> {
        self.index.get(occupation).copied()
    }

    pub fn states(&self) -> impl ExactSizeIterator<Item = &[u8]> + '_ {
        self.occupations.chunks_exact(self.spec.sites)
    }

    /// Occupation of `site` for every basis state, as `f64`.
    pub fn site_occupations(&self, site: usize) -> Vec<f64> {
        (0..self.dim())
            .map(|k| self.occupation(k, site) as f64)
            .collect()
    }

    pub(crate) fn check_site(&self, site: usize) -> Result<()> {
        if site >= self.spec.sites {
            return Err(Error::SiteOutOfRange {
                site,
                sites: self.spec.sites,
            });
        }
        Ok(())
    }
}

/// Enumerate all occupation tuples of `spec` in descending lexicographic order.
pub fn build_basis(spec: LatticeSpec) -> Result<FockBasis> {
    spec.validate()?;
    let l = spec.sites;
    let cap = spec.max_occupancy.min(u8::MAX as usize) as u8;
    let mut occupations = Vec::new();
    let mut current = vec![0u8; l];

    fn fill(site: usize, remaining: usize, cap: u8, current: &mut [u8], out: &mut Vec<u8>) {
        let l = current.len();
        if site == l - 1 {
            if remaining <= cap as usize {
                current[site] = remaining as u8;
                out.extend_from_slice(current);
            }
            return;
        }
        // the remaining sites must be able to absorb what is left
        let rest_capacity = (l - site - 1) * cap as usize;
        let hi = remaining.min(cap as usize);
        let lo = remaining.saturating_sub(rest_capacity);
        for n in (lo..=hi).rev() {
            current[site] = n as u8;
            fill(site + 1, remaining - n, cap, current, out);
        }
    }

    fill(0, spec.particles, cap, &mut current, &mut occupations);

    let index = occupations
        .chunks_exact(l)
        .enumerate()
        .map(|(k, s)| (s.to_vec().into_boxed_slice(), k))
        .collect();
    Ok(FockBasis {
        spec,
        occupations,
        index,
    })
}

/// Normalized amplitudes over a shared basis.
#[derive(Debug, Clone)]
pub struct QuantumState {
    basis: Arc<FockBasis>,
    amplitudes: Vec<Complex64>,
}

impl QuantumState {
    /// Wrap amplitudes, renormalizing if the norm is within `1e-9` of one.
    /// Anything further from normalized is rejected.
    pub fn new(basis: Arc<FockBasis>, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::config(format!(
                "amplitude count {} does not match basis dimension {}",
                amplitudes.len(),
                basis.dim()
            )));
        }
        let norm_sqr = norm_sqr(&amplitudes);
        if (norm_sqr - 1.0).abs() > NORM_ACCEPT {
            return Err(Error::NotNormalized { norm_sqr });
        }
        Ok(Self::normalized_unchecked(basis, amplitudes))
    }

    /// Normalize an arbitrary nonzero amplitude vector.
    pub fn from_unnormalized(basis: Arc<FockBasis>, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != basis.dim() {
            return Err(Error::config("amplitude count does not match basis"));
        }
        let n = norm_sqr(&amplitudes);
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::numerical("cannot normalize a null vector", n));
        }
        Ok(Self::normalized_unchecked(basis, amplitudes))
    }

    pub(crate) fn normalized_unchecked(
        basis: Arc<FockBasis>,
        mut amplitudes: Vec<Complex64>,
    ) -> Self {
        let scale = 1.0 / norm_sqr(&amplitudes).sqrt();
        if scale != 1.0 {
            amplitudes.iter_mut().for_each(|c| *c *= scale);
        }
        QuantumState { basis, amplitudes }
    }

    /// The Fock state with the given occupations.
    pub fn fock(basis: Arc<FockBasis>, occupation: &[u8]) -> Result<Self> {
        let k = basis
            .index_of(occupation)
            .ok_or_else(|| Error::config(format!("{occupation:?} is not in the basis")))?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); basis.dim()];
        amplitudes[k] = Complex64::new(1.0, 0.0);
        Ok(QuantumState { basis, amplitudes })
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        norm_sqr(&self.amplitudes)
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &QuantumState) -> Complex64 {
        inner(&self.amplitudes, &other.amplitudes)
    }

    /// Probability `|c_k|^2` of every basis state.
    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|c| c.norm_sqr()).collect()
    }

    /// `<n_j>` for every site.
    pub fn density_expectation(&self) -> Vec<f64> {
        densities(&self.basis, &self.amplitudes)
    }

    /// `n_j |psi>`; unnormalized.
    pub fn apply_number_op(&self, site: usize) -> Result<Vec<Complex64>> {
        apply_number_op(&self.basis, &self.amplitudes, site)
    }
}

pub fn density_expectation(state: &QuantumState) -> Vec<f64> {
    state.density_expectation()
}

/// Densities `sum_k n_j(k) |c_k|^2` of an amplitude vector (normalized or not).
pub fn densities(basis: &FockBasis, amplitudes: &[Complex64]) -> Vec<f64> {
    let l = basis.sites();
    let mut out = vec![0.0; l];
    for (k, c) in amplitudes.iter().enumerate() {
        let p = c.norm_sqr();
        if p == 0.0 {
            continue;
        }
        for (j, o) in out.iter_mut().enumerate() {
            *o += basis.occupation(k, j) as f64 * p;
        }
    }
    out
}

/// Diagonal action of `n_site` on an amplitude vector.
pub fn apply_number_op(
    basis: &FockBasis,
    amplitudes: &[Complex64],
    site: usize,
) -> Result<Vec<Complex64>> {
    basis.check_site(site)?;
    Ok(amplitudes
        .iter()
        .enumerate()
        .map(|(k, c)| c * basis.occupation(k, site) as f64)
        .collect())
}

pub fn norm_sqr(v: &[Complex64]) -> f64 {
    crate::stats::sum(v.iter().map(|c| c.norm_sqr()))
}

/// `<a|b>` (conjugate-linear in `a`).
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    let mut re = crate::stats::KahanSum::default();
    let mut im = crate::stats::KahanSum::default();
    for (x, y) in a.iter().zip(b) {
        let p = x.conj() * y;
        re.add(p.re);
        im.add(p.im);
    }
    Complex64::new(re.value(), im.value())
}

/// `<a| n_site |b>` without forming `n_site |b>`.
pub(crate) fn number_matrix_element(
    basis: &FockBasis,
    a: &[Complex64],
    site: usize,
    b: &[Complex64],
) -> Complex64 {
    let mut re = crate::stats::KahanSum::default();
    let mut im = crate::stats::KahanSum::default();
    for (k, (x, y)) in a.iter().zip(b).enumerate() {
        let n = basis.occupation(k, site);
        if n == 0 {
            continue;
        }
        let p = x.conj() * y * n as f64;
        re.add(p.re);
        im.add(p.im);
    }
    Complex64::new(re.value(), im.value())
}
