//! Weak homodyne density measurement.
//!
//! A measurement of strength `Γ` reads every site at once. Its record is
//! `n_j = <n_j> + m_j / (2 sqrt Γ)` with `m_j` standard normal, and it changes
//! the state by
//!
//! ```text
//! psi' ∝ (1 + sqrt(Γ) Σ_j m_j δn_j - (Γ/2) Σ_j δn_j²) psi,    δn_j = n_j - <n_j>
//! ```
//!
//! which is the linearized rule, valid to first order in `Γ`. The exact mode
//! instead applies the Gaussian Kraus operator `exp(-Γ Σ_j (n_j - x_j)²)` for
//! a record `x` drawn from the full outcome distribution. Both renormalize
//! the post-measurement state.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fockspace::{densities, FockBasis, QuantumState};
use crate::streams::StreamId;

/// Above this strength the linearized update is outside its regime of validity.
pub const LINEAR_REGIME_LIMIT: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MeasurementStrength(f64);

impl MeasurementStrength {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::config(format!(
                "measurement strength must be positive, got {gamma}"
            )));
        }
        Ok(MeasurementStrength(gamma))
    }

    pub fn gamma(self) -> f64 {
        self.0
    }

    /// Standard deviation `1/(2 sqrt Γ)` of the record noise.
    pub fn noise_scale(self) -> f64 {
        0.5 / self.0.sqrt()
    }

    pub fn beyond_linear_regime(self) -> bool {
        self.0 > LINEAR_REGIME_LIMIT
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeasurementMode {
    #[default]
    Linearized,
    /// Exact Gaussian Kraus operator.
    Kraus,
}

/// Standard-normal draws for one measurement, tagged with their stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseRealization {
    pub values: Vec<f64>,
    pub stream: StreamId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementOutcome {
    /// Per-site record. Not clipped: noise can push it below zero or above the cap.
    pub record: Vec<f64>,
    /// Standard-normal variables behind the record.
    pub noise: Vec<f64>,
    /// `<n_j>` of the state just before the measurement.
    pub densities: Vec<f64>,
}

/// `sites` i.i.d. standard normal draws from `stream`.
pub fn sample_noise(stream: StreamId, sites: usize) -> NoiseRealization {
    let mut rng = stream.rng();
    NoiseRealization {
        values: (0..sites).map(|_| rng.sample(StandardNormal)).collect(),
        stream,
    }
}

/// Linearized measurement with a given noise realization.
pub fn weak_measure(
    state: &QuantumState,
    strength: MeasurementStrength,
    noise: &NoiseRealization,
) -> Result<(MeasurementOutcome, QuantumState)> {
    check_normalized(state)?;
    let basis = state.basis();
    if noise.values.len() != basis.sites() {
        return Err(Error::config(
            "noise realization does not match the number of sites",
        ));
    }
    let dens = state.density_expectation();
    let scale = strength.noise_scale();
    let record = dens
        .iter()
        .zip(&noise.values)
        .map(|(n, m)| n + m * scale)
        .collect();
    let post = linearized_update(state, strength, &dens, &noise.values)?;
    Ok((
        MeasurementOutcome {
            record,
            noise: noise.values.clone(),
            densities: dens,
        },
        post,
    ))
}

/// Linearized update for a given record `x`, i.e. with `m_j = 2 sqrt(Γ) (x_j - <n_j>)`.
pub fn weak_update_from_record(
    state: &QuantumState,
    strength: MeasurementStrength,
    record: &[f64],
) -> Result<QuantumState> {
    check_normalized(state)?;
    let dens = state.density_expectation();
    let m: Vec<f64> = record
        .iter()
        .zip(&dens)
        .map(|(x, n)| (x - n) / strength.noise_scale())
        .collect();
    linearized_update(state, strength, &dens, &m)
}

fn linearized_update(
    state: &QuantumState,
    strength: MeasurementStrength,
    dens: &[f64],
    m: &[f64],
) -> Result<QuantumState> {
    let basis = state.basis();
    let g = strength.gamma();
    let sg = g.sqrt();
    let amps: Vec<_> = state
        .amplitudes()
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let occ = basis.state(k);
            let mut lin = 0.0;
            let mut quad = 0.0;
            for j in 0..occ.len() {
                let d = occ[j] as f64 - dens[j];
                lin += m[j] * d;
                quad += d * d;
            }
            c * (1.0 + sg * lin - 0.5 * g * quad)
        })
        .collect();
    QuantumState::from_unnormalized(basis.clone(), amps)
}

/// Exact Gaussian-Kraus measurement.
///
/// The record density is `Σ_k |c_k|² Π_j N(x_j; n_j(k), 1/(4Γ))`, sampled by
/// drawing the basis state `k` first and then independent Gaussian offsets.
pub fn exact_kraus_measure(
    state: &QuantumState,
    strength: MeasurementStrength,
    stream: StreamId,
) -> Result<(MeasurementOutcome, QuantumState)> {
    check_normalized(state)?;
    let basis = state.basis();
    let mut rng = stream.rng();
    let probs = state.probabilities();
    let k = sample_index(&probs, rng.random::<f64>());
    let noise: Vec<f64> = (0..basis.sites())
        .map(|_| rng.sample(StandardNormal))
        .collect();
    let record = kraus_record(basis, k, &noise, strength);
    let post = kraus_update(state, strength, &record)?;
    Ok((
        MeasurementOutcome {
            record,
            noise,
            densities: state.density_expectation(),
        },
        post,
    ))
}

pub(crate) fn kraus_record(
    basis: &FockBasis,
    k: usize,
    noise: &[f64],
    strength: MeasurementStrength,
) -> Vec<f64> {
    let scale = strength.noise_scale();
    basis
        .state(k)
        .iter()
        .zip(noise)
        .map(|(&n, g)| n as f64 + g * scale)
        .collect()
}

/// Apply `exp(-Γ Σ_j (n_j - x_j)²)` and renormalize. Weights are formed in log
/// space so large `Γ` does not underflow.
pub fn kraus_update(
    state: &QuantumState,
    strength: MeasurementStrength,
    record: &[f64],
) -> Result<QuantumState> {
    let basis = state.basis();
    if record.len() != basis.sites() {
        return Err(Error::config("record does not match the number of sites"));
    }
    let g = strength.gamma();
    let exponents: Vec<f64> = (0..basis.dim())
        .map(|k| {
            -g * basis
                .state(k)
                .iter()
                .zip(record)
                .map(|(&n, x)| (n as f64 - x).powi(2))
                .sum::<f64>()
        })
        .collect();
    let top = state
        .amplitudes()
        .iter()
        .zip(&exponents)
        .filter(|(c, _)| c.norm_sqr() > 0.0)
        .map(|(_, &e)| e)
        .fold(f64::NEG_INFINITY, f64::max);
    let amps = state
        .amplitudes()
        .iter()
        .zip(&exponents)
        .map(|(c, &e)| c * (e - top).exp())
        .collect();
    QuantumState::from_unnormalized(basis.clone(), amps)
}

/// Index `k` with cumulative probability first exceeding `u` in `[0, 1)`.
pub(crate) fn sample_index(probs: &[f64], u: f64) -> usize {
    let total: f64 = probs.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last = k;
        }
        acc += p;
        if acc > target && p > 0.0 {
            return k;
        }
    }
    last
}

pub(crate) fn check_normalized(state: &QuantumState) -> Result<()> {
    let n = state.norm_sqr();
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalized { norm_sqr: n });
    }
    Ok(())
}

/// One measurement in the given mode.
pub fn measure(
    mode: MeasurementMode,
    state: &QuantumState,
    strength: MeasurementStrength,
    stream: StreamId,
) -> Result<(MeasurementOutcome, QuantumState)> {
    match mode {
        MeasurementMode::Linearized => {
            let noise = sample_noise(stream, state.basis().sites());
            weak_measure(state, strength, &noise)
        }
        MeasurementMode::Kraus => exact_kraus_measure(state, strength, stream),
    }
}

/// A terminal readout (no post-state) of an amplitude vector that need not be
/// wrapped in a [`QuantumState`].
pub(crate) fn terminal_record(
    basis: &FockBasis,
    amplitudes: &[num_complex::Complex64],
    mode: MeasurementMode,
    strength: MeasurementStrength,
    stream: StreamId,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let dens = densities(basis, amplitudes);
    let mut rng = stream.rng();
    match mode {
        MeasurementMode::Linearized => {
            let noise: Vec<f64> = (0..basis.sites())
                .map(|_| rng.sample(StandardNormal))
                .collect();
            let s = strength.noise_scale();
            let record = dens.iter().zip(&noise).map(|(n, m)| n + m * s).collect();
            (record, noise, dens)
        }
        MeasurementMode::Kraus => {
            let probs: Vec<f64> = amplitudes.iter().map(|c| c.norm_sqr()).collect();
            let k = sample_index(&probs, rng.random::<f64>());
            let noise: Vec<f64> = (0..basis.sites())
                .map(|_| rng.sample(StandardNormal))
                .collect();
            (kraus_record(basis, k, &noise, strength), noise, dens)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fockspace::{build_basis, LatticeSpec};
    use crate::hamiltonian::{build_hamiltonian, ground_state, BoseHubbardParams};
    use crate::stats;
    use std::sync::Arc;

    fn gs(l: usize) -> QuantumState {
        let b = Arc::new(build_basis(LatticeSpec::unit_filling(l).unwrap()).unwrap());
        let h = build_hamiltonian(b, BoseHubbardParams::new(2.0)).unwrap();
        ground_state(&h).unwrap().state
    }

    fn dist(a: &QuantumState, b: &QuantumState) -> f64 {
        a.amplitudes()
            .iter()
            .zip(b.amplitudes())
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    fn g(x: f64) -> MeasurementStrength {
        MeasurementStrength::new(x).unwrap()
    }

    #[test]
    fn noise_is_deterministic_per_stream() {
        let id = StreamId::new(3, 1, 0);
        assert_eq!(sample_noise(id, 5), sample_noise(id, 5));
        assert_ne!(
            sample_noise(id, 5).values,
            sample_noise(StreamId::new(3, 2, 0), 5).values
        );
    }

    #[test]
    fn noise_mean_and_covariance() {
        let n = 100_000;
        let draws: Vec<Vec<f64>> = (0..n)
            .map(|i| sample_noise(StreamId::new(11, i, 0), 4).values)
            .collect();
        let all: Vec<f64> = draws.iter().flatten().copied().collect();
        assert!(stats::mean(&all).abs() < 3.0 / (all.len() as f64).sqrt());
        for a in 0..4 {
            for b in 0..4 {
                let c = stats::mean(&draws.iter().map(|d| d[a] * d[b]).collect::<Vec<_>>());
                let expected = if a == b { 1.0 } else { 0.0 };
                assert!((c - expected).abs() < 0.02, "cov[{a}][{b}] = {c}");
            }
        }
    }

    #[test]
    fn gaussian_fourth_moment() {
        let n = 1_000_000;
        let v = sample_noise(StreamId::new(5, 0, 0), n).values;
        let m4 = stats::mean(&v.iter().map(|x| x.powi(4)).collect::<Vec<_>>());
        assert!((m4 - 3.0).abs() / 3.0 < 0.02, "m4 = {m4}");
    }

    #[test]
    fn fock_state_is_unchanged() {
        let b = Arc::new(build_basis(LatticeSpec::new(3, 3, 3).unwrap()).unwrap());
        let s = QuantumState::fock(b, &[2, 0, 1]).unwrap();
        let noise = sample_noise(StreamId::new(1, 0, 0), 3);
        let (out, post) = weak_measure(&s, g(0.1), &noise).unwrap();
        assert!(dist(&s, &post) < 1e-15);
        for j in 0..3 {
            let want = [2.0, 0.0, 1.0][j] + noise.values[j] / (2.0 * 0.1f64.sqrt());
            assert_eq!(out.record[j], want);
        }
        let (_, kpost) = exact_kraus_measure(&s, g(0.1), StreamId::new(1, 0, 0)).unwrap();
        assert!(dist(&s, &kpost) < 1e-15);
    }

    #[test]
    fn zero_noise_gives_densities_and_order_gamma_change() {
        let s = gs(4);
        let zero = NoiseRealization {
            values: vec![0.0; 4],
            stream: StreamId::new(0, 0, 0),
        };
        let mut prev = f64::INFINITY;
        for &gamma in &[0.04, 0.02, 0.01] {
            let (out, post) = weak_measure(&s, g(gamma), &zero).unwrap();
            assert_eq!(out.record, s.density_expectation());
            let d = dist(&s, &post);
            assert!(d < prev);
            assert!(d / gamma < 2.0);
            prev = d;
        }
    }

    #[test]
    fn post_state_normalized_and_number_conserving() {
        let s = gs(4);
        let (_, post) = measure(
            MeasurementMode::Linearized,
            &s,
            g(0.3),
            StreamId::new(2, 0, 0),
        )
        .unwrap();
        assert!((post.norm_sqr() - 1.0).abs() < 1e-12);
        assert!((post.density_expectation().iter().sum::<f64>() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn record_variance_is_one_over_four_gamma() {
        let s = gs(4);
        let gamma = 0.2;
        let dev: Vec<f64> = (0..10_000)
            .map(|i| {
                let (o, _) =
                    weak_measure(&s, g(gamma), &sample_noise(StreamId::new(9, i, 0), 4)).unwrap();
                o.record[1] - o.densities[1]
            })
            .collect();
        let v = stats::variance(&dev);
        assert!((v * 4.0 * gamma - 1.0).abs() < 0.05, "var = {v}");
    }

    #[test]
    fn noise_sign_flip_is_first_order() {
        let s = gs(4);
        let gamma = 0.01;
        let noise = sample_noise(StreamId::new(4, 0, 0), 4);
        let flipped = NoiseRealization {
            values: noise.values.iter().map(|x| -x).collect(),
            stream: noise.stream,
        };
        let zero = NoiseRealization {
            values: vec![0.0; 4],
            stream: noise.stream,
        };
        let (_, p) = weak_measure(&s, g(gamma), &noise).unwrap();
        let (_, n) = weak_measure(&s, g(gamma), &flipped).unwrap();
        let (_, z) = weak_measure(&s, g(gamma), &zero).unwrap();
        let r: f64 = p
            .amplitudes()
            .iter()
            .zip(n.amplitudes())
            .zip(z.amplitudes())
            .map(|((a, b), c)| (a + b - c * 2.0).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(r < 5.0 * gamma, "{r}");
    }

    #[test]
    fn outcome_means_equal_densities_in_both_modes() {
        let s = gs(4);
        let gamma = 0.1;
        let dens = s.density_expectation();
        for mode in [MeasurementMode::Linearized, MeasurementMode::Kraus] {
            let recs: Vec<Vec<f64>> = (0..4000)
                .map(|i| {
                    measure(mode, &s, g(gamma), StreamId::new(21, i, 0))
                        .unwrap()
                        .0
                        .record
                })
                .collect();
            for j in 0..4 {
                let e =
                    stats::Estimate::from_samples(&recs.iter().map(|r| r[j]).collect::<Vec<_>>());
                assert!(
                    e.within(dens[j], 3.5),
                    "{mode:?} site {j}: {e:?} vs {}",
                    dens[j]
                );
            }
        }
    }

    #[test]
    fn kraus_strong_limit_projects() {
        let s = gs(4);
        let (out, post) = exact_kraus_measure(&s, g(50.0), StreamId::new(8, 0, 0)).unwrap();
        let p = post.probabilities();
        let top = p.iter().cloned().fold(0.0, f64::max);
        assert!(top > 0.999, "{top}");
        let k = p.iter().position(|&x| x == top).unwrap();
        for (j, &x) in out.record.iter().enumerate() {
            assert!((x - post.basis().occupation(k, j) as f64).abs() < 0.5);
        }
    }

    #[test]
    fn kraus_and_linearized_agree_to_first_order() {
        let s = gs(4);
        let record = vec![1.3, 0.6, 0.9, 1.2];
        let mut prev = f64::INFINITY;
        for &gamma in &[0.04, 0.02, 0.01] {
            let a = kraus_update(&s, g(gamma), &record).unwrap();
            let b = weak_update_from_record(&s, g(gamma), &record).unwrap();
            let d = dist(&a, &b);
            assert!(d < prev * 0.75, "{d} vs {prev}");
            prev = d;
        }
        assert!(prev < 0.05);
    }

    #[test]
    fn invalid_strength_rejected() {
        assert!(MeasurementStrength::new(0.0).is_err());
        assert!(MeasurementStrength::new(-1.0).is_err());
        assert!(MeasurementStrength::new(f64::NAN).is_err());
        assert!(g(0.6).beyond_linear_regime());
        assert!(!g(0.5).beyond_linear_regime());
    }

    #[test]
    fn site_count_mismatch_rejected() {
        let s = gs(4);
        let noise = sample_noise(StreamId::new(1, 0, 0), 3);
        assert!(weak_measure(&s, g(0.1), &noise).is_err());
        assert!(kraus_update(&s, g(0.1), &[0.0; 5]).is_err());
    }
}
