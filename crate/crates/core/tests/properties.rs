use std::f64::consts::PI;
use std::sync::{Arc, OnceLock};

use num_complex::Complex64;
use proptest::prelude::*;
use weakcorr::analysis::{apply_cutoff, fourier_cutoff, product_samples, Centering, ReadoutKind};
use weakcorr::evolution::{PropagationMethod, Propagator, PropagatorOptions};
use weakcorr::fockspace::{self, build_basis, FockBasis, LatticeSpec, QuantumState};
use weakcorr::hamiltonian::{build_hamiltonian, BoseHubbardParams};
use weakcorr::io::{read_ensemble, write_ensemble};
use weakcorr::measurement::{measure, MeasurementMode, MeasurementStrength};
use weakcorr::stats;
use weakcorr::streams::StreamId;
use weakcorr::trajectory::{run_ensemble, InitialState, ProtocolConfig, SecondNoise};

struct System {
    basis: Arc<FockBasis>,
    dense: Propagator,
    krylov: Propagator,
}

fn system() -> &'static System {
    static SYSTEM: OnceLock<System> = OnceLock::new();
    SYSTEM.get_or_init(|| {
        let basis = Arc::new(build_basis(LatticeSpec::new(5, 5, 3).unwrap()).unwrap());
        let h = Arc::new(build_hamiltonian(basis.clone(), BoseHubbardParams::new(2.0)).unwrap());
        let dense = Propagator::new(h.clone());
        let krylov = Propagator::with_options(
            h,
            &PropagatorOptions {
                method: PropagationMethod::Krylov,
                ..PropagatorOptions::default()
            },
        );
        System {
            basis,
            dense,
            krylov,
        }
    })
}

fn state() -> impl Strategy<Value = QuantumState> {
    let basis = system().basis.clone();
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), basis.dim())
        .prop_filter("nonzero", |v| {
            v.iter().any(|(a, b)| a.abs() + b.abs() > 1e-3)
        })
        .prop_map(move |v| {
            let amps = v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect();
            QuantumState::from_unnormalized(basis.clone(), amps).unwrap()
        })
}

fn distance(a: &QuantumState, b: &QuantumState) -> f64 {
    let diff: Vec<Complex64> = a
        .amplitudes()
        .iter()
        .zip(b.amplitudes())
        .map(|(x, y)| x - y)
        .collect();
    fockspace::norm_sqr(&diff).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn densities_sum_to_particle_number(psi in state()) {
        let n: f64 = psi.density_expectation().iter().sum();
        prop_assert!((n - 5.0).abs() < 1e-12);
        for (j, d) in psi.density_expectation().iter().enumerate() {
            let nv = psi.apply_number_op(j).unwrap();
            prop_assert!((fockspace::inner(psi.amplitudes(), &nv).re - d).abs() < 1e-12);
        }
    }

    #[test]
    fn number_operators_commute(psi in state(), a in 0usize..5, b in 0usize..5) {
        let basis = psi.basis();
        let ab = fockspace::apply_number_op(basis, &fockspace::apply_number_op(basis, psi.amplitudes(), b).unwrap(), a).unwrap();
        let ba = fockspace::apply_number_op(basis, &fockspace::apply_number_op(basis, psi.amplitudes(), a).unwrap(), b).unwrap();
        prop_assert_eq!(ab, ba);
    }

    #[test]
    fn evolution_composes_and_is_unitary(phi in state(), psi in state(), a in 0.0f64..3.0, b in 0.0f64..3.0) {
        for prop in [&system().dense, &system().krylov] {
            let two = prop.evolve(&prop.evolve(&psi, a).unwrap(), b).unwrap();
            let one = prop.evolve(&psi, a + b).unwrap();
            prop_assert!(distance(&two, &one) <= 1e-8);

            let before = phi.inner(&psi);
            let after = prop.evolve(&phi, a).unwrap().inner(&prop.evolve(&psi, a).unwrap());
            prop_assert!((before - after).norm() <= 1e-9);
            prop_assert!((one.norm_sqr() - 1.0).abs() <= 1e-10);
        }
    }

    #[test]
    fn evolution_conserves_energy_and_number(psi in state(), t in 0.0f64..3.0) {
        let prop = &system().krylov;
        let h = prop.hamiltonian();
        let later = prop.evolve(&psi, t).unwrap();
        let e0 = h.energy(psi.amplitudes());
        prop_assert!((h.energy(later.amplitudes()) - e0).abs() <= 1e-9 * e0.abs().max(1.0));
        let n: f64 = later.density_expectation().iter().sum();
        prop_assert!((n - 5.0).abs() <= 1e-10);
    }

    #[test]
    fn backends_agree(psi in state(), t in 0.0f64..3.0) {
        let d = system().dense.evolve(&psi, t).unwrap();
        let k = system().krylov.evolve(&psi, t).unwrap();
        prop_assert!(distance(&d, &k) <= 1e-8);
    }

    #[test]
    fn measurement_keeps_norm_and_number(psi in state(), gamma in 0.001f64..0.5, seed in any::<u64>(), kraus in any::<bool>()) {
        let mode = if kraus { MeasurementMode::Kraus } else { MeasurementMode::Linearized };
        let (outcome, post) = measure(mode, &psi, MeasurementStrength::new(gamma).unwrap(), StreamId::new(seed, 0, 0)).unwrap();
        prop_assert!((post.norm_sqr() - 1.0).abs() <= 1e-12);
        let n: f64 = post.density_expectation().iter().sum();
        prop_assert!((n - 5.0).abs() <= 1e-10);
        prop_assert_eq!(outcome.record.len(), 5);
    }

    #[test]
    fn linearized_record_is_density_plus_scaled_noise(psi in state(), gamma in 0.001f64..0.5, seed in any::<u64>()) {
        let s = MeasurementStrength::new(gamma).unwrap();
        let (o, _) = measure(MeasurementMode::Linearized, &psi, s, StreamId::new(seed, 3, 1)).unwrap();
        for j in 0..5 {
            prop_assert_eq!(o.record[j], o.densities[j] + o.noise[j] * s.noise_scale());
        }
    }

    #[test]
    fn cutoff_is_a_projection(values in prop::collection::vec(-5.0f64..5.0, 1..40), k_max in 0.01f64..=PI) {
        let once = fourier_cutoff(&values, k_max).unwrap();
        let twice = fourier_cutoff(&once, k_max).unwrap();
        for (a, b) in once.iter().zip(&twice) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        prop_assert_eq!(fourier_cutoff(&values, PI).unwrap(), values);
    }

    #[test]
    fn cutoff_keeps_constant_records(c in -5.0f64..5.0, l in 1usize..40, k_max in 0.01f64..=PI) {
        let out = fourier_cutoff(&vec![c; l], k_max).unwrap();
        for v in out {
            prop_assert!((v - c).abs() <= 1e-12);
        }
    }

    #[test]
    fn cutoff_is_linear(a in prop::collection::vec(-5.0f64..5.0, 12), b in prop::collection::vec(-5.0f64..5.0, 12), s in -3.0f64..3.0) {
        let combined: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + s * y).collect();
        let fa = fourier_cutoff(&a, 0.8).unwrap();
        let fb = fourier_cutoff(&b, 0.8).unwrap();
        let fc = fourier_cutoff(&combined, 0.8).unwrap();
        for i in 0..12 {
            prop_assert!((fc[i] - fa[i] - s * fb[i]).abs() <= 1e-12);
        }
    }
}

fn small_ensemble(
    seed: u64,
    noise: SecondNoise,
    mode: MeasurementMode,
) -> weakcorr::trajectory::Ensemble {
    let s = system();
    let psi = QuantumState::fock(s.basis.clone(), &[1, 2, 0, 1, 1]).unwrap();
    let psi = s.dense.evolve(&psi, 0.3).unwrap();
    let mut cfg = ProtocolConfig::new(0.1, vec![0.0, 0.2, 0.4], 6, seed);
    cfg.second_noise = noise;
    cfg.mode = mode;
    run_ensemble(&InitialState::from(psi), &s.dense, &cfg).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ensemble_files_roundtrip(seed in any::<u64>(), include in any::<bool>(), kraus in any::<bool>()) {
        let noise = if include { SecondNoise::Include } else { SecondNoise::Omit };
        let mode = if kraus { MeasurementMode::Kraus } else { MeasurementMode::Linearized };
        let ens = small_ensemble(seed, noise, mode);
        let mut buf = Vec::new();
        write_ensemble(&ens, &mut buf).unwrap();
        prop_assert_eq!(read_ensemble(buf.as_slice()).unwrap(), ens);
    }

    #[test]
    fn same_seed_same_file(seed in any::<u64>()) {
        let bytes = |e: &weakcorr::trajectory::Ensemble| {
            let mut buf = Vec::new();
            write_ensemble(e, &mut buf).unwrap();
            buf
        };
        let a = small_ensemble(seed, SecondNoise::Include, MeasurementMode::Linearized);
        let b = small_ensemble(seed, SecondNoise::Include, MeasurementMode::Linearized);
        prop_assert_eq!(bytes(&a), bytes(&b));
    }

    #[test]
    fn ensemble_cutoff_is_bit_exact_idempotent(seed in any::<u64>(), k_max in 0.05f64..=PI) {
        let ens = small_ensemble(seed, SecondNoise::Include, MeasurementMode::Linearized);
        let once = apply_cutoff(&ens, k_max).unwrap();
        let twice = apply_cutoff(&once, k_max).unwrap();
        prop_assert_eq!(&once, &twice);
        let looser = apply_cutoff(&once, (k_max + 0.3).min(PI)).unwrap();
        prop_assert_eq!(&once, &looser);
    }

    #[test]
    fn centered_products_are_raw_minus_means(seed in any::<u64>(), j in 0usize..5, jp in 0usize..5, k in 0usize..3) {
        let ens = small_ensemble(seed, SecondNoise::Include, MeasurementMode::Linearized);
        let raw = stats::mean(&product_samples(&ens, j, jp, k, ReadoutKind::Outcome, &Centering::None).unwrap());
        let centered = stats::mean(&product_samples(&ens, j, jp, k, ReadoutKind::Outcome, &Centering::EnsembleMean).unwrap());
        let m0 = stats::mean(&ens.records.iter().map(|r| r.first().record[j]).collect::<Vec<_>>());
        let mt = stats::mean(&ens.records.iter().map(|r| r.readouts[k].outcome[jp]).collect::<Vec<_>>());
        prop_assert!((centered - (raw - m0 * mt)).abs() <= 1e-12);
    }
}
