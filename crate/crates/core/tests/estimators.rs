//! Trajectory estimates against the exact correlators they converge to.

use std::sync::{Arc, OnceLock};

use weakcorr::analysis::{
    cross_correlate, dsf, dsf_with_sem, noise_cross_correlate, oracle_correlations, van_hove,
    van_hove_samples, CorrelatorKind, DsfOptions, OracleCorrelations, VanHoveOptions,
};
use weakcorr::evolution::Propagator;
use weakcorr::fockspace::{build_basis, LatticeSpec, QuantumState};
use weakcorr::hamiltonian::{build_hamiltonian, ground_state, BoseHubbardParams};
use weakcorr::measurement::MeasurementMode;
use weakcorr::stats::{self, Estimate};
use weakcorr::trajectory::{
    run_ensemble, uniform_grid, Ensemble, InitialState, ProtocolConfig, SecondNoise,
};

struct Fixture {
    propagator: Propagator,
    psi0: QuantumState,
    times: Vec<f64>,
    exact: OracleCorrelations,
    /// Γ = 0.05, M = 2000, second noise omitted.
    quiet: Ensemble,
    /// Same, second noise included.
    noisy: Ensemble,
}

fn chain(spec: LatticeSpec, u: f64) -> (Propagator, QuantumState) {
    let basis = Arc::new(build_basis(spec).unwrap());
    let h = Arc::new(build_hamiltonian(basis, BoseHubbardParams::new(u)).unwrap());
    let psi0 = ground_state(&h).unwrap().state;
    (Propagator::new(h), psi0)
}

fn fixture() -> &'static Fixture {
    static FIXTURE: OnceLock<Fixture> = OnceLock::new();
    FIXTURE.get_or_init(|| {
        let (propagator, psi0) = chain(LatticeSpec::new(6, 6, 3).unwrap(), 2.0);
        let times = uniform_grid(3.0, 0.25).unwrap();
        let exact = oracle_correlations(&propagator, &psi0, &times).unwrap();
        let cfg = ProtocolConfig::new(0.05, times.clone(), 2000, 31);
        let quiet = run_ensemble(&InitialState::from(psi0.clone()), &propagator, &cfg).unwrap();
        let cfg = ProtocolConfig {
            second_noise: SecondNoise::Include,
            master_seed: 32,
            ..cfg
        };
        let noisy = run_ensemble(&InitialState::from(psi0.clone()), &propagator, &cfg).unwrap();
        Fixture {
            propagator,
            psi0,
            times,
            exact,
            quiet,
            noisy,
        }
    })
}

fn fraction_within(hits: impl Iterator<Item = bool>) -> f64 {
    let (mut inside, mut total) = (0usize, 0usize);
    for h in hits {
        total += 1;
        inside += h as usize;
    }
    inside as f64 / total as f64
}

fn site_time_cells(f: &Fixture) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
    (0..6).flat_map(move |j| (0..6).flat_map(move |jp| (0..f.times.len()).map(move |k| (j, jp, k))))
}

#[test]
fn raw_cross_correlations_match_oracle() {
    let f = fixture();
    let frac = fraction_within(site_time_cells(f).map(|(j, jp, k)| {
        let e = cross_correlate(&f.quiet, j, jp, f.times[k]).unwrap();
        e.within(f.exact.real_part(j, jp, k, CorrelatorKind::Raw), 3.0)
    }));
    assert!(frac >= 0.99, "{frac}");
}

#[test]
fn connected_cross_correlations_match_oracle() {
    let f = fixture();
    let frac = fraction_within(site_time_cells(f).map(|(j, jp, k)| {
        let e = noise_cross_correlate(&f.noisy, j, jp, f.times[k]).unwrap();
        e.within(f.exact.real_part(j, jp, k, CorrelatorKind::Connected), 3.0)
    }));
    assert!(frac >= 0.99, "{frac}");
}

// Error bars come from the run with second-measurement noise; without it the
// tighter bars resolve the first-order bias checked below.
#[test]
fn trajectory_dsf_matches_oracle_dsf_within_propagated_error() {
    let f = fixture();
    let opts = DsfOptions::default();
    let estimate = dsf_with_sem(
        &van_hove_samples(&f.noisy, VanHoveOptions::default()).unwrap(),
        &opts,
    )
    .unwrap();
    let exact = dsf(&f.exact.van_hove(CorrelatorKind::Raw), &opts).unwrap();
    let sem = estimate.sem.as_ref().unwrap();
    let frac = fraction_within(
        estimate
            .values
            .iter()
            .zip(&exact.values)
            .zip(sem)
            .map(|((a, b), s)| (a.re - b.re).abs() <= 3.0 * s),
    );
    assert!(frac >= 0.99, "{frac}");
}

#[test]
fn estimate_is_reflection_symmetric() {
    let f = fixture();
    let samples = van_hove_samples(&f.quiet, VanHoveOptions::default()).unwrap();
    let g = samples.summarize();
    let width = g.width();
    let frac = fraction_within(
        (1..6i64)
            .flat_map(|dj| (0..f.times.len()).map(move |k| (dj, k)))
            .map(|(dj, k)| {
                let col = |d: i64| k * 11 + (d + 5) as usize;
                let diffs: Vec<f64> = (0..samples.trajectories)
                    .map(|i| samples.trajectory(i)[col(dj)] - samples.trajectory(i)[col(-dj)])
                    .collect();
                Estimate::from_samples(&diffs).within(0.0, 3.0)
            }),
    );
    assert_eq!(width, 11);
    assert!(frac >= 0.99, "{frac}");
}

#[test]
fn sem_shrinks_as_inverse_square_root_of_trajectories() {
    let f = fixture();
    let full = van_hove(&f.quiet, VanHoveOptions::default()).unwrap();
    let half = van_hove(&f.quiet.truncated(1000), VanHoveOptions::default()).unwrap();
    let ratios: Vec<f64> = full
        .displacements()
        .flat_map(|dj| (0..f.times.len()).map(move |k| (dj, k)))
        .map(|(dj, k)| half.sem_at(dj, k) / full.sem_at(dj, k))
        .collect();
    let mean = stats::mean(&ratios);
    assert!((mean / 2f64.sqrt() - 1.0).abs() < 0.1, "{mean}");
}

#[test]
fn kraus_same_time_correlation_is_unbiased() {
    // exact for the Gaussian-Kraus measurement: E[x_j <n_j>'] = <n_j²>
    let f = fixture();
    let mut cfg = ProtocolConfig::new(0.05, vec![0.0], 4000, 8);
    cfg.mode = MeasurementMode::Kraus;
    let ens = run_ensemble(&InitialState::from(f.psi0.clone()), &f.propagator, &cfg).unwrap();
    let g = van_hove(&ens, VanHoveOptions::default()).unwrap();
    let target = f.exact.van_hove(CorrelatorKind::Raw).value(0, 0);
    assert!((g.value(0, 0) - target).abs() <= 3.0 * g.sem_at(0, 0));
}

#[test]
fn later_outcomes_do_not_see_earlier_second_noise() {
    let f = fixture();
    let mut cfg = ProtocolConfig::new(0.1, vec![0.0, 0.5, 1.0], 3000, 9);
    cfg.second_noise = SecondNoise::Include;
    let ens = run_ensemble(&InitialState::from(f.psi0.clone()), &f.propagator, &cfg).unwrap();
    let mut hits = Vec::new();
    for (early, late) in [(0usize, 1usize), (0, 2), (1, 2)] {
        for j in 0..6 {
            for jp in 0..6 {
                let xs: Vec<f64> = ens
                    .records
                    .iter()
                    .map(|r| {
                        r.readouts[early].noise.as_ref().unwrap()[j] * r.readouts[late].outcome[jp]
                    })
                    .collect();
                hits.push(Estimate::from_samples(&xs).within(0.0, 3.0));
            }
        }
    }
    let frac = fraction_within(hits.into_iter());
    assert!(frac >= 0.97, "{frac}");
}

#[test]
fn correlators_converge_in_site_cap() {
    let times = uniform_grid(3.0, 0.25).unwrap();
    let grid = |cap: usize| {
        let (p, psi) = chain(LatticeSpec::new(6, 6, cap).unwrap(), 2.0);
        oracle_correlations(&p, &psi, &times)
            .unwrap()
            .van_hove(CorrelatorKind::Connected)
    };
    let (g3, g4, g6) = (grid(3), grid(4), grid(6));
    let diff = |a: &weakcorr::analysis::VanHoveGrid, b: &weakcorr::analysis::VanHoveGrid| {
        a.values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    };
    let d3 = diff(&g3, &g6);
    let d4 = diff(&g4, &g6);
    // truncation error shrinks with the cap and is below the M = 2000 error bars at cap 3
    assert!(d4 < d3, "{d4} vs {d3}");
    let sem = stats::rms(
        van_hove(&fixture().quiet, VanHoveOptions::default())
            .unwrap()
            .sem,
    );
    assert!(d3 < sem, "cap-3 truncation {d3} vs typical sem {sem}");
}

fn same_site_same_time_deviation(gamma: f64, mode: MeasurementMode) -> f64 {
    let f = fixture();
    let mut cfg = ProtocolConfig::new(gamma, vec![0.0], 4000, 40);
    cfg.mode = mode;
    let ens = run_ensemble(&InitialState::from(f.psi0.clone()), &f.propagator, &cfg).unwrap();
    stats::mean(
        &(0..6)
            .map(|j| {
                noise_cross_correlate(&ens, j, j, 0.0).unwrap().mean
                    - f.exact.real_part(j, j, 0, CorrelatorKind::Connected)
            })
            .collect::<Vec<_>>(),
    )
}

#[test]
fn linearized_bias_is_first_order_in_gamma() {
    let strong = same_site_same_time_deviation(0.05, MeasurementMode::Linearized);
    let weak = same_site_same_time_deviation(0.025, MeasurementMode::Linearized);
    let kraus = same_site_same_time_deviation(0.05, MeasurementMode::Kraus);
    assert!(strong < 0.0 && weak < 0.0, "{strong} {weak}");
    let ratio = strong / weak;
    assert!((1.5..2.5).contains(&ratio), "{ratio}");
    assert!(kraus.abs() < 0.25 * strong.abs(), "{kraus} vs {strong}");
}
