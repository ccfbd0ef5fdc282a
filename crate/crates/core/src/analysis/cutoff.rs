//! Finite imaging resolution as a spatial low-pass filter.
//!
//! A record over `L` sites is Fourier transformed, every component with
//! `|k| > k_max` (radians per site, `k` folded into `(-π, π]`) is zeroed, and
//! the result is transformed back. The mask is symmetric in `k`, so real
//! records stay real.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::trajectory::{Ensemble, Readout};

const EDGE: f64 = 1e-12;

fn check_kmax(k_max: f64) -> Result<()> {
    if !(k_max > 0.0 && k_max <= PI + EDGE) {
        return Err(Error::config(format!(
            "k_max must lie in (0, π], got {k_max}"
        )));
    }
    Ok(())
}

/// Wavenumber of DFT bin `n` folded into `(-π, π]`.
pub fn mode_wavenumber(sites: usize, n: usize) -> f64 {
    if 2 * n <= sites {
        2.0 * PI * n as f64 / sites as f64
    } else {
        2.0 * PI * (n as f64 - sites as f64) / sites as f64
    }
}

/// Which DFT bins survive the cutoff.
pub fn kept_modes(sites: usize, k_max: f64) -> Vec<bool> {
    (0..sites)
        .map(|n| mode_wavenumber(sites, n).abs() <= k_max + EDGE)
        .collect()
}

/// True when the cutoff removes nothing on a chain of `sites` sites.
pub fn is_identity(sites: usize, k_max: f64) -> bool {
    kept_modes(sites, k_max).iter().all(|&k| k)
}

/// A planned filter for one chain length.
pub struct LowPass {
    keep: Vec<bool>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl LowPass {
    pub fn new(sites: usize, k_max: f64) -> Result<Self> {
        check_kmax(k_max)?;
        if sites == 0 {
            return Err(Error::config("empty chain"));
        }
        let mut planner = FftPlanner::new();
        Ok(LowPass {
            keep: kept_modes(sites, k_max),
            forward: planner.plan_fft_forward(sites),
            inverse: planner.plan_fft_inverse(sites),
        })
    }

    pub fn is_identity(&self) -> bool {
        self.keep.iter().all(|&k| k)
    }

    pub fn apply(&self, values: &[f64]) -> Vec<f64> {
        let l = self.keep.len();
        assert_eq!(values.len(), l, "record length does not match the filter");
        if self.is_identity() {
            return values.to_vec();
        }
        let mut buf: Vec<Complex64> = values.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.forward.process(&mut buf);
        for (c, &keep) in buf.iter_mut().zip(&self.keep) {
            if !keep {
                *c = Complex64::new(0.0, 0.0);
            }
        }
        self.inverse.process(&mut buf);
        buf.iter().map(|c| c.re / l as f64).collect()
    }
}

/// Low-pass filter one record.
pub fn fourier_cutoff(values: &[f64], k_max: f64) -> Result<Vec<f64>> {
    Ok(LowPass::new(values.len(), k_max)?.apply(values))
}

/// The filter as a real `L x L` matrix `P`, so that filtered records are `P n`.
pub fn cutoff_matrix(sites: usize, k_max: f64) -> Result<DMatrix<f64>> {
    let f = LowPass::new(sites, k_max)?;
    let mut p = DMatrix::zeros(sites, sites);
    let mut e = vec![0.0; sites];
    for c in 0..sites {
        e[c] = 1.0;
        for (r, v) in f.apply(&e).into_iter().enumerate() {
            p[(r, c)] = v;
        }
        e[c] = 0.0;
    }
    Ok(p)
}

/// Filter every record of an ensemble (first records, second records and
/// conditional densities). Noise values are kept as drawn.
///
/// Ensembles remember the cutoff already applied; a cutoff that would remove
/// nothing further returns the ensemble unchanged, which makes the operation
/// exactly idempotent.
pub fn apply_cutoff(ens: &Ensemble, k_max: f64) -> Result<Ensemble> {
    let filter = LowPass::new(ens.sites(), k_max)?;
    let already = ens.meta.cutoff.is_some_and(|c| k_max >= c - EDGE);
    if filter.is_identity() || already {
        return Ok(ens.clone());
    }
    let mut out = ens.clone();
    for r in &mut out.records {
        for f in &mut r.firsts {
            f.record = filter.apply(&f.record);
        }
        for Readout {
            density, outcome, ..
        } in &mut r.readouts
        {
            *density = filter.apply(density);
            *outcome = filter.apply(outcome);
        }
    }
    out.meta.cutoff = Some(k_max);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nyquist_cutoff_is_identity() {
        let x = vec![0.3, -1.2, 2.5, 0.0, 1.1, 0.7];
        assert_eq!(fourier_cutoff(&x, PI).unwrap(), x);
        assert_eq!(fourier_cutoff(&x[..5], PI).unwrap(), x[..5].to_vec());
    }

    #[test]
    fn constant_record_unchanged() {
        let x = vec![1.5; 8];
        for &k in &[0.1, 0.5, 2.0] {
            for v in fourier_cutoff(&x, k).unwrap() {
                assert!((v - 1.5).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn impulse_response_matches_direct_transform() {
        let l = 32;
        let k_max = 0.5;
        let mut x = vec![0.0; l];
        x[5] = 1.0;
        let y = fourier_cutoff(&x, k_max).unwrap();
        for (r, &v) in y.iter().enumerate() {
            let mut direct = 0.0;
            for n in 0..l {
                let k = if n <= l / 2 {
                    n as f64
                } else {
                    n as f64 - l as f64
                } * 2.0
                    * PI
                    / l as f64;
                if k.abs() <= k_max {
                    direct += (k * (r as f64 - 5.0)).cos();
                }
            }
            assert!((v - direct / l as f64).abs() < 1e-13, "row {r}");
        }
    }

    #[test]
    fn filter_is_a_projection() {
        let x: Vec<f64> = (0..10)
            .map(|i| ((i * 7 % 5) as f64).sin() + 0.1 * i as f64)
            .collect();
        let once = fourier_cutoff(&x, 1.0).unwrap();
        let twice = fourier_cutoff(&once, 1.0).unwrap();
        for (a, b) in once.iter().zip(&twice) {
            assert!((a - b).abs() < 1e-12);
        }
        let p = cutoff_matrix(10, 1.0).unwrap();
        assert!((&p * &p - &p).abs().max() < 1e-12);
        assert!((&p - p.transpose()).abs().max() < 1e-14);
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(fourier_cutoff(&[1.0, 2.0], 0.0).is_err());
        assert!(fourier_cutoff(&[1.0, 2.0], 3.2).is_err());
    }

    #[test]
    fn even_chain_drops_nyquist_below_pi() {
        assert_eq!(kept_modes(4, 2.0), vec![true, true, false, true]);
        assert!(is_identity(4, PI));
    }
}
