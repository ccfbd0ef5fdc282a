//! Dynamical structure factor from a Van Hove grid.
//!
//! ```text
//! S(q, ω) = Σ_δj s(δj) e^{-i q δj} Σ_t w(t) G_δj(t) e^{i ω t}
//! ```
//!
//! with trapezoid weights `w` over the available time window, optionally
//! tapered in time and in displacement. The real part is the estimate; the
//! imaginary part is kept for diagnostics.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis::correlate::{displacement_count, VanHoveGrid, VanHoveSamples};
use crate::error::{Error, Result};
use crate::stats::Estimate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeWindow {
    None,
    /// One-sided Hann taper `cos²(π t / 2T)`.
    #[default]
    Hann,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialWindow {
    #[default]
    None,
    /// `cos²(π δj / 2L)` over the displacements of an `L`-site chain.
    Hann,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsfOptions {
    pub time_window: TimeWindow,
    pub spatial_window: SpatialWindow,
    /// Number of momenta `q = 2πk/n` in `(-π, π]`; defaults to `2L`.
    pub q_count: Option<usize>,
    pub omegas: Vec<f64>,
}

impl Default for DsfOptions {
    fn default() -> Self {
        DsfOptions {
            time_window: TimeWindow::Hann,
            spatial_window: SpatialWindow::None,
            q_count: None,
            omegas: omega_grid(10.0, 0.1),
        }
    }
}

/// `0, step, ..., max`.
pub fn omega_grid(max: f64, step: f64) -> Vec<f64> {
    let n = (max / step).round() as usize;
    (0..=n).map(|k| k as f64 * step).collect()
}

/// `2πk/n` for every integer `k` with `-π < 2πk/n <= π`, ascending.
pub fn q_grid(n: usize) -> Vec<f64> {
    let lo = -((n as i64 - 1) / 2);
    let hi = n as i64 / 2;
    (lo..=hi).map(|k| 2.0 * PI * k as f64 / n as f64).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DsfGrid {
    pub qs: Vec<f64>,
    pub omegas: Vec<f64>,
    /// Row-major `[q][ω]`.
    pub values: Vec<Complex64>,
    /// Standard error of the real part, when trajectory samples were available.
    pub sem: Option<Vec<f64>>,
    pub time_window: TimeWindow,
    pub spatial_window: SpatialWindow,
    pub integration: String,
}

impl DsfGrid {
    pub fn value(&self, qi: usize, wi: usize) -> Complex64 {
        self.values[qi * self.omegas.len() + wi]
    }

    pub fn real(&self, qi: usize, wi: usize) -> f64 {
        self.value(qi, wi).re
    }

    pub fn sem_at(&self, qi: usize, wi: usize) -> Option<f64> {
        self.sem.as_ref().map(|s| s[qi * self.omegas.len() + wi])
    }

    /// Index of the momentum closest to `q`.
    pub fn q_index(&self, q: f64) -> usize {
        nearest(&self.qs, q)
    }

    pub fn omega_index(&self, w: f64) -> usize {
        nearest(&self.omegas, w)
    }
}

fn nearest(xs: &[f64], x: f64) -> usize {
    xs.iter()
        .enumerate()
        .min_by(|a, b| (a.1 - x).abs().total_cmp(&(b.1 - x).abs()))
        .map(|p| p.0)
        .unwrap_or(0)
}

/// The linear map `G -> S` for one grid shape.
struct Transform {
    qs: Vec<f64>,
    omegas: Vec<f64>,
    /// `w(t) e^{iωt}` at `[ω][t]`.
    time_kernel: Vec<Complex64>,
    /// `s(δj) e^{-iqδj}` at `[q][d]`.
    space_kernel: Vec<Complex64>,
    times: usize,
    width: usize,
}

impl Transform {
    fn new(sites: usize, times: &[f64], opts: &DsfOptions) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::config(
                "the structure factor needs at least two grid times",
            ));
        }
        let dt = times[1] - times[0];
        if !(dt > 0.0)
            || times
                .windows(2)
                .any(|w| ((w[1] - w[0]) - dt).abs() > 1e-9 * dt.max(1.0))
        {
            return Err(Error::config(
                "the structure factor needs a uniform time grid",
            ));
        }
        let t0 = times[0];
        let span = times[times.len() - 1] - t0;
        let nt = times.len();
        let weights: Vec<f64> = times
            .iter()
            .enumerate()
            .map(|(k, &t)| {
                let trap = if k == 0 || k == nt - 1 { 0.5 * dt } else { dt };
                let taper = match opts.time_window {
                    TimeWindow::None => 1.0,
                    TimeWindow::Hann => (PI * (t - t0) / (2.0 * span)).cos().powi(2),
                };
                trap * taper
            })
            .collect();
        let mut time_kernel = Vec::with_capacity(opts.omegas.len() * nt);
        for &w in &opts.omegas {
            for (k, &t) in times.iter().enumerate() {
                time_kernel.push(Complex64::from_polar(weights[k], w * t));
            }
        }
        let l = sites as i64;
        let width = displacement_count(sites);
        let qs = q_grid(opts.q_count.unwrap_or(2 * sites));
        let mut space_kernel = Vec::with_capacity(qs.len() * width);
        for &q in &qs {
            for dj in -(l - 1)..l {
                let s = match opts.spatial_window {
                    SpatialWindow::None => 1.0,
                    SpatialWindow::Hann => (PI * dj as f64 / (2.0 * l as f64)).cos().powi(2),
                };
                space_kernel.push(Complex64::from_polar(s, -q * dj as f64));
            }
        }
        Ok(Transform {
            qs,
            omegas: opts.omegas.clone(),
            time_kernel,
            space_kernel,
            times: nt,
            width,
        })
    }

    /// `S` for one `[time][displacement]` array.
    fn apply(&self, g: &[f64]) -> Vec<Complex64> {
        let nw = self.omegas.len();
        // F[d][ω] = Σ_t w e^{iωt} G[t][d]
        let mut f = vec![Complex64::new(0.0, 0.0); self.width * nw];
        for wi in 0..nw {
            let kern = &self.time_kernel[wi * self.times..(wi + 1) * self.times];
            for (k, c) in kern.iter().enumerate() {
                let row = &g[k * self.width..(k + 1) * self.width];
                for (d, &x) in row.iter().enumerate() {
                    f[d * nw + wi] += c * x;
                }
            }
        }
        let mut s = vec![Complex64::new(0.0, 0.0); self.qs.len() * nw];
        for qi in 0..self.qs.len() {
            let kern = &self.space_kernel[qi * self.width..(qi + 1) * self.width];
            for (d, c) in kern.iter().enumerate() {
                for wi in 0..nw {
                    s[qi * nw + wi] += c * f[d * nw + wi];
                }
            }
        }
        s
    }
}

/// Structure factor of a Van Hove grid.
pub fn dsf(g: &VanHoveGrid, opts: &DsfOptions) -> Result<DsfGrid> {
    let tr = Transform::new(g.sites, &g.times, opts)?;
    Ok(DsfGrid {
        values: tr.apply(&g.values),
        qs: tr.qs,
        omegas: tr.omegas,
        sem: None,
        time_window: opts.time_window,
        spatial_window: opts.spatial_window,
        integration: "trapezoid".into(),
    })
}

/// Structure factor of the ensemble-mean Van Hove function, with the
/// standard error of `Re S` taken over per-trajectory transforms.
pub fn dsf_with_sem(samples: &VanHoveSamples, opts: &DsfOptions) -> Result<DsfGrid> {
    let tr = Transform::new(samples.sites, &samples.times, opts)?;
    let m = samples.trajectories;
    let cells = tr.qs.len() * tr.omegas.len();
    let mut per: Vec<Vec<Complex64>> = Vec::with_capacity(m);
    for i in 0..m {
        per.push(tr.apply(samples.trajectory(i)));
    }
    let mut values = Vec::with_capacity(cells);
    let mut sem = Vec::with_capacity(cells);
    let mut re = vec![0.0; m];
    let mut im = vec![0.0; m];
    for c in 0..cells {
        for i in 0..m {
            re[i] = per[i][c].re;
            im[i] = per[i][c].im;
        }
        let e = Estimate::from_samples(&re);
        values.push(Complex64::new(e.mean, crate::stats::mean(&im)));
        sem.push(e.sem);
    }
    Ok(DsfGrid {
        values,
        qs: tr.qs,
        omegas: tr.omegas,
        sem: Some(sem),
        time_window: opts.time_window,
        spatial_window: opts.spatial_window,
        integration: "trapezoid".into(),
    })
}
