//! Correlations of measurement records and the Van Hove function.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{self, Estimate};
use crate::trajectory::{time_index, Ensemble, TrajectoryRecord};

/// Raw products `<n n>` or the connected part `<δn δn>`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrelatorKind {
    #[default]
    Raw,
    Connected,
}

/// Which second-time quantity enters the correlator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadoutKind {
    /// The second record (noisy when second-measurement noise is included).
    #[default]
    Outcome,
    /// The conditional density `<n_j(t)>'`.
    Density,
}

/// What is subtracted from each record before multiplying.
#[derive(Debug, Clone, PartialEq)]
pub enum Centering {
    None,
    /// Per-site (and per-time) ensemble means.
    EnsembleMean,
    /// Fixed values: first-time and second-time centers per site.
    Reference {
        first: Vec<f64>,
        second: Vec<f64>,
    },
}

fn second(r: &TrajectoryRecord, k: usize, readout: ReadoutKind) -> &[f64] {
    match readout {
        ReadoutKind::Outcome => &r.readouts[k].outcome,
        ReadoutKind::Density => &r.readouts[k].density,
    }
}

fn check_ensemble(ens: &Ensemble) -> Result<()> {
    if ens.len() < 2 {
        return Err(Error::config(
            "at least two trajectories are needed for an error estimate",
        ));
    }
    Ok(())
}

fn check_site(ens: &Ensemble, j: usize) -> Result<()> {
    if j >= ens.sites() {
        return Err(Error::SiteOutOfRange {
            site: j,
            sites: ens.sites(),
        });
    }
    Ok(())
}

/// Per-site ensemble means of the first record and of the readout at grid index `k`.
pub fn ensemble_means(ens: &Ensemble, k: usize, readout: ReadoutKind) -> (Vec<f64>, Vec<f64>) {
    let l = ens.sites();
    let first = (0..l)
        .map(|j| stats::sum(ens.records.iter().map(|r| r.first_at(k).record[j])) / ens.len() as f64)
        .collect();
    let later = (0..l)
        .map(|j| {
            stats::sum(ens.records.iter().map(|r| second(r, k, readout)[j])) / ens.len() as f64
        })
        .collect();
    (first, later)
}

fn centers(
    ens: &Ensemble,
    k: usize,
    readout: ReadoutKind,
    centering: &Centering,
) -> (Vec<f64>, Vec<f64>) {
    let l = ens.sites();
    match centering {
        Centering::None => (vec![0.0; l], vec![0.0; l]),
        Centering::EnsembleMean => ensemble_means(ens, k, readout),
        Centering::Reference { first, second } => (first.clone(), second.clone()),
    }
}

/// Per-trajectory products `(n_{j,0} - a_j)(n_{j',t} - b_{j'})` at grid index `k`.
pub fn product_samples(
    ens: &Ensemble,
    j: usize,
    jp: usize,
    k: usize,
    readout: ReadoutKind,
    centering: &Centering,
) -> Result<Vec<f64>> {
    check_site(ens, j)?;
    check_site(ens, jp)?;
    if k >= ens.times().len() {
        return Err(Error::config(format!("grid index {k} out of range")));
    }
    let (a, b) = centers(ens, k, readout, centering);
    if a.len() != ens.sites() || b.len() != ens.sites() {
        return Err(Error::config(
            "centering vectors do not match the number of sites",
        ));
    }
    Ok(ens
        .records
        .iter()
        .map(|r| (r.first_at(k).record[j] - a[j]) * (second(r, k, readout)[jp] - b[jp]))
        .collect())
}

/// Trajectory average of `n_{j,0} n_{j',t}` with its standard error.
pub fn cross_correlate(ens: &Ensemble, j: usize, jp: usize, t: f64) -> Result<Estimate> {
    check_ensemble(ens)?;
    let k = time_index(ens.times(), t)?;
    Ok(Estimate::from_samples(&product_samples(
        ens,
        j,
        jp,
        k,
        ReadoutKind::Outcome,
        &Centering::None,
    )?))
}

/// Like [`cross_correlate`] with each record centered on its ensemble mean,
/// estimating `Re<δn_j(0) δn_j'(t)>`.
pub fn noise_cross_correlate(ens: &Ensemble, j: usize, jp: usize, t: f64) -> Result<Estimate> {
    check_ensemble(ens)?;
    let k = time_index(ens.times(), t)?;
    Ok(Estimate::from_samples(&product_samples(
        ens,
        j,
        jp,
        k,
        ReadoutKind::Outcome,
        &Centering::EnsembleMean,
    )?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct VanHoveOptions {
    pub kind: CorrelatorKind,
    pub readout: ReadoutKind,
}

/// Number of displacements `δj ∈ [-(L-1), L-1]`.
pub fn displacement_count(sites: usize) -> usize {
    2 * sites - 1
}

/// Site pairs `(j, j + δj)` inside an open chain of `sites` sites.
pub fn pair_count(sites: usize, dj: i64) -> usize {
    sites.saturating_sub(dj.unsigned_abs() as usize)
}

/// `G_δj(t)` on a `(t, δj)` grid, averaged over site pairs inside the chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VanHoveGrid {
    pub sites: usize,
    pub times: Vec<f64>,
    pub kind: CorrelatorKind,
    /// Row-major `[time][displacement]`, displacement index `δj + L - 1`.
    pub values: Vec<f64>,
    pub sem: Vec<f64>,
    /// Contributing site pairs per displacement.
    pub pairs: Vec<usize>,
    /// Trajectories behind the estimate; 0 for exact values.
    pub trajectories: usize,
}

impl VanHoveGrid {
    pub fn displacements(&self) -> impl Iterator<Item = i64> {
        let l = self.sites as i64;
        -(l - 1)..l
    }

    pub fn width(&self) -> usize {
        displacement_count(self.sites)
    }

    fn cell(&self, dj: i64, k: usize) -> usize {
        k * self.width() + (dj + self.sites as i64 - 1) as usize
    }

    pub fn value(&self, dj: i64, k: usize) -> f64 {
        self.values[self.cell(dj, k)]
    }

    pub fn sem_at(&self, dj: i64, k: usize) -> f64 {
        self.sem[self.cell(dj, k)]
    }

    pub fn pairs_at(&self, dj: i64) -> usize {
        self.pairs[(dj + self.sites as i64 - 1) as usize]
    }

    pub(crate) fn from_values(
        sites: usize,
        times: Vec<f64>,
        kind: CorrelatorKind,
        values: Vec<f64>,
        sem: Vec<f64>,
        trajectories: usize,
    ) -> Self {
        let l = sites as i64;
        VanHoveGrid {
            sites,
            kind,
            pairs: (-(l - 1)..l).map(|dj| pair_count(sites, dj)).collect(),
            times,
            values,
            sem,
            trajectories,
        }
    }
}

/// Van Hove values of every trajectory, kept so that linear transforms of
/// `G` can carry their own standard errors.
#[derive(Debug, Clone, PartialEq)]
pub struct VanHoveSamples {
    pub sites: usize,
    pub times: Vec<f64>,
    pub kind: CorrelatorKind,
    /// `[trajectory][time][displacement]`, row-major.
    pub samples: Vec<f64>,
    pub trajectories: usize,
}

impl VanHoveSamples {
    pub fn cell_count(&self) -> usize {
        self.times.len() * displacement_count(self.sites)
    }

    pub fn trajectory(&self, i: usize) -> &[f64] {
        let n = self.cell_count();
        &self.samples[i * n..(i + 1) * n]
    }

    pub fn summarize(&self) -> VanHoveGrid {
        let n = self.cell_count();
        let mut values = Vec::with_capacity(n);
        let mut sem = Vec::with_capacity(n);
        let mut column = vec![0.0; self.trajectories];
        for c in 0..n {
            for (i, x) in column.iter_mut().enumerate() {
                *x = self.samples[i * n + c];
            }
            let e = Estimate::from_samples(&column);
            values.push(e.mean);
            sem.push(e.sem);
        }
        VanHoveGrid::from_values(
            self.sites,
            self.times.clone(),
            self.kind,
            values,
            sem,
            self.trajectories,
        )
    }
}

/// Per-trajectory Van Hove values.
pub fn van_hove_samples(ens: &Ensemble, opts: VanHoveOptions) -> Result<VanHoveSamples> {
    check_ensemble(ens)?;
    let l = ens.sites();
    let nt = ens.times().len();
    let width = displacement_count(l);
    let centers: Vec<(Vec<f64>, Vec<f64>)> = (0..nt)
        .map(|k| match opts.kind {
            CorrelatorKind::Raw => (vec![0.0; l], vec![0.0; l]),
            CorrelatorKind::Connected => ensemble_means(ens, k, opts.readout),
        })
        .collect();

    let mut samples = Vec::with_capacity(ens.len() * nt * width);
    let mut a = vec![0.0; l];
    let mut b = vec![0.0; l];
    for r in &ens.records {
        for (k, (ca, cb)) in centers.iter().enumerate() {
            let first = &r.first_at(k).record;
            let later = second(r, k, opts.readout);
            for j in 0..l {
                a[j] = first[j] - ca[j];
                b[j] = later[j] - cb[j];
            }
            for d in 0..width {
                let dj = d as i64 - (l as i64 - 1);
                let lo = (-dj).max(0) as usize;
                let hi = (l as i64 - dj.max(0)) as usize;
                let mut acc = 0.0;
                for j in lo..hi {
                    acc += a[j] * b[(j as i64 + dj) as usize];
                }
                samples.push(acc / (hi - lo) as f64);
            }
        }
    }
    Ok(VanHoveSamples {
        sites: l,
        times: ens.times().to_vec(),
        kind: opts.kind,
        samples,
        trajectories: ens.len(),
    })
}

/// Ensemble estimate of `G_δj(t)` with per-cell standard errors.
pub fn van_hove(ens: &Ensemble, opts: VanHoveOptions) -> Result<VanHoveGrid> {
    Ok(van_hove_samples(ens, opts)?.summarize())
}
