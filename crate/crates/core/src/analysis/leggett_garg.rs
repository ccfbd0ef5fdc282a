//! Three-time correlator `B = C(t1,t2) + C(t2,t3) - C(t1,t3)` from
//! three-measurement ensembles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::Estimate;
use crate::trajectory::ThreeMeasurementEnsemble;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeggettGarg {
    pub value: Estimate,
    /// `C(t1,t2)`, `C(t2,t3)`, `C(t1,t3)`.
    pub pairs: [Estimate; 3],
}

/// `c12 + c23 - c13`.
pub fn leggett_garg_combination(c12: f64, c23: f64, c13: f64) -> f64 {
    c12 + c23 - c13
}

fn check(ens: &ThreeMeasurementEnsemble, j1: usize, j2: usize) -> Result<()> {
    let l = ens.meta.lattice.sites;
    for j in [j1, j2] {
        if j >= l {
            return Err(Error::SiteOutOfRange { site: j, sites: l });
        }
    }
    if ens.records.len() < 2 {
        return Err(Error::config(
            "at least two trajectories are needed for an error estimate",
        ));
    }
    Ok(())
}

/// Trajectory average of `n_{j1}(t_a) n_{j2}(t_b)` for measurement indices `a, b` in `0..3`.
pub fn pairwise_correlation(
    ens: &ThreeMeasurementEnsemble,
    a: usize,
    b: usize,
    j1: usize,
    j2: usize,
) -> Result<Estimate> {
    check(ens, j1, j2)?;
    if a > 2 || b > 2 {
        return Err(Error::config(format!(
            "no measurement pair ({a}, {b}) in a three-measurement run"
        )));
    }
    let xs: Vec<f64> = ens
        .records
        .iter()
        .map(|r| r.outcomes[a].record[j1] * r.outcomes[b].record[j2])
        .collect();
    Ok(Estimate::from_samples(&xs))
}

/// `B_{j1,j2}` with its standard error, from per-trajectory combinations so
/// that correlations between the three terms are accounted for.
pub fn leggett_garg(ens: &ThreeMeasurementEnsemble, j1: usize, j2: usize) -> Result<LeggettGarg> {
    check(ens, j1, j2)?;
    let combined: Vec<f64> = ens
        .records
        .iter()
        .map(|r| {
            let x = |m: usize, j: usize| r.outcomes[m].record[j];
            leggett_garg_combination(
                x(0, j1) * x(1, j2),
                x(1, j1) * x(2, j2),
                x(0, j1) * x(2, j2),
            )
        })
        .collect();
    Ok(LeggettGarg {
        value: Estimate::from_samples(&combined),
        pairs: [
            pairwise_correlation(ens, 0, 1, j1, j2)?,
            pairwise_correlation(ens, 1, 2, j1, j2)?,
            pairwise_correlation(ens, 0, 2, j1, j2)?,
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_correlators_give_that_correlator() {
        for &c in &[0.0, 1.25, -3.5] {
            assert_eq!(leggett_garg_combination(c, c, c), c);
        }
    }

    #[test]
    fn degenerate_middle_time() {
        // t2 = t1: C(t1,t2) = C(t1,t1), C(t2,t3) = C(t1,t3)
        let (c11, c13) = (0.7, 0.2);
        assert_eq!(leggett_garg_combination(c11, c13, c13), c11);
    }
}
