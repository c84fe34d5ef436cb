use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};
use crate::seed;

/// A set of control (or parameter) points in the unit hypercube.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Design {
    pub points: Vec<Vec<f64>>,
    pub seed: u64,
}

impl Design {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points.first().map_or(0, Vec::len)
    }
}

/// Plain Latin hypercube: each axis is cut into `n` equal strata and every
/// stratum holds exactly one point, placed uniformly inside it.
pub fn lhs_design(n: usize, dim: usize, seed: u64) -> Result<Design> {
    if n == 0 {
        return Err(CalibError::InvalidArgument("LHS needs n >= 1".into()));
    }
    let mut rng = seed::rng(seed);
    let mut points = vec![vec![0.0; dim]; n];
    let mut perm: Vec<usize> = (0..n).collect();
    for d in 0..dim {
        perm.shuffle(&mut rng);
        for (i, p) in points.iter_mut().enumerate() {
            let u: f64 = rng.random();
            p[d] = (perm[i] as f64 + u) / n as f64;
        }
    }
    Ok(Design { points, seed })
}

/// Maps a unit-cube design onto the box `[lo, hi]`.
pub fn scale_to_box(design: &Design, lo: &[f64], hi: &[f64]) -> Vec<Vec<f64>> {
    design
        .points
        .iter()
        .map(|p| {
            p.iter()
                .zip(lo.iter().zip(hi))
                .map(|(u, (l, h))| l + u * (h - l))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn is_stratified(design: &Design) -> bool {
        let n = design.len();
        (0..design.dim()).all(|d| {
            let mut seen = vec![false; n];
            design.points.iter().all(|p| {
                let k = ((p[d] * n as f64).floor() as usize).min(n - 1);
                !std::mem::replace(&mut seen[k], true)
            })
        })
    }

    #[test]
    fn single_point_lies_in_cube() {
        let d = lhs_design(1, 4, 3).unwrap();
        assert_eq!(d.len(), 1);
        assert!(d.points[0].iter().all(|v| (0.0..1.0).contains(v)));
    }

    #[test]
    fn ten_points_one_per_stratum() {
        let d = lhs_design(10, 3, 11).unwrap();
        assert!(is_stratified(&d));
    }

    #[test]
    fn reproducible_and_rejects_empty() {
        assert_eq!(lhs_design(7, 2, 5).unwrap(), lhs_design(7, 2, 5).unwrap());
        assert_ne!(lhs_design(7, 2, 5).unwrap(), lhs_design(7, 2, 6).unwrap());
        assert!(lhs_design(0, 2, 5).is_err());
    }

    proptest! {
        #[test]
        fn stratification_holds(n in 1usize..2000, dim in 1usize..5, seed in any::<u64>()) {
            prop_assert!(is_stratified(&lhs_design(n, dim, seed).unwrap()));
        }
    }

    #[test]
    fn stratification_at_ten_thousand() {
        assert!(is_stratified(&lhs_design(10_000, 3, 42).unwrap()));
    }
}
