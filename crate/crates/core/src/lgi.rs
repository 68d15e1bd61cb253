//! Leggett-Garg test statistics on survival-probability time series.
//!
//! For incoherent (macrorealist) dynamics started in the measured state, the
//! survival probability obeys `P(t1 + ... + tN) >= P(t1) ... P(tN)`. The
//! three-point version `K3 = P(ti) P(tj) - P(tk)` with `ti + tj = tk` must
//! then be `<= 0`; a strictly positive `K3` on a correlated triad is a
//! violation.
//!
//! The statistics are generic over any signed ordered field so they also run
//! on exact rationals.

use std::cmp::Ordering;

use num_traits::{Num, Signed};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Scalars the triad search and statistics work with.
pub trait Field: Num + Signed + PartialOrd + Copy {}

impl<T> Field for T where T: Num + Signed + PartialOrd + Copy {}

/// One measured survival probability with 1 sigma uncertainties.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DataPoint<T> {
    /// L/E in km/GeV.
    pub t: T,
    pub p: T,
    pub dt: T,
    pub dp: T,
}

impl<T: Real> DataPoint<T> {
    pub fn new(t: T, p: T, dt: T, dp: T) -> Result<Self> {
        let point = Self { t, p, dt, dp };
        point.validate()?;
        Ok(point)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("t", self.t), ("p", self.p), ("dt", self.dt), ("dp", self.dp)] {
            if !v.is_finite() {
                return Err(Error::validation(name, format!("{v} is not finite")));
            }
        }
        if !(self.t > T::zero()) {
            return Err(Error::validation("t", format!("{} must be > 0", self.t)));
        }
        if self.dt < T::zero() {
            return Err(Error::validation("dt", format!("{} must be >= 0", self.dt)));
        }
        if self.dp < T::zero() {
            return Err(Error::validation("dp", format!("{} must be >= 0", self.dp)));
        }
        if self.p < T::zero() || self.p > T::one() {
            return Err(Error::validation("p", format!("{} outside [0, 1]", self.p)));
        }
        Ok(())
    }
}

/// Indices `(i, j, k)` with `t_i + t_j ~ t_k`, `i <= j` and `k` distinct from both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triad {
    pub i: usize,
    pub j: usize,
    pub k: usize,
}

impl Triad {
    /// Orders the pair so that `i <= j`.
    pub fn new(i: usize, j: usize, k: usize) -> Self {
        Self {
            i: i.min(j),
            j: i.max(j),
            k,
        }
    }

    fn sort_key(&self) -> (usize, usize, usize) {
        (self.k, self.i, self.j)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TriadConfig<T> {
    /// Relative tolerance on `|t_i + t_j - t_k| / t_k`.
    pub epsilon: T,
    /// Allow `i == j` (a point paired with itself).
    pub allow_self_pairs: bool,
    /// Allow triads mixing points from different groups (e.g. detector halls).
    pub allow_cross_group: bool,
}

impl<T: Field> TriadConfig<T> {
    pub fn new(epsilon: T) -> Result<Self> {
        let cfg = Self {
            epsilon,
            allow_self_pairs: true,
            allow_cross_group: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > T::zero() && self.epsilon < T::one()) {
            return Err(Error::domain("epsilon must lie in (0, 1)"));
        }
        Ok(())
    }
}

impl Default for TriadConfig<f64> {
    fn default() -> Self {
        Self {
            epsilon: crate::constants::DEFAULT_EPSILON,
            allow_self_pairs: true,
            allow_cross_group: true,
        }
    }
}

/// `p_i p_j - p_k`.
pub fn k3<T: Field>(p_i: T, p_j: T, p_k: T) -> T {
    p_i * p_j - p_k
}

/// `prod_i P(t_i) - P(sum_i t_i)`; positive means the product inequality is violated.
pub fn k_n<T: Field>(survivals: &[T], total_survival: T) -> Result<T> {
    if survivals.len() < 2 {
        return Err(Error::domain("K_N needs at least two survival values"));
    }
    Ok(survivals.iter().fold(T::one(), |acc, &p| acc * p) - total_survival)
}

/// `|t_i + t_j - t_k| / t_k`.
pub fn relative_mismatch<T: Field>(t_i: T, t_j: T, t_k: T) -> T {
    ((t_i + t_j) - t_k).abs() / t_k
}

/// Left-hand side of the Wigner-type bound: `sum_i C(0, t_i) - C(0, sum t_i)`.
/// Macrorealism bounds it by `correlations.len() - 1`.
pub fn wigner_sum<T: Field>(correlations: &[T], total_correlation: T) -> T {
    correlations.iter().fold(T::zero(), |acc, &c| acc + c) - total_correlation
}

/// Every correlated triad, sorted by `(k, i, j)`.
pub fn find_correlated_triads<T: Field>(times: &[T], config: &TriadConfig<T>) -> Vec<Triad> {
    find_correlated_triads_grouped::<T, ()>(times, None, config)
}

/// As [`find_correlated_triads`], with an optional per-point group key used
/// when `config.allow_cross_group` is false.
///
/// For each `k` and `i`, the admissible `t_j` form one contiguous run of the
/// time-sorted points (the mismatch is monotone in `t_j`), so each run is
/// located by binary search.
pub fn find_correlated_triads_grouped<T: Field, G: PartialEq>(
    times: &[T],
    groups: Option<&[G]>,
    config: &TriadConfig<T>,
) -> Vec<Triad> {
    if let Some(g) = groups {
        assert_eq!(g.len(), times.len(), "one group key per point");
    }
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].partial_cmp(&times[b]).unwrap_or(Ordering::Equal));
    let sorted: Vec<T> = order.iter().map(|&o| times[o]).collect();
    let same_group = |a: usize, b: usize| match groups {
        Some(g) if !config.allow_cross_group => g[a] == g[b],
        _ => true,
    };

    let mut out = Vec::new();
    for k in 0..times.len() {
        let tk = times[k];
        for i in 0..times.len() {
            if i == k || !same_group(i, k) {
                continue;
            }
            let ti = times[i];
            let start = sorted.partition_point(|&tj| {
                (ti + tj) - tk < T::zero() && relative_mismatch(ti, tj, tk) > config.epsilon
            });
            for (pos, &tj) in sorted.iter().enumerate().skip(start) {
                if (ti + tj) - tk > T::zero() && relative_mismatch(ti, tj, tk) > config.epsilon {
                    break;
                }
                let j = order[pos];
                if j < i || j == k || (j == i && !config.allow_self_pairs) || !same_group(j, k) {
                    continue;
                }
                if relative_mismatch(ti, tj, tk) <= config.epsilon {
                    out.push(Triad { i, j, k });
                }
            }
        }
    }
    out.sort_by_key(Triad::sort_key);
    out
}

fn p_at<T: Copy>(values: &[T], idx: usize) -> Result<T> {
    values
        .get(idx)
        .copied()
        .ok_or_else(|| Error::domain(format!("triad index {idx} out of range for {} points", values.len())))
}

/// `K3` over the triad's probabilities.
pub fn triad_k3<T: Field>(triad: &Triad, probabilities: &[T]) -> Result<T> {
    Ok(k3(
        p_at(probabilities, triad.i)?,
        p_at(probabilities, triad.j)?,
        p_at(probabilities, triad.k)?,
    ))
}

/// Strict violation: `K3 > 0`.
pub fn violates<T: Field>(triad: &Triad, probabilities: &[T]) -> Result<bool> {
    Ok(triad_k3(triad, probabilities)? > T::zero())
}

/// Number of correlated triads with `K3 > 0`.
pub fn count_violations<T: Field, G: PartialEq>(
    times: &[T],
    probabilities: &[T],
    groups: Option<&[G]>,
    config: &TriadConfig<T>,
) -> usize {
    assert_eq!(times.len(), probabilities.len(), "one probability per time");
    find_correlated_triads_grouped(times, groups, config)
        .iter()
        .filter(|t| k3(probabilities[t.i], probabilities[t.j], probabilities[t.k]) > T::zero())
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Ratio;
    use proptest::prelude::*;

    fn cfg(eps: f64) -> TriadConfig<f64> {
        TriadConfig::new(eps).unwrap()
    }

    fn brute_force(times: &[f64], c: &TriadConfig<f64>) -> Vec<Triad> {
        let mut out = Vec::new();
        for k in 0..times.len() {
            for i in 0..times.len() {
                for j in i..times.len() {
                    if k == i || k == j || (i == j && !c.allow_self_pairs) {
                        continue;
                    }
                    if ((times[i] + times[j]) - times[k]).abs() / times[k] <= c.epsilon {
                        out.push(Triad { i, j, k });
                    }
                }
            }
        }
        out
    }

    #[test]
    fn k3_examples() {
        assert_eq!(k3(1.0, 1.0, 1.0), 0.0);
        assert!((k3(0.9, 0.9, 0.7) - 0.11).abs() < 1e-15);
        let r = |n, d| Ratio::new(n, d);
        assert_eq!(k3(r(9i64, 10), r(9, 10), r(7, 10)), r(11, 100));
    }

    #[test]
    fn k_n_examples() {
        assert_eq!(k_n(&[0.9, 0.8], 0.5).unwrap(), k3(0.9, 0.8, 0.5));
        assert_eq!(k_n(&[1.0, 1.0, 1.0], 1.0).unwrap(), 0.0);
        assert!(k_n::<f64>(&[], 1.0).is_err());
        assert!(k_n(&[0.5], 1.0).is_err());
    }

    #[test]
    fn triad_examples() {
        let strict = TriadConfig {
            allow_self_pairs: false,
            ..cfg(0.05)
        };
        assert_eq!(find_correlated_triads(&[1.0, 1.0, 2.0], &strict), vec![Triad { i: 0, j: 1, k: 2 }]);
        assert!(find_correlated_triads(&[1.0, 1.0, 2.2], &cfg(0.05)).is_empty());
        assert_eq!(find_correlated_triads(&[1.0, 1.05, 2.0], &strict), vec![Triad { i: 0, j: 1, k: 2 }]);
        // 1.05 + 1.05 lands on the boundary and rounds just outside it in f64.
        assert_eq!(
            find_correlated_triads(&[1.0, 1.05, 2.0], &cfg(0.05)),
            vec![Triad::new(0, 0, 2), Triad::new(0, 1, 2)]
        );
    }

    #[test]
    fn self_pairs_follow_the_flag() {
        let times = [1.0, 2.0];
        assert_eq!(find_correlated_triads(&times, &cfg(0.05)), vec![Triad { i: 0, j: 0, k: 1 }]);
        let strict = TriadConfig {
            allow_self_pairs: false,
            ..cfg(0.05)
        };
        assert!(find_correlated_triads(&times, &strict).is_empty());
    }

    #[test]
    fn cross_group_flag() {
        let times = [1.0, 1.0, 2.0, 2.0];
        let groups = ["EH1", "EH2", "EH1", "EH2"];
        let all = find_correlated_triads_grouped(&times, Some(&groups), &cfg(0.01));
        // pairs (0,0),(0,1),(1,1) against k = 2 and k = 3
        assert_eq!(all.len(), 6);
        let within = TriadConfig {
            allow_cross_group: false,
            ..cfg(0.01)
        };
        let t = find_correlated_triads_grouped(&times, Some(&groups), &within);
        assert_eq!(t, vec![Triad { i: 0, j: 0, k: 2 }, Triad { i: 1, j: 1, k: 3 }]);
    }

    #[test]
    fn exact_tolerance_boundary_with_rationals() {
        // |1 + 1 - 21/10| / (21/10) = 1/21 <= 1/21
        let r = |n, d| Ratio::new(n, d);
        let times = [r(1i64, 1), r(1, 1), r(21, 10)];
        let c = TriadConfig::new(r(1, 21)).unwrap();
        // (0,0,2), (0,1,2), (1,1,2) all sit exactly on the boundary
        assert_eq!(find_correlated_triads(&times, &c).len(), 3);
        let c = TriadConfig::new(r(1, 22)).unwrap();
        assert!(find_correlated_triads(&times, &c).is_empty());
    }

    #[test]
    fn violation_examples() {
        let t = Triad::new(0, 1, 2);
        assert!(!violates(&t, &[1.0, 1.0, 1.0]).unwrap());
        assert!(violates(&t, &[0.9, 0.9, 0.7]).unwrap());
        assert!(violates(&Triad::new(0, 1, 5), &[0.9, 0.9, 0.7]).is_err());
    }

    #[test]
    fn data_point_validation() {
        assert!(DataPoint::new(0.0, 0.5, 0.1, 0.1).is_err());
        assert!(DataPoint::new(1.0, 1.5, 0.1, 0.1).is_err());
        assert!(DataPoint::new(1.0, 0.5, -0.1, 0.1).is_err());
        assert!(DataPoint::new(1.0, f64::NAN, 0.1, 0.1).is_err());
        assert!(DataPoint::new(1.0, 0.5, 0.0, 0.0).is_ok());
    }

    #[test]
    fn wigner_sum_bound_for_products() {
        let cs = [0.3, -0.8, 0.95];
        let total: f64 = cs.iter().product();
        assert!(wigner_sum(&cs, total) <= (cs.len() - 1) as f64);
    }

    proptest! {
        #[test]
        fn matches_brute_force(times in prop::collection::vec(0.1f64..10.0, 0..25), eps in 0.001f64..0.3, self_pairs: bool) {
            let c = TriadConfig { epsilon: eps, allow_self_pairs: self_pairs, allow_cross_group: true };
            let fast = find_correlated_triads(&times, &c);
            let slow = brute_force(&times, &c);
            prop_assert_eq!(&fast, &slow);
            let m = times.len();
            prop_assert!(fast.len() <= m * m * m.saturating_sub(1) / 2 + m * m);
        }

        #[test]
        fn permutation_invariance(times in prop::collection::vec(0.1f64..10.0, 1..20), seed: u64) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut perm: Vec<usize> = (0..times.len()).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let shuffled: Vec<f64> = perm.iter().map(|&p| times[p]).collect();
            let c = cfg(0.05);
            let mut a: Vec<Triad> = find_correlated_triads(&times, &c);
            let mut b: Vec<Triad> = find_correlated_triads(&shuffled, &c)
                .into_iter()
                .map(|t| Triad::new(perm[t.i], perm[t.j], perm[t.k]))
                .collect();
            a.sort();
            b.sort();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn k3_symmetric_in_pair(a in -1.0f64..2.0, b in -1.0f64..2.0, c in -1.0f64..2.0) {
            prop_assert_eq!(k3(a, b, c), k3(b, a, c));
        }
    }
}
