use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndexKind {
    Linear,
    Polynomial,
}

/// Strictly increasing index maps `q_1, ..., q_l`.
///
/// `Linear` is `q_i(n) = i n`. `Polynomial` holds integer coefficients
/// `coeffs[i][k]` of `n^k`; all maps must share one degree and be eventually
/// ordered `q_1 < q_2 < ... < q_l`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexFamily {
    kind: IndexKind,
    ell: usize,
    coeffs: Vec<Vec<i64>>,
}

fn degree(c: &[i64]) -> Option<usize> {
    c.iter().rposition(|&v| v != 0)
}

impl IndexFamily {
    pub fn linear(ell: usize) -> Result<Self> {
        if ell == 0 {
            return Err(Error::invalid("index family needs at least one map"));
        }
        let coeffs = (1..=ell as i64).map(|i| vec![0, i]).collect();
        Ok(Self {
            kind: IndexKind::Linear,
            ell,
            coeffs,
        })
    }

    pub fn polynomial(coeffs: Vec<Vec<i64>>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::invalid("index family needs at least one map"));
        }
        let degs: Vec<Option<usize>> = coeffs.iter().map(|c| degree(c)).collect();
        let deg = match degs[0] {
            Some(d) if d >= 1 => d,
            _ => return Err(Error::invalid("index maps must have degree at least 1")),
        };
        if degs.iter().any(|&d| d != Some(deg)) {
            return Err(Error::invalid("mixed-degree index families are not supported"));
        }
        for (i, c) in coeffs.iter().enumerate() {
            if c[deg] <= 0 {
                return Err(Error::invalid(format!(
                    "q_{} has a non-positive leading coefficient",
                    i + 1
                )));
            }
        }
        // Eventual order: the difference q_{i+1} - q_i has a positive leading coefficient.
        for i in 1..coeffs.len() {
            let len = coeffs[i].len().max(coeffs[i - 1].len());
            let diff: Vec<i64> = (0..len)
                .map(|k| coeffs[i].get(k).copied().unwrap_or(0) - coeffs[i - 1].get(k).copied().unwrap_or(0))
                .collect();
            match degree(&diff) {
                Some(d) if diff[d] > 0 => {}
                _ => {
                    return Err(Error::invalid(format!(
                        "q_{} does not eventually exceed q_{}",
                        i + 1,
                        i
                    )))
                }
            }
        }
        let ell = coeffs.len();
        let all_linear = deg == 1
            && coeffs
                .iter()
                .enumerate()
                .all(|(i, c)| c[0] == 0 && c[1] == i as i64 + 1);
        Ok(Self {
            kind: if all_linear {
                IndexKind::Linear
            } else {
                IndexKind::Polynomial
            },
            ell,
            coeffs,
        })
    }

    pub fn kind(&self) -> IndexKind {
        self.kind
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn coeffs(&self) -> &[Vec<i64>] {
        &self.coeffs
    }

    /// `q_{i+1}(n)` for `i` in `0..ell`.
    #[inline]
    pub fn apply(&self, i: usize, n: u64) -> u64 {
        match self.kind {
            IndexKind::Linear => (i as u64 + 1) * n,
            IndexKind::Polynomial => {
                let v = self.coeffs[i]
                    .iter()
                    .rev()
                    .fold(0i128, |acc, &c| acc * n as i128 + c as i128);
                v.max(0) as u64
            }
        }
    }

    /// Largest index touched by `S_N`, i.e. `max_i q_i(N)`.
    pub fn max_index(&self, horizon: u64) -> u64 {
        (0..self.ell).map(|i| self.apply(i, horizon)).max().unwrap_or(0)
    }

    /// Check that every map sends `1..=horizon` into the positive integers,
    /// is strictly increasing there, and that the maps are ordered at the
    /// horizon.
    pub fn validate(&self, horizon: u64) -> Result<()> {
        if self.kind == IndexKind::Linear {
            return Ok(());
        }
        for i in 0..self.ell {
            let c = &self.coeffs[i];
            let v = |n: u64| {
                c.iter()
                    .rev()
                    .try_fold(0i128, |acc, &k| acc.checked_mul(n as i128)?.checked_add(k as i128))
            };
            let mut prev = v(1).ok_or_else(|| Error::invalid("index map overflows"))?;
            if prev < 1 {
                return Err(Error::invalid(format!("q_{}(1) = {prev} is not positive", i + 1)));
            }
            for n in 2..=horizon {
                let cur = v(n).ok_or_else(|| Error::invalid("index map overflows"))?;
                if cur <= prev || cur > u64::MAX as i128 {
                    return Err(Error::invalid(format!(
                        "q_{} is not strictly increasing at n = {n}",
                        i + 1
                    )));
                }
                prev = cur;
            }
        }
        for i in 1..self.ell {
            if self.apply(i, horizon) <= self.apply(i - 1, horizon) {
                return Err(Error::invalid(format!(
                    "q_{}(N) <= q_{}(N) at the horizon N = {horizon}",
                    i + 1,
                    i
                )));
            }
        }
        Ok(())
    }

    /// Smallest `m >= 1` with `q_{i+1}(m) >= target`, searching up to `limit`.
    pub(crate) fn first_at_least(&self, i: usize, target: i64, limit: u64) -> u64 {
        if target <= 1 {
            return 1;
        }
        if self.kind == IndexKind::Linear {
            let step = i as i64 + 1;
            return ((target + step - 1) / step).max(1) as u64;
        }
        let (mut lo, mut hi) = (1u64, limit + 1);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if self.apply(i, mid) as i64 >= target {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        lo
    }

    /// Largest `m >= 0` with `q_{i+1}(m) <= target`, searching up to `limit`.
    pub(crate) fn last_at_most(&self, i: usize, target: i64, limit: u64) -> u64 {
        if target < 1 {
            return 0;
        }
        if self.kind == IndexKind::Linear {
            return (target / (i as i64 + 1)) as u64;
        }
        let (mut lo, mut hi) = (0u64, limit);
        while lo < hi {
            let mid = lo + (hi - lo).div_ceil(2);
            if self.apply(i, mid) as i64 <= target {
                lo = mid;
            } else {
                hi = mid - 1;
            }
        }
        lo
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_maps_are_multiples() {
        let q = IndexFamily::linear(4).unwrap();
        for n in [1u64, 7, 1000] {
            for i in 0..4 {
                assert_eq!(q.apply(i, n), (i as u64 + 1) * n);
            }
        }
        assert_eq!(q.max_index(10), 40);
    }

    #[test]
    fn polynomial_families() {
        let q = IndexFamily::polynomial(vec![vec![0, 0, 1], vec![0, 1, 1]]).unwrap();
        assert_eq!(q.kind(), IndexKind::Polynomial);
        assert_eq!(q.apply(0, 5), 25);
        assert_eq!(q.apply(1, 5), 30);
        q.validate(100).unwrap();
        // n^2 vs n: mixed degree
        assert!(IndexFamily::polynomial(vec![vec![0, 1], vec![0, 0, 1]]).is_err());
        // not eventually ordered
        assert!(IndexFamily::polynomial(vec![vec![0, 2], vec![0, 1]]).is_err());
        // equivalent to linear
        let lin = IndexFamily::polynomial(vec![vec![0, 1], vec![0, 2]]).unwrap();
        assert_eq!(lin.kind(), IndexKind::Linear);
    }

    #[test]
    fn bracketing_matches_scan() {
        let q = IndexFamily::polynomial(vec![vec![1, 1, 1], vec![0, 3, 1]]).unwrap();
        for i in 0..2 {
            for target in -3i64..200 {
                let first = (1..=50u64).find(|&m| q.apply(i, m) as i64 >= target).unwrap_or(51);
                assert_eq!(q.first_at_least(i, target, 50), first, "i={i} target={target}");
                let last = (1..=50u64).rev().find(|&m| q.apply(i, m) as i64 <= target).unwrap_or(0);
                assert_eq!(q.last_at_most(i, target, 50), last);
            }
        }
    }
}
