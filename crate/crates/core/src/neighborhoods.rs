//! Dependency neighborhoods of nonconventional summands.
//!
//! `A_n = {1 <= m <= N : min_{i,j} |q_i(n) - q_j(m)| <= l}` is a union of at
//! most `l^2` integer intervals and is stored that way. Annuli
//! `{m : d(A_n, A_m) = k}` are derived from a per-`n` distance profile, which
//! is computed with a distance transform of `Gamma_n = {q_i(a) : a in A_n}`
//! and range-minimum queries over the intervals of each `A_m`.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::index_family::{IndexFamily, IndexKind};

/// `d_l(a, b) = min_{1 <= i, j <= l} |i a - j b|`.
pub fn d_ell(a: u64, b: u64, ell: usize) -> u64 {
    let mut best = u64::MAX;
    for i in 1..=ell as u64 {
        for j in 1..=ell as u64 {
            best = best.min((i * a).abs_diff(j * b));
        }
    }
    best
}

/// `min_{i,j} |q_i(a) - q_j(b)|` for a general family.
pub fn d_family(a: u64, b: u64, family: &IndexFamily) -> u64 {
    let ell = family.ell();
    let mut best = u64::MAX;
    for i in 0..ell {
        let qa = family.apply(i, a);
        for j in 0..ell {
            best = best.min(qa.abs_diff(family.apply(j, b)));
        }
    }
    best
}

/// `inf {d_l(a, b) : a in A, b in B}` for explicit sets.
pub fn set_distance(a: &[u64], b: &[u64], ell: usize) -> Result<u64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(a.iter()
        .flat_map(|&x| b.iter().map(move |&y| d_ell(x, y, ell)))
        .min()
        .unwrap())
}

/// Sorted, disjoint, non-adjacent closed integer intervals.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IntervalSet {
    intervals: Vec<(u64, u64)>,
}

impl IntervalSet {
    pub fn from_intervals(mut raw: Vec<(u64, u64)>) -> Self {
        raw.retain(|&(lo, hi)| lo <= hi);
        raw.sort_unstable();
        let mut intervals: Vec<(u64, u64)> = Vec::with_capacity(raw.len());
        for (lo, hi) in raw {
            match intervals.last_mut() {
                Some(last) if lo <= last.1 + 1 => last.1 = last.1.max(hi),
                _ => intervals.push((lo, hi)),
            }
        }
        Self { intervals }
    }

    pub fn intervals(&self) -> &[(u64, u64)] {
        &self.intervals
    }

    pub fn len(&self) -> u64 {
        self.intervals.iter().map(|(lo, hi)| hi - lo + 1).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.intervals.is_empty()
    }

    pub fn contains(&self, m: u64) -> bool {
        let k = self.intervals.partition_point(|&(_, hi)| hi < m);
        k < self.intervals.len() && self.intervals[k].0 <= m
    }

    pub fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        self.intervals.iter().flat_map(|&(lo, hi)| lo..=hi)
    }

    pub fn to_vec(&self) -> Vec<u64> {
        self.iter().collect()
    }
}

/// `A_n` for horizon `N` and block length `l`.
pub fn neighborhood(n: u64, horizon: u64, l: u64, family: &IndexFamily) -> IntervalSet {
    let ell = family.ell();
    let mut raw = Vec::with_capacity(ell * ell);
    for i in 0..ell {
        let qn = family.apply(i, n) as i64;
        for j in 0..ell {
            let lo = family.first_at_least(j, qn - l as i64, horizon).max(1);
            let hi = family.last_at_most(j, qn + l as i64, horizon).min(horizon);
            raw.push((lo, hi));
        }
    }
    IntervalSet::from_intervals(raw)
}

/// `min |q_i(a) - q_j(b)|` over `a` in `[a0, a1]`, `b` in `[b0, b1]`.
fn interval_pair_distance(
    family: &IndexFamily,
    i: usize,
    (a0, a1): (u64, u64),
    j: usize,
    (b0, b1): (u64, u64),
    limit: u64,
) -> u64 {
    let (lo_a, hi_a) = (family.apply(i, a0), family.apply(i, a1));
    let (lo_b, hi_b) = (family.apply(j, b0), family.apply(j, b1));
    if hi_a < lo_b {
        return lo_b - hi_a;
    }
    if hi_b < lo_a {
        return lo_a - hi_b;
    }
    // Overlapping ranges: scan the shorter interval and bracket the nearest
    // image in the other.
    let (scan, si, other, oi) = if a1 - a0 <= b1 - b0 {
        ((a0, a1), i, (b0, b1), j)
    } else {
        ((b0, b1), j, (a0, a1), i)
    };
    let mut best = u64::MAX;
    for x in scan.0..=scan.1 {
        let t = family.apply(si, x);
        let below = family.last_at_most(oi, t as i64, limit).clamp(other.0, other.1);
        let above = (below + 1).min(other.1);
        best = best
            .min(t.abs_diff(family.apply(oi, below)))
            .min(t.abs_diff(family.apply(oi, above)));
        if best == 0 {
            break;
        }
    }
    best
}

/// `d(A, B) = min_{a in A, b in B} min_{i,j} |q_i(a) - q_j(b)|` on interval sets.
pub fn interval_set_distance(a: &IntervalSet, b: &IntervalSet, family: &IndexFamily, limit: u64) -> Result<u64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyInput);
    }
    let ell = family.ell();
    let mut best = u64::MAX;
    for &ia in a.intervals() {
        for &ib in b.intervals() {
            for i in 0..ell {
                for j in 0..ell {
                    best = best.min(interval_pair_distance(family, i, ia, j, ib, limit));
                    if best == 0 {
                        return Ok(0);
                    }
                }
            }
        }
    }
    Ok(best)
}

/// Sparse table for range minima over `u32` values.
struct RangeMin {
    levels: Vec<Vec<u32>>,
}

impl RangeMin {
    fn new() -> Self {
        Self { levels: Vec::new() }
    }

    /// Tables for query spans up to `max_span`.
    fn rebuild(&mut self, base: &[u32], max_span: usize) {
        let n = base.len();
        let depth = (usize::BITS - max_span.clamp(1, n.max(1)).leading_zeros()) as usize;
        self.levels.resize_with(depth, Vec::new);
        self.levels[0].clear();
        self.levels[0].extend_from_slice(base);
        for k in 1..depth {
            let half = 1 << (k - 1);
            let len = n + 1 - (1 << k);
            let (prev, cur) = self.levels.split_at_mut(k);
            let prev = &prev[k - 1];
            let cur = &mut cur[0];
            cur.clear();
            cur.extend(prev[..len].iter().zip(&prev[half..half + len]).map(|(a, b)| *a.min(b)));
        }
    }

    /// Minimum over `[lo, hi]`, zero-based inclusive.
    #[inline]
    fn query(&self, lo: usize, hi: usize) -> u32 {
        let span = hi - lo + 1;
        let k = (usize::BITS - 1 - span.leading_zeros()) as usize;
        self.levels[k][lo].min(self.levels[k][hi + 1 - (1 << k)])
    }
}

/// Per-`n` workspace for distance profiles.
pub struct ProfileScratch {
    dist: Vec<u32>,
    per_b: Vec<u32>,
    gamma: Vec<u64>,
    rmq: RangeMin,
}

impl Default for ProfileScratch {
    fn default() -> Self {
        Self {
            dist: Vec::new(),
            per_b: Vec::new(),
            gamma: Vec::new(),
            rmq: RangeMin::new(),
        }
    }
}

/// Precomputed neighborhoods for `(N, l, family)`.
#[derive(Debug, Clone)]
pub struct NeighborhoodIndex {
    horizon: u64,
    l: u64,
    family: IndexFamily,
    neighborhoods: Vec<IntervalSet>,
    /// Longest interval over all neighborhoods.
    max_span: usize,
}

impl NeighborhoodIndex {
    pub fn build(horizon: u64, l: u64, family: &IndexFamily) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::invalid("horizon must be at least 1"));
        }
        family.validate(horizon)?;
        let neighborhoods: Vec<IntervalSet> = (1..=horizon).map(|n| neighborhood(n, horizon, l, family)).collect();
        let max_span = neighborhoods
            .iter()
            .flat_map(|s| s.intervals().iter().map(|&(lo, hi)| (hi - lo + 1) as usize))
            .max()
            .unwrap_or(1);
        Ok(Self {
            horizon,
            l,
            family: family.clone(),
            neighborhoods,
            max_span,
        })
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn block_length(&self) -> u64 {
        self.l
    }

    pub fn ell(&self) -> usize {
        self.family.ell()
    }

    pub fn family(&self) -> &IndexFamily {
        &self.family
    }

    /// `K_1 = 3 l^2`.
    pub fn k1(&self) -> u64 {
        3 * (self.ell() as u64).pow(2)
    }

    /// `K_2 = 4 l^6 (l^2 + 2)`.
    pub fn k2(&self) -> u64 {
        let e = self.ell() as u64;
        4 * e.pow(6) * (e * e + 2)
    }

    pub fn neighborhood(&self, n: u64) -> &IntervalSet {
        &self.neighborhoods[(n - 1) as usize]
    }

    pub fn contains(&self, n: u64, m: u64) -> bool {
        self.neighborhood(n).contains(m)
    }

    /// `sum_{m in A_n} x_m` from inclusive prefix sums with `prefix[0] = 0`.
    #[inline]
    pub fn sum_over(&self, n: u64, prefix: &[f64]) -> f64 {
        self.neighborhood(n)
            .intervals()
            .iter()
            .map(|&(lo, hi)| prefix[hi as usize] - prefix[(lo - 1) as usize])
            .sum()
    }

    /// `d(A_n, A_m)` for every `m = 1..=N` (entry `m - 1`).
    pub fn distance_profile(&self, n: u64, scratch: &mut ProfileScratch) -> Vec<u32> {
        let horizon = self.horizon as usize;
        let ell = self.ell();
        let gamma = &mut scratch.gamma;
        gamma.clear();
        for a in self.neighborhood(n).iter() {
            for i in 0..ell {
                gamma.push(self.family.apply(i, a));
            }
        }
        gamma.sort_unstable();
        gamma.dedup();

        // per_b[b - 1] = min_j dist(q_j(b), Gamma_n)
        scratch.per_b.clear();
        scratch.per_b.resize(horizon, u32::MAX);
        if self.family.kind() == IndexKind::Linear {
            let top = self.family.max_index(self.horizon) as usize;
            let dist = &mut scratch.dist;
            dist.clear();
            dist.resize(top + 1, u32::MAX);
            for &g in gamma.iter() {
                dist[g as usize] = 0;
            }
            for x in 1..=top {
                dist[x] = dist[x].min(dist[x - 1].saturating_add(1));
            }
            for x in (0..top).rev() {
                dist[x] = dist[x].min(dist[x + 1].saturating_add(1));
            }
            for j in 1..=ell {
                for b in 1..=horizon {
                    let v = dist[j * b];
                    let slot = &mut scratch.per_b[b - 1];
                    if v < *slot {
                        *slot = v;
                    }
                }
            }
        } else {
            for b in 1..=horizon as u64 {
                let mut best = u64::MAX;
                for j in 0..ell {
                    let t = self.family.apply(j, b);
                    let k = gamma.partition_point(|&g| g < t);
                    if k < gamma.len() {
                        best = best.min(gamma[k] - t);
                    }
                    if k > 0 {
                        best = best.min(t - gamma[k - 1]);
                    }
                }
                scratch.per_b[(b - 1) as usize] = best.min(u32::MAX as u64) as u32;
            }
        }
        scratch.rmq.rebuild(&scratch.per_b, self.max_span);
        (1..=self.horizon)
            .map(|m| {
                self.neighborhood(m)
                    .intervals()
                    .iter()
                    .map(|&(lo, hi)| scratch.rmq.query(lo as usize - 1, hi as usize - 1))
                    .min()
                    .unwrap_or(u32::MAX)
            })
            .collect()
    }

    /// `{m : d(A_n, A_m) = k}`, materialized on demand.
    pub fn annulus(&self, n: u64, k: u64) -> Vec<u64> {
        if k > u32::MAX as u64 {
            return Vec::new();
        }
        let profile = self.distance_profile(n, &mut ProfileScratch::default());
        profile
            .iter()
            .enumerate()
            .filter(|(_, &d)| d as u64 == k)
            .map(|(m, _)| m as u64 + 1)
            .collect()
    }

    /// Sizes of all nonempty annuli around `n`.
    pub fn annulus_sizes(&self, n: u64, scratch: &mut ProfileScratch) -> BTreeMap<u64, u64> {
        let profile = self.distance_profile(n, scratch);
        let top = profile.iter().copied().max().unwrap_or(0) as usize;
        let mut dense = vec![0u64; top + 1];
        for d in profile {
            dense[d as usize] += 1;
        }
        dense
            .into_iter()
            .enumerate()
            .filter(|&(_, c)| c > 0)
            .map(|(d, c)| (d as u64, c))
            .collect()
    }

    /// CSV table `n,interval_start,interval_end`, one row per interval.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "n,interval_start,interval_end")?;
        for (k, set) in self.neighborhoods.iter().enumerate() {
            for &(lo, hi) in set.intervals() {
                writeln!(w, "{},{},{}", k + 1, lo, hi)?;
            }
        }
        Ok(())
    }
}

/// Free-standing form of [`NeighborhoodIndex::annulus`].
pub fn annulus(n: u64, k: u64, horizon: u64, l: u64, family: &IndexFamily) -> Result<Vec<u64>> {
    Ok(NeighborhoodIndex::build(horizon, l, family)?.annulus(n, k))
}

/// `Gamma(A) = {q_i(a) : a in A, 1 <= i <= l}`, sorted.
pub fn gamma_set(set: impl IntoIterator<Item = u64>, family: &IndexFamily) -> Vec<u64> {
    let mut out: Vec<u64> = set
        .into_iter()
        .flat_map(|a| (0..family.ell()).map(move |i| family.apply(i, a)))
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Block {
    pub label: usize,
    pub indices: Vec<u64>,
}

/// Ordered blocks `B_1 < ... < B_L`, each inside one labeled set, with
/// `max(B_{t-1}) + gap < min(B_t)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockDecomposition {
    pub blocks: Vec<Block>,
    pub gap: u64,
}

impl BlockDecomposition {
    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Windows `[min B_t, max B_t]` in order.
    pub fn windows(&self) -> Vec<(u64, u64)> {
        self.blocks
            .iter()
            .map(|b| (b.indices[0], *b.indices.last().unwrap()))
            .collect()
    }

    /// Block indices grouped by label, labels ascending.
    pub fn groups(&self) -> Vec<(usize, Vec<usize>)> {
        let mut map: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for (t, b) in self.blocks.iter().enumerate() {
            map.entry(b.label).or_default().push(t);
        }
        map.into_iter().collect()
    }

    /// Disjoint, ordered and gap-separated.
    pub fn is_valid(&self) -> bool {
        self.blocks
            .iter()
            .all(|b| !b.indices.is_empty() && b.indices.windows(2).all(|w| w[0] < w[1]))
            && self
                .blocks
                .windows(2)
                .all(|w| *w[0].indices.last().unwrap() + self.gap < w[1].indices[0])
    }
}

/// Greedy left-to-right clustering of labeled index sets: consecutive points
/// farther apart than `gap` start a new block.
pub fn decompose_blocks(sets: &[(usize, Vec<u64>)], gap: u64) -> Result<BlockDecomposition> {
    let mut points: Vec<(u64, usize)> = sets
        .iter()
        .flat_map(|(label, idx)| idx.iter().map(move |&i| (i, *label)))
        .collect();
    if points.is_empty() {
        return Err(Error::EmptyInput);
    }
    points.sort_unstable();
    points.dedup();
    let mut blocks: Vec<Block> = Vec::new();
    let mut prev: Option<u64> = None;
    for (i, label) in points {
        match prev {
            Some(p) if i <= p + gap => {
                let last = blocks.last_mut().unwrap();
                if last.label != label {
                    return Err(Error::MixedBlock {
                        block: blocks.len() - 1,
                        gap,
                    });
                }
                if *last.indices.last().unwrap() != i {
                    last.indices.push(i);
                }
            }
            _ => blocks.push(Block {
                label,
                indices: vec![i],
            }),
        }
        prev = Some(i);
    }
    Ok(BlockDecomposition { blocks, gap })
}
