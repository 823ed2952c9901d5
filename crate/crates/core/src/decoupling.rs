//! Exact checks of the mixing inequalities on small finite-state chains.
//!
//! Expectations of block functionals are computed by enumerating every
//! assignment of states to the block windows and weighting it with the exact
//! path probability: stationary start, transition matrix inside a window,
//! matrix-power bridges between windows. Nothing here is Monte Carlo.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::normal::{std_normal_cdf, STD_NORMAL_DENSITY_BOUND};
use crate::processes::{ProcessKind, ProcessSpec};
use crate::rng::{rng_from_seed, split, stream};

/// Largest number of enumerated block-state assignments.
pub const ENUMERATION_BUDGET: f64 = 1e7;
/// Largest chain handled by the exact checks.
pub const MAX_STATES: usize = 6;
const SLACK: f64 = 1e-12;

pub type BlockFn = Arc<dyn Fn(&[u32]) -> f64 + Send + Sync>;

/// `E H(U_1, ..., U_k)` setup: `U_t` is the chain restricted to window
/// `[m_t, n_t]`, and `groups[t]` is the group `C_i` containing block `t`.
#[derive(Clone)]
pub struct BlockExpectationProblem {
    chain: ProcessSpec,
    windows: Vec<(u64, u64)>,
    groups: Vec<usize>,
    h: BlockFn,
    h_sup: f64,
}

impl std::fmt::Debug for BlockExpectationProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BlockExpectationProblem")
            .field("states", &self.chain.alphabet_size())
            .field("windows", &self.windows)
            .field("groups", &self.groups)
            .field("h_sup", &self.h_sup)
            .finish()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCheck {
    pub gap: f64,
    pub bound: f64,
    pub pass: bool,
}

impl BoundCheck {
    fn new(gap: f64, bound: f64) -> Self {
        Self {
            gap,
            bound,
            pass: gap <= bound + SLACK,
        }
    }
}

fn check_chain(chain: &ProcessSpec) -> Result<()> {
    match chain.kind() {
        ProcessKind::DoeblinChain | ProcessKind::Iid => {}
        ProcessKind::ShiftSystem => {
            return Err(Error::Unsupported(
                "exact block expectations need a finite-state chain".into(),
            ))
        }
    }
    if chain.alphabet_size() > MAX_STATES {
        return Err(Error::Unsupported(format!(
            "{} states; exact checks support at most {MAX_STATES}",
            chain.alphabet_size()
        )));
    }
    Ok(())
}

fn check_windows(windows: &[(u64, u64)]) -> Result<()> {
    if windows.is_empty() {
        return Err(Error::EmptyInput);
    }
    for (t, &(m, n)) in windows.iter().enumerate() {
        if m == 0 || m > n {
            return Err(Error::invalid(format!(
                "window {t} = [{m}, {n}] is not a valid index range"
            )));
        }
        if t > 0 && windows[t - 1].1 >= m {
            return Err(Error::invalid(format!(
                "windows {} and {t} overlap or are out of order",
                t - 1
            )));
        }
    }
    Ok(())
}

impl BlockExpectationProblem {
    pub fn new(
        chain: ProcessSpec,
        windows: Vec<(u64, u64)>,
        groups: Vec<usize>,
        h: BlockFn,
        h_sup: f64,
    ) -> Result<Self> {
        check_chain(&chain)?;
        check_windows(&windows)?;
        if groups.len() != windows.len() {
            return Err(Error::invalid("one group label per window is required"));
        }
        if !(h_sup.is_finite() && h_sup >= 0.0) {
            return Err(Error::invalid("H_sup must be finite and non-negative"));
        }
        Ok(Self {
            chain,
            windows,
            groups,
            h,
            h_sup,
        })
    }

    pub fn chain(&self) -> &ProcessSpec {
        &self.chain
    }

    pub fn windows(&self) -> &[(u64, u64)] {
        &self.windows
    }

    pub fn groups(&self) -> &[usize] {
        &self.groups
    }

    pub fn h_sup(&self) -> f64 {
        self.h_sup
    }

    /// Total number of enumerated positions.
    pub fn total_length(&self) -> usize {
        self.windows.iter().map(|&(m, n)| (n - m + 1) as usize).sum()
    }

    /// Number of distinct groups.
    pub fn group_count(&self) -> usize {
        let mut g = self.groups.clone();
        g.sort_unstable();
        g.dedup();
        g.len()
    }

    /// `sum_{i >= 2} phi(m_i - n_{i-1})`.
    pub fn phi_sum(&self) -> Result<f64> {
        phi_gap_sum(&self.chain, &self.windows)
    }

    fn evaluate(&self, anchors: &[Option<usize>]) -> Result<f64> {
        let enumerator = Enumerator::new(&self.chain, &self.windows, anchors)?;
        let h = &self.h;
        let sup = self.h_sup;
        let mut bad = None;
        let value = enumerator.sum(|states| {
            let v = h(states);
            if !(v.abs() <= sup + SLACK) && bad.is_none() {
                bad = Some(v);
            }
            v
        });
        match bad {
            Some(v) => Err(Error::invalid(format!(
                "|H| = {} exceeds the declared sup {sup}",
                v.abs()
            ))),
            None => Ok(value),
        }
    }
}

/// `sum_{i >= 2} phi(m_i - n_{i-1})` over consecutive windows.
pub fn phi_gap_sum(chain: &ProcessSpec, windows: &[(u64, u64)]) -> Result<f64> {
    windows.windows(2).map(|w| chain.phi_coefficient(w[1].0 - w[0].1)).sum()
}

fn matrix_power(p: &DMatrix<f64>, k: u64) -> DMatrix<f64> {
    let mut out = DMatrix::identity(p.nrows(), p.ncols());
    let mut base = p.clone();
    let mut e = k;
    while e > 0 {
        if e & 1 == 1 {
            out = &out * &base;
        }
        base = &base * &base;
        e >>= 1;
    }
    out
}

/// Depth-first enumeration of block-state assignments. Block `t` starts from
/// the stationary law when `anchors[t]` is `None`, and otherwise bridges from
/// the last state of block `anchors[t]`.
struct Enumerator {
    a: usize,
    step: Vec<f64>,
    pi: Vec<f64>,
    /// Per position: where the weight of the state comes from.
    entry: Vec<Entry>,
}

enum Entry {
    Inside,
    Stationary,
    Bridge { from_position: usize, matrix: Vec<f64> },
}

impl Enumerator {
    fn new(chain: &ProcessSpec, windows: &[(u64, u64)], anchors: &[Option<usize>]) -> Result<Self> {
        let a = chain.alphabet_size();
        let total: usize = windows.iter().map(|&(m, n)| (n - m + 1) as usize).sum();
        let needed = (a as f64).powi(total as i32);
        if needed > ENUMERATION_BUDGET {
            return Err(Error::BudgetExceeded {
                needed,
                budget: ENUMERATION_BUDGET,
            });
        }
        let p = chain.transition();
        let flat = |m: &DMatrix<f64>| (0..a * a).map(|k| m[(k / a, k % a)]).collect::<Vec<f64>>();
        let mut ends = Vec::with_capacity(windows.len());
        let mut pos = 0;
        let mut entry = Vec::with_capacity(total);
        for (t, &(m, n)) in windows.iter().enumerate() {
            match anchors[t] {
                None => entry.push(Entry::Stationary),
                Some(s) => {
                    let (_, n_prev) = windows[s];
                    entry.push(Entry::Bridge {
                        from_position: ends[s],
                        matrix: flat(&matrix_power(p, m - n_prev)),
                    });
                }
            }
            for _ in m..n {
                entry.push(Entry::Inside);
            }
            pos += (n - m + 1) as usize;
            ends.push(pos - 1);
        }
        Ok(Self {
            a,
            step: flat(p),
            pi: chain.marginal().to_vec(),
            entry,
        })
    }

    fn sum(&self, mut h: impl FnMut(&[u32]) -> f64) -> f64 {
        let mut states = vec![0u32; self.entry.len()];
        let mut total = 0.0;
        self.descend(0, 1.0, &mut states, &mut h, &mut total);
        total
    }

    fn descend(&self, pos: usize, weight: f64, states: &mut [u32], h: &mut impl FnMut(&[u32]) -> f64, total: &mut f64) {
        if pos == states.len() {
            *total += weight * h(states);
            return;
        }
        for x in 0..self.a {
            let w = match &self.entry[pos] {
                Entry::Stationary => self.pi[x],
                Entry::Inside => self.step[states[pos - 1] as usize * self.a + x],
                Entry::Bridge { from_position, matrix } => matrix[states[*from_position] as usize * self.a + x],
            };
            if w == 0.0 {
                continue;
            }
            states[pos] = x as u32;
            self.descend(pos + 1, weight * w, states, h, total);
        }
    }
}

/// Exact `E H(U_1, ..., U_k)` under the chain's joint law.
pub fn exact_joint_expectation(problem: &BlockExpectationProblem) -> Result<f64> {
    let anchors: Vec<Option<usize>> = (0..problem.windows.len())
        .map(|t| if t == 0 { None } else { Some(t - 1) })
        .collect();
    problem.evaluate(&anchors)
}

/// Exact `E H` when the groups are replaced by independent copies, each
/// keeping its own joint law.
pub fn decoupled_expectation(problem: &BlockExpectationProblem) -> Result<f64> {
    let mut anchors = Vec::with_capacity(problem.windows.len());
    for t in 0..problem.windows.len() {
        let prev = (0..t).rev().find(|&s| problem.groups[s] == problem.groups[t]);
        anchors.push(prev);
    }
    problem.evaluate(&anchors)
}

/// `|E H - E_decoupled H| <= 4 ||H|| sum phi(m_i - n_{i-1})`.
pub fn check_decoupling_bound(problem: &BlockExpectationProblem) -> Result<BoundCheck> {
    let exact = exact_joint_expectation(problem)?;
    let decoupled = decoupled_expectation(problem)?;
    let bound = 4.0 * problem.h_sup * problem.phi_sum()?;
    Ok(BoundCheck::new((exact - decoupled).abs(), bound))
}

/// A bounded function of one group's concatenated block states.
#[derive(Clone)]
pub struct GroupFunction {
    pub f: BlockFn,
    pub sup: f64,
}

/// `|E prod Z_i - prod E Z_i| <= 4 (prod ||Z_i||) sum phi(m_j - n_{j-1})`.
///
/// `groups[t]` assigns window `t` to `z[groups[t]]`; each `Z_i` receives the
/// states of its own windows in time order.
pub fn check_correlation_bound(
    chain: &ProcessSpec,
    windows: &[(u64, u64)],
    groups: &[usize],
    z: &[GroupFunction],
) -> Result<BoundCheck> {
    if groups.iter().any(|&g| g >= z.len()) {
        return Err(Error::invalid("group label without a matching function"));
    }
    let lengths: Vec<usize> = windows.iter().map(|&(m, n)| (n - m + 1) as usize).collect();
    let groups_owned = groups.to_vec();
    let funcs: Vec<BlockFn> = z.iter().map(|g| g.f.clone()).collect();
    let n_groups = z.len();
    let product: BlockFn = Arc::new(move |states: &[u32]| {
        let mut parts: Vec<Vec<u32>> = vec![Vec::new(); n_groups];
        let mut offset = 0;
        for (t, &len) in lengths.iter().enumerate() {
            parts[groups_owned[t]].extend_from_slice(&states[offset..offset + len]);
            offset += len;
        }
        parts.iter().zip(&funcs).map(|(u, f)| f(u)).product()
    });
    let sup: f64 = z.iter().map(|g| g.sup).product();
    let problem = BlockExpectationProblem::new(chain.clone(), windows.to_vec(), groups.to_vec(), product, sup)?;
    check_decoupling_bound(&problem)
}

/// Conditional form on two-block problems:
/// `max_{u_1} |E[H(u_1, U_2) | U_1 = u_1] - E H(u_1, U_2')| <= 2 ||H|| phi(m_2 - n_1)`,
/// where `U_2'` is an independent copy of `U_2`.
pub fn check_conditional_bound(problem: &BlockExpectationProblem) -> Result<BoundCheck> {
    if problem.windows.len() != 2 {
        return Err(Error::invalid("the conditional check needs exactly two blocks"));
    }
    let chain = &problem.chain;
    let a = chain.alphabet_size();
    let (m1, n1) = problem.windows[0];
    let (m2, n2) = problem.windows[1];
    let len1 = (n1 - m1 + 1) as usize;
    let len2 = (n2 - m2 + 1) as usize;
    let needed = (a as f64).powi((len1 + len2) as i32);
    if needed > ENUMERATION_BUDGET {
        return Err(Error::BudgetExceeded {
            needed,
            budget: ENUMERATION_BUDGET,
        });
    }
    let p = chain.transition();
    let pi = chain.marginal();
    let bridge = matrix_power(p, m2 - n1);
    let u1s = all_words(a, len1);
    let u2s = all_words(a, len2);
    let word_weight =
        |u: &[u32], first: f64| -> f64 { u.windows(2).fold(first, |w, s| w * p[(s[0] as usize, s[1] as usize)]) };
    let mut worst: f64 = 0.0;
    let mut buf = vec![0u32; len1 + len2];
    for u1 in &u1s {
        if word_weight(u1, pi[u1[0] as usize]) == 0.0 {
            continue;
        }
        let last = *u1.last().unwrap() as usize;
        buf[..len1].copy_from_slice(u1);
        let (mut conditional, mut decoupled) = (0.0, 0.0);
        for u2 in &u2s {
            buf[len1..].copy_from_slice(u2);
            let v = (problem.h)(&buf);
            if !(v.abs() <= problem.h_sup + SLACK) {
                return Err(Error::invalid(format!(
                    "|H| = {} exceeds the declared sup {}",
                    v.abs(),
                    problem.h_sup
                )));
            }
            conditional += word_weight(u2, bridge[(last, u2[0] as usize)]) * v;
            decoupled += word_weight(u2, pi[u2[0] as usize]) * v;
        }
        worst = worst.max((conditional - decoupled).abs());
    }
    let bound = 2.0 * problem.h_sup * chain.phi_coefficient(m2 - n1)?;
    Ok(BoundCheck::new(worst, bound))
}

fn all_words(a: usize, len: usize) -> Vec<Vec<u32>> {
    let count = a.pow(len as u32);
    (0..count)
        .map(|mut code| {
            let mut w = vec![0u32; len];
            for slot in w.iter_mut().rev() {
                *slot = (code % a) as u32;
                code /= a;
            }
            w
        })
        .collect()
}

/// Discrete coupled law of `(X, Y)`: atoms `(x, y)` with probabilities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoupledLaw {
    pub atoms: Vec<(f64, f64, f64)>,
}

impl CoupledLaw {
    pub fn new(atoms: Vec<(f64, f64, f64)>) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::EmptyInput);
        }
        let total: f64 = atoms.iter().map(|a| a.2).sum();
        if atoms.iter().any(|a| a.2 < 0.0 || !a.0.is_finite() || !a.1.is_finite()) || (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(
                "coupled law needs finite atoms and probabilities summing to 1",
            ));
        }
        Ok(Self { atoms })
    }

    /// `||X - Y||_inf` over atoms of positive probability.
    pub fn sup_distance(&self) -> f64 {
        self.atoms
            .iter()
            .filter(|a| a.2 > 0.0)
            .map(|a| (a.0 - a.1).abs())
            .fold(0.0, f64::max)
    }

    /// `||X - Y||_{L^b}`.
    pub fn lb_distance(&self, b: f64) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.2 * (a.0 - a.1).abs().powf(b))
            .sum::<f64>()
            .powf(1.0 / b)
    }

    pub fn x_law(&self) -> Vec<(f64, f64)> {
        self.atoms.iter().map(|a| (a.0, a.2)).collect()
    }

    pub fn y_law(&self) -> Vec<(f64, f64)> {
        self.atoms.iter().map(|a| (a.1, a.2)).collect()
    }
}

/// Exact `sup_t |F(t) - Phi(t)|` for a discrete law given as `(value, prob)`.
pub fn discrete_kolmogorov_to_normal(law: &[(f64, f64)]) -> f64 {
    let mut atoms: Vec<(f64, f64)> = law.iter().copied().filter(|a| a.1 > 0.0).collect();
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut below = 0.0;
    let mut worst: f64 = 0.0;
    let mut k = 0;
    while k < atoms.len() {
        let v = atoms[k].0;
        let mut mass = 0.0;
        while k < atoms.len() && atoms[k].0 == v {
            mass += atoms[k].1;
            k += 1;
        }
        let phi = std_normal_cdf(v);
        let above = (below + mass).min(1.0);
        worst = worst.max((below - phi).abs()).max((above - phi).abs());
        below = above;
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothingCheck {
    pub dk_x: f64,
    pub dk_y: f64,
    /// `3 d_K(X) + 4 c ||X - Y||_inf`.
    pub sup_rhs: f64,
    pub sup_pass: bool,
    /// `(b, 3 d_K(X) + (1 + 4c) ||X - Y||_b^{1 - 1/(b+1)})`.
    pub lb_rhs: Vec<(f64, f64)>,
    pub lb_pass: Vec<bool>,
}

impl SmoothingCheck {
    pub fn pass(&self) -> bool {
        self.sup_pass && self.lb_pass.iter().all(|&p| p)
    }
}

/// Both smoothing inequalities against the standard normal with density
/// bound `c`, evaluated exactly on a discrete coupled law.
pub fn check_smoothing_inequality(law: &CoupledLaw, c: f64, exponents: &[f64]) -> SmoothingCheck {
    let dk_x = discrete_kolmogorov_to_normal(&law.x_law());
    let dk_y = discrete_kolmogorov_to_normal(&law.y_law());
    let sup_rhs = 3.0 * dk_x + 4.0 * c * law.sup_distance();
    let lb_rhs: Vec<(f64, f64)> = exponents
        .iter()
        .map(|&b| {
            (
                b,
                3.0 * dk_x + (1.0 + 4.0 * c) * law.lb_distance(b).powf(1.0 - 1.0 / (b + 1.0)),
            )
        })
        .collect();
    let lb_pass = lb_rhs.iter().map(|&(_, r)| dk_y <= r + SLACK).collect();
    SmoothingCheck {
        dk_x,
        dk_y,
        sup_rhs,
        sup_pass: dk_y <= sup_rhs + SLACK,
        lb_rhs,
        lb_pass,
    }
}

fn random_chain(rng: &mut impl Rng, states: usize) -> ProcessSpec {
    // Mix a random stochastic matrix with the identity so that some instances
    // mix slowly and the bounds are nearly tight.
    let stickiness: f64 = rng.gen_range(0.0..0.9);
    let rows: Vec<Vec<f64>> = (0..states)
        .map(|i| {
            let raw: Vec<f64> = (0..states).map(|_| rng.gen_range(0.05..1.0)).collect();
            let s: f64 = raw.iter().sum();
            raw.iter()
                .enumerate()
                .map(|(j, v)| (1.0 - stickiness) * v / s + if i == j { stickiness } else { 0.0 })
                .collect()
        })
        .collect();
    let embedding = (0..states).map(|i| vec![i as f64]).collect();
    ProcessSpec::doeblin_chain(&rows, embedding).expect("random rows are stochastic and positive")
}

fn random_layout(rng: &mut impl Rng, states: usize, max_blocks: usize) -> (Vec<(u64, u64)>, Vec<usize>) {
    let blocks = rng.gen_range(1..=max_blocks);
    let max_total = ((ENUMERATION_BUDGET / 100.0).ln() / (states as f64).ln()).floor() as usize;
    let mut windows = Vec::with_capacity(blocks);
    let mut start = rng.gen_range(1..=3u64);
    let mut used = 0;
    for t in 0..blocks {
        let room = max_total.saturating_sub(used + (blocks - t - 1)).clamp(1, 3);
        let len = rng.gen_range(1..=room) as u64;
        windows.push((start, start + len - 1));
        used += len as usize;
        start += len - 1 + rng.gen_range(1..=4u64);
    }
    let n_groups = rng.gen_range(1..=blocks);
    let groups = (0..blocks)
        .map(|t| if t < n_groups { t } else { rng.gen_range(0..n_groups) })
        .collect();
    (windows, groups)
}

fn random_table(rng: &mut impl Rng, size: usize, indicator: bool) -> Arc<[f64]> {
    (0..size)
        .map(|_| {
            if indicator {
                f64::from(rng.gen_bool(0.5) as u8)
            } else {
                rng.gen_range(-1.0..=1.0)
            }
        })
        .collect()
}

fn word_code(states: &[u32], a: usize) -> usize {
    states.iter().fold(0, |acc, &s| acc * a + s as usize)
}

/// Seeded random decoupling instance: at most `max_states` states, at most
/// `max_blocks` blocks, indicator `H` given by a random table.
pub fn random_instance(seed: u64, max_states: usize, max_blocks: usize) -> BlockExpectationProblem {
    let mut rng = rng_from_seed(seed);
    let states = rng.gen_range(2..=max_states.clamp(2, MAX_STATES));
    let chain = random_chain(&mut rng, states);
    let (windows, groups) = random_layout(&mut rng, states, max_blocks.max(1));
    let total: usize = windows.iter().map(|&(m, n)| (n - m + 1) as usize).sum();
    let table = random_table(&mut rng, states.pow(total as u32), true);
    let h: BlockFn = Arc::new(move |u: &[u32]| table[word_code(u, states)]);
    BlockExpectationProblem::new(chain, windows, groups, h, 1.0).expect("generated layout is admissible")
}

/// Chain, block windows, group labels and one function per group.
pub type CorrelationInstance = (ProcessSpec, Vec<(u64, u64)>, Vec<usize>, Vec<GroupFunction>);

/// Seeded random product instance for the correlation bound.
pub fn random_correlation_instance(seed: u64, max_states: usize, max_blocks: usize) -> CorrelationInstance {
    let mut rng = rng_from_seed(seed);
    let states = rng.gen_range(2..=max_states.clamp(2, MAX_STATES));
    let chain = random_chain(&mut rng, states);
    let (windows, groups) = random_layout(&mut rng, states, max_blocks.max(1));
    let n_groups = groups.iter().max().unwrap() + 1;
    let z = (0..n_groups)
        .map(|g| {
            let len: usize = windows
                .iter()
                .zip(&groups)
                .filter(|(_, &gg)| gg == g)
                .map(|(&(m, n), _)| (n - m + 1) as usize)
                .sum();
            let table = random_table(&mut rng, states.pow(len as u32), false);
            GroupFunction {
                f: Arc::new(move |u: &[u32]| table[word_code(u, states)]),
                sup: 1.0,
            }
        })
        .collect();
    (chain, windows, groups, z)
}

/// Seeded random coupled pair: `X` on a few atoms in `[-3, 3]`, `Y` a
/// perturbation of `X` whose size varies across instances.
pub fn random_coupled_law(seed: u64) -> CoupledLaw {
    let mut rng = rng_from_seed(seed);
    let k = rng.gen_range(1..=20);
    let scale = 10f64.powf(rng.gen_range(-4.0..0.5));
    let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..1.0)).collect();
    let total: f64 = raw.iter().sum();
    let atoms = raw
        .iter()
        .map(|w| {
            let x = rng.gen_range(-3.0..3.0);
            let y = if rng.gen_bool(0.2) {
                x
            } else {
                x + scale * rng.gen_range(-1.0..1.0)
            };
            (x, y, w / total)
        })
        .collect::<Vec<_>>();
    // Renormalize exactly onto the last atom.
    let mut atoms = atoms;
    let head: f64 = atoms[..k - 1].iter().map(|a| a.2).sum();
    atoms[k - 1].2 = 1.0 - head;
    CoupledLaw { atoms }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityFailure {
    pub check: String,
    pub instance: usize,
    pub gap: f64,
    pub bound: f64,
}

/// Report of a batch of inequality checks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InequalityReport {
    pub instances: usize,
    pub failures: Vec<InequalityFailure>,
}

impl InequalityReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// Run the decoupling, correlation, conditional and smoothing checks on
/// seeded random instances. Aggregation is in instance order.
pub fn run_inequality_checks(
    master_seed: u64,
    block_instances: usize,
    smoothing_instances: usize,
) -> Result<InequalityReport> {
    let block_results: Vec<Vec<InequalityFailure>> = (0..block_instances)
        .into_par_iter()
        .map(|i| -> Result<Vec<InequalityFailure>> {
            let mut out = Vec::new();
            let mut record = |check: &str, c: BoundCheck| {
                if !c.pass {
                    out.push(InequalityFailure {
                        check: check.into(),
                        instance: i,
                        gap: c.gap,
                        bound: c.bound,
                    });
                }
            };
            let seed = split(master_seed, &[stream::INSTANCES, 0, i as u64]);
            let problem = random_instance(seed, 4, 4);
            record("decoupling", check_decoupling_bound(&problem)?);
            if problem.windows().len() == 2 {
                record("conditional", check_conditional_bound(&problem)?);
            }
            let seed = split(master_seed, &[stream::INSTANCES, 1, i as u64]);
            let (chain, windows, groups, z) = random_correlation_instance(seed, 4, 4);
            record("correlation", check_correlation_bound(&chain, &windows, &groups, &z)?);
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let smoothing: Vec<Option<InequalityFailure>> = (0..smoothing_instances)
        .into_par_iter()
        .map(|i| {
            let law = random_coupled_law(split(master_seed, &[stream::INSTANCES, 2, i as u64]));
            let c = check_smoothing_inequality(&law, STD_NORMAL_DENSITY_BOUND, &[1.0, 2.0, 4.0]);
            (!c.pass()).then(|| {
                let bound = c.lb_rhs.iter().map(|r| r.1).fold(c.sup_rhs, f64::min);
                InequalityFailure {
                    check: "smoothing".into(),
                    instance: i,
                    gap: c.dk_y,
                    bound,
                }
            })
        })
        .collect();
    let mut failures: Vec<InequalityFailure> = block_results.into_iter().flatten().collect();
    failures.extend(smoothing.into_iter().flatten());
    Ok(InequalityReport {
        instances: block_instances + smoothing_instances,
        failures,
    })
}
