//! Stationary-marginal process generators with exact mixing metadata.
//!
//! Three families are supported: i.i.d. sequences over a finite alphabet,
//! finite-state Markov chains satisfying the Doeblin condition, and shift
//! systems whose observable is finitely coded by a centered window of
//! `2 * coding_width + 1` symbols of an underlying Markov (or Bernoulli) shift.
//!
//! Path states are indices into the spec's alphabet. For shift systems a path
//! state is the code of the whole window, so the alphabet has
//! `symbols^(2 * coding_width + 1)` states.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{rng_from_seed, PathRng};

const ROW_SUM_TOLERANCE: f64 = 1e-9;
const STATIONARITY_TOLERANCE: f64 = 1e-10;
/// Largest number of window codes a shift system may have.
const MAX_WINDOW_CODES: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProcessKind {
    Iid,
    DoeblinChain,
    ShiftSystem,
}

#[derive(Debug, Clone)]
pub struct ProcessSpec {
    kind: ProcessKind,
    /// Symbol-level transition matrix. For i.i.d. specs every row is the marginal.
    transition: DMatrix<f64>,
    symbol_marginal: Vec<f64>,
    symbol_embedding: Vec<Vec<f64>>,
    coding_width: usize,
    decay: f64,
    // Derived quantities over path states.
    alphabet_size: usize,
    marginal: Vec<f64>,
    embedding: Vec<Vec<f64>>,
    cumulative: Vec<Vec<f64>>,
    cumulative_marginal: Vec<f64>,
}

/// A sample path `xi_1, ..., xi_L`; `values[t]` holds `xi_{t+1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PathSample {
    pub values: Vec<u32>,
    pub seed_tag: u64,
}

impl PathSample {
    /// State at time `t >= 1`.
    #[inline]
    pub fn at(&self, t: u64) -> u32 {
        self.values[(t - 1) as usize]
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Geometric domination `phi(n) <= d * c^n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiBound {
    pub d: f64,
    pub c: f64,
}

/// Coarse-grained observable inputs: one embedded vector per time point,
/// flattened row-major with `dim` coordinates each.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarsePath {
    pub dim: usize,
    pub values: Vec<f64>,
}

impl CoarsePath {
    pub fn at(&self, t: u64) -> &[f64] {
        let i = (t - 1) as usize * self.dim;
        &self.values[i..i + self.dim]
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn to_matrix(rows: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let n = rows.len();
    if n == 0 {
        return Err(Error::invalid("transition matrix is empty"));
    }
    for (i, r) in rows.iter().enumerate() {
        if r.len() != n {
            return Err(Error::invalid(format!(
                "transition matrix is not square: row {i} has {} entries, expected {n}",
                r.len()
            )));
        }
    }
    Ok(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
}

fn check_stochastic(p: &DMatrix<f64>) -> Result<()> {
    for i in 0..p.nrows() {
        let row = p.row(i);
        let sum: f64 = row.iter().sum();
        if row.iter().any(|&v| v < 0.0 || !v.is_finite()) || (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(Error::NonStochastic { row: i, sum });
        }
    }
    Ok(())
}

/// Some power of `p` up to `states^2` is strictly positive.
fn check_primitive(p: &DMatrix<f64>) -> Result<()> {
    let n = p.nrows();
    let pattern: Vec<Vec<bool>> = (0..n).map(|i| (0..n).map(|j| p[(i, j)] > 0.0).collect()).collect();
    let max_power = n * n;
    let mut power = pattern.clone();
    for _ in 1..=max_power {
        if power.iter().all(|r| r.iter().all(|&b| b)) {
            return Ok(());
        }
        let mut next = vec![vec![false; n]; n];
        for i in 0..n {
            for k in 0..n {
                if power[i][k] {
                    for j in 0..n {
                        next[i][j] |= pattern[k][j];
                    }
                }
            }
        }
        power = next;
    }
    Err(Error::NotPrimitive { max_power })
}

/// Stationary vector from the linear system `pi (P - I) = 0`, `sum pi = 1`.
fn stationary_vector(p: &DMatrix<f64>) -> Result<Vec<f64>> {
    let n = p.nrows();
    let mut a = p.transpose() - DMatrix::<f64>::identity(n, n);
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let sol = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::invalid("stationary system is singular"))?;
    let total: f64 = sol.iter().sum();
    let pi: Vec<f64> = sol.iter().map(|v| (v / total).max(0.0)).collect();
    let total: f64 = pi.iter().sum();
    let pi: Vec<f64> = pi.into_iter().map(|v| v / total).collect();
    let residual = (0..n)
        .map(|j| ((0..n).map(|i| pi[i] * p[(i, j)]).sum::<f64>() - pi[j]).abs())
        .fold(0.0, f64::max);
    if residual > STATIONARITY_TOLERANCE {
        return Err(Error::invalid(format!(
            "stationary vector residual {residual} exceeds {STATIONARITY_TOLERANCE}"
        )));
    }
    Ok(pi)
}

fn check_embedding(embedding: &[Vec<f64>], states: usize) -> Result<()> {
    if embedding.len() != states {
        return Err(Error::invalid(format!(
            "embedding has {} vectors for {states} states",
            embedding.len()
        )));
    }
    let dim = embedding[0].len();
    if dim == 0 || embedding.iter().any(|v| v.len() != dim) {
        return Err(Error::invalid("embedding vectors must share a positive dimension"));
    }
    Ok(())
}

fn cumulative(probs: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out: Vec<f64> = probs
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect();
    if let Some(last) = out.last_mut() {
        *last = f64::INFINITY;
    }
    out
}

#[inline]
fn draw(cum: &[f64], rng: &mut PathRng) -> u32 {
    let u: f64 = rng.gen();
    let mut k = 0;
    while u >= cum[k] {
        k += 1;
    }
    k as u32
}

/// Build a Doeblin chain spec; the marginal is the exact stationary vector.
pub fn build_doeblin_chain(transition: &[Vec<f64>], embedding: Vec<Vec<f64>>) -> Result<ProcessSpec> {
    ProcessSpec::doeblin_chain(transition, embedding)
}

impl ProcessSpec {
    pub fn doeblin_chain(transition: &[Vec<f64>], embedding: Vec<Vec<f64>>) -> Result<Self> {
        let p = to_matrix(transition)?;
        check_stochastic(&p)?;
        check_primitive(&p)?;
        let pi = stationary_vector(&p)?;
        check_embedding(&embedding, p.nrows())?;
        Ok(Self::assemble(ProcessKind::DoeblinChain, p, pi, embedding, 0, 1.0))
    }

    pub fn iid(marginal: Vec<f64>, embedding: Vec<Vec<f64>>) -> Result<Self> {
        let n = marginal.len();
        if n == 0 {
            return Err(Error::invalid("marginal is empty"));
        }
        let sum: f64 = marginal.iter().sum();
        if marginal.iter().any(|&v| v < 0.0 || !v.is_finite()) || (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
            return Err(Error::NonStochastic { row: 0, sum });
        }
        check_embedding(&embedding, n)?;
        let p = DMatrix::from_fn(n, n, |_, j| marginal[j]);
        Ok(Self::assemble(ProcessKind::Iid, p, marginal, embedding, 0, 1.0))
    }

    /// Shift system over a Markov symbol chain. The path state at time `m`
    /// codes the window `omega_{m-w}, ..., omega_{m+w}` (`w = coding_width`,
    /// leftmost symbol most significant) and embeds as
    /// `sum_k decay^|k| * e(omega_{m+k})`.
    pub fn shift_system(
        transition: &[Vec<f64>],
        symbol_embedding: Vec<Vec<f64>>,
        coding_width: usize,
        decay: f64,
    ) -> Result<Self> {
        let p = to_matrix(transition)?;
        check_stochastic(&p)?;
        check_primitive(&p)?;
        let pi = stationary_vector(&p)?;
        check_embedding(&symbol_embedding, p.nrows())?;
        if !(decay > 0.0 && decay <= 1.0) {
            return Err(Error::invalid(format!("decay {decay} must lie in (0, 1]")));
        }
        let codes = (p.nrows() as f64).powi(2 * coding_width as i32 + 1);
        if codes > MAX_WINDOW_CODES as f64 {
            return Err(Error::BudgetExceeded {
                needed: codes,
                budget: MAX_WINDOW_CODES as f64,
            });
        }
        Ok(Self::assemble(
            ProcessKind::ShiftSystem,
            p,
            pi,
            symbol_embedding,
            coding_width,
            decay,
        ))
    }

    fn assemble(
        kind: ProcessKind,
        transition: DMatrix<f64>,
        symbol_marginal: Vec<f64>,
        symbol_embedding: Vec<Vec<f64>>,
        coding_width: usize,
        decay: f64,
    ) -> Self {
        let symbols = transition.nrows();
        let cumulative_rows = (0..symbols)
            .map(|i| cumulative(&transition.row(i).iter().copied().collect::<Vec<_>>()))
            .collect();
        let cumulative_marginal = cumulative(&symbol_marginal);
        let mut spec = Self {
            kind,
            transition,
            symbol_marginal: symbol_marginal.clone(),
            symbol_embedding: symbol_embedding.clone(),
            coding_width,
            decay,
            alphabet_size: symbols,
            marginal: symbol_marginal,
            embedding: symbol_embedding,
            cumulative: cumulative_rows,
            cumulative_marginal,
        };
        if kind == ProcessKind::ShiftSystem && coding_width > 0 {
            let width = 2 * coding_width + 1;
            let codes = symbols.pow(width as u32);
            let dim = spec.symbol_embedding[0].len();
            let mut marginal = vec![0.0; codes];
            let mut embedding = vec![vec![0.0; dim]; codes];
            let mut window = vec![0usize; width];
            for code in 0..codes {
                spec.decode_window(code, &mut window);
                let mut prob = spec.symbol_marginal[window[0]];
                for k in 1..width {
                    prob *= spec.transition[(window[k - 1], window[k])];
                }
                marginal[code] = prob;
                for (k, &s) in window.iter().enumerate() {
                    let w = decay.powi((k as i64 - coding_width as i64).unsigned_abs() as i32);
                    for (e, v) in embedding[code].iter_mut().zip(&spec.symbol_embedding[s]) {
                        *e += w * v;
                    }
                }
            }
            spec.alphabet_size = codes;
            spec.marginal = marginal;
            spec.embedding = embedding;
        }
        spec
    }

    fn decode_window(&self, mut code: usize, window: &mut [usize]) {
        let a = self.symbols();
        for slot in window.iter_mut().rev() {
            *slot = code % a;
            code /= a;
        }
    }

    pub fn kind(&self) -> ProcessKind {
        self.kind
    }

    /// Number of path states.
    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    /// Number of underlying symbols (equals `alphabet_size` unless this is a
    /// shift system with positive coding width).
    pub fn symbols(&self) -> usize {
        self.transition.nrows()
    }

    pub fn marginal(&self) -> &[f64] {
        &self.marginal
    }

    pub fn embedding(&self) -> &[Vec<f64>] {
        &self.embedding
    }

    pub fn embedding_dim(&self) -> usize {
        self.embedding[0].len()
    }

    pub fn transition(&self) -> &DMatrix<f64> {
        &self.transition
    }

    pub fn symbol_marginal(&self) -> &[f64] {
        &self.symbol_marginal
    }

    pub fn symbol_embedding(&self) -> &[Vec<f64>] {
        &self.symbol_embedding
    }

    pub fn coding_width(&self) -> usize {
        self.coding_width
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    /// `P^n - 1 pi = (P - 1 pi)^n` for `n >= 1`. Working with the deviation
    /// matrix keeps relative accuracy when the entries become tiny.
    fn deviation_matrix(&self) -> DMatrix<f64> {
        let n = self.symbols();
        DMatrix::from_fn(n, n, |i, j| self.transition[(i, j)] - self.symbol_marginal[j])
    }

    fn phi_from_deviation(&self, dev: &DMatrix<f64>) -> f64 {
        (0..dev.nrows())
            .filter(|&x| self.symbol_marginal[x] > 0.0)
            .map(|x| dev.row(x).iter().filter(|&&v| v > 0.0).sum::<f64>())
            .fold(0.0, f64::max)
    }

    fn check_phi_supported(&self) -> Result<()> {
        if self.kind == ProcessKind::ShiftSystem && self.coding_width > 0 {
            return Err(Error::Unsupported(
                "exact phi for a shift system with positive coding width; use phi_bound".into(),
            ));
        }
        Ok(())
    }

    /// Exact `phi(n) = max_x sum_{y: P^n(x,y) > pi(y)} (P^n(x,y) - pi(y))`.
    pub fn phi_coefficient(&self, n: u64) -> Result<f64> {
        self.check_phi_supported()?;
        if n == 0 {
            return Err(Error::invalid("phi(n) requires n >= 1"));
        }
        if self.kind == ProcessKind::Iid {
            return Ok(0.0);
        }
        let q = self.deviation_matrix();
        let mut power = q.clone();
        let mut base = q;
        let mut e = n - 1;
        // Binary powering: power = q^n.
        while e > 0 {
            if e & 1 == 1 {
                power = &power * &base;
            }
            base = &base * &base;
            e >>= 1;
        }
        Ok(self.phi_from_deviation(&power))
    }

    /// `phi(1), ..., phi(n_max)`.
    pub fn phi_sequence(&self, n_max: usize) -> Result<Vec<f64>> {
        self.check_phi_supported()?;
        Ok(self.symbol_phi_sequence(n_max))
    }

    /// Underlying symbol-chain phi sequence; for shift systems with the
    /// symbol-cylinder filtration this is the process's mixing coefficient.
    fn symbol_phi_sequence(&self, n_max: usize) -> Vec<f64> {
        if self.kind == ProcessKind::Iid {
            return vec![0.0; n_max];
        }
        let q = self.deviation_matrix();
        let mut power = q.clone();
        let mut out = Vec::with_capacity(n_max);
        for _ in 0..n_max {
            out.push(self.phi_from_deviation(&power));
            power = &power * &q;
        }
        out
    }

    /// Certified `(d, c)` with `phi(n) <= d c^n` for `n = 1..=200`; for shift
    /// systems the bound covers the window process.
    ///
    /// `c` is the geometric decay rate read off the exact sequence over
    /// `n = 1..50`; `d` is the smallest constant dominating the sequence
    /// pointwise up to `n = 200`.
    pub fn phi_bound(&self) -> Result<PhiBound> {
        const FIT_MAX: usize = 50;
        const CERTIFY_MAX: usize = 200;
        const FLOOR: f64 = 1e-280;
        if self.kind == ProcessKind::Iid {
            return Ok(PhiBound { d: 0.0, c: 0.5 });
        }
        let seq = self.symbol_phi_sequence(CERTIFY_MAX);
        // Decay rate from the last stretch of the fitting window where phi is
        // still representable.
        let valid: Vec<(usize, f64)> = seq[..FIT_MAX]
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > FLOOR)
            .map(|(i, &v)| (i + 1, v))
            .collect();
        let c = if valid.len() >= 2 {
            let (n_hi, v_hi) = *valid.last().unwrap();
            let (n_lo, v_lo) = valid[valid.len() / 2];
            let (n_lo, v_lo) = if n_lo == n_hi { valid[0] } else { (n_lo, v_lo) };
            let rate = (v_hi / v_lo).powf(1.0 / (n_hi - n_lo) as f64);
            // Per-step ratios bound the rate from above when decay is uneven.
            let step_max = valid
                .windows(2)
                .filter(|w| w[1].0 == w[0].0 + 1)
                .map(|w| w[1].1 / w[0].1)
                .skip(valid.len() / 2)
                .fold(0.0, f64::max);
            rate.max(step_max.min(1.0))
        } else {
            0.5
        };
        let c = (c * (1.0 + 1e-9)).clamp(1e-6, 1.0 - 1e-9);
        let mut d: f64 = 0.0;
        for (i, &v) in seq.iter().enumerate() {
            if v > 0.0 {
                d = d.max(v / c.powi(i as i32 + 1));
            }
        }
        // Path states share symbols up to 2w apart:
        // phi_xi(n) <= phi(n - 2w) for n > 2w, and <= 1 otherwise.
        if self.kind == ProcessKind::ShiftSystem && self.coding_width > 0 {
            d = d.max(1.0) * c.powi(-2 * self.coding_width as i32);
        }
        Ok(PhiBound { d: d * (1.0 + 1e-9), c })
    }

    /// Exact approximation rate `beta_inf(r)`: the sup-norm distance between
    /// the embedded state and its conditional expectation given the symbols
    /// within radius `r`. Zero for chains and i.i.d. specs.
    pub fn approximation_rate(&self, r: usize) -> f64 {
        if self.kind != ProcessKind::ShiftSystem || r >= self.coding_width {
            return 0.0;
        }
        let table = self.coarse_table(r);
        let dim = self.embedding_dim();
        (0..self.alphabet_size)
            .filter(|&c| self.marginal[c] > 0.0)
            .map(|c| {
                self.embedding[c]
                    .iter()
                    .zip(&table[c * dim..(c + 1) * dim])
                    .map(|(a, b)| (a - b).powi(2))
                    .sum::<f64>()
                    .sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// For each window code, `E[x | symbols within radius r]`, flattened.
    fn coarse_table(&self, r: usize) -> Vec<f64> {
        let w = self.coding_width;
        let a = self.symbols();
        let dim = self.embedding_dim();
        let width = 2 * w + 1;
        let pi = &self.symbol_marginal;
        let p = &self.transition;
        // forward[j][s] = E[e(omega_{k+j}) | omega_k = s]
        // backward[j][s] = E[e(omega_{k-j}) | omega_k = s]
        let mut forward = vec![vec![vec![0.0; dim]; a]; w + 1];
        let mut backward = vec![vec![vec![0.0; dim]; a]; w + 1];
        let mut pj = DMatrix::<f64>::identity(a, a);
        for j in 0..=w {
            for s in 0..a {
                for u in 0..a {
                    for d in 0..dim {
                        forward[j][s][d] += pj[(s, u)] * self.symbol_embedding[u][d];
                        if pi[s] > 0.0 {
                            backward[j][s][d] += pi[u] * pj[(u, s)] / pi[s] * self.symbol_embedding[u][d];
                        }
                    }
                }
            }
            pj = &pj * p;
        }
        let mut out = vec![0.0; self.alphabet_size * dim];
        let mut window = vec![0usize; width];
        for code in 0..self.alphabet_size {
            self.decode_window(code, &mut window);
            let slot = &mut out[code * dim..(code + 1) * dim];
            for (k, &sym) in window.iter().enumerate().take(w + r + 1).skip(w - r) {
                let wt = self.decay.powi((k as i64 - w as i64).unsigned_abs() as i32);
                for (o, e) in slot.iter_mut().zip(&self.symbol_embedding[sym]) {
                    *o += wt * e;
                }
            }
            let right = window[w + r];
            let left = window[w - r];
            for j in 1..=(w - r) {
                let wt = self.decay.powi((r + j) as i32);
                for d in 0..dim {
                    slot[d] += wt * (forward[j][right][d] + backward[j][left][d]);
                }
            }
        }
        out
    }

    /// Fill `out` with `length` path states using `rng`.
    pub fn fill_path(&self, rng: &mut PathRng, length: usize, out: &mut Vec<u32>) {
        out.clear();
        out.reserve(length);
        if length == 0 {
            return;
        }
        match self.kind {
            ProcessKind::Iid => {
                for _ in 0..length {
                    out.push(draw(&self.cumulative_marginal, rng));
                }
            }
            ProcessKind::DoeblinChain => {
                let mut s = draw(&self.cumulative_marginal, rng);
                out.push(s);
                for _ in 1..length {
                    s = draw(&self.cumulative[s as usize], rng);
                    out.push(s);
                }
            }
            ProcessKind::ShiftSystem => {
                let width = 2 * self.coding_width + 1;
                let a = self.symbols() as u32;
                let modulus = (self.alphabet_size as u32) / a;
                let mut s = draw(&self.cumulative_marginal, rng);
                let mut code = s;
                for _ in 1..width {
                    s = draw(&self.cumulative[s as usize], rng);
                    code = code * a + s;
                }
                out.push(code);
                for _ in 1..length {
                    s = draw(&self.cumulative[s as usize], rng);
                    code = (code % modulus) * a + s;
                    out.push(code);
                }
            }
        }
    }

    /// Stationary sample path of `length` states, deterministic in `seed`.
    pub fn sample_path(&self, length: usize, seed: u64) -> Result<PathSample> {
        if length == 0 {
            return Err(Error::invalid("path length must be at least 1"));
        }
        let mut rng = rng_from_seed(seed);
        let mut values = Vec::new();
        self.fill_path(&mut rng, length, &mut values);
        Ok(PathSample { values, seed_tag: seed })
    }

    /// Coarse-grained inputs `E[xi_m | F_{m-r, m+r}]` along `path`. This is
    /// the embedded path itself unless the spec is a shift system with
    /// `r < coding_width`.
    pub fn coarse_grain(&self, path: &PathSample, r: usize) -> CoarsePath {
        let dim = self.embedding_dim();
        let mut values = Vec::with_capacity(path.len() * dim);
        if self.kind == ProcessKind::ShiftSystem && r < self.coding_width {
            let table = self.coarse_table(r);
            for &s in &path.values {
                let i = s as usize * dim;
                values.extend_from_slice(&table[i..i + dim]);
            }
        } else {
            for &s in &path.values {
                values.extend_from_slice(&self.embedding[s as usize]);
            }
        }
        CoarsePath { dim, values }
    }

    /// Embedded vector of each state after coarse-graining at radius `r`.
    pub fn coarse_embedding(&self, r: usize) -> Vec<Vec<f64>> {
        if self.kind == ProcessKind::ShiftSystem && r < self.coding_width {
            let dim = self.embedding_dim();
            self.coarse_table(r).chunks(dim).map(|c| c.to_vec()).collect()
        } else {
            self.embedding.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state(p: f64, q: f64) -> ProcessSpec {
        ProcessSpec::doeblin_chain(&[vec![1.0 - p, p], vec![q, 1.0 - q]], vec![vec![-1.0], vec![1.0]]).unwrap()
    }

    #[test]
    fn equal_rows_give_uniform_marginal_and_zero_phi() {
        let s = two_state(0.5, 0.5);
        assert!((s.marginal()[0] - 0.5).abs() < 1e-15);
        for n in 1..10 {
            assert_eq!(s.phi_coefficient(n).unwrap(), 0.0);
        }
    }

    #[test]
    fn doubly_stochastic_has_uniform_marginal() {
        let p = vec![vec![0.2, 0.5, 0.3], vec![0.3, 0.2, 0.5], vec![0.5, 0.3, 0.2]];
        let s = ProcessSpec::doeblin_chain(&p, vec![vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        for &m in s.marginal() {
            assert!((m - 1.0 / 3.0).abs() < 1e-14);
        }
    }

    #[test]
    fn asymmetric_two_state_marginal() {
        // pi P = pi with P = [[.7,.3],[.4,.6]]: 0.3 pi0 = 0.4 pi1.
        let s = two_state(0.3, 0.4);
        assert!((s.marginal()[0] - 4.0 / 7.0).abs() < 1e-14);
        assert!((s.marginal()[1] - 3.0 / 7.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_rows_and_imprimitive_chains() {
        let err = ProcessSpec::doeblin_chain(&[vec![0.5, 0.4], vec![0.5, 0.5]], vec![vec![0.0], vec![1.0]]);
        assert!(matches!(err, Err(Error::NonStochastic { row: 0, .. })));
        let err = ProcessSpec::doeblin_chain(&[vec![0.0, 1.0], vec![1.0, 0.0]], vec![vec![0.0], vec![1.0]]);
        assert!(matches!(err, Err(Error::NotPrimitive { .. })));
        let err = ProcessSpec::doeblin_chain(&[vec![1.0, 0.0], vec![0.0, 1.0]], vec![vec![0.0], vec![1.0]]);
        assert!(matches!(err, Err(Error::NotPrimitive { .. })));
    }

    #[test]
    fn iid_phi_is_zero() {
        let s = ProcessSpec::iid(vec![0.3, 0.7], vec![vec![0.0], vec![1.0]]).unwrap();
        assert_eq!(s.phi_coefficient(1).unwrap(), 0.0);
        assert_eq!(s.phi_coefficient(17).unwrap(), 0.0);
        assert_eq!(s.phi_bound().unwrap().d, 0.0);
    }

    /// Brute force over all future events B of the n-step law.
    fn phi_by_events(s: &ProcessSpec, n: u64) -> f64 {
        let k = s.symbols();
        let p = s.transition();
        let mut pn = DMatrix::<f64>::identity(k, k);
        for _ in 0..n {
            pn = &pn * p;
        }
        let pi = s.symbol_marginal();
        let mut best: f64 = 0.0;
        for x in 0..k {
            for mask in 0u32..(1 << k) {
                let (mut pb, mut pib) = (0.0, 0.0);
                for y in 0..k {
                    if mask >> y & 1 == 1 {
                        pb += pn[(x, y)];
                        pib += pi[y];
                    }
                }
                best = best.max((pb - pib).abs());
            }
        }
        best
    }

    #[test]
    fn phi_quarter_chain_matches_closed_form_and_events() {
        let s = two_state(0.25, 0.25);
        for n in 1..=30u64 {
            let exact = 0.5f64.powi(n as i32) * 0.5;
            let phi = s.phi_coefficient(n).unwrap();
            assert!((phi - exact).abs() <= 1e-15 * exact.max(1e-300) + 1e-300, "n={n}");
            if n <= 12 {
                assert!((phi_by_events(&s, n) - exact).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn phi_sequence_agrees_with_powering() {
        let p = vec![vec![0.1, 0.6, 0.3], vec![0.4, 0.4, 0.2], vec![0.25, 0.25, 0.5]];
        let s = ProcessSpec::doeblin_chain(&p, vec![vec![0.0], vec![1.0], vec![2.0]]).unwrap();
        let seq = s.phi_sequence(40).unwrap();
        for (i, v) in seq.iter().enumerate() {
            let direct = s.phi_coefficient(i as u64 + 1).unwrap();
            assert!((v - direct).abs() <= 1e-12 * v.max(1e-300));
            assert!((phi_by_events(&s, i as u64 + 1) - v).abs() < 1e-13);
        }
    }

    #[test]
    fn phi_bound_for_quarter_chain_has_rate_one_half() {
        let b = two_state(0.25, 0.25).phi_bound().unwrap();
        assert!((b.c - 0.5).abs() < 1e-8);
        let seq = two_state(0.25, 0.25).phi_sequence(200).unwrap();
        for (i, v) in seq.iter().enumerate() {
            assert!(*v <= b.d * b.c.powi(i as i32 + 1));
        }
    }

    #[test]
    fn shift_phi_requires_zero_coding_width() {
        let p = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        let s = ProcessSpec::shift_system(&p, vec![vec![0.0], vec![1.0]], 2, 0.5).unwrap();
        assert!(matches!(s.phi_coefficient(1), Err(Error::Unsupported(_))));
        assert_eq!(s.alphabet_size(), 32);
        let s0 = ProcessSpec::shift_system(&p, vec![vec![0.0], vec![1.0]], 0, 0.5).unwrap();
        assert_eq!(s0.phi_coefficient(1).unwrap(), 0.0);
        // Bernoulli symbols: only window overlap, phi(n) <= c^{n - 4}.
        let b = s.phi_bound().unwrap();
        assert!((b.d * b.c.powi(4) - 1.0).abs() < 1e-6, "{b:?}");
    }

    #[test]
    fn shift_marginal_sums_to_one_and_embeds_windows() {
        let p = vec![vec![0.7, 0.3], vec![0.4, 0.6]];
        let s = ProcessSpec::shift_system(&p, vec![vec![0.0], vec![1.0]], 1, 0.5).unwrap();
        let total: f64 = s.marginal().iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
        // code 0b101 = symbols (1, 0, 1): 0.5 + 0 + 0.5
        assert!((s.embedding()[5][0] - 1.0).abs() < 1e-15);
        // code 0b010: center weight 1
        assert!((s.embedding()[2][0] - 1.0).abs() < 1e-15);
        assert!((s.embedding()[7][0] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn sample_path_is_deterministic() {
        let s = two_state(0.25, 0.25);
        let a = s.sample_path(1000, 99).unwrap();
        let b = s.sample_path(1000, 99).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.values, s.sample_path(1000, 100).unwrap().values);
    }

    #[test]
    fn shift_path_windows_are_consistent() {
        let p = vec![vec![0.7, 0.3], vec![0.4, 0.6]];
        let s = ProcessSpec::shift_system(&p, vec![vec![0.0], vec![1.0]], 2, 0.5).unwrap();
        let path = s.sample_path(500, 3).unwrap();
        // consecutive codes overlap in 4 symbols
        for w in path.values.windows(2) {
            assert_eq!(w[0] % 16, w[1] / 2);
        }
    }

    #[test]
    fn coarse_grain_is_identity_for_chains_and_wide_radius() {
        let s = two_state(0.25, 0.25);
        let path = s.sample_path(50, 1).unwrap();
        let cg = s.coarse_grain(&path, 0);
        for t in 1..=50u64 {
            assert_eq!(cg.at(t), s.embedding()[path.at(t) as usize].as_slice());
        }
        let p = vec![vec![0.5, 0.5], vec![0.5, 0.5]];
        let sh = ProcessSpec::shift_system(&p, vec![vec![0.0], vec![1.0]], 3, 0.5).unwrap();
        let path = sh.sample_path(50, 1).unwrap();
        let cg = sh.coarse_grain(&path, 3);
        for t in 1..=50u64 {
            assert_eq!(cg.at(t), sh.embedding()[path.at(t) as usize].as_slice());
        }
        assert_eq!(sh.approximation_rate(3), 0.0);
    }
}
