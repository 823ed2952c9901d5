//! Bounded observables `F(x_1, ..., x_l)` of several process states.
//!
//! An observable is either a dense table over state tuples (indicators,
//! custom tables) or a function of the concatenated embedded arguments
//! (polynomials, user closures). Only the function form can be evaluated at
//! coarse-grained inputs, which are not states.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::processes::{ProcessKind, ProcessSpec};
use crate::rng::PathRng;

/// Exact centering is used up to this many state tuples.
pub const EXACT_CENTERING_LIMIT: usize = 10_000_000;
/// Largest state-tuple table the replication engine will materialize.
pub const TABLE_LIMIT: usize = 1 << 24;

type PointFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Form {
    Table { states: usize, values: Arc<[f64]> },
    Points { dim: usize, f: PointFn },
}

#[derive(Clone)]
pub struct Observable {
    arity: usize,
    form: Form,
    bound_m: f64,
    holder_kappa: f64,
    growth_iota: Option<f64>,
    centered: bool,
}

impl fmt::Debug for Observable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let form = match &self.form {
            Form::Table { states, .. } => format!("table over {states} states"),
            Form::Points { dim, .. } => format!("function of dimension {dim}"),
        };
        f.debug_struct("Observable")
            .field("arity", &self.arity)
            .field("form", &form)
            .field("bound_m", &self.bound_m)
            .field("holder_kappa", &self.holder_kappa)
            .field("growth_iota", &self.growth_iota)
            .field("centered", &self.centered)
            .finish()
    }
}

/// `F_bar = int F d mu^l`, with a Monte Carlo standard error when it could
/// not be enumerated exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CenteringConstant {
    pub value: f64,
    pub stderr: f64,
    pub exact: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenteringBudget {
    pub exact_limit: usize,
    pub mc_samples: usize,
    pub seed: u64,
}

impl Default for CenteringBudget {
    fn default() -> Self {
        Self {
            exact_limit: EXACT_CENTERING_LIMIT,
            mc_samples: 1_000_000,
            seed: 0x5eed,
        }
    }
}

/// Monomial `coef * prod_i x_i[0]^powers[i]` over the first embedding coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolynomialTerm {
    pub coef: f64,
    pub powers: Vec<u32>,
}

/// Dense tabulation of an observable over state tuples, first argument most
/// significant.
#[derive(Debug, Clone, PartialEq)]
pub struct StateTable {
    pub states: usize,
    pub arity: usize,
    pub values: Vec<f64>,
}

impl StateTable {
    #[inline]
    pub fn index(&self, states: &[u32]) -> usize {
        states.iter().fold(0usize, |acc, &s| acc * self.states + s as usize)
    }

    #[inline]
    pub fn eval(&self, states: &[u32]) -> f64 {
        self.values[self.index(states)]
    }
}

fn tuple_count(states: usize, arity: usize) -> f64 {
    (states as f64).powi(arity as i32)
}

fn decode(mut idx: usize, states: usize, out: &mut [u32]) {
    for slot in out.iter_mut().rev() {
        *slot = (idx % states) as u32;
        idx /= states;
    }
}

impl Observable {
    /// Function of the concatenated embedded arguments (`arity * dim` reals).
    /// Bound and Holder constants are declared, not checked; see [`Observable::verify`].
    pub fn from_fn<F>(arity: usize, dim: usize, bound_m: f64, holder_kappa: f64, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        if arity == 0 || dim == 0 {
            return Err(Error::invalid("observable arity and dimension must be positive"));
        }
        check_constants(bound_m, holder_kappa)?;
        Ok(Self {
            arity,
            form: Form::Points { dim, f: Arc::new(f) },
            bound_m,
            holder_kappa,
            growth_iota: None,
            centered: false,
        })
    }

    /// Dense table over `states^arity` tuples; `bound_m` is the table's sup.
    pub fn table(states: usize, arity: usize, values: Vec<f64>) -> Result<Self> {
        if arity == 0 || states == 0 {
            return Err(Error::invalid("table observable needs positive arity and states"));
        }
        let expected = tuple_count(states, arity);
        if values.len() as f64 != expected {
            return Err(Error::invalid(format!(
                "table has {} entries, expected {expected}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("table entries must be finite"));
        }
        let bound_m = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        Ok(Self {
            arity,
            form: Form::Table {
                states,
                values: values.into(),
            },
            bound_m,
            holder_kappa: 1.0,
            growth_iota: None,
            centered: false,
        })
    }

    /// `sum_t coef_t prod_i x_i^{p_{t,i}}` on the first embedding coordinate,
    /// checked against the declared `(M, kappa)` on `spec`'s state space.
    pub fn polynomial(
        spec: &ProcessSpec,
        arity: usize,
        terms: Vec<PolynomialTerm>,
        bound_m: f64,
        holder_kappa: f64,
    ) -> Result<Self> {
        if terms.iter().any(|t| t.powers.len() != arity) {
            return Err(Error::invalid("every polynomial term needs one power per argument"));
        }
        let dim = spec.embedding_dim();
        let obs = Self::from_fn(arity, dim, bound_m, holder_kappa, move |x: &[f64]| {
            terms
                .iter()
                .map(|t| {
                    t.coef
                        * t.powers
                            .iter()
                            .enumerate()
                            .map(|(i, &p)| x[i * dim].powi(p as i32))
                            .product::<f64>()
                })
                .sum()
        })?;
        obs.verify(spec, 10_000, 0x401d)?;
        Ok(obs)
    }

    /// Unbounded variant: `|F(x)| <= M (1 + sum |x_i|^iota)`.
    pub fn with_growth(mut self, iota: f64) -> Result<Self> {
        if !(iota > 0.0 && iota.is_finite()) {
            return Err(Error::invalid("growth exponent must be positive"));
        }
        self.growth_iota = Some(iota);
        Ok(self)
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn bound_m(&self) -> f64 {
        self.bound_m
    }

    pub fn holder_kappa(&self) -> f64 {
        self.holder_kappa
    }

    pub fn growth_iota(&self) -> Option<f64> {
        self.growth_iota
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn is_table(&self) -> bool {
        matches!(self.form, Form::Table { .. })
    }

    fn check_states(&self, spec: &ProcessSpec) -> Result<()> {
        match &self.form {
            Form::Table { states, .. } if *states != spec.alphabet_size() => Err(Error::invalid(format!(
                "table observable over {states} states used with a {}-state process",
                spec.alphabet_size()
            ))),
            Form::Points { dim, .. } if *dim != spec.embedding_dim() => Err(Error::invalid(format!(
                "observable expects dimension {dim}, process embeds in dimension {}",
                spec.embedding_dim()
            ))),
            _ => Ok(()),
        }
    }

    /// Evaluate at a tuple of states; `embedding` maps states to vectors.
    pub fn eval_states(&self, states: &[u32], embedding: &[Vec<f64>]) -> f64 {
        debug_assert_eq!(states.len(), self.arity);
        match &self.form {
            Form::Table { states: a, values } => values[states.iter().fold(0usize, |acc, &s| acc * a + s as usize)],
            Form::Points { f, dim } => {
                let mut x = Vec::with_capacity(self.arity * dim);
                for &s in states {
                    x.extend_from_slice(&embedding[s as usize]);
                }
                f(&x)
            }
        }
    }

    /// Evaluate at concatenated real arguments. Table observables are only
    /// defined on states.
    pub fn eval_points(&self, x: &[f64]) -> Result<f64> {
        match &self.form {
            Form::Points { f, dim } => {
                if x.len() != self.arity * dim {
                    return Err(Error::invalid(format!(
                        "expected {} coordinates, got {}",
                        self.arity * dim,
                        x.len()
                    )));
                }
                Ok(f(x))
            }
            Form::Table { .. } => Err(Error::Unsupported(
                "table observable evaluated at non-state inputs".into(),
            )),
        }
    }

    /// Tabulate over all state tuples of `spec`.
    pub fn tabulate(&self, spec: &ProcessSpec) -> Result<StateTable> {
        self.tabulate_with(spec, spec.embedding())
    }

    /// Tabulate using an alternative embedding of the same states (for
    /// example coarse-grained inputs).
    pub fn tabulate_with(&self, spec: &ProcessSpec, embedding: &[Vec<f64>]) -> Result<StateTable> {
        self.check_states(spec)?;
        let a = spec.alphabet_size();
        let needed = tuple_count(a, self.arity);
        if needed > TABLE_LIMIT as f64 {
            return Err(Error::BudgetExceeded {
                needed,
                budget: TABLE_LIMIT as f64,
            });
        }
        let values = match &self.form {
            Form::Table { values, .. } => values.to_vec(),
            Form::Points { .. } => {
                let mut tuple = vec![0u32; self.arity];
                (0..needed as usize)
                    .map(|i| {
                        decode(i, a, &mut tuple);
                        self.eval_states(&tuple, embedding)
                    })
                    .collect()
            }
        };
        Ok(StateTable {
            states: a,
            arity: self.arity,
            values,
        })
    }

    fn map_values(&self, g: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Form {
        match &self.form {
            Form::Table { states, values } => Form::Table {
                states: *states,
                values: values.iter().map(|&v| g(v)).collect::<Vec<_>>().into(),
            },
            Form::Points { dim, f } => {
                let f = Arc::clone(f);
                Form::Points {
                    dim: *dim,
                    f: Arc::new(move |x: &[f64]| g(f(x))),
                }
            }
        }
    }

    /// Check `|F| <= M` and, for function observables, the Holder condition
    /// `|F(x) - F(y)| <= M sum_i |x_i - y_i|^kappa` on `samples` random
    /// tuples and pairs drawn from the state space.
    pub fn verify(&self, spec: &ProcessSpec, samples: usize, seed: u64) -> Result<()> {
        self.check_states(spec)?;
        let a = spec.alphabet_size();
        let emb = spec.embedding();
        let mut rng = PathRng::seed_from_u64(seed);
        let mut x = vec![0u32; self.arity];
        let mut y = vec![0u32; self.arity];
        let slack = 1e-12 * self.bound_m.max(1.0);
        for _ in 0..samples {
            x.iter_mut().for_each(|s| *s = rng.gen_range(0..a as u32));
            y.iter_mut().for_each(|s| *s = rng.gen_range(0..a as u32));
            let fx = self.eval_states(&x, emb);
            if self.growth_iota.is_none() && fx.abs() > self.bound_m + slack {
                return Err(Error::invalid(format!(
                    "|F| = {} exceeds declared bound M = {} at states {x:?}",
                    fx.abs(),
                    self.bound_m
                )));
            }
            if let (Form::Points { .. }, None) = (&self.form, self.growth_iota) {
                let fy = self.eval_states(&y, emb);
                let rhs: f64 = x
                    .iter()
                    .zip(&y)
                    .map(|(&u, &v)| {
                        let d: f64 = emb[u as usize]
                            .iter()
                            .zip(&emb[v as usize])
                            .map(|(p, q)| (p - q).powi(2))
                            .sum::<f64>()
                            .sqrt();
                        d.powf(self.holder_kappa)
                    })
                    .sum::<f64>()
                    * self.bound_m;
                if (fx - fy).abs() > rhs + slack {
                    return Err(Error::invalid(format!(
                        "Holder condition with (M, kappa) = ({}, {}) fails between {x:?} and {y:?}",
                        self.bound_m, self.holder_kappa
                    )));
                }
            }
        }
        Ok(())
    }

    /// Reject bounded table observables whose inputs are not exactly
    /// reproduced by coarse-graining at radius `r`.
    pub fn validate_for_radius(&self, spec: &ProcessSpec, r: usize) -> Result<()> {
        if self.is_table() && spec.kind() == ProcessKind::ShiftSystem && spec.coding_width() > r {
            return Err(Error::Unsupported(format!(
                "indicator/table observable on a shift system with coding width {} > coarse-grain radius {r}",
                spec.coding_width()
            )));
        }
        Ok(())
    }
}

fn check_constants(bound_m: f64, kappa: f64) -> Result<()> {
    if !(bound_m > 0.0 && bound_m.is_finite()) {
        return Err(Error::invalid(format!("bound M = {bound_m} must be positive")));
    }
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(Error::invalid(format!("Holder exponent {kappa} must lie in (0, 1]")));
    }
    Ok(())
}

/// Product-measure mean of `f` over every state tuple, exact or by Monte Carlo.
pub fn centering_constant_with(
    f: &Observable,
    spec: &ProcessSpec,
    budget: CenteringBudget,
) -> Result<CenteringConstant> {
    f.check_states(spec)?;
    let a = spec.alphabet_size();
    let mu = spec.marginal();
    let emb = spec.embedding();
    let needed = tuple_count(a, f.arity);
    if needed <= budget.exact_limit as f64 {
        let mut tuple = vec![0u32; f.arity];
        let mut total = 0.0;
        for i in 0..needed as usize {
            decode(i, a, &mut tuple);
            let w: f64 = tuple.iter().map(|&s| mu[s as usize]).product();
            if w > 0.0 {
                total += w * f.eval_states(&tuple, emb);
            }
        }
        return Ok(CenteringConstant {
            value: total,
            stderr: 0.0,
            exact: true,
        });
    }
    if budget.mc_samples < 2 {
        return Err(Error::BudgetExceeded {
            needed,
            budget: budget.exact_limit as f64,
        });
    }
    let cum: Vec<f64> = mu
        .iter()
        .scan(0.0, |acc, p| {
            *acc += p;
            Some(*acc)
        })
        .collect();
    let mut rng = PathRng::seed_from_u64(budget.seed);
    let mut tuple = vec![0u32; f.arity];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..budget.mc_samples {
        for s in tuple.iter_mut() {
            let u: f64 = rng.gen();
            *s = cum.partition_point(|&c| c <= u).min(a - 1) as u32;
        }
        let v = f.eval_states(&tuple, emb);
        sum += v;
        sum_sq += v * v;
    }
    let n = budget.mc_samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    Ok(CenteringConstant {
        value: mean,
        stderr: (var / n).sqrt(),
        exact: false,
    })
}

pub fn centering_constant(f: &Observable, spec: &ProcessSpec) -> Result<CenteringConstant> {
    centering_constant_with(f, spec, CenteringBudget::default())
}

/// `F - F_bar`, with the bound raised by `|F_bar|`.
pub fn center(f: &Observable, spec: &ProcessSpec) -> Result<Observable> {
    let fbar = centering_constant(f, spec)?.value;
    Ok(Observable {
        form: f.map_values(move |v| v - fbar),
        bound_m: f.bound_m + fbar.abs(),
        centered: true,
        ..f.clone()
    })
}

/// `F_R(x) = F(x) 1(|F(x)| <= R)`.
pub fn truncate(f: &Observable, r: f64) -> Result<Observable> {
    if !(r > 0.0) {
        return Err(Error::invalid(format!("truncation level {r} must be positive")));
    }
    Ok(Observable {
        form: f.map_values(move |v| if v.abs() <= r { v } else { 0.0 }),
        bound_m: r,
        growth_iota: None,
        centered: false,
        ..f.clone()
    })
}

/// `F(x_1..x_l) = prod_j 1(x_j in A_j)` over a process with `states` states.
pub fn make_return_time_observable(states: usize, sets: &[Vec<u32>]) -> Result<Observable> {
    if sets.is_empty() {
        return Err(Error::EmptySet("no return sets given".into()));
    }
    let arity = sets.len();
    let mut member = vec![vec![false; states]; arity];
    for (j, set) in sets.iter().enumerate() {
        for &s in set {
            if s as usize >= states {
                return Err(Error::invalid(format!(
                    "state {s} in A_{} is outside the alphabet",
                    j + 1
                )));
            }
            member[j][s as usize] = true;
        }
        let count = member[j].iter().filter(|&&b| b).count();
        if count == 0 {
            return Err(Error::EmptySet(format!("A_{} is empty", j + 1)));
        }
        if count == states {
            return Err(Error::EmptySet(format!(
                "A_{} is the whole alphabet (complement is empty)",
                j + 1
            )));
        }
    }
    let total = tuple_count(states, arity);
    if total > TABLE_LIMIT as f64 {
        return Err(Error::BudgetExceeded {
            needed: total,
            budget: TABLE_LIMIT as f64,
        });
    }
    let mut tuple = vec![0u32; arity];
    let values = (0..total as usize)
        .map(|i| {
            decode(i, states, &mut tuple);
            let hit = tuple.iter().enumerate().all(|(j, &s)| member[j][s as usize]);
            if hit {
                1.0
            } else {
                0.0
            }
        })
        .collect();
    Observable::table(states, arity, values)
}
