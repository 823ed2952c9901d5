use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::index_family::IndexFamily;
use crate::lab::Normalization;
use crate::observables::{center, make_return_time_observable, truncate, Observable, PolynomialTerm};
use crate::processes::ProcessSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Rate,
    Variance,
    Stein,
    Inequalities,
    ReturnTimes,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Rate => "rate",
            Mode::Variance => "variance",
            Mode::Stein => "stein",
            Mode::Inequalities => "inequalities",
            Mode::ReturnTimes => "return-times",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ProcessDecl {
    Iid {
        marginal: Vec<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        embedding: Option<Vec<Vec<f64>>>,
    },
    DoeblinChain {
        transition: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        embedding: Option<Vec<Vec<f64>>>,
    },
    ShiftSystem {
        transition: Vec<Vec<f64>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        symbol_embedding: Option<Vec<Vec<f64>>>,
        coding_width: usize,
        decay: f64,
    },
}

fn default_embedding(states: usize) -> Vec<Vec<f64>> {
    (0..states).map(|i| vec![i as f64]).collect()
}

/// Attach the config location to a process construction error.
fn process_error(e: Error, matrix_field: &str) -> Error {
    match e {
        Error::NonStochastic { row, sum } => Error::config(
            format!("process.{matrix_field}[{row}]"),
            format!("row {row} sums to {sum} (or has a negative entry); rows must sum to 1"),
        ),
        Error::NotPrimitive { max_power } => Error::config(
            format!("process.{matrix_field}"),
            format!("matrix is not primitive (no strictly positive power up to {max_power})"),
        ),
        other => Error::config("process", other.to_string()),
    }
}

impl ProcessDecl {
    pub fn build(&self) -> Result<ProcessSpec> {
        match self {
            ProcessDecl::Iid { marginal, embedding } => {
                let emb = embedding.clone().unwrap_or_else(|| default_embedding(marginal.len()));
                ProcessSpec::iid(marginal.clone(), emb).map_err(|e| process_error(e, "marginal"))
            }
            ProcessDecl::DoeblinChain { transition, embedding } => {
                let emb = embedding.clone().unwrap_or_else(|| default_embedding(transition.len()));
                ProcessSpec::doeblin_chain(transition, emb).map_err(|e| process_error(e, "transition"))
            }
            ProcessDecl::ShiftSystem {
                transition,
                symbol_embedding,
                coding_width,
                decay,
            } => {
                let emb = symbol_embedding
                    .clone()
                    .unwrap_or_else(|| default_embedding(transition.len()));
                ProcessSpec::shift_system(transition, emb, *coding_width, *decay)
                    .map_err(|e| process_error(e, "transition"))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "builder", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableDecl {
    /// `F(x) = x[0]`; single argument.
    Identity,
    /// `F(x_1..x_l) = prod_i x_i[0]`.
    Product,
    /// Dense table over state tuples, first argument most significant.
    Table { values: Vec<f64> },
    Polynomial {
        terms: Vec<PolynomialTerm>,
        bound_m: f64,
        #[serde(default = "one")]
        holder_kappa: f64,
    },
    /// `prod_j 1(x_j in A_j)`.
    ReturnTime { sets: Vec<Vec<u32>> },
}

fn one() -> f64 {
    1.0
}

impl ObservableDecl {
    /// Build the raw (uncentered) observable with `ell` arguments on `spec`.
    pub fn build(&self, spec: &ProcessSpec, ell: usize) -> Result<Observable> {
        let emb = spec.embedding();
        let sup = emb
            .iter()
            .map(|v| v[0].abs())
            .fold(0.0, f64::max)
            .max(f64::MIN_POSITIVE);
        let field = |e: Error| Error::config("observable", e.to_string());
        match self {
            ObservableDecl::Identity => {
                if ell != 1 {
                    return Err(Error::config(
                        "observable",
                        "identity needs an index family with one map",
                    ));
                }
                // Tabulated over states: exact and fast.
                let values = emb.iter().map(|v| v[0]).collect();
                Observable::table(spec.alphabet_size(), 1, values).map_err(field)
            }
            ObservableDecl::Product => {
                let a = spec.alphabet_size();
                let count = (a as f64).powi(ell as i32);
                if count > crate::observables::TABLE_LIMIT as f64 {
                    let dim = spec.embedding_dim();
                    return Observable::from_fn(ell, dim, sup.powi(ell as i32), 1.0, move |x: &[f64]| {
                        (0..ell).map(|i| x[i * dim]).product()
                    })
                    .map_err(field);
                }
                let mut values = Vec::with_capacity(count as usize);
                for code in 0..count as usize {
                    let mut c = code;
                    let mut prod = 1.0;
                    for _ in 0..ell {
                        prod *= emb[c % a][0];
                        c /= a;
                    }
                    values.push(prod);
                }
                Observable::table(a, ell, values).map_err(field)
            }
            ObservableDecl::Table { values } => Observable::table(spec.alphabet_size(), ell, values.clone())
                .map_err(|e| Error::config("observable.values", e.to_string())),
            ObservableDecl::Polynomial {
                terms,
                bound_m,
                holder_kappa,
            } => Observable::polynomial(spec, ell, terms.clone(), *bound_m, *holder_kappa)
                .map_err(|e| Error::config("observable.terms", e.to_string())),
            ObservableDecl::ReturnTime { sets } => {
                if sets.len() != ell {
                    return Err(Error::config(
                        "observable.sets",
                        format!("{} sets for an index family with {ell} maps", sets.len()),
                    ));
                }
                make_return_time_observable(spec.alphabet_size(), sets)
                    .map_err(|e| Error::config("observable.sets", e.to_string()))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum IndexFamilyDecl {
    Linear { ell: usize },
    Polynomial { coeffs: Vec<Vec<i64>> },
}

impl IndexFamilyDecl {
    pub fn build(&self) -> Result<IndexFamily> {
        match self {
            IndexFamilyDecl::Linear { ell } => IndexFamily::linear(*ell),
            IndexFamilyDecl::Polynomial { coeffs } => IndexFamily::polynomial(coeffs.clone()),
        }
        .map_err(|e| Error::config("index_family", e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Replications {
    #[serde(rename = "T")]
    pub t: usize,
    #[serde(rename = "T_cal")]
    pub t_cal: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Options {
    /// Subtract the product-measure mean before summing.
    pub center: bool,
    /// Replace `F` by `F 1(|F| <= R)` before centering.
    pub truncation: Option<f64>,
    pub normalization: Normalization,
    /// Free constant `C` of the theoretical bound curve.
    pub bound_constant: f64,
    /// Stein block length; default `ceil(4 A ln(N + 1))`.
    pub block_length: Option<u64>,
    pub independent_moments: bool,
    pub c0_prime: Option<f64>,
    pub block_instances: usize,
    pub smoothing_instances: usize,
    /// Horizon for neighborhood dumps; default the largest grid point.
    pub neighborhood_horizon: Option<u64>,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            center: true,
            truncation: None,
            normalization: Normalization::SelfNormalized,
            bound_constant: 1.0,
            block_length: None,
            independent_moments: false,
            c0_prime: None,
            block_instances: 200,
            smoothing_instances: 500,
            neighborhood_horizon: None,
        }
    }
}

/// One experiment, as a single JSON document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    pub process: ProcessDecl,
    pub observable: ObservableDecl,
    pub index_family: IndexFamilyDecl,
    pub grid: Vec<u64>,
    pub replications: Replications,
    pub master_seed: u64,
    pub output: String,
    #[serde(default)]
    pub options: Options,
}

/// Built objects of a validated config.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub spec: ProcessSpec,
    pub family: IndexFamily,
    /// Observable as summed: truncated and centered per the options.
    pub observable: Observable,
    /// Observable before centering.
    pub raw: Observable,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)
            .map_err(|e| Error::config(format!("line {}, column {}", e.line(), e.column()), e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Structural checks that do not need the built objects.
    pub fn validate(&self) -> Result<()> {
        if self.mode != Mode::Inequalities {
            if self.grid.is_empty() {
                return Err(Error::config("grid", "the N grid is empty"));
            }
            if let Some(k) = self.grid.windows(2).position(|w| w[0] >= w[1]) {
                return Err(Error::config(
                    format!("grid[{}]", k + 1),
                    format!(
                        "N grid must be strictly increasing ({} after {})",
                        self.grid[k + 1],
                        self.grid[k]
                    ),
                ));
            }
            if self.grid[0] == 0 {
                return Err(Error::config("grid[0]", "N must be positive"));
            }
        }
        let t = self.replications.t;
        match self.mode {
            Mode::Rate | Mode::ReturnTimes if t < 1000 => {
                return Err(Error::config(
                    "replications.T",
                    format!("rate experiments need T >= 1000, got {t}"),
                ))
            }
            Mode::Stein if t < crate::lab::MIN_STEIN_REPLICATIONS => {
                return Err(Error::config(
                    "replications.T",
                    format!("Stein terms need T >= 1000, got {t}"),
                ))
            }
            Mode::Variance if self.grid.len() < 3 => {
                return Err(Error::config(
                    "grid",
                    "variance experiments need at least 3 grid points",
                ))
            }
            _ => {}
        }
        let needs_cal = match self.mode {
            Mode::Variance | Mode::Stein => true,
            Mode::Rate | Mode::ReturnTimes => self.options.normalization == Normalization::SelfNormalized,
            Mode::Inequalities => false,
        };
        if needs_cal && self.replications.t_cal < crate::lab::MIN_CALIBRATION {
            return Err(Error::config(
                "replications.T_cal",
                format!("calibration needs T_cal >= 100, got {}", self.replications.t_cal),
            ));
        }
        Ok(())
    }

    /// Build the process, index family and observable.
    pub fn resolve(&self) -> Result<Resolved> {
        let spec = self.process.build()?;
        let family = self.index_family.build()?;
        let top = self.grid.last().copied().unwrap_or(1);
        family
            .validate(top)
            .map_err(|e| Error::config("index_family", e.to_string()))?;
        let mut raw = self.observable.build(&spec, family.ell())?;
        if let Some(r) = self.options.truncation {
            raw = truncate(&raw, r).map_err(|e| Error::config("options.truncation", e.to_string()))?;
        }
        let observable = if self.options.center || self.mode == Mode::ReturnTimes {
            center(&raw, &spec)?
        } else {
            raw.clone()
        };
        Ok(Resolved {
            spec,
            family,
            observable,
            raw,
        })
    }
}
