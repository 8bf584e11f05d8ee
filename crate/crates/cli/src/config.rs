use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use subpress_core::potentials::CocyclePotential;
use subpress_core::{
    AdditivePotential, BaseChain, BundleSft, EstimatorKind, Mode, NormKind, RandomMarkovMeasure,
    ScaledInverseNormPotential, SubadditivePotential,
};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verb {
    Pressure,
    VpCheck,
    Lemmas,
    Dimension,
    Convergence,
    Diagnose,
}

impl Verb {
    pub fn name(self) -> &'static str {
        match self {
            Verb::Pressure => "pressure",
            Verb::VpCheck => "vp-check",
            Verb::Lemmas => "lemmas",
            Verb::Dimension => "dimension",
            Verb::Convergence => "convergence",
            Verb::Diagnose => "diagnose",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ModeKind {
    #[default]
    Exact,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub base: BaseConfig,
    pub bundle: BundleConfig,
    pub potential: PotentialConfig,
    #[serde(default)]
    pub measures: MeasuresConfig,
    pub run: RunConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseConfig {
    pub transition: Vec<Vec<f64>>,
}

impl Default for BaseConfig {
    fn default() -> Self {
        Self {
            transition: vec![vec![1.0]],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BundleConfig {
    /// 0/1 admissibility matrices indexed [s][a][b].
    pub matrices: Vec<Vec<Vec<u8>>>,
    #[serde(default)]
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PotentialConfig {
    Additive {
        /// φ(s, a) indexed [s][a].
        table: Vec<Vec<f64>>,
    },
    Cocycle {
        #[serde(flatten)]
        generators: Generators,
    },
    ScaledInverseNorm {
        #[serde(flatten)]
        generators: Generators,
        #[serde(default = "one")]
        t: f64,
    },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Generators {
    /// Full matrices indexed [s][a][row][col].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrices: Option<Vec<Vec<Vec<Vec<f64>>>>>,
    /// 1×1 generators indexed [s][a].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scalars: Option<Vec<Vec<f64>>>,
    /// diag(e^{x₁}, …, e^{x_d}) generators indexed [s][a][i].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagonal_exp: Option<Vec<Vec<Vec<f64>>>>,
    #[serde(default = "default_norm")]
    pub norm: NormKind,
}

fn default_norm() -> NormKind {
    NormKind::Spectral
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct MeasuresConfig {
    #[serde(default)]
    pub list: Vec<MeasureSpec>,
    /// Include the measure uniform over admissible successors.
    #[serde(default)]
    pub uniform: bool,
    /// Number of random valid measures drawn from the run seed.
    #[serde(default)]
    pub random: usize,
    /// Run the pattern-search optimizer from the uniform measure.
    #[serde(default)]
    pub optimize: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasureSpec {
    /// Q_s indexed [s][a][b].
    pub transition: Vec<Vec<Vec<f64>>>,
    /// π_s indexed [s][a]; solved from the Q_s when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub verb: Verb,
    #[serde(default = "default_n_list")]
    pub n_list: Vec<usize>,
    #[serde(default = "default_m_list")]
    pub m_list: Vec<usize>,
    #[serde(default)]
    pub mode: ModeKind,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    /// Enumeration cap; falls back to SUBPRESS_BUDGET, then the built-in default.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<u64>,
    #[serde(default)]
    pub estimator: EstimatorKind,
    /// Depth N for F* brackets and the optimizer objective.
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_pressure: Option<f64>,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_tol")]
    pub tol_t: f64,
    #[serde(default = "default_tol")]
    pub tol_p: f64,
    #[serde(default = "default_iter_cap")]
    pub iter_cap: usize,
    #[serde(default = "default_opt_tol")]
    pub opt_tol: f64,
    #[serde(default = "default_k_list")]
    pub k_list: Vec<usize>,
    /// Random samples for the subadditivity and greedy suites.
    #[serde(default = "default_trials")]
    pub trials: usize,
}

fn default_n_list() -> Vec<usize> {
    vec![2, 4, 8]
}
fn default_m_list() -> Vec<usize> {
    vec![1]
}
fn default_samples() -> usize {
    1000
}
fn default_depth() -> usize {
    8
}
fn default_t_max() -> f64 {
    4.0
}
fn default_tol() -> f64 {
    1e-10
}
fn default_iter_cap() -> usize {
    500
}
fn default_opt_tol() -> f64 {
    1e-13
}
fn default_k_list() -> Vec<usize> {
    vec![1, 2, 3]
}
fn default_trials() -> usize {
    1000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "default_prefix")]
    pub prefix: String,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}
fn default_prefix() -> String {
    "subpress".into()
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_dir(),
            prefix: default_prefix(),
        }
    }
}

/// The loaded system and potential, validated.
pub struct System {
    pub chain: BaseChain,
    pub bundle: BundleSft,
    pub potential: Arc<dyn SubadditivePotential>,
    pub cocycle: Option<Arc<CocyclePotential>>,
}

fn config_error(path: &str, err: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{path}: {err}"))
}

/// Read a TOML config, a JSON config, or a JSON report (its `config` key).
pub fn load_tree(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e == "json");
    if is_json {
        let mut v: Value = serde_json::from_str(&text)
            .map_err(|e| config_error(&path.display().to_string(), e))?;
        if let Some(inner) = v.get_mut("config") {
            return Ok(inner.take());
        }
        Ok(v)
    } else {
        let table: toml::Table =
            toml::from_str(&text).map_err(|e| config_error(&path.display().to_string(), e))?;
        serde_json::to_value(table).map_err(|e| config_error(&path.display().to_string(), e))
    }
}

fn parse_override_value(raw: &str) -> Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .and_then(|v| serde_json::to_value(v).ok())
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Apply `a.b.c=value`; the value is read as TOML, falling back to a string.
pub fn apply_override(tree: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (path, raw) = assignment.split_once('=').ok_or_else(|| {
        CliError::Config(format!(
            "override `{assignment}` is not of the form path=value"
        ))
    })?;
    let keys: Vec<&str> = path.trim().split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Config(format!(
            "override `{assignment}` has an empty key"
        )));
    }
    let mut node = tree;
    for (i, key) in keys.iter().enumerate() {
        let map = node
            .as_object_mut()
            .ok_or_else(|| CliError::Config(format!("{}: not a table", keys[..i].join("."))))?;
        if i + 1 == keys.len() {
            map.insert(key.to_string(), parse_override_value(raw.trim()));
            return Ok(());
        }
        node = map
            .entry(key.to_string())
            .or_insert_with(|| Value::Object(Default::default()));
    }
    Ok(())
}

pub fn parse_config(tree: Value) -> Result<ExperimentConfig, CliError> {
    serde_path_to_error::deserialize(tree).map_err(|e| {
        let path = e.path().to_string();
        config_error(&path, e.into_inner())
    })
}

impl Generators {
    fn build(&self, key: &str) -> Result<CocyclePotential, CliError> {
        let given = [
            self.matrices.is_some(),
            self.scalars.is_some(),
            self.diagonal_exp.is_some(),
        ]
        .iter()
        .filter(|&&x| x)
        .count();
        if given != 1 {
            return Err(config_error(
                key,
                "exactly one of `matrices`, `scalars`, `diagonal_exp` must be given",
            ));
        }
        let built = if let Some(m) = &self.matrices {
            CocyclePotential::from_rows(m, self.norm)
                .map_err(|e| config_error(&format!("{key}.matrices"), e))
        } else if let Some(s) = &self.scalars {
            CocyclePotential::scalar(s).map_err(|e| config_error(&format!("{key}.scalars"), e))
        } else {
            let d = self.diagonal_exp.as_ref().expect("counted above");
            CocyclePotential::diagonal_exp(d, self.norm)
                .map_err(|e| config_error(&format!("{key}.diagonal_exp"), e))
        }?;
        Ok(built)
    }
}

fn check_potential_shape(
    rows: usize,
    cols: usize,
    bundle: &BundleSft,
    key: &str,
) -> Result<(), CliError> {
    if rows != bundle.num_base_symbols() || cols != bundle.alphabet_size() {
        return Err(config_error(
            key,
            format!(
                "potential is indexed {rows}×{cols} but the bundle has {} base symbols and {} fiber symbols",
                bundle.num_base_symbols(),
                bundle.alphabet_size()
            ),
        ));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn mode(&self) -> Mode {
        match self.run.mode {
            ModeKind::Exact => Mode::Exact,
            ModeKind::MonteCarlo => Mode::MonteCarlo {
                samples: self.run.samples,
                seed: self.run.seed,
            },
        }
    }

    pub fn system(&self) -> Result<System, CliError> {
        let chain = BaseChain::new(self.base.transition.clone())
            .map_err(|e| config_error("base.transition", e))?;
        let bundle = BundleSft::from_ints(&self.bundle.matrices, self.bundle.strict)
            .map_err(|e| config_error("bundle.matrices", e))?;
        if bundle.num_base_symbols() != chain.num_states() {
            return Err(config_error(
                "bundle.matrices",
                format!(
                    "{} matrices given for a base chain with {} states",
                    bundle.num_base_symbols(),
                    chain.num_states()
                ),
            ));
        }
        let (potential, cocycle): (Arc<dyn SubadditivePotential>, Option<Arc<CocyclePotential>>) =
            match &self.potential {
                PotentialConfig::Additive { table } => {
                    let pot = AdditivePotential::new(table.clone())
                        .map_err(|e| config_error("potential.table", e))?;
                    check_potential_shape(table.len(), table[0].len(), &bundle, "potential.table")?;
                    (Arc::new(pot), None)
                }
                PotentialConfig::Cocycle { generators } => {
                    let c = Arc::new(generators.build("potential")?);
                    check_potential_shape(
                        c.matrices().len(),
                        c.matrices()[0].len(),
                        &bundle,
                        "potential",
                    )?;
                    (c.clone(), Some(c))
                }
                PotentialConfig::ScaledInverseNorm { generators, t } => {
                    let c = Arc::new(generators.build("potential")?);
                    check_potential_shape(
                        c.matrices().len(),
                        c.matrices()[0].len(),
                        &bundle,
                        "potential",
                    )?;
                    let pot = ScaledInverseNormPotential::new(c.clone(), *t)
                        .map_err(|e| config_error("potential.t", e))?;
                    (Arc::new(pot), Some(c))
                }
            };
        Ok(System {
            chain,
            bundle,
            potential,
            cocycle,
        })
    }

    /// Listed measures, then the uniform one, then the random ones.
    pub fn measures(&self, sys: &System) -> Result<Vec<RandomMarkovMeasure>, CliError> {
        let mut out = Vec::new();
        for (i, listed) in self.measures.list.iter().enumerate() {
            let key = format!("measures.list[{i}]");
            let meas = match &listed.initial {
                Some(init) => RandomMarkovMeasure::new(init.clone(), listed.transition.clone()),
                None => RandomMarkovMeasure::auto_consistent(&sys.chain, listed.transition.clone()),
            }
            .map_err(|e| config_error(&key, e))?;
            let check = meas
                .validate(&sys.chain, &sys.bundle)
                .map_err(|e| config_error(&key, e))?;
            if !check.valid {
                return Err(config_error(&key, format!("invalid measure: {check:?}")));
            }
            out.push(meas);
        }
        if self.measures.uniform {
            out.push(
                RandomMarkovMeasure::uniform(&sys.chain, &sys.bundle)
                    .map_err(|e| config_error("measures.uniform", e))?,
            );
        }
        if self.measures.random > 0 {
            out.extend(
                subpress_core::fixtures::seeded_measures(
                    &sys.chain,
                    &sys.bundle,
                    self.measures.random,
                    self.run.seed,
                )
                .map_err(|e| config_error("measures.random", e))?,
            );
        }
        Ok(out)
    }
}
