//! Finite-(n, ε) topological pressure.
//!
//! With ε = 2^{−m}, a maximal (ω, ε, n)-separated set holds exactly one
//! point per admissible (n+m−1)-cylinder, and f_n is constant on n-cylinders,
//! so the separated-set supremum is an exact finite sum:
//!
//! ```text
//! log π(ω, 2^{−m}, n) = log Σ_{|w| = n+m−1} exp f_n(ω, w)
//! ```
//!
//! Averaging over base words of length n+m−1 (exactly or by sampling)
//! gives (1/n)∫ log π(ω, ε, n) dP.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base::BaseChain;
use crate::bundle::{separated, BundleSft};
use crate::error::{Error, Result};
use crate::numeric::{kahan_sum, linear_fit, Budget, LogSumExp};
use crate::potentials::SubadditivePotential;

/// Tolerance for the m-monotonicity check on pressure curves.
pub const MONOTONE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Mode {
    Exact,
    MonteCarlo { samples: usize, seed: u64 },
}

impl Mode {
    pub fn label(&self) -> &'static str {
        match self {
            Mode::Exact => "exact",
            Mode::MonteCarlo { .. } => "monte-carlo",
        }
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            Mode::Exact => None,
            Mode::MonteCarlo { seed, .. } => Some(*seed),
        }
    }
}

/// How a per-base-word statistic turns partition sums into a pressure value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Estimator {
    /// (1/n) log π(ω, ε, n).
    #[default]
    Raw,
    /// (log π(ω, ε, n) − log π(ω, ε, from)) / (n − from): the two-depth
    /// Richardson combination, which removes any c/n term from the raw value.
    Increment { from: usize },
}

impl Estimator {
    /// Increment estimator from ⌊n/2⌋ to n (raw when n = 1).
    pub fn richardson(n: usize) -> Self {
        if n < 2 {
            Estimator::Raw
        } else {
            Estimator::Increment { from: n / 2 }
        }
    }
}

/// Estimator rule applied at every depth of a curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    #[default]
    Raw,
    Richardson,
}

impl EstimatorKind {
    pub fn at(self, n: usize) -> Estimator {
        match self {
            EstimatorKind::Raw => Estimator::Raw,
            EstimatorKind::Richardson => Estimator::richardson(n),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureEstimate {
    /// ε = 2^{−m}.
    pub eps_exponent: usize,
    pub depth: usize,
    /// Nats per step.
    pub value: f64,
    pub std_error: f64,
    pub mode: Mode,
    pub estimator: Estimator,
    /// Number of base words that entered the average.
    pub base_words: usize,
}

fn check_depths(base: &[usize], n: usize, m: usize) -> Result<usize> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidInput("n and m must be ≥ 1".into()));
    }
    let len = n + m - 1;
    if base.len() < len {
        return Err(Error::WordTooShort {
            len: base.len(),
            needed: len,
        });
    }
    Ok(len)
}

fn check_table(table: &[Vec<f64>], bundle: &BundleSft) -> Result<()> {
    if table.len() != bundle.num_base_symbols()
        || table.iter().any(|r| r.len() != bundle.alphabet_size())
    {
        return Err(Error::ShapeMismatch(format!(
            "potential table is {}×{}, bundle needs {}×{}",
            table.len(),
            table.first().map(Vec::len).unwrap_or(0),
            bundle.num_base_symbols(),
            bundle.alphabet_size()
        )));
    }
    Ok(())
}

/// log π_T(F)(ω, 2^{−m}, n) for the base word `base` (length ≥ n+m−1).
///
/// Birkhoff-sum potentials go through a log-space transfer recursion, which
/// scales linearly in n; everything else enumerates the n-prefixes and
/// weights each by its number of (m−1)-step continuations.
pub fn log_partition_sum(
    bundle: &BundleSft,
    potential: &dyn SubadditivePotential,
    base: &[usize],
    n: usize,
    m: usize,
    budget: &Budget,
) -> Result<f64> {
    let len = check_depths(base, n, m)?;
    match potential.additive_table() {
        Some(table) => {
            check_table(&table, bundle)?;
            transfer_log_sum(bundle, &table, &base[..len], n)
        }
        None => log_partition_sum_by_enumeration(bundle, potential, base, n, m, budget),
    }
}

fn transfer_log_sum(
    bundle: &BundleSft,
    table: &[Vec<f64>],
    base: &[usize],
    n: usize,
) -> Result<f64> {
    let size = bundle.alphabet_size();
    let weight = |k: usize, a: usize| if k < n { table[base[k]][a] } else { 0.0 };
    let mut alpha: Vec<f64> = (0..size).map(|a| weight(0, a)).collect();
    for k in 0..base.len() - 1 {
        let s = base[k];
        alpha = (0..size)
            .map(|b| {
                let mut acc = LogSumExp::new();
                for a in 0..size {
                    if bundle.allows(s, a, b) {
                        acc.add(alpha[a]);
                    }
                }
                acc.value()
                    .map_or(f64::NEG_INFINITY, |v| v + weight(k + 1, b))
            })
            .collect();
    }
    let mut total = LogSumExp::new();
    alpha.iter().for_each(|&x| total.add(x));
    total.value().ok_or(Error::EmptyFiber)
}

/// Same quantity as [`log_partition_sum`] but always by explicit
/// enumeration of n-prefixes, whatever the potential.
pub fn log_partition_sum_by_enumeration(
    bundle: &BundleSft,
    potential: &dyn SubadditivePotential,
    base: &[usize],
    n: usize,
    m: usize,
    budget: &Budget,
) -> Result<f64> {
    check_depths(base, n, m)?;
    let log_counts: Vec<f64> = bundle
        .continuation_counts(base, n - 1, m - 1)
        .into_iter()
        .map(f64::ln)
        .collect();
    let mut acc = LogSumExp::new();
    let mut failure = None;
    bundle.visit_words(base, n, budget, |w| {
        if failure.is_some() {
            return;
        }
        match potential.eval(base, w, n) {
            Ok(f) => acc.add(f + log_counts[w[n - 1]]),
            Err(e) => failure = Some(e),
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    acc.value().ok_or(Error::EmptyFiber)
}

fn per_word_statistic(
    bundle: &BundleSft,
    potential: &dyn SubadditivePotential,
    base: &[usize],
    n: usize,
    m: usize,
    estimator: Estimator,
    budget: &Budget,
) -> Result<f64> {
    let top = log_partition_sum(bundle, potential, base, n, m, budget)?;
    match estimator {
        Estimator::Raw => Ok(top / n as f64),
        Estimator::Increment { from } => {
            let low = log_partition_sum(bundle, potential, base, from, m, budget)?;
            Ok((top - low) / (n - from) as f64)
        }
    }
}

/// (1/n)∫ log π_T(F)(ω, 2^{−m}, n) dP(ω).
pub fn expected_log_sum(
    chain: &BaseChain,
    bundle: &BundleSft,
    potential: &dyn SubadditivePotential,
    n: usize,
    m: usize,
    mode: Mode,
    budget: &Budget,
) -> Result<PressureEstimate> {
    estimate_pressure(chain, bundle, potential, n, m, mode, Estimator::Raw, budget)
}

/// Pressure at depth n and ε = 2^{−m} with a chosen estimator.
///
/// Exact mode sums over every admissible base word of length n+m−1;
/// Monte Carlo averages over `samples` stationary paths, path i drawn from
/// ChaCha stream i of `seed`. Per-word results are reduced in index order,
/// so output does not depend on thread scheduling.
#[allow(clippy::too_many_arguments)]
pub fn estimate_pressure(
    chain: &BaseChain,
    bundle: &BundleSft,
    potential: &dyn SubadditivePotential,
    n: usize,
    m: usize,
    mode: Mode,
    estimator: Estimator,
    budget: &Budget,
) -> Result<PressureEstimate> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidInput("n and m must be ≥ 1".into()));
    }
    if let Estimator::Increment { from } = estimator {
        if from == 0 || from >= n {
            return Err(Error::InvalidInput(format!(
                "increment estimator needs 1 ≤ from < n, got from = {from}, n = {n}"
            )));
        }
    }
    if chain.num_states() != bundle.num_base_symbols() {
        return Err(Error::ShapeMismatch(format!(
            "base chain has {} states, bundle has {} matrices",
            chain.num_states(),
            bundle.num_base_symbols()
        )));
    }
    let len = n + m - 1;
    let (value, std_error, base_words) = match mode {
        Mode::Exact => {
            let words = chain.enumerate_words(len, budget)?;
            let stats = words
                .par_iter()
                .map(|u| per_word_statistic(bundle, potential, &u.symbols, n, m, estimator, budget))
                .collect::<Result<Vec<f64>>>()?;
            let value = kahan_sum(words.iter().zip(&stats).map(|(u, g)| u.probability * g));
            (value, 0.0, words.len())
        }
        Mode::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(Error::InvalidSampleCount(samples));
            }
            let stats = (0..samples)
                .into_par_iter()
                .map(|i| {
                    let u = chain.sample_path_stream(len, seed, i as u64);
                    per_word_statistic(bundle, potential, &u.symbols, n, m, estimator, budget)
                })
                .collect::<Result<Vec<f64>>>()?;
            let count = samples as f64;
            let mean = kahan_sum(stats.iter().copied()) / count;
            let std_error = if samples > 1 {
                let var = kahan_sum(stats.iter().map(|g| (g - mean) * (g - mean))) / (count - 1.0);
                (var / count).sqrt()
            } else {
                0.0
            };
            (mean, std_error, samples)
        }
    };
    if !value.is_finite() {
        return Err(Error::EmptyFiber);
    }
    Ok(PressureEstimate {
        eps_exponent: m,
        depth: n,
        value,
        std_error,
        mode,
        estimator,
        base_words,
    })
}

/// value(n, m) ≈ intercept + slope / n at fixed m.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InverseDepthFit {
    pub eps_exponent: usize,
    pub intercept: f64,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PressureCurve {
    /// Row-major over (n, m): n outer, m inner.
    pub rows: Vec<PressureEstimate>,
    /// Value at the largest n and largest m.
    pub extrapolated: f64,
    pub fits: Vec<InverseDepthFit>,
    /// Largest drop value(n, m_j) − value(n, m_{j+1}) over the grid.
    pub worst_monotonicity_violation: f64,
    pub monotone_in_m: bool,
}

impl PressureCurve {
    pub fn value(&self, n: usize, m: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.depth == n && r.eps_exponent == m)
            .map(|r| r.value)
    }
}

fn check_increasing(name: &str, list: &[usize]) -> Result<()> {
    if list.is_empty() || list[0] == 0 || list.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidInput(format!(
            "{name} must be a non-empty strictly increasing list of positive integers"
        )));
    }
    Ok(())
}

/// Pressure on an (n, m) grid with per-m 1/n fits and an m-monotonicity check.
#[allow(clippy::too_many_arguments)]
pub fn pressure_curve(
    chain: &BaseChain,
    bundle: &BundleSft,
    potential: &dyn SubadditivePotential,
    n_list: &[usize],
    m_list: &[usize],
    mode: Mode,
    estimator: EstimatorKind,
    budget: &Budget,
) -> Result<PressureCurve> {
    check_increasing("n list", n_list)?;
    check_increasing("m list", m_list)?;
    let mut rows = Vec::with_capacity(n_list.len() * m_list.len());
    for &n in n_list {
        for &m in m_list {
            rows.push(estimate_pressure(
                chain,
                bundle,
                potential,
                n,
                m,
                mode,
                estimator.at(n),
                budget,
            )?);
        }
    }
    let width = m_list.len();
    let mut worst = f64::NEG_INFINITY;
    for chunk in rows.chunks(width) {
        for pair in chunk.windows(2) {
            worst = worst.max(pair[0].value - pair[1].value);
        }
    }
    let fits = m_list
        .iter()
        .enumerate()
        .map(|(j, &m)| {
            let xs: Vec<f64> = n_list.iter().map(|&n| 1.0 / n as f64).collect();
            let ys: Vec<f64> = (0..n_list.len())
                .map(|i| rows[i * width + j].value)
                .collect();
            let (intercept, slope) = linear_fit(&xs, &ys);
            InverseDepthFit {
                eps_exponent: m,
                intercept,
                slope,
            }
        })
        .collect();
    let extrapolated = rows.last().expect("non-empty grid").value;
    let worst = if width > 1 { worst } else { 0.0 };
    Ok(PressureCurve {
        rows,
        extrapolated,
        fits,
        worst_monotonicity_violation: worst,
        monotone_in_m: worst <= MONOTONE_TOL,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedySelection {
    pub selected: Vec<Vec<usize>>,
    /// log Σ_{y ∈ G} exp f_n(ω, y).
    pub log_sum: f64,
    pub candidates: usize,
}

/// Greedy construction of a maximal separated set: candidates are the
/// (n+m_res−1)-cylinders; repeatedly take the remaining candidate with the
/// largest f_n and discard every candidate within Bowen distance ≤ 1 of it
/// at ε = 2^{−m_sep}.
#[allow(clippy::too_many_arguments)]
pub fn greedy_maximal_separated(
    bundle: &BundleSft,
    potential: &dyn SubadditivePotential,
    base: &[usize],
    n: usize,
    m_sep: usize,
    m_res: usize,
    budget: &Budget,
) -> Result<GreedySelection> {
    if m_sep == 0 || m_res < m_sep {
        return Err(Error::InvalidInput(format!(
            "need m_res ≥ m_sep ≥ 1, got m_sep = {m_sep}, m_res = {m_res}"
        )));
    }
    let len = check_depths(base, n, m_res)?;
    let candidates = bundle.enumerate_cylinders(base, len, budget)?;
    if candidates.is_empty() {
        return Err(Error::EmptyFiber);
    }
    let values = candidates
        .iter()
        .map(|w| potential.eval(base, w, n))
        .collect::<Result<Vec<f64>>>()?;
    let mut order: Vec<usize> = (0..candidates.len()).collect();
    order.sort_by(|&i, &j| values[j].total_cmp(&values[i]).then(i.cmp(&j)));

    let mut alive = vec![true; candidates.len()];
    let mut chosen = Vec::new();
    for &i in &order {
        if !alive[i] {
            continue;
        }
        chosen.push(i);
        for &j in &order {
            if alive[j] && !separated(&candidates[j], &candidates[i], n, m_sep)? {
                alive[j] = false;
            }
        }
    }
    let mut acc = LogSumExp::new();
    chosen.iter().for_each(|&i| acc.add(values[i]));
    Ok(GreedySelection {
        log_sum: acc.value().ok_or(Error::EmptyFiber)?,
        selected: chosen.iter().map(|&i| candidates[i].clone()).collect(),
        candidates: candidates.len(),
    })
}

/// Per-base-word partition sums for T at depth kn and for T^k at depth n,
/// both at ε = 2^{−m} over (kn+m−1)-cylinders. Returns (log π_T, log π_{T^k}).
pub fn power_partition_sums(
    bundle: &BundleSft,
    potential: &dyn SubadditivePotential,
    base: &[usize],
    k: usize,
    n: usize,
    m: usize,
    budget: &Budget,
) -> Result<(f64, f64)> {
    if k == 0 {
        return Err(Error::InvalidInput("power k must be ≥ 1".into()));
    }
    let len = check_depths(base, k * n, m)?;
    // T^k separates on coordinates ki .. ki+m−1 for i < n.
    let mut window = vec![false; len];
    for i in 0..n {
        for j in k * i..(k * i + m).min(len) {
            window[j] = true;
        }
    }
    let mut full = LogSumExp::new();
    let mut classes: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    let mut failure = None;
    bundle.visit_words(base, len, budget, |w| {
        if failure.is_some() {
            return;
        }
        match potential.eval(base, w, k * n) {
            Ok(f) => {
                full.add(f);
                let key: Vec<usize> = w
                    .iter()
                    .zip(&window)
                    .filter(|(_, &on)| on)
                    .map(|(&a, _)| a)
                    .collect();
                classes
                    .entry(key)
                    .and_modify(|v| *v = v.max(f))
                    .or_insert(f);
            }
            Err(e) => failure = Some(e),
        }
    })?;
    if let Some(e) = failure {
        return Err(e);
    }
    let mut coarse = LogSumExp::new();
    classes.values().for_each(|&v| coarse.add(v));
    Ok((
        full.value().ok_or(Error::EmptyFiber)?,
        coarse.value().ok_or(Error::EmptyFiber)?,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLemmaReport {
    pub k: usize,
    pub n: usize,
    pub m: usize,
    /// min over base words of log π_T(F)(ω, ε, kn) − log π_{T^k}(F^{(k)})(ω, ε, n).
    pub min_slack: f64,
    /// Probability-weighted (exact) or sample-mean slack.
    pub mean_slack: f64,
    pub base_words: usize,
}

/// Slack in π_T(F)(ω, ε, kn) ≥ π_{T^k}(F^{(k)})(ω, ε, n), the per-fiber
/// inequality behind π_{T^k}(F^{(k)}) ≤ k π_T(F).
#[allow(clippy::too_many_arguments)]
pub fn check_power_lemma(
    chain: &BaseChain,
    bundle: &BundleSft,
    potential: &dyn SubadditivePotential,
    k: usize,
    n: usize,
    m: usize,
    mode: Mode,
    budget: &Budget,
) -> Result<PowerLemmaReport> {
    if n == 0 || m == 0 || k == 0 {
        return Err(Error::InvalidInput("k, n and m must be ≥ 1".into()));
    }
    let len = k * n + m - 1;
    let words: Vec<(Vec<usize>, f64)> = match mode {
        Mode::Exact => chain
            .enumerate_words(len, budget)?
            .into_iter()
            .map(|u| (u.symbols, u.probability))
            .collect(),
        Mode::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(Error::InvalidSampleCount(0));
            }
            (0..samples)
                .map(|i| {
                    (
                        chain.sample_path_stream(len, seed, i as u64).symbols,
                        1.0 / samples as f64,
                    )
                })
                .collect()
        }
    };
    let slacks = words
        .par_iter()
        .map(|(u, _)| {
            power_partition_sums(bundle, potential, u, k, n, m, budget).map(|(t, tk)| t - tk)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(PowerLemmaReport {
        k,
        n,
        m,
        min_slack: slacks.iter().copied().fold(f64::INFINITY, f64::min),
        mean_slack: kahan_sum(words.iter().zip(&slacks).map(|((_, p), s)| p * s)),
        base_words: words.len(),
    })
}
