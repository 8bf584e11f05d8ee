//! Both sides of the relativized variational principle
//! π_T(F) = sup_μ { h_μ^{(r)}(T) + F*(μ) } over the Markov measure family,
//! a derivative-free search for the maximizing measure, and the
//! finite-depth Gibbs construction used as a diagnostic.

use serde::{Deserialize, Serialize};

use crate::base::BaseChain;
use crate::bundle::BundleSft;
use crate::error::{Error, Result};
use crate::measures::{FStarBracket, RandomMarkovMeasure};
use crate::numeric::{kahan_sum, Budget, LogSumExp};
use crate::potentials::SubadditivePotential;
use crate::pressure::{pressure_curve, EstimatorKind, Mode};

/// Allowed excess of a certified measure side over a closed-form pressure.
pub const SIDE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VpSettings {
    pub n_list: Vec<usize>,
    pub m_list: Vec<usize>,
    /// Depth N of the F* bracket.
    pub depth: usize,
    pub mode: Mode,
    #[serde(default)]
    pub estimator: EstimatorKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureSide {
    pub entropy: f64,
    pub f_star: FStarBracket,
    /// h + min_{n≤N} a_n/n, an upper bound on h + F*(μ).
    pub side: f64,
    /// h + a_N/N.
    pub estimate: f64,
    /// `Some(side ≤ exact + tol)` when a closed-form pressure was supplied.
    pub within_exact: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    /// Pressure at the largest (n, m) of the grid.
    pub pressure_value: f64,
    pub exact_pressure: Option<f64>,
    pub sides: Vec<MeasureSide>,
    /// Index of the best side among measures with finite F*.
    pub best_index: Option<usize>,
    pub best_side: Option<f64>,
    /// max over finite-F* measures of h + a_N/N.
    pub best_estimate: Option<f64>,
    /// pressure_value − best_side.
    pub gap: Option<f64>,
    /// exact_pressure − best_side.
    pub gap_to_exact: Option<f64>,
    /// Measures whose F*(μ) was flagged −∞ and left out of the sup.
    pub neg_infinite: Vec<usize>,
    pub all_within_exact: bool,
}

/// Evaluate h + F* for each measure and compare against the pressure.
#[allow(clippy::too_many_arguments)]
pub fn vp_gap(
    chain: &BaseChain,
    bundle: &BundleSft,
    potential: &dyn SubadditivePotential,
    measures: &[RandomMarkovMeasure],
    settings: &VpSettings,
    exact_pressure: Option<f64>,
    budget: &Budget,
) -> Result<GapReport> {
    let curve = pressure_curve(
        chain,
        bundle,
        potential,
        &settings.n_list,
        &settings.m_list,
        settings.mode,
        settings.estimator,
        budget,
    )?;
    let pressure_value = curve.extrapolated;
    let mut sides = Vec::with_capacity(measures.len());
    for (i, meas) in measures.iter().enumerate() {
        let check = meas.validate(chain, bundle)?;
        if !check.valid {
            return Err(Error::InvalidMeasure(format!(
                "measure {i} failed validation: {check:?}"
            )));
        }
        let entropy = meas.fiber_entropy(chain)?;
        let f_star = meas.f_star_bracket(chain, bundle, potential, settings.depth, budget)?;
        let side = entropy + f_star.upper;
        let estimate = entropy + f_star.estimate;
        sides.push(MeasureSide {
            entropy,
            within_exact: exact_pressure.map(|p| side <= p + SIDE_TOL),
            f_star,
            side,
            estimate,
        });
    }
    let neg_infinite: Vec<usize> = sides
        .iter()
        .enumerate()
        .filter(|(_, s)| s.f_star.neg_infinite)
        .map(|(i, _)| i)
        .collect();
    let finite = || {
        sides
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.f_star.neg_infinite)
    };
    let best = finite().max_by(|a, b| a.1.side.total_cmp(&b.1.side));
    let best_index = best.map(|(i, _)| i);
    let best_side = best.map(|(_, s)| s.side);
    let best_estimate = finite().map(|(_, s)| s.estimate).max_by(f64::total_cmp);
    let all_within_exact = sides.iter().all(|s| s.within_exact != Some(false));
    Ok(GapReport {
        pressure_value,
        exact_pressure,
        gap: best_side.map(|b| pressure_value - b),
        gap_to_exact: exact_pressure.zip(best_side).map(|(p, b)| p - b),
        sides,
        best_index,
        best_side,
        best_estimate,
        neg_infinite,
        all_within_exact,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerSettings {
    pub depth: usize,
    pub iter_cap: usize,
    /// Stop once a full sweep improves the objective by less than this.
    pub tol: f64,
    pub initial_step: f64,
    pub min_step: f64,
}

impl Default for OptimizerSettings {
    fn default() -> Self {
        Self {
            depth: 8,
            iter_cap: 500,
            tol: 1e-13,
            initial_step: 0.25,
            min_step: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeResult {
    pub measure: RandomMarkovMeasure,
    pub objective: f64,
    /// Best objective after each sweep; nondecreasing.
    pub trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

struct Objective<'a> {
    chain: &'a BaseChain,
    bundle: &'a BundleSft,
    potential: &'a dyn SubadditivePotential,
    depth: usize,
    budget: &'a Budget,
}

impl Objective<'_> {
    /// h + a_N/N of the auto-consistent measure built on `q`, or `None` if
    /// the projection does not land on a valid measure.
    fn eval(&self, q: &[Vec<Vec<f64>>]) -> Result<Option<(RandomMarkovMeasure, f64)>> {
        let meas = match RandomMarkovMeasure::auto_consistent(self.chain, q.to_vec()) {
            Ok(m) => m,
            Err(Error::InvalidMeasure(_)) => return Ok(None),
            Err(e) => return Err(e),
        };
        if !meas.validate(self.chain, self.bundle)?.valid {
            return Ok(None);
        }
        let h = meas.fiber_entropy(self.chain)?;
        let a = meas.potential_average(
            self.chain,
            self.bundle,
            self.potential,
            self.depth,
            self.budget,
        )?;
        Ok(Some((meas, h + a / self.depth as f64)))
    }
}

/// Coordinate pattern search over the rows of the Q_s: move mass `step`
/// between two admissible entries of one row, keep the move if h + a_N/N
/// increases, halve the step after a sweep without progress. π is re-solved
/// from the Q_s at every evaluation so each iterate is invariant.
pub fn optimize_measure(
    chain: &BaseChain,
    bundle: &BundleSft,
    potential: &dyn SubadditivePotential,
    start: &RandomMarkovMeasure,
    settings: &OptimizerSettings,
    budget: &Budget,
) -> Result<OptimizeResult> {
    if settings.depth == 0 || settings.iter_cap == 0 {
        return Err(Error::InvalidInput(
            "optimizer depth and iteration cap must be ≥ 1".into(),
        ));
    }
    let objective = Objective {
        chain,
        bundle,
        potential,
        depth: settings.depth,
        budget,
    };
    let mut q = start.transition.clone();
    let (mut measure, mut best) = objective.eval(&q)?.ok_or_else(|| {
        Error::InvalidMeasure("optimizer start point is not a valid measure".into())
    })?;
    let mut trace = vec![best];
    let mut step = settings.initial_step;
    let mut converged = false;
    let mut iterations = 0;

    let rows: Vec<(usize, usize, Vec<usize>)> = (0..bundle.num_base_symbols())
        .flat_map(|s| (0..bundle.alphabet_size()).map(move |a| (s, a)))
        .map(|(s, a)| (s, a, bundle.successors(s, a).collect::<Vec<_>>()))
        .filter(|(_, _, succ)| succ.len() > 1)
        .collect();

    while iterations < settings.iter_cap {
        iterations += 1;
        let before = best;
        for (s, a, succ) in &rows {
            for &from in succ {
                for &to in succ {
                    if from == to {
                        continue;
                    }
                    let delta = step.min(q[*s][*a][from]);
                    if delta <= 0.0 {
                        continue;
                    }
                    let mut cand = q.clone();
                    cand[*s][*a][from] -= delta;
                    cand[*s][*a][to] += delta;
                    if let Some((m, value)) = objective.eval(&cand)? {
                        if value > best {
                            best = value;
                            measure = m;
                            q = cand;
                        }
                    }
                }
            }
        }
        trace.push(best);
        let gain = best - before;
        if gain == 0.0 {
            step /= 2.0;
            if step < settings.min_step {
                converged = true;
                break;
            }
        } else if gain < settings.tol {
            converged = true;
            break;
        }
    }
    Ok(OptimizeResult {
        measure,
        objective: best,
        trace,
        iterations,
        converged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalDiagnostic {
    pub n: usize,
    pub m: usize,
    /// (1/n) Σ_{i<n} law of (u_i, w_i) under the Gibbs weights, indexed [s][a].
    pub marginal: Vec<Vec<f64>>,
    /// Same average over i = 1..=n (one push forward by Θ).
    pub shifted: Vec<Vec<f64>>,
    /// Σ_s marginal[s][·].
    pub fiber_marginal: Vec<f64>,
    /// ‖marginal − shifted‖₁.
    pub defect: f64,
    /// (1/n) ∫ f_n dν⁽ⁿ⁾.
    pub gibbs_average: f64,
}

/// Finite-depth analogue of ν⁽ⁿ⁾ = Σ e^{f_n} δ_x / Σ e^{f_n} over one point
/// per (n+m−1)-cylinder and of its orbit average μ⁽ⁿ⁾, reported through its
/// one-step marginal. When m = 1 the coordinate at time n lies outside the
/// cylinder and is spread uniformly over the admissible successors.
pub fn empirical_measure_diagnostic(
    chain: &BaseChain,
    bundle: &BundleSft,
    potential: &dyn SubadditivePotential,
    n: usize,
    m: usize,
    budget: &Budget,
) -> Result<EmpiricalDiagnostic> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidInput("n and m must be ≥ 1".into()));
    }
    let num_base = chain.num_states();
    let alphabet = bundle.alphabet_size();
    let len = n + m - 1;
    let words = chain.enumerate_words(len + 1, budget)?;
    let mut marginal = vec![vec![0.0; alphabet]; num_base];
    let mut shifted = vec![vec![0.0; alphabet]; num_base];
    let mut gibbs = crate::numeric::KahanSum::new();
    let inv_n = 1.0 / n as f64;
    for u in &words {
        let base = &u.symbols;
        let cylinders = bundle.enumerate_cylinders(&base[..len], len, budget)?;
        let values = cylinders
            .iter()
            .map(|w| potential.eval(base, w, n))
            .collect::<Result<Vec<f64>>>()?;
        let mut lse = LogSumExp::new();
        values.iter().for_each(|&v| lse.add(v));
        let log_z = lse.value().ok_or(Error::EmptyFiber)?;
        for (w, &f) in cylinders.iter().zip(&values) {
            let weight = u.probability * (f - log_z).exp();
            gibbs.add(weight * f * inv_n);
            for i in 0..n {
                marginal[base[i]][w[i]] += weight * inv_n;
            }
            for i in 1..n {
                shifted[base[i]][w[i]] += weight * inv_n;
            }
            if n < len {
                shifted[base[n]][w[n]] += weight * inv_n;
            } else {
                let succ: Vec<usize> = bundle.successors(base[n - 1], w[n - 1]).collect();
                for &b in &succ {
                    shifted[base[n]][b] += weight * inv_n / succ.len() as f64;
                }
            }
        }
    }
    let defect = kahan_sum(
        marginal
            .iter()
            .flatten()
            .zip(shifted.iter().flatten())
            .map(|(a, b)| (a - b).abs()),
    );
    let fiber_marginal = (0..alphabet)
        .map(|a| kahan_sum(marginal.iter().map(|r| r[a])))
        .collect();
    Ok(EmpiricalDiagnostic {
        n,
        m,
        marginal,
        shifted,
        fiber_marginal,
        defect,
        gibbs_average: gibbs.value(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma35Report {
    /// (1/n) ∫ f_n dν⁽ⁿ⁾ from the empirical construction.
    pub empirical_average: f64,
    /// min_{k≤K} a_k/k for the reference measure.
    pub bracket_upper: f64,
    pub allowance: f64,
    pub holds: bool,
}

/// Finite form of limsup (1/n)∫ f_n dν⁽ⁿ⁾ ≤ F*(μ): compare the Gibbs average
/// against the F* bracket of a reference measure, with an additive allowance.
pub fn check_lemma35(
    diag: &EmpiricalDiagnostic,
    reference: &FStarBracket,
    allowance: f64,
) -> Lemma35Report {
    Lemma35Report {
        empirical_average: diag.gibbs_average,
        bracket_upper: reference.upper,
        allowance,
        holds: diag.gibbs_average <= reference.upper + allowance,
    }
}
