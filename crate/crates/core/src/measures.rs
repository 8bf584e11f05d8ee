//! Θ-invariant measures with base marginal P built from per-base-symbol
//! Markov disintegrations: given the base path u, the fiber word is a
//! Markov chain started from π_{u₀} with transition Q_{u_k} at step k.
//!
//! Invariance reduces to the linear condition π_s Q_s = π_{s'} for every
//! positive base transition s → s'. The pair process (u_k, w_k) is itself
//! a Markov chain on S × A, which is how every integral here is evaluated.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::base::BaseChain;
use crate::bundle::BundleSft;
use crate::error::{Error, Result};
use crate::numeric::{entropy, kahan_sum, linear_fit, Budget};
use crate::potentials::{sup_norm_f1, SubadditivePotential};

pub const ROW_TOL: f64 = 1e-12;
pub const CONSISTENCY_TOL: f64 = 1e-10;
/// a_n/n below this is reported as F*(μ) = −∞.
pub const NEG_INFINITY_FLOOR: f64 = -1e6;

const JOINT_TOL: f64 = 1e-15;
const JOINT_MAX_ITERS: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomMarkovMeasure {
    /// π_s over the fiber alphabet.
    pub initial: Vec<Vec<f64>>,
    /// Q_s, row-stochastic over the fiber alphabet.
    pub transition: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureValidation {
    pub max_row_residual: f64,
    pub max_initial_residual: f64,
    pub negative_entries: bool,
    /// (s, a, b) with Q_s(a, b) > 0 but M_s(a, b) = 0.
    pub support_violations: Vec<(usize, usize, usize)>,
    /// max over positive s → s′ of ‖π_s Q_s − π_{s′}‖∞.
    pub max_consistency_residual: f64,
    pub valid: bool,
}

impl RandomMarkovMeasure {
    pub fn new(initial: Vec<Vec<f64>>, transition: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let meas = Self {
            initial,
            transition,
        };
        meas.check_shape(meas.initial.len(), meas.alphabet_size())?;
        Ok(meas)
    }

    pub fn alphabet_size(&self) -> usize {
        self.initial.first().map(Vec::len).unwrap_or(0)
    }

    pub fn num_base_symbols(&self) -> usize {
        self.initial.len()
    }

    fn check_shape(&self, num_base: usize, alphabet: usize) -> Result<()> {
        let ok = alphabet > 0
            && self.initial.len() == num_base
            && self.transition.len() == num_base
            && self.initial.iter().all(|r| r.len() == alphabet)
            && self
                .transition
                .iter()
                .all(|q| q.len() == alphabet && q.iter().all(|r| r.len() == alphabet));
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch(format!(
                "measure must have {num_base} initial vectors and {num_base} transition matrices over {alphabet} fiber symbols"
            )))
        }
    }

    /// Solve for the π_s given the Q_s: take the stationary law ρ of the
    /// pair chain (s, a) → (s′, b) with probability T(s, s′)Q_s(a, b) and set
    /// π_s = ρ(s, ·)/p_s. Exact whenever a consistent family exists with the
    /// reached support; otherwise the residual shows up in `validate`.
    pub fn auto_consistent(chain: &BaseChain, transition: Vec<Vec<Vec<f64>>>) -> Result<Self> {
        let num_base = chain.num_states();
        let alphabet = transition.first().map(Vec::len).unwrap_or(0);
        let probe = Self {
            initial: vec![vec![0.0; alphabet]; num_base],
            transition,
        };
        probe.check_shape(num_base, alphabet)?;
        let p = chain.stationary();
        let t = chain.transition();
        let q = &probe.transition;
        // Lazy pair chain: same stationary laws, no periodicity.
        let mut rho: Vec<Vec<f64>> = (0..num_base)
            .map(|s| vec![p[s] / alphabet as f64; alphabet])
            .collect();
        let mut converged = false;
        for _ in 0..JOINT_MAX_ITERS {
            let mut next = vec![vec![0.0; alphabet]; num_base];
            for s in 0..num_base {
                for a in 0..alphabet {
                    let mass = rho[s][a];
                    if mass == 0.0 {
                        continue;
                    }
                    for s2 in 0..num_base {
                        if t[s][s2] == 0.0 {
                            continue;
                        }
                        for b in 0..alphabet {
                            next[s2][b] += mass * t[s][s2] * q[s][a][b];
                        }
                    }
                }
            }
            let mut delta: f64 = 0.0;
            for s in 0..num_base {
                for a in 0..alphabet {
                    let v = 0.5 * (rho[s][a] + next[s][a]);
                    delta = delta.max((v - rho[s][a]).abs());
                    next[s][a] = v;
                }
            }
            rho = next;
            if delta < JOINT_TOL {
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(Error::InvalidMeasure(
                "pair chain did not reach stationarity".into(),
            ));
        }
        let initial = rho
            .iter()
            .map(|row| {
                let total = kahan_sum(row.iter().copied());
                row.iter().map(|x| x / total).collect()
            })
            .collect();
        Ok(Self {
            initial,
            transition: probe.transition,
        })
    }

    /// The same Q under every base symbol, π its stationary law.
    pub fn homogeneous(chain: &BaseChain, q: Vec<Vec<f64>>) -> Result<Self> {
        Self::auto_consistent(chain, vec![q; chain.num_states()])
    }

    /// Q_s(a, ·) uniform over the admissible successors.
    pub fn uniform(chain: &BaseChain, bundle: &BundleSft) -> Result<Self> {
        let transition = (0..bundle.num_base_symbols())
            .map(|s| {
                (0..bundle.alphabet_size())
                    .map(|a| {
                        let succ: Vec<usize> = bundle.successors(s, a).collect();
                        let mut row = vec![0.0; bundle.alphabet_size()];
                        for &b in &succ {
                            row[b] = 1.0 / succ.len() as f64;
                        }
                        row
                    })
                    .collect()
            })
            .collect();
        Self::auto_consistent(chain, transition)
    }

    pub fn validate(&self, chain: &BaseChain, bundle: &BundleSft) -> Result<MeasureValidation> {
        self.check_shape(chain.num_states(), bundle.alphabet_size())?;
        if bundle.num_base_symbols() != chain.num_states() {
            return Err(Error::ShapeMismatch(
                "bundle and base chain disagree on the base alphabet".into(),
            ));
        }
        let mut report = self.stochastic_report(chain);
        for (s, q) in self.transition.iter().enumerate() {
            for (a, row) in q.iter().enumerate() {
                for (b, &x) in row.iter().enumerate() {
                    if x > 0.0 && !bundle.allows(s, a, b) {
                        report.support_violations.push((s, a, b));
                    }
                }
            }
        }
        report.valid = report.valid && report.support_violations.is_empty();
        Ok(report)
    }

    fn stochastic_report(&self, chain: &BaseChain) -> MeasureValidation {
        let alphabet = self.alphabet_size();
        let negative_entries = self.initial.iter().flatten().any(|&x| x < 0.0)
            || self.transition.iter().flatten().flatten().any(|&x| x < 0.0);
        let max_row_residual = self
            .transition
            .iter()
            .flatten()
            .map(|r| (kahan_sum(r.iter().copied()) - 1.0).abs())
            .fold(0.0, f64::max);
        let max_initial_residual = self
            .initial
            .iter()
            .map(|r| (kahan_sum(r.iter().copied()) - 1.0).abs())
            .fold(0.0, f64::max);
        let mut max_consistency_residual: f64 = 0.0;
        for s in 0..chain.num_states() {
            let pushed: Vec<f64> = (0..alphabet)
                .map(|b| {
                    kahan_sum((0..alphabet).map(|a| self.initial[s][a] * self.transition[s][a][b]))
                })
                .collect();
            for (s2, &t) in chain.transition()[s].iter().enumerate() {
                if t > 0.0 {
                    for b in 0..alphabet {
                        max_consistency_residual =
                            max_consistency_residual.max((pushed[b] - self.initial[s2][b]).abs());
                    }
                }
            }
        }
        let valid = !negative_entries
            && max_row_residual <= ROW_TOL
            && max_initial_residual <= ROW_TOL
            && max_consistency_residual <= CONSISTENCY_TOL;
        MeasureValidation {
            max_row_residual,
            max_initial_residual,
            negative_entries,
            support_violations: Vec::new(),
            max_consistency_residual,
            valid,
        }
    }

    fn require_valid(&self, chain: &BaseChain) -> Result<()> {
        self.check_shape(chain.num_states(), self.alphabet_size())?;
        let r = self.stochastic_report(chain);
        if r.valid {
            Ok(())
        } else {
            Err(Error::InvalidMeasure(format!(
                "row residual {:e}, initial residual {:e}, consistency residual {:e}, negative entries: {}",
                r.max_row_residual, r.max_initial_residual, r.max_consistency_residual, r.negative_entries
            )))
        }
    }

    /// h_μ^{(r)} = Σ_s p_s Σ_a π_s(a) H(Q_s(a, ·)), nats per step.
    pub fn fiber_entropy(&self, chain: &BaseChain) -> Result<f64> {
        self.require_valid(chain)?;
        Ok(kahan_sum((0..chain.num_states()).map(|s| {
            chain.stationary()[s]
                * kahan_sum(
                    self.initial[s]
                        .iter()
                        .zip(&self.transition[s])
                        .map(|(&pi, row)| pi * entropy(row)),
                )
        })))
    }

    /// ρ_k(s, a) = P(u_k = s, w_k = a) for k < len.
    pub fn pair_marginals(&self, chain: &BaseChain, len: usize) -> Vec<Vec<Vec<f64>>> {
        let num_base = chain.num_states();
        let alphabet = self.alphabet_size();
        let mut out = Vec::with_capacity(len);
        let mut rho: Vec<Vec<f64>> = (0..num_base)
            .map(|s| {
                self.initial[s]
                    .iter()
                    .map(|x| chain.stationary()[s] * x)
                    .collect()
            })
            .collect();
        for _ in 0..len {
            let mut next = vec![vec![0.0; alphabet]; num_base];
            for s in 0..num_base {
                for a in 0..alphabet {
                    for s2 in 0..num_base {
                        let t = chain.transition()[s][s2];
                        if t == 0.0 {
                            continue;
                        }
                        for b in 0..alphabet {
                            next[s2][b] += rho[s][a] * t * self.transition[s][a][b];
                        }
                    }
                }
            }
            out.push(std::mem::replace(&mut rho, next));
        }
        out
    }

    /// E[g(u, w)] over pair paths of length `len` started from (s, a).
    fn conditional_expectation<G>(
        &self,
        chain: &BaseChain,
        s: usize,
        a: usize,
        len: usize,
        g: &G,
    ) -> Result<f64>
    where
        G: Fn(&[usize], &[usize]) -> Result<f64> + Sync,
    {
        let mut base = vec![s];
        let mut fiber = vec![a];
        let mut acc = crate::numeric::KahanSum::new();
        self.walk(chain, &mut base, &mut fiber, 1.0, len, g, &mut acc)?;
        Ok(acc.value())
    }

    #[allow(clippy::too_many_arguments)]
    fn walk<G>(
        &self,
        chain: &BaseChain,
        base: &mut Vec<usize>,
        fiber: &mut Vec<usize>,
        prob: f64,
        len: usize,
        g: &G,
        acc: &mut crate::numeric::KahanSum,
    ) -> Result<()>
    where
        G: Fn(&[usize], &[usize]) -> Result<f64>,
    {
        if base.len() == len {
            acc.add(prob * g(base, fiber)?);
            return Ok(());
        }
        let s = *base.last().unwrap();
        let a = *fiber.last().unwrap();
        for (s2, &t) in chain.transition()[s].iter().enumerate() {
            if t == 0.0 {
                continue;
            }
            for (b, &q) in self.transition[s][a].iter().enumerate() {
                if q == 0.0 {
                    continue;
                }
                base.push(s2);
                fiber.push(b);
                self.walk(chain, base, fiber, prob * t * q, len, g, acc)?;
                base.pop();
                fiber.pop();
            }
        }
        Ok(())
    }

    /// Σ_{s,a} weights[s][a] · E[g | (u₀, w₀) = (s, a)] over paths of length `len`.
    fn expect_from<G>(
        &self,
        chain: &BaseChain,
        weights: &[Vec<f64>],
        len: usize,
        budget: &Budget,
        g: G,
    ) -> Result<f64>
    where
        G: Fn(&[usize], &[usize]) -> Result<f64> + Sync,
    {
        let pairs = (chain.num_states() * self.alphabet_size()) as f64;
        budget.check(pairs.powi(len as i32))?;
        let starts: Vec<(usize, usize, f64)> = weights
            .iter()
            .enumerate()
            .flat_map(|(s, row)| row.iter().enumerate().map(move |(a, &w)| (s, a, w)))
            .filter(|&(_, _, w)| w > 0.0)
            .collect();
        let parts = starts
            .par_iter()
            .map(|&(s, a, w)| {
                self.conditional_expectation(chain, s, a, len, &g)
                    .map(|e| w * e)
            })
            .collect::<Result<Vec<f64>>>()?;
        Ok(kahan_sum(parts))
    }

    /// H_n = Σ_u P(u) H(μ_u restricted to n-cylinders), computed by
    /// enumerating every cylinder probability.
    pub fn cylinder_entropy(
        &self,
        chain: &BaseChain,
        bundle: &BundleSft,
        n: usize,
        budget: &Budget,
    ) -> Result<f64> {
        self.check_shape(chain.num_states(), bundle.alphabet_size())?;
        if n == 0 {
            return Err(Error::InvalidInput("cylinder length must be ≥ 1".into()));
        }
        let alphabet = self.alphabet_size() as f64;
        budget.check((chain.num_states() as f64).powi(n as i32) * alphabet.powi(n as i32))?;
        let words = chain.enumerate_words(n, budget)?;
        let parts: Vec<f64> = words
            .par_iter()
            .map(|u| {
                let mut acc = crate::numeric::KahanSum::new();
                for a in 0..self.alphabet_size() {
                    self.fiber_entropy_walk(
                        &u.symbols,
                        a,
                        1,
                        self.initial[u.symbols[0]][a],
                        n,
                        &mut acc,
                    );
                }
                u.probability * acc.value()
            })
            .collect();
        Ok(kahan_sum(parts))
    }

    fn fiber_entropy_walk(
        &self,
        base: &[usize],
        a: usize,
        depth: usize,
        prob: f64,
        n: usize,
        acc: &mut crate::numeric::KahanSum,
    ) {
        if prob == 0.0 {
            return;
        }
        if depth == n {
            acc.add(-prob * prob.ln());
            return;
        }
        let s = base[depth - 1];
        for (b, &q) in self.transition[s][a].iter().enumerate() {
            self.fiber_entropy_walk(base, b, depth + 1, prob * q, n, acc);
        }
    }

    /// (1/n) Σ_u P(u) H(n-cylinder law of μ_u). Its increments H_{n+1} − H_n
    /// equal the closed-form fiber entropy for consistent measures.
    pub fn entropy_cylinder_oracle(
        &self,
        chain: &BaseChain,
        bundle: &BundleSft,
        n: usize,
        budget: &Budget,
    ) -> Result<f64> {
        Ok(self.cylinder_entropy(chain, bundle, n, budget)? / n as f64)
    }

    /// a_n = ∫ f_n dμ.
    pub fn potential_average(
        &self,
        chain: &BaseChain,
        bundle: &BundleSft,
        potential: &dyn SubadditivePotential,
        n: usize,
        budget: &Budget,
    ) -> Result<f64> {
        self.shifted_average(chain, bundle, potential, n, 0, budget)
    }

    /// ∫ f_n ∘ Θ^shift dμ.
    pub fn shifted_average(
        &self,
        chain: &BaseChain,
        bundle: &BundleSft,
        potential: &dyn SubadditivePotential,
        n: usize,
        shift: usize,
        budget: &Budget,
    ) -> Result<f64> {
        self.check_shape(chain.num_states(), bundle.alphabet_size())?;
        if n == 0 {
            return Err(Error::InvalidInput("potential depth n must be ≥ 1".into()));
        }
        let marginals = self.pair_marginals(chain, shift + n);
        if let Some(table) = potential.additive_table() {
            return Ok(kahan_sum((shift..shift + n).map(|k| {
                kahan_sum(
                    marginals[k]
                        .iter()
                        .zip(&table)
                        .flat_map(|(rho, phi)| rho.iter().zip(phi).map(|(r, f)| r * f)),
                )
            })));
        }
        self.expect_from(chain, &marginals[shift], n, budget, |u, w| {
            potential.eval(u, w, n)
        })
    }

    /// a_n for n = 1..=depth with Fekete-style brackets on F*(μ).
    pub fn f_star_bracket(
        &self,
        chain: &BaseChain,
        bundle: &BundleSft,
        potential: &dyn SubadditivePotential,
        depth: usize,
        budget: &Budget,
    ) -> Result<FStarBracket> {
        if depth == 0 {
            return Err(Error::InvalidInput("bracket depth must be ≥ 1".into()));
        }
        let averages = (1..=depth)
            .map(|n| self.potential_average(chain, bundle, potential, n, budget))
            .collect::<Result<Vec<f64>>>()?;
        Ok(FStarBracket::from_averages(averages))
    }

    /// Slack in ∫ k f_n dμ ≤ 4k²C + ∫ Σ_{i<n} f_k ∘ Θ^i dμ, C = ‖f₁‖.
    pub fn check_lemma34(
        &self,
        chain: &BaseChain,
        bundle: &BundleSft,
        potential: &dyn SubadditivePotential,
        n: usize,
        k: usize,
        budget: &Budget,
    ) -> Result<Lemma34Report> {
        if k == 0 || n <= k {
            return Err(Error::InvalidInput(format!(
                "need n > k ≥ 1, got n = {n}, k = {k}"
            )));
        }
        let c = sup_norm_f1(potential, chain, bundle)?;
        let a_n = self.potential_average(chain, bundle, potential, n, budget)?;
        let shifted = (0..n)
            .map(|i| self.shifted_average(chain, bundle, potential, k, i, budget))
            .collect::<Result<Vec<f64>>>()?;
        let lhs = k as f64 * a_n;
        let rhs = 4.0 * (k * k) as f64 * c + kahan_sum(shifted.iter().copied());
        Ok(Lemma34Report {
            n,
            k,
            sup_norm: c,
            lhs,
            rhs,
            slack: rhs - lhs,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FStarBracket {
    /// a_n for n = 1..=N.
    pub averages: Vec<f64>,
    /// min_{n ≤ N} a_n / n; bounds F*(μ) from above.
    pub upper: f64,
    /// a_N / N.
    pub estimate: f64,
    /// Intercept of a_n/n ≈ c₀ + c₁/n fitted over n ∈ [⌈N/2⌉, N].
    pub extrapolated: f64,
    pub neg_infinite: bool,
}

impl FStarBracket {
    pub fn from_averages(averages: Vec<f64>) -> Self {
        let depth = averages.len();
        let ratios: Vec<f64> = averages
            .iter()
            .enumerate()
            .map(|(i, a)| a / (i + 1) as f64)
            .collect();
        let upper = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let estimate = *ratios.last().expect("non-empty");
        let lo = depth.div_ceil(2);
        let xs: Vec<f64> = (lo..=depth).map(|n| 1.0 / n as f64).collect();
        let (extrapolated, _) = linear_fit(&xs, &ratios[lo - 1..]);
        Self {
            averages,
            upper,
            estimate,
            extrapolated,
            neg_infinite: estimate < NEG_INFINITY_FLOOR,
        }
    }

    /// Worst Fekete defect max_{n+m ≤ N} a_{n+m} − a_n − a_m.
    pub fn fekete_defect(&self) -> f64 {
        let a = &self.averages;
        let mut worst = f64::NEG_INFINITY;
        for n in 1..a.len() {
            for m in 1..=a.len() - n {
                worst = worst.max(a[n + m - 1] - a[n - 1] - a[m - 1]);
            }
        }
        worst
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma34Report {
    pub n: usize,
    pub k: usize,
    pub sup_norm: f64,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
}
