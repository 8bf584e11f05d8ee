//! The driving system: a finite ergodic Markov chain whose path space plays
//! the role of the base (Ω, P, ϑ), with ϑ the left shift on paths.
//!
//! Only cylinder functionals of the path are ever evaluated, so the base is
//! represented by finite words together with their stationary probabilities.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{kahan_sum, Budget};

/// Base alphabets up to this size get their stationary vector from a direct
/// linear solve; larger ones use power iteration.
const DIRECT_SOLVE_MAX: usize = 8;
const POWER_TOL: f64 = 1e-14;
const POWER_MAX_ITERS: usize = 1_000_000;
const ROW_SUM_TOL: f64 = 1e-12;
const STATIONARY_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseChain {
    transition: Vec<Vec<f64>>,
    stationary: Vec<f64>,
}

/// A finite base path u₀…u_{n−1} with its cylinder probability under the
/// stationary chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseWord {
    pub symbols: Vec<usize>,
    pub probability: f64,
}

impl BaseWord {
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

impl BaseChain {
    pub fn new(transition: Vec<Vec<f64>>) -> Result<Self> {
        let stationary = stationary_distribution(&transition)?;
        Ok(Self {
            transition,
            stationary,
        })
    }

    /// Single-state base: the fiber system is then deterministic.
    pub fn trivial() -> Self {
        Self {
            transition: vec![vec![1.0]],
            stationary: vec![1.0],
        }
    }

    /// IID base with the given marginal; every transition row equals `p`.
    pub fn bernoulli(p: &[f64]) -> Result<Self> {
        Self::new(vec![p.to_vec(); p.len()])
    }

    pub fn num_states(&self) -> usize {
        self.transition.len()
    }

    pub fn transition(&self) -> &[Vec<f64>] {
        &self.transition
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    pub fn word_probability(&self, symbols: &[usize]) -> f64 {
        let Some(&first) = symbols.first() else {
            return 1.0;
        };
        symbols.windows(2).fold(self.stationary[first], |p, w| {
            p * self.transition[w[0]][w[1]]
        })
    }

    /// Visit every admissible length-`n` word in lexicographic order.
    pub fn visit_words<F>(&self, n: usize, budget: &Budget, mut visit: F) -> Result<()>
    where
        F: FnMut(&[usize], f64),
    {
        if n == 0 {
            return Err(Error::InvalidInput("base word length must be ≥ 1".into()));
        }
        budget.check((self.num_states() as f64).powi(n as i32))?;
        let mut word = Vec::with_capacity(n);
        for s in 0..self.num_states() {
            word.push(s);
            self.visit_from(&mut word, self.stationary[s], n, &mut visit);
            word.pop();
        }
        Ok(())
    }

    fn visit_from<F>(&self, word: &mut Vec<usize>, prob: f64, n: usize, visit: &mut F)
    where
        F: FnMut(&[usize], f64),
    {
        if word.len() == n {
            visit(word, prob);
            return;
        }
        let last = *word.last().expect("non-empty prefix");
        for (next, &p) in self.transition[last].iter().enumerate() {
            if p > 0.0 {
                word.push(next);
                self.visit_from(word, prob * p, n, visit);
                word.pop();
            }
        }
    }

    /// All admissible length-`n` base words with their probabilities.
    pub fn enumerate_words(&self, n: usize, budget: &Budget) -> Result<Vec<BaseWord>> {
        let mut out = Vec::new();
        self.visit_words(n, budget, |symbols, probability| {
            out.push(BaseWord {
                symbols: symbols.to_vec(),
                probability,
            })
        })?;
        Ok(out)
    }

    /// A stationary path of length `n`, a pure function of `(self, n, seed)`.
    pub fn sample_path(&self, n: usize, seed: u64) -> BaseWord {
        self.sample_path_stream(n, seed, 0)
    }

    /// Like [`sample_path`](Self::sample_path) but drawing from an independent
    /// ChaCha stream; Monte Carlo sample `i` uses stream `i`.
    pub fn sample_path_stream(&self, n: usize, seed: u64, stream: u64) -> BaseWord {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        self.sample_with(n, &mut rng)
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> BaseWord {
        let mut symbols = Vec::with_capacity(n);
        if n == 0 {
            return BaseWord {
                symbols,
                probability: 1.0,
            };
        }
        let mut s = sample_categorical(&self.stationary, rng);
        let mut probability = self.stationary[s];
        symbols.push(s);
        while symbols.len() < n {
            let next = sample_categorical(&self.transition[s], rng);
            probability *= self.transition[s][next];
            symbols.push(next);
            s = next;
        }
        BaseWord {
            symbols,
            probability,
        }
    }
}

pub(crate) fn sample_categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let x: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if x < acc {
                return i;
            }
        }
    }
    last_positive
}

fn check_stochastic(transition: &[Vec<f64>]) -> Result<()> {
    let n = transition.len();
    if n == 0 {
        return Err(Error::InvalidInput("transition matrix is empty".into()));
    }
    for (i, row) in transition.iter().enumerate() {
        if row.len() != n {
            return Err(Error::ShapeMismatch(format!(
                "transition row {i} has {} entries, expected {n}",
                row.len()
            )));
        }
        if row.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "transition row {i} has a negative or non-finite entry"
            )));
        }
        let sum = kahan_sum(row.iter().copied());
        if (sum - 1.0).abs() > ROW_SUM_TOL {
            return Err(Error::InvalidInput(format!(
                "transition row {i} sums to {sum}, not 1"
            )));
        }
    }
    Ok(())
}

fn reachable(adj: &[Vec<usize>], start: usize) -> Vec<Option<usize>> {
    let mut level = vec![None; adj.len()];
    level[start] = Some(0);
    let mut queue = std::collections::VecDeque::from([start]);
    while let Some(u) = queue.pop_front() {
        let lu = level[u].unwrap();
        for &v in &adj[u] {
            if level[v].is_none() {
                level[v] = Some(lu + 1);
                queue.push_back(v);
            }
        }
    }
    level
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Strong connectivity and period of the positive-entry graph of `matrix`.
/// Returns `None` if the graph is not strongly connected.
pub(crate) fn period_if_irreducible(matrix: &[Vec<f64>]) -> Option<usize> {
    let n = matrix.len();
    let forward: Vec<Vec<usize>> = matrix
        .iter()
        .map(|row| (0..n).filter(|&j| row[j] > 0.0).collect())
        .collect();
    let mut backward = vec![Vec::new(); n];
    for (i, succ) in forward.iter().enumerate() {
        for &j in succ {
            backward[j].push(i);
        }
    }
    let levels = reachable(&forward, 0);
    if levels.iter().any(Option::is_none) || reachable(&backward, 0).iter().any(Option::is_none) {
        return None;
    }
    // The period is the gcd of level[u] + 1 − level[v] over all edges u → v.
    let mut period = 0;
    for (u, succ) in forward.iter().enumerate() {
        for &v in succ {
            let lu = levels[u].unwrap() as isize;
            let lv = levels[v].unwrap() as isize;
            period = gcd(period, (lu + 1 - lv).unsigned_abs());
        }
    }
    Some(period)
}

/// Solve pT = p, Σp = 1 by Gaussian elimination with partial pivoting.
/// Valid for any irreducible stochastic matrix, periodic or not.
pub(crate) fn solve_stationary_linear(transition: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = transition.len();
    // Rows of (Tᵀ − I), the last replaced by the normalization constraint.
    let mut a: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut row: Vec<f64> = (0..n).map(|j| transition[j][i]).collect();
            row[i] -= 1.0;
            row.push(0.0);
            row
        })
        .collect();
    a[n - 1] = vec![1.0; n + 1];

    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        if a[pivot][col].abs() < 1e-300 {
            return Err(Error::NonErgodicChain(
                "stationary system is singular".into(),
            ));
        }
        a.swap(col, pivot);
        for r in col + 1..n {
            let factor = a[r][col] / a[col][col];
            if factor != 0.0 {
                for c in col..=n {
                    a[r][c] -= factor * a[col][c];
                }
            }
        }
    }
    let mut p = vec![0.0; n];
    for r in (0..n).rev() {
        let tail = kahan_sum((r + 1..n).map(|c| a[r][c] * p[c]));
        p[r] = (a[r][n] - tail) / a[r][r];
    }
    // Clean tiny negative round-off and renormalize.
    for x in &mut p {
        if *x < 0.0 && *x > -1e-15 {
            *x = 0.0;
        }
    }
    let total = kahan_sum(p.iter().copied());
    p.iter_mut().for_each(|x| *x /= total);
    Ok(p)
}

fn power_iteration(transition: &[Vec<f64>]) -> Result<Vec<f64>> {
    let n = transition.len();
    let mut p = vec![1.0 / n as f64; n];
    for _ in 0..POWER_MAX_ITERS {
        let next: Vec<f64> = (0..n)
            .map(|j| kahan_sum((0..n).map(|i| p[i] * transition[i][j])))
            .collect();
        let delta = next
            .iter()
            .zip(&p)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        p = next;
        if delta < POWER_TOL {
            return Ok(p);
        }
    }
    Err(Error::NonErgodicChain(format!(
        "power iteration did not converge in {POWER_MAX_ITERS} iterations"
    )))
}

/// Stationary vector of an ergodic (irreducible, aperiodic) stochastic matrix.
pub fn stationary_distribution(transition: &[Vec<f64>]) -> Result<Vec<f64>> {
    check_stochastic(transition)?;
    match period_if_irreducible(transition) {
        None => {
            return Err(Error::NonErgodicChain(
                "positive-transition graph is not strongly connected".into(),
            ))
        }
        Some(d) if d != 1 => {
            return Err(Error::NonErgodicChain(format!(
                "positive-transition graph has period {d}"
            )))
        }
        _ => {}
    }
    let p = if transition.len() <= DIRECT_SOLVE_MAX {
        solve_stationary_linear(transition)?
    } else {
        power_iteration(transition)?
    };
    let n = p.len();
    let residual = (0..n)
        .map(|j| (kahan_sum((0..n).map(|i| p[i] * transition[i][j])) - p[j]).abs())
        .fold(0.0, f64::max);
    if residual > STATIONARY_RESIDUAL_TOL || p.iter().any(|&x| !(x > 0.0)) {
        return Err(Error::NonErgodicChain(format!(
            "stationary vector failed verification (residual {residual:e})"
        )));
    }
    Ok(p)
}
