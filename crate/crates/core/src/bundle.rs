//! Random subshifts of finite type: the fiber E_ω over a base path ω is the
//! set of sequences whose transition w_k → w_{k+1} is allowed by the 0/1
//! matrix attached to the base symbol ω_k. The fiber map is the shift, so
//! the skew product acts on (base word, fiber word) pairs by dropping a
//! common prefix.
//!
//! The fiber metric is d(x, y) = 2^{−min{k : x_k ≠ y_k}} and ε = 2^{−m};
//! with these choices (ω, ε, n)-separation becomes a cylinder condition.

use serde::{Deserialize, Serialize};

use crate::base::BaseWord;
use crate::error::{Error, Result};
use crate::numeric::Budget;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleSft {
    alphabet_size: usize,
    /// `allowed[s][a][b]`: may the fiber step a → b when the base symbol is s.
    allowed: Vec<Vec<Vec<bool>>>,
    strict: bool,
}

impl BundleSft {
    /// Build a bundle from one square 0/1 matrix per base symbol.
    ///
    /// Every row needs at least one admissible successor. With `strict` set,
    /// every column must also be hit, which upgrades T_ω E_ω ⊆ E_{ϑω} to
    /// equality.
    pub fn new(allowed: Vec<Vec<Vec<bool>>>, strict: bool) -> Result<Self> {
        let Some(first) = allowed.first() else {
            return Err(Error::InvalidInput(
                "bundle has no admissibility matrices".into(),
            ));
        };
        let alphabet_size = first.len();
        if alphabet_size == 0 {
            return Err(Error::InvalidInput("fiber alphabet is empty".into()));
        }
        for (s, matrix) in allowed.iter().enumerate() {
            if matrix.len() != alphabet_size || matrix.iter().any(|r| r.len() != alphabet_size) {
                return Err(Error::ShapeMismatch(format!(
                    "admissibility matrix for base symbol {s} is not {alphabet_size}×{alphabet_size}"
                )));
            }
            for (a, row) in matrix.iter().enumerate() {
                if !row.iter().any(|&x| x) {
                    return Err(Error::InvalidInput(format!(
                        "admissibility matrix for base symbol {s}: row {a} has no admissible successor"
                    )));
                }
            }
            if strict {
                for b in 0..alphabet_size {
                    if !matrix.iter().any(|row| row[b]) {
                        return Err(Error::InvalidInput(format!(
                            "admissibility matrix for base symbol {s}: column {b} is never reached (strict bundle)"
                        )));
                    }
                }
            }
        }
        Ok(Self {
            alphabet_size,
            allowed,
            strict,
        })
    }

    /// Same matrix under every base symbol.
    pub fn uniform(matrix: Vec<Vec<bool>>, num_base_symbols: usize) -> Result<Self> {
        Self::new(vec![matrix; num_base_symbols], false)
    }

    pub fn full_shift(alphabet_size: usize, num_base_symbols: usize) -> Self {
        Self::uniform(
            vec![vec![true; alphabet_size]; alphabet_size],
            num_base_symbols,
        )
        .expect("full shift is valid")
    }

    pub fn from_ints(allowed: &[Vec<Vec<u8>>], strict: bool) -> Result<Self> {
        Self::new(
            allowed
                .iter()
                .map(|m| {
                    m.iter()
                        .map(|r| r.iter().map(|&x| x != 0).collect())
                        .collect()
                })
                .collect(),
            strict,
        )
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    pub fn num_base_symbols(&self) -> usize {
        self.allowed.len()
    }

    pub fn is_strict(&self) -> bool {
        self.strict
    }

    pub fn matrix(&self, s: usize) -> &[Vec<bool>] {
        &self.allowed[s]
    }

    #[inline]
    pub fn allows(&self, s: usize, a: usize, b: usize) -> bool {
        self.allowed[s][a][b]
    }

    pub fn successors(&self, s: usize, a: usize) -> impl Iterator<Item = usize> + '_ {
        self.allowed[s][a]
            .iter()
            .enumerate()
            .filter_map(|(b, &ok)| ok.then_some(b))
    }

    pub fn is_admissible(&self, base: &[usize], fiber: &[usize]) -> bool {
        fiber.len() <= base.len() + 1
            && fiber.iter().all(|&a| a < self.alphabet_size)
            && fiber
                .windows(2)
                .enumerate()
                .all(|(k, w)| self.allows(base[k], w[0], w[1]))
    }

    /// For every fiber symbol a, the number of admissible continuations of
    /// `steps` further symbols when a sits at position `from` of `base`.
    pub fn continuation_counts(&self, base: &[usize], from: usize, steps: usize) -> Vec<f64> {
        let mut v = vec![1.0; self.alphabet_size];
        for k in (from..from + steps).rev() {
            let m = &self.allowed[base[k]];
            v = (0..self.alphabet_size)
                .map(|a| {
                    (0..self.alphabet_size)
                        .filter(|&b| m[a][b])
                        .map(|b| v[b])
                        .sum()
                })
                .collect();
        }
        v
    }

    /// Number of admissible fiber words of length `len` over `base`: the
    /// entry sum of M_{u₀}⋯M_{u_{len−2}}.
    pub fn count_words(&self, base: &[usize], len: usize) -> f64 {
        if len == 0 {
            return 1.0;
        }
        self.continuation_counts(base, 0, len - 1).iter().sum()
    }

    fn check_len(&self, base: &[usize], len: usize) -> Result<()> {
        if len == 0 {
            return Err(Error::InvalidInput("cylinder length must be ≥ 1".into()));
        }
        if base.len() < len {
            return Err(Error::WordTooShort {
                len: base.len(),
                needed: len,
            });
        }
        if let Some(&s) = base.iter().find(|&&s| s >= self.num_base_symbols()) {
            return Err(Error::IndexOutOfRange {
                index: s,
                len: self.num_base_symbols(),
            });
        }
        Ok(())
    }

    /// Visit all admissible length-`len` fiber words over `base` in
    /// lexicographic order.
    pub fn visit_words<F>(
        &self,
        base: &[usize],
        len: usize,
        budget: &Budget,
        mut visit: F,
    ) -> Result<()>
    where
        F: FnMut(&[usize]),
    {
        self.check_len(base, len)?;
        budget.check(self.count_words(base, len))?;
        let mut word = Vec::with_capacity(len);
        for a in 0..self.alphabet_size {
            word.push(a);
            self.visit_from(base, &mut word, len, &mut visit);
            word.pop();
        }
        Ok(())
    }

    fn visit_from<F: FnMut(&[usize])>(
        &self,
        base: &[usize],
        word: &mut Vec<usize>,
        len: usize,
        visit: &mut F,
    ) {
        if word.len() == len {
            visit(word);
            return;
        }
        let k = word.len() - 1;
        let last = word[k];
        for b in 0..self.alphabet_size {
            if self.allowed[base[k]][last][b] {
                word.push(b);
                self.visit_from(base, word, len, visit);
                word.pop();
            }
        }
    }

    /// A random admissible fiber word: uniform first symbol, then uniform
    /// among the admissible successors at each step.
    pub fn sample_word_with<R: rand::Rng + ?Sized>(
        &self,
        base: &[usize],
        len: usize,
        rng: &mut R,
    ) -> Vec<usize> {
        let mut word = Vec::with_capacity(len);
        if len == 0 {
            return word;
        }
        word.push(rng.random_range(0..self.alphabet_size));
        for k in 0..len - 1 {
            let succ: Vec<usize> = self.successors(base[k], word[k]).collect();
            word.push(succ[rng.random_range(0..succ.len())]);
        }
        word
    }

    /// The admissible length-`len` fiber words over `base`.
    pub fn enumerate_cylinders(
        &self,
        base: &[usize],
        len: usize,
        budget: &Budget,
    ) -> Result<Vec<Vec<usize>>> {
        let mut out = Vec::new();
        self.visit_words(base, len, budget, |w| out.push(w.to_vec()))?;
        Ok(out)
    }
}

/// A finite piece (u, w) of a point of the bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cylinder {
    pub base: BaseWord,
    pub fiber: Vec<usize>,
}

impl Cylinder {
    pub fn new(bundle: &BundleSft, base: BaseWord, fiber: Vec<usize>) -> Result<Self> {
        if base.len() != fiber.len() {
            return Err(Error::ShapeMismatch(format!(
                "base word has length {}, fiber word {}",
                base.len(),
                fiber.len()
            )));
        }
        if !bundle.is_admissible(&base.symbols, &fiber) {
            return Err(Error::InvalidInput(
                "fiber word is not admissible over base word".into(),
            ));
        }
        Ok(Self { base, fiber })
    }
}

/// Θᵏ on a finite piece: drop the first `k` coordinates of both words.
/// Iterating is additive in `k`.
pub fn apply_skew<'a>(
    base: &'a [usize],
    fiber: &'a [usize],
    k: usize,
) -> Result<(&'a [usize], &'a [usize])> {
    if k >= base.len() {
        return Err(Error::IndexOutOfRange {
            index: k,
            len: base.len(),
        });
    }
    if k >= fiber.len() {
        return Err(Error::IndexOutOfRange {
            index: k,
            len: fiber.len(),
        });
    }
    Ok((&base[k..], &fiber[k..]))
}

/// d(x, y) = 2^{−first disagreement}, computed from the given coordinates
/// (words agreeing on all of them are at distance 0).
pub fn fiber_distance(x: &[usize], y: &[usize]) -> f64 {
    match x.iter().zip(y).position(|(a, b)| a != b) {
        Some(k) => 0.5f64.powi(k as i32),
        None => 0.0,
    }
}

/// d^ω_{ε,n}(x, y) = max_{k<n} d(Tᵏx, Tᵏy) / ε with ε = 2^{−m}.
pub fn bowen_distance(x: &[usize], y: &[usize], n: usize, m: usize) -> f64 {
    let eps = 0.5f64.powi(m as i32);
    (0..n.min(x.len()).min(y.len()))
        .map(|k| fiber_distance(&x[k..], &y[k..]) / eps)
        .fold(0.0, f64::max)
}

/// (ω, 2^{−m}, n)-separation: d^ω_{ε,n}(x, y) > 1, which for the shift
/// metric means x and y differ somewhere in coordinates 0..n+m−1.
pub fn separated(x: &[usize], y: &[usize], n: usize, m: usize) -> Result<bool> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidInput("n and m must be ≥ 1".into()));
    }
    let needed = n + m - 1;
    for len in [x.len(), y.len()] {
        if len < needed {
            return Err(Error::WordTooShort { len, needed });
        }
    }
    Ok(x[..needed] != y[..needed])
}
