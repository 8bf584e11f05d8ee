//! Sub-additive potential families F = {f_n} that are locally constant:
//! f_n(u, w) only reads the first n coordinates of the base and fiber words.
//!
//! Three families ship: Birkhoff sums of a one-step table, log-norms of
//! matrix cocycle products, and t · log‖(cocycle product)⁻¹‖, which is
//! −t · log m(B⁽ⁿ⁾) with m(A) = ‖A⁻¹‖⁻¹.

use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::base::BaseChain;
use crate::bundle::BundleSft;
use crate::error::{Error, Result};
use crate::numeric::kahan_sum;

pub trait SubadditivePotential: Debug + Send + Sync {
    /// f_n(u, w). Only the first `n` coordinates of `base` and `fiber` are read.
    fn eval(&self, base: &[usize], fiber: &[usize], n: usize) -> Result<f64>;

    /// The one-step table φ[s][a] when f_n is the Birkhoff sum of φ.
    /// Enables transfer-operator evaluation of partition sums.
    fn additive_table(&self) -> Option<Vec<Vec<f64>>> {
        None
    }

    fn describe(&self) -> String;
}

fn check_args(base: &[usize], fiber: &[usize], n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidInput("potential depth n must be ≥ 1".into()));
    }
    for len in [base.len(), fiber.len()] {
        if len < n {
            return Err(Error::WordTooShort { len, needed: n });
        }
    }
    Ok(())
}

/// f_n = Σ_{k<n} φ(u_k, w_k).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditivePotential {
    table: Vec<Vec<f64>>,
}

impl AdditivePotential {
    pub fn new(table: Vec<Vec<f64>>) -> Result<Self> {
        let width = table.first().map(Vec::len).unwrap_or(0);
        if table.is_empty() || width == 0 || table.iter().any(|r| r.len() != width) {
            return Err(Error::ShapeMismatch(
                "additive table must be a non-empty rectangle".into(),
            ));
        }
        if table.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::InvalidInput(
                "additive table has non-finite entries".into(),
            ));
        }
        Ok(Self { table })
    }

    pub fn constant(num_base: usize, alphabet: usize, c: f64) -> Self {
        Self::new(vec![vec![c; alphabet]; num_base]).expect("constant table is valid")
    }

    pub fn zero(num_base: usize, alphabet: usize) -> Self {
        Self::constant(num_base, alphabet, 0.0)
    }

    /// φ depends on the fiber symbol only.
    pub fn fiber_only(num_base: usize, phi: &[f64]) -> Result<Self> {
        Self::new(vec![phi.to_vec(); num_base])
    }

    pub fn table(&self) -> &[Vec<f64>] {
        &self.table
    }
}

impl SubadditivePotential for AdditivePotential {
    fn eval(&self, base: &[usize], fiber: &[usize], n: usize) -> Result<f64> {
        check_args(base, fiber, n)?;
        Ok(kahan_sum((0..n).map(|k| self.table[base[k]][fiber[k]])))
    }

    fn additive_table(&self) -> Option<Vec<Vec<f64>>> {
        Some(self.table.clone())
    }

    fn describe(&self) -> String {
        "additive".into()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum NormKind {
    #[default]
    Spectral,
    MaxRowSum,
}

pub fn matrix_norm(m: &DMatrix<f64>, kind: NormKind) -> f64 {
    match kind {
        NormKind::MaxRowSum => m
            .row_iter()
            .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max),
        NormKind::Spectral => match m.nrows() {
            1 => m[(0, 0)].abs(),
            2 => {
                // σ_max = (|(a+d, c−b)| + |(a−d, b+c)|) / 2, free of the
                // cancellation in the trace/determinant formula.
                let (a, b, c, d) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
                ((a + d).hypot(c - b) + (a - d).hypot(b + c)) / 2.0
            }
            _ => m.singular_values().max(),
        },
    }
}

/// A matrix product carried as exp(log_scale) · mat, renormalized after
/// every factor so long products neither overflow nor underflow.
struct ScaledProduct {
    mat: DMatrix<f64>,
    log_scale: f64,
}

impl ScaledProduct {
    fn new(first: &DMatrix<f64>) -> Self {
        let mut p = Self {
            mat: first.clone(),
            log_scale: 0.0,
        };
        p.renormalize();
        p
    }

    fn renormalize(&mut self) {
        let s = self.mat.amax();
        if s > 0.0 && s.is_finite() {
            self.mat /= s;
            self.log_scale += s.ln();
        }
    }

    fn log_norm(&self, kind: NormKind) -> f64 {
        matrix_norm(&self.mat, kind).ln() + self.log_scale
    }
}

/// f_n = log‖B(u_{n−1}, w_{n−1}) ⋯ B(u₀, w₀)‖.
#[derive(Debug, Clone, PartialEq)]
pub struct CocyclePotential {
    matrices: Vec<Vec<DMatrix<f64>>>,
    inverses: Option<Vec<Vec<DMatrix<f64>>>>,
    norm: NormKind,
    dim: usize,
}

impl CocyclePotential {
    /// `matrices[s][a]` is the d×d generator used at base symbol s and
    /// fiber symbol a.
    pub fn new(matrices: Vec<Vec<DMatrix<f64>>>, norm: NormKind) -> Result<Self> {
        let dim = matrices
            .first()
            .and_then(|r| r.first())
            .map(|m| m.nrows())
            .ok_or_else(|| Error::ShapeMismatch("cocycle needs at least one matrix".into()))?;
        let width = matrices[0].len();
        for (s, row) in matrices.iter().enumerate() {
            if row.len() != width {
                return Err(Error::ShapeMismatch(format!(
                    "cocycle row for base symbol {s} has {} matrices, expected {width}",
                    row.len()
                )));
            }
            for (a, m) in row.iter().enumerate() {
                if m.nrows() != dim || m.ncols() != dim {
                    return Err(Error::ShapeMismatch(format!(
                        "B({s},{a}) is not {dim}×{dim}"
                    )));
                }
                if m.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidInput(format!(
                        "B({s},{a}) has non-finite entries"
                    )));
                }
            }
        }
        let inverses = matrices
            .iter()
            .map(|row| {
                row.iter()
                    .map(|m| m.clone().try_inverse())
                    .collect::<Option<Vec<_>>>()
            })
            .collect::<Option<Vec<_>>>();
        Ok(Self {
            matrices,
            inverses,
            norm,
            dim,
        })
    }

    /// Scalar cocycle with B(s, a) = values[s][a].
    /// Generators given as nested rows, indexed [s][a][row][col].
    pub fn from_rows(rows: &[Vec<Vec<Vec<f64>>>], norm: NormKind) -> Result<Self> {
        let mut matrices = Vec::with_capacity(rows.len());
        for (s, per_symbol) in rows.iter().enumerate() {
            let mut row_mats = Vec::with_capacity(per_symbol.len());
            for (a, m) in per_symbol.iter().enumerate() {
                let dim = m.len();
                if dim == 0 || m.iter().any(|r| r.len() != dim) {
                    return Err(Error::ShapeMismatch(format!(
                        "B({s},{a}) must be a non-empty square matrix"
                    )));
                }
                row_mats.push(DMatrix::from_fn(dim, dim, |i, j| m[i][j]));
            }
            matrices.push(row_mats);
        }
        Self::new(matrices, norm)
    }

    pub fn scalar(values: &[Vec<f64>]) -> Result<Self> {
        Self::new(
            values
                .iter()
                .map(|r| r.iter().map(|&x| DMatrix::from_element(1, 1, x)).collect())
                .collect(),
            NormKind::Spectral,
        )
    }

    /// Diagonal cocycle with B(s, a) = diag(exp(exponents[s][a][i])).
    pub fn diagonal_exp(exponents: &[Vec<Vec<f64>>], norm: NormKind) -> Result<Self> {
        Self::new(
            exponents
                .iter()
                .map(|r| {
                    r.iter()
                        .map(|e| {
                            DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
                                e.len(),
                                e.iter().map(|x| x.exp()),
                            ))
                        })
                        .collect()
                })
                .collect(),
            norm,
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn norm(&self) -> NormKind {
        self.norm
    }

    pub fn matrices(&self) -> &[Vec<DMatrix<f64>>] {
        &self.matrices
    }

    pub fn is_invertible(&self) -> bool {
        self.inverses.is_some()
    }

    /// Lower bound on log m(B(s, a)) over all generators: the uniform
    /// one-step expansion rate.
    pub fn min_log_conorm(&self) -> Result<f64> {
        let inv = self
            .inverses
            .as_ref()
            .ok_or_else(|| self.singular_error())?;
        Ok(inv
            .iter()
            .flatten()
            .map(|m| -matrix_norm(m, self.norm).ln())
            .fold(f64::INFINITY, f64::min))
    }

    fn singular_error(&self) -> Error {
        for (s, row) in self.matrices.iter().enumerate() {
            for (a, m) in row.iter().enumerate() {
                if m.clone().try_inverse().is_none() {
                    return Error::SingularMatrix(format!("B({s},{a}) is not invertible"));
                }
            }
        }
        Error::SingularMatrix("cocycle generator is not invertible".into())
    }

    /// log‖B⁽ⁿ⁾‖.
    pub fn log_norm(&self, base: &[usize], fiber: &[usize], n: usize) -> Result<f64> {
        check_args(base, fiber, n)?;
        let mut p = ScaledProduct::new(&self.matrices[base[0]][fiber[0]]);
        for k in 1..n {
            p.mat = &self.matrices[base[k]][fiber[k]] * &p.mat;
            p.renormalize();
        }
        let v = p.log_norm(self.norm);
        if !v.is_finite() {
            return Err(Error::SingularMatrix("cocycle product vanished".into()));
        }
        Ok(v)
    }

    /// log‖(B⁽ⁿ⁾)⁻¹‖ = −log m(B⁽ⁿ⁾), built as B₀⁻¹ B₁⁻¹ ⋯ B_{n−1}⁻¹.
    pub fn log_inverse_norm(&self, base: &[usize], fiber: &[usize], n: usize) -> Result<f64> {
        check_args(base, fiber, n)?;
        let inv = self
            .inverses
            .as_ref()
            .ok_or_else(|| self.singular_error())?;
        let mut p = ScaledProduct::new(&inv[base[0]][fiber[0]]);
        for k in 1..n {
            p.mat = &p.mat * &inv[base[k]][fiber[k]];
            p.renormalize();
        }
        Ok(p.log_norm(self.norm))
    }

    fn scalar_log_table(&self) -> Option<Vec<Vec<f64>>> {
        if self.dim != 1 {
            return None;
        }
        let table: Vec<Vec<f64>> = self
            .matrices
            .iter()
            .map(|r| r.iter().map(|m| m[(0, 0)].abs().ln()).collect())
            .collect();
        table
            .iter()
            .flatten()
            .all(|x| x.is_finite())
            .then_some(table)
    }
}

impl SubadditivePotential for CocyclePotential {
    fn eval(&self, base: &[usize], fiber: &[usize], n: usize) -> Result<f64> {
        self.log_norm(base, fiber, n)
    }

    fn additive_table(&self) -> Option<Vec<Vec<f64>>> {
        self.scalar_log_table()
    }

    fn describe(&self) -> String {
        format!("cocycle(d={}, {:?})", self.dim, self.norm)
    }
}

/// f_n⁽ᵗ⁾ = t · log‖(B⁽ⁿ⁾)⁻¹‖ = −t · log m(B⁽ⁿ⁾), sub-additive for t ≥ 0.
#[derive(Debug, Clone)]
pub struct ScaledInverseNormPotential {
    inner: Arc<CocyclePotential>,
    t: f64,
}

impl ScaledInverseNormPotential {
    pub fn new(inner: Arc<CocyclePotential>, t: f64) -> Result<Self> {
        if !(t >= 0.0) || !t.is_finite() {
            return Err(Error::InvalidInput(format!(
                "scale t must be finite and ≥ 0, got {t}"
            )));
        }
        Ok(Self { inner, t })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn inner(&self) -> &CocyclePotential {
        &self.inner
    }

    pub fn with_t(&self, t: f64) -> Result<Self> {
        Self::new(Arc::clone(&self.inner), t)
    }
}

impl SubadditivePotential for ScaledInverseNormPotential {
    fn eval(&self, base: &[usize], fiber: &[usize], n: usize) -> Result<f64> {
        check_args(base, fiber, n)?;
        if self.t == 0.0 {
            return Ok(0.0);
        }
        Ok(self.t * self.inner.log_inverse_norm(base, fiber, n)?)
    }

    fn additive_table(&self) -> Option<Vec<Vec<f64>>> {
        if self.t == 0.0 {
            let rows = self.inner.matrices.len();
            let cols = self.inner.matrices[0].len();
            return Some(vec![vec![0.0; cols]; rows]);
        }
        self.inner.scalar_log_table().map(|t| {
            t.into_iter()
                .map(|r| r.into_iter().map(|x| -self.t * x).collect())
                .collect()
        })
    }

    fn describe(&self) -> String {
        format!(
            "scaled-inverse-norm(t={}, {})",
            self.t,
            self.inner.describe()
        )
    }
}

/// ‖f₁‖ = Σ_s p_s · max_a |f₁(s, a)|. Every fiber symbol can start a point
/// of the fiber, so the max runs over the whole alphabet.
pub fn sup_norm_f1(
    potential: &dyn SubadditivePotential,
    chain: &BaseChain,
    bundle: &BundleSft,
) -> Result<f64> {
    let terms = (0..chain.num_states())
        .map(|s| {
            (0..bundle.alphabet_size())
                .map(|a| potential.eval(&[s], &[a], 1).map(f64::abs))
                .try_fold(0.0f64, |acc, v| v.map(|v| acc.max(v)))
                .map(|mx| chain.stationary()[s] * mx)
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(kahan_sum(terms))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubadditivityReport {
    /// max over samples of f_{n+m} − f_n − f_m ∘ Θⁿ.
    pub worst_violation: f64,
    pub samples: usize,
    /// Samples where the inequality is strict by more than 1e-12.
    pub strict_samples: usize,
}

/// Sample random admissible (u, w, n, m) with n, m ≤ `max_len` and report the
/// worst sub-additivity defect.
pub fn check_subadditivity(
    potential: &dyn SubadditivePotential,
    chain: &BaseChain,
    bundle: &BundleSft,
    sample_count: usize,
    seed: u64,
    max_len: usize,
) -> Result<SubadditivityReport> {
    if sample_count == 0 {
        return Err(Error::InvalidSampleCount(0));
    }
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_len = max_len.max(1);
    let mut worst = f64::NEG_INFINITY;
    let mut strict_samples = 0;
    for _ in 0..sample_count {
        let n = rng.random_range(1..=max_len);
        let m = rng.random_range(1..=max_len);
        let base = chain.sample_with(n + m, &mut rng).symbols;
        let fiber = bundle.sample_word_with(&base, n + m, &mut rng);
        let whole = potential.eval(&base, &fiber, n + m)?;
        let head = potential.eval(&base, &fiber, n)?;
        let tail = potential.eval(&base[n..], &fiber[n..], m)?;
        let defect = whole - head - tail;
        if defect < -1e-12 {
            strict_samples += 1;
        }
        worst = worst.max(defect);
    }
    Ok(SubadditivityReport {
        worst_violation: worst,
        samples: sample_count,
        strict_samples,
    })
}
