//! Small systems with closed-form pressure, their equilibrium measures, and
//! seeded generators of random systems, measures and potentials.

use std::f64::consts::{E, LN_2};
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::base::BaseChain;
use crate::bundle::BundleSft;
use crate::error::{Error, Result};
use crate::measures::RandomMarkovMeasure;
use crate::potentials::{
    AdditivePotential, CocyclePotential, NormKind, ScaledInverseNormPotential, SubadditivePotential,
};

/// A system together with a potential whose pressure is known exactly.
#[derive(Debug, Clone)]
pub struct ClosedFormFixture {
    pub name: &'static str,
    pub chain: BaseChain,
    pub bundle: BundleSft,
    pub potential: Arc<dyn SubadditivePotential>,
    pub pressure: f64,
}

pub fn golden_ratio() -> f64 {
    (1.0 + 5f64.sqrt()) / 2.0
}

/// Full 2-shift over a one-point base with φ = (0, 1).
pub fn tilted_two_shift() -> ClosedFormFixture {
    ClosedFormFixture {
        name: "tilted-two-shift",
        chain: BaseChain::trivial(),
        bundle: BundleSft::full_shift(2, 1),
        potential: Arc::new(AdditivePotential::fiber_only(1, &[0.0, 1.0]).expect("valid table")),
        pressure: (1.0 + E).ln(),
    }
}

/// log Z_n(m) / n for [`tilted_two_shift`]: every (n+m−1)-word exists and the last
/// m−1 symbols carry no weight.
pub fn tilted_two_shift_finite(n: usize, m: usize) -> f64 {
    (1.0 + E).ln() + (m as f64 - 1.0) / n as f64 * LN_2
}

/// Golden-mean shift (no "11") over a one-point base with φ ≡ 0.
pub fn golden_mean() -> ClosedFormFixture {
    ClosedFormFixture {
        name: "golden-mean",
        chain: BaseChain::trivial(),
        bundle: golden_mean_bundle(),
        potential: Arc::new(AdditivePotential::zero(1, 2)),
        pressure: golden_ratio().ln(),
    }
}

pub fn golden_mean_bundle() -> BundleSft {
    BundleSft::from_ints(&[vec![vec![1, 1], vec![1, 0]]], false).expect("valid matrix")
}

/// Fair Bernoulli base on {s₀, s₁}; three fiber symbols, symbol 2 forbidden
/// as a successor under s₀ and everything allowed under s₁.
pub fn bernoulli_restricted_system() -> (BaseChain, BundleSft) {
    let chain = BaseChain::bernoulli(&[0.5, 0.5]).expect("valid weights");
    let bundle = BundleSft::from_ints(
        &[
            vec![vec![1, 1, 0], vec![1, 1, 0], vec![1, 1, 0]],
            vec![vec![1, 1, 1], vec![1, 1, 1], vec![1, 1, 1]],
        ],
        false,
    )
    .expect("valid matrices");
    (chain, bundle)
}

/// Zero potential on [`bernoulli_restricted_system`]; pressure ½(log 2 + log 3).
pub fn bernoulli_restricted() -> ClosedFormFixture {
    let (chain, bundle) = bernoulli_restricted_system();
    ClosedFormFixture {
        name: "bernoulli-restricted",
        chain,
        bundle,
        potential: Arc::new(AdditivePotential::zero(2, 3)),
        pressure: 0.5 * (LN_2 + 3f64.ln()),
    }
}

pub fn diagonal_two_shift_cocycle() -> CocyclePotential {
    CocyclePotential::diagonal_exp(&[vec![vec![0.0, 0.5], vec![1.0, 0.2]]], NormKind::MaxRowSum)
        .expect("valid generators")
}

/// Full 2-shift with B(a) = diag(e^{α_a}, e^{β_a}), α = (0, 1), β = (0.5, 0.2).
pub fn diagonal_two_shift() -> ClosedFormFixture {
    ClosedFormFixture {
        name: "diagonal-two-shift",
        chain: BaseChain::trivial(),
        bundle: BundleSft::full_shift(2, 1),
        potential: Arc::new(diagonal_two_shift_cocycle()),
        pressure: (1.0 + E).ln().max((0.5f64.exp() + 0.2f64.exp()).ln()),
    }
}

/// Full 2-shift over a one-point base with the scalar cocycle B ≡ 3.
pub fn scalar_two_shift_system() -> (BaseChain, BundleSft, Arc<CocyclePotential>) {
    (
        BaseChain::trivial(),
        BundleSft::full_shift(2, 1),
        Arc::new(CocyclePotential::scalar(&[vec![3.0, 3.0]]).expect("valid scalars")),
    )
}

pub fn scalar_two_shift_root() -> f64 {
    LN_2 / 3f64.ln()
}

/// [`bernoulli_restricted_system`] with B ≡ 3 under s₀ and B ≡ 4 under s₁.
pub fn bernoulli_scalar_system() -> (BaseChain, BundleSft, Arc<CocyclePotential>) {
    let (chain, bundle) = bernoulli_restricted_system();
    let cocycle = CocyclePotential::scalar(&[vec![3.0; 3], vec![4.0; 3]]).expect("valid scalars");
    (chain, bundle, Arc::new(cocycle))
}

pub fn bernoulli_scalar_root() -> f64 {
    6f64.ln() / 12f64.ln()
}

/// Fixtures whose pressure is available in closed form.
pub fn closed_form_fixtures() -> Vec<ClosedFormFixture> {
    let (e_chain, e_bundle, e_cocycle) = scalar_two_shift_system();
    let (f_chain, f_bundle, f_cocycle) = bernoulli_scalar_system();
    let t = 0.5;
    vec![
        tilted_two_shift(),
        golden_mean(),
        bernoulli_restricted(),
        diagonal_two_shift(),
        ClosedFormFixture {
            name: "scalar-two-shift",
            chain: e_chain.clone(),
            bundle: e_bundle.clone(),
            potential: e_cocycle.clone(),
            pressure: LN_2 + 3f64.ln(),
        },
        ClosedFormFixture {
            name: "scalar-two-shift-scaled",
            chain: e_chain,
            bundle: e_bundle,
            potential: Arc::new(ScaledInverseNormPotential::new(e_cocycle, t).expect("t ≥ 0")),
            pressure: LN_2 - t * 3f64.ln(),
        },
        ClosedFormFixture {
            name: "bernoulli-scalar",
            chain: f_chain.clone(),
            bundle: f_bundle.clone(),
            potential: f_cocycle.clone(),
            pressure: 0.5 * (LN_2 + 3f64.ln()) + 0.5 * (3f64.ln() + 4f64.ln()),
        },
        ClosedFormFixture {
            name: "bernoulli-scalar-scaled",
            chain: f_chain,
            bundle: f_bundle,
            potential: Arc::new(ScaledInverseNormPotential::new(f_cocycle, t).expect("t ≥ 0")),
            pressure: 0.5 * (LN_2 + 3f64.ln()) - t * 0.5 * (3f64.ln() + 4f64.ln()),
        },
    ]
}

/// Equilibrium measure of [`tilted_two_shift`]: i.i.d. with P(1) = e/(1+e).
pub fn tilted_two_shift_gibbs() -> RandomMarkovMeasure {
    let q1 = E / (1.0 + E);
    RandomMarkovMeasure::homogeneous(&BaseChain::trivial(), vec![vec![1.0 - q1, q1]; 2])
        .expect("valid measure")
}

/// Maximal-entropy measure of the golden-mean shift.
pub fn parry_measure() -> RandomMarkovMeasure {
    let g = golden_ratio();
    RandomMarkovMeasure::homogeneous(
        &BaseChain::trivial(),
        vec![vec![1.0 / g, 1.0 / (g * g)], vec![1.0, 0.0]],
    )
    .expect("valid measure")
}

fn random_stochastic_row<R: Rng + ?Sized>(rng: &mut R, len: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..len).map(|_| rng.random_range(floor..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|x| x / total).collect()
}

/// Ergodic chain on `states` states with every transition in use.
pub fn random_chain<R: Rng + ?Sized>(rng: &mut R, states: usize) -> BaseChain {
    let t = (0..states)
        .map(|_| random_stochastic_row(rng, states, 0.1))
        .collect();
    BaseChain::new(t).expect("positive matrix is ergodic")
}

fn random_matrix<R: Rng + ?Sized>(rng: &mut R, alphabet: usize, density: f64) -> Vec<Vec<bool>> {
    (0..alphabet)
        .map(|_| {
            let mut row: Vec<bool> = (0..alphabet).map(|_| rng.random_bool(density)).collect();
            if !row.iter().any(|&x| x) {
                row[rng.random_range(0..alphabet)] = true;
            }
            row
        })
        .collect()
}

/// Random chain with |S| ≤ `max_states` and an independent random 0/1
/// matrix per base symbol over |A| ≤ `max_alphabet`.
pub fn random_system<R: Rng + ?Sized>(
    rng: &mut R,
    max_states: usize,
    max_alphabet: usize,
) -> (BaseChain, BundleSft) {
    let states = rng.random_range(1..=max_states);
    let alphabet = rng.random_range(1..=max_alphabet);
    let chain = random_chain(rng, states);
    let allowed = (0..states)
        .map(|_| random_matrix(rng, alphabet, 0.6))
        .collect();
    (
        chain,
        BundleSft::new(allowed, false).expect("rows are nonempty"),
    )
}

/// Like [`random_system`], but every M_s contains a common matrix M₀ that
/// has a cycle, so consistent Markov measures exist.
pub fn random_nested_system<R: Rng + ?Sized>(
    rng: &mut R,
    max_states: usize,
    max_alphabet: usize,
) -> (BaseChain, BundleSft) {
    let states = rng.random_range(1..=max_states);
    let alphabet = rng.random_range(1..=max_alphabet);
    let chain = random_chain(rng, states);
    let core = random_matrix(rng, alphabet, 0.5);
    let allowed = (0..states)
        .map(|_| {
            let extra = random_matrix(rng, alphabet, 0.3);
            core.iter()
                .zip(&extra)
                .map(|(r, e)| r.iter().zip(e).map(|(&x, &y)| x || y).collect())
                .collect()
        })
        .collect();
    (
        chain,
        BundleSft::new(allowed, false).expect("rows are nonempty"),
    )
}

/// Largest set C with every symbol of C having a successor in C under
/// all M_s simultaneously.
fn common_closed_set(bundle: &BundleSft) -> Vec<usize> {
    let alphabet = bundle.alphabet_size();
    let common =
        |a: usize, b: usize| (0..bundle.num_base_symbols()).all(|s| bundle.allows(s, a, b));
    let mut keep = vec![true; alphabet];
    loop {
        let mut changed = false;
        for a in 0..alphabet {
            if keep[a] && !(0..alphabet).any(|b| keep[b] && common(a, b)) {
                keep[a] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    (0..alphabet).filter(|&a| keep[a]).collect()
}

fn lazy_stationary(q: &[Vec<f64>], support: &[usize]) -> Vec<f64> {
    let alphabet = q.len();
    let mut pi = vec![0.0; alphabet];
    for &a in support {
        pi[a] = 1.0 / support.len() as f64;
    }
    for _ in 0..1_000_000 {
        let mut next = vec![0.0; alphabet];
        for a in 0..alphabet {
            for b in 0..alphabet {
                next[b] += pi[a] * q[a][b];
            }
        }
        let mut delta: f64 = 0.0;
        for b in 0..alphabet {
            let v = 0.5 * (pi[b] + next[b]);
            delta = delta.max((v - pi[b]).abs());
            pi[b] = v;
        }
        if delta < 1e-16 {
            break;
        }
    }
    pi
}

/// Scale a nonnegative kernel to row sums `r` and column sums `c`.
fn sinkhorn(mut k: Vec<Vec<f64>>, r: &[f64], c: &[f64]) -> Option<Vec<Vec<f64>>> {
    let n = r.len();
    for _ in 0..20_000 {
        for a in 0..n {
            let s: f64 = k[a].iter().sum();
            if r[a] > 0.0 {
                if s == 0.0 {
                    return None;
                }
                k[a].iter_mut().for_each(|x| *x *= r[a] / s);
            }
        }
        let mut err: f64 = 0.0;
        for b in 0..n {
            let s: f64 = (0..n).map(|a| k[a][b]).sum();
            if c[b] > 0.0 {
                if s == 0.0 {
                    return None;
                }
                for row in k.iter_mut() {
                    row[b] *= c[b] / s;
                }
            }
        }
        for a in 0..n {
            let s: f64 = k[a].iter().sum();
            err = err.max((s - r[a]).abs());
        }
        if err < 1e-15 {
            return Some(k);
        }
    }
    None
}

/// A random valid measure: one π shared by every base symbol, each Q_s a
/// random π-preserving kernel supported in M_s. Rows outside supp π are
/// random over the admissible successors.
pub fn random_consistent_measure<R: Rng + ?Sized>(
    rng: &mut R,
    chain: &BaseChain,
    bundle: &BundleSft,
) -> Result<RandomMarkovMeasure> {
    let alphabet = bundle.alphabet_size();
    let num_base = bundle.num_base_symbols();
    let closed = common_closed_set(bundle);
    if closed.is_empty() {
        return Err(Error::InvalidInput(
            "admissibility matrices share no closed class".into(),
        ));
    }
    let in_closed = |a: usize| closed.contains(&a);
    let common = |a: usize, b: usize| (0..num_base).all(|s| bundle.allows(s, a, b));
    let mut q0 = vec![vec![0.0; alphabet]; alphabet];
    for &a in &closed {
        let support: Vec<usize> = closed.iter().copied().filter(|&b| common(a, b)).collect();
        let w = random_stochastic_row(rng, support.len(), 0.05);
        for (&b, x) in support.iter().zip(w) {
            q0[a][b] = x;
        }
    }
    let pi = lazy_stationary(&q0, &closed);
    let random_row = |rng: &mut R, s: usize, a: usize| {
        let succ: Vec<usize> = bundle.successors(s, a).collect();
        let w = random_stochastic_row(rng, succ.len(), 0.05);
        let mut row = vec![0.0; alphabet];
        for (&b, x) in succ.iter().zip(w) {
            row[b] = x;
        }
        row
    };
    let mut transition = Vec::with_capacity(num_base);
    for s in 0..num_base {
        let kernel: Vec<Vec<f64>> = (0..alphabet)
            .map(|a| {
                (0..alphabet)
                    .map(|b| {
                        if pi[a] > 0.0 && pi[b] > 0.0 && bundle.allows(s, a, b) {
                            rng.random_range(0.05..1.0)
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        let joint = sinkhorn(kernel, &pi, &pi);
        let mut q: Vec<Vec<f64>> = Vec::with_capacity(alphabet);
        for a in 0..alphabet {
            if pi[a] > 0.0 {
                let row = match &joint {
                    Some(j) => {
                        let total: f64 = j[a].iter().sum();
                        j[a].iter().map(|x| x / total).collect()
                    }
                    None => q0[a].clone(),
                };
                q.push(row);
            } else if in_closed(a) {
                q.push(q0[a].clone());
            } else {
                q.push(random_row(rng, s, a));
            }
        }
        transition.push(q);
    }
    let initial = vec![pi; num_base];
    let meas = RandomMarkovMeasure::new(initial, transition)?;
    let check = meas.validate(chain, bundle)?;
    if check.valid {
        Ok(meas)
    } else {
        RandomMarkovMeasure::auto_consistent(chain, meas.transition)
    }
}

/// `count` random valid measures drawn from one ChaCha stream per index.
pub fn seeded_measures(
    chain: &BaseChain,
    bundle: &BundleSft,
    count: usize,
    seed: u64,
) -> Result<Vec<RandomMarkovMeasure>> {
    (0..count)
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            random_consistent_measure(&mut rng, chain, bundle)
        })
        .collect()
}

/// Random square generator with determinant bounded away from zero.
pub fn random_invertible<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DMatrix<f64> {
    loop {
        let m = DMatrix::<f64>::from_fn(dim, dim, |_, _| rng.random_range(-2.0..2.0));
        if m.determinant().abs() > 0.1 {
            return m;
        }
    }
}

pub fn random_additive<R: Rng + ?Sized>(
    rng: &mut R,
    num_base: usize,
    alphabet: usize,
) -> AdditivePotential {
    let table = (0..num_base)
        .map(|_| (0..alphabet).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    AdditivePotential::new(table).expect("nonempty table")
}

pub fn random_cocycle<R: Rng + ?Sized>(
    rng: &mut R,
    num_base: usize,
    alphabet: usize,
) -> CocyclePotential {
    let dim = rng.random_range(1..=2);
    let norm = if rng.random_bool(0.5) {
        NormKind::Spectral
    } else {
        NormKind::MaxRowSum
    };
    let matrices = (0..num_base)
        .map(|_| (0..alphabet).map(|_| random_invertible(rng, dim)).collect())
        .collect();
    CocyclePotential::new(matrices, norm).expect("consistent shapes")
}

/// One of the three potential families, chosen at random.
pub fn random_potential<R: Rng + ?Sized>(
    rng: &mut R,
    num_base: usize,
    alphabet: usize,
) -> Arc<dyn SubadditivePotential> {
    match rng.random_range(0..3) {
        0 => Arc::new(random_additive(rng, num_base, alphabet)),
        1 => Arc::new(random_cocycle(rng, num_base, alphabet)),
        _ => {
            let t = rng.random_range(0.0..2.0);
            Arc::new(
                ScaledInverseNormPotential::new(
                    Arc::new(random_cocycle(rng, num_base, alphabet)),
                    t,
                )
                .expect("t ≥ 0"),
            )
        }
    }
}
