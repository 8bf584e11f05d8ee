//! Bowen equation t ↦ π_T(−t·F) = 0 for the co-norm family
//! F = {log m(B⁽ⁿ⁾)}, and a Lyapunov-spread diagnostic for conformality.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::base::BaseChain;
use crate::bundle::BundleSft;
use crate::error::{Error, Result};
use crate::measures::RandomMarkovMeasure;
use crate::numeric::Budget;
use crate::potentials::{matrix_norm, CocyclePotential, NormKind, ScaledInverseNormPotential};
use crate::pressure::{estimate_pressure, Estimator, Mode, PressureEstimate, MONOTONE_TOL};

pub const MAX_BISECTION_STEPS: usize = 60;

/// Pressure of t·log‖(B⁽ⁿ⁾)⁻¹‖ at depth n and ε = 2^{−m}.
#[allow(clippy::too_many_arguments)]
pub fn pressure_at_t(
    chain: &BaseChain,
    bundle: &BundleSft,
    cocycle: &Arc<CocyclePotential>,
    t: f64,
    n: usize,
    m: usize,
    mode: Mode,
    estimator: Estimator,
    budget: &Budget,
) -> Result<PressureEstimate> {
    if !cocycle.is_invertible() {
        cocycle.min_log_conorm()?;
    }
    let pot = ScaledInverseNormPotential::new(Arc::clone(cocycle), t)?;
    estimate_pressure(chain, bundle, &pot, n, m, mode, estimator, budget)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BowenSettings {
    pub n: usize,
    pub m: usize,
    pub mode: Mode,
    pub estimator: Estimator,
    pub t_max: f64,
    pub tol_t: f64,
    pub tol_p: f64,
}

impl BowenSettings {
    /// Exact mode with the increment estimator between n/2 and n.
    pub fn exact(n: usize, m: usize, t_max: f64) -> Self {
        Self {
            n,
            m,
            mode: Mode::Exact,
            estimator: Estimator::richardson(n),
            t_max,
            tol_t: 1e-10,
            tol_p: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BisectionStep {
    pub iteration: usize,
    pub lower: f64,
    pub upper: f64,
    pub t: f64,
    pub pressure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionRoot {
    pub t_star: f64,
    pub pressure_at_root: f64,
    pub bracket: (f64, f64),
    pub pressure_at_zero: f64,
    pub pressure_at_t_max: f64,
    pub steps: Vec<BisectionStep>,
    /// Both tolerances met before the iteration cap.
    pub converged: bool,
    /// Set when some generator is not conformal; the root then bounds the
    /// dimension from above only.
    pub upper_estimate: bool,
}

/// True when every generator B satisfies ‖B‖·‖B⁻¹‖ = 1 in the spectral norm.
pub fn generators_conformal(cocycle: &CocyclePotential) -> bool {
    if cocycle.dim() == 1 {
        return true;
    }
    cocycle
        .matrices()
        .iter()
        .flatten()
        .all(|b| match b.clone().try_inverse() {
            Some(inv) => {
                let cond =
                    matrix_norm(b, NormKind::Spectral) * matrix_norm(&inv, NormKind::Spectral);
                (cond - 1.0).abs() <= 1e-12
            }
            None => false,
        })
}

/// Bisection for the zero of t ↦ pressure_at_t on [0, t_max].
pub fn dimension_root(
    chain: &BaseChain,
    bundle: &BundleSft,
    cocycle: &Arc<CocyclePotential>,
    settings: &BowenSettings,
    budget: &Budget,
) -> Result<DimensionRoot> {
    if !(settings.t_max > 0.0) || !(settings.tol_t > 0.0) || !(settings.tol_p > 0.0) {
        return Err(Error::InvalidInput(
            "t_max, tol_t and tol_p must be positive".into(),
        ));
    }
    let eval = |t: f64| -> Result<f64> {
        pressure_at_t(
            chain,
            bundle,
            cocycle,
            t,
            settings.n,
            settings.m,
            settings.mode,
            settings.estimator,
            budget,
        )
        .map(|e| e.value)
    };
    let upper_estimate = !generators_conformal(cocycle);
    let p0 = eval(0.0)?;
    if p0.abs() <= settings.tol_p {
        return Ok(DimensionRoot {
            t_star: 0.0,
            pressure_at_root: p0,
            bracket: (0.0, 0.0),
            pressure_at_zero: p0,
            pressure_at_t_max: p0,
            steps: Vec::new(),
            converged: true,
            upper_estimate,
        });
    }
    let p_max = eval(settings.t_max)?;
    if !(p0 > 0.0 && p_max <= 0.0) {
        return Err(Error::NoBracket {
            t_max: settings.t_max,
            p_low: p0,
            p_high: p_max,
        });
    }
    let (mut lo, mut hi) = (0.0, settings.t_max);
    let (mut p_lo, mut p_hi) = (p0, p_max);
    let mut steps = Vec::new();
    let mut best = (settings.t_max, p_max);
    let mut converged = false;
    for iteration in 1..=MAX_BISECTION_STEPS {
        let t = 0.5 * (lo + hi);
        let p = eval(t)?;
        if p > p_lo + MONOTONE_TOL {
            return Err(Error::NonMonotone {
                t1: lo,
                p1: p_lo,
                t2: t,
                p2: p,
            });
        }
        if p < p_hi - MONOTONE_TOL {
            return Err(Error::NonMonotone {
                t1: t,
                p1: p,
                t2: hi,
                p2: p_hi,
            });
        }
        steps.push(BisectionStep {
            iteration,
            lower: lo,
            upper: hi,
            t,
            pressure: p,
        });
        best = (t, p);
        if p > 0.0 {
            lo = t;
            p_lo = p;
        } else {
            hi = t;
            p_hi = p;
        }
        if (hi - lo <= settings.tol_t && p.abs() <= settings.tol_p) || p == 0.0 {
            converged = true;
            break;
        }
    }
    Ok(DimensionRoot {
        t_star: best.0,
        pressure_at_root: best.1,
        bracket: (lo, hi),
        pressure_at_zero: p0,
        pressure_at_t_max: p_max,
        steps,
        converged,
        upper_estimate,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSpread {
    pub depth: usize,
    /// (1/n)∫ log‖B⁽ⁿ⁾‖ dμ.
    pub top: f64,
    /// (1/n)∫ log m(B⁽ⁿ⁾) dμ.
    pub bottom: f64,
    pub spread: f64,
}

/// Estimate the extreme Lyapunov exponents of the cocycle under `meas` at
/// depth n. A spread near zero indicates conformality for this μ and n only.
pub fn lyapunov_spread(
    chain: &BaseChain,
    bundle: &BundleSft,
    cocycle: &Arc<CocyclePotential>,
    meas: &RandomMarkovMeasure,
    n: usize,
    budget: &Budget,
) -> Result<LyapunovSpread> {
    if n == 0 {
        return Err(Error::InvalidInput("depth must be ≥ 1".into()));
    }
    cocycle.min_log_conorm()?;
    let check = meas.validate(chain, bundle)?;
    if !check.valid {
        return Err(Error::InvalidMeasure(format!(
            "measure failed validation: {check:?}"
        )));
    }
    let top = meas.potential_average(chain, bundle, cocycle.as_ref(), n, budget)? / n as f64;
    let inv = ScaledInverseNormPotential::new(Arc::clone(cocycle), 1.0)?;
    let bottom = -meas.potential_average(chain, bundle, &inv, n, budget)? / n as f64;
    Ok(LyapunovSpread {
        depth: n,
        top,
        bottom,
        spread: top - bottom,
    })
}
