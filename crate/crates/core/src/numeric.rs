//! Small numerical kernels shared by the pressure and measure code:
//! compensated summation, streaming log-sum-exp, entropy, enumeration budget.

use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};

/// Default cap on the number of words any single enumeration may visit.
pub const DEFAULT_BUDGET: u64 = 1 << 22;

/// Neumaier-compensated running sum. Results depend only on the order of
/// `add` calls.
#[derive(Debug, Clone, Copy, Default)]
pub struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for KahanSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = KahanSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

pub fn kahan_sum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<KahanSum>().value()
}

/// Streaming log-sum-exp with max-shift. Rescales the running sum whenever
/// a new maximum arrives, so terms up to |x| ~ 700 never overflow.
#[derive(Debug, Clone, Copy)]
pub struct LogSumExp {
    max: f64,
    scaled: KahanSum,
}

impl Default for LogSumExp {
    fn default() -> Self {
        Self {
            max: f64::NEG_INFINITY,
            scaled: KahanSum::new(),
        }
    }
}

impl LogSumExp {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        if x == f64::NEG_INFINITY {
            return;
        }
        if x > self.max {
            let factor = (self.max - x).exp();
            let mut rescaled = KahanSum::new();
            rescaled.add(self.scaled.value() * factor);
            rescaled.add(1.0);
            self.scaled = rescaled;
            self.max = x;
        } else {
            self.scaled.add((x - self.max).exp());
        }
    }

    pub fn is_empty(&self) -> bool {
        self.max == f64::NEG_INFINITY
    }

    /// `None` for an empty sum; callers decide how to report log 0.
    pub fn value(&self) -> Option<f64> {
        if self.is_empty() {
            None
        } else {
            Some(self.max + self.scaled.value().ln())
        }
    }
}

pub fn log_sum_exp<I: IntoIterator<Item = f64>>(iter: I) -> Option<f64> {
    let mut acc = LogSumExp::new();
    for x in iter {
        acc.add(x);
    }
    acc.value()
}

/// Shannon entropy in nats; zero-probability entries contribute nothing.
pub fn entropy(p: &[f64]) -> f64 {
    kahan_sum(p.iter().filter(|&&x| x > 0.0).map(|&x| -x * x.ln()))
}

/// Enumeration budget. Tracks the largest request seen so reports can show
/// how close a run came to the cap.
#[derive(Debug)]
pub struct Budget {
    cap: u64,
    peak: AtomicU64,
}

impl Budget {
    pub fn new(cap: u64) -> Self {
        Self {
            cap,
            peak: AtomicU64::new(0),
        }
    }

    pub fn cap(&self) -> u64 {
        self.cap
    }

    pub fn peak(&self) -> u64 {
        self.peak.load(Ordering::Relaxed)
    }

    /// Admit an enumeration of `requested` items or fail with `BudgetExceeded`.
    pub fn check(&self, requested: f64) -> Result<()> {
        if !(requested <= self.cap as f64) {
            return Err(Error::BudgetExceeded {
                requested,
                cap: self.cap,
            });
        }
        self.peak
            .fetch_max(requested.ceil() as u64, Ordering::Relaxed);
        Ok(())
    }
}

impl Default for Budget {
    fn default() -> Self {
        Self::new(DEFAULT_BUDGET)
    }
}

impl Clone for Budget {
    fn clone(&self) -> Self {
        Self {
            cap: self.cap,
            peak: AtomicU64::new(self.peak()),
        }
    }
}

/// Least-squares line y = a + b x. Returns (a, b); with a single point the
/// slope is zero.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return (ys.first().copied().unwrap_or(0.0), 0.0);
    }
    let mx = kahan_sum(xs.iter().copied()) / n;
    let my = kahan_sum(ys.iter().copied()) / n;
    let sxx = kahan_sum(xs.iter().map(|x| (x - mx) * (x - mx)));
    let sxy = kahan_sum(xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)));
    if sxx == 0.0 {
        return (my, 0.0);
    }
    let b = sxy / sxx;
    (my - b * mx, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lse_matches_naive_and_survives_large_terms() {
        let xs = [0.1, -2.0, 3.5, 1.0];
        let naive = xs.iter().map(|x: &f64| x.exp()).sum::<f64>().ln();
        assert!((log_sum_exp(xs).unwrap() - naive).abs() < 1e-14);

        let big = [700.0, 699.0, 690.0];
        let v = log_sum_exp(big).unwrap();
        assert!(v.is_finite());
        assert!((v - (700.0 + (1.0 + (-1.0f64).exp() + (-10.0f64).exp()).ln())).abs() < 1e-12);
    }

    #[test]
    fn lse_empty_is_none() {
        assert_eq!(log_sum_exp(std::iter::empty()), None);
        assert_eq!(log_sum_exp([f64::NEG_INFINITY]), None);
    }

    #[test]
    fn kahan_beats_naive() {
        let mut xs = vec![1.0];
        xs.extend(std::iter::repeat_n(1e-16, 10_000));
        assert!((kahan_sum(xs) - (1.0 + 1e-12)).abs() < 1e-15);
    }

    #[test]
    fn budget_tracks_peak() {
        let b = Budget::new(100);
        b.check(10.0).unwrap();
        b.check(64.0).unwrap();
        assert_eq!(b.peak(), 64);
        assert!(matches!(b.check(101.0), Err(Error::BudgetExceeded { .. })));
        assert!(b.check(f64::NAN).is_err());
    }

    #[test]
    fn fit_recovers_line() {
        let xs = [1.0, 0.5, 0.25];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 - 3.0 * x).collect();
        let (a, b) = linear_fit(&xs, &ys);
        assert!((a - 2.0).abs() < 1e-12 && (b + 3.0).abs() < 1e-12);
    }
}
