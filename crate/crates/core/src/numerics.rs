//! Scalar special functions shared by the splitter, rabi and fitting engines.
//!
//! Probability mass functions are evaluated in log space and exponentiated
//! once at the end, so that photon or step counts in the thousands never
//! touch an overflowing factorial.

use num_complex::Complex64;

use crate::error::{check_probability, Error, Result};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Below this `min(k, n - k)` the binomial coefficient is accumulated as a
/// product of ratios; above it the Stirling form is used.
const DIRECT_PRODUCT_LIMIT: u64 = 30;

/// Natural logarithm of a nonnegative weight. `-inf` encodes weight zero.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct LogWeight(pub f64);

impl LogWeight {
    pub const ZERO: LogWeight = LogWeight(f64::NEG_INFINITY);
    pub const ONE: LogWeight = LogWeight(0.0);

    pub fn ln(self) -> f64 {
        self.0
    }

    pub fn exp(self) -> f64 {
        self.0.exp()
    }

    pub fn is_zero(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }
}

impl std::ops::Add for LogWeight {
    type Output = LogWeight;

    /// Multiplies the underlying weights.
    fn add(self, rhs: LogWeight) -> LogWeight {
        if self.is_zero() || rhs.is_zero() {
            LogWeight::ZERO
        } else {
            LogWeight(self.0 + rhs.0)
        }
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl std::iter::FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::new();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// Stirling-series remainder `ln m! - [(m + 1/2) ln m - m + ln sqrt(2 pi)]`,
/// valid to full double precision for `m > DIRECT_PRODUCT_LIMIT`.
fn stirling_remainder(m: f64) -> f64 {
    let inv = 1.0 / m;
    let inv2 = inv * inv;
    inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0 - inv2 / 1188.0))))
}

/// `ln C(n, k)`.
pub fn log_binomial_coeff(n: u64, k: u64) -> Result<LogWeight> {
    if k > n {
        return Err(Error::domain(format!("binomial coefficient with k = {k} > n = {n}")));
    }
    let k = k.min(n - k);
    if k == 0 {
        return Ok(LogWeight::ONE);
    }
    if k <= DIRECT_PRODUCT_LIMIT {
        // C(n, k) = prod_{i=1}^{k} (n - k + i) / i
        let base = (n - k) as f64;
        let sum: CompensatedSum = (1..=k).map(|i| (base / i as f64).ln_1p()).collect();
        return Ok(LogWeight(sum.value()));
    }
    // Loader's saddle-point form; no large terms cancel.
    let (nf, kf) = (n as f64, k as f64);
    let rest = nf - kf;
    let value = stirling_remainder(nf) - stirling_remainder(kf) - stirling_remainder(rest)
        + 0.5 * (nf / (kf * rest)).ln()
        - LN_SQRT_2PI
        + kf * (nf / kf).ln()
        - rest * (-kf / nf).ln_1p();
    Ok(LogWeight(value))
}

/// `x ln p` with the convention `0 ln 0 = 0`.
fn x_ln(count: u64, ln_p: f64) -> f64 {
    if count == 0 {
        0.0
    } else {
        count as f64 * ln_p
    }
}

/// Log of `C(n,k) beta^k (1-beta)^(n-k)`.
pub fn log_binomial_pmf(n: u64, k: u64, beta: f64) -> Result<LogWeight> {
    check_probability("beta", beta)?;
    let coeff = log_binomial_coeff(n, k)?;
    let value = coeff.ln() + x_ln(k, beta.ln()) + x_ln(n - k, (-beta).ln_1p());
    Ok(if value.is_nan() { LogWeight::ZERO } else { LogWeight(value) })
}

pub fn binomial_pmf(n: u64, k: u64, beta: f64) -> Result<f64> {
    log_binomial_pmf(n, k, beta).map(LogWeight::exp)
}

/// `n! / (j! k! l!) p1^j p2^k p3^l` for `counts = (j, k, l)` summing to `n`.
pub fn multinomial_pmf(n: u64, counts: [u64; 3], probs: [f64; 3]) -> Result<f64> {
    let [j, k, l] = counts;
    if j.checked_add(k).and_then(|s| s.checked_add(l)) != Some(n) {
        return Err(Error::domain(format!("counts {counts:?} do not sum to n = {n}")));
    }
    for (i, p) in probs.iter().enumerate() {
        check_probability(&format!("probs[{i}]"), *p)?;
    }
    // n!/(j!k!l!) = C(n, j) C(n - j, k)
    let coeff = log_binomial_coeff(n, j)?.ln() + log_binomial_coeff(n - j, k)?.ln();
    let value = coeff + x_ln(j, probs[0].ln()) + x_ln(k, probs[1].ln()) + x_ln(l, probs[2].ln());
    Ok(if value.is_nan() { 0.0 } else { value.exp() })
}

/// Generalized Laguerre polynomial `L^alpha_n(x)` by forward three-term recurrence.
pub fn laguerre_gen(n: usize, alpha: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut curr = 1.0 + alpha - x;
    for m in 1..n {
        let m = m as f64;
        let next = ((2.0 * m + 1.0 + alpha - x) * curr - (m + alpha) * prev) / (m + 1.0);
        prev = curr;
        curr = next;
    }
    curr
}

/// Bounded derivative-free minimization by golden-section search.
///
/// Returns a point in `[lo, hi]` within `tol` of a local minimizer. The two
/// endpoints are compared against the interior result, so a minimum sitting
/// on a bound is returned exactly.
pub fn minimize_scalar<F>(mut objective: F, lo: f64, hi: f64, tol: f64) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(Error::domain(format!("invalid bracket [{lo}, {hi}]")));
    }
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::domain(format!("tolerance {tol} must be > 0")));
    }
    let mut eval = |x: f64| -> Result<f64> {
        let y = objective(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::NonFinite { x })
        }
    };

    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = eval(c)?;
    let mut fd = eval(d)?;
    // The cap only matters when tol is below the float spacing of the bracket.
    let mut iterations = 0;
    while b - a > tol && iterations < 300 {
        iterations += 1;
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = eval(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = eval(d)?;
        }
    }
    let mid = 0.5 * (a + b);
    let mut best = (mid, eval(mid)?);
    for x in [lo, hi] {
        let y = eval(x)?;
        if y < best.1 {
            best = (x, y);
        }
    }
    Ok(best.0)
}

/// Principal-branch `base^exponent = exp(exponent * Log base)`.
pub fn complex_real_power(base: Complex64, exponent: f64) -> Result<Complex64> {
    if base == Complex64::new(0.0, 0.0) {
        if exponent > 0.0 {
            return Ok(Complex64::new(0.0, 0.0));
        }
        return Err(Error::domain(format!("0 raised to non-positive power {exponent}")));
    }
    Ok((base.ln() * exponent).exp())
}
