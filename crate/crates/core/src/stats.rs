//! Numerical kernels: χ² tail, Kolmogorov–Smirnov uniformity, Poisson
//! probabilities and the two-sided normal tail.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("need at least {needed} samples, got {got}")]
    TooFewSamples { needed: usize, got: usize },
    #[error("sample {index} = {value} lies outside [0, 1]")]
    SampleOutOfRange { index: usize, value: f64 },
}

/// A probability in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PValue(f64);

impl PValue {
    const SLACK: f64 = 1e-12;

    /// Clamps floating-point overshoot back into `[0, 1]`.
    ///
    /// # Panics
    ///
    /// If `raw` is NaN or further than 1e-12 outside the unit interval: that
    /// is a bug in the computation, not rounding.
    pub fn new(raw: f64) -> PValue {
        assert!(
            (-Self::SLACK..=1.0 + Self::SLACK).contains(&raw),
            "p-value {raw} outside [0, 1] beyond rounding slack"
        );
        PValue(raw.clamp(0.0, 1.0))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<PValue> for f64 {
    fn from(p: PValue) -> f64 {
        p.0
    }
}

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// ln Γ(x) for x > 0.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        return (PI / (PI * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

const EPS: f64 = 1e-16;
const MAX_ITER: usize = 100_000;

/// Regularized upper incomplete gamma Q(a, x).
///
/// Series for `x < a + 1`, Lentz continued fraction otherwise.
pub fn gamma_q(a: f64, x: f64) -> Result<f64, StatsError> {
    if a.is_nan() || a <= 0.0 || a.is_infinite() {
        return Err(StatsError::Domain(format!(
            "shape a = {a} must be positive"
        )));
    }
    if x.is_nan() || x < 0.0 {
        return Err(StatsError::Domain(format!("x = {x} must be non-negative")));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    if x.is_infinite() {
        return Ok(0.0);
    }
    let log_prefactor = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        let mut ap = a;
        let mut term = 1.0 / a;
        let mut sum = term;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * EPS {
                break;
            }
        }
        Ok((1.0 - sum * log_prefactor.exp()).max(0.0))
    } else {
        let tiny = f64::MIN_POSITIVE / EPS;
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + an / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = d * c;
            h *= delta;
            if (delta - 1.0).abs() < EPS {
                break;
            }
        }
        Ok((log_prefactor.exp() * h).min(1.0))
    }
}

/// Upper tail P(X >= statistic) of the χ² distribution with `dof` degrees
/// of freedom.
pub fn chi2_tail(statistic: f64, dof: u64) -> Result<PValue, StatsError> {
    if dof == 0 {
        return Err(StatsError::Domain(
            "χ² needs at least one degree of freedom".into(),
        ));
    }
    if statistic.is_nan() || statistic < 0.0 {
        return Err(StatsError::Domain(format!(
            "χ² statistic {statistic} must be non-negative"
        )));
    }
    Ok(PValue::new(gamma_q(dof as f64 / 2.0, statistic / 2.0)?))
}

/// erfc(|z| / √2): the probability that a standard normal exceeds |z| in
/// absolute value.
pub fn normal_tail_two_sided(z: f64) -> PValue {
    assert!(!z.is_nan(), "z-score is NaN");
    // erfc(t) = Q(1/2, t²)
    PValue::new(gamma_q(0.5, z * z / 2.0).expect("shape 1/2 is valid"))
}

/// Stirling-series remainder: ln n! - [(n + ½) ln n - n + ½ ln 2π].
fn stirling_error(n: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n <= 15.0 {
        return ln_gamma(n + 1.0) - (n + 0.5) * n.ln() + n - 0.5 * (2.0 * PI).ln();
    }
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// Deviance term x ln(x / m) + m - x, evaluated without cancellation when
/// x is close to m.
fn deviance(x: f64, m: f64) -> f64 {
    if (x - m).abs() < 0.1 * (x + m) {
        let mut v = (x - m) / (x + m);
        let mut s = (x - m) * v;
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let next = s + ej / (2 * j + 1) as f64;
            if next == s {
                return next;
            }
            s = next;
        }
        s
    } else {
        x * (x / m).ln() + m - x
    }
}

/// P(N = k) for N ~ Poisson(λ), via the saddle-point form so that the
/// relative error stays small even when k and λ are both large.
pub fn poisson_pmf(k: u64, lambda: f64) -> Result<f64, StatsError> {
    if lambda.is_nan() || lambda <= 0.0 || lambda.is_infinite() {
        return Err(StatsError::Domain(format!(
            "λ = {lambda} must be positive and finite"
        )));
    }
    if k == 0 {
        return Ok((-lambda).exp());
    }
    let x = k as f64;
    Ok((-stirling_error(x) - deviance(x, lambda)).exp() / (2.0 * PI * x).sqrt())
}

/// Result of a Kolmogorov–Smirnov test against Uniform(0, 1).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KsOutcome {
    pub statistic: f64,
    pub p: PValue,
}

/// Largest matrix order evaluated by the exact finite-n method; beyond it
/// the corrected asymptotic formula takes over.
const KS_EXACT_MAX_ORDER: usize = 200;

/// Two-sided one-sample KS test of `samples` against Uniform(0, 1).
///
/// Small problems use the exact finite-n distribution (matrix-power
/// method); larger ones the asymptotic Kolmogorov law at
/// `D·(√n + 0.12 + 0.11/√n)`.
pub fn ks_uniform(samples: &[f64]) -> Result<KsOutcome, StatsError> {
    const MIN_SAMPLES: usize = 5;
    if samples.len() < MIN_SAMPLES {
        return Err(StatsError::TooFewSamples {
            needed: MIN_SAMPLES,
            got: samples.len(),
        });
    }
    if let Some((index, &value)) = samples
        .iter()
        .enumerate()
        .find(|(_, v)| !(0.0..=1.0).contains(*v))
    {
        return Err(StatsError::SampleOutOfRange { index, value });
    }
    let d = ks_statistic(samples);
    let n = samples.len();
    Ok(KsOutcome {
        statistic: d,
        p: PValue::new(ks_tail(n, d)),
    })
}

fn ks_statistic(samples: &[f64]) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| ((i + 1) as f64 / n - x).max(x - i as f64 / n))
        .fold(0.0, f64::max)
}

/// P(D_n >= d).
pub fn ks_tail(n: usize, d: f64) -> f64 {
    if d <= 0.0 {
        return 1.0;
    }
    if d >= 1.0 {
        return 0.0;
    }
    let k = (n as f64 * d).floor() as usize + 1;
    if 2 * k - 1 <= KS_EXACT_MAX_ORDER {
        (1.0 - ks_cdf_exact(n, d)).clamp(0.0, 1.0)
    } else {
        let sn = (n as f64).sqrt();
        kolmogorov_tail(d * (sn + 0.12 + 0.11 / sn))
    }
}

/// Asymptotic Kolmogorov upper tail P(K > t).
fn kolmogorov_tail(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t < 1.18 {
        // P(K <= t) = √(2π)/t Σ exp(-(2j-1)² π² / (8t²))
        let f = -PI * PI / (8.0 * t * t);
        let cdf: f64 = (1..=20)
            .map(|j| {
                let odd = (2 * j - 1) as f64;
                (odd * odd * f).exp()
            })
            .sum::<f64>()
            * (2.0 * PI).sqrt()
            / t;
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        // P(K > t) = 2 Σ (-1)^(j-1) exp(-2 j² t²)
        let mut sum = 0.0;
        let mut sign = 1.0;
        for j in 1..=100 {
            let term = (-2.0 * (j * j) as f64 * t * t).exp();
            sum += sign * term;
            if term < 1e-300 {
                break;
            }
            sign = -sign;
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

/// Exact P(D_n < d) by the matrix-power method of Marsaglia, Tsang and
/// Wang, with decimal exponent tracking to avoid overflow.
fn ks_cdf_exact(n: usize, d: f64) -> f64 {
    let nd = n as f64 * d;
    let k = nd.floor() as usize + 1;
    let m = 2 * k - 1;
    let h = k as f64 - nd;

    let mut hm = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            if i + 1 >= j {
                hm[i * m + j] = 1.0;
            }
        }
    }
    for i in 0..m {
        hm[i * m] -= h.powi(i as i32 + 1);
        hm[(m - 1) * m + i] -= h.powi((m - i) as i32);
    }
    if 2.0 * h - 1.0 > 0.0 {
        hm[(m - 1) * m] += (2.0 * h - 1.0).powi(m as i32);
    }
    for i in 0..m {
        for j in 0..m {
            if i + 1 > j {
                for g in 1..=(i + 1 - j) {
                    hm[i * m + j] /= g as f64;
                }
            }
        }
    }

    let (q, mut exp10) = matrix_power(&hm, 0, m, n);
    let mut s = q[(k - 1) * m + k - 1];
    for i in 1..=n {
        s = s * i as f64 / n as f64;
        if s < 1e-140 {
            s *= 1e140;
            exp10 -= 140;
        }
    }
    s * 10f64.powi(exp10)
}

fn matrix_multiply(a: &[f64], b: &[f64], m: usize) -> Vec<f64> {
    let mut c = vec![0.0; m * m];
    for i in 0..m {
        for l in 0..m {
            let x = a[i * m + l];
            if x == 0.0 {
                continue;
            }
            for j in 0..m {
                c[i * m + j] += x * b[l * m + j];
            }
        }
    }
    c
}

fn matrix_power(a: &[f64], exp_a: i32, m: usize, n: usize) -> (Vec<f64>, i32) {
    if n == 1 {
        return (a.to_vec(), exp_a);
    }
    let (half, exp_half) = matrix_power(a, exp_a, m, n / 2);
    let sq = matrix_multiply(&half, &half, m);
    let exp_sq = 2 * exp_half;
    let (mut v, mut exp_v) = if n.is_multiple_of(2) {
        (sq, exp_sq)
    } else {
        (matrix_multiply(a, &sq, m), exp_a + exp_sq)
    };
    if v[(m / 2) * m + m / 2] > 1e140 {
        v.iter_mut().for_each(|x| *x *= 1e-140);
        exp_v += 140;
    }
    (v, exp_v)
}

/// Outcome of a pooled χ² goodness-of-fit test.
#[derive(Clone, Debug, PartialEq)]
pub struct Chi2Fit {
    pub statistic: f64,
    pub dof: u64,
    /// Number of bins after pooling.
    pub bins: usize,
    pub p: PValue,
}

/// Pearson χ² of `observed` counts against cell probabilities `probs`.
///
/// Adjacent cells are pooled left to right until each pooled cell expects
/// at least `min_expected` hits; a short final pool is merged into its
/// predecessor. Fails when fewer than two pooled cells remain.
pub fn chi2_goodness_of_fit(
    observed: &[u64],
    probs: &[f64],
    min_expected: f64,
) -> Result<Chi2Fit, StatsError> {
    if observed.len() != probs.len() {
        return Err(StatsError::Domain(format!(
            "{} observed cells but {} probabilities",
            observed.len(),
            probs.len()
        )));
    }
    let total: u64 = observed.iter().sum();
    if total == 0 {
        return Err(StatsError::Domain("no observations".into()));
    }
    let n = total as f64;

    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let (mut o_acc, mut e_acc) = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(probs) {
        o_acc += o as f64;
        e_acc += p * n;
        if e_acc >= min_expected {
            pooled.push((o_acc, e_acc));
            o_acc = 0.0;
            e_acc = 0.0;
        }
    }
    if e_acc > 0.0 || o_acc > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += o_acc;
                last.1 += e_acc;
            }
            None => pooled.push((o_acc, e_acc)),
        }
    }
    if pooled.len() < 2 {
        return Err(StatsError::Domain(format!(
            "only {} cell(s) reach the expected count of {min_expected}",
            pooled.len()
        )));
    }
    let statistic: f64 = pooled.iter().map(|&(o, e)| (o - e) * (o - e) / e).sum();
    let dof = pooled.len() as u64 - 1;
    Ok(Chi2Fit {
        statistic,
        dof,
        bins: pooled.len(),
        p: chi2_tail(statistic, dof)?,
    })
}

/// Pearson χ² against equal cell probabilities, without pooling.
pub fn chi2_uniform(observed: &[u64]) -> Result<Chi2Fit, StatsError> {
    if observed.len() < 2 {
        return Err(StatsError::Domain("need at least two cells".into()));
    }
    let total: u64 = observed.iter().sum();
    if total == 0 {
        return Err(StatsError::Domain("no observations".into()));
    }
    let e = total as f64 / observed.len() as f64;
    let statistic = observed
        .iter()
        .map(|&o| {
            let diff = o as f64 - e;
            diff * diff / e
        })
        .sum();
    let dof = observed.len() as u64 - 1;
    Ok(Chi2Fit {
        statistic,
        dof,
        bins: observed.len(),
        p: chi2_tail(statistic, dof)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Adaptive Simpson quadrature; independent of the incomplete gamma code.
    fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
        fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64, f64) {
            let m = 0.5 * (a + b);
            let fm = f(m);
            (m, fm, (b - a) / 6.0 * (fa + 4.0 * fm + fb))
        }
        #[allow(clippy::too_many_arguments)]
        fn recurse(
            f: &dyn Fn(f64) -> f64,
            a: f64,
            fa: f64,
            b: f64,
            fb: f64,
            whole: f64,
            m: f64,
            fm: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let (lm, flm, left) = simpson(f, a, fa, m, fm);
            let (rm, frm, right) = simpson(f, m, fm, b, fb);
            let delta = left + right - whole;
            if depth == 0
                || delta.abs() <= 15.0 * tol
                || delta.abs() <= 1e-15 * (left + right).abs()
            {
                return left + right + delta / 15.0;
            }
            recurse(f, a, fa, m, fm, left, lm, flm, tol / 2.0, depth - 1)
                + recurse(f, m, fm, b, fb, right, rm, frm, tol / 2.0, depth - 1)
        }
        let (fa, fb) = (f(a), f(b));
        let (m, fm, whole) = simpson(f, a, fa, b, fb);
        recurse(f, a, fa, b, fb, whole, m, fm, tol, 50)
    }

    #[test]
    fn chi2_tail_at_zero_is_one() {
        for k in [1, 2, 7, 119, 1000] {
            assert_eq!(chi2_tail(0.0, k).unwrap().value(), 1.0);
        }
    }

    #[test]
    fn chi2_tail_one_dof_matches_quadrature() {
        let density = |x: f64| (-x / 2.0).exp() / (2.0 * PI * x).sqrt();
        let oracle = adaptive_simpson(&density, 1.0, 200.0, 1e-13);
        let p = chi2_tail(1.0, 1).unwrap().value();
        assert!((oracle - 0.31731).abs() < 1e-4);
        assert!((p - oracle).abs() < 1e-10, "p={p} oracle={oracle}");
    }

    #[test]
    fn chi2_tail_far_tail_vanishes() {
        assert!(chi2_tail(1e9, 5).unwrap().value() < 1e-12);
        assert_eq!(chi2_tail(f64::INFINITY, 5).unwrap().value(), 0.0);
    }

    #[test]
    fn chi2_tail_domain_errors() {
        assert!(matches!(chi2_tail(-1.0, 3), Err(StatsError::Domain(_))));
        assert!(matches!(chi2_tail(1.0, 0), Err(StatsError::Domain(_))));
        assert!(matches!(chi2_tail(f64::NAN, 3), Err(StatsError::Domain(_))));
    }

    #[test]
    fn chi2_tail_two_dof_closed_form() {
        for i in 0..=1000 {
            let s = i as f64 * 0.1;
            let p = chi2_tail(s, 2).unwrap().value();
            assert!((p - (-s / 2.0).exp()).abs() <= 1e-12, "s={s}");
        }
    }

    #[test]
    fn chi2_tail_matches_quadrature_across_dof() {
        for &dof in &[3u64, 10, 50, 119, 400] {
            let a = dof as f64 / 2.0;
            let lg = ln_gamma(a);
            let density = move |x: f64| {
                if x <= 0.0 {
                    0.0
                } else {
                    ((a - 1.0) * (x / 2.0).ln() - x / 2.0 - lg).exp() / 2.0
                }
            };
            for &s in &[0.5 * dof as f64, dof as f64, 1.7 * dof as f64] {
                let upper = s + 40.0 * (dof as f64).sqrt() + 200.0;
                let oracle = adaptive_simpson(&density, s, upper, 1e-12);
                let p = chi2_tail(s, dof).unwrap().value();
                assert!(
                    (p - oracle).abs() < 1e-9,
                    "dof={dof} s={s} p={p} oracle={oracle}"
                );
            }
        }
    }

    #[test]
    fn chi2_tail_strictly_decreasing() {
        for &dof in &[1u64, 5, 119, 1000] {
            let mut prev = 1.0 + 1e-9;
            for i in 0..1000 {
                let s = i as f64 * (3.0 * dof as f64 + 30.0) / 1000.0;
                let p = chi2_tail(s, dof).unwrap().value();
                // strict only away from the rounding limits at 0 and 1
                if p > 0.0 && p < 1.0 - 1e-12 {
                    assert!(p < prev, "dof={dof} s={s}: {p} !< {prev}");
                } else {
                    assert!(p <= prev);
                }
                prev = p;
            }
        }
    }

    #[test]
    fn normal_tail_values() {
        assert_eq!(normal_tail_two_sided(0.0).value(), 1.0);
        let density = |x: f64| (-x * x / 2.0).exp() / (2.0 * PI).sqrt();
        let oracle = 2.0 * adaptive_simpson(&density, 1.959964, 40.0, 1e-15);
        let p = normal_tail_two_sided(1.959964).value();
        assert!((p - 0.05).abs() < 1e-4);
        assert!((p - oracle).abs() < 1e-12, "p={p} oracle={oracle}");
        for z in [0.3, 1.0, 2.5, 8.0] {
            assert_eq!(normal_tail_two_sided(z), normal_tail_two_sided(-z));
        }
        let oracle8 = 2.0 * adaptive_simpson(&density, 8.0, 40.0, 1e-30);
        assert!((normal_tail_two_sided(8.0).value() - oracle8).abs() < 1e-12);
    }

    #[test]
    fn poisson_small_cases() {
        assert!((poisson_pmf(0, 3.5).unwrap() - (-3.5f64).exp()).abs() < 1e-16);
        let expected = 2.0 * (-2.0f64).exp();
        let got = poisson_pmf(2, 2.0).unwrap();
        assert!(((got - expected) / expected).abs() < 1e-12);
        assert!((got - 0.27067).abs() < 1e-5);
    }

    #[test]
    fn poisson_matches_direct_product_for_moderate_k() {
        for &lambda in &[0.5f64, 2.0, 7.25, 30.0] {
            let mut direct = (-lambda).exp();
            for k in 0..60u64 {
                if k > 0 {
                    direct *= lambda / k as f64;
                }
                let got = poisson_pmf(k, lambda).unwrap();
                assert!(((got - direct) / direct).abs() < 1e-11, "k={k} λ={lambda}");
            }
        }
    }

    #[test]
    fn poisson_domain_errors() {
        assert!(poisson_pmf(1, 0.0).is_err());
        assert!(poisson_pmf(1, -1.0).is_err());
        assert!(poisson_pmf(1, f64::NAN).is_err());
        assert!(poisson_pmf(1, f64::INFINITY).is_err());
    }

    #[test]
    fn poisson_mass_sums_to_one() {
        for &lambda in &[0.1f64, 2.0, 17.0, 250.0, 5000.0] {
            let upper = (lambda + 20.0 * lambda.sqrt() + 50.0) as u64;
            let total: f64 = (0..=upper).map(|k| poisson_pmf(k, lambda).unwrap()).sum();
            assert!((total - 1.0).abs() < 1e-9, "λ={lambda}: {total}");
        }
    }

    #[test]
    fn ks_constant_samples() {
        let out = ks_uniform(&[0.5; 100]).unwrap();
        assert_eq!(out.statistic, 0.5);
    }

    #[test]
    fn ks_ideal_grid() {
        let n = 40;
        let xs: Vec<f64> = (1..=n).map(|i| (i as f64 - 0.5) / n as f64).collect();
        let out = ks_uniform(&xs).unwrap();
        assert!((out.statistic - 0.5 / n as f64).abs() < 1e-15);
        assert_eq!(out.p.value(), 1.0);
    }

    #[test]
    fn ks_errors() {
        assert_eq!(
            ks_uniform(&[0.1, 0.2, 0.3, 0.4]),
            Err(StatsError::TooFewSamples { needed: 5, got: 4 })
        );
        assert!(matches!(
            ks_uniform(&[0.1, 0.2, 1.3, 0.4, 0.5]),
            Err(StatsError::SampleOutOfRange { index: 2, .. })
        ));
    }

    #[test]
    fn ks_asymptotic_branch_is_continuous_enough() {
        // close to where the exact method hands over, both agree loosely
        let n = 1000;
        let d = 0.05;
        let exact = 1.0 - ks_cdf_exact(n, d);
        let sn = (n as f64).sqrt();
        let asym = kolmogorov_tail(d * (sn + 0.12 + 0.11 / sn));
        assert!((exact - asym).abs() < 2e-3, "exact={exact} asym={asym}");
    }

    #[test]
    fn kolmogorov_series_branches_agree() {
        // both series are valid near the switch point
        let t: f64 = 1.18;
        let f = -PI * PI / (8.0 * t * t);
        let theta: f64 = (1..=20)
            .map(|j| ((2 * j - 1) as f64).powi(2) * f)
            .map(f64::exp)
            .sum::<f64>()
            * (2.0 * PI).sqrt()
            / t;
        let alt: f64 = 2.0
            * (1..=100)
                .map(|j| {
                    (if j % 2 == 1 { 1.0 } else { -1.0 }) * (-2.0 * (j * j) as f64 * t * t).exp()
                })
                .sum::<f64>();
        assert!(((1.0 - theta) - alt).abs() < 1e-14);
    }

    #[test]
    fn pvalue_clamps_rounding() {
        assert_eq!(PValue::new(1.0 + 1e-15).value(), 1.0);
        assert_eq!(PValue::new(-1e-15).value(), 0.0);
    }

    #[test]
    #[should_panic]
    fn pvalue_rejects_garbage() {
        PValue::new(1.5);
    }

    #[test]
    fn pooled_fit_merges_sparse_tail() {
        // Poisson(2) over 50 draws: the tail cells expect well under 5
        let probs: Vec<f64> = {
            let mut v: Vec<f64> = (0..6).map(|k| poisson_pmf(k, 2.0).unwrap()).collect();
            v.push(1.0 - v.iter().sum::<f64>());
            v
        };
        let observed = [7u64, 14, 13, 9, 4, 2, 1];
        let fit = chi2_goodness_of_fit(&observed, &probs, 5.0).unwrap();
        // expected 6.8 13.5 13.5 9.0 4.5 1.8 0.8: pools {0} {1} {2} {3} {4,5,6}
        assert_eq!(fit.bins, 5);
        assert_eq!(fit.dof, 4);
        let n = 50.0;
        let e = [
            probs[0] * n,
            probs[1] * n,
            probs[2] * n,
            probs[3] * n,
            (probs[4] + probs[5] + probs[6]) * n,
        ];
        let o = [7.0, 14.0, 13.0, 9.0, 7.0];
        let by_hand: f64 = o.iter().zip(&e).map(|(o, e)| (o - e) * (o - e) / e).sum();
        assert!((fit.statistic - by_hand).abs() < 1e-12);
    }

    #[test]
    fn pooled_fit_needs_two_cells() {
        assert!(chi2_goodness_of_fit(&[3, 1], &[0.5, 0.5], 5.0).is_err());
        assert!(chi2_goodness_of_fit(&[3], &[0.5, 0.5], 5.0).is_err());
    }

    proptest! {
        #[test]
        fn ks_permutation_invariant(mut xs in proptest::collection::vec(0.0f64..=1.0, 5..60), seed in any::<u64>()) {
            let a = ks_uniform(&xs).unwrap();
            // deterministic shuffle
            let mut s = seed | 1;
            for i in (1..xs.len()).rev() {
                s ^= s << 13; s ^= s >> 7; s ^= s << 17;
                xs.swap(i, (s % (i as u64 + 1)) as usize);
            }
            let b = ks_uniform(&xs).unwrap();
            prop_assert_eq!(a, b);
        }

        #[test]
        fn pvalues_in_unit_interval(s in 0.0f64..1e4, dof in 1u64..2000, z in -50.0f64..50.0) {
            let p = chi2_tail(s, dof).unwrap().value();
            prop_assert!((0.0..=1.0).contains(&p));
            let q = normal_tail_two_sided(z).value();
            prop_assert!((0.0..=1.0).contains(&q));
        }
    }
}
