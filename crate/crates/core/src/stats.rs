//! Paired two-sided significance tests on per-point forecast errors.
//!
//! Both tests take two equal-length error samples `a` and `b` and look at
//! `d_i = a_i − b_i`. A positive mean difference (or `W⁺ > W⁻`) means `a` has
//! the larger errors.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest effective sample for which the Wilcoxon p-value is computed exactly.
pub const WILCOXON_EXACT_MAX_N: usize = 20;

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEF: [f64; 9] = [
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

/// Natural log of the gamma function for `x > 0` (Lanczos, g = 7).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection: Γ(x)Γ(1−x) = π / sin(πx)
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS_COEF[0];
    for (i, c) in LANCZOS_COEF.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + LANCZOS_G + 0.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Regularized incomplete beta `I_x(a, b)`; `y` must equal `1 − x` and is
/// passed separately so callers can supply it without cancellation.
pub fn beta_reg(a: f64, b: f64, x: f64, y: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if y <= 0.0 {
        return 1.0;
    }
    let ln_front = a * x.ln() + b * y.ln() - (ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b));
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, y) / b
    }
}

// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=20_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Upper tail `P(T > t)` of Student's t with `df` degrees of freedom.
pub fn student_t_sf(t: f64, df: f64) -> Result<f64> {
    if !(df > 0.0) || !df.is_finite() {
        return Err(Error::invalid(format!("degrees of freedom must be positive, got {df}")));
    }
    if t.is_nan() {
        return Err(Error::NonFinite("t statistic".into()));
    }
    if t == 0.0 {
        return Ok(0.5);
    }
    if t.is_infinite() {
        return Ok(if t > 0.0 { 0.0 } else { 1.0 });
    }
    let t2 = t * t;
    let x = df / (df + t2);
    let y = t2 / (df + t2);
    let half_tail = 0.5 * beta_reg(0.5 * df, 0.5, x, y);
    Ok(if t > 0.0 { half_tail } else { 1.0 - half_tail })
}

/// Two-sided standard normal p-value for `|z|`.
fn normal_two_sided(z: f64) -> f64 {
    libm::erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    PairedT,
    WilcoxonExact,
    WilcoxonNormalApprox,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Alternative {
    TwoSided,
}

/// Exact p-value as a ratio of sign-assignment counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactP {
    pub numerator: u64,
    pub denominator: u64,
}

impl ExactP {
    pub fn to_f64(self) -> f64 {
        self.numerator as f64 / self.denominator as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairedTestResult {
    pub method: TestMethod,
    pub statistic: f64,
    pub p_value: f64,
    pub n_effective: usize,
    pub alternative: Alternative,
    /// Mean of `a_i − b_i` over all pairs.
    pub mean_difference: f64,
    /// `(W⁺, W⁻)`, Wilcoxon only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank_sums: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_p: Option<ExactP>,
}

fn differences(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    if d.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("paired difference".into()));
    }
    Ok(d)
}

/// Paired t-test, two-sided, `n − 1` degrees of freedom.
pub fn paired_t_test(errors_a: &[f64], errors_b: &[f64]) -> Result<PairedTestResult> {
    let d = differences(errors_a, errors_b)?;
    let n = d.len();
    if n < 2 {
        return Err(Error::DegenerateSample(format!(
            "paired t-test needs at least 2 pairs, got {n}"
        )));
    }
    let nf = n as f64;
    let mean = d.iter().sum::<f64>() / nf;
    let var = d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (nf - 1.0);
    let sd = var.sqrt();
    let scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(sd > 1e-12 * scale) {
        return Err(Error::DegenerateSample("all paired differences are identical".into()));
    }
    let t = mean / (sd / nf.sqrt());
    let p = (2.0 * student_t_sf(t.abs(), nf - 1.0)?).min(1.0);
    Ok(PairedTestResult {
        method: TestMethod::PairedT,
        statistic: t,
        p_value: p,
        n_effective: n,
        alternative: Alternative::TwoSided,
        mean_difference: mean,
        rank_sums: None,
        exact_p: None,
    })
}

/// Average ranks (1-based) of `values`, plus the sizes of tie groups longer than one.
pub fn average_ranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        let avg = (i + 1 + j) as f64 / 2.0;
        for &k in &order[i..j] {
            ranks[k] = avg;
        }
        if j - i > 1 {
            ties.push(j - i);
        }
        i = j;
    }
    (ranks, ties)
}

/// Number of subsets of `{1, …, n}` with each possible sum, indexed by sum.
pub fn signed_rank_counts(n: usize) -> Vec<u64> {
    let max = n * (n + 1) / 2;
    let mut counts = vec![0u64; max + 1];
    counts[0] = 1;
    for r in 1..=n {
        for s in (r..=max).rev() {
            counts[s] += counts[s - r];
        }
    }
    counts
}

/// Exact two-sided p for `min(W⁺, W⁻) = w` with untied ranks `1..=n`:
/// `min(1, 2·#{assignments with W ≤ w} / 2ⁿ)`.
pub fn wilcoxon_exact_p(n: usize, w: u64) -> ExactP {
    assert!(n <= 62, "exact enumeration limited to n <= 62");
    let counts = signed_rank_counts(n);
    let upto = (w as usize).min(counts.len() - 1);
    let tail: u64 = counts[..=upto].iter().sum();
    let denominator = 1u64 << n;
    ExactP {
        numerator: (2 * tail).min(denominator),
        denominator,
    }
}

/// Two-sided large-sample p for the signed-rank sum `W⁺` over the given ranks.
///
/// Uses the exact mean and (tie-corrected) variance of `W⁺`, a 0.5 continuity
/// correction, and a one-term Edgeworth correction for its kurtosis.
pub fn wilcoxon_normal_p(w_plus: f64, ranks: &[f64]) -> f64 {
    let s1: f64 = ranks.iter().sum();
    let s2: f64 = ranks.iter().map(|r| r * r).sum();
    let s4: f64 = ranks.iter().map(|r| r.powi(4)).sum();
    let var = s2 / 4.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w_plus - s1 / 2.0).abs() - 0.5).max(0.0) / var.sqrt();
    let excess_kurtosis = -2.0 * s4 / (s2 * s2);
    let density = libm::exp(-0.5 * z * z) / (2.0 * std::f64::consts::PI).sqrt();
    let upper = 0.5 * normal_two_sided(z) + density * excess_kurtosis / 24.0 * (z * z * z - 3.0 * z);
    (2.0 * upper).clamp(0.0, 1.0)
}

/// Wilcoxon signed-rank test, two-sided. Zero differences are dropped.
///
/// Exact when at most [`WILCOXON_EXACT_MAX_N`] pairs remain and `|d|` has no
/// ties; otherwise the normal approximation of [`wilcoxon_normal_p`].
pub fn wilcoxon_signed_rank(errors_a: &[f64], errors_b: &[f64]) -> Result<PairedTestResult> {
    let d_all = differences(errors_a, errors_b)?;
    let mean_difference = if d_all.is_empty() {
        0.0
    } else {
        d_all.iter().sum::<f64>() / d_all.len() as f64
    };
    let d: Vec<f64> = d_all.into_iter().filter(|&v| v != 0.0).collect();
    let n = d.len();
    if n == 0 {
        return Err(Error::DegenerateSample("all paired differences are zero".into()));
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let (ranks, ties) = average_ranks(&abs);
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let total = (n * (n + 1)) as f64 / 2.0;
    let w_minus = total - w_plus;
    let statistic = w_plus.min(w_minus);

    let (method, p_value, exact_p) = if ties.is_empty() && n <= WILCOXON_EXACT_MAX_N {
        let exact = wilcoxon_exact_p(n, statistic as u64);
        (TestMethod::WilcoxonExact, exact.to_f64(), Some(exact))
    } else {
        (
            TestMethod::WilcoxonNormalApprox,
            wilcoxon_normal_p(w_plus, &ranks),
            None,
        )
    };

    Ok(PairedTestResult {
        method,
        statistic,
        p_value: p_value.clamp(0.0, 1.0),
        n_effective: n,
        alternative: Alternative::TwoSided,
        mean_difference,
        rank_sums: Some((w_plus, w_minus)),
        exact_p,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    ABetter,
    BBetter,
    NoSignificantDifference,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::ABetter => "A_better",
            Verdict::BBetter => "B_better",
            Verdict::NoSignificantDifference => "no_significant_difference",
        })
    }
}

pub const DEFAULT_ALPHA: f64 = 0.05;

/// Significant iff `p < alpha`; the sample with the lower errors wins.
pub fn significance_verdict(result: &PairedTestResult, alpha: f64) -> Verdict {
    if !(result.p_value < alpha) {
        return Verdict::NoSignificantDifference;
    }
    let direction = match result.rank_sums {
        Some((wp, wm)) => wp - wm,
        None => result.mean_difference,
    };
    if direction > 0.0 {
        Verdict::BBetter
    } else if direction < 0.0 {
        Verdict::ABetter
    } else {
        Verdict::NoSignificantDifference
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t_result(p: f64, mean: f64) -> PairedTestResult {
        PairedTestResult {
            method: TestMethod::PairedT,
            statistic: 0.0,
            p_value: p,
            n_effective: 10,
            alternative: Alternative::TwoSided,
            mean_difference: mean,
            rank_sums: None,
            exact_p: None,
        }
    }

    #[test]
    fn ln_gamma_known_values() {
        assert!(ln_gamma(1.0).abs() < 1e-14);
        assert!(ln_gamma(2.0).abs() < 1e-14);
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-14);
        assert!((ln_gamma(10.0) - 362_880f64.ln()).abs() < 1e-12);
        assert!((ln_gamma(0.1) - 2.252_712_651_734_206).abs() < 1e-13);
    }

    #[test]
    fn beta_reg_closed_forms() {
        // I_x(1, 1) = x, I_x(a, 1) = x^a
        assert!((beta_reg(1.0, 1.0, 0.3, 0.7) - 0.3).abs() < 1e-15);
        assert!((beta_reg(3.0, 1.0, 0.6, 0.4) - 0.216).abs() < 1e-14);
        assert_eq!(beta_reg(2.0, 3.0, 0.0, 1.0), 0.0);
        assert_eq!(beta_reg(2.0, 3.0, 1.0, 0.0), 1.0);
    }

    #[test]
    fn t_sf_reference_points() {
        assert_eq!(student_t_sf(0.0, 3.0).unwrap(), 0.5);
        assert!((student_t_sf(1.0, 1.0).unwrap() - 0.25).abs() < 1e-15);
        assert!((student_t_sf(-1.0, 1.0).unwrap() - 0.75).abs() < 1e-15);
        // normal limit: P(Z > 1.96) = 0.024997895…
        let p = student_t_sf(1.96, 1e6).unwrap();
        assert!(
            (p - 0.5 * libm::erfc(1.96 / std::f64::consts::SQRT_2)).abs() < 1e-6,
            "{p}"
        );
        assert!((p - 0.0250).abs() < 5e-5);
        // df = 2 has a closed form: ½(1 − t/√(t²+2))
        for t in [0.3, 1.0, 2.5, 10.0] {
            let exact = 0.5 * (1.0 - t / (t * t + 2.0f64).sqrt());
            assert!((student_t_sf(t, 2.0).unwrap() - exact).abs() < 1e-14);
        }
        assert!(student_t_sf(1.0, 0.0).is_err());
    }

    #[test]
    fn t_test_symmetric_differences() {
        let r = paired_t_test(&[1., 2., 3.], &[3., 2., 1.]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn t_test_hand_case() {
        let r = paired_t_test(&[1., 2., 3.], &[0., 0., 0.]).unwrap();
        assert!((r.statistic - 12f64.sqrt()).abs() < 1e-12);
        // df = 2 closed form, two-sided
        let expected = 1.0 - 12f64.sqrt() / (12.0 + 2.0f64).sqrt();
        assert!((r.p_value - expected).abs() < 1e-13);
        assert!((r.p_value - 0.0742).abs() < 1e-4);
    }

    #[test]
    fn t_test_degenerate() {
        assert!(matches!(
            paired_t_test(&[1., 2.], &[1., 2.]),
            Err(Error::DegenerateSample(_))
        ));
        assert!(matches!(
            paired_t_test(&[3., 4., 5.], &[1., 2., 3.]),
            Err(Error::DegenerateSample(_))
        ));
        assert!(matches!(paired_t_test(&[1.], &[0.]), Err(Error::DegenerateSample(_))));
        assert!(paired_t_test(&[1., 2.], &[1.]).is_err());
    }

    #[test]
    fn wilcoxon_hand_ranking() {
        let d = [1., -2., 3., -4., 5.];
        let r = wilcoxon_signed_rank(&d, &[0.0; 5]).unwrap();
        assert_eq!(r.rank_sums, Some((9.0, 6.0)));
        assert_eq!(r.statistic, 6.0);
        assert_eq!(r.method, TestMethod::WilcoxonExact);
        // subsets of {1..5} by sum 0..=6: 1,1,1,2,2,3,3 -> 13 of 32, doubled
        assert_eq!(
            r.exact_p,
            Some(ExactP {
                numerator: 26,
                denominator: 32
            })
        );
    }

    #[test]
    fn wilcoxon_all_positive() {
        let r = wilcoxon_signed_rank(&[1., 2., 3., 4., 5.], &[0.; 5]).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert!((r.p_value - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn wilcoxon_drops_zero_differences() {
        let r = wilcoxon_signed_rank(&[1., 2., 0., 4.], &[0., 0., 0., 0.]).unwrap();
        assert_eq!(r.n_effective, 3);
        assert!(matches!(
            wilcoxon_signed_rank(&[1., 2.], &[1., 2.]),
            Err(Error::DegenerateSample(_))
        ));
    }

    #[test]
    fn wilcoxon_ties_use_normal_approximation() {
        let r = wilcoxon_signed_rank(&[1., 1., 2., -3., 4.], &[0.; 5]).unwrap();
        assert_eq!(r.method, TestMethod::WilcoxonNormalApprox);
        // |d| ranks 1.5, 1.5, 3, 4, 5 with only the 4 negative
        assert_eq!(r.rank_sums, Some((11.0, 4.0)));
    }

    #[test]
    fn ranks_average_ties() {
        let (r, ties) = average_ranks(&[3.0, 1.0, 3.0, 2.0]);
        assert_eq!(r, vec![3.5, 1.0, 3.5, 2.0]);
        assert_eq!(ties, vec![2]);
    }

    #[test]
    fn rank_sum_counts_are_symmetric() {
        let c = signed_rank_counts(6);
        assert_eq!(c.iter().sum::<u64>(), 64);
        for s in 0..c.len() {
            assert_eq!(c[s], c[c.len() - 1 - s]);
        }
    }

    #[test]
    fn verdicts() {
        assert_eq!(
            significance_verdict(&t_result(0.2, 1.0), 0.05),
            Verdict::NoSignificantDifference
        );
        assert_eq!(significance_verdict(&t_result(0.01, 1.0), 0.05), Verdict::BBetter);
        assert_eq!(significance_verdict(&t_result(0.01, -1.0), 0.05), Verdict::ABetter);
        assert_eq!(
            significance_verdict(&t_result(0.05, -1.0), 0.05),
            Verdict::NoSignificantDifference
        );
        let w = wilcoxon_signed_rank(&[0.; 6], &[1., 2., 3., 4., 5., 6.]).unwrap();
        assert_eq!(significance_verdict(&w, 0.05), Verdict::ABetter);
    }

    #[test]
    fn swapping_samples_is_antisymmetric() {
        let a = [0.3, 1.7, 2.2, 0.9, 1.1, 3.4, 0.2, 1.5];
        let b = [1.0, 1.2, 0.4, 0.8, 2.9, 0.7, 0.1, 0.6];
        let t1 = paired_t_test(&a, &b).unwrap();
        let t2 = paired_t_test(&b, &a).unwrap();
        assert!((t1.statistic + t2.statistic).abs() < 1e-12);
        assert!((t1.p_value - t2.p_value).abs() < 1e-12);
        let w1 = wilcoxon_signed_rank(&a, &b).unwrap();
        let w2 = wilcoxon_signed_rank(&b, &a).unwrap();
        let (p1, m1) = w1.rank_sums.unwrap();
        let (p2, m2) = w2.rank_sums.unwrap();
        assert_eq!((p1, m1), (m2, p2));
        assert!((w1.p_value - w2.p_value).abs() < 1e-12);
    }
}
