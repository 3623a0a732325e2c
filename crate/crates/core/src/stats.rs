//! Small statistics toolkit: Kolmogorov–Smirnov tests, summary statistics,
//! least squares, rank correlation and chi-square goodness of fit.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    v
}

/// One-sample KS statistic `sup |F_n - F|`.
pub fn ks_one_sample<F: Fn(f64) -> f64>(xs: &[f64], cdf: F) -> f64 {
    let v = sorted(xs);
    let n = v.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in v.iter().enumerate() {
        let f = cdf(x);
        let lo = i as f64 / n;
        let hi = (i + 1) as f64 / n;
        d = d.max((f - lo).abs()).max((hi - f).abs());
    }
    d
}

/// Walks the merged order statistics of `a` and `b`, calling `visit(Fa, Fb)`
/// after every distinct value (ties are consumed together).
fn merged_ecdf_walk(a: &[f64], b: &[f64], mut visit: impl FnMut(f64, f64)) {
    let a = sorted(a);
    let b = sorted(b);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    while i < a.len() || j < b.len() {
        let t = match (a.get(i), b.get(j)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] <= t {
            i += 1;
        }
        while j < b.len() && b[j] <= t {
            j += 1;
        }
        visit(i as f64 / na, j as f64 / nb);
    }
}

/// Two-sample KS statistic `sup |F_a - F_b|`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> f64 {
    let mut d: f64 = 0.0;
    merged_ecdf_walk(a, b, |fa, fb| d = d.max((fa - fb).abs()));
    d
}

/// One-sided two-sample statistic `sup_t (F_b(t) - F_a(t))^+`.
///
/// Large values are evidence against `a <=_law b` (which means `F_a >= F_b`).
pub fn ks_one_sided(a: &[f64], b: &[f64]) -> f64 {
    let mut d: f64 = 0.0;
    merged_ecdf_walk(a, b, |fa, fb| d = d.max(fb - fa));
    d
}

/// Asymptotic two-sided Kolmogorov coefficient `c(alpha)`; 1.628 at 1%.
pub fn kolmogorov_coefficient(alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt()
}

pub fn ks_critical_one_sample(n: usize, alpha: f64) -> f64 {
    kolmogorov_coefficient(alpha) / (n as f64).sqrt()
}

pub fn ks_critical_two_sample(n: usize, m: usize, alpha: f64) -> f64 {
    let (n, m) = (n as f64, m as f64);
    kolmogorov_coefficient(alpha) * ((n + m) / (n * m)).sqrt()
}

/// One-sided asymptotic critical value `sqrt(-ln(alpha)/2) * sqrt((n+m)/nm)`.
pub fn ks_critical_one_sided(n: usize, m: usize, alpha: f64) -> f64 {
    let (n, m) = (n as f64, m as f64);
    (-alpha.ln() / 2.0).sqrt() * ((n + m) / (n * m)).sqrt()
}

/// Survival function of the Kolmogorov distribution, `P(K > lambda)`.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..200 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Sample mean (0 for an empty slice).
pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        0.0
    } else {
        xs.iter().sum::<f64>() / xs.len() as f64
    }
}

/// Unbiased sample variance (0 when fewer than two values).
pub fn variance(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64
}

/// Empirical quantile with linear interpolation, `q` in [0, 1].
pub fn quantile(xs: &[f64], q: f64) -> f64 {
    let v = sorted(xs);
    if v.is_empty() {
        return f64::NAN;
    }
    let pos = q.clamp(0.0, 1.0) * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let w = pos - lo as f64;
    v[lo] * (1.0 - w) + v[hi] * w
}

/// Normal quantile used for 95% intervals.
pub const Z95: f64 = 1.959_963_984_540_054;

/// Mean with a symmetric confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanCi {
    pub mean: f64,
    pub half_width: f64,
    pub n: usize,
}

impl MeanCi {
    pub fn from_samples(xs: &[f64]) -> Self {
        let n = xs.len();
        let m = mean(xs);
        let hw = if n > 1 {
            Z95 * (variance(xs) / n as f64).sqrt()
        } else {
            f64::INFINITY
        };
        MeanCi {
            mean: m,
            half_width: hw,
            n,
        }
    }

    pub fn lo(&self) -> f64 {
        self.mean - self.half_width
    }

    pub fn hi(&self) -> f64 {
        self.mean + self.half_width
    }

    /// Whether two estimates agree within their joint interval
    /// `|m1 - m2| <= sqrt(hw1^2 + hw2^2)`.
    pub fn agrees_with(&self, other: &MeanCi) -> bool {
        (self.mean - other.mean).abs()
            <= (self.half_width.powi(2) + other.half_width.powi(2)).sqrt()
    }
}

/// Ordinary least squares fit `y = intercept + slope x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// Standard error of the slope.
    pub slope_se: f64,
    pub n: usize,
}

impl LinearFit {
    /// 95% half-width of the slope from the t distribution.
    pub fn slope_half_width(&self) -> f64 {
        if self.n <= 2 || !self.slope_se.is_finite() {
            return f64::INFINITY;
        }
        let t = StudentsT::new(0.0, 1.0, (self.n - 2) as f64)
            .map(|t| t.inverse_cdf(0.975))
            .unwrap_or(Z95);
        t * self.slope_se
    }
}

pub fn ols(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::Domain("ols: length mismatch".into()));
    }
    let n = x.len();
    if n < 2 {
        return Err(Error::InsufficientSamples { need: 2, got: n });
    }
    let mx = mean(x);
    let my = mean(y);
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Domain("ols: degenerate abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let slope_se = if n > 2 {
        let rss: f64 = x
            .iter()
            .zip(y)
            .map(|(a, b)| {
                let r = b - intercept - slope * a;
                r * r
            })
            .sum();
        (rss / (n - 2) as f64 / sxx).sqrt()
    } else {
        f64::INFINITY
    };
    Ok(LinearFit {
        slope,
        intercept,
        slope_se,
        n,
    })
}

/// Average ranks (ties share the mean rank), 1-based.
pub fn ranks(xs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].total_cmp(&xs[b]));
    let mut r = vec![0.0; xs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && xs[idx[j + 1]] == xs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for k in i..=j {
            r[idx[k]] = avg;
        }
        i = j + 1;
    }
    r
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let mx = mean(x);
    let my = mean(y);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    if sxx == 0.0 || syy == 0.0 {
        0.0
    } else {
        sxy / (sxx * syy).sqrt()
    }
}

/// Spearman rank correlation.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    pearson(&ranks(x), &ranks(y))
}

/// One-sided p-value for `rho < 0`: exact permutation distribution for
/// `n <= 9`, Student-t approximation above.
pub fn spearman_p_negative(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len();
    let rho = spearman(x, y);
    if n < 3 {
        return 1.0;
    }
    if n <= 9 {
        let rx = ranks(x);
        let ry = ranks(y);
        let mut perm: Vec<usize> = (0..n).collect();
        let mut total = 0u64;
        let mut hits = 0u64;
        let mut permuted = vec![0.0; n];
        loop {
            for (k, &p) in perm.iter().enumerate() {
                permuted[k] = ry[p];
            }
            let r = pearson(&rx, &permuted);
            total += 1;
            if r <= rho + 1e-12 {
                hits += 1;
            }
            if !next_permutation(&mut perm) {
                break;
            }
        }
        return hits as f64 / total as f64;
    }
    let df = (n - 2) as f64;
    let t = rho * (df / (1.0 - rho * rho).max(1e-300)).sqrt();
    StudentsT::new(0.0, 1.0, df)
        .map(|dist| dist.cdf(t))
        .unwrap_or(1.0)
}

fn next_permutation(p: &mut [usize]) -> bool {
    if p.len() < 2 {
        return false;
    }
    let mut i = p.len() - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = p.len() - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

/// Pearson chi-square statistic and p-value for observed counts against
/// expected counts; bins with zero expectation are skipped.
pub fn chi_square(observed: &[f64], expected: &[f64], fitted_params: usize) -> (f64, f64) {
    let mut stat = 0.0;
    let mut bins = 0usize;
    for (o, e) in observed.iter().zip(expected) {
        if *e > 0.0 {
            stat += (o - e) * (o - e) / e;
            bins += 1;
        }
    }
    let df = bins.saturating_sub(1 + fitted_params).max(1) as f64;
    let p = ChiSquared::new(df).map(|c| 1.0 - c.cdf(stat)).unwrap_or(0.0);
    (stat, p)
}

/// Sample Pearson correlation.
pub fn correlation(x: &[f64], y: &[f64]) -> f64 {
    pearson(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn critical_values() {
        assert_relative_eq!(kolmogorov_coefficient(0.01), 1.627_58, epsilon = 1e-4);
        assert_relative_eq!(
            ks_critical_two_sample(100_000, 100_000, 0.01),
            1.62758 * (2.0f64 / 100_000.0).sqrt(),
            max_relative = 1e-4
        );
        // sf at the 1% coefficient is 1%.
        assert_relative_eq!(kolmogorov_sf(kolmogorov_coefficient(0.01)), 0.01, epsilon = 1e-6);
    }

    #[test]
    fn identical_samples_have_zero_statistics() {
        let a = [3.0, 1.0, 2.0, 2.0, 5.0];
        assert_eq!(ks_two_sample(&a, &a), 0.0);
        assert_eq!(ks_one_sided(&a, &a), 0.0);
    }

    #[test]
    fn one_sided_direction() {
        let a: Vec<f64> = (0..100).map(|i| i as f64 / 100.0).collect();
        let plus: Vec<f64> = a.iter().map(|x| x + 1.0).collect();
        let minus: Vec<f64> = a.iter().map(|x| x - 1.0).collect();
        assert_eq!(ks_one_sided(&a, &plus), 0.0);
        assert_eq!(ks_one_sided(&a, &minus), 1.0);
        assert_eq!(ks_two_sample(&a, &minus), 1.0);
    }

    #[test]
    fn one_sample_uniform_grid() {
        let xs: Vec<f64> = (0..10).map(|i| (i as f64 + 0.5) / 10.0).collect();
        assert_relative_eq!(ks_one_sample(&xs, |x| x), 0.05, epsilon = 1e-12);
    }

    #[test]
    fn ols_recovers_line() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.5 * v - 1.0).collect();
        let f = ols(&x, &y).unwrap();
        assert_relative_eq!(f.slope, 2.5, epsilon = 1e-12);
        assert_relative_eq!(f.intercept, -1.0, epsilon = 1e-12);
        assert!(f.slope_se < 1e-10);
    }

    #[test]
    fn spearman_exact_pvalue() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let y = [6.0, 5.0, 4.0, 3.0, 2.0, 1.0];
        assert_relative_eq!(spearman(&x, &y), -1.0, epsilon = 1e-12);
        // only the reversal attains rho = -1: p = 1/720.
        assert_relative_eq!(spearman_p_negative(&x, &y), 1.0 / 720.0, epsilon = 1e-12);
        let up = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        assert!(spearman_p_negative(&x, &up) > 0.99);
    }

    #[test]
    fn ranks_with_ties() {
        assert_eq!(ranks(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn quantiles() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&xs, 0.5), 3.0);
        assert_eq!(quantile(&xs, 0.0), 1.0);
        assert_eq!(quantile(&xs, 1.0), 5.0);
        assert_eq!(quantile(&xs, 0.125), 1.5);
    }

    #[test]
    fn chi_square_perfect_fit() {
        let (stat, p) = chi_square(&[10.0, 20.0, 30.0], &[10.0, 20.0, 30.0], 0);
        assert_eq!(stat, 0.0);
        assert!(p > 0.99);
    }

    #[test]
    fn mean_ci_agreement() {
        let a = MeanCi { mean: 1.0, half_width: 0.3, n: 10 };
        let b = MeanCi { mean: 1.4, half_width: 0.3, n: 10 };
        let c = MeanCi { mean: 1.5, half_width: 0.3, n: 10 };
        assert!(a.agrees_with(&b));
        assert!(!a.agrees_with(&c));
    }
}
