//! Sample statistics and the goodness-of-fit tests used by the checks.

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal};

/// A point estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub std_err: f64,
}

impl Estimate {
    pub fn new(value: f64, std_err: f64) -> Self {
        Estimate { value, std_err }
    }

    pub fn exact(value: f64) -> Self {
        Estimate { value, std_err: 0.0 }
    }

    /// z-score of the difference of two independent estimates.
    pub fn z_diff(&self, other: &Estimate) -> f64 {
        let se = self.std_err.hypot(other.std_err);
        let diff = self.value - other.value;
        if se == 0.0 {
            if diff == 0.0 {
                0.0
            } else {
                diff.signum() * f64::INFINITY
            }
        } else {
            diff / se
        }
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return f64::NAN;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); NaN for fewer than two values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return f64::NAN;
    }
    let m = mean(xs);
    let ss: f64 = xs.iter().map(|x| (x - m) * (x - m)).sum();
    (ss / (xs.len() - 1) as f64).sqrt()
}

/// Mean with its standard error.
pub fn mean_estimate(xs: &[f64]) -> Estimate {
    let n = xs.len() as f64;
    Estimate::new(mean(xs), std_dev(xs) / n.sqrt())
}

pub fn binomial_se(p: f64, n: u64) -> f64 {
    if n == 0 {
        return f64::NAN;
    }
    (p * (1.0 - p) / n as f64).max(0.0).sqrt()
}

pub fn proportion(successes: u64, n: u64) -> Estimate {
    let p = successes as f64 / n as f64;
    Estimate::new(p, binomial_se(p, n))
}

pub fn normal_cdf(z: f64) -> f64 {
    Normal::standard().cdf(z)
}

pub fn two_sided_normal_p(z: f64) -> f64 {
    2.0 * (1.0 - normal_cdf(z.abs()))
}

/// Pearson chi-square goodness of fit. Cells with expected count below
/// `min_expected` are pooled together. Returns `(statistic, dof, p_value)`.
pub fn chi_square_gof(observed: &[u64], probs: &[f64], min_expected: f64) -> (f64, usize, f64) {
    assert_eq!(observed.len(), probs.len());
    let n: u64 = observed.iter().sum();
    let n = n as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut pool = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(probs) {
        let e = p * n;
        if e < min_expected {
            pool.0 += o as f64;
            pool.1 += e;
        } else {
            cells.push((o as f64, e));
        }
    }
    if pool.1 > 0.0 || pool.0 > 0.0 {
        if pool.1 >= min_expected || cells.is_empty() {
            cells.push(pool);
        } else if let Some(last) = cells.last_mut() {
            last.0 += pool.0;
            last.1 += pool.1;
        }
    }
    let stat: f64 = cells
        .iter()
        .map(|&(o, e)| {
            if e > 0.0 {
                (o - e) * (o - e) / e
            } else if o > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .sum();
    let dof = cells.len().saturating_sub(1);
    if dof == 0 {
        return (stat, 0, 1.0);
    }
    let p = 1.0 - ChiSquared::new(dof as f64).expect("dof > 0").cdf(stat);
    (stat, dof, p)
}

/// Asymptotic Kolmogorov survival function `P(K > x)`.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * x * x).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// One-sample Kolmogorov–Smirnov test against a continuous CDF. Returns `(D, p_value)`.
pub fn ks_one_sample(samples: &[f64], cdf: impl Fn(f64) -> f64) -> (f64, f64) {
    let mut xs = samples.to_vec();
    xs.sort_by(|a, b| a.total_cmp(b));
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    let sn = n.sqrt();
    (d, kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d))
}

/// Two-sample Kolmogorov–Smirnov test. Returns `(D, p_value)`.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut xs = a.to_vec();
    let mut ys = b.to_vec();
    xs.sort_by(|p, q| p.total_cmp(q));
    ys.sort_by(|p, q| p.total_cmp(q));
    let (n, m) = (xs.len(), ys.len());
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < n && j < m {
        let v = xs[i].min(ys[j]);
        while i < n && xs[i] <= v {
            i += 1;
        }
        while j < m && ys[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n as f64 - j as f64 / m as f64).abs());
    }
    let ne = (n * m) as f64 / (n + m) as f64;
    let sn = ne.sqrt();
    (d, kolmogorov_sf((sn + 0.12 + 0.11 / sn) * d))
}

/// Pearson correlation and the two-sided p-value of the Fisher z test for
/// zero correlation. NaN correlation if either sample is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> (f64, f64) {
    assert_eq!(x.len(), y.len());
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return (f64::NAN, 1.0);
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let n = x.len() as f64;
    if n < 4.0 {
        return (r, 1.0);
    }
    let z = r.clamp(-0.999_999_999, 0.999_999_999).atanh() * (n - 3.0).sqrt();
    (r, two_sided_normal_p(z))
}

/// Sample covariance `mean(xy) - mean(x) mean(y)` with a delta-method
/// standard error from the centred products.
pub fn covariance_estimate(x: &[f64], y: &[f64]) -> Estimate {
    assert_eq!(x.len(), y.len());
    let n = x.len() as f64;
    let (mx, my) = (mean(x), mean(y));
    let prods: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).collect();
    let cov = prods.iter().sum::<f64>() / n;
    let se = std_dev(&prods) / n.sqrt();
    Estimate::new(cov, if se.is_nan() { 0.0 } else { se })
}

/// Least-squares slope of `ys` against `xs`.
pub fn ls_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let (mx, my) = (mean(xs), mean(ys));
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

pub fn ln_factorial(n: u64) -> f64 {
    statrs::function::gamma::ln_gamma(n as f64 + 1.0)
}

pub fn poisson_pmf(k: u64, mu: f64) -> f64 {
    if mu == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (k as f64 * mu.ln() - mu - ln_factorial(k)).exp()
}
