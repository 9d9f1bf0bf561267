//! Resampling and classical test statistics shared by the estimator and the
//! study harnesses.

use statrs::distribution::{ContinuousCDF, StudentsT};

/// Arithmetic mean; NaN for an empty slice.
pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Delete-one jackknife of `f(column means)` over paired samples.
///
/// Every column must have the same length `n ≥ 2`. Returns the full-sample
/// value `f(means)` and the jackknife standard error.
pub fn jackknife<F: Fn(&[f64]) -> f64>(columns: &[&[f64]], f: F) -> (f64, f64) {
    let n = columns[0].len();
    assert!(n >= 2 && columns.iter().all(|c| c.len() == n), "jackknife needs equal columns of length ≥ 2");
    let sums: Vec<f64> = columns.iter().map(|c| c.iter().sum()).collect();
    let full: Vec<f64> = sums.iter().map(|s| s / n as f64).collect();
    let value = f(&full);
    let mut loo = vec![0.0; columns.len()];
    let thetas: Vec<f64> = (0..n)
        .map(|i| {
            for (k, c) in columns.iter().enumerate() {
                loo[k] = (sums[k] - c[i]) / (n - 1) as f64;
            }
            f(&loo)
        })
        .collect();
    let tbar = mean(&thetas);
    let var = thetas.iter().map(|t| (t - tbar).powi(2)).sum::<f64>() * (n - 1) as f64 / n as f64;
    (value, var.sqrt())
}

/// Jackknife of a plain mean; equals the standard error of the mean.
pub fn jackknife_mean(xs: &[f64]) -> (f64, f64) {
    jackknife(&[xs], |m| m[0])
}

/// Pearson correlation; `None` when either series has zero variance.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Two-sided p-value of `H₀: ρ = 0` for a sample correlation `r` over `n`
/// pairs, from the t statistic `r√((n−2)/(1−r²))` (bivariate-normal approximation).
pub fn correlation_p_value(r: f64, n: usize) -> f64 {
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let dof = n as f64 - 2.0;
    let t = r * (dof / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, dof).expect("dof > 0");
    2.0 * (1.0 - dist.cdf(t.abs()))
}

/// Fisher's combined statistic `−2 Σ ln p`; χ² with `2M` degrees of freedom under H₀.
pub fn fisher_statistic(p_values: &[f64]) -> f64 {
    -2.0 * p_values.iter().map(|p| p.max(f64::MIN_POSITIVE).ln()).sum::<f64>()
}

/// One-sample Kolmogorov–Smirnov statistic `sup |F_n − F|`.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value of the KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

/// Ordinary least-squares line `y = slope·x + intercept` with standard errors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_stderr: f64,
    pub intercept_stderr: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<LineFit> {
    let n = x.len();
    if n < 2 || y.len() != n {
        return None;
    }
    let (mx, my) = (mean(x), mean(y));
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let (slope_stderr, intercept_stderr) = if n > 2 {
        let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
        let s2 = rss / (n - 2) as f64;
        let se = (s2 / sxx).sqrt();
        (se, (s2 * (1.0 / n as f64 + mx * mx / sxx)).sqrt())
    } else {
        (0.0, 0.0)
    };
    Some(LineFit { slope, intercept, slope_stderr, intercept_stderr })
}
