//! Small statistical test kit: Kolmogorov–Smirnov and Pearson chi-square
//! goodness-of-fit, with asymptotic p-values.

use crate::error::{Error, Result};
use statrs::function::gamma::gamma_ur;

/// Outcome of a goodness-of-fit test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n_samples: usize,
}

/// Survival function of the Kolmogorov distribution,
/// Q(λ) = 2·Σ_{k≥1} (−1)^(k−1)·exp(−2k²λ²), clamped to [0, 1].
fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    let a2 = -2.0 * lambda * lambda;
    let mut sum = 0.0;
    let mut sign = 2.0;
    let mut prev = 0.0;
    for k in 1..=200 {
        let term = sign * (a2 * (k * k) as f64).exp();
        sum += term;
        if term.abs() <= 1e-3 * prev || term.abs() <= 1e-12 * sum.abs() {
            return sum.clamp(0.0, 1.0);
        }
        sign = -sign;
        prev = term.abs();
    }
    // Series did not settle: λ is small and the statistic is compatible
    // with the null.
    1.0
}

/// Two-sided one-sample Kolmogorov–Smirnov test of `samples` against the
/// continuous distribution function `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<TestResult> {
    if samples.is_empty() {
        return Err(Error::Domain(
            "ks_statistic needs at least one sample".into(),
        ));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        d = d
            .max((i as f64 / n - f).abs())
            .max(((i + 1) as f64 / n - f).abs());
    }
    // Stephens' effective sample size for the asymptotic null.
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    Ok(TestResult {
        statistic: d,
        p_value: kolmogorov_sf(lambda),
        n_samples: sorted.len(),
    })
}

/// Pearson chi-square test of bin counts against the uniform multinomial.
/// The p-value comes from the chi-square law with bins − 1 degrees of
/// freedom.
pub fn chi_square_uniformity(counts: &[u64]) -> Result<TestResult> {
    if counts.len() < 2 {
        return Err(Error::Domain("chi_square_uniformity needs ≥ 2 bins".into()));
    }
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return Err(Error::Domain(
            "chi_square_uniformity needs a positive total count".into(),
        ));
    }
    let expected = total as f64 / counts.len() as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| {
            let d = c as f64 - expected;
            d * d / expected
        })
        .sum();
    let dof = (counts.len() - 1) as f64;
    let p_value = if stat > 0.0 {
        gamma_ur(dof / 2.0, stat / 2.0)
    } else {
        1.0
    };
    Ok(TestResult {
        statistic: stat,
        p_value,
        n_samples: total as usize,
    })
}

/// Sample mean with a normal-approximation confidence half-width
/// z·s/√n (z = 1.96 for 95%).
pub fn mean_with_ci(samples: &[f64], z: f64) -> (f64, f64) {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    if samples.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let var = samples
        .iter()
        .map(|&x| (x - mean) * (x - mean))
        .sum::<f64>()
        / (n - 1.0);
    (mean, z * (var / n).sqrt())
}

/// Pearson correlation coefficient of two equally long samples.
pub fn correlation(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
        sab += (x - ma) * (y - mb);
    }
    sab / (saa.sqrt() * sbb.sqrt())
}

/// Sample median (averaging the two central order statistics).
pub fn median(samples: &[f64]) -> f64 {
    assert!(!samples.is_empty());
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}
