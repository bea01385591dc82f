//! Goodness-of-fit statistics used by the samplers' tests and the
//! validation suites.

use crate::special::gamma_q;

/// Kolmogorov survival function Q(λ) = 2Σ(-1)^{k-1}exp(-2k²λ²).
fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let kf = k as f64;
        let term = (-2.0 * kf * kf * lambda * lambda).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-16 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Asymptotic p-value with Stephens' small-sample correction.
pub fn ks_pvalue(d: f64, n_eff: f64) -> f64 {
    let s = n_eff.sqrt();
    kolmogorov_q((s + 0.12 + 0.11 / s) * d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsResult {
    pub statistic: f64,
    pub pvalue: f64,
}

/// One-sample KS test of `sample` against the continuous CDF `cdf`.
pub fn ks_one_sample(sample: &[f64], cdf: impl Fn(f64) -> f64) -> KsResult {
    let mut xs = sample.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let f = cdf(x);
        d = d.max(f - i as f64 / n).max((i + 1) as f64 / n - f);
    }
    KsResult {
        statistic: d,
        pvalue: ks_pvalue(d, n),
    }
}

/// Two-sample KS test.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> KsResult {
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    KsResult {
        statistic: d,
        pvalue: ks_pvalue(d, n * m / (n + m)),
    }
}

/// Upper tail of the χ² distribution with `dof` degrees of freedom.
pub fn chi2_pvalue(stat: f64, dof: f64) -> f64 {
    if stat <= 0.0 {
        return 1.0;
    }
    gamma_q(0.5 * dof, 0.5 * stat)
}

/// Pearson χ² statistic of observed counts against expected counts.
pub fn chi2_statistic(observed: &[f64], expected: &[f64]) -> f64 {
    observed
        .iter()
        .zip(expected)
        .filter(|(_, &e)| e > 0.0)
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum()
}

/// Empirical quantile by linear interpolation of the sorted sample.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let h = p * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kolmogorov_reference_values() {
        // Q(1.0) and Q(1.36) from the Kolmogorov distribution.
        assert!((kolmogorov_q(1.0) - 0.269_999_671_677_354_5).abs() < 1e-9);
        assert!((kolmogorov_q(1.358_098_8) - 0.05).abs() < 1e-6);
        assert_eq!(kolmogorov_q(0.0), 1.0);
    }

    #[test]
    fn ks_on_uniform_grid() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 + 0.5) / 1000.0).collect();
        let r = ks_one_sample(&xs, |x| x.clamp(0.0, 1.0));
        assert!(r.statistic <= 0.0005 + 1e-12);
        assert!(r.pvalue > 0.999);
        let r = ks_one_sample(&xs, |x| (x * x).clamp(0.0, 1.0));
        assert!(r.pvalue < 1e-10);
    }

    #[test]
    fn two_sample_identical() {
        let xs: Vec<f64> = (0..500).map(|i| i as f64).collect();
        let r = ks_two_sample(&xs, &xs);
        assert_eq!(r.statistic, 0.0);
        let ys: Vec<f64> = xs.iter().map(|x| x + 250.0).collect();
        assert!((ks_two_sample(&xs, &ys).statistic - 0.5).abs() < 1e-12);
    }

    #[test]
    fn chi2_reference() {
        // P(χ²₂ > 2) = e^{-1}.
        assert!((chi2_pvalue(2.0, 2.0) - (-1f64).exp()).abs() < 1e-14);
        assert!((chi2_pvalue(3.841_458_820_694_124, 1.0) - 0.05).abs() < 1e-12);
    }
}
