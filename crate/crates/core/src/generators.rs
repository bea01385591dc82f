//! Elliptical generator kernels (Kotz, Pearson VII, Pearson II, Bessel) with
//! their dimension-dependent normalizing constants and radial laws.
//!
//! The effective dimension `n` is a positive real throughout so the same
//! constants serve the extended real-shape families.

use std::f64::consts::LN_2;

use crate::error::{domain, Result};
use crate::quad::{integrate, QuadOptions};
use crate::special::{ln_gamma, log_bessel_k_unchecked};

const LN_PI: f64 = 1.144_729_885_849_400_2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GeneratorSpec {
    /// W^{q-1} exp(-r W^s)
    Kotz { r: f64, q: f64, s: f64 },
    /// (1 + W/r)^{-q}
    PearsonVII { r: f64, q: f64 },
    /// (1 - W)^q on W <= 1
    PearsonII { q: f64 },
    /// W^{1/2} K_q(W^{1/2}/r)
    Bessel { r: f64, q: f64 },
}

impl GeneratorSpec {
    /// Kotz(1/2, 1, 1): the Gaussian generator.
    pub const GAUSSIAN: GeneratorSpec = GeneratorSpec::Kotz {
        r: 0.5,
        q: 1.0,
        s: 1.0,
    };

    /// Pearson VII with q = (n+ν)/2, r = ν: the multivariate t with ν degrees
    /// of freedom in dimension `n`.
    pub fn student_t(nu: f64, n: f64) -> Self {
        GeneratorSpec::PearsonVII {
            r: nu,
            q: 0.5 * (n + nu),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            GeneratorSpec::Kotz { .. } => "kotz",
            GeneratorSpec::PearsonVII { .. } => "pearson7",
            GeneratorSpec::PearsonII { .. } => "pearson2",
            GeneratorSpec::Bessel { .. } => "bessel",
        }
    }

    pub fn is_gaussian(&self) -> bool {
        *self == Self::GAUSSIAN
    }

    /// Checks the parameter constraints at effective dimension `n`.
    pub fn validate(&self, n: f64) -> Result<()> {
        if !(n > 0.0) || !n.is_finite() {
            return domain(format!("effective dimension must be positive, got {n}"));
        }
        let finite = |v: f64| v.is_finite();
        match *self {
            GeneratorSpec::Kotz { r, q, s } => {
                if !(r > 0.0 && s > 0.0 && finite(r) && finite(s) && finite(q)) {
                    return domain(format!("Kotz needs r, s > 0 (r={r}, s={s})"));
                }
                if !(2.0 * q + n > 2.0) {
                    return domain(format!("Kotz needs 2q + n > 2 (q={q}, n={n})"));
                }
            }
            GeneratorSpec::PearsonVII { r, q } => {
                if !(r > 0.0 && finite(r) && finite(q)) {
                    return domain(format!("Pearson VII needs r > 0 (r={r})"));
                }
                if !(q > n / 2.0) {
                    return domain(format!("Pearson VII needs q > n/2 (q={q}, n={n})"));
                }
            }
            GeneratorSpec::PearsonII { q } => {
                if !(q > -1.0) || !finite(q) {
                    return domain(format!("Pearson II needs q > -1 (q={q})"));
                }
            }
            GeneratorSpec::Bessel { r, q } => {
                if !(r > 0.0 && finite(r) && finite(q)) {
                    return domain(format!("Bessel needs r > 0 (r={r})"));
                }
                if !(q > -n / 2.0) {
                    return domain(format!("Bessel needs q > -n/2 (q={q}, n={n})"));
                }
                if !(q.abs() < n + 1.0) {
                    return domain(format!(
                        "Bessel kernel W^(1/2) K_q is integrable only for |q| < n + 1 (q={q}, n={n})"
                    ));
                }
            }
        }
        Ok(())
    }

    /// Log of the constant c_n making c_n·kernel(‖x‖²) a density on ℜⁿ.
    pub fn log_norm_const(&self, n: f64) -> Result<f64> {
        self.validate(n)?;
        let half = 0.5 * n;
        Ok(match *self {
            GeneratorSpec::Kotz { r, q, s } => {
                let a = (2.0 * q + n - 2.0) / (2.0 * s);
                s.ln() + a * r.ln() + ln_gamma(half) - half * LN_PI - ln_gamma(a)
            }
            GeneratorSpec::PearsonVII { r, q } => {
                ln_gamma(q) - half * (r.ln() + LN_PI) - ln_gamma(q - half)
            }
            GeneratorSpec::PearsonII { q } => {
                ln_gamma(q + 1.0 + half) - half * LN_PI - ln_gamma(q + 1.0)
            }
            GeneratorSpec::Bessel { r, q } => {
                // Mellin transform of ρ^n K_q(ρ/r) over the sphere measure.
                -(LN_2 + half * LN_PI - ln_gamma(half)
                    + (n + 1.0) * r.ln()
                    + (n - 1.0) * LN_2
                    + ln_gamma(0.5 * (n + 1.0 - q))
                    + ln_gamma(0.5 * (n + 1.0 + q)))
            }
        })
    }

    /// Log of the unnormalized kernel at w >= 0; −∞ encodes zero density.
    pub fn log_kernel(&self, w: f64) -> f64 {
        if !(w >= 0.0) || w == f64::INFINITY {
            return f64::NEG_INFINITY;
        }
        match *self {
            GeneratorSpec::Kotz { r, q, s } => {
                if w == 0.0 {
                    return pow_at_zero(q - 1.0);
                }
                (q - 1.0) * w.ln() - r * w.powf(s)
            }
            GeneratorSpec::PearsonVII { r, q } => -q * (w / r).ln_1p(),
            GeneratorSpec::PearsonII { q } => {
                if w > 1.0 {
                    f64::NEG_INFINITY
                } else if w == 1.0 {
                    pow_at_zero(q)
                } else {
                    q * (-w).ln_1p()
                }
            }
            GeneratorSpec::Bessel { r, q } => {
                if w == 0.0 {
                    let e = 0.5 * (1.0 - q.abs());
                    return if q.abs() == 1.0 {
                        r.ln()
                    } else {
                        pow_at_zero(e)
                    };
                }
                let root = w.sqrt();
                0.5 * w.ln() + log_bessel_k_unchecked(q, root / r)
            }
        }
    }

    /// log h(w) with h normalized in dimension `n`.
    pub fn log_h(&self, w: f64, n: f64) -> Result<f64> {
        Ok(self.log_norm_const(n)? + self.log_kernel(w))
    }

    /// Upper end of the support of W (1 for Pearson II).
    pub fn w_max(&self) -> f64 {
        match self {
            GeneratorSpec::PearsonII { .. } => 1.0,
            _ => f64::INFINITY,
        }
    }
}

/// log of 0^e: −∞ for e > 0, 0 for e = 0, +∞ for e < 0.
fn pow_at_zero(e: f64) -> f64 {
    if e > 0.0 {
        f64::NEG_INFINITY
    } else if e == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// Log of the constant printed for the Bessel row of the standard generator
/// table, 1/(2^{q+n-1} π^{n/2} r^{n+q} Γ(q+n/2)). It normalizes the kernel
/// W^{q/2}K_q(W^{1/2}/r); for the W^{1/2} kernel it is exact only at q = 1.
pub fn bessel_table_log_const(r: f64, q: f64, n: f64) -> f64 {
    -((q + n - 1.0) * LN_2 + 0.5 * n * LN_PI + (n + q) * r.ln() + ln_gamma(q + 0.5 * n))
}

/// A generator normalized at a fixed effective dimension: the law of a
/// spherical vector in ℜⁿ and of its radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialLaw {
    spec: GeneratorSpec,
    n: f64,
    log_const: f64,
}

impl RadialLaw {
    pub fn new(spec: GeneratorSpec, n: f64) -> Result<Self> {
        let log_const = spec.log_norm_const(n)?;
        Ok(Self { spec, n, log_const })
    }

    pub fn spec(&self) -> GeneratorSpec {
        self.spec
    }

    pub fn dim(&self) -> f64 {
        self.n
    }

    pub fn log_const(&self) -> f64 {
        self.log_const
    }

    #[inline]
    pub fn log_h(&self, w: f64) -> f64 {
        self.log_const + self.spec.log_kernel(w)
    }

    /// Log density of the radius ‖x‖ at r > 0.
    pub fn radial_logpdf(&self, r: f64) -> f64 {
        if !(r > 0.0) {
            return f64::NEG_INFINITY;
        }
        self.log_sphere_area() + (self.n - 1.0) * r.ln() + self.log_h(r * r)
    }

    /// Log density of W = ‖x‖² at w > 0: π^{n/2}/Γ(n/2)·w^{n/2-1}·h(w).
    pub fn squared_logpdf(&self, w: f64) -> f64 {
        if !(w > 0.0) {
            return f64::NEG_INFINITY;
        }
        let half = 0.5 * self.n;
        half * LN_PI - ln_gamma(half) + (half - 1.0) * w.ln() + self.log_h(w)
    }

    /// log(2π^{n/2}/Γ(n/2)), the area of the unit sphere in ℜⁿ.
    fn log_sphere_area(&self) -> f64 {
        LN_2 + 0.5 * self.n * LN_PI - ln_gamma(0.5 * self.n)
    }
}

/// Free-function form of [`RadialLaw::radial_logpdf`].
pub fn radial_logpdf(law: &RadialLaw, r: f64) -> f64 {
    law.radial_logpdf(r)
}

/// |∫₀^∞ z^{n/2-1} h(z/a) dz − a^{n/2}Γ(n/2)/π^{n/2}| / RHS, by adaptive
/// quadrature.
pub fn radial_integral_identity_check(spec: GeneratorSpec, n: f64, a: f64) -> Result<f64> {
    if !(a > 0.0) {
        return domain(format!("scale a must be positive, got {a}"));
    }
    let law = RadialLaw::new(spec, n)?;
    let half = 0.5 * n;
    let log_rhs = half * a.ln() + ln_gamma(half) - half * LN_PI;
    let integrand = |z: f64| {
        if z <= 0.0 {
            return 0.0;
        }
        let v = (half - 1.0) * z.ln() + law.log_h(z / a) - log_rhs;
        if v == f64::NEG_INFINITY {
            0.0
        } else {
            v.exp()
        }
    };
    let opts = QuadOptions::tol(1e-13, 1e-11).with_scale(a * typical_w(&spec, n));
    let lhs = match spec {
        GeneratorSpec::PearsonII { q } => {
            // Upper half in v = 1 - z/a = t^p, which flattens the (1-w)^q pole.
            let p = if q < 0.0 { 1.0 / (q + 1.0) } else { 1.0 };
            let upper = move |t: f64| {
                if t <= 0.0 {
                    return 0.0;
                }
                let v = t.powf(p);
                let lv = p * t.ln();
                let logf = a.ln()
                    + p.ln()
                    + (p - 1.0) * t.ln()
                    + (half - 1.0) * (a.ln() + (-v).ln_1p())
                    + law.log_const()
                    + q * lv
                    - log_rhs;
                logf.exp()
            };
            let lo = integrate(integrand, 0.0, 0.5 * a, opts).into_result()?;
            let hi = integrate(upper, 0.0, 0.5f64.powf(1.0 / p), opts).into_result()?;
            lo + hi
        }
        _ => integrate(integrand, 0.0, f64::INFINITY, opts).into_result()?,
    };
    Ok((lhs - 1.0).abs())
}

/// Rough location of the bulk of W, used to scale infinite-range maps.
pub(crate) fn typical_w(spec: &GeneratorSpec, n: f64) -> f64 {
    let v = match *spec {
        GeneratorSpec::Kotz { r, q, s } => {
            let shape = ((2.0 * q + n - 2.0) / (2.0 * s)).max(0.5);
            (shape / r).powf(1.0 / s)
        }
        GeneratorSpec::PearsonVII { r, q } => {
            let b = (q - 0.5 * n).max(0.5);
            r * (0.5 * n).max(0.5) / b
        }
        GeneratorSpec::PearsonII { .. } => 0.5,
        GeneratorSpec::Bessel { r, q } => r * r * (n + q.abs() + 1.0).powi(2),
    };
    if v.is_finite() && v > 0.0 {
        v
    } else {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{Bound, Region};
    use std::f64::consts::PI;

    fn specs() -> Vec<GeneratorSpec> {
        vec![
            GeneratorSpec::GAUSSIAN,
            GeneratorSpec::Kotz {
                r: 1.0,
                q: 2.0,
                s: 1.5,
            },
            GeneratorSpec::Kotz {
                r: 0.7,
                q: 0.8,
                s: 0.6,
            },
            GeneratorSpec::PearsonVII { r: 1.0, q: 3.0 },
            GeneratorSpec::PearsonVII { r: 2.5, q: 2.2 },
            GeneratorSpec::PearsonII { q: 0.0 },
            GeneratorSpec::PearsonII { q: 1.5 },
            GeneratorSpec::PearsonII { q: -0.4 },
            GeneratorSpec::Bessel { r: 1.0, q: 0.0 },
            GeneratorSpec::Bessel { r: 0.6, q: 1.3 },
            GeneratorSpec::Bessel { r: 1.4, q: -0.3 },
        ]
    }

    #[test]
    fn gaussian_constant_in_two_dims() {
        let c = GeneratorSpec::GAUSSIAN.log_norm_const(2.0).unwrap();
        assert!((c + (2.0 * PI).ln()).abs() < 1e-15);
    }

    #[test]
    fn gaussian_reduction_exact() {
        for n in 1..=6 {
            let n = n as f64;
            for &w in &[0.0, 0.3, 1.0, 4.0, 17.5] {
                let got = GeneratorSpec::GAUSSIAN.log_h(w, n).unwrap();
                let want = -0.5 * n * (2.0 * PI).ln() - 0.5 * w;
                assert!((got - want).abs() < 1e-12, "n={n} w={w}");
            }
        }
    }

    #[test]
    fn pearson7_is_multivariate_t() {
        for &(nu, n) in &[(1.0, 1.0), (3.0, 2.0), (5.5, 3.0)] {
            let spec = GeneratorSpec::student_t(nu, n);
            let c = spec.log_norm_const(n).unwrap();
            let want = ln_gamma(0.5 * (n + nu)) - 0.5 * n * (nu * PI).ln() - ln_gamma(0.5 * nu);
            assert!((c - want).abs() < 1e-13);
        }
    }

    #[test]
    fn pearson2_uniform_on_interval() {
        let c = GeneratorSpec::PearsonII { q: 0.0 }
            .log_norm_const(1.0)
            .unwrap();
        assert!((c - 0.5f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn kernel_examples() {
        assert_eq!(GeneratorSpec::GAUSSIAN.log_kernel(4.0), -2.0);
        let v = GeneratorSpec::PearsonVII { r: 1.0, q: 2.0 }.log_kernel(1.0);
        assert!((v + 2.0 * LN_2).abs() < 1e-15);
        assert_eq!(
            GeneratorSpec::PearsonII { q: 3.0 }.log_kernel(1.5),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn domain_errors() {
        assert!(GeneratorSpec::PearsonVII { r: 1.0, q: 1.0 }
            .log_norm_const(2.0)
            .is_err());
        assert!(GeneratorSpec::Kotz {
            r: 1.0,
            q: 0.0,
            s: 1.0
        }
        .log_norm_const(2.0)
        .is_err());
        assert!(GeneratorSpec::Kotz {
            r: -1.0,
            q: 1.0,
            s: 1.0
        }
        .log_norm_const(2.0)
        .is_err());
        assert!(GeneratorSpec::PearsonII { q: -1.0 }
            .log_norm_const(2.0)
            .is_err());
        assert!(GeneratorSpec::Bessel { r: 1.0, q: -1.0 }
            .log_norm_const(1.0)
            .is_err());
    }

    #[test]
    fn half_normal_and_rayleigh() {
        let law = RadialLaw::new(GeneratorSpec::GAUSSIAN, 1.0).unwrap();
        let want = (2.0 / (2.0 * PI).sqrt() * (-0.5f64).exp()).ln();
        assert!((law.radial_logpdf(1.0) - want).abs() < 1e-14);
        assert!((law.radial_logpdf(1.0) + 0.725_791).abs() < 1e-6);
        let law = RadialLaw::new(GeneratorSpec::GAUSSIAN, 2.0).unwrap();
        for &r in &[0.1, 0.9, 2.3, 5.0] {
            assert!((law.radial_logpdf(r) - (r.ln() - r * r / 2.0)).abs() < 1e-13);
        }
    }

    #[test]
    fn radial_laws_integrate_to_one() {
        for spec in specs() {
            for n in [1.0, 2.0, 3.0, 2.7] {
                let Ok(law) = RadialLaw::new(spec, n) else {
                    continue;
                };
                let scale = typical_w(&spec, n).sqrt();
                let upper = spec.w_max().sqrt();
                let r = integrate(
                    |r| law.radial_logpdf(r).exp(),
                    0.0,
                    upper,
                    QuadOptions::tol(1e-12, 1e-10).with_scale(scale),
                );
                assert!((r.value - 1.0).abs() < 1e-6, "{spec:?} n={n}: {r:?}");
            }
        }
    }

    #[test]
    fn tensor_quadrature_normalization() {
        for spec in specs() {
            for dim in 1..=2usize {
                let n = dim as f64;
                let Ok(law) = RadialLaw::new(spec, n) else {
                    continue;
                };
                if matches!(spec, GeneratorSpec::PearsonII { q } if q < 0.0) {
                    // Pole on the boundary sphere; covered by the radial checks.
                    continue;
                }
                let region = if spec.w_max().is_finite() {
                    Region::new(vec![Bound::Ball(0); dim])
                } else {
                    let s = typical_w(&spec, n).sqrt();
                    Region::new(vec![Bound::Interval(f64::NEG_INFINITY, f64::INFINITY); dim])
                        .with_scales(vec![s; dim])
                };
                let f = |x: &[f64]| {
                    let w: f64 = x.iter().map(|v| v * v).sum();
                    law.log_h(w).exp()
                };
                let order: Vec<usize> = (0..dim).collect();
                let opts = QuadOptions::tol(1e-9, 1e-8);
                let v = region.integrate(&f, &order, &[], opts);
                // Kernels with an integrable pole at the origin converge slowly
                // on tensor grids; the radial check covers them tightly.
                let singular = spec.log_kernel(0.0) == f64::INFINITY;
                let tol = if singular { 1e-3 } else { 1e-5 };
                assert!((v.value - 1.0).abs() < tol, "{spec:?} n={dim}: {v:?}");
            }
        }
    }

    #[test]
    fn integral_identity() {
        let r = radial_integral_identity_check(GeneratorSpec::GAUSSIAN, 2.0, 1.0).unwrap();
        assert!(r <= 1e-10, "{r}");
        for spec in specs() {
            for n in [1.0, 2.0, 3.0] {
                if spec.validate(n).is_err() {
                    continue;
                }
                for a in [0.5, 1.0, 4.0] {
                    let r = radial_integral_identity_check(spec, n, a)
                        .unwrap_or_else(|e| panic!("{spec:?} n={n} a={a}: {e}"));
                    assert!(r <= 1e-6, "{spec:?} n={n} a={a}: {r}");
                }
            }
        }
        let r =
            radial_integral_identity_check(GeneratorSpec::PearsonVII { r: 1.0, q: 3.0 }, 2.0, 1.0)
                .unwrap();
        assert!(r <= 1e-6);
    }

    #[test]
    fn bessel_table_constant_only_normalizes_at_q_one() {
        for &(r, q, n) in &[(1.0, 1.0, 2.0), (0.7, 1.0, 3.0)] {
            let ours = GeneratorSpec::Bessel { r, q }.log_norm_const(n).unwrap();
            assert!((ours - bessel_table_log_const(r, q, n)).abs() < 1e-12);
        }
        let ours = GeneratorSpec::Bessel { r: 1.0, q: 0.0 }
            .log_norm_const(2.0)
            .unwrap();
        assert!((ours - bessel_table_log_const(1.0, 0.0, 2.0)).abs() > 0.1);
    }
}
