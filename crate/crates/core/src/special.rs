//! Special functions: log-gamma and the modified Bessel function of the
//! third kind in log space.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// ln Γ(x) for x > 0 (Lanczos, via statrs).
#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Upper regularized incomplete gamma Q(a, x).
pub fn gamma_q(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    statrs::function::gamma::gamma_ur(a, x)
}

/// Range over which [`log_bessel_k`] is certified.
pub const BESSEL_Z_MIN: f64 = 1e-6;
pub const BESSEL_Z_MAX: f64 = 700.0;
pub const BESSEL_ORDER_MAX: f64 = 50.0;

/// ln K_q(z) for z in [1e-6, 700] and |q| <= 50.
pub fn log_bessel_k(q: f64, z: f64) -> Result<f64> {
    if !(BESSEL_Z_MIN..=BESSEL_Z_MAX).contains(&z) {
        return Err(Error::Overflow(z));
    }
    if !(q.abs() <= BESSEL_ORDER_MAX) {
        return Err(Error::ParameterOutOfDomain(format!(
            "Bessel order |q| must be <= {BESSEL_ORDER_MAX}, got {q}"
        )));
    }
    Ok(log_bessel_k_unchecked(q, z))
}

// Taylor coefficients of 1/Γ(1+x) about 0.
const RGAMMA1P: [f64; 29] = [
    1.0,
    0.577_215_664_901_532_860_61,
    -0.655_878_071_520_253_881_08,
    -0.042_002_635_034_095_235_529,
    0.166_538_611_382_291_489_5,
    -0.042_197_734_555_544_336_748,
    -0.009_621_971_527_876_973_562_1,
    0.007_218_943_246_663_099_542_4,
    -0.001_165_167_591_859_065_112_1,
    -0.000_215_241_674_114_950_972_82,
    0.000_128_050_282_388_116_186_15,
    -0.000_020_134_854_780_788_238_656,
    -1.250_493_482_142_670_657_3e-6,
    1.133_027_231_981_695_882_4e-6,
    -2.056_338_416_977_607_103_5e-7,
    6.116_095_104_481_415_817_9e-9,
    5.002_007_644_469_222_930_1e-9,
    -1.181_274_570_487_020_144_6e-9,
    1.043_426_711_691_100_510_5e-10,
    7.782_263_439_905_071_254e-12,
    -3.696_805_618_642_205_708_2e-12,
    5.100_370_287_454_475_979e-13,
    -2.058_326_053_566_506_783_2e-14,
    -5.348_122_539_423_017_982_4e-15,
    1.226_778_628_238_260_790_2e-15,
    -1.181_259_301_697_458_769_5e-16,
    1.186_692_254_751_600_332_6e-18,
    1.412_380_655_318_031_781_6e-18,
    -2.298_745_684_435_370_206_6e-19,
];

/// (gam1, gam2, 1/Γ(1+μ), 1/Γ(1−μ)) for |μ| <= 1/2, the Temme auxiliaries.
fn temme_gammas(mu: f64) -> (f64, f64, f64, f64) {
    let mut odd = 0.0;
    let mut even = 0.0;
    for (k, &c) in RGAMMA1P.iter().enumerate().rev() {
        if k % 2 == 1 {
            odd = odd * mu * mu + c;
        } else {
            even = even * mu * mu + c;
        }
    }
    // 1/Γ(1±μ) = even ± μ·odd
    let gam1 = -odd;
    let gam2 = even;
    (gam1, gam2, even + mu * odd, even - mu * odd)
}

/// ln K_q(z) for any finite z > 0, without range certification.
pub fn log_bessel_k_unchecked(q: f64, x: f64) -> f64 {
    const EPS: f64 = 1e-16;
    const MAXIT: usize = 100_000;
    if !(x > 0.0) {
        return f64::INFINITY;
    }
    if x.is_infinite() {
        return f64::NEG_INFINITY;
    }
    let nu = q.abs();
    let nl = (nu + 0.5).floor() as usize;
    let mu = nu - nl as f64;
    let mu2 = mu * mu;
    let xi = 1.0 / x;
    let xi2 = 2.0 * xi;

    // K_mu and K_{mu+1}, each equal to value * exp(log_scale).
    let (mut kmu, mut k1, mut log_scale);
    if x < 2.0 {
        let x2 = 0.5 * x;
        let pimu = PI * mu;
        let fact = if pimu.abs() < EPS {
            1.0
        } else {
            pimu / pimu.sin()
        };
        let d = -x2.ln();
        let e = mu * d;
        let fact2 = if e.abs() < EPS { 1.0 } else { e.sinh() / e };
        let (gam1, gam2, gampl, gammi) = temme_gammas(mu);
        let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
        let mut sum = ff;
        let ee = e.exp();
        let mut p = 0.5 * ee / gampl;
        let mut qq = 0.5 / (ee * gammi);
        let mut c = 1.0;
        let dd = x2 * x2;
        let mut sum1 = p;
        for i in 1..MAXIT {
            let fi = i as f64;
            ff = (fi * ff + p + qq) / (fi * fi - mu2);
            c *= dd / fi;
            p /= fi - mu;
            qq /= fi + mu;
            let del = c * ff;
            sum += del;
            sum1 += c * (p - fi * ff);
            if del.abs() < sum.abs() * EPS {
                break;
            }
        }
        kmu = sum;
        k1 = sum1 * xi2;
        log_scale = 0.0;
    } else {
        // Steed's continued fraction; yields exp(x)·K.
        let mut b = 2.0 * (1.0 + x);
        let mut d = 1.0 / b;
        let mut h = d;
        let mut delh = d;
        let mut q1 = 0.0;
        let mut q2 = 1.0;
        let a1 = 0.25 - mu2;
        let mut qs = a1;
        let mut c = a1;
        let mut a = -a1;
        let mut s = 1.0 + qs * delh;
        for i in 1..MAXIT {
            let fi = i as f64;
            a -= 2.0 * fi;
            c = -a * c / (fi + 1.0);
            let qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            qs += c * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh = (b * d - 1.0) * delh;
            h += delh;
            let dels = qs * delh;
            s += dels;
            if (dels / s).abs() < EPS {
                break;
            }
        }
        h *= a1;
        kmu = (PI / (2.0 * x)).sqrt() / s;
        k1 = kmu * (mu + x + 0.5 - h) * xi;
        log_scale = -x;
    }

    for i in 1..=nl {
        let next = (mu + i as f64) * xi2 * k1 + kmu;
        kmu = k1;
        k1 = next;
        if k1 > 1e250 {
            kmu /= k1;
            log_scale += k1.ln();
            k1 = 1.0;
        }
    }
    kmu.ln() + log_scale
}

#[cfg(test)]
mod tests {
    use super::*;

    // Reference values from 40-digit arbitrary-precision evaluation.
    const REFERENCE: &[(f64, f64, f64)] = &[
        (0.0, 1.0, -0.865_064_398_906_788_096_8),
        (0.5, 2.0, -2.120_782_237_635_245_222_3),
        (0.0, 1e-6, 2.634_148_305_306_988_409_4),
        (0.3, 0.01, 1.930_085_981_618_933_092_7),
        (2.7, 1.5, 0.226_082_227_190_800_721_19),
        (10.0, 3.0, 7.807_762_317_044_091_464_5),
        (50.0, 1e-6, 869.305_483_691_995_908_54),
        (50.0, 700.0, -701.266_241_357_182_034_53),
        (0.5, 700.0, -703.049_748_814_876_974_9),
        (7.25, 45.0, -46.103_773_715_682_247_678),
        (-3.4, 0.8, 3.449_308_919_086_207_327_5),
        (1.0, 2.0, -1.967_071_302_560_513_891_5),
        (25.5, 12.0, 8.579_144_957_756_912_597_2),
        (0.1, 1.99, -2.158_120_786_231_627_917_9),
        (0.1, 2.01, -2.182_699_234_309_129_422_9),
    ];

    #[test]
    fn matches_reference_values() {
        for &(q, z, want) in REFERENCE {
            let got = log_bessel_k(q, z).unwrap();
            assert!(
                (got - want).abs() <= 1e-10 * want.abs().max(1.0),
                "q={q} z={z}: {got} vs {want}"
            );
        }
    }

    #[test]
    fn named_values() {
        assert!((log_bessel_k(0.0, 1.0).unwrap().exp() - 0.421_024_438_240_708_3).abs() < 1e-12);
        assert!((log_bessel_k(0.5, 2.0).unwrap().exp() - 0.119_937_771_968_061_5).abs() < 1e-12);
    }

    #[test]
    fn half_integer_closed_form() {
        let mut z = 1e-6;
        while z <= 700.0 {
            let want = 0.5 * (PI / (2.0 * z)).ln() - z;
            for q in [0.5, -0.5] {
                let got = log_bessel_k(q, z).unwrap();
                assert!((got - want).abs() <= 1e-10 * want.abs().max(1.0), "z={z}");
            }
            // K_{3/2}(z) = K_{1/2}(z)(1 + 1/z)
            let got = log_bessel_k(1.5, z).unwrap();
            let want32 = want + (1.0 + 1.0 / z).ln();
            assert!(
                (got - want32).abs() <= 1e-10 * want32.abs().max(1.0),
                "z={z}"
            );
            z *= 1.7;
        }
    }

    #[test]
    fn order_symmetry() {
        for &q in &[0.2, 1.3, 4.75, 17.0, 49.5] {
            for &z in &[1e-5, 0.3, 1.9, 2.1, 33.0, 650.0] {
                assert_eq!(log_bessel_k(q, z).unwrap(), log_bessel_k(-q, z).unwrap());
            }
        }
    }

    #[test]
    fn range_is_enforced() {
        assert_eq!(log_bessel_k(1.0, 800.0), Err(Error::Overflow(800.0)));
        assert_eq!(log_bessel_k(1.0, 1e-7), Err(Error::Overflow(1e-7)));
        assert!(log_bessel_k(51.0, 1.0).is_err());
    }

    #[test]
    fn ln_gamma_large_arguments() {
        // 40-digit references
        let cases = [
            (1e6, 12_815_504.569_147_611_659_976_97),
            (0.5, 0.572_364_942_924_700_087_071_713_7),
            (168_000.5, 1_853_329.754_347_031_712_903_18),
        ];
        for (x, want) in cases {
            let got = ln_gamma(x);
            assert!(
                ((got - want) / want).abs() < 1e-12,
                "x={x}: {got} vs {want}"
            );
        }
    }
}
