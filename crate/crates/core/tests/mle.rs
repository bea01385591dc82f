use statrs::function::gamma::digamma;

use multivec::densities::GenGammaParams;
use multivec::generators::GeneratorSpec;
use multivec::mle::{
    fit_dependent, fit_independent, loglik_dependent, FitOptions, KotzGammaDepParams, SuffStats,
};
use multivec::params::{SampleMatrix, ScaleShapeParams};
use multivec::sampling::{sample_mv_gengamma, RadiusSampler, RngState};

fn gamma_data(m: usize, seed: u64) -> SampleMatrix {
    let mut rng = RngState::new(seed);
    let u: Vec<f64> = (0..m)
        .map(|_| 2.0 * 1.5f64.powi(2) * rng.gamma(3.0))
        .collect();
    let v: Vec<f64> = (0..m)
        .map(|_| 2.0 * 0.5f64.powi(2) * rng.gamma(6.0))
        .collect();
    SampleMatrix::from_columns(&[u, v]).unwrap()
}

fn kotz_gamma_data(p: &KotzGammaDepParams, m: usize, seed: u64) -> SampleMatrix {
    let mut shapes = vec![p.alpha; m];
    shapes.extend(vec![p.beta; m]);
    let mut scales = vec![p.sigma1; m];
    scales.extend(vec![p.sigma2; m]);
    let g = GenGammaParams::new(
        ScaleShapeParams::new(shapes, scales).unwrap(),
        GeneratorSpec::Kotz {
            r: p.r,
            q: p.q,
            s: p.s,
        },
    )
    .unwrap();
    let x = sample_mv_gengamma(
        &g,
        &RadiusSampler::new(*g.law()).unwrap(),
        &mut RngState::new(seed),
    );
    SampleMatrix::from_columns(&[x[..m].to_vec(), x[m..].to_vec()]).unwrap()
}

const TRUTH: KotzGammaDepParams = KotzGammaDepParams {
    sigma1: 1.0,
    alpha: 5.0,
    sigma2: 2.0,
    beta: 8.0,
    r: 0.4,
    q: 1.5,
    s: 1.1,
};

/// Gamma(α, scale 2σ²) MLE: ln α − ψ(α) = ln(mean) − mean(ln u), then σ² = mean/(2α).
fn gamma_mle(u: &[f64]) -> (f64, f64) {
    let m = u.len() as f64;
    let mean = u.iter().sum::<f64>() / m;
    let t = mean.ln() - u.iter().map(|x| x.ln()).sum::<f64>() / m;
    // ln α − ψ(α) decreases from +∞ to 0; bisect in log space.
    let (mut lo, mut hi) = (1e-8f64.ln(), 1e8f64.ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let a = mid.exp();
        if a.ln() - digamma(a) > t {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let a = (0.5 * (lo + hi)).exp();
    (a, (mean / (2.0 * a)).sqrt())
}

#[test]
fn frozen_independent_fit_is_the_gamma_mle() {
    let data = gamma_data(500, 3);
    let opts = FitOptions {
        freeze_generator: true,
        ..FitOptions::default()
    };
    let fit = fit_independent(&data, &opts).unwrap();
    for (col, side) in [(0, "u"), (1, "v")] {
        let (a, s) = gamma_mle(&data.column(col));
        let fa = fit.params[&format!("{side}.shape")];
        let fs = fit.params[&format!("{side}.sigma")];
        assert!((fa / a - 1.0).abs() < 1e-6, "{side}: shape {fa} vs {a}");
        assert!((fs / s - 1.0).abs() < 1e-6, "{side}: sigma {fs} vs {s}");
    }
}

#[test]
fn free_independent_fit_dominates_the_gamma_fit() {
    for seed in 1..=3 {
        let data = gamma_data(2000, seed);
        let free = fit_independent(&data, &FitOptions::default()).unwrap();
        let frozen = fit_independent(
            &data,
            &FitOptions {
                freeze_generator: true,
                ..FitOptions::default()
            },
        )
        .unwrap();
        assert!(free.converged && free.at_bound.is_empty());
        assert!(
            free.loglik >= frozen.loglik - 1e-6,
            "{} < {}",
            free.loglik,
            frozen.loglik
        );
    }
}

/// q enters the per-variable law only through q + shape, so q̂ follows the
/// optimizer path; ŝ scatters by about 0.1 between seeds at this size.
#[test]
#[ignore = "q is not identified separately from the shape in the per-variable model"]
fn independent_generator_estimates_near_gaussian() {
    for seed in 1..=3 {
        let fit = fit_independent(&gamma_data(2000, seed), &FitOptions::default()).unwrap();
        for side in ["u", "v"] {
            let q = fit.params[&format!("{side}.q")];
            let s = fit.params[&format!("{side}.s")];
            assert!(
                (q - 1.0).abs() < 0.05 && (s - 1.0).abs() < 0.05,
                "seed {seed} {side}: q {q}, s {s}"
            );
        }
    }
}

#[test]
fn dependent_fit_recovers_shapes() {
    for seed in 1..=3 {
        let data = kotz_gamma_data(&TRUTH, 2000, seed);
        let fit = fit_dependent(&data, &FitOptions::default()).unwrap();
        let at_truth = loglik_dependent(&TRUTH, &SuffStats::from_sample(&data).unwrap()).unwrap();
        assert!(fit.converged);
        assert!((fit.params["alpha"] / TRUTH.alpha - 1.0).abs() < 0.1);
        assert!((fit.params["beta"] / TRUTH.beta - 1.0).abs() < 0.1);
        assert!(
            fit.loglik >= at_truth - 1.0,
            "{} vs {}",
            fit.loglik,
            at_truth
        );
        let start = fit
            .restarts
            .iter()
            .find(|(l, _)| l == "gaussian")
            .unwrap()
            .1;
        assert!(fit.loglik >= start);
    }
}

#[test]
fn independent_loglik_below_dependent_on_dependent_data() {
    for seed in 1..=3 {
        let data = kotz_gamma_data(&TRUTH, 2000, seed);
        let dep = fit_dependent(&data, &FitOptions::default()).unwrap();
        let ind = fit_independent(&data, &FitOptions::default()).unwrap();
        assert!(
            ind.loglik <= dep.loglik,
            "seed {seed}: {} > {}",
            ind.loglik,
            dep.loglik
        );
    }
}

#[test]
fn fits_are_deterministic() {
    let data = kotz_gamma_data(&TRUTH, 300, 9);
    let a = fit_dependent(&data, &FitOptions::default()).unwrap();
    let b = fit_dependent(&data, &FitOptions::default()).unwrap();
    assert_eq!(a, b);
}
