//! Oracle checks: normalization by quadrature and importance sampling,
//! change-of-variables identities, and sampler-versus-density goodness of fit.

use std::f64::consts::PI;
use std::str::FromStr;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde_json::json;

use crate::densities::{
    BetaParams, EllipticalParams, Family, GammaLogGammaParams, GenGammaBetaParams, GenGammaParams,
    GenGammaTParams, MvTParams,
};
use crate::error::{domain, Error, Result};
use crate::generators::{radial_integral_identity_check, GeneratorSpec};
use crate::mle::compensated_sum;
use crate::parallel::pool;
use crate::params::{ExtendedShape, MvEllipticalParams, Partition, SampleMatrix, ScaleShapeParams};
use crate::quad::{integrate, integrate_density, QuadOptions, Region};
use crate::sampling::{sample_unit_sphere, FamilySampler, RngState, CHUNK};
use crate::special::ln_gamma;
use crate::stats::{chi2_pvalue, chi2_statistic, ks_one_sample, quantile};

/// Marginal KS threshold.
pub const KS_ALPHA: f64 = 0.01;
/// Joint χ² threshold.
pub const CHI2_ALPHA: f64 = 0.001;

pub type LogDensity<'a> = dyn Fn(&[f64]) -> f64 + Sync + 'a;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub details: String,
}

impl CheckReport {
    pub fn new(
        name: impl Into<String>,
        residual: f64,
        tolerance: f64,
        details: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            residual,
            tolerance,
            passed: residual <= tolerance,
            details: details.into(),
        }
    }

    /// Goodness-of-fit report: residual 1 − p against tolerance 1 − α, so
    /// it passes exactly when p ≥ α.
    pub fn gof(
        name: impl Into<String>,
        pvalue: f64,
        alpha: f64,
        details: impl Into<String>,
    ) -> Self {
        Self::new(name, 1.0 - pvalue, 1.0 - alpha, details)
    }

    /// One JSON object with sorted keys.
    pub fn to_json(&self) -> String {
        json!({
            "name": self.name,
            "residual": self.residual,
            "tolerance": self.tolerance,
            "passed": self.passed,
            "details": self.details,
        })
        .to_string()
    }
}

fn exp_or_zero(v: f64) -> f64 {
    if v == f64::NEG_INFINITY {
        0.0
    } else {
        v.exp()
    }
}

fn family_logf(family: &Family) -> impl Fn(&[f64]) -> f64 + Sync + '_ {
    move |x: &[f64]| family.logpdf(x).unwrap_or(f64::NEG_INFINITY)
}

// ---------------------------------------------------------------------------
// Normalization

/// Nested adaptive quadrature of exp(logf) over `region`; residual |I − 1|.
pub fn quad_normalization(
    name: &str,
    logf: &LogDensity,
    region: &Region,
    tol: f64,
) -> Result<CheckReport> {
    if region.dim() > 3 {
        return domain(format!(
            "quadrature is limited to 3 dimensions, got {}",
            region.dim()
        ));
    }
    let opts = QuadOptions::tol(tol * 0.05, tol * 0.05);
    let value = integrate_density(logf, region, opts)?;
    Ok(CheckReport::new(
        name,
        (value - 1.0).abs(),
        tol,
        format!("integral {value:.12}"),
    ))
}

pub fn family_quad_normalization(family: &Family, tol: f64) -> Result<CheckReport> {
    let logf = family_logf(family);
    quad_normalization(
        &format!("normalization/{}", family.name()),
        &logf,
        &family.region(),
        tol,
    )
}

/// Importance-sampling proposal with independent coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum Proposal {
    Gaussian {
        center: Vec<f64>,
        scales: Vec<f64>,
    },
    StudentT {
        nu: f64,
        center: Vec<f64>,
        scales: Vec<f64>,
    },
}

impl Proposal {
    pub fn dim(&self) -> usize {
        match self {
            Proposal::Gaussian { center, .. } | Proposal::StudentT { center, .. } => center.len(),
        }
    }

    /// A draw and its log proposal density.
    pub fn draw(&self, rng: &mut RngState) -> (Vec<f64>, f64) {
        match self {
            Proposal::Gaussian { center, scales } => {
                let mut lq = 0.0;
                let x = center
                    .iter()
                    .zip(scales)
                    .map(|(c, s)| {
                        let z = rng.normal();
                        lq += -0.5 * z * z - s.ln() - 0.5 * (2.0 * PI).ln();
                        c + s * z
                    })
                    .collect();
                (x, lq)
            }
            Proposal::StudentT { nu, center, scales } => {
                let norm = ln_gamma(0.5 * (nu + 1.0)) - ln_gamma(0.5 * nu) - 0.5 * (nu * PI).ln();
                let mut lq = 0.0;
                let x = center
                    .iter()
                    .zip(scales)
                    .map(|(c, s)| {
                        let t = rng.normal() / (2.0 * rng.gamma(0.5 * nu) / nu).sqrt();
                        lq += norm - 0.5 * (nu + 1.0) * (t * t / nu).ln_1p() - s.ln();
                        c + s * t
                    })
                    .collect();
                (x, lq)
            }
        }
    }
}

/// Importance-sampling estimate of ∫exp(logf); passes when |Î − 1| ≤ 3·SE.
pub fn mc_normalization(
    name: &str,
    logf: &LogDensity,
    proposal: &Proposal,
    n: usize,
    seed: u64,
) -> Result<CheckReport> {
    if n < 2 {
        return domain("Monte Carlo normalization needs at least 2 draws");
    }
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<(f64, f64)> = pool().install(|| {
        (0..chunks)
            .into_par_iter()
            .map(|c| {
                let mut rng = RngState::with_stream(seed, c as u64);
                let rows = CHUNK.min(n - c * CHUNK);
                let w: Vec<f64> = (0..rows)
                    .map(|_| {
                        let (x, lq) = proposal.draw(&mut rng);
                        exp_or_zero(logf(&x) - lq)
                    })
                    .collect();
                (
                    compensated_sum(w.iter().copied()),
                    compensated_sum(w.iter().map(|v| v * v)),
                )
            })
            .collect()
    });
    let sum = compensated_sum(parts.iter().map(|p| p.0));
    let sum_sq = compensated_sum(parts.iter().map(|p| p.1));
    let nf = n as f64;
    let ess = if sum_sq > 0.0 {
        sum * sum / sum_sq
    } else {
        0.0
    };
    if !(ess >= nf / 100.0) {
        return Err(Error::DegenerateWeights { ess, n });
    }
    let mean = sum / nf;
    let var = ((sum_sq / nf - mean * mean) * nf / (nf - 1.0)).max(0.0);
    let se = (var / nf).sqrt();
    Ok(CheckReport::new(
        name,
        (mean - 1.0).abs(),
        3.0 * se,
        format!("estimate {mean:.8}, standard error {se:.3e}, ess {ess:.0} of {n}"),
    ))
}

// ---------------------------------------------------------------------------
// Change of variables on the unit ball

fn log_ball_volume(n: usize) -> f64 {
    0.5 * n as f64 * PI.ln() - ln_gamma(0.5 * n as f64 + 1.0)
}

/// y = x / √(1 − ‖x‖²).
pub fn ball_to_space(x: &[f64]) -> Vec<f64> {
    let d = (1.0 - x.iter().map(|v| v * v).sum::<f64>()).sqrt();
    x.iter().map(|v| v / d).collect()
}

/// x = y / √(1 + ‖y‖²).
pub fn space_to_ball(y: &[f64]) -> Vec<f64> {
    let d = (1.0 + y.iter().map(|v| v * v).sum::<f64>()).sqrt();
    y.iter().map(|v| v / d).collect()
}

/// ln |∂y/∂x| = −(n/2 + 1)·ln(1 − ‖x‖²).
pub fn log_ball_jacobian(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    -(0.5 * n + 1.0) * (-x.iter().map(|v| v * v).sum::<f64>()).ln_1p()
}

/// Density of y when x is uniform on the unit ball, from the Jacobian.
pub fn ball_pushforward_logpdf(y: &[f64]) -> f64 {
    -log_ball_volume(y.len()) - log_ball_jacobian(&space_to_ball(y))
}

fn uniform_ball(n: usize, rng: &mut RngState) -> Vec<f64> {
    let r = rng.uniform().powf(1.0 / n as f64);
    sample_unit_sphere(n, rng)
        .into_iter()
        .map(|v| r * v)
        .collect()
}

/// χ² test of ‖y‖ for uniform-ball draws pushed through the map, against
/// the radial law implied by the Jacobian.
pub fn jacobian_check(n: usize, draws: usize, seed: u64) -> Result<CheckReport> {
    if n == 0 {
        return domain("dimension must be >= 1");
    }
    if draws < 200 {
        return domain("jacobian check needs at least 200 draws");
    }
    let mut rng = RngState::new(seed);
    let mut rho: Vec<f64> = (0..draws)
        .map(|_| {
            let y = ball_to_space(&uniform_ball(n, &mut rng));
            y.iter().map(|v| v * v).sum::<f64>().sqrt()
        })
        .collect();
    rho.sort_by(f64::total_cmp);
    // Surface area over volume of the unit ball is n.
    let log_surface = (n as f64).ln() + log_ball_volume(n);
    let radial = |r: f64| {
        if r <= 0.0 {
            return 0.0;
        }
        let mut y = vec![0.0; n];
        y[0] = r;
        exp_or_zero(log_surface + (n as f64 - 1.0) * r.ln() + ball_pushforward_logpdf(&y))
    };
    let bins = 20;
    let mut edges = vec![0.0];
    edges.extend((1..bins).map(|i| quantile(&rho, i as f64 / bins as f64)));
    edges.push(f64::INFINITY);
    let mut observed = vec![0.0; bins];
    for &r in &rho {
        let b = edges[1..bins].partition_point(|&e| e < r);
        observed[b] += 1.0;
    }
    let opts = QuadOptions::tol(1e-12, 1e-10);
    let mut expected = Vec::with_capacity(bins);
    for w in edges.windows(2) {
        expected.push(draws as f64 * integrate(radial, w[0], w[1], opts).into_result()?);
    }
    let stat = chi2_statistic(&observed, &expected);
    let p = chi2_pvalue(stat, (bins - 1) as f64);
    Ok(CheckReport::gof(
        format!("jacobian/chi2/n={n}/seed={seed}"),
        p,
        CHI2_ALPHA,
        format!(
            "chi2 {stat:.4} on {} dof, p {p:.4}, mass {:.8}",
            bins - 1,
            expected.iter().sum::<f64>() / draws as f64
        ),
    ))
}

/// Finite-difference determinant of ∂y/∂x against the closed form.
pub fn jacobian_determinant_check(n: usize, points: usize, seed: u64) -> Result<CheckReport> {
    if n == 0 {
        return domain("dimension must be >= 1");
    }
    let mut rng = RngState::new(seed);
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let x: Vec<f64> = uniform_ball(n, &mut rng)
            .into_iter()
            .map(|v| 0.9 * v)
            .collect();
        let mut jac = DMatrix::zeros(n, n);
        for j in 0..n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[j] += h;
            xm[j] -= h;
            let (yp, ym) = (ball_to_space(&xp), ball_to_space(&xm));
            for i in 0..n {
                jac[(i, j)] = (yp[i] - ym[i]) / (2.0 * h);
            }
        }
        let want = log_ball_jacobian(&x).exp();
        worst = worst.max((jac.determinant() - want).abs() / want);
    }
    Ok(CheckReport::new(
        format!("jacobian/determinant/n={n}"),
        worst,
        1e-6,
        format!("max relative error over {points} points"),
    ))
}

/// max |x − x(y(x))| over points inside the ball.
pub fn jacobian_round_trip_check(n: usize, points: usize, seed: u64) -> Result<CheckReport> {
    if n == 0 {
        return domain("dimension must be >= 1");
    }
    let mut rng = RngState::new(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..points {
        let x: Vec<f64> = uniform_ball(n, &mut rng)
            .into_iter()
            .map(|v| 0.99 * v)
            .collect();
        let back = space_to_ball(&ball_to_space(&x));
        for (a, b) in x.iter().zip(&back) {
            worst = worst.max((a - b).abs());
        }
    }
    Ok(CheckReport::new(
        format!("jacobian/round_trip/n={n}"),
        worst,
        1e-12,
        format!("max abs error over {points} points"),
    ))
}

/// Generators used for the identity grid.
pub fn identity_generators() -> Vec<GeneratorSpec> {
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

/// ∫ z^{n/2−1} h(z/a) dz = a^{n/2} Γ(n/2) / π^{n/2} over generators,
/// dimensions 1–3 and scales a ∈ {0.5, 1, 2.5}.
pub fn identity_grid_checks() -> Result<Vec<CheckReport>> {
    let mut jobs = Vec::new();
    for spec in identity_generators() {
        for n in [1.0, 2.0, 3.0] {
            for a in [0.5, 1.0, 2.5] {
                jobs.push((spec, n, a));
            }
        }
    }
    pool().install(|| {
        jobs.into_par_iter()
            .map(|(spec, n, a)| {
                let r = radial_integral_identity_check(spec, n, a)?;
                Ok(CheckReport::new(
                    format!("identity/{}/n={n}/a={a}", spec.name()),
                    r,
                    1e-6,
                    format!("{spec:?}"),
                ))
            })
            .collect()
    })
}

// ---------------------------------------------------------------------------
// Sampler against density

fn gof_quad() -> QuadOptions {
    QuadOptions::tol(1e-9, 1e-7).with_max_evals(5_000_000)
}

/// Marginal CDF of one coordinate, tabulated at sample quantiles and
/// interpolated by cubic Hermite with the marginal density as slope.
struct MarginalCdf {
    nodes: Vec<f64>,
    cdf: Vec<f64>,
    pdf: Vec<f64>,
}

impl MarginalCdf {
    fn build(f: &LogDensity, region: &Region, c: usize, sorted: &[f64]) -> Result<Self> {
        let mut probs: Vec<f64> =
            vec![0.0, 1e-4, 1e-3, 3e-3, 0.01, 0.99, 0.997, 0.999, 0.9999, 1.0];
        probs.extend((1..128).map(|i| i as f64 / 128.0));
        probs.sort_by(f64::total_cmp);
        let mut nodes: Vec<f64> = probs.iter().map(|&p| quantile(sorted, p)).collect();
        nodes.dedup();
        let (lo, _) = region.coordinate_range(c);
        let others: Vec<usize> = (0..region.dim()).filter(|&j| j != c).collect();
        let mut order = vec![c];
        order.extend(&others);
        let density = |x: &[f64]| exp_or_zero(f(x));
        let mut cells = vec![(lo, nodes[0])];
        cells.extend(nodes.windows(2).map(|w| (w[0], w[1])));
        let (masses, pdf): (Vec<Result<f64>>, Vec<f64>) = pool().install(|| {
            let masses = cells
                .par_iter()
                .map(|&(a, b)| {
                    region
                        .integrate(&density, &order, &[(c, a, b)], gof_quad())
                        .into_result()
                })
                .collect();
            let pdf = nodes
                .par_iter()
                .map(|&x| {
                    region
                        .integrate_fixed(&density, &others, &[(c, x)], &[], gof_quad())
                        .value
                })
                .collect();
            (masses, pdf)
        });
        let mut cdf = Vec::with_capacity(nodes.len());
        let mut acc = Vec::with_capacity(masses.len());
        for m in masses {
            acc.push(m?);
            cdf.push(compensated_sum(acc.iter().copied()));
        }
        Ok(Self { nodes, cdf, pdf })
    }

    fn eval(&self, x: f64) -> f64 {
        let last = self.nodes.len() - 1;
        if x <= self.nodes[0] {
            return self.cdf[0];
        }
        if x >= self.nodes[last] {
            return self.cdf[last];
        }
        let i = self.nodes.partition_point(|&v| v <= x) - 1;
        let (x0, x1) = (self.nodes[i], self.nodes[i + 1]);
        let (f0, f1) = (self.cdf[i], self.cdf[i + 1]);
        let h = x1 - x0;
        let t = (x - x0) / h;
        let (d0, d1) = (self.pdf[i], self.pdf[i + 1]);
        let v = if d0.is_finite() && d1.is_finite() {
            let t2 = t * t;
            let t3 = t2 * t;
            (2.0 * t3 - 3.0 * t2 + 1.0) * f0
                + (t3 - 2.0 * t2 + t) * h * d0
                + (-2.0 * t3 + 3.0 * t2) * f1
                + (t3 - t2) * h * d1
        } else {
            f0 + t * (f1 - f0)
        };
        v.clamp(f0, f1)
    }
}

/// KS on every margin and χ² on every coordinate pair (8×8 cells at sample
/// quantiles) of `sample` against the density exp(logf). The density is
/// not renormalized.
pub fn pushforward_check(
    name: &str,
    sample: &SampleMatrix,
    logf: &LogDensity,
    region: &Region,
) -> Result<Vec<CheckReport>> {
    let dim = region.dim();
    if sample.cols() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: sample.cols(),
        });
    }
    if dim > 3 {
        return domain(format!(
            "goodness-of-fit checks are limited to 3 dimensions, got {dim}"
        ));
    }
    if sample.rows() < 100 {
        return domain("goodness-of-fit checks need at least 100 draws");
    }
    let n = sample.rows();
    let columns: Vec<Vec<f64>> = (0..dim).map(|c| sample.column(c)).collect();
    let sorted: Vec<Vec<f64>> = columns
        .iter()
        .map(|c| {
            let mut s = c.clone();
            s.sort_by(f64::total_cmp);
            s
        })
        .collect();
    let mut reports = Vec::new();
    for c in 0..dim {
        let marginal = match MarginalCdf::build(logf, region, c, &sorted[c]) {
            Ok(m) => m,
            Err(Error::QuadratureFailure(msg)) => {
                reports.push(CheckReport::gof(
                    format!("{name}/ks[{c}]"),
                    0.0,
                    KS_ALPHA,
                    format!("marginal mass: {msg}"),
                ));
                continue;
            }
            Err(e) => return Err(e),
        };
        let ks = ks_one_sample(&columns[c], |x| marginal.eval(x));
        let total = *marginal.cdf.last().unwrap();
        reports.push(CheckReport::gof(
            format!("{name}/ks[{c}]"),
            ks.pvalue,
            KS_ALPHA,
            format!(
                "D {:.5}, p {:.4}, mass to sample max {total:.6}",
                ks.statistic, ks.pvalue
            ),
        ));
    }
    let density = |x: &[f64]| exp_or_zero(logf(x));
    const BINS: usize = 8;
    for a in 0..dim {
        for b in a + 1..dim {
            let edges = |c: usize| -> Vec<f64> {
                let (lo, hi) = region.coordinate_range(c);
                let mut e = vec![lo];
                e.extend((1..BINS).map(|i| quantile(&sorted[c], i as f64 / BINS as f64)));
                e.push(hi);
                e
            };
            let (ea, eb) = (edges(a), edges(b));
            let mut observed = vec![0.0; BINS * BINS];
            for r in 0..n {
                let x = sample.row(r);
                let ia = ea[1..BINS].partition_point(|&e| e < x[a]);
                let ib = eb[1..BINS].partition_point(|&e| e < x[b]);
                observed[ia * BINS + ib] += 1.0;
            }
            let mut order = vec![a, b];
            order.extend((0..dim).filter(|&j| j != a && j != b));
            let cells: Vec<(usize, usize)> = (0..BINS)
                .flat_map(|i| (0..BINS).map(move |j| (i, j)))
                .collect();
            let masses: Vec<Result<f64>> = pool().install(|| {
                cells
                    .par_iter()
                    .map(|&(i, j)| {
                        let limits = [(a, ea[i], ea[i + 1]), (b, eb[j], eb[j + 1])];
                        region
                            .integrate(&density, &order, &limits, gof_quad())
                            .into_result()
                    })
                    .collect()
            });
            let masses = match masses.into_iter().collect::<Result<Vec<f64>>>() {
                Ok(m) => m,
                Err(Error::QuadratureFailure(msg)) => {
                    reports.push(CheckReport::gof(
                        format!("{name}/chi2[{a},{b}]"),
                        0.0,
                        CHI2_ALPHA,
                        format!("cell mass: {msg}"),
                    ));
                    continue;
                }
                Err(e) => return Err(e),
            };
            let mut obs = Vec::new();
            let mut exp = Vec::new();
            let (mut pooled_o, mut pooled_e) = (0.0, 0.0);
            for (o, m) in observed.iter().zip(masses) {
                let e = n as f64 * m;
                if e < 5.0 {
                    pooled_o += o;
                    pooled_e += e;
                } else {
                    obs.push(*o);
                    exp.push(e);
                }
            }
            if pooled_e > 0.0 {
                obs.push(pooled_o);
                exp.push(pooled_e);
            }
            let stat = chi2_statistic(&obs, &exp);
            let dof = (obs.len() - 1) as f64;
            let p = chi2_pvalue(stat, dof);
            reports.push(CheckReport::gof(
                format!("{name}/chi2[{a},{b}]"),
                p,
                CHI2_ALPHA,
                format!("chi2 {stat:.3} on {dof} dof, p {p:.4}"),
            ));
        }
    }
    Ok(reports)
}

/// Draws `n` values from the family's constructive sampler and tests them
/// against its density.
pub fn family_pushforward(
    label: &str,
    family: &Family,
    n: usize,
    seed: u64,
) -> Result<Vec<CheckReport>> {
    let sampler = FamilySampler::new(family.clone())?;
    let sample = sampler.sample(n, seed);
    let logf = family_logf(family);
    pushforward_check(
        &format!("pushforward/{label}/seed={seed}"),
        &sample,
        &logf,
        &family.region(),
    )
}

/// Beta type I density as printed before correction: the exponent of
/// (1 − bᵢ) is Σ_{j≠i, j≥1} αⱼ − 1, leaving out α₀. Near b = (1,…,1) it
/// behaves like a power of the distance with exponent too low to integrate,
/// so it has no finite mass whatever the parameters.
pub fn uncorrected_beta1(p: &BetaParams) -> impl Fn(&[f64]) -> f64 + Sync + '_ {
    move |b: &[f64]| -> f64 {
        if b.len() != p.k() || b.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
            return f64::NEG_INFINITY;
        }
        let a = p.shape.alphas();
        let rest = p.shape.alpha_star() - p.shape.alpha0();
        let l: Vec<f64> = b.iter().map(|&x| (-x).ln_1p()).collect();
        let total_l: f64 = l.iter().sum();
        let mut v = p.log_const();
        let mut terms = vec![total_l];
        for i in 0..b.len() {
            v += (a[i] - 1.0) * b[i].ln() + (rest - a[i] - 1.0) * l[i];
            terms.push(b[i].ln() - p.betas()[i].ln() + total_l - l[i]);
        }
        let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln();
        v - p.shape.alpha_star() * lse
    }
}

/// Beta type I parameters used by the discrimination check.
pub fn discrimination_params() -> BetaParams {
    BetaParams::new(
        ExtendedShape::new(2.0, vec![1.0, 1.5]).unwrap(),
        vec![1.0, 2.0],
    )
    .unwrap()
}

/// Runs the beta type I sampler against the uncorrected density. Passes when
/// the goodness-of-fit battery rejects it: residual is the smallest p/α.
pub fn discrimination_check(n: usize, seed: u64) -> Result<CheckReport> {
    let p = discrimination_params();
    let wrong = uncorrected_beta1(&p);
    let family = Family::MvBetaI(p.clone());
    let sample = FamilySampler::new(family.clone())?.sample(n, seed);
    let reports = pushforward_check("discrimination", &sample, &wrong, &family.region())?;
    let mut ratio = f64::INFINITY;
    let mut details = Vec::new();
    for r in &reports {
        let p = 1.0 - r.residual;
        let alpha = 1.0 - r.tolerance;
        ratio = ratio.min(p / alpha);
        details.push(format!(
            "{} p={p:.3e}",
            r.name.trim_start_matches("discrimination/")
        ));
    }
    Ok(CheckReport::new(
        format!("discrimination/mv_beta1_uncorrected/seed={seed}"),
        ratio,
        1.0,
        details.join(", "),
    ))
}

// ---------------------------------------------------------------------------
// Configurations and suites

fn ell(dims: Vec<usize>, spec: GeneratorSpec) -> EllipticalParams {
    EllipticalParams::new(
        MvEllipticalParams::standard(Partition::new(dims).unwrap()).unwrap(),
        spec,
    )
    .unwrap()
}

fn ell_with(
    dims: Vec<usize>,
    mus: Vec<Vec<f64>>,
    variances: Vec<f64>,
    spec: GeneratorSpec,
) -> EllipticalParams {
    let sigmas = dims
        .iter()
        .zip(&variances)
        .map(|(&d, &v)| DMatrix::identity(d, d) * v)
        .collect();
    EllipticalParams::new(
        MvEllipticalParams::new(Partition::new(dims).unwrap(), mus, sigmas).unwrap(),
        spec,
    )
    .unwrap()
}

fn t(n0: usize, dims: Vec<usize>, betas: Vec<f64>) -> MvTParams {
    MvTParams::new(Partition::with_aux(dims, n0).unwrap(), betas).unwrap()
}

fn ggt(alpha0: f64, dims: Vec<usize>, sigmas: Vec<f64>, spec: GeneratorSpec) -> GenGammaTParams {
    GenGammaTParams::new(alpha0, Partition::new(dims).unwrap(), sigmas, spec).unwrap()
}

fn gg(shapes: Vec<f64>, scales: Vec<f64>, spec: GeneratorSpec) -> GenGammaParams {
    GenGammaParams::new(ScaleShapeParams::new(shapes, scales).unwrap(), spec).unwrap()
}

fn beta(a0: f64, alphas: Vec<f64>, betas: Vec<f64>) -> BetaParams {
    BetaParams::new(ExtendedShape::new(a0, alphas).unwrap(), betas).unwrap()
}

fn ggb(a0: f64, alphas: Vec<f64>, sigmas: Vec<f64>, spec: GeneratorSpec) -> GenGammaBetaParams {
    GenGammaBetaParams::new(ExtendedShape::new(a0, alphas).unwrap(), sigmas, spec).unwrap()
}

const KOTZ: GeneratorSpec = GeneratorSpec::Kotz {
    r: 1.0,
    q: 2.0,
    s: 1.5,
};
const P7: GeneratorSpec = GeneratorSpec::PearsonVII { r: 1.0, q: 3.0 };
const P7_HEAVY_DIM: GeneratorSpec = GeneratorSpec::PearsonVII { r: 1.0, q: 4.0 };

/// Families whose flat vector joins s₀ to the block coordinates.
pub fn is_joint(family: &Family) -> bool {
    matches!(
        family,
        Family::GenGammaPearsonVII(_)
            | Family::GenGammaPearsonII(_)
            | Family::GenGammaBetaI(_)
            | Family::GenGammaBetaII(_)
    )
}

/// Quadrature tolerance: 1e-4 for the joint families, 1e-5 otherwise.
pub fn normalization_tolerance(family: &Family) -> f64 {
    if is_joint(family) {
        1e-4
    } else {
        1e-5
    }
}

/// Every family at total dimension ≤ 3.
pub fn normalization_configs() -> Vec<(String, Family)> {
    let gl =
        GammaLogGammaParams::new((vec![1.5], vec![1.0]), (vec![2.0], vec![0.8]), KOTZ).unwrap();
    vec![
        (
            "mv_elliptical/gaussian".into(),
            Family::MvElliptical(ell(vec![1, 1], GeneratorSpec::GAUSSIAN)),
        ),
        (
            "mv_elliptical/kotz".into(),
            Family::MvElliptical(ell(vec![1, 2], KOTZ)),
        ),
        (
            "mv_elliptical/pearson7".into(),
            Family::MvElliptical(ell(vec![1, 1], P7)),
        ),
        (
            "mv_elliptical/bessel".into(),
            Family::MvElliptical(ell(vec![1, 1], GeneratorSpec::Bessel { r: 1.0, q: 0.5 })),
        ),
        (
            "mv_log_elliptical/kotz".into(),
            Family::MvLogElliptical(ell_with(
                vec![1, 1],
                vec![vec![0.2], vec![-0.3]],
                vec![0.5, 0.8],
                KOTZ,
            )),
        ),
        (
            "mixed_ell_logell/gaussian".into(),
            Family::MixedEllLogEll {
                k1: 1,
                params: ell_with(
                    vec![1, 1],
                    vec![vec![0.5], vec![0.1]],
                    vec![1.0, 0.6],
                    GeneratorSpec::GAUSSIAN,
                ),
            },
        ),
        ("mv_t".into(), Family::MvT(t(3, vec![1, 1], vec![1.0, 2.0]))),
        (
            "mv_pearson2".into(),
            Family::MvPearsonII(t(4, vec![1, 1], vec![1.0, 2.0])),
        ),
        (
            "gengamma_pearson7/kotz".into(),
            Family::GenGammaPearsonVII(ggt(1.5, vec![1, 1], vec![1.0, 0.8, 1.3], KOTZ)),
        ),
        (
            "gengamma_pearson2/pearson7".into(),
            Family::GenGammaPearsonII(ggt(2.0, vec![1, 1], vec![1.0, 0.7, 1.2], P7_HEAVY_DIM)),
        ),
        (
            "mv_gengamma/kotz".into(),
            Family::MvGenGamma(gg(vec![2.0, 1.5], vec![1.0, 0.7], KOTZ)),
        ),
        (
            "mv_beta1".into(),
            Family::MvBetaI(beta(1.5, vec![1.0, 2.0], vec![1.0, 3.0])),
        ),
        (
            "mv_beta2".into(),
            Family::MvBetaII(beta(2.5, vec![1.5, 2.0], vec![1.0, 0.5])),
        ),
        (
            "gengamma_beta1/kotz".into(),
            Family::GenGammaBetaI(ggb(1.5, vec![2.0, 2.5], vec![1.0, 0.8, 1.2], KOTZ)),
        ),
        (
            "gengamma_beta2/kotz".into(),
            Family::GenGammaBetaII(ggb(2.5, vec![1.5, 2.0], vec![1.0, 0.8, 1.2], KOTZ)),
        ),
        ("gamma_loggamma/kotz".into(), Family::GammaLogGamma(gl)),
    ]
}

/// Two-dimensional configurations for the sampler checks.
pub fn pushforward_configs() -> Vec<(String, Family)> {
    let gl =
        GammaLogGammaParams::new((vec![1.5], vec![1.0]), (vec![2.0], vec![0.8]), KOTZ).unwrap();
    vec![
        (
            "mv_elliptical/kotz".into(),
            Family::MvElliptical(ell(vec![1, 1], KOTZ)),
        ),
        (
            "mv_elliptical/pearson7".into(),
            Family::MvElliptical(ell(vec![2], P7)),
        ),
        (
            "mv_elliptical/bessel".into(),
            Family::MvElliptical(ell(vec![1, 1], GeneratorSpec::Bessel { r: 0.8, q: 0.5 })),
        ),
        (
            "mv_log_elliptical/kotz".into(),
            Family::MvLogElliptical(ell_with(
                vec![1, 1],
                vec![vec![0.2], vec![-0.3]],
                vec![0.5, 0.8],
                KOTZ,
            )),
        ),
        (
            "mixed_ell_logell/pearson7".into(),
            Family::MixedEllLogEll {
                k1: 1,
                params: ell_with(vec![1, 1], vec![vec![0.5], vec![0.1]], vec![1.0, 0.6], P7),
            },
        ),
        ("mv_t".into(), Family::MvT(t(3, vec![1, 1], vec![1.0, 2.0]))),
        (
            "mv_pearson2".into(),
            Family::MvPearsonII(t(4, vec![1, 1], vec![1.0, 2.0])),
        ),
        (
            "gengamma_pearson7/kotz".into(),
            Family::GenGammaPearsonVII(ggt(1.5, vec![1], vec![1.0, 0.8], KOTZ)),
        ),
        (
            "gengamma_pearson2/pearson7".into(),
            Family::GenGammaPearsonII(ggt(2.0, vec![1], vec![1.0, 0.7], P7_HEAVY_DIM)),
        ),
        (
            "mv_gengamma/kotz".into(),
            Family::MvGenGamma(gg(vec![2.0, 1.5], vec![1.0, 0.7], KOTZ)),
        ),
        (
            "mv_beta1".into(),
            Family::MvBetaI(beta(1.5, vec![1.0, 2.0], vec![1.0, 3.0])),
        ),
        (
            "mv_beta2".into(),
            Family::MvBetaII(beta(2.5, vec![1.5, 2.0], vec![1.0, 0.5])),
        ),
        (
            "gengamma_beta1/kotz".into(),
            Family::GenGammaBetaI(ggb(1.5, vec![2.0], vec![1.0, 0.8], KOTZ)),
        ),
        (
            "gengamma_beta2/kotz".into(),
            Family::GenGammaBetaII(ggb(2.5, vec![1.5], vec![1.0, 0.8], KOTZ)),
        ),
        ("gamma_loggamma/kotz".into(), Family::GammaLogGamma(gl)),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Normalization,
    Identities,
    Pushforward,
    All,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "normalization" => Ok(Suite::Normalization),
            "identities" => Ok(Suite::Identities),
            "pushforward" => Ok(Suite::Pushforward),
            "all" => Ok(Suite::All),
            other => domain(format!("unknown suite `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Draws per goodness-of-fit check.
    pub draws: usize,
    /// Draws for importance-sampling normalization.
    pub mc_draws: usize,
    /// Doubles the first normalization density so the suite must fail.
    pub inject_fault: bool,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            seed: 1,
            draws: 100_000,
            mc_draws: 1_000_000,
            inject_fault: false,
        }
    }
}

fn normalization_suite(opts: &SuiteOptions) -> Result<Vec<CheckReport>> {
    let configs = normalization_configs();
    let mut reports: Vec<CheckReport> = pool().install(|| {
        configs
            .par_iter()
            .enumerate()
            .map(|(i, (label, family))| {
                let shift = if opts.inject_fault && i == 0 {
                    2f64.ln()
                } else {
                    0.0
                };
                let logf = |x: &[f64]| family.logpdf(x).unwrap_or(f64::NEG_INFINITY) + shift;
                let tol = normalization_tolerance(family);
                let name = format!("normalization/{label}");
                match quad_normalization(&name, &logf, &family.region(), tol) {
                    Err(Error::QuadratureFailure(_)) => mc_normalization(
                        &format!("{name}/mc"),
                        &logf,
                        &default_proposal(family),
                        opts.mc_draws,
                        opts.seed,
                    ),
                    other => other,
                }
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let tf = Family::MvT(t(3, vec![1, 1], vec![1.0, 2.0]));
    let logf = family_logf(&tf);
    reports.push(mc_normalization(
        "normalization/mv_t/mc",
        &logf,
        &default_proposal(&tf),
        opts.mc_draws,
        opts.seed,
    )?);
    let big = Family::MvElliptical(ell(vec![2, 2], KOTZ));
    let logf = family_logf(&big);
    reports.push(mc_normalization(
        "normalization/mv_elliptical/kotz/4d/mc",
        &logf,
        &default_proposal(&big),
        opts.mc_draws,
        opts.seed,
    )?);
    Ok(reports)
}

/// Gaussian proposal centred on the support with twice the family's scales.
pub fn default_proposal(family: &Family) -> Proposal {
    let region = family.region();
    let center = (0..region.dim())
        .map(|c| {
            let (lo, hi) = region.coordinate_range(c);
            if lo.is_finite() && hi.is_finite() {
                0.5 * (lo + hi)
            } else if lo.is_finite() {
                lo + region.scales[c]
            } else {
                0.0
            }
        })
        .collect();
    let scales = region.scales.iter().map(|s| 2.0 * s).collect();
    Proposal::Gaussian { center, scales }
}

fn identities_suite(opts: &SuiteOptions) -> Result<Vec<CheckReport>> {
    let mut reports = identity_grid_checks()?;
    for n in 1..=3 {
        for k in 0..3 {
            reports.push(jacobian_check(n, opts.draws, opts.seed + k)?);
        }
        reports.push(jacobian_determinant_check(n, 100, opts.seed)?);
        reports.push(jacobian_round_trip_check(n, 1000, opts.seed)?);
    }
    Ok(reports)
}

fn pushforward_suite(opts: &SuiteOptions) -> Result<Vec<CheckReport>> {
    let mut reports = Vec::new();
    for (label, family) in pushforward_configs() {
        for k in 0..3 {
            reports.extend(family_pushforward(
                &label,
                &family,
                opts.draws,
                opts.seed + k,
            )?);
        }
    }
    for k in 0..3 {
        reports.push(discrimination_check(opts.draws, opts.seed + k)?);
    }
    Ok(reports)
}

/// Runs a suite; goodness-of-fit checks use seeds S, S+1 and S+2.
pub fn run_suite(suite: Suite, opts: &SuiteOptions) -> Result<Vec<CheckReport>> {
    match suite {
        Suite::Normalization => normalization_suite(opts),
        Suite::Identities => identities_suite(opts),
        Suite::Pushforward => pushforward_suite(opts),
        Suite::All => {
            let mut r = normalization_suite(opts)?;
            r.extend(identities_suite(opts)?);
            r.extend(pushforward_suite(opts)?);
            Ok(r)
        }
    }
}
