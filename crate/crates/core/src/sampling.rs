//! Seeded samplers for every family, built from the radial/angular
//! decomposition: a squared radius W, a Dirichlet split of W across blocks,
//! and uniform directions within each block.
//!
//! Streams come from ChaCha8 keyed by the seed. Bulk sampling splits the
//! draws into fixed chunks of [`CHUNK`] and gives chunk `c` the ChaCha
//! stream `c`, so output does not depend on the number of threads.

use std::sync::Arc;

use rand_chacha::rand_core::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::densities::{
    r_from_t, BetaParams, EllipticalParams, Family, GammaLogGammaParams, GenGammaBetaParams,
    GenGammaParams, GenGammaTParams, MvTParams,
};
use crate::error::{domain, Result};
use crate::generators::{typical_w, GeneratorSpec, RadialLaw};
use crate::parallel::pool;
use crate::params::SampleMatrix;
use crate::quad::{integrate, QuadOptions};

/// Draws per independent stream in bulk sampling.
pub const CHUNK: usize = 1024;

/// A ChaCha8 stream identified by (seed, stream).
#[derive(Debug, Clone)]
pub struct RngState {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl RngState {
    pub const ALGORITHM: &'static str = "chacha8";

    pub fn new(seed: u64) -> Self {
        Self::with_stream(seed, 0)
    }

    pub fn with_stream(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self {
            seed,
            stream,
            rng,
            spare: None,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Uniform on the open interval (0, 1).
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal by the polar Box–Muller method.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        loop {
            let u = 2.0 * self.uniform() - 1.0;
            let v = 2.0 * self.uniform() - 1.0;
            let s = u * u + v * v;
            if s > 0.0 && s < 1.0 {
                let m = (-2.0 * s.ln() / s).sqrt();
                self.spare = Some(v * m);
                return u * m;
            }
        }
    }

    /// Gamma(shape, 1) by Marsaglia–Tsang, boosted for shape < 1.
    pub fn gamma(&mut self, shape: f64) -> f64 {
        if shape < 1.0 {
            let u = self.uniform();
            return self.gamma(shape + 1.0) * u.powf(1.0 / shape);
        }
        let d = shape - 1.0 / 3.0;
        let c = 1.0 / (9.0 * d).sqrt();
        loop {
            let x = self.normal();
            let v = 1.0 + c * x;
            if v <= 0.0 {
                continue;
            }
            let v = v * v * v;
            let u = self.uniform();
            let x2 = x * x;
            if u < 1.0 - 0.0331 * x2 * x2 || u.ln() < 0.5 * x2 + d * (1.0 - v + v.ln()) {
                return d * v;
            }
        }
    }

    pub fn beta(&mut self, a: f64, b: f64) -> f64 {
        let x = self.gamma(a);
        let y = self.gamma(b);
        x / (x + y)
    }

    pub fn beta_prime(&mut self, a: f64, b: f64) -> f64 {
        let x = self.gamma(a);
        let y = self.gamma(b);
        x / y
    }

    pub fn dirichlet(&mut self, alphas: &[f64]) -> Vec<f64> {
        let mut g: Vec<f64> = alphas.iter().map(|&a| self.gamma(a)).collect();
        let s: f64 = g.iter().sum();
        for v in &mut g {
            *v /= s;
        }
        g
    }
}

/// Uniform point on the unit sphere in ℜⁿ.
pub fn sample_unit_sphere(n: usize, rng: &mut RngState) -> Vec<f64> {
    assert!(n >= 1, "sphere dimension must be positive");
    loop {
        let z: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            return z.into_iter().map(|v| v / norm).collect();
        }
    }
}

// ---------------------------------------------------------------------------
// Radial laws

/// Numeric inverse CDF of a radial law, for generators without a
/// closed-form radius distribution.
#[derive(Debug)]
struct InverseCdf {
    law: RadialLaw,
    knots: Vec<f64>,
    cdf: Vec<f64>,
}

const INVERSE_CELLS: usize = 512;
const INVERSE_TOL: f64 = 1e-12;

impl InverseCdf {
    fn new(law: RadialLaw) -> Result<Self> {
        let scale = typical_w(&law.spec(), law.dim()).sqrt();
        let pdf = move |r: f64| {
            let v = law.radial_logpdf(r);
            if v == f64::NEG_INFINITY {
                0.0
            } else {
                v.exp()
            }
        };
        let opts = QuadOptions::tol(1e-15, 1e-10).with_scale(scale);
        let mut r_max = 4.0 * scale;
        let mut found = false;
        for _ in 0..200 {
            let tail = integrate(pdf, r_max, f64::INFINITY, opts).value;
            if tail < 1e-13 {
                found = true;
                break;
            }
            r_max *= 1.5;
        }
        if !found {
            return domain(format!(
                "radial law {:?} has no usable tail bound",
                law.spec()
            ));
        }
        let h = r_max / INVERSE_CELLS as f64;
        let knots: Vec<f64> = (0..=INVERSE_CELLS).map(|i| i as f64 * h).collect();
        let mut cdf = Vec::with_capacity(knots.len());
        cdf.push(0.0);
        let mut acc = 0.0;
        for w in knots.windows(2) {
            acc += integrate(pdf, w[0], w[1], QuadOptions::tol(1e-16, 1e-12)).into_result()?;
            cdf.push(acc);
        }
        Ok(Self { law, knots, cdf })
    }

    fn pdf(&self, r: f64) -> f64 {
        let v = self.law.radial_logpdf(r);
        if v == f64::NEG_INFINITY {
            0.0
        } else {
            v.exp()
        }
    }

    /// Radius with CDF `u`.
    fn invert(&self, u: f64) -> f64 {
        let last = self.cdf.len() - 1;
        if u >= self.cdf[last] {
            return self.knots[last];
        }
        let j = self
            .cdf
            .partition_point(|&c| c <= u)
            .saturating_sub(1)
            .min(last - 1);
        let (mut a, mut b) = (self.knots[j], self.knots[j + 1]);
        let base = self.knots[j];
        let target = u - self.cdf[j];
        let width = self.cdf[j + 1] - self.cdf[j];
        let mut x = if width > 0.0 {
            a + (b - a) * target / width
        } else {
            0.5 * (a + b)
        };
        let opts = QuadOptions::tol(1e-16, 1e-12);
        for _ in 0..60 {
            let g = integrate(|r| self.pdf(r), base, x, opts).value - target;
            if g.abs() <= INVERSE_TOL {
                break;
            }
            if g < 0.0 {
                a = x;
            } else {
                b = x;
            }
            let d = self.pdf(x);
            let newton = x - g / d;
            x = if d > 0.0 && newton > a && newton < b {
                newton
            } else {
                0.5 * (a + b)
            };
            if b - a <= 1e-15 * b {
                break;
            }
        }
        x
    }
}

/// Sampler for the squared radius W = ‖x‖² of a spherical law. Exact for
/// Kotz, Pearson VII and Pearson II; numeric inverse CDF otherwise.
#[derive(Debug, Clone)]
pub struct RadiusSampler {
    law: RadialLaw,
    table: Option<Arc<InverseCdf>>,
}

impl RadiusSampler {
    pub fn new(law: RadialLaw) -> Result<Self> {
        let table = match law.spec() {
            GeneratorSpec::Bessel { .. } => Some(Arc::new(InverseCdf::new(law)?)),
            _ => None,
        };
        Ok(Self { law, table })
    }

    pub fn law(&self) -> &RadialLaw {
        &self.law
    }

    /// Draw of W = ‖x‖².
    pub fn sample_w(&self, rng: &mut RngState) -> f64 {
        let n = self.law.dim();
        match self.law.spec() {
            GeneratorSpec::Kotz { r, q, s } => {
                let y = rng.gamma((2.0 * q + n - 2.0) / (2.0 * s));
                if s == 1.0 {
                    y / r
                } else {
                    (y / r).powf(1.0 / s)
                }
            }
            GeneratorSpec::PearsonVII { r, q } => r * rng.beta_prime(0.5 * n, q - 0.5 * n),
            GeneratorSpec::PearsonII { q } => rng.beta(0.5 * n, q + 1.0),
            GeneratorSpec::Bessel { .. } => {
                let table = self
                    .table
                    .as_ref()
                    .expect("inverse table is built for numeric laws");
                let r = table.invert(rng.uniform());
                r * r
            }
        }
    }

    /// Draw of the radius ‖x‖.
    pub fn sample_radius(&self, rng: &mut RngState) -> f64 {
        self.sample_w(rng).sqrt()
    }
}

/// One radius draw. Builds the inverse-CDF table on every call for numeric
/// laws; reuse a [`RadiusSampler`] for repeated draws.
pub fn sample_radius(law: &RadialLaw, rng: &mut RngState) -> Result<f64> {
    Ok(RadiusSampler::new(*law)?.sample_radius(rng))
}

// ---------------------------------------------------------------------------
// Family samplers

/// Block squared norms σᵢ²·W·Dᵢ with W at dimension 2Σαᵢ and
/// D ~ Dirichlet(α).
fn block_sq_norms(
    radius: &RadiusSampler,
    shapes: &[f64],
    sigmas: &[f64],
    rng: &mut RngState,
) -> Vec<f64> {
    let w = radius.sample_w(rng);
    let d = rng.dirichlet(shapes);
    d.iter().zip(sigmas).map(|(di, s)| s * s * w * di).collect()
}

/// Spherical vector with squared norm `w`, written into `out`.
fn push_direction(out: &mut Vec<f64>, dim: usize, w: f64, rng: &mut RngState) {
    let r = w.sqrt();
    out.extend(sample_unit_sphere(dim, rng).into_iter().map(|u| r * u));
}

pub fn sample_mv_elliptical(
    p: &EllipticalParams,
    radius: &RadiusSampler,
    rng: &mut RngState,
) -> Vec<f64> {
    let n = p.dim();
    let r = radius.sample_radius(rng);
    let z: Vec<f64> = sample_unit_sphere(n, rng)
        .into_iter()
        .map(|u| r * u)
        .collect();
    let mut out = Vec::with_capacity(n);
    let mut off = 0;
    for ((f, mu), &d) in p
        .params
        .factors()
        .iter()
        .zip(&p.params.mus)
        .zip(p.params.partition.dims())
    {
        let y = f.mul_lower(&z[off..off + d]);
        out.extend(y.iter().zip(mu).map(|(a, m)| a + m));
        off += d;
    }
    out
}

/// (s₀, t) from the generalised gamma–Pearson VII construction.
pub fn sample_gengamma_pearson7(
    p: &GenGammaTParams,
    radius: &RadiusSampler,
    rng: &mut RngState,
) -> Vec<f64> {
    let dims = p.partition().dims();
    let mut shapes = vec![p.alpha0()];
    shapes.extend(dims.iter().map(|&d| 0.5 * d as f64));
    let u = block_sq_norms(radius, &shapes, p.sigmas(), rng);
    let s0 = u[0];
    let inv = 1.0 / s0.sqrt();
    let mut out = Vec::with_capacity(1 + p.partition().total());
    out.push(s0);
    for (i, &d) in dims.iter().enumerate() {
        let start = out.len();
        push_direction(&mut out, d, u[i + 1], rng);
        for v in &mut out[start..] {
            *v *= inv;
        }
    }
    out
}

fn map_blocks_to_ball(dims: &[usize], t: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(t.len());
    let mut off = 0;
    for &d in dims {
        out.extend(r_from_t(&t[off..off + d]));
        off += d;
    }
    out
}

pub fn sample_gengamma_pearson2(
    p: &GenGammaTParams,
    radius: &RadiusSampler,
    rng: &mut RngState,
) -> Vec<f64> {
    let mut z = sample_gengamma_pearson7(p, radius, rng);
    let r = map_blocks_to_ball(p.partition().dims(), &z[1..]);
    z.truncate(1);
    z.extend(r);
    z
}

/// Gaussian-generator construction of the t law: σ₀ = 1, σᵢ = √βᵢ.
fn t_construction(p: &MvTParams) -> Result<GenGammaTParams> {
    let mut sigmas = vec![1.0];
    sigmas.extend(p.betas().iter().map(|b| b.sqrt()));
    GenGammaTParams::new(
        p.alpha0(),
        p.partition().clone(),
        sigmas,
        GeneratorSpec::GAUSSIAN,
    )
}

pub fn sample_mv_t(p: &MvTParams, rng: &mut RngState) -> Result<Vec<f64>> {
    let c = t_construction(p)?;
    let radius = RadiusSampler::new(*c.law())?;
    Ok(sample_gengamma_pearson7(&c, &radius, rng).split_off(1))
}

pub fn sample_mv_pearson2(p: &MvTParams, rng: &mut RngState) -> Result<Vec<f64>> {
    let t = sample_mv_t(p, rng)?;
    Ok(map_blocks_to_ball(p.partition().dims(), &t))
}

pub fn sample_mv_gengamma(
    p: &GenGammaParams,
    radius: &RadiusSampler,
    rng: &mut RngState,
) -> Vec<f64> {
    block_sq_norms(radius, &p.shape_scale.shapes, &p.shape_scale.scales, rng)
}

/// fᵢ = βᵢ·Gᵢ/G₀ with independent Gᵢ ~ Gamma(αᵢ).
pub fn sample_mv_beta2(p: &BetaParams, rng: &mut RngState) -> Vec<f64> {
    let g0 = rng.gamma(p.shape.alpha0());
    p.shape
        .alphas()
        .iter()
        .zip(p.betas())
        .map(|(&a, b)| b * rng.gamma(a) / g0)
        .collect()
}

/// bᵢ = fᵢ/(1+fᵢ) of a beta II draw.
pub fn sample_mv_beta1(p: &BetaParams, rng: &mut RngState) -> Vec<f64> {
    let g0 = rng.gamma(p.shape.alpha0());
    p.shape
        .alphas()
        .iter()
        .zip(p.betas())
        .map(|(&a, b)| {
            let x = b * rng.gamma(a);
            x / (g0 + x)
        })
        .collect()
}

/// (s₀, f) with s₀ = u₀ and fᵢ = uᵢ/u₀ from a (k+1)-block generalised gamma
/// draw.
pub fn sample_gengamma_beta2(
    p: &GenGammaBetaParams,
    radius: &RadiusSampler,
    rng: &mut RngState,
) -> Vec<f64> {
    let mut shapes = vec![p.shape.alpha0()];
    shapes.extend_from_slice(p.shape.alphas());
    let mut u = block_sq_norms(radius, &shapes, p.sigmas(), rng);
    let s0 = u[0];
    for v in &mut u[1..] {
        *v /= s0;
    }
    u
}

pub fn sample_gengamma_beta1(
    p: &GenGammaBetaParams,
    radius: &RadiusSampler,
    rng: &mut RngState,
) -> Vec<f64> {
    let mut shapes = vec![p.shape.alpha0()];
    shapes.extend_from_slice(p.shape.alphas());
    let mut u = block_sq_norms(radius, &shapes, p.sigmas(), rng);
    let s0 = u[0];
    for v in &mut u[1..] {
        *v /= s0 + *v;
    }
    u
}

/// (u, y): a generalised gamma draw over all blocks with yⱼ = ln uⱼ for the
/// log-gamma blocks.
pub fn sample_gamma_loggamma(
    p: &GammaLogGammaParams,
    radius: &RadiusSampler,
    rng: &mut RngState,
) -> Vec<f64> {
    let c = p.combined();
    let mut u = block_sq_norms(radius, &c.shapes, &c.scales, rng);
    for v in &mut u[p.k1()..] {
        *v = v.ln();
    }
    u
}

/// A family together with any precomputed radial machinery.
#[derive(Debug, Clone)]
pub struct FamilySampler {
    family: Family,
    radius: Option<RadiusSampler>,
    t_joint: Option<GenGammaTParams>,
}

impl FamilySampler {
    pub fn new(family: Family) -> Result<Self> {
        let mut t_joint = None;
        let law = match &family {
            Family::MvElliptical(p)
            | Family::MvLogElliptical(p)
            | Family::MixedEllLogEll { params: p, .. } => Some(*p.law()),
            Family::MvT(p) | Family::MvPearsonII(p) => {
                let c = t_construction(p)?;
                let law = *c.law();
                t_joint = Some(c);
                Some(law)
            }
            Family::GenGammaPearsonVII(p) | Family::GenGammaPearsonII(p) => Some(*p.law()),
            Family::MvGenGamma(p) => Some(*p.law()),
            Family::MvBetaI(_) | Family::MvBetaII(_) => None,
            Family::GenGammaBetaI(p) | Family::GenGammaBetaII(p) => Some(*p.law()),
            Family::GammaLogGamma(p) => Some(*p.law()),
        };
        let radius = law.map(RadiusSampler::new).transpose()?;
        Ok(Self {
            family,
            radius,
            t_joint,
        })
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    /// One draw in the flat layout of [`Family::logpdf`].
    pub fn draw(&self, rng: &mut RngState) -> Vec<f64> {
        let radius = self.radius.as_ref();
        match &self.family {
            Family::MvElliptical(p) => sample_mv_elliptical(p, radius.unwrap(), rng),
            Family::MvLogElliptical(p) => {
                let x = sample_mv_elliptical(p, radius.unwrap(), rng);
                x.into_iter().map(f64::exp).collect()
            }
            Family::MixedEllLogEll { k1, params } => {
                let mut x = sample_mv_elliptical(params, radius.unwrap(), rng);
                let n1: usize = params.params.partition.dims()[..*k1].iter().sum();
                for v in &mut x[n1..] {
                    *v = v.exp();
                }
                x
            }
            Family::MvT(_) => {
                sample_gengamma_pearson7(self.t_joint.as_ref().unwrap(), radius.unwrap(), rng)
                    .split_off(1)
            }
            Family::MvPearsonII(p) => {
                let t =
                    sample_gengamma_pearson7(self.t_joint.as_ref().unwrap(), radius.unwrap(), rng)
                        .split_off(1);
                map_blocks_to_ball(p.partition().dims(), &t)
            }
            Family::GenGammaPearsonVII(p) => sample_gengamma_pearson7(p, radius.unwrap(), rng),
            Family::GenGammaPearsonII(p) => sample_gengamma_pearson2(p, radius.unwrap(), rng),
            Family::MvGenGamma(p) => sample_mv_gengamma(p, radius.unwrap(), rng),
            Family::MvBetaI(p) => sample_mv_beta1(p, rng),
            Family::MvBetaII(p) => sample_mv_beta2(p, rng),
            Family::GenGammaBetaI(p) => sample_gengamma_beta1(p, radius.unwrap(), rng),
            Family::GenGammaBetaII(p) => sample_gengamma_beta2(p, radius.unwrap(), rng),
            Family::GammaLogGamma(p) => sample_gamma_loggamma(p, radius.unwrap(), rng),
        }
    }

    /// `n` draws as rows; chunk `c` of [`CHUNK`] rows uses stream `c`.
    pub fn sample(&self, n: usize, seed: u64) -> SampleMatrix {
        let dim = self.family.dim();
        let chunks = n.div_ceil(CHUNK);
        let parts: Vec<Vec<f64>> = pool().install(|| {
            (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let mut rng = RngState::with_stream(seed, c as u64);
                    let rows = CHUNK.min(n - c * CHUNK);
                    let mut out = Vec::with_capacity(rows * dim);
                    for _ in 0..rows {
                        out.extend(self.draw(&mut rng));
                    }
                    out
                })
                .collect()
        });
        SampleMatrix::new(n, dim, parts.concat()).expect("sampler output is finite and rectangular")
    }
}
