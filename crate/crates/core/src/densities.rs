//! Log densities of the multivector families and the scalar families
//! derived from them by taking squared block norms.
//!
//! Every function works in log space and returns `-inf` outside the support.
//! Structural problems (wrong lengths, invalid parameters) are errors.

use crate::error::{domain, Error, Result};
use crate::generators::{typical_w, GeneratorSpec, RadialLaw};
use crate::linalg::block_quadform;
use crate::params::{positive, ExtendedShape, MvEllipticalParams, Partition, ScaleShapeParams};
use crate::quad::{Bound, Region};
use crate::special::ln_gamma;

const LN_PI: f64 = 1.144_729_885_849_400_2;

/// e·ln(y) with 0·ln(0) = 0.
#[inline]
fn xlog(e: f64, ly: f64) -> f64 {
    if e == 0.0 {
        0.0
    } else {
        e * ly
    }
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY || m == f64::INFINITY {
        return m;
    }
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::DimensionMismatch { expected, got });
    }
    Ok(())
}

fn sq_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// tᵢ = rᵢ/√(1-‖rᵢ‖²), mapping the open unit ball onto ℜⁿ.
pub fn t_from_r(r: &[f64]) -> Vec<f64> {
    let c = (1.0 - sq_norm(r)).sqrt();
    r.iter().map(|v| v / c).collect()
}

/// rᵢ = tᵢ/√(1+‖tᵢ‖²), the inverse of [`t_from_r`].
pub fn r_from_t(t: &[f64]) -> Vec<f64> {
    let c = (1.0 + sq_norm(t)).sqrt();
    t.iter().map(|v| v / c).collect()
}

// ---------------------------------------------------------------------------
// Elliptical and log-elliptical

/// Block-diagonal elliptical law with one generator shared by all blocks.
#[derive(Debug, Clone)]
pub struct EllipticalParams {
    pub params: MvEllipticalParams,
    pub spec: GeneratorSpec,
    law: RadialLaw,
}

impl EllipticalParams {
    pub fn new(params: MvEllipticalParams, spec: GeneratorSpec) -> Result<Self> {
        let law = RadialLaw::new(spec, params.partition.total() as f64)?;
        Ok(Self { params, spec, law })
    }

    pub fn law(&self) -> &RadialLaw {
        &self.law
    }

    pub fn dim(&self) -> usize {
        self.params.partition.total()
    }
}

pub fn logpdf_mv_elliptical(p: &EllipticalParams, x: &[f64]) -> Result<f64> {
    let q = block_quadform(&p.params, x)?;
    Ok(-0.5 * p.params.logdet() + p.law.log_h(q))
}

pub fn logpdf_mv_log_elliptical(p: &EllipticalParams, v: &[f64]) -> Result<f64> {
    check_len(p.dim(), v.len())?;
    let mut logs = Vec::with_capacity(v.len());
    for (index, &value) in v.iter().enumerate() {
        if !(value > 0.0) {
            return Err(Error::NonPositiveInput { index, value });
        }
        logs.push(value.ln());
    }
    let jac: f64 = logs.iter().sum();
    Ok(logpdf_mv_elliptical(p, &logs)? - jac)
}

/// The first `k1` blocks are elliptical in `x`, the remaining ones
/// log-elliptical in `v`.
pub fn logpdf_mixed_ell_logell(
    p: &EllipticalParams,
    k1: usize,
    x: &[f64],
    v: &[f64],
) -> Result<f64> {
    let dims = p.params.partition.dims();
    if k1 > dims.len() {
        return domain(format!("k1 = {k1} exceeds the {} blocks", dims.len()));
    }
    let n1: usize = dims[..k1].iter().sum();
    check_len(n1, x.len())?;
    check_len(p.dim() - n1, v.len())?;
    let mut z = x.to_vec();
    let mut jac = 0.0;
    for (i, &value) in v.iter().enumerate() {
        if !(value > 0.0) {
            return Err(Error::NonPositiveInput {
                index: n1 + i,
                value,
            });
        }
        let l = value.ln();
        jac += l;
        z.push(l);
    }
    Ok(logpdf_mv_elliptical(p, &z)? - jac)
}

// ---------------------------------------------------------------------------
// t and Pearson II

/// Parameters of the multivector t and Pearson II laws: auxiliary shape
/// α₀ (n₀/2 for an integer partition), block dimensions nᵢ and ratios βᵢ.
#[derive(Debug, Clone, PartialEq)]
pub struct MvTParams {
    alpha0: f64,
    partition: Partition,
    betas: Vec<f64>,
}

impl MvTParams {
    /// Integer form; `partition` must carry `n0`.
    pub fn new(partition: Partition, betas: Vec<f64>) -> Result<Self> {
        let n0 = partition.n0().ok_or_else(|| {
            Error::ParameterOutOfDomain("t family needs an auxiliary dimension n0".into())
        })?;
        Self::extended(n0 as f64 / 2.0, partition, betas)
    }

    /// Real α₀; block exponents stay at nᵢ/2.
    pub fn extended(alpha0: f64, partition: Partition, betas: Vec<f64>) -> Result<Self> {
        positive("alpha0", &[alpha0])?;
        check_len(partition.k(), betas.len())?;
        positive("beta", &betas)?;
        Ok(Self {
            alpha0,
            partition,
            betas,
        })
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    /// n* = 2α₀ + Σnᵢ.
    pub fn n_star(&self) -> f64 {
        2.0 * self.alpha0 + self.partition.total() as f64
    }

    fn log_const(&self) -> f64 {
        let half_n = 0.5 * self.partition.total() as f64;
        let lb: f64 = self
            .partition
            .dims()
            .iter()
            .zip(&self.betas)
            .map(|(&d, b)| 0.5 * d as f64 * b.ln())
            .sum();
        ln_gamma(0.5 * self.n_star()) - lb - ln_gamma(self.alpha0) - half_n * LN_PI
    }
}

pub fn logpdf_mv_t(p: &MvTParams, t: &[f64]) -> Result<f64> {
    let blocks = p.partition.split(t)?;
    let s: f64 = blocks
        .iter()
        .zip(&p.betas)
        .map(|(b, beta)| sq_norm(b) / beta)
        .sum();
    Ok(p.log_const() - 0.5 * p.n_star() * s.ln_1p())
}

pub fn logpdf_mv_pearson2(p: &MvTParams, r: &[f64]) -> Result<f64> {
    let blocks = p.partition.split(r)?;
    let w: Vec<f64> = blocks.iter().map(|b| sq_norm(b)).collect();
    if w.iter().any(|&w| !(w <= 1.0)) {
        return Ok(f64::NEG_INFINITY);
    }
    let l: Vec<f64> = w.iter().map(|&w| (-w).ln_1p()).collect();
    let total_l: f64 = l.iter().sum();
    let dims = p.partition.dims();
    let half_star = 0.5 * p.n_star();

    let mut terms = Vec::with_capacity(w.len() + 1);
    terms.push(total_l);
    for i in 0..w.len() {
        let rest: f64 = l
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, v)| v)
            .sum();
        terms.push(w[i].ln() - p.betas[i].ln() + rest);
    }
    let mut v = p.log_const() - half_star * log_sum_exp(&terms);
    for i in 0..w.len() {
        let e = half_star - 0.5 * dims[i] as f64 - 1.0;
        v += xlog(e, l[i]);
    }
    Ok(if v.is_nan() { f64::NEG_INFINITY } else { v })
}

// ---------------------------------------------------------------------------
// Generalised gamma joints with t / Pearson II

/// Joint law of s₀ = ‖x₀‖² and the t (or Pearson II) blocks: shape α₀,
/// block dimensions, scales σ₀…σ_k and a generator at dimension n*.
#[derive(Debug, Clone)]
pub struct GenGammaTParams {
    alpha0: f64,
    partition: Partition,
    sigmas: Vec<f64>,
    spec: GeneratorSpec,
    law: RadialLaw,
}

impl GenGammaTParams {
    pub fn new(
        alpha0: f64,
        partition: Partition,
        sigmas: Vec<f64>,
        spec: GeneratorSpec,
    ) -> Result<Self> {
        positive("alpha0", &[alpha0])?;
        check_len(partition.k() + 1, sigmas.len())?;
        positive("sigma", &sigmas)?;
        let n_star = 2.0 * alpha0 + partition.total() as f64;
        let law = RadialLaw::new(spec, n_star)?;
        Ok(Self {
            alpha0,
            partition,
            sigmas,
            spec,
            law,
        })
    }

    pub fn alpha0(&self) -> f64 {
        self.alpha0
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn spec(&self) -> GeneratorSpec {
        self.spec
    }

    pub fn law(&self) -> &RadialLaw {
        &self.law
    }

    pub fn n_star(&self) -> f64 {
        self.law.dim()
    }

    /// The mv_t parameters obtained by integrating out s₀ (βᵢ = σᵢ²/σ₀²).
    pub fn t_marginal(&self) -> Result<MvTParams> {
        let s0 = self.sigmas[0] * self.sigmas[0];
        let betas = self.sigmas[1..].iter().map(|s| s * s / s0).collect();
        MvTParams::extended(self.alpha0, self.partition.clone(), betas)
    }

    fn log_const(&self) -> f64 {
        let mut ls = 2.0 * self.alpha0 * self.sigmas[0].ln();
        for (&d, s) in self.partition.dims().iter().zip(&self.sigmas[1..]) {
            ls += d as f64 * s.ln();
        }
        self.alpha0 * LN_PI - ln_gamma(self.alpha0) - ls
    }

    fn log_joint(&self, s0: f64, weighted: f64) -> f64 {
        let sig0 = self.sigmas[0] * self.sigmas[0];
        let arg = s0 / sig0 + s0 * weighted;
        self.log_const() + (0.5 * self.n_star() - 1.0) * s0.ln() + self.law.log_h(arg)
    }
}

pub fn logpdf_gengamma_pearson7(p: &GenGammaTParams, s0: f64, t: &[f64]) -> Result<f64> {
    let blocks = p.partition.split(t)?;
    if !(s0 > 0.0) {
        return Ok(f64::NEG_INFINITY);
    }
    let weighted: f64 = blocks
        .iter()
        .zip(&p.sigmas[1..])
        .map(|(b, s)| sq_norm(b) / (s * s))
        .sum();
    Ok(p.log_joint(s0, weighted))
}

pub fn logpdf_gengamma_pearson2(p: &GenGammaTParams, s0: f64, r: &[f64]) -> Result<f64> {
    let blocks = p.partition.split(r)?;
    if !(s0 > 0.0) {
        return Ok(f64::NEG_INFINITY);
    }
    let mut weighted = 0.0;
    let mut jac = 0.0;
    for ((b, s), &d) in blocks.iter().zip(&p.sigmas[1..]).zip(p.partition.dims()) {
        let w = sq_norm(b);
        if !(w < 1.0) {
            return Ok(f64::NEG_INFINITY);
        }
        weighted += w / (1.0 - w) / (s * s);
        jac -= (0.5 * d as f64 + 1.0) * (-w).ln_1p();
    }
    Ok(p.log_joint(s0, weighted) + jac)
}

// ---------------------------------------------------------------------------
// Scalar families

/// Multivariate generalised gamma: shapes αᵢ, scales σᵢ, generator at
/// dimension 2Σαᵢ.
#[derive(Debug, Clone)]
pub struct GenGammaParams {
    pub shape_scale: ScaleShapeParams,
    pub spec: GeneratorSpec,
    law: RadialLaw,
}

impl GenGammaParams {
    pub fn new(shape_scale: ScaleShapeParams, spec: GeneratorSpec) -> Result<Self> {
        let n = 2.0 * shape_scale.shapes.iter().sum::<f64>();
        let law = RadialLaw::new(spec, n)?;
        Ok(Self {
            shape_scale,
            spec,
            law,
        })
    }

    pub fn k(&self) -> usize {
        self.shape_scale.k()
    }

    pub fn law(&self) -> &RadialLaw {
        &self.law
    }
}

/// Σ(αᵢ ln π − 2αᵢ ln σᵢ − ln Γ(αᵢ)).
fn gamma_block_const(shapes: &[f64], sigmas: &[f64]) -> f64 {
    shapes
        .iter()
        .zip(sigmas)
        .map(|(a, s)| a * LN_PI - 2.0 * a * s.ln() - ln_gamma(*a))
        .sum()
}

pub fn logpdf_mv_gengamma(p: &GenGammaParams, u: &[f64]) -> Result<f64> {
    let ScaleShapeParams { shapes, scales } = &p.shape_scale;
    check_len(shapes.len(), u.len())?;
    let mut v = gamma_block_const(shapes, scales);
    let mut arg = 0.0;
    for (index, ((&ui, a), s)) in u.iter().zip(shapes).zip(scales).enumerate() {
        if !(ui > 0.0) {
            return Err(Error::NonPositiveInput { index, value: ui });
        }
        v += (a - 1.0) * ui.ln();
        arg += ui / (s * s);
    }
    Ok(v + p.law.log_h(arg))
}

/// Shapes α₀, α₁…α_k and ratios βᵢ of the beta type I / II families.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaParams {
    pub shape: ExtendedShape,
    betas: Vec<f64>,
}

impl BetaParams {
    pub fn new(shape: ExtendedShape, betas: Vec<f64>) -> Result<Self> {
        check_len(shape.k(), betas.len())?;
        positive("beta", &betas)?;
        Ok(Self { shape, betas })
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn k(&self) -> usize {
        self.shape.k()
    }

    /// ln(Πβᵢ^{-αᵢ}/D_k).
    pub(crate) fn log_const(&self) -> f64 {
        let a = self.shape.alphas();
        let mut v = ln_gamma(self.shape.alpha_star()) - ln_gamma(self.shape.alpha0());
        for (ai, b) in a.iter().zip(&self.betas) {
            v -= ln_gamma(*ai) + ai * b.ln();
        }
        v
    }
}

pub fn logpdf_mv_beta1(p: &BetaParams, b: &[f64]) -> Result<f64> {
    check_len(p.k(), b.len())?;
    if b.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
        return Ok(f64::NEG_INFINITY);
    }
    let a = p.shape.alphas();
    let star = p.shape.alpha_star();
    let l: Vec<f64> = b.iter().map(|&x| (-x).ln_1p()).collect();
    let total_l: f64 = l.iter().sum();
    let mut v = p.log_const();
    let mut terms = Vec::with_capacity(b.len() + 1);
    terms.push(total_l);
    for i in 0..b.len() {
        // exponent of (1-bᵢ): α₀ + Σ_{j≠i} αⱼ − 1 = α* − αᵢ − 1
        v += (a[i] - 1.0) * b[i].ln() + (star - a[i] - 1.0) * l[i];
        terms.push(b[i].ln() - p.betas[i].ln() + total_l - l[i]);
    }
    Ok(v - star * log_sum_exp(&terms))
}

pub fn logpdf_mv_beta2(p: &BetaParams, f: &[f64]) -> Result<f64> {
    check_len(p.k(), f.len())?;
    let a = p.shape.alphas();
    let mut v = p.log_const();
    let mut s = 0.0;
    for (index, &fi) in f.iter().enumerate() {
        if !(fi > 0.0) {
            return Err(Error::NonPositiveInput { index, value: fi });
        }
        v += (a[index] - 1.0) * fi.ln();
        s += fi / p.betas[index];
    }
    Ok(v - p.shape.alpha_star() * s.ln_1p())
}

/// Joint law of s₀ with the beta I / II coordinates: shapes α₀…α_k,
/// scales σ₀…σ_k, generator at dimension 2α*.
#[derive(Debug, Clone)]
pub struct GenGammaBetaParams {
    pub shape: ExtendedShape,
    sigmas: Vec<f64>,
    pub spec: GeneratorSpec,
    law: RadialLaw,
}

impl GenGammaBetaParams {
    pub fn new(shape: ExtendedShape, sigmas: Vec<f64>, spec: GeneratorSpec) -> Result<Self> {
        check_len(shape.k() + 1, sigmas.len())?;
        positive("sigma", &sigmas)?;
        let law = RadialLaw::new(spec, 2.0 * shape.alpha_star())?;
        Ok(Self {
            shape,
            sigmas,
            spec,
            law,
        })
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }

    pub fn law(&self) -> &RadialLaw {
        &self.law
    }

    pub fn k(&self) -> usize {
        self.shape.k()
    }

    /// Beta parameters of the s₀-marginal (βᵢ = σᵢ²/σ₀²).
    pub fn beta_marginal(&self) -> Result<BetaParams> {
        let s0 = self.sigmas[0] * self.sigmas[0];
        BetaParams::new(
            self.shape.clone(),
            self.sigmas[1..].iter().map(|s| s * s / s0).collect(),
        )
    }

    fn all_shapes(&self) -> Vec<f64> {
        let mut a = vec![self.shape.alpha0()];
        a.extend_from_slice(self.shape.alphas());
        a
    }

    fn log_joint(&self, s0: f64, weighted: f64) -> f64 {
        let sig0 = self.sigmas[0] * self.sigmas[0];
        gamma_block_const(&self.all_shapes(), &self.sigmas)
            + (self.shape.alpha_star() - 1.0) * s0.ln()
            + self.law.log_h(s0 / sig0 + s0 * weighted)
    }
}

pub fn logpdf_gengamma_beta1(p: &GenGammaBetaParams, s0: f64, b: &[f64]) -> Result<f64> {
    check_len(p.k(), b.len())?;
    if !(s0 > 0.0) || b.iter().any(|&x| !(x > 0.0 && x < 1.0)) {
        return Ok(f64::NEG_INFINITY);
    }
    let mut weighted = 0.0;
    let mut v = 0.0;
    for ((&bi, a), s) in b.iter().zip(p.shape.alphas()).zip(&p.sigmas[1..]) {
        let l = (-bi).ln_1p();
        v += (a - 1.0) * bi.ln() - (a + 1.0) * l;
        weighted += bi / (1.0 - bi) / (s * s);
    }
    Ok(p.log_joint(s0, weighted) + v)
}

pub fn logpdf_gengamma_beta2(p: &GenGammaBetaParams, s0: f64, f: &[f64]) -> Result<f64> {
    check_len(p.k(), f.len())?;
    if !(s0 > 0.0) {
        return Ok(f64::NEG_INFINITY);
    }
    let mut weighted = 0.0;
    let mut v = 0.0;
    for (index, ((&fi, a), s)) in f
        .iter()
        .zip(p.shape.alphas())
        .zip(&p.sigmas[1..])
        .enumerate()
    {
        if !(fi > 0.0) {
            return Err(Error::NonPositiveInput { index, value: fi });
        }
        v += (a - 1.0) * fi.ln();
        weighted += fi / (s * s);
    }
    Ok(p.log_joint(s0, weighted) + v)
}

/// Gamma blocks (αᵢ, σᵢ) for u and log-gamma blocks (ρⱼ, δⱼ) for y = ln w,
/// generator at dimension 2(Σα + Σρ).
#[derive(Debug, Clone)]
pub struct GammaLogGammaParams {
    alphas: Vec<f64>,
    sigmas: Vec<f64>,
    rhos: Vec<f64>,
    deltas: Vec<f64>,
    pub spec: GeneratorSpec,
    law: RadialLaw,
}

impl GammaLogGammaParams {
    pub fn new(
        gamma: (Vec<f64>, Vec<f64>),
        loggamma: (Vec<f64>, Vec<f64>),
        spec: GeneratorSpec,
    ) -> Result<Self> {
        let (alphas, sigmas) = gamma;
        let (rhos, deltas) = loggamma;
        check_len(alphas.len(), sigmas.len())?;
        check_len(rhos.len(), deltas.len())?;
        if alphas.is_empty() && rhos.is_empty() {
            return domain("gamma-log-gamma needs at least one block");
        }
        positive("alpha", &alphas)?;
        positive("sigma", &sigmas)?;
        positive("rho", &rhos)?;
        positive("delta", &deltas)?;
        let n = 2.0 * (alphas.iter().sum::<f64>() + rhos.iter().sum::<f64>());
        let law = RadialLaw::new(spec, n)?;
        Ok(Self {
            alphas,
            sigmas,
            rhos,
            deltas,
            spec,
            law,
        })
    }

    pub fn k1(&self) -> usize {
        self.alphas.len()
    }

    pub fn k2(&self) -> usize {
        self.rhos.len()
    }

    pub fn law(&self) -> &RadialLaw {
        &self.law
    }

    /// All 2α-type shapes and scales in block order (gamma blocks first).
    pub fn combined(&self) -> ScaleShapeParams {
        let mut shapes = self.alphas.clone();
        shapes.extend_from_slice(&self.rhos);
        let mut scales = self.sigmas.clone();
        scales.extend_from_slice(&self.deltas);
        ScaleShapeParams { shapes, scales }
    }
}

pub fn logpdf_gamma_loggamma(p: &GammaLogGammaParams, u: &[f64], y: &[f64]) -> Result<f64> {
    check_len(p.k1(), u.len())?;
    check_len(p.k2(), y.len())?;
    let mut v = gamma_block_const(&p.alphas, &p.sigmas) + gamma_block_const(&p.rhos, &p.deltas);
    let mut arg = 0.0;
    for (index, ((&ui, a), s)) in u.iter().zip(&p.alphas).zip(&p.sigmas).enumerate() {
        if !(ui > 0.0) {
            return Err(Error::NonPositiveInput { index, value: ui });
        }
        v += (a - 1.0) * ui.ln();
        arg += ui / (s * s);
    }
    for ((&yj, rho), d) in y.iter().zip(&p.rhos).zip(&p.deltas) {
        if !yj.is_finite() {
            return Ok(f64::NEG_INFINITY);
        }
        v += rho * yj;
        arg += yj.exp() / (d * d);
    }
    Ok(v + p.law.log_h(arg))
}

// ---------------------------------------------------------------------------
// Unified view

/// Every family, evaluated on a flat coordinate vector.
///
/// Layouts: elliptical families use their partition order (for the mixed
/// family the log-elliptical blocks are given as positive `v`); joint
/// families put s₀ first; gamma-log-gamma puts u before y.
#[derive(Debug, Clone)]
pub enum Family {
    MvElliptical(EllipticalParams),
    MvLogElliptical(EllipticalParams),
    MixedEllLogEll { k1: usize, params: EllipticalParams },
    MvT(MvTParams),
    MvPearsonII(MvTParams),
    GenGammaPearsonVII(GenGammaTParams),
    GenGammaPearsonII(GenGammaTParams),
    MvGenGamma(GenGammaParams),
    MvBetaI(BetaParams),
    MvBetaII(BetaParams),
    GenGammaBetaI(GenGammaBetaParams),
    GenGammaBetaII(GenGammaBetaParams),
    GammaLogGamma(GammaLogGammaParams),
}

impl Family {
    pub fn name(&self) -> &'static str {
        match self {
            Family::MvElliptical(_) => "mv_elliptical",
            Family::MvLogElliptical(_) => "mv_log_elliptical",
            Family::MixedEllLogEll { .. } => "mixed_ell_logell",
            Family::MvT(_) => "mv_t",
            Family::MvPearsonII(_) => "mv_pearson2",
            Family::GenGammaPearsonVII(_) => "gengamma_pearson7",
            Family::GenGammaPearsonII(_) => "gengamma_pearson2",
            Family::MvGenGamma(_) => "mv_gengamma",
            Family::MvBetaI(_) => "mv_beta1",
            Family::MvBetaII(_) => "mv_beta2",
            Family::GenGammaBetaI(_) => "gengamma_beta1",
            Family::GenGammaBetaII(_) => "gengamma_beta2",
            Family::GammaLogGamma(_) => "gamma_loggamma",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Family::MvElliptical(p)
            | Family::MvLogElliptical(p)
            | Family::MixedEllLogEll { params: p, .. } => p.dim(),
            Family::MvT(p) | Family::MvPearsonII(p) => p.partition.total(),
            Family::GenGammaPearsonVII(p) | Family::GenGammaPearsonII(p) => 1 + p.partition.total(),
            Family::MvGenGamma(p) => p.k(),
            Family::MvBetaI(p) | Family::MvBetaII(p) => p.k(),
            Family::GenGammaBetaI(p) | Family::GenGammaBetaII(p) => 1 + p.k(),
            Family::GammaLogGamma(p) => p.k1() + p.k2(),
        }
    }

    pub fn logpdf(&self, z: &[f64]) -> Result<f64> {
        check_len(self.dim(), z.len())?;
        match self {
            Family::MvElliptical(p) => logpdf_mv_elliptical(p, z),
            Family::MvLogElliptical(p) => {
                positive_or_neg_inf(z, |z| logpdf_mv_log_elliptical(p, z))
            }
            Family::MixedEllLogEll { k1, params } => {
                let n1: usize = params.params.partition.dims()[..*k1].iter().sum();
                positive_or_neg_inf(&z[n1..], |v| {
                    logpdf_mixed_ell_logell(params, *k1, &z[..n1], v)
                })
            }
            Family::MvT(p) => logpdf_mv_t(p, z),
            Family::MvPearsonII(p) => logpdf_mv_pearson2(p, z),
            Family::GenGammaPearsonVII(p) => logpdf_gengamma_pearson7(p, z[0], &z[1..]),
            Family::GenGammaPearsonII(p) => logpdf_gengamma_pearson2(p, z[0], &z[1..]),
            Family::MvGenGamma(p) => positive_or_neg_inf(z, |u| logpdf_mv_gengamma(p, u)),
            Family::MvBetaI(p) => logpdf_mv_beta1(p, z),
            Family::MvBetaII(p) => positive_or_neg_inf(z, |f| logpdf_mv_beta2(p, f)),
            Family::GenGammaBetaI(p) => logpdf_gengamma_beta1(p, z[0], &z[1..]),
            Family::GenGammaBetaII(p) => {
                positive_or_neg_inf(&z[1..], |f| logpdf_gengamma_beta2(p, z[0], f))
            }
            Family::GammaLogGamma(p) => {
                let k1 = p.k1();
                positive_or_neg_inf(&z[..k1], |u| logpdf_gamma_loggamma(p, u, &z[k1..]))
            }
        }
    }

    /// Support of the flat coordinates, with rough scales for mapping
    /// infinite ranges during quadrature.
    pub fn region(&self) -> Region {
        let full = Bound::Interval(f64::NEG_INFINITY, f64::INFINITY);
        let half = Bound::Interval(0.0, f64::INFINITY);
        let unit = Bound::Interval(0.0, 1.0);
        match self {
            Family::MvElliptical(p)
            | Family::MvLogElliptical(p)
            | Family::MixedEllLogEll { params: p, .. } => {
                let n = p.dim() as f64;
                let w = (typical_w(&p.spec, n) / n).sqrt();
                let mut bounds = Vec::new();
                let mut scales = Vec::new();
                let k1 = match self {
                    Family::MvElliptical(_) => p.params.partition.k(),
                    Family::MvLogElliptical(_) => 0,
                    Family::MixedEllLogEll { k1, .. } => *k1,
                    _ => unreachable!(),
                };
                for (i, s) in p.params.sigmas.iter().enumerate() {
                    for j in 0..s.nrows() {
                        let sd = s[(j, j)].sqrt() * w;
                        if i < k1 {
                            bounds.push(full);
                            scales.push(sd);
                        } else {
                            bounds.push(half);
                            scales.push(p.params.mus[i][j].exp());
                        }
                    }
                }
                Region::new(bounds).with_scales(scales)
            }
            Family::MvT(p) => {
                let mut scales = Vec::new();
                for (&d, b) in p.partition.dims().iter().zip(&p.betas) {
                    scales.extend(std::iter::repeat(b.sqrt()).take(d));
                }
                Region::new(vec![full; p.partition.total()]).with_scales(scales)
            }
            Family::MvPearsonII(p) => Region::new(ball_bounds(&p.partition)),
            Family::GenGammaPearsonVII(p) | Family::GenGammaPearsonII(p) => {
                let s0 =
                    p.sigmas[0] * p.sigmas[0] * typical_w(&p.spec, p.n_star()) * 2.0 * p.alpha0
                        / p.n_star();
                let mut bounds = vec![half];
                let mut scales = vec![s0];
                if matches!(self, Family::GenGammaPearsonVII(_)) {
                    for (&d, s) in p.partition.dims().iter().zip(&p.sigmas[1..]) {
                        bounds.extend(std::iter::repeat(full).take(d));
                        scales.extend(std::iter::repeat(s / p.sigmas[0]).take(d));
                    }
                } else {
                    bounds.extend(ball_bounds(&p.partition).into_iter().map(|b| match b {
                        Bound::Ball(g) => Bound::Ball(g + 1),
                        other => other,
                    }));
                    scales.extend(std::iter::repeat(1.0).take(p.partition.total()));
                }
                Region::new(bounds).with_scales(scales)
            }
            Family::MvGenGamma(p) => {
                let ScaleShapeParams { shapes, scales } = &p.shape_scale;
                let total: f64 = shapes.iter().sum();
                let w = typical_w(&p.spec, 2.0 * total);
                let sc = shapes
                    .iter()
                    .zip(scales)
                    .map(|(a, s)| s * s * w * a / total)
                    .collect();
                Region::new(vec![half; p.k()]).with_scales(sc)
            }
            Family::MvBetaI(p) => Region::new(vec![unit; p.k()]),
            Family::MvBetaII(p) => {
                let a0 = p.shape.alpha0();
                let sc = p
                    .shape
                    .alphas()
                    .iter()
                    .zip(&p.betas)
                    .map(|(a, b)| b * a / a0)
                    .collect();
                Region::new(vec![half; p.k()]).with_scales(sc)
            }
            Family::GenGammaBetaI(p) | Family::GenGammaBetaII(p) => {
                let star = p.shape.alpha_star();
                let s0 =
                    p.sigmas[0] * p.sigmas[0] * typical_w(&p.spec, 2.0 * star) * p.shape.alpha0()
                        / star;
                let mut bounds = vec![half];
                let mut scales = vec![s0];
                let beta1 = matches!(self, Family::GenGammaBetaI(_));
                for (a, s) in p.shape.alphas().iter().zip(&p.sigmas[1..]) {
                    if beta1 {
                        bounds.push(unit);
                        scales.push(1.0);
                    } else {
                        bounds.push(half);
                        scales.push(s * s / (p.sigmas[0] * p.sigmas[0]) * a / p.shape.alpha0());
                    }
                }
                Region::new(bounds).with_scales(scales)
            }
            Family::GammaLogGamma(p) => {
                let c = p.combined();
                let total: f64 = c.shapes.iter().sum();
                let w = typical_w(&p.spec, 2.0 * total);
                let mut bounds = vec![half; p.k1()];
                bounds.extend(std::iter::repeat(full).take(p.k2()));
                let mut scales: Vec<f64> = p
                    .alphas
                    .iter()
                    .zip(&p.sigmas)
                    .map(|(a, s)| s * s * w * a / total)
                    .collect();
                scales.extend(std::iter::repeat(1.0).take(p.k2()));
                Region::new(bounds).with_scales(scales)
            }
        }
    }
}

fn ball_bounds(p: &Partition) -> Vec<Bound> {
    let mut out = Vec::with_capacity(p.total());
    for (i, &d) in p.dims().iter().enumerate() {
        out.extend(std::iter::repeat(Bound::Ball(i)).take(d));
    }
    out
}

/// Evaluates `f`, mapping non-positive coordinates to −∞ instead of an
/// error (the unified view treats them as outside the support).
fn positive_or_neg_inf(v: &[f64], f: impl FnOnce(&[f64]) -> Result<f64>) -> Result<f64> {
    if v.iter().any(|&x| !(x > 0.0)) {
        return Ok(f64::NEG_INFINITY);
    }
    f(v)
}
