//! Kotz-gamma maximum likelihood for paired positive data, under the
//! dependent model (the whole sample is one draw of a 2m-block law) and the
//! independent model (m iid observations per variable).

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::parallel::pool;
use crate::params::{FitMode, FitResult, SampleMatrix};
use crate::special::ln_gamma;

/// Neumaier-compensated sum in input order.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KotzGammaDepParams {
    pub sigma1: f64,
    pub alpha: f64,
    pub sigma2: f64,
    pub beta: f64,
    pub r: f64,
    pub q: f64,
    pub s: f64,
}

impl KotzGammaDepParams {
    pub const KEYS: [&'static str; 7] = ["sigma1", "alpha", "sigma2", "beta", "r", "q", "s"];

    pub fn to_vec(&self) -> [f64; 7] {
        [
            self.sigma1,
            self.alpha,
            self.sigma2,
            self.beta,
            self.r,
            self.q,
            self.s,
        ]
    }

    pub fn from_slice(x: &[f64]) -> Self {
        Self {
            sigma1: x[0],
            alpha: x[1],
            sigma2: x[2],
            beta: x[3],
            r: x[4],
            q: x[5],
            s: x[6],
        }
    }

    pub fn to_map(&self) -> BTreeMap<String, f64> {
        Self::KEYS
            .iter()
            .zip(self.to_vec())
            .map(|(k, v)| (k.to_string(), v))
            .collect()
    }

    pub fn from_map(map: &BTreeMap<String, f64>) -> Result<Self> {
        let mut v = [0.0; 7];
        for (slot, key) in v.iter_mut().zip(Self::KEYS) {
            *slot = *map
                .get(key)
                .ok_or_else(|| Error::ParameterOutOfDomain(format!("missing parameter `{key}`")))?;
        }
        Ok(Self::from_slice(&v))
    }

    fn validate(&self, m: usize) -> Result<()> {
        for (k, v) in Self::KEYS.iter().zip(self.to_vec()) {
            if !(v > 0.0) || !v.is_finite() {
                return domain(format!("{k} must be positive and finite, got {v}"));
            }
        }
        let n = 2.0 * m as f64 * (self.alpha + self.beta);
        if !(2.0 * self.q + n > 2.0) {
            return domain(format!("Kotz constraint 2q + n > 2 fails at n = {n}"));
        }
        Ok(())
    }
}

/// Per-variable parameters of the independent model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KotzGammaIndepParams {
    pub sigma: f64,
    pub shape: f64,
    pub r: f64,
    pub q: f64,
    pub s: f64,
}

impl KotzGammaIndepParams {
    pub const KEYS: [&'static str; 5] = ["sigma", "shape", "r", "q", "s"];

    pub fn to_vec(&self) -> [f64; 5] {
        [self.sigma, self.shape, self.r, self.q, self.s]
    }

    pub fn from_slice(x: &[f64]) -> Self {
        Self {
            sigma: x[0],
            shape: x[1],
            r: x[2],
            q: x[3],
            s: x[4],
        }
    }
}

/// Sufficient statistics of a paired sample: a = Σ ln u, b = Σ ln v,
/// c = Σ u, d = Σ v.
#[derive(Debug, Clone, PartialEq)]
pub struct SuffStats {
    pub m: usize,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl SuffStats {
    pub fn new(u: &[f64], v: &[f64]) -> Result<Self> {
        if u.len() != v.len() {
            return Err(Error::DimensionMismatch {
                expected: u.len(),
                got: v.len(),
            });
        }
        if u.is_empty() {
            return Err(Error::EmptySample);
        }
        check_positive(u)?;
        check_positive(v)?;
        Ok(Self {
            m: u.len(),
            a: compensated_sum(u.iter().map(|x| x.ln())),
            b: compensated_sum(v.iter().map(|x| x.ln())),
            c: compensated_sum(u.iter().copied()),
            d: compensated_sum(v.iter().copied()),
        })
    }

    pub fn from_sample(data: &SampleMatrix) -> Result<Self> {
        check_paired(data)?;
        Self::new(&data.column(0), &data.column(1))
    }
}

/// Σ uᵢ^s.
pub fn power_sum(u: &[f64], s: f64) -> f64 {
    compensated_sum(u.iter().map(|x| x.powf(s)))
}

fn check_positive(u: &[f64]) -> Result<()> {
    for (index, &value) in u.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFiniteInput(index));
        }
        if !(value > 0.0) {
            return Err(Error::NonPositiveInput { index, value });
        }
    }
    Ok(())
}

fn check_paired(data: &SampleMatrix) -> Result<()> {
    if data.cols() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: data.cols(),
        });
    }
    if let Err((row, _, value)) = data.require_positive() {
        return Err(Error::NonPositiveInput { index: row, value });
    }
    Ok(())
}

/// Dependent Kotz-gamma log-likelihood.
pub fn loglik_dependent(p: &KotzGammaDepParams, st: &SuffStats) -> Result<f64> {
    p.validate(st.m)?;
    let m = st.m as f64;
    let half_n = m * (p.alpha + p.beta);
    let w = st.c / (p.sigma1 * p.sigma1) + st.d / (p.sigma2 * p.sigma2);
    let v = p.s.ln() + (p.q + half_n - 1.0) * p.r.ln() / p.s + ln_gamma(half_n)
        - ln_gamma((p.q + half_n - 1.0) / p.s)
        + (p.alpha - 1.0) * st.a
        + (p.beta - 1.0) * st.b
        - m * (2.0 * p.alpha * p.sigma1.ln()
            + 2.0 * p.beta * p.sigma2.ln()
            + ln_gamma(p.alpha)
            + ln_gamma(p.beta))
        + (p.q - 1.0) * w.ln()
        - (p.r.ln() + p.s * w.ln()).exp();
    if !v.is_finite() {
        return Err(Error::NonFiniteLikelihood);
    }
    Ok(v)
}

/// Independent Kotz-gamma log-likelihood of one variable.
pub fn loglik_independent(p: &KotzGammaIndepParams, u: &[f64]) -> Result<f64> {
    if u.is_empty() {
        return Err(Error::EmptySample);
    }
    check_positive(u)?;
    let a = compensated_sum(u.iter().map(|x| x.ln()));
    loglik_independent_with(p, u.len(), a, power_sum(u, p.s))
}

fn loglik_independent_with(p: &KotzGammaIndepParams, m: usize, a: f64, b: f64) -> Result<f64> {
    for (k, v) in KotzGammaIndepParams::KEYS.iter().zip(p.to_vec()) {
        if !(v > 0.0) || !v.is_finite() {
            return domain(format!("{k} must be positive and finite, got {v}"));
        }
    }
    let e = p.q + p.shape - 1.0;
    if !(e > 0.0) {
        return domain(format!(
            "Kotz constraint q + shape > 1 fails (q={}, shape={})",
            p.q, p.shape
        ));
    }
    let m = m as f64;
    let v =
        m * p.s.ln() + m * e * p.r.ln() / p.s - m * ln_gamma(e / p.s) - 2.0 * m * e * p.sigma.ln()
            + (e - 1.0) * a
            - p.r * p.sigma.powf(-2.0 * p.s) * b;
    if !v.is_finite() {
        return Err(Error::NonFiniteLikelihood);
    }
    Ok(v)
}

/// Choi–Wette closed-form gamma estimates (α̂, σ̂), with the gamma scale
/// written as 2σ².
pub fn gamma_init(u: &[f64]) -> Result<(f64, f64)> {
    if u.len() < 2 {
        return Err(Error::DegenerateSample(format!(
            "need at least 2 observations, got {}",
            u.len()
        )));
    }
    check_positive(u)?;
    let m = u.len() as f64;
    let sum = compensated_sum(u.iter().copied());
    let mean = sum / m;
    // ln x̄ − mean ln x, taken from the deviations so tight samples keep their digits
    let t = -compensated_sum(u.iter().map(|x| ((x - mean) / mean).ln_1p())) / m;
    if !(t > 1e-12) {
        return Err(Error::DegenerateSample(format!(
            "log-mean minus mean-log is {t:e}; sample is constant"
        )));
    }
    let alpha = (3.0 - t + ((t - 3.0).powi(2) + 24.0 * t).sqrt()) / (12.0 * t);
    let sigma = (sum / (2.0 * m * alpha)).sqrt();
    Ok((alpha, sigma))
}

// ---------------------------------------------------------------------------
// Nelder–Mead

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NelderMeadOptions {
    pub max_iters: usize,
    /// Stop when max f − min f over the simplex falls below ftol·(1 + |f_min|).
    pub ftol: f64,
    /// Edge length of the initial simplex.
    pub step: f64,
}

impl Default for NelderMeadOptions {
    fn default() -> Self {
        Self {
            max_iters: 10_000,
            ftol: 1e-10,
            step: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Minimizes `f` from `x0`. Non-finite values count as +∞ after the start.
pub fn nelder_mead(
    f: impl Fn(&[f64]) -> f64,
    x0: &[f64],
    opts: NelderMeadOptions,
) -> Result<NelderMeadResult> {
    let n = x0.len();
    let f0 = f(x0);
    if !f0.is_finite() {
        return Err(Error::NonFiniteStart);
    }
    let eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), f0));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += opts.step;
        let fx = eval(&x);
        simplex.push((x, fx));
    }
    let sort = |s: &mut Vec<(Vec<f64>, f64)>| s.sort_by(|a, b| a.1.total_cmp(&b.1));
    sort(&mut simplex);

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iters {
        let tol = opts.ftol * (1.0 + simplex[0].1.abs());
        if simplex[n].1 - simplex[0].1 < tol {
            // Vertices placed symmetrically about a minimum have equal values;
            // the centroid tells that case apart from a collapsed simplex.
            let mut c = vec![0.0; n];
            for (x, _) in &simplex {
                for (ci, v) in c.iter_mut().zip(x) {
                    *ci += v / (n + 1) as f64;
                }
            }
            let fc = eval(&c);
            if (fc - simplex[0].1).abs() < tol {
                converged = true;
                if fc < simplex[0].1 {
                    simplex[0] = (c, fc);
                }
                break;
            }
            if fc < simplex[n].1 {
                simplex[n] = (c, fc);
                sort(&mut simplex);
            }
        }
        iterations += 1;
        let mut centroid = vec![0.0; n];
        for (x, _) in &simplex[..n] {
            for (c, v) in centroid.iter_mut().zip(x) {
                *c += v / n as f64;
            }
        }
        let along = |t: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&simplex[n].0)
                .map(|(c, w)| c + t * (c - w))
                .collect()
        };
        let xr = along(1.0);
        let fr = eval(&xr);
        if fr < simplex[0].1 {
            let xe = along(2.0);
            let fe = eval(&xe);
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = along(0.5);
                let fc = eval(&xc);
                (xc, fc)
            } else {
                let xc = along(-0.5);
                let fc = eval(&xc);
                (xc, fc)
            };
            if fc < fr.min(simplex[n].1) {
                simplex[n] = (xc, fc);
            } else {
                let best = simplex[0].0.clone();
                for (x, fx) in simplex.iter_mut().skip(1) {
                    for (v, b) in x.iter_mut().zip(&best) {
                        *v = b + 0.5 * (*v - b);
                    }
                    *fx = eval(x);
                }
            }
        }
        sort(&mut simplex);
    }
    let (x, fx) = simplex.swap_remove(0);
    Ok(NelderMeadResult {
        x,
        f: fx,
        iterations,
        converged,
    })
}

// ---------------------------------------------------------------------------
// Fitting

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Number of starting points (1–3: the Gaussian anchor, then q and s
    /// scaled by 1.2 and by 0.8).
    pub restarts: usize,
    pub max_iters: usize,
    /// Relative: a run stops when the simplex spread is below ftol·(1 + |f|).
    pub ftol: f64,
    /// Hold (r, q, s) at the Gaussian (1/2, 1, 1).
    pub freeze_generator: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            restarts: 3,
            max_iters: 10_000,
            ftol: 1e-13,
            freeze_generator: false,
        }
    }
}

const ANCHOR: [f64; 3] = [0.5, 1.0, 1.0];

/// Half-width, in log units, of the box around each start that the
/// optimizer may explore. The dependent likelihood has no finite maximum in
/// (r, q, s), so an unbounded search runs off to overflow.
pub const SEARCH_RADIUS: f64 = 10.0;

fn starts(opts: &FitOptions) -> Vec<(&'static str, [f64; 3])> {
    let all = [
        ("gaussian", ANCHOR),
        ("q,s x1.2", [0.5, 1.2, 1.2]),
        ("q,s x0.8", [0.5, 0.8, 0.8]),
    ];
    if opts.freeze_generator {
        return vec![all[0]];
    }
    all.into_iter().take(opts.restarts.clamp(1, 3)).collect()
}

struct Run {
    label: &'static str,
    x: Vec<f64>,
    x0: Vec<f64>,
    f: f64,
    iterations: usize,
    converged: bool,
}

impl Run {
    /// Indices whose final log-value sits within 1e-3 of the search box edge.
    fn at_bound(&self) -> Vec<usize> {
        self.x
            .iter()
            .zip(&self.x0)
            .enumerate()
            .filter(|(_, (x, x0))| (*x - *x0).abs() > SEARCH_RADIUS - 1e-3)
            .map(|(i, _)| i)
            .collect()
    }
}

/// Minimizes `objective` over log-parameters from `x0`, re-starting the
/// simplex at its own optimum until that stops improving.
fn minimize(
    objective: &(dyn Fn(&[f64]) -> f64 + Sync),
    x0: &[f64],
    opts: &FitOptions,
) -> Result<(Vec<f64>, f64, usize, bool)> {
    let objective = |z: &[f64]| {
        if z.iter().zip(x0).any(|(a, b)| (a - b).abs() > SEARCH_RADIUS) {
            f64::INFINITY
        } else {
            objective(z)
        }
    };
    let nm = NelderMeadOptions {
        max_iters: opts.max_iters,
        ftol: opts.ftol,
        step: 0.1,
    };
    let mut best = nelder_mead(&objective, x0, nm)?;
    let mut iterations = best.iterations;
    let mut converged = best.converged;
    for _ in 0..20 {
        let again = nelder_mead(&objective, &best.x, NelderMeadOptions { step: 0.02, ..nm })?;
        iterations += again.iterations;
        converged = again.converged;
        let gain = best.f - again.f;
        if again.f <= best.f {
            best = again;
        }
        if gain < opts.ftol * (1.0 + best.f.abs()) {
            break;
        }
    }
    Ok((best.x, best.f, iterations, converged))
}

fn best_run(runs: Vec<Result<Run>>) -> Result<(Run, Vec<(String, f64)>)> {
    let mut report = Vec::new();
    let mut best: Option<Run> = None;
    let mut first_err = None;
    for run in runs {
        match run {
            Ok(run) => {
                report.push((run.label.to_string(), -run.f));
                if best.as_ref().map_or(true, |b| run.f < b.f) {
                    best = Some(run);
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    match best {
        Some(b) if b.f.is_finite() => Ok((b, report)),
        _ => Err(first_err.unwrap_or(Error::NonFiniteLikelihood)),
    }
}

fn column_pair(data: &SampleMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
    check_paired(data)?;
    if data.rows() < 3 {
        return Err(Error::DegenerateSample(format!(
            "need at least 3 rows, got {}",
            data.rows()
        )));
    }
    Ok((data.column(0), data.column(1)))
}

fn exp_all(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| v.exp()).collect()
}

fn ln_all(x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| v.ln()).collect()
}

/// Maximizes the dependent log-likelihood over all seven parameters.
pub fn fit_dependent(data: &SampleMatrix, opts: &FitOptions) -> Result<FitResult> {
    let (u, v) = column_pair(data)?;
    let st = SuffStats::new(&u, &v)?;
    let (a1, s1) = gamma_init(&u)?;
    let (a2, s2) = gamma_init(&v)?;
    let frozen = opts.freeze_generator;

    let objective = |z: &[f64]| -> f64 {
        let x = exp_all(z);
        let gen = if frozen { ANCHOR } else { [x[4], x[5], x[6]] };
        let p = KotzGammaDepParams {
            sigma1: x[0],
            alpha: x[1],
            sigma2: x[2],
            beta: x[3],
            r: gen[0],
            q: gen[1],
            s: gen[2],
        };
        loglik_dependent(&p, &st).map_or(f64::INFINITY, |l| -l)
    };

    let runs: Vec<Result<Run>> = pool().install(|| {
        starts(opts)
            .into_par_iter()
            .map(|(label, g)| {
                let mut x0 = vec![s1, a1, s2, a2];
                if !frozen {
                    x0.extend_from_slice(&g);
                }
                let x0 = ln_all(&x0);
                let (x, f, iterations, converged) = minimize(&objective, &x0, opts)?;
                Ok(Run {
                    label,
                    x,
                    x0,
                    f,
                    iterations,
                    converged,
                })
            })
            .collect()
    });
    let (best, restarts) = best_run(runs)?;
    let x = exp_all(&best.x);
    let gen = if frozen { ANCHOR } else { [x[4], x[5], x[6]] };
    let p = KotzGammaDepParams {
        sigma1: x[0],
        alpha: x[1],
        sigma2: x[2],
        beta: x[3],
        r: gen[0],
        q: gen[1],
        s: gen[2],
    };
    let at_bound = best
        .at_bound()
        .into_iter()
        .map(|i| KotzGammaDepParams::KEYS[i].to_string())
        .collect();
    Ok(FitResult {
        params: p.to_map(),
        loglik: -best.f,
        iterations: best.iterations,
        converged: best.converged,
        mode: FitMode::Dependent,
        restarts,
        at_bound,
    })
}

/// Five-parameter (or, frozen, two-parameter) fit of one variable.
/// Result of fitting one column of the independent model.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnFit {
    pub params: KotzGammaIndepParams,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    pub restarts: Vec<(String, f64)>,
    pub at_bound: Vec<&'static str>,
}

pub fn fit_independent_column(u: &[f64], opts: &FitOptions) -> Result<ColumnFit> {
    let (a0, s0) = gamma_init(u)?;
    let m = u.len();
    let a = compensated_sum(u.iter().map(|x| x.ln()));
    let frozen = opts.freeze_generator;
    let unpack = |z: &[f64]| -> KotzGammaIndepParams {
        let x = exp_all(z);
        let gen = if frozen { ANCHOR } else { [x[2], x[3], x[4]] };
        KotzGammaIndepParams {
            sigma: x[0],
            shape: x[1],
            r: gen[0],
            q: gen[1],
            s: gen[2],
        }
    };
    let objective = |z: &[f64]| -> f64 {
        let p = unpack(z);
        let b = power_sum(u, p.s);
        loglik_independent_with(&p, m, a, b).map_or(f64::INFINITY, |l| -l)
    };
    let runs: Vec<Result<Run>> = pool().install(|| {
        starts(opts)
            .into_par_iter()
            .map(|(label, g)| {
                let mut x0 = vec![s0, a0];
                if !frozen {
                    x0.extend_from_slice(&g);
                }
                let x0 = ln_all(&x0);
                let (x, f, iterations, converged) = minimize(&objective, &x0, opts)?;
                Ok(Run {
                    label,
                    x,
                    x0,
                    f,
                    iterations,
                    converged,
                })
            })
            .collect()
    });
    let (best, restarts) = best_run(runs)?;
    Ok(ColumnFit {
        params: unpack(&best.x),
        loglik: -best.f,
        iterations: best.iterations,
        converged: best.converged,
        at_bound: best
            .at_bound()
            .into_iter()
            .map(|i| KotzGammaIndepParams::KEYS[i])
            .collect(),
        restarts,
    })
}

/// Separate fits of the two columns; the log-likelihood is their sum.
pub fn fit_independent(data: &SampleMatrix, opts: &FitOptions) -> Result<FitResult> {
    let (u, v) = column_pair(data)?;
    let fu = fit_independent_column(&u, opts)?;
    let fv = fit_independent_column(&v, opts)?;
    let mut params = BTreeMap::new();
    let mut restarts = Vec::new();
    let mut at_bound = Vec::new();
    for (prefix, f) in [("u", &fu), ("v", &fv)] {
        for (k, val) in KotzGammaIndepParams::KEYS.iter().zip(f.params.to_vec()) {
            params.insert(format!("{prefix}.{k}"), val);
        }
        restarts.extend(
            f.restarts
                .iter()
                .map(|(l, v)| (format!("{prefix}: {l}"), *v)),
        );
        at_bound.extend(f.at_bound.iter().map(|k| format!("{prefix}.{k}")));
    }
    Ok(FitResult {
        params,
        loglik: fu.loglik + fv.loglik,
        iterations: fu.iterations + fv.iterations,
        converged: fu.converged && fv.converged,
        mode: FitMode::Independent,
        restarts,
        at_bound,
    })
}

/// Splits an independent-mode parameter map into its two variables.
pub fn independent_params_from_map(
    map: &BTreeMap<String, f64>,
) -> Result<(KotzGammaIndepParams, KotzGammaIndepParams)> {
    let get = |prefix: &str| -> Result<KotzGammaIndepParams> {
        let mut v = [0.0; 5];
        for (slot, k) in v.iter_mut().zip(KotzGammaIndepParams::KEYS) {
            let key = format!("{prefix}.{k}");
            *slot = *map
                .get(&key)
                .ok_or_else(|| Error::ParameterOutOfDomain(format!("missing parameter `{key}`")))?;
        }
        Ok(KotzGammaIndepParams::from_slice(&v))
    };
    Ok((get("u")?, get("v")?))
}
