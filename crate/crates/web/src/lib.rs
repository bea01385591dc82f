//! Browser bindings for the demo page in `www/`.
//!
//! Every export is a thin wrapper over a plain function so the numerics can
//! be tested natively. Arrays cross the boundary as `Float64Array`.

use multivec::densities::{Family, GenGammaParams, MvTParams};
use multivec::generators::{GeneratorSpec, RadialLaw};
use multivec::params::{Partition, ScaleShapeParams};
use multivec::sampling::{FamilySampler, RngState, CHUNK};
use wasm_bindgen::prelude::*;

pub fn generator(name: &str, a: f64, b: f64, c: f64) -> Result<GeneratorSpec, String> {
    match name {
        "kotz" => Ok(GeneratorSpec::Kotz { r: a, q: b, s: c }),
        "pearson7" => Ok(GeneratorSpec::PearsonVII { r: a, q: b }),
        "pearson2" => Ok(GeneratorSpec::PearsonII { q: b }),
        "bessel" => Ok(GeneratorSpec::Bessel { r: a, q: b }),
        other => Err(format!("unknown generator `{other}`")),
    }
}

/// Kotz-gamma density of one (u, v) pair on a steps×steps grid over
/// (0, umax] × (0, vmax], u varying slowest.
#[allow(clippy::too_many_arguments)]
pub fn surface(
    sigma1: f64,
    alpha: f64,
    sigma2: f64,
    beta: f64,
    r: f64,
    q: f64,
    s: f64,
    umax: f64,
    vmax: f64,
    steps: usize,
) -> Result<Vec<f64>, String> {
    if !(umax > 0.0 && vmax > 0.0) || !(2..=1000).contains(&steps) {
        return Err("need umax, vmax > 0 and 2 ≤ steps ≤ 1000".into());
    }
    let p = GenGammaParams::new(
        ScaleShapeParams::new(vec![alpha, beta], vec![sigma1, sigma2])
            .map_err(|e| e.to_string())?,
        GeneratorSpec::Kotz { r, q, s },
    )
    .map_err(|e| e.to_string())?;
    let family = Family::MvGenGamma(p);
    let mut out = Vec::with_capacity(steps * steps);
    for i in 1..=steps {
        let u = umax * i as f64 / steps as f64;
        for j in 1..=steps {
            let v = vmax * j as f64 / steps as f64;
            out.push(family.logpdf(&[u, v]).map_err(|e| e.to_string())?.exp());
        }
    }
    Ok(out)
}

/// Density of ‖x‖ for a spherical law in `dim` dimensions at `points`
/// radii spread over (0, rmax].
pub fn radial_curve(
    spec: GeneratorSpec,
    dim: f64,
    rmax: f64,
    points: usize,
) -> Result<Vec<f64>, String> {
    if !(rmax > 0.0) || points == 0 || points > 10_000 {
        return Err("need rmax > 0 and 1 ≤ points ≤ 10000".into());
    }
    let law = RadialLaw::new(spec, dim).map_err(|e| e.to_string())?;
    Ok((1..=points)
        .map(|i| law.radial_logpdf(rmax * i as f64 / points as f64).exp())
        .collect())
}

/// Bivariate t (`pearson2 = false`) or its Pearson II image on the unit
/// square, two scalar blocks with auxiliary dimension `n0`. Returns
/// interleaved x, y. Same draws as `multivec sample` with the same seed,
/// computed on one thread.
pub fn scatter(
    n0: usize,
    beta1: f64,
    beta2: f64,
    pearson2: bool,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>, String> {
    if n > 200_000 {
        return Err("at most 200000 points".into());
    }
    let p = MvTParams::new(
        Partition::with_aux(vec![1, 1], n0).map_err(|e| e.to_string())?,
        vec![beta1, beta2],
    )
    .map_err(|e| e.to_string())?;
    let family = if pearson2 {
        Family::MvPearsonII(p)
    } else {
        Family::MvT(p)
    };
    let sampler = FamilySampler::new(family).map_err(|e| e.to_string())?;
    let mut out = Vec::with_capacity(2 * n);
    for c in 0..n.div_ceil(CHUNK) {
        let mut rng = RngState::with_stream(seed, c as u64);
        for _ in 0..CHUNK.min(n - c * CHUNK) {
            out.extend(sampler.draw(&mut rng));
        }
    }
    Ok(out)
}

#[wasm_bindgen(js_name = kotzGammaSurface)]
#[allow(clippy::too_many_arguments)]
pub fn kotz_gamma_surface(
    sigma1: f64,
    alpha: f64,
    sigma2: f64,
    beta: f64,
    r: f64,
    q: f64,
    s: f64,
    umax: f64,
    vmax: f64,
    steps: usize,
) -> Result<Vec<f64>, JsError> {
    surface(sigma1, alpha, sigma2, beta, r, q, s, umax, vmax, steps).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = radialDensity)]
pub fn radial_density(
    name: &str,
    a: f64,
    b: f64,
    c: f64,
    dim: f64,
    rmax: f64,
    points: usize,
) -> Result<Vec<f64>, JsError> {
    generator(name, a, b, c)
        .and_then(|spec| radial_curve(spec, dim, rmax, points))
        .map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = tScatter)]
pub fn t_scatter(
    n0: usize,
    beta1: f64,
    beta2: f64,
    pearson2: bool,
    n: usize,
    seed: u64,
) -> Result<Vec<f64>, JsError> {
    scatter(n0, beta1, beta2, pearson2, n, seed).map_err(|e| JsError::new(&e))
}
