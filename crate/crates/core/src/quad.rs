//! Adaptive Gauss–Kronrod quadrature and nested integration over product
//! regions (intervals and unit balls).

use std::cell::RefCell;

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_887_919_735,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];
// 10-point Gauss weights for XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
    /// Initial number of equal subintervals (in the mapped variable).
    pub initial: usize,
    /// Length scale of the map used for infinite endpoints.
    pub scale: f64,
    /// Budget of integrand evaluations for nested integration; exceeding it
    /// marks the result as not converged.
    pub max_evals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_intervals: 2000,
            initial: 4,
            scale: 1.0,
            max_evals: usize::MAX,
        }
    }
}

impl QuadOptions {
    pub fn tol(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }

    pub fn with_max_evals(mut self, max_evals: usize) -> Self {
        self.max_evals = max_evals;
        self
    }

    pub fn with_initial(mut self, initial: usize) -> Self {
        self.initial = initial.max(1);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub evals: usize,
    pub converged: bool,
}

impl QuadResult {
    pub fn into_result(self) -> Result<f64> {
        if self.converged {
            Ok(self.value)
        } else {
            Err(Error::QuadratureFailure(format!(
                "no convergence: value {:e}, error estimate {:e} after {} evaluations",
                self.value, self.error, self.evals
            )))
        }
    }
}

fn gk21(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(centre);
    let mut resk = WGK[10] * fc;
    let mut resg = 0.0;
    for j in 0..10 {
        let dx = half * XGK[j];
        let pair = f(centre - dx) + f(centre + dx);
        resk += WGK[j] * pair;
        if j % 2 == 1 {
            resg += WG[j / 2] * pair;
        }
    }
    let value = resk * half;
    let err = ((resk - resg) * half).abs();
    (value, err)
}

/// Integrates `f` over `[a, b]`; either end may be infinite.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, opts: QuadOptions) -> QuadResult {
    if a == b {
        return QuadResult {
            value: 0.0,
            error: 0.0,
            evals: 0,
            converged: true,
        };
    }
    if a > b {
        let r = integrate(f, b, a, opts);
        return QuadResult {
            value: -r.value,
            ..r
        };
    }
    let l = opts.scale;
    match (a.is_finite(), b.is_finite()) {
        (true, true) => adaptive(&f, a, b, opts),
        (true, false) => {
            // x = a + l t / (1 - t)
            let g = |t: f64| {
                let u = 1.0 - t;
                let v = f(a + l * t / u);
                if v == 0.0 {
                    0.0
                } else {
                    v * l / (u * u)
                }
            };
            adaptive(&g, 0.0, 1.0, opts)
        }
        (false, true) => {
            let g = |t: f64| {
                let u = 1.0 - t;
                let v = f(b - l * t / u);
                if v == 0.0 {
                    0.0
                } else {
                    v * l / (u * u)
                }
            };
            adaptive(&g, 0.0, 1.0, opts)
        }
        (false, false) => {
            // x = l t / (1 - t²)
            let g = |t: f64| {
                let u = 1.0 - t * t;
                let v = f(l * t / u);
                if v == 0.0 {
                    0.0
                } else {
                    v * l * (1.0 + t * t) / (u * u)
                }
            };
            adaptive(&g, -1.0, 1.0, opts)
        }
    }
}

fn adaptive(f: &dyn Fn(f64) -> f64, a: f64, b: f64, opts: QuadOptions) -> QuadResult {
    let n0 = opts.initial.max(1);
    let width = (b - a) / n0 as f64;
    let mut intervals: Vec<(f64, f64, f64, f64)> = Vec::with_capacity(64);
    let mut evals = 0;
    for i in 0..n0 {
        let lo = a + width * i as f64;
        let hi = if i + 1 == n0 { b } else { lo + width };
        let (v, e) = gk21(f, lo, hi);
        evals += 21;
        intervals.push((lo, hi, v, e));
    }
    loop {
        let total: f64 = intervals.iter().map(|iv| iv.2).sum();
        let err: f64 = intervals.iter().map(|iv| iv.3).sum();
        if !total.is_finite() || !err.is_finite() {
            return QuadResult {
                value: total,
                error: err,
                evals,
                converged: false,
            };
        }
        if err <= opts.abs_tol.max(opts.rel_tol * total.abs()) {
            return QuadResult {
                value: total,
                error: err,
                evals,
                converged: true,
            };
        }
        if intervals.len() >= opts.max_intervals {
            return QuadResult {
                value: total,
                error: err,
                evals,
                converged: false,
            };
        }
        let (idx, _) =
            intervals
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, iv)| {
                    if iv.3 > best.1 {
                        (i, iv.3)
                    } else {
                        best
                    }
                });
        let (lo, hi, _, _) = intervals.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            // interval can no longer be split in floating point
            return QuadResult {
                value: total,
                error: err,
                evals,
                converged: false,
            };
        }
        let (v1, e1) = gk21(f, lo, mid);
        let (v2, e2) = gk21(f, mid, hi);
        evals += 42;
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
}

/// Bounds of one coordinate of a product region.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Interval(f64, f64),
    /// Member of the open unit ball shared by all coordinates with this group id.
    Ball(usize),
}

/// A product of intervals and unit balls, integrated coordinate by coordinate.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    pub bounds: Vec<Bound>,
    /// Length scales used when mapping infinite intervals.
    pub scales: Vec<f64>,
}

impl Region {
    pub fn new(bounds: Vec<Bound>) -> Self {
        let scales = vec![1.0; bounds.len()];
        Self { bounds, scales }
    }

    pub fn with_scales(mut self, scales: Vec<f64>) -> Self {
        assert_eq!(scales.len(), self.bounds.len());
        self.scales = scales;
        self
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    /// Range of coordinate `c` given the coordinates already fixed.
    fn range(&self, c: usize, point: &[f64], fixed: &[bool]) -> (f64, f64) {
        match self.bounds[c] {
            Bound::Interval(a, b) => (a, b),
            Bound::Ball(g) => {
                let mut used = 0.0;
                for (j, b) in self.bounds.iter().enumerate() {
                    if j != c && fixed[j] && *b == Bound::Ball(g) {
                        used += point[j] * point[j];
                    }
                }
                let r = (1.0 - used).max(0.0).sqrt();
                (-r, r)
            }
        }
    }

    /// ∫ f over the region, integrating coordinates in `order` (outermost
    /// first). `limits` optionally clips coordinates to sub-ranges.
    pub fn integrate(
        &self,
        f: &dyn Fn(&[f64]) -> f64,
        order: &[usize],
        limits: &[(usize, f64, f64)],
        opts: QuadOptions,
    ) -> QuadResult {
        assert_eq!(order.len(), self.dim());
        self.integrate_fixed(f, order, &[], limits, opts)
    }

    /// Like [`Region::integrate`] with the coordinates in `fixed` held at
    /// the given values; `order` lists the remaining coordinates.
    pub fn integrate_fixed(
        &self,
        f: &dyn Fn(&[f64]) -> f64,
        order: &[usize],
        fixed: &[(usize, f64)],
        limits: &[(usize, f64, f64)],
        opts: QuadOptions,
    ) -> QuadResult {
        assert_eq!(order.len() + fixed.len(), self.dim());
        let mut point = vec![0.0; self.dim()];
        let mut flags = vec![false; self.dim()];
        for &(c, x) in fixed {
            point[c] = x;
            flags[c] = true;
        }
        if order.is_empty() {
            return QuadResult {
                value: f(&point),
                error: 0.0,
                evals: 1,
                converged: true,
            };
        }
        let state = RefCell::new((point, flags));
        let evals = RefCell::new(0usize);
        let ok = RefCell::new(true);
        let value = self.level(f, order, limits, opts, 0, &state, &evals, &ok);
        QuadResult {
            value: value.value,
            error: value.error,
            evals: evals.into_inner(),
            converged: value.converged && ok.into_inner(),
        }
    }

    /// Range of coordinate `c` on its own (balls give (-1, 1)).
    pub fn coordinate_range(&self, c: usize) -> (f64, f64) {
        match self.bounds[c] {
            Bound::Interval(a, b) => (a, b),
            Bound::Ball(_) => (-1.0, 1.0),
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn level(
        &self,
        f: &dyn Fn(&[f64]) -> f64,
        order: &[usize],
        limits: &[(usize, f64, f64)],
        opts: QuadOptions,
        depth: usize,
        state: &RefCell<(Vec<f64>, Vec<bool>)>,
        evals: &RefCell<usize>,
        ok: &RefCell<bool>,
    ) -> QuadResult {
        let c = order[depth];
        let (mut lo, mut hi) = {
            let s = state.borrow();
            self.range(c, &s.0, &s.1)
        };
        for &(idx, a, b) in limits {
            if idx == c {
                lo = lo.max(a);
                hi = hi.min(b);
            }
        }
        if !(hi > lo) {
            return QuadResult {
                value: 0.0,
                error: 0.0,
                evals: 0,
                converged: true,
            };
        }
        let last = depth + 1 == order.len();
        let inner_opts = QuadOptions {
            abs_tol: opts.abs_tol * 0.1,
            rel_tol: opts.rel_tol * 0.1,
            ..opts
        };
        let g = |x: f64| {
            if *evals.borrow() >= opts.max_evals {
                *ok.borrow_mut() = false;
                return 0.0;
            }
            {
                let mut s = state.borrow_mut();
                s.0[c] = x;
                s.1[c] = true;
            }
            let v = if last {
                *evals.borrow_mut() += 1;
                let s = state.borrow();
                f(&s.0)
            } else {
                let r = self.level(f, order, limits, inner_opts, depth + 1, state, evals, ok);
                if !r.converged {
                    *ok.borrow_mut() = false;
                }
                r.value
            };
            state.borrow_mut().1[c] = false;
            v
        };
        let o = QuadOptions {
            scale: self.scales[c],
            ..opts
        };
        integrate(g, lo, hi, o)
    }
}

/// ∫ exp(logf) over a region.
pub fn integrate_density(
    logf: &dyn Fn(&[f64]) -> f64,
    region: &Region,
    opts: QuadOptions,
) -> Result<f64> {
    let order: Vec<usize> = (0..region.dim()).collect();
    let f = |x: &[f64]| {
        let v = logf(x);
        if v == f64::NEG_INFINITY {
            0.0
        } else {
            v.exp()
        }
    };
    region.integrate(&f, &order, &[], opts).into_result()
}
