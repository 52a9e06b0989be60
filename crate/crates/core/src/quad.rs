//! Numerical quadrature: globally adaptive 21-point Gauss–Kronrod on finite
//! intervals, a semi-infinite variant through the map `x = a + (1 - t)/t`,
//! and a fixed five-point Gauss–Legendre rule used for cell averages.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
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

#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

#[allow(clippy::excessive_precision)]
const GL5_NODES: [f64; 5] = [
    -0.906_179_845_938_663_992_797_626_878_299,
    -0.538_469_310_105_683_091_036_314_420_700,
    0.0,
    0.538_469_310_105_683_091_036_314_420_700,
    0.906_179_845_938_663_992_797_626_878_299,
];

#[allow(clippy::excessive_precision)]
const GL5_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_087_514_264_040_720,
    0.478_628_670_499_366_468_041_291_514_836,
    0.568_888_888_888_888_888_888_888_888_889,
    0.478_628_670_499_366_468_041_291_514_836,
    0.236_926_885_056_189_087_514_264_040_720,
];

/// Tolerances and limits for the adaptive integrators.
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-12,
            max_intervals: 2000,
        }
    }
}

impl QuadOptions {
    pub fn with_abs_tol(abs_tol: f64) -> Self {
        Self {
            abs_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 { res_asc * scale } else { res_asc };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        let min_err = 50.0 * f64::EPSILON * res_abs;
        if min_err > scaled {
            scaled = min_err;
        }
    }
    scaled
}

/// One 21-point Gauss–Kronrod panel; returns (integral, error estimate).
#[allow(clippy::needless_range_loop)]
pub fn gauss_kronrod_21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);
    let mut res_gauss = 0.0;
    let mut res_kronrod = f_center * WGK[10];
    let mut res_abs = res_kronrod.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];

    for j in 0..5 {
        let jtw = 2 * j + 1;
        let x = half * XGK[jtw];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[jtw] = f1;
        fv2[jtw] = f2;
        res_gauss += WG[j] * (f1 + f2);
        res_kronrod += WGK[jtw] * (f1 + f2);
        res_abs += WGK[jtw] * (f1.abs() + f2.abs());
    }
    for j in 0..5 {
        let jtwm1 = 2 * j;
        let x = half * XGK[jtwm1];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[jtwm1] = f1;
        fv2[jtwm1] = f2;
        res_kronrod += WGK[jtwm1] * (f1 + f2);
        res_abs += WGK[jtwm1] * (f1.abs() + f2.abs());
    }

    let mean = 0.5 * res_kronrod;
    let mut res_asc = WGK[10] * (f_center - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let result = res_kronrod * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let err = rescale_error((res_kronrod - res_gauss) * half, res_abs, res_asc);
    (result, err)
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive integration of `f` over `[a, b]`.
///
/// Bisects the panel with the largest error estimate until the summed
/// estimate drops below `max(abs_tol, rel_tol * |I|)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult> {
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            intervals: 0,
        });
    }
    let (value, error) = gauss_kronrod_21(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Panel { a, b, value, error });
    let mut total = value;
    let mut total_err = error;

    loop {
        let tol = opts.abs_tol.max(opts.rel_tol * total.abs());
        if total_err <= tol {
            break;
        }
        if heap.len() >= opts.max_intervals {
            if !total.is_finite() || total_err > 1e3 * tol {
                return Err(Error::Quadrature {
                    error: total_err,
                    tolerance: tol,
                });
            }
            break;
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel at floating-point resolution; nothing left to bisect.
            heap.push(worst);
            break;
        }
        let (v1, e1) = gauss_kronrod_21(&f, worst.a, mid);
        let (v2, e2) = gauss_kronrod_21(&f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }

    // Re-sum to shed the drift of the running updates.
    let value: f64 = heap.iter().map(|p| p.value).sum();
    let error: f64 = heap.iter().map(|p| p.error).sum();
    if !value.is_finite() {
        return Err(Error::Quadrature {
            error,
            tolerance: opts.abs_tol,
        });
    }
    Ok(QuadResult {
        value,
        error,
        intervals: heap.len(),
    })
}

/// Integrates over the breakpoints in `points` (sorted, endpoints included),
/// summing independent adaptive runs on each piece.
pub fn integrate_pieces<F: Fn(f64) -> f64>(f: F, points: &[f64], opts: QuadOptions) -> Result<QuadResult> {
    let mut out = QuadResult {
        value: 0.0,
        error: 0.0,
        intervals: 0,
    };
    for w in points.windows(2) {
        if w[1] > w[0] {
            let r = integrate(&f, w[0], w[1], opts)?;
            out.value += r.value;
            out.error += r.error;
            out.intervals += r.intervals;
        }
    }
    Ok(out)
}

/// Integrates `f` over `[a, ∞)` through `x = a + (1 - t)/t`, `t ∈ (0, 1]`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, opts: QuadOptions) -> Result<QuadResult> {
    let g = |t: f64| {
        if t <= 0.0 {
            return 0.0;
        }
        let x = a + (1.0 - t) / t;
        let v = f(x) / (t * t);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate(g, 0.0, 1.0, opts)
}

/// Five-point Gauss–Legendre rule on `[a, b]` (exact for degree ≤ 9).
pub fn gauss_legendre_5<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    GL5_NODES
        .iter()
        .zip(GL5_WEIGHTS.iter())
        .map(|(x, w)| w * f(c + h * x))
        .sum::<f64>()
        * h
}

/// Integral of `f` over `[a, b]` with the interval first split at every
/// breakpoint in `kinks` that lies strictly inside, then five-point
/// Gauss–Legendre on each piece.
pub fn gauss_legendre_split<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, kinks: &[f64]) -> f64 {
    let mut pts = Vec::with_capacity(kinks.len() + 2);
    pts.push(a);
    pts.extend(kinks.iter().copied().filter(|&k| k > a && k < b));
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.windows(2).map(|w| gauss_legendre_5(&f, w[0], w[1])).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_exact_for_high_degree_polynomials() {
        // ∫₀¹ x³⁰ dx = 1/31
        let (v, _) = gauss_kronrod_21(&|x: f64| x.powi(30), 0.0, 1.0);
        assert!((v - 1.0 / 31.0).abs() < 1e-15);
    }

    #[test]
    fn gauss_legendre_exact_for_degree_nine() {
        let v = gauss_legendre_5(|x: f64| x.powi(9) + x.powi(4), -1.0, 2.0);
        let exact = (2f64.powi(10) - 1.0) / 10.0 + (2f64.powi(5) + 1.0) / 5.0;
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn adaptive_handles_integrable_endpoint_singularity() {
        // ∫₀¹ x^{-1/2} dx = 2
        let r = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, QuadOptions::default()).unwrap();
        assert!((r.value - 2.0).abs() < 1e-9, "{r:?}");
    }

    #[test]
    fn semi_infinite_exponential() {
        let r = integrate_to_infinity(|x: f64| (-x).exp(), 0.0, QuadOptions::default()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pieces_with_step_discontinuity() {
        let f = |x: f64| if x < 1.0 { 0.0 } else { 3.0 };
        let r = integrate_pieces(f, &[0.0, 1.0, 4.0], QuadOptions::default()).unwrap();
        assert!((r.value - 9.0).abs() < 1e-13);
        let g = gauss_legendre_split(f, 0.0, 4.0, &[1.0]);
        assert!((g - 9.0).abs() < 1e-13);
    }
}
