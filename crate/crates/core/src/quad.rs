//! Globally adaptive Gauss-Kronrod (10/21) quadrature with user breakpoints,
//! plus power-weighted substitutions for half-infinite and weakly singular ranges.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

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
    0.123_491_976_262_065_851_077_208_932_257_245,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

// Gauss weights for the odd-indexed Kronrod nodes XGK[1], XGK[3], ..., XGK[9].
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

/// Tolerances for adaptive integration. Convergence means
/// `error <= max(abs, rel * |value|)`.
#[derive(Clone, Copy, Debug)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_intervals: usize,
}

impl Tolerance {
    pub fn relative(rel: f64) -> Self {
        Self {
            rel,
            abs: 0.0,
            max_intervals: 2000,
        }
    }

    pub fn with_abs(mut self, abs: f64) -> Self {
        self.abs = abs;
        self
    }

    pub fn with_max_intervals(mut self, n: usize) -> Self {
        self.max_intervals = n;
        self
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

impl std::ops::Add for Estimate {
    type Output = Estimate;

    fn add(self, rhs: Estimate) -> Estimate {
        Estimate {
            value: self.value + rhs.value,
            error: self.error + rhs.error,
            evaluations: self.evaluations + rhs.evaluations,
        }
    }
}

impl Estimate {
    pub fn scaled(self, factor: f64) -> Estimate {
        Estimate {
            value: self.value * factor,
            error: self.error * factor.abs(),
            evaluations: self.evaluations,
        }
    }
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[10];
    let mut gauss = 0.0;
    let mut resabs = kronrod.abs();
    let mut fv = [0.0f64; 20];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv[2 * j] = f1;
        fv[2 * j + 1] = f2;
        kronrod += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut resasc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv[2 * j] - mean).abs() + (fv[2 * j + 1] - mean).abs());
    }
    let value = kronrod * half;
    let resabs = resabs * half.abs();
    let resasc = resasc * half.abs();
    let mut err = ((kronrod - gauss) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    (value, err)
}

/// Integrates `f` over `[points[0], points[last]]`, splitting at every
/// interior point. Points must be nondecreasing; zero-width pieces are skipped.
pub fn integrate<F: Fn(f64) -> f64>(f: F, points: &[f64], tol: Tolerance) -> Result<Estimate> {
    if points.len() < 2 {
        return Ok(Estimate::default());
    }
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        if !(b > a) {
            continue;
        }
        let (value, error) = gk21(&f, a, b);
        evaluations += 21;
        heap.push(Segment { a, b, value, error });
    }
    let mut total: f64 = heap.iter().map(|s| s.value).sum();
    let mut total_err: f64 = heap.iter().map(|s| s.error).sum();
    // Segments too narrow to bisect further; their error is frozen.
    let mut frozen_err = 0.0;
    let mut frozen_val = 0.0;
    loop {
        let target = tol.abs.max(tol.rel * (total + frozen_val).abs());
        if total_err + frozen_err <= target || heap.is_empty() {
            break;
        }
        if heap.len() >= tol.max_intervals {
            if !total.is_finite() || total_err + frozen_err > 100.0 * target {
                return Err(Error::Numeric {
                    message: "adaptive quadrature did not converge".into(),
                    value: total + frozen_val,
                    error: total_err + frozen_err,
                    evaluations,
                });
            }
            break;
        }
        let seg = heap.pop().expect("nonempty heap");
        let mid = 0.5 * (seg.a + seg.b);
        if !(mid > seg.a && mid < seg.b) || (seg.b - seg.a) <= 1e-15 * seg.a.abs().max(seg.b.abs()) {
            total -= seg.value;
            total_err -= seg.error;
            frozen_val += seg.value;
            frozen_err += seg.error;
            continue;
        }
        let (v1, e1) = gk21(&f, seg.a, mid);
        let (v2, e2) = gk21(&f, mid, seg.b);
        evaluations += 42;
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.error;
        heap.push(Segment {
            a: seg.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: seg.b,
            value: v2,
            error: e2,
        });
        if heap.len() % 64 == 0 {
            // Resum to keep the running totals free of drift.
            total = heap.iter().map(|s| s.value).sum();
            total_err = heap.iter().map(|s| s.error).sum();
        }
    }
    let value: f64 = heap.iter().map(|s| s.value).sum::<f64>() + frozen_val;
    let error: f64 = heap.iter().map(|s| s.error).sum::<f64>() + frozen_err;
    if !value.is_finite() {
        return Err(Error::Numeric {
            message: "non-finite integrand".into(),
            value,
            error,
            evaluations,
        });
    }
    Ok(Estimate {
        value,
        error,
        evaluations,
    })
}

/// `∫_start^∞ g(η) η^{-1-p} dη` for `p > 0`, via `η = start·x^{-1/p}`, which
/// turns the weight into a constant: the result is `start^{-p}/p ∫_0^1 g(start·x^{-1/p}) dx`.
/// `breaks` are points in η-space where `g` has kinks.
pub fn tail_power<G: Fn(f64) -> f64>(
    g: G,
    start: f64,
    p: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<Estimate> {
    let inv_p = 1.0 / p;
    let mut pts = vec![0.0, 1.0];
    pts.extend(
        breaks
            .iter()
            .filter(|&&b| b > start && b.is_finite())
            .map(|&b| (start / b).powf(p)),
    );
    sort_dedup(&mut pts);
    let est = integrate(
        |x: f64| {
            if x <= 0.0 {
                0.0
            } else {
                g((start * x.powf(-inv_p)).min(1e300))
            }
        },
        &pts,
        tol,
    )?;
    Ok(est.scaled(start.powf(-p) * inv_p))
}

/// `∫_0^end g(η) η^{q-1} dη` for `q > 0`, via `η = end·x^{1/q}`:
/// the result is `end^q/q ∫_0^1 g(end·x^{1/q}) dx`.
pub fn head_power<G: Fn(f64) -> f64>(
    g: G,
    end: f64,
    q: f64,
    breaks: &[f64],
    tol: Tolerance,
) -> Result<Estimate> {
    let inv_q = 1.0 / q;
    let mut pts = vec![0.0, 1.0];
    pts.extend(
        breaks
            .iter()
            .filter(|&&b| b > 0.0 && b < end)
            .map(|&b| (b / end).powf(q)),
    );
    sort_dedup(&mut pts);
    let est = integrate(|x: f64| g(end * x.powf(inv_q)), &pts, tol)?;
    Ok(est.scaled(end.powf(q) * inv_q))
}

pub(crate) fn sort_dedup(v: &mut Vec<f64>) {
    v.sort_by(|a, b| a.total_cmp(b));
    v.dedup_by(|a, b| (*a - *b).abs() <= 1e-15 * a.abs().max(b.abs()));
}
