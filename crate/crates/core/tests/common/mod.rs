//! Independent numerical oracles shared by the integration tests. Nothing
//! here calls into the library's quadrature.

#![allow(dead_code)]

use nlmp::moduli::ModulusParams;

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        out.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    out
}

/// Gauss–Legendre on `[a, b]` split geometrically toward both ends, which
/// handles integrable endpoint singularities of power type.
pub fn graded<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, levels: usize) -> f64 {
    let rule = gauss_legendre(30);
    let gl = |lo: f64, hi: f64| {
        let (c, h) = (0.5 * (lo + hi), 0.5 * (hi - lo));
        rule.iter().map(|(x, w)| w * f(c + h * x)).sum::<f64>() * h
    };
    let mid = 0.5 * (a + b);
    let mut total = 0.0;
    let mut w = mid - a;
    for _ in 0..levels {
        total += gl(a + 0.5 * w, a + w) + gl(b - w, b - 0.5 * w);
        w *= 0.5;
    }
    total + gl(a, a + w) + gl(b - w, b)
}

/// `D_α(ξ)` for `ω(ξ) = ξ^β` with `c_α = 1`, by brute force:
/// near part `∫_0^{ξ/2} [ω(ξ+2η) + ω(ξ-2η) - 2ω(ξ)] η^{-1-2α} dη`, far part
/// `∫_{ξ/2}^∞ [ω(2η+ξ) - ω(2η-ξ) - 2ω(ξ)] η^{-1-2α} dη`.
pub fn power_law_d_alpha(alpha: f64, beta: f64, xi: f64) -> f64 {
    let w = |x: f64| x.max(0.0).powf(beta);
    let p = 1.0 + 2.0 * alpha;
    // on [0, ε] the second difference is replaced by its Taylor series
    // h²ω'' + h⁴ω''''/12 + h⁶ω⁽⁶⁾/360 (h = 2η), integrated exactly
    let eps = 1e-2 * xi;
    let dk = |k: i32| (0..k).fold(1.0, |acc, j| acc * (beta - j as f64)) * xi.powf(beta - k as f64);
    let q = 2.0 * alpha;
    let near_taylor = 4.0 * dk(2) * eps.powf(2.0 - q) / (2.0 - q)
        + 16.0 / 12.0 * dk(4) * eps.powf(4.0 - q) / (4.0 - q)
        + 64.0 / 360.0 * dk(6) * eps.powf(6.0 - q) / (6.0 - q);
    let near = near_taylor
        + graded(
            |e| (w(xi + 2.0 * e) + w(xi - 2.0 * e) - 2.0 * w(xi)) * e.powf(-p),
            eps,
            0.5 * xi,
            60,
        );
    // far part on [ξ/2, L] by geometric blocks, then the asymptotic tail
    let mut far = 0.0;
    let mut lo = 0.5 * xi;
    let g = |e: f64| (w(2.0 * e + xi) - w(2.0 * e - xi) - 2.0 * w(xi)) * e.powf(-p);
    far += graded(g, lo, xi, 60);
    lo = xi;
    let l = 1e7 * xi;
    while lo < l {
        far += graded(g, lo, 2.0 * lo, 2);
        lo *= 2.0;
    }
    // ω(2η+ξ) - ω(2η-ξ) ≈ 2βξ(2η)^{β-1} beyond L
    let tail = -2.0 * w(xi) * lo.powf(-2.0 * alpha) / (2.0 * alpha)
        + 2.0 * beta * xi * 2f64.powf(beta - 1.0) * lo.powf(beta - 1.0 - 2.0 * alpha) / (2.0 * alpha + 1.0 - beta);
    near + far + tail
}

/// Closed form of `ξ ∫_ξ^∞ ω(r, ξ₀) r^{-2} dr` for the capped power family.
pub fn family_far_field(m: &ModulusParams, xi: f64) -> f64 {
    let (h, d, b, x0) = (m.h, m.delta, m.beta, m.xi0);
    let c = h * d.powf(-b);
    let mut total = 0.0;
    let mut a = xi;
    if x0 > 0.0 && a < x0 {
        let s = b * c * x0.powf(b - 1.0);
        let i = (1.0 - b) * c * x0.powf(b);
        total += s * (x0 / a).ln() + i * (1.0 / a - 1.0 / x0);
        a = x0;
    }
    if a < d {
        total += c * (a.powf(b - 1.0) - d.powf(b - 1.0)) / (1.0 - b);
        a = d;
    }
    total += h / a;
    xi * total
}

/// Classical RK4 with step doubling for `y' = f(t, y)` from `t0` to `t1`.
pub fn rk4_adaptive<F: Fn(f64, f64) -> f64>(f: F, t0: f64, y0: f64, t1: f64, rel_tol: f64) -> f64 {
    let step = |t: f64, y: f64, h: f64| {
        let k1 = f(t, y);
        let k2 = f(t + 0.5 * h, y + 0.5 * h * k1);
        let k3 = f(t + 0.5 * h, y + 0.5 * h * k2);
        let k4 = f(t + h, y + h * k3);
        y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    };
    let (mut t, mut y) = (t0, y0);
    let mut h = (t1 - t0) / 100.0;
    while t < t1 {
        h = h.min(t1 - t);
        let full = step(t, y, h);
        let half = step(t + 0.5 * h, step(t, y, 0.5 * h), 0.5 * h);
        let err = (full - half).abs() / 15.0;
        if err <= rel_tol * half.abs() * 1e-2 || h < 1e-14 {
            t += h;
            y = half + (half - full) / 15.0;
            h *= 1.5;
        } else {
            h *= 0.5;
        }
    }
    y
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
        .collect()
}
