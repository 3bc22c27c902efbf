//! The nonlocal dissipation functional
//!
//! ```text
//! D_α(ξ) = c_α ( ∫_0^{ξ/2} [ω(ξ+2η)+ω(ξ-2η)-2ω(ξ)] η^{-1-2α} dη
//!              + ∫_{ξ/2}^∞ [ω(ξ+2η)-ω(2η-ξ)-2ω(ξ)] η^{-1-2α} dη ),
//! ```
//!
//! its analytic tail bound, the perpendicular dissipation `D⊥` of a planar
//! field at a breakthrough pair, and tables of the fractional heat kernel
//! `𝒫^{α,d}` with checks of its two-sided power-law bounds.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::analysis::BreakthroughPair;
use crate::error::{domain, validation, Error, Result};
use crate::moduli::{Modulus, Side};
use crate::quad::{self, Estimate, Tolerance};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuadratureConfig {
    /// Normalization `c_α` in front of `D_α`.
    pub c_alpha: f64,
    pub rel_tol: f64,
    /// Radius (as a fraction of ξ) of the inner region where the bracket is
    /// replaced by its one-sided second-order Taylor form.
    pub eta_split: f64,
    /// Prefactor `C` of the perpendicular dissipation.
    pub perp_prefactor: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self {
            c_alpha: 1.0,
            rel_tol: 1e-8,
            eta_split: 1e-3,
            perp_prefactor: 1.0,
        }
    }
}

impl QuadratureConfig {
    pub fn check(&self) -> Result<()> {
        if !(self.c_alpha > 0.0) {
            return validation("c_alpha must be positive");
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1e-2) {
            return validation("rel_tol must lie in (0, 1e-2)");
        }
        if !(self.eta_split > 0.0 && self.eta_split < 0.5) {
            return validation("eta_split must lie in (0, 1/2)");
        }
        Ok(())
    }

    /// Uses the normalization of the fractional Laplacian itself, so that
    /// `D_α` bounds the dissipation of the operator the solver integrates.
    pub fn for_fractional_laplacian(alpha: f64) -> Self {
        Self {
            c_alpha: fractional_laplacian_constant(alpha),
            ..Self::default()
        }
    }

    fn tolerance(&self) -> Tolerance {
        Tolerance::relative(self.rel_tol)
    }
}

/// `c_{1,α} = 4^α Γ(1/2+α) / (√π |Γ(-α)|)`: the constant with
/// `(-Δ)^α f(x) = c_{1,α} P.V.∫ (f(x)-f(y)) |x-y|^{-1-2α} dy` in one dimension.
pub fn fractional_laplacian_constant(alpha: f64) -> f64 {
    4f64.powf(alpha) * gamma(0.5 + alpha) / (PI.sqrt() * gamma(-alpha).abs())
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 1.0 {
        Ok(())
    } else {
        domain(format!("alpha must lie in (0,1), got {alpha}"))
    }
}

fn check_concave<M: Modulus + ?Sized>(omega: &M) -> Result<()> {
    // a sampled check is enough for the closed-form pieces: each piece is
    // concave iff its curvature sign is, and kinks must not increase slope
    let mut pts = omega.breakpoints();
    for &b in &pts.clone() {
        let (l, r) = (omega.slope(b, Side::Left), omega.slope(b, Side::Right));
        if r > l + 1e-12 * l.abs().max(1.0) {
            return validation(format!("modulus is not concave at xi = {b}"));
        }
    }
    pts.push(0.0);
    pts.sort_by(|a, b| a.total_cmp(b));
    for w in pts.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        if omega.curvature(mid, Side::Right) > 0.0 || omega.slope(mid, Side::Right) < 0.0 {
            return validation(format!("modulus is not increasing and concave near xi = {mid}"));
        }
    }
    let last = pts.last().copied().unwrap_or(0.0);
    let probe = 2.0 * last + 1.0;
    if omega.curvature(probe, Side::Right) > 0.0 || omega.slope(probe, Side::Right) < 0.0 {
        return validation("modulus is not increasing and concave on its last piece");
    }
    if !(omega.at_zero() >= 0.0) {
        return validation("omega(0+) must be nonnegative");
    }
    Ok(())
}

/// Both integrals of `D_α` (without `c_α`), with error estimates.
#[derive(Clone, Copy, Debug, Default, Serialize)]
pub struct DAlphaParts {
    pub near: f64,
    pub far: f64,
    pub error: f64,
    pub evaluations: usize,
}

/// `D_α(ξ)` for a concave modulus.
pub fn d_alpha<M: Modulus + ?Sized>(
    omega: &M,
    alpha: f64,
    xi: f64,
    cfg: &QuadratureConfig,
) -> Result<f64> {
    let parts = d_alpha_parts(omega, alpha, xi, cfg)?;
    Ok(cfg.c_alpha * (parts.near + parts.far))
}

pub fn d_alpha_parts<M: Modulus + ?Sized>(
    omega: &M,
    alpha: f64,
    xi: f64,
    cfg: &QuadratureConfig,
) -> Result<DAlphaParts> {
    check_alpha(alpha)?;
    if !(xi > 0.0 && xi.is_finite()) {
        return domain(format!("xi must be positive, got {xi}"));
    }
    cfg.check()?;
    check_concave(omega)?;
    let kinks = omega.breakpoints();
    let two_a = 2.0 * alpha;
    let w_xi = omega.value(xi);
    // absolute floor: far below the natural size ω(ξ)ξ^{-2α} of the integrals
    let scale = w_xi.abs().max(omega.slope(xi, Side::Left) * xi) * xi.powf(-two_a);
    let tol = cfg.tolerance().with_abs(1e-3 * cfg.rel_tol * scale);

    // Near field: Taylor core [0, s] then adaptive quadrature on [s, ξ/2].
    let mut s = cfg.eta_split * xi;
    for &b in &kinks {
        if b != xi {
            s = s.min(0.25 * (b - xi).abs());
        }
    }
    let (dp, dm) = (omega.slope(xi, Side::Right), omega.slope(xi, Side::Left));
    let (cp, cm) = (omega.curvature(xi, Side::Right), omega.curvature(xi, Side::Left));
    let core = 2.0 * (dp - dm) * s.powf(1.0 - two_a) / (1.0 - two_a)
        + 2.0 * (cp + cm) * s.powf(2.0 - two_a) / (2.0 - two_a);

    let half = 0.5 * xi;
    let mut near_pts = vec![s, half];
    near_pts.extend(
        kinks
            .iter()
            .map(|&b| 0.5 * (b - xi).abs())
            .filter(|&e| e > s && e < half),
    );
    quad::sort_dedup(&mut near_pts);
    let near = quad::integrate(
        |eta: f64| omega.second_difference(xi, 2.0 * eta) * eta.powf(-1.0 - two_a),
        &near_pts,
        tol,
    )?;

    // Far field: kink-split quadrature up to the saturation radius, then the tail.
    let bracket = |eta: f64| omega.symmetric_increment(2.0 * eta, xi) - 2.0 * w_xi;
    let mut far_pts = vec![half];
    for &b in &kinks {
        for e in [0.5 * (b - xi), 0.5 * (b + xi)] {
            if e > half {
                far_pts.push(e);
            }
        }
    }
    quad::sort_dedup(&mut far_pts);
    let far_end = match omega.saturation() {
        Some((r, _)) => (0.5 * (r + xi)).max(half),
        None => far_pts.last().copied().unwrap_or(half).max(xi),
    };
    far_pts.retain(|&e| e <= far_end);
    if far_pts.last() != Some(&far_end) {
        far_pts.push(far_end);
    }
    let body = quad::integrate(|eta: f64| bracket(eta) * eta.powf(-1.0 - two_a), &far_pts, tol)?;
    let tail = match omega.saturation() {
        // both arguments of the increment lie on the constant piece
        Some(_) => Estimate {
            value: -2.0 * w_xi * far_end.powf(-two_a) / two_a,
            error: 0.0,
            evaluations: 0,
        },
        None => quad::tail_power(bracket, far_end, two_a, &kinks_to_eta(&kinks, xi), tol)?,
    };
    let far = body + tail;
    Ok(DAlphaParts {
        near: core + near.value,
        far: far.value,
        error: near.error + far.error,
        evaluations: near.evaluations + far.evaluations,
    })
}

fn kinks_to_eta(kinks: &[f64], xi: f64) -> Vec<f64> {
    kinks
        .iter()
        .flat_map(|&b| [0.5 * (b - xi), 0.5 * (b + xi)])
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailBound {
    pub value: f64,
    /// Set when `ω(0+) = 0`, in which case the bound degenerates to 0.
    pub vanishing: bool,
}

/// Upper bound `-c_α · 2ω(0+) · (ξ/2)^{-2α} / (2α)` for the far-field part of
/// `D_α`, and hence for `D_α` itself.
pub fn d_alpha_tail_bound<M: Modulus + ?Sized>(
    omega: &M,
    alpha: f64,
    xi: f64,
    c_alpha: f64,
) -> Result<TailBound> {
    check_alpha(alpha)?;
    if !(xi > 0.0) {
        return domain(format!("xi must be positive, got {xi}"));
    }
    let w0 = omega.at_zero();
    if w0 <= 0.0 {
        return Ok(TailBound {
            value: 0.0,
            vanishing: true,
        });
    }
    Ok(TailBound {
        value: -c_alpha * 2.0 * w0 * (0.5 * xi).powf(-2.0 * alpha) / (2.0 * alpha),
        vanishing: false,
    })
}

/// A scalar function on the plane that `d_perp` can sample.
pub trait PlanarField: Sync {
    fn sample(&self, p: [f64; 2]) -> f64;
}

impl<F: Fn([f64; 2]) -> f64 + Sync> PlanarField for F {
    fn sample(&self, p: [f64; 2]) -> f64 {
        self(p)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct DPerp {
    /// `D⊥`; `-∞` when the numerator does not vanish at the pair.
    pub value: f64,
    /// Numerator at the pair, `2(ω(ξ) - (θ(x)-θ(y)))`.
    pub center_numerator: f64,
    pub divergent: bool,
    pub error: f64,
}

/// Perpendicular dissipation bound
///
/// ```text
/// D⊥ = -C ∫_{(1/2-c)ξ}^{(1/2+c)ξ} dη ∫_0^{cξ} dν
///        [2ω(2η) - θ(η,ν) + θ(-η,ν) - θ(η,-ν) + θ(-η,-ν)] / ((ξ/2-η)² + ν²)^{1+α}
/// ```
///
/// in the frame where the pair sits at `(±ξ/2, 0)`. The denominator is not
/// integrable at `(ξ/2, 0)`; the integral converges only when the numerator
/// vanishes there, which is exactly the breakthrough condition
/// `θ(x) - θ(y) = ω(ξ)`. Otherwise the result is `-∞` and flagged divergent.
/// The integral is computed in polar coordinates around the singular point.
pub fn d_perp<F: PlanarField + ?Sized, M: Modulus + ?Sized>(
    theta: &F,
    pair: &BreakthroughPair,
    omega: &M,
    alpha: f64,
    window: f64,
    cfg: &QuadratureConfig,
) -> Result<DPerp> {
    check_alpha(alpha)?;
    if !(alpha < 0.5) {
        return domain("d_perp requires alpha < 1/2");
    }
    if !(window > 0.0 && window < 0.25) {
        return domain(format!("window fraction must lie in (0, 1/4), got {window}"));
    }
    let xi = pair.separation;
    if !(xi > 0.0) {
        return domain("pair separation must be positive");
    }
    let l = pair.direction;
    let lp = [-l[1], l[0]];
    let mid = pair.midpoint;
    let at = |eta: f64, nu: f64| {
        theta.sample([
            mid[0] + eta * l[0] + nu * lp[0],
            mid[1] + eta * l[1] + nu * lp[1],
        ])
    };
    let numerator = |eta: f64, nu: f64| {
        2.0 * omega.value(2.0 * eta) - at(eta, nu) + at(-eta, nu) - at(eta, -nu) + at(-eta, -nu)
    };
    // Near the pair the numerator is a cancellation of O(1) samples; its
    // rounding noise, divided by r^{2+2α}, is not integrable. Values below
    // the noise floor of the five terms are treated as zero.
    let settled = |eta: f64, nu: f64| {
        let t = [2.0 * omega.value(2.0 * eta), at(eta, nu), at(-eta, nu), at(eta, -nu), at(-eta, -nu)];
        let n = t[0] - t[1] + t[2] - t[3] + t[4];
        let floor = 1e-12 * t.iter().map(|v| v.abs()).sum::<f64>();
        if n.abs() <= floor {
            0.0
        } else {
            n
        }
    };
    let w_xi = omega.value(xi);
    let center = numerator(0.5 * xi, 0.0);
    let tol_center = 1e-9 * w_xi.abs().max(f64::MIN_POSITIVE);
    if center < -tol_center {
        return domain(format!(
            "field exceeds the modulus at the pair (numerator {center:e})"
        ));
    }
    if center > tol_center {
        return Ok(DPerp {
            value: f64::NEG_INFINITY,
            center_numerator: center,
            divergent: true,
            error: 0.0,
        });
    }
    let cxi = window * xi;
    let two_a = 2.0 * alpha;
    let kappa = 1.0 / (1.0 - two_a);
    let scale = w_xi * xi.powf(-two_a);
    let tol = cfg.tolerance().with_abs(1e-3 * cfg.rel_tol * scale).with_max_intervals(4000);
    let radial = |phi: f64| -> Result<Estimate> {
        let (s, c) = phi.sin_cos();
        let reach = cxi / s.max(c.abs());
        // ∫_0^R N r^{-1-2α} dr = κ R^{-2α} ∫_0^1 N(R u^κ) u^{-κ} du
        let est = quad::integrate(
            |u: f64| {
                if u <= 0.0 {
                    return 0.0;
                }
                let uk = u.powf(kappa);
                let r = reach * uk;
                settled(0.5 * xi + r * c, r * s) / uk
            },
            &[0.0, 1.0],
            tol,
        )?;
        Ok(est.scaled(kappa * reach.powf(-two_a)))
    };
    // The outer integrand is itself an adaptive integral; errors propagate.
    let failure = std::sync::Mutex::new(None::<Error>);
    let outer = quad::integrate(
        |phi: f64| match radial(phi) {
            Ok(e) => e.value,
            Err(err) => {
                failure.lock().expect("poisoned").get_or_insert(err);
                0.0
            }
        },
        &[0.0, 0.25 * PI, 0.75 * PI, PI],
        tol,
    )?;
    if let Some(err) = failure.into_inner().expect("poisoned") {
        return Err(err);
    }
    Ok(DPerp {
        value: -cfg.perp_prefactor * outer.value,
        center_numerator: center,
        divergent: false,
        error: cfg.perp_prefactor * outer.error,
    })
}

/// Samples of the fractional heat kernel `𝒫^{α,d}` at the given radii.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelTable {
    pub alpha: f64,
    pub dim: usize,
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
}

fn half_line<F: Fn(f64) -> f64>(f: F, scale: f64, tol: Tolerance) -> Result<f64> {
    // s = scale·t/(1-t)
    let est = quad::integrate(
        |t: f64| {
            if t >= 1.0 {
                return 0.0;
            }
            let om = 1.0 - t;
            let s = scale * t / om;
            let v = f(s);
            if v == 0.0 {
                0.0
            } else {
                v * scale / (om * om)
            }
        },
        &[0.0, 0.5, 0.9, 0.99, 1.0],
        tol,
    )?;
    Ok(est.value)
}

/// Contour angle for the rotated Fourier integral; the arc at infinity
/// contributes nothing as long as `cos(2αφ) ≥ 0`.
fn rotation(alpha: f64) -> f64 {
    if alpha <= 0.5 {
        0.5 * PI
    } else {
        PI / (6.0 * alpha)
    }
}

/// `∫_0^∞ s^m exp(i x s e^{iφ} - s^{2α} e^{2iαφ}) ds` along the rotated ray,
/// multiplied by `e^{iφ(1+m)}` (the Jacobian and the `(ik)^m` factor direction).
fn rotated_transform(alpha: f64, x: f64, m: i32, tol: Tolerance) -> Result<Complex64> {
    let phi = rotation(alpha);
    let e1 = Complex64::from_polar(1.0, phi);
    let e2 = Complex64::from_polar(1.0, 2.0 * alpha * phi);
    let i = Complex64::i();
    let f = |s: f64| -> Complex64 {
        let z = i * x * s * e1 - s.powf(2.0 * alpha) * e2;
        z.exp() * s.powi(m)
    };
    let decay = (x * phi.sin()).max(1e-300);
    let scale = (1.0 / decay).min(1.0).max(1e-3);
    let re = half_line(|s| f(s).re, scale, tol)?;
    let im = half_line(|s| f(s).im, scale, tol)?;
    Ok(Complex64::new(re, im) * Complex64::from_polar(1.0, phi * (1 + m) as f64))
}

/// `𝒫^{α,1}(x)`.
pub fn kernel_1d(alpha: f64, x: f64) -> Result<f64> {
    let x = x.abs();
    if x == 0.0 {
        return Ok(gamma(1.0 + 1.0 / (2.0 * alpha)) / PI);
    }
    let tol = Tolerance::relative(1e-12).with_abs(1e-16);
    if alpha <= 0.5 {
        // φ = π/2 gives a real integrand without cancellation
        let (c, s) = ((PI * alpha).cos(), (PI * alpha).sin());
        let v = half_line(
            |t| (-x * t - t.powf(2.0 * alpha) * c).exp() * (t.powf(2.0 * alpha) * s).sin(),
            (1.0 / x).min(1.0),
            tol,
        )?;
        return Ok(v / PI);
    }
    Ok(rotated_transform(alpha, x, 0, tol)?.re / PI)
}

/// `d𝒫^{α,1}/dx` for `x > 0`.
fn kernel_1d_derivative(alpha: f64, x: f64, tol: Tolerance) -> Result<f64> {
    if alpha <= 0.5 {
        let (c, s) = ((PI * alpha).cos(), (PI * alpha).sin());
        let v = half_line(
            |t| -t * (-x * t - t.powf(2.0 * alpha) * c).exp() * (t.powf(2.0 * alpha) * s).sin(),
            (1.0 / x).min(1.0),
            tol,
        )?;
        return Ok(v / PI);
    }
    // d/dx Re ∫ e^{ixk} ... = Re ∫ i k e^{ixk} ...
    Ok((Complex64::i() * rotated_transform(alpha, x, 1, tol)?).re / PI)
}

/// `𝒫^{α,2}(r)` through the inverse Abel transform of the one-dimensional
/// kernel: `𝒫²(r) = -(1/π) ∫_0^∞ 𝒫¹'(r cosh t) dt`.
pub fn kernel_2d(alpha: f64, r: f64) -> Result<f64> {
    let r = r.abs();
    if r == 0.0 {
        return Ok(gamma(1.0 / alpha) / (2.0 * alpha) / (2.0 * PI));
    }
    let inner = Tolerance::relative(1e-12).with_abs(1e-17);
    let failure = std::sync::Mutex::new(None::<Error>);
    let f = |t: f64| match kernel_1d_derivative(alpha, r * t.cosh(), inner) {
        Ok(v) => v,
        Err(e) => {
            failure.lock().expect("poisoned").get_or_insert(e);
            0.0
        }
    };
    // 𝒫¹' decays like x^{-2-2α}, i.e. exponentially in t
    let t_max = (1e16f64.ln() / (2.0 + 2.0 * alpha) + (2.0 / r).max(1.0).ln()).max(4.0);
    let est = quad::integrate(f, &[0.0, 1.0, t_max], Tolerance::relative(1e-11).with_abs(1e-16))?;
    if let Some(e) = failure.into_inner().expect("poisoned") {
        return Err(e);
    }
    Ok(-est.value / PI)
}

pub fn kernel_table(alpha: f64, dim: usize, radii: &[f64]) -> Result<KernelTable> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return domain(format!("alpha must lie in (0,1], got {alpha}"));
    }
    let values = match dim {
        1 => radii.iter().map(|&x| kernel_1d(alpha, x)).collect::<Result<Vec<_>>>()?,
        2 => radii.iter().map(|&x| kernel_2d(alpha, x)).collect::<Result<Vec<_>>>()?,
        _ => return domain(format!("dimension must be 1 or 2, got {dim}")),
    };
    Ok(KernelTable {
        alpha,
        dim,
        radii: radii.to_vec(),
        values,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct KernelBoundsReport {
    pub passed: bool,
    pub positive: bool,
    pub monotone: bool,
    /// Fitted constants `C₁ ≤ C₂` with `C₁ ≤ 𝒫(x)(1+|x|^{d+2α}) ≤ C₂` on the table.
    pub c1: f64,
    pub c2: f64,
    pub failure: Option<String>,
    pub note: Option<String>,
}

/// Largest admissible `C₂/C₁` before the table is declared inconsistent with
/// power-law decay.
pub const MAX_BOUND_SPREAD: f64 = 1e4;

pub fn verify_kernel_bounds(t: &KernelTable) -> KernelBoundsReport {
    let mut idx: Vec<usize> = (0..t.radii.len()).collect();
    idx.sort_by(|&a, &b| t.radii[a].abs().total_cmp(&t.radii[b].abs()));
    let positive = t.values.iter().all(|&v| v > 0.0 && v.is_finite());
    let monotone = idx.windows(2).all(|w| {
        let (a, b) = (t.values[w[0]], t.values[w[1]]);
        b <= a + 1e-12 * a.abs()
    });
    let p = t.dim as f64 + 2.0 * t.alpha;
    let ratios: Vec<f64> = t
        .radii
        .iter()
        .zip(&t.values)
        .map(|(&x, &v)| v * (1.0 + x.abs().powf(p)))
        .collect();
    let c1 = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let c2 = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut failure = None;
    if !positive {
        failure = Some("kernel is not strictly positive on the table".to_string());
    } else if !monotone {
        failure = Some("kernel is not radially nonincreasing".to_string());
    } else if !(c1 > 0.0) || c2 / c1 > MAX_BOUND_SPREAD {
        failure = Some(format!(
            "no power-law lower bound: C2/C1 = {:.3e} exceeds {MAX_BOUND_SPREAD:e}",
            c2 / c1
        ));
    }
    let note = (t.alpha >= 1.0).then(|| {
        "the two-sided power-law bound only holds for alpha < 1; alpha = 1 is Gaussian".to_string()
    });
    KernelBoundsReport {
        passed: failure.is_none(),
        positive,
        monotone,
        c1,
        c2,
        failure,
        note,
    }
}
