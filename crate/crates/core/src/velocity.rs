//! Velocity moduli `Ω(ξ)`: bounds on `|(u(x)-u(y))·l|` at a breakthrough
//! pair in terms of the modulus of `θ`.

use serde::{Deserialize, Serialize};

use crate::analysis::BreakthroughPair;
use crate::dissipation::{d_perp, DPerp, PlanarField, QuadratureConfig};
use crate::error::{domain, validation, Error, Result};
use crate::moduli::{Modulus, ModulusParams};
use crate::quad::{self, Tolerance};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquationKind {
    Burgers,
    Sqg,
    ModifiedSqg,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquationParams {
    pub kind: EquationKind,
    pub alpha: f64,
    #[serde(default = "half")]
    pub gamma: f64,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(rename = "A", default = "one")]
    pub a: f64,
    #[serde(default = "eighth")]
    pub c_window: f64,
}

fn half() -> f64 {
    0.5
}
fn one() -> f64 {
    1.0
}
fn eighth() -> f64 {
    0.125
}

impl EquationParams {
    pub fn burgers(alpha: f64, epsilon: f64) -> Self {
        Self {
            kind: EquationKind::Burgers,
            alpha,
            gamma: 0.5,
            epsilon,
            a: 1.0,
            c_window: 0.125,
        }
    }

    pub fn sqg(alpha: f64, epsilon: f64) -> Self {
        Self {
            kind: EquationKind::Sqg,
            ..Self::burgers(alpha, epsilon)
        }
    }

    pub fn modified_sqg(alpha: f64, gamma: f64, epsilon: f64) -> Self {
        Self {
            kind: EquationKind::ModifiedSqg,
            gamma,
            ..Self::burgers(alpha, epsilon)
        }
    }

    pub fn dimension(&self) -> usize {
        match self.kind {
            EquationKind::Burgers => 1,
            _ => 2,
        }
    }

    pub fn check(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return validation(format!("alpha must lie in (0,1), got {}", self.alpha));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return validation("epsilon must be nonnegative");
        }
        if !(self.a > 0.0) {
            return validation("A must be positive");
        }
        if !(self.c_window > 0.0 && self.c_window < 0.25) {
            return validation("c_window must lie in (0, 1/4)");
        }
        match self.kind {
            EquationKind::Sqg if self.gamma != 0.5 => validation("SQG requires gamma = 1/2"),
            EquationKind::ModifiedSqg if !(self.gamma > 0.5 && self.gamma < 1.0) => {
                validation("modified SQG requires 1/2 < gamma < 1")
            }
            _ => Ok(()),
        }
    }

    /// Whether the dissipation is too weak for classical global regularity:
    /// `α < 1/2` for Burgers, `α + γ < 1` for the SQG family.
    pub fn supercritical(&self) -> bool {
        match self.kind {
            EquationKind::Burgers => self.alpha < 0.5,
            _ => self.alpha + self.gamma < 1.0,
        }
    }

    /// Exponent `1-2α` (Burgers, SQG) or `2-2α-2γ` (modified SQG) in the
    /// admissibility constraint `H ≤ C₁ δ^{exponent}`.
    pub fn size_exponent(&self) -> f64 {
        match self.kind {
            EquationKind::ModifiedSqg => 2.0 - 2.0 * self.alpha - 2.0 * self.gamma,
            _ => 1.0 - 2.0 * self.alpha,
        }
    }
}

/// Burgers: `u = θ`, so `Ω = ω`.
pub fn omega_bound_burgers<M: Modulus + ?Sized>(omega: &M, xi: f64) -> Result<f64> {
    if !(xi > 0.0) {
        return domain(format!("xi must be positive, got {xi}"));
    }
    Ok(omega.value(xi))
}

/// Modified SQG:
/// `Ω(ξ) = A (∫_0^ξ ω(η) η^{2γ-2} dη + ξ ∫_ξ^∞ ω(η) η^{2γ-3} dη)`.
///
/// Unbounded moduli are accepted as long as they grow slower than `ξ^{2-2γ}`,
/// which keeps the second integral finite.
pub fn omega_bound_msqg<M: Modulus + ?Sized>(
    omega: &M,
    gamma: f64,
    xi: f64,
    a: f64,
    rel_tol: f64,
) -> Result<f64> {
    if !(gamma > 0.5 && gamma < 1.0) {
        return domain(format!("gamma must lie in (1/2,1), got {gamma}"));
    }
    if !(xi > 0.0) {
        return domain(format!("xi must be positive, got {xi}"));
    }
    let p = 2.0 - 2.0 * gamma;
    if omega.growth_exponent() >= p {
        return domain("modulus grows too fast for the velocity integral to converge");
    }
    let kinks = omega.breakpoints();
    let scale = omega.value(xi) * xi.powf(-p);
    let tol = Tolerance::relative(rel_tol).with_abs(1e-3 * rel_tol * scale * xi);
    let f = |eta: f64| omega.value(eta);
    let head = quad::head_power(f, xi, 2.0 * gamma - 1.0, &kinks, tol)?;
    let tail = match omega.saturation() {
        Some((r, w)) if r > xi => {
            let mut pts = vec![xi, r];
            pts.extend(kinks.iter().copied().filter(|&b| b > xi && b < r));
            quad::sort_dedup(&mut pts);
            let body = quad::integrate(|eta: f64| f(eta) * eta.powf(-1.0 - p), &pts, tol)?;
            body.value + w * r.powf(-p) / p
        }
        Some((_, w)) => w * xi.powf(-p) / p,
        None => quad::tail_power(f, xi, p, &kinks, tol)?.value,
    };
    Ok(a * (head.value + xi * tail))
}

/// `ξ ∫_ξ^∞ ω(r) r^{-2} dr`, with the constant branch integrated exactly.
pub fn far_field_average<M: Modulus + ?Sized>(omega: &M, xi: f64, rel_tol: f64) -> Result<f64> {
    if !(xi > 0.0) {
        return domain(format!("xi must be positive, got {xi}"));
    }
    if omega.growth_exponent() >= 1.0 {
        return domain("modulus grows too fast for the far-field integral to converge");
    }
    let kinks = omega.breakpoints();
    let tol = Tolerance::relative(rel_tol).with_abs(1e-3 * rel_tol * omega.value(xi) / xi);
    let inner = match omega.saturation() {
        Some((r, w)) if r > xi => {
            let mut pts = vec![xi, r];
            pts.extend(kinks.iter().copied().filter(|&b| b > xi && b < r));
            quad::sort_dedup(&mut pts);
            quad::integrate(|t: f64| omega.value(t) / (t * t), &pts, tol)?.value + w / r
        }
        Some((_, w)) => w / xi,
        None => quad::tail_power(|t| omega.value(t), xi, 1.0, &kinks, tol)?.value,
    };
    Ok(xi * inner)
}

/// Where the perpendicular dissipation for the SQG bound comes from.
#[derive(Clone, Copy)]
pub enum PerpSource<'a> {
    /// No field available: `D⊥` is taken as 0 and the result flagged.
    Absent,
    Value(f64),
    Field {
        theta: &'a dyn PlanarField,
        pair: &'a BreakthroughPair,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SqgBound {
    pub value: f64,
    pub d_perp: f64,
    /// Set when `D⊥` was not available and replaced by 0.
    pub perp_assumed_zero: bool,
}

fn resolve_perp<M: Modulus + ?Sized>(
    omega: &M,
    source: PerpSource<'_>,
    alpha: f64,
    window: f64,
    cfg: &QuadratureConfig,
) -> Result<(f64, bool)> {
    match source {
        PerpSource::Absent => Ok((0.0, true)),
        PerpSource::Value(v) if v <= 0.0 => Ok((v, false)),
        PerpSource::Value(v) => Err(Error::Argument(format!("D_perp must be nonpositive, got {v}"))),
        PerpSource::Field { theta, pair } => {
            let DPerp { value, .. } = d_perp(theta, pair, omega, alpha, window, cfg)?;
            Ok((value, false))
        }
    }
}

/// SQG bound for moduli of the capped power family:
/// `Ω(ξ) = A (ω(ξ) - ξ^{2α} D⊥(ξ))`.
pub fn omega_bound_sqg<M: Modulus + ?Sized>(
    omega: &M,
    source: PerpSource<'_>,
    alpha: f64,
    xi: f64,
    a: f64,
    window: f64,
    cfg: &QuadratureConfig,
) -> Result<SqgBound> {
    if !(xi > 0.0) {
        return domain(format!("xi must be positive, got {xi}"));
    }
    let (dp, assumed) = resolve_perp(omega, source, alpha, window, cfg)?;
    Ok(SqgBound {
        value: a * (omega.value(xi) - xi.powf(2.0 * alpha) * dp),
        d_perp: dp,
        perp_assumed_zero: assumed,
    })
}

/// SQG bound for a general modulus, keeping the far-field average explicit:
/// `Ω(ξ) = A (-ξ^{2α} D⊥(ξ) + ξ ∫_ξ^∞ ω(r) r^{-2} dr + ω(ξ))`.
pub fn omega_bound_sqg_general<M: Modulus + ?Sized>(
    omega: &M,
    source: PerpSource<'_>,
    alpha: f64,
    xi: f64,
    a: f64,
    window: f64,
    cfg: &QuadratureConfig,
) -> Result<SqgBound> {
    if !(xi > 0.0) {
        return domain(format!("xi must be positive, got {xi}"));
    }
    let (dp, assumed) = resolve_perp(omega, source, alpha, window, cfg)?;
    let mid = far_field_average(omega, xi, cfg.rel_tol)?;
    Ok(SqgBound {
        value: a * (-xi.powf(2.0 * alpha) * dp + mid + omega.value(xi)),
        d_perp: dp,
        perp_assumed_zero: assumed,
    })
}

/// `Ω(ξ)` for the equation, with `D⊥ = 0` for SQG.
pub fn omega_bound<M: Modulus + ?Sized>(
    omega: &M,
    eq: &EquationParams,
    xi: f64,
    rel_tol: f64,
) -> Result<f64> {
    match eq.kind {
        EquationKind::Burgers => omega_bound_burgers(omega, xi),
        EquationKind::ModifiedSqg => omega_bound_msqg(omega, eq.gamma, xi, eq.a, rel_tol),
        EquationKind::Sqg => Ok(eq.a * omega.value(xi)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LemmaRow {
    pub xi: f64,
    pub xi0: f64,
    pub ratio: f64,
    pub bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LemmaReport {
    pub name: String,
    pub rows: Vec<LemmaRow>,
    pub passed: bool,
    /// Smallest `bound - ratio` over the grid.
    pub worst_slack: f64,
    pub worst: Option<LemmaRow>,
}

impl LemmaReport {
    fn from_rows(name: &str, rows: Vec<LemmaRow>, tol: f64) -> Self {
        let worst = rows
            .iter()
            .copied()
            .min_by(|a, b| (a.bound - a.ratio).total_cmp(&(b.bound - b.ratio)));
        let worst_slack = worst.map_or(f64::INFINITY, |r| r.bound - r.ratio);
        Self {
            name: name.to_string(),
            passed: rows.iter().all(|r| r.ratio <= r.bound + tol * r.bound.abs()),
            rows,
            worst_slack,
            worst,
        }
    }
}

/// Checks `ξ ∫_ξ^∞ ω(r,ξ₀) r^{-2} dr ≤ C ω(ξ,ξ₀)` with the piecewise
/// constants 1 (ξ ≥ δ), `1/(1-β)` (ξ₀ ≤ ξ < δ) and `2/(1-β)²` (ξ < ξ₀).
pub fn verify_ll23(base: &ModulusParams, xis: &[f64], xi0s: &[f64], rel_tol: f64) -> Result<LemmaReport> {
    base.check()?;
    let b = base.beta;
    let mut rows = Vec::with_capacity(xis.len() * xi0s.len());
    for &x0 in xi0s {
        let m = ModulusParams::new(base.h, base.delta, b, x0)?;
        for &xi in xis {
            let ratio = far_field_average(&m, xi, rel_tol)? / m.value(xi);
            let bound = if xi >= m.delta {
                1.0
            } else if xi >= x0 {
                1.0 / (1.0 - b)
            } else {
                2.0 / ((1.0 - b) * (1.0 - b))
            };
            rows.push(LemmaRow { xi, xi0: x0, ratio, bound });
        }
    }
    Ok(LemmaReport::from_rows("far-field average", rows, 10.0 * rel_tol))
}

/// Constant `C` in `Ω(ξ,ξ₀) ≤ C ξ^{2γ-1} ω(ξ,ξ₀)` for the capped family:
/// `A [1/(2γ-1) + 1/((2-2γ)(1-β)) + 1/((2-2γ-β)(1-β))]`.
///
/// The three terms bound the near integral, the far integral over `[ξ, ξ₀]`
/// and the far integral beyond `ξ₀`; all three can be active at once.
pub fn ll43_constant(beta: f64, gamma: f64, a: f64) -> Result<f64> {
    let p = 2.0 - 2.0 * gamma;
    if !(gamma > 0.5 && gamma < 1.0) || !(beta > 0.0 && beta < p) {
        return domain("requires 1/2 < gamma < 1 and 0 < beta < 2 - 2 gamma");
    }
    Ok(a * (1.0 / (2.0 * gamma - 1.0) + 1.0 / (p * (1.0 - beta)) + 1.0 / ((p - beta) * (1.0 - beta))))
}

/// Checks `Ω(ξ,ξ₀) ≤ C ξ^{2γ-1} ω(ξ,ξ₀)` for the modified SQG velocity bound.
pub fn verify_ll43(
    base: &ModulusParams,
    gamma: f64,
    a: f64,
    xis: &[f64],
    xi0s: &[f64],
    rel_tol: f64,
) -> Result<LemmaReport> {
    base.check()?;
    let c = ll43_constant(base.beta, gamma, a)?;
    let mut rows = Vec::with_capacity(xis.len() * xi0s.len());
    for &x0 in xi0s {
        let m = ModulusParams::new(base.h, base.delta, base.beta, x0)?;
        for &xi in xis {
            let w = m.value(xi);
            let om = omega_bound_msqg(&m, gamma, xi, a, rel_tol)?;
            rows.push(LemmaRow {
                xi,
                xi0: x0,
                ratio: om / (xi.powf(2.0 * gamma - 1.0) * w),
                bound: c,
            });
        }
    }
    Ok(LemmaReport::from_rows("velocity bound", rows, 10.0 * rel_tol))
}
