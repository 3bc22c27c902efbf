//! Moduli of continuity: the three-branch family `ω(ξ; H, δ, β, ξ₀)` and
//! generic concave piecewise moduli built from linear and power pieces.
//!
//! Every modulus is evaluated analytically, so one-sided derivatives at the
//! kinks are exact. `ω` is only defined for `ξ > 0`; the limit `ω(0+)` has its
//! own accessor.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{domain, validation, Result};

/// Which one-sided derivative to take at a kink.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

/// A closed-form piece: `slope·ξ + intercept` or `coef·ξ^exponent + offset`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Piece {
    Linear { slope: f64, intercept: f64 },
    Power { coef: f64, exponent: f64, offset: f64 },
}

impl Piece {
    pub fn constant(value: f64) -> Self {
        Piece::Linear {
            slope: 0.0,
            intercept: value,
        }
    }

    #[inline]
    pub fn value(&self, xi: f64) -> f64 {
        match *self {
            Piece::Linear { slope, intercept } => slope * xi + intercept,
            Piece::Power {
                coef,
                exponent,
                offset,
            } => coef * xi.powf(exponent) + offset,
        }
    }

    #[inline]
    pub fn slope(&self, xi: f64) -> f64 {
        match *self {
            Piece::Linear { slope, .. } => slope,
            Piece::Power { coef, exponent, .. } => coef * exponent * xi.powf(exponent - 1.0),
        }
    }

    #[inline]
    pub fn curvature(&self, xi: f64) -> f64 {
        match *self {
            Piece::Linear { .. } => 0.0,
            Piece::Power { coef, exponent, .. } => {
                coef * exponent * (exponent - 1.0) * xi.powf(exponent - 2.0)
            }
        }
    }

    /// `value(y) - value(x)` without cancellation when `x ≈ y`.
    #[inline]
    pub fn increment(&self, x: f64, y: f64) -> f64 {
        match *self {
            Piece::Linear { slope, .. } => slope * (y - x),
            Piece::Power { coef, exponent, .. } => {
                if x <= 0.0 {
                    coef * y.powf(exponent)
                } else {
                    coef * x.powf(exponent) * (exponent * (y / x).ln()).exp_m1()
                }
            }
        }
    }

    /// `value(c + h) - value(c - h)` for `0 < h < c`, accurate when `h ≪ c`.
    #[inline]
    pub fn symmetric_increment(&self, c: f64, h: f64) -> f64 {
        match *self {
            Piece::Linear { slope, .. } => 2.0 * slope * h,
            Piece::Power { coef, exponent, .. } => {
                let r = h / c;
                if r >= 1.0 {
                    return self.increment(c - h, c + h);
                }
                coef * (c - h).powf(exponent) * (exponent * (r.ln_1p() - (-r).ln_1p())).exp_m1()
            }
        }
    }

    fn is_increasing(&self) -> bool {
        match *self {
            Piece::Linear { slope, .. } => slope >= 0.0,
            Piece::Power { coef, exponent, .. } => coef * exponent >= 0.0,
        }
    }

    fn is_concave(&self) -> bool {
        match *self {
            Piece::Linear { .. } => true,
            Piece::Power { coef, exponent, .. } => coef * exponent * (exponent - 1.0) <= 0.0,
        }
    }

    fn is_constant(&self) -> bool {
        match *self {
            Piece::Linear { slope, .. } => slope == 0.0,
            Piece::Power { coef, exponent, .. } => coef == 0.0 || exponent == 0.0,
        }
    }
}

/// Common interface of every modulus of continuity used by the toolkit.
///
/// Implementors must be piecewise closed-form: `locate` returns the piece
/// active at `ξ`, with `side` choosing between the two pieces meeting at a kink.
pub trait Modulus: Sync {
    fn locate(&self, xi: f64, side: Side) -> Piece;

    /// Kink locations in increasing order (excluding 0).
    fn breakpoints(&self) -> Vec<f64>;

    /// `ω(0+)`.
    fn at_zero(&self) -> f64;

    /// `(R, ω(R))` if `ω` is constant on `[R, ∞)`.
    fn saturation(&self) -> Option<(f64, f64)>;

    /// Exponent `p` with `ω(ξ) ~ ξ^p` as `ξ → ∞` (0 for bounded moduli).
    fn growth_exponent(&self) -> f64 {
        if self.saturation().is_some() {
            return 0.0;
        }
        let last = self.breakpoints().last().copied().unwrap_or(0.0);
        match self.locate(2.0 * last + 1.0, Side::Right) {
            Piece::Linear { slope, .. } => {
                if slope > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Piece::Power { coef, exponent, .. } => {
                if coef != 0.0 && exponent > 0.0 {
                    exponent
                } else {
                    0.0
                }
            }
        }
    }

    #[inline]
    fn value(&self, xi: f64) -> f64 {
        self.locate(xi, Side::Right).value(xi)
    }

    #[inline]
    fn slope(&self, xi: f64, side: Side) -> f64 {
        self.locate(xi, side).slope(xi)
    }

    #[inline]
    fn curvature(&self, xi: f64, side: Side) -> f64 {
        self.locate(xi, side).curvature(xi)
    }

    /// `ω(y) - ω(x)` for `0 < x ≤ y`, evaluated inside one piece when possible.
    #[inline]
    fn increment(&self, x: f64, y: f64) -> f64 {
        let px = self.locate(x, Side::Right);
        let py = self.locate(y, Side::Left);
        if px == py {
            px.increment(x, y)
        } else {
            self.value(y) - self.value(x)
        }
    }

    /// `ω(c+h) - ω(c-h)` for `0 < h ≤ c`, without forming `c ± h` inside
    /// the logarithm when both ends share a piece.
    fn symmetric_increment(&self, c: f64, h: f64) -> f64 {
        let px = self.locate(c - h, Side::Right);
        let py = self.locate(c + h, Side::Left);
        if px == py {
            px.symmetric_increment(c, h)
        } else {
            self.value(c + h) - self.value(c - h)
        }
    }

    /// `ω(ξ+h) + ω(ξ-h) - 2ω(ξ)` for `0 < h < ξ`.
    #[inline]
    fn second_difference(&self, xi: f64, h: f64) -> f64 {
        self.increment(xi, xi + h) - self.increment(xi - h, xi)
    }
}

/// Parameters of the family
///
/// ```text
/// ω(ξ, ξ₀) = βHδ^{-β}ξ₀^{β-1}ξ + (1-β)Hδ^{-β}ξ₀^β   0 < ξ < ξ₀
///            H(ξ/δ)^β                              ξ₀ ≤ ξ ≤ δ
///            H                                     ξ > δ
/// ```
///
/// With `xi0 = 0` this is the stationary power-law modulus capped at `H`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModulusParams {
    #[serde(rename = "H")]
    pub h: f64,
    pub delta: f64,
    pub beta: f64,
    pub xi0: f64,
}

impl ModulusParams {
    pub fn new(h: f64, delta: f64, beta: f64, xi0: f64) -> Result<Self> {
        let m = Self {
            h,
            delta,
            beta,
            xi0,
        };
        m.check()?;
        Ok(m)
    }

    /// The stationary member (`ξ₀ = 0`).
    pub fn stationary(h: f64, delta: f64, beta: f64) -> Result<Self> {
        Self::new(h, delta, beta, 0.0)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.h > 0.0 && self.h.is_finite()) {
            return validation(format!("H must be positive, got {}", self.h));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return validation(format!("delta must be positive, got {}", self.delta));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return validation(format!("beta must lie in (0,1), got {}", self.beta));
        }
        if !(self.xi0 >= 0.0 && self.xi0 <= self.delta) {
            return validation(format!(
                "xi0 must lie in [0, delta] = [0, {}], got {}",
                self.delta, self.xi0
            ));
        }
        Ok(())
    }

    /// `H δ^{-β}`, the Hölder constant of the stationary member.
    pub fn holder_constant(&self) -> f64 {
        self.h * self.delta.powf(-self.beta)
    }

    /// The same base modulus with cap parameter replaced.
    pub fn with_xi0(&self, xi0: f64) -> Self {
        Self { xi0, ..*self }
    }

    /// Replace the power branch below `xi0` by its tangent line at `xi0`.
    pub fn tangent_cap(&self, xi0: f64) -> Result<Self> {
        if self.xi0 != 0.0 {
            return domain("tangent_cap expects the stationary member (xi0 = 0)");
        }
        if !(xi0 > 0.0 && xi0 <= self.delta) {
            return domain(format!("cap point must lie in (0, delta], got {xi0}"));
        }
        Ok(self.with_xi0(xi0))
    }

    fn linear_branch(&self) -> Piece {
        let c = self.holder_constant();
        Piece::Linear {
            slope: self.beta * c * self.xi0.powf(self.beta - 1.0),
            intercept: (1.0 - self.beta) * c * self.xi0.powf(self.beta),
        }
    }

    fn power_branch(&self) -> Piece {
        Piece::Power {
            coef: self.holder_constant(),
            exponent: self.beta,
            offset: 0.0,
        }
    }

    /// `∂ω/∂ξ₀` at fixed `ξ`; zero outside the linear branch.
    pub fn d_xi0(&self, xi: f64) -> f64 {
        if self.xi0 > 0.0 && xi < self.xi0 {
            let b = self.beta;
            b * (1.0 - b)
                * self.holder_constant()
                * (self.xi0.powf(b - 1.0) - self.xi0.powf(b - 2.0) * xi)
        } else {
            0.0
        }
    }

    pub fn to_piecewise(&self) -> PiecewiseModulus {
        let mut starts = vec![0.0];
        let mut pieces = Vec::with_capacity(3);
        if self.xi0 > 0.0 {
            pieces.push(self.linear_branch());
            if self.xi0 < self.delta {
                starts.push(self.xi0);
                pieces.push(self.power_branch());
            }
        } else {
            pieces.push(self.power_branch());
        }
        starts.push(self.delta);
        pieces.push(Piece::constant(self.h));
        PiecewiseModulus { starts, pieces }
    }
}

impl Modulus for ModulusParams {
    #[inline]
    fn locate(&self, xi: f64, side: Side) -> Piece {
        let below = |b: f64| xi < b || (xi == b && side == Side::Left);
        if self.xi0 > 0.0 && below(self.xi0) {
            self.linear_branch()
        } else if below(self.delta) {
            self.power_branch()
        } else {
            Piece::constant(self.h)
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        if self.xi0 > 0.0 && self.xi0 < self.delta {
            vec![self.xi0, self.delta]
        } else {
            vec![self.delta]
        }
    }

    fn at_zero(&self) -> f64 {
        (1.0 - self.beta) * self.holder_constant() * self.xi0.powf(self.beta)
    }

    fn saturation(&self) -> Option<(f64, f64)> {
        Some((self.delta, self.h))
    }
}

/// A concave modulus assembled from closed-form pieces.
///
/// Piece `i` is active on `[starts[i], starts[i+1])`, the last one on
/// `[starts[last], ∞)`; `starts[0] = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseModulus {
    pub starts: Vec<f64>,
    pub pieces: Vec<Piece>,
}

impl PiecewiseModulus {
    pub fn new(starts: Vec<f64>, pieces: Vec<Piece>) -> Result<Self> {
        let m = Self { starts, pieces };
        let report = m.validate();
        match report.violation {
            None => Ok(m),
            Some(v) => validation(format!("{} at xi = {}", v.what, v.location)),
        }
    }

    pub fn single(piece: Piece) -> Self {
        Self {
            starts: vec![0.0],
            pieces: vec![piece],
        }
    }

    /// `ω(ξ) = ξ^β`.
    pub fn power_law(beta: f64) -> Self {
        Self::single(Piece::Power {
            coef: 1.0,
            exponent: beta,
            offset: 0.0,
        })
    }

    /// Increasing, continuous, concave and piecewise C² (automatic for these
    /// piece types); reports the first violation in order of position.
    pub fn validate(&self) -> ValidationReport {
        let fail = |what: &str, location: f64| ValidationReport {
            violation: Some(Violation {
                what: what.to_string(),
                location,
            }),
        };
        if self.pieces.is_empty() || self.starts.len() != self.pieces.len() {
            return fail("starts and pieces must be nonempty and of equal length", 0.0);
        }
        if self.starts[0] != 0.0 {
            return fail("first piece must start at 0", self.starts[0]);
        }
        if let Some(w) = self.starts.windows(2).find(|w| !(w[1] > w[0])) {
            return fail("breakpoints must be strictly increasing", w[1]);
        }
        let first = self.pieces[0];
        if let Piece::Power { exponent, .. } = first {
            if exponent < 0.0 {
                return fail("first piece is unbounded below at 0", 0.0);
            }
        }
        let at_zero = self.at_zero();
        if !(at_zero >= 0.0) {
            return fail("omega(0+) must be nonnegative", 0.0);
        }
        for (i, piece) in self.pieces.iter().enumerate() {
            let start = self.starts[i];
            if !piece.is_increasing() {
                return fail("decreasing piece", start);
            }
            if !piece.is_concave() {
                return fail("convex piece", start);
            }
            if i > 0 {
                let prev = self.pieces[i - 1];
                let left = prev.value(start);
                let right = piece.value(start);
                let scale = left.abs().max(right.abs()).max(1.0);
                if (left - right).abs() > 1e-9 * scale {
                    return fail("discontinuity", start);
                }
                let dl = prev.slope(start);
                let dr = piece.slope(start);
                if dr > dl + 1e-12 * dl.abs().max(1.0) {
                    return fail("slope increases across breakpoint (not concave)", start);
                }
            }
        }
        if at_zero == 0.0 && first.is_constant() {
            return fail("omega vanishes on the first piece", 0.0);
        }
        ValidationReport { violation: None }
    }

    /// A random bounded concave modulus: power and linear pieces with
    /// nonincreasing slopes, ending in a constant piece.
    pub fn random_concave<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let n_inner = rng.gen_range(1..=4);
        let mut starts = vec![0.0];
        let mut pieces = Vec::new();
        let mut x: f64 = 0.0;
        let mut v = if rng.gen_bool(0.5) {
            rng.gen_range(0.0..1.0)
        } else {
            0.0
        };
        let mut slope = f64::INFINITY;
        for i in 0..n_inner {
            let len = 10f64.powf(rng.gen_range(-1.5..0.5));
            let use_power = rng.gen_bool(0.5) || (i == 0 && v == 0.0);
            let piece = if use_power {
                let b = rng.gen_range(0.15..0.9);
                // slope at the start of the piece may not exceed the previous slope
                let max_coef = if x > 0.0 {
                    slope / (b * x.powf(b - 1.0))
                } else {
                    f64::INFINITY
                };
                let coef = rng.gen_range(0.2..2.0f64).min(max_coef * rng.gen_range(0.3..1.0));
                Piece::Power {
                    coef,
                    exponent: b,
                    offset: v - coef * x.powf(b),
                }
            } else {
                let cap = if slope.is_finite() { slope } else { 2.0 };
                let s = cap * rng.gen_range(0.2..1.0);
                Piece::Linear {
                    slope: s,
                    intercept: v - s * x,
                }
            };
            let end = x + len;
            slope = piece.slope(end);
            v = piece.value(end);
            pieces.push(piece);
            x = end;
            starts.push(x);
        }
        pieces.push(Piece::constant(v));
        let m = Self { starts, pieces };
        debug_assert!(m.validate().passed(), "{:?}", m.validate());
        m
    }

    fn index(&self, xi: f64, side: Side) -> usize {
        // number of starts strictly below xi (or ≤ xi for the right side)
        let k = match side {
            Side::Left => self.starts.partition_point(|&s| s < xi),
            Side::Right => self.starts.partition_point(|&s| s <= xi),
        };
        k.saturating_sub(1)
    }
}

impl Modulus for PiecewiseModulus {
    #[inline]
    fn locate(&self, xi: f64, side: Side) -> Piece {
        self.pieces[self.index(xi, side)]
    }

    fn breakpoints(&self) -> Vec<f64> {
        self.starts[1..].to_vec()
    }

    fn at_zero(&self) -> f64 {
        match self.pieces[0] {
            Piece::Linear { intercept, .. } => intercept,
            Piece::Power {
                coef,
                exponent,
                offset,
            } => {
                if exponent > 0.0 {
                    offset
                } else if exponent == 0.0 {
                    coef + offset
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    fn saturation(&self) -> Option<(f64, f64)> {
        let last = self.pieces.last()?;
        if last.is_constant() {
            let r = *self.starts.last()?;
            Some((r, last.value(r.max(f64::MIN_POSITIVE))))
        } else {
            None
        }
    }
}

/// Either a member of the capped power family or a generic piecewise
/// modulus, as read from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModulusSpec {
    Family(ModulusParams),
    Piecewise(PiecewiseModulus),
}

impl ModulusSpec {
    pub fn check(&self) -> Result<()> {
        match self {
            ModulusSpec::Family(m) => m.check(),
            ModulusSpec::Piecewise(p) => match p.validate().violation {
                None => Ok(()),
                Some(v) => validation(format!("{} at xi = {}", v.what, v.location)),
            },
        }
    }
}

impl Modulus for ModulusSpec {
    fn locate(&self, xi: f64, side: Side) -> Piece {
        match self {
            ModulusSpec::Family(m) => m.locate(xi, side),
            ModulusSpec::Piecewise(p) => p.locate(xi, side),
        }
    }

    fn breakpoints(&self) -> Vec<f64> {
        match self {
            ModulusSpec::Family(m) => m.breakpoints(),
            ModulusSpec::Piecewise(p) => p.breakpoints(),
        }
    }

    fn at_zero(&self) -> f64 {
        match self {
            ModulusSpec::Family(m) => m.at_zero(),
            ModulusSpec::Piecewise(p) => p.at_zero(),
        }
    }

    fn saturation(&self) -> Option<(f64, f64)> {
        match self {
            ModulusSpec::Family(m) => m.saturation(),
            ModulusSpec::Piecewise(p) => p.saturation(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub what: String,
    pub location: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violation: Option<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violation.is_none()
    }
}

pub fn validate_modulus(p: &PiecewiseModulus) -> ValidationReport {
    p.validate()
}

fn check_xi(xi: f64) -> Result<()> {
    if xi > 0.0 && xi.is_finite() {
        Ok(())
    } else {
        domain(format!("omega is defined for xi > 0 only, got {xi}"))
    }
}

/// `ω(ξ)` with argument checking.
pub fn eval_omega<M: Modulus + ?Sized>(m: &M, xi: f64) -> Result<f64> {
    check_xi(xi)?;
    Ok(m.value(xi))
}

/// One-sided `∂ξω(ξ)`.
pub fn d_omega<M: Modulus + ?Sized>(m: &M, xi: f64, side: Side) -> Result<f64> {
    check_xi(xi)?;
    Ok(m.slope(xi, side))
}

/// The larger one-sided `∂ξω`, as used by the key inequality at kinks.
pub fn d_omega_max<M: Modulus + ?Sized>(m: &M, xi: f64) -> f64 {
    m.slope(xi, Side::Left).max(m.slope(xi, Side::Right))
}

/// One-sided `∂²ξξω(ξ)`.
pub fn d2_omega<M: Modulus + ?Sized>(m: &M, xi: f64, side: Side) -> Result<f64> {
    check_xi(xi)?;
    Ok(m.curvature(xi, side))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn family(xi0: f64) -> ModulusParams {
        ModulusParams::new(1.0, 1.0, 0.5, xi0).unwrap()
    }

    #[test]
    fn eval_examples() {
        assert_eq!(eval_omega(&family(0.0), 0.25).unwrap(), 0.5);
        assert_eq!(eval_omega(&family(0.0), 2.0).unwrap(), 1.0);
        assert!((family(0.25).at_zero() - 0.25).abs() < 1e-15);
        assert!((eval_omega(&family(0.25), 1e-14).unwrap() - 0.25).abs() < 1e-12);
        assert!(eval_omega(&family(0.0), 0.0).is_err());
        assert!(eval_omega(&family(0.0), -1.0).is_err());
        assert!(ModulusParams::new(1.0, 1.0, 1.2, 0.0).is_err());
        assert!(ModulusParams::new(1.0, 1.0, 0.5, 1.5).is_err());
        assert!(ModulusParams::new(-1.0, 1.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn derivative_examples() {
        let m = family(0.0);
        assert!((d_omega(&m, 0.25, Side::Right).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(d_omega(&m, 2.0, Side::Left).unwrap(), 0.0);
        assert_eq!(d_omega(&m, 2.0, Side::Right).unwrap(), 0.0);
        let c = family(0.25);
        for side in [Side::Left, Side::Right] {
            assert!((d_omega(&c, 0.1, side).unwrap() - 1.0).abs() < 1e-14);
        }
        // at the kink δ the left slope is βH/δ, the right slope 0
        assert!((d_omega(&m, 1.0, Side::Left).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(d_omega(&m, 1.0, Side::Right).unwrap(), 0.0);
        assert!((d_omega_max(&m, 1.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn second_derivative_examples() {
        let m = family(0.0);
        // β(β-1)ξ^{β-2} = -0.25 · 0.25^{-1.5} = -2
        let d2 = d2_omega(&m, 0.25, Side::Right).unwrap();
        assert!((d2 + 2.0).abs() < 1e-13, "{d2}");
        let h = 1e-4;
        let fd = (m.value(0.25 + h) + m.value(0.25 - h) - 2.0 * m.value(0.25)) / (h * h);
        assert!((fd - d2).abs() < 1e-6 * d2.abs());
        assert_eq!(d2_omega(&family(0.25), 0.1, Side::Left).unwrap(), 0.0);
        assert_eq!(d2_omega(&m, 3.0, Side::Right).unwrap(), 0.0);
    }

    #[test]
    fn tangent_cap_matches_value_and_slope() {
        let base = family(0.0);
        let full = base.tangent_cap(1.0).unwrap();
        assert!((full.at_zero() - 0.5).abs() < 1e-15);
        let capped = base.tangent_cap(0.3).unwrap();
        let lin = capped.locate(0.3, Side::Left);
        let pow = capped.locate(0.3, Side::Right);
        assert!((lin.value(0.3) - pow.value(0.3)).abs() < 1e-15);
        assert!((lin.slope(0.3) - pow.slope(0.3)).abs() < 1e-14);
        assert!(base.tangent_cap(0.0).is_err());
        assert!(base.tangent_cap(1.5).is_err());
        assert!(capped.tangent_cap(0.1).is_err());
    }

    #[test]
    fn family_validates() {
        for xi0 in [0.0, 0.1, 0.5, 1.0] {
            let m = ModulusParams::new(2.0, 0.7, 0.35, xi0 * 0.7).unwrap();
            assert!(m.to_piecewise().validate().passed(), "xi0 = {xi0}");
        }
    }

    #[test]
    fn validation_failures_are_located() {
        let convex = PiecewiseModulus {
            starts: vec![0.0, 1.0, 2.0],
            pieces: vec![
                Piece::Linear {
                    slope: 1.0,
                    intercept: 0.0,
                },
                Piece::Power {
                    coef: 0.25,
                    exponent: 2.0,
                    offset: 0.75,
                },
                Piece::constant(1.75),
            ],
        };
        let r = convex.validate();
        assert_eq!(r.violation.as_ref().unwrap().location, 1.0);
        assert!(r.violation.unwrap().what.contains("convex"));

        let decreasing = PiecewiseModulus {
            starts: vec![0.0, 1.0],
            pieces: vec![
                Piece::Linear {
                    slope: 1.0,
                    intercept: 0.0,
                },
                Piece::Linear {
                    slope: -0.5,
                    intercept: 1.5,
                },
            ],
        };
        let r = decreasing.validate();
        assert!(r.violation.unwrap().what.contains("decreasing"));

        let jump = PiecewiseModulus {
            starts: vec![0.0, 1.0],
            pieces: vec![
                Piece::Linear {
                    slope: 1.0,
                    intercept: 0.0,
                },
                Piece::constant(2.0),
            ],
        };
        assert!(!jump.validate().passed());
    }

    #[test]
    fn capped_family_dominates_stationary_member() {
        let base = ModulusParams::new(1.3, 0.8, 0.6, 0.0).unwrap();
        let capped = base.tangent_cap(0.2).unwrap();
        for i in 1..400 {
            let xi = i as f64 * 0.005;
            let (a, b) = (capped.value(xi), base.value(xi));
            if xi < 0.2 {
                assert!(a >= b - 1e-15, "xi = {xi}");
            } else {
                assert_eq!(a, b, "xi = {xi}");
            }
        }
    }

    #[test]
    fn slopes_match_finite_differences_away_from_kinks() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let m = PiecewiseModulus::random_concave(&mut rng);
            let kinks = m.breakpoints();
            for i in 1..200 {
                let xi = i as f64 * 0.037;
                let h = 1e-6 * xi;
                if kinks.iter().any(|&k| (k - xi).abs() < 10.0 * h) {
                    continue;
                }
                let fd = (m.value(xi + h) - m.value(xi - h)) / (2.0 * h);
                let d = m.slope(xi, Side::Right);
                assert!(
                    (fd - d).abs() <= 1e-6 * d.abs().max(1e-3),
                    "xi = {xi}: fd {fd} vs {d}"
                );
            }
        }
    }

    #[test]
    fn json_keys() {
        let m = ModulusParams::new(1.0, 0.5, 0.6, 0.1).unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"H":1.0,"delta":0.5,"beta":0.6,"xi0":0.1}"#);
        let back: ModulusParams = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn increments_are_accurate_inside_a_piece() {
        let m = PiecewiseModulus::power_law(0.6);
        let x = 0.7;
        let h = 1e-9;
        let inc = m.increment(x, x + h);
        let expect = 0.6 * x.powf(-0.4) * h;
        assert!((inc - expect).abs() < 1e-6 * expect);
        let sd = m.second_difference(x, 1e-3);
        let expect = 0.6 * -0.4 * x.powf(-1.4) * 1e-6;
        assert!((sd - expect).abs() < 1e-5 * expect.abs());
    }
}
