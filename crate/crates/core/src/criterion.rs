//! The key differential inequality
//!
//! ```text
//! ∂tω(ξ,t) > Ω(ξ,t) ∂ξω(ξ,t) + D_α(ξ,t) + 2ε ∂²ξξω(ξ,t)
//! ```
//!
//! for the moving family `ω(ξ, ξ₀(t))`, with `ξ₀' = -C₂ ξ₀^{1-2α}`, and the
//! search for admissible constants `C₁`, `C₂`.
//!
//! All terms scale exactly under `ξ = δs`, `ω = H ŵ`: after division by
//! `Hδ^{-2α}` the margin is
//!
//! ```text
//! C₂ τ(s,s₀) - K A Ω̂(s,s₀) ŵ'(s,s₀) - c_α D̂(s,s₀) - 2ε δ^{2α-2} ŵ''(s,s₀)
//! ```
//!
//! with `K = H/δ^{1-2α}` (or `H/δ^{2-2α-2γ}` for modified SQG). The unit
//! quantities are tabulated once and reused for every `(C₁, C₂, δ)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dissipation::{d_alpha_parts, QuadratureConfig};
use crate::error::{domain, validation, Error, Result};
use crate::moduli::{Modulus, ModulusParams, Side};
use crate::velocity::{omega_bound_msqg, EquationKind, EquationParams};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionConstants {
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    #[serde(default = "default_margin_tol")]
    pub margin_tol: f64,
}

fn default_margin_tol() -> f64 {
    1e-10
}

impl CriterionConstants {
    pub fn new(c1: f64, c2: f64) -> Result<Self> {
        let c = Self {
            c1,
            c2,
            margin_tol: default_margin_tol(),
        };
        c.check()?;
        Ok(c)
    }

    pub fn check(&self) -> Result<()> {
        if !(self.c1 > 0.0 && self.c2 > 0.0) {
            return validation("C1 and C2 must be positive");
        }
        if !(self.margin_tol >= 0.0) {
            return validation("margin_tol must be nonnegative");
        }
        Ok(())
    }
}

/// `ξ₀(t)` and the extinction time `T = δ^{2α}/(2αC₂)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Xi0 {
    pub xi0: f64,
    pub extinction_time: f64,
}

/// Solution of `ξ₀' = -C₂ ξ₀^{1-2α}`, `ξ₀(0) = δ`:
/// `ξ₀(t) = (δ^{2α} - 2αC₂t)^{1/(2α)}`, clamped at 0.
pub fn xi0_solve(c2: f64, alpha: f64, delta: f64, t: f64) -> Result<Xi0> {
    if !(c2 > 0.0 && alpha > 0.0 && alpha < 0.5 && delta > 0.0) {
        return domain("xi0_solve requires C2 > 0, 0 < alpha < 1/2, delta > 0");
    }
    if !(t >= 0.0) {
        return domain(format!("t must be nonnegative, got {t}"));
    }
    let two_a = 2.0 * alpha;
    let d = delta.powf(two_a);
    let rest = (d - two_a * c2 * t).max(0.0);
    Ok(Xi0 {
        xi0: rest.powf(1.0 / two_a),
        extinction_time: d / (two_a * c2),
    })
}

/// Time at which the cap reaches `xi0`.
pub fn time_of_xi0(c2: f64, alpha: f64, delta: f64, xi0: f64) -> f64 {
    let two_a = 2.0 * alpha;
    (delta.powf(two_a) - xi0.powf(two_a)) / (two_a * c2)
}

/// `∂tω(ξ, ξ₀(t)) = ∂ξ₀ω · ξ₀'(t)`; zero on the stationary part `ξ ≥ ξ₀`
/// and after extinction.
pub fn dt_omega_family(m: &ModulusParams, c2: f64, alpha: f64, xi: f64, t: f64) -> Result<f64> {
    if !(xi > 0.0) {
        return domain(format!("xi must be positive, got {xi}"));
    }
    let x0 = xi0_solve(c2, alpha, m.delta, t)?.xi0;
    if x0 <= 0.0 {
        return Ok(0.0);
    }
    let rate = -c2 * x0.powf(1.0 - 2.0 * alpha);
    Ok(m.with_xi0(x0).d_xi0(xi) * rate)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridSpec {
    /// Smallest `ξ/δ`.
    pub xi_min: f64,
    /// Largest `ξ/δ`.
    pub xi_max: f64,
    /// Points per decade of the `ξ` grid.
    pub per_decade: usize,
    /// Points per decade of the `ξ₀/δ` grid that defines the sampled times.
    pub xi0_per_decade: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            xi_min: 1e-6,
            xi_max: 10.0,
            per_decade: 400,
            xi0_per_decade: 4,
        }
    }
}

impl GridSpec {
    pub fn check(&self) -> Result<()> {
        if !(self.xi_min > 0.0 && self.xi_max > self.xi_min) {
            return validation("grid needs 0 < xi_min < xi_max");
        }
        if self.per_decade == 0 || self.xi0_per_decade == 0 {
            return validation("grid densities must be positive");
        }
        Ok(())
    }

    /// Same range with both densities doubled.
    pub fn doubled(&self) -> Self {
        Self {
            per_decade: 2 * self.per_decade,
            xi0_per_decade: 2 * self.xi0_per_decade,
            ..*self
        }
    }

    fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
        let decades = (hi / lo).log10();
        let n = (decades * per_decade as f64).ceil() as usize;
        (0..=n)
            .map(|i| lo * 10f64.powf(decades * i as f64 / n as f64))
            .collect()
    }

    fn xi_grid(&self) -> Vec<f64> {
        Self::log_grid(self.xi_min, self.xi_max, self.per_decade)
    }

    /// Cap values `ξ₀/δ` from 1 down to `xi_min`, then 0 (the extinction time).
    fn xi0_grid(&self) -> Vec<f64> {
        let mut g = Self::log_grid(self.xi_min, 1.0, self.xi0_per_decade);
        g.reverse();
        g.push(0.0);
        g
    }
}

#[derive(Clone, Copy, Debug, Default, Serialize)]
struct UnitPoint {
    s: f64,
    w: f64,
    /// Larger one-sided `ŵ'`.
    slope: f64,
    /// Larger one-sided `ŵ''`.
    curvature: f64,
    /// `-s₀^{1-2α} ∂ŵ/∂s₀`, so that `∂tω = C₂ Hδ^{-2α} τ`.
    tau: f64,
    /// `Ω̂ ŵ'` with `A = 1`.
    nonlinear: f64,
    /// `D̂` without `c_α`.
    dissipation: f64,
}

#[derive(Clone, Debug)]
struct UnitColumn {
    s0: f64,
    points: Vec<UnitPoint>,
}

/// Unit-family quantities on the `(s, s₀)` grid.
#[derive(Clone, Debug)]
pub struct CriterionTable {
    kind: EquationKind,
    alpha: f64,
    beta: f64,
    gamma: f64,
    columns: Vec<UnitColumn>,
}

impl CriterionTable {
    pub fn build(eq: &EquationParams, beta: f64, grid: &GridSpec, cfg: &QuadratureConfig) -> Result<Self> {
        eq.check()?;
        grid.check()?;
        if !(beta > 0.0 && beta < 1.0) {
            return validation("beta must lie in (0,1)");
        }
        if eq.alpha >= 0.5 {
            return domain("the moving family needs alpha < 1/2");
        }
        if eq.kind == EquationKind::ModifiedSqg && beta >= 2.0 - 2.0 * eq.gamma {
            return domain("modified SQG needs beta < 2 - 2 gamma");
        }
        let base = grid.xi_grid();
        let s0s = grid.xi0_grid();
        let jobs: Vec<(usize, f64)> = s0s
            .iter()
            .enumerate()
            .flat_map(|(j, &s0)| {
                let mut col = base.clone();
                col.push(1.0);
                if s0 > 0.0 {
                    col.push(s0);
                }
                crate::quad::sort_dedup(&mut col);
                col.into_iter().map(move |s| (j, s))
            })
            .collect();
        let unit_cfg = QuadratureConfig { c_alpha: 1.0, ..*cfg };
        let points: Vec<Result<(usize, UnitPoint)>> = jobs
            .par_iter()
            .map(|&(j, s)| {
                let m = ModulusParams::new(1.0, 1.0, beta, s0s[j])?;
                unit_point(&m, eq, s, &unit_cfg).map(|p| (j, p))
            })
            .collect();
        let mut columns: Vec<UnitColumn> = s0s
            .iter()
            .map(|&s0| UnitColumn {
                s0,
                points: Vec::new(),
            })
            .collect();
        for p in points {
            let (j, p) = p?;
            columns[j].points.push(p);
        }
        Ok(Self {
            kind: eq.kind,
            alpha: eq.alpha,
            beta,
            gamma: eq.gamma,
            columns,
        })
    }

    pub fn len(&self) -> usize {
        self.columns.iter().map(|c| c.points.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn stationary(&self) -> &UnitColumn {
        self.columns.last().expect("grid always contains the stationary member")
    }

    /// Least-squares slope of `log(Ω̂ŵ'/(-D̂))` against `log s` over the lowest
    /// decade of the stationary member. A negative slope means the velocity
    /// term eventually beats dissipation as `ξ → 0`, whatever `C₁` is.
    pub fn small_scale_trend(&self) -> f64 {
        let pts = &self.stationary().points;
        let lo = pts[0].s;
        let sel: Vec<(f64, f64)> = pts
            .iter()
            .filter(|p| p.s <= 10.0 * lo && p.nonlinear > 0.0 && p.dissipation < 0.0)
            .map(|p| (p.s.ln(), (p.nonlinear / -p.dissipation).ln()))
            .collect();
        if sel.len() < 2 {
            return 0.0;
        }
        let n = sel.len() as f64;
        let mx = sel.iter().map(|p| p.0).sum::<f64>() / n;
        let my = sel.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = sel.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = sel.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        sxy / sxx
    }
}

fn unit_point(m: &ModulusParams, eq: &EquationParams, s: f64, cfg: &QuadratureConfig) -> Result<UnitPoint> {
    let w = m.value(s);
    let slope = m.slope(s, Side::Left).max(m.slope(s, Side::Right));
    let curvature = m.curvature(s, Side::Left).max(m.curvature(s, Side::Right));
    let tau = if m.xi0 > 0.0 {
        -m.xi0.powf(1.0 - 2.0 * eq.alpha) * m.d_xi0(s)
    } else {
        0.0
    };
    let omega = match eq.kind {
        EquationKind::ModifiedSqg => omega_bound_msqg(m, eq.gamma, s, 1.0, cfg.rel_tol)?,
        _ => w,
    };
    let parts = d_alpha_parts(m, eq.alpha, s, cfg)?;
    Ok(UnitPoint {
        s,
        w,
        slope,
        curvature,
        tau,
        nonlinear: omega * slope,
        dissipation: parts.near + parts.far,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CheckOptions {
    /// Bound on `‖θ‖∞`; points with `ω > 2‖θ‖∞` are exempt.
    pub theta_sup: f64,
    /// Drop the `2ε∂²ω` term (it is never positive for concave `ω`).
    pub ignore_eps: bool,
    pub quadrature: QuadratureConfig,
}

impl Default for CheckOptions {
    fn default() -> Self {
        Self {
            theta_sup: f64::INFINITY,
            ignore_eps: false,
            quadrature: QuadratureConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CriterionPoint {
    pub xi: f64,
    pub t: f64,
    pub xi0: f64,
    pub dt_omega: f64,
    pub nonlinear: f64,
    pub dissipation: f64,
    pub viscous: f64,
    pub margin: f64,
    /// `margin / (sum of |terms|)`.
    pub relative_margin: f64,
    /// SQG only: `1 - Aξ^{2α}∂ξω`, the weight of `D⊥` in the margin. A
    /// negative value means the perpendicular dissipation cannot pay for its
    /// own contribution to `Ω`.
    pub perp_weight: f64,
    pub included: bool,
    pub passed: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriterionReport {
    pub constants: CriterionConstants,
    #[serde(rename = "H")]
    pub h: f64,
    pub delta: f64,
    pub beta: f64,
    pub extinction_time: f64,
    /// Whether `H ≤ C₁ δ^{exponent}` holds.
    pub size_ok: bool,
    pub points: Vec<CriterionPoint>,
    pub worst: Option<CriterionPoint>,
    pub passed: bool,
    pub failure: Option<String>,
}

impl CriterionReport {
    pub fn worst_margin(&self) -> f64 {
        self.worst.map_or(f64::INFINITY, |p| p.relative_margin)
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "xi", "t", "xi0", "dt_omega", "nonlinear", "dissipation", "viscous", "margin", "included",
        ])?;
        for p in &self.points {
            out.write_record(&[
                p.xi.to_string(),
                p.t.to_string(),
                p.xi0.to_string(),
                p.dt_omega.to_string(),
                p.nonlinear.to_string(),
                p.dissipation.to_string(),
                p.viscous.to_string(),
                p.margin.to_string(),
                p.included.to_string(),
            ])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Evaluates the margins of a built table for concrete `(H, δ, C₂)`.
pub fn evaluate(
    table: &CriterionTable,
    eq: &EquationParams,
    h: f64,
    delta: f64,
    consts: &CriterionConstants,
    opts: &CheckOptions,
    stationary_only: bool,
) -> Result<CriterionReport> {
    consts.check()?;
    if eq.kind != table.kind || eq.alpha != table.alpha || eq.gamma != table.gamma {
        return Err(Error::Argument("table was built for different equation parameters".into()));
    }
    let alpha = eq.alpha;
    let two_a = 2.0 * alpha;
    let k = h / delta.powf(eq.size_exponent());
    let a = match eq.kind {
        EquationKind::Burgers => 1.0,
        _ => eq.a,
    };
    let c_alpha = opts.quadrature.c_alpha;
    let eps = if opts.ignore_eps { 0.0 } else { eq.epsilon * delta.powf(two_a - 2.0) };
    let unit = h * delta.powf(-two_a);
    let sup_unit = 2.0 * opts.theta_sup / h;
    let t_ext = delta.powf(two_a) / (two_a * consts.c2);
    let cols: Vec<&UnitColumn> = if stationary_only {
        vec![table.stationary()]
    } else {
        table.columns.iter().collect()
    };
    let mut points = Vec::with_capacity(cols.iter().map(|c| c.points.len()).sum());
    for col in cols {
        let t = if col.s0 == 0.0 {
            t_ext
        } else {
            time_of_xi0(consts.c2, alpha, delta, delta * col.s0)
        };
        for p in &col.points {
            let dt = consts.c2 * p.tau;
            let nl = k * a * p.nonlinear;
            let d = c_alpha * p.dissipation;
            let visc = 2.0 * eps * p.curvature;
            let margin = dt - nl - d - visc;
            let scale = dt.abs() + nl.abs() + d.abs() + visc.abs();
            let perp_weight = if eq.kind == EquationKind::Sqg {
                1.0 - a * k * p.s.powf(two_a) * p.slope
            } else {
                1.0
            };
            let included = p.w <= sup_unit;
            let passed = !included || (margin > consts.margin_tol * scale && perp_weight >= 0.0);
            points.push(CriterionPoint {
                xi: delta * p.s,
                t,
                xi0: delta * col.s0,
                dt_omega: unit * dt,
                nonlinear: unit * nl,
                dissipation: unit * d,
                viscous: unit * visc,
                margin: unit * margin,
                relative_margin: if scale > 0.0 { margin / scale } else { 0.0 },
                perp_weight,
                included,
                passed,
            });
        }
    }
    let worst = points
        .iter()
        .filter(|p| p.included)
        .copied()
        .min_by(|a, b| {
            // failing points first, then by relative margin
            (a.passed, a.relative_margin.min(a.perp_weight))
                .partial_cmp(&(b.passed, b.relative_margin.min(b.perp_weight)))
                .unwrap_or(std::cmp::Ordering::Equal)
        });
    let mut failure = None;
    if let Some(w) = worst.filter(|w| !w.passed) {
        failure = Some(if w.perp_weight < 0.0 {
            format!("perpendicular dissipation weight negative at xi = {:.4e}, t = {:.4e}", w.xi, w.t)
        } else {
            format!(
                "inequality violated at xi = {:.4e}, t = {:.4e} (relative margin {:.3e})",
                w.xi, w.t, w.relative_margin
            )
        });
    }
    let exp = eq.size_exponent();
    Ok(CriterionReport {
        constants: *consts,
        h,
        delta,
        beta: table.beta,
        extinction_time: t_ext,
        size_ok: h <= consts.c1 * delta.powf(exp) * (1.0 + 1e-12),
        passed: failure.is_none(),
        points,
        worst,
        failure,
    })
}

/// Checks the inequality for the family generated by `base` (its `H`, `δ`,
/// `β`; `ξ₀` is driven by `C₂`).
pub fn check_keyineq(
    eq: &EquationParams,
    base: &ModulusParams,
    consts: &CriterionConstants,
    grid: &GridSpec,
    opts: &CheckOptions,
) -> Result<CriterionReport> {
    base.check()?;
    let table = CriterionTable::build(eq, base.beta, grid, &opts.quadrature)?;
    evaluate(&table, eq, base.h, base.delta, consts, opts, false)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SearchConfig {
    /// Bisection stops once `hi/lo` is below this factor.
    pub factor: f64,
    /// Smallest constant tried before giving up.
    pub floor: f64,
    /// Values of `δ` the constants must work for (only matters for `ε > 0`).
    pub deltas: Vec<f64>,
    pub options: CheckOptions,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            factor: 1.05,
            floor: 1e-8,
            deltas: vec![0.1, 1.0, 3.0],
            options: CheckOptions {
                ignore_eps: true,
                ..CheckOptions::default()
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SearchOutcome {
    pub found: bool,
    pub constants: Option<CriterionConstants>,
    /// Report at the returned constants for the largest tested `δ`.
    pub report: Option<CriterionReport>,
    pub small_scale_trend: f64,
    pub failure: Option<String>,
}

/// Largest `x` in `[floor, ∞)` with `ok(x)` (to within `factor`), assuming
/// `ok` is monotone: true below some threshold, false above.
fn bisect_largest<F: FnMut(f64) -> Result<bool>>(mut ok: F, factor: f64, floor: f64) -> Result<Option<f64>> {
    let (mut lo, mut hi);
    let mut x = 1.0;
    if ok(x)? {
        lo = x;
        loop {
            x *= 4.0;
            if x > 1e12 {
                return Ok(Some(lo));
            }
            if !ok(x)? {
                hi = x;
                break;
            }
            lo = x;
        }
    } else {
        hi = x;
        loop {
            x /= 4.0;
            if x < floor {
                return Ok(None);
            }
            if ok(x)? {
                lo = x;
                break;
            }
            hi = x;
        }
    }
    while hi / lo > factor {
        let mid = (lo * hi).sqrt();
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}

/// Searches `C₁` on the stationary member, then `C₂` on the moving family.
/// If the moving family fails even for the smallest `C₂`, `C₁` is reduced.
pub fn find_constants(eq: &EquationParams, beta: f64, grid: &GridSpec, search: &SearchConfig) -> Result<SearchOutcome> {
    let table = CriterionTable::build(eq, beta, grid, &search.options.quadrature)?;
    find_constants_with(&table, eq, search)
}

pub fn find_constants_with(table: &CriterionTable, eq: &EquationParams, search: &SearchConfig) -> Result<SearchOutcome> {
    if !(search.factor > 1.0) || !(search.floor > 0.0) {
        return validation("search factor must exceed 1 and floor must be positive");
    }
    let deltas: Vec<f64> = if search.options.ignore_eps || eq.epsilon == 0.0 || search.deltas.is_empty() {
        vec![search.deltas.iter().copied().fold(1.0, f64::max)]
    } else {
        search.deltas.clone()
    };
    let trend = table.small_scale_trend();
    let fail = |msg: String| SearchOutcome {
        found: false,
        constants: None,
        report: None,
        small_scale_trend: trend,
        failure: Some(msg),
    };
    if trend < -1e-3 {
        return Ok(fail(format!(
            "binding at small xi: velocity/dissipation ratio grows like xi^{trend:.3} as xi -> 0"
        )));
    }
    let exp = eq.size_exponent();
    let passes = |c1: f64, c2: f64, stationary: bool| -> Result<bool> {
        let consts = CriterionConstants {
            c1,
            c2,
            margin_tol: default_margin_tol(),
        };
        for &d in &deltas {
            let r = evaluate(table, eq, c1 * d.powf(exp), d, &consts, &search.options, stationary)?;
            if !r.passed {
                return Ok(false);
            }
        }
        Ok(true)
    };
    let Some(mut c1) = bisect_largest(|c| passes(c, 1.0, true), search.factor, search.floor)? else {
        return Ok(fail("no C1 passes on the stationary family".into()));
    };
    let c2 = loop {
        if let Some(c2) = bisect_largest(|c| passes(c1, c, false), search.factor, search.floor)? {
            break c2;
        }
        c1 /= search.factor;
        if c1 < search.floor {
            return Ok(fail("no C2 passes on the moving family".into()));
        }
    };
    let consts = CriterionConstants {
        c1,
        c2,
        margin_tol: default_margin_tol(),
    };
    let d = *deltas.last().expect("nonempty");
    let report = evaluate(table, eq, c1 * d.powf(exp), d, &consts, &search.options, false)?;
    Ok(SearchOutcome {
        found: report.passed,
        constants: Some(consts),
        failure: report.failure.clone(),
        report: Some(report),
        small_scale_trend: trend,
    })
}
