//! Empirical moduli of continuity, Hölder seminorms, breakthrough detection
//! and the eventual-regularization experiment.
//!
//! Pair statistics are collected per lattice separation: for every squared
//! lattice distance `a² + b²` the largest `|θ(x) - θ(y)|` seen and the pair
//! attaining it. In 1D every pair is visited. In 2D all axis-aligned pairs
//! are visited and, in each separation shell, a seeded random sample of
//! other offsets.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::criterion::{xi0_solve, CriterionConstants};
use crate::error::{validation, Result};
use crate::field::{ScalarField, TWO_PI};
use crate::moduli::{Modulus, ModulusParams};
use crate::solver::{run, SimConfig, StepRecord};

/// A pair of points `x, y` with `θ(x) - θ(y)` compared against `ω(|x-y|)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BreakthroughPair {
    pub x: [f64; 2],
    pub y: [f64; 2],
    pub separation: f64,
    /// Unit vector `(x - y)/ξ`, using the minimal periodic image.
    pub direction: [f64; 2],
    pub midpoint: [f64; 2],
    /// `ω(ξ) - (θ(x) - θ(y))`.
    pub margin: f64,
}

impl BreakthroughPair {
    /// Builds the pair geometry; with `period = Some(L)` coordinates are
    /// taken on the torus of side `L` and the shortest image of `x - y` is used.
    pub fn new(x: [f64; 2], y: [f64; 2], period: Option<f64>) -> Self {
        let mut d = [x[0] - y[0], x[1] - y[1]];
        if let Some(l) = period {
            for c in &mut d {
                *c -= l * (*c / l).round();
            }
        }
        let sep = d[0].hypot(d[1]);
        let direction = if sep > 0.0 {
            [d[0] / sep, d[1] / sep]
        } else {
            [1.0, 0.0]
        };
        Self {
            x,
            y,
            separation: sep,
            direction,
            midpoint: [y[0] + 0.5 * d[0], y[1] + 0.5 * d[1]],
            margin: f64::NAN,
        }
    }

    pub fn with_margin(mut self, margin: f64) -> Self {
        self.margin = margin;
        self
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplingConfig {
    /// Random pairs per separation shell (2D only).
    pub samples_per_shell: usize,
    pub seed: u64,
    /// Separations below this many grid cells are not resolved and are
    /// excluded from margins and seminorms.
    pub min_cells: f64,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self {
            samples_per_shell: 100_000,
            seed: 0,
            min_cells: 4.0,
        }
    }
}

#[derive(Clone, Copy, Debug)]
struct Extreme {
    diff: f64,
    hi: usize,
    lo: usize,
}

/// Largest increment per squared lattice distance.
#[derive(Clone, Debug)]
pub struct SeparationProfile {
    dim: usize,
    n: usize,
    entries: Vec<(u64, Extreme)>,
}

fn record(map: &mut HashMap<u64, Extreme>, key: u64, a: usize, b: usize, va: f64, vb: f64) {
    let (diff, hi, lo) = if va >= vb { (va - vb, a, b) } else { (vb - va, b, a) };
    let e = map.entry(key).or_insert(Extreme { diff: -1.0, hi, lo });
    if diff > e.diff {
        *e = Extreme { diff, hi, lo };
    }
}

impl SeparationProfile {
    pub fn scan(theta: &ScalarField, cfg: &SamplingConfig) -> Self {
        let (dim, n) = (theta.dim(), theta.n());
        let v = theta.values();
        let mut entries = Vec::new();
        if dim == 1 {
            for m in 1..=n / 2 {
                let mut best = Extreme { diff: -1.0, hi: 0, lo: 0 };
                for i in 0..n {
                    let j = (i + m) % n;
                    let d = v[j] - v[i];
                    if d.abs() > best.diff {
                        best = if d >= 0.0 {
                            Extreme { diff: d, hi: j, lo: i }
                        } else {
                            Extreme { diff: -d, hi: i, lo: j }
                        };
                    }
                }
                entries.push(((m * m) as u64, best));
            }
        } else {
            let mut map = HashMap::new();
            let idx = |i: usize, j: usize| (j % n) * n + i % n;
            for m in 1..=n / 2 {
                let key = (m * m) as u64;
                for j in 0..n {
                    for i in 0..n {
                        let p = idx(i, j);
                        let (qx, qy) = (idx(i + m, j), idx(i, j + m));
                        record(&mut map, key, qx, p, v[qx], v[p]);
                        record(&mut map, key, qy, p, v[qy], v[p]);
                    }
                }
            }
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            let half = (n / 2) as i64;
            let rmax = half as f64 * std::f64::consts::SQRT_2;
            let mut lo = 1.0f64;
            while lo < rmax {
                let hi = (lo * std::f64::consts::SQRT_2).min(rmax);
                for _ in 0..cfg.samples_per_shell {
                    let r = (lo * lo + rng.gen::<f64>() * (hi * hi - lo * lo)).sqrt();
                    let phi = rng.gen::<f64>() * TWO_PI;
                    let a = (r * phi.cos()).round() as i64;
                    let b = (r * phi.sin()).round() as i64;
                    if (a == 0 && b == 0) || a.abs() > half || b.abs() > half {
                        continue;
                    }
                    let (i, j) = (rng.gen_range(0..n), rng.gen_range(0..n));
                    let p = idx(i, j);
                    let q = idx(
                        (i as i64 + a).rem_euclid(n as i64) as usize,
                        (j as i64 + b).rem_euclid(n as i64) as usize,
                    );
                    record(&mut map, (a * a + b * b) as u64, q, p, v[q], v[p]);
                }
                lo = hi;
            }
            entries = map.into_iter().collect();
            entries.sort_by_key(|e| e.0);
        }
        Self { dim, n, entries }
    }

    fn dx(&self) -> f64 {
        TWO_PI / self.n as f64
    }

    fn point(&self, idx: usize) -> [f64; 2] {
        let h = self.dx();
        if self.dim == 1 {
            [idx as f64 * h, 0.0]
        } else {
            [(idx % self.n) as f64 * h, (idx / self.n) as f64 * h]
        }
    }

    /// `(separation, largest increment)` in increasing separation.
    pub fn increments(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        let h = self.dx();
        self.entries.iter().map(move |(k, e)| ((*k as f64).sqrt() * h, e.diff))
    }

    fn resolved(&self, min_cells: f64) -> impl Iterator<Item = &(u64, Extreme)> {
        let k0 = min_cells * min_cells;
        self.entries.iter().filter(move |(k, _)| *k as f64 >= k0 - 1e-9)
    }

    /// `min (ω(ξ) - |θ(x) - θ(y)|)` over resolved separations, with its pair.
    pub fn margin<M: Modulus + ?Sized>(&self, omega: &M, min_cells: f64) -> Option<BreakthroughPair> {
        let h = self.dx();
        self.resolved(min_cells)
            .map(|(k, e)| (omega.value((*k as f64).sqrt() * h) - e.diff, e))
            .min_by(|a, b| a.0.total_cmp(&b.0))
            .map(|(m, e)| BreakthroughPair::new(self.point(e.hi), self.point(e.lo), Some(TWO_PI)).with_margin(m))
    }

    /// `max |θ(x) - θ(y)| / |x - y|^β` over resolved separations.
    pub fn holder(&self, beta: f64, min_cells: f64) -> f64 {
        let h = self.dx();
        self.resolved(min_cells)
            .map(|(k, e)| e.diff / ((*k as f64).sqrt() * h).powf(beta))
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ModulusBin {
    pub lo: f64,
    pub hi: f64,
    /// Largest increment over pairs with separation in `[lo, hi)`; `NaN` if none.
    pub max_increment: f64,
}

/// Largest increment per separation bin; `edges` must be increasing.
pub fn empirical_modulus(theta: &ScalarField, edges: &[f64], cfg: &SamplingConfig) -> Result<Vec<ModulusBin>> {
    if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) {
        return validation("bin edges must be increasing with at least two entries");
    }
    let prof = SeparationProfile::scan(theta, cfg);
    let mut bins: Vec<ModulusBin> = edges
        .windows(2)
        .map(|w| ModulusBin {
            lo: w[0],
            hi: w[1],
            max_increment: f64::NAN,
        })
        .collect();
    for (s, d) in prof.increments() {
        // a small relative slack so that exact lattice separations land in
        // the bin whose lower edge they equal
        let s = s * (1.0 + 1e-12);
        if let Some(b) = bins.iter_mut().find(|b| s >= b.lo && s < b.hi) {
            b.max_increment = if b.max_increment.is_nan() { d } else { b.max_increment.max(d) };
        }
    }
    Ok(bins)
}

/// Bin edges at every lattice separation `k·2π/n` for `k = 1..=n/2` (plus one).
pub fn lattice_edges(n: usize, dim: usize) -> Vec<f64> {
    let h = TWO_PI / n as f64;
    let top = if dim == 1 { n / 2 } else { n };
    (1..=top + 1).map(|k| (k as f64 - 0.5) * h).collect()
}

/// Minimum of `ω(|x-y|) - (θ(x) - θ(y))` over sampled ordered pairs with
/// resolved separation, and the pair attaining it.
pub fn breakthrough_margin<M: Modulus + ?Sized>(
    theta: &ScalarField,
    omega: &M,
    cfg: &SamplingConfig,
) -> Option<BreakthroughPair> {
    SeparationProfile::scan(theta, cfg).margin(omega, cfg.min_cells)
}

pub fn holder_seminorm(theta: &ScalarField, beta: f64, cfg: &SamplingConfig) -> f64 {
    SeparationProfile::scan(theta, cfg).holder(beta, cfg.min_cells)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentRecord {
    pub t: f64,
    pub sup_norm: f64,
    /// Seminorms keyed by the exponent (formatted as text for JSON).
    pub holder: BTreeMap<String, f64>,
    pub xi0: f64,
    /// Minimum breakthrough margin against `ω(·, ξ₀(t))`.
    pub margin: f64,
    pub pair: Option<BreakthroughPair>,
    pub energy: f64,
    pub max_gradient: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentOptions {
    pub sampling: SamplingConfig,
    /// Exponents at which Hölder seminorms are recorded (the modulus exponent
    /// is always included).
    pub holder_betas: Vec<f64>,
    /// Allowed excess of the seminorm over `H/δ^β` after the extinction time.
    pub seminorm_tol: f64,
}

impl Default for ExperimentOptions {
    fn default() -> Self {
        Self {
            sampling: SamplingConfig::default(),
            holder_betas: Vec::new(),
            seminorm_tol: 0.05,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentOutcome {
    pub verdict: Verdict,
    pub reasons: Vec<String>,
    /// `δ^{2α}/(2αC₂)`.
    pub extinction_time: f64,
    /// `H/δ^β`.
    pub holder_bound: f64,
    pub min_margin_before_extinction: f64,
    pub min_margin_after_extinction: f64,
    pub max_seminorm_after_extinction: f64,
    pub blow_up: Option<(f64, String)>,
    /// 2D only: final margin with the sample size doubled.
    pub doubled_sample_margin: Option<f64>,
    pub records: Vec<ExperimentRecord>,
}

fn beta_key(b: f64) -> String {
    format!("{b}")
}

/// Runs the solver from `theta0` and checks, at every record, the margin
/// against `ω(ξ, ξ₀(t))` and the Hölder seminorm at `β`.
pub fn regularization_experiment(
    cfg: &SimConfig,
    theta0: &ScalarField,
    base: &ModulusParams,
    consts: &CriterionConstants,
    opts: &ExperimentOptions,
) -> Result<ExperimentOutcome> {
    base.check()?;
    consts.check()?;
    let alpha = cfg.eq.alpha;
    let t_ext = xi0_solve(consts.c2, alpha, base.delta, 0.0)?.extinction_time;
    let bound = base.holder_constant();
    let mut betas = opts.holder_betas.clone();
    if !betas.contains(&base.beta) {
        betas.push(base.beta);
    }
    let mut records = Vec::new();
    let samp = opts.sampling;
    let out = run(theta0, cfg, |rec: &StepRecord, f: &ScalarField| {
        let x0 = xi0_solve(consts.c2, alpha, base.delta, rec.t)?.xi0;
        let m = base.with_xi0(x0);
        let prof = SeparationProfile::scan(f, &samp);
        let pair = prof.margin(&m, samp.min_cells);
        records.push(ExperimentRecord {
            t: rec.t,
            sup_norm: rec.sup_norm,
            holder: betas
                .iter()
                .map(|&b| (beta_key(b), prof.holder(b, samp.min_cells)))
                .collect(),
            xi0: x0,
            margin: pair.map_or(f64::INFINITY, |p| p.margin),
            pair,
            energy: rec.energy,
            max_gradient: rec.max_gradient,
        });
        Ok(())
    })?;
    let slack = 1e-12 * base.h;
    let before = records
        .iter()
        .filter(|r| r.t <= t_ext)
        .map(|r| r.margin)
        .fold(f64::INFINITY, f64::min);
    let after_records: Vec<&ExperimentRecord> = records.iter().filter(|r| r.t >= t_ext).collect();
    let after = after_records.iter().map(|r| r.margin).fold(f64::INFINITY, f64::min);
    let key = beta_key(base.beta);
    let semi = after_records
        .iter()
        .map(|r| r.holder[&key])
        .fold(f64::NEG_INFINITY, f64::max);
    let mut reasons = Vec::new();
    let mut verdict = Verdict::Pass;
    if let Some((t, msg)) = &out.blow_up {
        verdict = Verdict::Inconclusive;
        reasons.push(format!("solver blow-up at t = {t}: {msg}"));
    }
    if before < -slack {
        verdict = Verdict::Fail;
        reasons.push(format!("modulus broken before the extinction time (margin {before:.3e})"));
    }
    if after < -slack {
        verdict = Verdict::Fail;
        reasons.push(format!("modulus broken after the extinction time (margin {after:.3e})"));
    }
    if after_records.is_empty() {
        if verdict == Verdict::Pass {
            verdict = Verdict::Inconclusive;
        }
        reasons.push("run ended before the extinction time".into());
    } else if semi > bound * (1.0 + opts.seminorm_tol) {
        verdict = Verdict::Fail;
        reasons.push(format!("C^beta seminorm {semi:.4e} exceeds {bound:.4e} after the extinction time"));
    }
    let doubled_sample_margin = match (&out.final_field, theta0.dim()) {
        (Some(f), 2) => {
            let t_last = records.last().map_or(0.0, |r| r.t);
            let m = base.with_xi0(xi0_solve(consts.c2, alpha, base.delta, t_last)?.xi0);
            let more = SamplingConfig {
                samples_per_shell: 2 * samp.samples_per_shell,
                seed: samp.seed.wrapping_add(1),
                ..samp
            };
            let dm = breakthrough_margin(f, &m, &more).map_or(f64::INFINITY, |p| p.margin);
            let last = records.last().map_or(f64::INFINITY, |r| r.margin);
            if (dm < -slack) != (last < -slack) {
                reasons.push("doubling the pair sample changes the sign of the final margin".into());
                if verdict == Verdict::Pass {
                    verdict = Verdict::Inconclusive;
                }
            }
            Some(dm)
        }
        _ => None,
    };
    Ok(ExperimentOutcome {
        verdict,
        reasons,
        extinction_time: t_ext,
        holder_bound: bound,
        min_margin_before_extinction: before,
        min_margin_after_extinction: after,
        max_seminorm_after_extinction: semi,
        blow_up: out.blow_up,
        doubled_sample_margin,
        records,
    })
}
