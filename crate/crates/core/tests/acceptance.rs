//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

mod common;

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use nlmp::analysis::{
    breakthrough_margin, regularization_experiment, BreakthroughPair, ExperimentOptions, SamplingConfig, Verdict,
};
use nlmp::criterion::{
    evaluate, find_constants, find_constants_with, xi0_solve, CriterionConstants, CriterionTable, GridSpec,
    SearchConfig, SearchOutcome,
};
use nlmp::dissipation::{d_alpha, d_perp, kernel_1d, kernel_2d, QuadratureConfig};
use nlmp::field::ScalarField;
use nlmp::moduli::{Modulus, ModulusParams, Piece, PiecewiseModulus};
use nlmp::solver::{initial_field, run, velocity_from_theta, InitialData, Integrator, SimConfig};
use nlmp::velocity::{
    far_field_average, omega_bound_sqg, omega_bound_sqg_general, verify_ll23, verify_ll43, EquationParams,
    PerpSource,
};

type Outcome = (bool, String);

fn worst(acc: &mut f64, v: f64) {
    if v.is_nan() || v > *acc {
        *acc = v;
    }
}

/// D_α ≤ 1e-12·ω(ξ)ξ^{-2α} for random concave moduli.
fn nonpositive_dissipation() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let cfg = QuadratureConfig::default();
    let xis = common::log_grid(1e-4, 1e2, 50);
    let mut max_rel = f64::NEG_INFINITY;
    let mut count = 0;
    for _ in 0..200 {
        let m = PiecewiseModulus::random_concave(&mut rng);
        for alpha in [0.1, 0.25, 0.4] {
            for &xi in &xis {
                let d = match d_alpha(&m, alpha, xi, &cfg) {
                    Ok(d) => d,
                    Err(e) => return (false, format!("quadrature error: {e}")),
                };
                worst(&mut max_rel, d / (m.value(xi) * xi.powf(-2.0 * alpha)));
                count += 1;
            }
        }
    }
    let t = start.elapsed();
    (
        max_rel <= 1e-12 && t < Duration::from_secs(60),
        format!("{count} evaluations, max D/scale = {max_rel:.2e} (tol 1e-12), {:.1}s (limit 60s)", t.as_secs_f64()),
    )
}

/// D_α(λξ) = λ^{β-2α} D_α(ξ) for ω = ξ^β, with D_α(ξ) itself checked against brute force.
fn scaling_law() -> Outcome {
    let cfg = QuadratureConfig::default();
    let (mut scale_err, mut oracle_err) = (0.0f64, 0.0f64);
    for alpha in [0.1, 0.25, 0.4] {
        for beta in [0.3, 0.6] {
            let m = PiecewiseModulus::power_law(beta);
            let xi = 0.3;
            let d1 = d_alpha(&m, alpha, xi, &cfg).unwrap();
            let brute = common::power_law_d_alpha(alpha, beta, xi);
            worst(&mut oracle_err, ((d1 - brute) / brute).abs());
            for lam in [2.0, 10.0] {
                let d2 = d_alpha(&m, alpha, lam * xi, &cfg).unwrap();
                let want = lam.powf(beta - 2.0 * alpha) * d1;
                worst(&mut scale_err, ((d2 - want) / want).abs());
            }
        }
    }
    (
        scale_err < 1e-6 && oracle_err < 1e-6,
        format!("scaling rel err {scale_err:.2e}, brute-force rel err {oracle_err:.2e} (tol 1e-6)"),
    )
}

fn closed_forms() -> Outcome {
    let cfg = QuadratureConfig::default();
    let mut const_err = 0.0f64;
    let h = 0.7;
    let constant = PiecewiseModulus::single(Piece::constant(h));
    for alpha in [0.1, 0.25, 0.4, 0.75] {
        for xi in [1e-3, 0.3, 2.0, 40.0] {
            let d = d_alpha(&constant, alpha, xi, &cfg).unwrap();
            let want = -2.0 * h * (0.5 * xi).powf(-2.0 * alpha) / (2.0 * alpha);
            worst(&mut const_err, ((d - want) / want).abs());
        }
    }
    let mut lin_err = 0.0f64;
    let linear = PiecewiseModulus::single(Piece::Linear {
        slope: 1.3,
        intercept: 0.0,
    });
    for alpha in [0.1, 0.25, 0.4] {
        for xi in [0.01, 0.5, 3.0] {
            worst(&mut lin_err, d_alpha(&linear, alpha, xi, &cfg).unwrap().abs());
        }
    }
    let mut kern_err = 0.0f64;
    for x in [0.0, 0.1, 0.7, 2.0, 5.0] {
        let cases = [
            (kernel_1d(1.0, x), (-x * x / 4.0f64).exp() / (4.0 * PI).sqrt()),
            (kernel_1d(0.5, x), 1.0 / (PI * (1.0 + x * x))),
            (kernel_2d(1.0, x), (-x * x / 4.0f64).exp() / (4.0 * PI)),
            (kernel_2d(0.5, x), (1.0 + x * x).powf(-1.5) / (2.0 * PI)),
        ];
        for (got, want) in cases {
            worst(&mut kern_err, (got.unwrap() - want).abs() / want.max(1e-3));
        }
    }
    (
        const_err < 1e-8 && lin_err < 1e-10 && kern_err < 1e-8,
        format!(
            "constant rel err {const_err:.1e} (1e-8), linear |D| {lin_err:.1e} (1e-10), kernels {kern_err:.1e} (1e-8)"
        ),
    )
}

fn lemma_grid() -> (Vec<f64>, Vec<f64>) {
    (common::log_grid(1e-4, 10.0, 100), common::log_grid(1e-3, 1.0, 20))
}

fn far_field_suite() -> Outcome {
    let (xis, xi0s) = lemma_grid();
    let mut ok = true;
    let (mut exact_err, mut oracle_err, mut slack) = (0.0f64, 0.0f64, f64::INFINITY);
    for beta in [0.3, 0.6] {
        let base = ModulusParams::stationary(1.0, 1.0, beta).unwrap();
        let r = verify_ll23(&base, &xis, &xi0s, 1e-8).unwrap();
        ok &= r.passed && r.rows.len() == 2000;
        slack = slack.min(r.worst_slack);
        for row in &r.rows {
            let m = base.with_xi0(row.xi0);
            let want = common::family_far_field(&m, row.xi) / m.value(row.xi);
            worst(&mut oracle_err, (row.ratio - want).abs() / want);
            if row.xi >= 1.0 {
                worst(&mut exact_err, (row.ratio - 1.0).abs());
            }
        }
    }
    (
        ok && exact_err < 1e-8 && oracle_err < 1e-8,
        format!(
            "bounds hold on 2x100x20 grid (min slack {slack:.3}); |ratio-1| for xi>=delta {exact_err:.1e}; closed form {oracle_err:.1e} (tol 1e-8)"
        ),
    )
}

fn velocity_bound_suite() -> Outcome {
    let (xis, xi0s) = lemma_grid();
    let mut ok = true;
    let mut lines = Vec::new();
    for gamma in [0.6, 0.75] {
        for beta in [0.3, 0.6] {
            if beta >= 2.0 - 2.0 * gamma {
                continue;
            }
            let p = 2.0 - 2.0 * gamma;
            let c = 1.0 / (2.0 * gamma - 1.0) + 1.0 / (p * (1.0 - beta)) + 1.0 / ((p - beta) * (1.0 - beta));
            let base = ModulusParams::stationary(1.0, 1.0, beta).unwrap();
            let r = verify_ll43(&base, gamma, 1.0, &xis, &xi0s, 1e-9).unwrap();
            let max_ratio = r.rows.iter().fold(0.0f64, |m, row| m.max(row.ratio));
            let fits = r.rows.iter().all(|row| (row.bound - c).abs() < 1e-12 * c);
            ok &= r.passed && fits && max_ratio <= c && r.rows.len() == 2000;
            lines.push(format!("g={gamma} b={beta}: max ratio {max_ratio:.3} <= C {c:.3}"));
        }
    }
    (ok, lines.join("; "))
}

fn extinction_ode() -> Outcome {
    let mut err = 0.0f64;
    for alpha in [0.1, 0.25, 0.4] {
        for c2 in [0.5, 1.0, 2.0] {
            let big_t = 1.0 / (2.0 * alpha * c2);
            let f = |_: f64, y: f64| -c2 * y.max(0.0).powf(1.0 - 2.0 * alpha);
            let (mut t0, mut y0) = (0.0, 1.0);
            for i in 1..=20 {
                let t = 0.95 * big_t * i as f64 / 20.0;
                let y = common::rk4_adaptive(f, t0, y0, t, 1e-12);
                let exact = xi0_solve(c2, alpha, 1.0, t).unwrap();
                worst(&mut err, ((exact.xi0 - y) / y).abs());
                worst(&mut err, ((exact.extinction_time - big_t) / big_t).abs());
                (t0, y0) = (t, y);
            }
        }
    }
    (err < 1e-8, format!("max rel err {err:.2e} over 9x20 samples (tol 1e-8)"))
}

fn search(eq: &EquationParams, beta: f64, grid: &GridSpec) -> SearchOutcome {
    find_constants(eq, beta, grid, &SearchConfig::default()).unwrap()
}

fn constant_search() -> Outcome {
    let start = Instant::now();
    let grid = GridSpec::default();
    let fine = grid.doubled();
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, eq, beta) in [
        ("Burgers b=0.6", EquationParams::burgers(0.25, 0.0), 0.6),
        ("mSQG g=0.75 a=0.2 b=0.3", EquationParams::modified_sqg(0.2, 0.75, 0.0), 0.3),
    ] {
        let out = search(&eq, beta, &grid);
        let Some(c) = out.constants.filter(|_| out.found) else {
            ok = false;
            parts.push(format!("{name}: not found ({:?})", out.failure));
            continue;
        };
        let report = out.report.as_ref().unwrap();
        let positive = report.points.iter().filter(|p| p.included).all(|p| p.margin > 0.0);
        // The verdict under doubling is the outcome of a fresh search. The
        // found constants are also re-checked there; bisection leaves them
        // within the search factor of the feasibility edge, so that recheck
        // is reported, not required.
        let delta = *SearchConfig::default().deltas.last().unwrap();
        let opts = SearchConfig::default().options;
        let table = CriterionTable::build(&eq, beta, &fine, &opts.quadrature).unwrap();
        let h = c.c1 * delta.powf(eq.size_exponent());
        let recheck = evaluate(&table, &eq, h, delta, &c, &opts, false).unwrap();
        let again = find_constants_with(&table, &eq, &SearchConfig::default()).unwrap();
        ok &= positive && again.found;
        let fine_c = again.constants.map_or((f64::NAN, f64::NAN), |k| (k.c1, k.c2));
        parts.push(format!(
            "{name}: C1={:.4} C2={:.4}; doubled grid {} with C1={:.4} C2={:.4} (same constants: worst rel margin {:.1e})",
            c.c1,
            c.c2,
            if again.found { "found" } else { "NOT found" },
            fine_c.0,
            fine_c.1,
            recheck.worst_margin()
        ));
    }
    let eq = EquationParams::burgers(0.25, 0.0);
    for (label, g) in [("grid", &grid), ("doubled", &fine)] {
        let out = search(&eq, 0.4, g);
        let binding = !out.found && out.failure.as_deref().is_some_and(|f| f.contains("small xi"));
        ok &= binding;
        parts.push(format!(
            "Burgers b=0.4 ({label}): {} (trend {:.3})",
            if binding { "fails at small xi" } else { "UNEXPECTED" },
            out.small_scale_trend
        ));
    }
    let t = start.elapsed();
    ok &= t < Duration::from_secs(300);
    parts.push(format!("{:.0}s (limit 300s)", t.as_secs_f64()));
    (ok, parts.join("; "))
}

fn solver_correctness() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;

    let mut decay_err = 0.0f64;
    for (eq, k) in [
        (EquationParams::burgers(0.3, 1e-3), [3i64, 0]),
        (EquationParams::sqg(0.3, 1e-3), [2, -1]),
    ] {
        let mut cfg = SimConfig::new(eq, 32, 0.013, 0.5);
        cfg.transport = false;
        let f0 = initial_field(&InitialData::SingleMode { amplitude: 1.0, k }, eq.dimension(), 32, 0).unwrap();
        let out = run(&f0, &cfg, |_, _| Ok(())).unwrap();
        let kk = (k[0] as f64).hypot(k[1] as f64);
        let g = (-(kk.powf(0.6) + 1e-3 * kk * kk) * 0.5f64).exp();
        let fin = out.final_field.unwrap();
        for (a, b) in fin.values().iter().zip(f0.values()) {
            worst(&mut decay_err, (a - g * b).abs());
        }
    }
    ok &= decay_err < 1e-10;
    parts.push(format!("linear decay {decay_err:.1e}"));

    let (mut mean_drift, mut sup_growth, mut div) = (0.0f64, f64::NEG_INFINITY, 0.0f64);
    for (i, eq) in [
        EquationParams::burgers(0.25, 1e-4),
        EquationParams::sqg(0.3, 1e-3),
        EquationParams::modified_sqg(0.2, 0.75, 1e-3),
    ]
    .into_iter()
    .enumerate()
    {
        let dim = eq.dimension();
        let n = if dim == 1 { 1024 } else { 64 };
        let f0 = initial_field(&InitialData::RandomBandLimited { sup: 1.0, k_max: 4 }, dim, n, i as u64).unwrap();
        let f0 = ScalarField::from_values(dim, n, f0.values().iter().map(|v| v + 0.3).collect()).unwrap();
        let mut cfg = SimConfig::new(eq, n, 2e-3, 0.3);
        cfg.record_every = 5;
        let out = run(&f0, &cfg, |_, f| {
            if dim == 2 {
                worst(&mut div, velocity_from_theta(f, &eq)?.relative_divergence());
            }
            Ok(())
        })
        .unwrap();
        for w in out.records.windows(2) {
            worst(&mut mean_drift, (w[1].mean - out.records[0].mean).abs());
            worst(&mut sup_growth, w[1].sup_norm - w[0].sup_norm);
        }
    }
    ok &= mean_drift < 1e-12 && div < 1e-12 && sup_growth <= 1e-6;
    parts.push(format!("mean drift {mean_drift:.1e}, divergence {div:.1e}, sup growth {sup_growth:.1e}"));

    let f0 = ScalarField::from_fn(1, 64, |p| 0.5 * p[0].sin() + 0.2 * (2.0 * p[0]).cos()).unwrap();
    for integrator in [Integrator::IntegratingFactorRk4, Integrator::Imex] {
        let solve = |dt: f64| {
            let mut cfg = SimConfig::new(EquationParams::burgers(0.25, 1e-3), 64, dt, 0.4);
            cfg.integrator = integrator;
            cfg.cfl = 1.0;
            run(&f0, &cfg, |_, _| Ok(())).unwrap().final_field.unwrap()
        };
        let reference = solve(0.04 / 64.0);
        let err = |dt: f64| {
            solve(dt)
                .values()
                .iter()
                .zip(reference.values())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
        };
        let (e1, e2, e3) = (err(0.04), err(0.02), err(0.01));
        let order = 0.5 * ((e1 / e2).log2() + (e2 / e3).log2());
        ok &= order >= 2.0;
        parts.push(format!("{integrator:?} order {order:.2}"));
    }
    (ok, parts.join("; "))
}

/// Constants for the simulation criteria, with the exact fractional-Laplacian normalization.
fn simulation_constants() -> Result<CriterionConstants, String> {
    let eq = EquationParams::burgers(0.25, 1e-4);
    let mut s = SearchConfig::default();
    s.options.quadrature = QuadratureConfig::for_fractional_laplacian(0.25);
    let out = find_constants(&eq, 0.6, &GridSpec::default(), &s).map_err(|e| e.to_string())?;
    match out.constants {
        Some(c) if out.found => Ok(c),
        _ => Err(format!("no constants: {:?}", out.failure)),
    }
}

fn preservation(c: &CriterionConstants) -> Outcome {
    let start = Instant::now();
    let eq = EquationParams::burgers(0.25, 1e-4);
    // δ = 1, H = C₁δ^{1-2α}
    let h = c.c1;
    let omega = ModulusParams::stationary(h, 1.0, 0.6).unwrap();
    let big_t = xi0_solve(c.c2, 0.25, 1.0, 0.0).unwrap().extinction_time;
    let f0 = ScalarField::from_fn(1, 4096, |p| 0.45 * h * p[0].sin()).unwrap();
    let mut cfg = SimConfig::new(eq, 4096, 1e-3, 2.0 * big_t);
    cfg.record_every = 20;
    let sampling = SamplingConfig::default();
    let mut min_margin = f64::INFINITY;
    let mut records = 0;
    let out = run(&f0, &cfg, |_, f| {
        let m = breakthrough_margin(f, &omega, &sampling).map_or(f64::INFINITY, |p| p.margin);
        min_margin = min_margin.min(m);
        records += 1;
        Ok(())
    })
    .unwrap();
    let t = start.elapsed();
    let ok = out.blow_up.is_none() && min_margin >= -1e-12 * h && t < Duration::from_secs(180);
    (
        ok,
        format!(
            "{records} records to t=2T={:.3}, min margin {min_margin:.3e} against stationary H={h:.4}, {:.0}s (limit 180s)",
            2.0 * big_t,
            t.as_secs_f64()
        ),
    )
}

fn eventual_regularization(c: &CriterionConstants) -> Outcome {
    let start = Instant::now();
    let eq = EquationParams::burgers(0.25, 1e-4);
    let base = ModulusParams::stationary(c.c1, 1.0, 0.6).unwrap();
    let big_t = xi0_solve(c.c2, 0.25, 1.0, 0.0).unwrap().extinction_time;
    let mut cfg = SimConfig::new(eq, 4096, 1e-3, 2.0 * big_t);
    cfg.record_every = 20;
    let mut ok = true;
    let mut parts = Vec::new();
    for s in [0.0, 0.1, 0.3] {
        let f0 = initial_field(
            &InitialData::Rough {
                sup: 0.5 * (1.0 - base.beta) * base.h,
                s,
            },
            1,
            4096,
            7,
        )
        .unwrap();
        let r = regularization_experiment(&cfg, &f0, &base, c, &ExperimentOptions::default()).unwrap();
        ok &= r.verdict == Verdict::Pass;
        parts.push(format!(
            "s={s}: {:?}, min margin {:.2e}, seminorm {:.3} -> {:.3} <= {:.3}",
            r.verdict,
            r.min_margin_before_extinction,
            r.records[0].holder.values().next().copied().unwrap_or(f64::NAN),
            r.max_seminorm_after_extinction,
            r.holder_bound * 1.05
        ));
    }
    let t = start.elapsed();
    ok &= t < Duration::from_secs(600);
    parts.push(format!("{:.0}s (limit 600s)", t.as_secs_f64()));
    (ok, parts.join("; "))
}

/// A field on the plane written in the frame of a pair: `η` along the pair
/// direction, `ν` across it.
struct Framed<F> {
    mid: [f64; 2],
    dir: [f64; 2],
    f: F,
}

impl<F: Fn(f64, f64) -> f64 + Sync> nlmp::dissipation::PlanarField for Framed<F> {
    fn sample(&self, p: [f64; 2]) -> f64 {
        let (dx, dy) = (p[0] - self.mid[0], p[1] - self.mid[1]);
        let eta = dx * self.dir[0] + dy * self.dir[1];
        let nu = -dx * self.dir[1] + dy * self.dir[0];
        (self.f)(eta, nu)
    }
}

fn perpendicular_dissipation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let cfg = QuadratureConfig::default();
    let alpha = 0.25;
    let window = 0.125;
    let mut ok = true;

    let setup = |rng: &mut ChaCha8Rng| {
        let m = ModulusParams::new(1.0, 1.0, rng.gen_range(0.2..0.8), rng.gen_range(0.0..0.5)).unwrap();
        let xi = 10f64.powf(rng.gen_range(-2.0..0.3));
        let phi = rng.gen_range(0.0..2.0 * PI);
        let dir = [phi.cos(), phi.sin()];
        let mid = [rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)];
        let x = [mid[0] + 0.5 * xi * dir[0], mid[1] + 0.5 * xi * dir[1]];
        let y = [mid[0] - 0.5 * xi * dir[0], mid[1] - 0.5 * xi * dir[1]];
        (m, xi, dir, mid, BreakthroughPair::new(x, y, None))
    };

    // odd, ν-independent profiles
    let mut odd_max = 0.0f64;
    for _ in 0..10 {
        let (m, xi, dir, mid, pair) = setup(&mut rng);
        let field = Framed {
            mid,
            dir,
            f: move |eta: f64, _: f64| eta.signum() * 0.5 * m.value(2.0 * eta.abs()),
        };
        let d = d_perp(&field, &pair, &m, alpha, window, &cfg).unwrap();
        worst(&mut odd_max, d.value.abs() / (m.value(xi) * xi.powf(-2.0 * alpha)));
    }
    ok &= odd_max < 1e-8;

    // random fields obeying ω on the symmetric pairs
    let (mut finite, mut divergent, mut largest) = (0, 0, f64::NEG_INFINITY);
    for i in 0..50 {
        let (m, _, dir, mid, pair) = setup(&mut rng);
        let terms: Vec<(f64, f64)> = (0..3).map(|_| (rng.gen_range(0.0..1.0), rng.gen_range(0.5..200.0))).collect();
        let total: f64 = terms.iter().map(|t| t.0).sum();
        let even = (rng.gen_range(-0.3..0.3), rng.gen_range(0.5..4.0), rng.gen_range(0.0..2.0 * PI));
        let lam = if i < 40 { 1.0 } else { rng.gen_range(0.5..0.99) };
        let field = Framed {
            mid,
            dir,
            f: move |eta: f64, nu: f64| {
                // g(0) = 1 and 0 < g ≤ 1; the even-in-η term cancels in every increment
                let g: f64 = terms.iter().map(|(w, a)| w * (-a * nu * nu).exp()).sum::<f64>() / total;
                lam * eta.signum() * 0.5 * m.value(2.0 * eta.abs()) * g
                    + even.0 * (even.1 * eta).cos() * (3.0 * nu + even.2).sin()
            },
        };
        match d_perp(&field, &pair, &m, alpha, window, &cfg) {
            Ok(d) => {
                if d.divergent {
                    divergent += 1;
                } else {
                    finite += 1;
                }
                largest = largest.max(d.value);
            }
            Err(e) => {
                ok = false;
                largest = f64::NAN;
                eprintln!("d_perp failed: {e}");
            }
        }
    }
    ok &= largest <= 0.0 && finite == 40 && divergent == 10;

    // Ω with the explicit far-field term minus its closed form equals the folded bound
    let mut fold_err = 0.0f64;
    for beta in [0.3, 0.6] {
        for &x0 in &[0.0, 0.01, 0.3, 1.0] {
            let m = ModulusParams::new(1.0, 1.0, beta, x0).unwrap();
            for &xi in &common::log_grid(1e-4, 10.0, 30) {
                let dp = -rng.gen_range(0.0..5.0);
                let folded = omega_bound_sqg(&m, PerpSource::Value(dp), alpha, xi, 1.3, window, &cfg).unwrap();
                let general =
                    omega_bound_sqg_general(&m, PerpSource::Value(dp), alpha, xi, 1.3, window, &cfg).unwrap();
                let mid = common::family_far_field(&m, xi);
                worst(&mut fold_err, (general.value - 1.3 * mid - folded.value).abs() / folded.value);
                let lib_mid = far_field_average(&m, xi, cfg.rel_tol).unwrap();
                worst(&mut fold_err, (lib_mid - mid).abs() / mid);
            }
        }
    }
    ok &= fold_err < 1e-8;
    (
        ok,
        format!(
            "odd profiles |D_perp|/scale {odd_max:.1e}; 50 random fields: {finite} finite, {divergent} divergent, max {largest:.3e}; folding err {fold_err:.1e} (tol 1e-8)"
        ),
    )
}

fn main() {
    // Cargo passes libtest flags to every test target; only a name filter matters here.
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let want = |i: usize| filter.as_deref().map_or(true, |f| f.split(',').any(|s| s == i.to_string()));

    let mut results: Vec<(usize, &str, Outcome, f64)> = Vec::new();
    let mut record = |i: usize, name: &'static str, f: &dyn Fn() -> Outcome| {
        if !want(i) {
            return;
        }
        let start = Instant::now();
        let out = f();
        let secs = start.elapsed().as_secs_f64();
        println!("{} {:>2} {name}: {} [{secs:.1}s]", if out.0 { "PASS" } else { "FAIL" }, i, out.1);
        results.push((i, name, out, secs));
    };
    record(1, "dissipation is nonpositive", &nonpositive_dissipation);
    record(2, "dissipation scaling law", &scaling_law);
    record(3, "closed forms and heat kernels", &closed_forms);
    record(4, "far-field average bounds", &far_field_suite);
    record(5, "modified SQG velocity bound", &velocity_bound_suite);
    record(6, "cap extinction ODE", &extinction_ode);
    record(7, "constant search", &constant_search);
    record(8, "solver correctness", &solver_correctness);
    if want(9) || want(10) {
        match simulation_constants() {
            Ok(c) => {
                println!("     simulation constants: C1 = {:.4}, C2 = {:.4}", c.c1, c.c2);
                record(9, "modulus preservation", &|| preservation(&c));
                record(10, "eventual regularization", &|| eventual_regularization(&c));
            }
            Err(e) => {
                record(9, "modulus preservation", &|| (false, e.clone()));
                record(10, "eventual regularization", &|| (false, e.clone()));
            }
        }
    }
    record(11, "perpendicular dissipation", &perpendicular_dissipation);

    let failed = results.iter().filter(|r| !r.2 .0).count();
    println!("acceptance: {} passed, {failed} failed", results.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
