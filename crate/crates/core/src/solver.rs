//! Pseudo-spectral solver for
//!
//! ```text
//! θ_t + u·∇θ = -(-Δ)^α θ + εΔθ
//! ```
//!
//! on `T¹` (Burgers, `u = θ`, nonlinearity in the form `∂x(θ²/2)`) and `T²`
//! (SQG and modified SQG, `û = i k⊥ |k|^{-2γ} θ̂`). The linear part is
//! diagonal in Fourier space and is treated exactly (integrating-factor RK4)
//! or implicitly (IMEX-BDF2).

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Error, Result};
use crate::field::{wavenumber, ScalarField, Transform, TWO_PI};
use crate::velocity::{EquationKind, EquationParams};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    #[default]
    IntegratingFactorRk4,
    Imex,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub eq: EquationParams,
    pub n: usize,
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "yes")]
    pub dealias: bool,
    #[serde(default)]
    pub integrator: Integrator,
    #[serde(default = "ten")]
    pub record_every: usize,
    #[serde(default)]
    pub seed: u64,
    /// Switches the nonlinear term off (pure linear decay).
    #[serde(default = "yes")]
    pub transport: bool,
    /// Courant number bound for `dt · max|u| · N/(2π)`.
    #[serde(default = "half")]
    pub cfl: f64,
}

fn yes() -> bool {
    true
}
fn ten() -> usize {
    10
}
fn half() -> f64 {
    0.5
}

impl SimConfig {
    pub fn new(eq: EquationParams, n: usize, dt: f64, t_end: f64) -> Self {
        Self {
            eq,
            n,
            dt,
            t_end,
            dealias: true,
            integrator: Integrator::default(),
            record_every: 10,
            seed: 0,
            transport: true,
            cfl: 0.5,
        }
    }

    pub fn check(&self) -> Result<()> {
        let eq = &self.eq;
        // the solver also accepts α = 1 (classical heat equation)
        if !(eq.alpha > 0.0 && eq.alpha <= 1.0) {
            return validation(format!("alpha must lie in (0,1], got {}", eq.alpha));
        }
        if !(eq.epsilon >= 0.0) {
            return validation("epsilon must be nonnegative");
        }
        match eq.kind {
            EquationKind::Sqg if eq.gamma != 0.5 => return validation("SQG requires gamma = 1/2"),
            EquationKind::ModifiedSqg if !(eq.gamma > 0.5 && eq.gamma < 1.0) => {
                return validation("modified SQG requires 1/2 < gamma < 1")
            }
            _ => {}
        }
        if !(self.dt > 0.0 && self.t_end >= 0.0) {
            return validation("dt must be positive and t_end nonnegative");
        }
        if self.record_every == 0 {
            return validation("record_every must be positive");
        }
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return validation("cfl must lie in (0,1]");
        }
        if self.n < 4 || !self.n.is_power_of_two() {
            return validation("n must be a power of two >= 4");
        }
        Ok(())
    }
}

/// Velocity samples and spectra, one entry per component.
#[derive(Clone, Debug)]
pub struct VelocityField {
    pub dim: usize,
    pub n: usize,
    pub components: Vec<Vec<f64>>,
    pub spectra: Vec<Vec<Complex64>>,
}

impl VelocityField {
    pub fn max_speed(&self) -> f64 {
        let len = self.components[0].len();
        (0..len)
            .map(|i| self.components.iter().map(|c| c[i] * c[i]).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }

    /// `max |k·û(k)| / max |û(k)|`, the relative spectral divergence.
    pub fn relative_divergence(&self) -> f64 {
        let n = self.n;
        let mut div: f64 = 0.0;
        let mut size: f64 = 0.0;
        for idx in 0..self.spectra[0].len() {
            let k = mode(self.dim, n, idx);
            let mut d = Complex64::default();
            for (c, s) in self.spectra.iter().enumerate() {
                d += s[idx] * k[c];
                size = size.max(s[idx].norm());
            }
            div = div.max(d.norm());
        }
        if size == 0.0 {
            0.0
        } else {
            div / size
        }
    }
}

fn mode(dim: usize, n: usize, idx: usize) -> [f64; 2] {
    if dim == 1 {
        [wavenumber(idx, n), 0.0]
    } else {
        [wavenumber(idx % n, n), wavenumber(idx / n, n)]
    }
}

/// `u` from `θ`: `θ` itself for Burgers, `∇⊥(-Δ)^{-γ}θ` otherwise, with
/// the zero mode removed.
pub fn velocity_from_theta(theta: &ScalarField, eq: &EquationParams) -> Result<VelocityField> {
    let (dim, n) = (theta.dim(), theta.n());
    if dim != eq.dimension() {
        return Err(Error::Argument(format!(
            "{:?} lives in {} dimension(s), field has {dim}",
            eq.kind,
            eq.dimension()
        )));
    }
    if eq.kind == EquationKind::Burgers {
        return Ok(VelocityField {
            dim,
            n,
            components: vec![theta.values().to_vec()],
            spectra: vec![theta.spectrum().to_vec()],
        });
    }
    let tr = Transform::new(dim, n)?;
    let mut s1 = vec![Complex64::default(); n * n];
    let mut s2 = vec![Complex64::default(); n * n];
    for (idx, &th) in theta.spectrum().iter().enumerate() {
        let k = mode(dim, n, idx);
        let k2 = k[0] * k[0] + k[1] * k[1];
        if k2 == 0.0 {
            continue;
        }
        let m = k2.powf(-eq.gamma);
        s1[idx] = Complex64::new(0.0, -k[1] * m) * th;
        s2[idx] = Complex64::new(0.0, k[0] * m) * th;
    }
    Ok(VelocityField {
        dim,
        n,
        components: vec![tr.to_values(&s1), tr.to_values(&s2)],
        spectra: vec![s1, s2],
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub dt: f64,
    pub sup_norm: f64,
    pub mean: f64,
    pub energy: f64,
    pub max_gradient: f64,
}

/// Time integrator state for one run.
pub struct Solver {
    cfg: SimConfig,
    dim: usize,
    n: usize,
    tr: Transform,
    /// Derivative wavenumbers (Nyquist set to 0), per axis.
    kd: [Vec<f64>; 2],
    /// Linear symbol `-(|k|^{2α} + ε|k|²)`.
    lin: Vec<f64>,
    keep: Vec<bool>,
    /// `|k|^{-2γ}`, 0 at the zero mode.
    riesz: Vec<f64>,
    state: Vec<Complex64>,
    t: f64,
    steps: usize,
    /// Previous state, its nonlinear term and step size, for BDF2.
    history: Option<(Vec<Complex64>, Vec<Complex64>, f64)>,
    buf: Vec<Vec<Complex64>>,
}

impl Solver {
    pub fn new(theta0: &ScalarField, cfg: &SimConfig) -> Result<Self> {
        cfg.check()?;
        let (dim, n) = (theta0.dim(), theta0.n());
        if dim != cfg.eq.dimension() || n != cfg.n {
            return Err(Error::Argument(format!(
                "initial field ({dim}D, n = {n}) does not match the configuration ({}D, n = {})",
                cfg.eq.dimension(),
                cfg.n
            )));
        }
        let len = theta0.spectrum().len();
        let cut = n as f64 / 3.0;
        let mut kd = [vec![0.0; len], vec![0.0; len]];
        let mut lin = vec![0.0; len];
        let mut keep = vec![true; len];
        let mut riesz = vec![0.0; len];
        for idx in 0..len {
            let k = mode(dim, n, idx);
            let ii = [idx % n, if dim == 2 { idx / n } else { 0 }];
            for ax in 0..dim {
                kd[ax][idx] = if ii[ax] == n / 2 { 0.0 } else { k[ax] };
            }
            let k2 = k[0] * k[0] + k[1] * k[1];
            lin[idx] = -(k2.powf(cfg.eq.alpha) + cfg.eq.epsilon * k2);
            if cfg.dealias {
                keep[idx] = k[0].abs() <= cut && k[1].abs() <= cut;
            }
            if k2 > 0.0 {
                riesz[idx] = k2.powf(-cfg.eq.gamma);
            }
        }
        Ok(Self {
            cfg: cfg.clone(),
            dim,
            n,
            tr: Transform::new(dim, n)?,
            kd,
            lin,
            keep,
            riesz,
            state: theta0.spectrum().to_vec(),
            t: 0.0,
            steps: 0,
            history: None,
            buf: vec![vec![Complex64::default(); len]; 5],
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn field(&self) -> Result<ScalarField> {
        ScalarField::from_spectrum(self.dim, self.n, &self.state)
    }

    /// `-(u·∇θ)^` (dealiased) and `max|u|`.
    fn nonlinear(&mut self, th: &[Complex64], out: &mut [Complex64]) -> f64 {
        let len = th.len();
        if !self.cfg.transport {
            out.iter_mut().for_each(|v| *v = Complex64::default());
            return 0.0;
        }
        let i = Complex64::i();
        let [b0, b1, b2, b3, b4] = &mut self.buf[..] else {
            unreachable!()
        };
        for idx in 0..len {
            b0[idx] = if self.keep[idx] { th[idx] } else { Complex64::default() };
        }
        let speed;
        if self.dim == 1 {
            self.tr.inverse(b0);
            speed = b0.iter().fold(0.0, |m: f64, z| m.max(z.re.abs()));
            for z in b0.iter_mut() {
                *z = Complex64::new(0.5 * z.re * z.re, 0.0);
            }
            self.tr.forward(b0);
            for idx in 0..len {
                out[idx] = if self.keep[idx] {
                    -i * self.kd[0][idx] * b0[idx]
                } else {
                    Complex64::default()
                };
            }
        } else {
            for idx in 0..len {
                let w = b0[idx];
                let (k1, k2) = (self.kd[0][idx], self.kd[1][idx]);
                let m = self.riesz[idx];
                b1[idx] = i * (-k2 * m) * w;
                b2[idx] = i * (k1 * m) * w;
                b3[idx] = i * k1 * w;
                b4[idx] = i * k2 * w;
            }
            for b in [&mut *b1, &mut *b2, &mut *b3, &mut *b4] {
                self.tr.inverse(b);
            }
            let mut s: f64 = 0.0;
            for idx in 0..len {
                let (u1, u2) = (b1[idx].re, b2[idx].re);
                s = s.max(u1.hypot(u2));
                b0[idx] = Complex64::new(u1 * b3[idx].re + u2 * b4[idx].re, 0.0);
            }
            speed = s;
            self.tr.forward(b0);
            for idx in 0..len {
                out[idx] = if self.keep[idx] { -b0[idx] } else { Complex64::default() };
            }
        }
        // the transport term has zero mean exactly
        out[0] = Complex64::default();
        speed
    }

    fn choose_dt(&self, speed: f64, until: f64) -> f64 {
        let mut h = self.cfg.dt;
        if speed > 0.0 {
            h = h.min(self.cfg.cfl * TWO_PI / (self.n as f64 * speed));
        }
        let rest = until - self.t;
        if rest < h * (1.0 + 1e-9) {
            h = rest;
        }
        h
    }

    /// Advances one step, never past `until`; returns the step size used.
    pub fn step(&mut self, until: f64) -> Result<f64> {
        let len = self.state.len();
        let u = std::mem::take(&mut self.state);
        let mut a = vec![Complex64::default(); len];
        let speed = self.nonlinear(&u, &mut a);
        let h = self.choose_dt(speed, until);
        if !(h > 0.0) {
            self.state = u;
            return Ok(0.0);
        }
        let new = match self.cfg.integrator {
            Integrator::IntegratingFactorRk4 => self.lawson_rk4(&u, &a, h),
            Integrator::Imex => self.imex_bdf2(&u, &a, h),
        };
        self.t += h;
        self.steps += 1;
        if new.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            self.state = u;
            return Err(Error::BlowUp {
                t: self.t,
                message: "non-finite spectral coefficients".into(),
            });
        }
        self.state = new;
        Ok(h)
    }

    fn lawson_rk4(&mut self, u: &[Complex64], a: &[Complex64], h: f64) -> Vec<Complex64> {
        let len = u.len();
        let e: Vec<f64> = self.lin.iter().map(|l| (l * 0.5 * h).exp()).collect();
        let mut stage: Vec<Complex64> = (0..len).map(|k| e[k] * (u[k] + 0.5 * h * a[k])).collect();
        let mut b = vec![Complex64::default(); len];
        self.nonlinear(&stage, &mut b);
        for k in 0..len {
            stage[k] = e[k] * u[k] + 0.5 * h * b[k];
        }
        let mut c = vec![Complex64::default(); len];
        self.nonlinear(&stage, &mut c);
        for k in 0..len {
            stage[k] = e[k] * e[k] * u[k] + h * e[k] * c[k];
        }
        let mut d = vec![Complex64::default(); len];
        self.nonlinear(&stage, &mut d);
        (0..len)
            .map(|k| {
                let e2 = e[k] * e[k];
                e2 * u[k] + h / 6.0 * (e2 * a[k] + 2.0 * e[k] * (b[k] + c[k]) + d[k])
            })
            .collect()
    }

    fn imex_bdf2(&mut self, u: &[Complex64], a: &[Complex64], h: f64) -> Vec<Complex64> {
        let len = u.len();
        let new: Vec<Complex64> = match &self.history {
            Some((prev, na, hp)) if (hp - h).abs() <= 1e-12 * h => (0..len)
                .map(|k| {
                    (4.0 * u[k] - prev[k] + 2.0 * h * (2.0 * a[k] - na[k])) / (3.0 - 2.0 * h * self.lin[k])
                })
                .collect(),
            // first step and after a step-size change: backward/forward Euler
            _ => (0..len).map(|k| (u[k] + h * a[k]) / (1.0 - h * self.lin[k])).collect(),
        };
        self.history = Some((u.to_vec(), a.to_vec(), h));
        new
    }

    pub fn record(&self, dt: f64) -> Result<StepRecord> {
        let f = self.field()?;
        let len = self.state.len();
        let i = Complex64::i();
        let mut g2 = vec![0.0; len];
        for ax in 0..self.dim {
            let d: Vec<Complex64> = (0..len).map(|k| i * self.kd[ax][k] * self.state[k]).collect();
            for (acc, v) in g2.iter_mut().zip(self.tr.to_values(&d)) {
                *acc += v * v;
            }
        }
        let vol = TWO_PI.powi(self.dim as i32);
        Ok(StepRecord {
            step: self.steps,
            t: self.t,
            dt,
            sup_norm: f.sup_norm(),
            mean: f.mean(),
            energy: 0.5 * vol * f.values().iter().map(|v| v * v).sum::<f64>() / len as f64,
            max_gradient: g2.iter().fold(0.0, |m: f64, v| m.max(v.sqrt())),
        })
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RunOutput {
    pub records: Vec<StepRecord>,
    /// Time and message of a blow-up, if the run stopped early.
    pub blow_up: Option<(f64, String)>,
    #[serde(skip)]
    pub final_field: Option<ScalarField>,
}

/// Integrates to `cfg.t_end`, recording at `t = 0`, every `record_every`
/// steps and at the end. `observe` sees each recorded field.
pub fn run<F>(theta0: &ScalarField, cfg: &SimConfig, mut observe: F) -> Result<RunOutput>
where
    F: FnMut(&StepRecord, &ScalarField) -> Result<()>,
{
    let mut solver = Solver::new(theta0, cfg)?;
    let mut records = Vec::new();
    let first = solver.record(0.0)?;
    observe(&first, theta0)?;
    records.push(first);
    while solver.time() < cfg.t_end {
        let h = match solver.step(cfg.t_end) {
            Ok(h) if h == 0.0 => break,
            Ok(h) => h,
            Err(Error::BlowUp { t, message }) => {
                return Ok(RunOutput {
                    records,
                    blow_up: Some((t, message)),
                    final_field: None,
                })
            }
            Err(e) => return Err(e),
        };
        let done = solver.time() >= cfg.t_end;
        if solver.steps() % cfg.record_every == 0 || done {
            let rec = solver.record(h)?;
            let f = solver.field()?;
            observe(&rec, &f)?;
            records.push(rec);
        }
    }
    Ok(RunOutput {
        records,
        blow_up: None,
        final_field: Some(solver.field()?),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialData {
    /// `amplitude · sin(k·x)`.
    SingleMode { amplitude: f64, k: [i64; 2] },
    /// Random coefficients on `1 ≤ |k| ≤ k_max`, rescaled to sup norm `sup`.
    RandomBandLimited { sup: f64, k_max: usize },
    /// Random phases with amplitudes `|k|^{-d/2-s}` up to the dealiasing
    /// cutoff, rescaled to sup norm `sup`.
    Rough { sup: f64, s: f64 },
}

pub fn initial_field(data: &InitialData, dim: usize, n: usize, seed: u64) -> Result<ScalarField> {
    match *data {
        InitialData::SingleMode { amplitude, k } => {
            ScalarField::from_fn(dim, n, |p| amplitude * (k[0] as f64 * p[0] + k[1] as f64 * p[1]).sin())
        }
        InitialData::RandomBandLimited { sup, k_max } => {
            random_field(dim, n, seed, sup, k_max as f64, |_| 1.0)
        }
        InitialData::Rough { sup, s } => {
            let p = -(dim as f64) / 2.0 - s;
            random_field(dim, n, seed, sup, n as f64 / 3.0, move |k| k.powf(p))
        }
    }
}

fn random_field<A: Fn(f64) -> f64>(dim: usize, n: usize, seed: u64, sup: f64, k_max: f64, amp: A) -> Result<ScalarField> {
    if !(sup > 0.0) || !(k_max >= 1.0) {
        return validation("random data needs sup > 0 and k_max >= 1");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let len = n.pow(dim as u32);
    let mut spec = vec![Complex64::default(); len];
    for (idx, z) in spec.iter_mut().enumerate() {
        let k = mode(dim, n, idx);
        let kk = k[0].hypot(k[1]);
        let nyq = (idx % n) == n / 2 || (dim == 2 && idx / n == n / 2);
        // random values for every mode; taking the real part afterwards
        // symmetrizes the spectrum
        let (phase, r): (f64, f64) = (rng.gen::<f64>() * TWO_PI, rng.gen());
        if kk >= 1.0 && kk <= k_max && !nyq {
            *z = Complex64::from_polar(amp(kk) * (0.5 + r), phase);
        }
    }
    let f = ScalarField::from_spectrum(dim, n, &spec)?;
    let m = f.mean();
    let centered = ScalarField::from_values(dim, n, f.values().iter().map(|v| v - m).collect())?;
    let s = centered.sup_norm();
    if s == 0.0 {
        return validation("random field vanished");
    }
    Ok(centered.scaled(sup / s))
}
