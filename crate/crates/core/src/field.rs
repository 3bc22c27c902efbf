//! Periodic scalar fields on `T¹` or `T²` (side `2π`), their discrete
//! Fourier transforms and binary snapshots.

use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;

use crate::dissipation::PlanarField;
use crate::error::{validation, Error, Result};
use crate::velocity::{EquationKind, EquationParams};

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Forward and inverse plans for `d`-dimensional transforms of side `n`.
#[derive(Clone)]
pub struct Transform {
    dim: usize,
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Transform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Transform({}D, n = {})", self.dim, self.n)
    }
}

impl Transform {
    pub fn new(dim: usize, n: usize) -> Result<Self> {
        check_shape(dim, n)?;
        let mut planner = FftPlanner::new();
        Ok(Self {
            dim,
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        })
    }

    pub fn len(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn apply(&self, data: &mut [Complex64], plan: &Arc<dyn Fft<f64>>) {
        let n = self.n;
        plan.process(data);
        if self.dim == 2 {
            // rows were transformed above (all rows are contiguous); now columns
            let mut col = vec![Complex64::default(); n];
            for i in 0..n {
                for j in 0..n {
                    col[j] = data[j * n + i];
                }
                plan.process(&mut col);
                for j in 0..n {
                    data[j * n + i] = col[j];
                }
            }
        }
    }

    /// Unnormalized forward transform in place.
    pub fn forward(&self, data: &mut [Complex64]) {
        self.apply(data, &self.forward);
    }

    /// Inverse transform in place, including the `1/n^d` factor.
    pub fn inverse(&self, data: &mut [Complex64]) {
        self.apply(data, &self.inverse);
        let s = 1.0 / self.len() as f64;
        for v in data.iter_mut() {
            *v *= s;
        }
    }

    pub fn to_spectrum(&self, values: &[f64]) -> Vec<Complex64> {
        let mut c: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&mut c);
        c
    }

    pub fn to_values(&self, spectrum: &[Complex64]) -> Vec<f64> {
        let mut c = spectrum.to_vec();
        self.inverse(&mut c);
        c.into_iter().map(|z| z.re).collect()
    }
}

fn check_shape(dim: usize, n: usize) -> Result<()> {
    if !(dim == 1 || dim == 2) {
        return validation(format!("dimension must be 1 or 2, got {dim}"));
    }
    if n < 4 || !n.is_power_of_two() {
        return validation(format!("grid size must be a power of two >= 4, got {n}"));
    }
    Ok(())
}

/// Signed wavenumber of FFT index `i` (the Nyquist index maps to `-n/2`).
#[inline]
pub fn wavenumber(i: usize, n: usize) -> f64 {
    if i < n / 2 {
        i as f64
    } else {
        i as f64 - n as f64
    }
}

/// Real samples of `θ` on the uniform grid together with their spectrum.
/// In 2D, sample `(i, j)` sits at `(x₁, x₂) = (i, j)·2π/n` and is stored at
/// index `j·n + i`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScalarField {
    dim: usize,
    n: usize,
    values: Vec<f64>,
    #[serde(skip)]
    spectrum: Vec<Complex64>,
}

impl ScalarField {
    pub fn from_values(dim: usize, n: usize, values: Vec<f64>) -> Result<Self> {
        check_shape(dim, n)?;
        if values.len() != n.pow(dim as u32) {
            return validation(format!("expected {} samples, got {}", n.pow(dim as u32), values.len()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return validation("field samples must be finite");
        }
        let spectrum = Transform::new(dim, n)?.to_spectrum(&values);
        Ok(Self {
            dim,
            n,
            values,
            spectrum,
        })
    }

    /// Builds the field from a spectrum, keeping only its real part in
    /// physical space (the spectrum is re-derived from the real samples).
    pub fn from_spectrum(dim: usize, n: usize, spectrum: &[Complex64]) -> Result<Self> {
        let values = Transform::new(dim, n)?.to_values(spectrum);
        Self::from_values(dim, n, values)
    }

    pub fn from_fn<F: Fn([f64; 2]) -> f64>(dim: usize, n: usize, f: F) -> Result<Self> {
        check_shape(dim, n)?;
        let h = TWO_PI / n as f64;
        let values = match dim {
            1 => (0..n).map(|i| f([i as f64 * h, 0.0])).collect(),
            _ => (0..n * n)
                .map(|k| f([(k % n) as f64 * h, (k / n) as f64 * h]))
                .collect(),
        };
        Self::from_values(dim, n, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dx(&self) -> f64 {
        TWO_PI / self.n as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn spectrum(&self) -> &[Complex64] {
        &self.spectrum
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[(j % self.n) * self.n + i % self.n]
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            dim: self.dim,
            n: self.n,
            values: self.values.iter().map(|v| v * factor).collect(),
            spectrum: self.spectrum.iter().map(|c| c * factor).collect(),
        }
    }

    /// Largest deviation of the samples from the inverse transform of the spectrum.
    pub fn round_trip_error(&self) -> Result<f64> {
        let back = Transform::new(self.dim, self.n)?.to_values(&self.spectrum);
        Ok(back
            .iter()
            .zip(&self.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
    }

    /// Periodic linear (1D) or bilinear (2D) interpolation.
    pub fn interpolate(&self, p: [f64; 2]) -> f64 {
        let n = self.n;
        let h = self.dx();
        let split = |x: f64| {
            let u = x.rem_euclid(TWO_PI) / h;
            let i = u.floor();
            ((i as usize) % n, u - i)
        };
        let (i0, fx) = split(p[0]);
        let i1 = (i0 + 1) % n;
        if self.dim == 1 {
            return self.values[i0] * (1.0 - fx) + self.values[i1] * fx;
        }
        let (j0, fy) = split(p[1]);
        let j1 = (j0 + 1) % n;
        let v = |i: usize, j: usize| self.values[j * n + i];
        (v(i0, j0) * (1.0 - fx) + v(i1, j0) * fx) * (1.0 - fy) + (v(i0, j1) * (1.0 - fx) + v(i1, j1) * fx) * fy
    }
}

impl PlanarField for ScalarField {
    fn sample(&self, p: [f64; 2]) -> f64 {
        self.interpolate(p)
    }
}

pub const SNAPSHOT_MAGIC: &[u8; 8] = b"NLMPSNAP";

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SnapshotHeader {
    pub dim: usize,
    pub n: usize,
    pub t: f64,
    pub eq: EquationParams,
}

fn kind_code(k: EquationKind) -> f64 {
    match k {
        EquationKind::Burgers => 0.0,
        EquationKind::Sqg => 1.0,
        EquationKind::ModifiedSqg => 2.0,
    }
}

/// Writes magic, then `[d, N, t, kind, α, γ, ε]` and the samples, all as
/// little-endian doubles.
pub fn write_snapshot<W: Write>(mut w: W, field: &ScalarField, t: f64, eq: &EquationParams) -> Result<()> {
    w.write_all(SNAPSHOT_MAGIC)?;
    let header = [
        field.dim as f64,
        field.n as f64,
        t,
        kind_code(eq.kind),
        eq.alpha,
        eq.gamma,
        eq.epsilon,
    ];
    for v in header.iter().chain(field.values.iter()) {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<(ScalarField, SnapshotHeader)> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != SNAPSHOT_MAGIC {
        return validation("not a snapshot file (bad magic)");
    }
    let mut next = || -> Result<f64> {
        let mut b = [0u8; 8];
        r.read_exact(&mut b)?;
        Ok(f64::from_le_bytes(b))
    };
    let mut h = [0.0; 7];
    for v in &mut h {
        *v = next()?;
    }
    let (dim, n) = (h[0] as usize, h[1] as usize);
    check_shape(dim, n)?;
    let kind = match h[3] as i64 {
        0 => EquationKind::Burgers,
        1 => EquationKind::Sqg,
        2 => EquationKind::ModifiedSqg,
        k => return Err(Error::Validation(format!("unknown equation code {k}"))),
    };
    let values = (0..n.pow(dim as u32)).map(|_| next()).collect::<Result<Vec<_>>>()?;
    let eq = EquationParams {
        kind,
        alpha: h[4],
        gamma: h[5],
        epsilon: h[6],
        ..EquationParams::burgers(h[4], h[6])
    };
    Ok((
        ScalarField::from_values(dim, n, values)?,
        SnapshotHeader { dim, n, t: h[2], eq },
    ))
}
