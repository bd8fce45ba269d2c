//! Sampled test functions on a uniform grid and their one-particle norms.
//!
//! A [`GridFunction`] stores complex samples `f(x_j)` on the nodes
//! `x_j = -L + j dx`, `dx = 2L/(N-1)`, together with a declared support
//! interval outside of which every sample is zero. The real part plays the
//! role of the field smearing and the imaginary part that of the momentum
//! smearing.

mod norms;
pub(crate) mod quadrature;
pub mod random;
mod spectral;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub(crate) use norms::check_zero_mode;
pub use norms::{mass_inner, mass_norm, null_integral_approx, sobolev_norm, zero_mode_tolerance};
pub(crate) use spectral::{
    evaluate_at, fft_in_place, padded_len, padded_parts, real_imag_parts, SpectralParts,
};
pub use spectral::{fourier, inverse_fourier, Spectrum};

/// `int_{-1}^{1} exp(-1/(1-u^2)) du`.
pub const BUMP_INTEGRAL: f64 = 0.443_993_816_168_079_4;

/// Samples of a function below this size (relative to its peak) count as zero.
const SUPPORT_TOLERANCE: f64 = 1e-14;

/// Uniform grid on `[-L, L]` with a power-of-two number of nodes.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    n: usize,
    half_width: f64,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            n: 4096,
            half_width: 32.0,
        }
    }
}

impl Grid {
    pub fn new(n: usize, half_width: f64) -> Result<Self> {
        if n < 16 || !n.is_power_of_two() {
            return Err(Error::InvalidGrid(format!(
                "N = {n} must be a power of two >= 16"
            )));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "half width {half_width} must be positive"
            )));
        }
        Ok(Grid { n, half_width })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / (self.n - 1) as f64
    }

    /// Momentum spacing of the native transform, `2 pi / (N dx)`.
    pub fn dp(&self) -> f64 {
        2.0 * std::f64::consts::PI / (self.n as f64 * self.dx())
    }

    pub fn x(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.dx()
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    /// Indices of the nodes lying in the closed interval `[lo, hi]`.
    pub fn index_range(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let dx = self.dx();
        let first = ((lo + self.half_width) / dx).ceil().max(0.0) as usize;
        let last = ((hi + self.half_width) / dx).floor();
        if last < 0.0 {
            return 0..0;
        }
        let end = (last as usize + 1).min(self.n);
        first.min(end)..end
    }

    pub(crate) fn check_support(&self, lo: f64, hi: f64) -> Result<()> {
        let l = self.half_width;
        if !(lo.is_finite() && hi.is_finite()) || lo > hi || lo <= -l || hi >= l {
            return Err(Error::SupportOutsideGrid {
                lo,
                hi,
                half_width: l,
            });
        }
        Ok(())
    }
}

/// Whether a norm is finite or infrared divergent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "tag", content = "value")]
pub enum MassNormValue {
    Finite(f64),
    Divergent,
}

impl MassNormValue {
    pub fn finite(self) -> Option<f64> {
        match self {
            MassNormValue::Finite(v) => Some(v),
            MassNormValue::Divergent => None,
        }
    }

    pub fn is_divergent(self) -> bool {
        matches!(self, MassNormValue::Divergent)
    }
}

/// Complex samples on a [`Grid`] with a declared compact support.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: Grid,
    support: (f64, f64),
    samples: Vec<Complex64>,
}

impl GridFunction {
    /// The zero function. Its support is the degenerate interval at the origin.
    pub fn zero(grid: Grid) -> Self {
        GridFunction {
            grid,
            support: (0.0, 0.0),
            samples: vec![Complex64::new(0.0, 0.0); grid.n],
        }
    }

    /// Samples `f` on the nodes of `[lo, hi]`; all other nodes are zero.
    pub fn from_fn(grid: Grid, support: (f64, f64), f: impl Fn(f64) -> Complex64) -> Result<Self> {
        grid.check_support(support.0, support.1)?;
        let mut samples = vec![Complex64::new(0.0, 0.0); grid.n];
        for j in grid.index_range(support.0, support.1) {
            samples[j] = f(grid.x(j));
        }
        Ok(GridFunction {
            grid,
            support,
            samples,
        })
    }

    /// Wraps precomputed samples. Samples outside the support must be negligible
    /// and are set to exactly zero.
    pub fn from_samples(grid: Grid, support: (f64, f64), samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.n {
            return Err(invalid(
                "samples",
                format!("expected {} samples, got {}", grid.n, samples.len()),
            ));
        }
        grid.check_support(support.0, support.1)?;
        let mut out = GridFunction {
            grid,
            support,
            samples,
        };
        out.trim_outside_support("from_samples")?;
        Ok(out)
    }

    /// Used after spectral operations: samples outside the support are roundoff
    /// and get zeroed, but a genuinely nonzero tail means the support was wrong.
    pub(crate) fn trim_outside_support(&mut self, op: &'static str) -> Result<()> {
        let peak = self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let tol = SUPPORT_TOLERANCE * peak.max(1e-300) + 1e-300;
        let inside = self.grid.index_range(self.support.0, self.support.1);
        let mut worst: f64 = 0.0;
        for (j, z) in self.samples.iter_mut().enumerate() {
            if !inside.contains(&j) {
                worst = worst.max(z.norm());
                *z = Complex64::new(0.0, 0.0);
            }
        }
        // under-resolved spectra ring at the 1e-8 level; wrap-around leaks are O(1)
        if worst > 1e-6 * peak.max(1e-300) && worst > tol {
            return Err(crate::error::guard(
                "support",
                format!("{op}: sample {worst:.3e} outside declared support (peak {peak:.3e})"),
            ));
        }
        Ok(())
    }

    /// `amplitude * exp(-1/(1-u^2))` with `u = (x - center)/width`.
    pub fn bump(grid: Grid, center: f64, width: f64, amplitude: Complex64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(invalid("width", "must be positive"));
        }
        GridFunction::from_fn(grid, (center - width, center + width), |x| {
            amplitude * bump_profile((x - center) / width)
        })
    }

    /// Analytic derivative of [`GridFunction::bump`]; its integral vanishes exactly.
    pub fn bump_derivative(
        grid: Grid,
        center: f64,
        width: f64,
        amplitude: Complex64,
    ) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(invalid("width", "must be positive"));
        }
        GridFunction::from_fn(grid, (center - width, center + width), |x| {
            amplitude * (bump_profile_derivative((x - center) / width) / width)
        })
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn support(&self) -> (f64, f64) {
        self.support
    }

    /// Largest `|x|` in the support.
    pub fn support_radius(&self) -> f64 {
        self.support.0.abs().max(self.support.1.abs())
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn value(&self, j: usize) -> Complex64 {
        self.samples[j]
    }

    pub fn is_real(&self) -> bool {
        self.samples.iter().all(|z| z.im == 0.0)
    }

    /// Trapezoid integral `int f dx` (the endpoints vanish).
    pub fn moment(&self) -> Complex64 {
        let dx = self.grid.dx();
        self.samples.iter().sum::<Complex64>() * dx
    }

    pub fn l2_norm(&self) -> f64 {
        (self.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.grid.dx()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn real_part(&self) -> GridFunction {
        self.map(|z| Complex64::new(z.re, 0.0))
    }

    pub fn imag_part(&self) -> GridFunction {
        self.map(|z| Complex64::new(z.im, 0.0))
    }

    pub fn scale(&self, c: Complex64) -> GridFunction {
        self.map(|z| z * c)
    }

    pub fn neg(&self) -> GridFunction {
        self.map(|z| -z)
    }

    pub fn conj(&self) -> GridFunction {
        self.map(|z| z.conj())
    }

    fn map(&self, op: impl Fn(Complex64) -> Complex64) -> GridFunction {
        GridFunction {
            grid: self.grid,
            support: self.support,
            samples: self.samples.iter().map(|&z| op(z)).collect(),
        }
    }

    pub fn add(&self, other: &GridFunction) -> Result<GridFunction> {
        self.combine(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridFunction) -> Result<GridFunction> {
        self.combine(other, |a, b| a - b)
    }

    fn combine(
        &self,
        other: &GridFunction,
        op: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<GridFunction> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let support = union_support(self, other);
        let samples = self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(&a, &b)| op(a, b))
            .collect();
        Ok(GridFunction {
            grid: self.grid,
            support,
            samples,
        })
    }

    /// Node-wise maximum of `|f - g|`.
    pub fn max_distance(&self, other: &GridFunction) -> Result<f64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Rows `x,re,im` with a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,re,im\n");
        for (j, z) in self.samples.iter().enumerate() {
            out.push_str(&format!(
                "{:.17e},{:.17e},{:.17e}\n",
                self.grid.x(j),
                z.re,
                z.im
            ));
        }
        out
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "domain": [-self.grid.half_width, self.grid.half_width],
            "dx": self.grid.dx(),
            "support": [self.support.0, self.support.1],
            "samples": self.samples.iter().map(|z| [z.re, z.im]).collect::<Vec<_>>(),
        })
    }

    /// Inverse of [`GridFunction::to_json`].
    pub fn from_json(value: &serde_json::Value) -> Result<GridFunction> {
        let bad = |what: &str| invalid("json", format!("missing or malformed `{what}`"));
        let domain = value["domain"].as_array().ok_or_else(|| bad("domain"))?;
        let half_width = domain
            .get(1)
            .and_then(|v| v.as_f64())
            .ok_or_else(|| bad("domain"))?;
        let support = value["support"].as_array().ok_or_else(|| bad("support"))?;
        let lo = support
            .first()
            .and_then(|v| v.as_f64())
            .ok_or_else(|| bad("support"))?;
        let hi = support
            .get(1)
            .and_then(|v| v.as_f64())
            .ok_or_else(|| bad("support"))?;
        let raw = value["samples"].as_array().ok_or_else(|| bad("samples"))?;
        let mut samples = Vec::with_capacity(raw.len());
        for pair in raw {
            let re = pair
                .get(0)
                .and_then(|v| v.as_f64())
                .ok_or_else(|| bad("samples"))?;
            let im = pair
                .get(1)
                .and_then(|v| v.as_f64())
                .ok_or_else(|| bad("samples"))?;
            samples.push(Complex64::new(re, im));
        }
        let grid = Grid::new(samples.len(), half_width)?;
        if lo == 0.0 && hi == 0.0 && samples.iter().all(|z| z.norm() == 0.0) {
            return Ok(GridFunction::zero(grid));
        }
        GridFunction::from_samples(grid, (lo, hi), samples)
    }

    pub(crate) fn with_samples(
        &self,
        support: (f64, f64),
        samples: Vec<Complex64>,
    ) -> GridFunction {
        GridFunction {
            grid: self.grid,
            support,
            samples,
        }
    }

    pub(crate) fn is_zero(&self) -> bool {
        self.samples.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }
}

fn union_support(a: &GridFunction, b: &GridFunction) -> (f64, f64) {
    match (a.is_zero(), b.is_zero()) {
        (true, true) => (0.0, 0.0),
        (true, false) => b.support,
        (false, true) => a.support,
        (false, false) => (a.support.0.min(b.support.0), a.support.1.max(b.support.1)),
    }
}

/// `exp(-1/(1-u^2))` on `|u| < 1`, zero elsewhere.
pub fn bump_profile(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - u * u)).exp()
    }
}

/// Derivative of [`bump_profile`] in `u`.
pub fn bump_profile_derivative(u: f64) -> f64 {
    if u.abs() >= 1.0 {
        0.0
    } else {
        let s = 1.0 - u * u;
        -2.0 * u / (s * s) * (-1.0 / s).exp()
    }
}
