use std::cell::RefCell;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;

use super::{Grid, GridFunction};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Largest zero-padded transform length used for momentum integrals.
pub(crate) const MAX_PADDED_LEN: usize = 1 << 20;

pub(crate) fn fft_in_place(buf: &mut [Complex64], inverse: bool) {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        let plan = if inverse {
            p.plan_fft_inverse(buf.len())
        } else {
            p.plan_fft_forward(buf.len())
        };
        plan.process(buf);
    });
}

fn signed_index(k: usize, n: usize) -> i64 {
    if k < n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Samples of the unitary transform `(2 pi)^{-1/2} int f(x) e^{-ipx} dx` at
/// `p_k = k dp`, stored in FFT order (non-negative momenta first).
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    dp: f64,
    values: Vec<Complex64>,
}

impl Spectrum {
    pub fn dp(&self) -> f64 {
        self.dp
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn momentum(&self, k: usize) -> f64 {
        signed_index(k, self.values.len()) as f64 * self.dp
    }

    pub fn momenta(&self) -> Vec<f64> {
        (0..self.values.len()).map(|k| self.momentum(k)).collect()
    }

    pub(crate) fn from_values(dp: f64, values: Vec<Complex64>) -> Self {
        Spectrum { dp, values }
    }
}

fn forward(samples: &[Complex64], dx: f64, half_width: f64, n_out: usize) -> Spectrum {
    let mut buf = vec![Complex64::new(0.0, 0.0); n_out];
    buf[..samples.len()].copy_from_slice(samples);
    fft_in_place(&mut buf, false);
    let dp = 2.0 * PI / (n_out as f64 * dx);
    let c = dx / (2.0 * PI).sqrt();
    for (k, v) in buf.iter_mut().enumerate() {
        let p = signed_index(k, n_out) as f64 * dp;
        *v *= Complex64::from_polar(c, p * half_width);
    }
    Spectrum { dp, values: buf }
}

/// Unitary Fourier transform on the native grid.
pub fn fourier(f: &GridFunction) -> Spectrum {
    let g = f.grid();
    forward(f.samples(), g.dx(), g.half_width(), g.n())
}

/// Inverse of [`fourier`] on the native grid.
pub fn inverse_fourier(grid: Grid, spectrum: &Spectrum) -> Vec<Complex64> {
    let n = grid.n();
    assert_eq!(spectrum.len(), n, "spectrum length must match the grid");
    let dx = grid.dx();
    let scale = (2.0 * PI).sqrt() / (dx * n as f64);
    let mut buf: Vec<Complex64> = spectrum
        .values
        .iter()
        .enumerate()
        .map(|(k, &v)| v * Complex64::from_polar(scale, -spectrum.momentum(k) * grid.half_width()))
        .collect();
    fft_in_place(&mut buf, true);
    buf
}

/// Transforms of the real and imaginary parts separately, `(Re f)^` and `(Im f)^`.
pub(crate) fn real_imag_parts(spec: &Spectrum) -> (Vec<Complex64>, Vec<Complex64>) {
    let n = spec.values.len();
    let mut re = Vec::with_capacity(n);
    let mut im = Vec::with_capacity(n);
    for k in 0..n {
        let f = spec.values[k];
        // transform of conj(f) at p_k; the Nyquist node picks up a sign from e^{i p L}
        let mut mirror = spec.values[(n - k) % n].conj();
        if k == n / 2 {
            mirror = -mirror;
        }
        re.push(0.5 * (f + mirror));
        im.push(Complex64::new(0.0, -0.5) * (f - mirror));
    }
    (re, im)
}

/// `(Re f)^` and `(Im f)^` on a zero-padded momentum grid of spacing `h`.
#[derive(Clone, Debug)]
pub(crate) struct SpectralParts {
    pub h: f64,
    pub re: Vec<Complex64>,
    pub im: Vec<Complex64>,
}

impl SpectralParts {
    pub fn momentum(&self, k: usize) -> f64 {
        signed_index(k, self.re.len()) as f64 * self.h
    }
}

pub(crate) fn padded_parts(f: &GridFunction, n_pad: usize) -> SpectralParts {
    let g = f.grid();
    let spec = forward(f.samples(), g.dx(), g.half_width(), n_pad.max(g.n()));
    let (re, im) = real_imag_parts(&spec);
    SpectralParts { h: spec.dp, re, im }
}

/// Transform length for momentum integrals: the padded box is wide enough that
/// products of spectra are smooth on the momentum step, and when affordable the
/// step resolves the mass scale `m` by a factor 8.
pub(crate) fn padded_len(grid: &Grid, radius: f64, mass: f64) -> usize {
    let dx = grid.dx();
    let base = grid.half_width().max(64.0 * radius);
    let mut target = base;
    if mass > 0.0 {
        let resolving = 8.0 * PI / mass;
        if 2.0 * resolving / dx <= MAX_PADDED_LEN as f64 {
            target = target.max(resolving);
        }
    }
    let needed = (2.0 * target / dx).ceil() as usize;
    needed
        .next_power_of_two()
        .clamp(grid.n(), MAX_PADDED_LEN.max(grid.n()))
}

/// Band-limited (trigonometric) interpolation of the samples at arbitrary points.
pub(crate) fn evaluate_at(f: &GridFunction, ys: &[f64]) -> Vec<Complex64> {
    let g = f.grid();
    let n = g.n();
    let mut d = f.samples().to_vec();
    fft_in_place(&mut d, false);
    let peak = d.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if peak == 0.0 {
        return vec![Complex64::new(0.0, 0.0); ys.len()];
    }
    let mut band = 0usize;
    for k in 1..n / 2 {
        if d[k].norm() > 1e-17 * peak || d[n - k].norm() > 1e-17 * peak {
            band = k;
        }
    }
    let x0 = -g.half_width();
    let period = n as f64 * g.dx();
    let inv_n = 1.0 / n as f64;
    ys.par_iter()
        .map(|&y| {
            let theta = 2.0 * PI * (y - x0) / period;
            let step = Complex64::from_polar(1.0, theta);
            let mut acc = Complex64::new(0.0, 0.0);
            let b = band as i64;
            let mut phase = Complex64::from_polar(1.0, -(b as f64) * theta);
            for (i, kk) in (-b..=b).enumerate() {
                if i % 64 == 0 {
                    phase = Complex64::from_polar(1.0, kk as f64 * theta);
                }
                let idx = if kk < 0 {
                    (kk + n as i64) as usize
                } else {
                    kk as usize
                };
                acc += d[idx] * phase;
                phase *= step;
            }
            acc * inv_n
        })
        .collect()
}
