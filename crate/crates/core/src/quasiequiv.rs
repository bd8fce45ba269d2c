//! Kernel estimates comparing the massive and massless vacua on an interval:
//! the difference kernels `Q-` and `Q+`, their bilinear forms, Fourier trace
//! diagnostics and a Galerkin model of `T` and `1 - T`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{guard, invalid, Error, Result};
use crate::scalinglimit::{linear_fit, LinearFit};
use crate::special::{
    bessel_i0, bessel_k0, bessel_k1, gauss_legendre, i1_over_half_x, k0_series_tail,
    k1_series_tail, EULER_GAMMA,
};
use crate::testfn::quadrature::{Multiplier, WeightRule};
use crate::testfn::random::{random_null_real, stream};
use crate::testfn::{
    fft_in_place, padded_len, padded_parts, sobolev_norm, zero_mode_tolerance, Grid, GridFunction,
    SpectralParts,
};
use crate::weyl::symplectic;

/// `K_0(x)` or `K_1(x)` at a positive argument.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BesselValue {
    pub order: u8,
    pub argument: f64,
    pub value: f64,
}

pub fn bessel_k(order: u8, x: f64) -> Result<BesselValue> {
    if !(x > 0.0 && x.is_finite()) {
        return Err(invalid("x", format!("{x} is not a positive argument")));
    }
    let value = match order {
        0 => bessel_k0(x),
        1 => bessel_k1(x),
        _ => return Err(invalid("order", format!("order {order} is not 0 or 1"))),
    };
    Ok(BesselValue {
        order,
        argument: x,
        value,
    })
}

/// Which difference kernel: `Q-` (inverse multipliers) or `Q+` (direct).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelSign {
    Minus,
    Plus,
}

impl KernelSign {
    pub fn name(self) -> &'static str {
        match self {
            KernelSign::Minus => "minus",
            KernelSign::Plus => "plus",
        }
    }

    fn multiplier(self) -> Multiplier {
        match self {
            KernelSign::Minus => Multiplier::Inverse,
            KernelSign::Plus => Multiplier::Direct,
        }
    }
}

impl std::str::FromStr for KernelSign {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "minus" | "-" => Ok(KernelSign::Minus),
            "plus" | "+" => Ok(KernelSign::Plus),
            _ => Err(invalid("sign", format!("`{s}` is not plus or minus"))),
        }
    }
}

fn check_mass(m: f64) -> Result<()> {
    if !(m > 0.0 && m.is_finite()) {
        return Err(invalid("mass", format!("{m} must be positive")));
    }
    Ok(())
}

/// `Q-(x) = K_0(m|x|) + log|x|`.
pub fn kernel_q_minus(x: f64, m: f64) -> Result<f64> {
    check_mass(m)?;
    if x == 0.0 || !x.is_finite() {
        return Err(invalid(
            "x",
            "Q- is evaluated away from 0; use kernel_q_minus_limit",
        ));
    }
    Ok(q_minus(x, m))
}

/// `lim_{x -> 0} Q-(x) = log(2/m) - gamma_E`.
pub fn kernel_q_minus_limit(m: f64) -> f64 {
    (2.0 / m).ln() - EULER_GAMMA
}

/// `Q+(x) = -(m/|x|) K_1(m|x|) + 1/x^2`.
pub fn kernel_q_plus(x: f64, m: f64) -> Result<f64> {
    check_mass(m)?;
    if x == 0.0 || !x.is_finite() {
        return Err(invalid("x", "Q+ diverges logarithmically at 0"));
    }
    Ok(q_plus(x, m))
}

fn q_minus(x: f64, m: f64) -> f64 {
    let z = m * x.abs();
    if z <= 2.0 {
        // the logarithms cancel analytically
        -((0.5 * z).ln() + EULER_GAMMA) * (bessel_i0(z) - 1.0)
            + kernel_q_minus_limit(m)
            + k0_series_tail(z)
    } else {
        bessel_k0(z) + x.abs().ln()
    }
}

fn q_plus(x: f64, m: f64) -> f64 {
    let z = m * x.abs();
    if z <= 2.0 {
        // -(z K_1(z) - 1) / x^2 with the 1/z term removed from the series
        -m * m * (0.5 * (0.5 * z).ln() * i1_over_half_x(z) - 0.25 * k1_series_tail(z))
    } else {
        -m / x.abs() * bessel_k1(z) + 1.0 / (x * x)
    }
}

/// Coefficient `a` and regular limit `c` in `Q+(x) = a log|x| + c + o(1)`.
fn q_plus_log_parts(m: f64) -> (f64, f64) {
    let a = -0.5 * m * m;
    (a, a * ((0.5 * m).ln() + EULER_GAMMA - 0.5))
}

/// Value to use at the singular node of a step-`h` trapezoid sum so that it
/// integrates `Q+` times a smooth function to high order. The trapezoid rule
/// on `log|x| g(x)` with the origin node dropped misses `h g(0) log(h / 2 pi)`.
fn q_plus_singular_node(m: f64, h: f64) -> f64 {
    let (a, c) = q_plus_log_parts(m);
    a * (h / (2.0 * PI)).ln() + c
}

/// How [`form_q`] evaluates the bilinear form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FormPath {
    /// `(2 pi)^{-1} int int f(x) g(y) Q(x - y)`.
    Position,
    /// `1/2 int (omega_m^{-1} - |p|^{-1}) conj(f^) g^` or `1/2 int (omega_m - |p|) conj(f^) g^`.
    Momentum,
}

fn check_null_real(name: &'static str, f: &GridFunction) -> Result<()> {
    if !f.is_real() {
        return Err(invalid(name, "must be real"));
    }
    let zero_mode = f.moment().re.abs() / (2.0 * PI).sqrt();
    let tolerance = zero_mode_tolerance(f);
    if zero_mode > tolerance {
        return Err(Error::ZeroMode {
            zero_mode,
            tolerance,
        });
    }
    Ok(())
}

pub fn form_q(
    sign: KernelSign,
    f: &GridFunction,
    g: &GridFunction,
    m: f64,
    path: FormPath,
) -> Result<f64> {
    check_mass(m)?;
    if f.grid() != g.grid() {
        return Err(Error::GridMismatch);
    }
    check_null_real("f", f)?;
    check_null_real("g", g)?;
    if f.is_zero() || g.is_zero() {
        return Ok(0.0);
    }
    match path {
        FormPath::Momentum => {
            let radius = f.support_radius().max(g.support_radius());
            let n_pad = padded_len(&f.grid(), radius, m);
            let w = difference_weights(sign, n_pad, padded_parts(f, n_pad).h, m, 0.0);
            Ok(spectral_form(
                &padded_parts(f, n_pad),
                &padded_parts(g, n_pad),
                &w,
            ))
        }
        FormPath::Position => Ok(position_form(sign, f, g, m)),
    }
}

/// Weights of `mult(omega_m) - mult(omega_ref)` on the padded momentum grid.
fn difference_weights(sign: KernelSign, n: usize, h: f64, m: f64, m_ref: f64) -> Vec<f64> {
    let a = WeightRule::new(n, h, m, sign.multiplier());
    let b = WeightRule::new(n, h, m_ref, sign.multiplier());
    a.weights()
        .iter()
        .zip(b.weights())
        .map(|(x, y)| x - y)
        .collect()
}

/// `1/2 sum_k w_k Re(conj(f^) g^)` for real `f`, `g`.
fn spectral_form(f: &SpectralParts, g: &SpectralParts, w: &[f64]) -> f64 {
    0.5 * w
        .iter()
        .enumerate()
        .map(|(k, wk)| wk * (f.re[k].conj() * g.re[k]).re)
        .sum::<f64>()
}

fn position_form(sign: KernelSign, f: &GridFunction, g: &GridFunction, m: f64) -> f64 {
    let dx = f.grid().dx();
    let (fs, gs) = (f.samples(), g.samples());
    let span = |s: &[Complex64]| {
        let first = s.iter().position(|v| v.re != 0.0).unwrap_or(0) as i64;
        let last = s.iter().rposition(|v| v.re != 0.0).unwrap_or(0) as i64;
        (first, last)
    };
    let ((f0, f1), (g0, g1)) = (span(fs), span(gs));
    let kernel_at_zero = match sign {
        KernelSign::Minus => kernel_q_minus_limit(m),
        KernelSign::Plus => q_plus_singular_node(m, dx),
    };
    let mut total = 0.0;
    // A_q = dx sum_j f_j g_{j-q}, then dx sum_q Q(q dx) A_q
    for q in (f0 - g1)..=(f1 - g0) {
        let lo = f0.max(g0 + q);
        let hi = f1.min(g1 + q);
        let a: f64 = (lo..=hi)
            .map(|j| fs[j as usize].re * gs[(j - q) as usize].re)
            .sum::<f64>()
            * dx;
        let x = q as f64 * dx;
        let k = match (sign, q) {
            (_, 0) => kernel_at_zero,
            (KernelSign::Minus, _) => q_minus(x, m),
            (KernelSign::Plus, _) => q_plus(x, m),
        };
        total += k * a;
    }
    total * dx / (2.0 * PI)
}

/// Smooth cutoff: 1 on `[-inner, inner]`, 0 outside `(-outer, outer)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Cutoff {
    pub inner: f64,
    pub outer: f64,
}

impl Default for Cutoff {
    fn default() -> Self {
        Cutoff {
            inner: 2.0,
            outer: 3.0,
        }
    }
}

impl Cutoff {
    fn step(u: f64) -> (f64, f64) {
        if u <= 0.0 {
            return (0.0, 0.0);
        }
        if u >= 1.0 {
            return (1.0, 0.0);
        }
        let s = 1.0 / (1.0 + (1.0 / u - 1.0 / (1.0 - u)).exp());
        (
            s,
            s * (1.0 - s) * (1.0 / (u * u) + 1.0 / ((1.0 - u) * (1.0 - u))),
        )
    }

    /// `(phi(xi), phi'(xi))`.
    pub fn eval(&self, xi: f64) -> (f64, f64) {
        let w = self.outer - self.inner;
        let (s, ds) = Self::step((self.outer - xi.abs()) / w);
        (s, -xi.signum() * ds / w)
    }
}

/// Period of the Fourier expansion is `[-4, 4]`.
const HALF_PERIOD: f64 = 4.0;
/// Sample count on the period for the trace diagnostic.
pub const TRACE_SAMPLES: usize = 1 << 16;

/// Fourier coefficients `Q_k` of `Q phi` on `[-4, 4]` and their summability.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceDiagnostic {
    pub sign: KernelSign,
    pub mass: f64,
    pub k: usize,
    /// `Q_k` for `k = 0..=2K`. The expanded functions are real, so `Q_{-k} = conj(Q_k)`.
    pub coefficients: Vec<Complex64>,
    /// Least-squares fit of `log|Q_k|` against `log k` on `K/8 <= k <= K`.
    pub decay_fit: LinearFit,
    /// `-slope` of the fit.
    pub decay_exponent: f64,
    /// Weighted sum over `|k| <= K`: `sum |Q_k| (1 + |k|)` for minus, `sum_{k != 0} |Q_k| / sqrt|k|` for plus.
    pub weighted_sum: f64,
    /// The same over `|k| <= 2K`.
    pub weighted_sum_doubled: f64,
    /// `(S(2K) - S(K)) / S(2K)`.
    pub cauchy_increment: f64,
}

impl TraceDiagnostic {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,q_k_re,q_k_im,q_k_abs\n");
        for (k, q) in self.coefficients.iter().enumerate() {
            out.push_str(&format!(
                "{k},{:.17e},{:.17e},{:.17e}\n",
                q.re,
                q.im,
                q.norm()
            ));
        }
        out
    }

    pub fn to_json(&self) -> Value {
        json!({
            "sign": self.sign,
            "mass": self.mass,
            "k": self.k,
            "decay_exponent": self.decay_exponent,
            "decay_fit": self.decay_fit,
            "weighted_sum": self.weighted_sum,
            "weighted_sum_doubled": self.weighted_sum_doubled,
            "cauchy_increment": self.cauchy_increment,
        })
    }
}

fn integrate_gl(f: &impl Fn(f64) -> f64, a: f64, b: f64, rule: &[(f64, f64)]) -> f64 {
    let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
    r * rule.iter().map(|&(x, w)| w * f(c + r * x)).sum::<f64>()
}

/// `int_0^b f` for `f` with an integrable singularity at 0, on geometrically graded panels.
fn integrate_from_zero(f: &impl Fn(f64) -> f64, b: f64) -> f64 {
    let rule = gauss_legendre(20);
    let mut total = 0.0;
    let mut hi = b;
    for _ in 0..60 {
        let lo = 0.5 * hi;
        total += integrate_gl(f, lo, hi, &rule);
        hi = lo;
    }
    total
}

/// Fourier coefficients `Q_k = (1/8) int_{-4}^{4} Q phi e^{-i pi k xi / 4}` for minus, and for
/// plus the coefficients of `(R phi)'` with `R(xi) = int_{-2}^{xi} Q+`.
pub fn fourier_trace_diagnostic(
    sign: KernelSign,
    m: f64,
    cutoff: Cutoff,
    k: usize,
) -> Result<TraceDiagnostic> {
    check_mass(m)?;
    if k < 64 {
        return Err(invalid("k", format!("K = {k} is below 64")));
    }
    if cutoff.inner < 2.0 || cutoff.outer <= cutoff.inner {
        return Err(invalid("cutoff", "must equal 1 on [-2, 2]"));
    }
    if cutoff.outer >= HALF_PERIOD {
        return Err(invalid(
            "cutoff",
            "must vanish before the period boundary at 4",
        ));
    }
    let n = TRACE_SAMPLES;
    if 2 * k >= n / 2 {
        return Err(invalid("k", "too many coefficients for the sample count"));
    }
    let h = 2.0 * HALF_PERIOD / n as f64;
    let xi = |j: usize| -HALF_PERIOD + j as f64 * h;
    let origin = n / 2;
    let mut samples: Vec<Complex64> = match sign {
        KernelSign::Minus => (0..n)
            .map(|j| {
                let x = xi(j);
                let q = if j == origin {
                    kernel_q_minus_limit(m)
                } else {
                    q_minus(x, m)
                };
                Complex64::new(q * cutoff.eval(x).0, 0.0)
            })
            .collect(),
        KernelSign::Plus => {
            let r = plus_primitive(m, cutoff, h);
            (0..n)
                .map(|j| {
                    let x = xi(j);
                    let (phi, dphi) = cutoff.eval(x);
                    let q = if j == origin {
                        q_plus_singular_node(m, h)
                    } else {
                        q_plus(x, m)
                    };
                    let rv = if dphi != 0.0 { r(x) } else { 0.0 };
                    Complex64::new(q * phi + rv * dphi, 0.0)
                })
                .collect()
        }
    };
    fft_in_place(&mut samples, false);
    let scale = h / (2.0 * HALF_PERIOD);
    let mut coefficients: Vec<Complex64> = (0..=2 * k)
        .map(|kk| {
            let sgn = if kk % 2 == 0 { 1.0 } else { -1.0 };
            sgn * scale * samples[kk]
        })
        .collect();
    if sign == KernelSign::Plus {
        // (R phi)' is a derivative of a periodic function
        coefficients[0] = Complex64::new(0.0, 0.0);
    }
    let weight = |kk: usize| match sign {
        KernelSign::Minus => 1.0 + kk as f64,
        KernelSign::Plus => {
            if kk == 0 {
                0.0
            } else {
                1.0 / (kk as f64).sqrt()
            }
        }
    };
    let partial = |kmax: usize| {
        let mut s = coefficients[0].norm() * weight(0);
        for (kk, q) in coefficients.iter().enumerate().take(kmax + 1).skip(1) {
            s += 2.0 * q.norm() * weight(kk);
        }
        s
    };
    let (s1, s2) = (partial(k), partial(2 * k));
    let (xs, ys): (Vec<f64>, Vec<f64>) = ((k / 8).max(1)..=k)
        .filter(|&kk| coefficients[kk].norm() != 0.0)
        .map(|kk| ((kk as f64).ln(), coefficients[kk].norm().ln()))
        .unzip();
    let decay_fit = linear_fit(&xs, &ys)?;
    Ok(TraceDiagnostic {
        sign,
        mass: m,
        k,
        coefficients,
        decay_fit,
        decay_exponent: -decay_fit.slope,
        weighted_sum: s1,
        weighted_sum_doubled: s2,
        cauchy_increment: (s2 - s1) / s2,
    })
}

/// `R(xi) = int_{-2}^{xi} Q+` on the cutoff's transition region `2 <= |xi| <= outer`,
/// tabulated on the sample grid and looked up by node.
fn plus_primitive(m: f64, cutoff: Cutoff, h: f64) -> impl Fn(f64) -> f64 {
    let f = move |x: f64| q_plus(x, m);
    let (a, _) = q_plus_log_parts(m);
    // int_0^2 (Q+ - a log x) + a (2 log 2 - 2)
    let regular = |x: f64| q_plus(x, m) - a * x.ln();
    let half = integrate_from_zero(&regular, 2.0) + a * (2.0 * 2f64.ln() - 2.0);
    let r2 = 2.0 * half;
    let rule = gauss_legendre(8);
    let steps = ((cutoff.outer - 2.0) / h).ceil() as usize + 1;
    let mut table = Vec::with_capacity(steps + 1);
    let mut acc = r2;
    table.push(acc);
    for i in 0..steps {
        let lo = 2.0 + i as f64 * h;
        acc += integrate_gl(&f, lo, lo + h, &rule);
        table.push(acc);
    }
    move |x: f64| {
        let i = ((x.abs() - 2.0) / h).round().max(0.0) as usize;
        let v = table[i.min(table.len() - 1)];
        // R is odd about 0 up to the constant: R(-|x|) = R(2) - R(|x|)
        if x >= 0.0 {
            v
        } else {
            r2 - v
        }
    }
}

/// Empirical norm-equivalence ratios over random null-integral functions.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NormEquivalenceReport {
    pub samples: usize,
    pub mass: f64,
    /// `min, max` of `||f||_{m,1} / ||f||_{0,1}`.
    pub plus_ratio: (f64, f64),
    /// `min, max` of `||f||_{0,-1} / ||f||_{m,-1}`.
    pub minus_ratio: (f64, f64),
    /// Samples violating `||f||_{0,1} <= ||f||_{m,1}` or `||f||_{m,-1} <= ||f||_{0,-1}`.
    pub trivial_violations: usize,
    /// Momentum nodes violating `omega_m <= sqrt(1 + m^2) |p| + m 1_{|p| <= 1}`.
    pub omega_violations: usize,
}

pub fn norm_equivalence(
    grid: Grid,
    interval: (f64, f64),
    m: f64,
    samples: usize,
    seed: u64,
) -> Result<NormEquivalenceReport> {
    check_mass(m)?;
    if samples < 20 {
        return Err(invalid("samples", format!("{samples} is below 20")));
    }
    let mut rng = stream(seed);
    let mut plus = (f64::INFINITY, 0.0f64);
    let mut minus = (f64::INFINITY, 0.0f64);
    let mut trivial_violations = 0;
    let mut omega_violations = 0;
    let slack = 1.0 + 1e-12;
    for _ in 0..samples {
        let f = random_null_real(&mut rng, grid, interval.0, interval.1)?;
        let norm = |mass: f64, s: i32| -> Result<f64> {
            sobolev_norm(&f, mass, s)?
                .finite()
                .ok_or_else(|| guard("norm_equivalence", "divergent norm"))
        };
        let (p_m, p_0, n_m, n_0) = (norm(m, 1)?, norm(0.0, 1)?, norm(m, -1)?, norm(0.0, -1)?);
        if p_0 == 0.0 || n_m == 0.0 {
            return Err(invalid("sample", "degenerate sample with vanishing norm"));
        }
        if p_0 > p_m * slack || n_m > n_0 * slack {
            trivial_violations += 1;
        }
        let (rp, rm) = (p_m / p_0, n_0 / n_m);
        plus = (plus.0.min(rp), plus.1.max(rp));
        minus = (minus.0.min(rm), minus.1.max(rm));
        let n_pad = padded_len(&grid, f.support_radius(), m);
        let parts = padded_parts(&f, n_pad);
        let c = (1.0 + m * m).sqrt();
        for kk in 0..n_pad {
            let p = parts.momentum(kk).abs();
            let om = (p * p + m * m).sqrt();
            let rhs = c * p + if p <= 1.0 { m } else { 0.0 };
            if om > rhs * slack {
                omega_violations += 1;
            }
        }
    }
    Ok(NormEquivalenceReport {
        samples,
        mass: m,
        plus_ratio: plus,
        minus_ratio: minus,
        trivial_violations,
        omega_violations,
    })
}

/// `|Im <f, g>_m - 1/2 Im int conj(f) g|`.
pub fn inner_consistency(f: &GridFunction, g: &GridFunction, m: f64) -> Result<f64> {
    let ip = crate::testfn::mass_inner(f, g, m)?;
    Ok((ip.im - 0.5 * symplectic(f, g)).abs())
}

/// Largest admissible Galerkin block size.
pub const MAX_BASIS: usize = 128;
/// Gram matrices with a larger condition number are rejected.
pub const MAX_CONDITION: f64 = 1e12;

/// Finite-dimensional model of `T` on an interval. The real block holds `N`
/// real null-integral functions (the `Q-` sector), the imaginary block the
/// same number multiplied by `i` (the `Q+` sector). Both are orthonormal for
/// `Re <., .>_m`.
#[derive(Clone, Debug)]
pub struct GalerkinModel {
    interval: (f64, f64),
    basis_size: usize,
    mass: f64,
    reference_mass: f64,
    basis: Vec<GridFunction>,
    gram_m: DMatrix<f64>,
    gram_0: DMatrix<f64>,
    omega: DMatrix<f64>,
    q_forms: DMatrix<f64>,
}

impl GalerkinModel {
    pub fn interval(&self) -> (f64, f64) {
        self.interval
    }

    pub fn basis_size(&self) -> usize {
        self.basis_size
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn reference_mass(&self) -> f64 {
        self.reference_mass
    }

    pub fn basis(&self) -> &[GridFunction] {
        &self.basis
    }

    pub fn gram_m(&self) -> &DMatrix<f64> {
        &self.gram_m
    }

    pub fn gram_0(&self) -> &DMatrix<f64> {
        &self.gram_0
    }

    pub fn omega(&self) -> &DMatrix<f64> {
        &self.omega
    }

    /// `formQ-` and `formQ+` blocks on the orthonormal basis, from the momentum path.
    pub fn q_forms(&self) -> &DMatrix<f64> {
        &self.q_forms
    }
}

/// Overlapping bump derivatives at even spacing: `N` null-integral functions on `[lo, hi]`.
fn raw_family(grid: Grid, (lo, hi): (f64, f64), n: usize) -> Result<Vec<GridFunction>> {
    let s = (hi - lo) / (n + 3) as f64;
    (0..n)
        .map(|k| {
            GridFunction::bump_derivative(
                grid,
                lo + (k + 2) as f64 * s,
                2.0 * s,
                Complex64::new(1.0, 0.0),
            )
        })
        .collect()
}

fn weighted_gram(parts: &[SpectralParts], w: &[f64]) -> DMatrix<f64> {
    let n = parts.len();
    let entries: Vec<f64> = (0..n * n)
        .into_par_iter()
        .map(|c| {
            let (i, j) = (c / n, c % n);
            if j < i {
                0.0
            } else {
                spectral_form(&parts[i], &parts[j], w)
            }
        })
        .collect();
    let mut g = DMatrix::from_row_slice(n, n, &entries);
    for i in 0..n {
        for j in 0..i {
            g[(i, j)] = g[(j, i)];
        }
    }
    g
}

fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, k) = (a.nrows(), b.nrows());
    let mut out = DMatrix::zeros(n + k, n + k);
    out.view_mut((0, 0), (n, n)).copy_from(a);
    out.view_mut((n, n), (k, k)).copy_from(b);
    out
}

fn condition_number(g: &DMatrix<f64>) -> f64 {
    let e = SymmetricEigen::new(g.clone()).eigenvalues;
    let max = e.iter().cloned().fold(f64::MIN, f64::max);
    let min = e.iter().cloned().fold(f64::MAX, f64::min);
    if min <= 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

/// Inverse Cholesky factor `L^{-1}` of a Gram matrix `G = L L^T`.
fn orthonormalizer(g: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    let cond = condition_number(g);
    if cond > MAX_CONDITION {
        return Err(guard(
            "gram_condition",
            format!("{what} Gram matrix has condition number {cond:.3e}"),
        ));
    }
    let chol = g.clone().cholesky().ok_or_else(|| {
        guard(
            "gram_condition",
            format!("{what} Gram matrix is not positive"),
        )
    })?;
    let l = chol.l();
    l.solve_lower_triangular(&DMatrix::identity(g.nrows(), g.nrows()))
        .ok_or_else(|| {
            guard(
                "gram_condition",
                format!("{what} Cholesky factor is singular"),
            )
        })
}

fn combine(
    funcs: &[GridFunction],
    coeffs: &DMatrix<f64>,
    unit: Complex64,
) -> Result<Vec<GridFunction>> {
    let grid = funcs[0].grid();
    let support = funcs
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), f| {
            (a.min(f.support().0), b.max(f.support().1))
        });
    (0..coeffs.nrows())
        .map(|i| {
            let mut samples = vec![Complex64::new(0.0, 0.0); grid.n()];
            for (j, f) in funcs.iter().enumerate() {
                let c = coeffs[(i, j)];
                if c != 0.0 {
                    for (s, v) in samples.iter_mut().zip(f.samples()) {
                        *s += unit * (c * v.re);
                    }
                }
            }
            GridFunction::from_samples(grid, support, samples)
        })
        .collect()
}

/// [`build_galerkin_with_reference`] against the massless form.
pub fn build_galerkin(grid: Grid, interval: (f64, f64), m: f64, n: usize) -> Result<GalerkinModel> {
    build_galerkin_with_reference(grid, interval, m, 0.0, n)
}

/// Galerkin model with `gram_0` taken at `reference_mass` (0 for the massless vacuum).
pub fn build_galerkin_with_reference(
    grid: Grid,
    interval: (f64, f64),
    m: f64,
    reference_mass: f64,
    n: usize,
) -> Result<GalerkinModel> {
    check_mass(m)?;
    if !(reference_mass >= 0.0 && reference_mass.is_finite()) {
        return Err(invalid("reference_mass", "must be nonnegative"));
    }
    if n == 0 || n > MAX_BASIS {
        return Err(invalid(
            "basis_size",
            format!("{n} is outside 1..={MAX_BASIS}"),
        ));
    }
    let (lo, hi) = interval;
    if !(lo < hi) {
        return Err(invalid("interval", "empty"));
    }
    let raw = raw_family(grid, interval, n)?;
    let radius = lo.abs().max(hi.abs());
    let n_pad = padded_len(
        &grid,
        radius,
        m.min(if reference_mass > 0.0 {
            reference_mass
        } else {
            m
        }),
    );
    let raw_parts: Vec<SpectralParts> = raw.par_iter().map(|f| padded_parts(f, n_pad)).collect();
    let h = raw_parts[0].h;
    let weights =
        |mass: f64, mult: Multiplier| WeightRule::new(n_pad, h, mass, mult).weights().to_vec();
    let (inv_m, dir_m) = (
        weights(m, Multiplier::Inverse),
        weights(m, Multiplier::Direct),
    );
    let (inv_0, dir_0) = (
        weights(reference_mass, Multiplier::Inverse),
        weights(reference_mass, Multiplier::Direct),
    );

    let minus_m = weighted_gram(&raw_parts, &inv_m);
    let plus_m = weighted_gram(&raw_parts, &dir_m);
    let li_minus = orthonormalizer(&minus_m, "H-")?;
    let li_plus = orthonormalizer(&plus_m, "H+")?;
    let sandwich = |li: &DMatrix<f64>, g: &DMatrix<f64>| li * g * li.transpose();

    let gram_m = block_diag(&sandwich(&li_minus, &minus_m), &sandwich(&li_plus, &plus_m));
    let gram_0 = block_diag(
        &sandwich(&li_minus, &weighted_gram(&raw_parts, &inv_0)),
        &sandwich(&li_plus, &weighted_gram(&raw_parts, &dir_0)),
    );

    let re_basis = combine(&raw, &li_minus, Complex64::new(1.0, 0.0))?;
    let im_basis = combine(&raw, &li_plus, Complex64::new(0.0, 1.0))?;
    let basis: Vec<GridFunction> = re_basis.iter().chain(&im_basis).cloned().collect();

    // 1/2 Im int conj(f) g from the samples of the orthonormal functions
    let dim = 2 * n;
    let entries: Vec<f64> = (0..dim * dim)
        .into_par_iter()
        .map(|c| {
            let (i, j) = (c / dim, c % dim);
            if j <= i {
                0.0
            } else {
                0.5 * symplectic(&basis[i], &basis[j])
            }
        })
        .collect();
    let mut omega = DMatrix::from_row_slice(dim, dim, &entries);
    for i in 0..dim {
        for j in 0..i {
            omega[(i, j)] = -omega[(j, i)];
        }
    }

    // the formQ momentum path on the orthonormal functions
    let re_real: Vec<GridFunction> = re_basis.clone();
    let im_real: Vec<GridFunction> = im_basis.iter().map(|f| f.imag_part()).collect();
    let q_block = |funcs: &[GridFunction], sign: KernelSign| {
        let parts: Vec<SpectralParts> = funcs.par_iter().map(|f| padded_parts(f, n_pad)).collect();
        let w = difference_weights(sign, n_pad, h, m, reference_mass);
        weighted_gram(&parts, &w)
    };
    let q_forms = block_diag(
        &q_block(&re_real, KernelSign::Minus),
        &q_block(&im_real, KernelSign::Plus),
    );

    Ok(GalerkinModel {
        interval,
        basis_size: n,
        mass: m,
        reference_mass,
        basis,
        gram_m,
        gram_0,
        omega,
        q_forms,
    })
}

/// Spectral data of `T` and `1 - T` from a Galerkin model.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OperatorDiagnostics {
    pub basis_size: usize,
    /// Eigenvalues of `1 - T`, by decreasing magnitude.
    pub eigenvalues: Vec<f64>,
    pub trace_norm: f64,
    /// Partial sums of `|eigenvalue|` in the order above.
    pub partial_trace_norms: Vec<f64>,
    /// `max |gram_m - 1|`.
    pub gram_m_residual: f64,
    /// `max |omega + omega^T|`.
    pub omega_antisymmetry: f64,
    /// Smallest singular value of the `R_0` matrix.
    pub r0_min_singular_value: f64,
    /// `max |R_m R_0^{-1} - T|`; `None` when `R_0` is numerically singular.
    pub cross_check_residual: Option<f64>,
    pub cross_check_skipped: bool,
    /// `max |(gram_m - gram_0) - (formQ- (+) formQ+)|`.
    pub matrix_element_residual: f64,
}

impl OperatorDiagnostics {
    pub fn eigenvalues_csv(&self) -> String {
        let mut out = String::from("index,eigenvalue,partial_trace_norm\n");
        for (i, (e, s)) in self
            .eigenvalues
            .iter()
            .zip(&self.partial_trace_norms)
            .enumerate()
        {
            out.push_str(&format!("{i},{e:.17e},{s:.17e}\n"));
        }
        out
    }
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0f64, |a, v| a.max(v.abs()))
}

pub fn operator_diagnostics(gm: &GalerkinModel) -> Result<OperatorDiagnostics> {
    let dim = gm.gram_m.nrows();
    let id = DMatrix::<f64>::identity(dim, dim);
    let chol_m = gm
        .gram_m
        .clone()
        .cholesky()
        .ok_or_else(|| guard("gram_condition", "gram_m is not positive"))?;
    let r_m = chol_m.solve(&gm.omega);
    let t = chol_m.solve(&gm.gram_0);

    // 1 - T = G_m^{-1}(G_m - G_0), similar to the symmetric L^{-1}(G_m - G_0)L^{-T}
    let li = chol_m
        .l()
        .solve_lower_triangular(&id)
        .ok_or_else(|| guard("gram_condition", "singular factor"))?;
    let sym = &li * (&gm.gram_m - &gm.gram_0) * li.transpose();
    let sym = (&sym + sym.transpose()) * 0.5;
    let mut eigenvalues: Vec<f64> = SymmetricEigen::new(sym)
        .eigenvalues
        .iter()
        .cloned()
        .collect();
    eigenvalues.sort_by(|a, b| b.abs().total_cmp(&a.abs()));
    let mut acc = 0.0;
    let partial_trace_norms: Vec<f64> = eigenvalues
        .iter()
        .map(|e| {
            acc += e.abs();
            acc
        })
        .collect();

    let (r0_min_singular_value, cross_check_residual) = match gm.gram_0.clone().cholesky() {
        Some(chol_0) => {
            let r_0 = chol_0.solve(&gm.omega);
            let sv = r_0.singular_values();
            let smax = sv.iter().cloned().fold(0.0f64, f64::max);
            let smin = sv.iter().cloned().fold(f64::INFINITY, f64::min);
            let residual = if smin > 1e-10 * smax {
                r_0.clone()
                    .lu()
                    .try_inverse()
                    .map(|inv| max_abs(&(&r_m * inv - &t)))
            } else {
                None
            };
            (smin, residual)
        }
        None => (0.0, None),
    };

    Ok(OperatorDiagnostics {
        basis_size: gm.basis_size,
        trace_norm: acc,
        eigenvalues,
        partial_trace_norms,
        gram_m_residual: max_abs(&(&gm.gram_m - &id)),
        omega_antisymmetry: max_abs(&(&gm.omega + gm.omega.transpose())),
        r0_min_singular_value,
        cross_check_skipped: cross_check_residual.is_none(),
        cross_check_residual,
        matrix_element_residual: max_abs(&(&gm.gram_m - &gm.gram_0 - &gm.q_forms)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testfn::random::random_null_real;

    fn grid() -> Grid {
        Grid::new(4096, 8.0).unwrap()
    }

    // mpmath, 40 digits
    const K0_1: f64 = 0.42102443824070833333562737921260903614;
    const K1_1: f64 = 0.60190723019723457473754000153561733926;
    const K0_2_5: f64 = 0.062347553200366186029169529476013925996;
    const K1_7: f64 = 0.00045418248688489697123995940271024363127;

    #[test]
    fn bessel_values_and_errors() {
        assert!((bessel_k(0, 1.0).unwrap().value - K0_1).abs() < 1e-15);
        assert!((bessel_k(1, 1.0).unwrap().value - K1_1).abs() < 1e-15);
        assert!((bessel_k(0, 2.5).unwrap().value / K0_2_5 - 1.0).abs() < 1e-13);
        assert!((bessel_k(1, 7.0).unwrap().value / K1_7 - 1.0).abs() < 1e-13);
        assert!(bessel_k(0, 0.0).is_err());
        assert!(bessel_k(1, -1.0).is_err());
        assert!(bessel_k(2, 1.0).is_err());
    }

    #[test]
    fn kernel_limits() {
        assert!((kernel_q_minus(1e-9, 1.0).unwrap() - (2f64.ln() - EULER_GAMMA)).abs() < 1e-12);
        assert!(kernel_q_minus(0.0, 1.0).is_err());
        // large argument: K_0 has decayed
        assert!((kernel_q_minus(45.0, 1.0).unwrap() - 45f64.ln()).abs() < 1e-12);
        assert_eq!(
            kernel_q_minus(0.7, 1.3).unwrap(),
            kernel_q_minus(-0.7, 1.3).unwrap()
        );
        let x = 1e-6;
        let b = kernel_q_plus(x, 1.0).unwrap() + 0.5 * (0.5 * x).ln();
        assert!((b - 0.5 * (0.5 - EULER_GAMMA)).abs() < 1e-9);
        assert!((kernel_q_plus(50.0, 1.0).unwrap() * 2500.0 - 1.0).abs() < 1e-12);
        assert!(kernel_q_plus(0.0, 1.0).is_err());
    }

    #[test]
    fn series_and_direct_branches_agree() {
        for &m in &[0.5, 1.0, 2.0] {
            let x = 2.0 / m;
            let below = q_minus(x * (1.0 - 1e-12), m);
            let direct = bessel_k0(m * x) + x.ln();
            assert!((below - direct).abs() < 1e-12);
            let below = q_plus(x * (1.0 - 1e-12), m);
            let direct = -m / x * bessel_k1(m * x) + 1.0 / (x * x);
            assert!((below - direct).abs() < 1e-11);
        }
    }

    #[test]
    fn form_q_two_paths_agree() {
        let g = grid();
        let mut rng = stream(7);
        for _ in 0..4 {
            let f = random_null_real(&mut rng, g, -1.0, 1.0).unwrap();
            let h = random_null_real(&mut rng, g, -1.0, 1.0).unwrap();
            for sign in [KernelSign::Minus, KernelSign::Plus] {
                for &m in &[0.5, 1.0, 2.0] {
                    let a = form_q(sign, &f, &h, m, FormPath::Position).unwrap();
                    let b = form_q(sign, &f, &h, m, FormPath::Momentum).unwrap();
                    assert!(
                        (a - b).abs() < 1e-4 * b.abs().max(1.0),
                        "{sign:?} m {m}: {a} vs {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn form_q_plus_is_nonnegative_on_the_diagonal() {
        let g = grid();
        let mut rng = stream(3);
        let f = random_null_real(&mut rng, g, -1.0, 1.0).unwrap();
        assert!(form_q(KernelSign::Plus, &f, &f, 1.0, FormPath::Momentum).unwrap() >= 0.0);
        let zero = GridFunction::zero(g);
        assert_eq!(
            form_q(KernelSign::Minus, &zero, &zero, 1.0, FormPath::Position).unwrap(),
            0.0
        );
        let b = GridFunction::bump(g, 0.0, 1.0, Complex64::new(1.0, 0.0)).unwrap();
        assert!(form_q(KernelSign::Minus, &b, &f, 1.0, FormPath::Momentum).is_err());
    }

    #[test]
    fn cutoff_shape() {
        let c = Cutoff::default();
        assert_eq!(c.eval(1.9).0, 1.0);
        assert_eq!(c.eval(-2.0).0, 1.0);
        assert_eq!(c.eval(3.2).0, 0.0);
        let (v, d) = c.eval(2.5);
        assert!((v - 0.5).abs() < 1e-15 && d < 0.0);
        let e = 1e-6;
        let num = (c.eval(2.3 + e).0 - c.eval(2.3 - e).0) / (2.0 * e);
        assert!((num - c.eval(2.3).1).abs() < 1e-6);
        assert!(fourier_trace_diagnostic(
            KernelSign::Minus,
            1.0,
            Cutoff {
                inner: 1.5,
                outer: 3.0
            },
            64
        )
        .is_err());
    }

    #[test]
    fn zeroth_coefficient_matches_direct_quadrature() {
        let m = 1.0;
        let c = Cutoff::default();
        let d = fourier_trace_diagnostic(KernelSign::Minus, m, c, 64).unwrap();
        let f = |x: f64| q_minus(x, m) * c.eval(x).0;
        let rule = gauss_legendre(20);
        let mut direct = integrate_from_zero(&f, 1.0);
        for i in 0..40 {
            let a = 1.0 + i as f64 * 0.05;
            direct += integrate_gl(&f, a, a + 0.05, &rule);
        }
        let oracle = 2.0 * direct / 8.0;
        assert!((d.coefficients[0].re - oracle).abs() < 1e-8 && d.coefficients[0].im.abs() < 1e-12);
    }

    #[test]
    fn plus_coefficients_match_mpmath() {
        // (i w / 8) int R phi e^{-i w xi} at m = 1, w = pi k / 4, default cutoff
        let oracle = [
            (1usize, 0.33566904217028296514, 0.25506562955520669767),
            (5, 0.26875067242847751808, -0.086012973795602874441),
            (12, 0.016871324844446736202, -0.060478018262626267792),
        ];
        let d = fourier_trace_diagnostic(KernelSign::Plus, 1.0, Cutoff::default(), 64).unwrap();
        for (k, re, im) in oracle {
            let q = d.coefficients[k];
            assert!(
                (q.re - re).abs() < 1e-9 && (q.im - im).abs() < 1e-9,
                "k {k}: {q}"
            );
        }
        assert_eq!(d.coefficients[0].norm(), 0.0);
    }

    #[test]
    fn minus_coefficients_are_real() {
        let d = fourier_trace_diagnostic(KernelSign::Minus, 0.7, Cutoff::default(), 64).unwrap();
        assert!(d.coefficients.iter().all(|q| q.im.abs() < 1e-12));
    }

    #[test]
    fn coefficients_are_summable() {
        for sign in [KernelSign::Minus, KernelSign::Plus] {
            let d = fourier_trace_diagnostic(sign, 1.0, Cutoff::default(), 128).unwrap();
            assert!(
                d.cauchy_increment < 0.05,
                "{sign:?}: {}",
                d.cauchy_increment
            );
            assert!(d.decay_exponent > 0.5);
        }
    }

    #[test]
    fn inner_consistency_is_tiny() {
        let g = grid();
        let mut rng = stream(11);
        let f = crate::testfn::random::random_null_symbol(&mut rng, g, -1.0, 1.0).unwrap();
        let h = crate::testfn::random::random_null_symbol(&mut rng, g, -0.5, 1.5).unwrap();
        for &m in &[0.5, 1.0, 2.0] {
            assert!(inner_consistency(&f, &h, m).unwrap() < 1e-9);
        }
        let r = random_null_real(&mut rng, g, -1.0, 1.0).unwrap();
        assert!(inner_consistency(&r, &r, 1.0).unwrap() < 1e-15);
    }

    #[test]
    fn norm_equivalence_trivial_inequalities() {
        let r = norm_equivalence(grid(), (-1.0, 1.0), 1.0, 20, 5).unwrap();
        assert_eq!(r.trivial_violations, 0);
        assert_eq!(r.omega_violations, 0);
        assert!(r.plus_ratio.0 >= 1.0 && r.minus_ratio.0 >= 1.0);
        assert!(r.plus_ratio.1.is_finite() && r.minus_ratio.1.is_finite());
        assert!(norm_equivalence(grid(), (-1.0, 1.0), 1.0, 10, 5).is_err());
    }

    #[test]
    fn galerkin_contracts() {
        let g = Grid::new(4096, 4.0).unwrap();
        let gm = build_galerkin(g, (-1.0, 1.0), 1.0, 8).unwrap();
        let d = operator_diagnostics(&gm).unwrap();
        assert!(d.gram_m_residual < 1e-8, "{}", d.gram_m_residual);
        assert!(d.omega_antisymmetry < 1e-12);
        assert!(d.matrix_element_residual < 1e-5);
        for f in gm.basis() {
            assert!(f.moment().norm() < 1e-10);
        }
        let e = SymmetricEigen::new(gm.gram_0().clone()).eigenvalues;
        assert!(e.iter().all(|v| *v > 0.0));
        if let Some(r) = d.cross_check_residual {
            assert!(r < 1e-6, "{r}");
        }
        assert!(d.eigenvalues.windows(2).all(|w| w[0].abs() >= w[1].abs()));
    }

    #[test]
    fn equal_masses_give_identity() {
        let g = Grid::new(4096, 4.0).unwrap();
        let gm = build_galerkin_with_reference(g, (-1.0, 1.0), 1.0, 1.0, 6).unwrap();
        let d = operator_diagnostics(&gm).unwrap();
        assert!(d.trace_norm < 1e-8, "{}", d.trace_norm);
    }

    #[test]
    fn bessel_small_argument_and_derivative() {
        let x = 1e-6;
        assert!((bessel_k(1, x).unwrap().value * x - 1.0).abs() < 1e-5);
        assert!((bessel_k(0, x).unwrap().value + (0.5 * x).ln() + EULER_GAMMA).abs() < 1e-5);
        let e = 1e-5;
        for i in 0..20 {
            let x = 0.1 + 0.4 * i as f64;
            let d = (bessel_k0(x + e) - bessel_k0(x - e)) / (2.0 * e);
            assert!((d + bessel_k1(x)).abs() < 1e-6, "x {x}");
            assert!(bessel_k0(x + 0.1) < bessel_k0(x) && bessel_k1(x + 0.1) < bessel_k1(x));
        }
    }

    #[test]
    fn q_plus_is_locally_square_integrable() {
        // midpoint sums on (0, 1) converge under refinement
        let sum = |n: usize| {
            let h = 1.0 / n as f64;
            2.0 * h
                * (0..n)
                    .map(|j| q_plus((j as f64 + 0.5) * h, 1.0).powi(2))
                    .sum::<f64>()
        };
        let (a, b, c) = (sum(1000), sum(10000), sum(100000));
        assert!((c - b).abs() < 0.2 * (b - a).abs() + 1e-12);
        assert!((c - b).abs() < 1e-3 * c);
    }

    #[test]
    fn gram_0_is_grid_converged() {
        let coarse = build_galerkin(Grid::new(4096, 4.0).unwrap(), (-1.0, 1.0), 1.0, 8).unwrap();
        let fine = build_galerkin(Grid::new(16384, 4.0).unwrap(), (-1.0, 1.0), 1.0, 8).unwrap();
        let diff = max_abs(&(coarse.gram_0() - fine.gram_0()));
        assert!(diff < 1e-6, "{diff}");
        assert!(build_galerkin(Grid::new(4096, 4.0).unwrap(), (-1.0, 1.0), 1.0, 129).is_err());
    }

    #[test]
    fn norm_ratios_are_stable_under_more_samples() {
        let a = norm_equivalence(grid(), (-1.0, 1.0), 1.0, 20, 9).unwrap();
        let b = norm_equivalence(grid(), (-1.0, 1.0), 1.0, 40, 9).unwrap();
        assert!((b.plus_ratio.1 / a.plus_ratio.1 - 1.0).abs() < 0.1);
        assert!((b.minus_ratio.1 / a.minus_ratio.1 - 1.0).abs() < 0.1);
    }
}
