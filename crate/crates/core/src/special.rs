//! Modified Bessel functions of orders 0 and 1.
//!
//! For `x <= 2` the ascending series is summed directly. For larger arguments
//! the scaled functions `e^x K_nu(x)` come from the trapezoid rule applied to
//! `int_0^inf exp(-x (cosh t - 1)) cosh(nu t) dt`, which converges
//! geometrically in the step size because the integrand is analytic in a strip.

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

const SERIES_LIMIT: f64 = 2.0;
const MAX_TERMS: usize = 60;
const TRAPEZOID_STEP: f64 = 0.125;

/// `I_0(x)` by its power series. Accurate for moderate `|x|` (used for `|x| <= 40`).
pub fn bessel_i0(x: f64) -> f64 {
    let t = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..MAX_TERMS * 2 {
        let kf = k as f64;
        term *= t / (kf * kf);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

/// `I_1(x)` by its power series.
pub fn bessel_i1(x: f64) -> f64 {
    x * 0.5 * i1_over_half_x(x)
}

/// `I_1(x) / (x/2) = sum_k (x^2/4)^k / (k! (k+1)!)`, finite at `x = 0`.
pub(crate) fn i1_over_half_x(x: f64) -> f64 {
    let t = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..MAX_TERMS * 2 {
        let kf = k as f64;
        term *= t / (kf * (kf + 1.0));
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum
}

/// `sum_{k>=1} H_k (x^2/4)^k / (k!)^2`, the regular part of the `K_0` series.
pub(crate) fn k0_series_tail(x: f64) -> f64 {
    let t = 0.25 * x * x;
    let mut term = 1.0;
    let mut harmonic = 0.0;
    let mut sum = 0.0;
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        term *= t / (kf * kf);
        harmonic += 1.0 / kf;
        let add = harmonic * term;
        sum += add;
        if add < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

/// `sum_{k>=0} (psi(k+1) + psi(k+2)) (x^2/4)^k / (k! (k+1)!)`, the regular part of `K_1`.
pub(crate) fn k1_series_tail(x: f64) -> f64 {
    let t = 0.25 * x * x;
    let mut term = 1.0;
    // psi(1) = -gamma, psi(2) = 1 - gamma
    let mut psi_k1 = -EULER_GAMMA;
    let mut psi_k2 = 1.0 - EULER_GAMMA;
    let mut sum = psi_k1 + psi_k2;
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        term *= t / (kf * (kf + 1.0));
        psi_k1 += 1.0 / kf;
        psi_k2 += 1.0 / (kf + 1.0);
        let add = (psi_k1 + psi_k2) * term;
        sum += add;
        if add.abs() < 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

fn k0_series(x: f64) -> f64 {
    -((0.5 * x).ln() + EULER_GAMMA) * bessel_i0(x) + k0_series_tail(x)
}

fn k1_series(x: f64) -> f64 {
    1.0 / x + (0.5 * x).ln() * bessel_i1(x) - 0.25 * x * k1_series_tail(x)
}

/// `e^x K_nu(x)` for `nu` in {0, 1} by the trapezoid rule on the integral representation.
fn scaled_k_integral(nu: f64, x: f64) -> f64 {
    // the integrand is roughly exp(-x t^2 / 2); keep several nodes per width
    let h = TRAPEZOID_STEP.min(0.5 / x.sqrt());
    let mut sum = 0.5;
    let mut k = 1usize;
    loop {
        let t = k as f64 * h;
        let expo = x * (t.cosh() - 1.0);
        let term = (-expo).exp() * (nu * t).cosh();
        sum += term;
        if term < 1e-18 * sum || expo > 745.0 {
            break;
        }
        k += 1;
    }
    h * sum
}

/// `K_0(x)` for `x > 0`.
pub fn bessel_k0(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x <= SERIES_LIMIT {
        k0_series(x)
    } else {
        scaled_k_integral(0.0, x) * (-x).exp()
    }
}

/// `K_1(x)` for `x > 0`.
pub fn bessel_k1(x: f64) -> f64 {
    debug_assert!(x > 0.0);
    if x <= SERIES_LIMIT {
        k1_series(x)
    } else {
        scaled_k_integral(1.0, x) * (-x).exp()
    }
}

/// `e^x K_0(x)`, finite for all large `x`.
pub fn bessel_k0_scaled(x: f64) -> f64 {
    if x <= SERIES_LIMIT {
        k0_series(x) * x.exp()
    } else {
        scaled_k_integral(0.0, x)
    }
}

/// `e^x K_1(x)`.
pub fn bessel_k1_scaled(x: f64) -> f64 {
    if x <= SERIES_LIMIT {
        k1_series(x) * x.exp()
    } else {
        scaled_k_integral(1.0, x)
    }
}

/// Nodes and weights of the `n`-point Gauss-Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    assert!(n >= 1, "Gauss-Legendre needs at least one node");
    let mut out = vec![(0.0, 0.0); n];
    for i in 0..n.div_ceil(2) {
        // Tricomi's initial guess, then Newton on P_n
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d.is_finite() {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out[i] = (-x, w);
        out[n - 1 - i] = (x, w);
    }
    out
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
