//! Momentum integrals `int w(p) S(p) dp` with `w = omega_M^{-1}` or `omega_M`.
//!
//! When the mass `M` is resolved by the momentum step the trapezoid rule is
//! spectrally accurate. Otherwise the weight has a kink (or a `1/|p|`
//! singularity) at the origin and the integrand is corrected by subtracting
//! `P(p) = (S0 + (c2 + a S0) p^2) e^{-a p^2}`, which matches `S` to second
//! order at `p = 0` and whose weighted integral is known in closed form. The
//! whole procedure is linear in `S`, so it is stored as a weight vector.

use crate::special::{bessel_k0_scaled, bessel_k1_scaled};

/// Which power of `omega_M` multiplies the integrand.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Multiplier {
    Inverse,
    Direct,
}

impl Multiplier {
    pub fn eval(self, p: f64, mass: f64) -> f64 {
        let w = (p * p + mass * mass).sqrt();
        match self {
            Multiplier::Inverse => 1.0 / w,
            Multiplier::Direct => w,
        }
    }
}

/// Width of the subtraction profile `e^{-a p^2}` in momentum steps, so that
/// `a h^2` is fixed and the rule is invariant under rescaling.
const GAUSS_STEPS: f64 = 32.0;
/// The mass counts as resolved once it spans this many momentum steps.
const RESOLVED_STEPS: f64 = 8.0;

/// Linear functional on samples `S(p_k)`, `p_k = k h` in FFT order.
#[derive(Clone, Debug)]
pub(crate) struct WeightRule {
    weights: Vec<f64>,
}

impl WeightRule {
    /// For `mass = 0` with [`Multiplier::Inverse`] the caller guarantees `S(0) = 0`.
    pub fn new(n: usize, h: f64, mass: f64, mult: Multiplier) -> Self {
        assert!(n >= 8);
        let p = |k: usize| {
            if k < n / 2 {
                k as f64 * h
            } else {
                (k as f64 - n as f64) * h
            }
        };
        let mut weights: Vec<f64> = (0..n).map(|k| h * mult.eval(p(k), mass)).collect();
        if mass >= RESOLVED_STEPS * h {
            return WeightRule { weights };
        }
        weights[0] = 0.0;
        let a = 0.5 / (GAUSS_STEPS * h).powi(2);
        let mut g0 = 0.0;
        let mut g2 = 0.0;
        let mut g4 = 0.0;
        for (k, w) in weights.iter().enumerate() {
            let p2 = p(k) * p(k);
            let g = w * (-a * p2).exp();
            g0 += g;
            g2 += g * p2;
            g4 += g * p2 * p2;
        }
        let m = gaussian_moments(a, mass, mult);
        // P = (S0 + (c2 + a S0) p^2 + (c4 + a c2 + a^2 S0 / 2) p^4) e^{-a p^2}
        let d0 = m.0.map_or(0.0, |a0| a0 - g0);
        let d2 = m.1 - g2;
        let d4 = m.2 - g4;
        let s0_coef = if m.0.is_some() {
            d0 + a * d2 + 0.5 * a * a * d4
        } else {
            0.0
        };
        let c2_coef = d2 + a * d4;
        let c4_coef = d4;
        // c2 = S''(0)/2 (sixth order) and c4 = S''''(0)/24 (fourth order) from
        // the even sums E_j = S_j + S_{-j}
        let h2 = h * h;
        let h4 = h2 * h2;
        let stencil2 = [-49.0 / 18.0, 1.5, -3.0 / 20.0, 1.0 / 90.0];
        let stencil4 = [28.0 / 3.0, -6.5, 2.0, -1.0 / 6.0];
        for j in 0..4 {
            let c = c2_coef * stencil2[j] / (2.0 * h2) + c4_coef * stencil4[j] / (24.0 * h4);
            if j == 0 {
                weights[0] += s0_coef + c;
            } else {
                weights[j] += c;
                weights[n - j] += c;
            }
        }
        WeightRule { weights }
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn apply(&self, s: &[f64]) -> f64 {
        debug_assert_eq!(s.len(), self.weights.len());
        self.weights.iter().zip(s).map(|(w, v)| w * v).sum()
    }
}

/// Weighted Gaussian moments `int w p^{2j} e^{-a p^2} dp` for `j = 0, 1, 2`.
/// The zeroth is `None` when it diverges (`M = 0`, inverse weight).
fn gaussian_moments(a: f64, mass: f64, mult: Multiplier) -> (Option<f64>, f64, f64) {
    if mass == 0.0 {
        return match mult {
            Multiplier::Inverse => (None, 1.0 / a, 1.0 / (a * a)),
            Multiplier::Direct => (Some(1.0 / a), 1.0 / (a * a), 2.0 / (a * a * a)),
        };
    }
    let m2 = mass * mass;
    let q = 0.5 * m2;
    let z = a * q;
    let k0 = bessel_k0_scaled(z);
    let k1 = bessel_k1_scaled(z);
    // int e^{-ap^2}/omega = e^z K0(z); higher moments by differentiating in a
    let inv0 = k0;
    let inv2 = q * (k1 - k0);
    let inv4 = q * q * (2.0 * k0 - 2.0 * k1 + k1 / z);
    let inv6 = -q * q * q * (4.0 * k0 - 4.0 * k1 + 3.0 * k1 / z - k0 / z - 2.0 * k1 / (z * z));
    match mult {
        Multiplier::Inverse => (Some(inv0), inv2, inv4),
        Multiplier::Direct => (Some(inv2 + m2 * inv0), inv4 + m2 * inv2, inv6 + m2 * inv4),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fft_grid(n: usize, h: f64, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..n)
            .map(|k| {
                let p = if k < n / 2 {
                    k as f64 * h
                } else {
                    (k as f64 - n as f64) * h
                };
                f(p)
            })
            .collect()
    }

    /// Reference value by composite Simpson after `p = M sinh(u)`, which makes
    /// the weighted integrand smooth at the origin.
    fn reference(mass: f64, mult: Multiplier, s: impl Fn(f64) -> f64) -> f64 {
        let p_max: f64 = 12.0;
        let f = |u: f64| {
            if mass == 0.0 {
                if u == 0.0 {
                    return 0.0;
                }
                2.0 * mult.eval(u, 0.0) * s(u)
            } else {
                let p = mass * u.sinh();
                let jac = mass * u.cosh();
                2.0 * mult.eval(p, mass) * s(p) * jac
            }
        };
        let hi = if mass == 0.0 {
            p_max
        } else {
            (p_max / mass).asinh()
        };
        let n = 400_000;
        let h = hi / n as f64;
        let mut acc = f(0.0) + f(hi);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn moments_match_direct_quadrature() {
        for &m in &[0.0, 1e-3, 0.3, 2.0] {
            for mult in [Multiplier::Inverse, Multiplier::Direct] {
                let (a0, a2, a4) = gaussian_moments(0.5, m, mult);
                let r2 = reference(m, mult, |p| p * p * (-0.5 * p * p).exp());
                assert!(
                    (a2 - r2).abs() < 1e-9 * r2.abs(),
                    "m={m} {mult:?}: {a2} vs {r2}"
                );
                let r4 = reference(m, mult, |p| p.powi(4) * (-0.5 * p * p).exp());
                assert!(
                    (a4 - r4).abs() < 1e-9 * r4.abs(),
                    "m={m} {mult:?}: {a4} vs {r4}"
                );
                if let Some(a0) = a0 {
                    let r0 = reference(m, mult, |p| (-0.5 * p * p).exp());
                    assert!(
                        (a0 - r0).abs() < 1e-8 * r0.abs(),
                        "m={m} {mult:?}: {a0} vs {r0}"
                    );
                }
            }
        }
    }

    #[test]
    fn unresolved_mass_integral_is_accurate() {
        // S even, smooth, with S(0) != 0 and a non-Gaussian shape
        let s = |p: f64| (1.0 + 0.3 * p * p) * (-0.7 * p * p).exp() * (1.3 * p).cos();
        let h = 0.01;
        let n = 1 << 14;
        let samples = fft_grid(n, h, s);
        for &m in &[1e-6, 1e-3, 0.02] {
            for mult in [Multiplier::Inverse, Multiplier::Direct] {
                let got = WeightRule::new(n, h, m, mult).apply(&samples);
                let want = reference(m, mult, s);
                assert!(
                    (got - want).abs() < 1e-9 * want.abs(),
                    "m={m} {mult:?}: {got} vs {want}"
                );
            }
        }
    }

    #[test]
    fn massless_inverse_with_vanishing_zero_mode() {
        let s = |p: f64| p * p * (-p * p).exp();
        let h = 0.02;
        let n = 1 << 12;
        let got = WeightRule::new(n, h, 0.0, Multiplier::Inverse).apply(&fft_grid(n, h, s));
        // int |p| e^{-p^2} dp = 1
        assert!((got - 1.0).abs() < 1e-12, "{got}");
    }
}
