//! Charge profiles and the phases of the sector automorphisms on Weyl symbols.
//!
//! `u_n` vanishes left of `-a`, rises to `q` on `(-a, a)` along a fixed smooth
//! ramp, stays at `q` on `[a, na]` and returns to zero on `[na, na + a]`. The
//! automorphism multiplies `W(f)` by `exp(-i int u Re f)`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dynamics::dilate_onto;
use crate::error::{guard, invalid, Result};
use crate::special::gauss_legendre;
use crate::testfn::{bump_profile, Grid, GridFunction, BUMP_INTEGRAL};
use crate::weyl::symplectic;

/// Smooth monotone step from 0 to 1 on `(0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ramp {
    /// Normalized primitive of the bump `exp(-1/(1-v^2))`.
    IntegratedBump,
    /// `e^{-1/u} / (e^{-1/u} + e^{-1/(1-u)})`.
    ExpRatio,
}

impl Ramp {
    pub fn eval(self, u: f64) -> f64 {
        if u <= 0.0 {
            return 0.0;
        }
        if u >= 1.0 {
            return 1.0;
        }
        match self {
            Ramp::IntegratedBump => integrated_bump(2.0 * u - 1.0),
            Ramp::ExpRatio => {
                let a = (-1.0 / u).exp();
                let b = (-1.0 / (1.0 - u)).exp();
                a / (a + b)
            }
        }
    }
}

fn integrated_bump(v: f64) -> f64 {
    // the bump is symmetric, so integrate over the shorter side
    if v > 0.0 {
        return 1.0 - integrated_bump(-v);
    }
    thread_local! {
        static RULE: Vec<(f64, f64)> = gauss_legendre(24);
    }
    let (lo, hi) = (-1.0, v);
    let panels = 8;
    let width = (hi - lo) / panels as f64;
    RULE.with(|rule| {
        let mut sum = 0.0;
        for k in 0..panels {
            let mid = lo + (k as f64 + 0.5) * width;
            for &(x, w) in rule {
                sum += w * bump_profile(mid + 0.5 * width * x);
            }
        }
        sum * 0.5 * width / BUMP_INTEGRAL
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChargeProfile {
    pub q: f64,
    pub a: f64,
    pub n: u32,
    pub ramp: Ramp,
}

impl ChargeProfile {
    pub fn new(q: f64, a: f64, n: u32) -> Result<Self> {
        Self::with_ramp(q, a, n, Ramp::IntegratedBump)
    }

    pub fn with_ramp(q: f64, a: f64, n: u32, ramp: Ramp) -> Result<Self> {
        if !q.is_finite() {
            return Err(invalid("q", "must be finite"));
        }
        if !(a > 0.0 && a.is_finite()) {
            return Err(invalid("a", format!("{a} must be positive")));
        }
        if n == 0 {
            return Err(invalid("n", "must be at least 1"));
        }
        Ok(ChargeProfile { q, a, n, ramp })
    }

    pub fn with_n(&self, n: u32) -> Result<Self> {
        Self::with_ramp(self.q, self.a, n, self.ramp)
    }

    /// `u_n(x)`.
    pub fn un(&self, x: f64) -> f64 {
        let a = self.a;
        let end = self.n as f64 * a;
        if x <= -a {
            0.0
        } else if x < a {
            self.q * self.ramp.eval((x + a) / (2.0 * a))
        } else if x <= end {
            self.q
        } else {
            self.q * (1.0 - self.ramp.eval((x - end) / a))
        }
    }

    /// `u_inf(x) = lim_n u_n(x)`.
    pub fn u_inf(&self, x: f64) -> f64 {
        let a = self.a;
        if x <= -a {
            0.0
        } else if x < a {
            self.q * self.ramp.eval((x + a) / (2.0 * a))
        } else {
            self.q
        }
    }
}

/// `u_n` sampled on the grid, supported in `[-a, na + a]`.
pub fn build_un(p: &ChargeProfile, grid: Grid) -> Result<GridFunction> {
    let hi = (p.n as f64 + 1.0) * p.a;
    GridFunction::from_fn(grid, (-p.a, hi), |x| Complex64::new(p.un(x), 0.0))
}

fn phase_of(angle: f64) -> Complex64 {
    Complex64::from_polar(1.0, -angle)
}

/// `int u(x) Re f(x) dx` by the trapezoid rule on the nodes of `f`.
fn pair_with(f: &GridFunction, u: impl Fn(f64) -> f64) -> f64 {
    let g = f.grid();
    let (lo, hi) = f.support();
    let mut s = 0.0;
    for j in g.index_range(lo, hi) {
        let re = f.value(j).re;
        if re != 0.0 {
            s += u(g.x(j)) * re;
        }
    }
    s * g.dx()
}

/// `exp(-i int u_inf Re f)`.
pub fn sector_phase(p: &ChargeProfile, f: &GridFunction) -> Complex64 {
    phase_of(pair_with(f, |x| p.u_inf(x)))
}

/// `exp(-i int u_n Re f) = exp(i sigma(i u_n, f))` for the profile's own `n`.
pub fn finite_sector_phase(p: &ChargeProfile, f: &GridFunction) -> Result<Complex64> {
    let u = build_un(p, f.grid())?.scale(Complex64::new(0.0, 1.0));
    Ok(Complex64::from_polar(1.0, symplectic(&u, f)))
}

/// `rho(lambda)` on `W(f)`: the phase `exp(-i int u_inf Re f)` and the symbol
/// `delta_lambda f`, sampled on the grid scaled by `lambda`.
pub fn rho_lambda_symbol(
    p: &ChargeProfile,
    f: &GridFunction,
    lambda: f64,
) -> Result<(Complex64, GridFunction)> {
    let g = f.grid();
    let target = Grid::new(g.n(), lambda * g.half_width())?;
    rho_lambda_symbol_on(p, f, lambda, target)
}

/// [`rho_lambda_symbol`] with the dilated symbol sampled on `target`.
pub fn rho_lambda_symbol_on(
    p: &ChargeProfile,
    f: &GridFunction,
    lambda: f64,
    target: Grid,
) -> Result<(Complex64, GridFunction)> {
    let symbol = dilate_onto(f, lambda, target)?;
    Ok((sector_phase(p, f), symbol))
}

/// `exp(-i int u_inf(x/lambda) Re(delta_lambda f)(x) dx)`, the unsimplified form,
/// evaluated on the grid of the dilated symbol.
pub fn rho_lambda_dilated_phase(
    p: &ChargeProfile,
    dilated: &GridFunction,
    lambda: f64,
) -> Complex64 {
    phase_of(pair_with(dilated, |x| p.u_inf(x / lambda)))
}

/// `exp(-i q int_0^inf Re f)`, the `lambda -> 0` limit of the `rho(lambda)` phases.
pub fn limit_morphism_phase(p: &ChargeProfile, f: &GridFunction) -> Complex64 {
    phase_of(p.q * half_line_integral(f))
}

/// `int_0^inf Re f` on the nodes, with the cell containing the origin split by
/// linear interpolation.
fn half_line_integral(f: &GridFunction) -> f64 {
    let g = f.grid();
    let dx = g.dx();
    let re = |j: usize| f.value(j).re;
    let first = ((g.half_width() / dx).floor() as usize + 1).min(g.n() - 1);
    let mut s = 0.5 * re(first);
    for j in first + 1..g.n() {
        s += re(j);
    }
    s *= dx;
    if first > 0 {
        let (x0, x1) = (g.x(first - 1), g.x(first));
        let (y0, y1) = (re(first - 1), re(first));
        let at_zero = y0 + (y1 - y0) * (0.0 - x0) / (x1 - x0);
        s += 0.5 * x1 * (at_zero + y1);
    }
    s
}

/// Smallest `n` from which the phase `exp(-i int u_n Re f)` no longer changes
/// (all later phases within `1e-10`), scanning while `u_n` fits on the grid.
pub fn stabilization_index(p: &ChargeProfile, f: &GridFunction) -> Result<u32> {
    if f.samples().iter().all(|z| z.re == 0.0) {
        return Ok(1);
    }
    let l = f.grid().half_width();
    let n_max = ((l / p.a) - 1.0).ceil() as i64 - 1;
    if n_max < 1 {
        return Err(invalid(
            "a",
            format!("profile with a = {} does not fit on the grid", p.a),
        ));
    }
    let n_max = n_max as u32;
    let phases: Vec<Complex64> = (1..=n_max)
        .map(|n| {
            let pn = p.with_n(n).expect("n >= 1");
            phase_of(pair_with(f, |x| pn.un(x)))
        })
        .collect();
    let last = phases[phases.len() - 1];
    // the last scanned phase must itself be settled; otherwise the grid is too short
    let (_, hi) = f.support();
    if hi >= n_max as f64 * p.a {
        return Err(guard(
            "stabilization",
            format!(
                "support reaches {hi}, beyond the largest plateau {} on this grid",
                n_max as f64 * p.a
            ),
        ));
    }
    let mut index = n_max;
    for n in (1..=n_max).rev() {
        if (phases[n as usize - 1] - last).norm() < 1e-10 {
            index = n;
        } else {
            break;
        }
    }
    Ok(index)
}

/// Rows `profile_id,symbol_id,lambda,re,im`.
pub fn phase_table_csv(rows: &[(String, String, f64, Complex64)]) -> String {
    let mut out = String::from("profile_id,symbol_id,lambda,re,im\n");
    for (pid, sid, lambda, z) in rows {
        out.push_str(&format!(
            "{pid},{sid},{lambda:.17e},{:.17e},{:.17e}\n",
            z.re, z.im
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn grid() -> Grid {
        Grid::new(4096, 16.0).unwrap()
    }

    #[test]
    fn ramps_are_monotone_steps() {
        for ramp in [Ramp::IntegratedBump, Ramp::ExpRatio] {
            assert_eq!(ramp.eval(0.0), 0.0);
            assert_eq!(ramp.eval(1.0), 1.0);
            assert!((ramp.eval(0.5) - 0.5).abs() < 1e-14);
            let mut prev = 0.0;
            for k in 1..100 {
                let v = ramp.eval(k as f64 / 100.0);
                assert!(v >= prev);
                prev = v;
            }
        }
        // the primitive of the bump at the midpoint of the left half
        let expect = 0.054_596_713_366_122_6 / BUMP_INTEGRAL;
        assert!((Ramp::IntegratedBump.eval(0.25) - expect).abs() < 1e-14);
    }

    #[test]
    fn un_shape() {
        let p = ChargeProfile::new(2.0, 1.0, 4).unwrap();
        let u = build_un(&p, grid()).unwrap();
        assert!(u.is_real());
        assert_eq!(p.un(2.5), 2.0);
        assert_eq!(p.un(-1.5), 0.0);
        assert_eq!(p.un(5.5), 0.0);
        let q = p.with_n(9).unwrap();
        for k in 0..200 {
            let x = -1.0 + k as f64 / 100.0;
            assert_eq!(p.un(x), q.un(x));
        }
        let zero = ChargeProfile::new(0.0, 1.0, 3).unwrap();
        assert_eq!(zero.un(2.0), 0.0);
        assert!(build_un(&ChargeProfile::new(1.0, 1.0, 20).unwrap(), grid()).is_err());
    }

    #[test]
    fn phase_regions() {
        let g = grid();
        let p = ChargeProfile::new(0.7, 1.0, 5).unwrap();
        let right = GridFunction::bump(g, 3.0, 1.0, c(1.3, 0.4)).unwrap();
        let expect = Complex64::from_polar(1.0, -0.7 * right.moment().re);
        assert!((sector_phase(&p, &right) - expect).norm() < 1e-14);
        let left = GridFunction::bump(g, -3.0, 1.0, c(1.3, 0.4)).unwrap();
        assert_eq!(sector_phase(&p, &left), c(1.0, 0.0));
        let imag = GridFunction::bump(g, 0.0, 2.0, c(0.0, 1.0)).unwrap();
        assert_eq!(sector_phase(&p, &imag), c(1.0, 0.0));
        assert!((finite_sector_phase(&p, &right).unwrap() - expect).norm() < 1e-12);
    }

    #[test]
    fn multiplicative_in_the_symbol() {
        let g = grid();
        let p = ChargeProfile::new(1.1, 0.8, 5).unwrap();
        let f = GridFunction::bump(g, 0.2, 1.5, c(0.9, 0.1)).unwrap();
        let h = GridFunction::bump(g, 1.0, 2.0, c(-0.4, 0.3)).unwrap();
        let lhs = sector_phase(&p, &f.add(&h).unwrap());
        let rhs = sector_phase(&p, &f) * sector_phase(&p, &h);
        assert!((lhs - rhs).norm() < 1e-12);
    }

    #[test]
    fn rho_lambda_forms_agree() {
        let g = grid();
        let p = ChargeProfile::new(1.0, 1.0, 4).unwrap();
        let f = GridFunction::bump(g, 0.4, 2.0, c(0.8, -0.5)).unwrap();
        let (ph1, s1) = rho_lambda_symbol(&p, &f, 1.0).unwrap();
        assert_eq!(s1, f);
        assert_eq!(ph1, sector_phase(&p, &f));
        for &lambda in &[0.5, 0.1, 0.01] {
            let (ph, s) = rho_lambda_symbol(&p, &f, lambda).unwrap();
            assert!((ph - ph1).norm() < 1e-12);
            assert!((rho_lambda_dilated_phase(&p, &s, lambda) - ph).norm() < 1e-9);
        }
    }

    #[test]
    fn limit_phase() {
        let g = grid();
        let p = ChargeProfile::new(1.5, 1.0, 4).unwrap();
        let imag = GridFunction::bump(g, 0.0, 1.0, c(0.0, 2.0)).unwrap();
        assert!((limit_morphism_phase(&p, &imag) - 1.0).norm() < 1e-15);
        let beyond = GridFunction::bump(g, 3.0, 1.5, c(0.6, 0.0)).unwrap();
        assert!((limit_morphism_phase(&p, &beyond) - sector_phase(&p, &beyond)).norm() < 1e-13);
    }

    #[test]
    fn stabilization_follows_the_support() {
        let g = grid();
        let p = ChargeProfile::new(1.0, 1.0, 1).unwrap();
        assert_eq!(stabilization_index(&p, &GridFunction::zero(g)).unwrap(), 1);
        let inner = GridFunction::bump(g, -0.5, 0.4, c(1.0, 0.0)).unwrap();
        assert_eq!(stabilization_index(&p, &inner).unwrap(), 1);
        let mut prev = 1;
        for hi in [2.5, 4.2, 6.9] {
            let f = GridFunction::bump(g, hi - 1.0, 1.0, c(1.0, 0.0)).unwrap();
            let n = stabilization_index(&p, &f).unwrap();
            assert_eq!(n, hi.ceil() as u32);
            assert!(n >= prev);
            prev = n;
        }
    }
}
