use std::f64::consts::PI;

use num_complex::Complex64;

use super::quadrature::{Multiplier, WeightRule};
use super::spectral::{evaluate_at, padded_len, padded_parts};
use super::{GridFunction, MassNormValue};
use crate::error::{invalid, Error, Result};

/// Threshold for the massless zero-mode test: `1e-8` times the Cauchy-Schwarz
/// bound `(2 pi)^{-1/2} (2L)^{1/2} ||f||_2` on `|(Re f)^(0)|`.
pub fn zero_mode_tolerance(f: &GridFunction) -> f64 {
    1e-8 * (2.0 * f.grid().half_width() / (2.0 * PI)).sqrt() * f.l2_norm()
}

pub(crate) fn real_zero_mode(f: &GridFunction) -> f64 {
    f.moment().re.abs() / (2.0 * PI).sqrt()
}

pub(crate) fn check_zero_mode(f: &GridFunction) -> Result<()> {
    let zero_mode = real_zero_mode(f);
    let tolerance = zero_mode_tolerance(f);
    if zero_mode > tolerance {
        return Err(Error::ZeroMode {
            zero_mode,
            tolerance,
        });
    }
    Ok(())
}

fn check_mass(m: f64) -> Result<()> {
    if !(m >= 0.0 && m.is_finite()) {
        return Err(invalid("mass", format!("{m} is not a nonnegative number")));
    }
    Ok(())
}

/// `||f||_m = (1/2 int |omega^{-1/2} (Re f)^ + i omega^{1/2} (Im f)^|^2 dp)^{1/2}`.
///
/// The cross term integrates to zero, so the square splits into
/// `1/2 int |(Re f)^|^2/omega + omega |(Im f)^|^2`.
pub fn mass_norm(f: &GridFunction, m: f64) -> Result<MassNormValue> {
    check_mass(m)?;
    if f.is_zero() {
        return Ok(MassNormValue::Finite(0.0));
    }
    if m == 0.0 && check_zero_mode(f).is_err() {
        return Ok(MassNormValue::Divergent);
    }
    let n_pad = padded_len(&f.grid(), f.support_radius(), m);
    let parts = padded_parts(f, n_pad);
    let s_re: Vec<f64> = parts.re.iter().map(|z| z.norm_sqr()).collect();
    let s_im: Vec<f64> = parts.im.iter().map(|z| z.norm_sqr()).collect();
    let inv = WeightRule::new(n_pad, parts.h, m, Multiplier::Inverse).apply(&s_re);
    let dir = WeightRule::new(n_pad, parts.h, m, Multiplier::Direct).apply(&s_im);
    Ok(MassNormValue::Finite((0.5 * (inv + dir)).max(0.0).sqrt()))
}

/// `<f, g>_m = 1/2 int conj(Phi_f) Phi_g dp` with `Phi = omega^{-1/2}(Re f)^ + i omega^{1/2}(Im f)^`.
pub fn mass_inner(f: &GridFunction, g: &GridFunction, m: f64) -> Result<Complex64> {
    check_mass(m)?;
    if f.grid() != g.grid() {
        return Err(Error::GridMismatch);
    }
    if m == 0.0 {
        check_zero_mode(f)?;
        check_zero_mode(g)?;
    }
    let radius = f.support_radius().max(g.support_radius());
    let n_pad = padded_len(&f.grid(), radius, m);
    let pf = padded_parts(f, n_pad);
    let pg = padded_parts(g, n_pad);
    let h = pf.h;
    let n = n_pad;
    let mut s_re = vec![0.0; n];
    let mut s_im = vec![0.0; n];
    let mut odd = 0.0;
    for k in 0..n {
        let rr = pf.re[k].conj() * pg.re[k];
        let ii = pf.im[k].conj() * pg.im[k];
        s_re[k] = rr.re;
        s_im[k] = ii.re;
        let cross = pf.re[k].conj() * pg.im[k] - pf.im[k].conj() * pg.re[k];
        odd += cross.re;
        if k != 0 {
            let p = pf.momentum(k);
            odd += rr.im * Multiplier::Inverse.eval(p, m) + ii.im * Multiplier::Direct.eval(p, m);
        }
    }
    let inv = WeightRule::new(n, h, m, Multiplier::Inverse).apply(&s_re);
    let dir = WeightRule::new(n, h, m, Multiplier::Direct).apply(&s_im);
    Ok(Complex64::new(0.5 * (inv + dir), 0.5 * h * odd))
}

/// `||f||_{m,s} = (int omega_m^s |f^|^2 dp)^{1/2}` for real `f` and `s = +-1`.
pub fn sobolev_norm(f: &GridFunction, m: f64, s: i32) -> Result<MassNormValue> {
    check_mass(m)?;
    if !f.is_real() {
        return Err(invalid("f", "Sobolev norms take real functions"));
    }
    let mult = match s {
        1 => Multiplier::Direct,
        -1 => Multiplier::Inverse,
        _ => return Err(invalid("s", format!("order {s} is not +1 or -1"))),
    };
    if f.is_zero() {
        return Ok(MassNormValue::Finite(0.0));
    }
    if m == 0.0 && s == -1 && check_zero_mode(f).is_err() {
        return Ok(MassNormValue::Divergent);
    }
    let n_pad = padded_len(&f.grid(), f.support_radius(), m);
    let parts = padded_parts(f, n_pad);
    let sq: Vec<f64> = parts.re.iter().map(|z| z.norm_sqr()).collect();
    let v = WeightRule::new(n_pad, parts.h, m, mult).apply(&sq);
    Ok(MassNormValue::Finite(v.max(0.0).sqrt()))
}

/// `f_eps(x) = f(x) - (int f) eps chi(eps x)`, which has zero moment.
pub fn null_integral_approx(
    f: &GridFunction,
    eps: f64,
    chi: &GridFunction,
) -> Result<GridFunction> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(invalid("eps", "must be positive"));
    }
    if !chi.is_real() {
        return Err(invalid("chi", "must be real"));
    }
    if (chi.moment().re - 1.0).abs() > 1e-8 {
        return Err(invalid(
            "chi",
            format!("moment {} is not 1", chi.moment().re),
        ));
    }
    if f.grid() != chi.grid() {
        return Err(Error::GridMismatch);
    }
    let alpha = f.moment();
    if alpha == Complex64::new(0.0, 0.0) {
        return Ok(f.clone());
    }
    let grid = f.grid();
    let (c0, c1) = chi.support();
    let scaled = (c0 / eps, c1 / eps);
    grid.check_support(scaled.0, scaled.1)?;
    let nodes: Vec<usize> = grid.index_range(scaled.0, scaled.1).collect();
    let ys: Vec<f64> = nodes.iter().map(|&j| eps * grid.x(j)).collect();
    let vals: Vec<f64> = evaluate_at(chi, &ys).iter().map(|v| eps * v.re).collect();
    // normalize by the discrete integral so the sampled moment cancels exactly
    let total: f64 = vals.iter().sum::<f64>() * grid.dx();
    if total.abs() < 0.5 {
        return Err(Error::NumericalGuard {
            guard: "null_integral_approx",
            detail: format!("scaled chi integrates to {total} on the grid"),
        });
    }
    let mut samples = f.samples().to_vec();
    for (&j, v) in nodes.iter().zip(vals) {
        samples[j] -= alpha * (v / total);
    }
    let support = if f.is_zero() {
        scaled
    } else {
        (f.support().0.min(scaled.0), f.support().1.max(scaled.1))
    };
    Ok(f.with_samples(support, samples))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::testfn::Grid;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn zero_function_has_zero_norm() {
        let g = Grid::default();
        for &m in &[0.0, 0.5, 3.0] {
            assert_eq!(
                mass_norm(&GridFunction::zero(g), m).unwrap(),
                MassNormValue::Finite(0.0)
            );
        }
    }

    #[test]
    fn massless_bump_diverges() {
        let g = Grid::default();
        let b = GridFunction::bump(g, 0.0, 1.0, c(1.0, 0.0)).unwrap();
        assert!(mass_norm(&b, 0.0).unwrap().is_divergent());
        let d = GridFunction::bump_derivative(g, 0.0, 1.0, c(1.0, 0.0)).unwrap();
        assert!(mass_norm(&d, 0.0).unwrap().finite().is_some());
        // the imaginary part has no infrared problem
        let i = GridFunction::bump(g, 0.0, 1.0, c(0.0, 1.0)).unwrap();
        assert!(mass_norm(&i, 0.0).unwrap().finite().is_some());
    }

    #[test]
    fn inner_product_reproduces_the_norm() {
        let g = Grid::default();
        let f = GridFunction::bump(g, 0.3, 1.2, c(0.7, -0.4)).unwrap();
        let n = mass_norm(&f, 1.0).unwrap().finite().unwrap();
        let ip = mass_inner(&f, &f, 1.0).unwrap();
        assert!((ip.re - n * n).abs() < 1e-12 * n * n);
        assert!(ip.im.abs() < 1e-14);
    }

    #[test]
    fn imaginary_part_of_inner_product_is_half_symplectic() {
        let g = Grid::default();
        let f = GridFunction::bump(g, 0.3, 1.2, c(0.7, -0.4)).unwrap();
        let h = GridFunction::bump_derivative(g, -0.5, 1.0, c(1.5, 0.9)).unwrap();
        let sym: f64 = f
            .samples()
            .iter()
            .zip(h.samples())
            .map(|(a, b)| (a.conj() * b).im)
            .sum::<f64>()
            * g.dx();
        for &m in &[0.5, 1.0, 2.0] {
            let ip = mass_inner(&f, &h, m).unwrap();
            assert!((ip.im - 0.5 * sym).abs() < 1e-12);
        }
    }

    #[test]
    fn real_functions_have_real_inner_product() {
        let g = Grid::default();
        let f = GridFunction::bump(g, 0.3, 1.2, c(0.7, 0.0)).unwrap();
        let h = GridFunction::bump_derivative(g, -0.5, 1.0, c(1.5, 0.0)).unwrap();
        assert!(mass_inner(&f, &h, 1.0).unwrap().im.abs() < 1e-12);
    }

    #[test]
    fn sobolev_norms_order() {
        let g = Grid::default();
        let f = GridFunction::bump_derivative(g, 0.0, 1.0, c(1.0, 0.0)).unwrap();
        let plus_m = sobolev_norm(&f, 1.0, 1).unwrap().finite().unwrap();
        let plus_0 = sobolev_norm(&f, 0.0, 1).unwrap().finite().unwrap();
        let minus_m = sobolev_norm(&f, 1.0, -1).unwrap().finite().unwrap();
        let minus_0 = sobolev_norm(&f, 0.0, -1).unwrap().finite().unwrap();
        assert!(plus_0 <= plus_m);
        assert!(minus_m <= minus_0);
        assert!(sobolev_norm(&f, 1.0, 2).is_err());
    }

    #[test]
    fn null_integral_approx_has_zero_moment() {
        let g = Grid::default();
        let f = GridFunction::bump(g, 0.0, 1.0, c(1.0, 0.5)).unwrap();
        let chi = GridFunction::bump(g, 0.5, 0.5, c(1.0, 0.0)).unwrap();
        let chi = chi.scale(c(1.0 / chi.moment().re, 0.0));
        for &eps in &[1.0, 0.5, 0.25] {
            let fe = null_integral_approx(&f, eps, &chi).unwrap();
            assert!(fe.moment().norm() < 1e-10, "eps {eps}: {}", fe.moment());
        }
        let d = GridFunction::bump_derivative(g, 0.0, 1.0, c(1.0, 0.0)).unwrap();
        let de = null_integral_approx(&d, 0.5, &chi).unwrap();
        assert!(de.max_distance(&d).unwrap() < 1e-12);
    }
}
