//! Seeded random test functions.
//!
//! All randomness flows through [`ChaCha8Rng`], a counter-based stream cipher
//! generator, seeded with `seed_from_u64`. Any ChaCha8 implementation with the
//! same seeding reproduces the streams.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Grid, GridFunction, BUMP_INTEGRAL};
use crate::error::{invalid, Result};

pub use rand::SeedableRng;
pub type Stream = ChaCha8Rng;

pub fn stream(seed: u64) -> Stream {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A bump with random center, width and complex amplitude inside `[lo, hi]`.
pub fn random_bump(rng: &mut Stream, grid: Grid, lo: f64, hi: f64) -> Result<GridFunction> {
    let span = hi - lo;
    if span <= 0.0 {
        return Err(invalid("interval", "empty"));
    }
    let width = rng.gen_range(0.2..0.5) * span;
    let center = rng.gen_range(lo + width..=hi - width);
    let amp = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
    GridFunction::bump(grid, center, width, amp)
}

/// Real null-integral function on `[lo, hi]`: the difference of two disjoint
/// bumps, each normalized to unit integral, times a random amplitude.
pub fn random_null_real(rng: &mut Stream, grid: Grid, lo: f64, hi: f64) -> Result<GridFunction> {
    let span = hi - lo;
    if span <= 0.0 {
        return Err(invalid("interval", "empty"));
    }
    let cut = lo + rng.gen_range(0.35..0.65) * span;
    let left = random_bump_profile(rng, lo, cut);
    let right = random_bump_profile(rng, cut, hi);
    let amp: f64 = rng.gen_range(0.5..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let (first, second) = if rng.gen_bool(0.5) {
        (left, right)
    } else {
        (right, left)
    };
    let a = unit_bump(grid, first)?;
    let b = unit_bump(grid, second)?;
    Ok(a.sub(&b)?.scale(Complex64::new(amp, 0.0)))
}

/// `u + i v` with `u` real null-integral and `v` a real bump, both on `[lo, hi]`.
pub fn random_null_symbol(rng: &mut Stream, grid: Grid, lo: f64, hi: f64) -> Result<GridFunction> {
    let u = random_null_real(rng, grid, lo, hi)?;
    let width = rng.gen_range(0.2..0.5) * (hi - lo);
    let center = rng.gen_range(lo + width..=hi - width);
    let v = GridFunction::bump(
        grid,
        center,
        width,
        Complex64::new(0.0, rng.gen_range(-1.0..1.0)),
    )?;
    u.add(&v)
}

/// Bump with unit discrete moment, so differences cancel to rounding.
fn unit_bump(grid: Grid, (center, width): (f64, f64)) -> Result<GridFunction> {
    let b = GridFunction::bump(
        grid,
        center,
        width,
        Complex64::new(1.0 / (width * BUMP_INTEGRAL), 0.0),
    )?;
    let m = b.moment().re;
    Ok(b.scale(Complex64::new(1.0 / m, 0.0)))
}

fn random_bump_profile(rng: &mut Stream, lo: f64, hi: f64) -> (f64, f64) {
    let span = hi - lo;
    let width = rng.gen_range(0.25..0.45) * span;
    let center = rng.gen_range(lo + width..=hi - width);
    (center, width)
}
