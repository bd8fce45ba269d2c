//! Weyl words, the symplectic form and quasi-free vacuum expectations.
//!
//! A word `e^{i theta} W(f_1) ... W(f_n)` is reduced with the Weyl relation
//! `W(f) W(g) = exp(-i sigma(f, g) / 2) W(f + g)` strictly from the left.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde_json::json;

use crate::error::{invalid, Error, Result};
use crate::testfn::{mass_norm, zero_mode_tolerance, Grid, GridFunction, MassNormValue};

/// `sigma(f, g) = Im int conj(f) g dx` by the trapezoid rule.
///
/// # Panics
/// If the two functions live on different grids.
pub fn symplectic(f: &GridFunction, g: &GridFunction) -> f64 {
    assert_eq!(f.grid(), g.grid(), "symplectic form needs a common grid");
    let dx = f.grid().dx();
    let s: f64 = f
        .samples()
        .iter()
        .zip(g.samples())
        .map(|(a, b)| a.re * b.im - a.im * b.re)
        .sum();
    s * dx
}

fn weyl_phase(sigma: f64) -> Complex64 {
    Complex64::from_polar(1.0, -0.5 * sigma)
}

#[derive(Clone, Debug, PartialEq)]
pub struct WeylWord {
    grid: Grid,
    factors: Vec<GridFunction>,
    phase: Complex64,
}

impl WeylWord {
    pub fn identity(grid: Grid) -> Self {
        WeylWord {
            grid,
            factors: Vec::new(),
            phase: Complex64::new(1.0, 0.0),
        }
    }

    pub fn single(f: GridFunction) -> Self {
        WeylWord {
            grid: f.grid(),
            factors: vec![f],
            phase: Complex64::new(1.0, 0.0),
        }
    }

    pub fn from_factors(grid: Grid, factors: Vec<GridFunction>) -> Result<Self> {
        if factors.iter().any(|f| f.grid() != grid) {
            return Err(Error::GridMismatch);
        }
        Ok(WeylWord {
            grid,
            factors,
            phase: Complex64::new(1.0, 0.0),
        })
    }

    /// Multiplies the word by a scalar of unit modulus.
    pub fn with_phase(mut self, phase: Complex64) -> Result<Self> {
        if (phase.norm() - 1.0).abs() > 1e-12 {
            return Err(invalid("phase", format!("|{phase}| is not 1")));
        }
        self.phase *= phase;
        Ok(self)
    }

    pub fn grid(&self) -> Grid {
        self.grid
    }

    pub fn factors(&self) -> &[GridFunction] {
        &self.factors
    }

    pub fn phase(&self) -> Complex64 {
        self.phase
    }

    pub fn len(&self) -> usize {
        self.factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.factors.is_empty()
    }

    /// The product `self * other` (concatenation).
    pub fn mul(&self, other: &WeylWord) -> Result<WeylWord> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let mut factors = self.factors.clone();
        factors.extend(other.factors.iter().cloned());
        Ok(WeylWord {
            grid: self.grid,
            factors,
            phase: self.phase * other.phase,
        })
    }

    /// `W(f_1)...W(f_n)` adjoint: `W(-f_n)...W(-f_1)` with the conjugate phase.
    pub fn adjoint(&self) -> WeylWord {
        WeylWord {
            grid: self.grid,
            factors: self.factors.iter().rev().map(|f| f.neg()).collect(),
            phase: self.phase.conj(),
        }
    }

    /// The word collapsed to its normal form, as a word with at most one factor.
    pub fn reduced(&self) -> WeylWord {
        let (phase, symbol) = normal_form(self);
        if symbol.samples().iter().all(|z| z.norm() == 0.0) {
            return WeylWord {
                grid: self.grid,
                factors: Vec::new(),
                phase,
            };
        }
        WeylWord {
            grid: self.grid,
            factors: vec![symbol],
            phase,
        }
    }

    /// `{"factors": [ids...], "phase": [re, im]}` with one id per factor.
    pub fn to_json(&self, ids: &[&str]) -> Result<serde_json::Value> {
        if ids.len() != self.factors.len() {
            return Err(invalid(
                "ids",
                format!("{} ids for {} factors", ids.len(), self.factors.len()),
            ));
        }
        Ok(json!({ "factors": ids, "phase": [self.phase.re, self.phase.im] }))
    }
}

/// Reduces a word to `(phase, f_1 + ... + f_n)`, pairing left to right.
pub fn normal_form(w: &WeylWord) -> (Complex64, GridFunction) {
    let mut phase = w.phase;
    let mut acc = GridFunction::zero(w.grid);
    for f in &w.factors {
        phase *= weyl_phase(symplectic(&acc, f));
        acc = acc.add(f).expect("word factors share the grid");
    }
    // keep the phase on the unit circle against accumulated rounding
    (phase / phase.norm(), acc)
}

/// Vacuum state of mass `m`; at `m = 0` symbols with a real zero mode have expectation 0.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuasiFreeState {
    mass: f64,
}

impl QuasiFreeState {
    pub fn new(mass: f64) -> Result<Self> {
        if !(mass >= 0.0 && mass.is_finite()) {
            return Err(invalid(
                "mass",
                format!("{mass} is not a nonnegative number"),
            ));
        }
        Ok(QuasiFreeState { mass })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn massless_rule(&self) -> bool {
        self.mass == 0.0
    }

    /// `omega(W(f)) = exp(-||f||_m^2 / 2)`, or 0 for the massless zero-mode case.
    pub fn expect_symbol(&self, f: &GridFunction) -> f64 {
        match mass_norm(f, self.mass).expect("mass validated at construction") {
            MassNormValue::Finite(n) => (-0.5 * n * n).exp(),
            MassNormValue::Divergent => 0.0,
        }
    }

    pub fn expect(&self, w: &WeylWord) -> Complex64 {
        let (phase, symbol) = normal_form(w);
        phase * self.expect_symbol(&symbol)
    }
}

pub fn vacuum_expect(state: &QuasiFreeState, w: &WeylWord) -> Complex64 {
    state.expect(w)
}

/// `||(W(f) - W(g)) Omega||` in the vacuum representation of mass `m`.
pub fn weyl_vector_distance(f: &GridFunction, g: &GridFunction, m: f64) -> Result<f64> {
    let state = QuasiFreeState::new(m)?;
    if f.grid() != g.grid() {
        return Err(Error::GridMismatch);
    }
    for h in [f, g] {
        if mass_norm(h, m)?.is_divergent() {
            return Err(Error::ZeroMode {
                zero_mode: h.moment().re.abs() / (2.0 * std::f64::consts::PI).sqrt(),
                tolerance: zero_mode_tolerance(h),
            });
        }
    }
    let diff = g.sub(f)?;
    let gauss = state.expect_symbol(&diff);
    let sq = 2.0 - 2.0 * (0.5 * symplectic(f, g)).cos() * gauss;
    Ok(sq.max(0.0).sqrt())
}

/// `exp(i (mu Re int f + nu Im int f))`, the gauge action on `W(f)`.
pub fn gauge_phase(mu: f64, nu: f64, f: &GridFunction) -> Complex64 {
    let m = f.moment();
    Complex64::from_polar(1.0, mu * m.re + nu * m.im)
}

/// `M_ij = omega(W(f_i)^* W(f_j))`, a Hermitian positive semidefinite matrix.
pub fn state_gram(state: &QuasiFreeState, fs: &[GridFunction]) -> Result<DMatrix<Complex64>> {
    let n = fs.len();
    let mut m = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for i in 0..n {
        for j in i..n {
            let w = WeylWord::from_factors(fs[i].grid(), vec![fs[i].neg(), fs[j].clone()])?;
            let v = state.expect(&w);
            m[(i, j)] = v;
            m[(j, i)] = v.conj();
        }
    }
    Ok(m)
}

/// Smallest eigenvalue of a Hermitian matrix.
pub fn min_eigenvalue(m: &DMatrix<Complex64>) -> f64 {
    m.clone()
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min)
}

/// Rows `word_id,re,im` for a table of expectation values.
pub fn expectation_csv(rows: &[(String, Complex64)]) -> String {
    let mut out = String::from("word_id,re,im\n");
    for (id, v) in rows {
        out.push_str(&format!("{id},{:.17e},{:.17e}\n", v.re, v.im));
    }
    out
}
