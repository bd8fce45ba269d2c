//! Scaling-limit diagnostics: smeared vacuum expectations along `lambda -> 0`,
//! the translation and mass defects of the dynamics, and the infrared growth
//! of the massless norm.
//!
//! All double integrals over spacetime weights reduce to tables of pairwise
//! correlations between translated symbols. Spatial node offsets must be whole
//! multiples of the grid step (see [`SpacetimeWeight::tensor_on_grid`]); the
//! translations are then exact index shifts, and all lags of one pair come out
//! of a single inverse FFT.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::dynamics::{time_translate, SmearedOperator, SpacetimeWeight};
use crate::error::{guard, invalid, Error, Result};
use crate::testfn::quadrature::{Multiplier, WeightRule};
use crate::testfn::{
    check_zero_mode, fft_in_place, mass_norm, padded_len, padded_parts, zero_mode_tolerance, Grid,
    GridFunction, SpectralParts,
};

/// Largest number of node tuples summed directly by [`smeared_npoint`].
pub const MAX_TUPLES: usize = 50_000_000;

/// `count` points from `start` down to `end`, evenly spaced in `log lambda`.
pub fn geometric_grid(start: f64, end: f64, count: usize) -> Result<Vec<f64>> {
    if !(start > 0.0 && end > 0.0 && start.is_finite() && end.is_finite()) {
        return Err(invalid("lambda_grid", "endpoints must be positive"));
    }
    if count < 2 || end >= start {
        return Err(invalid(
            "lambda_grid",
            "need at least two points and start > end",
        ));
    }
    let (a, b) = (start.ln(), end.ln());
    let mut out: Vec<f64> = (0..count)
        .map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp())
        .collect();
    out[0] = start;
    out[count - 1] = end;
    Ok(out)
}

/// Parses `start:end:count`, e.g. `1:1e-3:7`.
pub fn parse_lambda_grid(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(invalid(
            "lambda_grid",
            format!("`{spec}` is not start:end:count"),
        ));
    }
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| invalid("lambda_grid", format!("`{s}` is not a number")))
    };
    let count = parts[2]
        .trim()
        .parse::<usize>()
        .map_err(|_| invalid("lambda_grid", format!("`{}` is not a count", parts[2])))?;
    geometric_grid(num(parts[0])?, num(parts[1])?, count)
}

/// Least-squares line `y = slope x + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Root-mean-square residual.
    pub residual: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(invalid("fit", "need at least three points"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(invalid("fit", "abscissae coincide"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
        residual: (ss_res / n).sqrt(),
    })
}

/// Values of a diagnostic along a decreasing list of scales.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    lambdas: Vec<f64>,
    values: Vec<Complex64>,
    bounds: Option<Vec<f64>>,
    fit: Option<(String, LinearFit)>,
}

impl SweepResult {
    pub fn new(lambdas: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        if lambdas.is_empty() || lambdas.len() != values.len() {
            return Err(invalid(
                "sweep",
                "lambdas and values must be nonempty and of equal length",
            ));
        }
        if lambdas.windows(2).any(|w| !(w[1] < w[0])) || lambdas.iter().any(|l| !(*l > 0.0)) {
            return Err(invalid(
                "sweep",
                "lambdas must be positive and strictly decreasing",
            ));
        }
        if values
            .iter()
            .any(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(guard("sweep", "non-finite value"));
        }
        Ok(SweepResult {
            lambdas,
            values,
            bounds: None,
            fit: None,
        })
    }

    pub fn with_bounds(mut self, bounds: Vec<f64>) -> Result<Self> {
        if bounds.len() != self.lambdas.len() {
            return Err(invalid("bounds", "one bound per lambda"));
        }
        self.bounds = Some(bounds);
        Ok(self)
    }

    pub fn with_fit(mut self, model: &str, fit: LinearFit) -> Self {
        self.fit = Some((model.to_string(), fit));
        self
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn bounds(&self) -> Option<&[f64]> {
        self.bounds.as_deref()
    }

    pub fn fit(&self) -> Option<&(String, LinearFit)> {
        self.fit.as_ref()
    }

    pub fn real_values(&self) -> Vec<f64> {
        self.values.iter().map(|v| v.re).collect()
    }

    pub fn strictly_decreasing(&self) -> bool {
        self.values.windows(2).all(|w| w[1].re < w[0].re)
    }

    /// Non-increasing from the first `lambda <= lambda_0 / 10` on.
    pub fn decreasing_after_first_decade(&self) -> bool {
        let cut = self.lambdas[0] / 10.0 * (1.0 + 1e-12);
        let start = self
            .lambdas
            .iter()
            .position(|&l| l <= cut)
            .unwrap_or(self.lambdas.len());
        self.values[start..].windows(2).all(|w| w[1].re <= w[0].re)
    }

    /// `Re value(last) / Re value(first)`.
    pub fn final_ratio(&self) -> f64 {
        self.values[self.values.len() - 1].re / self.values[0].re
    }

    /// Columns `lambda,value_re,value_im,bound`; the bound column is empty when absent.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,value_re,value_im,bound\n");
        for (i, (l, v)) in self.lambdas.iter().zip(&self.values).enumerate() {
            let b = self
                .bounds
                .as_ref()
                .map(|b| format!("{:.17e}", b[i]))
                .unwrap_or_default();
            out.push_str(&format!("{l:.17e},{:.17e},{:.17e},{b}\n", v.re, v.im));
        }
        out
    }

    pub fn to_json(&self) -> Value {
        json!({
            "lambdas": self.lambdas,
            "values_re": self.values.iter().map(|v| v.re).collect::<Vec<_>>(),
            "values_im": self.values.iter().map(|v| v.im).collect::<Vec<_>>(),
            "bounds": self.bounds,
            "fit": self.fit.as_ref().map(|(model, fit)| json!({"model": model, "parameters": fit})),
        })
    }
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(invalid(name, format!("{v} must be positive")));
    }
    Ok(())
}

fn check_headroom(radius: f64, grid: &Grid) -> Result<()> {
    let l = grid.half_width();
    if radius >= l {
        return Err(Error::SupportOutsideGrid {
            lo: -radius,
            hi: radius,
            half_width: l,
        });
    }
    Ok(())
}

/// Whole grid steps from `x_ref` to `x`.
fn lag_steps(grid: &Grid, x: f64, x_ref: f64) -> Result<i64> {
    let s = (x - x_ref) / grid.dx();
    let q = s.round();
    if (s - q).abs() > 1e-6 {
        return Err(invalid(
            "weight",
            format!("spatial node {x} is not a whole number of grid steps from {x_ref}; use SpacetimeWeight::tensor_on_grid"),
        ));
    }
    Ok(q as i64)
}

/// Time-evolved copies of one symbol, one per distinct node time.
struct Slices {
    times: Vec<f64>,
    funcs: Vec<GridFunction>,
    spans: Vec<Option<(usize, usize)>>,
}

impl Slices {
    fn new(f: &GridFunction, times: Vec<f64>, m: f64) -> Result<Self> {
        let funcs = times
            .iter()
            .map(|&t| time_translate(f, t, m))
            .collect::<Result<Vec<_>>>()?;
        let spans = funcs.iter().map(|g| nonzero_span(g.samples())).collect();
        Ok(Slices {
            times,
            funcs,
            spans,
        })
    }

    fn index(&self, t: f64) -> usize {
        self.times
            .binary_search_by(|s| s.total_cmp(&t))
            .expect("node time is one of the slice times")
    }

    fn parts(&self, n_pad: usize) -> Vec<SpectralParts> {
        self.funcs.iter().map(|g| padded_parts(g, n_pad)).collect()
    }
}

fn nonzero_span(s: &[Complex64]) -> Option<(usize, usize)> {
    let zero = Complex64::new(0.0, 0.0);
    let first = s.iter().position(|v| *v != zero)?;
    let last = s.iter().rposition(|v| *v != zero)?;
    Some((first, last))
}

/// `sigma(a, tau_{q dx} b) = dx sum_j Im(conj(a_j) b_{j-q})`.
fn shifted_symplectic(
    a: &[Complex64],
    sa: Option<(usize, usize)>,
    b: &[Complex64],
    sb: Option<(usize, usize)>,
    q: i64,
    dx: f64,
) -> f64 {
    let (Some((a0, a1)), Some((b0, b1))) = (sa, sb) else {
        return 0.0;
    };
    let lo = (a0 as i64).max(b0 as i64 + q);
    let hi = (a1 as i64).min(b1 as i64 + q);
    let mut s = 0.0;
    for j in lo..=hi {
        let x = a[j as usize];
        let y = b[(j - q) as usize];
        s += x.re * y.im - x.im * y.re;
    }
    s * dx
}

/// Mass weights `h omega^{-1}` and `h omega` (with small-mass corrections).
struct NormWeights {
    inv: Vec<f64>,
    dir: Vec<f64>,
}

impl NormWeights {
    fn new(n: usize, h: f64, mass: f64) -> Self {
        NormWeights {
            inv: WeightRule::new(n, h, mass, Multiplier::Inverse)
                .weights()
                .to_vec(),
            dir: WeightRule::new(n, h, mass, Multiplier::Direct)
                .weights()
                .to_vec(),
        }
    }
}

fn weighted_products(a: &SpectralParts, b: &SpectralParts, w: &NormWeights) -> Vec<Complex64> {
    (0..a.re.len())
        .map(|k| a.re[k].conj() * b.re[k] * w.inv[k] + a.im[k].conj() * b.im[k] * w.dir[k])
        .collect()
}

/// `C(q) = Re <a, tau_{q dx} b>_mu`, i.e.
/// `1/2 Re sum_k [wi_k conj(Ra) Rb + wd_k conj(Ia) Ib] e^{-i p_k q dx}`, for
/// `q` in `qmin..=qmax`.
fn correlations(
    a: &SpectralParts,
    b: &SpectralParts,
    w: &NormWeights,
    qmin: i64,
    qmax: i64,
) -> Vec<f64> {
    let y = weighted_products(a, b, w);
    if qmin == 0 && qmax == 0 {
        return vec![0.5 * y.iter().map(|v| v.re).sum::<f64>()];
    }
    correlation_pair(&y, None, qmin, qmax).0
}

/// Two correlation rows from one inverse FFT: only the real part of each
/// transform is needed, and the transforms of the Hermitian parts are real.
fn correlation_pair(
    y1: &[Complex64],
    y2: Option<&[Complex64]>,
    qmin: i64,
    qmax: i64,
) -> (Vec<f64>, Vec<f64>) {
    let n = y1.len();
    let herm = |y: &[Complex64], k: usize| 0.5 * (y[k] + y[(n - k) % n].conj());
    let mut buf: Vec<Complex64> = match y2 {
        Some(y2) => (0..n)
            .map(|k| herm(y1, k) + Complex64::i() * herm(y2, k))
            .collect(),
        None => (0..n).map(|k| herm(y1, k)).collect(),
    };
    fft_in_place(&mut buf, true);
    let n = n as i64;
    let at = |q: i64| buf[(-q).rem_euclid(n) as usize];
    (
        (qmin..=qmax).map(|q| 0.5 * at(q).re).collect(),
        (qmin..=qmax).map(|q| 0.5 * at(q).im).collect(),
    )
}

/// Pairwise tables between the slices of two symbols, indexed `(ti, tj, q)`.
struct PairTable {
    nb: usize,
    qmin: i64,
    nq: usize,
    values: Vec<f64>,
}

impl PairTable {
    fn get(&self, ti: usize, tj: usize, q: i64) -> f64 {
        self.values[(ti * self.nb + tj) * self.nq + (q - self.qmin) as usize]
    }

    fn build(
        na: usize,
        nb: usize,
        qmin: i64,
        qmax: i64,
        cell: impl Fn(usize, usize) -> Vec<f64> + Sync,
    ) -> Self {
        let nq = (qmax - qmin + 1) as usize;
        let rows: Vec<Vec<f64>> = (0..na * nb)
            .into_par_iter()
            .map(|c| cell(c / nb, c % nb))
            .collect();
        PairTable {
            nb,
            qmin,
            nq,
            values: rows.concat(),
        }
    }
}

fn sigma_table(a: &Slices, b: &Slices, qmin: i64, qmax: i64, dx: f64) -> PairTable {
    PairTable::build(a.funcs.len(), b.funcs.len(), qmin, qmax, |i, j| {
        (qmin..=qmax)
            .map(|q| {
                shifted_symplectic(
                    a.funcs[i].samples(),
                    a.spans[i],
                    b.funcs[j].samples(),
                    b.spans[j],
                    q,
                    dx,
                )
            })
            .collect()
    })
}

/// With `same`, `a` and `b` are the same family and only `i <= j` is
/// transformed: `C_ji(q) = C_ij(-q)`.
fn corr_table(
    a: &[SpectralParts],
    b: &[SpectralParts],
    w: &NormWeights,
    qmin: i64,
    qmax: i64,
    same: bool,
) -> PairTable {
    let (na, nb) = (a.len(), b.len());
    let nq = (qmax - qmin + 1) as usize;
    let cells: Vec<(usize, usize)> = (0..na)
        .flat_map(|i| (0..nb).map(move |j| (i, j)))
        .filter(|&(i, j)| !same || i <= j)
        .collect();
    let rows: Vec<Vec<f64>> = cells
        .par_chunks(2)
        .flat_map_iter(|chunk| {
            let y1 = weighted_products(&a[chunk[0].0], &b[chunk[0].1], w);
            let y2 = chunk
                .get(1)
                .map(|&(i, j)| weighted_products(&a[i], &b[j], w));
            let (r1, r2) = correlation_pair(&y1, y2.as_deref(), qmin, qmax);
            let mut out = vec![r1];
            if y2.is_some() {
                out.push(r2);
            }
            out
        })
        .collect();
    let mut values = vec![0.0; na * nb * nq];
    for (&(i, j), row) in cells.iter().zip(&rows) {
        values[(i * nb + j) * nq..(i * nb + j + 1) * nq].copy_from_slice(row);
        if same && i != j {
            let mirror = &mut values[(j * nb + i) * nq..(j * nb + i + 1) * nq];
            for (s, v) in row.iter().enumerate() {
                mirror[nq - 1 - s] = *v;
            }
        }
    }
    PairTable {
        nb,
        qmin,
        nq,
        values,
    }
}

/// One weight node resolved to a slice index and a lag.
#[derive(Clone, Copy)]
struct Node {
    ti: usize,
    q: i64,
    w: Complex64,
}

fn resolve_nodes(
    weight: &SpacetimeWeight,
    slices: &Slices,
    grid: &Grid,
    x_ref: f64,
) -> Result<Vec<Node>> {
    weight
        .nodes()
        .iter()
        .map(|n| {
            Ok(Node {
                ti: slices.index(n.t),
                q: lag_steps(grid, n.x, x_ref)?,
                w: n.w,
            })
        })
        .collect()
}

fn lag_range(nodes: &[Node]) -> (i64, i64) {
    let lo = nodes.iter().map(|n| n.q).min().unwrap_or(0);
    let hi = nodes.iter().map(|n| n.q).max().unwrap_or(0);
    (lo, hi)
}

/// `sum_{k,l} conj(g_k) g_l e^{(i/2) sigma(tau_k f, tau_l f)} e^{-1/2 ||(tau_l - tau_k) f||^2_{lambda m}}`
/// with `tau_k = tau^{(m)}_{(t_k, x_k)}`, for each `lambda`.
///
/// The symplectic phases do not depend on `lambda`; only the norm weights do.
pub fn notiso_sweep(
    f: &GridFunction,
    g: &SpacetimeWeight,
    m: f64,
    lambdas: &[f64],
) -> Result<SweepResult> {
    check_positive("mass", m)?;
    for &l in lambdas {
        check_positive("lambda", l)?;
    }
    check_zero_mode(f)?;
    let grid = f.grid();
    let radius = f.support_radius() + g.reach();
    check_headroom(radius, &grid)?;

    let slices = Slices::new(f, g.times(), m)?;
    let x_ref = g.nodes()[0].x;
    let nodes = resolve_nodes(g, &slices, &grid, x_ref)?;
    let (lo, hi) = lag_range(&nodes);
    let span = hi - lo;
    let nt = slices.times.len();

    // aggregate conj(g_k) g_l by (t_k, t_l, q_l - q_k)
    let nq = (2 * span + 1) as usize;
    let mut agg = vec![Complex64::new(0.0, 0.0); nt * nt * nq];
    for a in &nodes {
        for b in &nodes {
            let idx = (a.ti * nt + b.ti) * nq + (b.q - a.q + span) as usize;
            agg[idx] += a.w.conj() * b.w;
        }
    }
    let sigma = sigma_table(&slices, &slices, -span, span, grid.dx());

    let n_pad = padded_len(&grid, radius, 0.0);
    let parts = slices.parts(n_pad);
    let h = parts[0].h;
    let mut values = Vec::with_capacity(lambdas.len());
    for &lambda in lambdas {
        let w = NormWeights::new(n_pad, h, lambda * m);
        let corr = corr_table(&parts, &parts, &w, -span, span, true);
        let diag: Vec<f64> = (0..nt).map(|i| corr.get(i, i, 0)).collect();
        let mut total = Complex64::new(0.0, 0.0);
        for i in 0..nt {
            for j in 0..nt {
                for (s, q) in (-span..=span).enumerate() {
                    let c = agg[(i * nt + j) * nq + s];
                    if c == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    let norm_sq = (diag[i] + diag[j] - 2.0 * corr.get(i, j, q)).max(0.0);
                    let phase = Complex64::from_polar(1.0, 0.5 * sigma.get(i, j, q));
                    total += c * phase * (-0.5 * norm_sq).exp();
                }
            }
        }
        values.push(total);
    }
    let bound = g.mass().powi(2);
    SweepResult::new(lambdas.to_vec(), values)?.with_bounds(vec![bound; lambdas.len()])
}

/// Single-`lambda` form of [`notiso_sweep`].
pub fn notiso_norm_sq(
    f: &GridFunction,
    g: &SpacetimeWeight,
    m: f64,
    lambda: f64,
) -> Result<Complex64> {
    Ok(notiso_sweep(f, g, m, &[lambda])?.values[0])
}

/// Vacuum expectation of a product of up to three smeared Weyl operators,
/// all at the same scale and mass.
pub fn smeared_npoint(ops: &[SmearedOperator]) -> Result<Complex64> {
    let first = ops
        .first()
        .ok_or_else(|| invalid("ops", "need at least one operator"))?;
    let (scale, mass) = (first.scale(), first.mass());
    if ops.iter().any(|o| o.scale() != scale || o.mass() != mass) {
        return Err(invalid("ops", "operators must share scale and mass"));
    }
    npoint_at(ops, scale * mass)
}

/// The `lambda = 0` value: massless dynamics, norms and phases.
pub fn smeared_npoint_massless(ops: &[SmearedOperator]) -> Result<Complex64> {
    npoint_at(ops, 0.0)
}

/// [`smeared_npoint`] with every operator rescaled to each `lambda`.
pub fn npoint_sweep(ops: &[SmearedOperator], lambdas: &[f64]) -> Result<SweepResult> {
    let mut values = Vec::with_capacity(lambdas.len());
    for &l in lambdas {
        let scaled = ops
            .iter()
            .map(|o| SmearedOperator::new(o.weight().clone(), o.symbol().clone(), l, o.mass()))
            .collect::<Result<Vec<_>>>()?;
        values.push(smeared_npoint(&scaled)?);
    }
    SweepResult::new(lambdas.to_vec(), values)
}

/// `int h_1..h_n eta exp(-1/2 ||sum_j tau^{(mu)}_{x_j} f_j||^2_mu)` with
/// `eta = exp(-(i/2) sum_{i<j} sigma(tau_{x_i} f_i, tau_{x_j} f_j))`.
fn npoint_at(ops: &[SmearedOperator], mu: f64) -> Result<Complex64> {
    if ops.is_empty() || ops.len() > 3 {
        return Err(invalid(
            "ops",
            format!("{} operators; supported are 1 to 3", ops.len()),
        ));
    }
    let grid = ops[0].symbol().grid();
    if ops.iter().any(|o| o.symbol().grid() != grid) {
        return Err(Error::GridMismatch);
    }
    let tuples = ops
        .iter()
        .map(|o| o.weight().nodes().len())
        .try_fold(1usize, |a, n| a.checked_mul(n));
    if tuples.is_none_or(|t| t > MAX_TUPLES) {
        return Err(invalid(
            "ops",
            format!("more than {MAX_TUPLES} node tuples"),
        ));
    }
    for o in ops {
        o.check_headroom()?;
        if mu == 0.0 {
            check_zero_mode(o.symbol())?;
        }
    }
    let x_ref = ops[0].weight().nodes()[0].x;
    let slices = ops
        .iter()
        .map(|o| Slices::new(o.symbol(), o.weight().times(), mu))
        .collect::<Result<Vec<_>>>()?;
    let nodes = ops
        .iter()
        .zip(&slices)
        .map(|(o, s)| resolve_nodes(o.weight(), s, &grid, x_ref))
        .collect::<Result<Vec<_>>>()?;
    let radius = ops.iter().map(|o| o.reach()).fold(0.0, f64::max);
    let n_pad = padded_len(&grid, radius, mu);
    let parts: Vec<Vec<SpectralParts>> = slices.iter().map(|s| s.parts(n_pad)).collect();
    let w = NormWeights::new(n_pad, parts[0][0].h, mu);
    let diag: Vec<Vec<f64>> = parts
        .iter()
        .map(|ps| ps.iter().map(|p| correlations(p, p, &w, 0, 0)[0]).collect())
        .collect();

    // tables for i < j over lags q_j - q_i
    let n = ops.len();
    let mut tables = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let (ilo, ihi) = lag_range(&nodes[i]);
            let (jlo, jhi) = lag_range(&nodes[j]);
            let (qmin, qmax) = (jlo - ihi, jhi - ilo);
            let sigma = sigma_table(&slices[i], &slices[j], qmin, qmax, grid.dx());
            let corr = corr_table(&parts[i], &parts[j], &w, qmin, qmax, false);
            tables.push(((i, j), sigma, corr));
        }
    }
    let pair = |i: usize, j: usize| &tables.iter().find(|t| t.0 == (i, j)).expect("pair table").1;
    let corr = |i: usize, j: usize| &tables.iter().find(|t| t.0 == (i, j)).expect("pair table").2;

    let term = |sel: &[Node]| -> Complex64 {
        let mut norm_sq = 0.0;
        let mut sigma = 0.0;
        for (i, a) in sel.iter().enumerate() {
            norm_sq += diag[i][a.ti];
            for (j, b) in sel.iter().enumerate().skip(i + 1) {
                norm_sq += 2.0 * corr(i, j).get(a.ti, b.ti, b.q - a.q);
                sigma += pair(i, j).get(a.ti, b.ti, b.q - a.q);
            }
        }
        let weight = sel
            .iter()
            .fold(Complex64::new(1.0, 0.0), |acc, nd| acc * nd.w);
        weight * Complex64::from_polar(1.0, -0.5 * sigma) * (-0.5 * norm_sq.max(0.0)).exp()
    };

    let mut total = Complex64::new(0.0, 0.0);
    match n {
        1 => {
            for a in &nodes[0] {
                total += term(&[*a]);
            }
        }
        2 => {
            for a in &nodes[0] {
                for b in &nodes[1] {
                    total += term(&[*a, *b]);
                }
            }
        }
        _ => {
            for a in &nodes[0] {
                for b in &nodes[1] {
                    for c in &nodes[2] {
                        total += term(&[*a, *b, *c]);
                    }
                }
            }
        }
    }
    Ok(total)
}

fn check_null_integral(f: &GridFunction) -> Result<()> {
    let tolerance = zero_mode_tolerance(f);
    let m = f.moment();
    let zero_mode = m.re.abs().max(m.im.abs()) / (2.0 * PI).sqrt();
    if zero_mode > tolerance {
        return Err(Error::ZeroMode {
            zero_mode,
            tolerance,
        });
    }
    Ok(())
}

/// Momentum-space ingredients shared by the two defects.
struct DefectNode {
    p: f64,
    re: Complex64,
    im: Complex64,
    d_re: Complex64,
    d_im: Complex64,
}

/// `(tau^{(mu)}_t - tau^{(0)}_t) f` node by node in momentum space.
fn defect_nodes(parts: &SpectralParts, t: f64, mu: f64) -> Vec<DefectNode> {
    (0..parts.re.len())
        .map(|k| {
            let p = parts.momentum(k);
            let a = p.abs();
            let om = (p * p + mu * mu).sqrt();
            let (s_mu, c_mu) = (t * om).sin_cos();
            let (s_0, c_0) = (t * a).sin_cos();
            let sinc = |w: f64, s: f64| if w == 0.0 { t } else { s / w };
            let (re, im) = (parts.re[k], parts.im[k]);
            let d_re = re * (c_mu - c_0) - im * (om * s_mu - a * s_0);
            let d_im = re * (sinc(om, s_mu) - sinc(a, s_0)) + im * (c_mu - c_0);
            DefectNode {
                p,
                re,
                im,
                d_re,
                d_im,
            }
        })
        .collect()
}

fn weighted_norm_sq(nodes: &[DefectNode], w: &NormWeights) -> f64 {
    let s: f64 = nodes
        .iter()
        .enumerate()
        .map(|(k, d)| w.inv[k] * d.d_re.norm_sqr() + w.dir[k] * d.d_im.norm_sqr())
        .sum();
    0.5 * s
}

/// The translation defect and its dominating function.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TranslationDefect {
    /// `||tau^{(lambda m)}_x f - tau^{(0)}_x f||_0^2`.
    pub value: f64,
    /// Quadrature of `(4/|p|) [(1 + |t| omega_m) |(Re f)^| + 2 omega_m |(Im f)^|]^2`.
    pub dominating: f64,
    /// Largest node-wise ratio integrand / dominating function (at most 1 when the bound holds).
    pub max_ratio: f64,
}

/// `||tau^{(lambda m)}_{(t,x)} f - tau^{(0)}_{(t,x)} f||_0^2` for `int f = 0`.
/// The spatial shift is a common phase and drops out.
pub fn translation_defect(
    f: &GridFunction,
    t: f64,
    x: f64,
    m: f64,
    lambda: f64,
) -> Result<TranslationDefect> {
    check_positive("mass", m)?;
    check_positive("lambda", lambda)?;
    check_null_integral(f)?;
    let grid = f.grid();
    let radius = f.support_radius() + t.abs() + x.abs();
    check_headroom(radius, &grid)?;
    let n_pad = padded_len(&grid, radius, 0.0);
    let parts = padded_parts(f, n_pad);
    let nodes = defect_nodes(&parts, t, lambda * m);
    let w0 = NormWeights::new(n_pad, parts.h, 0.0);
    let value = weighted_norm_sq(&nodes, &w0);

    let mut dom = vec![0.0; n_pad];
    let mut max_ratio: f64 = 0.0;
    for (k, d) in nodes.iter().enumerate() {
        let om = (d.p * d.p + m * m).sqrt();
        let core = (1.0 + t.abs() * om) * d.re.norm() + 2.0 * om * d.im.norm();
        dom[k] = 4.0 * core * core;
        if d.p != 0.0 && dom[k] > 0.0 {
            let a = d.p.abs();
            let integrand = 0.5 * (d.d_re + Complex64::i() * a * d.d_im).norm_sqr() / a;
            max_ratio = max_ratio.max(integrand / (dom[k] / a));
        }
    }
    let dominating = WeightRule::new(n_pad, parts.h, 0.0, Multiplier::Inverse).apply(&dom);
    Ok(TranslationDefect {
        value,
        dominating,
        max_ratio,
    })
}

/// The mass defect split at `|p| = 1`, with the low-momentum elementary bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MassiveDefect {
    /// `||tau^{(0)}_t f - tau^{(lambda m)}_t f||^2_{lambda m}`.
    pub value: f64,
    pub low: f64,
    pub high: f64,
    /// `max_{|p| <= 1} |cos(t omega) - cos(t|p|)| omega^{-1/2} / (|t| omega_m^{1/2})`.
    pub cos_ratio: f64,
    /// `max_{|p| <= 1} |omega sin(t omega) - |p| sin(t|p|)| omega^{-1/2} / (3 omega_m^{1/2})`.
    pub sin_ratio: f64,
    /// Largest ratio of the `|p| > 1` integrand to the dominating function with `|p| -> omega`.
    pub high_ratio: f64,
}

impl MassiveDefect {
    pub fn max_ratio(&self) -> f64 {
        self.cos_ratio.max(self.sin_ratio).max(self.high_ratio)
    }
}

pub fn massive_defect(f: &GridFunction, t: f64, m: f64, lambda: f64) -> Result<MassiveDefect> {
    check_positive("mass", m)?;
    check_positive("lambda", lambda)?;
    let grid = f.grid();
    let radius = f.support_radius() + t.abs();
    check_headroom(radius, &grid)?;
    let mu = lambda * m;
    let n_pad = padded_len(&grid, radius, mu);
    let parts = padded_parts(f, n_pad);
    let nodes = defect_nodes(&parts, t, mu);
    let value = weighted_norm_sq(&nodes, &NormWeights::new(n_pad, parts.h, mu));

    let mut high = 0.0;
    let (mut cos_ratio, mut sin_ratio, mut high_ratio): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for d in &nodes {
        let a = d.p.abs();
        let om = (d.p * d.p + mu * mu).sqrt();
        let om_m = (d.p * d.p + m * m).sqrt();
        if a > 1.0 {
            high += 0.5 * parts.h * (d.d_re.norm_sqr() / om + om * d.d_im.norm_sqr());
            let integrand = 0.5 * (d.d_re + Complex64::i() * om * d.d_im).norm_sqr() / om;
            let core = (1.0 + t.abs() * om_m) * d.re.norm() + 2.0 * om_m * d.im.norm();
            let dom = 4.0 * core * core / om;
            if dom > 0.0 {
                high_ratio = high_ratio.max(integrand / dom);
            }
        } else if t != 0.0 {
            let (s_mu, c_mu) = (t * om).sin_cos();
            let (s_0, c_0) = (t * a).sin_cos();
            cos_ratio = cos_ratio.max((c_mu - c_0).abs() / om.sqrt() / (t.abs() * om_m.sqrt()));
            sin_ratio =
                sin_ratio.max((om * s_mu - a * s_0).abs() / om.sqrt() / (3.0 * om_m.sqrt()));
        }
    }
    Ok(MassiveDefect {
        value,
        low: value - high,
        high,
        cos_ratio,
        sin_ratio,
        high_ratio,
    })
}

pub fn translation_sweep(
    f: &GridFunction,
    t: f64,
    x: f64,
    m: f64,
    lambdas: &[f64],
) -> Result<SweepResult> {
    let reports = lambdas
        .iter()
        .map(|&l| translation_defect(f, t, x, m, l))
        .collect::<Result<Vec<_>>>()?;
    let values = reports
        .iter()
        .map(|r| Complex64::new(r.value, 0.0))
        .collect();
    SweepResult::new(lambdas.to_vec(), values)?
        .with_bounds(reports.iter().map(|r| r.dominating).collect())
}

/// Sweep of [`massive_defect`]; the bound column holds the largest node-wise ratio.
pub fn massive_sweep(f: &GridFunction, t: f64, m: f64, lambdas: &[f64]) -> Result<SweepResult> {
    let reports = lambdas
        .iter()
        .map(|&l| massive_defect(f, t, m, l))
        .collect::<Result<Vec<_>>>()?;
    let values = reports
        .iter()
        .map(|r| Complex64::new(r.value, 0.0))
        .collect();
    SweepResult::new(lambdas.to_vec(), values)?
        .with_bounds(reports.iter().map(|r| r.max_ratio()).collect())
}

/// Fit of `||h||_m^2` against `|log m|`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IrSlope {
    pub fit: LinearFit,
    /// `|(Re h)^(0)|^2`, the slope predicted by `int_{|p|<1} omega_m^{-1} ~ 2 |log m|`.
    pub expected_slope: f64,
    pub masses: Vec<f64>,
    pub norms_sq: Vec<f64>,
}

pub fn ir_divergence_slope(h: &GridFunction, masses: &[f64]) -> Result<IrSlope> {
    if masses.len() < 3 {
        return Err(invalid(
            "masses",
            "degenerate fit: need at least three masses",
        ));
    }
    if masses.windows(2).any(|w| !(w[1] < w[0]))
        || masses.iter().any(|m| !(*m > 0.0 && m.is_finite()))
    {
        return Err(invalid(
            "masses",
            "must be positive and strictly decreasing",
        ));
    }
    if masses[0] / masses[masses.len() - 1] < 1e4 * (1.0 - 1e-12) {
        return Err(invalid("masses", "must span at least four decades"));
    }
    let norms_sq = masses
        .iter()
        .map(|&m| {
            let v = mass_norm(h, m)?
                .finite()
                .ok_or_else(|| guard("ir_slope", "divergent norm at positive mass"))?;
            Ok(v * v)
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = masses.iter().map(|m| m.ln().abs()).collect();
    let fit = linear_fit(&xs, &norms_sq)?;
    let expected_slope = h.moment().re.powi(2) / (2.0 * PI);
    Ok(IrSlope {
        fit,
        expected_slope,
        masses: masses.to_vec(),
        norms_sq,
    })
}
