//! Klein-Gordon time translations, space translations and dilations acting on
//! Cauchy data `f = Re f + i Im f`, plus the smeared operators built from them.

use num_complex::Complex64;

use crate::error::{invalid, Error, Result};
use crate::testfn::{
    evaluate_at, fourier, inverse_fourier, real_imag_parts, Grid, GridFunction, Spectrum,
};

fn omega(p: f64, m: f64) -> f64 {
    (p * p + m * m).sqrt()
}

fn check_mass(m: f64) -> Result<()> {
    if !(m >= 0.0 && m.is_finite()) {
        return Err(invalid("mass", format!("{m} is not a nonnegative number")));
    }
    Ok(())
}

/// Applies a node-wise linear map to `((Re f)^, (Im f)^)` and transforms back.
/// `op` receives the FFT index, the momentum and both parts.
fn map_parts(
    f: &GridFunction,
    support: (f64, f64),
    op_name: &'static str,
    op: impl Fn(usize, f64, Complex64, Complex64) -> (Complex64, Complex64),
) -> Result<GridFunction> {
    let grid = f.grid();
    grid.check_support(support.0, support.1)?;
    if f.samples().iter().all(|z| z.norm() == 0.0) {
        return Ok(GridFunction::zero(grid));
    }
    let spec = fourier(f);
    let dp = spec.dp();
    let (re, im) = real_imag_parts(&spec);
    let mut re_out = Vec::with_capacity(re.len());
    let mut im_out = Vec::with_capacity(im.len());
    for k in 0..re.len() {
        let (a, b) = op(k, spec.momentum(k), re[k], im[k]);
        re_out.push(a);
        im_out.push(b);
    }
    let real = inverse_fourier(grid, &Spectrum::from_values(dp, re_out));
    let imag_zero = im_out.iter().all(|z| z.norm() == 0.0);
    let samples: Vec<Complex64> = if imag_zero {
        real.iter().map(|z| Complex64::new(z.re, 0.0)).collect()
    } else {
        let imag = inverse_fourier(grid, &Spectrum::from_values(dp, im_out));
        real.iter()
            .zip(&imag)
            .map(|(a, b)| Complex64::new(a.re, b.re))
            .collect()
    };
    let mut out = f.with_samples(support, samples);
    out.trim_outside_support(op_name)?;
    Ok(out)
}

/// `tau_t^{(m)} f`: on each momentum node the pair `((Re f)^, (Im f)^)` is mapped by
/// `[[cos(t w), -w sin(t w)], [sin(t w)/w, cos(t w)]]` with `w = omega_m(p)`.
pub fn time_translate(f: &GridFunction, t: f64, m: f64) -> Result<GridFunction> {
    check_mass(m)?;
    if !t.is_finite() {
        return Err(invalid("t", "must be finite"));
    }
    if t == 0.0 {
        return Ok(f.clone());
    }
    let (a, b) = f.support();
    map_parts(
        f,
        (a - t.abs(), b + t.abs()),
        "time_translate",
        |_, p, re, im| {
            let w = omega(p, m);
            let (s, c) = (t * w).sin_cos();
            let sinc = if w == 0.0 { t } else { s / w };
            (re * c - im * (w * s), re * sinc + im * c)
        },
    )
}

/// `(tau_x f)(y) = f(y - x)`, a phase `e^{-ipx}` on the spectrum.
pub fn space_translate(f: &GridFunction, x: f64) -> Result<GridFunction> {
    if !x.is_finite() {
        return Err(invalid("x", "must be finite"));
    }
    if x == 0.0 {
        return Ok(f.clone());
    }
    let n = f.grid().n();
    let (a, b) = f.support();
    map_parts(f, (a + x, b + x), "space_translate", |k, p, re, im| {
        // the Nyquist node is its own mirror; a real factor keeps both parts real
        let phase = if k == n / 2 {
            Complex64::new((p * x).cos(), 0.0)
        } else {
            Complex64::from_polar(1.0, -p * x)
        };
        (re * phase, im * phase)
    })
}

/// Spacetime translation `tau_{(t, x)}^{(m)} = tau_t^{(m)} tau_x`.
pub fn spacetime_translate(f: &GridFunction, t: f64, x: f64, m: f64) -> Result<GridFunction> {
    time_translate(&space_translate(f, x)?, t, m)
}

/// `(delta_l f)(x) = l^{-1} (Re f)(x/l) + i (Im f)(x/l)` on the grid of `f`.
pub fn dilate(f: &GridFunction, lambda: f64) -> Result<GridFunction> {
    dilate_onto(f, lambda, f.grid())
}

/// [`dilate`] sampled on another grid. On the grid scaled by `lambda` the
/// samples are copied; elsewhere `f` is interpolated band-limited.
pub fn dilate_onto(f: &GridFunction, lambda: f64, target: Grid) -> Result<GridFunction> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(invalid("lambda", format!("{lambda} must be positive")));
    }
    if lambda == 1.0 && target == f.grid() {
        return Ok(f.clone());
    }
    let (a, b) = f.support();
    let support = (lambda * a, lambda * b);
    target.check_support(support.0, support.1)?;
    if f.samples().iter().all(|z| z.norm() == 0.0) {
        return Ok(GridFunction::zero(target));
    }
    let grade = |z: Complex64| Complex64::new(z.re / lambda, z.im);
    let source = f.grid();
    let scaled = target.n() == source.n()
        && ((target.half_width() - lambda * source.half_width()) / target.half_width()).abs()
            < 1e-15;
    let samples: Vec<Complex64> = if scaled {
        f.samples().iter().map(|&z| grade(z)).collect()
    } else {
        let nodes: Vec<usize> = target.index_range(support.0, support.1).collect();
        let ys: Vec<f64> = nodes.iter().map(|&j| target.x(j) / lambda).collect();
        let vals = evaluate_at(f, &ys);
        let mut s = vec![Complex64::new(0.0, 0.0); target.n()];
        for (&j, v) in nodes.iter().zip(vals) {
            s[j] = grade(v);
        }
        if f.is_real() {
            for z in &mut s {
                z.im = 0.0;
            }
        }
        s
    };
    GridFunction::from_samples(target, support, samples)
}

/// Node-wise `max |delta_l tau_{(t,x)}^{(l m)} f - tau_{(l t, l x)}^{(m)} delta_l f|`.
pub fn scaled_translate_commute(
    f: &GridFunction,
    lambda: f64,
    t: f64,
    x: f64,
    m: f64,
) -> Result<f64> {
    let lhs = dilate(&spacetime_translate(f, t, x, lambda * m)?, lambda)?;
    let rhs = spacetime_translate(&dilate(f, lambda)?, lambda * t, lambda * x, m)?;
    lhs.max_distance(&rhs)
}

/// One quadrature node of a spacetime weight: position `(t, x)` and weight `w`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WeightNode {
    pub t: f64,
    pub x: f64,
    pub w: Complex64,
}

/// A compactly supported weight `h(t, x)` on a rectangle, as quadrature nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct SpacetimeWeight {
    nodes: Vec<WeightNode>,
    rect: ((f64, f64), (f64, f64)),
}

fn trapezoid_nodes((lo, hi): (f64, f64), nodes: usize) -> Result<Vec<(f64, f64)>> {
    if !(lo.is_finite() && hi.is_finite() && hi >= lo) {
        return Err(invalid(
            "range",
            format!("[{lo}, {hi}] is not a bounded interval"),
        ));
    }
    if hi == lo {
        return Ok(vec![(lo, 1.0)]);
    }
    let step = (hi - lo) / (nodes - 1) as f64;
    Ok((0..nodes)
        .map(|i| {
            let w = if i == 0 || i == nodes - 1 {
                0.5 * step
            } else {
                step
            };
            (lo + i as f64 * step, w)
        })
        .collect())
}

impl SpacetimeWeight {
    /// Samples `h` on `nodes x nodes` tensor trapezoid points over `t_range x x_range`.
    /// A degenerate range contributes a single node of weight 1.
    pub fn tensor(
        h: impl Fn(f64, f64) -> Complex64,
        t_range: (f64, f64),
        x_range: (f64, f64),
        nodes: usize,
    ) -> Result<Self> {
        if nodes < 2 {
            return Err(invalid("nodes", "need at least two nodes per axis"));
        }
        let ts = trapezoid_nodes(t_range, nodes)?;
        let xs = trapezoid_nodes(x_range, nodes)?;
        let mut out = Vec::with_capacity(ts.len() * xs.len());
        for &(t, wt) in &ts {
            for &(x, wx) in &xs {
                let w = h(t, x) * (wt * wx);
                if w.norm() > 0.0 {
                    out.push(WeightNode { t, x, w });
                }
            }
        }
        Self::from_nodes(out, (t_range, x_range))
    }

    /// [`SpacetimeWeight::tensor`] on `[-x_half, x_half]`, with `x_half` rounded so
    /// the spatial node spacing is a whole number of grid steps.
    pub fn tensor_on_grid(
        h: impl Fn(f64, f64) -> Complex64,
        t_range: (f64, f64),
        x_half: f64,
        nodes: usize,
        grid: Grid,
    ) -> Result<Self> {
        if nodes < 2 {
            return Err(invalid("nodes", "need at least two nodes per axis"));
        }
        let dx = grid.dx();
        let steps = (2.0 * x_half / ((nodes - 1) as f64 * dx)).round().max(1.0);
        let half = 0.5 * steps * (nodes - 1) as f64 * dx;
        Self::tensor(h, t_range, (-half, half), nodes)
    }

    pub fn point(t: f64, x: f64, w: Complex64) -> Result<Self> {
        Self::from_nodes(vec![WeightNode { t, x, w }], ((t, t), (x, x)))
    }

    pub fn from_nodes(nodes: Vec<WeightNode>, rect: ((f64, f64), (f64, f64))) -> Result<Self> {
        let ((t0, t1), (x0, x1)) = rect;
        if nodes.is_empty() {
            return Err(invalid("nodes", "weight has no nodes"));
        }
        for n in &nodes {
            if !(n.t >= t0 && n.t <= t1 && n.x >= x0 && n.x <= x1) {
                return Err(invalid(
                    "nodes",
                    format!("node ({}, {}) outside the weight rectangle", n.t, n.x),
                ));
            }
            if !(n.w.re.is_finite() && n.w.im.is_finite()) {
                return Err(invalid("nodes", "weights must be finite"));
            }
        }
        Ok(SpacetimeWeight { nodes, rect })
    }

    pub fn nodes(&self) -> &[WeightNode] {
        &self.nodes
    }

    pub fn rect(&self) -> ((f64, f64), (f64, f64)) {
        self.rect
    }

    /// `sum |w_k|`.
    pub fn mass(&self) -> f64 {
        self.nodes.iter().map(|n| n.w.norm()).sum()
    }

    pub fn conj(&self) -> SpacetimeWeight {
        SpacetimeWeight {
            nodes: self
                .nodes
                .iter()
                .map(|n| WeightNode {
                    w: n.w.conj(),
                    ..*n
                })
                .collect(),
            rect: self.rect,
        }
    }

    /// `max |t| + max |x|` over the rectangle.
    pub fn reach(&self) -> f64 {
        let ((t0, t1), (x0, x1)) = self.rect;
        t0.abs().max(t1.abs()) + x0.abs().max(x1.abs())
    }

    /// Distinct time coordinates of the nodes, in increasing order.
    pub fn times(&self) -> Vec<f64> {
        let mut ts: Vec<f64> = self.nodes.iter().map(|n| n.t).collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts
    }
}

/// `(alpha_h W(f))_lambda`: the symbol `f` smeared with a spacetime weight.
#[derive(Clone, Debug)]
pub struct SmearedOperator {
    weight: SpacetimeWeight,
    symbol: GridFunction,
    scale: f64,
    mass: f64,
}

impl SmearedOperator {
    pub fn new(
        weight: SpacetimeWeight,
        symbol: GridFunction,
        scale: f64,
        mass: f64,
    ) -> Result<Self> {
        check_mass(mass)?;
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(invalid("scale", format!("{scale} must be positive")));
        }
        Ok(SmearedOperator {
            weight,
            symbol,
            scale,
            mass,
        })
    }

    pub fn weight(&self) -> &SpacetimeWeight {
        &self.weight
    }

    pub fn symbol(&self) -> &GridFunction {
        &self.symbol
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    /// The adjoint smearing: conjugate weights, negated symbol.
    pub fn adjoint(&self) -> SmearedOperator {
        SmearedOperator {
            weight: self.weight.conj(),
            symbol: self.symbol.neg(),
            scale: self.scale,
            mass: self.mass,
        }
    }

    /// Headroom the nodes need: symbol support radius plus the weight's reach.
    pub fn reach(&self) -> f64 {
        self.symbol.support_radius() + self.weight.reach()
    }

    pub(crate) fn check_headroom(&self) -> Result<()> {
        let l = self.symbol.grid().half_width();
        if self.reach() >= l {
            return Err(Error::SupportOutsideGrid {
                lo: -self.reach(),
                hi: self.reach(),
                half_width: l,
            });
        }
        Ok(())
    }
}
