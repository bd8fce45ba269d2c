//! Standard inputs for each experiment and the checks recorded in the manifest.

use num_complex::Complex64;
use serde::Serialize;
use serde_json::{json, Value};

use crate::dynamics::{SmearedOperator, SpacetimeWeight};
use crate::error::Result;
use crate::quasiequiv::{
    bessel_k, build_galerkin, form_q, fourier_trace_diagnostic, norm_equivalence,
    operator_diagnostics, Cutoff, FormPath, KernelSign,
};
use crate::scalinglimit::{
    geometric_grid, ir_divergence_slope, massive_defect, massive_sweep, notiso_sweep, npoint_sweep,
    smeared_npoint_massless, translation_defect, translation_sweep, SweepResult,
};
use crate::sectors::{
    phase_table_csv, rho_lambda_dilated_phase, rho_lambda_symbol, sector_phase,
    stabilization_index, ChargeProfile,
};
use crate::testfn::random::{random_null_real, stream};
use crate::testfn::{Grid, GridFunction};

use super::{Experiment, ExperimentConfig, IrSymbol, RunError};

/// A named threshold test recorded in the manifest.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    fn below(name: &str, value: f64, threshold: f64) -> Check {
        Check {
            name: name.into(),
            value,
            threshold,
            pass: value < threshold,
        }
    }

    fn at_most(name: &str, value: f64, threshold: f64) -> Check {
        Check {
            name: name.into(),
            value,
            threshold,
            pass: value <= threshold,
        }
    }

    fn within(name: &str, value: f64, lo: f64, hi: f64) -> Check {
        Check {
            name: format!("{name} in [{lo}, {hi}]"),
            value,
            threshold: hi,
            pass: value >= lo && value <= hi,
        }
    }

    fn flag(name: &str, ok: bool) -> Check {
        Check {
            name: name.into(),
            value: if ok { 1.0 } else { 0.0 },
            threshold: 1.0,
            pass: ok,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub csv: String,
    pub json: Value,
    pub summary: Value,
    pub checks: Vec<Check>,
}

impl Outcome {
    pub fn pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn grid(cfg: &ExperimentConfig, e: Experiment) -> Result<Grid> {
    let (n, l) = cfg.grid_for(e);
    Grid::new(n, l)
}

pub fn run_experiment(
    e: Experiment,
    cfg: &ExperimentConfig,
) -> std::result::Result<Outcome, RunError> {
    let g = grid(cfg, e)?;
    let out = match e {
        Experiment::SweepNotiso => sweep_notiso(cfg, g),
        Experiment::SweepTranslation => sweep_translation(cfg, g),
        Experiment::SweepMassiveDefect => sweep_massive(cfg, g),
        Experiment::NpointLimit => npoint_limit(cfg, g),
        Experiment::IrSlope => ir_slope(cfg, g),
        Experiment::SectorPhases => sector_phases(cfg, g),
        Experiment::Bessel => bessel_table(),
        Experiment::KernelCrosscheck => kernel_crosscheck(cfg, g),
        Experiment::TraceDiagnostics => trace_diagnostics(cfg),
        Experiment::Galerkin => galerkin(cfg, g),
        Experiment::NormEquivalence => norm_equiv(cfg, g),
    }?;
    Ok(out)
}

fn sweep_outcome(sweep: &SweepResult, summary: Value, checks: Vec<Check>) -> Outcome {
    Outcome {
        csv: sweep.to_csv(),
        json: json!({"sweep": sweep.to_json(), "summary": summary}),
        summary,
        checks,
    }
}

/// `f = i bump` (so `int Re f = 0`, `int Im f != 0`) against a nonnegative tent weight.
pub fn notiso_inputs(g: Grid, nodes: usize) -> Result<(GridFunction, SpacetimeWeight)> {
    let f = GridFunction::bump(g, 0.0, 8.0, c(0.0, 1.0))?;
    let w = SpacetimeWeight::tensor_on_grid(
        |t, x| {
            c(
                (1.0 - (0.5 * t).powi(2)).max(0.0) * (1.0 - (x / 0.5).powi(2)).max(0.0) + 1e-3,
                0.0,
            )
        },
        (-2.0, 2.0),
        0.5,
        nodes,
        g,
    )?;
    Ok((f, w))
}

fn sweep_notiso(cfg: &ExperimentConfig, g: Grid) -> Result<Outcome> {
    let (f, w) = notiso_inputs(g, cfg.nodes_for(Experiment::SweepNotiso))?;
    let sweep = notiso_sweep(&f, &w, cfg.mass, &cfg.lambda_grid)?;
    let checks = vec![
        Check::flag("strictly decreasing", sweep.strictly_decreasing()),
        Check::below("final / initial", sweep.final_ratio(), 0.5),
    ];
    Ok(sweep_outcome(
        &sweep,
        json!({"final_ratio": sweep.final_ratio()}),
        checks,
    ))
}

/// Symbol with `int Re f = int Im f = 0` used by both defect sweeps.
pub fn defect_symbol(g: Grid) -> Result<GridFunction> {
    GridFunction::bump_derivative(g, 0.1, 1.0, c(0.8, 0.0))?.add(&GridFunction::bump_derivative(
        g,
        -0.2,
        1.0,
        c(0.0, 0.6),
    )?)
}

pub const DEFECT_TIME: f64 = 1.5;
pub const DEFECT_SHIFT: f64 = 0.5;

fn sweep_translation(cfg: &ExperimentConfig, g: Grid) -> Result<Outcome> {
    let f = defect_symbol(g)?;
    let sweep = translation_sweep(&f, DEFECT_TIME, DEFECT_SHIFT, cfg.mass, &cfg.lambda_grid)?;
    let mut worst: f64 = 0.0;
    for &l in &cfg.lambda_grid {
        worst =
            worst.max(translation_defect(&f, DEFECT_TIME, DEFECT_SHIFT, cfg.mass, l)?.max_ratio);
    }
    let checks = vec![
        Check::flag(
            "decreasing after first decade",
            sweep.decreasing_after_first_decade(),
        ),
        Check::below("final / initial", sweep.final_ratio(), 0.1),
        Check::at_most("node-wise domination ratio", worst, 1.0),
    ];
    Ok(sweep_outcome(
        &sweep,
        json!({"final_ratio": sweep.final_ratio(), "max_domination_ratio": worst}),
        checks,
    ))
}

fn sweep_massive(cfg: &ExperimentConfig, g: Grid) -> Result<Outcome> {
    let f = defect_symbol(g)?;
    let sweep = massive_sweep(&f, DEFECT_TIME, cfg.mass, &cfg.lambda_grid)?;
    let mut worst: f64 = 0.0;
    for &l in &cfg.lambda_grid {
        worst = worst.max(massive_defect(&f, DEFECT_TIME, cfg.mass, l)?.max_ratio());
    }
    let checks = vec![
        Check::flag(
            "decreasing after first decade",
            sweep.decreasing_after_first_decade(),
        ),
        Check::below("final / initial", sweep.final_ratio(), 0.1),
        Check::at_most("elementary bound ratio", worst, 1.0),
    ];
    Ok(sweep_outcome(
        &sweep,
        json!({"final_ratio": sweep.final_ratio(), "max_bound_ratio": worst}),
        checks,
    ))
}

/// Two smeared operators sharing scale and mass.
pub fn npoint_inputs(g: Grid, nodes: usize, m: f64) -> Result<Vec<SmearedOperator>> {
    let f1 = GridFunction::bump_derivative(g, 0.0, 1.0, c(0.9, 0.0))?.add(&GridFunction::bump(
        g,
        0.2,
        0.8,
        c(0.0, 0.5),
    )?)?;
    let f2 = GridFunction::bump_derivative(g, 0.3, 0.8, c(-0.6, 0.0))?.add(&GridFunction::bump(
        g,
        -0.1,
        1.0,
        c(0.0, 0.4),
    )?)?;
    let w1 = SpacetimeWeight::tensor_on_grid(
        |t, x| c((1.0 - t * t).max(0.0) * (1.0 - x * x).max(0.0), 0.0),
        (-1.0, 1.0),
        1.0,
        nodes,
        g,
    )?;
    let w2 = SpacetimeWeight::tensor_on_grid(
        |t, x| c((1.0 - t * t).max(0.0), 0.3 * x),
        (-1.0, 1.0),
        1.0,
        nodes,
        g,
    )?;
    Ok(vec![
        SmearedOperator::new(w1, f1, 1.0, m)?,
        SmearedOperator::new(w2, f2, 1.0, m)?,
    ])
}

fn npoint_limit(cfg: &ExperimentConfig, g: Grid) -> Result<Outcome> {
    let ops = npoint_inputs(g, cfg.nodes_for(Experiment::NpointLimit), cfg.mass)?;
    let sweep = npoint_sweep(&ops, &cfg.lambda_grid)?;
    let limit = smeared_npoint_massless(&ops)?;
    let last = sweep.values()[sweep.values().len() - 1];
    let rel = (last - limit).norm() / limit.norm();
    let summary =
        json!({"massless_re": limit.re, "massless_im": limit.im, "relative_difference": rel});
    Ok(sweep_outcome(
        &sweep,
        summary,
        vec![Check::below("relative difference to lambda = 0", rel, 0.05)],
    ))
}

fn ir_slope(cfg: &ExperimentConfig, g: Grid) -> Result<Outcome> {
    let h = match cfg.symbol {
        IrSymbol::Null => GridFunction::bump_derivative(g, 0.0, 1.0, c(1.0, 0.0))?,
        IrSymbol::Charged => GridFunction::bump(g, 0.0, 1.0, c(1.0, 0.0))?,
    };
    let masses = geometric_grid(1e-1, 1e-6, 6)?;
    let r = ir_divergence_slope(&h, &masses)?;
    let mut csv = String::from("mass,abs_log_mass,norm_sq\n");
    for (m, n) in r.masses.iter().zip(&r.norms_sq) {
        csv.push_str(&format!("{m:.17e},{:.17e},{n:.17e}\n", m.ln().abs()));
    }
    let scale = r.norms_sq.iter().cloned().fold(0.0, f64::max);
    let checks = match cfg.symbol {
        IrSymbol::Null => vec![Check::below(
            "|slope| / scale",
            r.fit.slope.abs() / scale,
            1e-3,
        )],
        IrSymbol::Charged => vec![
            Check {
                name: "r_squared".into(),
                value: r.fit.r_squared,
                threshold: 0.99,
                pass: r.fit.r_squared > 0.99,
            },
            Check::below(
                "|slope / expected - 1|",
                (r.fit.slope / r.expected_slope - 1.0).abs(),
                0.15,
            ),
        ],
    };
    let summary = json!({"fit": r.fit, "expected_slope": r.expected_slope, "scale": scale});
    Ok(Outcome {
        csv,
        json: serde_json::to_value(&r).expect("serializable"),
        summary,
        checks,
    })
}

fn sector_phases(cfg: &ExperimentConfig, g: Grid) -> Result<Outcome> {
    let spec = cfg.profile;
    let p = ChargeProfile::new(spec.q, spec.a, spec.n)?;
    // real symbol strictly inside (a, n a)
    let (lo, hi) = (spec.a, spec.n as f64 * spec.a);
    let center = 0.5 * (lo + hi);
    let width = 0.45 * (hi - lo);
    let f = GridFunction::bump(g, center, width, c(1.0, 0.3))?;
    let exact = Complex64::from_polar(1.0, -spec.q * f.moment().re);
    let phase = sector_phase(&p, &f);
    let pid = format!("q={}:a={}:n={}", spec.q, spec.a, spec.n);
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for &l in &cfg.lambda_grid {
        let (ph, s) = rho_lambda_symbol(&p, &f, l)?;
        let dilated = rho_lambda_dilated_phase(&p, &s, l);
        worst = worst.max((dilated - ph).norm());
        rows.push((pid.clone(), "bump".to_string(), l, dilated));
    }
    let index = stabilization_index(&p, &f)?;
    let expected = ((center + width) / spec.a).ceil() as u32;
    let checks = vec![
        Check::below(
            "|phase - exp(-i q int Re f)|",
            (phase - exact).norm(),
            1e-10,
        ),
        Check::below("max |dilated - undilated phase|", worst, 1e-9),
        Check::flag("stabilization index matches support", index == expected),
    ];
    let summary = json!({"stabilization_index": index, "expected_index": expected, "phase_re": phase.re, "phase_im": phase.im});
    let csv = phase_table_csv(&rows);
    let json = json!({"rows": rows.iter().map(|(p, s, l, z)| json!([p, s, l, z.re, z.im])).collect::<Vec<_>>(), "summary": summary});
    Ok(Outcome {
        csv,
        json,
        summary,
        checks,
    })
}

fn bessel_table() -> Result<Outcome> {
    let mut xs = geometric_grid(30.0, 1e-3, 40)?;
    xs.reverse();
    let mut csv = String::from("x,k0,k1\n");
    let mut rows = Vec::new();
    for &x in &xs {
        let (k0, k1) = (bessel_k(0, x)?.value, bessel_k(1, x)?.value);
        csv.push_str(&format!("{x:.17e},{k0:.17e},{k1:.17e}\n"));
        rows.push(json!([x, k0, k1]));
    }
    // d/dx K_0 = -K_1 at 20 points
    let mut worst: f64 = 0.0;
    let e = 1e-5;
    for i in 0..20 {
        let x = 0.1 + 0.4 * i as f64;
        let d = (bessel_k(0, x + e)?.value - bessel_k(0, x - e)?.value) / (2.0 * e);
        worst = worst.max((d + bessel_k(1, x)?.value).abs());
    }
    let monotone = rows
        .windows(2)
        .all(|w| w[1][1].as_f64() < w[0][1].as_f64() && w[1][2].as_f64() < w[0][2].as_f64());
    let checks = vec![
        Check::below("max |K0' + K1|", worst, 1e-6),
        Check::flag("positive and decreasing", monotone),
    ];
    let summary = json!({"derivative_residual": worst});
    Ok(Outcome {
        csv,
        json: json!({"rows": rows, "summary": summary}),
        summary,
        checks,
    })
}

fn kernel_crosscheck(cfg: &ExperimentConfig, g: Grid) -> Result<Outcome> {
    let mut rng = stream(cfg.seed);
    let (lo, hi) = cfg.interval;
    let mut csv = String::from("pair,sign,position,momentum,relative_difference\n");
    let mut rows = Vec::new();
    let mut worst: f64 = 0.0;
    for i in 0..cfg.samples {
        let f = random_null_real(&mut rng, g, lo, hi)?;
        let h = random_null_real(&mut rng, g, lo, hi)?;
        for sign in [KernelSign::Minus, KernelSign::Plus] {
            let a = form_q(sign, &f, &h, cfg.mass, FormPath::Position)?;
            let b = form_q(sign, &f, &h, cfg.mass, FormPath::Momentum)?;
            let rel = (a - b).abs() / b.abs().max(1.0);
            worst = worst.max(rel);
            csv.push_str(&format!(
                "{i},{},{a:.17e},{b:.17e},{rel:.17e}\n",
                sign.name()
            ));
            rows.push(json!([i, sign.name(), a, b, rel]));
        }
    }
    let summary = json!({"max_relative_difference": worst});
    Ok(Outcome {
        csv,
        json: json!({"rows": rows, "summary": summary}),
        summary,
        checks: vec![Check::below("max relative difference", worst, 1e-4)],
    })
}

fn trace_diagnostics(cfg: &ExperimentConfig) -> Result<Outcome> {
    let d = fourier_trace_diagnostic(cfg.sign, cfg.mass, Cutoff::default(), cfg.k)?;
    let mut checks = vec![Check::below(
        "Cauchy increment K -> 2K",
        d.cauchy_increment,
        0.05,
    )];
    if cfg.sign == KernelSign::Minus {
        checks.push(Check::within("decay exponent", d.decay_exponent, 1.8, 2.2));
    }
    let summary = d.to_json();
    let json = json!({
        "coefficients": d.coefficients.iter().map(|q| [q.re, q.im]).collect::<Vec<_>>(),
        "summary": summary,
    });
    Ok(Outcome {
        csv: d.to_csv(),
        json,
        summary,
        checks,
    })
}

fn galerkin(cfg: &ExperimentConfig, g: Grid) -> Result<Outcome> {
    let n = cfg.basis_size;
    let gm = build_galerkin(g, cfg.interval, cfg.mass, n)?;
    let d = operator_diagnostics(&gm)?;
    let half = operator_diagnostics(&build_galerkin(g, cfg.interval, cfg.mass, n / 2)?)?;
    let stability = (d.trace_norm - half.trace_norm).abs() / d.trace_norm;
    let checks = vec![
        Check::below("max |gram_m - 1|", d.gram_m_residual, 1e-8),
        Check::below("max |omega + omega^T|", d.omega_antisymmetry, 1e-12),
        Check::below("matrix-element residual", d.matrix_element_residual, 1e-5),
        Check::below("trace-norm change N/2 -> N", stability, 0.05),
    ];
    let summary = json!({
        "trace_norm": d.trace_norm,
        "trace_norm_half_basis": half.trace_norm,
        "trace_norm_relative_change": stability,
        "r0_min_singular_value": d.r0_min_singular_value,
        "cross_check_residual": d.cross_check_residual,
        "cross_check_skipped": d.cross_check_skipped,
        "matrix_element_residual": d.matrix_element_residual,
    });
    Ok(Outcome {
        csv: d.eigenvalues_csv(),
        json: serde_json::to_value(&d).expect("serializable"),
        summary,
        checks,
    })
}

fn norm_equiv(cfg: &ExperimentConfig, g: Grid) -> Result<Outcome> {
    let r = norm_equivalence(g, cfg.interval, cfg.mass, cfg.samples, cfg.seed)?;
    let csv = format!(
        "quantity,min,max\nplus_ratio,{:.17e},{:.17e}\nminus_ratio,{:.17e},{:.17e}\n",
        r.plus_ratio.0, r.plus_ratio.1, r.minus_ratio.0, r.minus_ratio.1
    );
    let checks = vec![
        Check::at_most(
            "trivial inequality violations",
            r.trivial_violations as f64,
            0.0,
        ),
        Check::at_most(
            "omega inequality violations",
            r.omega_violations as f64,
            0.0,
        ),
    ];
    let json = serde_json::to_value(&r).expect("serializable");
    Ok(Outcome {
        csv,
        summary: json.clone(),
        json,
        checks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bessel_experiment_passes() {
        let out = run_experiment(Experiment::Bessel, &ExperimentConfig::default()).unwrap();
        assert!(out.pass());
        assert_eq!(out.csv.lines().count(), 41);
    }

    #[test]
    fn null_ir_slope_is_flat() {
        let out = run_experiment(Experiment::IrSlope, &ExperimentConfig::default()).unwrap();
        assert!(out.pass(), "{:?}", out.checks);
    }

    #[test]
    fn sector_checks_pass() {
        let out = run_experiment(Experiment::SectorPhases, &ExperimentConfig::default()).unwrap();
        assert!(out.pass(), "{:?}", out.checks);
    }
}
