//! One function per config command. Each returns an [`Artifact`]; nothing
//! here touches the filesystem.

use num_complex::Complex64;
use serde_json::{json, Value};
use twisted_eisenstein::config::{
    complex_list, Command, EvalMethod, KernelCheck, OutputFormat, ResolventConfig, RunConfig, SpecialFunction,
};
use twisted_eisenstein::eisenstein::{
    eisenstein_direct_with, incomplete_eisenstein, kloosterman_tables, scattering_from_tables, CosetTable,
    EisensteinParams, FourierExpansion, KloostermanTable,
};
use twisted_eisenstein::group::{
    double_cosets, enumerate_ball, trace_normal_presentation, tranche_bound_check, GroupData,
};
use twisted_eisenstein::hyperbolic::moebius_apply;
use twisted_eisenstein::kernels::{
    bump, helmholtz_fd, hs_refinement, kernel_spectrum_probe, resolvent_apply, GridSpec, KernelOperator,
    PointPairKernel, QuadratureGrid,
};
use twisted_eisenstein::linalg::{max_abs, to_pairs, CMat};
use twisted_eisenstein::representation::{
    check_unitary_at_cusps, cusp_eigendata, fit_growth_with_tranche_ratio, operator_norm, Representation,
};
use twisted_eisenstein::special::{k_bessel, resolvent_green, whittaker, SPECIAL_REL_TOL};
use twisted_eisenstein::{PointH, Result};

use crate::output::{cx, mat, num, Artifact, Table};

/// A direct sum counts as saturated when its outermost shell is below this
/// fraction of the value (or of 1 for tiny values).
pub const DIRECT_SHELL_TOL: f64 = 1e-4;
/// The Hilbert–Schmidt estimate counts as stable when one refinement moves
/// it by at most this fraction.
pub const HS_STABLE_TOL: f64 = 0.1;
/// Finite-difference step for the resolvent check.
pub const RESOLVENT_FD_STEP: f64 = 1e-3;

pub fn run(cfg: &RunConfig, group: &GroupData, rep: &Representation) -> Result<Artifact> {
    match &cfg.command {
        Command::GroupInfo { ball_length } => group_info(cfg, group, rep, *ball_length),
        Command::Eval { method, cusp, at_cusp, points, s, support } => {
            let points = points.iter().map(|p| PointH::new(p[0], p[1])).collect::<Result<Vec<_>>>()?;
            let s = complex_list(s);
            match method {
                EvalMethod::Direct => eval_direct(cfg, group, rep, *cusp, *at_cusp, &points, &s),
                EvalMethod::Fourier => eval_fourier(cfg, group, rep, *cusp, *at_cusp, &points, &s),
                EvalMethod::Incomplete => {
                    let support = support.expect("validated");
                    eval_incomplete(cfg, group, rep, *cusp, *at_cusp, &points, (support[0], support[1]))
                }
            }
        }
        Command::Scattering { s } => scattering(cfg, group, rep, &complex_list(s)),
        Command::Norms { tranche_length } => norms(cfg, group, rep, *tranche_length),
        Command::Kernel { kernel, checks, grid, resolvent } => {
            kernel_checks(cfg, group, rep, *kernel, checks, *grid, resolvent.as_ref())
        }
        Command::Special { function, s, y } => special(cfg, *function, &complex_list(s), y),
    }
}

fn csv(cfg: &RunConfig) -> bool {
    cfg.output.format == OutputFormat::Csv
}

/// Notes when `Re s` is not safely inside the region of absolute convergence
/// estimated from the ball.
fn abscissa_notes(cfg: &RunConfig, group: &GroupData, rep: &Representation, s: &[Complex64]) -> Vec<String> {
    let fit = match fit_growth_with_tranche_ratio(group, rep, cfg.truncation.word_length.min(6), Some(0.0)) {
        Ok(f) => f,
        Err(e) => return vec![format!("growth fit unavailable: {e}")],
    };
    let mut notes = vec![format!(
        "fitted abscissa σ₀ = {} from words of length ≤ {}; longer words may raise it",
        fit.sigma0, fit.max_word_length_used
    )];
    for &v in s {
        let p = EisensteinParams {
            cusp_from: 0,
            s: v,
            word_length: cfg.truncation.word_length,
            c_max: cfg.truncation.c_max,
            k_max: cfg.truncation.k_max,
        };
        notes.extend(p.abscissa_warning(&fit));
    }
    notes
}

fn group_info(cfg: &RunConfig, group: &GroupData, rep: &Representation, ball_length: usize) -> Result<Artifact> {
    let ball = enumerate_ball(group, ball_length);
    let ball_sizes: Vec<Value> = (0..=ball_length)
        .map(|l| json!({ "length": l, "elements": ball.iter().filter(|(w, _)| w.len() <= l).count() }))
        .collect();
    let mut cusps = Vec::new();
    for (a, c) in group.cusps().iter().enumerate() {
        let conj = c.sigma.inverse().mul(&c.stabilizer_generator).mul(&c.sigma);
        let t = twisted_eisenstein::GroupElement::translation(1.0);
        let defect = conj.entries().iter().zip(t.entries()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        cusps.push(json!({
            "index": a,
            "representative": c.representative.to_string(),
            "sigma": c.sigma.entries(),
            "stabilizer_word": c.stabilizer_word.letters(),
            "stabilizer": c.stabilizer_generator.entries(),
            "stabilizer_check": { "passed": defect <= 1e-9, "defect": defect },
        }));
    }
    // Normal presentations of the ball, traced with the configured seed.
    let mut round_trips = 0usize;
    let mut restarts = 0usize;
    for (_, g) in &ball {
        let tr = trace_normal_presentation(group, g, cfg.seed)?;
        restarts += tr.restarts;
        if group.word_evaluate(&tr.word)?.approx_eq(g, 1e-8) {
            round_trips += 1;
        }
    }
    let unitarity = check_unitary_at_cusps(group, rep)?;
    let mut cusp_spectra = Vec::new();
    if unitarity.unitary_at_cusps {
        for a in 0..group.cusps().len() {
            let eig = cusp_eigendata(group, rep, a)?;
            let ranks: Vec<usize> = eig.projections.iter().map(|p| p.trace().re.round() as usize).collect();
            cusp_spectra.push(json!({ "cusp": a, "nu": eig.nu, "ranks": ranks }));
        }
    }
    let result = json!({
        "group": group.name(),
        "generators": group.generators().iter().map(|g| g.entries()).collect::<Vec<_>>(),
        "generator_count": group.generator_count(),
        "inverse": group.inverse_map(),
        "relations": group.relations().iter().map(|w| w.letters().to_vec()).collect::<Vec<_>>(),
        "cusp_count": group.cusps().len(),
        "cusps": cusps,
        "parabolic_classes": group.parabolic_classes(),
        "ball_sizes": ball_sizes,
        "normal_presentations": {
            "checked": ball.len(),
            "round_trips": round_trips,
            "restarts": restarts,
            "tolerance": 1e-8,
        },
        "representation": {
            "dim": rep.dim(),
            "unitary_at_cusps": unitarity.unitary_at_cusps,
            "unitarity_defects": unitarity.defects,
            "cusp_spectra": cusp_spectra,
        },
    });
    Ok(Artifact { result, table: None, saturated: round_trips == ball.len(), notes: Vec::new() })
}

fn eval_direct(
    cfg: &RunConfig,
    group: &GroupData,
    rep: &Representation,
    cusp: usize,
    at_cusp: usize,
    points: &[PointH],
    s: &[Complex64],
) -> Result<Artifact> {
    let table = CosetTable::new(group, rep, cusp, cfg.truncation.word_length)?;
    let sigma_b = group.cusp(at_cusp)?.sigma;
    let mut records = Vec::new();
    let mut rows = Table::new(vec!["x", "y", "s_re", "s_im", "row", "col", "re", "im", "shell_error", "saturated"]);
    let mut saturated = true;
    for &sv in s {
        for z in points {
            let v = eisenstein_direct_with(&table, sv, &moebius_apply(&sigma_b, z));
            let ok = v.shell_error <= DIRECT_SHELL_TOL * operator_norm(&v.value).max(1.0);
            saturated &= ok;
            for (i, row) in to_pairs(&v.value).iter().enumerate() {
                for (j, e) in row.iter().enumerate() {
                    rows.push(vec![
                        num(z.x()),
                        num(z.y()),
                        num(sv.re),
                        num(sv.im),
                        i.to_string(),
                        j.to_string(),
                        num(e[0]),
                        num(e[1]),
                        num(v.shell_error),
                        ok.to_string(),
                    ]);
                }
            }
            records.push(json!({
                "z": [z.x(), z.y()],
                "s": cx(sv),
                "value": mat(&v.value),
                "shell_error": v.shell_error,
                "cosets": v.cosets,
                "saturated": ok,
                "non_singular_cusp": v.non_singular_cusp,
            }));
        }
    }
    let mut notes = abscissa_notes(cfg, group, rep, s);
    if table.non_singular() {
        notes.push(format!("non-singular cusp: P_{cusp} = 0, every value is zero"));
    }
    let result = json!({
        "method": "direct",
        "cusp": cusp,
        "at_cusp": at_cusp,
        "coordinates": "points are σ_b-coordinates at `at_cusp`",
        "non_singular_cusp": table.non_singular(),
        "shell_tolerance": DIRECT_SHELL_TOL,
        "values": records,
    });
    Ok(Artifact { result, table: csv(cfg).then_some(rows), saturated, notes })
}

fn eval_fourier(
    cfg: &RunConfig,
    group: &GroupData,
    rep: &Representation,
    cusp: usize,
    at_cusp: usize,
    points: &[PointH],
    s: &[Complex64],
) -> Result<Artifact> {
    let t = &cfg.truncation;
    let dc = double_cosets(group, cusp, at_cusp, t.word_length, t.c_max)?;
    let table = KloostermanTable::new(group, rep, &dc)?;
    let mut records = Vec::new();
    let mut expansions = Vec::new();
    let mut rows = Table::new(vec![
        "a", "b", "s_re", "s_im", "term", "j", "frequency", "c_max", "k_max", "row", "col", "re", "im", "tail_bound",
    ]);
    let mut non_singular = false;
    for &sv in s {
        let exp = FourierExpansion::build(group, rep, &table, sv, t.k_max)?;
        non_singular = max_abs(&exp.p_a) == 0.0;
        let mut push = |term: &str, j: String, f: f64, m: &CMat, tail: f64| {
            for (i, row) in to_pairs(m).iter().enumerate() {
                for (k, e) in row.iter().enumerate() {
                    rows.push(vec![
                        cusp.to_string(),
                        at_cusp.to_string(),
                        num(sv.re),
                        num(sv.im),
                        term.to_string(),
                        j.clone(),
                        num(f),
                        num(exp.c_max),
                        exp.k_max.to_string(),
                        i.to_string(),
                        k.to_string(),
                        num(e[0]),
                        num(e[1]),
                        num(tail),
                    ]);
                }
            }
        };
        push("constant", "0".into(), 0.0, &exp.phi_ab, exp.phi_tail_bound);
        for m in &exp.modes {
            push("mode", m.j.to_string(), m.frequency, &m.coefficient, m.tail_bound);
        }
        for z in points {
            let v = exp.evaluate(z)?;
            records.push(json!({
                "z": [z.x(), z.y()],
                "s": cx(sv),
                "value": mat(&v.value),
                "mode_truncation": v.mode_truncation,
                "phi_tail_bound": exp.phi_tail_bound,
                "saturated": v.saturated,
                "non_singular_cusp": non_singular,
            }));
        }
        expansions.push(json!({
            "s": cx(sv),
            "delta": exp.delta,
            "nu": exp.nu,
            "phi_ab": mat(&exp.phi_ab),
            "phi_tail_bound": exp.phi_tail_bound,
            "modes": exp.modes.len(),
        }));
    }
    let mut notes = abscissa_notes(cfg, group, rep, s);
    if !dc.saturated {
        notes.push(format!(
            "double cosets with c ≤ {} are not saturated at word length {}; raise word_length or lower c_max",
            t.c_max, t.word_length
        ));
    }
    if non_singular {
        notes.push(format!("non-singular cusp: P_{cusp} = 0, every value is zero"));
    }
    let result = json!({
        "method": "fourier",
        "cusp": cusp,
        "at_cusp": at_cusp,
        "coordinates": "points are σ_b-coordinates at `at_cusp`",
        "non_singular_cusp": non_singular,
        "double_cosets": dc.entries.len(),
        "keys_added_by_extension": dc.keys_added_by_extension,
        "expansions": expansions,
        "values": records,
    });
    Ok(Artifact { result, table: csv(cfg).then_some(rows), saturated: dc.saturated, notes })
}

fn eval_incomplete(
    cfg: &RunConfig,
    group: &GroupData,
    rep: &Representation,
    cusp: usize,
    at_cusp: usize,
    points: &[PointH],
    support: (f64, f64),
) -> Result<Artifact> {
    let (lo, hi) = support;
    let mid = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let psi = move |y: f64| bump((y - mid) / half);
    let sigma_b = group.cusp(at_cusp)?.sigma;
    let mut records = Vec::new();
    let mut rows = Table::new(vec!["x", "y", "row", "col", "re", "im", "contributing", "saturated"]);
    let mut saturated = true;
    for z in points {
        let v = incomplete_eisenstein(group, rep, cusp, psi, support, &moebius_apply(&sigma_b, z), cfg.truncation.word_length)?;
        saturated &= v.saturated;
        for (i, row) in to_pairs(&v.value).iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                rows.push(vec![
                    num(z.x()),
                    num(z.y()),
                    i.to_string(),
                    j.to_string(),
                    num(e[0]),
                    num(e[1]),
                    v.contributing.to_string(),
                    v.saturated.to_string(),
                ]);
            }
        }
        records.push(json!({
            "z": [z.x(), z.y()],
            "value": mat(&v.value),
            "contributing": v.contributing,
            "saturated": v.saturated,
        }));
    }
    let result = json!({
        "method": "incomplete",
        "cusp": cusp,
        "at_cusp": at_cusp,
        "profile": "ψ(y) = exp(1 − 1/(1 − t²)), t = (y − (A+B)/2)/((B−A)/2)",
        "support": [lo, hi],
        "values": records,
    });
    Ok(Artifact { result, table: csv(cfg).then_some(rows), saturated, notes: Vec::new() })
}

fn scattering(cfg: &RunConfig, group: &GroupData, rep: &Representation, s: &[Complex64]) -> Result<Artifact> {
    let t = &cfg.truncation;
    let tables = kloosterman_tables(group, rep, t.word_length, t.c_max)?;
    let mut records = Vec::new();
    let mut rows = Table::new(vec!["s_re", "s_im", "row", "col", "re", "im", "c_max", "word_length", "saturated"]);
    let mut saturated = true;
    for &sv in s {
        let m = scattering_from_tables(group, rep, &tables, sv)?;
        saturated &= m.saturated;
        for (i, row) in to_pairs(&m.matrix).iter().enumerate() {
            for (j, e) in row.iter().enumerate() {
                rows.push(vec![
                    num(sv.re),
                    num(sv.im),
                    i.to_string(),
                    j.to_string(),
                    num(e[0]),
                    num(e[1]),
                    num(m.c_max),
                    m.word_length.to_string(),
                    m.saturated.to_string(),
                ]);
            }
        }
        records.push(json!({
            "s": cx(sv),
            "dim": m.dim,
            "cusps": m.cusps,
            "matrix": mat(&m.matrix),
            "block_tail_bounds": m.tail_bounds,
            "saturated": m.saturated,
        }));
    }
    let mut notes = abscissa_notes(cfg, group, rep, s);
    if !saturated {
        notes.push(format!("double cosets are not saturated at word length {} for c ≤ {}", t.word_length, t.c_max));
    }
    let result = json!({
        "layout": "block (a, b) occupies rows a·dim.. and columns b·dim..",
        "values": records,
    });
    Ok(Artifact { result, table: csv(cfg).then_some(rows), saturated, notes })
}

fn norms(cfg: &RunConfig, group: &GroupData, rep: &Representation, tranche_length: usize) -> Result<Artifact> {
    let tranche = tranche_bound_check(group, tranche_length)?;
    let fit = fit_growth_with_tranche_ratio(group, rep, cfg.truncation.word_length, Some(tranche.sup_ratio))?;
    // The fit clamps σ₀ from below; a clamped value carries no growth information.
    let degenerate = fit.sigma0 > 1.0 + fit.slope;
    let mut notes = vec![format!(
        "σ₀ is fitted on words of length ≤ {}; it may underestimate the true abscissa",
        fit.max_word_length_used
    )];
    if degenerate {
        notes.push("degenerate case: ‖χ‖ does not grow on the ball, σ₀ clamped to 1 + 1e-6".into());
    }
    let mut rows = Table::new(vec!["word", "tranches", "log_mu", "ratio"]);
    for r in &tranche.rows {
        let word: Vec<String> = r.word.letters().iter().map(|l| l.to_string()).collect();
        rows.push(vec![word.join(" "), r.tranches.to_string(), num(r.log_mu), num(r.ratio)]);
    }
    let checks_pass =
        tranche.round_trip_failures == 0 && tranche.single_step_violations == 0 && tranche.double_step_violations == 0;
    let result = json!({
        "growth_fit": fit,
        "degenerate": degenerate,
        "tranches": tranche,
    });
    Ok(Artifact { result, table: csv(cfg).then_some(rows), saturated: checks_pass, notes })
}

fn grid_meta(grid: &QuadratureGrid, level: usize) -> Value {
    json!({
        "nodes": grid.len(),
        "central_nodes": grid.central_nodes,
        "y_cut": grid.spec.y_cut,
        "y_max": grid.spec.y_max,
        "refinement_level": level,
        "spec": grid.spec,
        "total_weight": grid.total_weight(),
    })
}

fn kernel_checks(
    cfg: &RunConfig,
    group: &GroupData,
    rep: &Representation,
    kernel: PointPairKernel,
    checks: &[KernelCheck],
    spec: GridSpec,
    resolvent: Option<&ResolventConfig>,
) -> Result<Artifact> {
    let op = KernelOperator::new(group, rep, kernel, cfg.truncation.word_length)?;
    let mut out = serde_json::Map::new();
    out.insert("kernel".into(), json!(kernel));
    let mut saturated = true;
    let mut notes = Vec::new();
    for check in checks {
        match check {
            KernelCheck::Hs => {
                let report = hs_refinement(group, &op, spec)?;
                let stable = report.relative_change <= HS_STABLE_TOL;
                saturated &= stable;
                if !stable {
                    notes.push(format!("HS estimate moved by {:.3} under refinement", report.relative_change));
                }
                out.insert(
                    "hs".into(),
                    json!({
                        "levels": report.levels,
                        "relative_change": report.relative_change,
                        "stable": stable,
                        "stability_tolerance": HS_STABLE_TOL,
                        "hs_norm": report.levels.last().map(|l| l.value.sqrt()),
                    }),
                );
            }
            KernelCheck::Spectrum => {
                let grid = QuadratureGrid::new(group, spec)?;
                let ev = kernel_spectrum_probe(&op, &grid)?;
                let rho = ev.first().map_or(0.0, |z| z.norm());
                let imag = ev.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
                out.insert(
                    "spectrum".into(),
                    json!({
                        "grid": grid_meta(&grid, 1),
                        "order": "descending modulus",
                        "spectral_radius": rho,
                        "max_abs_imag": imag,
                        "eigenvalues": ev.iter().map(|z| cx(*z)).collect::<Vec<_>>(),
                    }),
                );
            }
            KernelCheck::Resolvent => {
                let r = resolvent.expect("validated");
                let s = r.s_complex();
                let support = r.support_box();
                let f = |w: &PointH| vec![Complex64::new(support.bump(w), 0.0)];
                let mut records = Vec::new();
                for p in &r.points {
                    let z = PointH::new(p[0], p[1])?;
                    let value = resolvent_apply(s, f, &support, &z)?;
                    // The neighbours only differ from `z` by the step, so
                    // they fail exactly when `z` does; NaN marks that case.
                    let at = |q: &PointH| {
                        resolvent_apply(s, f, &support, q).unwrap_or_else(|_| vec![Complex64::new(f64::NAN, f64::NAN)])
                    };
                    let lhs = helmholtz_fd(at, &z, RESOLVENT_FD_STEP, s)?;
                    let fz = f(&z)[0];
                    let residual = (lhs[0] - fz).norm();
                    let relative = residual / fz.norm().max(f64::MIN_POSITIVE);
                    records.push(json!({
                        "z": p,
                        "value": cx(value[0]),
                        "f": support.bump(&z),
                        "residual": residual,
                        "relative_residual": relative,
                    }));
                }
                out.insert(
                    "resolvent".into(),
                    json!({
                        "s": cx(s),
                        "support": r.support,
                        "test_function": "product bump on the support box",
                        "fd_step": RESOLVENT_FD_STEP,
                        "identity": "(s(1−s) − Δ) R_s f = f",
                        "points": records,
                    }),
                );
            }
        }
    }
    Ok(Artifact { result: Value::Object(out), table: None, saturated, notes })
}

fn special(cfg: &RunConfig, function: SpecialFunction, s: &[Complex64], y: &[f64]) -> Result<Artifact> {
    let mut rows = Table::new(vec!["s_re", "s_im", "y", "val_re", "val_im"]);
    let mut records = Vec::new();
    for &sv in s {
        for &yv in y {
            let v = match function {
                SpecialFunction::KBessel => k_bessel(sv - 0.5, std::f64::consts::TAU * yv)?,
                SpecialFunction::Whittaker => whittaker(sv, &PointH::new(0.0, yv)?)?,
                SpecialFunction::Green => resolvent_green(sv, yv)?,
            };
            rows.push(vec![num(sv.re), num(sv.im), num(yv), num(v.re), num(v.im)]);
            records.push(json!({ "s": cx(sv), "y": yv, "value": cx(v) }));
        }
    }
    let definition = match function {
        SpecialFunction::KBessel => "K_{s−1/2}(2πy)",
        SpecialFunction::Whittaker => "W_s(iy) = 2 y^{1/2} K_{s−1/2}(2πy)",
        SpecialFunction::Green => "G_s(u), u in the y column",
    };
    let result = json!({
        "function": definition,
        "relative_tolerance": SPECIAL_REL_TOL,
        "values": records,
    });
    Ok(Artifact { result, table: csv(cfg).then_some(rows), saturated: true, notes: Vec::new() })
}
