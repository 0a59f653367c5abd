//! Command implementations. Each returns a `result` and a `diagnostics` object.

use crate::config::{Command, Domain, RunConfig};
use crate::error::CliError;
use crate::report::{exact, float, floats, quantity, refinement_ratios};
use crate::schema::{Intersection, SpecText};
use num_complex::Complex64 as C64;
use parh_core::field::{ConnectionField, MatField, MetricField};
use parh_core::filtered::{
    bg_report, descent, parabolic_c1_dot, parabolic_ch2_dot, pullback, slope, stability_check, Candidate, ComponentSpec,
    FilteredSpec,
};
use parh_core::grid::GridDomain;
use parh_core::he_solver::{chern_weil_degree, heat_flow, FlowParams, FlowResult};
use parh_core::lambda_ops::{
    flatness_residual, hitchin_residual, kobayashi_lubke_pointwise, lambda_flat_from_higgs, pluriharmonic_test,
    project_primitive, Form11Field, SurfaceGrid,
};
use parh_core::linalg::CMat;
use parh_core::models::{build_model_bundle, estimate_growth_weights, model_family_metric, rank2_model_metric};
use parh_core::rational::{cq_to_c64, fmt_cq, fmt_q, qi, to_f64, Q};
use parh_core::weights::{degree_preserving_psi, perturb_weights};
use serde_json::{json, Map, Value};
use std::path::{Path, PathBuf};

/// Parsed inputs shared by all commands.
pub struct Inputs {
    pub spec: Option<FilteredSpec>,
    pub intersection: Option<Intersection>,
}

/// Output of a command. `failure` is set when the result is complete but the
/// run did not meet its tolerance.
pub struct Outcome {
    pub result: Value,
    pub diagnostics: Value,
    pub failure: Option<CliError>,
}

impl Outcome {
    fn ok(result: Value, diagnostics: Value) -> Self {
        Outcome { result, diagnostics, failure: None }
    }
}

/// Largest block count for which all whole-block sub-objects are enumerated.
const MAX_ENUMERATED_BLOCKS: usize = 16;

pub fn dispatch(cfg: &RunConfig, inp: &Inputs) -> Result<Outcome, CliError> {
    match cfg.command {
        Command::Slope => run_slope(inp),
        Command::Ch2 => run_ch2(inp),
        Command::Stability => run_stability(inp),
        Command::BgCheck => run_bg(inp),
        Command::Perturb => run_perturb(cfg, inp),
        Command::Pullback | Command::Descent => run_covering(cfg, inp),
        Command::ModelMetric => run_model_metric(cfg, inp),
        Command::VerifyHitchin => run_hitchin(cfg),
        Command::VerifyPluriharmonic => run_pluriharmonic(cfg),
        Command::VerifyKl => run_kl(cfg),
        Command::SolveHe => run_solve_he(cfg, inp),
        Command::ChernWeil => run_chern_weil(cfg),
    }
}

fn need_spec(inp: &Inputs) -> Result<&FilteredSpec, CliError> {
    inp.spec.as_ref().ok_or_else(|| CliError::Config("--spec is required for this command".into()))
}

fn need_ix(inp: &Inputs) -> Result<(&FilteredSpec, &Intersection), CliError> {
    let s = need_spec(inp)?;
    let ix = inp.intersection.as_ref().ok_or_else(|| CliError::Config("--intersection is required for this command".into()))?;
    Ok((s, ix))
}

fn resolutions(cfg: &RunConfig, default: &[usize]) -> Vec<usize> {
    if cfg.resolutions.is_empty() {
        default.to_vec()
    } else {
        cfg.resolutions.clone()
    }
}

fn eps_list(cfg: &RunConfig, default: &[Q]) -> Vec<Q> {
    if cfg.eps.is_empty() {
        default.to_vec()
    } else {
        cfg.eps.clone()
    }
}

fn domain(cfg: &RunConfig, default: Domain) -> Domain {
    cfg.grid.clone().unwrap_or(default)
}

fn dump_dir(cfg: &RunConfig) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from("."))
}

fn write_file(path: &Path, write: impl FnOnce(&mut std::io::BufWriter<std::fs::File>) -> std::io::Result<()>) -> Result<String, CliError> {
    let io = |e: std::io::Error| CliError::Io { path: path.display().to_string(), detail: e.to_string() };
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(io)?;
    }
    let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    write(&mut f).map_err(io)?;
    Ok(path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default())
}

fn dump_field(cfg: &RunConfig, name: &str, f: &MatField, g: &GridDomain) -> Result<Option<String>, CliError> {
    if !cfg.dump_csv {
        return Ok(None);
    }
    write_file(&dump_dir(cfg).join(name), |w| f.write_csv(g, w)).map(Some)
}

fn run_slope(inp: &Inputs) -> Result<Outcome, CliError> {
    let (s, ix) = need_ix(inp)?;
    let deg = parabolic_c1_dot(s, &ix.data)?;
    let mu = slope(s, &ix.data)?;
    Ok(Outcome::ok(
        json!({
            "rank": s.rank,
            "parabolic_degree": exact(&deg, "integral of c1(P_*V) c1(L)^(n-1)"),
            "slope": exact(&mu, "parabolic degree divided by rank"),
        }),
        json!({ "components": s.components.len(), "dim_x": ix.data.dim_x }),
    ))
}

fn run_ch2(inp: &Inputs) -> Result<Outcome, CliError> {
    let (s, ix) = need_ix(inp)?;
    let ch2 = parabolic_ch2_dot(s, &ix.data)?;
    Ok(Outcome::ok(
        json!({ "ch2": exact(&ch2, "integral of ch2(P_*V) c1(L)^(n-2)") }),
        json!({ "components": s.components.len(), "crossings": ix.data.crossings.len(), "dim_x": ix.data.dim_x }),
    ))
}

/// Every non-empty proper set of whole blocks, in increasing bitmask order.
fn whole_block_candidates(s: &FilteredSpec) -> Result<Vec<Candidate>, CliError> {
    let n = s.blocks.len();
    if n > MAX_ENUMERATED_BLOCKS {
        return Err(CliError::Config(format!("{n} blocks exceed the enumeration limit of {MAX_ENUMERATED_BLOCKS}; list candidates explicitly")));
    }
    Ok((1u32..(1 << n) - 1)
        .map(|mask| {
            let idx: Vec<usize> = (0..n).filter(|b| mask >> b & 1 == 1).collect();
            Candidate::blocks(s, &idx)
        })
        .collect())
}

fn run_stability(inp: &Inputs) -> Result<Outcome, CliError> {
    let (s, ix) = need_ix(inp)?;
    let (cands, source) = if !ix.candidates.is_empty() {
        (ix.candidates.clone(), "intersection file")
    } else if s.rank > 1 && s.blocks.len() > 1 && s.components.len() == 1 {
        (whole_block_candidates(s)?, "whole-block enumeration")
    } else {
        (Vec::new(), "none")
    };
    let r = stability_check(s, &ix.data, &cands)?;
    Ok(Outcome::ok(
        json!({
            "verdict": r.verdict.as_str(),
            "witness": r.witness,
            "slope": exact(&r.slope, "parabolic degree divided by rank"),
            "candidate_slopes": r.candidate_slopes.iter().map(|q| exact(q, "parabolic degree divided by rank")).collect::<Vec<_>>(),
            "exhaustive": r.exhaustive,
        }),
        json!({ "candidate_source": source, "candidates": cands.len() }),
    ))
}

fn run_bg(inp: &Inputs) -> Result<Outcome, CliError> {
    let (s, ix) = need_ix(inp)?;
    let r = bg_report(s, &ix.data)?;
    Ok(Outcome::ok(
        json!({
            "lhs": exact(&r.lhs, "integral of ch2(P_*V) c1(L)^(n-2)"),
            "rhs": exact(&r.rhs, "integral of c1(P_*V)^2 c1(L)^(n-2) / (2 rank)"),
            "inequality_holds": r.inequality_holds,
            "equality": r.lhs == r.rhs,
            "c1_sq": exact(&r.c1_sq, "integral of c1(P_*V)^2 c1(L)^(n-2)"),
            "c1_dot": exact(&r.c1_dot, "integral of c1(P_*V) c1(L)^(n-1)"),
            "mu_zero": r.mu_zero,
            "ch2_zero": r.ch2_zero,
            "vanishing_precondition": r.vanishing_precondition,
        }),
        json!({ "rank": s.rank, "dim_x": ix.data.dim_x }),
    ))
}

fn run_perturb(cfg: &RunConfig, inp: &Inputs) -> Result<Outcome, CliError> {
    let s = need_spec(inp)?;
    if cfg.eps.is_empty() {
        return Err(CliError::Config("perturb needs --eps".into()));
    }
    let before = inp.intersection.as_ref().map(|ix| parabolic_c1_dot(s, &ix.data)).transpose()?;
    let mut rows = Vec::new();
    for eps in &cfg.eps {
        let mut comps = Vec::new();
        let mut perturbed = Vec::new();
        for c in &s.components {
            let psi = degree_preserving_psi(&c.weights, eps)?;
            let (w, _) = perturb_weights(&c.weights, &c.residues, eps, &psi)?;
            comps.push(json!({
                "label": c.label(),
                "psi": psi.iter().map(|(b, p)| json!({ "weight": fmt_q(b), "psi": fmt_q(p) })).collect::<Vec<_>>(),
                "weights": w.entries().iter().map(|e| json!({ "weight": fmt_q(&e.weight), "multiplicity": e.multiplicity })).collect::<Vec<_>>(),
                "weighted_sum_before": fmt_q(&c.weights.weighted_sum()),
                "weighted_sum_after": fmt_q(&w.weighted_sum()),
            }));
            perturbed.push(ComponentSpec::semisimple(w));
        }
        let mut row = Map::new();
        row.insert("eps".into(), json!(fmt_q(eps)));
        row.insert("components".into(), Value::Array(comps));
        if let (Some(ix), Some(c0)) = (&inp.intersection, &before) {
            let ps = FilteredSpec::new(s.label.clone(), s.rank, s.lambda.clone(), perturbed, Vec::new())?;
            let c1 = parabolic_c1_dot(&ps, &ix.data)?;
            row.insert("parabolic_degree".into(), exact(&c1, "integral of c1(P_*V) c1(L)^(n-1)"));
            row.insert("degree_drift".into(), exact(&(c1 - c0), "perturbed minus original parabolic degree"));
        }
        rows.push(Value::Object(row));
    }
    Ok(Outcome::ok(json!({ "perturbations": rows }), json!({ "period": "rank!", "range_condition": "10 e^2 eps < gap" })))
}

fn run_covering(cfg: &RunConfig, inp: &Inputs) -> Result<Outcome, CliError> {
    let s = need_spec(inp)?;
    let e = cfg.cover.ok_or_else(|| CliError::Config("--cover is required for pullback and descent".into()))?;
    let out = match cfg.command {
        Command::Pullback => pullback(s, &vec![e; s.components.len()])?,
        _ => descent(s, e)?,
    };
    let text = SpecText::from_spec(&out);
    let mut diag = Map::new();
    diag.insert("cover".into(), json!(e));
    if let Some(dir) = &cfg.out {
        let name = format!("{}.toml", cfg.command.name());
        let toml = text.to_toml();
        diag.insert("spec_file".into(), json!(write_file(&dir.join(&name), |w| std::io::Write::write_all(w, toml.as_bytes()))?));
    }
    Ok(Outcome::ok(json!({ "spec": serde_json::to_value(&text).expect("spec text serializes") }), Value::Object(diag)))
}

fn run_model_metric(cfg: &RunConfig, inp: &Inputs) -> Result<Outcome, CliError> {
    let s = need_spec(inp)?;
    if s.blocks.is_empty() {
        return Err(CliError::Config("model-metric needs a spec with blocks".into()));
    }
    let dom = domain(cfg, Domain::Annulus { r_min: 1e-24, r_max: 1e-12 });
    let eta = qi(1);
    let mut rows = Vec::new();
    let mut dumps = Vec::new();
    for n in resolutions(cfg, &[32]) {
        let g = dom.build(n)?;
        for (i, eps) in eps_list(cfg, &[qi(0)]).iter().enumerate() {
            let fam = model_family_metric(&s.blocks, eps, &eta, &g)?;
            let est = estimate_growth_weights(&fam.metric, &g)?;
            let dev = est.iter().zip(&fam.frame_weights).map(|(a, b)| (a - to_f64(b)).abs()).fold(0.0, f64::max);
            rows.push(json!({
                "resolution": n,
                "eps": fmt_q(eps),
                "frame_weights": fam.frame_weights.iter().map(fmt_q).collect::<Vec<_>>(),
                "frame_blocks": fam.frame_blocks,
                "estimated_weights": quantity_list(&est, "growth exponent b with |v| ~ |z|^(-b), least squares in log|z|"),
                "max_deviation": quantity(dev, "max |estimated - exact| growth exponent"),
            }));
            if let Some(d) = dump_field(cfg, &format!("model-metric-res{n}-eps{i}.csv"), fam.metric.field(), &g)? {
                dumps.push(d);
            }
        }
    }
    Ok(Outcome::ok(json!({ "metrics": rows }), json!({ "eta": fmt_q(&eta), "dumps": dumps })))
}

fn quantity_list(xs: &[f64], normalization: &str) -> Value {
    json!({ "values": floats(xs), "normalization": normalization })
}

fn run_hitchin(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let dom = domain(cfg, Domain::Annulus { r_min: 0.2, r_max: 0.8 });
    let res = resolutions(cfg, &[64, 128]);
    let mut rows = Vec::new();
    let mut dumps = Vec::new();
    for (i, eps) in eps_list(cfg, &[qi(0)]).iter().enumerate() {
        let mut sups = Vec::new();
        let mut levels = Vec::new();
        for &n in &res {
            let g = dom.build(n)?;
            let m = rank2_model_metric(to_f64(eps), &g)?;
            let r = hitchin_residual(&m.higgs, &m.metric, &g)?;
            sups.push(r.sup);
            levels.push(json!({
                "resolution": n,
                "spacing": float(g.spacing()),
                "sup": quantity(r.sup, "max over interior nodes of |R(h)+[theta,theta^dag]|_h, dw^dwbar coefficient"),
                "l2": quantity(r.l2, "chart-area L2 norm of the same coefficient"),
            }));
            if let Some(d) = dump_field(cfg, &format!("verify-hitchin-res{n}-eps{i}.csv"), &r.field, &g)? {
                dumps.push(d);
            }
        }
        rows.push(json!({ "eps": fmt_q(eps), "levels": levels, "refinement_ratios": refinement_ratios(&sups) }));
    }
    Ok(Outcome::ok(json!({ "model": "rank-2 harmonic model", "studies": rows }), json!({ "dumps": dumps })))
}

fn run_pluriharmonic(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let dom = domain(cfg, Domain::Annulus { r_min: 0.1, r_max: 0.5 });
    let lambda = cfg.lambda.clone().unwrap_or_else(|| parh_core::rational::cq_real(qi(1)));
    let lam = cq_to_c64(&lambda);
    let shortcut = lam.norm() != 0.0;
    let tol = cfg.tol.unwrap_or(1e-6);
    let eps = eps_list(cfg, &[Q::new(1.into(), 10.into())]);
    let mut rows = Vec::new();
    for e in &eps {
        for n in resolutions(cfg, &[32, 64, 128]) {
            let g = dom.build(n)?;
            let m = rank2_model_metric(to_f64(e), &g)?;
            let (conn, flat, warning) = lambda_flat_from_higgs(&m.higgs, &m.metric, &g, lam, 1e-2)?;
            let rep = pluriharmonic_test(&conn, &m.metric, &g, tol, shortcut)?;
            let d2 = g.dx().max(g.dy()).powi(2);
            rows.push(json!({
                "eps": fmt_q(e),
                "resolution": n,
                "g11_sup": quantity(rep.g11_sup, "sup of |G^(1,1)|_h over interior nodes"),
                "g20_sup": quantity(rep.g20_sup, "sup of |G^(2,0)|_h over interior nodes"),
                "g02_sup": quantity(rep.g02_sup, "sup of |G^(0,2)|_h over interior nodes"),
                "flatness_sup": quantity(flat.sup, "sup of the Frobenius norm of D^lambda o D^lambda"),
                "is_pluriharmonic": rep.is_pluriharmonic,
                "delta_sq": float(d2),
                "g11_below_10_delta_sq": rep.g11_sup < 10.0 * d2,
                "g20_plus_g02_below_50_delta_sq": rep.g20_sup + rep.g02_sup < 50.0 * d2,
                "harmonicity_warning": warning,
            }));
        }
    }
    Ok(Outcome::ok(json!({ "lambda": fmt_cq(&lambda), "levels": rows }), json!({ "tol": float(tol), "used_shortcut": shortcut })))
}

/// Deterministic rank-2 (1,1)-form sample at a point of the 4-torus.
fn kl_sample(c: [f64; 4]) -> [CMat; 4] {
    let t = |a: f64, b: f64| C64::new(a, b);
    let h = CMat::from_rows(&[
        t(c[0].sin() + 0.3, 0.0),
        t(c[1].cos(), (c[2] + c[3]).sin()),
        t(c[1].cos(), -(c[2] + c[3]).sin()),
        t(-(2.0 * c[3]).cos(), 0.0),
    ]);
    let g11 = h.scale(t(0.0, 1.0));
    let g12 = CMat::from_rows(&[t(c[2].cos(), c[0].sin()), t(0.5, c[3].cos()), t((c[0] - c[1]).sin(), 0.2), t(c[1].sin(), -c[2].cos())]);
    let g21 = g12.adjoint().scale_re(-1.0);
    let g22 = g11.scale_re(-1.0);
    project_primitive(&[g11, g12, g21, g22])
}

fn run_kl(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let tol = cfg.tol.unwrap_or(1e-9);
    let mut rows = Vec::new();
    for n in resolutions(cfg, &[16]) {
        if n > 64 {
            return Err(CliError::Config(format!("verify-kl samples (resolution/4)^4 points; resolution {n} exceeds 64")));
        }
        let grid = SurfaceGrid::flat(n / 4, [std::f64::consts::TAU; 4])?;
        let field = Form11Field::from_fn(2, grid.len(), |k| kl_sample(grid.coords(k)))?;
        let r = kobayashi_lubke_pointwise(&field, &grid, tol)?;
        let defined = r.ratio.iter().filter(|x| x.is_some()).count();
        rows.push(json!({
            "resolution": n,
            "samples": grid.len(),
            "defined_ratios": defined,
            "constant": r.constant.map(|c| quantity(c, "mean of pointwise lhs/rhs")),
            "relative_std": r.rel_std.map(|c| quantity(c, "standard deviation of lhs/rhs divided by its mean")),
        }));
    }
    Ok(Outcome::ok(json!({ "levels": rows }), json!({ "tol": float(tol), "rank": 2 })))
}

/// Deterministic smooth start: diagonal metric with node-dependent entries.
fn bumpy_start(r: usize, g: &GridDomain) -> Result<MetricField, CliError> {
    Ok(MetricField::from_fn(r, g.len(), |k| {
        let (i, j) = g.ij(k);
        let (x, y) = (g.x(i), g.y(j));
        let bump = if g.is_annulus() { (std::f64::consts::PI * i as f64 / (g.nx() - 1) as f64).sin() } else { 1.0 };
        let d: Vec<f64> = (0..r)
            .map(|a| {
                let s = a as f64;
                (bump * (0.5 / (s + 1.0)) * ((x + s).sin() * (2.0 * y).cos() + 0.4 * (x + y + s).cos())).exp()
            })
            .collect();
        CMat::from_diag(&d)
    })?)
}

fn flow_json(n: usize, r: &FlowResult) -> Value {
    json!({
        "resolution": n,
        "converged": r.converged,
        "steps": r.state.step_count,
        "time": float(r.state.t),
        "residual": quantity(r.state.residual, "sup over interior nodes of |sqrt(-1) Lambda G(h) - A id|_h"),
        "donaldson": quantity(r.state.donaldson_value, "M(h0, h) accumulated along the trajectory"),
        "det_corrected": r.det_corrected,
        "det_drift": quantity(r.det_drift, "max |det h_t / det h_0 - 1| after determinant correction"),
        "descent_constant": r.descent_constant.map(float),
    })
}

fn run_solve_he(cfg: &RunConfig, inp: &Inputs) -> Result<Outcome, CliError> {
    let s = need_spec(inp)?;
    let default_dom = if s.blocks.is_empty() {
        Domain::Torus { lx: std::f64::consts::TAU, ly: std::f64::consts::TAU }
    } else {
        Domain::Annulus { r_min: 0.1, r_max: 0.5 }
    };
    let dom = domain(cfg, default_dom);
    let p = FlowParams {
        tol: cfg.tol.unwrap_or(1e-6),
        max_steps: cfg.max_steps.unwrap_or(FlowParams::default().max_steps),
        ..FlowParams::default()
    };
    let mut rows = Vec::new();
    let mut dumps = Vec::new();
    let mut failure = None;
    for n in resolutions(cfg, &[32]) {
        let g = dom.build(n)?;
        let lam = cq_to_c64(&s.lambda);
        let conn = if s.blocks.is_empty() {
            ConnectionField::trivial(lam, s.rank, g.len())
        } else {
            build_model_bundle(&s.blocks, s.lambda.clone(), 1, &g)?.1
        };
        let r = heat_flow(&conn, &bumpy_start(s.rank, &g)?, &g, &p)?;
        if !r.converged && failure.is_none() {
            failure = Some(CliError::NotConverged { steps: r.state.step_count, residual: r.state.residual, tol: p.tol });
        }
        if cfg.dump_csv {
            dumps.push(write_file(&dump_dir(cfg).join(format!("solve-he-res{n}-trajectory.csv")), |w| r.write_csv(w))?);
        }
        if let Some(d) = dump_field(cfg, &format!("solve-he-res{n}-metric.csv"), r.state.h.field(), &g)? {
            dumps.push(d);
        }
        rows.push(flow_json(n, &r));
    }
    Ok(Outcome {
        result: json!({ "runs": rows }),
        diagnostics: json!({ "tol": float(p.tol), "max_steps": p.max_steps, "einstein_constant": float(p.a), "dumps": dumps }),
        failure,
    })
}

fn run_chern_weil(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let dom = domain(cfg, Domain::Annulus { r_min: 0.2, r_max: 0.8 });
    let tol = cfg.tol.unwrap_or(1e-6);
    let res = resolutions(cfg, &[64, 128]);
    let mut rows = Vec::new();
    for eps in eps_list(cfg, &[qi(0)]) {
        let mut gaps = Vec::new();
        let mut levels = Vec::new();
        for &n in &res {
            let g = dom.build(n)?;
            let m = rank2_model_metric(to_f64(&eps), &g)?;
            let pi = MatField::from_fn(2, g.len(), |_| CMat::from_diag(&[0.0, 1.0]));
            let r = chern_weil_degree(&m.higgs, &m.metric, &pi, &g, tol)?;
            gaps.push(r.gap);
            levels.push(json!({
                "resolution": n,
                "lhs": quantity(r.lhs, "curvature and second fundamental form integral over 2 pi n"),
                "rhs": quantity(r.rhs, "induced-metric curvature integral over 2 pi"),
                "gap": quantity(r.gap, "|lhs - rhs|"),
            }));
        }
        let flat = {
            let g = dom.build(res[0])?;
            flatness_residual(&rank2_model_metric(to_f64(&eps), &g)?.higgs, &g)?.sup
        };
        rows.push(json!({
            "eps": fmt_q(&eps),
            "levels": levels,
            "refinement_ratios": refinement_ratios(&gaps),
            "higgs_flatness_sup": quantity(flat, "sup of the Frobenius norm of the Higgs curvature at the coarsest level"),
        }));
    }
    Ok(Outcome::ok(json!({ "projector": "onto span(v2)", "studies": rows }), json!({ "tol": float(tol) })))
}
