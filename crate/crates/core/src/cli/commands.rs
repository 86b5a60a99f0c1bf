//! The `verify`, `synth` and `ode` pipelines. Each returns an [`Outcome`]
//! holding the exit code and the rendered artifacts; writing them is left
//! to the caller.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use super::config::{CurveSource, RunConfig, SynthKind, WeightSpec};
use crate::biharmonic::{self, BiharmonicError, CaseLabel, ScalarCurve, WeightFunction};
use crate::curve::{self, CurveError, CurveTrace};
use crate::jet::{Jet, Scalar};
use crate::odesol::{self, OdeSolutionSpec, Sign};
use crate::slant;
use crate::synth::{self, ExampleInfo, SynthError, SynthesisSpec, Synthesized};

pub const EXIT_OK: i32 = 0;
pub const EXIT_MISMATCH: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

/// Column order of the per-sample CSV written by `verify`.
pub fn sample_csv_header(s: usize) -> Vec<String> {
    let mut h: Vec<String> = ["t", "k1", "k2", "k3"].iter().map(|x| x.to_string()).collect();
    h.extend((1..=s).map(|a| format!("eta{a}")));
    h.extend(["p2", "p3", "p4", "beta", "tau3_norm", "eq1", "eq2", "eq3", "eq4", "eq5"].iter().map(|x| x.to_string()));
    h
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub code: i32,
    /// Pretty-printed JSON report.
    pub report: Option<String>,
    /// Per-sample CSV (`verify`), trace CSV (`synth`) or solution CSV (`ode`).
    pub csv: Option<String>,
    pub message: String,
}

impl Outcome {
    fn fail(code: i32, message: impl Into<String>) -> Self {
        Outcome { code, report: None, csv: None, message: message.into() }
    }
}

enum Failure {
    Config(String),
    Numerical(String),
}

impl Failure {
    fn into_outcome(self) -> Outcome {
        match self {
            Failure::Config(m) => Outcome::fail(EXIT_CONFIG, format!("config error: {m}")),
            Failure::Numerical(m) => Outcome::fail(EXIT_NUMERICAL, format!("numerical failure: {m}")),
        }
    }
}

impl From<CurveError> for Failure {
    fn from(e: CurveError) -> Self {
        match e {
            CurveError::Io(_) | CurveError::Csv { .. } | CurveError::NotIncreasing(_) | CurveError::TooShort { .. } => {
                Failure::Config(e.to_string())
            }
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<SynthError> for Failure {
    fn from(e: SynthError) -> Self {
        match e {
            SynthError::InvalidSpec(_) => Failure::Config(e.to_string()),
            SynthError::Curve(c) => c.into(),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

impl From<BiharmonicError> for Failure {
    fn from(e: BiharmonicError) -> Self {
        match e {
            BiharmonicError::LengthMismatch { .. } => Failure::Config(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

fn synthesis_spec(cfg: &RunConfig) -> Result<(SynthesisSpec, Option<ExampleInfo>), Failure> {
    match &cfg.curve {
        CurveSource::Csv { .. } => Err(Failure::Config("synth needs a builtin-example or synthesis curve source".into())),
        CurveSource::BuiltinExample { c1, c2, c3, c4, window, step, drift_tol } => {
            let (mut spec, info) = synth::builtin_example_r6(*c1, *c2, *c3, *c4)?;
            spec.window = *window;
            spec.step = *step;
            spec.drift_tol = *drift_tol;
            Ok((spec, Some(info)))
        }
        CurveSource::Synthesis { kind, window, step, drift_tol } => {
            let mut spec = match kind {
                SynthKind::Geodesic => synth::geodesic_spec(cfg.params, *window, *step),
                SynthKind::Circle { k1 } => synth::circle_spec(cfg.params, *k1, *window, *step)?,
                SynthKind::Random { order, seed } => synth::random_spec(cfg.params, *order, *seed, *window, *step),
            };
            spec.drift_tol = *drift_tol;
            Ok((spec, None))
        }
    }
}

struct Built {
    trace: CurveTrace,
    synthesized: Option<Synthesized>,
    example: Option<ExampleInfo>,
}

fn build_trace(cfg: &RunConfig) -> Result<Built, Failure> {
    match &cfg.curve {
        CurveSource::Csv { path } => {
            let trace = CurveTrace::from_csv_path(cfg.params, path)?;
            Ok(Built { trace, synthesized: None, example: None })
        }
        _ => {
            let (spec, example) = synthesis_spec(cfg)?;
            let out = synth::integrate_frenet_system(&spec)?;
            Ok(Built { trace: out.trace.clone(), synthesized: Some(out), example })
        }
    }
}

fn read_weight(path: &Path, ts: &[f64]) -> Result<WeightFunction, Failure> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
    let header = rdr.headers().map_err(|e| Failure::Config(e.to_string()))?.clone();
    let col = |n: &str| header.iter().position(|h| h == n);
    let (tc, fc) = match (col("t"), col("f")) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Failure::Config(format!("{}: weight CSV needs columns t and f", path.display()))),
    };
    let (mut wt, mut wf) = (Vec::new(), Vec::new());
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| Failure::Config(e.to_string()))?;
        let num = |c: usize| -> Result<f64, Failure> {
            rec.get(c)
                .and_then(|x| x.parse().ok())
                .ok_or_else(|| Failure::Config(format!("{}: bad number on line {}", path.display(), i + 2)))
        };
        wt.push(num(tc)?);
        wf.push(num(fc)?);
    }
    if wt.len() != ts.len() || wt.iter().zip(ts).any(|(a, b)| (a - b).abs() > 1e-9 * (1.0 + b.abs())) {
        return Err(Failure::Config("weight samples must lie on the trace grid".into()));
    }
    WeightFunction::from_samples(ts, &wf).map_err(|e| Failure::Config(e.to_string()))
}

fn weight_function(cfg: &RunConfig, ts: &[f64]) -> Result<WeightFunction, Failure> {
    Ok(match &cfg.weight {
        WeightSpec::Unit => WeightFunction::Explicit(vec![Jet::constant(1.0); ts.len()]),
        WeightSpec::CurvaturePower(c1) => WeightFunction::CurvaturePower { c1: *c1 },
        WeightSpec::Sampled(p) => read_weight(p, ts)?,
    })
}

fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Case-specific checks; checker errors are reported, not fatal.
fn case_details(sc: &ScalarCurve, label: CaseLabel, tol: &biharmonic::BiharmonicTolerances, trace: &CurveTrace, fd: &curve::FrenetData) -> Value {
    let err = |e: BiharmonicError| json!({ "error": e.to_string() });
    match label {
        CaseLabel::I | CaseLabel::II => {
            let gram = (fd.order >= 3).then(|| biharmonic::gram_independence(trace, fd, true));
            match biharmonic::case1_case2_checker(sc, label, tol, gram) {
                Ok(r) => serde_json::to_value(r).unwrap_or(Value::Null),
                Err(e) => err(e),
            }
        }
        CaseLabel::III => {
            let ratios: Vec<f64> = sc.k2.iter().zip(&sc.k1).map(|(a, b)| a.value() / b.value()).collect();
            let c2 = ratios.iter().sum::<f64>() / ratios.len() as f64;
            let mid = sc.len() / 2;
            let eps = if sc.p2[mid].value() >= 0.0 { 1.0 } else { -1.0 };
            serde_json::to_value(biharmonic::case3_obstruction(sc.a, sc.b, c2, eps, sc.consts.s)).unwrap_or(Value::Null)
        }
        CaseLabel::IV => match biharmonic::case4_checker(sc, tol) {
            Ok(r) => serde_json::to_value(r).unwrap_or(Value::Null),
            Err(e) => err(e),
        },
    }
}

fn to_json<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn verify_trace(cfg: &RunConfig, built: &Built, command: &str) -> Result<Outcome, Failure> {
    let trace = &built.trace;
    let tol = cfg.tolerances;
    let speed = curve::unit_speed_check(trace);
    if !speed.passed {
        return Err(Failure::Numerical(format!(
            "curve is not unit speed: |g(T,T) - 1| = {:.3e} at t = {}",
            speed.max_deviation, speed.worst_t
        )));
    }
    let fd = curve::frenet_apparatus(trace, cfg.params.dim(), tol.frenet_threshold)?;
    let profile = match tol.slant {
        Some(t) => slant::contact_angles_with(trace, t),
        None => slant::contact_angles(trace),
    };
    let weight = weight_function(cfg, &trace.ts)?;
    let btol = tol.biharmonic();
    let rep = biharmonic::check_conditions(trace, &fd, &profile, &weight, &btol)?;
    let sc = ScalarCurve::from_trace(trace, &fd, &profile, &weight, cfg.params.constants())?;
    let details = if fd.order >= 2 { case_details(&sc, rep.case.label, &btol, trace, &fd) } else { Value::Null };
    let decomposition = (fd.order >= 2).then(|| slant::phi_t_decomposition(trace, &fd, &profile));

    let verdict_ok = cfg.expected.map(|e| e == rep.verdict).unwrap_or(true);
    let code = if verdict_ok { EXIT_OK } else { EXIT_MISMATCH };

    let mut report = json!({
        "tool": "sspace",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "config_sha256": cfg.config_sha256,
        "seed": cfg.seed,
        "tolerance_profile": cfg.profile,
        "tolerances": to_json(&cfg.tolerances),
        "manifold": { "m": cfg.m, "s": cfg.s, "c": cfg.params.c() },
        "curve": {
            "config": to_json(&cfg.curve),
            "samples": trace.len(),
            "window": [trace.ts[0], trace.ts[trace.len() - 1]],
            "unit_speed": to_json(&speed),
        },
        "weight": to_json(&cfg.weight),
        "frenet": {
            "order": fd.order,
            "threshold": fd.threshold,
            "vanishing_curvature": fd.vanishing_curvature,
            "frenet_residual": fd.frenet_residual,
            "orthonormality_residual": fd.orthonormality_residual,
            "sign_flips": fd.sign_flips,
        },
        "slant": to_json(&profile),
        "phi_t": decomposition.as_ref().map(|d| json!({
            "degenerate": d.degenerate,
            "norm_residual": d.norm_residual,
            "span_residual": d.span_residual,
            "rate_residual": d.rate_residual,
            "cos_w_residual": d.cos_w_residual,
            "eta_v2": d.eta_v2,
            "p2_range": [d.p2_range().0, d.p2_range().1],
        })),
        "biharmonic": to_json(&rep),
        "case_details": details,
        "expected": cfg.expected.map(|v| v.as_str()).unwrap_or("any"),
        "verdict": rep.verdict.as_str(),
        "verdict_matches": verdict_ok,
        "exit_code": code,
    });
    if let Some(s) = &built.synthesized {
        report["synthesis"] = to_json(&s.stats);
    }
    if let Some(info) = &built.example {
        report["example"] = to_json(info);
        report["example"]["compatibility_residual"] = json!(synth::compatibility_residual(trace, &info.cos_thetas));
    }

    let mut csv = sample_csv_header(cfg.s).join(",");
    csv.push('\n');
    let oma = profile.one_minus_a();
    for i in 0..trace.len() {
        let k = |j: usize| if j < fd.order { fd.curvature(i, j) } else { 0.0 };
        let mut row = vec![fmt_num(trace.ts[i]), fmt_num(k(1)), fmt_num(k(2)), fmt_num(k(3))];
        row.extend(slant::contact_cosines(trace, i).into_iter().map(fmt_num));
        let p2 = sc.p2[i].value();
        let beta = if oma > slant::DEGENERATE_TOL { (p2 / oma.sqrt()).clamp(-1.0, 1.0).acos() } else { f64::NAN };
        row.extend([p2, sc.p3[i], sc.p4[i], beta, rep.tau.tau3_norms[i]].into_iter().map(fmt_num));
        match rep.per_sample.get(i) {
            Some(r) => row.extend([r.eq1, r.eq2, r.eq3, r.eq4, r.tau3_phi_t].into_iter().map(fmt_num)),
            None => row.extend(std::iter::repeat(fmt_num(0.0)).take(5)),
        }
        csv.push_str(&row.join(","));
        csv.push('\n');
    }

    let message = format!(
        "verdict {} (expected {}), case {:?}, max residual {:.3e}",
        rep.verdict.as_str(),
        cfg.expected.map(|v| v.as_str()).unwrap_or("any"),
        rep.case.label,
        rep.residuals.max()
    );
    Ok(Outcome {
        code,
        report: Some(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"),
        csv: Some(csv),
        message,
    })
}

/// Full pipeline: trace, Frenet apparatus, slant profile, conditions, case checks.
pub fn cmd_verify(cfg: &RunConfig) -> Outcome {
    build_trace(cfg)
        .and_then(|built| verify_trace(cfg, &built, "verify"))
        .unwrap_or_else(Failure::into_outcome)
}

/// Integrates the configured synthesis spec; with `verify` the trace also
/// goes through the `verify` pipeline and its exit code is returned.
pub fn cmd_synth(cfg: &RunConfig, verify: bool) -> Outcome {
    let run = || -> Result<Outcome, Failure> {
        let (spec, example) = synthesis_spec(cfg)?;
        let out = synth::integrate_frenet_system(&spec)?;
        let trace_csv = out.trace.to_csv(spec.depth);
        let built = Built { trace: out.trace.clone(), synthesized: Some(out), example };
        if verify {
            let mut o = verify_trace(cfg, &built, "synth")?;
            o.csv = Some(trace_csv);
            return Ok(o);
        }
        let stats = &built.synthesized.as_ref().expect("synthesized").stats;
        let mut report = json!({
            "tool": "sspace",
            "version": env!("CARGO_PKG_VERSION"),
            "command": "synth",
            "config_sha256": cfg.config_sha256,
            "seed": cfg.seed,
            "curve": to_json(&cfg.curve),
            "synthesis": to_json(stats),
            "exit_code": EXIT_OK,
        });
        if let Some(info) = &built.example {
            report["example"] = to_json(info);
        }
        Ok(Outcome {
            code: EXIT_OK,
            report: Some(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"),
            csv: Some(trace_csv),
            message: format!("synthesized {} samples, max drift {:.3e}", built.trace.len(), stats.max_drift),
        })
    };
    run().unwrap_or_else(Failure::into_outcome)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OdeCase {
    /// `eps = +1`.
    I,
    /// `eps = -1`.
    II,
    /// `eps = 0`.
    III,
}

#[derive(Debug, Clone)]
pub struct OdeArgs {
    pub case: OdeCase,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub lambda: f64,
    pub range: (f64, f64, f64),
    pub branch: Sign,
    pub tol: f64,
}

/// Parses `start:end:step`.
pub fn parse_range(s: &str) -> Result<(f64, f64, f64), String> {
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("range {s:?} must be start:end:step"));
    }
    let v: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("range {s:?}: {e}")))
        .collect::<Result<_, _>>()?;
    if !(v[1] > v[0]) || !(v[2] > 0.0) {
        return Err(format!("range {s:?} must have start < end and step > 0"));
    }
    Ok((v[0], v[1], v[2]))
}

/// Closed-form candidate over a grid: `(t, y, residual, flag)` CSV.
pub fn cmd_ode(args: &OdeArgs) -> Outcome {
    let eps = match args.case {
        OdeCase::I => 1,
        OdeCase::II => -1,
        OdeCase::III => 0,
    };
    let spec = match OdeSolutionSpec::new(eps, args.lambda, args.c2, args.c3, args.c4, args.branch) {
        Ok(s) => s,
        Err(e) => return Outcome::fail(EXIT_CONFIG, format!("config error: {e}")),
    };
    if args.case != OdeCase::III && args.lambda == 0.0 {
        return Outcome::fail(EXIT_CONFIG, "config error: cases i and ii need lambda > 0");
    }
    let ts = curve::uniform_grid(args.range.0, args.range.1, args.range.2);
    let scan = odesol::domain_scan(&spec, &ts);
    let mut csv = String::from("t,y,residual,flag\n");
    for s in &scan.samples {
        let _ = writeln!(
            csv,
            "{},{},{},{}",
            fmt_num(s.t),
            s.y.map(fmt_num).unwrap_or_default(),
            s.residual.map(fmt_num).unwrap_or_default(),
            s.flag
        );
    }
    let (code, message) = if spec.is_degenerate() {
        (EXIT_NUMERICAL, "degenerate: c3 = 0 gives y = 0 identically".to_string())
    } else if scan.longest_real_run <= 1 {
        (
            EXIT_NUMERICAL,
            format!(
                "closed form is not real on any interval of the range ({} negative-radicand, {} pole samples); \
                 the secant and hyperbolic-secant formulas have N <= 0 everywhere",
                scan.negative_radicand, scan.poles
            ),
        )
    } else if scan.max_residual_on_real < args.tol {
        (EXIT_OK, format!("max residual {:.3e} on {} real samples", scan.max_residual_on_real, scan.real))
    } else {
        (
            EXIT_MISMATCH,
            format!("max residual {:.3e} exceeds {:.1e} on the real samples", scan.max_residual_on_real, args.tol),
        )
    };
    let report = json!({
        "tool": "sspace",
        "version": env!("CARGO_PKG_VERSION"),
        "command": "ode",
        "spec": to_json(&spec),
        "case": to_json(&spec.case()),
        "range": [args.range.0, args.range.1, args.range.2],
        "tolerance": args.tol,
        "points": scan.points,
        "real": scan.real,
        "negative_radicand": scan.negative_radicand,
        "poles": scan.poles,
        "longest_real_run": scan.longest_real_run,
        "max_residual_on_real": scan.max_residual_on_real,
        "exit_code": code,
        "message": message,
    });
    Outcome {
        code,
        report: Some(serde_json::to_string_pretty(&report).expect("report serializes") + "\n"),
        csv: Some(csv),
        message,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold;

    fn cfg(text: &str) -> RunConfig {
        RunConfig::parse(text, Path::new("."), "default").unwrap()
    }

    #[test]
    fn geodesic_synth_is_harmonic() {
        let c = cfg("[manifold]\nm = 2\ns = 2\n[curve]\nsource = \"synthesis\"\nkind = \"geodesic\"\nstep = 0.01\n");
        let o = cmd_synth(&c, true);
        assert_eq!(o.code, EXIT_OK, "{}", o.message);
        assert!(o.report.unwrap().contains("\"verdict\": \"harmonic/geodesic\""));
    }

    #[test]
    fn coarse_step_is_numerical_failure() {
        let c = cfg("[manifold]\nm = 2\ns = 2\n[curve]\nsource = \"synthesis\"\nkind = \"circle\"\nk1 = 1.0\nwindow = [0.0, 2.0]\nstep = 0.5\n");
        assert_eq!(cmd_synth(&c, false).code, EXIT_NUMERICAL);
    }

    #[test]
    fn random_curve_mismatches_expected() {
        let c = cfg("expected = \"proper-f-biharmonic\"\n[manifold]\nm = 2\ns = 2\n[curve]\nsource = \"synthesis\"\nkind = \"random\"\nwindow = [0.0, 0.5]\nstep = 0.005\n[weight]\nc1 = 1.0\n");
        let o = cmd_verify(&c);
        assert_eq!(o.code, EXIT_MISMATCH, "{}", o.message);
    }

    #[test]
    fn ode_exit_codes() {
        let base = OdeArgs {
            case: OdeCase::III,
            c2: 1.0,
            c3: 4.0,
            c4: 0.0,
            lambda: 1.0,
            range: (-2.0, 2.0, 0.001),
            branch: Sign::Plus,
            tol: 1e-10,
        };
        assert_eq!(cmd_ode(&base).code, EXIT_OK);
        assert_eq!(cmd_ode(&OdeArgs { c3: 0.0, ..base.clone() }).code, EXIT_NUMERICAL);
        assert_eq!(cmd_ode(&OdeArgs { case: OdeCase::I, c3: 1.0, ..base.clone() }).code, EXIT_NUMERICAL);
        assert!(parse_range("-2:2:0.001").is_ok());
        assert!(parse_range("2:-2:0.1").is_err());
    }

    #[test]
    fn csv_round_trip_through_verify() {
        let dir = tempfile::tempdir().unwrap();
        let p = manifold::ModelParams::new(2, 2).unwrap();
        let tr = curve::legendre_circle(p, 2.0, curve::uniform_grid(0.0, 1.0, 0.01)).unwrap();
        std::fs::write(dir.path().join("c.csv"), tr.to_csv(6)).unwrap();
        let text = "[manifold]\nm = 2\ns = 2\n[curve]\nsource = \"csv\"\npath = \"c.csv\"\n";
        let c = RunConfig::parse(text, dir.path(), "default").unwrap();
        let o = cmd_verify(&c);
        assert_eq!(o.code, EXIT_OK, "{}", o.message);
        let csv = o.csv.unwrap();
        assert!(csv.starts_with("t,k1,k2,k3,eta1,eta2,p2,p3,p4,beta,tau3_norm,eq1"));
    }
}
