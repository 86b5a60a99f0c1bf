//! Bitension fields and the proper f-biharmonicity conditions for slant
//! curves, with the four-way case split.
//!
//! The conditions only involve the curvatures, the weight `f`, the slant
//! constants and `p_j = g(phi T, V_j)`, so they are evaluated on a
//! [`ScalarCurve`]. Scalar curves come from a measured trace or are supplied
//! directly with hypothetical `(c, s)`.

use nalgebra::DMatrix;
use serde::Serialize;
use thiserror::Error;

use crate::curve::{CurveTrace, FrenetData};
use crate::fd;
use crate::jet::{self, Jet, Scalar};
use crate::manifold::{self, SpaceConstants};
use crate::odesol::{self, LambdaConstants, OdeSolutionSpec, Sign};
use crate::slant::{self, SlantProfile};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BiharmonicError {
    #[error("weight function must be positive, found {value} at t = {t}")]
    NonPositiveWeight { t: f64, value: f64 },
    #[error("{what} needs derivative order {needed}, only {have} available")]
    InsufficientDepth { what: &'static str, needed: i32, have: i32 },
    #[error("weight has {got} samples, trace has {expected}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("k1 vanishes at t = {0}")]
    CurvatureZero(f64),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CaseLabel {
    I,
    II,
    III,
    IV,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    #[serde(rename = "proper-f-biharmonic")]
    ProperFBiharmonic,
    #[serde(rename = "biharmonic")]
    Biharmonic,
    #[serde(rename = "harmonic/geodesic")]
    HarmonicGeodesic,
    #[serde(rename = "none")]
    None,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Verdict::ProperFBiharmonic => "proper-f-biharmonic",
            Verdict::Biharmonic => "biharmonic",
            Verdict::HarmonicGeodesic => "harmonic/geodesic",
            Verdict::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "proper-f-biharmonic" => Some(Verdict::ProperFBiharmonic),
            "biharmonic" => Some(Verdict::Biharmonic),
            "harmonic/geodesic" | "harmonic" | "geodesic" => Some(Verdict::HarmonicGeodesic),
            "none" => Some(Verdict::None),
            _ => None,
        }
    }
}

/// The weight `f` of an f-biharmonic curve.
#[derive(Debug, Clone)]
pub enum WeightFunction {
    /// `f = c1 k1^(-3/2)`.
    CurvaturePower { c1: f64 },
    /// Jets of `f` at the trace samples.
    Explicit(Vec<Jet>),
}

impl WeightFunction {
    pub fn from_fn<F: Fn(Jet) -> Jet>(ts: &[f64], f: F) -> Self {
        WeightFunction::Explicit(ts.iter().map(|t| f(Jet::variable(*t))).collect())
    }

    /// Sampled `f` with derivatives from fourth-order differences.
    pub fn from_samples(ts: &[f64], values: &[f64]) -> Result<Self, BiharmonicError> {
        if ts.len() != values.len() {
            return Err(BiharmonicError::LengthMismatch { expected: ts.len(), got: values.len() });
        }
        let short = || BiharmonicError::InsufficientDepth { what: "sampled weight", needed: 2, have: -1 };
        let d1 = fd::differentiate_samples(ts, values, 1).ok_or_else(short)?;
        let d2 = fd::differentiate_samples(ts, values, 2).ok_or_else(short)?;
        Ok(WeightFunction::Explicit(
            (0..ts.len()).map(|i| Jet::from_derivatives(&[values[i], d1[i], d2[i]])).collect(),
        ))
    }

    pub fn jet_at(&self, i: usize, k1: Jet) -> Jet {
        match self {
            WeightFunction::CurvaturePower { c1 } => k1.powf(-1.5) * *c1,
            WeightFunction::Explicit(v) => v[i],
        }
    }
}

/// Everything the biharmonicity conditions depend on, per sample.
#[derive(Debug, Clone)]
pub struct ScalarCurve {
    pub consts: SpaceConstants,
    pub a: f64,
    pub b: f64,
    pub ts: Vec<f64>,
    pub k1: Vec<Jet>,
    pub k2: Vec<Jet>,
    pub k3: Vec<Jet>,
    /// `g(phi T, V_2)` with its derivative.
    pub p2: Vec<Jet>,
    pub p3: Vec<f64>,
    pub p4: Vec<f64>,
    pub f: Vec<Jet>,
}

impl ScalarCurve {
    pub fn from_trace(
        trace: &CurveTrace,
        fd: &FrenetData,
        profile: &SlantProfile,
        weight: &WeightFunction,
        consts: SpaceConstants,
    ) -> Result<Self, BiharmonicError> {
        let n = trace.len();
        if let WeightFunction::Explicit(v) = weight {
            if v.len() != n {
                return Err(BiharmonicError::LengthMismatch { expected: n, got: v.len() });
            }
        }
        let mut sc = ScalarCurve {
            consts,
            a: profile.a,
            b: profile.b,
            ts: trace.ts.clone(),
            k1: Vec::with_capacity(n),
            k2: Vec::with_capacity(n),
            k3: Vec::with_capacity(n),
            p2: Vec::with_capacity(n),
            p3: Vec::with_capacity(n),
            p4: Vec::with_capacity(n),
            f: Vec::with_capacity(n),
        };
        let params = &trace.params;
        for i in 0..n {
            let k1 = fd.curvature_jet(i, 1);
            sc.k1.push(k1);
            sc.k2.push(fd.curvature_jet(i, 2));
            sc.k3.push(fd.curvature_jet(i, 3));
            let pt = slant::phi_t_jets(trace, i);
            let pos = &trace.jets[i];
            let pj = |j: usize| match fd.frame_jets(i, j) {
                Some(v) => manifold::inner(params, pos, &pt, v),
                None => Jet::constant(0.0),
            };
            sc.p2.push(pj(2));
            sc.p3.push(pj(3).value());
            sc.p4.push(pj(4).value());
            let f = if fd.order >= 2 { weight.jet_at(i, k1) } else { weight.jet_at(i, Jet::constant(1.0)) };
            if !(f.value() > 0.0) {
                return Err(BiharmonicError::NonPositiveWeight { t: trace.ts[i], value: f.value() });
            }
            sc.f.push(f);
        }
        Ok(sc)
    }

    pub fn len(&self) -> usize {
        self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ts.is_empty()
    }

    fn one_minus_a(&self) -> f64 {
        1.0 - self.a
    }

    /// Relative spread `(max f - min f) / mean f`.
    pub fn f_variation(&self) -> f64 {
        let vals: Vec<f64> = self.f.iter().map(|f| f.value()).collect();
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        (hi - lo) / mean
    }
}

fn d(j: &Jet, n: usize) -> Result<f64, BiharmonicError> {
    j.deriv(n).ok_or(BiharmonicError::InsufficientDepth { what: "curvature or weight", needed: n as i32, have: j.order() })
}

/// Coefficients of `tau_3` in `T, V2, V3, V4, phi T` at one sample.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TauCoefficients {
    pub t: f64,
    pub v2: f64,
    pub v3: f64,
    pub v4: f64,
    pub phi_t: f64,
}

/// Per-sample residuals of the four scalar conditions and `g(tau_3, phi T)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SampleResiduals {
    pub t: f64,
    pub eq1: f64,
    pub eq2: f64,
    pub eq3: f64,
    pub eq4: f64,
    pub tau3_phi_t: f64,
}

#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct ConditionResiduals {
    pub eq1: f64,
    pub eq2: f64,
    pub eq3: f64,
    pub eq4: f64,
    pub tau3_phi_t: f64,
}

impl ConditionResiduals {
    pub fn max(&self) -> f64 {
        self.eq1.max(self.eq2).max(self.eq3).max(self.eq4).max(self.tau3_phi_t)
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.eq1, self.eq2, self.eq3, self.eq4, self.tau3_phi_t]
    }
}

/// `tau_3` coefficients; with `with_weight = false` the weight terms drop
/// out and the result is `tau_2`.
pub fn tau_coefficients(sc: &ScalarCurve, i: usize, with_weight: bool) -> Result<TauCoefficients, BiharmonicError> {
    let (c, s) = (sc.consts.c, sc.consts.s);
    let oma = sc.one_minus_a();
    let (k1, k1p, k1pp) = (sc.k1[i].value(), d(&sc.k1[i], 1)?, d(&sc.k1[i], 2)?);
    let k2 = sc.k2[i].value();
    let k2p = if k2 == 0.0 && sc.k2[i].order() < 1 { 0.0 } else { d(&sc.k2[i], 1)? };
    let k3 = sc.k3[i].value();
    let (f1, f2) = if with_weight {
        let f = sc.f[i];
        (d(&f, 1)? / f.value(), d(&f, 2)? / f.value())
    } else {
        (0.0, 0.0)
    };
    let p2 = sc.p2[i].value();
    let bracket = sc.b * sc.b + (c + 3.0 * s) / 4.0 * oma;
    Ok(TauCoefficients {
        t: -3.0 * k1 * k1p - 2.0 * k1 * k1 * f1,
        v2: k1pp - k1.powi(3) - k1 * k2 * k2 + k1 * bracket + 2.0 * f1 * k1p + f2 * k1,
        v3: 2.0 * k1p * k2 + k1 * k2p + 2.0 * f1 * k1 * k2,
        v4: k1 * k2 * k3,
        phi_t: 3.0 * k1 * (c - s) / 4.0 * p2,
    })
}

/// Residuals of the four conditions and of `g(tau_3, phi T)` at sample `i`.
pub fn sample_residuals(sc: &ScalarCurve, i: usize) -> Result<SampleResiduals, BiharmonicError> {
    let (c, s) = (sc.consts.c, sc.consts.s);
    let oma = sc.one_minus_a();
    let k1j = sc.k1[i];
    let k1 = k1j.value();
    if k1 == 0.0 {
        return Err(BiharmonicError::CurvatureZero(sc.ts[i]));
    }
    let (k1p, k1pp) = (d(&k1j, 1)?, d(&k1j, 2)?);
    let k2 = sc.k2[i].value();
    let k2p = if k2 == 0.0 && sc.k2[i].order() < 1 { 0.0 } else { d(&sc.k2[i], 1)? };
    let k3 = sc.k3[i].value();
    let f = sc.f[i];
    let (f1, f2) = (d(&f, 1)? / f.value(), d(&f, 2)? / f.value());
    let (p2, p3, p4) = (sc.p2[i].value(), sc.p3[i], sc.p4[i]);
    let q = 3.0 * (c - s) / 4.0;
    let eq1 = 3.0 * k1p / k1 + 2.0 * f1;
    let eq2 = k1 * k1 + k2 * k2
        - (k1pp / k1 + f2 + 2.0 * f1 * k1p / k1 + sc.b * sc.b + (c + 3.0 * s) / 4.0 * oma + q * p2 * p2);
    let eq3 = k2p + 2.0 * k2 * k1p / k1 + 2.0 * k2 * f1 + q * p2 * p3;
    let eq4 = k2 * k3 + q * p2 * p4;
    let tc = tau_coefficients(sc, i, true)?;
    let tau3_phi_t = tc.v2 * p2 + tc.v3 * p3 + tc.v4 * p4 + tc.phi_t * oma;
    Ok(SampleResiduals { t: sc.ts[i], eq1, eq2, eq3, eq4, tau3_phi_t })
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct BiharmonicTolerances {
    pub residual: f64,
    pub f_variation: f64,
    pub case_ii: f64,
    pub case_iii: f64,
    pub beta_constancy: f64,
    pub ratio_constancy: f64,
}

impl Default for BiharmonicTolerances {
    fn default() -> Self {
        BiharmonicTolerances {
            residual: 1e-3,
            f_variation: 1e-8,
            case_ii: 1e-6,
            case_iii: 1e-6,
            beta_constancy: 1e-6,
            ratio_constancy: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CaseDecision {
    pub label: CaseLabel,
    /// Second candidate when a metric sits within a factor 10 of its threshold.
    pub ambiguous_with: Option<CaseLabel>,
    /// `max |g(phi T, V_2)| / sqrt(1-a)`.
    pub case_ii_metric: f64,
    /// `max min_eps |phi T - eps sqrt(1-a) V_2| / sqrt(1-a)`.
    pub case_iii_metric: f64,
}

fn near(metric: f64, threshold: f64) -> bool {
    metric > threshold / 10.0 && metric < threshold * 10.0
}

/// Case label from the `p2` samples. Depends on `|p2|` only, so it does not
/// change when frame vectors flip sign.
pub fn classify_case(sc: &ScalarCurve, tol: &BiharmonicTolerances) -> CaseDecision {
    let (c, s) = (sc.consts.c, sc.consts.s);
    let oma = sc.one_minus_a().max(0.0);
    let root = oma.sqrt();
    let (mut m2, mut m3): (f64, f64) = (0.0, 0.0);
    for p in &sc.p2 {
        let p2 = p.value().abs();
        if root > 0.0 {
            m2 = m2.max(p2 / root);
            // |phi T - eps sqrt(1-a) V2|^2 = |phi T|^2 - 2 sqrt(1-a)|p2| + (1-a)
            m3 = m3.max((2.0 * oma - 2.0 * root * p2).max(0.0).sqrt() / root);
        }
    }
    let is_i = (c - s).abs() <= 1e-12 * (1.0 + c.abs().max(s.abs()));
    let (label, ambiguous_with) = if is_i {
        (CaseLabel::I, None)
    } else if m2 < tol.case_ii {
        (CaseLabel::II, near(m2, tol.case_ii).then_some(CaseLabel::IV))
    } else if m3 < tol.case_iii {
        (CaseLabel::III, near(m3, tol.case_iii).then_some(CaseLabel::IV))
    } else if near(m2, tol.case_ii) {
        (CaseLabel::IV, Some(CaseLabel::II))
    } else if near(m3, tol.case_iii) {
        (CaseLabel::IV, Some(CaseLabel::III))
    } else {
        (CaseLabel::IV, None)
    };
    CaseDecision { label, ambiguous_with, case_ii_metric: m2, case_iii_metric: m3 }
}

#[derive(Debug, Clone, Serialize)]
pub struct ConditionSummary {
    pub residuals: ConditionResiduals,
    pub per_sample: Vec<SampleResiduals>,
    pub f_variation: f64,
    pub f_constant: bool,
    pub case: CaseDecision,
    pub verdict: Verdict,
}

/// Checks the conditions on a scalar curve. `geodesic` short-circuits to the
/// harmonic verdict, `slant = false` to `none`.
pub fn check_scalar_conditions(
    sc: &ScalarCurve,
    tol: &BiharmonicTolerances,
    geodesic: bool,
    slant: bool,
) -> Result<ConditionSummary, BiharmonicError> {
    let f_variation = sc.f_variation();
    let f_constant = !(f_variation > tol.f_variation);
    let case = classify_case(sc, tol);
    if geodesic {
        return Ok(ConditionSummary {
            residuals: ConditionResiduals::default(),
            per_sample: Vec::new(),
            f_variation,
            f_constant,
            case,
            verdict: Verdict::HarmonicGeodesic,
        });
    }
    let mut res = ConditionResiduals::default();
    let mut per_sample = Vec::with_capacity(sc.len());
    for i in 0..sc.len() {
        let r = sample_residuals(sc, i)?;
        res.eq1 = res.eq1.max(r.eq1.abs());
        res.eq2 = res.eq2.max(r.eq2.abs());
        res.eq3 = res.eq3.max(r.eq3.abs());
        res.eq4 = res.eq4.max(r.eq4.abs());
        res.tau3_phi_t = res.tau3_phi_t.max(r.tau3_phi_t.abs());
        per_sample.push(r);
    }
    let holds = res.as_array().iter().all(|r| *r < tol.residual);
    let verdict = if !slant || !holds {
        Verdict::None
    } else if f_constant {
        Verdict::Biharmonic
    } else {
        Verdict::ProperFBiharmonic
    };
    Ok(ConditionSummary { residuals: res, per_sample, f_variation, f_constant, case, verdict })
}

/// `tau_2` and `tau_3` as vector fields, computed from the Frenet expansion and
/// directly from covariant derivatives of `T`.
#[derive(Debug, Clone, Serialize)]
pub struct TauReport {
    /// Max `g`-norm of (expansion - direct) for `tau_2`.
    pub tau2_cross_residual: f64,
    pub tau3_cross_residual: f64,
    pub tau2_max_norm: f64,
    pub tau3_max_norm: f64,
    /// Max `g`-norm of `tau_3 - tau_2`.
    pub tau3_minus_tau2: f64,
    pub tau3_norms: Vec<f64>,
}

pub fn tau_fields(trace: &CurveTrace, fd: &FrenetData, sc: &ScalarCurve) -> Result<TauReport, BiharmonicError> {
    let params = &trace.params;
    let n = params.dim();
    if trace.depth() < 4 {
        return Err(BiharmonicError::InsufficientDepth { what: "bitension", needed: 4, have: trace.depth() });
    }
    let mut rep = TauReport {
        tau2_cross_residual: 0.0,
        tau3_cross_residual: 0.0,
        tau2_max_norm: 0.0,
        tau3_max_norm: 0.0,
        tau3_minus_tau2: 0.0,
        tau3_norms: Vec::with_capacity(trace.len()),
    };
    for i in 0..trace.len() {
        let pos = &trace.jets[i];
        let vel = trace.velocity_jets(i);
        let w1 = manifold::covariant_derivative_jet_with(params, pos, &vel, &vel);
        let w2 = manifold::covariant_derivative_jet_with(params, pos, &vel, &w1);
        let w3 = manifold::covariant_derivative_jet_with(params, pos, &vel, &w2);
        let p = jet::values(pos);
        let t = jet::values(&vel);
        let (w1v, w2v, w3v) = (jet::values(&w1), jet::values(&w2), jet::values(&w3));
        let r = manifold::curvature_formula(params, sc.consts, &p, &t, &w1v, &t);
        let f = sc.f[i];
        let (f1, f2) = if fd.order >= 2 {
            (d(&f, 1)? / f.value(), d(&f, 2)? / f.value())
        } else {
            (0.0, 0.0)
        };
        let tau2_direct: Vec<f64> = (0..n).map(|k| w3v[k] - r[k]).collect();
        let tau3_direct: Vec<f64> = (0..n).map(|k| tau2_direct[k] + 2.0 * f1 * w2v[k] + f2 * w1v[k]).collect();

        let (tau2_exp, tau3_exp) = if fd.order >= 2 {
            let pt = manifold::phi(params, &p, &t);
            let v2 = fd.frame(i, 2, n);
            let v3 = fd.frame(i, 3, n);
            let v4 = fd.frame(i, 4, n);
            let build = |tc: TauCoefficients| -> Vec<f64> {
                (0..n).map(|k| tc.t * t[k] + tc.v2 * v2[k] + tc.v3 * v3[k] + tc.v4 * v4[k] + tc.phi_t * pt[k]).collect()
            };
            (build(tau_coefficients(sc, i, false)?), build(tau_coefficients(sc, i, true)?))
        } else {
            (vec![0.0; n], vec![0.0; n])
        };
        let nrm = |v: &[f64]| manifold::norm(params, &p, v);
        let diff = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| x - y).collect() };
        rep.tau2_cross_residual = rep.tau2_cross_residual.max(nrm(&diff(&tau2_exp, &tau2_direct)));
        rep.tau3_cross_residual = rep.tau3_cross_residual.max(nrm(&diff(&tau3_exp, &tau3_direct)));
        rep.tau2_max_norm = rep.tau2_max_norm.max(nrm(&tau2_direct));
        let n3 = nrm(&tau3_direct);
        rep.tau3_max_norm = rep.tau3_max_norm.max(n3);
        rep.tau3_minus_tau2 = rep.tau3_minus_tau2.max(nrm(&diff(&tau3_direct, &tau2_direct)));
        rep.tau3_norms.push(n3);
    }
    Ok(rep)
}

#[derive(Debug, Clone, Serialize)]
pub struct BiharmonicReport {
    pub order: usize,
    pub slant: bool,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub s: f64,
    pub residuals: ConditionResiduals,
    pub case: CaseDecision,
    pub verdict: Verdict,
    pub f_variation: f64,
    pub f_constant: bool,
    pub tau: TauReport,
    pub tolerances: BiharmonicTolerances,
    #[serde(skip)]
    pub per_sample: Vec<SampleResiduals>,
}

/// Full check of a measured trace against the model's `(c, s)`.
pub fn check_conditions(
    trace: &CurveTrace,
    fd: &FrenetData,
    profile: &SlantProfile,
    weight: &WeightFunction,
    tol: &BiharmonicTolerances,
) -> Result<BiharmonicReport, BiharmonicError> {
    let consts = trace.params.constants();
    let sc = ScalarCurve::from_trace(trace, fd, profile, weight, consts)?;
    let summary = check_scalar_conditions(&sc, tol, fd.order == 1, profile.is_slant)?;
    let tau = tau_fields(trace, fd, &sc)?;
    Ok(BiharmonicReport {
        order: fd.order,
        slant: profile.is_slant,
        a: profile.a,
        b: profile.b,
        c: consts.c,
        s: consts.s,
        residuals: summary.residuals,
        case: summary.case,
        verdict: summary.verdict,
        f_variation: summary.f_variation,
        f_constant: summary.f_constant,
        tau,
        tolerances: *tol,
        per_sample: summary.per_sample,
    })
}

// ---------------------------------------------------------------------------
// Case checkers

fn spread(v: &[f64]) -> f64 {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    hi - lo
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Max ODE residual of the `k1` jets for the given `(c2, eps lambda^2)`.
fn k1_ode_residual(sc: &ScalarCurve, c2: f64, lam: LambdaConstants) -> Result<f64, BiharmonicError> {
    let spec = OdeSolutionSpec { epsilon: lam.epsilon, lambda: lam.lambda, c2, c3: 0.0, c4: 0.0, branch: Sign::Plus };
    let mut worst: f64 = 0.0;
    for k in &sc.k1 {
        worst = worst.max(odesol::residual_at(&spec, k.value(), d(k, 1)?, d(k, 2)?).abs());
    }
    Ok(worst)
}

/// Spread of `f k1^(3/2)` relative to its mean: zero iff `f = c1 k1^(-3/2)`.
fn weight_power_spread(sc: &ScalarCurve) -> f64 {
    let c1: Vec<f64> = sc.f.iter().zip(&sc.k1).map(|(f, k)| f.value() * k.value().powf(1.5)).collect();
    spread(&c1) / mean(&c1).abs()
}

#[derive(Debug, Clone, Serialize)]
pub struct Case12Report {
    pub case: CaseLabel,
    pub lambda: LambdaConstants,
    pub c2: f64,
    pub c2_spread: f64,
    /// Osculating order implied by `c2` (2 when `k2 = 0`).
    pub order: usize,
    pub weight_power_spread: f64,
    pub ode_residual: f64,
    pub f_constant: bool,
    /// Smallest normalized Gram determinant of the frame family, when a trace was supplied.
    pub gram_min: Option<f64>,
    pub satisfied: bool,
}

/// Case I (`c = s`) and Case II (`g(phi T, V2) = 0`) conditions.
pub fn case1_case2_checker(
    sc: &ScalarCurve,
    case: CaseLabel,
    tol: &BiharmonicTolerances,
    gram_min: Option<f64>,
) -> Result<Case12Report, BiharmonicError> {
    if !matches!(case, CaseLabel::I | CaseLabel::II) {
        return Err(BiharmonicError::Invalid(format!("case {case:?} is not I or II")));
    }
    for (t, k) in sc.ts.iter().zip(&sc.k1) {
        if !(k.value() > 0.0) {
            return Err(BiharmonicError::CurvatureZero(*t));
        }
    }
    let lam = odesol::lambda_constants(sc.a, sc.b, sc.consts, case, None)
        .map_err(|e| BiharmonicError::Invalid(e.to_string()))?;
    let ratios: Vec<f64> = sc.k2.iter().zip(&sc.k1).map(|(a, b)| a.value() / b.value()).collect();
    let c2 = mean(&ratios);
    let c2_spread = spread(&ratios);
    let order = if c2.abs() < tol.ratio_constancy { 2 } else { 3 };
    let ode_residual = k1_ode_residual(sc, c2, lam)?;
    let wps = weight_power_spread(sc);
    let f_constant = !(sc.f_variation() > tol.f_variation);
    let independent = gram_min.map(|g| g > 1e-8).unwrap_or(true);
    let satisfied = c2_spread < tol.ratio_constancy
        && ode_residual < tol.residual
        && wps < tol.residual
        && independent;
    Ok(Case12Report { case, lambda: lam, c2, c2_spread, order, weight_power_spread: wps, ode_residual, f_constant, gram_min, satisfied })
}

/// Smallest Gram determinant over the trace of the normalized family
/// `{T, V2, [V3], phi T, nabla_T phi T, xi_1..xi_s}`.
pub fn gram_independence(trace: &CurveTrace, fd: &FrenetData, include_v3: bool) -> f64 {
    let params = &trace.params;
    let n = params.dim();
    let mut worst = f64::INFINITY;
    for i in 0..trace.len() {
        let p = trace.point(i);
        let pos = &trace.jets[i];
        let vel = trace.velocity_jets(i);
        let pt = manifold::phi(params, pos, &vel);
        let npt = jet::values(&manifold::covariant_derivative_jet_with(params, pos, &vel, &pt));
        let mut fam = vec![jet::values(&vel), fd.frame(i, 2, n)];
        if include_v3 {
            fam.push(fd.frame(i, 3, n));
        }
        fam.push(jet::values(&pt));
        fam.push(npt);
        for a in 0..params.s() {
            fam.push(manifold::xi(params, a));
        }
        let fam: Vec<Vec<f64>> = fam
            .into_iter()
            .map(|v| {
                let l = manifold::norm(params, &p, &v);
                if l > 0.0 {
                    v.iter().map(|c| c / l).collect()
                } else {
                    v
                }
            })
            .collect();
        let k = fam.len();
        let g = DMatrix::from_fn(k, k, |a, b| manifold::inner(params, &p, &fam[a], &fam[b]));
        worst = worst.min(g.determinant());
    }
    worst
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Case3Branch {
    /// The quadratic in `k1` is nontrivial: `k1` is one of its positive roots.
    K1ForcedConstant { roots: Vec<f64> },
    /// Nontrivial quadratic without a positive root: no such curve at all.
    NoPositiveRoot,
    /// All coefficients vanish, which forces `b = 0` and `a = 1`.
    Geodesic,
    /// All coefficients vanish with `a < 1`; never produced for valid input.
    NonConstantAllowed,
}

impl Case3Branch {
    pub fn is_contradiction(&self) -> bool {
        !matches!(self, Case3Branch::NonConstantAllowed)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Case3Report {
    /// `(quadratic, linear, constant)` coefficients in `k1`.
    pub coefficients: (f64, f64, f64),
    pub branch: Case3Branch,
}

/// With `phi T = eps sqrt(1-a) V2` and `k2 = c2 k1`, squaring
/// `k2 = sqrt(a d^2 - a s + b^2 + 2 eps b d + s)`, `d = k1 / sqrt(1-a)`, gives
/// `(c2^2 + a/(a-1)) k1^2 - 2 eps b / sqrt(1-a) k1 + (a s - b^2 - s) = 0`.
pub fn case3_obstruction(a: f64, b: f64, c2: f64, eps: f64, s: f64) -> Case3Report {
    const ZERO: f64 = 1e-12;
    if (1.0 - a).abs() <= ZERO {
        // a = 1: phi T vanishes and the curve is an integral curve of V.
        return Case3Report { coefficients: (f64::NAN, f64::NAN, a * s - b * b - s), branch: Case3Branch::Geodesic };
    }
    let qa = c2 * c2 + a / (a - 1.0);
    let qb = -2.0 * eps * b / (1.0 - a).sqrt();
    let qc = a * s - b * b - s;
    let coefficients = (qa, qb, qc);
    let branch = if qa.abs() <= ZERO && qb.abs() <= ZERO && qc.abs() <= ZERO {
        Case3Branch::NonConstantAllowed
    } else {
        let roots: Vec<f64> = if qa.abs() <= ZERO {
            if qb.abs() <= ZERO {
                vec![]
            } else {
                vec![-qc / qb]
            }
        } else {
            let disc = qb * qb - 4.0 * qa * qc;
            if disc < 0.0 {
                vec![]
            } else {
                let r = disc.sqrt();
                vec![(-qb + r) / (2.0 * qa), (-qb - r) / (2.0 * qa)]
            }
        };
        let pos: Vec<f64> = roots.into_iter().filter(|r| *r > 0.0).collect();
        if pos.is_empty() {
            Case3Branch::NoPositiveRoot
        } else {
            Case3Branch::K1ForcedConstant { roots: pos }
        }
    };
    Case3Report { coefficients, branch }
}

#[derive(Debug, Clone, Serialize)]
pub struct Case4Report {
    pub beta_constant: bool,
    pub beta_spread: f64,
    pub cos_beta_mean: f64,
    /// `sin beta = 0`: belongs to the Case III analysis.
    pub routed_to_case3: bool,
    pub weight_power_spread: f64,
    pub c2: f64,
    pub c2_spread: f64,
    pub lambda: Option<LambdaConstants>,
    pub ode_residual: f64,
    /// Max `| |k2 k3| - |rhs| |`.
    pub k2k3_residual: f64,
    /// Sign of `-(c - s) p2 p4`, the sign `k2 k3` must have for the fourth condition.
    pub k2k3_sign: f64,
    pub mu_mid: Option<f64>,
    pub bb1_residual: Option<f64>,
    pub mu_ode_residual: Option<f64>,
    pub satisfied: bool,
}

/// Cumulative integral on a (possibly non-uniform) grid, integrating the
/// quadratic through three neighbouring nodes over each interval.
pub fn cumulative_integral(ts: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = ts.len();
    let mut out = vec![0.0; n];
    if n < 3 {
        for i in 1..n {
            out[i] = out[i - 1] + 0.5 * (ts[i] - ts[i - 1]) * (ys[i] + ys[i - 1]);
        }
        return out;
    }
    for i in 0..n - 1 {
        let j = if i + 2 < n { i } else { i - 1 };
        let (x0, x1, x2) = (ts[j], ts[j + 1], ts[j + 2]);
        let (y0, y1, y2) = (ys[j], ys[j + 1], ys[j + 2]);
        let d1 = (y1 - y0) / (x1 - x0);
        let d2 = ((y2 - y1) / (x2 - x1) - d1) / (x2 - x0);
        // p(x) = y0 + d1 (x - x0) + d2 (x - x0)(x - x1)
        let prim = |x: f64| {
            let u = x - x0;
            y0 * u + d1 * u * u / 2.0 + d2 * (u * u * u / 3.0 - (x1 - x0) * u * u / 2.0)
        };
        out[i + 1] = out[i] + prim(ts[i + 1]) - prim(ts[i]);
    }
    out
}

pub fn case4_checker(sc: &ScalarCurve, tol: &BiharmonicTolerances) -> Result<Case4Report, BiharmonicError> {
    let (c, s) = (sc.consts.c, sc.consts.s);
    let oma = sc.one_minus_a();
    if oma <= 0.0 {
        return Err(BiharmonicError::Invalid("phi T vanishes (a = 1)".into()));
    }
    let root = oma.sqrt();
    let cos_beta: Vec<f64> = sc.p2.iter().map(|p| (p.value() / root).clamp(-1.0, 1.0)).collect();
    let betas: Vec<f64> = cos_beta.iter().map(|x| x.acos()).collect();
    let beta_spread = spread(&betas);
    let beta_constant = beta_spread < tol.beta_constancy;
    let cb = mean(&cos_beta);
    let wps = weight_power_spread(sc);
    let ratios: Vec<f64> = sc.k2.iter().zip(&sc.k1).map(|(a, b)| a.value() / b.value()).collect();
    let c2 = mean(&ratios);
    let c2_spread = spread(&ratios);
    let k2k3_sign = {
        let i = sc.len() / 2;
        let v = -(c - s) * sc.p2[i].value() * sc.p4[i];
        if v >= 0.0 {
            1.0
        } else {
            -1.0
        }
    };
    let mut rep = Case4Report {
        beta_constant,
        beta_spread,
        cos_beta_mean: cb,
        routed_to_case3: false,
        weight_power_spread: wps,
        c2,
        c2_spread,
        lambda: None,
        ode_residual: f64::NAN,
        k2k3_residual: 0.0,
        k2k3_sign,
        mu_mid: None,
        bb1_residual: None,
        mu_ode_residual: None,
        satisfied: false,
    };
    if beta_constant {
        if (1.0 - cb * cb).abs() < 1e-12 {
            rep.routed_to_case3 = true;
            return Ok(rep);
        }
        let lam = odesol::lambda_constants(sc.a, sc.b, sc.consts, CaseLabel::IV, Some(cb))
            .map_err(|e| BiharmonicError::Invalid(e.to_string()))?;
        rep.lambda = Some(lam);
        rep.ode_residual = k1_ode_residual(sc, c2, lam)?;
        let beta = cb.acos();
        let rhs = (3.0 * (c - s) * (2.0 * beta).sin() / 8.0 * oma).abs();
        rep.k2k3_residual = sc
            .k2
            .iter()
            .zip(&sc.k3)
            .map(|(a, b)| ((a.value() * b.value()).abs() - rhs).abs())
            .fold(0.0, f64::max);
        rep.satisfied = c2_spread < tol.ratio_constancy
            && rep.ode_residual < tol.residual
            && rep.k2k3_residual < tol.residual
            && wps < tol.residual;
        return Ok(rep);
    }
    // Non-constant beta: mu(t) = -(3(c-s)/2)(1-a) int cos^2 beta k1'/k1^3 dt,
    // constant fixed by k2^2 = -(3(c-s)/4)(1-a) cos^2 beta + mu k1^2 at the midpoint.
    let integrand: Vec<f64> = (0..sc.len())
        .map(|i| {
            let k = sc.k1[i];
            Ok(cos_beta[i].powi(2) * d(&k, 1)? / k.value().powi(3))
        })
        .collect::<Result<_, BiharmonicError>>()?;
    let cum = cumulative_integral(&sc.ts, &integrand);
    let mid = sc.len() / 2;
    let q = 3.0 * (c - s) / 4.0 * oma;
    let k1m = sc.k1[mid].value();
    let mu_mid = (sc.k2[mid].value().powi(2) + q * cos_beta[mid].powi(2)) / (k1m * k1m);
    let mu: Vec<f64> = cum.iter().map(|v| mu_mid - 2.0 * q * (v - cum[mid])).collect();
    let mut bb1: f64 = 0.0;
    let mut mu_ode: f64 = 0.0;
    let mut k2k3: f64 = 0.0;
    for i in 0..sc.len() {
        let k1 = sc.k1[i].value();
        let k2 = sc.k2[i].value();
        bb1 = bb1.max((k2 * k2 + q * cos_beta[i].powi(2) - mu[i] * k1 * k1).abs());
        let bracket = sc.b * sc.b + (c + 3.0 * s) / 4.0 * oma + 2.0 * q * cos_beta[i].powi(2);
        let (k1p, k1pp) = (d(&sc.k1[i], 1)?, d(&sc.k1[i], 2)?);
        let lhs = 3.0 * k1p * k1p - 2.0 * k1 * k1pp;
        let rhs = 4.0 * k1 * k1 * ((1.0 + mu[i]) * k1 * k1 - bracket);
        mu_ode = mu_ode.max((lhs - rhs).abs());
        let beta = betas[i];
        let w = sc.p4[i].abs().atan2(sc.p3[i].abs());
        let target = (3.0 * (c - s) * (2.0 * beta).sin() * w.sin() / 8.0 * oma).abs();
        k2k3 = k2k3.max(((k2 * sc.k3[i].value()).abs() - target).abs());
    }
    rep.mu_mid = Some(mu_mid);
    rep.bb1_residual = Some(bb1);
    rep.mu_ode_residual = Some(mu_ode);
    rep.k2k3_residual = k2k3;
    rep.satisfied = bb1 < tol.residual && mu_ode < tol.residual && k2k3 < tol.residual && wps < tol.residual;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{self, frenet_apparatus, uniform_grid, DEFAULT_THRESHOLD};
    use crate::manifold::ModelParams;
    use crate::slant::contact_angles;

    fn constant_jets(n: usize, v: f64) -> Vec<Jet> {
        vec![Jet::constant(v); n]
    }

    /// Helix with `c = s = 1`, `(1 + c2^2) k1^2 = b^2 + s(1-a)`, `k3 = 0`.
    fn case1_helix(f: Vec<Jet>) -> ScalarCurve {
        let (a, b, s) = (0.5, 0.5f64.sqrt(), 1.0);
        let c2 = 0.5;
        let k1 = ((b * b + s * (1.0 - a)) / (1.0 + c2 * c2)).sqrt();
        let n = f.len();
        let oma: f64 = 1.0 - a;
        ScalarCurve {
            consts: SpaceConstants { c: 1.0, s },
            a,
            b,
            ts: uniform_grid(0.0, 1.0, 1.0 / (n - 1) as f64),
            k1: constant_jets(n, k1),
            k2: constant_jets(n, c2 * k1),
            k3: constant_jets(n, 0.0),
            p2: constant_jets(n, 0.3 * oma.sqrt()),
            p3: vec![0.4 * oma.sqrt(); n],
            p4: vec![(1.0f64 - 0.25).sqrt() * oma.sqrt(); n],
            f,
        }
    }

    #[test]
    fn hypothetical_case1_helix_is_biharmonic_not_proper() {
        let sc = case1_helix(constant_jets(11, 2.0));
        let tol = BiharmonicTolerances::default();
        let sum = check_scalar_conditions(&sc, &tol, false, true).unwrap();
        assert!(sum.residuals.max() < 1e-12, "{:?}", sum.residuals);
        assert_eq!(sum.verdict, Verdict::Biharmonic);
        assert_eq!(sum.case.label, CaseLabel::I);
        let rep = case1_case2_checker(&sc, CaseLabel::I, &tol, None).unwrap();
        assert!(rep.ode_residual < 1e-12 && rep.f_constant);
        assert!((rep.lambda.lambda - 1.0).abs() < 1e-15);
    }

    #[test]
    fn non_constant_weight_breaks_first_condition() {
        let ts = uniform_grid(0.0, 1.0, 0.1);
        let f: Vec<Jet> = ts.iter().map(|t| Jet::variable(*t) + 2.0).collect();
        let sc = case1_helix(f);
        let sum = check_scalar_conditions(&sc, &BiharmonicTolerances::default(), false, true).unwrap();
        assert!(sum.residuals.eq1 > 0.1);
        assert_eq!(sum.verdict, Verdict::None);
    }

    #[test]
    fn legendre_circle_bitension() {
        let p = ModelParams::new(2, 2).unwrap();
        let tr = curve::legendre_circle(p, 2.0, uniform_grid(0.0, 1.0, 0.05)).unwrap();
        let fd = frenet_apparatus(&tr, 6, DEFAULT_THRESHOLD).unwrap();
        let prof = contact_angles(&tr);
        let w = WeightFunction::Explicit(constant_jets(tr.len(), 1.0));
        let rep = check_conditions(&tr, &fd, &prof, &w, &BiharmonicTolerances::default()).unwrap();
        assert_eq!(rep.case.label, CaseLabel::II);
        assert!(rep.tau.tau2_cross_residual < 1e-12);
        assert!(rep.tau.tau3_minus_tau2 < 1e-12);
        // Flat totally geodesic slice: tau2 = -k1^3 V2 + k1 (c+3s)/4 V2 with b = 0, a = 0.
        let k1: f64 = 1.0;
        let expected = (-k1.powi(3) + k1 * (p.c() + 3.0 * p.s() as f64) / 4.0).abs();
        assert!((rep.tau.tau2_max_norm - expected).abs() < 1e-12);
    }

    #[test]
    fn geodesic_is_harmonic() {
        let p = ModelParams::new(2, 2).unwrap();
        let tr = curve::geodesic(p, uniform_grid(0.0, 1.0, 0.1)).unwrap();
        let fd = frenet_apparatus(&tr, 6, DEFAULT_THRESHOLD).unwrap();
        let prof = contact_angles(&tr);
        let ts = tr.ts.clone();
        let w = WeightFunction::from_fn(&ts, |t| t * t + 1.0);
        let rep = check_conditions(&tr, &fd, &prof, &w, &BiharmonicTolerances::default()).unwrap();
        assert_eq!(rep.verdict, Verdict::HarmonicGeodesic);
        assert!(rep.tau.tau3_max_norm < 1e-14);
    }

    #[test]
    fn case3_grid_always_contradicts() {
        for i in 1..10 {
            let a = i as f64 / 10.0;
            for b in [-1.0, -0.3, 0.0, 0.4, 1.2] {
                for eps in [-1.0, 1.0] {
                    for c2 in [0.0, 0.5, 2.0] {
                        let r = case3_obstruction(a, b, c2, eps, 2.0);
                        assert!(r.branch.is_contradiction());
                    }
                }
            }
        }
        assert_eq!(case3_obstruction(1.0, 0.0, 1.0, 1.0, 1.0).branch, Case3Branch::Geodesic);
        let r = case3_obstruction(0.25, 0.5, 1.0, 1.0, 2.0);
        assert!(matches!(r.branch, Case3Branch::K1ForcedConstant { .. }));
    }

    #[test]
    fn cumulative_integral_is_accurate() {
        let ts = uniform_grid(0.0, 2.0, 0.01);
        let ys: Vec<f64> = ts.iter().map(|t| t.cos()).collect();
        let cum = cumulative_integral(&ts, &ys);
        for (t, v) in ts.iter().zip(&cum) {
            assert!((v - t.sin()).abs() < 1e-7);
        }
    }

    #[test]
    fn classification_ignores_frame_signs() {
        let mut sc = case1_helix(constant_jets(5, 1.0));
        sc.consts = SpaceConstants { c: -6.0, s: 2.0 };
        let tol = BiharmonicTolerances::default();
        let before = classify_case(&sc, &tol);
        for p in sc.p2.iter_mut() {
            *p = -*p;
        }
        for p in sc.p3.iter_mut() {
            *p = -*p;
        }
        let after = classify_case(&sc, &tol);
        assert_eq!(before.label, after.label);
        assert_eq!(before.case_ii_metric, after.case_ii_metric);
    }
}
