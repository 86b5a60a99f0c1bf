//! The autonomous ODE `3(y')^2 - 2 y y'' = 4 y^2 [(1 + c2^2) y^2 - eps lambda^2]`
//! and its closed-form candidate solutions `y = (±sqrt(N) + M) / D`.
//!
//! Closed forms are candidates: every evaluation can be paired with the ODE
//! residual, and an RK4 integrator provides an independent reference.

use serde::Serialize;
use thiserror::Error;

use crate::biharmonic::{CaseLabel, WeightFunction};
use crate::jet::{Jet, Scalar};
use crate::manifold::SpaceConstants;

pub const POLE_TOL: f64 = 1e-3;
/// Brackets with `|b^2 + ...| <= BRACKET_ZERO_TOL` count as `eps = 0`.
pub const BRACKET_ZERO_TOL: f64 = 1e-12;

pub const GRID_C2: [f64; 3] = [0.0, 1.0, 2.0];
pub const GRID_C3: [f64; 3] = [1.0, 4.0, 10.0];
pub const GRID_C4: [f64; 3] = [-1.0, 0.0, 1.0];
pub const GRID_LAMBDA: [f64; 3] = [0.5, 1.0, 2.0];

#[derive(Debug, Error, Clone, PartialEq, Serialize)]
pub enum OdeError {
    #[error("N = {n:.3e} < 0 at t = {t}: square root is not real")]
    NegativeRadicand { t: f64, n: f64 },
    #[error("D = {d:.3e} is within the pole tolerance at t = {t}")]
    Pole { t: f64, d: f64 },
    #[error("cos u = {cos_u:.3e} is within the pole tolerance at t = {t}")]
    SecantSingularity { t: f64, cos_u: f64 },
    #[error("invalid parameters: {0}")]
    InvalidSpec(String),
    #[error("function must be positive, found {value} at t = {t}")]
    NonPositive { t: f64, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn factor(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Which of the three closed-form families applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LemmaCase {
    /// `eps = +1`, `lambda > 0`: secant family.
    Trigonometric,
    /// `eps = -1`, `lambda > 0`: hyperbolic secant family.
    Hyperbolic,
    /// `eps = 0` or `lambda = 0`: rational family.
    Rational,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OdeSolutionSpec {
    pub epsilon: i8,
    pub lambda: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub branch: Sign,
}

impl OdeSolutionSpec {
    pub fn new(epsilon: i8, lambda: f64, c2: f64, c3: f64, c4: f64, branch: Sign) -> Result<Self, OdeError> {
        if !matches!(epsilon, -1..=1) {
            return Err(OdeError::InvalidSpec(format!("epsilon must be -1, 0 or 1, got {epsilon}")));
        }
        if !(lambda >= 0.0) {
            return Err(OdeError::InvalidSpec(format!("lambda must be >= 0, got {lambda}")));
        }
        if !(c2 >= 0.0) {
            return Err(OdeError::InvalidSpec(format!("c2 must be >= 0, got {c2}")));
        }
        if !(c3.is_finite() && c4.is_finite()) {
            return Err(OdeError::InvalidSpec("c3 and c4 must be finite".into()));
        }
        Ok(OdeSolutionSpec { epsilon, lambda, c2, c3, c4, branch })
    }

    /// Rational family with `eps = 0`.
    pub fn rational(c2: f64, c3: f64, c4: f64) -> Self {
        OdeSolutionSpec { epsilon: 0, lambda: 0.0, c2, c3, c4, branch: Sign::Plus }
    }

    pub fn case(&self) -> LemmaCase {
        if self.epsilon == 0 || self.lambda == 0.0 {
            LemmaCase::Rational
        } else if self.epsilon > 0 {
            LemmaCase::Trigonometric
        } else {
            LemmaCase::Hyperbolic
        }
    }

    /// `eps lambda^2`.
    pub fn bracket(&self) -> f64 {
        self.epsilon as f64 * self.lambda * self.lambda
    }

    /// The rational family with `c3 = 0` collapses to `y = 0`.
    pub fn is_degenerate(&self) -> bool {
        self.case() == LemmaCase::Rational && self.c3 == 0.0
    }

    /// Constant solution `lambda / sqrt(1 + c2^2)` of the `eps = +1` equation.
    pub fn constant_solution(&self) -> f64 {
        self.lambda / (1.0 + self.c2 * self.c2).sqrt()
    }
}

/// `N`, `M`, `D` and `cos u` at parameter `t`, exactly as the closed forms state them.
#[derive(Debug, Clone, Copy)]
pub struct LemmaTerms<S> {
    pub n: S,
    pub m: S,
    pub d: S,
    pub cos_u: Option<f64>,
}

pub fn lemma_terms<S: LemmaScalar>(spec: &OdeSolutionSpec, t: S) -> LemmaTerms<S> {
    let (l, c2, c3, c4) = (spec.lambda, spec.c2, spec.c3, spec.c4);
    let p = 1.0 + c2 * c2;
    match spec.case() {
        LemmaCase::Trigonometric => {
            let u = t.scale(2.0 * l) + S::cst(c4);
            let c = u.cos_();
            let sec2 = (c * c).recip_();
            let n = sec2.scale(l * l) * (sec2.scale(-(p + c3 * c3)) + S::cst(p - c3 * c3));
            let m = sec2.scale(l * c3);
            let d = sec2.scale(p) - S::cst(p - c3 * c3);
            LemmaTerms { n, m, d, cos_u: Some(c.value()) }
        }
        LemmaCase::Hyperbolic => {
            let u = t.scale(2.0 * l) + S::cst(c4);
            let c = u.cosh_();
            let sech2 = (c * c).recip_();
            let q = p + c3 * c3;
            let n = sech2.scale(l * l) * (sech2.scale(q) - S::cst(q));
            let m = sech2.scale(l * c3);
            let d = sech2.scale(p) - S::cst(q);
            LemmaTerms { n, m, d, cos_u: None }
        }
        LemmaCase::Rational => {
            let c3s = c3 * c3;
            let d = t * t.scale(c3s) + t.scale(2.0 * c3s * c4) + S::cst(c3s * c4 * c4 + 16.0 * c2 * c2 + 16.0);
            LemmaTerms { n: S::zero(), m: S::cst(4.0 * c3), d, cos_u: None }
        }
    }
}

/// Scalars supporting the transcendental functions the closed forms need.
pub trait LemmaScalar: Scalar {
    fn cos_(self) -> Self;
    fn cosh_(self) -> Self;
    fn recip_(self) -> Self;
}

impl LemmaScalar for f64 {
    fn cos_(self) -> Self {
        self.cos()
    }
    fn cosh_(self) -> Self {
        self.cosh()
    }
    fn recip_(self) -> Self {
        1.0 / self
    }
}

impl LemmaScalar for Jet {
    fn cos_(self) -> Self {
        self.cos()
    }
    fn cosh_(self) -> Self {
        self.sinh_cosh().1
    }
    fn recip_(self) -> Self {
        self.recip()
    }
}

/// Evaluates `y = (±sqrt(N) + M) / D` at `t`, or reports why it is not a real number.
pub fn k1_closed_form_at<S: LemmaScalar>(spec: &OdeSolutionSpec, t: S) -> Result<S, OdeError> {
    let tv = t.value();
    let terms = lemma_terms(spec, t);
    if let Some(c) = terms.cos_u {
        if c.abs() < POLE_TOL {
            return Err(OdeError::SecantSingularity { t: tv, cos_u: c });
        }
    }
    let nv = terms.n.value();
    let scale = terms.m.value().powi(2).max(1e-300);
    if nv < 0.0 && nv.abs() > 1e-14 * scale {
        return Err(OdeError::NegativeRadicand { t: tv, n: nv });
    }
    let dv = terms.d.value();
    if dv.abs() < POLE_TOL {
        return Err(OdeError::Pole { t: tv, d: dv });
    }
    let root = if spec.case() == LemmaCase::Rational || nv <= 0.0 {
        S::zero()
    } else {
        terms.n.sqrt().scale(spec.branch.factor())
    };
    Ok((root + terms.m) / terms.d)
}

pub fn k1_closed_form(spec: &OdeSolutionSpec, t: f64) -> Result<f64, OdeError> {
    k1_closed_form_at(spec, t)
}

/// Jet of the closed form in the local parameter at `t`.
pub fn k1_closed_form_jet(spec: &OdeSolutionSpec, t: f64) -> Result<Jet, OdeError> {
    k1_closed_form_at(spec, Jet::variable(t))
}

/// `3(y')^2 - 2 y y'' - 4 y^2 [(1 + c2^2) y^2 - eps lambda^2]` at a point.
pub fn residual_at(spec: &OdeSolutionSpec, y: f64, yp: f64, ypp: f64) -> f64 {
    3.0 * yp * yp - 2.0 * y * ypp - 4.0 * y * y * ((1.0 + spec.c2 * spec.c2) * y * y - spec.bracket())
}

#[derive(Debug, Clone, Serialize)]
pub struct ResidualReport {
    pub max_abs: f64,
    pub worst_t: f64,
    pub evaluated: usize,
    pub skipped: usize,
}

/// Max absolute ODE residual of a function given as a jet map over a grid.
/// Points where the function is undefined are skipped and counted.
pub fn ode_residual<F>(spec: &OdeSolutionSpec, ts: &[f64], y: F) -> ResidualReport
where
    F: Fn(Jet) -> Result<Jet, OdeError>,
{
    let mut rep = ResidualReport { max_abs: 0.0, worst_t: f64::NAN, evaluated: 0, skipped: 0 };
    for &t in ts {
        match y(Jet::variable(t)) {
            Ok(j) => match (j.deriv(0), j.deriv(1), j.deriv(2)) {
                (Some(a), Some(b), Some(c)) => {
                    let r = residual_at(spec, a, b, c).abs();
                    rep.evaluated += 1;
                    if !(r <= rep.max_abs) {
                        rep.max_abs = r;
                        rep.worst_t = t;
                    }
                }
                _ => rep.skipped += 1,
            },
            Err(_) => rep.skipped += 1,
        }
    }
    rep
}

/// Pointwise status of the closed form over a grid.
#[derive(Debug, Clone, Serialize)]
pub struct DomainScan {
    pub points: usize,
    pub real: usize,
    pub negative_radicand: usize,
    pub poles: usize,
    /// Longest run of consecutive real samples.
    pub longest_real_run: usize,
    pub max_residual_on_real: f64,
    pub samples: Vec<DomainSample>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DomainSample {
    pub t: f64,
    pub y: Option<f64>,
    pub residual: Option<f64>,
    pub flag: &'static str,
}

pub fn domain_scan(spec: &OdeSolutionSpec, ts: &[f64]) -> DomainScan {
    let mut scan = DomainScan {
        points: ts.len(),
        real: 0,
        negative_radicand: 0,
        poles: 0,
        longest_real_run: 0,
        max_residual_on_real: 0.0,
        samples: Vec::with_capacity(ts.len()),
    };
    let mut run = 0;
    for &t in ts {
        let sample = match k1_closed_form_jet(spec, t) {
            Ok(j) => {
                let r = match (j.deriv(1), j.deriv(2)) {
                    (Some(b), Some(c)) => residual_at(spec, j.value(), b, c).abs(),
                    _ => f64::NAN,
                };
                scan.real += 1;
                if !(r <= scan.max_residual_on_real) {
                    scan.max_residual_on_real = r;
                }
                DomainSample { t, y: Some(j.value()), residual: Some(r), flag: "real" }
            }
            Err(OdeError::NegativeRadicand { .. }) => {
                scan.negative_radicand += 1;
                DomainSample { t, y: None, residual: None, flag: "negative-radicand" }
            }
            Err(_) => {
                scan.poles += 1;
                DomainSample { t, y: None, residual: None, flag: "pole" }
            }
        };
        run = if sample.y.is_some() { run + 1 } else { 0 };
        scan.longest_real_run = scan.longest_real_run.max(run);
        scan.samples.push(sample);
    }
    scan
}

/// `lambda` and `eps` read off a classification bracket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LambdaConstants {
    pub bracket: f64,
    pub epsilon: i8,
    pub lambda: f64,
}

impl LambdaConstants {
    pub fn from_bracket(bracket: f64) -> Self {
        let epsilon = if bracket.abs() <= BRACKET_ZERO_TOL {
            0
        } else if bracket > 0.0 {
            1
        } else {
            -1
        };
        let lambda = if epsilon == 0 { 0.0 } else { bracket.abs().sqrt() };
        LambdaConstants { bracket, epsilon, lambda }
    }
}

/// Case I: `b^2 + s(1-a)`; Case II: `b^2 + (c+3s)/4 (1-a)`;
/// Case IV: `b^2 + (c+3s+3(c-s)cos^2 beta)/4 (1-a)`. Case III has no ODE.
pub fn lambda_constants(
    a: f64,
    b: f64,
    consts: SpaceConstants,
    case: CaseLabel,
    cos_beta: Option<f64>,
) -> Result<LambdaConstants, OdeError> {
    let (c, s) = (consts.c, consts.s);
    let bracket = match case {
        CaseLabel::I => b * b + s * (1.0 - a),
        CaseLabel::II => b * b + (c + 3.0 * s) / 4.0 * (1.0 - a),
        CaseLabel::IV => {
            let cb = cos_beta.ok_or_else(|| OdeError::InvalidSpec("Case IV needs cos beta".into()))?;
            b * b + (c + 3.0 * s + 3.0 * (c - s) * cb * cb) / 4.0 * (1.0 - a)
        }
        CaseLabel::III => return Err(OdeError::InvalidSpec("Case III admits no curvature ODE".into())),
    };
    Ok(LambdaConstants::from_bracket(bracket))
}

/// `f = c1 k1^(-3/2)` from jets of `k1`.
pub fn f_from_k1(k1: &[(f64, Jet)], c1: f64) -> Result<WeightFunction, OdeError> {
    if !(c1 > 0.0) {
        return Err(OdeError::InvalidSpec(format!("c1 must be positive, got {c1}")));
    }
    let mut jets = Vec::with_capacity(k1.len());
    for (t, k) in k1 {
        if !(k.value() > 0.0) {
            return Err(OdeError::NonPositive { t: *t, value: k.value() });
        }
        jets.push(k.powf(-1.5) * c1);
    }
    Ok(WeightFunction::Explicit(jets))
}

/// `y''` solved from the ODE.
pub fn second_derivative(spec: &OdeSolutionSpec, y: f64, yp: f64) -> f64 {
    (3.0 * yp * yp - 4.0 * y * y * ((1.0 + spec.c2 * spec.c2) * y * y - spec.bracket())) / (2.0 * y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum StepControl {
    Fixed { step: f64 },
    /// Step doubling with local error tolerance.
    Adaptive { initial_step: f64, tol: f64 },
}

#[derive(Debug, Clone, Serialize)]
pub struct OracleSolution {
    pub ts: Vec<f64>,
    pub ys: Vec<f64>,
    pub yps: Vec<f64>,
    /// Window actually covered when the solution left `y > 0` or blew up.
    pub truncated: Option<(f64, f64)>,
}

impl OracleSolution {
    /// Linear interpolation of `y` at `t` inside the covered window.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        let i = self.ts.partition_point(|x| *x < t);
        if i < self.ts.len() && self.ts[i] == t {
            return Some(self.ys[i]);
        }
        if i == 0 || i >= self.ts.len() {
            return None;
        }
        let w = (t - self.ts[i - 1]) / (self.ts[i] - self.ts[i - 1]);
        Some(self.ys[i - 1] * (1.0 - w) + self.ys[i] * w)
    }
}

const BLOWUP: f64 = 1e8;

fn rk4_step(spec: &OdeSolutionSpec, y: f64, yp: f64, h: f64) -> (f64, f64) {
    let f = |y: f64, yp: f64| (yp, second_derivative(spec, y, yp));
    let (a1, b1) = f(y, yp);
    let (a2, b2) = f(y + 0.5 * h * a1, yp + 0.5 * h * b1);
    let (a3, b3) = f(y + 0.5 * h * a2, yp + 0.5 * h * b2);
    let (a4, b4) = f(y + h * a3, yp + h * b3);
    (
        y + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4),
        yp + h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4),
    )
}

fn healthy(y: f64, yp: f64) -> bool {
    y > 0.0 && y.is_finite() && yp.is_finite() && y.abs() < BLOWUP && yp.abs() < BLOWUP
}

/// Integrates from `t_end`-ward; returns (ts, ys, yps, stopped_early).
fn sweep(
    spec: &OdeSolutionSpec,
    t0: f64,
    y0: f64,
    yp0: f64,
    t_end: f64,
    control: StepControl,
) -> (Vec<f64>, Vec<f64>, Vec<f64>, bool) {
    let dir = if t_end >= t0 { 1.0 } else { -1.0 };
    let (mut t, mut y, mut yp) = (t0, y0, yp0);
    let (mut ts, mut ys, mut yps) = (vec![t], vec![y], vec![yp]);
    let span = (t_end - t0).abs();
    match control {
        StepControl::Fixed { step } => {
            let n = (span / step).round() as usize;
            let h = if n == 0 { 0.0 } else { dir * span / n as f64 };
            for i in 1..=n {
                let (ny, nyp) = rk4_step(spec, y, yp, h);
                if !healthy(ny, nyp) {
                    return (ts, ys, yps, true);
                }
                y = ny;
                yp = nyp;
                t = t0 + h * i as f64;
                ts.push(t);
                ys.push(y);
                yps.push(yp);
            }
        }
        StepControl::Adaptive { initial_step, tol } => {
            let mut h = initial_step.abs();
            while (t_end - t) * dir > 1e-14 * (1.0 + span) {
                h = h.min((t_end - t).abs());
                let (y1, yp1) = rk4_step(spec, y, yp, dir * h);
                let (ym, ypm) = rk4_step(spec, y, yp, dir * h * 0.5);
                let (y2, yp2) = rk4_step(spec, ym, ypm, dir * h * 0.5);
                let err = ((y2 - y1).abs() + (yp2 - yp1).abs()) / 15.0;
                if !(healthy(y2, yp2) && healthy(ym, ypm)) || !err.is_finite() {
                    if h < 1e-12 {
                        return (ts, ys, yps, true);
                    }
                    h *= 0.5;
                    continue;
                }
                if err > tol {
                    if h < 1e-12 {
                        return (ts, ys, yps, true);
                    }
                    h *= 0.5;
                    continue;
                }
                t += dir * h;
                // Richardson-corrected value.
                y = y2 + (y2 - y1) / 15.0;
                yp = yp2 + (yp2 - yp1) / 15.0;
                ts.push(t);
                ys.push(y);
                yps.push(yp);
                if err < tol / 32.0 {
                    h *= 2.0;
                }
            }
        }
    }
    (ts, ys, yps, false)
}

/// RK4 solution through `(t_init, y0, y0')` over `window`, both directions.
pub fn numeric_solution_oracle(
    spec: &OdeSolutionSpec,
    t_init: f64,
    y0: f64,
    y0prime: f64,
    window: (f64, f64),
    control: StepControl,
) -> Result<OracleSolution, OdeError> {
    if !(y0 > 0.0) {
        return Err(OdeError::NonPositive { t: t_init, value: y0 });
    }
    let (a, b) = window;
    if !(a <= t_init && t_init <= b) {
        return Err(OdeError::InvalidSpec(format!("t_init {t_init} outside [{a}, {b}]")));
    }
    let (bt, by, byp, bstop) = sweep(spec, t_init, y0, y0prime, a, control);
    let (ft, fy, fyp, fstop) = sweep(spec, t_init, y0, y0prime, b, control);
    let mut ts: Vec<f64> = bt.iter().rev().cloned().collect();
    let mut ys: Vec<f64> = by.iter().rev().cloned().collect();
    let mut yps: Vec<f64> = byp.iter().rev().cloned().collect();
    ts.extend_from_slice(&ft[1..]);
    ys.extend_from_slice(&fy[1..]);
    yps.extend_from_slice(&fyp[1..]);
    let truncated = if bstop || fstop { Some((ts[0], *ts.last().unwrap())) } else { None };
    Ok(OracleSolution { ts, ys, yps, truncated })
}

/// Endpoint error ratio `e(h) / e(h/2)` against a solution at `h/32`.
pub fn convergence_ratio(spec: &OdeSolutionSpec, y0: f64, yp0: f64, t_end: f64, h: f64) -> f64 {
    let end = |step: f64| {
        let (_, ys, _, _) = sweep(spec, 0.0, y0, yp0, t_end, StepControl::Fixed { step });
        *ys.last().unwrap()
    };
    let reference = end(h / 32.0);
    (end(h) - reference).abs() / (end(h / 2.0) - reference).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::uniform_grid;

    #[test]
    fn rational_family_reproduces_example_curvature() {
        let spec = OdeSolutionSpec::rational(1.0, 4.0, 0.0);
        for t in uniform_grid(-2.0, 2.0, 0.01) {
            let y = k1_closed_form(&spec, t).unwrap();
            assert!((y - 1.0 / (2.0 + t * t)).abs() < 1e-15);
        }
        let rep = ode_residual(&spec, &uniform_grid(-2.0, 2.0, 0.01), |t| k1_closed_form_at(&spec, t));
        assert!(rep.max_abs < 1e-12 && rep.skipped == 0);
    }

    #[test]
    fn degenerate_and_pole_cases() {
        let spec = OdeSolutionSpec::rational(1.0, 0.0, 0.0);
        assert!(spec.is_degenerate());
        assert_eq!(k1_closed_form(&spec, 0.3).unwrap(), 0.0);
        // Secant family with c3 = 0 at u = 0: N = M = D = 0.
        let spec = OdeSolutionSpec::new(1, 1.0, 0.5, 0.0, 0.0, Sign::Plus).unwrap();
        let terms = lemma_terms(&spec, 0.0);
        assert_eq!((terms.n, terms.m), (0.0, 0.0));
        assert!(terms.d.abs() < 1e-15);
        assert!(matches!(k1_closed_form(&spec, 0.0), Err(OdeError::Pole { .. })));
        // u = pi/2 is a secant singularity.
        let t = std::f64::consts::FRAC_PI_4;
        assert!(matches!(k1_closed_form(&spec, t), Err(OdeError::SecantSingularity { .. })));
    }

    #[test]
    fn literal_secant_and_sech_families_are_not_real() {
        for eps in [1i8, -1] {
            for &l in &GRID_LAMBDA {
                for &c3 in &GRID_C3 {
                    let spec = OdeSolutionSpec::new(eps, l, 1.0, c3, 0.3, Sign::Plus).unwrap();
                    let scan = domain_scan(&spec, &uniform_grid(-2.0, 2.0, 0.01));
                    // N = 0 can hold at an isolated point (u = 0 for sech), never on an interval.
                    assert!(scan.longest_real_run <= 1, "eps={eps} lambda={l} c3={c3}");
                    assert!(scan.negative_radicand + scan.poles >= scan.points - 2);
                }
            }
        }
    }

    #[test]
    fn residual_negative_control() {
        let spec = OdeSolutionSpec::rational(0.0, 1.0, 0.0);
        for t in [0.0, 0.5, 1.0, 1.5] {
            let rep = ode_residual(&spec, &[t], |t| Ok(t));
            assert!((rep.max_abs - (3.0 - 4.0 * t.powi(4)).abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_solution_of_secant_equation() {
        let spec = OdeSolutionSpec::new(1, 2.0, 1.0, 1.0, 0.0, Sign::Plus).unwrap();
        let y0 = spec.constant_solution();
        assert_eq!(residual_at(&spec, y0, 0.0, 0.0).abs() < 1e-14, true);
        let sol = numeric_solution_oracle(&spec, 0.0, y0, 0.0, (-2.0, 2.0), StepControl::Fixed { step: 0.01 }).unwrap();
        assert!(sol.ys.iter().all(|y| (y - y0).abs() < 1e-12));
    }

    #[test]
    fn oracle_matches_rational_closed_form() {
        let spec = OdeSolutionSpec::rational(1.0, 4.0, 0.0);
        for control in [StepControl::Fixed { step: 1e-3 }, StepControl::Adaptive { initial_step: 0.05, tol: 1e-12 }] {
            let sol = numeric_solution_oracle(&spec, 0.0, 0.5, 0.0, (-2.0, 2.0), control).unwrap();
            assert!(sol.truncated.is_none());
            for (t, y) in sol.ts.iter().zip(&sol.ys) {
                assert!((y - 1.0 / (2.0 + t * t)).abs() < 1e-6, "{control:?} t={t}");
            }
        }
        let r = convergence_ratio(&spec, 0.5, 0.0, 2.0, 0.1);
        assert!((r - 16.0).abs() < 3.0, "ratio {r}");
    }

    #[test]
    fn oracle_reports_blowup() {
        // A small start with steep positive slope escapes to infinity in finite time.
        let spec = OdeSolutionSpec::new(-1, 1.0, 0.0, 1.0, 0.0, Sign::Plus).unwrap();
        let sol = numeric_solution_oracle(&spec, 0.0, 0.1, 5.0, (0.0, 5.0), StepControl::Fixed { step: 1e-3 }).unwrap();
        let (_, end) = sol.truncated.expect("truncated");
        assert!(end < 5.0);
    }

    #[test]
    fn brackets_and_lambdas() {
        let consts = SpaceConstants { c: 1.0, s: 1.0 };
        let h = 0.5f64.sqrt();
        let l = lambda_constants(0.5, h, consts, CaseLabel::I, None).unwrap();
        assert_eq!(l.epsilon, 1);
        assert!((l.lambda - 1.0).abs() < 1e-15);
        let l = lambda_constants(1.0, 2.0, SpaceConstants { c: 2.0, s: 2.0 }, CaseLabel::I, None).unwrap();
        assert!((l.lambda - 2.0).abs() < 1e-15);
        let model = SpaceConstants { c: -6.0, s: 2.0 };
        let l = lambda_constants(0.25, 0.5, model, CaseLabel::IV, Some(2f64.sqrt() / 6.0)).unwrap();
        assert_eq!(l.epsilon, 0);
        assert_eq!(l.lambda, 0.0);
        assert!(l.bracket.abs() < 1e-15);
        assert!(lambda_constants(0.25, 0.5, model, CaseLabel::III, None).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(OdeSolutionSpec::new(2, 1.0, 0.0, 0.0, 0.0, Sign::Plus).is_err());
        assert!(OdeSolutionSpec::new(1, -1.0, 0.0, 0.0, 0.0, Sign::Plus).is_err());
        assert!(OdeSolutionSpec::new(1, 1.0, -0.5, 0.0, 0.0, Sign::Plus).is_err());
    }
}
