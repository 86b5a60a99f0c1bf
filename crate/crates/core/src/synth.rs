//! Curves built by integrating position and Frenet frame from prescribed
//! curvature functions, and the builtin six-dimensional example.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::curve::{self, CurveError, CurveTrace, FrenetData, TraceSource};
use crate::jet::{self, Jet, Scalar, MAX_ORDER};
use crate::manifold::{self, ModelParams};
use crate::odesol::{self, OdeSolutionSpec};

pub const DEFAULT_STEP: f64 = 1e-3;
pub const DEFAULT_DRIFT_TOL: f64 = 1e-6;
/// Derivative depth of the synthesized position jets.
pub const DEFAULT_DEPTH: usize = 6;
pub const ORTHONORMAL_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synthesis spec: {0}")]
    InvalidSpec(String),
    #[error("frame drift {drift:.3e} at t = {t} exceeds {tol:.1e}; reduce the step")]
    Drift { t: f64, drift: f64, tol: f64 },
    #[error("curvature k{index} = {value:.3e} is not positive at t = {t}")]
    CurvatureZero { index: usize, t: f64, value: f64 },
    #[error("integration produced a non-finite state at t = {0}")]
    NonFinite(f64),
    #[error("initial frame solve did not converge (residual {0:.3e})")]
    FrameSolve(f64),
    #[error(transparent)]
    Curve(#[from] CurveError),
}

/// A prescribed curvature function of the curve parameter.
#[derive(Clone)]
pub enum CurvatureFn {
    Constant(f64),
    /// `scale * 4 c3 / (c3^2 (t + c4)^2 + 16 c2^2 + 16)`.
    Rational { c2: f64, c3: f64, c4: f64, scale: f64 },
    /// `scale / (4 c3 / (c3^2 (t + c4)^2 + 16 c2^2 + 16))`.
    InverseRational { c2: f64, c3: f64, c4: f64, scale: f64 },
    Custom(Arc<dyn Fn(Jet) -> Jet + Send + Sync>),
}

impl std::fmt::Debug for CurvatureFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CurvatureFn::Constant(v) => write!(f, "Constant({v})"),
            CurvatureFn::Rational { c2, c3, c4, scale } => write!(f, "Rational({c2}, {c3}, {c4}, x{scale})"),
            CurvatureFn::InverseRational { c2, c3, c4, scale } => {
                write!(f, "InverseRational({c2}, {c3}, {c4}, x{scale})")
            }
            CurvatureFn::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl CurvatureFn {
    pub fn eval_jet(&self, t: Jet) -> Jet {
        match self {
            CurvatureFn::Constant(v) => Jet::constant(*v),
            CurvatureFn::Rational { c2, c3, c4, scale } => {
                let spec = OdeSolutionSpec::rational(*c2, *c3, *c4);
                let terms = odesol::lemma_terms(&spec, t);
                terms.m / terms.d * *scale
            }
            CurvatureFn::InverseRational { c2, c3, c4, scale } => {
                let spec = OdeSolutionSpec::rational(*c2, *c3, *c4);
                let terms = odesol::lemma_terms(&spec, t);
                terms.d / terms.m * *scale
            }
            CurvatureFn::Custom(f) => f(t),
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        self.eval_jet(Jet::constant(t)).value()
    }
}

#[derive(Debug, Clone)]
pub struct SynthesisSpec {
    pub params: ModelParams,
    pub t0: f64,
    pub p0: Vec<f64>,
    /// `V_1(t0)..V_r(t0)` in coordinate components.
    pub frame0: Vec<Vec<f64>>,
    /// `k_1..k_{r-1}`.
    pub curvatures: Vec<CurvatureFn>,
    pub window: (f64, f64),
    pub step: f64,
    /// Requested `cos theta_alpha`, checked against `eta_alpha(V_1(t0))`.
    pub target_cos_thetas: Option<Vec<f64>>,
    pub drift_tol: f64,
    pub depth: usize,
}

impl SynthesisSpec {
    pub fn order(&self) -> usize {
        self.frame0.len()
    }

    pub fn grid(&self) -> Vec<f64> {
        curve::uniform_grid(self.window.0, self.window.1, self.step)
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let params = &self.params;
        let n = params.dim();
        let bad = |s: String| Err(SynthError::InvalidSpec(s));
        if self.p0.len() != n {
            return bad(format!("initial point has {} coordinates, expected {n}", self.p0.len()));
        }
        let r = self.frame0.len();
        if r == 0 || r > n {
            return bad(format!("frame must have between 1 and {n} vectors, got {r}"));
        }
        if self.curvatures.len() + 1 != r {
            return bad(format!("{r} frame vectors need {} curvature functions, got {}", r - 1, self.curvatures.len()));
        }
        if self.frame0.iter().any(|v| v.len() != n) {
            return bad("frame vector with wrong dimension".into());
        }
        if !(self.step > 0.0) || !(self.window.1 > self.window.0) {
            return bad("window must be increasing and step positive".into());
        }
        if !(self.window.0 <= self.t0 && self.t0 <= self.window.1) {
            return bad(format!("t0 = {} outside the window", self.t0));
        }
        if self.depth == 0 || self.depth as i32 > MAX_ORDER {
            return bad(format!("depth must be in 1..={MAX_ORDER}"));
        }
        let orth = orthonormality_defect(params, &self.p0, &self.frame0);
        if orth > ORTHONORMAL_TOL {
            return bad(format!("initial frame is not orthonormal (defect {orth:.3e})"));
        }
        if let Some(cs) = &self.target_cos_thetas {
            if cs.len() != params.s() {
                return bad(format!("{} contact angles for s = {}", cs.len(), params.s()));
            }
            for (a, c) in cs.iter().enumerate() {
                let e = manifold::eta(params, a, &self.p0, &self.frame0[0]);
                if (e - c).abs() > ORTHONORMAL_TOL {
                    return bad(format!("eta_{}(V1) = {e} but cos theta = {c}", a + 1));
                }
            }
        }
        for t in self.grid() {
            for (j, k) in self.curvatures.iter().enumerate() {
                let v = k.eval(t);
                if !(v > 0.0) {
                    return Err(SynthError::CurvatureZero { index: j + 1, t, value: v });
                }
            }
        }
        Ok(())
    }
}

pub fn orthonormality_defect(params: &ModelParams, p: &[f64], frame: &[Vec<f64>]) -> f64 {
    let mut worst: f64 = 0.0;
    for a in 0..frame.len() {
        for b in 0..=a {
            let d = if a == b { 1.0 } else { 0.0 };
            worst = worst.max((manifold::inner(params, p, &frame[a], &frame[b]) - d).abs());
        }
    }
    worst
}

/// Modified Gram-Schmidt in the metric at `p`.
pub fn reorthonormalize(params: &ModelParams, p: &[f64], frame: &mut [Vec<f64>]) {
    for j in 0..frame.len() {
        for i in 0..j {
            let c = manifold::inner(params, p, &frame[j], &frame[i]);
            let (head, tail) = frame.split_at_mut(j);
            for (x, y) in tail[0].iter_mut().zip(&head[i]) {
                *x -= c * y;
            }
        }
        let l = manifold::norm(params, p, &frame[j]);
        for x in frame[j].iter_mut() {
            *x /= l;
        }
    }
}

/// Right-hand side of the Frenet system: `(gamma', V_j')`.
fn frenet_rhs<S: Scalar>(
    params: &ModelParams,
    ks: &[S],
    p: &[S],
    frame: &[Vec<S>],
) -> (Vec<S>, Vec<Vec<S>>) {
    let r = frame.len();
    let t = &frame[0];
    let dv = (0..r)
        .map(|j| {
            let g = manifold::christoffel_contract(params, p, t, &frame[j]);
            let mut out: Vec<S> = g.into_iter().map(|x| -x).collect();
            if j > 0 {
                for (o, v) in out.iter_mut().zip(&frame[j - 1]) {
                    *o -= ks[j - 1] * *v;
                }
            }
            if j + 1 < r {
                for (o, v) in out.iter_mut().zip(&frame[j + 1]) {
                    *o += ks[j] * *v;
                }
            }
            out
        })
        .collect();
    (t.clone(), dv)
}

struct State {
    p: Vec<f64>,
    frame: Vec<Vec<f64>>,
}

impl State {
    fn axpy(&self, h: f64, d: &(Vec<f64>, Vec<Vec<f64>>)) -> State {
        State {
            p: self.p.iter().zip(&d.0).map(|(a, b)| a + h * b).collect(),
            frame: self
                .frame
                .iter()
                .zip(&d.1)
                .map(|(v, dv)| v.iter().zip(dv).map(|(a, b)| a + h * b).collect())
                .collect(),
        }
    }

    fn finite(&self) -> bool {
        self.p.iter().chain(self.frame.iter().flatten()).all(|x| x.is_finite())
    }
}

fn rk4(spec: &SynthesisSpec, t: f64, y: &State, h: f64) -> State {
    let f = |t: f64, s: &State| {
        let ks: Vec<f64> = spec.curvatures.iter().map(|k| k.eval(t)).collect();
        frenet_rhs(&spec.params, &ks, &s.p, &s.frame)
    };
    let k1 = f(t, y);
    let k2 = f(t + h / 2.0, &y.axpy(h / 2.0, &k1));
    let k3 = f(t + h / 2.0, &y.axpy(h / 2.0, &k2));
    let k4 = f(t + h, &y.axpy(h, &k3));
    State {
        p: (0..y.p.len())
            .map(|i| y.p[i] + h / 6.0 * (k1.0[i] + 2.0 * k2.0[i] + 2.0 * k3.0[i] + k4.0[i]))
            .collect(),
        frame: (0..y.frame.len())
            .map(|j| {
                (0..y.p.len())
                    .map(|i| {
                        y.frame[j][i]
                            + h / 6.0 * (k1.1[j][i] + 2.0 * k2.1[j][i] + 2.0 * k3.1[j][i] + k4.1[j][i])
                    })
                    .collect()
            })
            .collect(),
    }
}

fn integrate_jet(j: Jet, c0: f64) -> Jet {
    let mut coeffs = [0.0; jet::JET_LEN];
    coeffs[0] = c0;
    for k in 1..jet::JET_LEN {
        coeffs[k] = j.taylor(k - 1) / k as f64;
    }
    Jet::from_taylor(&coeffs, j.order() + 1)
}

/// Taylor jets of position and frame at a node, by Picard iteration on jets
/// of the Frenet system.
fn taylor_jets(spec: &SynthesisSpec, t: f64, s: &State) -> (Vec<Jet>, Vec<Vec<Jet>>) {
    let cst = |v: f64| Jet::constant(v).with_order(0);
    let mut p: Vec<Jet> = s.p.iter().map(|v| cst(*v)).collect();
    let mut frame: Vec<Vec<Jet>> = s.frame.iter().map(|v| v.iter().map(|x| cst(*x)).collect()).collect();
    let tj = Jet::variable(t);
    let ks: Vec<Jet> = spec.curvatures.iter().map(|k| k.eval_jet(tj)).collect();
    for _ in 0..spec.depth {
        let (dp, dv) = frenet_rhs(&spec.params, &ks, &p, &frame);
        p = dp.iter().zip(&s.p).map(|(d, c)| integrate_jet(*d, *c)).collect();
        frame = dv
            .iter()
            .zip(&s.frame)
            .map(|(d, v)| d.iter().zip(v).map(|(a, c)| integrate_jet(*a, *c)).collect())
            .collect();
    }
    let p = p.into_iter().map(|j| j.with_order(spec.depth as i32)).collect();
    (p, frame)
}

#[derive(Debug, Clone, Serialize)]
pub struct SynthesisStats {
    pub steps: usize,
    /// Largest orthonormality defect before the per-step correction.
    pub max_drift: f64,
    /// Orthonormality defect of the stored frames.
    pub frame_orthonormality: f64,
    /// Max relative error of re-measured against prescribed curvatures.
    pub curvature_rel_error: f64,
    /// Max `g`-distance between integrated and re-measured frames.
    pub frame_deviation: f64,
    pub measured_order: usize,
}

#[derive(Debug, Clone)]
pub struct Synthesized {
    pub trace: CurveTrace,
    pub frenet: FrenetData,
    /// Integrated frames `frames[i][j]` in coordinates.
    pub frames: Vec<Vec<Vec<f64>>>,
    pub stats: SynthesisStats,
}

pub fn integrate_frenet_system(spec: &SynthesisSpec) -> Result<Synthesized, SynthError> {
    spec.validate()?;
    let params = &spec.params;
    let ts = spec.grid();
    let i0 = ts
        .iter()
        .position(|t| (t - spec.t0).abs() <= 1e-9 * (1.0 + spec.step))
        .ok_or_else(|| SynthError::InvalidSpec(format!("t0 = {} is not a grid node", spec.t0)))?;
    let mut states: Vec<Option<State>> = (0..ts.len()).map(|_| None).collect();
    let mut max_drift: f64 = 0.0;
    let start = State { p: spec.p0.clone(), frame: spec.frame0.clone() };
    let mut sweep = |range: Vec<usize>, states: &mut Vec<Option<State>>| -> Result<(), SynthError> {
        let mut prev = i0;
        let mut y = State { p: start.p.clone(), frame: start.frame.clone() };
        for i in range {
            let h = ts[i] - ts[prev];
            let mut next = rk4(spec, ts[prev], &y, h);
            if !next.finite() {
                return Err(SynthError::NonFinite(ts[i]));
            }
            let drift = orthonormality_defect(params, &next.p, &next.frame);
            max_drift = max_drift.max(drift);
            if drift > spec.drift_tol {
                return Err(SynthError::Drift { t: ts[i], drift, tol: spec.drift_tol });
            }
            reorthonormalize(params, &next.p, &mut next.frame);
            states[i] = Some(State { p: next.p.clone(), frame: next.frame.clone() });
            y = next;
            prev = i;
        }
        Ok(())
    };
    sweep((i0 + 1..ts.len()).collect(), &mut states)?;
    sweep((0..i0).rev().collect(), &mut states)?;
    states[i0] = Some(start);
    let states: Vec<State> = states.into_iter().map(|s| s.expect("every node visited")).collect();

    let mut jets = Vec::with_capacity(ts.len());
    for (t, s) in ts.iter().zip(&states) {
        jets.push(taylor_jets(spec, *t, s).0);
    }
    let trace = CurveTrace::from_jets(*params, ts.clone(), jets, TraceSource::Analytic)?;
    let max_order = (spec.order() + 1).min(params.dim());
    let frenet = curve::frenet_apparatus(&trace, max_order, curve::DEFAULT_THRESHOLD)?;

    let mut rel: f64 = 0.0;
    let mut dev: f64 = 0.0;
    let mut orth: f64 = 0.0;
    let n = params.dim();
    for (i, s) in states.iter().enumerate() {
        orth = orth.max(orthonormality_defect(params, &s.p, &s.frame));
        for (j, k) in spec.curvatures.iter().enumerate().take(frenet.order.saturating_sub(1)) {
            let want = k.eval(ts[i]);
            rel = rel.max((frenet.curvature(i, j + 1) - want).abs() / want.abs());
        }
        for j in 0..frenet.order.min(spec.order()) {
            let meas = frenet.frame(i, j + 1, n);
            let d: Vec<f64> = meas.iter().zip(&s.frame[j]).map(|(a, b)| a - b).collect();
            dev = dev.max(manifold::norm(params, &s.p, &d));
        }
    }
    if frenet.order < spec.order() {
        rel = f64::INFINITY;
    }
    let stats = SynthesisStats {
        steps: ts.len() - 1,
        max_drift,
        frame_orthonormality: orth,
        curvature_rel_error: rel,
        frame_deviation: dev,
        measured_order: frenet.order,
    };
    let frames = states.into_iter().map(|s| s.frame).collect();
    Ok(Synthesized { trace, frenet, frames, stats })
}

/// `max |z_a' - sum_i y_i x_i' - 2 cos theta_a|` along the trace, i.e. twice the
/// contact-angle deviation written in coordinates.
pub fn compatibility_residual(trace: &CurveTrace, cos_thetas: &[f64]) -> f64 {
    let params = &trace.params;
    let m = params.m();
    let mut worst: f64 = 0.0;
    for i in 0..trace.len() {
        let p = trace.point(i);
        let v = trace.velocity(i);
        let twist: f64 = (0..m).map(|k| p[m + k] * v[k]).sum();
        for (a, c) in cos_thetas.iter().enumerate() {
            worst = worst.max((v[2 * m + a] - twist - 2.0 * c).abs());
        }
    }
    worst
}

// ---------------------------------------------------------------------------
// Builtin specs

/// Geodesic through the origin along `xi_1`.
pub fn geodesic_spec(params: ModelParams, window: (f64, f64), step: f64) -> SynthesisSpec {
    let n = params.dim();
    SynthesisSpec {
        params,
        t0: window.0,
        p0: vec![0.0; n],
        frame0: vec![manifold::xi(&params, 0)],
        curvatures: vec![],
        window,
        step,
        target_cos_thetas: None,
        drift_tol: DEFAULT_DRIFT_TOL,
        depth: DEFAULT_DEPTH,
    }
}

/// Legendre circle of curvature `k1` in the `(y_1, y_2)` plane through
/// `y = (2/k1, 0)`; needs `m >= 2`.
pub fn circle_spec(params: ModelParams, k1: f64, window: (f64, f64), step: f64) -> Result<SynthesisSpec, SynthError> {
    if params.m() < 2 {
        return Err(SynthError::InvalidSpec("circle needs m >= 2".into()));
    }
    let m = params.m();
    let mut p0 = vec![0.0; params.dim()];
    p0[m] = 2.0 / k1;
    let v1 = manifold::frame_vector(&params, &p0, 1);
    let v2: Vec<f64> = manifold::frame_vector(&params, &p0, 0).iter().map(|x| -x).collect();
    Ok(SynthesisSpec {
        params,
        t0: window.0,
        p0,
        frame0: vec![v1, v2],
        curvatures: vec![CurvatureFn::Constant(k1)],
        window,
        step,
        target_cos_thetas: None,
        drift_tol: DEFAULT_DRIFT_TOL,
        depth: DEFAULT_DEPTH,
    })
}

/// Random initial frame and constant curvatures: a generic, non-slant curve.
pub fn random_spec(params: ModelParams, order: usize, seed: u64, window: (f64, f64), step: f64) -> SynthesisSpec {
    let mut rng = manifold::seeded_rng(seed);
    let n = params.dim();
    let order = order.clamp(1, n);
    let p0 = manifold::random_coords(&mut rng, n);
    let mut frame: Vec<Vec<f64>> = (0..order).map(|_| manifold::random_coords(&mut rng, n)).collect();
    reorthonormalize(&params, &p0, &mut frame);
    let curvatures = (1..order).map(|_| CurvatureFn::Constant(rng.gen_range(0.5..2.0))).collect();
    SynthesisSpec {
        params,
        t0: window.0,
        p0,
        frame0: frame,
        curvatures,
        window,
        step,
        target_cos_thetas: None,
        drift_tol: DEFAULT_DRIFT_TOL,
        depth: DEFAULT_DEPTH,
    }
}

/// Constants and initial-frame data of the builtin six-dimensional example.
#[derive(Debug, Clone, Serialize)]
pub struct ExampleInfo {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c: f64,
    pub s: f64,
    pub cos_thetas: Vec<f64>,
    pub a: f64,
    pub b: f64,
    pub cos_beta: f64,
    /// `b^2 + ((c + 3s + 3(c - s) cos^2 beta) / 4)(1 - a)`.
    pub bracket: f64,
    /// Required `k2 k3 = 3(c - s) sin(2 beta)(1 - a) / 8` in absolute value.
    pub k2k3: f64,
    /// Targets for `g(phi T, V_2..V_4)` at `t0`.
    pub p_targets: [f64; 3],
    /// Residual of the initial-frame constraints after the solve.
    pub frame_residual: f64,
    /// Dimension of the solution set of the initial-frame constraints.
    pub remaining_freedom: usize,
    /// Initial frame in orthonormal-frame components.
    pub frame_components: Vec<Vec<f64>>,
}

/// `f = c1 k1^(-3/2)` for the example curvature.
pub fn example_weight(info: &ExampleInfo) -> impl Fn(Jet) -> Jet {
    let (c1, c2, c3, c4) = (info.c1, info.c2, info.c3, info.c4);
    move |t| CurvatureFn::Rational { c2, c3, c4, scale: 1.0 }.eval_jet(t).powf(-1.5) * c1
}

/// The builtin example in `R^6(-6)`: contact angles `(pi/2, pi/3)`,
/// `k1` the rational lemma solution, `k2 = c2 k1`, `k2 k3` from the fourth
/// condition with `cos beta = -sqrt(2)/6`, on `[-2, 2]` with step `1e-3`.
pub fn builtin_example_r6(c1: f64, c2: f64, c3: f64, c4: f64) -> Result<(SynthesisSpec, ExampleInfo), SynthError> {
    let params = ModelParams::new(2, 2).expect("m = 2, s = 2 is valid");
    let consts = params.constants();
    let (c, s) = (consts.c, consts.s);
    let cos_thetas = vec![0.0, 0.5];
    let a: f64 = cos_thetas.iter().map(|x| x * x).sum();
    let b: f64 = cos_thetas.iter().sum();
    let oma = 1.0 - a;
    let cos_beta = -(2f64.sqrt()) / 6.0;
    let bracket = b * b + (c + 3.0 * s + 3.0 * (c - s) * cos_beta * cos_beta) / 4.0 * oma;
    let sin_2beta = 2.0 * cos_beta * (1.0 - cos_beta * cos_beta).sqrt();
    let k2k3 = (3.0 * (c - s) * sin_2beta / 8.0 * oma).abs();
    let t0 = 0.0;
    let k1 = CurvatureFn::Rational { c2, c3, c4, scale: 1.0 };
    let k10 = k1.eval(t0);
    let k20 = c2 * k10;
    let p2 = oma.sqrt() * cos_beta;
    // k2 k3 + 3(c - s)/4 p2 p4 = 0, and |phi T|^2 = 1 - a leaves p3 = 0.
    let p4 = -k2k3 / (3.0 * (c - s) / 4.0 * p2);
    let p3 = (oma - p2 * p2 - p4 * p4).max(0.0).sqrt();
    let eta_v3 = [(p2 + k10 * cos_thetas[0]) / k20, (p2 + k10 * cos_thetas[1]) / k20];
    let targets = FrameTargets { cos_thetas: cos_thetas.clone(), eta_v3: eta_v3.to_vec(), p: [p2, p3, p4] };
    let (u, residual, freedom) = solve_initial_frame(&params, &targets)?;
    let p0 = vec![0.0; params.dim()];
    let frame0: Vec<Vec<f64>> = u.iter().map(|v| manifold::from_frame(&params, &p0, v)).collect();
    let spec = SynthesisSpec {
        params,
        t0,
        p0,
        frame0,
        curvatures: vec![
            k1,
            CurvatureFn::Rational { c2, c3, c4, scale: c2 },
            CurvatureFn::InverseRational { c2, c3, c4, scale: k2k3 / c2 },
        ],
        window: (-2.0, 2.0),
        step: DEFAULT_STEP,
        target_cos_thetas: Some(cos_thetas.clone()),
        drift_tol: DEFAULT_DRIFT_TOL,
        depth: DEFAULT_DEPTH,
    };
    let info = ExampleInfo {
        c1,
        c2,
        c3,
        c4,
        c,
        s,
        cos_thetas,
        a,
        b,
        cos_beta,
        bracket,
        k2k3,
        p_targets: [p2, p3, p4],
        frame_residual: residual,
        remaining_freedom: freedom,
        frame_components: u,
    };
    Ok((spec, info))
}

struct FrameTargets {
    cos_thetas: Vec<f64>,
    eta_v3: Vec<f64>,
    p: [f64; 3],
}

/// `phi` in orthonormal-frame components: `X_i -> phi X_i -> -X_i`, `xi -> 0`.
fn phi_frame(m: usize, u: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; u.len()];
    for i in 0..m {
        out[i] = -u[m + i];
        out[m + i] = u[i];
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn frame_constraints(m: usize, n: usize, t: &FrameTargets, x: &[f64]) -> Vec<f64> {
    let v: Vec<&[f64]> = x.chunks(n).collect();
    let mut f = Vec::new();
    for a in 0..4 {
        for b in 0..=a {
            f.push(dot(v[a], v[b]) - if a == b { 1.0 } else { 0.0 });
        }
    }
    let eta = |u: &[f64], al: usize| u[2 * m + al];
    for (al, c) in t.cos_thetas.iter().enumerate() {
        f.push(eta(v[0], al) - c);
        f.push(eta(v[1], al));
        f.push(eta(v[2], al) - t.eta_v3[al]);
    }
    let pt = phi_frame(m, v[0]);
    for j in 0..3 {
        f.push(dot(&pt, v[j + 1]) - t.p[j]);
    }
    f
}

/// Min-norm Gauss-Newton for `V_1..V_4` in orthonormal-frame components at
/// the origin. Returns the frame, the final residual and `dim - rank(J)`.
fn solve_initial_frame(params: &ModelParams, t: &FrameTargets) -> Result<(Vec<Vec<f64>>, f64, usize), SynthError> {
    let (m, n) = (params.m(), params.dim());
    let cb = t.p[0] / (1.0 - t.cos_thetas.iter().map(|c| c * c).sum::<f64>()).sqrt();
    let sb = (1.0 - cb * cb).sqrt();
    let mut seed = vec![0.0; 4 * n];
    let (st, ct) = (3f64.sqrt() / 2.0, 0.5);
    seed[0] = st;
    seed[2 * m + 1] = ct;
    seed[n + m] = cb;
    seed[n + 1] = sb;
    seed[2 * n + m + 1] = 1.0;
    seed[2 * n + 2 * m] = 0.3;
    seed[3 * n + 2 * m] = 1.0;
    let mut x = DVector::from_vec(seed);
    let mut res = f64::INFINITY;
    let h = 1e-6;
    let mut jac = DMatrix::zeros(0, 0);
    for _ in 0..200 {
        let f = DVector::from_vec(frame_constraints(m, n, t, x.as_slice()));
        res = f.amax();
        let k = f.len();
        jac = DMatrix::from_fn(k, 4 * n, |_, _| 0.0);
        for c in 0..4 * n {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[c] += h;
            xm[c] -= h;
            let fp = frame_constraints(m, n, t, xp.as_slice());
            let fm = frame_constraints(m, n, t, xm.as_slice());
            for r in 0..k {
                jac[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        if res < 1e-15 {
            break;
        }
        let svd = jac.clone().svd(true, true);
        let step = svd.solve(&f, 1e-10).map_err(|_| SynthError::FrameSolve(res))?;
        x -= step;
    }
    if !(res < 1e-12) {
        return Err(SynthError::FrameSolve(res));
    }
    let sv = jac.svd(false, false).singular_values;
    let rank = sv.iter().filter(|s| **s > 1e-8 * sv[0]).count();
    let frame = x.as_slice().chunks(n).map(|c| c.to_vec()).collect();
    Ok((frame, res, 4 * n - rank))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{legendre_circle, unit_speed_check};

    fn p22() -> ModelParams {
        ModelParams::new(2, 2).unwrap()
    }

    #[test]
    fn geodesic_keeps_contact_angles() {
        let spec = geodesic_spec(p22(), (0.0, 1.0), 1e-2);
        let out = integrate_frenet_system(&spec).unwrap();
        assert_eq!(out.frenet.order, 1);
        for i in 0..out.trace.len() {
            let c = crate::slant::contact_cosines(&out.trace, i);
            assert!((c[0] - 1.0).abs() < 1e-12 && c[1].abs() < 1e-12);
        }
    }

    #[test]
    fn circle_matches_analytic_and_closes() {
        let k1 = 1.0;
        let period = 2.0 * std::f64::consts::PI / k1;
        let spec = circle_spec(p22(), k1, (0.0, period), period / 2000.0).unwrap();
        let out = integrate_frenet_system(&spec).unwrap();
        let exact = legendre_circle(p22(), 2.0 / k1, out.trace.ts.clone()).unwrap();
        for i in 0..out.trace.len() {
            let a = out.trace.point(i);
            let b = exact.point(i);
            assert!(a.iter().zip(&b).all(|(x, y)| (x - y).abs() < 1e-9), "t = {}", out.trace.ts[i]);
        }
        let first = out.trace.point(0);
        let last = out.trace.point(out.trace.len() - 1);
        assert!(first.iter().zip(&last).all(|(x, y)| (x - y).abs() < 1e-9));
        assert_eq!(out.stats.measured_order, 2);
        assert!(out.stats.curvature_rel_error < 1e-10);
        assert!(unit_speed_check(&out.trace).passed);
    }

    #[test]
    fn coarse_step_trips_drift_guard() {
        let spec = circle_spec(p22(), 1.0, (0.0, 2.0), 0.5).unwrap();
        assert!(matches!(integrate_frenet_system(&spec), Err(SynthError::Drift { .. })));
    }

    #[test]
    fn rk4_is_fourth_order() {
        let err = |h: f64| {
            let spec = circle_spec(p22(), 1.0, (0.0, 1.0), h).unwrap();
            let out = integrate_frenet_system(&spec).unwrap();
            let exact = legendre_circle(p22(), 2.0, vec![1.0]).unwrap().point(0);
            let last = out.trace.point(out.trace.len() - 1);
            last.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
        };
        let ratio = err(0.1) / err(0.05);
        assert!((ratio - 16.0).abs() < 3.0, "ratio {ratio}");
    }

    #[test]
    fn random_spec_round_trips_curvatures() {
        let spec = random_spec(p22(), 3, 11, (0.0, 0.5), 1e-3);
        let out = integrate_frenet_system(&spec).unwrap();
        assert_eq!(out.stats.measured_order, 3);
        assert!(out.stats.curvature_rel_error < 1e-4);
        assert!(out.stats.frame_deviation < 1e-6);
        assert!(out.stats.frame_orthonormality < 1e-8);
    }

    #[test]
    fn example_constants_and_initial_frame() {
        let (spec, info) = builtin_example_r6(1.0, 1.0, 4.0, 0.0).unwrap();
        assert!((info.a - 0.25).abs() < 1e-15 && (info.b - 0.5).abs() < 1e-15);
        assert!(info.bracket.abs() < 1e-12);
        assert!((info.k2k3 - 17f64.sqrt() / 4.0).abs() < 1e-12);
        assert!(info.frame_residual < 1e-12);
        spec.validate().unwrap();
        let p = &spec.p0;
        let pt = manifold::phi(&spec.params, p, &spec.frame0[0]);
        for j in 0..3 {
            let got = manifold::inner(&spec.params, p, &pt, &spec.frame0[j + 1]);
            assert!((got - info.p_targets[j]).abs() < 1e-12);
        }
        assert!((spec.curvatures[0].eval(1.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((spec.curvatures[2].eval(1.0) * spec.curvatures[1].eval(1.0) - info.k2k3).abs() < 1e-14);
    }
}
