//! Unit-speed curves and their Frenet apparatus.
//!
//! A [`CurveTrace`] stores, for every grid node, the Taylor jet of each
//! coordinate in the local parameter. Analytic curves fill the jets exactly;
//! sampled curves get derivatives up to order 4 from finite differences.
//! Covariant derivatives along the curve are then jet operations, and the
//! Frenet frame is built by Gram-Schmidt on
//! `V_1 = T, V_{j+1} ~ nabla_T V_j - sum_{i<=j} g(nabla_T V_j, V_i) V_i`.

use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::fd;
use crate::jet::{self, Jet, Scalar, MAX_ORDER};
use crate::manifold::{self, ManifoldError, ModelParams};

pub const DEFAULT_THRESHOLD: f64 = 1e-6;
pub const UNIT_SPEED_TOL_ANALYTIC: f64 = 1e-8;
pub const UNIT_SPEED_TOL_SAMPLED: f64 = 1e-5;
/// Derivative depth recovered from sampled positions.
pub const SAMPLED_DEPTH: usize = 4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurveError {
    #[error("parameter grid must be strictly increasing (index {0})")]
    NotIncreasing(usize),
    #[error("curve needs at least {needed} samples, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("csv line {line}: {msg}")]
    Csv { line: usize, msg: String },
    #[error("io: {0}")]
    Io(String),
    #[error("curvature k_{index} needs derivative order {needed}, trace has {have}")]
    InsufficientDepth { index: usize, needed: i32, have: i32 },
    #[error("curvature k_{index} crosses the threshold inside the window: {windows:?}")]
    FrameDegeneracy { index: usize, windows: Vec<DegeneracyWindow> },
    #[error(transparent)]
    Manifold(#[from] ManifoldError),
}

/// Contiguous run of samples on one side of the order-detection threshold.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegeneracyWindow {
    pub start: f64,
    pub end: f64,
    pub vanishing: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum TraceSource {
    Analytic,
    Sampled,
}

#[derive(Debug, Clone)]
pub struct CurveTrace {
    pub params: ModelParams,
    pub ts: Vec<f64>,
    /// `jets[i][k]`: coordinate `k` near `ts[i]` in the local parameter.
    pub jets: Vec<Vec<Jet>>,
    pub source: TraceSource,
}

fn check_grid(ts: &[f64]) -> Result<(), CurveError> {
    if ts.is_empty() {
        return Err(CurveError::TooShort { needed: 1, got: 0 });
    }
    for i in 1..ts.len() {
        if ts[i] <= ts[i - 1] || !ts[i].is_finite() {
            return Err(CurveError::NotIncreasing(i));
        }
    }
    Ok(())
}

/// Uniform grid on `[start, end]` with spacing close to `step`.
pub fn uniform_grid(start: f64, end: f64, step: f64) -> Vec<f64> {
    let n = ((end - start) / step).round().max(1.0) as usize;
    (0..=n).map(|i| start + (end - start) * i as f64 / n as f64).collect()
}

fn coord_names(params: &ModelParams) -> Vec<String> {
    let mut names = Vec::with_capacity(params.dim());
    for i in 1..=params.m() {
        names.push(format!("x{i}"));
    }
    for i in 1..=params.m() {
        names.push(format!("y{i}"));
    }
    for a in 1..=params.s() {
        names.push(format!("z{a}"));
    }
    names
}

impl CurveTrace {
    /// Evaluates an analytic curve, given as a map on jets, at every node.
    pub fn from_fn<F>(params: ModelParams, ts: Vec<f64>, f: F) -> Result<Self, CurveError>
    where
        F: Fn(Jet) -> Vec<Jet>,
    {
        check_grid(&ts)?;
        let mut jets = Vec::with_capacity(ts.len());
        for &t in &ts {
            let p = f(Jet::variable(t));
            if p.len() != params.dim() {
                return Err(ManifoldError::DimensionMismatch { expected: params.dim(), got: p.len() }.into());
            }
            jets.push(p);
        }
        Ok(CurveTrace { params, ts, jets, source: TraceSource::Analytic })
    }

    /// Builds a trace from jets computed elsewhere (e.g. by integration).
    pub fn from_jets(
        params: ModelParams,
        ts: Vec<f64>,
        jets: Vec<Vec<Jet>>,
        source: TraceSource,
    ) -> Result<Self, CurveError> {
        check_grid(&ts)?;
        if jets.len() != ts.len() {
            return Err(CurveError::TooShort { needed: ts.len(), got: jets.len() });
        }
        for p in &jets {
            if p.len() != params.dim() {
                return Err(ManifoldError::DimensionMismatch { expected: params.dim(), got: p.len() }.into());
            }
        }
        Ok(CurveTrace { params, ts, jets, source })
    }

    /// Builds a trace from positions and optional derivative samples
    /// (`derivs[k-1][i][coord]` is the `k`-th derivative). Missing derivatives
    /// up to order 4 come from fourth-order finite differences.
    pub fn from_samples(
        params: ModelParams,
        ts: Vec<f64>,
        points: Vec<Vec<f64>>,
        derivs: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self, CurveError> {
        check_grid(&ts)?;
        let n = params.dim();
        for p in &points {
            if p.len() != n {
                return Err(ManifoldError::DimensionMismatch { expected: n, got: p.len() }.into());
            }
        }
        let depth = derivs.len().max(SAMPLED_DEPTH);
        let mut all: Vec<Vec<Vec<f64>>> = vec![points.clone()];
        for k in 1..=depth {
            if let Some(d) = derivs.get(k - 1) {
                all.push(d.clone());
                continue;
            }
            let mut layer = vec![vec![0.0; n]; ts.len()];
            for c in 0..n {
                let ys: Vec<f64> = points.iter().map(|p| p[c]).collect();
                let d = fd::differentiate_samples(&ts, &ys, k)
                    .ok_or(CurveError::TooShort { needed: k + 4, got: ts.len() })?;
                for (i, v) in d.into_iter().enumerate() {
                    layer[i][c] = v;
                }
            }
            all.push(layer);
        }
        let jets = (0..ts.len())
            .map(|i| {
                (0..n)
                    .map(|c| {
                        let ds: Vec<f64> = all.iter().map(|layer| layer[i][c]).collect();
                        Jet::from_derivatives(&ds)
                    })
                    .collect()
            })
            .collect();
        Ok(CurveTrace { params, ts, jets, source: TraceSource::Sampled })
    }

    /// Parses CSV with header `t, x1..xm, y1..ym, z1..zs` and optional
    /// derivative columns `d{k}_{coord}`.
    pub fn from_csv_str(params: ModelParams, text: &str) -> Result<Self, CurveError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| CurveError::Csv { line: 1, msg: e.to_string() })?
            .iter()
            .map(str::to_string)
            .collect();
        let names = coord_names(&params);
        let find = |name: &str| header.iter().position(|h| h == name);
        let t_col = find("t").ok_or(CurveError::Csv { line: 1, msg: "missing column t".into() })?;
        let mut pos_cols = Vec::with_capacity(names.len());
        for nm in &names {
            pos_cols.push(find(nm).ok_or(CurveError::Csv { line: 1, msg: format!("missing column {nm}") })?);
        }
        let mut deriv_cols: Vec<Vec<usize>> = Vec::new();
        for k in 1..=MAX_ORDER as usize {
            let cols: Option<Vec<usize>> = names.iter().map(|nm| find(&format!("d{k}_{nm}"))).collect();
            match cols {
                Some(c) => deriv_cols.push(c),
                None => break,
            }
        }
        let mut ts = Vec::new();
        let mut points = Vec::new();
        let mut derivs: Vec<Vec<Vec<f64>>> = vec![Vec::new(); deriv_cols.len()];
        for (row, rec) in rdr.records().enumerate() {
            let line = row + 2;
            let rec = rec.map_err(|e| CurveError::Csv { line, msg: e.to_string() })?;
            let num = |col: usize| -> Result<f64, CurveError> {
                let field = rec.get(col).ok_or(CurveError::Csv { line, msg: "short row".into() })?;
                field
                    .parse::<f64>()
                    .map_err(|e| CurveError::Csv { line, msg: format!("{field:?}: {e}") })
            };
            ts.push(num(t_col)?);
            points.push(pos_cols.iter().map(|&c| num(c)).collect::<Result<Vec<_>, _>>()?);
            for (k, cols) in deriv_cols.iter().enumerate() {
                derivs[k].push(cols.iter().map(|&c| num(c)).collect::<Result<Vec<_>, _>>()?);
            }
        }
        Self::from_samples(params, ts, points, derivs)
    }

    pub fn from_csv_path(params: ModelParams, path: &Path) -> Result<Self, CurveError> {
        let text = std::fs::read_to_string(path).map_err(|e| CurveError::Io(format!("{}: {e}", path.display())))?;
        Self::from_csv_str(params, &text)
    }

    /// CSV with positions and derivative columns up to `depth`, full precision.
    pub fn to_csv(&self, depth: usize) -> String {
        let names = coord_names(&self.params);
        let depth = depth.min(self.depth().max(0) as usize);
        let mut head = vec!["t".to_string()];
        head.extend(names.iter().cloned());
        for k in 1..=depth {
            head.extend(names.iter().map(|nm| format!("d{k}_{nm}")));
        }
        let mut out = head.join(",");
        out.push('\n');
        for (t, p) in self.ts.iter().zip(&self.jets) {
            let mut row = vec![format!("{t:.16e}")];
            for k in 0..=depth {
                row.extend(p.iter().map(|j| format!("{:.16e}", j.deriv(k).unwrap_or(f64::NAN))));
            }
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn len(&self) -> usize {
        self.ts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ts.is_empty()
    }

    /// Smallest number of exact derivatives over all coordinates and samples.
    pub fn depth(&self) -> i32 {
        self.jets.iter().map(|p| jet::min_order(p)).min().unwrap_or(-1)
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        jet::values(&self.jets[i])
    }

    pub fn velocity_jets(&self, i: usize) -> Vec<Jet> {
        jet::derivative_vec(&self.jets[i])
    }

    pub fn velocity(&self, i: usize) -> Vec<f64> {
        jet::values(&self.velocity_jets(i))
    }

    /// `k`-th coordinate derivative at sample `i`.
    pub fn derivative(&self, i: usize, k: usize) -> Option<Vec<f64>> {
        self.jets[i].iter().map(|j| j.deriv(k)).collect()
    }

    pub fn window(&self) -> (f64, f64) {
        (self.ts[0], *self.ts.last().unwrap())
    }

    pub fn unit_speed_tolerance(&self) -> f64 {
        match self.source {
            TraceSource::Analytic => UNIT_SPEED_TOL_ANALYTIC,
            TraceSource::Sampled => UNIT_SPEED_TOL_SAMPLED,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct UnitSpeedReport {
    pub max_deviation: f64,
    pub worst_t: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Max over samples of `|g(T,T) - 1|`.
pub fn unit_speed_check(trace: &CurveTrace) -> UnitSpeedReport {
    let mut worst = 0.0;
    let mut worst_t = trace.ts[0];
    for i in 0..trace.len() {
        let p = trace.point(i);
        let v = trace.velocity(i);
        let d = (manifold::inner(&trace.params, &p, &v, &v) - 1.0).abs();
        if d > worst {
            worst = d;
            worst_t = trace.ts[i];
        }
    }
    let tolerance = trace.unit_speed_tolerance();
    UnitSpeedReport { max_deviation: worst, worst_t, tolerance, passed: worst <= tolerance }
}

#[derive(Debug, Clone)]
pub struct FrenetData {
    pub order: usize,
    pub threshold: f64,
    /// `frames[i][j]`: coordinate jets of `V_{j+1}` at sample `i`.
    pub frames: Vec<Vec<Vec<Jet>>>,
    /// `curvatures[i][j]`: jet of `k_{j+1}` at sample `i`.
    pub curvatures: Vec<Vec<Jet>>,
    /// Magnitude of the first vanishing curvature `k_r`, when it was measured.
    pub vanishing_curvature: Option<f64>,
    pub frenet_residual: f64,
    pub orthonormality_residual: f64,
    /// Samples where some `V_j` reversed relative to the previous sample.
    pub sign_flips: usize,
}

impl FrenetData {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    /// Value of `V_{j}` (1-based) at sample `i`; zero past the order.
    pub fn frame(&self, i: usize, j: usize, dim: usize) -> Vec<f64> {
        match self.frames[i].get(j - 1) {
            Some(v) => jet::values(v),
            None => vec![0.0; dim],
        }
    }

    pub fn frame_jets(&self, i: usize, j: usize) -> Option<&Vec<Jet>> {
        self.frames[i].get(j - 1)
    }

    /// `k_j` (1-based) at sample `i`; zero past the order.
    pub fn curvature(&self, i: usize, j: usize) -> f64 {
        self.curvatures[i].get(j - 1).map(|k| k.value()).unwrap_or(0.0)
    }

    /// Jet of `k_j`, or an exact zero past the order.
    pub fn curvature_jet(&self, i: usize, j: usize) -> Jet {
        self.curvatures[i].get(j - 1).copied().unwrap_or(Jet::constant(0.0))
    }
}

fn split_windows(ts: &[f64], below: &[bool]) -> Vec<DegeneracyWindow> {
    let mut out: Vec<DegeneracyWindow> = Vec::new();
    for (t, &b) in ts.iter().zip(below) {
        match out.last_mut() {
            Some(w) if w.vanishing == b => w.end = *t,
            _ => out.push(DegeneracyWindow { start: *t, end: *t, vanishing: b }),
        }
    }
    out
}

/// Frenet frame, curvatures and osculating order of a unit-speed trace.
///
/// `k_j` is measured as the norm of the Gram-Schmidt remainder of
/// `nabla_T V_j`. The order is the first `r` with `k_r < threshold` at every
/// sample, capped at `max_order`.
pub fn frenet_apparatus(
    trace: &CurveTrace,
    max_order: usize,
    threshold: f64,
) -> Result<FrenetData, CurveError> {
    let params = &trace.params;
    let n = trace.len();
    let max_order = max_order.clamp(1, params.dim());
    let pos = &trace.jets;
    let vel: Vec<Vec<Jet>> = (0..n).map(|i| trace.velocity_jets(i)).collect();
    let mut frames: Vec<Vec<Vec<Jet>>> = vel.iter().map(|v| vec![v.clone()]).collect();
    let mut curvatures: Vec<Vec<Jet>> = vec![Vec::new(); n];
    let mut frenet_residual: f64 = 0.0;
    let mut vanishing = None;

    for j in 1..=max_order {
        // Remainder of nabla_T V_j after projecting out V_1..V_j.
        let mut remainders = Vec::with_capacity(n);
        let mut norms = Vec::with_capacity(n);
        for i in 0..n {
            let p = &pos[i];
            let vj = &frames[i][j - 1];
            let d = manifold::covariant_derivative_jet_with(params, p, &vel[i], vj);
            if jet::min_order(&d) < 0 {
                if j == max_order {
                    break;
                }
                return Err(CurveError::InsufficientDepth {
                    index: j,
                    needed: j as i32 + 1,
                    have: trace.depth(),
                });
            }
            let mut x = d.clone();
            for vl in &frames[i] {
                let c = manifold::inner(params, p, &d, vl);
                for k in 0..x.len() {
                    x[k] -= c * vl[k];
                }
            }
            // |nabla V_j + k_{j-1} V_{j-1} - k_j V_{j+1}| = |d - X + k_{j-1} V_{j-1}|
            let mut fr = vec![0.0; d.len()];
            for k in 0..d.len() {
                fr[k] = d[k].value() - x[k].value();
            }
            if j >= 2 {
                let kprev = curvatures[i][j - 2].value();
                let vprev = jet::values(&frames[i][j - 2]);
                for k in 0..d.len() {
                    fr[k] += kprev * vprev[k];
                }
            }
            let pv = jet::values(p);
            frenet_residual = frenet_residual.max(manifold::norm(params, &pv, &fr));
            let nrm2 = manifold::inner(params, p, &x, &x);
            norms.push(nrm2.value().max(0.0).sqrt());
            remainders.push((x, nrm2));
        }
        if remainders.len() < n {
            // Depth ran out while measuring the capping curvature.
            break;
        }
        let below: Vec<bool> = norms.iter().map(|k| *k < threshold).collect();
        let n_below = below.iter().filter(|b| **b).count();
        if n_below == n {
            vanishing = Some(norms.iter().cloned().fold(0.0, f64::max));
            break;
        }
        if j == max_order {
            break;
        }
        if n_below > 0 {
            return Err(CurveError::FrameDegeneracy { index: j, windows: split_windows(&trace.ts, &below) });
        }
        for (i, (x, nrm2)) in remainders.into_iter().enumerate() {
            let k = nrm2.sqrt();
            let v: Vec<Jet> = x.iter().map(|c| *c / k).collect();
            curvatures[i].push(k);
            frames[i].push(v);
        }
    }
    let order = frames[0].len();

    let mut orth: f64 = 0.0;
    for i in 0..n {
        let p = jet::values(&pos[i]);
        let vals: Vec<Vec<f64>> = frames[i].iter().map(|v| jet::values(v)).collect();
        for a in 0..vals.len() {
            for b in 0..=a {
                let d = if a == b { 1.0 } else { 0.0 };
                orth = orth.max((manifold::inner(params, &p, &vals[a], &vals[b]) - d).abs());
            }
        }
    }

    let mut sign_flips = 0;
    for i in 1..n {
        let p0 = jet::values(&pos[i - 1]);
        let p1 = jet::values(&pos[i]);
        let flipped = (0..order).any(|j| {
            let a = manifold::to_frame(params, &p0, &jet::values(&frames[i - 1][j]));
            let b = manifold::to_frame(params, &p1, &jet::values(&frames[i][j]));
            a.iter().zip(&b).map(|(x, y)| x * y).sum::<f64>() < 0.0
        });
        if flipped {
            sign_flips += 1;
        }
    }

    Ok(FrenetData {
        order,
        threshold,
        frames,
        curvatures,
        vanishing_curvature: vanishing,
        frenet_residual,
        orthonormality_residual: orth,
        sign_flips,
    })
}

pub fn osculating_order(fd: &FrenetData) -> usize {
    fd.order
}

// ---------------------------------------------------------------------------
// Builtin curves

/// Integral curve of `xi_1` through the origin: `z_1 = 2t`.
pub fn geodesic(params: ModelParams, ts: Vec<f64>) -> Result<CurveTrace, CurveError> {
    let n = params.dim();
    let z1 = 2 * params.m();
    CurveTrace::from_fn(params, ts, move |t| {
        let mut p = vec![Jet::constant(0.0); n];
        p[z1] = t * 2.0;
        p
    })
}

/// Legendre circle `y = R(cos wt, sin wt)` with `R w = 2` in the
/// `(y_1, y_2)` plane; needs `m >= 2`. Its curvature is `k_1 = w`.
pub fn legendre_circle(params: ModelParams, radius: f64, ts: Vec<f64>) -> Result<CurveTrace, CurveError> {
    if params.m() < 2 {
        return Err(ManifoldError::InvalidDimensions { m: params.m(), s: params.s() }.into());
    }
    let n = params.dim();
    let m = params.m();
    let w = 2.0 / radius;
    CurveTrace::from_fn(params, ts, move |t| {
        let (s, c) = (t * w).sin_cos();
        let mut p = vec![Jet::constant(0.0); n];
        p[m] = c * radius;
        p[m + 1] = s * radius;
        p
    })
}

/// Exact slant helix: a circle of radius `R` in the `(x_1, y_1)` plane with
/// `z_a` chosen so that `eta^a(T) = cos_thetas[a]` identically.
pub fn slant_helix(
    params: ModelParams,
    cos_thetas: &[f64],
    radius: f64,
    ts: Vec<f64>,
) -> Result<CurveTrace, CurveError> {
    if cos_thetas.len() != params.s() {
        return Err(ManifoldError::DimensionMismatch { expected: params.s(), got: cos_thetas.len() }.into());
    }
    let a: f64 = cos_thetas.iter().map(|c| c * c).sum();
    if a >= 1.0 {
        return Err(ManifoldError::InvalidDimensions { m: params.m(), s: params.s() }.into());
    }
    let n = params.dim();
    let m = params.m();
    let w = 2.0 * (1.0 - a).sqrt() / radius;
    let cs = cos_thetas.to_vec();
    CurveTrace::from_fn(params, ts, move |t| {
        let (s, c) = (t * w).sin_cos();
        let (s2, _) = (t * (2.0 * w)).sin_cos();
        let mut p = vec![Jet::constant(0.0); n];
        p[0] = c * radius;
        p[m] = s * radius;
        // z_a = int (y_1 x_1' + 2 cos theta_a) dt
        let twist = (t * 0.5 - s2 * (1.0 / (4.0 * w))) * (-radius * radius * w);
        for (a, ca) in cs.iter().enumerate() {
            p[2 * m + a] = twist + t * (2.0 * ca);
        }
        p
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p22() -> ModelParams {
        ModelParams::new(2, 2).unwrap()
    }

    #[test]
    fn geodesic_has_order_one() {
        let tr = geodesic(p22(), uniform_grid(-1.0, 1.0, 0.1)).unwrap();
        assert!(unit_speed_check(&tr).max_deviation < 1e-12);
        let fd = frenet_apparatus(&tr, 6, DEFAULT_THRESHOLD).unwrap();
        assert_eq!(osculating_order(&fd), 1);
        assert!(fd.curvatures[0].is_empty());
    }

    #[test]
    fn doubled_speed_is_reported() {
        let n = p22().dim();
        let tr = CurveTrace::from_fn(p22(), uniform_grid(0.0, 1.0, 0.1), move |t| {
            let mut p = vec![Jet::constant(0.0); n];
            p[4] = t * 4.0;
            p
        })
        .unwrap();
        let r = unit_speed_check(&tr);
        assert!((r.max_deviation - 3.0).abs() < 1e-12);
        assert!(!r.passed);
    }

    #[test]
    fn legendre_circle_is_a_circle() {
        let tr = legendre_circle(p22(), 4.0, uniform_grid(0.0, 3.0, 0.05)).unwrap();
        assert!(unit_speed_check(&tr).passed);
        let fd = frenet_apparatus(&tr, 6, DEFAULT_THRESHOLD).unwrap();
        assert_eq!(fd.order, 2);
        for i in 0..fd.len() {
            assert!((fd.curvature(i, 1) - 0.5).abs() < 1e-12);
        }
        assert!(fd.frenet_residual < 1e-12);
        assert!(fd.orthonormality_residual < 1e-12);
        assert_eq!(fd.sign_flips, 0);
    }

    #[test]
    fn slant_helix_is_unit_speed_with_positive_curvatures() {
        let tr = slant_helix(p22(), &[0.0, 0.5], 1.0, uniform_grid(-1.0, 1.0, 0.05)).unwrap();
        assert!(unit_speed_check(&tr).max_deviation < 1e-12);
        let fd = frenet_apparatus(&tr, 6, DEFAULT_THRESHOLD).unwrap();
        assert!(fd.order >= 3);
        assert!(fd.frenet_residual < 1e-10);
        assert!(fd.orthonormality_residual < 1e-10);
        for i in 0..fd.len() {
            for j in 1..fd.order {
                assert!(fd.curvature(i, j) > 0.0);
            }
        }
    }

    #[test]
    fn curvature_crossing_threshold_is_degeneracy() {
        // y-plane curve whose planar curvature changes sign at t = 0.
        let p = p22();
        let n = p.dim();
        let ts = uniform_grid(-1.0, 1.0, 0.1);
        let tr = CurveTrace::from_fn(p, ts, move |t| {
            // Unit-speed in the flat y-plane: angle theta(t) = t^2.
            // Position is only needed to the order the test reaches, so a
            // truncated Taylor integral of (cos t^2, sin t^2) is enough.
            let t2 = t * t;
            let t3 = t2 * t;
            let t5 = t3 * t2;
            let t7 = t5 * t2;
            let mut q = vec![Jet::constant(0.0); n];
            q[2] = (t - t5 * 0.1) * 2.0;
            q[3] = (t3 * (1.0 / 3.0) - t7 * (1.0 / 42.0)) * 2.0;
            q
        })
        .unwrap();
        match frenet_apparatus(&tr, 3, DEFAULT_THRESHOLD) {
            Err(CurveError::FrameDegeneracy { index: 1, windows }) => {
                assert!(windows.len() >= 2);
            }
            other => panic!("expected degeneracy, got {other:?}"),
        }
    }

    #[test]
    fn csv_round_trip_preserves_samples() {
        let tr = slant_helix(p22(), &[0.0, 0.5], 1.0, uniform_grid(0.0, 1.0, 0.01)).unwrap();
        let text = tr.to_csv(4);
        let back = CurveTrace::from_csv_str(p22(), &text).unwrap();
        assert_eq!(back.len(), tr.len());
        for i in 0..tr.len() {
            for k in 0..=4 {
                assert_eq!(back.derivative(i, k), tr.derivative(i, k));
            }
        }
        let positions_only: String = text
            .lines()
            .map(|l| l.split(',').take(7).collect::<Vec<_>>().join(","))
            .collect::<Vec<_>>()
            .join("\n");
        let sampled = CurveTrace::from_csv_str(p22(), &positions_only).unwrap();
        assert_eq!(sampled.source, TraceSource::Sampled);
        assert!(unit_speed_check(&sampled).passed);
    }

    #[test]
    fn csv_errors_are_located() {
        let bad = "t,x1,x2,y1,y2,z1,z2\n0,0,0,0,0,0,0\n1,0,0,zz,0,0,0\n";
        match CurveTrace::from_csv_str(p22(), bad) {
            Err(CurveError::Csv { line: 3, .. }) => {}
            other => panic!("{other:?}"),
        }
        let missing = "t,x1\n0,0\n";
        assert!(matches!(CurveTrace::from_csv_str(p22(), missing), Err(CurveError::Csv { line: 1, .. })));
        let decreasing = CurveTrace::from_fn(p22(), vec![0.0, 0.0], |t| vec![t; 6]);
        assert!(matches!(decreasing, Err(CurveError::NotIncreasing(1))));
    }

    #[test]
    fn sampled_curvature_converges_at_fourth_order() {
        let err = |h: f64| {
            let exact = slant_helix(p22(), &[0.0, 0.5], 1.0, uniform_grid(0.0, 1.0, h)).unwrap();
            let pts: Vec<Vec<f64>> = (0..exact.len()).map(|i| exact.point(i)).collect();
            let tr = CurveTrace::from_samples(p22(), exact.ts.clone(), pts, vec![]).unwrap();
            let fa = frenet_apparatus(&exact, 3, DEFAULT_THRESHOLD).unwrap();
            let fs = frenet_apparatus(&tr, 3, DEFAULT_THRESHOLD).unwrap();
            // Interior node in the middle of the window.
            let i = tr.len() / 2;
            (fa.curvature(i, 1) - fs.curvature(i, 1)).abs()
        };
        let (e1, e2) = (err(0.02), err(0.01));
        assert!(e1 < 1e-5);
        assert!(e1 / e2 > 8.0 && e1 / e2 < 32.0, "ratio {}", e1 / e2);
    }
}
