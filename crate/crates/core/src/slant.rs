//! Contact angles, slant constants and the decomposition of `phi T` along
//! the Frenet frame.

use serde::Serialize;

use crate::curve::{CurveTrace, FrenetData, TraceSource};
use crate::jet::{self, Jet, Scalar};
use crate::manifold::{self, ManifoldError, Point, Tangent};

pub const SLANT_TOL_ANALYTIC: f64 = 1e-5;
pub const SLANT_TOL_SAMPLED: f64 = 1e-3;
/// Below this `1 - a` the curve is treated as an integral curve of `V`.
pub const DEGENERATE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize)]
pub struct SlantProfile {
    pub thetas: Vec<f64>,
    pub cos_thetas: Vec<f64>,
    pub a: f64,
    pub b: f64,
    /// Max over samples and `alpha` of `|eta_alpha(T) - cos theta_alpha|`.
    pub constancy_deviation: f64,
    pub tolerance: f64,
    pub is_slant: bool,
    /// Not slant, yet `sum cos^2` or `sum cos` stays constant; such curves
    /// are recognized and rejected.
    pub constant_a_or_b_only: bool,
}

impl SlantProfile {
    /// Profile with prescribed `cos theta_alpha`, for scalar-level checks.
    pub fn from_cosines(cos_thetas: &[f64]) -> Self {
        SlantProfile {
            thetas: cos_thetas.iter().map(|c| c.clamp(-1.0, 1.0).acos()).collect(),
            cos_thetas: cos_thetas.to_vec(),
            a: cos_thetas.iter().map(|c| c * c).sum(),
            b: cos_thetas.iter().sum(),
            constancy_deviation: 0.0,
            tolerance: SLANT_TOL_ANALYTIC,
            is_slant: true,
            constant_a_or_b_only: false,
        }
    }

    pub fn one_minus_a(&self) -> f64 {
        1.0 - self.a
    }
}

/// `eta_alpha(T)` at sample `i`.
pub fn contact_cosines(trace: &CurveTrace, i: usize) -> Vec<f64> {
    let p = trace.point(i);
    let v = trace.velocity(i);
    (0..trace.params.s()).map(|a| manifold::eta(&trace.params, a, &p, &v)).collect()
}

pub fn contact_angles(trace: &CurveTrace) -> SlantProfile {
    let tolerance = match trace.source {
        TraceSource::Analytic => SLANT_TOL_ANALYTIC,
        TraceSource::Sampled => SLANT_TOL_SAMPLED,
    };
    contact_angles_with(trace, tolerance)
}

pub fn contact_angles_with(trace: &CurveTrace, tolerance: f64) -> SlantProfile {
    let s = trace.params.s();
    let rows: Vec<Vec<f64>> = (0..trace.len()).map(|i| contact_cosines(trace, i)).collect();
    let n = rows.len() as f64;
    let means: Vec<f64> = (0..s).map(|a| rows.iter().map(|r| r[a]).sum::<f64>() / n).collect();
    let dev = rows
        .iter()
        .flat_map(|r| r.iter().zip(&means).map(|(x, m)| (x - m).abs()))
        .fold(0.0, f64::max);
    let spread = |f: &dyn Fn(&[f64]) -> f64| {
        let vals: Vec<f64> = rows.iter().map(|r| f(r)).collect();
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    };
    let is_slant = dev <= tolerance;
    let a_spread = spread(&|r| r.iter().map(|c| c * c).sum());
    let b_spread = spread(&|r| r.iter().sum());
    SlantProfile {
        thetas: means.iter().map(|c| c.clamp(-1.0, 1.0).acos()).collect(),
        a: means.iter().map(|c| c * c).sum(),
        b: means.iter().sum(),
        cos_thetas: means,
        constancy_deviation: dev,
        tolerance,
        is_slant,
        constant_a_or_b_only: !is_slant && (a_spread <= tolerance || b_spread <= tolerance),
    }
}

/// `V = sum cos theta_alpha xi_alpha` at `p`.
pub fn slant_field_v(profile: &SlantProfile, params: &manifold::ModelParams, p: &Point) -> Result<Tangent, ManifoldError> {
    if profile.cos_thetas.len() != params.s() {
        return Err(ManifoldError::DimensionMismatch { expected: params.s(), got: profile.cos_thetas.len() });
    }
    let mut v = vec![0.0; params.dim()];
    for (a, c) in profile.cos_thetas.iter().enumerate() {
        let x: Vec<f64> = manifold::xi(params, a);
        for k in 0..v.len() {
            v[k] += c * x[k];
        }
    }
    Tangent::new(p.clone(), v)
}

#[derive(Debug, Clone, Serialize)]
pub struct NablaPhiTReport {
    pub max_residual: f64,
    pub geodesic: bool,
}

/// `phi T` along the curve as coordinate jets.
pub fn phi_t_jets(trace: &CurveTrace, i: usize) -> Vec<Jet> {
    manifold::phi(&trace.params, &trace.jets[i], &trace.velocity_jets(i))
}

/// Residual of `nabla_T phi T = (1-a) sum xi + b(-T + V) + k_1 phi V_2`.
pub fn nabla_phi_t_check(trace: &CurveTrace, fd: &FrenetData, profile: &SlantProfile) -> NablaPhiTReport {
    let params = &trace.params;
    let n = params.dim();
    let xis: Vec<f64> = manifold::xi_sum(params);
    let mut worst: f64 = 0.0;
    for i in 0..trace.len() {
        let pos = &trace.jets[i];
        let vel = trace.velocity_jets(i);
        let pt = manifold::phi(params, pos, &vel);
        let lhs = jet::values(&manifold::covariant_derivative_jet_with(params, pos, &vel, &pt));
        let p = trace.point(i);
        let t = jet::values(&vel);
        let v2 = fd.frame(i, 2, n);
        let pv2 = manifold::phi(params, &p, &v2);
        let k1 = fd.curvature(i, 1);
        let mut vfield = vec![0.0; n];
        for (a, c) in profile.cos_thetas.iter().enumerate() {
            let x: Vec<f64> = manifold::xi(params, a);
            for k in 0..n {
                vfield[k] += c * x[k];
            }
        }
        let r: Vec<f64> = (0..n)
            .map(|k| {
                lhs[k] - (profile.one_minus_a() * xis[k] + profile.b * (-t[k] + vfield[k]) + k1 * pv2[k])
            })
            .collect();
        worst = worst.max(manifold::norm(params, &p, &r));
    }
    NablaPhiTReport { max_residual: worst, geodesic: fd.order == 1 }
}

#[derive(Debug, Clone, Serialize)]
pub struct PhiTSample {
    pub t: f64,
    pub p2: f64,
    pub p3: f64,
    pub p4: f64,
    /// `arccos(p2 / sqrt(1-a))` in `[0, pi]`.
    pub beta: f64,
    /// `atan2(|p4|, |p3|)` in `[0, pi/2]`; signs are reported separately.
    pub w: f64,
    pub sign_p3: f64,
    pub sign_p4: f64,
    pub sin_2beta_sign: f64,
    /// `d/dt g(phi T, V_2)`.
    pub p2_rate: f64,
    /// `beta'`, when `sin beta` is not zero.
    pub beta_rate: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PhiTDecomposition {
    pub degenerate: bool,
    pub samples: Vec<PhiTSample>,
    /// Max `|p2^2 + p3^2 + p4^2 - (1-a)|`.
    pub norm_residual: f64,
    /// Max `g`-norm of `phi T - p2 V2 - p3 V3 - p4 V4`.
    pub span_residual: f64,
    /// Max `|p2' - k2 p3|`.
    pub rate_residual: f64,
    /// Max `| |cos w| - |beta'| / k2 |` where `sin beta != 0` and `k2` is above threshold.
    pub cos_w_residual: f64,
    /// Max `|eta_alpha(V_2)|`.
    pub eta_v2: f64,
    /// Max `| |phi T|^2 - (1-a) |`.
    pub phi_t_norm_residual: f64,
}

impl PhiTDecomposition {
    pub fn p2_range(&self) -> (f64, f64) {
        let lo = self.samples.iter().map(|s| s.p2).fold(f64::INFINITY, f64::min);
        let hi = self.samples.iter().map(|s| s.p2).fold(f64::NEG_INFINITY, f64::max);
        (lo, hi)
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn phi_t_decomposition(trace: &CurveTrace, fd: &FrenetData, profile: &SlantProfile) -> PhiTDecomposition {
    let params = &trace.params;
    let n = params.dim();
    let oma = profile.one_minus_a();
    let mut out = PhiTDecomposition {
        degenerate: oma < DEGENERATE_TOL,
        samples: Vec::new(),
        norm_residual: 0.0,
        span_residual: 0.0,
        rate_residual: 0.0,
        cos_w_residual: 0.0,
        eta_v2: 0.0,
        phi_t_norm_residual: 0.0,
    };
    for i in 0..trace.len() {
        let p = trace.point(i);
        if fd.order >= 2 {
            let v2 = fd.frame(i, 2, n);
            for a in 0..params.s() {
                out.eta_v2 = out.eta_v2.max(manifold::eta(params, a, &p, &v2).abs());
            }
        }
    }
    if out.degenerate {
        return out;
    }
    for i in 0..trace.len() {
        let pos = &trace.jets[i];
        let pt = phi_t_jets(trace, i);
        let p = trace.point(i);
        let ptv = jet::values(&pt);
        let inner_jet = |j: usize| -> Jet {
            match fd.frame_jets(i, j) {
                Some(v) => manifold::inner(params, pos, &pt, v),
                None => Jet::constant(0.0),
            }
        };
        let p2j = inner_jet(2);
        let (p2, p3, p4) = (p2j.value(), inner_jet(3).value(), inner_jet(4).value());
        let cb = (p2 / oma.sqrt()).clamp(-1.0, 1.0);
        let beta = cb.acos();
        let p2_rate = p2j.deriv(1).unwrap_or(f64::NAN);
        let sin2 = oma - p2 * p2;
        let beta_rate = if sin2 > 1e-12 { Some(-p2_rate / sin2.sqrt()) } else { None };
        let k2 = fd.curvature(i, 2);
        let w = p4.abs().atan2(p3.abs());
        out.norm_residual = out.norm_residual.max((p2 * p2 + p3 * p3 + p4 * p4 - oma).abs());
        let mut rest = ptv.clone();
        for (j, c) in [(2, p2), (3, p3), (4, p4)] {
            let v = fd.frame(i, j, n);
            for k in 0..n {
                rest[k] -= c * v[k];
            }
        }
        out.span_residual = out.span_residual.max(manifold::norm(params, &p, &rest));
        out.rate_residual = out.rate_residual.max((p2_rate - k2 * p3).abs());
        out.phi_t_norm_residual =
            out.phi_t_norm_residual.max((manifold::inner(params, &p, &ptv, &ptv) - oma).abs());
        if let Some(br) = beta_rate {
            if k2 > fd.threshold {
                out.cos_w_residual = out.cos_w_residual.max((w.cos() - br.abs() / k2).abs());
            }
        }
        out.samples.push(PhiTSample {
            t: trace.ts[i],
            p2,
            p3,
            p4,
            beta,
            w,
            sign_p3: sign(p3),
            sign_p4: sign(p4),
            sin_2beta_sign: sign((2.0 * beta).sin()),
            p2_rate,
            beta_rate,
        });
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::{self, frenet_apparatus, uniform_grid, DEFAULT_THRESHOLD};
    use crate::manifold::ModelParams;

    fn p22() -> ModelParams {
        ModelParams::new(2, 2).unwrap()
    }

    #[test]
    fn legendre_circle_has_right_angles() {
        let tr = curve::legendre_circle(p22(), 2.0, uniform_grid(0.0, 1.0, 0.05)).unwrap();
        let prof = contact_angles(&tr);
        assert!(prof.is_slant);
        for th in &prof.thetas {
            assert!((th - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        }
        assert_eq!((prof.a, prof.b), (0.0, 0.0));
        let fd = frenet_apparatus(&tr, 6, DEFAULT_THRESHOLD).unwrap();
        assert!(nabla_phi_t_check(&tr, &fd, &prof).max_residual < 1e-12);
        let dec = phi_t_decomposition(&tr, &fd, &prof);
        // phi T is a y-to-x rotation of T and lies outside span{V2..V4}.
        assert!(dec.samples.iter().all(|s| s.p2.abs() < 1e-12));
        assert!(dec.eta_v2 < 1e-12);
    }

    #[test]
    fn xi_line_is_degenerate() {
        let tr = curve::geodesic(p22(), uniform_grid(0.0, 1.0, 0.1)).unwrap();
        let prof = contact_angles(&tr);
        assert!((prof.thetas[0]).abs() < 1e-12);
        assert!((prof.thetas[1] - std::f64::consts::FRAC_PI_2).abs() < 1e-12);
        assert_eq!(prof.a, 1.0);
        let fd = frenet_apparatus(&tr, 6, DEFAULT_THRESHOLD).unwrap();
        let chk = nabla_phi_t_check(&tr, &fd, &prof);
        assert!(chk.geodesic && chk.max_residual < 1e-12);
        assert!(phi_t_decomposition(&tr, &fd, &prof).degenerate);
    }

    #[test]
    fn slant_helix_identities() {
        let tr = curve::slant_helix(p22(), &[0.0, 0.5], 1.0, uniform_grid(-1.0, 1.0, 0.05)).unwrap();
        let prof = contact_angles(&tr);
        assert!(prof.is_slant && prof.constancy_deviation < 1e-12);
        assert!((prof.a - 0.25).abs() < 1e-12 && (prof.b - 0.5).abs() < 1e-12);
        let fd = frenet_apparatus(&tr, 6, DEFAULT_THRESHOLD).unwrap();
        assert!(nabla_phi_t_check(&tr, &fd, &prof).max_residual < 1e-10);
        let dec = phi_t_decomposition(&tr, &fd, &prof);
        assert!(dec.phi_t_norm_residual < 1e-12);
        assert!(dec.eta_v2 < 1e-10);
        assert!(dec.rate_residual < 1e-10);
    }

    #[test]
    fn field_v_of_common_angle() {
        let pr = p22();
        let prof = SlantProfile::from_cosines(&[0.3, 0.3]);
        let v = slant_field_v(&prof, &pr, &Point::origin(&pr)).unwrap();
        assert_eq!(v.components, vec![0.0, 0.0, 0.0, 0.0, 0.6, 0.6]);
        let zero = slant_field_v(&SlantProfile::from_cosines(&[0.0, 0.0]), &pr, &Point::origin(&pr)).unwrap();
        assert!(zero.components.iter().all(|c| *c == 0.0));
    }

    #[test]
    fn non_slant_curve_is_flagged() {
        let pr = p22();
        let n = pr.dim();
        // Circle in (x1, y1) whose z-rate oscillates: eta(T) is not constant.
        let tr = curve::CurveTrace::from_fn(pr, uniform_grid(0.0, 1.0, 0.05), move |t| {
            let mut p = vec![Jet::constant(0.0); n];
            p[0] = t;
            p[4] = t.sin();
            p
        })
        .unwrap();
        let prof = contact_angles(&tr);
        assert!(!prof.is_slant);
    }
}
