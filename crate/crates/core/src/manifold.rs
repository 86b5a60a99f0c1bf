//! The coordinate model `R^(2m+s)(-3s)`.
//!
//! Coordinates are ordered `(x_1..x_m, y_1..y_m, z_1..z_s)`. The structure is
//!
//! ```text
//! xi_a   = 2 d/dz_a
//! eta^a  = (dz_a - sum_i y_i dx_i) / 2
//! phi X  = sum_i Y_i d/dx_i - sum_i X_i d/dy_i + (sum_i Y_i y_i) sum_a d/dz_a
//! g      = sum_a eta^a (x) eta^a + (1/4) sum_i (dx_i (x) dx_i + dy_i (x) dy_i)
//! ```
//!
//! and the g-orthonormal frame is `X_i = 2 d/dy_i`, `X_{m+i} = phi X_i`,
//! `xi_a`. Frame indices used throughout the crate follow that order:
//! `0..m` are `X_i`, `m..2m` are `X_{m+i}`, `2m..2m+s` are `xi_a`.
//!
//! Everything that only needs the structure tensors at a point is written
//! against [`Scalar`], so the same kernels evaluate on `f64` or on Taylor jets.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::fd;
use crate::jet::{Jet, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ManifoldError {
    #[error("invalid model dimensions m={m}, s={s}: both must be at least 1")]
    InvalidDimensions { m: usize, s: usize },
    #[error("dimension mismatch: expected {expected} components, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("structure index {index} out of range (s = {s})")]
    IndexOutOfRange { index: usize, s: usize },
    #[error("tangent vectors are based at different points")]
    BaseMismatch,
    #[error("differentiation stencil at t={t} leaves the window [{start}, {end}]")]
    StencilUnderflow { t: f64, start: f64, end: f64 },
    #[error("finite-difference step {0} is too small for a stable estimate")]
    StepTooSmall(f64),
}

/// Dimensions of `R^(2m+s)(-3s)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ModelParams {
    m: usize,
    s: usize,
}

impl ModelParams {
    pub fn new(m: usize, s: usize) -> Result<Self, ManifoldError> {
        if m == 0 || s == 0 {
            return Err(ManifoldError::InvalidDimensions { m, s });
        }
        Ok(ModelParams { m, s })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn s(&self) -> usize {
        self.s
    }

    /// Total dimension `2m + s`.
    pub fn dim(&self) -> usize {
        2 * self.m + self.s
    }

    /// Constant phi-sectional curvature, always `-3s`.
    pub fn c(&self) -> f64 {
        -3.0 * self.s as f64
    }

    pub fn constants(&self) -> SpaceConstants {
        SpaceConstants { c: self.c(), s: self.s as f64 }
    }

    fn x(&self, i: usize) -> usize {
        i
    }

    fn y(&self, i: usize) -> usize {
        self.m + i
    }

    fn z(&self, a: usize) -> usize {
        2 * self.m + a
    }

    fn check_len(&self, len: usize) -> Result<(), ManifoldError> {
        if len != self.dim() {
            return Err(ManifoldError::DimensionMismatch { expected: self.dim(), got: len });
        }
        Ok(())
    }
}

/// The pair `(c, s)` entering the curvature identities. Inside the model
/// `c = -3s`; other values describe hypothetical space forms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpaceConstants {
    pub c: f64,
    pub s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Point(pub Vec<f64>);

impl Point {
    pub fn new(params: &ModelParams, coords: Vec<f64>) -> Result<Self, ManifoldError> {
        params.check_len(coords.len())?;
        Ok(Point(coords))
    }

    pub fn origin(params: &ModelParams) -> Self {
        Point(vec![0.0; params.dim()])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }
}

/// Tangent vector in coordinate components.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Tangent {
    pub base: Point,
    pub components: Vec<f64>,
}

impl Tangent {
    pub fn new(base: Point, components: Vec<f64>) -> Result<Self, ManifoldError> {
        if base.0.len() != components.len() {
            return Err(ManifoldError::DimensionMismatch {
                expected: base.0.len(),
                got: components.len(),
            });
        }
        Ok(Tangent { base, components })
    }

    fn same_base(&self, other: &Tangent) -> Result<(), ManifoldError> {
        if self.base != other.base {
            return Err(ManifoldError::BaseMismatch);
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Pointwise kernels

/// `phi v` at `p`.
pub fn phi<S: Scalar>(params: &ModelParams, p: &[S], v: &[S]) -> Vec<S> {
    let mut out = vec![S::zero(); params.dim()];
    let mut vert = S::zero();
    for i in 0..params.m {
        let yi = v[params.y(i)];
        out[params.x(i)] = yi;
        out[params.y(i)] = -v[params.x(i)];
        vert += yi * p[params.y(i)];
    }
    for a in 0..params.s {
        out[params.z(a)] = vert;
    }
    out
}

/// `eta^alpha(v)` at `p` (0-based `alpha`).
pub fn eta<S: Scalar>(params: &ModelParams, alpha: usize, p: &[S], v: &[S]) -> S {
    let mut acc = v[params.z(alpha)];
    for i in 0..params.m {
        acc -= p[params.y(i)] * v[params.x(i)];
    }
    acc.scale(0.5)
}

/// `sum_a eta^a(v)`.
pub fn eta_sum<S: Scalar>(params: &ModelParams, p: &[S], v: &[S]) -> S {
    let mut acc = S::zero();
    for a in 0..params.s {
        acc += eta(params, a, p, v);
    }
    acc
}

/// `g(u, v)` at `p`.
pub fn inner<S: Scalar>(params: &ModelParams, p: &[S], u: &[S], v: &[S]) -> S {
    let mut acc = S::zero();
    for a in 0..params.s {
        acc += eta(params, a, p, u) * eta(params, a, p, v);
    }
    let mut flat = S::zero();
    for i in 0..params.m {
        flat += u[params.x(i)] * v[params.x(i)] + u[params.y(i)] * v[params.y(i)];
    }
    acc + flat.scale(0.25)
}

pub fn norm<S: Scalar>(params: &ModelParams, p: &[S], v: &[S]) -> S {
    inner(params, p, v, v).sqrt()
}

/// Coordinate components of `xi_alpha` (constant in these coordinates).
pub fn xi<S: Scalar>(params: &ModelParams, alpha: usize) -> Vec<S> {
    let mut v = vec![S::zero(); params.dim()];
    v[params.z(alpha)] = S::cst(2.0);
    v
}

/// `sum_a xi_a`.
pub fn xi_sum<S: Scalar>(params: &ModelParams) -> Vec<S> {
    let mut v = vec![S::zero(); params.dim()];
    for a in 0..params.s {
        v[params.z(a)] = S::cst(2.0);
    }
    v
}

/// Coordinate components of orthonormal frame vector `index` at `p`.
pub fn frame_vector<S: Scalar>(params: &ModelParams, p: &[S], index: usize) -> Vec<S> {
    let mut v = vec![S::zero(); params.dim()];
    let m = params.m;
    if index < m {
        v[params.y(index)] = S::cst(2.0);
    } else if index < 2 * m {
        let i = index - m;
        v[params.x(i)] = S::cst(2.0);
        for a in 0..params.s {
            v[params.z(a)] = p[params.y(i)].scale(2.0);
        }
    } else {
        v[params.z(index - 2 * m)] = S::cst(2.0);
    }
    v
}

/// Maps orthonormal-frame components to coordinate components at `p`.
pub fn from_frame<S: Scalar>(params: &ModelParams, p: &[S], frame: &[S]) -> Vec<S> {
    let mut out = vec![S::zero(); params.dim()];
    for (k, c) in frame.iter().enumerate() {
        let e = frame_vector(params, p, k);
        for (o, ek) in out.iter_mut().zip(e) {
            *o += *c * ek;
        }
    }
    out
}

/// Maps coordinate components to orthonormal-frame components at `p`.
pub fn to_frame<S: Scalar>(params: &ModelParams, p: &[S], v: &[S]) -> Vec<S> {
    (0..params.dim())
        .map(|k| inner(params, p, &frame_vector(params, p, k), v))
        .collect()
}

/// Metric coefficients `g_ij` at `p`.
pub fn metric_matrix(params: &ModelParams, p: &[f64]) -> DMatrix<f64> {
    let n = params.dim();
    DMatrix::from_fn(n, n, |i, j| {
        let mut ei = vec![0.0; n];
        let mut ej = vec![0.0; n];
        ei[i] = 1.0;
        ej[j] = 1.0;
        inner(params, p, &ei, &ej)
    })
}

/// Inverse metric `g^ij` at `p`, in closed form.
pub fn inverse_metric(params: &ModelParams, p: &[f64]) -> DMatrix<f64> {
    let n = params.dim();
    let mut g = DMatrix::zeros(n, n);
    let ysq: f64 = (0..params.m).map(|i| p[params.y(i)].powi(2)).sum();
    for i in 0..params.m {
        g[(params.x(i), params.x(i))] = 4.0;
        g[(params.y(i), params.y(i))] = 4.0;
        for a in 0..params.s {
            g[(params.x(i), params.z(a))] = 4.0 * p[params.y(i)];
            g[(params.z(a), params.x(i))] = 4.0 * p[params.y(i)];
        }
    }
    for a in 0..params.s {
        for b in 0..params.s {
            g[(params.z(a), params.z(b))] = 4.0 * (if a == b { 1.0 } else { 0.0 } + ysq);
        }
    }
    g
}

/// `Gamma(v, w)^k = Gamma^k_ij v^i w^j` from the closed-form symbols.
///
/// Only the y-derivatives of the metric are nonzero, which gives the
/// lowered contraction `C_l` in a few sums; raising with the closed-form
/// inverse metric finishes the job.
pub fn christoffel_contract<S: Scalar>(params: &ModelParams, p: &[S], v: &[S], w: &[S]) -> Vec<S> {
    let (m, s) = (params.m, params.s);
    let sf = s as f64;
    let y = |i: usize| p[params.y(i)];
    let vx = |i: usize| v[params.x(i)];
    let vy = |i: usize| v[params.y(i)];
    let wx = |i: usize| w[params.x(i)];
    let wy = |i: usize| w[params.y(i)];
    let vz_sum = (0..s).fold(S::zero(), |acc, a| acc + v[params.z(a)]);
    let wz_sum = (0..s).fold(S::zero(), |acc, a| acc + w[params.z(a)]);

    let mut y_dot_vx = S::zero();
    let mut y_dot_wx = S::zero();
    let mut mixed = S::zero();
    for i in 0..m {
        y_dot_vx += y(i) * vx(i);
        y_dot_wx += y(i) * wx(i);
        mixed += vy(i) * wx(i) + vx(i) * wy(i);
    }

    let mut c_x = Vec::with_capacity(m);
    let mut c_y = Vec::with_capacity(m);
    for b in 0..m {
        let mut acc = S::zero();
        for a in 0..m {
            acc += y(a) * (vy(b) * wx(a) + vx(a) * wy(b));
        }
        acc += y(b) * mixed;
        let cx = acc.scale(sf / 8.0) - (vy(b) * wz_sum + vz_sum * wy(b)).scale(0.125);
        c_x.push(cx);
        let cy = -(vx(b) * y_dot_wx + y_dot_vx * wx(b)).scale(sf / 8.0)
            + (vx(b) * wz_sum + vz_sum * wx(b)).scale(0.125);
        c_y.push(cy);
    }
    // Every C_{z_a} is the same.
    let c_z = mixed.scale(-0.125);
    let c_z_sum = c_z.scale(sf);

    let mut ysq = S::zero();
    let mut y_dot_cx = S::zero();
    for i in 0..m {
        ysq += y(i) * y(i);
        y_dot_cx += y(i) * c_x[i];
    }

    let mut out = vec![S::zero(); params.dim()];
    for i in 0..m {
        out[params.x(i)] = (c_x[i] + y(i) * c_z_sum).scale(4.0);
        out[params.y(i)] = c_y[i].scale(4.0);
    }
    for a in 0..s {
        out[params.z(a)] = (y_dot_cx + c_z + ysq * c_z_sum).scale(4.0);
    }
    out
}

/// Full table `Gamma^k_ij`, flattened as `[k][i][j]`.
pub fn christoffel_symbols(params: &ModelParams, p: &[f64]) -> Vec<f64> {
    let n = params.dim();
    let mut out = vec![0.0; n * n * n];
    for i in 0..n {
        for j in 0..n {
            let mut ei = vec![0.0; n];
            let mut ej = vec![0.0; n];
            ei[i] = 1.0;
            ej[j] = 1.0;
            let g = christoffel_contract(params, p, &ei, &ej);
            for k in 0..n {
                out[(k * n + i) * n + j] = g[k];
            }
        }
    }
    out
}

/// `Gamma^k_ij` from fourth-order differences of the metric and a numerically
/// inverted metric. Independent of [`christoffel_contract`].
pub fn christoffel_symbols_fd(params: &ModelParams, p: &[f64], h: f64) -> Vec<f64> {
    let n = params.dim();
    let mut dg = Vec::with_capacity(n);
    for l in 0..n {
        let shifted = |tau: f64| {
            let mut q = p.to_vec();
            q[l] += tau;
            metric_matrix(params, &q)
        };
        let (m2, m1, p1, p2) = (shifted(-2.0 * h), shifted(-h), shifted(h), shifted(2.0 * h));
        dg.push((m2 - m1 * 8.0 + p1 * 8.0 - p2) / (12.0 * h));
    }
    let ginv = metric_matrix(params, p)
        .try_inverse()
        .expect("metric of the model space is positive definite");
    let mut out = vec![0.0; n * n * n];
    for k in 0..n {
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for l in 0..n {
                    acc += ginv[(k, l)] * (dg[i][(l, j)] + dg[j][(l, i)] - dg[l][(i, j)]);
                }
                out[(k * n + i) * n + j] = 0.5 * acc;
            }
        }
    }
    out
}

fn contract_table(table: &[f64], n: usize, v: &[f64], w: &[f64]) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    acc += table[(k * n + i) * n + j] * v[i] * w[j];
                }
            }
            acc
        })
        .collect()
}

/// Where the connection coefficients come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ChristoffelSource {
    Analytic,
    FiniteDifference { step: f64 },
}

impl ChristoffelSource {
    pub fn contract(&self, params: &ModelParams, p: &[f64], v: &[f64], w: &[f64]) -> Vec<f64> {
        match *self {
            ChristoffelSource::Analytic => christoffel_contract(params, p, v, w),
            ChristoffelSource::FiniteDifference { step } => {
                contract_table(&christoffel_symbols_fd(params, p, step), params.dim(), v, w)
            }
        }
    }
}

/// `nabla_T W` along a curve whose position is given as a vector of jets.
/// `T` is the derivative of the position; `field` holds the jets of `W`.
pub fn covariant_derivative_jet(params: &ModelParams, position: &[Jet], field: &[Jet]) -> Vec<Jet> {
    let velocity: Vec<Jet> = position.iter().map(Jet::derivative).collect();
    covariant_derivative_jet_with(params, position, &velocity, field)
}

/// Same as [`covariant_derivative_jet`] with a precomputed velocity.
pub fn covariant_derivative_jet_with(
    params: &ModelParams,
    position: &[Jet],
    velocity: &[Jet],
    field: &[Jet],
) -> Vec<Jet> {
    let gamma = christoffel_contract(params, position, velocity, field);
    field
        .iter()
        .zip(gamma)
        .map(|(w, g)| w.derivative() + g)
        .collect()
}

/// `nabla_T W` at parameter `t` for a curve and a field along it supplied as
/// closures, using fourth-order central differences with step `h`.
#[allow(clippy::too_many_arguments)]
pub fn covariant_derivative(
    params: &ModelParams,
    curve: &dyn Fn(f64) -> Vec<f64>,
    field: &dyn Fn(f64) -> Vec<f64>,
    t: f64,
    window: Option<(f64, f64)>,
    h: f64,
    source: ChristoffelSource,
) -> Result<Tangent, ManifoldError> {
    if h < 1e-8 {
        return Err(ManifoldError::StepTooSmall(h));
    }
    if let Some((start, end)) = window {
        if t - 2.0 * h < start || t + 2.0 * h > end {
            return Err(ManifoldError::StencilUnderflow { t, start, end });
        }
    }
    let p = curve(t);
    params.check_len(p.len())?;
    let w = field(t);
    params.check_len(w.len())?;
    let velocity = fd::central_first_vec(curve, t, h);
    let rate = fd::central_first_vec(field, t, h);
    let gamma = source.contract(params, &p, &velocity, &w);
    let comps = rate.iter().zip(gamma).map(|(a, b)| a + b).collect();
    Ok(Tangent { base: Point(p), components: comps })
}

// ---------------------------------------------------------------------------
// Tangent-level operations

pub fn phi_apply(params: &ModelParams, v: &Tangent) -> Result<Tangent, ManifoldError> {
    params.check_len(v.components.len())?;
    params.check_len(v.base.0.len())?;
    Ok(Tangent { base: v.base.clone(), components: phi(params, &v.base.0, &v.components) })
}

/// `eta^alpha(v)`, 0-based `alpha`.
pub fn eta_eval(params: &ModelParams, alpha: usize, v: &Tangent) -> Result<f64, ManifoldError> {
    if alpha >= params.s {
        return Err(ManifoldError::IndexOutOfRange { index: alpha, s: params.s });
    }
    params.check_len(v.components.len())?;
    Ok(eta(params, alpha, &v.base.0, &v.components))
}

pub fn metric_eval(params: &ModelParams, u: &Tangent, v: &Tangent) -> Result<f64, ManifoldError> {
    u.same_base(v)?;
    params.check_len(u.components.len())?;
    params.check_len(v.components.len())?;
    Ok(inner(params, &u.base.0, &u.components, &v.components))
}

/// `xi_alpha` at `p`.
pub fn xi_at(params: &ModelParams, alpha: usize, p: &Point) -> Result<Tangent, ManifoldError> {
    if alpha >= params.s {
        return Err(ManifoldError::IndexOutOfRange { index: alpha, s: params.s });
    }
    Ok(Tangent { base: p.clone(), components: xi(params, alpha) })
}

/// Frame vector (see module docs for the index convention) at `p`.
pub fn frame_at(params: &ModelParams, index: usize, p: &Point) -> Tangent {
    Tangent { base: p.clone(), components: frame_vector(params, &p.0, index) }
}

// ---------------------------------------------------------------------------
// Curvature

/// Closed-form curvature tensor of an S-space form with constants `(c, s)`,
/// evaluated with the structure tensors of the model at `p`.
pub fn curvature_formula(
    params: &ModelParams,
    consts: SpaceConstants,
    p: &[f64],
    x: &[f64],
    y: &[f64],
    z: &[f64],
) -> Vec<f64> {
    let n = params.dim();
    let (c, s) = (consts.c, consts.s);
    let phix = phi(params, p, x);
    let phiy = phi(params, p, y);
    let phiz = phi(params, p, z);
    let phi2x = phi(params, p, &phix);
    let phi2y = phi(params, p, &phiy);
    let ex = eta_sum(params, p, x);
    let ey = eta_sum(params, p, y);
    let ez = eta_sum(params, p, z);
    let g_pxpz = inner(params, p, &phix, &phiz);
    let g_pypz = inner(params, p, &phiy, &phiz);
    let g_x_pz = inner(params, p, x, &phiz);
    let g_y_pz = inner(params, p, y, &phiz);
    let g_x_py = inner(params, p, x, &phiy);
    let xis: Vec<f64> = xi_sum(params);
    let k1 = (c + 3.0 * s) / 4.0;
    let k2 = (c - s) / 4.0;
    (0..n)
        .map(|k| {
            let framed = ex * ez * phi2y[k] - ey * ez * phi2x[k] - g_pxpz * ey * xis[k]
                + g_pypz * ex * xis[k];
            let holo = k1 * (-g_pypz * phi2x[k] + g_pxpz * phi2y[k]);
            let twist = k2 * (g_x_pz * phiy[k] - g_y_pz * phix[k] + 2.0 * g_x_py * phiz[k]);
            framed + holo + twist
        })
        .collect()
}

/// `R(X,Y)Z` of the model (`c = -3s`).
pub fn curvature_model(
    params: &ModelParams,
    x: &Tangent,
    y: &Tangent,
    z: &Tangent,
) -> Result<Tangent, ManifoldError> {
    x.same_base(y)?;
    x.same_base(z)?;
    params.check_len(x.components.len())?;
    params.check_len(y.components.len())?;
    params.check_len(z.components.len())?;
    let r = curvature_formula(
        params,
        params.constants(),
        &x.base.0,
        &x.components,
        &y.components,
        &z.components,
    );
    Ok(Tangent { base: x.base.clone(), components: r })
}

/// A vector field given by its coordinate components as a function of the point.
pub type VectorField<'a> = &'a dyn Fn(&[f64]) -> Vec<f64>;

fn directional<F: Fn(&[f64]) -> Vec<f64>>(f: F, p: &[f64], dir: &[f64], h: f64) -> Vec<f64> {
    fd::central_first_vec(
        |tau| {
            let q: Vec<f64> = p.iter().zip(dir).map(|(a, b)| a + tau * b).collect();
            f(&q)
        },
        0.0,
        h,
    )
}

fn nabla_fd(params: &ModelParams, p: &[f64], x: VectorField, z: VectorField, h: f64) -> Vec<f64> {
    let xv = x(p);
    let dz = directional(z, p, &xv, h);
    let table = christoffel_symbols_fd(params, p, h);
    let g = contract_table(&table, params.dim(), &xv, &z(p));
    dz.iter().zip(g).map(|(a, b)| a + b).collect()
}

/// `R(X,Y)Z = nabla_X nabla_Y Z - nabla_Y nabla_X Z - nabla_[X,Y] Z` at `p`
/// by nested central differences over finite-difference connection
/// coefficients. Serves as an oracle for [`curvature_formula`].
pub fn curvature_numeric(
    params: &ModelParams,
    p: &[f64],
    x: VectorField,
    y: VectorField,
    z: VectorField,
    h: f64,
) -> Result<Vec<f64>, ManifoldError> {
    params.check_len(p.len())?;
    if h < 1e-6 {
        return Err(ManifoldError::StepTooSmall(h));
    }
    let nyz = |q: &[f64]| nabla_fd(params, q, y, z, h);
    let nxz = |q: &[f64]| nabla_fd(params, q, x, z, h);
    let xy = nabla_fd(params, p, x, &nyz, h);
    let yx = nabla_fd(params, p, y, &nxz, h);
    let xv = x(p);
    let yv = y(p);
    let dxy = directional(y, p, &xv, h);
    let dyx = directional(x, p, &yv, h);
    let bracket: Vec<f64> = dxy.iter().zip(&dyx).map(|(a, b)| a - b).collect();
    let bracket_field = |_: &[f64]| bracket.clone();
    let nb = nabla_fd(params, p, &bracket_field, z, h);
    Ok((0..params.dim()).map(|k| xy[k] - yx[k] - nb[k]).collect())
}

// ---------------------------------------------------------------------------
// Batch verification

pub fn random_coords(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect()
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Maximum residual of each structure identity over random samples.
#[derive(Debug, Clone, Serialize)]
pub struct StructureReport {
    pub seed: u64,
    pub samples: usize,
    pub phi_squared: f64,
    pub eta_phi: f64,
    pub eta_xi: f64,
    pub phi_xi: f64,
    pub metric_compatibility: f64,
    pub eta_is_dual_of_xi: f64,
    pub d_eta: f64,
}

impl StructureReport {
    pub fn max_residual(&self) -> f64 {
        [
            self.phi_squared,
            self.eta_phi,
            self.eta_xi,
            self.phi_xi,
            self.metric_compatibility,
            self.eta_is_dual_of_xi,
            self.d_eta,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn entries(&self) -> Vec<(&'static str, f64)> {
        vec![
            ("phi^2 X = -X + sum eta(X) xi", self.phi_squared),
            ("eta(phi X) = 0", self.eta_phi),
            ("eta_a(xi_b) = delta", self.eta_xi),
            ("phi xi = 0", self.phi_xi),
            ("g(X,Y) = g(phiX,phiY) + sum eta eta", self.metric_compatibility),
            ("eta_a(X) = g(X, xi_a)", self.eta_is_dual_of_xi),
            ("d eta(X,Y) = g(X, phi Y)", self.d_eta),
        ]
    }
}

/// Evaluates the framed-metric identities at pseudo-random points and vectors.
pub fn verify_structure(params: &ModelParams, samples: usize, seed: u64) -> StructureReport {
    verify_structure_perturbed(params, samples, seed, 0.0)
}

/// [`verify_structure`] against a metric with `delta * dx_1 (x) dx_1` added;
/// a nonzero `delta` must show up as a residual.
pub fn verify_structure_perturbed(
    params: &ModelParams,
    samples: usize,
    seed: u64,
    delta: f64,
) -> StructureReport {
    let n = params.dim();
    let s = params.s;
    let metric = |p: &[f64], u: &[f64], v: &[f64]| inner(params, p, u, v) + delta * u[0] * v[0];
    let mut rng = seeded_rng(seed);
    let mut rep = StructureReport {
        seed,
        samples,
        phi_squared: 0.0,
        eta_phi: 0.0,
        eta_xi: 0.0,
        phi_xi: 0.0,
        metric_compatibility: 0.0,
        eta_is_dual_of_xi: 0.0,
        d_eta: 0.0,
    };
    for _ in 0..samples.max(1) {
        let p = random_coords(&mut rng, n);
        let u = random_coords(&mut rng, n);
        let v = random_coords(&mut rng, n);
        let pu = phi(params, &p, &u);
        let ppu = phi(params, &p, &pu);
        for k in 0..n {
            let mut rhs = -u[k];
            for a in 0..s {
                rhs += eta(params, a, &p, &u) * xi::<f64>(params, a)[k];
            }
            rep.phi_squared = rep.phi_squared.max((ppu[k] - rhs).abs());
        }
        for a in 0..s {
            rep.eta_phi = rep.eta_phi.max(eta(params, a, &p, &pu).abs());
            let xa = xi::<f64>(params, a);
            for b in 0..s {
                let target = if a == b { 1.0 } else { 0.0 };
                let got = eta(params, b, &p, &xa);
                rep.eta_xi = rep.eta_xi.max((got - target).abs());
            }
            let pxi = phi(params, &p, &xa);
            rep.phi_xi = rep.phi_xi.max(pxi.iter().fold(0.0, |m, c| m.max(c.abs())));
            let dual = eta(params, a, &p, &u) - metric(&p, &u, &xa);
            rep.eta_is_dual_of_xi = rep.eta_is_dual_of_xi.max(dual.abs());

            // d eta(X,Y) = (X(eta(Y)) - Y(eta(X)) - eta([X,Y])) / 2 for
            // constant-coefficient X, Y; the directional derivatives are
            // taken exactly with jets.
            let along = |dir: &[f64], w: &[f64]| {
                let pj: Vec<Jet> = p
                    .iter()
                    .zip(dir)
                    .map(|(a, b)| Jet::variable(0.0) * *b + *a)
                    .collect();
                let wj: Vec<Jet> = w.iter().map(|c| Jet::constant(*c)).collect();
                eta(params, a, &pj, &wj).deriv(1).unwrap()
            };
            let d_eta = 0.5 * (along(&u, &v) - along(&v, &u));
            let pv = phi(params, &p, &v);
            rep.d_eta = rep.d_eta.max((d_eta - metric(&p, &u, &pv)).abs());
        }
        let mut compat = metric(&p, &pu, &phi(params, &p, &v));
        for a in 0..s {
            compat += eta(params, a, &p, &u) * eta(params, a, &p, &v);
        }
        rep.metric_compatibility = rep.metric_compatibility.max((metric(&p, &u, &v) - compat).abs());
    }
    rep
}

/// Residuals of the connection identities over random samples.
#[derive(Debug, Clone, Serialize)]
pub struct ConnectionReport {
    pub seed: u64,
    pub samples: usize,
    pub source: ChristoffelSource,
    pub metric_compatibility: f64,
    pub torsion: f64,
    pub nabla_xi: f64,
    pub nabla_phi: f64,
}

impl ConnectionReport {
    pub fn max_residual(&self) -> f64 {
        self.metric_compatibility
            .max(self.torsion)
            .max(self.nabla_xi)
            .max(self.nabla_phi)
    }
}

/// Checks metric compatibility, torsion-freeness, `nabla xi_a = -phi` and the
/// `(nabla_X phi) Y` identity. The analytic path differentiates with jets; the
/// finite-difference path uses central differences throughout.
pub fn verify_connection(
    params: &ModelParams,
    samples: usize,
    seed: u64,
    source: ChristoffelSource,
) -> ConnectionReport {
    let n = params.dim();
    let s = params.s;
    let mut rng = seeded_rng(seed);
    let mut rep = ConnectionReport {
        seed,
        samples,
        source,
        metric_compatibility: 0.0,
        torsion: 0.0,
        nabla_xi: 0.0,
        nabla_phi: 0.0,
    };
    let max_abs = |v: &[f64]| v.iter().fold(0.0_f64, |m, c| m.max(c.abs()));
    for _ in 0..samples.max(1) {
        let p = random_coords(&mut rng, n);
        let x = random_coords(&mut rng, n);
        let v = random_coords(&mut rng, n);
        let w = random_coords(&mut rng, n);

        // Directional derivative along X of a point function.
        let d_along = |f: &dyn Fn(&[Jet]) -> Vec<Jet>, ff: &dyn Fn(&[f64]) -> Vec<f64>| -> Vec<f64> {
            match source {
                ChristoffelSource::Analytic => {
                    let pj: Vec<Jet> =
                        p.iter().zip(&x).map(|(a, b)| Jet::variable(0.0) * *b + *a).collect();
                    f(&pj).iter().map(|j| j.deriv(1).unwrap()).collect()
                }
                ChristoffelSource::FiniteDifference { step } => directional(ff, &p, &x, step),
            }
        };
        let cst = |u: &[f64]| u.iter().map(|c| Jet::constant(*c)).collect::<Vec<Jet>>();

        let vj = cst(&v);
        let wj = cst(&w);
        let dg = d_along(
            &|q: &[Jet]| vec![inner(params, q, &vj, &wj)],
            &|q: &[f64]| vec![inner(params, q, &v, &w)],
        )[0];
        let nv = source.contract(params, &p, &x, &v);
        let nw = source.contract(params, &p, &x, &w);
        let compat = dg - inner(params, &p, &nv, &w) - inner(params, &p, &v, &nw);
        rep.metric_compatibility = rep.metric_compatibility.max(compat.abs());

        let table = match source {
            ChristoffelSource::Analytic => christoffel_symbols(params, &p),
            ChristoffelSource::FiniteDifference { step } => christoffel_symbols_fd(params, &p, step),
        };
        for k in 0..n {
            for i in 0..n {
                for j in 0..i {
                    let d = table[(k * n + i) * n + j] - table[(k * n + j) * n + i];
                    rep.torsion = rep.torsion.max(d.abs());
                }
            }
        }

        let px = phi(params, &p, &x);
        for a in 0..s {
            let nx = source.contract(params, &p, &x, &xi::<f64>(params, a));
            let r: Vec<f64> = nx.iter().zip(&px).map(|(a, b)| a + b).collect();
            rep.nabla_xi = rep.nabla_xi.max(max_abs(&r));
        }

        // (nabla_X phi) V with V extended by constant coefficients.
        let dphi = d_along(&|q: &[Jet]| phi(params, q, &vj), &|q: &[f64]| phi(params, q, &v));
        let pv = phi(params, &p, &v);
        let g_pv = source.contract(params, &p, &x, &pv);
        let phi_nv = phi(params, &p, &nv);
        let lhs: Vec<f64> = (0..n).map(|k| dphi[k] + g_pv[k] - phi_nv[k]).collect();
        let g_phix_phiv = inner(params, &p, &px, &pv);
        let ppx = phi(params, &p, &px);
        let xis = xi_sum::<f64>(params);
        let ev = eta_sum(params, &p, &v);
        let r: Vec<f64> = (0..n)
            .map(|k| lhs[k] - (g_phix_phiv * xis[k] + ev * ppx[k]))
            .collect();
        rep.nabla_phi = rep.nabla_phi.max(max_abs(&r));
    }
    rep
}

/// Agreement between the closed-form curvature tensor and the numerical oracle.
#[derive(Debug, Clone, Serialize)]
pub struct CurvatureReport {
    pub seed: u64,
    pub tuples: usize,
    pub max_relative_error: f64,
    pub phi_sections: usize,
    pub max_phi_sectional_error: f64,
}

/// Horizontal unit vector obtained from `u` by removing its `xi` components.
pub fn horizontal_unit(params: &ModelParams, p: &[f64], u: &[f64]) -> Vec<f64> {
    let mut h = u.to_vec();
    for a in 0..params.s {
        let e = eta(params, a, p, u);
        let xa: Vec<f64> = xi(params, a);
        for k in 0..h.len() {
            h[k] -= e * xa[k];
        }
    }
    let nrm = norm(params, p, &h);
    h.iter().map(|c| c / nrm).collect()
}

pub fn verify_curvature(
    params: &ModelParams,
    tuples: usize,
    phi_sections: usize,
    seed: u64,
    h: f64,
) -> CurvatureReport {
    let n = params.dim();
    let mut rng = seeded_rng(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..tuples {
        let p = random_coords(&mut rng, n);
        let x = random_coords(&mut rng, n);
        let y = random_coords(&mut rng, n);
        let z = random_coords(&mut rng, n);
        let model = curvature_formula(params, params.constants(), &p, &x, &y, &z);
        let (xf, yf, zf) = (x.clone(), y.clone(), z.clone());
        let numeric = curvature_numeric(
            params,
            &p,
            &move |_: &[f64]| xf.clone(),
            &move |_: &[f64]| yf.clone(),
            &move |_: &[f64]| zf.clone(),
            h,
        )
        .expect("dimensions are consistent");
        let diff: Vec<f64> = model.iter().zip(&numeric).map(|(a, b)| a - b).collect();
        let scale = norm(params, &p, &model).max(1.0);
        worst = worst.max(norm(params, &p, &diff) / scale);
    }
    let mut worst_sec: f64 = 0.0;
    for _ in 0..phi_sections {
        let p = random_coords(&mut rng, n);
        let u = random_coords(&mut rng, n);
        let x = horizontal_unit(params, &p, &u);
        let px = phi(params, &p, &x);
        let (xf, pf) = (x.clone(), px.clone());
        let r = curvature_numeric(
            params,
            &p,
            &move |_: &[f64]| xf.clone(),
            &move |_: &[f64]| pf.clone(),
            &{
                let pf = px.clone();
                move |_: &[f64]| pf.clone()
            },
            h,
        )
        .expect("dimensions are consistent");
        let k = inner(params, &p, &r, &x);
        worst_sec = worst_sec.max((k - params.c()).abs());
    }
    CurvatureReport {
        seed,
        tuples,
        max_relative_error: worst,
        phi_sections,
        max_phi_sectional_error: worst_sec,
    }
}
