//! Finite-difference stencils.
//!
//! Weights come from Fornberg's recursion, so the same code serves central
//! stencils in the interior of a grid, one-sided stencils at its ends, and
//! non-uniform grids.

/// Default step for central differences on unit-scale coordinates.
pub const DEFAULT_STEP: f64 = 1e-4;

/// Weights for derivatives `0..=max_deriv` at `x0` from the nodes `xs`.
///
/// `result[d][j]` multiplies `f(xs[j])` in the estimate of `f^(d)(x0)`.
pub fn fornberg_weights(x0: f64, xs: &[f64], max_deriv: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut c = vec![vec![0.0; n]; max_deriv + 1];
    c[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(max_deriv);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[k][i] = c1 * (k as f64 * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                }
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                c[k][j] = (c4 * c[k][j] - k as f64 * c[k - 1][j]) / c3;
            }
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    c
}

/// Number of nodes giving fourth-order accuracy for the `deriv`-th derivative
/// with a symmetric stencil.
pub fn central_width(deriv: usize) -> usize {
    let w = deriv + 3;
    if w % 2 == 0 {
        w + 1
    } else {
        w
    }
}

/// Chooses the node window for `deriv` at grid index `i`: centered when the
/// grid allows it, otherwise shifted to one side with `deriv + 4` nodes.
/// Returns `None` when the grid is too short.
pub fn stencil_window(len: usize, i: usize, deriv: usize) -> Option<(usize, usize)> {
    let cw = central_width(deriv);
    let half = cw / 2;
    if i >= half && i + half < len {
        return Some((i - half, i + half + 1));
    }
    let w = deriv + 4;
    if len < w {
        return None;
    }
    let start = if i < half { 0 } else { len - w };
    Some((start, start + w))
}

/// Derivative of order `deriv` of sampled data at every grid node.
pub fn differentiate_samples(ts: &[f64], ys: &[f64], deriv: usize) -> Option<Vec<f64>> {
    let mut out = Vec::with_capacity(ts.len());
    for i in 0..ts.len() {
        let (lo, hi) = stencil_window(ts.len(), i, deriv)?;
        let w = fornberg_weights(ts[i], &ts[lo..hi], deriv);
        out.push(w[deriv].iter().zip(&ys[lo..hi]).map(|(a, b)| a * b).sum());
    }
    Some(out)
}

/// Fourth-order central first derivative of `f` at `x` with step `h`.
pub fn central_first<F: Fn(f64) -> f64>(f: F, x: f64, h: f64) -> f64 {
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

/// Fourth-order central first derivative of a vector-valued map.
pub fn central_first_vec<F: Fn(f64) -> Vec<f64>>(f: F, x: f64, h: f64) -> Vec<f64> {
    let m2 = f(x - 2.0 * h);
    let m1 = f(x - h);
    let p1 = f(x + h);
    let p2 = f(x + 2.0 * h);
    (0..m2.len())
        .map(|k| (m2[k] - 8.0 * m1[k] + 8.0 * p1[k] - p2[k]) / (12.0 * h))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fornberg_reproduces_classic_central_weights() {
        let xs = [-2.0, -1.0, 0.0, 1.0, 2.0];
        let w = fornberg_weights(0.0, &xs, 2);
        let d1 = [1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0];
        let d2 = [-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0];
        for j in 0..5 {
            assert!((w[1][j] - d1[j]).abs() < 1e-14);
            assert!((w[2][j] - d2[j]).abs() < 1e-14);
        }
    }

    #[test]
    fn sampled_derivatives_are_fourth_order_at_ends() {
        let h = 0.01;
        let ts: Vec<f64> = (0..200).map(|i| i as f64 * h).collect();
        let ys: Vec<f64> = ts.iter().map(|t| t.sin()).collect();
        for d in 1..=4 {
            let der = differentiate_samples(&ts, &ys, d).unwrap();
            for (t, v) in ts.iter().zip(&der) {
                let exact = match d % 4 {
                    1 => t.cos(),
                    2 => -t.sin(),
                    3 => -t.cos(),
                    _ => t.sin(),
                };
                let tol = [0.0, 1e-8, 1e-6, 1e-4, 1e-2][d];
                assert!((v - exact).abs() < tol, "d={d} t={t} err={}", (v - exact).abs());
            }
        }
    }

    #[test]
    fn short_grid_underflows() {
        assert!(stencil_window(4, 0, 1).is_none());
        assert!(stencil_window(5, 2, 1).is_some());
    }
}
