//! Box-constrained local minimization by spectral projected gradient with
//! Armijo backtracking along the projected direction.

use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxMinOptions {
    pub max_iters: usize,
    /// Stop when `max |P(x - g) - x| <= tol`.
    pub tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxMinResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub iters: usize,
    pub pg_norm: f64,
}

fn project(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, &l), &h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(l, h);
    }
}

fn pg_inf_norm(x: &[f64], g: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
    x.iter()
        .zip(g)
        .zip(lo.iter().zip(hi))
        .map(|((&xi, &gi), (&l, &h))| ((xi - gi).clamp(l, h) - xi).abs())
        .fold(0.0, f64::max)
}

/// Minimizes `f` over `lo <= x <= hi` starting from the projection of `x0`.
/// `eval(x, grad)` returns the objective and writes the gradient.
pub fn minimize_box(
    mut eval: impl FnMut(&[f64], &mut [f64]) -> Result<f64>,
    x0: &[f64],
    lo: &[f64],
    hi: &[f64],
    opts: BoxMinOptions,
) -> Result<BoxMinResult> {
    let dim = x0.len();
    let mut x = x0.to_vec();
    project(&mut x, lo, hi);
    let mut g = vec![0.0; dim];
    let mut f = eval(&x, &mut g)?;

    let mut pg = pg_inf_norm(&x, &g, lo, hi);
    let mut spectral = if pg > 0.0 { (1.0 / pg).clamp(1e-10, 1e10) } else { 1.0 };
    let mut d = vec![0.0; dim];
    let mut cand = vec![0.0; dim];
    let mut g_new = vec![0.0; dim];
    let mut iters = 0;

    while iters < opts.max_iters && pg > opts.tol {
        iters += 1;
        for i in 0..dim {
            d[i] = (x[i] - spectral * g[i]).clamp(lo[i], hi[i]) - x[i];
        }
        let slope: f64 = d.iter().zip(&g).map(|(a, b)| a * b).sum();
        if slope >= 0.0 {
            break;
        }

        let mut t = 1.0;
        let f_new = loop {
            for i in 0..dim {
                cand[i] = (x[i] + t * d[i]).clamp(lo[i], hi[i]);
            }
            let fc = eval(&cand, &mut g_new)?;
            if fc <= f + 1e-4 * t * slope {
                break Some(fc);
            }
            t *= 0.5;
            if t < 1e-20 {
                break None;
            }
        };
        let Some(f_new) = f_new else { break };

        let (mut ss, mut sy) = (0.0, 0.0);
        for i in 0..dim {
            let s = cand[i] - x[i];
            ss += s * s;
            sy += s * (g_new[i] - g[i]);
        }
        spectral = if sy > 0.0 { (ss / sy).clamp(1e-10, 1e10) } else { 1e10 };

        let stalled = ss == 0.0 || (f - f_new) <= 1e-15 * f.abs().max(1.0);
        std::mem::swap(&mut x, &mut cand);
        std::mem::swap(&mut g, &mut g_new);
        f = f_new;
        pg = pg_inf_norm(&x, &g, lo, hi);
        if stalled {
            break;
        }
    }
    Ok(BoxMinResult { x, f, iters, pg_norm: pg })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_with_active_bound() {
        // min (x - 2)^2 + 10 (y + 1)^2 on [0, 1] x [0, 1]  ->  (1, 0)
        let res = minimize_box(
            |x, g| {
                g[0] = 2.0 * (x[0] - 2.0);
                g[1] = 20.0 * (x[1] + 1.0);
                Ok((x[0] - 2.0).powi(2) + 10.0 * (x[1] + 1.0).powi(2))
            },
            &[0.5, 0.5],
            &[0.0, 0.0],
            &[1.0, 1.0],
            BoxMinOptions { max_iters: 100, tol: 1e-10 },
        )
        .unwrap();
        assert_eq!(res.x, vec![1.0, 0.0]);
    }

    #[test]
    fn rosenbrock_interior() {
        let res = minimize_box(
            |x, g| {
                let (a, b) = (x[0], x[1]);
                g[0] = -2.0 * (1.0 - a) - 400.0 * a * (b - a * a);
                g[1] = 200.0 * (b - a * a);
                Ok((1.0 - a).powi(2) + 100.0 * (b - a * a).powi(2))
            },
            &[-1.2, 1.0],
            &[-2.0, -2.0],
            &[2.0, 2.0],
            BoxMinOptions { max_iters: 20_000, tol: 1e-8 },
        )
        .unwrap();
        assert!((res.x[0] - 1.0).abs() < 1e-4 && (res.x[1] - 1.0).abs() < 1e-4, "{:?}", res);
    }
}
