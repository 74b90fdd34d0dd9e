//! Small dense maximizers used by the likelihood fits.
//!
//! Objectives return `None` outside their domain; the line search treats that
//! as an infinitely bad point and backtracks.

use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimOptions {
    pub max_iter: usize,
    /// Converged once the max-norm of the gradient drops below this.
    pub grad_tol: f64,
    /// Relative objective change that also counts as convergence...
    pub rel_tol: f64,
    /// ...provided the gradient is at least this small.
    pub loose_grad_tol: f64,
}

impl Default for OptimOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            grad_tol: 1e-8,
            rel_tol: 1e-10,
            loose_grad_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Objective at the start and after every accepted step.
    pub trace: Vec<f64>,
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

struct Point {
    x: DVector<f64>,
    f: f64,
    g: DVector<f64>,
}

/// Backtracking Armijo search along an ascent direction.
fn line_search<F>(f: &mut F, at: &Point, dir: &DVector<f64>, first_step: f64) -> Option<Point>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let slope = at.g.dot(dir);
    if !(slope > 0.0) {
        return None;
    }
    let noise = 1e-13 * at.f.abs().max(1.0);
    let mut step = first_step;
    for _ in 0..60 {
        let x = &at.x + dir * step;
        if let Some((fx, gx)) = f(x.as_slice()) {
            // near the optimum the gain drops below rounding noise; accept a
            // flat step if it shrinks the gradient
            let flat = fx >= at.f - noise && max_abs(&gx) < 0.5 * max_abs(at.g.as_slice());
            if fx.is_finite() && (fx >= at.f + 1e-4 * step * slope || flat) {
                return Some(Point {
                    x,
                    f: fx,
                    g: DVector::from_vec(gx),
                });
            }
        }
        step *= 0.5;
    }
    None
}

fn finish(p: Point, iterations: usize, converged: bool, trace: Vec<f64>) -> OptimOutcome {
    OptimOutcome {
        x: p.x.as_slice().to_vec(),
        value: p.f,
        grad: p.g.as_slice().to_vec(),
        iterations,
        converged,
        trace,
    }
}

fn stop(prev: f64, now: &Point, opts: &OptimOptions) -> bool {
    let g = max_abs(now.g.as_slice());
    g < opts.grad_tol
        || ((now.f - prev).abs() <= opts.rel_tol * now.f.abs().max(1.0) && g < opts.loose_grad_tol)
}

/// BFGS ascent with an inverse-Hessian update.
pub fn bfgs_maximize<F>(mut f: F, x0: &[f64], opts: &OptimOptions) -> Option<OptimOutcome>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>)>,
{
    let n = x0.len();
    let (f0, g0) = f(x0)?;
    let mut cur = Point {
        x: DVector::from_column_slice(x0),
        f: f0,
        g: DVector::from_vec(g0),
    };
    if max_abs(cur.g.as_slice()) < opts.grad_tol {
        return Some(finish(cur, 0, true, vec![f0]));
    }
    // inverse of the negated Hessian
    let mut inv = DMatrix::<f64>::identity(n, n);
    let mut trace = vec![f0];
    let mut first = true;
    for iter in 1..=opts.max_iter {
        let mut dir = &inv * &cur.g;
        if dir.dot(&cur.g) <= 0.0 {
            inv = DMatrix::identity(n, n);
            dir = cur.g.clone();
        }
        let first_step = if first {
            (1.0 / cur.g.norm()).min(1.0)
        } else {
            1.0
        };
        let next = match line_search(&mut f, &cur, &dir, first_step) {
            Some(p) => p,
            None => {
                let ok = max_abs(cur.g.as_slice()) < opts.loose_grad_tol;
                return Some(finish(cur, iter, ok, trace));
            }
        };
        let s = &next.x - &cur.x;
        // ascent: curvature pair uses the negated gradient change
        let y = &cur.g - &next.g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if first {
                inv = DMatrix::identity(n, n) * (sy / y.dot(&y));
            }
            let rho = 1.0 / sy;
            let hy = &inv * &y;
            let yhy = y.dot(&hy);
            inv += (&s * s.transpose()) * (rho * (1.0 + rho * yhy))
                - (&hy * s.transpose() + &s * hy.transpose()) * rho;
            first = false;
        }
        let prev = cur.f;
        cur = next;
        trace.push(cur.f);
        if stop(prev, &cur, opts) {
            return Some(finish(cur, iter, true, trace));
        }
    }
    Some(finish(cur, opts.max_iter, false, trace))
}

/// Damped Newton ascent for objectives with an analytic Hessian.
///
/// When the Hessian is not negative definite a multiple of the identity is
/// subtracted until it is, which moves the step towards steepest ascent.
pub fn newton_maximize<F>(mut f: F, x0: &[f64], opts: &OptimOptions) -> Option<OptimOutcome>
where
    F: FnMut(&[f64]) -> Option<(f64, Vec<f64>, DMatrix<f64>)>,
{
    let n = x0.len();
    let (f0, g0, mut hess) = f(x0)?;
    let mut cur = Point {
        x: DVector::from_column_slice(x0),
        f: f0,
        g: DVector::from_vec(g0),
    };
    if max_abs(cur.g.as_slice()) < opts.grad_tol {
        return Some(finish(cur, 0, true, vec![f0]));
    }
    let mut trace = vec![f0];
    for iter in 1..=opts.max_iter {
        let neg = -&hess;
        let scale = neg.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
        let mut damping = 0.0;
        let dir = loop {
            let mut m = neg.clone();
            for i in 0..n {
                m[(i, i)] += damping;
            }
            if let Some(ch) = m.cholesky() {
                break ch.solve(&cur.g);
            }
            damping = if damping == 0.0 { 1e-8 * scale } else { damping * 10.0 };
            if damping > 1e12 * scale {
                break cur.g.clone();
            }
        };
        let mut hess_next = None;
        let mut eval = |x: &[f64]| {
            f(x).map(|(v, g, h)| {
                hess_next = Some(h);
                (v, g)
            })
        };
        let next = match line_search(&mut eval, &cur, &dir, 1.0) {
            Some(p) => p,
            None => {
                let ok = max_abs(cur.g.as_slice()) < opts.loose_grad_tol;
                return Some(finish(cur, iter, ok, trace));
            }
        };
        // the accepted point is always the last one evaluated
        hess = hess_next.take().expect("hessian at accepted point");
        let prev = cur.f;
        cur = next;
        trace.push(cur.f);
        if stop(prev, &cur, opts) {
            return Some(finish(cur, iter, true, trace));
        }
    }
    Some(finish(cur, opts.max_iter, false, trace))
}
