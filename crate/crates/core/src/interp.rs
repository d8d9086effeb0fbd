//! Piecewise-cubic interpolation used for backbone and parameter lookups.

use crate::error::{CoreError, Result};

/// Natural cubic spline through strictly increasing abscissae.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    x: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives at the knots (zero at both ends).
    y2: Vec<f64>,
}

impl CubicSpline {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != y.len() || x.len() < 2 {
            return Err(CoreError::InvalidConfig(format!(
                "spline needs >= 2 matching knots, got {} x {}",
                x.len(),
                y.len()
            )));
        }
        if x.windows(2).any(|w| w[1] <= w[0]) {
            return Err(CoreError::InvalidConfig(
                "spline abscissae must be strictly increasing".into(),
            ));
        }
        let n = x.len();
        let mut y2 = vec![0.0; n];
        if n > 2 {
            // Thomas algorithm on the tridiagonal system for natural ends.
            let mut u = vec![0.0; n - 1];
            for i in 1..n - 1 {
                let sig = (x[i] - x[i - 1]) / (x[i + 1] - x[i - 1]);
                let p = sig * y2[i - 1] + 2.0;
                y2[i] = (sig - 1.0) / p;
                let d = (y[i + 1] - y[i]) / (x[i + 1] - x[i])
                    - (y[i] - y[i - 1]) / (x[i] - x[i - 1]);
                u[i] = (6.0 * d / (x[i + 1] - x[i - 1]) - sig * u[i - 1]) / p;
            }
            y2[n - 1] = 0.0;
            for i in (1..n - 1).rev() {
                y2[i] = y2[i] * y2[i + 1] + u[i];
            }
        }
        Ok(Self { x, y, y2 })
    }

    pub fn x_min(&self) -> f64 {
        self.x[0]
    }

    pub fn x_max(&self) -> f64 {
        *self.x.last().unwrap()
    }

    fn segment(&self, xq: f64) -> Result<usize> {
        let span = self.x_max() - self.x_min();
        let slack = 1e-12 * span.max(self.x_max().abs());
        if xq < self.x_min() - slack || xq > self.x_max() + slack {
            return Err(CoreError::ExtrapolationRefused {
                value: xq,
                min: self.x_min(),
                max: self.x_max(),
            });
        }
        let i = match self.x.binary_search_by(|v| v.total_cmp(&xq)) {
            Ok(i) => i.min(self.x.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.x.len() - 2),
        };
        Ok(i)
    }

    pub fn eval(&self, xq: f64) -> Result<f64> {
        let i = self.segment(xq)?;
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - xq) / h;
        let b = (xq - self.x[i]) / h;
        Ok(a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.y2[i] + (b * b * b - b) * self.y2[i + 1]) * h * h / 6.0)
    }

    pub fn eval_derivative(&self, xq: f64) -> Result<f64> {
        let i = self.segment(xq)?;
        let h = self.x[i + 1] - self.x[i];
        let a = (self.x[i + 1] - xq) / h;
        let b = (xq - self.x[i]) / h;
        Ok((self.y[i + 1] - self.y[i]) / h
            + ((3.0 * b * b - 1.0) * self.y2[i + 1] - (3.0 * a * a - 1.0) * self.y2[i]) * h / 6.0)
    }
}

/// Find all roots of `f` on `[lo, hi]` by a sign scan over `n_scan`
/// subintervals followed by bisection on each bracket.
pub fn bracketed_roots(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n_scan: usize) -> Vec<f64> {
    let mut roots = Vec::new();
    let mut x_prev = lo;
    let mut f_prev = f(lo);
    if f_prev == 0.0 {
        roots.push(lo);
    }
    for i in 1..=n_scan {
        let x = lo + (hi - lo) * i as f64 / n_scan as f64;
        let fx = f(x);
        if fx == 0.0 {
            roots.push(x);
        } else if f_prev != 0.0 && f_prev.signum() != fx.signum() {
            let (mut a, mut b) = (x_prev, x);
            let (mut fa, _fb) = (f_prev, fx);
            for _ in 0..80 {
                let m = 0.5 * (a + b);
                let fm = f(m);
                if fm == 0.0 {
                    a = m;
                    b = m;
                    break;
                }
                if fa.signum() != fm.signum() {
                    b = m;
                } else {
                    a = m;
                    fa = fm;
                }
            }
            roots.push(0.5 * (a + b));
        }
        x_prev = x;
        f_prev = fx;
    }
    roots
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn spline_reproduces_knots_exactly() {
        let x = vec![0.0, 1.0, 2.5, 4.0];
        let y = vec![1.0, -2.0, 0.5, 3.0];
        let s = CubicSpline::new(x.clone(), y.clone()).unwrap();
        for (xi, yi) in x.iter().zip(y.iter()) {
            assert_relative_eq!(s.eval(*xi).unwrap(), *yi, epsilon = 1e-12);
        }
    }

    #[test]
    fn spline_close_to_smooth_function() {
        let x: Vec<f64> = (0..21).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|v| (2.0 * v).sin()).collect();
        let s = CubicSpline::new(x, y).unwrap();
        // Natural end conditions lose accuracy in the boundary segments.
        for i in 0..40 {
            let xq = 0.025 + i as f64 * 0.05;
            let tol = if !(0.2..=1.8).contains(&xq) { 2e-3 } else { 2e-4 };
            assert_relative_eq!(s.eval(xq).unwrap(), (2.0 * xq).sin(), epsilon = tol);
        }
    }

    #[test]
    fn spline_refuses_extrapolation() {
        let s = CubicSpline::new(vec![0.0, 1.0], vec![0.0, 1.0]).unwrap();
        assert!(s.eval(1.5).is_err());
        assert!(s.eval(-0.5).is_err());
    }

    #[test]
    fn roots_of_cubic() {
        let f = |x: f64| (x - 0.2) * (x - 1.0) * (x - 2.7);
        let roots = bracketed_roots(f, 0.0, 3.0, 60);
        assert_eq!(roots.len(), 3);
        assert_relative_eq!(roots[0], 0.2, epsilon = 1e-10);
        assert_relative_eq!(roots[1], 1.0, epsilon = 1e-10);
        assert_relative_eq!(roots[2], 2.7, epsilon = 1e-10);
    }
}
