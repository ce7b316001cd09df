//! Not-a-knot cubic splines on uniform grids.

use crate::quad::Scalar;

/// Cubic spline through uniformly spaced samples `y_i = f(t0 + i h)`.
///
/// Uses not-a-knot end conditions; fewer than four samples degrade to
/// linear interpolation. Evaluation outside the grid extrapolates the end
/// polynomial.
#[derive(Clone, Debug)]
pub struct CubicSpline<T> {
    t0: f64,
    h: f64,
    y: Vec<T>,
    m: Vec<T>,
}

impl<T: Scalar> CubicSpline<T> {
    pub fn new(t0: f64, h: f64, y: Vec<T>) -> Self {
        assert!(h > 0.0, "spline step must be positive");
        assert!(!y.is_empty(), "spline needs at least one sample");
        let n = y.len();
        let m = if n < 4 {
            vec![T::default(); n]
        } else {
            second_derivatives(&y, h)
        };
        Self { t0, h, y, m }
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn eval(&self, t: f64) -> T {
        let n = self.y.len();
        if n == 1 {
            return self.y[0];
        }
        let s = (t - self.t0) / self.h;
        let i = (s.floor().max(0.0) as usize).min(n - 2);
        let u = s - i as f64;
        let v = 1.0 - u;
        let c = self.h * self.h / 6.0;
        self.y[i] * v + self.y[i + 1] * u + self.m[i] * (c * (v * v * v - v)) + self.m[i + 1] * (c * (u * u * u - u))
    }
}

fn second_derivatives<T: Scalar>(y: &[T], h: f64) -> Vec<T> {
    let n = y.len();
    let k = 6.0 / (h * h);
    let rhs = |i: usize| (y[i - 1] - y[i] * 2.0 + y[i + 1]) * k;
    // Unknowns M_1..M_{n-2}. Eliminating M_0 = 2M_1 - M_2 and the mirror
    // relation at the far end turns the first and last rows into 6 M = rhs.
    let m = n - 2;
    let mut diag = vec![4.0; m];
    let mut lower = vec![1.0; m];
    let mut upper = vec![1.0; m];
    let mut r: Vec<T> = (1..=m).map(rhs).collect();
    diag[0] = 6.0;
    upper[0] = 0.0;
    diag[m - 1] = 6.0;
    lower[m - 1] = 0.0;
    // Thomas algorithm.
    for i in 1..m {
        let w = lower[i] / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        r[i] = r[i] - r[i - 1] * w;
    }
    let mut sol = vec![T::default(); m];
    sol[m - 1] = r[m - 1] * (1.0 / diag[m - 1]);
    for i in (0..m - 1).rev() {
        sol[i] = (r[i] - sol[i + 1] * upper[i]) * (1.0 / diag[i]);
    }
    let mut out = Vec::with_capacity(n);
    out.push(sol[0] * 2.0 - sol[1]);
    out.extend_from_slice(&sol);
    out.push(sol[m - 1] * 2.0 - sol[m - 2]);
    out
}
