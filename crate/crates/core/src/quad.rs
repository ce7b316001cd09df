//! Quadrature helpers shared by the physics modules.
//!
//! Oscillatory integrands of the form `g(t) e^{i phi(t)}` are handled with a
//! Filon-type rule: on each step `g` and `phi` are taken as linear and the
//! resulting integral is evaluated exactly. This stays accurate when the phase
//! advances by more than a radian per step, where a plain trapezoid rule
//! would alias.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64 as C64;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Values that the generic rules can integrate (reals and complex numbers).
pub trait Scalar:
    Copy + Default + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self>
{
}
impl Scalar for f64 {}
impl Scalar for C64 {}

/// Composite Simpson rule on uniformly spaced samples.
///
/// An odd number of intervals closes with Simpson's 3/8 rule on the last
/// three; two samples fall back to the trapezoid rule.
pub fn simpson<T: Scalar>(f: &[T], h: f64) -> T {
    let n = f.len();
    match n {
        0 | 1 => T::default(),
        2 => (f[0] + f[1]) * (0.5 * h),
        3 => (f[0] + f[1] * 4.0 + f[2]) * (h / 3.0),
        _ => {
            let intervals = n - 1;
            let (even_end, tail) = if intervals.is_multiple_of(2) {
                (n - 1, None)
            } else {
                (n - 4, Some(n - 4))
            };
            let mut acc = f[0] + f[even_end];
            for (i, v) in f.iter().enumerate().take(even_end).skip(1) {
                acc = acc + *v * if i % 2 == 1 { 4.0 } else { 2.0 };
            }
            let mut total = acc * (h / 3.0);
            if let Some(s) = tail {
                let t = f[s] + f[s + 1] * 3.0 + f[s + 2] * 3.0 + f[s + 3];
                total = total + t * (3.0 * h / 8.0);
            }
            total
        }
    }
}

/// Running trapezoid integral; `out[0] = 0`.
pub fn cumulative_trapezoid<T: Scalar>(f: &[T], h: f64) -> Vec<T> {
    let mut out = Vec::with_capacity(f.len());
    let mut acc = T::default();
    out.push(acc);
    for w in f.windows(2) {
        acc = acc + (w[0] + w[1]) * (0.5 * h);
        out.push(acc);
    }
    out.truncate(f.len());
    out
}

/// Moments `I0 = ∫_0^1 e^{i d u} du` and `I1 = ∫_0^1 u e^{i d u} du`.
pub fn filon_moments(d: f64) -> (C64, C64) {
    if d.abs() < 0.05 {
        // Taylor series: I0 = Σ (id)^k/(k+1)!, I1 = Σ (id)^k/(k! (k+2)).
        let z = C64::new(0.0, d);
        let mut pow = C64::new(1.0, 0.0);
        let mut fact = 1.0;
        let mut i0 = C64::default();
        let mut i1 = C64::default();
        for k in 0..9 {
            if k > 0 {
                pow *= z;
                fact *= k as f64;
            }
            i0 += pow / (fact * (k as f64 + 1.0));
            i1 += pow / (fact * (k as f64 + 2.0));
        }
        (i0, i1)
    } else {
        let iz = C64::new(0.0, d);
        let e = iz.exp();
        let i0 = (e - 1.0) / iz;
        let i1 = e / iz - (e - 1.0) / (iz * iz);
        (i0, i1)
    }
}

/// Per-step integrals of `g(t) e^{i phase(t)}` with `g`, `phase` linear on each step.
pub fn filon_segments(g: &[C64], phase: &[f64], h: f64) -> Vec<C64> {
    assert_eq!(g.len(), phase.len());
    (0..g.len().saturating_sub(1))
        .map(|j| {
            let (i0, i1) = filon_moments(phase[j + 1] - phase[j]);
            C64::from_polar(h, phase[j]) * (g[j] * i0 + (g[j + 1] - g[j]) * i1)
        })
        .collect()
}

/// Running Filon integral of `g e^{i phase}`; `out[0] = 0`.
pub fn filon_cumulative(g: &[C64], phase: &[f64], h: f64) -> Vec<C64> {
    let segs = filon_segments(g, phase, h);
    let mut out = Vec::with_capacity(g.len());
    let mut acc = C64::default();
    out.push(acc);
    for s in segs {
        acc += s;
        out.push(acc);
    }
    out.truncate(g.len());
    out
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerances for [`integrate_adaptive`].
#[derive(Clone, Copy, Debug)]
pub struct AdaptiveOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub initial_intervals: usize,
    pub max_intervals: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-8,
            rel_tol: 0.0,
            initial_intervals: 32,
            max_intervals: 20_000,
        }
    }
}

struct Piece {
    a: f64,
    b: f64,
    value: Vec<C64>,
    err: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err).then_with(|| other.a.total_cmp(&self.a))
    }
}

fn gk15<F>(f: &F, a: f64, b: f64, dim: usize) -> Piece
where
    F: Fn(f64, &mut [C64]),
{
    let c = 0.5 * (a + b);
    let r = 0.5 * (b - a);
    let mut buf = vec![C64::default(); dim];
    let mut kron = vec![C64::default(); dim];
    let mut gauss = vec![C64::default(); dim];
    for (j, &x) in XGK.iter().enumerate() {
        let nodes: &[f64] = if x == 0.0 { &[0.0] } else { &[-x, x] };
        for &s in nodes {
            f(c + r * s, &mut buf);
            for k in 0..dim {
                kron[k] += buf[k] * WGK[j];
                if j % 2 == 1 {
                    gauss[k] += buf[k] * WG[j / 2];
                }
            }
        }
    }
    let mut err: f64 = 0.0;
    for k in 0..dim {
        kron[k] *= r;
        gauss[k] *= r;
        err = err.max((kron[k] - gauss[k]).norm());
    }
    Piece { a, b, value: kron, err }
}

/// Adaptive Gauss-Kronrod (7/15) integration of a vector-valued complex integrand.
///
/// The error norm is the largest componentwise difference between the Kronrod
/// and Gauss estimates, summed over subintervals. The interval with the
/// largest error is bisected until the total meets
/// `max(abs_tol, rel_tol * max|I_k|)`.
pub fn integrate_adaptive<F>(f: F, a: f64, b: f64, dim: usize, opts: AdaptiveOptions) -> Result<Vec<C64>>
where
    F: Fn(f64, &mut [C64]) + Sync,
{
    if b <= a {
        return Ok(vec![C64::default(); dim]);
    }
    let n0 = opts.initial_intervals.max(1);
    let h = (b - a) / n0 as f64;
    let first: Vec<Piece> = (0..n0)
        .into_par_iter()
        .map(|i| {
            let lo = a + h * i as f64;
            let hi = if i + 1 == n0 { b } else { a + h * (i + 1) as f64 };
            gk15(&f, lo, hi, dim)
        })
        .collect();
    let mut heap: BinaryHeap<Piece> = first.into_iter().collect();
    loop {
        let total_err: f64 = heap.iter().map(|p| p.err).sum();
        let mut scale: f64 = 0.0;
        if opts.rel_tol > 0.0 {
            let sum = sum_pieces(&heap, dim);
            scale = sum.iter().map(|z| z.norm()).fold(0.0, f64::max);
        }
        let tol = opts.abs_tol.max(opts.rel_tol * scale);
        if total_err <= tol {
            break;
        }
        if heap.len() >= opts.max_intervals {
            return Err(Error::NoConvergence {
                estimate: total_err,
                tol,
            });
        }
        let worst = heap.pop().expect("non-empty");
        let mid = 0.5 * (worst.a + worst.b);
        heap.push(gk15(&f, worst.a, mid, dim));
        heap.push(gk15(&f, mid, worst.b, dim));
    }
    Ok(sum_pieces(&heap, dim))
}

fn sum_pieces(heap: &BinaryHeap<Piece>, dim: usize) -> Vec<C64> {
    // Sum in interval order so the result does not depend on heap layout.
    let mut pieces: Vec<&Piece> = heap.iter().collect();
    pieces.sort_by(|x, y| x.a.total_cmp(&y.a));
    let mut out = vec![C64::default(); dim];
    for p in pieces {
        for k in 0..dim {
            out[k] += p.value[k];
        }
    }
    out
}
