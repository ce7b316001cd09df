//! Wigner functions, homodyne sampling and filtered back-projection.
//!
//! Two phase-space conventions meet here. Wigner grids use `β = x + ip`
//! with `W_coh(β) = (2/π) e^{-2|β-α|²}`. Homodyne quadratures use
//! `x_φ = (a e^{-iφ} + a† e^{iφ})/√2`, so the vacuum variance is 1/2 and a
//! point `β` sits at quadrature coordinates `√2 (Re β, Im β)`. The
//! reconstruction works in quadrature coordinates and converts back with
//! `W_β(β) = 2 W_q(√2 Re β, √2 Im β)`.

use std::f64::consts::{PI, SQRT_2};

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditioning::ir_cat;
use crate::error::{invalid, Error, Result};
use crate::fock::CoherentSuperposition;

/// Uniform rectangular grid in the `β` plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub np: usize,
}

impl GridSpec {
    /// Square grid `center ± half` with `n` points per side.
    pub fn square(center: C64, half: f64, n: usize) -> Self {
        Self {
            x_min: center.re - half,
            x_max: center.re + half,
            nx: n,
            p_min: center.im - half,
            p_max: center.im + half,
            np: n,
        }
    }

    fn axis(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        if n == 1 {
            return vec![lo];
        }
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    }

    fn validate(&self) -> Result<()> {
        if self.nx < 2 || self.np < 2 || !(self.x_max > self.x_min) || !(self.p_max > self.p_min) {
            return Err(invalid("grid", "need at least 2x2 points and increasing bounds"));
        }
        Ok(())
    }
}

/// Real phase-space function sampled on a grid; `values[j][i]` is at
/// `(x_axis[i], p_axis[j])`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerGrid {
    pub x_axis: Vec<f64>,
    pub p_axis: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

impl WignerGrid {
    fn from_fn<F: Fn(f64, f64) -> f64 + Sync>(spec: &GridSpec, f: F) -> Result<Self> {
        spec.validate()?;
        let x_axis = GridSpec::axis(spec.x_min, spec.x_max, spec.nx);
        let p_axis = GridSpec::axis(spec.p_min, spec.p_max, spec.np);
        let values = p_axis
            .par_iter()
            .map(|&p| x_axis.iter().map(|&x| f(x, p)).collect())
            .collect();
        Ok(Self { x_axis, p_axis, values })
    }

    fn dx(&self) -> f64 {
        self.x_axis[1] - self.x_axis[0]
    }

    fn dp(&self) -> f64 {
        self.p_axis[1] - self.p_axis[0]
    }

    fn weighted_sum<F: Fn(f64, f64) -> f64>(&self, g: F) -> f64 {
        let (nx, np) = (self.x_axis.len(), self.p_axis.len());
        let mut acc = 0.0;
        for (j, row) in self.values.iter().enumerate() {
            let wj = if j == 0 || j + 1 == np { 0.5 } else { 1.0 };
            for (i, v) in row.iter().enumerate() {
                let wi = if i == 0 || i + 1 == nx { 0.5 } else { 1.0 };
                acc += wi * wj * v * g(self.x_axis[i], self.p_axis[j]);
            }
        }
        acc * self.dx() * self.dp()
    }

    /// Trapezoid integral over the grid.
    pub fn integral(&self) -> f64 {
        self.weighted_sum(|_, _| 1.0)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().flatten().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Grid point holding the maximum.
    pub fn argmax(&self) -> C64 {
        let mut best = (f64::NEG_INFINITY, C64::default());
        for (j, row) in self.values.iter().enumerate() {
            for (i, &v) in row.iter().enumerate() {
                if v > best.0 {
                    best = (v, C64::new(self.x_axis[i], self.p_axis[j]));
                }
            }
        }
        best.1
    }

    /// Value at the grid point nearest to `beta`.
    pub fn nearest(&self, beta: C64) -> f64 {
        let idx = |axis: &[f64], v: f64| {
            let h = axis[1] - axis[0];
            (((v - axis[0]) / h).round().max(0.0) as usize).min(axis.len() - 1)
        };
        self.values[idx(&self.p_axis, beta.im)][idx(&self.x_axis, beta.re)]
    }

    /// Marginal over `p`, as a function of `x`.
    pub fn marginal_x(&self) -> Vec<f64> {
        let np = self.p_axis.len();
        (0..self.x_axis.len())
            .map(|i| {
                self.values
                    .iter()
                    .enumerate()
                    .map(|(j, row)| if j == 0 || j + 1 == np { 0.5 * row[i] } else { row[i] })
                    .sum::<f64>()
                    * self.dp()
            })
            .collect()
    }

    /// Matrix CSV with one row per `p` value (ascending) and one column per `x`.
    pub fn write_matrix_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
        for row in &self.values {
            out.write_record(row.iter().map(|v| v.to_string()))?;
        }
        out.flush()?;
        Ok(())
    }

    /// Axis CSV `axis,index,value` for both axes.
    pub fn write_axes_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["axis", "index", "value"])?;
        for (name, axis) in [("x", &self.x_axis), ("p", &self.p_axis)] {
            for (i, v) in axis.iter().enumerate() {
                out.write_record([name.to_string(), i.to_string(), v.to_string()])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// `W(β) = (2/π) e^{-2|β-α|²}`.
pub fn wigner_coherent(alpha: C64, spec: &GridSpec) -> Result<WignerGrid> {
    WignerGrid::from_fn(spec, |x, p| {
        let d = C64::new(x, p) - alpha;
        2.0 / PI * (-2.0 * d.norm_sqr()).exp()
    })
}

/// Wigner function of any coherent superposition, normalized by its norm.
///
/// The cross term of `|a⟩⟨b|` is `(2/π) ⟨b|a⟩ exp(-2 (β-a)(β-b)*)`.
pub fn wigner_superposition(state: &CoherentSuperposition, spec: &GridSpec) -> Result<WignerGrid> {
    if state.n_modes != 1 {
        return Err(invalid("state", "Wigner functions are single-mode"));
    }
    let norm = state.norm_sqr();
    if !(norm > 1e-300) {
        return Err(Error::ZeroNorm);
    }
    let terms: Vec<(C64, C64)> = state.terms.iter().map(|t| (t.coeff, t.amps[0])).collect();
    WignerGrid::from_fn(spec, |x, p| {
        let beta = C64::new(x, p);
        let mut acc = C64::default();
        for &(ci, a) in &terms {
            for &(cj, b) in &terms {
                let e = -0.5 * a.norm_sqr() - 0.5 * b.norm_sqr() + b.conj() * a - 2.0 * (beta - a) * (beta - b).conj();
                acc += ci * cj.conj() * e.exp();
            }
        }
        2.0 / PI * acc.re / norm
    })
}

/// Wigner function of the IR cat `|α+χ⟩ - ξ|α⟩`.
pub fn wigner_cat(alpha: C64, chi: C64, spec: &GridSpec) -> Result<WignerGrid> {
    wigner_superposition(&ir_cat(alpha, chi)?, spec)
}

fn taper(u: f64, lo: f64, hi: f64) -> f64 {
    // Flat over the central half of [lo, hi], raised-cosine to zero at the edges.
    let c = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let r = (u - c).abs() / half;
    if r <= 0.5 {
        1.0
    } else {
        0.5 * (1.0 + (PI * (r - 0.5) / 0.5).cos())
    }
}

/// `⟨n⟩ = ∫∫ W |β|² - 1/2` of a normalized grid.
///
/// Grids whose integral is off by more than 10% are rejected: that means the
/// window misses part of the state, not sampling noise.
///
/// The moment is taken under a window that is flat over the central half of the
/// grid and rolls off smoothly to zero at its edges. A band-limited
/// reconstruction rings far from the state, and the `|β|²` weight would
/// otherwise amplify that ringing; states that fit inside the flat region are
/// unaffected.
pub fn mean_photon_from_wigner(w: &WignerGrid) -> Result<f64> {
    let total = w.integral();
    if (total - 1.0).abs() > 0.1 {
        return Err(invalid(
            "wigner",
            format!("grid is not normalized (integral {total:.4})"),
        ));
    }
    let (xl, xh) = (w.x_axis[0], w.x_axis[w.x_axis.len() - 1]);
    let (pl, ph) = (w.p_axis[0], w.p_axis[w.p_axis.len() - 1]);
    let win = |x: f64, p: f64| taper(x, xl, xh) * taper(p, pl, ph);
    let mass = w.weighted_sum(win);
    Ok(w.weighted_sum(|x, p| win(x, p) * (x * x + p * p)) / mass - 0.5)
}

/// Which state to measure.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StateKind {
    Coherent { alpha: C64 },
    Cat { alpha: C64, chi: C64 },
}

impl StateKind {
    pub fn superposition(&self) -> Result<CoherentSuperposition> {
        match self {
            StateKind::Coherent { alpha } => Ok(CoherentSuperposition::coherent(vec![*alpha])),
            StateKind::Cat { alpha, chi } => ir_cat(*alpha, *chi),
        }
    }
}

/// Recorded `(φ, x_φ)` pairs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomodyneSampleSet {
    pub pairs: Vec<(f64, f64)>,
    pub seed: u64,
}

impl HomodyneSampleSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// CSV `phi,x`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["phi", "x"])?;
        for (phi, x) in &self.pairs {
            out.write_record([phi.to_string(), x.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Quadrature wavefunction `⟨x|a⟩` of a coherent state.
pub fn coherent_wavefunction(a: C64, x: f64) -> C64 {
    let mag = PI.powf(-0.25) * (-0.5 * (x - SQRT_2 * a.re).powi(2)).exp();
    C64::from_polar(mag, SQRT_2 * a.im * x - a.re * a.im)
}

/// Exact quadrature distribution `P_φ(x) = |⟨x_φ|ψ⟩|²` of a normalized superposition.
pub fn quadrature_density(state: &CoherentSuperposition, phi: f64, x: f64) -> f64 {
    let rot = C64::from_polar(1.0, -phi);
    state
        .terms
        .iter()
        .map(|t| t.coeff * coherent_wavefunction(t.amps[0] * rot, x))
        .sum::<C64>()
        .norm_sqr()
}

const SAMPLER_POINTS: usize = 4001;

fn sampler_window(state: &CoherentSuperposition) -> (f64, f64) {
    let r = state.terms.iter().map(|t| t.amps[0].norm()).fold(0.0, f64::max);
    (-SQRT_2 * r - 8.0, SQRT_2 * r + 8.0)
}

/// Homodyne samples with stratified phases `φ_k = π (k + u_k) / n`.
///
/// Coherent states are sampled from their Gaussian marginals; other states by
/// inverting the cumulative distribution of the exact marginal on a grid.
pub fn homodyne_sample(kind: &StateKind, n_samples: usize, seed: u64) -> Result<HomodyneSampleSet> {
    if n_samples == 0 {
        return Err(invalid("n_samples", "must be at least 1"));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(n_samples);
    match kind {
        StateKind::Coherent { alpha } => {
            let noise = Normal::new(0.0, std::f64::consts::FRAC_1_SQRT_2).expect("valid normal");
            for k in 0..n_samples {
                let phi = PI * (k as f64 + rng.random::<f64>()) / n_samples as f64;
                let mean = SQRT_2 * (alpha * C64::from_polar(1.0, -phi)).re;
                pairs.push((phi, mean + noise.sample(&mut rng)));
            }
        }
        StateKind::Cat { .. } => {
            let state = kind.superposition()?;
            let (lo, hi) = sampler_window(&state);
            let h = (hi - lo) / (SAMPLER_POINTS - 1) as f64;
            let mut cdf = vec![0.0; SAMPLER_POINTS];
            for k in 0..n_samples {
                let phi = PI * (k as f64 + rng.random::<f64>()) / n_samples as f64;
                let mut prev = quadrature_density(&state, phi, lo);
                for i in 1..SAMPLER_POINTS {
                    let cur = quadrature_density(&state, phi, lo + h * i as f64);
                    cdf[i] = cdf[i - 1] + 0.5 * h * (prev + cur);
                    prev = cur;
                }
                let u = rng.random::<f64>() * cdf[SAMPLER_POINTS - 1];
                let i = cdf.partition_point(|&c| c < u).clamp(1, SAMPLER_POINTS - 1);
                let span = cdf[i] - cdf[i - 1];
                let frac = if span > 0.0 { (u - cdf[i - 1]) / span } else { 0.5 };
                pairs.push((phi, lo + h * (i as f64 - 1.0 + frac)));
            }
        }
    }
    Ok(HomodyneSampleSet { pairs, seed })
}

/// Regularized ramp kernel `K(z) = ∫_0^{k_c} ξ cos(ξz) dξ`.
pub fn kernel(kc: f64, z: f64) -> f64 {
    if z.abs() < 1e-4 {
        // kc²/2 - kc⁴z²/8 + kc⁶z⁴/144
        let k2 = kc * kc;
        let z2 = z * z;
        return k2 / 2.0 - k2 * k2 * z2 / 8.0 + k2 * k2 * k2 * z2 * z2 / 144.0;
    }
    let (s, c) = (kc * z).sin_cos();
    (c - 1.0) / (z * z) + kc * s / z
}

/// Filtered back-projection `W_q(x,p) = (1/2πN) Σ_k K(x cosφ_k + p sinφ_k - x_k)`,
/// returned on a `β` grid.
pub fn reconstruct_wigner(samples: &HomodyneSampleSet, kc: f64, spec: &GridSpec) -> Result<WignerGrid> {
    if samples.is_empty() {
        return Err(invalid("samples", "sample set is empty"));
    }
    if !(kc > 0.0) {
        return Err(invalid("kc", "must be positive"));
    }
    let trig: Vec<(f64, f64, f64)> = samples
        .pairs
        .iter()
        .map(|&(phi, x)| {
            let (s, c) = phi.sin_cos();
            (c, s, x)
        })
        .collect();
    let scale = 2.0 / (2.0 * PI * samples.len() as f64);
    WignerGrid::from_fn(spec, |bx, bp| {
        let (x, p) = (SQRT_2 * bx, SQRT_2 * bp);
        let sum: f64 = trig.iter().map(|&(c, s, xk)| kernel(kc, x * c + p * s - xk)).sum();
        scale * sum
    })
}

/// Back-projection of exact, noise-free marginals on `n_phi` phases.
pub fn reconstruct_noiseless(
    state: &CoherentSuperposition,
    kc: f64,
    n_phi: usize,
    spec: &GridSpec,
) -> Result<WignerGrid> {
    if n_phi < 2 || !(kc > 0.0) {
        return Err(invalid("n_phi", "need at least two phases and kc > 0"));
    }
    let state = state.normalized()?;
    // One uniform axis carries both the marginals and the filtered
    // projections, so the convolution weights depend only on the offset.
    let reach = 2.0
        * [spec.x_min, spec.x_max, spec.p_min, spec.p_max]
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs()));
    let (lo, hi) = sampler_window(&state);
    let half = reach.max(-lo).max(hi);
    let h = 0.02;
    let n = (2.0 * half / h).ceil() as usize + 1;
    let start = -half;
    let table: Vec<f64> = (0..2 * n - 1)
        .map(|k| kernel(kc, (k as f64 - (n - 1) as f64) * h))
        .collect();
    let phases: Vec<f64> = (0..n_phi).map(|k| PI * (k as f64 + 0.5) / n_phi as f64).collect();
    let projections: Vec<Vec<f64>> = phases
        .par_iter()
        .map(|&phi| {
            let dens: Vec<f64> = (0..n)
                .map(|i| {
                    let w = if i == 0 || i + 1 == n { 0.5 } else { 1.0 };
                    w * h * quadrature_density(&state, phi, start + h * i as f64)
                })
                .collect();
            (0..n)
                .map(|j| dens.iter().enumerate().map(|(i, d)| d * table[j + n - 1 - i]).sum())
                .collect()
        })
        .collect();
    let trig: Vec<(f64, f64)> = phases.iter().map(|phi| phi.sin_cos()).collect();
    let scale = 2.0 / (2.0 * PI * n_phi as f64);
    WignerGrid::from_fn(spec, |bx, bp| {
        let (x, p) = (SQRT_2 * bx, SQRT_2 * bp);
        let mut acc = 0.0;
        for (q, &(s, c)) in projections.iter().zip(&trig) {
            let u = ((x * c + p * s - start) / h).clamp(0.0, (n - 1) as f64);
            let i = (u.floor() as usize).min(n - 2);
            let f = u - i as f64;
            acc += q[i] * (1.0 - f) + q[i + 1] * f;
        }
        scale * acc
    })
}

/// Relative peak-amplitude error `|max W_rec - max W_th| / max W_th`.
pub fn peak_error(rec: &WignerGrid, exact: &WignerGrid) -> f64 {
    (rec.max() - exact.max()).abs() / exact.max()
}

/// Sweep protocols of the error analysis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepProtocol {
    VsKc,
    VsNsamples,
    VsNbar,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepSettings {
    pub seeds: u64,
    pub base_seed: u64,
    pub kc: f64,
    pub n_samples: usize,
    /// Mean photon number of the coherent probe state.
    pub nbar: f64,
    /// Sweep values; empty picks the protocol's default list.
    pub values: Vec<f64>,
    pub grid_points: usize,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            seeds: 20,
            base_seed: 1,
            kc: 3.7,
            n_samples: 10_000,
            nbar: 3.0,
            values: Vec::new(),
            grid_points: 41,
        }
    }
}

/// One sweep row: mean and spread over seeds of both error measures, in %.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: f64,
    pub peak_error_mean: f64,
    pub peak_error_std: f64,
    pub nbar_error_mean: f64,
    pub nbar_error_std: f64,
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (m, var.sqrt())
}

/// A fine grid around the peak and a wider one, also centred on the state, for
/// the photon-number moment. A window much larger than the state only adds
/// sampling noise to the moment.
pub fn error_grids(alpha: C64, grid_points: usize) -> (GridSpec, GridSpec) {
    (
        GridSpec::square(alpha, 1.0, 41),
        GridSpec::square(alpha, 4.0, grid_points),
    )
}

/// Errors of reconstructing a coherent state with `⟨n⟩ = nbar` (real amplitude),
/// one entry per seed: `(peak %, ⟨n⟩ %)`.
pub fn coherent_errors(
    nbar: f64,
    kc: f64,
    n_samples: usize,
    seeds: &[u64],
    grid_points: usize,
) -> Result<Vec<(f64, f64)>> {
    let alpha = C64::new(nbar.sqrt(), 0.0);
    let (peak_spec, wide) = error_grids(alpha, grid_points);
    let exact = wigner_coherent(alpha, &peak_spec)?;
    seeds
        .iter()
        .map(|&seed| {
            let s = homodyne_sample(&StateKind::Coherent { alpha }, n_samples, seed)?;
            let rec = reconstruct_wigner(&s, kc, &peak_spec)?;
            let n_rec = mean_photon_from_wigner(&reconstruct_wigner(&s, kc, &wide)?)?;
            Ok((100.0 * peak_error(&rec, &exact), 100.0 * (n_rec - nbar).abs() / nbar))
        })
        .collect()
}

pub fn error_sweep(protocol: SweepProtocol, settings: &SweepSettings) -> Result<Vec<SweepRow>> {
    let values = if settings.values.is_empty() {
        match protocol {
            SweepProtocol::VsKc => vec![2.0, 2.5, 3.0, 3.5, 3.7, 4.0, 4.5, 5.0, 6.0],
            SweepProtocol::VsNsamples => vec![100.0, 500.0, 1000.0, 2000.0, 5000.0, 10_000.0, 20_000.0],
            SweepProtocol::VsNbar => vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
        }
    } else {
        settings.values.clone()
    };
    let seeds: Vec<u64> = (0..settings.seeds).map(|k| settings.base_seed + k).collect();
    values
        .iter()
        .map(|&v| {
            let (nbar, kc, n) = match protocol {
                SweepProtocol::VsKc => (settings.nbar, v, settings.n_samples),
                SweepProtocol::VsNsamples => (settings.nbar, settings.kc, v.round() as usize),
                SweepProtocol::VsNbar => (v, settings.kc, settings.n_samples),
            };
            let errs = coherent_errors(nbar, kc, n, &seeds, settings.grid_points)?;
            let (pm, ps) = mean_std(&errs.iter().map(|e| e.0).collect::<Vec<_>>());
            let (nm, ns) = mean_std(&errs.iter().map(|e| e.1).collect::<Vec<_>>());
            Ok(SweepRow {
                value: v,
                peak_error_mean: pm,
                peak_error_std: ps,
                nbar_error_mean: nm,
                nbar_error_std: ns,
            })
        })
        .collect()
}

/// CSV `value,peak_error_mean,peak_error_std,nbar_error_mean,nbar_error_std`.
pub fn write_sweep_csv<W: std::io::Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record([
        "value",
        "peak_error_mean",
        "peak_error_std",
        "nbar_error_mean",
        "nbar_error_std",
    ])?;
    for r in rows {
        out.write_record([
            r.value.to_string(),
            r.peak_error_mean.to_string(),
            r.peak_error_std.to_string(),
            r.nbar_error_mean.to_string(),
            r.nbar_error_std.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}
