//! Coherent displacements of the field modes.
//!
//! `χ` is the shift a mode picks up from the atomic dipole (the HHG channel),
//! `δ` the shift from the classical motion of a freed electron (the ATI
//! channel). Both are linear in the mode coupling `G = g̃ λ g(k)`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::pulse::{FieldCoupling, LaserPulse, TimeGrid};
use crate::quad::{filon_cumulative, filon_moments, filon_segments};
use crate::sfa::DipoleTrace;

/// Spline substeps per dipole-trace step used when integrating against `e^{iωτ}`.
pub const CHI_SUBSTEPS: usize = 4;

/// Field modes taking part in the interaction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeGrid {
    pub omegas: Vec<f64>,
    pub coupling: FieldCoupling,
}

impl ModeGrid {
    pub fn new(omegas: Vec<f64>, coupling: FieldCoupling) -> Result<Self> {
        if omegas.is_empty() {
            return Err(invalid("omegas", "need at least one mode"));
        }
        if omegas[0] <= 0.0 || omegas.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("omegas", "must be positive and strictly ascending"));
        }
        Ok(Self { omegas, coupling })
    }

    /// Harmonics `1..=n_max` of `omega_l`.
    pub fn harmonics(omega_l: f64, n_max: u32, coupling: FieldCoupling) -> Result<Self> {
        Self::new((1..=n_max).map(|q| q as f64 * omega_l).collect(), coupling)
    }

    pub fn fundamental(&self) -> f64 {
        self.omegas[0]
    }

    pub fn strength(&self, k: usize) -> f64 {
        self.coupling.strength(self.omegas[k])
    }
}

fn upsampled(trace: &DipoleTrace) -> (f64, Vec<C64>) {
    let h = trace.step() / CHI_SUBSTEPS as f64;
    let n = (trace.len() - 1) * CHI_SUBSTEPS + 1;
    let s = trace.spline();
    let t0 = trace.times[0];
    (h, (0..n).map(|i| C64::new(s.eval(t0 + h * i as f64), 0.0)).collect())
}

/// `χ(ω_k, t) = -G ∫_0^t ⟨d(τ)⟩ e^{iω_k τ} dτ` at every trace time, in one pass.
pub fn chi_trace(trace: &DipoleTrace, omega_k: f64, g: f64) -> Vec<C64> {
    if trace.len() < 2 {
        return vec![C64::default(); trace.len()];
    }
    let (h, f) = upsampled(trace);
    let phase: Vec<f64> = (0..f.len()).map(|i| omega_k * h * i as f64).collect();
    filon_cumulative(&f, &phase, h)
        .into_iter()
        .step_by(CHI_SUBSTEPS)
        .map(|c| -g * c)
        .collect()
}

/// `χ(ω_k, t)` at a single time, integrated from scratch.
pub fn chi(trace: &DipoleTrace, omega_k: f64, g: f64, t: f64) -> Result<C64> {
    let t_end = *trace.times.last().unwrap_or(&0.0);
    if !(0.0..=t_end * (1.0 + 1e-12)).contains(&t) {
        return Err(invalid("t", "outside the dipole trace"));
    }
    if trace.len() < 2 || t == 0.0 {
        return Ok(C64::default());
    }
    let (h, f) = upsampled(trace);
    let s = t / h;
    let full = (s.floor() as usize).min(f.len() - 1);
    let phase: Vec<f64> = (0..=full).map(|i| omega_k * h * i as f64).collect();
    let mut acc: C64 = filon_segments(&f[..=full], &phase, h).into_iter().sum();
    let rest = t - h * full as f64;
    if rest > 1e-12 * h && full + 1 < f.len() {
        // Partial last step with linear amplitude.
        let u = rest / h;
        let g1 = f[full] + (f[full + 1] - f[full]) * u;
        let (i0, i1) = filon_moments(omega_k * rest);
        acc += C64::from_polar(rest, omega_k * h * full as f64) * (f[full] * i0 + (g1 - f[full]) * i1);
    }
    Ok(-g * acc)
}

/// HHG spectrum `S(ω) = N² |χ(ω, T)|²` on a dense order grid, with integer
/// harmonic yields kept separately for peak analysis.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HhgSpectrum {
    pub orders: Vec<f64>,
    pub yields: Vec<f64>,
    pub harmonic_orders: Vec<u32>,
    pub harmonic_yields: Vec<f64>,
    /// Yield at the fundamental; spectra are reported relative to it.
    pub reference: f64,
}

/// Final-time `|χ|²` for each frequency, scaled by `n_atoms²`.
pub fn hhg_spectrum(
    trace: &DipoleTrace,
    modes: &ModeGrid,
    n_atoms: u64,
    max_order: f64,
    order_step: f64,
) -> Result<HhgSpectrum> {
    if n_atoms == 0 {
        return Err(invalid("n_atoms", "must be at least 1"));
    }
    if !(order_step > 0.0) || !(max_order >= 1.0) {
        return Err(invalid("order_step", "need order_step > 0 and max_order >= 1"));
    }
    if trace.len() < 2 {
        return Err(invalid("trace", "needs at least two samples"));
    }
    let w_l = modes.fundamental();
    let (h, f) = upsampled(trace);
    let n2 = (n_atoms as f64).powi(2);
    let yield_at = |order: f64| {
        let w = order * w_l;
        let phase: Vec<f64> = (0..f.len()).map(|i| w * h * i as f64).collect();
        let x: C64 = filon_segments(&f, &phase, h).into_iter().sum();
        n2 * (modes.coupling.strength(w) * x).norm_sqr()
    };
    let count = (max_order / order_step).floor() as usize;
    let orders: Vec<f64> = (1..=count).map(|i| order_step * i as f64).collect();
    let yields = orders.iter().map(|&o| yield_at(o)).collect();
    let harmonic_orders: Vec<u32> = (1..=max_order.floor() as u32).collect();
    let harmonic_yields: Vec<f64> = harmonic_orders.iter().map(|&q| yield_at(q as f64)).collect();
    Ok(HhgSpectrum {
        orders,
        yields,
        reference: harmonic_yields[0],
        harmonic_orders,
        harmonic_yields,
    })
}

impl HhgSpectrum {
    pub fn harmonic(&self, q: u32) -> Option<f64> {
        self.harmonic_orders
            .iter()
            .position(|&o| o == q)
            .map(|i| self.harmonic_yields[i])
    }

    /// Plateau cutoff: the highest odd order whose yield stays within a factor
    /// 10 of the plateau level, taken as the median odd yield from order 5 up
    /// to the last order above `1e-3` of the plateau maximum.
    pub fn cutoff_order(&self) -> Option<u32> {
        let odd: Vec<(u32, f64)> = self
            .harmonic_orders
            .iter()
            .zip(&self.harmonic_yields)
            .filter(|(q, _)| **q >= 5 && **q % 2 == 1)
            .map(|(q, y)| (*q, *y))
            .collect();
        let peak = odd.iter().map(|x| x.1).fold(0.0, f64::max);
        if peak <= 0.0 {
            return None;
        }
        let last = odd.iter().rev().find(|x| x.1 >= 1e-3 * peak)?.0;
        let mut plateau: Vec<f64> = odd.iter().filter(|x| x.0 <= last).map(|x| x.1).collect();
        plateau.sort_by(f64::total_cmp);
        let level = plateau[plateau.len() / 2];
        odd.iter().rev().find(|x| x.1 >= level / 10.0).map(|x| x.0)
    }

    /// Odd-to-even contrast in dB for odd order `q`: the odd yield over the
    /// geometric mean of its even neighbours.
    pub fn contrast_db(&self, q: u32) -> Option<f64> {
        let s = self.harmonic(q)?;
        let lo = self.harmonic(q.checked_sub(1)?)?;
        let hi = self.harmonic(q + 1)?;
        Some(10.0 * (s / (lo * hi).sqrt()).log10())
    }

    /// Mean contrast over the odd orders `5..=cutoff`.
    pub fn plateau_contrast_db(&self) -> Option<f64> {
        let cut = self.cutoff_order()?;
        let vals: Vec<f64> = (5..=cut).step_by(2).filter_map(|q| self.contrast_db(q)).collect();
        if vals.is_empty() {
            None
        } else {
            Some(vals.iter().sum::<f64>() / vals.len() as f64)
        }
    }

    /// CSV `order,S,S_rel`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["order", "S", "S_rel"])?;
        for (o, s) in self.orders.iter().zip(&self.yields) {
            let rel = if self.reference > 0.0 { s / self.reference } else { 0.0 };
            out.write_record([o.to_string(), s.to_string(), rel.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Classical semiclassical cutoff order `(Ip + 3.17 Up) / ω`.
pub fn cutoff_law(ip: f64, up: f64, omega: f64) -> f64 {
    (ip + 3.17 * up) / omega
}

/// Electron excursion `Δr(t) = p t + ∫_0^t A` along the polarization.
pub fn electron_displacement_scalar(pulse: &LaserPulse, p: f64, t: f64) -> f64 {
    p * t + pulse.int_a(t)
}

pub fn electron_displacement(pulse: &LaserPulse, p: f64, t: f64) -> [f64; 3] {
    let s = electron_displacement_scalar(pulse, p, t);
    pulse.polarization.map(|c| c * s)
}

// (e^{ix} - 1)/(ix), stable near 0.
fn ex(x: f64) -> C64 {
    filon_moments(x).0
}

// ∫_{a}^{b} e^{i(u s + φ)} ds
fn int_exp(u: f64, phi: f64, a: f64, b: f64) -> C64 {
    let len = b - a;
    C64::from_polar(len, u * a + phi) * ex(u * len)
}

// ∫_{a}^{b} s e^{iωs} ds for ω > 0
fn int_s_exp(w: f64, a: f64, b: f64) -> C64 {
    let anti = |s: f64| C64::from_polar(1.0, w * s) * (C64::new(0.0, -s / w) + 1.0 / (w * w));
    anti(b) - anti(a)
}

/// `X = ∫_{t1}^{t} e^{iωs} Δr(s) ds` in closed form.
fn excursion_transform(pulse: &LaserPulse, p: f64, t1: f64, t: f64, omega: f64) -> C64 {
    let c = pulse.cep;
    let mut linear = p;
    let mut constant = 0.0;
    let mut acc = C64::default();
    for (a, w) in pulse.sinusoids() {
        if w == 0.0 {
            linear += a * c.sin();
        } else {
            constant += a * c.cos() / w;
            // -(a/w) cos(ws + c) e^{iωs}
            let k = -0.5 * a / w;
            acc += k * (int_exp(omega + w, c, t1, t) + int_exp(omega - w, -c, t1, t));
        }
    }
    acc + linear * int_s_exp(omega, t1, t) + constant * int_exp(omega, 0.0, t1, t)
}

fn check_interval(pulse: &LaserPulse, t: f64, t1: f64) -> Result<()> {
    if t1 > t {
        return Err(invalid("t1", "must not exceed t"));
    }
    if t1 < 0.0 || t > pulse.duration() * (1.0 + 1e-12) {
        return Err(invalid("t", "interval must lie within the pulse"));
    }
    Ok(())
}

/// ATI displacement `δ(t, t1) = G [∫_{t1}^{t} e^{iωs} Δr(s) ds]*` of a mode of
/// frequency `omega` for an electron born at `t1` with canonical momentum `p`.
///
/// The prefactor carries the electron charge, so `Im δ > 0` for `p > 0`.
pub fn delta(pulse: &LaserPulse, g: f64, p: f64, t: f64, t1: f64, omega: f64) -> Result<C64> {
    check_interval(pulse, t, t1)?;
    if !(omega > 0.0) {
        return Err(invalid("omega", "must be positive"));
    }
    if t1 == t {
        return Ok(C64::default());
    }
    Ok(g * excursion_transform(pulse, p, t1, t, omega).conj())
}

/// `δ(T, t1)` for every `t1` of `grid`.
pub fn delta_trace(pulse: &LaserPulse, g: f64, p: f64, omega: f64, grid: &TimeGrid) -> Vec<C64> {
    let t_end = pulse.duration();
    grid.times()
        .map(|t1| {
            let t1 = t1.min(t_end);
            if t1 >= t_end {
                C64::default()
            } else {
                g * excursion_transform(pulse, p, t1, t_end, omega).conj()
            }
        })
        .collect()
}

/// Ordered double integral
/// `G² ∫_{t1}^{T} dτ1 ∫_{t1}^{τ1} dτ2 Δr(τ1) Δr(τ2) sin ω(τ1 - τ2)`
/// with the trapezoid rule on `grid`, for every lower limit `t1 = τ_m`.
pub fn bch_phase_trace(pulse: &LaserPulse, g: f64, p: f64, omega: f64, grid: &TimeGrid) -> Vec<f64> {
    let f: Vec<f64> = grid
        .times()
        .map(|t| electron_displacement_scalar(pulse, p, t))
        .collect();
    ordered_phase(&f, omega, grid.h, 0.0)
        .into_iter()
        .map(|x| g * g * x)
        .collect()
}

// For samples f on t_i = t0 + i h returns, for each m, the trapezoid value of
// Im ∫_{t_m}^{t_end} dτ1 f(τ1) e^{iωτ1} ∫_{t_m}^{τ1} f(τ2) e^{-iωτ2} dτ2.
fn ordered_phase(f: &[f64], omega: f64, h: f64, t0: f64) -> Vec<f64> {
    let n = f.len();
    let u: Vec<C64> = (0..n)
        .map(|j| C64::from_polar(f[j], -omega * (t0 + h * j as f64)))
        .collect();
    let a: Vec<C64> = (0..n)
        .map(|i| {
            let w = if i + 1 == n { 0.5 * h } else { h };
            C64::from_polar(w * f[i], omega * (t0 + h * i as f64))
        })
        .collect();
    // prefix[i] = Σ_{j<i} u_j
    let mut prefix = vec![C64::default(); n + 1];
    for j in 0..n {
        prefix[j + 1] = prefix[j] + u[j];
    }
    // suffix sums over i > m of a_i and a_i U(i)
    let mut out = vec![0.0; n];
    let mut sa = C64::default();
    let mut sau = C64::default();
    for m in (0..n).rev() {
        out[m] = (sau * h - (prefix[m] * h + u[m] * (0.5 * h)) * sa).im;
        sa += a[m];
        sau += a[m] * prefix[m];
    }
    out
}

/// BCH phases for a single interval: the ordered double integral `φ` and the
/// cross phase `φ^{χ,δ} = Im[δ χ*]`.
#[allow(clippy::too_many_arguments)]
pub fn bch_phases(
    pulse: &LaserPulse,
    g: f64,
    p: f64,
    t: f64,
    t1: f64,
    omega: f64,
    chi_val: C64,
    dt: f64,
) -> Result<(f64, f64)> {
    check_interval(pulse, t, t1)?;
    if t1 == t {
        return Ok((0.0, 0.0));
    }
    let grid = TimeGrid::covering(t - t1, dt);
    let f: Vec<f64> = grid
        .times()
        .map(|s| electron_displacement_scalar(pulse, p, t1 + s))
        .collect();
    let phi = g * g * ordered_phase(&f, omega, grid.h, t1)[0];
    let d = delta(pulse, g, p, t, t1, omega)?;
    Ok((phi, (d * chi_val.conj()).im))
}

/// χ for every mode on the trace grid and δ, φ for every mode, momentum and
/// ionization time (final time `T`).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DisplacementRecord {
    pub omegas: Vec<f64>,
    pub times: Vec<f64>,
    pub momenta: Vec<f64>,
    /// `chi[mode][time]`
    pub chi: Vec<Vec<C64>>,
    /// `delta[mode][momentum][t1]`
    pub delta: Vec<Vec<Vec<C64>>>,
    /// `phi_bch[mode][momentum][t1]`
    pub phi_bch: Vec<Vec<Vec<f64>>>,
}

impl DisplacementRecord {
    pub fn compute(pulse: &LaserPulse, trace: &DipoleTrace, modes: &ModeGrid, momenta: &[f64]) -> Self {
        use rayon::prelude::*;
        let grid = TimeGrid {
            h: trace.step(),
            n: trace.len(),
        };
        let per_mode: Vec<_> = (0..modes.omegas.len())
            .into_par_iter()
            .map(|k| {
                let w = modes.omegas[k];
                let g = modes.strength(k);
                let chi = chi_trace(trace, w, g);
                let delta: Vec<Vec<C64>> = momenta.iter().map(|&p| delta_trace(pulse, g, p, w, &grid)).collect();
                let phi: Vec<Vec<f64>> = momenta
                    .iter()
                    .map(|&p| bch_phase_trace(pulse, g, p, w, &grid))
                    .collect();
                (chi, delta, phi)
            })
            .collect();
        let mut rec = Self {
            omegas: modes.omegas.clone(),
            times: trace.times.clone(),
            momenta: momenta.to_vec(),
            chi: Vec::new(),
            delta: Vec::new(),
            phi_bch: Vec::new(),
        };
        for (c, d, p) in per_mode {
            rec.chi.push(c);
            rec.delta.push(d);
            rec.phi_bch.push(p);
        }
        rec
    }

    /// CSV `t1,mode,re_chi,im_chi,abs_chi,re_delta,im_delta,abs_delta` for one momentum.
    pub fn write_csv<W: std::io::Write>(&self, momentum_index: usize, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "t1",
            "omega",
            "re_chi",
            "im_chi",
            "abs_chi",
            "re_delta",
            "im_delta",
            "abs_delta",
        ])?;
        for (k, w) in self.omegas.iter().enumerate() {
            for (i, t) in self.times.iter().enumerate() {
                let c = self.chi[k][i];
                let d = self.delta[k][momentum_index][i];
                out.write_record([
                    t.to_string(),
                    w.to_string(),
                    c.re.to_string(),
                    c.im.to_string(),
                    c.norm().to_string(),
                    d.re.to_string(),
                    d.im.to_string(),
                    d.norm().to_string(),
                ])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::simpson;
    use proptest::prelude::*;

    fn drive(cep: f64) -> LaserPulse {
        LaserPulse::new(0.057, 0.053, 5, cep).unwrap()
    }

    fn quad_x(pl: &LaserPulse, p: f64, t1: f64, t: f64, w: f64) -> C64 {
        let n = 20_000;
        let h = (t - t1) / n as f64;
        let f: Vec<C64> = (0..=n)
            .map(|i| {
                let s = t1 + h * i as f64;
                C64::from_polar(electron_displacement_scalar(pl, p, s), w * s)
            })
            .collect();
        simpson(&f, h)
    }

    #[test]
    fn delta_matches_quadrature() {
        for cep in [0.0, 0.9] {
            let pl = drive(cep);
            let tt = pl.duration();
            for (q, p, t1, t) in [(1.0, 0.3, 10.0, tt), (3.0, -0.2, 100.0, 400.0), (2.0, 0.0, 0.0, tt)] {
                let w = q * 0.057;
                let got = delta(&pl, 1.0, p, t, t1, w).unwrap();
                let want = quad_x(&pl, p, t1, t, w).conj();
                assert!((got - want).norm() <= 1e-8 * want.norm().max(1.0), "{got} {want}");
            }
        }
    }

    #[test]
    fn single_cycle_pulse_delta() {
        let pl = LaserPulse::new(0.057, 0.053, 1, 0.4).unwrap();
        let tt = pl.duration();
        let got = delta(&pl, 1.0, 0.1, tt, 5.0, 0.057).unwrap();
        let want = quad_x(&pl, 0.1, 5.0, tt, 0.057).conj();
        assert!((got - want).norm() < 1e-8 * want.norm());
    }

    #[test]
    fn delta_trivial_cases() {
        let pl = drive(0.0);
        assert_eq!(delta(&pl, 1.0, 0.3, 50.0, 50.0, 0.057).unwrap(), C64::default());
        assert!(delta(&pl, 1.0, 0.3, 50.0, 60.0, 0.057).is_err());
    }

    #[test]
    fn imaginary_part_follows_momentum_sign() {
        let pl = drive(0.0);
        let p = 0.93 * pl.ponderomotive_energy().sqrt();
        let tt = pl.duration();
        let a = delta(&pl, 1.0, p, tt, 200.0, 0.057).unwrap();
        let b = delta(&pl, 1.0, -p, tt, 200.0, 0.057).unwrap();
        assert!(a.im > 0.0 && b.im < 0.0);
    }

    #[test]
    fn displacement_free_drift() {
        let pl = LaserPulse::new(0.057, 0.0, 5, 0.0).unwrap();
        assert!((electron_displacement_scalar(&pl, 0.4, 30.0) - 12.0).abs() < 1e-12);
        assert_eq!(electron_displacement(&pl, 0.4, 0.0), [0.0; 3]);
    }

    #[test]
    fn ordered_phase_matches_brute_force() {
        let pl = drive(0.3);
        let grid = TimeGrid::covering(pl.duration(), 1.0);
        let (p, w) = (0.25, 3.0 * 0.057);
        let fast = bch_phase_trace(&pl, 1.0, p, w, &grid);
        let f: Vec<f64> = grid.times().map(|t| electron_displacement_scalar(&pl, p, t)).collect();
        let n = grid.n;
        let h = grid.h;
        for m in [0, 17, n / 2, n - 3, n - 1] {
            let mut total = 0.0;
            for i in m..n {
                let wi = if i == m || i == n - 1 { 0.5 * h } else { h };
                let mut inner = 0.0;
                for j in m..=i {
                    let wj = if j == m || j == i { 0.5 * h } else { h };
                    inner += wj * f[j] * (w * h * (i as f64 - j as f64)).sin();
                }
                total += wi * f[i] * inner;
            }
            assert!(
                (fast[m] - total).abs() <= 1e-8 * total.abs().max(1.0),
                "m={m} {} {}",
                fast[m],
                total
            );
        }
        assert_eq!(fast[n - 1], 0.0);
    }

    #[test]
    fn bch_single_interval_consistent_with_trace() {
        let pl = drive(0.0);
        let grid = TimeGrid::covering(pl.duration(), 1.0);
        let tr = bch_phase_trace(&pl, 0.01, 0.2, 0.057, &grid);
        let (phi, cross) = bch_phases(&pl, 0.01, 0.2, pl.duration(), 0.0, 0.057, C64::default(), grid.h).unwrap();
        assert!((phi - tr[0]).abs() < 1e-12 * tr[0].abs().max(1.0));
        assert_eq!(cross, 0.0);
        assert_eq!(
            bch_phases(&pl, 0.01, 0.2, 40.0, 40.0, 0.057, C64::new(1.0, 1.0), 1.0).unwrap(),
            (0.0, 0.0)
        );
    }

    fn synthetic_trace() -> DipoleTrace {
        let times: Vec<f64> = (0..552).map(|i| i as f64).collect();
        let values = times
            .iter()
            .map(|t| (0.057 * t).sin() * (0.01 * t).sin().powi(2) + 0.1 * (0.3 * t).cos() - 0.1)
            .collect();
        DipoleTrace { times, values }
    }

    #[test]
    fn chi_prefix_equals_pointwise() {
        let tr = synthetic_trace();
        let cum = chi_trace(&tr, 0.171, 0.02);
        assert_eq!(cum[0], C64::default());
        for i in [1usize, 10, 200, 551] {
            let pt = chi(&tr, 0.171, 0.02, tr.times[i]).unwrap();
            assert!((pt - cum[i]).norm() <= 1e-10);
        }
    }

    #[test]
    fn chi_zero_trace() {
        let mut tr = synthetic_trace();
        tr.values.iter_mut().for_each(|v| *v = 0.0);
        assert!(chi_trace(&tr, 0.3, 1.0).iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn chi_partial_step_is_continuous() {
        let tr = synthetic_trace();
        let a = chi(&tr, 0.2, 1.0, 100.0).unwrap();
        let b = chi(&tr, 0.2, 1.0, 100.0 + 1e-7).unwrap();
        assert!((a - b).norm() < 1e-6);
    }

    #[test]
    fn spectrum_scales_with_atom_number_squared() {
        let tr = synthetic_trace();
        let modes = ModeGrid::harmonics(0.057, 21, FieldCoupling::new(0.01, 0.2, None).unwrap()).unwrap();
        let s1 = hhg_spectrum(&tr, &modes, 1, 10.0, 0.25).unwrap();
        let s2 = hhg_spectrum(&tr, &modes, 2, 10.0, 0.25).unwrap();
        for (a, b) in s1.yields.iter().zip(&s2.yields) {
            assert!((b / a - 4.0).abs() < 1e-12);
        }
        assert!(hhg_spectrum(&tr, &modes, 0, 10.0, 0.25).is_err());
    }

    #[test]
    fn mode_grid_validation() {
        let c = FieldCoupling::new(0.01, 0.2, None).unwrap();
        assert!(ModeGrid::new(vec![0.1, 0.1], c).is_err());
        assert_eq!(ModeGrid::harmonics(0.057, 21, c).unwrap().omegas.len(), 21);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn closed_form_excursion_matches_trapezoid(p in -0.8f64..0.8, t in 0.0f64..551.0) {
            let pl = drive(0.0);
            let n = 4000;
            let h = t / n as f64;
            let f: Vec<f64> = (0..=n).map(|i| p + pl.a(h * i as f64)).collect();
            let q = if t > 0.0 { simpson(&f, h) } else { 0.0 };
            prop_assert!((electron_displacement_scalar(&pl, p, t) - q).abs() < 1e-8);
        }

        #[test]
        fn delta_linear_in_coupling(g in 0.0f64..2.0, t1 in 0.0f64..500.0) {
            let pl = drive(0.0);
            let a = delta(&pl, g, 0.2, pl.duration(), t1, 0.114).unwrap();
            let b = delta(&pl, 1.0, 0.2, pl.duration(), t1, 0.114).unwrap();
            prop_assert!((a - b * g).norm() <= 1e-12 * b.norm().max(1.0));
        }

        #[test]
        fn momentum_and_cep_flip_negate_delta(p in 0.05f64..0.6, t1 in 0.0f64..500.0, cep in -1.0f64..1.0) {
            let a = drive(cep);
            let b = drive(cep + std::f64::consts::PI);
            let tt = a.duration();
            let x = delta(&a, 1.0, p, tt, t1, 0.057).unwrap();
            let y = delta(&b, 1.0, -p, tt, t1, 0.057).unwrap();
            prop_assert!((x.re + y.re).abs() < 1e-6 * x.norm().max(1.0));
        }
    }
}
