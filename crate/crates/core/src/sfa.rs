//! Strong-field approximation for a hydrogen-like ground state.
//!
//! The continuum is reduced to a 1-D momentum line along the polarization.
//! For each canonical momentum `p` the ionization amplitude is accumulated
//! over the whole pulse in a single pass with a Filon rule, which makes the
//! dipole and the depletion rate cost `O(N_p · N_t)`.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::interp::CubicSpline;
use crate::pulse::{LaserPulse, TimeGrid};
use crate::quad::{cumulative_trapezoid, filon_cumulative, simpson};

/// Single-active-electron atom with a 1s-like ground state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomModel {
    pub ip: f64,
    pub lam: f64,
}

impl AtomModel {
    pub fn new(ip: f64, lam: f64) -> Result<Self> {
        if !(ip > 0.0 && ip.is_finite()) {
            return Err(invalid("ip", format!("must be positive, got {ip}")));
        }
        if !(lam > 0.0 && lam.is_finite()) {
            return Err(invalid("lam", format!("must be positive, got {lam}")));
        }
        Ok(Self { ip, lam })
    }

    pub fn hydrogen() -> Self {
        Self { ip: 0.5, lam: 1.0 }
    }

    /// Component of `⟨v|r|g⟩` along `v` for a scalar kinetic momentum.
    pub fn dipole(&self, v: f64) -> C64 {
        let l = self.lam;
        let s = l * l + v * v;
        let mag = (l * l * l / PI).sqrt() * v / (2.0 * PI).powf(1.5) * 32.0 * PI * l / (s * s * s);
        C64::new(0.0, -mag)
    }
}

/// Bound-continuum transition dipole `d(v)`, a vector along `v`.
pub fn transition_dipole(atom: &AtomModel, v: [f64; 3]) -> [C64; 3] {
    let l = atom.lam;
    let s = l * l + v.iter().map(|x| x * x).sum::<f64>();
    let k = (l * l * l / PI).sqrt() / (2.0 * PI).powf(1.5) * 32.0 * PI * l / (s * s * s);
    v.map(|c| C64::new(0.0, -k * c))
}

/// Time grids for the SFA integrals: output step `dt`, internal step `dt / refine`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SfaGrid {
    pub dt: f64,
    pub refine: usize,
}

impl Default for SfaGrid {
    fn default() -> Self {
        Self { dt: 1.0, refine: 4 }
    }
}

impl SfaGrid {
    pub fn output(&self, pulse: &LaserPulse) -> TimeGrid {
        pulse.grid(self.dt)
    }

    pub fn fine(&self, pulse: &LaserPulse) -> TimeGrid {
        self.output(pulse).refined(self.refine.max(1))
    }
}

/// Quantum-orbit phase `Φ(p,t) = ∫_0^t [(p+A)²/2 + Ip]`, in closed form.
/// The action between `t'` and `t` is `Φ(p,t) - Φ(p,t')`.
pub fn action_phase(pulse: &LaserPulse, atom: &AtomModel, p: f64, t: f64) -> f64 {
    (0.5 * p * p + atom.ip) * t + p * pulse.int_a(t) + 0.5 * pulse.int_a2(t)
}

/// Semiclassical action `∫_{t1}^{t2} [(p + A)²/2 + Ip] dτ` by composite Simpson
/// with step close to `dt`. The field is taken as zero outside the pulse.
pub fn semiclassical_action(pulse: &LaserPulse, atom: &AtomModel, p: f64, t1: f64, t2: f64, dt: f64) -> Result<f64> {
    if t2 < t1 {
        return Err(invalid("t2", "must not precede t1"));
    }
    if t2 == t1 {
        return Ok(0.0);
    }
    let steps = ((t2 - t1) / dt).ceil().max(2.0) as usize;
    let h = (t2 - t1) / steps as f64;
    let f: Vec<f64> = (0..=steps)
        .map(|i| {
            let v = p + pulse.a(t1 + h * i as f64);
            0.5 * v * v + atom.ip
        })
        .collect();
    Ok(simpson(&f, h))
}

// Cumulative Filon integral of E d(p+A) e^{iΦ}; the amplitude is i e^{-iΦ} times it.
fn amplitude_trace(pulse: &LaserPulse, atom: &AtomModel, p: f64, grid: &TimeGrid) -> (Vec<C64>, Vec<C64>) {
    let n = grid.n;
    let mut g = Vec::with_capacity(n);
    let mut phase = Vec::with_capacity(n);
    let mut dv = Vec::with_capacity(n);
    for t in grid.times() {
        let d = atom.dipole(p + pulse.a(t));
        g.push(d * pulse.e(t));
        phase.push(action_phase(pulse, atom, p, t));
        dv.push(d);
    }
    let c = filon_cumulative(&g, &phase, grid.h);
    let b = c
        .iter()
        .zip(&phase)
        .map(|(c, &ph)| C64::i() * C64::from_polar(1.0, -ph) * c)
        .collect();
    (b, dv)
}

/// Ionization amplitude `b(p,t) = i ∫_0^t E(t') d(p+A(t')) e^{-i S(p,t,t')} dt'`
/// without ground-state depletion.
pub fn ionization_amplitude(pulse: &LaserPulse, atom: &AtomModel, p: f64, t: f64, grid: SfaGrid) -> Result<C64> {
    if !(0.0..=pulse.duration() * (1.0 + 1e-12)).contains(&t) {
        return Err(invalid("t", "must lie within the pulse"));
    }
    if t == 0.0 {
        return Ok(C64::default());
    }
    let g = TimeGrid::covering(t, grid.dt / grid.refine.max(1) as f64);
    let (b, _) = amplitude_trace(pulse, atom, p, &g);
    Ok(b[g.n - 1])
}

/// Symmetric uniform momentum grid of `n` points over `±span·√Up`.
pub fn momentum_grid(pulse: &LaserPulse, n: usize, span: f64) -> Vec<f64> {
    let up = pulse.ponderomotive_energy();
    let half = if up > 0.0 { span * up.sqrt() } else { 1.0 };
    if n < 2 {
        return vec![0.0; n];
    }
    (0..n).map(|i| -half + 2.0 * half * i as f64 / (n - 1) as f64).collect()
}

fn momentum_weights(p_grid: &[f64]) -> Vec<f64> {
    let n = p_grid.len();
    (0..n)
        .map(|i| {
            let lo = if i == 0 { p_grid[0] } else { p_grid[i - 1] };
            let hi = if i + 1 == n { p_grid[n - 1] } else { p_grid[i + 1] };
            0.5 * (hi - lo)
        })
        .collect()
}

fn check_p_grid(pulse: &LaserPulse, p_grid: &[f64]) -> Result<()> {
    if p_grid.len() < 8 {
        return Err(invalid(
            "p_grid",
            format!("needs at least 8 points, got {}", p_grid.len()),
        ));
    }
    if p_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(invalid("p_grid", "must be strictly ascending"));
    }
    let (lo, hi) = (p_grid[0], p_grid[p_grid.len() - 1]);
    if (lo + hi).abs() > 1e-9 * (hi - lo) {
        return Err(invalid("p_grid", "must be symmetric about zero"));
    }
    let need = 3.0 * pulse.ponderomotive_energy().sqrt();
    if hi < need * (1.0 - 1e-9) {
        return Err(invalid("p_grid", format!("must cover ±3√Up = ±{need:.4}")));
    }
    Ok(())
}

/// Real time series on a uniform grid starting at `t = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DipoleTrace {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl DipoleTrace {
    pub fn step(&self) -> f64 {
        if self.times.len() > 1 {
            self.times[1] - self.times[0]
        } else {
            0.0
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spline(&self) -> CubicSpline<f64> {
        CubicSpline::new(self.times[0], self.step(), self.values.clone())
    }

    /// Two-column CSV `t,d`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["t", "d"])?;
        for (t, d) in self.times.iter().zip(&self.values) {
            out.write_record([t.to_string(), d.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Dipole expectation value and ground-state survival on the output grid.
#[derive(Clone, Debug)]
pub struct SfaResponse {
    pub dipole: DipoleTrace,
    pub survival: Vec<f64>,
}

/// Runs the 1-D momentum-resolved SFA over the whole pulse.
///
/// `⟨d(t)⟩ = Σ_p w_p 2 Re[d*(p+A(t)) b(p,t)]`. The depletion rate is
/// `W(t) = -i E(t) Σ_p w_p d*(p+A(t)) b(p,t)` (Markov form) and the survival
/// amplitude is `exp(-∫ Re W)`. Momenta are processed in parallel and summed
/// in grid order, so results do not depend on the thread count.
pub fn sfa_response(pulse: &LaserPulse, atom: &AtomModel, p_grid: &[f64], grid: SfaGrid) -> Result<SfaResponse> {
    check_p_grid(pulse, p_grid)?;
    let out = grid.output(pulse);
    let fine = grid.fine(pulse);
    let r = grid.refine.max(1);
    let weights = momentum_weights(p_grid);
    let parts: Vec<(Vec<f64>, Vec<C64>)> = p_grid
        .par_iter()
        .zip(weights.par_iter())
        .map(|(&p, &w)| {
            let (b, d) = amplitude_trace(pulse, atom, p, &fine);
            let dip = (0..out.n).map(|k| 2.0 * w * (d[k * r].conj() * b[k * r]).re).collect();
            let rate = b.iter().zip(&d).map(|(b, d)| d.conj() * b * w).collect();
            (dip, rate)
        })
        .collect();
    let mut values = vec![0.0; out.n];
    let mut sum_rate = vec![C64::default(); fine.n];
    for (dip, rate) in &parts {
        for (acc, v) in values.iter_mut().zip(dip) {
            *acc += v;
        }
        for (acc, v) in sum_rate.iter_mut().zip(rate) {
            *acc += v;
        }
    }
    let w_re: Vec<f64> = fine
        .times()
        .zip(&sum_rate)
        .map(|(t, s)| (C64::new(0.0, -pulse.e(t)) * s).re)
        .collect();
    let expo = cumulative_trapezoid(&w_re, fine.h);
    let survival = (0..out.n).map(|k| (-expo[k * r]).exp()).collect();
    Ok(SfaResponse {
        dipole: DipoleTrace {
            times: out.times().collect(),
            values,
        },
        survival,
    })
}

/// `⟨d(t)⟩` on the output grid.
pub fn dipole_expectation(pulse: &LaserPulse, atom: &AtomModel, p_grid: &[f64], grid: SfaGrid) -> Result<DipoleTrace> {
    Ok(sfa_response(pulse, atom, p_grid, grid)?.dipole)
}

/// Ground-state survival amplitude `a_g(t)`, interpolated between grid nodes.
pub fn ground_survival(pulse: &LaserPulse, atom: &AtomModel, p_grid: &[f64], t: f64, grid: SfaGrid) -> Result<f64> {
    if !(0.0..=pulse.duration() * (1.0 + 1e-12)).contains(&t) {
        return Err(invalid("t", "must lie within the pulse"));
    }
    let resp = sfa_response(pulse, atom, p_grid, grid)?;
    let expo: Vec<f64> = resp.survival.iter().map(|a| a.ln()).collect();
    let s = CubicSpline::new(0.0, resp.dipole.step(), expo);
    Ok(s.eval(t).exp().min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn drive(n: u32) -> LaserPulse {
        LaserPulse::new(0.057, 0.053, n, 0.0).unwrap()
    }

    #[test]
    fn dipole_closed_form_value() {
        let atom = AtomModel::hydrogen();
        let d = transition_dipole(&atom, [0.0, 0.0, 1.0]);
        let want = (1.0 / PI).sqrt() / (2.0 * PI).powf(1.5) * 32.0 * PI / 8.0;
        assert!((d[2].norm() - want).abs() < 1e-14);
        assert_eq!(d[0], C64::default());
        assert_eq!(atom.dipole(0.0), C64::default());
    }

    #[test]
    fn action_matches_closed_form_and_refinement() {
        let (pl, atom) = (drive(5), AtomModel::hydrogen());
        let tt = pl.duration();
        let coarse = semiclassical_action(&pl, &atom, 0.1, 0.0, tt, 1.0).unwrap();
        let fine = semiclassical_action(&pl, &atom, 0.1, 0.0, tt, 0.1).unwrap();
        assert!((coarse - fine).abs() / fine.abs() < 1e-6);
        assert!((fine - action_phase(&pl, &atom, 0.1, tt)).abs() / fine.abs() < 1e-9);
        assert_eq!(semiclassical_action(&pl, &atom, 0.1, 3.0, 3.0, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn action_free_field() {
        let pl = LaserPulse::new(0.057, 0.0, 5, 0.0).unwrap();
        let atom = AtomModel::hydrogen();
        let s = semiclassical_action(&pl, &atom, 0.0, 10.0, 50.0, 1.0).unwrap();
        assert!((s - 0.5 * 40.0).abs() < 1e-12);
    }

    #[test]
    fn amplitude_trivial_cases() {
        let atom = AtomModel::hydrogen();
        assert_eq!(
            ionization_amplitude(&drive(5), &atom, 0.3, 0.0, SfaGrid::default()).unwrap(),
            C64::default()
        );
        let dark = LaserPulse::new(0.057, 0.0, 5, 0.0).unwrap();
        let b = ionization_amplitude(&dark, &atom, 0.3, dark.duration(), SfaGrid::default()).unwrap();
        assert_eq!(b.norm(), 0.0);
    }

    #[test]
    fn deep_binding_suppresses_ionization() {
        let atom = AtomModel::new(50.0, 1.0).unwrap();
        let pl = drive(5);
        let b = ionization_amplitude(&pl, &atom, 0.2, pl.duration(), SfaGrid::default()).unwrap();
        assert!(b.norm() < 1e-6, "{}", b.norm());
    }

    #[test]
    fn amplitude_converges_with_step() {
        let (pl, atom) = (drive(5), AtomModel::hydrogen());
        let t = pl.duration();
        let a = ionization_amplitude(&pl, &atom, 0.3, t, SfaGrid { dt: 1.0, refine: 4 }).unwrap();
        let b = ionization_amplitude(&pl, &atom, 0.3, t, SfaGrid { dt: 1.0, refine: 32 }).unwrap();
        assert!((a - b).norm() / b.norm() < 1e-3, "{a} {b}");
    }

    #[test]
    fn photoelectron_spectrum_below_two_up() {
        let (pl, atom) = (drive(5), AtomModel::hydrogen());
        let up = pl.ponderomotive_energy();
        let ps = momentum_grid(&pl, 121, 3.0);
        let t = pl.duration();
        let best = ps
            .iter()
            .map(|&p| {
                (
                    p,
                    ionization_amplitude(&pl, &atom, p, t, SfaGrid::default())
                        .unwrap()
                        .norm_sqr(),
                )
            })
            .fold((0.0, 0.0), |a, x| if x.1 > a.1 { x } else { a });
        assert!(0.5 * best.0 * best.0 < 2.0 * up);
    }

    #[test]
    fn rejects_degenerate_momentum_grid() {
        let (pl, atom) = (drive(2), AtomModel::hydrogen());
        assert!(dipole_expectation(&pl, &atom, &momentum_grid(&pl, 7, 4.0), SfaGrid::default()).is_err());
        assert!(dipole_expectation(&pl, &atom, &momentum_grid(&pl, 64, 2.0), SfaGrid::default()).is_err());
    }

    #[test]
    fn dipole_starts_at_zero_and_flips_with_field() {
        let atom = AtomModel::hydrogen();
        let a = drive(2);
        let b = LaserPulse::new(0.057, -0.053, 2, 0.0).unwrap();
        let grid = momentum_grid(&a, 128, 4.0);
        let da = dipole_expectation(&a, &atom, &grid, SfaGrid::default()).unwrap();
        let db = dipole_expectation(&b, &atom, &grid, SfaGrid::default()).unwrap();
        assert_eq!(da.values[0], 0.0);
        let scale = da.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in da.values.iter().zip(&db.values) {
            assert!((x + y).abs() < 1e-10 * scale.max(1e-30));
        }
    }

    #[test]
    fn survival_stays_high() {
        let (pl, atom) = (drive(5), AtomModel::hydrogen());
        let grid = momentum_grid(&pl, 256, 4.0);
        let resp = sfa_response(&pl, &atom, &grid, SfaGrid::default()).unwrap();
        assert_eq!(resp.survival[0], 1.0);
        let last = *resp.survival.last().unwrap();
        assert!((0.9..=1.0).contains(&last), "{last}");
        let mid = ground_survival(&pl, &atom, &grid, 0.5 * pl.duration(), SfaGrid::default()).unwrap();
        assert!(mid <= 1.0 && mid > 0.9);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let tr = DipoleTrace {
            times: vec![0.0, 1.0],
            values: vec![0.0, 0.5],
        };
        let mut buf = Vec::new();
        tr.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "t,d\n0,0\n1,0.5\n");
    }

    proptest! {
        #[test]
        fn dipole_element_is_odd(v in -10.0f64..10.0, lam in 0.2f64..3.0) {
            let atom = AtomModel::new(0.5, lam).unwrap();
            prop_assert_eq!(atom.dipole(-v), -atom.dipole(v));
        }
    }
}
