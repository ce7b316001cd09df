//! Field state of the fundamental mode after conditioning on direct ATI.
//!
//! For a photoelectron with canonical momentum `p`, the amplitude on Fock
//! state `|n⟩` is a time integral over the ionization time `t'`:
//!
//! `A_n = -i ∫ F M C_HH e^{iθ} K_n(β) - G_1 ∫ M C_HH e^{iθ} [√n K_{n-1}(β) - K_n(β)]`
//!
//! with `K_n(β) = e^{-|β|²/2} βⁿ/√n!`, `β = (α + χ_1 + δ_1) e^{-iω_1 T}`,
//! `M = d(p + A(t')) e^{iΦ(p,t')}`, `C_HH` the weight from projecting the
//! harmonics on vacuum and `F` the field factor built from the harmonic
//! displacements. `χ`, `C_HH` and the fundamental BCH phase are sampled on
//! the dipole-trace grid and interpolated with cubic splines; `δ` has a
//! closed form and is evaluated exactly.

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::displacement::{bch_phase_trace, chi_trace, delta, ModeGrid};
use crate::error::{invalid, Error, Result};
use crate::fock::{CoherentSuperposition, FockDistribution};
use crate::interp::CubicSpline;
use crate::pulse::{FieldCoupling, LaserPulse, TimeGrid};
use crate::quad::{integrate_adaptive, AdaptiveOptions};
use crate::sfa::{action_phase, AtomModel, DipoleTrace};

/// Momenta beyond this many `√Up` are outside the direct-ionization regime.
pub const DIRECT_REGIME: f64 = 0.46;

/// Extra Fock states computed beyond `n_max` to measure the truncation tail.
const TAIL_PAD: usize = 40;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtiConfig {
    /// Initial coherent amplitude of the fundamental mode.
    pub alpha: C64,
    pub lambda_scale: f64,
    /// Bare coupling; `None` uses `E0 / (2|α|)`.
    pub gtilde: Option<f64>,
    /// Highest harmonic order kept (modes are orders `1..=max_order`).
    pub max_order: u32,
    pub n_max: usize,
    /// Modes with `ω/ω_L` below this count as fundamental.
    pub fundamental_cut: f64,
    pub abs_tol: f64,
    pub tail_tol: f64,
    /// Substeps per trace step for the BCH double integrals.
    pub bch_refine: usize,
}

impl Default for AtiConfig {
    fn default() -> Self {
        Self {
            alpha: C64::new(0.0, 7.0),
            lambda_scale: 0.2,
            gtilde: None,
            max_order: 21,
            n_max: 120,
            fundamental_cut: 1.5,
            abs_tol: 1e-8,
            tail_tol: 1e-6,
            bch_refine: 4,
        }
    }
}

/// Fock amplitudes of the fundamental mode at the end of the pulse.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AtiAmplitudeTable {
    pub p: f64,
    pub amps: Vec<C64>,
    /// `Σ |amps|²` over `0..=n_max`.
    pub norm: f64,
    /// Relative weight found beyond `n_max`.
    pub tail: f64,
    pub warning: Option<String>,
}

impl AtiAmplitudeTable {
    pub fn probabilities(&self) -> Vec<f64> {
        if self.norm > 0.0 {
            self.amps.iter().map(|a| a.norm_sqr() / self.norm).collect()
        } else {
            vec![0.0; self.amps.len()]
        }
    }

    pub fn distribution(&self) -> FockDistribution {
        FockDistribution {
            probs: self.probabilities(),
            n_max: self.amps.len() - 1,
            tail: self.tail,
        }
    }
}

/// `Σ n P(n)` of a table.
pub fn mean_photon(table: &AtiAmplitudeTable) -> f64 {
    table.distribution().mean()
}

/// Shared, momentum-independent part of the calculation.
pub struct AtiModel {
    pulse: LaserPulse,
    atom: AtomModel,
    cfg: AtiConfig,
    modes: ModeGrid,
    grid: TimeGrid,
    fundamental: usize,
    harmonics: Vec<usize>,
    chis: Vec<Vec<C64>>,
    chi_splines: Vec<CubicSpline<C64>>,
    e_chi: CubicSpline<C64>,
}

/// Momentum-resolved interpolants.
pub struct AtiRun<'a> {
    model: &'a AtiModel,
    p: f64,
    c_hh: CubicSpline<C64>,
    phi_fund: CubicSpline<f64>,
}

impl AtiModel {
    pub fn new(pulse: &LaserPulse, atom: &AtomModel, trace: &DipoleTrace, cfg: &AtiConfig) -> Result<Self> {
        if trace.len() < 4 {
            return Err(invalid("trace", "needs at least four samples"));
        }
        if (trace.times.last().unwrap() - pulse.duration()).abs() > 1e-6 * pulse.duration() {
            return Err(invalid("trace", "must span the whole pulse"));
        }
        if !(0.0..=1.0).contains(&cfg.lambda_scale) {
            return Err(invalid("lambda_scale", "must lie in [0, 1]"));
        }
        if cfg.max_order < 1 || cfg.fundamental_cut <= 1.0 {
            return Err(invalid(
                "fundamental_cut",
                "need max_order >= 1 and a cut above order 1",
            ));
        }
        let coupling = match cfg.gtilde {
            Some(g) => FieldCoupling::new(g, cfg.lambda_scale, None)?,
            None => FieldCoupling::matched(pulse, cfg.alpha, cfg.lambda_scale)?,
        };
        let modes = ModeGrid::harmonics(pulse.omega, cfg.max_order, coupling)?;
        let fundamental = 0;
        let harmonics: Vec<usize> = (0..modes.omegas.len())
            .filter(|&k| modes.omegas[k] / pulse.omega >= cfg.fundamental_cut)
            .collect();
        let grid = TimeGrid {
            h: trace.step(),
            n: trace.len(),
        };
        let chis: Vec<Vec<C64>> = (0..modes.omegas.len())
            .map(|k| chi_trace(trace, modes.omegas[k], modes.strength(k)))
            .collect();
        let chi_splines = chis.iter().map(|c| CubicSpline::new(0.0, grid.h, c.clone())).collect();
        // E_χ(t') = i Σ_k G_k [χ_k(t') e^{-iω_k T} - c.c.]
        let t_end = pulse.duration();
        let e_chi_vals: Vec<C64> = (0..grid.n)
            .map(|i| {
                let mut acc = C64::default();
                for (k, c) in chis.iter().enumerate() {
                    let z = modes.strength(k) * c[i] * C64::from_polar(1.0, -modes.omegas[k] * t_end);
                    acc += z - z.conj();
                }
                C64::i() * acc
            })
            .collect();
        Ok(Self {
            pulse: *pulse,
            atom: *atom,
            cfg: cfg.clone(),
            e_chi: CubicSpline::new(0.0, grid.h, e_chi_vals),
            modes,
            grid,
            fundamental,
            harmonics,
            chis,
            chi_splines,
        })
    }

    pub fn modes(&self) -> &ModeGrid {
        &self.modes
    }

    pub fn config(&self) -> &AtiConfig {
        &self.cfg
    }

    /// χ of mode `k` on the trace grid.
    pub fn chi_samples(&self, k: usize) -> &[C64] {
        &self.chis[k]
    }

    fn delta_at(&self, k: usize, p: f64, t1: f64) -> C64 {
        let t_end = self.pulse.duration();
        delta(
            &self.pulse,
            self.modes.strength(k),
            p,
            t_end,
            t1.clamp(0.0, t_end),
            self.modes.omegas[k],
        )
        .unwrap_or_default()
    }

    fn bch_samples(&self, k: usize, p: f64) -> Vec<f64> {
        let r = self.cfg.bch_refine.max(1);
        let fine = self.grid.refined(r);
        bch_phase_trace(&self.pulse, self.modes.strength(k), p, self.modes.omegas[k], &fine)
            .into_iter()
            .step_by(r)
            .collect()
    }

    /// Builds the interpolants for momentum `p`.
    pub fn prepare(&self, p: f64) -> AtiRun<'_> {
        let phases: Vec<(usize, Vec<f64>)> = self
            .harmonics
            .par_iter()
            .map(|&k| (k, self.bch_samples(k, p)))
            .collect();
        let mut c_hh = vec![C64::new(1.0, 0.0); self.grid.n];
        for (k, ph) in &phases {
            for (i, c) in c_hh.iter_mut().enumerate() {
                let d = self.delta_at(*k, p, self.grid.time(i));
                *c *= C64::from_polar((-0.5 * d.norm_sqr()).exp(), ph[i]);
            }
        }
        AtiRun {
            model: self,
            p,
            c_hh: CubicSpline::new(0.0, self.grid.h, c_hh),
            phi_fund: CubicSpline::new(0.0, self.grid.h, self.bch_samples(self.fundamental, p)),
        }
    }

    /// Harmonic weight `C_HH(p, T, t')` evaluated without interpolation.
    pub fn c_hh_direct(&self, p: f64, t_ion: f64) -> Result<C64> {
        let t_end = self.pulse.duration();
        if !(0.0..=t_end).contains(&t_ion) {
            return Err(invalid("t_ion", "must lie within the pulse"));
        }
        let mut acc = C64::new(1.0, 0.0);
        let dt = self.grid.h / self.cfg.bch_refine.max(1) as f64;
        for &k in &self.harmonics {
            let g = self.modes.strength(k);
            let (phi, _) = crate::displacement::bch_phases(
                &self.pulse,
                g,
                p,
                t_end,
                t_ion,
                self.modes.omegas[k],
                C64::default(),
                dt,
            )?;
            let d = self.delta_at(k, p, t_ion);
            acc *= C64::from_polar((-0.5 * d.norm_sqr()).exp(), phi);
        }
        Ok(acc)
    }

    /// Fock amplitudes for momentum `p`.
    pub fn amplitudes(&self, p: f64) -> Result<AtiAmplitudeTable> {
        let warning = self.regime_warning(p);
        let n_max = self.cfg.n_max;
        if self.modes.coupling.lambda_scale == 0.0 || self.modes.coupling.gtilde == 0.0 {
            // No backaction: the fundamental stays in its coherent state.
            let st = CoherentSuperposition::coherent(vec![
                self.cfg.alpha * C64::from_polar(1.0, -self.pulse.omega * self.pulse.duration()),
            ]);
            let amps = st.fock_amplitudes(n_max)?;
            let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
            return Ok(AtiAmplitudeTable {
                p,
                amps,
                tail: (1.0 - norm).max(0.0),
                norm,
                warning,
            });
        }
        let run = self.prepare(p);
        let dim = n_max + TAIL_PAD + 1;
        let opts = AdaptiveOptions {
            abs_tol: self.cfg.abs_tol,
            rel_tol: 0.0,
            initial_intervals: (self.grid.n / 8).max(16),
            max_intervals: 200_000,
        };
        let all = integrate_adaptive(|t, out| run.integrand(t, out), 0.0, self.pulse.duration(), dim, opts)?;
        let norm_all: f64 = all.iter().map(|a| a.norm_sqr()).sum();
        let amps: Vec<C64> = all[..=n_max].to_vec();
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if !(norm > 0.0) {
            return Err(Error::ZeroNorm);
        }
        let tail = (norm_all - norm) / norm_all;
        if tail > self.cfg.tail_tol {
            return Err(Error::TruncationTooSmall { n_max, tail });
        }
        Ok(AtiAmplitudeTable {
            p,
            amps,
            norm,
            tail,
            warning,
        })
    }

    fn regime_warning(&self, p: f64) -> Option<String> {
        let s = self.pulse.ponderomotive_energy().sqrt();
        (p.abs() > DIRECT_REGIME * s).then(|| {
            format!(
                "|p| = {:.3} sqrt(Up) exceeds {DIRECT_REGIME} sqrt(Up); rescattering is not included",
                p.abs() / s
            )
        })
    }
}

impl AtiRun<'_> {
    pub fn p(&self) -> f64 {
        self.p
    }

    /// Interpolated harmonic weight `C_HH(p, T, t')`.
    pub fn c_hh(&self, t: f64) -> C64 {
        self.c_hh.eval(t)
    }

    fn integrand(&self, t: f64, out: &mut [C64]) {
        let m = self.model;
        let pulse = &m.pulse;
        let t_end = pulse.duration();
        let p = self.p;
        let f_idx = m.fundamental;
        let chi1 = m.chi_splines[f_idx].eval(t);
        let d1 = m.delta_at(f_idx, p, t);
        let alpha = m.cfg.alpha;
        let theta = self.phi_fund.eval(t) + (d1 * chi1.conj()).im + (alpha * (d1.conj() + chi1.conj())).im;
        let beta = (alpha + chi1 + d1) * C64::from_polar(1.0, -m.modes.omegas[f_idx] * t_end);
        let mut field = m.e_chi.eval(t);
        for &k in &m.harmonics {
            let w = m.modes.omegas[k];
            let z = m.chi_splines[k].eval(t) + m.delta_at(k, p, t);
            field += m.modes.strength(k) * C64::from_polar(1.0, -w * t) * z;
        }
        let matrix = m.atom.dipole(p + pulse.a(t)) * C64::from_polar(1.0, action_phase(pulse, &m.atom, p, t));
        let base = matrix * self.c_hh.eval(t) * C64::from_polar(1.0, theta);
        let c1 = C64::new(0.0, -1.0) * field * base;
        let c2 = -m.modes.strength(f_idx) * base;
        // K_n by recurrence K_n = K_{n-1} β/√n
        let mut k_prev = C64::default();
        let mut k = C64::new((-0.5 * beta.norm_sqr()).exp(), 0.0);
        for (n, o) in out.iter_mut().enumerate() {
            if n > 0 {
                k_prev = k;
                k = k * beta / (n as f64).sqrt();
            }
            *o = c1 * k + c2 * (k_prev * (n as f64).sqrt() - k);
        }
    }
}

/// Amplitude table for one momentum.
pub fn ati_fock_amplitudes(model: &AtiModel, p: f64) -> Result<AtiAmplitudeTable> {
    model.amplitudes(p)
}

/// Incoherent mixture over photoelectron momenta.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AtiEnsemble {
    pub weights: Vec<f64>,
    pub components: Vec<AtiAmplitudeTable>,
    pub distribution: FockDistribution,
}

impl AtiEnsemble {
    pub fn mean(&self) -> f64 {
        self.distribution.mean()
    }
}

/// `Σ_i w_i P_i(n)` over `(weight, p)` pairs.
pub fn ati_mixed_ensemble(model: &AtiModel, cfgs: &[(f64, f64)]) -> Result<AtiEnsemble> {
    if cfgs.is_empty() {
        return Err(invalid("cfgs", "ensemble needs at least one momentum"));
    }
    if cfgs.iter().any(|(w, _)| !(*w >= 0.0)) {
        return Err(invalid("cfgs", "weights must be non-negative"));
    }
    let total: f64 = cfgs.iter().map(|(w, _)| w).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(invalid("cfgs", format!("weights must sum to 1, got {total}")));
    }
    let components = cfgs
        .iter()
        .map(|&(_, p)| model.amplitudes(p))
        .collect::<Result<Vec<_>>>()?;
    let dists: Vec<FockDistribution> = components.iter().map(|c| c.distribution()).collect();
    let parts: Vec<(f64, &FockDistribution)> = cfgs.iter().map(|c| c.0).zip(dists.iter()).collect();
    let distribution = FockDistribution::mixture(&parts)?;
    Ok(AtiEnsemble {
        weights: cfgs.iter().map(|c| c.0).collect(),
        components,
        distribution,
    })
}

/// Rank correlation between two samples (average ranks for ties).
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = 0.5 * (i + j) as f64 + 1.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let n = x.len() as f64;
    let (mx, my) = (rx.iter().sum::<f64>() / n, ry.iter().sum::<f64>() / n);
    let cov: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - mx) * (b - my)).sum();
    let vx: f64 = rx.iter().map(|a| (a - mx).powi(2)).sum();
    let vy: f64 = ry.iter().map(|b| (b - my).powi(2)).sum();
    cov / (vx * vy).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sfa::{dipole_expectation, momentum_grid, SfaGrid};
    use std::sync::OnceLock;

    fn setup() -> &'static (LaserPulse, AtomModel, DipoleTrace) {
        static CELL: OnceLock<(LaserPulse, AtomModel, DipoleTrace)> = OnceLock::new();
        CELL.get_or_init(|| {
            let pulse = LaserPulse::new(0.057, 0.053, 5, 0.0).unwrap();
            let atom = AtomModel::hydrogen();
            let grid = momentum_grid(&pulse, 256, 4.0);
            let tr = dipole_expectation(&pulse, &atom, &grid, SfaGrid::default()).unwrap();
            (pulse, atom, tr)
        })
    }

    #[test]
    fn zero_coupling_is_poissonian() {
        let (pl, atom, tr) = setup();
        let cfg = AtiConfig {
            lambda_scale: 0.0,
            ..Default::default()
        };
        let m = AtiModel::new(pl, atom, tr, &cfg).unwrap();
        let t = m.amplitudes(0.1).unwrap();
        assert!((mean_photon(&t) - 49.0).abs() < 1e-9);
    }

    #[test]
    fn distribution_is_normalized() {
        let (pl, atom, tr) = setup();
        let m = AtiModel::new(pl, atom, tr, &AtiConfig::default()).unwrap();
        let p = 0.14 * pl.ponderomotive_energy().sqrt();
        let t = m.amplitudes(p).unwrap();
        let probs = t.probabilities();
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(probs.iter().all(|&x| x >= 0.0));
        assert!(t.tail < 1e-6);
        assert!(t.warning.is_none());
        let wide = AtiModel::new(
            pl,
            atom,
            tr,
            &AtiConfig {
                n_max: 200,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(wide
            .amplitudes(0.5 * pl.ponderomotive_energy().sqrt())
            .unwrap()
            .warning
            .is_some());
    }

    #[test]
    fn c_hh_interpolation_matches_direct() {
        let (pl, atom, tr) = setup();
        let m = AtiModel::new(pl, atom, tr, &AtiConfig::default()).unwrap();
        let p = 0.3 * pl.ponderomotive_energy().sqrt();
        let run = m.prepare(p);
        let tt = pl.duration();
        let mut worst: f64 = 0.0;
        for k in 0..50 {
            let t = tt * (k as f64 + 0.37) / 50.0;
            let direct = m.c_hh_direct(p, t).unwrap();
            assert!(direct.norm() <= 1.0 + 1e-12);
            worst = worst.max((run.c_hh(t) - direct).norm());
        }
        assert!(worst < 1e-3, "{worst}");
    }

    #[test]
    fn c_hh_is_one_without_field() {
        let (_, atom, tr) = setup();
        let dark = LaserPulse::new(0.057, 0.0, 5, 0.0).unwrap();
        let mut flat = tr.clone();
        flat.values.iter_mut().for_each(|v| *v = 0.0);
        let cfg = AtiConfig {
            gtilde: Some(0.004),
            ..Default::default()
        };
        let m = AtiModel::new(&dark, atom, &flat, &cfg).unwrap();
        let c = m.c_hh_direct(0.0, 100.0).unwrap();
        assert!((c - 1.0).norm() < 1e-14);
    }

    #[test]
    fn ensemble_rules() {
        let (pl, atom, tr) = setup();
        let m = AtiModel::new(pl, atom, tr, &AtiConfig::default()).unwrap();
        let s = pl.ponderomotive_energy().sqrt();
        assert!(ati_mixed_ensemble(&m, &[]).is_err());
        let single = ati_mixed_ensemble(&m, &[(1.0, 0.2 * s)]).unwrap();
        let pure = m.amplitudes(0.2 * s).unwrap();
        assert!((single.mean() - mean_photon(&pure)).abs() < 1e-12);
        let pair = ati_mixed_ensemble(&m, &[(0.5, 0.2 * s), (0.5, -0.2 * s)]).unwrap();
        let other = m.amplitudes(-0.2 * s).unwrap();
        assert!((pair.mean() - 0.5 * (mean_photon(&pure) + mean_photon(&other))).abs() < 1e-9);
    }

    #[test]
    fn spearman_basics() {
        assert!((spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]) - 1.0).abs() < 1e-15);
        assert!((spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]) + 1.0).abs() < 1e-15);
    }
}
