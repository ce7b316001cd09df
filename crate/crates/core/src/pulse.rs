//! The sin² driving pulse and the field-mode coupling.
//!
//! The vector potential is `A(t) = (E0/ω) sin²(ωt/2N) sin(ωt + cep)` on
//! `[0, T]`, `T = 2πN/ω`, and zero elsewhere. Expanding the envelope turns
//! it into three sinusoids sharing the phase `cep`, which gives exact
//! closed forms for `E`, `∫A` and `∫A²`.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::quad::simpson;
use crate::SPEED_OF_LIGHT;

/// Linearly polarized sin² pulse.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaserPulse {
    pub omega: f64,
    pub e0: f64,
    pub n_cyc: u32,
    pub cep: f64,
    pub polarization: [f64; 3],
}

impl LaserPulse {
    /// Pulse polarized along z. A zero or negative `e0` is allowed so that
    /// field-free and sign-flipped runs can be expressed.
    pub fn new(omega: f64, e0: f64, n_cyc: u32, cep: f64) -> Result<Self> {
        Self::with_polarization(omega, e0, n_cyc, cep, [0.0, 0.0, 1.0])
    }

    pub fn with_polarization(omega: f64, e0: f64, n_cyc: u32, cep: f64, polarization: [f64; 3]) -> Result<Self> {
        if !(omega > 0.0 && omega.is_finite()) {
            return Err(invalid("omega", format!("must be positive, got {omega}")));
        }
        if !e0.is_finite() {
            return Err(invalid("e0", "must be finite"));
        }
        if n_cyc == 0 {
            return Err(invalid("n_cyc", "must be at least 1"));
        }
        if !cep.is_finite() {
            return Err(invalid("cep", "must be finite"));
        }
        let norm = polarization.iter().map(|x| x * x).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(invalid("polarization", format!("must be a unit vector, |e| = {norm}")));
        }
        Ok(Self {
            omega,
            e0,
            n_cyc,
            cep,
            polarization,
        })
    }

    pub fn duration(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.n_cyc as f64 / self.omega
    }

    /// Ponderomotive energy `E0² / 4ω²`.
    pub fn ponderomotive_energy(&self) -> f64 {
        self.e0 * self.e0 / (4.0 * self.omega * self.omega)
    }

    // (amplitude, angular frequency) of the three carrier components.
    fn components(&self) -> [(f64, f64); 3] {
        let a0 = self.e0 / self.omega;
        let n = self.n_cyc as f64;
        [
            (0.5 * a0, self.omega),
            (-0.25 * a0, self.omega * (1.0 + 1.0 / n)),
            (-0.25 * a0, self.omega * (1.0 - 1.0 / n)),
        ]
    }

    fn inside(&self, t: f64) -> bool {
        (0.0..=self.duration()).contains(&t)
    }

    /// Scalar vector potential along the polarization.
    pub fn a(&self, t: f64) -> f64 {
        if !self.inside(t) {
            return 0.0;
        }
        let env = (self.omega * t / (2.0 * self.n_cyc as f64)).sin();
        (self.e0 / self.omega) * env * env * (self.omega * t + self.cep).sin()
    }

    /// Scalar electric field `-dA/dt` along the polarization.
    pub fn e(&self, t: f64) -> f64 {
        if !self.inside(t) {
            return 0.0;
        }
        -self
            .components()
            .iter()
            .map(|&(a, w)| a * w * (w * t + self.cep).cos())
            .sum::<f64>()
    }

    pub fn vector_potential(&self, t: f64) -> [f64; 3] {
        self.along(self.a(t))
    }

    pub fn electric_field(&self, t: f64) -> [f64; 3] {
        self.along(self.e(t))
    }

    fn along(&self, s: f64) -> [f64; 3] {
        self.polarization.map(|c| c * s)
    }

    /// `∫_0^t A(s) ds`, constant after the pulse ends.
    pub fn int_a(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.duration());
        self.components()
            .iter()
            .map(|&(a, w)| a * int_sin(w, self.cep, t))
            .sum()
    }

    /// `∫_0^t A(s)² ds`, constant after the pulse ends.
    pub fn int_a2(&self, t: f64) -> f64 {
        let t = t.clamp(0.0, self.duration());
        let comps = self.components();
        let mut acc = 0.0;
        for &(aj, wj) in &comps {
            for &(ak, wk) in &comps {
                acc += 0.5 * aj * ak * (int_cos(wj - wk, 0.0, t) - int_cos(wj + wk, 2.0 * self.cep, t));
            }
        }
        acc
    }

    /// Sinusoidal decomposition `A(t) = Σ a_j sin(w_j t + cep)` on the support.
    pub fn sinusoids(&self) -> [(f64, f64); 3] {
        self.components()
    }

    /// Uniform grid with step close to `dt` that ends exactly at `T`.
    pub fn grid(&self, dt: f64) -> TimeGrid {
        TimeGrid::covering(self.duration(), dt)
    }

    /// Unnormalized spectral amplitude `∫_0^T A(t) e^{-iω_k t} dt` by composite
    /// Simpson on the `dt` grid refined `refine` times.
    pub fn spectral_amplitude(&self, omega_k: f64, dt: f64, refine: usize) -> C64 {
        let g = self.grid(dt).refined(refine.max(1));
        let f: Vec<C64> = g.times().map(|t| C64::from_polar(self.a(t), -omega_k * t)).collect();
        simpson(&f, g.h)
    }
}

/// `∫_0^t sin(w s + c) ds`.
pub(crate) fn int_sin(w: f64, c: f64, t: f64) -> f64 {
    if w == 0.0 {
        t * c.sin()
    } else {
        (c.cos() - (w * t + c).cos()) / w
    }
}

/// `∫_0^t cos(u s + c) ds`.
pub(crate) fn int_cos(u: f64, c: f64, t: f64) -> f64 {
    if u == 0.0 {
        t * c.cos()
    } else {
        ((u * t + c).sin() - c.sin()) / u
    }
}

/// Uniform time grid `t_i = i h`, `i = 0..n`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    pub h: f64,
    pub n: usize,
}

impl TimeGrid {
    /// Grid on `[0, t_end]` whose step is `t_end / round(t_end / dt)`.
    pub fn covering(t_end: f64, dt: f64) -> Self {
        assert!(dt > 0.0 && t_end > 0.0);
        let steps = ((t_end / dt).round() as usize).max(1);
        Self {
            h: t_end / steps as f64,
            n: steps + 1,
        }
    }

    pub fn refined(&self, factor: usize) -> Self {
        let factor = factor.max(1);
        Self {
            h: self.h / factor as f64,
            n: (self.n - 1) * factor + 1,
        }
    }

    pub fn time(&self, i: usize) -> f64 {
        self.h * i as f64
    }

    pub fn end(&self) -> f64 {
        self.time(self.n - 1)
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n).map(|i| self.time(i))
    }
}

/// Light-matter coupling per field mode.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldCoupling {
    pub gtilde: f64,
    pub lambda_scale: f64,
    pub gamma_cutoff: Option<f64>,
}

impl FieldCoupling {
    pub fn new(gtilde: f64, lambda_scale: f64, gamma_cutoff: Option<f64>) -> Result<Self> {
        if !(gtilde >= 0.0 && gtilde.is_finite()) {
            return Err(invalid("gtilde", "must be finite and non-negative"));
        }
        if !(0.0..=1.0).contains(&lambda_scale) {
            return Err(invalid(
                "lambda_scale",
                format!("must lie in [0, 1], got {lambda_scale}"),
            ));
        }
        if let Some(g) = gamma_cutoff {
            if !(g > 0.0) {
                return Err(invalid("gamma_cutoff", "must be positive"));
            }
        }
        Ok(Self {
            gtilde,
            lambda_scale,
            gamma_cutoff,
        })
    }

    /// Coupling that makes a coherent amplitude `|alpha|` carry the classical
    /// peak field: `g̃ = E0 / (2|α|)`.
    pub fn matched(pulse: &LaserPulse, alpha: C64, lambda_scale: f64) -> Result<Self> {
        if alpha.norm() == 0.0 {
            return Err(invalid("alpha", "must be non-zero to fix the coupling"));
        }
        Self::new(pulse.e0.abs() / (2.0 * alpha.norm()), lambda_scale, None)
    }

    /// Form factor `Γ/√(Γ²+k²)`, 1 without a cutoff.
    pub fn form_factor(&self, k: f64) -> f64 {
        match self.gamma_cutoff {
            Some(g) => g / (g * g + k * k).sqrt(),
            None => 1.0,
        }
    }

    /// Effective coupling for a mode of angular frequency `omega`.
    pub fn strength(&self, omega: f64) -> f64 {
        self.gtilde * self.lambda_scale * self.form_factor(omega / SPEED_OF_LIGHT)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn drive() -> LaserPulse {
        LaserPulse::new(0.057, 0.053, 5, 0.0).unwrap()
    }

    #[test]
    fn vanishes_at_endpoints_and_outside() {
        for cep in [0.0, 0.7, 2.0] {
            let p = LaserPulse::new(0.057, 0.053, 5, cep).unwrap();
            assert!(p.a(0.0).abs() < 1e-15);
            assert!(p.a(p.duration()).abs() < 1e-15);
            assert_eq!(p.a(-1.0), 0.0);
            assert_eq!(p.e(p.duration() + 1.0), 0.0);
        }
    }

    #[test]
    fn e_vanishes_at_start_for_zero_cep() {
        assert!(drive().e(0.0).abs() < 1e-15);
    }

    #[test]
    fn peaks_match_field_amplitude() {
        let p = drive();
        let g = p.grid(0.01);
        let amax = g.times().map(|t| p.a(t).abs()).fold(0.0, f64::max);
        let emax = g.times().map(|t| p.e(t).abs()).fold(0.0, f64::max);
        assert!((amax - 0.053 / 0.057).abs() / (0.053 / 0.057) < 0.03, "{amax}");
        assert!((emax - 0.053).abs() / 0.053 < 0.03, "{emax}");
    }

    #[test]
    fn ponderomotive_energy_value() {
        assert!((drive().ponderomotive_energy() - 0.21606).abs() < 1e-4);
    }

    #[test]
    fn single_cycle_has_static_component() {
        let p = LaserPulse::new(0.057, 0.053, 1, 0.3).unwrap();
        let g = p.grid(0.01);
        let f: Vec<f64> = g.times().map(|t| p.a(t)).collect();
        assert!((simpson(&f, g.h) - p.int_a(p.duration())).abs() < 1e-8);
    }

    #[test]
    fn integrals_match_quadrature() {
        for cep in [0.0, 1.1] {
            let p = LaserPulse::new(0.057, 0.053, 5, cep).unwrap();
            let g = p.grid(0.05);
            let a: Vec<f64> = g.times().map(|t| p.a(t)).collect();
            let a2: Vec<f64> = a.iter().map(|x| x * x).collect();
            assert!((simpson(&a, g.h) - p.int_a(p.duration())).abs() < 1e-9);
            assert!((simpson(&a2, g.h) - p.int_a2(p.duration())).abs() < 1e-9);
        }
    }

    #[test]
    fn spectrum_peaks_near_carrier() {
        let p = drive();
        let best = (1..200)
            .map(|i| 0.001 * i as f64)
            .map(|w| (w, p.spectral_amplitude(w, 1.0, 2).norm()))
            .fold((0.0, 0.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        assert!((best.0 - 0.057).abs() < 0.0057, "{best:?}");
        let ratio = p.spectral_amplitude(0.57, 1.0, 8).norm() / p.spectral_amplitude(0.057, 1.0, 8).norm();
        assert!(ratio < 1e-2);
    }

    #[test]
    fn zero_field_has_zero_spectrum() {
        let p = LaserPulse::new(0.057, 0.0, 5, 0.0).unwrap();
        assert_eq!(p.spectral_amplitude(0.057, 1.0, 1).norm(), 0.0);
    }

    #[test]
    fn grid_ends_at_duration() {
        let p = drive();
        let g = p.grid(1.0);
        assert!((g.end() - p.duration()).abs() < 1e-9);
        assert!((g.h - 1.0).abs() < 0.01);
        assert!((g.refined(4).end() - p.duration()).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(LaserPulse::new(0.0, 0.05, 5, 0.0).is_err());
        assert!(LaserPulse::new(0.05, 0.05, 0, 0.0).is_err());
        assert!(LaserPulse::with_polarization(0.05, 0.05, 2, 0.0, [1.0, 1.0, 0.0]).is_err());
        assert!(FieldCoupling::new(1.0, 1.5, None).is_err());
    }

    #[test]
    fn form_factor_bounds() {
        let c = FieldCoupling::new(1.0, 0.2, Some(0.01)).unwrap();
        assert_eq!(c.form_factor(0.0), 1.0);
        assert!(c.form_factor(0.05) < 1.0 && c.form_factor(0.05) > 0.0);
        assert!((FieldCoupling::new(2.0, 0.5, None).unwrap().strength(1.0) - 1.0).abs() < 1e-15);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn field_is_minus_derivative(frac in 0.0005f64..0.9995, cep in -3.0f64..3.0, n in 1u32..12) {
            let p = LaserPulse::new(0.057, 0.053, n, cep).unwrap();
            let t = frac * p.duration();
            let h = 1e-4;
            let fd = (p.a(t + h) - p.a(t - h)) / (2.0 * h);
            prop_assert!((p.e(t) + fd).abs() <= 1e-6);
        }

        #[test]
        fn vector_forms_follow_polarization(t in 0.0f64..500.0) {
            let s = std::f64::consts::FRAC_1_SQRT_2;
            let p = LaserPulse::with_polarization(0.057, 0.053, 5, 0.0, [s, 0.0, s]).unwrap();
            let a = p.vector_potential(t);
            prop_assert!((a[0] - s * p.a(t)).abs() < 1e-15 && a[1] == 0.0);
            let e = p.electric_field(t);
            prop_assert!((e[2] - s * p.e(t)).abs() < 1e-15);
        }
    }
}
