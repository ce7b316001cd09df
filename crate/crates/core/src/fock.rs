//! Finite superpositions of multimode coherent states.
//!
//! Everything is done in closed form through the overlap
//! `⟨α|β⟩ = exp(-|α|²/2 - |β|²/2 + α*β)`; the Fock basis only appears when
//! photon statistics are requested.

use std::f64::consts::FRAC_PI_4;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Amplitude vectors closer than this are merged into one term.
pub const MERGE_TOL: f64 = 1e-12;

/// Coherent-state overlap `⟨α|β⟩`.
pub fn overlap(alpha: C64, beta: C64) -> C64 {
    (-0.5 * alpha.norm_sqr() - 0.5 * beta.norm_sqr() + alpha.conj() * beta).exp()
}

fn overlap_multi(a: &[C64], b: &[C64]) -> C64 {
    // Sum the exponents first; the product of many small overlaps would underflow.
    a.iter()
        .zip(b)
        .map(|(x, y)| -0.5 * x.norm_sqr() - 0.5 * y.norm_sqr() + x.conj() * y)
        .sum::<C64>()
        .exp()
}

/// One branch `c |α_1⟩|α_2⟩…`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Term {
    pub coeff: C64,
    pub amps: Vec<C64>,
}

/// `Σ_i c_i |α_i⟩` over `n_modes` modes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoherentSuperposition {
    pub n_modes: usize,
    pub terms: Vec<Term>,
}

impl CoherentSuperposition {
    pub fn new(n_modes: usize, terms: Vec<Term>) -> Result<Self> {
        if n_modes == 0 {
            return Err(invalid("n_modes", "must be at least 1"));
        }
        if let Some(t) = terms.iter().find(|t| t.amps.len() != n_modes) {
            return Err(invalid(
                "terms",
                format!("term has {} amplitudes, expected {n_modes}", t.amps.len()),
            ));
        }
        Ok(Self { n_modes, terms })
    }

    /// Product coherent state.
    pub fn coherent(amps: Vec<C64>) -> Self {
        Self {
            n_modes: amps.len(),
            terms: vec![Term {
                coeff: C64::new(1.0, 0.0),
                amps,
            }],
        }
    }

    /// Single-mode superposition from `(coefficient, amplitude)` pairs.
    pub fn single_mode(terms: &[(C64, C64)]) -> Self {
        Self {
            n_modes: 1,
            terms: terms.iter().map(|&(coeff, a)| Term { coeff, amps: vec![a] }).collect(),
        }
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Self) -> C64 {
        let mut acc = C64::default();
        for a in &self.terms {
            for b in &other.terms {
                acc += a.coeff.conj() * b.coeff * overlap_multi(&a.amps, &b.amps);
            }
        }
        acc
    }

    pub fn norm_sqr(&self) -> f64 {
        self.inner(self).re
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm_sqr();
        if !(n > 1e-300) {
            return Err(Error::ZeroNorm);
        }
        let s = 1.0 / n.sqrt();
        Ok(Self {
            n_modes: self.n_modes,
            terms: self
                .terms
                .iter()
                .map(|t| Term {
                    coeff: t.coeff * s,
                    amps: t.amps.clone(),
                })
                .collect(),
        })
    }

    /// Merges terms whose amplitude vectors agree within [`MERGE_TOL`].
    pub fn merged(&self) -> Self {
        let mut out: Vec<Term> = Vec::new();
        for t in &self.terms {
            match out
                .iter_mut()
                .find(|o| o.amps.iter().zip(&t.amps).all(|(a, b)| (a - b).norm() <= MERGE_TOL))
            {
                Some(o) => o.coeff += t.coeff,
                None => out.push(t.clone()),
            }
        }
        Self {
            n_modes: self.n_modes,
            terms: out,
        }
    }

    /// Gram matrix `⟨α_i|α_j⟩` of the branches (coefficients excluded).
    pub fn gram(&self) -> Vec<Vec<C64>> {
        self.terms
            .iter()
            .map(|a| self.terms.iter().map(|b| overlap_multi(&a.amps, &b.amps)).collect())
            .collect()
    }

    fn max_amp(&self, mode: usize) -> f64 {
        self.terms.iter().map(|t| t.amps[mode].norm()).fold(0.0, f64::max)
    }

    /// Default truncation `ceil(max|α|² + 10 max|α|)` for one mode.
    pub fn default_n_max(&self, mode: usize) -> usize {
        let a = self.max_amp(mode);
        (a * a + 10.0 * a).ceil() as usize
    }

    /// Fock amplitudes `⟨n|ψ⟩`, `n = 0..=n_max`, of a single-mode state (unnormalized).
    pub fn fock_amplitudes(&self, n_max: usize) -> Result<Vec<C64>> {
        if self.n_modes != 1 {
            return Err(invalid("state", "Fock amplitudes need a single-mode state"));
        }
        let lf = log_factorials(n_max);
        let mut out = vec![C64::default(); n_max + 1];
        for t in &self.terms {
            for (n, o) in out.iter_mut().enumerate() {
                *o += t.coeff * coherent_fock(t.amps[0], n, &lf);
            }
        }
        Ok(out)
    }

    /// Photon-number distribution of a single-mode state.
    pub fn photon_distribution(&self, n_max: usize) -> Result<FockDistribution> {
        if self.n_modes != 1 {
            return Err(invalid(
                "state",
                "photon_distribution needs a single-mode state; use reduced_photon_distribution",
            ));
        }
        self.reduced_photon_distribution(0, n_max)
    }

    /// Photon-number distribution of `mode`, tracing out the others.
    pub fn reduced_photon_distribution(&self, mode: usize, n_max: usize) -> Result<FockDistribution> {
        if mode >= self.n_modes {
            return Err(invalid("mode", "out of range"));
        }
        let need = self.default_n_max(mode);
        if n_max < need {
            return Err(invalid(
                "n_max",
                format!("must be at least max|α|² + 10 max|α| = {need}, got {n_max}"),
            ));
        }
        let norm = self.norm_sqr();
        if !(norm > 1e-300) {
            return Err(Error::ZeroNorm);
        }
        let lf = log_factorials(n_max);
        let rest = |t: &Term| -> Vec<C64> {
            t.amps
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != mode)
                .map(|(_, a)| *a)
                .collect()
        };
        let kernels: Vec<Vec<C64>> = self
            .terms
            .iter()
            .map(|t| (0..=n_max).map(|n| coherent_fock(t.amps[mode], n, &lf)).collect())
            .collect();
        let rests: Vec<Vec<C64>> = self.terms.iter().map(rest).collect();
        let mut probs = vec![0.0; n_max + 1];
        for (i, a) in self.terms.iter().enumerate() {
            for (j, b) in self.terms.iter().enumerate() {
                let w = a.coeff.conj() * b.coeff * overlap_multi(&rests[i], &rests[j]);
                for (n, p) in probs.iter_mut().enumerate() {
                    *p += (w * kernels[i][n].conj() * kernels[j][n]).re;
                }
            }
        }
        for p in probs.iter_mut() {
            *p = (*p / norm).max(0.0);
        }
        let total: f64 = probs.iter().sum();
        let tail = (1.0 - total).max(0.0);
        for p in probs.iter_mut() {
            *p /= total;
        }
        Ok(FockDistribution { probs, n_max, tail })
    }

    pub fn write_json<W: std::io::Write>(&self, w: W) -> Result<()> {
        serde_json::to_writer_pretty(w, self)?;
        Ok(())
    }
}

/// `ln n!` for `n = 0..=n_max`.
pub fn log_factorials(n_max: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n_max + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n_max {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

/// `⟨n|α⟩ = e^{-|α|²/2} αⁿ/√n!`, evaluated in log space. `lf` holds `ln k!`.
pub fn coherent_fock(alpha: C64, n: usize, lf: &[f64]) -> C64 {
    let r = alpha.norm();
    if r == 0.0 {
        return if n == 0 { C64::new(1.0, 0.0) } else { C64::default() };
    }
    let ln_mag = -0.5 * r * r + n as f64 * r.ln() - 0.5 * lf[n];
    C64::from_polar(ln_mag.exp(), n as f64 * alpha.arg())
}

/// Truncated photon-number distribution, renormalized on `0..=n_max`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FockDistribution {
    pub probs: Vec<f64>,
    pub n_max: usize,
    /// Probability mass beyond `n_max` before renormalization.
    pub tail: f64,
}

impl FockDistribution {
    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(n, p)| n as f64 * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.probs
            .iter()
            .enumerate()
            .map(|(n, p)| (n as f64 - m).powi(2) * p)
            .sum()
    }

    /// Interior local maxima above `rel` times the global maximum.
    pub fn local_maxima(&self, rel: f64) -> Vec<usize> {
        local_maxima(&self.probs, rel)
    }

    /// Peaks of the 3-point moving average that reach `rel` of its maximum.
    /// Peaks closer than `min_sep` keep only the taller one.
    pub fn resolved_peaks(&self, rel: f64, min_sep: usize) -> Vec<usize> {
        let p = &self.probs;
        let n = p.len();
        let smooth: Vec<f64> = (0..n)
            .map(|i| {
                let w = &p[i.saturating_sub(1)..(i + 2).min(n)];
                w.iter().sum::<f64>() / w.len() as f64
            })
            .collect();
        let mut peaks: Vec<usize> = Vec::new();
        for i in local_maxima(&smooth, rel) {
            match peaks.last() {
                Some(&last) if i - last < min_sep => {
                    if smooth[i] > smooth[last] {
                        *peaks.last_mut().unwrap() = i;
                    }
                }
                _ => peaks.push(i),
            }
        }
        peaks
    }

    /// Index of the most probable `n` and the mass of its basin, the run of
    /// monotonically decreasing probabilities on either side of it.
    pub fn dominant_peak(&self) -> (usize, f64) {
        let p = &self.probs;
        let top = (0..p.len()).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap_or(0);
        let mut lo = top;
        while lo > 0 && p[lo - 1] <= p[lo] {
            lo -= 1;
        }
        let mut hi = top;
        while hi + 1 < p.len() && p[hi + 1] <= p[hi] {
            hi += 1;
        }
        (top, p[lo..=hi].iter().sum())
    }

    /// Weighted mixture `Σ w_i P_i`.
    pub fn mixture(parts: &[(f64, &FockDistribution)]) -> Result<Self> {
        if parts.is_empty() {
            return Err(invalid("parts", "mixture needs at least one component"));
        }
        let n_max = parts.iter().map(|(_, d)| d.n_max).max().unwrap_or(0);
        let mut probs = vec![0.0; n_max + 1];
        let mut tail = 0.0;
        for (w, d) in parts {
            for (n, p) in d.probs.iter().enumerate() {
                probs[n] += w * p;
            }
            tail += w * d.tail;
        }
        Ok(Self { probs, n_max, tail })
    }

    /// CSV `n,P`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["n", "P"])?;
        for (n, p) in self.probs.iter().enumerate() {
            out.write_record([n.to_string(), p.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Indices of strict interior local maxima above `rel · max`.
pub fn local_maxima(v: &[f64], rel: f64) -> Vec<usize> {
    let top = v.iter().cloned().fold(0.0, f64::max);
    (1..v.len().saturating_sub(1))
        .filter(|&i| v[i] > v[i - 1] && v[i] >= v[i + 1] && v[i] >= rel * top)
        .collect()
}

/// `U(φ)` on every mode.
pub fn phase_shifter(state: &CoherentSuperposition, varphi: f64) -> CoherentSuperposition {
    let r = C64::from_polar(1.0, varphi);
    map_amps(state, |a| a.iter().map(|x| x * r).collect())
}

/// `U(φ)` on a single mode.
pub fn phase_shifter_mode(state: &CoherentSuperposition, mode: usize, varphi: f64) -> Result<CoherentSuperposition> {
    if mode >= state.n_modes {
        return Err(invalid("mode", "out of range"));
    }
    let r = C64::from_polar(1.0, varphi);
    Ok(map_amps(state, |a| {
        let mut v = a.to_vec();
        v[mode] *= r;
        v
    }))
}

/// Beam splitter `(β, γ) → (β cosθ + γ sinθ, -γ cosθ + β sinθ)` on a two-mode state.
pub fn beam_splitter(state: &CoherentSuperposition, theta: f64) -> Result<CoherentSuperposition> {
    if state.n_modes != 2 {
        return Err(invalid(
            "state",
            format!("beam splitter needs two modes, got {}", state.n_modes),
        ));
    }
    let (s, c) = theta.sin_cos();
    Ok(map_amps(state, |a| vec![a[0] * c + a[1] * s, -a[1] * c + a[0] * s]))
}

/// Displacement `D(β)` on one mode, with its phase `e^{i Im(β α*)}`.
pub fn displace(state: &CoherentSuperposition, mode: usize, beta: C64) -> Result<CoherentSuperposition> {
    if mode >= state.n_modes {
        return Err(invalid("mode", "out of range"));
    }
    let terms = state
        .terms
        .iter()
        .map(|t| {
            let mut amps = t.amps.clone();
            let a = amps[mode];
            amps[mode] = a + beta;
            Term {
                coeff: t.coeff * C64::from_polar(1.0, (beta * a.conj()).im),
                amps,
            }
        })
        .collect();
    Ok(CoherentSuperposition {
        n_modes: state.n_modes,
        terms,
    })
}

/// HHG-type conditioning of one mode: `|α⟩ → |α + χ⟩ + ξ |α⟩` for every branch.
pub fn cat_split(state: &CoherentSuperposition, mode: usize, chi: C64, xi: C64) -> Result<CoherentSuperposition> {
    if mode >= state.n_modes {
        return Err(invalid("mode", "out of range"));
    }
    let mut terms = Vec::with_capacity(2 * state.terms.len());
    for t in &state.terms {
        let mut shifted = t.amps.clone();
        shifted[mode] += chi;
        terms.push(Term {
            coeff: t.coeff,
            amps: shifted,
        });
        terms.push(Term {
            coeff: t.coeff * xi,
            amps: t.amps.clone(),
        });
    }
    Ok(CoherentSuperposition {
        n_modes: state.n_modes,
        terms,
    }
    .merged())
}

fn map_amps<F: Fn(&[C64]) -> Vec<C64>>(state: &CoherentSuperposition, f: F) -> CoherentSuperposition {
    CoherentSuperposition {
        n_modes: state.n_modes,
        terms: state
            .terms
            .iter()
            .map(|t| Term {
                coeff: t.coeff,
                amps: f(&t.amps),
            })
            .collect(),
    }
    .merged()
}

/// Output of the two-cat interferometer, written out branch by branch.
///
/// `|α0⟩|0⟩` is split 50:50, each arm is conditioned into
/// `|a + χ_i⟩ + ξ_i |a⟩` with `a = α0/√2`, arm 2 picks up `e^{iφ}`, and the
/// arms are recombined on a second 50:50 splitter.
pub fn interferometer_psi_f(
    alpha0: C64,
    chi1: C64,
    chi2: C64,
    xi1: C64,
    xi2: C64,
    varphi: f64,
) -> CoherentSuperposition {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let a = alpha0 * s;
    let e = C64::from_polar(1.0, varphi);
    let port = |x1: C64, x2: C64| vec![(a * (1.0 + e) + x1 + x2 * e) * s, (a * (1.0 - e) + x1 - x2 * e) * s];
    let z = C64::default();
    let terms = vec![
        Term {
            coeff: C64::new(1.0, 0.0),
            amps: port(chi1, chi2),
        },
        Term {
            coeff: xi2,
            amps: port(chi1, z),
        },
        Term {
            coeff: xi1,
            amps: port(z, chi2),
        },
        Term {
            coeff: xi1 * xi2,
            amps: port(z, z),
        },
    ];
    CoherentSuperposition { n_modes: 2, terms }.merged()
}

/// The same state assembled from splitters, conditioning and a phase shifter.
pub fn interferometer_composed(
    alpha0: C64,
    chi1: C64,
    chi2: C64,
    xi1: C64,
    xi2: C64,
    varphi: f64,
) -> Result<CoherentSuperposition> {
    let input = CoherentSuperposition::coherent(vec![alpha0, C64::default()]);
    let split = beam_splitter(&input, FRAC_PI_4)?;
    let arm1 = cat_split(&split, 0, chi1, xi1)?;
    let arms = cat_split(&arm1, 1, chi2, xi2)?;
    let shifted = phase_shifter_mode(&arms, 1, varphi)?;
    beam_splitter(&shifted, FRAC_PI_4)
}

/// Purity `Tr ρ²` of the reduced state of `mode`.
pub fn reduced_purity(state: &CoherentSuperposition, mode: usize) -> Result<f64> {
    if mode >= state.n_modes {
        return Err(invalid("mode", "out of range"));
    }
    let norm = state.norm_sqr();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::NotNormalized(norm));
    }
    let n = state.terms.len();
    let split = |t: &Term| -> (C64, Vec<C64>) {
        let rest = t
            .amps
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != mode)
            .map(|(_, a)| *a)
            .collect();
        (t.amps[mode], rest)
    };
    let parts: Vec<(C64, Vec<C64>)> = state.terms.iter().map(split).collect();
    let c: Vec<C64> = state.terms.iter().map(|t| t.coeff).collect();
    let ga: Vec<Vec<C64>> = (0..n)
        .map(|i| (0..n).map(|j| overlap(parts[i].0, parts[j].0)).collect())
        .collect();
    let gb: Vec<Vec<C64>> = (0..n)
        .map(|i| (0..n).map(|j| overlap_multi(&parts[i].1, &parts[j].1)).collect())
        .collect();
    // ρ = Σ_ij c_i c_j* ⟨b_j|b_i⟩ |a_i⟩⟨a_j|
    let mut acc = C64::default();
    for i in 0..n {
        for j in 0..n {
            let rij = c[i] * c[j].conj() * gb[j][i];
            for k in 0..n {
                for l in 0..n {
                    let rkl = c[k] * c[l].conj() * gb[l][k];
                    acc += rij * rkl * ga[j][k] * ga[l][i];
                }
            }
        }
    }
    Ok(acc.re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn resolved_peaks_merge_close_maxima() {
        let d = FockDistribution {
            probs: vec![0.0, 0.3, 0.0, 0.31, 0.0, 0.0, 0.0, 0.0, 0.0, 0.1, 0.3, 0.1, 0.0, 0.0],
            n_max: 13,
            tail: 0.0,
        };
        assert_eq!(d.resolved_peaks(0.1, 3), vec![2, 10]);
        let poisson = CoherentSuperposition::coherent(vec![C64::new(4.0, 0.0)])
            .photon_distribution(80)
            .unwrap();
        assert_eq!(poisson.resolved_peaks(1e-2, 3).len(), 1);
    }

    #[test]
    fn dominant_peak_basin() {
        let d = FockDistribution {
            probs: vec![0.1, 0.3, 0.1, 0.05, 0.25, 0.2],
            n_max: 5,
            tail: 0.0,
        };
        let (n, m) = d.dominant_peak();
        assert_eq!(n, 1);
        assert!((m - 0.55).abs() < 1e-15);
        let poisson = CoherentSuperposition::coherent(vec![C64::new(3.0, 0.0)])
            .photon_distribution(80)
            .unwrap();
        assert!((poisson.dominant_peak().1 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn coherent_statistics_are_poissonian() {
        for (a, mean) in [(7.95, 63.2025), (8.73, 76.2129)] {
            let st = CoherentSuperposition::coherent(vec![c(a, 0.0)]);
            let d = st.photon_distribution(200).unwrap();
            assert!((d.mean() - mean).abs() < 1e-6, "{}", d.mean());
            assert!((d.variance() - mean).abs() < 1e-6, "{}", d.variance());
        }
    }

    #[test]
    fn vacuum_distribution() {
        let d = CoherentSuperposition::coherent(vec![c(0.0, 0.0)])
            .photon_distribution(5)
            .unwrap();
        assert_eq!(d.probs[0], 1.0);
    }

    #[test]
    fn three_term_superpositions() {
        let amps = [7.0, 9.0, 10.0];
        let mk = |cs: [f64; 3]| {
            CoherentSuperposition::single_mode(&[
                (c(cs[0], 0.0), c(amps[0], 0.0)),
                (c(cs[1], 0.0), c(amps[1], 0.0)),
                (c(cs[2], 0.0), c(amps[2], 0.0)),
            ])
        };
        let alt = mk([1.0, -1.0, 0.75]).photon_distribution(300).unwrap();
        // Direct summation oracle.
        let lf = log_factorials(300);
        let raw: Vec<f64> = (0..=300)
            .map(|n| {
                let s: f64 = [1.0, -1.0, 0.75]
                    .iter()
                    .zip(amps)
                    .map(|(w, a)| w * (-0.5 * a * a + n as f64 * a.ln() - 0.5 * lf[n]).exp())
                    .sum();
                s * s
            })
            .collect();
        let tot: f64 = raw.iter().sum();
        for (p, r) in alt.probs.iter().zip(&raw) {
            assert!((p - r / tot).abs() < 1e-12);
        }
        assert!(alt.local_maxima(1e-3).len() >= 3);
        let same = mk([1.0, 1.0, 0.75]).photon_distribution(300).unwrap();
        assert!(same.local_maxima(1e-3).len() < alt.local_maxima(1e-3).len());
    }

    #[test]
    fn rejects_small_truncation_and_multimode() {
        let st = CoherentSuperposition::coherent(vec![c(5.0, 0.0)]);
        assert!(st.photon_distribution(50).is_err());
        let two = CoherentSuperposition::coherent(vec![c(1.0, 0.0), c(1.0, 0.0)]);
        assert!(two.photon_distribution(40).is_err());
        assert!(two.reduced_photon_distribution(1, 40).is_ok());
    }

    #[test]
    fn overlap_closed_form_vs_fock_sum() {
        let (a, b) = (c(2.0, 0.0), c(2.8, 0.0));
        let lf = log_factorials(100);
        let sum: C64 = (0..=100)
            .map(|n| coherent_fock(a, n, &lf).conj() * coherent_fock(b, n, &lf))
            .sum();
        assert!((overlap(a, b) - sum).norm() < 1e-10);
        assert!((overlap(a, b).re - (-0.32f64).exp()).abs() < 1e-14);
        assert!((overlap(c(0.0, 0.0), c(0.3, 0.4)).re - (-0.125f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn beam_splitter_conventions() {
        let st = CoherentSuperposition::coherent(vec![c(1.0, 2.0), c(-0.5, 0.3)]);
        let out = beam_splitter(&st, 0.0).unwrap();
        assert_eq!(out.terms[0].amps, vec![c(1.0, 2.0), c(0.5, -0.3)]);
        assert!(beam_splitter(&CoherentSuperposition::coherent(vec![c(1.0, 0.0)]), 0.3).is_err());
    }

    #[test]
    fn cat_pair_on_beam_splitter_has_four_branches() {
        let (g1, b1, g2, b2) = (c(1.0, 0.5), c(-0.7, 0.0), c(0.2, 1.5), c(0.0, -1.0));
        let (x1, x2) = (c(0.3, 0.1), c(-0.2, 0.4));
        let st = CoherentSuperposition::new(
            2,
            vec![
                Term {
                    coeff: c(1.0, 0.0),
                    amps: vec![g1, g2],
                },
                Term {
                    coeff: x2,
                    amps: vec![g1, b2],
                },
                Term {
                    coeff: x1,
                    amps: vec![b1, g2],
                },
                Term {
                    coeff: x1 * x2,
                    amps: vec![b1, b2],
                },
            ],
        )
        .unwrap();
        let th: f64 = 0.4;
        let (s, co) = th.sin_cos();
        let out = beam_splitter(&st, th).unwrap();
        assert_eq!(out.terms.len(), 4);
        let t = &out.terms[3];
        assert!((t.amps[0] - (b1 * co + b2 * s)).norm() < 1e-15);
        assert!((t.amps[1] - (-b2 * co + b1 * s)).norm() < 1e-15);
        assert_eq!(t.coeff, x1 * x2);
    }

    #[test]
    fn phase_shifter_examples() {
        let st = CoherentSuperposition::single_mode(&[(c(1.0, 0.0), c(1.0, 1.0)), (c(0.5, 0.0), c(-2.0, 0.0))]);
        assert_eq!(phase_shifter(&st, 0.0), st);
        let pi = phase_shifter(&st, std::f64::consts::PI);
        for (a, b) in pi.terms.iter().zip(&st.terms) {
            assert!((a.amps[0] + b.amps[0]).norm() < 1e-15);
            assert_eq!(a.coeff, b.coeff);
        }
    }

    #[test]
    fn interferometer_examples() {
        let a0 = c(0.0, 3.0);
        let z = c(0.0, 0.0);
        let flat = interferometer_psi_f(a0, z, z, c(-0.4, 0.1), c(0.2, 0.0), 0.7);
        assert_eq!(flat.terms.len(), 1);
        let st = interferometer_psi_f(a0, c(0.5, 0.2), c(-0.3, 0.6), c(-0.4, 0.1), c(0.2, 0.3), 0.0);
        let last = st.terms.last().unwrap();
        assert!((last.amps[1]).norm() < 1e-15);
    }

    #[test]
    fn interferometer_composition_matches_closed_form() {
        let args = (c(0.3, 2.0), c(0.5, 0.2), c(-0.3, 0.6), c(-0.4, 0.1), c(0.2, 0.3), 1.3);
        let a = interferometer_psi_f(args.0, args.1, args.2, args.3, args.4, args.5);
        let b = interferometer_composed(args.0, args.1, args.2, args.3, args.4, args.5).unwrap();
        assert_eq!(a.terms.len(), b.terms.len());
        for (x, y) in a.terms.iter().zip(&b.terms) {
            assert!((x.coeff - y.coeff).norm() < 1e-12);
            for (u, v) in x.amps.iter().zip(&y.amps) {
                assert!((u - v).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn purity_limits() {
        let prod = CoherentSuperposition::coherent(vec![c(1.0, 0.0), c(0.0, -2.0)]);
        assert!((reduced_purity(&prod, 0).unwrap() - 1.0).abs() < 1e-12);
        let cat = CoherentSuperposition::new(
            2,
            vec![
                Term {
                    coeff: c(1.0, 0.0),
                    amps: vec![c(3.0, 0.0), c(3.0, 0.0)],
                },
                Term {
                    coeff: c(1.0, 0.0),
                    amps: vec![c(-3.0, 0.0), c(-3.0, 0.0)],
                },
            ],
        )
        .unwrap()
        .normalized()
        .unwrap();
        let p = reduced_purity(&cat, 0).unwrap();
        // Branches overlap by e^{-36}, so the reduced state is an equal mixture.
        assert!((p - 0.5).abs() < 1e-12, "{p}");
        let un = CoherentSuperposition::single_mode(&[(c(2.0, 0.0), c(0.0, 0.0))]);
        assert!(reduced_purity(&un, 0).is_err());
    }

    #[test]
    fn json_round_trip_uses_pairs() {
        let st = CoherentSuperposition::single_mode(&[(c(1.0, -1.0), c(0.5, 2.0))]);
        let mut buf = Vec::new();
        st.write_json(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let back: CoherentSuperposition = serde_json::from_str(&text).unwrap();
        assert_eq!(back, st);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["terms"][0]["coeff"], serde_json::json!([1.0, -1.0]));
    }

    #[test]
    fn displace_composes_with_phase() {
        let st = CoherentSuperposition::coherent(vec![c(0.4, -0.2)]);
        let d = displace(&st, 0, c(0.1, 0.3)).unwrap();
        // ⟨α+β|D(β)|α⟩ has unit modulus and the expected phase.
        let target = CoherentSuperposition::coherent(vec![c(0.5, 0.1)]);
        let ov = target.inner(&d);
        assert!((ov.norm() - 1.0).abs() < 1e-14);
        assert!((ov.arg() - (c(0.1, 0.3) * c(0.4, 0.2)).im).abs() < 1e-14);
    }

    fn amp() -> impl Strategy<Value = C64> {
        (-3.0f64..3.0, -3.0f64..3.0).prop_map(|(a, b)| C64::new(a, b))
    }

    proptest! {
        #[test]
        fn beam_splitter_conserves_energy_and_norm(
            a in amp(), b in amp(), x in amp(), y in amp(), w in amp(), th in -3.2f64..3.2
        ) {
            let st = CoherentSuperposition::new(2, vec![
                Term { coeff: w, amps: vec![a, b] },
                Term { coeff: C64::new(1.0, 0.0), amps: vec![x, y] },
            ]).unwrap();
            let out = beam_splitter(&st, th).unwrap();
            for (i, o) in st.terms.iter().zip(&out.terms) {
                let ei: f64 = i.amps.iter().map(|z| z.norm_sqr()).sum();
                let eo: f64 = o.amps.iter().map(|z| z.norm_sqr()).sum();
                prop_assert!((ei - eo).abs() <= 1e-12 * ei.max(1.0));
            }
            prop_assert!((st.norm_sqr() - out.norm_sqr()).abs() <= 1e-12 * st.norm_sqr().max(1.0));
            let ph = phase_shifter(&st, th);
            prop_assert!((st.norm_sqr() - ph.norm_sqr()).abs() <= 1e-12 * st.norm_sqr().max(1.0));
        }

        #[test]
        fn poisson_identity(a in amp()) {
            let st = CoherentSuperposition::coherent(vec![a]);
            let d = st.photon_distribution(st.default_n_max(0) + 5).unwrap();
            let n = a.norm_sqr();
            prop_assert!((d.mean() - n).abs() < 1e-8);
            prop_assert!((d.variance() - n).abs() < 1e-8);
            prop_assert!(d.tail < 1e-8);
        }

        #[test]
        fn gram_is_positive_semidefinite(amps in proptest::collection::vec(amp(), 1..6)) {
            let terms: Vec<(C64, C64)> = amps.iter().map(|&a| (C64::new(1.0, 0.0), a)).collect();
            let g = CoherentSuperposition::single_mode(&terms).gram();
            // Cholesky with a small diagonal jitter for nearly dependent sets.
            let n = g.len();
            let mut l = vec![vec![C64::default(); n]; n];
            for i in 0..n {
                for j in 0..=i {
                    let mut s = g[i][j];
                    for k in 0..j { s -= l[i][k] * l[j][k].conj(); }
                    if i == j {
                        prop_assert!(s.re > -1e-10);
                        l[i][i] = C64::new((s.re.max(0.0) + 1e-12).sqrt(), 0.0);
                    } else {
                        l[i][j] = s / l[j][j];
                    }
                }
            }
        }

        #[test]
        fn normalize_gives_unit_norm(a in amp(), b in amp(), w in amp()) {
            let st = CoherentSuperposition::single_mode(&[(C64::new(1.0, 0.0), a), (w, b)]);
            if st.norm_sqr() > 1e-6 {
                prop_assert!((st.normalized().unwrap().norm_sqr() - 1.0).abs() < 1e-12);
            }
        }
    }
}
