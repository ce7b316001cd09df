//! Field states after conditioning on HHG.
//!
//! Projecting out the initial field state `|α⟩|0…0⟩` leaves a superposition
//! of the displaced state and the initial one, weighted by their overlap.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fock::{overlap, CoherentSuperposition, Term};

/// Which conditioning produced a state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Provenance {
    HhgIrCat,
    HhgXuvCat,
    HhgFull,
    TwoColor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionedState {
    pub provenance: Provenance,
    pub state: CoherentSuperposition,
}

/// `ξ_IR = ⟨α|α+χ⟩ = exp(-|χ|²/2 + i Im(α* χ))`.
pub fn xi_ir(alpha: C64, chi: C64) -> C64 {
    overlap(alpha, alpha + chi)
}

/// `ξ_HH = Π_q ⟨0|χ_q⟩ = exp(-Σ|χ_q|²/2)`.
pub fn xi_hh(chis: &[C64]) -> f64 {
    (-0.5 * chis.iter().map(|c| c.norm_sqr()).sum::<f64>()).exp()
}

fn all_zero(chis: &[C64]) -> bool {
    chis.iter().all(|c| c.norm() == 0.0)
}

/// Full multimode state after conditioning on HHG, unnormalized.
///
/// `chis[0]` is the fundamental shift, the rest belong to the harmonics
/// (initially in vacuum). Branch A is `e^{iφ}|α+χ_1⟩|χ_2⟩…`, branch B is
/// `-e^{iφ} ξ_IR ξ_HH |α⟩|0⟩…`, so `‖·‖² = 1 - |ξ_IR ξ_HH|²`.
pub fn post_hhg_state(alpha_l: C64, chis: &[C64], global_phase: f64) -> Result<ConditionedState> {
    if chis.is_empty() {
        return Err(invalid("chis", "need the fundamental shift at least"));
    }
    if all_zero(chis) {
        return Err(invalid(
            "chis",
            "all shifts vanish: the conditioned state has zero norm",
        ));
    }
    let ph = C64::from_polar(1.0, global_phase);
    let xi = xi_ir(alpha_l, chis[0]) * xi_hh(&chis[1..]);
    let mut shifted = vec![alpha_l + chis[0]];
    shifted.extend_from_slice(&chis[1..]);
    let mut initial = vec![alpha_l];
    initial.extend(std::iter::repeat_n(C64::default(), chis.len() - 1));
    let state = CoherentSuperposition::new(
        chis.len(),
        vec![
            Term {
                coeff: ph,
                amps: shifted,
            },
            Term {
                coeff: -ph * xi,
                amps: initial,
            },
        ],
    )?;
    Ok(ConditionedState {
        provenance: Provenance::HhgFull,
        state,
    })
}

/// Contracts every mode except `keep` with the coherent states `onto`
/// (indexed over all modes; the entry at `keep` is ignored).
pub fn project_modes(state: &CoherentSuperposition, keep: usize, onto: &[C64]) -> Result<CoherentSuperposition> {
    if keep >= state.n_modes || onto.len() != state.n_modes {
        return Err(invalid("onto", "need one amplitude per mode and a valid kept mode"));
    }
    let terms = state
        .terms
        .iter()
        .map(|t| {
            let w: C64 = (0..state.n_modes)
                .filter(|&k| k != keep)
                .map(|k| overlap(onto[k], t.amps[k]))
                .product();
            Term {
                coeff: t.coeff * w,
                amps: vec![t.amps[keep]],
            }
        })
        .collect();
    Ok(CoherentSuperposition { n_modes: 1, terms }.merged())
}

/// `(1 - |r⟩⟨r|) |ψ⟩` for a normalized reference `r`.
pub fn project_out(state: &CoherentSuperposition, reference: &CoherentSuperposition) -> Result<CoherentSuperposition> {
    if state.n_modes != reference.n_modes {
        return Err(invalid("reference", "mode count mismatch"));
    }
    let w = reference.inner(state);
    let mut terms = state.terms.clone();
    terms.extend(reference.terms.iter().map(|t| Term {
        coeff: -w * t.coeff,
        amps: t.amps.clone(),
    }));
    Ok(CoherentSuperposition {
        n_modes: state.n_modes,
        terms,
    }
    .merged())
}

/// `|α+χ⟩ - ξ_IR|α⟩` before normalization; its squared norm is `1 - e^{-|χ|²}`.
pub fn ir_cat_unnormalized(alpha: C64, chi: C64) -> Result<CoherentSuperposition> {
    if chi.norm() == 0.0 {
        return Err(invalid("chi", "must be non-zero"));
    }
    Ok(CoherentSuperposition::single_mode(&[
        (C64::new(1.0, 0.0), alpha + chi),
        (-xi_ir(alpha, chi), alpha),
    ]))
}

/// Normalized IR cat state.
pub fn ir_cat(alpha: C64, chi: C64) -> Result<CoherentSuperposition> {
    ir_cat_unnormalized(alpha, chi)?.normalized()
}

/// Normalized XUV cat `|χ_q⟩ - ξ_q ξ_rest |0⟩` with `ξ_q = ⟨0|χ_q⟩` and
/// `ξ_rest ∈ [0, 1]` the product of the remaining squared overlaps.
pub fn xuv_cat(chi_q: C64, xi_rest: f64) -> Result<CoherentSuperposition> {
    if chi_q.norm() == 0.0 {
        return Err(invalid("chi_q", "must be non-zero"));
    }
    if !(0.0..=1.0).contains(&xi_rest) {
        return Err(invalid("xi_rest", format!("must lie in [0, 1], got {xi_rest}")));
    }
    let xi_q = overlap(C64::default(), chi_q);
    CoherentSuperposition::single_mode(&[(C64::new(1.0, 0.0), chi_q), (-xi_q * xi_rest, C64::default())]).normalized()
}

/// Normalized two-mode state `|α1+χ1⟩|α2+χ2⟩ - ξ|α1⟩|α2⟩`.
pub fn two_color_entangled(alpha1: C64, alpha2: C64, chi1: C64, chi2: C64) -> Result<CoherentSuperposition> {
    if chi1.norm() == 0.0 && chi2.norm() == 0.0 {
        return Err(invalid("chi", "at least one shift must be non-zero"));
    }
    let xi = xi_ir(alpha1, chi1) * xi_ir(alpha2, chi2);
    CoherentSuperposition::new(
        2,
        vec![
            Term {
                coeff: C64::new(1.0, 0.0),
                amps: vec![alpha1 + chi1, alpha2 + chi2],
            },
            Term {
                coeff: -xi,
                amps: vec![alpha1, alpha2],
            },
        ],
    )?
    .normalized()
    .map_err(|_| Error::ZeroNorm)
}
