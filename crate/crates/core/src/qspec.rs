//! Synthetic quantum-spectrometer pipeline.
//!
//! Shots carry five detector signals normalized to unit mean. Background shots
//! jitter independently around 1. A small correlated subset loses IR energy in
//! quanta of `q·AN_q` and shows the same energy as a gain in the XUV channel, so
//! those shots sit on the anti-diagonal of the `(s_xuv, s_ir)` plane. Selecting a
//! thin band around that diagonal and histogramming the IR loss recovers the
//! harmonic ladder.
//!
//! Background shots are drawn in antithetic pairs `(1 + η, 1 - η)` that share
//! their `s_ir0` value. The sample mean of every channel is then fixed by the
//! correlated shots alone, before and after stability filtering, so balancing
//! does not push the diagonal sideways by the sampling noise of the mean.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Bernoulli, Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::fock::local_maxima;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShotRecord {
    pub s_ir0: f64,
    pub s_ir: f64,
    pub s_xuv: f64,
    pub s_ati_pos: f64,
    pub s_ati_neg: f64,
    /// Generator ground truth: the shot belongs to the correlated subset.
    pub correlated: bool,
}

/// One rung family of the ladder: order `q` with signal quantum `an`
/// and Poisson mean `mean_photons`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderOrder {
    pub q: u32,
    pub an: f64,
    pub mean_photons: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QspecModel {
    /// Standard deviation of the background jitter, as a fraction of the mean.
    pub w_j: f64,
    pub f_corr: f64,
    pub orders: Vec<LadderOrder>,
    /// Spread of correlated shots along the anti-diagonal.
    pub ladder_jitter: f64,
    pub n_shots: usize,
    pub seed: u64,
}

impl Default for QspecModel {
    fn default() -> Self {
        Self {
            w_j: 0.05,
            f_corr: 1e-3,
            orders: (11..=19)
                .step_by(2)
                .map(|q| LadderOrder {
                    q,
                    an: 0.01,
                    mean_photons: 0.05,
                })
                .collect(),
            ladder_jitter: 0.002,
            n_shots: 1_000_000,
            seed: 1,
        }
    }
}

impl QspecModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.w_j > 0.0) {
            return Err(invalid("w_j", "must be positive"));
        }
        if !(0.0..=1.0).contains(&self.f_corr) {
            return Err(invalid("f_corr", "must lie in [0, 1]"));
        }
        if self.n_shots < 1000 {
            return Err(invalid("n_shots", "need at least 1000 shots"));
        }
        if !(self.ladder_jitter >= 0.0) {
            return Err(invalid("ladder_jitter", "must be non-negative"));
        }
        if self.f_corr > 0.0 {
            if self.orders.is_empty() {
                return Err(invalid("orders", "correlated shots need at least one order"));
            }
            if self.orders.iter().any(|o| !(o.an > 0.0) || !(o.mean_photons > 0.0)) {
                return Err(invalid("orders", "quanta and photon means must be positive"));
            }
        }
        Ok(())
    }

    /// Single-photon IR losses `q·AN_q`, ascending.
    pub fn rungs(&self) -> Vec<f64> {
        let mut r: Vec<f64> = self.orders.iter().map(|o| o.q as f64 * o.an).collect();
        r.sort_by(f64::total_cmp);
        r
    }

    /// Mean spacing between adjacent single-photon rungs.
    pub fn programmed_spacing(&self) -> Option<f64> {
        let r = self.rungs();
        (r.len() >= 2).then(|| (r[r.len() - 1] - r[0]) / (r.len() - 1) as f64)
    }
}

const CHUNK_PAIRS: usize = 4096;

/// Draws the shot record. Output order and values depend only on the model.
pub fn generate_shots(model: &QspecModel) -> Result<Vec<ShotRecord>> {
    model.validate()?;
    let n_pairs = model.n_shots.div_ceil(2);
    let n_chunks = n_pairs.div_ceil(CHUNK_PAIRS);
    let jitter = Normal::new(0.0, model.w_j).map_err(|e| invalid("w_j", e.to_string()))?;
    let along = Normal::new(0.0, model.ladder_jitter).map_err(|e| invalid("ladder_jitter", e.to_string()))?;
    let pick = Bernoulli::new(model.f_corr).map_err(|e| invalid("f_corr", e.to_string()))?;
    let photons: Vec<Option<Poisson<f64>>> = model.orders.iter().map(|o| Poisson::new(o.mean_photons).ok()).collect();

    let chunks: Vec<Vec<ShotRecord>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha20Rng::seed_from_u64(model.seed);
            rng.set_stream(c as u64);
            let pairs = CHUNK_PAIRS.min(n_pairs - c * CHUNK_PAIRS);
            let mut out = Vec::with_capacity(2 * pairs);
            for _ in 0..pairs {
                let ir0 = (1.0 + jitter.sample(&mut rng)).max(0.0);
                if pick.sample(&mut rng) {
                    for _ in 0..2 {
                        let loss = ladder_loss(model, &photons, &mut rng);
                        let e = along.sample(&mut rng);
                        let (ap, an) = (jitter.sample(&mut rng), jitter.sample(&mut rng));
                        out.push(ShotRecord {
                            s_ir0: ir0,
                            s_ir: 1.0 - loss + e,
                            s_xuv: 1.0 + loss - e,
                            s_ati_pos: (1.0 + ap).max(0.0),
                            s_ati_neg: (1.0 + an).max(0.0),
                            correlated: true,
                        });
                    }
                } else {
                    let eta: [f64; 4] = std::array::from_fn(|_| jitter.sample(&mut rng));
                    for sign in [1.0, -1.0] {
                        out.push(ShotRecord {
                            s_ir0: ir0,
                            s_ir: 1.0 + sign * eta[0],
                            s_xuv: 1.0 + sign * eta[1],
                            s_ati_pos: 1.0 + sign * eta[2],
                            s_ati_neg: 1.0 + sign * eta[3],
                            correlated: false,
                        });
                    }
                }
            }
            out
        })
        .collect();
    let mut shots: Vec<ShotRecord> = chunks.into_iter().flatten().collect();
    shots.truncate(model.n_shots);
    Ok(shots)
}

/// Total IR loss `Σ_q q·AN_q·N_q` with Poisson `N_q`, conditioned on at least one photon.
fn ladder_loss(model: &QspecModel, photons: &[Option<Poisson<f64>>], rng: &mut ChaCha20Rng) -> f64 {
    loop {
        let mut total = 0u64;
        let mut loss = 0.0;
        for (o, d) in model.orders.iter().zip(photons) {
            let n = d.as_ref().map_or(0.0, |d| d.sample(rng));
            total += n as u64;
            loss += o.q as f64 * o.an * n;
        }
        if total > 0 {
            return loss;
        }
    }
}

/// Keeps shots with `|s_ir0 - 1| ≤ tol`.
pub fn stability_filter(shots: &[ShotRecord], tol: f64) -> Vec<ShotRecord> {
    shots.iter().filter(|s| (s.s_ir0 - 1.0).abs() <= tol).copied().collect()
}

/// Signal channel of a shot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Ir0,
    Ir,
    Xuv,
    AtiPos,
    AtiNeg,
}

impl Channel {
    pub fn get(self, s: &ShotRecord) -> f64 {
        match self {
            Channel::Ir0 => s.s_ir0,
            Channel::Ir => s.s_ir,
            Channel::Xuv => s.s_xuv,
            Channel::AtiPos => s.s_ati_pos,
            Channel::AtiNeg => s.s_ati_neg,
        }
    }

    fn get_mut(self, s: &mut ShotRecord) -> &mut f64 {
        match self {
            Channel::Ir0 => &mut s.s_ir0,
            Channel::Ir => &mut s.s_ir,
            Channel::Xuv => &mut s.s_xuv,
            Channel::AtiPos => &mut s.s_ati_pos,
            Channel::AtiNeg => &mut s.s_ati_neg,
        }
    }
}

/// Mean that does not depend on the order of the shots.
fn stable_mean(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    v.iter().sum::<f64>() / v.len() as f64
}

/// Shifts each listed channel so that its mean is exactly 1.
pub fn balance(shots: &[ShotRecord], channels: &[Channel]) -> Vec<ShotRecord> {
    let mut out = shots.to_vec();
    if shots.is_empty() {
        return out;
    }
    for &ch in channels {
        let shift = stable_mean(shots.iter().map(|s| ch.get(s)).collect()) - 1.0;
        out.iter_mut().for_each(|s| *ch.get_mut(s) -= shift);
    }
    out
}

/// Shots inside the anti-diagonal band, after balancing.
#[derive(Clone, Debug, PartialEq)]
pub struct Selection {
    pub shots: Vec<ShotRecord>,
    /// Full band width `w_ant = W_j/√k`.
    pub w_ant: f64,
    /// Fraction of the input that was selected.
    pub selected_fraction: f64,
}

impl Selection {
    /// Fraction of selected shots that the generator labelled correlated.
    pub fn precision(&self) -> f64 {
        if self.shots.is_empty() {
            return 0.0;
        }
        self.shots.iter().filter(|s| s.correlated).count() as f64 / self.shots.len() as f64
    }
}

/// `w_ant = W_j / √k`.
pub fn band_width(w_j: f64, k_points: u64) -> f64 {
    w_j / (k_points as f64).sqrt()
}

/// Band `|(s_y - 1) + (s_x - 1)| ≤ w_ant/2` on a balanced pair of channels.
pub fn anticorrelation_select_channels(
    shots: &[ShotRecord],
    w_j: f64,
    k_points: u64,
    x: Channel,
    y: Channel,
) -> Result<Selection> {
    if k_points == 0 {
        return Err(invalid("k_points", "must be at least 1"));
    }
    let w_ant = band_width(w_j, k_points);
    let balanced = balance(shots, &[x, y]);
    let sel: Vec<ShotRecord> = balanced
        .into_iter()
        .filter(|s| ((x.get(s) - 1.0) + (y.get(s) - 1.0)).abs() <= 0.5 * w_ant)
        .collect();
    if sel.is_empty() {
        return Err(Error::EmptySelection(format!(
            "no shot within the band w_ant = {w_ant:.3e}; increase n_shots or f_corr, or lower k_points"
        )));
    }
    let selected_fraction = sel.len() as f64 / shots.len() as f64;
    Ok(Selection {
        shots: sel,
        w_ant,
        selected_fraction,
    })
}

/// Selection on the `(s_xuv, s_ir)` plane.
pub fn anticorrelation_select(shots: &[ShotRecord], w_j: f64, k_points: u64) -> Result<Selection> {
    anticorrelation_select_channels(shots, w_j, k_points, Channel::Xuv, Channel::Ir)
}

/// Histogram of the IR loss `1 - s_ir` with detected peaks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PirHistogram {
    pub bin_width: f64,
    /// Left edge of bin 0; bins are aligned to multiples of the width.
    pub origin: f64,
    pub counts: Vec<u64>,
    /// Centroid positions of the resolved peaks, ascending.
    pub peaks: Vec<f64>,
}

impl PirHistogram {
    pub fn centers(&self) -> Vec<f64> {
        (0..self.counts.len())
            .map(|i| self.origin + (i as f64 + 0.5) * self.bin_width)
            .collect()
    }

    pub fn spacings(&self) -> Vec<f64> {
        self.peaks.windows(2).map(|w| w[1] - w[0]).collect()
    }

    /// Median of the adjacent peak spacings, so a missing rung does not bias it.
    pub fn peak_spacing(&self) -> Option<f64> {
        let mut s = self.spacings();
        if s.is_empty() {
            return None;
        }
        s.sort_by(f64::total_cmp);
        let m = s.len() / 2;
        Some(if s.len() % 2 == 1 {
            s[m]
        } else {
            0.5 * (s[m - 1] + s[m])
        })
    }

    /// CSV `loss,P_IR,count` with `P_IR` normalized to unit area.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let total: u64 = self.counts.iter().sum();
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["loss", "P_IR", "count"])?;
        for (c, n) in self.centers().iter().zip(&self.counts) {
            let p = *n as f64 / (total.max(1) as f64 * self.bin_width);
            out.write_record([c.to_string(), p.to_string(), n.to_string()])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// A peak needs this many counts in its three-bin window, and at least
/// `PEAK_REL` of the tallest window.
const PEAK_MIN_COUNT: f64 = 3.0;
const PEAK_REL: f64 = 0.5;

pub fn p_ir_histogram(selected: &[ShotRecord], bin_width: f64) -> Result<PirHistogram> {
    if selected.is_empty() {
        return Err(Error::EmptySelection("histogram needs at least one shot".into()));
    }
    if !(bin_width > 0.0) {
        return Err(invalid("bin_width", "must be positive"));
    }
    let losses: Vec<f64> = selected.iter().map(|s| 1.0 - s.s_ir).collect();
    let lo = (losses.iter().cloned().fold(f64::INFINITY, f64::min) / bin_width).floor() - 1.0;
    let hi = (losses.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / bin_width).floor() + 1.0;
    let n = (hi - lo) as usize + 1;
    let origin = lo * bin_width;
    let mut counts = vec![0u64; n];
    for l in &losses {
        let i = ((l / bin_width).floor() - lo) as usize;
        counts[i.min(n - 1)] += 1;
    }
    let as_f: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
    let window: Vec<f64> = (0..n)
        .map(|i| as_f[i.saturating_sub(1)..(i + 2).min(n)].iter().sum())
        .collect();
    let peaks = local_maxima(&window, PEAK_REL)
        .into_iter()
        .filter(|&i| window[i] >= PEAK_MIN_COUNT)
        .map(|i| {
            let idx = i.saturating_sub(1)..(i + 2).min(n);
            let mass: f64 = idx.clone().map(|j| as_f[j]).sum();
            let first: f64 = idx.map(|j| as_f[j] * (origin + (j as f64 + 0.5) * bin_width)).sum();
            first / mass
        })
        .collect();
    Ok(PirHistogram {
        bin_width,
        origin,
        counts,
        peaks,
    })
}

/// CSV `s_ir0,s_ir,s_xuv,s_ati_pos,s_ati_neg,label`.
pub fn write_shots_csv<W: std::io::Write>(shots: &[ShotRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["s_ir0", "s_ir", "s_xuv", "s_ati_pos", "s_ati_neg", "label"])?;
    for s in shots {
        out.write_record([
            s.s_ir0.to_string(),
            s.s_ir.to_string(),
            s.s_xuv.to_string(),
            s.s_ati_pos.to_string(),
            s.s_ati_neg.to_string(),
            u8::from(s.correlated).to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_shots_csv<R: std::io::Read>(r: R) -> Result<Vec<ShotRecord>> {
    #[derive(Deserialize)]
    struct Row {
        s_ir0: f64,
        s_ir: f64,
        s_xuv: f64,
        s_ati_pos: f64,
        s_ati_neg: f64,
        label: u8,
    }
    let mut rdr = csv::Reader::from_reader(r);
    rdr.deserialize::<Row>()
        .map(|row| {
            let row = row?;
            Ok(ShotRecord {
                s_ir0: row.s_ir0,
                s_ir: row.s_ir,
                s_xuv: row.s_xuv,
                s_ati_pos: row.s_ati_pos,
                s_ati_neg: row.s_ati_neg,
                correlated: row.label != 0,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small(f_corr: f64, n: usize) -> QspecModel {
        QspecModel {
            f_corr,
            n_shots: n,
            ..Default::default()
        }
    }

    fn corrcoef(x: &[f64], y: &[f64]) -> f64 {
        let n = x.len() as f64;
        let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
        let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
        sxy / (sxx * syy).sqrt()
    }

    #[test]
    fn background_is_uncorrelated() {
        let shots = generate_shots(&small(0.0, 100_000)).unwrap();
        assert_eq!(shots.len(), 100_000);
        let x: Vec<f64> = shots.iter().map(|s| s.s_xuv).collect();
        let y: Vec<f64> = shots.iter().map(|s| s.s_ir).collect();
        assert!(corrcoef(&x, &y).abs() < 0.05);
        assert!(shots.iter().all(|s| !s.correlated && s.s_ir >= 0.0 && s.s_xuv >= 0.0));
    }

    #[test]
    fn fully_correlated_shots_lie_on_the_diagonal() {
        let m = small(1.0, 2000);
        let shots = generate_shots(&m).unwrap();
        let rungs = m.rungs();
        for s in &shots {
            assert!(s.correlated);
            assert!((s.s_ir + s.s_xuv - 2.0).abs() < 1e-12);
        }
        // Losses sit on the ladder lattice of multiples of AN.
        let sel = anticorrelation_select(&shots, m.w_j, 1_000_000).unwrap();
        assert_eq!(sel.shots.len(), shots.len());
        assert!(rungs.len() == 5);
    }

    #[test]
    fn stability_filter_limits() {
        let shots = generate_shots(&small(1e-3, 10_000)).unwrap();
        assert_eq!(stability_filter(&shots, f64::INFINITY), shots);
        assert!(stability_filter(&shots, 0.0).iter().all(|s| s.s_ir0 == 1.0));
    }

    #[test]
    fn stability_filter_keeps_gaussian_mass() {
        let m = small(1e-3, 200_000);
        let shots = generate_shots(&m).unwrap();
        let kept = stability_filter(&shots, 0.01).len() as f64 / shots.len() as f64;
        // P(|N(0, w_j)| ≤ 0.01) = erf(0.01 / (w_j √2)) ≈ 0.158519
        let want = 0.158_519_418_878;
        assert!((kept - want).abs() < 0.02 * want, "{kept}");
    }

    #[test]
    fn background_band_mass() {
        let m = small(0.0, 200_000);
        let shots = generate_shots(&m).unwrap();
        let k = 100;
        let sel = anticorrelation_select(&shots, m.w_j, k).unwrap();
        // Sum of two N(0, w_j) within ±w_ant/2: erf(w_ant / (4 w_j)).
        let w_ant = band_width(m.w_j, k);
        assert_eq!(sel.w_ant, w_ant);
        let want = 0.028_199_731;
        assert!((w_ant / (4.0 * m.w_j) - 0.025).abs() < 1e-15);
        assert!(
            (sel.selected_fraction - want).abs() < 0.1 * want,
            "{}",
            sel.selected_fraction
        );
    }

    #[test]
    fn band_width_scales_exactly() {
        for k in [1u64, 4, 100, 10_000] {
            assert_eq!(band_width(0.05, k), 0.05 / (k as f64).sqrt());
        }
        assert_eq!(band_width(0.05, 4) * 2.0, band_width(0.05, 1));
    }

    #[test]
    fn default_pipeline_enriches_and_recovers_ladder() {
        let m = QspecModel::default();
        let shots = stability_filter(&generate_shots(&m).unwrap(), 0.01);
        let sel = anticorrelation_select(&shots, m.w_j, 1_000_000).unwrap();
        let base = shots.iter().filter(|s| s.correlated).count() as f64 / shots.len() as f64;
        assert!(sel.precision() >= 0.5, "precision {}", sel.precision());
        assert!(sel.precision() >= 10.0 * base);
        let h = p_ir_histogram(&sel.shots, 0.004).unwrap();
        assert!(h.peaks.len() >= 3, "{:?}", h.peaks);
        let s = h.peak_spacing().unwrap();
        assert!(
            (s - m.programmed_spacing().unwrap()).abs() <= h.bin_width,
            "{s} {:?}",
            h.peaks
        );
    }

    #[test]
    fn single_order_gives_one_peak() {
        let m = QspecModel {
            f_corr: 1.0,
            n_shots: 2000,
            orders: vec![LadderOrder {
                q: 13,
                an: 0.01,
                mean_photons: 0.01,
            }],
            ..Default::default()
        };
        let shots = generate_shots(&m).unwrap();
        let h = p_ir_histogram(&shots, 0.004).unwrap();
        assert_eq!(h.peaks.len(), 1);
        assert!((h.peaks[0] - 0.13).abs() < 0.004);
    }

    #[test]
    fn empty_selection_is_an_error() {
        let shots = generate_shots(&small(0.0, 1000)).unwrap();
        match anticorrelation_select(&shots, 0.05, u64::MAX) {
            Err(Error::EmptySelection(msg)) => assert!(msg.contains("n_shots")),
            other => panic!("{other:?}"),
        }
        assert!(p_ir_histogram(&[], 0.01).is_err());
    }

    #[test]
    fn generation_is_reproducible() {
        let m = small(0.01, 20_000);
        let a = generate_shots(&m).unwrap();
        assert_eq!(a, generate_shots(&m).unwrap());
        let b = generate_shots(&QspecModel { seed: 2, ..m }).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn csv_round_trip() {
        let shots = generate_shots(&small(0.05, 1000)).unwrap();
        let mut buf = Vec::new();
        write_shots_csv(&shots, &mut buf).unwrap();
        assert!(buf.starts_with(b"s_ir0,s_ir,s_xuv,s_ati_pos,s_ati_neg,label\n"));
        assert_eq!(read_shots_csv(buf.as_slice()).unwrap(), shots);
    }

    #[test]
    fn validation() {
        assert!(generate_shots(&small(1e-3, 999)).is_err());
        assert!(generate_shots(&QspecModel {
            w_j: 0.0,
            ..small(1e-3, 1000)
        })
        .is_err());
        assert!(generate_shots(&QspecModel {
            orders: vec![],
            ..small(1e-3, 1000)
        })
        .is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn selection_ignores_shot_order(seed in 0u64..1000, rot in 0usize..5000) {
            let m = QspecModel { seed, ..small(0.01, 5000) };
            let shots = generate_shots(&m).unwrap();
            let mut perm = shots.clone();
            perm.rotate_left(rot);
            perm.reverse();
            let key = |v: Vec<ShotRecord>| {
                let mut k: Vec<[u64; 3]> = v.iter().map(|s| [s.s_ir0.to_bits(), s.s_ir.to_bits(), s.s_xuv.to_bits()]).collect();
                k.sort();
                k
            };
            let a = anticorrelation_select(&shots, m.w_j, 400).unwrap();
            let b = anticorrelation_select(&perm, m.w_j, 400).unwrap();
            prop_assert_eq!(key(a.shots), key(b.shots));
        }
    }
}
