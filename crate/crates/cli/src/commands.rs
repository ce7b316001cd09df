//! One function per subcommand. Each fills a bundle and returns; nothing
//! touches the filesystem here.

use anyhow::Context;
use num_complex::Complex64 as C64;
use serde::Serialize;
use serde_json::json;

use sfqo::ati::{mean_photon, spearman, AtiConfig, AtiModel};
use sfqo::conditioning::xi_ir;
use sfqo::displacement::{cutoff_law, hhg_spectrum, DisplacementRecord, ModeGrid};
use sfqo::fock::{interferometer_psi_f, reduced_purity, CoherentSuperposition};
use sfqo::pulse::{FieldCoupling, LaserPulse};
use sfqo::qspec::{
    anticorrelation_select_channels, generate_shots, p_ir_histogram, stability_filter, write_shots_csv, Channel,
};
use sfqo::sfa::{dipole_expectation, ground_survival, momentum_grid, AtomModel, DipoleTrace, SfaGrid};
use sfqo::tomography::{
    error_sweep, homodyne_sample, peak_error, reconstruct_wigner, wigner_superposition, write_sweep_csv, GridSpec,
    SweepProtocol, SweepSettings,
};

use crate::config::RunConfig;
use crate::output::Bundle;

fn pulse(cfg: &RunConfig, default_cycles: u32) -> anyhow::Result<LaserPulse> {
    let p = &cfg.pulse;
    LaserPulse::new(p.omega, p.e0, p.n_cycles.unwrap_or(default_cycles), p.cep).context("config section `pulse`")
}

fn atom(cfg: &RunConfig) -> anyhow::Result<AtomModel> {
    AtomModel::new(cfg.atom.ip, cfg.atom.lam).context("config section `atom`")
}

fn sfa_grid(cfg: &RunConfig) -> SfaGrid {
    SfaGrid {
        dt: cfg.dt(),
        refine: cfg.sfa.substeps,
    }
}

fn trace(cfg: &RunConfig, pulse: &LaserPulse, atom: &AtomModel) -> anyhow::Result<DipoleTrace> {
    let grid = momentum_grid(pulse, cfg.n_p(), cfg.sfa.p_span);
    Ok(dipole_expectation(pulse, atom, &grid, sfa_grid(cfg))?)
}

fn coupling(cfg: &RunConfig) -> anyhow::Result<FieldCoupling> {
    FieldCoupling::new(cfg.modes.gtilde, cfg.modes.lambda_scale, None).context("config section `modes`")
}

pub fn dipole(cfg: &RunConfig, out: &mut Bundle) -> anyhow::Result<()> {
    let (p, a) = (pulse(cfg, 10)?, atom(cfg)?);
    let tr = trace(cfg, &p, &a)?;
    let grid = momentum_grid(&p, cfg.n_p(), cfg.sfa.p_span);
    let survival = ground_survival(&p, &a, &grid, p.duration(), sfa_grid(cfg))?;
    out.add("dipole.csv", |w| tr.write_csv(w))?;
    let peak = tr.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    out.add_json(
        "summary.json",
        &json!({
            "duration": p.duration(),
            "ponderomotive_energy": p.ponderomotive_energy(),
            "samples": tr.len(),
            "momenta": grid.len(),
            "max_abs_dipole": peak,
            "final_ground_survival": survival,
        }),
    )
}

pub fn hhg(cfg: &RunConfig, out: &mut Bundle) -> anyhow::Result<()> {
    let (p, a) = (pulse(cfg, 10)?, atom(cfg)?);
    let tr = trace(cfg, &p, &a)?;
    let n_orders = cfg.hhg.max_order.ceil().max(1.0) as u32;
    let modes = ModeGrid::harmonics(p.omega, n_orders, coupling(cfg)?)?;
    let sp = hhg_spectrum(&tr, &modes, cfg.hhg.n_atoms, cfg.hhg.max_order, cfg.hhg.order_step)?;
    let cutoff = sp.cutoff_order();
    let contrast: Vec<_> = sp
        .harmonic_orders
        .iter()
        .filter(|q| *q % 2 == 1)
        .filter_map(|&q| sp.contrast_db(q).map(|d| json!({"order": q, "contrast_db": d})))
        .collect();
    out.add("spectrum.csv", |w| sp.write_csv(w))?;
    out.add_json(
        "summary.json",
        &json!({
            "cutoff_order": cutoff,
            "cutoff_law": cutoff_law(a.ip, p.ponderomotive_energy(), p.omega),
            "plateau_contrast_db": sp.plateau_contrast_db(),
            "odd_order_contrast": contrast,
        }),
    )
}

pub fn chi_delta(cfg: &RunConfig, out: &mut Bundle) -> anyhow::Result<()> {
    let (p, a) = (pulse(cfg, 5)?, atom(cfg)?);
    let tr = trace(cfg, &p, &a)?;
    let omegas: Vec<f64> = cfg.chi_delta.orders.iter().map(|&q| f64::from(q) * p.omega).collect();
    let modes = ModeGrid::new(omegas, coupling(cfg)?).context("config field `chi_delta.orders`")?;
    let s = p.ponderomotive_energy().sqrt();
    let momenta: Vec<f64> = cfg.chi_delta.p_fracs.iter().map(|f| f * s).collect();
    let rec = DisplacementRecord::compute(&p, &tr, &modes, &momenta);
    let t_end = p.duration();
    let mut ratios = Vec::new();
    for (i, f) in cfg.chi_delta.p_fracs.iter().enumerate() {
        out.add(&format!("chi_delta_p{i}.csv"), |w| rec.write_csv(i, w))?;
        for (k, q) in cfg.chi_delta.orders.iter().enumerate() {
            let min = rec
                .times
                .iter()
                .enumerate()
                .filter(|(_, &t)| t >= 0.25 * t_end && t <= 0.75 * t_end)
                .map(|(j, _)| rec.delta[k][i][j].norm() / rec.chi[k][j].norm())
                .fold(f64::INFINITY, f64::min);
            ratios.push(json!({"p_frac": f, "order": q, "min_delta_over_chi_central_half": min}));
        }
    }
    out.add_json(
        "summary.json",
        &json!({ "files": "chi_delta_p<i>.csv follows the order of chi_delta.p_fracs", "ratios": ratios }),
    )
}

pub fn css_photon(cfg: &RunConfig, out: &mut Bundle) -> anyhow::Result<()> {
    let c = &cfg.css;
    let mut coherent = Vec::new();
    for (i, &alpha) in c.alphas.iter().enumerate() {
        let d = CoherentSuperposition::coherent(vec![alpha]).photon_distribution(c.n_max)?;
        out.add(&format!("coherent_{i}.csv"), |w| d.write_csv(w))?;
        coherent.push(json!({"alpha": alpha, "mean": d.mean(), "variance": d.variance(), "tail": d.tail}));
    }
    let mut sups = Vec::new();
    for (i, coeffs) in c.coefficients.iter().enumerate() {
        let terms: Vec<(C64, C64)> = coeffs.iter().copied().zip(c.branch_amps.iter().copied()).collect();
        let d = CoherentSuperposition::single_mode(&terms).photon_distribution(c.n_max)?;
        out.add(&format!("superposition_{i}.csv"), |w| d.write_csv(w))?;
        sups.push(json!({
            "coefficients": coeffs,
            "mean": d.mean(),
            "local_maxima": d.local_maxima(1e-3),
        }));
    }
    out.add_json("summary.json", &json!({"coherent": coherent, "superpositions": sups}))
}

#[derive(Serialize)]
struct AtiRow {
    p_frac: f64,
    p: f64,
    mean: f64,
    variance: f64,
    tail: f64,
    peaks: usize,
    dominant_n: usize,
    dominant_mass: f64,
    warning: String,
}

pub fn ati_photon(cfg: &RunConfig, out: &mut Bundle) -> anyhow::Result<()> {
    let (p, a) = (pulse(cfg, 5)?, atom(cfg)?);
    let tr = trace(cfg, &p, &a)?;
    let ac = AtiConfig {
        alpha: cfg.ati.alpha,
        lambda_scale: cfg.ati.lambda_scale,
        max_order: cfg.ati.max_order,
        n_max: cfg.ati.n_max,
        tail_tol: cfg.ati.tail_tol,
        ..Default::default()
    };
    let model = AtiModel::new(&p, &a, &tr, &ac).context("config section `ati`")?;
    let s = p.ponderomotive_energy().sqrt();
    let n = cfg.ati.n_points;
    let fracs: Vec<f64> = (0..n)
        .map(|i| {
            if n == 1 {
                cfg.ati.p_min
            } else {
                cfg.ati.p_min + (cfg.ati.p_max - cfg.ati.p_min) * i as f64 / (n - 1) as f64
            }
        })
        .collect();
    let mut rows = Vec::new();
    let mut long = csv_writer();
    long.write_record(["p_frac", "n", "P"])?;
    for &f in &fracs {
        let table = model
            .amplitudes(f * s)
            .with_context(|| format!("ATI amplitudes at p = {f} sqrt(Up)"))?;
        let d = table.distribution();
        for (k, pr) in d.probs.iter().enumerate() {
            long.write_record([f.to_string(), k.to_string(), pr.to_string()])?;
        }
        let (dn, dm) = d.dominant_peak();
        rows.push(AtiRow {
            p_frac: f,
            p: f * s,
            mean: mean_photon(&table),
            variance: d.variance(),
            tail: d.tail,
            peaks: d.resolved_peaks(1e-2, 3).len(),
            dominant_n: dn,
            dominant_mass: dm,
            warning: table.warning.clone().unwrap_or_default(),
        });
    }
    let dist = finish(long)?;
    let mut sweep = csv_writer();
    for r in &rows {
        sweep.serialize(r)?;
    }
    let sweep = finish(sweep)?;
    out.add_bytes("ati_sweep.csv", sweep)?;
    out.add_bytes("ati_distributions.csv", dist)?;
    let n0 = cfg.ati.alpha.norm_sqr();
    let eligible: Vec<&AtiRow> = rows.iter().filter(|r| r.p_frac.abs() >= 0.1).collect();
    let agree = eligible
        .iter()
        .filter(|r| (r.mean - n0).signum() == r.p_frac.signum())
        .count();
    let x: Vec<f64> = rows.iter().map(|r| r.p_frac.abs()).collect();
    let y: Vec<f64> = rows.iter().map(|r| (r.mean - n0).abs()).collect();
    out.add_json(
        "summary.json",
        &json!({
            "unconditioned_mean": n0,
            "sign_agreement": if eligible.is_empty() { None } else { Some(agree as f64 / eligible.len() as f64) },
            "spearman_abs_shift_vs_abs_p": if rows.len() > 1 { Some(spearman(&x, &y)) } else { None },
        }),
    )
}

pub fn cat_wigner(cfg: &RunConfig, out: &mut Bundle) -> anyhow::Result<()> {
    let c = &cfg.cat;
    let spec = GridSpec::square(C64::default(), c.half_width, c.points);
    let mut stats = Vec::new();
    for (i, &chi) in c.chis.iter().enumerate() {
        let state =
            sfqo::conditioning::ir_cat(c.alpha, chi).with_context(|| format!("config field `cat.chis[{i}]`"))?;
        let w = wigner_superposition(&state, &spec)?;
        if i == 0 {
            out.add("axes.csv", |b| w.write_axes_csv(b))?;
        }
        out.add(&format!("wigner_{i}.csv"), |b| w.write_matrix_csv(b))?;
        stats.push(json!({"chi": chi, "min": w.min(), "max": w.max(), "integral": w.integral()}));
    }
    out.add_json("summary.json", &json!({"alpha": c.alpha, "states": stats}))
}

pub fn tomo(cfg: &RunConfig, out: &mut Bundle) -> anyhow::Result<()> {
    let t = &cfg.tomo;
    let mut summary = serde_json::Map::new();
    for &proto in &t.protocols {
        let (name, values) = match proto {
            SweepProtocol::VsKc => ("vs_kc", &t.vs_kc),
            SweepProtocol::VsNsamples => ("vs_nsamples", &t.vs_nsamples),
            SweepProtocol::VsNbar => ("vs_nbar", &t.vs_nbar),
        };
        let settings = SweepSettings {
            seeds: t.seeds,
            base_seed: cfg.seed,
            kc: t.kc,
            n_samples: t.n_samples,
            nbar: t.nbar,
            values: values.clone(),
            grid_points: t.grid_points,
        };
        let rows = error_sweep(proto, &settings).with_context(|| format!("tomography sweep {name}"))?;
        out.add(&format!("sweep_{name}.csv"), |w| write_sweep_csv(&rows, w))?;
        summary.insert(name.into(), serde_json::to_value(&rows)?);
    }
    let state = t.example.superposition().context("config section `tomo.example`")?;
    let centre = state.terms.iter().map(|term| term.amps[0]).sum::<C64>() / state.terms.len() as f64;
    let spec = GridSpec::square(centre, t.example_half_width, t.example_points);
    let samples = homodyne_sample(&t.example, t.example_samples, cfg.seed)?;
    let rec = reconstruct_wigner(&samples, t.kc, &spec)?;
    let exact = wigner_superposition(&state, &spec)?;
    out.add("example_samples.csv", |w| samples.write_csv(w))?;
    out.add("example_axes.csv", |w| rec.write_axes_csv(w))?;
    out.add("example_reconstructed.csv", |w| rec.write_matrix_csv(w))?;
    out.add("example_exact.csv", |w| exact.write_matrix_csv(w))?;
    summary.insert(
        "example".into(),
        json!({"peak_error": peak_error(&rec, &exact), "min_reconstructed": rec.min(), "min_exact": exact.min()}),
    );
    out.add_json("summary.json", &summary)
}

pub fn qspec(cfg: &RunConfig, out: &mut Bundle) -> anyhow::Result<()> {
    let q = &cfg.qspec;
    let model = q.model(cfg.seed);
    let shots = generate_shots(&model).context("config section `qspec`")?;
    let stable = stability_filter(&shots, q.stability);
    let sel = anticorrelation_select_channels(&stable, q.w_j, q.k_points, q.channel.channel(), Channel::Ir)?;
    let hist = p_ir_histogram(&sel.shots, q.bin_width)?;
    let base = stable.iter().filter(|s| s.correlated).count() as f64 / stable.len().max(1) as f64;
    if q.write_shots {
        out.add("shots.csv", |w| write_shots_csv(&shots, w))?;
    }
    out.add("selected.csv", |w| write_shots_csv(&sel.shots, w))?;
    out.add("p_ir.csv", |w| hist.write_csv(w))?;
    out.add_json(
        "summary.json",
        &json!({
            "shots": shots.len(),
            "stable": stable.len(),
            "selected": sel.shots.len(),
            "w_ant": sel.w_ant,
            "precision": sel.precision(),
            "background_rate": base,
            "enrichment": if base > 0.0 { Some(sel.precision() / base) } else { None },
            "peaks": hist.peaks,
            "peak_spacing": hist.peak_spacing(),
            "programmed_spacing": model.programmed_spacing(),
        }),
    )
}

pub fn optics(cfg: &RunConfig, out: &mut Bundle) -> anyhow::Result<()> {
    let o = &cfg.optics;
    let a = o.alpha0 * std::f64::consts::FRAC_1_SQRT_2;
    let xi1 = o.xi1.unwrap_or_else(|| -xi_ir(a, o.chi1));
    let xi2 = o.xi2.unwrap_or_else(|| -xi_ir(a, o.chi2));
    let state = interferometer_psi_f(o.alpha0, o.chi1, o.chi2, xi1, xi2, o.varphi).normalized()?;
    out.add("state.json", |w| state.write_json(w))?;
    let mut modes = Vec::new();
    for m in 0..2 {
        let d = state.reduced_photon_distribution(m, o.n_max)?;
        out.add(&format!("mode{m}_photons.csv"), |w| d.write_csv(w))?;
        modes.push(json!({"mode": m, "mean": d.mean(), "variance": d.variance(), "tail": d.tail}));
    }
    out.add_json(
        "summary.json",
        &json!({
            "xi1": xi1,
            "xi2": xi2,
            "terms": state.terms.len(),
            "purity_mode0": reduced_purity(&state, 0)?,
            "modes": modes,
        }),
    )
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::Writer::from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> anyhow::Result<Vec<u8>> {
    w.into_inner()
        .map_err(|e| anyhow::anyhow!("flushing CSV: {}", e.error()))
}
