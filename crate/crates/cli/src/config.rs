//! Run configuration: TOML sections with typed, defaulted fields.
//!
//! Unknown keys are rejected everywhere. Complex numbers are written as
//! `[re, im]`. See `docs/config.md` for the full schema.

use std::path::Path;

use anyhow::{anyhow, bail, Context};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};
use sfqo::qspec::{Channel, LadderOrder, QspecModel};
use sfqo::tomography::{StateKind, SweepProtocol};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    /// Each level halves the SFA time step and doubles the momentum count.
    pub refine: u32,
    pub pulse: PulseCfg,
    pub atom: AtomCfg,
    pub sfa: SfaCfg,
    pub modes: ModesCfg,
    pub hhg: HhgCfg,
    pub chi_delta: ChiDeltaCfg,
    pub css: CssCfg,
    pub ati: AtiCfg,
    pub cat: CatCfg,
    pub tomo: TomoCfg,
    pub qspec: QspecCfg,
    pub optics: OpticsCfg,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            refine: 0,
            pulse: PulseCfg::default(),
            atom: AtomCfg::default(),
            sfa: SfaCfg::default(),
            modes: ModesCfg::default(),
            hhg: HhgCfg::default(),
            chi_delta: ChiDeltaCfg::default(),
            css: CssCfg::default(),
            ati: AtiCfg::default(),
            cat: CatCfg::default(),
            tomo: TomoCfg::default(),
            qspec: QspecCfg::default(),
            optics: OpticsCfg::default(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseCfg {
    pub omega: f64,
    pub e0: f64,
    /// Unset means the subcommand's own default (10 for `dipole` and
    /// `hhg-spectrum`, 5 for `chi-delta` and `ati-photon`).
    pub n_cycles: Option<u32>,
    pub cep: f64,
}

impl Default for PulseCfg {
    fn default() -> Self {
        Self {
            omega: 0.057,
            e0: 0.053,
            n_cycles: None,
            cep: 0.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AtomCfg {
    pub ip: f64,
    pub lam: f64,
}

impl Default for AtomCfg {
    fn default() -> Self {
        Self { ip: 0.5, lam: 1.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SfaCfg {
    pub n_p: usize,
    /// Momentum window half-width in units of √Up.
    pub p_span: f64,
    pub dt: f64,
    pub substeps: usize,
}

impl Default for SfaCfg {
    fn default() -> Self {
        Self {
            n_p: 512,
            p_span: 4.0,
            dt: 1.0,
            substeps: 4,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModesCfg {
    pub gtilde: f64,
    pub lambda_scale: f64,
}

impl Default for ModesCfg {
    fn default() -> Self {
        Self {
            gtilde: 1.0,
            lambda_scale: 1.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HhgCfg {
    pub n_atoms: u64,
    pub max_order: f64,
    pub order_step: f64,
}

impl Default for HhgCfg {
    fn default() -> Self {
        Self {
            n_atoms: 1,
            max_order: 40.0,
            order_step: 0.05,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChiDeltaCfg {
    /// Electron momenta in units of √Up.
    pub p_fracs: Vec<f64>,
    /// Harmonic orders to report.
    pub orders: Vec<u32>,
}

impl Default for ChiDeltaCfg {
    fn default() -> Self {
        Self {
            p_fracs: vec![0.93],
            orders: vec![1, 2, 3],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CssCfg {
    /// Single coherent states.
    pub alphas: Vec<C64>,
    /// Amplitudes shared by every superposition.
    pub branch_amps: Vec<C64>,
    /// One coefficient list per superposition, matched to `branch_amps`.
    pub coefficients: Vec<Vec<C64>>,
    pub n_max: usize,
}

impl Default for CssCfg {
    fn default() -> Self {
        let re = |x: f64| C64::new(x, 0.0);
        Self {
            alphas: vec![re(7.95), re(8.73)],
            branch_amps: vec![re(7.0), re(9.0), re(10.0)],
            coefficients: vec![vec![re(1.0), re(-1.0), re(0.75)], vec![re(1.0), re(1.0), re(0.75)]],
            n_max: 200,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AtiCfg {
    pub alpha: C64,
    pub lambda_scale: f64,
    pub max_order: u32,
    pub n_max: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub n_points: usize,
    pub tail_tol: f64,
}

impl Default for AtiCfg {
    fn default() -> Self {
        Self {
            alpha: C64::new(0.0, 7.0),
            lambda_scale: 0.2,
            max_order: 21,
            n_max: 200,
            p_min: -0.46,
            p_max: 0.46,
            n_points: 19,
            tail_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CatCfg {
    pub alpha: C64,
    pub chis: Vec<C64>,
    pub half_width: f64,
    pub points: usize,
}

impl Default for CatCfg {
    fn default() -> Self {
        Self {
            alpha: C64::new(2.0, 0.0),
            chis: vec![C64::new(0.8, 0.0), C64::new(0.1, 0.0)],
            half_width: 6.0,
            points: 241,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TomoCfg {
    pub protocols: Vec<SweepProtocol>,
    pub seeds: u64,
    pub kc: f64,
    pub n_samples: usize,
    pub nbar: f64,
    pub grid_points: usize,
    /// Per-protocol sweep values; a missing entry uses the built-in list.
    pub vs_kc: Vec<f64>,
    pub vs_nsamples: Vec<f64>,
    pub vs_nbar: Vec<f64>,
    /// State reconstructed once from samples for inspection.
    pub example: StateKind,
    pub example_samples: usize,
    pub example_half_width: f64,
    pub example_points: usize,
}

impl Default for TomoCfg {
    fn default() -> Self {
        Self {
            protocols: vec![SweepProtocol::VsKc, SweepProtocol::VsNsamples, SweepProtocol::VsNbar],
            seeds: 20,
            kc: 3.7,
            n_samples: 10_000,
            nbar: 3.0,
            grid_points: 41,
            vs_kc: Vec::new(),
            vs_nsamples: Vec::new(),
            vs_nbar: Vec::new(),
            example: StateKind::Cat {
                alpha: C64::new(2.0, 0.0),
                chi: C64::new(0.8, 0.0),
            },
            example_samples: 10_000,
            example_half_width: 5.0,
            example_points: 101,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QspecCfg {
    pub w_j: f64,
    pub f_corr: f64,
    pub orders: Vec<LadderOrder>,
    pub ladder_jitter: f64,
    pub n_shots: usize,
    pub stability: f64,
    pub k_points: u64,
    pub bin_width: f64,
    /// Product channel paired with the IR depletion.
    pub channel: ProductChannel,
    /// Also write every generated shot (about 90 bytes each).
    pub write_shots: bool,
}

impl Default for QspecCfg {
    fn default() -> Self {
        let m = QspecModel::default();
        Self {
            w_j: m.w_j,
            f_corr: m.f_corr,
            orders: m.orders,
            ladder_jitter: m.ladder_jitter,
            n_shots: m.n_shots,
            stability: 0.01,
            k_points: 1_000_000,
            bin_width: 0.004,
            channel: ProductChannel::Xuv,
            write_shots: false,
        }
    }
}

impl QspecCfg {
    pub fn model(&self, seed: u64) -> QspecModel {
        QspecModel {
            w_j: self.w_j,
            f_corr: self.f_corr,
            orders: self.orders.clone(),
            ladder_jitter: self.ladder_jitter,
            n_shots: self.n_shots,
            seed,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProductChannel {
    Xuv,
    AtiPos,
    AtiNeg,
}

impl ProductChannel {
    pub fn channel(self) -> Channel {
        match self {
            ProductChannel::Xuv => Channel::Xuv,
            ProductChannel::AtiPos => Channel::AtiPos,
            ProductChannel::AtiNeg => Channel::AtiNeg,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OpticsCfg {
    pub alpha0: C64,
    pub chi1: C64,
    pub chi2: C64,
    /// Branch weights; unset uses the conditioning value `-⟨a|a+χ⟩`.
    pub xi1: Option<C64>,
    pub xi2: Option<C64>,
    pub varphi: f64,
    pub n_max: usize,
}

impl Default for OpticsCfg {
    fn default() -> Self {
        Self {
            alpha0: C64::new(4.0, 0.0),
            chi1: C64::new(-0.8, 0.0),
            chi2: C64::new(-0.8, 0.0),
            xi1: None,
            xi2: None,
            varphi: 0.0,
            n_max: 80,
        }
    }
}

/// Schema or override problem; reported with exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_error(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(ConfigError(msg.into()))
}

/// Parses the right-hand side of `--set`. Anything that is not a TOML
/// value is taken as a bare string.
fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.to_string())),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn apply_override(table: &mut toml::Table, assignment: &str) -> anyhow::Result<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| config_error(format!("override `{assignment}` is not of the form key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(config_error(format!("override key `{key}` is malformed")));
    }
    let (last, parents) = path.split_last().expect("non-empty path");
    let mut cur = table;
    for p in parents {
        let entry = cur
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = match entry {
            toml::Value::Table(t) => t,
            _ => return Err(config_error(format!("override `{key}`: `{p}` is not a section"))),
        };
    }
    cur.insert(last.to_string(), parse_value(raw.trim()));
    Ok(())
}

/// Parses a config document, applies overrides and deserializes it with
/// field paths in error messages.
pub fn parse(text: &str, overrides: &[String]) -> anyhow::Result<RunConfig> {
    let mut table: toml::Table = text
        .parse()
        .map_err(|e: toml::de::Error| config_error(format!("config is not valid TOML: {e}")))?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    let cfg: RunConfig = serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(|e| {
        let path = e.path().to_string();
        config_error(format!("config field `{path}`: {}", e.into_inner()))
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load(path: &Path, overrides: &[String]) -> anyhow::Result<RunConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_error(format!("cannot read config {}: {e}", path.display())))?;
    parse(&text, overrides).with_context(|| format!("in {}", path.display()))
}

impl RunConfig {
    fn validate(&self) -> anyhow::Result<()> {
        let check = |ok: bool, field: &str, why: &str| {
            if ok {
                Ok(())
            } else {
                Err(config_error(format!("config field `{field}`: {why}")))
            }
        };
        check(self.refine <= 4, "refine", "at most 4")?;
        check(self.sfa.n_p >= 2, "sfa.n_p", "needs at least 2 momenta")?;
        check(self.sfa.p_span > 0.0, "sfa.p_span", "must be positive")?;
        check(self.sfa.dt > 0.0, "sfa.dt", "must be positive")?;
        check(self.sfa.substeps >= 1, "sfa.substeps", "must be at least 1")?;
        check(self.hhg.n_atoms >= 1, "hhg.n_atoms", "must be at least 1")?;
        check(
            self.css
                .coefficients
                .iter()
                .all(|c| c.len() == self.css.branch_amps.len()),
            "css.coefficients",
            "each list must match css.branch_amps in length",
        )?;
        check(self.ati.n_points >= 1, "ati.n_points", "must be at least 1")?;
        check(
            self.ati.p_min <= self.ati.p_max,
            "ati.p_min",
            "must not exceed ati.p_max",
        )?;
        check(self.cat.points >= 3, "cat.points", "must be at least 3")?;
        check(self.tomo.seeds >= 1, "tomo.seeds", "must be at least 1")?;
        check(self.qspec.bin_width > 0.0, "qspec.bin_width", "must be positive")?;
        check(self.qspec.stability > 0.0, "qspec.stability", "must be positive")?;
        if let Some(n) = self.pulse.n_cycles {
            check(n >= 1, "pulse.n_cycles", "must be at least 1")?;
        }
        Ok(())
    }

    /// Settings with `--seed` and `--refine` folded in.
    pub fn with_cli(mut self, seed: Option<u64>, refine: Option<u32>) -> anyhow::Result<Self> {
        if let Some(s) = seed {
            self.seed = s;
        }
        if let Some(r) = refine {
            self.refine = r;
        }
        if self.refine > 4 {
            bail!(ConfigError("refine must be at most 4".into()));
        }
        Ok(self)
    }

    pub fn n_p(&self) -> usize {
        self.sfa.n_p << self.refine
    }

    pub fn dt(&self) -> f64 {
        self.sfa.dt / f64::from(1u32 << self.refine)
    }
}
