//! JSON run configuration: system parameters plus an optional run block.
//!
//! Energies are in eV, the mirror phase either in radians (`phi`) or in units of
//! π (`phi_over_pi`), dipole moments in debye. Widths may be given as rates or as
//! quality factors. Unknown keys are rejected with the line and column of the
//! offending token.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::dynamics::{DynamicsMethod, EmitterTuning};
use crate::error::{Error, Result};
use crate::params::{Couplings, DriveTarget, Emitter, MirrorConfig, PhotonicMode, PlasmonMode, SystemParams};
use crate::presets;
use crate::quantum_yield::YieldOptions;
use crate::spectrum::{linspace, logspace};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlasmonSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_a: Option<f64>,
    /// ω_a − ω_c; alternative to `omega_a`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_ac: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_r: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_o: Option<f64>,
    /// Total width κ_a; κ_o = κ_a − κ_r.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_a: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_a: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhotonSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_i: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa_c: Option<f64>,
    /// Total width κ; κ_c = κ − κ_i.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_c: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MirrorSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub present: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_over_pi: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmitterSpec {
    /// Defaults to ω_c.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega_0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_nr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_m: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ga: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gc: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

/// A list of values, either explicit or `points` samples between `lo` and `hi`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default, skip_serializing_if = "is_linear")]
    pub scale: Scale,
}

fn is_linear(s: &Scale) -> bool {
    *s == Scale::Linear
}

impl AxisSpec {
    pub fn range(lo: f64, hi: f64, points: usize, scale: Scale) -> Self {
        AxisSpec { values: None, lo: Some(lo), hi: Some(hi), points: Some(points), scale }
    }

    pub fn list(values: Vec<f64>) -> Self {
        AxisSpec { values: Some(values), ..Default::default() }
    }

    pub fn resolve(&self, what: &str) -> Result<Vec<f64>> {
        let bad = |m: &str| Error::Config(format!("{what}: {m}"));
        match (&self.values, self.lo, self.hi, self.points) {
            (Some(v), None, None, None) => {
                if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
                    return Err(bad("values must be a non-empty list of finite numbers"));
                }
                Ok(v.clone())
            }
            (None, Some(lo), Some(hi), Some(n)) => {
                if n < 1 || !lo.is_finite() || !hi.is_finite() {
                    return Err(bad("need finite lo/hi and at least one point"));
                }
                if n == 1 {
                    return Ok(vec![lo]);
                }
                match self.scale {
                    Scale::Linear => Ok(linspace(lo, hi, n)),
                    Scale::Log if lo > 0.0 && hi > 0.0 => Ok(logspace(lo, hi, n)),
                    Scale::Log => Err(bad("log axis needs positive bounds")),
                }
            }
            _ => Err(bad("give either `values` or all of `lo`, `hi`, `points`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub t_max_fs: f64,
    pub points: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct YieldSpec {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub include_gamma_nr: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub include_kappa_i: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<DriveTarget>,
    /// Q_c axis of the yield table; defaults to the configured Q_c.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q_c: Option<AxisSpec>,
    /// Phase axis in units of π; defaults to the configured phase.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phi_over_pi: Option<AxisSpec>,
    /// Emit η(Δ_L) on the detuning grid instead of the Q_c × φ table.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<bool>,
}

impl YieldSpec {
    pub fn options(&self) -> YieldOptions {
        let d = YieldOptions::default();
        YieldOptions {
            include_gamma_nr: self.include_gamma_nr.unwrap_or(d.include_gamma_nr),
            include_kappa_i: self.include_kappa_i.or(d.include_kappa_i),
        }
    }

    pub fn target(&self) -> DriveTarget {
        self.target.unwrap_or(DriveTarget::Emitter)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Observable {
    PurcellMax,
    Linewidth,
    Eta,
    Sigma0,
    EnhancementPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// Dotted parameter path, e.g. `photon.q_c` or `couplings.g1`.
    pub path: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default, skip_serializing_if = "is_linear")]
    pub scale: Scale,
}

impl SweepAxis {
    pub fn new(path: &str, axis: AxisSpec) -> Self {
        SweepAxis { path: path.to_string(), values: axis.values, lo: axis.lo, hi: axis.hi, points: axis.points, scale: axis.scale }
    }

    pub fn axis(&self) -> AxisSpec {
        AxisSpec { values: self.values.clone(), lo: self.lo, hi: self.hi, points: self.points, scale: self.scale }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub axes: Vec<SweepAxis>,
    pub observable: Observable,
    /// Inner ω (PurcellMax, Linewidth) or Δ_L (Eta) range replacing the automatic one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<AxisSpec>,
    /// Maximise over the mirror phase with this many samples in every cell.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub optimize_phi: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FreeParam {
    G1,
    Gc,
    Phi,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitQuantity {
    /// P(ω) = J(ω)/J₀(ω); needs a dipole moment.
    #[default]
    Purcell,
    /// J(ω) in eV.
    Density,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitSpec {
    /// Two- or three-column CSV: omega_eV, value[, weight]. Relative to the config file.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<String>,
    pub free: Vec<FreeParam>,
    #[serde(default)]
    pub quantity: FitQuantity,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    /// Absolute ω grid (eV) for `ldos` and `emission`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub omega: Option<AxisSpec>,
    /// Detuning Δ_L = ω_c − ω_L grid (eV) for `scatter` and yield spectra.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detuning: Option<AxisSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub time: Option<TimeSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<DynamicsMethod>,
    /// Retune ω₀ before `emission` / `dynamics`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub emitter_tuning: Option<EmitterTuning>,
    /// Replace φ by the Purcell-optimal phase found with this many samples.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tune_phi: Option<usize>,
    /// Frequency offset (eV) added to the CEP emission grid on output.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub emission_shift: Option<f64>,
    #[serde(rename = "yield", skip_serializing_if = "Option::is_none")]
    pub yield_spec: Option<YieldSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<FitSpec>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    /// Start from a shipped preset; keys given here override it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default)]
    pub plasmon: PlasmonSpec,
    #[serde(default)]
    pub photon: PhotonSpec,
    #[serde(default)]
    pub mirror: MirrorSpec,
    #[serde(default)]
    pub emitter: EmitterSpec,
    #[serde(default)]
    pub couplings: CouplingSpec,
    #[serde(default)]
    pub run: RunSpec,
}

/// A resolved configuration: validated parameters plus the run block.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub file: ConfigFile,
    pub params: SystemParams,
    /// Directory that relative paths in the run block refer to.
    pub base_dir: Option<std::path::PathBuf>,
}

impl Config {
    pub fn run(&self) -> &RunSpec {
        &self.file.run
    }

    /// SHA-256 of the canonical JSON form of the merged file.
    pub fn sha256(&self) -> String {
        let text = serde_json::to_string(&self.file).expect("config serialises");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}

fn parse_error(e: serde_json::Error) -> Error {
    Error::Parse { line: e.line(), column: e.column(), message: e.to_string() }
}

/// Strict parse of a config document.
pub fn parse_file(text: &str) -> Result<ConfigFile> {
    serde_json::from_str(text).map_err(parse_error)
}

// keys that specify the same quantity; an override of one drops the others
const EXCLUSIVE: &[(&str, &[&str])] = &[
    ("plasmon", &["omega_a", "delta_ac"]),
    ("plasmon", &["kappa_o", "kappa_a", "q_a"]),
    ("photon", &["kappa_c", "kappa", "q_c"]),
    ("mirror", &["phi", "phi_over_pi"]),
];

fn merge(base: &mut Value, over: Value, section: Option<&str>) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            if let Some(s) = section {
                for (_, group) in EXCLUSIVE.iter().filter(|(sec, _)| *sec == s) {
                    if group.iter().any(|k| o.contains_key(*k)) {
                        for k in group.iter() {
                            b.remove(*k);
                        }
                    }
                }
            }
            // an axis given as a list replaces a range and vice versa
            if o.contains_key("values") {
                for k in ["lo", "hi", "points", "scale"] {
                    b.remove(k);
                }
            } else if ["lo", "hi", "points"].iter().any(|k| o.contains_key(*k)) {
                b.remove("values");
            }
            for (k, v) in o {
                let child = if section.is_none() { Some(k.as_str()) } else { None };
                match b.get_mut(&k) {
                    // axes and lists replace wholesale
                    Some(slot) if v.is_object() && k != "axes" => merge(slot, v, child),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, o) => *b = o,
    }
}

/// Layer `over` on top of `base`.
pub fn merge_files(base: &ConfigFile, over: &ConfigFile) -> Result<ConfigFile> {
    let mut b = serde_json::to_value(base).map_err(|e| Error::Config(e.to_string()))?;
    let o = serde_json::to_value(over).map_err(|e| Error::Config(e.to_string()))?;
    merge(&mut b, o, None);
    let mut out: ConfigFile = serde_json::from_value(b).map_err(|e| Error::Config(e.to_string()))?;
    out.preset = base.preset.clone().or_else(|| over.preset.clone());
    Ok(out)
}

fn expand_presets(file: ConfigFile, depth: usize) -> Result<ConfigFile> {
    match file.preset.clone() {
        Some(name) if file.name.as_deref() != Some(name.as_str()) => {
            if depth > 8 {
                return Err(Error::Config("preset chain too deep".into()));
            }
            let base = expand_presets(parse_file(presets::get(&name)?)?, depth + 1)?;
            let mut merged = merge_files(&base, &file)?;
            merged.preset = Some(name);
            Ok(merged)
        }
        _ => Ok(file),
    }
}

fn need(v: Option<f64>, path: &str) -> Result<f64> {
    v.ok_or_else(|| Error::Config(format!("missing `{path}`")))
}

fn one_of(section: &str, given: &[(&str, Option<f64>)]) -> Result<Option<(usize, f64)>> {
    let set: Vec<(usize, f64)> = given.iter().enumerate().filter_map(|(i, (_, v))| v.map(|x| (i, x))).collect();
    if set.len() > 1 {
        let names: Vec<String> = given.iter().map(|(n, _)| format!("{section}.{n}")).collect();
        return Err(Error::Config(format!("give only one of {}", names.join(", "))));
    }
    Ok(set.first().copied())
}

/// Build system parameters from the sections of a config file.
pub fn resolve_params(f: &ConfigFile) -> Result<SystemParams> {
    let ph = &f.photon;
    let omega_c = need(ph.omega_c, "photon.omega_c")?;
    let kappa_i = ph.kappa_i.unwrap_or(0.0);
    let kappa_c = match one_of("photon", &[("kappa_c", ph.kappa_c), ("kappa", ph.kappa), ("q_c", ph.q_c)])? {
        Some((0, k)) => k,
        Some((1, k)) => k - kappa_i,
        Some((_, q)) => omega_c / q - kappa_i,
        None => return Err(Error::Config("photon needs one of kappa_c, kappa, q_c".into())),
    };
    let photon = PhotonicMode { omega_c, kappa_i, kappa_c };

    let pl = &f.plasmon;
    let omega_a = match one_of("plasmon", &[("omega_a", pl.omega_a), ("delta_ac", pl.delta_ac)])? {
        Some((0, w)) => w,
        Some((_, d)) => omega_c + d,
        None => return Err(Error::Config("plasmon needs omega_a or delta_ac".into())),
    };
    let kappa_r = pl.kappa_r.unwrap_or(0.0);
    let kappa_o = match one_of("plasmon", &[("kappa_o", pl.kappa_o), ("kappa_a", pl.kappa_a), ("q_a", pl.q_a)])? {
        Some((0, k)) => k,
        Some((1, k)) => k - kappa_r,
        Some((_, q)) => omega_a / q - kappa_r,
        None => return Err(Error::Config("plasmon needs one of kappa_o, kappa_a, q_a".into())),
    };
    let plasmon = PlasmonMode { omega_a, kappa_r, kappa_o };

    let m = &f.mirror;
    let phi = match one_of("mirror", &[("phi", m.phi), ("phi_over_pi", m.phi_over_pi)])? {
        Some((0, x)) => x,
        Some((_, x)) => x * PI,
        None => 0.0,
    };
    let mirror = MirrorConfig::new(m.present.unwrap_or(true), phi);

    let e = &f.emitter;
    let emitter = Emitter {
        omega_0: e.omega_0.unwrap_or(omega_c),
        gamma_0: need(e.gamma_0, "emitter.gamma_0")?,
        gamma_nr: e.gamma_nr.unwrap_or(0.0),
        gamma_m: e.gamma_m.unwrap_or(0.0),
        mu: e.mu,
    };
    let c = &f.couplings;
    let couplings = Couplings {
        g1: need(c.g1, "couplings.g1")?,
        ga: need(c.ga, "couplings.ga")?,
        gc: c.gc.unwrap_or(0.0),
    };
    SystemParams { plasmon, photon, mirror, emitter, couplings }.validated()
}

fn resolve(file: ConfigFile, base_dir: Option<std::path::PathBuf>) -> Result<Config> {
    let file = expand_presets(file, 0)?;
    let params = resolve_params(&file)?;
    Ok(Config { file, params, base_dir })
}

pub fn load_str(text: &str) -> Result<Config> {
    resolve(parse_file(text)?, None)
}

/// Read, strictly parse, expand presets and validate a config file.
pub fn load_config(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path)?;
    let dir = path.parent().map(|d| d.to_path_buf());
    resolve(parse_file(&text)?, dir)
}

pub fn load_preset(name: &str) -> Result<Config> {
    resolve(parse_file(presets::get(name)?)?, None)
}

/// A preset, optionally overridden by a config file.
pub fn load(config: Option<&Path>, preset: Option<&str>) -> Result<Config> {
    match (config, preset) {
        (Some(path), Some(name)) => {
            let text = std::fs::read_to_string(path)?;
            let mut over = parse_file(&text)?;
            over.preset = None;
            let base = expand_presets(parse_file(presets::get(name)?)?, 0)?;
            let merged = merge_files(&base, &over)?;
            resolve(merged, path.parent().map(|d| d.to_path_buf()))
        }
        (Some(path), None) => load_config(path),
        (None, Some(name)) => load_preset(name),
        (None, None) => Err(Error::Config("either a config file or a preset is required".into())),
    }
}
