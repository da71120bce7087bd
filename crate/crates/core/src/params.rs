//! Physical parameters of the emitter + plasmon + two-mode photonic cavity system.
//!
//! All energies and rates are in eV (ħ = 1). The plasmon decay splits into a
//! radiative part `kappa_r` and an Ohmic part `kappa_o`; the photonic decay into
//! an intrinsic part `kappa_i` and the waveguide-induced part `kappa_c`.

use std::f64::consts::{PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlasmonMode {
    pub omega_a: f64,
    pub kappa_r: f64,
    pub kappa_o: f64,
}

impl PlasmonMode {
    /// Plasmon whose total width is `omega_a / q_a`, with `kappa_r` of it radiative.
    pub fn from_quality(omega_a: f64, q_a: f64, kappa_r: f64) -> Self {
        let kappa_a = omega_a / q_a;
        PlasmonMode { omega_a, kappa_r, kappa_o: kappa_a - kappa_r }
    }

    pub fn kappa_a(&self) -> f64 {
        self.kappa_r + self.kappa_o
    }

    pub fn q_a(&self) -> f64 {
        self.omega_a / self.kappa_a()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhotonicMode {
    pub omega_c: f64,
    pub kappa_i: f64,
    pub kappa_c: f64,
}

impl PhotonicMode {
    pub fn from_quality(omega_c: f64, q_c: f64, kappa_i: f64) -> Self {
        PhotonicMode { omega_c, kappa_i, kappa_c: omega_c / q_c - kappa_i }
    }

    /// Total decay κ = κ_i + κ_c.
    pub fn kappa(&self) -> f64 {
        self.kappa_i + self.kappa_c
    }

    pub fn q_c(&self) -> f64 {
        self.omega_c / self.kappa()
    }

    /// Same mode at quality `q_c`; κ_i and κ_c are rescaled together so their ratio is kept.
    pub fn with_quality(&self, q_c: f64) -> Self {
        let scale = self.omega_c / q_c / self.kappa();
        PhotonicMode { omega_c: self.omega_c, kappa_i: self.kappa_i * scale, kappa_c: self.kappa_c * scale }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MirrorConfig {
    pub present: bool,
    phi: f64,
}

impl MirrorConfig {
    pub fn new(present: bool, phi: f64) -> Self {
        MirrorConfig { present, phi: normalize_phase(phi) }
    }

    pub fn absent() -> Self {
        MirrorConfig { present: false, phi: 0.0 }
    }

    /// Round-trip phase in [0, 2π).
    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn set_phi(&mut self, phi: f64) {
        self.phi = normalize_phase(phi);
    }
}

pub fn normalize_phase(phi: f64) -> f64 {
    let p = phi.rem_euclid(TAU);
    // rem_euclid can round up to exactly 2π for tiny negative inputs
    if p >= TAU {
        0.0
    } else {
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Emitter {
    pub omega_0: f64,
    pub gamma_0: f64,
    pub gamma_nr: f64,
    pub gamma_m: f64,
    /// Transition dipole in debye; only needed for Purcell normalisation.
    pub mu: Option<f64>,
}

impl Emitter {
    pub fn gamma(&self) -> f64 {
        self.gamma_0 + self.gamma_nr + self.gamma_m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Couplings {
    pub g1: f64,
    pub ga: f64,
    pub gc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    pub plasmon: PlasmonMode,
    pub photon: PhotonicMode,
    pub mirror: MirrorConfig,
    pub emitter: Emitter,
    pub couplings: Couplings,
}

impl SystemParams {
    pub fn kappa_a(&self) -> f64 {
        self.plasmon.kappa_a()
    }

    pub fn kappa(&self) -> f64 {
        self.photon.kappa()
    }

    pub fn gamma(&self) -> f64 {
        self.emitter.gamma()
    }

    pub fn q_a(&self) -> f64 {
        self.plasmon.q_a()
    }

    pub fn q_c(&self) -> f64 {
        self.photon.q_c()
    }

    /// Plasmon–photon detuning Δ_ac = ω_a − ω_c.
    pub fn delta_ac(&self) -> f64 {
        self.plasmon.omega_a - self.photon.omega_c
    }

    pub fn phi(&self) -> f64 {
        self.mirror.phi()
    }

    /// The mirror-free hybrid cavity with otherwise identical parameters.
    pub fn baseline(&self) -> Self {
        let mut p = *self;
        p.mirror.present = false;
        p
    }

    pub fn with_phi(&self, phi: f64) -> Self {
        let mut p = *self;
        p.mirror.set_phi(phi);
        p
    }

    pub fn with_g1(&self, g1: f64) -> Self {
        let mut p = *self;
        p.couplings.g1 = g1;
        p
    }

    pub fn with_qc(&self, q_c: f64) -> Self {
        let mut p = *self;
        p.photon = p.photon.with_quality(q_c);
        p
    }

    /// Set a scalar through its dotted field path, e.g. `couplings.g1` or `photon.q_c`.
    ///
    /// Besides the stored fields, the derived knobs `photon.q_c`, `plasmon.q_a`,
    /// `mirror.phi_over_pi`, `plasmon.delta_ac` and `emitter.omega_0` are accepted.
    pub fn set_path(&mut self, path: &str, value: f64) -> Result<()> {
        match path {
            "plasmon.omega_a" => self.plasmon.omega_a = value,
            "plasmon.kappa_r" => self.plasmon.kappa_r = value,
            "plasmon.kappa_o" => self.plasmon.kappa_o = value,
            "plasmon.q_a" => {
                let kr = self.plasmon.kappa_r;
                self.plasmon = PlasmonMode::from_quality(self.plasmon.omega_a, value, kr);
            }
            "plasmon.delta_ac" => self.plasmon.omega_a = self.photon.omega_c + value,
            "photon.omega_c" => self.photon.omega_c = value,
            "photon.kappa_i" => self.photon.kappa_i = value,
            "photon.kappa_c" => self.photon.kappa_c = value,
            "photon.q_c" => self.photon = self.photon.with_quality(value),
            "mirror.phi" => self.mirror.set_phi(value),
            "mirror.phi_over_pi" => self.mirror.set_phi(value * PI),
            "mirror.present" => self.mirror.present = value != 0.0,
            "emitter.omega_0" => self.emitter.omega_0 = value,
            "emitter.gamma_0" => self.emitter.gamma_0 = value,
            "emitter.gamma_nr" => self.emitter.gamma_nr = value,
            "emitter.gamma_m" => self.emitter.gamma_m = value,
            "emitter.mu" => self.emitter.mu = Some(value),
            "couplings.g1" => self.couplings.g1 = value,
            "couplings.ga" => self.couplings.ga = value,
            "couplings.gc" => self.couplings.gc = value,
            _ => return Err(Error::UnknownParameter(path.to_string())),
        }
        Ok(())
    }

    pub fn get_path(&self, path: &str) -> Result<f64> {
        Ok(match path {
            "plasmon.omega_a" => self.plasmon.omega_a,
            "plasmon.kappa_r" => self.plasmon.kappa_r,
            "plasmon.kappa_o" => self.plasmon.kappa_o,
            "plasmon.q_a" => self.q_a(),
            "plasmon.delta_ac" => self.delta_ac(),
            "photon.omega_c" => self.photon.omega_c,
            "photon.kappa_i" => self.photon.kappa_i,
            "photon.kappa_c" => self.photon.kappa_c,
            "photon.q_c" => self.q_c(),
            "mirror.phi" => self.phi(),
            "mirror.phi_over_pi" => self.phi() / PI,
            "mirror.present" => f64::from(u8::from(self.mirror.present)),
            "emitter.omega_0" => self.emitter.omega_0,
            "emitter.gamma_0" => self.emitter.gamma_0,
            "emitter.gamma_nr" => self.emitter.gamma_nr,
            "emitter.gamma_m" => self.emitter.gamma_m,
            "emitter.mu" => self.emitter.mu.unwrap_or(0.0),
            "couplings.g1" => self.couplings.g1,
            "couplings.ga" => self.couplings.ga,
            "couplings.gc" => self.couplings.gc,
            _ => return Err(Error::UnknownParameter(path.to_string())),
        })
    }

    pub fn validated(self) -> Result<Self> {
        let report = validate(&self);
        if report.is_ok() {
            Ok(self)
        } else {
            Err(Error::Validation(report))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub path: &'static str,
    pub message: &'static str,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return f.write_str("ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{}: {}", v.path, v.message)?;
        }
        Ok(())
    }
}

pub fn validate(p: &SystemParams) -> ValidationReport {
    let mut violations = Vec::new();
    let mut check = |ok: bool, path: &'static str, message: &'static str| {
        if !ok {
            violations.push(Violation { path, message });
        }
    };
    let finite = [
        p.plasmon.omega_a,
        p.plasmon.kappa_r,
        p.plasmon.kappa_o,
        p.photon.omega_c,
        p.photon.kappa_i,
        p.photon.kappa_c,
        p.emitter.omega_0,
        p.emitter.gamma_0,
        p.emitter.gamma_nr,
        p.emitter.gamma_m,
        p.couplings.g1,
        p.couplings.ga,
        p.couplings.gc,
        p.mirror.phi(),
    ]
    .iter()
    .all(|x| x.is_finite());
    check(finite, "params", "all values must be finite");

    check(p.plasmon.omega_a > 0.0, "plasmon.omega_a", "must be positive");
    check(p.plasmon.kappa_r >= 0.0, "plasmon.kappa_r", "must be non-negative");
    check(p.plasmon.kappa_o >= 0.0, "plasmon.kappa_o", "must be non-negative");
    check(p.kappa_a() > 0.0, "plasmon.kappa_a", "kappa_a must be positive");
    check(p.photon.omega_c > 0.0, "photon.omega_c", "must be positive");
    check(p.photon.kappa_i >= 0.0, "photon.kappa_i", "must be non-negative");
    check(p.photon.kappa_c >= 0.0, "photon.kappa_c", "must be non-negative");
    check(p.kappa() > 0.0, "photon.kappa", "kappa must be positive");
    check(p.emitter.omega_0 > 0.0, "emitter.omega_0", "must be positive");
    check(p.emitter.gamma_0 >= 0.0, "emitter.gamma_0", "must be non-negative");
    check(p.emitter.gamma_nr >= 0.0, "emitter.gamma_nr", "must be non-negative");
    check(p.emitter.gamma_m >= 0.0, "emitter.gamma_m", "must be non-negative");
    if let Some(mu) = p.emitter.mu {
        check(mu.is_finite() && mu > 0.0, "emitter.mu", "must be positive when given");
    }
    ValidationReport { violations }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriveTarget {
    Emitter,
    Plasmon,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Drive {
    pub omega_l: f64,
    pub amplitude: f64,
    pub target: DriveTarget,
}

impl Drive {
    pub fn new(omega_l: f64, amplitude: f64, target: DriveTarget) -> Result<Self> {
        if !(amplitude >= 0.0) || !omega_l.is_finite() {
            return Err(Error::Domain(format!("drive amplitude {amplitude} must be non-negative")));
        }
        Ok(Drive { omega_l, amplitude, target })
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    /// Purcell-enhancement parameter set: Δ_ac = 1 eV, Q_a = 18, Q_c = 2×10³.
    pub fn fig2() -> SystemParams {
        SystemParams {
            plasmon: PlasmonMode::from_quality(2.5, 18.0, 0.0),
            photon: PhotonicMode::from_quality(1.5, 2e3, 0.0),
            mirror: MirrorConfig::new(true, 0.75 * PI),
            emitter: Emitter { omega_0: 1.5, gamma_0: 3e-6, gamma_nr: 0.0, gamma_m: 0.0, mu: Some(48.0) },
            couplings: Couplings { g1: -0.020, ga: 0.010, gc: 0.0 },
        }
    }

    /// Quantum-yield parameter set, resonant plasmon and cavity at 2 eV.
    pub fn fig5(q_c: f64, phi: f64) -> SystemParams {
        SystemParams {
            plasmon: PlasmonMode { omega_a: 2.0, kappa_r: 2.45e-3, kappa_o: 0.200 },
            photon: PhotonicMode::from_quality(2.0, q_c, 0.0),
            mirror: MirrorConfig::new(true, phi),
            emitter: Emitter { omega_0: 2.0, gamma_0: 3e-6, gamma_nr: 0.0, gamma_m: 83e-6, mu: None },
            couplings: Couplings { g1: -2.9e-3, ga: 7.2e-3, gc: 0.144e-3 },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn fig2_is_valid() {
        let p = fig2();
        assert!(validate(&p).is_ok());
        assert!((p.delta_ac() - 1.0).abs() < 1e-15);
        assert!((p.q_a() - 18.0).abs() < 1e-12);
        assert!((p.q_c() - 2e3).abs() < 1e-9);
        assert!((p.photon.kappa_c - 0.75e-3).abs() < 1e-15);
    }

    #[test]
    fn zero_plasmon_width_rejected() {
        let mut p = fig2();
        p.plasmon.kappa_r = 0.0;
        p.plasmon.kappa_o = 0.0;
        let report = validate(&p);
        assert!(report.violations.iter().any(|v| v.message == "kappa_a must be positive"));
        assert!(matches!(p.validated(), Err(Error::Validation(_))));
    }

    #[test]
    fn phase_wraps() {
        let m = MirrorConfig::new(true, TAU);
        assert_eq!(m.phi(), 0.0);
        assert_eq!(MirrorConfig::new(true, -1e-18).phi(), 0.0);
        assert!((MirrorConfig::new(true, -0.5 * PI).phi() - 1.5 * PI).abs() < 1e-15);
    }

    #[test]
    fn quality_rescaling_keeps_loss_ratio() {
        let ph = PhotonicMode { omega_c: 1.462, kappa_i: 0.387e-3, kappa_c: 0.867e-3 };
        let q = ph.with_quality(1e4);
        assert!((q.q_c() - 1e4).abs() < 1e-8);
        assert!((q.kappa_c / q.kappa_i - ph.kappa_c / ph.kappa_i).abs() < 1e-12);
    }

    #[test]
    fn paths_round_trip() {
        let mut p = fig2();
        for (path, v) in [("couplings.g1", -0.011), ("photon.q_c", 1e4), ("mirror.phi_over_pi", 0.5), ("emitter.gamma_nr", 0.015)] {
            p.set_path(path, v).unwrap();
            assert!((p.get_path(path).unwrap() - v).abs() < 1e-12 * v.abs().max(1.0));
        }
        assert!(matches!(p.set_path("couplings.g9", 1.0), Err(Error::UnknownParameter(_))));
    }

    #[test]
    fn drive_rejects_negative_amplitude() {
        assert!(Drive::new(1.0, -1.0, DriveTarget::Emitter).is_err());
        assert!(Drive::new(1.0, 0.0, DriveTarget::Plasmon).is_ok());
    }

    proptest! {
        #[test]
        fn phase_in_range(phi in -100.0f64..100.0) {
            let m = MirrorConfig::new(true, phi);
            prop_assert!(m.phi() >= 0.0 && m.phi() < TAU);
            let shifted = MirrorConfig::new(true, phi + TAU);
            prop_assert!((shifted.phi() - m.phi()).abs() < 1e-12 || (shifted.phi() - m.phi()).abs() > TAU - 1e-12);
        }

        #[test]
        fn accessors_are_pure(kr in 0.0f64..0.1, ko in 1e-4f64..0.3, ki in 0.0f64..1e-3, kc in 1e-5f64..1e-2) {
            let mut p = fig2();
            p.plasmon.kappa_r = kr;
            p.plasmon.kappa_o = ko;
            p.photon.kappa_i = ki;
            p.photon.kappa_c = kc;
            prop_assert_eq!(p.kappa_a(), kr + ko);
            prop_assert_eq!(p.kappa(), ki + kc);
            prop_assert!(validate(&p).is_ok());
        }
    }
}
