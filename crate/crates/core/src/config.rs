//! Run configuration: a TOML file with one table per component.
//!
//! ```toml
//! [crystal]
//! sellmeier_ordinary = [2.7359, 0.01878, 0.01822, 0.01354]
//! sellmeier_extraordinary = [2.3753, 0.01224, 0.01667, 0.01516]
//! validity_um = [0.19, 3.5]
//! length_lc = 4e-3
//! tuning_angle_deg = "collinear"   # or a number
//! pump_wavelength = 527.5e-9
//!
//! [pump]     # optional, defaults shown by `dump`
//! [grid]     # correlation map
//! [curve]    # phase-matching curve samples
//! [filter]   # Schmidt sweep
//! [mc]
//! [output]
//! ```
//!
//! All quantities are SI except `tuning_angle_deg` and `validity_um`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::correlation::{MapMode, PumpConfig, SpectralGrid};
use crate::dispersion::{CrystalConfig, Sellmeier, ValidityWindow, DEFAULT_FD_STEP};
use crate::error::{Error, Result};
use crate::phasematch;
use crate::schmidt::{MonteCarlo, SweepPlan, MIN_SAMPLES_PURITY};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TuningAngle {
    Degrees(f64),
    /// `"collinear"`: solved for Δ0 = 0 at load time.
    Named(String),
}

fn default_fd_step() -> f64 {
    DEFAULT_FD_STEP
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrystalSection {
    pub sellmeier_ordinary: Sellmeier,
    pub sellmeier_extraordinary: Sellmeier,
    pub validity_um: ValidityWindow,
    pub length_lc: f64,
    pub tuning_angle_deg: TuningAngle,
    pub pump_wavelength: f64,
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    #[serde(default)]
    pub pump_walkoff_phase: bool,
}

impl CrystalSection {
    fn with_angle(&self, rad: f64) -> CrystalConfig {
        CrystalConfig {
            sellmeier_ordinary: self.sellmeier_ordinary.clone(),
            sellmeier_extraordinary: self.sellmeier_extraordinary.clone(),
            validity_um: self.validity_um,
            length_lc: self.length_lc,
            tuning_angle: rad,
            pump_wavelength: self.pump_wavelength,
            fd_step: self.fd_step,
            pump_walkoff_phase: self.pump_walkoff_phase,
        }
    }

    /// Replaces a named angle by its numeric value.
    fn resolve(&mut self) -> Result<()> {
        if let TuningAngle::Named(name) = &self.tuning_angle_deg {
            if name != "collinear" {
                return Err(Error::validation(
                    "crystal.tuning_angle_deg",
                    format!("expected a number or \"collinear\", got \"{name}\""),
                ));
            }
            // any admissible angle works as a template; only the angle changes
            let template = self.with_angle(0.5);
            let rad = phasematch::tune_collinear(&template)
                .map_err(|e| prefix("crystal", e))?
                .ok_or_else(|| {
                    Error::validation("crystal.tuning_angle_deg", "no collinear angle exists for this crystal")
                })?;
            self.tuning_angle_deg = TuningAngle::Degrees(rad.to_degrees());
        }
        Ok(())
    }

    pub fn crystal(&self) -> Result<CrystalConfig> {
        match self.tuning_angle_deg {
            TuningAngle::Degrees(d) => Ok(self.with_angle(d.to_radians())),
            TuningAngle::Named(_) => Err(Error::validation("crystal.tuning_angle_deg", "unresolved")),
        }
    }
}

fn default_n_q() -> usize {
    1024
}
fn default_n_omega() -> usize {
    1024
}
fn default_map_omega_extent() -> f64 {
    3.1e14
}

/// Correlation-map grid; `q_extent` defaults to twice the curve extent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "default_n_q")]
    pub n_q: usize,
    #[serde(default = "default_n_omega")]
    pub n_omega: usize,
    #[serde(default = "default_map_omega_extent")]
    pub omega_extent: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_extent: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_qy: Option<usize>,
    #[serde(default)]
    pub mode: MapMode,
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            n_q: default_n_q(),
            n_omega: default_n_omega(),
            omega_extent: default_map_omega_extent(),
            q_extent: None,
            n_qy: None,
            mode: MapMode::default(),
        }
    }
}

impl GridSection {
    pub fn spectral_grid(&self, crystal: &CrystalConfig) -> Result<SpectralGrid> {
        let mut g = match self.q_extent {
            Some(q_extent) => SpectralGrid {
                n_q: self.n_q,
                q_extent,
                n_qy: None,
                n_omega: self.n_omega,
                omega_extent: self.omega_extent,
            },
            None => SpectralGrid::covering_curve(crystal, self.n_q, self.n_omega, self.omega_extent)?,
        };
        g.n_qy = self.n_qy;
        g.validate().map_err(|e| prefix("grid", e))?;
        Ok(g)
    }
}

fn default_curve_range() -> [f64; 2] {
    [-5e14, 5e14]
}
fn default_curve_samples() -> usize {
    401
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CurveSection {
    /// rad/s
    #[serde(default = "default_curve_range")]
    pub omega_range: [f64; 2],
    #[serde(default = "default_curve_samples")]
    pub n_samples: usize,
}

impl Default for CurveSection {
    fn default() -> Self {
        Self {
            omega_range: default_curve_range(),
            n_samples: default_curve_samples(),
        }
    }
}

fn default_filter() -> SweepPlan {
    SweepPlan {
        q_max: 1.2e6,
        omega_max: vec![1e13, 3e13, 1e14, 1.5e14, 2e14, 3e14, 5e14, 1e15],
        fixed_q_for_1d: None,
    }
}

fn default_mc() -> MonteCarlo {
    MonteCarlo::new(10_000_000, 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub crystal: CrystalSection,
    #[serde(default)]
    pub pump: PumpConfig,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub curve: CurveSection,
    #[serde(default = "default_filter")]
    pub filter: SweepPlan,
    #[serde(default = "default_mc")]
    pub mc: MonteCarlo,
    #[serde(default)]
    pub output: OutputSection,
}

fn prefix(section: &str, e: Error) -> Error {
    match e {
        Error::Validation { field, reason } => Error::Validation {
            field: format!("{section}.{field}"),
            reason,
        },
        other => other,
    }
}

fn line_col(src: &str, offset: usize) -> (usize, usize) {
    let before = &src[..offset.min(src.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, col)
}

impl RunConfig {
    /// Parses, resolves named angles, and validates.
    pub fn from_toml(src: &str, path: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(src).map_err(|e| {
            let message = match e.span() {
                Some(span) => {
                    let (l, c) = line_col(src, span.start);
                    format!("line {l}, column {c}: {}", e.message())
                }
                None => e.message().to_string(),
            };
            Error::Parse {
                path: path.to_path_buf(),
                message,
            }
        })?;
        cfg.crystal.resolve()?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let crystal = self.crystal.crystal()?;
        crystal.validate().map_err(|e| prefix("crystal", e))?;
        self.pump.validate().map_err(|e| prefix("pump", e))?;
        self.grid.spectral_grid(&crystal)?;
        let [lo, hi] = self.curve.omega_range;
        if !(lo < hi && lo.is_finite() && hi.is_finite()) {
            return Err(Error::validation("curve.omega_range", "needs lo < hi"));
        }
        if self.curve.n_samples < 2 {
            return Err(Error::validation("curve.n_samples", "must be ≥ 2"));
        }
        self.filter.validate().map_err(|e| prefix("filter", e))?;
        self.mc.validate().map_err(|e| prefix("mc", e))?;
        if self.mc.samples < MIN_SAMPLES_PURITY {
            return Err(Error::validation(
                "mc.samples",
                format!("must be ≥ {MIN_SAMPLES_PURITY}"),
            ));
        }
        Ok(())
    }

    pub fn crystal(&self) -> CrystalConfig {
        self.crystal
            .crystal()
            .expect("validated configs carry a numeric tuning angle")
    }

    /// Resolved configuration with every default written out.
    pub fn dump(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    RunConfig::from_toml(&src, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[crystal]
sellmeier_ordinary = [2.7359, 0.01878, 0.01822, 0.01354]
sellmeier_extraordinary = [2.3753, 0.01224, 0.01667, 0.01516]
validity_um = [0.19, 3.5]
length_lc = 4e-3
tuning_angle_deg = 28.0
pump_wavelength = 527.5e-9
"#;

    fn parse(s: &str) -> Result<RunConfig> {
        RunConfig::from_toml(s, Path::new("test.cfg"))
    }

    #[test]
    fn defaults_are_filled_and_echoed() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(c.pump.waist, 600e-6);
        assert_eq!(c.pump.duration, 1e-12);
        assert_eq!(c.filter.q_max, 1.2e6);
        assert_eq!(c.mc.samples, 10_000_000);
        let dump = c.dump();
        assert!(dump.contains("waist = 0.0006"), "{dump}");
        assert!(dump.contains("[mc]"));
    }

    #[test]
    fn dump_round_trips() {
        let c = parse(&MINIMAL.replace("28.0", "\"collinear\"")).unwrap();
        assert!(matches!(c.crystal.tuning_angle_deg, TuningAngle::Degrees(_)));
        let again = parse(&c.dump()).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn collinear_keyword_resolves_near_22_9_degrees() {
        let c = parse(&MINIMAL.replace("28.0", "\"collinear\"")).unwrap();
        let TuningAngle::Degrees(d) = c.crystal.tuning_angle_deg else { panic!() };
        assert!((d - 22.9).abs() < 0.5, "{d}");
        assert!(parse(&MINIMAL.replace("28.0", "\"sideways\"")).is_err());
    }

    #[test]
    fn negative_length_names_the_field() {
        match parse(&MINIMAL.replace("4e-3", "-4e-3")) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "crystal.length_lc"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unknown_key_reports_location() {
        let src = format!("{MINIMAL}\n[pump]\nwasit = 1e-3\n");
        match parse(&src) {
            Err(Error::Parse { message, .. }) => {
                assert!(message.contains("line 11"), "{message}");
                assert!(message.contains("wasit"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn syntax_error_reports_location() {
        match parse("[crystal\nlength_lc = 1") {
            Err(Error::Parse { message, .. }) => assert!(message.starts_with("line 1"), "{message}"),
            other => panic!("{other:?}"),
        }
    }
}
