//! Refractive indices and derived dispersion quantities of a uniaxial crystal.
//!
//! Indices follow the Sellmeier form
//!
//! ```text
//! n²(λ) = A + B/(λ² − C) − D·λ² + Σᵢ Bᵢ·λ²/(λ² − Cᵢ)        (λ in µm)
//! ```
//!
//! where the resonance sum is optional. Coefficient sets are written as a flat
//! list `[A, B, C, D, B₁, C₁, B₂, C₂, …]`.
//!
//! Signal and idler are ordinary waves, the pump is an extraordinary wave at
//! the tuning angle (type I e→oo).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::SPEED_OF_LIGHT;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// One Sellmeier coefficient set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Sellmeier {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
    /// Extra `(Bᵢ, Cᵢ)` resonance terms.
    pub resonances: Vec<(f64, f64)>,
}

impl Sellmeier {
    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self {
            a,
            b,
            c,
            d,
            resonances: Vec::new(),
        }
    }

    /// n² at a vacuum wavelength given in micrometres.
    pub fn n_squared(&self, lambda_um: f64) -> f64 {
        let l2 = lambda_um * lambda_um;
        let mut n2 = self.a + self.b / (l2 - self.c) - self.d * l2;
        for &(bi, ci) in &self.resonances {
            n2 += bi * l2 / (l2 - ci);
        }
        n2
    }

    pub fn coefficients(&self) -> Vec<f64> {
        let mut v = vec![self.a, self.b, self.c, self.d];
        for &(bi, ci) in &self.resonances {
            v.push(bi);
            v.push(ci);
        }
        v
    }
}

impl TryFrom<Vec<f64>> for Sellmeier {
    type Error = String;

    fn try_from(v: Vec<f64>) -> std::result::Result<Self, Self::Error> {
        if v.len() < 4 || v.len() % 2 != 0 {
            return Err(format!(
                "expected [A, B, C, D] followed by (Bi, Ci) pairs, got {} coefficients",
                v.len()
            ));
        }
        if let Some(x) = v.iter().find(|x| !x.is_finite()) {
            return Err(format!("non-finite coefficient {x}"));
        }
        Ok(Self {
            a: v[0],
            b: v[1],
            c: v[2],
            d: v[3],
            resonances: v[4..].chunks(2).map(|p| (p[0], p[1])).collect(),
        })
    }
}

impl From<Sellmeier> for Vec<f64> {
    fn from(s: Sellmeier) -> Self {
        s.coefficients()
    }
}

/// Wavelength interval, in micrometres, where a coefficient set may be used.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct ValidityWindow {
    pub min_um: f64,
    pub max_um: f64,
}

impl ValidityWindow {
    pub fn contains_um(&self, lambda_um: f64) -> bool {
        lambda_um >= self.min_um && lambda_um <= self.max_um
    }

    fn check(&self, lambda_m: f64) -> Result<f64> {
        let um = lambda_m * 1e6;
        if self.contains_um(um) {
            Ok(um)
        } else {
            Err(Error::OutOfWindow {
                wavelength_um: um,
                min_um: self.min_um,
                max_um: self.max_um,
            })
        }
    }
}

impl TryFrom<[f64; 2]> for ValidityWindow {
    type Error = String;

    fn try_from(v: [f64; 2]) -> std::result::Result<Self, Self::Error> {
        if !(v[0] > 0.0 && v[1] > v[0] && v[1].is_finite()) {
            return Err(format!("window must satisfy 0 < min < max, got {v:?}"));
        }
        Ok(Self {
            min_um: v[0],
            max_um: v[1],
        })
    }
}

impl From<ValidityWindow> for [f64; 2] {
    fn from(w: ValidityWindow) -> Self {
        [w.min_um, w.max_um]
    }
}

/// BBO ordinary index, Eimerl et al., J. Appl. Phys. 62, 1968 (1987).
pub const BBO_ORDINARY: [f64; 4] = [2.7359, 0.01878, 0.01822, 0.01354];
/// BBO extraordinary index, same reference.
pub const BBO_EXTRAORDINARY: [f64; 4] = [2.3753, 0.01224, 0.01667, 0.01516];
/// Default central-difference step in frequency, rad/s.
pub const DEFAULT_FD_STEP: f64 = 2.0e12;

fn default_fd_step() -> f64 {
    DEFAULT_FD_STEP
}

/// Uniaxial crystal and pump wavelength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrystalConfig {
    pub sellmeier_ordinary: Sellmeier,
    pub sellmeier_extraordinary: Sellmeier,
    /// Validity window of both coefficient sets, µm.
    pub validity_um: ValidityWindow,
    /// Crystal length, m.
    pub length_lc: f64,
    /// Angle between optic axis and z, rad.
    pub tuning_angle: f64,
    /// Central pump vacuum wavelength, m.
    pub pump_wavelength: f64,
    /// Frequency step of the derivative stencils, rad/s.
    #[serde(default = "default_fd_step")]
    pub fd_step: f64,
    /// Adds the first-order pump walk-off phase ρ·q_x·l_c to the pump
    /// longitudinal wavevector.
    #[serde(default)]
    pub pump_walkoff_phase: bool,
}

impl CrystalConfig {
    /// 4 mm BBO pumped at 527.5 nm with the given tuning angle.
    pub fn bbo(tuning_angle: f64) -> Self {
        Self {
            sellmeier_ordinary: Sellmeier::try_from(BBO_ORDINARY.to_vec()).unwrap(),
            sellmeier_extraordinary: Sellmeier::try_from(BBO_EXTRAORDINARY.to_vec()).unwrap(),
            validity_um: ValidityWindow {
                min_um: 0.19,
                max_um: 3.5,
            },
            length_lc: 4.0e-3,
            tuning_angle,
            pump_wavelength: 527.5e-9,
            fd_step: DEFAULT_FD_STEP,
            pump_walkoff_phase: false,
        }
    }

    pub fn with_tuning_angle(&self, tuning_angle: f64) -> Self {
        Self {
            tuning_angle,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.length_lc > 0.0 && self.length_lc.is_finite()) {
            return Err(Error::validation("length_lc", "must be > 0"));
        }
        if !(self.tuning_angle > 0.0 && self.tuning_angle < std::f64::consts::FRAC_PI_2) {
            return Err(Error::validation(
                "tuning_angle",
                "must lie strictly between 0 and π/2",
            ));
        }
        if !(self.pump_wavelength > 0.0 && self.pump_wavelength.is_finite()) {
            return Err(Error::validation("pump_wavelength", "must be > 0"));
        }
        if !(self.fd_step > 0.0 && self.fd_step.is_finite()) {
            return Err(Error::validation("fd_step", "must be > 0"));
        }
        let w = self.validity_um;
        for i in 0..=64 {
            let um = w.min_um + (w.max_um - w.min_um) * i as f64 / 64.0;
            for (name, set) in [
                ("sellmeier_ordinary", &self.sellmeier_ordinary),
                ("sellmeier_extraordinary", &self.sellmeier_extraordinary),
            ] {
                let n2 = set.n_squared(um);
                if !(n2 > 1.0 && n2.is_finite()) {
                    return Err(Error::validation(
                        name,
                        format!("n² = {n2} ≤ 1 at {um:.4} µm inside the validity window"),
                    ));
                }
            }
        }
        if !w.contains_um(self.pump_wavelength * 1e6)
            || !w.contains_um(2.0 * self.pump_wavelength * 1e6)
        {
            return Err(Error::validation(
                "pump_wavelength",
                "pump and degenerate signal wavelengths must lie inside the validity window",
            ));
        }
        Ok(())
    }

    /// Central pump angular frequency ω_p, rad/s.
    pub fn pump_omega(&self) -> f64 {
        TWO_PI * SPEED_OF_LIGHT / self.pump_wavelength
    }

    pub fn index_ordinary(&self, lambda: f64) -> Result<f64> {
        let um = self.validity_um.check(lambda)?;
        Ok(self.sellmeier_ordinary.n_squared(um).sqrt())
    }

    /// Principal extraordinary index n_e(λ) (propagation normal to the optic axis).
    pub fn index_principal_extraordinary(&self, lambda: f64) -> Result<f64> {
        let um = self.validity_um.check(lambda)?;
        Ok(self.sellmeier_extraordinary.n_squared(um).sqrt())
    }

    /// Extraordinary index for propagation at `theta` to the optic axis:
    /// 1/n² = cos²θ/n_o² + sin²θ/n_e².
    pub fn index_extraordinary(&self, lambda: f64, theta: f64) -> Result<f64> {
        if !(0.0..=std::f64::consts::FRAC_PI_2).contains(&theta) {
            return Err(Error::Domain(format!("theta = {theta} outside [0, π/2]")));
        }
        let um = self.validity_um.check(lambda)?;
        let no2 = self.sellmeier_ordinary.n_squared(um);
        let ne2 = self.sellmeier_extraordinary.n_squared(um);
        let (s, c) = theta.sin_cos();
        // exact endpoints
        if s == 0.0 {
            return Ok(no2.sqrt());
        }
        if theta == std::f64::consts::FRAC_PI_2 {
            return Ok(ne2.sqrt());
        }
        Ok((c * c / no2 + s * s / ne2).sqrt().recip())
    }

    /// Signal wavenumber k_s(Ω) at frequency ω_p/2 + Ω (ordinary wave), rad/m.
    pub fn signal_wavenumber(&self, omega_shift: f64) -> Result<f64> {
        let omega = 0.5 * self.pump_omega() + omega_shift;
        if omega <= 0.0 {
            return Err(Error::Domain(format!(
                "signal frequency ω_p/2 + Ω = {omega:.4e} rad/s is not positive"
            )));
        }
        let n = self.index_ordinary(TWO_PI * SPEED_OF_LIGHT / omega)?;
        Ok(n * omega / SPEED_OF_LIGHT)
    }

    /// Extraordinary pump wavenumber at frequency ω_p + Ω_p and the fixed
    /// tuning angle, rad/m.
    pub fn pump_wavenumber_at(&self, omega_shift: f64) -> Result<f64> {
        let omega = self.pump_omega() + omega_shift;
        if omega <= 0.0 {
            return Err(Error::Domain(format!(
                "pump frequency ω_p + Ω = {omega:.4e} rad/s is not positive"
            )));
        }
        let n = self.index_extraordinary(TWO_PI * SPEED_OF_LIGHT / omega, self.tuning_angle)?;
        Ok(n * omega / SPEED_OF_LIGHT)
    }

    /// k_p at the central pump frequency.
    pub fn pump_wavenumber(&self) -> Result<f64> {
        self.pump_wavenumber_at(0.0)
    }

    /// Group velocity and GVD of the signal at Ω with the configured stencil step.
    pub fn group_quantities(&self, omega_shift: f64) -> Result<DispersionSample> {
        self.group_quantities_with_step(omega_shift, self.fd_step)
    }

    /// As [`Self::group_quantities`] with an explicit stencil step (rad/s).
    pub fn group_quantities_with_step(&self, omega_shift: f64, step: f64) -> Result<DispersionSample> {
        let k = self.signal_wavenumber(omega_shift)?;
        let (d1, d2) = five_point(|w| self.signal_wavenumber(w), omega_shift, step)?;
        Ok(DispersionSample {
            omega_shift,
            k_signal: k,
            group_velocity: d1.recip(),
            gvd: d2,
        })
    }

    /// Inverse pump group velocity dk_p/dω at fixed tuning angle, s/m.
    pub fn pump_inverse_group_velocity(&self) -> Result<f64> {
        let (d1, _) = five_point(|w| self.pump_wavenumber_at(w), 0.0, self.fd_step)?;
        Ok(d1)
    }

    /// Poynting-vector walk-off angle ρ of the extraordinary pump, rad.
    pub fn pump_walkoff_angle(&self) -> Result<f64> {
        let theta = self.tuning_angle;
        let no = self.index_ordinary(self.pump_wavelength)?;
        let ne = self.index_principal_extraordinary(self.pump_wavelength)?;
        let n_theta = self.index_extraordinary(self.pump_wavelength, theta)?;
        let tan_rho = 0.5 * n_theta * n_theta * (ne.powi(-2) - no.powi(-2)) * (2.0 * theta).sin();
        Ok(tan_rho.atan())
    }

    /// Group-velocity-mismatch delay and spatial walk-off accumulated over the
    /// crystal length.
    pub fn walkoff_metrics(&self) -> Result<WalkoffMetrics> {
        let signal = self.group_quantities(0.0)?;
        let inv_vp = self.pump_inverse_group_velocity()?;
        let rho = self.pump_walkoff_angle()?;
        Ok(WalkoffMetrics {
            gvm_delay: self.length_lc * (inv_vp - signal.group_velocity.recip()).abs(),
            spatial_walkoff: self.length_lc * rho.tan().abs(),
            walkoff_angle: rho,
        })
    }
}

/// Fourth-order central differences for the first and second derivative.
fn five_point<F: Fn(f64) -> Result<f64>>(f: F, x: f64, h: f64) -> Result<(f64, f64)> {
    let fm2 = f(x - 2.0 * h)?;
    let fm1 = f(x - h)?;
    let f0 = f(x)?;
    let fp1 = f(x + h)?;
    let fp2 = f(x + 2.0 * h)?;
    let d1 = (fm2 - 8.0 * fm1 + 8.0 * fp1 - fp2) / (12.0 * h);
    let d2 = (-fm2 + 16.0 * fm1 - 30.0 * f0 + 16.0 * fp1 - fp2) / (12.0 * h * h);
    Ok((d1, d2))
}

/// Signal dispersion at one frequency offset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DispersionSample {
    /// Ω, rad/s.
    pub omega_shift: f64,
    /// k_s(Ω), rad/m.
    pub k_signal: f64,
    /// v_g(Ω) = (dk_s/dΩ)⁻¹, m/s.
    pub group_velocity: f64,
    /// k''_s(Ω), s²/m.
    pub gvd: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WalkoffMetrics {
    /// l_c·|1/v_g,p − 1/v_g,s|, s.
    pub gvm_delay: f64,
    /// l_c·tan ρ, m.
    pub spatial_walkoff: f64,
    /// ρ, rad.
    pub walkoff_angle: f64,
}
