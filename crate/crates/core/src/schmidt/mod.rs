//! Schmidt number `K = N²/B` of the twin-photon state.
//!
//! ```text
//! N = ∫dw₁dw₂ |ψ̃(w₁,w₂)|²
//! B = ∫dw₁dw₂dw₃dw₄ ψ̃(w₁,w₂) ψ̃(w₃,w₄) ψ̃*(w₁,w₄) ψ̃*(w₃,w₂)
//! ```
//!
//! Integrals run over a filter box. In the restricted models some coordinates
//! are frozen: `Spatial2d` fixes the frequency, `Temporal1d` fixes the
//! transverse wavevector of photon 1 at `(q_fix, 0)` and of photon 2 at
//! `(−q_fix, 0)`.

mod mc;
mod oracle;
mod sweep;

pub use mc::{MIN_SAMPLES_NORM, MIN_SAMPLES_PURITY, mc_norm, mc_purity, schmidt_number, McEstimate, MonteCarlo, SchmidtEstimate};
pub use oracle::{direct_domain_singular_values, svd_oracle, symmetric_oracle, OracleGrid, OracleResult, QuadratureRule};
pub use sweep::{bandwidth_sweep, frozen_q_candidates, FrozenQ, SweepCell, SweepPlan, SweepResult, SweepRow};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::correlation::PumpConfig;
use crate::dispersion::CrystalConfig;
use crate::error::{Error, Result};
use crate::math::sinc;
use crate::phasematch::FourierCoord;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Full3d,
    Spatial2d,
    Temporal1d,
}

impl Model {
    pub const ALL: [Model; 3] = [Model::Full3d, Model::Spatial2d, Model::Temporal1d];

    /// Free real coordinates per photon.
    pub fn dims(self) -> usize {
        match self {
            Model::Full3d => 3,
            Model::Spatial2d => 2,
            Model::Temporal1d => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Model::Full3d => "full3d",
            Model::Spatial2d => "spatial2d",
            Model::Temporal1d => "temporal1d",
        }
    }
}

/// Free coordinates of one photon; only the first `Model::dims` entries are used.
pub type Free = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Photon {
    First,
    Second,
}

/// Detection filter: `|q_x|, |q_y| ≤ q_max`, `|Ω| ≤ omega_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandwidthFilter {
    /// rad/m
    pub q_max: f64,
    /// rad/s
    pub omega_max: f64,
    pub model: Model,
    /// |q| of the frozen transverse wavevector in `Temporal1d`, rad/m.
    #[serde(default)]
    pub fixed_q_for_1d: f64,
    /// Frozen frequency of photon 1 in `Spatial2d` (photon 2 sits at its
    /// negative), rad/s.
    #[serde(default)]
    pub fixed_omega_for_2d: f64,
}

impl BandwidthFilter {
    pub fn new(q_max: f64, omega_max: f64, model: Model) -> Self {
        Self {
            q_max,
            omega_max,
            model,
            fixed_q_for_1d: 0.0,
            fixed_omega_for_2d: 0.0,
        }
    }

    pub fn with_model(&self, model: Model) -> Self {
        Self {
            model,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q_max > 0.0 && self.q_max.is_finite()) {
            return Err(Error::validation("q_max", "must be > 0 (zero-measure filter)"));
        }
        if !(self.omega_max > 0.0 && self.omega_max.is_finite()) {
            return Err(Error::validation("omega_max", "must be > 0 (zero-measure filter)"));
        }
        if !(self.fixed_q_for_1d >= 0.0 && self.fixed_q_for_1d.is_finite()) {
            return Err(Error::validation("fixed_q_for_1d", "must be ≥ 0"));
        }
        if !self.fixed_omega_for_2d.is_finite() {
            return Err(Error::validation("fixed_omega_for_2d", "must be finite"));
        }
        Ok(())
    }

    /// Half-widths of the box in the free coordinates.
    pub fn half_widths(&self) -> Free {
        match self.model {
            Model::Full3d => [self.q_max, self.q_max, self.omega_max],
            Model::Spatial2d => [self.q_max, self.q_max, 0.0],
            Model::Temporal1d => [self.omega_max, 0.0, 0.0],
        }
    }

    /// Single-photon box volume in the free coordinates.
    pub fn volume(&self) -> f64 {
        let h = self.half_widths();
        (0..self.model.dims()).map(|i| 2.0 * h[i]).product()
    }

    pub fn contains(&self, f: &Free) -> bool {
        let h = self.half_widths();
        (0..self.model.dims()).all(|i| f[i].abs() <= h[i])
    }

    /// Full Fourier coordinate of a photon from its free coordinates.
    pub fn coord(&self, f: &Free, photon: Photon) -> FourierCoord {
        let sign = match photon {
            Photon::First => 1.0,
            Photon::Second => -1.0,
        };
        match self.model {
            Model::Full3d => FourierCoord::new(f[0], f[1], f[2]),
            Model::Spatial2d => FourierCoord::new(f[0], f[1], sign * self.fixed_omega_for_2d),
            Model::Temporal1d => FourierCoord::new(sign * self.fixed_q_for_1d, 0.0, f[0]),
        }
    }
}

/// Gaussian bound of |ψ̃| in the pair-sum coordinate:
/// `|ψ̃| ∝ exp(−|s_q|²/(2σ_q²) − s_Ω²/(2σ_Ω²))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SumEnvelope {
    pub sigma_q: f64,
    pub sigma_omega: f64,
}

impl SumEnvelope {
    /// Standard deviations in the free coordinates of `model`.
    pub fn sigmas(&self, model: Model) -> Free {
        match model {
            Model::Full3d => [self.sigma_q, self.sigma_q, self.sigma_omega],
            Model::Spatial2d => [self.sigma_q, self.sigma_q, 0.0],
            Model::Temporal1d => [self.sigma_omega, 0.0, 0.0],
        }
    }
}

/// Two-photon amplitude in Fourier space.
pub trait Amplitude: Sync {
    fn amplitude(&self, w1: FourierCoord, w2: FourierCoord) -> Complex64;

    /// Envelope used to importance-sample the pair-sum coordinate; `None`
    /// selects plain uniform sampling.
    fn sum_envelope(&self) -> Option<SumEnvelope> {
        None
    }

    /// True when ψ̃ is unchanged by reflecting both photons' transverse
    /// wavevectors in `q_x`, in `q_y`, or by swapping `q_x ↔ q_y` for both.
    fn mirror_symmetric(&self) -> bool {
        false
    }
}

/// ψ̃ of the down-converted pair with a Gaussian pump.
#[derive(Debug, Clone)]
pub struct PdcAmplitude {
    crystal: CrystalConfig,
    pump: PumpConfig,
    prefactor: f64,
    rho: f64,
}

impl PdcAmplitude {
    pub fn new(crystal: &CrystalConfig, pump: &PumpConfig) -> Result<Self> {
        crystal.validate()?;
        pump.validate()?;
        Ok(Self {
            crystal: crystal.clone(),
            pump: pump.clone(),
            prefactor: pump.coupling_g / TWO_PI.powf(1.5),
            rho: if crystal.pump_walkoff_phase {
                crystal.pump_walkoff_angle()?
            } else {
                0.0
            },
        })
    }

    /// Checks that every coordinate reachable inside `filter` propagates and
    /// lies in the dispersion window.
    pub fn check_filter(&self, filter: &BandwidthFilter) -> Result<()> {
        filter.validate()?;
        let (q, w) = match filter.model {
            Model::Full3d => (std::f64::consts::SQRT_2 * filter.q_max, filter.omega_max),
            Model::Spatial2d => (
                std::f64::consts::SQRT_2 * filter.q_max,
                filter.fixed_omega_for_2d.abs(),
            ),
            Model::Temporal1d => (filter.fixed_q_for_1d, filter.omega_max),
        };
        for sign in [1.0, -1.0] {
            crate::phasematch::kz_signal(FourierCoord::new(q, 0.0, sign * w), &self.crystal)?;
            self.crystal.pump_wavenumber_at(2.0 * sign * w)?;
        }
        Ok(())
    }

    fn try_amplitude(&self, w1: FourierCoord, w2: FourierCoord) -> Result<Complex64> {
        let c = &self.crystal;
        let z1 = crate::phasematch::kz_signal(w1, c)?;
        let z2 = crate::phasematch::kz_signal(w2, c)?;
        let s = w1 + w2;
        let kp = c.pump_wavenumber_at(s.omega_shift)?;
        let kpz = (kp * kp - s.q_squared()).sqrt();
        let delta = (z1 + z2 - (kpz - self.rho * s.qx)) * c.length_lc;
        let amp = self.prefactor * self.pump.spectrum(s.q_squared(), s.omega_shift);
        Ok(Complex64::from_polar(
            amp * sinc(0.5 * delta),
            kpz * c.length_lc + 0.5 * delta,
        ))
    }
}

impl Amplitude for PdcAmplitude {
    /// Evanescent or out-of-window coordinates give 0.
    fn amplitude(&self, w1: FourierCoord, w2: FourierCoord) -> Complex64 {
        self.try_amplitude(w1, w2).unwrap_or(Complex64::new(0.0, 0.0))
    }

    fn sum_envelope(&self) -> Option<SumEnvelope> {
        Some(SumEnvelope {
            sigma_q: std::f64::consts::SQRT_2 / self.pump.waist,
            sigma_omega: std::f64::consts::SQRT_2 / self.pump.duration,
        })
    }

    fn mirror_symmetric(&self) -> bool {
        self.rho == 0.0
    }
}

/// ψ̃ evaluated at the free coordinates of both photons under `filter`'s model.
pub fn restricted_kernel<A: Amplitude + ?Sized>(
    filter: &BandwidthFilter,
    amplitude: &A,
    photon1: &Free,
    photon2: &Free,
) -> Complex64 {
    amplitude.amplitude(
        filter.coord(photon1, Photon::First),
        filter.coord(photon2, Photon::Second),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::biphoton_fourier;
    use crate::phasematch::{delta_pw, q_pm, tune_collinear};

    fn collinear() -> CrystalConfig {
        let c = CrystalConfig::bbo(0.4);
        c.with_tuning_angle(tune_collinear(&c).unwrap().unwrap())
    }

    #[test]
    fn fast_amplitude_matches_reference() {
        let c = CrystalConfig::bbo(28f64.to_radians());
        let p = PumpConfig::default();
        let a = PdcAmplitude::new(&c, &p).unwrap();
        let w1 = FourierCoord::new(3e5, -2e5, 4e13);
        let w2 = FourierCoord::new(-2.9e5, 2.1e5, -3.9e13);
        let r = biphoton_fourier(w1, w2, &c, &p).unwrap();
        assert!((a.amplitude(w1, w2) - r).norm() <= 1e-12 * r.norm());
    }

    #[test]
    fn spatial_model_is_full_model_at_zero_frequency() {
        let c = collinear();
        let a = PdcAmplitude::new(&c, &PumpConfig::default()).unwrap();
        let f3 = BandwidthFilter::new(1.2e6, 1e14, Model::Full3d);
        let f2 = f3.with_model(Model::Spatial2d);
        let (p, q) = ([1e5, -2e5, 0.0], [-1e5, 2.1e5, 0.0]);
        assert_eq!(restricted_kernel(&f2, &a, &p, &q), restricted_kernel(&f3, &a, &p, &q));
    }

    #[test]
    fn temporal_model_on_axis_peak() {
        let c = collinear();
        let pump = PumpConfig::default();
        let a = PdcAmplitude::new(&c, &pump).unwrap();
        let f = BandwidthFilter::new(1.2e6, 1e14, Model::Temporal1d);
        let k = restricted_kernel(&f, &a, &[0.0; 3], &[0.0; 3]);
        let peak = pump.coupling_g / TWO_PI.powf(1.5) * pump.spectrum(0.0, 0.0);
        let d0 = delta_pw(0.0, 0.0, &c).unwrap();
        assert!((k.norm() - peak * sinc(0.5 * d0)).abs() < 1e-12 * peak);
        assert!((k.norm() - peak).abs() < 1e-6 * peak);
    }

    #[test]
    fn noncollinear_frozen_q_is_on_curve() {
        let c = CrystalConfig::bbo(28f64.to_radians());
        let q0 = q_pm(0.0, &c).unwrap().unwrap();
        assert!(delta_pw(q0, 0.0, &c).unwrap().abs() < 1e-6);
        let t = crate::phasematch::taylor_coefficients(&c).unwrap();
        let approx = (t.ks * t.delta0 / c.length_lc).sqrt();
        assert!(delta_pw(approx, 0.0, &c).unwrap().abs() < 0.05 * t.delta0);
    }

    #[test]
    fn filter_validation_and_volume() {
        let f = BandwidthFilter::new(2.0, 3.0, Model::Full3d);
        assert_eq!(f.volume(), 4.0 * 4.0 * 6.0);
        assert_eq!(f.with_model(Model::Temporal1d).volume(), 6.0);
        assert!(BandwidthFilter::new(0.0, 1.0, Model::Full3d).validate().is_err());
    }
}
