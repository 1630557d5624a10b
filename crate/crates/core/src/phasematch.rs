//! Phase mismatch, the phase-matching curve `q_pm(Ω)` and the classical
//! wave-packet relation `Δt = Δr·q'_pm`.
//!
//! Mismatches are dimensionless (multiplied by the crystal length). Signal and
//! idler are written as `w = (q, Ω)` with `Ω` measured from `ω_p/2`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dispersion::CrystalConfig;
use crate::error::{Error, Result};
use crate::math::bisect;

/// Largest accepted |Δ_pw| at a curve sample.
pub const PM_TOLERANCE: f64 = 1e-6;
/// Bisection iteration cap.
pub const PM_MAX_ITER: usize = 200;
/// Tolerance on |Δ0| at the collinear tuning angle.
pub const TUNE_TOLERANCE: f64 = 1e-3;

/// Spatio-temporal Fourier coordinate `w = (q_x, q_y, Ω)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FourierCoord {
    /// rad/m
    pub qx: f64,
    /// rad/m
    pub qy: f64,
    /// rad/s
    pub omega_shift: f64,
}

impl FourierCoord {
    pub const fn new(qx: f64, qy: f64, omega_shift: f64) -> Self {
        Self { qx, qy, omega_shift }
    }

    pub fn q_squared(&self) -> f64 {
        self.qx * self.qx + self.qy * self.qy
    }

    pub fn q(&self) -> f64 {
        self.q_squared().sqrt()
    }
}

impl std::ops::Neg for FourierCoord {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.qx, -self.qy, -self.omega_shift)
    }
}

impl std::ops::Add for FourierCoord {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.qx + o.qx, self.qy + o.qy, self.omega_shift + o.omega_shift)
    }
}

fn longitudinal(k: f64, q2: f64, omega: f64) -> Result<f64> {
    let kz2 = k * k - q2;
    if kz2 > 0.0 {
        Ok(kz2.sqrt())
    } else {
        Err(Error::Evanescent {
            q: q2.sqrt(),
            omega,
            k,
        })
    }
}

/// `k_sz(w) = √(k_s(Ω)² − q²)`.
pub fn kz_signal(coord: FourierCoord, crystal: &CrystalConfig) -> Result<f64> {
    let k = crystal.signal_wavenumber(coord.omega_shift)?;
    longitudinal(k, coord.q_squared(), coord.omega_shift)
}

/// Plane-wave-pump mismatch `Δ_pw(q, Ω) = [k_sz(q, Ω) + k_sz(q, −Ω) − k_p]·l_c`.
pub fn delta_pw(q: f64, omega_shift: f64, crystal: &CrystalConfig) -> Result<f64> {
    let q2 = q * q;
    let kp = crystal.signal_wavenumber(omega_shift)?;
    let km = crystal.signal_wavenumber(-omega_shift)?;
    let zp = longitudinal(kp, q2, omega_shift)?;
    let zm = longitudinal(km, q2, -omega_shift)?;
    Ok((zp + zm - crystal.pump_wavenumber()?) * crystal.length_lc)
}

/// Two-mode mismatch `Δ(w₁, w₂) = [k_sz(w₁) + k_sz(w₂) − k_pz(w₁ + w₂)]·l_c`.
///
/// `k_pz(q, Ω) = √(k_p(Ω)² − q²)` uses the extraordinary index at the fixed
/// tuning angle. With `pump_walkoff_phase` set, the first-order walk-off term
/// `ρ·q_x` is subtracted from `k_pz` (optic axis in the x–z plane).
pub fn delta_full(w1: FourierCoord, w2: FourierCoord, crystal: &CrystalConfig) -> Result<f64> {
    let z1 = kz_signal(w1, crystal)?;
    let z2 = kz_signal(w2, crystal)?;
    let s = w1 + w2;
    let kp = crystal.pump_wavenumber_at(s.omega_shift)?;
    let mut kpz = longitudinal(kp, s.q_squared(), s.omega_shift)?;
    if crystal.pump_walkoff_phase {
        kpz -= crystal.pump_walkoff_angle()? * s.qx;
    }
    Ok((z1 + z2 - kpz) * crystal.length_lc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Collinear,
    Noncollinear,
    Mixed,
}

/// Slopes on either side of the degenerate sample `Ω = 0`, where the collinear
/// curve has a kink.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DegenerateSlopes {
    pub index: usize,
    pub minus: f64,
    pub plus: f64,
}

/// Sampled phase-matching curve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseMatchCurve {
    /// rad/s
    pub omega: Vec<f64>,
    /// rad/m; `None` where Δ_pw has no root.
    pub q_pm: Vec<Option<f64>>,
    /// dq_pm/dΩ, s/m. At the degenerate sample this holds the right-hand slope.
    pub slope: Vec<Option<f64>>,
    pub degenerate: Option<DegenerateSlopes>,
    pub regime: Regime,
    pub delta0: f64,
}

impl PhaseMatchCurve {
    pub fn is_empty(&self) -> bool {
        self.q_pm.iter().all(Option::is_none)
    }

    /// Samples with a root, as `(Ω, q_pm, slope)`.
    pub fn points(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.omega
            .iter()
            .zip(&self.q_pm)
            .zip(&self.slope)
            .filter_map(|((&w, q), s)| Some((w, (*q)?, (*s)?)))
    }
}

/// Root of Δ_pw(·, Ω) on `[0, q_ceiling)`, or `None` when there is none.
pub fn q_pm(omega_shift: f64, crystal: &CrystalConfig) -> Result<Option<f64>> {
    let kp = crystal.signal_wavenumber(omega_shift)?;
    let km = crystal.signal_wavenumber(-omega_shift)?;
    let ceiling = kp.min(km) * (1.0 - 1e-12);
    let f = |q: f64| delta_pw(q, omega_shift, crystal).unwrap_or(f64::NAN);
    let d0 = f(0.0);
    if d0.abs() < PM_TOLERANCE {
        return Ok(Some(0.0));
    }
    // Run to bracket collapse; the published tolerance is only the acceptance test.
    match bisect(f, 0.0, ceiling, 0.0, PM_MAX_ITER) {
        Some(r) if r.f.abs() < PM_TOLERANCE => Ok(Some(r.x)),
        _ => Ok(None),
    }
}

/// dq_pm/dΩ by fourth-order differences with step `crystal.fd_step`.
///
/// A stencil that would straddle `Ω = 0` is replaced by a one-sided one on the
/// side of `direction` (`+1` or `−1`), so the kink of the collinear curve is
/// never differenced across.
fn slope_at(omega: f64, direction: f64, crystal: &CrystalConfig) -> Result<Option<f64>> {
    let h = crystal.fd_step;
    let q = |w: f64| q_pm(w, crystal);
    let straddles = omega.abs() < 2.0 * h;
    if !straddles {
        let v = [q(omega - 2.0 * h)?, q(omega - h)?, q(omega + h)?, q(omega + 2.0 * h)?];
        if let [Some(m2), Some(m1), Some(p1), Some(p2)] = v {
            return Ok(Some((m2 - 8.0 * m1 + 8.0 * p1 - p2) / (12.0 * h)));
        }
    }
    let s = if direction < 0.0 { -h } else { h };
    let mut f = [0.0; 5];
    for (i, fi) in f.iter_mut().enumerate() {
        match q(omega + s * i as f64)? {
            Some(v) => *fi = v,
            None => return Ok(None),
        }
    }
    Ok(Some(
        (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / (12.0 * s),
    ))
}

/// Slope of the curve at one frequency; `None` if a stencil point has no root.
pub fn pm_slope(omega_shift: f64, crystal: &CrystalConfig) -> Result<Option<f64>> {
    slope_at(omega_shift, omega_shift.signum(), crystal)
}

/// Regime from `Δ0` against the dispersive term `k''_s·l_c·Ω_edge²`.
pub fn classify(delta0: f64, gvd: f64, length_lc: f64, omega_edge: f64) -> Regime {
    let scale = (gvd * length_lc * omega_edge * omega_edge).abs();
    if delta0 > 10.0 * scale {
        Regime::Noncollinear
    } else if delta0.abs() < 0.1 * scale {
        Regime::Collinear
    } else {
        Regime::Mixed
    }
}

/// Samples `q_pm` on `n_samples` equally spaced frequencies in `omega_range`.
pub fn solve_pm_curve(
    omega_range: (f64, f64),
    n_samples: usize,
    crystal: &CrystalConfig,
) -> Result<PhaseMatchCurve> {
    let (lo, hi) = omega_range;
    if n_samples < 2 {
        return Err(Error::validation("n_samples", "must be at least 2"));
    }
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::Domain(format!("empty frequency range [{lo}, {hi}]")));
    }
    // fail early and with the window named if the edges are out of range
    for w in [lo, hi] {
        crystal.signal_wavenumber(w)?;
        crystal.signal_wavenumber(-w)?;
    }
    let omega: Vec<f64> = (0..n_samples)
        .map(|i| lo + (hi - lo) * i as f64 / (n_samples - 1) as f64)
        .collect();
    let solved: Vec<(Option<f64>, Option<f64>)> = omega
        .par_iter()
        .map(|&w| -> Result<_> {
            let q = q_pm(w, crystal)?;
            let s = match q {
                Some(_) => pm_slope(w, crystal)?,
                None => None,
            };
            Ok((q, s))
        })
        .collect::<Result<_>>()?;
    let (q_pm, mut slope): (Vec<_>, Vec<_>) = solved.into_iter().unzip();

    let degenerate = match omega.iter().position(|&w| w == 0.0) {
        Some(i) if q_pm[i].is_some() => {
            let plus = slope_at(0.0, 1.0, crystal)?;
            let minus = slope_at(0.0, -1.0, crystal)?;
            slope[i] = plus;
            match (minus, plus) {
                (Some(minus), Some(plus)) => Some(DegenerateSlopes { index: i, minus, plus }),
                _ => None,
            }
        }
        _ => None,
    };

    let delta0 = delta_pw(0.0, 0.0, crystal)?;
    let gvd = crystal.group_quantities(0.0)?.gvd;
    let regime = classify(delta0, gvd, crystal.length_lc, lo.abs().max(hi.abs()));
    Ok(PhaseMatchCurve {
        omega,
        q_pm,
        slope,
        degenerate,
        regime,
        delta0,
    })
}

/// Expansion `Δ_pw ≈ Δ0 − q²·l_c/k_s + k''_s·l_c·Ω²` at degeneracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TaylorCoefficients {
    pub delta0: f64,
    /// rad/m
    pub ks: f64,
    /// s²/m
    pub gvd: f64,
    /// `√(k_s·k''_s)` in s/m; `None` when `k''_s ≤ 0` (see `gvd`).
    pub asymptote_slope: Option<f64>,
}

pub fn taylor_coefficients(crystal: &CrystalConfig) -> Result<TaylorCoefficients> {
    let g = crystal.group_quantities(0.0)?;
    Ok(TaylorCoefficients {
        delta0: delta_pw(0.0, 0.0, crystal)?,
        ks: g.k_signal,
        gvd: g.gvd,
        asymptote_slope: (g.gvd > 0.0).then(|| (g.k_signal * g.gvd).sqrt()),
    })
}

/// `Δ0 = (2k_s − k_p)·l_c` at a trial tuning angle.
pub fn delta0_at(theta: f64, crystal: &CrystalConfig) -> Result<f64> {
    delta_pw(0.0, 0.0, &crystal.with_tuning_angle(theta))
}

/// Tuning angle giving collinear degenerate phase matching, or `None` when
/// `Δ0(θ)` does not change sign on `(0, π/2)`.
pub fn tune_collinear(crystal: &CrystalConfig) -> Result<Option<f64>> {
    let lo = 1e-9;
    let hi = std::f64::consts::FRAC_PI_2 - 1e-9;
    // surface window errors instead of treating them as "no root"
    delta0_at(lo, crystal)?;
    let f = |t: f64| delta0_at(t, crystal).unwrap_or(f64::NAN);
    Ok(bisect(f, lo, hi, 0.0, PM_MAX_ITER)
        .filter(|r| r.f.abs() < TUNE_TOLERANCE)
        .map(|r| r.x))
}

/// Temporal delay and transverse separation of a twin pair born at `birth_z`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassicalSeparation {
    pub omega_shift: f64,
    pub birth_z: f64,
    /// s
    pub delta_t: f64,
    /// m
    pub delta_r: f64,
    /// q'_pm(Ω) used on the right-hand side, s/m.
    pub slope: f64,
}

/// Δt = (l_c − z)[1/(v_g(Ω)cos θ(Ω)) − 1/(v_g(−Ω)cos θ(−Ω))] and
/// Δr = (l_c − z)[tan θ(Ω) + tan θ(−Ω)], with sin θ(±Ω) = q_pm(Ω)/k_s(±Ω).
pub fn classical_separation(
    omega_shift: f64,
    birth_z: f64,
    crystal: &CrystalConfig,
) -> Result<ClassicalSeparation> {
    if !(0.0..=crystal.length_lc).contains(&birth_z) {
        return Err(Error::Domain(format!(
            "birth_z = {birth_z} outside [0, {}]",
            crystal.length_lc
        )));
    }
    let off_curve = || Error::Domain(format!("Ω = {omega_shift:.6e} rad/s has no phase-matching root"));
    let q = q_pm(omega_shift, crystal)?.ok_or_else(off_curve)?;
    let slope = pm_slope(omega_shift, crystal)?.ok_or_else(off_curve)?;
    let gp = crystal.group_quantities(omega_shift)?;
    let gm = crystal.group_quantities(-omega_shift)?;
    let sp = q / gp.k_signal;
    let sm = q / gm.k_signal;
    let cp = (1.0 - sp * sp).sqrt();
    let cm = (1.0 - sm * sm).sqrt();
    let len = crystal.length_lc - birth_z;
    Ok(ClassicalSeparation {
        omega_shift,
        birth_z,
        delta_t: len * (1.0 / (gp.group_velocity * cp) - 1.0 / (gm.group_velocity * cm)),
        delta_r: len * (sp / cp + sm / cm),
        slope,
    })
}
