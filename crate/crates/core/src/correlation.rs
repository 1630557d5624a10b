//! Biphoton amplitude in Fourier space and direct-domain correlation maps.
//!
//! The plane-wave-pump correlation is
//!
//! ```text
//! ψ_pw(Δx, Δt) = ∫ dq dΩ / (2π)^d · e^{i(q·Δx − Ω·Δt)} · g·sinc(Δ_pw/2)·e^{iΔ_pw/2}
//! ```
//!
//! evaluated by a centred DFT (zero bin at `n/2`) and scaled by `dq·dΩ/(2π)^d`.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::dispersion::CrystalConfig;
use crate::error::{Error, Result};
use crate::math::{fit_line, sinc};
use crate::phasematch::{delta_full, delta_pw, q_pm, FourierCoord};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PumpProfile {
    #[default]
    Gaussian,
}

fn default_coupling() -> f64 {
    1.0
}
fn default_waist() -> f64 {
    600e-6
}
fn default_duration() -> f64 {
    1e-12
}

/// Gaussian pump. `A_p(r, t) = exp(−r²/waist² − t²/duration²)`, so `A_p(0, 0) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PumpConfig {
    /// g = χ⁽²⁾·α_p·l_c
    #[serde(default = "default_coupling")]
    pub coupling_g: f64,
    /// m
    #[serde(default = "default_waist")]
    pub waist: f64,
    /// s
    #[serde(default = "default_duration")]
    pub duration: f64,
    #[serde(default)]
    pub profile: PumpProfile,
}

impl Default for PumpConfig {
    fn default() -> Self {
        Self {
            coupling_g: default_coupling(),
            waist: default_waist(),
            duration: default_duration(),
            profile: PumpProfile::Gaussian,
        }
    }
}

impl PumpConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("coupling_g", self.coupling_g),
            ("waist", self.waist),
            ("duration", self.duration),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(name, "must be > 0"));
            }
        }
        Ok(())
    }

    /// `Ã_p(q, Ω)` normalised so that `∫ dw/(2π)^{3/2} Ã_p = A_p(0, 0) = 1`.
    pub fn spectrum(&self, q_squared: f64, omega: f64) -> f64 {
        let w = self.waist;
        let tau = self.duration;
        let norm = w * w * tau / (2.0 * std::f64::consts::SQRT_2);
        norm * (-q_squared * w * w / 4.0 - omega * omega * tau * tau / 4.0).exp()
    }

    /// Direct-domain envelope `A_p(r, t)`.
    pub fn envelope(&self, r: f64, t: f64) -> f64 {
        (-(r * r) / (self.waist * self.waist) - t * t / (self.duration * self.duration)).exp()
    }
}

/// Full biphoton amplitude
/// `ψ̃(w₁, w₂) = g/(2π)^{3/2} · Ã_p(w₁ + w₂) · e^{i k_pz l_c} · e^{iΔ/2} · sinc(Δ/2)`.
pub fn biphoton_fourier(
    w1: FourierCoord,
    w2: FourierCoord,
    crystal: &CrystalConfig,
    pump: &PumpConfig,
) -> Result<Complex64> {
    let delta = delta_full(w1, w2, crystal)?;
    let s = w1 + w2;
    let kp = crystal.pump_wavenumber_at(s.omega_shift)?;
    let kpz = (kp * kp - s.q_squared()).sqrt();
    let amp = pump.coupling_g / TWO_PI.powf(1.5) * pump.spectrum(s.q_squared(), s.omega_shift);
    Ok(Complex64::from_polar(
        amp * sinc(0.5 * delta),
        kpz * crystal.length_lc + 0.5 * delta,
    ))
}

/// Number of kernel evaluations that fell outside the propagating cone.
#[derive(Debug, Default)]
pub struct EvanescentTally(AtomicU64);

impl EvanescentTally {
    pub fn count(&self) -> u64 {
        self.0.load(Ordering::Relaxed)
    }
}

/// `g·sinc(Δ_pw/2)·e^{iΔ_pw/2}`. Evanescent points give 0 and are tallied.
pub fn pw_kernel(
    q: f64,
    omega_shift: f64,
    crystal: &CrystalConfig,
    g: f64,
    tally: &EvanescentTally,
) -> Result<Complex64> {
    match delta_pw(q, omega_shift, crystal) {
        Ok(d) => Ok(Complex64::from_polar(g * sinc(0.5 * d), 0.5 * d)),
        Err(Error::Evanescent { .. }) => {
            tally.0.fetch_add(1, Ordering::Relaxed);
            Ok(Complex64::new(0.0, 0.0))
        }
        Err(e) => Err(e),
    }
}

/// Centred discretisation of the (q, Ω) plane.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralGrid {
    pub n_q: usize,
    /// Largest |q| represented, rad/m. Axis: `q_j = (j − n_q/2)·dq`, `dq = 2·q_extent/n_q`.
    pub q_extent: f64,
    /// Number of q_y samples for `full3d`; the q_y axis shares `dq`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_qy: Option<usize>,
    pub n_omega: usize,
    /// rad/s
    pub omega_extent: f64,
}

fn centered_axis(n: usize, step: f64) -> Vec<f64> {
    (0..n).map(|i| (i as f64 - (n / 2) as f64) * step).collect()
}

impl SpectralGrid {
    pub fn validate(&self) -> Result<()> {
        for (name, n) in [("n_q", self.n_q), ("n_omega", self.n_omega)] {
            if n < 2 || n % 2 != 0 {
                return Err(Error::validation(name, "must be even and ≥ 2"));
            }
        }
        if let Some(n) = self.n_qy {
            if n < 2 || n % 2 != 0 {
                return Err(Error::validation("n_qy", "must be even and ≥ 2"));
            }
        }
        for (name, v) in [("q_extent", self.q_extent), ("omega_extent", self.omega_extent)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(name, "must be > 0"));
            }
        }
        Ok(())
    }

    /// Grid whose q extent is twice the phase-matching-curve extent over
    /// `|Ω| ≤ omega_extent`, so the whole ridge lies inside the window.
    pub fn covering_curve(
        crystal: &CrystalConfig,
        n_q: usize,
        n_omega: usize,
        omega_extent: f64,
    ) -> Result<Self> {
        let mut qmax = 0.0f64;
        for i in 0..=32 {
            let w = omega_extent * i as f64 / 32.0;
            if let Some(q) = q_pm(w, crystal)? {
                qmax = qmax.max(q);
            }
        }
        if qmax == 0.0 {
            return Err(Error::Domain(
                "no phase-matching root within the frequency extent".into(),
            ));
        }
        Ok(Self {
            n_q,
            q_extent: 2.0 * qmax,
            n_qy: None,
            n_omega,
            omega_extent,
        })
    }

    pub fn dq(&self) -> f64 {
        2.0 * self.q_extent / self.n_q as f64
    }

    pub fn domega(&self) -> f64 {
        2.0 * self.omega_extent / self.n_omega as f64
    }

    pub fn q_axis(&self) -> Vec<f64> {
        centered_axis(self.n_q, self.dq())
    }

    pub fn qy_axis(&self) -> Vec<f64> {
        centered_axis(self.n_qy.unwrap_or(1).max(1), self.dq())
    }

    pub fn omega_axis(&self) -> Vec<f64> {
        centered_axis(self.n_omega, self.domega())
    }

    /// Δx spacing, `2π/(n_q·dq)`.
    pub fn delta_x_step(&self) -> f64 {
        TWO_PI / (self.n_q as f64 * self.dq())
    }

    /// Δt spacing, `2π/(n_ω·dΩ)`.
    pub fn delta_t_step(&self) -> f64 {
        TWO_PI / (self.n_omega as f64 * self.domega())
    }

    pub fn delta_x_axis(&self) -> Vec<f64> {
        centered_axis(self.n_q, self.delta_x_step())
    }

    pub fn delta_t_axis(&self) -> Vec<f64> {
        centered_axis(self.n_omega, self.delta_t_step())
    }

    /// Samples across the central sinc lobe (`|Δ_pw| < 2π`) at the grid edge,
    /// along q and along Ω.
    pub fn lobe_samples(&self, crystal: &CrystalConfig) -> Result<(f64, f64)> {
        let t = crate::phasematch::taylor_coefficients(crystal)?;
        let lc = crystal.length_lc;
        let dd_dq = 2.0 * self.q_extent * lc / t.ks;
        let dd_dw = 2.0 * t.gvd.abs() * lc * self.omega_extent;
        Ok((
            2.0 * TWO_PI / dd_dq / self.dq(),
            2.0 * TWO_PI / dd_dw / self.domega(),
        ))
    }
}

/// `sinc²(Δ_pw(q_x, Ω)/2)` on the grid with `q_y = 0`, row-major `[q][Ω]`.
pub fn sinc2_map(grid: &SpectralGrid, crystal: &CrystalConfig) -> Result<Vec<f64>> {
    grid.validate()?;
    let tally = EvanescentTally::default();
    let k = sample_kernel(grid, crystal, 1.0, &tally)?;
    Ok(k.iter().map(|z| z.norm_sqr()).collect())
}

fn sample_kernel(
    grid: &SpectralGrid,
    crystal: &CrystalConfig,
    g: f64,
    tally: &EvanescentTally,
) -> Result<Vec<Complex64>> {
    let qs = grid.q_axis();
    let ws = grid.omega_axis();
    let mut out = vec![Complex64::new(0.0, 0.0); qs.len() * ws.len()];
    out.par_chunks_mut(ws.len())
        .zip(qs.par_iter())
        .try_for_each(|(row, &q)| -> Result<()> {
            for (v, &w) in row.iter_mut().zip(&ws) {
                *v = pw_kernel(q.abs(), w, crystal, g, tally)?;
            }
            Ok(())
        })?;
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MapMode {
    #[default]
    Slice2d,
    Full3d,
}

/// ψ_pw on the conjugate (Δx, Δt) grid, row-major `[Δx][Δt]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationMap {
    /// m
    pub delta_x: Vec<f64>,
    /// s
    pub delta_t: Vec<f64>,
    #[serde(skip)]
    pub psi: Vec<Complex64>,
    pub mode: MapMode,
    pub grid: SpectralGrid,
    pub crystal: CrystalConfig,
    pub coupling_g: f64,
    pub evanescent_cells: u64,
    /// Largest |K(q, Ω) − K(−q, −Ω)| over the sampled kernel.
    pub kernel_parity_defect: f64,
    pub warnings: Vec<String>,
}

impl CorrelationMap {
    pub fn intensity(&self) -> Vec<f64> {
        self.psi.iter().map(|z| z.norm_sqr()).collect()
    }

    pub fn at(&self, ix: usize, it: usize) -> Complex64 {
        self.psi[ix * self.delta_t.len() + it]
    }

    pub fn dx(&self) -> f64 {
        self.delta_x[1] - self.delta_x[0]
    }

    pub fn dt(&self) -> f64 {
        self.delta_t[1] - self.delta_t[0]
    }

    /// ψ_pw at an arbitrary (Δx, Δt) by bilinear interpolation.
    pub fn interpolate(&self, dx: f64, dt: f64) -> Result<Complex64> {
        let (nx, nt) = (self.delta_x.len(), self.delta_t.len());
        let fx = (dx - self.delta_x[0]) / self.dx();
        let ft = (dt - self.delta_t[0]) / self.dt();
        if !(fx >= 0.0 && fx <= (nx - 1) as f64 && ft >= 0.0 && ft <= (nt - 1) as f64) {
            return Err(Error::Domain(format!(
                "(Δx, Δt) = ({dx:.4e} m, {dt:.4e} s) outside the map axes"
            )));
        }
        let i = (fx.floor() as usize).min(nx - 2);
        let j = (ft.floor() as usize).min(nt - 2);
        let (u, v) = (fx - i as f64, ft - j as f64);
        Ok(self.at(i, j) * ((1.0 - u) * (1.0 - v))
            + self.at(i + 1, j) * (u * (1.0 - v))
            + self.at(i, j + 1) * ((1.0 - u) * v)
            + self.at(i + 1, j + 1) * (u * v))
    }
}

/// Centred DFT along a contiguous line: `out_m = Σ_j x_j·e^{±2πi(j−n/2)(m−n/2)/n}`.
fn centered_dft(line: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
    let n = line.len();
    line.rotate_left(n / 2);
    fft.process(line);
    line.rotate_left(n / 2);
}

/// 2-D centred transform of a row-major `[q][Ω]` array: `e^{+iqΔx}` along q,
/// `e^{−iΩΔt}` along Ω, scaled by `scale`.
pub fn transform_2d(data: &mut [Complex64], nq: usize, nw: usize, scale: f64) {
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(nw);
    let inv = planner.plan_fft_inverse(nq);
    data.par_chunks_mut(nw).for_each(|row| centered_dft(row, &fwd));
    let mut t = transpose(data, nq, nw);
    t.par_chunks_mut(nq).for_each(|col| centered_dft(col, &inv));
    let back = transpose(&t, nw, nq);
    for (d, b) in data.iter_mut().zip(back) {
        *d = b * scale;
    }
}

fn transpose(a: &[Complex64], rows: usize, cols: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); a.len()];
    for r in 0..rows {
        for c in 0..cols {
            out[c * rows + r] = a[r * cols + c];
        }
    }
    out
}

/// Builds ψ_pw on the conjugate grid.
///
/// `Full3d` integrates the kernel over q_y before the 2-D transform, which is
/// exactly the Δy = 0 plane of the 3-D transform.
pub fn correlation_map(
    grid: &SpectralGrid,
    crystal: &CrystalConfig,
    pump: &PumpConfig,
    mode: MapMode,
) -> Result<CorrelationMap> {
    grid.validate()?;
    let (nq, nw) = (grid.n_q, grid.n_omega);
    let g = pump.coupling_g;
    let tally = EvanescentTally::default();
    let mut kernel = match mode {
        MapMode::Slice2d => sample_kernel(grid, crystal, g, &tally)?,
        MapMode::Full3d => {
            let qx = grid.q_axis();
            let qy = grid.qy_axis();
            let ws = grid.omega_axis();
            let weight = grid.dq() / TWO_PI;
            let mut out = vec![Complex64::new(0.0, 0.0); nq * nw];
            out.par_chunks_mut(nw)
                .zip(qx.par_iter())
                .try_for_each(|(row, &x)| -> Result<()> {
                    for (v, &w) in row.iter_mut().zip(&ws) {
                        let mut acc = Complex64::new(0.0, 0.0);
                        for &y in &qy {
                            acc += pw_kernel((x * x + y * y).sqrt(), w, crystal, g, &tally)?;
                        }
                        *v = acc * weight;
                    }
                    Ok(())
                })?;
            out
        }
    };

    let mut defect = 0.0f64;
    for i in 1..nq {
        for j in 1..nw {
            let a = kernel[i * nw + j];
            let b = kernel[(nq - i) * nw + (nw - j)];
            defect = defect.max((a - b).norm());
        }
    }

    let mut warnings = Vec::new();
    let (lq, lw) = grid.lobe_samples(crystal)?;
    for (axis, n) in [("q", lq), ("Ω", lw)] {
        if n < 4.0 {
            warnings.push(format!(
                "sinc lobe at the grid edge spans {n:.2} samples along {axis} (< 4); refine the grid"
            ));
        }
    }

    let scale = grid.dq() * grid.domega() / (TWO_PI * TWO_PI);
    transform_2d(&mut kernel, nq, nw, scale);
    Ok(CorrelationMap {
        delta_x: grid.delta_x_axis(),
        delta_t: grid.delta_t_axis(),
        psi: kernel,
        mode,
        grid: grid.clone(),
        crystal: crystal.clone(),
        coupling_g: g,
        evanescent_cells: tally.count(),
        kernel_parity_defect: defect,
        warnings,
    })
}

/// `ψ(ξ, ξ′) = A_p(ξ_mean)·ψ_pw(ξ′ − ξ)`; `xi_mean = (r, t)`, `xi_diff = (Δx, Δt)`.
pub fn factorized_correlation(
    xi_mean: (f64, f64),
    xi_diff: (f64, f64),
    map: &CorrelationMap,
    pump: &PumpConfig,
) -> Result<Complex64> {
    let psi = map.interpolate(xi_diff.0, xi_diff.1)?;
    Ok(psi * pump.envelope(xi_mean.0, xi_mean.1))
}

/// Column window used by [`ridge_fit`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RidgeWindow {
    /// Columns with |Δx| below this are excluded, m.
    pub core_exclusion: f64,
    /// Columns with |Δx| above this are excluded, m.
    pub outer_radius: f64,
}

impl RidgeWindow {
    /// `[0.1, 0.5]·r_edge`, with `r_edge = 2·l_c·tan θ` the transverse separation
    /// of a pair born at the entrance face at the grid's frequency edge.
    pub fn for_grid(grid: &SpectralGrid, crystal: &CrystalConfig) -> Result<Self> {
        let w = grid.omega_extent;
        let q = q_pm(w, crystal)?.ok_or_else(|| {
            Error::Domain(format!("no phase-matching root at the grid edge Ω = {w:.3e} rad/s"))
        })?;
        let ks = crystal.signal_wavenumber(w)?;
        let s = q / ks;
        let r_edge = 2.0 * crystal.length_lc * s / (1.0 - s * s).sqrt();
        Ok(Self {
            core_exclusion: 0.1 * r_edge,
            outer_radius: 0.5 * r_edge,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RidgeFit {
    /// s/m
    pub slope_plus: f64,
    /// s/m
    pub slope_minus: f64,
    /// Intercepts of the two branch lines, s.
    pub intercept_plus: f64,
    pub intercept_minus: f64,
    /// RMS distance of ridge points from their branch line, s.
    pub fit_residual: f64,
    pub points_per_branch: usize,
    pub window: RidgeWindow,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RidgeOutcome {
    Fit(RidgeFit),
    InsufficientData { points_plus: usize, points_minus: usize },
}

pub const MIN_RIDGE_POINTS: usize = 8;

/// Fits `Δt = s·|Δx| + c` through the |ψ_pw|² maxima of each column in the
/// window, separately for Δt > 0 and Δt < 0. Peak positions are refined by a
/// parabola through the logarithm of the three samples around the maximum.
pub fn ridge_fit(map: &CorrelationMap, window: RidgeWindow) -> RidgeOutcome {
    let nt = map.delta_t.len();
    let dt = map.dt();
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for (ix, &x) in map.delta_x.iter().enumerate() {
        if x.abs() < window.core_exclusion || x.abs() > window.outer_radius {
            continue;
        }
        let col: Vec<f64> = (0..nt).map(|it| map.at(ix, it).norm_sqr()).collect();
        for (positive, pts) in [(true, &mut plus), (false, &mut minus)] {
            let best = (0..nt)
                .filter(|&j| if positive { map.delta_t[j] > 0.0 } else { map.delta_t[j] < 0.0 })
                .max_by(|&a, &b| col[a].total_cmp(&col[b]));
            let Some(j) = best else { continue };
            if col[j] <= 0.0 {
                continue;
            }
            let mut t = map.delta_t[j];
            if j > 0 && j + 1 < nt && col[j - 1] > 0.0 && col[j + 1] > 0.0 {
                let (y0, y1, y2) = (col[j - 1].ln(), col[j].ln(), col[j + 1].ln());
                let den = y0 - 2.0 * y1 + y2;
                if den < 0.0 {
                    t += 0.5 * (y0 - y2) / den * dt;
                }
            }
            pts.push((x.abs(), t));
        }
    }
    if plus.len() < MIN_RIDGE_POINTS || minus.len() < MIN_RIDGE_POINTS {
        return RidgeOutcome::InsufficientData {
            points_plus: plus.len(),
            points_minus: minus.len(),
        };
    }
    let (Some(fp), Some(fm)) = (fit_line(&plus), fit_line(&minus)) else {
        return RidgeOutcome::InsufficientData {
            points_plus: plus.len(),
            points_minus: minus.len(),
        };
    };
    RidgeOutcome::Fit(RidgeFit {
        slope_plus: fp.slope,
        slope_minus: fm.slope,
        intercept_plus: fp.intercept,
        intercept_minus: fm.intercept,
        fit_residual: (0.5 * (fp.rms_residual.powi(2) + fm.rms_residual.powi(2))).sqrt(),
        points_per_branch: plus.len().min(minus.len()),
        window,
    })
}

/// Half-width `h` of the smallest band `|Δt| ≤ h` holding `fraction` of the
/// |ψ_pw|² mass in the columns `r0 ≤ |Δx| ≤ r1`.
pub fn temporal_band_halfwidth(map: &CorrelationMap, r0: f64, r1: f64, fraction: f64) -> Option<f64> {
    let nt = map.delta_t.len();
    let mut profile = vec![0.0; nt];
    for (ix, &x) in map.delta_x.iter().enumerate() {
        if x.abs() >= r0 && x.abs() <= r1 {
            for (it, p) in profile.iter_mut().enumerate() {
                *p += map.at(ix, it).norm_sqr();
            }
        }
    }
    let total: f64 = profile.iter().sum();
    if total <= 0.0 {
        return None;
    }
    let mut order: Vec<usize> = (0..nt).collect();
    order.sort_by(|&a, &b| map.delta_t[a].abs().total_cmp(&map.delta_t[b].abs()));
    let mut acc = 0.0;
    for i in order {
        acc += profile[i];
        if acc >= fraction * total {
            return Some(map.delta_t[i].abs());
        }
    }
    None
}
