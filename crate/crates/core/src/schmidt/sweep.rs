//! Schmidt number against detection bandwidth for the three models.

use serde::{Deserialize, Serialize};

use super::mc::MIN_SAMPLES_PURITY;
use super::{schmidt_number, BandwidthFilter, Model, MonteCarlo, PdcAmplitude, SchmidtEstimate};
use crate::correlation::PumpConfig;
use crate::dispersion::CrystalConfig;
use crate::error::{Error, Result};
use crate::phasematch::{self, Regime};
use crate::rng;

/// Frozen transverse wavevector used by the 1D model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FrozenQ {
    pub regime: Regime,
    /// Value used, rad/m.
    pub chosen: f64,
    /// Exact degenerate phase-matching root.
    pub q_pm_degenerate: Option<f64>,
    /// `√(k_s Δ₀ / l_c)`, the small-Ω expansion of the same root.
    pub taylor_delta0: Option<f64>,
    /// `√(k_s k''_s / l_c)`, a dimensionally different scale kept for reference.
    pub gvd_scale: Option<f64>,
}

/// Candidates for the frozen q; the regime is judged at `omega_edge`.
pub fn frozen_q_candidates(crystal: &CrystalConfig, omega_edge: f64) -> Result<FrozenQ> {
    let t = phasematch::taylor_coefficients(crystal)?;
    let regime = phasematch::classify(t.delta0, t.gvd, crystal.length_lc, omega_edge);
    let q_pm_degenerate = phasematch::q_pm(0.0, crystal)?;
    let root = |x: f64| (x > 0.0).then(|| x.sqrt());
    let chosen = match regime {
        Regime::Collinear => 0.0,
        _ => q_pm_degenerate.unwrap_or(0.0),
    };
    Ok(FrozenQ {
        regime,
        chosen,
        q_pm_degenerate,
        taylor_delta0: root(t.ks * t.delta0 / crystal.length_lc),
        gvd_scale: root(t.ks * t.gvd / crystal.length_lc),
    })
}

/// Bandwidths and filter settings of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPlan {
    /// rad/m
    pub q_max: f64,
    /// rad/s
    pub omega_max: Vec<f64>,
    /// Overrides the frozen q of the 1D model, rad/m.
    #[serde(default)]
    pub fixed_q_for_1d: Option<f64>,
}

impl SweepPlan {
    pub fn validate(&self) -> Result<()> {
        if self.omega_max.is_empty() {
            return Err(Error::validation("omega_max", "needs at least one bandwidth"));
        }
        for &w in &self.omega_max {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::validation("omega_max", format!("{w} is not a positive bandwidth")));
            }
        }
        if let Some(q) = self.fixed_q_for_1d {
            if !(q >= 0.0 && q.is_finite()) {
                return Err(Error::validation("fixed_q_for_1d", "must be ≥ 0"));
            }
        }
        BandwidthFilter::new(self.q_max, 1.0, Model::Full3d).validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepCell {
    pub omega_max: f64,
    pub model: Model,
    pub seed: u64,
    pub estimate: Option<SchmidtEstimate>,
    pub error: Option<String>,
}

/// One bandwidth; `None` where the cell failed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub omega_max: f64,
    pub k3d: Option<(f64, f64)>,
    pub k2d: Option<(f64, f64)>,
    pub k1d: Option<(f64, f64)>,
    /// `K_2D · K_1D` with the errors combined in quadrature.
    pub kprod: Option<(f64, f64)>,
}

impl SweepRow {
    /// `K_3D / (K_2D K_1D)` and its error.
    pub fn factorization_ratio(&self) -> Option<(f64, f64)> {
        let (k3, e3) = self.k3d?;
        let (kp, ep) = self.kprod?;
        let r = k3 / kp;
        Some((r, r * ((e3 / k3).powi(2) + (ep / kp).powi(2)).sqrt()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub cells: Vec<SweepCell>,
    pub frozen_q: FrozenQ,
    pub fixed_q_for_1d: f64,
    pub q_max: f64,
    pub samples: usize,
    pub seed: u64,
    pub lanes: usize,
    pub rng: &'static str,
}

/// Runs every (bandwidth, model) cell. Cell `(i, m)` uses seed
/// `sub_seed(seed, 3i + m)`; a failing cell is recorded and the sweep goes on.
pub fn bandwidth_sweep(
    crystal: &CrystalConfig,
    pump: &PumpConfig,
    plan: &SweepPlan,
    mc: &MonteCarlo,
) -> Result<SweepResult> {
    plan.validate()?;
    mc.validate()?;
    if mc.samples < MIN_SAMPLES_PURITY {
        return Err(Error::validation(
            "samples",
            format!("sweeps need at least {MIN_SAMPLES_PURITY} samples, got {}", mc.samples),
        ));
    }
    let amplitude = PdcAmplitude::new(crystal, pump)?;
    let edge = plan.omega_max.iter().copied().fold(0.0, f64::max);
    let frozen_q = frozen_q_candidates(crystal, edge)?;
    let q_fix = plan.fixed_q_for_1d.unwrap_or(frozen_q.chosen);

    let mut rows = Vec::with_capacity(plan.omega_max.len());
    let mut cells = Vec::with_capacity(3 * plan.omega_max.len());
    for (i, &omega_max) in plan.omega_max.iter().enumerate() {
        let mut ks = [None; 3];
        for (m, model) in Model::ALL.into_iter().enumerate() {
            let seed = rng::sub_seed(mc.seed, (3 * i + m) as u64);
            let mut filter = BandwidthFilter::new(plan.q_max, omega_max, model);
            filter.fixed_q_for_1d = q_fix;
            let outcome = amplitude
                .check_filter(&filter)
                .and_then(|_| schmidt_number(&filter, &amplitude, &mc.with_seed(seed)));
            let (estimate, error) = match outcome {
                Ok(e) => {
                    ks[m] = Some((e.k_value, e.k_stderr));
                    (Some(e), None)
                }
                Err(e) => (None, Some(e.to_string())),
            };
            cells.push(SweepCell {
                omega_max,
                model,
                seed,
                estimate,
                error,
            });
        }
        let kprod = match (ks[1], ks[2]) {
            (Some((a, ea)), Some((b, eb))) => {
                let p = a * b;
                Some((p, p * ((ea / a).powi(2) + (eb / b).powi(2)).sqrt()))
            }
            _ => None,
        };
        rows.push(SweepRow {
            omega_max,
            k3d: ks[0],
            k2d: ks[1],
            k1d: ks[2],
            kprod,
        });
    }
    Ok(SweepResult {
        rows,
        cells,
        frozen_q,
        fixed_q_for_1d: q_fix,
        q_max: plan.q_max,
        samples: mc.samples,
        seed: mc.seed,
        lanes: mc.lanes,
        rng: rng::ALGORITHM,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn collinear() -> CrystalConfig {
        let c = CrystalConfig::bbo(0.4);
        c.with_tuning_angle(phasematch::tune_collinear(&c).unwrap().unwrap())
    }

    #[test]
    fn frozen_q_matches_regime() {
        let f = frozen_q_candidates(&collinear(), 2e14).unwrap();
        assert_eq!(f.regime, Regime::Collinear);
        assert_eq!(f.chosen, 0.0);

        let c = CrystalConfig::bbo(28f64.to_radians());
        let f = frozen_q_candidates(&c, 2e14).unwrap();
        assert_eq!(f.regime, Regime::Noncollinear);
        let q = f.q_pm_degenerate.unwrap();
        assert_eq!(f.chosen, q);
        // small-Ω expansion agrees with the exact root to leading order
        assert!((f.taylor_delta0.unwrap() / q - 1.0).abs() < 0.05);
    }

    #[test]
    fn failing_cell_is_recorded() {
        let c = collinear();
        let plan = SweepPlan {
            q_max: 2e5,
            // beyond the pump's transparency window
            omega_max: vec![1e13, 5e15],
            fixed_q_for_1d: None,
        };
        let r = bandwidth_sweep(&c, &PumpConfig::default(), &plan, &MonteCarlo::new(20_000, 4)).unwrap();
        assert_eq!(r.cells.len(), 6);
        assert!(r.rows[0].kprod.is_some());
        assert!(r.rows[1].k3d.is_none());
        assert!(r.cells[3].error.is_some());
        assert_eq!(r.cells[4].seed, rng::sub_seed(4, 4));
    }
}
