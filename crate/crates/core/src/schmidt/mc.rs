//! Monte Carlo estimates of N and B.
//!
//! Photon 1 is drawn uniformly in the filter box. When the amplitude exposes
//! a Gaussian bound in the pair-sum coordinate, the other photons are reached
//! through Gaussian-distributed sums (`w₂ = s₁₂ − w₁`, `w₄ = s₁₄ − w₁`,
//! `w₃ = s₃₄ − w₄`), the change of variables having unit Jacobian. Points that
//! leave the box contribute zero. Without an envelope every photon is drawn
//! uniformly.
//!
//! Work is split over a fixed number of lanes, each with its own random
//! stream; lane moments are merged in a fixed pairwise tree, so results depend
//! only on the seed and the lane count.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{restricted_kernel, Amplitude, BandwidthFilter, Free};
use crate::error::{Error, Result};
use crate::rng;

pub const MIN_SAMPLES_NORM: usize = 1_000;
pub const MIN_SAMPLES_PURITY: usize = 10_000;

fn default_lanes() -> usize {
    8
}

/// Sample count, seed and lane count of a Monte Carlo run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarlo {
    pub samples: usize,
    pub seed: u64,
    #[serde(default = "default_lanes")]
    pub lanes: usize,
}

impl MonteCarlo {
    pub fn new(samples: usize, seed: u64) -> Self {
        Self {
            samples,
            seed,
            lanes: default_lanes(),
        }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lanes == 0 {
            return Err(Error::validation("lanes", "must be ≥ 1"));
        }
        if self.samples < self.lanes {
            return Err(Error::validation("samples", "must be at least the lane count"));
        }
        Ok(())
    }
}

/// Running mean and centred second moment of the real and imaginary parts.
#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: f64,
    mean: f64,
    m2: f64,
    mean_im: f64,
    m2_im: f64,
    accepted: u64,
}

impl Moments {
    fn push(&mut self, v: Complex64, accepted: bool) {
        self.n += 1.0;
        let d = v.re - self.mean;
        self.mean += d / self.n;
        self.m2 += d * (v.re - self.mean);
        let d = v.im - self.mean_im;
        self.mean_im += d / self.n;
        self.m2_im += d * (v.im - self.mean_im);
        self.accepted += accepted as u64;
    }

    fn merge(a: &Self, b: &Self) -> Self {
        let n = a.n + b.n;
        if n == 0.0 {
            return Self::default();
        }
        let d = b.mean - a.mean;
        let di = b.mean_im - a.mean_im;
        Self {
            n,
            mean: a.mean + d * b.n / n,
            m2: a.m2 + b.m2 + d * d * a.n * b.n / n,
            mean_im: a.mean_im + di * b.n / n,
            m2_im: a.m2_im + b.m2_im + di * di * a.n * b.n / n,
            accepted: a.accepted + b.accepted,
        }
    }

    fn tree(v: &[Self]) -> Self {
        match v.len() {
            0 => Self::default(),
            1 => v[0],
            n => {
                let (l, r) = v.split_at(n / 2);
                Self::merge(&Self::tree(l), &Self::tree(r))
            }
        }
    }

    fn stderr(&self) -> f64 {
        (self.m2 / (self.n - 1.0) / self.n).sqrt()
    }

    fn stderr_im(&self) -> f64 {
        (self.m2_im / (self.n - 1.0) / self.n).sqrt()
    }
}

fn run_lanes<F>(mc: &MonteCarlo, seed: u64, sample: F) -> Moments
where
    F: Fn(&mut ChaCha8Rng) -> (Complex64, bool) + Sync,
{
    let per = mc.samples / mc.lanes;
    let extra = mc.samples % mc.lanes;
    let lanes: Vec<Moments> = (0..mc.lanes)
        .into_par_iter()
        .map(|lane| {
            let mut r = rng::stream(seed, lane as u64);
            let mut m = Moments::default();
            for _ in 0..per + usize::from(lane < extra) {
                let (v, ok) = sample(&mut r);
                m.push(v, ok);
            }
            m
        })
        .collect();
    Moments::tree(&lanes)
}

/// One integral estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub value: f64,
    pub stderr: f64,
    /// Estimate of the imaginary part of the integral (0 for N).
    pub imag: f64,
    pub imag_stderr: f64,
    pub samples: usize,
    /// Samples whose derived points all fell inside the box.
    pub accepted: u64,
    pub sampler: &'static str,
}

impl McEstimate {
    fn from_moments(m: &Moments, scale: f64, samples: usize, sampler: &'static str) -> Self {
        Self {
            value: scale * m.mean,
            stderr: scale * m.stderr(),
            imag: scale * m.mean_im,
            imag_stderr: scale * m.stderr_im(),
            samples,
            accepted: m.accepted,
            sampler,
        }
    }
}

const IMPORTANCE: &str = "uniform photon 1, Gaussian pair sums";
const UNIFORM: &str = "uniform";

fn uniform(r: &mut ChaCha8Rng, h: &Free, d: usize) -> Free {
    let mut f = [0.0; 3];
    for i in 0..d {
        f[i] = (2.0 * r.random::<f64>() - 1.0) * h[i];
    }
    f
}

/// Gaussian vector with per-axis standard deviations and its density.
fn gaussian(r: &mut ChaCha8Rng, sigma: &Free, d: usize) -> (Free, f64) {
    let mut f = [0.0; 3];
    let mut p = 1.0;
    for i in 0..d {
        let z: f64 = r.sample(StandardNormal);
        f[i] = z * sigma[i];
        p *= (-0.5 * z * z).exp() / ((2.0 * std::f64::consts::PI).sqrt() * sigma[i]);
    }
    (f, p)
}

fn sub(a: &Free, b: &Free) -> Free {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn check(filter: &BandwidthFilter, mc: &MonteCarlo, min: usize, what: &str) -> Result<()> {
    filter.validate()?;
    mc.validate()?;
    if mc.samples < min {
        return Err(Error::validation(
            "samples",
            format!("{what} needs at least {min} samples, got {}", mc.samples),
        ));
    }
    Ok(())
}

/// `N = ∫dw₁dw₂ |ψ̃(w₁,w₂)|²` over the filter box.
pub fn mc_norm<A: Amplitude + ?Sized>(
    filter: &BandwidthFilter,
    amplitude: &A,
    mc: &MonteCarlo,
) -> Result<McEstimate> {
    check(filter, mc, MIN_SAMPLES_NORM, "N")?;
    let d = filter.model.dims();
    let h = filter.half_widths();
    let v = filter.volume();
    let m = match amplitude.sum_envelope() {
        Some(env) => {
            // |ψ̃|² has half the envelope width
            let s = env.sigmas(filter.model).map(|x| x / std::f64::consts::SQRT_2);
            let m = run_lanes(mc, mc.seed, |r| {
                let w1 = uniform(r, &h, d);
                let (s12, p) = gaussian(r, &s, d);
                let w2 = sub(&s12, &w1);
                if !filter.contains(&w2) {
                    return (Complex64::new(0.0, 0.0), false);
                }
                let k = restricted_kernel(filter, amplitude, &w1, &w2);
                (Complex64::new(k.norm_sqr() / p, 0.0), true)
            });
            McEstimate::from_moments(&m, v, mc.samples, IMPORTANCE)
        }
        None => {
            let m = run_lanes(mc, mc.seed, |r| {
                let w1 = uniform(r, &h, d);
                let w2 = uniform(r, &h, d);
                let k = restricted_kernel(filter, amplitude, &w1, &w2);
                (Complex64::new(k.norm_sqr(), 0.0), true)
            });
            McEstimate::from_moments(&m, v * v, mc.samples, UNIFORM)
        }
    };
    Ok(m)
}

/// `B = ∫ ψ̃(w₁,w₂) ψ̃(w₃,w₄) ψ̃*(w₁,w₄) ψ̃*(w₃,w₂)` over the filter box.
pub fn mc_purity<A: Amplitude + ?Sized>(
    filter: &BandwidthFilter,
    amplitude: &A,
    mc: &MonteCarlo,
) -> Result<McEstimate> {
    check(filter, mc, MIN_SAMPLES_PURITY, "B")?;
    let d = filter.model.dims();
    let h = filter.half_widths();
    let v = filter.volume();
    let integrand = |w1: &Free, w2: &Free, w3: &Free, w4: &Free| {
        restricted_kernel(filter, amplitude, w1, w2)
            * restricted_kernel(filter, amplitude, w3, w4)
            * restricted_kernel(filter, amplitude, w1, w4).conj()
            * restricted_kernel(filter, amplitude, w3, w2).conj()
    };
    let m = match amplitude.sum_envelope() {
        Some(env) => {
            let s = env.sigmas(filter.model);
            let m = run_lanes(mc, mc.seed, |r| {
                let w1 = uniform(r, &h, d);
                let (s12, p12) = gaussian(r, &s, d);
                let (s34, p34) = gaussian(r, &s, d);
                let (s14, p14) = gaussian(r, &s, d);
                let w2 = sub(&s12, &w1);
                let w4 = sub(&s14, &w1);
                let w3 = sub(&s34, &w4);
                if !(filter.contains(&w2) && filter.contains(&w3) && filter.contains(&w4)) {
                    return (Complex64::new(0.0, 0.0), false);
                }
                (integrand(&w1, &w2, &w3, &w4) / (p12 * p34 * p14), true)
            });
            McEstimate::from_moments(&m, v, mc.samples, IMPORTANCE)
        }
        None => {
            let m = run_lanes(mc, mc.seed, |r| {
                let w1 = uniform(r, &h, d);
                let w2 = uniform(r, &h, d);
                let w3 = uniform(r, &h, d);
                let w4 = uniform(r, &h, d);
                (integrand(&w1, &w2, &w3, &w4), true)
            });
            McEstimate::from_moments(&m, v.powi(4), mc.samples, UNIFORM)
        }
    };
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SchmidtEstimate {
    pub n_value: f64,
    pub n_stderr: f64,
    pub b_value: f64,
    pub b_stderr: f64,
    /// Imaginary part of the B estimate; zero within statistics.
    pub b_imag: f64,
    pub b_imag_stderr: f64,
    pub k_value: f64,
    pub k_stderr: f64,
    pub samples_norm: usize,
    pub samples_purity: usize,
    pub seed: u64,
    pub seed_norm: u64,
    pub seed_purity: u64,
    pub lanes: usize,
    pub sampler: &'static str,
    pub rng: &'static str,
    pub filter: BandwidthFilter,
}

/// `K = N²/B` with N and B from independent sub-streams of `mc.seed`.
pub fn schmidt_number<A: Amplitude + ?Sized>(
    filter: &BandwidthFilter,
    amplitude: &A,
    mc: &MonteCarlo,
) -> Result<SchmidtEstimate> {
    let seed_norm = rng::sub_seed(mc.seed, 0);
    let seed_purity = rng::sub_seed(mc.seed, 1);
    let n = mc_norm(filter, amplitude, &mc.with_seed(seed_norm))?;
    let b = mc_purity(filter, amplitude, &mc.with_seed(seed_purity))?;
    if !(n.value > 0.0) {
        return Err(Error::FailedEstimate(format!(
            "N = {:.4e} is not positive; the filter may miss the phase-matching region",
            n.value
        )));
    }
    if !(b.value > 0.0) {
        return Err(Error::FailedEstimate(format!(
            "B = {:.4e} ± {:.2e} is not positive; increase the sample count",
            b.value, b.stderr
        )));
    }
    let k = n.value * n.value / b.value;
    let rel = ((2.0 * n.stderr / n.value).powi(2) + (b.stderr / b.value).powi(2)).sqrt();
    Ok(SchmidtEstimate {
        n_value: n.value,
        n_stderr: n.stderr,
        b_value: b.value,
        b_stderr: b.stderr,
        b_imag: b.imag,
        b_imag_stderr: b.imag_stderr,
        k_value: k,
        k_stderr: k * rel,
        samples_norm: n.samples,
        samples_purity: b.samples,
        seed: mc.seed,
        seed_norm,
        seed_purity,
        lanes: mc.lanes,
        sampler: n.sampler,
        rng: rng::ALGORITHM,
        filter: filter.clone(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasematch::FourierCoord;
    use crate::schmidt::{Model, SumEnvelope};

    struct Constant;
    impl Amplitude for Constant {
        fn amplitude(&self, _: FourierCoord, _: FourierCoord) -> Complex64 {
            Complex64::new(1.0, 0.0)
        }
    }

    /// e^{−(w₁² + w₂²)} over the Ω coordinate.
    struct Gauss(f64);
    impl Amplitude for Gauss {
        fn amplitude(&self, a: FourierCoord, b: FourierCoord) -> Complex64 {
            Complex64::new(self.0 * (-(a.omega_shift.powi(2) + b.omega_shift.powi(2))).exp(), 0.0)
        }
    }

    /// Entangled Gaussian with a Gaussian bound in the pair sum.
    struct Twin;
    impl Amplitude for Twin {
        fn amplitude(&self, a: FourierCoord, b: FourierCoord) -> Complex64 {
            let s = a.omega_shift + b.omega_shift;
            let dlt = a.omega_shift - b.omega_shift;
            Complex64::new((-s * s / 2.0 - dlt * dlt / 8.0).exp(), 0.0)
        }
        fn sum_envelope(&self) -> Option<SumEnvelope> {
            Some(SumEnvelope { sigma_q: 1.0, sigma_omega: 1.0 })
        }
    }

    fn filter1d(h: f64) -> BandwidthFilter {
        BandwidthFilter::new(1.0, h, Model::Temporal1d)
    }

    #[test]
    fn constant_kernel_is_exact() {
        let f = BandwidthFilter::new(2.0, 3.0, Model::Full3d);
        let mc = MonteCarlo::new(20_000, 1);
        let n = mc_norm(&f, &Constant, &mc).unwrap();
        assert_eq!(n.value, f.volume().powi(2));
        assert_eq!(n.stderr, 0.0);
        let b = mc_purity(&f, &Constant, &mc).unwrap();
        assert!((b.value - f.volume().powi(4)).abs() <= 1e-12 * b.value);
        assert_eq!(b.stderr, 0.0);
    }

    #[test]
    fn gaussian_norm_matches_closed_form() {
        // ∫∫ e^{−2(x²+y²)} over [−2,2]² = (√(π/2)·erf(2√2))²
        let f = filter1d(2.0);
        let n = mc_norm(&f, &Gauss(1.0), &MonteCarlo::new(200_000, 3)).unwrap();
        let erf = 0.999_936_657_516_334_2_f64; // erf(2√2)
        let exact = (std::f64::consts::FRAC_PI_2.sqrt() * erf).powi(2);
        assert!((n.value - exact).abs() < 3.0 * n.stderr, "{} ± {} vs {exact}", n.value, n.stderr);
        let n2 = mc_norm(&f, &Gauss(2.0), &MonteCarlo::new(200_000, 3)).unwrap();
        assert!((n2.value - 4.0 * n.value).abs() < 1e-9 * n.value);
    }

    #[test]
    fn rank_one_kernel_has_unit_schmidt_number() {
        let f = filter1d(2.0);
        let e = schmidt_number(&f, &Gauss(1.0), &MonteCarlo::new(400_000, 5)).unwrap();
        assert!((e.k_value - 1.0).abs() < 3.0 * e.k_stderr, "{} ± {}", e.k_value, e.k_stderr);
    }

    #[test]
    fn importance_sampled_twin_matches_closed_form() {
        // ψ = exp(−a s² − b d²), s = x+y, d = x−y, on an effectively infinite
        // box has K = (a+b)/(2√(ab)); a = 1/2, b = 1/8 gives 5/4.
        let f = filter1d(12.0);
        let e = schmidt_number(&f, &Twin, &MonteCarlo::new(400_000, 9)).unwrap();
        assert!((e.k_value - 1.25).abs() < 3.0 * e.k_stderr, "{} ± {}", e.k_value, e.k_stderr);
        assert!(e.b_imag.abs() <= 3.0 * e.b_imag_stderr + 1e-300);
    }

    #[test]
    fn seed_determinism_and_lane_dependence() {
        let f = filter1d(3.0);
        let mc = MonteCarlo::new(50_000, 11);
        let a = schmidt_number(&f, &Twin, &mc).unwrap();
        let b = schmidt_number(&f, &Twin, &mc).unwrap();
        assert_eq!(a, b);
        let c = schmidt_number(&f, &Twin, &mc.with_seed(12)).unwrap();
        assert_ne!(a.k_value, c.k_value);
    }

    #[test]
    fn sample_floor_is_enforced() {
        let f = filter1d(1.0);
        assert!(mc_norm(&f, &Constant, &MonteCarlo::new(100, 1)).is_err());
        assert!(mc_purity(&f, &Constant, &MonteCarlo::new(5_000, 1)).is_err());
    }
}
