//! End-to-end checks, one line per criterion. Slow: the Schmidt sweeps run at
//! the bundled configs' default sample counts.

use std::f64::consts::SQRT_2;
use std::path::PathBuf;
use std::time::Instant;

use biphoton::config::{parse_config, RunConfig};
use biphoton::correlation::{
    correlation_map, ridge_fit, temporal_band_halfwidth, PumpConfig, RidgeOutcome, RidgeWindow,
};
use biphoton::export::sweep_csv;
use biphoton::phasematch::{classical_separation, delta0_at, taylor_coefficients, tune_collinear, FourierCoord};
use biphoton::schmidt::{
    bandwidth_sweep, schmidt_number, svd_oracle, symmetric_oracle, Amplitude, BandwidthFilter, Model,
    MonteCarlo, OracleGrid, PdcAmplitude, QuadratureRule,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};

type Outcome = Result<String, String>;

fn config(name: &str) -> RunConfig {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    parse_config(&path).unwrap()
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn tuning() -> Outcome {
    let c = config("bbo_noncollinear.cfg").crystal();
    let angle = tune_collinear(&c).map_err(|e| e.to_string())?.ok_or("no collinear angle")?;
    let deg = angle.to_degrees();
    let d0 = delta0_at(28f64.to_radians(), &c).map_err(|e| e.to_string())?;
    check(
        (deg - 22.9).abs() <= 0.5 && (d0 / 419.0 - 1.0).abs() <= 0.1,
        format!("angle {deg:.3}° (22.9 ± 0.5), Δ0(28°) = {d0:.1} (419 ± 10%)"),
    )
}

fn walkoff() -> Outcome {
    let c = config("bbo_collinear.cfg").crystal();
    let w = c.walkoff_metrics().map_err(|e| e.to_string())?;
    let fs = w.gvm_delay * 1e15;
    let um = w.spatial_walkoff * 1e6;
    check(
        (fs / 350.0 - 1.0).abs() <= 0.1 && (um / 220.0 - 1.0).abs() <= 0.1,
        format!("GVM delay {fs:.1} fs (350 ± 10%), walk-off {um:.1} µm (220 ± 10%)"),
    )
}

fn classical_identity() -> Outcome {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for name in ["bbo_collinear.cfg", "bbo_noncollinear.cfg"] {
        let c = config(name).crystal();
        for _ in 0..200 {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            let w = sign * rng.random_range(1e13..5e14);
            let z = rng.random_range(0.0..c.length_lc * 0.999);
            let s = classical_separation(w, z, &c).map_err(|e| e.to_string())?;
            worst = worst.max((s.delta_t - s.delta_r * s.slope).abs() / s.delta_t.abs());
        }
    }
    check(worst < 1e-4, format!("worst relative error {worst:.2e} over 2×200 points (< 1e-4)"))
}

fn x_asymptotes() -> Outcome {
    let cfg = config("bbo_collinear.cfg");
    let c = cfg.crystal();
    let grid = cfg.grid.spectral_grid(&c).map_err(|e| e.to_string())?;
    let map = correlation_map(&grid, &c, &cfg.pump, cfg.grid.mode).map_err(|e| e.to_string())?;
    let a = taylor_coefficients(&c).map_err(|e| e.to_string())?.asymptote_slope.ok_or("k''_s ≤ 0")?;
    let window = RidgeWindow::for_grid(&grid, &c).map_err(|e| e.to_string())?;
    match ridge_fit(&map, window) {
        RidgeOutcome::Fit(f) => {
            let (p, m) = (f.slope_plus / a, -f.slope_minus / a);
            check(
                (p - 1.0).abs() < 0.05 && (m - 1.0).abs() < 0.05,
                format!("{}×{} map: slopes/√(k_s k''_s) = {p:.5}, {m:.5} (within 5%)", grid.n_q, grid.n_omega),
            )
        }
        other => Err(format!("ridge fit failed: {other:?}")),
    }
}

fn cigar() -> Outcome {
    let col = config("bbo_collinear.cfg");
    let cc = col.crystal();
    let cgrid = col.grid.spectral_grid(&cc).map_err(|e| e.to_string())?;
    let window = RidgeWindow::for_grid(&cgrid, &cc).map_err(|e| e.to_string())?;
    let a = taylor_coefficients(&cc).map_err(|e| e.to_string())?.asymptote_slope.ok_or("k''_s ≤ 0")?;
    let x_extent = 2.0 * a * window.outer_radius;

    let non = config("bbo_noncollinear.cfg");
    let nc = non.crystal();
    let ngrid = non.grid.spectral_grid(&nc).map_err(|e| e.to_string())?;
    let map = correlation_map(&ngrid, &nc, &non.pump, non.grid.mode).map_err(|e| e.to_string())?;
    let h = temporal_band_halfwidth(&map, window.core_exclusion, window.outer_radius, 0.9)
        .ok_or("no mass outside the central lobe")?;
    let ratio = h / x_extent;
    check(
        ratio < 0.2,
        format!(
            "90% band half-width {:.2} fs vs X extent {:.1} fs over {:.0}–{:.0} µm: ratio {ratio:.3} (< 0.2)",
            h * 1e15,
            x_extent * 1e15,
            window.core_exclusion * 1e6,
            window.outer_radius * 1e6
        ),
    )
}

fn oracle_equivalence() -> Outcome {
    let c = config("bbo_collinear.cfg").crystal();
    let pump = PumpConfig {
        waist: 100e-6,
        duration: 200e-15,
        ..PumpConfig::default()
    };
    let amp = PdcAmplitude::new(&c, &pump).map_err(|e| e.to_string())?;
    let q_max = 2.0 * SQRT_2 / pump.waist;
    let omega_max = 2.0 * SQRT_2 / pump.duration;
    let mut lines = Vec::new();
    let mut ok = true;
    for (model, points, samples) in [(Model::Temporal1d, 512, 1_000_000), (Model::Full3d, 32, 10_000_000)] {
        let f = BandwidthFilter::new(q_max, omega_max, model);
        let grid = OracleGrid::new(points, QuadratureRule::GaussLegendre);
        let exact = match model {
            Model::Full3d => symmetric_oracle(&f, &amp, &grid),
            _ => svd_oracle(&f, &amp, &grid),
        }
        .map_err(|e| e.to_string())?;
        let est = schmidt_number(&f, &amp, &MonteCarlo::new(samples, 1)).map_err(|e| e.to_string())?;
        let dev = (est.k_value - exact.k).abs() / est.k_stderr;
        ok &= dev < 3.0;
        lines.push(format!(
            "{} grid {points}: K_svd {:.5}, K_mc {:.5} ± {:.5} ({dev:.2}σ)",
            model.name(),
            exact.k,
            est.k_value,
            est.k_stderr
        ));
    }
    check(ok, lines.join("; "))
}

struct Product;

impl Amplitude for Product {
    fn amplitude(&self, a: FourierCoord, b: FourierCoord) -> Complex64 {
        let f = |w: FourierCoord, s: f64| {
            Complex64::from_polar((-(w.q_squared() + w.omega_shift * w.omega_shift) / s).exp(), w.qx + 0.5 * w.omega_shift)
        };
        f(a, 1.0) * f(b, 2.5).conj()
    }
}

fn separable() -> Outcome {
    let f = BandwidthFilter::new(1.5, 1.5, Model::Full3d);
    let exact = svd_oracle(&f, &Product, &OracleGrid::new(12, QuadratureRule::GaussLegendre)).map_err(|e| e.to_string())?;
    let est = schmidt_number(&f, &Product, &MonteCarlo::new(1_000_000, 1)).map_err(|e| e.to_string())?;
    let dev = (est.k_value - 1.0).abs() / est.k_stderr;
    check(
        (exact.k - 1.0).abs() < 1e-9 && dev < 3.0,
        format!(
            "K_svd − 1 = {:.1e}, K_mc = {:.5} ± {:.5} ({dev:.2}σ)",
            exact.k - 1.0,
            est.k_value,
            est.k_stderr
        ),
    )
}

struct Sweeps {
    collinear: Vec<u8>,
    noncollinear: Vec<u8>,
}

fn run_sweeps() -> Result<(Sweeps, String, bool), String> {
    let mut csv = Vec::new();
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, collinear) in [("bbo_collinear.cfg", true), ("bbo_noncollinear.cfg", false)] {
        let cfg = config(name);
        let r = bandwidth_sweep(&cfg.crystal(), &cfg.pump, &cfg.filter, &cfg.mc).map_err(|e| e.to_string())?;
        let mut detail = Vec::new();
        for row in &r.rows {
            let w = row.omega_max;
            let Some((ratio, err)) = row.factorization_ratio() else {
                if (collinear && w > 1e14) || (!collinear && w <= 3e14) {
                    ok = false;
                }
                detail.push(format!("{w:.1e}: failed"));
                continue;
            };
            let sigmas = (ratio - 1.0).abs() / err;
            if collinear && w > 1e14 {
                ok &= sigmas > 3.0;
            }
            if !collinear && w <= 3e14 {
                ok &= sigmas <= 3.0;
            }
            detail.push(format!("{w:.1e}: {ratio:.3}±{err:.3}"));
        }
        lines.push(format!(
            "{} ({} samples) {}",
            if collinear { "collinear" } else { "noncollinear" },
            r.samples,
            detail.join(", ")
        ));
        csv.push(sweep_csv(&r).map_err(|e| e.to_string())?);
    }
    let noncollinear = csv.pop().unwrap();
    let collinear = csv.pop().unwrap();
    Ok((Sweeps { collinear, noncollinear }, lines.join("; "), ok))
}

fn main() {
    let mut failed = 0;
    let mut report = |n: usize, name: &str, t: Instant, outcome: Outcome| {
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {n} PASS {name} [{secs:.1} s]: {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {n} FAIL {name} [{secs:.1} s]: {d}")
            }
        }
    };

    let t = Instant::now();
    report(1, "collinear tuning", t, tuning());
    let t = Instant::now();
    report(2, "walk-off metrics", t, walkoff());
    let t = Instant::now();
    report(3, "classical identity", t, classical_identity());
    let t = Instant::now();
    report(4, "X asymptotes", t, x_asymptotes());
    let t = Instant::now();
    report(5, "cigar geometry", t, cigar());
    let t = Instant::now();
    report(6, "oracle equivalence", t, oracle_equivalence());
    let t = Instant::now();
    report(7, "separable baseline", t, separable());

    let t = Instant::now();
    let first = run_sweeps();
    let crit8 = match &first {
        Ok((_, d, ok)) => check(*ok, d.clone()),
        Err(e) => Err(e.clone()),
    };
    report(8, "factorization transition", t, crit8);

    let t = Instant::now();
    let crit9 = match (&first, run_sweeps()) {
        (Ok((a, _, _)), Ok((b, _, _))) => check(
            a.collinear == b.collinear && a.noncollinear == b.noncollinear,
            format!(
                "repeat sweeps: {} + {} CSV bytes, identical = {}",
                b.collinear.len(),
                b.noncollinear.len(),
                a.collinear == b.collinear && a.noncollinear == b.noncollinear
            ),
        ),
        (Err(e), _) => Err(e.clone()),
        (_, Err(e)) => Err(e),
    };
    report(9, "determinism", t, crit9);

    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
