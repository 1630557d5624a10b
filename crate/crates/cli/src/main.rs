use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use biphoton::config::{parse_config, RunConfig};
use biphoton::correlation::{correlation_map, ridge_fit, temporal_band_halfwidth, RidgeOutcome, RidgeWindow};
use biphoton::export::{self, plots};
use biphoton::phasematch::{self, taylor_coefficients, tune_collinear};
use biphoton::schmidt::bandwidth_sweep;
use biphoton::{rng, Error};
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

#[derive(Debug, Parser)]
#[command(name = "biphoton", version, about = "Twin-photon phase matching, correlations and Schmidt numbers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, clap::Args)]
struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's `output.dir`.
    #[arg(long, env = "BIPHOTON_OUT")]
    out: Option<PathBuf>,
    /// Monte Carlo seed; overrides `mc.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo samples per estimate; overrides `mc.samples`.
    #[arg(long)]
    samples: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Signal dispersion over the curve's frequency range, plus walk-off metrics.
    Dispersion(Common),
    /// Phase-matching curve q_pm(Ω) and its slope.
    Pmcurve(Common),
    /// Plane-wave correlation map with the ridge and band diagnostics.
    Correlate(Common),
    /// Schmidt numbers of the 3D, 2D and 1D models against bandwidth.
    SchmidtSweep(Common),
    /// Collinear tuning angle of the configured crystal.
    Tune(Common),
}

impl Command {
    fn parts(&self) -> (&'static str, &Common) {
        match self {
            Command::Dispersion(c) => ("dispersion", c),
            Command::Pmcurve(c) => ("pmcurve", c),
            Command::Correlate(c) => ("correlate", c),
            Command::SchmidtSweep(c) => ("schmidt-sweep", c),
            Command::Tune(c) => ("tune", c),
        }
    }
}

/// Output directory bookkeeping: files written so far, removed on failure.
struct Outputs {
    dir: PathBuf,
    created_dir: bool,
    files: Vec<PathBuf>,
}

impl Outputs {
    fn open(dir: PathBuf) -> Result<Self, Error> {
        let created_dir = !dir.exists();
        std::fs::create_dir_all(&dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
        Ok(Self { dir, created_dir, files: Vec::new() })
    }

    fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), Error> {
        let path = self.dir.join(name);
        self.files.push(path.clone());
        export::write_bytes(&path, bytes)
    }

    fn json<T: serde::Serialize>(&mut self, name: &str, value: &T) -> Result<(), Error> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write(name, &bytes)
    }

    fn discard(self) {
        for f in &self.files {
            let _ = std::fs::remove_file(f);
        }
        if self.created_dir {
            let _ = std::fs::remove_dir(&self.dir);
        }
    }

    fn names(&self) -> Vec<String> {
        self.files
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect()
    }
}

fn load(common: &Common) -> Result<RunConfig, Error> {
    let mut cfg = parse_config(&common.config)?;
    if let Some(seed) = common.seed {
        cfg.mc.seed = seed;
    }
    if let Some(samples) = common.samples {
        cfg.mc.samples = samples;
    }
    if let Some(out) = &common.out {
        cfg.output.dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn dispersion(cfg: &RunConfig, out: &mut Outputs) -> Result<Value, Error> {
    let c = cfg.crystal();
    let [lo, hi] = cfg.curve.omega_range;
    let n = cfg.curve.n_samples;
    let samples = (0..n)
        .map(|i| c.group_quantities(lo + (hi - lo) * i as f64 / (n - 1) as f64))
        .collect::<Result<Vec<_>, _>>()?;
    out.write("dispersion.csv", &export::dispersion_csv(&samples)?)?;
    let lp = c.pump_wavelength;
    let summary = json!({
        "pump_wavelength_m": lp,
        "n_o_pump": c.index_ordinary(lp)?,
        "n_e_pump": c.index_extraordinary(lp, c.tuning_angle)?,
        "n_o_signal": c.index_ordinary(2.0 * lp)?,
        "degenerate": c.group_quantities(0.0)?,
        "walkoff": c.walkoff_metrics()?,
        "taylor": taylor_coefficients(&c)?,
    });
    out.json("dispersion.json", &summary)?;
    Ok(summary)
}

fn pmcurve(cfg: &RunConfig, out: &mut Outputs) -> Result<Value, Error> {
    let c = cfg.crystal();
    let [lo, hi] = cfg.curve.omega_range;
    let curve = phasematch::solve_pm_curve((lo, hi), cfg.curve.n_samples, &c)?;
    out.write("curve.csv", &export::curve_csv(&curve)?)?;
    out.write("plot_curve.gp", plots::CURVE.as_bytes())?;
    let summary = json!({
        "regime": curve.regime,
        "delta0": curve.delta0,
        "degenerate_slopes": curve.degenerate,
        "gaps": curve.q_pm.iter().filter(|q| q.is_none()).count(),
        "taylor": taylor_coefficients(&c)?,
    });
    out.json("curve.json", &summary)?;
    Ok(summary)
}

fn correlate(cfg: &RunConfig, out: &mut Outputs) -> Result<Value, Error> {
    let c = cfg.crystal();
    let grid = cfg.grid.spectral_grid(&c)?;
    let map = correlation_map(&grid, &c, &cfg.pump, cfg.grid.mode)?;
    out.write("map.bin", &export::map_binary(&map))?;
    out.json("map.json", &export::map_sidecar(&map)?)?;
    out.write("map.csv", &export::map_csv(&map, 256)?)?;
    out.write("plot_map.gp", plots::MAP.as_bytes())?;

    let taylor = taylor_coefficients(&c)?;
    let window = RidgeWindow::for_grid(&grid, &c)?;
    let ridge = ridge_fit(&map, window);
    let comparison = match (&ridge, taylor.asymptote_slope) {
        (RidgeOutcome::Fit(f), Some(a)) => json!({
            "reference_slope_s_m": a,
            "plus_over_reference": f.slope_plus / a,
            "minus_over_reference": f.slope_minus / a,
        }),
        _ => Value::Null,
    };
    let band = temporal_band_halfwidth(&map, window.core_exclusion, window.outer_radius, 0.9);
    let report = json!({
        "ridge": ridge,
        "asymptote_comparison": comparison,
        "band_halfwidth_90_s": band,
        "warnings": map.warnings,
        "evanescent_cells": map.evanescent_cells,
    });
    out.json("ridge.json", &report)?;
    Ok(report)
}

fn sweep(cfg: &RunConfig, out: &mut Outputs) -> Result<Value, Error> {
    let c = cfg.crystal();
    let result = bandwidth_sweep(&c, &cfg.pump, &cfg.filter, &cfg.mc)?;
    out.write("sweep.csv", &export::sweep_csv(&result)?)?;
    out.json(
        "sweep.json",
        &json!({
            "result": result,
            "config": cfg,
        }),
    )?;
    out.write("plot_sweep.gp", plots::SWEEP.as_bytes())?;
    let failed = result.cells.iter().filter(|c| c.error.is_some()).count();
    Ok(json!({
        "frozen_q": result.frozen_q,
        "failed_cells": failed,
        "ratios": result.rows.iter().map(|r| r.factorization_ratio()).collect::<Vec<_>>(),
    }))
}

fn tune(cfg: &RunConfig, out: &mut Outputs) -> Result<Value, Error> {
    let c = cfg.crystal();
    let angle = tune_collinear(&c)?;
    let summary = json!({
        "collinear_angle_deg": angle.map(f64::to_degrees),
        "delta0_at_collinear": angle.map(|a| phasematch::delta0_at(a, &c)).transpose()?,
        "configured_angle_deg": c.tuning_angle.to_degrees(),
        "delta0_at_configured": phasematch::delta0_at(c.tuning_angle, &c)?,
    });
    match angle {
        Some(a) => println!("collinear tuning angle: {:.4}°", a.to_degrees()),
        None => println!("no collinear tuning angle for this crystal"),
    }
    out.json("tune.json", &summary)?;
    Ok(summary)
}

fn run(name: &str, common: &Common, started: Instant) -> Result<PathBuf, (Error, Option<Outputs>)> {
    let cfg = load(common).map_err(|e| (e, None))?;
    let mut out = Outputs::open(cfg.output.dir.clone()).map_err(|e| (e, None))?;
    let result = match name {
        "dispersion" => dispersion(&cfg, &mut out),
        "pmcurve" => pmcurve(&cfg, &mut out),
        "correlate" => correlate(&cfg, &mut out),
        "schmidt-sweep" => sweep(&cfg, &mut out),
        _ => tune(&cfg, &mut out),
    };
    let summary = match result {
        Ok(s) => s,
        Err(e) => return Err((e, Some(out))),
    };
    let manifest = json!({
        "command": name,
        "flags": {
            "config": common.config,
            "out": common.out,
            "seed": common.seed,
            "samples": common.samples,
        },
        "version": env!("CARGO_PKG_VERSION"),
        "rng": rng::ALGORITHM,
        "seed": cfg.mc.seed,
        "lanes": cfg.mc.lanes,
        "elapsed_s": started.elapsed().as_secs_f64(),
        "files": out.names(),
        "summary": summary,
        "config": cfg,
    });
    match out.json("run.json", &manifest) {
        Ok(()) => Ok(out.dir.clone()),
        Err(e) => Err((e, Some(out))),
    }
}

fn error_json(command: &str, e: &Error) -> Value {
    json!({ "error": { "command": command, "kind": e.kind(), "message": e.to_string() } })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, common) = cli.command.parts();
    match run(name, common, Instant::now()) {
        Ok(dir) => {
            eprintln!("wrote {}", dir.display());
            ExitCode::SUCCESS
        }
        Err((e, out)) => {
            if let Some(out) = out {
                out.discard();
            }
            eprintln!("{}", error_json(name, &e));
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn discard_removes_written_files_and_new_dir() {
        let tmp = tempfile::tempdir().unwrap();
        let dir = tmp.path().join("run");
        let mut out = Outputs::open(dir.clone()).unwrap();
        out.write("a.csv", b"x\n").unwrap();
        out.json("b.json", &json!({"k": 1})).unwrap();
        assert_eq!(out.names(), ["a.csv", "b.json"]);
        out.discard();
        assert!(!dir.exists());
    }

    #[test]
    fn discard_keeps_existing_dir_and_foreign_files() {
        let tmp = tempfile::tempdir().unwrap();
        std::fs::write(tmp.path().join("keep.txt"), b"").unwrap();
        let mut out = Outputs::open(tmp.path().to_path_buf()).unwrap();
        out.write("a.csv", b"x\n").unwrap();
        out.discard();
        assert!(tmp.path().join("keep.txt").exists());
        assert!(!tmp.path().join("a.csv").exists());
    }
}
