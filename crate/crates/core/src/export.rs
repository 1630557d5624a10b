//! File formats written by the CLI.
//!
//! Correlation maps are stored as a raw little-endian `f64` file holding three
//! consecutive `n_x × n_t` row-major planes (Re ψ, Im ψ, |ψ|²) and a JSON
//! sidecar describing shape, axes and provenance. Axis values are
//! `(i − n/2)·step`.

use std::fs;
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::correlation::CorrelationMap;
use crate::dispersion::DispersionSample;
use crate::error::{Error, Result};
use crate::phasematch::PhaseMatchCurve;
use crate::schmidt::SweepResult;

pub const MAP_FORMAT: &str = "biphoton-map";
pub const MAP_VERSION: u32 = 1;
pub const MAP_PLANES: [&str; 3] = ["re", "im", "intensity"];

pub const CURVE_HEADER: [&str; 3] = ["omega_rad_s", "q_pm_rad_m", "slope_s_m"];
pub const SWEEP_HEADER: [&str; 9] = [
    "omega_max_hz",
    "k3d",
    "k3d_err",
    "k2d",
    "k2d_err",
    "k1d",
    "k1d_err",
    "kprod",
    "kprod_err",
];
pub const DISPERSION_HEADER: [&str; 4] = [
    "omega_shift_rad_s",
    "k_signal_rad_m",
    "group_velocity_m_s",
    "gvd_s2_m",
];

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Shortest round-tripping scientific form.
fn num(x: f64) -> String {
    format!("{x:e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn csv_bytes<F>(header: &[&str], fill: F) -> Result<Vec<u8>>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> Result<()>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    fill(&mut w)?;
    w.into_inner().map_err(|e| Error::Domain(format!("csv buffer: {e}")))
}

pub fn dispersion_csv(samples: &[DispersionSample]) -> Result<Vec<u8>> {
    csv_bytes(&DISPERSION_HEADER, |w| {
        for s in samples {
            w.write_record([s.omega_shift, s.k_signal, s.group_velocity, s.gvd].map(num))?;
        }
        Ok(())
    })
}

/// Gaps in the curve become empty fields.
pub fn curve_csv(curve: &PhaseMatchCurve) -> Result<Vec<u8>> {
    csv_bytes(&CURVE_HEADER, |w| {
        for ((w0, q), s) in curve.omega.iter().zip(&curve.q_pm).zip(&curve.slope) {
            w.write_record([num(*w0), opt(*q), opt(*s)])?;
        }
        Ok(())
    })
}

/// The `omega_max_hz` column carries Ω_max in rad/s, the unit used throughout.
/// Failed cells are empty.
pub fn sweep_csv(result: &SweepResult) -> Result<Vec<u8>> {
    csv_bytes(&SWEEP_HEADER, |w| {
        for r in &result.rows {
            let mut rec = vec![num(r.omega_max)];
            for k in [r.k3d, r.k2d, r.k1d, r.kprod] {
                rec.push(opt(k.map(|k| k.0)));
                rec.push(opt(k.map(|k| k.1)));
            }
            w.write_record(&rec)?;
        }
        Ok(())
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapHeader {
    pub format: String,
    pub version: u32,
    pub byte_order: String,
    pub dtype: String,
    pub planes: Vec<String>,
    pub n_x: usize,
    pub n_t: usize,
    /// m
    pub delta_x_step: f64,
    /// s
    pub delta_t_step: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapSidecar {
    pub header: MapHeader,
    /// Grid, crystal and diagnostics of the run; free-form for readers.
    #[serde(default)]
    pub metadata: serde_json::Value,
}

/// A map read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct MapData {
    pub header: MapHeader,
    pub delta_x: Vec<f64>,
    pub delta_t: Vec<f64>,
    pub psi: Vec<Complex64>,
    pub intensity: Vec<f64>,
}

pub fn map_sidecar(map: &CorrelationMap) -> Result<MapSidecar> {
    Ok(MapSidecar {
        header: MapHeader {
            format: MAP_FORMAT.into(),
            version: MAP_VERSION,
            byte_order: "little".into(),
            dtype: "f64".into(),
            planes: MAP_PLANES.iter().map(|s| s.to_string()).collect(),
            n_x: map.delta_x.len(),
            n_t: map.delta_t.len(),
            delta_x_step: map.grid.delta_x_step(),
            delta_t_step: map.grid.delta_t_step(),
        },
        metadata: serde_json::to_value(map)?,
    })
}

pub fn map_binary(map: &CorrelationMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(map.psi.len() * 24);
    for z in &map.psi {
        out.extend_from_slice(&z.re.to_le_bytes());
    }
    for z in &map.psi {
        out.extend_from_slice(&z.im.to_le_bytes());
    }
    for z in &map.psi {
        out.extend_from_slice(&z.norm_sqr().to_le_bytes());
    }
    out
}

fn axis(n: usize, step: f64) -> Vec<f64> {
    (0..n).map(|i| (i as f64 - (n / 2) as f64) * step).collect()
}

/// Decodes a sidecar and its binary planes, checking shape and format.
pub fn decode_map(sidecar: &[u8], binary: &[u8]) -> Result<MapData> {
    let side: MapSidecar = serde_json::from_slice(sidecar)?;
    let h = side.header;
    let bad = |reason: String| Error::validation("map", reason);
    if h.format != MAP_FORMAT {
        return Err(bad(format!("format \"{}\" is not {MAP_FORMAT}", h.format)));
    }
    if h.version != MAP_VERSION {
        return Err(bad(format!("unsupported version {}", h.version)));
    }
    if h.byte_order != "little" || h.dtype != "f64" {
        return Err(bad("only little-endian f64 planes are supported".into()));
    }
    if h.planes != MAP_PLANES {
        return Err(bad(format!("planes {:?}, expected {MAP_PLANES:?}", h.planes)));
    }
    if h.n_x < 2 || h.n_t < 2 {
        return Err(bad("both axes need at least two samples".into()));
    }
    if !(h.delta_x_step > 0.0 && h.delta_x_step.is_finite() && h.delta_t_step > 0.0 && h.delta_t_step.is_finite()) {
        return Err(bad("axis steps must be positive and finite".into()));
    }
    let cells = h
        .n_x
        .checked_mul(h.n_t)
        .filter(|c| c.checked_mul(24).is_some())
        .ok_or_else(|| bad("shape overflows".into()))?;
    if binary.len() != cells * 24 {
        return Err(bad(format!(
            "binary holds {} bytes, shape needs {}",
            binary.len(),
            cells * 24
        )));
    }
    let value = |i: usize| f64::from_le_bytes(binary[8 * i..8 * i + 8].try_into().unwrap());
    let psi = (0..cells).map(|i| Complex64::new(value(i), value(cells + i))).collect();
    let intensity = (0..cells).map(|i| value(2 * cells + i)).collect();
    Ok(MapData {
        delta_x: axis(h.n_x, h.delta_x_step),
        delta_t: axis(h.n_t, h.delta_t_step),
        header: h,
        psi,
        intensity,
    })
}

pub fn read_map(sidecar: &Path, binary: &Path) -> Result<MapData> {
    let s = fs::read(sidecar).map_err(|e| Error::io(sidecar, e))?;
    let b = fs::read(binary).map_err(|e| Error::io(binary, e))?;
    decode_map(&s, &b)
}

/// |ψ|² on every `stride`-th sample of each axis, with `stride` chosen so that
/// neither axis exceeds `max_per_axis` points.
pub fn map_csv(map: &CorrelationMap, max_per_axis: usize) -> Result<Vec<u8>> {
    let (nx, nt) = (map.delta_x.len(), map.delta_t.len());
    let sx = nx.div_ceil(max_per_axis.max(1));
    let st = nt.div_ceil(max_per_axis.max(1));
    csv_bytes(&["delta_x_m", "delta_t_s", "intensity"], |w| {
        for ix in (0..nx).step_by(sx) {
            for it in (0..nt).step_by(st) {
                w.write_record([
                    num(map.delta_x[ix]),
                    num(map.delta_t[it]),
                    num(map.at(ix, it).norm_sqr()),
                ])?;
            }
        }
        Ok(())
    })
}

/// Writes `map.bin`, `map.json` and a downsampled `map.csv` into `dir`.
pub fn write_map(dir: &Path, map: &CorrelationMap) -> Result<()> {
    write_file(&dir.join("map.bin"), &map_binary(map))?;
    write_file(&dir.join("map.json"), &serde_json::to_vec_pretty(&map_sidecar(map)?)?)?;
    write_file(&dir.join("map.csv"), &map_csv(map, 256)?)
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    write_file(path, bytes)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_file(path, &bytes)
}

/// gnuplot scripts, run from the output directory.
pub mod plots {
    pub const CURVE: &str = "\
set datafile separator ','
set key autotitle columnhead
set xlabel 'Omega (rad/s)'
set ylabel 'q_pm (rad/m)'
plot 'curve.csv' using 1:2 with lines title 'q_pm', \\
     '' using 1:(-$2) with lines notitle
pause mouse close
";

    pub const MAP: &str = "\
set datafile separator ','
set key autotitle columnhead
set xlabel 'Delta x (m)'
set ylabel 'Delta t (s)'
set palette rgbformulae 33,13,10
plot 'map.csv' using 1:2:3 with image notitle
pause mouse close
";

    pub const SWEEP: &str = "\
set datafile separator ','
set key autotitle columnhead
set logscale x
set xlabel 'Omega_max (rad/s)'
set ylabel 'K'
set logscale y
plot 'sweep.csv' using 1:2:3 with yerrorlines title 'K_3D', \\
     '' using 1:8:9 with yerrorlines title 'K_2D x K_1D'
pause mouse close
";
}

pub fn write_plot_script(dir: &Path, name: &str, script: &str) -> Result<()> {
    let path = dir.join(name);
    let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
    f.write_all(script.as_bytes()).map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::correlation::{correlation_map, MapMode, PumpConfig, SpectralGrid};
    use crate::dispersion::CrystalConfig;

    fn small_map() -> CorrelationMap {
        let c = CrystalConfig::bbo(28f64.to_radians());
        let g = SpectralGrid::covering_curve(&c, 64, 32, 2e14).unwrap();
        correlation_map(&g, &c, &PumpConfig::default(), MapMode::Slice2d).unwrap()
    }

    #[test]
    fn map_round_trips_through_files() {
        let m = small_map();
        let dir = tempfile::tempdir().unwrap();
        write_map(dir.path(), &m).unwrap();
        let back = read_map(&dir.path().join("map.json"), &dir.path().join("map.bin")).unwrap();
        assert_eq!(back.psi, m.psi);
        assert_eq!(back.intensity, m.intensity());
        assert_eq!(back.delta_x, m.delta_x);
        assert_eq!(back.delta_t, m.delta_t);
    }

    #[test]
    fn truncated_binary_is_rejected() {
        let m = small_map();
        let side = serde_json::to_vec(&map_sidecar(&m).unwrap()).unwrap();
        let bin = map_binary(&m);
        assert!(decode_map(&side, &bin[..bin.len() - 8]).is_err());
        assert!(decode_map(b"{}", &bin).is_err());
    }

    #[test]
    fn csv_headers_and_gaps() {
        let curve = PhaseMatchCurve {
            omega: vec![0.0, 1.0],
            q_pm: vec![Some(2.0), None],
            slope: vec![Some(0.5), None],
            degenerate: None,
            regime: crate::phasematch::Regime::Mixed,
            delta0: 0.0,
        };
        let text = String::from_utf8(curve_csv(&curve).unwrap()).unwrap();
        assert_eq!(text, "omega_rad_s,q_pm_rad_m,slope_s_m\n0e0,2e0,5e-1\n1e0,,\n");
    }

    #[test]
    fn downsampled_csv_respects_limit() {
        let m = small_map();
        let text = String::from_utf8(map_csv(&m, 16).unwrap()).unwrap();
        assert_eq!(text.lines().count(), 1 + 16 * 16);
    }
}
