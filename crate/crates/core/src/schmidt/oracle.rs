//! Dense-SVD reference for the Schmidt number on coarse grids.

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::{restricted_kernel, Amplitude, BandwidthFilter, Free};
use crate::error::{Error, Result};
use crate::math;

/// Largest number of grid cells per photon accepted by the oracle.
pub const ORACLE_CELL_LIMIT: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadratureRule {
    Midpoint,
    GaussLegendre,
}

/// Tensor-product grid with `points` nodes along each free dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleGrid {
    pub points: usize,
    pub rule: QuadratureRule,
}

impl OracleGrid {
    pub fn new(points: usize, rule: QuadratureRule) -> Self {
        Self { points, rule }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub k: f64,
    /// Descending.
    pub singular_values: Vec<f64>,
    /// Σσ², the quadrature estimate of N.
    pub n_grid: f64,
    /// Σσ⁴, the quadrature estimate of B.
    pub b_grid: f64,
    pub cells_per_photon: usize,
}

fn nodes_1d(h: f64, grid: &OracleGrid) -> (Vec<f64>, Vec<f64>) {
    let n = grid.points;
    match grid.rule {
        QuadratureRule::Midpoint => {
            let step = 2.0 * h / n as f64;
            ((0..n).map(|i| -h + (i as f64 + 0.5) * step).collect(), vec![step; n])
        }
        QuadratureRule::GaussLegendre => {
            let (x, w) = math::gauss_legendre(n);
            (x.iter().map(|x| x * h).collect(), w.iter().map(|w| w * h).collect())
        }
    }
}

/// Tensor nodes and weights, last free dimension fastest.
fn tensor_nodes(filter: &BandwidthFilter, grid: &OracleGrid) -> Result<(Vec<Free>, Vec<f64>)> {
    filter.validate()?;
    let d = filter.model.dims();
    if grid.points == 0 {
        return Err(Error::validation("points", "must be ≥ 1"));
    }
    let cells = grid.points.checked_pow(d as u32).unwrap_or(usize::MAX);
    if cells > ORACLE_CELL_LIMIT {
        let max_points = (ORACLE_CELL_LIMIT as f64).powf(1.0 / d as f64).floor() as usize;
        return Err(Error::OracleTooLarge {
            cells,
            limit: ORACLE_CELL_LIMIT,
            suggestion: format!("points ≤ {max_points} per dimension, or the Monte Carlo estimator"),
        });
    }
    let h = filter.half_widths();
    let axes: Vec<_> = (0..d).map(|i| nodes_1d(h[i], grid)).collect();
    let mut nodes = Vec::with_capacity(cells);
    let mut weights = Vec::with_capacity(cells);
    for flat in 0..cells {
        let mut f = [0.0; 3];
        let mut w = 1.0;
        let mut rem = flat;
        for i in (0..d).rev() {
            let k = rem % grid.points;
            rem /= grid.points;
            f[i] = axes[i].0[k];
            w *= axes[i].1[k];
        }
        nodes.push(f);
        weights.push(w);
    }
    Ok((nodes, weights))
}

fn weighted_matrix<A: Amplitude + ?Sized>(
    filter: &BandwidthFilter,
    amplitude: &A,
    nodes: &[Free],
    weights: &[f64],
) -> Vec<Complex64> {
    let n = nodes.len();
    let mut m = vec![Complex64::new(0.0, 0.0); n * n];
    m.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, v) in row.iter_mut().enumerate() {
            *v = restricted_kernel(filter, amplitude, &nodes[i], &nodes[j])
                * (weights[i] * weights[j]).sqrt();
        }
    });
    m
}

fn singular_values(m: &[Complex64], n: usize) -> Result<Vec<f64>> {
    let mat = Mat::<Complex64>::from_fn(n, n, |i, j| m[i * n + j]);
    mat.singular_values()
        .map_err(|e| Error::Linalg(format!("{e:?}")))
}

/// Schmidt number from the singular values of the quadrature-weighted kernel
/// matrix `M_ij = ψ̃(w_i, w_j)·√(c_i c_j)`.
pub fn svd_oracle<A: Amplitude + ?Sized>(
    filter: &BandwidthFilter,
    amplitude: &A,
    grid: &OracleGrid,
) -> Result<OracleResult> {
    let (nodes, weights) = tensor_nodes(filter, grid)?;
    let n = nodes.len();
    let m = weighted_matrix(filter, amplitude, &nodes, &weights);
    let sv = singular_values(&m, n)?;
    let s2: Vec<f64> = sv.iter().map(|s| s * s).collect();
    let s4: Vec<f64> = s2.iter().map(|s| s * s).collect();
    let n_grid = math::pairwise_sum(&s2);
    let b_grid = math::pairwise_sum(&s4);
    if !(b_grid > 0.0) {
        return Err(Error::FailedEstimate("kernel vanishes on the oracle grid".into()));
    }
    Ok(OracleResult {
        k: n_grid * n_grid / b_grid,
        singular_values: sv,
        n_grid,
        b_grid,
        cells_per_photon: n,
    })
}

/// Unitary multidimensional DFT of `count` vectors of length `points^dims`;
/// vector `v` starts at `v·outer` and its elements are `inner` apart.
fn unitary_dft(data: &mut [Complex64], points: usize, dims: usize, (outer, inner): (usize, usize), count: usize) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(points);
    let norm = 1.0 / (points as f64).sqrt();
    let mut buf = vec![Complex64::new(0.0, 0.0); points];
    for v in 0..count {
        let base = v * outer;
        // axis a has stride points^(dims-1-a) within the vector
        for a in 0..dims {
            let axis_stride = points.pow((dims - 1 - a) as u32);
            let total = points.pow(dims as u32);
            for start in 0..total {
                if (start / axis_stride) % points != 0 {
                    continue;
                }
                for (k, b) in buf.iter_mut().enumerate() {
                    *b = data[base + (start + k * axis_stride) * inner];
                }
                fft.process(&mut buf);
                for (k, b) in buf.iter().enumerate() {
                    data[base + (start + k * axis_stride) * inner] = b * norm;
                }
            }
        }
    }
}

/// Singular values of the kernel after a unitary DFT on each photon's index,
/// i.e. of the direct-space (Δx, Δt) representation sampled on the conjugate
/// grid. They equal those of [`svd_oracle`] on a midpoint grid.
pub fn direct_domain_singular_values<A: Amplitude + ?Sized>(
    filter: &BandwidthFilter,
    amplitude: &A,
    points: usize,
) -> Result<Vec<f64>> {
    let grid = OracleGrid::new(points, QuadratureRule::Midpoint);
    let (nodes, weights) = tensor_nodes(filter, &grid)?;
    let n = nodes.len();
    let d = filter.model.dims();
    let mut m = weighted_matrix(filter, amplitude, &nodes, &weights);
    unitary_dft(&mut m, points, d, (n, 1), n);
    unitary_dft(&mut m, points, d, (1, n), n);
    singular_values(&m, n)
}

/// Largest symmetry block accepted by [`symmetric_oracle`].
pub const SYMMETRIC_BLOCK_LIMIT: usize = 8192;

/// One symmetry sector of the transverse plane: parities under `q_x → −q_x`,
/// `q_y → −q_y` and, when present, `q_x ↔ q_y`.
struct Sector {
    sx: f64,
    sy: f64,
    swap: Option<f64>,
    /// Number of sectors with the same spectrum.
    multiplicity: f64,
}

const SECTORS: [Sector; 5] = [
    Sector { sx: 1.0, sy: 1.0, swap: Some(1.0), multiplicity: 1.0 },
    Sector { sx: 1.0, sy: 1.0, swap: Some(-1.0), multiplicity: 1.0 },
    Sector { sx: -1.0, sy: -1.0, swap: Some(1.0), multiplicity: 1.0 },
    Sector { sx: -1.0, sy: -1.0, swap: Some(-1.0), multiplicity: 1.0 },
    // (even, odd) and (odd, even) are exchanged by the swap
    Sector { sx: 1.0, sy: -1.0, swap: None, multiplicity: 2.0 },
];

/// Symmetry-adapted transverse basis vector: grid points with coefficients,
/// the first entry being the representative point.
struct TransverseBasis {
    rep: (usize, usize),
    rep_coefficient: f64,
    terms: Vec<((usize, usize), f64)>,
}

fn sector_basis(sector: &Sector, points: usize) -> Vec<TransverseBasis> {
    let half = points / 2;
    // grid index of ±magnitude k
    let idx = |k: usize, sign: f64| if sign > 0.0 { half + k } else { half - 1 - k };
    let mut out = Vec::new();
    for a in 0..half {
        for b in 0..half {
            if sector.swap.is_some() && a > b {
                continue;
            }
            let mut terms: Vec<((usize, usize), f64)> = Vec::with_capacity(8);
            let swaps: &[bool] = if sector.swap.is_some() { &[false, true] } else { &[false] };
            for &sw in swaps {
                let (m, n) = if sw { (b, a) } else { (a, b) };
                for ex in [1.0, -1.0] {
                    for ey in [1.0, -1.0] {
                        let mut chi = 1.0;
                        if ex < 0.0 {
                            chi *= sector.sx;
                        }
                        if ey < 0.0 {
                            chi *= sector.sy;
                        }
                        if sw {
                            chi *= sector.swap.unwrap_or(1.0);
                        }
                        let p = (idx(m, ex), idx(n, ey));
                        match terms.iter_mut().find(|t| t.0 == p) {
                            Some(t) => t.1 += chi,
                            None => terms.push((p, chi)),
                        }
                    }
                }
            }
            terms.retain(|t| t.1 != 0.0);
            if terms.is_empty() {
                continue;
            }
            let norm = terms.iter().map(|t| t.1 * t.1).sum::<f64>().sqrt();
            for t in &mut terms {
                t.1 /= norm;
            }
            let rep = (idx(a, 1.0), idx(b, 1.0));
            let rep_coefficient = terms.iter().find(|t| t.0 == rep).map_or(0.0, |t| t.1);
            out.push(TransverseBasis { rep, rep_coefficient, terms });
        }
    }
    out
}

/// Same result as [`svd_oracle`] for `Full3d` kernels that are
/// [mirror symmetric](Amplitude::mirror_symmetric), on grids too large for a
/// single dense matrix. The weighted kernel matrix is block-diagonal in the
/// symmetry sectors; each block contributes `‖M_s‖²_F` to N and
/// `‖M_s M_s†‖²_F` to B. Singular values are not returned.
pub fn symmetric_oracle<A: Amplitude + ?Sized>(
    filter: &BandwidthFilter,
    amplitude: &A,
    grid: &OracleGrid,
) -> Result<OracleResult> {
    filter.validate()?;
    if filter.model != super::Model::Full3d {
        return Err(Error::validation("model", "symmetric oracle needs the full 3D model"));
    }
    if !amplitude.mirror_symmetric() {
        return Err(Error::validation("amplitude", "kernel lacks the transverse mirror symmetry"));
    }
    let p = grid.points;
    if p < 2 || p % 2 != 0 {
        return Err(Error::validation("points", "must be even and ≥ 2"));
    }
    let largest = p * p * p / 4;
    if largest > SYMMETRIC_BLOCK_LIMIT {
        let max_points = ((4 * SYMMETRIC_BLOCK_LIMIT) as f64).cbrt().floor() as usize & !1;
        return Err(Error::OracleTooLarge {
            cells: p * p * p,
            limit: 4 * SYMMETRIC_BLOCK_LIMIT,
            suggestion: format!("points ≤ {max_points} per dimension"),
        });
    }
    let (xq, wq) = nodes_1d(filter.q_max, grid);
    let (xo, wo) = nodes_1d(filter.omega_max, grid);
    let point = |(ix, iy): (usize, usize), iw: usize| ([xq[ix], xq[iy], xo[iw]], wq[ix] * wq[iy] * wo[iw]);

    let mut n_total = 0.0;
    let mut b_total = 0.0;
    for sector in &SECTORS {
        let basis = sector_basis(sector, p);
        let n = basis.len() * p;
        let mut block = Mat::<Complex64>::zeros(n, n);
        let mut row = vec![Complex64::new(0.0, 0.0); n];
        for (u, tb) in basis.iter().enumerate() {
            for iw1 in 0..p {
                let (f1, c1) = point(tb.rep, iw1);
                row.par_iter_mut().enumerate().for_each(|(col, v)| {
                    let (tv, iw2) = (&basis[col / p], col % p);
                    *v = tv
                        .terms
                        .iter()
                        .map(|&(r, coef)| {
                            let (f2, c2) = point(r, iw2);
                            restricted_kernel(filter, amplitude, &f1, &f2) * (coef * (c1 * c2).sqrt())
                        })
                        .sum::<Complex64>()
                        / tb.rep_coefficient;
                });
                let i = u * p + iw1;
                for (j, v) in row.iter().enumerate() {
                    block[(i, j)] = *v;
                }
            }
        }
        let frob = block.norm_l2();
        let gram = &block * block.adjoint();
        let g = gram.norm_l2();
        n_total += sector.multiplicity * frob * frob;
        b_total += sector.multiplicity * g * g;
    }
    if !(b_total > 0.0) {
        return Err(Error::FailedEstimate("kernel vanishes on the oracle grid".into()));
    }
    Ok(OracleResult {
        k: n_total * n_total / b_total,
        singular_values: Vec::new(),
        n_grid: n_total,
        b_grid: b_total,
        cells_per_photon: p * p * p,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phasematch::FourierCoord;
    use crate::schmidt::Model;

    /// Identity kernel: two equal singular values on a two-cell grid.
    struct Diagonal;
    impl Amplitude for Diagonal {
        fn amplitude(&self, a: FourierCoord, b: FourierCoord) -> Complex64 {
            Complex64::new(if (a.omega_shift - b.omega_shift).abs() < 1e-12 { 1.0 } else { 0.0 }, 0.0)
        }
    }

    struct Product;
    impl Amplitude for Product {
        fn amplitude(&self, a: FourierCoord, b: FourierCoord) -> Complex64 {
            Complex64::new((-a.omega_shift.powi(2)).exp() * (1.0 + b.omega_shift), 0.3)
        }
    }

    struct Twin;
    impl Amplitude for Twin {
        fn amplitude(&self, a: FourierCoord, b: FourierCoord) -> Complex64 {
            let s = a.omega_shift + b.omega_shift;
            let d = a.omega_shift - b.omega_shift;
            Complex64::new((-s * s / 2.0 - d * d / 8.0).exp(), 0.1 * s)
        }
    }

    #[test]
    fn diagonal_two_cell_kernel_has_k_two() {
        let f = BandwidthFilter::new(1.0, 1.0, Model::Temporal1d);
        let r = svd_oracle(&f, &Diagonal, &OracleGrid::new(2, QuadratureRule::Midpoint)).unwrap();
        assert!((r.k - 2.0).abs() < 1e-12);
        assert!((r.singular_values[0] - r.singular_values[1]).abs() < 1e-12);
    }

    #[test]
    fn product_kernel_has_k_one() {
        let f = BandwidthFilter::new(1.0, 2.0, Model::Temporal1d);
        for rule in [QuadratureRule::Midpoint, QuadratureRule::GaussLegendre] {
            let r = svd_oracle(&f, &Product, &OracleGrid::new(40, rule));
            // the 0.3i offset breaks separability; check rank ≤ 2 instead
            let sv = r.unwrap().singular_values;
            assert!(sv[2] < 1e-10 * sv[0], "{sv:?}");
        }
    }

    #[test]
    fn gaussian_twin_converges_to_closed_form() {
        struct Real;
        impl Amplitude for Real {
            fn amplitude(&self, a: FourierCoord, b: FourierCoord) -> Complex64 {
                let s = a.omega_shift + b.omega_shift;
                let d = a.omega_shift - b.omega_shift;
                Complex64::new((-s * s / 2.0 - d * d / 8.0).exp(), 0.0)
            }
        }
        let f = BandwidthFilter::new(1.0, 14.0, Model::Temporal1d);
        let r = svd_oracle(&f, &Real, &OracleGrid::new(200, QuadratureRule::GaussLegendre)).unwrap();
        assert!((r.k - 1.25).abs() < 1e-8, "{}", r.k);
    }

    #[test]
    fn direct_domain_preserves_singular_values() {
        let f = BandwidthFilter::new(1.0, 3.0, Model::Full3d);
        struct Twin3;
        impl Amplitude for Twin3 {
            fn amplitude(&self, a: FourierCoord, b: FourierCoord) -> Complex64 {
                Twin.amplitude(a, b) * (-(a.qx + b.qx).powi(2) - (a.qy - 0.5 * b.qy).powi(2)).exp()
            }
        }
        let grid = OracleGrid::new(6, QuadratureRule::Midpoint);
        let a = svd_oracle(&f, &Twin3, &grid).unwrap().singular_values;
        let b = direct_domain_singular_values(&f, &Twin3, 6).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-10 * a[0], "{x} vs {y}");
        }
    }

    #[test]
    fn symmetric_blocks_reproduce_dense_oracle() {
        use crate::correlation::PumpConfig;
        use crate::dispersion::CrystalConfig;
        use crate::schmidt::PdcAmplitude;
        let c = CrystalConfig::bbo(28f64.to_radians());
        let pump = PumpConfig { waist: 100e-6, duration: 200e-15, ..PumpConfig::default() };
        let amp = PdcAmplitude::new(&c, &pump).unwrap();
        let f = BandwidthFilter::new(2e4, 2e13, Model::Full3d);
        for rule in [QuadratureRule::Midpoint, QuadratureRule::GaussLegendre] {
            let grid = OracleGrid::new(8, rule);
            let dense = svd_oracle(&f, &amp, &grid).unwrap();
            let blocks = symmetric_oracle(&f, &amp, &grid).unwrap();
            assert!((dense.n_grid / blocks.n_grid - 1.0).abs() < 1e-10);
            assert!((dense.b_grid / blocks.b_grid - 1.0).abs() < 1e-10);
            assert!((dense.k / blocks.k - 1.0).abs() < 1e-10, "{} vs {}", dense.k, blocks.k);
        }
        assert!(symmetric_oracle(&f, &Twin, &OracleGrid::new(8, QuadratureRule::Midpoint)).is_err());
        assert!(symmetric_oracle(&f, &amp, &OracleGrid::new(7, QuadratureRule::Midpoint)).is_err());
    }

    #[test]
    fn oversized_grid_is_rejected_with_suggestion() {
        let f = BandwidthFilter::new(1.0, 1.0, Model::Full3d);
        match svd_oracle(&f, &Twin, &OracleGrid::new(17, QuadratureRule::Midpoint)) {
            Err(Error::OracleTooLarge { cells, suggestion, .. }) => {
                assert_eq!(cells, 17 * 17 * 17);
                assert!(suggestion.contains("16"));
            }
            other => panic!("{other:?}"),
        }
    }
}
