//! DOA estimation from a covariance matrix: Capon, MUSIC, and Root-MUSIC.

use ndarray::{Array1, Array2};
use ndarray_linalg::{EigVals, Eigh, UPLO};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::array::{steering_ula_unchecked, ArrayGeometry};
use crate::error::{invalid, DmError, Result};

/// Angle grid a spectrum is evaluated on.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanGrid {
    min_deg: f64,
    max_deg: f64,
    step_deg: f64,
}

impl ScanGrid {
    pub fn new(min_deg: f64, max_deg: f64, step_deg: f64) -> Result<Self> {
        if !(step_deg > 0.0) || !(max_deg > min_deg) {
            return Err(invalid("scan_grid", "need max > min and step > 0"));
        }
        Ok(Self {
            min_deg,
            max_deg,
            step_deg,
        })
    }

    pub fn step_deg(&self) -> f64 {
        self.step_deg
    }

    pub fn angles(&self) -> Vec<f64> {
        let n = ((self.max_deg - self.min_deg) / self.step_deg).round() as usize;
        (0..=n)
            .map(|i| self.min_deg + i as f64 * self.step_deg)
            .collect()
    }
}

impl Default for ScanGrid {
    /// Full ULA field of view at 0.01 degree resolution.
    fn default() -> Self {
        Self::new(-90.0, 90.0, 0.01).unwrap()
    }
}

/// Pseudo-spectrum sampled over a scan grid.
#[derive(Debug, Clone)]
pub struct SpatialSpectrum {
    pub grid_angles_deg: Vec<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DoaMethod {
    Capon,
    Music,
    RootMusic,
}

/// Estimated source angles, sorted ascending.
#[derive(Debug, Clone)]
pub struct DoaEstimate {
    pub angles_deg: Vec<f64>,
    pub method: DoaMethod,
    /// Roots whose implied sine fell outside [-1, 1] and were skipped.
    pub dropped_roots: usize,
}

/// Local maxima of a spectrum, padded from global maxima when too few exist.
#[derive(Debug, Clone)]
pub struct PeakSet {
    pub angles_deg: Vec<f64>,
    /// Set when fewer than the requested number of strict local maxima existed.
    pub degraded: bool,
}

fn eigh_sorted(cov: &Array2<Complex64>) -> Result<(Array1<f64>, Array2<Complex64>)> {
    let (vals, mut vecs) = cov.eigh(UPLO::Lower)?;
    // depending on the memory layout handed to LAPACK, the backend can return
    // the eigenvectors of the transpose, i.e. the conjugated columns; detect
    // by eigen-residual and repair
    let residual = |v: &Array2<Complex64>| -> f64 {
        let rv = cov.dot(v);
        let mut acc = 0.0;
        for (k, col) in rv.columns().into_iter().enumerate() {
            for (i, z) in col.iter().enumerate() {
                acc += (z - vals[k] * v[(i, k)]).norm_sqr();
            }
        }
        acc
    };
    let conj = vecs.mapv(|z| z.conj());
    if residual(&conj) < residual(&vecs) {
        vecs = conj;
    }
    // canonical phase: first entry with non-negligible magnitude made real-positive
    for mut col in vecs.columns_mut() {
        let pivot = col.iter().find(|z| z.norm() > 1e-12).copied();
        if let Some(p) = pivot {
            let phase = p.conj() / p.norm();
            col.mapv_inplace(|z| z * phase);
        }
    }
    Ok((vals, vecs))
}

/// Columns spanning the noise subspace: eigenvectors of the `dim` smallest
/// eigenvalues, ascending eigenvalue order.
fn noise_subspace(cov: &Array2<Complex64>, dim: usize) -> Result<Array2<Complex64>> {
    let (_, vecs) = eigh_sorted(cov)?;
    Ok(vecs.slice(ndarray::s![.., 0..dim]).to_owned())
}

/// Capon (MVDR) spectrum `1 / (a^H R^-1 a)` with diagonal loading when the
/// covariance is too ill-conditioned to invert reliably.
pub fn capon_spectrum(
    cov: &Array2<Complex64>,
    geometry: &ArrayGeometry,
    grid: &ScanGrid,
) -> Result<SpatialSpectrum> {
    let n = geometry.num_elements();
    if cov.nrows() != n || cov.ncols() != n {
        return Err(invalid("cov", "covariance size must match the array"));
    }
    let (mut vals, vecs) = eigh_sorted(cov)?;
    let trace: f64 = vals.iter().sum();
    let loading = 1e-6 * trace / n as f64;
    let cond_bad = vals[0] <= 0.0 || vals[n - 1] / vals[0] > 1e12;
    if cond_bad {
        vals.mapv_inplace(|v| v + loading);
    }
    if vals[0] <= 0.0 {
        return Err(DmError::IllConditioned);
    }
    let inv_vals: Vec<f64> = vals.iter().map(|&v| 1.0 / v).collect();

    let angles = grid.angles();
    let values: Vec<f64> = angles
        .par_iter()
        .map(|&theta| {
            let a = steering_ula_unchecked(geometry, theta);
            // a^H R^-1 a = sum_k |v_k^H a|^2 / w_k
            let mut denom = 0.0;
            for (k, col) in vecs.columns().into_iter().enumerate() {
                let proj: Complex64 = col
                    .iter()
                    .zip(a.entries())
                    .map(|(v, ai)| v.conj() * ai)
                    .sum();
                denom += proj.norm_sqr() * inv_vals[k];
            }
            1.0 / denom
        })
        .collect();
    Ok(SpatialSpectrum {
        grid_angles_deg: angles,
        values,
    })
}

/// MUSIC spectrum `1 / ||E_n^H a||^2` with `q` assumed sources.
pub fn music_spectrum(
    cov: &Array2<Complex64>,
    geometry: &ArrayGeometry,
    num_sources: usize,
    grid: &ScanGrid,
) -> Result<SpatialSpectrum> {
    let n = geometry.num_elements();
    if num_sources >= n {
        return Err(DmError::InvalidSourceCount { q: num_sources, n });
    }
    if cov.nrows() != n || cov.ncols() != n {
        return Err(invalid("cov", "covariance size must match the array"));
    }
    let e_n = noise_subspace(cov, n - num_sources)?;
    let angles = grid.angles();
    let values: Vec<f64> = angles
        .par_iter()
        .map(|&theta| {
            let a = steering_ula_unchecked(geometry, theta);
            1.0 / noise_projection(&e_n, a.entries()).max(f64::MIN_POSITIVE)
        })
        .collect();
    Ok(SpatialSpectrum {
        grid_angles_deg: angles,
        values,
    })
}

/// `||E_n^H a||^2`
fn noise_projection(e_n: &Array2<Complex64>, a: &[Complex64]) -> f64 {
    e_n.columns()
        .into_iter()
        .map(|col| {
            col.iter()
                .zip(a)
                .map(|(v, ai)| v.conj() * ai)
                .sum::<Complex64>()
                .norm_sqr()
        })
        .sum()
}

/// Roots of `sum_k coeffs[k] z^k` via companion-matrix eigenvalues.
fn poly_roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let max_mag = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if max_mag == 0.0 {
        return Err(DmError::Linalg("zero polynomial".to_string()));
    }
    let mut c: Vec<Complex64> = coeffs.iter().map(|z| z / max_mag).collect();
    let mut roots = Vec::new();
    // strip roots at the origin
    while c.first().map_or(false, |z| z.norm() < 1e-14) {
        roots.push(Complex64::new(0.0, 0.0));
        c.remove(0);
    }
    // strip vanishing leading coefficients
    while c.last().map_or(false, |z| z.norm() < 1e-14) {
        c.pop();
    }
    let degree = c.len().saturating_sub(1);
    if degree == 0 {
        return Ok(roots);
    }
    let lead = c[degree];
    let mut comp = Array2::<Complex64>::zeros((degree, degree));
    for i in 1..degree {
        comp[(i, i - 1)] = Complex64::new(1.0, 0.0);
    }
    for i in 0..degree {
        comp[(i, degree - 1)] = -c[i] / lead;
    }
    let vals = comp.eigvals()?;
    roots.extend(vals.iter().copied());
    Ok(roots)
}

/// Minimize `||E_n^H a(theta)||^2` near `theta0` by golden-section search.
///
/// Companion-matrix rooting leaves ~sqrt(eps) wobble on double roots sitting
/// on the unit circle; polishing against the continuous null function restores
/// full precision for the noiseless recovery contract.
fn polish_angle(e_n: &Array2<Complex64>, geometry: &ArrayGeometry, theta0: f64) -> f64 {
    let f = |theta: f64| {
        let a = steering_ula_unchecked(geometry, theta.clamp(-90.0, 90.0));
        noise_projection(e_n, a.entries())
    };
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut lo = (theta0 - 0.05).max(-90.0);
    let mut hi = (theta0 + 0.05).min(90.0);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > 1e-11 {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
    }
    let mid = 0.5 * (lo + hi);
    if f(mid) <= f(theta0) {
        mid
    } else {
        theta0
    }
}

/// Root-MUSIC on a ULA covariance.
///
/// Builds the self-reciprocal polynomial from the noise projector's diagonal
/// sums, roots it, and keeps the `q` roots closest to (and not outside) the
/// unit circle. Roots whose implied sine falls outside [-1, 1] are dropped and
/// counted, never silently resampled.
pub fn root_music(
    cov: &Array2<Complex64>,
    geometry: &ArrayGeometry,
    num_sources: usize,
) -> Result<DoaEstimate> {
    let n = geometry.num_elements();
    let d = geometry
        .ula_spacing_m()
        .ok_or_else(|| DmError::UnsupportedGeometry("Root-MUSIC requires a ULA".to_string()))?;
    if num_sources == 0 || num_sources >= n {
        return Err(DmError::InvalidSourceCount { q: num_sources, n });
    }
    if cov.nrows() != n || cov.ncols() != n {
        return Err(invalid("cov", "covariance size must match the array"));
    }
    let e_n = noise_subspace(cov, n - num_sources)?;
    // projector C = E_n E_n^H; polynomial coefficient for z^l is the sum of
    // the l-th superdiagonal of C, l = -(N-1) .. N-1
    let mut c_proj = Array2::<Complex64>::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            let mut acc = Complex64::new(0.0, 0.0);
            for col in e_n.columns() {
                acc += col[i] * col[j].conj();
            }
            c_proj[(i, j)] = acc;
        }
    }
    let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * n - 1];
    for l in -(n as isize - 1)..=(n as isize - 1) {
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..n {
            let j = i as isize + l;
            if j >= 0 && j < n as isize {
                acc += c_proj[(i, j as usize)];
            }
        }
        coeffs[(l + n as isize - 1) as usize] = acc;
    }
    let roots = poly_roots(&coeffs)?;

    // the polynomial is self-reciprocal, so roots come in (z, 1/conj(z))
    // pairs; fold every root onto its closed-disk representative, order by
    // magnitude (closest to the circle from inside first), and collapse the
    // pair duplicates by phase. the phase tolerance is far below the 0.5
    // degree source-separation floor but far above companion-rooting noise.
    let mut candidates: Vec<Complex64> = roots
        .iter()
        .filter(|z| z.norm() > 1e-9)
        .map(|&z| {
            if z.norm() > 1.0 {
                Complex64::new(1.0, 0.0) / z.conj()
            } else {
                z
            }
        })
        .collect();
    candidates.sort_by(|a, b| b.norm().partial_cmp(&a.norm()).unwrap());
    let mut selected: Vec<Complex64> = Vec::new();
    for z in candidates {
        let duplicate = selected.iter().any(|s| {
            let mut dphi = (s.arg() - z.arg()).abs();
            if dphi > PI {
                dphi = 2.0 * PI - dphi;
            }
            dphi < 1e-4
        });
        if !duplicate {
            selected.push(z);
        }
    }

    let lambda = geometry.wavelength_m();
    let scale = lambda / (2.0 * PI * d);
    let mut dropped = 0usize;
    let mut angles = Vec::with_capacity(num_sources);
    for z in &selected {
        if angles.len() == num_sources {
            break;
        }
        let s = z.arg() * scale;
        if s.abs() <= 1.0 {
            let theta = polish_angle(&e_n, geometry, s.asin().to_degrees());
            angles.push(theta);
        } else {
            dropped += 1;
        }
    }
    if angles.len() < num_sources {
        return Err(DmError::NotEnoughRoots {
            needed: num_sources,
            found: angles.len(),
            dropped,
        });
    }
    angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(DoaEstimate {
        angles_deg: angles,
        method: DoaMethod::RootMusic,
        dropped_roots: dropped,
    })
}

/// The `q` largest strict local maxima, ties broken toward the smaller angle.
/// When fewer strict local maxima exist, the remainder is padded from the
/// global grid maxima and the result is flagged degraded.
pub fn find_peaks(spectrum: &SpatialSpectrum, num_peaks: usize) -> Result<PeakSet> {
    if num_peaks < 1 {
        return Err(invalid("num_peaks", "need at least one peak"));
    }
    let v = &spectrum.values;
    let a = &spectrum.grid_angles_deg;
    let mut locals: Vec<usize> = (1..v.len().saturating_sub(1))
        .filter(|&i| v[i] > v[i - 1] && v[i] > v[i + 1])
        .collect();
    locals.sort_by(|&i, &j| {
        v[j].partial_cmp(&v[i])
            .unwrap()
            .then(a[i].partial_cmp(&a[j]).unwrap())
    });
    let mut picked: Vec<usize> = locals.into_iter().take(num_peaks).collect();
    let mut degraded = false;
    if picked.len() < num_peaks {
        degraded = true;
        let mut global: Vec<usize> = (0..v.len()).collect();
        global.sort_by(|&i, &j| {
            v[j].partial_cmp(&v[i])
                .unwrap()
                .then(a[i].partial_cmp(&a[j]).unwrap())
        });
        for i in global {
            if picked.len() == num_peaks {
                break;
            }
            if !picked.contains(&i) {
                picked.push(i);
            }
        }
    }
    let mut angles: Vec<f64> = picked.into_iter().map(|i| a[i]).collect();
    angles.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(PeakSet {
        angles_deg: angles,
        degraded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::array::{generate_snapshots, sample_covariance, steering_ula, SourceScenario};

    fn geo(n: usize) -> ArrayGeometry {
        ArrayGeometry::ula_half_wavelength(n, 3.0e9).unwrap()
    }

    fn cov_for(angles: &[f64], noise: f64, t: usize, seed: u64, n: usize) -> Array2<Complex64> {
        let powers = vec![1.0; angles.len()];
        let sc = SourceScenario::new(angles.to_vec(), powers, noise).unwrap();
        let x = generate_snapshots(&sc, &geo(n), t, seed).unwrap();
        sample_covariance(&x)
    }

    #[test]
    fn capon_peaks_at_noiseless_source() {
        let g = geo(8);
        let r = cov_for(&[10.0], 0.0, 200, 1, 8);
        let grid = ScanGrid::new(-90.0, 90.0, 0.1).unwrap();
        let spec = capon_spectrum(&r, &g, &grid).unwrap();
        let imax = spec
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert!((spec.grid_angles_deg[imax] - 10.0).abs() <= 0.1 + 1e-9);
    }

    #[test]
    fn capon_is_flat_for_identity_covariance() {
        let g = geo(6);
        let r = Array2::<Complex64>::eye(6);
        let grid = ScanGrid::new(-80.0, 80.0, 0.5).unwrap();
        let spec = capon_spectrum(&r, &g, &grid).unwrap();
        let max = spec.values.iter().cloned().fold(f64::MIN, f64::max);
        let min = spec.values.iter().cloned().fold(f64::MAX, f64::min);
        assert!(max / min <= 1.0 + 1e-9);
    }

    #[test]
    fn capon_resolves_two_sources_at_20_db() {
        let g = geo(8);
        let r = cov_for(&[-20.0, 20.0], 0.01, 200, 2, 8);
        let grid = ScanGrid::new(-90.0, 90.0, 0.05).unwrap();
        let spec = capon_spectrum(&r, &g, &grid).unwrap();
        let peaks = find_peaks(&spec, 2).unwrap();
        assert!(!peaks.degraded);
        assert!((peaks.angles_deg[0] + 20.0).abs() < 1.0);
        assert!((peaks.angles_deg[1] - 20.0).abs() < 1.0);
    }

    #[test]
    fn capon_errors_on_zero_covariance() {
        let g = geo(4);
        let r = Array2::<Complex64>::zeros((4, 4));
        assert!(matches!(
            capon_spectrum(&r, &g, &ScanGrid::new(-10.0, 10.0, 1.0).unwrap()),
            Err(DmError::IllConditioned)
        ));
    }

    #[test]
    fn music_noiseless_peak_is_sharp() {
        let g = geo(8);
        let r = cov_for(&[10.0], 0.0, 200, 3, 8);
        let grid = ScanGrid::new(-90.0, 90.0, 0.1).unwrap();
        let spec = music_spectrum(&r, &g, 1, &grid).unwrap();
        let imax = spec
            .values
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert!((spec.grid_angles_deg[imax] - 10.0).abs() <= 0.1 + 1e-9);
        let mut sorted = spec.values.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = sorted[sorted.len() / 2];
        assert!(spec.values[imax] / median > 1e3);
    }

    #[test]
    fn music_with_zero_sources_is_unity() {
        let g = geo(5);
        let r = cov_for(&[0.0], 0.1, 50, 4, 5);
        let grid = ScanGrid::new(-60.0, 60.0, 1.0).unwrap();
        let spec = music_spectrum(&r, &g, 0, &grid).unwrap();
        for v in &spec.values {
            assert!((v - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn music_rejects_too_many_sources() {
        let g = geo(4);
        let r = Array2::<Complex64>::eye(4);
        let grid = ScanGrid::new(-10.0, 10.0, 1.0).unwrap();
        assert!(matches!(
            music_spectrum(&r, &g, 4, &grid),
            Err(DmError::InvalidSourceCount { .. })
        ));
    }

    #[test]
    fn noise_subspace_orthogonal_to_true_steering() {
        let g = geo(8);
        let r = cov_for(&[-15.0, 33.0], 0.0, 300, 5, 8);
        let e_n = noise_subspace(&r, 6).unwrap();
        for &theta in &[-15.0, 33.0] {
            let a = steering_ula(&g, theta).unwrap();
            assert!(noise_projection(&e_n, a.entries()).sqrt() < 1e-8);
        }
    }

    #[test]
    fn root_music_noiseless_recovery() {
        let g = geo(8);
        let r = cov_for(&[10.0], 0.0, 64, 6, 8);
        let est = root_music(&r, &g, 1).unwrap();
        assert!((est.angles_deg[0] - 10.0).abs() < 1e-6);
    }

    #[test]
    fn root_music_broadside_root_at_unity() {
        let g = geo(6);
        let r = cov_for(&[0.0], 0.0, 64, 7, 6);
        let est = root_music(&r, &g, 1).unwrap();
        assert!(est.angles_deg[0].abs() < 1e-9);
    }

    #[test]
    fn root_music_two_sources() {
        let g = geo(8);
        let r = cov_for(&[-25.0, 40.0], 0.0, 128, 8, 8);
        let est = root_music(&r, &g, 2).unwrap();
        assert!((est.angles_deg[0] + 25.0).abs() < 1e-6);
        assert!((est.angles_deg[1] - 40.0).abs() < 1e-6);
    }

    #[test]
    fn root_music_requires_ula() {
        let g = ArrayGeometry::planar_half_wavelength(2, 2, 3.0e9).unwrap();
        let r = Array2::<Complex64>::eye(4);
        assert!(matches!(
            root_music(&r, &g, 1),
            Err(DmError::UnsupportedGeometry(_))
        ));
    }

    #[test]
    fn conjugate_root_pairing_holds() {
        // the polynomial is self-reciprocal, so the root multiset is invariant
        // under z -> 1/conj(z)
        let r = cov_for(&[12.0], 1.0, 16, 9, 6);
        let e_n = noise_subspace(&r, 5).unwrap();
        let n = 6usize;
        let mut c_proj = Array2::<Complex64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                for col in e_n.columns() {
                    c_proj[(i, j)] += col[i] * col[j].conj();
                }
            }
        }
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * n - 1];
        for l in -(n as isize - 1)..=(n as isize - 1) {
            for i in 0..n {
                let j = i as isize + l;
                if j >= 0 && j < n as isize {
                    coeffs[(l + n as isize - 1) as usize] += c_proj[(i, j as usize)];
                }
            }
        }
        let roots = poly_roots(&coeffs).unwrap();
        for z in &roots {
            let mirror = Complex64::new(1.0, 0.0) / z.conj();
            let best = roots
                .iter()
                .map(|w| (w - mirror).norm())
                .fold(f64::MAX, f64::min);
            assert!(best < 1e-6, "unpaired root {z}");
        }
    }

    #[test]
    fn find_peaks_monotone_spectrum_pads_endpoint() {
        let spec = SpatialSpectrum {
            grid_angles_deg: vec![-2.0, -1.0, 0.0, 1.0, 2.0],
            values: vec![1.0, 2.0, 3.0, 4.0, 5.0],
        };
        let p = find_peaks(&spec, 1).unwrap();
        assert!(p.degraded);
        assert_eq!(p.angles_deg, vec![2.0]);
    }

    #[test]
    fn find_peaks_tie_breaks_toward_smaller_angle() {
        let spec = SpatialSpectrum {
            grid_angles_deg: vec![-20.0, -15.0, -10.0, 10.0, 15.0, 20.0],
            values: vec![0.0, 5.0, 0.0, 0.0, 5.0, 0.0],
        };
        let p = find_peaks(&spec, 1).unwrap();
        assert!(!p.degraded);
        assert_eq!(p.angles_deg, vec![-15.0]);
    }

    #[test]
    fn find_peaks_locates_two_sources() {
        let g = geo(8);
        let r = cov_for(&[-20.0, 20.0], 0.01, 200, 10, 8);
        let grid = ScanGrid::new(-90.0, 90.0, 0.05).unwrap();
        let spec = music_spectrum(&r, &g, 2, &grid).unwrap();
        let p = find_peaks(&spec, 2).unwrap();
        assert!((p.angles_deg[0] + 20.0).abs() < 1.0);
        assert!((p.angles_deg[1] - 20.0).abs() < 1.0);
    }

    #[test]
    fn root_music_matches_music_grid_peak() {
        let g = geo(8);
        let r = cov_for(&[7.0], 0.1, 100, 11, 8);
        let est = root_music(&r, &g, 1).unwrap();
        let grid = ScanGrid::new(est.angles_deg[0] - 2.0, est.angles_deg[0] + 2.0, 0.01).unwrap();
        let spec = music_spectrum(&r, &g, 1, &grid).unwrap();
        let p = find_peaks(&spec, 1).unwrap();
        assert!((p.angles_deg[0] - est.angles_deg[0]).abs() <= 0.02 + 1e-9);
    }
}
