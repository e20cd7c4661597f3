//! Array geometry, steering vectors, and stochastic snapshot generation.
//!
//! This is the physical substrate the estimators and beamformers are built on:
//! a narrowband far-field array model with circular complex Gaussian sources
//! and noise. The broadside direction is 0 degrees and ULA angles live in
//! (-90, 90).

use ndarray::Array2;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use std::f64::consts::PI;

use crate::error::{invalid, DmError, Result};
use crate::seed::derive_rng;

pub const SPEED_OF_LIGHT_M_S: f64 = 299_792_458.0;

/// Antenna positions plus the carrier they operate at.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    positions_m: Vec<[f64; 3]>,
    carrier_frequency_hz: f64,
    ula_spacing_m: Option<f64>,
}

impl ArrayGeometry {
    /// Uniform linear array along x with element n at (n-1)*spacing.
    pub fn ula(num_elements: usize, spacing_m: f64, carrier_frequency_hz: f64) -> Result<Self> {
        if num_elements < 2 {
            return Err(invalid("num_elements", "need at least 2 elements"));
        }
        if !(spacing_m > 0.0) || !spacing_m.is_finite() {
            return Err(invalid("spacing_m", "spacing must be positive and finite"));
        }
        Self::check_carrier(carrier_frequency_hz)?;
        let positions_m = (0..num_elements)
            .map(|n| [n as f64 * spacing_m, 0.0, 0.0])
            .collect();
        Ok(Self {
            positions_m,
            carrier_frequency_hz,
            ula_spacing_m: Some(spacing_m),
        })
    }

    /// ULA with the default half-wavelength pitch.
    pub fn ula_half_wavelength(num_elements: usize, carrier_frequency_hz: f64) -> Result<Self> {
        Self::check_carrier(carrier_frequency_hz)?;
        let spacing = 0.5 * SPEED_OF_LIGHT_M_S / carrier_frequency_hz;
        Self::ula(num_elements, spacing, carrier_frequency_hz)
    }

    /// Uniform planar array in the x-y plane, row-major element order.
    pub fn planar(nx: usize, ny: usize, pitch_m: f64, carrier_frequency_hz: f64) -> Result<Self> {
        if nx * ny < 2 {
            return Err(invalid("nx*ny", "need at least 2 elements"));
        }
        if !(pitch_m > 0.0) || !pitch_m.is_finite() {
            return Err(invalid("pitch_m", "pitch must be positive and finite"));
        }
        Self::check_carrier(carrier_frequency_hz)?;
        let mut positions_m = Vec::with_capacity(nx * ny);
        for iy in 0..ny {
            for ix in 0..nx {
                positions_m.push([ix as f64 * pitch_m, iy as f64 * pitch_m, 0.0]);
            }
        }
        Ok(Self {
            positions_m,
            carrier_frequency_hz,
            ula_spacing_m: None,
        })
    }

    /// Planar array with half-wavelength pitch.
    pub fn planar_half_wavelength(
        nx: usize,
        ny: usize,
        carrier_frequency_hz: f64,
    ) -> Result<Self> {
        Self::check_carrier(carrier_frequency_hz)?;
        let pitch = 0.5 * SPEED_OF_LIGHT_M_S / carrier_frequency_hz;
        Self::planar(nx, ny, pitch, carrier_frequency_hz)
    }

    fn check_carrier(carrier_frequency_hz: f64) -> Result<()> {
        if !(carrier_frequency_hz > 0.0) || !carrier_frequency_hz.is_finite() {
            return Err(invalid(
                "carrier_frequency_hz",
                "carrier frequency must be positive and finite",
            ));
        }
        Ok(())
    }

    pub fn num_elements(&self) -> usize {
        self.positions_m.len()
    }

    pub fn positions_m(&self) -> &[[f64; 3]] {
        &self.positions_m
    }

    pub fn carrier_frequency_hz(&self) -> f64 {
        self.carrier_frequency_hz
    }

    pub fn wavelength_m(&self) -> f64 {
        SPEED_OF_LIGHT_M_S / self.carrier_frequency_hz
    }

    /// Element pitch when this geometry is a ULA, `None` otherwise.
    pub fn ula_spacing_m(&self) -> Option<f64> {
        self.ula_spacing_m
    }
}

/// Unit-norm complex array response vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector(Vec<Complex64>);

impl SteeringVector {
    /// Normalizes `entries` to unit Euclidean norm.
    pub fn new(entries: Vec<Complex64>) -> Result<Self> {
        let norm = entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(invalid("entries", "steering vector must have nonzero norm"));
        }
        Ok(Self(entries.into_iter().map(|z| z / norm).collect()))
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Hermitian inner product `self^H other`; accepts slices and array views.
    pub fn dot_h<'a, I>(&self, other: I) -> Complex64
    where
        I: IntoIterator<Item = &'a Complex64>,
    {
        self.0
            .iter()
            .zip(other)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

/// Narrowband ULA steering vector, entry n = exp(j*2*pi*(n-1)*d*sin(theta)/lambda)/sqrt(N).
pub fn steering_ula(geometry: &ArrayGeometry, angle_deg: f64) -> Result<SteeringVector> {
    if geometry.ula_spacing_m.is_none() {
        return Err(DmError::UnsupportedGeometry(
            "steering_ula requires a uniform linear array".to_string(),
        ));
    }
    if !(angle_deg.abs() < 90.0) {
        return Err(invalid("angle_deg", "angle must lie strictly in (-90, 90)"));
    }
    Ok(steering_ula_unchecked(geometry, angle_deg))
}

/// Same model without the open-interval angle check; scan grids may touch +-90.
pub(crate) fn steering_ula_unchecked(geometry: &ArrayGeometry, angle_deg: f64) -> SteeringVector {
    let d = geometry.ula_spacing_m.expect("ULA geometry");
    let n = geometry.num_elements();
    let lambda = geometry.wavelength_m();
    let psi = 2.0 * PI * d * angle_deg.to_radians().sin() / lambda;
    let scale = 1.0 / (n as f64).sqrt();
    let entries = (0..n)
        .map(|i| Complex64::from_polar(scale, psi * i as f64))
        .collect();
    SteeringVector(entries)
}

/// Sources impinging on the array plus the receiver noise floor.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceScenario {
    source_angles_deg: Vec<f64>,
    source_powers: Vec<f64>,
    noise_power: f64,
}

impl SourceScenario {
    pub fn new(
        source_angles_deg: Vec<f64>,
        source_powers: Vec<f64>,
        noise_power: f64,
    ) -> Result<Self> {
        if source_angles_deg.is_empty() {
            return Err(invalid("source_angles_deg", "need at least one source"));
        }
        if source_angles_deg.len() != source_powers.len() {
            return Err(invalid(
                "source_powers",
                "one power per source angle required",
            ));
        }
        for &a in &source_angles_deg {
            if !(a.abs() < 90.0) {
                return Err(invalid("source_angles_deg", "angles must lie in (-90, 90)"));
            }
        }
        for i in 0..source_angles_deg.len() {
            for j in (i + 1)..source_angles_deg.len() {
                if (source_angles_deg[i] - source_angles_deg[j]).abs() < 0.5 {
                    return Err(invalid(
                        "source_angles_deg",
                        "angles must be pairwise distinct by at least 0.5 degrees",
                    ));
                }
            }
        }
        for &p in &source_powers {
            if !(p > 0.0) || !p.is_finite() {
                return Err(invalid("source_powers", "powers must be positive and finite"));
            }
        }
        if !(noise_power >= 0.0) || !noise_power.is_finite() {
            return Err(invalid("noise_power", "noise power must be >= 0 and finite"));
        }
        Ok(Self {
            source_angles_deg,
            source_powers,
            noise_power,
        })
    }

    /// Single unit-power source; `snr_db = +inf` gives a noiseless scenario.
    pub fn single_source(angle_deg: f64, snr_db: f64) -> Result<Self> {
        let noise_power = if snr_db.is_infinite() && snr_db > 0.0 {
            0.0
        } else {
            10f64.powf(-snr_db / 10.0)
        };
        Self::new(vec![angle_deg], vec![1.0], noise_power)
    }

    pub fn source_angles_deg(&self) -> &[f64] {
        &self.source_angles_deg
    }

    pub fn source_powers(&self) -> &[f64] {
        &self.source_powers
    }

    pub fn noise_power(&self) -> f64 {
        self.noise_power
    }

    /// Total source power over noise power, in dB.
    pub fn snr_db(&self) -> f64 {
        let p: f64 = self.source_powers.iter().sum();
        10.0 * (p / self.noise_power).log10()
    }
}

/// Complex N x T baseband receive block with its provenance.
#[derive(Debug, Clone)]
pub struct SnapshotMatrix {
    samples: Array2<Complex64>,
    scenario: SourceScenario,
    seed: u64,
}

impl SnapshotMatrix {
    pub fn samples(&self) -> &Array2<Complex64> {
        &self.samples
    }

    pub fn scenario(&self) -> &SourceScenario {
        &self.scenario
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn num_elements(&self) -> usize {
        self.samples.nrows()
    }

    pub fn num_snapshots(&self) -> usize {
        self.samples.ncols()
    }
}

fn complex_gaussian<R: Rng>(rng: &mut R, power: f64) -> Complex64 {
    let scale = (power / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(scale * re, scale * im)
}

/// Draw `num_snapshots` columns of `sum_k a(theta_k) s_k(t) + n(t)`.
///
/// Symbols and noise are circular complex Gaussian; the draw order is fixed so
/// a given `(scenario, T, seed)` always yields the same matrix.
pub fn generate_snapshots(
    scenario: &SourceScenario,
    geometry: &ArrayGeometry,
    num_snapshots: usize,
    seed: u64,
) -> Result<SnapshotMatrix> {
    if num_snapshots < 1 {
        return Err(invalid("num_snapshots", "need at least one snapshot"));
    }
    let n = geometry.num_elements();
    let steering: Vec<SteeringVector> = scenario
        .source_angles_deg
        .iter()
        .map(|&a| steering_ula(geometry, a))
        .collect::<Result<_>>()?;

    let mut rng = derive_rng(seed, &[]);
    let mut samples = Array2::<Complex64>::zeros((n, num_snapshots));
    // each element receives the impinging plane wave at full power, so the
    // unit-norm steering vector is rescaled to per-element magnitude 1 and
    // snr_db is the per-element SNR
    let gain = (n as f64).sqrt();
    for t in 0..num_snapshots {
        for (a, &p) in steering.iter().zip(&scenario.source_powers) {
            let s = complex_gaussian(&mut rng, p) * gain;
            for i in 0..n {
                samples[(i, t)] += a.entries()[i] * s;
            }
        }
        if scenario.noise_power > 0.0 {
            for i in 0..n {
                samples[(i, t)] += complex_gaussian(&mut rng, scenario.noise_power);
            }
        }
    }
    Ok(SnapshotMatrix {
        samples,
        scenario: scenario.clone(),
        seed,
    })
}

/// Sample covariance `X X^H / T`, symmetrized to be exactly Hermitian.
pub fn sample_covariance(snapshots: &SnapshotMatrix) -> Array2<Complex64> {
    let x = &snapshots.samples;
    let n = x.nrows();
    let t = x.ncols() as f64;
    let mut r = Array2::<Complex64>::zeros((n, n));
    for col in x.columns() {
        for i in 0..n {
            for j in 0..n {
                r[(i, j)] += col[i] * col[j].conj();
            }
        }
    }
    r.mapv_inplace(|z| z / t);
    // enforce Hermitian symmetry against roundoff
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (r[(i, j)] + r[(j, i)].conj());
            r[(i, j)] = avg;
            r[(j, i)] = avg.conj();
        }
        r[(i, i)] = Complex64::new(r[(i, i)].re, 0.0);
    }
    r
}
