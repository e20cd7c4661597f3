//! Secure precise wireless transmission: random subcarrier assignment per
//! antenna, phase-aligned precoding to a (direction, range) target, AN
//! projection, and SINR maps over angle/range slices.

use ndarray::Array2;
use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::array::{ArrayGeometry, SteeringVector, SPEED_OF_LIGHT_M_S};
use crate::beam::PowerAllocation;
use crate::error::{invalid, DmError, Result};
use crate::seed::derive_rng;

/// OFDM-style subcarrier pool the per-antenna carriers are drawn from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RssParams {
    pub base_frequency_hz: f64,
    pub subcarrier_spacing_hz: f64,
    pub band_hz: f64,
}

impl RssParams {
    pub fn num_subcarriers(&self) -> usize {
        (self.band_hz / self.subcarrier_spacing_hz).floor() as usize
    }

    fn validate(&self) -> Result<()> {
        if !(self.base_frequency_hz > 0.0) {
            return Err(invalid("base_frequency_hz", "must be positive"));
        }
        if !(self.subcarrier_spacing_hz > 0.0) {
            return Err(invalid("subcarrier_spacing_hz", "must be positive"));
        }
        if !(self.band_hz >= self.subcarrier_spacing_hz) {
            return Err(invalid("band_hz", "band must hold at least one subcarrier"));
        }
        Ok(())
    }
}

/// One subcarrier index per antenna, reproducible from its seed.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyAssignment {
    params: RssParams,
    indices: Vec<usize>,
    seed: u64,
}

impl FrequencyAssignment {
    /// Every antenna on the same subcarrier; the degenerate single-frequency
    /// array whose pattern cannot depend on range.
    pub fn constant(num_antennas: usize, params: RssParams, index: usize) -> Result<Self> {
        params.validate()?;
        if index >= params.num_subcarriers() {
            return Err(invalid("index", "subcarrier index out of range"));
        }
        Ok(Self {
            params,
            indices: vec![index; num_antennas],
            seed: 0,
        })
    }

    pub fn params(&self) -> &RssParams {
        &self.params
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Per-antenna carrier `f_c + k_n * delta_f`.
    pub fn frequencies_hz(&self) -> Vec<f64> {
        self.indices
            .iter()
            .map(|&k| self.params.base_frequency_hz + k as f64 * self.params.subcarrier_spacing_hz)
            .collect()
    }
}

/// Draw one subcarrier index per antenna, uniformly, without replacement when
/// `distinct` is set.
pub fn random_subcarrier_select(
    num_antennas: usize,
    params: RssParams,
    seed: u64,
    distinct: bool,
) -> Result<FrequencyAssignment> {
    params.validate()?;
    let n_s = params.num_subcarriers();
    if distinct && num_antennas > n_s {
        return Err(DmError::InfeasibleAssignment {
            antennas: num_antennas,
            subcarriers: n_s,
        });
    }
    let mut rng = derive_rng(seed, &[]);
    let indices = if distinct {
        let mut pool: Vec<usize> = (0..n_s).collect();
        pool.shuffle(&mut rng);
        pool.truncate(num_antennas);
        pool
    } else {
        (0..num_antennas).map(|_| rng.gen_range(0..n_s)).collect()
    };
    Ok(FrequencyAssignment {
        params,
        indices,
        seed,
    })
}

/// A (direction, range) point in the array's far field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RangeAngleTarget {
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub range_m: f64,
}

impl RangeAngleTarget {
    pub fn new(azimuth_deg: f64, elevation_deg: f64, range_m: f64) -> Result<Self> {
        if !(range_m > 0.0) || !range_m.is_finite() {
            return Err(invalid("range_m", "range must be positive and finite"));
        }
        Ok(Self {
            azimuth_deg,
            elevation_deg,
            range_m,
        })
    }
}

/// Unit propagation direction for (azimuth, elevation).
pub fn direction_unit(azimuth_deg: f64, elevation_deg: f64) -> [f64; 3] {
    let az = azimuth_deg.to_radians();
    let el = elevation_deg.to_radians();
    [el.cos() * az.cos(), el.cos() * az.sin(), el.sin()]
}

/// Frequency-diverse-array channel to a (direction, range) point:
/// entry n = exp(-j*2*pi*f_n*(R - p_n . u)/c) / sqrt(N).
pub fn fda_channel(
    geometry: &ArrayGeometry,
    assignment: &FrequencyAssignment,
    target: &RangeAngleTarget,
) -> Result<SteeringVector> {
    let n = geometry.num_elements();
    if assignment.indices.len() != n {
        return Err(invalid(
            "assignment",
            "one subcarrier index per antenna required",
        ));
    }
    let u = direction_unit(target.azimuth_deg, target.elevation_deg);
    let freqs = assignment.frequencies_hz();
    let scale = 1.0 / (n as f64).sqrt();
    let entries = geometry
        .positions_m()
        .iter()
        .zip(&freqs)
        .map(|(p, &f)| {
            // the range term alone is ~1e4 carrier cycles; reduce it modulo
            // one cycle before mixing in the sub-cycle aperture term so the
            // synthesized phase keeps full precision (and a shared frequency
            // yields a bit-identical common range phase across antennas)
            let range_cycles = (f * target.range_m / SPEED_OF_LIGHT_M_S).rem_euclid(1.0);
            let aperture_cycles = f * (p[0] * u[0] + p[1] * u[1] + p[2] * u[2]) / SPEED_OF_LIGHT_M_S;
            let cycles = (range_cycles - aperture_cycles).rem_euclid(1.0);
            Complex64::from_polar(scale, -2.0 * PI * cycles)
        })
        .collect();
    SteeringVector::new(entries)
}

/// Phase-aligned (matched filter) precoder for the desired point: every
/// antenna's phase is pre-compensated so contributions add coherently there.
pub fn aligned_precoder(channel_at_desired: &SteeringVector) -> SteeringVector {
    channel_at_desired.clone()
}

/// Coordinate a map axis sweeps over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapCoord {
    AzimuthDeg,
    ElevationDeg,
    RangeM,
}

impl MapCoord {
    pub fn name(&self) -> &'static str {
        match self {
            MapCoord::AzimuthDeg => "azimuth_deg",
            MapCoord::ElevationDeg => "elevation_deg",
            MapCoord::RangeM => "range_m",
        }
    }
}

/// A swept axis: inclusive [min, max] with a fixed step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapAxis {
    pub coord: MapCoord,
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl MapAxis {
    pub fn new(coord: MapCoord, min: f64, max: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(max > min) {
            return Err(invalid("axis", "need max > min and step > 0"));
        }
        Ok(Self {
            coord,
            min,
            max,
            step,
        })
    }

    pub fn len(&self) -> usize {
        ((self.max - self.min) / self.step).round() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.min + i as f64 * self.step).collect()
    }

    /// Index of the cell containing `v`, or `None` outside the axis.
    pub fn index_of(&self, v: f64) -> Option<usize> {
        let idx = ((v - self.min) / self.step).round();
        if idx < -0.5 || v < self.min - 0.5 * self.step || v > self.max + 0.5 * self.step {
            return None;
        }
        let i = idx as usize;
        (i < self.len()).then_some(i)
    }
}

/// Gridded SINR (dB) over two swept coordinates; the third is held at the
/// fixed target's value.
#[derive(Debug, Clone)]
pub struct SinrMap {
    pub axis1: MapAxis,
    pub axis2: MapAxis,
    pub fixed: RangeAngleTarget,
    /// dB values indexed `[axis1][axis2]`.
    pub values_db: Array2<f64>,
}

impl SinrMap {
    pub fn cell(&self, target: &RangeAngleTarget) -> Option<(usize, usize)> {
        let i = self.axis1.index_of(coord_value(self.axis1.coord, target))?;
        let j = self.axis2.index_of(coord_value(self.axis2.coord, target))?;
        Some((i, j))
    }
}

fn coord_value(coord: MapCoord, t: &RangeAngleTarget) -> f64 {
    match coord {
        MapCoord::AzimuthDeg => t.azimuth_deg,
        MapCoord::ElevationDeg => t.elevation_deg,
        MapCoord::RangeM => t.range_m,
    }
}

fn target_at(axis1: &MapAxis, v1: f64, axis2: &MapAxis, v2: f64, fixed: &RangeAngleTarget) -> RangeAngleTarget {
    let mut t = *fixed;
    for (axis, v) in [(axis1, v1), (axis2, v2)] {
        match axis.coord {
            MapCoord::AzimuthDeg => t.azimuth_deg = v,
            MapCoord::ElevationDeg => t.elevation_deg = v,
            MapCoord::RangeM => t.range_m = v,
        }
    }
    t
}

/// SINR at an observation channel under the closed-form AN model.
///
/// With the precoder and AN basis built from the same design channel, the
/// basis spans exactly the channel's orthogonal complement, so the AN leakage
/// is `1 - |h^H h_d|^2` and only one inner product per point is needed.
fn sinr_linear(coherence: f64, n: usize, pa: &PowerAllocation) -> f64 {
    let c = coherence.clamp(0.0, 1.0);
    let sig = pa.beta * pa.total_power * c;
    let an = (1.0 - pa.beta) * pa.total_power * (1.0 - c) / (n as f64 - 1.0);
    sig / (an + pa.noise_power)
}

/// Average SINR map over `num_assignments` independent random subcarrier
/// assignments; averaging happens in the linear domain, values are stored in
/// dB.
#[allow(clippy::too_many_arguments)]
pub fn sinr_map(
    geometry: &ArrayGeometry,
    params: RssParams,
    desired: &RangeAngleTarget,
    pa: &PowerAllocation,
    axis1: MapAxis,
    axis2: MapAxis,
    num_assignments: usize,
    distinct: bool,
    seed: u64,
) -> Result<SinrMap> {
    if num_assignments < 1 {
        return Err(invalid("num_assignments", "need at least one assignment"));
    }
    let n = geometry.num_elements();
    let assignments: Vec<FrequencyAssignment> = (0..num_assignments)
        .map(|r| {
            random_subcarrier_select(n, params, crate::seed::derive_seed(seed, &[r as u64]), distinct)
        })
        .collect::<Result<_>>()?;
    sinr_map_with_assignments(geometry, &assignments, desired, pa, axis1, axis2)
}

/// As `sinr_map` but over a caller-supplied assignment list.
pub fn sinr_map_with_assignments(
    geometry: &ArrayGeometry,
    assignments: &[FrequencyAssignment],
    desired: &RangeAngleTarget,
    pa: &PowerAllocation,
    axis1: MapAxis,
    axis2: MapAxis,
) -> Result<SinrMap> {
    let n = geometry.num_elements();
    let channels: Vec<SteeringVector> = assignments
        .iter()
        .map(|a| fda_channel(geometry, a, desired))
        .collect::<Result<_>>()?;
    let v1 = axis1.values();
    let v2 = axis2.values();
    let rows: Vec<Vec<f64>> = v1
        .par_iter()
        .map(|&a| {
            v2.iter()
                .map(|&b| {
                    let point = target_at(&axis1, a, &axis2, b, desired);
                    let mut acc = 0.0;
                    for (assign, h_des) in assignments.iter().zip(&channels) {
                        let h = fda_channel(geometry, assign, &point).expect("valid point");
                        let c = h.dot_h(h_des.entries()).norm_sqr();
                        acc += sinr_linear(c, n, pa);
                    }
                    10.0 * (acc / assignments.len() as f64).max(1e-30).log10()
                })
                .collect()
        })
        .collect();
    let mut values_db = Array2::<f64>::zeros((v1.len(), v2.len()));
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            values_db[(i, j)] = v;
        }
    }
    Ok(SinrMap {
        axis1,
        axis2,
        fixed: *desired,
        values_db,
    })
}

/// Peak structure of a map: location and value of the global maximum, how much
/// of the map sits within 3 dB of it, and the SINR in the eavesdropper's cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakReport {
    pub peak_axis1: f64,
    pub peak_axis2: f64,
    pub peak_db: f64,
    pub fraction_within_3db: f64,
    pub eve_sinr_db: f64,
    /// Set when the whole map is within 3 dB of the peak (no usable peak).
    pub degenerate: bool,
}

pub fn peak_analysis(
    map: &SinrMap,
    desired: &RangeAngleTarget,
    eve: &RangeAngleTarget,
) -> Result<PeakReport> {
    map.cell(desired)
        .ok_or_else(|| DmError::OutOfBounds(format!("desired target {desired:?}")))?;
    let (ei, ej) = map
        .cell(eve)
        .ok_or_else(|| DmError::OutOfBounds(format!("eavesdropper {eve:?}")))?;

    let mut peak = (0usize, 0usize, f64::MIN);
    for ((i, j), &v) in map.values_db.indexed_iter() {
        if v > peak.2 {
            peak = (i, j, v);
        }
    }
    let total = map.values_db.len();
    let within = map
        .values_db
        .iter()
        .filter(|&&v| v >= peak.2 - 3.0)
        .count();
    let fraction = within as f64 / total as f64;
    Ok(PeakReport {
        peak_axis1: map.axis1.values()[peak.0],
        peak_axis2: map.axis2.values()[peak.1],
        peak_db: peak.2,
        fraction_within_3db: fraction,
        eve_sinr_db: map.values_db[(ei, ej)],
        degenerate: within == total,
    })
}
