//! Directional-modulation beamforming: matched-filter precoder, null-space
//! artificial-noise basis, power allocation, and secrecy-rate link budgets.

use ndarray::Array2;
use num_complex::Complex64;

use crate::array::{steering_ula, ArrayGeometry, SteeringVector};
use crate::error::{invalid, DmError, Result};

/// Confidential-message precoder plus AN basis designed for a pair of
/// (possibly erroneous) angles.
#[derive(Debug, Clone)]
pub struct DmBeamformer {
    precoder: SteeringVector,
    an_basis: Array2<Complex64>,
    design_angles_deg: (f64, f64),
}

impl DmBeamformer {
    /// MF precoder and NSP basis from the design-time desired/eavesdropper
    /// angles on a ULA.
    pub fn design(
        geometry: &ArrayGeometry,
        desired_angle_deg: f64,
        eve_angle_deg: f64,
    ) -> Result<Self> {
        let h_d = steering_ula(geometry, desired_angle_deg)?;
        let precoder = mf_precoder(&h_d);
        let an_basis = nsp_projector(&h_d)?;
        Ok(Self {
            precoder,
            an_basis,
            design_angles_deg: (desired_angle_deg, eve_angle_deg),
        })
    }

    pub fn from_parts(
        precoder: SteeringVector,
        an_basis: Array2<Complex64>,
        design_angles_deg: (f64, f64),
    ) -> Self {
        Self {
            precoder,
            an_basis,
            design_angles_deg,
        }
    }

    pub fn precoder(&self) -> &SteeringVector {
        &self.precoder
    }

    pub fn an_basis(&self) -> &Array2<Complex64> {
        &self.an_basis
    }

    pub fn design_angles_deg(&self) -> (f64, f64) {
        self.design_angles_deg
    }

    pub fn num_elements(&self) -> usize {
        self.precoder.len()
    }
}

/// Split of the total transmit power between message and AN.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerAllocation {
    pub beta: f64,
    pub total_power: f64,
    pub noise_power: f64,
}

impl PowerAllocation {
    pub fn new(beta: f64, total_power: f64, noise_power: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&beta) {
            return Err(invalid("beta", "power fraction must lie in [0, 1]"));
        }
        if !(total_power > 0.0) || !total_power.is_finite() {
            return Err(invalid("total_power", "must be positive and finite"));
        }
        if !(noise_power > 0.0) || !noise_power.is_finite() {
            return Err(invalid("noise_power", "must be positive and finite"));
        }
        Ok(Self {
            beta,
            total_power,
            noise_power,
        })
    }

    pub fn with_beta(&self, beta: f64) -> Result<Self> {
        Self::new(beta, self.total_power, self.noise_power)
    }
}

/// SINRs at both receivers and the resulting secrecy rate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkBudget {
    pub sinr_desired: f64,
    pub sinr_eve: f64,
    pub secrecy_rate_bits: f64,
}

/// Matched filter: the unit-norm copy of the desired channel.
pub fn mf_precoder(channel: &SteeringVector) -> SteeringVector {
    // SteeringVector is unit-norm by construction
    channel.clone()
}

/// Orthonormal basis of the orthogonal complement of `channel`, as the last
/// N-1 columns of the Householder reflector that maps the channel onto e_1.
pub fn nsp_projector(channel: &SteeringVector) -> Result<Array2<Complex64>> {
    let n = channel.len();
    if n < 2 {
        return Err(DmError::NoNullSpace);
    }
    let h = channel.entries();
    let h0 = h[0];
    let phase = if h0.norm() > 0.0 {
        h0 / h0.norm()
    } else {
        Complex64::new(1.0, 0.0)
    };
    let alpha = -phase; // channel is unit norm
    let mut u: Vec<Complex64> = h.to_vec();
    u[0] -= alpha;
    let unorm2: f64 = u.iter().map(|z| z.norm_sqr()).sum();
    let mut basis = Array2::<Complex64>::zeros((n, n - 1));
    for j in 1..n {
        let scale = 2.0 * u[j].conj() / unorm2;
        for i in 0..n {
            let mut v = -u[i] * scale;
            if i == j {
                v += 1.0;
            }
            basis[(i, j - 1)] = v;
        }
    }
    Ok(basis)
}

/// `channel^H basis` row vector.
fn channel_into_basis(channel: &SteeringVector, basis: &Array2<Complex64>) -> Vec<Complex64> {
    basis
        .columns()
        .into_iter()
        .map(|col| channel.dot_h(&col))
        .collect()
}

/// Closed-form SINRs and secrecy rate at the true channels.
///
/// AN is drawn with covariance I/(N-1) over the basis, so the message and AN
/// branches carry beta*P and (1-beta)*P of the budget respectively.
pub fn link_budget(
    beamformer: &DmBeamformer,
    pa: &PowerAllocation,
    true_h_d: &SteeringVector,
    true_h_e: &SteeringVector,
) -> LinkBudget {
    let n = beamformer.num_elements();
    let an_scale = pa.total_power * (1.0 - pa.beta) / (n as f64 - 1.0);
    let sig_scale = pa.total_power * pa.beta;

    let sinr_of = |h: &SteeringVector| {
        let sig = sig_scale * h.dot_h(beamformer.precoder.entries()).norm_sqr();
        let leak: f64 = channel_into_basis(h, &beamformer.an_basis)
            .iter()
            .map(|z| z.norm_sqr())
            .sum();
        sig / (an_scale * leak + pa.noise_power)
    };
    let sinr_desired = sinr_of(true_h_d);
    let sinr_eve = sinr_of(true_h_e);
    LinkBudget {
        sinr_desired,
        sinr_eve,
        secrecy_rate_bits: secrecy_rate(sinr_desired, sinr_eve),
    }
}

pub fn secrecy_rate(sinr_desired: f64, sinr_eve: f64) -> f64 {
    ((1.0 + sinr_desired).log2() - (1.0 + sinr_eve).log2()).max(0.0)
}

/// Optimal power allocation: maximize the secrecy rate over beta in [0, 1]
/// with a 1001-point grid sweep followed by golden-section refinement.
pub fn opa(
    beamformer: &DmBeamformer,
    pa: &PowerAllocation,
    true_h_d: &SteeringVector,
    true_h_e: &SteeringVector,
) -> (f64, LinkBudget) {
    let sr = |beta: f64| {
        let pa_b = PowerAllocation {
            beta,
            ..*pa
        };
        link_budget(beamformer, &pa_b, true_h_d, true_h_e).secrecy_rate_bits
    };
    let grid_n = 1001usize;
    let mut best_i = 0usize;
    let mut best_sr = f64::MIN;
    for i in 0..grid_n {
        let beta = i as f64 / (grid_n - 1) as f64;
        let v = sr(beta);
        if v > best_sr {
            best_sr = v;
            best_i = i;
        }
    }
    let step = 1.0 / (grid_n - 1) as f64;
    let mut lo = (best_i as f64 * step - step).max(0.0);
    let mut hi = (best_i as f64 * step + step).min(1.0);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = sr(x1);
    let mut f2 = sr(x2);
    while hi - lo > 1e-6 {
        if f1 > f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = sr(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = sr(x2);
        }
    }
    let refined = 0.5 * (lo + hi);
    let beta_star = if sr(refined) >= best_sr {
        refined
    } else {
        best_i as f64 * step
    };
    let pa_star = PowerAllocation {
        beta: beta_star,
        ..*pa
    };
    (beta_star, link_budget(beamformer, &pa_star, true_h_d, true_h_e))
}

/// Percentage SR gain of OPA over a fixed allocation; `None` marks the
/// undefined case `sr_fixed == 0`, which callers exclude from averages.
pub fn pa_gain_percent(sr_opa: f64, sr_fixed: f64) -> Option<f64> {
    if sr_fixed == 0.0 {
        None
    } else {
        Some(100.0 * (sr_opa - sr_fixed) / sr_fixed)
    }
}
