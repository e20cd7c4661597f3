//! Figure-class experiment runners behind the CLI: each consumes a validated
//! config and emits deterministic CSV tables.

use rayon::prelude::*;

use crate::array::steering_ula;
use crate::beam::{link_budget, opa, pa_gain_percent, DmBeamformer, PowerAllocation};
use crate::config::ExperimentConfig;
use crate::csvout::{fmt_sig9, CsvTable};
use crate::error::{DmError, Result};
use crate::learn::{bl_refined_angle, collect_training_set, histogram, rmse};
use crate::seed::{derive_rng, derive_seed};
use crate::spwt::{sinr_map, MapAxis, MapCoord, RangeAngleTarget, RssParams};
use crate::{array::ArrayGeometry, stats};

use rand::Rng;
use rand_distr::StandardNormal;

// seed-path tags, one per experiment
const TAG_ERROR_HIST: u64 = 1;
const TAG_DOA_RMSE: u64 = 2;
const TAG_SR_VS_SNR: u64 = 3;
const TAG_PA_GAIN: u64 = 4;
const TAG_SINR_MAP: u64 = 5;

/// Run the configured experiment. Returns one `(label, table)` pair per
/// output file; the label is empty for single-table experiments.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<(String, CsvTable)>> {
    cfg.validate()?;
    let body = || -> Result<Vec<(String, CsvTable)>> {
        let mut tables = match cfg.experiment.as_str() {
            "error-hist" => vec![(String::new(), run_error_hist(cfg)?)],
            "doa-rmse" => vec![(String::new(), run_doa_rmse(cfg)?)],
            "sr-vs-snr" => vec![(String::new(), run_sr_vs_snr(cfg)?)],
            "pa-gain" => vec![(String::new(), run_pa_gain(cfg)?)],
            "sinr-map" => run_sinr_map(cfg)?,
            other => return Err(DmError::Config(format!("unknown experiment `{other}`"))),
        };
        for (_, t) in &mut tables {
            t.comments = cfg.comment_lines();
        }
        Ok(tables)
    };
    if cfg.workers > 0 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| DmError::Config(e.to_string()))?;
        pool.install(body)
    } else {
        body()
    }
}

/// DOA measurement-error histogram at the configured histogram SNR.
pub fn run_error_hist(cfg: &ExperimentConfig) -> Result<CsvTable> {
    let geometry = cfg.array.geometry()?;
    let m = &cfg.measurement;
    let set = collect_training_set(
        m.true_angle_deg,
        m.num_samples,
        m.m,
        m.hist_snr_db,
        &geometry,
        derive_seed(cfg.seed, &[TAG_ERROR_HIST]),
    )?;
    let hist = histogram(&set.errors_deg, m.num_bins)?;
    let mut table = CsvTable::new(&["bin_left", "bin_right", "density"]);
    for (i, d) in hist.densities.iter().enumerate() {
        table.push_row(vec![
            fmt_sig9(hist.bin_edges_deg[i]),
            fmt_sig9(hist.bin_edges_deg[i + 1]),
            fmt_sig9(*d),
        ]);
    }
    Ok(table)
}

/// Refined DOA for one trial: mean/bias-corrected aggregate of a K-element
/// training set via the Bayesian posterior over the measurement location.
fn measure_refined(
    true_angle_deg: f64,
    k: usize,
    cfg: &ExperimentConfig,
    geometry: &ArrayGeometry,
    snr_db: f64,
    seed: u64,
) -> Option<f64> {
    let set = collect_training_set(
        true_angle_deg,
        k,
        cfg.measurement.m,
        snr_db,
        geometry,
        seed,
    )
    .ok()?;
    bl_refined_angle(&set.measurements_deg(), cfg.measurement.bl_grid).ok()
}

/// RMSE of the Bayesian-refined measurement versus SNR and training-set size.
pub fn run_doa_rmse(cfg: &ExperimentConfig) -> Result<CsvTable> {
    let geometry = cfg.array.geometry()?;
    let m = &cfg.measurement;
    let mut table = CsvTable::new(&["snr_db", "k", "rmse_deg", "trials"]);
    for (si, &snr) in m.snr_db_list.iter().enumerate() {
        for (ki, &k) in m.k_list.iter().enumerate() {
            let estimates: Vec<Option<f64>> = (0..cfg.trials)
                .into_par_iter()
                .map(|t| {
                    let seed = derive_seed(
                        cfg.seed,
                        &[TAG_DOA_RMSE, si as u64, ki as u64, t as u64],
                    );
                    measure_refined(m.true_angle_deg, k, cfg, &geometry, snr, seed)
                })
                .collect();
            let ok: Vec<f64> = estimates.into_iter().flatten().collect();
            if ok.is_empty() {
                return Err(DmError::NotEnoughRoots {
                    needed: 1,
                    found: 0,
                    dropped: cfg.trials,
                });
            }
            table.push_row(vec![
                fmt_sig9(snr),
                k.to_string(),
                fmt_sig9(rmse(&ok, m.true_angle_deg)),
                ok.len().to_string(),
            ]);
        }
    }
    Ok(table)
}

/// Secrecy rate versus SNR for different training-set sizes: measure both
/// angles, refine, design MF + NSP at the refined angles, and evaluate the
/// link budget at the true angles.
pub fn run_sr_vs_snr(cfg: &ExperimentConfig) -> Result<CsvTable> {
    let geometry = cfg.array.geometry()?;
    let m = &cfg.measurement;
    let l = &cfg.link;
    let h_d = steering_ula(&geometry, l.desired_angle_deg)?;
    let h_e = steering_ula(&geometry, l.eve_angle_deg)?;
    let mut table = CsvTable::new(&["snr_db", "k", "sr_mean_bits", "sr_std", "trials"]);
    for (si, &snr) in m.snr_db_list.iter().enumerate() {
        let power = 10f64.powf(snr / 10.0);
        let pa = PowerAllocation::new(l.beta, power, 1.0)?;
        for (ki, &k) in m.k_list.iter().enumerate() {
            let rates: Vec<Option<f64>> = (0..cfg.trials)
                .into_par_iter()
                .map(|t| {
                    let bf = if l.perfect_measurement {
                        DmBeamformer::design(&geometry, l.desired_angle_deg, l.eve_angle_deg)
                            .ok()?
                    } else {
                        let base = [TAG_SR_VS_SNR, si as u64, ki as u64, t as u64];
                        let mut path_d = base.to_vec();
                        path_d.push(0);
                        let mut path_e = base.to_vec();
                        path_e.push(1);
                        let th_d = measure_refined(
                            l.desired_angle_deg,
                            k,
                            cfg,
                            &geometry,
                            snr,
                            derive_seed(cfg.seed, &path_d),
                        )?
                        .clamp(-89.9, 89.9);
                        let th_e = measure_refined(
                            l.eve_angle_deg,
                            k,
                            cfg,
                            &geometry,
                            snr,
                            derive_seed(cfg.seed, &path_e),
                        )?
                        .clamp(-89.9, 89.9);
                        DmBeamformer::design(&geometry, th_d, th_e).ok()?
                    };
                    Some(link_budget(&bf, &pa, &h_d, &h_e).secrecy_rate_bits)
                })
                .collect();
            let ok: Vec<f64> = rates.into_iter().flatten().collect();
            if ok.is_empty() {
                return Err(DmError::NotEnoughRoots {
                    needed: 1,
                    found: 0,
                    dropped: cfg.trials,
                });
            }
            table.push_row(vec![
                fmt_sig9(snr),
                k.to_string(),
                fmt_sig9(stats::mean(&ok)),
                fmt_sig9(stats::std_dev(&ok)),
                ok.len().to_string(),
            ]);
        }
    }
    Ok(table)
}

/// OPA versus fixed power allocations over the antenna-count sweep, with
/// design angles perturbed by the configured Gaussian error model.
pub fn run_pa_gain(cfg: &ExperimentConfig) -> Result<CsvTable> {
    let l = &cfg.link;
    let power = 10f64.powf(l.snr_db / 10.0);
    let mut table = CsvTable::new(&[
        "n_antennas",
        "snr_db",
        "beta_fixed",
        "sr_fixed",
        "sr_opa",
        "gain_percent",
    ]);
    for (ni, &n) in l.n_list.iter().enumerate() {
        let geometry = cfg.array.geometry_with_n(n)?;
        // per trial: one perturbed design shared by OPA and every fixed beta
        let per_trial: Vec<Option<(f64, Vec<f64>)>> = (0..cfg.trials)
            .into_par_iter()
            .map(|t| {
                let mut rng = derive_rng(cfg.seed, &[TAG_PA_GAIN, ni as u64, t as u64]);
                let d_err: f64 = rng.sample::<f64, _>(StandardNormal) * l.angle_error_std_deg;
                let e_err: f64 = rng.sample::<f64, _>(StandardNormal) * l.angle_error_std_deg;
                let th_d = (l.desired_angle_deg + d_err).clamp(-89.9, 89.9);
                let th_e = (l.eve_angle_deg + e_err).clamp(-89.9, 89.9);
                let bf = DmBeamformer::design(&geometry, th_d, th_e).ok()?;
                let h_d = steering_ula(&geometry, l.desired_angle_deg).ok()?;
                let h_e = steering_ula(&geometry, l.eve_angle_deg).ok()?;
                let pa = PowerAllocation::new(0.5, power, 1.0).ok()?;
                let (_, best) = opa(&bf, &pa, &h_d, &h_e);
                let fixed: Vec<f64> = l
                    .beta_list
                    .iter()
                    .map(|&b| {
                        link_budget(&bf, &pa.with_beta(b).unwrap(), &h_d, &h_e).secrecy_rate_bits
                    })
                    .collect();
                Some((best.secrecy_rate_bits, fixed))
            })
            .collect();
        let ok: Vec<(f64, Vec<f64>)> = per_trial.into_iter().flatten().collect();
        if ok.is_empty() {
            return Err(DmError::Config("all pa-gain trials failed".to_string()));
        }
        let mean_opa = stats::mean(&ok.iter().map(|x| x.0).collect::<Vec<_>>());
        for (bi, &beta) in l.beta_list.iter().enumerate() {
            let mean_fixed =
                stats::mean(&ok.iter().map(|x| x.1[bi]).collect::<Vec<_>>());
            let gain = pa_gain_percent(mean_opa, mean_fixed);
            table.push_row(vec![
                n.to_string(),
                fmt_sig9(l.snr_db),
                fmt_sig9(beta),
                fmt_sig9(mean_fixed),
                fmt_sig9(mean_opa),
                gain.map_or("undefined".to_string(), fmt_sig9),
            ]);
        }
    }
    Ok(table)
}

fn map_table(map: &crate::spwt::SinrMap) -> CsvTable {
    let mut table = CsvTable::new(&[map.axis1.coord.name(), map.axis2.coord.name(), "sinr_db"]);
    let v1 = map.axis1.values();
    let v2 = map.axis2.values();
    for (i, &a) in v1.iter().enumerate() {
        for (j, &b) in v2.iter().enumerate() {
            table.push_row(vec![
                fmt_sig9(a),
                fmt_sig9(b),
                fmt_sig9(map.values_db[(i, j)]),
            ]);
        }
    }
    table
}

/// Average-SINR maps: a single azimuth x range table in 2d mode, or three
/// slice tables through the 3d (azimuth, elevation, range) volume.
pub fn run_sinr_map(cfg: &ExperimentConfig) -> Result<Vec<(String, CsvTable)>> {
    let s = &cfg.spwt;
    let params = RssParams {
        base_frequency_hz: s.base_frequency_hz,
        subcarrier_spacing_hz: s.subcarrier_spacing_hz(),
        band_hz: s.band_hz,
    };
    let pa = PowerAllocation::new(s.beta, 10f64.powf(s.snr_db / 10.0), 1.0)?;
    let seed = derive_seed(cfg.seed, &[TAG_SINR_MAP]);
    let az_axis = MapAxis::new(
        MapCoord::AzimuthDeg,
        s.azimuth_min_deg,
        s.azimuth_max_deg,
        s.azimuth_step_deg,
    )?;
    let el_axis = MapAxis::new(
        MapCoord::ElevationDeg,
        s.elevation_min_deg,
        s.elevation_max_deg,
        s.elevation_step_deg,
    )?;
    let r_axis = MapAxis::new(MapCoord::RangeM, s.range_min_m, s.range_max_m, s.range_step_m)?;

    if s.mode == "2d" {
        let geometry = ArrayGeometry::ula_half_wavelength(s.n, s.base_frequency_hz)?;
        let desired = RangeAngleTarget::new(s.desired_azimuth_deg, 0.0, s.desired_range_m)?;
        let map = sinr_map(
            &geometry,
            params,
            &desired,
            &pa,
            az_axis,
            r_axis,
            s.num_assignments,
            s.distinct_subcarriers,
            seed,
        )?;
        Ok(vec![(String::new(), map_table(&map))])
    } else {
        let geometry = ArrayGeometry::planar_half_wavelength(
            s.planar_nx,
            s.planar_ny,
            s.base_frequency_hz,
        )?;
        let desired = RangeAngleTarget::new(
            s.desired_azimuth_deg,
            s.desired_elevation_deg,
            s.desired_range_m,
        )?;
        let mut out = Vec::new();
        for (label, ax1, ax2) in [
            ("elev_range", el_axis, r_axis),
            ("az_range", az_axis, r_axis),
            ("az_elev", az_axis, el_axis),
        ] {
            let map = sinr_map(
                &geometry,
                params,
                &desired,
                &pa,
                ax1,
                ax2,
                s.num_assignments,
                s.distinct_subcarriers,
                seed,
            )?;
            out.push((label.to_string(), map_table(&map)));
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(id: &str) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::for_experiment(id).unwrap();
        cfg.trials = 8;
        cfg.measurement.num_samples = 200;
        cfg.measurement.k_list = vec![1, 4];
        cfg.measurement.snr_db_list = vec![0.0, 10.0];
        cfg.link.n_list = vec![4, 8];
        // steps chosen so the grids land on the default target at
        // (azimuth 45, elevation 45, range 500 m)
        cfg.spwt.azimuth_step_deg = 5.0;
        cfg.spwt.range_step_m = 165.0;
        cfg.spwt.elevation_step_deg = 15.0;
        cfg.spwt.num_assignments = 4;
        cfg.spwt.n = 8;
        cfg.spwt.planar_nx = 4;
        cfg.spwt.planar_ny = 4;
        cfg
    }

    #[test]
    fn every_experiment_runs_and_is_deterministic() {
        for id in crate::config::EXPERIMENT_IDS {
            let cfg = small(id);
            let a = run_experiment(&cfg).unwrap();
            let b = run_experiment(&cfg).unwrap();
            assert_eq!(a.len(), b.len(), "{id}");
            for ((la, ta), (lb, tb)) in a.iter().zip(&b) {
                assert_eq!(la, lb);
                assert_eq!(ta.render(), tb.render(), "{id} not deterministic");
            }
        }
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let mut cfg = small("doa-rmse");
        cfg.workers = 1;
        let a = run_experiment(&cfg).unwrap();
        cfg.workers = 8;
        let b = run_experiment(&cfg).unwrap();
        assert_eq!(a[0].1.render(), b[0].1.render());
    }

    #[test]
    fn config_header_reproduces_run() {
        let cfg = small("error-hist");
        let out = run_experiment(&cfg).unwrap();
        let parsed =
            ExperimentConfig::from_comment_lines(&out[0].1.comments).unwrap();
        let again = run_experiment(&parsed).unwrap();
        assert_eq!(out[0].1.render(), again[0].1.render());
    }

    #[test]
    fn doa_rmse_improves_with_k() {
        let mut cfg = small("doa-rmse");
        cfg.trials = 60;
        cfg.measurement.k_list = vec![1, 20];
        // above the subspace threshold region, where averaging K repeated
        // measurements is not contaminated by rare gross errors
        cfg.measurement.snr_db_list = vec![10.0];
        let out = run_experiment(&cfg).unwrap();
        let t = &out[0].1;
        let r1: f64 = t.rows[0][2].parse().unwrap();
        let r20: f64 = t.rows[1][2].parse().unwrap();
        assert!(r20 < r1, "rmse K=20 {r20} vs K=1 {r1}");
    }

    #[test]
    fn sr_perfect_measurement_matches_analytic() {
        let mut cfg = small("sr-vs-snr");
        cfg.trials = 2;
        cfg.link.perfect_measurement = true;
        cfg.measurement.snr_db_list = vec![10.0];
        cfg.measurement.k_list = vec![1];
        let out = run_experiment(&cfg).unwrap();
        let sr: f64 = out[0].1.rows[0][2].parse().unwrap();
        // exact NSP: desired SINR is beta*P; eve leakage is deterministic
        let geometry = cfg.array.geometry().unwrap();
        let bf = DmBeamformer::design(&geometry, 30.0, -20.0).unwrap();
        let pa = PowerAllocation::new(0.5, 10.0, 1.0).unwrap();
        let h_d = steering_ula(&geometry, 30.0).unwrap();
        let h_e = steering_ula(&geometry, -20.0).unwrap();
        let expect = link_budget(&bf, &pa, &h_d, &h_e).secrecy_rate_bits;
        // the table stores nine significant digits
        assert!((sr - expect).abs() < 1e-7 * expect.abs().max(1.0));
        assert!((link_budget(&bf, &pa, &h_d, &h_e).sinr_desired - 5.0).abs() < 1e-10);
    }

    #[test]
    fn pa_gain_rows_are_nonnegative_up_to_tolerance() {
        let mut cfg = small("pa-gain");
        cfg.trials = 20;
        let out = run_experiment(&cfg).unwrap();
        for row in &out[0].1.rows {
            let gain: f64 = row[5].parse().unwrap();
            assert!(gain >= -0.01, "gain {gain}");
        }
    }

    #[test]
    fn sinr_map_3d_produces_three_consistent_slices() {
        let mut cfg = small("sinr-map");
        cfg.spwt.mode = "3d".to_string();
        let out = run_experiment(&cfg).unwrap();
        assert_eq!(out.len(), 3);
        let labels: Vec<&str> = out.iter().map(|(l, _)| l.as_str()).collect();
        assert_eq!(labels, vec!["elev_range", "az_range", "az_elev"]);
        // peak cells share coordinates across slices
        let peak = |t: &CsvTable| -> (f64, f64) {
            let mut best = (0.0, 0.0, f64::MIN);
            for row in &t.rows {
                let v: f64 = row[2].parse().unwrap();
                if v > best.2 {
                    best = (row[0].parse().unwrap(), row[1].parse().unwrap(), v);
                }
            }
            (best.0, best.1)
        };
        let (el_a, r_a) = peak(&out[0].1);
        let (az_b, r_b) = peak(&out[1].1);
        let (az_c, el_c) = peak(&out[2].1);
        assert_eq!(az_b, az_c);
        assert_eq!(el_a, el_c);
        assert_eq!(r_a, r_b);
    }

    #[test]
    fn zero_trials_rejected_before_any_work() {
        let mut cfg = small("doa-rmse");
        cfg.trials = 0;
        let err = run_experiment(&cfg).unwrap_err().to_string();
        assert!(err.contains("trials"), "{err}");
    }
}
