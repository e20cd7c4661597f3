//! Experiment configuration: a TOML file with nested sections plus
//! `key=value` command-line overrides. Every run's resolved config is embedded
//! in its CSV output so results are reproducible from the file alone.

use serde::{Deserialize, Serialize};

use crate::array::ArrayGeometry;
use crate::error::{invalid, DmError, Result};

mod seed_as_string {
    use serde::de::{Error as DeError, Unexpected};
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &u64, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&v.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<u64, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Int(i) => u64::try_from(i)
                .map_err(|_| DeError::invalid_value(Unexpected::Signed(i), &"a non-negative seed")),
            Raw::Text(t) => t
                .parse::<u64>()
                .map_err(|_| DeError::invalid_value(Unexpected::Str(&t), &"a decimal u64 seed")),
        }
    }
}

pub const EXPERIMENT_IDS: [&str; 5] = [
    "error-hist",
    "doa-rmse",
    "sr-vs-snr",
    "pa-gain",
    "sinr-map",
];

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// One of `error-hist`, `doa-rmse`, `sr-vs-snr`, `pa-gain`, `sinr-map`.
    pub experiment: String,
    /// Master seed. Stored in TOML as a decimal string because TOML integers
    /// are signed 64-bit and cannot hold the full u64 range; plain integers
    /// are still accepted on input.
    #[serde(with = "seed_as_string")]
    pub seed: u64,
    pub trials: usize,
    /// Worker threads; 0 uses the default pool size. Results are
    /// worker-count invariant.
    pub workers: usize,
    pub array: ArraySection,
    pub measurement: MeasurementSection,
    pub link: LinkSection,
    pub spwt: SpwtSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: String::new(),
            seed: 1,
            trials: 500,
            workers: 0,
            array: ArraySection::default(),
            measurement: MeasurementSection::default(),
            link: LinkSection::default(),
            spwt: SpwtSection::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ArraySection {
    pub n: usize,
    pub carrier_frequency_hz: f64,
    pub spacing_wavelengths: f64,
}

impl Default for ArraySection {
    fn default() -> Self {
        Self {
            n: 8,
            carrier_frequency_hz: 3.0e9,
            spacing_wavelengths: 0.5,
        }
    }
}

impl ArraySection {
    pub fn geometry(&self) -> Result<ArrayGeometry> {
        let lambda = crate::array::SPEED_OF_LIGHT_M_S / self.carrier_frequency_hz;
        ArrayGeometry::ula(self.n, self.spacing_wavelengths * lambda, self.carrier_frequency_hz)
    }

    pub fn geometry_with_n(&self, n: usize) -> Result<ArrayGeometry> {
        let lambda = crate::array::SPEED_OF_LIGHT_M_S / self.carrier_frequency_hz;
        ArrayGeometry::ula(n, self.spacing_wavelengths * lambda, self.carrier_frequency_hz)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct MeasurementSection {
    /// Snapshots per single DOA measurement.
    pub m: usize,
    /// Training-set sizes to sweep.
    pub k_list: Vec<usize>,
    pub snr_db_list: Vec<f64>,
    /// Operating SNR for the error-histogram run.
    pub hist_snr_db: f64,
    pub true_angle_deg: f64,
    /// Error-histogram sample count.
    pub num_samples: usize,
    pub num_bins: usize,
    /// Grid points per posterior dimension in the Bayesian fit.
    pub bl_grid: usize,
}

impl Default for MeasurementSection {
    fn default() -> Self {
        Self {
            m: 4,
            k_list: vec![1, 20],
            snr_db_list: vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0],
            hist_snr_db: 0.0,
            true_angle_deg: 30.0,
            num_samples: 10_000,
            num_bins: 50,
            bl_grid: 100,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct LinkSection {
    pub desired_angle_deg: f64,
    pub eve_angle_deg: f64,
    pub beta: f64,
    pub beta_list: Vec<f64>,
    pub n_list: Vec<usize>,
    /// Transmit SNR (P over noise power) for the power-allocation sweep.
    pub snr_db: f64,
    /// Std of the Gaussian design-angle perturbation in the pa-gain run.
    pub angle_error_std_deg: f64,
    /// Skip DOA measurement and design at the true angles.
    pub perfect_measurement: bool,
}

impl Default for LinkSection {
    fn default() -> Self {
        Self {
            desired_angle_deg: 30.0,
            eve_angle_deg: -20.0,
            beta: 0.5,
            beta_list: vec![0.2, 0.5, 0.8],
            n_list: vec![4, 8, 16, 32],
            snr_db: 5.0,
            angle_error_std_deg: 2.0,
            perfect_measurement: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SpwtSection {
    /// `2d` (ULA azimuth x range) or `3d` (planar array, three slices).
    pub mode: String,
    pub base_frequency_hz: f64,
    pub band_hz: f64,
    pub num_subcarriers: usize,
    /// ULA size for 2d mode.
    pub n: usize,
    pub planar_nx: usize,
    pub planar_ny: usize,
    pub desired_azimuth_deg: f64,
    /// Used in 3d mode; 2d mode stays in the horizontal plane.
    pub desired_elevation_deg: f64,
    pub desired_range_m: f64,
    pub eve_azimuth_deg: f64,
    pub eve_elevation_deg: f64,
    pub beta: f64,
    pub snr_db: f64,
    /// Random subcarrier assignments averaged per map.
    pub num_assignments: usize,
    pub distinct_subcarriers: bool,
    pub azimuth_min_deg: f64,
    pub azimuth_max_deg: f64,
    pub azimuth_step_deg: f64,
    pub elevation_min_deg: f64,
    pub elevation_max_deg: f64,
    pub elevation_step_deg: f64,
    pub range_min_m: f64,
    pub range_max_m: f64,
    pub range_step_m: f64,
}

impl Default for SpwtSection {
    fn default() -> Self {
        Self {
            mode: "2d".to_string(),
            base_frequency_hz: 3.0e9,
            band_hz: 5.0e6,
            num_subcarriers: 1024,
            n: 32,
            planar_nx: 8,
            planar_ny: 8,
            desired_azimuth_deg: 45.0,
            desired_elevation_deg: 45.0,
            desired_range_m: 500.0,
            eve_azimuth_deg: 120.0,
            eve_elevation_deg: 120.0,
            beta: 0.5,
            snr_db: 10.0,
            num_assignments: 50,
            distinct_subcarriers: true,
            azimuth_min_deg: 0.0,
            azimuth_max_deg: 180.0,
            azimuth_step_deg: 1.0,
            elevation_min_deg: 0.0,
            elevation_max_deg: 180.0,
            elevation_step_deg: 1.0,
            range_min_m: 5.0,
            range_max_m: 1500.0,
            range_step_m: 5.0,
        }
    }
}

impl SpwtSection {
    pub fn subcarrier_spacing_hz(&self) -> f64 {
        self.band_hz / self.num_subcarriers as f64
    }
}

impl ExperimentConfig {
    pub fn for_experiment(id: &str) -> Result<Self> {
        if !EXPERIMENT_IDS.contains(&id) {
            return Err(DmError::Config(format!("unknown experiment id `{id}`")));
        }
        Ok(Self {
            experiment: id.to_string(),
            ..Self::default()
        })
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| DmError::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Comment lines embedded in CSV output; parsing them back reproduces the
    /// run exactly. The worker count has no effect on the results, so it is
    /// normalized out to keep output byte-identical across worker counts.
    pub fn comment_lines(&self) -> Vec<String> {
        let mut cfg = self.clone();
        cfg.workers = 0;
        cfg.to_toml_string().lines().map(|l| l.to_string()).collect()
    }

    pub fn from_comment_lines(lines: &[String]) -> Result<Self> {
        let body: String = lines.join("\n");
        Self::from_toml_str(&body)
    }

    /// Apply `section.key=value` overrides on top of this config.
    pub fn apply_overrides(&self, overrides: &[String]) -> Result<Self> {
        let mut value: toml::Value =
            toml::Value::try_from(self).map_err(|e| DmError::Config(e.to_string()))?;
        for ov in overrides {
            let (path, raw) = ov
                .split_once('=')
                .ok_or_else(|| DmError::Config(format!("override `{ov}` is not key=value")))?;
            let parsed: toml::Value = match toml::from_str::<toml::Value>(&format!("v = {raw}")) {
                Ok(toml::Value::Table(t)) => t["v"].clone(),
                _ => toml::Value::String(raw.to_string()),
            };
            let mut parts: Vec<&str> = path.split('.').collect();
            let last = parts.pop().expect("split yields at least one part");
            let mut node = &mut value;
            for part in parts {
                node = node
                    .as_table_mut()
                    .ok_or_else(|| DmError::Config(format!("`{path}` is not a table path")))?
                    .get_mut(part)
                    .ok_or_else(|| DmError::Config(format!("unknown config section `{part}`")))?;
            }
            let table = node
                .as_table_mut()
                .ok_or_else(|| DmError::Config(format!("`{path}` is not a table path")))?;
            if !table.contains_key(last) {
                return Err(DmError::Config(format!("unknown config key `{path}`")));
            }
            table.insert(last.to_string(), parsed);
        }
        value.try_into().map_err(|e| DmError::Config(e.to_string()))
    }

    /// Check every parameter against module preconditions before any
    /// computation starts.
    pub fn validate(&self) -> Result<()> {
        if !EXPERIMENT_IDS.contains(&self.experiment.as_str()) {
            return Err(DmError::Config(format!(
                "unknown experiment id `{}`",
                self.experiment
            )));
        }
        if self.trials < 1 {
            return Err(invalid("trials", "need at least one trial"));
        }
        self.array.geometry()?;
        let m = &self.measurement;
        if m.m < 2 {
            return Err(invalid("measurement.m", "need at least 2 snapshots"));
        }
        if m.k_list.is_empty() || m.k_list.iter().any(|&k| k < 1) {
            return Err(invalid("measurement.k_list", "need positive K values"));
        }
        if m.snr_db_list.is_empty() {
            return Err(invalid("measurement.snr_db_list", "must be non-empty"));
        }
        if !(m.true_angle_deg.abs() < 90.0) {
            return Err(invalid("measurement.true_angle_deg", "must lie in (-90, 90)"));
        }
        if m.num_samples < 1 {
            return Err(invalid("measurement.num_samples", "need at least 1 sample"));
        }
        if m.num_bins < 1 {
            return Err(invalid("measurement.num_bins", "need at least 1 bin"));
        }
        if m.bl_grid < 2 {
            return Err(invalid("measurement.bl_grid", "need at least 2 grid points"));
        }
        let l = &self.link;
        if !(l.desired_angle_deg.abs() < 90.0) || !(l.eve_angle_deg.abs() < 90.0) {
            return Err(invalid("link angles", "must lie in (-90, 90)"));
        }
        if (l.desired_angle_deg - l.eve_angle_deg).abs() < 0.5 {
            return Err(invalid(
                "link angles",
                "desired and eavesdropper angles must differ by at least 0.5 degrees",
            ));
        }
        if !(0.0..=1.0).contains(&l.beta) {
            return Err(invalid("link.beta", "must lie in [0, 1]"));
        }
        if l.beta_list.iter().any(|&b| !(0.0 < b && b < 1.0)) {
            return Err(invalid("link.beta_list", "fixed betas must lie in (0, 1)"));
        }
        if l.beta_list.is_empty() || l.n_list.is_empty() {
            return Err(invalid("link.beta_list/n_list", "must be non-empty"));
        }
        if l.n_list.iter().any(|&n| n < 2) {
            return Err(invalid("link.n_list", "need at least 2 antennas"));
        }
        if !(l.angle_error_std_deg >= 0.0) {
            return Err(invalid("link.angle_error_std_deg", "must be >= 0"));
        }
        let s = &self.spwt;
        if s.mode != "2d" && s.mode != "3d" {
            return Err(invalid("spwt.mode", "must be `2d` or `3d`"));
        }
        if s.num_subcarriers < 1 {
            return Err(invalid("spwt.num_subcarriers", "need at least 1"));
        }
        if !(s.band_hz > 0.0) || !(s.base_frequency_hz > 0.0) {
            return Err(invalid("spwt frequencies", "must be positive"));
        }
        if s.n < 2 || s.planar_nx * s.planar_ny < 2 {
            return Err(invalid("spwt array size", "need at least 2 elements"));
        }
        if s.distinct_subcarriers {
            let antennas = if s.mode == "2d" { s.n } else { s.planar_nx * s.planar_ny };
            if antennas > s.num_subcarriers {
                return Err(DmError::InfeasibleAssignment {
                    antennas,
                    subcarriers: s.num_subcarriers,
                });
            }
        }
        if !(0.0..=1.0).contains(&s.beta) {
            return Err(invalid("spwt.beta", "must lie in [0, 1]"));
        }
        if s.num_assignments < 1 {
            return Err(invalid("spwt.num_assignments", "need at least 1"));
        }
        for (name, min, max, step) in [
            ("azimuth", s.azimuth_min_deg, s.azimuth_max_deg, s.azimuth_step_deg),
            ("elevation", s.elevation_min_deg, s.elevation_max_deg, s.elevation_step_deg),
            ("range", s.range_min_m, s.range_max_m, s.range_step_m),
        ] {
            if !(step > 0.0) || !(max > min) {
                return Err(invalid(
                    &format!("spwt.{name} axis"),
                    "need max > min and step > 0",
                ));
            }
        }
        if !(s.desired_range_m > 0.0) || !(s.range_min_m > 0.0) {
            return Err(invalid("spwt ranges", "must be positive"));
        }
        Ok(())
    }
}
