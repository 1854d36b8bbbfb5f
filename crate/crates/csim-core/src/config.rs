//! Scenario configuration: every knob of the world, protocol, and metrics
//! models, loadable from TOML with dotted-key overrides.

use crate::metrics::EnergyModel;
use crate::Error;
use serde::{Deserialize, Serialize};

/// Coexistence scheme under test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Csim,
    Ssa,
}

impl Scheme {
    pub fn label(self) -> &'static str {
        match self {
            Scheme::Csim => "csim",
            Scheme::Ssa => "ssa",
        }
    }
}

/// Full description of one simulation scenario.
///
/// Defaults follow the reference setup: 10 WBANs of 10 sensors each, sensor
/// transmit power -10 dBm, SINR decision threshold -25 dB, one TDMA slot per
/// sensor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scheme: Scheme,
    /// With BLE off, the coordinator learns the same channel usage from
    /// periodic full-band scans; only the energy accounting changes.
    pub ble_enabled: bool,
    pub seed: u64,
    pub superframes: u64,

    pub n_wbans: usize,
    pub k_sensors: usize,
    pub n_iot_devices: usize,

    /// Deployment volume in meters.
    pub space_x_m: f64,
    pub space_y_m: f64,
    pub space_z_m: f64,
    /// Sensors sit within this radius of their coordinator.
    pub body_radius_m: f64,

    /// IoT devices form collocated clusters that share one channel block.
    pub iot_devices_per_cluster: usize,
    pub iot_max_clusters: usize,
    pub iot_cluster_radius_m: f64,
    pub iot_channel_width_min: usize,
    pub iot_channel_width_max: usize,
    /// Probability an IoT device transmits in a given slot.
    pub iot_duty_cycle: f64,
    /// Clusters re-draw their channel block every this many superframes.
    pub iot_epoch_superframes: u64,

    pub sensor_tx_dbm: f64,
    pub crd_tx_dbm: f64,
    pub iot_tx_dbm: f64,
    /// SINR decision threshold in dB; also the sweep axis for the
    /// SNR-threshold and interference-threshold experiments.
    pub snr_threshold_db: f64,
    pub path_loss_exponent: f64,
    pub reference_loss_db: f64,
    pub noise_floor_dbm: f64,
    /// Probability that a below-threshold SINR actually becomes a collision.
    pub collision_prob: f64,

    pub ble_range_m: f64,
    pub ble_period_superframes: u64,
    /// An announcer is considered "in the vicinity" of a coordinator when its
    /// received power clears `csim_sense_offset_db + slope * snr_threshold_db`
    /// and it sits within `csim_sense_max_range_m`.
    pub csim_sense_offset_db: f64,
    pub csim_sense_slope: f64,
    pub csim_sense_max_range_m: f64,
    /// A sensor joins a pairwise interference set when its received power at
    /// the other coordinator clears `ssa_sense_offset_db + slope * snr_threshold_db`.
    pub ssa_sense_offset_db: f64,
    pub ssa_sense_slope: f64,

    /// Noise-scale increment per nearby transmitter occupying a channel.
    pub occupancy_gain: f64,
    pub stability_threshold: f64,
    /// Time-bandwidth product of the sensing radio.
    pub time_bandwidth: u32,
    pub noise_threshold_low: f64,
    pub noise_threshold_high: f64,
    pub channel_bandwidth_hz: f64,

    pub fcs_slots: usize,
    pub inactive_slots: usize,
    pub slot_duration_s: f64,

    /// Cluster-size sweeps split the cluster into WBANs and IoT devices with
    /// this WBAN fraction (at least `min_wbans` WBANs).
    pub wban_fraction: f64,
    pub min_wbans: usize,

    /// Report the reuse factor at WBAN granularity instead of per assignment.
    pub reuse_factor_per_wban: bool,

    pub energy: EnergyModel,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            scheme: Scheme::Csim,
            ble_enabled: true,
            seed: 1,
            superframes: 150,
            n_wbans: 10,
            k_sensors: 10,
            n_iot_devices: 20,
            space_x_m: 10.0,
            space_y_m: 10.0,
            space_z_m: 4.0,
            body_radius_m: 1.0,
            iot_devices_per_cluster: 5,
            iot_max_clusters: 6,
            iot_cluster_radius_m: 2.0,
            iot_channel_width_min: 1,
            iot_channel_width_max: 3,
            iot_duty_cycle: 0.5,
            iot_epoch_superframes: 20,
            sensor_tx_dbm: -10.0,
            crd_tx_dbm: 0.0,
            iot_tx_dbm: 20.0,
            snr_threshold_db: -25.0,
            path_loss_exponent: 3.0,
            reference_loss_db: 40.0,
            noise_floor_dbm: -100.0,
            collision_prob: 1.0,
            ble_range_m: 100.0,
            ble_period_superframes: 1,
            csim_sense_offset_db: 30.0,
            csim_sense_slope: 2.8,
            csim_sense_max_range_m: 5.0,
            ssa_sense_offset_db: -65.0,
            ssa_sense_slope: -0.04,
            occupancy_gain: 2.0,
            stability_threshold: 0.9,
            time_bandwidth: 4,
            noise_threshold_low: 1.5,
            noise_threshold_high: 3.0,
            channel_bandwidth_hz: 2.0e6,
            fcs_slots: 2,
            inactive_slots: 4,
            slot_duration_s: 0.01,
            wban_fraction: 0.25,
            min_wbans: 2,
            reuse_factor_per_wban: false,
            energy: EnergyModel::default(),
        }
    }
}

impl ScenarioConfig {
    /// Received-power floor (dBm) above which an announcer counts as "in the
    /// vicinity" for channel reports, at the current decision threshold.
    pub fn vicinity_cutoff_dbm(&self) -> f64 {
        self.csim_sense_offset_db + self.csim_sense_slope * self.snr_threshold_db
    }

    /// Received-power floor (dBm) above which a foreign sensor joins a
    /// pairwise interference set, at the current decision threshold.
    pub fn interference_cutoff_dbm(&self) -> f64 {
        self.ssa_sense_offset_db + self.ssa_sense_slope * self.snr_threshold_db
    }

    /// Number of IoT clusters implied by the device count.
    pub fn iot_cluster_count(&self) -> usize {
        if self.n_iot_devices == 0 {
            0
        } else {
            self.n_iot_devices
                .div_ceil(self.iot_devices_per_cluster)
                .min(self.iot_max_clusters)
        }
    }

    /// Cluster index of an IoT device (block assignment: devices keep their
    /// cluster when more devices are appended).
    pub fn iot_cluster_of(&self, device: usize) -> usize {
        (device / self.iot_devices_per_cluster).min(self.iot_max_clusters - 1)
    }

    pub fn validate(&self) -> Result<(), Error> {
        let fail = |msg: String| Err(Error::InvalidConfig(msg));
        if self.n_wbans == 0 {
            return fail("n_wbans must be at least 1".into());
        }
        if self.k_sensors == 0 {
            return fail("k_sensors must be at least 1".into());
        }
        if self.superframes == 0 {
            return fail("superframes must be at least 1".into());
        }
        if self.space_x_m <= 0.0 || self.space_y_m <= 0.0 || self.space_z_m <= 0.0 {
            return fail("space dimensions must be positive".into());
        }
        let min_dim = self.space_x_m.min(self.space_y_m).min(self.space_z_m);
        if self.body_radius_m <= 0.0 || 2.0 * self.body_radius_m > min_dim {
            return fail(format!(
                "body_radius_m must be in (0, {}]",
                min_dim / 2.0
            ));
        }
        if self.iot_devices_per_cluster == 0 || self.iot_max_clusters == 0 {
            return fail("IoT cluster shape parameters must be positive".into());
        }
        if self.iot_channel_width_min > self.iot_channel_width_max
            || self.iot_channel_width_max > crate::spectrum::CHANNEL_COUNT
        {
            return fail("IoT channel widths must satisfy min <= max <= 16".into());
        }
        if !(0.0..=1.0).contains(&self.iot_duty_cycle) {
            return fail("iot_duty_cycle must be within [0, 1]".into());
        }
        if self.iot_epoch_superframes == 0 {
            return fail("iot_epoch_superframes must be at least 1".into());
        }
        if self.path_loss_exponent <= 0.0 {
            return fail("path_loss_exponent must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.collision_prob) {
            return fail("collision_prob must be within [0, 1]".into());
        }
        if self.ble_period_superframes == 0 {
            return fail("ble_period_superframes must be at least 1".into());
        }
        if self.time_bandwidth == 0 {
            return fail("time_bandwidth must be at least 1".into());
        }
        if !(self.noise_threshold_low > 0.0
            && self.noise_threshold_low < self.noise_threshold_high)
        {
            return fail("noise thresholds must satisfy 0 < low < high".into());
        }
        if !(0.0..=1.0).contains(&self.stability_threshold) {
            return fail("stability_threshold must be within [0, 1]".into());
        }
        if self.channel_bandwidth_hz <= 0.0 {
            return fail("channel_bandwidth_hz must be positive".into());
        }
        if self.fcs_slots == 0 {
            return fail("fcs_slots must be at least 1".into());
        }
        if self.slot_duration_s <= 0.0 {
            return fail("slot_duration_s must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.wban_fraction) {
            return fail("wban_fraction must be within [0, 1]".into());
        }
        if self.min_wbans == 0 {
            return fail("min_wbans must be at least 1".into());
        }
        self.energy.validate().map_err(Error::InvalidConfig)?;
        Ok(())
    }

    pub fn from_toml_str(text: &str) -> Result<Self, Error> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &str) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    /// Apply `key=value` overrides where `key` is a dotted path into the
    /// TOML form of the config (e.g. `n_wbans=12`, `energy.scan_mj=1e-5`).
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self, Error> {
        if overrides.is_empty() {
            let cfg = self.clone();
            cfg.validate()?;
            return Ok(cfg);
        }
        let mut value =
            toml::Value::try_from(self).map_err(|e| Error::Parse(e.to_string()))?;
        for entry in overrides {
            let (key, raw) = entry.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("override `{entry}` is not of the form key=value"))
            })?;
            set_dotted(&mut value, key.trim(), raw.trim())?;
        }
        let cfg: ScenarioConfig = value
            .try_into()
            .map_err(|e: toml::de::Error| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parse a raw override value with the loosest sensible typing: bool,
/// integer, float, then string.
fn parse_raw(raw: &str) -> toml::Value {
    if let Ok(b) = raw.parse::<bool>() {
        return toml::Value::Boolean(b);
    }
    if let Ok(i) = raw.parse::<i64>() {
        return toml::Value::Integer(i);
    }
    if let Ok(f) = raw.parse::<f64>() {
        return toml::Value::Float(f);
    }
    toml::Value::String(raw.trim_matches('"').to_string())
}

fn set_dotted(value: &mut toml::Value, key: &str, raw: &str) -> Result<(), Error> {
    let mut current = value;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let table = current.as_table_mut().ok_or_else(|| {
            Error::InvalidConfig(format!("`{key}`: `{part}` is not a table"))
        })?;
        if i + 1 == parts.len() {
            if !table.contains_key(*part) {
                return Err(Error::InvalidConfig(format!("unknown config key `{key}`")));
            }
            table.insert((*part).to_string(), parse_raw(raw));
            return Ok(());
        }
        current = table.get_mut(*part).ok_or_else(|| {
            Error::InvalidConfig(format!("unknown config key `{key}`"))
        })?;
    }
    Ok(())
}
