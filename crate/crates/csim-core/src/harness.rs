//! Experiment harness: sweep presets, replication control, aggregation and
//! CSV output.

use crate::config::{ScenarioConfig, Scheme};
use crate::runner::{run_scenario, RunOptions};
use crate::Error;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Axis a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Cluster size: WBANs plus IoT devices, split by `wban_fraction`.
    ClusterSize,
    /// SINR decision threshold in dB.
    SnrThreshold,
    /// Sensors per WBAN.
    SensorsPerWban,
    /// Same physical knob as `SnrThreshold`; reported under the
    /// interference-threshold label used by the reuse/energy experiments.
    InterferenceThreshold,
}

impl SweepAxis {
    pub fn label(self) -> &'static str {
        match self {
            SweepAxis::ClusterSize => "cluster_size",
            SweepAxis::SnrThreshold => "snr_threshold_db",
            SweepAxis::SensorsPerWban => "sensors_per_wban",
            SweepAxis::InterferenceThreshold => "interference_threshold_db",
        }
    }
}

/// Observable a sweep reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricKind {
    PrAvchs,
    AvgReuseFactor,
    AvgEnergyMw,
}

impl MetricKind {
    pub fn label(self) -> &'static str {
        match self {
            MetricKind::PrAvchs => "pr_avchs",
            MetricKind::AvgReuseFactor => "avg_reuse_factor",
            MetricKind::AvgEnergyMw => "avg_energy_mw",
        }
    }
}

/// One scheme column of a sweep. The BLE flag only matters for CSIM energy
/// comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeVariant {
    Csim,
    Ssa,
    CsimWithBle,
    CsimWithoutBle,
}

impl SchemeVariant {
    pub fn label(self) -> &'static str {
        match self {
            SchemeVariant::Csim => "csim",
            SchemeVariant::Ssa => "ssa",
            SchemeVariant::CsimWithBle => "csim-w",
            SchemeVariant::CsimWithoutBle => "csim-wo",
        }
    }

    fn apply(self, cfg: &mut ScenarioConfig) {
        match self {
            SchemeVariant::Csim => {
                cfg.scheme = Scheme::Csim;
                cfg.ble_enabled = true;
            }
            SchemeVariant::Ssa => cfg.scheme = Scheme::Ssa,
            SchemeVariant::CsimWithBle => {
                cfg.scheme = Scheme::Csim;
                cfg.ble_enabled = true;
            }
            SchemeVariant::CsimWithoutBle => {
                cfg.scheme = Scheme::Csim;
                cfg.ble_enabled = false;
            }
        }
    }
}

/// A full sweep description: axis, points, scheme columns, reported metric,
/// and the base scenario every point derives from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    pub name: String,
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub schemes: Vec<SchemeVariant>,
    pub metric: MetricKind,
    pub replications: u32,
    pub base: ScenarioConfig,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), Error> {
        if self.values.is_empty() {
            return Err(Error::InvalidConfig("sweep has no axis values".into()));
        }
        if !self.values.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::InvalidConfig(
                "sweep values must be strictly increasing".into(),
            ));
        }
        if self.schemes.is_empty() {
            return Err(Error::InvalidConfig("sweep has no scheme columns".into()));
        }
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be at least 1".into()));
        }
        self.base.validate()?;
        for &v in &self.values {
            self.scenario_at(v, self.schemes[0], 0)?;
        }
        Ok(())
    }

    /// Concrete scenario for one (axis value, scheme, replication) cell.
    pub fn scenario_at(
        &self,
        value: f64,
        scheme: SchemeVariant,
        replication: u32,
    ) -> Result<ScenarioConfig, Error> {
        let mut cfg = self.base.clone();
        match self.axis {
            SweepAxis::ClusterSize => {
                let total = value.round() as i64;
                if total < 1 {
                    return Err(Error::InvalidConfig(format!(
                        "cluster size {value} must be positive"
                    )));
                }
                let total = total as usize;
                let wbans = ((total as f64 * cfg.wban_fraction).round() as usize)
                    .max(cfg.min_wbans)
                    .min(total);
                cfg.n_wbans = wbans;
                cfg.n_iot_devices = total - wbans;
            }
            SweepAxis::SnrThreshold | SweepAxis::InterferenceThreshold => {
                cfg.snr_threshold_db = value;
            }
            SweepAxis::SensorsPerWban => {
                let k = value.round() as i64;
                if k < 1 {
                    return Err(Error::InvalidConfig(format!(
                        "sensors per WBAN {value} must be positive"
                    )));
                }
                cfg.k_sensors = k as usize;
            }
        }
        scheme.apply(&mut cfg);
        cfg.seed = self.base.seed.wrapping_add(u64::from(replication));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, Error> {
        let spec: SweepSpec = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &str) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }
}

/// One aggregated sweep cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub axis_value: f64,
    pub scheme: String,
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    pub replications: u32,
    pub seed: u64,
}

/// Aggregated sweep output with a stable row order.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultTable {
    pub axis: String,
    pub rows: Vec<ResultRow>,
}

impl ResultTable {
    /// Mean column of one scheme in axis order.
    pub fn series(&self, scheme: &str) -> Vec<(f64, f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.scheme == scheme)
            .map(|r| (r.axis_value, r.mean, r.std))
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("axis,scheme,metric,mean,std,replications,seed\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                r.axis_value, r.scheme, r.metric, r.mean, r.std, r.replications, r.seed
            ));
        }
        out
    }
}

fn metric_of(summary: &crate::metrics::RunSummary, metric: MetricKind) -> f64 {
    match metric {
        MetricKind::PrAvchs => summary.pr_avchs,
        MetricKind::AvgReuseFactor => summary.avg_reuse_factor,
        MetricKind::AvgEnergyMw => summary.avg_energy_mw,
    }
}

/// Run a sweep: every (axis value, scheme, replication) cell simulates
/// independently (in parallel), then aggregates to mean and sample standard
/// deviation. Deterministic for a fixed spec: cell seeds derive from the
/// base seed and the replication index alone.
pub fn run_experiment(spec: &SweepSpec) -> Result<ResultTable, Error> {
    spec.validate()?;
    let mut cells: Vec<(usize, usize, u32)> = Vec::new();
    for (vi, _) in spec.values.iter().enumerate() {
        for (si, _) in spec.schemes.iter().enumerate() {
            for rep in 0..spec.replications {
                cells.push((vi, si, rep));
            }
        }
    }
    let results: Vec<((usize, usize, u32), f64)> = cells
        .par_iter()
        .map(|&(vi, si, rep)| {
            let cfg = spec
                .scenario_at(spec.values[vi], spec.schemes[si], rep)
                .expect("validated spec produces valid scenarios");
            let out = run_scenario(&cfg, &RunOptions::default());
            ((vi, si, rep), metric_of(&out.summary, spec.metric))
        })
        .collect();

    let mut by_cell: std::collections::BTreeMap<(usize, usize), Vec<(u32, f64)>> =
        std::collections::BTreeMap::new();
    for ((vi, si, rep), value) in results {
        by_cell.entry((vi, si)).or_default().push((rep, value));
    }
    let mut rows = Vec::new();
    for ((vi, si), mut samples) in by_cell {
        samples.sort_by_key(|(rep, _)| *rep);
        let n = samples.len() as f64;
        let mean = samples.iter().map(|(_, v)| v).sum::<f64>() / n;
        let var = if samples.len() > 1 {
            samples.iter().map(|(_, v)| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        rows.push(ResultRow {
            axis_value: spec.values[vi],
            scheme: spec.schemes[si].label().to_string(),
            metric: spec.metric.label().to_string(),
            mean,
            std: var.sqrt(),
            replications: spec.replications,
            seed: spec.base.seed,
        });
    }
    rows.sort_by(|a, b| {
        a.axis_value
            .partial_cmp(&b.axis_value)
            .unwrap()
            .then_with(|| a.scheme.cmp(&b.scheme))
    });
    Ok(ResultTable {
        axis: spec.axis.label().to_string(),
        rows,
    })
}

/// Write a table as CSV. Emission is byte-stable for identical tables.
pub fn emit_csv(table: &ResultTable, path: &str) -> Result<(), Error> {
    std::fs::write(path, table.to_csv()).map_err(|source| Error::Io {
        path: path.to_string(),
        source,
    })
}

fn range(start: f64, end_inclusive: f64, step: f64) -> Vec<f64> {
    let mut v = Vec::new();
    let mut x = start;
    while x <= end_inclusive + 1e-9 {
        v.push(x);
        x += step;
    }
    v
}

/// The five shipped experiment presets.
///
/// Fixed columns follow the reference setup (10 sensors/WBAN and -25 dB
/// threshold where stated, sensor power -10 dBm everywhere); the knobs the
/// reference leaves open (IoT population, replication count) are preset
/// here and overridable.
pub fn preset(name: &str) -> Result<SweepSpec, Error> {
    let base = ScenarioConfig::default();
    let spec = match name {
        // availability vs cluster size
        "exp1" => SweepSpec {
            name: "exp1".into(),
            axis: SweepAxis::ClusterSize,
            values: range(5.0, 60.0, 5.0),
            schemes: vec![SchemeVariant::Csim, SchemeVariant::Ssa],
            metric: MetricKind::PrAvchs,
            replications: 30,
            base: ScenarioConfig {
                k_sensors: 10,
                snr_threshold_db: -25.0,
                ..base
            },
        },
        // availability vs SINR decision threshold
        "exp2" => SweepSpec {
            name: "exp2".into(),
            axis: SweepAxis::SnrThreshold,
            values: range(-50.0, -10.0, 5.0),
            schemes: vec![SchemeVariant::Csim, SchemeVariant::Ssa],
            metric: MetricKind::PrAvchs,
            replications: 30,
            base: ScenarioConfig {
                n_wbans: 10,
                k_sensors: 10,
                n_iot_devices: 20,
                ..base
            },
        },
        // availability vs sensors per WBAN
        "exp3" => SweepSpec {
            name: "exp3".into(),
            axis: SweepAxis::SensorsPerWban,
            values: range(2.0, 20.0, 2.0),
            schemes: vec![SchemeVariant::Csim, SchemeVariant::Ssa],
            metric: MetricKind::PrAvchs,
            replications: 30,
            base: ScenarioConfig {
                n_wbans: 10,
                n_iot_devices: 6,
                snr_threshold_db: -25.0,
                ..base
            },
        },
        // reuse factor vs interference threshold; kept at 16 sensors total
        // so the orthogonal baseline never runs out of channels
        "exp4" => SweepSpec {
            name: "exp4".into(),
            axis: SweepAxis::InterferenceThreshold,
            values: range(-40.0, -5.0, 5.0),
            schemes: vec![SchemeVariant::Csim, SchemeVariant::Ssa],
            metric: MetricKind::AvgReuseFactor,
            replications: 30,
            base: ScenarioConfig {
                n_wbans: 8,
                k_sensors: 2,
                n_iot_devices: 24,
                ..base
            },
        },
        // coordinator energy vs interference threshold, BLE on vs off
        "exp5" => SweepSpec {
            name: "exp5".into(),
            axis: SweepAxis::InterferenceThreshold,
            values: range(-40.0, -5.0, 5.0),
            schemes: vec![SchemeVariant::CsimWithBle, SchemeVariant::CsimWithoutBle],
            metric: MetricKind::AvgEnergyMw,
            replications: 30,
            base: ScenarioConfig {
                n_wbans: 10,
                k_sensors: 10,
                n_iot_devices: 40,
                iot_max_clusters: 8,
                iot_duty_cycle: 0.9,
                iot_channel_width_min: 2,
                iot_channel_width_max: 4,
                ..base
            },
        },
        other => return Err(Error::UnknownPreset(other.to_string())),
    };
    Ok(spec)
}

pub fn preset_names() -> &'static [&'static str] {
    &["exp1", "exp2", "exp3", "exp4", "exp5"]
}

pub fn preset_description(name: &str) -> &'static str {
    match name {
        "exp1" => "channel availability vs cluster size (csim vs ssa)",
        "exp2" => "channel availability vs SINR threshold (csim vs ssa)",
        "exp3" => "channel availability vs sensors per WBAN (csim vs ssa)",
        "exp4" => "average reuse factor vs interference threshold (csim vs ssa)",
        "exp5" => "coordinator average energy vs interference threshold (BLE on vs off)",
        _ => "",
    }
}
