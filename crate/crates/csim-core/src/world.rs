//! Physical scenario: node placement in the deployment volume, rigid-body
//! WBAN mobility, log-distance path loss, SINR-based collision outcomes,
//! clustered IoT channel occupancy, and the periodic channel announcements
//! that feed each coordinator's vicinity report.

use crate::config::ScenarioConfig;
use crate::engine::{RngStream, SimTime, StreamDomain};
use crate::spectrum::{ChannelId, ChannelSet};
use serde::Serialize;

/// A point in the deployment volume.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position {
    pub fn distance(self, other: Position) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

/// Radio-layer constants shared by all links.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadioParams {
    pub snr_threshold_db: f64,
    pub path_loss_exponent: f64,
    pub reference_loss_db: f64,
    pub noise_floor_dbm: f64,
    /// Probability that a below-threshold SINR becomes a collision.
    pub collision_prob: f64,
}

impl RadioParams {
    pub fn from_config(cfg: &ScenarioConfig) -> Self {
        RadioParams {
            snr_threshold_db: cfg.snr_threshold_db,
            path_loss_exponent: cfg.path_loss_exponent,
            reference_loss_db: cfg.reference_loss_db,
            noise_floor_dbm: cfg.noise_floor_dbm,
            collision_prob: cfg.collision_prob,
        }
    }
}

/// Background device occupying its cluster's channel block.
#[derive(Debug, Clone)]
pub struct IotDevice {
    pub id: usize,
    pub cluster: usize,
    pub position: Position,
    pub occupied_channels: ChannelSet,
    pub duty_cycle: f64,
    pub tx_power_dbm: f64,
}

/// A collocated set of IoT devices sharing one channel block; its head
/// announces the block.
#[derive(Debug, Clone)]
pub struct IotCluster {
    pub id: usize,
    pub center: Position,
    pub channels: ChannelSet,
}

/// Channel-usage announcement, receivable within `ble_range`.
#[derive(Debug, Clone)]
pub struct BleAnnouncement {
    pub source: AnnouncementSource,
    pub channels_in_use: ChannelSet,
    pub position: Position,
    pub tx_power_dbm: f64,
    pub emitted_at: SimTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AnnouncementSource {
    Wban(usize),
    IotCluster(usize),
}

/// Log-distance received power. Coincident nodes clamp to 0.1 m.
pub fn received_power_dbm(tx: Position, rx: Position, tx_power_dbm: f64, params: &RadioParams) -> f64 {
    let d = tx.distance(rx).max(0.1);
    tx_power_dbm - params.reference_loss_db - 10.0 * params.path_loss_exponent * d.log10()
}

fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Verdict of one transmission against co-channel interference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkOutcome {
    pub success: bool,
    pub sinr_db: f64,
}

/// SINR decision for a link: signal against the sum of co-channel
/// interference plus the noise floor. Below-threshold links collide with
/// probability `collision_prob` (1.0 makes the decision deterministic and
/// consumes no randomness).
pub fn transmission_outcome(
    tx: Position,
    rx: Position,
    tx_power_dbm: f64,
    interferers: &[(Position, f64)],
    params: &RadioParams,
    rng: &mut RngStream,
) -> LinkOutcome {
    let signal_mw = dbm_to_mw(received_power_dbm(tx, rx, tx_power_dbm, params));
    let mut denom_mw = dbm_to_mw(params.noise_floor_dbm);
    for (pos, power) in interferers {
        denom_mw += dbm_to_mw(received_power_dbm(*pos, rx, *power, params));
    }
    let sinr_db = 10.0 * (signal_mw / denom_mw).log10();
    let success = if sinr_db >= params.snr_threshold_db {
        true
    } else if params.collision_prob >= 1.0 {
        false
    } else {
        !rng.chance(params.collision_prob)
    };
    LinkOutcome { success, sinr_db }
}

/// World state owned by the single-threaded simulation.
#[derive(Debug, Clone)]
pub struct World {
    bounds: (f64, f64, f64),
    body_radius: f64,
    /// Coordinator positions, one per WBAN.
    pub coordinators: Vec<Position>,
    /// Sensor offsets relative to the coordinator (rigid body).
    pub sensor_offsets: Vec<Vec<(f64, f64, f64)>>,
    pub clusters: Vec<IotCluster>,
    pub iot_devices: Vec<IotDevice>,
    /// Per-device activity flag for the current slot.
    pub iot_active: Vec<bool>,
}

fn uniform_in_ball(rng: &mut RngStream, radius: f64) -> (f64, f64, f64) {
    loop {
        let x = rng.range(-radius, radius);
        let y = rng.range(-radius, radius);
        let z = rng.range(-radius, radius);
        if x * x + y * y + z * z <= radius * radius {
            return (x, y, z);
        }
    }
}

impl World {
    /// Place coordinators uniformly (inset by the body radius so whole WBANs
    /// stay in bounds), sensors uniformly within the body radius, and IoT
    /// devices around their cluster centers. All draws come from per-entity
    /// streams keyed by the scenario seed.
    pub fn place(cfg: &ScenarioConfig) -> World {
        let bounds = (cfg.space_x_m, cfg.space_y_m, cfg.space_z_m);
        let mut coordinators = Vec::with_capacity(cfg.n_wbans);
        let mut sensor_offsets = Vec::with_capacity(cfg.n_wbans);
        for w in 0..cfg.n_wbans {
            let mut rng = RngStream::for_domain(cfg.seed, StreamDomain::WbanPlacement(w as u32));
            coordinators.push(sample_inset_position(&mut rng, bounds, cfg.body_radius_m));
            let offsets = (0..cfg.k_sensors)
                .map(|_| uniform_in_ball(&mut rng, cfg.body_radius_m))
                .collect();
            sensor_offsets.push(offsets);
        }

        let n_clusters = cfg.iot_cluster_count();
        let mut clusters = Vec::with_capacity(n_clusters);
        for c in 0..n_clusters {
            let mut rng =
                RngStream::for_domain(cfg.seed, StreamDomain::IotClusterChannels(c as u32));
            let center = sample_inset_position(&mut rng, bounds, 0.0);
            let channels = draw_channel_block(&mut rng, cfg);
            clusters.push(IotCluster {
                id: c,
                center,
                channels,
            });
        }

        let mut iot_devices = Vec::with_capacity(cfg.n_iot_devices);
        for d in 0..cfg.n_iot_devices {
            let cluster = cfg.iot_cluster_of(d);
            let mut rng = RngStream::for_domain(cfg.seed, StreamDomain::IotPlacement(d as u32));
            let (dx, dy, dz) = uniform_in_ball(&mut rng, cfg.iot_cluster_radius_m);
            let c = &clusters[cluster];
            let position = Position {
                x: (c.center.x + dx).clamp(0.0, bounds.0),
                y: (c.center.y + dy).clamp(0.0, bounds.1),
                z: (c.center.z + dz).clamp(0.0, bounds.2),
            };
            iot_devices.push(IotDevice {
                id: d,
                cluster,
                position,
                occupied_channels: c.channels,
                duty_cycle: cfg.iot_duty_cycle,
                tx_power_dbm: cfg.iot_tx_dbm,
            });
        }

        World {
            bounds,
            body_radius: cfg.body_radius_m,
            coordinators,
            sensor_offsets,
            iot_active: vec![false; iot_devices.len()],
            iot_devices,
            clusters,
        }
    }

    pub fn sensor_position(&self, wban: usize, sensor: usize) -> Position {
        let c = self.coordinators[wban];
        let (dx, dy, dz) = self.sensor_offsets[wban][sensor];
        Position {
            x: c.x + dx,
            y: c.y + dy,
            z: c.z + dz,
        }
    }

    /// Relocate every coordinator uniformly in the (inset) volume; sensors
    /// move rigidly with it. One call per superframe boundary.
    pub fn mobility_step(&mut self, mobility: &mut [RngStream]) {
        debug_assert_eq!(mobility.len(), self.coordinators.len());
        for (w, rng) in mobility.iter_mut().enumerate() {
            self.coordinators[w] = sample_inset_position(rng, self.bounds, self.body_radius);
        }
    }

    /// Redraw every cluster's channel block (start of an occupancy epoch).
    pub fn redraw_cluster_channels(&mut self, cfg: &ScenarioConfig, streams: &mut [RngStream]) {
        debug_assert_eq!(streams.len(), self.clusters.len());
        for (c, rng) in streams.iter_mut().enumerate() {
            let channels = draw_channel_block(rng, cfg);
            self.clusters[c].channels = channels;
            for dev in &mut self.iot_devices {
                if dev.cluster == c {
                    dev.occupied_channels = channels;
                }
            }
        }
    }

    /// Refresh per-slot IoT activity. One Bernoulli draw per device per slot,
    /// always in device order, so draw alignment is independent of traffic.
    pub fn refresh_iot_activity(&mut self, traffic: &mut [RngStream]) {
        debug_assert_eq!(traffic.len(), self.iot_devices.len());
        for (d, rng) in traffic.iter_mut().enumerate() {
            self.iot_active[d] = rng.chance(self.iot_devices[d].duty_cycle);
        }
    }

    /// Interference contributions of IoT devices transmitting on `channel`
    /// this slot.
    pub fn iot_interferers(&self, channel: ChannelId) -> Vec<(Position, f64)> {
        self.iot_devices
            .iter()
            .filter(|d| self.iot_active[d.id] && d.occupied_channels.contains(channel))
            .map(|d| (d.position, d.tx_power_dbm))
            .collect()
    }

    /// Announcements of the current period: every coordinator reports its
    /// WBAN's channels in use, every cluster head its block.
    pub fn emit_ble_announcements(
        &self,
        wban_channels: &[ChannelSet],
        crd_tx_dbm: f64,
        time: SimTime,
    ) -> Vec<BleAnnouncement> {
        let mut out = Vec::with_capacity(self.coordinators.len() + self.clusters.len());
        for (w, pos) in self.coordinators.iter().enumerate() {
            out.push(BleAnnouncement {
                source: AnnouncementSource::Wban(w),
                channels_in_use: wban_channels[w],
                position: *pos,
                tx_power_dbm: crd_tx_dbm,
                emitted_at: time,
            });
        }
        for cluster in &self.clusters {
            out.push(BleAnnouncement {
                source: AnnouncementSource::IotCluster(cluster.id),
                channels_in_use: cluster.channels,
                position: cluster.center,
                tx_power_dbm: self
                    .iot_devices
                    .first()
                    .map(|d| d.tx_power_dbm)
                    .unwrap_or(0.0),
                emitted_at: time,
            });
        }
        out
    }

    /// Union of channels announced by the other devices in this
    /// coordinator's vicinity: received power above `cutoff_dbm`, within
    /// `max_range_m`, and within BLE range.
    pub fn vicinity_channels(
        &self,
        wban: usize,
        announcements: &[BleAnnouncement],
        params: &RadioParams,
        cutoff_dbm: f64,
        max_range_m: f64,
        ble_range_m: f64,
    ) -> ChannelSet {
        let rx = self.coordinators[wban];
        let mut set = ChannelSet::EMPTY;
        for a in announcements {
            if a.source == AnnouncementSource::Wban(wban) {
                continue;
            }
            let d = a.position.distance(rx);
            if d > ble_range_m || d > max_range_m {
                continue;
            }
            if received_power_dbm(a.position, rx, a.tx_power_dbm, params) >= cutoff_dbm {
                set = set.union(a.channels_in_use);
            }
        }
        set
    }

    /// Count of nearby transmitters currently occupying each channel, used to
    /// scale sensing noise. "Nearby" uses the same vicinity rule as channel
    /// reports.
    pub fn occupancy_counts(
        &self,
        wban: usize,
        announcements: &[BleAnnouncement],
        params: &RadioParams,
        cutoff_dbm: f64,
        max_range_m: f64,
        ble_range_m: f64,
    ) -> [u32; 16] {
        let rx = self.coordinators[wban];
        let mut counts = [0u32; 16];
        for a in announcements {
            if a.source == AnnouncementSource::Wban(wban) {
                continue;
            }
            let d = a.position.distance(rx);
            if d > ble_range_m || d > max_range_m {
                continue;
            }
            if received_power_dbm(a.position, rx, a.tx_power_dbm, params) < cutoff_dbm {
                continue;
            }
            // a cluster announcement stands for all its member transmitters
            let weight = match a.source {
                AnnouncementSource::IotCluster(c) => self
                    .iot_devices
                    .iter()
                    .filter(|dev| dev.cluster == c)
                    .count() as u32,
                AnnouncementSource::Wban(_) => 1,
            };
            for ch in a.channels_in_use.iter() {
                counts[ch.index() as usize] += weight;
            }
        }
        counts
    }

    pub fn in_bounds(&self, p: Position) -> bool {
        (0.0..=self.bounds.0).contains(&p.x)
            && (0.0..=self.bounds.1).contains(&p.y)
            && (0.0..=self.bounds.2).contains(&p.z)
    }
}

fn sample_inset_position(rng: &mut RngStream, bounds: (f64, f64, f64), inset: f64) -> Position {
    Position {
        x: rng.range(inset, bounds.0 - inset),
        y: rng.range(inset, bounds.1 - inset),
        z: rng.range(inset, bounds.2 - inset),
    }
}

fn draw_channel_block(rng: &mut RngStream, cfg: &ScenarioConfig) -> ChannelSet {
    let width = if cfg.iot_channel_width_min == cfg.iot_channel_width_max {
        cfg.iot_channel_width_min
    } else {
        cfg.iot_channel_width_min
            + rng.below(cfg.iot_channel_width_max - cfg.iot_channel_width_min + 1)
    };
    if width == 0 {
        return ChannelSet::EMPTY;
    }
    let start = rng.below(crate::spectrum::CHANNEL_COUNT - width + 1);
    (start..start + width)
        .map(|i| ChannelId::new(i as u8))
        .collect()
}
