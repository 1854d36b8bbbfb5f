//! CSIM protocol state machines: the superframe layout, the per-WBAN
//! coordinator and sensor automata, and the channel-selection decision taken
//! in the selection frame.
//!
//! Superframes share a global slot grid. The active period starts with a
//! beacon slot, then one TDMA slot per sensor on the WBAN's default channel,
//! a fixed-size channel-selection frame (vicinity exchange first, decision
//! plus short beacon last), and a backup frame with capacity for every
//! sensor; a WBAN only uses the first `|interfering|` backup slots of a
//! superframe. The inactive tail absorbs the unused capacity, which keeps
//! all WBANs slot-aligned while the advertised backup frame stays exactly as
//! long as the interfering-sensor list.

use crate::engine::RngStream;
use crate::spectrum::{
    compute_unused, select_stable_channel, ChannelId, ChannelSet, NoiseModel,
};
use std::collections::VecDeque;

/// Slot layout of one superframe on the global grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SuperframeLayout {
    /// TDMA slots, one per sensor.
    pub tdma_slots: usize,
    /// Fixed-size channel-selection frame.
    pub fcs_slots: usize,
    /// Backup-frame capacity (slot grid reserves one per sensor).
    pub backup_capacity: usize,
    /// Minimum inactive tail.
    pub inactive_slots: usize,
}

/// Frame a slot offset belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameKind {
    Beacon,
    Tdma,
    Fcs,
    Backup,
    Inactive,
}

impl SuperframeLayout {
    pub fn new(k: usize, fcs_slots: usize, inactive_slots: usize) -> Self {
        SuperframeLayout {
            tdma_slots: k,
            fcs_slots,
            backup_capacity: k,
            inactive_slots,
        }
    }

    /// Superframe period in ticks.
    pub fn period(&self) -> u64 {
        (1 + self.tdma_slots + self.fcs_slots + self.backup_capacity + self.inactive_slots) as u64
    }

    pub fn start_tick(&self, sf: u64) -> u64 {
        sf * self.period()
    }

    /// Offset of TDMA slot `s` within the superframe.
    pub fn tdma_offset(&self, slot: usize) -> u64 {
        (1 + slot) as u64
    }

    /// Offset of the vicinity-exchange slot (first selection-frame slot).
    pub fn exchange_offset(&self) -> u64 {
        (1 + self.tdma_slots) as u64
    }

    /// Offset of the decision + short-beacon slot (last selection-frame slot).
    pub fn selection_offset(&self) -> u64 {
        (1 + self.tdma_slots + self.fcs_slots - 1) as u64
    }

    /// Offset of backup slot `b`.
    pub fn backup_offset(&self, b: usize) -> u64 {
        (1 + self.tdma_slots + self.fcs_slots + b) as u64
    }

    pub fn frame_at(&self, offset: u64) -> FrameKind {
        let offset = offset as usize;
        if offset == 0 {
            FrameKind::Beacon
        } else if offset <= self.tdma_slots {
            FrameKind::Tdma
        } else if offset <= self.tdma_slots + self.fcs_slots {
            FrameKind::Fcs
        } else if offset <= self.tdma_slots + self.fcs_slots + self.backup_capacity {
            FrameKind::Backup
        } else {
            FrameKind::Inactive
        }
    }
}

/// Sensor automaton states.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SensorMode {
    /// Waiting for its TDMA slot in the current or next superframe.
    AwaitSlot,
    /// TDMA transmission failed; waiting for a backup slot this superframe.
    AwaitBackup,
    /// Done for this superframe.
    Sleep,
}

#[derive(Debug, Clone)]
pub struct SensorState {
    pub wban: usize,
    pub index: usize,
    /// Assigned TDMA slot.
    pub slot: usize,
    pub mode: SensorMode,
    /// Backup slot granted by the latest selection beacon.
    pub backup_slot: Option<usize>,
    pub heard_selection_beacon: bool,
    /// Generation superframe of each queued packet, oldest first.
    pub queue: VecDeque<u64>,
}

#[derive(Debug, Clone)]
pub struct CoordinatorState {
    pub wban: usize,
    pub default_channel: ChannelId,
    /// Latest vicinity channel report.
    pub vicinity_channels: ChannelSet,
    /// Sensors whose TDMA transmission failed this superframe, in slot order.
    pub interfering: Vec<usize>,
    /// Mitigation channel selected this superframe.
    pub stable_channel: Option<ChannelId>,
    /// Newest generation superframe received per sensor, for duplicate
    /// detection.
    pub newest_received: Vec<Option<u64>>,
}

impl CoordinatorState {
    /// Channels this WBAN currently occupies, as announced over BLE: its
    /// default channel plus the mitigation channel while one is in service.
    pub fn channels_in_use(&self) -> ChannelSet {
        let mut set = ChannelSet::single(self.default_channel);
        if let Some(ch) = self.stable_channel {
            set.insert(ch);
        }
        set
    }
}

/// Create the per-WBAN automata: every coordinator picks a default channel
/// uniformly at random and assigns TDMA slots 0..K in sensor order.
pub fn setup_network(
    n_wbans: usize,
    k_sensors: usize,
    crd_streams: &mut [RngStream],
) -> (Vec<CoordinatorState>, Vec<Vec<SensorState>>) {
    assert_eq!(crd_streams.len(), n_wbans);
    let mut crds = Vec::with_capacity(n_wbans);
    let mut sensors = Vec::with_capacity(n_wbans);
    for (w, rng) in crd_streams.iter_mut().enumerate() {
        let default_channel = ChannelId::new(rng.below(crate::spectrum::CHANNEL_COUNT) as u8);
        crds.push(CoordinatorState {
            wban: w,
            default_channel,
            vicinity_channels: ChannelSet::EMPTY,
            interfering: Vec::new(),
            stable_channel: None,
            newest_received: vec![None; k_sensors],
        });
        sensors.push(
            (0..k_sensors)
                .map(|j| SensorState {
                    wban: w,
                    index: j,
                    slot: j,
                    mode: SensorMode::AwaitSlot,
                    backup_slot: None,
                    heard_selection_beacon: false,
                    queue: VecDeque::new(),
                })
                .collect(),
        );
    }
    (crds, sensors)
}

/// Outcome of one data slot (TDMA or backup) after the in-slot ack exchange.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlotOutcome {
    /// First reception acked; the sensor sleeps.
    Delivered,
    /// The coordinator already held the packet; the resend is acked and the
    /// sensor's copy retires as a detected duplicate.
    DuplicateResolved,
    /// Data arrived but the ack was lost: the coordinator holds the packet
    /// while the sensor will try again. `duplicate` marks receptions the
    /// coordinator already held.
    AckLost { duplicate: bool },
    /// Data never arrived.
    Collided,
}

/// Resolve both sides of a data slot given the link outcomes. In the TDMA
/// frame a collided sensor joins the interfering list (slot order is
/// preserved because slots resolve in order); in the backup frame it carries
/// its packet into the next superframe.
pub fn resolve_data_slot(
    sensor: &mut SensorState,
    crd: &mut CoordinatorState,
    frame: FrameKind,
    data_ok: bool,
    ack_ok: bool,
) -> SlotOutcome {
    let pkt_sf = *sensor
        .queue
        .front()
        .expect("a transmitting sensor holds a packet");
    if data_ok {
        let duplicate = matches!(crd.newest_received[sensor.index], Some(last) if pkt_sf <= last);
        if !duplicate {
            crd.newest_received[sensor.index] = Some(pkt_sf);
        }
        if ack_ok {
            sensor.queue.pop_front();
            sensor.mode = SensorMode::Sleep;
            sensor.backup_slot = None;
            if duplicate {
                SlotOutcome::DuplicateResolved
            } else {
                SlotOutcome::Delivered
            }
        } else {
            // the coordinator has the data and will not expect a backup copy;
            // the sensor, having missed the ack, retries in the next TDMA
            // frame and the resend retires as a duplicate
            sensor.mode = match frame {
                FrameKind::Tdma => SensorMode::AwaitBackup,
                _ => SensorMode::AwaitSlot,
            };
            SlotOutcome::AckLost { duplicate }
        }
    } else {
        match frame {
            FrameKind::Tdma => {
                crd.interfering.push(sensor.index);
                sensor.mode = SensorMode::AwaitBackup;
            }
            _ => {
                sensor.mode = SensorMode::AwaitSlot;
            }
        }
        SlotOutcome::Collided
    }
}

/// Decision taken in the selection frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionDecision {
    pub stable: Option<ChannelId>,
    /// Whether the sensing module was engaged (it never is while the unused
    /// pool has members).
    pub engaged: bool,
    pub channels_sensed: u32,
    /// Backup-slot order: interfering sensors in TDMA-slot order.
    pub schedule: Vec<usize>,
}

/// Pick the interference-mitigation channel for one coordinator.
///
/// No interfering sensors: nothing to do. Otherwise prefer a uniformly
/// random member of the unused pool (no sensing); only when the pool is
/// empty does the sensing module scan the reported-busy channels in index
/// order for a usable, stable one. `None` with a non-empty interfering list
/// means the coordinator stays silent this superframe and the interfering
/// sensors carry their packets over.
pub fn channel_selection(
    crd: &CoordinatorState,
    model: &NoiseModel,
    stability_threshold: f64,
    rng: &mut RngStream,
    mut sense: impl FnMut(&mut RngStream, ChannelId) -> Vec<f64>,
) -> SelectionDecision {
    if crd.interfering.is_empty() {
        return SelectionDecision {
            stable: None,
            engaged: false,
            channels_sensed: 0,
            schedule: Vec::new(),
        };
    }
    let schedule = crd.interfering.clone();
    let pool = compute_unused(ChannelSet::FULL, crd.vicinity_channels, crd.default_channel);
    if !pool.is_empty() {
        let pick = pool.nth(rng.below(pool.len())).expect("non-empty pool");
        return SelectionDecision {
            stable: Some(pick),
            engaged: false,
            channels_sensed: 0,
            schedule,
        };
    }
    let candidates: Vec<ChannelId> = crd.vicinity_channels.iter().collect();
    let outcome =
        select_stable_channel(&candidates, model, stability_threshold, |ch| sense(rng, ch));
    SelectionDecision {
        stable: outcome.chosen,
        engaged: true,
        channels_sensed: outcome.channels_sensed,
        schedule,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{RngStream, StreamDomain};
    use crate::spectrum::CHANNEL_COUNT;

    fn streams(n: usize, seed: u64) -> Vec<RngStream> {
        (0..n)
            .map(|i| RngStream::for_domain(seed, StreamDomain::Coordinator(i as u32)))
            .collect()
    }

    #[test]
    fn layout_offsets_partition_the_period() {
        let l = SuperframeLayout::new(10, 2, 4);
        assert_eq!(l.period(), 27);
        assert_eq!(l.frame_at(0), FrameKind::Beacon);
        assert_eq!(l.frame_at(1), FrameKind::Tdma);
        assert_eq!(l.frame_at(10), FrameKind::Tdma);
        assert_eq!(l.frame_at(l.exchange_offset()), FrameKind::Fcs);
        assert_eq!(l.frame_at(l.selection_offset()), FrameKind::Fcs);
        assert_eq!(l.frame_at(l.backup_offset(0)), FrameKind::Backup);
        assert_eq!(l.frame_at(l.backup_offset(9)), FrameKind::Backup);
        assert_eq!(l.frame_at(l.period() - 1), FrameKind::Inactive);
    }

    #[test]
    fn setup_assigns_shared_default_and_injective_slots() {
        let mut s = streams(1, 3);
        let (crds, sensors) = setup_network(1, 8, &mut s);
        let slots: std::collections::BTreeSet<usize> =
            sensors[0].iter().map(|x| x.slot).collect();
        assert_eq!(slots.len(), 8);
        assert!(slots.iter().max().unwrap() < &8);
        assert!((crds[0].default_channel.index() as usize) < CHANNEL_COUNT);
    }

    #[test]
    fn default_channel_histogram_is_uniform() {
        // 10^4 seeded setups; chi-square against the uniform over 16
        let mut counts = [0u64; CHANNEL_COUNT];
        for seed in 0..10_000u64 {
            let mut s = streams(1, seed);
            let (crds, _) = setup_network(1, 1, &mut s);
            counts[crds[0].default_channel.index() as usize] += 1;
        }
        let expected = 10_000.0 / CHANNEL_COUNT as f64;
        let chi2: f64 = counts
            .iter()
            .map(|&c| {
                let d = c as f64 - expected;
                d * d / expected
            })
            .sum();
        // chi-square with 15 degrees of freedom: p > 0.01 means chi2 < 30.58
        assert!(chi2 < 30.58, "chi2 = {chi2}, counts = {counts:?}");
    }

    fn fresh_pair() -> (SensorState, CoordinatorState) {
        let mut s = streams(1, 1);
        let (mut crds, mut sensors) = setup_network(1, 3, &mut s);
        let mut sensor = sensors[0].remove(1);
        sensor.queue.push_back(0);
        (sensor, crds.remove(0))
    }

    #[test]
    fn clean_slot_delivers_and_sleeps() {
        let (mut sensor, mut crd) = fresh_pair();
        let out = resolve_data_slot(&mut sensor, &mut crd, FrameKind::Tdma, true, true);
        assert_eq!(out, SlotOutcome::Delivered);
        assert_eq!(sensor.mode, SensorMode::Sleep);
        assert!(sensor.queue.is_empty());
        assert!(crd.interfering.is_empty());
    }

    #[test]
    fn collision_joins_interfering_list_and_awaits_backup() {
        let (mut sensor, mut crd) = fresh_pair();
        let out = resolve_data_slot(&mut sensor, &mut crd, FrameKind::Tdma, false, false);
        assert_eq!(out, SlotOutcome::Collided);
        assert_eq!(sensor.mode, SensorMode::AwaitBackup);
        assert_eq!(crd.interfering, vec![1]);
        assert_eq!(sensor.queue.len(), 1);
    }

    #[test]
    fn lost_ack_keeps_packet_and_later_resolves_as_duplicate() {
        let (mut sensor, mut crd) = fresh_pair();
        let out = resolve_data_slot(&mut sensor, &mut crd, FrameKind::Tdma, true, false);
        assert_eq!(out, SlotOutcome::AckLost { duplicate: false });
        // the coordinator has the data: the sensor is not in the interfering
        // list, so no backup copy is expected
        assert!(crd.interfering.is_empty());
        assert_eq!(sensor.mode, SensorMode::AwaitBackup);
        assert_eq!(sensor.queue.len(), 1);
        // next TDMA frame: the retry is detected as a duplicate and acked
        sensor.mode = SensorMode::AwaitSlot;
        let out = resolve_data_slot(&mut sensor, &mut crd, FrameKind::Tdma, true, true);
        assert_eq!(out, SlotOutcome::DuplicateResolved);
        assert!(sensor.queue.is_empty());
    }

    #[test]
    fn backup_collision_carries_over() {
        let (mut sensor, mut crd) = fresh_pair();
        resolve_data_slot(&mut sensor, &mut crd, FrameKind::Tdma, false, false);
        let out = resolve_data_slot(&mut sensor, &mut crd, FrameKind::Backup, false, false);
        assert_eq!(out, SlotOutcome::Collided);
        assert_eq!(sensor.mode, SensorMode::AwaitSlot);
        assert_eq!(sensor.queue.len(), 1);
        // the sensor stays in the interfering list exactly once
        assert_eq!(crd.interfering, vec![1]);
    }

    #[test]
    fn interfering_list_preserves_slot_order() {
        let mut s = streams(1, 1);
        let (mut crds, mut sensors) = setup_network(1, 6, &mut s);
        for sensor in &mut sensors[0] {
            sensor.queue.push_back(0);
        }
        let crd = &mut crds[0];
        // slots resolve in order; sensors 2 and 5 collide
        for j in 0..6 {
            let failed = j == 2 || j == 5;
            resolve_data_slot(&mut sensors[0][j], crd, FrameKind::Tdma, !failed, !failed);
        }
        assert_eq!(crd.interfering, vec![2, 5]);
    }

    fn model() -> NoiseModel {
        NoiseModel::new(4, 1.5, 3.0)
    }

    #[test]
    fn selection_is_noop_without_interference() {
        let mut s = streams(1, 1);
        let (crds, _) = setup_network(1, 4, &mut s);
        let mut rng = RngStream::new(1, 99);
        let d = channel_selection(&crds[0], &model(), 0.9, &mut rng, |_, _| vec![0.0; 8]);
        assert_eq!(d.stable, None);
        assert!(!d.engaged);
        assert!(d.schedule.is_empty());
    }

    #[test]
    fn pool_pick_avoids_busy_and_default_and_skips_sensing() {
        let mut s = streams(1, 1);
        let (mut crds, _) = setup_network(1, 4, &mut s);
        let crd = &mut crds[0];
        crd.interfering = vec![2];
        crd.vicinity_channels = (0u8..8).map(ChannelId::new).collect();
        let mut rng = RngStream::new(1, 99);
        for _ in 0..50 {
            let d = channel_selection(crd, &model(), 0.9, &mut rng, |_, _| {
                panic!("sensing must not run while the pool is non-empty")
            });
            let pick = d.stable.expect("pool pick");
            assert!(!d.engaged);
            assert_eq!(d.channels_sensed, 0);
            assert!(pick.index() >= 8);
            assert_ne!(pick, crd.default_channel);
            assert_eq!(d.schedule, vec![2]);
        }
    }

    #[test]
    fn saturated_vicinity_engages_sensing_over_busy_channels() {
        let mut s = streams(1, 1);
        let (mut crds, _) = setup_network(1, 4, &mut s);
        let crd = &mut crds[0];
        crd.interfering = vec![0, 3];
        crd.vicinity_channels = ChannelSet::FULL;
        let mut rng = RngStream::new(1, 99);
        let mut sensed = Vec::new();
        let d = channel_selection(crd, &model(), 0.9, &mut rng, |_, ch| {
            sensed.push(ch.index());
            if ch.index() < 2 {
                vec![10.0; 8] // hot
            } else {
                vec![0.3; 8] // quiet
            }
        });
        assert!(d.engaged);
        assert_eq!(d.stable, Some(ChannelId::new(2)));
        assert_eq!(d.channels_sensed, 3);
        assert_eq!(sensed, vec![0, 1, 2]);
        assert_eq!(d.schedule, vec![0, 3]);
    }

    #[test]
    fn exhausted_scan_reports_silence() {
        let mut s = streams(1, 1);
        let (mut crds, _) = setup_network(1, 2, &mut s);
        let crd = &mut crds[0];
        crd.interfering = vec![1];
        crd.vicinity_channels = ChannelSet::FULL;
        let mut rng = RngStream::new(1, 99);
        let d = channel_selection(crd, &model(), 0.9, &mut rng, |_, _| vec![10.0; 8]);
        assert!(d.engaged);
        assert_eq!(d.stable, None);
        assert_eq!(d.channels_sensed, 16);
    }

    #[test]
    fn announced_channels_include_active_mitigation_channel() {
        let mut s = streams(1, 1);
        let (mut crds, _) = setup_network(1, 2, &mut s);
        let crd = &mut crds[0];
        assert_eq!(crd.channels_in_use().len(), 1);
        crd.stable_channel = Some(ChannelId::new(15));
        let set = crd.channels_in_use();
        assert!(set.contains(ChannelId::new(15)));
        assert!(set.contains(crd.default_channel));
    }
}
