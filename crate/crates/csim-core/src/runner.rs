//! Simulation orchestration: wires the event queue, world, protocol automata
//! and metrics into one reproducible run.
//!
//! Both schemes share the slot grid and the TDMA/ack machinery. Scheme
//! differences: CSIM adds the vicinity exchange, the selection frame and the
//! backup frame; SSA instead recomputes interference sets and orthogonal
//! channel assignments at every superframe boundary.

use crate::config::{ScenarioConfig, Scheme};
use crate::engine::{run_until, EventQueue, RngStream, SimTime, StreamDomain};
use crate::metrics::{
    availability_fraction, consumed_availability, MetricsCollector, RunContext, RunSummary,
    TraceRecord,
};
use crate::protocol::{
    channel_selection, resolve_data_slot, setup_network, CoordinatorState, FrameKind,
    SensorMode, SensorState, SlotOutcome, SuperframeLayout,
};
use crate::spectrum::{
    compute_unused, draw_noise_samples, ChannelId, ChannelSet, NoiseModel,
};
use crate::world::{transmission_outcome, BleAnnouncement, Position, RadioParams, World};
use crate::baseline::{
    assign_orthogonal_channels, build_interference_sets, consumed_channels_per_wban,
    OrthogonalAssignment,
};
use std::collections::BTreeSet;

/// Run-level options that do not affect simulated behavior.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub collect_trace: bool,
}

/// Result of one run: aggregate summary, optional trace, and any invariant
/// violations the built-in auditor observed (always empty for a healthy
/// build).
#[derive(Debug)]
pub struct RunOutput {
    pub summary: RunSummary,
    pub trace: Vec<TraceRecord>,
    pub violations: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SimEvent {
    MobilityStep { sf: u64 },
    SuperframeBoundary { sf: u64 },
    Beacon { sf: u64 },
    SlotStart,
    Transmission { frame: FrameKind, slot: usize },
    AckDeadline { sf: u64, frame: FrameKind, slot: usize },
    BleBroadcast { sf: u64 },
    SelectionBeacon { sf: u64 },
}

/// One resolved data transmission within the current slot.
struct SlotTx {
    wban: usize,
    sensor: usize,
    channel: ChannelId,
    sensor_pos: Position,
    data_ok: bool,
}

struct SimState<'a> {
    cfg: &'a ScenarioConfig,
    radio: RadioParams,
    layout: SuperframeLayout,
    world: World,
    crds: Vec<CoordinatorState>,
    sensors: Vec<Vec<SensorState>>,
    backup_schedule: Vec<Vec<usize>>,
    /// SSA channel plan of the current superframe.
    ssa_plan: Option<OrthogonalAssignment>,
    announcements: Vec<BleAnnouncement>,
    occupancy: Vec<[u32; 16]>,

    mobility_streams: Vec<RngStream>,
    crd_streams: Vec<RngStream>,
    link_streams: Vec<RngStream>,
    iot_traffic: Vec<RngStream>,
    cluster_streams: Vec<RngStream>,

    scratch: Vec<SlotTx>,
    metrics: MetricsCollector,
    trace: Vec<TraceRecord>,
    collect_trace: bool,
    violations: Vec<String>,
    /// (frame, slot) pairs used per WBAN within the current superframe.
    slot_usage: Vec<BTreeSet<(u8, usize)>>,
}

impl<'a> SimState<'a> {
    fn new(cfg: &'a ScenarioConfig, opts: &RunOptions) -> Self {
        let seed = cfg.seed;
        let world = World::place(cfg);
        let mut crd_streams: Vec<RngStream> = (0..cfg.n_wbans)
            .map(|w| RngStream::for_domain(seed, StreamDomain::Coordinator(w as u32)))
            .collect();
        let (crds, sensors) = setup_network(cfg.n_wbans, cfg.k_sensors, &mut crd_streams);
        SimState {
            cfg,
            radio: RadioParams::from_config(cfg),
            layout: SuperframeLayout::new(cfg.k_sensors, cfg.fcs_slots, cfg.inactive_slots),
            world,
            crds,
            sensors,
            backup_schedule: vec![Vec::new(); cfg.n_wbans],
            ssa_plan: None,
            announcements: Vec::new(),
            occupancy: vec![[0; 16]; cfg.n_wbans],
            mobility_streams: (0..cfg.n_wbans)
                .map(|w| RngStream::for_domain(seed, StreamDomain::WbanMobility(w as u32)))
                .collect(),
            crd_streams,
            link_streams: (0..cfg.n_wbans)
                .map(|w| RngStream::for_domain(seed, StreamDomain::WbanLink(w as u32)))
                .collect(),
            iot_traffic: (0..cfg.n_iot_devices)
                .map(|d| RngStream::for_domain(seed, StreamDomain::IotTraffic(d as u32)))
                .collect(),
            cluster_streams: (0..cfg.iot_cluster_count())
                .map(|c| RngStream::for_domain(seed, StreamDomain::IotClusterChannels(c as u32)))
                .collect(),
            scratch: Vec::new(),
            metrics: MetricsCollector::new(cfg.n_wbans),
            trace: Vec::new(),
            collect_trace: opts.collect_trace,
            violations: Vec::new(),
            slot_usage: vec![BTreeSet::new(); cfg.n_wbans],
        }
    }

    fn violation(&mut self, msg: String) {
        if self.violations.len() < 200 {
            self.violations.push(msg);
        }
    }

    fn record(
        &mut self,
        sf: u64,
        node: String,
        frame: &str,
        slot: u64,
        channel: Option<ChannelId>,
        outcome: &str,
    ) {
        if !self.collect_trace {
            return;
        }
        self.trace.push(TraceRecord {
            sf,
            scheme: self.cfg.scheme.label().to_string(),
            node,
            frame: frame.to_string(),
            slot,
            channel: channel.map(|c| c.index() as i16).unwrap_or(-1),
            outcome: outcome.to_string(),
        });
    }

    /// Channel a sensor uses for its TDMA transmission.
    fn tdma_channel(&self, wban: usize, sensor: usize) -> ChannelId {
        match self.cfg.scheme {
            Scheme::Csim => self.crds[wban].default_channel,
            Scheme::Ssa => self
                .ssa_plan
                .as_ref()
                .and_then(|plan| plan.channels.get(&(wban, sensor)).copied())
                .unwrap_or(self.crds[wban].default_channel),
        }
    }

    /// Sensor due to transmit in `(frame, slot)`, with its channel.
    fn transmitter_for(&self, wban: usize, frame: FrameKind, slot: usize) -> Option<(usize, ChannelId)> {
        match frame {
            FrameKind::Tdma => {
                let sensor = &self.sensors[wban][slot];
                if sensor.mode == SensorMode::AwaitSlot && !sensor.queue.is_empty() {
                    Some((slot, self.tdma_channel(wban, slot)))
                } else {
                    None
                }
            }
            FrameKind::Backup => {
                let idx = *self.backup_schedule[wban].get(slot)?;
                let sensor = &self.sensors[wban][idx];
                let stable = self.crds[wban].stable_channel?;
                if sensor.mode == SensorMode::AwaitBackup
                    && sensor.heard_selection_beacon
                    && sensor.backup_slot == Some(slot)
                    && !sensor.queue.is_empty()
                {
                    Some((idx, stable))
                } else {
                    None
                }
            }
            _ => None,
        }
    }

    fn handle_transmission(&mut self, time: SimTime, frame: FrameKind, slot: usize) {
        // collect all concurrent data transmissions for this slot
        let mut txs: Vec<(usize, usize, ChannelId, Position)> = Vec::new();
        for w in 0..self.cfg.n_wbans {
            if let Some((sensor, channel)) = self.transmitter_for(w, frame, slot) {
                txs.push((w, sensor, channel, self.world.sensor_position(w, sensor)));
            }
        }
        self.scratch.clear();
        for (i, &(w, sensor, channel, pos)) in txs.iter().enumerate() {
            let mut interferers = self.world.iot_interferers(channel);
            for (j, &(_, _, other_ch, other_pos)) in txs.iter().enumerate() {
                if i != j && other_ch == channel {
                    interferers.push((other_pos, self.cfg.sensor_tx_dbm));
                }
            }
            let out = transmission_outcome(
                pos,
                self.world.coordinators[w],
                self.cfg.sensor_tx_dbm,
                &interferers,
                &self.radio,
                &mut self.link_streams[w],
            );
            // audit: channel legality and per-frame slot exclusivity
            if self.cfg.scheme == Scheme::Csim {
                let legal = match frame {
                    FrameKind::Tdma => channel == self.crds[w].default_channel,
                    FrameKind::Backup => Some(channel) == self.crds[w].stable_channel,
                    _ => false,
                };
                if !legal {
                    self.violation(format!(
                        "w{w}.s{sensor} transmitted on illegal channel {channel} at t{time}"
                    ));
                }
            }
            if frame == FrameKind::Backup && !self.sensors[w][sensor].heard_selection_beacon {
                self.violation(format!(
                    "w{w}.s{sensor} transmitted in backup frame without the selection beacon"
                ));
            }
            let frame_tag = if frame == FrameKind::Tdma { 0u8 } else { 1 };
            if !self.slot_usage[w].insert((frame_tag, slot)) {
                self.violation(format!(
                    "w{w}: two transmissions share {frame:?} slot {slot}"
                ));
            }
            self.scratch.push(SlotTx {
                wban: w,
                sensor,
                channel,
                sensor_pos: pos,
                data_ok: out.success,
            });
        }
    }

    fn handle_ack_deadline(&mut self, time: SimTime, sf: u64, frame: FrameKind) {
        // acks ride the tail of the slot: every coordinator that received
        // data acks on the same channel, and acks interfere with each other
        let scratch = std::mem::take(&mut self.scratch);
        for (i, tx) in scratch.iter().enumerate() {
            let mut ack_ok = false;
            if tx.data_ok {
                let mut interferers = self.world.iot_interferers(tx.channel);
                for (j, other) in scratch.iter().enumerate() {
                    if i != j && other.data_ok && other.channel == tx.channel {
                        interferers
                            .push((self.world.coordinators[other.wban], self.cfg.crd_tx_dbm));
                    }
                }
                ack_ok = transmission_outcome(
                    self.world.coordinators[tx.wban],
                    tx.sensor_pos,
                    self.cfg.crd_tx_dbm,
                    &interferers,
                    &self.radio,
                    &mut self.link_streams[tx.wban],
                )
                .success;
            }
            let outcome = resolve_data_slot(
                &mut self.sensors[tx.wban][tx.sensor],
                &mut self.crds[tx.wban],
                frame,
                tx.data_ok,
                ack_ok,
            );
            let stats = &mut self.metrics.per_wban[tx.wban];
            if frame == FrameKind::Backup {
                stats.backup_attempts += 1;
            }
            let label = match outcome {
                SlotOutcome::Delivered => {
                    stats.ledger.delivered += 1;
                    if frame == FrameKind::Backup {
                        stats.backup_successes += 1;
                    }
                    "delivered"
                }
                SlotOutcome::DuplicateResolved => {
                    stats.ledger.duplicates += 1;
                    stats.duplicate_receptions += 1;
                    if frame == FrameKind::Backup {
                        stats.backup_successes += 1;
                    }
                    "duplicate"
                }
                SlotOutcome::AckLost { duplicate } => {
                    stats.ack_losses += 1;
                    if duplicate {
                        stats.duplicate_receptions += 1;
                    }
                    "ack_lost"
                }
                SlotOutcome::Collided => {
                    stats.data_collisions += 1;
                    // a failed mitigation attempt re-triggers the alert path,
                    // which already fired for this superframe at selection
                    // time; alerts stay one-per-period
                    "collided"
                }
            };
            self.record(
                sf,
                format!("w{}.s{}", tx.wban, tx.sensor),
                if frame == FrameKind::Tdma { "tdma" } else { "backup" },
                time.ticks(),
                Some(tx.channel),
                label,
            );
        }
    }

    fn handle_ble_broadcast(&mut self, time: SimTime, sf: u64) {
        // announcements refresh on the configured period; availability is
        // sampled every superframe from the latest reports
        if sf.is_multiple_of(self.cfg.ble_period_superframes) {
            let wban_channels: Vec<ChannelSet> =
                self.crds.iter().map(|c| c.channels_in_use()).collect();
            self.announcements =
                self.world
                    .emit_ble_announcements(&wban_channels, self.cfg.crd_tx_dbm, time);
            let cutoff = self.cfg.vicinity_cutoff_dbm();
            for w in 0..self.cfg.n_wbans {
                self.crds[w].vicinity_channels = self.world.vicinity_channels(
                    w,
                    &self.announcements,
                    &self.radio,
                    cutoff,
                    self.cfg.csim_sense_max_range_m,
                    self.cfg.ble_range_m,
                );
                self.occupancy[w] = self.world.occupancy_counts(
                    w,
                    &self.announcements,
                    &self.radio,
                    cutoff,
                    self.cfg.csim_sense_max_range_m,
                    self.cfg.ble_range_m,
                );
                self.record(sf, format!("w{w}"), "ble", time.ticks(), None, "report");
            }
        }
        let per_crd: Vec<f64> = self
            .crds
            .iter()
            .map(|c| availability_fraction(c.vicinity_channels))
            .collect();
        self.metrics.sample_availability(&per_crd);
    }

    fn handle_selection_beacon(&mut self, time: SimTime, sf: u64) {
        // phase 1: every coordinator with failures picks its mitigation channel
        for w in 0..self.cfg.n_wbans {
            if self.crds[w].interfering.is_empty() {
                continue;
            }
            // the interference hint that triggers the selection round
            self.metrics.per_wban[w].alerts += 1;

            let scales: [f64; 16] = std::array::from_fn(|i| {
                1.0 + f64::from(self.occupancy[w][i]) * self.cfg.occupancy_gain
            });
            let model = NoiseModel {
                time_bandwidth: self.cfg.time_bandwidth,
                lower_threshold: self.cfg.noise_threshold_low,
                upper_threshold: self.cfg.noise_threshold_high,
                bandwidth_hz: self.cfg.channel_bandwidth_hz,
                channel_scale: scales,
            };
            let tb = self.cfg.time_bandwidth;
            let decision = channel_selection(
                &self.crds[w],
                &model,
                self.cfg.stability_threshold,
                &mut self.crd_streams[w],
                |rng, ch| draw_noise_samples(rng, tb, model.scale_of(ch)),
            );
            if decision.engaged {
                let pool = compute_unused(
                    ChannelSet::FULL,
                    self.crds[w].vicinity_channels,
                    self.crds[w].default_channel,
                );
                if !pool.is_empty() {
                    self.violation(format!(
                        "w{w}: sensing engaged while the unused pool had {} members",
                        pool.len()
                    ));
                }
                self.metrics.per_wban[w].engagements += 1;
                self.metrics.per_wban[w].channels_scanned += u64::from(decision.channels_sensed);
            }
            if decision.schedule.len() != self.crds[w].interfering.len() {
                self.violation(format!(
                    "w{w}: backup frame sized {} for {} interfering sensors",
                    decision.schedule.len(),
                    self.crds[w].interfering.len()
                ));
            }
            match decision.stable {
                Some(ch) => {
                    self.crds[w].stable_channel = Some(ch);
                    self.backup_schedule[w] = decision.schedule;
                    self.record(
                        sf,
                        format!("w{w}"),
                        "fcs",
                        time.ticks(),
                        Some(ch),
                        if decision.engaged { "selected_scan" } else { "selected_pool" },
                    );
                }
                None => {
                    self.metrics.per_wban[w].silent_superframes += 1;
                    self.record(sf, format!("w{w}"), "fcs", time.ticks(), None, "silent");
                }
            }
        }

        // phase 2: short beacons carry (channel, backup map) on the default
        // channel and collide like any transmission
        let beaconing: Vec<(usize, ChannelId, Position)> = (0..self.cfg.n_wbans)
            .filter(|&w| self.crds[w].stable_channel.is_some())
            .map(|w| {
                (
                    w,
                    self.crds[w].default_channel,
                    self.world.coordinators[w],
                )
            })
            .collect();
        for &(w, channel, pos) in &beaconing {
            let mut interferers = self.world.iot_interferers(channel);
            for &(v, other_ch, other_pos) in &beaconing {
                if v != w && other_ch == channel {
                    interferers.push((other_pos, self.cfg.crd_tx_dbm));
                }
            }
            let schedule = self.backup_schedule[w].clone();
            for (idx, &sensor) in schedule.iter().enumerate() {
                let spos = self.world.sensor_position(w, sensor);
                let heard = transmission_outcome(
                    pos,
                    spos,
                    self.cfg.crd_tx_dbm,
                    &interferers,
                    &self.radio,
                    &mut self.link_streams[w],
                )
                .success;
                if heard {
                    self.sensors[w][sensor].heard_selection_beacon = true;
                    self.sensors[w][sensor].backup_slot = Some(idx);
                } else {
                    self.record(
                        sf,
                        format!("w{w}.s{sensor}"),
                        "fcs",
                        time.ticks(),
                        Some(channel),
                        "beacon_lost",
                    );
                }
            }
        }

        // reuse-factor sample: one default per WBAN plus any mitigation
        // channel selected this superframe
        let mut assignments: Vec<ChannelId> =
            self.crds.iter().map(|c| c.default_channel).collect();
        assignments.extend(self.crds.iter().filter_map(|c| c.stable_channel));
        self.metrics.sample_reuse(&assignments);
    }

    /// SSA bookkeeping at a superframe boundary: rebuild interference sets,
    /// assign orthogonal channels, and sample both observables.
    fn rebuild_ssa_plan(&mut self) {
        let sets = build_interference_sets(
            &self.world,
            &self.radio,
            self.cfg.sensor_tx_dbm,
            self.cfg.interference_cutoff_dbm(),
        );
        let plan = assign_orthogonal_channels(&sets);
        self.metrics.unprovisioned_sensors += plan.unprovisioned;

        let consumed = consumed_channels_per_wban(self.cfg.n_wbans, &sets, &plan);
        let per_crd: Vec<f64> = consumed.iter().map(|&c| consumed_availability(c)).collect();
        self.metrics.sample_availability(&per_crd);

        let assignments: Vec<ChannelId> = if self.cfg.reuse_factor_per_wban {
            let mut per_wban: Vec<ChannelSet> = vec![ChannelSet::EMPTY; self.cfg.n_wbans];
            for (&(w, _), &ch) in &plan.channels {
                per_wban[w].insert(ch);
            }
            per_wban
                .into_iter()
                .flat_map(|set| set.iter().collect::<Vec<_>>())
                .collect()
        } else {
            plan.channels.values().copied().collect()
        };
        self.metrics.sample_reuse(&assignments);
        self.ssa_plan = Some(plan);
    }

    fn handle_boundary(&mut self, queue: &mut EventQueue<SimEvent>, sf: u64) {
        // close out the previous superframe: unresolved sensors carry over
        if sf > 0 {
            for w in 0..self.cfg.n_wbans {
                let carried = self.sensors[w]
                    .iter()
                    .filter(|s| s.mode != SensorMode::Sleep && !s.queue.is_empty())
                    .count() as u64;
                self.metrics.per_wban[w].carryovers += carried;
            }
        }
        if sf >= self.cfg.superframes {
            return;
        }

        // occupancy epochs: clusters re-draw their channel block
        if sf > 0 && sf.is_multiple_of(self.cfg.iot_epoch_superframes) {
            self.world
                .redraw_cluster_channels(self.cfg, &mut self.cluster_streams);
        }

        // reset per-superframe state and generate this superframe's packets
        for w in 0..self.cfg.n_wbans {
            let crd = &mut self.crds[w];
            crd.stable_channel = None;
            crd.interfering.clear();
            self.backup_schedule[w].clear();
            self.slot_usage[w].clear();
            for sensor in &mut self.sensors[w] {
                sensor.mode = SensorMode::AwaitSlot;
                sensor.heard_selection_beacon = false;
                sensor.backup_slot = None;
                sensor.queue.push_back(sf);
                self.metrics.per_wban[w].ledger.generated += 1;
            }
        }
        if self.cfg.scheme == Scheme::Ssa {
            self.rebuild_ssa_plan();
        }

        // schedule the whole superframe; SlotStarts first so each tick's
        // activity refresh precedes its transmissions
        let start = self.layout.start_tick(sf);
        let period = self.layout.period();
        for t in 0..period {
            queue.schedule(SimTime::new(start + t), SimEvent::SlotStart);
        }
        queue.schedule(SimTime::new(start), SimEvent::Beacon { sf });
        for slot in 0..self.layout.tdma_slots {
            let t = SimTime::new(start + self.layout.tdma_offset(slot));
            queue.schedule(
                t,
                SimEvent::Transmission {
                    frame: FrameKind::Tdma,
                    slot,
                },
            );
            queue.schedule(
                t,
                SimEvent::AckDeadline {
                    sf,
                    frame: FrameKind::Tdma,
                    slot,
                },
            );
        }
        if self.cfg.scheme == Scheme::Csim {
            queue.schedule(
                SimTime::new(start + self.layout.exchange_offset()),
                SimEvent::BleBroadcast { sf },
            );
            queue.schedule(
                SimTime::new(start + self.layout.selection_offset()),
                SimEvent::SelectionBeacon { sf },
            );
            for b in 0..self.layout.backup_capacity {
                let t = SimTime::new(start + self.layout.backup_offset(b));
                queue.schedule(
                    t,
                    SimEvent::Transmission {
                        frame: FrameKind::Backup,
                        slot: b,
                    },
                );
                queue.schedule(
                    t,
                    SimEvent::AckDeadline {
                        sf,
                        frame: FrameKind::Backup,
                        slot: b,
                    },
                );
            }
        }
        let next = SimTime::new(start + period);
        queue.schedule(next, SimEvent::MobilityStep { sf: sf + 1 });
        queue.schedule(next, SimEvent::SuperframeBoundary { sf: sf + 1 });
    }

    fn handle(&mut self, queue: &mut EventQueue<SimEvent>, time: SimTime, event: SimEvent) {
        match event {
            SimEvent::MobilityStep { sf } => {
                if sf < self.cfg.superframes {
                    self.world.mobility_step(&mut self.mobility_streams);
                }
            }
            SimEvent::SuperframeBoundary { sf } => self.handle_boundary(queue, sf),
            SimEvent::Beacon { sf } => {
                self.record(sf, "grid".to_string(), "beacon", time.ticks(), None, "superframe");
            }
            SimEvent::SlotStart => self.world.refresh_iot_activity(&mut self.iot_traffic),
            SimEvent::Transmission { frame, slot } => self.handle_transmission(time, frame, slot),
            SimEvent::AckDeadline { sf, frame, .. } => self.handle_ack_deadline(time, sf, frame),
            SimEvent::BleBroadcast { sf } => self.handle_ble_broadcast(time, sf),
            SimEvent::SelectionBeacon { sf } => self.handle_selection_beacon(time, sf),
        }
    }

    fn finalize(mut self) -> RunOutput {
        // sensor-side ledger: whatever is still queued is pending
        for w in 0..self.cfg.n_wbans {
            let pending: u64 = self.sensors[w].iter().map(|s| s.queue.len() as u64).sum();
            self.metrics.per_wban[w].ledger.pending = pending;
            let ledger = self.metrics.per_wban[w].ledger;
            if !ledger.balances() {
                self.violations.push(format!(
                    "w{w}: packet ledger does not balance: {ledger:?}"
                ));
            }
        }
        let total_slots = self.cfg.superframes * self.layout.period();
        let wo_scan_events = total_slots.div_ceil(self.cfg.energy.scan_period_wo_slots);
        let run_seconds = total_slots as f64 * self.cfg.slot_duration_s;
        let summary = self.metrics.finalize(&RunContext {
            scheme: self.cfg.scheme.label(),
            seed: self.cfg.seed,
            superframes: self.cfg.superframes,
            energy: &self.cfg.energy,
            ble_enabled: self.cfg.ble_enabled,
            slots_per_run: total_slots,
            wo_scan_events,
            run_seconds,
        });
        RunOutput {
            summary,
            trace: self.trace,
            violations: self.violations,
        }
    }
}

/// Execute one scenario to completion. The configuration must be valid
/// (callers coming from config files go through [`ScenarioConfig::validate`]).
pub fn run_scenario(cfg: &ScenarioConfig, opts: &RunOptions) -> RunOutput {
    cfg.validate().expect("scenario config must be valid");
    let mut state = SimState::new(cfg, opts);
    let mut queue: EventQueue<SimEvent> = EventQueue::new();
    queue.schedule(SimTime::ZERO, SimEvent::SuperframeBoundary { sf: 0 });
    let end = SimTime::new(cfg.superframes * state.layout.period());
    run_until(&mut queue, end, |q, t, e| state.handle(q, t, e));
    state.finalize()
}
