//! SSA baseline: orthogonal channel assignment to the sensors in the
//! pairwise interference sets of interfering WBANs.

use crate::spectrum::{ChannelId, ChannelSet, CHANNEL_COUNT};
use crate::world::{received_power_dbm, RadioParams, World};
use std::collections::{BTreeMap, BTreeSet};

/// Sensor address: (wban, sensor index).
pub type SensorRef = (usize, usize);

/// Sensors of a WBAN pair whose transmissions mutually interfere under the
/// current geometry. Recomputed after every mobility step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterferenceSet {
    pub wbans: (usize, usize),
    /// Members of either WBAN, in (wban, sensor) order.
    pub members: Vec<SensorRef>,
}

/// Build the non-empty pairwise interference sets: a sensor joins the set of
/// a pair when its received power at the other WBAN's coordinator clears
/// `cutoff_dbm`.
pub fn build_interference_sets(
    world: &World,
    params: &RadioParams,
    sensor_tx_dbm: f64,
    cutoff_dbm: f64,
) -> Vec<InterferenceSet> {
    let n = world.coordinators.len();
    let mut sets = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            let mut members = Vec::new();
            for (side, other) in [(a, b), (b, a)] {
                for s in 0..world.sensor_offsets[side].len() {
                    let pos = world.sensor_position(side, s);
                    if received_power_dbm(pos, world.coordinators[other], sensor_tx_dbm, params)
                        >= cutoff_dbm
                    {
                        members.push((side, s));
                    }
                }
            }
            if !members.is_empty() {
                members.sort_unstable();
                sets.push(InterferenceSet {
                    wbans: (a, b),
                    members,
                });
            }
        }
    }
    sets
}

/// Outcome of coloring the conflict graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrthogonalAssignment {
    pub channels: BTreeMap<SensorRef, ChannelId>,
    /// Sensors that could not get a conflict-free channel (the 16 channels
    /// were exhausted among their neighbors); they reuse the least-loaded
    /// channel and count against availability.
    pub unprovisioned: u64,
}

/// Greedy coloring of the conflict graph (vertices: sensors in any set;
/// edges: co-membership), in descending-degree order with sensor-id
/// tie-break. Each sensor receives the globally least-loaded channel among
/// those not used by its colored neighbors; exhausted sensors reuse the
/// least-loaded channel outright.
pub fn assign_orthogonal_channels(sets: &[InterferenceSet]) -> OrthogonalAssignment {
    let mut adjacency: BTreeMap<SensorRef, BTreeSet<SensorRef>> = BTreeMap::new();
    for set in sets {
        for &v in &set.members {
            adjacency.entry(v).or_default();
        }
        for (i, &v) in set.members.iter().enumerate() {
            for &w in &set.members[i + 1..] {
                adjacency.get_mut(&v).unwrap().insert(w);
                adjacency.get_mut(&w).unwrap().insert(v);
            }
        }
    }

    let mut order: Vec<SensorRef> = adjacency.keys().copied().collect();
    order.sort_by_key(|v| (std::cmp::Reverse(adjacency[v].len()), *v));

    let mut channels: BTreeMap<SensorRef, ChannelId> = BTreeMap::new();
    let mut load = [0u32; CHANNEL_COUNT];
    let mut unprovisioned = 0;
    for v in order {
        let mut blocked = ChannelSet::EMPTY;
        for n in &adjacency[&v] {
            if let Some(ch) = channels.get(n) {
                blocked.insert(*ch);
            }
        }
        let pick_least_loaded = |allowed: ChannelSet| -> Option<ChannelId> {
            allowed
                .iter()
                .min_by_key(|ch| (load[ch.index() as usize], ch.index()))
        };
        let ch = match pick_least_loaded(blocked.complement()) {
            Some(ch) => ch,
            None => {
                unprovisioned += 1;
                pick_least_loaded(ChannelSet::FULL).expect("band is non-empty")
            }
        };
        load[ch.index() as usize] += 1;
        channels.insert(v, ch);
    }
    OrthogonalAssignment {
        channels,
        unprovisioned,
    }
}

/// Distinct channels consumed around each WBAN: the channels assigned to any
/// member of an interference set the WBAN participates in.
pub fn consumed_channels_per_wban(
    n_wbans: usize,
    sets: &[InterferenceSet],
    assignment: &OrthogonalAssignment,
) -> Vec<usize> {
    let mut consumed = vec![ChannelSet::EMPTY; n_wbans];
    for set in sets {
        let mut used = ChannelSet::EMPTY;
        for m in &set.members {
            used.insert(assignment.channels[m]);
        }
        let (a, b) = set.wbans;
        consumed[a] = consumed[a].union(used);
        consumed[b] = consumed[b].union(used);
    }
    consumed.into_iter().map(|c| c.len()).collect()
}
