//! Deterministic discrete-event core: virtual clock, ordered event queue and
//! per-entity random streams.
//!
//! Ordering is total over `(time, insertion sequence)`, so events scheduled
//! at the same tick pop in FIFO order and a replay of the same scenario and
//! seed reproduces the exact event trace.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use std::cmp::{Ordering, Reverse};
use std::collections::{BinaryHeap, HashSet};
use std::fmt;

/// Virtual time counted in slot-grid ticks (one tick = one time-slot).
///
/// The wall-clock length of a tick is a scenario scalar; nothing in the core
/// depends on it.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, serde::Serialize)]
pub struct SimTime(u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub fn new(ticks: u64) -> Self {
        SimTime(ticks)
    }

    pub fn ticks(self) -> u64 {
        self.0
    }

    /// Time `ticks` slots later.
    pub fn offset(self, ticks: u64) -> Self {
        SimTime(self.0 + ticks)
    }
}

impl fmt::Debug for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "t{}", self.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Handle returned by [`EventQueue::schedule`]; permits cancellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EventHandle(u64);

struct Scheduled<E> {
    time: SimTime,
    seq: u64,
    event: E,
}

impl<E> PartialEq for Scheduled<E> {
    fn eq(&self, other: &Self) -> bool {
        self.seq == other.seq
    }
}
impl<E> Eq for Scheduled<E> {}
impl<E> PartialOrd for Scheduled<E> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<E> Ord for Scheduled<E> {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.time, self.seq).cmp(&(other.time, other.seq))
    }
}

/// Ordered event queue with a monotone virtual clock.
pub struct EventQueue<E> {
    heap: BinaryHeap<Reverse<Scheduled<E>>>,
    cancelled: HashSet<u64>,
    clock: SimTime,
    next_seq: u64,
}

impl<E> Default for EventQueue<E> {
    fn default() -> Self {
        Self::new()
    }
}

impl<E> EventQueue<E> {
    pub fn new() -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            cancelled: HashSet::new(),
            clock: SimTime::ZERO,
            next_seq: 0,
        }
    }

    pub fn clock(&self) -> SimTime {
        self.clock
    }

    /// Number of entries still queued (cancelled-but-unpopped entries count).
    pub fn pending(&self) -> usize {
        self.heap.len()
    }

    /// Enqueue `event` at `time`.
    ///
    /// Panics if `time` is behind the clock: scheduling into the past is a
    /// contract violation.
    pub fn schedule(&mut self, time: SimTime, event: E) -> EventHandle {
        assert!(
            time >= self.clock,
            "event scheduled at t{} behind clock t{}",
            time.ticks(),
            self.clock.ticks()
        );
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(Reverse(Scheduled { time, seq, event }));
        EventHandle(seq)
    }

    /// Mark the event behind `handle` as cancelled; it will be skipped when
    /// its turn comes. Cancelling an already-processed event is a no-op.
    pub fn cancel(&mut self, handle: EventHandle) {
        self.cancelled.insert(handle.0);
    }

    /// Pop the next live event with `time <= end`, advancing the clock to its
    /// timestamp. Returns `None` once no due event remains (the clock is left
    /// where the last event put it; see [`advance_to`](Self::advance_to)).
    pub fn pop_due(&mut self, end: SimTime) -> Option<(SimTime, E)> {
        loop {
            match self.heap.peek() {
                Some(Reverse(s)) if s.time <= end => {}
                _ => return None,
            }
            let Reverse(s) = self.heap.pop().expect("peeked entry present");
            if self.cancelled.remove(&s.seq) {
                continue;
            }
            self.clock = s.time;
            return Some((s.time, s.event));
        }
    }

    /// Move the clock forward to `t` without processing anything.
    pub fn advance_to(&mut self, t: SimTime) {
        assert!(
            t >= self.clock,
            "clock may not move backwards (t{} < t{})",
            t.ticks(),
            self.clock.ticks()
        );
        self.clock = t;
    }
}

/// Process every event with `time <= end` in order, leaving the clock at
/// `end`. Returns the number of events handled. The handler may schedule
/// further events (at or after the current clock) through the queue it is
/// given.
pub fn run_until<E, F>(queue: &mut EventQueue<E>, end: SimTime, mut handler: F) -> u64
where
    F: FnMut(&mut EventQueue<E>, SimTime, E),
{
    assert!(end >= queue.clock(), "run_until target behind clock");
    let mut processed = 0;
    while let Some((time, event)) = queue.pop_due(end) {
        handler(queue, time, event);
        processed += 1;
    }
    queue.advance_to(end);
    processed
}

/// One reproducible randomness stream.
///
/// Identical `(seed, stream_id)` pairs yield identical draw sequences across
/// runs; distinct stream ids give statistically independent streams of the
/// same generator. Every simulated entity owns its own stream so that adding
/// or removing an entity never reorders another entity's draws.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    stream_id: u64,
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngStream {
            seed,
            stream_id,
            rng,
        }
    }

    pub fn for_domain(seed: u64, domain: StreamDomain) -> Self {
        Self::new(seed, domain.stream_id())
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_id(&self) -> u64 {
        self.stream_id
    }

    /// Uniform draw in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform integer in `[0, n)`.
    pub fn below(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    /// Uniform draw in `[lo, hi)`.
    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.random_range(lo..hi)
    }

    /// Standard normal draw (zero mean, unit variance).
    pub fn standard_normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Bernoulli draw.
    pub fn chance(&mut self, p: f64) -> bool {
        self.rng.random_bool(p.clamp(0.0, 1.0))
    }
}

/// Stream-id assignment per simulated entity or world process.
///
/// The encoding packs a domain tag and the entity index into the 64-bit
/// stream id of the underlying generator.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamDomain {
    /// Initial coordinator position and sensor offsets of one WBAN.
    WbanPlacement(u32),
    /// Per-superframe coordinator relocation of one WBAN.
    WbanMobility(u32),
    /// Coordinator decisions: default-channel pick, pool picks, noise scans.
    Coordinator(u32),
    /// Probabilistic link outcomes attributed to one WBAN.
    WbanLink(u32),
    /// Initial position of one IoT device.
    IotPlacement(u32),
    /// Per-slot activity draws of one IoT device.
    IotTraffic(u32),
    /// Channel-block draws of one IoT cluster.
    IotClusterChannels(u32),
}

impl StreamDomain {
    pub fn stream_id(self) -> u64 {
        let (tag, idx) = match self {
            StreamDomain::WbanPlacement(i) => (1u64, i),
            StreamDomain::WbanMobility(i) => (2, i),
            StreamDomain::Coordinator(i) => (3, i),
            StreamDomain::WbanLink(i) => (4, i),
            StreamDomain::IotPlacement(i) => (5, i),
            StreamDomain::IotTraffic(i) => (6, i),
            StreamDomain::IotClusterChannels(i) => (7, i),
        };
        (tag << 32) | u64::from(idx)
    }
}
