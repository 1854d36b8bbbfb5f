//! Channel-set algebra over the 16 ZigBee channels and the noise-based
//! usability/stability machinery of the cognitive-radio module.
//!
//! A channel's quality indicator is the averaged received noise power over
//! `2u` unit-variance Gaussian samples. Its density is the Gamma(u, u)
//! density, which partitions into three regions by two thresholds: below the
//! lower threshold the channel is usable as-is, between the thresholds it is
//! usable with a transmit-power boost (a Shannon capacity estimate is
//! attached), above the upper threshold it is unusable. A channel is *stable*
//! when the probability of the indicator sitting in the two usable regions
//! meets a configured bound.

use crate::engine::RngStream;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Number of channels in the band.
pub const CHANNEL_COUNT: usize = 16;

/// One of the 16 ZigBee channels, indexed 0..=15.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChannelId(u8);

impl ChannelId {
    pub fn new(index: u8) -> Self {
        assert!(
            (index as usize) < CHANNEL_COUNT,
            "channel index {index} out of range"
        );
        ChannelId(index)
    }

    pub fn index(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = ChannelId> {
        (0..CHANNEL_COUNT as u8).map(ChannelId)
    }
}

impl fmt::Display for ChannelId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Subset of the 16 channels as a bit mask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ChannelSet(u16);

impl ChannelSet {
    pub const EMPTY: ChannelSet = ChannelSet(0);
    /// The whole band.
    pub const FULL: ChannelSet = ChannelSet(u16::MAX);

    pub fn from_bits(bits: u16) -> Self {
        ChannelSet(bits)
    }

    pub fn bits(self) -> u16 {
        self.0
    }

    pub fn single(ch: ChannelId) -> Self {
        ChannelSet(1 << ch.index())
    }

    pub fn contains(self, ch: ChannelId) -> bool {
        self.0 & (1 << ch.index()) != 0
    }

    pub fn insert(&mut self, ch: ChannelId) {
        self.0 |= 1 << ch.index();
    }

    pub fn remove(&mut self, ch: ChannelId) {
        self.0 &= !(1 << ch.index());
    }

    pub fn union(self, other: ChannelSet) -> ChannelSet {
        ChannelSet(self.0 | other.0)
    }

    pub fn intersection(self, other: ChannelSet) -> ChannelSet {
        ChannelSet(self.0 & other.0)
    }

    pub fn difference(self, other: ChannelSet) -> ChannelSet {
        ChannelSet(self.0 & !other.0)
    }

    /// Complement within the band.
    pub fn complement(self) -> ChannelSet {
        ChannelSet(!self.0)
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn is_full(self) -> bool {
        self.0 == u16::MAX
    }

    /// Channels in ascending index order.
    pub fn iter(self) -> impl Iterator<Item = ChannelId> {
        ChannelId::all().filter(move |ch| self.contains(*ch))
    }

    /// `n`-th member in ascending order.
    pub fn nth(self, n: usize) -> Option<ChannelId> {
        self.iter().nth(n)
    }
}

impl FromIterator<ChannelId> for ChannelSet {
    fn from_iter<T: IntoIterator<Item = ChannelId>>(iter: T) -> Self {
        let mut set = ChannelSet::EMPTY;
        for ch in iter {
            set.insert(ch);
        }
        set
    }
}

impl fmt::Debug for ChannelSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, ch) in self.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{ch}")?;
        }
        write!(f, "}}")
    }
}

/// Channels left for interference mitigation: the band minus the channels
/// reported busy in the vicinity and the WBAN's own default channel.
pub fn compute_unused(
    band: ChannelSet,
    vicinity: ChannelSet,
    default_channel: ChannelId,
) -> ChannelSet {
    debug_assert!(band.contains(default_channel), "default channel outside band");
    band.difference(vicinity.union(ChannelSet::single(default_channel)))
}

/// Noise-indicator model of the sensing radio.
///
/// `time_bandwidth` is the time-bandwidth product `u`; one indicator estimate
/// averages `2u` squared Gaussian samples. `0 < lower_threshold <
/// upper_threshold` split the indicator range into the usable /
/// boost-required / unusable regions (right-open at both thresholds). The
/// per-channel scale multiplies the unit noise variance so channels occupied
/// by nearby transmitters read hotter.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub time_bandwidth: u32,
    pub lower_threshold: f64,
    pub upper_threshold: f64,
    pub bandwidth_hz: f64,
    pub channel_scale: [f64; CHANNEL_COUNT],
}

impl NoiseModel {
    pub fn new(time_bandwidth: u32, lower_threshold: f64, upper_threshold: f64) -> Self {
        assert!(time_bandwidth >= 1, "time-bandwidth product must be >= 1");
        assert!(
            0.0 < lower_threshold && lower_threshold < upper_threshold,
            "thresholds must satisfy 0 < lower < upper"
        );
        NoiseModel {
            time_bandwidth,
            lower_threshold,
            upper_threshold,
            bandwidth_hz: 2.0e6,
            channel_scale: [1.0; CHANNEL_COUNT],
        }
    }

    pub fn with_scales(mut self, scales: [f64; CHANNEL_COUNT]) -> Self {
        assert!(scales.iter().all(|s| *s > 0.0), "noise scales must be positive");
        self.channel_scale = scales;
        self
    }

    pub fn scale_of(&self, ch: ChannelId) -> f64 {
        self.channel_scale[ch.index() as usize]
    }
}

/// Usability classes of a sensed channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChannelClass {
    Usable,
    UsableWithBoost,
    Unusable,
}

/// Outcome of classifying one noise-indicator reading.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelVerdict {
    pub class: ChannelClass,
    /// The measured indicator value.
    pub indicator: f64,
    /// Shannon capacity estimate, present only in the boost region.
    pub capacity_bps: Option<f64>,
}

/// Averaged received noise power over `2u` samples.
///
/// Panics unless exactly `2u` samples are supplied.
pub fn noise_power_indicator(samples: &[f64], time_bandwidth: u32) -> f64 {
    let expect = 2 * time_bandwidth as usize;
    assert_eq!(
        samples.len(),
        expect,
        "indicator needs exactly {expect} samples"
    );
    samples.iter().map(|n| n * n).sum::<f64>() / expect as f64
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

/// Density of the noise indicator at `y` for integer time-bandwidth `u`:
/// `u^u / (u-1)! * y^(u-1) * exp(-u y)` (the Gamma(u, u) density).
///
/// Panics on negative `y`.
pub fn noise_pdf(y: f64, time_bandwidth: u32) -> f64 {
    assert!(y >= 0.0, "indicator value must be non-negative");
    assert!(time_bandwidth >= 1);
    let u = f64::from(time_bandwidth);
    let norm = u.powi(time_bandwidth as i32) / factorial(time_bandwidth - 1);
    norm * y.powi(time_bandwidth as i32 - 1) * (-u * y).exp()
}

/// Adaptive Simpson quadrature to relative tolerance `rel_tol`.
fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, fa: f64, b: f64, fb: f64) -> (f64, f64) {
        let m = 0.5 * (a + b);
        let fm = f(m);
        ((b - a) / 6.0 * (fa + 4.0 * fm + fb), fm)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        fa: f64,
        b: f64,
        fb: f64,
        whole: f64,
        fm: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (left, flm) = simpson(f, a, fa, m, fm);
        let (right, frm) = simpson(f, m, fm, b, fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, fa, m, fm, left, flm, tol / 2.0, depth - 1)
                + recurse(f, m, fm, b, fb, right, frm, tol / 2.0, depth - 1)
        }
    }

    if a >= b {
        return 0.0;
    }
    // seed the recursion with a composite grid so narrow features cannot
    // slip between the first probe points
    const PANELS: usize = 32;
    let h = (b - a) / PANELS as f64;
    let edges: Vec<f64> = (0..=PANELS).map(|i| a + h * i as f64).collect();
    let values: Vec<f64> = edges.iter().map(|x| f(*x)).collect();
    let mut rough = 0.0;
    let mut panels = Vec::with_capacity(PANELS);
    for i in 0..PANELS {
        let (s, fm) = simpson(f, edges[i], values[i], edges[i + 1], values[i + 1]);
        rough += s;
        panels.push((s, fm));
    }
    let tol = rel_tol * rough.abs().max(1e-300) / PANELS as f64;
    let mut total = 0.0;
    for (i, (s, fm)) in panels.into_iter().enumerate() {
        total += recurse(
            f,
            edges[i],
            values[i],
            edges[i + 1],
            values[i + 1],
            s,
            fm,
            tol,
            40,
        );
    }
    total
}

const QUAD_REL_TOL: f64 = 1e-8;

/// P(indicator < x): closed form for `u = 1`, adaptive quadrature otherwise.
fn indicator_cdf(x: f64, time_bandwidth: u32) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if time_bandwidth == 1 {
        1.0 - (-x).exp()
    } else {
        adaptive_simpson(&|y| noise_pdf(y, time_bandwidth), 0.0, x, QUAD_REL_TOL).clamp(0.0, 1.0)
    }
}

/// Probability that the indicator falls in region `j` of the model
/// (1 = usable, 2 = boost-required, 3 = unusable), at unit noise scale.
pub fn region_probability(j: u8, model: &NoiseModel) -> f64 {
    assert!((1..=3).contains(&j), "region index must be 1, 2 or 3");
    let u = model.time_bandwidth;
    if u == 1 {
        return match j {
            1 => 1.0 - (-model.lower_threshold).exp(),
            2 => (-model.lower_threshold).exp() - (-model.upper_threshold).exp(),
            _ => (-model.upper_threshold).exp(),
        };
    }
    let (a, b) = match j {
        1 => (0.0, model.lower_threshold),
        2 => (model.lower_threshold, model.upper_threshold),
        // the density tail decays at least like exp(-u y); beyond this
        // horizon the truncated mass is far below the quadrature tolerance
        _ => (model.upper_threshold, model.upper_threshold + 80.0 / f64::from(u) + 8.0),
    };
    adaptive_simpson(&|y| noise_pdf(y, u), a, b, QUAD_REL_TOL)
}

/// Maximum transmission capacity in bit/s for a linear (non-dB) SNR.
pub fn shannon_capacity(bandwidth_hz: f64, snr_linear: f64) -> f64 {
    assert!(bandwidth_hz > 0.0 && snr_linear >= 0.0);
    bandwidth_hz * (1.0 + snr_linear).log2()
}

/// Classify a sensed indicator value against the model thresholds.
///
/// Intervals are right-open: `[0, lower)` usable, `[lower, upper)` usable
/// with boost, `[upper, inf)` unusable. In the boost region the attached
/// capacity uses the indicator as the normalized noise power, i.e. SNR = 1/y.
pub fn classify_channel(y: f64, model: &NoiseModel) -> ChannelVerdict {
    assert!(y >= 0.0, "indicator value must be non-negative");
    if y < model.lower_threshold {
        ChannelVerdict {
            class: ChannelClass::Usable,
            indicator: y,
            capacity_bps: None,
        }
    } else if y < model.upper_threshold {
        ChannelVerdict {
            class: ChannelClass::UsableWithBoost,
            indicator: y,
            capacity_bps: Some(shannon_capacity(model.bandwidth_hz, 1.0 / y)),
        }
    } else {
        ChannelVerdict {
            class: ChannelClass::Unusable,
            indicator: y,
            capacity_bps: None,
        }
    }
}

/// Probability that `channel` reads inside the two usable regions under its
/// configured noise scale: P(Y < upper_threshold | scale).
pub fn usable_probability(channel: ChannelId, model: &NoiseModel) -> f64 {
    let scale = model.scale_of(channel);
    indicator_cdf(model.upper_threshold / scale, model.time_bandwidth)
}

/// Stability test: the channel stays transmit-capable with probability at
/// least `stability_threshold`.
pub fn is_stable(channel: ChannelId, model: &NoiseModel, stability_threshold: f64) -> bool {
    usable_probability(channel, model) >= stability_threshold
}

/// Result of a sequential scan for a usable, stable channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionOutcome {
    pub chosen: Option<ChannelId>,
    /// Channels actually sensed (energy accounting).
    pub channels_sensed: u32,
}

/// Scan `candidates` in order, sensing each channel through `sense` (which
/// must return `2u` noise samples). The first channel that classifies usable
/// (with or without boost) *and* passes the stability test is returned;
/// otherwise the scan continues. `None` means no candidate qualified and the
/// caller stays silent this round.
pub fn select_stable_channel(
    candidates: &[ChannelId],
    model: &NoiseModel,
    stability_threshold: f64,
    mut sense: impl FnMut(ChannelId) -> Vec<f64>,
) -> SelectionOutcome {
    let mut sensed = 0;
    for &ch in candidates {
        let samples = sense(ch);
        sensed += 1;
        let y = noise_power_indicator(&samples, model.time_bandwidth);
        let verdict = classify_channel(y, model);
        if verdict.class == ChannelClass::Unusable {
            continue;
        }
        if is_stable(ch, model, stability_threshold) {
            return SelectionOutcome {
                chosen: Some(ch),
                channels_sensed: sensed,
            };
        }
    }
    SelectionOutcome {
        chosen: None,
        channels_sensed: sensed,
    }
}

/// Draw `2u` noise samples for a channel whose noise variance is scaled by
/// `scale` (occupied channels read hotter).
pub fn draw_noise_samples(rng: &mut RngStream, time_bandwidth: u32, scale: f64) -> Vec<f64> {
    let sd = scale.sqrt();
    (0..2 * time_bandwidth as usize)
        .map(|_| rng.standard_normal() * sd)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::RngStream;

    fn model(u: u32, lo: f64, hi: f64) -> NoiseModel {
        NoiseModel::new(u, lo, hi)
    }

    #[test]
    fn indicator_trivials() {
        assert_eq!(noise_power_indicator(&[1.0, -1.0], 1), 1.0);
        assert_eq!(noise_power_indicator(&[0.0; 4], 2), 0.0);
    }

    #[test]
    fn indicator_matches_independent_sum_of_squares() {
        let mut rng = RngStream::new(777, 5);
        let samples: Vec<f64> = (0..6).map(|_| rng.standard_normal()).collect();
        let by_hand = samples.iter().map(|n| n * n).sum::<f64>() / 6.0;
        assert!((noise_power_indicator(&samples, 3) - by_hand).abs() < 1e-15);
    }

    #[test]
    #[should_panic(expected = "exactly")]
    fn indicator_rejects_wrong_sample_count() {
        noise_power_indicator(&[1.0, 2.0, 3.0], 2);
    }

    #[test]
    fn pdf_trivials() {
        assert!((noise_pdf(0.0, 1) - 1.0).abs() < 1e-15);
        assert!((noise_pdf(std::f64::consts::LN_2, 1) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn pdf_normalizes_by_quadrature() {
        for u in [1u32, 2, 4, 8] {
            let total = adaptive_simpson(&|y| noise_pdf(y, u), 0.0, 50.0, 1e-10);
            assert!((total - 1.0).abs() < 1e-6, "u={u}: integral {total}");
        }
    }

    #[test]
    fn classify_respects_region_boundaries() {
        let m = model(4, 1.5, 3.0);
        assert_eq!(classify_channel(0.75, &m).class, ChannelClass::Usable);
        assert_eq!(
            classify_channel(2.25, &m).class,
            ChannelClass::UsableWithBoost
        );
        assert_eq!(classify_channel(6.0, &m).class, ChannelClass::Unusable);
        // right-open boundaries
        assert_eq!(
            classify_channel(1.5, &m).class,
            ChannelClass::UsableWithBoost
        );
        assert_eq!(classify_channel(3.0, &m).class, ChannelClass::Unusable);
        assert!(classify_channel(2.25, &m).capacity_bps.is_some());
        assert!(classify_channel(0.75, &m).capacity_bps.is_none());
    }

    #[test]
    fn capacity_trivials() {
        assert!((shannon_capacity(2e6, 1.0) - 2e6).abs() < 1e-9);
        assert_eq!(shannon_capacity(1e6, 0.0), 0.0);
        assert!((shannon_capacity(2e6, 3.0) - 4e6).abs() < 1e-9);
    }

    #[test]
    fn region_probabilities_match_exponential_closed_forms() {
        let m = model(1, std::f64::consts::LN_2, 4f64.ln());
        assert!((region_probability(1, &m) - 0.5).abs() < 1e-12);
        assert!((region_probability(2, &m) - 0.25).abs() < 1e-12);
        assert!((region_probability(3, &m) - 0.25).abs() < 1e-12);
    }

    #[test]
    fn region_probabilities_sum_to_one() {
        for u in [1u32, 2, 4, 8] {
            let m = model(u, 1.5, 3.0);
            let total: f64 = (1..=3).map(|j| region_probability(j, &m)).sum();
            assert!((total - 1.0).abs() < 1e-6, "u={u}: sum {total}");
        }
    }

    #[test]
    fn stability_follows_usable_mass() {
        let m = model(1, std::f64::consts::LN_2, 4f64.ln());
        let ch = ChannelId::new(0);
        // usable mass = 0.75
        assert!(is_stable(ch, &m, 0.7));
        assert!(!is_stable(ch, &m, 1.0));
        assert!(is_stable(ch, &m, 0.0));
    }

    #[test]
    fn stability_respects_channel_scale() {
        let mut scales = [1.0; CHANNEL_COUNT];
        scales[3] = 5.0;
        let m = model(4, 1.5, 3.0).with_scales(scales);
        assert!(is_stable(ChannelId::new(0), &m, 0.9));
        assert!(!is_stable(ChannelId::new(3), &m, 0.9));
    }

    #[test]
    fn unused_pool_trivials() {
        let d = ChannelId::new(3);
        let us = compute_unused(ChannelSet::FULL, ChannelSet::EMPTY, d);
        assert_eq!(us.len(), 15);
        assert!(!us.contains(d));

        let us = compute_unused(ChannelSet::FULL, ChannelSet::FULL, d);
        assert!(us.is_empty());

        let vicinity: ChannelSet = [1u8, 2].iter().map(|i| ChannelId::new(*i)).collect();
        let us = compute_unused(ChannelSet::FULL, vicinity, d);
        assert_eq!(us.len(), 13);
        for i in [1u8, 2, 3] {
            assert!(!us.contains(ChannelId::new(i)));
        }
    }

    #[test]
    fn selection_stops_at_first_stable_candidate() {
        // scale 1 channels classify usable and stable; channel 0 is scripted hot
        let m = model(4, 1.5, 3.0);
        let candidates = [ChannelId::new(0), ChannelId::new(1), ChannelId::new(2)];
        let mut sensed_order = Vec::new();
        let out = select_stable_channel(&candidates, &m, 0.9, |ch| {
            sensed_order.push(ch.index());
            if ch.index() == 0 {
                vec![10.0; 8] // indicator 100: unusable
            } else {
                vec![0.5; 8] // indicator 0.25: usable
            }
        });
        assert_eq!(out.chosen, Some(ChannelId::new(1)));
        assert_eq!(out.channels_sensed, 2);
        assert_eq!(sensed_order, vec![0, 1]); // third candidate never sensed
    }

    #[test]
    fn selection_reports_exhaustion() {
        let m = model(4, 1.5, 3.0);
        let candidates = [ChannelId::new(0), ChannelId::new(1)];
        let out = select_stable_channel(&candidates, &m, 0.9, |_| vec![10.0; 8]);
        assert_eq!(out.chosen, None);
        assert_eq!(out.channels_sensed, 2);
    }

    #[test]
    fn selection_skips_usable_but_unstable() {
        let mut scales = [1.0; CHANNEL_COUNT];
        scales[0] = 5.0; // unstable under threshold 0.9
        let m = model(4, 1.5, 3.0).with_scales(scales);
        let candidates = [ChannelId::new(0), ChannelId::new(1)];
        let out = select_stable_channel(&candidates, &m, 0.9, |ch| {
            // both read usable at sensing time
            let _ = ch;
            vec![0.5; 8]
        });
        assert_eq!(out.chosen, Some(ChannelId::new(1)));
        assert_eq!(out.channels_sensed, 2);
    }

    proptest::proptest! {
        #[test]
        fn verdict_partition_is_total(y in 0.0f64..50.0) {
            let m = model(4, 1.5, 3.0);
            let v = classify_channel(y, &m);
            let expected = if y < 1.5 {
                ChannelClass::Usable
            } else if y < 3.0 {
                ChannelClass::UsableWithBoost
            } else {
                ChannelClass::Unusable
            };
            proptest::prop_assert_eq!(v.class, expected);
            proptest::prop_assert_eq!(v.capacity_bps.is_some(), v.class == ChannelClass::UsableWithBoost);
        }

        #[test]
        fn unused_pool_counts_complement(bits: u16, default in 0u8..16) {
            let vicinity = ChannelSet::from_bits(bits);
            let d = ChannelId::new(default);
            let us = compute_unused(ChannelSet::FULL, vicinity, d);
            let consumed = vicinity.union(ChannelSet::single(d));
            proptest::prop_assert_eq!(us.len(), 16 - consumed.len());
            proptest::prop_assert!(us.intersection(consumed).is_empty());
            proptest::prop_assert_eq!(us.union(consumed), ChannelSet::FULL);
        }

        #[test]
        fn probability_regions_sum_to_one_for_random_models(
            u in 1u32..8,
            lo in 0.05f64..2.0,
            width in 0.05f64..3.0,
        ) {
            let m = model(u, lo, lo + width);
            let total: f64 = (1..=3).map(|j| region_probability(j, &m)).sum();
            proptest::prop_assert!((total - 1.0).abs() < 1e-6);
        }
    }
}
