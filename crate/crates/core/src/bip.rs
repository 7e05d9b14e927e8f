//! Break-in-presence: per-slot delay/quality indicator and the per-user score.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

/// A frame split into `N_L` pixel groups with importance weights summing to 1.
#[derive(Clone, Debug, PartialEq)]
pub struct VideoFrameModel {
    importance: Vec<f64>,
    /// Group indices by descending importance, ties by index.
    order: Vec<usize>,
    /// `D_full`, bits for the whole frame.
    pub full_bits: f64,
    /// `A`, tracking payload in bits.
    pub tracking_bits: f64,
    /// `γ_D`, seconds.
    pub delay_budget: f64,
    /// `γ_Q`.
    pub quality_threshold: f64,
}

impl VideoFrameModel {
    /// Normalizes `weights` to sum to one.
    pub fn new(
        weights: Vec<f64>,
        full_bits: f64,
        tracking_bits: f64,
        delay_budget: f64,
        quality_threshold: f64,
    ) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::config("frame", "need at least one pixel group"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::config("frame", "importance weights must be non-negative"));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(Error::config("frame", "importance weights sum to zero"));
        }
        if !(full_bits > 0.0 && tracking_bits >= 0.0 && delay_budget > 0.0) {
            return Err(Error::config("frame", "payload sizes and delay budget must be positive"));
        }
        if !(0.0..=1.0).contains(&quality_threshold) {
            return Err(Error::config("frame", "quality threshold must lie in [0, 1]"));
        }
        let importance: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mut order: Vec<usize> = (0..importance.len()).collect();
        order.sort_by(|&a, &b| importance[b].total_cmp(&importance[a]).then(a.cmp(&b)));
        Ok(Self {
            importance,
            order,
            full_bits,
            tracking_bits,
            delay_budget,
            quality_threshold,
        })
    }

    /// Importance profile: the leading `uncompressible` fraction of groups at
    /// weight 1, the rest uniform in `[0, 1)`, then normalized.
    pub fn profile<R: Rng>(
        n_groups: usize,
        uncompressible: f64,
        rng: &mut R,
        full_bits: f64,
        tracking_bits: f64,
        delay_budget: f64,
        quality_threshold: f64,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&uncompressible) {
            return Err(Error::config("frame", "uncompressible fraction must lie in [0, 1]"));
        }
        let hard = (uncompressible * n_groups as f64).round() as usize;
        let weights = (0..n_groups)
            .map(|g| if g < hard { 1.0 } else { rng.random_range(0.0..1.0) })
            .collect();
        Self::new(weights, full_bits, tracking_bits, delay_budget, quality_threshold)
    }

    pub fn n_groups(&self) -> usize {
        self.importance.len()
    }

    pub fn importance(&self) -> &[f64] {
        &self.importance
    }

    pub fn group_bits(&self) -> f64 {
        self.full_bits / self.n_groups() as f64
    }

    /// `D(l)`: bits of the delivered groups.
    pub fn payload_bits(&self, delivered: &[bool]) -> f64 {
        delivered.iter().filter(|x| **x).count() as f64 * self.group_bits()
    }

    /// `l·m`.
    pub fn quality(&self, delivered: &[bool]) -> f64 {
        delivered
            .iter()
            .zip(&self.importance)
            .filter(|(l, _)| **l)
            .map(|(_, m)| m)
            .sum()
    }

    /// Quality when the `count` most important groups are delivered.
    pub fn quality_of_top(&self, count: usize) -> f64 {
        self.order[..count.min(self.n_groups())]
            .iter()
            .map(|&g| self.importance[g])
            .sum()
    }
}

/// Delivers groups in descending importance while the slot's bit budget
/// `rate·slot` lasts; a group that the budget reaches is delivered.
pub fn delivery_vector(rate: f64, slot_duration: f64, frame: &VideoFrameModel) -> Vec<bool> {
    let count = delivered_count(rate, slot_duration, frame);
    let mut l = vec![false; frame.n_groups()];
    for &g in &frame.order[..count] {
        l[g] = true;
    }
    l
}

pub fn delivered_count(rate: f64, slot_duration: f64, frame: &VideoFrameModel) -> usize {
    let budget = (rate * slot_duration).max(0.0);
    if !budget.is_finite() {
        return frame.n_groups();
    }
    let groups = budget / frame.group_bits();
    // relative slack keeps exact halves from rounding up a group
    ((groups - 1e-9 * groups.max(1.0)).ceil().max(0.0) as usize).min(frame.n_groups())
}

/// `T/c`, infinite for a dead link, zero when nothing needs sending.
pub fn transfer_delay(bits: f64, rate: f64) -> f64 {
    if bits <= 0.0 {
        0.0
    } else if rate > 0.0 {
        bits / rate
    } else {
        f64::INFINITY
    }
}

/// ω = 1 iff `A/c_UL + D(l)/c_DL > γ_D` or `l·m < γ_Q`.
pub fn bip_indicator(ul_rate: f64, dl_rate: f64, delivered: &[bool], frame: &VideoFrameModel) -> bool {
    let delay = transfer_delay(frame.tracking_bits, ul_rate) + transfer_delay(frame.payload_bits(delivered), dl_rate);
    delay > frame.delay_budget || frame.quality(delivered) < frame.quality_threshold
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SlotOutcome {
    pub uplink_s: f64,
    pub downlink_s: f64,
    pub quality: f64,
    pub omega: bool,
}

/// Delivery, delays, quality and ω for one slot.
pub fn evaluate_slot(ul_rate: f64, dl_rate: f64, slot_duration: f64, frame: &VideoFrameModel) -> SlotOutcome {
    let l = delivery_vector(dl_rate, slot_duration, frame);
    SlotOutcome {
        uplink_s: transfer_delay(frame.tracking_bits, ul_rate),
        downlink_s: transfer_delay(frame.payload_bits(&l), dl_rate),
        quality: frame.quality(&l),
        omega: bip_indicator(ul_rate, dl_rate, &l, frame),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AwarenessProfile {
    /// `G_A`.
    pub app_effect: f64,
    /// Variance of `ε_i`, drawn once per user.
    pub user_var: f64,
    /// Variance of `ε_{G_A|i,t}`, drawn per slot.
    pub app_var: f64,
    /// Variance of `ε_{B,t}`, drawn per slot.
    pub slot_var: f64,
}

impl Default for AwarenessProfile {
    fn default() -> Self {
        Self {
            app_effect: 11.0,
            user_var: 0.193,
            app_var: 0.151,
            slot_var: 0.05,
        }
    }
}

impl AwarenessProfile {
    pub fn noiseless(app_effect: f64) -> Self {
        Self {
            app_effect,
            user_var: 0.0,
            app_var: 0.0,
            slot_var: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if [self.user_var, self.app_var, self.slot_var]
            .iter()
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            return Err(Error::config("awareness", "variances must be non-negative"));
        }
        if !self.app_effect.is_finite() {
            return Err(Error::config("awareness", "application effect must be finite"));
        }
        Ok(())
    }

    /// Noise-free score for a BIP rate: `G_A + (1 + G_A)·mean(ω)`.
    pub fn expected_score(&self, mean_omega: f64) -> f64 {
        self.app_effect + (1.0 + self.app_effect) * mean_omega
    }
}

fn gaussian(var: f64) -> Normal<f64> {
    Normal::new(0.0, var.sqrt()).expect("variance validated non-negative")
}

/// `P_i = (1/T)·Σ_t (G_A + ω + G_A·ω + ε_i + ε_{G_A|i,t} + ε_{B,t})`.
pub fn bip_score<R: Rng>(omegas: &[bool], profile: &AwarenessProfile, rng: &mut R) -> Result<f64> {
    if omegas.is_empty() {
        return Err(Error::Empty("BIP indicator series"));
    }
    profile.validate()?;
    let g = profile.app_effect;
    let eps_user = gaussian(profile.user_var).sample(rng);
    let app = gaussian(profile.app_var);
    let slot = gaussian(profile.slot_var);
    let mut total = 0.0;
    for &w in omegas {
        let w = if w { 1.0 } else { 0.0 };
        total += g + w + g * w + eps_user + app.sample(rng) + slot.sample(rng);
    }
    Ok(total / omegas.len() as f64)
}

pub fn bip_score_seeded(omegas: &[bool], profile: &AwarenessProfile, seed: u64) -> Result<f64> {
    bip_score(omegas, profile, &mut ChaCha8Rng::seed_from_u64(seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn frame(n: usize) -> VideoFrameModel {
        let w = (0..n).map(|g| 1.0 + g as f64).collect();
        VideoFrameModel::new(w, 1e6, 50e3, 0.010, 0.8).unwrap()
    }

    #[test]
    fn delivery_extremes() {
        let f = frame(8);
        assert!(delivery_vector(1e6 / 0.02, 0.02, &f).iter().all(|x| *x));
        assert!(delivery_vector(1e12, 0.02, &f).iter().all(|x| *x));
        assert!(delivery_vector(0.0, 0.02, &f).iter().all(|x| !*x));
    }

    #[test]
    fn half_budget_delivers_most_important_half() {
        for n in 1..=9 {
            let f = frame(n);
            let l = delivery_vector(0.5e6 / 0.02, 0.02, &f);
            let expected = n.div_ceil(2);
            assert_eq!(l.iter().filter(|x| **x).count(), expected, "n = {n}");
            // importance grows with index, so the delivered groups are the top ones
            for (g, d) in l.iter().enumerate() {
                assert_eq!(*d, g >= n - expected);
            }
        }
    }

    #[test]
    fn greedy_order_matches_brute_force() {
        // among all subsets of the delivered size the greedy one has maximal quality
        let f = VideoFrameModel::new(vec![0.3, 0.9, 0.1, 0.5, 0.7], 1e6, 0.0, 1.0, 0.5).unwrap();
        for count in 0..=5 {
            let rate = count as f64 * f.group_bits() / 0.02;
            let l = delivery_vector(rate, 0.02, &f);
            let q = f.quality(&l);
            let mut best: f64 = 0.0;
            for mask in 0u32..32 {
                if mask.count_ones() as usize == count {
                    let sub: Vec<bool> = (0..5).map(|g| mask & (1 << g) != 0).collect();
                    best = best.max(f.quality(&sub));
                }
            }
            assert_relative_eq!(q, best, epsilon = 1e-12);
            assert_relative_eq!(q, f.quality_of_top(count), epsilon = 1e-12);
        }
    }

    #[test]
    fn indicator_examples() {
        // one group with weight 1, so quality is driven through the threshold directly
        let mk = |q: f64| VideoFrameModel::new(vec![1.0], 6e4, 5e4, 0.010, q).unwrap();
        let all = [true];
        // uplink 5 ms + downlink 6 ms
        assert!(bip_indicator(1e7, 1e7, &all, &mk(0.8)));
        // 8 ms total, full quality
        let f = mk(0.8);
        assert!(!bip_indicator(5e4 / 0.004, 6e4 / 0.004, &all, &f));
        let strict = VideoFrameModel::new(vec![0.79, 0.21], 6e4, 5e4, 0.010, 0.8).unwrap();
        let l = [true, false];
        assert!(bip_indicator(5e4 / 0.004, 3e4 / 0.004, &l, &strict));
        let l = [true, true];
        assert!(!bip_indicator(5e4 / 0.004, 6e4 / 0.004, &l, &strict));
        // dead links
        assert!(bip_indicator(0.0, 1e9, &all, &f));
        assert!(bip_indicator(1e9, 0.0, &all, &f));
    }

    #[test]
    fn indicator_quality_boundary_inclusive() {
        let f = VideoFrameModel::new(vec![0.8, 0.2], 1e3, 0.0, 1.0, 0.8).unwrap();
        assert!(!bip_indicator(1e9, 1e9, &[true, false], &f));
    }

    #[test]
    fn zero_variance_closed_forms() {
        let p = AwarenessProfile::noiseless(11.0);
        assert_eq!(bip_score_seeded(&[true; 50], &p, 1).unwrap(), 23.0);
        assert_eq!(bip_score_seeded(&[false; 50], &p, 1).unwrap(), 11.0);
        assert!(bip_score_seeded(&[], &p, 1).is_err());
    }

    #[test]
    fn monte_carlo_mean_within_three_standard_errors() {
        let p = AwarenessProfile::default();
        let omegas: Vec<bool> = (0..20).map(|t| t % 4 == 0).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let draws: Vec<f64> = (0..10_000).map(|_| bip_score(&omegas, &p, &mut rng).unwrap()).collect();
        let n = draws.len() as f64;
        let mean = draws.iter().sum::<f64>() / n;
        let var = draws.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let expected = p.expected_score(0.25);
        assert!((mean - expected).abs() <= 3.0 * (var / n).sqrt());
    }

    #[test]
    fn profile_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let f = VideoFrameModel::profile(10, 0.3, &mut rng, 1e6, 5e4, 0.01, 0.8).unwrap();
        assert_relative_eq!(f.importance().iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(f.importance().iter().all(|m| (0.0..=1.0).contains(m)));
        assert!(f.importance()[0] >= f.importance()[5]);
        assert!(VideoFrameModel::profile(10, 1.5, &mut rng, 1e6, 5e4, 0.01, 0.8).is_err());
    }

    proptest! {
        #[test]
        fn improving_a_rate_never_creates_bip(ul in 1e5f64..1e9, dl in 1e5f64..1e9, k in 1.0f64..10.0) {
            let f = frame(6);
            let slot = 0.02;
            let base = evaluate_slot(ul, dl, slot, &f).omega;
            if !base {
                prop_assert!(!evaluate_slot(ul * k, dl, slot, &f).omega);
                prop_assert!(!evaluate_slot(ul, dl * k, slot, &f).omega);
            }
        }

        #[test]
        fn score_increasing_in_bip_rate(g in -0.9f64..30.0, a in 0usize..20, b in 0usize..20) {
            prop_assume!(a < b);
            let p = AwarenessProfile::noiseless(g);
            let mk = |n: usize| (0..20).map(|t| t < n).collect::<Vec<_>>();
            let sa = bip_score_seeded(&mk(a), &p, 0).unwrap();
            let sb = bip_score_seeded(&mk(b), &p, 0).unwrap();
            prop_assert!(sb > sa);
        }

        #[test]
        fn delivered_payload_within_budget_plus_one_group(rate in 0.0f64..1e9) {
            let f = frame(7);
            let l = delivery_vector(rate, 0.02, &f);
            prop_assert!(f.payload_bits(&l) <= rate * 0.02 + f.group_bits() * (1.0 + 1e-9));
        }
    }
}
