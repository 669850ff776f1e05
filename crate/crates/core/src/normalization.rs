//! Shared affine payoff map.
//!
//! The learning mechanism reinforces perceptions with estimated payoffs and
//! needs them positive, while log utilities are usually negative. One
//! strictly increasing affine map, common to all users, sends the utility
//! range `[lo, hi]` onto `[floor, 1]`. Because the map is shared and
//! increasing, best responses, Nash sets and the optimum's argmax are
//! unchanged.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::Scenario;

/// Default lower end of the normalized range.
pub const DEFAULT_FLOOR: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UtilityNormalization {
    pub lo: f64,
    pub hi: f64,
    pub floor: f64,
}

impl UtilityNormalization {
    pub fn new(lo: f64, hi: f64, floor: f64) -> Result<Self> {
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::Domain(format!(
                "normalization needs finite lo < hi, got [{lo}, {hi}]"
            )));
        }
        if !(floor > 0.0 && floor < 1.0) {
            return Err(Error::Domain(format!(
                "normalization floor must lie in (0, 1), got {floor}"
            )));
        }
        Ok(Self { lo, hi, floor })
    }

    /// The affine map itself, unclamped.
    #[inline]
    pub fn apply(&self, u: f64) -> f64 {
        self.floor + (1.0 - self.floor) * (u - self.lo) / (self.hi - self.lo)
    }

    /// The map clamped below at `floor`, for noisy estimates that can fall
    /// outside `[lo, hi]`.
    #[inline]
    pub fn apply_clamped(&self, u: f64) -> f64 {
        self.apply(u).max(self.floor)
    }

    /// Scale factor of the map (its derivative).
    pub fn slope(&self) -> f64 {
        (1.0 - self.floor) / (self.hi - self.lo)
    }

    /// Exact utility range over all channel profiles at the fixed location
    /// profile `locations`.
    ///
    /// A user's utility peaks when no neighbour shares its best channel
    /// (possible whenever there are two or more channels) and bottoms out
    /// when every neighbour piles onto its worst channel.
    pub fn exact_for_channels(s: &Scenario, locations: &[usize], floor: f64) -> Result<Self> {
        let n_ch = s.num_channels();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for n in 0..s.num_users() {
            let d = locations[n];
            let crowd: f64 = (0..s.num_users())
                .filter(|&i| s.interferes(n, i, d, locations[i]))
                .map(|i| s.log_idle(i))
                .sum();
            let bases = (0..n_ch).map(|m| s.log_base(n, m, d));
            let best = bases.clone().fold(f64::NEG_INFINITY, f64::max);
            let worst = bases.fold(f64::INFINITY, f64::min);
            lo = lo.min(worst + crowd);
            hi = hi.max(if n_ch >= 2 { best } else { best + crowd });
        }
        Self::widen(lo, hi, floor)
    }

    /// Exact utility range over every joint `(d, a)` profile.
    pub fn exact_for_joint(s: &Scenario, floor: f64) -> Result<Self> {
        let n_ch = s.num_channels();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for n in 0..s.num_users() {
            for &x in &s.users[n].allowed_locations {
                // Neighbours that can reach interference range of x, and
                // whether some neighbour is forced to interfere wherever it goes.
                let mut crowd = 0.0;
                let mut forced = 0.0;
                for i in (0..s.num_users()).filter(|&i| i != n) {
                    let allowed = &s.users[i].allowed_locations;
                    if allowed.iter().any(|&y| s.interferes(n, i, x, y)) {
                        crowd += s.log_idle(i);
                    }
                    if allowed.iter().all(|&y| s.interferes(n, i, x, y)) {
                        forced += s.log_idle(i);
                    }
                }
                for m in 0..n_ch {
                    let b = s.log_base(n, m, x);
                    lo = lo.min(b + crowd);
                    hi = hi.max(if n_ch >= 2 { b } else { b + forced });
                }
            }
        }
        Self::widen(lo, hi, floor)
    }

    /// Conservative closed-form range: `lo = min ln(θBp) + Σ_i ln(1 - p_i)`,
    /// `hi = max ln(θBp)`.
    pub fn analytic(s: &Scenario, floor: f64) -> Result<Self> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for n in 0..s.num_users() {
            for m in 0..s.num_channels() {
                for d in 0..s.num_locations() {
                    let b = s.log_base(n, m, d);
                    lo = lo.min(b);
                    hi = hi.max(b);
                }
            }
        }
        let crowd: f64 = (0..s.num_users()).map(|i| s.log_idle(i)).sum();
        Self::widen(lo + crowd, hi, floor)
    }

    /// Degenerate ranges (every utility equal) get unit width so the map
    /// stays well defined.
    fn widen(lo: f64, hi: f64, floor: f64) -> Result<Self> {
        if hi - lo < 1e-12 {
            Self::new(lo - 0.5, hi + 0.5, floor)
        } else {
            Self::new(lo, hi, floor)
        }
    }
}
