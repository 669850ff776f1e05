//! Named random substreams derived from a single root seed.
//!
//! Every stochastic component draws from its own ChaCha stream so that
//! changing one experiment knob (say, the number of slots per period) does
//! not shift the randomness consumed by unrelated components.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The independent randomness consumers of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Substream {
    ChannelStates,
    Rates,
    Contention,
    Timers,
    CandidateSelection,
    /// Mixed-strategy channel draws in the learning mechanism.
    ChannelChoice,
    /// Accept/reject coin of the mobility chain.
    Acceptance,
    /// Scenario generators.
    Generator,
    /// Better-response schedules and other test-harness randomness.
    Schedule,
}

impl Substream {
    fn id(self) -> u64 {
        match self {
            Substream::ChannelStates => 1,
            Substream::Rates => 2,
            Substream::Contention => 3,
            Substream::Timers => 4,
            Substream::CandidateSelection => 5,
            Substream::ChannelChoice => 6,
            Substream::Acceptance => 7,
            Substream::Generator => 8,
            Substream::Schedule => 9,
        }
    }
}

/// Root seed from which all substreams of one run are split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SeedRoot(pub u64);

impl SeedRoot {
    pub fn stream(self, which: Substream) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.0);
        rng.set_stream(which.id());
        rng
    }

    /// Derives a child root, e.g. for the `k`-th nested learning run inside
    /// a joint simulation.
    pub fn child(self, k: u64) -> SeedRoot {
        // splitmix64 finalizer over (seed, k)
        let mut z = self.0 ^ k.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        SeedRoot(z ^ (z >> 31))
    }
}
