//! Counter-based random streams: every trial, repeatability run, and
//! shuffle draws from its own ChaCha stream derived from (master seed,
//! stream id), so results are reproducible regardless of how work is
//! scheduled across threads.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Namespaces for stream ids so different parts of a run never collide.
#[derive(Clone, Copy, Debug)]
pub enum StreamDomain {
    /// One stream per (context, trial index).
    Trial { context: u8, trial_index: u64 },
    /// One stream per (observable, run index) of the repeatability test.
    Repeatability { observable: u8, run_index: u64 },
    /// Context interleaving shuffle.
    ContextOrder,
    /// Bootstrap resampling.
    Bootstrap { resample_index: u64 },
}

impl StreamDomain {
    pub fn stream_id(self) -> u64 {
        // Layout: [domain tag: 8 bits][sub id: 8 bits][index: 48 bits].
        match self {
            StreamDomain::Trial {
                context,
                trial_index,
            } => (1u64 << 56) | ((context as u64) << 48) | (trial_index & MASK48),
            StreamDomain::Repeatability {
                observable,
                run_index,
            } => (2u64 << 56) | ((observable as u64) << 48) | (run_index & MASK48),
            StreamDomain::ContextOrder => 3u64 << 56,
            StreamDomain::Bootstrap { resample_index } => (4u64 << 56) | (resample_index & MASK48),
        }
    }
}

const MASK48: u64 = (1 << 48) - 1;

/// Independent generator for one stream of a master seed.
pub fn stream_rng(master_seed: u64, domain: StreamDomain) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream(domain.stream_id());
    rng
}
