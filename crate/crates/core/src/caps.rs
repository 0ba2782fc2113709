//! Resource caps guarding enumeration-heavy operations.

/// Limits applied to ball enumeration, exhaustive search and schedule
/// arithmetic.  Defaults are sized for desk-scale experiments; the CLI can
/// override them from environment variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Caps {
    /// Maximum number of group elements enumerated in a single word ball.
    pub max_ball_elements: u64,
    /// Maximum ground-set size accepted by exhaustive cover search.
    pub brute_force_points: u64,
    /// Bit width past which schedule bounds saturate instead of growing.
    pub schedule_bits: u64,
    /// Maximum number of candidate scales scanned when searching for a
    /// doubling scale.
    pub doubling_scan: u64,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            max_ball_elements: 1_000_000,
            brute_force_points: 14,
            schedule_bits: 4096,
            doubling_scan: 100_000,
        }
    }
}

impl Caps {
    /// Read overrides from `DADIM_MAX_BALL`, `DADIM_BRUTE_POINTS`,
    /// `DADIM_SCHEDULE_BITS` and `DADIM_DOUBLING_SCAN`.
    pub fn from_env() -> Self {
        let mut caps = Caps::default();
        let read = |name: &str| std::env::var(name).ok().and_then(|v| v.parse::<u64>().ok());
        if let Some(v) = read("DADIM_MAX_BALL") {
            caps.max_ball_elements = v;
        }
        if let Some(v) = read("DADIM_BRUTE_POINTS") {
            caps.brute_force_points = v;
        }
        if let Some(v) = read("DADIM_SCHEDULE_BITS") {
            caps.schedule_bits = v;
        }
        if let Some(v) = read("DADIM_DOUBLING_SCAN") {
            caps.doubling_scan = v;
        }
        caps
    }
}
