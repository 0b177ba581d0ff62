//! Deterministic random number generation.
//!
//! Two flavors, both stable across platforms and runs:
//!
//! - [`keyed_unit`] is a counter-based generator: the draw for
//!   `(seed, label, index)` is a pure function of its key, so per-element
//!   randomness (e.g. stochastic delta dropping) is independent of
//!   iteration order and parallel schedule.
//! - [`DeterministicRng`] is a sequential stream for simulations, with
//!   uniform, exponential, and lognormal sampling built on splitmix64.

/// splitmix64 finalizer; a full-period mixing of a 64-bit state.
pub(crate) fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

pub(crate) fn to_unit(x: u64) -> f64 {
    // 53 mantissa bits -> uniform in [0, 1)
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform draw in `[0, 1)` keyed on `(seed, label, index)`.
pub fn keyed_unit(seed: u64, label: &str, index: u64) -> f64 {
    let key = splitmix64(seed)
        ^ fnv1a(label.as_bytes()).rotate_left(17)
        ^ splitmix64(index.wrapping_mul(0xa076_1d64_78bd_642f));
    to_unit(splitmix64(key))
}

/// Deterministic 64-bit hash keyed on `(seed, label, index)`.
pub fn keyed_u64(seed: u64, label: &str, index: u64) -> u64 {
    let key = splitmix64(seed)
        ^ fnv1a(label.as_bytes()).rotate_left(17)
        ^ splitmix64(index.wrapping_mul(0xa076_1d64_78bd_642f));
    splitmix64(key)
}

/// Sequential deterministic RNG stream.
#[derive(Debug, Clone)]
pub struct DeterministicRng {
    state: u64,
}

impl DeterministicRng {
    pub fn new(seed: u64) -> Self {
        Self {
            state: splitmix64(seed ^ 0x6a09_e667_f3bc_c909),
        }
    }

    /// Derive an independent stream labeled by `label`.
    pub fn fork(&self, label: &str) -> Self {
        Self {
            state: splitmix64(self.state ^ fnv1a(label.as_bytes())),
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        splitmix64(self.state)
    }

    /// Uniform in `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        to_unit(self.next_u64())
    }

    /// Uniform integer in `[0, bound)`.
    pub fn below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0);
        self.next_u64() % bound
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    /// Exponential with the given mean (> 0).
    pub fn exponential(&mut self, mean: f64) -> f64 {
        let u = 1.0 - self.unit(); // (0, 1]
        -mean * u.ln()
    }

    /// Standard normal via Box-Muller.
    pub fn standard_normal(&mut self) -> f64 {
        let u1 = 1.0 - self.unit();
        let u2 = self.unit();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Lognormal with log-space parameters `mu`, `sigma`.
    pub fn lognormal(&mut self, mu: f64, sigma: f64) -> f64 {
        (mu + sigma * self.standard_normal()).exp()
    }
}
