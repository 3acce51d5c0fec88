//! Maximal-length pseudo-random binary sequences from a Fibonacci LFSR.

/// Feedback taps (1-based bit positions) of a primitive polynomial per order.
pub fn taps(order: u32) -> Option<&'static [u32]> {
    Some(match order {
        10 => &[10, 7],
        11 => &[11, 9],
        12 => &[12, 11, 10, 4],
        13 => &[13, 12, 11, 8],
        14 => &[14, 13, 12, 2],
        15 => &[15, 14],
        16 => &[16, 15, 13, 4],
        17 => &[17, 14],
        18 => &[18, 11],
        19 => &[19, 18, 17, 14],
        20 => &[20, 17],
        _ => return None,
    })
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

fn next_state(state: u64, order: u32, taps: &[u32]) -> u64 {
    let fb = taps
        .iter()
        .fold(0u64, |acc, &t| acc ^ (state >> (order - t)) & 1);
    (state >> 1) | (fb << (order - 1))
}

/// One full period of a maximal-length sequence, held `switch_period`
/// samples per chip and scaled to `+-amplitude`.
#[derive(Clone, Debug)]
pub struct Prbs {
    chips: Vec<bool>,
    amplitude: f64,
    switch_period: usize,
}

impl Prbs {
    /// Panics if `order` has no tap table entry (10..=20) or `switch_period == 0`.
    pub fn new(order: u32, amplitude: f64, switch_period: usize, seed: u64) -> Self {
        let taps = taps(order).expect("unsupported LFSR order");
        assert!(switch_period > 0);
        let mask = (1u64 << order) - 1;
        let mut state = splitmix64(seed) & mask;
        if state == 0 {
            state = 1;
        }
        let period = mask as usize;
        let mut chips = Vec::with_capacity(period);
        for _ in 0..period {
            chips.push(state & 1 == 1);
            state = next_state(state, order, taps);
        }
        Self {
            chips,
            amplitude,
            switch_period,
        }
    }

    /// Chips per period, `2^order - 1`.
    pub fn period(&self) -> usize {
        self.chips.len()
    }

    pub fn value(&self, t: usize) -> f64 {
        let chip = self.chips[(t / self.switch_period) % self.chips.len()];
        if chip {
            self.amplitude
        } else {
            -self.amplitude
        }
    }
}

/// Sample `t` of the order-15 sequence for `seed`. Builds the full period on
/// every call; hold a [`Prbs`] for repeated use.
pub fn prbs(amplitude: f64, switch_period: usize, seed: u64, t: usize) -> f64 {
    Prbs::new(15, amplitude, switch_period, seed).value(t)
}
