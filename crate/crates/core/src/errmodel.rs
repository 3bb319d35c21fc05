//! Stochastic read-disturbance bitflip process under single-error-correcting ECC.
//!
//! A set `L` of possible bitflip locations grows by `delta_l` uniformly random
//! addresses every `growth_period` epochs (starting at epoch 0). Every epoch,
//! `n` distinct locations are drawn from `L` and flip. Flips accumulate per
//! ECC codeword until the next scrub; two distinct flipped addresses in one
//! codeword inside a scrub window are uncorrectable.

use rand::seq::index;
use rand::Rng;
use rustc_hash::{FxHashMap, FxHashSet};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_FLIP_SPACE_BITS: u64 = 4096 * 65_536;

fn default_period() -> u64 {
    1000
}
fn default_flip_space() -> u64 {
    DEFAULT_FLIP_SPACE_BITS
}
fn default_data_bits() -> u64 {
    128
}
fn default_total_bits() -> u64 {
    136
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelParams {
    /// ΔL: locations added to `L` per growth period.
    pub delta_l: u64,
    /// N: locations flipped per epoch.
    pub n: u64,
    #[serde(default = "default_period")]
    pub growth_period: u64,
    #[serde(default = "default_period")]
    pub scrub_interval: u64,
    #[serde(default = "default_flip_space")]
    pub flip_space_bits: u64,
    #[serde(default = "default_data_bits")]
    pub codeword_data_bits: u64,
    #[serde(default = "default_total_bits")]
    pub codeword_total_bits: u64,
    /// Locations detected at a scrub leave `L`.
    #[serde(default)]
    pub removal_enabled: bool,
    /// With removal enabled, remove locations as soon as they flip instead of
    /// at the next scrub.
    #[serde(default)]
    pub immediate_removal: bool,
}

impl ModelParams {
    pub fn new(delta_l: u64, n: u64) -> Self {
        Self {
            delta_l,
            n,
            growth_period: default_period(),
            scrub_interval: default_period(),
            flip_space_bits: DEFAULT_FLIP_SPACE_BITS,
            codeword_data_bits: default_data_bits(),
            codeword_total_bits: default_total_bits(),
            removal_enabled: false,
            immediate_removal: false,
        }
    }

    pub fn with_removal(mut self, enabled: bool) -> Self {
        self.removal_enabled = enabled;
        self
    }

    pub fn with_flip_space(mut self, bits: u64) -> Self {
        self.flip_space_bits = bits;
        self
    }

    pub fn with_scrub_interval(mut self, epochs: u64) -> Self {
        self.scrub_interval = epochs;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParams(m));
        if self.delta_l == 0 {
            return bad("delta_l must be >= 1".into());
        }
        if self.n == 0 {
            return bad("n must be >= 1".into());
        }
        if self.growth_period == 0 {
            return bad("growth_period must be >= 1".into());
        }
        if self.scrub_interval == 0 {
            return bad("scrub_interval must be >= 1".into());
        }
        if self.codeword_data_bits == 0 || self.codeword_total_bits < self.codeword_data_bits {
            return bad("need 0 < codeword_data_bits <= codeword_total_bits".into());
        }
        if self.flip_space_bits == 0 || !self.flip_space_bits.is_multiple_of(self.codeword_data_bits) {
            return bad(format!(
                "flip_space_bits {} must be a positive multiple of codeword_data_bits {}",
                self.flip_space_bits, self.codeword_data_bits
            ));
        }
        if self.immediate_removal && !self.removal_enabled {
            return bad("immediate_removal requires removal_enabled".into());
        }
        Ok(())
    }

    pub fn codewords(&self) -> u64 {
        self.flip_space_bits / self.codeword_data_bits
    }

    /// Growth happens only on scrub boundaries.
    pub fn growth_aligned(&self) -> bool {
        self.growth_period.is_multiple_of(self.scrub_interval)
    }

    /// |L| after the growth at the start of window `w`, without removal.
    pub fn locations_in_window(&self, w: u64) -> u64 {
        let grown = 1 + (w * self.scrub_interval) / self.growth_period;
        (self.delta_l.saturating_mul(grown)).min(self.flip_space_bits)
    }
}

/// Maps a data-bit address onto its codeword. Parity bits are not part of the
/// flip space.
pub fn location_to_codeword(bit_address: u64, params: &ModelParams) -> Result<u64> {
    if bit_address >= params.flip_space_bits {
        return Err(Error::AddressOutOfRange {
            address: bit_address,
            space: params.flip_space_bits,
        });
    }
    Ok(bit_address / params.codeword_data_bits)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UncorrectableEvent {
    /// Epochs elapsed when the failure appeared (1 = during the first epoch).
    pub epoch: u64,
    pub codeword: u64,
    pub addresses: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct ModelState {
    epoch: u64,
    next_growth: u64,
    locations: Vec<u64>,
    position: FxHashMap<u64, usize>,
    members: FxHashMap<u64, u32>,
    risky: usize,
    /// First flipped address per codeword in the current window.
    window: FxHashMap<u64, u64>,
    window_addresses: Vec<u64>,
    window_seen: FxHashSet<u64>,
    failed: Option<UncorrectableEvent>,
}

impl ModelState {
    /// Empty state at epoch 0; the first step adds the initial ΔL locations.
    pub fn new() -> Self {
        Self {
            epoch: 0,
            next_growth: 0,
            locations: Vec::new(),
            position: FxHashMap::default(),
            members: FxHashMap::default(),
            risky: 0,
            window: FxHashMap::default(),
            window_addresses: Vec::new(),
            window_seen: FxHashSet::default(),
            failed: None,
        }
    }

    /// State at `epoch` as produced by a removal-free run: `L` holds every
    /// growth batch due strictly before `epoch`, drawn fresh.
    pub fn starting_at<R: Rng + ?Sized>(params: &ModelParams, epoch: u64, rng: &mut R) -> Self {
        let mut s = Self::new();
        let batches = epoch.div_ceil(params.growth_period);
        s.next_growth = batches * params.growth_period;
        s.epoch = epoch;
        let target = (params.delta_l.saturating_mul(batches)).min(params.flip_space_bits);
        s.add_fresh(params, target, rng);
        s
    }

    /// State with an explicit location set and no scheduled growth before
    /// `next_growth`.
    pub fn with_locations(params: &ModelParams, locations: &[u64], next_growth: u64) -> Result<Self> {
        let mut s = Self::new();
        s.next_growth = next_growth;
        for &a in locations {
            location_to_codeword(a, params)?;
            if !s.position.contains_key(&a) {
                s.insert(a, params);
            }
        }
        Ok(s)
    }

    pub fn epoch(&self) -> u64 {
        self.epoch
    }

    pub fn failed(&self) -> bool {
        self.failed.is_some()
    }

    pub fn event(&self) -> Option<&UncorrectableEvent> {
        self.failed.as_ref()
    }

    pub fn locations(&self) -> &[u64] {
        &self.locations
    }

    /// Codewords holding two or more members of `L`.
    pub fn risky_codewords(&self) -> usize {
        self.risky
    }

    /// Distinct flipped addresses per codeword in the current scrub window.
    pub fn window_flips(&self, params: &ModelParams) -> FxHashMap<u64, Vec<u64>> {
        let mut out: FxHashMap<u64, Vec<u64>> = FxHashMap::default();
        for &a in &self.window_addresses {
            out.entry(a / params.codeword_data_bits).or_default().push(a);
        }
        out
    }

    pub fn window_flip_count(&self) -> usize {
        self.window_addresses.len()
    }

    /// Applies every growth batch that is due at or before the current epoch.
    pub fn grow_if_due<R: Rng + ?Sized>(&mut self, params: &ModelParams, rng: &mut R) {
        while self.next_growth <= self.epoch {
            let target = (self.locations.len() as u64 + params.delta_l).min(params.flip_space_bits);
            self.add_fresh(params, target, rng);
            self.next_growth += params.growth_period;
        }
    }

    /// Advances one epoch. Returns the event if this epoch caused the failure.
    /// A failed state is left unchanged.
    pub fn step_epoch<R: Rng + ?Sized>(&mut self, params: &ModelParams, rng: &mut R) -> Option<UncorrectableEvent> {
        if self.failed.is_some() {
            return None;
        }
        self.grow_if_due(params, rng);
        let k = self.locations.len();
        let m = (params.n as usize).min(k);
        self.epoch += 1;
        if m == 0 {
            return None;
        }
        let drawn: Vec<u64> = index::sample(rng, k, m)
            .into_iter()
            .map(|i| self.locations[i])
            .collect();
        for &addr in &drawn {
            if !self.window_seen.insert(addr) {
                continue;
            }
            self.window_addresses.push(addr);
            let cw = addr / params.codeword_data_bits;
            match self.window.get(&cw) {
                None => {
                    self.window.insert(cw, addr);
                }
                Some(&first) if self.failed.is_none() => {
                    let mut addresses = vec![first, addr];
                    addresses.sort_unstable();
                    self.failed = Some(UncorrectableEvent {
                        epoch: self.epoch,
                        codeword: cw,
                        addresses,
                    });
                }
                Some(_) => {}
            }
        }
        if params.removal_enabled && params.immediate_removal {
            for addr in drawn {
                self.remove(addr, params);
            }
        }
        self.failed.clone()
    }

    /// End-of-window scrub: corrects and reports everything flipped in the
    /// window. With removal enabled the detected addresses leave `L`.
    pub fn scrub(&mut self, params: &ModelParams) -> Vec<u64> {
        let mut detected = std::mem::take(&mut self.window_addresses);
        self.window.clear();
        self.window_seen.clear();
        if params.removal_enabled && !params.immediate_removal {
            for &a in &detected {
                self.remove(a, params);
            }
        }
        detected.sort_unstable();
        detected
    }

    fn add_fresh<R: Rng + ?Sized>(&mut self, params: &ModelParams, target: u64, rng: &mut R) {
        while (self.locations.len() as u64) < target {
            let a = rng.random_range(0..params.flip_space_bits);
            if !self.position.contains_key(&a) {
                self.insert(a, params);
            }
        }
    }

    fn insert(&mut self, addr: u64, params: &ModelParams) {
        self.position.insert(addr, self.locations.len());
        self.locations.push(addr);
        let c = self.members.entry(addr / params.codeword_data_bits).or_default();
        *c += 1;
        if *c == 2 {
            self.risky += 1;
        }
    }

    fn remove(&mut self, addr: u64, params: &ModelParams) {
        let Some(pos) = self.position.remove(&addr) else { return };
        self.locations.swap_remove(pos);
        if let Some(&moved) = self.locations.get(pos) {
            self.position.insert(moved, pos);
        }
        let cw = addr / params.codeword_data_bits;
        if let Some(c) = self.members.get_mut(&cw) {
            if *c == 2 {
                self.risky -= 1;
            }
            *c -= 1;
            if *c == 0 {
                self.members.remove(&cw);
            }
        }
    }
}

impl Default for ModelState {
    fn default() -> Self {
        Self::new()
    }
}

/// How a trial advances through time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stepping {
    /// Every epoch is stepped.
    Literal,
    /// Windows in which nothing observable can happen are skipped. Same
    /// distribution as `Literal`, different random stream.
    #[default]
    Accelerated,
}

/// Runs one trial until the first uncorrectable error or `horizon` epochs.
pub fn run_trial<R: Rng + ?Sized>(
    params: &ModelParams,
    horizon: u64,
    rng: &mut R,
    stepping: Stepping,
) -> Option<UncorrectableEvent> {
    let s = params.scrub_interval;
    let mut st = ModelState::new();
    let accelerated = stepping == Stepping::Accelerated && params.growth_aligned();
    let scrub_removal = params.removal_enabled && !params.immediate_removal;
    while st.epoch < horizon {
        if !accelerated || !st.epoch.is_multiple_of(s) {
            if let Some(ev) = st.step_epoch(params, rng) {
                return Some(ev);
            }
            if st.epoch.is_multiple_of(s) {
                st.scrub(params);
            }
            continue;
        }

        // Window start with growth on window boundaries only.
        st.grow_if_due(params, rng);
        let window_end = (st.epoch + s).min(horizon);
        if !params.removal_enabled && st.risky == 0 {
            // no codeword holds two locations: nothing can fail, nothing persists
            st.epoch = window_end;
        } else {
            while st.epoch < window_end {
                if let Some(ev) = st.step_epoch(params, rng) {
                    return Some(ev);
                }
                let settled = (scrub_removal && st.window_addresses.len() == st.locations.len())
                    || (params.immediate_removal && st.locations.is_empty());
                if settled {
                    st.epoch = window_end;
                }
            }
        }
        if st.epoch.is_multiple_of(s) {
            st.scrub(params);
        }
    }
    None
}

/// Simulates window `w` alone, starting from a freshly drawn `L` of the size a
/// removal-free run has at that window. Returns whether the window fails.
pub fn simulate_fresh_window<R: Rng + ?Sized>(params: &ModelParams, w: u64, rng: &mut R) -> bool {
    let start = w * params.scrub_interval;
    let mut st = ModelState::starting_at(params, start, rng);
    for _ in 0..params.scrub_interval {
        if st.step_epoch(params, rng).is_some() {
            return true;
        }
    }
    false
}
