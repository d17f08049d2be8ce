//! The decision space of the allocation problem: per-station MLO
//! configurations, whole-network allocations and their arm encoding, the
//! stochastic bandit environment, and the exhaustive / greedy references.
//!
//! An arm is one complete allocation — one configuration per station. With
//! three bands and up to three links per station each station has seven
//! configurations (masks 001 through 111, arm labels 1 to 7), so a six
//! station network already has 7^6 = 117,649 arms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{sample_fading, PhyParams, Topology};
use crate::csma::{network_throughput, throughput_of_contenders, Contender};
use crate::error::{Error, Result};
use crate::seeding::derive_seed;

/// Default limit on the number of arms the exhaustive reference will scan.
pub const DEFAULT_ARM_CAP: u64 = 1_000_000;

/// How stations may combine links across bands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransmissionMode {
    /// One link on one channel at a time.
    Slo,
    /// Single links, or the designated bonded composite that occupies all
    /// channels as one back-off entity.
    Bonding,
    /// Independent simultaneous links, one per band.
    Str,
}

impl std::fmt::Display for TransmissionMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            TransmissionMode::Slo => write!(f, "slo"),
            TransmissionMode::Bonding => write!(f, "bonding"),
            TransmissionMode::Str => write!(f, "str"),
        }
    }
}

/// One station's MLO configuration: a non-empty bitmask over bands, bit 0
/// being the lowest band (2.4 GHz in the default plan). The mask value
/// doubles as the arm label, so (001) is arm 1 and (111) is arm 7.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MloConfig(u8);

impl MloConfig {
    pub fn from_mask(mask: u8, n_bands: usize) -> Result<Self> {
        if mask == 0 {
            return Err(Error::InvalidAllocation(
                "a configuration must activate at least one link".into(),
            ));
        }
        if usize::from(mask.ilog2() as u8) >= n_bands.min(8) || n_bands > 8 {
            return Err(Error::InvalidAllocation(format!(
                "mask {mask:#05b} does not fit {n_bands} bands"
            )));
        }
        Ok(Self(mask))
    }

    pub fn mask(&self) -> u8 {
        self.0
    }

    /// Number of links the configuration activates.
    pub fn links(&self) -> u32 {
        self.0.count_ones()
    }

    pub fn has_band(&self, band: usize) -> bool {
        band < 8 && self.0 >> band & 1 == 1
    }

    pub fn band_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..8).filter(|&b| self.has_band(b))
    }

    /// Human-facing arm label; equals the mask value.
    pub fn arm_label(&self) -> u8 {
        self.0
    }
}

/// Every feasible configuration for one station under a mode.
///
/// - STR: all non-empty masks with at most `l` links, ascending;
/// - SLO: the singletons;
/// - bonding: the singletons plus the all-bands composite.
pub fn config_space(mode: TransmissionMode, n_bands: usize, l: usize) -> Vec<MloConfig> {
    let full = (1u16 << n_bands) - 1;
    let masks: Vec<u8> = match mode {
        TransmissionMode::Str => (1..=full as u8)
            .filter(|m| (m.count_ones() as usize) <= l)
            .collect(),
        TransmissionMode::Slo => (0..n_bands).map(|b| 1u8 << b).collect(),
        TransmissionMode::Bonding => {
            let mut masks: Vec<u8> = (0..n_bands).map(|b| 1u8 << b).collect();
            if n_bands >= 2 {
                masks.push(full as u8);
            }
            masks
        }
    };
    masks
        .into_iter()
        .map(|m| MloConfig(m))
        .collect()
}

/// One configuration per station, in global station order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    pub configs: Vec<MloConfig>,
}

impl Allocation {
    pub fn new(configs: Vec<MloConfig>) -> Result<Self> {
        if configs.is_empty() {
            return Err(Error::InvalidAllocation("allocation covers zero stations".into()));
        }
        Ok(Self { configs })
    }

    /// Same configuration for every station.
    pub fn uniform(n_stas: usize, config: MloConfig) -> Self {
        Self { configs: vec![config; n_stas] }
    }

    /// The CSMA contenders this allocation puts on the air.
    pub fn contenders(&self, mode: TransmissionMode) -> Vec<Contender> {
        self.configs
            .iter()
            .enumerate()
            .flat_map(|(sta, cfg)| config_contenders(sta, *cfg, mode))
            .collect()
    }
}

/// Contenders of one station's configuration. Under bonding a multi-band
/// configuration transmits as one atomic unit; otherwise each set bit is an
/// independent link.
pub fn config_contenders(sta: usize, cfg: MloConfig, mode: TransmissionMode) -> Vec<Contender> {
    if mode == TransmissionMode::Bonding && cfg.links() > 1 {
        vec![Contender { sta, bands: cfg.mask() }]
    } else {
        cfg.band_indices()
            .map(|band| Contender { sta, bands: 1 << band })
            .collect()
    }
}

/// Reward of one environment pull.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PullSample {
    /// Normalised reward in [0, 1].
    pub reward: f64,
    /// Unnormalised network throughput in Mbps.
    pub raw_mbps: f64,
}

/// Stochastic bandit environment over allocations: a pull draws fresh
/// small-scale fading, evaluates the stationary network throughput, and
/// normalises it by a fixed analytic upper bound so rewards stay in [0, 1]
/// without changing the arm ordering.
#[derive(Debug, Clone)]
pub struct BanditEnv {
    pub topology: Topology,
    pub params: PhyParams,
    pub mode: TransmissionMode,
    pub config_space: Vec<MloConfig>,
    /// Fixed normaliser: stations x max links per configuration x top rate.
    pub reward_upper_bound: f64,
}

impl BanditEnv {
    pub fn new(
        topology: Topology,
        params: PhyParams,
        mode: TransmissionMode,
        l: usize,
    ) -> Result<Self> {
        topology.validate()?;
        params.validate()?;
        if l == 0 {
            return Err(Error::InvalidParams("link limit l must be at least 1".into()));
        }
        let space = config_space(mode, params.n_bands(), l);
        if space.is_empty() {
            return Err(Error::InvalidParams("empty configuration space".into()));
        }
        let l_eff = space.iter().map(|c| c.links()).max().unwrap() as f64;
        let bound = topology.n_stas() as f64 * l_eff * params.max_rate_mbps();
        Ok(Self {
            topology,
            params,
            mode,
            config_space: space,
            reward_upper_bound: bound,
        })
    }

    pub fn n_stas(&self) -> usize {
        self.topology.n_stas()
    }

    /// Total number of arms, `|configs|^N`.
    pub fn arm_count(&self) -> u128 {
        (self.config_space.len() as u128).pow(self.n_stas() as u32)
    }

    pub fn validate_allocation(&self, allocation: &Allocation) -> Result<()> {
        if allocation.configs.len() != self.n_stas() {
            return Err(Error::InvalidAllocation(format!(
                "allocation covers {} stations, topology has {}",
                allocation.configs.len(),
                self.n_stas()
            )));
        }
        for (sta, cfg) in allocation.configs.iter().enumerate() {
            if !self.config_space.contains(cfg) {
                return Err(Error::InvalidAllocation(format!(
                    "station {sta} uses mask {:#05b}, not in the {} space",
                    cfg.mask(),
                    self.mode
                )));
            }
        }
        Ok(())
    }

    /// Mixed-radix arm index of an allocation; station 0 is the least
    /// significant digit.
    pub fn arm_index(&self, allocation: &Allocation) -> Result<u128> {
        self.validate_allocation(allocation)?;
        let base = self.config_space.len() as u128;
        let mut index = 0u128;
        for cfg in allocation.configs.iter().rev() {
            let digit = self
                .config_space
                .iter()
                .position(|c| c == cfg)
                .expect("validated above") as u128;
            index = index * base + digit;
        }
        Ok(index)
    }

    /// Inverse of [`Self::arm_index`].
    pub fn decode(&self, index: u128) -> Result<Allocation> {
        if index >= self.arm_count() {
            return Err(Error::ArmIndexOutOfRange {
                index: index.min(u64::MAX as u128) as u64,
                arms: self.arm_count().min(u64::MAX as u128) as u64,
            });
        }
        let base = self.config_space.len() as u128;
        let mut rest = index;
        let configs = (0..self.n_stas())
            .map(|_| {
                let digit = (rest % base) as usize;
                rest /= base;
                self.config_space[digit]
            })
            .collect();
        Ok(Allocation { configs })
    }

    /// Allocation corresponding to per-station configuration indices.
    pub fn allocation_from_choices(&self, choices: &[usize]) -> Result<Allocation> {
        if choices.len() != self.n_stas() {
            return Err(Error::InvalidAllocation(format!(
                "{} choices for {} stations",
                choices.len(),
                self.n_stas()
            )));
        }
        let configs = choices
            .iter()
            .map(|&c| {
                self.config_space
                    .get(c)
                    .copied()
                    .ok_or_else(|| Error::InvalidAllocation(format!("choice {c} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Allocation { configs })
    }

    /// One stochastic reward: fresh fading, full throughput evaluation,
    /// normalisation clipped to [0, 1].
    pub fn pull(&self, allocation: &Allocation, rng: &mut ChaCha8Rng) -> Result<PullSample> {
        self.validate_allocation(allocation)?;
        let fading = sample_fading(&self.topology, &self.params, rng);
        let out = network_throughput(&self.topology, allocation, &fading, &self.params, self.mode)?;
        Ok(PullSample {
            reward: (out.total / self.reward_upper_bound).clamp(0.0, 1.0),
            raw_mbps: out.total,
        })
    }
}

/// One row of the exhaustive reference table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleRow {
    pub arm: u128,
    pub mean_mbps: f64,
    pub mean_reward: f64,
}

/// Output of the exhaustive scan: per-arm mean rewards and the best arm
/// under a lowest-index tie break.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleTable {
    pub rows: Vec<OracleRow>,
    pub best_arm: u128,
    pub best_mean_mbps: f64,
    pub best_mean_reward: f64,
    pub draws_per_arm: usize,
}

impl OracleTable {
    pub fn best_allocation(&self, env: &BanditEnv) -> Result<Allocation> {
        env.decode(self.best_arm)
    }
}

/// Scan every arm, averaging `draws_per_arm` independent fading draws per
/// arm. Each arm gets its own seed stream derived from `seed`, so the table
/// is deterministic and independent of scan order.
pub fn exhaustive_search(env: &BanditEnv, draws_per_arm: usize, seed: u64) -> Result<OracleTable> {
    exhaustive_search_with_cap(env, draws_per_arm, DEFAULT_ARM_CAP, seed)
}

pub fn exhaustive_search_with_cap(
    env: &BanditEnv,
    draws_per_arm: usize,
    cap: u64,
    seed: u64,
) -> Result<OracleTable> {
    let count = env.arm_count();
    if count > cap as u128 {
        return Err(Error::ArmSpaceOverflow {
            arms: count.min(u64::MAX as u128) as u64,
            cap,
        });
    }
    if draws_per_arm == 0 {
        return Err(Error::InvalidParams("draws_per_arm must be at least 1".into()));
    }
    let rows: Vec<OracleRow> = (0..count as u64)
        .into_par_iter()
        .map(|arm| {
            let allocation = env.decode(arm as u128)?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, arm));
            let mut mbps = 0.0;
            let mut reward = 0.0;
            for _ in 0..draws_per_arm {
                let sample = env.pull(&allocation, &mut rng)?;
                mbps += sample.raw_mbps;
                reward += sample.reward;
            }
            Ok(OracleRow {
                arm: arm as u128,
                mean_mbps: mbps / draws_per_arm as f64,
                mean_reward: reward / draws_per_arm as f64,
            })
        })
        .collect::<Result<_>>()?;

    let mut best = 0usize;
    for (i, row) in rows.iter().enumerate() {
        if row.mean_mbps > rows[best].mean_mbps {
            best = i;
        }
    }
    Ok(OracleTable {
        best_arm: rows[best].arm,
        best_mean_mbps: rows[best].mean_mbps,
        best_mean_reward: rows[best].mean_reward,
        rows,
        draws_per_arm,
    })
}

/// Greedy reference for arm spaces too large to scan: stations are assigned
/// in index order, each taking the configuration that maximises the mean
/// partial-network throughput given the stations fixed so far.
pub fn greedy_search(env: &BanditEnv, draws_per_step: usize, seed: u64) -> Result<(Allocation, f64)> {
    if draws_per_step == 0 {
        return Err(Error::InvalidParams("draws_per_step must be at least 1".into()));
    }
    let mut assigned: Vec<MloConfig> = Vec::with_capacity(env.n_stas());
    let mut last_best = 0.0;
    for sta in 0..env.n_stas() {
        let mut best: Option<(f64, MloConfig)> = None;
        for (ci, &cfg) in env.config_space.iter().enumerate() {
            let contenders: Vec<Contender> = assigned
                .iter()
                .chain(std::iter::once(&cfg))
                .enumerate()
                .flat_map(|(s, c)| config_contenders(s, *c, env.mode))
                .collect();
            let mut rng =
                ChaCha8Rng::seed_from_u64(derive_seed(seed, (sta * env.config_space.len() + ci) as u64));
            let mut mean = 0.0;
            for _ in 0..draws_per_step {
                let fading = sample_fading(&env.topology, &env.params, &mut rng);
                let out =
                    throughput_of_contenders(&env.topology, &contenders, &fading, &env.params)?;
                mean += out.total;
            }
            mean /= draws_per_step as f64;
            if best.map_or(true, |(b, _)| mean > b) {
                best = Some((mean, cfg));
            }
        }
        let (value, cfg) = best.expect("non-empty config space");
        assigned.push(cfg);
        last_best = value;
    }
    Ok((Allocation { configs: assigned }, last_best))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Point;

    fn toy_env() -> BanditEnv {
        // Two one-station cells on a line; close enough to conflict on the
        // low band. See the acceptance suite for the full PAC toy.
        let topology = Topology::new(
            vec![Point::new(10.0, 30.0), Point::new(40.0, 30.0)],
            vec![Point::new(32.5, 30.0), Point::new(38.0, 30.0)],
            vec![0, 1],
            0,
        )
        .unwrap();
        let mut params = PhyParams::default();
        params.bands = vec![2.4e9, 5.0e9];
        BanditEnv::new(topology, params, TransmissionMode::Slo, 1).unwrap()
    }

    #[test]
    fn config_space_counts_match_the_mode() {
        assert_eq!(config_space(TransmissionMode::Str, 3, 3).len(), 7);
        assert_eq!(config_space(TransmissionMode::Slo, 3, 3).len(), 3);
        assert_eq!(config_space(TransmissionMode::Bonding, 3, 3).len(), 4);
        // A binding link limit collapses STR to the singletons.
        let str1 = config_space(TransmissionMode::Str, 3, 1);
        assert_eq!(str1, config_space(TransmissionMode::Slo, 3, 3));
    }

    #[test]
    fn str_masks_are_the_seven_arm_labels_in_order() {
        let labels: Vec<u8> = config_space(TransmissionMode::Str, 3, 3)
            .iter()
            .map(|c| c.arm_label())
            .collect();
        assert_eq!(labels, vec![1, 2, 3, 4, 5, 6, 7]);
    }

    #[test]
    fn empty_masks_are_rejected() {
        assert!(MloConfig::from_mask(0, 3).is_err());
        assert!(MloConfig::from_mask(0b1000, 3).is_err());
    }

    #[test]
    fn arm_count_matches_the_dense_reference_network() {
        let topology = Topology::new(
            vec![Point::new(0.0, 0.0)],
            (0..6).map(|i| Point::new(i as f64, 0.0)).collect(),
            vec![0; 6],
            0,
        )
        .unwrap();
        let env =
            BanditEnv::new(topology, PhyParams::default(), TransmissionMode::Str, 3).unwrap();
        assert_eq!(env.arm_count(), 117_649);
    }

    #[test]
    fn arm_encoding_is_a_bijection() {
        let env = toy_env();
        assert_eq!(env.arm_count(), 4);

        let first = env.decode(0).unwrap();
        assert!(first.configs.iter().all(|c| *c == env.config_space[0]));

        for index in 0..env.arm_count() {
            let alloc = env.decode(index).unwrap();
            assert_eq!(env.arm_index(&alloc).unwrap(), index);
        }
        assert!(env.decode(env.arm_count()).is_err());
    }

    #[test]
    fn pulls_are_clipped_deterministic_and_power_sensitive() {
        let env = toy_env();
        let alloc = env.decode(1).unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = env.pull(&alloc, &mut rng).unwrap();
        assert!((0.0..=1.0).contains(&a.reward));

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = env.pull(&alloc, &mut rng).unwrap();
        assert_eq!(a, b);

        let mut dead = env.clone();
        dead.params.transmit_power_dbm = f64::NEG_INFINITY;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let z = dead.pull(&alloc, &mut rng).unwrap();
        assert_eq!(z.reward, 0.0);
        assert_eq!(z.raw_mbps, 0.0);
    }

    #[test]
    fn exhaustive_table_matches_an_independent_scan() {
        let env = toy_env();
        let table = exhaustive_search(&env, 32, 7).unwrap();

        // Re-derive every mean with a plain loop and pick the argmax by hand.
        let mut best_arm = 0u128;
        let mut best_mean = f64::NEG_INFINITY;
        for arm in 0..env.arm_count() {
            let alloc = env.decode(arm).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(7, arm as u64));
            let mut mean = 0.0;
            for _ in 0..32 {
                mean += env.pull(&alloc, &mut rng).unwrap().raw_mbps;
            }
            mean /= 32.0;
            assert_eq!(table.rows[arm as usize].mean_mbps, mean);
            if mean > best_mean {
                best_mean = mean;
                best_arm = arm;
            }
        }
        assert_eq!(table.best_arm, best_arm);
        assert!(table.best_mean_reward <= 1.0);
        for row in &table.rows {
            assert!(table.best_mean_mbps >= row.mean_mbps);
        }
    }

    #[test]
    fn greedy_search_returns_a_valid_allocation() {
        let env = toy_env();
        let (alloc, value) = greedy_search(&env, 16, 5).unwrap();
        env.validate_allocation(&alloc).unwrap();
        assert!(value > 0.0);

        // Greedy on a 4-arm space should land on the exhaustive optimum.
        let table = exhaustive_search(&env, 64, 11).unwrap();
        let best = table.best_allocation(&env).unwrap();
        let greedy_mean = table.rows
            [env.arm_index(&alloc).unwrap() as usize]
            .mean_mbps;
        let gap = (table.best_mean_mbps - greedy_mean) / table.best_mean_mbps;
        assert!(gap < 0.05, "greedy {alloc:?} vs best {best:?}, gap {gap}");
    }
}
