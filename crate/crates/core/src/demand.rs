//! Synthetic traffic demand: a few large and medium flows per port laid out
//! as random fixed-point-free permutations, plus multiplicative noise on the
//! flows and small "mice" noise on a share of the empty VOQs.

use rand::seq::{index, SliceRandom};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DemandMatrix;

/// Share of each port's load that the flow permutations carry; the mice
/// noise is expected to bring the total back to about 1.
pub const FLOW_SCALE: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrafficGenConfig {
    pub n: usize,
    /// Large flows per row.
    pub n_large: usize,
    /// Medium flows per row.
    pub n_small: usize,
    /// Fraction of the row load carried by the large flows.
    pub c_large: f64,
    pub c_small: f64,
    pub enable_n1: bool,
    pub enable_n2: bool,
    pub n2_fraction: f64,
    pub n2_sigma: f64,
    pub n1_rel_sigma: f64,
    pub seed: u64,
}

impl Default for TrafficGenConfig {
    fn default() -> Self {
        TrafficGenConfig {
            n: 100,
            n_large: 4,
            n_small: 12,
            c_large: 0.7,
            c_small: 0.3,
            enable_n1: true,
            enable_n2: true,
            n2_fraction: 0.5,
            n2_sigma: 0.003,
            n1_rel_sigma: 0.2,
            seed: 0,
        }
    }
}

impl TrafficGenConfig {
    /// Default workload at size `n` with the given seed.
    pub fn with_size(n: usize, seed: u64) -> Self {
        TrafficGenConfig {
            n,
            seed,
            ..Default::default()
        }
    }

    pub fn without_noise(mut self) -> Self {
        self.enable_n1 = false;
        self.enable_n2 = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(Error::Config(msg));
        if self.n_large + self.n_small > self.n.saturating_sub(1) {
            return err(format!(
                "n_large + n_small = {} exceeds n - 1 = {}",
                self.n_large + self.n_small,
                self.n.saturating_sub(1)
            ));
        }
        for (name, v) in [
            ("c_large", self.c_large),
            ("c_small", self.c_small),
            ("n2_fraction", self.n2_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return err(format!("{name} = {v} is outside [0, 1]"));
            }
        }
        if (self.c_large + self.c_small - 1.0).abs() > 1e-9 {
            return err(format!(
                "c_large + c_small = {} must equal 1",
                self.c_large + self.c_small
            ));
        }
        if self.n_large == 0 && self.c_large > 0.0 {
            return err("c_large > 0 requires n_large >= 1".into());
        }
        if self.n_small == 0 && self.c_small > 0.0 {
            return err("c_small > 0 requires n_small >= 1".into());
        }
        if !(self.n2_sigma >= 0.0 && self.n2_sigma.is_finite()) {
            return err(format!("n2_sigma = {} must be >= 0", self.n2_sigma));
        }
        if !(self.n1_rel_sigma >= 0.0 && self.n1_rel_sigma.is_finite()) {
            return err(format!("n1_rel_sigma = {} must be >= 0", self.n1_rel_sigma));
        }
        Ok(())
    }
}

/// Uniformly random permutation of `0..n` without fixed points (rejection sampling).
fn random_derangement(n: usize, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let mut perm: Vec<usize> = (0..n).collect();
    loop {
        perm.shuffle(rng);
        if perm.iter().enumerate().all(|(i, &p)| i != p) {
            return perm;
        }
    }
}

/// Draws a demand matrix. A pure function of `cfg`: equal seeds give bit-identical output.
pub fn generate_demand(cfg: &TrafficGenConfig) -> Result<DemandMatrix> {
    cfg.validate()?;
    let n = cfg.n;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut d = DemandMatrix::zeros(n);

    let flows = [(cfg.n_large, cfg.c_large), (cfg.n_small, cfg.c_small)];
    for (count, share) in flows {
        if count == 0 {
            continue;
        }
        let value = FLOW_SCALE * share / count as f64;
        for _ in 0..count {
            for (i, j) in random_derangement(n, &mut rng).into_iter().enumerate() {
                d.add(i, j, value);
            }
        }
    }

    if cfg.enable_n1 && cfg.n1_rel_sigma > 0.0 {
        let unit = Normal::new(0.0, 1.0).unwrap();
        for i in 0..n {
            for j in 0..n {
                let x = d.get(i, j);
                if x > 0.0 {
                    let noisy = x + cfg.n1_rel_sigma * x * unit.sample(&mut rng);
                    d.set(i, j, noisy.max(0.0));
                }
            }
        }
    }

    if cfg.enable_n2 && cfg.n2_sigma > 0.0 && cfg.n2_fraction > 0.0 {
        let zeros: Vec<(usize, usize)> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j && d.get(i, j) == 0.0)
            .collect();
        let k = (cfg.n2_fraction * zeros.len() as f64).round() as usize;
        let mut picked = index::sample(&mut rng, zeros.len(), k).into_vec();
        picked.sort_unstable();
        let mice = Normal::new(0.0, cfg.n2_sigma).unwrap();
        for idx in picked {
            let (i, j) = zeros[idx];
            d.set(i, j, mice.sample(&mut rng).abs());
        }
    }

    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::max_load;

    #[test]
    fn single_permutation_degenerate_case() {
        let cfg = TrafficGenConfig {
            n: 4,
            n_large: 1,
            n_small: 0,
            c_large: 1.0,
            c_small: 0.0,
            ..TrafficGenConfig::with_size(4, 7)
        }
        .without_noise();
        let d = generate_demand(&cfg).unwrap();
        for i in 0..4 {
            let nonzero: Vec<f64> = d.row(i).iter().copied().filter(|&x| x > 0.0).collect();
            assert_eq!(nonzero, vec![0.9]);
            assert_eq!(d.get(i, i), 0.0);
            assert_eq!(d.col_sum(i), 0.9);
        }
        assert_eq!(max_load(&d), 0.9);
    }

    #[test]
    fn noiseless_entries_are_sums_of_flow_values() {
        let cfg = TrafficGenConfig::with_size(100, 3).without_noise();
        let d = generate_demand(&cfg).unwrap();
        let (large, small) = (0.9 * 0.7 / 4.0, 0.9 * 0.3 / 12.0);
        assert!((large - 0.1575_f64).abs() < 1e-15 && (small - 0.0225_f64).abs() < 1e-15);
        for (_, _, x) in d.positive_entries() {
            // x = a*large + b*small for small nonnegative integers a <= 4, b <= 12
            let found = (0..=4).any(|a| {
                (0..=12).any(|b| (a + b > 0) && (x - (a as f64 * large + b as f64 * small)).abs() < 1e-12)
            });
            assert!(found, "entry {x} is not a flow-value combination");
        }
        for i in 0..100 {
            assert!((d.row_sum(i) - 0.9).abs() < 1e-12);
            assert!((d.col_sum(i) - 0.9).abs() < 1e-12);
            assert_eq!(d.get(i, i), 0.0);
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let cfg = TrafficGenConfig::with_size(32, 99);
        assert_eq!(generate_demand(&cfg).unwrap(), generate_demand(&cfg).unwrap());
        let other = TrafficGenConfig::with_size(32, 100);
        assert_ne!(generate_demand(&cfg).unwrap(), generate_demand(&other).unwrap());
    }

    #[test]
    fn noisy_matrix_is_nonnegative_with_zero_diagonal() {
        let cfg = TrafficGenConfig {
            n1_rel_sigma: 2.0,
            ..TrafficGenConfig::with_size(40, 5)
        };
        let d = generate_demand(&cfg).unwrap();
        assert!(d.is_nonnegative());
        assert!((0..40).all(|i| d.get(i, i) == 0.0));
    }

    #[test]
    fn mice_noise_hits_requested_share_of_zero_entries() {
        let mut cfg = TrafficGenConfig::with_size(50, 11);
        cfg.enable_n1 = false;
        let clean = generate_demand(&cfg.clone().without_noise()).unwrap();
        let noisy = generate_demand(&cfg).unwrap();
        let zeros = (0..50)
            .flat_map(|i| (0..50).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j && clean.get(i, j) == 0.0)
            .count();
        let filled = (0..50)
            .flat_map(|i| (0..50).map(move |j| (i, j)))
            .filter(|&(i, j)| clean.get(i, j) == 0.0 && noisy.get(i, j) > 0.0)
            .count();
        assert_eq!(filled, (0.5 * zeros as f64).round() as usize);
    }

    #[test]
    fn rejects_invalid_configs() {
        let too_many = TrafficGenConfig {
            n: 10,
            n_large: 4,
            n_small: 6,
            ..Default::default()
        };
        assert!(matches!(generate_demand(&too_many), Err(Error::Config(_))));
        let bad_split = TrafficGenConfig {
            c_large: 0.8,
            ..Default::default()
        };
        assert!(matches!(generate_demand(&bad_split), Err(Error::Config(_))));
        let bad_fraction = TrafficGenConfig {
            n2_fraction: 1.5,
            ..Default::default()
        };
        assert!(matches!(generate_demand(&bad_fraction), Err(Error::Config(_))));
    }
}
