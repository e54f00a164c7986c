//! Seeded synthetic ratings for experiments and benchmarks.
//!
//! The generator draws from a small latent-factor model (user and item
//! biases plus a two-dimensional taste match) with noise, clamps to the
//! usual 0.5..5 star range, and quantizes to half stars. Item popularity
//! follows a power law so the id space is unevenly covered, as in real
//! rating datasets.

use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use std::collections::HashSet;

use crate::data::RatingsDataset;
use crate::encoding::{bits_needed, ItemCodebook, UserCodebook};
use crate::error::{Error, Result};
use crate::fm::FmModel;
use crate::rng::{seeded_rng, PURPOSE_SYNTH};

/// Shape of a generated ratings table. `n_users` and `n_items` are pool
/// sizes; the dataset only contains the users and items actually drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_users: usize,
    pub n_items: usize,
    pub n_ratings: usize,
    /// Exponent of the item popularity power law; 0 samples uniformly.
    pub popularity_skew: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_users: 400,
            n_items: 6000,
            n_ratings: 5000,
            popularity_skew: 0.8,
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_users == 0 || self.n_items == 0 {
            return Err(Error::Empty { what: "pools" });
        }
        if self.n_ratings == 0 {
            return Err(Error::Empty { what: "ratings" });
        }
        if self.n_ratings > self.n_users * self.n_items {
            return Err(Error::InvalidConfig(format!(
                "cannot place {} distinct ratings in a {} x {} pool",
                self.n_ratings, self.n_users, self.n_items
            )));
        }
        if !self.popularity_skew.is_finite() || self.popularity_skew < 0.0 {
            return Err(Error::InvalidConfig(
                "popularity skew must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// Generates a ratings table with one row per distinct (user, item) pair.
/// Raw ids are 1-based pool positions; the same configuration always
/// yields the same table.
pub fn generate_ratings(config: &SynthConfig) -> Result<RatingsDataset> {
    config.validate()?;
    let mut rng = seeded_rng(config.seed, PURPOSE_SYNTH, 0);

    let bias = Normal::new(0.0, 0.5).expect("valid stddev");
    let taste = Normal::new(0.0, 0.55).expect("valid stddev");
    let noise = Normal::new(0.0, 0.3).expect("valid stddev");

    let user_bias: Vec<f64> = (0..config.n_users).map(|_| bias.sample(&mut rng)).collect();
    let user_taste: Vec<[f64; 2]> = (0..config.n_users)
        .map(|_| [taste.sample(&mut rng), taste.sample(&mut rng)])
        .collect();
    let item_bias: Vec<f64> = (0..config.n_items).map(|_| bias.sample(&mut rng)).collect();
    let item_taste: Vec<[f64; 2]> = (0..config.n_items)
        .map(|_| [taste.sample(&mut rng), taste.sample(&mut rng)])
        .collect();

    let weights: Vec<f64> = (0..config.n_items)
        .map(|i| 1.0 / ((i + 1) as f64).powf(config.popularity_skew))
        .collect();
    let popularity = WeightedIndex::new(&weights)
        .map_err(|e| Error::InvalidConfig(format!("bad popularity weights: {e}")))?;

    let mut seen: HashSet<(usize, usize)> = HashSet::with_capacity(config.n_ratings);
    let mut triples = Vec::with_capacity(config.n_ratings);
    let mut attempts = 0usize;
    let max_attempts = config.n_ratings.saturating_mul(50).max(1000);
    while triples.len() < config.n_ratings {
        attempts += 1;
        if attempts > max_attempts {
            return Err(Error::InvalidConfig(format!(
                "gave up placing {} distinct ratings after {} draws; shrink the \
                 request or the popularity skew",
                config.n_ratings, attempts
            )));
        }
        let user = rng.random_range(0..config.n_users);
        let item = popularity.sample(&mut rng);
        if !seen.insert((user, item)) {
            continue;
        }
        let mut value = 3.6
            + user_bias[user]
            + item_bias[item]
            + user_taste[user][0] * item_taste[item][0]
            + user_taste[user][1] * item_taste[item][1]
            + noise.sample(&mut rng);
        value = (value.clamp(0.5, 5.0) * 2.0).round() / 2.0;
        triples.push((user as u64 + 1, item as u64 + 1, value));
    }
    RatingsDataset::from_raw_triples(triples)
}

/// A randomly initialized model with matching codebooks, sized for a given
/// catalog. Useful for timing experiments where the suggestion cost only
/// depends on the shapes involved, not on how the model was fit.
#[derive(Debug, Clone)]
pub struct SyntheticInstance {
    pub model: FmModel,
    pub users: UserCodebook,
    pub items: ItemCodebook,
}

pub fn synthetic_instance(
    n_users: usize,
    n_items: usize,
    latent_dim: usize,
    seed: u64,
) -> Result<SyntheticInstance> {
    if n_users == 0 || n_items == 0 {
        return Err(Error::Empty { what: "pools" });
    }
    if latent_dim == 0 {
        return Err(Error::InvalidConfig(
            "latent dimension must be at least 1".into(),
        ));
    }
    let mut rng = seeded_rng(seed, PURPOSE_SYNTH, 1);
    let user_bits = bits_needed(n_users);
    let item_bits = bits_needed(n_items);
    let d = user_bits + item_bits;
    let weight = Normal::new(0.0, 0.1).expect("valid stddev");
    let model = FmModel::from_parts(
        weight.sample(&mut rng),
        (0..d).map(|_| weight.sample(&mut rng)).collect(),
        (0..d * latent_dim).map(|_| weight.sample(&mut rng)).collect(),
        user_bits,
        item_bits,
        latent_dim,
    )?;
    let users = UserCodebook::build((1..=n_users as u64).collect())?;
    let mean_ratings: Vec<f64> = (0..n_items).map(|_| rng.random_range(0.5..5.0)).collect();
    let items = ItemCodebook::build((1..=n_items as u64).collect(), &mean_ratings)?;
    Ok(SyntheticInstance {
        model,
        users,
        items,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn generation_is_deterministic() {
        let config = SynthConfig {
            n_users: 30,
            n_items: 100,
            n_ratings: 400,
            ..SynthConfig::default()
        };
        let a = generate_ratings(&config).unwrap();
        let b = generate_ratings(&config).unwrap();
        assert_eq!(a.ratings(), b.ratings());
        assert_eq!(a.user_ids(), b.user_ids());
        assert_eq!(a.item_ids(), b.item_ids());
        let other = generate_ratings(&SynthConfig {
            seed: 43,
            ..config
        })
        .unwrap();
        assert_ne!(a.ratings(), other.ratings());
    }

    #[test]
    fn ratings_are_half_star_values_in_range() {
        let data = generate_ratings(&SynthConfig {
            n_users: 50,
            n_items: 200,
            n_ratings: 1000,
            ..SynthConfig::default()
        })
        .unwrap();
        assert_eq!(data.len(), 1000);
        for r in data.ratings() {
            assert!((0.5..=5.0).contains(&r.value), "{}", r.value);
            assert_eq!((r.value * 2.0).fract(), 0.0, "{}", r.value);
        }
    }

    #[test]
    fn pairs_are_distinct() {
        let data = generate_ratings(&SynthConfig {
            n_users: 20,
            n_items: 40,
            n_ratings: 600,
            ..SynthConfig::default()
        })
        .unwrap();
        let mut pairs = HashSet::new();
        for r in data.ratings() {
            assert!(pairs.insert((r.user, r.item)));
        }
    }

    #[test]
    fn popular_items_are_drawn_more_often() {
        let data = generate_ratings(&SynthConfig::default()).unwrap();
        let mut counts = vec![0u32; data.n_items()];
        for r in data.ratings() {
            counts[r.item as usize] += 1;
        }
        let first = data.item_ids().iter().position(|&id| id == 1).unwrap();
        let last_pool_id = data.item_ids().iter().copied().max().unwrap();
        let last = data
            .item_ids()
            .iter()
            .position(|&id| id == last_pool_id)
            .unwrap();
        assert!(counts[first] > counts[last]);
    }

    #[test]
    fn default_config_fills_a_twelve_bit_item_space() {
        let data = generate_ratings(&SynthConfig::default()).unwrap();
        assert_eq!(bits_needed(data.n_items()), 12, "{} items", data.n_items());
        assert_eq!(bits_needed(data.n_users()), 9, "{} users", data.n_users());
    }

    #[test]
    fn impossible_requests_are_rejected() {
        let config = SynthConfig {
            n_users: 2,
            n_items: 2,
            n_ratings: 5,
            ..SynthConfig::default()
        };
        assert!(generate_ratings(&config).is_err());
        assert!(generate_ratings(&SynthConfig {
            n_ratings: 0,
            ..SynthConfig::default()
        })
        .is_err());
    }

    #[test]
    fn instances_have_the_requested_shape() {
        let instance = synthetic_instance(100, 2000, 8, 7).unwrap();
        assert_eq!(instance.model.user_bits(), 7);
        assert_eq!(instance.model.item_bits(), 11);
        assert_eq!(instance.model.latent_dim(), 8);
        assert_eq!(instance.users.num_users(), 100);
        assert_eq!(instance.items.num_items(), 2000);
        assert!(instance.model.is_finite());
        let again = synthetic_instance(100, 2000, 8, 7).unwrap();
        assert_eq!(again.model.linear_weights(), instance.model.linear_weights());
    }
}
