//! Solvers for the reduced suggestion problem.
//!
//! Three interchangeable backends produce ranked item suggestions for a
//! fixed user: scoring every catalog item directly with the model,
//! enumerating every item code exhaustively, and drawing low-energy states
//! from a simulated-annealing sampler whose knobs (shots, schedule,
//! thermalization times) mirror a quantum annealer client.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encoding::{encode_index, ItemCodebook};
use crate::error::{Error, Result};
use crate::fm::FmModel;
use crate::qubo::{bits_to_spins, qubo_to_ising, reduce_for_user, IsingProblem};
use crate::rng::{seeded_rng, PURPOSE_SA_SHOT};
use rand::Rng;

/// Largest variable count accepted by [`solve_exhaustive`].
pub const MAX_EXHAUSTIVE_VARS: usize = 25;

/// Schedule and sampling parameters for [`sample_sa`].
///
/// The inverse temperature ramps linearly from `beta_initial` to
/// `beta_final` over `sweeps` full passes; each of the `shots` independent
/// restarts draws its own stream from `seed`. The thermalization times are
/// recorded with the samples for parity with annealer clients but do not
/// change the computation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealConfig {
    pub shots: u64,
    pub sweeps: u64,
    pub beta_initial: f64,
    pub beta_final: f64,
    pub programming_thermalization_us: u64,
    pub readout_thermalization_us: u64,
    pub seed: u64,
}

impl Default for AnnealConfig {
    fn default() -> Self {
        AnnealConfig {
            shots: 100,
            sweeps: 1000,
            beta_initial: 0.1,
            beta_final: 10.0,
            programming_thermalization_us: 1000,
            readout_thermalization_us: 0,
            seed: 42,
        }
    }
}

impl AnnealConfig {
    /// Default configuration with the temperature range rescaled to the
    /// problem: both betas are divided by the largest coefficient
    /// magnitude, so acceptance behavior is invariant under scaling all
    /// fields and couplings by a constant.
    pub fn for_problem(ising: &IsingProblem) -> AnnealConfig {
        let scale = ising.max_abs_coefficient().max(1e-12);
        let mut config = AnnealConfig::default();
        config.beta_initial /= scale;
        config.beta_final /= scale;
        config
    }

    pub fn validate(&self) -> Result<()> {
        if self.shots == 0 {
            return Err(Error::InvalidConfig("shots must be at least 1".into()));
        }
        if self.sweeps == 0 {
            return Err(Error::InvalidConfig("sweeps must be at least 1".into()));
        }
        if !self.beta_initial.is_finite() || !self.beta_final.is_finite() {
            return Err(Error::InvalidConfig(
                "inverse temperatures must be finite".into(),
            ));
        }
        if self.beta_initial <= 0.0 {
            return Err(Error::InvalidConfig(
                "the initial inverse temperature must be positive".into(),
            ));
        }
        if self.beta_final < self.beta_initial {
            return Err(Error::InvalidConfig(
                "the final inverse temperature must not be below the initial one".into(),
            ));
        }
        Ok(())
    }
}

/// One distinct sampled state. `energy` includes the problem offset, so for
/// problems built by [`reduce_for_user`] it equals the negated predicted
/// rating of the state.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleRecord {
    pub bits: Vec<u8>,
    pub energy: f64,
    pub occurrences: u64,
}

/// Aggregated output of a sampler: distinct states sorted by ascending
/// energy, with ties in ascending binary value.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleSet {
    num_vars: usize,
    shots: u64,
    records: Vec<SampleRecord>,
    metadata: Vec<(String, String)>,
}

impl SampleSet {
    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    /// Total shots taken; the occurrences of all records sum to this.
    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn records(&self) -> &[SampleRecord] {
        &self.records
    }

    /// The lowest-energy record.
    pub fn best(&self) -> Option<&SampleRecord> {
        self.records.first()
    }

    pub fn metadata(&self) -> &[(String, String)] {
        &self.metadata
    }

    pub fn push_metadata(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.metadata.push((key.into(), value.into()));
    }

    /// Renders `# key value` metadata lines followed by a
    /// `state,energy,occurrences` table, states as bit strings.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# num_vars {}\n", self.num_vars));
        out.push_str(&format!("# shots {}\n", self.shots));
        for (key, value) in &self.metadata {
            out.push_str(&format!("# {key} {value}\n"));
        }
        out.push_str("state,energy,occurrences\n");
        for record in &self.records {
            let state: String = record
                .bits
                .iter()
                .map(|&b| char::from(b'0' + b))
                .collect();
            out.push_str(&format!("{state},{},{}\n", record.energy, record.occurrences));
        }
        out
    }

    pub fn write_csv_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv())
            .map_err(|e| Error::io(format!("write {}", path.display()), e))
    }
}

fn aggregate_states(
    ising: &IsingProblem,
    states: Vec<Vec<u8>>,
    shots: u64,
    metadata: Vec<(String, String)>,
) -> SampleSet {
    let mut counts: BTreeMap<Vec<u8>, u64> = BTreeMap::new();
    for state in states {
        *counts.entry(state).or_insert(0) += 1;
    }
    let mut records: Vec<SampleRecord> = counts
        .into_iter()
        .map(|(bits, occurrences)| {
            let spins = bits_to_spins(&bits).expect("sampled states are binary");
            let energy = ising.energy(&spins).expect("sampled states match the problem")
                + ising.offset();
            SampleRecord {
                bits,
                energy,
                occurrences,
            }
        })
        .collect();
    records.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    SampleSet {
        num_vars: ising.num_vars(),
        shots,
        records,
        metadata,
    }
}

/// Draws `config.shots` states from a simulated annealing run over the
/// problem. Each shot starts from a random spin assignment and performs
/// single-site Metropolis updates in a fixed site order, one pass per
/// sweep, while the inverse temperature ramps linearly. Results are
/// reproducible for a given configuration regardless of thread count.
pub fn sample_sa(ising: &IsingProblem, config: &AnnealConfig) -> Result<SampleSet> {
    config.validate()?;
    let n = ising.num_vars();
    if n == 0 {
        return Err(Error::Empty { what: "variables" });
    }
    let h = ising.fields();
    let dense = ising.dense_couplings();
    let betas: Vec<f64> = (0..config.sweeps)
        .map(|t| {
            if config.sweeps == 1 {
                config.beta_final
            } else {
                config.beta_initial
                    + (config.beta_final - config.beta_initial) * t as f64
                        / (config.sweeps - 1) as f64
            }
        })
        .collect();

    let run_shot = |shot: u64| -> Vec<u8> {
        let mut rng = seeded_rng(config.seed, PURPOSE_SA_SHOT, shot);
        let mut spins: Vec<i8> = (0..n)
            .map(|_| if rng.random_range(0..=1u8) == 1 { 1 } else { -1 })
            .collect();
        for &beta in &betas {
            for i in 0..n {
                let row = &dense[i * n..(i + 1) * n];
                let mut field = h[i];
                for (j, &w) in row.iter().enumerate() {
                    field += w * spins[j] as f64;
                }
                let delta_e = -2.0 * spins[i] as f64 * field;
                if delta_e <= 0.0 || rng.random::<f64>() < (-beta * delta_e).exp() {
                    spins[i] = -spins[i];
                }
            }
        }
        spins.iter().map(|&s| u8::from(s == 1)).collect()
    };

    let states: Vec<Vec<u8>> = (0..config.shots).into_par_iter().map(run_shot).collect();

    let metadata = vec![
        ("sampler".to_string(), "simulated-annealing".to_string()),
        ("sweeps".to_string(), config.sweeps.to_string()),
        ("beta_initial".to_string(), config.beta_initial.to_string()),
        ("beta_final".to_string(), config.beta_final.to_string()),
        (
            "programming_thermalization_us".to_string(),
            config.programming_thermalization_us.to_string(),
        ),
        (
            "readout_thermalization_us".to_string(),
            config.readout_thermalization_us.to_string(),
        ),
        ("seed".to_string(), config.seed.to_string()),
    ];
    Ok(aggregate_states(ising, states, config.shots, metadata))
}

/// Evaluates every assignment of the problem and returns all of them as a
/// sample set (each state once). Memory and time grow as `2^n`, so
/// problems above [`MAX_EXHAUSTIVE_VARS`] variables are rejected.
pub fn solve_exhaustive(ising: &IsingProblem) -> Result<SampleSet> {
    let n = ising.num_vars();
    if n == 0 {
        return Err(Error::Empty { what: "variables" });
    }
    if n > MAX_EXHAUSTIVE_VARS {
        return Err(Error::ProblemTooLarge {
            got: n,
            max: MAX_EXHAUSTIVE_VARS,
        });
    }
    let offset = ising.offset();
    let mut records = Vec::with_capacity(1usize << n);
    for value in 0..(1u64 << n) {
        let bits = encode_index(value as usize, n)?;
        let spins = bits_to_spins(&bits)?;
        let energy = ising.energy(&spins)? + offset;
        records.push(SampleRecord {
            bits,
            energy,
            occurrences: 1,
        });
    }
    records.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    Ok(SampleSet {
        num_vars: n,
        shots: 1u64 << n,
        records,
        metadata: vec![("sampler".to_string(), "exhaustive".to_string())],
    })
}

/// One ranked suggestion. `hits` counts the sampled states (or, for the
/// direct backend, the evaluated codes) that decoded to this item.
#[derive(Debug, Clone, PartialEq)]
pub struct Recommendation {
    pub item_index: usize,
    pub item_id: u64,
    pub rating: f64,
    pub hits: u64,
}

fn sort_recommendations(recommendations: &mut Vec<Recommendation>, k: usize) {
    recommendations.sort_by(|a, b| {
        b.rating
            .total_cmp(&a.rating)
            .then(a.item_index.cmp(&b.item_index))
    });
    recommendations.truncate(k);
}

fn check_suggestion_count(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidConfig(
            "suggestion count must be at least 1".into(),
        ));
    }
    Ok(())
}

/// Scores every catalog item with the model for the given user and returns
/// the `k` highest predicted ratings (ties broken by ascending item
/// index). An item's rating is the best prediction over all codes assigned
/// to it, so the top entry always agrees with the ground state of the
/// reduced problem.
pub fn solve_direct(
    model: &FmModel,
    u0: &[u8],
    items: &ItemCodebook,
    k: usize,
) -> Result<Vec<Recommendation>> {
    check_suggestion_count(k)?;
    if u0.len() != model.user_bits() {
        return Err(Error::DimensionMismatch {
            expected: model.user_bits(),
            got: u0.len(),
        });
    }
    if items.n_bits() != model.item_bits() {
        return Err(Error::DimensionMismatch {
            expected: model.item_bits(),
            got: items.n_bits(),
        });
    }
    let n_bits = items.n_bits();
    let mut x = Vec::with_capacity(u0.len() + n_bits);
    let mut recommendations = Vec::with_capacity(items.num_items());
    for item in 0..items.num_items() {
        let (primary, surplus) = items.code_values(item)?;
        let mut rating = f64::NEG_INFINITY;
        let mut hits = 0u64;
        for value in std::iter::once(primary).chain(surplus) {
            x.clear();
            x.extend_from_slice(u0);
            x.extend_from_slice(&encode_index(value, n_bits)?);
            rating = rating.max(model.predict(&x)?);
            hits += 1;
        }
        recommendations.push(Recommendation {
            item_index: item,
            item_id: items.item_ids()[item],
            rating,
            hits,
        });
    }
    sort_recommendations(&mut recommendations, k);
    Ok(recommendations)
}

/// Decodes every sampled state to its item, merges duplicates (summing
/// occurrences and keeping the best energy), and returns the `k` items
/// with the highest implied rating, i.e. the negated best energy.
pub fn samples_to_recommendations(
    samples: &SampleSet,
    items: &ItemCodebook,
    k: usize,
) -> Result<Vec<Recommendation>> {
    check_suggestion_count(k)?;
    if samples.num_vars() != items.n_bits() {
        return Err(Error::DimensionMismatch {
            expected: items.n_bits(),
            got: samples.num_vars(),
        });
    }
    let mut position: HashMap<usize, usize> = HashMap::new();
    let mut recommendations: Vec<Recommendation> = Vec::new();
    for record in samples.records() {
        let item = items.decode(&record.bits)?;
        match position.get(&item) {
            Some(&slot) => recommendations[slot].hits += record.occurrences,
            None => {
                position.insert(item, recommendations.len());
                recommendations.push(Recommendation {
                    item_index: item,
                    item_id: items.item_ids()[item],
                    rating: -record.energy,
                    hits: record.occurrences,
                });
            }
        }
    }
    sort_recommendations(&mut recommendations, k);
    Ok(recommendations)
}

/// Sampler knobs for the annealing backend of [`suggest`]. `betas: None`
/// picks a temperature range scaled to each problem's coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnealParams {
    pub shots: u64,
    pub sweeps: u64,
    pub betas: Option<(f64, f64)>,
    pub programming_thermalization_us: u64,
    pub readout_thermalization_us: u64,
    pub seed: u64,
}

impl Default for AnnealParams {
    fn default() -> Self {
        AnnealParams {
            shots: 100,
            sweeps: 1000,
            betas: None,
            programming_thermalization_us: 1000,
            readout_thermalization_us: 0,
            seed: 42,
        }
    }
}

impl AnnealParams {
    /// Concrete sampler configuration for one problem.
    pub fn resolve(&self, ising: &IsingProblem) -> AnnealConfig {
        let (beta_initial, beta_final) = match self.betas {
            Some(pair) => pair,
            None => {
                let scaled = AnnealConfig::for_problem(ising);
                (scaled.beta_initial, scaled.beta_final)
            }
        };
        AnnealConfig {
            shots: self.shots,
            sweeps: self.sweeps,
            beta_initial,
            beta_final,
            programming_thermalization_us: self.programming_thermalization_us,
            readout_thermalization_us: self.readout_thermalization_us,
            seed: self.seed,
        }
    }
}

/// Choice of suggestion backend, with sampler parameters where relevant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SuggestBackend {
    Direct,
    Exhaustive,
    Anneal(AnnealParams),
}

/// Produces the `k` best item suggestions for one encoded user. The direct
/// backend scores the catalog with the model; the other two reduce the
/// problem to Ising form, solve or sample it, and decode the states back
/// to items.
pub fn suggest(
    model: &FmModel,
    u0: &[u8],
    items: &ItemCodebook,
    k: usize,
    backend: &SuggestBackend,
) -> Result<Vec<Recommendation>> {
    match backend {
        SuggestBackend::Direct => solve_direct(model, u0, items, k),
        SuggestBackend::Exhaustive => {
            let ising = qubo_to_ising(&reduce_for_user(model, u0)?);
            let samples = solve_exhaustive(&ising)?;
            samples_to_recommendations(&samples, items, k)
        }
        SuggestBackend::Anneal(params) => {
            let ising = qubo_to_ising(&reduce_for_user(model, u0)?);
            let config = params.resolve(&ising);
            let samples = sample_sa(&ising, &config)?;
            samples_to_recommendations(&samples, items, k)
        }
    }
}
