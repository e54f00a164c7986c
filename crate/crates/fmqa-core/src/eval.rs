//! Experiments over trained models: backend agreement and timing scans.
//!
//! The overlap experiment measures how much of the direct method's top
//! list a sampling backend captures. The benchmark times the suggestion
//! phase (reduction, solve, decode) across catalog sizes, and the fit
//! helpers regress those timings onto closed-form cost families for
//! extrapolation well beyond what can be measured.

use std::collections::HashSet;
use std::path::Path;
use std::time::Instant;

use crate::encoding::{ItemCodebook, UserCodebook};
use crate::error::{Error, Result};
use crate::fm::FmModel;
use crate::qubo::{qubo_to_ising, reduce_for_user};
use crate::rng::{seeded_rng, PURPOSE_USER_SAMPLE};
use crate::solvers::{
    sample_sa, samples_to_recommendations, solve_direct, solve_exhaustive, suggest,
    SuggestBackend,
};

/// Percentage of the direct top list that also appears in the sampled
/// item set. `direct_topk` must contain exactly `k_s` items.
pub fn overlap_rate(direct_topk: &[usize], sampled: &[usize], k_s: usize) -> Result<f64> {
    if direct_topk.len() != k_s {
        return Err(Error::DimensionMismatch {
            expected: k_s,
            got: direct_topk.len(),
        });
    }
    if k_s == 0 {
        return Err(Error::Empty { what: "top list" });
    }
    let sampled_set: HashSet<usize> = sampled.iter().copied().collect();
    let hits = direct_topk
        .iter()
        .filter(|item| sampled_set.contains(item))
        .count();
    Ok(100.0 * hits as f64 / k_s as f64)
}

/// One user's outcome at a given list length.
#[derive(Debug, Clone, PartialEq)]
pub struct UserOverlap {
    pub user_index: usize,
    pub user_id: u64,
    /// The direct method's top `k_s` item indices.
    pub direct_items: Vec<usize>,
    /// Every distinct item the sampler's states decoded to.
    pub sampled_items: Vec<usize>,
    pub overlap_percent: f64,
}

/// Overlap outcomes for all evaluated users at one list length.
#[derive(Debug, Clone, PartialEq)]
pub struct OverlapReport {
    pub k_s: usize,
    pub users: Vec<UserOverlap>,
}

impl OverlapReport {
    pub fn mean_overlap(&self) -> f64 {
        if self.users.is_empty() {
            return 0.0;
        }
        self.users.iter().map(|u| u.overlap_percent).sum::<f64>() / self.users.len() as f64
    }
}

/// Runs the overlap experiment: for each user, the sampler draws once and
/// its decoded item set is compared against the direct top list at every
/// requested length. The annealing backend offsets its seed by the user
/// index so users get independent streams. The direct backend cannot be
/// the sampler side (it would compare a list against itself).
pub fn run_overlap_experiment(
    model: &FmModel,
    users: &UserCodebook,
    items: &ItemCodebook,
    user_indices: &[usize],
    ks_list: &[usize],
    sampler: &SuggestBackend,
) -> Result<Vec<OverlapReport>> {
    if user_indices.is_empty() {
        return Err(Error::Empty { what: "users" });
    }
    if ks_list.is_empty() {
        return Err(Error::Empty { what: "list lengths" });
    }
    if matches!(sampler, SuggestBackend::Direct) {
        return Err(Error::InvalidConfig(
            "the sampler side must be a sampling backend, not the direct method".into(),
        ));
    }
    let max_ks = *ks_list.iter().max().expect("nonempty");
    if ks_list.iter().any(|&k| k == 0) {
        return Err(Error::InvalidConfig(
            "list lengths must be at least 1".into(),
        ));
    }
    if max_ks > items.num_items() {
        return Err(Error::InvalidConfig(format!(
            "list length {} exceeds the {}-item catalog",
            max_ks,
            items.num_items()
        )));
    }

    let mut per_user: Vec<(usize, u64, Vec<usize>, Vec<usize>)> = Vec::new();
    for &user_index in user_indices {
        let u0 = users.encode(user_index)?;
        let direct = solve_direct(model, &u0, items, max_ks)?;
        let ising = qubo_to_ising(&reduce_for_user(model, &u0)?);
        let samples = match sampler {
            SuggestBackend::Direct => unreachable!("rejected above"),
            SuggestBackend::Exhaustive => solve_exhaustive(&ising)?,
            SuggestBackend::Anneal(params) => {
                let mut per_user_params = params.clone();
                per_user_params.seed = params.seed.wrapping_add(user_index as u64);
                sample_sa(&ising, &per_user_params.resolve(&ising))?
            }
        };
        let decoded = samples_to_recommendations(&samples, items, usize::MAX)?;
        per_user.push((
            user_index,
            users.user_id(user_index)?,
            direct.iter().map(|r| r.item_index).collect(),
            decoded.iter().map(|r| r.item_index).collect(),
        ));
    }

    let mut reports = Vec::with_capacity(ks_list.len());
    for &k_s in ks_list {
        let mut rows = Vec::with_capacity(per_user.len());
        for (user_index, user_id, direct_items, sampled_items) in &per_user {
            let top: Vec<usize> = direct_items[..k_s].to_vec();
            let overlap_percent = overlap_rate(&top, sampled_items, k_s)?;
            rows.push(UserOverlap {
                user_index: *user_index,
                user_id: *user_id,
                direct_items: top,
                sampled_items: sampled_items.clone(),
                overlap_percent,
            });
        }
        reports.push(OverlapReport { k_s, users: rows });
    }
    Ok(reports)
}

/// Seeded sample of distinct user indices, ascending. Requests for the
/// whole population (or more) return every index.
pub fn sample_user_indices(num_users: usize, count: usize, seed: u64) -> Result<Vec<usize>> {
    if num_users == 0 {
        return Err(Error::Empty { what: "users" });
    }
    if count == 0 {
        return Err(Error::Empty { what: "sample" });
    }
    if count >= num_users {
        return Ok((0..num_users).collect());
    }
    let mut rng = seeded_rng(seed, PURPOSE_USER_SAMPLE, 0);
    let mut picked = rand::seq::index::sample(&mut rng, num_users, count).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

/// A sized problem for the timing scan: a model over some catalog plus
/// the codebooks to suggest against. `n_data` records how many ratings
/// stand behind the model (zero for randomly initialized instances).
#[derive(Debug, Clone)]
pub struct BenchInstance {
    pub label: String,
    pub n_data: usize,
    pub model: FmModel,
    pub users: UserCodebook,
    pub items: ItemCodebook,
}

/// Median suggestion time for one (instance, backend, user) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub label: String,
    pub n_data: usize,
    pub n_items: usize,
    pub n_item_bits: usize,
    pub backend: String,
    pub user_index: usize,
    pub reps: usize,
    pub median_seconds: f64,
}

pub fn backend_name(backend: &SuggestBackend) -> &'static str {
    match backend {
        SuggestBackend::Direct => "direct",
        SuggestBackend::Exhaustive => "exhaustive",
        SuggestBackend::Anneal(_) => "anneal",
    }
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.total_cmp(b));
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Times the suggestion phase (reduction, solve, decode) for every
/// combination of instance, backend, and user. Requires at least two
/// distinct catalog sizes so the results can anchor a scaling fit.
pub fn benchmark(
    instances: &[BenchInstance],
    backends: &[SuggestBackend],
    user_indices: &[usize],
    k_s: usize,
    reps: usize,
) -> Result<Vec<BenchRecord>> {
    if reps < 1 {
        return Err(Error::InvalidConfig(
            "at least one repetition is required".into(),
        ));
    }
    if backends.is_empty() {
        return Err(Error::Empty { what: "backends" });
    }
    if user_indices.is_empty() {
        return Err(Error::Empty { what: "users" });
    }
    let distinct_sizes: HashSet<usize> =
        instances.iter().map(|i| i.items.num_items()).collect();
    if distinct_sizes.len() < 2 {
        return Err(Error::InvalidConfig(
            "the timing scan needs at least two distinct catalog sizes".into(),
        ));
    }

    let mut records = Vec::new();
    for instance in instances {
        for backend in backends {
            for &user_index in user_indices {
                let u0 = instance.users.encode(user_index)?;
                let mut times = Vec::with_capacity(reps);
                for _ in 0..reps {
                    let start = Instant::now();
                    let result = suggest(&instance.model, &u0, &instance.items, k_s, backend)?;
                    let elapsed = start.elapsed().as_secs_f64();
                    debug_assert!(!result.is_empty());
                    times.push(elapsed);
                }
                records.push(BenchRecord {
                    label: instance.label.clone(),
                    n_data: instance.n_data,
                    n_items: instance.items.num_items(),
                    n_item_bits: instance.items.n_bits(),
                    backend: backend_name(backend).to_string(),
                    user_index,
                    reps,
                    median_seconds: median(times.clone()),
                });
            }
        }
    }
    Ok(records)
}

/// Closed-form cost families the timing scan can be regressed onto, as
/// functions of the catalog size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ComplexityFamily {
    /// `(N log2 N)^2`: scoring every item and sorting, squared model.
    DirectPolylog,
    /// `e^sqrt(log2 N) * log2 N`: sub-polynomial annealer scaling.
    AnnealSubexp,
}

impl ComplexityFamily {
    pub fn label(&self) -> &'static str {
        match self {
            ComplexityFamily::DirectPolylog => "(N*log2(N))^2",
            ComplexityFamily::AnnealSubexp => "exp(sqrt(log2(N)))*log2(N)",
        }
    }

    /// The family's basis function evaluated at a catalog size.
    pub fn basis(&self, n_items: f64) -> f64 {
        let lg = n_items.log2();
        match self {
            ComplexityFamily::DirectPolylog => (n_items * lg).powi(2),
            ComplexityFamily::AnnealSubexp => lg.sqrt().exp() * lg,
        }
    }
}

/// Least-squares fit `seconds ~ scale * basis(n_items) + shift`.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexityFit {
    pub family: ComplexityFamily,
    pub scale: f64,
    pub shift: f64,
    pub residual_rms: f64,
    pub points: usize,
}

impl ComplexityFit {
    pub fn predict(&self, n_items: f64) -> f64 {
        self.scale * self.family.basis(n_items) + self.shift
    }
}

/// Fits one cost family to (catalog size, seconds) measurements.
pub fn fit_complexity(points: &[(f64, f64)], family: ComplexityFamily) -> Result<ComplexityFit> {
    if points.len() < 3 {
        return Err(Error::InvalidConfig(format!(
            "fitting needs at least 3 points, got {}",
            points.len()
        )));
    }
    for &(n, t) in points {
        if !(n.is_finite() && t.is_finite()) || n < 2.0 {
            return Err(Error::InvalidConfig(format!(
                "bad point ({n}, {t}): catalog sizes must be finite and at least 2"
            )));
        }
    }
    let n = points.len() as f64;
    let g: Vec<f64> = points.iter().map(|&(x, _)| family.basis(x)).collect();
    let g_mean = g.iter().sum::<f64>() / n;
    let t_mean = points.iter().map(|&(_, t)| t).sum::<f64>() / n;
    let mut cov = 0.0;
    let mut var = 0.0;
    for (gi, &(_, ti)) in g.iter().zip(points) {
        cov += (gi - g_mean) * (ti - t_mean);
        var += (gi - g_mean).powi(2);
    }
    if var == 0.0 {
        return Err(Error::InvalidConfig(
            "all points share one catalog size; the fit is degenerate".into(),
        ));
    }
    let scale = cov / var;
    let shift = t_mean - scale * g_mean;
    let mut sq = 0.0;
    for (gi, &(_, ti)) in g.iter().zip(points) {
        sq += (ti - (scale * gi + shift)).powi(2);
    }
    Ok(ComplexityFit {
        family,
        scale,
        shift,
        residual_rms: (sq / n).sqrt(),
        points: points.len(),
    })
}

/// The measurements for one backend as fit points.
pub fn points_for_backend(records: &[BenchRecord], backend: &str) -> Vec<(f64, f64)> {
    records
        .iter()
        .filter(|r| r.backend == backend)
        .map(|r| (r.n_items as f64, r.median_seconds))
        .collect()
}

/// One extrapolated cost comparison at a problem size of `qubo_bits`
/// variables, i.e. a catalog of `2^qubo_bits` items.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtrapolationRow {
    pub qubo_bits: usize,
    pub n_items: f64,
    pub direct_seconds: f64,
    pub sampler_seconds: f64,
    pub note: String,
}

/// Largest problem size accepted by [`extrapolation_table`]; beyond this
/// the direct family overflows doubles.
pub const MAX_EXTRAPOLATION_BITS: usize = 400;

/// Annotated at the complete-graph embedding ceilings of real annealers.
fn size_note(qubo_bits: usize) -> String {
    match qubo_bits {
        64 => "complete-graph ceiling of a 2048-qubit Chimera annealer".to_string(),
        145 => "complete-graph ceiling of a 5760-qubit Pegasus annealer".to_string(),
        _ => String::new(),
    }
}

/// Evaluates both fitted cost curves at catalogs of `2^bits` items.
pub fn extrapolation_table(
    direct: &ComplexityFit,
    sampler: &ComplexityFit,
    bits: &[usize],
) -> Result<Vec<ExtrapolationRow>> {
    let mut rows = Vec::with_capacity(bits.len());
    for &qubo_bits in bits {
        if qubo_bits == 0 || qubo_bits > MAX_EXTRAPOLATION_BITS {
            return Err(Error::IndexOutOfRange {
                what: "qubo bits",
                index: qubo_bits,
                size: MAX_EXTRAPOLATION_BITS + 1,
            });
        }
        let n_items = (qubo_bits as f64).exp2();
        rows.push(ExtrapolationRow {
            qubo_bits,
            n_items,
            direct_seconds: direct.predict(n_items),
            sampler_seconds: sampler.predict(n_items),
            note: size_note(qubo_bits),
        });
    }
    Ok(rows)
}

fn write_text(path: &Path, text: String) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(format!("write {}", path.display()), e))
}

/// One row per (user, list length): `user_index,user_id,k_s,
/// n_sampled_items,overlap_percent`.
pub fn write_overlap_csv(path: impl AsRef<Path>, reports: &[OverlapReport]) -> Result<()> {
    let mut out = String::from("user_index,user_id,k_s,n_sampled_items,overlap_percent\n");
    for report in reports {
        for user in &report.users {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                user.user_index,
                user.user_id,
                report.k_s,
                user.sampled_items.len(),
                user.overlap_percent
            ));
        }
    }
    write_text(path.as_ref(), out)
}

/// One row per list length: `k_s,users,mean_overlap_percent`.
pub fn write_overlap_summary_csv(
    path: impl AsRef<Path>,
    reports: &[OverlapReport],
) -> Result<()> {
    let mut out = String::from("k_s,users,mean_overlap_percent\n");
    for report in reports {
        out.push_str(&format!(
            "{},{},{}\n",
            report.k_s,
            report.users.len(),
            report.mean_overlap()
        ));
    }
    write_text(path.as_ref(), out)
}

pub fn write_bench_csv(path: impl AsRef<Path>, records: &[BenchRecord]) -> Result<()> {
    let mut out =
        String::from("label,n_data,n_items,n_item_bits,backend,user_index,reps,median_seconds\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.label, r.n_data, r.n_items, r.n_item_bits, r.backend, r.user_index, r.reps,
            r.median_seconds
        ));
    }
    write_text(path.as_ref(), out)
}

pub fn write_fit_csv(path: impl AsRef<Path>, fits: &[(String, ComplexityFit)]) -> Result<()> {
    let mut out = String::from("backend,family,scale,shift,residual_rms,points\n");
    for (backend, fit) in fits {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            backend,
            fit.family.label(),
            fit.scale,
            fit.shift,
            fit.residual_rms,
            fit.points
        ));
    }
    write_text(path.as_ref(), out)
}

pub fn write_extrapolation_csv(
    path: impl AsRef<Path>,
    rows: &[ExtrapolationRow],
) -> Result<()> {
    let mut out = String::from("qubo_bits,n_items,direct_seconds,sampler_seconds,note\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.qubo_bits, r.n_items, r.direct_seconds, r.sampler_seconds, r.note
        ));
    }
    write_text(path.as_ref(), out)
}
