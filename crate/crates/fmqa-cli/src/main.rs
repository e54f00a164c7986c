//! Command-line front end for the recommender pipeline: generate or
//! ingest ratings, train the factorization machine, rank items for a
//! user with any backend, run the overlap and timing experiments, and
//! export reduced problems as text. Every command that writes files also
//! writes a manifest naming its inputs (with digests), configuration,
//! and outputs.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use fmqa_core::data::write_ratings_csv;
use fmqa_core::error::Error;
use fmqa_core::eval::{
    backend_name, benchmark, points_for_backend, run_overlap_experiment, sample_user_indices,
    write_bench_csv, write_extrapolation_csv, write_fit_csv, write_overlap_csv,
    write_overlap_summary_csv, BenchInstance, ComplexityFamily, ComplexityFit,
    extrapolation_table, fit_complexity,
};
use fmqa_core::qubo::{qubo_to_ising, reduce_for_user, write_ising_file, write_qubo_file};
use fmqa_core::solvers::{
    sample_sa, samples_to_recommendations, suggest, AnnealParams, Recommendation, SampleSet,
    SuggestBackend,
};
use fmqa_core::{
    generate_ratings, ingest, load_model, save_model, split, train_sgd, ItemCodebook,
    RowLimit, RunManifest, SynthConfig, TrainConfig, UserCodebook,
};

#[derive(Parser)]
#[command(
    name = "fmqa",
    version,
    about = "Factorization machine recommender with QUBO/Ising suggestion backends"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic ratings table in the MovieLens CSV layout
    GenerateData(GenerateDataArgs),
    /// Fit a factorization machine to a ratings CSV
    Train(TrainArgs),
    /// Rank items for one user with a chosen backend
    Recommend(RecommendArgs),
    /// Measure how much of the direct top list a sampler captures
    EvaluateOverlap(EvaluateOverlapArgs),
    /// Time the suggestion phase across catalog sizes
    Benchmark(BenchmarkArgs),
    /// Write the reduced problem for one user as a text file
    ExportQubo(ExportQuboArgs),
}

fn main() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::GenerateData(args) => generate_data(args),
        Command::Train(args) => train(args),
        Command::Recommend(args) => recommend(args),
        Command::EvaluateOverlap(args) => evaluate_overlap(args),
        Command::Benchmark(args) => run_benchmark(args),
        Command::ExportQubo(args) => export_qubo(args),
    }
}

fn new_manifest(command: &str) -> RunManifest {
    RunManifest::new(
        "fmqa",
        env!("CARGO_PKG_VERSION"),
        command,
        std::env::args().skip(1).collect(),
    )
}

/// Manifest location for a command whose primary output is a single file.
fn manifest_path_for(out: &Path) -> PathBuf {
    PathBuf::from(format!("{}.manifest.json", out.display()))
}

/// Sampler knobs shared by every command with an annealing backend.
/// Without an explicit temperature range, each problem gets a range
/// scaled to its own coefficients.
#[derive(Args)]
struct AnnealArgs {
    #[arg(long, default_value_t = 100)]
    shots: u64,
    #[arg(long, default_value_t = 1000)]
    sweeps: u64,
    /// Initial inverse temperature (requires --beta-final)
    #[arg(long, requires = "beta_final")]
    beta_initial: Option<f64>,
    /// Final inverse temperature (requires --beta-initial)
    #[arg(long, requires = "beta_initial")]
    beta_final: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    programming_thermalization_us: u64,
    #[arg(long, default_value_t = 0)]
    readout_thermalization_us: u64,
}

impl AnnealArgs {
    fn params(&self, seed: u64) -> AnnealParams {
        AnnealParams {
            shots: self.shots,
            sweeps: self.sweeps,
            betas: match (self.beta_initial, self.beta_final) {
                (Some(initial), Some(r#final)) => Some((initial, r#final)),
                _ => None,
            },
            programming_thermalization_us: self.programming_thermalization_us,
            readout_thermalization_us: self.readout_thermalization_us,
            seed,
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, Debug, ValueEnum)]
enum BackendArg {
    Direct,
    Exhaustive,
    Anneal,
}

fn build_backend(which: BackendArg, anneal: &AnnealArgs, seed: u64) -> SuggestBackend {
    match which {
        BackendArg::Direct => SuggestBackend::Direct,
        BackendArg::Exhaustive => SuggestBackend::Exhaustive,
        BackendArg::Anneal => SuggestBackend::Anneal(anneal.params(seed)),
    }
}

#[derive(Args)]
struct GenerateDataArgs {
    #[arg(long, default_value_t = 400)]
    users: usize,
    #[arg(long, default_value_t = 6000)]
    items: usize,
    #[arg(long, default_value_t = 5000)]
    ratings: usize,
    #[arg(long, default_value_t = 0.8)]
    popularity_skew: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

fn generate_data(args: GenerateDataArgs) -> anyhow::Result<()> {
    let config = SynthConfig {
        n_users: args.users,
        n_items: args.items,
        n_ratings: args.ratings,
        popularity_skew: args.popularity_skew,
        seed: args.seed,
    };
    let data = generate_ratings(&config)?;
    write_ratings_csv(&args.out, &data)?;
    let mut manifest = new_manifest("generate-data");
    manifest.seed = Some(args.seed);
    manifest.config = serde_json::json!({
        "n_users": config.n_users,
        "n_items": config.n_items,
        "n_ratings": config.n_ratings,
        "popularity_skew": config.popularity_skew,
    });
    manifest.add_output(&args.out);
    manifest.write(manifest_path_for(&args.out))?;
    println!(
        "ratings={} users={} items={} out={}",
        data.len(),
        data.n_users(),
        data.n_items(),
        args.out.display()
    );
    Ok(())
}

#[derive(Args)]
struct TrainArgs {
    /// Ratings CSV with a userId,movieId,rating[,timestamp] header
    #[arg(long)]
    ratings: PathBuf,
    /// Keep only the first N rows
    #[arg(long, conflicts_with = "sample_fraction")]
    max_rows: Option<usize>,
    /// Keep a seeded uniform sample of this fraction of rows
    #[arg(long)]
    sample_fraction: Option<f64>,
    /// Hold out this fraction of rows and report their RMSE after training
    #[arg(long)]
    holdout: Option<f64>,
    /// Latent dimension of the factorization machine
    #[arg(long = "k", default_value_t = 200)]
    latent_dim: usize,
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[arg(long, default_value_t = 0.01)]
    learning_rate: f64,
    #[arg(long, default_value_t = 0.0)]
    l2_w0: f64,
    #[arg(long, default_value_t = 1e-4)]
    l2_w: f64,
    #[arg(long, default_value_t = 1e-4)]
    l2_v: f64,
    #[arg(long, default_value_t = 0.01)]
    init_std: f64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Where to write the trained model
    #[arg(long)]
    out: PathBuf,
}

fn train(args: TrainArgs) -> anyhow::Result<()> {
    let limit = match (args.max_rows, args.sample_fraction) {
        (Some(n), None) => RowLimit::FirstN(n),
        (None, Some(f)) => RowLimit::SampleFraction(f),
        (None, None) => RowLimit::All,
        (Some(_), Some(_)) => unreachable!("clap rejects the combination"),
    };
    let data = ingest(&args.ratings, limit, args.seed)?;
    let (train_set, holdout) = match args.holdout {
        Some(fraction) => {
            let (kept, held) = split(&data, fraction, args.seed)?;
            (kept, Some(held))
        }
        None => (data, None),
    };
    let users = UserCodebook::build(train_set.user_ids().to_vec())?;
    let items = ItemCodebook::build(
        train_set.item_ids().to_vec(),
        &train_set.mean_item_ratings(),
    )?;
    let config = TrainConfig {
        latent_dim: args.latent_dim,
        learning_rate: args.learning_rate,
        epochs: args.epochs,
        l2_w0: args.l2_w0,
        l2_w: args.l2_w,
        l2_v: args.l2_v,
        init_std: args.init_std,
        seed: args.seed,
    };
    let outcome = train_sgd(&train_set, &users, &items, &config)?;
    save_model(&args.out, &outcome.model, &users, &items)?;

    let mut manifest = new_manifest("train");
    manifest.seed = Some(args.seed);
    manifest.config = serde_json::json!({
        "latent_dim": config.latent_dim,
        "learning_rate": config.learning_rate,
        "epochs": config.epochs,
        "l2_w0": config.l2_w0,
        "l2_w": config.l2_w,
        "l2_v": config.l2_v,
        "init_std": config.init_std,
        "max_rows": args.max_rows,
        "sample_fraction": args.sample_fraction,
        "holdout": args.holdout,
    });
    manifest.add_input(&args.ratings)?;
    manifest.add_output(&args.out);
    manifest.write(manifest_path_for(&args.out))?;

    println!(
        "ratings={} users={} items={} user_bits={} item_bits={} codes={}",
        train_set.len(),
        train_set.n_users(),
        train_set.n_items(),
        users.n_bits(),
        items.n_bits(),
        items.num_codes(),
    );
    for (epoch, value) in outcome.rmse_by_epoch.iter().enumerate() {
        println!("epoch={epoch} rmse={value}");
    }
    if let Some(held) = holdout {
        let held_rmse = fmqa_core::rmse(&outcome.model, &held, &users, &items)?;
        println!("holdout_rows={} holdout_rmse={held_rmse}", held.len());
    }
    println!("model={}", args.out.display());
    Ok(())
}

#[derive(Args)]
struct RecommendArgs {
    #[arg(long)]
    model: PathBuf,
    /// Raw user id, as it appeared in the ratings table
    #[arg(long)]
    user: u64,
    #[arg(long, value_enum, default_value_t = BackendArg::Direct)]
    backend: BackendArg,
    /// Length of the ranked list
    #[arg(long, default_value_t = 10)]
    top: usize,
    #[command(flatten)]
    anneal: AnnealArgs,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Also write recommendations.csv (and samples.csv for the annealing
    /// backend) plus a manifest into this directory
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn write_recommendations_csv(path: &Path, recommendations: &[Recommendation]) -> anyhow::Result<()> {
    let mut out = String::from("rank,item_index,item_id,predicted_rating,hits\n");
    for (rank, r) in recommendations.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            rank + 1,
            r.item_index,
            r.item_id,
            r.rating,
            r.hits
        ));
    }
    std::fs::write(path, out).with_context(|| format!("write {}", path.display()))?;
    Ok(())
}

fn recommend(args: RecommendArgs) -> anyhow::Result<()> {
    let bundle = load_model(&args.model)?;
    let user_index = bundle
        .users
        .position_of_id(args.user)
        .ok_or(Error::UnknownId {
            what: "user",
            id: args.user,
        })?;
    let u0 = bundle.users.encode(user_index)?;
    let backend = build_backend(args.backend, &args.anneal, args.seed);
    let (recommendations, samples): (Vec<Recommendation>, Option<SampleSet>) = match &backend {
        SuggestBackend::Anneal(params) => {
            let ising = qubo_to_ising(&reduce_for_user(&bundle.model, &u0)?);
            let samples = sample_sa(&ising, &params.resolve(&ising))?;
            (
                samples_to_recommendations(&samples, &bundle.items, args.top)?,
                Some(samples),
            )
        }
        other => (
            suggest(&bundle.model, &u0, &bundle.items, args.top, other)?,
            None,
        ),
    };

    for (rank, r) in recommendations.iter().enumerate() {
        println!("{},{},{}", rank + 1, r.item_id, r.rating);
    }

    if let Some(dir) = &args.out_dir {
        std::fs::create_dir_all(dir).with_context(|| format!("create {}", dir.display()))?;
        let recommendations_path = dir.join("recommendations.csv");
        write_recommendations_csv(&recommendations_path, &recommendations)?;
        let mut manifest = new_manifest("recommend");
        manifest.seed = Some(args.seed);
        manifest.config = serde_json::json!({
            "user": args.user,
            "backend": backend_name(&backend),
            "top": args.top,
            "anneal": match &backend {
                SuggestBackend::Anneal(p) => serde_json::to_value(p)?,
                _ => serde_json::Value::Null,
            },
        });
        manifest.add_input(&args.model)?;
        manifest.add_output(&recommendations_path);
        if let Some(samples) = &samples {
            let samples_path = dir.join("samples.csv");
            samples.write_csv_file(&samples_path)?;
            manifest.add_output(&samples_path);
        }
        manifest.write(dir.join("manifest.json"))?;
    }
    Ok(())
}

#[derive(Copy, Clone, PartialEq, Eq, Debug, ValueEnum)]
enum SamplerArg {
    Anneal,
    Exhaustive,
}

#[derive(Args)]
struct EvaluateOverlapArgs {
    #[arg(long)]
    model: PathBuf,
    /// How many users to draw (seeded); the whole user set if fewer exist
    #[arg(long, default_value_t = 100)]
    users: usize,
    /// Comma-separated top-list lengths
    #[arg(long, value_delimiter = ',', default_value = "10,30,50")]
    ks: Vec<usize>,
    #[arg(long, value_enum, default_value_t = SamplerArg::Anneal)]
    sampler: SamplerArg,
    #[command(flatten)]
    anneal: AnnealArgs,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

fn evaluate_overlap(args: EvaluateOverlapArgs) -> anyhow::Result<()> {
    let bundle = load_model(&args.model)?;
    let user_indices = sample_user_indices(bundle.users.num_users(), args.users, args.seed)?;
    let sampler = match args.sampler {
        SamplerArg::Anneal => SuggestBackend::Anneal(args.anneal.params(args.seed)),
        SamplerArg::Exhaustive => SuggestBackend::Exhaustive,
    };
    let reports = run_overlap_experiment(
        &bundle.model,
        &bundle.users,
        &bundle.items,
        &user_indices,
        &args.ks,
        &sampler,
    )?;

    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("create {}", args.out_dir.display()))?;
    let overlap_path = args.out_dir.join("overlap.csv");
    let summary_path = args.out_dir.join("overlap_summary.csv");
    write_overlap_csv(&overlap_path, &reports)?;
    write_overlap_summary_csv(&summary_path, &reports)?;

    let mut manifest = new_manifest("evaluate-overlap");
    manifest.seed = Some(args.seed);
    manifest.config = serde_json::json!({
        "users": user_indices.len(),
        "ks": args.ks,
        "sampler": match &sampler {
            SuggestBackend::Anneal(p) => serde_json::to_value(p)?,
            _ => serde_json::json!("exhaustive"),
        },
    });
    manifest.add_input(&args.model)?;
    manifest.add_output(&overlap_path);
    manifest.add_output(&summary_path);
    manifest.write(args.out_dir.join("manifest.json"))?;

    for report in &reports {
        println!(
            "k_s={} users={} mean_overlap={}",
            report.k_s,
            report.users.len(),
            report.mean_overlap()
        );
    }
    Ok(())
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Trained model files to time (repeat or comma-separate)
    #[arg(long, value_delimiter = ',')]
    model: Vec<PathBuf>,
    /// Ratings-count labels for the models, matched by position
    #[arg(long, value_delimiter = ',')]
    n_data: Vec<usize>,
    /// Catalog sizes for randomly initialized instances
    #[arg(long, value_delimiter = ',')]
    synthetic_items: Vec<usize>,
    #[arg(long, default_value_t = 512)]
    synthetic_users: usize,
    /// Latent dimension of synthetic instances
    #[arg(long = "k", default_value_t = 200)]
    latent_dim: usize,
    #[arg(long, value_enum, value_delimiter = ',', default_values_t = [BackendArg::Direct, BackendArg::Anneal])]
    backends: Vec<BackendArg>,
    /// Users timed per instance
    #[arg(long, default_value_t = 5)]
    users: usize,
    #[arg(long, default_value_t = 10)]
    top: usize,
    #[arg(long, default_value_t = 5)]
    reps: usize,
    #[command(flatten)]
    anneal: AnnealArgs,
    /// Also fit cost families and write fit.csv and extrapolation.csv
    #[arg(long)]
    fit: bool,
    /// Problem sizes (in bits) for the extrapolation table
    #[arg(long, value_delimiter = ',', default_value = "13,16,32,64,100,145,163")]
    extrapolate_bits: Vec<usize>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long)]
    out_dir: PathBuf,
}

fn run_benchmark(args: BenchmarkArgs) -> anyhow::Result<()> {
    let mut instances = Vec::new();
    for (position, path) in args.model.iter().enumerate() {
        let bundle = load_model(path)?;
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| format!("model-{position}"));
        instances.push(BenchInstance {
            label,
            n_data: args.n_data.get(position).copied().unwrap_or(0),
            model: bundle.model,
            users: bundle.users,
            items: bundle.items,
        });
    }
    for &n_items in &args.synthetic_items {
        let instance = fmqa_core::synthetic_instance(
            args.synthetic_users,
            n_items,
            args.latent_dim,
            args.seed,
        )?;
        instances.push(BenchInstance {
            label: format!("synthetic-{n_items}"),
            n_data: 0,
            model: instance.model,
            users: instance.users,
            items: instance.items,
        });
    }
    if instances.is_empty() {
        bail!("nothing to time: pass --model and/or --synthetic-items");
    }

    let fewest_users = instances
        .iter()
        .map(|i| i.users.num_users())
        .min()
        .expect("nonempty");
    let user_indices = sample_user_indices(fewest_users, args.users, args.seed)?;
    let backends: Vec<SuggestBackend> = args
        .backends
        .iter()
        .map(|&b| build_backend(b, &args.anneal, args.seed))
        .collect();

    let records = benchmark(&instances, &backends, &user_indices, args.top, args.reps)?;

    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("create {}", args.out_dir.display()))?;
    let bench_path = args.out_dir.join("bench.csv");
    write_bench_csv(&bench_path, &records)?;

    let mut manifest = new_manifest("benchmark");
    manifest.seed = Some(args.seed);
    manifest.config = serde_json::json!({
        "synthetic_items": args.synthetic_items,
        "synthetic_users": args.synthetic_users,
        "latent_dim": args.latent_dim,
        "backends": args.backends.iter().map(|b| format!("{b:?}").to_lowercase()).collect::<Vec<_>>(),
        "users": user_indices.len(),
        "top": args.top,
        "reps": args.reps,
        "shots": args.anneal.shots,
        "sweeps": args.anneal.sweeps,
    });
    for path in &args.model {
        manifest.add_input(path)?;
    }
    manifest.add_output(&bench_path);

    if args.fit {
        let mut fits: Vec<(String, ComplexityFit)> = Vec::new();
        let direct_points = points_for_backend(&records, "direct");
        if direct_points.len() >= 3 {
            fits.push((
                "direct".to_string(),
                fit_complexity(&direct_points, ComplexityFamily::DirectPolylog)?,
            ));
        }
        let anneal_points = points_for_backend(&records, "anneal");
        if anneal_points.len() >= 3 {
            fits.push((
                "anneal".to_string(),
                fit_complexity(&anneal_points, ComplexityFamily::AnnealSubexp)?,
            ));
        }
        if fits.is_empty() {
            bail!("--fit needs at least 3 timing points for the direct or anneal backend");
        }
        let fit_path = args.out_dir.join("fit.csv");
        write_fit_csv(&fit_path, &fits)?;
        manifest.add_output(&fit_path);

        let direct_fit = fits.iter().find(|(b, _)| b == "direct").map(|(_, f)| f);
        let anneal_fit = fits.iter().find(|(b, _)| b == "anneal").map(|(_, f)| f);
        if let (Some(direct), Some(anneal)) = (direct_fit, anneal_fit) {
            let rows = extrapolation_table(direct, anneal, &args.extrapolate_bits)?;
            let extrapolation_path = args.out_dir.join("extrapolation.csv");
            write_extrapolation_csv(&extrapolation_path, &rows)?;
            manifest.add_output(&extrapolation_path);
        }
    }

    manifest.write(args.out_dir.join("manifest.json"))?;

    for r in &records {
        println!(
            "label={} n_items={} backend={} user={} median_seconds={}",
            r.label, r.n_items, r.backend, r.user_index, r.median_seconds
        );
    }
    Ok(())
}

#[derive(Args)]
struct ExportQuboArgs {
    #[arg(long)]
    model: PathBuf,
    /// Raw user id to reduce the suggestion problem for
    #[arg(long)]
    user: u64,
    /// Export the spin-variable (Ising) form instead of the binary form
    #[arg(long)]
    ising: bool,
    #[arg(long)]
    out: PathBuf,
}

fn export_qubo(args: ExportQuboArgs) -> anyhow::Result<()> {
    let bundle = load_model(&args.model)?;
    let user_index = bundle
        .users
        .position_of_id(args.user)
        .ok_or(Error::UnknownId {
            what: "user",
            id: args.user,
        })?;
    let u0 = bundle.users.encode(user_index)?;
    let qubo = reduce_for_user(&bundle.model, &u0)?;
    let (variables, offset) = if args.ising {
        let ising = qubo_to_ising(&qubo);
        write_ising_file(&args.out, &ising)?;
        (ising.num_vars(), ising.offset())
    } else {
        write_qubo_file(&args.out, &qubo)?;
        (qubo.num_vars(), qubo.offset())
    };

    let mut manifest = new_manifest("export-qubo");
    manifest.config = serde_json::json!({
        "user": args.user,
        "form": if args.ising { "ising" } else { "qubo" },
    });
    manifest.add_input(&args.model)?;
    manifest.add_output(&args.out);
    manifest.write(manifest_path_for(&args.out))?;

    println!(
        "form={} variables={variables} offset={offset} out={}",
        if args.ising { "ising" } else { "qubo" },
        args.out.display()
    );
    Ok(())
}
