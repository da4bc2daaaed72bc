//! Command-line entry point: simulate data, fit chains, summarize traces,
//! and run the Monte Carlo benchmark.

use clap::{Args, Parser, Subcommand};
use gptem::graph::edge_pairs;
use gptem::gwishart::{GWishartParams, PrecisionMatrix};
use gptem::mcmc::{read_trace_csv, run_chain, write_trace_csv, ChainConfig, ChainTrace, ModelSpec, ModelVariant};
use gptem::phylo::{
    parse_newick, read_trait_csv, simulate_traits, simulate_tree, write_newick, write_trait_csv,
    RootPrior,
};
use gptem::summary::{summarize, PosteriorSummary};
use gptem::simstudy::{
    render_report_text, run_scenario, write_report_csv, ScenarioSpec, SIM1_K0_CSV, SIM2_K0_CSV,
};
use gptem::Error;
use nalgebra::DMatrix;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

const EXIT_RUNTIME: u8 = 1;
const EXIT_VALIDATION: u8 = 2;

#[derive(Parser, Debug)]
#[command(
    name = "gptem",
    version,
    about = "Graphical phylogenetic trait evolution: sparse diffusion precision and trait association graphs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a Yule tree and Brownian trait data under a known precision.
    Simulate(SimulateArgs),
    /// Fit the graphical or full model to a tree and trait CSV.
    Fit(FitArgs),
    /// Re-summarize an existing trace CSV.
    Summarize(SummarizeArgs),
    /// Run a Monte Carlo benchmark scenario.
    Benchmark(BenchmarkArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    /// Number of tips.
    #[arg(long, short = 'n')]
    taxa: usize,
    /// CSV file with the true precision K_0, or "sim1"/"sim2" for the
    /// bundled scenario fixtures.
    #[arg(long)]
    k0: String,
    /// RNG seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Root prior mean entries mu0 (repeat per trait; defaults to zeros).
    #[arg(long = "mu0", value_delimiter = ',')]
    mu0: Option<Vec<f64>>,
    /// Root prior sample size tau0.
    #[arg(long, default_value_t = 1.0)]
    tau0: f64,
    /// Output directory.
    #[arg(long, short = 'o', default_value = ".")]
    out: PathBuf,
    /// Basename for output files.
    #[arg(long, default_value = "sim")]
    prefix: String,
}

#[derive(Args, Debug)]
struct FitArgs {
    /// Newick tree file.
    #[arg(long)]
    tree: PathBuf,
    /// Trait CSV (taxon column + one column per trait).
    #[arg(long)]
    traits: PathBuf,
    /// Model variant: "graphical" or "full".
    #[arg(long, default_value = "graphical")]
    model: String,
    /// G-Wishart shape delta (graphical) [default 3].
    #[arg(long)]
    delta: Option<f64>,
    /// Wishart degrees of freedom nu (full) [default 2 + p].
    #[arg(long)]
    nu: Option<f64>,
    /// Optional CSV file with the prior rate matrix D [default identity].
    #[arg(long)]
    rate: Option<PathBuf>,
    /// Root prior mean entries mu0 (comma-separated; defaults to zeros).
    #[arg(long = "mu0", value_delimiter = ',')]
    mu0: Option<Vec<f64>>,
    /// Root prior sample size tau0.
    #[arg(long, default_value_t = 1.0)]
    tau0: f64,
    #[command(flatten)]
    chain: ChainArgs,
    /// RNG seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// HPD level for the summary intervals.
    #[arg(long, default_value_t = 0.95)]
    gamma: f64,
    /// Output directory.
    #[arg(long, short = 'o', default_value = ".")]
    out: PathBuf,
    /// Basename for output files.
    #[arg(long, default_value = "fit")]
    prefix: String,
}

#[derive(Args, Debug)]
struct ChainArgs {
    /// Total MCMC iterations.
    #[arg(long, default_value_t = 20_000)]
    iterations: usize,
    /// Warm-up iterations to discard [default 20%].
    #[arg(long)]
    warmup: Option<usize>,
    /// Thinning interval for stored samples.
    #[arg(long, default_value_t = 10)]
    thin: usize,
    /// Monte Carlo samples per normalizing-constant evaluation.
    #[arg(long, default_value_t = 1_000)]
    mc_samples: usize,
}

impl ChainArgs {
    fn to_config(&self) -> ChainConfig {
        ChainConfig {
            n_iterations: self.iterations,
            warmup: self.warmup.unwrap_or(self.iterations / 5),
            thin: self.thin,
            mc_samples: self.mc_samples,
            ..ChainConfig::default()
        }
    }
}

#[derive(Args, Debug)]
struct SummarizeArgs {
    /// Trace CSV written by `gptem fit` (sidecar must sit next to it).
    #[arg(long)]
    trace: PathBuf,
    /// HPD level for the summary intervals.
    #[arg(long, default_value_t = 0.95)]
    gamma: f64,
    /// Output JSON path [default: print to stdout only].
    #[arg(long, short = 'o')]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchmarkArgs {
    /// Scenario: "sim1", "sim2", or a path to a scenario TOML file.
    #[arg(long)]
    scenario: String,
    /// Override replicate count.
    #[arg(long)]
    replicates: Option<usize>,
    /// Override chain iterations.
    #[arg(long)]
    iterations: Option<usize>,
    /// Override normalizing-constant MC samples.
    #[arg(long)]
    mc_samples: Option<usize>,
    /// Base seed.
    #[arg(long, default_value_t = 2027)]
    seed: u64,
    /// Worker threads for replicates.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Exit non-zero if the directional-reproduction checks fail.
    #[arg(long)]
    strict: bool,
    /// Output directory.
    #[arg(long, short = 'o', default_value = ".")]
    out: PathBuf,
    /// Basename for output files.
    #[arg(long, default_value = "benchmark")]
    prefix: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Fit(args) => cmd_fit(&args),
        Command::Summarize(args) => cmd_summarize(&args),
        Command::Benchmark(args) => cmd_benchmark(&args),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

/// Validation failures exit 2; runtime and numeric failures exit 1.
fn exit_code_for(e: &Error) -> u8 {
    match e {
        Error::NewickParse { .. }
        | Error::InvalidTree(_)
        | Error::InvalidInput(_)
        | Error::DimensionMismatch(_)
        | Error::NotPositiveDefinite(_)
        | Error::LabelMismatch(_)
        | Error::Config(_)
        | Error::TraceFormat(_) => EXIT_VALIDATION,
        _ => EXIT_RUNTIME,
    }
}

/// Provenance sidecar written next to every output set.
#[derive(Serialize)]
struct Provenance {
    tool: &'static str,
    version: &'static str,
    seed: u64,
    config_hash: String,
}

fn write_provenance(path: &Path, seed: u64, config_text: &str) -> Result<(), Error> {
    let mut hasher = Sha256::new();
    hasher.update(config_text.as_bytes());
    let config_hash: String = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();
    let prov = Provenance {
        tool: "gptem",
        version: env!("CARGO_PKG_VERSION"),
        seed,
        config_hash,
    };
    fs::write(path, serde_json::to_string_pretty(&prov)?)?;
    Ok(())
}

fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>, Error> {
    let text = fs::read_to_string(path)?;
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            line.split(',')
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::InvalidInput(format!("non-numeric matrix entry {f:?} in {}", path.display())))
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let p = rows.len();
    if rows.iter().any(|r| r.len() != p) {
        return Err(Error::InvalidInput(format!("{} is not a square matrix", path.display())));
    }
    Ok(DMatrix::from_fn(p, p, |i, j| rows[i][j]))
}

fn load_k0(spec: &str) -> Result<PrecisionMatrix, Error> {
    let text = match spec {
        "sim1" => SIM1_K0_CSV.to_string(),
        "sim2" => SIM2_K0_CSV.to_string(),
        path => fs::read_to_string(path)?,
    };
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|line| {
            line.split(',')
                .map(|f| {
                    f.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::InvalidInput(format!("non-numeric K_0 entry {f:?}")))
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let p = rows.len();
    if rows.iter().any(|r| r.len() != p) {
        return Err(Error::InvalidInput("K_0 file is not a square matrix".into()));
    }
    let m = DMatrix::from_fn(p, p, |i, j| rows[i][j]);
    PrecisionMatrix::new(m.clone()).map_err(|e| match e {
        Error::NotPositiveDefinite(_) => {
            let min_eig = m
                .symmetric_eigenvalues()
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            Error::NotPositiveDefinite(format!(
                "K_0 is not positive definite (smallest eigenvalue {min_eig:.6e})"
            ))
        }
        other => other,
    })
}

fn root_prior_from(mu0: &Option<Vec<f64>>, tau0: f64, p: usize) -> Result<RootPrior, Error> {
    match mu0 {
        Some(mean) => RootPrior::new(mean.clone(), tau0),
        None => RootPrior::new(vec![0.0; p], tau0),
    }
}

fn cmd_simulate(args: &SimulateArgs) -> Result<ExitCode, Error> {
    let k0 = load_k0(&args.k0)?;
    let root_prior = root_prior_from(&args.mu0, args.tau0, k0.p())?;
    println!(
        "effective config: taxa={} p={} k0={} seed={} tau0={}",
        args.taxa,
        k0.p(),
        args.k0,
        args.seed,
        args.tau0
    );

    let tree = simulate_tree(args.taxa, args.seed)?;
    let traits = simulate_traits(&tree, &k0, &root_prior, args.seed.wrapping_add(1))?;

    fs::create_dir_all(&args.out)?;
    let tree_path = args.out.join(format!("{}.nwk", args.prefix));
    let trait_path = args.out.join(format!("{}.csv", args.prefix));
    fs::write(&tree_path, write_newick(&tree) + "\n")?;
    write_trait_csv(fs::File::create(&trait_path)?, &traits)?;
    let config_text = format!("{args:?}");
    write_provenance(
        &args.out.join(format!("{}.provenance.json", args.prefix)),
        args.seed,
        &config_text,
    )?;
    println!("wrote {} and {}", tree_path.display(), trait_path.display());
    Ok(ExitCode::SUCCESS)
}

fn model_spec_from(args: &FitArgs, p: usize) -> Result<ModelSpec, Error> {
    let rate = match &args.rate {
        Some(path) => read_matrix_csv(path)?,
        None => DMatrix::identity(p, p),
    };
    let root_prior = root_prior_from(&args.mu0, args.tau0, p)?;
    let variant = match args.model.as_str() {
        "graphical" => {
            if args.nu.is_some() {
                return Err(Error::Config("--nu applies only to the full model".into()));
            }
            ModelVariant::Graphical {
                prior: GWishartParams::new(args.delta.unwrap_or(3.0), rate)?,
            }
        }
        "full" => {
            if args.delta.is_some() {
                return Err(Error::Config("--delta applies only to the graphical model".into()));
            }
            ModelVariant::Full {
                df: args.nu.unwrap_or(2.0 + p as f64),
                rate,
            }
        }
        other => {
            return Err(Error::Config(format!(
                "unknown model {other:?}; expected \"graphical\" or \"full\""
            )))
        }
    };
    let spec = ModelSpec { variant, root_prior };
    spec.validate(p)?;
    Ok(spec)
}

/// Correlogram-style table: R-hat entries annotated with pe (graphical) or
/// ps (full); selected entries marked with an asterisk.
fn render_correlogram(summary: &PosteriorSummary, trait_labels: &[String], graphical: bool) -> String {
    let p = trait_labels.len();
    let mut out = String::new();
    let annotation = if graphical { "pe" } else { "ps" };
    out.push_str(&format!("R-hat with {annotation} annotations (* = selected):\n"));
    let selected: Vec<Vec<bool>> = {
        let mut s = vec![vec![false; p]; p];
        for &(i, j) in &summary.graph {
            s[i][j] = true;
            s[j][i] = true;
        }
        s
    };
    out.push_str(&format!("{:<10}", ""));
    for label in trait_labels {
        out.push_str(&format!("{label:<18}"));
    }
    out.push('\n');
    for i in 0..p {
        out.push_str(&format!("{:<10}", trait_labels[i]));
        for j in 0..p {
            if j == i {
                out.push_str(&format!("{:<18}", "1"));
            } else {
                let ann = if graphical {
                    summary.pe[i][j]
                } else {
                    summary.ps[i][j]
                };
                let mark = if graphical {
                    if selected[i][j] { "*" } else { "" }
                } else if summary.hpd.lo[i][j] > 0.0 || summary.hpd.hi[i][j] < 0.0 {
                    "*"
                } else {
                    ""
                };
                out.push_str(&format!(
                    "{:<18}",
                    format!("{:+.2} ({annotation}={:.2}){mark}", summary.r_hat[i][j], ann)
                ));
            }
        }
        out.push('\n');
    }
    out
}

fn cmd_fit(args: &FitArgs) -> Result<ExitCode, Error> {
    let tree = parse_newick(&fs::read_to_string(&args.tree)?)?;
    let traits = read_trait_csv(fs::File::open(&args.traits)?)?.align_to(&tree)?;
    let p = traits.n_traits();
    let spec = model_spec_from(args, p)?;
    let config = args.chain.to_config();
    println!(
        "effective config: model={} p={} taxa={} iterations={} warmup={} thin={} mc_samples={} seed={} gamma={}",
        args.model,
        p,
        tree.n_tips(),
        config.n_iterations,
        config.warmup,
        config.thin,
        config.mc_samples,
        args.seed,
        args.gamma
    );

    let trace = run_chain(&tree, &traits, &spec, &config, args.seed)?;
    let summary = summarize(&trace, args.gamma)?;

    fs::create_dir_all(&args.out)?;
    let trace_path = args.out.join(format!("{}_trace.csv", args.prefix));
    write_trace_csv(&trace, &trace_path)?;
    let summary_path = args.out.join(format!("{}_summary.json", args.prefix));
    fs::write(&summary_path, serde_json::to_string_pretty(&summary)?)?;
    write_provenance(
        &args.out.join(format!("{}.provenance.json", args.prefix)),
        args.seed,
        &format!("{args:?}"),
    )?;

    println!("\nestimated graph edges (trait pairs):");
    if summary.graph.is_empty() {
        println!("  (none)");
    }
    let labels = traits.trait_labels.clone();
    for &(i, j) in &summary.graph {
        println!("  {} -- {}", labels[i], labels[j]);
    }
    println!();
    print!("{}", render_correlogram(&summary, &labels, args.model == "graphical"));
    println!("\nwrote {} and {}", trace_path.display(), summary_path.display());
    Ok(ExitCode::SUCCESS)
}

fn cmd_summarize(args: &SummarizeArgs) -> Result<ExitCode, Error> {
    let trace: ChainTrace = read_trace_csv(&args.trace)?;
    let summary = summarize(&trace, args.gamma)?;
    let json = serde_json::to_string_pretty(&summary)?;
    if let Some(path) = &args.out {
        fs::write(path, &json)?;
        println!("wrote {}", path.display());
    } else {
        println!("{json}");
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_benchmark(args: &BenchmarkArgs) -> Result<ExitCode, Error> {
    let chain_config = ChainConfig::default();
    let mut spec = match args.scenario.as_str() {
        "sim1" => ScenarioSpec::sim1_desk(chain_config, args.seed)?,
        "sim2" => ScenarioSpec::sim2_desk(chain_config, args.seed)?,
        path => {
            let mut s = ScenarioSpec::from_toml_str(&fs::read_to_string(path)?)?;
            s.base_seed = args.seed;
            s
        }
    };
    if let Some(re) = args.replicates {
        spec.n_replicates = re;
    }
    if let Some(iters) = args.iterations {
        spec.chain_config.n_iterations = iters;
        spec.chain_config.warmup = iters / 5;
    }
    if let Some(mc) = args.mc_samples {
        spec.chain_config.mc_samples = mc;
    }
    println!(
        "effective config: scenario={} taxa={} p={} replicates={} iterations={} warmup={} thin={} mc_samples={} seed={} workers={}",
        spec.name,
        spec.n_taxa,
        spec.p(),
        spec.n_replicates,
        spec.chain_config.n_iterations,
        spec.chain_config.warmup,
        spec.chain_config.thin,
        spec.chain_config.mc_samples,
        spec.base_seed,
        args.workers
    );

    let report = run_scenario(&spec, args.workers)?;

    fs::create_dir_all(&args.out)?;
    let csv_path = args.out.join(format!("{}_report.csv", args.prefix));
    let mut csv_file = fs::File::create(&csv_path)?;
    write_report_csv(&mut csv_file, &report)?;
    let json_path = args.out.join(format!("{}_report.json", args.prefix));
    fs::write(&json_path, serde_json::to_string_pretty(&report)?)?;
    write_provenance(
        &args.out.join(format!("{}.provenance.json", args.prefix)),
        args.seed,
        &format!("{args:?}"),
    )?;

    print!("{}", render_report_text(&report));
    println!("wrote {} and {}", csv_path.display(), json_path.display());

    if args.strict {
        // Directional-reproduction check: graphical specificity must not
        // fall below the full model's HPD_90 specificity.
        let spec_of = |name: &str| {
            report
                .criteria
                .iter()
                .find(|c| c.criterion == name)
                .and_then(|c| c.specificity.as_ref())
                .map(|m| m.mean)
        };
        if let (Some(ggm), Some(hpd)) = (spec_of("GGM"), spec_of("HPD_90")) {
            if ggm < hpd {
                eprintln!(
                    "strict check failed: graphical specificity {ggm:.3} below HPD_90 specificity {hpd:.3}"
                );
                return Ok(ExitCode::from(EXIT_RUNTIME));
            }
        }
        // Graphical CI-I precision logMSE should undercut the full model's.
        let ci_i_mean = |model: &str| {
            report
                .logmse
                .iter()
                .find(|l| l.model == model && l.target == "precision" && l.category == "CI-I")
                .filter(|l| !l.values.is_empty())
                .map(|l| l.values.iter().sum::<f64>() / l.values.len() as f64)
        };
        match (ci_i_mean("graphical"), ci_i_mean("full")) {
            // All-exact graphical CI-I estimates trivially undercut any
            // finite full-model error, so None for graphical passes.
            (Some(g), Some(f)) if g >= f => {
                eprintln!(
                    "strict check failed: graphical CI-I precision logMSE {g:.3} not below full {f:.3}"
                );
                return Ok(ExitCode::from(EXIT_RUNTIME));
            }
            _ => {}
        }
    }

    let mut ranked: Vec<((usize, usize), f64)> = edge_pairs(spec.p()).zip(report.g_mc.iter().copied()).collect();
    ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap());
    println!("top Monte Carlo edge frequencies:");
    for ((i, j), freq) in ranked.into_iter().take(5) {
        println!("  ({}, {}): {:.2}", i + 1, j + 1, freq);
    }
    Ok(ExitCode::SUCCESS)
}
