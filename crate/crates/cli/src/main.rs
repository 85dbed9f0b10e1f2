//! `blognet` — structural-capital analytics for directed blog
//! recommendation networks.
//!
//! Exit codes: 0 success, 1 input/validation error, 2 numerical
//! non-convergence. Logs go to standard error; data goes to files or
//! standard output.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "blognet", version, about = "Blog-network structural-capital analytics")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
#[allow(clippy::large_enum_variant)] // parsed once at startup
enum Command {
    /// Cut the egocentric subnetwork around a seed blog.
    Delineate(DelineateArgs),
    /// Compute degree, closeness, betweenness and PageRank for every blog.
    Centrality(CentralityArgs),
    /// Bin blogs into the five attractiveness classes by visit counts.
    Classify(ClassifyArgs),
    /// Run the full pipeline: classify, build the design matrix, fit the
    /// multinomial model and write reports.
    Fit(FitArgs),
    /// Generate a synthetic preferential-attachment dataset with a known
    /// outcome model.
    Netgen(NetgenArgs),
    /// Re-render reports from a saved fit JSON.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct DelineateArgs {
    /// Edge-list CSV (header `source_id,target_id`).
    #[arg(long)]
    edges: PathBuf,
    /// Seed blog id; the subnetwork keeps it plus everything it cites.
    #[arg(long)]
    seed_blog: String,
    /// Degrees of separation to expand over out-edges.
    #[arg(long, default_value_t = 1)]
    depth: usize,
    /// Output edge-list CSV; standard output when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CentralityArgs {
    /// Edge-list CSV (header `source_id,target_id`).
    #[arg(long)]
    edges: PathBuf,
    /// PageRank damping factor, in (0, 1).
    #[arg(long, default_value_t = 0.85)]
    damping: f64,
    /// PageRank iteration cap.
    #[arg(long, default_value_t = 200)]
    max_iterations: usize,
    /// PageRank stopping tolerance on the max per-node change.
    #[arg(long, default_value_t = 1e-12)]
    tolerance: f64,
    /// Turn every edge into a mutual pair before computing.
    #[arg(long)]
    symmetrize: bool,
    /// Worker threads; 0 lets rayon decide. Results do not depend on this.
    #[arg(long, default_value_t = 0)]
    threads: usize,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    /// Attributes CSV (header
    /// `blog_id,visits_6mo,experience_years,profession,posts_7d,replied_to_readers`).
    #[arg(long)]
    attributes: PathBuf,
    /// Output CSV (`blog_id,class`); standard output when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// JSON config with flat keys; flags override config values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Edge-list CSV.
    #[arg(long)]
    edges: Option<PathBuf>,
    /// Attributes CSV.
    #[arg(long)]
    attributes: Option<PathBuf>,
    /// Directory for fit.json / report.csv / report.txt.
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Delineate around this seed blog before fitting.
    #[arg(long)]
    seed_blog: Option<String>,
    /// Snowball depth used with --seed-blog.
    #[arg(long)]
    depth: Option<usize>,
    /// PageRank damping factor.
    #[arg(long)]
    damping: Option<f64>,
    /// PageRank iteration cap.
    #[arg(long)]
    max_iterations: Option<usize>,
    /// PageRank stopping tolerance.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Term list: the preset `table2` or comma-separated tokens such as
    /// `intercept,ce,cc,te_x_pr`.
    #[arg(long)]
    terms: Option<String>,
    /// Baseline outcome class (default very_low).
    #[arg(long)]
    baseline: Option<String>,
    /// Turn every edge into a mutual pair before computing centralities.
    #[arg(long)]
    symmetrize: bool,
    /// Z-score the non-intercept regressors.
    #[arg(long)]
    zscore: bool,
    /// Worker threads; 0 lets rayon decide. Results do not depend on this.
    #[arg(long)]
    threads: Option<usize>,
    /// Print commas as the decimal separator in the text report.
    #[arg(long)]
    locale_comma: bool,
    /// Export even when the fit hit the iteration cap.
    #[arg(long)]
    allow_unconverged: bool,
    /// Comma-separated outputs to write: any of json,csv,text.
    #[arg(long)]
    formats: Option<String>,
    /// Also dump the design matrix as CSV to this path.
    #[arg(long)]
    dump_design: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct NetgenArgs {
    /// Node count; must exceed --out-links.
    #[arg(long)]
    nodes: usize,
    /// Directed edges added by each new node.
    #[arg(long, default_value_t = 3)]
    out_links: usize,
    /// 64-bit seed; all randomness flows from it.
    #[arg(long, default_value_t = 7)]
    rng_seed: u64,
    /// Directory for edges.csv, attributes.csv and truth.json.
    #[arg(long)]
    output_dir: PathBuf,
    /// Grow with uniform attachment instead of preferential.
    #[arg(long)]
    uniform: bool,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// fit.json produced by the fit subcommand.
    #[arg(long)]
    fit: PathBuf,
    /// Output format: text or csv.
    #[arg(long, default_value = "text")]
    format: String,
    /// Print commas as the decimal separator in the text report.
    #[arg(long)]
    locale_comma: bool,
    /// Output path; standard output when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn"))
        .format_timestamp(None)
        .init();

    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Delineate(args) => commands::delineate(args),
        Command::Centrality(args) => commands::centrality(args),
        Command::Classify(args) => commands::classify(args),
        Command::Fit(args) => commands::fit(args),
        Command::Netgen(args) => commands::netgen(args),
        Command::Report(args) => commands::report(args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
