//! Subcommand implementations. Every command is pure with respect to its
//! declared inputs and outputs; reruns on identical inputs are
//! byte-identical.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use blognet::centrality::{self, CentralityBundle, PageRankParams};
use blognet::features::{self, AttractivenessClass, Term};
use blognet::graph::{self, BlogId, BlogNetwork};
use blognet::mnlogit;
use blognet::netgen::{self, GenParams};
use blognet::report::{self, Locale};

use crate::config::PipelineConfig;
use crate::{CentralityArgs, ClassifyArgs, DelineateArgs, FitArgs, NetgenArgs, ReportArgs};

/// Writes through a closure either to a file or to standard output.
fn write_output(
    path: Option<&Path>,
    write: impl FnOnce(&mut dyn Write) -> anyhow::Result<()>,
) -> anyhow::Result<()> {
    match path {
        Some(path) => {
            let mut out = BufWriter::new(
                File::create(path).with_context(|| format!("creating {}", path.display()))?,
            );
            write(&mut out)?;
            out.flush()?;
            Ok(())
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)
        }
    }
}

fn load_network(path: &Path) -> anyhow::Result<BlogNetwork> {
    let loaded = graph::load_edge_list(path)
        .with_context(|| format!("loading edge list {}", path.display()))?;
    Ok(loaded.network)
}

/// Runs `body` inside a rayon pool of the requested size; 0 keeps the
/// default pool. Numeric results do not depend on the pool size.
fn with_threads<T>(threads: usize, body: impl FnOnce() -> T + Send) -> anyhow::Result<T>
where
    T: Send,
{
    if threads == 0 {
        Ok(body())
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .context("building thread pool")?;
        Ok(pool.install(body))
    }
}

pub fn delineate(args: DelineateArgs) -> anyhow::Result<u8> {
    let net = load_network(&args.edges)?;
    let seed = BlogId::new(args.seed_blog.as_str()).context("seed blog id")?;
    let sub = graph::delineate_snowball_depth(&net, &seed, args.depth)?;
    if sub.edge_count() == 0 {
        log::warn!("subnetwork has no edges; the output lists no rows");
    }
    write_output(args.output.as_deref(), |out| {
        graph::write_edge_list(&sub, out)?;
        Ok(())
    })?;
    eprintln!(
        "delineated {} of {} blogs, {} edges",
        sub.node_count(),
        net.node_count(),
        sub.edge_count()
    );
    Ok(0)
}

pub fn centrality(args: CentralityArgs) -> anyhow::Result<u8> {
    let mut net = load_network(&args.edges)?;
    if args.symmetrize {
        net = net.symmetrize();
    }
    let params = PageRankParams {
        damping: args.damping,
        max_iterations: args.max_iterations,
        tolerance: args.tolerance,
    };
    let (bundle, mean_distance) = with_threads(args.threads, || {
        let bundle = CentralityBundle::compute(&net, &params);
        let mean_distance = centrality::mean_reachable_distance(&net);
        (bundle, mean_distance)
    })?;
    let bundle = bundle?;
    write_output(args.output.as_deref(), |out| {
        centrality::write_centrality_csv(&bundle, out)?;
        Ok(())
    })?;

    let mean_in = net.edge_count() as f64 / net.node_count() as f64;
    eprintln!("mean in-degree {mean_in:.3}, mean reachable distance {mean_distance:.3}");

    let meta = bundle.pagerank_raw.meta().expect("pagerank meta");
    if !meta.converged {
        eprintln!(
            "pagerank did not converge: residual {:e} after {} iterations",
            meta.residual, meta.iterations
        );
        return Ok(2);
    }
    Ok(0)
}

pub fn classify(args: ClassifyArgs) -> anyhow::Result<u8> {
    let records = features::load_attributes(&args.attributes)?;
    let visits: Vec<(BlogId, u64)> = records
        .iter()
        .map(|r| (r.blog_id.clone(), r.visits_6mo))
        .collect();
    let classes = features::classify_attractiveness(&visits)?;
    write_output(args.output.as_deref(), |out| {
        writeln!(out, "blog_id,class")?;
        for (blog, class) in &classes {
            writeln!(out, "{blog},{class}")?;
        }
        Ok(())
    })?;
    Ok(0)
}

fn parse_baseline(token: &str) -> anyhow::Result<AttractivenessClass> {
    AttractivenessClass::ALL
        .into_iter()
        .find(|c| c.token().eq_ignore_ascii_case(token))
        .with_context(|| format!("unknown class {token:?}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Formats {
    json: bool,
    csv: bool,
    text: bool,
}

fn parse_formats(spec: &str) -> anyhow::Result<Formats> {
    let mut formats = Formats { json: false, csv: false, text: false };
    for token in spec.split(',') {
        match token.trim().to_ascii_lowercase().as_str() {
            "json" => formats.json = true,
            "csv" => formats.csv = true,
            "text" => formats.text = true,
            "" => {}
            other => bail!("unknown format {other:?} (expected json, csv or text)"),
        }
    }
    Ok(formats)
}

pub fn fit(args: FitArgs) -> anyhow::Result<u8> {
    let config = match &args.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };

    let edges = args
        .edges
        .or(config.edges)
        .context("an edge list is required (--edges or config `edges`)")?;
    let attributes = args
        .attributes
        .or(config.attributes)
        .context("attributes are required (--attributes or config `attributes`)")?;
    let output_dir = args
        .output_dir
        .or(config.output_dir)
        .unwrap_or_else(|| PathBuf::from("."));
    let seed_blog = args.seed_blog.or(config.seed_blog);
    let depth = args.depth.or(config.depth).unwrap_or(1);
    let params = PageRankParams {
        damping: args.damping.or(config.damping).unwrap_or(0.85),
        max_iterations: args.max_iterations.or(config.max_iterations).unwrap_or(200),
        tolerance: args.tolerance.or(config.tolerance).unwrap_or(1e-12),
    };
    let term_spec = args
        .terms
        .or(config.terms)
        .unwrap_or_else(|| "table2".to_owned());
    let baseline = parse_baseline(
        &args
            .baseline
            .or(config.baseline)
            .unwrap_or_else(|| "very_low".to_owned()),
    )?;
    let symmetrize = args.symmetrize || config.symmetrize.unwrap_or(false);
    let zscore = args.zscore || config.zscore.unwrap_or(false);
    let threads = args.threads.or(config.threads).unwrap_or(0);
    let locale = if args.locale_comma || config.locale_comma.unwrap_or(false) {
        Locale::Comma
    } else {
        Locale::Point
    };
    let allow_unconverged = args.allow_unconverged || config.allow_unconverged.unwrap_or(false);
    let formats = parse_formats(
        &args
            .formats
            .or(config.formats)
            .unwrap_or_else(|| "json,csv,text".to_owned()),
    )?;

    let mut net = load_network(&edges)?;
    if let Some(seed) = &seed_blog {
        let seed = BlogId::new(seed.as_str()).context("seed blog id")?;
        net = graph::delineate_snowball_depth(&net, &seed, depth)?;
    }
    if symmetrize {
        net = net.symmetrize();
    }
    let records = features::load_attributes(&attributes)?;
    let terms = Term::parse_list(&term_spec)?;

    let outcome = with_threads(threads, || -> anyhow::Result<_> {
        let bundle = CentralityBundle::compute(&net, &params)?;
        let mut dm = features::build_design_matrix(&bundle, &records, &terms)?;
        if zscore {
            dm.zscore();
        }
        if let Some(path) = &args.dump_design {
            let mut out = BufWriter::new(
                File::create(path).with_context(|| format!("creating {}", path.display()))?,
            );
            dm.write_csv(&mut out)?;
            out.flush()?;
        }

        // epv_check logs its own warning when the ratio is below ten.
        let epv = mnlogit::epv_check(&dm);
        if !epv.warn {
            eprintln!(
                "events per parameter {:.1} (smallest class {}, {} parameters per equation)",
                epv.epv, epv.smallest_class_count, epv.params_per_equation
            );
        }

        let fitted = mnlogit::fit(&dm, baseline, &mnlogit::FitOptions::default())?;
        Ok(fitted)
    })??;
    let fitted = outcome;

    if !fitted.converged && !allow_unconverged {
        eprintln!(
            "fit did not converge after {} iterations (log-likelihood {:.6}); \
             pass --allow-unconverged to export anyway",
            fitted.iterations, fitted.log_likelihood
        );
        return Ok(2);
    }
    let rows = if fitted.converged {
        mnlogit::inference(&fitted)?
    } else {
        mnlogit::inference_unchecked(&fitted)
    };

    std::fs::create_dir_all(&output_dir)
        .with_context(|| format!("creating {}", output_dir.display()))?;
    if formats.json {
        write_output(Some(&output_dir.join("fit.json")), |out| {
            report::export_json(&fitted, &rows, out)?;
            Ok(())
        })?;
    }
    if formats.csv {
        write_output(Some(&output_dir.join("report.csv")), |out| {
            report::export_csv(&rows, out)?;
            Ok(())
        })?;
    }
    if formats.text {
        let table = report::build_table(&fitted, &rows)?;
        write_output(Some(&output_dir.join("report.txt")), |out| {
            out.write_all(report::render_table(&table, locale).as_bytes())?;
            Ok(())
        })?;
    }

    eprintln!(
        "fit {} after {} iterations, log-likelihood {:.6}, outputs in {}",
        if fitted.converged { "converged" } else { "did not converge" },
        fitted.iterations,
        fitted.log_likelihood,
        output_dir.display()
    );
    Ok(if fitted.converged { 0 } else { 2 })
}

pub fn netgen(args: NetgenArgs) -> anyhow::Result<u8> {
    let params = GenParams::new(args.nodes, args.out_links, args.rng_seed);
    let net = if args.uniform {
        netgen::generate_uniform_network(&params)?
    } else {
        netgen::generate_pa_network(&params)?
    };
    let data = netgen::generate_attributes_and_outcome(&net, &params)?;

    std::fs::create_dir_all(&args.output_dir)
        .with_context(|| format!("creating {}", args.output_dir.display()))?;
    write_output(Some(&args.output_dir.join("edges.csv")), |out| {
        graph::write_edge_list(&net, out)?;
        Ok(())
    })?;
    write_output(Some(&args.output_dir.join("attributes.csv")), |out| {
        features::write_attributes(&data.attributes, out)?;
        Ok(())
    })?;
    write_output(Some(&args.output_dir.join("truth.json")), |out| {
        netgen::write_truth_json(&data.truth, out)?;
        Ok(())
    })?;
    eprintln!(
        "generated {} blogs, {} edges, {} rebalance moves; outputs in {}",
        net.node_count(),
        net.edge_count(),
        data.truth.rebalance_moves,
        args.output_dir.display()
    );
    Ok(0)
}

pub fn report(args: ReportArgs) -> anyhow::Result<u8> {
    let text = std::fs::read_to_string(&args.fit)
        .with_context(|| format!("reading {}", args.fit.display()))?;
    let export = report::import_json(&text)?;
    let locale = if args.locale_comma { Locale::Comma } else { Locale::Point };
    match args.format.to_ascii_lowercase().as_str() {
        "text" => {
            let table = report::build_table(&export.fit, &export.inference)?;
            write_output(args.output.as_deref(), |out| {
                out.write_all(report::render_table(&table, locale).as_bytes())?;
                Ok(())
            })?;
        }
        "csv" => {
            write_output(args.output.as_deref(), |out| {
                report::export_csv(&export.inference, out)?;
                Ok(())
            })?;
        }
        other => bail!("unknown format {other:?} (expected text or csv)"),
    }
    Ok(0)
}
