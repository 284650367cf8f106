//! `modelcmp`: compare models evaluated by cross-validation over many
//! datasets.
//!
//! Exit codes: 0 success, 2 usage, configuration or data error, 3 I/O error.

use std::fs;
use std::path::{Component, Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use modelcmp::bayes::{compare_pair, draw_thetas, BayesAnalysis, ThetaMode};
use modelcmp::config::Format;
use modelcmp::plot::{simplex_plot, SimplexPoint};
use modelcmp::report::{bayes_section, friedman_section, naive_section, run_bayes, sha256_hex};
use modelcmp::sim::{coverage_experiment, null_calibration, GenSpec};
use modelcmp::{parse_results_csv, Error, PerfTable, ReportBundle, RunConfig};

#[derive(Parser)]
#[command(name = "modelcmp", version, about = "Naive, rank-test and Bayesian comparison of cross-validated models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check that the input is a complete, well-formed results grid.
    Validate(RunArgs),
    /// Best overall mean.
    Naive(RunArgs),
    /// Friedman test, Nemenyi post-hoc and CD diagram.
    Friedman(RunArgs),
    /// Hierarchical Bayesian comparison of every pair.
    Bayes(RunArgs),
    /// All three methods and their families side by side.
    Report(RunArgs),
    /// Calibration experiments on synthetic data.
    #[command(subcommand)]
    Simulate(Simulate),
}

#[derive(Subcommand)]
enum Simulate {
    /// Type-I error of the Friedman test and the naive method on null tables.
    Null(NullArgs),
    /// Credible-interval coverage and decision rates of the Bayesian model.
    Coverage(CoverageArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ThetaArg {
    Predictive,
    Mu0,
}

/// Flags override values read from `--config`, which override defaults.
#[derive(Args)]
struct RunArgs {
    /// TOML file with run settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Long-format results CSV.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Column names as value,resample,dataset,model; join several dataset
    /// columns with `+`.
    #[arg(long)]
    columns: Option<String>,
    /// Metric label used in reports.
    #[arg(long)]
    metric: Option<String>,
    #[arg(long)]
    lower_is_better: bool,
    /// Allow values outside [0, 1].
    #[arg(long)]
    unbounded: bool,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    rope: Option<f64>,
    #[arg(long)]
    threshold: Option<f64>,
    /// Correlation between fold estimates.
    #[arg(long, conflicts_with = "cv_train_frac")]
    rho: Option<f64>,
    /// Training share of each fold; sets rho = test/train.
    #[arg(long)]
    cv_train_frac: Option<f64>,
    #[arg(long)]
    chains: Option<usize>,
    /// Retained draws summed over chains.
    #[arg(long)]
    draws: Option<usize>,
    #[arg(long)]
    burn_in: Option<usize>,
    #[arg(long, value_enum)]
    theta: Option<ThetaArg>,
    /// Master seed; MODELCMP_SEED is used when neither this flag nor the
    /// config file sets one.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Any of json, md, svg.
    #[arg(long, value_delimiter = ',')]
    format: Option<Vec<String>>,
    /// Worker threads; defaults to all cores.
    #[arg(long)]
    jobs: Option<usize>,
    /// Build the NHST family even if the omnibus test retains.
    #[arg(long)]
    force_posthoc: bool,
    /// Draw posterior simplex plots for pairs `x:y` (repeatable), or `all`.
    #[arg(long = "simplex", value_delimiter = ',')]
    simplex: Vec<String>,
}

#[derive(Args)]
struct NullArgs {
    #[arg(long, default_value_t = 20)]
    datasets: usize,
    #[arg(long, default_value_t = 5)]
    models: usize,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 1000)]
    runs: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, env = "MODELCMP_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "modelcmp-out")]
    out: PathBuf,
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct CoverageArgs {
    #[arg(long, default_value_t = 20)]
    datasets: usize,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    mu0: f64,
    #[arg(long, default_value_t = 0.01)]
    sigma0: f64,
    #[arg(long, default_value_t = 5.0)]
    nu: f64,
    /// σ_i is drawn uniformly from (0.5, 1.5) times this.
    #[arg(long, default_value_t = 0.02)]
    sigma_scale: f64,
    #[arg(long, default_value_t = 0.1)]
    rho: f64,
    #[arg(long, default_value_t = 200)]
    runs: usize,
    #[arg(long, default_value_t = 0.01)]
    rope: f64,
    #[arg(long, default_value_t = 0.95)]
    threshold: f64,
    #[arg(long, default_value_t = 4)]
    chains: usize,
    #[arg(long, default_value_t = 50_000)]
    draws: usize,
    #[arg(long, default_value_t = 2_500)]
    burn_in: usize,
    #[arg(long, env = "MODELCMP_SEED", default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "modelcmp-out")]
    out: PathBuf,
    #[arg(long)]
    jobs: Option<usize>,
}

enum Failure {
    Usage(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) => Failure::Io(e.to_string()),
            other => Failure::Usage(other.to_string()),
        }
    }
}

type Outcome<T = ()> = std::result::Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Validate(a) => cmd_validate(&a),
        Command::Naive(a) => cmd_naive(&a),
        Command::Friedman(a) => cmd_friedman(&a),
        Command::Bayes(a) => cmd_bayes(&a),
        Command::Report(a) => cmd_report(&a),
        Command::Simulate(Simulate::Null(a)) => cmd_null(&a),
        Command::Simulate(Simulate::Coverage(a)) => cmd_coverage(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn resolve_config(a: &RunArgs) -> Outcome<RunConfig> {
    let (mut cfg, file_sets_seed) = match &a.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
            let keys: toml::Table = text.parse().map_err(|e| usage(format!("{}: {e}", path.display())))?;
            (RunConfig::from_toml_str(&text)?, keys.contains_key("seed"))
        }
        None => (RunConfig::default(), false),
    };
    if let Some(v) = &a.input {
        cfg.input = Some(v.clone());
    }
    if let Some(v) = &a.columns {
        cfg.columns = v.clone();
    }
    if let Some(v) = &a.metric {
        cfg.metric = v.clone();
    }
    if a.lower_is_better {
        cfg.higher_is_better = false;
    }
    if a.unbounded {
        cfg.bounded = false;
    }
    macro_rules! take {
        ($($flag:ident => $field:ident),*) => {
            $(if let Some(v) = a.$flag { cfg.$field = v; })*
        };
    }
    take!(alpha => alpha, rope => rope, threshold => threshold, chains => chains, draws => total_draws, burn_in => burn_in);
    if a.rho.is_some() {
        cfg.rho = a.rho;
        cfg.cv_train_frac = None;
    }
    if a.cv_train_frac.is_some() {
        cfg.cv_train_frac = a.cv_train_frac;
        cfg.rho = None;
    }
    if let Some(t) = a.theta {
        cfg.theta_mode = match t {
            ThetaArg::Predictive => ThetaMode::Predictive,
            ThetaArg::Mu0 => ThetaMode::Mu0,
        };
    }
    match a.seed {
        Some(s) => cfg.seed = s,
        None if !file_sets_seed => {
            if let Ok(s) = std::env::var("MODELCMP_SEED") {
                cfg.seed = s.trim().parse().map_err(|_| usage(format!("MODELCMP_SEED `{s}` is not an unsigned integer")))?;
            }
        }
        None => {}
    }
    if let Some(v) = &a.out {
        cfg.out = v.clone();
    }
    if let Some(fs) = &a.format {
        cfg.formats = fs.iter().map(|f| f.parse()).collect::<Result<Vec<Format>, _>>()?;
        cfg.formats.sort();
        cfg.formats.dedup();
    }
    if a.jobs.is_some() {
        cfg.jobs = a.jobs;
    }
    if a.force_posthoc {
        cfg.force_posthoc = true;
    }
    if !a.simplex.is_empty() {
        cfg.simplex_pairs = a.simplex.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Reads and validates the input grid; returns it with the SHA-256 of the
/// file's bytes.
fn load_table(cfg: &RunConfig) -> Outcome<(PerfTable, String)> {
    let path = cfg.input.as_ref().ok_or_else(|| usage("no input file given (use --input)"))?;
    let bytes = fs::read(path).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))?;
    let table = parse_results_csv(&bytes[..], &cfg.mapping()?, &cfg.metric_spec())?;
    Ok((table, sha256_hex(&bytes)))
}

/// Output directory; every write goes to a plain file name inside it.
struct OutDir {
    root: PathBuf,
}

impl OutDir {
    fn create(root: &Path) -> Outcome<OutDir> {
        fs::create_dir_all(root).map_err(|e| Failure::Io(format!("{}: {e}", root.display())))?;
        Ok(OutDir { root: root.to_path_buf() })
    }

    fn write(&self, name: &str, contents: &str) -> Outcome {
        let mut parts = Path::new(name).components();
        let plain = matches!((parts.next(), parts.next()), (Some(Component::Normal(_)), None));
        if !plain {
            return Err(usage(format!("refusing to write `{name}` outside the output directory")));
        }
        let path = self.root.join(name);
        fs::write(&path, contents).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
    }
}

fn family_line(method: &str, members: Option<&[String]>) {
    match members {
        Some(m) => println!("{method} family ({}): {}", m.len(), m.join(", ")),
        None => println!("{method} family: undefined"),
    }
}

fn emit(cfg: &RunConfig, stem: &str, bundle: &ReportBundle, figures: bool) -> Outcome {
    let out = OutDir::create(&cfg.out)?;
    if cfg.wants(Format::Json) {
        out.write(&format!("{stem}.json"), &bundle.to_json()?)?;
    }
    if cfg.wants(Format::Md) {
        out.write(&format!("{stem}.md"), &bundle.to_markdown())?;
    }
    if figures && cfg.wants(Format::Svg) {
        for (name, svg) in bundle.figures() {
            out.write(&name, &svg)?;
        }
    }
    Ok(())
}

fn cmd_validate(a: &RunArgs) -> Outcome {
    let cfg = resolve_config(a)?;
    let (t, digest) = load_table(&cfg)?;
    println!(
        "valid: {} datasets, {} models, {} folds per dataset (sha256 {digest})",
        t.n_datasets(),
        t.n_models(),
        t.n_folds()
    );
    Ok(())
}

fn cmd_naive(a: &RunArgs) -> Outcome {
    let cfg = resolve_config(a)?;
    let (t, digest) = load_table(&cfg)?;
    let naive = naive_section(&t)?;
    if let Some(tie) = &naive.tie {
        return Err(Error::NaiveTie(tie.clone()).into());
    }
    let family = naive.family.clone().expect("no tie, so a winner");
    let bundle = ReportBundle::assemble(&t, digest, &cfg, naive, None, None);
    emit(&cfg, "naive", &bundle, false)?;
    family_line("naive", Some(&family.members));
    Ok(())
}

fn cmd_friedman(a: &RunArgs) -> Outcome {
    let cfg = resolve_config(a)?;
    let (t, digest) = load_table(&cfg)?;
    let f = friedman_section(&t, cfg.alpha, cfg.force_posthoc)?;
    println!(
        "friedman: statistic {:.6}, dof {}, p = {:.6e}; CD = {:.4} (q = {:.6})",
        f.statistic, f.dof, f.p_value, f.cd, f.q_alpha
    );
    if f.family.is_none() {
        println!("omnibus test retained at alpha = {}; use --force-posthoc to build the family anyway", cfg.alpha);
    }
    family_line("nhst", f.family.as_ref().map(|x| x.members.as_slice()));
    let bundle = ReportBundle::assemble(&t, digest, &cfg, naive_section(&t)?, Some(f), None);
    emit(&cfg, "friedman", &bundle, true)
}

fn bayes_part(t: &PerfTable, cfg: &RunConfig) -> Outcome<BayesAnalysis> {
    let analysis = run_bayes(t, cfg)?;
    if !analysis.unreliable.is_empty() {
        eprintln!(
            "warning: {} pairs failed the convergence check and were left undecided",
            analysis.unreliable.len()
        );
    }
    Ok(analysis)
}

fn cmd_bayes(a: &RunArgs) -> Outcome {
    let cfg = resolve_config(a)?;
    let (t, digest) = load_table(&cfg)?;
    let analysis = bayes_part(&t, &cfg)?;
    let section = bayes_section(&t, &analysis, cfg.rope, cfg.rho()?, cfg.theta_mode);
    family_line("bayes", Some(&section.family.members));
    let bundle = ReportBundle::assemble(&t, digest, &cfg, naive_section(&t)?, None, Some(section));
    emit(&cfg, "bayes", &bundle, true)?;
    simplex_plots(&t, &cfg)
}

fn cmd_report(a: &RunArgs) -> Outcome {
    let cfg = resolve_config(a)?;
    let (t, digest) = load_table(&cfg)?;
    let analysis = bayes_part(&t, &cfg)?;
    let bundle = ReportBundle::build(&t, digest, &cfg, Some(&analysis))?;
    family_line("naive", bundle.families.naive.as_deref());
    family_line("nhst", bundle.families.nhst.as_deref());
    family_line("bayes", bundle.families.bayes.as_deref());
    emit(&cfg, "report", &bundle, true)?;
    simplex_plots(&t, &cfg)
}

fn file_safe(s: &str) -> String {
    s.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' }).collect()
}

fn pool(jobs: Option<usize>) -> Outcome<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        b = b.num_threads(n);
    }
    b.build().map_err(|e| usage(e.to_string()))
}

/// Reruns the requested pairs (same seeds as the matrix) and plots their
/// per-draw θ.
fn simplex_plots(t: &PerfTable, cfg: &RunConfig) -> Outcome {
    if cfg.simplex_pairs.is_empty() || !cfg.wants(Format::Svg) {
        return Ok(());
    }
    let models = t.models();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    for p in &cfg.simplex_pairs {
        if p == "all" {
            pairs.extend((0..models.len()).flat_map(|i| (i + 1..models.len()).map(move |j| (i, j))));
            continue;
        }
        let (x, y) = p.split_once(':').expect("validated");
        let find = |m: &str| t.model_index(m).ok_or_else(|| Failure::from(Error::UnknownModel(m.to_string())));
        let (i, j) = (find(x)?, find(y)?);
        if i == j {
            return Err(Error::SameModel(x.to_string()).into());
        }
        pairs.push((i, j));
    }
    pairs.dedup();
    let (bayes, _) = cfg.bayes_config()?;
    let out = OutDir::create(&cfg.out)?;
    use rayon::prelude::*;
    let plots: Vec<Outcome<(String, String)>> = pool(cfg.jobs)?.install(|| {
        pairs
            .par_iter()
            .map(|&(i, j)| {
                let post = compare_pair(t, &models[i], &models[j], &bayes, cfg.seed)?;
                let points: Vec<SimplexPoint> = draw_thetas(&post.chains, cfg.rope, usize::MAX)
                    .into_iter()
                    .map(SimplexPoint::from)
                    .collect();
                let name = format!("simplex_{:03}_{:03}_{}_vs_{}.svg", i + 1, j + 1, file_safe(&models[i]), file_safe(&models[j]));
                Ok((name, simplex_plot(&points, cfg.rope, &models[i], &models[j])))
            })
            .collect()
    });
    for plot in plots {
        let (name, svg) = plot?;
        out.write(&name, &svg)?;
    }
    Ok(())
}

fn write_json<T: serde::Serialize>(out: &Path, name: &str, value: &T) -> Outcome {
    let text = serde_json::to_string_pretty(value).map_err(|e| usage(e.to_string()))? + "\n";
    OutDir::create(out)?.write(name, &text)
}

fn cmd_null(a: &NullArgs) -> Outcome {
    if a.jobs == Some(0) {
        return Err(usage("jobs must be at least 1"));
    }
    let summary = pool(a.jobs)?.install(|| null_calibration(a.datasets, a.models, a.folds, a.runs, a.alpha, a.seed))?;
    println!(
        "friedman rejection rate {:.4}; naive unique best {:.4} ({} runs)",
        summary.friedman_rejection_rate, summary.naive_unique_best_rate, summary.runs
    );
    write_json(&a.out, "null_calibration.json", &summary)
}

fn cmd_coverage(a: &CoverageArgs) -> Outcome {
    if a.jobs == Some(0) {
        return Err(usage("jobs must be at least 1"));
    }
    let spec = GenSpec {
        n_datasets: a.datasets,
        n_folds: a.folds,
        mu_0: a.mu0,
        sigma_0: a.sigma0,
        nu: a.nu,
        sigma_i_scale: a.sigma_scale,
        rho: a.rho,
        seed: a.seed,
    };
    let run_cfg = RunConfig {
        rope: a.rope,
        threshold: a.threshold,
        rho: Some(a.rho),
        chains: a.chains,
        total_draws: a.draws,
        burn_in: a.burn_in,
        ..RunConfig::default()
    };
    run_cfg.validate()?;
    let (bayes, _) = run_cfg.bayes_config()?;
    let summary = pool(a.jobs)?.install(|| coverage_experiment(&spec, a.runs, &bayes))?;
    println!(
        "coverage {:.4}; converged {:.4}; decided {:.4}; mean p_rope {:.4} ({} runs, {} failures)",
        summary.coverage,
        summary.converged_fraction,
        summary.decided_fraction,
        summary.mean_p_rope,
        summary.runs,
        summary.failures
    );
    write_json(&a.out, "coverage.json", &summary)
}
