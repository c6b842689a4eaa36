use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use sofic_bayes::hypothesis::DEFAULT_FLOOR;
use sofic_bayes::{
    build_even_process, draw_prior_ensemble, optimal_in_order, sample_path, HiddenMarkovSource,
    MarkovHypothesis,
};
use sofic_lab::config::{ConfigError, ExperimentConfig, Protocol, SourceChoice};
use sofic_lab::context::{checkpoints, derive_seed, stream, Lab};
use sofic_lab::record::{Check, Table};
use sofic_lab::row;
use sofic_lab::runner;

#[derive(Parser)]
#[command(
    name = "sofic-lab",
    version,
    about = "Bayesian updating over Markov hypotheses observing a sofic source"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Common {
    /// Key-value configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a configuration key, `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Path length T.
    #[arg(long)]
    t: Option<usize>,
    /// Ensemble size M.
    #[arg(long)]
    m: Option<usize>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    replicates: Option<usize>,
    /// `even` or a source file.
    #[arg(long)]
    source: Option<String>,
    /// Output directory (or file, for `simulate`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a path from the source; one line of 0/1 symbols.
    Simulate(Common),
    /// Tabulate h(θ) for listed hypotheses.
    Divergence {
        #[command(flatten)]
        common: Common,
        /// Hypothesis table file; repeatable. Defaults are always included.
        #[arg(long = "hypothesis")]
        hypotheses: Vec<PathBuf>,
        /// Additional draws from the configured prior.
        #[arg(long, default_value_t = 0)]
        prior_draws: usize,
    },
    /// Run ensemble updating, writing a trajectory and a final snapshot.
    Posterior(Common),
    /// Sieve reports.
    Sieve(Common),
    /// Theorem-by-theorem verification.
    Verify {
        #[command(flatten)]
        common: Common,
        /// 1-6, sieve, diversity, exact or all.
        #[arg(long, value_parser = Protocol::parse)]
        theorem: Option<Protocol>,
    },
    /// Every protocol.
    All(Common),
}

enum Failure {
    Config(String),
    Checks(Vec<Check>),
    Other(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Other(e)
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn load_config(common: &Common) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    for assignment in &common.set {
        cfg.apply_override(assignment)?;
    }
    let flags: [(&str, Option<String>); 6] = [
        ("horizon", common.t.map(|v| v.to_string())),
        ("members", common.m.map(|v| v.to_string())),
        ("seed", common.seed.map(|v| v.to_string())),
        ("replicates", common.replicates.map(|v| v.to_string())),
        ("source", common.source.clone()),
        (
            "output",
            common.out.as_ref().map(|p| p.display().to_string()),
        ),
    ];
    for (key, value) in flags {
        if let Some(v) = value {
            cfg.set(key, &v)
                .map_err(|m| ConfigError::plain(format!("--{key}: {m}")))?;
        }
    }
    Ok(cfg)
}

fn lab(cfg: ExperimentConfig) -> Result<Lab, Failure> {
    cfg.validate()?;
    Ok(Lab::new(cfg)?)
}

fn load_source(cfg: &ExperimentConfig) -> Result<HiddenMarkovSource> {
    match &cfg.source {
        SourceChoice::Even => Ok(build_even_process()),
        SourceChoice::File(p) => HiddenMarkovSource::from_file(p)
            .with_context(|| format!("loading source {}", p.display())),
    }
}

fn simulate(common: &Common) -> Result<(), Failure> {
    let cfg = load_config(common)?;
    let source = load_source(&cfg)?;
    let path = sample_path(&source, cfg.horizon, derive_seed(cfg.seed, stream::PATH));
    let out = common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("path.txt"));
    let mut text: String = path.iter().map(|&a| char::from(b'0' + a)).collect();
    if !text.is_empty() {
        text.push('\n');
    }
    write_file(&out, &text)?;
    Ok(())
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn divergence(common: &Common, files: &[PathBuf], prior_draws: usize) -> Result<(), Failure> {
    let lab = lab(load_config(common)?)?;
    let mut named = vec![("fair_coin".to_string(), MarkovHypothesis::fair_coin())];
    for k in 0..=4 {
        if let Ok(theta) = optimal_in_order(k, lab.source(), DEFAULT_FLOOR) {
            named.push((format!("optimal_order_{k}"), theta));
        }
    }
    for file in files {
        let text = fs::read_to_string(file)
            .with_context(|| format!("reading {}", file.display()))
            .map_err(Failure::Other)?;
        let theta = MarkovHypothesis::from_table(&text)
            .map_err(|e| Failure::Config(format!("{}: {e}", file.display())))?;
        named.push((file.display().to_string(), theta));
    }
    if prior_draws > 0 {
        let ens = draw_prior_ensemble(
            &lab.prior,
            prior_draws,
            derive_seed(lab.cfg.seed, stream::HYPOTHESES),
        );
        for (i, theta) in ens.members().iter().enumerate() {
            named.push((format!("prior_draw_{i}"), theta.clone()));
        }
    }
    let path = lab.path(lab.cfg.seed);
    let mut table = Table::new(
        "divergence.csv",
        &["hypothesis", "order", "h_bits", "method"],
    );
    for (name, theta) in &named {
        let (h, method) = match lab.summary.divergence(theta) {
            Ok(h) => (h, "exact"),
            Err(_) => (lab.divergence(theta, &path), "aep"),
        };
        table.push(row![name.as_str(), theta.order(), h, method]);
    }
    fs::create_dir_all(&lab.cfg.output).context("creating output directory")?;
    table.write(&lab.cfg.output)?;
    println!("wrote {}", lab.cfg.output.join("divergence.csv").display());
    Ok(())
}

fn posterior(common: &Common) -> Result<(), Failure> {
    let lab = lab(load_config(common)?)?;
    let seed = lab.cfg.seed;
    let path = lab.path(seed);
    let mut ens = draw_prior_ensemble(
        &lab.prior,
        lab.cfg.members,
        derive_seed(seed, stream::ENSEMBLE),
    );
    let times = checkpoints(path.len());
    let mut table = Table::new(
        format!("posterior_seed{seed}.csv"),
        &[
            "t",
            "log2_mean_likelihood",
            "map_member",
            "map_order",
            "map_weight",
            "predictive_p1",
            "intensity_of_selection",
        ],
    );
    let mut next = 0;
    for (i, &a) in path.iter().enumerate() {
        ens.update(a);
        if times.get(next) == Some(&(i + 1)) {
            next += 1;
            let map = ens.argmax();
            table.push(row![
                i + 1,
                ens.log2_mean_likelihood(),
                map,
                ens.members()[map].order(),
                ens.weights()[map],
                ens.predictive_dist().p(1),
                ens.intensity_of_selection()
            ]);
        }
    }
    let dir = &lab.cfg.output;
    fs::create_dir_all(dir).context("creating output directory")?;
    table.write(dir)?;
    let snap = dir.join(format!("posterior_snapshot_seed{seed}.txt"));
    write_file(&snap, &ens.to_snapshot())?;
    println!(
        "wrote {} and {}",
        dir.join(&table.name).display(),
        snap.display()
    );
    Ok(())
}

fn verify(common: &Common, protocol: Option<Protocol>) -> Result<(), Failure> {
    let mut cfg = load_config(common)?;
    if let Some(p) = protocol {
        cfg.protocol = p;
    }
    let lab = lab(cfg)?;
    let report = runner::run(&lab)?;
    let passed = report.checks.iter().filter(|c| c.pass).count();
    println!(
        "{} checks, {} passed; records in {}",
        report.checks.len(),
        passed,
        report.dir.display()
    );
    for c in report.checks.iter().filter(|c| c.heuristic && !c.pass) {
        println!(
            "review: {} seed {} measured {} reference {}",
            c.criterion, c.seed, c.measured, c.reference
        );
    }
    let failures: Vec<Check> = report.failures().into_iter().cloned().collect();
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure::Checks(failures))
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(c) => simulate(c),
        Command::Divergence {
            common,
            hypotheses,
            prior_draws,
        } => divergence(common, hypotheses, *prior_draws),
        Command::Posterior(c) => posterior(c),
        Command::Sieve(c) => verify(c, Some(Protocol::Sieve)),
        Command::Verify { common, theorem } => verify(common, *theorem),
        Command::All(c) => verify(c, Some(Protocol::All)),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("config error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Checks(failures)) => {
            eprintln!("{} tolerance check(s) failed:", failures.len());
            for c in failures {
                eprintln!(
                    "  {} seed {}: measured {} reference {} tolerance {}",
                    c.criterion, c.seed, c.measured, c.reference, c.tolerance
                );
            }
            ExitCode::from(1)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {}", anyhow!(e));
            ExitCode::from(1)
        }
    }
}
