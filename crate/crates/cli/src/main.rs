//! `dcp` command-line front end.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use dcp_core::io::{
    generate_synthetic, load_csv, parse_indices, parse_trace, read_partition, write_csv,
    write_trace, CsvOptions, InputSource, Manifest, RunConfig, Scenario, SyntheticSpec,
};
use dcp_core::metrics::{
    adjusted_rand_index_on, normalized_mutual_information_on, summarize_partitions, KMeans,
    NMI_VARIANT,
};
use dcp_core::partition::canonicalize;
use dcp_core::rng::{stream, Stream};
use dcp_core::sampler::{exact_posterior, run_inference, LogNormalPrior};
use dcp_core::{DataSet, KernelParams, LabelConstraints, Partition, SamplerConfig};

const RNG_SCHEME: &str = "chacha8; streams data=1 chain=2 proposal=3 baseline=4";

#[derive(Parser)]
#[command(
    name = "dcp",
    version,
    about = "Determinantal clustering process sampler"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset with its ground truth.
    Synth(SynthArgs),
    /// Sample the partition posterior.
    Fit(FitArgs),
    /// Score partitions or a trace against a ground truth.
    Eval(EvalArgs),
    /// Exact posterior over every partition of a small dataset.
    Enumerate(EnumerateArgs),
    /// Fit k-means and score it.
    BaselineKmeans(KmeansArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioArg {
    OverlapPair,
    MultiModal,
    Blobs,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Self {
        match s {
            ScenarioArg::OverlapPair => Scenario::OverlapPair,
            ScenarioArg::MultiModal => Scenario::MultiModal,
            ScenarioArg::Blobs => Scenario::Blobs,
        }
    }
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, value_enum, conflicts_with = "spec")]
    scenario: Option<ScenarioArg>,
    /// JSON synthetic spec overriding the pinned defaults.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV.
    #[arg(long)]
    out: PathBuf,
    /// Ground-truth partition file.
    #[arg(long)]
    truth: PathBuf,
    /// File listing the held-out (scored) row indices.
    #[arg(long)]
    test_indices: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Se,
    Delta,
}

#[derive(Args)]
struct KernelOpts {
    #[arg(long, value_enum, default_value = "se")]
    kernel: KernelArg,
    /// Initial lengthscales, comma separated; a single value is shared by
    /// every dimension.
    #[arg(long, value_delimiter = ',', default_value = "1.0")]
    lengthscale: Vec<f64>,
    /// Diagonal value of the delta kernel.
    #[arg(long, default_value_t = 1.0)]
    delta_value: f64,
    #[arg(long, default_value_t = 1.0)]
    temperature: f64,
}

impl KernelOpts {
    fn params(&self, dim: usize) -> Result<KernelParams, CliError> {
        let p = match self.kernel {
            KernelArg::Delta => KernelParams::delta(self.delta_value, self.temperature),
            KernelArg::Se => {
                let ls = match self.lengthscale.as_slice() {
                    [one] => vec![*one; dim],
                    many => many.to_vec(),
                };
                KernelParams::squared_exponential(ls, self.temperature)
            }
        };
        p.map_err(CliError::usage)
    }
}

#[derive(Args)]
struct FitArgs {
    /// Run config or manifest JSON; replaces every other option.
    #[arg(long, conflicts_with_all = ["input", "output_dir"])]
    config: Option<PathBuf>,
    /// Input CSV.
    #[arg(long, required_unless_present = "config")]
    input: Option<PathBuf>,
    #[arg(long, required_unless_present = "config")]
    output_dir: Option<PathBuf>,
    #[arg(long, default_value = "label")]
    label_column: String,
    #[arg(long)]
    truth_column: Option<String>,
    /// Ground-truth partition file over the input rows.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// Rows to score (default: unlabeled rows).
    #[arg(long)]
    test_indices: Option<PathBuf>,
    #[command(flatten)]
    kernel: KernelOpts,
    #[arg(long, default_value_t = 2000)]
    n_sweeps: usize,
    #[arg(long, default_value_t = 500)]
    burn_in: usize,
    #[arg(long, default_value_t = 1)]
    thin: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Keep the kernel parameters and temperature fixed.
    #[arg(long)]
    fixed_hyperparameters: bool,
    /// Keep only the temperature fixed.
    #[arg(long)]
    fixed_temperature: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    truth: PathBuf,
    /// Single partition file.
    #[arg(long, required_unless_present = "trace", conflicts_with = "trace")]
    partition: Option<PathBuf>,
    /// Trace CSV; scores are averaged over its rows.
    #[arg(long)]
    trace: Option<PathBuf>,
    #[arg(long)]
    test_indices: Option<PathBuf>,
}

#[derive(Args)]
struct EnumerateArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "label")]
    label_column: String,
    #[command(flatten)]
    kernel: KernelOpts,
}

#[derive(Args)]
struct KmeansArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "label")]
    label_column: String,
    #[arg(long)]
    truth: Option<PathBuf>,
    #[arg(long)]
    test_indices: Option<PathBuf>,
    /// Where to write the fitted partition.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(dcp_core::Error),
}

impl CliError {
    fn usage(e: impl std::fmt::Display) -> Self {
        CliError::Usage(e.to_string())
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl From<dcp_core::Error> for CliError {
    fn from(e: dcp_core::Error) -> Self {
        CliError::Runtime(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.into())
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(e) => write!(f, "error: {e}"),
        }
    }
}

type CliResult<T = ()> = Result<T, CliError>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Fit(a) => fit(a),
        Command::Eval(a) => eval(a),
        Command::Enumerate(a) => enumerate(a),
        Command::BaselineKmeans(a) => baseline_kmeans(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("dcp: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(dcp_core::Error::from)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn print_json<T: Serialize>(value: &T) -> CliResult {
    let text = serde_json::to_string_pretty(value).map_err(dcp_core::Error::from)?;
    println!("{text}");
    Ok(())
}

fn read_indices(path: &Path) -> CliResult<Vec<usize>> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(parse_indices(&text)?)
}

fn write_indices(path: &Path, indices: &[usize]) -> CliResult {
    let mut w = create(path)?;
    for i in indices {
        writeln!(w, "{i}")?;
    }
    w.flush()?;
    Ok(())
}

fn write_partition(path: &Path, p: &Partition) -> CliResult {
    let mut w = create(path)?;
    writeln!(w, "{p}")?;
    w.flush()?;
    Ok(())
}

fn check_indices(indices: &[usize], n: usize) -> CliResult {
    match indices.iter().find(|&&i| i >= n) {
        Some(i) => Err(CliError::usage(format!(
            "index {i} out of range for {n} rows"
        ))),
        None => Ok(()),
    }
}

fn check_len(p: &Partition, n: usize, what: &str) -> CliResult {
    if p.len() != n {
        return Err(CliError::usage(format!(
            "{what} covers {} points, expected {n}",
            p.len()
        )));
    }
    Ok(())
}

fn synth(a: SynthArgs) -> CliResult {
    let spec = match (&a.spec, a.scenario) {
        (Some(path), _) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<SyntheticSpec>(&text).map_err(CliError::usage)?
        }
        (None, Some(s)) => SyntheticSpec::default_for(s.into(), a.seed),
        (None, None) => return Err(CliError::usage("one of --scenario or --spec is required")),
    };
    spec.validate().map_err(CliError::usage)?;
    let s = generate_synthetic(&spec)?;
    write_csv(create(&a.out)?, &s.data)?;
    write_partition(&a.truth, &s.truth)?;
    if let Some(path) = &a.test_indices {
        write_indices(path, &s.test_indices)?;
    }
    Ok(())
}

/// Input rows after loading, with everything needed to map back to them.
struct Prepared {
    data: DataSet,
    expansion: Vec<usize>,
    truth: Option<Partition>,
    test_indices: Vec<usize>,
}

impl Prepared {
    fn num_rows(&self) -> usize {
        self.expansion.len()
    }
}

fn prepare(cfg: &RunConfig) -> CliResult<Prepared> {
    let (data, expansion, mut truth, default_test) = match &cfg.input {
        InputSource::Csv { path, csv } => {
            let loaded = load_csv(path, csv)?;
            let truth = loaded.truth.as_deref().map(canonicalize);
            let unlabeled: Vec<usize> = loaded
                .expansion
                .iter()
                .enumerate()
                .filter(|(_, &rep)| loaded.data.labels()[rep].is_none())
                .map(|(row, _)| row)
                .collect();
            (loaded.data, loaded.expansion, truth, unlabeled)
        }
        InputSource::Synthetic { spec } => {
            let s = generate_synthetic(spec)?;
            let n = s.data.len();
            (s.data, (0..n).collect(), Some(s.truth), s.test_indices)
        }
    };
    let n = expansion.len();
    if let Some(path) = &cfg.truth {
        let p = read_partition(path)?;
        check_len(&p, n, "truth")?;
        truth = Some(p);
    }
    let test_indices = match &cfg.test_indices {
        Some(path) => read_indices(path)?,
        None => default_test,
    };
    check_indices(&test_indices, n)?;
    Ok(Prepared {
        data,
        expansion,
        truth,
        test_indices,
    })
}

fn fit_config(a: FitArgs) -> CliResult<RunConfig> {
    if let Some(path) = &a.config {
        let cfg = RunConfig::load(path).map_err(CliError::usage)?;
        return Ok(cfg);
    }
    let input = a.input.expect("required by clap");
    let csv = CsvOptions {
        label_column: a.label_column,
        truth_column: a.truth_column,
    };
    // Dimension is needed to broadcast a single lengthscale.
    let dim = load_csv(&input, &csv)?.data.dim();
    let sampler = SamplerConfig {
        n_sweeps: a.n_sweeps,
        burn_in: a.burn_in,
        thin: a.thin,
        seed: a.seed,
        learn_hyperparameters: !a.fixed_hyperparameters,
        sample_temperature: !a.fixed_temperature,
        ..Default::default()
    };
    Ok(RunConfig {
        input: InputSource::Csv { path: input, csv },
        kernel: a.kernel.params(dim)?,
        prior: LogNormalPrior::default(),
        sampler,
        output_dir: a.output_dir.expect("required by clap"),
        truth: a.truth,
        test_indices: a.test_indices,
    })
}

fn fit(a: FitArgs) -> CliResult {
    let cfg = fit_config(a)?;
    cfg.validate().map_err(CliError::usage)?;
    let prep = prepare(&cfg)?;
    cfg.kernel
        .check_dim(prep.data.dim())
        .map_err(CliError::usage)?;

    let trace = run_inference(&prep.data, &cfg.kernel, &cfg.prior, &cfg.sampler)?;

    fs::create_dir_all(&cfg.output_dir)?;
    let mut w = create(&cfg.output_dir.join("trace.csv"))?;
    write_trace(&mut w, &trace, Some(&prep.expansion))?;
    w.flush()?;

    if trace.is_empty() {
        eprintln!("dcp: no post-burn-in samples; summary.json not written");
    } else {
        let rows: Vec<Partition> = trace
            .samples
            .iter()
            .map(|s| s.partition.expand(&prep.expansion))
            .collect();
        let mut summary =
            summarize_partitions(&rows, prep.truth.as_ref(), Some(&prep.test_indices))?;
        summary.hyper_acceptance_rate = trace.acceptance_rate();
        summary.degenerate_moves = trace.degenerate_moves;
        write_json(&cfg.output_dir.join("summary.json"), &summary)?;
    }

    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        num_rows: prep.num_rows(),
        num_points: prep.data.len(),
        dim: prep.data.dim(),
        num_labeled: prep.data.len() - prep.data.unlabeled().len(),
        test_indices: prep.test_indices.clone(),
        nmi_variant: NMI_VARIANT.to_string(),
        rng: RNG_SCHEME.to_string(),
        config: cfg.clone(),
    };
    write_json(&cfg.output_dir.join("manifest.json"), &manifest)?;
    Ok(())
}

#[derive(Serialize)]
struct Scores {
    num_partitions: usize,
    num_scored: usize,
    mean_ari: f64,
    mean_nmi: f64,
    nmi_variant: &'static str,
}

fn score(partitions: &[Partition], truth: &Partition, indices: &[usize]) -> CliResult<Scores> {
    if partitions.is_empty() {
        return Err(CliError::usage("nothing to score"));
    }
    let (mut ari, mut nmi) = (0.0, 0.0);
    for p in partitions {
        check_len(p, truth.len(), "partition")?;
        ari += adjusted_rand_index_on(p, truth, indices)?;
        nmi += normalized_mutual_information_on(p, truth, indices)?;
    }
    let m = partitions.len() as f64;
    Ok(Scores {
        num_partitions: partitions.len(),
        num_scored: indices.len(),
        mean_ari: ari / m,
        mean_nmi: nmi / m,
        nmi_variant: NMI_VARIANT,
    })
}

fn eval(a: EvalArgs) -> CliResult {
    let truth = read_partition(&a.truth)?;
    let partitions = match (&a.partition, &a.trace) {
        (Some(p), _) => vec![read_partition(p)?],
        (None, Some(t)) => {
            let file = File::open(t)
                .map_err(|e| CliError::usage(format!("cannot open {}: {e}", t.display())))?;
            parse_trace(file)?
                .into_iter()
                .map(|r| r.partition)
                .collect()
        }
        (None, None) => unreachable!("enforced by clap"),
    };
    let indices = match &a.test_indices {
        Some(path) => read_indices(path)?,
        None => (0..truth.len()).collect(),
    };
    check_indices(&indices, truth.len())?;
    print_json(&score(&partitions, &truth, &indices)?)
}

#[derive(Serialize)]
struct EnumeratedPartition {
    assignment: String,
    probability: f64,
}

#[derive(Serialize)]
struct Enumeration {
    num_rows: usize,
    num_points: usize,
    log_normalizer: f64,
    partitions: Vec<EnumeratedPartition>,
}

fn enumerate(a: EnumerateArgs) -> CliResult {
    let csv = CsvOptions {
        label_column: a.label_column,
        truth_column: None,
    };
    let loaded = load_csv(&a.input, &csv)?;
    let params = a.kernel.params(loaded.data.dim())?;
    params
        .check_dim(loaded.data.dim())
        .map_err(CliError::usage)?;
    let constraints = LabelConstraints::from_labels(loaded.data.labels());
    let post = exact_posterior(&loaded.data, &params, params.temperature, &constraints)?;
    let partitions = post
        .entries()
        .iter()
        .map(|(p, prob)| EnumeratedPartition {
            assignment: p.expand(&loaded.expansion).to_string(),
            probability: *prob,
        })
        .collect();
    print_json(&Enumeration {
        num_rows: loaded.num_rows(),
        num_points: loaded.data.len(),
        log_normalizer: post.log_normalizer(),
        partitions,
    })
}

#[derive(Serialize)]
struct KmeansReport {
    k: usize,
    seed: u64,
    iterations: usize,
    inertia: f64,
    assignment: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    scores: Option<Scores>,
}

fn baseline_kmeans(a: KmeansArgs) -> CliResult {
    let csv = CsvOptions {
        label_column: a.label_column,
        truth_column: None,
    };
    let loaded = load_csv(&a.input, &csv)?;
    if a.k == 0 || a.k > loaded.data.len() {
        return Err(CliError::usage(format!(
            "k must lie in 1..={} (distinct points)",
            loaded.data.len()
        )));
    }
    let mut rng = stream(a.seed, Stream::Baseline);
    let fitted = KMeans::new(a.k).fit(&loaded.data.without_labels(), &mut rng)?;
    let rows = fitted.partition.expand(&loaded.expansion);
    if let Some(path) = &a.out {
        write_partition(path, &rows)?;
    }
    let scores = match &a.truth {
        None => None,
        Some(path) => {
            let truth = read_partition(path)?;
            check_len(&truth, rows.len(), "truth")?;
            let indices = match &a.test_indices {
                Some(p) => read_indices(p)?,
                None => loaded
                    .expansion
                    .iter()
                    .enumerate()
                    .filter(|(_, &rep)| loaded.data.labels()[rep].is_none())
                    .map(|(row, _)| row)
                    .collect(),
            };
            check_indices(&indices, rows.len())?;
            Some(score(std::slice::from_ref(&rows), &truth, &indices)?)
        }
    };
    print_json(&KmeansReport {
        k: a.k,
        seed: a.seed,
        iterations: fitted.iterations,
        inertia: fitted.inertia.last().copied().unwrap_or(0.0),
        assignment: rows.to_string(),
        scores,
    })
}
