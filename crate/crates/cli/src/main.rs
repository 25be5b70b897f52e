use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use revevo::limits::{predict_limit, LimitPrediction};
use revevo_cli::oracle_report::oracle_reports;
use revevo_cli::{compare_to_prediction, run_suite, write_outputs, CliError, CliResult, ExperimentConfig, FrequencyHistogram};

#[derive(Parser)]
#[command(name = "revevo", version, about = "Run and check reversible evolutionary chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Each flag overrides the config key of the same name. Values are TOML
/// literals: `--n "[100, 1000]"`, `--kernel breed_many`, `--lambda 0.5`.
#[derive(Args, Default)]
struct Overrides {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    alleles: Option<String>,
    #[arg(long)]
    loci: Option<String>,
    #[arg(long = "base_alpha")]
    base_alpha: Option<String>,
    #[arg(long)]
    phi: Option<String>,
    #[arg(long)]
    lambda: Option<String>,
    #[arg(long = "prior_scaling")]
    prior_scaling: Option<String>,
    #[arg(long)]
    n: Option<String>,
    #[arg(long)]
    kernel: Option<String>,
    #[arg(long)]
    rule: Option<String>,
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    t: Option<String>,
    #[arg(long)]
    steps: Option<String>,
    #[arg(long = "burn_in")]
    burn_in: Option<String>,
    #[arg(long)]
    thinning: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    bins: Option<String>,
    #[arg(long)]
    replicates: Option<String>,
    #[arg(long = "record_locus")]
    record_locus: Option<String>,
    #[arg(long = "record_allele")]
    record_allele: Option<String>,
    #[arg(long = "luck_values")]
    luck_values: Option<String>,
    #[arg(long = "luck_probs")]
    luck_probs: Option<String>,
    #[arg(long = "niche_weights")]
    niche_weights: Option<String>,
    #[arg(long)]
    threshold: Option<String>,
    #[arg(long = "output_dir")]
    output_dir: Option<String>,
    #[arg(long)]
    trajectory: Option<String>,
    #[arg(long)]
    threads: Option<String>,
}

impl Overrides {
    fn pairs(&self) -> Vec<(String, String)> {
        let fields: [(&str, &Option<String>); 26] = [
            ("alleles", &self.alleles),
            ("loci", &self.loci),
            ("base_alpha", &self.base_alpha),
            ("phi", &self.phi),
            ("lambda", &self.lambda),
            ("prior_scaling", &self.prior_scaling),
            ("n", &self.n),
            ("kernel", &self.kernel),
            ("rule", &self.rule),
            ("m", &self.m),
            ("t", &self.t),
            ("steps", &self.steps),
            ("burn_in", &self.burn_in),
            ("thinning", &self.thinning),
            ("seed", &self.seed),
            ("bins", &self.bins),
            ("replicates", &self.replicates),
            ("record_locus", &self.record_locus),
            ("record_allele", &self.record_allele),
            ("luck_values", &self.luck_values),
            ("luck_probs", &self.luck_probs),
            ("niche_weights", &self.niche_weights),
            ("threshold", &self.threshold),
            ("output_dir", &self.output_dir),
            ("trajectory", &self.trajectory),
            ("threads", &self.threads),
        ];
        fields.iter().filter_map(|(k, v)| v.as_ref().map(|v| (k.to_string(), v.clone()))).collect()
    }

    fn load(&self) -> CliResult<ExperimentConfig> {
        ExperimentConfig::load_with_overrides(self.config.as_deref(), &self.pairs())
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the chains, write histograms and summary.json
    Run(Overrides),
    /// Print the limit prediction as JSON
    Predict {
        #[command(flatten)]
        cfg: Overrides,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact stationary law and balance checks for small n
    Oracle {
        #[command(flatten)]
        cfg: Overrides,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare a histogram CSV with a prediction JSON
    Compare {
        #[command(flatten)]
        cfg: Overrides,
        #[arg(long)]
        histogram: PathBuf,
        #[arg(long)]
        prediction: PathBuf,
    },
}

fn to_json<T: serde::Serialize>(v: &T) -> CliResult<String> {
    serde_json::to_string_pretty(v).map_err(|e| CliError::Internal(e.to_string()))
}

fn execute(cmd: Command) -> CliResult<()> {
    match cmd {
        Command::Run(o) => {
            let cfg = o.load()?;
            let result = run_suite(&cfg)?;
            if let Some(dir) = &cfg.output_dir {
                for p in write_outputs(&result, dir)? {
                    eprintln!("wrote {}", p.display());
                }
            }
            emit(&to_json(&result.summary)?);
            if !result.summary.all_pass() {
                return Err(CliError::Comparison("some runs missed the prediction".into()));
            }
        }
        Command::Predict { cfg, out } => {
            let cfg = cfg.load()?;
            let json = to_json(&predict_limit(&cfg.limit_problem()?)?)?;
            match out {
                Some(p) => std::fs::write(p, json + "\n")?,
                None => emit(&json),
            }
        }
        Command::Oracle { cfg, out } => {
            let cfg = cfg.load()?;
            emit(&to_json(&oracle_reports(&cfg, out.as_deref())?)?);
        }
        Command::Compare { cfg, histogram, prediction } => {
            let cfg = cfg.load()?;
            let f = std::fs::File::open(&histogram)?;
            let hist = FrequencyHistogram::read_csv(std::io::BufReader::new(f))?;
            let pred: LimitPrediction = serde_json::from_str(&std::fs::read_to_string(&prediction)?)
                .map_err(|e| CliError::Config(format!("{}: {e}", prediction.display())))?;
            let m = pred.marginal(cfg.space()?, cfg.record_locus, cfg.record_allele, hist.bins())?;
            let report = compare_to_prediction(&hist, &m, None, cfg.threshold)?;
            emit(&to_json(&report)?);
            if !report.pass {
                return Err(CliError::Comparison(format!("distance {:.6}", report.distance)));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let outcome = std::panic::catch_unwind(|| execute(cli.command));
    match outcome {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
        Err(_) => ExitCode::from(3),
    }
}

/// Prints to stdout, treating a closed pipe as a normal end of output.
fn emit(s: &str) {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    if let Err(e) = writeln!(out, "{s}") {
        if e.kind() != std::io::ErrorKind::BrokenPipe {
            eprintln!("error: {e}");
        }
    }
}
