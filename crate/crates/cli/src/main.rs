use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use deptopo_core::conllu::PunctPolicy;
use deptopo_core::pipeline::RunConfig;

mod stages;

#[derive(Parser, Debug)]
#[command(name = "deptopo", version, about = "Topological efficiency of dependency trees")]
struct Cli {
    /// key=value file; flags given on the command line take precedence
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory
    #[arg(long, global = true, env = "DEPTOPO_OUT")]
    out: Option<PathBuf>,

    #[command(flatten)]
    run: RunArgs,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Default)]
struct RunArgs {
    /// Global seed
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Weight of h_ks against h_deg in the fitness
    #[arg(long, global = true)]
    rho: Option<f64>,
    /// Standard deviation of the selection noise
    #[arg(long, global = true)]
    sigma: Option<f64>,
    /// Optimizer generations
    #[arg(long, global = true)]
    epochs: Option<usize>,
    /// Trees optimized per language
    #[arg(long, global = true)]
    population: Option<usize>,
    /// Epochs between trajectory rows
    #[arg(long, global = true)]
    record_every: Option<usize>,
    /// Bootstrap replicates for the zero baseline
    #[arg(long, global = true)]
    reps: Option<usize>,
    /// Attachment exponent for every language instead of the estimate
    #[arg(long, global = true)]
    alpha_override: Option<f64>,
    /// Comma-separated exponents for the sweep
    #[arg(long, global = true)]
    alpha_grid: Option<String>,
    /// Smallest sentence kept, in words
    #[arg(long, global = true)]
    min_len: Option<usize>,
    /// Largest sentence kept, in words
    #[arg(long, global = true)]
    max_len: Option<usize>,
    /// Sentences kept per language
    #[arg(long, global = true)]
    cap: Option<usize>,
    /// Languages with fewer eligible sentences are skipped
    #[arg(long, global = true)]
    min_sentences: Option<usize>,
    /// reattach or discard
    #[arg(long, global = true)]
    punct_policy: Option<PunctPolicy>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Tabulate the entropy extrema for sizes 2..=n_max
    Extrema {
        #[arg(long, default_value_t = 50)]
        n_max: usize,
    },
    /// Read the treebanks, sample sentences and measure them
    Measure(CorpusArgs),
    /// Size-matched uniform random trees for every measured sentence
    Baseline {
        /// Real measures (default: <out>/real_measures.csv)
        #[arg(long)]
        real: Option<PathBuf>,
    },
    /// Run the hill climber on a sample of each language's uniform trees
    Optimize {
        /// Uniform trees (default: <out>/uniform_trees.csv)
        #[arg(long)]
        baseline: Option<PathBuf>,
    },
    /// Size-matched preferential-attachment trees
    Pa {
        #[arg(long)]
        real: Option<PathBuf>,
        /// Also compute the divergence for each exponent of the grid
        #[arg(long)]
        sweep: bool,
    },
    /// Compare the real measures with the synthetic ones
    Compare {
        #[arg(long)]
        real: Option<PathBuf>,
        /// NAME=FILE, repeatable (default: every baseline found in <out>)
        #[arg(long = "synthetic", value_name = "NAME=FILE")]
        synthetic: Vec<String>,
    },
    /// Every stage in order
    All {
        #[command(flatten)]
        corpus: CorpusArgs,
        #[arg(long)]
        sweep: bool,
    },
}

#[derive(Args, Debug, Clone)]
struct CorpusArgs {
    /// Manifest listing `language<TAB>file...`
    #[arg(long, conflicts_with = "ud_root")]
    manifest: Option<PathBuf>,
    /// Universal Dependencies release directory holding UD_* folders
    #[arg(long)]
    ud_root: Option<PathBuf>,
}

impl RunArgs {
    fn apply(&self, config: &mut RunConfig) -> deptopo_core::Result<()> {
        macro_rules! put {
            ($($field:ident),*) => {
                $(if let Some(v) = &self.$field { config.set(stringify!($field), &v.to_string())?; })*
            };
        }
        put!(
            seed,
            rho,
            sigma,
            epochs,
            population,
            record_every,
            reps,
            alpha_override,
            alpha_grid,
            min_len,
            max_len,
            cap,
            min_sentences
        );
        if let Some(p) = self.punct_policy {
            config.punct_policy = p;
        }
        Ok(())
    }
}

fn build_config(cli: &Cli) -> Result<RunConfig> {
    let mut config = RunConfig::default();
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        config.apply_file(&text).with_context(|| format!("in {}", path.display()))?;
    }
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    cli.run.apply(&mut config)?;
    if let Command::Measure(c) | Command::All { corpus: c, .. } = &cli.command {
        if let Some(m) = &c.manifest {
            config.manifest = Some(m.clone());
        }
    }
    config.validate()?;
    Ok(config)
}

fn stage_name(command: &Command) -> &'static str {
    match command {
        Command::Extrema { .. } => "extrema",
        Command::Measure(_) => "measure",
        Command::Baseline { .. } => "baseline",
        Command::Optimize { .. } => "optimize",
        Command::Pa { .. } => "pa",
        Command::Compare { .. } => "compare",
        Command::All { .. } => "all",
    }
}

fn execute(cli: &Cli) -> Result<()> {
    let config = build_config(cli)?;
    let ctx = stages::Context::new(config)?;
    match &cli.command {
        Command::Extrema { n_max } => ctx.extrema(*n_max),
        Command::Measure(c) => ctx.measure(c.ud_root.as_deref()),
        Command::Baseline { real } => ctx.baseline(real.as_deref()),
        Command::Optimize { baseline } => ctx.optimize(baseline.as_deref()),
        Command::Pa { real, sweep } => ctx.pa(real.as_deref(), *sweep),
        Command::Compare { real, synthetic } => ctx.compare(real.as_deref(), synthetic),
        Command::All { corpus, sweep } => {
            ctx.measure(corpus.ud_root.as_deref())?;
            ctx.baseline(None)?;
            ctx.optimize(None)?;
            ctx.pa(None, *sweep)?;
            ctx.compare(None, &[])
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let report = serde_json::json!({
                "status": "error",
                "stage": stage_name(&cli.command),
                "message": e.to_string(),
                "causes": e.chain().skip(1).map(|c| c.to_string()).collect::<Vec<_>>(),
            });
            eprintln!("{report}");
            ExitCode::FAILURE
        }
    }
}
