use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use relexplain::pipeline::{self, ClassFilter, GeneratorChoice, RunConfig, Stage};

/// Reliability of feature attributions on unbalanced tabular data.
#[derive(Debug, Parser)]
#[command(name = "relexplain", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// TOML run configuration; defaults apply to anything it leaves out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Run directory holding every artifact.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Comma-separated method tags: ig, deeplift, lrp, ensemble.
    #[arg(long, global = true, value_delimiter = ',')]
    methods: Option<Vec<String>>,
    #[arg(long, global = true, value_enum)]
    generator: Option<GeneratorArg>,
    #[arg(long, global = true, value_enum)]
    classes: Option<ClassesArg>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum GeneratorArg {
    Medoid,
    Gaussian,
    Both,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ClassesArg {
    Minority,
    Both,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw the synthetic dataset, or ingest the configured CSV.
    Synth,
    /// Group-stratified train/validation/test split.
    Split,
    /// Train the classifier and report F1 per class and split.
    Train,
    /// Build the validation medoid index.
    BuildIndex,
    /// Measure class preservation over the lambda grid.
    TuneLambda,
    /// Score test points for every method and generator.
    Evaluate,
    /// Write the markdown summary of a finished run.
    Report,
    /// All stages in order.
    Run,
    /// Print the resolved configuration as TOML.
    ShowConfig,
}

type StageFn = fn(&RunConfig) -> Result<(), relexplain::Error>;

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_STAGE: u8 = 3;
const EXIT_TUNING: u8 = 4;

fn resolve(common: &Common) -> Result<RunConfig, relexplain::Error> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    if let Some(methods) = &common.methods {
        cfg.explain.methods = methods.clone();
    }
    if let Some(g) = common.generator {
        cfg.evaluate.generator = match g {
            GeneratorArg::Medoid => GeneratorChoice::Medoid,
            GeneratorArg::Gaussian => GeneratorChoice::Gaussian,
            GeneratorArg::Both => GeneratorChoice::Both,
        };
    }
    if let Some(c) = common.classes {
        cfg.evaluate.classes = match c {
            ClassesArg::Minority => ClassFilter::Minority,
            ClassesArg::Both => ClassFilter::Both,
        };
    }
    cfg.validate()?;
    Ok(cfg)
}

fn fail(stage: &str, err: &relexplain::Error) -> ExitCode {
    eprintln!("error: stage {stage} failed: {err}");
    ExitCode::from(if err.is_data_error() {
        EXIT_DATA
    } else {
        EXIT_STAGE
    })
}

fn tuning_summary(t: &pipeline::TuningOutcome, threshold: f64) -> Option<ExitCode> {
    for r in &t.rows {
        println!(
            "lambda {:<6} acceptance {:.4} ({} / {}){}",
            r.lambda,
            r.rate,
            r.accepted,
            r.attempted,
            if r.chosen { "  <- chosen" } else { "" }
        );
    }
    match t.chosen {
        Some(_) => None,
        None => {
            let best = t.rows.iter().max_by(|a, b| a.rate.total_cmp(&b.rate));
            if let Some(b) = best {
                eprintln!(
                    "warning: no lambda reached acceptance {threshold}; best was lambda {} at {:.4}",
                    b.lambda, b.rate
                );
            }
            Some(ExitCode::from(EXIT_TUNING))
        }
    }
}

fn run(cli: Cli) -> ExitCode {
    let cfg = match resolve(&cli.common) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    };
    let stage = |s: Stage| s.name();
    let out = cfg.out_dir.display();
    match cli.command {
        Command::ShowConfig => {
            print!("{}", cfg.to_toml_string());
        }
        Command::Synth => match pipeline::synth(&cfg) {
            Ok(d) => println!(
                "wrote {} rows ({} minority) to {out}",
                d.len(),
                d.minority_count()
            ),
            Err(e) => return fail(stage(Stage::Synth), &e),
        },
        Command::Split => match pipeline::split(&cfg) {
            Ok(s) => println!(
                "train {} / val {} / test {}",
                s.train.len(),
                s.val.len(),
                s.test.len()
            ),
            Err(e) => return fail(stage(Stage::Split), &e),
        },
        Command::Train => match pipeline::train(&cfg) {
            Ok(rows) => {
                for r in rows {
                    println!(
                        "{:<5} class {} F1 {:.3} (support {})",
                        r.split, r.class, r.f1, r.support
                    );
                }
            }
            Err(e) => return fail(stage(Stage::Train), &e),
        },
        Command::BuildIndex => match pipeline::build_index(&cfg) {
            Ok(idx) => println!("{} medoids", idx.len()),
            Err(e) => return fail(stage(Stage::BuildIndex), &e),
        },
        Command::TuneLambda => match pipeline::tune_lambda(&cfg) {
            Ok(t) => {
                if let Some(code) = tuning_summary(&t, cfg.perturb.min_acceptance) {
                    return code;
                }
            }
            Err(e) => return fail(stage(Stage::TuneLambda), &e),
        },
        Command::Evaluate => match pipeline::evaluate(&cfg) {
            Ok(o) => println!(
                "{} points, {} scores, {} exclusions",
                o.n_points,
                o.scores.len(),
                o.exclusions.len()
            ),
            Err(e) => return fail(stage(Stage::Evaluate), &e),
        },
        Command::Report => match pipeline::report(&cfg) {
            Ok(text) => print!("{text}"),
            Err(e) => return fail(stage(Stage::Report), &e),
        },
        Command::Run => {
            let steps: [(Stage, StageFn); 4] = [
                (Stage::Synth, |c| pipeline::synth(c).map(drop)),
                (Stage::Split, |c| pipeline::split(c).map(drop)),
                (Stage::Train, |c| pipeline::train(c).map(drop)),
                (Stage::BuildIndex, |c| pipeline::build_index(c).map(drop)),
            ];
            for (s, f) in steps {
                if let Err(e) = f(&cfg) {
                    return fail(stage(s), &e);
                }
            }
            let warn = match pipeline::tune_lambda(&cfg) {
                Ok(t) => tuning_summary(&t, cfg.perturb.min_acceptance),
                Err(e) => return fail(stage(Stage::TuneLambda), &e),
            };
            if let Err(e) = pipeline::evaluate(&cfg) {
                return fail(stage(Stage::Evaluate), &e);
            }
            match pipeline::report(&cfg) {
                Ok(_) => println!("report written to {out}"),
                Err(e) => return fail(stage(Stage::Report), &e),
            }
            if let Some(code) = warn {
                return code;
            }
        }
    }
    ExitCode::SUCCESS
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    run(cli)
}
