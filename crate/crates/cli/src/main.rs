use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use disc::corpus::{compute_stats, load_dataset, split};
use disc::evaluation::{categorize_errors, correlate_train_count_vs_sa, evaluate, write_error_review};
use disc::pipeline::{predict, train, Checkpoint, Config, EpochRecord, PredictOptions};
use disc::synthetic::{generate, toy_config, write_toy_setup, SyntheticSpec};
use disc::tagger::{read_predictions, write_predictions};
use disc::{Dataset, SplitMode, SplitSpec};

#[derive(Parser)]
#[command(name = "disc", version, about = "Idiomatic expression identification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model from a key=value config file.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Suppress per-epoch progress lines.
        #[arg(long)]
        quiet: bool,
    },
    /// Tag a dataset with a trained checkpoint and write a prediction dump.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Contextual cache covering the input, if not the training one.
        #[arg(long)]
        contextual_cache: Option<PathBuf>,
        #[arg(long)]
        static_embeddings: Option<PathBuf>,
    },
    /// Score a prediction dump against gold data.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        by_type: bool,
        #[arg(long)]
        by_fixedness: bool,
        /// List categorized errors; with a path, also write them there as JSONL.
        #[arg(long, num_args = 0..=1, value_name = "PATH")]
        errors: Option<Option<PathBuf>>,
        /// Training file, to correlate per-type training counts with SA.
        #[arg(long)]
        train: Option<PathBuf>,
        /// Print the report as JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Split a dataset into train and test files.
    Split {
        #[command(flatten)]
        split: SplitArgs,
        #[arg(long)]
        out_train: PathBuf,
        #[arg(long)]
        out_test: PathBuf,
    },
    /// Dataset statistics for a train/test pair, given directly or split on the fly.
    Stats {
        #[arg(long, requires = "test", conflicts_with = "input")]
        train: Option<PathBuf>,
        #[arg(long, requires = "train")]
        test: Option<PathBuf>,
        #[command(flatten)]
        split: OptionalSplitArgs,
        #[arg(long)]
        json: bool,
    },
    /// Write a generated corpus with toy resources and a ready config.
    Synth {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 50)]
        sentences: usize,
        #[arg(long, default_value_t = 10)]
        types: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Random,
    #[value(name = "type_aware")]
    TypeAware,
}

impl From<Mode> for SplitMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Random => SplitMode::Random,
            Mode::TypeAware => SplitMode::TypeAware,
        }
    }
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, value_enum)]
    mode: Mode,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

#[derive(Args)]
struct OptionalSplitArgs {
    #[arg(long, requires = "mode")]
    input: Option<PathBuf>,
    #[arg(long, value_enum)]
    mode: Option<Mode>,
    #[arg(long, default_value_t = 0.2)]
    test_fraction: f64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
}

fn load(path: &Path) -> Result<Dataset> {
    load_dataset(path).with_context(|| format!("loading {}", path.display()))
}

fn split_file(input: &Path, mode: Mode, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    let spec = SplitSpec::new(mode.into(), fraction, seed)?;
    Ok(split(&load(input)?, &spec)?)
}

fn run_train(config: &Path, quiet: bool) -> Result<()> {
    let config = Config::load(config)?;
    let mut progress = |r: &EpochRecord| {
        if !quiet {
            let valid = r.validation_sa.map(|v| format!(" valid_sa={v:.4}")).unwrap_or_default();
            eprintln!(
                "epoch {:>4} loss={:.5} test_sa={:.4} test_f1={:.4}{valid}{}",
                r.epoch,
                r.train_loss,
                r.test_sa,
                r.test_f1,
                if r.improved { " *" } else { "" }
            );
        }
    };
    let out = train(&config, &mut progress)?;
    let ck = &out.checkpoint;
    println!(
        "best {}={:.4} at epoch {}; checkpoint in {}",
        ck.metric_name,
        ck.metric_value,
        ck.epoch,
        config.checkpoint_dir.display()
    );
    Ok(())
}

fn run_eval(
    pred: &Path,
    gold: &Path,
    by_type: bool,
    by_fixedness: bool,
    errors: Option<Option<PathBuf>>,
    train: Option<PathBuf>,
    json: bool,
) -> Result<()> {
    let records = read_predictions(pred)?;
    let gold = load(gold)?;
    let report = evaluate(&records, &gold)?;
    if json {
        println!("{}", report.to_json()?);
    } else {
        print!("{}", report.render_table(by_type, by_fixedness));
    }
    if let Some(train) = train {
        match correlate_train_count_vs_sa(&load(&train)?, &report.per_type_sa) {
            Ok(c) => println!("train count vs SA: r={:.4} p={:.4} over {} types", c.r, c.p, c.n),
            Err(disc::Error::UndefinedCorrelation(why)) => println!("train count vs SA: undefined ({why})"),
            Err(e) => return Err(e.into()),
        }
    }
    if let Some(path) = errors {
        let cases = categorize_errors(&records, &gold)?;
        if let Some(path) = path {
            write_error_review(&path, &cases)?;
            eprintln!("wrote {} error cases to {}", cases.len(), path.display());
        } else if !json {
            println!();
            for c in &cases {
                println!(
                    "{}\t{}\tgold={:?}\tpred={:?}\t{}",
                    c.id,
                    c.category.as_str(),
                    c.gold_surface,
                    c.pred_surface,
                    c.sentence
                );
            }
        }
    }
    Ok(())
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Train { config, quiet } => run_train(&config, quiet)?,
        Command::Predict {
            checkpoint,
            input,
            out,
            contextual_cache,
            static_embeddings,
        } => {
            let ckpt = Checkpoint::load(&checkpoint)?;
            let opts = PredictOptions {
                contextual_cache,
                static_embeddings,
                subword_vocab: None,
            };
            let records = predict(&ckpt, &load(&input)?, &opts)?;
            write_predictions(&out, &records)?;
            eprintln!("wrote {} predictions to {}", records.len(), out.display());
        }
        Command::Eval {
            pred,
            gold,
            by_type,
            by_fixedness,
            errors,
            train,
            json,
        } => run_eval(&pred, &gold, by_type, by_fixedness, errors, train, json)?,
        Command::Split {
            split,
            out_train,
            out_test,
        } => {
            let (tr, te) = split_file(&split.input, split.mode, split.test_fraction, split.seed)?;
            tr.save(&out_train)?;
            te.save(&out_test)?;
            println!(
                "train {} instances / {} types, test {} instances / {} types",
                tr.len(),
                tr.idiom_types().len(),
                te.len(),
                te.idiom_types().len()
            );
        }
        Command::Stats {
            train,
            test,
            split,
            json,
        } => {
            let (tr, te) = match (train, test, split.input) {
                (Some(a), Some(b), _) => (load(&a)?, load(&b)?),
                (_, _, Some(input)) => {
                    split_file(&input, split.mode.expect("required by clap"), split.test_fraction, split.seed)?
                }
                _ => bail!("give --train and --test, or --input with --mode"),
            };
            let s = compute_stats(&tr, &te)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&s)?);
            } else {
                println!("{:<12}{:>12}{:>12}", "", "train", "test");
                println!("{:<12}{:>12}{:>12}", "size", s.size_train, s.size_test);
                println!(
                    "{:<12}{:>11.2}%{:>11.2}%",
                    "idiomatic", s.pct_idiomatic_train, s.pct_idiomatic_test
                );
                println!("{:<12}{:>12}{:>12}", "idioms", s.n_idioms_train, s.n_idioms_test);
                println!("{:<12}{:>12.2}{:>12.2}", "avg occ", s.avg_occ_train, s.avg_occ_test);
                println!("{:<12}{:>12.2}{:>12.2}", "std occ", s.std_occ_train, s.std_occ_test);
            }
        }
        Command::Synth {
            out_dir,
            sentences,
            types,
            seed,
        } => {
            let d = generate(&SyntheticSpec {
                sentences,
                types,
                seed,
                ..SyntheticSpec::default()
            })?;
            let path = write_toy_setup(&out_dir, &d, &d, &toy_config(seed))?;
            println!("{}", path.display());
        }
    }
    Ok(())
}
