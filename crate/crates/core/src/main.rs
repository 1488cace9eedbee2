use clap::{Parser, Subcommand};
use histent::cli::{
    cmd_analyze, cmd_convert, cmd_evaluate, cmd_train, AnalysisKind, CliError, FormatSelection,
    InputFormat,
};
use histent::tagger::Mode;
use std::path::PathBuf;
use std::process::ExitCode;

/// Clinical patient-history NER evaluation toolkit.
#[derive(Parser)]
#[command(name = "histent", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert annotation files to the canonical standoff JSON-Lines corpus.
    Convert {
        /// Input format: standoff-json, brat, or gpt-html.
        #[arg(long)]
        format: String,
        /// Output corpus file (.jsonl).
        #[arg(long)]
        out: PathBuf,
        /// Input files (for brat: the .txt files; .ann siblings are found
        /// automatically).
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
    },
    /// Score predictions against gold annotations.
    Evaluate {
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Report formats, comma separated: csv, md.
        #[arg(long, default_value = "csv,md")]
        format: String,
    },
    /// Run an error-association analysis: length, notes, or sections.
    Analyze {
        /// Which analysis: length, notes, or sections.
        which: String,
        #[arg(long)]
        gold: PathBuf,
        #[arg(long)]
        pred: PathBuf,
        /// Header lexicon JSON for the sections analysis; the
        /// HISTENT_LEXICON environment variable overrides this flag.
        #[arg(long)]
        lexicon: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Report formats, comma separated: csv, md, svg.
        #[arg(long, default_value = "csv,md")]
        format: String,
    },
    /// Train the reference tagger with five-fold cross-validation and
    /// evaluate its out-of-fold predictions.
    Train {
        #[arg(long)]
        gold: PathBuf,
        /// basic or with_bme.
        #[arg(long, default_value = "basic")]
        mode: String,
        /// BME corpus (standoff JSON-Lines; entities read from the gold
        /// arrays). Required in with_bme mode.
        #[arg(long)]
        bme: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "csv,md")]
        format: String,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Convert { format, out, inputs } => {
            let format = InputFormat::parse(&format)?;
            cmd_convert(format, &inputs, &out)
        }
        Command::Evaluate { gold, pred, out, format } => {
            cmd_evaluate(&gold, &pred, &out, FormatSelection::parse(&format)).map(|_| ())
        }
        Command::Analyze { which, gold, pred, lexicon, out, format } => {
            let which = AnalysisKind::parse(&which)?;
            let lexicon = std::env::var_os("HISTENT_LEXICON").map(PathBuf::from).or(lexicon);
            cmd_analyze(
                which,
                &gold,
                &pred,
                lexicon.as_deref(),
                &out,
                FormatSelection::parse(&format),
            )
        }
        Command::Train { gold, mode, bme, seed, out, format } => {
            let mode = Mode::parse(&mode).ok_or(CliError::UnknownMode(mode))?;
            cmd_train(&gold, mode, bme.as_deref(), seed, &out, FormatSelection::parse(&format))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::FAILURE
        }
    }
}
