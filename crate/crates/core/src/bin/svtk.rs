use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use svtk::pipeline::{cmd_embed, cmd_eval, cmd_fuse, cmd_project, cmd_score, cmd_synth, cmd_train};
use svtk::pipeline::{PipelineConfig, System, Workspace};
use svtk::synth::Split;
use svtk::{Error, Result};

#[derive(Parser)]
#[command(name = "svtk", about = "Text-dependent speaker verification toolkit", version)]
struct Cli {
    /// TOML pipeline configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, default_value = "svtk-out")]
    output_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic corpus and trial lists.
    Synth,
    /// Train the speaker classifier on the background split.
    Train,
    /// Extract embeddings for every utterance.
    Embed {
        #[arg(long, default_value = "cnn")]
        system: String,
    },
    /// Fit the back-end and score a trial split.
    Score {
        #[arg(long, default_value = "cnn")]
        system: String,
        #[arg(long, default_value = "eval")]
        split: String,
    },
    /// EER and minDCF of a score file.
    Eval { scores: PathBuf },
    /// Logistic-regression fusion of several systems' scores.
    Fuse {
        #[arg(long, value_delimiter = ',', default_value = "cnn,mfcc")]
        systems: Vec<String>,
    },
    /// 2-D PCA of the embeddings of the first N speakers.
    Project {
        #[arg(long, default_value = "cnn")]
        system: String,
        #[arg(long, default_value_t = 9)]
        speakers: usize,
    },
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    }
    let mut config = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(s) = cli.seed {
        config.seed = s;
    }
    let ws = Workspace::new(&cli.output_dir, config)?;
    match cli.command {
        Command::Synth => {
            let utts = cmd_synth(&ws)?;
            println!("utterances={} corpus={}", utts.len(), ws.corpus_dir().display());
        }
        Command::Train => {
            cmd_train(&ws, |e| println!("epoch={} loss={:.4} accuracy={:.4}", e.epoch, e.loss, e.accuracy))?;
            println!("model={}", ws.checkpoint().display());
        }
        Command::Embed { system } => {
            let store = cmd_embed(&ws, System::parse(&system)?)?;
            println!("embeddings={} dim={}", store.len(), store.dim());
        }
        Command::Score { system, split } => {
            let (system, split) = (System::parse(&system)?, Split::parse(&split)?);
            let scores = cmd_score(&ws, system, split)?;
            println!("trials={} scores={}", scores.len(), ws.scores_path(system.as_str(), split).display());
        }
        Command::Eval { scores } => {
            let s = cmd_eval(&ws, &scores)?;
            println!("EER [%] {:.2}  minDCF {:.4}", 100.0 * s.eer, s.min_dcf);
            println!("eer={:.4} min_dcf={:.4}", s.eer, s.min_dcf);
        }
        Command::Fuse { systems } => {
            let systems = systems.iter().map(|s| System::parse(s)).collect::<Result<Vec<_>>>()?;
            let m = cmd_fuse(&ws, &systems)?;
            println!("weights={:?} bias={:.6}", m.weights, m.bias);
        }
        Command::Project { system, speakers } => {
            println!("projection={}", cmd_project(&ws, System::parse(&system)?, speakers)?.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
