use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use audiomt::ablate::{render_ablation, AblationPart};
use audiomt::{
    cmd_ablate, cmd_decode, cmd_eval, cmd_inspect, cmd_prepare, cmd_synth, cmd_train, HarnessError, RunConfig,
};
use audiomt_core::corpus::TaskCode;
use audiomt_core::metrics::render_table;
use audiomt_core::model::TrainStage;

#[derive(Parser)]
#[command(name = "audiomt", version, about = "Multitask audio-language training at desk scale")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    steps: Option<u64>,
    #[arg(long, global = true, value_parser = parse_stage)]
    stage: Option<TrainStage>,
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,
}

fn parse_stage(s: &str) -> Result<TrainStage, String> {
    s.parse()
}

#[derive(Subcommand)]
enum Command {
    /// Write the synthetic tone corpus.
    Synth,
    /// Learn the vocabulary from the corpus.
    Prepare,
    /// Train (resumes when --checkpoint is given).
    Train,
    /// Evaluate a checkpoint.
    Eval,
    /// Decode one WAV file.
    Decode {
        #[arg(long)]
        audio: PathBuf,
        #[arg(long, default_value = "ASR")]
        task: String,
        #[arg(long, default_value = "en")]
        audio_language: String,
        #[arg(long, default_value = "en")]
        text_language: String,
    },
    /// Run the matched-budget ablations.
    Ablate {
        #[arg(long, default_value = "all")]
        part: String,
    },
    /// Describe a checkpoint, manifest or vocabulary file.
    Inspect { path: Option<PathBuf> },
}

fn run(cli: Cli) -> Result<String, HarnessError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
        cfg.synth.seed = seed;
    }
    if let Some(steps) = cli.steps {
        cfg.train.steps = steps;
    }
    if let Some(stage) = cli.stage {
        cfg.train.stage = stage;
    }
    let checkpoint = || cli.checkpoint.clone().unwrap_or_else(|| cfg.checkpoint_path());
    match cli.command {
        Command::Synth => {
            let out = cmd_synth(&cfg)?;
            Ok(format!("wrote {} manifests and {} audio files", out.manifests.len(), out.audio.len()))
        }
        Command::Prepare => {
            let v = cmd_prepare(&cfg)?;
            Ok(format!("vocabulary of {} tokens ({} text)", v.len(), v.text_len()))
        }
        Command::Train => {
            let out = cmd_train(&cfg, cli.checkpoint.as_deref())?;
            Ok(format!(
                "trained steps {}..{} -> {}",
                out.start_step,
                out.final_step,
                out.checkpoint.display()
            ))
        }
        Command::Eval => Ok(render_table(&cmd_eval(&cfg, &checkpoint())?)),
        Command::Decode {
            audio,
            task,
            audio_language,
            text_language,
        } => {
            let task: TaskCode = task.parse().map_err(HarnessError::Usage)?;
            cmd_decode(&cfg, &checkpoint(), &audio, task, &audio_language, &text_language)
        }
        Command::Ablate { part } => {
            let part = match part.as_str() {
                "srwt" => AblationPart::Srwt,
                "conflict" => AblationPart::Conflict,
                "all" => AblationPart::All,
                other => return Err(HarnessError::Usage(format!("unknown ablation part {other:?}"))),
            };
            Ok(render_ablation(&cmd_ablate(&cfg, part)?))
        }
        Command::Inspect { path } => cmd_inspect(&path.unwrap_or_else(checkpoint)),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(msg) => {
            println!("{msg}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
