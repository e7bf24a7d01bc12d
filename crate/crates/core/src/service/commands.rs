//! Operator command line. The binary only parses arguments and calls
//! [`run`]; everything here is usable from tests.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::aligner::{batch_score, ReferenceClips};
use crate::analytics::{load_fixture, parse_fixture, replicate_paper, Phase, StatsError, StudyGroup, BUNDLED_FIXTURE};
use crate::config::{Config, ConfigError};
use crate::dsp::{read_wav, Voice, WavError};
use crate::engine::{default_temperature, save_reference_clips, Engine, EngineError};
use crate::store::{write_scores, ExportFilter, ScoreRow, Store, StoreError};

#[derive(Debug, thiserror::Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Wav(#[from] WavError),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Input(String),
}

impl From<std::io::Error> for CommandError {
    fn from(e: std::io::Error) -> Self {
        CommandError::Io(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "phonetutor", version, about = "Pronunciation tutoring engine")]
pub struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Serve the HTTP session API.
    Serve,
    /// Score one recording of a curriculum word.
    Score {
        wav: PathBuf,
        word: String,
        #[arg(long)]
        voice: Option<Voice>,
    },
    /// Score test recordings listed in a CSV manifest
    /// (participant,group,phase,word,wav) and print per-test totals.
    BatchScore {
        manifest: PathBuf,
        #[arg(long)]
        voice: Option<Voice>,
    },
    /// Check a reference clip directory, or fill it with synthetic clips.
    BuildRefs {
        clips_dir: PathBuf,
        #[arg(long)]
        synthetic: bool,
    },
    /// Estimate a participant's speaker transform from `<word>.wav` files.
    Enroll {
        participant: String,
        clips_dir: PathBuf,
        #[arg(long)]
        voice: Option<Voice>,
    },
    /// Recompute the study statistics from the score tables.
    ReplicatePaper {
        #[arg(long)]
        fixture: Option<PathBuf>,
        /// Also write the claim table as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Export test totals from the store as CSV.
    Export {
        #[arg(long)]
        participant: Option<String>,
        #[arg(long)]
        group: Option<StudyGroup>,
        #[arg(long)]
        phase: Option<Phase>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Reads the config file (defaults when absent) and applies environment
/// overrides.
pub fn load_config(path: Option<&Path>) -> Result<Config, CommandError> {
    let config = match path {
        Some(p) => Config::load(p)?,
        None => Config::default(),
    };
    Ok(config.with_env(|k| std::env::var(k).ok())?)
}

/// Runs a command. `Ok(false)` means it ran but reported failure.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<bool, CommandError> {
    let config = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Serve => {
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(super::serve(config))?;
            Ok(true)
        }
        Command::Score { wav, word, voice } => score(&config, &wav, &word, voice, out),
        Command::BatchScore { manifest, voice } => batch(&config, &manifest, voice, out),
        Command::BuildRefs { clips_dir, synthetic } => build_refs(&config, &clips_dir, synthetic, out),
        Command::Enroll {
            participant,
            clips_dir,
            voice,
        } => enroll(&config, &participant, &clips_dir, voice, out),
        Command::ReplicatePaper { fixture, csv } => replicate(fixture.as_deref(), csv.as_deref(), out),
        Command::Export {
            participant,
            group,
            phase,
            out: path,
        } => export(&config, ExportFilter { participant, group, phase }, path.as_deref(), out),
    }
}

pub fn score(config: &Config, wav: &Path, word: &str, voice: Option<Voice>, out: &mut dyn Write) -> Result<bool, CommandError> {
    let engine = Engine::from_config(config)?;
    let entry = engine.entry(word)?.clone();
    let clip = read_wav(wav)?;
    let voice = voice.unwrap_or(Voice::Male);
    let scored = engine.score(&entry, &clip, voice, None)?;
    let f = &scored.feedback;
    writeln!(out, "word: {} ({})", entry.word, entry.spelled_out)?;
    for ((p, r), s) in entry.phonemes.iter().zip(&f.ratings).zip(&f.phoneme_scores) {
        writeln!(out, "  {:<3} rating {}  score {:6.2}  cost {:.4}", p.to_string(), r, s.acoustic_score, s.cost)?;
    }
    writeln!(
        out,
        "word score {:.2} / {}  {}",
        f.word_score,
        100 * entry.phonemes.len(),
        if f.accepted { "accepted" } else { "rejected" }
    )?;
    Ok(true)
}

#[derive(Debug, serde::Deserialize)]
struct ManifestRow {
    participant: String,
    group: StudyGroup,
    phase: Phase,
    word: String,
    wav: PathBuf,
}

pub fn batch(config: &Config, manifest: &Path, voice: Option<Voice>, out: &mut dyn Write) -> Result<bool, CommandError> {
    let engine = Engine::from_config(config)?;
    let base = manifest.parent().unwrap_or(Path::new("."));
    let mut reader = csv::Reader::from_path(manifest).map_err(|e| CommandError::Input(format!("{}: {e}", manifest.display())))?;
    let mut tests: BTreeMap<(String, Phase), (StudyGroup, Vec<_>, Vec<_>)> = BTreeMap::new();
    for row in reader.deserialize() {
        let row: ManifestRow = row.map_err(|e| CommandError::Input(format!("{}: {e}", manifest.display())))?;
        let model = engine.model(&row.word)?;
        let clip = read_wav(base.join(&row.wav))?;
        let e = tests
            .entry((row.participant, row.phase))
            .or_insert_with(|| (row.group, Vec::new(), Vec::new()));
        e.1.push(clip);
        e.2.push(model);
    }
    if tests.is_empty() {
        return Err(CommandError::Input(format!("{}: no rows", manifest.display())));
    }
    let voice = voice.unwrap_or(Voice::Male);
    let mut rows = Vec::new();
    for ((participant, phase), (group, clips, models)) in tests {
        let models: Vec<_> = models.iter().map(|m| m.as_ref()).collect();
        let scored = batch_score(
            &participant,
            phase,
            &clips,
            &models,
            None,
            voice,
            engine.features(),
            &engine.scoring_config(),
        )
        .map_err(EngineError::from)?;
        rows.push(ScoreRow {
            participant,
            group,
            phase,
            total: scored.scores.total,
            words_accepted: scored.scores.words_accepted,
        });
    }
    out.write_all(write_scores(&rows).as_bytes())?;
    Ok(true)
}

pub fn build_refs(config: &Config, dir: &Path, synthetic: bool, out: &mut dyn Write) -> Result<bool, CommandError> {
    if synthetic {
        let n = save_reference_clips(dir, &ReferenceClips::synthetic())?;
        writeln!(out, "wrote {n} synthetic reference clips to {}", dir.display())?;
    }
    let engine = Engine::from_config(&Config {
        references: Some(dir.to_path_buf()),
        ..config.clone()
    })?;
    let mut built = 0;
    for entry in engine.curriculum().entries() {
        engine.model_for(entry)?;
        built += 1;
    }
    let tau = default_temperature(engine.reference_clips(), engine.features())?;
    writeln!(out, "built {built} word models; median cross-phoneme cost {tau:.4}")?;
    Ok(true)
}

pub fn enroll(
    config: &Config,
    participant: &str,
    dir: &Path,
    voice: Option<Voice>,
    out: &mut dyn Write,
) -> Result<bool, CommandError> {
    let engine = Engine::from_config(config)?;
    let store = Store::open(&config.store_path)?;
    let known = store.participant(participant).ok();
    let voice = voice
        .or(known.as_ref().and_then(|p| p.declared_voice))
        .unwrap_or(Voice::Male);
    let mut recordings = Vec::new();
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    paths.sort();
    for path in paths {
        if path.extension().and_then(|e| e.to_str()) != Some("wav") {
            continue;
        }
        let word = path.file_stem().and_then(|s| s.to_str()).unwrap_or_default();
        let entry = engine.entry(word)?.clone();
        recordings.push((entry, read_wav(&path)?));
    }
    if recordings.is_empty() {
        return Err(CommandError::Input(format!("{}: no <word>.wav files", dir.display())));
    }
    let t = engine.enroll(voice, &recordings)?;
    store.save_transform(participant, &t)?;
    writeln!(
        out,
        "enrolled {participant} ({voice}) from {} recordings, {} frames",
        recordings.len(),
        t.enrollment_frame_count
    )?;
    Ok(true)
}

pub fn replicate(fixture: Option<&Path>, csv_out: Option<&Path>, out: &mut dyn Write) -> Result<bool, CommandError> {
    let rows = match fixture {
        Some(p) => load_fixture(p)?,
        None => parse_fixture(BUNDLED_FIXTURE)?,
    };
    let report = replicate_paper(&rows)?;
    write!(out, "{report}")?;
    if let Some(p) = csv_out {
        std::fs::write(p, report.claims_csv())?;
    }
    Ok(report.all_pass())
}

pub fn export(config: &Config, filter: ExportFilter, path: Option<&Path>, out: &mut dyn Write) -> Result<bool, CommandError> {
    let store = Store::open(&config.store_path)?;
    let text = store.export_scores(&filter)?;
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => out.write_all(text.as_bytes())?,
    }
    Ok(true)
}
