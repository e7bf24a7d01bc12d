use std::path::Path;
use std::process::{Command, Output};

use phonetutor::curriculum::Curriculum;
use phonetutor::dsp::{synth_word_utterance, ErrorModel, Voice};
use phonetutor::engine::Engine;
use phonetutor::simulate::{simulate_into, CohortConfig};
use phonetutor::store::{import_scores, Store};

fn phonetutor(args: &[&str], store: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phonetutor"))
        .args(args)
        .env("PHONETUTOR_STORE", store)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_word(dir: &Path, word: &str, voice: Voice, detune: f64) {
    let c = Curriculum::bundled();
    let entry = c.get(word).unwrap();
    let em = ErrorModel::new(vec![detune; entry.phonemes.len()]).unwrap();
    let clip = synth_word_utterance(entry, voice, &em).unwrap();
    std::fs::write(dir.join(format!("{word}.wav")), clip.to_wav_bytes()).unwrap();
}

#[test]
fn unknown_verb_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = phonetutor(&["frobnicate"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn replicate_paper_reports_every_claim() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("claims.csv");
    let o = phonetutor(&["replicate-paper", "--csv", csv.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.lines().filter(|l| l.contains("[PASS]")).count() >= 10, "{text}");
    assert!(!text.contains("[FAIL]"));
    assert!(std::fs::read_to_string(csv).unwrap().lines().count() > 10);
}

#[test]
fn replicate_paper_fails_on_a_contradicting_fixture() {
    let dir = tempfile::tempdir().unwrap();
    let fixture = dir.path().join("f.csv");
    let mut text = String::from("participant,group,asgp,pre_words,post_words\n");
    for i in 1..=9 {
        let j = i as f64;
        text.push_str(&format!("CG{i},control,{},{},{}\nTG{i},treatment,{},{},{}\n", 5.0 + j, 9 + i % 2, 12 + i % 3, j - 5.0, 10 + i % 3, 10 + i % 2));
    }
    std::fs::write(&fixture, text).unwrap();
    let o = phonetutor(&["replicate-paper", "--fixture", fixture.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("[FAIL]"));
}

#[test]
fn score_rates_a_clean_recording_and_rejects_a_missing_file() {
    let dir = tempfile::tempdir().unwrap();
    write_word(dir.path(), "menacing", Voice::Male, 0.0);
    let wav = dir.path().join("menacing.wav");
    let o = phonetutor(&["score", wav.to_str().unwrap(), "menacing"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let ratings: Vec<&str> = text.lines().filter(|l| l.contains("rating")).collect();
    assert_eq!(ratings.len(), 7, "{text}");
    assert!(ratings.iter().all(|l| l.contains("rating 3")), "{text}");
    assert!(text.contains("accepted"));

    let o = phonetutor(&["score", "nope.wav", "menacing"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
    let o = phonetutor(&["score", wav.to_str().unwrap(), "xyzzy"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn build_refs_writes_loadable_references() {
    let dir = tempfile::tempdir().unwrap();
    let refs = dir.path().join("refs");
    let o = phonetutor(&["build-refs", refs.to_str().unwrap(), "--synthetic"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    assert!(text.contains("built 300 word models"), "{text}");
    assert!(std::fs::read_dir(&refs).unwrap().count() >= 78);
}

#[test]
fn enroll_then_batch_score_then_export() {
    let dir = tempfile::tempdir().unwrap();
    let store_dir = dir.path().join("store");
    let clips = dir.path().join("enroll");
    std::fs::create_dir(&clips).unwrap();
    for w in ["attic", "menacing", "believe", "valley"] {
        write_word(&clips, w, Voice::Female, 0.0);
    }
    let o = phonetutor(&["enroll", "TG1", clips.to_str().unwrap(), "--voice", "female"], &store_dir);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("from 4 recordings"));
    assert!(Store::open(&store_dir).unwrap().transform("TG1").unwrap().is_some());

    let mut manifest = String::from("participant,group,phase,word,wav\n");
    for (phase, detune) in [("pre", 0.3), ("post", 0.0)] {
        let d = dir.path().join(phase);
        std::fs::create_dir(&d).unwrap();
        for w in ["attic", "menacing"] {
            write_word(&d, w, Voice::Male, detune);
            manifest.push_str(&format!("TG1,treatment,{phase},{w},{phase}/{w}.wav\n"));
        }
    }
    let path = dir.path().join("manifest.csv");
    std::fs::write(&path, manifest).unwrap();
    let o = phonetutor(&["batch-score", path.to_str().unwrap()], &store_dir);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = import_scores(&stdout(&o)).unwrap();
    assert_eq!(rows.len(), 2);
    let (pre, post) = (&rows[0], &rows[1]);
    assert_eq!((pre.phase.to_string().as_str(), post.phase.to_string().as_str()), ("pre", "post"));
    assert!(post.total > pre.total, "{rows:?}");

    // nothing to export before any test has been recorded
    let o = phonetutor(&["export"], &store_dir);
    assert_eq!(o.status.code(), Some(1));

    let engine = Engine::synthetic();
    let study = dir.path().join("study");
    simulate_into(&engine, &CohortConfig { per_group: 2, sessions: 1, ..CohortConfig::default() }, &study).unwrap();
    let out = dir.path().join("post.csv");
    let o = phonetutor(&["export", "--group", "treatment", "--phase", "post", "--out", out.to_str().unwrap()], &study);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = import_scores(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.participant.starts_with("TG")));
}
