use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::curriculum::{Curriculum, PronLexEntry, UnitGroup};
use crate::dsp::{synth_word_utterance, white_noise, ErrorModel, FrameSpec};

fn seq(rows: Vec<Vec<f64>>) -> FeatureSequence {
    FeatureSequence::from_vectors(rows, FrameSpec::default()).unwrap()
}

fn word(symbols: &[&str]) -> PronLexEntry {
    let phonemes = symbols.iter().map(|s| s.parse().unwrap()).collect();
    PronLexEntry::new(symbols.join("").to_lowercase(), symbols.join("-"), phonemes, UnitGroup::A).unwrap()
}

fn model(entry: &PronLexEntry) -> WordReferenceModel {
    build_reference_model(entry, &ReferenceClips::synthetic(), &MfccConfig::default()).unwrap()
}

// Minimum over every admissible path, accumulated from the start cell in
// path order.
fn brute_force(learner: &FeatureSequence, reference: &FeatureSequence, layout: &TemplateLayout) -> Option<f64> {
    fn go(
        i: usize,
        j: usize,
        acc: f64,
        l: &FeatureSequence,
        r: &FeatureSequence,
        layout: &TemplateLayout,
        best: &mut Option<f64>,
    ) {
        let (n, m) = (l.len(), r.len());
        if i == n - 1 && j == m - 1 {
            if best.is_none_or(|b| acc < b) {
                *best = Some(acc);
            }
            return;
        }
        let d = |a: usize, b: usize| euclidean(l.frame(a), r.frame(b));
        if i + 1 < n && j + 1 < m {
            go(i + 1, j + 1, acc + d(i + 1, j + 1), l, r, layout, best);
        }
        if j + 1 < m && !layout.is_boundary(j + 1) {
            go(i, j + 1, acc + d(i, j + 1), l, r, layout, best);
        }
        if i + 1 < n {
            go(i + 1, j, acc + d(i + 1, j), l, r, layout, best);
        }
    }
    let mut best = None;
    go(0, 0, euclidean(learner.frame(0), reference.frame(0)), learner, reference, layout, &mut best);
    best
}

fn random_seq(rng: &mut ChaCha8Rng, len: usize, dim: usize) -> FeatureSequence {
    seq((0..len).map(|_| (0..dim).map(|_| rng.gen_range(-3.0..3.0)).collect()).collect())
}

#[test]
fn dtw_matches_path_enumeration() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut compared = 0;
    for _ in 0..300 {
        let k = rng.gen_range(1..=3);
        let n = rng.gen_range(1..=6);
        let learner = random_seq(&mut rng, n, 3);
        let reference = random_seq(&mut rng, 2 * k, 3);
        let layout = TemplateLayout::from_lengths(&vec![2; k]);
        let fast = warp(&learner, &reference, &layout).map(|p| p.cost);
        let slow = brute_force(&learner, &reference, &layout);
        assert_eq!(fast, slow);
        compared += fast.is_some() as usize;
    }
    assert!(compared >= 100);
}

#[test]
fn path_cost_is_sum_of_cells() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let learner = random_seq(&mut rng, 9, 4);
        let reference = random_seq(&mut rng, 7, 4);
        let layout = TemplateLayout::from_lengths(&[3, 2, 2]);
        let p = warp(&learner, &reference, &layout).unwrap();
        let sum: f64 = p.cells.iter().map(|c| c.cost).sum();
        assert!((sum - p.cost).abs() < 1e-9);
        assert_eq!(p.cells.first().map(|c| (c.learner, c.reference)), Some((0, 0)));
        assert_eq!(p.cells.last().map(|c| (c.learner, c.reference)), Some((8, 6)));
    }
}

#[test]
fn self_alignment_is_zero() {
    let entry = word(&["M", "EH", "N", "AH", "S", "IH", "NG"]);
    let m = model(&entry);
    for voice in Voice::ALL {
        let clip = synth_word_utterance(&entry, voice, &ErrorModel::perfect()).unwrap();
        let learner = mfcc(&clip, &MfccConfig::default()).unwrap();
        let a = force_align(&learner, &m, voice).unwrap();
        assert_eq!(a.total_cost, 0.0);
        let vm = m.voice(voice).unwrap();
        let starts: Vec<usize> = a.segments.iter().map(|s| s.start).collect();
        assert_eq!(starts, vm.layout().starts());
    }
}

#[test]
fn reference_model_structure() {
    let entry = word(&["AE", "T", "IH", "K"]);
    let m = model(&entry);
    for (voice, vm) in m.voices() {
        assert_eq!(vm.templates.len(), 4);
        assert!(vm.templates.iter().all(|t| t.voice == voice && t.frames.len() >= 2));
        for c in &vm.calibration {
            assert_eq!(c.mean, 0.0);
            assert_eq!(c.sd, SIGMA_FLOOR);
        }
    }
    assert_eq!(m.voices().count(), 2);
}

#[test]
fn missing_female_clip_is_named() {
    let entry = word(&["S", "AA", "G", "IY"]);
    let mut clips = ReferenceClips::synthetic();
    clips.remove("G".parse().unwrap(), Voice::Female);
    let err = build_reference_model(&entry, &clips, &MfccConfig::default()).unwrap_err();
    assert_eq!(err.to_string(), "missing reference clip for phoneme G (female voice)");
}

#[test]
fn learner_shorter_than_word_is_rejected() {
    let entry = word(&["S", "AA", "G", "IY"]);
    let m = model(&entry);
    let learner = seq(vec![vec![0.0; 13]; 3]);
    assert!(matches!(
        force_align(&learner, &m, Voice::Male),
        Err(AlignError::LearnerTooShort { frames: 3, phonemes: 4 })
    ));
}

#[test]
fn score_examples() {
    assert_eq!(acoustic_score(0.0, 2.5), 100.0);
    assert!((acoustic_score(2.5, 2.5) - 100.0 / std::f64::consts::E).abs() < 1e-12);
    assert!((acoustic_score(1.0, 1.0) - 36.79).abs() < 0.01);
    assert!(acoustic_score(1.0, 1.0) > acoustic_score(1.1, 1.0));
    assert_eq!(acoustic_score(1e6, 1.0), SCORE_FLOOR);
}

fn scores_with_costs(costs: &[f64]) -> Vec<PhonemeScore> {
    costs
        .iter()
        .map(|&cost| PhonemeScore {
            phoneme: "AA".parse().unwrap(),
            cost,
            acoustic_score: acoustic_score(cost, 1.0),
        })
        .collect()
}

fn calibrated(entry: &PronLexEntry, mean: f64, sd: f64) -> WordReferenceModel {
    let base = model(entry);
    let voices = base
        .voices()
        .map(|(v, vm)| {
            let cal = vec![Calibration { mean, sd }; vm.templates.len()];
            (v, VoiceModel::from_templates(vm.templates.clone(), cal, vm.reference_clip.clone()).unwrap())
        })
        .collect();
    WordReferenceModel::from_voices(entry.clone(), voices).unwrap()
}

#[test]
fn likert_bands_and_locality() {
    let entry = word(&["AA", "B", "K"]);
    let m = calibrated(&entry, 1.0, 0.1);
    let config = ScoringConfig::with_temperature(1.0);
    let at_mean = to_likert(&scores_with_costs(&[1.0, 1.0, 1.0]), &m, Voice::Male, &config).unwrap();
    assert_eq!(at_mean.ratings, vec![3, 3, 3]);
    // margin 0.05: 3 up to 1.25, 2 up to 1.45
    let banded = to_likert(&scores_with_costs(&[1.25, 1.26, 1.46]), &m, Voice::Male, &config).unwrap();
    assert_eq!(banded.ratings, vec![3, 2, 1]);
    let one_bad = to_likert(&scores_with_costs(&[1.0, 9.0, 1.0]), &m, Voice::Male, &config).unwrap();
    assert_eq!(one_bad.ratings, vec![3, 1, 3]);
    assert_eq!(one_bad.flagged(), vec![1]);
    assert_eq!(one_bad.worst_rating(), 1);
    assert!(matches!(
        to_likert(&scores_with_costs(&[1.0]), &m, Voice::Male, &config),
        Err(AlignError::LengthMismatch { .. })
    ));
}

#[test]
fn word_acceptance_threshold() {
    let entry = word(&["AA", "B"]);
    let m = calibrated(&entry, 0.0, 0.0);
    let config = ScoringConfig::with_temperature(1.0);
    assert_eq!(config.word_threshold(2), 120.0);
    let ok = to_likert(&scores_with_costs(&[0.0, 0.0]), &m, Voice::Male, &config).unwrap();
    assert!(ok.accepted);
    assert_eq!(ok.word_score, 200.0);
    let bad = to_likert(&scores_with_costs(&[5.0, 5.0]), &m, Voice::Male, &config).unwrap();
    assert!(!bad.accepted);
}

fn default_scoring() -> ScoringConfig {
    let clips = ReferenceClips::synthetic();
    let templates: Vec<FeatureSequence> = crate::phoneme::Phoneme::all()
        .map(|p| mfcc(&clips.get(p, Voice::Male)[0], &MfccConfig::default()).unwrap())
        .collect();
    ScoringConfig::with_temperature(median_cross_cost(&templates))
}

#[test]
fn detuned_phoneme_has_highest_cost() {
    let entry = word(&["M", "EH", "N", "AH", "S"]);
    let m = model(&entry);
    for k in 0..5 {
        let clip = synth_word_utterance(&entry, Voice::Female, &ErrorModel::single(5, k, 0.3).unwrap()).unwrap();
        let learner = mfcc(&clip, &MfccConfig::default()).unwrap();
        let a = force_align(&learner, &m, Voice::Female).unwrap();
        let worst = (0..5).max_by(|&x, &y| a.per_phoneme_cost[x].total_cmp(&a.per_phoneme_cost[y])).unwrap();
        assert_eq!(worst, k, "costs {:?}", a.per_phoneme_cost);
    }
}

#[test]
fn detune_sweep_is_monotone() {
    let entry = word(&["K", "AE", "T"]);
    let m = model(&entry);
    let scoring = default_scoring();
    let mut last_rating = 3;
    let mut last_score = f64::INFINITY;
    for step in 0..=10 {
        let d = step as f64 * 0.05;
        let clip = synth_word_utterance(&entry, Voice::Male, &ErrorModel::single(3, 1, d).unwrap()).unwrap();
        let s = score_utterance(&clip, &m, Voice::Male, None, &MfccConfig::default(), &scoring).unwrap();
        let rating = s.feedback.ratings[1];
        assert!(rating <= last_rating, "detune {d}");
        last_rating = rating;
        let score = s.feedback.phoneme_scores[1].acoustic_score;
        if step == 4 || step == 8 {
            assert!(score <= last_score);
            last_score = score;
        }
    }
}

#[test]
fn perfect_test_is_fully_accepted() {
    let curriculum = Curriculum::bundled();
    let syllabus = crate::curriculum::sample_syllabus(&curriculum, 10, 3).unwrap();
    let models: Vec<WordReferenceModel> = syllabus.iter().map(model).collect();
    let refs: Vec<&WordReferenceModel> = models.iter().collect();
    let clips: Vec<AudioClip> = syllabus
        .iter()
        .map(|e| synth_word_utterance(e, Voice::Male, &ErrorModel::perfect()).unwrap())
        .collect();
    let scoring = default_scoring();
    let out = batch_score("p1", Phase::Pre, &clips, &refs, None, Voice::Male, &MfccConfig::default(), &scoring).unwrap();
    assert_eq!(out.scores.words_accepted, 30);
    assert!(out.words.iter().all(|w| w.ratings.iter().all(|&r| r == 3)));

    let mut noisy = clips.clone();
    noisy[4] = white_noise(600, 99);
    let out2 = batch_score("p1", Phase::Pre, &noisy, &refs, None, Voice::Male, &MfccConfig::default(), &scoring).unwrap();
    assert_eq!(out2.scores.words_accepted, 29);
    assert!(!out2.words[4].accepted);
    for (i, (a, b)) in out.words.iter().zip(&out2.words).enumerate() {
        if i != 4 {
            assert_eq!(a, b);
        }
    }
}

#[test]
fn empty_batch() {
    let scoring = ScoringConfig::with_temperature(1.0);
    let out = batch_score("p", Phase::Post, &[], &[], None, Voice::Male, &MfccConfig::default(), &scoring).unwrap();
    assert_eq!(out.scores.total, 0.0);
    assert_eq!(out.scores.words_accepted, 0);
    assert!(out.words.is_empty());
}

#[test]
fn pairing_mismatch() {
    let entry = word(&["AA", "B"]);
    let m = model(&entry);
    let scoring = ScoringConfig::with_temperature(1.0);
    let err = batch_score("p", Phase::Pre, &[], &[&m], None, Voice::Male, &MfccConfig::default(), &scoring);
    assert!(matches!(err, Err(AlignError::PairingMismatch { clips: 0, models: 1 })));
}

#[test]
fn silence_scores_bottom_out_without_error() {
    let entry = word(&["AA", "B"]);
    let m = model(&entry);
    let silence = AudioClip::new(vec![0; 4000]).unwrap();
    let s = score_utterance(&silence, &m, Voice::Male, None, &MfccConfig::default(), &default_scoring()).unwrap();
    assert!(s.feedback.phoneme_scores.iter().all(|p| p.acoustic_score >= SCORE_FLOOR));
    assert!(!s.feedback.accepted);
}

#[test]
fn distinct_phonemes_are_separated() {
    let clips = ReferenceClips::synthetic();
    let config = MfccConfig::default();
    let feats: Vec<FeatureSequence> = crate::phoneme::Phoneme::all()
        .map(|p| mfcc(&clips.get(p, Voice::Male)[0], &config).unwrap())
        .collect();
    for (a, fa) in feats.iter().enumerate() {
        for fb in feats.iter().skip(a + 1) {
            let p = warp(fa, fb, &TemplateLayout::from_lengths(&[fb.len()])).unwrap();
            assert!(p.cost > 0.0);
        }
    }
}

proptest! {
    #[test]
    fn segments_tile_the_learner(
        n in 3usize..14,
        lens in proptest::collection::vec(2usize..5, 1..4),
        seed in any::<u64>(),
    ) {
        prop_assume!(n >= lens.len());
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let learner = random_seq(&mut rng, n, 2);
        let templates: Vec<PhonemeTemplate> = lens
            .iter()
            .enumerate()
            .map(|(i, &len)| PhonemeTemplate {
                phoneme: crate::phoneme::Phoneme::from_index(i).unwrap(),
                frames: random_seq(&mut rng, len, 2),
                voice: Voice::Male,
            })
            .collect();
        let cal = vec![Calibration { mean: 0.0, sd: 0.0 }; templates.len()];
        let vm = VoiceModel::from_templates(templates, cal, AudioClip::new(vec![1]).unwrap()).unwrap();
        let a = align_to_voice(&learner, &vm).unwrap();
        prop_assert_eq!(a.segments.first().unwrap().start, 0);
        prop_assert_eq!(a.segments.last().unwrap().end, n);
        for s in &a.segments {
            prop_assert!(s.start < s.end);
        }
        for w in a.segments.windows(2) {
            prop_assert_eq!(w[0].end, w[1].start);
        }
        prop_assert!((a.total_cost * n as f64 - a.path_cost).abs() < 1e-9);
    }
}
