use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use phonetutor::adaptation::{alignment_cost, apply_transform, estimate_transform, SpeakerTransform};
use phonetutor::aligner::{Calibration, PhonemeTemplate, VoiceModel, WordReferenceModel};
use phonetutor::curriculum::{PronLexEntry, UnitGroup};
use phonetutor::dsp::{mfcc, synth_word_utterance, AudioClip, ErrorModel, FeatureSequence, FrameSpec, Voice};
use phonetutor::engine::Engine;
use phonetutor::phoneme::Phoneme;

fn random_model(rng: &mut ChaCha8Rng, dim: usize) -> WordReferenceModel {
    let k = rng.gen_range(2..=5);
    let phonemes: Vec<Phoneme> = (0..k).map(|_| Phoneme::from_index(rng.gen_range(0..39)).unwrap()).collect();
    let templates = phonemes
        .iter()
        .map(|&phoneme| PhonemeTemplate {
            phoneme,
            frames: FeatureSequence::from_vectors(
                (0..rng.gen_range(2..6)).map(|_| (0..dim).map(|_| rng.gen_range(-4.0..4.0)).collect()).collect(),
                FrameSpec::default(),
            )
            .unwrap(),
            voice: Voice::Male,
        })
        .collect();
    let vm = VoiceModel::from_templates(templates, vec![Calibration { mean: 0.0, sd: 1.0 }; k], AudioClip::new(vec![0; 8]).unwrap()).unwrap();
    WordReferenceModel::from_voices(PronLexEntry::new("w", "w", phonemes, UnitGroup::A).unwrap(), BTreeMap::from([(Voice::Male, vm)])).unwrap()
}

// A0 = Q1 S Q2 with singular values in [1, cond].
fn distortion(rng: &mut ChaCha8Rng, dim: usize, cond: f64) -> (DMatrix<f64>, DVector<f64>) {
    let q = |rng: &mut ChaCha8Rng| DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0)).qr().q();
    let s = DVector::from_fn(dim, |i, _| if i == 0 { 1.0 } else { rng.gen_range(1.0..=cond) });
    let a = q(rng) * DMatrix::from_diagonal(&s) * q(rng);
    let b = DVector::from_fn(dim, |_, _| rng.gen_range(-3.0..3.0));
    (a, b)
}

fn distort(y: &FeatureSequence, a: &DMatrix<f64>, b: &DVector<f64>) -> FeatureSequence {
    let inv = a.clone().try_inverse().unwrap();
    let rows = y
        .frames()
        .map(|f| (&inv * (DVector::from_column_slice(f) - b)).iter().copied().collect())
        .collect();
    FeatureSequence::from_vectors(rows, y.frame_spec()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn recovers_known_affine_distortion(seed in any::<u64>(), dim in 2usize..=13, cond in 1.0f64..10.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a0, b0) = distortion(&mut rng, dim, cond);
        let models: Vec<_> = (0..40).map(|_| random_model(&mut rng, dim)).collect();
        let learners: Vec<_> = models.iter().map(|m| distort(m.voice(Voice::Male).unwrap().reference(), &a0, &b0)).collect();
        let pairs: Vec<_> = learners.iter().cloned().zip(models.iter()).collect();
        let t = estimate_transform(&pairs, Voice::Male).unwrap();
        prop_assert!(t.enrollment_frame_count >= 200);
        let a = DMatrix::from_row_slice(dim, dim, &t.a);
        prop_assert!((&a - &a0).norm() / a0.norm() < 1e-6);
        prop_assert!((DVector::from_vec(t.b.clone()) - &b0).norm() / b0.norm() < 1e-6);
    }
}

#[test]
fn identity_enrollment_gives_identity() {
    let engine = Engine::synthetic();
    let recordings: Vec<_> = engine.curriculum().entries()[..12]
        .iter()
        .map(|e| (e.clone(), synth_word_utterance(e, Voice::Female, &ErrorModel::perfect()).unwrap()))
        .collect();
    let t = engine.enroll(Voice::Female, &recordings).unwrap();
    let id = SpeakerTransform::identity(t.dim, Voice::Female);
    let worst = t.a.iter().zip(&id.a).chain(t.b.iter().zip(&id.b)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(worst < 1e-6, "max deviation {worst}");
}

#[test]
fn male_speech_adapted_to_female_templates() {
    // The voices differ by a frequency ratio, which is not affine in the
    // cepstral domain, so a global map absorbs only part of the gap
    // (about 70% on the bundled curriculum).
    let engine = Engine::synthetic();
    let entries: Vec<PronLexEntry> = engine.curriculum().entries().iter().step_by(10).cloned().collect();
    let mut pairs = Vec::new();
    for e in &entries {
        let clip = synth_word_utterance(e, Voice::Male, &ErrorModel::perfect()).unwrap();
        pairs.push((mfcc(&clip, engine.features()).unwrap(), engine.model_for(e).unwrap()));
    }
    let refs: Vec<_> = pairs.iter().map(|(f, m)| (f.clone(), m.as_ref())).collect();
    let t = estimate_transform(&refs, Voice::Female).unwrap();
    let (mut before, mut after) = (0.0, 0.0);
    for (f, m) in &refs {
        before += alignment_cost(f, m, Voice::Female, None).unwrap();
        after += alignment_cost(f, m, Voice::Female, Some(&t)).unwrap();
    }
    assert!(after < 0.4 * before, "before {before:.3}, after {after:.3}");
    let adapted = apply_transform(&t, &refs[0].0).unwrap();
    assert_eq!((adapted.len(), adapted.dim()), (refs[0].0.len(), refs[0].0.dim()));
}
