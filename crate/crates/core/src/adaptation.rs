//! Speaker adaptation by a global affine feature transform.
//!
//! Learner frames `x` are mapped to `A x + b` before alignment. The
//! transform is the least-squares fit of paired (learner, reference)
//! frames, with a small ridge term pulling `[A b]` towards the identity so
//! that directions the enrollment data never excites stay untouched.
//!
//! Pairs come from alignment, and alignment depends on the transform, so
//! estimation alternates the two starting from a flat start (a linear time
//! map between learner and reference), keeping the lowest-cost iterate.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::aligner::{align_to_voice, warp, WordReferenceModel};
use crate::dsp::{FeatureSequence, Voice};

/// Ridge weight of the identity prior.
pub const RIDGE: f64 = 1e-6;

const MAX_ITERATIONS: usize = 8;
// Reciprocal condition number below which the normal equations are
// treated as numerically singular even after the ridge term.
const MIN_RCOND: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AdaptError {
    #[error("insufficient enrollment: {pairs} frame pairs, need at least {needed}")]
    InsufficientEnrollment { pairs: usize, needed: usize },
    #[error("enrollment system is rank-deficient beyond ridge repair (rcond {rcond:e})")]
    RankDeficient { rcond: f64 },
    #[error("dimension mismatch: transform is {transform}-dimensional, features are {features}-dimensional")]
    DimensionMismatch { transform: usize, features: usize },
    #[error("enrollment utterance {index} cannot be aligned: {reason}")]
    Alignment { index: usize, reason: String },
    #[error("malformed transform record: {0}")]
    Malformed(String),
}

/// `x -> A x + b`, with `A` stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpeakerTransform {
    pub dim: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub voice: Voice,
    pub enrollment_frame_count: usize,
}

impl SpeakerTransform {
    pub fn identity(dim: usize, voice: Voice) -> Self {
        let mut a = vec![0.0; dim * dim];
        for i in 0..dim {
            a[i * dim + i] = 1.0;
        }
        Self {
            dim,
            a,
            b: vec![0.0; dim],
            voice,
            enrollment_frame_count: 0,
        }
    }

    pub fn is_identity(&self) -> bool {
        *self == Self { enrollment_frame_count: self.enrollment_frame_count, ..Self::identity(self.dim, self.voice) }
    }

    pub fn validate(&self) -> Result<(), AdaptError> {
        if self.a.len() != self.dim * self.dim || self.b.len() != self.dim {
            return Err(AdaptError::Malformed(format!(
                "dim {} with {} matrix entries and {} offsets",
                self.dim,
                self.a.len(),
                self.b.len()
            )));
        }
        if !self.a.iter().chain(&self.b).all(|v| v.is_finite()) {
            return Err(AdaptError::Malformed("non-finite entry".into()));
        }
        Ok(())
    }

    pub fn apply_to(&self, x: &[f64], out: &mut [f64]) {
        for (r, o) in out.iter_mut().enumerate() {
            let row = &self.a[r * self.dim..(r + 1) * self.dim];
            *o = row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + self.b[r];
        }
    }
}

/// Maps every frame through the transform; length and dimension preserved.
/// Not idempotent unless the transform is the identity.
pub fn apply_transform(t: &SpeakerTransform, features: &FeatureSequence) -> Result<FeatureSequence, AdaptError> {
    if t.dim != features.dim() {
        return Err(AdaptError::DimensionMismatch {
            transform: t.dim,
            features: features.dim(),
        });
    }
    Ok(features.map_frames(t.dim, |x, out| t.apply_to(x, out)))
}

/// Solves `min Σ‖A x + b − y‖² + λ‖[A b] − [I 0]‖²` in closed form.
pub fn fit_affine<'a>(
    pairs: impl IntoIterator<Item = (&'a [f64], &'a [f64])>,
    dim: usize,
    voice: Voice,
) -> Result<SpeakerTransform, AdaptError> {
    let aug = dim + 1;
    let mut gram = DMatrix::<f64>::zeros(aug, aug);
    let mut cross = DMatrix::<f64>::zeros(aug, dim);
    let mut count = 0usize;
    let mut z = vec![0.0; aug];
    for (x, y) in pairs {
        debug_assert!(x.len() == dim && y.len() == dim);
        z[..dim].copy_from_slice(x);
        z[dim] = 1.0;
        for r in 0..aug {
            for c in 0..aug {
                gram[(r, c)] += z[r] * z[c];
            }
            for c in 0..dim {
                cross[(r, c)] += z[r] * y[c];
            }
        }
        count += 1;
    }
    if count < aug {
        return Err(AdaptError::InsufficientEnrollment { pairs: count, needed: aug });
    }
    for i in 0..aug {
        gram[(i, i)] += RIDGE;
        if i < dim {
            cross[(i, i)] += RIDGE;
        }
    }

    let eig = SymmetricEigen::new(gram.clone()).eigenvalues;
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &e| (lo.min(e), hi.max(e.abs())));
    let rcond = if hi > 0.0 { lo / hi } else { 0.0 };
    if !(rcond > MIN_RCOND) {
        return Err(AdaptError::RankDeficient { rcond });
    }
    let w = gram
        .cholesky()
        .ok_or(AdaptError::RankDeficient { rcond })?
        .solve(&cross);

    // w is (dim+1) x dim: rows 0..dim hold Aᵀ, the last row holds b.
    let mut a = vec![0.0; dim * dim];
    for r in 0..dim {
        for c in 0..dim {
            a[r * dim + c] = w[(c, r)];
        }
    }
    let b = (0..dim).map(|c| w[(dim, c)]).collect();
    let t = SpeakerTransform {
        dim,
        a,
        b,
        voice,
        enrollment_frame_count: count,
    };
    t.validate()?;
    Ok(t)
}

fn flat_start(n: usize, m: usize) -> Vec<(usize, usize)> {
    (0..n)
        .map(|i| {
            let j = if n == 1 { 0 } else { ((i * (m - 1)) as f64 / (n - 1) as f64).round() as usize };
            (i, j)
        })
        .collect()
}

/// Estimates a speaker transform from enrollment utterances, each paired
/// with the reference model of the word it says.
pub fn estimate_transform(
    enrollment: &[(FeatureSequence, &WordReferenceModel)],
    voice: Voice,
) -> Result<SpeakerTransform, AdaptError> {
    let mut voice_models = Vec::with_capacity(enrollment.len());
    for (index, (learner, model)) in enrollment.iter().enumerate() {
        let vm = model
            .voice(voice)
            .map_err(|e| AdaptError::Alignment { index, reason: e.to_string() })?;
        if vm.dim() != learner.dim() {
            return Err(AdaptError::DimensionMismatch {
                transform: vm.dim(),
                features: learner.dim(),
            });
        }
        voice_models.push(vm);
    }
    let dim = match voice_models.first() {
        Some(vm) => vm.dim(),
        None => return Err(AdaptError::InsufficientEnrollment { pairs: 0, needed: 1 }),
    };

    let mut pairing: Vec<Vec<(usize, usize)>> = enrollment
        .iter()
        .zip(&voice_models)
        .map(|((learner, _), vm)| flat_start(learner.len(), vm.reference().len()))
        .collect();
    let mut best: Option<(f64, SpeakerTransform)> = None;
    for _ in 0..MAX_ITERATIONS {
        let pairs = enrollment.iter().zip(&voice_models).zip(&pairing).flat_map(|(((learner, _), vm), pairs)| {
            pairs.iter().map(move |&(i, j)| (learner.frame(i), vm.reference().frame(j)))
        });
        let t = fit_affine(pairs, dim, voice)?;

        let mut cost = 0.0;
        let mut next = Vec::with_capacity(enrollment.len());
        for (index, ((learner, _), vm)) in enrollment.iter().zip(&voice_models).enumerate() {
            let adapted = apply_transform(&t, learner)?;
            let path = warp(&adapted, vm.reference(), vm.layout()).ok_or_else(|| AdaptError::Alignment {
                index,
                reason: format!("{} frames for {} phonemes", learner.len(), vm.layout().templates()),
            })?;
            cost += path.cost;
            next.push(path.cells.iter().map(|c| (c.learner, c.reference)).collect::<Vec<_>>());
        }
        if best.as_ref().is_none_or(|(c, _)| cost < *c) {
            best = Some((cost, t));
        }
        if next == pairing {
            break;
        }
        pairing = next;
    }
    Ok(best.expect("at least one iteration").1)
}

/// Mean per-frame alignment cost of `learner` against the voice's templates,
/// optionally after a transform.
pub fn alignment_cost(
    learner: &FeatureSequence,
    model: &WordReferenceModel,
    voice: Voice,
    transform: Option<&SpeakerTransform>,
) -> Result<f64, crate::aligner::AlignError> {
    let vm = model.voice(voice)?;
    let adapted = match transform {
        Some(t) => apply_transform(t, learner)?,
        None => learner.clone(),
    };
    Ok(align_to_voice(&adapted, vm)?.total_cost)
}

/// Picks the reference template set for a declared voice profile. An
/// undeclared profile falls back to the male templates.
pub fn select_voice_model(profile: Option<Voice>) -> Voice {
    match profile {
        Some(v) => v,
        None => {
            tracing::warn!("speaker voice not declared; using male reference templates");
            Voice::Male
        }
    }
}
