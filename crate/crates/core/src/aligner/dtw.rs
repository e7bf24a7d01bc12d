//! Template-concatenation DTW.
//!
//! The learner sequence (rows) is warped against the concatenation of the
//! word's phoneme templates (columns). Three unit-weight steps are allowed:
//! diagonal `(i-1, j-1)`, insert `(i, j-1)` (reference advances alone) and
//! delete `(i-1, j)` (learner advances alone). A step that enters the first
//! frame of a template must be diagonal, which is what makes the induced
//! learner segmentation a partition into non-empty, ordered segments.
//! Ties prefer diagonal, then insert, then delete.

use crate::dsp::FeatureSequence;

/// Euclidean distance between two feature vectors.
pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Step {
    Start,
    Diagonal,
    Insert,
    Delete,
}

/// One cell of a warping path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathCell {
    pub learner: usize,
    pub reference: usize,
    pub cost: f64,
}

/// Optimal warping path and its accumulated cost.
#[derive(Debug, Clone, PartialEq)]
pub struct WarpPath {
    pub cells: Vec<PathCell>,
    pub cost: f64,
}

/// Column layout of the concatenated templates: `starts[k]` is the first
/// reference frame of template `k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TemplateLayout {
    starts: Vec<usize>,
    total: usize,
}

impl TemplateLayout {
    pub fn from_lengths(lengths: &[usize]) -> Self {
        let mut starts = Vec::with_capacity(lengths.len());
        let mut total = 0;
        for &len in lengths {
            starts.push(total);
            total += len;
        }
        Self { starts, total }
    }

    pub fn templates(&self) -> usize {
        self.starts.len()
    }

    pub fn frames(&self) -> usize {
        self.total
    }

    pub fn starts(&self) -> &[usize] {
        &self.starts
    }

    /// Template index owning reference frame `j`.
    pub fn template_of(&self, j: usize) -> usize {
        self.starts.partition_point(|&s| s <= j) - 1
    }

    /// True when `j` opens a template other than the first.
    pub fn is_boundary(&self, j: usize) -> bool {
        j > 0 && self.starts.binary_search(&j).is_ok()
    }
}

/// Finds the minimum-cost constrained path from `(0, 0)` to
/// `(n-1, m-1)`. Returns `None` when no admissible path exists, which
/// happens exactly when the learner has fewer frames than templates.
pub fn warp(learner: &FeatureSequence, reference: &FeatureSequence, layout: &TemplateLayout) -> Option<WarpPath> {
    let (n, m) = (learner.len(), reference.len());
    debug_assert_eq!(m, layout.frames());
    if n == 0 || m == 0 || n < layout.templates() {
        return None;
    }
    let local: Vec<f64> = (0..n)
        .flat_map(|i| (0..m).map(move |j| (i, j)))
        .map(|(i, j)| euclidean(learner.frame(i), reference.frame(j)))
        .collect();
    let mut acc = vec![f64::INFINITY; n * m];
    let mut back = vec![Step::Start; n * m];
    acc[0] = local[0];
    for i in 0..n {
        for j in 0..m {
            if i == 0 && j == 0 {
                continue;
            }
            let mut best = f64::INFINITY;
            let mut step = Step::Start;
            if i > 0 && j > 0 && acc[(i - 1) * m + j - 1] < best {
                best = acc[(i - 1) * m + j - 1];
                step = Step::Diagonal;
            }
            if j > 0 && !layout.is_boundary(j) && acc[i * m + j - 1] < best {
                best = acc[i * m + j - 1];
                step = Step::Insert;
            }
            if i > 0 && acc[(i - 1) * m + j] < best {
                best = acc[(i - 1) * m + j];
                step = Step::Delete;
            }
            if step != Step::Start {
                acc[i * m + j] = local[i * m + j] + best;
                back[i * m + j] = step;
            }
        }
    }
    let cost = acc[n * m - 1];
    if !cost.is_finite() {
        return None;
    }
    let (mut i, mut j) = (n - 1, m - 1);
    let mut cells = vec![PathCell { learner: i, reference: j, cost: local[i * m + j] }];
    loop {
        match back[i * m + j] {
            Step::Start => break,
            Step::Diagonal => {
                i -= 1;
                j -= 1;
            }
            Step::Insert => j -= 1,
            Step::Delete => i -= 1,
        }
        cells.push(PathCell { learner: i, reference: j, cost: local[i * m + j] });
    }
    cells.reverse();
    Some(WarpPath { cells, cost })
}
