use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::stats::{mean, std_dev, t_test_two_tailed, TTest, TTestVariant};
use super::{StatsError, StudyGroup};

/// Per-participant study results (ASGP, words attempted in each test),
/// transcribed from the published tables.
pub const BUNDLED_FIXTURE: &str = include_str!("../../data/study_tables.csv");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixtureRow {
    pub participant: String,
    pub group: StudyGroup,
    pub asgp: f64,
    pub pre_words: u32,
    pub post_words: u32,
}

impl FixtureRow {
    pub fn word_gain(&self) -> i64 {
        self.post_words as i64 - self.pre_words as i64
    }
}

pub fn parse_fixture(text: &str) -> Result<Vec<FixtureRow>, StatsError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let rows = reader
        .deserialize()
        .collect::<Result<Vec<FixtureRow>, _>>()
        .map_err(|e| StatsError::Fixture(e.to_string()))?;
    if rows.is_empty() {
        return Err(StatsError::Fixture("no rows".into()));
    }
    let mut ids: Vec<&str> = rows.iter().map(|r| r.participant.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(StatsError::Fixture(format!("duplicate participant {:?}", w[0])));
    }
    Ok(rows)
}

pub fn load_fixture(path: impl AsRef<Path>) -> Result<Vec<FixtureRow>, StatsError> {
    let text = std::fs::read_to_string(path.as_ref())
        .map_err(|e| StatsError::Fixture(format!("{}: {e}", path.as_ref().display())))?;
    parse_fixture(&text)
}

pub fn write_fixture(rows: &[FixtureRow]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).expect("in-memory csv");
    }
    String::from_utf8(w.into_inner().expect("in-memory csv")).expect("utf-8")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupStats {
    pub metric: String,
    pub group: StudyGroup,
    pub mean: f64,
    pub sd: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub metric: String,
    pub pooled: TTest,
    pub welch: TTest,
}

/// A published figure this engine cannot recompute from the tables.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationNote {
    pub description: String,
    pub published: f64,
    pub reason: String,
}

/// One checked claim: pass when any observed value lies in `[lo, hi]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Claim {
    pub label: String,
    pub published: f64,
    pub lo: f64,
    pub hi: f64,
    pub observed: Vec<(String, f64)>,
    pub pass: bool,
}

impl Claim {
    fn new(label: &str, published: f64, lo: f64, hi: f64, observed: Vec<(&str, f64)>) -> Self {
        // bands are inclusive up to rounding of the printed figure
        let eps = 1e-9;
        let pass = observed.iter().any(|(_, v)| *v >= lo - eps && *v <= hi + eps);
        Self {
            label: label.to_string(),
            published,
            lo,
            hi,
            observed: observed.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            pass,
        }
    }

    fn around(label: &str, published: f64, tol: f64, observed: f64) -> Self {
        Self::new(label, published, published - tol, published + tol, vec![("value", observed)])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StatsReport {
    pub groups: Vec<GroupStats>,
    pub comparisons: Vec<Comparison>,
    pub not_replicable: Vec<CorrelationNote>,
    pub claims: Vec<Claim>,
}

impl StatsReport {
    pub fn all_pass(&self) -> bool {
        self.claims.iter().all(|c| c.pass)
    }

    pub fn claim(&self, label: &str) -> Option<&Claim> {
        self.claims.iter().find(|c| c.label == label)
    }

    pub fn group(&self, metric: &str, group: StudyGroup) -> Option<&GroupStats> {
        self.groups.iter().find(|g| g.metric == metric && g.group == group)
    }

    pub fn comparison(&self, metric: &str) -> Option<&Comparison> {
        self.comparisons.iter().find(|c| c.metric == metric)
    }

    /// Claims as comma-delimited rows with a header.
    pub fn claims_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["claim", "published", "lo", "hi", "observed", "pass"]).expect("csv");
        for c in &self.claims {
            let observed = c
                .observed
                .iter()
                .map(|(k, v)| format!("{k}={v:.4}"))
                .collect::<Vec<_>>()
                .join(" ");
            w.write_record([
                c.label.clone(),
                c.published.to_string(),
                c.lo.to_string(),
                c.hi.to_string(),
                observed,
                c.pass.to_string(),
            ])
            .expect("csv");
        }
        String::from_utf8(w.into_inner().expect("csv")).expect("utf-8")
    }
}

impl fmt::Display for StatsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Group statistics (sample sd, n-1)")?;
        for g in &self.groups {
            writeln!(f, "  {:<14} {:<9} mean {:>7.3}  sd {:>6.3}  n {}", g.metric, g.group, g.mean, g.sd, g.n)?;
        }
        writeln!(f, "Two-tailed t-tests (control vs treatment)")?;
        for c in &self.comparisons {
            writeln!(
                f,
                "  {:<14} pooled t {:>7.4} df {:>5.2} p {:.4} | welch t {:>7.4} df {:>5.2} p {:.4}",
                c.metric, c.pooled.t, c.pooled.df, c.pooled.p, c.welch.t, c.welch.df, c.welch.p
            )?;
        }
        writeln!(f, "Not recomputable from the tables")?;
        for n in &self.not_replicable {
            writeln!(f, "  {} (published {}): {}", n.description, n.published, n.reason)?;
        }
        writeln!(f, "Claims")?;
        for c in &self.claims {
            let observed = c
                .observed
                .iter()
                .map(|(k, v)| format!("{k} {v:.4}"))
                .collect::<Vec<_>>()
                .join(", ");
            writeln!(
                f,
                "  [{}] {:<32} published {:>6} band [{:.2}, {:.2}] observed {}",
                if c.pass { "PASS" } else { "FAIL" },
                c.label,
                c.published,
                c.lo,
                c.hi,
                observed
            )?;
        }
        Ok(())
    }
}

fn column<F: Fn(&FixtureRow) -> f64>(rows: &[FixtureRow], group: StudyGroup, f: F) -> Vec<f64> {
    rows.iter().filter(|r| r.group == group).map(f).collect()
}

fn compare(metric: &str, control: &[f64], treatment: &[f64]) -> Result<Comparison, StatsError> {
    Ok(Comparison {
        metric: metric.to_string(),
        pooled: t_test_two_tailed(control, treatment, TTestVariant::Pooled)?,
        welch: t_test_two_tailed(control, treatment, TTestVariant::Welch)?,
    })
}

fn group_stats(metric: &str, group: StudyGroup, xs: &[f64]) -> GroupStats {
    GroupStats {
        metric: metric.to_string(),
        group,
        mean: mean(xs),
        sd: std_dev(xs),
        n: xs.len(),
    }
}

/// Recomputes every figure derivable from the study tables and checks each
/// against its published value.
pub fn replicate_paper(rows: &[FixtureRow]) -> Result<StatsReport, StatsError> {
    use StudyGroup::{Control, Treatment};

    let asgp_c = column(rows, Control, |r| r.asgp);
    let asgp_t = column(rows, Treatment, |r| r.asgp);
    let wg_c = column(rows, Control, |r| r.word_gain() as f64);
    let wg_t = column(rows, Treatment, |r| r.word_gain() as f64);
    let pre_c = column(rows, Control, |r| r.pre_words as f64);
    let pre_t = column(rows, Treatment, |r| r.pre_words as f64);
    let post_c = column(rows, Control, |r| r.post_words as f64);
    let post_t = column(rows, Treatment, |r| r.post_words as f64);

    let groups = vec![
        group_stats("asgp", Control, &asgp_c),
        group_stats("asgp", Treatment, &asgp_t),
        group_stats("word_gain", Control, &wg_c),
        group_stats("word_gain", Treatment, &wg_t),
        group_stats("pre_words", Control, &pre_c),
        group_stats("pre_words", Treatment, &pre_t),
        group_stats("post_words", Control, &post_c),
        group_stats("post_words", Treatment, &post_t),
    ];
    let comparisons = vec![
        compare("asgp", &asgp_c, &asgp_t)?,
        compare("word_gain", &wg_c, &wg_t)?,
        compare("pre_words", &pre_c, &pre_t)?,
        compare("post_words", &post_c, &post_t)?,
    ];

    let g = |m: &str, grp| groups.iter().find(|s| s.metric == m && s.group == grp).expect("group");
    let p = |m: &str| {
        let c = comparisons.iter().find(|c| c.metric == m).expect("comparison");
        vec![("pooled", c.pooled.p), ("welch", c.welch.p)]
    };
    let claims = vec![
        Claim::around("control ASGP mean", -0.68, 0.01, g("asgp", Control).mean),
        Claim::around("control ASGP sd", 2.77, 0.01, g("asgp", Control).sd),
        Claim::around("treatment ASGP mean", 1.41, 0.01, g("asgp", Treatment).mean),
        Claim::around("treatment ASGP sd", 1.72, 0.01, g("asgp", Treatment).sd),
        Claim::new("ASGP p-value", 0.08, 0.06, 0.09, p("asgp")),
        Claim::around("control WG mean", 0.0, 0.01, g("word_gain", Control).mean),
        Claim::around("control WG sd", 0.71, 0.01, g("word_gain", Control).sd),
        Claim::around("treatment WG mean", 1.11, 0.01, g("word_gain", Treatment).mean),
        Claim::around("treatment WG sd", 1.54, 0.01, g("word_gain", Treatment).sd),
        Claim::new("WG p-value", 0.07, 0.05, 0.09, p("word_gain")),
        Claim::new("pre-test word count p-value", 0.42, 0.30, 0.55, p("pre_words")),
        Claim::new("post-test word count p-value", 0.06, 0.04, 0.08, p("post_words")),
    ];

    let unpublished_gender = "per-participant gender is not published";
    let unpublished_scores = "raw pre-test acoustic scores are not published";
    let not_replicable = vec![
        CorrelationNote {
            description: "pre-test acoustic score t-test p".into(),
            published: 0.25,
            reason: unpublished_scores.into(),
        },
        CorrelationNote {
            description: "gender vs ASGP correlation, control".into(),
            published: 0.65,
            reason: unpublished_gender.into(),
        },
        CorrelationNote {
            description: "gender vs ASGP correlation, treatment".into(),
            published: 0.32,
            reason: unpublished_gender.into(),
        },
        CorrelationNote {
            description: "pre-test score vs ASGP correlation, treatment".into(),
            published: 0.11,
            reason: unpublished_scores.into(),
        },
        CorrelationNote {
            description: "pre-test score vs WG correlation, treatment".into(),
            published: 0.25,
            reason: unpublished_scores.into(),
        },
        CorrelationNote {
            description: "in-session ASGP, treatment".into(),
            published: 12.0,
            reason: "session logs are not published".into(),
        },
    ];

    Ok(StatsReport {
        groups,
        comparisons,
        not_replicable,
        claims,
    })
}
