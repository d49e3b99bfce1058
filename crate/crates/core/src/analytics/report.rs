//! The analysis pipeline and report rendering.
//!
//! Two entry points produce a [`Report`]: [`analyze_events`] works from an
//! event export (plus an optional survey file), [`analyze_summaries`] from
//! published per-group descriptives. [`render_report`] turns either into a
//! fixed-layout text table and a JSON document.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::edits::{detect_edit_changes, ChangeKind};
use super::metrics::{metrics_from_export, Group, MetricsConfig, UserMetrics};
use super::stats::{levene_test, pooled_t_test, summarize, GroupComparison, GroupSummary, LeveneResult};
use super::survey::{score_survey, ReliabilityResult, SurveyFile};
use crate::domain::{ActivityEvent, AppVariant, ConstructScale, ScaleId, UserId};
use crate::export::ExportRecord;
use crate::{Error, Result};

/// Variables compared between the groups, in report order.
pub const VARIABLES: [&str; 8] = ["#EDITS", "#POSTS", "#SHARES", "#PUBLICATIONS", "RSK", "CTRL", "BEN", "EIPC"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub metrics: MetricsConfig,
    pub pairing_window_minutes: i64,
    pub alpha: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            metrics: MetricsConfig::default(),
            pairing_window_minutes: super::edits::DEFAULT_PAIRING_WINDOW_MINUTES,
            alpha: 0.05,
        }
    }
}

/// Descriptives for one group; `sd`/`se` are absent below two observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Descriptive {
    pub group: Group,
    pub n: usize,
    pub mean: f64,
    pub sd: Option<f64>,
    pub se: Option<f64>,
}

impl Descriptive {
    fn from_values(group: Group, values: &[f64]) -> Self {
        match summarize(values) {
            Ok(s) => Self::from_summary(group, &s),
            Err(_) => Self {
                group,
                n: values.len(),
                mean: if values.is_empty() { 0.0 } else { values.iter().sum::<f64>() / values.len() as f64 },
                sd: None,
                se: None,
            },
        }
    }

    fn from_summary(group: Group, s: &GroupSummary) -> Self {
        Self { group, n: s.n, mean: s.mean, sd: Some(s.sd), se: Some(s.se) }
    }

    fn summary(&self) -> Option<GroupSummary> {
        GroupSummary::from_moments(self.n, self.mean, self.sd?).ok()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableResult {
    pub variable: String,
    pub groups: [Descriptive; 2],
    pub levene: Option<LeveneResult>,
    pub comparison: Option<GroupComparison>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Totals {
    pub participants_g1: usize,
    pub participants_g2: usize,
    pub events: usize,
    pub duplicates_dropped: usize,
    pub edits: u64,
    pub posts: u64,
    pub shares: u64,
    pub publications: u64,
    pub interventions_g1: u64,
    pub interventions_g2: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Report {
    /// Absent in summary-input mode.
    pub totals: Option<Totals>,
    pub edit_outcomes: BTreeMap<ChangeKind, usize>,
    pub users: Vec<UserMetrics>,
    pub variables: Vec<VariableResult>,
    pub reliability: Vec<ReliabilityResult>,
    pub alpha: f64,
}

/// Drops exact re-submissions of the same client event; a client event id
/// reused with different content is an error.
fn dedup(records: &[ExportRecord]) -> Result<(Vec<ExportRecord>, usize)> {
    let mut seen: HashMap<uuid::Uuid, &ExportRecord> = HashMap::new();
    let mut out = Vec::with_capacity(records.len());
    for r in records {
        match seen.get(&r.event.client_event_id) {
            Some(prev) => {
                let (a, b) = (&prev.event, &r.event);
                let same = a.user_id == b.user_id
                    && a.popup_action == b.popup_action
                    && a.message_id == b.message_id
                    && a.post_length == b.post_length
                    && a.post_hash == b.post_hash
                    && a.image_hash == b.image_hash
                    && a.timestamp == b.timestamp;
                if !same {
                    return Err(Error::validation(format!(
                        "client_event_id {} recorded twice with different content",
                        r.event.client_event_id
                    )));
                }
            }
            None => {
                seen.insert(r.event.client_event_id, r);
                out.push(r.clone());
            }
        }
    }
    let dropped = records.len() - out.len();
    Ok((out, dropped))
}

fn compare(variable: &str, groups: [Descriptive; 2], raw: Option<[&[f64]; 2]>, alpha: f64) -> VariableResult {
    let mut note = None;
    let levene = raw
        .filter(|r| r.iter().all(|g| g.len() >= 2))
        .and_then(|[a, b]| levene_test(&[a, b]).ok());
    let comparison = match (groups[0].summary(), groups[1].summary()) {
        (Some(g1), Some(g2)) => match pooled_t_test(&g1, &g2, alpha) {
            Ok(c) => Some(c),
            Err(e) => {
                note = Some(e.to_string());
                None
            }
        },
        _ => {
            note = Some("fewer than two observations in a group".into());
            None
        }
    };
    VariableResult { variable: variable.to_owned(), groups, levene, comparison, note }
}

/// Full pipeline over an event export: duplicate check, per-user metrics,
/// edit-change detection, descriptives, Levene and pooled t-tests, and
/// survey scoring when a survey is given.
///
/// `participants` lists users that should count even without events.
/// Survey respondents are matched to groups through the survey's own group
/// column first, then through their user id in the export.
pub fn analyze_events(
    records: &[ExportRecord],
    participants: &BTreeMap<UserId, AppVariant>,
    survey: Option<&SurveyFile>,
    config: &AnalysisConfig,
) -> Result<Report> {
    let (records, duplicates_dropped) = dedup(records)?;
    let users = metrics_from_export(&records, participants, &config.metrics)?;
    let events: Vec<ActivityEvent> = records.iter().map(|r| r.event.clone()).collect();

    let mut edit_outcomes = BTreeMap::new();
    for o in detect_edit_changes(&events, config.pairing_window_minutes) {
        *edit_outcomes.entry(o.change_kind).or_insert(0) += 1;
    }

    let mut totals = Totals { events: records.len(), duplicates_dropped, ..Totals::default() };
    for u in &users {
        totals.edits += u64::from(u.edits);
        totals.posts += u64::from(u.posts);
        totals.shares += u64::from(u.shares);
        totals.publications += u64::from(u.publications);
        match u.group {
            Group::G1 => {
                totals.participants_g1 += 1;
                totals.interventions_g1 += u64::from(u.interventions_received);
            }
            Group::G2 => {
                totals.participants_g2 += 1;
                totals.interventions_g2 += u64::from(u.interventions_received);
            }
        }
    }

    let mut variables = Vec::new();
    let split = |f: &dyn Fn(&UserMetrics) -> u32| -> [Vec<f64>; 2] {
        let pick = |g| users.iter().filter(|u| u.group == g).map(|u| f64::from(f(u))).collect();
        [pick(Group::G1), pick(Group::G2)]
    };
    type Pick<'a> = &'a dyn Fn(&UserMetrics) -> u32;
    let behavioural: [(&str, Pick); 4] = [
        (VARIABLES[0], &|u| u.edits),
        (VARIABLES[1], &|u| u.posts),
        (VARIABLES[2], &|u| u.shares),
        (VARIABLES[3], &|u| u.publications),
    ];
    for (name, f) in behavioural {
        let [a, b] = split(f);
        let groups = [Descriptive::from_values(Group::G1, &a), Descriptive::from_values(Group::G2, &b)];
        variables.push(compare(name, groups, Some([&a, &b]), config.alpha));
    }

    let mut reliability = Vec::new();
    if let Some(survey) = survey {
        let scored = score_survey(&survey.responses, &ConstructScale::standard_set())?;
        reliability = scored.reliability;
        let user_groups: BTreeMap<UserId, Group> = users.iter().map(|u| (u.user_id, u.group)).collect();
        let group_of = |pid: i64| {
            survey.groups.get(&pid).map(|&v| Group::from(v)).or_else(|| user_groups.get(&pid).copied())
        };
        for scale in [ScaleId::RSK, ScaleId::CTRL, ScaleId::BEN, ScaleId::EIPC] {
            let mut vals: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
            let mut unmatched = 0;
            for s in scored.scores.iter().filter(|s| s.scale_id == scale) {
                match group_of(s.participant_id) {
                    Some(Group::G1) => vals[0].push(s.score),
                    Some(Group::G2) => vals[1].push(s.score),
                    None => unmatched += 1,
                }
            }
            let groups = [Descriptive::from_values(Group::G1, &vals[0]), Descriptive::from_values(Group::G2, &vals[1])];
            let mut result = compare(scale.as_str(), groups, Some([&vals[0], &vals[1]]), config.alpha);
            if unmatched > 0 {
                result.note = Some(format!("{unmatched} respondent(s) without a known group left out"));
            }
            variables.push(result);
        }
    }

    Ok(Report {
        totals: Some(totals),
        edit_outcomes,
        users,
        variables,
        reliability,
        alpha: config.alpha,
    })
}

/// One line of a summary-input file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub variable: String,
    pub group: Group,
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
}

/// Reads `variable,group,n,mean,sd` rows. `group` is `G1`/`G2` (or `1`/`2`).
pub fn read_summaries<R: Read>(input: R, source: &str) -> Result<Vec<SummaryRow>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let err = |line: u64, field: &str, message: String| Error::Parse {
        file: source.to_owned(),
        line,
        field: field.to_owned(),
        message,
    };
    let headers = rdr.headers().map_err(|e| err(1, "header", e.to_string()))?.clone();
    let expected = ["variable", "group", "n", "mean", "sd"];
    if headers.iter().ne(expected) {
        return Err(err(1, "header", format!("expected {}", expected.join(","))));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| err(e.position().map_or(0, |p| p.line()), "record", e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let field = |i: usize| rec.get(i).unwrap_or("");
        let group = match field(1) {
            "G1" | "1" => Group::G1,
            "G2" | "2" => Group::G2,
            other => return Err(err(line, "group", format!("unknown group {other:?}"))),
        };
        let num = |i: usize| -> Result<f64> {
            field(i)
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| err(line, expected[i], format!("not a number: {:?}", field(i))))
        };
        let n = field(2).parse().map_err(|_| err(line, "n", format!("not a count: {:?}", field(2))))?;
        rows.push(SummaryRow { variable: field(0).to_owned(), group, n, mean: num(3)?, sd: num(4)? });
    }
    Ok(rows)
}

pub fn read_summaries_from_path(path: &Path) -> Result<Vec<SummaryRow>> {
    read_summaries(std::fs::File::open(path)?, &path.display().to_string())
}

/// Comparisons straight from per-group descriptives. Variables keep their
/// first-appearance order; Levene needs raw data and is left out.
pub fn analyze_summaries(rows: &[SummaryRow], config: &AnalysisConfig) -> Result<Report> {
    let mut order: Vec<&str> = Vec::new();
    let mut table: HashMap<(&str, Group), &SummaryRow> = HashMap::new();
    for r in rows {
        if !order.contains(&r.variable.as_str()) {
            order.push(&r.variable);
        }
        if table.insert((&r.variable, r.group), r).is_some() {
            return Err(Error::validation(format!("{} {:?} given twice", r.variable, r.group)));
        }
    }
    let mut variables = Vec::new();
    for name in order {
        let mut groups = Vec::with_capacity(2);
        for g in [Group::G1, Group::G2] {
            let r = table
                .get(&(name, g))
                .ok_or_else(|| Error::validation(format!("{name}: no row for {g:?}")))?;
            let s = GroupSummary::from_moments(r.n, r.mean, r.sd)
                .map_err(|e| Error::validation(format!("{name} {g:?}: {e}")))?;
            groups.push(Descriptive::from_summary(g, &s));
        }
        variables.push(compare(name, [groups[0], groups[1]], None, config.alpha));
    }
    Ok(Report { variables, alpha: config.alpha, ..Report::default() })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RenderedReport {
    pub text: String,
    pub json: String,
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_owned(), |v| format!("{v:.3}"))
}

fn fmt_p(p: f64) -> String {
    if p < 0.001 {
        "<0.001".to_owned()
    } else {
        format!("{p:.3}")
    }
}

pub fn render_report(report: &Report) -> RenderedReport {
    let mut t = String::new();
    // Writing into a String cannot fail.
    let _ = writeln!(t, "# nudgelab analysis report");
    if let Some(tot) = &report.totals {
        let _ = writeln!(t, "\n## Totals");
        let _ = writeln!(t, "participants        G1 {}  G2 {}", tot.participants_g1, tot.participants_g2);
        let _ = writeln!(t, "events              {} ({} duplicate submissions dropped)", tot.events, tot.duplicates_dropped);
        let _ = writeln!(t, "#EDITS              {}", tot.edits);
        let _ = writeln!(t, "#POSTS              {}", tot.posts);
        let _ = writeln!(t, "#SHARES             {}", tot.shares);
        let _ = writeln!(t, "#PUBLICATIONS       {}", tot.publications);
        let _ = writeln!(t, "interventions       G1 {}  G2 {}", tot.interventions_g1, tot.interventions_g2);
        let _ = writeln!(t, "\n## Edit outcomes");
        for kind in [
            ChangeKind::CaptionChanged,
            ChangeKind::ImageChanged,
            ChangeKind::BothChanged,
            ChangeKind::NoChange,
            ChangeKind::Abandoned,
        ] {
            let label = serde_json::to_value(kind).ok().and_then(|v| v.as_str().map(str::to_owned)).unwrap_or_default();
            let _ = writeln!(t, "{label:<19} {}", report.edit_outcomes.get(&kind).copied().unwrap_or(0));
        }
    }

    let _ = writeln!(t, "\n## Descriptive group statistics");
    let _ = writeln!(t, "{:<15} {:<5} {:>4} {:>8} {:>8} {:>8}", "Variable", "Group", "N", "Mean", "SD", "SE");
    for v in &report.variables {
        for d in &v.groups {
            let _ = writeln!(
                t,
                "{:<15} {:<5} {:>4} {:>8.3} {:>8} {:>8}",
                v.variable,
                format!("{:?}", d.group),
                d.n,
                d.mean,
                opt(d.sd),
                opt(d.se)
            );
        }
    }

    let _ = writeln!(t, "\n## Levene's test for equality of variances");
    let _ = writeln!(t, "{:<15} {:>8} {:>5} {:>5} {:>8}", "Variable", "W", "df1", "df2", "Sig.");
    for v in &report.variables {
        if let Some(l) = &v.levene {
            let _ = writeln!(t, "{:<15} {:>8.3} {:>5} {:>5} {:>8}", v.variable, l.w, l.df_between, l.df_within, fmt_p(l.p));
        }
    }

    let _ = writeln!(t, "\n## Independent samples t-test (alpha = {}, * marks significance)", report.alpha);
    let _ = writeln!(
        t,
        "{:<15} {:>8} {:>5} {:>9} {:>11} {:>8} {:>20} {:>10}",
        "Variable", "t", "d.f.", "Sig.", "Mean diff.", "SE_DM", "95% CI", "Cohen's d"
    );
    for v in &report.variables {
        match &v.comparison {
            Some(c) => {
                let sig = format!("{}{}", fmt_p(c.p_two_tailed), if c.significant { "*" } else { " " });
                let ci = format!("({:.3}, {:.3})", c.ci95.0, c.ci95.1);
                let _ = writeln!(
                    t,
                    "{:<15} {:>8.3} {:>5} {:>9} {:>11.3} {:>8.3} {:>20} {:>10.3}",
                    v.variable, c.t, c.df, sig, c.mean_diff, c.se_dm, ci, c.cohens_d
                );
            }
            None if report.totals.is_some() && v.groups.iter().all(|g| g.n == 0) => {}
            None => {
                let _ = writeln!(t, "{:<15} not computed: {}", v.variable, v.note.as_deref().unwrap_or("-"));
            }
        }
    }

    if !report.reliability.is_empty() {
        let _ = writeln!(t, "\n## Scale reliability (Cronbach's alpha, threshold 0.70)");
        let _ = writeln!(t, "{:<8} {:>7} {:>6} {:>12}  flag", "Scale", "alpha", "items", "respondents");
        for r in &report.reliability {
            let _ = writeln!(
                t,
                "{:<8} {:>7} {:>6} {:>12}  {}",
                r.scale_id.as_str(),
                opt(r.cronbach_alpha),
                r.item_count,
                r.respondent_count,
                if r.below_threshold { "below threshold" } else { "" }
            );
        }
    }

    let json = serde_json::to_string_pretty(report).expect("report serializes");
    RenderedReport { text: t, json }
}
