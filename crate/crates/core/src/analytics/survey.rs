//! Likert construct scoring and Cronbach's alpha.

use std::collections::{BTreeMap, HashSet};
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::domain::{reverse_item, AppVariant, ConstructScale, ScaleId, LIKERT_MAX, LIKERT_MIN};
use crate::{Error, Result};

/// Conventional minimum for acceptable internal consistency.
pub const ALPHA_THRESHOLD: f64 = 0.70;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyItemResponse {
    pub participant_id: i64,
    pub item_id: String,
    pub value: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstructScore {
    pub participant_id: i64,
    pub scale_id: ScaleId,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityResult {
    pub scale_id: ScaleId,
    /// `None` with fewer than two respondents or zero total variance.
    pub cronbach_alpha: Option<f64>,
    pub item_count: usize,
    pub respondent_count: usize,
    pub below_threshold: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SurveyScores {
    pub scores: Vec<ConstructScore>,
    pub reliability: Vec<ReliabilityResult>,
}

/// Cronbach's alpha of an integer response matrix (rows = respondents,
/// columns = items).
///
/// Works on the integer numerators `n·Σx² − (Σx)²` so that the result is
/// exact up to one final division: k identical items give exactly 1.
pub fn cronbach_alpha(matrix: &[Vec<u8>]) -> Option<f64> {
    let n = matrix.len() as i128;
    let k = matrix.first()?.len();
    if n < 2 || k < 2 || matrix.iter().any(|row| row.len() != k) {
        return None;
    }
    let scaled_var = |values: &mut dyn Iterator<Item = i128>| {
        let (s, q) = values.fold((0i128, 0i128), |(s, q), v| (s + v, q + v * v));
        n * q - s * s
    };
    let item_sum: i128 = (0..k)
        .map(|j| scaled_var(&mut matrix.iter().map(|row| i128::from(row[j]))))
        .sum();
    let total = scaled_var(&mut matrix.iter().map(|row| row.iter().map(|&v| i128::from(v)).sum()));
    if total == 0 {
        return None;
    }
    let k = k as i128;
    Some((k * (total - item_sum)) as f64 / ((k - 1) * total) as f64)
}

/// Scores every participant on every scale they answered completely and
/// computes each scale's reliability. Participants missing an item of a
/// scale are left out of that scale only.
pub fn score_survey(responses: &[SurveyItemResponse], scales: &[ConstructScale]) -> Result<SurveyScores> {
    let mut answers: BTreeMap<i64, BTreeMap<&str, u8>> = BTreeMap::new();
    for r in responses {
        if !(LIKERT_MIN..=LIKERT_MAX).contains(&r.value) {
            return Err(Error::validation(format!(
                "participant {}, item {}: value {} outside {LIKERT_MIN}..={LIKERT_MAX}",
                r.participant_id, r.item_id, r.value
            )));
        }
        if answers
            .entry(r.participant_id)
            .or_default()
            .insert(r.item_id.as_str(), r.value)
            .is_some()
        {
            return Err(Error::validation(format!(
                "participant {}, item {}: answered more than once",
                r.participant_id, r.item_id
            )));
        }
    }

    let mut out = SurveyScores::default();
    for scale in scales {
        let mut matrix = Vec::new();
        for (&participant, items) in &answers {
            let row: Option<Vec<u8>> = scale
                .item_ids
                .iter()
                .map(|item| {
                    items.get(item.as_str()).map(|&v| {
                        if scale.is_reversed(item) {
                            reverse_item(item, v).expect("range checked above")
                        } else {
                            v
                        }
                    })
                })
                .collect();
            let Some(row) = row else { continue };
            let score = row.iter().map(|&v| f64::from(v)).sum::<f64>() / row.len() as f64;
            out.scores.push(ConstructScore { participant_id: participant, scale_id: scale.scale_id, score });
            matrix.push(row);
        }
        let alpha = cronbach_alpha(&matrix);
        out.reliability.push(ReliabilityResult {
            scale_id: scale.scale_id,
            cronbach_alpha: alpha,
            item_count: scale.item_ids.len(),
            respondent_count: matrix.len(),
            below_threshold: alpha.is_some_and(|a| a < ALPHA_THRESHOLD),
        });
    }
    Ok(out)
}

/// A parsed survey file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SurveyFile {
    pub responses: Vec<SurveyItemResponse>,
    /// Filled from the optional `group` column (`V1`/`V2`).
    pub groups: BTreeMap<i64, AppVariant>,
}

pub fn read_survey_from_path(path: &Path) -> Result<SurveyFile> {
    let file = std::fs::File::open(path)?;
    read_survey(file, &path.display().to_string())
}

/// Reads `participant_id,item_id,value` rows, with an optional `group`
/// column holding the participant's app variant.
pub fn read_survey<R: Read>(input: R, source: &str) -> Result<SurveyFile> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let err = |line: u64, field: &str, message: String| Error::Parse {
        file: source.to_owned(),
        line,
        field: field.to_owned(),
        message,
    };
    let headers = rdr.headers().map_err(|e| err(1, "header", e.to_string()))?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let (Some(pid), Some(item), Some(value)) = (column("participant_id"), column("item_id"), column("value")) else {
        return Err(err(1, "header", "expected columns participant_id,item_id,value[,group]".into()));
    };
    let group = column("group");
    let known: HashSet<&str> = ["participant_id", "item_id", "value", "group"].into();
    if let Some(extra) = headers.iter().find(|h| !known.contains(h)) {
        return Err(err(1, "header", format!("unexpected column {extra:?}")));
    }

    let mut out = SurveyFile::default();
    for row in rdr.records() {
        let row = row.map_err(|e| err(e.position().map_or(0, |p| p.line()), "record", e.to_string()))?;
        let line = row.position().map_or(0, |p| p.line());
        let get = |i: usize| row.get(i).unwrap_or("");
        let participant_id: i64 = get(pid)
            .parse()
            .map_err(|e| err(line, "participant_id", format!("{:?}: {e}", get(pid))))?;
        let value: u8 = get(value)
            .parse()
            .map_err(|e| err(line, "value", format!("{:?}: {e}", get(value))))?;
        if let Some(g) = group {
            let variant: AppVariant = match get(g) {
                "V1" | "G1" | "1" => AppVariant::V1,
                "V2" | "G2" | "2" => AppVariant::V2,
                other => return Err(err(line, "group", format!("unknown group {other:?}"))),
            };
            if let Some(prev) = out.groups.insert(participant_id, variant) {
                if prev != variant {
                    return Err(err(line, "group", format!("participant {participant_id} changes group")));
                }
            }
        }
        out.responses.push(SurveyItemResponse { participant_id, item_id: get(item).to_owned(), value });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn answers(pid: i64, items: &[&str], values: &[u8]) -> Vec<SurveyItemResponse> {
        items
            .iter()
            .zip(values)
            .map(|(i, &v)| SurveyItemResponse { participant_id: pid, item_id: (*i).into(), value: v })
            .collect()
    }

    #[test]
    fn rsk_reversal_fixture() {
        let r = answers(1, &["RSK1", "RSK2", "RSK3"], &[7, 7, 1]);
        let s = score_survey(&r, &[ConstructScale::rsk()]).unwrap();
        assert_eq!(s.scores[0].score, 1.0);
    }

    #[test]
    fn ben_constant_fixture() {
        let ben = ConstructScale::ben();
        let items: Vec<&str> = ben.item_ids.iter().map(String::as_str).collect();
        let s = score_survey(&answers(9, &items, &[7; 11]), &[ben]).unwrap();
        assert_eq!(s.scores[0].score, 7.0);
    }

    #[test]
    fn out_of_range_names_participant_and_item() {
        let r = answers(12, &["PC1"], &[9]);
        let msg = score_survey(&r, &[ConstructScale::ctrl()]).unwrap_err().to_string();
        assert!(msg.contains("participant 12") && msg.contains("PC1"), "{msg}");
    }

    #[test]
    fn incomplete_participants_are_excluded_per_scale() {
        let mut r = answers(1, &["PC1", "PC2", "PC3"], &[2, 3, 4]);
        r.extend(answers(2, &["PC1", "PC2"], &[5, 5]));
        let s = score_survey(&r, &[ConstructScale::ctrl()]).unwrap();
        assert_eq!(s.scores.len(), 1);
        assert_eq!(s.reliability[0].respondent_count, 1);
        assert_eq!(s.reliability[0].cronbach_alpha, None);
    }

    #[test]
    fn identical_items_give_alpha_one_exactly() {
        let m: Vec<Vec<u8>> = [1u8, 4, 7, 3, 3, 6].iter().map(|&v| vec![v; 6]).collect();
        assert_eq!(cronbach_alpha(&m), Some(1.0));
    }

    #[test]
    fn threshold_flag() {
        // Uncorrelated items give a low alpha.
        let m = [vec![1, 7, 4], vec![7, 1, 4], vec![4, 4, 1], vec![4, 4, 7]];
        let ctrl = ConstructScale::ctrl();
        let mut r = Vec::new();
        for (p, row) in m.iter().enumerate() {
            r.extend(answers(p as i64, &["PC1", "PC2", "PC3"], row));
        }
        let rel = score_survey(&r, &[ctrl]).unwrap().reliability[0];
        let a = rel.cronbach_alpha.unwrap();
        assert!(a < ALPHA_THRESHOLD);
        assert!(rel.below_threshold);
    }

    #[test]
    fn survey_file_with_groups() {
        let csv = "participant_id,group,item_id,value\n1,V1,PC1,3\n2,V2,PC1,5\n";
        let f = read_survey(csv.as_bytes(), "s.csv").unwrap();
        assert_eq!(f.responses.len(), 2);
        assert_eq!(f.groups[&2], AppVariant::V2);
        let bad = "participant_id,item_id,value\n1,PC1,x\n";
        match read_survey(bad.as_bytes(), "s.csv") {
            Err(Error::Parse { line, field, .. }) => assert_eq!((line, field.as_str()), (2, "value")),
            other => panic!("{other:?}"),
        }
    }

    /// Covariance-matrix form: alpha = k/(k-1) * (1 - trace(C) / sum(C)).
    fn covariance_alpha(m: &[Vec<u8>]) -> f64 {
        let n = m.len() as f64;
        let k = m[0].len();
        let means: Vec<f64> = (0..k).map(|j| m.iter().map(|r| f64::from(r[j])).sum::<f64>() / n).collect();
        let cov = |a: usize, b: usize| {
            m.iter().map(|r| (f64::from(r[a]) - means[a]) * (f64::from(r[b]) - means[b])).sum::<f64>() / (n - 1.0)
        };
        let mut trace = 0.0;
        let mut total = 0.0;
        for a in 0..k {
            for b in 0..k {
                let c = cov(a, b);
                total += c;
                if a == b {
                    trace += c;
                }
            }
        }
        k as f64 / (k as f64 - 1.0) * (1.0 - trace / total)
    }

    proptest! {
        #[test]
        fn alpha_matches_covariance_oracle(m in proptest::collection::vec(proptest::collection::vec(1u8..=7, 6), 20)) {
            if let Some(a) = cronbach_alpha(&m) {
                prop_assert!((a - covariance_alpha(&m)).abs() < 1e-9);
                prop_assert!(a <= 1.0 + 1e-12);
            }
        }

        #[test]
        fn alpha_ignores_constant_shift_of_one_item(
            m in proptest::collection::vec(proptest::collection::vec(1u8..=4, 4), 10),
            shift in 0u8..=3,
        ) {
            let shifted: Vec<Vec<u8>> = m.iter().map(|r| { let mut r = r.clone(); r[1] += shift; r }).collect();
            prop_assert_eq!(cronbach_alpha(&m), cronbach_alpha(&shifted));
        }
    }
}
