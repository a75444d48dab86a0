//! Dosing-error labeling: concept matching on adverse-event terms, arm-level
//! aggregation, and Wilson lower-bound thresholding.
//!
//! A trial is positive when the lower bound of the Wilson confidence interval
//! for its dosing-error rate strictly exceeds the operational threshold.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::par;
use crate::registry::{Dataset, StudyRecord};

#[derive(Debug, Error)]
pub enum LabelError {
    #[error("term list is empty")]
    EmptyTermList,
    #[error("term list {path}: {message}")]
    BadTermList { path: PathBuf, message: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{nct_id}: no at-risk population")]
    NoAtRiskPopulation { nct_id: String },
    #[error("invalid counts: k={k} n={n}")]
    InvalidCounts { k: u64, n: u64 },
}

/// One dosing-error concept: a canonical term plus its synonyms.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DosingConcept {
    pub canonical_id: String,
    pub canonical_term: String,
    pub synonyms: Vec<String>,
}

/// The externally supplied concept list. Never hard-coded: the licensed
/// dictionary content is the user's to provide; a sample fixture with the
/// same schema ships with the repository.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DosingTermList {
    pub dictionary_version: String,
    pub concepts: Vec<DosingConcept>,
}

impl DosingTermList {
    /// Loads a tab-delimited term list: comment lines start with `#`, the
    /// header line `# dictionary_version: <v>` names the source dictionary,
    /// and every data row is `canonical_id <TAB> canonical_term <TAB> synonym`.
    pub fn load(path: &Path) -> Result<Self, LabelError> {
        let content = fs::read_to_string(path)?;
        let bad = |message: String| LabelError::BadTermList {
            path: path.to_path_buf(),
            message,
        };

        let mut dictionary_version = None;
        let mut by_id: BTreeMap<String, DosingConcept> = BTreeMap::new();
        for (i, line) in content.lines().enumerate() {
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                if let Some(v) = rest.trim().strip_prefix("dictionary_version:") {
                    dictionary_version = Some(v.trim().to_string());
                }
                continue;
            }
            let mut parts = line.split('\t');
            let (id, term, synonym) = match (parts.next(), parts.next(), parts.next()) {
                (Some(a), Some(b), Some(c)) => (a.trim(), b.trim(), c.trim()),
                _ => {
                    return Err(bad(format!(
                        "line {}: expected canonical_id<TAB>canonical_term<TAB>synonym",
                        i + 1
                    )))
                }
            };
            if normalize_term(synonym).is_empty() {
                return Err(bad(format!("line {}: synonym empty after normalization", i + 1)));
            }
            let entry = by_id.entry(id.to_string()).or_insert_with(|| DosingConcept {
                canonical_id: id.to_string(),
                canonical_term: term.to_string(),
                synonyms: Vec::new(),
            });
            if entry.canonical_term != term {
                return Err(bad(format!(
                    "line {}: canonical_id {id} maps to conflicting terms {:?} and {term:?}",
                    i + 1,
                    entry.canonical_term
                )));
            }
            if !entry.synonyms.iter().any(|s| s == synonym) {
                entry.synonyms.push(synonym.to_string());
            }
        }

        let dictionary_version =
            dictionary_version.ok_or_else(|| bad("missing `# dictionary_version:` header".into()))?;
        let concepts: Vec<DosingConcept> = by_id.into_values().collect();
        if concepts.is_empty() {
            return Err(LabelError::EmptyTermList);
        }
        Ok(DosingTermList {
            dictionary_version,
            concepts,
        })
    }
}

/// Case-folds, maps punctuation to spaces, collapses whitespace, trims.
pub fn normalize_term(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut pending_space = false;
    for c in raw.chars() {
        if c.is_alphanumeric() {
            if pending_space && !out.is_empty() {
                out.push(' ');
            }
            pending_space = false;
            for lower in c.to_lowercase() {
                out.push(lower);
            }
        } else {
            pending_space = true;
        }
    }
    out
}

/// Similarity between two already-normalized strings: the normalized
/// Levenshtein ratio (1 − edits / longer length).
fn similarity(a: &str, b: &str) -> f64 {
    strsim::normalized_levenshtein(a, b)
}

/// Finds the best-matching concept for an adverse-event term, if its
/// similarity reaches `min_similarity`. Ties break toward the lowest
/// canonical id.
pub fn match_term(
    ae_term: &str,
    list: &DosingTermList,
    min_similarity: f64,
) -> Result<Option<String>, LabelError> {
    if list.concepts.is_empty() {
        return Err(LabelError::EmptyTermList);
    }
    let needle = normalize_term(ae_term);
    let mut best: Option<(f64, &str)> = None;
    for concept in &list.concepts {
        let mut score = similarity(&needle, &normalize_term(&concept.canonical_term));
        for synonym in &concept.synonyms {
            score = score.max(similarity(&needle, &normalize_term(synonym)));
        }
        let better = match best {
            None => true,
            Some((s, id)) => score > s || (score == s && concept.canonical_id.as_str() < id),
        };
        if better {
            best = Some((score, &concept.canonical_id));
        }
    }
    Ok(best
        .filter(|(score, _)| *score >= min_similarity)
        .map(|(_, id)| id.to_string()))
}

/// Wilson-interval parameters: confidence level, its normal quantile, and
/// the labeling threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilsonParams {
    pub confidence: f64,
    pub z: f64,
    pub threshold: f64,
}

impl WilsonParams {
    pub fn new(confidence: f64, threshold: f64) -> Self {
        let z = normal_quantile(0.5 + confidence / 2.0);
        WilsonParams {
            confidence,
            z,
            threshold,
        }
    }
}

impl Default for WilsonParams {
    fn default() -> Self {
        WilsonParams::new(0.95, 0.0001)
    }
}

/// Inverse standard-normal CDF via Acklam's rational approximation
/// (|relative error| < 1.15e-9), deterministic across platforms.
pub fn normal_quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile defined on (0,1)");
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}

/// Lower bound of the Wilson score interval for `k` successes in `n` trials:
/// max(0, (p̂ + z²/2n − z·sqrt(p̂(1−p̂)/n + z²/4n²)) / (1 + z²/n)).
pub fn wilson_lower_bound(k: u64, n: u64, z: f64) -> Result<f64, LabelError> {
    if n == 0 || k > n {
        return Err(LabelError::InvalidCounts { k, n });
    }
    if k == 0 {
        // The closed form collapses to 0 algebraically at k = 0.
        return Ok(0.0);
    }
    let nf = n as f64;
    let p_hat = k as f64 / nf;
    let z2 = z * z;
    let center = p_hat + z2 / (2.0 * nf);
    let spread = z * (p_hat * (1.0 - p_hat) / nf + z2 / (4.0 * nf * nf)).sqrt();
    let lower = (center - spread) / (1.0 + z2 / nf);
    Ok(lower.clamp(0.0, p_hat))
}

/// Per-trial labeling aggregates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialAggregates {
    pub nct_id: String,
    /// Participants at risk, aggregated over arm groups (one denominator per arm).
    pub at_risk_n: u64,
    /// Sum of affected counts over adverse-event rows matching the term list.
    pub error_k: u64,
    pub rate: f64,
    pub wilson_lower: f64,
    pub label: bool,
}

/// Applies the strict-exceedance labeling rule.
pub fn assign_label(wilson_lower: f64, params: &WilsonParams) -> bool {
    wilson_lower > params.threshold
}

/// Outcome of aggregating one trial: the aggregates plus per-concept matched
/// report counts (the `count_<id>` family).
#[derive(Debug, Clone)]
pub struct TrialLabeling {
    pub aggregates: TrialAggregates,
    pub concept_counts: BTreeMap<String, u64>,
}

/// Aggregates one trial's adverse events to the trial level.
///
/// Each arm group's at-risk denominator is taken once (the maximum over that
/// arm's rows — the registry repeats the denominator across rows); matched
/// affected counts are summed over all rows.
pub fn aggregate_trial(
    record: &StudyRecord,
    list: &DosingTermList,
    min_similarity: f64,
    params: &WilsonParams,
) -> Result<TrialLabeling, LabelError> {
    let mut arm_at_risk: BTreeMap<&str, u64> = BTreeMap::new();
    let mut error_k: u64 = 0;
    let mut concept_counts: BTreeMap<String, u64> = BTreeMap::new();

    // Distinct terms are matched once and reused across rows.
    let mut match_cache: BTreeMap<&str, Option<String>> = BTreeMap::new();
    for entry in &record.adverse_events {
        let denom = arm_at_risk.entry(entry.arm_group_id.as_str()).or_insert(0);
        *denom = (*denom).max(entry.num_at_risk);

        let matched = match match_cache.get(entry.event_term.as_str()) {
            Some(cached) => cached.clone(),
            None => {
                let m = match_term(&entry.event_term, list, min_similarity)?;
                match_cache.insert(entry.event_term.as_str(), m.clone());
                m
            }
        };
        if let Some(concept_id) = matched {
            error_k += entry.num_affected;
            *concept_counts.entry(concept_id).or_insert(0) += 1;
        }
    }

    let at_risk_n: u64 = arm_at_risk.values().sum();
    if at_risk_n == 0 {
        return Err(LabelError::NoAtRiskPopulation {
            nct_id: record.nct_id.clone(),
        });
    }
    let error_k = error_k.min(at_risk_n);
    let rate = error_k as f64 / at_risk_n as f64;
    let wilson_lower = wilson_lower_bound(error_k, at_risk_n, params.z)?;
    Ok(TrialLabeling {
        aggregates: TrialAggregates {
            nct_id: record.nct_id.clone(),
            at_risk_n,
            error_k,
            rate,
            wilson_lower,
            label: assign_label(wilson_lower, params),
        },
        concept_counts,
    })
}

/// Labeling summary: prevalence, per-concept totals, and exclusions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelReport {
    pub dictionary_version: String,
    pub min_similarity: f64,
    pub wilson: WilsonParams,
    /// How matched error counts are aggregated; recorded because the source
    /// field is ambiguous between affected counts and event occurrences.
    pub error_count_source: String,
    pub total: usize,
    pub labeled: usize,
    pub positives: usize,
    pub prevalence: f64,
    pub concept_totals: BTreeMap<String, u64>,
    pub excluded: Vec<String>,
}

/// Labels every trial in the dataset. Trials without an at-risk population
/// are left unlabeled and listed as exclusions.
pub fn label_dataset(
    dataset: &Dataset,
    list: &DosingTermList,
    min_similarity: f64,
    params: &WilsonParams,
) -> Result<(Dataset, LabelReport), LabelError> {
    if list.concepts.is_empty() {
        return Err(LabelError::EmptyTermList);
    }
    let outcomes: Vec<Result<TrialLabeling, LabelError>> =
        par::map_slice(dataset.rows(), |row| {
            aggregate_trial(&row.record, list, min_similarity, params)
        });

    let mut labeled = dataset.clone();
    let mut report = LabelReport {
        dictionary_version: list.dictionary_version.clone(),
        min_similarity,
        wilson: *params,
        error_count_source: "sum of num_affected over matched adverse-event rows".to_string(),
        total: dataset.len(),
        labeled: 0,
        positives: 0,
        prevalence: 0.0,
        concept_totals: BTreeMap::new(),
        excluded: Vec::new(),
    };

    for (row, outcome) in labeled.rows_mut().iter_mut().zip(outcomes) {
        match outcome {
            Ok(labeling) => {
                report.labeled += 1;
                if labeling.aggregates.label {
                    report.positives += 1;
                }
                for (concept, count) in &labeling.concept_counts {
                    *report.concept_totals.entry(concept.clone()).or_insert(0) += count;
                }
                row.aux.concept_counts = labeling.concept_counts.clone();
                row.aux.ct_level_ade_population = Some(labeling.aggregates.at_risk_n);
                row.aux.sum_dosing_errors = Some(labeling.aggregates.error_k);
                row.aux.dosing_error_rate = Some(labeling.aggregates.rate);
                row.aux.wilson_lower_bound = Some(labeling.aggregates.wilson_lower);
                row.aggregates = Some(labeling.aggregates);
            }
            Err(LabelError::NoAtRiskPopulation { nct_id }) => {
                report.excluded.push(nct_id);
                row.aggregates = None;
            }
            Err(other) => return Err(other),
        }
    }
    if report.labeled > 0 {
        report.prevalence = report.positives as f64 / report.labeled as f64;
    }
    log::info!(
        "labeling: {} of {} trials positive ({:.2}%), {} excluded",
        report.positives,
        report.labeled,
        report.prevalence * 100.0,
        report.excluded.len()
    );
    Ok((labeled, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_list() -> DosingTermList {
        DosingTermList {
            dictionary_version: "test-0".to_string(),
            concepts: vec![
                DosingConcept {
                    canonical_id: "C001".to_string(),
                    canonical_term: "accidental overdose".to_string(),
                    synonyms: vec!["overdose accidental".to_string()],
                },
                DosingConcept {
                    canonical_id: "C002".to_string(),
                    canonical_term: "drug dose omission".to_string(),
                    synonyms: vec![],
                },
            ],
        }
    }

    #[test]
    fn normalization_rules() {
        assert_eq!(normalize_term("Accidental  Overdose."), "accidental overdose");
        assert_eq!(normalize_term(""), "");
        assert_eq!(normalize_term("DRUG\u{2013}dose omission"), "drug dose omission");
    }

    #[test]
    fn exact_match_after_normalization() {
        let list = sample_list();
        let m = match_term("Accidental overdose", &list, 0.9).unwrap();
        assert_eq!(m.as_deref(), Some("C001"));
    }

    #[test]
    fn unrelated_term_no_match() {
        let list = sample_list();
        assert_eq!(match_term("headache", &list, 0.9).unwrap(), None);
    }

    #[test]
    fn single_edit_ratio_match() {
        // "acidental overdose" is one edit from the 19-char canonical term:
        // similarity 1 - 1/19 ≈ 0.947.
        let list = sample_list();
        assert_eq!(
            match_term("acidental overdose", &list, 0.9).unwrap().as_deref(),
            Some("C001")
        );
        let sim = strsim::normalized_levenshtein("acidental overdose", "accidental overdose");
        assert!((sim - (1.0 - 1.0 / 19.0)).abs() < 1e-12);
    }

    #[test]
    fn empty_term_list_errors() {
        let empty = DosingTermList {
            dictionary_version: "x".to_string(),
            concepts: vec![],
        };
        assert!(matches!(
            match_term("anything", &empty, 0.9),
            Err(LabelError::EmptyTermList)
        ));
    }

    #[test]
    fn match_invariant_under_normalization() {
        let list = sample_list();
        for raw in ["Accidental OVERDOSE.", "drug—DOSE omission", "headache!!"] {
            let direct = match_term(raw, &list, 0.9).unwrap();
            let prenormalized = match_term(&normalize_term(raw), &list, 0.9).unwrap();
            assert_eq!(direct, prenormalized);
        }
    }

    #[test]
    fn wilson_zero_numerator_is_exactly_zero() {
        assert_eq!(wilson_lower_bound(0, 100, 1.959964).unwrap(), 0.0);
    }

    #[test]
    fn wilson_full_numerator_closed_form() {
        // k = n collapses to n / (n + z^2).
        let z = 1.959964_f64;
        let got = wilson_lower_bound(100, 100, z).unwrap();
        let expected = 100.0 / (100.0 + z * z);
        assert!((got - expected).abs() < 1e-12);
    }

    #[test]
    fn wilson_interior_value_in_range() {
        let w = wilson_lower_bound(3, 150, 1.959964).unwrap();
        assert!(w > 0.0 && w < 0.02, "w = {w}");
    }

    #[test]
    fn wilson_invalid_counts() {
        assert!(wilson_lower_bound(1, 0, 1.96).is_err());
        assert!(wilson_lower_bound(5, 3, 1.96).is_err());
    }

    #[test]
    fn wilson_monotone_in_k() {
        let z = 1.959964;
        for n in [1u64, 2, 10, 50, 137] {
            let mut prev = -1.0;
            for k in 0..=n {
                let w = wilson_lower_bound(k, n, z).unwrap();
                assert!(w >= prev, "k={k} n={n}");
                prev = w;
            }
        }
    }

    #[test]
    fn quantile_reference_values() {
        // Two-sided 95% quantile.
        assert!((normal_quantile(0.975) - 1.959964).abs() < 1e-6);
        assert!((normal_quantile(0.5)).abs() < 1e-9);
        assert!((normal_quantile(0.025) + normal_quantile(0.975)).abs() < 1e-9);
    }

    #[test]
    fn label_strict_exceedance() {
        let params = WilsonParams::default();
        assert!(!assign_label(0.0, &params));
        assert!(assign_label(0.0002, &params));
        assert!(!assign_label(0.0001, &params));
    }

    #[test]
    fn aggregation_example() {
        use crate::registry::AdverseEventEntry;
        let mut doc = crate::registry::parse_study(
            &crate::registry_test_doc(),
        )
        .unwrap();
        doc.adverse_events = vec![
            AdverseEventEntry {
                arm_group_id: "EG000".into(),
                event_term: "Accidental overdose".into(),
                num_affected: 2,
                num_at_risk: 100,
            },
            AdverseEventEntry {
                arm_group_id: "EG000".into(),
                event_term: "Headache".into(),
                num_affected: 30,
                num_at_risk: 100,
            },
            AdverseEventEntry {
                arm_group_id: "EG001".into(),
                event_term: "Drug dose omission".into(),
                num_affected: 1,
                num_at_risk: 50,
            },
        ];
        let labeling =
            aggregate_trial(&doc, &sample_list(), 0.9, &WilsonParams::default()).unwrap();
        assert_eq!(labeling.aggregates.at_risk_n, 150);
        assert_eq!(labeling.aggregates.error_k, 3);
        assert!((labeling.aggregates.rate - 0.02).abs() < 1e-12);
        assert_eq!(labeling.concept_counts.get("C001"), Some(&1));
        assert_eq!(labeling.concept_counts.get("C002"), Some(&1));
    }

    #[test]
    fn no_matching_events_is_negative() {
        use crate::registry::AdverseEventEntry;
        let mut doc = crate::registry::parse_study(&crate::registry_test_doc()).unwrap();
        doc.adverse_events = vec![AdverseEventEntry {
            arm_group_id: "EG000".into(),
            event_term: "Nausea".into(),
            num_affected: 4,
            num_at_risk: 80,
        }];
        let labeling =
            aggregate_trial(&doc, &sample_list(), 0.9, &WilsonParams::default()).unwrap();
        assert_eq!(labeling.aggregates.error_k, 0);
        assert_eq!(labeling.aggregates.rate, 0.0);
        assert_eq!(labeling.aggregates.wilson_lower, 0.0);
        assert!(!labeling.aggregates.label);
    }

    #[test]
    fn zero_at_risk_is_excluded() {
        let doc = crate::registry::parse_study(&crate::registry_test_doc()).unwrap();
        assert!(matches!(
            aggregate_trial(&doc, &sample_list(), 0.9, &WilsonParams::default()),
            Err(LabelError::NoAtRiskPopulation { .. })
        ));
    }
}
