//! Typed view of a registry study document plus the derived feature and
//! auxiliary rows.
//!
//! Closed categorical value sets carry fixed integer encodings; parsing
//! rejects any string outside a closed set. Fields the registry may omit are
//! `Option`s — missingness is data, never a sentinel value.

use std::collections::BTreeMap;
use std::collections::BTreeSet;
use std::fmt;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Validation errors raised while parsing a study document.
#[derive(Debug, Error)]
pub enum ParseError {
    #[error("malformed document: {0}")]
    MalformedDocument(String),
    #[error("invalid value {value:?} for field {field}")]
    InvalidEnumValue { field: &'static str, value: String },
    #[error("constraint violation: {0}")]
    ConstraintViolation(String),
}

macro_rules! closed_enum {
    ($name:ident, $field:literal, $(($variant:ident, $text:literal, $id:usize)),+ $(,)?) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            /// Registry feature name this value set belongs to.
            pub const FEATURE: &'static str = $field;

            pub fn from_registry(value: &str) -> Result<Self, ParseError> {
                match value {
                    $($text => Ok($name::$variant),)+
                    _ => Err(ParseError::InvalidEnumValue {
                        field: $field,
                        value: value.to_string(),
                    }),
                }
            }

            pub fn as_registry(self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }

            /// Fixed integer encoding of this value.
            pub fn id(self) -> usize {
                match self {
                    $($name::$variant => $id),+
                }
            }

            pub fn from_id(id: usize) -> Option<Self> {
                match id {
                    $($id => Some($name::$variant),)+
                    _ => None,
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_registry())
            }
        }
    };
}

closed_enum!(
    Phase,
    "phases",
    (Na, "NA", 0),
    (EarlyPhase1, "EARLY_PHASE1", 1),
    (Phase1, "PHASE1", 2),
    (Phase2, "PHASE2", 3),
    (Phase3, "PHASE3", 4),
    (Phase4, "PHASE4", 5),
);

closed_enum!(
    PrimaryPurpose,
    "primaryPurpose",
    (Treatment, "TREATMENT", 0),
    (Prevention, "PREVENTION", 1),
    (Diagnostic, "DIAGNOSTIC", 2),
    (Ect, "ECT", 3),
    (SupportiveCare, "SUPPORTIVE_CARE", 4),
    (Screening, "SCREENING", 5),
    (HealthServicesResearch, "HEALTH_SERVICES_RESEARCH", 6),
    (BasicScience, "BASIC_SCIENCE", 7),
    (DeviceFeasibility, "DEVICE_FEASIBILITY", 8),
    (Other, "OTHER", 9),
);

closed_enum!(
    Masking,
    "masking",
    (None, "NONE", 0),
    (Single, "SINGLE", 1),
    (Double, "DOUBLE", 2),
    (Triple, "TRIPLE", 3),
    (Quadruple, "QUADRUPLE", 4),
);

closed_enum!(
    Sex,
    "sex",
    (All, "ALL", 0),
    (Female, "FEMALE", 1),
    (Male, "MALE", 2),
);

closed_enum!(
    ArmGroupType,
    "armGroupTypes",
    (Experimental, "EXPERIMENTAL", 0),
    (ActiveComparator, "ACTIVE_COMPARATOR", 1),
    (PlaceboComparator, "PLACEBO_COMPARATOR", 2),
    (ShamComparator, "SHAM_COMPARATOR", 3),
    (NoIntervention, "NO_INTERVENTION", 4),
    (Other, "OTHER", 5),
);

closed_enum!(
    InterventionType,
    "interventionTypes",
    (Drug, "DRUG", 0),
    (Device, "DEVICE", 1),
    (Biological, "BIOLOGICAL", 2),
    (Procedure, "PROCEDURE", 3),
    (Radiation, "RADIATION", 4),
    (Behavioral, "BEHAVIORAL", 5),
    (Genetic, "GENETIC", 6),
    (DietarySupplement, "DIETARY_SUPPLEMENT", 7),
    (CombinationProduct, "COMBINATION_PRODUCT", 8),
    (DiagnosticTest, "DIAGNOSTIC_TEST", 9),
    (Other, "OTHER", 10),
);

/// Overall recruitment status. The registry's status vocabulary evolves, so
/// values outside the ones the pipeline branches on are preserved verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum OverallStatus {
    Completed,
    Terminated,
    Other(String),
}

impl OverallStatus {
    pub fn from_registry(value: &str) -> Self {
        match value {
            "COMPLETED" => OverallStatus::Completed,
            "TERMINATED" => OverallStatus::Terminated,
            other => OverallStatus::Other(other.to_string()),
        }
    }

    pub fn as_registry(&self) -> &str {
        match self {
            OverallStatus::Completed => "COMPLETED",
            OverallStatus::Terminated => "TERMINATED",
            OverallStatus::Other(s) => s,
        }
    }
}

/// Study type, open-world like [`OverallStatus`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum StudyType {
    Interventional,
    Observational,
    Other(String),
}

impl StudyType {
    pub fn from_registry(value: &str) -> Self {
        match value {
            "INTERVENTIONAL" => StudyType::Interventional,
            "OBSERVATIONAL" => StudyType::Observational,
            other => StudyType::Other(other.to_string()),
        }
    }

    pub fn as_registry(&self) -> &str {
        match self {
            StudyType::Interventional => "INTERVENTIONAL",
            StudyType::Observational => "OBSERVATIONAL",
            StudyType::Other(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignInfo {
    pub primary_purpose: Option<PrimaryPurpose>,
    pub masking: Option<Masking>,
    pub allocation: Option<String>,
    pub intervention_model: Option<String>,
    pub phases: BTreeSet<Phase>,
    pub oversight_has_dmc: Option<bool>,
    pub enrollment_count: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmGroup {
    pub label: String,
    pub group_type: ArmGroupType,
    pub description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterventionInfo {
    pub intervention_type: InterventionType,
    pub name: String,
    pub description: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EligibilityInfo {
    pub sex: Option<Sex>,
    pub healthy_volunteers: Option<bool>,
}

/// One adverse-event stats row: an event term reported for one arm group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdverseEventEntry {
    pub arm_group_id: String,
    pub event_term: String,
    pub num_affected: u64,
    pub num_at_risk: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DocumentFlags {
    pub has_protocol: bool,
    pub has_sap: bool,
    pub has_icf: bool,
}

/// Validated, typed view of one registry study document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    pub nct_id: String,
    pub overall_status: OverallStatus,
    pub study_type: StudyType,
    pub has_results: bool,
    pub start_date: Option<NaiveDate>,
    pub completion_date: Option<NaiveDate>,
    pub first_submit_date: NaiveDate,
    pub design: DesignInfo,
    pub arms: Vec<ArmGroup>,
    pub interventions: Vec<InterventionInfo>,
    pub eligibility: EligibilityInfo,
    pub adverse_events: Vec<AdverseEventEntry>,
    pub locations_count: u64,
    pub location_text: Option<String>,
    pub brief_summary: Option<String>,
    pub detailed_description: Option<String>,
    pub conditions: Vec<String>,
    pub condition_keywords: Vec<String>,
    pub sponsor_class: Option<String>,
    pub sponsor_name: Option<String>,
    pub document_flags: DocumentFlags,
    pub protocol_pdf_links: Vec<String>,
}

/// The per-trial feature vector. Every field carries an explicit missing
/// marker; counts are non-negative by type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRow {
    pub primary_purpose: Option<PrimaryPurpose>,
    pub masking: Option<Masking>,
    pub sex: Option<Sex>,
    pub phases: Option<BTreeSet<Phase>>,
    pub arm_group_types: Option<BTreeSet<ArmGroupType>>,
    pub intervention_types: Option<BTreeSet<InterventionType>>,
    pub healthy_volunteers: Option<bool>,
    pub oversight_has_dmc: Option<bool>,
    pub enrollment_count: Option<u64>,
    pub num_arms: Option<u64>,
    pub num_interventions: Option<u64>,
    pub num_locations: Option<u64>,
    pub allocation: Option<String>,
    pub intervention_model: Option<String>,
    pub brief_summary: Option<String>,
    pub detailed_description: Option<String>,
    pub conditions: Option<String>,
    pub conditions_keywords: Option<String>,
    pub arm_descriptions: Option<String>,
    pub intervention_names: Option<String>,
    pub intervention_descriptions: Option<String>,
    pub location_details: Option<String>,
}

impl FeatureRow {
    /// Text fields in their fixed layout order, paired with field names.
    /// The vectorizer consumes these; order is part of the on-disk contract.
    pub fn text_fields(&self) -> [(&'static str, Option<&str>); 10] {
        [
            ("allocation", self.allocation.as_deref()),
            ("interventionModel", self.intervention_model.as_deref()),
            ("briefSummary", self.brief_summary.as_deref()),
            ("detailedDescription", self.detailed_description.as_deref()),
            ("conditions", self.conditions.as_deref()),
            ("conditionsKeywords", self.conditions_keywords.as_deref()),
            ("armDescriptions", self.arm_descriptions.as_deref()),
            ("interventionNames", self.intervention_names.as_deref()),
            (
                "interventionDescriptions",
                self.intervention_descriptions.as_deref(),
            ),
            ("locationDetails", self.location_details.as_deref()),
        ]
    }
}

/// Pass-through columns kept alongside the features. The labeling stage
/// fills the dosing-error fields; until then they are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxiliaryRow {
    pub nct_id: String,
    pub overall_status: OverallStatus,
    pub lead_sponsor_class: Option<String>,
    pub lead_sponsor_name: Option<String>,
    pub has_protocol: bool,
    pub has_sap: bool,
    pub has_icf: bool,
    pub start_date: Option<NaiveDate>,
    pub completion_date: Option<NaiveDate>,
    pub protocol_pdf_links: Vec<String>,
    /// Per-concept matched adverse-event report counts (the `count_<id>` family).
    pub concept_counts: BTreeMap<String, u64>,
    pub ct_level_ade_population: Option<u64>,
    pub sum_dosing_errors: Option<u64>,
    pub dosing_error_rate: Option<f64>,
    pub wilson_lower_bound: Option<f64>,
}

/// Per-feature categorical encoding error.
#[derive(Debug, Error)]
pub enum EncodingError {
    #[error("unknown category {value:?} for feature {feature}")]
    UnknownCategory { feature: String, value: String },
}

/// Encodes a raw categorical string into its fixed integer id.
pub fn encode_categorical(feature: &str, raw: &str) -> Result<usize, EncodingError> {
    let unknown = || EncodingError::UnknownCategory {
        feature: feature.to_string(),
        value: raw.to_string(),
    };
    match feature {
        "phases" => Phase::from_registry(raw).map(Phase::id).map_err(|_| unknown()),
        "primaryPurpose" => PrimaryPurpose::from_registry(raw)
            .map(PrimaryPurpose::id)
            .map_err(|_| unknown()),
        "masking" => Masking::from_registry(raw).map(Masking::id).map_err(|_| unknown()),
        "sex" => Sex::from_registry(raw).map(Sex::id).map_err(|_| unknown()),
        "armGroupTypes" => ArmGroupType::from_registry(raw)
            .map(ArmGroupType::id)
            .map_err(|_| unknown()),
        "interventionTypes" => InterventionType::from_registry(raw)
            .map(InterventionType::id)
            .map_err(|_| unknown()),
        _ => Err(unknown()),
    }
}

/// Inverse of [`encode_categorical`].
pub fn decode_categorical(feature: &str, id: usize) -> Option<&'static str> {
    match feature {
        "phases" => Phase::from_id(id).map(Phase::as_registry),
        "primaryPurpose" => PrimaryPurpose::from_id(id).map(PrimaryPurpose::as_registry),
        "masking" => Masking::from_id(id).map(Masking::as_registry),
        "sex" => Sex::from_id(id).map(Sex::as_registry),
        "armGroupTypes" => ArmGroupType::from_id(id).map(ArmGroupType::as_registry),
        "interventionTypes" => InterventionType::from_id(id).map(InterventionType::as_registry),
        _ => None,
    }
}

/// The closed-set feature names, in encoding-table order.
pub const CATEGORICAL_FEATURES: &[&str] = &[
    "phases",
    "primaryPurpose",
    "masking",
    "sex",
    "armGroupTypes",
    "interventionTypes",
];

/// Number of ids in a closed feature's value set.
pub fn category_cardinality(feature: &str) -> usize {
    match feature {
        "phases" => Phase::ALL.len(),
        "primaryPurpose" => PrimaryPurpose::ALL.len(),
        "masking" => Masking::ALL.len(),
        "sex" => Sex::ALL.len(),
        "armGroupTypes" => ArmGroupType::ALL.len(),
        "interventionTypes" => InterventionType::ALL.len(),
        _ => 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn encoding_table_values() {
        assert_eq!(encode_categorical("phases", "PHASE2").unwrap(), 3);
        assert_eq!(encode_categorical("sex", "FEMALE").unwrap(), 1);
        assert_eq!(encode_categorical("masking", "NONE").unwrap(), 0);
        assert_eq!(encode_categorical("phases", "NA").unwrap(), 0);
        assert_eq!(encode_categorical("interventionTypes", "OTHER").unwrap(), 10);
    }

    #[test]
    fn unknown_category_rejected() {
        assert!(matches!(
            encode_categorical("masking", "QUINTUPLE"),
            Err(EncodingError::UnknownCategory { .. })
        ));
        assert!(encode_categorical("notAFeature", "X").is_err());
    }

    #[test]
    fn encode_decode_bijection() {
        for &feature in CATEGORICAL_FEATURES {
            let n = category_cardinality(feature);
            assert!(n > 0);
            for id in 0..n {
                let text = decode_categorical(feature, id).unwrap();
                assert_eq!(encode_categorical(feature, text).unwrap(), id);
            }
            assert!(decode_categorical(feature, n).is_none());
        }
    }

    #[test]
    fn open_enums_preserve_unknown_values() {
        let s = OverallStatus::from_registry("RECRUITING");
        assert_eq!(s, OverallStatus::Other("RECRUITING".to_string()));
        assert_eq!(s.as_registry(), "RECRUITING");
        assert_eq!(
            StudyType::from_registry("EXPANDED_ACCESS").as_registry(),
            "EXPANDED_ACCESS"
        );
    }
}
