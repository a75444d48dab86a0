//! Feature and auxiliary column extraction from validated study records.

use std::collections::BTreeMap;
use std::collections::BTreeSet;

use super::types::*;

fn join_nonempty(parts: impl IntoIterator<Item = String>) -> Option<String> {
    let collected: Vec<String> = parts.into_iter().filter(|s| !s.is_empty()).collect();
    if collected.is_empty() {
        None
    } else {
        Some(collected.join("; "))
    }
}

/// Builds the feature vector for one included trial. Absent fields carry the
/// missing marker; counts come straight from the record.
pub fn extract_features(record: &StudyRecord) -> FeatureRow {
    let phases = if record.design.phases.is_empty() {
        None
    } else {
        Some(record.design.phases.clone())
    };

    let arm_group_types: BTreeSet<ArmGroupType> =
        record.arms.iter().map(|a| a.group_type).collect();
    let arm_group_types = if arm_group_types.is_empty() {
        None
    } else {
        Some(arm_group_types)
    };

    let intervention_types: BTreeSet<InterventionType> = record
        .interventions
        .iter()
        .map(|i| i.intervention_type)
        .collect();
    let intervention_types = if intervention_types.is_empty() {
        None
    } else {
        Some(intervention_types)
    };

    FeatureRow {
        primary_purpose: record.design.primary_purpose,
        masking: record.design.masking,
        sex: record.eligibility.sex,
        phases,
        arm_group_types,
        intervention_types,
        healthy_volunteers: record.eligibility.healthy_volunteers,
        oversight_has_dmc: record.design.oversight_has_dmc,
        enrollment_count: record.design.enrollment_count,
        num_arms: Some(record.arms.len() as u64),
        num_interventions: Some(record.interventions.len() as u64),
        num_locations: Some(record.locations_count),
        allocation: record.design.allocation.clone(),
        intervention_model: record.design.intervention_model.clone(),
        brief_summary: record.brief_summary.clone(),
        detailed_description: record.detailed_description.clone(),
        conditions: join_nonempty(record.conditions.iter().cloned()),
        conditions_keywords: join_nonempty(record.condition_keywords.iter().cloned()),
        arm_descriptions: join_nonempty(
            record.arms.iter().filter_map(|a| a.description.clone()),
        ),
        intervention_names: join_nonempty(record.interventions.iter().map(|i| i.name.clone())),
        intervention_descriptions: join_nonempty(
            record
                .interventions
                .iter()
                .filter_map(|i| i.description.clone()),
        ),
        location_details: record.location_text.clone(),
    }
}

/// Builds the pass-through auxiliary columns. Labeling fields start empty.
pub fn extract_auxiliary(record: &StudyRecord) -> AuxiliaryRow {
    AuxiliaryRow {
        nct_id: record.nct_id.clone(),
        overall_status: record.overall_status.clone(),
        lead_sponsor_class: record.sponsor_class.clone(),
        lead_sponsor_name: record.sponsor_name.clone(),
        has_protocol: record.document_flags.has_protocol,
        has_sap: record.document_flags.has_sap,
        has_icf: record.document_flags.has_icf,
        start_date: record.start_date,
        completion_date: record.completion_date,
        protocol_pdf_links: record.protocol_pdf_links.clone(),
        concept_counts: BTreeMap::new(),
        ct_level_ade_population: None,
        sum_dosing_errors: None,
        dosing_error_rate: None,
        wilson_lower_bound: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry::parse::parse_study;

    fn record_with(mutate: impl FnOnce(&mut serde_json::Value)) -> StudyRecord {
        let mut doc = crate::registry::parse::tests::minimal_doc();
        mutate(&mut doc);
        parse_study(&doc.to_string()).unwrap()
    }

    #[test]
    fn counts_are_direct() {
        let record = record_with(|doc| {
            doc["protocolSection"]["armsInterventionsModule"]["armGroups"] = serde_json::json!([
                {"label": "A", "type": "EXPERIMENTAL"},
                {"label": "B", "type": "PLACEBO_COMPARATOR"},
                {"label": "C", "type": "OTHER"}
            ]);
            doc["protocolSection"]["armsInterventionsModule"]["interventions"] = serde_json::json!([
                {"type": "DRUG", "name": "X"},
                {"type": "DRUG", "name": "Y"}
            ]);
        });
        let row = extract_features(&record);
        assert_eq!(row.num_arms, Some(3));
        assert_eq!(row.num_interventions, Some(2));
        assert_eq!(row.num_locations, Some(0));
    }

    #[test]
    fn absent_fields_are_missing() {
        let record = record_with(|doc| {
            let protocol = doc["protocolSection"].as_object_mut().unwrap();
            protocol.remove("oversightModule");
            protocol["descriptionModule"]
                .as_object_mut()
                .unwrap()
                .remove("detailedDescription");
        });
        let row = extract_features(&record);
        assert_eq!(row.oversight_has_dmc, None);
        assert_eq!(row.detailed_description, None);
        assert!(row.brief_summary.is_some());
    }

    #[test]
    fn multi_label_sets_deduplicate() {
        let record = record_with(|doc| {
            doc["protocolSection"]["armsInterventionsModule"]["armGroups"] = serde_json::json!([
                {"label": "A", "type": "EXPERIMENTAL"},
                {"label": "B", "type": "EXPERIMENTAL"}
            ]);
        });
        let row = extract_features(&record);
        assert_eq!(row.arm_group_types.unwrap().len(), 1);
    }

    #[test]
    fn auxiliary_passthrough() {
        let record = record_with(|_| {});
        let aux = extract_auxiliary(&record);
        assert_eq!(aux.nct_id, "NCT00000001");
        assert_eq!(aux.lead_sponsor_name.as_deref(), Some("Example Org"));
        assert!(aux.wilson_lower_bound.is_none());
        assert!(aux.concept_counts.is_empty());
    }
}
